//! Forward noising and a deterministic DDIM trajectory on a small grid.
//!
//! cargo run --example noise_schedule

use handfix::diffusion::{ddim_step, forward_noise_rng, NoiseSchedule, TimestepPlan};
use handfix::rng;
use handfix::{LatentGrid, Result};

fn main() -> Result<()> {
    let schedule = NoiseSchedule::default();
    let plan = TimestepPlan::uniform(schedule.steps(), 10)?;
    println!("alpha_bar[0] = {}", schedule.alpha_bar(0)?);
    println!("alpha_bar[999] = {:.3e}", schedule.alpha_bar(999)?);
    println!("plan = {:?}", plan.taus());

    let x0 = LatentGrid::from_vec((1, 2, 3), vec![0.1, 0.4, 0.9, -0.3, 0.0, 0.5])?;
    let t = plan.first();
    let (mut x, eps) = forward_noise_rng(&x0, t, &schedule, &mut rng::rng(7))?;

    // With the true noise as the prediction every step is exact.
    for (from, to) in plan.transitions() {
        x = ddim_step(&x, &eps, from, to, &schedule)?;
        println!("t {from:>3} -> {to:>3}: max |x - x0| = {:.2e}", x.max_abs_diff(&x0)?);
    }
    Ok(())
}
