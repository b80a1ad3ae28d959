use handfix::control::ControlStrength;
use handfix::diffusion::{ddim_update, guidance_compose};
use handfix::hand::mpjpe;
use handfix::inpaint::{downsample_mask, masked_compose};
use handfix::metrics::StatsAccumulator;
use handfix::training::inpaint_loss;
use handfix::{LatentGrid, Mask};
use proptest::prelude::*;

fn grid(c: usize, h: usize, w: usize) -> impl Strategy<Value = LatentGrid> {
    prop::collection::vec(-3.0f64..3.0, c * h * w).prop_map(move |v| LatentGrid::from_vec((c, h, w), v).unwrap())
}

fn mask(h: usize, w: usize) -> impl Strategy<Value = Mask> {
    prop::collection::vec(any::<bool>(), h * w)
        .prop_map(move |v| Mask::new(ndarray::Array2::from_shape_vec((h, w), v).unwrap()))
}

fn triple() -> impl Strategy<Value = (LatentGrid, LatentGrid, Mask)> {
    (1usize..4, 1usize..9, 1usize..9).prop_flat_map(|(c, h, w)| (grid(c, h, w), grid(c, h, w), mask(h, w)))
}

proptest! {
    #[test]
    fn compose_selects_per_element((a, b, m) in triple()) {
        let out = masked_compose(&a, &b, &m).unwrap();
        for ((k, y, x), v) in out.data().indexed_iter() {
            let want = if m.get(y, x) { a.data()[[k, y, x]] } else { b.data()[[k, y, x]] };
            prop_assert_eq!(v.to_bits(), want.to_bits());
        }
    }

    #[test]
    fn guidance_unit_weight_is_positive_branch((a, b, _m) in triple()) {
        let g = guidance_compose(&a, &b, 1.0).unwrap();
        prop_assert_eq!(g, a);
    }

    #[test]
    fn guidance_is_affine_in_weight((a, b, _m) in triple(), w in -2.0f64..10.0) {
        let g = guidance_compose(&a, &b, w).unwrap();
        for ((k, y, x), v) in g.data().indexed_iter() {
            let (p, n) = (a.data()[[k, y, x]], b.data()[[k, y, x]]);
            prop_assert!((v - (n + w * (p - n))).abs() < 1e-12);
        }
    }

    #[test]
    fn ddim_update_is_linear(
        (x1, x2, _m) in triple(),
        s in 0.0f64..1.0,
        ab in (0.01f64..0.99, 0.0f64..1.0),
        (p, q) in (-2.0f64..2.0, -2.0f64..2.0),
    ) {
        let (e1, e2) = (x2.scale(0.7), x1.scale(-1.3).map(|v| v + s));
        let (ab_from, ab_to) = (ab.0, ab.0 + (1.0 - ab.0) * ab.1);
        let lhs = ddim_update(&x1.axpby(p, &x2, q).unwrap(), &e1.axpby(p, &e2, q).unwrap(), ab_from, ab_to).unwrap();
        let rhs = ddim_update(&x1, &e1, ab_from, ab_to).unwrap()
            .axpby(p, &ddim_update(&x2, &e2, ab_from, ab_to).unwrap(), q).unwrap();
        let scale = 1.0 + rhs.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        prop_assert!(lhs.max_abs_diff(&rhs).unwrap() <= 1e-9 * scale);
    }

    #[test]
    fn loss_ignores_unmasked_residuals((a, b, m) in triple(), noise in -5.0f64..5.0) {
        prop_assume!(!m.is_empty());
        let mut perturbed = b.clone();
        for ((_, y, x), v) in perturbed.data_mut().indexed_iter_mut() {
            if !m.get(y, x) {
                *v += noise;
            }
        }
        let l1 = inpaint_loss(&a, &b, &m).unwrap();
        let l2 = inpaint_loss(&a, &perturbed, &m).unwrap();
        prop_assert_eq!(l1.to_bits(), l2.to_bits());
    }

    #[test]
    fn downsampled_mask_covers_every_overlapping_cell(
        m in (1usize..20, 1usize..20).prop_flat_map(|(h, w)| mask(h, w)),
        f in (1usize..5, 1usize..5),
    ) {
        let (ph, pw) = m.dim();
        let (lh, lw) = (ph.div_ceil(f.0), pw.div_ceil(f.1));
        let d = downsample_mask(&m, (lh, lw));
        for i in 0..lh {
            for j in 0..lw {
                let mut want = false;
                for y in 0..ph {
                    for x in 0..pw {
                        let overlaps = y * lh < (i + 1) * ph && (y + 1) * lh > i * ph
                            && x * lw < (j + 1) * pw && (x + 1) * lw > j * pw;
                        want |= overlaps && m.get(y, x);
                    }
                }
                prop_assert_eq!(d.get(i, j), want);
            }
        }
    }

    #[test]
    fn strength_domain(s in -2.0f64..3.0) {
        prop_assert_eq!(ControlStrength::new(s).is_ok(), (0.0..=1.0).contains(&s));
    }

    #[test]
    fn mpjpe_of_a_rigid_shift(
        pts in prop::collection::vec((-50.0f64..50.0, -50.0f64..50.0), 1..30),
        (dx, dy) in (-10.0f64..10.0, -10.0f64..10.0),
    ) {
        let k: Vec<[f64; 2]> = pts.iter().map(|&(x, y)| [x, y]).collect();
        let moved: Vec<[f64; 2]> = k.iter().map(|p| [p[0] + dx, p[1] + dy]).collect();
        let e = mpjpe(&k, &moved).unwrap();
        prop_assert!((e - dx.hypot(dy)).abs() < 1e-9);
        prop_assert_eq!(e, mpjpe(&moved, &k).unwrap());
    }

    #[test]
    fn merged_stats_equal_sequential(
        rows in prop::collection::vec(prop::collection::vec(-3.0f64..3.0, 3), 4..40),
        split in 2usize..30,
    ) {
        let split = split.min(rows.len() - 2);
        let mut all = StatsAccumulator::new(3);
        let (mut a, mut b) = (StatsAccumulator::new(3), StatsAccumulator::new(3));
        for (i, r) in rows.iter().enumerate() {
            all.push(r).unwrap();
            if i < split { a.push(r).unwrap() } else { b.push(r).unwrap() }
        }
        a.merge(&b).unwrap();
        let (x, y) = (all.finish().unwrap(), a.finish().unwrap());
        prop_assert!((x.mean - y.mean).amax() < 1e-10);
        prop_assert!((x.covariance - y.covariance).amax() < 1e-10);
    }
}
