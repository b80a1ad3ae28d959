pub mod control;
pub mod diffusion;
pub mod error;
pub mod grid;
pub mod hand;
pub mod inpaint;
pub mod io;
pub mod metrics;
pub mod rng;
pub mod toy;
pub mod training;

pub use error::{Error, Result};
pub use grid::{Image, LatentGrid, Mask};
pub mod cli;
