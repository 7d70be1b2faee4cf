//! Benchmark fixtures shared by the criterion targets.

use bell_core::{rng, BellFunctional};
use rand::Rng as _;

/// Random functional with coefficients in `[-1, 1)`.
pub fn random_functional(inputs: usize, outputs: usize, seed: u64) -> BellFunctional {
    let mut r = rng::rng(seed);
    BellFunctional::from_fn(inputs, outputs, |_, _, _, _| r.random_range(-1.0..1.0)).expect("finite coefficients")
}
