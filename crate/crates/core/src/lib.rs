//! Classical, quantum and dimension-restricted vector values of Bell
//! functionals, the Khot-Vishnoi game family, and the Banach-norm
//! quantities that bound the largest Bell violation of a pure state.
//!
//! Modules, bottom up:
//! - [`model`]: functionals, boxes, states, POVMs and the pairing.
//! - [`classical`]: ω(M), local weight LP, marginal decomposition.
//! - [`quantum`]: see-saw lower bounds and the quantum-to-vector reduction.
//! - [`kv`]: Khot-Vishnoi game generator and closed-form values.
//! - [`relax`]: vector relaxations with and without a shared marginal.
//! - [`norms`]: projective, ℓ∞→ℓ2, Gaussian ℓ and 2-summing norms; twist maps.
//! - [`harness`]: the end-to-end verification suite and bound summaries.

pub mod classical;
pub mod error;
pub mod harness;
pub mod io;
pub mod kv;
pub mod linalg;
pub mod lp;
pub mod model;
pub mod norms;
pub mod quantum;
pub mod relax;
pub mod rng;
mod signs;
pub mod tol;

pub use error::{BellError, Result};
pub use model::{
    deterministic_box, pair, quantum_box, validate_box, BellFunctional, BoxDiagnostics, Povm, ProbBox, PureState,
    QuantumStrategy,
};
pub use relax::{Mode, VectorStrategy};
pub use tol::Tolerances;
