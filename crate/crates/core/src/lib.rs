//! Hamiltonian Monte Carlo: symplectic integrators, HMC variants and chain
//! diagnostics, together with the bundled experiment distributions.

pub mod analysis;
pub mod error;
pub mod integrators;
pub mod model;
pub mod samplers;
pub mod targets;

pub use error::{Error, Result};
pub use model::{
    hamiltonian, check_gradient, Bounds, CanonicalDensity, KineticSpec, PhaseState, PotentialPart,
    TargetDensity,
};
pub use integrators::{
    leapfrog_step, leapfrog_trajectory, stability_eigenvalues, SplitScheme, StepReport,
    TrajectoryOutcome,
};
pub use samplers::{run_chain, ChainRecord, IterationOutcome, KernelChoice, TrajectoryPlan};
