//! Numerical laboratory for Cucker-Smale flocking.
//!
//! * [`kernel`] — communication weights and their closed-form integrals.
//! * [`ensemble`] — agent states, diameters and sup-norms.
//! * [`continuous`] — symmetric, Motsch-Tadmor, bonding and mass-weighted
//!   models with a fixed-step RK4 integrator.
//! * [`discrete`] — discrete-time updates under leadership digraphs.
//! * [`topology`] — digraphs, leader distances, switching signals and the
//!   ε-norm.
//! * [`analysis`] — flocking-condition checkers, energies, Lyapunov
//!   functionals and outcome classification.
//! * [`two_particle`] — exact two-agent solutions used as an oracle.
//! * [`meanfield`] — empirical measures, transport distances and
//!   particle-number convergence studies.
//! * [`scenario`] — scenario files, presets and the command-line drivers.

pub mod analysis;
pub mod continuous;
pub mod discrete;
pub mod ensemble;
pub mod error;
pub mod kernel;
pub mod meanfield;
pub mod scenario;
pub mod topology;
pub mod two_particle;

pub use continuous::CtModel;
pub use discrete::DtModel;
pub use ensemble::{AgentState, DiagnosticsRecord, Ensemble};
pub use error::{FlockError, Result};
pub use kernel::Kernel;
pub use topology::Digraph;
