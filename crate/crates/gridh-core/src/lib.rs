//! Grid inertia analytics: where the inertia lives, not just how much there is.
//!
//! The crate takes a static network description plus a solved operating point
//! and computes
//!
//! * the nodal inertia distribution via the frequency-divider and
//!   synchronizing-power-coefficient weights ([`inertia`]),
//! * a coherency partition of all buses from the inertia-weighted spectral
//!   problem of the network graph ([`partition`]),
//! * effective and conventional regional inertia plus what-if studies for new
//!   inertial devices ([`regional`]),
//! * a classical multi-machine swing simulator used as the internal oracle for
//!   all of the above ([`sim`]).
//!
//! Case files are JSON documents (see `cases/` in the repository root for the
//! shipped WSCC 9-bus, IEEE 39-bus and NETS-NYPS 68-bus fixtures).
//!
//! Convention: a machine's inertia enters every formula through `M = diag(H)`
//! with `H` in seconds on the system MVA base, so a bus served by a single
//! machine has nodal inertia `h = H` and the swing equation integrated by the
//! simulator is `H dω/dt = ΔP`.  Nodal inertia, regional aggregates, and
//! simulated rates of change of frequency are all consistent under this single
//! convention.

// validation uses `!(x > 0.0)` so that NaN fails the check too
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod inertia;
pub mod la;
pub mod model;
pub mod partition;
pub mod provenance;
pub mod regional;
pub mod sim;

pub use inertia::{FreqDivider, InertiaProfile, SpcMatrix};
pub use model::{
    Branch, Bus, BusId, CaseError, DeviceKind, GridCase, InertialDevice, Snapshot, SyncMachine,
};
pub use partition::{NetworkLaplacian, PartitionConfig, PartitionResult, SpectralEmbedding};
pub use regional::{MinInertiaResult, RegionalReport};
pub use sim::{ClassicalModel, SimResult};

/// Library version embedded in every output file.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Errors from the numerical pipeline (as opposed to case loading).
#[derive(Debug, thiserror::Error)]
pub enum ComputeError {
    #[error("linear algebra failure: {0}")]
    La(#[from] la::LaError),
    #[error("augmented susceptance system is singular: {0}")]
    SingularNetwork(String),
    #[error("no inertial source in the system")]
    NoInertialSource,
    #[error("nodal inertia undefined at bus {0}: {1}")]
    UndefinedInertia(BusId, String),
    #[error("degenerate spectral embedding: {0}")]
    DegenerateEmbedding(String),
    #[error("simulation diverged at t = {0} s")]
    Diverged(f64),
    #[error("{0}")]
    Invalid(String),
}
