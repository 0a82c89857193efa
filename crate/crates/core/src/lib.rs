//! Robust subspace clustering with self-representation graphs.
//!
//! The crate learns a coefficient matrix `Z` such that `X ≈ XZ` under a
//! choice of loss and regularizer, then clusters the affinity graph
//! `(|Z| + |Zᵀ|) / 2` with normalized spectral clustering.
//!
//! Non-quadratic losses and regularizers are minimized by half-quadratic
//! alternation: each outer step replaces the potential with a weighted
//! quadratic (weights from the minimizer function `δ(t) = φ'(t)/t`) and
//! solves the resulting least-squares problem exactly. The correntropy loss
//! `1 - exp(-e²/2σ²)` gives the CIL2 model (per-entry weights) and its row
//! variant rCIL2 (per-row weights); the same engine runs IRLS forms of SSC,
//! LRR and MSR, and plain LSR in closed form.
//!
//! Modules:
//! - [`matio`]: data matrices, CSV / binary I/O, column normalization
//! - [`hq`]: potentials, weight and kernel-size updates, objectives, the solve loop
//! - [`solvers`]: the quadratic Z-subproblem backends
//! - [`graph`]: affinity construction, spectral embedding, k-means
//! - [`metrics`]: clustering accuracy and normalized mutual information
//! - [`bench`]: synthetic subspaces, corruption models, experiment sweeps
//! - [`cli`]: the `cilgraph` command-line front end

pub mod bench;
pub mod cli;
mod error;
pub mod graph;
pub mod hq;
pub mod matio;
pub mod method;
pub mod metrics;
pub mod rng;
pub mod solvers;

pub use error::{Error, Result};
pub use graph::{build_affinity, kmeans, ncut_cluster, spectral_embed, AffinityGraph, ClusterLabels};
pub use hq::{hq_solve, LossKind, LossSpec, RegKind, RegSpec, SigmaMode, SolveOptions, SolveReport};
pub use matio::{DataMatrix, MatrixFormat};
pub use method::Method;
pub use metrics::EvalReport;
pub use solvers::CoefficientMatrix;
