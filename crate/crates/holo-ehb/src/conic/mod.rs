//! Primal-dual interior-point solver for linear objectives over products of
//! nonnegative, second-order and positive-semidefinite cones.
//!
//! Problems are posed as
//!
//! ```text
//! minimize cᵀz  subject to  Σ_i z_i A_i − B ⪰ 0   (per PSD block)
//!                          D z − b ∈ L^k          (per SOC block)
//! ```
//!
//! Size-1 PSD blocks are handled as the nonnegative orthant.

mod dump;
mod hermitian;
mod ipm;
mod problem;
mod rank_one;

pub use dump::to_cbf;
pub use hermitian::HermitianVar;
pub use ipm::{solve, ConicSolution, SolverConfig, SolverStatus};
pub use problem::{ConicProblem, PsdBlock, SocBlock, SparseSym};
pub use rank_one::{gaussian_randomization, rank_one_extract, RankOneExtraction, RANK_ONE_TOL};
