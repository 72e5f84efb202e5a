//! Min-plus product and exact-triangle toolbox.
//!
//! The crate is organized around a small set of data types — [`MaskedMatrix`]
//! for integer matrices with missing entries, [`TriangleInstance`] for
//! all-edges exact-triangle inputs, and [`RankDecomposition`] for select-plus
//! rank witnesses — plus the reductions that connect them:
//!
//! * [`matrix`]: the masked-matrix data model and the brute-force oracles
//!   every other solver is checked against.
//! * [`rank`]: select-plus rank decompositions, regularization, and the
//!   deterministic conflict-free covering routine.
//! * [`addcomb`]: sumsets, popular sums, greedy/BSG covers, and sum-order
//!   preserving hash search.
//! * [`triangle`]: the reduction pipeline from low-rank instances down to
//!   uniform low-doubling instances, and the solvers built on top of it.
//! * [`reductions`]: min-plus-side reductions (witness listing, small
//!   universe, doubling, hash compression).
//! * [`intermediate`]: min / min-max / min-equality / min-witness products
//!   and the graph gadgets that encode min-plus products as shortest paths.

pub mod addcomb;
pub mod error;
pub mod graph;
pub mod intermediate;
pub mod matrix;
pub mod rank;
pub mod reductions;
pub mod triangle;

pub use error::{Error, Result};
pub use matrix::{Entry, MaskedMatrix, TriangleInstance};
pub use rank::RankDecomposition;
