//! Small dense/sparse linear-algebra layer shared by all modules.

pub mod cg;
pub mod dense;
pub mod eig;
pub mod skyline;
pub mod sparse;

pub use cg::{cg_solve, cg_solve_complex, CgOutcome};
pub use eig::{lanczos_extremes, smallest_eig_shift_invert, EigPair};
pub use skyline::{combo_matvec, SkylineFactor};
pub use sparse::SparseSym;
