//! Worst-case errors of unshifted rank-1 lattice rules in weighted
//! unanchored Sobolev spaces, the `T_n` sums behind their mean-square
//! bounds, and checks of the resulting inequality chain.
//!
//! Every numeric routine runs in FLOAT (`f64`) or EXACT (`BigRational`)
//! mode; see [`Mode`].

pub mod bounds;
pub mod error;
pub mod kernel;
pub mod lattice;
pub mod numeric;
pub mod search;
pub mod suite;
pub mod tn;
pub mod wce;
pub mod weights;

pub use error::{Error, Result};
pub use num_rational::BigRational;
pub use lattice::{lattice_points, GeneratingVector, LatticePointSet};
pub use numeric::{Mode, Real, Scalar};
pub use search::{SearchMethod, SearchResult};
pub use tn::{tn_table, TnTable};
pub use wce::{WceMethod, WceResult};
pub use weights::{Subset, WeightKind, WeightModel, Weights};
