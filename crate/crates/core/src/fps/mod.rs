//! Sparse truncated formal power series, maps, and their calculus.

pub mod hot;
pub mod json;
pub mod map;
pub mod multiindex;
pub mod series;

pub use map::{compose, invert, solve_implicit, FormalMap};
pub use multiindex::MultiIndex;
pub use series::FormalSeries;
