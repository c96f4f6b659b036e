//! Formal-power-series normal-form toolkit for real submanifolds of C^{2p}
//! with CR singularities of maximal complex tangent dimension.

pub mod centralizers;
pub mod divisors;
pub mod error;
pub mod fps;
pub mod quadrics;
pub mod linalg;
pub mod manifolds;
pub mod normalform;
pub mod num;
