//! Conformable fractional calculus, Lie point symmetries of fractional
//! KdV/mKdV/Burgers/modified Burgers equations, similarity reductions and the
//! numerics needed to check all of it.

pub mod conformable;
pub mod equation;
pub mod expr;
pub mod jet;
pub mod ode;
pub mod quad;
pub mod reductions;
pub mod symmetry;
pub mod verifier;
