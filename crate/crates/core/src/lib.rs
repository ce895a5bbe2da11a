//! Surrogate-minimizing acceleration of spiraling splitting methods.
//!
//! * [`geometry`]: points, bisectors, circumcenters.
//! * [`operators`]: projections, Douglas-Rachford, circumcentered
//!   reflections and the operator `L_T`.
//! * [`lyapunov`]: Lyapunov gradients for graph feasibility problems and
//!   numerical checkers for their geometry.
//! * [`splitting`]: ADMM, dual reconstruction and dual accelerators for
//!   basis pursuit.
//! * [`bench`]: trajectory export and batch statistics.

pub mod bench;
pub mod geometry;
pub mod lyapunov;
pub mod operators;
pub mod splitting;

pub use geometry::{circumcenter, Point, DEFAULT_EPS_COL};
pub use operators::{dr_apply, lt_apply, pi_t, SetOracle};
