//! Finite living temporal games: continuous-time stochastic games on
//! temporal graphs with switching costs, solved exactly after
//! uniformization.

pub mod config;
pub mod inertia;
pub mod intervene;
pub mod mech;
pub mod model;
pub mod scalar;
pub mod solve;
pub mod uniformize;
