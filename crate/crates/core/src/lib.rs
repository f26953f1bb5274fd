//! Maximum-lifetime routing and in-network analytics for energy-constrained
//! multi-hop networks.

pub mod error;
pub mod harness;
pub mod lp;
pub mod net;
pub mod online;
pub mod scalar;
pub mod static_opt;

pub use scalar::Scalar;

pub type LinearProgramF64 = lp::LinearProgram<f64>;
pub type LinearProgramF32 = lp::LinearProgram<f32>;
pub type LpSolutionF64 = lp::LpSolution<f64>;
pub type PwlF64 = lp::PiecewiseLinearConcave<f64>;
