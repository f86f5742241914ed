//! Constructive-interference beamforming for underlay cognitive radio:
//! exact worst-user SEP minimisation, its SOCP approximation, the
//! conventional SINR-balancing baseline, and a Monte-Carlo harness.
//!
//! Numerical code is generic over [`scalar::Real`]; the aliases below fix
//! the scalar to `f64`, which is what the simulator uses.

pub mod error;
pub mod linalg;
pub mod model;
pub mod montecarlo;
pub mod scalar;
pub mod socp;
pub mod solvers;
pub mod specfun;

pub use error::{Error, Result};
pub use model::{Method, PskOrder};
pub use montecarlo::{run_mc, ChannelMode, McConfig, McReport};
pub use scalar::Real;
pub use solvers::{approx_wsusep, conventional_maxmin, wsusep_barrier};

pub type Scenario = model::Scenario<f64>;
pub type SymbolFrame = model::SymbolFrame<f64>;
pub type RealEmbedding = model::RealEmbedding<f64>;
pub type BeamSolution = model::BeamSolution<f64>;
pub type Constellation = model::Constellation<f64>;
pub type Correlation = specfun::Correlation<f64>;
pub type ConeProgram = socp::ConeProgram<f64>;
pub type BarrierParams = solvers::BarrierParams<f64>;
pub type Complex64 = num_complex::Complex<f64>;
