//! Noisy low-rank matrix sensing with a factorized (Burer–Monteiro) model.
//!
//! The crate covers the whole pipeline: Gaussian sensing instances and RIP
//! estimates ([`operator`]), the objective `½‖𝒜(XXᵀ) − b + w‖²` with its
//! derivatives ([`objective`]), gradient-based solvers ([`solver`]),
//! closed-form distance bounds for approximate second-order critical points
//! ([`bounds`]), and explicit dual certificates that witness those bounds
//! numerically ([`certify`]).

pub mod bounds;
pub mod certify;
pub mod error;
pub mod linalg;
pub mod objective;
pub mod operator;
pub mod rng;
pub mod solver;

pub use error::{Result, SenseError};
pub use objective::{FactorPoint, Objective, SecondOrderReport, SocResiduals};
pub use operator::{
    generate_instance, load_instance, save_instance, GroundTruth, InstanceSpec, NoiseModel, ProblemInstance,
    RipEstimate, SensingOperator,
};
pub use solver::{IterTrace, SolverConfig, StepSize, Termination};
