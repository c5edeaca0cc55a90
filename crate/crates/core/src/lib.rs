//! Contravariant connections on Poisson manifolds, the Hawkins bracket, the
//! metacurvature and the tensor `T`, with a numerical reconstruction of the
//! local Lie-algebra action behind a flat connection whose `T` vanishes.

#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

pub mod chart;
pub mod cli;
pub mod connection;
pub mod forms;
pub mod frobenius;
pub mod hawkins;
pub mod linalg;
pub mod poisson;
pub mod symexpr;

use thiserror::Error;

pub use symexpr::{EvalError, ExprError};

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Expr(#[from] ExprError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("chart mismatch: {left}-dimensional object combined with {right}-dimensional one")]
    ChartMismatch { left: usize, right: usize },
    #[error("cannot contract a degree-{vector} multivector into a degree-{form} form")]
    DegreeUnderflow { vector: usize, form: usize },
    #[error("invalid chart: {0}")]
    InvalidChart(String),
    #[error("poisson matrix is not antisymmetric at ({}, {})", .i + 1, .j + 1)]
    NotAntisymmetric { i: usize, j: usize },
    #[error("classical Yang-Baxter residual is nonzero: {0}")]
    Cybe(String),
    #[error("action is inconsistent: {0}")]
    BadAction(String),
    #[error("poisson tensor of the action differs from the chart at ({}, {})", .i + 1, .j + 1)]
    PiMismatch { i: usize, j: usize },
    #[error("connection has nonzero torsion component T_{}{}^{}", .i + 1, .j + 1, .k + 1)]
    Torsion { i: usize, j: usize, k: usize },
    #[error("connection is not flat: R_{}{}{}^{} is nonzero", .i + 1, .j + 1, .k + 1, .l + 1)]
    NotFlat { i: usize, j: usize, k: usize, l: usize },
    #[error("metric is degenerate or not positive definite at the base point")]
    DegenerateMetric,
    #[error("point {point:?} is not regular")]
    NotRegular { point: Vec<f64> },
    #[error("rank of the poisson tensor jumps inside the region")]
    RankJump,
    #[error("chart is not in split form: {0}")]
    NotSplit(String),
    #[error("1-form passed as parallel is not parallel")]
    NotParallel,
    #[error("flat frame failed verification: {0}")]
    UnverifiedFrame(String),
    #[error("integrability residual {residual:e} exceeds {tol:e}")]
    NotIntegrable { residual: f64, tol: f64 },
    #[error("step {step:e} is too small for the domain")]
    StepUnderflow { step: f64 },
    #[error("grid: {0}")]
    Grid(String),
    #[error("tensor T is nonzero: {0}")]
    TensorTNonzero(String),
    #[error("stage `{stage}` failed: residual {residual:e} exceeds {tol:e}")]
    Residual {
        stage: &'static str,
        residual: f64,
        tol: f64,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
