//! Separable quadratically constrained quadratic programs and their
//! semidefinite relaxations.
//!
//! The crate builds block relaxations of horizontally connected QCQPs,
//! solves them with a small interior-point method, checks sufficient
//! conditions for exactness and reduces solution ranks.
//!
//! All numerical code is generic over [`Real`] (`f32` or `f64`); the `*F64`
//! aliases below fix the scalar to `f64`.

pub mod certificates;
pub mod connection;
pub mod error;
pub mod model;
pub mod random;
pub mod reduction;
pub mod scalar;
pub mod sdpr;
pub mod solver;
pub mod symkernel;

pub use certificates::{Certificate, CertificateKind};
pub use connection::{judge, make_example51, ExactnessVerdict, JudgeOptions, VerdictStatus};
pub use error::{Error, Result};
pub use model::{connect, lift, HomSepQcqp, Qcqp, QuadFunc, Relation, SeparableQcqp, SubQcqp};
pub use reduction::{extract_point, reduce, ReductionReport};
pub use scalar::Real;
pub use sdpr::{build_block, build_hom, build_shor, to_standard_form, BlockKind, BlockSdp};
pub use solver::{check_solution, solve, SdpSolution, SolveStatus, SolverOptions};
pub use symkernel::{eigen, frob_inner, is_psd, numeric_rank, psd_factor, SymMatrix};

pub type SymMatrixF64 = SymMatrix<f64>;
pub type QuadFuncF64 = QuadFunc<f64>;
pub type QcqpF64 = Qcqp<f64>;
pub type HomSepQcqpF64 = HomSepQcqp<f64>;
pub type SeparableQcqpF64 = SeparableQcqp<f64>;
pub type BlockSdpF64 = BlockSdp<f64>;
pub type SdpSolutionF64 = SdpSolution<f64>;
pub type ExactnessVerdictF64 = ExactnessVerdict<f64>;
