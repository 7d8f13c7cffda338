use thiserror::Error;

use crate::solver::SolveStatus;

#[derive(Error, Debug, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    Dimension {
        context: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("eigenvalue iteration did not converge after {sweeps} sweeps")]
    Convergence { sweeps: usize },
    #[error("matrix is not positive semidefinite (min eigenvalue {min_eigenvalue:e})")]
    NotPsd { min_eigenvalue: f64 },
    #[error("structure error: {0}")]
    Structure(String),
    #[error("value out of range: {0}")]
    Range(String),
    #[error("contradictory equality rows: {0}")]
    InfeasibleStructure(String),
    #[error("solution is not near-feasible for the problem: {0}")]
    StaleSolution(String),
    #[error("rank reduction stalled after {iterations} iterations (ranks {ranks:?}, pataki sum {pataki_sum})")]
    ReductionStall {
        iterations: usize,
        ranks: Vec<usize>,
        pataki_sum: usize,
    },
    #[error("solver did not reach optimality (status {0:?})")]
    NotOptimal(SolveStatus),
    #[error("instance generation failed: {0}")]
    Generation(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_dim(context: &'static str, expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::Dimension {
            context,
            expected,
            found,
        })
    }
}
