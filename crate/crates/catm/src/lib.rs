//! Constrained adiabatic trajectory method (CATM) for driven few-level systems.
//!
//! The time-dependent Schrödinger equation on a physical interval [0, T] is
//! recast as a single eigenproblem of the non-Hermitian Floquet Hamiltonian
//! H(t) - i d/dt on an enlarged period [0, T'], where an artificial absorbing
//! potential acting only on (T, T') forces one Floquet eigenstate to carry the
//! whole trajectory: Psi(t) = s e^{-i omega t} lambda(t).
//!
//! Units are hbar = 1 throughout; couplings, detunings, and the absorber
//! amplitude are angular frequencies, so the dimensionless products are
//! Omega0*T, Delta0*T, V0*T.
//!
//! Pipeline: [`timegrid`] (periodic grid + spectral derivative), [`models`]
//! (driven-level Hamiltonians), [`absorber`] (time-dependent absorbing
//! potentials), [`floquet`] (matrix assembly), [`eig`] (dense non-Hermitian
//! eigensolver), [`catm`] (connected-state selection and reconstruction),
//! [`reference`] (direct integrator used as the oracle), [`analysis`]
//! (error metrics, eigenvalue relations, parameter scans), [`cli`].

pub mod absorber;
pub mod analysis;
pub mod catm;
pub mod cli;
pub mod eig;
pub mod floquet;
pub mod models;
pub mod reference;
pub mod timegrid;

pub use num_complex::Complex64 as C64;

/// Crate-wide error type; the CLI maps variants to exit codes.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("{path}:{line}: {message}")]
    Format {
        path: String,
        line: usize,
        message: String,
    },
    #[error("convergence failure: {0}")]
    Convergence(String),
    #[error("selected eigenvector has no weight at t=0 (|lambda(t1)| = {0:.3e})")]
    DegenerateConnection(f64),
    #[error("family exclusion left no candidate for the non-connected eigenvalue")]
    NoPairCandidate,
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
