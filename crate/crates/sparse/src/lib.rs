//! Sparse linear algebra for the real-split stage systems of implicit
//! integrators: CSR storage, fill-reducing orderings, a direct sparse LU,
//! an ILU(0)-preconditioned GMRES fallback, and tiny dense helpers.

pub mod csr;
pub mod dense;
pub mod error;
pub mod gmres;
pub mod lu;
pub mod multifrontal;
pub mod ordering;

pub use csr::{CsrMatrix, Graph};
pub use dense::{eig3_real, DenseSmall, Eigen3};
pub use error::{LinalgError, Result};
pub use gmres::{GmresOptions, Ilu0, IluGmres};
pub use lu::{LeftLookingLu, LuOptions, SparseLu};
pub use multifrontal::LuSymbolic;
pub use ordering::{expand_strided, nested_dissection, reverse_cuthill_mckee, ColumnOrdering};

/// Which solver backs a [`Factorization`].
#[derive(Debug, Clone, PartialEq)]
pub enum SolverKind {
    Direct(LuOptions),
    Iterative(GmresOptions),
}

impl Default for SolverKind {
    fn default() -> Self {
        SolverKind::Direct(LuOptions::default())
    }
}

/// A prepared linear operator that can be solved against many right-hand
/// sides, from any number of threads.
#[derive(Debug, Clone)]
pub enum Factorization {
    Lu(SparseLu),
    Gmres(IluGmres),
}

impl Factorization {
    pub fn new(a: &CsrMatrix, kind: &SolverKind) -> Result<Self> {
        match kind {
            SolverKind::Direct(opts) => SparseLu::factor(a, opts).map(Factorization::Lu),
            SolverKind::Iterative(opts) => IluGmres::new(a, opts.clone()).map(Factorization::Gmres),
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Factorization::Lu(f) => f.dim(),
            Factorization::Gmres(f) => f.dim(),
        }
    }

    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        match self {
            Factorization::Lu(f) => f.solve(b),
            Factorization::Gmres(f) => f.solve(b),
        }
    }
}

/// Factors `a` with default options.
pub fn sparse_lu(a: &CsrMatrix) -> Result<Factorization> {
    Factorization::new(a, &SolverKind::default())
}
