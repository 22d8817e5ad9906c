//! Linear-solve services for the implicit steps: factorization backend with
//! cached symbolic analysis, and the worker pool for the independent stage
//! systems.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use mb4nls_sparse::{
    expand_strided, nested_dissection, ColumnOrdering, CsrMatrix, Factorization, IluGmres,
    LuOptions, LuSymbolic, SolverKind, SparseLu,
};

use crate::error::{Mb4Error, Result};
use crate::lattice::GridModel;

/// Up to three workers for the stage factorizations and solves.
///
/// Each task is computed by exactly one worker with the same arithmetic as
/// in sequential execution, so results do not depend on the worker count.
#[derive(Debug)]
pub struct WorkerPool {
    pool: Option<rayon::ThreadPool>,
    workers: usize,
}

impl WorkerPool {
    pub fn new(workers: usize) -> Result<Self> {
        if !(1..=3).contains(&workers) {
            return Err(Mb4Error::Config(format!(
                "workers must be 1, 2 or 3, got {workers}"
            )));
        }
        let pool = if workers > 1 {
            Some(
                rayon::ThreadPoolBuilder::new()
                    .num_threads(workers)
                    .thread_name(|i| format!("stage-{i}"))
                    .build()
                    .map_err(|e| Mb4Error::Config(format!("thread pool: {e}")))?,
            )
        } else {
            None
        };
        Ok(Self { pool, workers })
    }

    pub fn sequential() -> Self {
        Self {
            pool: None,
            workers: 1,
        }
    }

    pub fn workers(&self) -> usize {
        self.workers
    }

    /// Evaluates `f(0)`, `f(1)`, `f(2)`, concurrently when the pool allows.
    pub fn run3<T, F>(&self, f: F) -> [T; 3]
    where
        T: Send,
        F: Fn(usize) -> T + Sync,
    {
        match &self.pool {
            None => [f(0), f(1), f(2)],
            Some(pool) => pool.install(|| {
                let (a, (b, c)) = rayon::join(|| f(0), || rayon::join(|| f(1), || f(2)));
                [a, b, c]
            }),
        }
    }
}

/// Factorizes the stage matrices of one model.
///
/// The fill-reducing order comes from the grid graph and is expanded so that
/// the unknowns of a grid point stay adjacent. Symbolic analyses are cached
/// per matrix dimension since every step reuses the same pattern.
#[derive(Debug)]
pub struct LinearSolver {
    kind: SolverKind,
    n_nodes: usize,
    node_order: Vec<usize>,
    analyses: Mutex<HashMap<usize, Arc<LuSymbolic>>>,
}

impl LinearSolver {
    pub fn new(model: &GridModel, kind: SolverKind) -> Self {
        let node_order = match &kind {
            SolverKind::Direct(opts) if opts.ordering == ColumnOrdering::NestedDissection => {
                nested_dissection(&model.kinetic().symmetric_graph())
            }
            _ => Vec::new(),
        };
        Self {
            kind,
            n_nodes: model.dim(),
            node_order,
            analyses: Mutex::new(HashMap::new()),
        }
    }

    pub fn kind(&self) -> &SolverKind {
        &self.kind
    }

    fn lu_options(&self, dim: usize, opts: &LuOptions) -> LuOptions {
        if self.node_order.is_empty() || dim % self.n_nodes != 0 {
            return opts.clone();
        }
        LuOptions {
            ordering: ColumnOrdering::Given(expand_strided(
                &self.node_order,
                self.n_nodes,
                dim / self.n_nodes,
            )),
            pivot_threshold: opts.pivot_threshold,
        }
    }

    /// Symbolic analysis for the pattern of `a`, computed at most once per
    /// pattern.
    pub fn prepare(&self, a: &CsrMatrix) -> Result<()> {
        if let SolverKind::Direct(opts) = &self.kind {
            self.analysis(a, opts)?;
        }
        Ok(())
    }

    fn analysis(&self, a: &CsrMatrix, opts: &LuOptions) -> Result<Arc<LuSymbolic>> {
        let mut cache = self.analyses.lock().expect("analysis cache poisoned");
        if let Some(sym) = cache.get(&a.dim()) {
            if sym.matches(a) {
                return Ok(sym.clone());
            }
        }
        let sym = SparseLu::analyze(a, &self.lu_options(a.dim(), opts))?;
        cache.insert(a.dim(), sym.clone());
        Ok(sym)
    }

    pub fn factor(&self, a: &CsrMatrix) -> Result<Factorization> {
        match &self.kind {
            SolverKind::Direct(opts) => {
                let sym = self.analysis(a, opts)?;
                Ok(Factorization::Lu(SparseLu::factor_with(
                    a,
                    &sym,
                    opts.pivot_threshold,
                )?))
            }
            SolverKind::Iterative(opts) => Ok(Factorization::Gmres(IluGmres::new(a, opts.clone())?)),
        }
    }
}

/// Everything an implicit step needs besides the model: a solver and workers.
#[derive(Debug)]
pub struct StepContext {
    pub linear: LinearSolver,
    pub pool: WorkerPool,
}

impl StepContext {
    pub fn new(model: &GridModel, kind: SolverKind, workers: usize) -> Result<Self> {
        Ok(Self {
            linear: LinearSolver::new(model, kind),
            pool: WorkerPool::new(workers)?,
        })
    }

    /// Direct solver, one worker.
    pub fn sequential(model: &GridModel) -> Self {
        Self {
            linear: LinearSolver::new(model, SolverKind::default()),
            pool: WorkerPool::sequential(),
        }
    }
}
