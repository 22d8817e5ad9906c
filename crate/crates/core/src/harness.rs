//! Experiment drivers: configuration, time loop with observable recording,
//! output files, and the method comparison, parallel benchmark and
//! convergence studies.

use std::fmt::{self, Write as _};
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use mb4nls_sparse::{GmresOptions, SolverKind};

use crate::error::{Mb4Error, Result};
use crate::lattice::{
    build_delta_potential, initial_condition, observables_with, uniform_state, GridModel, GridSpec,
    Observables, Participation, State,
};
use crate::mb4::{NewtonConfig, StepDiagnostics};
use crate::methods::{Integrator, MethodId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum InitialKind {
    /// `1 + 2 cos x + 2 cos y`.
    #[default]
    Cosine,
    /// Uniform density, unit probability.
    Uniform,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub lx: f64,
    pub ly: f64,
    pub nx: usize,
    pub ny: usize,
    pub t_end: f64,
    pub dt: f64,
    pub gamma: f64,
    /// Depth of the single-site potential; 0 disables it.
    pub v0: f64,
    pub method: MethodId,
    pub workers: usize,
    pub newton: NewtonConfig,
    pub snapshot_times: Vec<f64>,
    pub initial: InitialKind,
    pub participation: Participation,
    pub solver: SolverKind,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            lx: 2.0 * std::f64::consts::PI,
            ly: 2.0 * std::f64::consts::PI,
            nx: 70,
            ny: 70,
            t_end: 1.0,
            dt: 0.01,
            gamma: 0.1,
            v0: 0.0,
            method: MethodId::Mb4,
            workers: 1,
            newton: NewtonConfig::default(),
            snapshot_times: Vec::new(),
            initial: InitialKind::Cosine,
            participation: Participation::Normalized,
            solver: SolverKind::default(),
        }
    }
}

fn parse_num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .trim()
        .parse()
        .map_err(|_| Mb4Error::Config(format!("bad value for {key}: '{value}'")))
}

impl RunConfig {
    /// Parses `key = value` lines on top of the defaults. `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| {
                Mb4Error::Config(format!("line {}: expected key = value", lineno + 1))
            })?;
            cfg.set(k.trim(), v.trim())?;
        }
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Mb4Error::Config(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    /// Sets one key. `eps` is the nonlinearity with the opposite sign.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "lx" => self.lx = parse_num(key, value)?,
            "ly" => self.ly = parse_num(key, value)?,
            "nx" => self.nx = parse_num(key, value)?,
            "ny" => self.ny = parse_num(key, value)?,
            "t_end" => self.t_end = parse_num(key, value)?,
            "dt" | "h" => self.dt = parse_num(key, value)?,
            "gamma" => self.gamma = parse_num(key, value)?,
            "eps" => self.gamma = -parse_num::<f64>(key, value)?,
            "v0" | "V0" => self.v0 = parse_num(key, value)?,
            "method" => self.method = value.parse()?,
            "workers" => self.workers = parse_num(key, value)?,
            "newton_eps" => self.newton.epsilon = parse_num(key, value)?,
            "newton_max_iters" => self.newton.max_iters = parse_num(key, value)?,
            "max_halvings" => self.newton.max_halvings = parse_num(key, value)?,
            "snapshot_times" => {
                self.snapshot_times = value
                    .split(',')
                    .map(str::trim)
                    .filter(|s| !s.is_empty())
                    .map(|s| parse_num(key, s))
                    .collect::<Result<_>>()?
            }
            "initial" => {
                self.initial = match value.to_ascii_lowercase().as_str() {
                    "cosine" => InitialKind::Cosine,
                    "uniform" => InitialKind::Uniform,
                    _ => return Err(Mb4Error::Config(format!("unknown initial state '{value}'"))),
                }
            }
            "participation" => {
                self.participation = match value.to_ascii_lowercase().as_str() {
                    "normalized" => Participation::Normalized,
                    "raw" => Participation::Raw,
                    _ => return Err(Mb4Error::Config(format!("unknown participation '{value}'"))),
                }
            }
            "solver" => {
                self.solver = match value.to_ascii_lowercase().as_str() {
                    "direct" | "lu" => SolverKind::default(),
                    "gmres" => SolverKind::Iterative(GmresOptions::default()),
                    _ => return Err(Mb4Error::Config(format!("unknown solver '{value}'"))),
                }
            }
            _ => return Err(Mb4Error::Config(format!("unknown key '{key}'"))),
        }
        Ok(())
    }

    /// Applies `key=value` overrides in order.
    pub fn apply_overrides<S: AsRef<str>>(&mut self, overrides: &[S]) -> Result<()> {
        for o in overrides {
            let o = o.as_ref();
            let (k, v) = o
                .split_once('=')
                .ok_or_else(|| Mb4Error::Config(format!("override '{o}' is not key=value")))?;
            self.set(k.trim(), v.trim())?;
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Mb4Error::Config(m));
        if self.nx < 2 || self.ny < 2 {
            return bad(format!("grid must be at least 2x2, got {}x{}", self.nx, self.ny));
        }
        if !(self.lx > 0.0 && self.ly > 0.0 && self.lx.is_finite() && self.ly.is_finite()) {
            return bad("domain lengths must be positive".into());
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return bad(format!("dt must be positive, got {}", self.dt));
        }
        if !(self.t_end >= self.dt && self.t_end.is_finite()) {
            return bad(format!("t_end ({}) must be at least dt ({})", self.t_end, self.dt));
        }
        if !(self.gamma.is_finite() && self.gamma >= 0.0) {
            return bad(format!("gamma must be finite and non-negative, got {}", self.gamma));
        }
        if !self.v0.is_finite() {
            return bad("v0 must be finite".into());
        }
        if !(1..=3).contains(&self.workers) {
            return bad(format!("workers must be 1, 2 or 3, got {}", self.workers));
        }
        if let Some(t) = self.snapshot_times.iter().find(|&&t| !(0.0..=self.t_end).contains(&t)) {
            return bad(format!("snapshot time {t} outside [0, t_end]"));
        }
        self.newton.validate()
    }

    pub fn grid(&self) -> Result<GridSpec> {
        GridSpec::new(self.nx, self.ny, self.lx, self.ly)
    }

    pub fn model(&self) -> Result<GridModel> {
        let grid = self.grid()?;
        let v = build_delta_potential(&grid, self.v0);
        GridModel::new(grid, v, self.gamma)
    }

    pub fn initial_state(&self, grid: &GridSpec) -> State {
        match self.initial {
            InitialKind::Cosine => initial_condition(grid),
            InitialKind::Uniform => uniform_state(grid),
        }
    }

    /// Step count: `ceil(t_end / dt)`, ignoring a rounding-level remainder.
    pub fn step_count(&self) -> usize {
        let r = self.t_end / self.dt;
        let n = r.round();
        if (r - n).abs() <= 1e-9 * r.max(1.0) {
            (n as usize).max(1)
        } else {
            r.ceil() as usize
        }
    }

    /// Time after step `k`; the last step ends exactly at `t_end`.
    pub fn time_of(&self, k: usize) -> f64 {
        if k >= self.step_count() {
            self.t_end
        } else {
            k as f64 * self.dt
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryRow {
    pub t: f64,
    pub observables: Observables,
    /// Step that produced this row; default for the initial row.
    pub diagnostics: StepDiagnostics,
}

impl TrajectoryRow {
    pub fn newton_iters(&self) -> usize {
        self.diagnostics.newton_iters
    }

    pub fn wall_seconds(&self) -> f64 {
        self.diagnostics.total_seconds
    }
}

/// `|u|^2` on the grid at one recorded time.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub requested: f64,
    pub t: f64,
    pub nx: usize,
    pub ny: usize,
    pub density: Vec<f64>,
}

impl Snapshot {
    pub fn mass(&self) -> f64 {
        self.density.iter().sum()
    }

    pub fn file_name(&self) -> String {
        format!("snapshot_{}.txt", self.t)
    }

    pub fn write<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "# {} {} {}", self.t, self.nx, self.ny)?;
        for row in self.density.chunks(self.nx) {
            let line: Vec<String> = row.iter().map(|v| format!("{v:.16e}")).collect();
            writeln!(w, "{}", line.join(" "))?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub method: MethodId,
    pub rows: Vec<TrajectoryRow>,
    pub snapshots: Vec<Snapshot>,
    pub final_state: State,
}

fn rel(x: f64, x0: f64, floor: f64) -> f64 {
    let d = (x - x0).abs() / x0.abs().max(floor);
    if d.is_nan() {
        f64::INFINITY
    } else {
        d
    }
}

impl Trajectory {
    fn initial(&self) -> &Observables {
        &self.rows[0].observables
    }

    /// `max_t |H(t) - H(0)| / max(1, |H(0)|)`; non-finite values count as infinite.
    pub fn max_energy_drift(&self) -> f64 {
        let h0 = self.initial().total_energy;
        self.rows
            .iter()
            .map(|r| rel(r.observables.total_energy, h0, 1.0))
            .fold(0.0, f64::max)
    }

    /// `max_t |P(t) - P(0)| / P(0)`.
    pub fn max_probability_drift(&self) -> f64 {
        let p0 = self.initial().probability;
        self.rows
            .iter()
            .map(|r| rel(r.observables.probability, p0, f64::MIN_POSITIVE))
            .fold(0.0, f64::max)
    }

    /// Largest change of `pick` from its initial value.
    pub fn max_variation(&self, pick: impl Fn(&Observables) -> f64) -> f64 {
        let x0 = pick(self.initial());
        self.rows
            .iter()
            .map(|r| (pick(&r.observables) - x0).abs())
            .fold(0.0, f64::max)
    }

    pub fn steps(&self) -> usize {
        self.rows.len() - 1
    }

    pub fn mean_step_seconds(&self) -> f64 {
        let s: f64 = self.rows[1..].iter().map(TrajectoryRow::wall_seconds).sum();
        s / self.steps().max(1) as f64
    }

    /// Share of the stepping time spent in factorizations and solves.
    pub fn linear_fraction(&self) -> f64 {
        let (mut lin, mut tot) = (0.0, 0.0);
        for r in &self.rows[1..] {
            lin += r.diagnostics.factor_seconds + r.diagnostics.solve_seconds;
            tot += r.diagnostics.total_seconds;
        }
        if tot > 0.0 {
            lin / tot
        } else {
            0.0
        }
    }

    pub fn total_newton_iters(&self) -> usize {
        self.rows.iter().map(TrajectoryRow::newton_iters).sum()
    }

    /// Same times, observables, iteration counts and final state, bit for bit.
    pub fn same_numbers(&self, other: &Trajectory) -> bool {
        let bits = |o: &Observables| {
            [
                o.u_kinetic,
                o.u_nonlinear,
                o.u_external,
                o.total_energy,
                o.probability,
                o.participation,
            ]
            .map(f64::to_bits)
        };
        self.rows.len() == other.rows.len()
            && self.rows.iter().zip(&other.rows).all(|(a, b)| {
                a.t.to_bits() == b.t.to_bits()
                    && bits(&a.observables) == bits(&b.observables)
                    && a.newton_iters() == b.newton_iters()
            })
            && self
                .final_state
                .as_slice()
                .iter()
                .zip(other.final_state.as_slice())
                .all(|(a, b)| a.re.to_bits() == b.re.to_bits() && a.im.to_bits() == b.im.to_bits())
    }

    /// CSV with header `t,UK,UI,UE,H,prob,participation,newton_iters,wall_s`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "t,UK,UI,UE,H,prob,participation,newton_iters,wall_s")?;
        for r in &self.rows {
            let o = &r.observables;
            writeln!(
                w,
                "{},{},{},{},{},{},{},{},{}",
                r.t,
                o.u_kinetic,
                o.u_nonlinear,
                o.u_external,
                o.total_energy,
                o.probability,
                o.participation,
                r.newton_iters(),
                r.wall_seconds()
            )?;
        }
        Ok(())
    }

    /// Writes `trajectory.csv` and the snapshot files into `dir`.
    pub fn write_outputs(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        fs::create_dir_all(dir)?;
        let mut written = Vec::new();
        let csv = dir.join("trajectory.csv");
        self.write_csv(io::BufWriter::new(fs::File::create(&csv)?))?;
        written.push(csv);
        for s in &self.snapshots {
            let p = dir.join(s.file_name());
            s.write(io::BufWriter::new(fs::File::create(&p)?))?;
            written.push(p);
        }
        Ok(written)
    }
}

/// Row index whose time is nearest to `t`, the earlier one on ties.
fn nearest_row(cfg: &RunConfig, t: f64) -> usize {
    (0..=cfg.step_count())
        .min_by(|&a, &b| {
            let da = (cfg.time_of(a) - t).abs();
            let db = (cfg.time_of(b) - t).abs();
            da.partial_cmp(&db).unwrap().then(a.cmp(&b))
        })
        .unwrap_or(0)
}

fn snapshot(cfg: &RunConfig, requested: f64, t: f64, u: &State) -> Snapshot {
    Snapshot {
        requested,
        t,
        nx: cfg.nx,
        ny: cfg.ny,
        density: u.density(),
    }
}

/// Integrates from the configured initial state to `t_end`, recording
/// observables after every step.
pub fn run(cfg: &RunConfig) -> Result<Trajectory> {
    cfg.validate()?;
    let model = cfg.model()?;
    let integrator = Integrator::new(
        &model,
        cfg.method,
        cfg.newton,
        cfg.solver.clone(),
        cfg.workers,
    )?;
    run_with(cfg, &model, &integrator)
}

/// [`run`] with a prebuilt model and integrator.
pub fn run_with(cfg: &RunConfig, model: &GridModel, integrator: &Integrator) -> Result<Trajectory> {
    let steps = cfg.step_count();
    let snap_rows: Vec<(f64, usize)> = cfg
        .snapshot_times
        .iter()
        .map(|&t| (t, nearest_row(cfg, t)))
        .collect();
    let mut snapshots = Vec::new();
    let take = |k: usize, t: f64, u: &State, out: &mut Vec<Snapshot>| {
        for &(req, row) in &snap_rows {
            if row == k {
                out.push(snapshot(cfg, req, t, u));
            }
        }
    };

    let mut u = cfg.initial_state(model.grid());
    let mut rows = Vec::with_capacity(steps + 1);
    rows.push(TrajectoryRow {
        t: 0.0,
        observables: observables_with(model, &u, cfg.participation)?,
        diagnostics: StepDiagnostics::default(),
    });
    take(0, 0.0, &u, &mut snapshots);
    for k in 1..=steps {
        let t0 = cfg.time_of(k - 1);
        let t1 = cfg.time_of(k);
        let (next, diag) = integrator
            .step(&u, t1 - t0)
            .map_err(|e| Mb4Error::StepFailed {
                t: t0,
                source: Box::new(e),
            })?;
        u = next;
        rows.push(TrajectoryRow {
            t: t1,
            observables: observables_with(model, &u, cfg.participation)?,
            diagnostics: diag,
        });
        take(k, t1, &u, &mut snapshots);
    }
    Ok(Trajectory {
        method: integrator.method(),
        rows,
        snapshots,
        final_state: u,
    })
}

/// Steps to `t_end` and returns only the final state.
pub fn final_state(cfg: &RunConfig) -> Result<State> {
    cfg.validate()?;
    let model = cfg.model()?;
    let it = Integrator::new(&model, cfg.method, cfg.newton, cfg.solver.clone(), cfg.workers)?;
    let mut u = cfg.initial_state(model.grid());
    for k in 1..=cfg.step_count() {
        let t0 = cfg.time_of(k - 1);
        u = it
            .step(&u, cfg.time_of(k) - t0)
            .map_err(|e| Mb4Error::StepFailed {
                t: t0,
                source: Box::new(e),
            })?
            .0;
    }
    Ok(u)
}

#[derive(Debug, Clone, PartialEq)]
pub struct MethodSummary {
    pub method: MethodId,
    pub energy_drift: f64,
    pub probability_drift: f64,
    pub mean_step_seconds: f64,
    pub mean_newton_iters: f64,
    /// Set when the run stopped early.
    pub failure: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonReport {
    pub nx: usize,
    pub ny: usize,
    pub dt: f64,
    pub t_end: f64,
    pub methods: Vec<MethodSummary>,
}

impl ComparisonReport {
    pub fn get(&self, m: MethodId) -> Option<&MethodSummary> {
        self.methods.iter().find(|s| s.method == m)
    }

    fn time_ratio(&self, num: MethodId, den: MethodId) -> Option<f64> {
        Some(self.get(num)?.mean_step_seconds / self.get(den)?.mean_step_seconds)
    }

    /// MB4 time per step over GAUSS2 time per step.
    pub fn mb4_over_gauss2(&self) -> Option<f64> {
        self.time_ratio(MethodId::Mb4, MethodId::Gauss2)
    }

    pub fn avf4_over_gauss2(&self) -> Option<f64> {
        self.time_ratio(MethodId::Avf4, MethodId::Gauss2)
    }

    /// RK4 energy drift over MB4 energy drift.
    pub fn rk4_over_mb4_energy(&self) -> Option<f64> {
        Some(self.get(MethodId::Rk4)?.energy_drift / self.get(MethodId::Mb4)?.energy_drift)
    }
}

impl fmt::Display for ComparisonReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "compare {}x{} dt={} t_end={}",
            self.nx, self.ny, self.dt, self.t_end
        )?;
        writeln!(
            f,
            "{:<8} {:>12} {:>12} {:>12} {:>8}  status",
            "method", "energy", "probability", "s/step", "newton"
        )?;
        for s in &self.methods {
            writeln!(
                f,
                "{:<8} {:>12.3e} {:>12.3e} {:>12.4e} {:>8.2}  {}",
                s.method.name(),
                s.energy_drift,
                s.probability_drift,
                s.mean_step_seconds,
                s.mean_newton_iters,
                s.failure.as_deref().unwrap_or("ok")
            )?;
        }
        let opt = |x: Option<f64>| x.map_or("n/a".to_string(), |v| format!("{v:.3}"));
        writeln!(f, "time MB4/GAUSS2 = {}", opt(self.mb4_over_gauss2()))?;
        writeln!(f, "time AVF4/GAUSS2 = {}", opt(self.avf4_over_gauss2()))?;
        writeln!(f, "energy drift RK4/MB4 = {}", opt(self.rk4_over_mb4_energy()))
    }
}

/// Runs every method in `methods` on `cfg`. A method that fails is reported
/// with its failure instead of aborting the comparison.
pub fn compare_methods(cfg: &RunConfig, methods: &[MethodId]) -> Result<ComparisonReport> {
    cfg.validate()?;
    let mut out = Vec::with_capacity(methods.len());
    for &m in methods {
        let c = RunConfig {
            method: m,
            snapshot_times: Vec::new(),
            ..cfg.clone()
        };
        out.push(match run(&c) {
            Ok(tr) => summarize(&tr, None),
            Err(e) if e.is_non_convergence() => MethodSummary {
                method: m,
                energy_drift: f64::INFINITY,
                probability_drift: f64::INFINITY,
                mean_step_seconds: f64::NAN,
                mean_newton_iters: f64::NAN,
                failure: Some(e.to_string()),
            },
            Err(e) => return Err(e),
        });
    }
    Ok(ComparisonReport {
        nx: cfg.nx,
        ny: cfg.ny,
        dt: cfg.dt,
        t_end: cfg.t_end,
        methods: out,
    })
}

/// Conservation and timing summary of one trajectory.
pub fn summarize(tr: &Trajectory, failure: Option<String>) -> MethodSummary {
    MethodSummary {
        method: tr.method,
        energy_drift: tr.max_energy_drift(),
        probability_drift: tr.max_probability_drift(),
        mean_step_seconds: tr.mean_step_seconds(),
        mean_newton_iters: tr.total_newton_iters() as f64 / tr.steps().max(1) as f64,
        failure,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchReport {
    pub nx: usize,
    pub ny: usize,
    pub steps: usize,
    pub workers: usize,
    pub hardware_threads: usize,
    pub sequential_step_seconds: f64,
    pub parallel_step_seconds: f64,
    pub sequential_linear_fraction: f64,
    pub parallel_linear_fraction: f64,
    pub identical: bool,
}

impl BenchReport {
    pub fn speedup(&self) -> f64 {
        self.sequential_step_seconds / self.parallel_step_seconds
    }
}

impl fmt::Display for BenchReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "bench MB4 {}x{} steps={} hardware_threads={}",
            self.nx, self.ny, self.steps, self.hardware_threads
        )?;
        writeln!(
            f,
            "workers=1: {:.4e} s/step, linear-solve fraction {:.3}",
            self.sequential_step_seconds, self.sequential_linear_fraction
        )?;
        writeln!(
            f,
            "workers={}: {:.4e} s/step, linear-solve fraction {:.3}",
            self.workers, self.parallel_step_seconds, self.parallel_linear_fraction
        )?;
        writeln!(f, "speedup = {:.3}", self.speedup())?;
        writeln!(f, "bit-identical = {}", self.identical)
    }
}

/// MB4 with one worker and with `workers` workers on the same workload.
pub fn parallel_bench(cfg: &RunConfig, workers: usize) -> Result<BenchReport> {
    let base = RunConfig {
        method: MethodId::Mb4,
        snapshot_times: Vec::new(),
        workers: 1,
        ..cfg.clone()
    };
    let seq = run(&base)?;
    let par = run(&RunConfig { workers, ..base })?;
    Ok(bench_report(cfg, workers, &seq, &par))
}

/// Builds the report from two finished runs.
pub fn bench_report(cfg: &RunConfig, workers: usize, seq: &Trajectory, par: &Trajectory) -> BenchReport {
    BenchReport {
        nx: cfg.nx,
        ny: cfg.ny,
        steps: seq.steps(),
        workers,
        hardware_threads: std::thread::available_parallelism().map_or(1, |n| n.get()),
        sequential_step_seconds: seq.mean_step_seconds(),
        parallel_step_seconds: par.mean_step_seconds(),
        sequential_linear_fraction: seq.linear_fraction(),
        parallel_linear_fraction: par.linear_fraction(),
        identical: seq.same_numbers(par),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceReport {
    pub method: MethodId,
    pub t_end: f64,
    pub reference_dt: f64,
    /// `(h, max_k |u_h(T) - u_ref(T)|)`, in the order given.
    pub errors: Vec<(f64, f64)>,
    /// Least-squares slope of `log error` against `log h`.
    pub slope: f64,
    pub seconds: f64,
}

impl ConvergenceReport {
    /// `error(h_i) / error(h_{i+1})` for consecutive entries.
    pub fn ratios(&self) -> Vec<f64> {
        self.errors.windows(2).map(|w| w[0].1 / w[1].1).collect()
    }
}

impl fmt::Display for ConvergenceReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "converge {} t_end={} reference dt={}",
            self.method, self.t_end, self.reference_dt
        )?;
        for (h, e) in &self.errors {
            writeln!(f, "h={h:<10} error={e:.6e}")?;
        }
        let ratios = self.ratios().iter().fold(String::new(), |mut s, r| {
            let _ = write!(s, " {r:.3}");
            s
        });
        writeln!(f, "ratios:{ratios}")?;
        writeln!(f, "slope = {:.4}", self.slope)
    }
}

/// Least-squares slope of `log y` against `log x`.
pub fn loglog_slope(points: &[(f64, f64)]) -> f64 {
    let n = points.len() as f64;
    let (lx, ly): (Vec<f64>, Vec<f64>) = points.iter().map(|&(x, y)| (x.ln(), y.ln())).unzip();
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = lx.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

/// Errors at `t_end` for each step size against the same method run with
/// the smallest step divided by 8, and the fitted order.
pub fn convergence_study(cfg: &RunConfig, h_list: &[f64]) -> Result<ConvergenceReport> {
    if h_list.len() < 3 {
        return Err(Mb4Error::Config("convergence study needs at least 3 step sizes".into()));
    }
    if h_list.windows(2).any(|w| w[0] <= w[1]) {
        return Err(Mb4Error::Config("step sizes must be strictly descending".into()));
    }
    let start = Instant::now();
    let at = |h: f64| RunConfig {
        dt: h,
        snapshot_times: Vec::new(),
        ..cfg.clone()
    };
    let reference_dt = h_list[h_list.len() - 1] / 8.0;
    let reference = final_state(&at(reference_dt))?;
    let mut errors = Vec::with_capacity(h_list.len());
    for &h in h_list {
        let u = final_state(&at(h))?;
        let e = u
            .as_slice()
            .iter()
            .zip(reference.as_slice())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max);
        errors.push((h, e));
    }
    Ok(ConvergenceReport {
        method: cfg.method,
        t_end: cfg.t_end,
        reference_dt,
        slope: loglog_slope(&errors),
        errors,
        seconds: start.elapsed().as_secs_f64(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_and_override() {
        let mut c = RunConfig::parse("# baseline\nnx = 8\nny=6\n eps = -0.2 \nmethod = avf4\nsnapshot_times = 0.5, 1\n").unwrap();
        assert_eq!((c.nx, c.ny), (8, 6));
        assert_eq!(c.gamma, 0.2);
        assert_eq!(c.method, MethodId::Avf4);
        assert_eq!(c.snapshot_times, vec![0.5, 1.0]);
        c.apply_overrides(&["dt=0.05", "V0=-3"]).unwrap();
        assert_eq!((c.dt, c.v0), (0.05, -3.0));
        assert!(RunConfig::parse("bogus = 1").is_err());
        assert!(RunConfig::parse("nx").is_err());
        assert!(c.apply_overrides(&["nx=two"]).is_err());
    }

    #[test]
    fn validation() {
        let ok = RunConfig::default();
        assert!(ok.validate().is_ok());
        for bad in [
            RunConfig { dt: 0.0, ..ok.clone() },
            RunConfig { t_end: 0.001, ..ok.clone() },
            RunConfig { nx: 1, ..ok.clone() },
            RunConfig { workers: 4, ..ok.clone() },
            RunConfig { snapshot_times: vec![2.0], ..ok.clone() },
        ] {
            assert!(matches!(bad.validate(), Err(Mb4Error::Config(_))));
        }
    }

    #[test]
    fn step_count_and_times() {
        let c = RunConfig { t_end: 1.0, dt: 0.01, ..RunConfig::default() };
        assert_eq!(c.step_count(), 100);
        let c = RunConfig { t_end: 0.25, dt: 0.1, ..RunConfig::default() };
        assert_eq!(c.step_count(), 3);
        assert_eq!(c.time_of(3), 0.25);
        assert_eq!(c.time_of(2), 0.2);
        let c = RunConfig { t_end: 0.3, dt: 0.1, ..RunConfig::default() };
        assert_eq!(c.step_count(), 3);
        assert_eq!(nearest_row(&c, 0.15), 1);
        assert_eq!(nearest_row(&c, 0.26), 3);
    }

    #[test]
    fn slope_of_power_law() {
        let pts: Vec<(f64, f64)> = [0.1, 0.05, 0.025].iter().map(|&h: &f64| (h, 3.0 * h.powi(4))).collect();
        assert!((loglog_slope(&pts) - 4.0).abs() < 1e-12);
    }
}
