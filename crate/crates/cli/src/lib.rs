//! Experiment runner behind the `wflow` binary.
//!
//! A run reads one TOML experiment file, dispatches to `wflow_core`, and
//! returns the report CSVs together with a JSON summary.

use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use toml::Spanned;

use wflow_core::birth_death::{contraction_report, moment_bound, RateConfig};
use wflow_core::evolution::{verify_identity_with, IdentityOptions, Quadrature};
use wflow_core::jump_process::{
    dkw_epsilon, kernel_moment_bound, layer_inequality_report, line_of, moment_growth_bound, simulate_paths,
    uniformized_marginal, GeneratorConfig, JumpGeneratorSpec,
};
use wflow_core::measures::{DiscreteMeasure, Measure};
use wflow_core::pdmp::{
    mu_convergence_study, propagation_check, simulate_pdmp_paths, MuStudyOptions, PdmpSpec,
};
use wflow_core::tabulated::Tabulated;
use wflow_core::transport::wasserstein;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Kind {
    Identity,
    BdContraction,
    PdmpApprox,
    Simulate,
    Bounds,
}

impl Kind {
    pub fn name(self) -> &'static str {
        match self {
            Kind::Identity => "identity",
            Kind::BdContraction => "bd-contraction",
            Kind::PdmpApprox => "pdmp-approx",
            Kind::Simulate => "simulate",
            Kind::Bounds => "bounds",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QuadratureName {
    Simpson,
    Trapezoid,
    PlainTrapezoid,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeasureConfig {
    pub support: Vec<f64>,
    pub weights: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub lo: f64,
    pub hi: f64,
    pub cells: usize,
}

/// One experiment. Which keys are required depends on the kind.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kind: Option<Spanned<Kind>>,
    pub seed: Option<Spanned<u64>>,
    pub rho: Option<Spanned<f64>>,
    pub t: Option<Spanned<f64>>,
    pub n_steps: Option<Spanned<usize>>,
    pub tolerance: Option<Spanned<f64>>,
    pub quadrature: Option<QuadratureName>,
    pub n_paths: Option<Spanned<usize>>,
    /// Confidence level of the DKW envelope.
    pub confidence: Option<Spanned<f64>>,
    pub mu: Option<Spanned<Vec<f64>>>,
    pub mu_ref: Option<Spanned<f64>>,
    /// Laplace smoothing scale.
    pub eta: Option<Spanned<f64>>,
    pub grid: Option<Spanned<GridConfig>>,
    pub identity_cells: Option<Spanned<usize>>,
    pub identity_steps: Option<Spanned<usize>>,
    pub q: Option<Spanned<f64>>,
    pub alpha: Option<Spanned<Vec<f64>>>,
    /// Hölder exponent of the kernel moment bound.
    pub holder: Option<Spanned<f64>>,
    pub n_max: Option<Spanned<usize>>,
    pub s: Option<Spanned<f64>>,
    pub generator: Option<Spanned<GeneratorConfig>>,
    pub generator_y: Option<Spanned<GeneratorConfig>>,
    pub rates: Option<Spanned<RateConfig>>,
    pub process: Option<Spanned<PdmpSpec>>,
    pub process_y: Option<Spanned<PdmpSpec>>,
    pub p0: Option<Spanned<MeasureConfig>>,
    pub p0_y: Option<Spanned<MeasureConfig>>,
}

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error("line {line}: {msg}")]
    Config { line: usize, msg: String },
    #[error("{0}")]
    Numerical(#[from] wflow_core::Error),
    #[error("io error: {0}")]
    Io(String),
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config { .. } => 2,
            RunError::Numerical(_) | RunError::Io(_) => 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub schema: u32,
    pub kind: String,
    /// Largest identity residual, `null` when the experiment has none.
    pub max_residual: Option<f64>,
    pub bounds_checked: usize,
    pub violations: usize,
    pub runtime_seconds: f64,
}

impl Summary {
    pub fn exit_code(&self) -> i32 {
        if self.violations == 0 {
            0
        } else {
            1
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub summary: Summary,
    /// (file name, contents) of the CSV reports.
    pub reports: Vec<(String, String)>,
}

/// Parses an experiment file. Errors carry the 1-based line.
pub fn load(src: &str) -> Result<ExperimentConfig, RunError> {
    toml::from_str(src).map_err(|e| RunError::Config {
        line: e.span().map_or(1, |s| line_of(src, s.start)),
        msg: e.message().to_string(),
    })
}

struct Ctx<'a> {
    src: &'a str,
    cfg: &'a ExperimentConfig,
    kind: Kind,
    seed: Option<u64>,
}

impl<'a> Ctx<'a> {
    fn line<T>(&self, s: &Spanned<T>) -> usize {
        line_of(self.src, s.span().start)
    }

    fn kind_line(&self) -> usize {
        self.cfg.kind.as_ref().map_or(1, |k| self.line(k))
    }

    fn err(&self, line: usize, msg: impl Into<String>) -> RunError {
        RunError::Config { line, msg: msg.into() }
    }

    fn anchored<T, U>(&self, s: &Spanned<T>, r: wflow_core::Result<U>) -> Result<U, RunError> {
        r.map_err(|e| self.err(self.line(s), e.to_string()))
    }

    fn missing(&self, key: &str) -> RunError {
        self.err(self.kind_line(), format!("`{key}` is required for a {} experiment", self.kind.name()))
    }

    /// A scalar that must be positive.
    fn positive(&self, v: &Option<Spanned<f64>>, key: &str, default: Option<f64>) -> Result<f64, RunError> {
        match v {
            Some(s) => {
                let x = *s.get_ref();
                if x > 0.0 && x.is_finite() {
                    Ok(x)
                } else {
                    Err(self.err(self.line(s), format!("`{key}` must be positive and finite, got {x}")))
                }
            }
            None => default.ok_or_else(|| self.missing(key)),
        }
    }

    fn count(&self, v: &Option<Spanned<usize>>, key: &str, default: usize, min: usize) -> Result<usize, RunError> {
        match v {
            Some(s) if *s.get_ref() < min => Err(self.err(self.line(s), format!("`{key}` must be at least {min}"))),
            Some(s) => Ok(*s.get_ref()),
            None => Ok(default),
        }
    }

    fn rho(&self) -> Result<f64, RunError> {
        match &self.cfg.rho {
            Some(s) if !(*s.get_ref() >= 1.0 && s.get_ref().is_finite()) => {
                Err(self.err(self.line(s), format!("`rho` must be ≥ 1, got {}", s.get_ref())))
            }
            Some(s) => Ok(*s.get_ref()),
            None => Ok(2.0),
        }
    }

    fn seed(&self) -> Result<u64, RunError> {
        self.seed.ok_or_else(|| self.missing("seed"))
    }

    fn measure(&self, m: &Option<Spanned<MeasureConfig>>, key: &str) -> Result<DiscreteMeasure, RunError> {
        let m = m.as_ref().ok_or_else(|| self.missing(key))?;
        let c = m.get_ref();
        self.anchored(m, DiscreteMeasure::new(c.support.clone(), c.weights.clone()))
    }

    fn generator(&self, g: &Spanned<GeneratorConfig>) -> Result<JumpGeneratorSpec, RunError> {
        self.anchored(g, g.get_ref().build())
    }

    /// `generator`, or the birth–death chain of `rates`.
    fn jump_generator(&self) -> Result<JumpGeneratorSpec, RunError> {
        match (&self.cfg.generator, &self.cfg.rates) {
            (Some(g), _) => self.generator(g),
            (None, Some(r)) => {
                let bd = self.anchored(r, r.get_ref().build())?;
                self.anchored(r, bd.to_generator())
            }
            (None, None) => Err(self.missing("generator")),
        }
    }

    fn process(&self, p: &Spanned<PdmpSpec>) -> Result<PdmpSpec, RunError> {
        self.anchored(p, p.get_ref().validate())?;
        Ok(p.get_ref().clone())
    }
}

fn violations_over(values: impl IntoIterator<Item = f64>, tol: f64) -> (usize, usize) {
    let mut n = 0;
    let mut bad = 0;
    for v in values {
        n += 1;
        if !(v <= tol) {
            bad += 1;
        }
    }
    (n, bad)
}

struct Partial {
    max_residual: Option<f64>,
    bounds_checked: usize,
    violations: usize,
    reports: Vec<(String, String)>,
}

fn run_identity(c: &Ctx) -> Result<Partial, RunError> {
    let gx = c.jump_generator()?;
    let gy = match &c.cfg.generator_y {
        Some(g) => c.generator(g)?,
        None => gx.clone(),
    };
    let px = c.measure(&c.cfg.p0, "p0")?;
    let py = c.measure(&c.cfg.p0_y, "p0_y")?;
    let rho = c.rho()?;
    let t = c.positive(&c.cfg.t, "t", Some(1.0))?;
    let tol = c.positive(&c.cfg.tolerance, "tolerance", Some(1e-6))?;
    let n_steps = c.count(&c.cfg.n_steps, "n_steps", 200, 2)?;
    let quadrature = match c.cfg.quadrature.unwrap_or(QuadratureName::Simpson) {
        QuadratureName::Simpson => Quadrature::Simpson,
        QuadratureName::Trapezoid => Quadrature::Trapezoid,
        QuadratureName::PlainTrapezoid => Quadrature::PlainTrapezoid,
    };
    let opts = IdentityOptions { quadrature, ..Default::default() };
    let r = verify_identity_with(&gx, &gy, &px, &py, rho, t, n_steps, opts)?;
    let (n, bad) = violations_over(r.residual.iter().copied(), tol);
    Ok(Partial {
        max_residual: Some(r.max_residual()),
        bounds_checked: n,
        violations: bad,
        reports: vec![("identity.csv".into(), r.to_csv())],
    })
}

fn run_bd(c: &Ctx) -> Result<Partial, RunError> {
    let r = c.cfg.rates.as_ref().ok_or_else(|| c.missing("rates"))?;
    let bd = c.anchored(r, r.get_ref().build())?;
    let px = c.measure(&c.cfg.p0, "p0")?;
    let py = c.measure(&c.cfg.p0_y, "p0_y")?;
    let rho = c.rho()?;
    let t = c.positive(&c.cfg.t, "t", Some(5.0))?;
    let tol = c.positive(&c.cfg.tolerance, "tolerance", Some(1e-8))?;
    let n_steps = c.count(&c.cfg.n_steps, "n_steps", 200, 1)?;
    let rep = contraction_report(&bd, &px, &py, rho, t, n_steps)?;
    let (n, bad) = violations_over(rep.violation.iter().copied(), tol);
    Ok(Partial {
        max_residual: None,
        bounds_checked: n,
        violations: bad,
        reports: vec![("bd_contraction.csv".into(), rep.to_csv())],
    })
}

fn support_range(ms: &[&DiscreteMeasure]) -> (f64, f64) {
    let lo = ms.iter().map(|m| m.support()[0]).fold(f64::INFINITY, f64::min);
    let hi = ms.iter().map(|m| m.support()[m.len() - 1]).fold(f64::NEG_INFINITY, f64::max);
    (lo, hi)
}

fn run_pdmp(c: &Ctx) -> Result<Partial, RunError> {
    let px_spec = c.process(c.cfg.process.as_ref().ok_or_else(|| c.missing("process"))?)?;
    let py_spec = match &c.cfg.process_y {
        Some(p) => c.process(p)?,
        None => px_spec.clone(),
    };
    let px = c.measure(&c.cfg.p0, "p0")?;
    let py = match &c.cfg.p0_y {
        Some(_) => c.measure(&c.cfg.p0_y, "p0_y")?,
        None => px.clone(),
    };
    let rho = c.rho()?;
    let t = c.positive(&c.cfg.t, "t", Some(1.0))?;
    let tol = c.positive(&c.cfg.tolerance, "tolerance", Some(1e-5))?;
    let mu = match &c.cfg.mu {
        Some(m) => {
            let v = m.get_ref().clone();
            if v.is_empty() || v[0] < 1.0 || v.windows(2).any(|w| w[1] <= w[0]) || v.iter().any(|x| !x.is_finite()) {
                return Err(c.err(c.line(m), "`mu` must be a non-empty increasing list of values ≥ 1"));
            }
            v
        }
        None => vec![8.0, 16.0, 32.0, 64.0],
    };
    let mu_max = mu[mu.len() - 1];
    let mu_ref = c.positive(&c.cfg.mu_ref, "mu_ref", Some(2.0 * mu_max))?;
    if mu_ref <= mu_max {
        let line = c.cfg.mu_ref.as_ref().map_or(1, |s| c.line(s));
        return Err(c.err(line, "`mu_ref` must exceed every entry of `mu`"));
    }
    let (lo, hi) = support_range(&[&px, &py]);
    let range = hi - lo;
    let default_eta = if range > 0.0 { 0.05 * range } else { 0.05 };
    let eta = c.positive(&c.cfg.eta, "eta", Some(default_eta))?;
    let (grid_lo, grid_hi, cells) = match &c.cfg.grid {
        Some(g) => {
            let gc = g.get_ref();
            if !(gc.hi > gc.lo && gc.cells >= 2 && gc.lo.is_finite() && gc.hi.is_finite()) {
                return Err(c.err(c.line(g), "`grid` needs lo < hi and cells ≥ 2"));
            }
            (gc.lo, gc.hi, gc.cells)
        }
        None => {
            let reach = |s: &PdmpSpec| {
                let lt = s.lambda_bar() * t;
                s.v_sup() * t + s.jump_bound() * (lt + 8.0 * lt.sqrt() + 8.0).ceil()
            };
            let pad = reach(&px_spec).max(reach(&py_spec)) + 36.0 * eta;
            (lo - pad, hi + pad, 2048)
        }
    };
    let nodes = |n: usize| -> Vec<f64> {
        (0..=n).map(|k| grid_lo + (grid_hi - grid_lo) * k as f64 / n as f64).collect()
    };
    let identity_cells = c.count(&c.cfg.identity_cells, "identity_cells", 64, 2)?;
    let opts = MuStudyOptions {
        grid: nodes(cells),
        identity_grid: nodes(identity_cells),
        identity_steps: c.count(&c.cfg.identity_steps, "identity_steps", 50, 2)?,
        eta,
        mu_ref,
    };
    let n_paths = c.count(&c.cfg.n_paths, "n_paths", 0, 0)?;
    let seed = if n_paths > 0 { c.seed()? } else { c.seed.unwrap_or(0) };
    let rep = mu_convergence_study(&px_spec, &py_spec, &px, &py, rho, t, &mu, n_paths, seed, &opts)?;
    let mut checked = 0;
    let mut bad = 0;
    let mut max_residual = None;
    if rho > 1.0 {
        let (n, b) = violations_over(rep.rows.iter().map(|r| r.identity_residual), tol);
        checked += n;
        bad += b;
        max_residual = Some(rep.max_identity_residual());
    }
    if px_spec.lambda_bar() == 0.0 {
        let (n, b) = violations_over(rep.rows.iter().map(|r| r.flow_w1 - 2.0 / r.mu - rep.grid_step), 0.0);
        checked += n;
        bad += b;
    }
    if rep.rows.len() > 1 {
        checked += 1;
        bad += usize::from(!rep.cauchy_strictly_decreasing());
    }
    Ok(Partial { max_residual, bounds_checked: checked, violations: bad, reports: vec![("pdmp_approx.csv".into(), rep.to_csv())] })
}

fn run_simulate(c: &Ctx) -> Result<Partial, RunError> {
    let p0 = c.measure(&c.cfg.p0, "p0")?;
    let t = c.positive(&c.cfg.t, "t", Some(1.0))?;
    let n_paths = c.count(&c.cfg.n_paths, "n_paths", 10_000, 1)?;
    let seed = c.seed()?;
    if let Some(p) = &c.cfg.process {
        let spec = c.process(p)?;
        let e = simulate_pdmp_paths(&spec, &p0, t, n_paths, seed, None)?;
        let excess = e.displacement_excess(&spec, t, None);
        return Ok(Partial {
            max_residual: None,
            bounds_checked: n_paths,
            violations: usize::from(excess > 1e-9),
            reports: vec![("empirical.csv".into(), e.empirical()?.to_csv())],
        });
    }
    let gen = c.jump_generator()?;
    let conf = match &c.cfg.confidence {
        Some(s) if !(*s.get_ref() > 0.0 && *s.get_ref() < 1.0) => {
            return Err(c.err(c.line(s), "`confidence` must lie in (0, 1)"))
        }
        Some(s) => *s.get_ref(),
        None => 0.99,
    };
    let emp = simulate_paths(&gen, &p0, t, n_paths, seed)?;
    let exact = uniformized_marginal(&gen, &p0, t, 1e-14)?;
    let w1 = wasserstein(&Measure::Atomic(emp.clone()), &Measure::Atomic(exact.clone()), 1.0)?;
    let states = gen.states();
    let envelope = dkw_epsilon(n_paths, 1.0 - conf) * (states[states.len() - 1] - states[0]);
    let summary = format!("w1,envelope\n{w1},{envelope}\n");
    Ok(Partial {
        max_residual: None,
        bounds_checked: 1,
        violations: usize::from(w1 > envelope),
        reports: vec![("empirical.csv".into(), emp.to_csv()), ("exact.csv".into(), exact.to_csv()), ("dkw.csv".into(), summary)],
    })
}

struct BoundRows {
    csv: String,
    checked: usize,
    bad: usize,
    tol: f64,
}

impl BoundRows {
    fn push(&mut self, check: &str, lhs: f64, rhs: f64) {
        let v = ((lhs - rhs) / rhs.abs().max(1.0)).max(0.0);
        self.csv.push_str(&format!("{check},{lhs},{rhs},{v}\n"));
        self.checked += 1;
        if !(v <= self.tol) {
            self.bad += 1;
        }
    }
}

fn run_bounds(c: &Ctx) -> Result<Partial, RunError> {
    let p0 = c.measure(&c.cfg.p0, "p0")?;
    let t = c.positive(&c.cfg.t, "t", Some(1.0))?;
    let tol = c.positive(&c.cfg.tolerance, "tolerance", Some(1e-10))?;
    let alphas = match &c.cfg.alpha {
        Some(a) if a.get_ref().is_empty() || a.get_ref().iter().any(|x| !(*x >= 1.0 && x.is_finite())) => {
            return Err(c.err(c.line(a), "`alpha` entries must be ≥ 1"))
        }
        Some(a) => a.get_ref().clone(),
        None => vec![1.0, 2.0, 3.0],
    };
    let mut rows = BoundRows { csv: String::from("check,lhs,rhs,violation\n"), checked: 0, bad: 0, tol };
    if let Some(p) = &c.cfg.process {
        let spec = c.process(p)?;
        let q = c.positive(&c.cfg.q, "q", Some(1.0))?;
        let eta = c.positive(&c.cfg.eta, "eta", Some(1.0))?;
        let mu = match &c.cfg.mu {
            Some(m) if m.get_ref().is_empty() || m.get_ref().iter().any(|x| !(*x >= 1.0 / t && x.is_finite())) => {
                return Err(c.err(c.line(m), "`mu` entries must be finite and ≥ 1/t"))
            }
            Some(m) => m.get_ref().clone(),
            None => vec![(1.0 / t).max(1.0), 4.0, 16.0],
        };
        let n_paths = c.count(&c.cfg.n_paths, "n_paths", 10_000, 2)?;
        let seed = c.seed()?;
        let (lo, hi) = support_range(&[&p0]);
        let lt = spec.lambda_bar() * t;
        let pad = spec.v_sup() * t + spec.jump_bound() * (lt + 8.0 * lt.sqrt() + 8.0).ceil() + 36.0 * eta;
        let cells = c.count(&c.cfg.identity_cells, "identity_cells", 512, 2)?;
        let grid: Vec<f64> = (0..=cells).map(|k| lo - pad + (hi - lo + 2.0 * pad) * k as f64 / cells as f64).collect();
        let r = propagation_check(&spec, &p0, eta, t, q, &mu, n_paths, seed, &grid)?;
        for m in &r.moments {
            let name = m.mu.map_or("moment_pdmp".to_string(), |mu| format!("moment_mu_{mu}"));
            rows.push(&name, m.mean, r.constants.moment_bound + m.envelope);
        }
        rows.push("tail_ratio", r.tail_excess, 1.0);
        rows.push("displacement", r.max_displacement_excess.max(0.0), 0.0);
    } else {
        let gen = c.jump_generator()?;
        let s = match &c.cfg.s {
            Some(v) if !(*v.get_ref() >= 0.0) => return Err(c.err(c.line(v), "`s` must be ≥ 0")),
            Some(v) => *v.get_ref(),
            None => 0.5 * t,
        };
        let n_max = c.count(&c.cfg.n_max, "n_max", 15, 0)?;
        let holder = c.positive(&c.cfg.holder, "holder", Some(0.5))?;
        let layers = layer_inequality_report(&gen, &p0, s, t, n_max)?;
        rows.push("layer_equivalence", layers.equivalence, 0.0);
        rows.push("layer_sandwich_lower", layers.sandwich_lower, 0.0);
        rows.push("layer_sandwich_upper", layers.sandwich_upper, 0.0);
        rows.push("q_mass", layers.q_mass, 0.0);
        let f = Tabulated::from_fn(gen.states().to_vec(), f64::abs)?;
        let k = kernel_moment_bound(&gen, &p0, t, &f, holder)?;
        rows.push("kernel_moment", k.lhs, k.rhs);
        for &a in &alphas {
            let (exact, bound) = moment_growth_bound(&gen, &p0, a, t)?;
            rows.push(&format!("moment_lemma_alpha_{a}"), exact, bound);
        }
        if let Some(r) = &c.cfg.rates {
            let bd = c.anchored(r, r.get_ref().build())?;
            for &a in &alphas {
                let (exact, bound) = moment_bound(&bd, &p0, a, t)?;
                rows.push(&format!("bd_moment_alpha_{a}"), exact, bound);
            }
        }
    }
    Ok(Partial { max_residual: None, bounds_checked: rows.checked, violations: rows.bad, reports: vec![("bounds.csv".into(), rows.csv)] })
}

/// Runs `cfg` as a `kind` experiment. `seed` overrides the config seed.
pub fn run(src: &str, cfg: &ExperimentConfig, kind: Kind, seed: Option<u64>) -> Result<Outcome, RunError> {
    let start = Instant::now();
    if let Some(k) = &cfg.kind {
        if *k.get_ref() != kind {
            return Err(RunError::Config {
                line: line_of(src, k.span().start),
                msg: format!("config is a {} experiment, not {}", k.get_ref().name(), kind.name()),
            });
        }
    }
    let ctx = Ctx { src, cfg, kind, seed: seed.or(cfg.seed.as_ref().map(|s| *s.get_ref())) };
    ctx.rho()?;
    for (v, key) in [(&cfg.t, "t"), (&cfg.tolerance, "tolerance"), (&cfg.eta, "eta"), (&cfg.q, "q"), (&cfg.holder, "holder")] {
        if v.is_some() {
            ctx.positive(v, key, None)?;
        }
    }
    let p = match kind {
        Kind::Identity => run_identity(&ctx)?,
        Kind::BdContraction => run_bd(&ctx)?,
        Kind::PdmpApprox => run_pdmp(&ctx)?,
        Kind::Simulate => run_simulate(&ctx)?,
        Kind::Bounds => run_bounds(&ctx)?,
    };
    Ok(Outcome {
        summary: Summary {
            schema: 1,
            kind: kind.name().into(),
            max_residual: p.max_residual,
            bounds_checked: p.bounds_checked,
            violations: p.violations,
            runtime_seconds: start.elapsed().as_secs_f64(),
        },
        reports: p.reports,
    })
}

/// Writes the reports and `summary.json` into `dir`.
pub fn write_outputs(out: &Outcome, dir: &Path) -> Result<(), RunError> {
    let io = |e: std::io::Error| RunError::Io(e.to_string());
    std::fs::create_dir_all(dir).map_err(io)?;
    for (name, body) in &out.reports {
        std::fs::write(dir.join(name), body).map_err(io)?;
    }
    let json = serde_json::to_string_pretty(&out.summary).map_err(|e| RunError::Io(e.to_string()))?;
    std::fs::write(dir.join("summary.json"), json + "\n").map_err(io)
}
