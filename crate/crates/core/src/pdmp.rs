//! One-dimensional PDMPs: flow, the μ-jump-chain approximation on a state
//! grid, thinning simulation and the propagation constants.

use rand::Rng;
use rayon::prelude::*;
use serde::Deserialize;

use crate::error::{Error, Result};
use crate::evolution::{verify_identity_with, IdentityOptions};
use crate::jump_process::{path_rng, propagate, sample_index, JumpGeneratorSpec};
use crate::measures::{laplace_cdf, DiscreteMeasure, GridMeasure, Measure};
use crate::transport::wasserstein;

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum Drift {
    Zero,
    Const { c: f64 },
    NegTanh,
}

impl Drift {
    pub fn value(&self, x: f64) -> f64 {
        match self {
            Drift::Zero => 0.0,
            Drift::Const { c } => *c,
            Drift::NegTanh => -x.tanh(),
        }
    }

    /// ‖V‖∞.
    pub fn sup(&self) -> f64 {
        match self {
            Drift::Zero => 0.0,
            Drift::Const { c } => c.abs(),
            Drift::NegTanh => 1.0,
        }
    }

    pub fn lip(&self) -> f64 {
        match self {
            Drift::NegTanh => 1.0,
            _ => 0.0,
        }
    }

    /// Closed-form flow.
    fn exact_flow(&self, x: f64, s: f64) -> f64 {
        match self {
            Drift::Zero => x,
            Drift::Const { c } => x + c * s,
            Drift::NegTanh => {
                if x.abs() > 700.0 {
                    x - s * x.signum()
                } else {
                    (x.sinh() * (-s).exp()).asinh()
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum Intensity {
    Const { value: f64 },
    /// Piecewise linear through (x, lambda), constant beyond the ends.
    Tabulated { x: Vec<f64>, lambda: Vec<f64> },
}

impl Intensity {
    pub fn value(&self, x: f64) -> f64 {
        match self {
            Intensity::Const { value } => *value,
            Intensity::Tabulated { x: xs, lambda } => {
                if x <= xs[0] {
                    return lambda[0];
                }
                let n = xs.len();
                if x >= xs[n - 1] {
                    return lambda[n - 1];
                }
                let k = xs.partition_point(|&p| p <= x) - 1;
                let w = (x - xs[k]) / (xs[k + 1] - xs[k]);
                lambda[k] + w * (lambda[k + 1] - lambda[k])
            }
        }
    }

    /// λ̄.
    pub fn bar(&self) -> f64 {
        match self {
            Intensity::Const { value } => *value,
            Intensity::Tabulated { lambda, .. } => lambda.iter().copied().fold(0.0, f64::max),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum JumpKernel {
    /// Uniform on [x − m, x + m].
    UniformPm { m: f64 },
    /// δ_{x+d}; `m` is the declared jump bound (|d| if absent).
    Shift { d: f64, m: Option<f64> },
}

impl JumpKernel {
    /// The jump bound M.
    pub fn bound(&self) -> f64 {
        match self {
            JumpKernel::UniformPm { m } => *m,
            JumpKernel::Shift { d, m } => m.unwrap_or(d.abs()),
        }
    }

    /// H(x, u) = inf{z : k(x, (−∞, z]) > u}.
    pub fn quantile(&self, x: f64, u: f64) -> f64 {
        match self {
            JumpKernel::UniformPm { m } => x - m + 2.0 * m * u,
            JumpKernel::Shift { d, .. } => x + d,
        }
    }

    /// k(x, (−∞, z]).
    pub fn cdf(&self, x: f64, z: f64) -> f64 {
        match self {
            JumpKernel::UniformPm { m } => ((z - x + m) / (2.0 * m)).clamp(0.0, 1.0),
            JumpKernel::Shift { d, .. } => {
                if z >= x + d {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PdmpSpec {
    pub drift: Drift,
    pub intensity: Intensity,
    pub kernel: JumpKernel,
}

impl PdmpSpec {
    pub fn new(drift: Drift, intensity: Intensity, kernel: JumpKernel) -> Result<Self> {
        let spec = PdmpSpec { drift, intensity, kernel };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if let Drift::Const { c } = self.drift {
            if !c.is_finite() {
                return Err(Error::Domain(format!("drift constant must be finite, got {c}")));
            }
        }
        match &self.intensity {
            Intensity::Const { value } => {
                if !(value.is_finite() && *value >= 0.0) {
                    return Err(Error::Domain(format!("intensity must be finite and ≥ 0, got {value}")));
                }
            }
            Intensity::Tabulated { x, lambda } => {
                if x.is_empty() || x.len() != lambda.len() {
                    return Err(Error::Domain("tabulated intensity needs matching, non-empty x and lambda".into()));
                }
                if x.iter().any(|v| !v.is_finite()) || x.windows(2).any(|w| w[1] <= w[0]) {
                    return Err(Error::Domain("intensity nodes must be finite and strictly increasing".into()));
                }
                if let Some(l) = lambda.iter().find(|l| !(l.is_finite() && **l >= 0.0)) {
                    return Err(Error::Domain(format!("intensity must be finite and ≥ 0, got {l}")));
                }
            }
        }
        match self.kernel {
            JumpKernel::UniformPm { m } => {
                if !(m > 0.0 && m.is_finite()) {
                    return Err(Error::Domain(format!("uniform jump half-width must be positive, got {m}")));
                }
            }
            JumpKernel::Shift { d, m } => {
                let bound = m.unwrap_or(d.abs());
                if !(d.is_finite() && bound.is_finite()) || d.abs() > bound {
                    return Err(Error::Domain(format!("shift {d} exceeds the jump bound {bound}")));
                }
            }
        }
        Ok(())
    }

    pub fn v_sup(&self) -> f64 {
        self.drift.sup()
    }

    pub fn lambda_bar(&self) -> f64 {
        self.intensity.bar()
    }

    pub fn jump_bound(&self) -> f64 {
        self.kernel.bound()
    }

    /// Checks |V| ≤ ‖V‖∞, λ ≤ λ̄ and |H(x,u) − x| ≤ M on `n` points of [lo, hi].
    pub fn check_on(&self, lo: f64, hi: f64, n: usize) -> Result<()> {
        let (vs, lb, m) = (self.v_sup(), self.lambda_bar(), self.jump_bound());
        for k in 0..=n {
            let x = lo + (hi - lo) * k as f64 / n.max(1) as f64;
            if self.drift.value(x).abs() > vs * (1.0 + 1e-12) {
                return Err(Error::Hypothesis(format!("|V({x})| exceeds ‖V‖∞ = {vs}")));
            }
            if self.intensity.value(x) > lb * (1.0 + 1e-12) {
                return Err(Error::Hypothesis(format!("λ({x}) exceeds λ̄ = {lb}")));
            }
            for u in [0.0, 0.25, 0.5, 0.75, 1.0 - 1e-12] {
                if (self.kernel.quantile(x, u) - x).abs() > m * (1.0 + 1e-12) {
                    return Err(Error::Hypothesis(format!("jump from {x} exceeds M = {m}")));
                }
            }
        }
        Ok(())
    }

    /// Flow used by the simulator: closed form for the named drifts.
    fn move_along(&self, x: f64, s: f64) -> f64 {
        self.drift.exact_flow(x, s)
    }
}

fn rk4(v: &Drift, x: f64, s: f64, n: usize) -> f64 {
    let h = s / n as f64;
    let mut y = x;
    for _ in 0..n {
        let k1 = v.value(y);
        let k2 = v.value(y + 0.5 * h * k1);
        let k3 = v.value(y + 0.5 * h * k2);
        let k4 = v.value(y + h * k3);
        y += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
    y
}

/// Φ(x, s) by classical RK4, halving the step until two successive
/// solutions agree to 1e-10 relative.
pub fn flow(spec: &PdmpSpec, x: f64, s: f64) -> Result<f64> {
    if !(s.is_finite() && x.is_finite()) {
        return Err(Error::Domain(format!("flow needs finite x and s, got ({x}, {s})")));
    }
    if s == 0.0 {
        return Ok(x);
    }
    let h = (s.abs() / 16.0).min(1.0 / (8.0 * (1.0 + spec.drift.lip())));
    let mut n = (s.abs() / h).ceil() as usize;
    let mut prev = rk4(&spec.drift, x, s, n);
    for _ in 0..24 {
        n *= 2;
        let cur = rk4(&spec.drift, x, s, n);
        if (cur - prev).abs() <= 1e-10 * cur.abs().max(1.0) {
            return Ok(cur + (cur - prev) / 15.0);
        }
        prev = cur;
    }
    Err(Error::Integration(format!("RK4 did not settle for Φ({x}, {s})")))
}

/// The pure jump generator L^μ on a state grid.
#[derive(Debug, Clone, PartialEq)]
pub struct MuApproximation {
    pub mu: f64,
    pub generator: JumpGeneratorSpec,
    /// Φ(x, 1/μ) at each grid node.
    pub flow_targets: Vec<f64>,
    /// μ + λ(x) at each grid node, before self loops are removed.
    pub total_intensity: Vec<f64>,
    /// λ(x) times the genuine-jump mass that left the grid and was clamped
    /// to the end nodes, per grid node.
    pub leak: Vec<f64>,
}

fn split_onto(grid: &[f64], y: f64) -> [(usize, f64); 2] {
    let k = grid.partition_point(|&g| g <= y).clamp(1, grid.len() - 1) - 1;
    let w = ((y - grid[k]) / (grid[k + 1] - grid[k])).clamp(0.0, 1.0);
    [(k, 1.0 - w), (k + 1, w)]
}

/// Genuine jumps from `x` discretized by CDF differences on the dual cells.
fn jump_row(kernel: &JumpKernel, grid: &[f64], x: f64) -> (Vec<(usize, f64)>, f64) {
    let n = grid.len();
    let (first, last) = (grid[0], grid[n - 1]);
    match kernel {
        JumpKernel::Shift { d, .. } => {
            let y = x + d;
            let leak = if y < first || y > last { 1.0 } else { 0.0 };
            (split_onto(grid, y.clamp(first, last)).to_vec(), leak)
        }
        JumpKernel::UniformPm { m } => {
            let leak = kernel.cdf(x, first) + 1.0 - kernel.cdf(x, last);
            let lo = grid.partition_point(|&g| g < x - m).saturating_sub(1);
            let hi = (grid.partition_point(|&g| g <= x + m) + 1).min(n);
            let mut row = Vec::new();
            for j in lo..hi {
                let a = if j == 0 { f64::NEG_INFINITY } else { 0.5 * (grid[j - 1] + grid[j]) };
                let b = if j == n - 1 { f64::INFINITY } else { 0.5 * (grid[j] + grid[j + 1]) };
                let p = kernel.cdf(x, b) - kernel.cdf(x, a);
                if p > 0.0 {
                    row.push((j, p));
                }
            }
            (row, leak)
        }
    }
}

/// L^μ on `grid`: flow moves Φ(x, 1/μ) split between the two neighbouring
/// nodes preserving the mean, genuine jumps by CDF differences.
pub fn mu_generator(spec: &PdmpSpec, mu: f64, grid: &[f64]) -> Result<MuApproximation> {
    if !(mu >= 1.0 && mu.is_finite()) {
        return Err(Error::Domain(format!("μ must be finite and ≥ 1, got {mu}")));
    }
    if grid.len() < 2 || grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::Domain("state grid must be strictly increasing with at least two nodes".into()));
    }
    let (first, last) = (grid[0], grid[grid.len() - 1]);
    let mut targets = Vec::with_capacity(grid.len());
    let mut lambda = Vec::with_capacity(grid.len());
    let mut rows = Vec::with_capacity(grid.len());
    let mut leak = Vec::with_capacity(grid.len());
    for &x in grid {
        let y = flow(spec, x, 1.0 / mu)?;
        if y < first || y > last {
            return Err(Error::Coverage(format!(
                "flow target Φ({x}, 1/{mu}) = {y} is outside the grid [{first}, {last}]"
            )));
        }
        let l = spec.intensity.value(x);
        let total = mu + l;
        let mut row: Vec<(usize, f64)> = split_onto(grid, y).iter().map(|&(k, w)| (k, w * mu / total)).collect();
        let mut lk = 0.0;
        if l > 0.0 {
            let (jr, out) = jump_row(&spec.kernel, grid, x);
            lk = l * out;
            row.extend(jr.into_iter().map(|(k, p)| (k, p * l / total)));
        }
        row.retain(|e| e.1 > 0.0);
        targets.push(y);
        leak.push(lk);
        lambda.push(total);
        rows.push(row);
    }
    let generator = JumpGeneratorSpec::normalized(grid.to_vec(), lambda.clone(), rows)?;
    Ok(MuApproximation { mu, generator, flow_targets: targets, total_intensity: lambda, leak })
}

/// CDF of P_0 + ηZ, Z standard Laplace.
pub fn smoothed_cdf(p0: &DiscreteMeasure, eta: f64) -> impl Fn(f64) -> f64 + '_ {
    move |x| p0.expect(|a| laplace_cdf((x - a) / eta))
}

/// Masses on `grid` of the law with CDF `f`: each cell's mass is split
/// evenly between its end nodes, the outside mass goes to the end nodes.
pub fn grid_masses(grid: &[f64], f: impl Fn(f64) -> f64) -> Vec<f64> {
    let n = grid.len();
    let fv: Vec<f64> = grid.iter().map(|&x| f(x)).collect();
    let mut m = vec![0.0; n];
    m[0] += fv[0];
    m[n - 1] += 1.0 - fv[n - 1];
    for k in 0..n - 1 {
        let c = fv[k + 1] - fv[k];
        m[k] += 0.5 * c;
        m[k + 1] += 0.5 * c;
    }
    let total: f64 = m.iter().sum();
    m.iter_mut().for_each(|v| *v /= total);
    m
}

/// Endpoints of simulated paths.
#[derive(Debug, Clone, PartialEq)]
pub struct PathEnsemble {
    pub x0: Vec<f64>,
    pub xt: Vec<f64>,
    /// Accepted genuine jumps.
    pub jumps: Vec<u32>,
    /// Flow moves of the μ-chain (0 for the PDMP).
    pub flow_moves: Vec<u32>,
}

impl PathEnsemble {
    /// Largest excess of |X_t − X_0| over ‖V‖∞t + M·N_t (or ‖V‖∞N^μ/μ + M·N_t).
    pub fn displacement_excess(&self, spec: &PdmpSpec, t: f64, mu: Option<f64>) -> f64 {
        let (v, m) = (spec.v_sup(), spec.jump_bound());
        (0..self.xt.len())
            .map(|p| {
                let drift = match mu {
                    None => v * t,
                    Some(mu) => v * self.flow_moves[p] as f64 / mu,
                };
                (self.xt[p] - self.x0[p]).abs() - drift - m * self.jumps[p] as f64
            })
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Sample mean and standard deviation of |X_t − X_0|^q.
    pub fn displacement_moment(&self, q: f64) -> (f64, f64) {
        let n = self.xt.len() as f64;
        let vals: Vec<f64> = self.x0.iter().zip(&self.xt).map(|(a, b)| (b - a).abs().powf(q)).collect();
        let mean = vals.iter().sum::<f64>() / n;
        let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
        (mean, var.sqrt())
    }

    pub fn empirical(&self) -> Result<DiscreteMeasure> {
        DiscreteMeasure::empirical(&self.xt)
    }
}

fn simulate_path(spec: &PdmpSpec, init: &[(usize, f64)], support: &[f64], t: f64, mu: Option<f64>, seed: u64, path: u64) -> (f64, f64, u32, u32) {
    let mut rng = path_rng(seed, path);
    let x0 = support[sample_index(init.iter().copied(), rng.gen::<f64>())];
    let lb = spec.lambda_bar();
    let mut x = x0;
    let (mut jumps, mut moves) = (0u32, 0u32);
    let rate = lb + mu.unwrap_or(0.0);
    if rate == 0.0 {
        return (x0, spec.move_along(x0, t), 0, 0);
    }
    let mut time = 0.0;
    loop {
        let dt = -(1.0 - rng.gen::<f64>()).ln() / rate;
        if time + dt > t {
            if mu.is_none() {
                x = spec.move_along(x, t - time);
            }
            return (x0, x, jumps, moves);
        }
        time += dt;
        if mu.is_none() {
            x = spec.move_along(x, dt);
        }
        if let Some(mu) = mu {
            if rng.gen::<f64>() * rate < mu {
                x = spec.move_along(x, 1.0 / mu);
                moves += 1;
                continue;
            }
        }
        let (u, v): (f64, f64) = (rng.gen(), rng.gen());
        if spec.intensity.value(x) >= lb * u && lb > 0.0 {
            x = spec.kernel.quantile(x, v);
            jumps += 1;
        }
    }
}

/// Thinning simulation of the PDMP (`mu = None`) or of its μ-chain on the
/// continuous state space. Deterministic given `seed`.
pub fn simulate_pdmp_paths(
    spec: &PdmpSpec,
    p0: &DiscreteMeasure,
    t: f64,
    n_paths: usize,
    seed: u64,
    mu: Option<f64>,
) -> Result<PathEnsemble> {
    if n_paths == 0 {
        return Err(Error::Domain("need at least one path".into()));
    }
    if !(t >= 0.0 && t.is_finite()) {
        return Err(Error::Domain(format!("time must be finite and ≥ 0, got {t}")));
    }
    if let Some(m) = mu {
        if !(m >= 1.0 && m.is_finite()) {
            return Err(Error::Domain(format!("μ must be finite and ≥ 1, got {m}")));
        }
    }
    let init: Vec<(usize, f64)> = p0.weights().iter().copied().enumerate().collect();
    let out: Vec<(f64, f64, u32, u32)> = (0..n_paths as u64)
        .into_par_iter()
        .map(|p| simulate_path(spec, &init, p0.support(), t, mu, seed, p))
        .collect();
    Ok(PathEnsemble {
        x0: out.iter().map(|o| o.0).collect(),
        xt: out.iter().map(|o| o.1).collect(),
        jumps: out.iter().map(|o| o.2).collect(),
        flow_moves: out.iter().map(|o| o.3).collect(),
    })
}

/// Empirical law of X_t.
pub fn simulate_pdmp(spec: &PdmpSpec, p0: &DiscreteMeasure, t: f64, n_paths: usize, seed: u64) -> Result<DiscreteMeasure> {
    simulate_pdmp_paths(spec, p0, t, n_paths, seed, None)?.empirical()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PropagationConstants {
    /// Bound on sup_μ E|X^μ_t − X_0|^q.
    pub moment_bound: f64,
    /// c_t of the tail-ratio estimate.
    pub c_t: f64,
}

/// The closed-form moment bound and tail constant c_t.
pub fn propagation_constants(spec: &PdmpSpec, c0: f64, big_c0: f64, t: f64, q: f64, mu: f64) -> Result<PropagationConstants> {
    if !(c0 >= 1.0 && big_c0 > 0.0 && t > 0.0 && q > 0.0) {
        return Err(Error::Domain(format!(
            "need c0 ≥ 1, C0 > 0, t > 0, q > 0 (got {c0}, {big_c0}, {t}, {q})"
        )));
    }
    if !(mu >= 1.0 / t) {
        return Err(Error::Domain(format!("μ = {mu} is below 1/t = {}", 1.0 / t)));
    }
    let (v, m, lb) = (spec.v_sup(), spec.jump_bound(), spec.lambda_bar());
    let e = std::f64::consts::E;
    let qe = (q / e).powf(q);
    let moment_bound = 2f64.powf((q - 1.0).max(0.0))
        * (v.powf(q) * t.powf(q) * qe * e.powf(e) + m.powf(q) * qe * (lb * t * (e - 1.0)).exp());
    let s = |a: f64| 2.0 * (big_c0 * a).sinh();
    let c_t = c0 * c0 * (t * s(v) + lb * t * s(m)).exp();
    Ok(PropagationConstants { moment_bound, c_t })
}

/// Largest ratio of F(x+y)/F(x) and S(x−y)/S(x) to c·e^{C y} over the
/// sampled pairs, skipping x where F(x) (resp. S(x)) is below `floor`.
pub fn tail_ratio_excess(m: &GridMeasure, c: f64, big_c: f64, xs: &[f64], ys: &[f64], floor: f64) -> f64 {
    let mut worst: f64 = 0.0;
    for &x in xs {
        let (f, s) = (m.cdf(x), m.survival(x));
        for &y in ys {
            let b = c * (big_c * y).exp();
            if f >= floor {
                worst = worst.max(m.cdf(x + y) / f / b);
            }
            if s >= floor {
                worst = worst.max(m.survival(x - y) / s / b);
            }
        }
    }
    worst
}

/// μ-chain marginal at t as masses on the grid.
pub fn mu_marginal(approx: &MuApproximation, p0: &[f64], t: f64) -> Result<Vec<f64>> {
    Ok(propagate(&approx.generator, p0, t, 1e-14)?.0)
}

/// GridMeasure whose CDF interpolates the atomic CDF at the grid nodes.
pub fn masses_to_grid_measure(grid: &[f64], masses: &[f64]) -> Result<GridMeasure> {
    let mut acc = 0.0;
    let cum: Vec<f64> = masses
        .iter()
        .map(|m| {
            acc += m;
            acc
        })
        .collect();
    let g = grid.to_vec();
    GridMeasure::from_cdf_fn(&g, |x| {
        let k = g.partition_point(|&p| p <= x);
        if k == 0 {
            0.0
        } else {
            cum[k - 1]
        }
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct MomentRow {
    /// μ of the chain, `None` for the PDMP itself.
    pub mu: Option<f64>,
    pub mean: f64,
    /// 4σ/√n.
    pub envelope: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PropagationReport {
    pub constants: PropagationConstants,
    pub moments: Vec<MomentRow>,
    /// Largest ratio / (c_t e^{C0 y}) on the smoothed μ-chain marginals.
    pub tail_excess: f64,
    pub max_displacement_excess: f64,
}

impl PropagationReport {
    /// Number of moment rows above bound + envelope, plus one if the tail
    /// ratio or the pathwise displacement bound fails.
    pub fn violations(&self) -> usize {
        let b = self.constants.moment_bound;
        self.moments.iter().filter(|r| r.mean > b + r.envelope).count()
            + usize::from(self.tail_excess > 1.0 + 1e-9)
            + usize::from(self.max_displacement_excess > 1e-9)
    }
}

/// Checks the closed-form constants against simulation: E|X^μ_t − X_0|^q
/// for each μ (and the PDMP) against the moment bound, and the tail ratios
/// of the exact grid μ-chain marginal started from P_0 + ηZ against
/// c_t e^{C0 y} with (c0, C0) = (1, 1/η).
#[allow(clippy::too_many_arguments)]
pub fn propagation_check(
    spec: &PdmpSpec,
    p0: &DiscreteMeasure,
    eta: f64,
    t: f64,
    q: f64,
    mu_list: &[f64],
    n_paths: usize,
    seed: u64,
    grid: &[f64],
) -> Result<PropagationReport> {
    if !(eta > 0.0) {
        return Err(Error::Domain(format!("η must be positive, got {eta}")));
    }
    let (c0, big_c0) = (1.0, 1.0 / eta);
    let mu_min = mu_list.iter().copied().fold(f64::INFINITY, f64::min);
    let constants = propagation_constants(spec, c0, big_c0, t, q, mu_min)?;
    let mut moments = Vec::new();
    let mut disp: f64 = f64::NEG_INFINITY;
    for mu in std::iter::once(None).chain(mu_list.iter().map(|&m| Some(m))) {
        let e = simulate_pdmp_paths(spec, p0, t, n_paths, seed, mu)?;
        disp = disp.max(e.displacement_excess(spec, t, mu));
        let (mean, sd) = e.displacement_moment(q);
        moments.push(MomentRow { mu, mean, envelope: 4.0 * sd / (n_paths as f64).sqrt() });
    }
    let v0 = grid_masses(grid, smoothed_cdf(p0, eta));
    let lo = grid[0] + 0.25 * (grid[grid.len() - 1] - grid[0]);
    let hi = grid[grid.len() - 1] - 0.25 * (grid[grid.len() - 1] - grid[0]);
    let xs: Vec<f64> = (0..=200).map(|k| lo + (hi - lo) * k as f64 / 200.0).collect();
    let ys: Vec<f64> = (1..=16).map(|k| 0.25 * k as f64).collect();
    let mut tail_excess: f64 = 0.0;
    for &mu in mu_list {
        let a = mu_generator(spec, mu, grid)?;
        let m = masses_to_grid_measure(grid, &mu_marginal(&a, &v0, t)?)?;
        tail_excess = tail_excess.max(tail_ratio_excess(&m, constants.c_t, big_c0, &xs, &ys, crate::measures::TAIL_FLOOR));
    }
    Ok(PropagationReport { constants, moments, tail_excess, max_displacement_excess: disp })
}

#[derive(Debug, Clone)]
pub struct MuStudyOptions {
    /// Grid for the marginals and the Cauchy proxy.
    pub grid: Vec<f64>,
    /// Coarser grid for the identity check.
    pub identity_grid: Vec<f64>,
    pub identity_steps: usize,
    /// Laplace smoothing scale of the initial laws.
    pub eta: f64,
    pub mu_ref: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MuStudyRow {
    pub mu: f64,
    /// W_ρ(P^μ_t, P^{μ_ref}_t) for the first process.
    pub cauchy: f64,
    /// W_1(P^μ_t, flow pushforward of P_0) when λ ≡ 0, else NaN.
    pub flow_w1: f64,
    pub identity_residual: f64,
    /// W_1 between P^μ_t and the simulated PDMP law (NaN without paths).
    pub simulated_w1: f64,
    /// Rate of clamped jumps under P^μ_t.
    pub leak: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MuStudyReport {
    pub rows: Vec<MuStudyRow>,
    pub grid_step: f64,
    pub mu_ref: f64,
}

impl MuStudyReport {
    pub fn cauchy_strictly_decreasing(&self) -> bool {
        self.rows.windows(2).all(|w| w[1].cauchy < w[0].cauchy)
    }

    pub fn max_identity_residual(&self) -> f64 {
        self.rows.iter().map(|r| r.identity_residual).fold(0.0, f64::max)
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("mu,cauchy,flow_w1,identity_residual,simulated_w1,leak\n");
        for r in &self.rows {
            s.push_str(&format!(
                "{},{},{},{},{},{}\n",
                r.mu, r.cauchy, r.flow_w1, r.identity_residual, r.simulated_w1, r.leak
            ));
        }
        s
    }
}

/// Flow pushforward Φ(·, t)#P of a law with CDF `f`, on `grid`.
pub fn flow_pushforward(spec: &PdmpSpec, f: impl Fn(f64) -> f64, t: f64, grid: &[f64]) -> Result<GridMeasure> {
    let back: Vec<f64> = grid.iter().map(|&z| flow(spec, z, -t)).collect::<Result<_>>()?;
    let vals: Vec<f64> = back.iter().map(|&b| f(b)).collect();
    GridMeasure::from_cdf_fn(grid, |z| {
        let k = grid.partition_point(|&g| g < z).min(grid.len() - 1);
        vals[k]
    })
}

/// μ → ∞ study: for each μ the exact μ-chain marginal at t, the identity
/// residual of the μ-chain pair, the Cauchy proxy against μ_ref and, when
/// λ ≡ 0, the W_1 distance to the exact flow pushforward.
#[allow(clippy::too_many_arguments)]
pub fn mu_convergence_study(
    spec_x: &PdmpSpec,
    spec_y: &PdmpSpec,
    p0_x: &DiscreteMeasure,
    p0_y: &DiscreteMeasure,
    rho: f64,
    t: f64,
    mu_list: &[f64],
    n_paths: usize,
    seed: u64,
    opts: &MuStudyOptions,
) -> Result<MuStudyReport> {
    if mu_list.is_empty() || mu_list.windows(2).any(|w| w[1] <= w[0]) || mu_list[0] < 1.0 {
        return Err(Error::Domain("μ list must be increasing and ≥ 1".into()));
    }
    if !(rho >= 1.0) {
        return Err(Error::Domain(format!("ρ must be ≥ 1, got {rho}")));
    }
    let grid = &opts.grid;
    let fx = smoothed_cdf(p0_x, opts.eta);
    let fy = smoothed_cdf(p0_y, opts.eta);
    let v0 = grid_masses(grid, &fx);
    let marginal = |mu: f64| -> Result<(Vec<f64>, f64)> {
        let a = mu_generator(spec_x, mu, grid)?;
        let m = mu_marginal(&a, &v0, t)?;
        let leak = m.iter().zip(&a.leak).map(|(p, l)| p * l).sum();
        Ok((m, leak))
    };
    let (reference, _) = marginal(opts.mu_ref)?;
    let reference = DiscreteMeasure::from_state_masses(grid, &reference)?;
    let flow_only = spec_x.lambda_bar() == 0.0;
    let pushed = if flow_only { Some(flow_pushforward(spec_x, &fx, t, grid)?) } else { None };
    let sim = if n_paths > 0 {
        let start = DiscreteMeasure::from_state_masses(grid, &v0)?;
        Some(simulate_pdmp(spec_x, &start, t, n_paths, seed)?)
    } else {
        None
    };

    let ig = &opts.identity_grid;
    let (ix, iy) = (grid_masses(ig, &fx), grid_masses(ig, &fy));
    let id_x = DiscreteMeasure::from_state_masses(ig, &ix)?;
    let id_y = DiscreteMeasure::from_state_masses(ig, &iy)?;

    let rows = mu_list
        .iter()
        .map(|&mu| {
            let (m, leak) = marginal(mu)?;
            let pm = DiscreteMeasure::from_state_masses(grid, &m)?;
            let cauchy = wasserstein(&pm.clone().into(), &reference.clone().into(), rho)?;
            let flow_w1 = match &pushed {
                Some(g) => wasserstein(&pm.clone().into(), &Measure::Grid(g.clone()), 1.0)?,
                None => f64::NAN,
            };
            let simulated_w1 = match &sim {
                Some(s) => wasserstein(&pm.clone().into(), &s.clone().into(), 1.0)?,
                None => f64::NAN,
            };
            let identity_residual = if rho > 1.0 {
                let gx = mu_generator(spec_x, mu, ig)?.generator;
                let gy = mu_generator(spec_y, mu, ig)?.generator;
                verify_identity_with(&gx, &gy, &id_x, &id_y, rho, t, opts.identity_steps, IdentityOptions::default())?
                    .max_residual()
            } else {
                f64::NAN
            };
            Ok(MuStudyRow { mu, cauchy, flow_w1, identity_residual, simulated_w1, leak })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(MuStudyReport { rows, grid_step: grid[1] - grid[0], mu_ref: opts.mu_ref })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(drift: Drift, lambda: f64, kernel: JumpKernel) -> PdmpSpec {
        PdmpSpec::new(drift, Intensity::Const { value: lambda }, kernel).unwrap()
    }

    #[test]
    fn flow_examples() {
        let z = spec(Drift::Zero, 0.0, JumpKernel::UniformPm { m: 1.0 });
        assert_eq!(flow(&z, 1.3, 2.0).unwrap(), 1.3);
        let c = spec(Drift::Const { c: 0.7 }, 0.0, JumpKernel::UniformPm { m: 1.0 });
        assert!((flow(&c, 1.0, 2.0).unwrap() - 2.4).abs() < 1e-14);
        let n = spec(Drift::NegTanh, 0.0, JumpKernel::UniformPm { m: 1.0 });
        let exact = (1f64.sinh() * (-1f64).exp()).asinh();
        assert!((flow(&n, 1.0, 1.0).unwrap() - exact).abs() < 1e-12);
        assert!((flow(&n, -2.0, -0.5).unwrap() - Drift::NegTanh.exact_flow(-2.0, -0.5)).abs() < 1e-12);
    }

    #[test]
    fn flow_matches_fine_euler() {
        let n = spec(Drift::NegTanh, 0.0, JumpKernel::UniformPm { m: 1.0 });
        let euler = |steps: usize| {
            let h = 1.0 / steps as f64;
            let mut y = 1.0f64;
            for _ in 0..steps {
                y -= h * y.tanh();
            }
            y
        };
        // Richardson-extrapolated Euler; raw 1e6-step Euler is only 1.3e-7 accurate
        let y = 2.0 * euler(1_000_000) - euler(500_000);
        assert!((flow(&n, 1.0, 1.0).unwrap() - y).abs() < 1e-8);
    }

    #[test]
    fn spec_validation() {
        assert!(PdmpSpec::new(Drift::Zero, Intensity::Const { value: -1.0 }, JumpKernel::UniformPm { m: 1.0 }).is_err());
        assert!(PdmpSpec::new(Drift::Zero, Intensity::Const { value: 1.0 }, JumpKernel::Shift { d: 2.0, m: Some(1.0) }).is_err());
        let tab = Intensity::Tabulated { x: vec![0.0, 1.0], lambda: vec![1.0, 3.0] };
        assert_eq!(tab.value(0.5), 2.0);
        assert_eq!(tab.value(-4.0), 1.0);
        assert_eq!(tab.bar(), 3.0);
        let s = spec(Drift::NegTanh, 2.0, JumpKernel::UniformPm { m: 0.5 });
        s.check_on(-10.0, 10.0, 1000).unwrap();
    }

    #[test]
    fn mu_generator_intensity_and_mean_preservation() {
        let s = spec(Drift::NegTanh, 2.0, JumpKernel::UniformPm { m: 0.5 });
        let grid: Vec<f64> = (0..=400).map(|k| -4.0 + 0.02 * k as f64).collect();
        let a = mu_generator(&s, 16.0, &grid).unwrap();
        assert!(a.total_intensity.iter().all(|l| (l - 18.0).abs() < 1e-12));
        // flow part of the drift: L^μ id ≈ μ(Φ(x,1/μ) − x) + λ·(mean jump = 0)
        let id = a.generator.apply(&grid);
        for k in 50..350 {
            let x = grid[k];
            let want = 16.0 * (a.flow_targets[k] - x);
            assert!((id[k] - want).abs() < 1e-9, "{x} {} {want}", id[k]);
        }
    }

    #[test]
    fn zero_drift_removes_flow_self_loops() {
        let s = spec(Drift::Zero, 1.0, JumpKernel::Shift { d: 0.5, m: None });
        let grid: Vec<f64> = (0..=20).map(|k| 0.25 * k as f64).collect();
        let a = mu_generator(&s, 8.0, &grid).unwrap();
        for i in 0..grid.len() - 2 {
            assert!((a.generator.lambda()[i] - 1.0).abs() < 1e-12);
            let row = a.generator.kernel_row(i);
            assert_eq!(row.len(), 1);
            assert_eq!(row[0].0, i + 2);
            assert!((row[0].1 - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn coverage_error() {
        let s = spec(Drift::Const { c: 1.0 }, 0.0, JumpKernel::UniformPm { m: 1.0 });
        let grid = vec![0.0, 1.0, 2.0];
        assert!(matches!(mu_generator(&s, 1.0, &grid), Err(Error::Coverage(_))));
    }

    #[test]
    fn simulation_examples() {
        let s = spec(Drift::NegTanh, 0.0, JumpKernel::UniformPm { m: 1.0 });
        let p0 = DiscreteMeasure::new(vec![-1.0, 2.0], vec![0.5, 0.5]).unwrap();
        let e = simulate_pdmp_paths(&s, &p0, 1.0, 200, 3, None).unwrap();
        for (a, b) in e.x0.iter().zip(&e.xt) {
            assert_eq!(*b, Drift::NegTanh.exact_flow(*a, 1.0));
        }
        let s = spec(Drift::NegTanh, 1.5, JumpKernel::UniformPm { m: 0.5 });
        for mu in [None, Some(4.0)] {
            let e = simulate_pdmp_paths(&s, &p0, 2.0, 2000, 9, mu).unwrap();
            assert!(e.displacement_excess(&s, 2.0, mu) <= 1e-12);
            let again = simulate_pdmp_paths(&s, &p0, 2.0, 2000, 9, mu).unwrap();
            assert_eq!(e, again);
        }
    }

    #[test]
    fn propagation_constant_examples() {
        let s = spec(Drift::Zero, 1.0, JumpKernel::UniformPm { m: 1.0 });
        let p = propagation_constants(&s, 1.0, 1.0, 1.0, 1.0, f64::INFINITY).unwrap();
        let e = std::f64::consts::E;
        assert!((p.moment_bound - e.powf(e - 2.0)).abs() < 1e-12);
        let small = propagation_constants(&s, 2.0, 1.0, 1e-12, 1.0, f64::INFINITY).unwrap();
        assert!((small.c_t - 4.0).abs() < 1e-9);
        let later = propagation_constants(&s, 2.0, 1.0, 2.0, 1.0, f64::INFINITY).unwrap();
        assert!(later.c_t >= p.c_t);
        assert!(propagation_constants(&s, 1.0, 1.0, 1.0, 1.0, 0.5).is_err());
    }

    #[test]
    fn zero_drift_reduces_to_jump_simulation() {
        use crate::jump_process::{simulate_paths, JumpGeneratorSpec};
        let s = spec(Drift::Zero, 1.3, JumpKernel::Shift { d: 1.0, m: None });
        let n = 40;
        let states: Vec<f64> = (0..=n).map(|k| k as f64).collect();
        // the last row is never reached from {0, 3} by t = 2 in 4000 paths
        let rows: Vec<Vec<(usize, f64)>> = (0..=n).map(|k| vec![(if k < n { k + 1 } else { k - 1 }, 1.0)]).collect();
        let lambda = vec![1.3; n + 1];
        let gen = JumpGeneratorSpec::new(states, lambda, rows).unwrap();
        let p0 = DiscreteMeasure::new(vec![0.0, 3.0], vec![0.4, 0.6]).unwrap();
        let a = simulate_pdmp(&s, &p0, 2.0, 4000, 17).unwrap();
        let b = simulate_paths(&gen, &p0, 2.0, 4000, 17).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn moment_bound_example_against_simulation() {
        let s = spec(Drift::Zero, 1.0, JumpKernel::UniformPm { m: 1.0 });
        let p0 = DiscreteMeasure::dirac(0.0);
        let grid: Vec<f64> = (0..=512).map(|k| -12.0 + 24.0 * k as f64 / 512.0).collect();
        let r = propagation_check(&s, &p0, 1.0, 1.0, 1.0, &[1.0, 4.0, 16.0], 20_000, 5, &grid).unwrap();
        let e = std::f64::consts::E;
        assert!((r.constants.moment_bound - e.powf(e - 2.0)).abs() < 1e-12);
        assert_eq!(r.violations(), 0, "{r:?}");
    }

    #[test]
    fn grid_masses_preserve_mass() {
        let grid: Vec<f64> = (0..=100).map(|k| -5.0 + 0.1 * k as f64).collect();
        let p0 = DiscreteMeasure::dirac(0.3);
        let m = grid_masses(&grid, smoothed_cdf(&p0, 0.4));
        assert!((m.iter().sum::<f64>() - 1.0).abs() < 1e-14);
        let mean: f64 = m.iter().zip(&grid).map(|(a, b)| a * b).sum();
        assert!((mean - 0.3).abs() < 1e-3);
    }
}
