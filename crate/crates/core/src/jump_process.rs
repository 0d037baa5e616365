//! Finite-state pure jump processes: exact marginals by uniformization,
//! jump-count layers, and thinning Monte Carlo.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Deserialize;

use crate::error::{Error, Result};
use crate::measures::DiscreteMeasure;
use crate::tabulated::Tabulated;

/// Row sums must be within this of 1.
pub const ROW_TOL: f64 = 1e-12;
/// Default truncation tolerance of the Poisson series.
pub const DEFAULT_TOL: f64 = 1e-10;
/// The Poisson tail is never cut above this, so returned marginals are
/// normalized to the 1e-12 tolerance of [`DiscreteMeasure`].
pub const TAIL_CAP: f64 = 1e-13;

/// Pure jump generator Lf(x) = λ(x)Σ_y k(x,y)(f(y) − f(x)) on finitely many states.
#[derive(Debug, Clone, PartialEq)]
pub struct JumpGeneratorSpec {
    states: Vec<f64>,
    lambda: Vec<f64>,
    rows: Vec<Vec<(usize, f64)>>,
    lambda_bar: f64,
}

impl JumpGeneratorSpec {
    /// `rows[i]` lists (target index, probability) pairs of k(states[i], ·).
    pub fn new(states: Vec<f64>, lambda: Vec<f64>, rows: Vec<Vec<(usize, f64)>>) -> Result<Self> {
        let n = states.len();
        if n == 0 {
            return Err(Error::InvalidGenerator("no states".into()));
        }
        if lambda.len() != n || rows.len() != n {
            return Err(Error::InvalidGenerator(format!(
                "{n} states but {} intensities and {} kernel rows",
                lambda.len(),
                rows.len()
            )));
        }
        if states.iter().any(|s| !s.is_finite()) || states.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidGenerator("states must be finite and strictly increasing".into()));
        }
        for (i, (&l, row)) in lambda.iter().zip(&rows).enumerate() {
            if !(l >= 0.0 && l.is_finite()) {
                return Err(Error::InvalidGenerator(format!("intensity {l} at state {i}")));
            }
            let mut sum = 0.0;
            for &(j, p) in row {
                if j >= n {
                    return Err(Error::InvalidGenerator(format!("row {i} targets state {j}")));
                }
                if !(p >= 0.0 && p.is_finite()) {
                    return Err(Error::InvalidGenerator(format!("row {i} has weight {p}")));
                }
                if j == i && p > 0.0 && l > 0.0 {
                    return Err(Error::InvalidGenerator(format!(
                        "fake jump at state {i}: λ·k(x,{{x}}) = {}",
                        l * p
                    )));
                }
                sum += p;
            }
            if (sum - 1.0).abs() > ROW_TOL {
                return Err(Error::InvalidGenerator(format!("kernel row {i} sums to {sum}")));
            }
        }
        let lambda_bar = lambda.iter().copied().fold(0.0, f64::max);
        let rows = rows
            .into_iter()
            .map(|r| r.into_iter().filter(|&(_, p)| p > 0.0).collect())
            .collect();
        Ok(JumpGeneratorSpec { states, lambda, rows, lambda_bar })
    }

    pub fn from_dense(states: Vec<f64>, lambda: Vec<f64>, kernel: &[Vec<f64>]) -> Result<Self> {
        let rows = kernel
            .iter()
            .map(|r| {
                if r.len() != states.len() {
                    return Err(Error::InvalidGenerator(format!(
                        "kernel row has {} entries for {} states",
                        r.len(),
                        states.len()
                    )));
                }
                Ok(r.iter().copied().enumerate().filter(|&(_, p)| p != 0.0).collect())
            })
            .collect::<Result<Vec<_>>>()?;
        JumpGeneratorSpec::new(states, lambda, rows)
    }

    /// Removes self-jumps: λ ← λ(1 − k(x,{x})), k renormalized off the diagonal.
    /// States left with no jumps get λ = 0 and a self-loop.
    pub fn normalized(states: Vec<f64>, lambda: Vec<f64>, rows: Vec<Vec<(usize, f64)>>) -> Result<Self> {
        let mut lam = lambda;
        let mut out = Vec::with_capacity(rows.len());
        for (i, row) in rows.into_iter().enumerate() {
            let mut merged: Vec<(usize, f64)> = Vec::with_capacity(row.len());
            for (j, p) in row {
                match merged.iter_mut().find(|e| e.0 == j) {
                    Some(e) => e.1 += p,
                    None => merged.push((j, p)),
                }
            }
            let stay: f64 = merged.iter().filter(|e| e.0 == i).map(|e| e.1).sum();
            let total: f64 = merged.iter().map(|e| e.1).sum();
            let off = total - stay;
            if i < lam.len() && off > 0.0 && stay > 0.0 {
                lam[i] *= off / total;
                merged.retain(|e| e.0 != i);
                merged.iter_mut().for_each(|e| e.1 /= off);
            } else if off <= 0.0 {
                if i < lam.len() {
                    lam[i] = 0.0;
                }
                merged = vec![(i, 1.0)];
            }
            merged.sort_by_key(|e| e.0);
            out.push(merged);
        }
        JumpGeneratorSpec::new(states, lam, out)
    }

    /// Poisson counter on {0..n}: λ constant, k = δ_{x+1}; state n absorbs.
    pub fn poisson(n: usize, lambda: f64) -> Result<Self> {
        let states = (0..=n).map(|k| k as f64).collect();
        let mut lam = vec![lambda; n + 1];
        lam[n] = 0.0;
        let rows = (0..=n).map(|k| if k < n { vec![(k + 1, 1.0)] } else { vec![(k, 1.0)] }).collect();
        JumpGeneratorSpec::new(states, lam, rows)
    }

    /// Two states {0,1} with intensities (l0, l1) that flip.
    pub fn two_state(l0: f64, l1: f64) -> Result<Self> {
        JumpGeneratorSpec::new(vec![0.0, 1.0], vec![l0, l1], vec![vec![(1, 1.0)], vec![(0, 1.0)]])
    }

    pub fn states(&self) -> &[f64] {
        &self.states
    }

    pub fn lambda(&self) -> &[f64] {
        &self.lambda
    }

    pub fn kernel_row(&self, i: usize) -> &[(usize, f64)] {
        &self.rows[i]
    }

    pub fn lambda_bar(&self) -> f64 {
        self.lambda_bar
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn index_of(&self, x: f64) -> Option<usize> {
        self.states.binary_search_by(|s| s.total_cmp(&x)).ok()
    }

    /// Masses of `p0` on the states, in state order.
    pub fn state_vector(&self, p0: &DiscreteMeasure) -> Result<Vec<f64>> {
        let mut v = vec![0.0; self.len()];
        for (&x, &w) in p0.support().iter().zip(p0.weights()) {
            let i = self
                .index_of(x)
                .ok_or_else(|| Error::Domain(format!("initial atom {x} is not a state")))?;
            v[i] += w;
        }
        Ok(v)
    }

    pub fn measure_from(&self, masses: &[f64]) -> Result<DiscreteMeasure> {
        DiscreteMeasure::from_state_masses(&self.states, masses)
    }

    /// `out = v·A` with A = diag(λ/Λ)K (genuine jumps only).
    fn jump_part(&self, v: &[f64], big_lambda: f64, out: &mut [f64]) {
        out.iter_mut().for_each(|o| *o = 0.0);
        for (i, &vi) in v.iter().enumerate() {
            if vi == 0.0 || self.lambda[i] == 0.0 {
                continue;
            }
            let a = vi * self.lambda[i] / big_lambda;
            for &(j, p) in &self.rows[i] {
                out[j] += a * p;
            }
        }
    }

    /// One step of the uniformized chain, `out = v(D + A)`.
    fn uniform_step(&self, v: &[f64], big_lambda: f64, out: &mut [f64]) {
        self.jump_part(v, big_lambda, out);
        for (i, &vi) in v.iter().enumerate() {
            out[i] += vi * (1.0 - self.lambda[i] / big_lambda);
        }
    }

    /// Lf at every state; `f` is given by its values in state order.
    pub fn apply(&self, f: &[f64]) -> Vec<f64> {
        (0..self.len())
            .map(|i| {
                let l = self.lambda[i];
                if l == 0.0 {
                    return 0.0;
                }
                l * self.rows[i].iter().map(|&(j, p)| p * (f[j] - f[i])).sum::<f64>()
            })
            .collect()
    }

    /// Q ↦ Σ_x Q(x)λ(x)k(x,·).
    fn rate_push(&self, q: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.len()];
        self.jump_part(q, 1.0, &mut out);
        out
    }
}

/// Poisson(a) probabilities 0..=M with the upper tail beyond M below `tol`.
#[derive(Debug, Clone, PartialEq)]
pub struct PoissonWeights {
    pub weights: Vec<f64>,
    pub tail: f64,
}

pub fn poisson_weights(a: f64, tol: f64) -> PoissonWeights {
    if a <= 0.0 {
        return PoissonWeights { weights: vec![1.0], tail: 0.0 };
    }
    let cap = (a + 40.0 * a.sqrt() + 60.0).ceil() as usize;
    // ratio recurrence outward from the mode, then normalize over 0..=cap
    let mode = (a.floor() as usize).min(cap);
    let mut pmf = vec![0.0; cap + 1];
    pmf[mode] = 1.0;
    for m in (0..mode).rev() {
        pmf[m] = pmf[m + 1] * (m + 1) as f64 / a;
    }
    for m in mode + 1..=cap {
        pmf[m] = pmf[m - 1] * a / m as f64;
    }
    let total: f64 = pmf.iter().sum();
    pmf.iter_mut().for_each(|p| *p /= total);
    // tail[m] = P(N > m), summed from the far end
    let mut tail = vec![0.0; cap + 1];
    let mut acc = 0.0;
    for m in (0..cap).rev() {
        acc += pmf[m + 1];
        tail[m] = acc;
    }
    // the mode is below `cap`, so some m qualifies
    let m = (0..=cap).find(|&m| tail[m] < tol).unwrap_or(cap);
    pmf.truncate(m + 1);
    PoissonWeights { weights: pmf, tail: tail[m] }
}

fn check_time(t: f64) -> Result<()> {
    if t >= 0.0 && t.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!("time must be finite and ≥ 0, got {t}")))
    }
}

/// Forward marginal as a mass vector, with the discarded Poisson tail.
pub fn propagate(gen: &JumpGeneratorSpec, v: &[f64], t: f64, tol: f64) -> Result<(Vec<f64>, f64)> {
    check_time(t)?;
    if !(tol > 0.0) {
        return Err(Error::Domain(format!("tolerance must be positive, got {tol}")));
    }
    let big = gen.lambda_bar;
    if big == 0.0 || t == 0.0 {
        return Ok((v.to_vec(), 0.0));
    }
    let pw = poisson_weights(big * t, tol.min(TAIL_CAP));
    let mut cur = v.to_vec();
    let mut next = vec![0.0; v.len()];
    let mut acc: Vec<f64> = cur.iter().map(|c| c * pw.weights[0]).collect();
    for &w in &pw.weights[1..] {
        gen.uniform_step(&cur, big, &mut next);
        std::mem::swap(&mut cur, &mut next);
        acc.iter_mut().zip(&cur).for_each(|(a, c)| *a += w * c);
    }
    Ok((acc, pw.tail))
}

/// P_t = Σ_n P_{n,t}, truncated where the Poisson(λ̄t) tail drops below `tol`.
pub fn uniformized_marginal(
    gen: &JumpGeneratorSpec,
    p0: &DiscreteMeasure,
    t: f64,
    tol: f64,
) -> Result<DiscreteMeasure> {
    let v = gen.state_vector(p0)?;
    let (m, _) = propagate(gen, &v, t, tol)?;
    gen.measure_from(&m)
}

/// Jump-count layers P_{n,t} and the chain Q_n.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerStack {
    pub t: f64,
    pub layers: Vec<Vec<f64>>,
    pub q_chain: Vec<Vec<f64>>,
    pub truncation_error: f64,
}

impl LayerStack {
    pub fn layer_mass(&self, n: usize) -> f64 {
        self.layers[n].iter().sum()
    }

    /// Σ_n P_{n,t} componentwise.
    pub fn total(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.layers[0].len()];
        for l in &self.layers {
            out.iter_mut().zip(l).for_each(|(o, v)| *o += v);
        }
        out
    }
}

/// Truncation tolerance of [`layer_stack`].
pub const LAYER_TOL: f64 = 1e-15;

/// Exact layers by the two-term recursion G_{m,n} = G_{m−1,n}D + G_{m−1,n−1}A,
/// P_{n,t} = Σ_m pois(m; λ̄t)G_{m,n}. D keeps the survival factors, so only
/// genuine jumps move mass between layers.
pub fn layer_stack(gen: &JumpGeneratorSpec, p0: &DiscreteMeasure, t: f64, n_max: usize) -> Result<LayerStack> {
    check_time(t)?;
    let v0 = gen.state_vector(p0)?;
    let ns = gen.len();
    let big = gen.lambda_bar;

    let mut q_chain = vec![v0.clone()];
    for n in 1..=n_max {
        let q = gen.rate_push(&q_chain[n - 1]);
        q_chain.push(q);
    }

    let mut layers = vec![vec![0.0; ns]; n_max + 1];
    if big == 0.0 || t == 0.0 {
        layers[0] = v0;
        return Ok(LayerStack { t, layers, q_chain, truncation_error: 0.0 });
    }
    let pw = poisson_weights(big * t, LAYER_TOL);
    let mut g: Vec<Vec<f64>> = vec![v0];
    let mut scratch = vec![0.0; ns];
    for (m, &w) in pw.weights.iter().enumerate() {
        if m > 0 {
            let top = m.min(n_max);
            let mut next: Vec<Vec<f64>> = Vec::with_capacity(top + 1);
            for n in 0..=top {
                let mut row = vec![0.0; ns];
                if n < g.len() {
                    for (i, r) in row.iter_mut().enumerate() {
                        *r = g[n][i] * (1.0 - gen.lambda[i] / big);
                    }
                }
                if n >= 1 && n - 1 < g.len() {
                    gen.jump_part(&g[n - 1], big, &mut scratch);
                    row.iter_mut().zip(&scratch).for_each(|(r, s)| *r += s);
                }
                next.push(row);
            }
            g = next;
        }
        for (n, gn) in g.iter().enumerate() {
            layers[n].iter_mut().zip(gn).for_each(|(l, v)| *l += w * v);
        }
    }
    let kept: f64 = layers.iter().flatten().sum();
    let truncation_error = (1.0 - kept).max(pw.tail);
    Ok(LayerStack { t, layers, q_chain, truncation_error })
}

/// Largest violations of the layer inequalities. Violations are measured as
/// (lhs − rhs)⁺ / max(1, |rhs|).
#[derive(Debug, Clone, PartialEq, Default)]
pub struct LayerReport {
    pub equivalence: f64,
    pub sandwich_lower: f64,
    pub sandwich_upper: f64,
    pub q_mass: f64,
    pub checks: usize,
}

impl LayerReport {
    pub fn max_violation(&self) -> f64 {
        self.equivalence.max(self.sandwich_lower).max(self.sandwich_upper).max(self.q_mass)
    }
}

fn excess(lhs: f64, rhs: f64) -> f64 {
    ((lhs - rhs) / rhs.abs().max(1.0)).max(0.0)
}

fn factorial_ratio(t: f64, n: usize) -> f64 {
    // tⁿ/n!
    (1..=n).fold(1.0, |acc, k| acc * t / k as f64)
}

/// Checks P_{n,s} ≤ e^{λ̄(t−s)⁺}(s/t)ⁿP_{n,t}, e^{−λ̄r}(rⁿ/n!)Q_n ≤ P_{n,r} ≤ (rⁿ/n!)Q_n
/// for r ∈ {s, t}, and Q_n(all) ≤ λ̄ⁿ, for n ≤ n_max.
pub fn layer_inequality_report(
    gen: &JumpGeneratorSpec,
    p0: &DiscreteMeasure,
    s: f64,
    t: f64,
    n_max: usize,
) -> Result<LayerReport> {
    if !(s >= 0.0 && t > 0.0) {
        return Err(Error::Domain(format!("need 0 ≤ s and 0 < t (s={s}, t={t})")));
    }
    let ls = layer_stack(gen, p0, s, n_max)?;
    let lt = layer_stack(gen, p0, t, n_max)?;
    let lb = gen.lambda_bar;
    let mut r = LayerReport::default();
    for n in 0..=n_max {
        let factor = (lb * (t - s).max(0.0)).exp() * (s / t).powi(n as i32);
        for i in 0..gen.len() {
            r.equivalence = r.equivalence.max(excess(ls.layers[n][i], factor * lt.layers[n][i]));
            r.checks += 1;
        }
        for stack in [&ls, &lt] {
            let tn = factorial_ratio(stack.t, n);
            let low = (-lb * stack.t).exp() * tn;
            for i in 0..gen.len() {
                let q = lt.q_chain[n][i];
                r.sandwich_lower = r.sandwich_lower.max(excess(low * q, stack.layers[n][i]));
                r.sandwich_upper = r.sandwich_upper.max(excess(stack.layers[n][i], tn * q));
                r.checks += 2;
            }
        }
        let qm: f64 = lt.q_chain[n].iter().sum();
        r.q_mass = r.q_mass.max(excess(qm, lb.powi(n as i32)));
        r.checks += 1;
    }
    Ok(r)
}

/// C_η(t) = e^{λ̄t}((e^{λ̄t(e^{(1+η)/(eη)}−1)} − e^{−λ̄t})/t)^{η/(1+η)}.
pub fn c_eta(lambda_bar: f64, eta: f64, t: f64) -> f64 {
    let e = std::f64::consts::E;
    let k = ((1.0 + eta) / (e * eta)).exp();
    let a = lambda_bar * t;
    let inner = ((a * (k - 1.0)).exp_m1() - (-a).exp_m1()) / t;
    a.exp() * inner.powf(eta / (1.0 + eta))
}

/// lim_{t→0} C_η(t) = (λ̄e^{(1+η)/(eη)})^{η/(1+η)}.
pub fn c_eta_limit(lambda_bar: f64, eta: f64) -> f64 {
    let e = std::f64::consts::E;
    (lambda_bar * ((1.0 + eta) / (e * eta)).exp()).powf(eta / (1.0 + eta))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelMomentBound {
    pub lhs: f64,
    pub rhs: f64,
    pub c_eta_t: f64,
}

/// ∫∫λ(x)|f(y)|k(x,dy)P_t(dx) ≤ C_η(t)(Σ_{n≥1}∫|f|^{1+η}dP_{n,t}/t)^{1/(1+η)}.
pub fn kernel_moment_bound(
    gen: &JumpGeneratorSpec,
    p0: &DiscreteMeasure,
    t: f64,
    f: &Tabulated,
    eta: f64,
) -> Result<KernelMomentBound> {
    if !(t > 0.0 && eta > 0.0) {
        return Err(Error::Domain(format!("need t > 0 and η > 0 (t={t}, η={eta})")));
    }
    let fv = gen.states.iter().map(|&x| f.require(x)).collect::<Result<Vec<_>>>()?;
    let v0 = gen.state_vector(p0)?;
    let (pt, _) = propagate(gen, &v0, t, LAYER_TOL)?;
    let lhs: f64 = (0..gen.len())
        .map(|i| {
            pt[i] * gen.lambda[i] * gen.rows[i].iter().map(|&(j, p)| p * fv[j].abs()).sum::<f64>()
        })
        .sum();
    // Σ_{n≥1}P_{n,t} = P_t − P_{0,t}, P_{0,t} = e^{−λt}P_0
    let jumped: f64 = (0..gen.len())
        .map(|i| {
            let m = (pt[i] - (-gen.lambda[i] * t).exp() * v0[i]).max(0.0);
            m * fv[i].abs().powf(1.0 + eta)
        })
        .sum();
    let c = c_eta(gen.lambda_bar, eta, t);
    let rhs = c * (jumped / t).powf(1.0 / (1.0 + eta));
    Ok(KernelMomentBound { lhs, rhs, c_eta_t: c })
}

/// k̄_α = max(E|X_0|^α, sup_x Σ_y k(x,y)|y − x|^α).
pub fn kbar(gen: &JumpGeneratorSpec, p0: &DiscreteMeasure, alpha: f64) -> f64 {
    let k = (0..gen.len())
        .filter(|&i| gen.lambda[i] > 0.0)
        .map(|i| {
            gen.rows[i]
                .iter()
                .map(|&(j, p)| p * (gen.states[j] - gen.states[i]).abs().powf(alpha))
                .sum::<f64>()
        })
        .fold(0.0, f64::max);
    k.max(p0.moment(alpha))
}

/// Exact E|X_t|^α and the moment lemma's closed-form bound.
pub fn moment_growth_bound(
    gen: &JumpGeneratorSpec,
    p0: &DiscreteMeasure,
    alpha: f64,
    t: f64,
) -> Result<(f64, f64)> {
    if !(alpha >= 1.0) {
        return Err(Error::Domain(format!("α must be ≥ 1, got {alpha}")));
    }
    let pt = uniformized_marginal(gen, p0, t, LAYER_TOL)?;
    let exact = pt.moment(alpha);
    let a = gen.lambda_bar * t;
    let ca = alpha.ceil() as usize;
    let head: f64 = (0..ca).map(|n| (n as f64 + 1.0).powf(alpha) * factorial_ratio(a, n)).sum();
    let tail = (ca as f64 + 1.0).powf(alpha) * factorial_ratio(a, ca) * a.exp();
    Ok((exact, kbar(gen, p0, alpha) * (head + tail)))
}

/// Per-path random stream: ChaCha8 keyed by `seed`, stream id = path index.
pub fn path_rng(seed: u64, path: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(path);
    rng
}

pub(crate) fn sample_index(cum: impl IntoIterator<Item = (usize, f64)>, v: f64) -> usize {
    let mut last = 0;
    let mut acc = 0.0;
    for (j, p) in cum {
        acc += p;
        last = j;
        if acc > v {
            return j;
        }
    }
    last
}

fn simulate_one(gen: &JumpGeneratorSpec, p0: &[(usize, f64)], t: f64, seed: u64, path: u64) -> usize {
    let mut rng = path_rng(seed, path);
    let mut x = sample_index(p0.iter().copied(), rng.gen::<f64>());
    let lb = gen.lambda_bar;
    if lb == 0.0 {
        return x;
    }
    let mut time = 0.0;
    loop {
        time += -(1.0 - rng.gen::<f64>()).ln() / lb;
        if time > t {
            return x;
        }
        let u: f64 = rng.gen();
        let v: f64 = rng.gen();
        if gen.lambda[x] >= lb * u && gen.lambda[x] > 0.0 {
            x = sample_index(gen.rows[x].iter().copied(), v);
        }
    }
}

/// Endpoints of `n_paths` thinned paths, as state indices in path order.
pub fn simulate_endpoints(
    gen: &JumpGeneratorSpec,
    p0: &DiscreteMeasure,
    t: f64,
    n_paths: usize,
    seed: u64,
) -> Result<Vec<usize>> {
    check_time(t)?;
    if n_paths == 0 {
        return Err(Error::Domain("need at least one path".into()));
    }
    let v0 = gen.state_vector(p0)?;
    let init: Vec<(usize, f64)> = v0.iter().copied().enumerate().filter(|e| e.1 > 0.0).collect();
    Ok((0..n_paths as u64)
        .into_par_iter()
        .map(|p| simulate_one(gen, &init, t, seed, p))
        .collect())
}

/// Empirical law of X_t from thinning.
pub fn simulate_paths(
    gen: &JumpGeneratorSpec,
    p0: &DiscreteMeasure,
    t: f64,
    n_paths: usize,
    seed: u64,
) -> Result<DiscreteMeasure> {
    let ends = simulate_endpoints(gen, p0, t, n_paths, seed)?;
    let mut counts = vec![0usize; gen.len()];
    for e in ends {
        counts[e] += 1;
    }
    let masses: Vec<f64> = counts.iter().map(|&c| c as f64 / n_paths as f64).collect();
    gen.measure_from(&masses)
}

/// DKW half-width sqrt(ln(2/α)/(2n)) at level 1 − α.
pub fn dkw_epsilon(n: usize, alpha: f64) -> f64 {
    ((2.0 / alpha).ln() / (2.0 * n as f64)).sqrt()
}

/// Generator as read from config: dense kernel rows.
#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct GeneratorConfig {
    pub states: Vec<f64>,
    pub lambda: Vec<f64>,
    pub kernel: Vec<Vec<f64>>,
}

impl GeneratorConfig {
    pub fn build(&self) -> Result<JumpGeneratorSpec> {
        JumpGeneratorSpec::from_dense(self.states.clone(), self.lambda.clone(), &self.kernel)
    }
}

/// 1-based line of a byte offset.
pub fn line_of(src: &str, offset: usize) -> usize {
    src[..offset.min(src.len())].matches('\n').count() + 1
}

pub(crate) fn toml_error(src: &str, e: toml::de::Error) -> Error {
    let line = e.span().map_or(1, |s| line_of(src, s.start));
    Error::Parse { line, msg: e.message().to_string() }
}

/// Parses and validates a generator from TOML.
pub fn parse_generator_config(src: &str) -> Result<JumpGeneratorSpec> {
    let cfg: GeneratorConfig = toml::from_str(src).map_err(|e| toml_error(src, e))?;
    cfg.build()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn poisson_pmf(lt: f64, n: usize) -> f64 {
        (-lt).exp() * factorial_ratio(lt, n)
    }

    #[test]
    fn poisson_weights_sum() {
        for a in [0.1, 1.0, 10.0, 200.0, 800.0] {
            let pw = poisson_weights(a, 1e-13);
            let s: f64 = pw.weights.iter().sum();
            assert!((s + pw.tail - 1.0).abs() < 1e-12, "a={a}");
            assert!(pw.tail < 1e-13);
        }
    }

    #[test]
    fn poisson_marginal_closed_form() {
        let g = JumpGeneratorSpec::poisson(40, 1.5).unwrap();
        let p = uniformized_marginal(&g, &DiscreteMeasure::dirac(0.0), 2.0, 1e-10).unwrap();
        for (x, w) in p.support().iter().zip(p.weights()) {
            let n = *x as usize;
            if n < 40 {
                assert!((w - poisson_pmf(3.0, n)).abs() < 1e-13, "n={n}");
            }
        }
    }

    #[test]
    fn zero_intensity_is_static() {
        let g = JumpGeneratorSpec::new(vec![0.0, 1.0], vec![0.0, 0.0], vec![vec![(1, 1.0)], vec![(0, 1.0)]])
            .unwrap();
        let p0 = DiscreteMeasure::new(vec![0.0, 1.0], vec![0.3, 0.7]).unwrap();
        assert_eq!(uniformized_marginal(&g, &p0, 5.0, 1e-10).unwrap(), p0);
        let r = layer_inequality_report(&g, &p0, 1.0, 2.0, 5).unwrap();
        assert_eq!(r.max_violation(), 0.0);
        let ls = layer_stack(&g, &p0, 3.0, 4).unwrap();
        assert!((1..=4).all(|n| ls.layer_mass(n) == 0.0));
    }

    #[test]
    fn layer_zero_and_constant_rate() {
        let g = JumpGeneratorSpec::from_dense(
            vec![0.0, 1.0, 2.0],
            vec![1.0, 2.0, 0.5],
            &[vec![0.0, 0.5, 0.5], vec![1.0, 0.0, 0.0], vec![0.3, 0.7, 0.0]],
        )
        .unwrap();
        let p0 = DiscreteMeasure::new(vec![0.0, 1.0, 2.0], vec![0.2, 0.3, 0.5]).unwrap();
        let t = 1.3;
        let ls = layer_stack(&g, &p0, t, 30).unwrap();
        for i in 0..3 {
            let exact = (-g.lambda()[i] * t).exp() * p0.weights()[i];
            assert!((ls.layers[0][i] - exact).abs() < 1e-14);
        }
        let total = ls.total();
        let (pt, _) = propagate(&g, &g.state_vector(&p0).unwrap(), t, LAYER_TOL).unwrap();
        for i in 0..3 {
            assert!((total[i] - pt[i]).abs() < 1e-14);
        }
        let c = JumpGeneratorSpec::two_state(2.0, 2.0).unwrap();
        let ls = layer_stack(&c, &DiscreteMeasure::dirac(0.0), 1.0, 10).unwrap();
        for n in 0..=10 {
            assert!((ls.layer_mass(n) - poisson_pmf(2.0, n)).abs() < 1e-14);
            assert!(ls.q_chain[n].iter().sum::<f64>() <= 2f64.powi(n as i32) * (1.0 + 1e-15));
        }
    }

    #[test]
    fn layer_report_poisson() {
        let g = JumpGeneratorSpec::poisson(30, 1.0).unwrap();
        let r = layer_inequality_report(&g, &DiscreteMeasure::dirac(0.0), 1.0, 2.0, 10).unwrap();
        assert!(r.max_violation() <= 1e-10, "{r:?}");
        let r = layer_inequality_report(&g, &DiscreteMeasure::dirac(0.0), 1.5, 1.5, 10).unwrap();
        assert!(r.equivalence <= 1e-12);
    }

    #[test]
    fn fake_jumps_and_bad_rows_rejected() {
        assert!(JumpGeneratorSpec::new(vec![0.0, 1.0], vec![1.0, 1.0], vec![vec![(0, 0.5), (1, 0.5)], vec![(0, 1.0)]])
            .is_err());
        assert!(JumpGeneratorSpec::new(vec![0.0, 1.0], vec![1.0, 1.0], vec![vec![(1, 0.9)], vec![(0, 1.0)]]).is_err());
        let g = JumpGeneratorSpec::normalized(
            vec![0.0, 1.0],
            vec![2.0, 1.0],
            vec![vec![(0, 0.5), (1, 0.5)], vec![(0, 1.0)]],
        )
        .unwrap();
        assert_eq!(g.lambda(), &[1.0, 1.0]);
        assert_eq!(g.kernel_row(0), &[(1, 1.0)]);
    }

    #[test]
    fn c_eta_limit_matches() {
        for (lb, eta) in [(1.0, 1.0), (3.0, 0.5), (0.7, 2.0)] {
            let c = c_eta(lb, eta, 1e-6);
            let l = c_eta_limit(lb, eta);
            assert!(((c - l) / l).abs() < 1e-4, "{c} vs {l}");
        }
    }

    #[test]
    fn kernel_bound_poisson() {
        let g = JumpGeneratorSpec::poisson(60, 1.0).unwrap();
        let f = Tabulated::new(g.states().to_vec(), g.states().to_vec()).unwrap();
        let b = kernel_moment_bound(&g, &DiscreteMeasure::dirac(0.0), 1.0, &f, 1.0).unwrap();
        assert!(b.lhs <= b.rhs, "{b:?}");
        let z = Tabulated::new(g.states().to_vec(), vec![0.0; g.len()]).unwrap();
        let b = kernel_moment_bound(&g, &DiscreteMeasure::dirac(0.0), 1.0, &z, 1.0).unwrap();
        assert_eq!((b.lhs, b.rhs), (0.0, 0.0));
    }

    #[test]
    fn moment_growth_examples() {
        let g = JumpGeneratorSpec::poisson(80, 1.0).unwrap();
        let (e, b) = moment_growth_bound(&g, &DiscreteMeasure::dirac(0.0), 1.0, 1.0).unwrap();
        assert!((e - 1.0).abs() < 1e-12 && e <= b);
        let s = JumpGeneratorSpec::two_state(0.0, 0.0).unwrap();
        let p0 = DiscreteMeasure::new(vec![0.0, 1.0], vec![0.5, 0.5]).unwrap();
        let (e, b) = moment_growth_bound(&s, &p0, 2.0, 1.0).unwrap();
        assert!((e - 0.5).abs() < 1e-15 && e <= b);
    }

    #[test]
    fn simulation_is_deterministic() {
        let g = JumpGeneratorSpec::poisson(40, 1.0).unwrap();
        let a = simulate_paths(&g, &DiscreteMeasure::dirac(0.0), 2.0, 2000, 7).unwrap();
        let b = simulate_paths(&g, &DiscreteMeasure::dirac(0.0), 2.0, 2000, 7).unwrap();
        assert_eq!(a, b);
        let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let c = pool.install(|| simulate_paths(&g, &DiscreteMeasure::dirac(0.0), 2.0, 2000, 7).unwrap());
        assert_eq!(a, c);
    }

    #[test]
    fn config_parse() {
        let src = "states = [0, 1]\nlambda = [1.0, 2.0]\nkernel = [[0, 1], [1, 0]]\n";
        let g = parse_generator_config(src).unwrap();
        assert_eq!(g.lambda_bar(), 2.0);
        let bad = "states = [0, 1]\nlambda = [1.0, 2.0]\nkernel = [[0, 0.9], [1, 0]]\n";
        assert!(matches!(parse_generator_config(bad), Err(Error::InvalidGenerator(_))));
        let broken = "states = [0, 1]\nlambda = [1.0,\n";
        assert!(matches!(parse_generator_config(broken), Err(Error::Parse { .. })));
    }
}
