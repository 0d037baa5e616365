//! Birth–death chains on {0..N}: curvature, truncation and the contraction
//! estimates for W_1 and W_ρ.

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::jump_process::{propagate, JumpGeneratorSpec};
use crate::measures::DiscreteMeasure;
use crate::quad::gauss8;
use crate::transport::{cost, monotone_coupling};

/// Birth rates η and death rates ν on {0..N}.
///
/// `eta_raw[N]` keeps the untruncated birth rate at N; the chain itself
/// uses η·1_{x<N}.
#[derive(Debug, Clone, PartialEq)]
pub struct BirthDeathSpec {
    eta_raw: Vec<f64>,
    nu: Vec<f64>,
    growth: f64,
}

impl BirthDeathSpec {
    /// `eta` and `nu` on {0..N}, N ≥ 2. The affine growth constant
    /// C = max η(x)/(1+x) is computed from the rates.
    pub fn new(eta: Vec<f64>, nu: Vec<f64>) -> Result<Self> {
        if eta.len() != nu.len() {
            return Err(Error::Domain(format!(
                "{} birth rates but {} death rates",
                eta.len(),
                nu.len()
            )));
        }
        if eta.len() < 3 {
            return Err(Error::Domain("truncation level N must be at least 2".into()));
        }
        if let Some(r) = eta.iter().chain(&nu).find(|r| !(r.is_finite() && **r >= 0.0)) {
            return Err(Error::Domain(format!("rates must be finite and ≥ 0, got {r}")));
        }
        if nu[0] != 0.0 {
            return Err(Error::Domain(format!("ν(0) must be 0, got {}", nu[0])));
        }
        let growth = eta
            .iter()
            .enumerate()
            .map(|(x, e)| e / (1.0 + x as f64))
            .fold(0.0, f64::max);
        Ok(BirthDeathSpec { eta_raw: eta, nu, growth })
    }

    /// Like [`new`](Self::new) but checks η(x) ≤ C(1+x) for a declared C.
    pub fn with_growth(eta: Vec<f64>, nu: Vec<f64>, c: f64) -> Result<Self> {
        let mut bd = Self::new(eta, nu)?;
        if !(c > 0.0) || bd.growth > c * (1.0 + 1e-12) {
            return Err(Error::Hypothesis(format!(
                "η(x) ≤ C(1+x) fails for C = {c} (need C ≥ {})",
                bd.growth
            )));
        }
        bd.growth = c;
        Ok(bd)
    }

    pub fn from_fns(n: usize, eta: impl Fn(usize) -> f64, nu: impl Fn(usize) -> f64) -> Result<Self> {
        Self::new((0..=n).map(&eta).collect(), (0..=n).map(&nu).collect())
    }

    /// η ≡ a, ν(x) = b·x.
    pub fn mm_infty(a: f64, b: f64, n: usize) -> Result<Self> {
        Self::from_fns(n, |_| a, |x| b * x as f64)
    }

    /// η ≡ a, ν(x) = b·1_{x≥1}.
    pub fn mm1(a: f64, b: f64, n: usize) -> Result<Self> {
        Self::from_fns(n, |_| a, |x| if x >= 1 { b } else { 0.0 })
    }

    pub fn n(&self) -> usize {
        self.eta_raw.len() - 1
    }

    pub fn eta_raw(&self) -> &[f64] {
        &self.eta_raw
    }

    /// Truncated birth rates (η(N) = 0).
    pub fn eta(&self) -> Vec<f64> {
        let mut e = self.eta_raw.clone();
        *e.last_mut().expect("N ≥ 2") = 0.0;
        e
    }

    pub fn nu(&self) -> &[f64] {
        &self.nu
    }

    pub fn growth_constant(&self) -> f64 {
        self.growth
    }

    /// Lip of the truncated birth rates.
    pub fn lip_eta(&self) -> f64 {
        lip(&self.eta())
    }

    pub fn lip_nu(&self) -> f64 {
        lip(&self.nu)
    }

    /// Lip(η) + Lip(ν) of the chain actually solved.
    pub fn lip(&self) -> f64 {
        self.lip_eta() + self.lip_nu()
    }

    pub fn to_generator(&self) -> Result<JumpGeneratorSpec> {
        let n = self.n();
        let eta = self.eta();
        let states = (0..=n).map(|x| x as f64).collect();
        let mut lambda = Vec::with_capacity(n + 1);
        let mut rows = Vec::with_capacity(n + 1);
        for x in 0..=n {
            let l = eta[x] + self.nu[x];
            lambda.push(l);
            let mut row = Vec::new();
            if l > 0.0 {
                if eta[x] > 0.0 {
                    row.push((x + 1, eta[x] / l));
                }
                if self.nu[x] > 0.0 {
                    row.push((x - 1, self.nu[x] / l));
                }
            }
            rows.push(row);
        }
        JumpGeneratorSpec::new(states, lambda, rows)
    }
}

fn lip(r: &[f64]) -> f64 {
    r.windows(2).map(|w| (w[1] - w[0]).abs()).fold(0.0, f64::max)
}

/// κ = min over x ∈ {0..N−1} of η(x) + ν(x+1) − η(x+1) − ν(x), raw rates.
pub fn curvature(bd: &BirthDeathSpec) -> f64 {
    truncated_difference(bd, bd.n(), false)
}

/// κ^N: as [`curvature`] on {0..n−1} with η(n) replaced by 0.
pub fn truncated_curvature(bd: &BirthDeathSpec, n: usize) -> Result<f64> {
    if n < 2 || n > bd.n() {
        return Err(Error::Domain(format!("need 2 ≤ N ≤ {}, got {n}", bd.n())));
    }
    Ok(truncated_difference(bd, n, true))
}

fn truncated_difference(bd: &BirthDeathSpec, n: usize, cut: bool) -> f64 {
    let (e, v) = (&bd.eta_raw, &bd.nu);
    (0..n)
        .map(|x| {
            let up = if cut && x + 1 == n { 0.0 } else { e[x + 1] };
            e[x] + v[x + 1] - up - v[x]
        })
        .fold(f64::INFINITY, f64::min)
}

/// |z+1|^ρ − |z|^ρ − ρz|z|^{ρ−2}, stable for large |z|.
fn increment_excess(z: f64, rho: f64) -> f64 {
    if z.abs() < 2.0 {
        return (z + 1.0).abs().powf(rho) - z.abs().powf(rho) - rho * crate::quad::signed_pow(z, rho - 1.0);
    }
    // |z|^ρ((1+u)^ρ − 1 − ρu), u = 1/z
    let u = 1.0 / z;
    let f = if u.abs() < 1e-3 {
        let mut term = rho * (rho - 1.0) / 2.0 * u * u;
        let mut sum = term;
        for k in 3..12 {
            term *= (rho - (k - 1) as f64) / k as f64 * u;
            sum += term;
        }
        sum
    } else {
        (rho * u.ln_1p()).exp_m1() - rho * u
    };
    z.abs().powf(rho) * f
}

/// C_ρ with |z+1|^ρ − |z|^ρ − ρz|z|^{ρ−2} ≤ C_ρ(1 + 1_{ρ>2}|z|^{ρ−2}) on ℤ.
///
/// 1 for ρ ∈ (1,2]; for ρ > 2 the maximum over |z| ≤ 10⁶ together with the
/// large-|z| limit ρ(ρ−1)/2 plus a ρ³·10⁻⁶ guard.
pub fn contraction_constant(rho: f64) -> Result<f64> {
    if !(rho >= 1.0 && rho.is_finite()) {
        return Err(Error::Domain(format!("ρ must be ≥ 1, got {rho}")));
    }
    if rho == 1.0 {
        return Ok(0.0);
    }
    if rho <= 2.0 {
        return Ok(1.0);
    }
    let sampled = (-1_000_000i64..=1_000_000)
        .map(|z| {
            let z = z as f64;
            increment_excess(z, rho) / (1.0 + z.abs().powf(rho - 2.0))
        })
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(sampled.max(rho * (rho - 1.0) / 2.0 + rho.powi(3) * 1e-6))
}

/// c_ρ = sup over x ∈ ℕ of (1+x)((1+x)^ρ − x^ρ)/(1+x^ρ): maximum over
/// {0..10⁶} and the limit ρ.
pub fn moment_constant(rho: f64) -> Result<f64> {
    if !(rho >= 1.0 && rho.is_finite()) {
        return Err(Error::Domain(format!("ρ must be ≥ 1, got {rho}")));
    }
    let sampled = (0..=1_000_000u32)
        .map(|x| {
            let x = x as f64;
            let diff = if x == 0.0 { 1.0 } else { x.powf(rho) * (rho * (1.0 / x).ln_1p()).exp_m1() };
            (1.0 + x) * diff / (1.0 + x.powf(rho))
        })
        .fold(rho, f64::max);
    Ok(sampled)
}

/// (E[X_t^ρ], (E[X_0^ρ] + 1)e^{c_ρCt} − 1) on the truncated chain.
pub fn moment_bound(bd: &BirthDeathSpec, p0: &DiscreteMeasure, rho: f64, t: f64) -> Result<(f64, f64)> {
    let gen = bd.to_generator()?;
    let (v, _) = propagate(&gen, &gen.state_vector(p0)?, t, 1e-15)?;
    let exact = gen.measure_from(&v)?.moment(rho);
    let c = moment_constant(rho)?;
    let bound = (p0.moment(rho) + 1.0) * (c * bd.growth_constant() * t).exp() - 1.0;
    Ok((exact, bound))
}

/// W_ρ^ρ through the monotone coupling.
fn w_pow(a: &DiscreteMeasure, b: &DiscreteMeasure, rho: f64) -> f64 {
    monotone_coupling(a, b)
        .iter()
        .map(|c| c.mass() * cost(a.support()[c.i], b.support()[c.j], rho))
        .sum()
}

/// −expm1(−x)/x, 1 at 0.
fn phi(x: f64) -> f64 {
    if x.abs() < 1e-8 {
        1.0 - 0.5 * x
    } else {
        -(-x).exp_m1() / x
    }
}

/// π_j^ρ = Π_{i=0}^{j} C_{ρ−i}L/(κ(ρ−i−1)).
pub fn pi_products(rho: f64, lip: f64, kappa: f64) -> Result<Vec<f64>> {
    let top = (rho - 2.0).ceil().max(0.0) as usize;
    let mut out = Vec::with_capacity(top + 1);
    let mut acc = 1.0;
    for i in 0..=top {
        let r = rho - i as f64;
        acc *= contraction_constant(r)? * lip / (kappa * (r - 1.0));
        out.push(acc);
    }
    Ok(out)
}

/// The iterated bound for ρ > 2, κ > 0, divided by e^{−κt}.
pub fn iterated_bound_factor(rho: f64, lip: f64, kappa: f64, w0: impl Fn(f64) -> f64) -> Result<f64> {
    if !(rho > 2.0 && kappa > 0.0) {
        return Err(Error::Domain("the iterated bound needs ρ > 2 and κ > 0".into()));
    }
    let pi = pi_products(rho, lip, kappa)?;
    let pim1 = |j: usize| if j == 0 { 1.0 } else { pi[j - 1] };
    let top = (rho - 2.0).ceil() as usize;
    let mut s: f64 = (0..=top).map(|j| pim1(j) * w0(rho - j as f64)).sum();
    let top1 = (rho - 1.0).ceil() as usize;
    s += (1..=top1).map(pim1).sum::<f64>() * w0(1.0);
    Ok(s)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ContractionReport {
    pub rho: f64,
    pub kappa: f64,
    pub kappa_n: f64,
    pub lip: f64,
    pub c_rho: f64,
    /// κ(ρ−1) = 0: the ρ ∈ (1,2] bound uses its continuous limit.
    pub degenerate: bool,
    pub t: Vec<f64>,
    pub w1: Vec<f64>,
    pub bound1: Vec<f64>,
    pub w_rho: Vec<f64>,
    pub bound_rho: Vec<f64>,
    /// The iterated bound, when ρ > 2 and κ^N > 0.
    pub iterated: Option<Vec<f64>>,
    pub violation: Vec<f64>,
}

impl ContractionReport {
    pub fn max_violation(&self) -> f64 {
        self.violation.iter().copied().fold(0.0, f64::max)
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("t,w1,bound1,w_rho,bound_rho,violation\n");
        for k in 0..self.t.len() {
            s.push_str(&format!(
                "{},{},{},{},{},{}\n",
                self.t[k], self.w1[k], self.bound1[k], self.w_rho[k], self.bound_rho[k], self.violation[k]
            ));
        }
        s
    }
}

fn violation(lhs: f64, rhs: f64) -> f64 {
    (lhs - rhs).max(0.0) / rhs.abs().max(1.0)
}

const SOLVER_TOL: f64 = 1e-15;

/// Node-wise check of the §4 estimates on [0, t_end] for two initial laws
/// under the same truncated chain. The bounds use κ^N and the Lipschitz
/// constants of the truncated rates.
pub fn contraction_report(
    bd: &BirthDeathSpec,
    p0_x: &DiscreteMeasure,
    p0_y: &DiscreteMeasure,
    rho: f64,
    t_end: f64,
    n_steps: usize,
) -> Result<ContractionReport> {
    if !(rho >= 1.0 && rho.is_finite()) {
        return Err(Error::Domain(format!("ρ must be ≥ 1, got {rho}")));
    }
    if n_steps == 0 || !(t_end > 0.0 && t_end.is_finite()) {
        return Err(Error::Domain("need n_steps ≥ 1 and a positive finite t_end".into()));
    }
    let gen = bd.to_generator()?;
    let kappa = curvature(bd);
    let kn = truncated_curvature(bd, bd.n())?;
    let lip = bd.lip();
    let c_rho = contraction_constant(rho)?;
    let times: Vec<f64> = (0..=n_steps).map(|k| t_end * k as f64 / n_steps as f64).collect();

    let mut vx = vec![gen.state_vector(p0_x)?];
    let mut vy = vec![gen.state_vector(p0_y)?];
    for k in 1..=n_steps {
        let dt = times[k] - times[k - 1];
        vx.push(propagate(&gen, &vx[k - 1], dt, SOLVER_TOL)?.0);
        vy.push(propagate(&gen, &vy[k - 1], dt, SOLVER_TOL)?.0);
    }
    let laws = |v: &[f64], w: &[f64]| -> Result<(DiscreteMeasure, DiscreteMeasure)> {
        Ok((gen.measure_from(v)?, gen.measure_from(w)?))
    };
    let mut w1 = Vec::with_capacity(n_steps + 1);
    let mut wr = Vec::with_capacity(n_steps + 1);
    for k in 0..=n_steps {
        let (a, b) = laws(&vx[k], &vy[k])?;
        w1.push(w_pow(&a, &b, 1.0));
        wr.push(w_pow(&a, &b, rho));
    }
    let bound1: Vec<f64> = times.iter().map(|t| w1[0] * (-kn * t).exp()).collect();
    let degenerate = rho > 1.0 && rho <= 2.0 && kn * (rho - 1.0) == 0.0;

    let bound_rho: Vec<f64> = if rho == 1.0 {
        bound1.clone()
    } else if rho <= 2.0 {
        times
            .iter()
            .map(|&t| {
                // (e^{−κt} − e^{−κρt})/(κ(ρ−1)) = t e^{−κt} φ(κ(ρ−1)t)
                wr[0] * (-kn * rho * t).exp() + lip * w1[0] * t * (-kn * t).exp() * phi(kn * (rho - 1.0) * t)
            })
            .collect()
    } else {
        // W_ρ^ρ(0)e^{−κρt} + C_ρL ∫_0^t e^{κρ(r−t)}(W_1 + W_{ρ−1}^{ρ−1})(r) dr
        let mut integral = vec![0.0; n_steps + 1];
        for k in 0..n_steps {
            let (t0, t1) = (times[k], times[k + 1]);
            let err = std::cell::RefCell::new(None);
            let cell = gauss8(t0, t1, |r| {
                let inner = || -> Result<f64> {
                    let a = propagate(&gen, &vx[k], r - t0, SOLVER_TOL)?.0;
                    let b = propagate(&gen, &vy[k], r - t0, SOLVER_TOL)?.0;
                    let (a, b) = laws(&a, &b)?;
                    Ok((kn * rho * r).exp() * (w_pow(&a, &b, 1.0) + w_pow(&a, &b, rho - 1.0)))
                };
                inner().unwrap_or_else(|e| {
                    *err.borrow_mut() = Some(e);
                    0.0
                })
            });
            if let Some(e) = err.into_inner() {
                return Err(e);
            }
            integral[k + 1] = integral[k] + cell;
        }
        times
            .iter()
            .zip(&integral)
            .map(|(&t, i)| (-kn * rho * t).exp() * (wr[0] + c_rho * lip * i))
            .collect()
    };

    let iterated = if rho > 2.0 && kn > 0.0 {
        let (a, b) = laws(&vx[0], &vy[0])?;
        let factor = iterated_bound_factor(rho, lip, kn, |r| w_pow(&a, &b, r))?;
        Some(times.iter().map(|t| factor * (-kn * t).exp()).collect::<Vec<_>>())
    } else {
        None
    };

    let violation = (0..=n_steps)
        .map(|k| {
            let mut v = violation(w1[k], bound1[k]).max(violation(wr[k], bound_rho[k]));
            if let Some(it) = &iterated {
                v = v.max(violation(wr[k], it[k]));
            }
            v
        })
        .collect();
    Ok(ContractionReport {
        rho,
        kappa,
        kappa_n: kn,
        lip,
        c_rho,
        degenerate,
        t: times,
        w1,
        bound1,
        w_rho: wr,
        bound_rho,
        iterated,
        violation,
    })
}

/// Rates as named in configuration files.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum RateConfig {
    MmInfty { a: f64, b: f64, n: usize },
    ConstBirthLinearDeath { birth: f64, death: f64, n: usize },
    Mm1 { a: f64, b: f64, n: usize },
    Custom { eta: Vec<f64>, nu: Vec<f64> },
}

impl RateConfig {
    pub fn build(&self) -> Result<BirthDeathSpec> {
        match self {
            RateConfig::MmInfty { a, b, n } => BirthDeathSpec::mm_infty(*a, *b, *n),
            RateConfig::ConstBirthLinearDeath { birth, death, n } => BirthDeathSpec::mm_infty(*birth, *death, *n),
            RateConfig::Mm1 { a, b, n } => BirthDeathSpec::mm1(*a, *b, *n),
            RateConfig::Custom { eta, nu } => BirthDeathSpec::new(eta.clone(), nu.clone()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn curvature_examples() {
        let bd = BirthDeathSpec::mm_infty(2.0, 0.7, 30).unwrap();
        assert!((curvature(&bd) - 0.7).abs() < 1e-15);
        let m1 = BirthDeathSpec::mm1(1.0, 3.0, 30).unwrap();
        assert_eq!(curvature(&m1), 0.0);
        let zero = BirthDeathSpec::mm_infty(0.0, 0.0, 10).unwrap();
        assert_eq!(curvature(&zero), 0.0);
        assert_eq!(truncated_curvature(&zero, 10).unwrap(), 0.0);
    }

    #[test]
    fn truncated_curvature_examples() {
        let bd = BirthDeathSpec::mm_infty(1.0, 1.0, 10).unwrap();
        assert!((truncated_curvature(&bd, 10).unwrap() - 1.0).abs() < 1e-15);
        let bd = BirthDeathSpec::from_fns(40, |x| 2.0 + (x as f64).sqrt(), |x| 1.5 * x as f64).unwrap();
        for n in [5, 10, 20] {
            let kn = truncated_curvature(&bd, n).unwrap();
            let lo = truncated_difference(&bd, n, false);
            let hi = truncated_difference(&bd, n - 1, false);
            assert!(lo <= kn && kn <= hi);
        }
        assert!(truncated_curvature(&bd, 1).is_err());
    }

    #[test]
    fn spec_validation() {
        assert!(BirthDeathSpec::new(vec![1.0; 4], vec![0.5, 1.0, 1.0, 1.0]).is_err());
        assert!(BirthDeathSpec::new(vec![1.0; 4], vec![0.0; 3]).is_err());
        assert!(BirthDeathSpec::new(vec![-1.0, 1.0, 1.0], vec![0.0; 3]).is_err());
        assert!(BirthDeathSpec::with_growth(vec![1.0, 4.0, 1.0], vec![0.0; 3], 1.0).is_err());
        let bd = BirthDeathSpec::with_growth(vec![1.0, 2.0, 3.0], vec![0.0, 1.0, 2.0], 1.0).unwrap();
        assert_eq!(bd.eta(), vec![1.0, 2.0, 0.0]);
        assert_eq!(bd.lip_eta(), 2.0);
        assert_eq!(bd.lip_nu(), 1.0);
    }

    #[test]
    fn constants() {
        assert_eq!(contraction_constant(1.5).unwrap(), 1.0);
        assert_eq!(contraction_constant(1.0).unwrap(), 0.0);
        let c3 = contraction_constant(3.0).unwrap();
        // z ≥ 0: 3z + 1 over 1 + z → 3; z = −1 gives 2
        assert!(c3 >= 3.0 && c3 < 3.0 + 1e-4);
        for rho in [2.5, 3.0, 4.0] {
            let c = contraction_constant(rho).unwrap();
            for z in -50..=50 {
                let z = z as f64;
                assert!(increment_excess(z, rho) <= c * (1.0 + z.abs().powf(rho - 2.0)) * (1.0 + 1e-12));
            }
        }
        // c_1: (1+x)/(1+x) = 1
        assert!((moment_constant(1.0).unwrap() - 1.0).abs() < 1e-12);
        // c_2 at x = 1: 2·3/2 = 3, which is the maximum
        assert!((moment_constant(2.0).unwrap() - 3.0).abs() < 1e-12);
    }

    #[test]
    fn excess_series_matches_direct() {
        for rho in [2.5, 3.0, 3.7] {
            for z in [2.0, -2.0, 10.0, 1500.0, -1500.0] {
                let direct = (z + 1.0f64).abs().powf(rho) - z.abs().powf(rho) - rho * z * z.abs().powf(rho - 2.0);
                let s = increment_excess(z, rho);
                assert!((s - direct).abs() <= 1e-9 * direct.abs().max(1.0), "{rho} {z} {s} {direct}");
            }
        }
    }

    #[test]
    fn equal_laws_give_zero() {
        let bd = BirthDeathSpec::mm_infty(1.0, 1.0, 20).unwrap();
        let p = DiscreteMeasure::dirac(4.0);
        for rho in [1.0, 1.5, 3.0] {
            let r = contraction_report(&bd, &p, &p, rho, 1.0, 10).unwrap();
            assert!(r.w1.iter().all(|w| *w == 0.0));
            assert_eq!(r.max_violation(), 0.0);
        }
    }

    #[test]
    fn mm_infty_w1_contracts() {
        let bd = BirthDeathSpec::mm_infty(1.0, 1.0, 40).unwrap();
        let r = contraction_report(&bd, &DiscreteMeasure::dirac(3.0), &DiscreteMeasure::dirac(7.0), 1.0, 2.0, 100)
            .unwrap();
        for (t, w) in r.t.iter().zip(&r.w1) {
            assert!(*w <= 4.0 * (-t).exp() * (1.0 + 1e-8));
        }
        assert!(r.max_violation() <= 1e-8);
    }

    #[test]
    fn zero_curvature_limit_flagged() {
        let bd = BirthDeathSpec::mm1(1.0, 2.0, 30).unwrap();
        let r = contraction_report(&bd, &DiscreteMeasure::dirac(2.0), &DiscreteMeasure::dirac(5.0), 2.0, 1.0, 20)
            .unwrap();
        assert!(r.degenerate);
        assert!(r.bound_rho.iter().all(|b| b.is_finite()));
        assert!(r.max_violation() <= 1e-8);
    }

    #[test]
    fn iterated_bound_for_dirac_pairs() {
        // δ_x vs δ_y: (1 + 2Σ_{j=1}^{⌈ρ−2⌉} π_{j−1} + π_{⌈ρ−2⌉})|x−y|^ρ
        let (rho, lip, kappa) = (3.0, 1.0, 1.0);
        let d: f64 = 4.0;
        let f = iterated_bound_factor(rho, lip, kappa, |r| d.powf(r)).unwrap();
        let pi = pi_products(rho, lip, kappa).unwrap();
        let closed = d.powi(3) + pi[0] * d * d + (pi[0] + pi[1]) * d;
        assert!((f - closed).abs() < 1e-12);
        assert!(f <= (1.0 + 2.0 * pi[0] + pi[1]) * d.powi(3));
    }

    #[test]
    fn moment_bound_holds() {
        let bd = BirthDeathSpec::mm_infty(2.0, 0.5, 60).unwrap();
        for alpha in [1.0, 2.0, 3.0] {
            let (exact, bound) = moment_bound(&bd, &DiscreteMeasure::dirac(3.0), alpha, 1.0).unwrap();
            assert!(exact <= bound, "{alpha} {exact} {bound}");
        }
    }

    #[test]
    fn rate_config_families() {
        let c: RateConfig = toml::from_str("family = \"mm_infty\"\na = 1.0\nb = 2.0\nn = 10").unwrap();
        assert_eq!(c.build().unwrap(), BirthDeathSpec::mm_infty(1.0, 2.0, 10).unwrap());
        let c: RateConfig = toml::from_str("family = \"custom\"\neta = [1.0, 1.0, 1.0]\nnu = [0.0, 1.0, 2.0]").unwrap();
        assert_eq!(c.build().unwrap().n(), 2);
    }
}
