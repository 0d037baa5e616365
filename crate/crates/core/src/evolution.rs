//! Verification of the integral identity
//! W_ρ^ρ(P_t,P̃_t) − W_ρ^ρ(P_0,P̃_0) = −∫_0^t (∫Lψ_r dP_r + ∫L̃ψ̃_r dP̃_r) dr
//! for finite-state jump processes.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::jump_process::{propagate, JumpGeneratorSpec};
use crate::measures::DiscreteMeasure;
use crate::tabulated::Tabulated;
use crate::transport::{self, cost, monotone_coupling};

/// Lf at every state of `gen`.
pub fn apply_generator(gen: &JumpGeneratorSpec, f: &Tabulated) -> Result<Tabulated> {
    let vals = gen.states().iter().map(|&x| f.require(x)).collect::<Result<Vec<_>>>()?;
    Tabulated::new(gen.states().to_vec(), gen.apply(&vals))
}

/// −∫Lψ dmX − ∫L̃ψ̃ dmY for the Kantorovich pair of (mX, mY).
pub fn rhs_integrand(
    gen_x: &JumpGeneratorSpec,
    gen_y: &JumpGeneratorSpec,
    m_x: &DiscreteMeasure,
    m_y: &DiscreteMeasure,
    rho: f64,
) -> Result<f64> {
    if !(rho > 1.0 && rho.is_finite()) {
        return Err(Error::DegeneratePotential(format!("potentials need ρ > 1, got {rho}")));
    }
    let vx = gen_x.state_vector(m_x)?;
    let vy = gen_y.state_vector(m_y)?;
    let (px, py) = state_potentials(gen_x, gen_y, m_x, m_y, rho);
    let lx = gen_x.apply(&px);
    let ly = gen_y.apply(&py);
    Ok(-dot(&vx, &lx) - dot(&vy, &ly))
}

/// Kantorovich pair of (m_x, m_y) on every state of both generators.
///
/// ψ̃ is the ρ-transform of ψ on supp m_x, and off-support ψ is the
/// ρ-transform of that ψ̃ over all of the Y states, so −ψ(x) − ψ̃(y) ≤ c(x, y)
/// for every pair of states and ψ is unchanged on supp m_x.
pub fn state_potentials(
    gen_x: &JumpGeneratorSpec,
    gen_y: &JumpGeneratorSpec,
    m_x: &DiscreteMeasure,
    m_y: &DiscreteMeasure,
    rho: f64,
) -> (Vec<f64>, Vec<f64>) {
    let pair = transport::atomic_potentials(m_x, m_y, rho);
    let psi = pair.psi();
    let (sx, sp) = (psi.nodes(), psi.values());
    let py: Vec<f64> = gen_y
        .states()
        .iter()
        .map(|&y| {
            -sx.iter()
                .zip(sp)
                .map(|(&x, &p)| cost(x, y, rho) + p)
                .fold(f64::INFINITY, f64::min)
        })
        .collect();
    let px = gen_x
        .states()
        .iter()
        .map(|&x| match psi.at_node(x) {
            Some(v) => v,
            None => -gen_y
                .states()
                .iter()
                .zip(&py)
                .map(|(&y, &q)| cost(x, y, rho) + q)
                .fold(f64::INFINITY, f64::min),
        })
        .collect();
    (px, py)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).filter(|(m, _)| **m > 0.0).map(|(m, v)| m * v).sum()
}

/// Time quadrature for the identity.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Quadrature {
    /// Composite Simpson on the smooth pieces between coupling switches.
    Simpson,
    /// Trapezoid on the smooth pieces between coupling switches.
    Trapezoid,
    /// Trapezoid on the uniform node grid only.
    PlainTrapezoid,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IdentityOptions {
    pub quadrature: Quadrature,
    /// Poisson truncation tolerance for the marginals. Kept near underflow:
    /// a reachable state that loses all its mass gets an off-support
    /// potential, which biases Lψ on its neighbours.
    pub tol: f64,
    /// δ of the diagnostic ∫|Lψ|^{1+δ}dP.
    pub diag_delta: f64,
    /// Node 0 is evaluated at `start_offset·t_end` (right limit).
    pub start_offset: f64,
    /// Coupling pairs are compared only on quantile levels in [w, 1−w].
    pub switch_window: f64,
    /// Bisection stops once a switch is bracketed this tightly.
    pub bracket: f64,
    /// Below this width an interval whose signature changes in both halves
    /// is rounding flicker at a slow level crossing and is not refined.
    pub noise_window: f64,
}

impl Default for IdentityOptions {
    fn default() -> Self {
        IdentityOptions {
            quadrature: Quadrature::Simpson,
            tol: 1e-300,
            diag_delta: 0.5,
            start_offset: 1e-9,
            switch_window: 1e-11,
            bracket: 1e-12,
            noise_window: 1e-8,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvolutionReport {
    pub time_grid: Vec<f64>,
    pub w_values: Vec<f64>,
    pub integrand: Vec<f64>,
    pub cumulative: Vec<f64>,
    pub residual: Vec<f64>,
    pub diagnostics: Vec<f64>,
    /// Midpoints of the brackets where the coupling structure switched.
    pub switch_times: Vec<f64>,
}

impl EvolutionReport {
    pub fn max_residual(&self) -> f64 {
        self.residual.iter().copied().fold(0.0, f64::max)
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("t,w_rho_rho,integrand,cumulative,residual,diag\n");
        for k in 0..self.time_grid.len() {
            s.push_str(&format!(
                "{},{},{},{},{},{}\n",
                self.time_grid[k],
                self.w_values[k],
                self.integrand[k],
                self.cumulative[k],
                self.residual[k],
                self.diagnostics[k]
            ));
        }
        s
    }
}

/// Everything known about the pair of marginals at one time.
#[derive(Debug, Clone)]
struct Snapshot {
    t: f64,
    vx: Vec<f64>,
    vy: Vec<f64>,
    w: f64,
    integrand: f64,
    diag: f64,
    signature: Vec<(usize, usize)>,
}

struct Pair<'a> {
    gx: &'a JumpGeneratorSpec,
    gy: &'a JumpGeneratorSpec,
    rho: f64,
    opts: IdentityOptions,
}

fn support_indices(gen: &JumpGeneratorSpec, v: &[f64]) -> Vec<usize> {
    (0..gen.len()).filter(|&i| v[i] > 0.0).collect()
}

impl Pair<'_> {
    fn snapshot(&self, t: f64, vx: Vec<f64>, vy: Vec<f64>) -> Result<Snapshot> {
        let mx = self.gx.measure_from(&vx)?;
        let my = self.gy.measure_from(&vy)?;
        let ix = support_indices(self.gx, &vx);
        let iy = support_indices(self.gy, &vy);
        let (px, py) = state_potentials(self.gx, self.gy, &mx, &my, self.rho);
        let lx = self.gx.apply(&px);
        let ly = self.gy.apply(&py);
        let integrand = -dot(&vx, &lx) - dot(&vy, &ly);
        let q = 1.0 + self.opts.diag_delta;
        let diag = vx.iter().zip(&lx).map(|(m, l)| m * l.abs().powf(q)).sum();
        let win = self.opts.switch_window;
        let mut w = 0.0;
        let mut signature = Vec::new();
        for c in monotone_coupling(&mx, &my) {
            w += c.mass() * cost(mx.support()[c.i], my.support()[c.j], self.rho);
            if c.u1 > win && c.u0 < 1.0 - win {
                signature.push((ix[c.i], iy[c.j]));
            }
        }
        Ok(Snapshot { t, vx, vy, w, integrand, diag, signature })
    }

    fn advance(&self, from: &Snapshot, t: f64) -> Result<Snapshot> {
        let dt = t - from.t;
        let (vx, _) = propagate(self.gx, &from.vx, dt, self.opts.tol)?;
        let (vy, _) = propagate(self.gy, &from.vy, dt, self.opts.tol)?;
        self.snapshot(t, vx, vy)
    }

    /// ∫_a^b of the integrand, splitting at coupling switches.
    fn integrate(&self, a: &Snapshot, b: &Snapshot, depth: u32, switches: &mut Vec<f64>) -> Result<f64> {
        let h = b.t - a.t;
        if self.opts.quadrature == Quadrature::PlainTrapezoid {
            return Ok(0.5 * h * (a.integrand + b.integrand));
        }
        let m = self.advance(a, 0.5 * (a.t + b.t))?;
        let smooth = a.signature == m.signature && m.signature == b.signature;
        if smooth {
            return Ok(match self.opts.quadrature {
                Quadrature::Simpson => h / 6.0 * (a.integrand + 4.0 * m.integrand + b.integrand),
                _ => 0.5 * h * (a.integrand + b.integrand),
            });
        }
        let flicker = h <= self.opts.noise_window && a.signature != m.signature && m.signature != b.signature;
        if h <= self.opts.bracket || depth >= 60 || flicker {
            switches.push(m.t);
            return Ok(0.5 * h * (a.integrand + b.integrand));
        }
        let left = self.integrate(a, &m, depth + 1, switches)?;
        let right = self.integrate(&m, b, depth + 1, switches)?;
        Ok(left + right)
    }
}

/// Marginals at `n_steps + 1` uniform nodes on [0, t_end], W_ρ^ρ, the
/// integrand, its cumulative integral and the residual of the identity.
pub fn verify_identity(
    gen_x: &JumpGeneratorSpec,
    gen_y: &JumpGeneratorSpec,
    p0_x: &DiscreteMeasure,
    p0_y: &DiscreteMeasure,
    rho: f64,
    t_end: f64,
    n_steps: usize,
) -> Result<EvolutionReport> {
    verify_identity_with(gen_x, gen_y, p0_x, p0_y, rho, t_end, n_steps, IdentityOptions::default())
}

#[allow(clippy::too_many_arguments)]
pub fn verify_identity_with(
    gen_x: &JumpGeneratorSpec,
    gen_y: &JumpGeneratorSpec,
    p0_x: &DiscreteMeasure,
    p0_y: &DiscreteMeasure,
    rho: f64,
    t_end: f64,
    n_steps: usize,
    opts: IdentityOptions,
) -> Result<EvolutionReport> {
    if rho == 1.0 {
        return Err(Error::DegeneratePotential(
            "the identity is verified through potentials, which need ρ > 1; use birth_death for ρ = 1".into(),
        ));
    }
    if !(rho > 1.0 && rho.is_finite()) {
        return Err(Error::Domain(format!("ρ must be > 1, got {rho}")));
    }
    if n_steps < 2 {
        return Err(Error::Domain("need at least two time steps".into()));
    }
    if !(t_end > 0.0 && t_end.is_finite()) {
        return Err(Error::Domain(format!("t_end must be positive, got {t_end}")));
    }
    let pair = Pair { gx: gen_x, gy: gen_y, rho, opts };
    let times: Vec<f64> = (0..=n_steps).map(|k| t_end * k as f64 / n_steps as f64).collect();

    let origin = pair.snapshot(0.0, gen_x.state_vector(p0_x)?, gen_y.state_vector(p0_y)?)?;
    let h0 = opts.start_offset * t_end;
    let start = if h0 > 0.0 { pair.advance(&origin, h0)? } else { origin.clone() };
    let mut nodes = vec![start];
    for k in 1..=n_steps {
        let s = pair.advance(&nodes[k - 1], times[k])?;
        nodes.push(s);
    }
    let cells: Vec<(f64, Vec<f64>)> = (0..n_steps)
        .into_par_iter()
        .map(|k| {
            let mut sw = Vec::new();
            let v = pair.integrate(&nodes[k], &nodes[k + 1], 0, &mut sw)?;
            Ok((v, sw))
        })
        .collect::<Result<Vec<_>>>()?;

    let w0 = origin.w;
    let mut cumulative = vec![0.0; n_steps + 1];
    let mut acc = h0 * nodes[0].integrand;
    let mut switch_times = Vec::new();
    for (k, (v, sw)) in cells.into_iter().enumerate() {
        acc += v;
        cumulative[k + 1] = acc;
        switch_times.extend(sw);
    }
    let mut w_values: Vec<f64> = nodes.iter().map(|n| n.w).collect();
    w_values[0] = w0;
    let residual = (0..=n_steps)
        .map(|k| if k == 0 { 0.0 } else { (w_values[k] - w0 - cumulative[k]).abs() })
        .collect();
    Ok(EvolutionReport {
        time_grid: times,
        w_values,
        integrand: nodes.iter().map(|n| n.integrand).collect(),
        cumulative,
        residual,
        diagnostics: nodes.iter().map(|n| n.diag).collect(),
        switch_times,
    })
}

/// Both sides of W(t+h) − W(t) ≥ −∫ψ_t d(P_{t+h} − P_t) − ∫ψ̃_t d(P̃_{t+h} − P̃_t).
#[allow(clippy::too_many_arguments)]
pub fn dual_increment(
    gen_x: &JumpGeneratorSpec,
    gen_y: &JumpGeneratorSpec,
    p0_x: &DiscreteMeasure,
    p0_y: &DiscreteMeasure,
    rho: f64,
    t: f64,
    h: f64,
    tol: f64,
) -> Result<(f64, f64)> {
    let (ax, _) = propagate(gen_x, &gen_x.state_vector(p0_x)?, t, tol)?;
    let (ay, _) = propagate(gen_y, &gen_y.state_vector(p0_y)?, t, tol)?;
    let (bx, _) = propagate(gen_x, &ax, h, tol)?;
    let (by, _) = propagate(gen_y, &ay, h, tol)?;
    let (max, may) = (gen_x.measure_from(&ax)?, gen_y.measure_from(&ay)?);
    let (mbx, mby) = (gen_x.measure_from(&bx)?, gen_y.measure_from(&by)?);
    let wa = transport::wasserstein_pow(&max.clone().into(), &may.clone().into(), rho)?;
    let wb = transport::wasserstein_pow(&mbx.into(), &mby.into(), rho)?;
    let (px, py) = state_potentials(gen_x, gen_y, &max, &may, rho);
    let dx: f64 = (0..gen_x.len()).map(|i| (bx[i] - ax[i]) * px[i]).sum();
    let dy: f64 = (0..gen_y.len()).map(|j| (by[j] - ay[j]) * py[j]).sum();
    Ok((wb - wa, -dx - dy))
}
