//! One-dimensional optimal transport for the cost |x − y|^ρ.

use crate::error::{Error, Result};
use crate::measures::{DiscreteMeasure, GridMeasure, Measure, QuantilePiece};
use crate::quad::{mean_abs_pow, mean_signed_pow};
use crate::tabulated::Tabulated;

/// Absolute feasibility tolerance, scaled by the magnitude of the potentials.
pub const FEAS_TOL: f64 = 1e-9;

#[inline]
pub fn cost(x: f64, y: f64, rho: f64) -> f64 {
    let d = (x - y).abs();
    if rho == 2.0 {
        d * d
    } else if rho == 1.0 {
        d
    } else {
        d.powf(rho)
    }
}

fn check_rho(rho: f64) -> Result<()> {
    if rho >= 1.0 && rho.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!("ρ must be ≥ 1, got {rho}")))
    }
}

/// One block of the monotone coupling: atom `i` of the source paired with
/// atom `j` of the target on the quantile levels `u0..u1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CouplingPair {
    pub i: usize,
    pub j: usize,
    pub u0: f64,
    pub u1: f64,
    mass: f64,
}

impl CouplingPair {
    /// Mass of the block, accurate in both tails (unlike `u1 − u0`).
    pub fn mass(&self) -> f64 {
        self.mass
    }
}

/// A quantile level held as both the mass below (`lo`) and above (`hi`).
#[derive(Debug, Clone, Copy)]
struct Level {
    lo: f64,
    hi: f64,
}

impl Level {
    fn upper(&self) -> bool {
        self.lo > 0.5
    }

    fn cmp(&self, o: &Level) -> std::cmp::Ordering {
        if self.upper() && o.upper() {
            o.hi.total_cmp(&self.hi)
        } else {
            self.lo.total_cmp(&o.lo)
        }
    }

    fn mass_to(&self, next: &Level) -> f64 {
        if self.upper() || next.upper() {
            self.hi - next.hi
        } else {
            next.lo - self.lo
        }
    }
}

fn levels(weights: &[f64]) -> Vec<Level> {
    let n = weights.len();
    let mut hi = vec![0.0; n];
    for k in (0..n - 1).rev() {
        hi[k] = hi[k + 1] + weights[k + 1];
    }
    let mut lo = 0.0;
    (0..n)
        .map(|k| {
            lo += weights[k];
            if k == n - 1 {
                Level { lo: 1.0, hi: 0.0 }
            } else {
                Level { lo: lo.min(1.0), hi: hi[k] }
            }
        })
        .collect()
}

/// Monotone (quantile) coupling of two atomic measures.
pub fn monotone_coupling(m1: &DiscreteMeasure, m2: &DiscreteMeasure) -> Vec<CouplingPair> {
    use std::cmp::Ordering::*;
    let (l1, l2) = (levels(m1.weights()), levels(m2.weights()));
    let (n, m) = (l1.len(), l2.len());
    let mut out = Vec::with_capacity(n + m);
    let (mut i, mut j) = (0, 0);
    let mut u = Level { lo: 0.0, hi: 1.0 };
    loop {
        let (a, b) = (l1[i], l2[j]);
        let next = if a.cmp(&b) == Greater { b } else { a };
        if next.cmp(&u) == Greater {
            let mass = u.mass_to(&next);
            out.push(CouplingPair { i, j, u0: u.lo, u1: next.lo, mass });
            u = next;
        }
        if i == n - 1 && j == m - 1 {
            break;
        }
        let ord = a.cmp(&b);
        let adv_i = ord != Greater && i < n - 1;
        let adv_j = ord != Less && j < m - 1;
        if adv_i {
            i += 1;
        }
        if adv_j {
            j += 1;
        }
        if !adv_i && !adv_j {
            // one side is exhausted at level 1; move the other
            if i < n - 1 {
                i += 1;
            } else {
                j += 1;
            }
        }
    }
    out
}

/// W_ρ^ρ, exact for both representations.
///
/// Quantile functions are piecewise affine in u; on each merged piece the
/// integral of |Q1 − Q2|^ρ has a closed form.
pub fn wasserstein_pow(m1: &Measure, m2: &Measure, rho: f64) -> Result<f64> {
    check_rho(rho)?;
    if let (Measure::Atomic(a), Measure::Atomic(b)) = (m1, m2) {
        return Ok(monotone_coupling(a, b)
            .iter()
            .map(|p| p.mass() * cost(a.support()[p.i], b.support()[p.j], rho))
            .sum());
    }
    let (p1, p2) = (m1.quantile_pieces(), m2.quantile_pieces());
    Ok(merged_pieces(&p1, &p2)
        .map(|(u0, u1, a, b)| {
            let d0 = a.at(u0) - b.at(u0);
            let d1 = a.at(u1) - b.at(u1);
            (u1 - u0) * mean_abs_pow(d0, d1, rho)
        })
        .sum())
}

pub fn wasserstein(m1: &Measure, m2: &Measure, rho: f64) -> Result<f64> {
    Ok(wasserstein_pow(m1, m2, rho)?.powf(1.0 / rho))
}

/// Shorthand for atomic inputs.
pub fn wasserstein_atomic(m1: &DiscreteMeasure, m2: &DiscreteMeasure, rho: f64) -> Result<f64> {
    wasserstein(&Measure::Atomic(m1.clone()), &Measure::Atomic(m2.clone()), rho)
}

fn merged_pieces<'a>(
    p1: &'a [QuantilePiece],
    p2: &'a [QuantilePiece],
) -> impl Iterator<Item = (f64, f64, QuantilePiece, QuantilePiece)> + 'a {
    let (mut i, mut j, mut u) = (0usize, 0usize, 0.0f64);
    std::iter::from_fn(move || {
        while i < p1.len() && j < p2.len() {
            let (a, b) = (p1[i], p2[j]);
            let next = a.u1.min(b.u1);
            let start = u;
            if a.u1 <= next {
                i += 1;
            }
            if b.u1 <= next {
                j += 1;
            }
            u = next;
            if next > start {
                return Some((start, next, a, b));
            }
        }
        None
    })
}

fn as_grid(m: &Measure) -> Result<&GridMeasure> {
    match m {
        Measure::Grid(g) => Ok(g),
        Measure::Atomic(_) => Err(Error::Representation(
            "atomic measure has no transport map; use the monotone coupling".into(),
        )),
    }
}

/// Nodes on which T = F₂⁻¹∘F₁ is affine, with T evaluated there.
fn map_nodes(g1: &GridMeasure, g2: &GridMeasure) -> (Vec<f64>, Vec<f64>) {
    let mut xs: Vec<f64> = g1.grid().to_vec();
    let inner = &g2.cdf_values()[1..g2.cdf_values().len() - 1];
    xs.extend(inner.iter().map(|&u| g1.quantile_unchecked(u)));
    xs.sort_by(f64::total_cmp);
    xs.dedup();
    let ts: Vec<f64> = xs.iter().map(|&x| g2.quantile_unchecked(g1.cdf(x))).collect();
    (xs, ts)
}

/// T = F₂⁻¹∘F₁ tabulated on its breakpoints (exact piecewise-linear map).
pub fn optimal_map(m1: &Measure, m2: &Measure) -> Result<Tabulated> {
    let (g1, g2) = (as_grid(m1)?, as_grid(m2)?);
    let (xs, ts) = map_nodes(g1, g2);
    Tabulated::new(xs, ts)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum PairKind {
    Atomic,
    Grid,
    Table,
}

/// Tabulated Kantorovich potentials (ψ, ψ̃), reported with ψ(leftmost) = 0.
///
/// Grid pairs are stored anchored at the median of the source and shifted
/// only on output; on wide grids the shift can dwarf the bulk values.
#[derive(Debug, Clone, PartialEq)]
pub struct PotentialPair {
    pub rho: f64,
    psi: Tabulated,
    psi_tilde: Tabulated,
    map: Option<Tabulated>,
    kind: PairKind,
    // stored ψ at the leftmost node
    offset: f64,
}

impl PotentialPair {
    /// A user-supplied pair. Off the nodes, values are interpolated inside the
    /// table range and obtained by the ρ-transform outside it.
    pub fn from_tables(rho: f64, psi: Tabulated, psi_tilde: Tabulated) -> Result<Self> {
        check_rho(rho)?;
        Ok(PotentialPair { rho, psi, psi_tilde, map: None, kind: PairKind::Table, offset: 0.0 })
    }

    /// The zero pair on the given nodes.
    pub fn zero(rho: f64, xs: Vec<f64>, ys: Vec<f64>) -> Result<Self> {
        let (nx, ny) = (xs.len(), ys.len());
        PotentialPair::from_tables(
            rho,
            Tabulated::new(xs, vec![0.0; nx])?,
            Tabulated::new(ys, vec![0.0; ny])?,
        )
    }

    pub fn psi(&self) -> Tabulated {
        self.shifted(&self.psi, -self.offset)
    }

    pub fn psi_tilde(&self) -> Tabulated {
        self.shifted(&self.psi_tilde, self.offset)
    }

    fn shifted(&self, t: &Tabulated, by: f64) -> Tabulated {
        if by == 0.0 {
            return t.clone();
        }
        let v = t.values().iter().map(|v| v + by).collect();
        Tabulated::new(t.nodes().to_vec(), v).expect("same nodes")
    }

    pub fn transport_map(&self) -> Option<&Tabulated> {
        self.map.as_ref()
    }

    fn transform_to_x(&self, x: f64) -> f64 {
        let t = &self.psi_tilde;
        -t.nodes()
            .iter()
            .zip(t.values())
            .map(|(&y, &v)| cost(x, y, self.rho) + v)
            .fold(f64::INFINITY, f64::min)
    }

    fn transform_to_y(&self, y: f64) -> f64 {
        let p = &self.psi;
        -p.nodes()
            .iter()
            .zip(p.values())
            .map(|(&x, &v)| cost(x, y, self.rho) + v)
            .fold(f64::INFINITY, f64::min)
    }

    /// ψ(x); off the tabulated range ψ is extended by the ρ-transform of ψ̃.
    pub fn psi_at(&self, x: f64) -> f64 {
        self.raw_psi_at(x) - self.offset
    }

    /// ψ̃(y); off the tabulated range by the ρ-transform of ψ.
    pub fn psi_tilde_at(&self, y: f64) -> f64 {
        self.raw_psi_tilde_at(y) + self.offset
    }

    fn raw_psi_at(&self, x: f64) -> f64 {
        if let Some(v) = self.psi.at_node(x) {
            return v;
        }
        match self.kind {
            PairKind::Atomic => self.transform_to_x(x),
            PairKind::Grid => self.grid_psi(x).unwrap_or_else(|| self.transform_to_x(x)),
            PairKind::Table => self.psi.interpolate(x).unwrap_or_else(|| self.transform_to_x(x)),
        }
    }

    fn raw_psi_tilde_at(&self, y: f64) -> f64 {
        if let Some(v) = self.psi_tilde.at_node(y) {
            return v;
        }
        match self.kind {
            PairKind::Atomic => self.transform_to_y(y),
            PairKind::Grid => self.grid_psi_tilde(y).unwrap_or_else(|| self.transform_to_y(y)),
            PairKind::Table => self
                .psi_tilde
                .interpolate(y)
                .unwrap_or_else(|| self.transform_to_y(y)),
        }
    }

    /// Exact ψ between map nodes: ψ(a) + ρ∫_a^x sgn(z)|z|^{ρ−1}, z = T − id affine.
    fn grid_psi(&self, x: f64) -> Option<f64> {
        let map = self.map.as_ref()?;
        let xs = map.nodes();
        if x < xs[0] || x > xs[xs.len() - 1] {
            return None;
        }
        let k = xs.partition_point(|&p| p <= x).saturating_sub(1).min(xs.len() - 2);
        let (a, b) = (xs[k], xs[k + 1]);
        let (ta, tb) = (map.values()[k], map.values()[k + 1]);
        let tx = ta + (x - a) / (b - a) * (tb - ta);
        let z0 = ta - a;
        let z1 = tx - x;
        Some(self.psi.values()[k] + (x - a) * self.rho * mean_signed_pow(z0, z1, self.rho - 1.0))
    }

    fn grid_psi_tilde(&self, y: f64) -> Option<f64> {
        let map = self.map.as_ref()?;
        let ts = map.values();
        if y < ts[0] || y > ts[ts.len() - 1] {
            return None;
        }
        let k = ts.partition_point(|&p| p <= y).saturating_sub(1).min(ts.len() - 2);
        let (ta, tb) = (ts[k], ts[k + 1]);
        let (a, b) = (map.nodes()[k], map.nodes()[k + 1]);
        let s = if tb > ta { a + (y - ta) / (tb - ta) * (b - a) } else { a };
        Some(-self.grid_psi(s)? - cost(s, y, self.rho))
    }

    /// Largest excess of −ψ(x) − ψ̃(y) over |x − y|^ρ on tabulated pairs.
    pub fn max_excess(&self) -> (f64, f64, f64) {
        let mut worst = (f64::NEG_INFINITY, 0.0, 0.0);
        for (&x, &px) in self.psi.nodes().iter().zip(self.psi.values()) {
            for (&y, &py) in self.psi_tilde.nodes().iter().zip(self.psi_tilde.values()) {
                let e = -px - py - cost(x, y, self.rho);
                if e > worst.0 {
                    worst = (e, x, y);
                }
            }
        }
        worst
    }

    fn feasibility_tol(&self) -> f64 {
        let scale = self
            .psi
            .values()
            .iter()
            .chain(self.psi_tilde.values())
            .fold(1.0f64, |a, v| a.max(v.abs()));
        FEAS_TOL * scale
    }

    pub fn is_feasible(&self) -> bool {
        self.max_excess().0 <= self.feasibility_tol()
    }

    /// −∫ψ dm1 − ∫ψ̃ dm2.
    pub fn dual_value(&self, m1: &Measure, m2: &Measure) -> f64 {
        let a = match m1 {
            Measure::Atomic(d) => d.expect(|x| self.raw_psi_at(x)),
            Measure::Grid(g) => g.expect(self.psi.nodes(), |x| self.raw_psi_at(x)),
        };
        let b = match m2 {
            Measure::Atomic(d) => d.expect(|y| self.raw_psi_tilde_at(y)),
            Measure::Grid(g) => g.expect(self.psi_tilde.nodes(), |y| self.raw_psi_tilde_at(y)),
        };
        -a - b
    }

    pub fn psi_csv(&self) -> String {
        table_csv("x,psi", &self.psi())
    }

    pub fn psi_tilde_csv(&self) -> String {
        table_csv("y,psi_tilde", &self.psi_tilde())
    }

    pub fn map_csv(&self) -> Option<String> {
        self.map.as_ref().map(|m| table_csv("x,T", m))
    }
}

fn table_csv(header: &str, t: &Tabulated) -> String {
    let mut s = String::from(header);
    s.push('\n');
    for (x, v) in t.nodes().iter().zip(t.values()) {
        s.push_str(&format!("{x},{v}\n"));
    }
    s
}

/// Kantorovich potentials for ρ > 1.
///
/// Atomic inputs: staircase propagation of −ψ(x) − ψ̃(y) = |x − y|^ρ along
/// the monotone coupling, then ψ̃ is closed by the ρ-transform.
/// Grid inputs: ψ(x) = ρ∫|T − x'|^{ρ−2}(T − x')dx' integrated in closed form
/// on each segment where T is affine, and ψ̃ = −ψ∘T⁻¹ − |T⁻¹ − id|^ρ.
pub fn potentials(m1: &Measure, m2: &Measure, rho: f64) -> Result<PotentialPair> {
    if !(rho > 1.0 && rho.is_finite()) {
        return Err(Error::DegeneratePotential(format!(
            "potentials need ρ > 1 (got {rho}); ρ = 1 potentials are not unique"
        )));
    }
    let pair = match (m1, m2) {
        (Measure::Atomic(a), Measure::Atomic(b)) => atomic_potentials(a, b, rho),
        (Measure::Grid(a), Measure::Grid(b)) => grid_potentials(a, b, rho)?,
        _ => {
            return Err(Error::Representation(
                "potentials need both measures in the same representation".into(),
            ))
        }
    };
    let (excess, x, y) = pair.max_excess();
    if excess > pair.feasibility_tol() {
        return Err(Error::Construction { x, y, excess });
    }
    Ok(pair)
}

pub(crate) fn atomic_potentials(m1: &DiscreteMeasure, m2: &DiscreteMeasure, rho: f64) -> PotentialPair {
    let (xs, ys) = (m1.support(), m2.support());
    let c = |i: usize, j: usize| cost(xs[i], ys[j], rho);
    let pairs = monotone_coupling(m1, m2);
    let mut psi = vec![f64::NAN; xs.len()];
    let mut psit = vec![f64::NAN; ys.len()];
    let first = pairs[0];
    psi[first.i] = 0.0;
    psit[first.j] = -c(first.i, first.j);
    for w in pairs.windows(2) {
        let (p, q) = (w[0], w[1]);
        if q.i == p.i {
            psit[q.j] = -c(q.i, q.j) - psi[q.i];
        } else if q.j == p.j {
            psi[q.i] = -c(q.i, q.j) - psit[q.j];
        } else {
            // staircase disconnects: pick the midpoint of the feasible gap
            let lo = c(p.i, p.j) - c(q.i, p.j);
            let hi = c(p.i, q.j) - c(q.i, q.j);
            psi[q.i] = psi[p.i] + 0.5 * (lo + hi);
            psit[q.j] = -c(q.i, q.j) - psi[q.i];
        }
    }
    // atoms lost below the resolution of the cumulative sums carry no
    // coupling mass; give them the ρ-transform of the coupled ψ̃
    for i in 0..xs.len() {
        if psi[i].is_nan() {
            psi[i] = (0..ys.len())
                .filter(|&j| !psit[j].is_nan())
                .map(|j| -c(i, j) - psit[j])
                .fold(f64::NEG_INFINITY, f64::max);
        }
    }
    // ρ-transform closure of ψ̃ over the source support
    let closed: Vec<f64> = (0..ys.len())
        .map(|j| -(0..xs.len()).map(|i| c(i, j) + psi[i]).fold(f64::INFINITY, f64::min))
        .collect();
    let offset = psi[0];
    PotentialPair {
        rho,
        psi: Tabulated::new(xs.to_vec(), psi).expect("support is sorted"),
        psi_tilde: Tabulated::new(ys.to_vec(), closed).expect("support is sorted"),
        map: None,
        kind: PairKind::Atomic,
        offset,
    }
}

fn grid_potentials(g1: &GridMeasure, g2: &GridMeasure, rho: f64) -> Result<PotentialPair> {
    let (xs0, ts0) = map_nodes(g1, g2);
    // split segments where z = T − x changes sign
    let mut xs = Vec::with_capacity(xs0.len());
    let mut ts = Vec::with_capacity(xs0.len());
    for k in 0..xs0.len() {
        if k > 0 {
            let (z0, z1) = (ts0[k - 1] - xs0[k - 1], ts0[k] - xs0[k]);
            if z0 * z1 < 0.0 {
                let s = z0 / (z0 - z1);
                let x = xs0[k - 1] + s * (xs0[k] - xs0[k - 1]);
                if x > xs0[k - 1] && x < xs0[k] {
                    xs.push(x);
                    ts.push(x);
                }
            }
        }
        xs.push(xs0[k]);
        ts.push(ts0[k]);
    }
    let inc = |k: usize| {
        let (z0, z1) = (ts[k - 1] - xs[k - 1], ts[k] - xs[k]);
        (xs[k] - xs[k - 1]) * rho * mean_signed_pow(z0, z1, rho - 1.0)
    };
    // anchored at the median so the bulk does not inherit rounding from far tails
    let anchor = xs.partition_point(|&x| x < g1.quantile_unchecked(0.5)).min(xs.len() - 1);
    let mut psi = vec![0.0; xs.len()];
    for k in anchor + 1..xs.len() {
        psi[k] = psi[k - 1] + inc(k);
    }
    for k in (0..anchor).rev() {
        psi[k] = psi[k + 1] - inc(k + 1);
    }
    // ψ̃ on T(nodes); T is strictly increasing up to rounding
    let mut ys = Vec::with_capacity(xs.len());
    let mut psit = Vec::with_capacity(xs.len());
    for k in 0..xs.len() {
        if ys.last().map_or(true, |&l| ts[k] > l) {
            ys.push(ts[k]);
            psit.push(-psi[k] - cost(xs[k], ts[k], rho));
        }
    }
    let offset = psi[0];
    Ok(PotentialPair {
        rho,
        psi: Tabulated::new(xs.clone(), psi)?,
        psi_tilde: Tabulated::new(ys, psit)?,
        map: Some(Tabulated::new(xs, ts)?),
        kind: PairKind::Grid,
        offset,
    })
}

/// W_ρ^ρ − (−∫ψ dm1 − ∫ψ̃ dm2) for a dual-feasible pair.
pub fn duality_gap(pair: &PotentialPair, m1: &Measure, m2: &Measure, rho: f64) -> Result<f64> {
    let (excess, x, y) = pair.max_excess();
    if excess > pair.feasibility_tol() {
        return Err(Error::Feasibility { x, y, excess });
    }
    Ok(wasserstein_pow(m1, m2, rho)? - pair.dual_value(m1, m2))
}

fn variance_with(m: &Measure, breaks: &[f64], f: impl Fn(f64) -> f64, q: f64) -> f64 {
    match m {
        Measure::Atomic(d) => {
            let mean = d.expect(&f);
            d.expect(|x| (f(x) - mean).abs().powf(q))
        }
        Measure::Grid(g) => {
            let mean = g.expect(breaks, &f);
            g.expect(breaks, |x| (f(x) - mean).abs().powf(q))
        }
    }
}

/// Both sides of max(V^{1+ε}(ψ), V^{1+ε}(ψ̃)) ≤ 2^{ρ(1+ε)}(M_{ρ(1+ε)}(m1) + M_{ρ(1+ε)}(m2)).
pub fn potential_moment_bound(m1: &Measure, m2: &Measure, rho: f64, eps: f64) -> Result<(f64, f64)> {
    if !(eps >= 0.0) {
        return Err(Error::Domain(format!("ε must be ≥ 0, got {eps}")));
    }
    let pair = potentials(m1, m2, rho)?;
    let q = 1.0 + eps;
    let v1 = variance_with(m1, pair.psi.nodes(), |x| pair.raw_psi_at(x), q);
    let v2 = variance_with(m2, pair.psi_tilde.nodes(), |y| pair.raw_psi_tilde_at(y), q);
    let p = rho * q;
    let rhs = 2f64.powf(p) * (m1.moment(p) + m2.moment(p));
    Ok((v1.max(v2), rhs))
}

/// Number of equispaced levels used to validate the φ_y hypothesis.
pub const PHI_VALIDATION_POINTS: usize = 10_000;
/// Slack allowed in the φ_y hypothesis check.
pub const PHI_VALIDATION_TOL: f64 = 1e-10;

fn phi_clamped(phi: &Tabulated, u: f64) -> f64 {
    let n = phi.nodes();
    phi.interpolate(u.clamp(n[0], n[n.len() - 1])).unwrap()
}

/// Pieces of φ on [0, u] with flat extension beyond the table.
fn phi_pieces(phi: &Tabulated, u: f64) -> Vec<(f64, f64, f64, f64)> {
    let mut pts = vec![0.0];
    pts.extend(phi.nodes().iter().copied().filter(|&p| p > 0.0 && p < u));
    pts.push(u);
    pts.windows(2)
        .map(|w| (w[0], w[1], phi_clamped(phi, w[0]), phi_clamped(phi, w[1])))
        .collect()
}

fn phi_integral(phi: &Tabulated, u: f64) -> f64 {
    phi_pieces(phi, u).iter().map(|p| 0.5 * (p.2 + p.3) * (p.1 - p.0)).sum()
}

/// Both sides of ∫|T(x−y)|^q m1(dx) ≤ E|X̃|^q + ‖|X̃|^q‖_{1+1/δ}‖φ_y(U)‖_{1+δ}.
///
/// `delta` may be 0 or `f64::INFINITY`. φ_y is interpolated linearly and
/// extended flat outside its table.
pub fn translated_map_bound(
    m1: &GridMeasure,
    m2: &GridMeasure,
    y: f64,
    q: f64,
    phi_y: &Tabulated,
    delta: f64,
) -> Result<(f64, f64)> {
    if !(y > 0.0 && q > 0.0 && delta >= 0.0) {
        return Err(Error::Domain("need y > 0, q > 0, δ ≥ 0".into()));
    }
    // hypothesis F(F⁻¹(u)+y) − u ≤ ∫₀ᵘ φ_y on an equispaced u grid
    let n = PHI_VALIDATION_POINTS;
    for k in 1..=n {
        let u = k as f64 / (n + 1) as f64;
        let integral = phi_integral(phi_y, u);
        let lhs = m1.cdf(m1.quantile_unchecked(u) + y) - u;
        if lhs > integral + PHI_VALIDATION_TOL {
            return Err(Error::Hypothesis(format!(
                "F(F⁻¹(u)+y) − u = {lhs:e} exceeds ∫φ_y = {integral:e} at u = {u}"
            )));
        }
    }
    let (xs, ts) = map_nodes(m1, m2);
    let t = |x: f64| {
        let s = x - y;
        if s <= xs[0] {
            return ts[0];
        }
        if s >= xs[xs.len() - 1] {
            return ts[ts.len() - 1];
        }
        let k = xs.partition_point(|&p| p <= s) - 1;
        ts[k] + (s - xs[k]) / (xs[k + 1] - xs[k]) * (ts[k + 1] - ts[k])
    };
    let mut breaks: Vec<f64> = xs.iter().map(|x| x + y).collect();
    breaks.push(m1.quantile_unchecked(m2.cdf(0.0)) + y);
    breaks.sort_by(f64::total_cmp);
    let lhs = m1.expect(&breaks, |x| t(x).abs().powf(q));

    let ex = m2.moment(q);
    let g = m2.grid();
    let sup_x = g[0].abs().max(g[g.len() - 1].abs()).powf(q);
    let phi_norm = |p: f64| -> f64 {
        if p.is_infinite() {
            phi_y.values().iter().fold(0.0f64, |a, v| a.max(v.abs()))
        } else {
            phi_pieces(phi_y, 1.0)
                .iter()
                .map(|s| (s.1 - s.0) * mean_abs_pow(s.2, s.3, p))
                .sum::<f64>()
                .powf(1.0 / p)
        }
    };
    let rhs = if delta == 0.0 {
        ex + sup_x * phi_norm(1.0)
    } else if delta.is_infinite() {
        ex + ex * phi_norm(f64::INFINITY)
    } else {
        let p = 1.0 + 1.0 / delta;
        ex + m2.moment(q * p).powf(1.0 / p) * phi_norm(1.0 + delta)
    };
    Ok((lhs, rhs))
}

/// The remark's bound |F̃⁻¹(0⁺)|^q + E|X̃|^q for a target bounded below.
pub fn translated_map_remark_bound(m2: &GridMeasure, q: f64) -> f64 {
    m2.grid()[0].abs().powf(q) + m2.moment(q)
}
