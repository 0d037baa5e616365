//! Probability measures on the real line.
//!
//! Two representations: [`DiscreteMeasure`] (finitely many atoms) and
//! [`GridMeasure`] (continuous piecewise-linear CDF on a grid). [`Measure`]
//! wraps either one for operations that accept both.

use crate::error::{Error, Result};
use crate::quad::{gauss8, mean_abs_pow};
use crate::tabulated::Tabulated;

/// Tolerance on the total weight of a [`DiscreteMeasure`].
pub const WEIGHT_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteMeasure {
    support: Vec<f64>,
    weights: Vec<f64>,
    cum: Vec<f64>,
}

impl DiscreteMeasure {
    pub fn new(support: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        if support.len() != weights.len() {
            return Err(Error::InvalidMeasure(format!(
                "support has {} points but {} weights",
                support.len(),
                weights.len()
            )));
        }
        if support.is_empty() {
            return Err(Error::InvalidMeasure("empty support".into()));
        }
        if support.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidMeasure("non-finite support point".into()));
        }
        if support.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidMeasure("support must be strictly increasing".into()));
        }
        if weights.iter().any(|w| !(w.is_finite() && *w > 0.0)) {
            return Err(Error::InvalidMeasure("weights must be positive and finite".into()));
        }
        let mut cum = Vec::with_capacity(weights.len());
        let mut acc = 0.0;
        for w in &weights {
            acc += w;
            cum.push(acc);
        }
        if (acc - 1.0).abs() > WEIGHT_TOL {
            return Err(Error::InvalidMeasure(format!("weights sum to {acc}, not 1")));
        }
        Ok(DiscreteMeasure { support, weights, cum })
    }

    /// Builds a measure from masses on sorted states, dropping zero masses.
    pub fn from_state_masses(states: &[f64], masses: &[f64]) -> Result<Self> {
        if states.len() != masses.len() {
            return Err(Error::InvalidMeasure("states/masses length mismatch".into()));
        }
        if masses.iter().any(|m| *m < 0.0 || !m.is_finite()) {
            return Err(Error::InvalidMeasure("negative or non-finite mass".into()));
        }
        let (s, w): (Vec<f64>, Vec<f64>) = states
            .iter()
            .zip(masses)
            .filter(|(_, m)| **m > 0.0)
            .map(|(x, m)| (*x, *m))
            .unzip();
        DiscreteMeasure::new(s, w)
    }

    /// Empirical measure of a sample (ties merged).
    pub fn empirical(samples: &[f64]) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::InvalidMeasure("empty sample".into()));
        }
        let mut xs = samples.to_vec();
        xs.sort_by(f64::total_cmp);
        let n = xs.len() as f64;
        let mut support = Vec::new();
        let mut counts: Vec<usize> = Vec::new();
        for x in xs {
            if support.last() == Some(&x) {
                *counts.last_mut().unwrap() += 1;
            } else {
                support.push(x);
                counts.push(1);
            }
        }
        let weights = counts.iter().map(|&c| c as f64 / n).collect();
        DiscreteMeasure::new(support, weights)
    }

    pub fn dirac(a: f64) -> Self {
        DiscreteMeasure::new(vec![a], vec![1.0]).expect("finite Dirac")
    }

    pub fn support(&self) -> &[f64] {
        &self.support
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Stored cumulative weights, `cum[i] = F(support[i])`.
    pub fn cumulative(&self) -> &[f64] {
        &self.cum
    }

    pub fn len(&self) -> usize {
        self.support.len()
    }

    pub fn is_empty(&self) -> bool {
        self.support.is_empty()
    }

    pub fn translate(&self, c: f64) -> Self {
        let support = self.support.iter().map(|x| x + c).collect();
        DiscreteMeasure::new(support, self.weights.clone()).expect("translation keeps invariants")
    }

    pub fn cdf(&self, x: f64) -> f64 {
        let k = self.support.partition_point(|&s| s <= x);
        if k == 0 {
            0.0
        } else {
            self.cum[k - 1].min(1.0)
        }
    }

    pub fn quantile(&self, u: f64) -> Result<f64> {
        check_level(u)?;
        let k = self.cum.partition_point(|&c| c <= u);
        Ok(self.support[k.min(self.support.len() - 1)])
    }

    pub fn moment(&self, q: f64) -> f64 {
        self.support
            .iter()
            .zip(&self.weights)
            .map(|(x, w)| w * x.abs().powf(q))
            .sum()
    }

    pub fn mean(&self) -> f64 {
        self.support.iter().zip(&self.weights).map(|(x, w)| w * x).sum()
    }

    pub fn expect(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.support.iter().zip(&self.weights).map(|(&x, w)| w * f(x)).sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridMeasure {
    grid: Vec<f64>,
    cdf: Vec<f64>,
}

impl GridMeasure {
    pub fn new(grid: Vec<f64>, cdf: Vec<f64>) -> Result<Self> {
        if grid.len() != cdf.len() {
            return Err(Error::InvalidMeasure("grid/cdf length mismatch".into()));
        }
        if grid.len() < 2 {
            return Err(Error::InvalidMeasure("grid needs at least two nodes".into()));
        }
        if grid.iter().chain(cdf.iter()).any(|v| !v.is_finite()) {
            return Err(Error::InvalidMeasure("non-finite grid or cdf value".into()));
        }
        if grid.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidMeasure("grid must be strictly increasing".into()));
        }
        if cdf[0] != 0.0 || cdf[cdf.len() - 1] != 1.0 {
            return Err(Error::InvalidMeasure("cdf must start at 0 and end at 1".into()));
        }
        if cdf.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidMeasure("cdf must be strictly increasing".into()));
        }
        Ok(GridMeasure { grid, cdf })
    }

    /// Uniform law on [a,b] with `n` cells.
    pub fn uniform(a: f64, b: f64, n: usize) -> Result<Self> {
        if !(b > a) || n == 0 {
            return Err(Error::InvalidMeasure("uniform needs a<b and n≥1".into()));
        }
        let grid = (0..=n).map(|k| a + (b - a) * k as f64 / n as f64).collect();
        let cdf = (0..=n)
            .map(|k| if k == n { 1.0 } else { k as f64 / n as f64 })
            .collect();
        GridMeasure::new(grid, cdf)
    }

    /// Samples a continuous CDF on `grid` and renormalizes to [0,1].
    ///
    /// Nodes whose CDF does not strictly increase after rounding are dropped.
    pub fn from_cdf_fn(grid: &[f64], f: impl Fn(f64) -> f64) -> Result<Self> {
        if grid.len() < 2 {
            return Err(Error::InvalidMeasure("grid needs at least two nodes".into()));
        }
        let raw: Vec<f64> = grid.iter().map(|&x| f(x)).collect();
        let (f0, f1) = (raw[0], raw[raw.len() - 1]);
        if !(f1 > f0) {
            return Err(Error::InvalidMeasure("cdf is flat on the grid".into()));
        }
        let n = grid.len();
        let mut g = vec![grid[0]];
        let mut c = vec![0.0];
        for k in 1..n - 1 {
            let v = (raw[k] - f0) / (f1 - f0);
            if v > *c.last().unwrap() && v < 1.0 {
                g.push(grid[k]);
                c.push(v);
            }
        }
        g.push(grid[n - 1]);
        c.push(1.0);
        GridMeasure::new(g, c)
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn cdf_values(&self) -> &[f64] {
        &self.cdf
    }

    pub fn step(&self) -> f64 {
        self.grid
            .windows(2)
            .map(|w| w[1] - w[0])
            .fold(0.0, f64::max)
    }

    pub fn translate(&self, c: f64) -> Self {
        let grid = self.grid.iter().map(|x| x + c).collect();
        GridMeasure::new(grid, self.cdf.clone()).expect("translation keeps invariants")
    }

    pub fn cdf(&self, x: f64) -> f64 {
        let n = self.grid.len();
        if x <= self.grid[0] {
            return 0.0;
        }
        if x >= self.grid[n - 1] {
            return 1.0;
        }
        let k = self.grid.partition_point(|&g| g <= x) - 1;
        let s = (x - self.grid[k]) / (self.grid[k + 1] - self.grid[k]);
        self.cdf[k] + s * (self.cdf[k + 1] - self.cdf[k])
    }

    pub fn survival(&self, x: f64) -> f64 {
        1.0 - self.cdf(x)
    }

    pub fn quantile(&self, u: f64) -> Result<f64> {
        check_level(u)?;
        Ok(self.quantile_unchecked(u))
    }

    /// Piecewise-linear inverse; `u=0` gives the left end, `u=1` the right end.
    pub fn quantile_unchecked(&self, u: f64) -> f64 {
        let n = self.cdf.len();
        if u <= 0.0 {
            return self.grid[0];
        }
        if u >= 1.0 {
            return self.grid[n - 1];
        }
        let k = self.cdf.partition_point(|&c| c <= u) - 1;
        let s = (u - self.cdf[k]) / (self.cdf[k + 1] - self.cdf[k]);
        self.grid[k] + s * (self.grid[k + 1] - self.grid[k])
    }

    pub fn moment(&self, q: f64) -> f64 {
        (0..self.grid.len() - 1)
            .map(|k| {
                (self.cdf[k + 1] - self.cdf[k]) * mean_abs_pow(self.grid[k], self.grid[k + 1], q)
            })
            .sum()
    }

    /// ∫ f dm with 8-point Gauss–Legendre per cell, cells split at `breaks`.
    pub fn expect(&self, breaks: &[f64], f: impl Fn(f64) -> f64) -> f64 {
        let mut total = 0.0;
        for k in 0..self.grid.len() - 1 {
            let (a, b) = (self.grid[k], self.grid[k + 1]);
            let dens = (self.cdf[k + 1] - self.cdf[k]) / (b - a);
            let lo = breaks.partition_point(|&p| p <= a);
            let hi = breaks.partition_point(|&p| p < b);
            let mut left = a;
            for &p in &breaks[lo..hi] {
                total += dens * gauss8(left, p, &f);
                left = p;
            }
            total += dens * gauss8(left, b, &f);
        }
        total
    }

    /// Pushforward by a nondecreasing map, evaluated at the grid nodes.
    pub fn pushforward(&self, t: impl Fn(f64) -> f64) -> Result<Self> {
        let grid: Vec<f64> = self.grid.iter().map(|&x| t(x)).collect();
        GridMeasure::new(grid, self.cdf.clone())
    }
}

/// A measure in either representation.
#[derive(Debug, Clone, PartialEq)]
pub enum Measure {
    Atomic(DiscreteMeasure),
    Grid(GridMeasure),
}

impl From<DiscreteMeasure> for Measure {
    fn from(m: DiscreteMeasure) -> Self {
        Measure::Atomic(m)
    }
}

impl From<GridMeasure> for Measure {
    fn from(m: GridMeasure) -> Self {
        Measure::Grid(m)
    }
}

/// Piece of a quantile function: affine from `q0` at `u0` to `q1` at `u1`.
#[derive(Debug, Clone, Copy)]
pub(crate) struct QuantilePiece {
    pub u0: f64,
    pub u1: f64,
    pub q0: f64,
    pub q1: f64,
}

impl QuantilePiece {
    pub fn at(&self, u: f64) -> f64 {
        if self.q0 == self.q1 || self.u1 == self.u0 {
            return self.q0;
        }
        self.q0 + (u - self.u0) / (self.u1 - self.u0) * (self.q1 - self.q0)
    }
}

impl Measure {
    pub fn quantile(&self, u: f64) -> Result<f64> {
        match self {
            Measure::Atomic(m) => m.quantile(u),
            Measure::Grid(m) => m.quantile(u),
        }
    }

    pub fn cdf(&self, x: f64) -> f64 {
        match self {
            Measure::Atomic(m) => m.cdf(x),
            Measure::Grid(m) => m.cdf(x),
        }
    }

    pub fn moment(&self, q: f64) -> f64 {
        match self {
            Measure::Atomic(m) => m.moment(q),
            Measure::Grid(m) => m.moment(q),
        }
    }

    /// Exact quantile function as a list of affine pieces covering [0,1].
    pub(crate) fn quantile_pieces(&self) -> Vec<QuantilePiece> {
        match self {
            Measure::Atomic(m) => {
                let n = m.len();
                let mut out = Vec::with_capacity(n);
                let mut u0 = 0.0;
                for i in 0..n {
                    let u1 = if i == n - 1 { 1.0 } else { m.cum[i].min(1.0) };
                    if u1 > u0 {
                        out.push(QuantilePiece { u0, u1, q0: m.support[i], q1: m.support[i] });
                        u0 = u1;
                    }
                }
                out
            }
            Measure::Grid(m) => (0..m.grid.len() - 1)
                .map(|k| QuantilePiece {
                    u0: m.cdf[k],
                    u1: m.cdf[k + 1],
                    q0: m.grid[k],
                    q1: m.grid[k + 1],
                })
                .collect(),
        }
    }
}

fn check_level(u: f64) -> Result<()> {
    if u > 0.0 && u < 1.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!("quantile level {u} outside (0,1)")))
    }
}

/// V^q_m(φ) = ∫|φ − ∫φ dm|^q dm.
///
/// For atomic measures φ must be tabulated at every atom; for grid measures
/// its table must cover the grid and is interpolated linearly.
pub fn generalized_variance(m: &Measure, phi: &Tabulated, q: f64) -> Result<f64> {
    if !(q >= 1.0) {
        return Err(Error::Domain(format!("generalized variance needs q ≥ 1, got {q}")));
    }
    match m {
        Measure::Atomic(d) => {
            let vals = d
                .support()
                .iter()
                .map(|&x| phi.require(x))
                .collect::<Result<Vec<_>>>()?;
            let mean: f64 = vals.iter().zip(d.weights()).map(|(v, w)| v * w).sum();
            Ok(vals
                .iter()
                .zip(d.weights())
                .map(|(v, w)| w * (v - mean).abs().powf(q))
                .sum())
        }
        Measure::Grid(g) => {
            let (lo, hi) = (g.grid[0], g.grid[g.grid.len() - 1]);
            if phi.interpolate(lo).is_none() || phi.interpolate(hi).is_none() {
                return Err(Error::Domain("φ table does not cover the grid".into()));
            }
            // Breakpoints where both φ and the density are affine/constant.
            let mut pts: Vec<f64> = g.grid.clone();
            pts.extend(phi.nodes().iter().copied().filter(|&x| x > lo && x < hi));
            pts.sort_by(f64::total_cmp);
            pts.dedup();
            let pieces: Vec<(f64, f64, f64, f64)> = pts
                .windows(2)
                .map(|w| {
                    let mass = g.cdf(w[1]) - g.cdf(w[0]);
                    (mass, phi.interpolate(w[0]).unwrap(), phi.interpolate(w[1]).unwrap(), 0.0)
                })
                .collect();
            let mean: f64 = pieces.iter().map(|p| p.0 * 0.5 * (p.1 + p.2)).sum();
            Ok(pieces
                .iter()
                .map(|p| p.0 * mean_abs_pow(p.1 - mean, p.2 - mean, q))
                .sum())
        }
    }
}

/// Uniform grid description for [`laplace_smooth`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub lo: f64,
    pub hi: f64,
    pub cells: usize,
}

impl GridSpec {
    /// Grid covering `support` padded by `pad` on each side.
    pub fn padded(support: &[f64], pad: f64, cells: usize) -> Self {
        let lo = support.iter().copied().fold(f64::INFINITY, f64::min) - pad;
        let hi = support.iter().copied().fold(f64::NEG_INFINITY, f64::max) + pad;
        GridSpec { lo, hi, cells }
    }

    pub fn nodes(&self) -> Vec<f64> {
        let h = (self.hi - self.lo) / self.cells as f64;
        (0..=self.cells)
            .map(|k| if k == self.cells { self.hi } else { self.lo + h * k as f64 })
            .collect()
    }

    pub fn step(&self) -> f64 {
        (self.hi - self.lo) / self.cells as f64
    }
}

/// CDF of the standard Laplace law, density ½e^{−|x|}.
pub fn laplace_cdf(x: f64) -> f64 {
    if x < 0.0 {
        0.5 * x.exp()
    } else {
        1.0 - 0.5 * (-x).exp()
    }
}

/// Law of X + ηZ with X ~ m and Z standard Laplace, on a uniform grid.
pub fn laplace_smooth(m: &DiscreteMeasure, eta: f64, grid: GridSpec) -> Result<GridMeasure> {
    if !(eta > 0.0 && eta.is_finite()) {
        return Err(Error::Domain(format!("smoothing scale must be positive, got {eta}")));
    }
    if grid.cells == 0 || !(grid.hi > grid.lo) {
        return Err(Error::Domain("empty smoothing grid".into()));
    }
    let f = |x: f64| m.expect(|xi| laplace_cdf((x - xi) / eta));
    let mass = f(grid.hi) - f(grid.lo);
    if mass < 1.0 - 1e-9 {
        return Err(Error::Coverage(format!(
            "grid [{}, {}] holds only {mass} of the smoothed mass",
            grid.lo, grid.hi
        )));
    }
    GridMeasure::from_cdf_fn(&grid.nodes(), f)
}

/// Tail constants of the smoothing lemma for scale η.
pub fn laplace_tail_constants(eta: f64) -> TailConstants {
    TailConstants { c: 1.0, big_c: 1.0 / eta }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TailConstants {
    pub c: f64,
    pub big_c: f64,
}

impl TailConstants {
    pub fn new(c: f64, big_c: f64) -> Result<Self> {
        if !(c >= 1.0 && big_c > 0.0) {
            return Err(Error::Domain(format!("tail constants need c≥1, C>0 (got {c}, {big_c})")));
        }
        Ok(TailConstants { c, big_c })
    }

    pub fn bound(&self, y: f64) -> f64 {
        self.c * (self.big_c * y).exp()
    }
}

/// Maximal observed ratios behind a [`TailConstants`] fit.
#[derive(Debug, Clone, PartialEq)]
pub struct TailCertificate {
    pub constants: TailConstants,
    /// (y, sup_x F(x+y)/F(x), sup_x F̄(x−y)/F̄(x)) on the sampled points.
    pub ratios: Vec<(f64, f64, f64)>,
    /// Smallest CDF (or survival) level at which x was sampled.
    pub floor: f64,
    pub sampled_x: usize,
}

/// Probability floor at which tail ratios are sampled.
pub const TAIL_FLOOR: f64 = 1e-9;
const TAIL_FLOOR_SHALLOW: f64 = 1e-5;
const TAIL_GROWTH: f64 = 10.0;

fn tail_ratio_sup(m: &GridMeasure, y: f64, floor: f64) -> (f64, f64, usize) {
    let mut xs: Vec<f64> = m.grid.clone();
    let mut u = floor;
    while u < 0.5 {
        xs.push(m.quantile_unchecked(u));
        xs.push(m.quantile_unchecked(1.0 - u));
        u *= 10.0;
    }
    let mut left: f64 = 1.0;
    let mut right: f64 = 1.0;
    let mut count = 0;
    for &x in &xs {
        let fx = m.cdf(x);
        let sx = 1.0 - fx;
        if fx >= floor {
            left = left.max(m.cdf(x + y) / fx);
            count += 1;
        }
        if sx >= floor {
            right = right.max((1.0 - m.cdf(x - y)) / sx);
        }
    }
    (left, right, count)
}

/// Fits (c, C) with c = 1 and the smallest C such that both ratio bounds hold
/// on the sampled (x, y) points.
///
/// x ranges over the grid nodes and a quantile ladder whose tail level is at
/// least [`TAIL_FLOOR`]. A ratio that keeps growing as the floor is lowered
/// means the CDF reaches zero at a hard edge and is reported as unboundable.
pub fn tail_ratio_constants(m: &GridMeasure, y_grid: &[f64]) -> Result<TailCertificate> {
    if y_grid.is_empty() {
        return Err(Error::Domain("empty y grid".into()));
    }
    if y_grid.iter().any(|&y| !(y > 0.0 && y.is_finite())) {
        return Err(Error::Domain("y grid entries must be positive".into()));
    }
    let mut ratios = Vec::with_capacity(y_grid.len());
    let mut big_c: f64 = 0.0;
    let mut sampled = 0;
    for &y in y_grid {
        let (l, r, n) = tail_ratio_sup(m, y, TAIL_FLOOR);
        let (ls, rs, _) = tail_ratio_sup(m, y, TAIL_FLOOR_SHALLOW);
        if l > TAIL_GROWTH * ls || r > TAIL_GROWTH * rs || !l.is_finite() || !r.is_finite() {
            return Err(Error::Unboundable(format!(
                "ratio at y={y} grows from {:.3e} to {:.3e} as the floor drops from {TAIL_FLOOR_SHALLOW:e} to {TAIL_FLOOR:e}",
                ls.max(rs),
                l.max(r)
            )));
        }
        big_c = big_c.max(l.max(r).ln() / y);
        sampled = sampled.max(n);
        ratios.push((y, l, r));
    }
    let constants = TailConstants { c: 1.0, big_c: big_c.max(f64::MIN_POSITIVE) };
    Ok(TailCertificate { constants, ratios, floor: TAIL_FLOOR, sampled_x: sampled })
}

fn read_pairs(src: &str, header: [&str; 2]) -> Result<Vec<(f64, f64)>> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(src.as_bytes());
    let parse_err = |e: csv::Error| {
        let line = e.position().map_or(1, |p| p.line() as usize);
        Error::Parse { line, msg: e.to_string() }
    };
    let h = rdr.headers().map_err(parse_err)?.clone();
    if h.len() != 2 || h[0] != *header[0] || h[1] != *header[1] {
        return Err(Error::Parse {
            line: 1,
            msg: format!("expected header `{},{}`", header[0], header[1]),
        });
    }
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(parse_err)?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        if rec.len() != 2 {
            return Err(Error::Parse { line, msg: format!("expected 2 fields, found {}", rec.len()) });
        }
        let num = |k: usize| -> Result<f64> {
            let v: f64 = rec[k]
                .parse()
                .map_err(|_| Error::Parse { line, msg: format!("`{}` is not a number", &rec[k]) })?;
            if !v.is_finite() {
                return Err(Error::Parse { line, msg: format!("`{}` is not finite", &rec[k]) });
            }
            Ok(v)
        };
        out.push((num(0)?, num(1)?));
    }
    if out.is_empty() {
        return Err(Error::Parse { line: 1, msg: "no data rows".into() });
    }
    Ok(out)
}

fn anchor_at(line: usize, e: Error) -> Error {
    match e {
        Error::Parse { .. } => e,
        other => Error::Parse { line, msg: other.to_string() },
    }
}

impl DiscreteMeasure {
    /// Parses CSV with header `x,weight`; rows must have increasing x.
    pub fn from_csv(src: &str) -> Result<Self> {
        let rows = read_pairs(src, ["x", "weight"])?;
        let (x, w): (Vec<f64>, Vec<f64>) = rows.into_iter().unzip();
        DiscreteMeasure::new(x, w).map_err(|e| anchor_at(2, e))
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("x,weight\n");
        for (x, w) in self.support.iter().zip(&self.weights) {
            s.push_str(&format!("{x},{w}\n"));
        }
        s
    }
}

impl GridMeasure {
    /// Parses CSV with header `x,cdf`.
    pub fn from_csv(src: &str) -> Result<Self> {
        let rows = read_pairs(src, ["x", "cdf"])?;
        let (x, c): (Vec<f64>, Vec<f64>) = rows.into_iter().unzip();
        GridMeasure::new(x, c).map_err(|e| anchor_at(2, e))
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("x,cdf\n");
        for (x, c) in self.grid.iter().zip(&self.cdf) {
            s.push_str(&format!("{x},{c}\n"));
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_point() -> DiscreteMeasure {
        DiscreteMeasure::new(vec![0.0, 1.0], vec![0.5, 0.5]).unwrap()
    }

    #[test]
    fn csv_round_trip_and_errors() {
        let m = DiscreteMeasure::new(vec![-1.5, 0.25, 3.0], vec![0.25, 0.5, 0.25]).unwrap();
        assert_eq!(DiscreteMeasure::from_csv(&m.to_csv()).unwrap(), m);
        let g = GridMeasure::uniform(0.0, 2.0, 8).unwrap();
        assert_eq!(GridMeasure::from_csv(&g.to_csv()).unwrap(), g);
        let bad = "x,weight\n0,0.5\n1,abc\n";
        assert!(matches!(DiscreteMeasure::from_csv(bad), Err(Error::Parse { line: 3, .. })));
        assert!(matches!(DiscreteMeasure::from_csv("a,b\n0,1\n"), Err(Error::Parse { line: 1, .. })));
        assert!(matches!(DiscreteMeasure::from_csv("x,weight\n0,0.5\n"), Err(Error::Parse { .. })));
        assert!(DiscreteMeasure::from_csv("x,weight\n0,0.5,1\n").is_err());
    }

    #[test]
    fn quantile_convention() {
        assert_eq!(DiscreteMeasure::dirac(0.0).quantile(0.3).unwrap(), 0.0);
        assert_eq!(two_point().quantile(0.5).unwrap(), 1.0);
        assert_eq!(two_point().quantile(0.25).unwrap(), 0.0);
        assert!(two_point().quantile(1.0).is_err());
        assert!(two_point().quantile(0.0).is_err());
    }

    #[test]
    fn moments() {
        assert_eq!(DiscreteMeasure::dirac(2.0).moment(3.0), 8.0);
        let m = DiscreteMeasure::new(vec![0.0, 2.0], vec![0.5, 0.5]).unwrap();
        assert_eq!(m.moment(2.0), 2.0);
        let u = GridMeasure::uniform(0.0, 1.0, 7).unwrap();
        assert!((u.moment(1.0) - 0.5).abs() < 1e-15);
        let v = GridMeasure::uniform(-1.0, 2.0, 3).unwrap();
        // ∫_{-1}^{2} |x|^2 dx / 3 = 1
        assert!((v.moment(2.0) - 1.0).abs() < 1e-14);
    }

    #[test]
    fn generalized_variance_examples() {
        let m: Measure = two_point().into();
        let id = Tabulated::new(vec![0.0, 1.0], vec![0.0, 1.0]).unwrap();
        let c = Tabulated::new(vec![0.0, 1.0], vec![3.0, 3.0]).unwrap();
        assert_eq!(generalized_variance(&m, &c, 2.0).unwrap(), 0.0);
        assert!((generalized_variance(&m, &id, 2.0).unwrap() - 0.25).abs() < 1e-15);
        assert!((generalized_variance(&m, &id, 1.0).unwrap() - 0.5).abs() < 1e-15);
        let missing = Tabulated::new(vec![0.0], vec![0.0]).unwrap();
        assert!(matches!(
            generalized_variance(&m, &missing, 1.0),
            Err(Error::Domain(_))
        ));
        // uniform on [0,1], φ = id, q = 2: variance 1/12
        let u: Measure = GridMeasure::uniform(0.0, 1.0, 4).unwrap().into();
        let v = generalized_variance(&u, &id, 2.0).unwrap();
        assert!((v - 1.0 / 12.0).abs() < 1e-15);
    }

    #[test]
    fn invalid_measures_rejected() {
        assert!(DiscreteMeasure::new(vec![1.0, 0.0], vec![0.5, 0.5]).is_err());
        assert!(DiscreteMeasure::new(vec![0.0, 1.0], vec![0.5, 0.4]).is_err());
        assert!(DiscreteMeasure::new(vec![0.0, 1.0], vec![1.0, 0.0]).is_err());
        assert!(GridMeasure::new(vec![0.0, 1.0, 2.0], vec![0.0, 0.5, 0.5]).is_err());
        assert!(GridMeasure::new(vec![0.0, 1.0], vec![0.1, 1.0]).is_err());
    }

    #[test]
    fn laplace_smooth_of_dirac() {
        let eta = 1.0;
        let spec = GridSpec::padded(&[0.0], 36.0 * eta, 7200);
        let g = laplace_smooth(&DiscreteMeasure::dirac(0.0), eta, spec).unwrap();
        assert!((g.cdf(0.0) - 0.5).abs() < 1e-12);
        // E|ηZ| = η; piecewise-linear CDF adds O(h²)
        assert!((g.moment(1.0) - eta).abs() < 1e-4);
        let narrow = GridSpec::padded(&[0.0], 10.0 * eta, 100);
        assert!(matches!(
            laplace_smooth(&DiscreteMeasure::dirac(0.0), eta, narrow),
            Err(Error::Coverage(_))
        ));
    }

    #[test]
    fn tail_constants_of_smoothed_dirac() {
        let eta = 0.5;
        let spec = GridSpec::padded(&[0.0], 36.0 * eta, 3600);
        let g = laplace_smooth(&DiscreteMeasure::dirac(0.0), eta, spec).unwrap();
        let h = spec.step();
        let ys: Vec<f64> = (1..=40).map(|k| k as f64 * 5.0 * h).collect();
        let cert = tail_ratio_constants(&g, &ys).unwrap();
        assert_eq!(cert.constants.c, 1.0);
        assert!(cert.constants.big_c <= (1.0 / eta) * (1.0 + 1e-6), "{:?}", cert.constants);
        assert!(cert.constants.big_c >= (1.0 / eta) * 0.9);
        let shifted = tail_ratio_constants(&g.translate(3.25), &ys).unwrap();
        assert!((shifted.constants.big_c - cert.constants.big_c).abs() < 1e-6);
    }

    #[test]
    fn uniform_is_unboundable() {
        let u = GridMeasure::uniform(0.0, 1.0, 100).unwrap();
        assert!(matches!(
            tail_ratio_constants(&u, &[0.1, 0.2]),
            Err(Error::Unboundable(_))
        ));
    }
}
