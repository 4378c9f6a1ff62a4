//! μ_N[σ] through the matrix, L, H and K determinants, plus the quantities
//! built on top: polymer Laplace transforms, gap probabilities, the deformed
//! one-point function and the log-derivative identity.

use crate::error::{Error, Result};
use crate::kernels::{KernelContext, KernelOptions};
use crate::linalg::complex_det;
use crate::models::{
    make_symbol, representation_flags, Domain, ModelKind, ModelParams, ModelSymbol, RepresentationFlags,
    ZeroStructure,
};
use crate::quadrature::{build_real_grid, build_real_grid_width, gauss_legendre, RealGrid};
use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::Serialize;

/// Below this |μ| the deformed kernel is not formed.
pub const NEAR_SINGULAR: f64 = 1e-10;

/// Relative level below which kernel mass is dropped when sizing grids.
const GRID_CUTOFF: f64 = 1e-16;

/// The multiplicative statistic σ.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub enum SigmaSpec {
    /// 1/(1+e^{−x−t}).
    Fermi { t: f64 },
    /// Indicator of x > threshold.
    Indicator { threshold: f64 },
    Zero,
    Custom(CustomSigma),
}

/// Tabulated σ, linearly interpolated, with exponential tails: σ decays like
/// e^{left_rate·x} on the left and 1−σ like e^{−right_rate·x} on the right.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CustomSigma {
    pub xs: Vec<f64>,
    pub values: Vec<f64>,
    pub left_rate: f64,
    pub right_rate: f64,
    /// σ is evaluated at x + shift.
    pub shift: f64,
}

impl CustomSigma {
    pub fn new(xs: Vec<f64>, values: Vec<f64>, left_rate: f64, right_rate: f64) -> Result<Self> {
        if xs.len() < 2 || xs.len() != values.len() || !xs.windows(2).all(|w| w[0] < w[1]) {
            return Err(Error::Validation("custom sigma needs ≥ 2 increasing abscissae".into()));
        }
        if !(left_rate > 0.0 && right_rate > 0.0) {
            return Err(Error::Validation("custom sigma decay rates must be positive".into()));
        }
        Ok(CustomSigma { xs, values, left_rate, right_rate, shift: 0.0 })
    }

    fn eval(&self, x: f64) -> f64 {
        let x = x + self.shift;
        let n = self.xs.len();
        if x <= self.xs[0] {
            return self.values[0] * (self.left_rate * (x - self.xs[0])).exp();
        }
        if x >= self.xs[n - 1] {
            return 1.0 - (1.0 - self.values[n - 1]) * (-self.right_rate * (x - self.xs[n - 1])).exp();
        }
        let k = self.xs.partition_point(|&p| p <= x) - 1;
        let f = (x - self.xs[k]) / (self.xs[k + 1] - self.xs[k]);
        self.values[k] + f * (self.values[k + 1] - self.values[k])
    }

    fn derivative(&self, x: f64) -> f64 {
        let x = x + self.shift;
        let n = self.xs.len();
        if x <= self.xs[0] {
            return self.left_rate * self.values[0] * (self.left_rate * (x - self.xs[0])).exp();
        }
        if x >= self.xs[n - 1] {
            return self.right_rate
                * (1.0 - self.values[n - 1])
                * (-self.right_rate * (x - self.xs[n - 1])).exp();
        }
        let k = self.xs.partition_point(|&p| p <= x) - 1;
        (self.values[k + 1] - self.values[k]) / (self.xs[k + 1] - self.xs[k])
    }
}

impl SigmaSpec {
    pub fn fermi(t: f64) -> SigmaSpec {
        SigmaSpec::Fermi { t }
    }

    pub fn indicator(threshold: f64) -> SigmaSpec {
        SigmaSpec::Indicator { threshold }
    }

    pub fn eval(&self, x: f64) -> f64 {
        match self {
            SigmaSpec::Fermi { t } => 1.0 / (1.0 + (-x - t).exp()),
            SigmaSpec::Indicator { threshold } => {
                if x > *threshold {
                    1.0
                } else {
                    0.0
                }
            }
            SigmaSpec::Zero => 0.0,
            SigmaSpec::Custom(c) => c.eval(x),
        }
    }

    /// 1 − σ(x), without cancellation for the Fermi factor.
    pub fn complement(&self, x: f64) -> f64 {
        match self {
            SigmaSpec::Fermi { t } => 1.0 / (1.0 + (x + t).exp()),
            _ => 1.0 - self.eval(x),
        }
    }

    /// σ′(x) where it exists as a function.
    pub fn derivative(&self, x: f64) -> Option<f64> {
        match self {
            SigmaSpec::Fermi { .. } => Some(self.eval(x) * self.complement(x)),
            SigmaSpec::Zero => Some(0.0),
            SigmaSpec::Custom(c) => Some(c.derivative(x)),
            SigmaSpec::Indicator { .. } => None,
        }
    }

    /// The statistic x ↦ σ(x + t).
    pub fn shifted(&self, t: f64) -> SigmaSpec {
        match self {
            SigmaSpec::Fermi { t: t0 } => SigmaSpec::Fermi { t: t0 + t },
            SigmaSpec::Indicator { threshold } => SigmaSpec::Indicator { threshold: threshold - t },
            SigmaSpec::Zero => SigmaSpec::Zero,
            SigmaSpec::Custom(c) => {
                let mut c = c.clone();
                c.shift += t;
                SigmaSpec::Custom(c)
            }
        }
    }

    /// Exponential rate at which σ vanishes as x → −∞; `None` when σ is
    /// identically zero on a left half-line.
    pub fn left_decay_rate(&self) -> Option<f64> {
        match self {
            SigmaSpec::Fermi { .. } => Some(1.0),
            SigmaSpec::Custom(c) => Some(c.left_rate),
            SigmaSpec::Indicator { .. } | SigmaSpec::Zero => None,
        }
    }

    /// Point below which σ is zero exactly.
    pub fn lower_cut(&self) -> Option<f64> {
        match self {
            SigmaSpec::Indicator { threshold } => Some(*threshold),
            _ => None,
        }
    }

    /// Point below which σ < 1e−16.
    pub fn negligible_below(&self) -> f64 {
        match self {
            SigmaSpec::Fermi { t } => -t - 37.0,
            SigmaSpec::Indicator { threshold } => *threshold,
            SigmaSpec::Zero => f64::INFINITY,
            SigmaSpec::Custom(c) => {
                let v0 = c.values[0].max(1e-300);
                c.xs[0] - c.shift - (37.0 + v0.ln()) / c.left_rate
            }
        }
    }
}

/// Discretization controls shared by all determinants.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DetOptions {
    /// Widest Gauss–Legendre panel on the real line.
    pub panel_width: f64,
    pub panel_nodes: usize,
    /// Node multiplier; 2 is used for the automatic refinement.
    pub refine: usize,
    pub tol: f64,
}

impl Default for DetOptions {
    fn default() -> Self {
        DetOptions { panel_width: 1.0, panel_nodes: 12, refine: 1, tol: 1e-13 }
    }
}

impl DetOptions {
    fn refined(&self) -> DetOptions {
        DetOptions { refine: 2 * self.refine, ..*self }
    }

    fn width(&self) -> f64 {
        self.panel_width / self.refine as f64
    }

    pub(crate) fn kernel_options(&self, x_extent: f64) -> KernelOptions {
        KernelOptions { tol: self.tol, x_extent, refine: self.refine, ..KernelOptions::default() }
    }
}

/// A determinant value with the change observed under one refinement.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RepValue {
    pub value: f64,
    pub refinement_error: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FredholmReport {
    pub matrix: Option<RepValue>,
    pub l: Option<RepValue>,
    pub h: Option<RepValue>,
    pub k: Option<RepValue>,
    pub flags: RepresentationFlags,
    /// Largest pairwise relative deviation between computed values.
    pub consensus: f64,
    /// Representations that were applicable but failed numerically.
    pub failures: Vec<(String, String)>,
}

impl FredholmReport {
    pub fn matrix_value(&self) -> Option<f64> {
        self.matrix.map(|v| v.value)
    }
    #[allow(non_snake_case)]
    pub fn L_value(&self) -> Option<f64> {
        self.l.map(|v| v.value)
    }
    #[allow(non_snake_case)]
    pub fn H_value(&self) -> Option<f64> {
        self.h.map(|v| v.value)
    }
    #[allow(non_snake_case)]
    pub fn K_value(&self) -> Option<f64> {
        self.k.map(|v| v.value)
    }

    pub fn values(&self) -> Vec<(&'static str, f64)> {
        let mut out = Vec::new();
        for (name, v) in [("matrix", self.matrix), ("L", self.l), ("H", self.h), ("K", self.k)] {
            if let Some(v) = v {
                out.push((name, v.value));
            }
        }
        out
    }

    /// The value with the smallest refinement error.
    pub fn best(&self) -> f64 {
        [self.l, self.matrix, self.h, self.k]
            .iter()
            .flatten()
            .min_by(|a, b| a.refinement_error.total_cmp(&b.refinement_error))
            .map(|v| v.value)
            .unwrap_or(f64::NAN)
    }
}

fn consensus(vals: &[f64]) -> f64 {
    let mut worst: f64 = 0.0;
    for i in 0..vals.len() {
        for j in i + 1..vals.len() {
            let scale = vals[i].abs().max(vals[j].abs()).max(1e-300);
            worst = worst.max((vals[i] - vals[j]).abs() / scale);
        }
    }
    worst
}

pub(crate) fn domain_lo(sym: &ModelSymbol) -> f64 {
    match sym.domain {
        Domain::PositiveHalfLine => 0.0,
        _ => f64::NEG_INFINITY,
    }
}

/// Finds where `weight(ctx, xs)` exceeds GRID_CUTOFF of its peak, trying a
/// narrow window first. Returns `None` if the weight vanishes.
pub(crate) fn scan_support<F>(sym: &ModelSymbol, opts: &DetOptions, lo_bound: f64, weight: F) -> Result<Option<(f64, f64)>>
where
    F: Fn(&KernelContext, &[f64]) -> Result<Vec<f64>>,
{
    for &ext in &[60.0, 200.0] {
        let lo0 = lo_bound.max(-ext);
        let hi0 = ext;
        if lo0 >= hi0 {
            return Ok(None);
        }
        let n = ((hi0 - lo0) / 0.5).ceil() as usize;
        let xs: Vec<f64> = (0..=n).map(|k| lo0 + (hi0 - lo0) * k as f64 / n as f64).collect();
        let ctx = KernelContext::with_options(sym, KernelOptions { refine: 1, ..opts.kernel_options(ext) })?;
        let f: Vec<f64> = weight(&ctx, &xs)?.into_iter().map(f64::abs).collect();
        let peak = f.iter().copied().fold(0.0, f64::max);
        if !peak.is_finite() {
            return Err(Error::NonFinite("kernel scan overflowed".into()));
        }
        if peak == 0.0 {
            return Ok(None);
        }
        let thr = GRID_CUTOFF * peak;
        let first = f.iter().position(|&v| v > thr).unwrap();
        let last = f.iter().rposition(|&v| v > thr).unwrap();
        let open_left = first == 0 && lo0 > lo_bound;
        let open_right = last == f.len() - 1;
        if !open_left && !open_right {
            return Ok(Some(((xs[first] - 0.5).max(lo_bound), xs[last] + 0.5)));
        }
    }
    Err(Error::Grid("kernel mass does not decay within |x| ≤ 200".into()))
}

pub(crate) fn grid_from(lo: f64, hi: f64, opts: &DetOptions) -> Result<RealGrid> {
    build_real_grid_width(lo, hi, opts.width(), opts.panel_nodes)
}

/// Nyström grid for σL, or `None` if σL is negligible everywhere.
pub fn l_grid(sym: &ModelSymbol, sigma: &SigmaSpec, opts: &DetOptions) -> Result<Option<RealGrid>> {
    let mut lo_bound = domain_lo(sym);
    if let Some(c) = sigma.lower_cut() {
        lo_bound = lo_bound.max(c);
    }
    let support = scan_support(sym, opts, lo_bound, |ctx, xs| {
        let d = ctx.l_diagonal(xs)?;
        Ok(xs.iter().zip(d).map(|(&x, l)| sigma.eval(x) * l).collect())
    })?;
    match support {
        Some((lo, hi)) if lo < hi => Ok(Some(grid_from(lo, hi, opts)?)),
        _ => Ok(None),
    }
}

fn extent(grid: &RealGrid) -> f64 {
    grid.support.0.abs().max(grid.support.1.abs())
}

/// L_N on the grid as plain values.
fn l_values(ctx: &KernelContext, xs: &[f64]) -> Result<DMatrix<f64>> {
    let s = ctx.l_matrix(xs, xs)?;
    Ok(DMatrix::from_fn(xs.len(), xs.len(), |i, j| s.get(i, j)))
}

fn det_l_once(sym: &ModelSymbol, sigma: &SigmaSpec, opts: &DetOptions) -> Result<f64> {
    if matches!(sigma, SigmaSpec::Zero) {
        return Ok(1.0);
    }
    let grid = match l_grid(sym, sigma, opts)? {
        Some(g) => g,
        None => return Ok(1.0),
    };
    let ctx = KernelContext::with_options(sym, opts.kernel_options(extent(&grid)))?;
    let xs = &grid.points;
    let s = ctx.l_matrix(xs, xs)?;
    let n = xs.len();
    let lw: Vec<f64> = (0..n).map(|i| (grid.weights[i] * sigma.eval(xs[i])).max(0.0).sqrt()).collect();
    // symmetric rescaling by exp((row+col)/2) per index leaves det unchanged
    let bal: Vec<f64> = (0..n).map(|i| 0.5 * (s.row_log[i] + s.col_log[i])).collect();
    let m = DMatrix::from_fn(n, n, |i, j| {
        let v = lw[i] * lw[j] * s.values[(i, j)] * (bal[i] + bal[j]).exp();
        if i == j {
            1.0 - v
        } else {
            -v
        }
    });
    let d = m.lu().determinant();
    if !d.is_finite() {
        return Err(Error::NonFinite("det(I − σL) is not finite".into()));
    }
    Ok(d)
}

fn with_refinement<F>(opts: &DetOptions, f: F) -> Result<RepValue>
where
    F: Fn(&DetOptions) -> Result<f64>,
{
    let coarse = f(opts)?;
    let fine = f(&opts.refined())?;
    Ok(RepValue { value: fine, refinement_error: (fine - coarse).abs() })
}

/// det(I − σL_N) on L²(ℝ) by Nyström discretization.
///
/// ```
/// use biortho::fredholm::{det_L, SigmaSpec};
/// use biortho::models::{make_symbol, ModelKind, ModelParams};
/// let sym = make_symbol(ModelKind::GUEext, &ModelParams::gue(&[0.0], 1.0)).unwrap();
/// let v = det_L(&sym, &SigmaSpec::indicator(0.0)).unwrap();
/// assert!((v - 0.5).abs() < 1e-10);
/// ```
#[allow(non_snake_case)]
pub fn det_L(sym: &ModelSymbol, sigma: &SigmaSpec) -> Result<f64> {
    det_l_once(sym, sigma, &DetOptions::default())
}

#[allow(non_snake_case)]
pub fn det_L_with(sym: &ModelSymbol, sigma: &SigmaSpec, opts: &DetOptions) -> Result<RepValue> {
    with_refinement(opts, |o| det_l_once(sym, sigma, o))
}

fn matrix_once(sym: &ModelSymbol, sigma: &SigmaSpec, opts: &DetOptions) -> Result<f64> {
    if matches!(sigma, SigmaSpec::Zero) {
        return Ok(1.0);
    }
    let n = sym.n_particles();
    let confluent = match sym.zero_structure() {
        ZeroStructure::Distinct => None,
        ZeroStructure::Confluent(a) => Some(a),
        ZeroStructure::Partial => {
            return Err(Error::NoRepresentation("matrix form needs distinct or fully confluent zeros".into()))
        }
    };
    let zeros = sym.zeros.clone();
    let lo_bound = domain_lo(sym);
    // the integrands without the (1−σ) factor; the denominator needs them all
    let rows = |ctx: &KernelContext, xs: &[f64]| -> Result<DMatrix<f64>> {
        match confluent {
            None => {
                let psi = ctx.psi_matrix(xs)?;
                Ok(DMatrix::from_fn(n * n, xs.len(), |r, i| {
                    let (m, k) = (r / n, r % n);
                    (zeros[m] * xs[i]).exp() * psi[(k, i)]
                }))
            }
            Some(_) => {
                let phi = ctx.phi_matrix(xs)?;
                Ok(DMatrix::from_fn(n * n, xs.len(), |r, i| {
                    let (m, k) = (r / n, r % n);
                    xs[i].powi(m as i32) * phi[(k, i)]
                }))
            }
        }
    };
    let support = scan_support(sym, opts, lo_bound, |ctx, xs| {
        let r = rows(ctx, xs)?;
        Ok((0..xs.len()).map(|i| r.column(i).amax()).collect())
    })?;
    let (lo, hi) = support.ok_or_else(|| Error::Grid("matrix-form integrands vanish".into()))?;
    let ext = lo.abs().max(hi.abs());
    let ctx = KernelContext::with_options(sym, opts.kernel_options(ext))?;
    // panel breakpoints include the jump of an indicator
    let grids: Vec<RealGrid> = match sigma.lower_cut() {
        Some(c) if c > lo && c < hi => vec![grid_from(lo, c, opts)?, grid_from(c, hi, opts)?],
        _ => vec![grid_from(lo, hi, opts)?],
    };
    let mut num = DMatrix::<f64>::zeros(n, n);
    let mut den = DMatrix::<f64>::zeros(n, n);
    for g in &grids {
        let r = rows(&ctx, &g.points)?;
        for (i, (&x, &w)) in g.points.iter().zip(&g.weights).enumerate() {
            let c = sigma.complement(x);
            for m in 0..n {
                for k in 0..n {
                    let v = w * r[(m * n + k, i)];
                    num[(m, k)] += c * v;
                    den[(m, k)] += v;
                }
            }
        }
    }
    let dn = num.lu().determinant();
    match confluent {
        None => Ok(dn),
        Some(_) => {
            let dd = den.lu().determinant();
            if dd.abs() < 1e-12 {
                return Err(Error::SingularNormalization(format!("moment determinant {dd:e}")));
            }
            Ok(dn / dd)
        }
    }
}

/// μ_N[σ] as the N×N determinant of (1−σ)-weighted biorthogonality integrals.
pub fn det_matrix_form(sym: &ModelSymbol, sigma: &SigmaSpec) -> Result<f64> {
    matrix_once(sym, sigma, &DetOptions::default())
}

pub fn det_matrix_form_with(sym: &ModelSymbol, sigma: &SigmaSpec, opts: &DetOptions) -> Result<RepValue> {
    with_refinement(opts, |o| matrix_once(sym, sigma, o))
}

/// Composite rule with panels of width `h` on `offset + hℤ` and the same
/// Gauss–Legendre nodes in every panel.
struct AlignedGrid {
    /// Panel index of each point, relative to `offset`.
    panel: Vec<i64>,
    node: Vec<usize>,
    grid: RealGrid,
}

fn aligned_grid(lo_panel: i64, hi_panel: i64, offset: f64, h: f64, g: usize) -> Result<AlignedGrid> {
    let grid = build_real_grid(
        offset + lo_panel as f64 * h,
        offset + hi_panel as f64 * h,
        (hi_panel - lo_panel) as usize,
        g,
    )?;
    let mut panel = Vec::with_capacity(grid.len());
    let mut node = Vec::with_capacity(grid.len());
    for p in lo_panel..hi_panel {
        for k in 0..g {
            panel.push(p);
            node.push(k);
        }
    }
    Ok(AlignedGrid { panel, node, grid })
}

fn det_h_once(sym: &ModelSymbol, sigma: &SigmaSpec, opts: &DetOptions) -> Result<f64> {
    if matches!(sigma, SigmaSpec::Zero) {
        return Ok(1.0);
    }
    let scan = KernelContext::with_options(sym, KernelOptions { refine: 1, ..opts.kernel_options(200.0) })?;
    let (z_lo, z_hi) = crate::kernels::psi_product_support(&scan)?;
    let (zs, prod) = crate::kernels::psi_product_scan(&scan)?;
    let h = opts.width();
    let g = opts.panel_nodes;
    let cut = sigma.negligible_below();
    let offset = sigma.lower_cut().unwrap_or(0.0);
    // H(y, y) is bounded by ∫σ(z − y)|Ψ₁Ψ₂(z)|dz
    let diag: Vec<f64> = (0..=800)
        .map(|k| {
            let y = 0.5 * k as f64;
            zs.iter().zip(&prod).map(|(&z, &p)| sigma.eval(z - y) * p).sum()
        })
        .collect();
    let dmax = diag.iter().copied().fold(0.0, f64::max);
    if dmax == 0.0 {
        return Ok(1.0);
    }
    let last = diag.iter().rposition(|&d| d > GRID_CUTOFF * dmax).unwrap();
    if last == diag.len() - 1 {
        return Err(Error::Grid("H^σ(y, y) does not decay for y ≤ 400".into()));
    }
    let y_max = (0.5 * last as f64 + 1.0).max(h);
    let ny = (y_max / h).ceil() as i64;
    let x_lo = (z_lo - ny as f64 * h).max(cut);
    let x_hi = z_hi;
    if x_lo >= x_hi {
        return Ok(1.0);
    }
    let px_lo = ((x_lo - offset) / h).floor() as i64;
    let px_hi = ((x_hi - offset) / h).ceil() as i64;
    let ys = aligned_grid(0, ny, 0.0, h, g)?;
    let xs = aligned_grid(px_lo, px_hi, offset, h, g)?;
    let (gx, _) = gauss_legendre(g);
    let xi: Vec<f64> = gx.iter().map(|v| 0.5 * (v + 1.0)).collect();
    // y_i + x_k = offset + (p_i + q_k + ξ_a + ξ_b) h
    let s_lo = px_lo;
    let s_hi = ny - 1 + px_hi - 1;
    let n_s = (s_hi - s_lo + 1) as usize;
    let ext = (offset + s_lo as f64 * h).abs().max((offset + (s_hi + 2) as f64 * h).abs());
    let ctx = KernelContext::with_options(sym, opts.kernel_options(ext))?;
    let pairs: Vec<(usize, usize)> = (0..g).flat_map(|a| (a..g).map(move |b| (a, b))).collect();
    let seqs: Vec<(Vec<f64>, Vec<f64>)> = pairs
        .par_iter()
        .map(|&(a, b)| ctx.psi_sequences(offset + (s_lo as f64 + xi[a] + xi[b]) * h, h, n_s))
        .collect::<Result<_>>()?;
    let mut p1 = vec![0.0; n_s * g * g];
    let mut p2 = vec![0.0; n_s * g * g];
    for (&(a, b), (q1, q2)) in pairs.iter().zip(&seqs) {
        for s in 0..n_s {
            for idx in [s * g * g + a * g + b, s * g * g + b * g + a] {
                p1[idx] = q1[s];
                p2[idx] = q2[s];
            }
        }
    }
    let index = |i: usize, k: usize| -> usize {
        let s = ys.panel[i] + xs.panel[k] - s_lo;
        s as usize * g * g + ys.node[i] * g + xs.node[k]
    };
    let nyp = ys.grid.len();
    let nxp = xs.grid.len();
    let dx: Vec<f64> = (0..nxp).map(|k| xs.grid.weights[k] * sigma.eval(xs.grid.points[k])).collect();
    let a1 = DMatrix::from_fn(nyp, nxp, |i, k| p1[index(i, k)] * dx[k]);
    let a2 = DMatrix::from_fn(nyp, nxp, |j, k| p2[index(j, k)]);
    let hmat = &a1 * a2.transpose();
    let (_, amax) = sym.zero_range();
    let kappa = amax + 0.1;
    let yv = &ys.grid.points;
    let wy = &ys.grid.weights;
    let m = DMatrix::from_fn(nyp, nyp, |i, j| {
        let v = wy[i].sqrt() * wy[j].sqrt() * hmat[(i, j)] * (-kappa * (yv[i] - yv[j])).exp();
        if i == j {
            1.0 - v
        } else {
            -v
        }
    });
    let d = m.lu().determinant();
    if !d.is_finite() {
        return Err(Error::NonFinite("det(I − H) is not finite".into()));
    }
    Ok(d)
}

/// det(I − H^σ_N) on L²(0, ∞).
#[allow(non_snake_case)]
pub fn det_H(sym: &ModelSymbol, sigma: &SigmaSpec) -> Result<f64> {
    det_h_once(sym, sigma, &DetOptions::default())
}

#[allow(non_snake_case)]
pub fn det_H_with(sym: &ModelSymbol, sigma: &SigmaSpec, opts: &DetOptions) -> Result<RepValue> {
    with_refinement(opts, |o| det_h_once(sym, sigma, o))
}

fn det_k_once(sym: &ModelSymbol, t: f64, opts: &DetOptions) -> Result<f64> {
    let ctx = KernelContext::for_k(sym, t, opts.refine)?;
    let mut k = ctx.k_matrix(t)?;
    for i in 0..k.nrows() {
        k.re[(i, i)] += 1.0;
    }
    let d = complex_det(&k);
    let scale = d.norm().max(1e-300);
    if d.im.abs() > 1e-8 * scale.max(1.0) {
        return Err(Error::ImaginaryResidue(format!("det(I + K) = {d}")));
    }
    if !d.re.is_finite() {
        return Err(Error::NonFinite("det(I + K) is not finite".into()));
    }
    Ok(d.re)
}

/// det(I + K_{N,t}) on L²(Σ_N), for σ the Fermi factor σ_t.
#[allow(non_snake_case)]
pub fn det_K(sym: &ModelSymbol, t: f64) -> Result<f64> {
    det_k_once(sym, t, &DetOptions::default())
}

#[allow(non_snake_case)]
pub fn det_K_with(sym: &ModelSymbol, t: f64, opts: &DetOptions) -> Result<RepValue> {
    with_refinement(opts, |o| det_k_once(sym, t, o))
}

fn record(
    slot: &mut Option<RepValue>,
    failures: &mut Vec<(String, String)>,
    name: &str,
    r: Result<RepValue>,
) -> Option<Error> {
    match r {
        Ok(v) => {
            *slot = Some(v);
            None
        }
        Err(e) => {
            failures.push((name.to_string(), e.to_string()));
            Some(e)
        }
    }
}

fn mu_first_inner(sym: &ModelSymbol, sigma: &SigmaSpec, opts: &DetOptions, force_k: bool) -> Result<(&'static str, RepValue)> {
    if matches!(sigma, SigmaSpec::Zero) {
        return Ok(("L", RepValue { value: 1.0, refinement_error: 0.0 }));
    }
    let flags = representation_flags(sym, sigma);
    let fermi_t = match sigma {
        SigmaSpec::Fermi { t } => Some(*t),
        _ => None,
    };
    let mut first_err = None;
    if let (true, Some(t)) = (flags.k_ok || force_k, fermi_t) {
        match det_K_with(sym, t, opts) {
            Ok(v) => return Ok(("K", v)),
            Err(e) => first_err = first_err.or(Some(e)),
        }
    }
    type Route = fn(&ModelSymbol, &SigmaSpec, &DetOptions) -> Result<RepValue>;
    let routes: [(&'static str, bool, Route); 3] = [
        ("matrix", flags.matrix_ok, det_matrix_form_with),
        ("L", flags.l_ok, det_L_with),
        ("H", flags.h_ok, det_H_with),
    ];
    for (name, ok, f) in routes {
        if ok {
            match f(sym, sigma, opts) {
                Ok(v) => return Ok((name, v)),
                Err(e) => first_err = first_err.or(Some(e)),
            }
        }
    }
    Err(first_err.unwrap_or_else(|| Error::NoRepresentation("no representation applies".into())))
}

/// μ_N[σ] by the cheapest representation that succeeds, trying K, the
/// matrix form, L and H in that order. Returns the name of the route used.
pub fn mu_value_with(sym: &ModelSymbol, sigma: &SigmaSpec, opts: &DetOptions) -> Result<(&'static str, RepValue)> {
    mu_first_inner(sym, sigma, opts, false)
}

/// The polymer Laplace transform by the cheapest representation that
/// succeeds.
pub fn laplace_value_with(kind: ModelKind, params: &ModelParams, t: f64, opts: &DetOptions) -> Result<(&'static str, RepValue)> {
    require_polymer(kind)?;
    if !t.is_finite() {
        return Err(Error::Validation("t must be finite".into()));
    }
    let sym = make_symbol(kind, params)?;
    mu_first_inner(&sym, &SigmaSpec::fermi(t), opts, kind == ModelKind::LogGamma)
}

fn mu_sigma_inner(sym: &ModelSymbol, sigma: &SigmaSpec, opts: &DetOptions, force_k: bool) -> Result<FredholmReport> {
    let flags = representation_flags(sym, sigma);
    if matches!(sigma, SigmaSpec::Zero) {
        let one = Some(RepValue { value: 1.0, refinement_error: 0.0 });
        return Ok(FredholmReport {
            matrix: flags.matrix_ok.then_some(one).flatten(),
            l: flags.l_ok.then_some(one).flatten(),
            h: None,
            k: None,
            flags,
            consensus: 0.0,
            failures: Vec::new(),
        });
    }
    let fermi_t = match sigma {
        SigmaSpec::Fermi { t } => Some(*t),
        _ => None,
    };
    let try_k = flags.k_ok || (force_k && fermi_t.is_some());
    if !(flags.matrix_ok || flags.l_ok || flags.h_ok || try_k) {
        return Err(Error::NoRepresentation("no representation applies".into()));
    }
    let mut rep = FredholmReport {
        matrix: None,
        l: None,
        h: None,
        k: None,
        flags: flags.clone(),
        consensus: 0.0,
        failures: Vec::new(),
    };
    let mut first_err = None;
    if flags.matrix_ok {
        let e = record(&mut rep.matrix, &mut rep.failures, "matrix", det_matrix_form_with(sym, sigma, opts));
        first_err = first_err.or(e);
    }
    if flags.l_ok {
        let e = record(&mut rep.l, &mut rep.failures, "L", det_L_with(sym, sigma, opts));
        first_err = first_err.or(e);
    }
    if flags.h_ok {
        let e = record(&mut rep.h, &mut rep.failures, "H", det_H_with(sym, sigma, opts));
        first_err = first_err.or(e);
    }
    if let (true, Some(t)) = (try_k, fermi_t) {
        let e = record(&mut rep.k, &mut rep.failures, "K", det_K_with(sym, t, opts));
        first_err = first_err.or(e);
    }
    let vals: Vec<f64> = rep.values().iter().map(|p| p.1).collect();
    if vals.is_empty() {
        return Err(first_err.unwrap_or_else(|| Error::NoRepresentation("nothing computed".into())));
    }
    rep.consensus = consensus(&vals);
    Ok(rep)
}

/// Every applicable representation of μ_N[σ], each refined once.
pub fn mu_sigma(sym: &ModelSymbol, sigma: &SigmaSpec) -> Result<FredholmReport> {
    mu_sigma_inner(sym, sigma, &DetOptions::default(), false)
}

pub fn mu_sigma_with(sym: &ModelSymbol, sigma: &SigmaSpec, opts: &DetOptions) -> Result<FredholmReport> {
    mu_sigma_inner(sym, sigma, opts, false)
}

fn require_polymer(kind: ModelKind) -> Result<()> {
    if kind.is_polymer() {
        Ok(())
    } else {
        Err(Error::Validation(format!("{kind} is not a polymer model")))
    }
}

/// E[exp(−e^t Z)] for the Log Gamma, O'Connell–Yor or mixed polymer.
///
/// For the Log Gamma polymer the K determinant is attempted even when the
/// decay condition behind the other representations fails.
///
/// ```
/// use biortho::fredholm::laplace_transform;
/// use biortho::models::{ModelKind, ModelParams};
/// let r = laplace_transform(ModelKind::LogGamma, &ModelParams::log_gamma(&[1.0], &[0.0]), 0.0).unwrap();
/// // 2K₁(2), the value of E[exp(−1/G)] for G ~ Exp(1)
/// assert!((r.best() - 0.279_731_763_633_044_85).abs() < 1e-9);
/// ```
pub fn laplace_transform(kind: ModelKind, params: &ModelParams, t: f64) -> Result<FredholmReport> {
    laplace_transform_with(kind, params, t, &DetOptions::default())
}

pub fn laplace_transform_with(kind: ModelKind, params: &ModelParams, t: f64, opts: &DetOptions) -> Result<FredholmReport> {
    require_polymer(kind)?;
    if !t.is_finite() {
        return Err(Error::Validation("t must be finite".into()));
    }
    let sym = make_symbol(kind, params)?;
    mu_sigma_inner(&sym, &SigmaSpec::fermi(t), opts, kind == ModelKind::LogGamma)
}

/// P(largest point ≤ s), i.e. μ_N[1_{(s,∞)}] for a matrix-model symbol.
///
/// For the exponential-variable kinds `s` is in the exponential variable,
/// so the statistic is the indicator of (log s, ∞) in x.
pub fn gap_probability(kind: ModelKind, params: &ModelParams, s: f64) -> Result<f64> {
    gap_probability_with(kind, params, s, &DetOptions::default()).map(|v| v.value)
}

pub fn gap_probability_with(kind: ModelKind, params: &ModelParams, s: f64, opts: &DetOptions) -> Result<RepValue> {
    if kind.is_polymer() {
        return Err(Error::Validation(format!("{kind} is not a matrix model")));
    }
    if !s.is_finite() {
        return Err(Error::Validation("s must be finite".into()));
    }
    let sym = make_symbol(kind, params)?;
    let threshold = match sym.domain {
        Domain::PositiveHalfLine | Domain::ExponentialVariables if s <= 0.0 => {
            return Ok(RepValue { value: 0.0, refinement_error: 0.0 });
        }
        Domain::ExponentialVariables => s.ln(),
        _ => s,
    };
    let sigma = SigmaSpec::indicator(threshold);
    det_L_with(&sym, &sigma, opts)
}

/// The deformed kernel on a Nyström grid, ready for evaluation at any x.
pub struct DeformedKernel {
    ctx: KernelContext,
    grid: RealGrid,
    /// σ_t(x_j) w_j
    dw: Vec<f64>,
    lu: nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>,
    pub determinant: f64,
    sigma: SigmaSpec,
}

impl DeformedKernel {
    pub fn new(sym: &ModelSymbol, sigma_t: &SigmaSpec) -> Result<DeformedKernel> {
        DeformedKernel::with_options(sym, sigma_t, &DetOptions::default())
    }

    pub fn with_options(sym: &ModelSymbol, sigma_t: &SigmaSpec, opts: &DetOptions) -> Result<DeformedKernel> {
        let grid = match l_grid(sym, sigma_t, opts)? {
            Some(g) => g,
            None => grid_from(-1.0, 1.0, opts)?,
        };
        let ext = extent(&grid).max(40.0);
        let ctx = KernelContext::with_options(sym, opts.kernel_options(ext))?;
        let xs = &grid.points;
        let l = l_values(&ctx, xs)?;
        let dw: Vec<f64> = xs.iter().zip(&grid.weights).map(|(&x, &w)| sigma_t.eval(x) * w).collect();
        let n = xs.len();
        let a = DMatrix::from_fn(n, n, |i, j| if i == j { 1.0 } else { 0.0 } - l[(i, j)] * dw[j]);
        let lu = a.lu();
        let determinant = lu.determinant();
        if determinant.abs() < NEAR_SINGULAR {
            return Err(Error::NearSingular(format!("μ_N[σ_t] ≈ {determinant:e}")));
        }
        Ok(DeformedKernel { ctx, grid, dw, lu, determinant, sigma: sigma_t.clone() })
    }

    /// κ̃_{N,t}(x) = M_t(x, x).
    pub fn kappa_tilde(&self, x: f64) -> Result<f64> {
        let xs = &self.grid.points;
        let col = self.ctx.l_matrix(xs, &[x])?;
        let row = self.ctx.l_matrix(&[x], xs)?;
        let lxx = self.ctx.l_matrix(&[x], &[x])?.get(0, 0);
        let b = DVector::from_fn(xs.len(), |j, _| col.get(j, 0));
        let m = self
            .lu
            .solve(&b)
            .ok_or_else(|| Error::NearSingular("deformed resolvent is singular".into()))?;
        let corr: f64 = (0..xs.len()).map(|j| row.get(0, j) * self.dw[j] * m[j]).sum();
        Ok(lxx + corr)
    }

    /// κ_{N,t}(x) = (1 − σ_t(x)) κ̃_{N,t}(x).
    pub fn kappa(&self, x: f64) -> Result<f64> {
        Ok(self.sigma.complement(x) * self.kappa_tilde(x)?)
    }

    /// κ̃ at all grid nodes at once.
    pub fn kappa_tilde_on_grid(&self) -> Result<(Vec<f64>, Vec<f64>)> {
        let xs = &self.grid.points;
        let l = l_values(&self.ctx, xs)?;
        let m = self
            .lu
            .solve(&l)
            .ok_or_else(|| Error::NearSingular("deformed resolvent is singular".into()))?;
        let n = xs.len();
        let diag: Vec<f64> = (0..n)
            .into_par_iter()
            .map(|i| l[(i, i)] + (0..n).map(|j| l[(i, j)] * self.dw[j] * m[(j, i)]).sum::<f64>())
            .collect();
        Ok((xs.clone(), diag))
    }

    pub fn grid(&self) -> &RealGrid {
        &self.grid
    }
}

/// κ_{N,t}(x) for the deformed measure with weight Π(1 − σ(x_k + t)).
pub fn deformed_one_point(sym: &ModelSymbol, sigma: &SigmaSpec, t: f64, x: f64) -> Result<f64> {
    if matches!(sigma, SigmaSpec::Zero) {
        let ctx = KernelContext::with_options(sym, KernelOptions { x_extent: x.abs().max(20.0), ..Default::default() })?;
        return Ok(ctx.l_diagonal(&[x])?[0]);
    }
    DeformedKernel::new(sym, &sigma.shifted(t))?.kappa(x)
}

/// d/dt log μ_N[σ(· + t)].
///
/// Equals −∫σ′(x+t)κ̃_{N,t}(x)dx; for the Fermi factor this is
/// −∫σ_t(x)κ_{N,t}(x)dx and for the indicator of (s, ∞) it is −κ̃_{N,t}(s−t).
pub fn log_derivative(sym: &ModelSymbol, sigma: &SigmaSpec, t: f64) -> Result<f64> {
    if matches!(sigma, SigmaSpec::Zero) {
        return Ok(0.0);
    }
    let st = sigma.shifted(t);
    let dk = DeformedKernel::new(sym, &st)?;
    match &st {
        SigmaSpec::Indicator { threshold } => Ok(-dk.kappa_tilde(*threshold)?),
        _ => {
            let (xs, kt) = dk.kappa_tilde_on_grid()?;
            let w = &dk.grid.weights;
            Ok(-(0..xs.len()).map(|i| w[i] * st.derivative(xs[i]).unwrap() * kt[i]).sum::<f64>())
        }
    }
}

/// One row of a zero-temperature sweep.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepRow {
    #[serde(rename = "T")]
    pub temperature: f64,
    pub polymer_value: f64,
    pub limit_value: f64,
    pub difference: f64,
}

/// Parameters of the polymer at temperature T and of its matrix-model limit.
pub fn zero_temperature_params(
    kind: ModelKind,
    base: &ModelParams,
    temperature: f64,
) -> Result<(ModelParams, ModelKind, ModelParams)> {
    let tt = temperature;
    match kind {
        ModelKind::LogGamma => {
            let n = base
                .n_columns
                .ok_or_else(|| Error::Validation("LogGamma sweep needs n".into()))?;
            let nn = base.b.len();
            if nn == 0 || n < nn {
                return Err(Error::Validation("LogGamma sweep needs 1 ≤ N = len(b) ≤ n".into()));
            }
            let alpha = vec![tt; n];
            let a: Vec<f64> = base.b.iter().map(|b| tt * b).collect();
            let limit = ModelParams::lue(&base.b, (n - nn) as f64);
            Ok((ModelParams::log_gamma(&alpha, &a), ModelKind::LUEext, limit))
        }
        ModelKind::OY => {
            let tau = base.tau.ok_or_else(|| Error::Validation("OY sweep needs tau".into()))?;
            let a: Vec<f64> = base.a.iter().map(|x| tt * x).collect();
            Ok((ModelParams::oy(&a, tau / (tt * tt)), ModelKind::GUEext, ModelParams::gue(&base.a, tau)))
        }
        ModelKind::Mixed => {
            let tau = base.tau.ok_or_else(|| Error::Validation("Mixed sweep needs tau".into()))?;
            let nn = base.b.len();
            if nn == 0 {
                return Err(Error::Validation("Mixed sweep needs b".into()));
            }
            let alpha: Vec<f64> = base.b.iter().map(|b| tt - tt * b).collect();
            let a = vec![0.0; nn];
            Ok((
                ModelParams::mixed(&alpha, &a, tau / (tt * tt)),
                ModelKind::GLUEext,
                ModelParams::glue(&base.b, tau),
            ))
        }
        other => Err(Error::Validation(format!("{other} is not a polymer model"))),
    }
}

/// Polymer Laplace transforms at temperatures T against the limiting gap
/// probability P(max ≤ −t).
pub fn zero_temperature_sweep(kind: ModelKind, base: &ModelParams, t: f64, temps: &[f64]) -> Result<Vec<SweepRow>> {
    zero_temperature_sweep_with(kind, base, t, temps, &DetOptions::default())
}

pub fn zero_temperature_sweep_with(
    kind: ModelKind,
    base: &ModelParams,
    t: f64,
    temps: &[f64],
    opts: &DetOptions,
) -> Result<Vec<SweepRow>> {
    require_polymer(kind)?;
    if temps.is_empty() {
        return Err(Error::Validation("temperature list is empty".into()));
    }
    if temps.iter().any(|&x| !(x > 0.0 && x.is_finite())) || !temps.windows(2).all(|w| w[0] > w[1]) {
        return Err(Error::Validation("temperatures must be positive and strictly decreasing".into()));
    }
    let (_, lk, lp) = zero_temperature_params(kind, base, temps[0])?;
    let limit = gap_probability_with(lk, &lp, -t, opts)?.value;
    let mut rows = Vec::with_capacity(temps.len());
    for &tt in temps {
        let (pp, _, _) = zero_temperature_params(kind, base, tt)?;
        let v = laplace_value_with(kind, &pp, t / tt, opts)?.1.value;
        rows.push(SweepRow { temperature: tt, polymer_value: v, limit_value: limit, difference: (v - limit).abs() });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::specfun::normal_cdf;

    fn gue(a: &[f64]) -> ModelSymbol {
        make_symbol(ModelKind::GUEext, &ModelParams::gue(a, 1.0)).unwrap()
    }

    #[test]
    fn fermi_complement_is_stable() {
        let s = SigmaSpec::fermi(0.0);
        assert!((s.complement(50.0) - (-50f64).exp()).abs() < 1e-30);
        assert!((s.eval(0.0) - 0.5).abs() < 1e-16);
    }

    #[test]
    fn shifts_move_the_statistic() {
        assert_eq!(SigmaSpec::fermi(1.0).shifted(2.0), SigmaSpec::fermi(3.0));
        assert_eq!(SigmaSpec::indicator(1.0).shifted(2.0), SigmaSpec::indicator(-1.0));
    }

    #[test]
    fn custom_sigma_interpolates() {
        let c = CustomSigma::new(vec![0.0, 1.0], vec![0.2, 0.6], 1.0, 1.0).unwrap();
        let s = SigmaSpec::Custom(c);
        assert!((s.eval(0.5) - 0.4).abs() < 1e-15);
        assert!((s.derivative(0.5).unwrap() - 0.4).abs() < 1e-15);
        assert!((s.eval(-1.0) - 0.2 * (-1f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn zero_sigma_gives_one() {
        let s = gue(&[0.0, 0.5]);
        assert_eq!(det_L(&s, &SigmaSpec::Zero).unwrap(), 1.0);
        assert_eq!(det_matrix_form(&s, &SigmaSpec::Zero).unwrap(), 1.0);
    }

    #[test]
    fn gue_one_particle_matrix_form() {
        let s = gue(&[0.0]);
        for t in [-1.0, 0.0, 0.7] {
            let v = det_matrix_form(&s, &SigmaSpec::indicator(-t)).unwrap();
            assert!((v - normal_cdf(-t)).abs() < 1e-10, "t={t}: {v}");
        }
    }

    #[test]
    fn consensus_is_max_relative_gap() {
        assert!((consensus(&[1.0, 1.1, 1.05]) - 0.1 / 1.1).abs() < 1e-15);
        assert_eq!(consensus(&[0.3]), 0.0);
    }

    #[test]
    fn sweep_rejects_bad_temperatures() {
        let p = ModelParams::oy(&[0.0], 1.0);
        assert!(zero_temperature_sweep(ModelKind::OY, &p, -1.0, &[]).unwrap_err().is_validation());
        assert!(zero_temperature_sweep(ModelKind::OY, &p, -1.0, &[0.1, 0.2]).unwrap_err().is_validation());
    }
}
