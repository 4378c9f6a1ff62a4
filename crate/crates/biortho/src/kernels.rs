//! Kernel evaluation: L_N, ψ_m, φ_m, Ψ₁, Ψ₂, H^σ, K_{N,t}, the
//! exponential-variable kernel, the mixed-polymer Φ_k/Ψ_k and a restricted
//! Meijer G evaluator.

use crate::error::{Error, Result};
use crate::fredholm::SigmaSpec;
use crate::linalg::CMat;
use crate::models::{ModelKind, ModelSymbol, VContour, ZeroStructure};
use crate::quadrature::{
    build_circle, build_line_generic, build_loop, build_vertical_line_with, circle_node_count,
    Contour, LineFactor, RealGrid,
};
use crate::specfun::{log_gamma, ComplexValue};
use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use std::f64::consts::{E, PI};

/// Relative size of an imaginary part that is still accepted as round-off
/// for a nominally real quantity.
pub const IMAG_TOL: f64 = 1e-8;

const COLLISION_TOL: f64 = 1e-8;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KernelOptions {
    pub tol: f64,
    /// Minimum Gauss–Legendre nodes per unit length on lines.
    pub nodes_per_unit: f64,
    /// Largest |x| at which kernels will be evaluated; sets the resolution
    /// needed for oscillatory factors.
    pub x_extent: f64,
    /// Node multiplier used for refinement checks.
    pub refine: usize,
    pub line_factor: LineFactor,
    pub sigma_radius: Option<f64>,
    pub line_abscissa: Option<f64>,
}

impl Default for KernelOptions {
    fn default() -> Self {
        KernelOptions {
            tol: 1e-13,
            nodes_per_unit: 24.0,
            x_extent: 20.0,
            refine: 1,
            line_factor: LineFactor::RESOLVENT,
            sigma_radius: None,
            line_abscissa: None,
        }
    }
}

/// W_N together with discretized Σ_N and ℓ_N.
#[derive(Clone, Debug)]
pub struct KernelContext {
    pub sym: ModelSymbol,
    pub sigma_contour: Contour,
    /// Right line (or the closed v-loop for LUE-type symbols).
    pub line_contour: Contour,
    /// Optional line left of Σ_N, used for negative arguments.
    pub left_contour: Option<Contour>,
    pub tolerance: f64,
    pub options: KernelOptions,
    sigma_logw: Vec<ComplexValue>,
    line_logw: Vec<ComplexValue>,
    left_logw: Vec<ComplexValue>,
}

/// A real matrix stored as values times exp(row_log[i] + col_log[j]).
#[derive(Clone, Debug)]
pub struct ScaledMatrix {
    pub values: DMatrix<f64>,
    pub row_log: Vec<f64>,
    pub col_log: Vec<f64>,
}

impl ScaledMatrix {
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[(i, j)] * (self.row_log[i] + self.col_log[j]).exp()
    }
}

fn two_pi_i() -> Complex64 {
    Complex64::new(0.0, 2.0 * PI)
}

/// Poles of 1/W just left of Σ_N, other than the enclosed zeros.
fn left_barrier(sym: &ModelSymbol) -> f64 {
    if sym.kind.is_polymer() {
        sym.zero_range().1 - 1.0
    } else {
        f64::NEG_INFINITY
    }
}

fn log_symbols(sym: &ModelSymbol, c: &Contour) -> Result<Vec<ComplexValue>> {
    c.nodes.iter().map(|&z| sym.log_symbol(z)).collect()
}

fn check_collision(a: &Contour, b: &Contour) -> Result<()> {
    for &u in &a.nodes {
        for &v in &b.nodes {
            if (u - v).norm() < COLLISION_TOL {
                return Err(Error::ContourCollision(format!("nodes {u} and {v} coincide")));
            }
        }
    }
    Ok(())
}

/// Real part of z after checking the imaginary part against `scale`.
fn real_part(z: Complex64, scale: f64, what: &str) -> Result<f64> {
    if z.im.abs() > IMAG_TOL * z.re.abs().max(scale) {
        return Err(Error::ImaginaryResidue(format!("{what}: imaginary part {} vs real part {}", z.im, z.re)));
    }
    Ok(z.re)
}

/// Numerically stable π / sin(π w).
fn pi_csc(w: Complex64) -> Complex64 {
    let iz = Complex64::i() * PI * w;
    if w.im >= 0.0 {
        let e = iz.exp();
        2.0 * PI * Complex64::i() * e / (e * e - 1.0)
    } else {
        let e = (-iz).exp();
        2.0 * PI * Complex64::i() * e / (1.0 - e * e)
    }
}

impl KernelContext {
    /// Context with default options.
    pub fn new(sym: &ModelSymbol) -> Result<KernelContext> {
        KernelContext::with_options(sym, KernelOptions::default())
    }

    pub fn with_options(sym: &ModelSymbol, opts: KernelOptions) -> Result<KernelContext> {
        let (amin, amax) = sym.zero_range();
        let m = sym.sigma_center;
        let s = 0.5 * (amax - amin);
        let r = opts.sigma_radius.unwrap_or(sym.sigma_radius);
        if r <= s {
            return Err(Error::ContourCollision(format!("Σ radius {r} does not enclose the zeros")));
        }
        let refine = opts.refine.max(1);
        let npu = opts.nodes_per_unit.max(0.6 * opts.x_extent + 12.0) * refine as f64;
        let mut d_out = m - left_barrier(sym);
        let (line, left) = match sym.v_contour {
            VContour::Line { right, left } => {
                let c = opts.line_abscissa.unwrap_or(right);
                if c <= m + r {
                    return Err(Error::ContourCollision(format!("line Re v = {c} meets Σ")));
                }
                d_out = d_out.min(c - m);
                let line = build_vertical_line_with(sym, c, opts.tol, npu, opts.line_factor)?;
                let left = match left {
                    Some(cl) if cl < m - r => {
                        match build_vertical_line_with(sym, cl, opts.tol, npu, opts.line_factor) {
                            Ok(l) => {
                                d_out = d_out.min(m - cl);
                                Some(l)
                            }
                            Err(_) => None,
                        }
                    }
                    _ => None,
                };
                (line, left)
            }
            VContour::Loop { center, radius } => {
                let gap = center - radius - m;
                if gap <= r {
                    return Err(Error::ContourCollision("v-loop meets Σ".into()));
                }
                d_out = d_out.min(gap);
                let n = circle_node_count((center - m - r) / radius, E * radius * opts.x_extent) * refine;
                (build_loop(Complex64::new(center, 0.0), radius, n, -1.0)?, None)
            }
        };
        let rho_in = if s > 0.0 { r / s } else { f64::INFINITY };
        let rho = rho_in.min(d_out / r);
        let n_sigma = circle_node_count(rho, E * r * opts.x_extent) * refine;
        let sigma_contour = build_circle(Complex64::new(m, 0.0), r, n_sigma, 1.0)?;
        check_collision(&sigma_contour, &line)?;
        if let Some(l) = &left {
            check_collision(&sigma_contour, l)?;
        }
        let sigma_logw = log_symbols(sym, &sigma_contour)?;
        let line_logw = log_symbols(sym, &line)?;
        let left_logw = match &left {
            Some(l) => log_symbols(sym, l)?,
            None => Vec::new(),
        };
        Ok(KernelContext {
            sym: sym.clone(),
            sigma_contour,
            line_contour: line,
            left_contour: left,
            tolerance: opts.tol,
            options: opts,
            sigma_logw,
            line_logw,
            left_logw,
        })
    }

    /// Context whose contours satisfy 0 < Re(v−u) < 1, with the line
    /// resolved for the factor π/sin π(u−v) and the oscillation e^{t(v−u)}.
    pub fn for_k(sym: &ModelSymbol, t: f64, refine: usize) -> Result<KernelContext> {
        let c = sym
            .line_abscissa()
            .ok_or_else(|| Error::Validation("K kernel needs a vertical v-line".into()))?;
        let (amin, amax) = sym.zero_range();
        let m = sym.sigma_center;
        let s = 0.5 * (amax - amin);
        let d = (c - m).min(1.0 - (c - m)).min(m - left_barrier(sym));
        if d <= 1.05 * s {
            return Err(Error::Validation(format!(
                "no circle fits with 0 < Re(v−u) < 1 for line Re v = {c}"
            )));
        }
        let r = if s > 0.0 { (s * d).sqrt().max(s + 0.35 * (d - s)) } else { 0.5 * d };
        let r = r.min(sym.sigma_radius.max(r));
        let opts = KernelOptions {
            line_factor: LineFactor::SINE,
            x_extent: t.abs(),
            sigma_radius: Some(r),
            refine,
            ..KernelOptions::default()
        };
        let mut ctx = KernelContext::with_options(sym, opts)?;
        // 1/sin π(u−v) has poles at u = v − 1: keep the trapezoid rule resolved.
        let rho = ((1.0 - (c - m)) / r).min((c - m) / r).min(if s > 0.0 { r / s } else { f64::INFINITY });
        let n = circle_node_count(rho, E * r * t.abs()) * refine.max(1);
        if n > ctx.sigma_contour.len() {
            ctx.sigma_contour = build_circle(Complex64::new(m, 0.0), r, n, 1.0)?;
            ctx.sigma_logw = log_symbols(sym, &ctx.sigma_contour)?;
        }
        Ok(ctx)
    }

    /// Right (or loop) v-contour, or the left line for negative arguments.
    fn v_for(&self, x: f64) -> (&Contour, &[ComplexValue]) {
        match &self.left_contour {
            Some(l) if x < 0.0 => (l, &self.left_logw),
            _ => (&self.line_contour, &self.line_logw),
        }
    }

    fn v_center(c: &Contour) -> f64 {
        let (lo, hi) = c.real_extent();
        0.5 * (lo + hi)
    }

    pub fn n_particles(&self) -> usize {
        self.sym.n_particles()
    }

    /// L̂_N(s_i, s'_j) = L_N(ln s_i, ln s'_j)/s_i for positive s.
    pub fn l_hat_matrix(&self, ss: &[f64], sps: &[f64]) -> Result<DMatrix<f64>> {
        if ss.iter().chain(sps).any(|&s| !(s > 0.0)) {
            return Err(Error::Validation("L̂ needs positive arguments".into()));
        }
        let xs: Vec<f64> = ss.iter().map(|s| s.ln()).collect();
        let xps: Vec<f64> = sps.iter().map(|s| s.ln()).collect();
        let l = self.l_matrix(&xs, &xps)?;
        Ok(DMatrix::from_fn(ss.len(), sps.len(), |i, j| l.get(i, j) / ss[i]))
    }

    /// L_N(x_i, x'_j) for all pairs, in scaled form.
    pub fn l_matrix(&self, xs: &[f64], xps: &[f64]) -> Result<ScaledMatrix> {
        let nu = self.sigma_contour.len();
        let m = self.sym.sigma_center;
        // B_{u,j} = w_u e^{−logW(u) + (u−m)x'_j}
        let b = CMat::from_fn(nu, xps.len(), |k, j| {
            let u = self.sigma_contour.nodes[k];
            self.sigma_contour.weights[k] * (-self.sigma_logw[k] + (u - m) * xps[j]).exp()
        });
        let t = self.e_times_resolvent(xs, &self.sigma_contour.nodes)?;
        let prod = t.values.mul(&b);
        let mag = &t.mag * b.abs();
        let mut values = DMatrix::zeros(xs.len(), xps.len());
        let norm = -1.0 / (4.0 * PI * PI);
        for i in 0..xs.len() {
            for j in 0..xps.len() {
                let z = prod.get(i, j) * norm;
                values[(i, j)] = real_part(z, mag[(i, j)] * -norm, "L_N")?;
            }
        }
        Ok(ScaledMatrix {
            values,
            row_log: t.row_log,
            col_log: xps.iter().map(|&x| m * x).collect(),
        })
    }

    /// Rows Σ_v w_v e^{logW(v) − v x_i}/(v − p_k) for the given poles p_k,
    /// scaled by e^{−c x_i}.
    fn e_times_resolvent(&self, xs: &[f64], poles: &[ComplexValue]) -> Result<ScaledRows> {
        let mut row_log = vec![0.0; xs.len()];
        let mut out = CMat {
            re: DMatrix::zeros(xs.len(), poles.len()),
            im: DMatrix::zeros(xs.len(), poles.len()),
        };
        let mut mag = DMatrix::zeros(xs.len(), poles.len());
        let groups: Vec<Vec<usize>> = if self.left_contour.is_some() {
            vec![
                (0..xs.len()).filter(|&i| xs[i] < 0.0).collect(),
                (0..xs.len()).filter(|&i| xs[i] >= 0.0).collect(),
            ]
        } else {
            vec![(0..xs.len()).collect()]
        };
        for rows in groups {
            if rows.is_empty() {
                continue;
            }
            let (vc, lw) = self.v_for(xs[rows[0]]);
            let c = Self::v_center(vc);
            let e = CMat::from_fn(rows.len(), vc.len(), |i, k| {
                let x = xs[rows[i]];
                let v = vc.nodes[k];
                vc.weights[k] * (lw[k] - v * x + c * x).exp()
            });
            let r = CMat::from_fn(vc.len(), poles.len(), |k, p| 1.0 / (vc.nodes[k] - poles[p]));
            let prod = e.mul(&r);
            let pm = e.abs() * r.abs();
            for (i, &row) in rows.iter().enumerate() {
                row_log[row] = -c * xs[row];
                for p in 0..poles.len() {
                    out.re[(row, p)] = prod.re[(i, p)];
                    out.im[(row, p)] = prod.im[(i, p)];
                    mag[(row, p)] = pm[(i, p)];
                }
            }
        }
        Ok(ScaledRows { values: out, mag, row_log })
    }

    /// L_N(x, x) on a set of points.
    pub fn l_diagonal(&self, xs: &[f64]) -> Result<Vec<f64>> {
        let m = self.sym.sigma_center;
        let t = self.e_times_resolvent(xs, &self.sigma_contour.nodes)?;
        let norm = -1.0 / (4.0 * PI * PI);
        let mut out = Vec::with_capacity(xs.len());
        for (i, &x) in xs.iter().enumerate() {
            let mut acc = Complex64::new(0.0, 0.0);
            let mut mag = 0.0;
            for k in 0..self.sigma_contour.len() {
                let u = self.sigma_contour.nodes[k];
                let b = self.sigma_contour.weights[k] * (-self.sigma_logw[k] + (u - m) * x).exp();
                let term = t.values.get(i, k) * b;
                mag += t.mag[(i, k)] * b.norm();
                acc += term;
            }
            let scale = (t.row_log[i] + m * x).exp();
            let v = real_part(acc * norm, mag / (4.0 * PI * PI), "L_N(x,x)")?;
            out.push(v * scale);
        }
        Ok(out)
    }

    /// ψ_m(e^{x_i}) for m = 1..N (rows) at every x_i (columns).
    pub fn psi_matrix(&self, xs: &[f64]) -> Result<DMatrix<f64>> {
        if self.sym.zero_structure() != ZeroStructure::Distinct {
            return Err(Error::Confluence(format!(
                "zeros {:?} are closer than the confluence threshold",
                self.sym.zeros
            )));
        }
        let n = self.n_particles();
        let poles: Vec<ComplexValue> = self.sym.zeros.iter().map(|&a| Complex64::new(a, 0.0)).collect();
        let t = self.e_times_resolvent(xs, &poles)?;
        let mut out = DMatrix::zeros(n, xs.len());
        for m in 0..n {
            let dw = self.sym.derivative_at_zero(m)?;
            if dw.norm() == 0.0 {
                return Err(Error::Confluence(format!("W′(a_{}) vanishes", m + 1)));
            }
            for i in 0..xs.len() {
                let z = t.values.get(i, m) / (two_pi_i() * dw);
                let v = real_part(z, t.mag[(i, m)] / (2.0 * PI * dw.norm()), "ψ_m")?;
                out[(m, i)] = v * t.row_log[i].exp();
            }
        }
        Ok(out)
    }

    /// φ_m(e^{x_i}) for m = 1..N (rows) in the confluent case.
    pub fn phi_matrix(&self, xs: &[f64]) -> Result<DMatrix<f64>> {
        let a = match self.sym.zero_structure() {
            ZeroStructure::Confluent(a) => a,
            ZeroStructure::Distinct if self.n_particles() == 1 => self.sym.zeros[0],
            _ => {
                return Err(Error::NotConfluent(format!(
                    "zeros {:?} are not all equal",
                    self.sym.zeros
                )))
            }
        };
        let n = self.n_particles();
        let mut out = DMatrix::zeros(n, xs.len());
        for (i, &x) in xs.iter().enumerate() {
            let (vc, lw) = self.v_for(x);
            let c = Self::v_center(vc);
            let mut acc = vec![Complex64::new(0.0, 0.0); n];
            let mut mag = vec![0.0; n];
            for k in 0..vc.len() {
                let v = vc.nodes[k];
                let base = vc.weights[k] * (lw[k] - v * x + c * x).exp();
                let inv = 1.0 / (v - a);
                // power N−m+1 for m = N..1
                let mut p = inv;
                for m in (0..n).rev() {
                    acc[m] += base * p;
                    mag[m] += (base * p).norm();
                    p *= inv;
                }
            }
            let scale = ((a - c) * x).exp();
            for m in 0..n {
                let z = acc[m] / two_pi_i();
                out[(m, i)] = real_part(z, mag[m] / (2.0 * PI), "φ_m")? * scale;
            }
        }
        Ok(out)
    }

    /// Ψ₁(e^{z}) at each z.
    pub fn psi1_values(&self, zs: &[f64]) -> Result<Vec<f64>> {
        let m = self.sym.sigma_center;
        zs.par_iter()
            .map(|&z| {
                let mut acc = Complex64::new(0.0, 0.0);
                let mut mag = 0.0;
                for k in 0..self.sigma_contour.len() {
                    let u = self.sigma_contour.nodes[k];
                    let term = self.sigma_contour.weights[k] * (-self.sigma_logw[k] + (u - m) * z).exp();
                    mag += term.norm();
                    acc += term;
                }
                let v = real_part(acc / two_pi_i(), mag / (2.0 * PI), "Ψ₁")?;
                Ok(v * (m * z).exp())
            })
            .collect()
    }

    fn check_psi2(&self) -> Result<()> {
        if self.sym.decay_exponent <= 1.0 {
            return Err(Error::Decay(format!(
                "Ψ₂ needs decay exponent > 1, have {}",
                self.sym.decay_exponent
            )));
        }
        if matches!(self.sym.v_contour, VContour::Loop { .. }) {
            return Err(Error::Decay("Ψ₂ needs a vertical v-line".into()));
        }
        Ok(())
    }

    /// Ψ₂(e^{z}) at each z; requires W = O(|v|^{−1−ε}).
    pub fn psi2_values(&self, zs: &[f64]) -> Result<Vec<f64>> {
        self.check_psi2()?;
        zs.par_iter()
            .map(|&z| {
                let (vc, lw) = self.v_for(z);
                let c = Self::v_center(vc);
                let mut acc = Complex64::new(0.0, 0.0);
                let mut mag = 0.0;
                for k in 0..vc.len() {
                    let v = vc.nodes[k];
                    let term = vc.weights[k] * (lw[k] - (v - c) * z).exp();
                    mag += term.norm();
                    acc += term;
                }
                let v = real_part(acc / two_pi_i(), mag / (2.0 * PI), "Ψ₂")?;
                Ok(v * (-c * z).exp())
            })
            .collect()
    }

    /// Ψ₁(e^{z}) and Ψ₂(e^{z}) on the arithmetic sequence z_s = z0 + s·h,
    /// s = 0..n, by geometric recurrences in s.
    pub fn psi_sequences(&self, z0: f64, h: f64, n: usize) -> Result<(Vec<f64>, Vec<f64>)> {
        self.check_psi2()?;
        let m = self.sym.sigma_center;
        let sig = &self.sigma_contour;
        let coef: Vec<Complex64> = (0..sig.len()).map(|k| sig.weights[k] * (-self.sigma_logw[k]).exp()).collect();
        let lam: Vec<Complex64> = sig.nodes.iter().map(|&u| u - m).collect();
        let (sums, mags) = geometric_sums(&coef, &lam, z0, h, 0, n);
        let mut p1 = Vec::with_capacity(n);
        for s in 0..n {
            let z = z0 + s as f64 * h;
            p1.push(real_part(sums[s] / two_pi_i(), mags[s] / (2.0 * PI), "Ψ₁")? * (m * z).exp());
        }
        let split = (0..n).find(|&s| z0 + s as f64 * h >= 0.0).unwrap_or(n);
        let mut p2 = Vec::with_capacity(n);
        for (lo, hi) in [(0, split), (split, n)] {
            if lo == hi {
                continue;
            }
            let (vc, lw) = self.v_for(z0 + lo as f64 * h);
            let c = Self::v_center(vc);
            let coef: Vec<Complex64> = (0..vc.len()).map(|k| vc.weights[k] * lw[k].exp()).collect();
            let lam: Vec<Complex64> = vc.nodes.iter().map(|&v| c - v).collect();
            let (sums, mags) = geometric_sums(&coef, &lam, z0, h, lo, hi);
            for s in lo..hi {
                let z = z0 + s as f64 * h;
                let r = real_part(sums[s - lo] / two_pi_i(), mags[s - lo] / (2.0 * PI), "Ψ₂")?;
                p2.push(r * (-c * z).exp());
            }
        }
        Ok((p1, p2))
    }

    /// Matrix K_{pq} = K_{N,t}(u_p, u_q) w_q on the Σ nodes.
    pub fn k_matrix(&self, t: f64) -> Result<CMat> {
        let sig = &self.sigma_contour;
        let line = &self.line_contour;
        for &u in &sig.nodes {
            for &v in &line.nodes {
                let w = u - v;
                if (w - w.re.round()).norm() < COLLISION_TOL {
                    return Err(Error::SinPole(format!("u − v = {w} is an integer")));
                }
            }
        }
        let a = CMat::from_fn(sig.len(), line.len(), |p, k| {
            let u = sig.nodes[p];
            let v = line.nodes[k];
            line.weights[k] * pi_csc(u - v) * (t * (v - u) + self.line_logw[k] - self.sigma_logw[p]).exp()
        });
        let c = CMat::from_fn(line.len(), sig.len(), |k, q| sig.weights[q] / (line.nodes[k] - sig.nodes[q]));
        let mut kmat = a.mul(&c);
        let norm = -1.0 / (4.0 * PI * PI);
        kmat.re *= norm;
        kmat.im *= norm;
        Ok(kmat)
    }
}

/// Σ_k coef_k e^{λ_k z_s} and Σ_k |coef_k e^{λ_k z_s}| for z_s = z0 + s·h,
/// s in lo..hi. Terms are re-seeded exactly every 32 steps.
fn geometric_sums(
    coef: &[Complex64],
    lam: &[Complex64],
    z0: f64,
    h: f64,
    lo: usize,
    hi: usize,
) -> (Vec<Complex64>, Vec<f64>) {
    let n = hi - lo;
    let mut sums = vec![Complex64::new(0.0, 0.0); n];
    let mut mags = vec![0.0; n];
    let step: Vec<Complex64> = lam.iter().map(|l| (l * h).exp()).collect();
    let mut cur = vec![Complex64::new(0.0, 0.0); coef.len()];
    for i in 0..n {
        let s = lo + i;
        if i % 32 == 0 {
            let z = z0 + s as f64 * h;
            for k in 0..coef.len() {
                cur[k] = coef[k] * (lam[k] * z).exp();
            }
        } else {
            for k in 0..coef.len() {
                cur[k] *= step[k];
            }
        }
        let mut acc = Complex64::new(0.0, 0.0);
        let mut mag = 0.0;
        for c in &cur {
            acc += c;
            mag += c.re.abs() + c.im.abs();
        }
        sums[i] = acc;
        mags[i] = mag;
    }
    (sums, mags)
}

struct ScaledRows {
    values: CMat,
    /// Sums of absolute values of the terms behind `values`.
    mag: DMatrix<f64>,
    row_log: Vec<f64>,
}

/// L_N(x, x′) by the double contour integral.
///
/// ```
/// use biortho::kernels::{eval_L, KernelContext};
/// use biortho::models::{make_symbol, ModelKind, ModelParams};
/// let sym = make_symbol(ModelKind::GUEext, &ModelParams::gue(&[0.0], 1.0)).unwrap();
/// let ctx = KernelContext::new(&sym).unwrap();
/// let v = eval_L(&ctx, 0.0, 17.3).unwrap();
/// assert!((v - 0.398_942_280_401_432_7).abs() < 1e-10);
/// ```
#[allow(non_snake_case)]
pub fn eval_L(ctx: &KernelContext, x: f64, xp: f64) -> Result<f64> {
    Ok(ctx.l_matrix(&[x], &[xp])?.get(0, 0))
}

/// L̂_N(s, s′) in exponential variables.
#[allow(non_snake_case)]
pub fn eval_L_hat(ctx: &KernelContext, s: f64, sp: f64) -> Result<f64> {
    if !(s > 0.0 && sp > 0.0) {
        return Err(Error::Validation("L̂ needs positive arguments".into()));
    }
    Ok(eval_L(ctx, s.ln(), sp.ln())? / s)
}

/// ψ_m(y), with m counted from 1.
pub fn eval_psi(ctx: &KernelContext, m: usize, y: f64) -> Result<f64> {
    check_index(ctx, m)?;
    check_positive(y)?;
    Ok(ctx.psi_matrix(&[y.ln()])?[(m - 1, 0)])
}

/// φ_m(y) in the confluent case, with m counted from 1.
pub fn eval_phi(ctx: &KernelContext, m: usize, y: f64) -> Result<f64> {
    check_index(ctx, m)?;
    check_positive(y)?;
    Ok(ctx.phi_matrix(&[y.ln()])?[(m - 1, 0)])
}

#[allow(non_snake_case)]
pub fn eval_Psi1(ctx: &KernelContext, s: f64) -> Result<f64> {
    check_positive(s)?;
    Ok(ctx.psi1_values(&[s.ln()])?[0])
}

#[allow(non_snake_case)]
pub fn eval_Psi2(ctx: &KernelContext, s: f64) -> Result<f64> {
    check_positive(s)?;
    Ok(ctx.psi2_values(&[s.ln()])?[0])
}

fn check_index(ctx: &KernelContext, m: usize) -> Result<()> {
    if m == 0 || m > ctx.n_particles() {
        return Err(Error::Validation(format!("index m={m} outside 1..={}", ctx.n_particles())));
    }
    Ok(())
}

fn check_positive(y: f64) -> Result<()> {
    if !(y > 0.0 && y.is_finite()) {
        return Err(Error::Validation(format!("argument must be positive, got {y}")));
    }
    Ok(())
}

/// Quadrature grid for the x-integral defining H^σ, given the y-range
/// [0, y_max]. Panels have width `h` and breakpoints on `offset + hℤ`.
pub fn h_x_grid(ctx: &KernelContext, sigma: &SigmaSpec, y_max: f64, h: f64, nodes: usize) -> Result<(RealGrid, f64)> {
    let (z_lo, z_hi) = psi_product_support(ctx)?;
    let offset = match sigma {
        SigmaSpec::Indicator { threshold } => *threshold,
        _ => 0.0,
    };
    let mut lo = z_lo - y_max;
    if let SigmaSpec::Fermi { t } = sigma {
        lo = lo.max(-t - 40.0);
    }
    if let Some(cut) = sigma.lower_cut() {
        lo = lo.max(cut);
    }
    let hi = z_hi;
    if lo >= hi {
        return Err(Error::Grid(format!("empty x-range [{lo}, {hi}] for H")));
    }
    let k_lo = ((lo - offset) / h).floor();
    let k_hi = ((hi - offset) / h).ceil();
    let grid = crate::quadrature::build_real_grid(
        offset + k_lo * h,
        offset + k_hi * h,
        (k_hi - k_lo) as usize,
        nodes,
    )?;
    Ok((grid, offset))
}

/// |Ψ₁(e^z)Ψ₂(e^z)| on z ∈ [−200, 200] with step 1/2.
pub fn psi_product_scan(ctx: &KernelContext) -> Result<(Vec<f64>, Vec<f64>)> {
    let zs: Vec<f64> = (0..=800).map(|k| -200.0 + 0.5 * k as f64).collect();
    let p1 = ctx.psi1_values(&zs)?;
    let p2 = ctx.psi2_values(&zs)?;
    let prod = p1.iter().zip(&p2).map(|(a, b)| (a * b).abs()).collect();
    Ok((zs, prod))
}

/// Interval outside which |Ψ₁(e^z)Ψ₂(e^z)| is below 1e−17 of its peak.
pub fn psi_product_support(ctx: &KernelContext) -> Result<(f64, f64)> {
    let (zs, prod) = psi_product_scan(ctx)?;
    let peak = prod.iter().copied().fold(0.0, f64::max);
    if !(peak > 0.0) {
        return Err(Error::Grid("Ψ₁Ψ₂ vanishes on the scan range".into()));
    }
    let first = prod.iter().position(|&p| p > 1e-17 * peak).unwrap();
    let last = prod.iter().rposition(|&p| p > 1e-17 * peak).unwrap();
    if first == 0 || last == zs.len() - 1 {
        return Err(Error::Grid("Ψ₁Ψ₂ does not decay within |z| ≤ 200".into()));
    }
    Ok((zs[first.saturating_sub(1)], zs[(last + 1).min(zs.len() - 1)]))
}

/// H^σ(y, y′) by quadrature over x.
#[allow(non_snake_case)]
pub fn eval_H_sigma(ctx: &KernelContext, sigma: &SigmaSpec, y: f64, yp: f64) -> Result<f64> {
    if matches!(sigma, SigmaSpec::Zero) {
        return Ok(0.0);
    }
    let (grid, _) = h_x_grid(ctx, sigma, y.max(yp).max(1.0), 1.0, 16)?;
    let z1: Vec<f64> = grid.points.iter().map(|x| y + x).collect();
    let z2: Vec<f64> = grid.points.iter().map(|x| yp + x).collect();
    let p1 = ctx.psi1_values(&z1)?;
    let p2 = ctx.psi2_values(&z2)?;
    Ok(grid
        .points
        .iter()
        .zip(&grid.weights)
        .enumerate()
        .map(|(k, (&x, &w))| w * sigma.eval(x) * p1[k] * p2[k])
        .sum())
}

/// K_{N,t}(u, u′) by quadrature over the line.
#[allow(non_snake_case)]
pub fn eval_K(ctx: &KernelContext, t: f64, u: ComplexValue, up: ComplexValue) -> Result<ComplexValue> {
    let lwu = ctx.sym.log_symbol(u)?;
    let line = &ctx.line_contour;
    let mut acc = Complex64::new(0.0, 0.0);
    for k in 0..line.len() {
        let v = line.nodes[k];
        let w = u - v;
        if (w - w.re.round()).norm() < COLLISION_TOL {
            return Err(Error::SinPole(format!("u − v = {w} is an integer")));
        }
        let d = v - up;
        if d.norm() < COLLISION_TOL {
            return Err(Error::ContourCollision(format!("v = u′ = {v}")));
        }
        acc += line.weights[k] * pi_csc(w) * (t * (v - u) + ctx.line_logw[k] - lwu).exp() / d;
    }
    Ok(-acc / (4.0 * PI * PI))
}

fn mixed_checks(ctx: &KernelContext, k: usize) -> Result<()> {
    if ctx.sym.kind != ModelKind::Mixed {
        return Err(Error::Validation("Φ_k/Ψ_k are defined for the mixed polymer only".into()));
    }
    check_index(ctx, k)?;
    let a = &ctx.sym.params.a;
    for i in 0..a.len() {
        for j in 0..a.len() {
            let d = a[i] - a[j];
            if i != j && d != 0.0 && (d - d.round()).abs() < 1e-12 {
                return Err(Error::IntegerGap(format!("a_{} − a_{} = {d} is a nonzero integer", i + 1, j + 1)));
            }
        }
    }
    Ok(())
}

/// Φ_k(x) of the mixed polymer, by the Σ_N contour integral.
#[allow(non_snake_case)]
pub fn eval_mixed_Phi(ctx: &KernelContext, k: usize, x: f64) -> Result<f64> {
    mixed_checks(ctx, k)?;
    let p = &ctx.sym.params;
    let tau = p.tau.unwrap_or(0.0);
    let sig = &ctx.sigma_contour;
    let mut acc = Complex64::new(0.0, 0.0);
    for q in 0..sig.len() {
        let u = sig.nodes[q];
        let mut l = u * x - 0.5 * tau * u * u - (u - p.a[k - 1]).ln();
        for j in 0..k - 1 {
            l += (u - p.alpha[j]).ln() - (u - p.a[j]).ln();
        }
        for j in 0..p.a.len() {
            l += log_gamma(1.0 + u - p.a[j])? - log_gamma(1.0 + p.alpha[j] - u)?;
        }
        acc += sig.weights[q] * l.exp();
    }
    let z = acc / two_pi_i();
    real_part(z, 1e-6 * z.norm(), "Φ_k")
}

/// Ψ_k(x) of the mixed polymer, by the real-line w-integral.
#[allow(non_snake_case)]
pub fn eval_mixed_Psi(ctx: &KernelContext, k: usize, x: f64) -> Result<f64> {
    mixed_checks(ctx, k)?;
    let p = ctx.sym.params.clone();
    let tau = p.tau.unwrap_or(0.0);
    let log_integrand = move |w: f64| -> Result<Complex64> {
        let iw = Complex64::new(0.0, w);
        let mut l = -iw * x - 0.5 * tau * w * w - (p.alpha[k - 1] - iw).ln();
        for j in 0..k - 1 {
            l += (iw - p.a[j]).ln() - (iw - p.alpha[j]).ln();
        }
        for j in 0..p.a.len() {
            l += log_gamma(1.0 + p.alpha[j] - iw)? - log_gamma(1.0 + iw - p.a[j])?;
        }
        Ok(l)
    };
    let pw: f64 = ctx.sym.params.alpha.iter().sum::<f64>() + ctx.sym.params.a.iter().sum::<f64>();
    let modulus = |w: f64| -> Result<f64> { Ok(log_integrand(w)?.re.exp()) };
    let scale = (1.0 / tau.max(1e-12).sqrt()).min(1.0);
    let npu = 24.0_f64.max(0.6 * x.abs() + 12.0);
    let line = build_line_generic(0.0, scale, (pw - 1.0, 0.0, tau), &modulus, ctx.tolerance, npu)?;
    let mut acc = Complex64::new(0.0, 0.0);
    for (z, wt) in line.nodes.iter().zip(&line.weights) {
        // line nodes are i·w with weights i·dw
        acc += (wt / Complex64::i()) * log_integrand(z.im)?.exp();
    }
    let ak = ctx.sym.params.alpha[k - 1] - ctx.sym.params.a[k - 1];
    let z = acc * ak / (2.0 * PI);
    real_part(z, 1e-6 * z.norm(), "Ψ_k")
}

/// G^{n,0}_{0,q}(−; b_1..b_q | z) along the supplied vertical line.
pub fn meijer_g_n0(orders: (usize, usize), b_params: &[f64], z: f64, line: &Contour) -> Result<f64> {
    let (n, q) = orders;
    if b_params.len() != q || n > q || n == 0 {
        return Err(Error::Validation(format!("bad Meijer-G orders ({n},{q}) for {} parameters", b_params.len())));
    }
    check_positive(z)?;
    let lz = z.ln();
    let mut acc = Complex64::new(0.0, 0.0);
    for (v, w) in line.nodes.iter().zip(&line.weights) {
        let mut l = lz * v;
        for &b in &b_params[..n] {
            l += log_gamma(b - v)?;
        }
        for &b in &b_params[n..] {
            l -= log_gamma(1.0 - b + v)?;
        }
        acc += w * l.exp();
    }
    let r = acc / two_pi_i();
    real_part(r, 1e-6 * r.norm(), "Meijer G")
}

/// Vertical line at abscissa `c` suitable for [`meijer_g_n0`].
pub fn meijer_line(orders: (usize, usize), b_params: &[f64], c: f64, tol: f64) -> Result<Contour> {
    let (n, q) = orders;
    let bmin = b_params[..n].iter().copied().fold(f64::INFINITY, f64::min);
    if c >= bmin {
        return Err(Error::Validation(format!("line {c} must lie left of the poles at {bmin}")));
    }
    let rate = 0.5 * PI * (2.0 * n as f64 - q as f64);
    let power: f64 = b_params[..n].iter().map(|b| b - c - 0.5).sum::<f64>()
        - b_params[n..].iter().map(|b| 0.5 - b + c).sum::<f64>();
    let modulus = |y: f64| -> Result<f64> {
        let v = Complex64::new(c, y);
        let mut l = Complex64::new(0.0, 0.0);
        for &b in &b_params[..n] {
            l += log_gamma(b - v)?;
        }
        for &b in &b_params[n..] {
            l -= log_gamma(1.0 - b + v)?;
        }
        Ok(l.re.exp())
    };
    let scale = (bmin - c).min(1.0);
    build_line_generic(c, scale, (power, rate, 0.0), &modulus, tol, 24.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{make_symbol, ModelParams};

    fn gue1() -> KernelContext {
        let s = make_symbol(ModelKind::GUEext, &ModelParams::gue(&[0.0], 1.0)).unwrap();
        KernelContext::new(&s).unwrap()
    }

    #[test]
    fn gue_kernel_is_gaussian() {
        let ctx = gue1();
        for &x in &[-3.0f64, -0.5, 0.0, 1.2, 4.0] {
            let exact = (-0.5 * x * x).exp() / (2.0 * PI).sqrt();
            let v = eval_L(&ctx, x, 17.3).unwrap();
            assert!((v - exact).abs() < 1e-12, "x={x}: {v} vs {exact}");
        }
    }

    #[test]
    fn gue_psi_matches_kernel() {
        let ctx = gue1();
        let v = eval_psi(&ctx, 1, 1.0).unwrap();
        assert!((v - 0.398_942_280_401_432_7).abs() < 1e-12);
    }

    #[test]
    fn lue_loop_kernel() {
        let s = make_symbol(ModelKind::LUEext, &ModelParams::lue(&[0.0], 0.0)).unwrap();
        let ctx = KernelContext::new(&s).unwrap();
        let v = eval_L(&ctx, 1.0, 2.0).unwrap();
        assert!((v - (-1f64).exp()).abs() < 1e-12, "{v}");
    }

    #[test]
    fn psi1_gue_at_one() {
        let ctx = gue1();
        assert!((eval_Psi1(&ctx, 1.0).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn meijer_exponential() {
        let line = meijer_line((1, 1), &[0.0], -0.5, 1e-14).unwrap();
        let v = meijer_g_n0((1, 1), &[0.0], 1.0, &line).unwrap();
        assert!((v - (-1f64).exp()).abs() < 1e-12, "{v}");
        let v = meijer_g_n0((1, 1), &[0.0], 1e-6, &line).unwrap();
        assert!((v - 1.0).abs() < 1e-5);
    }

    #[test]
    fn csc_matches_direct() {
        for w in [Complex64::new(0.3, 0.2), Complex64::new(-0.7, -3.0), Complex64::new(0.5, 0.0)] {
            let direct = PI / (PI * w).sin();
            assert!((pi_csc(w) - direct).norm() < 1e-12 * direct.norm());
        }
    }

    #[test]
    fn mixed_integer_gap_rejected() {
        let s = make_symbol(ModelKind::Mixed, &ModelParams::mixed(&[3.0, 3.0], &[0.0, 1.0], 1.0));
        // zeros one apart: rejected either by the contour validator or by Φ_k
        if let Ok(s) = s {
            let ctx = KernelContext::new(&s).unwrap();
            assert!(matches!(eval_mixed_Phi(&ctx, 1, 0.0), Err(Error::IntegerGap(_))));
        }
    }
}
