//! Discretized contours and real-line grids.

use crate::error::{Error, Result};
use crate::models::ModelSymbol;
use crate::specfun::ComplexValue;
use num_complex::Complex64;
use std::f64::consts::PI;

/// Hard cap on the half-height of a truncated vertical line.
pub const MAX_HALFHEIGHT: f64 = 400.0;

/// Gauss–Legendre nodes and weights on [−1, 1], by Newton iteration on the
/// three-term recurrence.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let m = n.div_ceil(2);
    let nf = n as f64;
    for i in 0..m {
        let mut z = (PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let mut p0 = 1.0;
            let mut p1 = 0.0;
            for j in 0..n {
                let p2 = p1;
                p1 = p0;
                p0 = ((2 * j + 1) as f64 * z * p1 - j as f64 * p2) / (j + 1) as f64;
            }
            dp = nf * (z * p0 - p1) / (z * z - 1.0);
            let dz = p0 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    (x, w)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Shape {
    Circle { center: ComplexValue, radius: f64, orientation: f64 },
    VerticalLine { abscissa: f64, halfheight: f64 },
    ClosedLoopAroundPoint { center: ComplexValue, radius: f64, orientation: f64 },
}

/// Nodes and weights of a discretized contour. Weights carry dz and the
/// orientation, so Σ wₖ f(zₖ) approximates ∫ f(z) dz.
#[derive(Clone, Debug, PartialEq)]
pub struct Contour {
    pub shape: Shape,
    pub nodes: Vec<ComplexValue>,
    pub weights: Vec<ComplexValue>,
    /// Discarded mass of the line integrand relative to the kept mass. Kernel
    /// values inherit it times the cancellation from 1/W on Σ.
    // TODO: scale the line tolerance by Σ|w_u/W(u)| so tail_bound bounds kernel values directly.
    pub tail_bound: f64,
}

impl Contour {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn integrate<F: Fn(ComplexValue) -> ComplexValue>(&self, f: F) -> ComplexValue {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&z, &w)| w * f(z))
            .fold(Complex64::new(0.0, 0.0), |a, b| a + b)
    }

    pub fn is_closed(&self) -> bool {
        !matches!(self.shape, Shape::VerticalLine { .. })
    }

    /// Real part of the leftmost and rightmost node.
    pub fn real_extent(&self) -> (f64, f64) {
        match self.shape {
            Shape::Circle { center, radius, .. }
            | Shape::ClosedLoopAroundPoint { center, radius, .. } => {
                (center.re - radius, center.re + radius)
            }
            Shape::VerticalLine { abscissa, .. } => (abscissa, abscissa),
        }
    }
}

fn ring(center: ComplexValue, radius: f64, n: usize, orientation: f64) -> (Vec<ComplexValue>, Vec<ComplexValue>) {
    let mut nodes = Vec::with_capacity(n);
    let mut weights = Vec::with_capacity(n);
    let h = 2.0 * PI / n as f64;
    for k in 0..n {
        let e = Complex64::from_polar(1.0, h * k as f64 + 0.5 * h);
        nodes.push(center + radius * e);
        weights.push(orientation * Complex64::i() * radius * e * h);
    }
    (nodes, weights)
}

/// Equispaced trapezoid rule on a circle.
///
/// ```
/// use biortho::quadrature::build_circle;
/// use num_complex::Complex64;
/// let c = build_circle(Complex64::new(0.0, 0.0), 1.0, 16, 1.0).unwrap();
/// let v = c.integrate(|z| 1.0 / z) / (2.0 * std::f64::consts::PI * Complex64::i());
/// assert!((v - 1.0).norm() < 1e-14);
/// ```
pub fn build_circle(center: ComplexValue, radius: f64, n_nodes: usize, orientation: f64) -> Result<Contour> {
    if n_nodes < 8 || n_nodes % 2 != 0 {
        return Err(Error::Validation(format!("circle needs an even node count ≥ 8, got {n_nodes}")));
    }
    if !(radius > 0.0 && radius.is_finite()) {
        return Err(Error::Validation(format!("circle radius must be positive, got {radius}")));
    }
    let o = orientation.signum();
    let (nodes, weights) = ring(center, radius, n_nodes, o);
    Ok(Contour {
        shape: Shape::Circle { center, radius, orientation: o },
        nodes,
        weights,
        tail_bound: 0.0,
    })
}

/// Like [`build_circle`] but tagged as a loop around a distinguished point.
pub fn build_loop(center: ComplexValue, radius: f64, n_nodes: usize, orientation: f64) -> Result<Contour> {
    let mut c = build_circle(center, radius, n_nodes, orientation)?;
    c.shape = Shape::ClosedLoopAroundPoint { center, radius, orientation: orientation.signum() };
    Ok(c)
}

/// Node count for a trapezoid rule on a circle whose integrand is analytic
/// in an annulus with radius ratio `rho`, aiming at about 16 digits, plus
/// `extra` nodes for entire factors of large exponential type.
pub fn circle_node_count(rho: f64, extra: f64) -> usize {
    let base = if rho > 1.0 { 37.0 / rho.ln() } else { f64::INFINITY };
    let n = (base + extra).ceil().clamp(64.0, 1024.0) as usize;
    n.div_ceil(8) * 8
}

/// Extra modulus factor multiplying |W(c+iy)| in a line integrand:
/// (1+|y|)^power e^{−rate|y|}.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LineFactor {
    pub power: f64,
    pub rate: f64,
}

impl LineFactor {
    pub const NONE: LineFactor = LineFactor { power: 0.0, rate: 0.0 };
    /// The 1/(v−u) factor of the kernels.
    pub const RESOLVENT: LineFactor = LineFactor { power: -1.0, rate: 0.0 };
    /// π/sin π(u−v) times 1/(v−u′).
    pub const SINE: LineFactor = LineFactor { power: -1.0, rate: PI };

    fn eval(&self, y: f64) -> f64 {
        (1.0 + y).powf(self.power) * (-self.rate * y).exp()
    }
}

/// Length scale of |W| near the real axis on the line Re z = c: distance
/// to the nearest zero or strip edge, and the Gaussian width.
fn line_scale(sym: &ModelSymbol, c: f64) -> f64 {
    let mut d: f64 = 1.0;
    for &a in &sym.zeros {
        d = d.min((c - a).abs());
    }
    if sym.strip.1.is_finite() {
        d = d.min(sym.strip.1 - c);
    }
    if sym.strip.0.is_finite() {
        d = d.min(c - sym.strip.0);
    }
    if let Some(tau) = sym.tau() {
        let g = sym.line_asymptotics(c).map(|a| a.gauss).unwrap_or(tau);
        if g > 0.0 {
            d = d.min(1.0 / g.sqrt());
        }
    }
    d.max(1e-6)
}

/// Truncated vertical line Re v = c with Gauss–Legendre panels.
///
/// The half-height is grown until the estimated discarded mass of
/// |W(c+iy)|·factor falls below `tol` times the kept mass.
pub fn build_vertical_line(sym: &ModelSymbol, c: f64, tol: f64, n_per_unit: usize) -> Result<Contour> {
    build_vertical_line_with(sym, c, tol, n_per_unit as f64, LineFactor::RESOLVENT)
}

pub fn build_vertical_line_with(
    sym: &ModelSymbol,
    c: f64,
    tol: f64,
    n_per_unit: f64,
    factor: LineFactor,
) -> Result<Contour> {
    if !(c > sym.strip.0 && c < sym.strip.1) {
        return Err(Error::Validation(format!(
            "line abscissa {c} outside the strip ({}, {})",
            sym.strip.0, sym.strip.1
        )));
    }
    let asym = sym.line_asymptotics(c).unwrap();
    let scale = line_scale(sym, c);
    let modulus = |y: f64| -> Result<f64> {
        let lw = sym.log_symbol(Complex64::new(c, y))?;
        Ok(lw.re.exp() * factor.eval(y))
    };
    build_line_generic(
        c,
        scale,
        (asym.power + factor.power, asym.rate + factor.rate, asym.gauss),
        &modulus,
        tol,
        n_per_unit,
    )
}

/// Truncated upward line Re v = c for an integrand whose modulus is
/// `modulus(y)` and behaves like |y|^p e^{−r|y|} e^{−g y²/2} for large |y|.
/// `scale` is the length over which the integrand varies near y = 0.
pub fn build_line_generic(
    c: f64,
    scale: f64,
    (p, r, g): (f64, f64, f64),
    modulus: &dyn Fn(f64) -> Result<f64>,
    tol: f64,
    n_per_unit: f64,
) -> Result<Contour> {
    if (r < 0.0 && g == 0.0) || (r == 0.0 && g == 0.0 && p >= -1.0) {
        return Err(Error::Truncation(format!(
            "integrand on Re v = {c} decays too slowly (|y|^{p:.3})"
        )));
    }
    let step = 0.25 * scale.min(1.0);
    let mut prev = modulus(0.0)?;
    let mut mass = 0.0;
    let mut y = 0.0;
    let y_min = 4.0 * scale + (c.abs() + 1.0).min(4.0);
    let halfheight = loop {
        let y1 = y + step;
        let f1 = modulus(y1)?;
        mass += 0.5 * step * (prev + f1);
        prev = f1;
        y = y1;
        if y >= y_min {
            let denom = r + g * y - p.max(0.0) / y;
            let tail = if denom > 0.0 {
                f1 / denom
            } else if r == 0.0 && g == 0.0 {
                f1 * y / (-p - 1.0)
            } else {
                f64::INFINITY
            };
            if 2.0 * tail <= tol * mass || f1 == 0.0 {
                break y;
            }
        }
        if y > MAX_HALFHEIGHT {
            return Err(Error::Truncation(format!(
                "line Re v = {c} needs a half-height beyond {MAX_HALFHEIGHT}"
            )));
        }
    };
    let tail_rel = {
        let f = modulus(halfheight)?;
        let denom = r + g * halfheight - p.max(0.0) / halfheight;
        let tail = if denom > 0.0 { f / denom } else { f * halfheight / (-p - 1.0).max(1e-300) };
        if mass > 0.0 { 2.0 * tail / mass } else { 0.0 }
    };

    // Panels: graded near y = 0 at the symbol's length scale, then up to unit width.
    let mut edges = vec![0.0];
    let mut w = scale.min(1.0);
    let mut top = 0.0;
    while top < halfheight {
        let next = (top + w).min(halfheight);
        edges.push(next);
        top = next;
        w = (2.0 * w).min(1.0);
    }
    let mut nodes = Vec::new();
    let mut weights = Vec::new();
    let mut cache: Vec<(usize, (Vec<f64>, Vec<f64>))> = Vec::new();
    let mut half_nodes: Vec<(f64, f64)> = Vec::new();
    for pair in edges.windows(2) {
        let (a, b) = (pair[0], pair[1]);
        let width = b - a;
        let npanel = ((n_per_unit * width).ceil() as usize).max(16);
        let idx = match cache.iter().position(|(k, _)| *k == npanel) {
            Some(i) => i,
            None => {
                cache.push((npanel, gauss_legendre(npanel)));
                cache.len() - 1
            }
        };
        let (gx, gw) = &cache[idx].1;
        for (xi, wi) in gx.iter().zip(gw) {
            half_nodes.push((a + 0.5 * width * (xi + 1.0), 0.5 * width * wi));
        }
    }
    for &(y, wy) in half_nodes.iter().rev() {
        nodes.push(Complex64::new(c, -y));
        weights.push(Complex64::new(0.0, wy));
    }
    for &(y, wy) in &half_nodes {
        nodes.push(Complex64::new(c, y));
        weights.push(Complex64::new(0.0, wy));
    }
    Ok(Contour {
        shape: Shape::VerticalLine { abscissa: c, halfheight },
        nodes,
        weights,
        tail_bound: tail_rel,
    })
}

/// Composite Gauss–Legendre grid on a real interval.
#[derive(Clone, Debug, PartialEq)]
pub struct RealGrid {
    pub points: Vec<f64>,
    pub weights: Vec<f64>,
    pub support: (f64, f64),
}

impl RealGrid {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn integrate<F: Fn(f64) -> f64>(&self, f: F) -> f64 {
        self.points.iter().zip(&self.weights).map(|(&x, &w)| w * f(x)).sum()
    }
}

/// Composite Gauss–Legendre rule with equal panels.
///
/// ```
/// use biortho::quadrature::build_real_grid;
/// let g = build_real_grid(0.0, 1.0, 1, 2).unwrap();
/// assert!((g.integrate(|x| x * x) - 1.0 / 3.0).abs() < 1e-15);
/// ```
pub fn build_real_grid(x_lo: f64, x_hi: f64, n_panels: usize, nodes_per_panel: usize) -> Result<RealGrid> {
    if !(x_lo < x_hi) || n_panels == 0 || nodes_per_panel == 0 {
        return Err(Error::Grid(format!(
            "invalid grid [{x_lo}, {x_hi}] with {n_panels} panels of {nodes_per_panel} nodes"
        )));
    }
    let (gx, gw) = gauss_legendre(nodes_per_panel);
    let h = (x_hi - x_lo) / n_panels as f64;
    let mut points = Vec::with_capacity(n_panels * nodes_per_panel);
    let mut weights = Vec::with_capacity(n_panels * nodes_per_panel);
    for p in 0..n_panels {
        let a = x_lo + h * p as f64;
        for (xi, wi) in gx.iter().zip(&gw) {
            points.push(a + 0.5 * h * (xi + 1.0));
            weights.push(0.5 * h * wi);
        }
    }
    Ok(RealGrid { points, weights, support: (x_lo, x_hi) })
}

/// Grid over [x_lo, x_hi] with panels no wider than `max_width`.
pub fn build_real_grid_width(x_lo: f64, x_hi: f64, max_width: f64, nodes_per_panel: usize) -> Result<RealGrid> {
    let n_panels = (((x_hi - x_lo) / max_width).ceil() as usize).max(1);
    build_real_grid(x_lo, x_hi, n_panels, nodes_per_panel)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{make_symbol, ModelKind, ModelParams};

    fn two_pi_i() -> Complex64 {
        Complex64::new(0.0, 2.0 * PI)
    }

    #[test]
    fn legendre_weights_sum_to_two() {
        for n in [1, 2, 5, 16, 40] {
            let (x, w) = gauss_legendre(n);
            assert!((w.iter().sum::<f64>() - 2.0).abs() < 1e-14);
            assert!(x.windows(2).all(|p| p[0] < p[1]));
        }
    }

    #[test]
    fn two_point_rule() {
        let g = build_real_grid(0.0, 1.0, 1, 2).unwrap();
        let d = 1.0 / (2.0 * 3f64.sqrt());
        assert!((g.points[0] - (0.5 - d)).abs() < 1e-15);
        assert!((g.points[1] - (0.5 + d)).abs() < 1e-15);
        assert!((g.weights[0] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn exponential_integral() {
        let g = build_real_grid(0.0, 30.0, 30, 8).unwrap();
        let exact = 1.0 - (-30f64).exp();
        assert!((g.integrate(|x| (-x).exp()) - exact).abs() < 1e-13);
    }

    #[test]
    fn circle_residues() {
        let c = build_circle(Complex64::new(0.0, 0.0), 1.0, 16, 1.0).unwrap();
        assert!((c.integrate(|z| 1.0 / z) / two_pi_i() - 1.0).norm() < 1e-14);
        assert!(c.integrate(|z| z).norm() < 1e-14);
        let c = build_circle(Complex64::new(1.0, 0.0), 0.5, 32, -1.0).unwrap();
        assert!((c.integrate(|z| 1.0 / (z - 1.0)) / two_pi_i() + 1.0).norm() < 1e-14);
    }

    #[test]
    fn odd_circle_rejected() {
        assert!(build_circle(Complex64::new(0.0, 0.0), 1.0, 7, 1.0).is_err());
    }

    #[test]
    fn oy_line_height() {
        let s = make_symbol(ModelKind::OY, &ModelParams::oy(&[0.0], 1.0)).unwrap();
        let l = build_vertical_line_with(&s, 0.15, 1e-12, 24.0, LineFactor::NONE).unwrap();
        let Shape::VerticalLine { halfheight, .. } = l.shape else { panic!() };
        // e^{−T²/2} = 1e−12 gives T ≈ 7.4; the Gamma factor and margin add a little
        assert!(halfheight > 6.0 && halfheight < 11.0, "{halfheight}");
        assert!(l.tail_bound <= 1e-12);
        let ys: Vec<f64> = l.nodes.iter().map(|z| z.im).collect();
        for (a, b) in ys.iter().zip(ys.iter().rev()) {
            assert_eq!(*a, -*b);
        }
    }

    #[test]
    fn loggamma_line_height() {
        let s = make_symbol(ModelKind::LogGamma, &ModelParams::log_gamma(&[1.0, 1.0], &[0.0])).unwrap();
        let c = s.line_abscissa().unwrap();
        let l = build_vertical_line_with(&s, c, 1e-12, 24.0, LineFactor::NONE).unwrap();
        let Shape::VerticalLine { halfheight, .. } = l.shape else { panic!() };
        let guess = 2.0 * (1e12f64).ln() / PI;
        assert!(halfheight > 0.7 * guess && halfheight < 1.6 * guess, "{halfheight} vs {guess}");
    }

    #[test]
    fn line_outside_strip_rejected() {
        let s = make_symbol(ModelKind::LogGamma, &ModelParams::log_gamma(&[1.0, 1.0], &[0.0])).unwrap();
        assert!(matches!(build_vertical_line(&s, 1.5, 1e-12, 24), Err(Error::Validation(_))));
    }

    #[test]
    fn polynomial_decay_hits_cap() {
        let s = make_symbol(ModelKind::LogGamma, &ModelParams::log_gamma(&[1.0], &[0.0])).unwrap();
        assert!(matches!(
            build_vertical_line(&s, 0.9, 1e-12, 24),
            Err(Error::Truncation(_))
        ));
    }
}
