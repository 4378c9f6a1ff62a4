//! Symbols W_N for every supported model, their analytic strips, zeros,
//! default contour geometry and the applicability conditions of the
//! determinant representations.

use crate::error::{Error, Result};
use crate::fredholm::SigmaSpec;
use crate::specfun::{log_gamma, ComplexValue, POLE_TOL};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

/// Decay exponent reported for symbols with exponential or Gaussian decay
/// along vertical lines.
pub const DECAY_SENTINEL: f64 = 1e9;

/// Zeros closer than this are treated as confluent.
pub const CONFLUENCE_GAP: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ModelKind {
    LogGamma,
    OY,
    Mixed,
    LUEext,
    GUEext,
    GLUEext,
    GinibreProduct,
    MuttalibBorodinLUE,
    TruncUnitaryProduct,
}

impl ModelKind {
    pub const ALL: [ModelKind; 9] = [
        ModelKind::LogGamma,
        ModelKind::OY,
        ModelKind::Mixed,
        ModelKind::LUEext,
        ModelKind::GUEext,
        ModelKind::GLUEext,
        ModelKind::GinibreProduct,
        ModelKind::MuttalibBorodinLUE,
        ModelKind::TruncUnitaryProduct,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::LogGamma => "loggamma",
            ModelKind::OY => "oy",
            ModelKind::Mixed => "mixed",
            ModelKind::LUEext => "lue",
            ModelKind::GUEext => "gue",
            ModelKind::GLUEext => "glue",
            ModelKind::GinibreProduct => "ginibre",
            ModelKind::MuttalibBorodinLUE => "muttalib-borodin",
            ModelKind::TruncUnitaryProduct => "trunc-unitary",
        }
    }

    pub fn is_polymer(self) -> bool {
        matches!(self, ModelKind::LogGamma | ModelKind::OY | ModelKind::Mixed)
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let k = s.to_ascii_lowercase().replace('_', "-");
        Ok(match k.as_str() {
            "loggamma" | "log-gamma" => ModelKind::LogGamma,
            "oy" | "oconnell-yor" => ModelKind::OY,
            "mixed" => ModelKind::Mixed,
            "lue" | "lueext" | "lue+" => ModelKind::LUEext,
            "gue" | "gueext" | "gue+" => ModelKind::GUEext,
            "glue" | "glueext" | "glue+" => ModelKind::GLUEext,
            "ginibre" | "ginibre-product" => ModelKind::GinibreProduct,
            "muttalib-borodin" | "mb" => ModelKind::MuttalibBorodinLUE,
            "trunc-unitary" | "truncated-unitary" => ModelKind::TruncUnitaryProduct,
            _ => return Err(Error::Validation(format!("unknown model kind '{s}'"))),
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Domain {
    RealLine,
    PositiveHalfLine,
    ExponentialVariables,
}

/// Raw parameters, before validation. Absent options mean "not supplied".
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    /// Particle count N.
    pub n_particles: usize,
    /// Column count n (LogGamma, Mixed).
    pub n_columns: Option<usize>,
    pub alpha: Vec<f64>,
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub nu: Option<f64>,
    pub tau: Option<f64>,
    pub theta: Option<f64>,
    pub nus: Vec<f64>,
    pub ells: Vec<f64>,
}

impl ModelParams {
    pub fn log_gamma(alpha: &[f64], a: &[f64]) -> Self {
        ModelParams {
            n_particles: a.len(),
            n_columns: Some(alpha.len()),
            alpha: alpha.to_vec(),
            a: a.to_vec(),
            ..Default::default()
        }
    }

    pub fn oy(a: &[f64], tau: f64) -> Self {
        ModelParams {
            n_particles: a.len(),
            a: a.to_vec(),
            tau: Some(tau),
            ..Default::default()
        }
    }

    pub fn mixed(alpha: &[f64], a: &[f64], tau: f64) -> Self {
        ModelParams {
            n_particles: a.len(),
            n_columns: Some(alpha.len()),
            alpha: alpha.to_vec(),
            a: a.to_vec(),
            tau: Some(tau),
            ..Default::default()
        }
    }

    pub fn lue(b: &[f64], nu: f64) -> Self {
        ModelParams {
            n_particles: b.len(),
            b: b.to_vec(),
            nu: Some(nu),
            ..Default::default()
        }
    }

    pub fn gue(a: &[f64], tau: f64) -> Self {
        ModelParams::oy(a, tau)
    }

    pub fn glue(b: &[f64], tau: f64) -> Self {
        ModelParams {
            n_particles: b.len(),
            b: b.to_vec(),
            tau: Some(tau),
            ..Default::default()
        }
    }

    /// Product of `nus.len()` square Ginibre factors with exponents `nus`.
    pub fn ginibre(n: usize, nus: &[f64]) -> Self {
        ModelParams {
            n_particles: n,
            nus: nus.to_vec(),
            ..Default::default()
        }
    }

    pub fn muttalib_borodin(n: usize, nu: f64, theta: f64) -> Self {
        ModelParams {
            n_particles: n,
            nu: Some(nu),
            theta: Some(theta),
            ..Default::default()
        }
    }

    pub fn trunc_unitary(n: usize, nus: &[f64], ells: &[f64]) -> Self {
        ModelParams {
            n_particles: n,
            nus: nus.to_vec(),
            ells: ells.to_vec(),
            ..Default::default()
        }
    }
}

/// One additive piece of log W.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum Term {
    /// power · log Γ(offset + slope·z)
    Gamma { offset: f64, slope: f64, power: f64 },
    /// power · log(z − root)
    Log { root: f64, power: f64 },
    /// τ z²/2
    Gauss { tau: f64 },
}

/// Asymptotics |W(c+iy)| ≈ C |y|^power e^{−rate|y|} e^{−gauss y²/2}.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LineAsymptotics {
    pub power: f64,
    pub rate: f64,
    pub gauss: f64,
}

/// How the zeros a_1..a_N are arranged.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ZeroStructure {
    Distinct,
    Confluent(f64),
    Partial,
}

/// Shape of the v-contour.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum VContour {
    /// Upward vertical line at the given abscissa; `left` is an optional
    /// second abscissa left of Σ used for negative arguments.
    Line { right: f64, left: Option<f64> },
    /// Negatively oriented circle around `center`.
    Loop { center: f64, radius: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelSymbol {
    pub kind: ModelKind,
    pub params: ModelParams,
    /// Zeros of W enclosed by Σ, sorted ascending.
    pub zeros: Vec<f64>,
    pub strip: (f64, f64),
    pub domain: Domain,
    pub decay_exponent: f64,
    /// Σ is the circle of this center and radius.
    pub sigma_center: f64,
    pub sigma_radius: f64,
    pub v_contour: VContour,
    pub terms: Vec<Term>,
}

fn bad(msg: impl Into<String>) -> Error {
    Error::Validation(msg.into())
}

fn require_finite(name: &str, v: &[f64]) -> Result<()> {
    if v.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(bad(format!("{name} must be finite")))
    }
}

fn check_absent(kind: ModelKind, p: &ModelParams, allowed: &[&str]) -> Result<()> {
    let present = [
        ("n", p.n_columns.is_some()),
        ("alpha", !p.alpha.is_empty()),
        ("a", !p.a.is_empty()),
        ("b", !p.b.is_empty()),
        ("nu", p.nu.is_some()),
        ("tau", p.tau.is_some()),
        ("theta", p.theta.is_some()),
        ("nus", !p.nus.is_empty()),
        ("ells", !p.ells.is_empty()),
    ];
    for (name, is) in present {
        if is && !allowed.contains(&name) {
            return Err(bad(format!("parameter {name} is not used by {kind}")));
        }
    }
    Ok(())
}

fn need_tau(p: &ModelParams) -> Result<f64> {
    match p.tau {
        Some(t) if t > 0.0 && t.is_finite() => Ok(t),
        Some(t) => Err(bad(format!("tau must be positive, got {t}"))),
        None => Err(bad("tau is required")),
    }
}

fn need_len(name: &str, v: &[f64], len: usize) -> Result<()> {
    if v.len() != len {
        return Err(bad(format!("{name} must have {len} entries, got {}", v.len())));
    }
    require_finite(name, v)
}

fn min_of(v: &[f64]) -> f64 {
    v.iter().copied().fold(f64::INFINITY, f64::min)
}

fn max_of(v: &[f64]) -> f64 {
    v.iter().copied().fold(f64::NEG_INFINITY, f64::max)
}

/// Validates parameters and assembles the symbol with its default contours.
///
/// ```
/// use biortho::models::{make_symbol, ModelKind, ModelParams};
/// let sym = make_symbol(ModelKind::OY, &ModelParams::oy(&[0.0, 0.2], 1.0)).unwrap();
/// assert_eq!(sym.zeros, vec![0.0, 0.2]);
/// assert!(make_symbol(ModelKind::LogGamma, &ModelParams::log_gamma(&[0.5], &[0.6])).is_err());
/// ```
pub fn make_symbol(kind: ModelKind, p: &ModelParams) -> Result<ModelSymbol> {
    let big_n = p.n_particles;
    if big_n == 0 {
        return Err(bad("N must be a positive integer"));
    }
    let mut terms = Vec::new();
    let zeros: Vec<f64>;
    let strip: (f64, f64);
    let mut domain = Domain::RealLine;
    // Poles of 1/W other than the enclosed zeros lie at or left of this.
    let mut barrier = f64::NEG_INFINITY;
    let mut left_line_allowed = true;
    let gauss_of = |tau: f64| Term::Gauss { tau };
    let c: f64;
    match kind {
        ModelKind::LogGamma | ModelKind::Mixed => {
            if kind == ModelKind::LogGamma {
                check_absent(kind, p, &["n", "alpha", "a"])?;
            } else {
                check_absent(kind, p, &["n", "alpha", "a", "tau"])?;
            }
            let n = p.n_columns.unwrap_or(p.alpha.len());
            if n < big_n {
                return Err(bad(format!("n ≥ N required, got n={n}, N={big_n}")));
            }
            need_len("alpha", &p.alpha, n)?;
            need_len("a", &p.a, big_n)?;
            for &al in &p.alpha {
                for &ak in &p.a {
                    if al - ak <= 0.0 {
                        return Err(bad(format!(
                            "alpha_j - a_k > 0 violated: alpha={al}, a={ak}"
                        )));
                    }
                }
            }
            for &al in &p.alpha {
                terms.push(Term::Gamma { offset: al, slope: -1.0, power: 1.0 });
            }
            for &ak in &p.a {
                terms.push(Term::Gamma { offset: -ak, slope: 1.0, power: -1.0 });
            }
            zeros = p.a.clone();
            let amax = max_of(&p.a);
            let amin_alpha = min_of(&p.alpha);
            strip = (f64::NEG_INFINITY, amin_alpha);
            barrier = amax - 1.0;
            if kind == ModelKind::LogGamma {
                let lo = if n == big_n {
                    let s: f64 = p.alpha.iter().sum::<f64>() + p.a.iter().sum::<f64>();
                    left_line_allowed = false;
                    amax.max(s / (2.0 * big_n as f64))
                } else {
                    amax
                };
                let preferred = if n == big_n { 0.9 } else { 0.6 };
                let margin = 0.05_f64.min(0.25 * (amin_alpha - lo));
                c = if preferred > lo + margin && preferred < amin_alpha - margin {
                    preferred
                } else {
                    lo + if n == big_n { 0.7 } else { 0.5 } * (amin_alpha - lo)
                };
            } else {
                let tau = need_tau(p)?;
                terms.push(gauss_of(tau));
                c = if amax + 0.3 < amin_alpha - 0.05 {
                    amax + 0.3
                } else {
                    0.5 * (amax + amin_alpha)
                };
            }
        }
        ModelKind::OY | ModelKind::GUEext => {
            check_absent(kind, p, &["a", "tau"])?;
            need_len("a", &p.a, big_n)?;
            let tau = need_tau(p)?;
            terms.push(gauss_of(tau));
            if kind == ModelKind::OY {
                for &ak in &p.a {
                    terms.push(Term::Gamma { offset: -ak, slope: 1.0, power: -1.0 });
                }
                barrier = max_of(&p.a) - 1.0;
                let d1 = p.a.iter().fold(0.0_f64, |m, x| m.max(x.abs())) + 0.05;
                c = 2.0 * d1 + 0.1;
            } else {
                for &ak in &p.a {
                    terms.push(Term::Log { root: ak, power: 1.0 });
                }
                c = max_of(&p.a) + 0.5;
            }
            zeros = p.a.clone();
            strip = (f64::NEG_INFINITY, f64::INFINITY);
        }
        ModelKind::LUEext => {
            check_absent(kind, p, &["b", "nu"])?;
            need_len("b", &p.b, big_n)?;
            let nu = p.nu.unwrap_or(0.0);
            if !(nu >= 0.0 && nu.fract() == 0.0) {
                return Err(bad(format!("nu must be a nonnegative integer, got {nu}")));
            }
            for &bk in &p.b {
                if !(0.0..1.0).contains(&bk) {
                    return Err(bad(format!("b_k must lie in [0,1), got {bk}")));
                }
                terms.push(Term::Log { root: bk, power: 1.0 });
            }
            terms.push(Term::Log { root: 1.0, power: -(big_n as f64 + nu) });
            zeros = p.b.clone();
            strip = (f64::NEG_INFINITY, 1.0);
            domain = Domain::PositiveHalfLine;
            c = f64::NAN;
        }
        ModelKind::GLUEext => {
            check_absent(kind, p, &["b", "tau"])?;
            need_len("b", &p.b, big_n)?;
            let tau = need_tau(p)?;
            for &bk in &p.b {
                if !(0.0..1.0).contains(&bk) {
                    return Err(bad(format!("b_k must lie in [0,1), got {bk}")));
                }
                terms.push(Term::Log { root: 1.0 - bk, power: -1.0 });
            }
            terms.push(Term::Log { root: 0.0, power: big_n as f64 });
            terms.push(gauss_of(tau));
            zeros = vec![0.0; big_n];
            let hi = 1.0 - max_of(&p.b);
            strip = (f64::NEG_INFINITY, hi);
            c = 0.5 * hi;
        }
        ModelKind::GinibreProduct | ModelKind::MuttalibBorodinLUE | ModelKind::TruncUnitaryProduct => {
            let nf = big_n as f64;
            terms.push(Term::Gamma { offset: 1.0, slope: -1.0, power: 1.0 });
            terms.push(Term::Gamma { offset: 1.0 - nf, slope: -1.0, power: -1.0 });
            let mut hi: f64 = 1.0;
            match kind {
                ModelKind::GinibreProduct => {
                    check_absent(kind, p, &["nus"])?;
                    if p.nus.is_empty() {
                        return Err(bad("at least one Ginibre factor (nus) is required"));
                    }
                    require_finite("nus", &p.nus)?;
                    for &v in &p.nus {
                        if v < 0.0 {
                            return Err(bad(format!("nu_k must be nonnegative, got {v}")));
                        }
                        terms.push(Term::Gamma { offset: 1.0 + v, slope: -1.0, power: 1.0 });
                    }
                }
                ModelKind::MuttalibBorodinLUE => {
                    check_absent(kind, p, &["nu", "theta"])?;
                    let nu = p.nu.ok_or_else(|| bad("nu is required"))?;
                    let theta = p.theta.ok_or_else(|| bad("theta is required"))?;
                    if !(nu > -1.0 && theta > 0.0 && nu.is_finite() && theta.is_finite()) {
                        return Err(bad("Muttalib-Borodin requires nu > -1 and theta > 0"));
                    }
                    terms.push(Term::Gamma { offset: nu + 1.0, slope: -theta, power: 1.0 });
                    hi = hi.min((nu + 1.0) / theta);
                }
                _ => {
                    check_absent(kind, p, &["nus", "ells"])?;
                    if p.nus.is_empty() || p.nus.len() != p.ells.len() {
                        return Err(bad("nus and ells must be nonempty and of equal length"));
                    }
                    require_finite("nus", &p.nus)?;
                    require_finite("ells", &p.ells)?;
                    for (&v, &l) in p.nus.iter().zip(&p.ells) {
                        if v < 0.0 || l < nf {
                            return Err(bad(format!(
                                "truncated unitary factors need nu_k ≥ 0 and ell_k ≥ N, got ({v}, {l})"
                            )));
                        }
                        terms.push(Term::Gamma { offset: 1.0 + v, slope: -1.0, power: 1.0 });
                        terms.push(Term::Gamma { offset: 1.0 + l - nf, slope: -1.0, power: -1.0 });
                    }
                }
            }
            zeros = (0..big_n).map(|m| m as f64 + 1.0 - nf).collect();
            strip = (f64::NEG_INFINITY, hi);
            domain = Domain::ExponentialVariables;
            c = 0.5 * hi;
        }
    }

    let mut zeros = zeros;
    zeros.sort_by(|x, y| x.partial_cmp(y).unwrap());
    let amin = zeros[0];
    let amax = zeros[zeros.len() - 1];
    let mid = 0.5 * (amin + amax);
    let half = 0.5 * (amax - amin);

    let mut sym = ModelSymbol {
        kind,
        params: p.clone(),
        zeros,
        strip,
        domain,
        decay_exponent: 0.0,
        sigma_center: mid,
        sigma_radius: 0.0,
        v_contour: VContour::Line { right: c, left: None },
        terms,
    };

    if kind == ModelKind::LUEext {
        let gap = 1.0 - amax;
        sym.sigma_radius = half + 0.3 * gap;
        sym.v_contour = VContour::Loop { center: 1.0, radius: 0.4 * gap };
        sym.decay_exponent = sym.line_asymptotics(0.5).map(|a| -a.power).unwrap_or(0.0);
        return Ok(sym);
    }

    if !(c > amax && c < strip.1) {
        return Err(bad(format!(
            "no admissible line abscissa between the zeros (max {amax}) and the strip edge {}",
            strip.1
        )));
    }
    let gap = c - amax;
    let mut r = (half * (c - mid)).sqrt().max(half + 0.35 * gap);
    r = r.min(c - mid - 0.25 * gap);
    if mid - r <= barrier + 0.05 * gap {
        r = mid - barrier - 0.05 * gap;
    }
    if r <= half + 1e-9 {
        return Err(bad(
            "zeros are spread too widely: Σ would enclose further zeros of W".to_string(),
        ));
    }
    sym.sigma_radius = r;
    let decay = sym.decay_at(c);
    if decay <= 0.0 {
        return Err(bad(format!(
            "W does not decay along the line Re z = {c} (exponent {decay})"
        )));
    }
    sym.decay_exponent = decay;
    let left = if left_line_allowed {
        let cl = (mid - r) - (c - mid - r);
        if cl > strip.0 && cl < amin && sym.decay_at(cl) > 1.0 {
            Some(cl)
        } else {
            None
        }
    } else {
        None
    };
    sym.v_contour = VContour::Line { right: c, left };
    Ok(sym)
}

impl ModelSymbol {
    pub fn n_particles(&self) -> usize {
        self.zeros.len()
    }

    pub fn tau(&self) -> Option<f64> {
        self.params.tau
    }

    /// log W(z) as a term-by-term sum.
    pub fn log_symbol(&self, z: ComplexValue) -> Result<ComplexValue> {
        for &ak in &self.zeros {
            if (z - ak).norm() < POLE_TOL {
                return Err(Error::Zero(format!("z={z} is a zero of W")));
            }
        }
        let mut acc = Complex64::new(0.0, 0.0);
        for t in &self.terms {
            match *t {
                Term::Gamma { offset, slope, power } => {
                    let arg = offset + slope * z;
                    let lg = log_gamma(arg).map_err(|e| match e {
                        Error::Pole(_) if power < 0.0 => {
                            Error::Zero(format!("z={z} is a zero of W"))
                        }
                        Error::Pole(_) => Error::Pole(format!("z={z} is a pole of W")),
                        other => other,
                    })?;
                    acc += power * lg;
                }
                Term::Log { root, power } => {
                    let d = z - root;
                    if d.norm() < POLE_TOL {
                        return Err(if power > 0.0 {
                            Error::Zero(format!("z={z} is a zero of W"))
                        } else {
                            Error::Pole(format!("z={z} is a pole of W"))
                        });
                    }
                    acc += power * d.ln();
                }
                Term::Gauss { tau } => acc += 0.5 * tau * z * z,
            }
        }
        crate::specfun::check_finite(acc, "log_symbol")
    }

    /// W(z) itself.
    pub fn symbol(&self, z: ComplexValue) -> Result<ComplexValue> {
        Ok(self.log_symbol(z)?.exp())
    }

    /// Asymptotic profile of |W| along Re z = c.
    pub fn line_asymptotics(&self, c: f64) -> Option<LineAsymptotics> {
        let mut a = LineAsymptotics { power: 0.0, rate: 0.0, gauss: 0.0 };
        for t in &self.terms {
            match *t {
                Term::Gamma { offset, slope, power } => {
                    a.power += power * (offset + slope * c - 0.5);
                    a.rate += power * 0.5 * PI * slope.abs();
                }
                Term::Log { power, .. } => a.power += power,
                Term::Gauss { tau } => a.gauss += tau,
            }
        }
        Some(a)
    }

    /// ε̂ with |W(c+iy)| = O(|y|^{−ε̂}); the sentinel stands for faster than
    /// any power.
    pub fn decay_at(&self, c: f64) -> f64 {
        let a = self.line_asymptotics(c).unwrap();
        if a.gauss > 0.0 || a.rate > 0.0 {
            DECAY_SENTINEL
        } else if a.rate < 0.0 {
            -DECAY_SENTINEL
        } else {
            -a.power
        }
    }

    /// Right abscissa of the default v-line, if the v-contour is a line.
    pub fn line_abscissa(&self) -> Option<f64> {
        match self.v_contour {
            VContour::Line { right, .. } => Some(right),
            VContour::Loop { .. } => None,
        }
    }

    pub fn zero_structure(&self) -> ZeroStructure {
        let z = &self.zeros;
        if z.len() == 1 {
            return ZeroStructure::Distinct;
        }
        let spread = z[z.len() - 1] - z[0];
        if spread < CONFLUENCE_GAP {
            return ZeroStructure::Confluent(z.iter().sum::<f64>() / z.len() as f64);
        }
        let min_gap = z.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min);
        if min_gap < CONFLUENCE_GAP {
            ZeroStructure::Partial
        } else {
            ZeroStructure::Distinct
        }
    }

    /// W′(a_m) by a 4-point central difference of exp∘log_symbol.
    pub fn derivative_at_zero(&self, m: usize) -> Result<ComplexValue> {
        let a = self.zeros[m];
        let width = (self.strip.1 - self.strip.0).min(1.0);
        let mut h = 1e-5 * width;
        for (k, &other) in self.zeros.iter().enumerate() {
            if k != m {
                h = h.min(0.1 * (other - a).abs());
            }
        }
        let f = |x: f64| self.symbol(Complex64::new(x, 0.0));
        Ok((-f(a + 2.0 * h)? + 8.0 * f(a + h)? - 8.0 * f(a - h)? + f(a - 2.0 * h)?) / (12.0 * h))
    }

    /// Largest and smallest zero.
    pub fn zero_range(&self) -> (f64, f64) {
        (self.zeros[0], self.zeros[self.zeros.len() - 1])
    }

    /// Rescaled copy for contour-independence checks: moves the right line.
    pub fn with_line_abscissa(&self, c: f64) -> Result<ModelSymbol> {
        let mut s = self.clone();
        match s.v_contour {
            VContour::Line { left, .. } => {
                let (_, amax) = self.zero_range();
                if !(c > self.sigma_center + self.sigma_radius && c < self.strip.1 && c > amax) {
                    return Err(bad(format!("line abscissa {c} is not admissible")));
                }
                s.v_contour = VContour::Line { right: c, left };
                s.decay_exponent = s.decay_at(c);
                Ok(s)
            }
            VContour::Loop { .. } => Err(bad("symbol uses a closed v-contour")),
        }
    }
}

/// Which determinant representations apply, with reasons for those that do
/// not.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RepresentationFlags {
    pub matrix_ok: bool,
    pub l_ok: bool,
    pub h_ok: bool,
    pub k_ok: bool,
    pub reason_matrix: Option<String>,
    pub reason_l: Option<String>,
    pub reason_h: Option<String>,
    pub reason_k: Option<String>,
}

/// Applicability of the four representations of μ_N[σ].
pub fn representation_flags(sym: &ModelSymbol, sigma: &SigmaSpec) -> RepresentationFlags {
    let mut f = RepresentationFlags {
        matrix_ok: true,
        l_ok: true,
        h_ok: true,
        k_ok: true,
        reason_matrix: None,
        reason_l: None,
        reason_h: None,
        reason_k: None,
    };
    if matches!(sigma, SigmaSpec::Zero) {
        f.h_ok = false;
        f.k_ok = false;
        f.reason_h = Some("sigma is identically zero".into());
        f.reason_k = Some("sigma is identically zero".into());
        return f;
    }
    if sym.zero_structure() == ZeroStructure::Partial {
        f.matrix_ok = false;
        f.reason_matrix = Some("zeros are partially confluent".into());
    }
    let (amin, amax) = sym.zero_range();
    let spread = amax - amin;
    let n_eq_big_n = sym.kind == ModelKind::LogGamma
        && sym.params.n_columns.unwrap_or(sym.params.alpha.len()) == sym.n_particles();
    let mut h_reason = None;
    if let VContour::Loop { .. } = sym.v_contour {
        h_reason = Some("v-contour is a closed loop".to_string());
    } else if sym.decay_exponent <= 1.0 {
        h_reason = Some(if n_eq_big_n {
            "n=N decay condition fails".to_string()
        } else {
            format!("decay exponent {} ≤ 1", sym.decay_exponent)
        });
    } else if let Some(rate) = sigma.left_decay_rate() {
        if rate <= spread {
            h_reason = Some(format!(
                "sigma decays at rate {rate} ≤ a_max − a_min = {spread} as x → −∞"
            ));
        }
    }
    if let Some(r) = h_reason {
        f.h_ok = false;
        f.k_ok = false;
        f.reason_h = Some(r.clone());
        f.reason_k = Some(r);
        return f;
    }
    if !matches!(sigma, SigmaSpec::Fermi { .. }) {
        f.k_ok = false;
        f.reason_k = Some("K representation needs the Fermi factor".into());
    } else if spread >= 1.0 {
        f.k_ok = false;
        f.reason_k = Some(format!("a_max − a_min = {spread} ≥ 1"));
    } else if let VContour::Line { right, .. } = sym.v_contour {
        let lo = right - (sym.sigma_center + sym.sigma_radius);
        let hi = right - (sym.sigma_center - sym.sigma_radius);
        if !(lo > 0.0 && hi < 1.0) {
            f.k_ok = false;
            f.reason_k = Some(format!("Re(v−u) ranges over [{lo}, {hi}], not inside (0,1)"));
        }
    }
    f
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> ComplexValue {
        Complex64::new(re, im)
    }

    #[test]
    fn gue_log_symbol() {
        let s = make_symbol(ModelKind::GUEext, &ModelParams::gue(&[0.0], 1.0)).unwrap();
        assert!((s.log_symbol(c(1.0, 0.0)).unwrap() - 0.5).norm() < 1e-15);
    }

    #[test]
    fn lue_log_symbol() {
        let s = make_symbol(ModelKind::LUEext, &ModelParams::lue(&[0.0], 1.0)).unwrap();
        let v = s.log_symbol(c(0.5, 0.0)).unwrap().exp();
        assert!((v - 2.0).norm() < 1e-14);
        assert_eq!(s.domain, Domain::PositiveHalfLine);
    }

    #[test]
    fn loggamma_symmetric_point() {
        let s = make_symbol(ModelKind::LogGamma, &ModelParams::log_gamma(&[1.0], &[0.0])).unwrap();
        assert!(s.log_symbol(c(0.5, 0.0)).unwrap().norm() < 1e-14);
        assert!((s.decay_exponent - 0.8).abs() < 1e-12);
        assert_eq!(s.line_abscissa(), Some(0.9));
    }

    #[test]
    fn loggamma_rejects_nonpositive_gamma() {
        let e = make_symbol(ModelKind::LogGamma, &ModelParams::log_gamma(&[0.5], &[0.6]));
        assert!(matches!(e, Err(Error::Validation(m)) if m.contains("alpha_j - a_k")));
    }

    #[test]
    fn oy_has_gaussian_sentinel() {
        let s = make_symbol(ModelKind::OY, &ModelParams::oy(&[0.0, 0.2], 1.0)).unwrap();
        assert_eq!(s.decay_exponent, DECAY_SENTINEL);
        assert_eq!(s.line_abscissa(), Some(0.6));
    }

    #[test]
    fn stray_parameters_rejected() {
        let mut p = ModelParams::log_gamma(&[1.0], &[0.0]);
        p.tau = Some(1.0);
        assert!(make_symbol(ModelKind::LogGamma, &p).is_err());
    }

    #[test]
    fn zero_error_at_zero() {
        let s = make_symbol(ModelKind::OY, &ModelParams::oy(&[0.1], 1.0)).unwrap();
        assert!(matches!(s.log_symbol(c(0.1, 0.0)), Err(Error::Zero(_))));
    }

    #[test]
    fn flags_follow_decay() {
        let s = make_symbol(ModelKind::LogGamma, &ModelParams::log_gamma(&[1.0], &[0.0])).unwrap();
        let f = representation_flags(&s, &SigmaSpec::fermi(0.0));
        assert!(!f.k_ok);
        assert_eq!(f.reason_k.as_deref(), Some("n=N decay condition fails"));
        let s = make_symbol(ModelKind::OY, &ModelParams::oy(&[0.0, 0.2], 1.0)).unwrap();
        let f = representation_flags(&s, &SigmaSpec::fermi(0.0));
        assert!(f.matrix_ok && f.l_ok && f.h_ok && f.k_ok);
        let f = representation_flags(&s, &SigmaSpec::Zero);
        assert!(f.matrix_ok && f.l_ok);
    }

    #[test]
    fn exponential_kinds_enclose_consecutive_integers() {
        let s = make_symbol(ModelKind::GinibreProduct, &ModelParams::ginibre(3, &[0.0])).unwrap();
        assert_eq!(s.zeros, vec![-2.0, -1.0, 0.0]);
        assert!(s.sigma_center + s.sigma_radius < 0.5);
        assert!(s.sigma_center - s.sigma_radius > -3.0);
    }

    #[test]
    fn derivative_at_simple_zero() {
        // W(z) = z e^{z²/2}: W′(0) = 1
        let s = make_symbol(ModelKind::GUEext, &ModelParams::gue(&[0.0], 1.0)).unwrap();
        assert!((s.derivative_at_zero(0).unwrap() - 1.0).norm() < 1e-10);
    }
}
