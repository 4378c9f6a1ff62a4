//! Run configuration. Values come from command-line flags, then from a flat
//! `key = value` file with `[section]` headers, then from built-in defaults.

use std::fs;
use std::path::{Path, PathBuf};

use biortho::models::{ModelKind, ModelParams};
use biortho::{Error, Result};
use clap::{Args, ValueEnum};
use serde::Serialize;

pub const DEFAULT_TOL: f64 = 1e-13;
pub const DEFAULT_NODES: usize = 12;
pub const DEFAULT_PANEL_WIDTH: f64 = 1.0;
pub const DEFAULT_SAMPLES: usize = 100_000;
pub const DEFAULT_SEED: u64 = 1;
pub const DEFAULT_THRESHOLD: f64 = 5e-2;
pub const DEFAULT_TEMPERATURES: [f64; 4] = [0.5, 0.2, 0.1, 0.05];
pub const DEFAULT_X: [f64; 5] = [-2.0, -1.0, 0.0, 1.0, 2.0];

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SigmaKind {
    Fermi,
    Indicator,
    Zero,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Ndjson,
    Csv,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Emit {
    Kernel,
    Lhat,
    Psi,
    Phi,
    Kappa,
}

/// Every setting as it may arrive from the command line or the file. Lists
/// are comma separated; `lo:hi:count` expands to an equispaced list.
#[derive(Args, Clone, Debug, Default)]
pub struct Flags {
    /// Model: loggamma, oy, mixed, lue, gue, glue, ginibre, muttalib-borodin, trunc-unitary
    #[arg(long)]
    pub model: Option<String>,
    /// Number of columns n (LogGamma, Mixed) [default: length of --alpha]
    #[arg(long = "n")]
    pub n_columns: Option<usize>,
    /// Number of particles N [default: length of --a or --b]
    #[arg(long = "N")]
    pub n_particles: Option<usize>,
    /// Column parameters α; a single value is repeated n times
    #[arg(long, allow_hyphen_values = true)]
    pub alpha: Option<String>,
    /// Row parameters a (zeros of the symbol); a single value is repeated N times
    #[arg(long, allow_hyphen_values = true)]
    pub a: Option<String>,
    /// External-source parameters b (LUE, GLUE, zero-temperature sweeps)
    #[arg(long, allow_hyphen_values = true)]
    pub b: Option<String>,
    /// Laguerre exponent ν (LUE, Muttalib–Borodin)
    #[arg(long, allow_hyphen_values = true)]
    pub nu: Option<f64>,
    /// Time or variance τ (OY, Mixed, GUE, GLUE)
    #[arg(long)]
    pub tau: Option<f64>,
    /// Muttalib–Borodin exponent θ
    #[arg(long)]
    pub theta: Option<f64>,
    /// Ginibre or truncated-unitary factor exponents
    #[arg(long, allow_hyphen_values = true)]
    pub nus: Option<String>,
    /// Truncated-unitary factor sizes
    #[arg(long)]
    pub ells: Option<String>,
    /// Override the abscissa of the right v-line
    #[arg(long, allow_hyphen_values = true)]
    pub line_abscissa: Option<f64>,
    /// Arguments t (thresholds s for gap and mc-compare on matrix models) [default: 0]
    #[arg(long, alias = "s", allow_hyphen_values = true)]
    pub t: Option<String>,
    /// Temperatures of a zero-temperature sweep, strictly decreasing [default: 0.5,0.2,0.1,0.05]
    #[arg(long = "T-list")]
    pub temperatures: Option<String>,
    /// Multiplicative statistic for check, kernel and logderiv [default: fermi]
    #[arg(long, value_enum)]
    pub sigma: Option<SigmaKind>,
    /// Monte Carlo sample count [default: 100000]
    #[arg(long)]
    pub samples: Option<usize>,
    /// Monte Carlo seed [default: 1]
    #[arg(long)]
    pub seed: Option<u64>,
    /// Brownian grid steps for OY and Mixed samplers [default: max(2000 τ, 500)]
    #[arg(long)]
    pub steps: Option<usize>,
    /// Contour quadrature tolerance [default: 1e-13]
    #[arg(long)]
    pub tol: Option<f64>,
    /// Gauss–Legendre nodes per panel on the real line [default: 12]
    #[arg(long)]
    pub nodes: Option<usize>,
    /// Widest panel on the real line [default: 1]
    #[arg(long)]
    pub panel_width: Option<f64>,
    /// Pass threshold on the final zero-temperature difference [default: 0.05]
    #[arg(long)]
    pub threshold: Option<f64>,
    /// Kernel arguments x [default: -2,-1,0,1,2]
    #[arg(long, allow_hyphen_values = true)]
    pub x: Option<String>,
    /// Second kernel arguments x′ [default: same as --x]
    #[arg(long, allow_hyphen_values = true)]
    pub xp: Option<String>,
    /// Kernel output: kernel, lhat, psi, phi or kappa [default: kernel]
    #[arg(long, value_enum)]
    pub emit: Option<Emit>,
    /// Output file [default: standard output]
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Output format [default: ndjson]
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    /// Worker threads [default: all cores]
    #[arg(long, env = "BIORTHO_THREADS")]
    pub threads: Option<usize>,
}

fn bad(msg: impl Into<String>) -> Error {
    Error::Validation(msg.into())
}

fn parse_num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
    v.trim().parse().map_err(|_| bad(format!("{key}: cannot parse '{v}'")))
}

fn parse_enum<T: ValueEnum>(key: &str, v: &str) -> Result<T> {
    T::from_str(v.trim(), true).map_err(|_| bad(format!("{key}: unknown value '{v}'")))
}

/// Comma separated reals, where `lo:hi:count` stands for an equispaced list.
pub fn parse_list(key: &str, s: &str) -> Result<Vec<f64>> {
    let mut out = Vec::new();
    for item in s.split(',').map(str::trim).filter(|x| !x.is_empty()) {
        let parts: Vec<&str> = item.split(':').collect();
        match parts.as_slice() {
            [v] => out.push(parse_num::<f64>(key, v)?),
            [lo, hi, n] => {
                let lo: f64 = parse_num(key, lo)?;
                let hi: f64 = parse_num(key, hi)?;
                let n: usize = parse_num(key, n)?;
                if n < 2 {
                    return Err(bad(format!("{key}: a range needs at least 2 points")));
                }
                out.extend((0..n).map(|k| lo + (hi - lo) * k as f64 / (n - 1) as f64));
            }
            _ => return Err(bad(format!("{key}: cannot parse '{item}'"))),
        }
    }
    if out.iter().any(|x| !x.is_finite()) {
        return Err(bad(format!("{key}: values must be finite")));
    }
    Ok(out)
}

impl Flags {
    /// Fields set here win; the rest are taken from `other`.
    pub fn or(self, other: Flags) -> Flags {
        Flags {
            model: self.model.or(other.model),
            n_columns: self.n_columns.or(other.n_columns),
            n_particles: self.n_particles.or(other.n_particles),
            alpha: self.alpha.or(other.alpha),
            a: self.a.or(other.a),
            b: self.b.or(other.b),
            nu: self.nu.or(other.nu),
            tau: self.tau.or(other.tau),
            theta: self.theta.or(other.theta),
            nus: self.nus.or(other.nus),
            ells: self.ells.or(other.ells),
            line_abscissa: self.line_abscissa.or(other.line_abscissa),
            t: self.t.or(other.t),
            temperatures: self.temperatures.or(other.temperatures),
            sigma: self.sigma.or(other.sigma),
            samples: self.samples.or(other.samples),
            seed: self.seed.or(other.seed),
            steps: self.steps.or(other.steps),
            tol: self.tol.or(other.tol),
            nodes: self.nodes.or(other.nodes),
            panel_width: self.panel_width.or(other.panel_width),
            threshold: self.threshold.or(other.threshold),
            x: self.x.or(other.x),
            xp: self.xp.or(other.xp),
            emit: self.emit.or(other.emit),
            out: self.out.or(other.out),
            format: self.format.or(other.format),
            threads: self.threads.or(other.threads),
        }
    }

    fn set(&mut self, section: &str, key: &str, v: &str) -> Result<()> {
        let name = format!("{section}.{key}");
        let s = || Some(v.trim().to_string());
        match (section, key) {
            ("model", "kind") => self.model = s(),
            ("model", "N") => self.n_particles = Some(parse_num(&name, v)?),
            ("model", "n") => self.n_columns = Some(parse_num(&name, v)?),
            ("model", "alpha") => self.alpha = s(),
            ("model", "a") => self.a = s(),
            ("model", "b") => self.b = s(),
            ("model", "nu") => self.nu = Some(parse_num(&name, v)?),
            ("model", "tau") => self.tau = Some(parse_num(&name, v)?),
            ("model", "theta") => self.theta = Some(parse_num(&name, v)?),
            ("model", "nus") => self.nus = s(),
            ("model", "ells") => self.ells = s(),
            ("model", "line_abscissa") => self.line_abscissa = Some(parse_num(&name, v)?),
            ("numeric", "tol") => self.tol = Some(parse_num(&name, v)?),
            ("numeric", "nodes") => self.nodes = Some(parse_num(&name, v)?),
            ("numeric", "panel_width") => self.panel_width = Some(parse_num(&name, v)?),
            ("numeric", "threads") => self.threads = Some(parse_num(&name, v)?),
            ("mc", "samples") => self.samples = Some(parse_num(&name, v)?),
            ("mc", "seed") => self.seed = Some(parse_num(&name, v)?),
            ("mc", "steps") => self.steps = Some(parse_num(&name, v)?),
            ("sweep", "t") => self.t = s(),
            ("sweep", "T") => self.temperatures = s(),
            ("sweep", "sigma") => self.sigma = Some(parse_enum(&name, v)?),
            ("sweep", "threshold") => self.threshold = Some(parse_num(&name, v)?),
            ("sweep", "x") => self.x = s(),
            ("sweep", "xp") => self.xp = s(),
            ("sweep", "emit") => self.emit = Some(parse_enum(&name, v)?),
            ("output", "path") => self.out = Some(PathBuf::from(v.trim())),
            ("output", "format") => self.format = Some(parse_enum(&name, v)?),
            _ => return Err(bad(format!("unknown config key '{name}'"))),
        }
        Ok(())
    }

    /// Parses the flat configuration format:
    ///
    /// ```text
    /// [model]
    /// kind = oy
    /// a = 0, 0.2
    /// ```
    pub fn from_config_str(text: &str) -> Result<Flags> {
        let mut flags = Flags::default();
        let mut section: Option<String> = None;
        for (no, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap().trim();
            if line.is_empty() {
                continue;
            }
            if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
                let name = name.trim();
                if !["model", "numeric", "mc", "sweep", "output"].contains(&name) {
                    return Err(bad(format!("line {}: unknown section [{name}]", no + 1)));
                }
                section = Some(name.to_string());
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| bad(format!("line {}: expected key = value", no + 1)))?;
            let sec = section
                .as_deref()
                .ok_or_else(|| bad(format!("line {}: key outside a section", no + 1)))?;
            flags.set(sec, key.trim(), value)?;
        }
        Ok(flags)
    }

    pub fn from_config_file(path: &Path) -> Result<Flags> {
        let text = fs::read_to_string(path).map_err(|e| bad(format!("cannot read {}: {e}", path.display())))?;
        Flags::from_config_str(&text)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ModelSection {
    pub kind: ModelKind,
    #[serde(rename = "N")]
    pub n_particles: usize,
    pub n: Option<usize>,
    pub alpha: Vec<f64>,
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub nu: Option<f64>,
    pub tau: Option<f64>,
    pub theta: Option<f64>,
    pub nus: Vec<f64>,
    pub ells: Vec<f64>,
    pub line_abscissa: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct NumericSection {
    pub tol: f64,
    pub nodes: usize,
    pub panel_width: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct McSection {
    pub samples: usize,
    pub seed: u64,
    pub steps: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepSection {
    pub t: Vec<f64>,
    #[serde(rename = "T")]
    pub temperatures: Vec<f64>,
    pub sigma: SigmaKind,
    pub threshold: f64,
    pub x: Vec<f64>,
    pub xp: Vec<f64>,
    pub emit: Emit,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OutputSection {
    pub path: Option<String>,
    pub format: Format,
}

/// The fully resolved configuration echoed into every output record. The
/// thread count is left out so that outputs do not depend on it.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunConfig {
    pub command: String,
    pub model: ModelSection,
    pub numeric: NumericSection,
    pub mc: McSection,
    pub sweep: SweepSection,
    pub output: OutputSection,
}

fn broadcast(name: &str, v: Vec<f64>, len: Option<usize>) -> Result<Vec<f64>> {
    match len {
        Some(n) if v.len() == 1 && n > 1 => Ok(vec![v[0]; n]),
        Some(n) if !v.is_empty() && v.len() != n => {
            Err(bad(format!("{name} has {} entries but {n} are required", v.len())))
        }
        _ => Ok(v),
    }
}

fn opt_list(key: &str, s: &Option<String>) -> Result<Vec<f64>> {
    match s {
        Some(s) => parse_list(key, s),
        None => Ok(Vec::new()),
    }
}

impl RunConfig {
    pub fn resolve(command: &str, f: &Flags) -> Result<RunConfig> {
        let kind: ModelKind = f.model.as_deref().ok_or_else(|| bad("--model is required"))?.parse()?;
        let n_columns = f.n_columns;
        let alpha = broadcast("alpha", opt_list("alpha", &f.alpha)?, n_columns)?;
        let a = opt_list("a", &f.a)?;
        let b = opt_list("b", &f.b)?;
        let n_particles = match f.n_particles {
            Some(n) => n,
            None => a.len().max(b.len()),
        };
        if n_particles == 0 {
            return Err(bad("N is required (give --N, --a or --b)"));
        }
        let model = ModelSection {
            kind,
            n_particles,
            n: n_columns.or(if alpha.is_empty() { None } else { Some(alpha.len()) }),
            alpha,
            a: broadcast("a", a, Some(n_particles))?,
            b: broadcast("b", b, Some(n_particles))?,
            nu: f.nu,
            tau: f.tau,
            theta: f.theta,
            nus: opt_list("nus", &f.nus)?,
            ells: opt_list("ells", &f.ells)?,
            line_abscissa: f.line_abscissa,
        };
        let numeric = NumericSection {
            tol: f.tol.unwrap_or(DEFAULT_TOL),
            nodes: f.nodes.unwrap_or(DEFAULT_NODES),
            panel_width: f.panel_width.unwrap_or(DEFAULT_PANEL_WIDTH),
        };
        if !(numeric.tol > 0.0 && numeric.tol < 1.0) {
            return Err(bad("tol must lie in (0, 1)"));
        }
        if numeric.nodes < 2 || !(numeric.panel_width > 0.0 && numeric.panel_width.is_finite()) {
            return Err(bad("nodes must be ≥ 2 and panel_width positive"));
        }
        let mc = McSection {
            samples: f.samples.unwrap_or(DEFAULT_SAMPLES),
            seed: f.seed.unwrap_or(DEFAULT_SEED),
            steps: f.steps,
        };
        let t = match &f.t {
            Some(s) => parse_list("t", s)?,
            None => vec![0.0],
        };
        let temperatures = match &f.temperatures {
            Some(s) => parse_list("T-list", s)?,
            None => DEFAULT_TEMPERATURES.to_vec(),
        };
        let x = match &f.x {
            Some(s) => parse_list("x", s)?,
            None => DEFAULT_X.to_vec(),
        };
        let xp = match &f.xp {
            Some(s) => parse_list("xp", s)?,
            None => x.clone(),
        };
        let sweep = SweepSection {
            t,
            temperatures,
            sigma: f.sigma.unwrap_or(SigmaKind::Fermi),
            threshold: f.threshold.unwrap_or(DEFAULT_THRESHOLD),
            x,
            xp,
            emit: f.emit.unwrap_or(Emit::Kernel),
        };
        let output = OutputSection {
            path: f.out.as_ref().map(|p| p.display().to_string()),
            format: f.format.unwrap_or(Format::Ndjson),
        };
        Ok(RunConfig { command: command.to_string(), model, numeric, mc, sweep, output })
    }

    pub fn params(&self) -> ModelParams {
        let m = &self.model;
        ModelParams {
            n_particles: m.n_particles,
            n_columns: m.n,
            alpha: m.alpha.clone(),
            a: m.a.clone(),
            b: m.b.clone(),
            nu: m.nu,
            tau: m.tau,
            theta: m.theta,
            nus: m.nus.clone(),
            ells: m.ells.clone(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ranges_expand() {
        assert_eq!(parse_list("x", "-1:1:3, 5").unwrap(), vec![-1.0, 0.0, 1.0, 5.0]);
        assert!(parse_list("x", "1:2").is_err());
        assert!(parse_list("x", "nan").is_err());
    }

    #[test]
    fn config_file_sections() {
        let f = Flags::from_config_str("# demo\n[model]\nkind = oy\na = 0, 0.2\ntau = 1\n[mc]\nseed = 9\n").unwrap();
        assert_eq!(f.model.as_deref(), Some("oy"));
        assert_eq!(f.seed, Some(9));
        assert!(Flags::from_config_str("[model]\ncolour = red\n").is_err());
        assert!(Flags::from_config_str("[extras]\n").is_err());
        assert!(Flags::from_config_str("kind = oy\n").is_err());
    }

    #[test]
    fn flags_override_file() {
        let file = Flags::from_config_str("[model]\nkind = oy\ntau = 2\n").unwrap();
        let cli = Flags { tau: Some(3.0), a: Some("0".into()), ..Flags::default() };
        let cfg = RunConfig::resolve("laplace", &cli.or(file)).unwrap();
        assert_eq!(cfg.model.tau, Some(3.0));
        assert_eq!(cfg.model.kind, ModelKind::OY);
        assert_eq!(cfg.mc.samples, DEFAULT_SAMPLES);
    }

    #[test]
    fn scalars_broadcast() {
        let f = Flags {
            model: Some("loggamma".into()),
            n_columns: Some(3),
            alpha: Some("1".into()),
            a: Some("0".into()),
            n_particles: Some(2),
            ..Flags::default()
        };
        let cfg = RunConfig::resolve("laplace", &f).unwrap();
        assert_eq!(cfg.model.alpha, vec![1.0; 3]);
        assert_eq!(cfg.model.a, vec![0.0; 2]);
    }
}
