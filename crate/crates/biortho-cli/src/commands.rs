//! The subcommands. Each appends records and reports whether every check
//! it runs passed; library errors propagate to the exit-code mapping.

use biortho::fredholm::{
    gap_probability_with, laplace_transform_with, laplace_value_with, log_derivative, mu_sigma_with, mu_value_with,
    zero_temperature_sweep_with, DeformedKernel, DetOptions, FredholmReport,
};
use biortho::invariants::invariant_suite;
use biortho::kernels::{eval_L_hat, KernelContext, KernelOptions};
use biortho::models::{make_symbol, ModelSymbol};
use biortho::samplers::{mc_gap, mc_laplace};
use biortho::{Error, Result, SigmaSpec};
use serde_json::Value;

use crate::config::{Emit, RunConfig, SigmaKind};
use crate::output::Record;
use crate::record;

/// Central-difference step for the log-derivative cross-check.
pub const FD_STEP: f64 = 1e-3;
/// Below this μ the log-derivative is reported as unavailable.
pub const MU_FLOOR: f64 = 1e-10;
pub const CONSENSUS_TOL: f64 = 1e-6;
pub const LOG_DERIVATIVE_TOL: f64 = 1e-4;
pub const Z_LIMIT: f64 = 3.0;

fn det_options(cfg: &RunConfig) -> DetOptions {
    DetOptions {
        panel_width: cfg.numeric.panel_width,
        panel_nodes: cfg.numeric.nodes,
        refine: 1,
        tol: cfg.numeric.tol,
    }
}

fn symbol(cfg: &RunConfig) -> Result<ModelSymbol> {
    let sym = make_symbol(cfg.model.kind, &cfg.params())?;
    match cfg.model.line_abscissa {
        Some(c) => sym.with_line_abscissa(c),
        None => Ok(sym),
    }
}

fn base_sigma(cfg: &RunConfig) -> SigmaSpec {
    match cfg.sweep.sigma {
        SigmaKind::Fermi => SigmaSpec::fermi(0.0),
        SigmaKind::Indicator => SigmaSpec::indicator(0.0),
        SigmaKind::Zero => SigmaSpec::Zero,
    }
}

fn reasons(rep: &FredholmReport) -> Value {
    let f = &rep.flags;
    let mut m = serde_json::Map::new();
    for (name, r) in [("matrix", &f.reason_matrix), ("L", &f.reason_l), ("H", &f.reason_h), ("K", &f.reason_k)] {
        if let Some(r) = r {
            m.insert(name.into(), Value::from(r.clone()));
        }
    }
    for (name, e) in &rep.failures {
        m.insert(name.clone(), Value::from(e.clone()));
    }
    Value::Object(m)
}

fn mu_best(sym: &ModelSymbol, sigma: &SigmaSpec, opts: &DetOptions) -> Result<f64> {
    Ok(mu_value_with(sym, sigma, opts)?.1.value)
}

pub fn cmd_laplace(cfg: &RunConfig, out: &mut Vec<Record>) -> Result<bool> {
    let sym = symbol(cfg)?;
    let opts = det_options(cfg);
    let kind = cfg.model.kind;
    for &t in &cfg.sweep.t {
        let rep = if kind.is_polymer() {
            laplace_transform_with(kind, &cfg.params(), t, &opts)?
        } else {
            mu_sigma_with(&sym, &SigmaSpec::fermi(t), &opts)?
        };
        out.push(record! {
            "t" => t,
            "matrix_value" => rep.matrix_value(),
            "L_value" => rep.L_value(),
            "H_value" => rep.H_value(),
            "K_value" => rep.K_value(),
            "value" => rep.best(),
            "consensus" => rep.consensus,
            "flags" => serde_json::to_value(&rep.flags).unwrap(),
            "reasons" => reasons(&rep),
        });
    }
    Ok(true)
}

pub fn cmd_gap(cfg: &RunConfig, out: &mut Vec<Record>) -> Result<bool> {
    symbol(cfg)?;
    let opts = det_options(cfg);
    for &s in &cfg.sweep.t {
        let v = gap_probability_with(cfg.model.kind, &cfg.params(), s, &opts)?;
        out.push(record! { "s" => s, "value" => v.value, "refinement_error" => v.refinement_error });
    }
    Ok(true)
}

fn check_record(name: &str, t: Option<f64>, residual: Option<f64>, tol: f64, passed: bool, note: Option<String>) -> Record {
    record! {
        "check" => name,
        "t" => t,
        "residual" => residual.filter(|r| r.is_finite()),
        "tolerance" => tol,
        "passed" => passed,
        "note" => note,
    }
}

/// d/dt log μ by central differences, or `None` when μ is below the floor.
fn finite_difference(sym: &ModelSymbol, sigma: &SigmaSpec, t: f64, opts: &DetOptions) -> Result<Option<f64>> {
    let up = mu_best(sym, &sigma.shifted(t + FD_STEP), opts)?;
    let down = mu_best(sym, &sigma.shifted(t - FD_STEP), opts)?;
    if up.min(down) < MU_FLOOR {
        return Ok(None);
    }
    Ok(Some((up.ln() - down.ln()) / (2.0 * FD_STEP)))
}

fn relative_gap(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-12)
}

pub fn cmd_check(cfg: &RunConfig, out: &mut Vec<Record>) -> Result<bool> {
    let sym = symbol(cfg)?;
    let opts = det_options(cfg);
    let mut all = true;
    for (c, err) in invariant_suite(&sym, &opts) {
        all &= c.passed;
        let r = if c.residual.is_finite() { Some(c.residual) } else { None };
        out.push(check_record(&c.name, None, r, c.tolerance, c.passed, err.map(|e| e.to_string())));
    }
    let sigma = base_sigma(cfg);
    if matches!(sigma, SigmaSpec::Zero) {
        return Ok(all);
    }
    for &t in &cfg.sweep.t {
        let st = sigma.shifted(t);
        match mu_sigma_with(&sym, &st, &opts) {
            Ok(rep) if rep.values().len() < 2 => {
                out.push(check_record("consensus", Some(t), None, CONSENSUS_TOL, true, Some("single representation".into())));
            }
            Ok(rep) => {
                let ok = rep.consensus < CONSENSUS_TOL;
                all &= ok;
                out.push(check_record("consensus", Some(t), Some(rep.consensus), CONSENSUS_TOL, ok, None));
            }
            Err(e) => {
                all = false;
                out.push(check_record("consensus", Some(t), None, CONSENSUS_TOL, false, Some(e.to_string())));
            }
        }
        let ld = finite_difference(&sym, &sigma, t, &opts).and_then(|fd| match fd {
            Some(fd) => Ok(Some((fd, log_derivative(&sym, &sigma, t)?))),
            None => Ok(None),
        });
        match ld {
            Ok(Some((fd, v))) => {
                let r = relative_gap(fd, v);
                let ok = r < LOG_DERIVATIVE_TOL;
                all &= ok;
                out.push(check_record("log_derivative", Some(t), Some(r), LOG_DERIVATIVE_TOL, ok, None));
            }
            Ok(None) => {
                out.push(check_record("log_derivative", Some(t), None, LOG_DERIVATIVE_TOL, true, Some(format!("μ below {MU_FLOOR:e}"))));
            }
            Err(e) => {
                all = false;
                out.push(check_record("log_derivative", Some(t), None, LOG_DERIVATIVE_TOL, false, Some(e.to_string())));
            }
        }
    }
    Ok(all)
}

pub fn cmd_mc_compare(cfg: &RunConfig, out: &mut Vec<Record>) -> Result<bool> {
    if cfg.mc.samples < 1000 {
        return Err(Error::Validation(format!("samples must be at least 1000, got {}", cfg.mc.samples)));
    }
    let kind = cfg.model.kind;
    let params = cfg.params();
    symbol(cfg)?;
    let opts = det_options(cfg);
    let mut all = true;
    for &t in &cfg.sweep.t {
        let (fredholm, mc) = if kind.is_polymer() {
            let f = laplace_value_with(kind, &params, t, &opts)?.1.value;
            (f, mc_laplace(kind, &params, t, cfg.mc.samples, cfg.mc.seed, cfg.mc.steps)?)
        } else {
            let f = gap_probability_with(kind, &params, t, &opts)?.value;
            (f, mc_gap(kind, &params, t, cfg.mc.samples, cfg.mc.seed)?)
        };
        let z = mc.z_score(fredholm);
        let ok = z.abs() <= Z_LIMIT;
        all &= ok;
        out.push(record! {
            "t" => t,
            "fredholm" => fredholm,
            "mc_mean" => mc.mean,
            "mc_stderr" => mc.stderr,
            "z_score" => if z.is_finite() { Some(z) } else { None },
            "passed" => ok,
        });
    }
    Ok(all)
}

pub fn cmd_zerotemp(cfg: &RunConfig, out: &mut Vec<Record>) -> Result<bool> {
    let kind = cfg.model.kind;
    if !kind.is_polymer() {
        return Err(Error::Validation(format!("{kind} is not a polymer model")));
    }
    let mut all = true;
    for &t in &cfg.sweep.t {
        let rows = zero_temperature_sweep_with(kind, &cfg.params(), t, &cfg.sweep.temperatures, &det_options(cfg))?;
        let monotone = rows.windows(2).all(|w| w[1].difference < w[0].difference);
        let last = rows.last().map(|r| r.difference).unwrap_or(f64::NAN);
        let ok = monotone && last < cfg.sweep.threshold;
        all &= ok;
        for r in rows {
            out.push(record! {
                "t" => t,
                "T" => r.temperature,
                "polymer_value" => r.polymer_value,
                "limit_value" => r.limit_value,
                "difference" => r.difference,
                "monotone" => monotone,
                "passed" => ok,
            });
        }
    }
    Ok(all)
}

fn kernel_context(sym: &ModelSymbol, xs: &[f64], cfg: &RunConfig) -> Result<KernelContext> {
    let ext = xs.iter().fold(20.0f64, |m, x| m.max(x.abs()));
    KernelContext::with_options(sym, KernelOptions { tol: cfg.numeric.tol, x_extent: ext, ..KernelOptions::default() })
}

fn kernel_row(quantity: &str, m: Option<usize>, t: Option<f64>, x: f64, xp: Option<f64>, v: f64) -> Record {
    record! { "quantity" => quantity, "m" => m, "t" => t, "x" => x, "xp" => xp, "value" => v }
}

pub fn cmd_kernel(cfg: &RunConfig, out: &mut Vec<Record>) -> Result<bool> {
    let sym = symbol(cfg)?;
    let xs = &cfg.sweep.x;
    let xps = &cfg.sweep.xp;
    let all: Vec<f64> = xs.iter().chain(xps).map(|x| if cfg.sweep.emit == Emit::Lhat { x.ln() } else { *x }).collect();
    let ctx = kernel_context(&sym, &all, cfg)?;
    match cfg.sweep.emit {
        Emit::Kernel => {
            let l = ctx.l_matrix(xs, xps)?;
            for (i, &x) in xs.iter().enumerate() {
                for (j, &xp) in xps.iter().enumerate() {
                    out.push(kernel_row("L", None, None, x, Some(xp), l.get(i, j)));
                }
            }
        }
        Emit::Lhat => {
            for &s in xs {
                for &sp in xps {
                    out.push(kernel_row("L_hat", None, None, s, Some(sp), eval_L_hat(&ctx, s, sp)?));
                }
            }
        }
        Emit::Psi | Emit::Phi => {
            let (name, mat) = if cfg.sweep.emit == Emit::Psi {
                ("psi", ctx.psi_matrix(xs)?)
            } else {
                ("phi", ctx.phi_matrix(xs)?)
            };
            for m in 0..mat.nrows() {
                for (i, &x) in xs.iter().enumerate() {
                    out.push(kernel_row(name, Some(m + 1), None, x, None, mat[(m, i)]));
                }
            }
        }
        Emit::Kappa => {
            let sigma = base_sigma(cfg);
            let opts = det_options(cfg);
            for &t in &cfg.sweep.t {
                if matches!(sigma, SigmaSpec::Zero) {
                    for (&x, k) in xs.iter().zip(ctx.l_diagonal(xs)?) {
                        out.push(kernel_row("kappa", None, Some(t), x, None, k));
                    }
                    continue;
                }
                let dk = DeformedKernel::with_options(&sym, &sigma.shifted(t), &opts)?;
                for &x in xs {
                    out.push(kernel_row("kappa", None, Some(t), x, None, dk.kappa(x)?));
                }
            }
        }
    }
    Ok(true)
}

pub fn cmd_logderiv(cfg: &RunConfig, out: &mut Vec<Record>) -> Result<bool> {
    let sym = symbol(cfg)?;
    let sigma = base_sigma(cfg);
    let opts = det_options(cfg);
    for &t in &cfg.sweep.t {
        let mu = if matches!(sigma, SigmaSpec::Zero) { 1.0 } else { mu_best(&sym, &sigma.shifted(t), &opts)? };
        let (ld, fd) = if mu < MU_FLOOR {
            (None, None)
        } else {
            (Some(log_derivative(&sym, &sigma, t)?), finite_difference(&sym, &sigma, t, &opts)?)
        };
        let rel = match (ld, fd) {
            (Some(a), Some(b)) => Some(relative_gap(a, b)),
            _ => None,
        };
        out.push(record! {
            "t" => t,
            "mu" => mu,
            "log_derivative" => ld,
            "finite_difference" => fd,
            "relative_error" => rel,
        });
    }
    Ok(true)
}
