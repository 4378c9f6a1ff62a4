//! Numerical residuals of the structural identities of L_N: trace,
//! reproducing property and biorthogonality of the ψ_m.

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::fredholm::{domain_lo, grid_from, scan_support, DetOptions};
use crate::kernels::KernelContext;
use crate::models::{ModelSymbol, ZeroStructure};
use crate::quadrature::RealGrid;

/// One checked identity.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CheckResult {
    pub name: String,
    pub residual: f64,
    pub tolerance: f64,
    pub passed: bool,
}

impl CheckResult {
    pub fn new(name: impl Into<String>, residual: f64, tolerance: f64) -> CheckResult {
        CheckResult { name: name.into(), residual, tolerance, passed: residual.is_finite() && residual < tolerance }
    }
}

fn grid_for<F>(sym: &ModelSymbol, opts: &DetOptions, weight: F) -> Result<(RealGrid, KernelContext)>
where
    F: Fn(&KernelContext, &[f64]) -> Result<Vec<f64>>,
{
    let (lo, hi) = scan_support(sym, opts, domain_lo(sym), weight)?
        .ok_or_else(|| Error::Grid("kernel vanishes on the scan window".into()))?;
    let grid = grid_from(lo, hi, opts)?;
    let ext = grid.support.0.abs().max(grid.support.1.abs());
    let ctx = KernelContext::with_options(sym, opts.kernel_options(ext))?;
    Ok((grid, ctx))
}

fn diagonal_grid(sym: &ModelSymbol, opts: &DetOptions) -> Result<(RealGrid, KernelContext)> {
    grid_for(sym, opts, |ctx, xs| ctx.l_diagonal(xs))
}

/// ∫ L_N(x, x) dx over the support of the kernel.
pub fn trace_integral(sym: &ModelSymbol, opts: &DetOptions) -> Result<f64> {
    let (grid, ctx) = diagonal_grid(sym, opts)?;
    let d = ctx.l_diagonal(&grid.points)?;
    Ok(grid.weights.iter().zip(&d).map(|(w, v)| w * v).sum())
}

/// max |∫L(x,y)L(y,x′)dy − L(x,x′)| / max |L(x,x′)| over a 3×3 grid of
/// test points inside the support.
pub fn reproducing_residual(sym: &ModelSymbol, opts: &DetOptions) -> Result<f64> {
    let (grid, ctx) = diagonal_grid(sym, opts)?;
    let (lo, hi) = grid.support;
    let tests: Vec<f64> = [0.3, 0.45, 0.6].iter().map(|f| lo + f * (hi - lo)).collect();
    let left = ctx.l_matrix(&tests, &grid.points)?;
    let right = ctx.l_matrix(&grid.points, &tests)?;
    let direct = ctx.l_matrix(&tests, &tests)?;
    let mut worst: f64 = 0.0;
    let mut scale: f64 = 0.0;
    for i in 0..tests.len() {
        for j in 0..tests.len() {
            let mut acc = 0.0;
            for (k, w) in grid.weights.iter().enumerate() {
                acc += left.get(i, k) * w * right.get(k, j);
            }
            let d = direct.get(i, j);
            worst = worst.max((acc - d).abs());
            scale = scale.max(d.abs());
        }
    }
    Ok(worst / scale.max(f64::MIN_POSITIVE))
}

/// B_{mk} = ∫ e^{a_m x} ψ_k(e^x) dx; the identity for distinct zeros.
pub fn biorthogonality_matrix(sym: &ModelSymbol, opts: &DetOptions) -> Result<DMatrix<f64>> {
    if sym.zero_structure() != ZeroStructure::Distinct {
        return Err(Error::Confluence(format!("zeros {:?} are not distinct", sym.zeros)));
    }
    let zeros = sym.zeros.clone();
    let (grid, ctx) = grid_for(sym, opts, |ctx, xs| {
        let p = ctx.psi_matrix(xs)?;
        Ok((0..xs.len())
            .map(|i| {
                let big = p.column(i).amax();
                zeros.iter().map(|a| (a * xs[i]).exp() * big).fold(0.0, f64::max)
            })
            .collect())
    })?;
    let p = ctx.psi_matrix(&grid.points)?;
    let n = zeros.len();
    Ok(DMatrix::from_fn(n, n, |m, k| {
        grid.points
            .iter()
            .zip(&grid.weights)
            .enumerate()
            .map(|(i, (x, w))| w * (zeros[m] * x).exp() * p[(k, i)])
            .sum()
    }))
}

/// ‖B − I‖_max.
pub fn biorthogonality_residual(sym: &ModelSymbol, opts: &DetOptions) -> Result<f64> {
    let b = biorthogonality_matrix(sym, opts)?;
    let n = b.nrows();
    Ok((b - DMatrix::identity(n, n)).amax())
}

/// Trace, reproducing and (for distinct zeros) biorthogonality checks with
/// the default tolerances.
pub fn invariant_suite(sym: &ModelSymbol, opts: &DetOptions) -> Vec<(CheckResult, Option<Error>)> {
    let mut out = Vec::new();
    let n = sym.n_particles() as f64;
    let mut push = |name: &str, tol: f64, r: Result<f64>| match r {
        Ok(v) => out.push((CheckResult::new(name, v, tol), None)),
        Err(e) => out.push((CheckResult::new(name, f64::NAN, tol), Some(e))),
    };
    push("trace", 1e-6, trace_integral(sym, opts).map(|t| (t - n).abs()));
    push("reproducing", 1e-6, reproducing_residual(sym, opts));
    if sym.zero_structure() == ZeroStructure::Distinct {
        push("biorthogonality", 1e-8, biorthogonality_residual(sym, opts));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{make_symbol, ModelKind, ModelParams};

    #[test]
    fn gue_single_particle() {
        let sym = make_symbol(ModelKind::GUEext, &ModelParams::gue(&[0.0], 1.0)).unwrap();
        let opts = DetOptions::default();
        assert!((trace_integral(&sym, &opts).unwrap() - 1.0).abs() < 1e-10);
        assert!(reproducing_residual(&sym, &opts).unwrap() < 1e-10);
        assert!(biorthogonality_residual(&sym, &opts).unwrap() < 1e-10);
    }
}
