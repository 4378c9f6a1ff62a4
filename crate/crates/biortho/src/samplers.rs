//! Monte Carlo oracles: polymer partition functions and matrix-model
//! eigenvalues, on reproducible per-sample random streams.

use crate::error::{Error, Result};
use crate::models::{ModelKind, ModelParams};
use nalgebra::{Complex, DMatrix};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;

pub type RngStream = ChaCha12Rng;

/// Independent stream number `index` of the generator seeded with `seed`.
pub fn substream(seed: u64, index: u64) -> RngStream {
    let mut r = ChaCha12Rng::seed_from_u64(seed);
    r.set_stream(index);
    r
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct McEstimate {
    pub mean: f64,
    pub stderr: f64,
    pub n_samples: usize,
    pub seed: u64,
}

impl McEstimate {
    /// Mean and standard error of the mean, with pairwise summation.
    pub fn from_samples(xs: &[f64], seed: u64) -> McEstimate {
        let n = xs.len();
        let mean = pairwise_sum(xs) / n as f64;
        let dev: Vec<f64> = xs.iter().map(|x| (x - mean) * (x - mean)).collect();
        let var = if n > 1 { pairwise_sum(&dev) / (n - 1) as f64 } else { 0.0 };
        McEstimate { mean, stderr: (var / n as f64).sqrt(), n_samples: n, seed }
    }

    /// (value − mean)/stderr, guarding a zero standard error.
    pub fn z_score(&self, value: f64) -> f64 {
        (value - self.mean) / self.stderr.max(1e-300)
    }
}

pub fn pairwise_sum(xs: &[f64]) -> f64 {
    if xs.len() <= 32 {
        return xs.iter().sum();
    }
    let (a, b) = xs.split_at(xs.len() / 2);
    pairwise_sum(a) + pairwise_sum(b)
}

fn normal<R: Rng>(rng: &mut R) -> f64 {
    rng.sample(StandardNormal)
}

/// Gamma(shape, 1) by Marsaglia–Tsang, boosted for shape < 1.
pub fn sample_gamma<R: Rng>(shape: f64, rng: &mut R) -> f64 {
    assert!(shape > 0.0);
    if shape < 1.0 {
        let u: f64 = rng.random();
        return sample_gamma(shape + 1.0, rng) * u.powf(1.0 / shape);
    }
    let d = shape - 1.0 / 3.0;
    let c = 1.0 / (9.0 * d).sqrt();
    loop {
        let (x, v) = loop {
            let x = normal(rng);
            let v = 1.0 + c * x;
            if v > 0.0 {
                break (x, v * v * v);
            }
        };
        let u: f64 = rng.random();
        if u < 1.0 - 0.0331 * x.powi(4) || u.ln() < 0.5 * x * x + d * (1.0 - v + v.ln()) {
            return d * v;
        }
    }
}

/// Inverse-gamma variate with shape γ.
pub fn sample_inverse_gamma<R: Rng>(gamma: f64, rng: &mut R) -> f64 {
    1.0 / sample_gamma(gamma, rng)
}

fn log_add(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let m = a.max(b);
    m + ((a - m).exp() + (b - m).exp()).ln()
}

/// log Z(j, k) for j ≤ n columns and k ≤ N rows, row-major over k.
fn loggamma_table<R: Rng>(alpha: &[f64], a: &[f64], rng: &mut R) -> Vec<Vec<f64>> {
    let n = alpha.len();
    let nn = a.len();
    let mut z = vec![vec![f64::NEG_INFINITY; n]; nn];
    for k in 0..nn {
        for j in 0..n {
            let ld = -sample_gamma(alpha[j] - a[k], rng).ln();
            let prev = match (j, k) {
                (0, 0) => 0.0,
                (0, _) => z[k - 1][j],
                (_, 0) => z[k][j - 1],
                _ => log_add(z[k - 1][j], z[k][j - 1]),
            };
            z[k][j] = ld + prev;
        }
    }
    z
}

fn check_weights(alpha: &[f64], a: &[f64]) -> Result<()> {
    if alpha.is_empty() || a.is_empty() {
        return Err(Error::Validation("alpha and a must be nonempty".into()));
    }
    for &x in alpha {
        for &y in a {
            if !(x - y > 0.0) {
                return Err(Error::Validation(format!("alpha_j − a_k = {} must be positive", x - y)));
            }
        }
    }
    Ok(())
}

/// log Z of the Log Gamma polymer on the n × N lattice with weights
/// d_{j,k} ~ Γ^{−1}(α_j − a_k).
pub fn sample_loggamma_log_z<R: Rng>(alpha: &[f64], a: &[f64], rng: &mut R) -> Result<f64> {
    check_weights(alpha, a)?;
    let z = loggamma_table(alpha, a, rng);
    Ok(z[a.len() - 1][alpha.len() - 1])
}

pub fn sample_loggamma_z<R: Rng>(alpha: &[f64], a: &[f64], rng: &mut R) -> Result<f64> {
    sample_loggamma_log_z(alpha, a, rng).map(f64::exp)
}

/// Standard Brownian motion on `n_steps` intervals of [0, τ], built
/// coarse to fine: n_steps = m·2^k is sampled as a random walk on m
/// intervals, then refined k times by Brownian-bridge midpoints. Paths for
/// n and 2n steps from the same stream therefore coincide on the coarse grid.
fn dyadic_path<R: Rng>(tau: f64, n_steps: usize, rng: &mut R) -> Vec<f64> {
    let (mut m, mut levels) = (n_steps, 0);
    while m % 2 == 0 {
        m /= 2;
        levels += 1;
    }
    let mut h = tau / m as f64;
    let mut w = Vec::with_capacity(n_steps + 1);
    w.push(0.0);
    let mut x = 0.0;
    for _ in 0..m {
        x += h.sqrt() * normal(rng);
        w.push(x);
    }
    for _ in 0..levels {
        let sd = 0.5 * h.sqrt();
        let mut finer = Vec::with_capacity(2 * w.len() - 1);
        for pair in w.windows(2) {
            finer.push(pair[0]);
            finer.push(0.5 * (pair[0] + pair[1]) + sd * normal(rng));
        }
        finer.push(*w.last().unwrap());
        w = finer;
        h *= 0.5;
    }
    w
}

/// Brownian paths B_i with drifts a_i on a grid of `n_steps` intervals over
/// [0, τ]. Each path has its own stream, seeded from `rng`.
fn brownian_paths<R: Rng>(a: &[f64], tau: f64, n_steps: usize, rng: &mut R) -> Vec<Vec<f64>> {
    let dt = tau / n_steps as f64;
    let seeds: Vec<u64> = a.iter().map(|_| rng.random()).collect();
    a.iter()
        .zip(seeds)
        .map(|(&drift, seed)| {
            let mut r = ChaCha12Rng::seed_from_u64(seed);
            let w = dyadic_path(tau, n_steps, &mut r);
            w.iter().enumerate().map(|(j, x)| x + drift * dt * j as f64).collect()
        })
        .collect()
}

/// F_N(τ) for F_k(s) = e^{B_k(s)}(c_k + ∫_0^s F_{k−1}(r)e^{−B_k(r)}dr), with
/// F_0 = 0 and trapezoid integration on the path grid.
fn semi_discrete(paths: &[Vec<f64>], init: &[f64], tau: f64) -> f64 {
    let n_steps = paths[0].len() - 1;
    let dt = tau / n_steps as f64;
    let mut prev: Vec<f64> = vec![0.0; n_steps + 1];
    for (k, b) in paths.iter().enumerate() {
        let mut cur = vec![0.0; n_steps + 1];
        let mut acc = init[k];
        cur[0] = b[0].exp() * acc;
        for j in 1..=n_steps {
            acc += 0.5 * dt * (prev[j - 1] * (-b[j - 1]).exp() + prev[j] * (-b[j]).exp());
            cur[j] = b[j].exp() * acc;
        }
        prev = cur;
    }
    prev[n_steps]
}

/// O'Connell–Yor partition function with N = len(a) Brownian motions of
/// drifts a_i on [0, τ].
pub fn sample_oy_z<R: Rng>(a: &[f64], tau: f64, n_steps: usize, rng: &mut R) -> Result<f64> {
    if a.is_empty() || !(tau > 0.0) {
        return Err(Error::Validation("OY needs N ≥ 1 and tau > 0".into()));
    }
    if n_steps < 100 {
        return Err(Error::Validation("n_steps must be at least 100".into()));
    }
    let paths = brownian_paths(a, tau, n_steps, rng);
    let mut init = vec![0.0; a.len()];
    init[0] = 1.0;
    Ok(semi_discrete(&paths, &init, tau))
}

/// Mixed polymer with n = N: a Log Gamma path from (1,1) to (N,k) followed
/// by a semi-discrete path on levels k..N, summed over k, all terms drawn
/// from one shared environment.
pub fn sample_mixed_z<R: Rng>(alpha: &[f64], a: &[f64], tau: f64, n_steps: usize, rng: &mut R) -> Result<f64> {
    check_weights(alpha, a)?;
    if alpha.len() != a.len() {
        return Err(Error::Validation("mixed polymer sampler needs n = N".into()));
    }
    if !(tau > 0.0) || n_steps < 100 {
        return Err(Error::Validation("mixed polymer needs tau > 0 and n_steps ≥ 100".into()));
    }
    let nn = a.len();
    let table = loggamma_table(alpha, a, rng);
    let paths = brownian_paths(a, tau, n_steps, rng);
    let init: Vec<f64> = (0..nn).map(|k| table[k][nn - 1].exp()).collect();
    Ok(semi_discrete(&paths, &init, tau))
}

/// Default OY grid: 2000·τ steps, at least 500.
pub fn default_steps(tau: f64) -> usize {
    ((2000.0 * tau).ceil() as usize).max(500)
}

/// E[exp(−e^t Z)] by plain Monte Carlo.
pub fn mc_laplace(
    kind: ModelKind,
    params: &ModelParams,
    t: f64,
    n_samples: usize,
    seed: u64,
    n_steps: Option<usize>,
) -> Result<McEstimate> {
    if n_samples < 1000 {
        return Err(Error::Validation("n_samples must be at least 1000".into()));
    }
    let steps = n_steps.unwrap_or_else(|| default_steps(params.tau.unwrap_or(1.0)));
    let p = params.clone();
    let draw = move |rng: &mut RngStream| -> Result<f64> {
        let log_z = match kind {
            ModelKind::LogGamma => sample_loggamma_log_z(&p.alpha, &p.a, rng)?,
            ModelKind::OY => sample_oy_z(&p.a, p.tau.unwrap_or(0.0), steps, rng)?.ln(),
            ModelKind::Mixed => sample_mixed_z(&p.alpha, &p.a, p.tau.unwrap_or(0.0), steps, rng)?.ln(),
            other => return Err(Error::Validation(format!("{other} is not a polymer model"))),
        };
        Ok((-(t + log_z).exp()).exp())
    };
    run(n_samples, seed, draw)
}

fn run<F>(n_samples: usize, seed: u64, draw: F) -> Result<McEstimate>
where
    F: Fn(&mut RngStream) -> Result<f64> + Sync,
{
    let xs: Vec<f64> = (0..n_samples as u64)
        .into_par_iter()
        .map(|i| draw(&mut substream(seed, i)))
        .collect::<Result<_>>()?;
    Ok(McEstimate::from_samples(&xs, seed))
}

fn complex_normal<R: Rng>(rng: &mut R) -> Complex<f64> {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    Complex::new(s * normal(rng), s * normal(rng))
}

fn gue_standard<R: Rng>(n: usize, rng: &mut R) -> DMatrix<Complex<f64>> {
    let mut g = DMatrix::from_element(n, n, Complex::new(0.0, 0.0));
    for i in 0..n {
        g[(i, i)] = Complex::new(normal(rng), 0.0);
        for j in i + 1..n {
            let z = complex_normal(rng);
            g[(i, j)] = z;
            g[(j, i)] = z.conj();
        }
    }
    g
}

fn hermitian_eigenvalues(m: DMatrix<Complex<f64>>) -> Vec<f64> {
    let mut ev: Vec<f64> = m.symmetric_eigenvalues().iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    ev
}

/// Eigenvalues of τA + √τ G with A = diag(a), G standard GUE.
pub fn sample_gue_ext<R: Rng>(a: &[f64], tau: f64, rng: &mut R) -> Vec<f64> {
    let n = a.len();
    let mut m = gue_standard(n, rng) * Complex::new(tau.sqrt(), 0.0);
    for i in 0..n {
        m[(i, i)] += Complex::new(tau * a[i], 0.0);
    }
    hermitian_eigenvalues(m)
}

fn wishart_ext<R: Rng>(b: &[f64], nu: usize, rng: &mut R) -> DMatrix<Complex<f64>> {
    let n = b.len();
    let x = DMatrix::from_fn(n, n + nu, |_, _| complex_normal(rng));
    let w = &x * x.adjoint();
    let s: Vec<f64> = b.iter().map(|bk| (1.0 / (1.0 - bk)).sqrt()).collect();
    DMatrix::from_fn(n, n, |i, j| w[(i, j)] * (s[i] * s[j]))
}

/// Eigenvalues of Σ^{1/2}XX*Σ^{1/2}, Σ = (I − diag(b))^{−1}, X complex
/// Gaussian of size N × (N+ν).
pub fn sample_lue_ext<R: Rng>(b: &[f64], nu: usize, rng: &mut R) -> Vec<f64> {
    hermitian_eigenvalues(wishart_ext(b, nu, rng))
}

/// Eigenvalues of M + √τ G with M from the LUE with external source (ν = 0).
pub fn sample_glue<R: Rng>(b: &[f64], tau: f64, rng: &mut R) -> Vec<f64> {
    let m = wishart_ext(b, 0, rng);
    let g = gue_standard(b.len(), rng) * Complex::new(tau.sqrt(), 0.0);
    hermitian_eigenvalues(m + g)
}

/// Squared singular values of a product of independent N × N complex
/// Ginibre matrices.
pub fn sample_ginibre_product<R: Rng>(n: usize, n_factors: usize, rng: &mut R) -> Vec<f64> {
    let mut p = DMatrix::<Complex<f64>>::identity(n, n);
    for _ in 0..n_factors {
        let g = DMatrix::from_fn(n, n, |_, _| complex_normal(rng));
        p = g * p;
    }
    hermitian_eigenvalues(p.adjoint() * p)
}

/// P(largest point ≤ s) by eigenvalue sampling. For the Ginibre product the
/// points are reciprocal squared singular values, so this is
/// P(smallest squared singular value ≥ 1/s).
pub fn mc_gap(kind: ModelKind, params: &ModelParams, s: f64, n_samples: usize, seed: u64) -> Result<McEstimate> {
    if n_samples < 1000 {
        return Err(Error::Validation("n_samples must be at least 1000".into()));
    }
    let p = params.clone();
    let nu = match kind {
        ModelKind::LUEext => {
            let nu = p.nu.unwrap_or(0.0);
            if nu < 0.0 || nu.fract() != 0.0 {
                return Err(Error::Validation("nu must be a nonnegative integer".into()));
            }
            nu as usize
        }
        _ => 0,
    };
    let draw = move |rng: &mut RngStream| -> Result<f64> {
        let hit = match kind {
            ModelKind::GUEext => *sample_gue_ext(&p.a, p.tau.unwrap_or(1.0), rng).last().unwrap() <= s,
            ModelKind::LUEext => *sample_lue_ext(&p.b, nu, rng).last().unwrap() <= s,
            ModelKind::GLUEext => *sample_glue(&p.b, p.tau.unwrap_or(1.0), rng).last().unwrap() <= s,
            ModelKind::GinibreProduct => {
                let ev = sample_ginibre_product(p.n_particles, p.nus.len().max(1), rng);
                s > 0.0 && ev[0] >= 1.0 / s
            }
            other => return Err(Error::Validation(format!("no eigenvalue sampler for {other}"))),
        };
        Ok(if hit { 1.0 } else { 0.0 })
    };
    run(n_samples, seed, draw)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn streams_are_reproducible_and_distinct() {
        let a: f64 = substream(7, 3).random();
        let b: f64 = substream(7, 3).random();
        let c: f64 = substream(7, 4).random();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn inverse_gamma_mean() {
        let xs: Vec<f64> = (0..100_000).map(|i| sample_inverse_gamma(3.0, &mut substream(1, i))).collect();
        let e = McEstimate::from_samples(&xs, 1);
        assert!(e.z_score(0.5).abs() < 3.0, "{e:?}");
    }

    #[test]
    fn single_site_loggamma() {
        let mut r1 = substream(5, 0);
        let mut r2 = substream(5, 0);
        let z = sample_loggamma_z(&[3.0], &[0.0], &mut r1).unwrap();
        let d = sample_inverse_gamma(3.0, &mut r2);
        assert!((z - d).abs() < 1e-12 * d);
    }

    #[test]
    fn one_level_oy_is_exponential_brownian() {
        let mut r = substream(9, 0);
        let z = sample_oy_z(&[0.0], 1.0, 200, &mut r).unwrap();
        let mut r = substream(9, 0);
        let b = brownian_paths(&[0.0], 1.0, 200, &mut r);
        assert!((z - b[0][200].exp()).abs() < 1e-12 * z);
    }

    #[test]
    fn refined_paths_share_the_coarse_grid() {
        let coarse = dyadic_path(2.0, 250, &mut substream(4, 0));
        let fine = dyadic_path(2.0, 500, &mut substream(4, 0));
        for j in 0..=250 {
            assert_eq!(coarse[j], fine[2 * j]);
        }
    }

    #[test]
    fn dyadic_increments_have_brownian_variance() {
        let n = 20_000;
        let (mut end, mut first) = (Vec::with_capacity(n), Vec::with_capacity(n));
        for i in 0..n {
            let w = dyadic_path(2.0, 12, &mut substream(6, i as u64));
            end.push(w[12] * w[12]);
            first.push(w[1] * w[1]);
        }
        let e = McEstimate::from_samples(&end, 6);
        let f = McEstimate::from_samples(&first, 6);
        assert!(e.z_score(2.0).abs() < 4.0, "{e:?}");
        assert!(f.z_score(2.0 / 12.0).abs() < 4.0, "{f:?}");
    }

    #[test]
    fn laplace_estimator_bounds() {
        let p = ModelParams::log_gamma(&[1.0], &[0.0]);
        let e = mc_laplace(ModelKind::LogGamma, &p, 0.0, 20_000, 3, None).unwrap();
        assert!(e.mean > 0.0 && e.mean < 1.0);
        // E[exp(−1/G)] with G ~ Exp(1) is 2K₁(2)
        assert!(e.z_score(0.279_731_763_633_044_85).abs() < 3.0, "{e:?}");
    }

    #[test]
    fn rejects_small_sample_counts() {
        let p = ModelParams::log_gamma(&[1.0], &[0.0]);
        assert!(mc_laplace(ModelKind::LogGamma, &p, 0.0, 10, 3, None).unwrap_err().is_validation());
    }
}
