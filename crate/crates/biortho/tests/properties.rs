use std::f64::consts::PI;

use biortho::fredholm::{det_L_with, mu_value_with, DetOptions, SigmaSpec};
use biortho::kernels::{eval_L, KernelContext, KernelOptions};
use biortho::models::{make_symbol, ModelKind, ModelParams, ModelSymbol};
use biortho::quadrature::build_circle;
use biortho::samplers::{mc_laplace, sample_inverse_gamma, sample_oy_z, substream};
use biortho::specfun::{log_gamma, ComplexValue};
use proptest::prelude::*;
use statrs::distribution::{ContinuousCDF, Gamma};

fn c(re: f64, im: f64) -> ComplexValue {
    ComplexValue::new(re, im)
}

fn away_from_poles(x: f64, y: f64) -> bool {
    y.abs() > 1e-3 || x > 0.0 || (x - x.round()).abs() > 1e-3
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(10_000))]

    #[test]
    fn log_gamma_recurrence(x in -50.0f64..49.0, y in -200.0f64..200.0) {
        prop_assume!(away_from_poles(x, y) && away_from_poles(x + 1.0, y));
        let z = c(x, y);
        let lhs = log_gamma(z + 1.0).unwrap();
        let rhs = log_gamma(z).unwrap() + z.ln();
        // compare Γ(z+1) with zΓ(z) through the log, modulo 2πi
        let mut d = lhs - rhs;
        d.im -= 2.0 * PI * (d.im / (2.0 * PI)).round();
        prop_assert!(d.norm() < 1e-12, "z = {z}, log ratio {d}");
    }

    #[test]
    fn log_gamma_schwarz_reflection(x in -50.0f64..50.0, y in -200.0f64..200.0) {
        prop_assume!(away_from_poles(x, y));
        let z = c(x, y);
        let a = log_gamma(z.conj()).unwrap();
        let b = log_gamma(z).unwrap().conj();
        prop_assert!((a - b).norm() <= 1e-13 * b.norm().max(1.0));
    }
}

#[test]
fn stirling_modulus_ratio() {
    for x in [-3.5, 0.25, 0.9, 4.0] {
        for y in [100.0, -100.0] {
            let g = log_gamma(c(x, y)).unwrap().re.exp();
            let s = (2.0 * PI).sqrt() * f64::abs(y).powf(x - 0.5) * (-PI * f64::abs(y) / 2.0).exp();
            assert!((g / s - 1.0).abs() < 0.01, "x={x} y={y} ratio {}", g / s);
        }
    }
}

fn symbols() -> Vec<ModelSymbol> {
    let cases = [
        (ModelKind::LogGamma, ModelParams::log_gamma(&[1.0, 1.1, 1.2], &[0.0, 0.2])),
        (ModelKind::OY, ModelParams::oy(&[0.0, 0.3, 0.5], 1.0)),
        (ModelKind::Mixed, ModelParams::mixed(&[1.0, 1.5], &[0.0, 0.2], 1.0)),
        (ModelKind::LUEext, ModelParams::lue(&[0.0, 0.4], 1.0)),
        (ModelKind::GUEext, ModelParams::gue(&[0.0, 0.0, 1.0], 1.0)),
        (ModelKind::GLUEext, ModelParams::glue(&[0.0, 0.5], 1.0)),
        (ModelKind::GinibreProduct, ModelParams::ginibre(3, &[0.0, 1.0])),
        (ModelKind::MuttalibBorodinLUE, ModelParams::muttalib_borodin(2, 0.5, 2.0)),
        (ModelKind::TruncUnitaryProduct, ModelParams::trunc_unitary(3, &[0.0; 3], &[8.0; 3])),
    ];
    cases.iter().map(|(k, p)| make_symbol(*k, p).unwrap()).collect()
}

fn wrap(mut d: ComplexValue) -> ComplexValue {
    d.im -= 2.0 * PI * (d.im / (2.0 * PI)).round();
    d
}

#[test]
fn symbol_vanishes_linearly_at_simple_zeros() {
    for sym in symbols() {
        let z = &sym.zeros;
        let simple = |k: usize| z.iter().enumerate().all(|(j, a)| j == k || (a - z[k]).abs() > 1e-3);
        for k in (0..z.len()).filter(|&k| simple(k)) {
            let slope = |h: f64| sym.symbol(c(z[k] + h, 0.0)).unwrap().norm() / h;
            let (s1, s2) = (slope(1e-6), slope(1e-7));
            assert!(s1 > 0.0 && (s1 / s2 - 1.0).abs() < 1e-4, "{:?} zero {}: slopes {s1} {s2}", sym.kind, z[k]);
        }
    }
}

#[test]
fn symbol_is_real_on_conjugates() {
    for sym in symbols() {
        for z in [c(-0.3, 0.7), c(0.2, -2.5), c(-1.7, 4.0)] {
            let a = sym.log_symbol(z.conj()).unwrap();
            let b = sym.log_symbol(z).unwrap().conj();
            assert!(wrap(a - b).norm() < 1e-12 * b.norm().max(1.0), "{:?} at {z}", sym.kind);
        }
    }
}

#[test]
fn winding_number_counts_zeros() {
    for sym in symbols() {
        let circle = build_circle(c(sym.sigma_center, 0.0), sym.sigma_radius, 512, 1.0).unwrap();
        let h = 1e-5;
        let n = circle.integrate(|z| {
            let up = sym.log_symbol(z + h).unwrap();
            let down = sym.log_symbol(z - h).unwrap();
            wrap(up - down) / (2.0 * h)
        }) / c(0.0, 2.0 * PI);
        let nn = sym.n_particles() as f64;
        assert!((n - nn).norm() < 1e-6 * nn, "{:?}: winding {n}", sym.kind);
    }
}

fn kernel_at(sym: &ModelSymbol, opts: KernelOptions, pts: &[(f64, f64)]) -> Vec<f64> {
    let ctx = KernelContext::with_options(sym, opts).unwrap();
    pts.iter().map(|&(x, y)| eval_L(&ctx, x, y).unwrap()).collect()
}

const PTS: [(f64, f64); 4] = [(-0.5, 0.3), (0.0, 0.0), (1.0, -0.7), (0.4, 1.2)];

#[test]
fn doubling_contour_nodes_is_self_consistent() {
    for sym in symbols() {
        // at the default 1e-13 the gamma-ratio symbols sit on their round-off floor
        let opts = KernelOptions { tol: 1e-10, ..KernelOptions::default() };
        let coarse = KernelContext::with_options(&sym, opts).unwrap();
        let tail = coarse.line_contour.tail_bound.max(coarse.sigma_contour.tail_bound).max(opts.tol);
        let a = kernel_at(&sym, opts, &PTS);
        let b = kernel_at(&sym, KernelOptions { refine: 2, ..opts }, &PTS);
        let scale = a.iter().fold(1.0f64, |m, v| m.max(v.abs()));
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 10.0 * tail * scale, "{:?}: {x} vs {y}, tail {tail}", sym.kind);
        }
    }
}

#[test]
fn kernel_is_independent_of_line_abscissa() {
    let cases = [
        (ModelKind::OY, ModelParams::oy(&[0.0, 0.3], 1.0), 0.9),
        (ModelKind::GUEext, ModelParams::gue(&[0.0, 0.5], 1.0), 1.4),
        (ModelKind::LogGamma, ModelParams::log_gamma(&[1.0, 1.1, 1.2], &[0.0, 0.2]), 0.75),
        (ModelKind::Mixed, ModelParams::mixed(&[1.0, 1.5], &[0.0, 0.2], 1.0), 0.8),
    ];
    for (kind, p, c2) in cases {
        let sym = make_symbol(kind, &p).unwrap();
        let shifted = sym.with_line_abscissa(c2).unwrap();
        let a = kernel_at(&sym, KernelOptions::default(), &PTS);
        let b = kernel_at(&shifted, KernelOptions::default(), &PTS);
        let scale = a.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-8 * scale, "{kind}: {x} vs {y}");
        }
    }
}

fn polymer(which: u8, shift: f64) -> ModelSymbol {
    match which {
        0 => make_symbol(ModelKind::OY, &ModelParams::oy(&[0.0, shift], 1.0)).unwrap(),
        1 => make_symbol(ModelKind::LogGamma, &ModelParams::log_gamma(&[1.0, 1.0, 1.0], &[0.0, shift])).unwrap(),
        _ => make_symbol(ModelKind::GUEext, &ModelParams::gue(&[0.0, shift], 1.0)).unwrap(),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn mu_is_monotone_and_bounded(which in 0u8..3, shift in 0.05f64..0.4, t0 in -3.0f64..2.0) {
        let sym = polymer(which, shift);
        let opts = DetOptions::default();
        let mut prev = f64::INFINITY;
        for k in 0..5 {
            let t = t0 + 0.5 * k as f64;
            let v = mu_value_with(&sym, &SigmaSpec::fermi(t), &opts).unwrap().1.value;
            prop_assert!((-1e-8..=1.0 + 1e-8).contains(&v), "value {v}");
            prop_assert!(v <= prev + 1e-8, "μ increased: {prev} → {v} at t={t}");
            prev = v;
        }
    }

    #[test]
    fn indicator_edges(which in 0u8..3, shift in 0.05f64..0.4) {
        let sym = polymer(which, shift);
        let opts = DetOptions::default();
        let low = det_L_with(&sym, &SigmaSpec::indicator(-60.0), &opts).unwrap().value;
        let high = det_L_with(&sym, &SigmaSpec::indicator(60.0), &opts).unwrap().value;
        // σ = 1 on (s, ∞): s far right kills nothing, s far left kills everything
        prop_assert!((high - 1.0).abs() < 1e-8, "s above support: {high}");
        prop_assert!(low.abs() < 1e-6, "s below support: {low}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(4))]

    #[test]
    fn refinement_error_bounds_further_doubling(which in 0u8..3, shift in 0.05f64..0.4, t in -2.0f64..2.0) {
        let sym = polymer(which, shift);
        let base = DetOptions::default();
        let r = det_L_with(&sym, &SigmaSpec::fermi(t), &base).unwrap();
        let finer = det_L_with(&sym, &SigmaSpec::fermi(t), &DetOptions { refine: 2, ..base }).unwrap();
        // dense LU round-off grows with the Nyström size and sits near 1e-13 here
        prop_assert!((finer.value - r.value).abs() <= r.refinement_error.max(1e-12));
    }
}

#[test]
fn sample_streams_ignore_worker_count() {
    let p = ModelParams::log_gamma(&[1.0, 1.2], &[0.0, 0.1]);
    let run = |threads: usize| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| mc_laplace(ModelKind::LogGamma, &p, 0.0, 5000, 99, None).unwrap())
    };
    let (a, b) = (run(1), run(3));
    assert_eq!(a.mean.to_bits(), b.mean.to_bits());
    assert_eq!(a.stderr.to_bits(), b.stderr.to_bits());
}

#[test]
fn inverse_gamma_kolmogorov_smirnov() {
    let n = 100_000;
    for (i, gamma) in [1.5, 3.0, 10.0].into_iter().enumerate() {
        let g = Gamma::new(gamma, 1.0).unwrap();
        let mut rng = substream(7, i as u64);
        let mut xs: Vec<f64> = (0..n).map(|_| sample_inverse_gamma(gamma, &mut rng)).collect();
        xs.sort_by(f64::total_cmp);
        let mut d: f64 = 0.0;
        for (k, x) in xs.iter().enumerate() {
            // P(1/G ≤ x) = P(G ≥ 1/x)
            let f = 1.0 - g.cdf(1.0 / x);
            d = d.max((f - k as f64 / n as f64).abs()).max(((k + 1) as f64 / n as f64 - f).abs());
        }
        assert!(d < 1.63 / (n as f64).sqrt(), "γ={gamma}: KS distance {d}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn partition_functions_are_positive(seed in any::<u64>(), a1 in 0.0f64..0.5, tau in 0.1f64..3.0) {
        let mut rng = substream(seed, 0);
        let z = sample_oy_z(&[0.0, a1], tau, 200, &mut rng).unwrap();
        prop_assert!(z > 0.0 && z.is_finite());
        let lg = biortho::samplers::sample_loggamma_z(&[1.0, 1.3], &[0.0, a1], &mut rng).unwrap();
        prop_assert!(lg > 0.0 && lg.is_finite());
    }
}

#[test]
fn oy_discretization_is_converged() {
    let p = ModelParams::oy(&[0.0, 0.2], 1.0);
    let a = mc_laplace(ModelKind::OY, &p, 0.0, 20_000, 5, Some(2000)).unwrap();
    let b = mc_laplace(ModelKind::OY, &p, 0.0, 20_000, 5, Some(4000)).unwrap();
    assert!((a.mean - b.mean).abs() < a.stderr.max(1e-3), "{} vs {}", a.mean, b.mean);
}
