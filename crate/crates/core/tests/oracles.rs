mod common;

use common::{integrate, rel, tabulations};
use proptest::prelude::*;
use proptest::test_runner::{Config, TestRunner};
use topshares::maxent::{
    auxiliary, build_observed_density, kl_gradient, kl_hessian, kl_objective, recover_thresholds,
    solve_rate, MaxEntDensity, Piece,
};
use topshares::{cumulate, IncomeBracket, Tabulation};

/// Quadrature window for a piece: its bounds, with the open top cut where
/// the density has decayed by e^-60.
fn window(p: &Piece) -> (f64, f64) {
    if p.is_unbounded() {
        (p.lower, p.lower + 60.0 / -p.rate)
    } else {
        (p.lower, p.upper)
    }
}

fn panels(p: &Piece, a: f64, b: f64) -> usize {
    ((p.rate.abs() * (b - a)).ceil() as usize).clamp(16, 4000)
}

/// `∫_y^∞ g(u) pdf(u) du` by quadrature, piece by piece.
fn tail_integral(d: &MaxEntDensity, y: f64, g: impl Fn(f64) -> f64) -> f64 {
    d.pieces()
        .iter()
        .filter(|p| p.mass > 0.0)
        .map(|p| {
            let (a, b) = window(p);
            let a = a.max(y);
            if a >= b {
                return 0.0;
            }
            integrate(|u| g(u) * d.pdf(u), a, b, panels(p, a, b))
        })
        .sum()
}

#[test]
fn tail_mass_and_top_income_match_quadrature() {
    let mut runner = TestRunner::new(Config::with_cases(40));
    runner
        .run(&(tabulations(), 0.0f64..1.0), |(tab, u)| {
            let stats = cumulate(&tab).unwrap();
            let d = build_observed_density(&stats).unwrap();
            let p = stats.covered_fractile() * (0.02 + 0.96 * u);
            let cut = d.quantile_top(p).unwrap();
            let mass = tail_integral(&d, cut, |_| 1.0);
            prop_assert!(rel(mass, p) < 1e-9, "mass {} vs {}", mass, p);
            prop_assert!(rel(d.tail_mass(cut), p) < 1e-11);
            let income = stats.population as f64 * tail_integral(&d, cut, |u| u);
            let top = d.top_income(p).unwrap();
            prop_assert!(rel(top, income) < 1e-9, "income {} vs {}", top, income);
            Ok(())
        })
        .unwrap();
}

/// `J(λ) = λ y - ln ∫ e^(λ t) dt` with the integral by quadrature, shifted
/// to the heavier end so it never overflows.
fn auxiliary_by_quadrature(lower: f64, upper: f64, mean: f64, rate: f64) -> f64 {
    let anchor = if rate > 0.0 { upper } else { lower };
    let z = integrate(|t| (rate * (t - anchor)).exp(), lower, upper, 400);
    rate * (mean - anchor) - z.ln()
}

#[test]
fn rate_maximizes_auxiliary_function() {
    let cases = [
        (0.0, 1.0, 0.3),
        (0.0, 1.0, 0.5),
        (10.0, 20.0, 17.5),
        (1_000.0, 2_000.0, 1_050.0),
        (5e5, 1e6, 7.9e5),
        (2.0, 3.0, 2.999),
    ];
    for (lo, hi, y) in cases {
        let width: f64 = hi - lo;
        // golden-section search on the tilt x = λ Δ
        let f = |x: f64| auxiliary_by_quadrature(lo, hi, y, x / width);
        let (mut a, mut b) = (-2_000.0, 2_000.0);
        let g = (5f64.sqrt() - 1.0) / 2.0;
        for _ in 0..200 {
            let c = b - g * (b - a);
            let d = a + g * (b - a);
            if f(c) > f(d) {
                b = d;
            } else {
                a = c;
            }
        }
        let x_brute = 0.5 * (a + b);
        let rate = solve_rate(lo, hi, y).unwrap();
        let x = rate * width;
        assert!(
            (x - x_brute).abs() < 1e-5 * x_brute.abs().max(1.0),
            "{lo} {hi} {y}: {x} vs {x_brute}"
        );
        let j = auxiliary(lo, hi, y, rate);
        assert!(j >= f(x_brute) - 1e-12, "{lo} {hi} {y}");
        assert!((j - f(x)).abs() < 1e-10, "closed form vs quadrature at {x}");
    }
}

#[test]
fn open_top_rate_maximizes_auxiliary_function() {
    let (lo, y) = (4_000_000.0, 7_480_000.0);
    let rate = solve_rate(lo, f64::INFINITY, y).unwrap();
    let j = auxiliary(lo, f64::INFINITY, y, rate);
    for scale in [0.5, 0.9, 0.99, 1.01, 1.1, 2.0] {
        assert!(auxiliary(lo, f64::INFINITY, y, rate * scale) < j);
    }
    assert!((j - (-1.0 - (y - lo).ln())).abs() < 1e-12);
}

/// Continuous piecewise-exponential law: density `f(t_1) e^(λ_k (y - t_{k-1}))`
/// glued so that it is continuous at every threshold, with total mass `total`.
fn continuous_truth(thresholds: &[f64], rates: &[f64], total: f64) -> Tabulation {
    let mut edge = 1.0;
    let mut masses = Vec::new();
    let mut means = Vec::new();
    for k in 0..thresholds.len() {
        let lower = thresholds[k];
        let lam = rates[k];
        if k == 0 {
            masses.push(edge / -lam);
            means.push(lower - 1.0 / lam);
        } else {
            let width = thresholds[k - 1] - lower;
            let x = lam * width;
            // density at the upper edge is `edge`; mass of e^(λ(y - upper)) on the bracket
            masses.push(edge * -(-x).exp_m1() / lam);
            means.push(lower + width * (1.0 / -(-x).exp_m1() - 1.0 / x));
            edge *= (-x).exp();
        }
    }
    let scale = total / masses.iter().sum::<f64>();
    let population = 1_000_000_000_000u64;
    let brackets = thresholds
        .iter()
        .zip(masses.iter().zip(&means))
        .map(|(&t, (&m, &y))| {
            let count = (m * scale * population as f64).round() as u64;
            IncomeBracket::new(t, count, count as f64 * y)
        })
        .collect();
    Tabulation::try_new(0, brackets, population, 1e18, 1.0).unwrap()
}

#[test]
fn recovers_thresholds_of_a_continuous_law() {
    let truths: [(&[f64], &[f64]); 4] = [
        (&[100.0, 50.0], &[-0.05, -0.02]),
        (&[400.0, 120.0, 60.0, 20.0], &[-0.01, -0.015, -0.02, 0.01]),
        (
            &[1e6, 3e5, 1e5, 4e4, 2e4],
            &[-2e-6, -4e-6, -1e-5, -3e-5, -5e-5],
        ),
        (&[30.0, 20.0, 10.0], &[-0.1, 0.05, 0.2]),
    ];
    for (t, rates) in truths {
        let stats = cumulate(&continuous_truth(t, rates, 0.3)).unwrap();
        let sol = recover_thresholds(&stats, *t.last().unwrap()).unwrap();
        for (got, want) in sol.thresholds.iter().zip(t) {
            assert!(rel(*got, *want) < 1e-6, "{got} vs {want}");
        }
        let density = sol.density(&stats).unwrap();
        // the recovered density has no jumps
        for w in density.pieces().windows(2) {
            let jump = w[0].lower_edge_density() - w[1].upper_edge_density();
            assert!(jump.abs() < 1e-6 * w[0].lower_edge_density(), "{jump}");
        }
    }
}

fn recovery_problem() -> (topshares::CumulativeStats, Vec<f64>) {
    let stats = cumulate(&continuous_truth(
        &[400.0, 120.0, 60.0, 20.0],
        &[-0.01, -0.015, -0.02, 0.01],
        0.3,
    ))
    .unwrap();
    // a feasible point away from the optimum
    let means: Vec<f64> = stats.brackets.iter().map(|b| b.mean.unwrap()).collect();
    let mut t: Vec<f64> = (0..3)
        .map(|j| 0.3 * means[j] + 0.7 * means[j + 1])
        .collect();
    t.push(20.0);
    (stats, t)
}

#[test]
fn gradient_matches_finite_differences() {
    let (stats, t) = recovery_problem();
    let g = kl_gradient(&stats, &t).unwrap();
    assert_eq!(g.len(), 3);
    for j in 0..3 {
        let h = 1e-5 * t[j];
        let (mut up, mut down) = (t.clone(), t.clone());
        up[j] += h;
        down[j] -= h;
        let fd =
            (kl_objective(&stats, &up).unwrap() - kl_objective(&stats, &down).unwrap()) / (2.0 * h);
        assert!(
            (g[j] - fd).abs() < 1e-6 * g[j].abs().max(1e-6),
            "{j}: {} vs {fd}",
            g[j]
        );
    }
}

#[test]
fn hessian_matches_finite_differences() {
    let (stats, t) = recovery_problem();
    let (diag, off) = kl_hessian(&stats, &t).unwrap();
    assert_eq!((diag.len(), off.len()), (3, 2));
    for j in 0..3 {
        let h = 1e-5 * t[j];
        let (mut up, mut down) = (t.clone(), t.clone());
        up[j] += h;
        down[j] -= h;
        let gu = kl_gradient(&stats, &up).unwrap();
        let gd = kl_gradient(&stats, &down).unwrap();
        let column: Vec<f64> = gu
            .iter()
            .zip(&gd)
            .map(|(a, b)| (a - b) / (2.0 * h))
            .collect();
        let scale = diag[j].abs();
        assert!((column[j] - diag[j]).abs() < 1e-5 * scale, "diag {j}");
        if j + 1 < 3 {
            assert!((column[j + 1] - off[j]).abs() < 1e-5 * scale, "off {j}");
        }
        if j >= 2 {
            assert!(column[j - 2].abs() < 1e-8 * scale, "not tridiagonal at {j}");
        }
    }
}
