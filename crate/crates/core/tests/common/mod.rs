#![allow(dead_code)]

use proptest::prelude::*;
use topshares::{IncomeBracket, Tabulation};

/// Gauss-Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> Vec<(f64, f64)> {
    (0..n)
        .map(|i| {
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (mut p0, mut p1) = (1.0, x);
                for k in 2..=n {
                    let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                    p0 = p1;
                    p1 = p2;
                }
                dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
                let step = p1 / dp;
                x -= step;
                if step.abs() < 1e-16 {
                    break;
                }
            }
            (x, 2.0 / ((1.0 - x * x) * dp * dp))
        })
        .collect()
}

/// Composite Gauss-Legendre on `panels` equal panels of `[a, b]`.
pub fn integrate(f: impl Fn(f64) -> f64, a: f64, b: f64, panels: usize) -> f64 {
    let rule = gauss_legendre(20);
    let h = (b - a) / panels as f64;
    (0..panels)
        .map(|i| {
            let mid = a + h * (i as f64 + 0.5);
            0.5 * h
                * rule
                    .iter()
                    .map(|&(x, w)| w * f(mid + 0.5 * h * x))
                    .sum::<f64>()
        })
        .sum()
}

pub fn rel(a: f64, b: f64) -> f64 {
    if a == b {
        0.0
    } else {
        ((a - b) / b).abs()
    }
}

/// Valid tabulations: up to 20 brackets, means anywhere strictly inside.
pub fn tabulations() -> impl Strategy<Value = Tabulation> {
    (
        100.0f64..50_000.0,
        1.05f64..4.0,
        prop::collection::vec((1.05f64..3.0, 0.001f64..0.999, 1u64..20_000), 1..20),
        1u64..30,
        1u64..50_000,
        1.1f64..5.0,
    )
        .prop_map(
            |(lowest, top_ratio, rows, pop_mult, top_count, total_mult)| {
                let mut thresholds = vec![lowest];
                for &(ratio, _, _) in &rows {
                    let last = *thresholds.last().unwrap();
                    thresholds.push(last * ratio);
                }
                thresholds.reverse();
                let mut brackets = vec![IncomeBracket::new(
                    thresholds[0],
                    top_count,
                    top_count as f64 * thresholds[0] * top_ratio,
                )];
                for (k, &(_, r, count)) in rows.iter().enumerate() {
                    let (lower, upper) = (thresholds[k + 1], thresholds[k]);
                    let mean = lower + r * (upper - lower);
                    brackets.push(IncomeBracket::new(lower, count, count as f64 * mean));
                }
                let filers: u64 = brackets.iter().map(|b| b.count).sum();
                let income: f64 = brackets.iter().map(|b| b.income_sum).sum();
                Tabulation::new(2000, brackets, filers * pop_mult, income * total_mult, 1.0)
            },
        )
}
