mod common;

use common::{rel, tabulations};
use proptest::prelude::*;
use topshares::io::{parse_tabulations, write_tabulations, ColumnMapping};
use topshares::maxent::{build_observed_density, estimate_share_me, kernel};
use topshares::microbench::MicroSample;
use topshares::pareto::estimate_share_pi;
use topshares::{cumulate, validate, IncomeBracket, Tabulation, ViolationCode};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn cumulative_invariants(tab in tabulations()) {
        let stats = cumulate(&tab).unwrap();
        let n = tab.population() as f64;
        let mut prev = (0u64, 0.0f64, 0.0f64);
        for (b, raw) in stats.brackets.iter().zip(tab.brackets()) {
            prop_assert_eq!(b.cum_count, prev.0 + raw.count);
            prop_assert!(rel(b.cum_income, prev.1 + raw.income_sum) < 1e-14);
            prop_assert!(b.top_fractile > prev.2);
            prop_assert!(rel(b.top_fractile, b.cum_count as f64 / n) < 1e-15);
            prop_assert!(rel(b.mass, b.top_fractile - prev.2) < 1e-12);
            prop_assert!(b.mean_above >= b.threshold);
            prop_assert!(b.pareto_coefficient >= 1.0 && b.pareto_exponent > 1.0);
            prop_assert!(rel(b.pareto_exponent, b.pareto_coefficient / (b.pareto_coefficient - 1.0)) < 1e-12);
            prev = (b.cum_count, b.cum_income, b.top_fractile);
        }
    }

    #[test]
    fn both_methods_are_exact_at_tabulated_fractiles(tab in tabulations()) {
        let stats = cumulate(&tab).unwrap();
        for b in &stats.brackets {
            let share = b.cum_income / stats.total_income;
            let pi = estimate_share_pi(&tab, b.top_fractile).unwrap();
            prop_assert!(rel(pi.share, share) < 1e-12, "pi at k={}", b.k);
            prop_assert_eq!(pi.bracket, Some(b.k));
            let me = estimate_share_me(&tab, b.top_fractile).unwrap();
            prop_assert!(rel(me.share, share) < 1e-9, "me at k={}: {} vs {}", b.k, me.share, share);
        }
    }

    #[test]
    fn maxent_tail_mass_hits_every_tabulated_fractile(tab in tabulations()) {
        let stats = cumulate(&tab).unwrap();
        let d = build_observed_density(&stats).unwrap();
        for b in &stats.brackets {
            prop_assert!(rel(d.tail_mass(b.threshold), b.top_fractile) < 1e-11);
            prop_assert!(rel(d.quantile_top(b.top_fractile).unwrap(), b.threshold) < 1e-9);
        }
    }

    #[test]
    fn maxent_quantile_inverts_tail_mass(tab in tabulations(), u in 0.001f64..0.999) {
        let stats = cumulate(&tab).unwrap();
        let d = build_observed_density(&stats).unwrap();
        let p = stats.covered_fractile() * u;
        let y = d.quantile_top(p).unwrap();
        prop_assert!(y >= stats.thresholds().last().copied().unwrap());
        prop_assert!(rel(d.tail_mass(y), p) < 1e-10);
    }

    #[test]
    fn maxent_share_is_increasing_and_concave(tab in tabulations()) {
        let stats = cumulate(&tab).unwrap();
        let d = build_observed_density(&stats).unwrap();
        let cover = stats.covered_fractile();
        let grid: Vec<f64> = (1..=40).map(|i| (cover * i as f64 / 40.0).min(cover)).collect();
        let income: Vec<f64> = grid.iter().map(|&p| d.top_income(p).unwrap()).collect();
        let scale = income.last().unwrap();
        for w in income.windows(2) {
            prop_assert!(w[1] > w[0]);
        }
        for w in income.windows(3) {
            // equal spacing: concave means the middle point lies on or above the chord
            prop_assert!(2.0 * w[1] - w[0] - w[2] >= -1e-10 * scale);
        }
    }

    #[test]
    fn csv_round_trip(tabs in prop::collection::vec(tabulations(), 1..4)) {
        let tabs: Vec<Tabulation> = tabs
            .into_iter()
            .enumerate()
            .map(|(i, t)| t.with_year(1900 + i as i32))
            .collect();
        let (mut b, mut d) = (Vec::new(), Vec::new());
        write_tabulations(&tabs, &mut b, &mut d).unwrap();
        let back = parse_tabulations(&b[..], &d[..], &ColumnMapping::default()).unwrap();
        prop_assert_eq!(back, tabs);
    }

    #[test]
    fn generated_tabulations_are_valid(tab in tabulations()) {
        prop_assert!(validate(&tab).is_empty());
    }

    #[test]
    fn mean_outside_bracket_is_flagged(tab in tabulations(), pick in any::<prop::sample::Index>(), up in any::<bool>()) {
        prop_assume!(tab.classes() >= 2);
        let k = 1 + pick.index(tab.classes() - 1);
        let mut brackets = tab.brackets().to_vec();
        let (upper, b) = (brackets[k - 1].lower_threshold, &mut brackets[k]);
        let mean = if up { upper * 1.01 } else { b.lower_threshold * 0.99 };
        b.income_sum = b.count as f64 * mean;
        let bad = Tabulation::new(tab.year(), brackets, tab.population(), tab.total_income(), 1.0);
        let code = if up { ViolationCode::MeanAboveUpper } else { ViolationCode::MeanBelowThreshold };
        let found = validate(&bad);
        prop_assert!(found.iter().any(|v| v.code == code && v.bracket == Some(k + 1)), "{:?}", found);
    }

    #[test]
    fn kernel_identities(x in -300.0f64..300.0, s in 0.0f64..1.0, f in 0.0f64..1.0) {
        let below = kernel::fraction_below(x, s);
        let above = kernel::fraction_above(x, s);
        prop_assert!((below + above - 1.0).abs() < 1e-13);
        prop_assert!((kernel::mean_fraction(x) + kernel::mean_fraction(-x) - 1.0).abs() < 1e-14);
        prop_assert!(kernel::mean_fraction_slope(x) > 0.0 && kernel::mean_fraction_slope(x) <= 1.0 / 12.0 + 1e-15);
        let back = kernel::fraction_below(x, kernel::position_below(x, f));
        prop_assert!((back - f).abs() < 1e-10, "{} vs {}", back, f);
        let m = kernel::mean_above(x, s);
        prop_assert!(m >= s && m <= 1.0);
    }
}

fn micro_sample() -> impl Strategy<Value = MicroSample> {
    (
        prop::collection::vec((1.0f64..1e6, 1u64..5), 20..300),
        0u64..200,
    )
        .prop_map(|(units, nonfilers)| MicroSample::weighted(units, nonfilers).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn oracle_share_is_increasing_and_concave(sample in micro_sample()) {
        let n = sample.population() as f64;
        let grid: Vec<f64> = (1..=sample.population()).map(|u| u as f64 / n).collect();
        let shares: Vec<f64> = grid.iter().map(|&p| sample.oracle_share(p).unwrap()).collect();
        prop_assert!((shares.last().unwrap() - 1.0).abs() < 1e-12);
        for w in shares.windows(2) {
            prop_assert!(w[1] >= w[0]);
        }
        for w in shares.windows(3) {
            prop_assert!(2.0 * w[1] - w[0] - w[2] >= -1e-12);
        }
    }

    #[test]
    fn tabulating_reproduces_counts_and_means(sample in micro_sample(), cuts in prop::collection::btree_set(1u64..400, 2..8)) {
        let thresholds: Vec<f64> = cuts.iter().rev().map(|&c| c as f64 * 2500.0).collect();
        let tab = sample.tabulate(&thresholds).unwrap();
        let n = sample.population() as f64;
        let mut upper = f64::INFINITY;
        let mut above = 0u64;
        for (b, &t) in tab.brackets().iter().zip(&thresholds) {
            let inside: Vec<(f64, u64)> = sample
                .incomes()
                .iter()
                .zip(sample.weights())
                .filter(|(&x, _)| x >= t && x < upper)
                .map(|(&x, &w)| (x, w))
                .collect();
            let count: u64 = inside.iter().map(|u| u.1).sum();
            let income: f64 = inside.iter().map(|u| u.0 * u.1 as f64).sum();
            prop_assert_eq!(b.count, count);
            prop_assert!((b.income_sum - income).abs() <= 1e-9 * income.max(1.0));
            above += count;
            if above > 0 {
                let stats = cumulate(&tab);
                if let Ok(stats) = stats {
                    let k = thresholds.iter().position(|&x| x == t).unwrap() + 1;
                    prop_assert!(rel(stats.bracket(k).top_fractile, above as f64 / n) < 1e-15);
                }
            }
            upper = t;
        }
    }

    #[test]
    fn maxent_matches_oracle_at_tabulated_fractiles(sample in micro_sample(), picks in prop::collection::btree_set(1u64..20, 2..6)) {
        let ranks: Vec<u64> = picks.into_iter().collect();
        let thresholds: Vec<f64> = ranks.iter().map(|&r| sample.cut_below_top(r)).collect();
        prop_assume!(thresholds.windows(2).all(|w| w[0] > w[1]));
        let tab = sample.tabulate(&thresholds).unwrap();
        prop_assume!(validate(&tab).is_empty());
        let stats = cumulate(&tab).unwrap();
        prop_assume!(stats.brackets.iter().all(|b| b.mean.is_some_and(|y| y > b.threshold)));
        let unit_share = sample.incomes()[0] / sample.total_income();
        for b in &stats.brackets {
            let me = estimate_share_me(&tab, b.top_fractile).unwrap();
            let oracle = sample.oracle_share(b.top_fractile).unwrap();
            prop_assert!((me.share - oracle).abs() <= unit_share, "{} vs {}", me.share, oracle);
        }
    }
}

#[test]
fn empty_tabulation_is_rejected() {
    let tab = Tabulation::new(2000, vec![], 100, 1.0, 1.0);
    assert!(validate(&tab)
        .iter()
        .any(|v| v.code == ViolationCode::TooFewBrackets));
    let one = Tabulation::new(
        2000,
        vec![IncomeBracket::new(10.0, 1, 20.0)],
        100,
        100.0,
        1.0,
    );
    assert!(one.ensure_valid().is_err());
}
