use serde_json::Value;
use topshares_web::{estimate_csv, fit_synthetic, piece_rate};

const BRACKETS: &str = "year,lower_threshold,returns,income_sum\n\
    2001,100,10,2500\n2001,50,40,2600\n2001,10,150,3000\n\
    2002,100,10,2500\n2002,50,40,9000\n2002,10,150,3000\n";
const DENOMINATORS: &str =
    "year,population,total_income,income_unit\n2001,1000,12000,1\n2002,1000,12000,1\n";

#[test]
fn synthetic_pareto_fit_matches_its_law() {
    let fit: Value =
        serde_json::from_str(&fit_synthetic("pareto", 2.0, 8, "0.1,0.01").unwrap()).unwrap();
    assert_eq!(fit["brackets"].as_array().unwrap().len(), 8);
    assert_eq!(
        fit["curve"].as_array().unwrap().len(),
        fit["truth"].as_array().unwrap().len()
    );
    for s in fit["shares"].as_array().unwrap() {
        let p = s["fractile"].as_f64().unwrap();
        let oracle = s["oracle"].as_f64().unwrap();
        assert!((oracle - p.sqrt()).abs() < 1e-9);
        assert!((s["pi"].as_f64().unwrap() / oracle - 1.0).abs() < 1e-6);
        assert!((s["me"].as_f64().unwrap() / oracle - 1.0).abs() < 0.01);
    }
}

#[test]
fn synthetic_rejects_bad_input() {
    assert!(fit_synthetic("weibull", 1.0, 8, "0.1").is_err());
    assert!(fit_synthetic("lognormal", -1.0, 8, "0.1").is_err());
    assert!(fit_synthetic("lognormal", 1.0, 1, "0.1").is_err());
    assert!(fit_synthetic("lognormal", 1.0, 8, "").is_err());
}

#[test]
fn csv_estimates_report_each_year() {
    let years: Value =
        serde_json::from_str(&estimate_csv(BRACKETS, DENOMINATORS, "0.05,0.5").unwrap()).unwrap();
    let years = years.as_array().unwrap();
    assert_eq!(years.len(), 2);
    let rows = years[0]["rows"].as_array().unwrap();
    assert!((rows[0]["pi"].as_f64().unwrap() - 5_100.0 / 12_000.0).abs() < 1e-12);
    assert!((rows[0]["me"].as_f64().unwrap() - 5_100.0 / 12_000.0).abs() < 1e-12);
    assert!(rows[1]["me"].is_null() && rows[1]["note"].is_string());
    assert!(years[1]["error"]
        .as_str()
        .unwrap()
        .contains("mean-above-upper"));
}

#[test]
fn piece_density_integrates_to_one_and_hits_the_mean() {
    let piece: Value = serde_json::from_str(&piece_rate(10.0, 20.0, 13.0).unwrap()).unwrap();
    assert!(piece["rate"].as_f64().unwrap() < 0.0);
    let curve: Vec<(f64, f64)> = piece["curve"]
        .as_array()
        .unwrap()
        .iter()
        .map(|p| {
            (
                p["income"].as_f64().unwrap(),
                p["density"].as_f64().unwrap(),
            )
        })
        .collect();
    let (mut mass, mut first) = (0.0, 0.0);
    for w in curve.windows(2) {
        let dy = w[1].0 - w[0].0;
        mass += 0.5 * dy * (w[0].1 + w[1].1);
        first += 0.5 * dy * (w[0].0 * w[0].1 + w[1].0 * w[1].1);
    }
    assert!((mass - 1.0).abs() < 1e-4, "{mass}");
    assert!((first - 13.0).abs() < 1e-3, "{first}");
    assert!(piece_rate(10.0, 20.0, 25.0).is_err());
}
