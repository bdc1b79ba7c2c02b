use std::collections::BTreeMap;

use proptest::prelude::*;

use super::*;
use crate::cox::{fit_cox, FitOptions, TiesMethod};
use crate::nonparametric::{life_table, spells_from_counts};
use crate::panel::{
    design_matrix, panel_from_spells, BigFourProperty, BlockSpec, Covariates, SponsorshipType,
};

fn reference_counts() -> Vec<(usize, usize)> {
    let path = concat!(
        env!("CARGO_MANIFEST_DIR"),
        "/tests/fixtures/reference_counts.csv"
    );
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| {
            let f: Vec<usize> = l.split(',').map(|v| v.trim().parse().unwrap()).collect();
            (f[1], f[2])
        })
        .collect()
}

/// Null model (no covariates) with its baseline, fitted to the reference life-table spells.
fn reference_null_model() -> CoxModel {
    let spells = spells_from_counts(&reference_counts());
    let ds = panel_from_spells(&spells, &Covariates::default());
    let x = design_matrix(&ds, &BlockSpec { blocks: vec![] }).unwrap();
    let m = fit_cox(&x, &FitOptions::default()).unwrap();
    attach_baseline(m, &x).unwrap()
}

/// Model with one covariate and a nonzero coefficient.
fn one_covariate_model() -> CoxModel {
    let rows: Vec<Vec<f64>> = (0..10).map(|i| vec![(i % 3) as f64]).collect();
    let times = [1, 2, 2, 3, 1, 4, 3, 2, 5, 1];
    let events = [true, true, false, true, true, true, true, false, true, true];
    let x = DesignMatrix::from_survival_times(vec!["z".into()], &rows, &times, &events).unwrap();
    let m = fit_cox(&x, &FitOptions::default()).unwrap();
    assert!(m.coefficients[0].abs() > 0.05);
    attach_baseline(m, &x).unwrap()
}

#[test]
fn null_baseline_is_life_table_hazard() {
    let m = reference_null_model();
    let table = life_table(&spells_from_counts(&reference_counts())).unwrap();
    for row in &table.rows {
        let step = m.baseline.iter().find(|s| s.period == row.period);
        let inc = step.map_or(0.0, |s| s.increment);
        assert!((inc - row.hazard).abs() < 1e-12, "period {}", row.period);
    }
}

#[test]
fn tied_four_baseline_increments() {
    let rows: Vec<Vec<f64>> = [1.0, 0.0, 1.0, 0.0].iter().map(|v| vec![*v]).collect();
    let x = DesignMatrix::from_survival_times(vec!["x".into()], &rows, &[1, 1, 2, 2], &[true; 4])
        .unwrap();
    let m = fit_cox(&x, &FitOptions::with_ties(TiesMethod::Breslow)).unwrap();
    assert!(m.coefficients[0].abs() < 1e-9);
    let b = baseline_cumulative_hazard(&m, &x).unwrap();
    assert_eq!(b.len(), 2);
    assert!((b[0].increment - 0.5).abs() < 1e-9);
    assert!((b[1].increment - 1.0).abs() < 1e-9);
    assert!((b[1].cumulative - 1.5).abs() < 1e-9);
}

#[test]
fn baseline_missing_is_reported() {
    let mut m = one_covariate_model();
    m.baseline.clear();
    let p = CovariateProfile::from_values("a", vec![0.0]);
    assert_eq!(
        survival_profile(&m, &p, 5, SurvivalForm::ProductLimit).unwrap_err(),
        ForecastError::BaselineMissing
    );
}

#[test]
fn zero_profile_uses_baseline_directly() {
    let m = one_covariate_model();
    let p = CovariateProfile::from_values("a", vec![0.0]);
    let exp_curve = survival_profile(&m, &p, 6, SurvivalForm::Exponential).unwrap();
    let prod_curve = survival_profile(&m, &p, 6, SurvivalForm::ProductLimit).unwrap();
    let mut h = 0.0;
    let mut prod = 1.0;
    for t in 1..=6u32 {
        let inc = m
            .baseline
            .iter()
            .find(|s| s.period == t)
            .map_or(0.0, |s| s.increment);
        h += inc;
        prod *= (1.0 - inc).max(0.0);
        assert!((exp_curve.at(t) - (-h).exp()).abs() < 1e-12);
        assert!((prod_curve.at(t) - prod).abs() < 1e-12);
    }
}

#[test]
fn doubling_risk_squares_survival() {
    let m = one_covariate_model();
    let b = m.coefficients[0];
    let x1 = 0.4;
    let x2 = x1 + std::f64::consts::LN_2 / b;
    for form in [SurvivalForm::Exponential, SurvivalForm::ProductLimit] {
        let s1 =
            survival_profile(&m, &CovariateProfile::from_values("a", vec![x1]), 6, form).unwrap();
        let s2 =
            survival_profile(&m, &CovariateProfile::from_values("b", vec![x2]), 6, form).unwrap();
        for t in 0..=6 {
            assert!((s2.at(t) - s1.at(t).powi(2)).abs() < 1e-12, "{form} t={t}");
        }
    }
}

#[test]
fn null_model_reproduces_product_limit_survivor() {
    let m = reference_null_model();
    let table = life_table(&spells_from_counts(&reference_counts())).unwrap();
    let p = CovariateProfile::from_values("null", vec![]);
    let curve = survival_profile(&m, &p, 50, SurvivalForm::ProductLimit).unwrap();
    for row in &table.rows {
        assert!((curve.at(row.period) - row.survivor).abs() < 1e-12);
    }
}

#[test]
fn triage_by_tenure_on_reference_table() {
    let m = reference_null_model();
    let a = CovariateProfile::from_values("early", vec![]).with_tenure(1);
    let b = CovariateProfile::from_values("late", vec![]).with_tenure(12);
    let report = portfolio_audit(&m, &[b, a], DEFAULT_HORIZON, SurvivalForm::ProductLimit).unwrap();
    assert_eq!(report[0].sponsorship_id, "early");
    assert!((report[0].exit_2y - 0.438).abs() < 0.002);
    assert!((report[1].exit_2y - 0.138).abs() < 0.002);
}

#[test]
fn duration_examples() {
    let halves: Vec<f64> = (0..=60).map(|t| 0.5f64.powi(t)).collect();
    let curve = SurvivorCurve::from_values(halves).unwrap();
    let d = expected_duration(&curve, 0, 50).unwrap();
    assert!((d.total - 2.0).abs() < 1e-9);
    assert!(!d.truncated);

    let linear = SurvivorCurve::from_values(vec![1.0, 0.8, 0.6, 0.4, 0.2, 0.0]).unwrap();
    let d = expected_duration(&linear, 0, 5).unwrap();
    assert!((d.total - 3.0).abs() < 1e-12);
    let d = expected_duration(&linear, 3, 5).unwrap();
    assert!((d.total - 4.5).abs() < 1e-12);
    assert!((d.remaining - 1.5).abs() < 1e-12);

    let flat = SurvivorCurve::from_values(vec![1.0, 0.9, 0.8]).unwrap();
    assert!(expected_duration(&flat, 0, 2).unwrap().truncated);
    assert!(expected_duration(&flat, 2, 2).is_err());
}

#[test]
fn revenue_arithmetic() {
    assert_eq!(revenue_forecast(4.87, 2.25e6), 10_957_500.0);
    assert_eq!(revenue_forecast(7.3, 0.0), 0.0);
    assert!((18.77f64 / 2.25 - 8.342).abs() < 1e-3);
    assert_eq!(format_millions(18.77e6), "18.77M");
}

#[test]
fn empty_and_tied_portfolios() {
    let m = one_covariate_model();
    assert!(portfolio_audit(&m, &[], 10, SurvivalForm::ProductLimit)
        .unwrap()
        .is_empty());
    let p = |id: &str| CovariateProfile::from_values(id, vec![1.0]).with_tenure(1);
    let r = portfolio_audit(&m, &[p("b"), p("a")], 10, SurvivalForm::ProductLimit).unwrap();
    assert_eq!(r[0].sponsorship_id, "a");
    assert_eq!(r[0].exit_2y, r[1].exit_2y);
}

#[test]
fn forecast_report_identity() {
    let m = one_covariate_model();
    let p = CovariateProfile::from_values("a", vec![1.0])
        .with_fee(2.25e6)
        .unwrap();
    let r = forecast(&m, &p, 20, SurvivalForm::ProductLimit).unwrap();
    assert_eq!(r.expected_revenue, r.expected_duration * 2.25e6);
    assert!(r.to_text().contains("expected total revenue"));
    let json: serde_json::Value = serde_json::from_str(&r.to_json()).unwrap();
    assert_eq!(
        json["expected_revenue"].as_f64().unwrap(),
        r.expected_revenue
    );
}

#[test]
fn profile_dimension_checks() {
    let m = one_covariate_model();
    let p = CovariateProfile::from_values("a", vec![1.0, 2.0]);
    assert!(matches!(
        survival_profile(&m, &p, 5, SurvivalForm::ProductLimit),
        Err(ForecastError::ProfileDimensionMismatch {
            expected: 1,
            got: 2
        })
    ));
    let named: BTreeMap<String, f64> = [("w".to_string(), 1.0)].into();
    assert_eq!(
        CovariateProfile::from_named("a", &m, &named).unwrap_err(),
        ForecastError::UnknownColumn("w".into())
    );
    assert!(CovariateProfile::from_values("a", vec![1.0])
        .with_fee(-1.0)
        .is_err());
}

#[test]
fn profile_json_forms() {
    let spells = spells_from_counts(&[(10, 3), (8, 3), (6, 2), (4, 2), (2, 2)]);
    let mut ds_obs = panel_from_spells(&spells, &Covariates::default())
        .observations()
        .to_vec();
    let ids: Vec<String> = spells.iter().map(|s| s.sponsorship_id.clone()).collect();
    for (i, o) in ds_obs.iter_mut().enumerate() {
        let spell = ids.iter().position(|id| *id == o.sponsorship_id).unwrap();
        if spell % 2 == 0 {
            o.covariates.sponsorship_type = SponsorshipType::League;
        }
        if spell % 3 == 0 {
            o.covariates.big_four_property = Some(BigFourProperty::Nfl);
        }
        o.covariates.gdp_growth = (i % 5) as f64;
    }
    let ds = crate::panel::Dataset::new(ds_obs).unwrap();
    let spec = BlockSpec::default().only(&["sponsorship_type", "economic_conditions"]);
    let x = design_matrix(&ds, &spec).unwrap();
    let x = x.select_columns(
        &["league", "nfl", "gdp_growth"]
            .iter()
            .map(|n| x.column_index(n).unwrap())
            .collect::<Vec<_>>(),
    );
    let m = attach_baseline(fit_cox(&x, &FitOptions::default()).unwrap(), &x).unwrap();

    let sponsor = r#"{"sponsorship_id": "nfl_auto", "annual_fee": 2250000, "current_tenure": 0,
        "sponsor": {"sponsorship_type": "league", "big_four_property": "nfl", "gdp_growth": 2.0}}"#;
    let named = r#"{"sponsorship_id": "nfl_auto", "annual_fee": 2250000,
        "covariates": {"league": 1, "nfl": 1, "gdp_growth": 2.0}}"#;
    let a = CovariateProfile::from_json(sponsor, &m).unwrap();
    let b = CovariateProfile::from_json(named, &m).unwrap();
    let ea = a.linear_predictors(&m, 3).unwrap();
    let eb = b.linear_predictors(&m, 3).unwrap();
    for (u, v) in ea.iter().zip(&eb) {
        assert!((u - v).abs() < 1e-12);
    }

    let with_path = r#"{"sponsor": {"sponsorship_type": "league", "gdp_growth": 2.0},
        "paths": {"gdp_growth": [1.0, 3.0]}}"#;
    let p = CovariateProfile::from_json(with_path, &m).unwrap();
    let eta = p.linear_predictors(&m, 3).unwrap();
    let g = m.coefficient("gdp_growth").unwrap();
    assert!((eta[1] - eta[0] - 2.0 * g).abs() < 1e-12);
    assert_eq!(eta[1], eta[2]);

    assert!(CovariateProfile::from_json(r#"{"annual_fee": 1}"#, &m).is_err());
    assert!(CovariateProfile::from_json(r#"{"sponsor": {"colour": "red"}}"#, &m).is_err());
}

fn curve_strategy() -> impl Strategy<Value = (Vec<f64>, f64, f64)> {
    (
        prop::collection::vec(0.0f64..0.6, 1..15),
        -2.0f64..2.0,
        -2.0f64..2.0,
    )
}

fn model_with(increments: &[f64], beta: f64) -> CoxModel {
    let mut m = one_covariate_model();
    m.coefficients[0] = beta;
    let mut cumulative = 0.0;
    m.baseline = increments
        .iter()
        .enumerate()
        .map(|(i, &increment)| {
            cumulative += increment;
            BaselineStep {
                period: i as u32 + 1,
                increment,
                cumulative,
            }
        })
        .collect();
    m
}

proptest! {
    #[test]
    fn survival_is_monotone_and_bounded((inc, beta, x) in curve_strategy()) {
        let m = model_with(&inc, beta);
        let p = CovariateProfile::from_values("p", vec![x]);
        for form in [SurvivalForm::ProductLimit, SurvivalForm::Exponential] {
            let c = survival_profile(&m, &p, 20, form).unwrap();
            let pts = c.points();
            for w in pts.windows(2) {
                prop_assert!(w[1].1 <= w[0].1);
            }
            prop_assert!(pts.iter().all(|&(_, s)| (0.0..=1.0).contains(&s)));
            if form == SurvivalForm::Exponential {
                prop_assert!(pts.iter().all(|&(_, s)| s > 0.0));
            }
        }
    }

    #[test]
    fn higher_risk_never_survives_longer((inc, beta, x) in curve_strategy(), dx in 0.0f64..2.0) {
        let m = model_with(&inc, beta);
        let (lo, hi) = if beta >= 0.0 { (x, x + dx) } else { (x + dx, x) };
        for form in [SurvivalForm::ProductLimit, SurvivalForm::Exponential] {
            let s_lo = survival_profile(&m, &CovariateProfile::from_values("a", vec![lo]), 20, form).unwrap();
            let s_hi = survival_profile(&m, &CovariateProfile::from_values("b", vec![hi]), 20, form).unwrap();
            for t in 0..=20 {
                prop_assert!(s_hi.at(t) <= s_lo.at(t) + 1e-15);
            }
            let d_lo = expected_duration(&s_lo, 0, 20).unwrap().total;
            let d_hi = expected_duration(&s_hi, 0, 20).unwrap().total;
            prop_assert!(d_hi <= d_lo + 1e-12);
        }
    }

    #[test]
    fn exit_probabilities_ordered((inc, beta, x) in curve_strategy(), tenure in 0u32..10) {
        let m = model_with(&inc, beta);
        let p = CovariateProfile::from_values("p", vec![x]).with_tenure(tenure);
        let r = portfolio_audit(&m, &[p], 20, SurvivalForm::ProductLimit).unwrap();
        prop_assert!((0.0..=1.0).contains(&r[0].exit_1y));
        prop_assert!((0.0..=1.0).contains(&r[0].exit_2y));
        prop_assert!(r[0].exit_1y <= r[0].exit_2y + 1e-15);
    }

    #[test]
    fn revenue_is_bilinear(d in 0.0f64..60.0, f in 0.0f64..1e7, a in 0.0f64..5.0) {
        let base = revenue_forecast(d, f);
        prop_assert!((revenue_forecast(a * d, f) - a * base).abs() <= 1e-9 * base.max(1.0));
        prop_assert!((revenue_forecast(d, a * f) - a * base).abs() <= 1e-9 * base.max(1.0));
    }
}
