use super::*;
use crate::cox::{fit_cox, FitOptions, TiesMethod};
use crate::nonparametric::{life_table, median_lifetime, overall_hazard, SurvivorCurve};
use crate::panel::{
    design_matrix, parse_panel_csv, render_panel_csv, spells_from_panel, BlockSpec, DesignMatrix,
};

fn one_binary(spells: usize, seed: u64, beta: f64) -> GeneratorSpec {
    let mut spec = GeneratorSpec::new(spells, seed, vec![0.2], 10);
    spec.binary.insert("regional_proximity".into(), 0.5);
    spec.effects.insert("regional_proximity".into(), beta);
    spec
}

#[test]
fn zero_spells_is_empty() {
    let ds = generate_panel(&GeneratorSpec::new(0, 1, vec![0.3], 5)).unwrap();
    assert!(ds.is_empty());
}

#[test]
fn seed_is_mandatory() {
    let mut spec = GeneratorSpec::new(10, 1, vec![0.3], 5);
    spec.seed = None;
    assert!(matches!(generate_panel(&spec), Err(SynthError::BadSpec(_))));
    let json = r#"{"spells": 3, "baseline_hazard": [0.2], "max_horizon": 4}"#;
    let spec = GeneratorSpec::from_json(json).unwrap();
    assert!(generate_panel(&spec).is_err());
}

#[test]
fn rejects_invalid_specs() {
    let bad = |f: &dyn Fn(&mut GeneratorSpec)| {
        let mut s = GeneratorSpec::new(10, 1, vec![0.3], 5);
        f(&mut s);
        generate_panel(&s).is_err()
    };
    assert!(bad(&|s| s.baseline_hazard = vec![1.0]));
    assert!(bad(&|s| s.baseline_hazard.clear()));
    assert!(bad(&|s| s.max_horizon = 0));
    assert!(bad(&|s| s.censoring_rate = 1.0));
    assert!(bad(&|s| {
        s.binary.insert("congruence".into(), 1.5);
    }));
    assert!(bad(&|s| {
        s.binary.insert("height".into(), 0.5);
    }));
    assert!(bad(&|s| {
        s.effects.insert("not_a_column".into(), 0.5);
    }));
}

#[test]
fn null_hazard_half_concentrates() {
    let spec = GeneratorSpec::new(10_000, 20240601, vec![0.5], 30);
    let ds = generate_panel(&spec).unwrap();
    let table = life_table(&spells_from_panel(&ds)).unwrap();
    let (h, _) = overall_hazard(&table);
    assert!((h - 0.5).abs() < 0.01, "overall hazard {h}");
    let m = median_lifetime(&SurvivorCurve::from_table(&table)).unwrap();
    assert!((m - 1.0).abs() < 0.03, "median {m}");
}

#[test]
fn same_seed_same_bytes() {
    let mut spec = one_binary(300, 99, 0.4);
    spec.censoring_rate = 0.1;
    spec.categorical_mix = CategoricalMix::Observed;
    spec.continuous.insert(
        "gdp_growth".into(),
        ContinuousRange {
            min: -3.0,
            max: 5.0,
            time_varying: true,
        },
    );
    spec.continuous.insert(
        "clutter".into(),
        ContinuousRange {
            min: 1.0,
            max: 59.0,
            time_varying: false,
        },
    );
    let a = render_panel_csv(&generate_panel(&spec).unwrap());
    let b = render_panel_csv(&generate_panel(&spec).unwrap());
    assert_eq!(a, b);
    spec.seed = Some(100);
    assert_ne!(a, render_panel_csv(&generate_panel(&spec).unwrap()));

    let reparsed = parse_panel_csv(a.as_bytes()).unwrap();
    assert_eq!(render_panel_csv(&reparsed), a);
    let types: std::collections::BTreeSet<_> = reparsed
        .observations()
        .iter()
        .map(|o| o.covariates.sponsorship_type)
        .collect();
    assert!(types.len() >= 4);
}

#[test]
fn hazard_overflow_unless_clamped() {
    let mut spec = GeneratorSpec::new(50, 3, vec![0.5], 5);
    spec.binary.insert("brand_equity".into(), 0.5);
    spec.effects.insert("brand_equity".into(), 1.0);
    assert!(matches!(
        generate_panel(&spec),
        Err(SynthError::HazardOverflow { max_hazard }) if (max_hazard - 0.5 * 1f64.exp()).abs() < 1e-12
    ));
    // Negative effects cannot push the hazard up.
    spec.effects.insert("brand_equity".into(), -1.0);
    assert!(generate_panel(&spec).is_ok());
    spec.effects.insert("brand_equity".into(), 1.0);
    spec.clamp = true;
    assert!(generate_panel(&spec).is_ok());
    // An unreachable value does not count.
    spec.clamp = false;
    spec.binary.insert("brand_equity".into(), 0.0);
    assert!(generate_panel(&spec).is_ok());
}

#[test]
fn km_inside_dkw_band() {
    let mut spec = GeneratorSpec::new(2000, 777, vec![0.3, 0.2, 0.15, 0.1], 15);
    spec.binary.insert("b2b".into(), 0.4);
    let ds = generate_panel(&spec).unwrap();
    let table = life_table(&spells_from_panel(&ds)).unwrap();
    let eps = ((2.0f64 / 0.01).ln() / (2.0 * 2000.0)).sqrt();
    for row in &table.rows {
        let truth = spec.null_survivor(row.period);
        assert!((row.survivor - truth).abs() <= eps, "period {}", row.period);
    }
}

fn tied_four() -> DesignMatrix {
    let rows: Vec<Vec<f64>> = [1.0, 0.0, 1.0, 0.0].iter().map(|v| vec![*v]).collect();
    DesignMatrix::from_survival_times(vec!["x".into()], &rows, &[1, 1, 2, 2], &[true; 4]).unwrap()
}

#[test]
fn grid_finds_tied_optimum() {
    let g = grid_search_mle(&tied_four(), (-5.0, 5.0), 1e-3, TiesMethod::Breslow).unwrap();
    assert!(g.beta[0].abs() < 1e-9);
    assert!(!g.monotone_suspected);
    assert!((g.value + 64f64.ln()).abs() < 1e-12);
}

#[test]
fn grid_flags_monotone_likelihood() {
    // Larger x always fails first.
    let rows: Vec<Vec<f64>> = (0..5).map(|i| vec![(5 - i) as f64]).collect();
    let x =
        DesignMatrix::from_survival_times(vec!["x".into()], &rows, &[1, 2, 3, 4, 5], &[true; 5])
            .unwrap();
    let g = grid_search_mle(&x, (-5.0, 5.0), 0.01, TiesMethod::Efron).unwrap();
    assert!(g.monotone_suspected);
    assert_eq!(g.beta[0], 5.0);
}

#[test]
fn grid_agrees_with_newton_in_two_dimensions() {
    let ds = generate_panel(&{
        let mut s = GeneratorSpec::new(120, 5, vec![0.25], 8);
        s.binary.insert("congruence".into(), 0.5);
        s.binary.insert("b2b".into(), 0.3);
        s.effects.insert("congruence".into(), 0.6);
        s
    })
    .unwrap();
    let x = design_matrix(
        &ds,
        &BlockSpec::default().only(&["sponsor_characteristics"]),
    )
    .unwrap();
    let keep: Vec<usize> = ["congruence", "b2b"]
        .iter()
        .map(|n| x.column_index(n).unwrap())
        .collect();
    let x = x.select_columns(&keep);
    let g = grid_search_mle(&x, (-2.0, 2.0), 0.01, TiesMethod::Efron).unwrap();
    let m = fit_cox(&x, &FitOptions::default()).unwrap();
    for j in 0..2 {
        assert!((g.beta[j] - m.coefficients[j]).abs() <= 0.01);
    }
    assert!(g.value <= m.log_likelihood + 1e-9);
}

#[test]
fn grid_rejects_three_columns() {
    let rows: Vec<Vec<f64>> = (0..4)
        .map(|i| vec![i as f64, (i % 2) as f64, (i * i) as f64])
        .collect();
    let x = DesignMatrix::from_survival_times(
        vec!["a".into(), "b".into(), "c".into()],
        &rows,
        &[1, 2, 3, 4],
        &[true; 4],
    )
    .unwrap();
    assert_eq!(
        grid_search_mle(&x, (-1.0, 1.0), 0.1, TiesMethod::Efron).unwrap_err(),
        SynthError::TooManyColumns(3)
    );
}

#[test]
fn finite_differences() {
    let x = tied_four();
    for ties in [TiesMethod::Breslow, TiesMethod::Efron] {
        let e = finite_diff_check(&x, &[0.0], 1e-5, ties).unwrap();
        assert!(e.gradient < 1e-6);
        assert!(e.hessian < 1e-4);
        let e = finite_diff_check(&x, &[0.7], 1e-5, ties).unwrap();
        assert!(e.gradient < 1e-6 && e.hessian < 1e-4);
    }
    assert_eq!(
        finite_diff_check(&x, &[0.0], 0.0, TiesMethod::Efron).unwrap_err(),
        SynthError::BadStep(0.0)
    );
}
