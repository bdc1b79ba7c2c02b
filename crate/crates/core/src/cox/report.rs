use std::fmt::Write as _;

use serde::Serialize;
use statrs::function::erf::erfc;

use super::fit::CoxModel;
use super::protocol::FitReport;

const Z_95: f64 = 1.96;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoefficientRow {
    pub name: String,
    pub label: String,
    pub block: String,
    pub beta: f64,
    /// Cluster-robust standard error.
    pub se: f64,
    pub z: f64,
    pub p_value: f64,
    pub hazard_ratio: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

/// One row per column, with hazard ratio and a 95% interval from the robust SE.
pub fn hazard_ratio_table(model: &CoxModel) -> Vec<CoefficientRow> {
    let se = model.se_clustered();
    (0..model.n_params())
        .map(|j| {
            let beta = model.coefficients[j];
            let z = if se[j] > 0.0 { beta / se[j] } else { f64::NAN };
            CoefficientRow {
                name: model.columns[j].clone(),
                label: model.labels[j].clone(),
                block: model.blocks[j].clone(),
                beta,
                se: se[j],
                z,
                p_value: erfc(z.abs() / std::f64::consts::SQRT_2),
                hazard_ratio: beta.exp(),
                ci_low: (beta - Z_95 * se[j]).exp(),
                ci_high: (beta + Z_95 * se[j]).exp(),
            }
        })
        .collect()
}

/// Percent change in the exit hazard, e.g. `"19.1% less likely"` for HR 0.809.
pub fn describe_effect(hazard_ratio: f64) -> String {
    let pct = format!("{:.1}", (hazard_ratio - 1.0).abs() * 100.0);
    if pct == "0.0" {
        "0.0% change".to_string()
    } else if hazard_ratio < 1.0 {
        format!("{pct}% less likely")
    } else {
        format!("{pct}% more likely")
    }
}

pub fn significance_stars(p_value: f64) -> &'static str {
    if p_value < 0.001 {
        "***"
    } else if p_value < 0.01 {
        "**"
    } else if p_value < 0.05 {
        "*"
    } else {
        ""
    }
}

fn cell(row: &CoefficientRow) -> String {
    if row.z.is_finite() {
        format!(
            "{:.2}{} ({:.4})",
            row.z,
            significance_stars(row.p_value),
            row.se
        )
    } else {
        format!("{:.4} (n/a)", row.beta)
    }
}

/// Aligned text table: one column per model, one row per covariate, followed
/// by block tests, fit statistics, and hazard ratios for the last model.
pub fn render_report_text(models: &[(CoxModel, FitReport)]) -> String {
    let mut out = String::new();
    let Some((last, last_report)) = models.last() else {
        return "no models\n".to_string();
    };
    let _ = writeln!(
        out,
        "Cox proportional hazards, hierarchical block entry (ties: {})",
        last.ties
    );
    let _ = writeln!(
        out,
        "Cells: z = beta / robust SE, robust SE in parentheses; * p < .05; ** p < .01; *** p < .001"
    );
    let _ = writeln!(
        out,
        "BIC n = panel observations ({}); SEs clustered over {} clusters",
        last.n_observations, last.n_clusters
    );
    out.push('\n');

    let label_w = last
        .labels
        .iter()
        .map(|l| l.chars().count())
        .chain(["Block Wald chi2 (df)".len()])
        .max()
        .unwrap_or(0)
        + 2;
    let cells: Vec<Vec<CoefficientRow>> =
        models.iter().map(|(_, r)| r.coefficients.clone()).collect();
    let col_w = cells
        .iter()
        .flatten()
        .map(|r| cell(r).len())
        .chain([22])
        .max()
        .unwrap_or(22)
        + 2;

    let _ = write!(out, "{:<label_w$}", "Variable");
    for (_, r) in models {
        let _ = write!(out, "{:>col_w$}", format!("Model {}", r.model));
    }
    out.push('\n');

    let mut current_block = "";
    for (j, name) in last.columns.iter().enumerate() {
        if last.blocks[j] != current_block {
            current_block = &last.blocks[j];
            let _ = writeln!(out, "[{current_block}]");
        }
        let _ = write!(out, "{:<label_w$}", last.labels[j]);
        for rows in &cells {
            let text = rows
                .iter()
                .find(|r| &r.name == name)
                .map(cell)
                .unwrap_or_default();
            let _ = write!(out, "{text:>col_w$}");
        }
        out.push('\n');
    }
    out.push('\n');

    let mut stat_line = |title: &str, f: &dyn Fn(&FitReport) -> String| {
        let _ = write!(out, "{title:<label_w$}");
        for (_, r) in models {
            let _ = write!(out, "{:>col_w$}", f(r));
        }
        out.push('\n');
    };
    stat_line("Block Wald chi2 (df)", &|r| match &r.block_test {
        Some(t) => format!("{:.2}{} ({})", t.chi2, significance_stars(t.p_value), t.df),
        None => String::new(),
    });
    stat_line("Log-likelihood", &|r| format!("{:.1}", r.log_likelihood));
    stat_line("AIC", &|r| format!("{:.1}", r.aic));
    stat_line("BIC", &|r| format!("{:.1}", r.bic));
    stat_line("Parameters", &|r| r.k.to_string());

    if !last_report.vif.is_empty() {
        let finite: Vec<f64> = last_report
            .vif
            .iter()
            .map(|v| v.vif)
            .filter(|v| v.is_finite())
            .collect();
        let max = finite.iter().copied().fold(f64::NAN, f64::max);
        let mean = finite.iter().sum::<f64>() / finite.len().max(1) as f64;
        let _ = writeln!(
            out,
            "\nVIF (Model {}): largest {:.2}, mean {:.2}",
            last_report.model, max, mean
        );
        for v in last_report.vif.iter().filter(|v| v.perfectly_collinear) {
            let _ = writeln!(out, "  perfectly collinear: {}", v.name);
        }
    }

    let _ = writeln!(out, "\nHazard ratios (Model {})", last_report.model);
    let _ = writeln!(
        out,
        "{:<label_w$}{:>10}{:>22}  Effect on exit",
        "Variable", "HR", "95% CI"
    );
    for r in &last_report.coefficients {
        let _ = writeln!(
            out,
            "{:<label_w$}{:>10.3}{:>22}  {} to exit",
            r.label,
            r.hazard_ratio,
            format!("[{:.3}, {:.3}]", r.ci_low, r.ci_high),
            describe_effect(r.hazard_ratio)
        );
    }
    out
}

#[derive(Serialize)]
struct ReportJson<'a> {
    ties: String,
    bic_n: usize,
    models: Vec<&'a FitReport>,
}

/// JSON with one entry per model, mirroring the text layout.
pub fn render_report_json(models: &[(CoxModel, FitReport)]) -> String {
    let doc = ReportJson {
        ties: models
            .last()
            .map(|(m, _)| m.ties.to_string())
            .unwrap_or_default(),
        bic_n: models.last().map_or(0, |(m, _)| m.n_observations),
        models: models.iter().map(|(_, r)| r).collect(),
    };
    serde_json::to_string_pretty(&doc).expect("report serialises")
}
