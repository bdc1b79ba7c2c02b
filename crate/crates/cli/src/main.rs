mod error;
mod output;

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Parser, Subcommand, ValueEnum};

use sponsorship_survival::cox::{
    hierarchical_fit_design, render_report_json, render_report_text, CoxModel, FitOptions,
    TiesMethod,
};
use sponsorship_survival::forecast::{
    attach_baseline, forecast, portfolio_audit, profiles_from_portfolio, render_audit_text,
    CovariateProfile, SurvivalForm, DEFAULT_HORIZON,
};
use sponsorship_survival::nonparametric::{
    life_table, median_lifetime, overall_hazard, spells_from_counts, LifeTable, LifeTableError,
    SurvivorCurve,
};
use sponsorship_survival::panel::{
    design_matrix, parse_panel_csv, parse_portfolio_csv, render_panel_csv, spells_from_panel,
    BlockSpec,
};
use sponsorship_survival::plot::{life_table_svg, survival_curves_svg, Series};
use sponsorship_survival::synth::{generate_panel, GeneratorSpec};

use error::CliError;
use output::{check_input, check_output, emit, read, write_atomic};

#[derive(Parser)]
#[command(
    name = "sponsor-surv",
    version,
    about = "Survival analysis for sponsorship panels"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Life table, overall hazard and median lifetime of a panel.
    Lifetable {
        panel: PathBuf,
        /// Read `period,ended,censored` counts instead of a panel.
        #[arg(long)]
        counts: bool,
        #[arg(long, value_enum, default_value_t = TableFormat::Text)]
        format: TableFormat,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Hierarchical Cox fit with a block-by-block report.
    Fit {
        panel: PathBuf,
        /// `default` or a block specification JSON file.
        #[arg(long, default_value = "default")]
        blocks: String,
        #[arg(long, value_enum, default_value_t = Ties::Efron)]
        ties: Ties,
        #[arg(long, default_value_t = 1e-8)]
        tol: f64,
        #[arg(long, default_value_t = 100)]
        max_iter: usize,
        #[arg(long, value_enum, default_value_t = ReportFormat::Text)]
        format: ReportFormat,
        /// Report destination; standard output if omitted.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Where to save the final model with its baseline hazard.
        #[arg(long)]
        model_out: Option<PathBuf>,
    },
    /// Survival curve, expected duration and revenue for one profile.
    Predict {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        profile: PathBuf,
        /// Annual fee, overriding the profile's.
        #[arg(long)]
        fee: Option<f64>,
        /// Years already served, overriding the profile's.
        #[arg(long)]
        tenure: Option<u32>,
        #[arg(long, default_value_t = DEFAULT_HORIZON)]
        horizon: u32,
        #[arg(long, value_enum, default_value_t = Form::ProductLimit)]
        form: Form,
        #[arg(long, value_enum, default_value_t = ReportFormat::Json)]
        format: ReportFormat,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also draw the survivor curve to this SVG file.
        #[arg(long)]
        plot: Option<PathBuf>,
    },
    /// Ranks a portfolio of current sponsors by near-term exit risk.
    Audit {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        portfolio: PathBuf,
        #[arg(long, default_value_t = DEFAULT_HORIZON)]
        horizon: u32,
        #[arg(long, value_enum, default_value_t = Form::ProductLimit)]
        form: Form,
        #[arg(long, value_enum, default_value_t = ReportFormat::Text)]
        format: ReportFormat,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Generates a synthetic panel from a generator spec.
    Simulate {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Overrides the spec's seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Draws the smoothed hazard and survivor function of a life table CSV.
    Plot {
        #[arg(long)]
        lifetable: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 2)]
        bandwidth: u32,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum TableFormat {
    Text,
    Csv,
    Json,
}

#[derive(Clone, Copy, ValueEnum)]
enum ReportFormat {
    Text,
    Json,
}

#[derive(Clone, Copy, ValueEnum)]
enum Ties {
    Efron,
    Breslow,
}

#[derive(Clone, Copy, ValueEnum)]
enum Form {
    ProductLimit,
    Exponential,
}

impl From<Ties> for TiesMethod {
    fn from(t: Ties) -> Self {
        match t {
            Ties::Efron => TiesMethod::Efron,
            Ties::Breslow => TiesMethod::Breslow,
        }
    }
}

impl From<Form> for SurvivalForm {
    fn from(f: Form) -> Self {
        match f {
            Form::ProductLimit => SurvivalForm::ProductLimit,
            Form::Exponential => SurvivalForm::Exponential,
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = e.print();
                return ExitCode::SUCCESS;
            }
            let code = match e.kind() {
                ErrorKind::InvalidSubcommand | ErrorKind::MissingSubcommand => "UnknownSubcommand",
                ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand => "UnknownSubcommand",
                _ => "BadFlag",
            };
            let text = e.to_string();
            let first = text
                .lines()
                .find(|l| !l.trim().is_empty())
                .unwrap_or("invalid arguments")
                .trim_start_matches("error: ");
            eprintln!("{}", CliError::validation(code, first));
            return ExitCode::from(1);
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.exit_code())
        }
    }
}

fn run(command: Command) -> Result<(), CliError> {
    match command {
        Command::Lifetable {
            panel,
            counts,
            format,
            out,
        } => {
            check_input(&panel)?;
            if let Some(o) = &out {
                check_output(o)?;
            }
            lifetable(&panel, counts, format, out.as_deref())
        }
        Command::Fit {
            panel,
            blocks,
            ties,
            tol,
            max_iter,
            format,
            out,
            model_out,
        } => {
            check_input(&panel)?;
            if blocks != "default" {
                check_input(Path::new(&blocks))?;
            }
            for o in out.iter().chain(&model_out) {
                check_output(o)?;
            }
            if !(tol > 0.0 && tol.is_finite()) || max_iter == 0 {
                return Err(CliError::validation(
                    "BadFlag",
                    "--tol must be positive and --max-iter at least 1",
                ));
            }
            let options = FitOptions {
                ties: ties.into(),
                tol,
                max_iter,
                ..FitOptions::default()
            };
            fit(
                &panel,
                &blocks,
                &options,
                format,
                out.as_deref(),
                model_out.as_deref(),
            )
        }
        Command::Predict {
            model,
            profile,
            fee,
            tenure,
            horizon,
            form,
            format,
            out,
            plot,
        } => {
            check_input(&model)?;
            check_input(&profile)?;
            for o in out.iter().chain(&plot) {
                check_output(o)?;
            }
            let model = load_model(&model)?;
            let mut p = CovariateProfile::from_json(&read(&profile)?, &model)?;
            if let Some(f) = fee {
                p = p.with_fee(f)?;
            }
            if let Some(t) = tenure {
                p = p.with_tenure(t);
            }
            let report = forecast(&model, &p, horizon, form.into())?;
            let text = match format {
                ReportFormat::Json => report.to_json() + "\n",
                ReportFormat::Text => report.to_text(),
            };
            let svg = plot.as_ref().map(|_| {
                let series = Series {
                    label: &report.sponsorship_id,
                    points: report
                        .survival
                        .iter()
                        .map(|&(t, s)| (f64::from(t), s))
                        .collect(),
                };
                survival_curves_svg(&format!("Survival: {}", report.sponsorship_id), &[series])
            });
            if let (Some(path), Some(svg)) = (&plot, &svg) {
                write_atomic(path, svg)?;
            }
            emit(out.as_deref(), &text)
        }
        Command::Audit {
            model,
            portfolio,
            horizon,
            form,
            format,
            out,
        } => {
            check_input(&model)?;
            check_input(&portfolio)?;
            if let Some(o) = &out {
                check_output(o)?;
            }
            let model = load_model(&model)?;
            let entries = parse_portfolio_csv(read(&portfolio)?.as_bytes())?;
            let profiles = profiles_from_portfolio(&entries)?;
            let records = portfolio_audit(&model, &profiles, horizon, form.into())?;
            let text = match format {
                ReportFormat::Text => render_audit_text(&records),
                ReportFormat::Json => to_json(&records),
            };
            emit(out.as_deref(), &text)
        }
        Command::Simulate { spec, out, seed } => {
            check_input(&spec)?;
            check_output(&out)?;
            let mut spec = GeneratorSpec::from_json(&read(&spec)?)?;
            if seed.is_some() {
                spec.seed = seed;
            }
            let panel = generate_panel(&spec)?;
            write_atomic(&out, &render_panel_csv(&panel))
        }
        Command::Plot {
            lifetable,
            out,
            bandwidth,
        } => {
            check_input(&lifetable)?;
            check_output(&out)?;
            let table = LifeTable::from_csv(&read(&lifetable)?)?;
            write_atomic(&out, &life_table_svg(&table, bandwidth)?)
        }
    }
}

fn to_json<T: serde::Serialize + ?Sized>(value: &T) -> String {
    serde_json::to_string_pretty(value).expect("report serialises") + "\n"
}

fn load_model(path: &Path) -> Result<CoxModel, CliError> {
    Ok(CoxModel::from_json(&read(path)?)?)
}

fn read_counts(text: &str) -> Result<Vec<(usize, usize)>, CliError> {
    let bad = |line: usize, msg: &str| {
        CliError::validation("MalformedCsv", format!("line {line}: {msg}"))
    };
    let mut lines = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty());
    let header: Vec<&str> = match lines.next() {
        Some((_, h)) => h.split(',').map(str::trim).collect(),
        None => return Err(CliError::validation("EmptyInput", "counts file is empty")),
    };
    if header != ["period", "ended", "censored"] {
        return Err(bad(1, "expected header `period,ended,censored`"));
    }
    let mut counts = Vec::new();
    for (i, line) in lines {
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        let parsed: Option<Vec<usize>> = fields.iter().map(|f| f.parse().ok()).collect();
        match parsed.as_deref() {
            Some(&[period, ended, censored]) if period == counts.len() + 1 => {
                counts.push((ended, censored))
            }
            Some(&[_, _, _]) => return Err(bad(i + 1, "periods must run 1, 2, 3, ...")),
            _ => return Err(bad(i + 1, "expected three non-negative integers")),
        }
    }
    Ok(counts)
}

fn lifetable(
    input: &Path,
    counts: bool,
    format: TableFormat,
    out: Option<&Path>,
) -> Result<(), CliError> {
    let text = read(input)?;
    let spells = if counts {
        spells_from_counts(&read_counts(&text)?)
    } else {
        spells_from_panel(&parse_panel_csv(text.as_bytes())?)
    };
    let table = life_table(&spells)?;
    let (hazard, renewal) = overall_hazard(&table);
    let median = match median_lifetime(&SurvivorCurve::from_table(&table)) {
        Ok(m) => Some(m),
        Err(LifeTableError::MedianUndefined { .. }) => None,
        Err(e) => return Err(e.into()),
    };
    let rendered = match format {
        TableFormat::Csv => table.to_csv(),
        TableFormat::Json => to_json(&serde_json::json!({
            "rows": table.rows,
            "overall_hazard": hazard,
            "renewal_rate": renewal,
            "median_lifetime": median,
        })),
        TableFormat::Text => {
            let mut s = format!(
                "{:>6} {:>10} {:>7} {:>9} {:>8} {:>9}\n",
                "Period", "Beginning", "Ended", "Censored", "Hazard", "Survivor"
            );
            let _ = writeln!(
                s,
                "{:>6} {:>10} {:>7} {:>9} {:>8} {:>9.4}",
                0,
                spells.len(),
                "",
                "",
                "",
                1.0
            );
            for r in &table.rows {
                let _ = writeln!(
                    s,
                    "{:>6} {:>10} {:>7} {:>9} {:>8.4} {:>9.4}",
                    r.period, r.beginning, r.ended, r.censored, r.hazard, r.survivor
                );
            }
            let _ = writeln!(s, "\noverall hazard rate: {hazard:.4}");
            let _ = writeln!(s, "renewal rate: {:.1}%", renewal * 100.0);
            match median {
                Some(m) => {
                    let _ = writeln!(s, "median lifetime: {m:.2} years");
                }
                None => {
                    let _ = writeln!(s, "median lifetime: undefined (survivor never reaches .5)");
                }
            }
            s
        }
    };
    emit(out, &rendered)
}

fn fit(
    panel: &Path,
    blocks: &str,
    options: &FitOptions,
    format: ReportFormat,
    out: Option<&Path>,
    model_out: Option<&Path>,
) -> Result<(), CliError> {
    let spec = if blocks == "default" {
        BlockSpec::default()
    } else {
        BlockSpec::from_json(&read(Path::new(blocks))?)?
    };
    let dataset = parse_panel_csv(read(panel)?.as_bytes())?;
    let x = design_matrix(&dataset, &spec)?;
    let fits = hierarchical_fit_design(&x, options)?;
    let report = match format {
        ReportFormat::Text => render_report_text(&fits),
        ReportFormat::Json => render_report_json(&fits) + "\n",
    };
    if let Some(path) = model_out {
        let (last, _) = fits.last().expect("at least one block");
        let model = attach_baseline(last.clone(), &x)?;
        write_atomic(path, &(model.to_json() + "\n"))?;
    }
    emit(out, &report)
}
