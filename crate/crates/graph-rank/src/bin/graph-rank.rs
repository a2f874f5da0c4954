//! Command-line interface: fit merit models from CSV comparison tables, run
//! hypothesis tests, bootstrap rankings, and execute simulation campaigns.
//!
//! Outcome orientation: each CSV row is `item_i,item_j,outcome[,covariates…]`
//! and the outcome is item_i minus item_j. Getting this backwards silently
//! flips every ranking, so double-check the column order of your data.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use graph_rank::covariates::{build_design, check_identifiability, fit_with_covariates, misspecification_bias, CovariateFit};
use graph_rank::error::Error;
use graph_rank::inference::{
    bootstrap_ranks, test_all_distinct, test_all_equal, test_contrasts, test_item_not_worst,
    BootstrapConfig, TestResult,
};
use graph_rank::io::{read_constraint_vector, read_game_table, read_weights, CovariateSelection, GameTable};
use graph_rank::report::{
    BootstrapJsonReport, CovariateReport, DiagnosticsReport, FitReport, ItemReport, TestReport,
    SCHEMA,
};
use graph_rank::simulation::{
    precision_profile, run_consistency_campaign, run_sparse_campaign, ConsistencyConfig,
    SimulationReport, SparseConfig, TopologyKind,
};
use graph_rank::{fit, Constraint, ComparisonGraph, MeritFit};

#[derive(Parser)]
#[command(name = "graph-rank", version, about = "Merit estimation and rank inference on paired-comparison graphs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit merits from a comparison CSV and print a JSON report.
    Fit(FitArgs),
    /// Run a hypothesis test on the fitted merits.
    Test(TestArgs),
    /// Bootstrap the derived ranking.
    Bootstrap(BootstrapArgs),
    /// Run a simulation campaign from a JSON configuration file.
    Simulate(SimulateArgs),
}

#[derive(Args, Clone)]
struct DataArgs {
    /// Comparison CSV: header row, then item_i,item_j,outcome[,covariates…].
    csv: PathBuf,
    /// Constraint: `sum`, `anchor=<label>` or `file=<path>`.
    #[arg(long, default_value = "sum")]
    constraint: String,
    /// Comma-separated covariate column names (default: every column after
    /// the outcome).
    #[arg(long, value_delimiter = ',')]
    covariates: Option<Vec<String>>,
    /// Ignore covariate columns and fit the plain model.
    #[arg(long)]
    no_covariates: bool,
    /// Covariate combination rule (only `diff` is available).
    #[arg(long, default_value = "diff")]
    psi: String,
    /// Per-edge weights CSV (item_i,item_j,weight); plain model only.
    #[arg(long)]
    weights: Option<PathBuf>,
    /// Center covariate columns at their means before fitting.
    #[arg(long)]
    center_covariates: bool,
}

#[derive(Args)]
struct FitArgs {
    #[command(flatten)]
    data: DataArgs,
}

#[derive(Args)]
struct TestArgs {
    /// Comparison CSV (covariate columns are ignored for tests).
    csv: PathBuf,
    /// One of: all_equal, contrasts, all_distinct, item_not_worst.
    test: String,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    /// Comma-separated item labels for subset tests.
    #[arg(long, value_delimiter = ',')]
    subset: Option<Vec<String>>,
    /// Item label for `item_not_worst`.
    #[arg(long)]
    item: Option<String>,
    /// Monte-Carlo draws for simulated nulls.
    #[arg(long, default_value_t = 10_000)]
    mc_b: usize,
    /// RNG seed (overrides GRAPH_RANK_SEED).
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct BootstrapArgs {
    csv: PathBuf,
    /// Number of bootstrap resamples.
    #[arg(long = "B", default_value_t = 200)]
    replicates: usize,
    #[arg(long)]
    seed: Option<u64>,
    /// Refit without covariates even if the CSV has covariate columns.
    #[arg(long)]
    no_covariates: bool,
    /// Where to write the rank-quartile CSV.
    #[arg(long, default_value = "bootstrap_quartiles.csv")]
    quartiles_csv: PathBuf,
}

#[derive(Args)]
struct SimulateArgs {
    /// Campaign configuration (JSON).
    config: PathBuf,
    /// Output directory for the CSV series and the config echo.
    #[arg(long, default_value = ".")]
    out: PathBuf,
    /// RNG seed override.
    #[arg(long)]
    seed: Option<u64>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Fit(args) => cmd_fit(&args),
        Command::Test(args) => cmd_test(&args),
        Command::Bootstrap(args) => cmd_bootstrap(&args),
        Command::Simulate(args) => cmd_simulate(&args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError { error, labels }) => {
            eprintln!("error: {}", render_error(&error, labels.as_deref()));
            ExitCode::from(exit_code(&error))
        }
    }
}

/// Error plus the label table (when available) for user-facing messages.
struct CliError {
    error: Error,
    labels: Option<Vec<String>>,
}

impl From<Error> for CliError {
    fn from(error: Error) -> Self {
        Self { error, labels: None }
    }
}

fn with_labels(labels: &[String]) -> impl Fn(Error) -> CliError + '_ {
    move |error| CliError {
        error,
        labels: Some(labels.to_vec()),
    }
}

/// Stable exit-code contract: 0 success, 2 data/parse, 3 identifiability,
/// 4 configuration.
fn exit_code(error: &Error) -> u8 {
    match error {
        Error::Disconnected { .. } | Error::NotIdentifiable { .. } | Error::InvalidConstraint { .. } => 3,
        Error::InvalidConfig { .. } | Error::Infeasible { .. } | Error::SubsetTooSmall { .. } => 4,
        _ => 2,
    }
}

fn render_error(error: &Error, labels: Option<&[String]>) -> String {
    match (error, labels) {
        (Error::Disconnected { components }, Some(labels)) => {
            let sets = components
                .iter()
                .map(|c| {
                    let names: Vec<&str> = c
                        .iter()
                        .map(|&i| labels.get(i).map(String::as_str).unwrap_or("?"))
                        .collect();
                    format!("{{{}}}", names.join(", "))
                })
                .collect::<Vec<_>>()
                .join(" | ");
            format!("comparison graph is disconnected; components: {sets}")
        }
        _ => error.to_string(),
    }
}

fn env_seed() -> u64 {
    std::env::var("GRAPH_RANK_SEED")
        .ok()
        .and_then(|v| v.parse().ok())
        .unwrap_or(0)
}

fn parse_constraint(spec: &str, table: &GameTable) -> Result<Constraint, Error> {
    if spec == "sum" {
        return Ok(Constraint::SumZero);
    }
    if let Some(label) = spec.strip_prefix("anchor=") {
        let item = table.index_of(label).ok_or_else(|| Error::InvalidConstraint {
            reason: format!("unknown anchor item '{label}'"),
        })?;
        return Ok(Constraint::Anchor { item });
    }
    if let Some(path) = spec.strip_prefix("file=") {
        let vector = read_constraint_vector(Path::new(path))?;
        return Ok(Constraint::Custom { vector });
    }
    Err(Error::InvalidConfig {
        reason: format!("constraint must be sum, anchor=<label> or file=<path>, got '{spec}'"),
    })
}

fn selection(args: &DataArgs) -> Result<CovariateSelection, Error> {
    if args.psi != "diff" {
        return Err(Error::InvalidConfig {
            reason: format!("unknown psi rule '{}'; only 'diff' is available", args.psi),
        });
    }
    Ok(if args.no_covariates {
        CovariateSelection::None
    } else {
        match &args.covariates {
            Some(columns) => CovariateSelection::Columns(columns.clone()),
            None => CovariateSelection::All,
        }
    })
}

fn pairwise_se_from_pinv(pinv: &nalgebra::DMatrix<f64>, sigma2: f64) -> Vec<Vec<f64>> {
    let k = pinv.nrows();
    (0..k)
        .map(|i| {
            (0..k)
                .map(|j| {
                    if i == j {
                        0.0
                    } else {
                        (sigma2 * (pinv[(i, i)] + pinv[(j, j)] - 2.0 * pinv[(i, j)])).max(0.0).sqrt()
                    }
                })
                .collect()
        })
        .collect()
}

fn plain_fit_report(table: &GameTable, merit_fit: &MeritFit, constraint: &str) -> FitReport {
    let items = table
        .labels
        .iter()
        .enumerate()
        .map(|(i, label)| ItemReport {
            label: label.clone(),
            merit: merit_fit.mu_hat[i],
            rank: merit_fit.ranks.0[i],
        })
        .collect();
    FitReport {
        schema: SCHEMA.into(),
        constraint: constraint.to_string(),
        items,
        sigma2: merit_fit.sigma2_hat,
        n: merit_fit.n,
        diagnostics: DiagnosticsReport {
            connected: merit_fit.diagnostics.connected,
            lambda2: merit_fit.diagnostics.lambda2,
            bottleneck_m: merit_fit.diagnostics.bottleneck_m,
        },
        pairwise_se: pairwise_se_from_pinv(&merit_fit.pinv, merit_fit.sigma2_hat),
        covariates: None,
    }
}

fn cmd_fit(args: &FitArgs) -> Result<(), CliError> {
    let data = &args.data;
    let table = read_game_table(&data.csv, &selection(data)?)?;
    let labels = table.labels.clone();
    let constraint = parse_constraint(&data.constraint, &table)?;
    let has_covariates = !table.covariate_names.is_empty();

    if data.weights.is_some() && has_covariates {
        return Err(Error::InvalidConfig {
            reason: "per-edge weights apply to the plain model; pass --no-covariates".into(),
        }
        .into());
    }

    let report = if has_covariates {
        covariate_fit_report(&table, &constraint, data).map_err(with_labels(&labels))?
    } else {
        let weights = match &data.weights {
            Some(path) => Some(read_weights(path, &table)?),
            None => None,
        };
        let graph = ComparisonGraph::from_records(&table.records, table.item_count())
            .map_err(with_labels(&labels))?;
        let merit_fit =
            fit(&graph, &constraint, weights.as_ref()).map_err(with_labels(&labels))?;
        plain_fit_report(&table, &merit_fit, &data.constraint)
    };

    println!("{}", serde_json::to_string_pretty(&report).expect("report serializes"));
    Ok(())
}

fn covariate_fit_report(
    table: &GameTable,
    constraint: &Constraint,
    data: &DataArgs,
) -> Result<FitReport, Error> {
    let mut design = build_design(&table.records, table.item_count())?;
    if data.center_covariates {
        design = design.center_covariates();
    }
    let report = check_identifiability(&design)?;
    if !report.identifiable {
        let directions = report
            .confounded_directions
            .iter()
            .map(|d| {
                table
                    .covariate_names
                    .iter()
                    .zip(d.iter())
                    .map(|(name, coef)| format!("{coef:+.3}*{name}"))
                    .collect::<Vec<_>>()
                    .join(" ")
            })
            .collect::<Vec<_>>()
            .join("; ");
        return Err(Error::NotIdentifiable {
            reason: format!("confounded covariate directions: {directions}"),
        });
    }

    let cov_fit: CovariateFit = fit_with_covariates(&design, constraint)?;
    let bias = misspecification_bias(&design, &cov_fit.beta_hat)?;
    let graph = design.graph();
    let summary = graph_rank::spectral_summary(&graph.laplacian(None)?)?;
    let bottleneck = graph.bottleneck()?;
    let ranks = graph_rank::ranks(&cov_fit.mu_hat);
    let k = table.item_count();

    let items = table
        .labels
        .iter()
        .enumerate()
        .map(|(i, label)| ItemReport {
            label: label.clone(),
            merit: cov_fit.mu_hat[i],
            rank: ranks.0[i],
        })
        .collect();
    // Pairwise differences contract the merit block of the joint covariance;
    // rescale back to the pseudoinverse scale expected by the SE helper.
    let sigma2 = cov_fit.sigma2_hat.max(f64::MIN_POSITIVE);
    let mu_block = cov_fit.cov.view((0, 0), (k, k)).into_owned() / sigma2;
    Ok(FitReport {
        schema: SCHEMA.into(),
        constraint: data.constraint.clone(),
        items,
        sigma2: cov_fit.sigma2_hat,
        n: design.comparison_count() as u64,
        diagnostics: DiagnosticsReport {
            connected: true,
            lambda2: summary.lambda2,
            bottleneck_m: bottleneck.m,
        },
        pairwise_se: pairwise_se_from_pinv(&mu_block, cov_fit.sigma2_hat),
        covariates: Some(CovariateReport {
            names: table.covariate_names.clone(),
            beta: cov_fit.beta_hat.iter().copied().collect(),
            identifiable: true,
            rank_incidence: cov_fit.diagnostics.rank_incidence,
            rank_residual_covariates: cov_fit.diagnostics.rank_residual_covariates,
            angle_phi: cov_fit.diagnostics.angle,
            misspecification_bias: bias.iter().copied().collect(),
            centered: data.center_covariates,
        }),
    })
}

fn cmd_test(args: &TestArgs) -> Result<(), CliError> {
    let table = read_game_table(&args.csv, &CovariateSelection::None)?;
    let labels = table.labels.clone();
    let graph = ComparisonGraph::from_records(&table.records, table.item_count())
        .map_err(with_labels(&labels))?;
    let merit_fit =
        fit(&graph, &Constraint::SumZero, None).map_err(with_labels(&labels))?;
    let seed = args.seed.unwrap_or_else(env_seed);

    let resolve_subset = |subset: &Option<Vec<String>>| -> Result<Option<Vec<usize>>, Error> {
        subset
            .as_ref()
            .map(|labels| {
                labels
                    .iter()
                    .map(|label| {
                        table.index_of(label).ok_or_else(|| Error::InvalidConfig {
                            reason: format!("unknown item '{label}' in --subset"),
                        })
                    })
                    .collect()
            })
            .transpose()
    };

    let result: TestResult = match args.test.as_str() {
        "all_equal" => {
            let subset = resolve_subset(&args.subset)?;
            test_all_equal(&merit_fit, &graph, subset.as_deref(), args.alpha)
                .map_err(with_labels(&labels))?
        }
        "contrasts" => {
            let subset = resolve_subset(&args.subset)?.ok_or_else(|| Error::InvalidConfig {
                reason: "contrasts requires --subset".into(),
            })?;
            test_contrasts(&merit_fit, &graph, &subset, args.alpha)
                .map_err(with_labels(&labels))?
        }
        "all_distinct" => test_all_distinct(&merit_fit, &graph, args.alpha, args.mc_b, seed)
            .map_err(with_labels(&labels))?,
        "item_not_worst" => {
            let label = args.item.as_ref().ok_or_else(|| Error::InvalidConfig {
                reason: "item_not_worst requires --item".into(),
            })?;
            let item = table.index_of(label).ok_or_else(|| Error::InvalidConfig {
                reason: format!("unknown item '{label}'"),
            })?;
            test_item_not_worst(&merit_fit, &graph, item, args.alpha, args.mc_b, seed)
                .map_err(with_labels(&labels))?
        }
        other => {
            return Err(Error::InvalidConfig {
                reason: format!(
                    "unknown test '{other}'; expected all_equal, contrasts, all_distinct or item_not_worst"
                ),
            }
            .into())
        }
    };

    let report = TestReport {
        schema: SCHEMA.into(),
        test: args.test.clone(),
        result,
        seed,
    };
    println!("{}", serde_json::to_string_pretty(&report).expect("report serializes"));
    Ok(())
}

fn cmd_bootstrap(args: &BootstrapArgs) -> Result<(), CliError> {
    let selection = if args.no_covariates {
        CovariateSelection::None
    } else {
        CovariateSelection::All
    };
    let table = read_game_table(&args.csv, &selection)?;
    let labels = table.labels.clone();
    let with_covariates = !table.covariate_names.is_empty();
    let seed = args.seed.unwrap_or_else(env_seed);
    let config = BootstrapConfig {
        replicates: args.replicates,
        seed,
        use_covariates: with_covariates,
    };
    let report = bootstrap_ranks(&table.records, table.item_count(), &config)
        .map_err(with_labels(&labels))?;
    let json = BootstrapJsonReport::from_report(&report, &table.labels, seed, with_covariates);
    std::fs::write(&args.quartiles_csv, json.quartiles_csv()).map_err(Error::from)?;
    println!("{}", serde_json::to_string_pretty(&json).expect("report serializes"));
    Ok(())
}

/// Campaign dispatch for `simulate` config files.
#[derive(Debug, Serialize, Deserialize)]
#[serde(tag = "campaign", rename_all = "snake_case")]
enum CampaignConfig {
    Consistency(ConsistencyConfig),
    Sparse(SparseConfig),
    Precision {
        kinds: Vec<TopologyKind>,
        k_values: Vec<usize>,
        #[serde(default)]
        scale: bool,
    },
}

fn cmd_simulate(args: &SimulateArgs) -> Result<(), CliError> {
    let text = std::fs::read_to_string(&args.config).map_err(Error::from)?;
    let mut config: CampaignConfig =
        serde_json::from_str(&text).map_err(|e| Error::InvalidConfig {
            reason: format!("config file: {e}"),
        })?;
    if let Some(seed) = args.seed {
        match &mut config {
            CampaignConfig::Consistency(c) => c.seed = seed,
            CampaignConfig::Sparse(c) => c.seed = seed,
            CampaignConfig::Precision { .. } => {}
        }
    }

    let report: SimulationReport = match &config {
        CampaignConfig::Consistency(c) => run_consistency_campaign(c)?,
        CampaignConfig::Sparse(c) => run_sparse_campaign(c)?,
        CampaignConfig::Precision {
            kinds,
            k_values,
            scale,
        } => precision_profile(kinds, k_values, *scale)?,
    };

    std::fs::create_dir_all(&args.out).map_err(Error::from)?;
    let csv_path = args.out.join(format!("{}_series.csv", report.campaign));
    std::fs::write(&csv_path, report.to_csv()).map_err(Error::from)?;

    let echo = serde_json::json!({
        "schema": SCHEMA,
        "campaign": report.campaign,
        "config": report.config,
        "seed": report.seed,
        "warnings": report.warnings,
    });
    let echo_path = args.out.join(format!("{}_config.json", report.campaign));
    std::fs::write(
        &echo_path,
        serde_json::to_string_pretty(&echo).expect("echo serializes"),
    )
    .map_err(Error::from)?;

    for warning in &report.warnings {
        eprintln!("warning: {warning}");
    }
    eprintln!("wrote {} and {}", csv_path.display(), echo_path.display());
    Ok(())
}
