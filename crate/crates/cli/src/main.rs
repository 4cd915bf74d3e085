//! `debtlab` command line: simulate studies, check the closed form against
//! the oracle, build analysis tables, and serve live studies.
//!
//! Exit codes: 0 success, 1 usage, 2 data or I/O error, 3 capability.
//! Log verbosity comes from `DEBTLAB_LOG` (e.g. `info`, `debtlab=debug`).

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use debtlab::agents::AgentSpec;
use debtlab::analysis::{build_report, AnalysisDataset, ReportOptions, ReportRequest};
use debtlab::model::{oracle_sweep, ModelParams, Treatment};
use debtlab::session::{Ordering, StudyConfig};
use debtlab::storage::{export_dataset, load_canonical, load_with_import_map, simulate_study, LogicalClock, SimulationPlan, StudyDir};
use debtlab::{AnalysisError, ModelError, StorageError};

#[derive(Parser)]
#[command(name = "debtlab", version, about = "Life-cycle consumption experiment toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run synthetic participants through the session engine and export CSVs.
    Simulate {
        /// Comma-separated agent kinds: optimal, handtomouth, debtaverse, noisy[:SD].
        #[arg(long, default_value = "optimal")]
        agents: String,
        /// Sessions to run.
        #[arg(long, default_value_t = 10)]
        n: usize,
        /// BF, SF, or mixed (alternating).
        #[arg(long, default_value = "BF")]
        ordering: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value = "sim")]
        study_id: String,
        /// Shock seed shared by all sessions of the study.
        #[arg(long, default_value_t = 2016)]
        shock_seed: u64,
    },
    /// Compare the closed-form rule with backward induction on every
    /// reachable node.
    OracleCheck {
        #[arg(long, default_value_t = 3)]
        horizon: usize,
        #[arg(long, default_value_t = ModelParams::DEFAULT_THETA)]
        theta: f64,
        #[arg(long, default_value_t = ModelParams::DEFAULT_SIGMA)]
        sigma: f64,
        /// borrowing or saving.
        #[arg(long, default_value = "borrowing")]
        treatment: String,
        #[arg(long, default_value_t = 1e-6)]
        tolerance: f64,
    },
    /// Build tables and figure data from canonical CSVs or mapped data.
    Analyze {
        /// Canonical export directory, optionally labelled: `US=out/us`.
        #[arg(long = "in")]
        inputs: Vec<String>,
        /// Import map for external data (TOML).
        #[arg(long)]
        import_map: Vec<PathBuf>,
        #[arg(long, default_value = "1,2,3,4,5")]
        tables: String,
        #[arg(long, default_value = "2,3,4")]
        fig: String,
        /// Country whose covariates feed the single-country regressions.
        #[arg(long)]
        focal: Option<String>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Serve a study over WebSocket until SIGTERM or Ctrl-C.
    Serve {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value = "127.0.0.1:8080")]
        bind: String,
        /// Log directory; defaults to `<study_id>-data` next to the config.
        #[arg(long)]
        data: Option<PathBuf>,
    },
}

#[derive(Debug)]
enum Failure {
    Usage(String),
    Data(String),
    Capability(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 1,
            Failure::Data(_) => 2,
            Failure::Capability(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Usage(m) | Failure::Data(m) | Failure::Capability(m) => m,
        }
    }
}

impl From<ModelError> for Failure {
    fn from(e: ModelError) -> Self {
        match e {
            ModelError::Capability { .. } => Failure::Capability(e.to_string()),
            ModelError::InvalidParams(_) => Failure::Usage(e.to_string()),
            _ => Failure::Data(e.to_string()),
        }
    }
}

impl From<StorageError> for Failure {
    fn from(e: StorageError) -> Self {
        Failure::Data(e.to_string())
    }
}

impl From<AnalysisError> for Failure {
    fn from(e: AnalysisError) -> Self {
        Failure::Data(e.to_string())
    }
}

fn init_logging(default: &str) {
    let filter = tracing_subscriber::EnvFilter::try_from_env("DEBTLAB_LOG")
        .unwrap_or_else(|_| tracing_subscriber::EnvFilter::new(default));
    let _ = tracing_subscriber::fmt().with_env_filter(filter).with_writer(std::io::stderr).try_init();
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let serving = matches!(cli.command, Command::Serve { .. });
    init_logging(if serving { "info" } else { "warn" });
    let result = match cli.command {
        Command::Simulate { agents, n, ordering, seed, out, study_id, shock_seed } => {
            simulate(&agents, n, &ordering, seed, &out, &study_id, shock_seed)
        }
        Command::OracleCheck { horizon, theta, sigma, treatment, tolerance } => {
            oracle_check(horizon, theta, sigma, &treatment, tolerance)
        }
        Command::Analyze { inputs, import_map, tables, fig, focal, out } => analyze(&inputs, &import_map, &tables, &fig, focal, &out),
        Command::Serve { config, bind, data } => serve(&config, &bind, data),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}

fn parse_agents(spec: &str) -> Result<Vec<AgentSpec>, Failure> {
    spec.split(',')
        .map(|s| AgentSpec::parse(s).ok_or_else(|| Failure::Usage(format!("unknown agent kind {s:?}"))))
        .collect()
}

fn simulate(agents: &str, n: usize, ordering: &str, seed: u64, out: &Path, study_id: &str, shock_seed: u64) -> Result<(), Failure> {
    let agents = parse_agents(agents)?;
    if n == 0 {
        return Err(Failure::Usage("--n must be at least 1".into()));
    }
    let orderings: Vec<(Ordering, usize)> = match ordering.to_ascii_lowercase().as_str() {
        "mixed" => vec![(Ordering::BorrowingFirst, n.div_ceil(2)), (Ordering::SavingFirst, n / 2)],
        other => {
            let o = Ordering::parse(other).ok_or_else(|| Failure::Usage(format!("unknown ordering {ordering:?}")))?;
            vec![(o, n)]
        }
    };
    let clock = LogicalClock::new(0, 1_000);
    let mut studies = Vec::new();
    for (o, count) in orderings {
        if count == 0 {
            continue;
        }
        let id = format!("{study_id}-{}", o.label().to_ascii_lowercase());
        let config = StudyConfig {
            study_id: id.clone(),
            ordering: o,
            shock_seed,
            consumption_step: 0.0,
            ..StudyConfig::default()
        };
        let dir = StudyDir::new(out.join("logs").join(&id));
        if !dir.log_files()?.is_empty() {
            return Err(Failure::Data(format!("{} already holds session logs", dir.root().display())));
        }
        let plan = SimulationPlan {
            config: config.clone(),
            agents: agents.clone(),
            participants: count,
            id_prefix: format!("{}-", o.label().to_ascii_lowercase()),
            seed: ordering_seed(seed, o),
        };
        let records = simulate_study(&plan, Some(dir), &clock)?;
        studies.push((config, records));
    }
    export_dataset(&studies, out)?;
    let sessions: usize = studies.iter().map(|(_, r)| r.len()).sum();
    println!("simulated {sessions} sessions; CSVs in {}", out.display());
    Ok(())
}

/// Distinct participant streams per ordering from one user seed.
fn ordering_seed(seed: u64, o: Ordering) -> u64 {
    match o {
        Ordering::BorrowingFirst => seed,
        Ordering::SavingFirst => seed ^ 0x9e37_79b9_7f4a_7c15,
    }
}

fn oracle_check(horizon: usize, theta: f64, sigma: f64, treatment: &str, tolerance: f64) -> Result<(), Failure> {
    let treatment = Treatment::parse(treatment).ok_or_else(|| Failure::Usage(format!("unknown treatment {treatment:?}")))?;
    let params = ModelParams::for_treatment(treatment)
        .with_horizon(horizon)
        .with_theta(theta)
        .with_sigma(sigma);
    let report = oracle_sweep(&params)?;
    let pass = report.max_abs_diff <= tolerance;
    println!(
        "horizon={horizon} theta={theta} sigma={sigma} treatment={} nodes={} max_abs_diff={:.3e} {}",
        treatment.label(),
        report.nodes,
        report.max_abs_diff,
        if pass { "PASS" } else { "FAIL" }
    );
    if pass {
        Ok(())
    } else {
        Err(Failure::Data(format!("closed form differs from the oracle by {:.3e}", report.max_abs_diff)))
    }
}

fn parse_list(s: &str, what: &str) -> Result<Vec<u8>, Failure> {
    s.split(',')
        .filter(|p| !p.trim().is_empty())
        .map(|p| p.trim().parse().map_err(|_| Failure::Usage(format!("bad {what} number {p:?}"))))
        .collect()
}

fn analyze(inputs: &[String], maps: &[PathBuf], tables: &str, fig: &str, focal: Option<String>, out: &Path) -> Result<(), Failure> {
    if inputs.is_empty() && maps.is_empty() {
        return Err(Failure::Usage("give at least one --in DIR or --import-map FILE".into()));
    }
    let request = ReportRequest {
        tables: parse_list(tables, "table")?,
        figures: parse_list(fig, "figure")?,
        options: ReportOptions { focal_country: focal },
        ..ReportRequest::default()
    };
    let mut dataset = AnalysisDataset::default();
    for input in inputs {
        let (label, dir) = match input.split_once('=') {
            Some((l, d)) => (l.to_string(), PathBuf::from(d)),
            None => {
                let dir = PathBuf::from(input);
                let label = dir.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_else(|| "default".into());
                (label, dir)
            }
        };
        dataset = dataset.merge(load_canonical(&dir, &label)?)?;
    }
    for map in maps {
        dataset = dataset.merge(load_with_import_map(map)?)?;
    }
    if dataset.is_empty() {
        return Err(Failure::Data("empty report: the inputs hold no participant-round rows".into()));
    }
    let files = build_report(&dataset, &request)?;
    std::fs::create_dir_all(out).map_err(|e| Failure::Data(format!("{}: {e}", out.display())))?;
    for (name, text) in &files {
        let path = out.join(name);
        std::fs::write(&path, text).map_err(|e| Failure::Data(format!("{}: {e}", path.display())))?;
        println!("{}", path.display());
    }
    Ok(())
}

fn serve(config_path: &Path, bind: &str, data: Option<PathBuf>) -> Result<(), Failure> {
    let text = std::fs::read_to_string(config_path).map_err(|e| Failure::Data(format!("{}: {e}", config_path.display())))?;
    let config = StudyConfig::from_flat_str(&text).map_err(|e| Failure::Data(format!("{}: {e}", config_path.display())))?;
    let data = data.unwrap_or_else(|| {
        config_path
            .parent()
            .unwrap_or(Path::new("."))
            .join(format!("{}-data", config.study_id))
    });
    let runtime = tokio::runtime::Runtime::new().map_err(|e| Failure::Data(e.to_string()))?;
    runtime.block_on(async move {
        let service = debtlab_service::Service::open(config, &data).map_err(|e| Failure::Data(e.to_string()))?;
        let listener = debtlab_service::bind(bind).await.map_err(|e| Failure::Data(e.to_string()))?;
        println!("serving {} on {}", service.study_id(), listener.local_addr().map(|a| a.to_string()).unwrap_or_default());
        service
            .run(listener, debtlab_service::shutdown_signal())
            .await
            .map_err(|e| Failure::Data(e.to_string()))
    })
}
