//! `rrmimo`: run the BER experiments, print operation counts, or run the
//! invariant suite.
//!
//! Settings come from the defaults, then an optional TOML file
//! (`--config`), then command-line overrides. CSV goes to `--out`; a relative
//! path, or the default `<subcommand>.csv`, is placed under `$RRMIMO_OUT_DIR`
//! when that is set. Without either no file is written.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use rrmimo::adaptation::RankPolicy;
use rrmimo::analysis::{count_operations, measured_vs_analytic, Algorithm, ComplexityParams};
use rrmimo::equalizer::Mode;
use rrmimo::harness::record::write_csv_file;
use rrmimo::harness::{
    ber_vs_symbols, fading_sweep, ofdm_antenna_sweep, rank_sweep, selftest, snr_sweep, AlgorithmKind, BerRecord,
    ExperimentConfig, OUT_DIR_ENV,
};
use rrmimo::parallel::Execution;

#[derive(Parser)]
#[command(name = "rrmimo", version, about = "Reduced-rank MIMO equalization experiments")]
struct Cli {
    /// TOML experiment description.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// CSV output path.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(flatten)]
    overrides: Overrides,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Overrides {
    #[arg(long, global = true)]
    snr_db: Option<f64>,
    #[arg(long, global = true)]
    lambda: Option<f64>,
    #[arg(long, global = true)]
    delta: Option<f64>,
    /// `fixed-D` or `auto-DMIN-DMAX`.
    #[arg(long, global = true)]
    rank_policy: Option<RankPolicy>,
    #[arg(long, global = true)]
    mode: Option<ModeArg>,
    #[arg(long, global = true)]
    algorithm: Option<AlgorithmKind>,
    #[arg(long, global = true)]
    n_training: Option<usize>,
    #[arg(long, global = true)]
    n_symbols: Option<usize>,
    #[arg(long, global = true)]
    n_runs: Option<usize>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    fd_t: Option<f64>,
    /// Run the Monte Carlo loop on the calling thread only.
    #[arg(long, global = true)]
    sequential: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Dfe,
    Linear,
}

#[derive(Subcommand)]
enum Command {
    /// BER against a fixed rank D.
    RankSweep {
        #[arg(long, value_delimiter = ',')]
        d: Vec<usize>,
    },
    /// Windowed BER against received symbols.
    BerSymbols {
        #[arg(long, value_delimiter = ',')]
        checkpoints: Vec<usize>,
        /// Rank policies of the proposed receiver.
        #[arg(long, value_delimiter = ',', default_values = ["fixed-3", "fixed-8", "auto-3-8"])]
        policies: Vec<RankPolicy>,
        #[arg(long)]
        no_full_rank: bool,
    },
    /// BER against SNR.
    BerSnr {
        #[arg(long, value_delimiter = ',')]
        values: Vec<f64>,
        #[arg(long, value_delimiter = ',', default_values = ["proposed", "full-rank"])]
        algorithms: Vec<AlgorithmKind>,
    },
    /// BER against normalized Doppler, λ chosen per point.
    Fading {
        #[arg(long, value_delimiter = ',')]
        values: Vec<f64>,
        #[arg(long, value_delimiter = ',', default_values = ["proposed", "full-rank"])]
        algorithms: Vec<AlgorithmKind>,
    },
    /// MIMO-OFDM BER against antenna count.
    Ofdm {
        #[arg(long, value_delimiter = ',')]
        antennas: Vec<usize>,
        #[arg(long, value_delimiter = ',', default_values = ["proposed", "full-rank"])]
        algorithms: Vec<AlgorithmKind>,
    },
    /// Operation counts per symbol.
    Complexity {
        #[arg(long)]
        m: u64,
        #[arg(long)]
        d: u64,
        #[arg(long, default_value_t = 3)]
        d_min: u64,
        #[arg(long, default_value_t = 8)]
        d_max: u64,
        /// Also measure the full-rank and proposed updates at this M.
        #[arg(long)]
        measure: bool,
    },
    /// Run the invariant suite.
    Selftest,
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::RankSweep { .. } => "rank-sweep",
            Command::BerSymbols { .. } => "ber-symbols",
            Command::BerSnr { .. } => "ber-snr",
            Command::Fading { .. } => "fading",
            Command::Ofdm { .. } => "ofdm",
            Command::Complexity { .. } => "complexity",
            Command::Selftest => "selftest",
        }
    }
}

type Failure = Box<dyn std::error::Error>;

fn load_config(cli: &Cli) -> Result<ExperimentConfig, Failure> {
    let mut cfg = match &cli.config {
        Some(path) => ExperimentConfig::from_path(path)?,
        None => ExperimentConfig::default(),
    };
    let o = &cli.overrides;
    macro_rules! set {
        ($($field:ident <- $value:expr),* $(,)?) => {
            $(if let Some(v) = $value { cfg.$field = v; })*
        };
    }
    set!(
        snr_db <- o.snr_db,
        lambda <- o.lambda,
        delta <- o.delta,
        rank_policy <- o.rank_policy,
        algorithm <- o.algorithm,
        n_training <- o.n_training,
        n_symbols <- o.n_symbols,
        n_runs <- o.n_runs,
        master_seed <- o.seed,
    );
    if let Some(m) = o.mode {
        cfg.mode = match m {
            ModeArg::Dfe => Mode::Dfe,
            ModeArg::Linear => Mode::Linear,
        };
    }
    if let Some(fd) = o.fd_t {
        cfg.fading.fd_t = fd;
    }
    if o.sequential {
        cfg.execution = Execution::Sequential;
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Values from the command line, else from a matching `[sweep]` table, else
/// the built-in default.
fn sweep_values(given: &[f64], cfg: &ExperimentConfig, names: &[&str], default: &[f64]) -> Vec<f64> {
    if !given.is_empty() {
        return given.to_vec();
    }
    match &cfg.sweep {
        Some(s) if names.contains(&s.variable.as_str()) => s.values.clone(),
        _ => default.to_vec(),
    }
}

fn as_counts(values: Vec<f64>) -> Vec<usize> {
    values.into_iter().map(|v| v as usize).collect()
}

fn out_path(cli: &Cli) -> Option<PathBuf> {
    let dir = std::env::var_os(OUT_DIR_ENV).map(PathBuf::from);
    match (&cli.out, dir) {
        (Some(p), Some(d)) if p.is_relative() => Some(d.join(p)),
        (Some(p), _) => Some(p.clone()),
        (None, Some(d)) => Some(d.join(format!("{}.csv", cli.command.name()))),
        (None, None) => None,
    }
}

fn run_experiment(cli: &Cli) -> Result<Vec<BerRecord>, Failure> {
    let cfg = load_config(cli)?;
    let outcome = match &cli.command {
        Command::RankSweep { d } => {
            let d: Vec<f64> = d.iter().map(|&v| v as f64).collect();
            let values = as_counts(sweep_values(&d, &cfg, &["d", "rank"], &[1., 2., 3., 4., 5., 6., 7., 8.]));
            rank_sweep(&cfg, &values)?
        }
        Command::BerSymbols { checkpoints, policies, no_full_rank } => {
            let given: Vec<f64> = checkpoints.iter().map(|&v| v as f64).collect();
            let step = (cfg.n_symbols / 10).max(1);
            let default: Vec<f64> = (1..=cfg.n_symbols / step).map(|k| (k * step) as f64).collect();
            let values = as_counts(sweep_values(&given, &cfg, &["symbols"], &default));
            ber_vs_symbols(&cfg, &values, policies, !no_full_rank)?
        }
        Command::BerSnr { values, algorithms } => {
            snr_sweep(&cfg, &sweep_values(values, &cfg, &["snr", "snr_db"], &[0., 3., 6., 9., 12., 15.]), algorithms)?
        }
        Command::Fading { values, algorithms } => {
            let values = sweep_values(values, &cfg, &["fd_t", "fdt"], &[1e-4, 5e-4, 1e-3, 5e-3]);
            fading_sweep(&cfg, &values, algorithms)?
        }
        Command::Ofdm { antennas, algorithms } => {
            let given: Vec<f64> = antennas.iter().map(|&v| v as f64).collect();
            let values = as_counts(sweep_values(&given, &cfg, &["antennas"], &[2., 4., 8.]));
            ofdm_antenna_sweep(&cfg, &values, algorithms)?
        }
        Command::Complexity { .. } | Command::Selftest => unreachable!("handled in main"),
    };
    Ok(outcome.records)
}

#[derive(serde::Serialize)]
struct ComplexityRow {
    algorithm: Algorithm,
    m: u64,
    d: u64,
    d_min: u64,
    d_max: u64,
    additions: u64,
    multiplications: u64,
}

fn complexity(cli: &Cli, params: ComplexityParams, measure: bool) -> Result<(), Failure> {
    let mut rows = Vec::new();
    println!("per-symbol operations, M={} D={}", params.m, params.d);
    for a in Algorithm::ESTIMATORS {
        let r = count_operations(a, params)?;
        println!("{:<26} additions={:<10} multiplications={}", a.name(), r.additions, r.multiplications);
        rows.push(r);
    }
    println!("rank selection, D_min={} D_max={}", params.d_min, params.d_max);
    for a in Algorithm::ORDER_SELECTION {
        let r = count_operations(a, params)?;
        println!("{:<26} additions={:<10} multiplications={}", a.name(), r.additions, r.multiplications);
        rows.push(r);
    }
    if measure {
        for row in measured_vs_analytic(&[params.m as usize], params.d as usize, 200, 1)? {
            println!(
                "measured {:<17} multiplications={:.0} (formula {}) additions={:.0} (formula {})",
                row.algorithm.name(),
                row.measured_multiplications,
                row.analytic_multiplications,
                row.measured_additions,
                row.analytic_additions
            );
        }
    }
    if let Some(path) = out_path(cli) {
        if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
            std::fs::create_dir_all(parent)?;
        }
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_path(&path)?;
        for r in rows {
            let p = r.params;
            w.serialize(ComplexityRow {
                algorithm: r.algorithm,
                m: p.m,
                d: p.d,
                d_min: p.d_min,
                d_max: p.d_max,
                additions: r.additions,
                multiplications: r.multiplications,
            })?;
        }
        w.flush()?;
        eprintln!("wrote {}", path.display());
    }
    Ok(())
}

fn run(cli: &Cli) -> Result<bool, Failure> {
    match &cli.command {
        Command::Selftest => {
            let checks = selftest();
            for c in &checks {
                println!("[{}] {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
            }
            Ok(checks.iter().all(|c| c.passed))
        }
        Command::Complexity { m, d, d_min, d_max, measure } => {
            complexity(cli, ComplexityParams { m: *m, d: *d, d_min: *d_min, d_max: *d_max }, *measure)?;
            Ok(true)
        }
        _ => {
            let records = run_experiment(cli)?;
            for r in &records {
                println!("{r}");
            }
            if let Some(path) = out_path(cli) {
                write_csv_file(&records, &path)?;
                eprintln!("wrote {}", path.display());
            }
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
