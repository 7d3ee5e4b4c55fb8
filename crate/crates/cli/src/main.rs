use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use reefpinn::bench::{
    build_report, read_result_files, run_holdout_with, run_sparsity, synth_generate, write_param_summary,
    write_result_files, write_rmse_matrix, write_win_fractions, ExperimentSpec, Method, SynthConfig, DEFAULT_LEVELS,
    DEFAULT_SEEDS,
};
use reefpinn::dataset::{load_bundle, write_bundle, ReefDataset, Window};
use reefpinn::model::PinnModel;
use reefpinn::physics::{PhysicalParams, GBR_TZ_OFFSET, KAPPA_LITERATURE, KD_LITERATURE};
use reefpinn::stress::{matched_profile, write_profile_csv, BleachingThreshold};
use reefpinn::time::{format_instant, parse_instant, DAY};
use reefpinn::training::{train, write_run, TrainConfig};
use reefpinn::{DepthPredictor, Error, Result};

#[global_allocator]
static GLOBAL: mimalloc::MiMalloc = mimalloc::MiMalloc;

const FULL_EPOCHS: usize = 15_000;
const REDUCED_EPOCHS: usize = 5_000;

#[derive(Parser)]
#[command(name = "reefpinn", version, about = "Reef subsurface temperature reconstruction")]
struct Cli {
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Args, Clone)]
struct TrainOpts {
    /// Optimizer steps; ignored with --full.
    #[arg(long, default_value_t = REDUCED_EPOCHS)]
    epochs: usize,
    /// Train for the full 15000 steps.
    #[arg(long)]
    full: bool,
    #[arg(long)]
    batch: Option<usize>,
    #[arg(long)]
    collocation: Option<usize>,
}

impl TrainOpts {
    fn config(&self, seed: u64) -> TrainConfig {
        let d = TrainConfig::default();
        TrainConfig {
            epochs: if self.full { FULL_EPOCHS } else { self.epochs },
            batch_size: self.batch.unwrap_or(d.batch_size),
            n_collocation: self.collocation.unwrap_or(d.n_collocation),
            seed,
            ..d
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Validate a dataset bundle and print its report.
    Ingest {
        dir: PathBuf,
        #[arg(long)]
        manifest: Option<PathBuf>,
    },
    /// Generate a synthetic twin bundle from a forward solve.
    Synth {
        #[arg(long, default_value_t = KAPPA_LITERATURE)]
        kappa0: f64,
        #[arg(long, default_value_t = KD_LITERATURE)]
        kd: f64,
        #[arg(long, default_value_t = 0.0)]
        alpha: f64,
        #[arg(long, value_delimiter = ',', default_value = "0.5,3,5,10,18")]
        depths: Vec<f64>,
        #[arg(long, default_value_t = 0.05)]
        noise: f64,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        /// Window start (UTC).
        #[arg(long, default_value = "2020-01-01T00:00:00Z")]
        start: String,
        #[arg(long, default_value_t = 365)]
        days: i64,
        /// Logger cadence, s.
        #[arg(long, default_value_t = 600)]
        cadence: i64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train the PINN on a bundle.
    Train {
        dataset: PathBuf,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[command(flatten)]
        opts: TrainOpts,
        /// Run directory for model.json, loss_history.csv and run.json.
        #[arg(long)]
        out: PathBuf,
    },
    /// Predict a depth time series from a checkpoint.
    Predict {
        /// model.json or the run directory holding it.
        ckpt: PathBuf,
        #[arg(long)]
        depth: f64,
        #[arg(long)]
        from: String,
        #[arg(long)]
        to: String,
        /// Step, s.
        #[arg(long, default_value_t = 3600)]
        step: i64,
    },
    /// Holdout experiment at one depth.
    Holdout {
        dataset: PathBuf,
        #[arg(long)]
        depth: f64,
        /// Training depths; all usable depths when omitted.
        #[arg(long)]
        k: Option<usize>,
        #[arg(long, value_delimiter = ',', default_value = "pinn,gp,idw,nn,rf,fd,satellite")]
        methods: Vec<String>,
        #[arg(long, value_delimiter = ',')]
        seeds: Option<Vec<u64>>,
        #[command(flatten)]
        opts: TrainOpts,
        #[arg(long, default_value = "results")]
        out: PathBuf,
    },
    /// Holdout experiments over decreasing training-depth counts.
    Sparsity {
        dataset: PathBuf,
        #[arg(long)]
        depth: f64,
        #[arg(long, value_delimiter = ',')]
        levels: Option<Vec<usize>>,
        #[arg(long, value_delimiter = ',', default_value = "pinn,gp,idw,nn,rf,fd,satellite")]
        methods: Vec<String>,
        #[arg(long, value_delimiter = ',')]
        seeds: Option<Vec<u64>>,
        #[command(flatten)]
        opts: TrainOpts,
        #[arg(long, default_value = "results")]
        out: PathBuf,
    },
    /// Per-depth logger, model and satellite DHD.
    Dhd {
        dataset: PathBuf,
        #[arg(long)]
        ckpt: PathBuf,
        /// Override the MMM + 1 °C threshold.
        #[arg(long)]
        threshold: Option<f64>,
    },
    /// Aggregate result files under a directory.
    Report {
        run_dir: PathBuf,
        /// Output directory for the tables; defaults to `run_dir`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn load(dir: &Path) -> Result<ReefDataset> {
    Ok(load_bundle(dir, None)?.0)
}

fn checkpoint_path(p: &Path) -> PathBuf {
    if p.is_dir() {
        p.join("model.json")
    } else {
        p.to_path_buf()
    }
}

fn parse_methods(names: &[String]) -> Result<Vec<Method>> {
    names.iter().map(|s| s.parse()).collect()
}

fn experiment(
    ds: &ReefDataset,
    depth: f64,
    k: Option<usize>,
    methods: &[String],
    seeds: &Option<Vec<u64>>,
    opts: &TrainOpts,
) -> Result<ExperimentSpec> {
    let mut spec = ExperimentSpec::new(&ds.name, depth, k);
    spec.methods = parse_methods(methods)?;
    spec.seeds = seeds.clone().unwrap_or_else(|| DEFAULT_SEEDS.to_vec());
    spec.train = opts.config(spec.seeds[0]);
    spec.train.validate()?;
    Ok(spec)
}

fn run(cli: Cli) -> Result<()> {
    let stdout = std::io::stdout();
    match cli.cmd {
        Command::Ingest { dir, manifest } => {
            let (_, report) = load_bundle(&dir, manifest.as_deref())?;
            println!("{}", serde_json::to_string_pretty(&report)?);
        }
        Command::Synth { kappa0, kd, alpha, depths, noise, seed, start, days, cadence, out } => {
            let start = parse_instant(&start)?;
            let window = Window::new(start, start + days * DAY)?;
            let mut params = PhysicalParams::new(kappa0, alpha, kd);
            params.tz_offset_hours = GBR_TZ_OFFSET;
            let cfg = SynthConfig::new(params, depths, window, cadence, noise, seed);
            let twin = synth_generate(&cfg)?;
            write_bundle(&twin.dataset, &out)?;
            eprintln!("wrote {} ({} depths)", out.display(), twin.dataset.depths.len());
        }
        Command::Train { dataset, seed, opts, out } => {
            let ds = load(&dataset)?;
            let cfg = opts.config(seed);
            cfg.validate()?;
            let outcome = train(&ds, &cfg)?;
            write_run(&out, &ds, &cfg, &outcome)?;
            let p = outcome.learned;
            eprintln!(
                "trained in {:.0} s: kappa0 {:.3e} alpha {:.4} kd {:.4}",
                outcome.wall_seconds, p.kappa0, p.alpha, p.kd
            );
        }
        Command::Predict { ckpt, depth, from, to, step } => {
            let model = PinnModel::load(&checkpoint_path(&ckpt))?;
            let (from, to) = (parse_instant(&from)?, parse_instant(&to)?);
            if step <= 0 || to < from {
                return Err(Error::Invalid("need step > 0 and to ≥ from".into()));
            }
            let times: Vec<i64> = (0..).map(|k| from + k * step).take_while(|&t| t <= to).collect();
            let points: Vec<(f64, f64)> = times.iter().map(|&t| (depth, t as f64)).collect();
            let temps = model.predict_many(&points)?;
            let mut out = stdout.lock();
            writeln!(out, "time,temp")?;
            for (t, v) in times.iter().zip(temps) {
                writeln!(out, "{},{v:.6}", format_instant(*t))?;
            }
        }
        Command::Holdout { dataset, depth, k, methods, seeds, opts, out } => {
            let ds = load(&dataset)?;
            let spec = experiment(&ds, depth, k, &methods, &seeds, &opts)?;
            let res = run_holdout_with(&spec, &ds, |m, s, e| eprintln!("{m} seed {s}: RMSE {e:.4} °C"))?;
            let dir = write_result_files(&out, &res)?;
            eprintln!("results in {}", dir.display());
        }
        Command::Sparsity { dataset, depth, levels, methods, seeds, opts, out } => {
            let ds = load(&dataset)?;
            let spec = experiment(&ds, depth, None, &methods, &seeds, &opts)?;
            let levels = levels.unwrap_or_else(|| DEFAULT_LEVELS.to_vec());
            for res in run_sparsity(&spec, &ds, &levels)? {
                let dir = write_result_files(&out, &res)?;
                eprintln!("k = {}: results in {}", res.k(), dir.display());
            }
        }
        Command::Dhd { dataset, ckpt, threshold } => {
            let ds = load(&dataset)?;
            let model = PinnModel::load(&checkpoint_path(&ckpt))?;
            let th = match threshold {
                Some(t) => BleachingThreshold { mmm: t - 1.0, threshold: t },
                None => BleachingThreshold::from_sst(&ds.sst)?,
            };
            write_profile_csv(stdout.lock(), &matched_profile(&ds, &model, th)?)?;
        }
        Command::Report { run_dir, out } => {
            let runs = read_result_files(&run_dir)?;
            if runs.is_empty() {
                return Err(Error::InsufficientData(format!("no result files under {}", run_dir.display())));
            }
            let report = build_report(&runs);
            let out = out.unwrap_or(run_dir);
            std::fs::create_dir_all(&out)?;
            write_rmse_matrix(std::fs::File::create(out.join("rmse_matrix.csv"))?, &report)?;
            write_win_fractions(std::fs::File::create(out.join("win_fractions.csv"))?, &report)?;
            write_param_summary(std::fs::File::create(out.join("pinn_params.csv"))?, &report)?;
            std::fs::write(out.join("summary.json"), serde_json::to_vec_pretty(&report)?)?;
            write_rmse_matrix(stdout.lock(), &report)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_numerical() { 3 } else { 2 })
        }
    }
}
