use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use fdmimo::channel::nmse;
use fdmimo::harness::bench::{draw_trial, run_estimator_traced, Dictionaries};
use fdmimo::harness::config::parse_estimators;
use fdmimo::harness::fig1::{fig1_csv, quick_settings};
use fdmimo::harness::io::{
    read_channel, read_geometry, read_measurements, write_channel, write_estimate, write_geometry,
    write_measurements, ComplexMatrix, EstimateFile,
};
use fdmimo::harness::{run_bench, run_fig1, run_gradcheck, ExperimentConfig, GradcheckSettings, Link};

#[derive(Parser)]
#[command(name = "fdmimo", version, about = "Channel estimation experiments for planar-array MIMO links")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// TOML experiment file; missing keys take their defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Master seed, overriding the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Comma-separated estimators: anm, gd, omp, music.
    #[arg(long)]
    estimators: Option<String>,
    /// Worker threads; all cores by default.
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Draw one trial and write its geometries, channel and measurements.
    Gen {
        #[command(flatten)]
        common: Common,
        /// Index into the configured SNR list.
        #[arg(long, default_value_t = 0)]
        snr_index: usize,
        #[arg(long, default_value_t = 0)]
        trial: usize,
    },
    /// Run estimators on files written by `gen`; writes one estimate file per
    /// estimator and iteration traces for anm and gd.
    Estimate {
        #[command(flatten)]
        common: Common,
        /// Directory holding tx.json, rx.json, measurements.json and optionally channel.json.
        #[arg(long)]
        input: PathBuf,
    },
    /// Monte Carlo NMSE sweep; writes bench.csv, trials.json and timings.csv.
    Bench {
        #[command(flatten)]
        common: Common,
    },
    /// Relaxation accuracy against path separation; writes fig1.csv.
    Fig1 {
        #[command(flatten)]
        common: Common,
        /// 8 by 8 arrays per side, one path, three draws per separation.
        #[arg(long)]
        quick: bool,
    },
    /// Finite-difference check of the gradients; exits non-zero on failure.
    Gradcheck {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 100)]
        instances: usize,
        #[arg(long, default_value_t = 1e-5)]
        tolerance: f64,
    },
    /// Print a complete configuration file.
    Config {
        #[arg(long, value_enum, default_value_t = Preset::Upa)]
        preset: Preset,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Preset {
    Upa,
    Circular,
}

impl Common {
    fn load(&self) -> Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(p) => ExperimentConfig::load(p).with_context(|| format!("loading {}", p.display()))?,
            None => ExperimentConfig::default(),
        };
        if let Some(s) = self.seed {
            cfg.seed = s;
            cfg.fig1.seed = s;
        }
        if let Some(list) = &self.estimators {
            cfg.estimators = parse_estimators(list)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn out_dir(&self, cfg: &ExperimentConfig) -> PathBuf {
        self.out.clone().or_else(|| cfg.output.clone()).unwrap_or_else(|| PathBuf::from("."))
    }
}

fn gen(common: &Common, snr_index: usize, trial: usize) -> Result<()> {
    let cfg = common.load()?;
    let link = cfg.link()?;
    let (set, h, meas) = draw_trial(&cfg, &link, snr_index, trial)?;
    let out = common.out_dir(&cfg);
    std::fs::create_dir_all(&out)?;
    write_geometry(&out.join("tx.json"), &link.tx)?;
    write_geometry(&out.join("rx.json"), &link.rx)?;
    write_channel(&out.join("channel.json"), &h, Some(&set))?;
    write_measurements(&out.join("measurements.json"), &meas)?;
    println!(
        "wrote {} (snr {} dB, trial {trial}, {} paths, {}x{} channel, {} beams)",
        out.display(),
        cfg.snr_db[snr_index],
        set.len(),
        h.nrows(),
        h.ncols(),
        meas.config().codebook().p()
    );
    Ok(())
}

fn estimate(common: &Common, input: &Path) -> Result<()> {
    let mut cfg = common.load()?;
    let tx = read_geometry(&input.join("tx.json"))?;
    let rx = read_geometry(&input.join("rx.json"))?;
    let meas = read_measurements(&input.join("measurements.json"))?;
    let truth = match input.join("channel.json") {
        p if p.exists() => Some(read_channel(&p)?),
        _ => None,
    };
    if let Some(Some(set)) = truth.as_ref().map(|t| t.path_set()).transpose()? {
        cfg.paths = set.len();
    }
    let truth = truth.map(|t| t.channel()).transpose()?;
    let link = Link { tx, rx, codebook: meas.config().codebook().clone() };
    let dicts = Dictionaries::for_config(&cfg, &link)?;
    let out = common.out.clone().unwrap_or_else(|| input.to_path_buf());
    std::fs::create_dir_all(&out)?;
    println!("estimator,nmse_db,wall_time_s");
    for &kind in &cfg.estimators {
        let start = Instant::now();
        let (est, diagnostics, trace) = match run_estimator_traced(kind, &meas, &link, &cfg, &dicts) {
            Ok(v) => v,
            Err(e) => {
                eprintln!("{kind}: {e}");
                continue;
            }
        };
        let wall_time_s = start.elapsed().as_secs_f64();
        let err = truth.as_ref().map(|t| nmse(&est, t)).transpose()?;
        let file = EstimateFile {
            estimator: kind,
            h: ComplexMatrix::from_mat(est.entries()),
            nmse: err,
            wall_time_s,
            diagnostics,
        };
        write_estimate(&out.join(format!("estimate_{kind}.json")), &file)?;
        if let Some(t) = trace {
            std::fs::write(out.join(format!("trace_{kind}.csv")), t)?;
        }
        let db = err.map_or("NaN".to_string(), |v| format!("{:.3}", 10.0 * v.log10()));
        println!("{kind},{db},{wall_time_s:.4}");
    }
    Ok(())
}

fn bench(common: &Common) -> Result<()> {
    let cfg = common.load()?;
    let report = run_bench(&cfg, common.threads)?;
    let out = common.out_dir(&cfg);
    report.write(&out)?;
    print!("{}", report.csv());
    Ok(())
}

fn fig1(common: &Common, quick: bool) -> Result<()> {
    let cfg = common.load()?;
    let mut settings = if quick { quick_settings() } else { cfg.fig1.clone() };
    settings.seed = cfg.fig1.seed;
    let rows = run_fig1(&settings, common.threads)?;
    let out = common.out_dir(&cfg);
    std::fs::create_dir_all(&out)?;
    let csv = fig1_csv(&rows);
    std::fs::write(out.join("fig1.csv"), &csv)?;
    print!("{csv}");
    Ok(())
}

fn gradcheck(common: &Common, instances: usize, tolerance: f64) -> Result<bool> {
    let seed = match &common.config {
        Some(_) => common.load()?.seed,
        None => common.seed.unwrap_or(1),
    };
    let settings = GradcheckSettings { instances, seed, tolerance, ..GradcheckSettings::default() };
    let start = Instant::now();
    let rep = run_gradcheck(&settings)?;
    println!(
        "{} instances, max relative error {:.3e}, mean {:.3e}, tolerance {:.1e}, {:.3} s",
        rep.instances,
        rep.max_rel_error,
        rep.mean_rel_error,
        rep.tolerance,
        start.elapsed().as_secs_f64()
    );
    if !rep.passed() {
        eprintln!("failing instances: {:?}", rep.failures);
    }
    Ok(rep.passed())
}

fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Gen { common, snr_index, trial } => gen(&common, snr_index, trial)?,
        Command::Estimate { common, input } => estimate(&common, &input)?,
        Command::Bench { common } => bench(&common)?,
        Command::Fig1 { common, quick } => fig1(&common, quick)?,
        Command::Gradcheck { common, instances, tolerance } => {
            if instances == 0 {
                bail!("--instances must be at least 1");
            }
            return gradcheck(&common, instances, tolerance);
        }
        Command::Config { preset } => {
            let cfg = match preset {
                Preset::Upa => ExperimentConfig::default(),
                Preset::Circular => ExperimentConfig::circular(),
            };
            print!("{}", cfg.to_toml_string()?);
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
