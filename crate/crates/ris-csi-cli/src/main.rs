//! Command-line surface of the simulation laboratory.
//!
//! Subcommands: `gen-data` (dataset files), `train` (one operating point or
//! a grid), `eval` (SNR / ratio sweeps from checkpoints), `flops`
//! (complexity report), `selftest` (oracle and property suite),
//! `print-config` (resolved configuration). Exit codes: 0 success, 1 failed
//! run, 2 usage error.

mod selftest;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Parser, Subcommand, ValueEnum};

use ris_csi::config::ExperimentConfig;
use ris_csi::nn::{are_dnn_spec, de_dnn_spec, irp_dnn_spec};
use ris_csi::pipeline::{
    build_stage_dataset, flop_report_for_specs, load_checkpoint, save_dataset, train_pipeline,
    DatasetRequest, DirectSource, PipelineReport, Split, Stage, TrainReport, UpstreamNets,
};
use ris_csi::sweep::{sweep_ratio, sweep_snr, ExperimentResult, ModelStore};

#[derive(Parser)]
#[command(name = "ris-csi", version, about = "RIS-aided MIMO CSI acquisition laboratory")]
struct Cli {
    /// TOML experiment configuration (defaults to the desk-scale profile).
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Override the experiment seed.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Override the output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Desk-scale profile: M=8, N=32, N1=8, 9k/1k samples, 50 epochs (default).
    #[arg(long, global = true, conflicts_with_all = ["paper_scale", "config"])]
    desk_scale: bool,

    /// Paper-scale profile: M=16, N=128, N1=32, 90k/10k samples, 300 epochs.
    #[arg(long, global = true, conflicts_with = "config")]
    paper_scale: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum StageArg {
    De,
    Are,
    Irp,
}

#[derive(Clone, Copy, ValueEnum)]
enum SplitArg {
    Train,
    Val,
    Test,
}

#[derive(Clone, Copy, ValueEnum)]
enum GridArg {
    /// One model at the configured (or flag-supplied) operating point.
    Point,
    /// One model per SNR in eval.snrs_db at the configured N1.
    Snr,
    /// One model per (SNR, ratio) cell of the eval grid.
    Ratio,
}

#[derive(Clone, Copy, ValueEnum)]
enum SweepArg {
    Snr,
    Ratio,
}

#[derive(Subcommand)]
enum Command {
    /// Generate stage dataset files (RISD + JSON sidecar).
    GenData {
        #[arg(long, value_enum, default_value = "de")]
        stage: StageArg,
        #[arg(long, value_enum, default_value = "train")]
        split: SplitArg,
        /// Sample count (defaults to the training/validation config values).
        #[arg(long)]
        samples: Option<usize>,
        /// Operating-point SNR in dB (defaults to training.snrs_db).
        #[arg(long)]
        snr: Option<f64>,
        /// Pilot overhead ratio r = N1/N (defaults to the configured N1).
        #[arg(long)]
        ratio: Option<f64>,
    },
    /// Train pipeline model(s) and write checkpoint directories.
    Train {
        #[arg(long)]
        snr: Option<f64>,
        #[arg(long)]
        ratio: Option<f64>,
        #[arg(long, value_enum, default_value = "point")]
        grid: GridArg,
    },
    /// Evaluate methods from trained checkpoints and write result CSV/JSON.
    Eval {
        #[arg(long, value_enum, default_value = "snr")]
        sweep: SweepArg,
        /// Output file stem (default: sweep_snr / sweep_ratio).
        #[arg(long)]
        name: Option<String>,
    },
    /// Print the multiply-accumulate complexity report.
    Flops,
    /// Run the oracle/property self-test suite.
    Selftest,
    /// Print the resolved configuration as TOML.
    PrintConfig,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Ok(threads) = std::env::var("RIS_CSI_THREADS") {
        if let Ok(n) = threads.parse::<usize>() {
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        }
    }
    match run(cli) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(1)
        }
    }
}

fn resolve_config(cli: &Cli) -> anyhow::Result<ExperimentConfig> {
    let mut cfg = match &cli.config {
        Some(path) => ExperimentConfig::from_path(path)
            .with_context(|| format!("loading {}", path.display()))?,
        None if cli.paper_scale => ExperimentConfig::paper_scale(),
        None => ExperimentConfig::desk_scale(),
    };
    if let Some(seed) = cli.seed {
        cfg.run.seed = seed;
    }
    if let Some(out) = &cli.out {
        cfg.run.out_dir = out.to_string_lossy().into_owned();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: Cli) -> anyhow::Result<ExitCode> {
    let cfg = resolve_config(&cli)?;
    let out_dir = PathBuf::from(&cfg.run.out_dir);
    let store = ModelStore::new(out_dir.join("models"));

    match &cli.command {
        Command::PrintConfig => {
            print!("{}", cfg.to_toml());
        }
        Command::Flops => {
            let m = cfg.geometry.bs_antennas;
            let n1 = cfg.geometry.active_elements;
            let n2 = cfg.geometry.ris_elements - n1;
            let order = cfg.training.activation_order;
            let de = de_dnn_spec(m, order);
            let are = are_dnn_spec(m, n1, order);
            let irp = (n2 > 0).then(|| irp_dnn_spec(n1, n2, order));
            let report = flop_report_for_specs(&de, &are, irp.as_ref(), m, n1);
            println!("complexity report (multiply-accumulate counts, M={m}, N1={n1}, N2={n2})");
            println!("  de-dnn   {:>14}  (sum of dense layer products)", report.de_macs);
            println!(
                "  are-dnn  {:>14}  (ls term {} + conv term {})",
                report.are_macs(),
                report.are_ls_macs,
                report.are_conv_macs
            );
            println!("  irp-dnn  {:>14}  (M x sum of dense layer products)", report.irp_macs);
            println!("  total    {:>14}", report.total());
        }
        Command::Selftest => {
            return Ok(selftest::run());
        }
        Command::GenData { stage, split, samples, snr, ratio } => {
            let n1 = match ratio {
                Some(r) => cfg.n1_for_ratio(*r),
                None => cfg.geometry.active_elements,
            };
            let snrs = match snr {
                Some(s) => vec![*s],
                None => cfg.training.snrs_db.clone(),
            };
            let stage = match stage {
                StageArg::De => Stage::De,
                StageArg::Are => Stage::Are,
                StageArg::Irp => Stage::Irp,
            };
            let split_tag = match split {
                SplitArg::Train => Split::Train,
                SplitArg::Val => Split::Val,
                SplitArg::Test => Split::Test,
            };
            let n_samples = samples.unwrap_or(match split_tag {
                Split::Train => cfg.training.train_samples,
                _ => cfg.training.val_samples,
            });

            let settings = cfg.pipeline_settings(snrs.clone(), n1);
            let link = settings.link()?;
            let model_dir = store.model_dir(snrs[0], n1);
            let de_ckpt;
            let are_ckpt;
            let mut upstream = UpstreamNets::default();
            if matches!(stage, Stage::Are | Stage::Irp) {
                de_ckpt = load_checkpoint(&model_dir.join("de.rckp"))?;
                upstream.de = Some(&de_ckpt);
            }
            if matches!(stage, Stage::Irp) {
                are_ckpt = load_checkpoint(&model_dir.join("are.rckp"))?;
                upstream.are = Some(&are_ckpt);
            }
            let request = DatasetRequest {
                stage,
                split: split_tag,
                n_samples,
                snrs_db: snrs.clone(),
                direct_source: DirectSource::DeDnn,
            };
            let ds = build_stage_dataset::<f32>(
                &request,
                &link,
                &upstream,
                ris_csi::numerics::RngStream::new(cfg.run.seed, 0),
            )?;
            let dataset_dir = out_dir.join("datasets");
            std::fs::create_dir_all(&dataset_dir)?;
            let name = format!(
                "{}_{}_snr{}_n1_{}.risd",
                match stage {
                    Stage::De => "de",
                    Stage::Are => "are",
                    Stage::Irp => "irp",
                },
                match split_tag {
                    Split::Train => "train",
                    Split::Val => "val",
                    Split::Test => "test",
                },
                snrs[0],
                n1
            );
            let path = dataset_dir.join(name);
            save_dataset(&ds, &path)?;
            println!("wrote {} samples to {}", ds.len(), path.display());
        }
        Command::Train { snr, ratio, grid } => {
            let points: Vec<(f64, usize)> = match grid {
                GridArg::Point => {
                    let s = snr.unwrap_or(cfg.training.snrs_db[0]);
                    let n1 = match ratio {
                        Some(r) => cfg.n1_for_ratio(*r),
                        None => cfg.geometry.active_elements,
                    };
                    vec![(s, n1)]
                }
                GridArg::Snr => {
                    if snr.is_some() || ratio.is_some() {
                        bail!("--grid snr ignores --snr/--ratio; drop them");
                    }
                    cfg.eval
                        .snrs_db
                        .iter()
                        .map(|&s| (s, cfg.geometry.active_elements))
                        .collect()
                }
                GridArg::Ratio => {
                    if snr.is_some() || ratio.is_some() {
                        bail!("--grid ratio ignores --snr/--ratio; drop them");
                    }
                    let mut pts = Vec::new();
                    for &r in &cfg.eval.ratios {
                        for &s in &cfg.eval.snrs_db {
                            pts.push((s, cfg.n1_for_ratio(r)));
                        }
                    }
                    pts
                }
            };
            for (s, n1) in points {
                let mixed = cfg.training.snrs_db.len() > 1;
                let snrs = if mixed { cfg.training.snrs_db.clone() } else { vec![s] };
                println!("training pipeline at SNR {s} dB, N1 = {n1} ...");
                let settings = cfg.pipeline_settings(snrs, n1);
                let (model, report) = train_pipeline(&settings)?;
                store.save(&model, s, n1)?;
                let dir = store.model_dir(s, n1);
                write_train_report(&dir, &report)?;
                println!(
                    "  de val {:.6} | are val {:.6} | irp val {}",
                    report.de.best_val_loss,
                    report.are.best_val_loss,
                    report
                        .irp
                        .as_ref()
                        .map(|r| format!("{:.6}", r.best_val_loss))
                        .unwrap_or_else(|| "-".into())
                );
                println!("  saved to {}", dir.display());
            }
        }
        Command::Eval { sweep, name } => {
            let result = match sweep {
                SweepArg::Snr => sweep_snr(&cfg, &store)?,
                SweepArg::Ratio => sweep_ratio(&cfg, &store)?,
            };
            let stem = name.clone().unwrap_or_else(|| {
                match sweep {
                    SweepArg::Snr => "sweep_snr",
                    SweepArg::Ratio => "sweep_ratio",
                }
                .to_string()
            });
            let results_dir = out_dir.join("results");
            std::fs::create_dir_all(&results_dir)?;
            let csv_path = results_dir.join(format!("{stem}.csv"));
            result.write_csv(&csv_path)?;
            result.write_json(&results_dir.join(format!("{stem}.json")))?;
            print_result(&result);
            println!("wrote {}", csv_path.display());
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn print_result(result: &ExperimentResult) {
    println!("{:<13} {:>7} {:>7} {:>12} {:>12} {:>8}", "method", "snr_db", "r", "nmse", "stderr", "n");
    for row in &result.rows {
        println!(
            "{:<13} {:>7} {:>7} {:>12.5e} {:>12.5e} {:>8}",
            row.method, row.snr_db, row.r, row.nmse_mean, row.nmse_stderr, row.n_samples
        );
    }
}

fn write_train_report(dir: &std::path::Path, report: &PipelineReport) -> anyhow::Result<()> {
    let mut text = String::from("stage,epoch,train_loss,val_loss\n");
    let mut add = |stage: &str, r: &TrainReport| {
        for (epoch, (tl, vl)) in r.train_loss.iter().zip(&r.val_loss).enumerate() {
            text.push_str(&format!("{stage},{epoch},{tl},{vl}\n"));
        }
    };
    add("de", &report.de);
    add("are", &report.are);
    if let Some(irp) = &report.irp {
        add("irp", irp);
    }
    std::fs::write(dir.join("train_report.csv"), text)?;
    Ok(())
}
