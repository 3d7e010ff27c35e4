//! Scratch probe: timing and quality of a shortened desk-scale training.

use std::time::Instant;

use ris_csi::config::{ExperimentConfig, Method};
use ris_csi::pilot::ActivePolicy;
use ris_csi::pipeline::train_pipeline;
use ris_csi::sweep::{evaluate_cell, ModelStore};

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let policy = if args.iter().any(|a| a == "contiguous") {
        ActivePolicy::Contiguous
    } else {
        ActivePolicy::EvenlySpaced
    };
    let samples: usize = args
        .iter()
        .position(|a| a == "--samples")
        .map(|i| args[i + 1].parse().unwrap())
        .unwrap_or(3000);
    let epochs: usize = args
        .iter()
        .position(|a| a == "--epochs")
        .map(|i| args[i + 1].parse().unwrap())
        .unwrap_or(12);

    let mut cfg = ExperimentConfig::desk_scale();
    cfg.geometry.active_policy = policy;
    cfg.training.train_samples = samples;
    cfg.training.val_samples = samples / 9;
    cfg.training.epochs = epochs;
    cfg.training.lr_switch_epoch = epochs * 2 / 3;
    cfg.eval.mc_samples = 300;
    cfg.eval.methods = vec![Method::LsZeroFill, Method::Omp, Method::Pipeline, Method::DeDnn, Method::LsDirect];
    cfg.eval.snrs_db = vec![10.0];

    println!("policy {policy:?}, {samples} samples, {epochs} epochs");
    let t0 = Instant::now();
    let settings = cfg.pipeline_settings(vec![10.0], cfg.geometry.active_elements);
    let (model, report) = train_pipeline(&settings).unwrap();
    println!("trained in {:.1}s", t0.elapsed().as_secs_f64());
    println!(
        "  de  best val {:.5} @ epoch {}",
        report.de.best_val_loss, report.de.best_epoch
    );
    println!(
        "  are best val {:.5} @ epoch {}",
        report.are.best_val_loss, report.are.best_epoch
    );
    if let Some(irp) = &report.irp {
        println!("  irp best val {:.5} @ epoch {}", irp.best_val_loss, irp.best_epoch);
    }

    let dir = std::env::temp_dir().join(format!("ris_probe_{policy:?}"));
    let store = ModelStore::new(&dir);
    store.save(&model, 10.0, cfg.geometry.active_elements).unwrap();
    let t1 = Instant::now();
    let rows = evaluate_cell(&cfg, &store, 10.0, cfg.geometry.active_elements).unwrap();
    println!("eval in {:.1}s", t1.elapsed().as_secs_f64());
    for row in rows {
        println!(
            "  {:<13} NMSE {:.4}  (stderr {:.4})",
            row.method, row.nmse_mean, row.nmse_stderr
        );
    }
}
