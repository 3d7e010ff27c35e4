//! Integration tests of dataset construction, stage training and the
//! inference chain.

use std::sync::Arc;

use num_complex::Complex64;
use ris_csi::channel::{ArrayGeometry, ChannelRealization, PathCounts};
use ris_csi::nn::{
    identity_dense_spec, irp_dnn_spec, zero_branch_residual_spec, ActivationOrder, Checkpoint,
    LayerParams, LayerSpec, NetworkSpec,
};
use ris_csi::numerics::{frob_norm, RngStream};
use ris_csi::pilot::{transmit, ActivePolicy, ActiveSet};
use ris_csi::pipeline::{
    build_stage_dataset, infer, infer_batch, load_dataset, load_pipeline, save_dataset,
    save_pipeline, train_stage, DatasetRequest, DirectSource, LinkSetup, PipelineModel, Split,
    Stage, TrainSchedule, UpstreamNets,
};

fn link(m: usize, n: usize, n1: usize) -> LinkSetup {
    LinkSetup {
        bs: ArrayGeometry::half_wavelength(m).unwrap(),
        ris: ArrayGeometry::half_wavelength(n).unwrap(),
        paths: PathCounts::default(),
        active: ActiveSet::from_policy(ActivePolicy::EvenlySpaced, n1, n).unwrap(),
        noise_variance: 1.0,
    }
}

fn request(stage: Stage, split: Split, n: usize, snr: f64, src: DirectSource) -> DatasetRequest {
    DatasetRequest { stage, split, n_samples: n, snrs_db: vec![snr], direct_source: src }
}

/// DE net stub that is exactly the identity map.
fn identity_de<T: ris_csi::nn::Real>(m: usize) -> Checkpoint<T> {
    let mut ckpt: Checkpoint<T> =
        Checkpoint::init(identity_dense_spec(2 * m), RngStream::new(900, 0)).unwrap();
    if let LayerParams::Dense { w, b } = &mut ckpt.params[0] {
        for v in w.iter_mut() {
            *v = T::zero();
        }
        for i in 0..2 * m {
            w[i * 2 * m + i] = T::one();
        }
        for v in b.iter_mut() {
            *v = T::zero();
        }
    }
    ckpt
}

/// ARE net stub whose branch emits zero, so output == input.
fn zero_are<T: ris_csi::nn::Real>(m: usize, n1: usize) -> Checkpoint<T> {
    let mut ckpt: Checkpoint<T> =
        Checkpoint::init(zero_branch_residual_spec(m, n1, 2), RngStream::new(901, 0)).unwrap();
    if let LayerParams::Conv { w, b } = &mut ckpt.params[0] {
        for v in w.iter_mut() {
            *v = T::zero();
        }
        for v in b.iter_mut() {
            *v = T::zero();
        }
    }
    ckpt
}

/// Single-layer IRP stub (zero weights: predicts zero inactive columns).
fn zero_irp<T: ris_csi::nn::Real>(n1: usize, n2: usize) -> Checkpoint<T> {
    let spec = NetworkSpec::new(
        vec![LayerSpec::Dense { inputs: 2 * n1, outputs: 2 * n2 }],
        vec![2 * n1],
    )
    .unwrap();
    let mut ckpt: Checkpoint<T> = Checkpoint::init(spec, RngStream::new(902, 0)).unwrap();
    if let LayerParams::Dense { w, b } = &mut ckpt.params[0] {
        for v in w.iter_mut() {
            *v = T::zero();
        }
        for v in b.iter_mut() {
            *v = T::zero();
        }
    }
    ckpt
}

fn stub_model<T: ris_csi::nn::Real>(m: usize, n: usize, n1: usize) -> PipelineModel<T> {
    let active = ActiveSet::from_policy(ActivePolicy::EvenlySpaced, n1, n).unwrap();
    PipelineModel {
        de: identity_de(m),
        are: zero_are(m, n1),
        irp: Some(zero_irp(n1, n - n1)),
        active,
        snr_db: 10.0,
        noise_variance: 1.0,
        config_hash: "stub".into(),
    }
}

#[test]
fn de_dataset_at_zero_noise_has_inputs_equal_to_labels() {
    let mut lk = link(4, 16, 4);
    lk.noise_variance = 0.0;
    let ds = build_stage_dataset::<f32>(
        &request(Stage::De, Split::Train, 50, 10.0, DirectSource::DeDnn),
        &lk,
        &UpstreamNets::default(),
        RngStream::new(1000, 0),
    )
    .unwrap();
    assert_eq!(ds.inputs, ds.labels);
}

#[test]
fn are_dataset_with_oracle_direct_and_zero_noise_has_inputs_equal_to_labels() {
    let mut lk = link(4, 16, 4);
    lk.noise_variance = 0.0;
    let ds = build_stage_dataset::<f32>(
        &request(Stage::Are, Split::Train, 50, 10.0, DirectSource::Oracle),
        &lk,
        &UpstreamNets::default(),
        RngStream::new(1001, 0),
    )
    .unwrap();
    assert_eq!(ds.inputs, ds.labels);
}

#[test]
fn missing_upstream_checkpoints_are_state_errors() {
    let lk = link(4, 16, 4);
    let err = build_stage_dataset::<f32>(
        &request(Stage::Are, Split::Train, 10, 10.0, DirectSource::DeDnn),
        &lk,
        &UpstreamNets::default(),
        RngStream::new(1002, 0),
    )
    .unwrap_err();
    assert!(matches!(err, ris_csi::Error::State(_)));

    let de = identity_de::<f32>(4);
    let err = build_stage_dataset::<f32>(
        &request(Stage::Irp, Split::Train, 10, 10.0, DirectSource::DeDnn),
        &lk,
        &UpstreamNets { de: Some(&de), are: None },
        RngStream::new(1003, 0),
    )
    .unwrap_err();
    assert!(matches!(err, ris_csi::Error::State(_)));
}

#[test]
fn irp_dataset_is_deterministic() {
    let lk = link(4, 16, 4);
    let de = identity_de::<f32>(4);
    let are = zero_are::<f32>(4, 4);
    let upstream = UpstreamNets { de: Some(&de), are: Some(&are) };
    let req = request(Stage::Irp, Split::Train, 40, 10.0, DirectSource::DeDnn);
    let a = build_stage_dataset::<f32>(&req, &lk, &upstream, RngStream::new(1004, 0)).unwrap();
    let b = build_stage_dataset::<f32>(&req, &lk, &upstream, RngStream::new(1004, 0)).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.input_shape, vec![8]);
    assert_eq!(a.label_shape, vec![24]);
}

#[test]
fn train_stage_learns_identity_mapping_and_is_deterministic() {
    // Labels equal inputs: the loss must collapse far below the input power.
    let lk = link(4, 16, 4);
    let make = |split| {
        let mut ds = build_stage_dataset::<f32>(
            &request(Stage::De, Split::Train, 2048, 10.0, DirectSource::DeDnn),
            &lk,
            &UpstreamNets::default(),
            RngStream::new(match split {
                Split::Train => 1005,
                _ => 1006,
            }, 0),
        )
        .unwrap();
        ds.labels = ds.inputs.clone();
        ds
    };
    let train = make(Split::Train);
    let val = make(Split::Val);
    let spec = NetworkSpec::new(
        vec![
            LayerSpec::Dense { inputs: 8, outputs: 32 },
            LayerSpec::Relu,
            LayerSpec::Dense { inputs: 32, outputs: 8 },
        ],
        vec![8],
    )
    .unwrap();
    let schedule = TrainSchedule::with_epochs(60, 32);
    let run = || train_stage(&train, &val, spec.clone(), &schedule, RngStream::new(1007, 0)).unwrap();
    let (ckpt_a, report_a) = run();
    let (ckpt_b, report_b) = run();
    assert_eq!(ckpt_a, ckpt_b);
    assert_eq!(report_a.val_loss, report_b.val_loss);

    let input_power: f64 = train
        .inputs
        .iter()
        .map(|&v| (v as f64) * (v as f64))
        .sum::<f64>()
        / train.len() as f64;
    assert!(
        report_a.best_val_loss < 0.05 * input_power,
        "val loss {} vs input power {input_power}",
        report_a.best_val_loss
    );
}

#[test]
fn train_stage_rejects_mismatched_shapes() {
    let lk = link(4, 16, 4);
    let ds = build_stage_dataset::<f32>(
        &request(Stage::De, Split::Train, 16, 10.0, DirectSource::DeDnn),
        &lk,
        &UpstreamNets::default(),
        RngStream::new(1008, 0),
    )
    .unwrap();
    let wrong = irp_dnn_spec(4, 12, ActivationOrder::NormThenRelu);
    let schedule = TrainSchedule::with_epochs(1, 8);
    assert!(matches!(
        train_stage(&ds, &ds, wrong, &schedule, RngStream::new(0, 0)),
        Err(ris_csi::Error::State(_))
    ));
}

#[test]
fn dataset_files_round_trip() {
    let lk = link(4, 16, 4);
    let ds = build_stage_dataset::<f32>(
        &request(Stage::De, Split::Train, 20, 5.0, DirectSource::DeDnn),
        &lk,
        &UpstreamNets::default(),
        RngStream::new(1009, 0),
    )
    .unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("de.risd");
    save_dataset(&ds, &path).unwrap();
    let loaded = load_dataset(&path).unwrap();
    assert_eq!(loaded, ds);
    assert!(path.with_extension("risd.meta.json").exists() || dir.path().join("de.risd.meta.json").exists());
}

#[test]
fn stub_pipeline_reduces_to_the_exact_ls_chain_without_noise() {
    let m = 4;
    let n = 16;
    let n1 = 4;
    let model = stub_model::<f64>(m, n, n1);
    let lk = link(m, n, n1);
    let schedule = lk.schedule().unwrap();
    let truth = Arc::new(
        ChannelRealization::draw(RngStream::new(1010, 0), lk.bs, lk.ris, lk.paths).unwrap(),
    );
    let obs = transmit(truth.clone(), schedule, 10.0, 0.0, RngStream::new(1010, 1)).unwrap();
    let est = infer(&model, &obs).unwrap();

    for i in 0..m {
        assert!((est.h_ub_hat.get(i) - truth.h_ub.get(i)).norm() < 1e-10);
    }
    let g_a = truth.g.select_cols(model.active.indices()).unwrap();
    for i in 0..m {
        for k in 0..n1 {
            assert!((est.g_a_dnn.get(i, k) - g_a.get(i, k)).norm() < 1e-10);
            assert!((est.g_a_ls.get(i, k) - g_a.get(i, k)).norm() < 1e-10);
        }
    }
    // Active columns of the reassembled estimate match Ĝ_A,dnn bit-exactly.
    for (idx, &col) in model.active.indices().iter().enumerate() {
        for row in 0..m {
            assert_eq!(est.g_hat.get(row, col), est.g_a_dnn.get(row, idx));
        }
    }
    // The zero-weight IRP stub predicts zero inactive columns.
    for &col in &model.active.inactive_indices() {
        for row in 0..m {
            assert_eq!(est.g_hat.get(row, col), Complex64::new(0.0, 0.0));
        }
    }
}

#[test]
fn reassembly_reads_back_both_parts_exactly() {
    // For any Ĝ_A,dnn / Ĝ_B,dnn pair, selecting columns by the active set
    // reproduces both parts (the stub pipeline keeps them identifiable).
    let m = 3;
    let n = 12;
    let n1 = 4;
    let model = stub_model::<f32>(m, n, n1);
    let lk = link(m, n, n1);
    let schedule = lk.schedule().unwrap();
    let obs: Vec<_> = (0..5u64)
        .map(|i| {
            let truth = Arc::new(
                ChannelRealization::draw(
                    RngStream::new(1011, 0).derive(1, 14, i),
                    lk.bs,
                    lk.ris,
                    lk.paths,
                )
                .unwrap(),
            );
            transmit(
                truth,
                schedule.clone(),
                4.0,
                1.0,
                RngStream::new(1011, 0).derive(2, 14, i),
            )
            .unwrap()
        })
        .collect();
    let ests = infer_batch(&model, &obs).unwrap();
    for est in &ests {
        for (idx, &col) in model.active.indices().iter().enumerate() {
            for row in 0..m {
                assert_eq!(est.g_hat.get(row, col), est.g_a_dnn.get(row, idx));
            }
        }
        let gb = est.g_b_dnn.as_ref().unwrap();
        for (idx, &col) in model.active.inactive_indices().iter().enumerate() {
            for row in 0..m {
                assert_eq!(est.g_hat.get(row, col), gb.get(row, idx));
            }
        }
    }
}

#[test]
fn infer_rejects_mismatched_schedules() {
    let model = stub_model::<f32>(4, 16, 4);
    let lk = link(4, 16, 8);
    let schedule = lk.schedule().unwrap();
    let truth = Arc::new(
        ChannelRealization::draw(RngStream::new(1012, 0), lk.bs, lk.ris, lk.paths).unwrap(),
    );
    let obs = transmit(truth, schedule, 10.0, 1.0, RngStream::new(1012, 1)).unwrap();
    assert!(matches!(infer(&model, &obs), Err(ris_csi::Error::State(_))));
}

#[test]
fn are_training_inputs_match_online_upstream_error_statistics() {
    // The ARE stage trains on the same error distribution the deployed
    // chain produces: per-entry error variance of ⟨Ĝ_A,ls - G_A⟩ agrees
    // between the training dataset (train split) and fresh inference
    // (test split) within 5%.
    let m = 4;
    let n = 16;
    let n1 = 4;
    let snr = 10.0;
    let lk = link(m, n, n1);
    let de = identity_de::<f32>(m);
    let upstream = UpstreamNets { de: Some(&de), are: None };

    let n_samples = 3000;
    let ds = build_stage_dataset::<f32>(
        &request(Stage::Are, Split::Train, n_samples, snr, DirectSource::DeDnn),
        &lk,
        &upstream,
        RngStream::new(1013, 0),
    )
    .unwrap();
    let feat: usize = ds.input_shape.iter().product();
    let mut train_err = 0.0f64;
    for i in 0..n_samples {
        for (a, b) in ds.input_row(i).iter().zip(ds.label_row(i)) {
            let d = (*a - *b) as f64;
            train_err += d * d;
        }
    }
    train_err /= (n_samples * feat) as f64;

    let model = PipelineModel {
        de: identity_de::<f32>(m),
        are: zero_are::<f32>(m, n1),
        irp: Some(zero_irp::<f32>(n1, n - n1)),
        active: lk.active.clone(),
        snr_db: snr,
        noise_variance: 1.0,
        config_hash: "stub".into(),
    };
    let schedule = lk.schedule().unwrap();
    let power = 10f64.powf(snr / 10.0);
    let obs: Vec<_> = (0..n_samples as u64)
        .map(|i| {
            let truth = Arc::new(
                ChannelRealization::draw(
                    RngStream::new(1013, 0).derive(1, 14, i),
                    lk.bs,
                    lk.ris,
                    lk.paths,
                )
                .unwrap(),
            );
            transmit(
                truth,
                schedule.clone(),
                power,
                1.0,
                RngStream::new(1013, 0).derive(2, 14, i),
            )
            .unwrap()
        })
        .collect();
    let ests = infer_batch(&model, &obs).unwrap();
    let mut infer_err = 0.0f64;
    for (est, o) in ests.iter().zip(&obs) {
        let g_a = o.truth.g.select_cols(lk.active.indices()).unwrap();
        infer_err += frob_norm(&est.g_a_ls.sub(&g_a).unwrap()).powi(2);
    }
    infer_err /= (n_samples * m * n1) as f64 * 2.0;

    let ratio = train_err / infer_err;
    assert!(
        (ratio - 1.0).abs() < 0.05,
        "train-side variance {train_err} vs online variance {infer_err}"
    );
}

#[test]
fn pipeline_save_load_round_trip_and_missing_files() {
    let model = stub_model::<f32>(4, 16, 4);
    let dir = tempfile::tempdir().unwrap();
    let pdir = dir.path().join("snr10_n1_4");
    save_pipeline(&model, &pdir).unwrap();
    let loaded = load_pipeline(&pdir).unwrap();
    assert_eq!(loaded, model);

    std::fs::remove_file(pdir.join("are.rckp")).unwrap();
    let err = load_pipeline(&pdir).unwrap_err();
    match err {
        ris_csi::Error::State(msg) => assert!(msg.contains("are.rckp"), "message: {msg}"),
        other => panic!("expected state error, got {other:?}"),
    }
}
