//! Online inference chain: ĥ_UB,ls → DE-DNN → Eq.-(8) LS → ARE-DNN →
//! row-wise IRP-DNN → column reassembly into the full Ĝ.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::estimators::{ls_cascaded, ls_direct};
use crate::nn::{cvec_to_real, real_to_cmat, real_to_cvec, Real, Tensor};
use crate::numerics::{CMat, CVec};
use crate::pilot::PilotObservation;
use crate::pipeline::dataset::{extract_packed_row, forward_chunked};
use crate::pipeline::model::PipelineModel;

/// Full-chain estimate with per-stage intermediates kept for diagnostics.
#[derive(Debug, Clone)]
pub struct CsiEstimate {
    pub h_ub_hat: CVec,
    pub g_hat: CMat,
    pub h_ub_ls: CVec,
    pub g_a_ls: CMat,
    pub g_a_dnn: CMat,
    pub g_b_dnn: Option<CMat>,
}

/// Runs the chain on one observation.
pub fn infer<T: Real>(model: &PipelineModel<T>, obs: &PilotObservation) -> Result<CsiEstimate> {
    Ok(infer_batch(model, std::slice::from_ref(obs))?.pop().expect("one estimate per input"))
}

/// Runs the chain on a batch of observations (mathematically identical to
/// one-at-a-time inference; BN uses running statistics either way).
pub fn infer_batch<T: Real>(
    model: &PipelineModel<T>,
    observations: &[PilotObservation],
) -> Result<Vec<CsiEstimate>> {
    model.validate()?;
    if observations.is_empty() {
        return Ok(Vec::new());
    }
    let m = model.de.spec.input_shape[0] / 2;
    let n1 = model.active.n1();
    let n2 = model.active.n2();
    let n = model.active.n();
    let k = observations.len();
    for obs in observations {
        if obs.schedule.active() != &model.active {
            return Err(Error::State(
                "observation schedule does not match the model's active set".into(),
            ));
        }
        if obs.y.rows() != m {
            return Err(Error::Shape(format!(
                "observation has {} antennas, model expects {m}",
                obs.y.rows()
            )));
        }
    }

    // Stage 1: LS direct estimates refined by DE-DNN.
    let h_ls: Vec<CVec> = observations
        .iter()
        .map(|o| ls_direct(o).map(|e| e.h_hat))
        .collect::<Result<Vec<_>>>()?;
    let packed: Vec<Vec<T>> = h_ls.iter().map(|h| cvec_to_real::<T>(h)).collect();
    let rows: Vec<&[T]> = packed.iter().map(|r| r.as_slice()).collect();
    let de_out = forward_chunked(&model.de, &Tensor::from_rows(&[2 * m], &rows)?)?;
    let h_dnn: Vec<CVec> = (0..k)
        .map(|i| real_to_cvec(de_out.sample(i)))
        .collect::<Result<Vec<_>>>()?;

    // Stage 2: Eq.-(8) LS on the DFT block, then ARE-DNN denoising.
    let g_a_ls: Vec<CMat> = observations
        .iter()
        .zip(&h_dnn)
        .map(|(o, h)| ls_cascaded(o, h).map(|e| e.g_hat_active))
        .collect::<Result<Vec<_>>>()?;
    let mut are_in = Vec::with_capacity(k * m * n1 * 2);
    for g in &g_a_ls {
        are_in.extend(crate::nn::cmat_to_real::<T>(g));
    }
    let are_out = forward_chunked(&model.are, &Tensor::new(vec![k, m, n1, 2], are_in)?)?;

    // Stage 3: every row of Ĝ_A,dnn through IRP-DNN (one batch over k·M rows).
    let g_b_rows: Option<Tensor<T>> = match &model.irp {
        Some(irp) if n2 > 0 => {
            let mut rows_in = Vec::with_capacity(k * m * 2 * n1);
            for i in 0..k {
                for row in 0..m {
                    extract_packed_row(are_out.sample(i), row, n1, &mut rows_in);
                }
            }
            Some(forward_chunked(irp, &Tensor::new(vec![k * m, 2 * n1], rows_in)?)?)
        }
        _ => None,
    };

    // Column reassembly: active columns from Ĝ_A,dnn, inactive from Ĝ_B,dnn.
    let inactive = model.active.inactive_indices();
    let mut estimates = Vec::with_capacity(k);
    for i in 0..k {
        let g_a_dnn = real_to_cmat(are_out.sample(i), m, n1)?;
        let g_b_dnn = match &g_b_rows {
            Some(t) => {
                let mut gb = CMat::zeros(m, n2);
                for row in 0..m {
                    let out_row = t.sample(i * m + row);
                    for col in 0..n2 {
                        gb.set(
                            row,
                            col,
                            Complex64::new(
                                out_row[col].into_f64(),
                                out_row[n2 + col].into_f64(),
                            ),
                        );
                    }
                }
                Some(gb)
            }
            None => None,
        };

        let mut g_hat = CMat::zeros(m, n);
        for (idx, &col) in model.active.indices().iter().enumerate() {
            for row in 0..m {
                g_hat.set(row, col, g_a_dnn.get(row, idx));
            }
        }
        if let Some(gb) = &g_b_dnn {
            for (idx, &col) in inactive.iter().enumerate() {
                for row in 0..m {
                    g_hat.set(row, col, gb.get(row, idx));
                }
            }
        }

        estimates.push(CsiEstimate {
            h_ub_hat: h_dnn[i].clone(),
            g_hat,
            h_ub_ls: h_ls[i].clone(),
            g_a_ls: g_a_ls[i].clone(),
            g_a_dnn,
            g_b_dnn,
        });
    }
    Ok(estimates)
}
