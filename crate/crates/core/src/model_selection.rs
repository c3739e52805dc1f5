//! k-fold cross-validation over kernel, regularization and decoding-loss grids.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::decoders::{decode, DecoderSpec};
use crate::error::{Error, Result, ResultExt};
use crate::kernels::{cross_kernel, gram_matrix, KernelSpec};
use crate::losses::{LossFunction, Output};
use crate::surrogate::TrainedSurrogate;

/// Splits `0..n` into `k` disjoint folds whose sizes differ by at most one.
/// The assignment depends only on `(n, k, seed)`.
pub fn kfold_split(n: usize, k: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    if k < 2 || k > n {
        return Err(Error::InvalidParameter(format!("need 2 <= folds <= n, got folds = {k}, n = {n}")));
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let (base, extra) = (n / k, n % k);
    let mut folds = Vec::with_capacity(k);
    let mut start = 0;
    for f in 0..k {
        let len = base + usize::from(f < extra);
        let mut fold = idx[start..start + len].to_vec();
        fold.sort_unstable();
        folds.push(fold);
        start += len;
    }
    Ok(folds)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CvPlan {
    pub folds: usize,
    pub seed: u64,
    pub lambdas: Vec<f64>,
    pub kernels: Vec<KernelSpec>,
    /// Losses tried inside the decoder (for example several Cauchy scales).
    pub decode_losses: Vec<LossFunction>,
    /// Task loss used to score held-out predictions, as `scoring(prediction, truth)`.
    pub scoring: LossFunction,
}

impl CvPlan {
    pub fn validate(&self, n: usize) -> Result<()> {
        if self.lambdas.is_empty() || self.kernels.is_empty() || self.decode_losses.is_empty() {
            return Err(Error::Empty("cross-validation grid"));
        }
        if let Some(l) = self.lambdas.iter().find(|l| !(**l > 0.0 && l.is_finite())) {
            return Err(Error::InvalidParameter(format!("lambda must be positive, got {l}")));
        }
        for k in &self.kernels {
            k.validate()?;
        }
        if self.folds < 2 || self.folds > n {
            return Err(Error::InvalidParameter(format!(
                "need 2 <= folds <= n, got folds = {}, n = {n}",
                self.folds
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CvRow {
    pub kernel_index: usize,
    pub lambda_index: usize,
    pub loss_index: usize,
    pub kernel: KernelSpec,
    pub lambda: f64,
    pub loss: LossFunction,
    pub mean: f64,
    pub std: f64,
    pub fold_scores: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CvReport {
    /// Kernel-major, then lambda, then decoding loss.
    pub rows: Vec<CvRow>,
    pub selected: usize,
}

impl CvReport {
    pub fn best(&self) -> &CvRow {
        &self.rows[self.selected]
    }
}

/// Minimal mean wins; exact ties go to the larger lambda, then to grid order.
fn select(rows: &[CvRow]) -> usize {
    let mut best = 0;
    for (i, r) in rows.iter().enumerate().skip(1) {
        let b = &rows[best];
        if r.mean < b.mean || (r.mean == b.mean && r.lambda > b.lambda) {
            best = i;
        }
    }
    best
}

fn mean_std(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0).max(1.0);
    (mean, var.sqrt())
}

/// Held-out scores of one fold: `[lambda][loss]`.
fn score_fold(
    inputs: &[Vec<f64>],
    outputs: &[Output],
    plan: &CvPlan,
    decoder: &DecoderSpec,
    kernel: &KernelSpec,
    held_out: &[usize],
) -> Result<Vec<Vec<f64>>> {
    let mut is_held = vec![false; inputs.len()];
    for &i in held_out {
        is_held[i] = true;
    }
    let train: Vec<usize> = (0..inputs.len()).filter(|&i| !is_held[i]).collect();
    let tx: Vec<Vec<f64>> = train.iter().map(|&i| inputs[i].clone()).collect();
    let ty: Vec<Output> = train.iter().map(|&i| outputs[i].clone()).collect();
    let gram = gram_matrix(kernel, &tx)?;
    let kxs = held_out
        .iter()
        .map(|&i| cross_kernel(kernel, &tx, &inputs[i]))
        .collect::<Result<Vec<_>>>()?;

    let mut scores = Vec::with_capacity(plan.lambdas.len());
    for &lambda in &plan.lambdas {
        let model = TrainedSurrogate::fit_with_gram(tx.clone(), ty.clone(), kernel.clone(), lambda, &gram)
            .context_with(|| format!("lambda {lambda}"))?;
        let mut per_loss = vec![0.0; plan.decode_losses.len()];
        for (kx, &i) in kxs.iter().zip(held_out) {
            let alphas = model.weights_for(kx)?;
            for (acc, loss) in per_loss.iter_mut().zip(&plan.decode_losses) {
                let pred = decode(decoder, loss, &alphas, model.outputs())?;
                *acc += plan.scoring.eval(&pred, &outputs[i])?;
            }
        }
        for acc in per_loss.iter_mut() {
            *acc /= held_out.len() as f64;
        }
        scores.push(per_loss);
    }
    Ok(scores)
}

/// Mean held-out task loss for every grid point. Folds and kernels may run
/// in parallel; results are aggregated by index so the report does not
/// depend on scheduling.
pub fn cross_validate(inputs: &[Vec<f64>], outputs: &[Output], plan: &CvPlan, decoder: &DecoderSpec) -> Result<CvReport> {
    if inputs.len() != outputs.len() {
        return Err(Error::DimensionMismatch { expected: inputs.len(), found: outputs.len() });
    }
    plan.validate(inputs.len())?;
    decoder.validate()?;
    let folds = kfold_split(inputs.len(), plan.folds, plan.seed)?;

    let tasks: Vec<(usize, usize)> = (0..plan.kernels.len())
        .flat_map(|k| (0..folds.len()).map(move |f| (k, f)))
        .collect();
    let results = tasks
        .par_iter()
        .map(|&(k, f)| {
            score_fold(inputs, outputs, plan, decoder, &plan.kernels[k], &folds[f])
                .context_with(|| format!("kernel #{k}, fold {f}"))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut rows = Vec::new();
    for (ki, kernel) in plan.kernels.iter().enumerate() {
        for (li, &lambda) in plan.lambdas.iter().enumerate() {
            for (di, loss) in plan.decode_losses.iter().enumerate() {
                let fold_scores: Vec<f64> = (0..folds.len())
                    .map(|f| results[ki * folds.len() + f][li][di])
                    .collect();
                let (mean, std) = mean_std(&fold_scores);
                rows.push(CvRow {
                    kernel_index: ki,
                    lambda_index: li,
                    loss_index: di,
                    kernel: kernel.clone(),
                    lambda,
                    loss: loss.clone(),
                    mean,
                    std,
                    fold_scores,
                });
            }
        }
    }
    let selected = select(&rows);
    Ok(CvReport { rows, selected })
}
