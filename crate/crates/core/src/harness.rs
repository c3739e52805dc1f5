//! Synthetic data generators and experiment runners.
//!
//! Every generator is a pure function of its parameters and seed. Runners
//! parallelize over repetitions and aggregate by index, so results do not
//! depend on thread scheduling.

use std::f64::consts::PI;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, Normal, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::decoders::{decode, DecoderSpec};
use crate::error::{Error, Result, ResultExt};
use crate::kernels::KernelSpec;
use crate::losses::{rank_loss, squared_hellinger, LossFunction, Output, RatingProfile};
use crate::model_selection::{cross_validate, CvPlan, CvReport};
use crate::surrogate::TrainedSurrogate;

/// Standard deviation of the Gaussian noise in the robust regression data
/// (variance 0.1).
pub const ROBUST_NOISE_STD: f64 = 0.316_227_766_016_837_94;
pub const OUTLIER_PROB: f64 = 0.1;
pub const OUTLIER_RANGE: f64 = 3.0;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed for repetition `rep` at sample size `n`.
pub fn derive_seed(base: u64, n: usize, rep: usize) -> u64 {
    splitmix64(splitmix64(splitmix64(base) ^ n as u64) ^ rep as u64)
}

fn mean_std(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0).max(1.0);
    (mean, var.sqrt())
}

/// `n` points evenly spaced on `[lo, hi]`, endpoints included.
pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => vec![],
        1 => vec![lo],
        _ => (0..n)
            .map(|i| if i + 1 == n { hi } else { lo + (hi - lo) * i as f64 / (n - 1) as f64 })
            .collect(),
    }
}

/// Aggregated metric of one method at one sample size.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub method: String,
    pub metric: String,
    pub n: usize,
    pub mean: f64,
    pub std: f64,
    pub seeds: Vec<u64>,
    pub wall_time_secs: f64,
    /// Per-seed values, in the order of `seeds`.
    pub raw: Vec<f64>,
}

impl ExperimentResult {
    fn new(method: &str, metric: &str, n: usize, seeds: Vec<u64>, raw: Vec<f64>, wall: f64) -> Self {
        let (mean, std) = mean_std(&raw);
        ExperimentResult {
            method: method.to_string(),
            metric: metric.to_string(),
            n,
            mean,
            std,
            seeds,
            wall_time_secs: wall,
            raw,
        }
    }
}

fn fit_selected(inputs: Vec<Vec<f64>>, outputs: Vec<Output>, cv: &CvReport) -> Result<(TrainedSurrogate, LossFunction)> {
    let best = cv.best();
    let model = TrainedSurrogate::fit(inputs, outputs, best.kernel.clone(), best.lambda)?;
    Ok((model, best.loss.clone()))
}

fn gaussians(sigmas: &[f64]) -> Result<Vec<KernelSpec>> {
    sigmas.iter().map(|&s| KernelSpec::gaussian(s)).collect()
}

// ---------------------------------------------------------------------------
// robust regression

/// `y = sin(6 pi x) + eps + zeta` with `x ~ U[-1, 1]`, `eps ~ N(0, 0.1)` and
/// `zeta` zero with probability 0.9, otherwise uniform on `[-3, 3]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RobustDataset {
    pub inputs: Vec<f64>,
    pub targets: Vec<f64>,
    pub clean: Vec<f64>,
    pub outlier: Vec<bool>,
}

impl RobustDataset {
    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    pub fn features(&self) -> Vec<Vec<f64>> {
        self.inputs.iter().map(|&x| vec![x]).collect()
    }

    pub fn outputs(&self) -> Vec<Output> {
        self.targets.iter().map(|&y| Output::Scalar(y)).collect()
    }
}

pub fn clean_function(x: f64) -> f64 {
    (6.0 * PI * x).sin()
}

pub fn gen_robust_data(n: usize, seed: u64) -> Result<RobustDataset> {
    if n == 0 {
        return Err(Error::Empty("robust dataset"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, ROBUST_NOISE_STD).expect("valid normal");
    let mut d = RobustDataset {
        inputs: Vec::with_capacity(n),
        targets: Vec::with_capacity(n),
        clean: Vec::with_capacity(n),
        outlier: Vec::with_capacity(n),
    };
    for _ in 0..n {
        let x: f64 = rng.random_range(-1.0..=1.0);
        let eps = noise.sample(&mut rng);
        let is_outlier = rng.random_bool(OUTLIER_PROB);
        let zeta = if is_outlier { rng.random_range(-OUTLIER_RANGE..=OUTLIER_RANGE) } else { 0.0 };
        let c = clean_function(x);
        d.inputs.push(x);
        d.clean.push(c);
        d.targets.push(c + eps + zeta);
        d.outlier.push(is_outlier);
    }
    Ok(d)
}

/// Kernel ridge regression prediction `sum_i alpha_i(x) y_i`.
pub fn krr_baseline(inputs: &[Vec<f64>], targets: &[f64], kernel: &KernelSpec, lambda: f64, x: &[f64]) -> Result<f64> {
    let outputs = targets.iter().map(|&y| Output::Scalar(y)).collect();
    let model = TrainedSurrogate::fit(inputs.to_vec(), outputs, kernel.clone(), lambda)?;
    let alpha = model.alpha_weights(x)?;
    Ok(alpha.weights.iter().zip(targets).map(|(a, y)| a * y).sum())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RobustConfig {
    pub sizes: Vec<usize>,
    pub repetitions: usize,
    pub base_seed: u64,
    pub sigmas: Vec<f64>,
    pub lambdas: Vec<f64>,
    pub gammas: Vec<f64>,
    pub folds: usize,
    /// Decoder used inside cross-validation.
    pub cv_decoder: DecoderSpec,
    /// Decoder used for the final test predictions.
    pub decoder: DecoderSpec,
    pub test_points: usize,
    pub baseline: bool,
    /// Held-out loss minimized by cross-validation of the surrogate method.
    pub scoring: LossFunction,
    /// Held-out loss minimized by cross-validation of the baseline.
    pub baseline_scoring: LossFunction,
}

impl Default for RobustConfig {
    fn default() -> Self {
        RobustConfig {
            sizes: vec![50, 100, 200, 500],
            repetitions: 20,
            base_seed: 0,
            sigmas: vec![0.01, 0.05, 0.1, 0.5],
            lambdas: vec![1e-4, 1e-3, 1e-2, 1e-1, 1.0],
            gammas: vec![0.5, 1.0, 2.0],
            folds: 5,
            cv_decoder: DecoderSpec::ScalarGrid { bound: 3.0, grid_points: 16, refinements: 12 },
            decoder: DecoderSpec::ROBUST_DEFAULT,
            test_points: 1000,
            baseline: true,
            scoring: LossFunction::AbsoluteValue,
            baseline_scoring: LossFunction::SquaredError,
        }
    }
}

pub const ROBUST_METRIC: &str = "mean_abs_distance_to_clean";

/// Mean `|f(x) - sin(6 pi x)|` over the test grid.
fn distance_to_clean(model: &TrainedSurrogate, decoder: &DecoderSpec, loss: &LossFunction, grid: &[f64]) -> Result<f64> {
    let mut total = 0.0;
    for &x in grid {
        let a = model.alpha_weights(&[x])?;
        let y = decode(decoder, loss, &a, model.outputs())?.as_scalar()?;
        total += (y - clean_function(x)).abs();
    }
    Ok(total / grid.len() as f64)
}

/// Metric of both methods on one dataset: `(algorithm, baseline)`.
fn robust_trial(cfg: &RobustConfig, n: usize, seed: u64, grid: &[f64]) -> Result<(f64, Option<f64>)> {
    let data = gen_robust_data(n, seed)?;
    let xs = data.features();
    let ys = data.outputs();
    let kernels = gaussians(&cfg.sigmas)?;
    let plan = CvPlan {
        folds: cfg.folds,
        seed,
        lambdas: cfg.lambdas.clone(),
        kernels: kernels.clone(),
        decode_losses: cfg.gammas.iter().map(|&g| LossFunction::cauchy(g)).collect::<Result<_>>()?,
        scoring: cfg.scoring.clone(),
    };
    let cv = cross_validate(&xs, &ys, &plan, &cfg.cv_decoder)?;
    let (model, loss) = fit_selected(xs.clone(), ys.clone(), &cv)?;
    let alg = distance_to_clean(&model, &cfg.decoder, &loss, grid)?;

    let base = if cfg.baseline {
        let plan = CvPlan { decode_losses: vec![LossFunction::SquaredError], scoring: cfg.baseline_scoring.clone(), ..plan };
        let cv = cross_validate(&xs, &ys, &plan, &DecoderSpec::KernelRidgeMean)?;
        let (model, loss) = fit_selected(xs, ys, &cv)?;
        Some(distance_to_clean(&model, &DecoderSpec::KernelRidgeMean, &loss, grid)?)
    } else {
        None
    };
    Ok((alg, base))
}

/// Cauchy-loss estimator against the kernel ridge baseline, both tuned by
/// cross-validation, scored by the mean absolute distance to the noiseless
/// function on a uniform test grid over `[-1, 1]`.
pub fn run_robust_experiment(cfg: &RobustConfig) -> Result<Vec<ExperimentResult>> {
    if cfg.sizes.is_empty() || cfg.repetitions == 0 {
        return Err(Error::Empty("experiment grid"));
    }
    if cfg.test_points == 0 {
        return Err(Error::Empty("test grid"));
    }
    cfg.cv_decoder.validate()?;
    cfg.decoder.validate()?;
    let grid = linspace(-1.0, 1.0, cfg.test_points);
    let mut results = Vec::new();
    for &n in &cfg.sizes {
        let seeds: Vec<u64> = (0..cfg.repetitions).map(|r| derive_seed(cfg.base_seed, n, r)).collect();
        let start = Instant::now();
        let trials = seeds
            .par_iter()
            .map(|&s| robust_trial(cfg, n, s, &grid).context_with(|| format!("n = {n}, seed = {s}")))
            .collect::<Result<Vec<_>>>()?;
        let wall = start.elapsed().as_secs_f64();
        let alg: Vec<f64> = trials.iter().map(|t| t.0).collect();
        results.push(ExperimentResult::new("surrogate_cauchy", ROBUST_METRIC, n, seeds.clone(), alg, wall));
        if cfg.baseline {
            let krr: Vec<f64> = trials.iter().map(|t| t.1.expect("baseline computed")).collect();
            results.push(ExperimentResult::new("krr", ROBUST_METRIC, n, seeds, krr, wall));
        }
    }
    Ok(results)
}

// ---------------------------------------------------------------------------
// ranking

/// Users with latent features rating a fixed set of items.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RankingDataset {
    pub items: usize,
    /// One feature vector per user.
    pub features: Vec<Vec<f64>>,
    pub profiles: Vec<RatingProfile>,
}

pub const RANKING_LATENT_DIM: usize = 3;
pub const RANKING_NOISE_STD: f64 = 0.5;

/// Item features `z_j` are drawn once per seed; each user `u` rates item `j`
/// as `clip(round(3 + u.z_j + noise), 1, 5)` and is described by `u` itself.
pub fn gen_ranking_data(items: usize, n: usize, seed: u64) -> Result<RankingDataset> {
    if items < 2 {
        return Err(Error::InvalidParameter(format!("need at least 2 items, got {items}")));
    }
    if n == 0 {
        return Err(Error::Empty("ranking dataset"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = |rng: &mut ChaCha8Rng| -> f64 { StandardNormal.sample(rng) };
    let z: Vec<Vec<f64>> = (0..items)
        .map(|_| (0..RANKING_LATENT_DIM).map(|_| normal(&mut rng)).collect())
        .collect();
    let mut features = Vec::with_capacity(n);
    let mut profiles = Vec::with_capacity(n);
    for _ in 0..n {
        let u: Vec<f64> = (0..RANKING_LATENT_DIM).map(|_| normal(&mut rng)).collect();
        let ratings = z
            .iter()
            .map(|zj| {
                let score = 3.0 + u.iter().zip(zj).map(|(a, b)| a * b).sum::<f64>()
                    + RANKING_NOISE_STD * normal(&mut rng);
                score.round().clamp(1.0, 5.0)
            })
            .collect();
        profiles.push(RatingProfile::new(ratings)?);
        features.push(u);
    }
    Ok(RankingDataset { items, features, profiles })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RankingConfig {
    pub items: usize,
    pub sizes: Vec<usize>,
    pub test_size: usize,
    pub repetitions: usize,
    pub base_seed: u64,
    pub sigmas: Vec<f64>,
    pub lambdas: Vec<f64>,
    pub folds: usize,
}

impl Default for RankingConfig {
    fn default() -> Self {
        RankingConfig {
            items: 6,
            sizes: vec![50, 100, 200],
            test_size: 200,
            repetitions: 5,
            base_seed: 0,
            sigmas: vec![0.5, 2.0, 8.0],
            lambdas: vec![1e-4, 1e-2, 1.0],
            folds: 5,
        }
    }
}

pub const RANKING_METRIC: &str = "normalized_rank_loss";

/// Sort of the training profile with the lowest mean training loss, used as
/// a constant prediction.
pub fn best_single_profile(profiles: &[RatingProfile]) -> Result<crate::losses::Ranking> {
    if profiles.is_empty() {
        return Err(Error::Empty("training profiles"));
    }
    let mut best = (f64::INFINITY, None);
    for p in profiles {
        let r = p.sorted_ranking();
        let mut total = 0.0;
        for q in profiles {
            total += rank_loss(&r, q, true)?;
        }
        if total < best.0 {
            best = (total, Some(r));
        }
    }
    Ok(best.1.expect("non-empty"))
}

fn ranking_trial(cfg: &RankingConfig, n: usize, seed: u64) -> Result<(f64, f64)> {
    let data = gen_ranking_data(cfg.items, n + cfg.test_size, seed)?;
    let (train_x, test_x) = data.features.split_at(n);
    let (train_p, test_p) = data.profiles.split_at(n);
    let xs = train_x.to_vec();
    let ys: Vec<Output> = train_p.iter().cloned().map(Output::Ratings).collect();
    let loss = LossFunction::RankLoss { normalize: true };
    let decoder = DecoderSpec::RankingFas { items: cfg.items };
    let plan = CvPlan {
        folds: cfg.folds,
        seed,
        lambdas: cfg.lambdas.clone(),
        kernels: gaussians(&cfg.sigmas)?,
        decode_losses: vec![loss.clone()],
        scoring: loss.clone(),
    };
    let cv = cross_validate(&xs, &ys, &plan, &decoder)?;
    let (model, loss) = fit_selected(xs, ys, &cv)?;
    let baseline = best_single_profile(train_p)?;
    let (mut alg, mut base) = (0.0, 0.0);
    for (x, p) in test_x.iter().zip(test_p) {
        let a = model.alpha_weights(x)?;
        let pred = decode(&decoder, &loss, &a, model.outputs())?;
        alg += rank_loss(pred.as_ranking()?, p, true)?;
        base += rank_loss(&baseline, p, true)?;
    }
    let m = test_x.len() as f64;
    Ok((alg / m, base / m))
}

/// Ranking decoder against the best single training ranking, on held-out users.
pub fn run_ranking_experiment(cfg: &RankingConfig) -> Result<Vec<ExperimentResult>> {
    if cfg.sizes.is_empty() || cfg.repetitions == 0 || cfg.test_size == 0 {
        return Err(Error::Empty("experiment grid"));
    }
    let mut results = Vec::new();
    for &n in &cfg.sizes {
        let seeds: Vec<u64> = (0..cfg.repetitions).map(|r| derive_seed(cfg.base_seed, n, r)).collect();
        let start = Instant::now();
        let trials = seeds
            .par_iter()
            .map(|&s| ranking_trial(cfg, n, s).context_with(|| format!("n = {n}, seed = {s}")))
            .collect::<Result<Vec<_>>>()?;
        let wall = start.elapsed().as_secs_f64();
        let alg = trials.iter().map(|t| t.0).collect();
        let base = trials.iter().map(|t| t.1).collect();
        results.push(ExperimentResult::new("surrogate_fas", RANKING_METRIC, n, seeds.clone(), alg, wall));
        results.push(ExperimentResult::new("best_single_profile", RANKING_METRIC, n, seeds, base, wall));
    }
    Ok(results)
}

// ---------------------------------------------------------------------------
// histograms

/// Pairs of histograms: the input is a noisy view of the first half of a
/// `2 * dim` bin histogram, the target is the normalized second half.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HistogramDataset {
    pub dim: usize,
    pub inputs: Vec<Vec<f64>>,
    pub targets: Vec<Vec<f64>>,
}

pub const HISTOGRAM_COMPONENTS: usize = 4;
pub const HISTOGRAM_CONCENTRATION: f64 = 30.0;
pub const HISTOGRAM_INPUT_NOISE: f64 = 0.02;
/// Floor added to every bin before normalizing, so no bin is exactly empty.
const BIN_FLOOR: f64 = 1e-6;

fn dirichlet<R: Rng>(rng: &mut R, conc: &[f64]) -> Vec<f64> {
    let draws: Vec<f64> = conc
        .iter()
        .map(|&a| Gamma::new(a, 1.0).expect("positive shape").sample(rng) + BIN_FLOOR)
        .collect();
    let s: f64 = draws.iter().sum();
    draws.iter().map(|v| v / s).collect()
}

fn normalize(v: &[f64]) -> Vec<f64> {
    let s: f64 = v.iter().sum();
    v.iter().map(|x| x / s).collect()
}

/// Mixture of Dirichlet distributions around a few random prototypes.
pub fn gen_histogram_data(dim: usize, n: usize, seed: u64) -> Result<HistogramDataset> {
    if dim < 2 {
        return Err(Error::InvalidParameter(format!("histogram halves need at least 2 bins, got {dim}")));
    }
    if n == 0 {
        return Err(Error::Empty("histogram dataset"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let prototypes: Vec<Vec<f64>> = (0..HISTOGRAM_COMPONENTS)
        .map(|_| dirichlet(&mut rng, &vec![1.0; 2 * dim]))
        .collect();
    let mut inputs = Vec::with_capacity(n);
    let mut targets = Vec::with_capacity(n);
    for _ in 0..n {
        let c = rng.random_range(0..HISTOGRAM_COMPONENTS);
        let conc: Vec<f64> = prototypes[c].iter().map(|p| HISTOGRAM_CONCENTRATION * p + 0.05).collect();
        let h = dirichlet(&mut rng, &conc);
        let first = normalize(&h[..dim]);
        let noisy: Vec<f64> = first
            .iter()
            .map(|&v| {
                let z: f64 = StandardNormal.sample(&mut rng);
                (v + HISTOGRAM_INPUT_NOISE * z).max(0.0)
            })
            .collect();
        let s: f64 = noisy.iter().sum();
        inputs.push(if s > 0.0 { normalize(&noisy) } else { first });
        targets.push(normalize(&h[dim..]));
    }
    Ok(HistogramDataset { dim, inputs, targets })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HistogramConfig {
    pub dim: usize,
    pub sizes: Vec<usize>,
    pub test_size: usize,
    pub repetitions: usize,
    pub base_seed: u64,
    pub sigmas: Vec<f64>,
    pub lambdas: Vec<f64>,
    pub folds: usize,
    /// Bandwidth of the Gaussian output kernel behind the KDE-induced loss.
    pub output_sigma: f64,
}

impl Default for HistogramConfig {
    fn default() -> Self {
        HistogramConfig {
            dim: 8,
            sizes: vec![50, 100, 200],
            test_size: 200,
            repetitions: 5,
            base_seed: 0,
            sigmas: vec![0.05, 0.2, 1.0],
            lambdas: vec![1e-4, 1e-2, 1.0],
            folds: 5,
            output_sigma: 0.1,
        }
    }
}

pub const HELLINGER_METRIC: &str = "squared_hellinger";
pub const KDE_METRIC: &str = "gaussian_kde_loss";

/// Test losses `[hellinger method, kde method] x [hellinger metric, kde metric]`.
fn histogram_trial(cfg: &HistogramConfig, n: usize, seed: u64) -> Result<[[f64; 2]; 2]> {
    let data = gen_histogram_data(cfg.dim, n + cfg.test_size, seed)?;
    let (train_x, test_x) = data.inputs.split_at(n);
    let (train_y, test_y) = data.targets.split_at(n);
    let xs = train_x.to_vec();
    let ys: Vec<Output> = train_y.iter().cloned().map(Output::Histogram).collect();
    let kde = LossFunction::KdeInduced { kernel: KernelSpec::gaussian(cfg.output_sigma)? };
    let hel = LossFunction::SquaredHellinger;
    let methods = [(hel.clone(), DecoderSpec::SimplexHellinger), (kde.clone(), DecoderSpec::TrainingCandidates)];
    let mut out = [[0.0; 2]; 2];
    for (row, (loss, decoder)) in out.iter_mut().zip(&methods) {
        let plan = CvPlan {
            folds: cfg.folds,
            seed,
            lambdas: cfg.lambdas.clone(),
            kernels: gaussians(&cfg.sigmas)?,
            decode_losses: vec![loss.clone()],
            scoring: loss.clone(),
        };
        let cv = cross_validate(&xs, &ys, &plan, decoder)?;
        let (model, loss) = fit_selected(xs.clone(), ys.clone(), &cv)?;
        for (x, y) in test_x.iter().zip(test_y) {
            let a = model.alpha_weights(x)?;
            let pred = decode(decoder, &loss, &a, model.outputs())?;
            let truth = Output::Histogram(y.clone());
            row[0] += squared_hellinger(pred.as_histogram()?, y)?;
            row[1] += kde.eval(&pred, &truth)?;
        }
        for v in row.iter_mut() {
            *v /= test_x.len() as f64;
        }
    }
    Ok(out)
}

/// Closed-form Hellinger decoding against KDE decoding over the training
/// targets, each scored under both losses.
pub fn run_histogram_experiment(cfg: &HistogramConfig) -> Result<Vec<ExperimentResult>> {
    if cfg.sizes.is_empty() || cfg.repetitions == 0 || cfg.test_size == 0 {
        return Err(Error::Empty("experiment grid"));
    }
    let mut results = Vec::new();
    for &n in &cfg.sizes {
        let seeds: Vec<u64> = (0..cfg.repetitions).map(|r| derive_seed(cfg.base_seed, n, r)).collect();
        let start = Instant::now();
        let trials = seeds
            .par_iter()
            .map(|&s| histogram_trial(cfg, n, s).context_with(|| format!("n = {n}, seed = {s}")))
            .collect::<Result<Vec<_>>>()?;
        let wall = start.elapsed().as_secs_f64();
        for (mi, method) in ["surrogate_hellinger", "kde_decoding"].iter().enumerate() {
            for (ki, metric) in [HELLINGER_METRIC, KDE_METRIC].iter().enumerate() {
                let raw = trials.iter().map(|t| t[mi][ki]).collect();
                results.push(ExperimentResult::new(method, metric, n, seeds.clone(), raw, wall));
            }
        }
    }
    Ok(results)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn robust_data_is_deterministic() {
        assert_eq!(gen_robust_data(50, 3).unwrap(), gen_robust_data(50, 3).unwrap());
        assert_ne!(gen_robust_data(50, 3).unwrap(), gen_robust_data(50, 4).unwrap());
    }

    #[test]
    fn robust_data_shape() {
        let d = gen_robust_data(2000, 1).unwrap();
        assert!(d.inputs.iter().all(|x| x.abs() <= 1.0));
        for (x, c) in d.inputs.iter().zip(&d.clean) {
            assert_eq!(*c, (6.0 * PI * x).sin());
        }
        assert_eq!(clean_function(0.0), 0.0);
        assert!(gen_robust_data(0, 1).is_err());
    }

    #[test]
    fn outlier_fraction() {
        let d = gen_robust_data(100_000, 11).unwrap();
        let frac = d.outlier.iter().filter(|o| **o).count() as f64 / d.len() as f64;
        assert!((frac - 0.1).abs() <= 0.01, "{frac}");
    }

    #[test]
    fn noise_variance() {
        let d = gen_robust_data(100_000, 12).unwrap();
        let resid: Vec<f64> = (0..d.len())
            .filter(|&i| !d.outlier[i])
            .map(|i| d.targets[i] - d.clean[i])
            .collect();
        let (m, s) = mean_std(&resid);
        assert!(m.abs() < 0.01);
        assert!((s * s - 0.1).abs() < 0.005, "{}", s * s);
    }

    #[test]
    fn krr_interpolates_at_small_lambda() {
        let xs = vec![vec![-1.0], vec![0.0], vec![1.0]];
        let ys = [0.5, -1.0, 2.0];
        let k = KernelSpec::gaussian(0.5).unwrap();
        for (x, y) in xs.iter().zip(ys) {
            assert_abs_diff_eq!(krr_baseline(&xs, &ys, &k, 1e-12, x).unwrap(), y, epsilon = 1e-8);
        }
    }

    #[test]
    fn krr_constant_data() {
        // with a Linear kernel and x = (1), alpha_i = 1/(n + n*lambda) each
        let xs = vec![vec![1.0]; 4];
        let ys = [2.5; 4];
        let v = krr_baseline(&xs, &ys, &KernelSpec::Linear, 1e-9, &[1.0]).unwrap();
        assert_abs_diff_eq!(v, 2.5, epsilon = 1e-6);
    }

    #[test]
    fn linspace_endpoints() {
        let g = linspace(-1.0, 1.0, 1000);
        assert_eq!(g.len(), 1000);
        assert_eq!(g[0], -1.0);
        assert_eq!(g[999], 1.0);
    }

    #[test]
    fn ranking_data_ranges() {
        let d = gen_ranking_data(5, 40, 2).unwrap();
        assert_eq!(d.profiles.len(), 40);
        for p in &d.profiles {
            assert_eq!(p.len(), 5);
            assert!(p.ratings().iter().all(|r| (1.0..=5.0).contains(r) && r.fract() == 0.0));
        }
        assert_eq!(d, gen_ranking_data(5, 40, 2).unwrap());
    }

    #[test]
    fn histogram_data_on_simplex() {
        let d = gen_histogram_data(6, 30, 5).unwrap();
        for (x, y) in d.inputs.iter().zip(&d.targets) {
            assert_eq!(x.len(), 6);
            assert_eq!(y.len(), 6);
            assert!(crate::losses::check_simplex(x).is_ok());
            assert!(crate::losses::check_simplex(y).is_ok());
        }
        assert_eq!(d, gen_histogram_data(6, 30, 5).unwrap());
    }

    #[test]
    fn best_single_profile_is_a_training_sort() {
        let d = gen_ranking_data(4, 20, 8).unwrap();
        let r = best_single_profile(&d.profiles).unwrap();
        assert!(d.profiles.iter().any(|p| p.sorted_ranking() == r));
    }

    #[test]
    fn small_experiments_run() {
        let cfg = RankingConfig { sizes: vec![30], test_size: 20, repetitions: 2, ..Default::default() };
        let r = run_ranking_experiment(&cfg).unwrap();
        assert_eq!(r.len(), 2);
        assert!(r.iter().all(|e| e.std >= 0.0 && e.raw.len() == 2));

        let cfg = HistogramConfig { sizes: vec![30], test_size: 20, repetitions: 2, ..Default::default() };
        let r = run_histogram_experiment(&cfg).unwrap();
        assert_eq!(r.len(), 4);
        assert!(r.iter().all(|e| e.mean >= 0.0));
    }
}
