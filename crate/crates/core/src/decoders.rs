//! The prediction step: minimize `F(y) = sum_i alpha_i(x) * loss(y, y_i)`
//! over the output space. Ties are always broken towards the lowest index.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::losses::{check_simplex, LossFunction, Output, Ranking, RatingProfile};
use crate::surrogate::{AlphaWeights, TrainedSurrogate};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DecoderSpec {
    /// Scan a fixed candidate list.
    Exhaustive { candidates: Vec<Output> },
    /// Scan the training outputs of the fitted model.
    TrainingCandidates,
    /// Rankings of `items` items under the rank loss.
    RankingFas { items: usize },
    /// Scalars in `[-bound, bound]`: `grid_points` uniform evaluations, then
    /// `refinements` golden-section steps around the best one.
    ScalarGrid { bound: f64, grid_points: usize, refinements: usize },
    /// Histograms under the squared Hellinger distance (closed form).
    SimplexHellinger,
    /// Kernel ridge regression readout `sum_i alpha_i y_i` for scalar
    /// outputs. Not an argmin decoder; the loss is ignored. Used as a baseline.
    KernelRidgeMean,
}

impl DecoderSpec {
    /// Grid decoder used for the robust regression experiment.
    pub const ROBUST_DEFAULT: DecoderSpec = DecoderSpec::ScalarGrid {
        bound: 3.0,
        grid_points: 128,
        refinements: 40,
    };

    pub fn validate(&self) -> Result<()> {
        match self {
            DecoderSpec::Exhaustive { candidates } if candidates.is_empty() => {
                Err(Error::Empty("decoder candidate list"))
            }
            DecoderSpec::RankingFas { items } if *items < 2 => {
                Err(Error::InvalidParameter(format!("ranking needs at least 2 items, got {items}")))
            }
            DecoderSpec::ScalarGrid { bound, grid_points, .. } => {
                if *grid_points < 2 {
                    return Err(Error::InvalidParameter(format!(
                        "scalar grid needs at least 2 points, got {grid_points}"
                    )));
                }
                if !(*bound > 0.0 && bound.is_finite()) {
                    return Err(Error::InvalidParameter(format!("scalar grid bound must be positive, got {bound}")));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }
}

fn check_alpha_len(alphas: &[f64], n: usize) -> Result<()> {
    if alphas.len() != n {
        return Err(Error::DimensionMismatch { expected: n, found: alphas.len() });
    }
    Ok(())
}

/// `F(y)` for a single candidate.
pub fn exhaustive_objective(candidate: &Output, alphas: &[f64], loss: &LossFunction, y_train: &[Output]) -> Result<f64> {
    check_alpha_len(alphas, y_train.len())?;
    let mut f = 0.0;
    for (a, yi) in alphas.iter().zip(y_train) {
        f += a * loss.eval(candidate, yi)?;
    }
    Ok(f)
}

/// Index and objective of the best candidate.
pub fn decode_exhaustive(
    candidates: &[Output],
    alphas: &[f64],
    loss: &LossFunction,
    y_train: &[Output],
) -> Result<(usize, f64)> {
    if candidates.is_empty() {
        return Err(Error::Empty("decoder candidate list"));
    }
    let mut best = (0, f64::INFINITY);
    for (c, cand) in candidates.iter().enumerate() {
        let f = exhaustive_objective(cand, alphas, loss, y_train)?;
        if f.is_nan() {
            return Err(Error::NonFinite("decoding objective"));
        }
        if f < best.1 {
            best = (c, f);
        }
    }
    Ok(best)
}

/// Aggregated pairwise costs `W[i][j] = sum_t alpha_t * gamma(profile_t)_ij`
/// (row-major `items x items`). With `normalize`, each profile's rewards
/// are divided by its total so `W` matches the normalized rank loss.
///
/// Exchanging sums gives `sum_t alpha_t * rank_loss(y, profile_t) =
/// sum_{i above j} W[i][j]` for any ranking `y`.
pub fn pairwise_costs(alphas: &[f64], profiles: &[RatingProfile], items: usize, normalize: bool) -> Result<Vec<f64>> {
    check_alpha_len(alphas, profiles.len())?;
    let mut w = vec![0.0; items * items];
    for (a, p) in alphas.iter().zip(profiles) {
        if p.len() != items {
            return Err(Error::DimensionMismatch { expected: items, found: p.len() });
        }
        let scale = if normalize {
            match p.total_reward() {
                z if z > 0.0 => a / z,
                _ => continue,
            }
        } else {
            *a
        };
        if scale == 0.0 {
            continue;
        }
        let r = p.ratings();
        for i in 0..items {
            for j in 0..items {
                let g = r[j] - r[i];
                if g > 0.0 {
                    w[i * items + j] += scale * g;
                }
            }
        }
    }
    Ok(w)
}

/// `sum_{i above j} W[i][j]` for an ordering listed best first.
pub fn order_objective(order: &[usize], costs: &[f64]) -> f64 {
    let m = order.len();
    let mut f = 0.0;
    for (a, &i) in order.iter().enumerate() {
        for &j in &order[a + 1..] {
            f += costs[i * m + j];
        }
    }
    f
}

pub fn ranking_objective(ranking: &Ranking, costs: &[f64]) -> f64 {
    order_objective(&ranking.order(), costs)
}

/// Greedy source/sink peeling on the tournament whose arc `u -> v` carries
/// `W[v][u] - W[u][v]` when positive (placing `u` first is cheaper).
fn eades_lin_smyth(costs: &[f64], m: usize) -> Vec<usize> {
    let net = |u: usize, v: usize| costs[v * m + u] - costs[u * m + v];
    let mut alive = vec![true; m];
    let mut out_deg = vec![0usize; m];
    let mut in_deg = vec![0usize; m];
    for u in 0..m {
        for v in 0..m {
            if u != v && net(u, v) > 0.0 {
                out_deg[u] += 1;
                in_deg[v] += 1;
            }
        }
    }
    let mut head = Vec::with_capacity(m);
    let mut tail = Vec::with_capacity(m);
    let mut left = m;

    let remove = |u: usize, alive: &mut [bool], out_deg: &mut [usize], in_deg: &mut [usize]| {
        alive[u] = false;
        for v in 0..m {
            if alive[v] {
                if net(u, v) > 0.0 {
                    in_deg[v] -= 1;
                }
                if net(v, u) > 0.0 {
                    out_deg[v] -= 1;
                }
            }
        }
    };

    while left > 0 {
        while let Some(u) = (0..m).find(|&u| alive[u] && out_deg[u] == 0) {
            remove(u, &mut alive, &mut out_deg, &mut in_deg);
            tail.push(u);
            left -= 1;
        }
        while let Some(u) = (0..m).find(|&u| alive[u] && in_deg[u] == 0) {
            remove(u, &mut alive, &mut out_deg, &mut in_deg);
            head.push(u);
            left -= 1;
        }
        if left > 0 {
            let mut best = (usize::MAX, f64::NEG_INFINITY);
            for u in (0..m).filter(|&u| alive[u]) {
                let delta: f64 = (0..m).filter(|&v| v != u && alive[v]).map(|v| net(u, v)).sum();
                if delta > best.1 {
                    best = (u, delta);
                }
            }
            remove(best.0, &mut alive, &mut out_deg, &mut in_deg);
            head.push(best.0);
            left -= 1;
        }
    }
    head.extend(tail.into_iter().rev());
    head
}

/// Single-item moves until none strictly improves the objective.
fn insertion_polish(order: &mut Vec<usize>, costs: &[f64]) {
    let m = order.len();
    let scale: f64 = costs.iter().map(|c| c.abs()).sum();
    let tol = 1e-12 * (1.0 + scale);
    loop {
        let mut best = (0.0, 0, 0);
        for p in 0..m {
            let x = order[p];
            let mut gain = 0.0;
            for q in (0..p).rev() {
                let z = order[q];
                gain += costs[x * m + z] - costs[z * m + x];
                if gain < best.0 {
                    best = (gain, p, q);
                }
            }
            let mut gain = 0.0;
            for q in p + 1..m {
                let z = order[q];
                gain += costs[z * m + x] - costs[x * m + z];
                if gain < best.0 {
                    best = (gain, p, q);
                }
            }
        }
        if best.0 >= -tol {
            return;
        }
        let x = order.remove(best.1);
        order.insert(best.2, x);
    }
}

/// Approximate `argmin_y sum_t alpha_t * rank_loss(y, profile_t)`.
///
/// Aggregates the pairwise costs, orders items with the greedy
/// Eades-Lin-Smyth feedback arc set heuristic, keeps whichever of that
/// ordering and the training profiles' own sorts is cheapest, then applies
/// single-item moves until no move helps.
pub fn decode_ranking_fas(alphas: &[f64], profiles: &[RatingProfile], items: usize, normalize: bool) -> Result<Ranking> {
    if items < 2 {
        return Err(Error::InvalidParameter(format!("ranking needs at least 2 items, got {items}")));
    }
    let costs = pairwise_costs(alphas, profiles, items, normalize)?;
    let mut order = eades_lin_smyth(&costs, items);
    let mut best = order_objective(&order, &costs);
    for p in profiles {
        let cand = p.sorted_ranking().order();
        let f = order_objective(&cand, &costs);
        if f < best {
            best = f;
            order = cand;
        }
    }
    insertion_polish(&mut order, &costs);
    Ranking::from_order(&order)
}

/// Weighted-objective minimizer over `[-bound, bound]` for a scalar loss.
///
/// Training targets may lie outside the interval; only the search is bounded.
pub fn decode_scalar_grid(
    alphas: &[f64],
    y_train: &[f64],
    loss: &LossFunction,
    bound: f64,
    grid_points: usize,
    refinements: usize,
) -> Result<f64> {
    DecoderSpec::ScalarGrid { bound, grid_points, refinements }.validate()?;
    check_alpha_len(alphas, y_train.len())?;
    if !y_train.iter().all(|v| v.is_finite()) {
        return Err(Error::NonFinite("scalar training output"));
    }
    let f = loss.scalar_fn()?;
    let terms: Vec<(f64, f64)> = alphas
        .iter()
        .zip(y_train)
        .filter(|(a, _)| **a != 0.0)
        .map(|(a, y)| (*a, *y))
        .collect();
    if let LossFunction::Cauchy { gamma } = *loss {
        // ln(1 + u) rather than ln_1p: same minimizer, noticeably cheaper
        let inv = 1.0 / gamma;
        let objective = |t: f64| -> f64 {
            gamma * terms.iter().map(|&(a, y)| a * ((t - y) * (t - y) * inv + 1.0).ln()).sum::<f64>()
        };
        return grid_search(objective, bound, grid_points, refinements);
    }
    let objective = |t: f64| -> f64 { terms.iter().map(|&(a, y)| a * f(t, y)).sum() };
    grid_search(objective, bound, grid_points, refinements)
}

/// Uniform grid on `[-bound, bound]`, then golden-section refinement inside
/// the two cells around the best grid point.
fn grid_search(objective: impl Fn(f64) -> f64, bound: f64, grid_points: usize, refinements: usize) -> Result<f64> {
    let step = 2.0 * bound / (grid_points - 1) as f64;
    let point = |g: usize| if g + 1 == grid_points { bound } else { -bound + g as f64 * step };
    let mut best = (0usize, f64::INFINITY);
    for g in 0..grid_points {
        let v = objective(point(g));
        if v.is_nan() {
            return Err(Error::NonFinite("decoding objective"));
        }
        if v < best.1 {
            best = (g, v);
        }
    }
    let (mut arg, mut val) = (point(best.0), best.1);
    if refinements == 0 {
        return Ok(arg);
    }

    let mut lo = point(best.0.saturating_sub(1));
    let mut hi = point((best.0 + 1).min(grid_points - 1));
    let ratio = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = hi - ratio * (hi - lo);
    let mut d = lo + ratio * (hi - lo);
    let mut fc = objective(c);
    let mut fd = objective(d);
    for _ in 1..refinements {
        if fc <= fd {
            hi = d;
            d = c;
            fd = fc;
            c = hi - ratio * (hi - lo);
            fc = objective(c);
        } else {
            lo = c;
            c = d;
            fc = fd;
            d = lo + ratio * (hi - lo);
            fd = objective(d);
        }
    }
    for (t, v) in [(c, fc), (d, fd)] {
        if v < val {
            arg = t;
            val = v;
        }
    }
    Ok(arg)
}

/// Closed-form minimizer of `sum_i alpha_i * hellinger(y, y_i)` over the simplex.
///
/// With `b_j = sum_i alpha_i sqrt(y_ij)` the objective equals
/// `2 sum(alpha) - 2 sum_j b_j sqrt(y_j)`, so the optimum is
/// `y_j = max(b_j, 0)^2 / sum_k max(b_k, 0)^2`. When no `b_j` is positive the
/// optimum sits on the vertex of the largest `b_j`.
pub fn decode_simplex_hellinger(alphas: &[f64], y_train: &[Vec<f64>]) -> Result<Vec<f64>> {
    if y_train.is_empty() {
        return Err(Error::Empty("histogram training outputs"));
    }
    check_alpha_len(alphas, y_train.len())?;
    let dim = y_train[0].len();
    let mut b = vec![0.0; dim];
    for (a, y) in alphas.iter().zip(y_train) {
        if y.len() != dim {
            return Err(Error::DimensionMismatch { expected: dim, found: y.len() });
        }
        let s = check_simplex(y)?;
        for (bj, yj) in b.iter_mut().zip(y) {
            *bj += a * (yj / s).sqrt();
        }
    }
    let total: f64 = b.iter().map(|v| v.max(0.0).powi(2)).sum();
    if total > 0.0 {
        return Ok(b.iter().map(|v| v.max(0.0).powi(2) / total).collect());
    }
    let mut top = 0;
    for j in 1..dim {
        if b[j] > b[top] {
            top = j;
        }
    }
    let mut y = vec![0.0; dim];
    y[top] = 1.0;
    Ok(y)
}

fn scalars(outputs: &[Output]) -> Result<Vec<f64>> {
    outputs.iter().map(Output::as_scalar).collect()
}

/// Decodes one query from its weights.
pub fn decode(decoder: &DecoderSpec, loss: &LossFunction, alphas: &AlphaWeights, outputs: &[Output]) -> Result<Output> {
    let a = &alphas.weights;
    check_alpha_len(a, outputs.len())?;
    match decoder {
        DecoderSpec::Exhaustive { candidates } => {
            let (i, _) = decode_exhaustive(candidates, a, loss, outputs)?;
            Ok(candidates[i].clone())
        }
        DecoderSpec::TrainingCandidates => {
            let (i, _) = decode_exhaustive(outputs, a, loss, outputs)?;
            Ok(outputs[i].clone())
        }
        DecoderSpec::RankingFas { items } => {
            let LossFunction::RankLoss { normalize } = loss else {
                return Err(Error::Incompatible(format!("ranking decoder needs the rank loss, got {}", loss.name())));
            };
            let profiles = outputs
                .iter()
                .map(|o| match o {
                    Output::Ratings(p) => Ok(p.clone()),
                    Output::Ranking(r) => Ok(r.to_profile()),
                    other => Err(Error::Incompatible(format!("ranking decoder needs ratings, got {other}"))),
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(Output::Ranking(decode_ranking_fas(a, &profiles, *items, *normalize)?))
        }
        DecoderSpec::ScalarGrid { bound, grid_points, refinements } => {
            let y = scalars(outputs)?;
            Ok(Output::Scalar(decode_scalar_grid(a, &y, loss, *bound, *grid_points, *refinements)?))
        }
        DecoderSpec::SimplexHellinger => {
            if *loss != LossFunction::SquaredHellinger {
                return Err(Error::Incompatible(format!(
                    "simplex decoder needs the squared Hellinger loss, got {}",
                    loss.name()
                )));
            }
            let hs = outputs
                .iter()
                .map(|o| o.as_histogram().map(<[f64]>::to_vec))
                .collect::<Result<Vec<_>>>()?;
            Ok(Output::Histogram(decode_simplex_hellinger(a, &hs)?))
        }
        DecoderSpec::KernelRidgeMean => {
            let y = scalars(outputs)?;
            Ok(Output::Scalar(a.iter().zip(&y).map(|(w, v)| w * v).sum()))
        }
    }
}

/// `alpha_weights` followed by the requested decoder.
pub fn predict(model: &TrainedSurrogate, decoder: &DecoderSpec, loss: &LossFunction, x: &[f64]) -> Result<Output> {
    decoder.validate()?;
    let alphas = model.alpha_weights(x)?;
    decode(decoder, loss, &alphas, model.outputs())
}
