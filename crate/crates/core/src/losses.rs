//! Structured losses and their explicit finite-output embeddings.
//!
//! Every loss here can be written as `loss(y, y') = <psi(y), V psi(y')>` for
//! some embedding `psi` and bounded operator `V`. Prediction never needs
//! `psi` or `V`; they are only materialized for finite output sets, where
//! `psi(y)` is the canonical basis vector of `y` and `V` is the loss table.

use std::fmt;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::KernelSpec;

/// Tolerance on `sum(y) == 1` for histogram inputs.
pub const SIMPLEX_TOL: f64 = 1e-9;

/// A ranking of `M` items as a rank vector: `ranks[i]` is the position of
/// item `i`, with 1 the top.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<usize>", into = "Vec<usize>")]
pub struct Ranking(Vec<usize>);

impl Ranking {
    pub fn new(ranks: Vec<usize>) -> Result<Self> {
        let m = ranks.len();
        let mut seen = vec![false; m];
        for &r in &ranks {
            if r == 0 || r > m || seen[r - 1] {
                return Err(Error::InvalidOutput(format!("{ranks:?} is not a permutation of 1..={m}")));
            }
            seen[r - 1] = true;
        }
        Ok(Ranking(ranks))
    }

    /// Builds a ranking from items listed best first.
    pub fn from_order(order: &[usize]) -> Result<Self> {
        let m = order.len();
        let mut ranks = vec![0; m];
        for (pos, &item) in order.iter().enumerate() {
            if item >= m || ranks[item] != 0 {
                return Err(Error::InvalidOutput(format!("{order:?} is not an ordering of 0..{m}")));
            }
            ranks[item] = pos + 1;
        }
        Ok(Ranking(ranks))
    }

    pub fn ranks(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Items listed best first.
    pub fn order(&self) -> Vec<usize> {
        let mut order = vec![0; self.0.len()];
        for (item, &r) in self.0.iter().enumerate() {
            order[r - 1] = item;
        }
        order
    }

    /// Ratings that this ranking sorts strictly: the top item gets `M`.
    pub fn to_profile(&self) -> RatingProfile {
        let m = self.0.len();
        RatingProfile(self.0.iter().map(|&r| (m + 1 - r) as f64).collect())
    }
}

impl TryFrom<Vec<usize>> for Ranking {
    type Error = Error;
    fn try_from(v: Vec<usize>) -> Result<Self> {
        Ranking::new(v)
    }
}

impl From<Ranking> for Vec<usize> {
    fn from(r: Ranking) -> Self {
        r.0
    }
}

/// One rating per item; higher is better.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct RatingProfile(Vec<f64>);

impl RatingProfile {
    pub fn new(ratings: Vec<f64>) -> Result<Self> {
        if ratings.len() < 2 {
            return Err(Error::InvalidOutput("a rating profile needs at least two items".into()));
        }
        if !ratings.iter().all(|r| r.is_finite()) {
            return Err(Error::NonFinite("rating profile"));
        }
        Ok(RatingProfile(ratings))
    }

    pub fn ratings(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// `gamma_ij = max(0, r_j - r_i)`: the price of putting `i` above `j`.
    pub fn reward(&self, i: usize, j: usize) -> f64 {
        (self.0[j] - self.0[i]).max(0.0)
    }

    /// Sum of all `gamma_ij`; the normalizer of the rank loss.
    pub fn total_reward(&self) -> f64 {
        let m = self.0.len();
        let mut z = 0.0;
        for i in 0..m {
            for j in 0..m {
                z += self.reward(i, j);
            }
        }
        z
    }

    /// Sort by descending rating, ties kept in item order.
    pub fn sorted_ranking(&self) -> Ranking {
        let mut order: Vec<usize> = (0..self.0.len()).collect();
        order.sort_by(|&a, &b| self.0[b].total_cmp(&self.0[a]));
        Ranking::from_order(&order).expect("sorted indices form a permutation")
    }
}

impl TryFrom<Vec<f64>> for RatingProfile {
    type Error = Error;
    fn try_from(v: Vec<f64>) -> Result<Self> {
        RatingProfile::new(v)
    }
}

impl From<RatingProfile> for Vec<f64> {
    fn from(r: RatingProfile) -> Self {
        r.0
    }
}

/// A structured output value.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum Output {
    Label(usize),
    Scalar(f64),
    Histogram(Vec<f64>),
    Ranking(Ranking),
    Ratings(RatingProfile),
}

impl Output {
    pub fn as_label(&self) -> Result<usize> {
        match self {
            Output::Label(l) => Ok(*l),
            other => Err(Error::Incompatible(format!("expected a label, got {other}"))),
        }
    }

    pub fn as_scalar(&self) -> Result<f64> {
        match self {
            Output::Scalar(v) => Ok(*v),
            other => Err(Error::Incompatible(format!("expected a scalar, got {other}"))),
        }
    }

    pub fn as_histogram(&self) -> Result<&[f64]> {
        match self {
            Output::Histogram(h) => Ok(h),
            other => Err(Error::Incompatible(format!("expected a histogram, got {other}"))),
        }
    }

    pub fn as_ranking(&self) -> Result<&Ranking> {
        match self {
            Output::Ranking(r) => Ok(r),
            other => Err(Error::Incompatible(format!("expected a ranking, got {other}"))),
        }
    }

    pub fn as_ratings(&self) -> Result<&RatingProfile> {
        match self {
            Output::Ratings(r) => Ok(r),
            other => Err(Error::Incompatible(format!("expected a rating profile, got {other}"))),
        }
    }

    /// Real-vector view used by output kernels.
    pub fn to_vector(&self) -> Vec<f64> {
        match self {
            Output::Label(l) => vec![*l as f64],
            Output::Scalar(v) => vec![*v],
            Output::Histogram(h) => h.clone(),
            Output::Ranking(r) => r.ranks().iter().map(|&v| v as f64).collect(),
            Output::Ratings(r) => r.ratings().to_vec(),
        }
    }
}

impl fmt::Display for Output {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Output::Label(l) => write!(f, "label {l}"),
            Output::Scalar(v) => write!(f, "scalar {v}"),
            Output::Histogram(h) => write!(f, "histogram of length {}", h.len()),
            Output::Ranking(r) => write!(f, "ranking {:?}", r.ranks()),
            Output::Ratings(r) => write!(f, "ratings {:?}", r.ratings()),
        }
    }
}

/// Explicit loss table over a finite list of outputs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FiniteTable {
    labels: Vec<Output>,
    values: Vec<f64>,
}

impl FiniteTable {
    /// `values` is row-major: entry `(i, j)` is `loss(labels[i], labels[j])`.
    pub fn new(labels: Vec<Output>, values: Vec<f64>) -> Result<Self> {
        let n = labels.len();
        if n == 0 {
            return Err(Error::Empty("finite table labels"));
        }
        if values.len() != n * n {
            return Err(Error::DimensionMismatch { expected: n * n, found: values.len() });
        }
        if !values.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite("finite loss table"));
        }
        check_distinct(&labels)?;
        Ok(FiniteTable { labels, values })
    }

    pub fn labels(&self) -> &[Output] {
        &self.labels
    }

    pub fn index_of(&self, y: &Output) -> Result<usize> {
        self.labels
            .iter()
            .position(|l| l == y)
            .ok_or_else(|| Error::UnknownLabel(y.to_string()))
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.labels.len() + j]
    }
}

fn check_distinct(labels: &[Output]) -> Result<()> {
    for (i, a) in labels.iter().enumerate() {
        if labels[..i].contains(a) {
            return Err(Error::InvalidParameter(format!("duplicate label {a}")));
        }
    }
    Ok(())
}

/// What kind of outputs a loss compares.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OutputSpace {
    Labels { count: usize },
    Simplex,
    Scalar,
    Permutations,
    Vectors,
    Table { size: usize },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LossFunction {
    /// Misclassification over labels `0..classes`.
    ZeroOne { classes: usize },
    SquaredHellinger,
    ChiSquare,
    Cauchy { gamma: f64 },
    AbsoluteValue,
    SquaredError,
    /// `h(y, y) - 2 h(y, y') + h(y', y')` for an output kernel `h`.
    KdeInduced { kernel: KernelSpec },
    /// First argument a ranking, second a rating profile (or a ranking,
    /// read through [`Ranking::to_profile`]).
    RankLoss { normalize: bool },
    FiniteTable(FiniteTable),
}

impl LossFunction {
    pub fn cauchy(gamma: f64) -> Result<Self> {
        check_gamma(gamma)?;
        Ok(LossFunction::Cauchy { gamma })
    }

    pub fn name(&self) -> &'static str {
        match self {
            LossFunction::ZeroOne { .. } => "zero_one",
            LossFunction::SquaredHellinger => "squared_hellinger",
            LossFunction::ChiSquare => "chi_square",
            LossFunction::Cauchy { .. } => "cauchy",
            LossFunction::AbsoluteValue => "absolute_value",
            LossFunction::SquaredError => "squared_error",
            LossFunction::KdeInduced { .. } => "kde_induced",
            LossFunction::RankLoss { .. } => "rank_loss",
            LossFunction::FiniteTable(_) => "finite_table",
        }
    }

    pub fn output_space(&self) -> OutputSpace {
        match self {
            LossFunction::ZeroOne { classes } => OutputSpace::Labels { count: *classes },
            LossFunction::SquaredHellinger | LossFunction::ChiSquare => OutputSpace::Simplex,
            LossFunction::Cauchy { .. } | LossFunction::AbsoluteValue | LossFunction::SquaredError => {
                OutputSpace::Scalar
            }
            LossFunction::KdeInduced { .. } => OutputSpace::Vectors,
            LossFunction::RankLoss { .. } => OutputSpace::Permutations,
            LossFunction::FiniteTable(t) => OutputSpace::Table { size: t.labels.len() },
        }
    }

    /// Loss on plain reals, for the scalar losses only.
    pub fn scalar_fn(&self) -> Result<impl Fn(f64, f64) -> f64 + Copy> {
        #[derive(Clone, Copy)]
        enum Kind {
            Cauchy(f64),
            Abs,
            Sq,
        }
        let kind = match self {
            LossFunction::Cauchy { gamma } => {
                check_gamma(*gamma)?;
                Kind::Cauchy(*gamma)
            }
            LossFunction::AbsoluteValue => Kind::Abs,
            LossFunction::SquaredError => Kind::Sq,
            other => {
                return Err(Error::Incompatible(format!("{} is not a scalar loss", other.name())))
            }
        };
        Ok(move |a: f64, b: f64| {
            let d = a - b;
            match kind {
                Kind::Cauchy(g) => g * (d * d / g).ln_1p(),
                Kind::Abs => d.abs(),
                Kind::Sq => d * d,
            }
        })
    }

    /// `loss(y, y')`.
    pub fn eval(&self, y: &Output, other: &Output) -> Result<f64> {
        match self {
            LossFunction::ZeroOne { classes } => zero_one(y.as_label()?, other.as_label()?, *classes),
            LossFunction::SquaredHellinger => squared_hellinger(y.as_histogram()?, other.as_histogram()?),
            LossFunction::ChiSquare => chi_square(y.as_histogram()?, other.as_histogram()?),
            LossFunction::Cauchy { gamma } => cauchy(y.as_scalar()?, other.as_scalar()?, *gamma),
            LossFunction::AbsoluteValue | LossFunction::SquaredError => {
                let (a, b) = (y.as_scalar()?, other.as_scalar()?);
                if !(a.is_finite() && b.is_finite()) {
                    return Err(Error::NonFinite("scalar output"));
                }
                Ok(self.scalar_fn()?(a, b))
            }
            LossFunction::KdeInduced { kernel } => kde_loss(kernel, &y.to_vector(), &other.to_vector()),
            LossFunction::RankLoss { normalize } => {
                let ranking = y.as_ranking()?;
                match other {
                    Output::Ratings(p) => rank_loss(ranking, p, *normalize),
                    Output::Ranking(r) => rank_loss(ranking, &r.to_profile(), *normalize),
                    o => Err(Error::Incompatible(format!("rank loss needs ratings, got {o}"))),
                }
            }
            LossFunction::FiniteTable(t) => Ok(t.get(t.index_of(y)?, t.index_of(other)?)),
        }
    }
}

fn check_gamma(gamma: f64) -> Result<()> {
    if gamma > 0.0 && gamma.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("cauchy gamma must be positive, got {gamma}")))
    }
}

pub fn zero_one(y: usize, other: usize, classes: usize) -> Result<f64> {
    for l in [y, other] {
        if l >= classes {
            return Err(Error::UnknownLabel(format!("{l} (classes 0..{classes})")));
        }
    }
    Ok(if y == other { 0.0 } else { 1.0 })
}

/// Validates a histogram and returns its normalizing sum.
pub fn check_simplex(y: &[f64]) -> Result<f64> {
    if y.is_empty() {
        return Err(Error::Empty("histogram"));
    }
    if !y.iter().all(|v| v.is_finite()) {
        return Err(Error::NonFinite("histogram"));
    }
    if let Some(v) = y.iter().find(|v| **v < 0.0) {
        return Err(Error::InvalidOutput(format!("negative histogram entry {v}")));
    }
    let s: f64 = y.iter().sum();
    if (s - 1.0).abs() > SIMPLEX_TOL {
        return Err(Error::InvalidOutput(format!("histogram sums to {s}, not 1")));
    }
    Ok(s)
}

fn simplex_pair<'a>(y: &'a [f64], other: &'a [f64]) -> Result<(f64, f64)> {
    if y.len() != other.len() {
        return Err(Error::DimensionMismatch { expected: y.len(), found: other.len() });
    }
    Ok((check_simplex(y)?, check_simplex(other)?))
}

/// `sum_j (sqrt(y_j) - sqrt(y'_j))^2`, in `[0, 2]`.
pub fn squared_hellinger(y: &[f64], other: &[f64]) -> Result<f64> {
    let (sa, sb) = simplex_pair(y, other)?;
    Ok(y
        .iter()
        .zip(other)
        .map(|(a, b)| {
            let d = (a / sa).sqrt() - (b / sb).sqrt();
            d * d
        })
        .sum())
}

/// `sum_j (y_j - y'_j)^2 / (y_j + y'_j)`; coordinates with a zero
/// denominator contribute nothing.
pub fn chi_square(y: &[f64], other: &[f64]) -> Result<f64> {
    let (sa, sb) = simplex_pair(y, other)?;
    Ok(y
        .iter()
        .zip(other)
        .map(|(a, b)| {
            let (a, b) = (a / sa, b / sb);
            let den = a + b;
            if den > 0.0 {
                (a - b) * (a - b) / den
            } else {
                0.0
            }
        })
        .sum())
}

/// `gamma * ln(1 + (y - y')^2 / gamma)`.
pub fn cauchy(y: f64, other: f64, gamma: f64) -> Result<f64> {
    check_gamma(gamma)?;
    if !(y.is_finite() && other.is_finite()) {
        return Err(Error::NonFinite("cauchy argument"));
    }
    let d = y - other;
    Ok(gamma * (d * d / gamma).ln_1p())
}

/// Loss induced by an output kernel: `h(y, y) - 2 h(y, y') + h(y', y')`.
pub fn kde_loss(kernel: &KernelSpec, y: &[f64], other: &[f64]) -> Result<f64> {
    let v = kernel.eval(y, y)? - 2.0 * kernel.eval(y, other)? + kernel.eval(other, other)?;
    // clamp rounding noise on identical arguments
    Ok(v.max(0.0))
}

/// `sum_{i,j} gamma_ij * (1 - sign(y_i - y_j)) / 2`, with
/// `gamma_ij = max(0, r_j - r_i)`. Optionally divided by `sum gamma_ij`
/// (zero when the profile is constant).
pub fn rank_loss(ranking: &Ranking, profile: &RatingProfile, normalize: bool) -> Result<f64> {
    let m = ranking.len();
    if profile.len() != m {
        return Err(Error::DimensionMismatch { expected: m, found: profile.len() });
    }
    let ranks = ranking.ranks();
    let mut total = 0.0;
    for i in 0..m {
        for j in 0..m {
            let reward = profile.reward(i, j);
            let indicator = match ranks[i].cmp(&ranks[j]) {
                std::cmp::Ordering::Less => 1.0,
                std::cmp::Ordering::Equal => 0.5,
                std::cmp::Ordering::Greater => 0.0,
            };
            total += reward * indicator;
        }
    }
    if normalize {
        let z = profile.total_reward();
        Ok(if z > 0.0 { total / z } else { 0.0 })
    } else {
        Ok(total)
    }
}

/// Finite-output embedding: `psi(y) = e_{q(y)}`, `V[i][j] = loss(labels[i], labels[j])`
/// and `c_delta = ||V||_2` (every `psi(y)` has unit norm).
#[derive(Clone, Debug)]
pub struct FiniteLossEmbedding {
    labels: Vec<Output>,
    v: Vec<f64>,
    c_delta: f64,
}

impl FiniteLossEmbedding {
    pub fn size(&self) -> usize {
        self.labels.len()
    }

    pub fn labels(&self) -> &[Output] {
        &self.labels
    }

    /// `q(y)`.
    pub fn index_of(&self, y: &Output) -> Result<usize> {
        self.labels
            .iter()
            .position(|l| l == y)
            .ok_or_else(|| Error::UnknownLabel(y.to_string()))
    }

    pub fn entry(&self, i: usize, j: usize) -> f64 {
        self.v[i * self.labels.len() + j]
    }

    /// Row-major `V`.
    pub fn matrix(&self) -> &[f64] {
        &self.v
    }

    pub fn c_delta(&self) -> f64 {
        self.c_delta
    }

    pub fn psi(&self, y: &Output) -> Result<Vec<f64>> {
        let mut e = vec![0.0; self.size()];
        e[self.index_of(y)?] = 1.0;
        Ok(e)
    }

    /// `<psi(labels[index]), V h>`.
    pub fn pairing(&self, index: usize, h: &[f64]) -> f64 {
        let n = self.size();
        self.v[index * n..(index + 1) * n].iter().zip(h).map(|(a, b)| a * b).sum()
    }

    /// `argmin_y <psi(y), V h>`, lowest index on ties.
    pub fn decode(&self, h: &[f64]) -> Result<usize> {
        if h.len() != self.size() {
            return Err(Error::DimensionMismatch { expected: self.size(), found: h.len() });
        }
        let mut best = (0, f64::INFINITY);
        for i in 0..self.size() {
            let s = self.pairing(i, h);
            if s < best.1 {
                best = (i, s);
            }
        }
        Ok(best.0)
    }
}

pub fn build_finite_embedding(loss: &LossFunction, labels: &[Output]) -> Result<FiniteLossEmbedding> {
    if labels.is_empty() {
        return Err(Error::Empty("embedding labels"));
    }
    check_distinct(labels)?;
    let n = labels.len();
    let mut v = Vec::with_capacity(n * n);
    for a in labels {
        for b in labels {
            v.push(loss.eval(a, b)?);
        }
    }
    let c_delta = spectral_norm(n, &v);
    Ok(FiniteLossEmbedding { labels: labels.to_vec(), v, c_delta })
}

/// Largest singular value of a square row-major matrix.
pub fn spectral_norm(order: usize, data: &[f64]) -> f64 {
    let m = DMatrix::from_row_slice(order, order, data);
    m.singular_values().iter().copied().fold(0.0, f64::max)
}
