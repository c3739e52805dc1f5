//! Exact computations on fully enumerated problems: expected risk, the
//! Bayes-optimal predictor, the surrogate minimizer `g*`, and the
//! consistency properties that tie them together.
//!
//! Outputs are finite, so `psi` is the canonical basis and `V` the loss
//! table (see [`build_finite_embedding`]). Maps `X -> Y` are index vectors
//! into `FiniteProblem::outputs`.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::decoders::{decode_exhaustive, exhaustive_objective};
use crate::error::{Error, Result};
use crate::kernels::KernelSpec;
use crate::losses::{build_finite_embedding, FiniteLossEmbedding, FiniteTable, LossFunction, Output, Ranking};
use crate::surrogate::TrainedSurrogate;

/// Tolerance on the total mass of the joint table.
pub const MASS_TOL: f64 = 1e-12;

/// Joint distribution over a finite `X x Y`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FiniteProblem {
    inputs: Vec<Vec<f64>>,
    outputs: Vec<Output>,
    /// `joint[x][y]`.
    joint: Vec<Vec<f64>>,
}

impl FiniteProblem {
    pub fn new(inputs: Vec<Vec<f64>>, outputs: Vec<Output>, joint: Vec<Vec<f64>>) -> Result<Self> {
        if inputs.is_empty() || outputs.is_empty() {
            return Err(Error::Empty("finite problem"));
        }
        if joint.len() != inputs.len() {
            return Err(Error::DimensionMismatch { expected: inputs.len(), found: joint.len() });
        }
        let mut total = 0.0;
        for row in &joint {
            if row.len() != outputs.len() {
                return Err(Error::DimensionMismatch { expected: outputs.len(), found: row.len() });
            }
            if row.iter().any(|p| !(*p >= 0.0 && p.is_finite())) {
                return Err(Error::InvalidParameter("joint probabilities must be non-negative".into()));
            }
            let m: f64 = row.iter().sum();
            if m <= 0.0 {
                return Err(Error::InvalidParameter("every input needs positive marginal mass".into()));
            }
            total += m;
        }
        if (total - 1.0).abs() > MASS_TOL {
            return Err(Error::InvalidParameter(format!("joint mass is {total}, not 1")));
        }
        Ok(FiniteProblem { inputs, outputs, joint })
    }

    pub fn inputs(&self) -> &[Vec<f64>] {
        &self.inputs
    }

    pub fn outputs(&self) -> &[Output] {
        &self.outputs
    }

    pub fn joint(&self) -> &[Vec<f64>] {
        &self.joint
    }

    pub fn marginal(&self, x: usize) -> f64 {
        self.joint[x].iter().sum()
    }

    pub fn conditional(&self, x: usize) -> Vec<f64> {
        let m = self.marginal(x);
        self.joint[x].iter().map(|p| p / m).collect()
    }

    /// Draws `n` i.i.d. pairs.
    pub fn sample<R: Rng>(&self, n: usize, rng: &mut R) -> (Vec<Vec<f64>>, Vec<Output>) {
        let ny = self.outputs.len();
        let cells: Vec<f64> = self.joint.iter().flatten().copied().collect();
        let mut xs = Vec::with_capacity(n);
        let mut ys = Vec::with_capacity(n);
        for _ in 0..n {
            let u: f64 = rng.random::<f64>();
            let mut acc = 0.0;
            let mut cell = cells.len() - 1;
            for (c, p) in cells.iter().enumerate() {
                acc += p;
                if u < acc {
                    cell = c;
                    break;
                }
            }
            xs.push(self.inputs[cell / ny].clone());
            ys.push(self.outputs[cell % ny].clone());
        }
        (xs, ys)
    }
}

/// A surrogate function tabulated on `X`, in canonical coordinates of `R^|Y|`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TabularG {
    pub values: Vec<Vec<f64>>,
}

fn check_embedding(p: &FiniteProblem, e: &FiniteLossEmbedding) -> Result<()> {
    if e.labels() != p.outputs() {
        return Err(Error::Incompatible("embedding labels must list the problem outputs in order".into()));
    }
    Ok(())
}

fn check_g(p: &FiniteProblem, g: &TabularG) -> Result<()> {
    if g.values.len() != p.inputs.len() {
        return Err(Error::DimensionMismatch { expected: p.inputs.len(), found: g.values.len() });
    }
    for row in &g.values {
        if row.len() != p.outputs.len() {
            return Err(Error::DimensionMismatch { expected: p.outputs.len(), found: row.len() });
        }
        if !row.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite("tabular g"));
        }
    }
    Ok(())
}

/// `E(f) = sum_{x,y} rho(x, y) * loss(f(x), y)`.
pub fn structured_risk(p: &FiniteProblem, loss: &LossFunction, f: &[usize]) -> Result<f64> {
    if f.len() != p.inputs.len() {
        return Err(Error::DimensionMismatch { expected: p.inputs.len(), found: f.len() });
    }
    let mut risk = 0.0;
    for (x, &fx) in f.iter().enumerate() {
        let pred = p.outputs.get(fx).ok_or_else(|| Error::UnknownLabel(format!("output index {fx}")))?;
        for (y, prob) in p.joint[x].iter().enumerate() {
            risk += prob * loss.eval(pred, &p.outputs[y])?;
        }
    }
    Ok(risk)
}

/// Per-input minimizer of the conditional risk, lowest index on ties.
pub fn bayes_optimal(p: &FiniteProblem, loss: &LossFunction) -> Result<(Vec<usize>, f64)> {
    let f = (0..p.inputs.len())
        .map(|x| decode_exhaustive(&p.outputs, &p.joint[x], loss, &p.outputs).map(|(i, _)| i))
        .collect::<Result<Vec<_>>>()?;
    let risk = structured_risk(p, loss, &f)?;
    Ok((f, risk))
}

/// `g*(x) = E[psi(Y) | x]`: the conditional distribution itself.
pub fn gstar_embedding(p: &FiniteProblem, e: &FiniteLossEmbedding) -> Result<TabularG> {
    check_embedding(p, e)?;
    Ok(TabularG { values: (0..p.inputs.len()).map(|x| p.conditional(x)).collect() })
}

/// `R(g) = sum_{x,y} rho(x, y) * ||g(x) - psi(y)||^2`.
pub fn surrogate_risk(p: &FiniteProblem, e: &FiniteLossEmbedding, g: &TabularG) -> Result<f64> {
    check_embedding(p, e)?;
    check_g(p, g)?;
    let mut risk = 0.0;
    for (x, gx) in g.values.iter().enumerate() {
        let sq: f64 = gx.iter().map(|v| v * v).sum();
        for (y, prob) in p.joint[x].iter().enumerate() {
            // ||g - e_y||^2 = ||g||^2 - 2 g_y + 1
            risk += prob * (sq - 2.0 * gx[y] + 1.0);
        }
    }
    Ok(risk)
}

/// `d(g(x)) = argmin_y <psi(y), V g(x)>` for every `x`.
pub fn decode_tabular(g: &TabularG, e: &FiniteLossEmbedding) -> Result<Vec<usize>> {
    g.values.iter().map(|gx| e.decode(gx)).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FisherReport {
    pub decoded_risk: f64,
    pub bayes_risk: f64,
    pub gap: f64,
}

/// `E(d(g*)) - E(f*)`, which should vanish.
pub fn check_fisher(p: &FiniteProblem, loss: &LossFunction) -> Result<FisherReport> {
    let e = build_finite_embedding(loss, p.outputs())?;
    let g = gstar_embedding(p, &e)?;
    let decoded_risk = structured_risk(p, loss, &decode_tabular(&g, &e)?)?;
    let (_, bayes_risk) = bayes_optimal(p, loss)?;
    Ok(FisherReport { decoded_risk, bayes_risk, gap: decoded_risk - bayes_risk })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    /// `E(d(g)) - E(f*)`.
    pub lhs: f64,
    /// `2 c_delta sqrt(R(g) - R(g*))`.
    pub rhs: f64,
    pub holds: bool,
}

/// Slack allowed on the comparison inequality.
pub const COMPARISON_TOL: f64 = 1e-9;

pub fn check_comparison(p: &FiniteProblem, loss: &LossFunction, g: &TabularG) -> Result<ComparisonReport> {
    let e = build_finite_embedding(loss, p.outputs())?;
    check_g(p, g)?;
    let gstar = gstar_embedding(p, &e)?;
    let (_, bayes) = bayes_optimal(p, loss)?;
    let lhs = structured_risk(p, loss, &decode_tabular(g, &e)?)? - bayes;
    let excess = surrogate_risk(p, &e, g)? - surrogate_risk(p, &e, &gstar)?;
    let rhs = 2.0 * e.c_delta() * excess.max(0.0).sqrt();
    Ok(ComparisonReport { lhs, rhs, holds: lhs <= rhs + COMPARISON_TOL })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EquivalenceReport {
    pub queries: usize,
    /// Queries where the two predictions differ although their scores differ
    /// by more than the tie tolerance.
    pub mismatches: usize,
    /// Queries where the predictions differ only through a floating-point tie.
    pub near_ties: usize,
}

impl EquivalenceReport {
    pub fn holds(&self) -> bool {
        self.mismatches == 0
    }
}

/// Relative tolerance under which two class scores count as tied.
pub const TIE_TOL: f64 = 1e-12;

/// Compares the least-squares classifier `argmax_c g_hat(x)_c` with the
/// weighted-argmin prediction under the 0-1 loss, for every query.
pub fn check_ls_equivalence(
    inputs: Vec<Vec<f64>>,
    labels: &[usize],
    classes: usize,
    kernel: KernelSpec,
    lambda: f64,
    queries: &[Vec<f64>],
) -> Result<EquivalenceReport> {
    let loss = LossFunction::ZeroOne { classes };
    let candidates: Vec<Output> = (0..classes).map(Output::Label).collect();
    let outputs: Vec<Output> = labels.iter().map(|&l| Output::Label(l)).collect();
    let model = TrainedSurrogate::fit(inputs, outputs, kernel, lambda)?;
    let e = build_finite_embedding(&loss, &candidates)?;
    let mut report = EquivalenceReport { queries: queries.len(), mismatches: 0, near_ties: 0 };
    for q in queries {
        let alpha = model.alpha_weights(q)?;
        let g = model.g_hat_from_weights(&e, &alpha)?;
        let mut argmax = 0;
        for c in 1..classes {
            if g[c] > g[argmax] {
                argmax = c;
            }
        }
        let (alg, _) = decode_exhaustive(&candidates, &alpha.weights, &loss, model.outputs())?;
        if alg != argmax {
            let scale = 1.0 + alpha.weights.iter().map(|a| a.abs()).sum::<f64>();
            if (g[alg] - g[argmax]).abs() <= TIE_TOL * scale {
                report.near_ties += 1;
            } else {
                report.mismatches += 1;
            }
        }
    }
    Ok(report)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConsistencyReport {
    pub sizes: Vec<usize>,
    pub lambdas: Vec<f64>,
    /// `excess[size][seed]`.
    pub excess: Vec<Vec<f64>>,
    pub medians: Vec<f64>,
    pub inversions: usize,
    pub holds: bool,
}

pub fn median(v: &[f64]) -> f64 {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len();
    if n == 0 {
        return f64::NAN;
    }
    if n % 2 == 1 {
        s[n / 2]
    } else {
        0.5 * (s[n / 2 - 1] + s[n / 2])
    }
}

/// True when `values` never increases, except for at most one step that
/// rises by no more than `slack` relative to the previous value.
pub fn nonincreasing_with_slack(values: &[f64], slack: f64) -> (bool, usize) {
    let mut inversions = 0;
    let mut ok = true;
    for w in values.windows(2) {
        if w[1] > w[0] {
            inversions += 1;
            if w[1] - w[0] > slack * w[0] {
                ok = false;
            }
        }
    }
    (ok && inversions <= 1, inversions)
}

/// Excess structured risk of the learned predictor with `lambda_n = n^(-1/4)`
/// across sample sizes, `seeds` independent draws per size.
pub fn consistency_trend(
    p: &FiniteProblem,
    loss: &LossFunction,
    kernel: &KernelSpec,
    sizes: &[usize],
    seeds: usize,
    base_seed: u64,
) -> Result<ConsistencyReport> {
    let (_, bayes) = bayes_optimal(p, loss)?;
    let lambdas: Vec<f64> = sizes.iter().map(|&n| (n as f64).powf(-0.25)).collect();
    let mut excess = Vec::with_capacity(sizes.len());
    for (&n, &lambda) in sizes.iter().zip(&lambdas) {
        let mut row = Vec::with_capacity(seeds);
        for s in 0..seeds {
            let mut rng = ChaCha8Rng::seed_from_u64(base_seed ^ ((n as u64) << 32) ^ s as u64);
            let (xs, ys) = p.sample(n, &mut rng);
            let model = TrainedSurrogate::fit(xs, ys, kernel.clone(), lambda)?;
            let f = p
                .inputs()
                .iter()
                .map(|x| {
                    let a = model.alpha_weights(x)?;
                    decode_exhaustive(p.outputs(), &a.weights, loss, model.outputs()).map(|(i, _)| i)
                })
                .collect::<Result<Vec<_>>>()?;
            row.push(structured_risk(p, loss, &f)? - bayes);
        }
        excess.push(row);
    }
    let medians: Vec<f64> = excess.iter().map(|r| median(r)).collect();
    let (holds, inversions) = nonincreasing_with_slack(&medians, 0.1);
    Ok(ConsistencyReport { sizes: sizes.to_vec(), lambdas, excess, medians, inversions, holds })
}

/// Random problem with `|X|` in `2..=5`, `|Y|` in `2..=6`, Dirichlet(1)
/// joint table, and inputs spaced one unit apart on a line.
pub fn random_problem<R: Rng>(rng: &mut R, outputs: Option<Vec<Output>>) -> FiniteProblem {
    let nx = rng.random_range(2..=5);
    let outputs = outputs.unwrap_or_else(|| (0..rng.random_range(2..=6)).map(Output::Label).collect());
    let ny = outputs.len();
    let cells: Vec<f64> = (0..nx * ny).map(|_| Exp1.sample(rng)).collect::<Vec<f64>>();
    let total: f64 = cells.iter().sum();
    let mut joint: Vec<Vec<f64>> = cells.chunks(ny).map(|c| c.iter().map(|v| v / total).collect()).collect();
    // pin the total to 1 up to rounding in one cell
    let drift = 1.0 - joint.iter().flatten().sum::<f64>();
    joint[0][0] = (joint[0][0] + drift).max(0.0);
    let inputs = (0..nx).map(|i| vec![i as f64]).collect();
    FiniteProblem::new(inputs, outputs, joint).expect("generated problem is valid")
}

/// Random non-negative loss table with a zero diagonal.
pub fn random_table<R: Rng>(rng: &mut R, labels: Vec<Output>) -> LossFunction {
    let n = labels.len();
    let values = (0..n * n)
        .map(|c| if c / n == c % n { 0.0 } else { rng.random_range(0.0..1.0) })
        .collect();
    LossFunction::FiniteTable(FiniteTable::new(labels, values).expect("valid table"))
}

/// All rankings of `m` items, in lexicographic order of their item orderings.
pub fn all_rankings(m: usize) -> Vec<Ranking> {
    fn rec(prefix: &mut Vec<usize>, used: &mut [bool], out: &mut Vec<Ranking>) {
        if prefix.len() == used.len() {
            out.push(Ranking::from_order(prefix).expect("complete ordering"));
            return;
        }
        for i in 0..used.len() {
            if !used[i] {
                used[i] = true;
                prefix.push(i);
                rec(prefix, used, out);
                prefix.pop();
                used[i] = false;
            }
        }
    }
    let mut out = Vec::new();
    rec(&mut Vec::new(), &mut vec![false; m], &mut out);
    out
}

/// `g* + scale * N(0, I)` perturbations with a random scale.
pub fn perturbed_g<R: Rng>(rng: &mut R, gstar: &TabularG) -> TabularG {
    let scale = [1e-4, 1e-3, 1e-2, 0.1, 0.3, 1.0, 3.0][rng.random_range(0..7)];
    TabularG {
        values: gstar
            .values
            .iter()
            .map(|row| {
                row.iter()
                    .map(|v| {
                        let z: f64 = StandardNormal.sample(rng);
                        v + scale * z
                    })
                    .collect::<Vec<f64>>()
            })
            .collect(),
    }
}

/// Objective of a candidate under tabulated weights: `sum_y w_y loss(c, y)`.
pub fn weighted_objective(candidate: &Output, weights: &[f64], loss: &LossFunction, outputs: &[Output]) -> Result<f64> {
    exhaustive_objective(candidate, weights, loss, outputs)
}

/// Outcome of a randomized sweep of one check.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub name: String,
    pub trials: usize,
    pub violations: usize,
    /// Largest observed deviation, in the units of `tolerance`.
    pub worst: f64,
    pub tolerance: f64,
    pub passed: bool,
}

impl SweepReport {
    fn new(name: &str, trials: usize, violations: usize, worst: f64, tolerance: f64) -> Self {
        SweepReport { name: name.to_string(), trials, violations, worst, tolerance, passed: violations == 0 }
    }
}

/// Tolerance on the Fisher gap.
pub const FISHER_TOL: f64 = 1e-10;

/// Loss families used by the Fisher sweep: 0-1 loss, a random loss table,
/// and the rank loss on three items.
pub fn fisher_sweep(problems: usize, seed: u64) -> Result<Vec<SweepReport>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    for family in ["zero_one", "finite_table", "rank_loss_s3"] {
        let (mut violations, mut worst) = (0, 0.0f64);
        for _ in 0..problems {
            let (p, loss) = match family {
                "zero_one" => {
                    let p = random_problem(&mut rng, None);
                    let classes = p.outputs().len();
                    (p, LossFunction::ZeroOne { classes })
                }
                "finite_table" => {
                    let p = random_problem(&mut rng, None);
                    let loss = random_table(&mut rng, p.outputs().to_vec());
                    (p, loss)
                }
                _ => {
                    let labels = all_rankings(3).into_iter().map(Output::Ranking).collect();
                    (random_problem(&mut rng, Some(labels)), LossFunction::RankLoss { normalize: false })
                }
            };
            let gap = check_fisher(&p, &loss)?.gap.abs();
            worst = worst.max(gap);
            if gap > FISHER_TOL {
                violations += 1;
            }
        }
        out.push(SweepReport::new(family, problems, violations, worst, FISHER_TOL));
    }
    Ok(out)
}

/// Comparison inequality on random problems and perturbed `g*`; the loss
/// alternates between the 0-1 loss and a random table. `worst` is the largest
/// `lhs - rhs`.
pub fn comparison_sweep(pairs: usize, seed: u64) -> Result<SweepReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut violations, mut worst) = (0, f64::NEG_INFINITY);
    for t in 0..pairs {
        let p = random_problem(&mut rng, None);
        let loss = if t % 2 == 0 {
            LossFunction::ZeroOne { classes: p.outputs().len() }
        } else {
            random_table(&mut rng, p.outputs().to_vec())
        };
        let e = build_finite_embedding(&loss, p.outputs())?;
        let g = perturbed_g(&mut rng, &gstar_embedding(&p, &e)?);
        let r = check_comparison(&p, &loss, &g)?;
        worst = worst.max(r.lhs - r.rhs);
        if !r.holds {
            violations += 1;
        }
    }
    Ok(SweepReport::new("comparison", pairs, violations, worst, COMPARISON_TOL))
}

/// Least-squares classifier against 0-1 decoding on random datasets with
/// `n <= 50` points and at most 5 classes. `worst` counts near-ties.
pub fn equivalence_sweep(datasets: usize, seed: u64) -> Result<SweepReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut trials, mut violations, mut ties) = (0, 0, 0);
    for _ in 0..datasets {
        let n = rng.random_range(5..=50);
        let classes = rng.random_range(2..=5);
        let dim = rng.random_range(1..=3);
        let point = |rng: &mut ChaCha8Rng| -> Vec<f64> { (0..dim).map(|_| StandardNormal.sample(rng)).collect() };
        let inputs: Vec<Vec<f64>> = (0..n).map(|_| point(&mut rng)).collect();
        let labels: Vec<usize> = (0..n).map(|_| rng.random_range(0..classes)).collect();
        let mut queries: Vec<Vec<f64>> = (0..20).map(|_| point(&mut rng)).collect();
        queries.extend(inputs.iter().cloned());
        let sigma = 10f64.powf(rng.random_range(-1.0..1.0));
        let lambda = 10f64.powf(rng.random_range(-4.0..0.0));
        let r = check_ls_equivalence(inputs, &labels, classes, KernelSpec::gaussian(sigma)?, lambda, &queries)?;
        trials += r.queries;
        violations += r.mismatches;
        ties += r.near_ties;
    }
    Ok(SweepReport::new("ls_equivalence", trials, violations, ties as f64, TIE_TOL))
}

/// Four well-separated inputs and three labels; at every input the mode
/// leads the runner-up by 0.2.
pub fn consistency_problem() -> FiniteProblem {
    let rows = [
        [0.55, 0.35, 0.10],
        [0.10, 0.55, 0.35],
        [0.35, 0.10, 0.55],
        [0.55, 0.10, 0.35],
    ];
    let joint = rows.iter().map(|r| r.iter().map(|v| v / 4.0).collect()).collect();
    let inputs = (0..4).map(|i| vec![10.0 * i as f64]).collect();
    let outputs = (0..3).map(Output::Label).collect();
    FiniteProblem::new(inputs, outputs, joint).expect("valid problem")
}

pub const CONSISTENCY_SIZES: [usize; 5] = [25, 50, 100, 200, 400];

/// Consistency trend on [`consistency_problem`] under the 0-1 loss.
pub fn consistency_check(seeds: usize, seed: u64) -> Result<ConsistencyReport> {
    let p = consistency_problem();
    consistency_trend(&p, &LossFunction::ZeroOne { classes: 3 }, &KernelSpec::gaussian(1.0)?, &CONSISTENCY_SIZES, seeds, seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn labels(n: usize) -> Vec<Output> {
        (0..n).map(Output::Label).collect()
    }

    fn two_by_two(joint: Vec<Vec<f64>>) -> FiniteProblem {
        FiniteProblem::new(vec![vec![0.0], vec![1.0]], labels(2), joint).unwrap()
    }

    #[test]
    fn problem_validation() {
        assert!(FiniteProblem::new(vec![vec![0.0]], labels(2), vec![vec![0.5, 0.4]]).is_err());
        assert!(FiniteProblem::new(vec![vec![0.0], vec![1.0]], labels(2), vec![vec![1.0, 0.0], vec![0.0, 0.0]]).is_err());
        assert!(FiniteProblem::new(vec![vec![0.0]], labels(2), vec![vec![1.5, -0.5]]).is_err());
    }

    #[test]
    fn risk_of_deterministic_graph_is_zero() {
        let p = two_by_two(vec![vec![0.5, 0.0], vec![0.0, 0.5]]);
        assert_eq!(structured_risk(&p, &LossFunction::ZeroOne { classes: 2 }, &[0, 1]).unwrap(), 0.0);
    }

    #[test]
    fn uniform_two_by_two_risk_is_half() {
        let p = two_by_two(vec![vec![0.25, 0.25], vec![0.25, 0.25]]);
        let l = LossFunction::ZeroOne { classes: 2 };
        for f in [[0, 0], [0, 1], [1, 0], [1, 1]] {
            assert_eq!(structured_risk(&p, &l, &f).unwrap(), 0.5);
        }
    }

    #[test]
    fn risk_matches_double_loop() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let p = random_problem(&mut rng, None);
        let l = random_table(&mut rng, p.outputs().to_vec());
        let f: Vec<usize> = (0..p.inputs().len()).map(|_| rng.random_range(0..p.outputs().len())).collect();
        let mut oracle = 0.0;
        for x in 0..p.inputs().len() {
            for y in 0..p.outputs().len() {
                oracle += p.joint()[x][y] * l.eval(&p.outputs()[f[x]], &p.outputs()[y]).unwrap();
            }
        }
        assert_abs_diff_eq!(structured_risk(&p, &l, &f).unwrap(), oracle, epsilon = 1e-15);
    }

    #[test]
    fn bayes_zero_one_is_conditional_mode() {
        let p = two_by_two(vec![vec![0.1, 0.3], vec![0.4, 0.2]]);
        let (f, r) = bayes_optimal(&p, &LossFunction::ZeroOne { classes: 2 }).unwrap();
        assert_eq!(f, vec![1, 0]);
        assert_abs_diff_eq!(r, 0.3, epsilon = 1e-15);
    }

    #[test]
    fn bayes_squared_error_picks_label_nearest_mean() {
        let outs = vec![Output::Scalar(0.0), Output::Scalar(1.0), Output::Scalar(5.0)];
        // x0: mean 0.2*1 + 0.1*5 = 0.7 / 0.6 ... computed by scanning instead
        let joint = vec![vec![0.3, 0.2, 0.1], vec![0.05, 0.05, 0.3]];
        let p = FiniteProblem::new(vec![vec![0.0], vec![1.0]], outs.clone(), joint).unwrap();
        let (f, _) = bayes_optimal(&p, &LossFunction::SquaredError).unwrap();
        for x in 0..2 {
            let cond = p.conditional(x);
            let mean: f64 = cond.iter().zip(&outs).map(|(c, o)| c * o.as_scalar().unwrap()).sum();
            let nearest = (0..3)
                .min_by(|&a, &b| {
                    let da = (outs[a].as_scalar().unwrap() - mean).abs();
                    let db = (outs[b].as_scalar().unwrap() - mean).abs();
                    da.total_cmp(&db)
                })
                .unwrap();
            assert_eq!(f[x], nearest);
        }
    }

    fn all_maps(nx: usize, ny: usize) -> Vec<Vec<usize>> {
        let mut out = vec![vec![]];
        for _ in 0..nx {
            out = out
                .into_iter()
                .flat_map(|m| (0..ny).map(move |y| [m.clone(), vec![y]].concat()))
                .collect();
        }
        out
    }

    #[test]
    fn nothing_beats_bayes_over_all_maps() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        for _ in 0..20 {
            let ny = rng.random_range(2..=4);
            let p = random_problem(&mut rng, Some(labels(ny)));
            let p = FiniteProblem::new(
                p.inputs()[..p.inputs().len().min(4)].to_vec(),
                p.outputs().to_vec(),
                {
                    let k = p.inputs().len().min(4);
                    let mass: f64 = p.joint()[..k].iter().flatten().sum();
                    p.joint()[..k].iter().map(|r| r.iter().map(|v| v / mass).collect()).collect()
                },
            )
            .unwrap();
            let l = random_table(&mut rng, p.outputs().to_vec());
            let (_, bayes) = bayes_optimal(&p, &l).unwrap();
            for f in all_maps(p.inputs().len(), p.outputs().len()) {
                assert!(structured_risk(&p, &l, &f).unwrap() >= bayes - 1e-15);
            }
        }
    }

    #[test]
    fn gstar_is_conditional_distribution() {
        let p = FiniteProblem::new(
            vec![vec![0.0], vec![1.0]],
            labels(3),
            vec![vec![0.0, 0.5, 0.0], vec![1.0 / 6.0, 1.0 / 6.0, 1.0 / 6.0]],
        )
        .unwrap();
        let e = build_finite_embedding(&LossFunction::ZeroOne { classes: 3 }, &labels(3)).unwrap();
        let g = gstar_embedding(&p, &e).unwrap();
        assert_eq!(g.values[0], vec![0.0, 1.0, 0.0]);
        for v in &g.values[1] {
            assert_abs_diff_eq!(*v, 1.0 / 3.0, epsilon = 1e-15);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let p = random_problem(&mut rng, None);
        let e = build_finite_embedding(&LossFunction::ZeroOne { classes: 6 }, p.outputs()).unwrap();
        for row in gstar_embedding(&p, &e).unwrap().values {
            assert_abs_diff_eq!(row.iter().sum::<f64>(), 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn excess_surrogate_risk_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        for _ in 0..200 {
            let p = random_problem(&mut rng, None);
            let l = random_table(&mut rng, p.outputs().to_vec());
            let e = build_finite_embedding(&l, p.outputs()).unwrap();
            let gstar = gstar_embedding(&p, &e).unwrap();
            let g = perturbed_g(&mut rng, &gstar);
            let lhs = surrogate_risk(&p, &e, &g).unwrap() - surrogate_risk(&p, &e, &gstar).unwrap();
            let mut rhs = 0.0;
            for x in 0..p.inputs().len() {
                let d: f64 = g.values[x].iter().zip(&gstar.values[x]).map(|(a, b)| (a - b) * (a - b)).sum();
                rhs += p.marginal(x) * d;
            }
            assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + rhs), "{lhs} vs {rhs}");
            assert!(surrogate_risk(&p, &e, &g).unwrap() >= 0.0);
        }
    }

    #[test]
    fn zero_g_has_unit_surrogate_risk() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let p = random_problem(&mut rng, None);
        let e = build_finite_embedding(&LossFunction::ZeroOne { classes: 6 }, p.outputs()).unwrap();
        let zero = TabularG { values: vec![vec![0.0; p.outputs().len()]; p.inputs().len()] };
        assert_abs_diff_eq!(surrogate_risk(&p, &e, &zero).unwrap(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn decode_gstar_zero_one_gives_mode() {
        let p = two_by_two(vec![vec![0.1, 0.3], vec![0.4, 0.2]]);
        let e = build_finite_embedding(&LossFunction::ZeroOne { classes: 2 }, p.outputs()).unwrap();
        assert_eq!(decode_tabular(&gstar_embedding(&p, &e).unwrap(), &e).unwrap(), vec![1, 0]);
    }

    #[test]
    fn decode_tabular_matches_scan() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let p = random_problem(&mut rng, None);
        let l = random_table(&mut rng, p.outputs().to_vec());
        let e = build_finite_embedding(&l, p.outputs()).unwrap();
        let g = perturbed_g(&mut rng, &gstar_embedding(&p, &e).unwrap());
        let d = decode_tabular(&g, &e).unwrap();
        for (x, gx) in g.values.iter().enumerate() {
            // column combination: sum_y' V[y][y'] g[y'] = sum_y' g[y'] loss(y, y')
            let (scan, _) = decode_exhaustive(p.outputs(), gx, &l, p.outputs()).unwrap();
            let a = weighted_objective(&p.outputs()[d[x]], gx, &l, p.outputs()).unwrap();
            let b = weighted_objective(&p.outputs()[scan], gx, &l, p.outputs()).unwrap();
            assert!((a - b).abs() <= 1e-12);
        }
    }

    #[test]
    fn fisher_and_comparison_at_gstar() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let p = random_problem(&mut rng, None);
        let l = random_table(&mut rng, p.outputs().to_vec());
        let r = check_fisher(&p, &l).unwrap();
        assert!(r.gap.abs() <= 1e-10);
        let e = build_finite_embedding(&l, p.outputs()).unwrap();
        let gstar = gstar_embedding(&p, &e).unwrap();
        let c = check_comparison(&p, &l, &gstar).unwrap();
        assert!(c.lhs.abs() <= 1e-12 && c.rhs.abs() <= 1e-6 && c.holds);
        let tiny = TabularG {
            values: gstar.values.iter().map(|r| r.iter().map(|v| v + 1e-9).collect()).collect(),
        };
        let c = check_comparison(&p, &l, &tiny).unwrap();
        assert!(c.holds);
    }

    #[test]
    fn rank_loss_on_three_items_is_fisher_consistent() {
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        let rankings: Vec<Output> = all_rankings(3).into_iter().map(Output::Ranking).collect();
        assert_eq!(rankings.len(), 6);
        let p = random_problem(&mut rng, Some(rankings));
        let r = check_fisher(&p, &LossFunction::RankLoss { normalize: false }).unwrap();
        assert!(r.gap.abs() <= 1e-10);
    }

    #[test]
    fn slack_rule() {
        assert!(nonincreasing_with_slack(&[3.0, 2.0, 2.0, 1.0], 0.1).0);
        assert!(nonincreasing_with_slack(&[3.0, 3.2, 2.0], 0.1).0);
        assert!(!nonincreasing_with_slack(&[3.0, 3.5, 2.0], 0.1).0);
        assert!(!nonincreasing_with_slack(&[3.0, 3.1, 2.0, 2.1], 0.1).0);
        assert!(!nonincreasing_with_slack(&[0.0, 0.1], 0.1).0);
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
    }
}
