//! Input kernels, Gram matrices and the shifted Cholesky solve behind the
//! surrogate weights.
//!
//! The Gaussian kernel is parameterized as `exp(-||x - x'||^2 / sigma)`:
//! `sigma` divides the squared distance directly, with no factor of two and
//! no square. Other libraries often use `exp(-||x - x'||^2 / (2 s^2))`; the
//! two agree when `sigma = 2 s^2`.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Absolute jitter steps, scaled by the largest diagonal entry, tried in
/// order when the plain factorization breaks down.
pub const JITTER_LADDER: [f64; 3] = [1e-12, 1e-10, 1e-8];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum KernelSpec {
    /// `exp(-||x - x'||^2 / sigma)`.
    Gaussian { sigma: f64 },
    /// `<x, x'>`.
    Linear,
    /// A fixed kernel table. Inputs are one-element vectors holding a row index.
    Precomputed { matrix: Arc<SymMatrix> },
}

impl KernelSpec {
    pub fn gaussian(sigma: f64) -> Result<Self> {
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "gaussian sigma must be positive and finite, got {sigma}"
            )));
        }
        Ok(KernelSpec::Gaussian { sigma })
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            KernelSpec::Gaussian { sigma } => Self::gaussian(*sigma).map(|_| ()),
            KernelSpec::Linear => Ok(()),
            KernelSpec::Precomputed { matrix } => matrix.check_finite(),
        }
    }

    /// Evaluates `k(x, x')`.
    pub fn eval(&self, x: &[f64], other: &[f64]) -> Result<f64> {
        if x.len() != other.len() {
            return Err(Error::DimensionMismatch {
                expected: x.len(),
                found: other.len(),
            });
        }
        if !x.iter().chain(other).all(|v| v.is_finite()) {
            return Err(Error::NonFinite("kernel input"));
        }
        Ok(match self {
            KernelSpec::Gaussian { sigma } => {
                // (a - b)^2 == (b - a)^2 bit for bit, so this is exactly symmetric.
                let sq: f64 = x.iter().zip(other).map(|(a, b)| (a - b) * (a - b)).sum();
                (-sq / sigma).exp()
            }
            KernelSpec::Linear => x.iter().zip(other).map(|(a, b)| a * b).sum(),
            KernelSpec::Precomputed { matrix } => {
                let i = precomputed_index(x, matrix.order())?;
                let j = precomputed_index(other, matrix.order())?;
                matrix.get(i, j)
            }
        })
    }
}

fn precomputed_index(x: &[f64], order: usize) -> Result<usize> {
    match x {
        [v] if *v >= 0.0 && v.fract() == 0.0 && (*v as usize) < order => Ok(*v as usize),
        _ => Err(Error::InvalidParameter(format!(
            "precomputed kernel expects a single row index below {order}, got {x:?}"
        ))),
    }
}

/// Dense symmetric matrix in row-major storage.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SymMatrix {
    order: usize,
    data: Vec<f64>,
}

impl SymMatrix {
    /// Builds a matrix by evaluating `f` on the upper triangle and mirroring.
    pub fn from_upper(order: usize, mut f: impl FnMut(usize, usize) -> Result<f64>) -> Result<Self> {
        let mut data = vec![0.0; order * order];
        for i in 0..order {
            for j in i..order {
                let v = f(i, j)?;
                data[i * order + j] = v;
                data[j * order + i] = v;
            }
        }
        Ok(SymMatrix { order, data })
    }

    /// Wraps row-major data, rejecting anything that is not exactly symmetric.
    pub fn from_row_major(order: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != order * order {
            return Err(Error::DimensionMismatch {
                expected: order * order,
                found: data.len(),
            });
        }
        for i in 0..order {
            for j in 0..i {
                if data[i * order + j] != data[j * order + i] {
                    return Err(Error::InvalidParameter(format!(
                        "matrix is not symmetric at ({i}, {j})"
                    )));
                }
            }
        }
        let m = SymMatrix { order, data };
        m.check_finite()?;
        Ok(m)
    }

    pub fn identity(order: usize) -> Self {
        let mut data = vec![0.0; order * order];
        for i in 0..order {
            data[i * order + i] = 1.0;
        }
        SymMatrix { order, data }
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.order + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.order..(i + 1) * self.order]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn max_diagonal(&self) -> f64 {
        (0..self.order).map(|i| self.get(i, i)).fold(f64::NEG_INFINITY, f64::max)
    }

    /// `A * v`.
    pub fn mul_vec(&self, v: &[f64]) -> Vec<f64> {
        (0..self.order)
            .map(|i| self.row(i).iter().zip(v).map(|(a, b)| a * b).sum())
            .collect()
    }

    fn check_finite(&self) -> Result<()> {
        if self.data.iter().all(|v| v.is_finite()) {
            Ok(())
        } else {
            Err(Error::NonFinite("matrix entry"))
        }
    }
}

/// `K[i][j] = k(x_i, x_j)`.
pub fn gram_matrix(kernel: &KernelSpec, inputs: &[Vec<f64>]) -> Result<SymMatrix> {
    if inputs.is_empty() {
        return Err(Error::Empty("gram matrix inputs"));
    }
    SymMatrix::from_upper(inputs.len(), |i, j| kernel.eval(&inputs[i], &inputs[j]))
}

/// `(K_x)_i = k(x, x_i)`.
pub fn cross_kernel(kernel: &KernelSpec, inputs: &[Vec<f64>], x: &[f64]) -> Result<Vec<f64>> {
    if inputs.is_empty() {
        return Err(Error::Empty("cross kernel inputs"));
    }
    inputs.iter().map(|xi| kernel.eval(x, xi)).collect()
}

/// Lower Cholesky factor of `K + shift*I + jitter*I`.
#[derive(Clone, Debug)]
pub struct SpdFactor {
    order: usize,
    lower: Vec<f64>,
    shift: f64,
    jitter: f64,
}

impl SpdFactor {
    pub fn order(&self) -> usize {
        self.order
    }

    pub fn shift(&self) -> f64 {
        self.shift
    }

    /// Absolute jitter added to the diagonal, zero when none was needed.
    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    /// Entry `(i, j)` of the lower factor.
    pub fn lower(&self, i: usize, j: usize) -> f64 {
        if j > i {
            0.0
        } else {
            self.lower[i * self.order + j]
        }
    }

    /// `L * L^T`, row-major.
    pub fn reconstruct(&self) -> Vec<f64> {
        let n = self.order;
        let mut out = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..=i {
                let s: f64 = (0..=j).map(|k| self.lower(i, k) * self.lower(j, k)).sum();
                out[i * n + j] = s;
                out[j * n + i] = s;
            }
        }
        out
    }

    /// Solves `(K + shift*I + jitter*I) x = b`.
    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        let n = self.order;
        if b.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: b.len(),
            });
        }
        let mut y = b.to_vec();
        for i in 0..n {
            let row = &self.lower[i * n..i * n + i];
            let s: f64 = row.iter().zip(&y[..i]).map(|(l, v)| l * v).sum();
            y[i] = (y[i] - s) / self.lower[i * n + i];
        }
        for i in (0..n).rev() {
            let mut s = 0.0;
            for k in i + 1..n {
                s += self.lower[k * n + i] * y[k];
            }
            y[i] = (y[i] - s) / self.lower[i * n + i];
        }
        Ok(y)
    }
}

fn cholesky(matrix: &SymMatrix, diag_add: f64) -> Option<Vec<f64>> {
    let n = matrix.order();
    let mut l = vec![0.0; n * n];
    for j in 0..n {
        let mut d = matrix.get(j, j) + diag_add;
        for k in 0..j {
            d -= l[j * n + k] * l[j * n + k];
        }
        if !(d > 0.0 && d.is_finite()) {
            return None;
        }
        let d = d.sqrt();
        l[j * n + j] = d;
        for i in j + 1..n {
            let mut s = matrix.get(i, j);
            for k in 0..j {
                s -= l[i * n + k] * l[j * n + k];
            }
            l[i * n + j] = s / d;
        }
    }
    Some(l)
}

/// Cholesky factor of `K + shift*I`, falling back to [`JITTER_LADDER`] when
/// the matrix is numerically singular.
pub fn factor_shifted(matrix: &SymMatrix, shift: f64) -> Result<SpdFactor> {
    if !(shift >= 0.0 && shift.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "diagonal shift must be non-negative, got {shift}"
        )));
    }
    let order = matrix.order();
    if order == 0 {
        return Err(Error::Empty("matrix to factor"));
    }
    matrix.check_finite()?;
    if let Some(lower) = cholesky(matrix, shift) {
        return Ok(SpdFactor { order, lower, shift, jitter: 0.0 });
    }
    let scale = match matrix.max_diagonal() + shift {
        s if s > 0.0 => s,
        _ => 1.0,
    };
    let mut jitter = 0.0;
    for step in JITTER_LADDER {
        jitter = step * scale;
        if let Some(lower) = cholesky(matrix, shift + jitter) {
            return Ok(SpdFactor { order, lower, shift, jitter });
        }
    }
    Err(Error::Singular { order, jitter })
}

/// Free-function form of [`SpdFactor::solve`].
pub fn solve_spd(factor: &SpdFactor, b: &[f64]) -> Result<Vec<f64>> {
    factor.solve(b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn gaussian_identity_and_unit_distance() {
        let k = KernelSpec::gaussian(1.0).unwrap();
        assert_eq!(k.eval(&[0.3, -2.0], &[0.3, -2.0]).unwrap(), 1.0);
        let v = k.eval(&[0.0, 0.0], &[1.0, 0.0]).unwrap();
        assert_abs_diff_eq!(v, (-1.0f64).exp(), epsilon = 1e-15);
        assert_abs_diff_eq!(v, 0.367879, epsilon = 1e-6);
    }

    #[test]
    fn linear_is_dot_product() {
        assert_eq!(KernelSpec::Linear.eval(&[1.0, 2.0], &[3.0, 4.0]).unwrap(), 11.0);
    }

    #[test]
    fn eval_rejects_bad_input() {
        let k = KernelSpec::Linear;
        assert!(matches!(k.eval(&[1.0], &[1.0, 2.0]), Err(Error::DimensionMismatch { .. })));
        assert!(matches!(k.eval(&[f64::NAN], &[1.0]), Err(Error::NonFinite(_))));
        assert!(KernelSpec::gaussian(0.0).is_err());
        assert!(KernelSpec::gaussian(-1.0).is_err());
    }

    #[test]
    fn precomputed_kernel_indexes_table() {
        let m = SymMatrix::from_row_major(2, vec![2.0, 0.5, 0.5, 3.0]).unwrap();
        let k = KernelSpec::Precomputed { matrix: Arc::new(m) };
        assert_eq!(k.eval(&[0.0], &[1.0]).unwrap(), 0.5);
        assert_eq!(k.eval(&[1.0], &[1.0]).unwrap(), 3.0);
        assert!(k.eval(&[2.0], &[1.0]).is_err());
        assert!(k.eval(&[0.5], &[1.0]).is_err());
    }

    #[test]
    fn gram_small_cases() {
        let g = gram_matrix(&KernelSpec::gaussian(1.0).unwrap(), &[vec![0.7]]).unwrap();
        assert_eq!(g.as_slice(), &[1.0]);
        let g = gram_matrix(&KernelSpec::Linear, &[vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        assert_eq!(g.as_slice(), &[1.0, 0.0, 0.0, 1.0]);
        assert!(matches!(gram_matrix(&KernelSpec::Linear, &[]), Err(Error::Empty(_))));
    }

    #[test]
    fn gram_matches_pairwise_recomputation() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let pts: Vec<Vec<f64>> = (0..3)
            .map(|_| (0..2).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect();
        let g = gram_matrix(&KernelSpec::gaussian(2.0).unwrap(), &pts).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let d2 = (pts[i][0] - pts[j][0]).powi(2) + (pts[i][1] - pts[j][1]).powi(2);
                assert_abs_diff_eq!(g.get(i, j), (-d2 / 2.0).exp(), epsilon = 1e-15);
            }
            assert_eq!(g.get(i, i), 1.0);
        }
    }

    #[test]
    fn cross_kernel_cases() {
        let xs = vec![vec![0.2, 0.1], vec![-0.4, 0.9]];
        let k = KernelSpec::gaussian(0.5).unwrap();
        let kx = cross_kernel(&k, &xs, &xs[0]).unwrap();
        assert_eq!(kx[0], 1.0);
        let kx = cross_kernel(&KernelSpec::Linear, &[vec![1.0, 0.0], vec![0.0, 2.0]], &[0.0, 0.0]).unwrap();
        assert_eq!(kx, vec![0.0, 0.0]);
        let q = [0.3, -0.3];
        let kx = cross_kernel(&k, &xs, &q).unwrap();
        for (i, xi) in xs.iter().enumerate() {
            let d2: f64 = xi.iter().zip(&q).map(|(a, b)| (a - b).powi(2)).sum();
            assert_abs_diff_eq!(kx[i], (-d2 / 0.5).exp(), epsilon = 1e-15);
        }
    }

    #[test]
    fn factor_identity() {
        let f = factor_shifted(&SymMatrix::identity(2), 0.0).unwrap();
        assert_eq!(f.jitter(), 0.0);
        assert_eq!(f.reconstruct(), vec![1.0, 0.0, 0.0, 1.0]);
        assert_eq!(f.lower(1, 0), 0.0);
    }

    #[test]
    fn factor_hand_cholesky() {
        let k = SymMatrix::from_row_major(2, vec![1.0, 1.0, 1.0, 1.0]).unwrap();
        let f = factor_shifted(&k, 1.0).unwrap();
        assert_abs_diff_eq!(f.lower(0, 0), 2f64.sqrt(), epsilon = 1e-15);
        assert_abs_diff_eq!(f.lower(1, 0), 1.0 / 2f64.sqrt(), epsilon = 1e-15);
        assert_abs_diff_eq!(f.lower(1, 1), 1.5f64.sqrt(), epsilon = 1e-15);
    }

    #[test]
    fn rank_deficient_engages_jitter() {
        let k = SymMatrix::from_row_major(3, vec![1.0; 9]).unwrap();
        let f = factor_shifted(&k, 0.0).unwrap();
        assert!(f.jitter() > 0.0);
        assert!(f.reconstruct().iter().all(|v| v.is_finite()));
    }

    #[test]
    fn zero_matrix_is_singular() {
        let k = SymMatrix::from_row_major(2, vec![0.0; 4]).unwrap();
        // scale falls back to 1, so 1e-12 jitter already succeeds
        assert_eq!(factor_shifted(&k, 0.0).unwrap().jitter(), 1e-12);
        let k = SymMatrix::from_row_major(2, vec![-1.0, 0.0, 0.0, -1.0]).unwrap();
        assert!(matches!(factor_shifted(&k, 0.0), Err(Error::Singular { .. })));
        assert!(factor_shifted(&k, -1.0).is_err());
    }

    #[test]
    fn solve_small_systems() {
        let f = factor_shifted(&SymMatrix::identity(3), 0.0).unwrap();
        assert_eq!(f.solve(&[1.5, -2.0, 7.0]).unwrap(), vec![1.5, -2.0, 7.0]);
        let f = factor_shifted(&SymMatrix::identity(2), 1.0).unwrap();
        let x = solve_spd(&f, &[4.0, 6.0]).unwrap();
        assert_abs_diff_eq!(x[0], 2.0, epsilon = 1e-15);
        assert_abs_diff_eq!(x[1], 3.0, epsilon = 1e-15);
        assert!(matches!(f.solve(&[1.0]), Err(Error::DimensionMismatch { .. })));
    }
}
