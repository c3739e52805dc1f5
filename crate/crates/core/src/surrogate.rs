//! The learning step: one kernel ridge regression whose solution is read
//! out as per-query weights `alpha(x) = (K + n*lambda*I)^-1 K_x`.
//!
//! `lambda` enters unnormalized, multiplied by the sample count: the system
//! matrix is `K + n*lambda*I`, not `K + lambda*I`.

use serde::{Deserialize, Serialize};

use crate::decoders::DecoderSpec;
use crate::error::{Error, Result};
use crate::kernels::{cross_kernel, factor_shifted, gram_matrix, KernelSpec, SpdFactor, SymMatrix};
use crate::losses::{FiniteLossEmbedding, LossFunction, Output};

/// A fitted model. The factor of `K + n*lambda*I` is computed once and
/// reused for every query.
#[derive(Clone, Debug)]
pub struct TrainedSurrogate {
    inputs: Vec<Vec<f64>>,
    outputs: Vec<Output>,
    kernel: KernelSpec,
    lambda: f64,
    factor: SpdFactor,
}

/// Weights of the training points for one query.
#[derive(Clone, Debug, PartialEq)]
pub struct AlphaWeights {
    pub weights: Vec<f64>,
}

impl AlphaWeights {
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn sum(&self) -> f64 {
        self.weights.iter().sum()
    }
}

impl TrainedSurrogate {
    pub fn fit(inputs: Vec<Vec<f64>>, outputs: Vec<Output>, kernel: KernelSpec, lambda: f64) -> Result<Self> {
        if inputs.is_empty() {
            return Err(Error::Empty("training set"));
        }
        if inputs.len() != outputs.len() {
            return Err(Error::DimensionMismatch { expected: inputs.len(), found: outputs.len() });
        }
        let gram = gram_matrix(&kernel, &inputs)?;
        Self::fit_with_gram(inputs, outputs, kernel, lambda, &gram)
    }

    /// Like [`fit`](Self::fit) with the Gram matrix of `inputs` supplied by
    /// the caller, so several `lambda` values can share it.
    pub fn fit_with_gram(
        inputs: Vec<Vec<f64>>,
        outputs: Vec<Output>,
        kernel: KernelSpec,
        lambda: f64,
        gram: &SymMatrix,
    ) -> Result<Self> {
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(Error::InvalidParameter(format!("lambda must be positive, got {lambda}")));
        }
        kernel.validate()?;
        let n = inputs.len();
        if n == 0 {
            return Err(Error::Empty("training set"));
        }
        if outputs.len() != n {
            return Err(Error::DimensionMismatch { expected: n, found: outputs.len() });
        }
        if gram.order() != n {
            return Err(Error::DimensionMismatch { expected: n, found: gram.order() });
        }
        let dim = inputs[0].len();
        if let Some(bad) = inputs.iter().find(|x| x.len() != dim) {
            return Err(Error::DimensionMismatch { expected: dim, found: bad.len() });
        }
        let factor = factor_shifted(gram, n as f64 * lambda)?;
        Ok(TrainedSurrogate { inputs, outputs, kernel, lambda, factor })
    }

    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    pub fn inputs(&self) -> &[Vec<f64>] {
        &self.inputs
    }

    pub fn outputs(&self) -> &[Output] {
        &self.outputs
    }

    pub fn kernel(&self) -> &KernelSpec {
        &self.kernel
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn factor(&self) -> &SpdFactor {
        &self.factor
    }

    pub fn input_dim(&self) -> usize {
        self.inputs[0].len()
    }

    /// `alpha(x)`.
    pub fn alpha_weights(&self, x: &[f64]) -> Result<AlphaWeights> {
        if x.len() != self.input_dim() {
            return Err(Error::DimensionMismatch { expected: self.input_dim(), found: x.len() });
        }
        let kx = cross_kernel(&self.kernel, &self.inputs, x)?;
        self.weights_for(&kx)
    }

    /// Solves the ridge system for an arbitrary right-hand side in place of `K_x`.
    pub fn weights_for(&self, kx: &[f64]) -> Result<AlphaWeights> {
        Ok(AlphaWeights { weights: self.factor.solve(kx)? })
    }

    /// `g_hat(x) = sum_i alpha_i(x) psi(y_i)` in the canonical coordinates
    /// of a finite embedding.
    pub fn explicit_g_hat(&self, embedding: &FiniteLossEmbedding, x: &[f64]) -> Result<Vec<f64>> {
        let alpha = self.alpha_weights(x)?;
        self.g_hat_from_weights(embedding, &alpha)
    }

    pub fn g_hat_from_weights(&self, embedding: &FiniteLossEmbedding, alpha: &AlphaWeights) -> Result<Vec<f64>> {
        let mut g = vec![0.0; embedding.size()];
        for (a, y) in alpha.weights.iter().zip(&self.outputs) {
            g[embedding.index_of(y)?] += a;
        }
        Ok(g)
    }

    /// `(1/n) sum_i ||g_hat(x_i) - psi(y_i)||^2`.
    pub fn surrogate_empirical_risk(&self, embedding: &FiniteLossEmbedding) -> Result<f64> {
        let mut total = 0.0;
        for (x, y) in self.inputs.iter().zip(&self.outputs) {
            let mut g = self.explicit_g_hat(embedding, x)?;
            g[embedding.index_of(y)?] -= 1.0;
            total += g.iter().map(|v| v * v).sum::<f64>();
        }
        Ok(total / self.len() as f64)
    }

    pub fn to_blob(&self) -> ModelBlob {
        ModelBlob {
            format: MODEL_FORMAT.to_string(),
            version: MODEL_VERSION,
            inputs: self.inputs.clone(),
            outputs: self.outputs.clone(),
            kernel: self.kernel.clone(),
            lambda: self.lambda,
            loss: None,
            decoder: None,
        }
    }
}

pub const MODEL_FORMAT: &str = "surrloss-model";
pub const MODEL_VERSION: u32 = 1;

/// Portable JSON form of a model. The factorization is not stored; it is
/// recomputed on load.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelBlob {
    pub format: String,
    pub version: u32,
    pub inputs: Vec<Vec<f64>>,
    pub outputs: Vec<Output>,
    pub kernel: KernelSpec,
    pub lambda: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub loss: Option<LossFunction>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub decoder: Option<DecoderSpec>,
}

impl ModelBlob {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let blob: ModelBlob = serde_json::from_str(s)?;
        if blob.format != MODEL_FORMAT {
            return Err(Error::InvalidParameter(format!("not a model blob: format {:?}", blob.format)));
        }
        if blob.version != MODEL_VERSION {
            return Err(Error::InvalidParameter(format!("unsupported model version {}", blob.version)));
        }
        Ok(blob)
    }

    pub fn into_model(self) -> Result<TrainedSurrogate> {
        TrainedSurrogate::fit(self.inputs, self.outputs, self.kernel, self.lambda)
    }
}
