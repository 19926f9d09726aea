//! Differential entropy, entropy power, information content, and relative
//! entropy estimation. The numerical heart shared by every inequality check.

mod convo;
mod kdtree;
mod knn;

pub use convo::{
    convolution_entropy, estimate_convolution_density, sum_entropy, sum_samples,
    DensityPointEstimate, SumEntropyOpts,
};
pub use kdtree::KdTree;
pub use knn::knn_entropy;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::convolution::Model;
use crate::error::{LabError, Result};
use crate::geometry::ConvexBody;
use crate::linalg;
use crate::rng::{child_streams, pairwise_sum, par_chunk_map, LabRng};
use crate::zoo::DensityModel;

const LN_2PIE: f64 = 2.8378770664093453;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Analytic,
    PluginMc,
    Knn,
    ConvolutionMc,
}

/// An entropy value in nats with statistical error accounting.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EntropyEstimate {
    pub value: f64,
    pub std_error: f64,
    pub method: Method,
    pub sample_size: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bias_note: Option<String>,
}

impl EntropyEstimate {
    pub fn analytic(value: f64) -> Self {
        EntropyEstimate {
            value,
            std_error: 0.0,
            method: Method::Analytic,
            sample_size: 0,
            bias_note: None,
        }
    }

    pub fn combined_se(&self, other: &EntropyEstimate) -> f64 {
        (self.std_error * self.std_error + other.std_error * other.std_error).sqrt()
    }

    pub fn with_note(mut self, note: impl Into<String>) -> Self {
        self.bias_note = Some(note.into());
        self
    }
}

/// Information content h̃(x) = −log f(x); +∞ outside the support.
pub fn information_content(model: &DensityModel, x: &[f64]) -> f64 {
    -model.log_density(x)
}

/// Plug-in estimator: the mean of −log f(Xᵢ) over m iid draws. Unbiased for
/// h(X); standard error is the sample standard deviation over √m.
pub fn plugin_entropy(model: &DensityModel, rng: &mut LabRng, m: usize) -> Result<EntropyEstimate> {
    if m < 2 {
        return Err(LabError::invalid("plugin entropy needs at least 2 samples"));
    }
    let streams = child_streams(rng);
    let chunks: Vec<Result<(f64, f64)>> = par_chunk_map(&streams, 0, m, |chunk_rng, len| {
        let mut sum = 0.0;
        let mut sumsq = 0.0;
        let mut x = vec![0.0; model.dim()];
        for _ in 0..len {
            model.sample_into(chunk_rng, &mut x);
            let h = information_content(model, &x);
            if !h.is_finite() {
                return Err(LabError::InternalInconsistency(format!(
                    "sampler produced a zero-density point for {}",
                    model.name()
                )));
            }
            sum += h;
            sumsq += h * h;
        }
        Ok((sum, sumsq))
    });
    let mut sums = Vec::with_capacity(chunks.len());
    let mut sumsqs = Vec::with_capacity(chunks.len());
    for c in chunks {
        let (s, sq) = c?;
        sums.push(s);
        sumsqs.push(sq);
    }
    let total = pairwise_sum(&sums);
    let total_sq = pairwise_sum(&sumsqs);
    let mean = total / m as f64;
    let var = ((total_sq - m as f64 * mean * mean) / (m as f64 - 1.0)).max(0.0);
    Ok(EntropyEstimate {
        value: mean,
        std_error: (var / m as f64).sqrt(),
        method: Method::PluginMc,
        sample_size: m,
        bias_note: None,
    })
}

/// Entropy power N = e^{2h/n}.
pub fn entropy_power(h: f64, n: usize) -> f64 {
    (2.0 * h / n as f64).exp()
}

/// Delta-method standard error of the entropy power.
pub fn entropy_power_se(power: f64, h_se: f64, n: usize) -> f64 {
    power * 2.0 * h_se / n as f64
}

/// Entropy of the moment-matched Gaussian, ½ log((2πe)^n det Σ).
pub fn gaussian_entropy_for_cov(cov: &DMatrix<f64>) -> Result<f64> {
    let n = cov.nrows();
    Ok(0.5 * n as f64 * LN_2PIE + 0.5 * linalg::log_det_spd(cov)?)
}

/// D(f) = h(g) − ĥ(f) against the Gaussian g with the model's mean and
/// covariance. Nonnegative up to statistical error.
pub fn relative_entropy_to_gaussian(
    model: &DensityModel,
    rng: &mut LabRng,
    m: usize,
) -> Result<EntropyEstimate> {
    let n = model.dim();
    let mut note: Option<String> = None;
    let cov = match model.covariance() {
        Some(c) => c.clone(),
        None => {
            let m_cov = (10 * n * n).max(1_000);
            let samples: Vec<Vec<f64>> = (0..m_cov).map(|_| model.sample(rng)).collect();
            let (_, c) = linalg::mean_cov_from_samples(&samples, 0.0);
            note = Some(format!("covariance estimated from {m_cov} samples"));
            c
        }
    };
    let h_g = match gaussian_entropy_for_cov(&cov) {
        Ok(v) => v,
        Err(_) => {
            let mut c = cov.clone();
            let ridge = 1e-9 * (c.trace() / n as f64).max(1.0);
            for i in 0..n {
                c[(i, i)] += ridge;
            }
            note = Some(match note {
                Some(s) => format!("{s}; covariance regularized"),
                None => "covariance regularized".into(),
            });
            gaussian_entropy_for_cov(&c)?
        }
    };
    let h_f = plugin_entropy(model, rng, m)?;
    let mut est = EntropyEstimate {
        value: h_g - h_f.value,
        std_error: h_f.std_error,
        method: Method::PluginMc,
        sample_size: m,
        bias_note: note,
    };
    if est.bias_note.is_none() {
        est.bias_note = Some("difference h(g) - plugin ĥ(f)".into());
    }
    Ok(est)
}

/// D(f‖U_A) = log|A| − h(X) for a model supported in the body A.
pub fn relative_entropy_to_uniform(
    model: &Model,
    body: &ConvexBody,
    rng: &mut LabRng,
    m: usize,
) -> Result<EntropyEstimate> {
    if body.dim() != model.dim() {
        return Err(LabError::invalid("body dimension mismatch"));
    }
    // witness check: sampled mass must sit inside A
    let witnesses = 1_000.min(m.max(100));
    for _ in 0..witnesses {
        let x = model.sample(rng);
        if !body.contains(&x) {
            return Err(LabError::invalid(format!(
                "model {} has mass outside the reference body (witness found)",
                model.name()
            )));
        }
    }
    let log_vol = body.log_volume()?;
    let h = best_entropy(model, rng, m, &SumEntropyOpts::default())?;
    Ok(EntropyEstimate {
        value: log_vol - h.value,
        std_error: h.std_error,
        method: h.method,
        sample_size: h.sample_size,
        bias_note: h.bias_note,
    })
}

/// Best available entropy estimate for a model: analytic when known,
/// plug-in for evaluable densities, routed sum estimator for convolutions.
pub fn best_entropy(
    model: &Model,
    rng: &mut LabRng,
    m: usize,
    opts: &SumEntropyOpts,
) -> Result<EntropyEstimate> {
    if let Some(h) = model.analytic_entropy() {
        return Ok(EntropyEstimate::analytic(h));
    }
    match model {
        Model::Density(d) => plugin_entropy(d, rng, m),
        Model::Convolution(c) => {
            let o = SumEntropyOpts { m_outer: m, ..*opts };
            sum_entropy(c, rng, &o)
        }
    }
}

/// Mean and covariance estimated from model samples (10·n² floor, ridged).
pub fn estimate_moments(
    model: &Model,
    rng: &mut LabRng,
    m: usize,
) -> (DVector<f64>, DMatrix<f64>) {
    let n = model.dim();
    let m_cov = m.max(10 * n * n).max(1_000);
    let samples: Vec<Vec<f64>> = (0..m_cov).map(|_| model.sample(rng)).collect();
    linalg::mean_cov_from_samples(&samples, 1e-9)
}
