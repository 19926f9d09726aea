//! Sums of independent draws. A convolution never fabricates a closed-form
//! density; pointwise density values come only from the Monte Carlo
//! estimators in the entropy engine. Metadata (κ-algebra, moments, the
//! all-Gaussian closed form) is tracked exactly.

use nalgebra::{DMatrix, DVector};

use crate::error::{LabError, Result};
use crate::geometry::{minkowski_sum, ConvexBody};
use crate::rng::LabRng;
use crate::zoo::DensityModel;

/// Borell κ-algebra for convolutions: 1/κ = 1/κ′ + 1/κ″, defined whenever
/// κ′ + κ″ > 0 on [−1, 1]².
pub fn kappa_convolution(k1: f64, k2: f64) -> Result<f64> {
    if !((-1.0..=1.0).contains(&k1) && (-1.0..=1.0).contains(&k2)) {
        return Err(LabError::invalid(format!(
            "kappa parameters must lie in [-1, 1], got {k1}, {k2}"
        )));
    }
    if k1 + k2 <= 0.0 {
        return Err(LabError::invalid(format!(
            "kappa convolution requires k1 + k2 > 0, got {k1} + {k2}"
        )));
    }
    if k1 == 0.0 || k2 == 0.0 {
        // log-concavity is preserved under convolution
        return Ok(0.0);
    }
    Ok(1.0 / (1.0 / k1 + 1.0 / k2))
}

fn fold_kappa(a: Option<f64>, b: Option<f64>) -> Option<f64> {
    match (a, b) {
        (Some(x), Some(y)) if x > 0.0 && y > 0.0 => kappa_convolution(x, y).ok(),
        (Some(x), Some(y)) if x >= 0.0 && y >= 0.0 => Some(0.0),
        _ => None,
    }
}

/// Sum of two or more independent models of equal dimension.
#[derive(Clone, Debug)]
pub struct ConvolutionModel {
    name: String,
    dim: usize,
    terms: Vec<DensityModel>,
    kappa: Option<f64>,
    analytic_entropy: Option<f64>,
    mean: Option<DVector<f64>>,
    covariance: Option<DMatrix<f64>>,
    support: Option<ConvexBody>,
}

/// Convolution of two independent models.
pub fn convolve(left: DensityModel, right: DensityModel) -> Result<ConvolutionModel> {
    if left.dim() != right.dim() {
        return Err(LabError::invalid(format!(
            "convolution dimension mismatch: {} vs {}",
            left.dim(),
            right.dim()
        )));
    }
    let kappa = fold_kappa(left.kappa(), right.kappa());
    let mut conv = ConvolutionModel {
        name: format!("{}*{}", left.name(), right.name()),
        dim: left.dim(),
        kappa,
        analytic_entropy: None,
        mean: None,
        covariance: None,
        support: None,
        terms: vec![left, right],
    };
    conv.refresh_metadata();
    Ok(conv)
}

/// Convolve every entry of a list, left to right.
pub fn convolve_all(models: Vec<DensityModel>) -> Result<ConvolutionModel> {
    let mut it = models.into_iter();
    let first = it
        .next()
        .ok_or_else(|| LabError::invalid("convolution needs at least two terms"))?;
    let second = it
        .next()
        .ok_or_else(|| LabError::invalid("convolution needs at least two terms"))?;
    let mut conv = convolve(first, second)?;
    for m in it {
        conv = conv.convolve_with(m)?;
    }
    Ok(conv)
}

impl ConvolutionModel {
    /// Add one more independent term (nested convolution).
    pub fn convolve_with(mut self, right: DensityModel) -> Result<ConvolutionModel> {
        if right.dim() != self.dim {
            return Err(LabError::invalid("convolution dimension mismatch"));
        }
        self.name = format!("{}*{}", self.name, right.name());
        self.kappa = fold_kappa(self.kappa, right.kappa());
        self.terms.push(right);
        self.refresh_metadata();
        Ok(self)
    }

    fn refresh_metadata(&mut self) {
        self.mean = self
            .terms
            .iter()
            .map(|t| t.mean().cloned())
            .try_fold(DVector::zeros(self.dim), |acc, m| m.map(|m| acc + m));
        self.covariance = self
            .terms
            .iter()
            .map(|t| t.covariance().cloned())
            .try_fold(DMatrix::zeros(self.dim, self.dim), |acc, c| {
                c.map(|c| acc + c)
            });
        // all-Gaussian sums have a closed-form entropy
        self.analytic_entropy = if self.terms.iter().all(|t| t.as_gaussian().is_some()) {
            self.covariance
                .as_ref()
                .and_then(|cov| crate::linalg::log_det_spd(cov).ok())
                .map(|log_det| {
                    0.5 * self.dim as f64 * (1.0 + (2.0 * std::f64::consts::PI).ln())
                        + 0.5 * log_det
                })
        } else {
            None
        };
        self.support = self
            .terms
            .iter()
            .map(|t| t.support().cloned())
            .try_fold(None::<ConvexBody>, |acc, s| match (acc, s) {
                (None, Some(s)) => Some(Some(s)),
                (Some(acc), Some(s)) => minkowski_sum(&acc, &s).ok().map(Some),
                _ => None,
            })
            .flatten();
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn terms(&self) -> &[DensityModel] {
        &self.terms
    }

    pub fn kappa(&self) -> Option<f64> {
        self.kappa
    }

    pub fn analytic_entropy(&self) -> Option<f64> {
        self.analytic_entropy
    }

    pub fn mean(&self) -> Option<&DVector<f64>> {
        self.mean.as_ref()
    }

    pub fn covariance(&self) -> Option<&DMatrix<f64>> {
        self.covariance.as_ref()
    }

    /// Minkowski sum of the term supports, when every term has one and the
    /// sum has a closed form.
    pub fn support(&self) -> Option<&ConvexBody> {
        self.support.as_ref()
    }

    pub fn is_log_concave(&self) -> bool {
        matches!(self.kappa, Some(k) if k >= 0.0)
    }

    pub fn sample(&self, rng: &mut LabRng) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        self.sample_into(rng, &mut out);
        out
    }

    pub fn sample_into(&self, rng: &mut LabRng, out: &mut [f64]) {
        out.fill(0.0);
        let mut buf = vec![0.0; self.dim];
        for t in &self.terms {
            t.sample_into(rng, &mut buf);
            for i in 0..self.dim {
                out[i] += buf[i];
            }
        }
    }
}

/// A zoo density or a convolution of zoo densities.
#[derive(Clone, Debug)]
pub enum Model {
    Density(DensityModel),
    Convolution(ConvolutionModel),
}

impl Model {
    pub fn name(&self) -> &str {
        match self {
            Model::Density(d) => d.name(),
            Model::Convolution(c) => c.name(),
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Model::Density(d) => d.dim(),
            Model::Convolution(c) => c.dim(),
        }
    }

    pub fn analytic_entropy(&self) -> Option<f64> {
        match self {
            Model::Density(d) => d.analytic_entropy(),
            Model::Convolution(c) => c.analytic_entropy(),
        }
    }

    pub fn kappa(&self) -> Option<f64> {
        match self {
            Model::Density(d) => d.kappa(),
            Model::Convolution(c) => c.kappa(),
        }
    }

    pub fn is_log_concave(&self) -> bool {
        matches!(self.kappa(), Some(k) if k >= 0.0)
    }

    pub fn mean(&self) -> Option<&DVector<f64>> {
        match self {
            Model::Density(d) => d.mean(),
            Model::Convolution(c) => c.mean(),
        }
    }

    pub fn covariance(&self) -> Option<&DMatrix<f64>> {
        match self {
            Model::Density(d) => d.covariance(),
            Model::Convolution(c) => c.covariance(),
        }
    }

    pub fn support(&self) -> Option<&ConvexBody> {
        match self {
            Model::Density(d) => d.support(),
            Model::Convolution(c) => c.support(),
        }
    }

    pub fn sample(&self, rng: &mut LabRng) -> Vec<f64> {
        match self {
            Model::Density(d) => d.sample(rng),
            Model::Convolution(c) => c.sample(rng),
        }
    }

    pub fn sample_into(&self, rng: &mut LabRng, out: &mut [f64]) {
        match self {
            Model::Density(d) => d.sample_into(rng, out),
            Model::Convolution(c) => c.sample_into(rng, out),
        }
    }

    pub fn as_density(&self) -> Option<&DensityModel> {
        match self {
            Model::Density(d) => Some(d),
            Model::Convolution(_) => None,
        }
    }

    pub fn as_convolution(&self) -> Option<&ConvolutionModel> {
        match self {
            Model::Convolution(c) => Some(c),
            Model::Density(_) => None,
        }
    }
}

impl From<DensityModel> for Model {
    fn from(d: DensityModel) -> Self {
        Model::Density(d)
    }
}

impl From<ConvolutionModel> for Model {
    fn from(c: ConvolutionModel) -> Self {
        Model::Convolution(c)
    }
}
