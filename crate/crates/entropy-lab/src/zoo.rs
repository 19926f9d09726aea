//! The density zoo: log-concave families with exact entropy and max-density
//! oracles, plus products, affine images, and the structural metadata
//! (moments, concavity parameter κ, support) the checkers rely on.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use statrs::distribution::ContinuousCDF;
use statrs::function::gamma::{digamma, ln_gamma};

use crate::error::{LabError, Result};
use crate::geometry::ConvexBody;
use crate::linalg;
use crate::positioning::AffineMap;
use crate::rng::LabRng;

const LN_2PI: f64 = 1.8378770664093453;

#[derive(Clone, Debug)]
enum Kind {
    Gaussian {
        mu: DVector<f64>,
        chol: DMatrix<f64>,
        log_norm: f64,
    },
    Exponential {
        rate: f64,
    },
    Laplace {
        scale: f64,
    },
    Gamma {
        shape: f64,
        rate: f64,
        log_norm: f64,
    },
    UniformBody {
        body: ConvexBody,
        log_vol: f64,
    },
    Product {
        factors: Vec<DensityModel>,
    },
    Affine {
        inner: Box<DensityModel>,
        map: AffineMap,
        inv: AffineMap,
    },
}

/// A sampleable density with evaluable log-density and optional analytic
/// metadata. Immutable after construction; samplers take an explicit RNG.
#[derive(Clone, Debug)]
pub struct DensityModel {
    name: String,
    dim: usize,
    kind: Kind,
    analytic_entropy: Option<f64>,
    analytic_max_density: Option<f64>,
    mean: Option<DVector<f64>>,
    covariance: Option<DMatrix<f64>>,
    kappa: Option<f64>,
    support: Option<ConvexBody>,
}

impl DensityModel {
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

    pub fn analytic_entropy(&self) -> Option<f64> {
        self.analytic_entropy
    }

    pub fn analytic_max_density(&self) -> Option<f64> {
        self.analytic_max_density
    }

    pub(crate) fn set_analytic_max_density(&mut self, v: f64) {
        self.analytic_max_density = Some(v);
    }

    pub fn mean(&self) -> Option<&DVector<f64>> {
        self.mean.as_ref()
    }

    pub fn covariance(&self) -> Option<&DMatrix<f64>> {
        self.covariance.as_ref()
    }

    pub fn kappa(&self) -> Option<f64> {
        self.kappa
    }

    pub fn support(&self) -> Option<&ConvexBody> {
        self.support.as_ref()
    }

    pub fn is_log_concave(&self) -> bool {
        matches!(self.kappa, Some(k) if k >= 0.0)
    }

    /// Mean and covariance when the model is exactly Gaussian (including
    /// folded affine images of Gaussians).
    pub fn as_gaussian(&self) -> Option<(&DVector<f64>, &DMatrix<f64>)> {
        match &self.kind {
            Kind::Gaussian { mu, .. } => Some((mu, self.covariance.as_ref()?)),
            _ => None,
        }
    }

    /// The body, when the model is exactly uniform on one.
    pub fn as_uniform_body(&self) -> Option<&ConvexBody> {
        match &self.kind {
            Kind::UniformBody { body, .. } => Some(body),
            _ => None,
        }
    }

    /// Density strictly positive on all of R^n.
    pub fn positive_everywhere(&self) -> bool {
        match &self.kind {
            Kind::Gaussian { .. } | Kind::Laplace { .. } => true,
            Kind::Exponential { .. } | Kind::Gamma { .. } | Kind::UniformBody { .. } => false,
            Kind::Product { factors } => factors.iter().all(|f| f.positive_everywhere()),
            Kind::Affine { inner, .. } => inner.positive_everywhere(),
        }
    }

    pub fn log_density(&self, x: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), self.dim);
        match &self.kind {
            Kind::Gaussian { mu, chol, log_norm } => {
                let d = DVector::from_iterator(
                    x.len(),
                    x.iter().zip(mu.iter()).map(|(a, b)| a - b),
                );
                let y = chol
                    .solve_lower_triangular(&d)
                    .expect("cholesky factor is nonsingular");
                -log_norm - 0.5 * y.norm_squared()
            }
            Kind::Exponential { rate } => {
                let v = x[0];
                if v < 0.0 {
                    f64::NEG_INFINITY
                } else {
                    rate.ln() - rate * v
                }
            }
            Kind::Laplace { scale } => -(2.0 * scale).ln() - x[0].abs() / scale,
            Kind::Gamma { shape, rate, log_norm } => {
                let v = x[0];
                if v < 0.0 || (v == 0.0 && *shape > 1.0) {
                    f64::NEG_INFINITY
                } else if *shape == 1.0 {
                    rate.ln() - rate * v
                } else {
                    (shape - 1.0) * v.ln() - rate * v - log_norm
                }
            }
            Kind::UniformBody { body, log_vol } => {
                if body.contains(x) {
                    -log_vol
                } else {
                    f64::NEG_INFINITY
                }
            }
            Kind::Product { factors } => {
                let mut acc = 0.0;
                for (i, f) in factors.iter().enumerate() {
                    let l = f.log_density(&x[i..=i]);
                    if l == f64::NEG_INFINITY {
                        return f64::NEG_INFINITY;
                    }
                    acc += l;
                }
                acc
            }
            Kind::Affine { inner, map, inv } => {
                let back = inv.apply(x);
                let l = inner.log_density(&back);
                if l == f64::NEG_INFINITY {
                    l
                } else {
                    l - map.log_det()
                }
            }
        }
    }

    pub fn sample(&self, rng: &mut LabRng) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        self.sample_into(rng, &mut out);
        out
    }

    pub fn sample_into(&self, rng: &mut LabRng, out: &mut [f64]) {
        debug_assert_eq!(out.len(), self.dim);
        match &self.kind {
            Kind::Gaussian { mu, chol, .. } => {
                let z = DVector::from_iterator(
                    self.dim,
                    (0..self.dim).map(|_| -> f64 { StandardNormal.sample(rng) }),
                );
                let y = chol * z + mu;
                out.copy_from_slice(y.as_slice());
            }
            Kind::Exponential { rate } => {
                out[0] = -(1.0 - rng.random::<f64>()).ln() / rate;
            }
            Kind::Laplace { scale } => {
                let u: f64 = rng.random();
                out[0] = if u < 0.5 {
                    scale * (2.0 * u).ln()
                } else {
                    -scale * (2.0 * (1.0 - u)).ln()
                };
            }
            Kind::Gamma { shape, rate, .. } => {
                let g = rand_distr::Gamma::new(*shape, 1.0 / rate).expect("validated");
                out[0] = g.sample(rng);
            }
            Kind::UniformBody { body, .. } => {
                out.copy_from_slice(&body.sample_direct(rng));
            }
            Kind::Product { factors } => {
                for (i, f) in factors.iter().enumerate() {
                    f.sample_into(rng, &mut out[i..=i]);
                }
            }
            Kind::Affine { inner, map, .. } => {
                let x = inner.sample(rng);
                out.copy_from_slice(&map.apply(&x));
            }
        }
    }

    /// Independent per-coordinate factors, when the model decomposes as a
    /// product of one-dimensional densities.
    pub fn coordinate_factors(&self) -> Option<Vec<DensityModel>> {
        if self.dim == 1 {
            return Some(vec![self.clone()]);
        }
        match &self.kind {
            Kind::Product { factors } => Some(factors.clone()),
            Kind::UniformBody { body, .. } => match body {
                ConvexBody::Box { lower, upper } => Some(
                    (0..self.dim)
                        .map(|i| uniform_interval(lower[i], upper[i]).expect("valid interval"))
                        .collect(),
                ),
                _ => None,
            },
            Kind::Gaussian { mu, .. } => {
                let cov = self.covariance.as_ref()?;
                if !linalg::is_diagonal(cov, 1e-12) {
                    return None;
                }
                Some(
                    (0..self.dim)
                        .map(|i| gaussian1(mu[i], cov[(i, i)]).expect("positive variance"))
                        .collect(),
                )
            }
            Kind::Affine { inner, map, .. } => {
                if !linalg::is_diagonal(map.linear(), 1e-14) {
                    return None;
                }
                let inner_factors = inner.coordinate_factors()?;
                let mut out = Vec::with_capacity(self.dim);
                for (i, f) in inner_factors.into_iter().enumerate() {
                    let m1 = AffineMap::new(
                        DMatrix::from_element(1, 1, map.linear()[(i, i)]),
                        DVector::from_element(1, map.shift()[i]),
                    )
                    .ok()?;
                    out.push(affine_image(&f, &m1).ok()?);
                }
                Some(out)
            }
            _ => None,
        }
    }

    /// CDF of a one-dimensional model, where a closed form exists.
    pub fn cdf1(&self, x: f64) -> Option<f64> {
        if self.dim != 1 {
            return None;
        }
        match &self.kind {
            Kind::Gaussian { mu, chol, .. } => {
                let normal = statrs::distribution::Normal::new(mu[0], chol[(0, 0)]).ok()?;
                Some(normal.cdf(x))
            }
            Kind::Exponential { rate } => Some(if x < 0.0 {
                0.0
            } else {
                1.0 - (-rate * x).exp()
            }),
            Kind::Laplace { scale } => Some(if x < 0.0 {
                0.5 * (x / scale).exp()
            } else {
                1.0 - 0.5 * (-x / scale).exp()
            }),
            Kind::Gamma { shape, rate, .. } => {
                let g = statrs::distribution::Gamma::new(*shape, *rate).ok()?;
                Some(g.cdf(x.max(0.0)))
            }
            Kind::UniformBody { body, .. } => match body {
                ConvexBody::Box { lower, upper } => {
                    Some(((x - lower[0]) / (upper[0] - lower[0])).clamp(0.0, 1.0))
                }
                _ => None,
            },
            Kind::Product { factors } => factors[0].cdf1(x),
            Kind::Affine { inner, map, .. } => {
                let a = map.linear()[(0, 0)];
                let s = map.shift()[0];
                let t = (x - s) / a;
                let f = inner.cdf1(t)?;
                Some(if a > 0.0 { f } else { 1.0 - f })
            }
        }
    }
}

fn validate_positive(v: f64, what: &str) -> Result<()> {
    if !(v.is_finite() && v > 0.0) {
        return Err(LabError::invalid(format!("{what} must be positive, got {v}")));
    }
    Ok(())
}

/// Gaussian with the given mean and covariance.
pub fn gaussian(mean: DVector<f64>, covariance: DMatrix<f64>) -> Result<DensityModel> {
    let n = mean.len();
    if covariance.nrows() != n {
        return Err(LabError::invalid("mean/covariance dimension mismatch"));
    }
    let chol = linalg::cholesky_spd(&covariance)?;
    let log_det: f64 = 2.0 * (0..n).map(|i| chol[(i, i)].ln()).sum::<f64>();
    let log_norm = 0.5 * n as f64 * LN_2PI + 0.5 * log_det;
    let entropy = 0.5 * n as f64 * (LN_2PI + 1.0) + 0.5 * log_det;
    Ok(DensityModel {
        name: format!("gaussian(n={n})"),
        dim: n,
        kind: Kind::Gaussian {
            mu: mean.clone(),
            chol,
            log_norm,
        },
        analytic_entropy: Some(entropy),
        analytic_max_density: Some((-log_norm).exp()),
        mean: Some(mean),
        covariance: Some(covariance),
        kappa: Some(0.0),
        support: None,
    })
}

/// Centered isotropic Gaussian with variance `var` per coordinate.
pub fn gaussian_iso(n: usize, var: f64) -> Result<DensityModel> {
    if n == 0 {
        return Err(LabError::invalid("dimension must be positive"));
    }
    validate_positive(var, "variance")?;
    gaussian(DVector::zeros(n), DMatrix::identity(n, n) * var)
}

/// One-dimensional Gaussian.
pub fn gaussian1(mean: f64, var: f64) -> Result<DensityModel> {
    validate_positive(var, "variance")?;
    gaussian(
        DVector::from_element(1, mean),
        DMatrix::from_element(1, 1, var),
    )
}

/// Exponential(rate) on [0, ∞).
pub fn exponential(rate: f64) -> Result<DensityModel> {
    validate_positive(rate, "rate")?;
    Ok(DensityModel {
        name: format!("exp({rate})"),
        dim: 1,
        kind: Kind::Exponential { rate },
        analytic_entropy: Some(1.0 - rate.ln()),
        analytic_max_density: Some(rate),
        mean: Some(DVector::from_element(1, 1.0 / rate)),
        covariance: Some(DMatrix::from_element(1, 1, 1.0 / (rate * rate))),
        kappa: Some(0.0),
        support: None,
    })
}

/// Symmetric Laplace with the given scale.
pub fn laplace(scale: f64) -> Result<DensityModel> {
    validate_positive(scale, "scale")?;
    Ok(DensityModel {
        name: format!("laplace({scale})"),
        dim: 1,
        kind: Kind::Laplace { scale },
        analytic_entropy: Some(1.0 + (2.0 * scale).ln()),
        analytic_max_density: Some(1.0 / (2.0 * scale)),
        mean: Some(DVector::zeros(1)),
        covariance: Some(DMatrix::from_element(1, 1, 2.0 * scale * scale)),
        kappa: Some(0.0),
        support: None,
    })
}

/// Gamma(shape, rate) with shape ≥ 1, the log-concave range.
pub fn gamma_dist(shape: f64, rate: f64) -> Result<DensityModel> {
    validate_positive(rate, "rate")?;
    if !(shape.is_finite() && shape >= 1.0) {
        return Err(LabError::invalid(format!(
            "gamma shape must be >= 1 for log-concavity, got {shape}"
        )));
    }
    let log_norm = ln_gamma(shape) - shape * rate.ln();
    let entropy = shape - rate.ln() + ln_gamma(shape) + (1.0 - shape) * digamma(shape);
    let max_density = if shape == 1.0 {
        rate
    } else {
        let mode = (shape - 1.0) / rate;
        ((shape - 1.0) * mode.ln() - rate * mode - log_norm).exp()
    };
    Ok(DensityModel {
        name: format!("gamma({shape},{rate})"),
        dim: 1,
        kind: Kind::Gamma { shape, rate, log_norm },
        analytic_entropy: Some(entropy),
        analytic_max_density: Some(max_density),
        mean: Some(DVector::from_element(1, shape / rate)),
        covariance: Some(DMatrix::from_element(1, 1, shape / (rate * rate))),
        kappa: Some(0.0),
        support: None,
    })
}

/// Uniform distribution on a body with analytic volume.
pub fn uniform_body_model(body: ConvexBody) -> Result<DensityModel> {
    let n = body.dim();
    let log_vol = body.log_volume().map_err(|_| {
        LabError::unsupported("uniform model needs an analytically computable volume")
    })?;
    let (mean, covariance) = uniform_body_moments(&body);
    Ok(DensityModel {
        name: format!("uniform({})", body_label(&body)),
        dim: n,
        kind: Kind::UniformBody {
            body: body.clone(),
            log_vol,
        },
        analytic_entropy: Some(log_vol),
        analytic_max_density: Some((-log_vol).exp()),
        mean,
        covariance,
        kappa: Some(1.0 / n as f64),
        support: Some(body),
    })
}

pub fn uniform_cube(n: usize) -> Result<DensityModel> {
    uniform_body_model(ConvexBody::cube(n)?)
}

pub fn uniform_interval(lo: f64, hi: f64) -> Result<DensityModel> {
    uniform_body_model(ConvexBody::boxed(
        DVector::from_element(1, lo),
        DVector::from_element(1, hi),
    )?)
}

fn body_label(body: &ConvexBody) -> String {
    match body {
        ConvexBody::Ball { radius, .. } => format!("ball(n={},r={radius:.4})", body.dim()),
        ConvexBody::Box { .. } => format!("box(n={})", body.dim()),
        ConvexBody::Simplex { .. } => format!("simplex(n={})", body.dim()),
        ConvexBody::Ellipsoid { .. } => format!("ellipsoid(n={})", body.dim()),
        ConvexBody::HPolytope { .. } => format!("hpolytope(n={})", body.dim()),
    }
}

fn uniform_body_moments(body: &ConvexBody) -> (Option<DVector<f64>>, Option<DMatrix<f64>>) {
    let n = body.dim();
    match body {
        ConvexBody::Ball { center, radius } => (
            Some(center.clone()),
            Some(DMatrix::identity(n, n) * (radius * radius / (n as f64 + 2.0))),
        ),
        ConvexBody::Box { lower, upper } => {
            let mean = (lower + upper) / 2.0;
            let var = DVector::from_iterator(
                n,
                lower
                    .iter()
                    .zip(upper.iter())
                    .map(|(l, u)| (u - l) * (u - l) / 12.0),
            );
            (Some(mean), Some(DMatrix::from_diagonal(&var)))
        }
        ConvexBody::Simplex { vertices } => {
            // affine image of the standard simplex: Dirichlet(1,..,1) weights
            let k = n as f64 + 1.0;
            let mut mean = DVector::zeros(n);
            for v in vertices {
                mean += v;
            }
            mean /= k;
            let mut t = DMatrix::zeros(n, n);
            for j in 0..n {
                for i in 0..n {
                    t[(i, j)] = vertices[j + 1][i] - vertices[0][i];
                }
            }
            let denom = k * k * (k + 1.0);
            let mut std_cov = DMatrix::from_element(n, n, -1.0 / denom);
            for i in 0..n {
                std_cov[(i, i)] = n as f64 / denom;
            }
            (Some(mean), Some(&t * std_cov * t.transpose()))
        }
        ConvexBody::Ellipsoid { shape, center } => (
            Some(center.clone()),
            Some(shape / (n as f64 + 2.0)),
        ),
        ConvexBody::HPolytope { .. } => (None, None),
    }
}

/// Product of one-dimensional factors: entropies add, max densities
/// multiply, log-concavity is preserved.
pub fn make_product(factors: Vec<DensityModel>) -> Result<DensityModel> {
    if factors.is_empty() {
        return Err(LabError::invalid("product needs at least one factor"));
    }
    if factors.iter().any(|f| f.dim() != 1) {
        return Err(LabError::invalid("product factors must be one-dimensional"));
    }
    let n = factors.len();
    let entropy = factors
        .iter()
        .map(|f| f.analytic_entropy)
        .try_fold(0.0, |acc, h| h.map(|h| acc + h));
    let maxd = factors
        .iter()
        .map(|f| f.analytic_max_density)
        .try_fold(1.0, |acc, d| d.map(|d| acc * d));
    let mean = factors
        .iter()
        .map(|f| f.mean.as_ref().map(|m| m[0]))
        .collect::<Option<Vec<f64>>>()
        .map(DVector::from_vec);
    let cov = factors
        .iter()
        .map(|f| f.covariance.as_ref().map(|c| c[(0, 0)]))
        .collect::<Option<Vec<f64>>>()
        .map(|v| DMatrix::from_diagonal(&DVector::from_vec(v)));
    let kappa = if factors.iter().all(|f| matches!(f.kappa, Some(k) if k >= 0.0)) {
        Some(0.0)
    } else {
        None
    };
    let support = factors
        .iter()
        .map(|f| match f.support.as_ref() {
            Some(ConvexBody::Box { lower, upper }) => Some((lower[0], upper[0])),
            _ => None,
        })
        .collect::<Option<Vec<(f64, f64)>>>()
        .map(|b| ConvexBody::Box {
            lower: DVector::from_iterator(n, b.iter().map(|x| x.0)),
            upper: DVector::from_iterator(n, b.iter().map(|x| x.1)),
        });
    let name = if n >= 2 && factors.windows(2).all(|w| w[0].name == w[1].name) {
        format!("{}^{n}", factors[0].name)
    } else {
        format!(
            "product({})",
            factors.iter().map(|f| f.name.as_str()).collect::<Vec<_>>().join(",")
        )
    };
    Ok(DensityModel {
        name,
        dim: n,
        kind: Kind::Product { factors },
        analytic_entropy: entropy,
        analytic_max_density: maxd,
        mean,
        covariance: cov,
        kappa,
        support,
    })
}

pub fn exponential_product(n: usize, rate: f64) -> Result<DensityModel> {
    make_product((0..n).map(|_| exponential(rate)).collect::<Result<_>>()?)
}

pub fn laplace_product(n: usize, scale: f64) -> Result<DensityModel> {
    make_product((0..n).map(|_| laplace(scale)).collect::<Result<_>>()?)
}

pub fn gamma_product(n: usize, shape: f64, rate: f64) -> Result<DensityModel> {
    make_product(
        (0..n)
            .map(|_| gamma_dist(shape, rate))
            .collect::<Result<_>>()?,
    )
}

/// Affine image Y = LX + s with exact entropy/max-density bookkeeping:
/// h ↦ h + log|det L|, ∥f∥∞ ↦ ∥f∥∞ / |det L|, κ preserved.
pub fn affine_image(model: &DensityModel, map: &AffineMap) -> Result<DensityModel> {
    if map.dim() != model.dim() {
        return Err(LabError::invalid("affine map dimension mismatch"));
    }
    let analytic_entropy = model.analytic_entropy.map(|h| h + map.log_det());
    let analytic_max_density = model.analytic_max_density.map(|d| d / map.log_det().exp());
    let mean = model.mean.as_ref().map(|mu| map.apply_vec(mu));
    let covariance = model
        .covariance
        .as_ref()
        .map(|c| map.linear() * c * map.linear().transpose());
    let support = model
        .support
        .as_ref()
        .and_then(|b| b.affine_image(map.linear(), map.shift()).ok());
    let kappa = model.kappa;
    let name = format!("affine({})", model.name);
    let dim = model.dim;

    let kind = fold_affine_kind(model, map)?;
    Ok(DensityModel {
        name,
        dim,
        kind,
        analytic_entropy,
        analytic_max_density,
        mean,
        covariance,
        kappa,
        support,
    })
}

/// Choose a representation for the mapped model. Families that are closed
/// under the map keep their direct form (and direct samplers); everything
/// else wraps the inner model.
fn fold_affine_kind(model: &DensityModel, map: &AffineMap) -> Result<Kind> {
    match &model.kind {
        Kind::Gaussian { mu, .. } => {
            let cov = model.covariance.as_ref().expect("gaussian has covariance");
            let new_mu = map.apply_vec(mu);
            let new_cov = map.linear() * cov * map.linear().transpose();
            let chol = linalg::cholesky_spd(&new_cov)?;
            let log_det: f64 = 2.0 * (0..new_cov.nrows()).map(|i| chol[(i, i)].ln()).sum::<f64>();
            Ok(Kind::Gaussian {
                mu: new_mu,
                chol,
                log_norm: 0.5 * model.dim as f64 * LN_2PI + 0.5 * log_det,
            })
        }
        Kind::UniformBody { body, log_vol } => {
            let mapped = body.affine_image(map.linear(), map.shift())?;
            // keep the direct form only when the image still has a direct sampler
            if matches!(mapped, ConvexBody::HPolytope { .. }) {
                wrap_affine(model, map)
            } else {
                Ok(Kind::UniformBody {
                    body: mapped,
                    log_vol: log_vol + map.log_det(),
                })
            }
        }
        Kind::Product { factors } if linalg::is_diagonal(map.linear(), 1e-14) => {
            let mut new_factors = Vec::with_capacity(factors.len());
            for (i, f) in factors.iter().enumerate() {
                let m1 = AffineMap::new(
                    DMatrix::from_element(1, 1, map.linear()[(i, i)]),
                    DVector::from_element(1, map.shift()[i]),
                )?;
                new_factors.push(affine_image(f, &m1)?);
            }
            Ok(Kind::Product { factors: new_factors })
        }
        Kind::Affine { inner, map: prev, .. } => {
            let composed = map.compose(prev);
            let inv = composed.inverse()?;
            Ok(Kind::Affine {
                inner: inner.clone(),
                map: composed,
                inv,
            })
        }
        _ => wrap_affine(model, map),
    }
}

fn wrap_affine(model: &DensityModel, map: &AffineMap) -> Result<Kind> {
    Ok(Kind::Affine {
        inner: Box::new(model.clone()),
        map: map.clone(),
        inv: map.inverse()?,
    })
}

/// Max-density search outcome.
#[derive(Clone, Copy, Debug)]
pub struct MaxDensityEstimate {
    /// Certified lower bound on ∥f∥∞ (exact on the analytic path).
    pub value: f64,
    pub converged: bool,
    pub evaluations: usize,
}

/// ∥f∥∞: analytic when available, otherwise a derivative-free convex search
/// on log-density started from the sample mean.
pub fn max_density(
    model: &DensityModel,
    rng: &mut LabRng,
    opt_budget: usize,
) -> Result<MaxDensityEstimate> {
    if let Some(v) = model.analytic_max_density {
        return Ok(MaxDensityEstimate {
            value: v,
            converged: true,
            evaluations: 0,
        });
    }
    if !model.is_log_concave() {
        return Err(LabError::unsupported(
            "max density search requires a log-concave model (kappa >= 0)",
        ));
    }
    let n = model.dim;
    let start: Vec<f64> = match model.mean.as_ref() {
        Some(mu) => mu.iter().copied().collect(),
        None => {
            let m0 = 256;
            let mut acc = vec![0.0; n];
            for _ in 0..m0 {
                let x = model.sample(rng);
                for i in 0..n {
                    acc[i] += x[i] / m0 as f64;
                }
            }
            acc
        }
    };
    let scale = model
        .covariance
        .as_ref()
        .map(|c| (c.trace() / n as f64).sqrt())
        .unwrap_or(1.0)
        .max(1e-6);
    let objective = |x: &[f64]| -model.log_density(x);
    let result = crate::optim::nelder_mead(objective, &start, scale, opt_budget, 1e-8);
    if !result.best_value.is_finite() {
        return Err(LabError::Estimation(
            "max-density search failed to find a point of positive density".into(),
        ));
    }
    Ok(MaxDensityEstimate {
        value: (-result.best_value).exp(),
        converged: result.converged,
        evaluations: result.evaluations,
    })
}

#[cfg(test)]
pub(crate) fn strip_analytic(model: &DensityModel) -> DensityModel {
    let mut m = model.clone();
    m.analytic_entropy = None;
    m.analytic_max_density = None;
    m
}
