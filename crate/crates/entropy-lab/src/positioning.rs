//! Affine maps and affine normalization: max-density scaling, det-1
//! isotropic position, ball-mass measurement, and a diagonal refinement
//! search used as a computable stand-in for an optimal volume-1 ellipsoid.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{LabError, Result};
use crate::geometry::unit_volume_ball;
use crate::linalg;
use crate::rng::{child_streams, pairwise_sum, par_chunk_map, LabRng};
use crate::zoo::{affine_image, DensityModel};

const LOG_DET_TOL: f64 = 1e-10;

/// Invertible affine map x ↦ Lx + s with cached log|det L|.
#[derive(Clone, Debug)]
pub struct AffineMap {
    linear: DMatrix<f64>,
    shift: DVector<f64>,
    log_det: f64,
}

impl AffineMap {
    pub fn new(linear: DMatrix<f64>, shift: DVector<f64>) -> Result<Self> {
        if linear.nrows() != linear.ncols() || linear.nrows() != shift.len() {
            return Err(LabError::invalid("affine map must be square and match shift"));
        }
        let det = linear.clone().lu().determinant();
        if det.abs() < 1e-300 || !det.is_finite() {
            return Err(LabError::invalid("linear part must be invertible"));
        }
        Ok(AffineMap {
            linear,
            shift,
            log_det: det.abs().ln(),
        })
    }

    /// Like `new`, but pins the cached log-determinant to an exact value the
    /// caller derived structurally (e.g. 0 for det-1 whitening). The pinned
    /// value must agree with the matrix within 1e-10.
    fn with_exact_log_det(linear: DMatrix<f64>, shift: DVector<f64>, log_det: f64) -> Result<Self> {
        let computed = AffineMap::new(linear.clone(), shift.clone())?.log_det;
        if (computed - log_det).abs() > LOG_DET_TOL {
            return Err(LabError::InternalInconsistency(format!(
                "declared log_det {log_det} vs computed {computed}"
            )));
        }
        Ok(AffineMap {
            linear,
            shift,
            log_det,
        })
    }

    pub fn identity(n: usize) -> Self {
        AffineMap {
            linear: DMatrix::identity(n, n),
            shift: DVector::zeros(n),
            log_det: 0.0,
        }
    }

    pub fn scaling(n: usize, factor: f64) -> Result<Self> {
        if factor == 0.0 || !factor.is_finite() {
            return Err(LabError::invalid("scaling factor must be nonzero"));
        }
        Ok(AffineMap {
            linear: DMatrix::identity(n, n) * factor,
            shift: DVector::zeros(n),
            log_det: n as f64 * factor.abs().ln(),
        })
    }

    pub fn translation(shift: DVector<f64>) -> Self {
        let n = shift.len();
        AffineMap {
            linear: DMatrix::identity(n, n),
            shift,
            log_det: 0.0,
        }
    }

    pub fn dim(&self) -> usize {
        self.shift.len()
    }

    pub fn linear(&self) -> &DMatrix<f64> {
        &self.linear
    }

    pub fn shift(&self) -> &DVector<f64> {
        &self.shift
    }

    pub fn log_det(&self) -> f64 {
        self.log_det
    }

    pub fn is_volume_preserving(&self) -> bool {
        self.log_det.abs() <= LOG_DET_TOL
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let v = &self.linear * DVector::from_column_slice(x) + &self.shift;
        v.iter().copied().collect()
    }

    pub fn apply_vec(&self, x: &DVector<f64>) -> DVector<f64> {
        &self.linear * x + &self.shift
    }

    /// self ∘ other: apply `other` first.
    pub fn compose(&self, other: &AffineMap) -> AffineMap {
        AffineMap {
            linear: &self.linear * &other.linear,
            shift: &self.linear * &other.shift + &self.shift,
            log_det: self.log_det + other.log_det,
        }
    }

    pub fn inverse(&self) -> Result<AffineMap> {
        let inv = self
            .linear
            .clone()
            .try_inverse()
            .ok_or_else(|| LabError::invalid("singular linear part"))?;
        let shift = -(&inv * &self.shift);
        Ok(AffineMap {
            linear: inv,
            shift,
            log_det: -self.log_det,
        })
    }

    pub fn to_record(&self) -> AffineMapRecord {
        AffineMapRecord {
            linear: (0..self.linear.nrows())
                .map(|i| self.linear.row(i).iter().copied().collect())
                .collect(),
            shift: self.shift.iter().copied().collect(),
            log_det: self.log_det,
        }
    }
}

/// Serialized form of an affine map.
#[derive(Clone, Debug, Serialize)]
pub struct AffineMapRecord {
    pub linear: Vec<Vec<f64>>,
    pub shift: Vec<f64>,
    pub log_det: f64,
}

/// Result of a positioning step.
#[derive(Clone, Debug)]
pub struct Positioned {
    pub model: DensityModel,
    pub map: AffineMap,
    pub note: Option<String>,
}

/// Scale Y = λX with λ = ∥f∥∞^{1/n}, making the max density exactly one.
pub fn normalize_max_density(model: &DensityModel, rng: &mut LabRng) -> Result<Positioned> {
    let n = model.dim();
    let (maxd, note) = match model.analytic_max_density() {
        Some(v) => (v, None),
        None => {
            let est = crate::zoo::max_density(model, rng, 4_000)?;
            (
                est.value,
                Some(format!(
                    "max density from numeric search (converged: {})",
                    est.converged
                )),
            )
        }
    };
    let lambda = (maxd.ln() / n as f64).exp();
    let map = AffineMap::scaling(n, lambda)?;
    let mut scaled = affine_image(model, &map)?;
    // the image has max density maxd / λⁿ = 1 by construction
    scaled.set_analytic_max_density(1.0);
    Ok(Positioned {
        model: scaled,
        map,
        note,
    })
}

/// Center the model and apply the det-1 symmetric whitener, producing a
/// volume- and entropy-preserving map with covariance proportional to the
/// identity.
pub fn isotropic_det1_position(
    model: &DensityModel,
    rng: &mut LabRng,
    m: usize,
) -> Result<Positioned> {
    let n = model.dim();
    let mut note = None;
    let (mean, mut cov) = match (model.mean(), model.covariance()) {
        (Some(mu), Some(sigma)) => (mu.clone(), sigma.clone()),
        _ => {
            let m_cov = m.max(10 * n * n).max(1_000);
            let samples: Vec<Vec<f64>> = (0..m_cov).map(|_| model.sample(rng)).collect();
            note = Some(format!("moments estimated from {m_cov} samples"));
            linalg::mean_cov_from_samples(&samples, 1e-9)
        }
    };
    let w = match linalg::det1_whitener(&cov) {
        Ok(w) => w,
        Err(_) => {
            let ridge = 1e-9 * (cov.trace() / n as f64).max(1.0);
            for i in 0..n {
                cov[(i, i)] += ridge;
            }
            note = Some(match note {
                Some(s) => format!("{s}; covariance regularized"),
                None => "covariance regularized".into(),
            });
            linalg::det1_whitener(&cov)?
        }
    };
    let shift = -(&w * &mean);
    let map = AffineMap::with_exact_log_det(w, shift, 0.0)?;
    let positioned = affine_image(model, &map)?;
    Ok(Positioned {
        model: positioned,
        map,
        note,
    })
}

/// Fraction of mass inside the centered unit-volume ball.
#[derive(Clone, Debug, Serialize)]
pub struct BallMass {
    pub mass: f64,
    pub std_error: f64,
    /// mass^{1/n}; `None` when no sample landed inside.
    pub mass_root: Option<f64>,
    /// Upper bound 1/m reported instead of zero when censored.
    pub censored_upper_bound: Option<f64>,
    pub sample_size: usize,
}

impl BallMass {
    /// mass_root, or the censoring upper bound's root when no hits landed.
    pub fn root_or_bound(&self, n: usize) -> f64 {
        match self.mass_root {
            Some(r) => r,
            None => self
                .censored_upper_bound
                .map(|u| u.powf(1.0 / n as f64))
                .unwrap_or(0.0),
        }
    }
}

/// Measure μ(D) for D the unit-volume ball centered at the model mean.
pub fn ball_mass(model: &DensityModel, rng: &mut LabRng, m: usize) -> Result<BallMass> {
    let n = model.dim();
    let ball = unit_volume_ball(n)?;
    let center: DVector<f64> = match model.mean() {
        Some(mu) => mu.clone(),
        None => {
            let m0 = (10 * n).max(1_000);
            let mut acc = DVector::zeros(n);
            for _ in 0..m0 {
                let x = model.sample(rng);
                for i in 0..n {
                    acc[i] += x[i];
                }
            }
            acc / m0 as f64
        }
    };
    let streams = child_streams(rng);
    let counts = par_chunk_map(&streams, 0, m, |chunk_rng, len| {
        let mut hits = 0.0;
        let mut shifted = vec![0.0; n];
        for _ in 0..len {
            let x = model.sample(chunk_rng);
            for i in 0..n {
                shifted[i] = x[i] - center[i];
            }
            if ball.contains(&shifted) {
                hits += 1.0;
            }
        }
        hits
    });
    let hits = pairwise_sum(&counts);
    let mass = hits / m as f64;
    let se = (mass * (1.0 - mass) / m as f64).sqrt();
    Ok(if hits == 0.0 {
        BallMass {
            mass: 0.0,
            std_error: se,
            mass_root: None,
            censored_upper_bound: Some(1.0 / m as f64),
            sample_size: m,
        }
    } else {
        BallMass {
            mass,
            std_error: se,
            mass_root: Some(mass.powf(1.0 / n as f64)),
            censored_upper_bound: None,
            sample_size: m,
        }
    })
}

/// Greedy coordinate search over diagonal det-1 maps maximizing ball mass.
///
/// The input should already be isotropically positioned; the search only
/// ever accepts improvements measured on a common sample set, so the result
/// is never worse than the input position up to binomial noise.
pub fn m_position_search(
    model: &DensityModel,
    rng: &mut LabRng,
    m: usize,
    axes_iters: usize,
) -> Result<(AffineMap, BallMass)> {
    let n = model.dim();
    let ball = unit_volume_ball(n)?;
    let center: DVector<f64> = model.mean().cloned().unwrap_or_else(|| DVector::zeros(n));
    let samples: Vec<Vec<f64>> = (0..m)
        .map(|_| {
            let x = model.sample(rng);
            (0..n).map(|i| x[i] - center[i]).collect()
        })
        .collect();
    let count_hits = |log_scales: &[f64]| -> usize {
        let scales: Vec<f64> = log_scales.iter().map(|l| l.exp()).collect();
        let mut y = vec![0.0; n];
        samples
            .iter()
            .filter(|x| {
                for i in 0..n {
                    y[i] = scales[i] * x[i];
                }
                ball.contains(&y)
            })
            .count()
    };
    let mut log_scales = vec![0.0; n];
    let mut best = count_hits(&log_scales);
    for round in 0..axes_iters {
        let step = 0.25 / (1.0 + round as f64);
        for i in 0..n {
            for sign in [1.0, -1.0] {
                // move coordinate i, spread the opposite drift to keep Σ log = 0
                let mut cand = log_scales.clone();
                for (j, c) in cand.iter_mut().enumerate() {
                    if j == i {
                        *c += sign * step;
                    } else {
                        *c -= sign * step / (n as f64 - 1.0).max(1.0);
                    }
                }
                if n == 1 {
                    continue;
                }
                let hits = count_hits(&cand);
                if hits > best {
                    best = hits;
                    log_scales = cand;
                }
            }
        }
    }
    let linear = DMatrix::from_diagonal(&DVector::from_iterator(
        n,
        log_scales.iter().map(|l| l.exp()),
    ));
    let shift = -(&linear * &center);
    let map = AffineMap::with_exact_log_det(linear, shift, pairwise_sum(&log_scales))
        .unwrap_or_else(|_| AffineMap::identity(n));
    let mass = best as f64 / m as f64;
    let se = (mass * (1.0 - mass) / m as f64).sqrt();
    let ball_mass = if best == 0 {
        BallMass {
            mass: 0.0,
            std_error: se,
            mass_root: None,
            censored_upper_bound: Some(1.0 / m as f64),
            sample_size: m,
        }
    } else {
        BallMass {
            mass,
            std_error: se,
            mass_root: Some(mass.powf(1.0 / n as f64)),
            censored_upper_bound: None,
            sample_size: m,
        }
    };
    Ok((map, ball_mass))
}

/// Exact lower bound on the centered-ball mass for models with independent
/// coordinates, via grid convolution of the per-coordinate squared-deviation
/// laws. Serves as an oracle when direct Monte Carlo censors.
pub fn ball_mass_product_lower_bound(model: &DensityModel, grid: usize) -> Option<f64> {
    let n = model.dim();
    let coords = model.coordinate_factors()?;
    let mean = model.mean()?.clone();
    let ball = unit_volume_ball(n).ok()?;
    let r2 = match ball {
        crate::geometry::ConvexBody::Ball { radius, .. } => radius * radius,
        _ => unreachable!(),
    };
    // per-coordinate CDF of W = (X−μ)²: F(w) = F_X(μ+√w) − F_X(μ−√w)
    let step = r2 / grid as f64;
    let mut dist = vec![0.0; grid + 1]; // dist[g] = P{sum in bin g}, bin grid = overflow
    dist[0] = 1.0;
    for (i, c) in coords.iter().enumerate() {
        let cdf_w = |w: f64| -> Option<f64> {
            if w <= 0.0 {
                return Some(0.0);
            }
            let s = w.sqrt();
            Some((c.cdf1(mean[i] + s)? - c.cdf1(mean[i] - s)?).clamp(0.0, 1.0))
        };
        let mut w_bins = vec![0.0; grid + 1];
        let mut prev = 0.0;
        for g in 0..grid {
            let hi = cdf_w(step * (g + 1) as f64)?;
            w_bins[g] = (hi - prev).max(0.0);
            prev = hi;
        }
        w_bins[grid] = (1.0 - prev).max(0.0);
        // convolve, assigning each bin's mass to its right edge (lower bound)
        let mut next = vec![0.0; grid + 1];
        for a in 0..=grid {
            if dist[a] == 0.0 {
                continue;
            }
            for (b, wb) in w_bins.iter().enumerate() {
                if *wb == 0.0 {
                    continue;
                }
                let idx = (a + b + usize::from(a < grid && b < grid)).min(grid);
                next[idx] += dist[a] * wb;
            }
        }
        dist = next;
    }
    // mass strictly below r² (bins 0..grid-1 have right edge ≤ r²)
    Some(dist[..grid].iter().sum())
}
