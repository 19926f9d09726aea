//! Convex bodies: volumes, membership, uniform samplers, Minkowski sums.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use statrs::function::gamma::ln_gamma;

use crate::error::{LabError, Result};
use crate::rng::LabRng;

/// Hit-and-run burn-in steps per dimension.
const HIT_AND_RUN_BURNIN_PER_DIM: usize = 100;
/// Hit-and-run thinning between kept samples.
const HIT_AND_RUN_THIN: usize = 10;

#[derive(Clone, Debug)]
pub enum ConvexBody {
    Ball {
        center: DVector<f64>,
        radius: f64,
    },
    Box {
        lower: DVector<f64>,
        upper: DVector<f64>,
    },
    /// n+1 vertices spanning a nondegenerate simplex in R^n.
    Simplex { vertices: Vec<DVector<f64>> },
    /// {x : (x-c)ᵀ M⁻¹ (x-c) ≤ 1} with M symmetric positive definite.
    Ellipsoid {
        shape: DMatrix<f64>,
        center: DVector<f64>,
    },
    /// {x : A x ≤ b}, assumed bounded with nonempty interior.
    HPolytope { a: DMatrix<f64>, b: DVector<f64> },
}

/// Volume with the standard error of the estimate (zero on analytic paths).
#[derive(Clone, Copy, Debug)]
pub struct VolumeEstimate {
    pub value: f64,
    pub std_error: f64,
}

/// log volume of the Euclidean unit ball in dimension n.
pub fn log_unit_ball_volume(n: usize) -> f64 {
    let nf = n as f64;
    (nf / 2.0) * std::f64::consts::PI.ln() - ln_gamma(nf / 2.0 + 1.0)
}

/// Centered Euclidean ball with volume one.
pub fn unit_volume_ball(n: usize) -> Result<ConvexBody> {
    if n == 0 {
        return Err(LabError::invalid("dimension must be positive"));
    }
    let radius = (-log_unit_ball_volume(n) / n as f64).exp();
    Ok(ConvexBody::Ball {
        center: DVector::zeros(n),
        radius,
    })
}

impl ConvexBody {
    pub fn dim(&self) -> usize {
        match self {
            ConvexBody::Ball { center, .. } => center.len(),
            ConvexBody::Box { lower, .. } => lower.len(),
            ConvexBody::Simplex { vertices } => vertices[0].len(),
            ConvexBody::Ellipsoid { center, .. } => center.len(),
            ConvexBody::HPolytope { a, .. } => a.ncols(),
        }
    }

    pub fn ball(center: DVector<f64>, radius: f64) -> Result<Self> {
        if radius <= 0.0 || !radius.is_finite() {
            return Err(LabError::invalid("ball radius must be positive"));
        }
        Ok(ConvexBody::Ball { center, radius })
    }

    pub fn cube(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(LabError::invalid("dimension must be positive"));
        }
        Ok(ConvexBody::Box {
            lower: DVector::zeros(n),
            upper: DVector::from_element(n, 1.0),
        })
    }

    pub fn boxed(lower: DVector<f64>, upper: DVector<f64>) -> Result<Self> {
        if lower.len() != upper.len() || lower.is_empty() {
            return Err(LabError::invalid("box bounds must have equal positive length"));
        }
        if lower.iter().zip(upper.iter()).any(|(l, u)| l >= u) {
            return Err(LabError::invalid("box must have nonempty interior"));
        }
        Ok(ConvexBody::Box { lower, upper })
    }

    /// Standard simplex {x ≥ 0, Σx ≤ 1} as a vertex list.
    pub fn standard_simplex(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(LabError::invalid("dimension must be positive"));
        }
        let mut vertices = vec![DVector::zeros(n)];
        for i in 0..n {
            let mut v = DVector::zeros(n);
            v[i] = 1.0;
            vertices.push(v);
        }
        Ok(ConvexBody::Simplex { vertices })
    }

    pub fn simplex(vertices: Vec<DVector<f64>>) -> Result<Self> {
        let n = vertices
            .first()
            .map(|v| v.len())
            .ok_or_else(|| LabError::invalid("simplex needs vertices"))?;
        if vertices.len() != n + 1 {
            return Err(LabError::invalid("simplex in R^n needs n+1 vertices"));
        }
        let body = ConvexBody::Simplex { vertices };
        if body.log_volume()?.is_infinite() {
            return Err(LabError::invalid("degenerate simplex"));
        }
        Ok(body)
    }

    pub fn ellipsoid(shape: DMatrix<f64>, center: DVector<f64>) -> Result<Self> {
        crate::linalg::cholesky_spd(&shape)?;
        if shape.nrows() != center.len() {
            return Err(LabError::invalid("ellipsoid shape/center dimension mismatch"));
        }
        Ok(ConvexBody::Ellipsoid { shape, center })
    }

    pub fn hpolytope(a: DMatrix<f64>, b: DVector<f64>) -> Result<Self> {
        if a.nrows() != b.len() || a.ncols() == 0 {
            return Err(LabError::invalid("polytope rows/offsets mismatch"));
        }
        Ok(ConvexBody::HPolytope { a, b })
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        const TOL: f64 = 1e-12;
        match self {
            ConvexBody::Ball { center, radius } => {
                let d2: f64 = x
                    .iter()
                    .zip(center.iter())
                    .map(|(xi, ci)| (xi - ci) * (xi - ci))
                    .sum();
                d2 <= radius * radius * (1.0 + TOL) + TOL
            }
            ConvexBody::Box { lower, upper } => x
                .iter()
                .zip(lower.iter().zip(upper.iter()))
                .all(|(xi, (l, u))| *xi >= l - TOL && *xi <= u + TOL),
            ConvexBody::Simplex { vertices } => {
                // barycentric coordinates via the linear system [v1-v0 ... vn-v0] w = x - v0
                let n = self.dim();
                let v0 = &vertices[0];
                let mut mat = DMatrix::zeros(n, n);
                for j in 0..n {
                    for i in 0..n {
                        mat[(i, j)] = vertices[j + 1][i] - v0[i];
                    }
                }
                let rhs = DVector::from_iterator(n, x.iter().zip(v0.iter()).map(|(a, b)| a - b));
                match mat.lu().solve(&rhs) {
                    Some(w) => {
                        let s: f64 = w.iter().sum();
                        w.iter().all(|wi| *wi >= -1e-9) && s <= 1.0 + 1e-9
                    }
                    None => false,
                }
            }
            ConvexBody::Ellipsoid { shape, center } => {
                let d = DVector::from_iterator(
                    x.len(),
                    x.iter().zip(center.iter()).map(|(a, b)| a - b),
                );
                match nalgebra::Cholesky::new(shape.clone()) {
                    Some(ch) => {
                        let y = ch.solve(&d);
                        d.dot(&y) <= 1.0 + 1e-9
                    }
                    None => false,
                }
            }
            ConvexBody::HPolytope { a, b } => {
                let xv = DVector::from_column_slice(x);
                let ax = a * xv;
                ax.iter().zip(b.iter()).all(|(l, r)| *l <= r + 1e-9)
            }
        }
    }

    /// log Lebesgue volume for the analytic variants.
    pub fn log_volume(&self) -> Result<f64> {
        match self {
            ConvexBody::Ball { center, radius } => {
                Ok(log_unit_ball_volume(center.len()) + center.len() as f64 * radius.ln())
            }
            ConvexBody::Box { lower, upper } => Ok(lower
                .iter()
                .zip(upper.iter())
                .map(|(l, u)| (u - l).ln())
                .sum()),
            ConvexBody::Simplex { vertices } => {
                let n = vertices[0].len();
                let v0 = &vertices[0];
                let mut mat = DMatrix::zeros(n, n);
                for j in 0..n {
                    for i in 0..n {
                        mat[(i, j)] = vertices[j + 1][i] - v0[i];
                    }
                }
                let det = mat.lu().determinant().abs();
                Ok(det.ln() - ln_gamma(n as f64 + 1.0))
            }
            ConvexBody::Ellipsoid { shape, center } => {
                let ld = crate::linalg::log_det_spd(shape)?;
                Ok(log_unit_ball_volume(center.len()) + 0.5 * ld)
            }
            ConvexBody::HPolytope { .. } => Err(LabError::unsupported(
                "H-polytope volume is Monte Carlo only; use volume()",
            )),
        }
    }

    /// Volume: exact for analytic variants, Monte Carlo (dim ≤ 4) for
    /// H-polytopes.
    pub fn volume(&self, rng: &mut LabRng) -> Result<VolumeEstimate> {
        match self {
            ConvexBody::HPolytope { .. } => {
                let n = self.dim();
                if n > 4 {
                    return Err(LabError::unsupported(
                        "H-polytope volume estimation limited to dim <= 4",
                    ));
                }
                self.mc_volume(rng, 200_000)
            }
            _ => Ok(VolumeEstimate {
                value: self.log_volume()?.exp(),
                std_error: 0.0,
            }),
        }
    }

    fn mc_volume(&self, rng: &mut LabRng, m: usize) -> Result<VolumeEstimate> {
        // explore extent with hit-and-run, then rejection-sample a padded box
        let n = self.dim();
        let mut chain = HitAndRun::new(self, rng)?;
        let mut lo = DVector::from_element(n, f64::INFINITY);
        let mut hi = DVector::from_element(n, f64::NEG_INFINITY);
        for _ in 0..2_000 {
            let x = chain.next_sample(rng);
            for i in 0..n {
                lo[i] = lo[i].min(x[i]);
                hi[i] = hi[i].max(x[i]);
            }
        }
        for i in 0..n {
            let pad = 0.5 * (hi[i] - lo[i]).max(1e-6);
            lo[i] -= pad;
            hi[i] += pad;
        }
        let box_vol: f64 = (0..n).map(|i| hi[i] - lo[i]).product();
        let mut hits = 0usize;
        let mut x = vec![0.0; n];
        for _ in 0..m {
            for i in 0..n {
                x[i] = rng.random_range(lo[i]..hi[i]);
            }
            if self.contains(&x) {
                hits += 1;
            }
        }
        let p = hits as f64 / m as f64;
        let se = (p * (1.0 - p) / m as f64).sqrt();
        Ok(VolumeEstimate {
            value: p * box_vol,
            std_error: se * box_vol,
        })
    }

    /// One exact uniform sample (direct constructions); H-polytopes go
    /// through a fresh hit-and-run chain and should prefer `sampler()`.
    pub fn sample_uniform(&self, rng: &mut LabRng) -> Result<Vec<f64>> {
        match self {
            ConvexBody::HPolytope { .. } => {
                let mut chain = HitAndRun::new(self, rng)?;
                Ok(chain.next_sample(rng))
            }
            _ => Ok(self.sample_direct(rng)),
        }
    }

    pub(crate) fn sample_direct(&self, rng: &mut LabRng) -> Vec<f64> {
        match self {
            ConvexBody::Ball { center, radius } => {
                let n = center.len();
                let mut x: Vec<f64> = (0..n).map(|_| StandardNormal.sample(rng)).collect();
                let norm: f64 = x.iter().map(|v| v * v).sum::<f64>().sqrt();
                let u: f64 = rng.random::<f64>();
                let scale = radius * u.powf(1.0 / n as f64) / norm.max(1e-300);
                for i in 0..n {
                    x[i] = center[i] + x[i] * scale;
                }
                x
            }
            ConvexBody::Box { lower, upper } => lower
                .iter()
                .zip(upper.iter())
                .map(|(l, u)| rng.random_range(*l..*u))
                .collect(),
            ConvexBody::Simplex { vertices } => {
                // Dirichlet(1,..,1) barycentric weights via exponential spacings
                let k = vertices.len();
                let mut e: Vec<f64> = (0..k)
                    .map(|_| -(1.0 - rng.random::<f64>()).ln())
                    .collect();
                let s: f64 = e.iter().sum();
                for w in e.iter_mut() {
                    *w /= s;
                }
                let n = self.dim();
                let mut x = vec![0.0; n];
                for (w, v) in e.iter().zip(vertices.iter()) {
                    for i in 0..n {
                        x[i] += w * v[i];
                    }
                }
                x
            }
            ConvexBody::Ellipsoid { shape, center } => {
                let n = center.len();
                let l = crate::linalg::cholesky_spd(shape).expect("validated at construction");
                let ball = ConvexBody::Ball {
                    center: DVector::zeros(n),
                    radius: 1.0,
                };
                let z = DVector::from_vec(ball.sample_direct(rng));
                let y = &l * z;
                (0..n).map(|i| center[i] + y[i]).collect()
            }
            ConvexBody::HPolytope { .. } => unreachable!("H-polytope uses hit-and-run"),
        }
    }

    /// Reusable sampler; for H-polytopes this owns a burned-in hit-and-run
    /// chain, for the other variants it is the direct construction.
    pub fn sampler(&self, rng: &mut LabRng) -> Result<BodySampler<'_>> {
        match self {
            ConvexBody::HPolytope { .. } => Ok(BodySampler {
                body: self,
                chain: Some(HitAndRun::new(self, rng)?),
            }),
            _ => Ok(BodySampler {
                body: self,
                chain: None,
            }),
        }
    }

    /// Exact affine image T x + shift. Boxes map to H-polytopes under
    /// non-diagonal linear parts; balls become ellipsoids.
    pub fn affine_image(&self, linear: &DMatrix<f64>, shift: &DVector<f64>) -> Result<ConvexBody> {
        let n = self.dim();
        if linear.ncols() != n || shift.len() != linear.nrows() || linear.nrows() != n {
            return Err(LabError::invalid("affine map dimension mismatch"));
        }
        let scalar = scalar_multiple(linear);
        match self {
            ConvexBody::Ball { center, radius } => {
                let new_center = linear * center + shift;
                if let Some(s) = scalar {
                    Ok(ConvexBody::Ball {
                        center: new_center,
                        radius: radius * s.abs(),
                    })
                } else {
                    // shape M = r² T Tᵀ
                    let m = linear * linear.transpose() * (radius * radius);
                    Ok(ConvexBody::Ellipsoid {
                        shape: m,
                        center: new_center,
                    })
                }
            }
            ConvexBody::Box { lower, upper } => {
                if crate::linalg::is_diagonal(linear, 1e-14) {
                    let mut lo = DVector::zeros(n);
                    let mut hi = DVector::zeros(n);
                    for i in 0..n {
                        let a = linear[(i, i)] * lower[i] + shift[i];
                        let b = linear[(i, i)] * upper[i] + shift[i];
                        lo[i] = a.min(b);
                        hi[i] = a.max(b);
                    }
                    Ok(ConvexBody::Box { lower: lo, upper: hi })
                } else {
                    // box H-rep {±e_iᵀ x ≤ u_i / -l_i} mapped through the inverse
                    let inv = linear
                        .clone()
                        .try_inverse()
                        .ok_or_else(|| LabError::invalid("singular linear part"))?;
                    let mut a = DMatrix::zeros(2 * n, n);
                    let mut b = DVector::zeros(2 * n);
                    for i in 0..n {
                        for j in 0..n {
                            a[(i, j)] = inv[(i, j)];
                            a[(n + i, j)] = -inv[(i, j)];
                        }
                        let corr = inv.row(i).transpose().dot(shift);
                        b[i] = upper[i] + corr;
                        b[n + i] = -(lower[i] + corr);
                    }
                    Ok(ConvexBody::HPolytope { a, b })
                }
            }
            ConvexBody::Simplex { vertices } => Ok(ConvexBody::Simplex {
                vertices: vertices.iter().map(|v| linear * v + shift).collect(),
            }),
            ConvexBody::Ellipsoid { shape, center } => Ok(ConvexBody::Ellipsoid {
                shape: linear * shape * linear.transpose(),
                center: linear * center + shift,
            }),
            ConvexBody::HPolytope { a, b } => {
                let inv = linear
                    .clone()
                    .try_inverse()
                    .ok_or_else(|| LabError::invalid("singular linear part"))?;
                let new_a = a * &inv;
                let corr = &new_a * shift;
                Ok(ConvexBody::HPolytope {
                    a: new_a,
                    b: b + corr,
                })
            }
        }
    }

    pub fn translate(&self, shift: &DVector<f64>) -> ConvexBody {
        let n = self.dim();
        self.affine_image(&DMatrix::identity(n, n), shift)
            .expect("identity map is always valid")
    }
}

/// Scalar λ with T = λ I, if the linear part is a scalar multiple of the
/// identity.
fn scalar_multiple(linear: &DMatrix<f64>) -> Option<f64> {
    let s = linear[(0, 0)];
    let tol = 1e-14 * s.abs().max(1.0);
    for i in 0..linear.nrows() {
        for j in 0..linear.ncols() {
            let want = if i == j { s } else { 0.0 };
            if (linear[(i, j)] - want).abs() > tol {
                return None;
            }
        }
    }
    Some(s)
}

/// Minkowski sums restricted to pairs with closed-form results.
pub fn minkowski_sum(a: &ConvexBody, b: &ConvexBody) -> Result<ConvexBody> {
    if a.dim() != b.dim() {
        return Err(LabError::invalid("dimension mismatch in Minkowski sum"));
    }
    match (a, b) {
        (
            ConvexBody::Ball { center: c1, radius: r1 },
            ConvexBody::Ball { center: c2, radius: r2 },
        ) => Ok(ConvexBody::Ball {
            center: c1 + c2,
            radius: r1 + r2,
        }),
        (
            ConvexBody::Box { lower: l1, upper: u1 },
            ConvexBody::Box { lower: l2, upper: u2 },
        ) => Ok(ConvexBody::Box {
            lower: l1 + l2,
            upper: u1 + u2,
        }),
        (
            ConvexBody::Ellipsoid { shape: m1, center: c1 },
            ConvexBody::Ellipsoid { shape: m2, center: c2 },
        ) => {
            // homothetic pair: M2 = λ² M1 gives E1 + E2 = (1+λ) E1
            let lam2 = m2[(0, 0)] / m1[(0, 0)];
            if lam2 <= 0.0 || (m2 - m1 * lam2).amax() > 1e-9 * m1.amax() {
                return Err(LabError::unsupported(
                    "Minkowski sum of non-homothetic ellipsoids",
                ));
            }
            let s = 1.0 + lam2.sqrt();
            Ok(ConvexBody::Ellipsoid {
                shape: m1 * (s * s),
                center: c1 + c2,
            })
        }
        (ConvexBody::Ellipsoid { shape, center }, ConvexBody::Ball { center: cb, radius })
        | (ConvexBody::Ball { center: cb, radius }, ConvexBody::Ellipsoid { shape, center }) => {
            // only exact when the ellipsoid is itself a sphere
            let n = shape.nrows();
            let iso = DMatrix::<f64>::identity(n, n) * shape[(0, 0)];
            if (shape - &iso).amax() > 1e-12 * shape.amax() {
                return Err(LabError::unsupported(
                    "Minkowski sum of a ball with a non-spherical ellipsoid",
                ));
            }
            Ok(ConvexBody::Ball {
                center: center + cb,
                radius: shape[(0, 0)].sqrt() + radius,
            })
        }
        _ => Err(LabError::unsupported(
            "Minkowski sum restricted to ball/ball, box/box, homothetic ellipsoids",
        )),
    }
}

/// Uniform sampler handle; keeps hit-and-run chain state for polytopes.
pub struct BodySampler<'a> {
    body: &'a ConvexBody,
    chain: Option<HitAndRun<'a>>,
}

impl BodySampler<'_> {
    pub fn sample(&mut self, rng: &mut LabRng) -> Vec<f64> {
        match &mut self.chain {
            Some(chain) => chain.next_sample(rng),
            None => self.body.sample_direct(rng),
        }
    }
}

/// Hit-and-run chain over an H-polytope.
struct HitAndRun<'a> {
    a: &'a DMatrix<f64>,
    b: &'a DVector<f64>,
    x: DVector<f64>,
}

impl<'a> HitAndRun<'a> {
    fn new(body: &'a ConvexBody, rng: &mut LabRng) -> Result<Self> {
        let (a, b) = match body {
            ConvexBody::HPolytope { a, b } => (a, b),
            _ => return Err(LabError::invalid("hit-and-run needs an H-polytope")),
        };
        let x = interior_point(a, b)?;
        let mut chain = HitAndRun { a, b, x };
        let burnin = HIT_AND_RUN_BURNIN_PER_DIM * a.ncols();
        for _ in 0..burnin {
            chain.step(rng);
        }
        Ok(chain)
    }

    fn step(&mut self, rng: &mut LabRng) {
        let n = self.a.ncols();
        let mut dir = DVector::from_iterator(n, (0..n).map(|_| -> f64 { StandardNormal.sample(rng) }));
        let norm = dir.norm();
        if norm < 1e-300 {
            return;
        }
        dir /= norm;
        let ax = self.a * &self.x;
        let ad = self.a * &dir;
        let mut t_lo = f64::NEG_INFINITY;
        let mut t_hi = f64::INFINITY;
        for i in 0..self.b.len() {
            let slack = self.b[i] - ax[i];
            if ad[i] > 1e-14 {
                t_hi = t_hi.min(slack / ad[i]);
            } else if ad[i] < -1e-14 {
                t_lo = t_lo.max(slack / ad[i]);
            }
        }
        if !(t_lo.is_finite() && t_hi.is_finite()) || t_hi <= t_lo {
            return;
        }
        let t = rng.random_range(t_lo..t_hi);
        self.x += dir * t;
    }

    fn next_sample(&mut self, rng: &mut LabRng) -> Vec<f64> {
        for _ in 0..HIT_AND_RUN_THIN {
            self.step(rng);
        }
        self.x.iter().copied().collect()
    }
}

/// Phase-one search: maximize the minimum row slack by subgradient steps.
fn interior_point(a: &DMatrix<f64>, b: &DVector<f64>) -> Result<DVector<f64>> {
    let n = a.ncols();
    let rows = a.nrows();
    let row_norms: Vec<f64> = (0..rows).map(|i| a.row(i).norm().max(1e-300)).collect();
    let mut x = DVector::zeros(n);
    let mut best = f64::NEG_INFINITY;
    let mut best_x = x.clone();
    let mut step = 1.0;
    for iter in 0..2_000 {
        let ax = a * &x;
        let (mut min_slack, mut min_row) = (f64::INFINITY, 0);
        for i in 0..rows {
            let s = (b[i] - ax[i]) / row_norms[i];
            if s < min_slack {
                min_slack = s;
                min_row = i;
            }
        }
        if min_slack > best {
            best = min_slack;
            best_x = x.clone();
        }
        if best > 1e-7 && iter > 50 {
            break;
        }
        let g = a.row(min_row).transpose() / row_norms[min_row];
        x -= g * step;
        step *= 0.995;
    }
    if best <= 0.0 {
        return Err(LabError::InfeasibleBody(
            "no strictly interior point found".into(),
        ));
    }
    Ok(best_x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Streams;
    use approx::assert_relative_eq;

    #[test]
    fn unit_volume_ball_radii() {
        // ω1 = 2, ω2 = π, ω3 = 4π/3
        let r = |n: usize| match unit_volume_ball(n).unwrap() {
            ConvexBody::Ball { radius, .. } => radius,
            _ => unreachable!(),
        };
        assert_relative_eq!(r(1), 0.5, epsilon = 1e-12);
        assert_relative_eq!(r(2), 0.5641895835477563, epsilon = 1e-12);
        assert_relative_eq!(r(3), 0.6203504908994001, epsilon = 1e-12);
        assert!(unit_volume_ball(0).is_err());
    }

    #[test]
    fn unit_volume_ball_has_volume_one_up_to_n64() {
        for n in 1..=64 {
            let b = unit_volume_ball(n).unwrap();
            let v = b.log_volume().unwrap().exp();
            assert!((v - 1.0).abs() < 1e-12, "n={n} v={v}");
        }
    }

    #[test]
    fn analytic_volumes() {
        let mut rng = Streams::new(1).rng("vol");
        let cube = ConvexBody::cube(3).unwrap();
        assert_relative_eq!(cube.volume(&mut rng).unwrap().value, 1.0, epsilon = 1e-12);
        let disk = ConvexBody::ball(DVector::zeros(2), 1.0).unwrap();
        assert_relative_eq!(
            disk.volume(&mut rng).unwrap().value,
            std::f64::consts::PI,
            epsilon = 1e-12
        );
        let box3 = ConvexBody::boxed(DVector::zeros(3), DVector::from_element(3, 2.0)).unwrap();
        assert_relative_eq!(box3.volume(&mut rng).unwrap().value, 8.0, epsilon = 1e-12);
        let simplex = ConvexBody::standard_simplex(3).unwrap();
        assert_relative_eq!(
            simplex.volume(&mut rng).unwrap().value,
            1.0 / 6.0,
            epsilon = 1e-12
        );
    }

    #[test]
    fn samples_satisfy_membership() {
        let mut rng = Streams::new(2).rng("members");
        let bodies = [
            unit_volume_ball(4).unwrap(),
            ConvexBody::cube(4).unwrap(),
            ConvexBody::standard_simplex(3).unwrap(),
            ConvexBody::ellipsoid(
                DMatrix::from_row_slice(2, 2, &[2.0, 0.3, 0.3, 1.0]),
                DVector::from_vec(vec![1.0, -1.0]),
            )
            .unwrap(),
        ];
        for body in &bodies {
            for _ in 0..10_000 {
                let x = body.sample_uniform(&mut rng).unwrap();
                assert!(body.contains(&x));
            }
        }
    }

    #[test]
    fn box_sample_mean_is_center() {
        let mut rng = Streams::new(3).rng("boxmean");
        let body = ConvexBody::cube(2).unwrap();
        let m = 100_000;
        let mut mean = [0.0; 2];
        for _ in 0..m {
            let x = body.sample_direct(&mut rng);
            mean[0] += x[0];
            mean[1] += x[1];
        }
        let se = (1.0 / 12.0f64 / m as f64).sqrt();
        for v in mean {
            assert!((v / m as f64 - 0.5).abs() < 3.0 * se);
        }
    }

    #[test]
    fn simplex_samples_in_standard_simplex() {
        let mut rng = Streams::new(4).rng("simplex");
        let body = ConvexBody::standard_simplex(2).unwrap();
        for _ in 0..1_000 {
            let x = body.sample_direct(&mut rng);
            assert!(x.iter().all(|v| *v >= 0.0));
            assert!(x.iter().sum::<f64>() <= 1.0 + 1e-12);
        }
    }

    #[test]
    fn minkowski_closed_forms() {
        let cube = ConvexBody::cube(2).unwrap();
        let sum = minkowski_sum(&cube, &cube).unwrap();
        match &sum {
            ConvexBody::Box { lower, upper } => {
                assert_eq!(lower.as_slice(), &[0.0, 0.0]);
                assert_eq!(upper.as_slice(), &[2.0, 2.0]);
            }
            _ => panic!("expected box"),
        }
        assert_relative_eq!(sum.log_volume().unwrap().exp(), 4.0, epsilon = 1e-12);

        let b1 = ConvexBody::ball(DVector::zeros(3), 1.0).unwrap();
        let b2 = ConvexBody::ball(DVector::zeros(3), 2.5).unwrap();
        match minkowski_sum(&b1, &b2).unwrap() {
            ConvexBody::Ball { radius, .. } => assert_relative_eq!(radius, 3.5),
            _ => panic!("expected ball"),
        }

        let i1 = ConvexBody::boxed(DVector::zeros(1), DVector::from_element(1, 1.0)).unwrap();
        let i2 = ConvexBody::boxed(DVector::zeros(1), DVector::from_element(1, 3.0)).unwrap();
        match minkowski_sum(&i1, &i2).unwrap() {
            ConvexBody::Box { upper, .. } => assert_relative_eq!(upper[0], 4.0),
            _ => panic!("expected interval"),
        }

        let simplex = ConvexBody::standard_simplex(2).unwrap();
        assert!(minkowski_sum(&simplex, &cube).is_err());
    }

    #[test]
    fn brunn_minkowski_on_analytic_pairs() {
        let pairs = [
            (
                ConvexBody::cube(3).unwrap(),
                ConvexBody::boxed(DVector::zeros(3), DVector::from_element(3, 2.0)).unwrap(),
            ),
            (
                ConvexBody::ball(DVector::zeros(3), 1.0).unwrap(),
                ConvexBody::ball(DVector::zeros(3), 0.4).unwrap(),
            ),
        ];
        for (a, b) in &pairs {
            let n = a.dim() as f64;
            let s = minkowski_sum(a, b).unwrap();
            let lhs = (s.log_volume().unwrap() / n).exp();
            let rhs =
                (a.log_volume().unwrap() / n).exp() + (b.log_volume().unwrap() / n).exp();
            assert!(lhs >= rhs - 1e-9, "lhs {lhs} rhs {rhs}");
        }
    }

    #[test]
    fn hpolytope_hit_and_run_matches_box_moments() {
        // [0,1] x [0,2] as an H-polytope
        let a = DMatrix::from_row_slice(4, 2, &[1.0, 0.0, -1.0, 0.0, 0.0, 1.0, 0.0, -1.0]);
        let b = DVector::from_vec(vec![1.0, 0.0, 2.0, 0.0]);
        let body = ConvexBody::hpolytope(a, b).unwrap();
        let mut rng = Streams::new(5).rng("har");
        let mut sampler = body.sampler(&mut rng).unwrap();
        let m = 4_000;
        let mut mean = [0.0; 2];
        for _ in 0..m {
            let x = sampler.sample(&mut rng);
            assert!(body.contains(&x));
            mean[0] += x[0];
            mean[1] += x[1];
        }
        // 4 SE slack for MCMC correlation
        let se1 = (1.0 / 12.0f64 / m as f64).sqrt() * 4.0;
        let se2 = (4.0 / 12.0f64 / m as f64).sqrt() * 4.0;
        assert!((mean[0] / m as f64 - 0.5).abs() < 4.0 * se1);
        assert!((mean[1] / m as f64 - 1.0).abs() < 4.0 * se2);
    }

    #[test]
    fn hpolytope_mc_volume() {
        let a = DMatrix::from_row_slice(4, 2, &[1.0, 0.0, -1.0, 0.0, 0.0, 1.0, 0.0, -1.0]);
        let b = DVector::from_vec(vec![1.0, 0.0, 1.0, 0.0]);
        let body = ConvexBody::hpolytope(a, b).unwrap();
        let mut rng = Streams::new(6).rng("mcvol");
        let est = body.volume(&mut rng).unwrap();
        assert!((est.value - 1.0).abs() < 4.0 * est.std_error.max(3e-3));
    }

    #[test]
    fn affine_images_stay_exact() {
        let cube = ConvexBody::cube(2).unwrap();
        let rot = DMatrix::from_row_slice(2, 2, &[0.6, -0.8, 0.8, 0.6]);
        let shift = DVector::from_vec(vec![1.0, 2.0]);
        let img = cube.affine_image(&rot, &shift).unwrap();
        let mut rng = Streams::new(7).rng("aff");
        for _ in 0..2_000 {
            let x = cube.sample_direct(&mut rng);
            let y = [
                0.6 * x[0] - 0.8 * x[1] + 1.0,
                0.8 * x[0] + 0.6 * x[1] + 2.0,
            ];
            assert!(img.contains(&y));
        }
        let ball = unit_volume_ball(2).unwrap();
        match ball.affine_image(&rot, &shift).unwrap() {
            // rotation is orthogonal but not scalar, so this lands on the
            // ellipsoid representation with the same volume
            ConvexBody::Ellipsoid { shape, .. } => {
                let v = (log_unit_ball_volume(2) + 0.5 * crate::linalg::log_det_spd(&shape).unwrap()).exp();
                assert_relative_eq!(v, 1.0, epsilon = 1e-9);
            }
            _ => panic!("expected ellipsoid"),
        }
    }
}
