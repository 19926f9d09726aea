//! The individual inequality checkers.

use nalgebra::DMatrix;
use serde::Serialize;
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::convolution::{convolve, convolve_all, Model};
use crate::entropy::{
    best_entropy, entropy_power, entropy_power_se, information_content, plugin_entropy,
    relative_entropy_to_gaussian, sum_entropy, EntropyEstimate, SumEntropyOpts,
};
use crate::error::{LabError, Result};
use crate::geometry::{minkowski_sum, ConvexBody};
use crate::rng::{child_streams, pairwise_sum, par_chunk_map, LabRng};
use crate::zoo::{max_density, uniform_body_model, DensityModel};

use super::{InequalityReport, STAT_SLACK_MULT};

const LN_2PIE: f64 = 2.8378770664093453;

fn require_log_concave(model: &DensityModel) -> Result<()> {
    if !model.is_log_concave() {
        return Err(LabError::unsupported(format!(
            "{} is not known to be log-concave (kappa >= 0 required)",
            model.name()
        )));
    }
    Ok(())
}

fn entropy_and_max_density(
    model: &DensityModel,
    rng: &mut LabRng,
    m: usize,
) -> Result<(EntropyEstimate, f64, bool)> {
    let h = if let Some(h) = model.analytic_entropy() {
        EntropyEstimate::analytic(h)
    } else {
        plugin_entropy(model, rng, m)?
    };
    let (maxd, maxd_exact) = match model.analytic_max_density() {
        Some(v) => (v, true),
        None => (max_density(model, rng, 4_000)?.value, false),
    };
    let analytic = h.std_error == 0.0 && maxd_exact;
    Ok((h, maxd, analytic))
}

/// Two-sided entropy vs max-density bound:
/// log ∥f∥∞^{−1/n} ≤ h/n ≤ 1 + log ∥f∥∞^{−1/n}.
pub fn check_entropy_sandwich(
    model: &DensityModel,
    rng: &mut LabRng,
    m: usize,
) -> Result<[InequalityReport; 2]> {
    require_log_concave(model)?;
    let n = model.dim() as f64;
    let (h, maxd, analytic) = entropy_and_max_density(model, rng, m)?;
    let level = -maxd.ln() / n;
    let h_per_n = h.value / n;
    let h_se = h.std_error / n;
    let make = |name: String, lhs: f64, lhs_se: f64, rhs: f64, rhs_se: f64| {
        let rep = if analytic {
            InequalityReport::analytic(name, lhs, rhs)
        } else {
            InequalityReport::stat(name, lhs, lhs_se, rhs, rhs_se)
        };
        rep.with_param("model", model.name())
            .with_param("n", model.dim())
            .with_param("lower_gap", h_per_n - level)
            .with_param("upper_gap", 1.0 + level - h_per_n)
    };
    Ok([
        make(
            format!("sandwich-lower/{}", model.name()),
            level,
            0.0,
            h_per_n,
            h_se,
        ),
        make(
            format!("sandwich-upper/{}", model.name()),
            h_per_n,
            h_se,
            1.0 + level,
            0.0,
        ),
    ])
}

/// Gaussian comparison form of the same bound: the Gaussian Z matching the
/// model's max density satisfies h(Z)/n − ½ ≤ h(X)/n ≤ h(Z)/n + ½.
pub fn check_gaussian_sandwich(
    model: &DensityModel,
    rng: &mut LabRng,
    m: usize,
) -> Result<[InequalityReport; 2]> {
    require_log_concave(model)?;
    let n = model.dim() as f64;
    let (h, maxd, analytic) = entropy_and_max_density(model, rng, m)?;
    // (2πσ²)^{-n/2} = ∥f∥∞  ⇒  σ² = (2π)^{-1} ∥f∥∞^{-2/n}
    let sigma2 = (-2.0 * maxd.ln() / n).exp() / (2.0 * std::f64::consts::PI);
    let h_z_per_n = 0.5 * (LN_2PIE + sigma2.ln());
    let h_per_n = h.value / n;
    let h_se = h.std_error / n;
    let make = |name: String, lhs: f64, lhs_se: f64, rhs: f64, rhs_se: f64| {
        let rep = if analytic {
            InequalityReport::analytic(name, lhs, rhs)
        } else {
            InequalityReport::stat(name, lhs, lhs_se, rhs, rhs_se)
        };
        rep.with_param("model", model.name())
            .with_param("n", model.dim())
            .with_param("matched_sigma2", sigma2)
    };
    Ok([
        make(
            format!("gaussian-sandwich-lower/{}", model.name()),
            h_z_per_n - 0.5,
            0.0,
            h_per_n,
            h_se,
        ),
        make(
            format!("gaussian-sandwich-upper/{}", model.name()),
            h_per_n,
            h_se,
            h_z_per_n + 0.5,
            0.0,
        ),
    ])
}

/// Tail profile of the information content around the entropy.
#[derive(Clone, Debug, Serialize)]
pub struct ConcentrationProfile {
    pub model: String,
    pub n: usize,
    pub m: usize,
    pub entropy: f64,
    pub eps_grid: Vec<f64>,
    pub empirical_tail: Vec<f64>,
    pub tail_se: Vec<f64>,
    /// 4·exp(−ε²n/16) at each grid point.
    pub bound: Vec<f64>,
    /// Exact chi-square tail for Gaussian models.
    pub oracle_tail: Option<Vec<f64>>,
}

/// Empirical P{|h̃/n − h/n| ≥ ε} over the grid, with the exponential bound
/// and (for Gaussians) the exact chi-square oracle attached. Also returns
/// one bound report per grid point, plus oracle-agreement reports when the
/// oracle exists.
pub fn concentration_profile(
    model: &DensityModel,
    rng: &mut LabRng,
    m: usize,
    eps_grid: &[f64],
) -> Result<(ConcentrationProfile, Vec<InequalityReport>)> {
    require_log_concave(model)?;
    if eps_grid.iter().any(|e| !(0.0..=2.0).contains(e)) {
        return Err(LabError::invalid(
            "concentration grid must lie in [0, 2] (stated range of the bound)",
        ));
    }
    let n = model.dim();
    let h = match model.analytic_entropy() {
        Some(h) => h,
        None => plugin_entropy(model, rng, m)?.value,
    };
    let h_per_n = h / n as f64;
    let streams = child_streams(rng);
    let grid = eps_grid.to_vec();
    let counts = par_chunk_map(&streams, 0, m, |chunk_rng, len| {
        let mut exceed = vec![0.0f64; grid.len()];
        let mut x = vec![0.0; n];
        for _ in 0..len {
            model.sample_into(chunk_rng, &mut x);
            let dev = (information_content(model, &x) / n as f64 - h_per_n).abs();
            for (j, e) in grid.iter().enumerate() {
                if dev >= *e {
                    exceed[j] += 1.0;
                }
            }
        }
        exceed
    });
    let mut empirical = Vec::with_capacity(grid.len());
    let mut tail_se = Vec::with_capacity(grid.len());
    for j in 0..grid.len() {
        let col: Vec<f64> = counts.iter().map(|c| c[j]).collect();
        let p = pairwise_sum(&col) / m as f64;
        empirical.push(p);
        tail_se.push((p * (1.0 - p) / m as f64).sqrt());
    }
    let bound: Vec<f64> = grid
        .iter()
        .map(|e| 4.0 * (-e * e * n as f64 / 16.0).exp())
        .collect();
    let oracle_tail = model.as_gaussian().map(|_| {
        let chi2 = ChiSquared::new(n as f64).expect("n >= 1");
        grid.iter()
            .map(|e| {
                let lo = n as f64 * (1.0 - 2.0 * e);
                let hi = n as f64 * (1.0 + 2.0 * e);
                let low = if lo > 0.0 { chi2.cdf(lo) } else { 0.0 };
                low + (1.0 - chi2.cdf(hi))
            })
            .collect::<Vec<f64>>()
    });
    let mut reports = Vec::new();
    for (j, e) in grid.iter().enumerate() {
        reports.push(
            InequalityReport::stat(
                format!("concentration/{}/eps={e}", model.name()),
                empirical[j],
                tail_se[j],
                bound[j],
                0.0,
            )
            .with_param("model", model.name())
            .with_param("n", n)
            .with_param("m", m)
            .with_param("eps", e)
            .with_param("bound_ratio", empirical[j] / bound[j].max(1e-300)),
        );
        if let Some(oracle) = &oracle_tail {
            // binomial SE under the oracle tail (sound when hits are rare)
            let p_bar = empirical[j].max(oracle[j]);
            let se = (p_bar * (1.0 - p_bar) / m as f64).sqrt();
            reports.push(
                InequalityReport::stat(
                    format!("concentration-oracle/{}/eps={e}", model.name()),
                    (empirical[j] - oracle[j]).abs(),
                    se,
                    0.0,
                    0.0,
                )
                .with_param("model", model.name())
                .with_param("n", n)
                .with_param("eps", e)
                .with_param("oracle", oracle[j]),
            );
        }
    }
    Ok((
        ConcentrationProfile {
            model: model.name().to_string(),
            n,
            m,
            entropy: h,
            eps_grid: grid,
            empirical_tail: empirical,
            tail_se,
            bound,
            oracle_tail,
        },
        reports,
    ))
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct TypicalSetMass {
    pub mass: f64,
    pub std_error: f64,
}

/// Fraction of samples whose density lies in the band
/// [e^{−h−nε}, e^{−h+nε}]; equals 1 − tail(ε).
pub fn typical_set_mass(
    model: &DensityModel,
    rng: &mut LabRng,
    m: usize,
    eps: f64,
) -> Result<TypicalSetMass> {
    let (profile, _) = concentration_profile(model, rng, m, &[eps])?;
    Ok(TypicalSetMass {
        mass: 1.0 - profile.empirical_tail[0],
        std_error: profile.tail_se[0],
    })
}

/// Entropy of a Gaussian sum by covariance addition.
pub fn gaussian_sum_entropy(covs: &[&DMatrix<f64>]) -> Result<f64> {
    let n = covs[0].nrows();
    let mut total = DMatrix::zeros(n, n);
    for c in covs {
        total += *c;
    }
    Ok(0.5 * n as f64 * LN_2PIE + 0.5 * crate::linalg::log_det_spd(&total)?)
}

/// Submodularity of entropy under convolution:
/// h(X+Y+Z) + h(Z) ≤ h(X+Z) + h(Y+Z).
pub fn check_submodularity(
    mx: &DensityModel,
    my: &DensityModel,
    mz: &DensityModel,
    rng: &mut LabRng,
    m_outer: usize,
    m_inner: usize,
) -> Result<InequalityReport> {
    let n = mx.dim();
    if my.dim() != n || mz.dim() != n {
        return Err(LabError::invalid("submodularity needs equal dimensions"));
    }
    let all_gaussian = [mx, my, mz].iter().all(|m| m.as_gaussian().is_some());
    if all_gaussian {
        let cx = mx.covariance().unwrap();
        let cy = my.covariance().unwrap();
        let cz = mz.covariance().unwrap();
        let lhs = gaussian_sum_entropy(&[cx, cy, cz])? + gaussian_sum_entropy(&[cz])?;
        let rhs = gaussian_sum_entropy(&[cx, cz])? + gaussian_sum_entropy(&[cy, cz])?;
        return Ok(InequalityReport::analytic(
            format!("submodularity/{}+{}+{}", mx.name(), my.name(), mz.name()),
            lhs,
            rhs,
        )
        .with_param("n", n)
        .with_param("path", "analytic"));
    }
    let opts = SumEntropyOpts {
        m_outer,
        m_inner,
        ..Default::default()
    };
    let h_xyz = sum_entropy(
        &convolve_all(vec![mx.clone(), my.clone(), mz.clone()])?,
        rng,
        &opts,
    )?;
    let h_z = best_entropy(&Model::Density(mz.clone()), rng, m_outer, &opts)?;
    let h_xz = sum_entropy(&convolve(mx.clone(), mz.clone())?, rng, &opts)?;
    let h_yz = sum_entropy(&convolve(my.clone(), mz.clone())?, rng, &opts)?;
    let lhs = h_xyz.value + h_z.value;
    let lhs_se = h_xyz.combined_se(&h_z);
    let rhs = h_xz.value + h_yz.value;
    let rhs_se = h_xz.combined_se(&h_yz);
    Ok(InequalityReport::stat(
        format!("submodularity/{}+{}+{}", mx.name(), my.name(), mz.name()),
        lhs,
        lhs_se,
        rhs,
        rhs_se,
    )
    .with_param("n", n)
    .with_param("m_outer", m_outer)
    .with_param("m_inner", m_inner)
    .with_param("path", "mc"))
}

/// Entropy power inequality N(X+Y) ≥ N(X) + N(Y).
pub fn check_epi(
    mx: &DensityModel,
    my: &DensityModel,
    rng: &mut LabRng,
    m: usize,
) -> Result<InequalityReport> {
    let n = mx.dim();
    if my.dim() != n {
        return Err(LabError::invalid("EPI needs equal dimensions"));
    }
    let opts = SumEntropyOpts {
        m_outer: m,
        ..Default::default()
    };
    let h_x = best_entropy(&Model::Density(mx.clone()), rng, m, &opts)?;
    let h_y = best_entropy(&Model::Density(my.clone()), rng, m, &opts)?;
    let conv = convolve(mx.clone(), my.clone())?;
    let h_sum = sum_entropy(&conv, rng, &opts)?;
    let n_x = entropy_power(h_x.value, n);
    let n_y = entropy_power(h_y.value, n);
    let n_sum = entropy_power(h_sum.value, n);
    let se_x = entropy_power_se(n_x, h_x.std_error, n);
    let se_y = entropy_power_se(n_y, h_y.std_error, n);
    let se_sum = entropy_power_se(n_sum, h_sum.std_error, n);
    let analytic = se_x == 0.0 && se_y == 0.0 && se_sum == 0.0 && h_sum.std_error == 0.0;
    let name = format!("epi/{}+{}", mx.name(), my.name());
    let rep = if analytic && h_sum.bias_note.is_none() {
        InequalityReport::analytic(name, n_x + n_y, n_sum)
    } else {
        InequalityReport::stat(
            name,
            n_x + n_y,
            (se_x * se_x + se_y * se_y).sqrt(),
            n_sum,
            se_sum,
        )
    };
    Ok(rep
        .with_param("n", n)
        .with_param("m", m)
        .with_param("power_ratio", n_sum / (n_x + n_y))
        .with_param("sum_method", format!("{:?}", h_sum.method)))
}

/// Entropy lower bound for κ-concave mass on a convex body:
/// h(X) ≥ log|A| + n log(κn).
pub fn check_kappa_entropy_lower(
    model: &Model,
    body: &ConvexBody,
    kappa: f64,
    rng: &mut LabRng,
    m: usize,
) -> Result<InequalityReport> {
    let n = model.dim();
    if !(kappa > 0.0 && kappa <= 1.0 / n as f64) {
        return Err(LabError::invalid(format!(
            "kappa must lie in (0, 1/n], got {kappa} at n={n}"
        )));
    }
    // witnessed support containment
    for _ in 0..500 {
        let x = model.sample(rng);
        if !body.contains(&x) {
            return Err(LabError::invalid(format!(
                "{} has mass outside the stated body",
                model.name()
            )));
        }
    }
    let log_vol = body.log_volume()?;
    let lhs = log_vol + n as f64 * (kappa * n as f64).ln();
    let opts = SumEntropyOpts {
        m_outer: m,
        ..Default::default()
    };
    let h = best_entropy(model, rng, m, &opts)?;
    Ok(InequalityReport::stat(
        format!("kappa-lower/{}", model.name()),
        lhs,
        0.0,
        h.value,
        h.std_error,
    )
    .with_param("n", n)
    .with_param("kappa", kappa)
    .with_param("log_volume", log_vol)
    .with_param("entropy_method", format!("{:?}", h.method)))
}

/// Entropy form of reverse Brunn–Minkowski for uniform draws on two bodies:
/// h(X₁+X₂) ≥ log|A₁+A₂| − n log 2.
pub fn check_reverse_bm(
    body1: &ConvexBody,
    body2: &ConvexBody,
    rng: &mut LabRng,
    m: usize,
) -> Result<InequalityReport> {
    let n = body1.dim();
    let sum_body = minkowski_sum(body1, body2)?;
    let lhs = sum_body.log_volume()? - n as f64 * 2.0f64.ln();
    let u1 = uniform_body_model(body1.clone())?;
    let u2 = uniform_body_model(body2.clone())?;
    let conv = convolve(u1, u2)?;
    let opts = SumEntropyOpts {
        m_outer: m,
        ..Default::default()
    };
    let h = sum_entropy(&conv, rng, &opts)?;
    Ok(InequalityReport::stat(
        format!("reverse-bm/{}", conv.name()),
        lhs,
        0.0,
        h.value,
        h.std_error,
    )
    .with_param("n", n)
    .with_param("m", m)
    .with_param("sum_log_volume", sum_body.log_volume()?)
    .with_param("entropy_method", format!("{:?}", h.method)))
}

/// One row of the relative-entropy-from-Gaussianity scan.
#[derive(Clone, Debug, Serialize)]
pub struct ScanRow {
    pub model: String,
    pub n: usize,
    pub d_per_n: f64,
    pub d_se_per_n: f64,
    pub bound: f64,
    pub flagged: bool,
}

/// D(f)/n per model against the desk bound ¼ log n + c.
pub fn hyperplane_scan(
    models: &[DensityModel],
    rng: &mut LabRng,
    m: usize,
    c_desk: f64,
) -> Result<(Vec<ScanRow>, Vec<InequalityReport>)> {
    let mut rows = Vec::with_capacity(models.len());
    let mut reports = Vec::with_capacity(models.len());
    for model in models {
        require_log_concave(model)?;
        let n = model.dim();
        let d = relative_entropy_to_gaussian(model, rng, m)?;
        let d_per_n = d.value / n as f64;
        let d_se = d.std_error / n as f64;
        let bound = 0.25 * (n as f64).ln() + c_desk;
        let report = InequalityReport::stat(
            format!("hyperplane/{}", model.name()),
            d_per_n,
            d_se,
            bound,
            0.0,
        )
        .with_param("model", model.name())
        .with_param("n", n)
        .with_param("m", m)
        .with_param("c_desk", c_desk);
        rows.push(ScanRow {
            model: model.name().to_string(),
            n,
            d_per_n,
            d_se_per_n: d_se,
            bound,
            flagged: d_per_n > bound + STAT_SLACK_MULT * d_se,
        });
        reports.push(report);
    }
    Ok((rows, reports))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::convolution::kappa_convolution;
    use crate::geometry::unit_volume_ball;
    use crate::rng::Streams;
    use crate::zoo;
    use approx::assert_relative_eq;

    #[test]
    fn sandwich_exponential_attains_upper_bound() {
        let mut rng = Streams::new(80).rng("sw-exp");
        for n in [1usize, 4, 16] {
            let model = zoo::exponential_product(n, 1.0).unwrap();
            let [lower, upper] = check_entropy_sandwich(&model, &mut rng, 1_000).unwrap();
            assert!(lower.satisfied && upper.satisfied);
            // h/n = 1, ∥f∥∞ = 1: upper bound met with equality
            assert_relative_eq!(upper.margin, 0.0, epsilon = 1e-12);
            assert_relative_eq!(lower.margin, 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn sandwich_uniform_attains_lower_bound() {
        let mut rng = Streams::new(81).rng("sw-unif");
        let model = zoo::uniform_cube(8).unwrap();
        let [lower, upper] = check_entropy_sandwich(&model, &mut rng, 1_000).unwrap();
        assert!(lower.satisfied && upper.satisfied);
        assert_relative_eq!(lower.margin, 0.0, epsilon = 1e-12);
        assert_relative_eq!(upper.margin, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn sandwich_gaussian_interior() {
        let mut rng = Streams::new(82).rng("sw-g");
        let model = zoo::gaussian_iso(3, 1.0).unwrap();
        let [lower, upper] = check_entropy_sandwich(&model, &mut rng, 1_000).unwrap();
        // h/n ≈ 1.418939 sits in [0.918939, 1.918939]
        assert_relative_eq!(lower.lhs, 0.9189385332046727, epsilon = 1e-12);
        assert_relative_eq!(lower.rhs, 1.4189385332046727, epsilon = 1e-12);
        assert_relative_eq!(upper.rhs, 1.9189385332046727, epsilon = 1e-12);
        assert!(lower.satisfied && upper.satisfied);
    }

    #[test]
    fn sandwich_estimated_path_agrees_with_analytic() {
        let mut rng = Streams::new(83).rng("sw-est");
        let model = zoo::gaussian_iso(2, 1.0).unwrap();
        let stripped = zoo::strip_analytic(&model);
        let [lower, upper] = check_entropy_sandwich(&stripped, &mut rng, 50_000).unwrap();
        assert!(lower.satisfied && upper.satisfied);
        // estimated h/n close to the analytic value
        let truth = model.analytic_entropy().unwrap() / 2.0;
        assert!((lower.rhs - truth).abs() <= 3.0 * lower.rhs_se + 1e-3);
        assert!(lower.slack > super::super::ANALYTIC_SLACK);
    }

    #[test]
    fn gaussian_sandwich_equalities() {
        let mut rng = Streams::new(84).rng("gsw");
        // the matched Gaussian itself: both gaps are exactly ½
        let g = zoo::gaussian_iso(4, 1.0).unwrap();
        let [lower, upper] = check_gaussian_sandwich(&g, &mut rng, 100).unwrap();
        assert!(lower.satisfied && upper.satisfied);
        assert_relative_eq!(lower.margin, 0.5, epsilon = 1e-12);
        assert_relative_eq!(upper.margin, 0.5, epsilon = 1e-12);
        // Exp^n: upper equality (h/n − h_Z/n = ½)
        let e = zoo::exponential_product(4, 1.0).unwrap();
        let [lower, upper] = check_gaussian_sandwich(&e, &mut rng, 100).unwrap();
        assert_relative_eq!(upper.margin, 0.0, epsilon = 1e-12);
        assert_relative_eq!(lower.margin, 1.0, epsilon = 1e-12);
        // Uniform cube: lower equality
        let u = zoo::uniform_cube(4).unwrap();
        let [lower, upper] = check_gaussian_sandwich(&u, &mut rng, 100).unwrap();
        assert_relative_eq!(lower.margin, 0.0, epsilon = 1e-12);
        assert_relative_eq!(upper.margin, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn concentration_uniform_tail_is_zero() {
        let mut rng = Streams::new(85).rng("conc-u");
        let model = zoo::uniform_cube(4).unwrap();
        let (profile, reports) =
            concentration_profile(&model, &mut rng, 20_000, &[0.25, 0.5, 1.0]).unwrap();
        assert!(profile.empirical_tail.iter().all(|t| *t == 0.0));
        assert!(reports.iter().all(|r| r.satisfied));
    }

    #[test]
    fn concentration_gaussian_matches_chi_square_oracle() {
        let mut rng = Streams::new(86).rng("conc-g");
        let model = zoo::gaussian_iso(16, 1.0).unwrap();
        let eps: Vec<f64> = (1..=8).map(|i| i as f64 * 0.25).collect();
        let (profile, reports) =
            concentration_profile(&model, &mut rng, 100_000, &eps).unwrap();
        let oracle = profile.oracle_tail.as_ref().unwrap();
        // frozen spot value: P{|χ²₁₆/16 − 1| ≥ 0.5} ≈ 0.1406381
        assert_relative_eq!(oracle[0], 0.14063811263302306, epsilon = 1e-8);
        for (j, (emp, ora)) in profile.empirical_tail.iter().zip(oracle.iter()).enumerate() {
            assert!(
                (emp - ora).abs() <= 3.0 * profile.tail_se[j] + 1e-9,
                "eps {}: emp {emp} oracle {ora}",
                profile.eps_grid[j]
            );
        }
        assert!(reports.iter().all(|r| r.satisfied));
    }

    #[test]
    fn concentration_rejects_eps_outside_range() {
        let mut rng = Streams::new(87).rng("conc-bad");
        let model = zoo::gaussian_iso(2, 1.0).unwrap();
        assert!(concentration_profile(&model, &mut rng, 100, &[2.5]).is_err());
    }

    #[test]
    fn typical_set_mass_values() {
        let mut rng = Streams::new(88).rng("typ");
        let cube = zoo::uniform_cube(3).unwrap();
        let t = typical_set_mass(&cube, &mut rng, 10_000, 0.5).unwrap();
        assert_eq!(t.mass, 1.0);
        // any model at ε = 2: mass ≥ 1 − 4e^{−n/4} − 3 SE
        let e = zoo::exponential_product(8, 1.0).unwrap();
        let t = typical_set_mass(&e, &mut rng, 50_000, 2.0).unwrap();
        let floor = 1.0 - 4.0 * (-8.0f64 / 4.0).exp();
        assert!(t.mass >= floor - 3.0 * t.std_error);
    }

    #[test]
    fn submodularity_gaussian_margin_closed_form() {
        let mut rng = Streams::new(89).rng("sub-g");
        let a = zoo::gaussian_iso(1, 1.0).unwrap();
        let b = zoo::gaussian_iso(1, 1.0).unwrap();
        let c = zoo::gaussian_iso(1, 1.0).unwrap();
        let rep = check_submodularity(&a, &b, &c, &mut rng, 100, 16).unwrap();
        assert!(rep.satisfied);
        // margin = ½ log((a+c)(b+c)/((a+b+c)c)) = ½ log(4/3)
        assert_relative_eq!(rep.margin, 0.14384103622589042, epsilon = 1e-12);
    }

    #[test]
    fn submodularity_gaussian_grid_reproduces_variance_identity() {
        let mut rng = Streams::new(90).rng("sub-grid");
        for &a in &[0.25, 1.0, 4.0] {
            for &b in &[0.25, 1.0, 4.0] {
                for &c in &[0.25, 1.0, 4.0] {
                    let ma = zoo::gaussian_iso(1, a).unwrap();
                    let mb = zoo::gaussian_iso(1, b).unwrap();
                    let mc = zoo::gaussian_iso(1, c).unwrap();
                    let rep = check_submodularity(&ma, &mb, &mc, &mut rng, 10, 4).unwrap();
                    assert!(rep.satisfied, "a={a} b={b} c={c}");
                    // (a+b+c)c ≤ (a+c)(b+c) with margin ½log of the ratio
                    let expect = 0.5 * (((a + c) * (b + c)) / ((a + b + c) * c)).ln();
                    assert_relative_eq!(rep.margin, expect, epsilon = 1e-9);
                }
            }
        }
    }

    #[test]
    fn submodularity_mc_with_uniform_ball_smoother() {
        let mut rng = Streams::new(91).rng("sub-mc");
        let n = 2;
        let x = zoo::uniform_cube(n).unwrap();
        let y = zoo::uniform_cube(n).unwrap();
        let z = zoo::uniform_body_model(unit_volume_ball(n).unwrap()).unwrap();
        let rep = check_submodularity(&x, &y, &z, &mut rng, 4_000, 256).unwrap();
        assert!(rep.satisfied, "margin {} slack {}", rep.margin, rep.slack);
    }

    #[test]
    fn epi_gaussian_equality() {
        let mut rng = Streams::new(92).rng("epi-g");
        let a = zoo::gaussian_iso(3, 1.0).unwrap();
        let b = zoo::gaussian_iso(3, 1.0).unwrap();
        let rep = check_epi(&a, &b, &mut rng, 1_000).unwrap();
        assert!(rep.satisfied);
        assert_relative_eq!(rep.margin, 0.0, epsilon = 1e-9);
        assert_relative_eq!(
            rep.rhs,
            2.0 * 2.0 * std::f64::consts::PI * std::f64::consts::E,
            epsilon = 1e-9
        );
    }

    #[test]
    fn epi_uniform_pair_power_ratio_is_half_e() {
        let mut rng = Streams::new(93).rng("epi-u");
        let a = zoo::uniform_cube(1).unwrap();
        let b = zoo::uniform_cube(1).unwrap();
        let rep = check_epi(&a, &b, &mut rng, 20_000).unwrap();
        assert!(rep.satisfied);
        // N(X+Y)/(N(X)+N(Y)) = e/2 (triangular sum), exact on this route
        let ratio: f64 = rep.params["power_ratio"].parse().unwrap();
        assert_relative_eq!(ratio, 1.3591409142295225, epsilon = 1e-9);
    }

    #[test]
    fn epi_exponential_pair_against_gamma_oracle() {
        let mut rng = Streams::new(94).rng("epi-e");
        let a = zoo::exponential(1.0).unwrap();
        let b = zoo::exponential(1.0).unwrap();
        let rep = check_epi(&a, &b, &mut rng, 30_000).unwrap();
        assert!(rep.satisfied);
        // h(X+Y) = h(Gamma(2,1)) = 1 + γ: N = e^{2(1+γ)}, N(X)+N(Y) = 2e²
        let truth = (2.0 * 1.5772156649015328f64).exp();
        assert!(
            (rep.rhs - truth).abs() <= 3.0 * rep.rhs_se + 0.05 * truth,
            "rhs {} truth {truth}",
            rep.rhs
        );
    }

    #[test]
    fn kappa_lower_sharp_for_uniform() {
        let mut rng = Streams::new(95).rng("kl-u");
        let n = 3;
        let body = ConvexBody::cube(n).unwrap();
        let model = Model::Density(zoo::uniform_cube(n).unwrap());
        let rep =
            check_kappa_entropy_lower(&model, &body, 1.0 / n as f64, &mut rng, 10_000).unwrap();
        assert!(rep.satisfied);
        // κ = 1/n: bound log|A| + n log(1) = h exactly
        assert_relative_eq!(rep.margin, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn kappa_lower_for_cube_convolution() {
        let mut rng = Streams::new(96).rng("kl-c");
        let n = 2;
        let conv = crate::convolution::convolve(
            zoo::uniform_cube(n).unwrap(),
            zoo::uniform_cube(n).unwrap(),
        )
        .unwrap();
        assert_relative_eq!(conv.kappa().unwrap(), 1.0 / (2.0 * n as f64), epsilon = 1e-15);
        let body = ConvexBody::boxed(
            nalgebra::DVector::zeros(n),
            nalgebra::DVector::from_element(n, 2.0),
        )
        .unwrap();
        let rep = check_kappa_entropy_lower(
            &Model::Convolution(conv),
            &body,
            1.0 / (2.0 * n as f64),
            &mut rng,
            10_000,
        )
        .unwrap();
        assert!(rep.satisfied);
        // bound = n log 2 + n log(1/2) = 0; ĥ = 0.5n exactly on this route
        assert_relative_eq!(rep.lhs, 0.0, epsilon = 1e-12);
        assert_relative_eq!(rep.rhs, 0.5 * n as f64, epsilon = 1e-9);
    }

    #[test]
    fn kappa_lower_rejects_bad_kappa() {
        let mut rng = Streams::new(97).rng("kl-bad");
        let body = ConvexBody::cube(2).unwrap();
        let model = Model::Density(zoo::uniform_cube(2).unwrap());
        assert!(check_kappa_entropy_lower(&model, &body, 0.9, &mut rng, 100).is_err());
        assert!(check_kappa_entropy_lower(&model, &body, 0.0, &mut rng, 100).is_err());
    }

    #[test]
    fn reverse_bm_intervals_margin_half() {
        let mut rng = Streams::new(98).rng("rbm-i");
        let i1 = ConvexBody::cube(1).unwrap();
        let i2 = ConvexBody::cube(1).unwrap();
        let rep = check_reverse_bm(&i1, &i2, &mut rng, 10_000).unwrap();
        assert!(rep.satisfied);
        // lhs = log 2 − log 2 = 0, ĥ = ½ exactly (trapezoid closed form)
        assert_relative_eq!(rep.lhs, 0.0, epsilon = 1e-12);
        assert_relative_eq!(rep.margin, 0.5, epsilon = 1e-12);
    }

    #[test]
    fn reverse_bm_disks() {
        let mut rng = Streams::new(99).rng("rbm-d");
        let b = ConvexBody::ball(nalgebra::DVector::zeros(2), 1.0).unwrap();
        let rep = check_reverse_bm(&b, &b, &mut rng, 20_000).unwrap();
        assert!(rep.satisfied, "margin {} slack {}", rep.margin, rep.slack);
        // lhs = log(4π) − 2 log 2 = log π
        assert_relative_eq!(rep.lhs, 1.1447298858494002, epsilon = 1e-12);
    }

    #[test]
    fn reverse_bm_unsupported_pair() {
        let mut rng = Streams::new(100).rng("rbm-x");
        let s = ConvexBody::standard_simplex(2).unwrap();
        let c = ConvexBody::cube(2).unwrap();
        assert!(check_reverse_bm(&s, &c, &mut rng, 100).is_err());
    }

    #[test]
    fn hyperplane_scan_dimension_free_rows() {
        let mut rng = Streams::new(101).rng("hp");
        let models = vec![
            zoo::gaussian_iso(4, 1.0).unwrap(),
            zoo::exponential_product(4, 1.0).unwrap(),
            zoo::uniform_cube(4).unwrap(),
        ];
        let (rows, reports) = hyperplane_scan(&models, &mut rng, 50_000, 1.0).unwrap();
        assert!(reports.iter().all(|r| r.satisfied));
        assert!(rows.iter().all(|r| !r.flagged));
        // Gaussian: 0; Exp: 0.4189385; Uniform: 0.1764852 (exact plugin)
        assert!(rows[0].d_per_n.abs() <= 3.0 * rows[0].d_se_per_n);
        assert!(
            (rows[1].d_per_n - 0.41893853320467267).abs() <= 3.0 * rows[1].d_se_per_n,
            "exp row {}",
            rows[1].d_per_n
        );
        assert_relative_eq!(rows[2].d_per_n, 0.17648520831067255, epsilon = 1e-9);
    }

    #[test]
    fn kappa_convolution_reexported() {
        assert_relative_eq!(
            kappa_convolution(0.5, 0.5).unwrap(),
            0.25,
            epsilon = 1e-15
        );
    }
}
