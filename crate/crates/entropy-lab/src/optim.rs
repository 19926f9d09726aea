//! Nelder–Mead simplex minimization. Derivative-free on purpose: the
//! objectives here (negative log-densities) can be non-smooth.

pub struct NelderMeadResult {
    pub best_point: Vec<f64>,
    pub best_value: f64,
    pub converged: bool,
    pub evaluations: usize,
}

/// Minimize `f` from `start` with an initial simplex of size `scale`.
/// Stops when the simplex value spread falls below `rel_tol` relative to the
/// best value, or after `max_iter` iterations.
pub fn nelder_mead<F>(
    f: F,
    start: &[f64],
    scale: f64,
    max_iter: usize,
    rel_tol: f64,
) -> NelderMeadResult
where
    F: Fn(&[f64]) -> f64,
{
    let n = start.len();
    let mut evals = 0usize;
    let eval = |x: &[f64], evals: &mut usize| -> f64 {
        *evals += 1;
        let v = f(x);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    };

    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(n + 1);
    let v0 = eval(start, &mut evals);
    simplex.push((start.to_vec(), v0));
    for i in 0..n {
        let mut p = start.to_vec();
        p[i] += scale;
        let v = eval(&p, &mut evals);
        simplex.push((p, v));
    }

    let mut converged = false;
    for _ in 0..max_iter {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let best = simplex[0].1;
        let worst = simplex[n].1;
        if best.is_finite() && (worst - best).abs() <= rel_tol * (best.abs() + 1e-12) {
            converged = true;
            break;
        }

        // centroid of all but the worst
        let mut centroid = vec![0.0; n];
        for (p, _) in simplex.iter().take(n) {
            for i in 0..n {
                centroid[i] += p[i] / n as f64;
            }
        }
        let worst_point = simplex[n].0.clone();
        let second_worst = simplex[n - 1].1;

        let reflect: Vec<f64> = (0..n)
            .map(|i| centroid[i] + (centroid[i] - worst_point[i]))
            .collect();
        let fr = eval(&reflect, &mut evals);

        if fr < simplex[0].1 {
            let expand: Vec<f64> = (0..n)
                .map(|i| centroid[i] + 2.0 * (centroid[i] - worst_point[i]))
                .collect();
            let fe = eval(&expand, &mut evals);
            simplex[n] = if fe < fr { (expand, fe) } else { (reflect, fr) };
        } else if fr < second_worst {
            simplex[n] = (reflect, fr);
        } else {
            let contract: Vec<f64> = if fr < simplex[n].1 {
                (0..n)
                    .map(|i| centroid[i] + 0.5 * (reflect[i] - centroid[i]))
                    .collect()
            } else {
                (0..n)
                    .map(|i| centroid[i] + 0.5 * (worst_point[i] - centroid[i]))
                    .collect()
            };
            let fc = eval(&contract, &mut evals);
            if fc < simplex[n].1.min(fr) {
                simplex[n] = (contract, fc);
            } else {
                // shrink toward the best vertex
                let best_point = simplex[0].0.clone();
                for entry in simplex.iter_mut().skip(1) {
                    for i in 0..n {
                        entry.0[i] = best_point[i] + 0.5 * (entry.0[i] - best_point[i]);
                    }
                    entry.1 = eval(&entry.0.clone(), &mut evals);
                }
            }
        }
    }
    simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
    NelderMeadResult {
        best_point: simplex[0].0.clone(),
        best_value: simplex[0].1,
        converged,
        evaluations: evals,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimizes_quadratic() {
        let f = |x: &[f64]| (x[0] - 3.0).powi(2) + 2.0 * (x[1] + 1.0).powi(2) + 5.0;
        let r = nelder_mead(f, &[0.0, 0.0], 1.0, 2_000, 1e-10);
        assert!(r.converged);
        assert!((r.best_point[0] - 3.0).abs() < 1e-4);
        assert!((r.best_point[1] + 1.0).abs() < 1e-4);
        assert!((r.best_value - 5.0).abs() < 1e-7);
    }

    #[test]
    fn handles_non_smooth_objective() {
        let f = |x: &[f64]| x[0].abs() + x[1].abs() + 1.0;
        let r = nelder_mead(f, &[2.0, -3.0], 1.0, 5_000, 1e-10);
        assert!((r.best_value - 1.0).abs() < 1e-5);
    }

    #[test]
    fn handles_infinite_regions() {
        // objective is +inf outside the unit box
        let f = |x: &[f64]| {
            if x.iter().any(|v| *v < 0.0 || *v > 1.0) {
                f64::INFINITY
            } else {
                x[0] + x[1]
            }
        };
        let r = nelder_mead(f, &[0.5, 0.5], 0.4, 5_000, 1e-10);
        assert!(r.best_value < 1e-3);
    }
}
