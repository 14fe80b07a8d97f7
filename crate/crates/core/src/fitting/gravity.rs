use super::{FitError, FitReport};
use crate::geo_flows::{CellSelection, DailyFlowMatrix, DistanceMatrix};
use crate::models::{DecayKind, DomainError, GravityParams};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GravityFitOptions<T> {
    pub max_iterations: usize,
    /// Stop when an accepted step lowers the objective by less than this fraction.
    pub objective_tol: T,
    /// Stop when the infinity norm of the scaled gradient drops below this.
    pub gradient_tol: T,
    pub selection: CellSelection,
}

impl<T: Scalar> Default for GravityFitOptions<T> {
    fn default() -> Self {
        Self {
            max_iterations: 200,
            objective_tol: T::lit(1e-10),
            gradient_tol: T::lit(1e-8),
            selection: CellSelection::All,
        }
    }
}

/// Least-squares fit of `(K, beta)` to one day of flows over all off-diagonal cells.
pub fn fit_gravity<T: Scalar>(
    observed: &DailyFlowMatrix<T>,
    distances: &DistanceMatrix<T>,
    masses: &[T],
    decay: DecayKind,
) -> Result<FitReport<T, GravityParams<T>>, FitError> {
    fit_gravity_with(std::slice::from_ref(observed), distances, masses, decay, &GravityFitOptions::default())
}

struct Obs<T> {
    /// ln(m_i m_j)
    log_mass: T,
    /// distance regressor: r / scale (exponential) or ln r (power law)
    x: T,
    y: T,
}

/// Pooled least-squares fit over every selected cell of every given day.
///
/// Internally the parameters are `a = ln K` and `b = beta * scale`, where
/// `scale` is the mean pairwise distance for exponential decay and 1 for
/// power-law decay; the objective is the same residual sum of squares.
pub fn fit_gravity_with<T: Scalar>(
    observed: &[DailyFlowMatrix<T>],
    distances: &DistanceMatrix<T>,
    masses: &[T],
    decay: DecayKind,
    opts: &GravityFitOptions<T>,
) -> Result<FitReport<T, GravityParams<T>>, FitError> {
    let scale = match decay {
        DecayKind::Exponential => distances.mean_offdiag(),
        DecayKind::PowerLaw => T::one(),
    };
    if !(scale > T::zero()) {
        return Err(DomainError::NonPositive { what: "mean distance", value: scale.as_f64() }.into());
    }
    let mut obs = Vec::new();
    for day in observed {
        for (i, j) in opts.selection.cells(day.dim()) {
            let r = distances.get(i, j);
            let x = match decay {
                DecayKind::Exponential => r / scale,
                DecayKind::PowerLaw => {
                    if !(r > T::zero()) {
                        return Err(DomainError::ZeroDistancePowerLaw.into());
                    }
                    r.ln()
                }
            };
            obs.push(Obs { log_mass: (masses[i] * masses[j]).ln(), x, y: day.get(i, j) });
        }
    }
    let nonzero = obs.iter().filter(|o| o.y > T::zero()).count();
    if !obs.is_empty() && nonzero == 0 {
        return Err(FitError::Degenerate);
    }
    if nonzero < 3 {
        return Err(FitError::InsufficientData { needed: 3, found: nonzero });
    }

    let y_sq: T = obs.iter().map(|o| o.y * o.y).sum();
    let y_sum: T = obs.iter().map(|o| o.y).sum();

    // K0 = sum(T) / sum(m_i m_j f0) with beta0 = 1/<r> (b0 = 1) or 1.0
    let b0 = T::one();
    let base: T = obs.iter().map(|o| (o.log_mass - b0 * o.x).exp()).sum();
    let mut theta = [y_sum.ln() - base.ln(), b0];

    let evaluate = |theta: &[T; 2]| -> T {
        obs.iter()
            .map(|o| {
                let e = o.y - (theta[0] + o.log_mass - theta[1] * o.x).exp();
                e * e
            })
            .sum()
    };

    let mut sse = evaluate(&theta);
    if !sse.is_finite() {
        return Err(FitError::Singular);
    }
    let mut trace = vec![sse];
    let mut lambda = T::lit(1e-3);
    let mut converged = false;
    let mut iterations = 0;
    let mut grad_norm;
    let two = T::lit(2.0);

    loop {
        // normal equations J^T J and J^T e with J = d mu / d theta
        let (mut a00, mut a01, mut a11, mut g0, mut g1) = (T::zero(), T::zero(), T::zero(), T::zero(), T::zero());
        for o in &obs {
            let mu = (theta[0] + o.log_mass - theta[1] * o.x).exp();
            let e = o.y - mu;
            let (j0, j1) = (mu, -o.x * mu);
            a00 = a00 + j0 * j0;
            a01 = a01 + j0 * j1;
            a11 = a11 + j1 * j1;
            g0 = g0 + j0 * e;
            g1 = g1 + j1 * e;
        }
        // gradient of sse / sum(y^2)
        grad_norm = (two * g0.abs()).max(two * g1.abs()) / y_sq;
        if grad_norm < opts.gradient_tol {
            converged = true;
            break;
        }
        if iterations >= opts.max_iterations {
            break;
        }
        iterations += 1;

        let (d0, d1) = (a00.max(T::min_positive_value()), a11.max(T::min_positive_value()));
        let mut accepted = false;
        let mut rejected = false;
        while lambda < T::lit(1e16) {
            let (m00, m11) = (a00 + lambda * d0, a11 + lambda * d1);
            let det = m00 * m11 - a01 * a01;
            if det > T::zero() {
                let step = [(m11 * g0 - a01 * g1) / det, (m00 * g1 - a01 * g0) / det];
                let cand = [theta[0] + step[0], theta[1] + step[1]];
                let cand_sse = evaluate(&cand);
                if cand_sse.is_finite() && cand_sse < sse {
                    let decrease = (sse - cand_sse) / sse;
                    theta = cand;
                    sse = cand_sse;
                    trace.push(sse);
                    lambda = (lambda / T::lit(10.0)).max(T::lit(1e-12));
                    accepted = true;
                    if !rejected && decrease < opts.objective_tol {
                        converged = true;
                    }
                    break;
                }
            }
            rejected = true;
            lambda = lambda * T::lit(10.0);
        }
        if !accepted || converged {
            break;
        }
    }

    let params = GravityParams::new(theta[0].exp(), theta[1] / scale, decay)?;
    Ok(FitReport {
        params,
        iterations,
        converged,
        objective: sse,
        gradient_norm: grad_norm,
        dispersion: None,
        trace,
        observations: obs.len(),
    })
}
