use super::linalg::{cholesky, cholesky_solve};
use super::special::{digamma_diff, ln_gamma, ln_gamma_ratio, trigamma_diff};
use super::{FitError, FitReport};
use crate::geo_flows::{CellSelection, DailyFlowMatrix, DistanceMatrix, StringencyPanel, ZoneRegistry};
use crate::models::{log_deterrence, CgmParams, DecayKind};
use crate::scalar::Scalar;

/// Design column names, in coefficient order.
pub const CGM_COLUMNS: [&str; 6] =
    ["intercept", "log_pop_origin", "log_pop_destination", "log_deterrence", "si_origin", "si_destination"];

const THETA_MIN: f64 = 1e-6;
const THETA_MAX: f64 = 1e10;
const MAX_HALVINGS: usize = 40;
const COLLINEAR_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CgmFitOptions<T> {
    pub max_iterations: usize,
    /// Stop when no coefficient moves by more than this between outer iterations.
    pub coefficient_tol: T,
    pub selection: CellSelection,
    /// Coefficients held at a given value instead of estimated, in
    /// [`CGM_COLUMNS`] order. The intercept cannot be fixed.
    pub fixed: [Option<T>; 6],
}

impl<T: Scalar> Default for CgmFitOptions<T> {
    fn default() -> Self {
        Self { max_iterations: 100, coefficient_tol: T::lit(1e-8), selection: CellSelection::All, fixed: [None; 6] }
    }
}

/// NB2 log-likelihood of one observation with mean `mu` and size `theta`.
pub fn nb_log_likelihood<T: Scalar>(y: T, mu: T, theta: T) -> T {
    let ratio = mu / theta;
    let mut ll = ln_gamma_ratio(y, theta) - ln_gamma(y + T::one()) - theta * ratio.ln_1p();
    if y > T::zero() {
        // y ln(mu / (theta + mu))
        ll = ll + y * (mu.ln() - theta.ln() - ratio.ln_1p());
    }
    ll
}

/// Fits the CGM coefficients to the given days over all off-diagonal cells.
pub fn fit_cgm<T: Scalar>(
    observed: &[DailyFlowMatrix<T>],
    distances: &DistanceMatrix<T>,
    registry: &ZoneRegistry<T>,
    stringency: &StringencyPanel<T>,
    decay: DecayKind,
) -> Result<FitReport<T, CgmParams<T>>, FitError> {
    fit_cgm_with(observed, distances, registry, stringency, decay, &CgmFitOptions::default())
}

struct Design<T> {
    /// Standardised free columns, row-major `n x p`; column 0 is the intercept.
    x: Vec<T>,
    p: usize,
    y: Vec<T>,
    offset: Vec<T>,
    /// Original column index of each free column.
    free: Vec<usize>,
    mean: Vec<T>,
    sd: Vec<T>,
}

impl<T: Scalar> Design<T> {
    fn rows(&self) -> usize {
        self.y.len()
    }

    fn row(&self, i: usize) -> &[T] {
        &self.x[i * self.p..(i + 1) * self.p]
    }

    fn eta(&self, b: &[T]) -> Vec<T> {
        (0..self.rows())
            .map(|i| self.offset[i] + self.row(i).iter().zip(b).map(|(&x, &c)| x * c).sum::<T>())
            .collect()
    }

    fn log_likelihood(&self, b: &[T], theta: T) -> T {
        self.eta(b).into_iter().zip(&self.y).map(|(eta, &y)| nb_log_likelihood(y, eta.exp(), theta)).sum()
    }

    /// Weighted Gram matrix and right-hand side.
    fn normal_equations(&self, w: &[T], z: &[T]) -> (Vec<T>, Vec<T>) {
        let p = self.p;
        let mut a = vec![T::zero(); p * p];
        let mut rhs = vec![T::zero(); p];
        for i in 0..self.rows() {
            let row = self.row(i);
            for r in 0..p {
                let wr = w[i] * row[r];
                rhs[r] = rhs[r] + wr * z[i];
                for c in 0..=r {
                    a[r * p + c] = a[r * p + c] + wr * row[c];
                }
            }
        }
        for r in 0..p {
            for c in (r + 1)..p {
                a[r * p + c] = a[c * p + r];
            }
        }
        (a, rhs)
    }

    /// Maps standardised free coefficients back to the six model coefficients.
    fn original(&self, b: &[T], fixed: &[Option<T>; 6]) -> [T; 6] {
        let mut out = [T::zero(); 6];
        for (k, f) in fixed.iter().enumerate() {
            if let Some(v) = f {
                out[k] = *v;
            }
        }
        let mut intercept = b[0];
        for (slot, &col) in self.free.iter().enumerate().skip(1) {
            let coef = b[slot] / self.sd[slot];
            intercept = intercept - coef * self.mean[slot];
            out[col] = coef;
        }
        out[0] = intercept;
        out
    }
}

fn build_design<T: Scalar>(
    observed: &[DailyFlowMatrix<T>],
    distances: &DistanceMatrix<T>,
    registry: &ZoneRegistry<T>,
    stringency: &StringencyPanel<T>,
    decay: DecayKind,
    distance_scale: T,
    opts: &CgmFitOptions<T>,
) -> Result<Design<T>, FitError> {
    if opts.fixed[0].is_some() {
        return Err(FitError::Options("the intercept cannot be fixed".into()));
    }
    let masses = registry.masses();
    let log_mass: Vec<T> = masses.iter().map(|m| m.ln()).collect();
    let free: Vec<usize> = (0..6).filter(|&k| opts.fixed[k].is_none()).collect();
    let p = free.len();

    let mut raw: Vec<[T; 6]> = Vec::new();
    let mut y = Vec::new();
    for day in observed {
        let si = stringency.for_date(registry, day.date())?;
        for (i, j) in opts.selection.cells(day.dim()) {
            let lf = log_deterrence(distances.get(i, j), decay, distance_scale)?;
            raw.push([T::one(), log_mass[i], log_mass[j], lf, si[i], si[j]]);
            y.push(day.get(i, j));
        }
    }
    let n = y.len();
    if n < p + 1 {
        return Err(FitError::InsufficientData { needed: p + 1, found: n });
    }
    if y.iter().all(|v| *v == T::zero()) {
        return Err(FitError::Degenerate);
    }

    let nf = T::from_usize_lossy(n);
    let mut mean = vec![T::zero(); p];
    let mut sd = vec![T::one(); p];
    for (slot, &col) in free.iter().enumerate().skip(1) {
        let m = raw.iter().map(|r| r[col]).sum::<T>() / nf;
        let var = raw.iter().map(|r| (r[col] - m) * (r[col] - m)).sum::<T>() / nf;
        let s = var.sqrt();
        if !(s > T::lit(COLLINEAR_TOL) * (m.abs() + T::one())) {
            return Err(FitError::Collinear { column: CGM_COLUMNS[col] });
        }
        mean[slot] = m;
        sd[slot] = s;
    }
    let mut x = Vec::with_capacity(n * p);
    let mut offset = Vec::with_capacity(n);
    for r in &raw {
        for (slot, &col) in free.iter().enumerate() {
            x.push(if slot == 0 { T::one() } else { (r[col] - mean[slot]) / sd[slot] });
        }
        let off = (0..6).filter_map(|k| opts.fixed[k].map(|v| v * r[k])).sum::<T>();
        offset.push(off);
    }
    let design = Design { x, p, y, offset, free, mean, sd };

    // correlation-scale Gram matrix detects exact or near collinearity
    let (mut gram, _) = design.normal_equations(&vec![T::one(); n], &vec![T::zero(); n]);
    if let Err(slot) = cholesky(&mut gram, p, T::lit(COLLINEAR_TOL)) {
        return Err(FitError::Collinear { column: CGM_COLUMNS[design.free[slot]] });
    }
    Ok(design)
}

/// NB2 maximum-likelihood fit of the CGM coefficients, pooled over `observed`.
pub fn fit_cgm_with<T: Scalar>(
    observed: &[DailyFlowMatrix<T>],
    distances: &DistanceMatrix<T>,
    registry: &ZoneRegistry<T>,
    stringency: &StringencyPanel<T>,
    decay: DecayKind,
    opts: &CgmFitOptions<T>,
) -> Result<FitReport<T, CgmParams<T>>, FitError> {
    let distance_scale = match decay {
        DecayKind::Exponential => distances.mean_offdiag(),
        DecayKind::PowerLaw => T::one(),
    };
    let design = build_design(observed, distances, registry, stringency, decay, distance_scale, opts)?;
    let n = design.rows();
    let p = design.p;

    // start: ordinary least squares of ln(1 + y) - offset
    let z0: Vec<T> = design.y.iter().zip(&design.offset).map(|(&y, &o)| y.ln_1p() - o).collect();
    let (a, rhs) = design.normal_equations(&vec![T::one(); n], &z0);
    let mut b = solve(&a, p, &rhs)?;

    let mut theta = initial_theta(&design, &b);
    let mut ll = design.log_likelihood(&b, theta);
    if !ll.is_finite() {
        return Err(FitError::Singular);
    }
    let mut trace = vec![-ll];
    let mut converged = false;
    let mut iterations = 0;
    let theta_bounds = (T::lit(THETA_MIN).ln(), T::lit(THETA_MAX).ln());

    while iterations < opts.max_iterations {
        iterations += 1;
        let before = design.original(&b, &opts.fixed);

        // IRLS step for the coefficients at fixed theta
        let eta = design.eta(&b);
        let mut w = Vec::with_capacity(n);
        let mut z = Vec::with_capacity(n);
        for i in 0..n {
            let mu = eta[i].exp();
            w.push(mu / (T::one() + mu / theta));
            z.push(eta[i] - design.offset[i] + (design.y[i] - mu) / mu);
        }
        let (a, rhs) = design.normal_equations(&w, &z);
        let target = solve(&a, p, &rhs)?;
        let step: Vec<T> = target.iter().zip(&b).map(|(t, c)| *t - *c).collect();
        let mut t = T::one();
        for _ in 0..MAX_HALVINGS {
            let cand: Vec<T> = b.iter().zip(&step).map(|(c, s)| *c + t * *s).collect();
            let cand_ll = design.log_likelihood(&cand, theta);
            if cand_ll.is_finite() && cand_ll >= ll {
                b = cand;
                ll = cand_ll;
                break;
            }
            t = t / T::lit(2.0);
        }

        // Newton steps on ln(theta) at fixed coefficients
        let mu: Vec<T> = design.eta(&b).into_iter().map(T::exp).collect();
        let mut phi_change = T::zero();
        for _ in 0..5 {
            let phi = theta.ln();
            let (g, h) = theta_derivatives(&design.y, &mu, theta);
            let raw = if h < T::zero() { -g / h } else { g.signum() * T::lit(2.0) };
            let raw = raw.max(T::lit(-3.0)).min(T::lit(3.0));
            let mut s = raw;
            let mut moved = false;
            for _ in 0..MAX_HALVINGS {
                let cand_phi = (phi + s).max(theta_bounds.0).min(theta_bounds.1);
                if cand_phi == phi {
                    break;
                }
                let cand_theta = cand_phi.exp();
                let cand_ll: T = design.y.iter().zip(&mu).map(|(&y, &m)| nb_log_likelihood(y, m, cand_theta)).sum();
                if cand_ll.is_finite() && cand_ll >= ll {
                    phi_change = phi_change + (cand_phi - phi).abs();
                    theta = cand_theta;
                    ll = cand_ll;
                    moved = true;
                    break;
                }
                s = s / T::lit(2.0);
            }
            if !moved || (theta.ln() - phi).abs() < T::lit(1e-12) {
                break;
            }
        }
        trace.push(-ll);

        let after = design.original(&b, &opts.fixed);
        let coef_change = before.iter().zip(&after).map(|(a, b)| (*a - *b).abs()).fold(T::zero(), T::max);
        if coef_change < opts.coefficient_tol && phi_change < opts.coefficient_tol {
            converged = true;
            break;
        }
    }

    let eta = design.eta(&b);
    let mut score = vec![T::zero(); p];
    for i in 0..n {
        let mu = eta[i].exp();
        let r = (design.y[i] - mu) / (T::one() + mu / theta);
        for (s, x) in score.iter_mut().zip(design.row(i)) {
            *s = *s + *x * r;
        }
    }
    let gradient_norm = score.iter().fold(T::zero(), |m, s| m.max(s.abs())) / T::from_usize_lossy(n);

    let params = CgmParams::from_coefficients(design.original(&b, &opts.fixed), decay, distance_scale);
    Ok(FitReport {
        params,
        iterations,
        converged,
        objective: -ll,
        gradient_norm,
        dispersion: Some(theta),
        trace,
        observations: n,
    })
}

fn solve<T: Scalar>(a: &[T], p: usize, rhs: &[T]) -> Result<Vec<T>, FitError> {
    let mut l = a.to_vec();
    cholesky(&mut l, p, T::lit(1e-14)).map_err(|_| FitError::Singular)?;
    let x = cholesky_solve(&l, p, rhs);
    if x.iter().all(|v| v.is_finite()) {
        Ok(x)
    } else {
        Err(FitError::Singular)
    }
}

/// Method-of-moments start for theta, clamped to the allowed range.
fn initial_theta<T: Scalar>(design: &Design<T>, b: &[T]) -> T {
    let mut num = T::zero();
    let mut den = T::zero();
    for (eta, &y) in design.eta(b).into_iter().zip(&design.y) {
        let mu = eta.exp();
        num = num + mu * mu;
        den = den + (y - mu) * (y - mu) - mu;
    }
    let theta = if den > T::zero() { num / den } else { T::lit(THETA_MAX) };
    theta.max(T::lit(THETA_MIN)).min(T::lit(THETA_MAX))
}

/// First and second derivative of the log-likelihood with respect to ln(theta).
fn theta_derivatives<T: Scalar>(y: &[T], mu: &[T], theta: T) -> (T, T) {
    let mut d1 = T::zero();
    let mut d2 = T::zero();
    for (&y, &m) in y.iter().zip(mu) {
        let tm = theta + m;
        // dℓ/dθ = ψ(y+θ) - ψ(θ) - ln(1 + μ/θ) + (μ - y)/(μ + θ)
        d1 = d1 + digamma_diff(y, theta) - (m / theta).ln_1p() + (m - y) / tm;
        // d²ℓ/dθ² = ψ'(y+θ) - ψ'(θ) + (μ² + θ y) / (θ (μ + θ)²)
        d2 = d2 + trigamma_diff(y, theta) + (m * m + theta * y) / (theta * tm * tm);
    }
    (theta * d1, theta * theta * d2 + theta * d1)
}
