use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::MetricError;
use crate::scalar::Scalar;

/// Sample Pearson correlation, clamped to [-1, 1].
pub fn pearson<T: Scalar>(x: &[T], y: &[T]) -> Result<T, MetricError> {
    if x.len() != y.len() {
        return Err(MetricError::LengthMismatch { left: x.len(), right: y.len() });
    }
    if x.len() < 2 {
        return Err(MetricError::TooShort { len: x.len(), needed: 2 });
    }
    for s in [x, y] {
        if s.iter().all(|v| *v == s[0]) {
            return Err(MetricError::ZeroVariance);
        }
        if let Some(index) = s.iter().position(|v| !v.is_finite()) {
            return Err(MetricError::InvalidValue { index, value: s[index].as_f64() });
        }
    }
    let n = T::from_usize_lossy(x.len());
    let mx = x.iter().copied().sum::<T>() / n;
    let my = y.iter().copied().sum::<T>() / n;
    let (mut sxy, mut sxx, mut syy) = (T::zero(), T::zero(), T::zero());
    for (&a, &b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy = sxy + dx * dy;
        sxx = sxx + dx * dx;
        syy = syy + dy * dy;
    }
    let denom = (sxx * syy).sqrt();
    if denom == T::zero() {
        return Err(MetricError::ZeroVariance);
    }
    Ok((sxy / denom).max(-T::one()).min(T::one()))
}

/// Median of a non-empty slice (mean of the two central values for even length).
pub fn median<T: Scalar>(values: &[T]) -> Option<T> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).expect("finite values"));
    let k = v.len() / 2;
    Some(if v.len() % 2 == 1 { v[k] } else { (v[k - 1] + v[k]) / T::lit(2.0) })
}

/// Sliding-window correlations with stride 1.
#[derive(Debug, Clone, PartialEq)]
pub struct RollingPearson<T> {
    pub window: usize,
    /// One entry per window start; `None` where either window is constant.
    pub values: Vec<Option<T>>,
    pub mean: Option<T>,
    pub median: Option<T>,
}

impl<T: Scalar> RollingPearson<T> {
    pub fn valid(&self) -> Vec<T> {
        self.values.iter().flatten().copied().collect()
    }
}

pub fn rolling_pearson<T: Scalar>(x: &[T], y: &[T], window: usize) -> Result<RollingPearson<T>, MetricError> {
    if window < 2 {
        return Err(MetricError::WindowTooSmall(window));
    }
    if x.len() != y.len() {
        return Err(MetricError::LengthMismatch { left: x.len(), right: y.len() });
    }
    if x.len() < window {
        return Err(MetricError::TooShort { len: x.len(), needed: window });
    }
    let values: Vec<Option<T>> = (0..=x.len() - window)
        .map(|t| match pearson(&x[t..t + window], &y[t..t + window]) {
            Ok(r) => Ok(Some(r)),
            Err(MetricError::ZeroVariance) => Ok(None),
            Err(e) => Err(e),
        })
        .collect::<Result<_, _>>()?;
    let valid: Vec<T> = values.iter().flatten().copied().collect();
    let mean = (!valid.is_empty()).then(|| valid.iter().copied().sum::<T>() / T::from_usize_lossy(valid.len()));
    let median = median(&valid);
    Ok(RollingPearson { window, values, mean, median })
}

/// Summary of one window size.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalSync<T> {
    pub w: usize,
    pub mean: Option<T>,
    pub median: Option<T>,
    /// Number of windows (`n - w + 1`).
    pub windows: usize,
    /// Windows with a defined correlation.
    pub valid: usize,
}

/// Global correlation plus per-window local statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyncReport<T> {
    pub rho_g: T,
    pub local: Vec<LocalSync<T>>,
}

pub fn synchronicity<T: Scalar>(x: &[T], y: &[T], windows: &[usize]) -> Result<(SyncReport<T>, Vec<RollingPearson<T>>), MetricError> {
    let rho_g = pearson(x, y)?;
    let rolling = windows.iter().map(|&w| rolling_pearson(x, y, w)).collect::<Result<Vec<_>, _>>()?;
    let local = rolling
        .iter()
        .map(|r| LocalSync { w: r.window, mean: r.mean, median: r.median, windows: r.values.len(), valid: r.valid().len() })
        .collect();
    Ok((SyncReport { rho_g, local }, rolling))
}

/// `(y_hat - y) / y`.
pub fn relative_improvement<T: Scalar>(y_hat: T, y: T) -> Result<T, MetricError> {
    if y == T::zero() {
        return Err(MetricError::ZeroBaseline);
    }
    Ok((y_hat - y) / y)
}

/// How paired daily scores are condensed into one improvement figure.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ImprovementConvention {
    /// Mean of per-day relative improvements.
    #[default]
    AverageOfRatios,
    /// Relative improvement of the mean scores.
    RatioOfAverages,
}

impl fmt::Display for ImprovementConvention {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ImprovementConvention::AverageOfRatios => "average-of-ratios",
            ImprovementConvention::RatioOfAverages => "ratio-of-averages",
        })
    }
}

impl FromStr for ImprovementConvention {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "average-of-ratios" => Ok(ImprovementConvention::AverageOfRatios),
            "ratio-of-averages" => Ok(ImprovementConvention::RatioOfAverages),
            other => Err(format!("unknown improvement convention `{other}`")),
        }
    }
}

/// Condenses `(y_hat, y)` pairs, e.g. daily CPC of a candidate and a baseline.
pub fn mean_relative_improvement<T: Scalar>(pairs: &[(T, T)], convention: ImprovementConvention) -> Result<T, MetricError> {
    if pairs.is_empty() {
        return Err(MetricError::Empty);
    }
    let n = T::from_usize_lossy(pairs.len());
    match convention {
        ImprovementConvention::AverageOfRatios => {
            let sum = pairs.iter().map(|&(a, b)| relative_improvement(a, b)).sum::<Result<T, _>>()?;
            Ok(sum / n)
        }
        ImprovementConvention::RatioOfAverages => {
            let a = pairs.iter().map(|p| p.0).sum::<T>() / n;
            let b = pairs.iter().map(|p| p.1).sum::<T>() / n;
            relative_improvement(a, b)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn pearson_examples() {
        let x = [1.0, 2.0, 3.0, 5.0, 8.0];
        assert_eq!(pearson(&x, &x).unwrap(), 1.0);
        let neg: Vec<f64> = x.iter().map(|v| -v).collect();
        assert_eq!(pearson(&x, &neg).unwrap(), -1.0);
        // sxy = 3, sxx = 2, syy = 14/3
        let expected = 3.0 / (2.0f64 * 14.0 / 3.0).sqrt();
        assert_abs_diff_eq!(expected, 0.98198, epsilon = 1e-5);
        assert_abs_diff_eq!(pearson(&[1.0, 2.0, 3.0], &[1.0, 2.0, 4.0]).unwrap(), expected, epsilon = 1e-14);
        assert_eq!(pearson(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0]), Err(MetricError::ZeroVariance));
        assert!(pearson(&[1.0], &[2.0]).is_err());
    }

    #[test]
    fn rolling_counts_and_identity() {
        let x: Vec<f64> = (0..10).map(|k| (k as f64 * 0.7).sin() + k as f64 * 0.1).collect();
        let r = rolling_pearson(&x, &x, 5).unwrap();
        assert_eq!(r.values.len(), 6);
        assert!(r.values.iter().all(|v| *v == Some(1.0)));
        assert_eq!(r.mean, Some(1.0));
        assert_eq!(r.median, Some(1.0));
        assert!(rolling_pearson(&x, &x, 11).is_err());
        assert!(rolling_pearson(&x, &x, 1).is_err());
    }

    #[test]
    fn rolling_skips_constant_windows() {
        let x = [1.0, 1.0, 1.0, 2.0, 3.0];
        let y = [1.0, 2.0, 3.0, 4.0, 6.0];
        let r = rolling_pearson(&x, &y, 3).unwrap();
        assert_eq!(r.values[0], None);
        assert!(r.values[1].is_some() && r.values[2].is_some());
        assert_eq!(r.valid().len(), 2);
    }

    #[test]
    fn median_even_and_odd() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), Some(2.0));
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), Some(2.5));
        assert_eq!(median::<f64>(&[]), None);
    }

    #[test]
    fn relative_improvement_examples() {
        assert_eq!(relative_improvement(1.0, 1.0).unwrap(), 0.0);
        assert_abs_diff_eq!(relative_improvement(0.6, 0.4).unwrap(), 0.5, epsilon = 1e-15);
        assert_eq!(relative_improvement(1.0, 0.0), Err(MetricError::ZeroBaseline));
        let pairs = [(0.8, 0.4), (0.6, 0.6)];
        assert_abs_diff_eq!(mean_relative_improvement(&pairs, ImprovementConvention::AverageOfRatios).unwrap(), 0.5, epsilon = 1e-15);
        // (0.7 - 0.5) / 0.5
        assert_abs_diff_eq!(mean_relative_improvement(&pairs, ImprovementConvention::RatioOfAverages).unwrap(), 0.4, epsilon = 1e-15);
    }

    proptest! {
        #[test]
        fn pearson_affine_invariant(v in prop::collection::vec((-100.0..100.0f64, -100.0..100.0f64), 3..50), a in 0.01..100.0f64, b in -1e3..1e3f64) {
            let (x, y): (Vec<f64>, Vec<f64>) = v.into_iter().unzip();
            let base = match pearson(&x, &y) { Ok(r) => r, Err(_) => return Ok(()) };
            let ax: Vec<f64> = x.iter().map(|v| a * v + b).collect();
            let ay: Vec<f64> = y.iter().map(|v| a * v + b).collect();
            prop_assert!((pearson(&ax, &y).unwrap() - base).abs() < 1e-9);
            prop_assert!((pearson(&x, &ay).unwrap() - base).abs() < 1e-9);
            prop_assert!((-1.0..=1.0).contains(&base));
        }

        #[test]
        fn full_window_equals_global(v in prop::collection::vec((-100.0..100.0f64, -100.0..100.0f64), 2..50)) {
            let (x, y): (Vec<f64>, Vec<f64>) = v.into_iter().unzip();
            if let Ok(g) = pearson(&x, &y) {
                let r = rolling_pearson(&x, &y, x.len()).unwrap();
                prop_assert_eq!(r.values, vec![Some(g)]);
            }
        }
    }
}
