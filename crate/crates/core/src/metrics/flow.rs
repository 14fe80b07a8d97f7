use super::MetricError;
use crate::geo_flows::DailyFlowMatrix;
use crate::scalar::Scalar;

/// Added to every generated cell before normalising, so model zeros do not
/// make the divergence infinite.
pub const IG_SMOOTHING: f64 = 1e-12;

fn check<T: Scalar>(values: &[T]) -> Result<(), MetricError> {
    match values.iter().position(|v| !v.is_finite() || *v < T::zero()) {
        Some(index) => Err(MetricError::InvalidValue { index, value: values[index].as_f64() }),
        None => Ok(()),
    }
}

fn same_len<T>(a: &[T], b: &[T]) -> Result<(), MetricError> {
    if a.len() != b.len() {
        return Err(MetricError::LengthMismatch { left: a.len(), right: b.len() });
    }
    Ok(())
}

/// `2 Σ min(g, r) / (Σ g + Σ r)` over paired cells.
pub fn cpc_values<T: Scalar>(generated: &[T], real: &[T]) -> Result<T, MetricError> {
    same_len(generated, real)?;
    check(generated)?;
    check(real)?;
    let mut common = T::zero();
    let (mut total_g, mut total_r) = (T::zero(), T::zero());
    for (&g, &r) in generated.iter().zip(real) {
        common = common + g.min(r);
        total_g = total_g + g;
        total_r = total_r + r;
    }
    let total = total_g + total_r;
    if total == T::zero() {
        return Err(MetricError::ZeroTotals);
    }
    Ok((T::lit(2.0) * common / total).min(T::one()))
}

/// CPC over every cell of two aligned matrices.
pub fn cpc<T: Scalar>(generated: &DailyFlowMatrix<T>, real: &DailyFlowMatrix<T>) -> Result<T, MetricError> {
    cpc_values(generated.counts().as_slice(), real.counts().as_slice())
}

/// `Σ p_r ln(p_r / p_g)` over cells with `p_r > 0`, both sides normalised to
/// sum 1 and the generated side smoothed by [`IG_SMOOTHING`] per cell.
pub fn information_gain_values<T: Scalar>(real: &[T], generated: &[T]) -> Result<T, MetricError> {
    same_len(real, generated)?;
    check(real)?;
    check(generated)?;
    let real_total: T = real.iter().copied().sum();
    if real_total == T::zero() {
        return Err(MetricError::EmptyObserved);
    }
    let eps = T::lit(IG_SMOOTHING);
    let gen_total: T = generated.iter().map(|&g| g + eps).sum();
    let mut ig = T::zero();
    for (cell, (&r, &g)) in real.iter().zip(generated).enumerate() {
        if r == T::zero() {
            continue;
        }
        let pg = (g + eps) / gen_total;
        if pg == T::zero() {
            return Err(MetricError::UnsupportedCell { cell });
        }
        let pr = r / real_total;
        ig = ig + pr * (pr / pg).ln();
    }
    // KL divergence is non-negative; rounding can leave a tiny negative residue
    Ok(ig.max(T::zero()))
}

pub fn information_gain<T: Scalar>(real: &DailyFlowMatrix<T>, generated: &DailyFlowMatrix<T>) -> Result<T, MetricError> {
    let n = real.dim();
    let off = |m: &DailyFlowMatrix<T>| {
        (0..n).flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j))).map(|(i, j)| m.get(i, j)).collect::<Vec<_>>()
    };
    information_gain_values(&off(real), &off(generated))
}
