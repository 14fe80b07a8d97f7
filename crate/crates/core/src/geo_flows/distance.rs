use crate::scalar::{Scalar, SquareMatrix};

use super::ZoneRegistry;

/// Mean Earth radius in kilometres.
pub const EARTH_RADIUS_KM: f64 = 6371.0;

/// Great-circle distance in km between two (lat, lon) points given in degrees.
pub fn haversine<T: Scalar>(a: (T, T), b: (T, T)) -> T {
    let (lat1, lon1) = (a.0.to_radians(), a.1.to_radians());
    let (lat2, lon2) = (b.0.to_radians(), b.1.to_radians());
    let two = T::lit(2.0);
    let s_lat = ((lat2 - lat1) / two).sin();
    let s_lon = ((lon2 - lon1) / two).sin();
    let h = s_lat * s_lat + lat1.cos() * lat2.cos() * s_lon * s_lon;
    // h can drift a hair above 1 for antipodal points
    let h = h.min(T::one()).max(T::zero());
    two * T::lit(EARTH_RADIUS_KM) * h.sqrt().atan2((T::one() - h).sqrt())
}

/// Symmetric pairwise distances (km) aligned to a registry.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceMatrix<T>(SquareMatrix<T>);

impl<T: Scalar> DistanceMatrix<T> {
    /// Wraps a precomputed matrix. Returns `None` unless it is symmetric,
    /// non-negative and has a zero diagonal.
    pub fn from_matrix(m: SquareMatrix<T>) -> Option<Self> {
        let n = m.dim();
        for i in 0..n {
            if m.get(i, i) != T::zero() {
                return None;
            }
            for j in 0..n {
                let v = m.get(i, j);
                if !(v >= T::zero()) || v != m.get(j, i) {
                    return None;
                }
            }
        }
        Some(Self(m))
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> T {
        self.0.get(i, j)
    }

    pub fn dim(&self) -> usize {
        self.0.dim()
    }

    pub fn matrix(&self) -> &SquareMatrix<T> {
        &self.0
    }

    /// Mean over all ordered off-diagonal pairs.
    pub fn mean_offdiag(&self) -> T {
        let n = self.dim();
        if n < 2 {
            return T::zero();
        }
        let sum: T = (0..n).flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j))).map(|(i, j)| self.get(i, j)).sum();
        sum / T::from_usize_lossy(n * (n - 1))
    }

    pub fn permuted(&self, perm: &[usize]) -> Self {
        Self(self.0.permuted(perm))
    }
}

/// Pairwise haversine distances between zone centroids.
pub fn distance_matrix<T: Scalar>(registry: &ZoneRegistry<T>) -> DistanceMatrix<T> {
    let n = registry.len();
    let mut m = SquareMatrix::zeros(n);
    for i in 0..n {
        let a = registry.zone(i);
        for j in (i + 1)..n {
            let b = registry.zone(j);
            let r = haversine((a.lat, a.lon), (b.lat, b.lon));
            m.set(i, j, r);
            m.set(j, i, r);
        }
    }
    DistanceMatrix(m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geo_flows::Zone;
    use approx::assert_abs_diff_eq;

    #[test]
    fn same_point_is_zero() {
        assert_eq!(haversine((10.0_f64, 20.0), (10.0, 20.0)), 0.0);
    }

    #[test]
    fn half_circumference() {
        let expected = std::f64::consts::PI * EARTH_RADIUS_KM;
        assert_abs_diff_eq!(expected, 20015.086796020572, epsilon = 1e-9);
        assert_abs_diff_eq!(haversine((0.0_f64, 0.0), (0.0, 180.0)), expected, epsilon = 0.01);
    }

    #[test]
    fn london_paris() {
        let d = haversine((51.5074_f64, -0.1278), (48.8566, 2.3522));
        assert_abs_diff_eq!(d, 343.5, epsilon = 0.5);
    }

    #[test]
    fn f32_agrees_with_f64() {
        let d32 = haversine((51.5074_f32, -0.1278), (48.8566, 2.3522));
        let d64 = haversine((51.5074_f64, -0.1278), (48.8566, 2.3522));
        assert!((d32 as f64 - d64).abs() < 0.05);
    }

    #[test]
    fn duplicated_location_gives_zero_offdiagonal() {
        let reg = ZoneRegistry::new(vec![
            Zone::new("X1", "x", 1.0_f64, 45.0, 7.0),
            Zone::new("X2", "x", 2.0, 45.0, 7.0),
        ])
        .unwrap();
        let d = distance_matrix(&reg);
        assert_eq!(d.get(0, 1), 0.0);
        assert_eq!(d.get(1, 0), 0.0);
    }

    #[test]
    fn from_matrix_rejects_asymmetry() {
        let m = SquareMatrix::from_row_major(2, vec![0.0_f64, 1.0, 2.0, 0.0]).unwrap();
        assert!(DistanceMatrix::from_matrix(m).is_none());
    }
}
