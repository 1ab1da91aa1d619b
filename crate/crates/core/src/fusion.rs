//! Integration of the two pathway maps.
//!
//! Maxima normalization rescales a map by `(1 − mean local maximum)²`, so a
//! map with one dominant peak keeps its weight while a map with many
//! comparable peaks is suppressed before the two maps are summed.

use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::raster::{normalize_range, SaliencyMap};

/// Neighbors a pixel must strictly exceed to count as a local maximum.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Neighborhood {
    /// All 8 surrounding pixels.
    #[default]
    Eight,
    /// Only the 4 diagonal pixels.
    Diagonal,
}

impl Neighborhood {
    fn offsets(self) -> &'static [(isize, isize)] {
        match self {
            Neighborhood::Eight => &[(-1, -1), (0, -1), (1, -1), (-1, 0), (1, 0), (-1, 1), (0, 1), (1, 1)],
            Neighborhood::Diagonal => &[(-1, -1), (1, -1), (-1, 1), (1, 1)],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MnConfig {
    /// Local maxima at or below this normalized value are ignored.
    pub local_max_threshold: f64,
    pub neighborhood: Neighborhood,
}

impl Default for MnConfig {
    fn default() -> Self {
        MnConfig {
            local_max_threshold: 0.1,
            neighborhood: Neighborhood::Eight,
        }
    }
}

impl MnConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.local_max_threshold > 0.0 && self.local_max_threshold < 1.0) {
            return Err(Error::InvalidValue(format!(
                "local maximum threshold must lie in (0, 1), got {}",
                self.local_max_threshold
            )));
        }
        Ok(())
    }
}

/// Global maximum the map is normalized to before scanning.
const GLOBAL_MAX: f64 = 1.0;

/// Count and sum of the strict interior local maxima above the threshold.
pub fn local_maxima(map: &SaliencyMap, cfg: &MnConfig) -> (usize, f64) {
    let (w, h) = map.dims();
    let (mut count, mut sum) = (0, 0.0);
    if w < 3 || h < 3 {
        return (count, sum);
    }
    for y in 1..h - 1 {
        for x in 1..w - 1 {
            let v = map.get(x, y);
            if v <= cfg.local_max_threshold {
                continue;
            }
            let is_max = cfg.neighborhood.offsets().iter().all(|&(dx, dy)| {
                v > map.get((x as isize + dx) as usize, (y as isize + dy) as usize)
            });
            if is_max {
                count += 1;
                sum += v;
            }
        }
    }
    (count, sum)
}

/// Maxima normalization `N_max(S, t)`.
///
/// Border pixels never count as maxima. When no maximum is found the
/// range-normalized map is returned unchanged.
pub fn maxima_normalize(map: &SaliencyMap, cfg: &MnConfig) -> SaliencyMap {
    let normalized = normalize_range(map).scaled(GLOBAL_MAX);
    let (count, sum) = local_maxima(&normalized, cfg);
    if count == 0 {
        return normalized;
    }
    let mean = sum / count as f64;
    let factor = (GLOBAL_MAX - mean).powi(2) / GLOBAL_MAX;
    normalized.scaled(factor)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FusionStrategy {
    /// Sum of maxima-normalized maps.
    #[default]
    Mn,
    /// Mean of range-normalized maps.
    Ap,
    /// Pixel-wise maximum of range-normalized maps.
    Mp,
}

impl FromStr for FusionStrategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mn" => Ok(FusionStrategy::Mn),
            "ap" => Ok(FusionStrategy::Ap),
            "mp" => Ok(FusionStrategy::Mp),
            _ => Err(Error::InvalidValue(format!("unknown fusion strategy {s:?}"))),
        }
    }
}

/// Fuses the semantic and contrast maps; the result is range-normalized.
pub fn fuse(sas: &SaliencyMap, cas: &SaliencyMap, strategy: FusionStrategy, cfg: &MnConfig) -> Result<SaliencyMap> {
    if sas.dims() != cas.dims() {
        return Err(Error::DimensionMismatch(format!(
            "SAS map is {}x{}, CAS map is {}x{}",
            sas.width(),
            sas.height(),
            cas.width(),
            cas.height()
        )));
    }
    let (a, b) = match strategy {
        FusionStrategy::Mn => (maxima_normalize(sas, cfg), maxima_normalize(cas, cfg)),
        FusionStrategy::Ap | FusionStrategy::Mp => (normalize_range(sas), normalize_range(cas)),
    };
    let combine: fn(f64, f64) -> f64 = match strategy {
        FusionStrategy::Mn => |x, y| x + y,
        FusionStrategy::Ap => |x, y| (x + y) / 2.0,
        FusionStrategy::Mp => f64::max,
    };
    let values = a.values().iter().zip(b.values()).map(|(x, y)| combine(*x, *y)).collect();
    Ok(normalize_range(&SaliencyMap::from_vec_unchecked(sas.width(), sas.height(), values)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn cfg() -> MnConfig {
        MnConfig::default()
    }

    #[test]
    fn single_center_peak_vanishes() {
        let m = SaliencyMap::from_rows(&[[0.0, 0.0, 0.0], [0.0, 5.0, 0.0], [0.0, 0.0, 0.0]]).unwrap();
        let out = maxima_normalize(&m, &cfg());
        assert!(out.values().iter().all(|v| *v == 0.0));
    }

    fn two_peaks(second: f64) -> SaliencyMap {
        SaliencyMap::from_fn(9, 5, |x, y| match (x, y) {
            (2, 2) => 1.0,
            (6, 2) => second,
            _ => 0.0,
        })
        .unwrap()
    }

    #[test]
    fn two_peaks_scaled_by_squared_gap() {
        let out = maxima_normalize(&two_peaks(0.4), &cfg());
        let (count, sum) = local_maxima(&two_peaks(0.4), &cfg());
        assert_eq!(count, 2);
        assert!((sum - 1.4).abs() < 1e-12);
        assert!((out.get(2, 2) - 0.09).abs() < 1e-12);
        assert!((out.get(6, 2) - 0.036).abs() < 1e-12);
    }

    #[test]
    fn peak_below_threshold_is_ignored() {
        let out = maxima_normalize(&two_peaks(0.05), &cfg());
        assert!(out.values().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn no_maxima_returns_normalized() {
        // Plateau: strict comparison finds no maximum.
        let m = SaliencyMap::from_fn(5, 5, |x, _| if x >= 2 { 4.0 } else { 2.0 }).unwrap();
        assert_eq!(maxima_normalize(&m, &cfg()), normalize_range(&m));
        let flat = SaliencyMap::filled(4, 4, 3.0);
        assert!(maxima_normalize(&flat, &cfg()).values().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn border_pixels_are_not_maxima() {
        let m = SaliencyMap::from_fn(5, 5, |x, y| if (x, y) == (0, 2) { 1.0 } else { 0.2 }).unwrap();
        assert_eq!(local_maxima(&normalize_range(&m), &cfg()).0, 0);
    }

    #[test]
    fn diagonal_neighborhood_ignores_edge_neighbors() {
        // Center beats diagonals but not its right neighbor.
        let m = SaliencyMap::from_rows(&[[0.0, 0.0, 0.0], [0.0, 0.8, 1.0], [0.0, 0.0, 0.0]]).unwrap();
        let diag = MnConfig {
            neighborhood: Neighborhood::Diagonal,
            ..cfg()
        };
        assert_eq!(local_maxima(&m, &diag).0, 1);
        assert_eq!(local_maxima(&m, &cfg()).0, 0);
    }

    #[test]
    fn threshold_validation() {
        for t in [0.0, 1.0, -0.5, f64::NAN] {
            assert!(MnConfig { local_max_threshold: t, ..cfg() }.validate().is_err());
        }
        assert!(cfg().validate().is_ok());
    }

    fn textured(seed: usize) -> SaliencyMap {
        SaliencyMap::from_fn(12, 10, |x, y| ((x * 7 + y * 13 + seed * 5) % 23) as f64).unwrap()
    }

    #[test]
    fn average_of_same_map_is_normalized_map() {
        let s = textured(1);
        assert_eq!(fuse(&s, &s, FusionStrategy::Ap, &cfg()).unwrap(), normalize_range(&s));
    }

    #[test]
    fn max_with_zero_map() {
        let s = textured(2);
        let z = SaliencyMap::zeros(12, 10);
        assert_eq!(fuse(&s, &z, FusionStrategy::Mp, &cfg()).unwrap(), normalize_range(&s));
    }

    #[test]
    fn single_peak_sas_leaves_cas() {
        let sas = SaliencyMap::from_fn(9, 5, |x, y| if (x, y) == (4, 2) { 3.0 } else { 0.0 }).unwrap();
        let cas = two_peaks(0.4);
        let out = fuse(&sas, &cas, FusionStrategy::Mn, &cfg()).unwrap();
        assert_eq!(out, normalize_range(&maxima_normalize(&cas, &cfg())));
    }

    #[test]
    fn mismatched_dims_rejected() {
        let a = SaliencyMap::zeros(3, 3);
        let b = SaliencyMap::zeros(3, 4);
        assert!(fuse(&a, &b, FusionStrategy::Ap, &cfg()).is_err());
    }

    fn arb_map() -> impl Strategy<Value = SaliencyMap> {
        proptest::collection::vec(0.0f64..1.0, 64).prop_map(|v| SaliencyMap::new(8, 8, v).unwrap())
    }

    proptest! {
        #[test]
        fn mn_is_a_scaled_normalization(m in arb_map()) {
            let out = maxima_normalize(&m, &cfg());
            let n = normalize_range(&m);
            let k = out.max();
            prop_assert!((0.0..=1.0).contains(&k));
            for (o, v) in out.values().iter().zip(n.values()) {
                prop_assert!((o - k * v).abs() < 1e-12);
            }
            if k > 0.0 {
                prop_assert_eq!(out.argmax(), m.argmax());
            }
        }

        #[test]
        fn fuse_is_symmetric_and_bounded(a in arb_map(), b in arb_map()) {
            for s in [FusionStrategy::Mn, FusionStrategy::Ap, FusionStrategy::Mp] {
                let ab = fuse(&a, &b, s, &cfg()).unwrap();
                let ba = fuse(&b, &a, s, &cfg()).unwrap();
                prop_assert_eq!(&ab, &ba);
                prop_assert!(ab.values().iter().all(|v| (0.0..=1.0).contains(v)));
            }
        }
    }
}
