use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Regressor inputs: tenant data size, cache size (both GB) and the
/// distribution parameter (0 for uniform).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub data_gb: f64,
    pub cache_gb: f64,
    pub param: f64,
}

impl FeatureVector {
    pub fn new(data_gb: f64, cache_gb: f64, param: f64) -> Result<Self> {
        if !(data_gb > 0.0 && cache_gb > 0.0 && param.is_finite() && data_gb.is_finite() && cache_gb.is_finite()) {
            return Err(Error::invalid(format!(
                "features need positive finite sizes, got data {data_gb} GB, cache {cache_gb} GB, param {param}"
            )));
        }
        Ok(Self {
            data_gb,
            cache_gb,
            param,
        })
    }

    pub fn as_array(&self) -> [f64; 3] {
        [self.data_gb, self.cache_gb, self.param]
    }
}

/// How sizes are presented to a regressor before z-scoring.
///
/// Hit rates under the key mappings depend on cache and data size mostly
/// through their ratio. `Log` makes that ratio a linear direction; `LogRatio`
/// gives it its own axis, so the response barely varies along `ln data_gb`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum SizeTransform {
    /// `(data_gb, cache_gb)`.
    #[default]
    Raw,
    /// `(ln data_gb, ln cache_gb)`.
    Log,
    /// `(ln data_gb, ln(cache_gb / data_gb))`.
    LogRatio,
}

impl SizeTransform {
    pub(crate) fn code(self) -> u8 {
        match self {
            SizeTransform::Raw => 0,
            SizeTransform::Log => 1,
            SizeTransform::LogRatio => 2,
        }
    }

    pub(crate) fn from_code(code: u8) -> Option<Self> {
        [SizeTransform::Raw, SizeTransform::Log, SizeTransform::LogRatio]
            .into_iter()
            .find(|t| t.code() == code)
    }

    fn forward(self, x: &FeatureVector) -> [f64; 3] {
        match self {
            SizeTransform::Raw => x.as_array(),
            SizeTransform::Log => [x.data_gb.ln(), x.cache_gb.ln(), x.param],
            SizeTransform::LogRatio => [x.data_gb.ln(), (x.cache_gb / x.data_gb).ln(), x.param],
        }
    }

    fn inverse(self, a: [f64; 3]) -> FeatureVector {
        let (data_gb, cache_gb) = match self {
            SizeTransform::Raw => (a[0], a[1]),
            SizeTransform::Log => (a[0].exp(), a[1].exp()),
            SizeTransform::LogRatio => (a[0].exp(), (a[0] + a[1]).exp()),
        };
        FeatureVector {
            data_gb,
            cache_gb,
            param: a[2],
        }
    }
}

/// Per-feature z-scoring after a [`SizeTransform`]. Constant features keep
/// scale 1 and are only centred.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: [f64; 3],
    pub std: [f64; 3],
    /// Features with zero spread in the fitted rows.
    pub constant: [bool; 3],
    pub transform: SizeTransform,
}

impl Standardizer {
    pub fn identity() -> Self {
        Self {
            mean: [0.0; 3],
            std: [1.0; 3],
            constant: [false; 3],
            transform: SizeTransform::Raw,
        }
    }

    pub fn fit<'a>(xs: impl IntoIterator<Item = &'a FeatureVector>, transform: SizeTransform) -> Self {
        let rows: Vec<[f64; 3]> = xs.into_iter().map(|x| transform.forward(x)).collect();
        if rows.is_empty() {
            return Self {
                transform,
                ..Self::identity()
            };
        }
        let n = rows.len() as f64;
        let mean = [0, 1, 2].map(|j| rows.iter().map(|r| r[j]).sum::<f64>() / n);
        let sd = [0, 1, 2].map(|j| (rows.iter().map(|r| (r[j] - mean[j]).powi(2)).sum::<f64>() / n).sqrt());
        let constant = sd.map(|v| v <= 1e-12);
        let std = [0, 1, 2].map(|j| if constant[j] { 1.0 } else { sd[j] });
        Self {
            mean,
            std,
            constant,
            transform,
        }
    }

    /// Whether feature `j` had (numerically) zero spread when fitted.
    pub fn is_constant(&self, j: usize) -> bool {
        self.constant[j]
    }

    pub fn apply(&self, x: &FeatureVector) -> [f64; 3] {
        let a = self.transform.forward(x);
        [0, 1, 2].map(|j| (a[j] - self.mean[j]) / self.std[j])
    }

    pub fn invert(&self, z: [f64; 3]) -> FeatureVector {
        self.transform
            .inverse([0, 1, 2].map(|j| z[j] * self.std[j] + self.mean[j]))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn rejects_bad_features() {
        assert!(FeatureVector::new(0.0, 1.0, 0.0).is_err());
        assert!(FeatureVector::new(1.0, -1.0, 0.0).is_err());
        assert!(FeatureVector::new(1.0, 1.0, f64::NAN).is_err());
    }

    #[test]
    fn constant_feature_only_centred() {
        let xs = [
            FeatureVector {
                data_gb: 1.0,
                cache_gb: 0.1,
                param: 0.0,
            },
            FeatureVector {
                data_gb: 3.0,
                cache_gb: 0.3,
                param: 0.0,
            },
        ];
        let s = Standardizer::fit(&xs, SizeTransform::Raw);
        assert!(s.is_constant(2));
        assert!(!s.is_constant(0));
        let z = s.apply(&xs[0]);
        assert!(
            (z[0] + 1.0).abs() < 1e-12 && (z[1] + 1.0).abs() < 1e-12 && z[2] == 0.0,
            "{z:?}"
        );
    }

    proptest! {
        #[test]
        fn standardize_round_trip(d in 0.1f64..10.0, c in 0.1f64..5.0, p in 0.0f64..3.0) {
            let xs = [
                FeatureVector { data_gb: 1.0, cache_gb: 0.1, param: 0.5 },
                FeatureVector { data_gb: 9.0, cache_gb: 4.0, param: 3.0 },
                FeatureVector { data_gb: 4.0, cache_gb: 2.0, param: 1.0 },
            ];
            for t in [SizeTransform::Raw, SizeTransform::Log, SizeTransform::LogRatio] {
                let s = Standardizer::fit(&xs, t);
                let x = FeatureVector { data_gb: d, cache_gb: c, param: p };
                let back = s.invert(s.apply(&x));
                prop_assert!((back.data_gb - d).abs() <= 1e-12);
                prop_assert!((back.cache_gb - c).abs() <= 1e-12);
                prop_assert!((back.param - p).abs() <= 1e-12);
            }
        }
    }
}
