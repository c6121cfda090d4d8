//! Key spaces, parametric access distributions and replayable traces.

mod sampler;
mod trace;

pub use sampler::{sample_key, KeySampler, X_MAX_EXPONENTIAL, X_MAX_GAUSSIAN};
pub use trace::{concat_phases, generate_trace, PhaseMark, Trace, TRACE_MAGIC};

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Keys per GB of tenant data: 4-byte keys with 100 KB values.
pub const KEYS_PER_GB: f64 = 10_240.0;

/// Converts a size in GB to a whole number of 100 KB objects.
pub fn gb_to_objects(gb: f64) -> u64 {
    (gb * KEYS_PER_GB).round() as u64
}

/// Workload families, ordered from most to least cache-hungry.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Uniform,
    Gaussian,
    Exponential,
    Zipf,
}

impl Family {
    pub const ALL: [Family; 4] = [Family::Uniform, Family::Gaussian, Family::Exponential, Family::Zipf];

    pub fn code(self) -> u8 {
        match self {
            Family::Uniform => 0,
            Family::Gaussian => 1,
            Family::Exponential => 2,
            Family::Zipf => 3,
        }
    }

    pub fn from_code(code: u8) -> Option<Family> {
        Family::ALL.into_iter().find(|f| f.code() == code)
    }

    pub fn name(self) -> &'static str {
        match self {
            Family::Uniform => "uniform",
            Family::Gaussian => "gaussian",
            Family::Exponential => "exponential",
            Family::Zipf => "zipf",
        }
    }

    /// Whether a larger parameter value means a heavier skew (and so a
    /// smaller cache need). Gaussian skew grows as sigma shrinks.
    pub fn skew_increases_with_param(self) -> bool {
        !matches!(self, Family::Gaussian)
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "uniform" => Ok(Family::Uniform),
            "gaussian" | "gauss" | "normal" => Ok(Family::Gaussian),
            "exponential" | "exp" => Ok(Family::Exponential),
            "zipf" => Ok(Family::Zipf),
            other => Err(Error::invalid(format!("unknown distribution family `{other}`"))),
        }
    }
}

/// A workload family together with its skew parameter
/// (sigma, lambda or rho; stored as 0 for uniform).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DistributionSpec {
    pub family: Family,
    #[serde(default)]
    pub param: f64,
}

impl DistributionSpec {
    pub fn new(family: Family, param: f64) -> Result<Self> {
        if family == Family::Uniform {
            return Ok(Self::uniform());
        }
        if !(param.is_finite() && param > 0.0) {
            return Err(Error::invalid(format!(
                "{family} parameter must be positive, got {param}"
            )));
        }
        Ok(Self { family, param })
    }

    pub fn uniform() -> Self {
        Self {
            family: Family::Uniform,
            param: 0.0,
        }
    }

    pub fn gaussian(sigma: f64) -> Result<Self> {
        Self::new(Family::Gaussian, sigma)
    }

    pub fn exponential(lambda: f64) -> Result<Self> {
        Self::new(Family::Exponential, lambda)
    }

    pub fn zipf(rho: f64) -> Result<Self> {
        Self::new(Family::Zipf, rho)
    }
}

impl fmt::Display for DistributionSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.family {
            Family::Uniform => f.write_str("uniform"),
            fam => write!(f, "{fam}({:.1})", self.param),
        }
    }
}

/// Parses `uniform`, `zipf:1.1`, `gaussian:0.7`, ...
impl FromStr for DistributionSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (fam, param) = match s.split_once(':') {
            Some((f, p)) => {
                let p = p
                    .trim()
                    .parse::<f64>()
                    .map_err(|_| Error::invalid(format!("bad distribution parameter in `{s}`")))?;
                (f, Some(p))
            }
            None => (s, None),
        };
        let family: Family = fam.trim().parse()?;
        match (family, param) {
            (Family::Uniform, _) => Ok(DistributionSpec::uniform()),
            (_, Some(p)) => DistributionSpec::new(family, p),
            (_, None) => Err(Error::invalid(format!(
                "{family} needs a parameter, e.g. `{family}:1.0`"
            ))),
        }
    }
}

/// The tenant's key universe: keys `0..key_count`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KeySpace {
    pub data_gb: f64,
    pub key_count: u32,
}

impl KeySpace {
    pub fn from_gb(data_gb: f64) -> Result<Self> {
        if !(data_gb.is_finite() && data_gb > 0.0) {
            return Err(Error::invalid(format!("data size must be positive, got {data_gb} GB")));
        }
        let keys = gb_to_objects(data_gb);
        if keys == 0 || keys > u32::MAX as u64 {
            return Err(Error::invalid(format!("data size {data_gb} GB maps to {keys} keys")));
        }
        Ok(Self {
            data_gb,
            key_count: keys as u32,
        })
    }

    pub fn from_key_count(key_count: u32) -> Result<Self> {
        if key_count == 0 {
            return Err(Error::invalid("key space must hold at least one key"));
        }
        Ok(Self {
            data_gb: key_count as f64 / KEYS_PER_GB,
            key_count,
        })
    }
}

pub fn keyspace_from_gb(data_gb: f64) -> Result<KeySpace> {
    KeySpace::from_gb(data_gb)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn keyspace_sizes() {
        assert_eq!(keyspace_from_gb(1.0).unwrap().key_count, 10_240);
        assert_eq!(keyspace_from_gb(3.0).unwrap().key_count, 30_720);
        assert_eq!(keyspace_from_gb(0.1).unwrap().key_count, 1_024);
        assert!(matches!(keyspace_from_gb(0.0), Err(Error::InvalidArgument(_))));
        assert!(keyspace_from_gb(-1.0).is_err());
        assert!(keyspace_from_gb(f64::NAN).is_err());
    }

    #[test]
    fn spec_parsing() {
        assert_eq!(
            "uniform".parse::<DistributionSpec>().unwrap(),
            DistributionSpec::uniform()
        );
        let z: DistributionSpec = "zipf:1.1".parse().unwrap();
        assert_eq!(z.family, Family::Zipf);
        assert!((z.param - 1.1).abs() < 1e-12);
        assert!("zipf".parse::<DistributionSpec>().is_err());
        assert!("pareto:1".parse::<DistributionSpec>().is_err());
        assert!("exp:0".parse::<DistributionSpec>().is_err());
        assert_eq!(DistributionSpec::new(Family::Uniform, 5.0).unwrap().param, 0.0);
    }

    #[test]
    fn family_codes_round_trip() {
        for f in Family::ALL {
            assert_eq!(Family::from_code(f.code()), Some(f));
            assert_eq!(f.name().parse::<Family>().unwrap(), f);
        }
        assert_eq!(Family::from_code(9), None);
    }
}
