//! Learning and testing grids and the simulator-backed data builder.

use std::fmt::Write as _;
use std::path::Path;

use super::{FeatureVector, SizeTransform, Standardizer};
use crate::cachesim::{hit_rate_curve, DEFAULT_ORACLE_QUERIES, DEFAULT_WARMUP_FRACTION};
use crate::error::{Error, Result};
use crate::par::{self, Exec};
use crate::rng::derive_seed;
use crate::workload::{keyspace_from_gb, DistributionSpec, Family};

pub const TRAINING_CSV_HEADER: &str = "family,param,data_gb,cache_gb,hit_rate_pct";

/// Cache sizes every grid is evaluated at: 0.1 to 4.0 GB in 0.1 GB steps.
pub fn cache_grid() -> Vec<f64> {
    (1..=40).map(|i| i as f64 / 10.0).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct DataGrid {
    pub family: Family,
    pub data_sizes_gb: Vec<f64>,
    pub params: Vec<f64>,
    pub cache_sizes_gb: Vec<f64>,
}

fn one_to_nine() -> Vec<f64> {
    (1..=9).map(f64::from).collect()
}

impl DataGrid {
    /// Training grid per family.
    pub fn training(family: Family) -> Self {
        let (data, params) = match family {
            Family::Uniform => (vec![1.0, 2.0, 4.0, 8.0], vec![0.0]),
            Family::Gaussian | Family::Exponential => (one_to_nine(), vec![0.5, 1.0, 1.5, 2.0]),
            Family::Zipf => (one_to_nine(), vec![0.5, 1.0, 1.5, 2.0, 2.5, 3.0]),
        };
        Self {
            family,
            data_sizes_gb: data,
            params,
            cache_sizes_gb: cache_grid(),
        }
    }

    /// Testing grid per family; disjoint from [`DataGrid::training`].
    pub fn testing(family: Family) -> Self {
        let (data, params) = match family {
            Family::Uniform => (vec![3.0, 6.0], vec![0.0]),
            Family::Gaussian | Family::Exponential => (one_to_nine(), vec![0.7, 1.2, 1.9]),
            Family::Zipf => (one_to_nine(), vec![0.7, 1.2, 1.9, 2.3, 2.6]),
        };
        Self {
            family,
            data_sizes_gb: data,
            params,
            cache_sizes_gb: cache_grid(),
        }
    }

    pub fn row_count(&self) -> usize {
        self.data_sizes_gb.len() * self.params.len() * self.cache_sizes_gb.len()
    }

    fn points(&self) -> Vec<(f64, f64)> {
        self.data_sizes_gb
            .iter()
            .flat_map(|&d| self.params.iter().map(move |&p| (d, p)))
            .collect()
    }

    /// True when no (data, param, cache) triple appears in both grids.
    pub fn is_disjoint_from(&self, other: &DataGrid) -> bool {
        let a = self.points();
        let b = other.points();
        let shared_caches = self
            .cache_sizes_gb
            .iter()
            .any(|c| other.cache_sizes_gb.iter().any(|o| (o - c).abs() < 1e-9));
        !shared_caches
            || !a
                .iter()
                .any(|(d, p)| b.iter().any(|(e, q)| (d - e).abs() < 1e-9 && (p - q).abs() < 1e-9))
    }
}

/// Simulation settings used to label grid rows with hit rates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimulatorOracle {
    pub queries_per_point: usize,
    pub warmup_fraction: f64,
    pub exec: Exec,
}

impl Default for SimulatorOracle {
    fn default() -> Self {
        Self {
            queries_per_point: DEFAULT_ORACLE_QUERIES,
            warmup_fraction: DEFAULT_WARMUP_FRACTION,
            exec: Exec::default(),
        }
    }
}

impl SimulatorOracle {
    pub fn with_queries(queries_per_point: usize) -> Self {
        Self {
            queries_per_point,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainingSet {
    pub family: Family,
    pub rows: Vec<(FeatureVector, f64)>,
}

impl TrainingSet {
    pub fn new(family: Family, rows: Vec<(FeatureVector, f64)>) -> Result<Self> {
        if let Some((_, t)) = rows.iter().find(|(_, t)| !(0.0..=100.0).contains(t)) {
            return Err(Error::invalid(format!("target {t} outside [0, 100]")));
        }
        Ok(Self { family, rows })
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Standardisation statistics from these rows only.
    pub fn standardizer(&self, transform: SizeTransform) -> Standardizer {
        Standardizer::fit(self.rows.iter().map(|(x, _)| x), transform)
    }

    pub fn targets(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.1).collect()
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::with_capacity(40 * (self.rows.len() + 1));
        s.push_str(TRAINING_CSV_HEADER);
        s.push('\n');
        for (x, t) in &self.rows {
            let _ = writeln!(s, "{},{},{},{},{:.6}", self.family, x.param, x.data_gb, x.cache_gb, t);
        }
        s
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        match lines.next() {
            Some(h) if h.trim() == TRAINING_CSV_HEADER => {}
            Some(h) => {
                return Err(Error::format(format!(
                    "training csv header `{h}` does not match `{TRAINING_CSV_HEADER}`"
                )))
            }
            None => return Err(Error::format("training csv is empty")),
        }
        let mut family = None;
        let mut rows = Vec::new();
        for (i, line) in lines.enumerate().filter(|(_, l)| !l.trim().is_empty()) {
            let bad = || Error::format(format!("training csv row {} is malformed: `{line}`", i + 1));
            let f: Vec<&str> = line.split(',').map(str::trim).collect();
            if f.len() != 5 {
                return Err(bad());
            }
            let fam: Family = f[0].parse().map_err(|_| bad())?;
            if *family.get_or_insert(fam) != fam {
                return Err(Error::format("training csv mixes several families"));
            }
            let num = |s: &str| s.parse::<f64>().map_err(|_| bad());
            let x = FeatureVector::new(num(f[2])?, num(f[3])?, num(f[1])?).map_err(|_| bad())?;
            let t = num(f[4])?;
            if !(0.0..=100.0).contains(&t) {
                return Err(bad());
            }
            rows.push((x, t));
        }
        let family = family.ok_or_else(|| Error::format("training csv has no rows"))?;
        Ok(Self { family, rows })
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_csv(&text).map_err(|e| Error::format(format!("{}: {e}", path.display())))
    }
}

/// Labels every grid row with a simulated post-warm-up hit rate. Each
/// (data size, parameter) point gets its own trace seeded by
/// `derive_seed(seed, point_index)` and replayed at every cache size; points
/// fan out across workers, rows come back in grid order.
pub fn build_training_set(grid: &DataGrid, oracle: &SimulatorOracle, seed: u64) -> Result<TrainingSet> {
    if grid.row_count() == 0 {
        return Err(Error::invalid("grid is empty"));
    }
    let points = grid.points();
    let curves = par::map_range(oracle.exec, points.len(), |i| {
        let (data_gb, param) = points[i];
        let spec = DistributionSpec::new(grid.family, param)?;
        let ks = keyspace_from_gb(data_gb)?;
        let hits = hit_rate_curve(
            spec,
            ks,
            &grid.cache_sizes_gb,
            oracle.queries_per_point,
            oracle.warmup_fraction,
            derive_seed(seed, i as u64),
            Exec::Sequential,
        )?;
        Ok((data_gb, param, hits))
    });
    let mut rows = Vec::with_capacity(grid.row_count());
    for c in curves {
        let (data_gb, param, hits): (f64, f64, Vec<f64>) = c?;
        for (&cache_gb, h) in grid.cache_sizes_gb.iter().zip(hits) {
            rows.push((
                FeatureVector {
                    data_gb,
                    cache_gb,
                    param,
                },
                h,
            ));
        }
    }
    TrainingSet::new(grid.family, rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_row_counts() {
        assert_eq!(DataGrid::training(Family::Uniform).row_count(), 160);
        assert_eq!(DataGrid::training(Family::Gaussian).row_count(), 1_440);
        assert_eq!(DataGrid::training(Family::Exponential).row_count(), 1_440);
        assert_eq!(DataGrid::training(Family::Zipf).row_count(), 2_160);
        assert_eq!(DataGrid::testing(Family::Uniform).row_count(), 80);
        assert_eq!(DataGrid::testing(Family::Zipf).row_count(), 1_800);
    }

    #[test]
    fn train_and_test_grids_disjoint() {
        for f in Family::ALL {
            assert!(DataGrid::testing(f).is_disjoint_from(&DataGrid::training(f)), "{f}");
            assert!(!DataGrid::training(f).is_disjoint_from(&DataGrid::training(f)));
        }
    }

    #[test]
    fn uniform_set_targets_and_csv() {
        let grid = DataGrid::training(Family::Uniform);
        let set = build_training_set(&grid, &SimulatorOracle::default(), 1).unwrap();
        assert_eq!(set.len(), 160);
        for (x, t) in &set.rows {
            assert!((0.0..=100.0).contains(t));
            if x.cache_gb >= x.data_gb {
                assert!(*t >= 99.0, "{x:?} -> {t}");
            }
        }
        let back = TrainingSet::from_csv(&set.to_csv()).unwrap();
        assert_eq!(back.family, Family::Uniform);
        assert_eq!(back.len(), 160);
        for ((a, ta), (b, tb)) in set.rows.iter().zip(&back.rows) {
            assert_eq!(a, b);
            assert!((ta - tb).abs() < 1e-6);
        }
        let again = build_training_set(&grid, &SimulatorOracle::default(), 1).unwrap();
        assert_eq!(set, again);
    }

    #[test]
    fn csv_schema_errors() {
        assert!(matches!(TrainingSet::from_csv("a,b,c\n"), Err(Error::Format(_))));
        let two = format!("{TRAINING_CSV_HEADER}\nzipf,1,1,0.1,50\nuniform,0,1,0.1,50\n");
        assert!(TrainingSet::from_csv(&two).is_err());
        let bad = format!("{TRAINING_CSV_HEADER}\nzipf,1,1,0.1,150\n");
        assert!(TrainingSet::from_csv(&bad).is_err());
    }
}
