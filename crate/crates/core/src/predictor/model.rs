//! Family-tagged hit-rate models and their binary file format.
//!
//! Layout (little endian):
//!
//! ```text
//! magic "CPMD" | version u16 | family u8 | kind u8 | mean 3xf64 | std 3xf64
//!     | flags u8 (bits 0-2 constant features, bits 3-4 size transform) | body
//! ```
//!
//! FCN body: hidden u32, activation u8, loss u8, regularizer u8, regularizer
//! placement u8 (1 = hidden layer), penalty f64, learning rate f64, batch u32,
//! epochs u32, seed u64, params (u32 count + f64s), running mean and variance
//! (20 f64 each), loss history (u32 count + f64s).
//! GPR body: cv, ls, noise f64, n u32, n x 3 standardised inputs, n alphas.
//! LogFit body: a, b f64.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use super::fcn::{Activation, FcnConfig, FcnModel, FcnNetwork, Layout, Loss, Regularizer, FIRST_LAYER};
use super::gpr::{GprConfig, GprModel};
use super::logfit::LogFitModel;
use super::{FeatureVector, SizeTransform, Standardizer};
use crate::error::{Error, Result};
use crate::workload::Family;

pub const MODEL_MAGIC: &[u8; 4] = b"CPMD";
pub const MODEL_VERSION: u16 = 1;
const HIDDEN_LAYER_PLACEMENT: u8 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ModelKind {
    Fcn,
    Gpr,
    LogFit,
}

impl ModelKind {
    pub const ALL: [ModelKind; 3] = [ModelKind::Fcn, ModelKind::Gpr, ModelKind::LogFit];

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Fcn => "fcn",
            ModelKind::Gpr => "gpr",
            ModelKind::LogFit => "logfit",
        }
    }

    fn code(self) -> u8 {
        match self {
            ModelKind::Fcn => 1,
            ModelKind::Gpr => 2,
            ModelKind::LogFit => 3,
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "fcn" => Ok(ModelKind::Fcn),
            "gpr" => Ok(ModelKind::Gpr),
            "logfit" | "log" => Ok(ModelKind::LogFit),
            other => Err(Error::invalid(format!(
                "unknown model kind `{other}` (fcn, gpr, logfit)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ModelBody {
    Untrained,
    Fcn(FcnModel),
    Gpr(GprModel),
    LogFit(LogFitModel),
}

/// Anything that maps features to a hit-rate percentage.
pub trait HitRatePredictor {
    fn predict_hit(&self, x: &FeatureVector) -> Result<f64>;

    /// Family the predictor was trained for, if it is tied to one.
    fn family(&self) -> Option<Family> {
        None
    }

    fn predict_hits(&self, xs: &[FeatureVector]) -> Result<Vec<f64>> {
        xs.iter().map(|x| self.predict_hit(x)).collect()
    }
}

impl<F: Fn(&FeatureVector) -> f64> HitRatePredictor for F {
    fn predict_hit(&self, x: &FeatureVector) -> Result<f64> {
        Ok(self(x))
    }
}

/// A trained H(cache, d) for one distribution family.
#[derive(Debug, Clone, PartialEq)]
pub struct HitRateModel {
    pub family: Family,
    pub body: ModelBody,
}

fn clamp_pct(v: f64) -> f64 {
    if v.is_nan() {
        0.0
    } else {
        v.clamp(0.0, 100.0)
    }
}

impl HitRateModel {
    pub fn untrained(family: Family) -> Self {
        Self {
            family,
            body: ModelBody::Untrained,
        }
    }

    pub fn fcn(family: Family, m: FcnModel) -> Self {
        Self {
            family,
            body: ModelBody::Fcn(m),
        }
    }

    pub fn gpr(family: Family, m: GprModel) -> Self {
        Self {
            family,
            body: ModelBody::Gpr(m),
        }
    }

    pub fn logfit(family: Family, m: LogFitModel) -> Self {
        Self {
            family,
            body: ModelBody::LogFit(m),
        }
    }

    pub fn kind(&self) -> Option<ModelKind> {
        match self.body {
            ModelBody::Untrained => None,
            ModelBody::Fcn(_) => Some(ModelKind::Fcn),
            ModelBody::Gpr(_) => Some(ModelKind::Gpr),
            ModelBody::LogFit(_) => Some(ModelKind::LogFit),
        }
    }

    fn untrained_error(&self) -> Error {
        Error::State(format!("{} model has not been trained", self.family))
    }

    fn check_input(x: &FeatureVector) -> Result<()> {
        if x.as_array().iter().all(|v| v.is_finite()) {
            Ok(())
        } else {
            Err(Error::invalid(format!("non-finite features {x:?}")))
        }
    }

    /// Predicted hit rate in percent, clamped to `[0, 100]`.
    pub fn predict(&self, x: &FeatureVector) -> Result<f64> {
        Self::check_input(x)?;
        let raw = match &self.body {
            ModelBody::Untrained => return Err(self.untrained_error()),
            ModelBody::Fcn(m) => m.predict_many(std::slice::from_ref(x))[0],
            ModelBody::Gpr(m) => m.predict_raw(x),
            ModelBody::LogFit(m) => m.predict_raw(x.cache_gb),
        };
        Ok(clamp_pct(raw))
    }

    /// Batched [`HitRateModel::predict`]; the FCN runs one forward pass.
    pub fn predict_many(&self, xs: &[FeatureVector]) -> Result<Vec<f64>> {
        xs.iter().try_for_each(Self::check_input)?;
        match &self.body {
            ModelBody::Untrained => Err(self.untrained_error()),
            ModelBody::Fcn(m) => Ok(m.predict_many(xs).into_iter().map(clamp_pct).collect()),
            _ => xs.iter().map(|x| self.predict(x)).collect(),
        }
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let kind = self.kind().ok_or_else(|| self.untrained_error())?;
        let mut w = Writer(Vec::new());
        w.0.extend_from_slice(MODEL_MAGIC);
        w.u16(MODEL_VERSION);
        w.u8(self.family.code());
        w.u8(kind.code());
        let standardizer = match &self.body {
            ModelBody::Fcn(m) => m.standardizer,
            ModelBody::Gpr(m) => m.standardizer,
            _ => Standardizer::identity(),
        };
        w.f64s(&standardizer.mean);
        w.f64s(&standardizer.std);
        let flags: u8 = standardizer
            .constant
            .iter()
            .enumerate()
            .map(|(j, &c)| (c as u8) << j)
            .sum();
        w.u8(flags | standardizer.transform.code() << 3);
        match &self.body {
            ModelBody::Untrained => unreachable!(),
            ModelBody::Fcn(m) => {
                let c = &m.config;
                w.u32(c.hidden_neurons as u32);
                w.u8(match c.activation {
                    Activation::Sigmoid => 0,
                    Activation::Relu => 1,
                });
                w.u8(match c.loss {
                    Loss::Mae => 0,
                    Loss::Mse => 1,
                });
                w.u8(match c.regularizer {
                    Regularizer::L1 => 1,
                    Regularizer::L2 => 2,
                });
                w.u8(HIDDEN_LAYER_PLACEMENT);
                w.f64(c.l2_coefficient);
                w.f64(c.learning_rate);
                w.u32(c.batch_size as u32);
                w.u32(c.epochs as u32);
                w.u64(c.seed);
                w.vec(&m.network.params);
                w.f64s(&m.network.running_mean);
                w.f64s(&m.network.running_var);
                w.vec(&m.loss_history);
            }
            ModelBody::Gpr(m) => {
                w.f64(m.config.cv);
                w.f64(m.config.ls);
                w.f64(m.config.noise);
                w.u32(m.inputs.len() as u32);
                for x in &m.inputs {
                    w.f64s(x);
                }
                w.f64s(&m.alpha);
            }
            ModelBody::LogFit(m) => {
                w.f64(m.a);
                w.f64(m.b);
            }
        }
        Ok(w.0)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { buf: bytes, pos: 0 };
        if r.take(4)? != MODEL_MAGIC {
            return Err(Error::format("not a cachepilot model file (bad magic)"));
        }
        let version = r.u16()?;
        if version != MODEL_VERSION {
            return Err(Error::format(format!(
                "model file version {version} is not supported (expected version {MODEL_VERSION})"
            )));
        }
        let family = Family::from_code(r.u8()?).ok_or_else(|| Error::format("unknown family code in model file"))?;
        let kind = r.u8()?;
        let mean = r.arr3()?;
        let std = r.arr3()?;
        let mask = r.u8()?;
        let constant = [0, 1, 2].map(|j| mask & (1 << j) != 0);
        let standardizer = Standardizer {
            mean,
            std,
            constant,
            transform: SizeTransform::from_code(mask >> 3)
                .ok_or_else(|| Error::format(format!("unknown size transform code {}", mask >> 3)))?,
        };
        let body = match kind {
            1 => {
                let hidden = r.u32()? as usize;
                let activation = match r.u8()? {
                    0 => Activation::Sigmoid,
                    1 => Activation::Relu,
                    c => return Err(Error::format(format!("unknown activation code {c}"))),
                };
                let loss = match r.u8()? {
                    0 => Loss::Mae,
                    1 => Loss::Mse,
                    c => return Err(Error::format(format!("unknown loss code {c}"))),
                };
                let regularizer = match r.u8()? {
                    1 => Regularizer::L1,
                    2 => Regularizer::L2,
                    c => return Err(Error::format(format!("unknown regularizer code {c}"))),
                };
                if r.u8()? != HIDDEN_LAYER_PLACEMENT {
                    return Err(Error::format("unsupported regularizer placement"));
                }
                let config = FcnConfig {
                    hidden_neurons: hidden,
                    loss,
                    activation,
                    regularizer,
                    l2_coefficient: r.f64()?,
                    learning_rate: r.f64()?,
                    batch_size: r.u32()? as usize,
                    epochs: r.u32()? as usize,
                    seed: r.u64()?,
                };
                let layout = Layout { hidden };
                let params = r.vec()?;
                if params.len() != layout.len() {
                    return Err(Error::format(format!(
                        "fcn parameter count {} does not match hidden width {hidden}",
                        params.len()
                    )));
                }
                let running_mean = r.f64s(FIRST_LAYER)?;
                let running_var = r.f64s(FIRST_LAYER)?;
                let loss_history = r.vec()?;
                ModelBody::Fcn(FcnModel {
                    config,
                    standardizer,
                    network: FcnNetwork {
                        activation,
                        loss,
                        regularizer,
                        reg_coefficient: config.l2_coefficient,
                        layout,
                        params,
                        running_mean,
                        running_var,
                    },
                    loss_history,
                })
            }
            2 => {
                let config = GprConfig {
                    cv: r.f64()?,
                    ls: r.f64()?,
                    noise: r.f64()?,
                };
                let n = r.u32()? as usize;
                r.need(n.saturating_mul(32))?;
                let inputs = (0..n).map(|_| r.arr3()).collect::<Result<Vec<_>>>()?;
                let alpha = r.f64s(n)?;
                ModelBody::Gpr(GprModel {
                    config,
                    standardizer,
                    inputs,
                    alpha,
                })
            }
            3 => ModelBody::LogFit(LogFitModel {
                a: r.f64()?,
                b: r.f64()?,
            }),
            c => return Err(Error::format(format!("unknown model kind code {c}"))),
        };
        if r.pos != bytes.len() {
            return Err(Error::format(format!(
                "{} trailing bytes in model file",
                bytes.len() - r.pos
            )));
        }
        Ok(Self { family, body })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes).map_err(|e| match e {
            Error::Format(m) => Error::format(format!("{}: {m}", path.display())),
            other => other,
        })
    }
}

impl HitRatePredictor for HitRateModel {
    fn predict_hit(&self, x: &FeatureVector) -> Result<f64> {
        self.predict(x)
    }

    fn family(&self) -> Option<Family> {
        Some(self.family)
    }

    fn predict_hits(&self, xs: &[FeatureVector]) -> Result<Vec<f64>> {
        self.predict_many(xs)
    }
}

pub fn save_model(model: &HitRateModel, path: &Path) -> Result<()> {
    model.save(path)
}

pub fn load_model(path: &Path) -> Result<HitRateModel> {
    HitRateModel::load(path)
}

struct Writer(Vec<u8>);

impl Writer {
    fn u8(&mut self, v: u8) {
        self.0.push(v);
    }
    fn u16(&mut self, v: u16) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn u32(&mut self, v: u32) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn u64(&mut self, v: u64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn f64(&mut self, v: f64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn f64s(&mut self, v: &[f64]) {
        v.iter().for_each(|x| self.f64(*x));
    }
    fn vec(&mut self, v: &[f64]) {
        self.u32(v.len() as u32);
        self.f64s(v);
    }
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn need(&self, n: usize) -> Result<()> {
        if self.buf.len() - self.pos < n {
            Err(Error::format(format!(
                "model file truncated at byte {} (needed {n} more)",
                self.pos
            )))
        } else {
            Ok(())
        }
    }
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        self.need(n)?;
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }
    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }
    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }
    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
    fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        self.need(n.saturating_mul(8))?;
        (0..n).map(|_| self.f64()).collect()
    }
    fn arr3(&mut self) -> Result<[f64; 3]> {
        Ok([self.f64()?, self.f64()?, self.f64()?])
    }
    fn vec(&mut self) -> Result<Vec<f64>> {
        let n = self.u32()? as usize;
        self.f64s(n)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::predictor::{fcn::train_fcn, gpr::train_gpr, logfit::fit_log, TrainingSet};
    use crate::rng::{self, rng_from_seed};

    fn small_set() -> TrainingSet {
        let mut r = rng_from_seed(11);
        let rows = (0..60)
            .map(|_| {
                let d = 1.0 + 4.0 * rng::unit_f64(&mut r);
                let c = 0.1 + 3.9 * rng::unit_f64(&mut r);
                (FeatureVector::new(d, c, 1.5).unwrap(), (100.0 * c / d).min(100.0))
            })
            .collect();
        TrainingSet::new(Family::Gaussian, rows).unwrap()
    }

    fn probes() -> Vec<FeatureVector> {
        let mut r = rng_from_seed(12);
        (0..100)
            .map(|_| {
                FeatureVector::new(
                    1.0 + 8.0 * rng::unit_f64(&mut r),
                    0.1 + 3.9 * rng::unit_f64(&mut r),
                    1.5,
                )
                .unwrap()
            })
            .collect()
    }

    fn models() -> Vec<HitRateModel> {
        let set = small_set();
        let cfg = FcnConfig {
            epochs: 500,
            ..FcnConfig::tuned(Family::Gaussian)
        };
        vec![
            HitRateModel::fcn(Family::Gaussian, train_fcn(&set, &cfg).unwrap()),
            HitRateModel::gpr(Family::Gaussian, train_gpr(&set, &GprConfig::default()).unwrap()),
            HitRateModel::logfit(
                Family::Gaussian,
                fit_log(&[(0.5, 40.0), (1.0, 60.0), (2.0, 85.0)]).unwrap(),
            ),
        ]
    }

    #[test]
    fn save_load_round_trip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        for m in models() {
            let path = dir.path().join(format!("{}.model", m.kind().unwrap()));
            save_model(&m, &path).unwrap();
            let back = load_model(&path).unwrap();
            assert_eq!(back, m);
            let (a, b) = (
                m.predict_many(&probes()).unwrap(),
                back.predict_many(&probes()).unwrap(),
            );
            assert!(a.iter().zip(&b).all(|(x, y)| x.to_bits() == y.to_bits()));
        }
    }

    #[test]
    fn truncated_and_versioned_files_rejected() {
        for m in models() {
            let bytes = m.to_bytes().unwrap();
            for cut in [0, 3, 7, 20, bytes.len() / 2, bytes.len() - 1] {
                assert!(
                    matches!(HitRateModel::from_bytes(&bytes[..cut]), Err(Error::Format(_))),
                    "cut {cut}"
                );
            }
            let mut v = bytes.clone();
            v[4..6].copy_from_slice(&7u16.to_le_bytes());
            match HitRateModel::from_bytes(&v) {
                Err(Error::Format(msg)) => assert!(msg.contains('7') && msg.contains(&MODEL_VERSION.to_string())),
                other => panic!("{other:?}"),
            }
        }
    }

    #[test]
    fn untrained_model_is_a_state_error() {
        let m = HitRateModel::untrained(Family::Zipf);
        let x = FeatureVector::new(3.0, 1.0, 1.0).unwrap();
        assert!(matches!(m.predict(&x), Err(Error::State(_))));
        assert!(matches!(m.to_bytes(), Err(Error::State(_))));
    }

    #[test]
    fn predictions_clamped() {
        let m = HitRateModel::logfit(Family::Uniform, LogFitModel { a: 50.0, b: 100.0 });
        let lo = m.predict(&FeatureVector::new(3.0, 0.01, 0.0).unwrap()).unwrap();
        let hi = m.predict(&FeatureVector::new(3.0, 4.0, 0.0).unwrap()).unwrap();
        assert_eq!((lo, hi), (0.0, 100.0));
        for m in models() {
            for p in m.predict_many(&probes()).unwrap() {
                assert!((0.0..=100.0).contains(&p));
            }
        }
    }
}
