use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::{DistributionSpec, Family, KeySampler, KeySpace};
use crate::error::{Error, Result};
use crate::rng::{rng_from_seed, SimRng};

pub const TRACE_MAGIC: &[u8; 4] = b"CPT1";
const HEADER_LEN: usize = 4 + 4 + 8 + 8 + 1 + 8;
/// Family code written for traces that concatenate several distributions.
const MIXED_FAMILY_CODE: u8 = 0xFF;

/// Start of a distribution phase inside a trace.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseMark {
    pub start: usize,
    pub spec: DistributionSpec,
}

/// A replayable key sequence for one tenant.
#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub tenant_id: String,
    /// Distribution of the first phase (the only one for a plain trace).
    pub spec: DistributionSpec,
    pub keyspace: KeySpace,
    pub seed: u64,
    pub keys: Vec<u32>,
    /// Phase boundaries, first one at 0. Empty when read back from a file
    /// holding a mixed trace.
    pub phases: Vec<PhaseMark>,
}

impl Trace {
    pub fn len(&self) -> usize {
        self.keys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keys.is_empty()
    }

    pub fn is_mixed(&self) -> bool {
        self.phases.len() > 1
    }

    /// Index of the phase containing query `i`.
    pub fn phase_at(&self, i: usize) -> usize {
        self.phases.partition_point(|p| p.start <= i).saturating_sub(1)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(HEADER_LEN + 4 * self.keys.len());
        out.extend_from_slice(TRACE_MAGIC);
        out.extend_from_slice(&self.keyspace.key_count.to_le_bytes());
        out.extend_from_slice(&(self.keys.len() as u64).to_le_bytes());
        out.extend_from_slice(&self.seed.to_le_bytes());
        let (code, param) = if self.is_mixed() {
            (MIXED_FAMILY_CODE, 0.0)
        } else {
            (self.spec.family.code(), self.spec.param)
        };
        out.push(code);
        out.extend_from_slice(&param.to_le_bytes());
        for k in &self.keys {
            out.extend_from_slice(&k.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Trace> {
        if bytes.len() < HEADER_LEN {
            return Err(Error::format(format!(
                "trace header truncated: {} of {HEADER_LEN} bytes",
                bytes.len()
            )));
        }
        if &bytes[..4] != TRACE_MAGIC {
            return Err(Error::format("bad trace magic, expected CPT1"));
        }
        let key_count = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
        let len = u64::from_le_bytes(bytes[8..16].try_into().unwrap()) as usize;
        let seed = u64::from_le_bytes(bytes[16..24].try_into().unwrap());
        let code = bytes[24];
        let param = f64::from_le_bytes(bytes[25..33].try_into().unwrap());
        let body = &bytes[HEADER_LEN..];
        if body.len()
            != len
                .checked_mul(4)
                .ok_or_else(|| Error::format("trace length overflow"))?
        {
            return Err(Error::format(format!(
                "trace body holds {} bytes, header promises {len} keys",
                body.len()
            )));
        }
        let keyspace = KeySpace::from_key_count(key_count).map_err(|e| Error::format(e.to_string()))?;
        let keys: Vec<u32> = body
            .chunks_exact(4)
            .map(|c| u32::from_le_bytes(c.try_into().unwrap()))
            .collect();
        if let Some(bad) = keys.iter().find(|&&k| k >= key_count) {
            return Err(Error::format(format!("key {bad} outside key space of {key_count}")));
        }
        let (spec, phases) = if code == MIXED_FAMILY_CODE {
            (DistributionSpec::uniform(), Vec::new())
        } else {
            let family = Family::from_code(code).ok_or_else(|| Error::format(format!("unknown family code {code}")))?;
            let spec = DistributionSpec::new(family, param).map_err(|e| Error::format(e.to_string()))?;
            (spec, vec![PhaseMark { start: 0, spec }])
        };
        Ok(Trace {
            tenant_id: "trace".to_string(),
            spec,
            keyspace,
            seed,
            keys,
            phases,
        })
    }

    pub fn write_binary(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn read_binary(path: &Path) -> Result<Trace> {
        let mut buf = Vec::new();
        std::fs::File::open(path)
            .and_then(|mut f| f.read_to_end(&mut buf))
            .map_err(|e| Error::io(path, e))?;
        Trace::from_bytes(&buf)
    }

    /// One key index per line, no header.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(f);
        for k in &self.keys {
            writeln!(w, "{k}").map_err(|e| Error::io(path, e))?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }

    pub fn read_csv_keys(path: &Path) -> Result<Vec<u32>> {
        let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        let mut keys = Vec::new();
        for (i, line) in BufReader::new(f).lines().enumerate() {
            let line = line.map_err(|e| Error::io(path, e))?;
            let k = line
                .trim()
                .parse::<u32>()
                .map_err(|_| Error::format(format!("{}: line {} is not a key index", path.display(), i + 1)))?;
            keys.push(k);
        }
        Ok(keys)
    }
}

fn fill(sampler: &KeySampler, rng: &mut SimRng, length: usize, out: &mut Vec<u32>) {
    out.reserve(length);
    for _ in 0..length {
        out.push(sampler.sample(rng));
    }
}

/// Generates `length` keys from `spec` with a stream seeded by `seed`.
pub fn generate_trace(spec: DistributionSpec, keyspace: KeySpace, length: usize, seed: u64) -> Result<Trace> {
    if length == 0 {
        return Err(Error::invalid("trace length must be at least 1"));
    }
    concat_phases(&[(spec, length)], keyspace, seed)
}

/// Concatenates phases drawn from one continuous random stream, so a single
/// phase reproduces [`generate_trace`] exactly.
pub fn concat_phases(phases: &[(DistributionSpec, usize)], keyspace: KeySpace, seed: u64) -> Result<Trace> {
    let Some(&(first, _)) = phases.first() else {
        return Err(Error::invalid("phase list is empty"));
    };
    if let Some(i) = phases.iter().position(|&(_, len)| len == 0) {
        return Err(Error::invalid(format!("phase {i} has zero length")));
    }
    let mut rng = rng_from_seed(seed);
    let mut keys = Vec::new();
    let mut marks = Vec::with_capacity(phases.len());
    for &(spec, len) in phases {
        marks.push(PhaseMark {
            start: keys.len(),
            spec,
        });
        let sampler = KeySampler::new(spec, keyspace);
        fill(&sampler, &mut rng, len, &mut keys);
    }
    Ok(Trace {
        tenant_id: "tenant-0".to_string(),
        spec: first,
        keyspace,
        seed,
        keys,
        phases: marks,
    })
}
