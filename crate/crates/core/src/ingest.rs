//! Dataset acquisition: the UCI household power text file, a seeded
//! Gaussian-mixture generator and a flat little-endian binary sample format.
//!
//! Binary layout: 16-byte header of four little-endian u32 values
//! (`MAGIC`, `VERSION`, `n`, `d`), then `n·d` little-endian IEEE-754 f32
//! values, sample-major.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::types::SampleSet;

/// `b"MRKS"` read as a little-endian u32.
pub const MAGIC: u32 = u32::from_le_bytes(*b"MRKS");
pub const VERSION: u32 = 1;
pub const HEADER_BYTES: usize = 16;

pub const MISSING_MARKER: &str = "?";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AttributeProjection {
    pub name: String,
    pub column_names: Vec<String>,
}

impl AttributeProjection {
    pub fn new(name: impl Into<String>, columns: &[&str]) -> Result<Self> {
        if columns.is_empty() {
            return Err(Error::config("projection", "at least one column is required"));
        }
        for (i, a) in columns.iter().enumerate() {
            if columns[..i].iter().any(|b| b.eq_ignore_ascii_case(a)) {
                return Err(Error::config("projection", format!("column {a} listed twice")));
            }
        }
        Ok(Self {
            name: name.into(),
            column_names: columns.iter().map(|c| c.to_string()).collect(),
        })
    }

    /// Active and reactive power.
    pub fn power2d() -> Self {
        Self::new("power2d", &["Global_active_power", "Global_reactive_power"]).unwrap()
    }

    /// Active power and the three sub-meterings.
    pub fn power4d() -> Self {
        Self::new(
            "power4d",
            &["Global_active_power", "Sub_metering_1", "Sub_metering_2", "Sub_metering_3"],
        )
        .unwrap()
    }

    pub fn d(&self) -> usize {
        self.column_names.len()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct UciData {
    pub samples: SampleSet,
    /// Data rows read, kept or not.
    pub rows: usize,
    /// Rows dropped for a missing value in a projected column.
    pub dropped: usize,
}

/// Parses a semicolon-separated file with a header row, keeping the projected
/// columns. Column names match case-insensitively.
pub fn parse_uci(path: impl AsRef<Path>, projection: &AttributeProjection) -> Result<UciData> {
    let path = path.as_ref();
    let file = File::open(path)
        .map_err(|e| Error::ingest(None, format!("cannot open {}: {e}", path.display())))?;
    parse_uci_reader(BufReader::new(file), projection)
}

pub fn parse_uci_reader<R: Read>(reader: R, projection: &AttributeProjection) -> Result<UciData> {
    let mut rdr = csv::ReaderBuilder::new()
        .delimiter(b';')
        .has_headers(true)
        .flexible(true)
        .from_reader(reader);
    let headers = rdr
        .headers()
        .map_err(|e| Error::ingest(Some(1), e.to_string()))?
        .clone();
    let columns: Vec<usize> = projection
        .column_names
        .iter()
        .map(|name| {
            headers
                .iter()
                .position(|h| h.trim().eq_ignore_ascii_case(name))
                .ok_or_else(|| Error::ingest(Some(1), format!("column {name} not found in header")))
        })
        .collect::<Result<_>>()?;

    let mut data = Vec::new();
    let mut rows = 0;
    let mut dropped = 0;
    let mut record = csv::StringRecord::new();
    let mut values = Vec::with_capacity(columns.len());
    loop {
        let more = rdr
            .read_record(&mut record)
            .map_err(|e| Error::ingest(e.position().map(|p| p.line() as usize), e.to_string()))?;
        if !more {
            break;
        }
        let line = record.position().map_or(rows + 2, |p| p.line() as usize);
        if record.len() == 1 && record[0].trim().is_empty() {
            continue;
        }
        rows += 1;
        values.clear();
        let mut missing = false;
        for (&col, name) in columns.iter().zip(&projection.column_names) {
            let field = record
                .get(col)
                .ok_or_else(|| Error::ingest(Some(line), format!("row has no {name} field")))?
                .trim();
            if field == MISSING_MARKER {
                missing = true;
                break;
            }
            let v: f32 = field
                .parse()
                .map_err(|_| Error::ingest(Some(line), format!("malformed {name} value {field:?}")))?;
            if !v.is_finite() {
                return Err(Error::ingest(Some(line), format!("non-finite {name} value {field:?}")));
            }
            values.push(v);
        }
        if missing {
            dropped += 1;
        } else {
            data.extend_from_slice(&values);
        }
    }
    if data.is_empty() {
        return Err(Error::ingest(None, format!("no complete rows among {rows} data rows")));
    }
    let samples = SampleSet::new(data, projection.d()).map_err(|e| Error::ingest(None, e.to_string()))?;
    Ok(UciData {
        samples,
        rows,
        dropped,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSpec {
    pub n: usize,
    pub d: usize,
    pub k_true: usize,
    /// Standard deviation of every component.
    pub spread: f32,
    pub seed: u64,
}

impl SyntheticSpec {
    /// Half-width of the cube the component centres are drawn from.
    pub const CENTER_RANGE: f32 = 10.0;

    pub fn validate(&self) -> Result<()> {
        if self.d == 0 {
            return Err(Error::config("d", "must be at least 1"));
        }
        if self.k_true == 0 {
            return Err(Error::config("k_true", "must be at least 1"));
        }
        if self.n < self.k_true {
            return Err(Error::config("n", format!("{} samples for {} components", self.n, self.k_true)));
        }
        if !(self.spread > 0.0) || !self.spread.is_finite() {
            return Err(Error::config("spread", format!("must be positive, got {}", self.spread)));
        }
        Ok(())
    }
}

/// Isotropic Gaussian mixture; sample `i` comes from component `i % k_true`.
pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<SampleSet> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let centers: Vec<f32> = (0..spec.k_true * spec.d)
        .map(|_| rng.random_range(-SyntheticSpec::CENTER_RANGE..SyntheticSpec::CENTER_RANGE))
        .collect();
    let noise = Normal::new(0.0f32, spec.spread).map_err(|e| Error::config("spread", e.to_string()))?;
    let mut data = Vec::with_capacity(spec.n * spec.d);
    for i in 0..spec.n {
        let c = i % spec.k_true;
        data.extend(centers[c * spec.d..(c + 1) * spec.d].iter().map(|&x| x + noise.sample(&mut rng)));
    }
    SampleSet::new(data, spec.d)
}

fn header_u32(v: usize, what: &str) -> Result<u32> {
    u32::try_from(v).map_err(|_| Error::Format(format!("{what}={v} does not fit the 32-bit header")))
}

pub fn write_binary_to<W: Write>(samples: &SampleSet, mut w: W) -> Result<()> {
    for v in [MAGIC, VERSION, header_u32(samples.n(), "n")?, header_u32(samples.d(), "d")?] {
        w.write_all(&v.to_le_bytes())?;
    }
    for v in samples.as_slice() {
        w.write_all(&v.to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_binary(samples: &SampleSet, path: impl AsRef<Path>) -> Result<()> {
    write_binary_to(samples, BufWriter::new(File::create(path)?))
}

/// Decodes a whole binary sample file held in memory.
pub fn decode_binary(bytes: &[u8]) -> Result<SampleSet> {
    if bytes.len() < HEADER_BYTES {
        return Err(Error::Format(format!(
            "file of {} bytes is shorter than the {HEADER_BYTES}-byte header",
            bytes.len()
        )));
    }
    let word = |i: usize| u32::from_le_bytes(bytes[i * 4..i * 4 + 4].try_into().unwrap());
    if word(0) != MAGIC {
        return Err(Error::Format(format!("bad magic {:#010x}", word(0))));
    }
    if word(1) != VERSION {
        return Err(Error::Format(format!("unsupported version {}", word(1))));
    }
    let (n, d) = (word(2) as usize, word(3) as usize);
    if n == 0 || d == 0 {
        return Err(Error::Format(format!("empty sample set n={n} d={d}")));
    }
    let expected = (n as u64) * (d as u64) * 4;
    let body = &bytes[HEADER_BYTES..];
    if (body.len() as u64) < expected {
        return Err(Error::Format(format!(
            "truncated: header declares {n}×{d} values ({expected} bytes), found {} bytes",
            body.len()
        )));
    }
    if body.len() as u64 > expected {
        return Err(Error::Format(format!(
            "{} trailing bytes after {n}×{d} values",
            body.len() as u64 - expected
        )));
    }
    let data = body
        .chunks_exact(4)
        .map(|w| f32::from_le_bytes([w[0], w[1], w[2], w[3]]))
        .collect();
    SampleSet::new(data, d).map_err(|e| Error::Format(e.to_string()))
}

pub fn read_binary(path: impl AsRef<Path>) -> Result<SampleSet> {
    decode_binary(&std::fs::read(path)?)
}

/// True if `bytes` start with the binary sample magic.
pub fn is_binary(bytes: &[u8]) -> bool {
    bytes.len() >= 4 && bytes[..4] == MAGIC.to_le_bytes()
}

/// Labels as `n` little-endian u32 values, no header.
pub fn write_labels(labels: &[u32], path: impl AsRef<Path>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for l in labels {
        w.write_all(&l.to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_labels(path: impl AsRef<Path>) -> Result<Vec<u32>> {
    let bytes = std::fs::read(path)?;
    if bytes.len() % 4 != 0 {
        return Err(Error::Format(format!("label file of {} bytes is not a whole number of u32", bytes.len())));
    }
    Ok(bytes
        .chunks_exact(4)
        .map(|w| u32::from_le_bytes([w[0], w[1], w[2], w[3]]))
        .collect())
}
