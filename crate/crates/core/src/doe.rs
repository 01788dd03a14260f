//! Experiment designs: the 17-run snap-fit table and generic two-level
//! fractional factorials, in physical and coded units.

use std::io::{Read, Write};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Number of process/geometry factors describing one assembly run.
pub const N_FACTORS: usize = 7;

/// Canonical factor names, in table column order.
pub const FACTOR_NAMES: [&str; N_FACTORS] = [
    "tilt",
    "x_offset",
    "d_out",
    "wall_thickness",
    "snap_length",
    "snap_angle",
    "snap_width_cut",
];

/// Absolute tolerance used when matching a physical value to a factor level.
pub const LEVEL_TOLERANCE: f64 = 1e-9;

// Literal rows; kept as text so the CSV output reproduces them byte for byte.
const TABLE1: [[&str; 8]; 17] = [
    ["V0", "0", "0", "21", "0.8", "8.8", "46.926", "0"],
    ["V1", "0", "-0.1", "20.84", "0.75", "8.85", "48.926", "0.2"],
    ["V2", "0", "-0.1", "21.16", "0.85", "8.75", "44.926", "0.2"],
    ["V3", "0", "0.1", "20.84", "0.85", "8.75", "48.926", "0"],
    ["V4", "0", "0.1", "21.16", "0.75", "8.85", "44.926", "0"],
    ["V5", "1", "-0.1", "20.84", "0.85", "8.85", "44.926", "0"],
    ["V6", "1", "-0.1", "21.16", "0.75", "8.75", "48.926", "0"],
    ["V7", "1", "0.1", "20.84", "0.75", "8.75", "44.926", "0.2"],
    ["V8", "1", "0.1", "21.16", "0.85", "8.85", "48.926", "0.2"],
    ["V9", "1", "0.1", "21.16", "0.85", "8.75", "44.926", "0"],
    ["V10", "1", "0.1", "20.84", "0.75", "8.85", "48.926", "0"],
    ["V11", "1", "-0.1", "21.16", "0.75", "8.85", "44.926", "0.2"],
    ["V12", "1", "-0.1", "20.84", "0.85", "8.75", "48.926", "0.2"],
    ["V13", "0", "0.1", "21.16", "0.75", "8.75", "48.926", "0.2"],
    ["V14", "0", "0.1", "20.84", "0.85", "8.85", "44.926", "0.2"],
    ["V15", "0", "-0.1", "21.16", "0.85", "8.85", "48.926", "0"],
    ["V16", "0", "-0.1", "20.84", "0.75", "8.75", "44.926", "0"],
];

/// One assembly run in physical units (degrees and millimeters).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub run_id: String,
    pub tilt: f64,
    pub x_offset: f64,
    pub d_out: f64,
    pub wall_thickness: f64,
    pub snap_length: f64,
    pub snap_angle: f64,
    pub snap_width_cut: f64,
}

impl RunConfig {
    pub fn from_values(run_id: impl Into<String>, v: [f64; N_FACTORS]) -> Self {
        RunConfig {
            run_id: run_id.into(),
            tilt: v[0],
            x_offset: v[1],
            d_out: v[2],
            wall_thickness: v[3],
            snap_length: v[4],
            snap_angle: v[5],
            snap_width_cut: v[6],
        }
    }

    /// Factor values in [`FACTOR_NAMES`] order.
    pub fn values(&self) -> [f64; N_FACTORS] {
        [
            self.tilt,
            self.x_offset,
            self.d_out,
            self.wall_thickness,
            self.snap_length,
            self.snap_angle,
            self.snap_width_cut,
        ]
    }

    /// Checks the physical-validity invariants.
    pub fn validate(&self) -> Result<()> {
        let bad = |reason: &str| {
            Err(Error::InvalidRun {
                run_id: self.run_id.clone(),
                reason: reason.to_string(),
            })
        };
        if self.values().iter().any(|v| !v.is_finite()) {
            return bad("non-finite factor value");
        }
        if self.wall_thickness <= 0.0 {
            return bad("wall_thickness must be positive");
        }
        if self.snap_length <= 0.0 {
            return bad("snap_length must be positive");
        }
        if self.d_out <= 0.0 {
            return bad("d_out must be positive");
        }
        if !(self.snap_angle > 0.0 && self.snap_angle < 90.0) {
            return bad("snap_angle must lie strictly between 0 and 90 degrees");
        }
        if self.snap_width_cut < 0.0 {
            return bad("snap_width_cut must be non-negative");
        }
        Ok(())
    }
}

/// A run in coded units: -1 low, 0 center, +1 high.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CodedRun {
    pub run_id: String,
    pub z: Vec<f64>,
}

/// Physical levels of one factor.
///
/// For two-level factors whose nominal setting coincides with one of the
/// levels (tilt and snap width cut in the snap-fit table), `center` equals
/// `low` or `high`; the coded center is then only produced for the
/// all-nominal baseline run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FactorSpec {
    pub name: String,
    pub low: f64,
    pub center: f64,
    pub high: f64,
}

impl FactorSpec {
    pub fn new(name: impl Into<String>, low: f64, center: f64, high: f64) -> Result<Self> {
        let spec = FactorSpec {
            name: name.into(),
            low,
            center,
            high,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        let err = |reason: &str| {
            Err(Error::InvalidFactor {
                name: self.name.clone(),
                reason: reason.to_string(),
            })
        };
        if !(self.low.is_finite() && self.center.is_finite() && self.high.is_finite()) {
            return err("levels must be finite");
        }
        if self.low == self.high {
            return err("low and high levels coincide");
        }
        let (lo, hi) = if self.low < self.high {
            (self.low, self.high)
        } else {
            (self.high, self.low)
        };
        if self.center < lo || self.center > hi {
            return err("center must lie between low and high");
        }
        Ok(())
    }

    fn matches(a: f64, b: f64) -> bool {
        (a - b).abs() <= LEVEL_TOLERANCE
    }

    /// Physical value for a coded level. Exact levels map to the stored
    /// values; intermediate codes interpolate linearly on each side of center.
    pub fn decode(&self, z: f64) -> f64 {
        if z == -1.0 {
            self.low
        } else if z == 0.0 {
            self.center
        } else if z == 1.0 {
            self.high
        } else if z < 0.0 {
            self.center + z * (self.center - self.low)
        } else {
            self.center + z * (self.high - self.center)
        }
    }
}

/// Factor levels observed in the 17-run table.
pub fn table1_factor_specs() -> Vec<FactorSpec> {
    let levels: [(f64, f64, f64); N_FACTORS] = [
        (0.0, 0.0, 1.0),
        (-0.1, 0.0, 0.1),
        (20.84, 21.0, 21.16),
        (0.75, 0.8, 0.85),
        (8.75, 8.8, 8.85),
        (44.926, 46.926, 48.926),
        (0.0, 0.0, 0.2),
    ];
    FACTOR_NAMES
        .iter()
        .zip(levels)
        .map(|(name, (low, center, high))| FactorSpec {
            name: name.to_string(),
            low,
            center,
            high,
        })
        .collect()
}

/// The 17 snap-fit runs V0..V16, V0 being the nominal baseline.
pub fn table1_runs() -> Vec<RunConfig> {
    TABLE1
        .iter()
        .map(|row| {
            let mut v = [0.0; N_FACTORS];
            for (slot, text) in v.iter_mut().zip(&row[1..]) {
                *slot = text.parse().expect("table literal");
            }
            RunConfig::from_values(row[0], v)
        })
        .collect()
}

fn check_specs(specs: &[FactorSpec], expected: usize) -> Result<()> {
    if specs.len() != expected {
        return Err(Error::LengthMismatch {
            left: specs.len(),
            right: expected,
        });
    }
    specs.iter().try_for_each(FactorSpec::validate)
}

/// Codes a vector of physical values against `specs`.
///
/// A run sitting on every factor's center is the baseline and codes to all
/// zeros. Otherwise each value is matched to low/high first, then center.
pub fn encode_values(run_id: &str, values: &[f64], specs: &[FactorSpec]) -> Result<CodedRun> {
    check_specs(specs, values.len())?;
    let baseline = values
        .iter()
        .zip(specs)
        .all(|(&v, s)| FactorSpec::matches(v, s.center));
    if baseline {
        return Ok(CodedRun {
            run_id: run_id.to_string(),
            z: vec![0.0; values.len()],
        });
    }
    let z = values
        .iter()
        .zip(specs)
        .map(|(&v, s)| {
            if FactorSpec::matches(v, s.low) {
                Ok(-1.0)
            } else if FactorSpec::matches(v, s.high) {
                Ok(1.0)
            } else if FactorSpec::matches(v, s.center) {
                Ok(0.0)
            } else {
                Err(Error::ValueNotALevel {
                    factor: s.name.clone(),
                    value: v,
                })
            }
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(CodedRun {
        run_id: run_id.to_string(),
        z,
    })
}

pub fn encode(run: &RunConfig, specs: &[FactorSpec]) -> Result<CodedRun> {
    encode_values(&run.run_id, &run.values(), specs)
}

pub fn decode_values(coded: &CodedRun, specs: &[FactorSpec]) -> Result<Vec<f64>> {
    check_specs(specs, coded.z.len())?;
    Ok(coded.z.iter().zip(specs).map(|(&z, s)| s.decode(z)).collect())
}

pub fn decode(coded: &CodedRun, specs: &[FactorSpec]) -> Result<RunConfig> {
    let v = decode_values(coded, specs)?;
    let arr: [f64; N_FACTORS] = v.try_into().map_err(|v: Vec<f64>| Error::LengthMismatch {
        left: v.len(),
        right: N_FACTORS,
    })?;
    Ok(RunConfig::from_values(coded.run_id.clone(), arr))
}

/// Two-level regular fractional factorial in coded units.
///
/// The first log2(n_runs) factors form a full factorial; the remaining
/// factors are assigned to interaction columns, highest order first. Every
/// column is balanced and every pair of columns is orthogonal. The seed only
/// permutes run order.
pub fn fractional_factorial(specs: &[FactorSpec], n_runs: usize, seed: u64) -> Result<Vec<CodedRun>> {
    let n_factors = specs.len();
    specs.iter().try_for_each(FactorSpec::validate)?;
    if n_factors == 0 {
        return Err(Error::InvalidArgument("no factors given".into()));
    }
    if n_runs < 2 || !n_runs.is_power_of_two() || n_runs < n_factors + 1 {
        return Err(Error::InvalidRunCount { n_runs, n_factors });
    }
    let k = n_runs.trailing_zeros() as usize;

    // Column generators as bitmasks over the k base columns.
    let mut generators: Vec<u32> = (0..k.min(n_factors)).map(|j| 1u32 << j).collect();
    let mut interactions: Vec<u32> = (1u32..(1u32 << k)).filter(|m| m.count_ones() >= 2).collect();
    interactions.sort_by(|a, b| b.count_ones().cmp(&a.count_ones()).then(a.cmp(b)));
    generators.extend(interactions.into_iter().take(n_factors - generators.len()));

    let mut order: Vec<usize> = (0..n_runs).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));

    Ok(order
        .iter()
        .enumerate()
        .map(|(i, &r)| {
            let z = generators
                .iter()
                .map(|&g| {
                    // Product of the base columns in g: -1 per low base level.
                    let lows = (0..k).filter(|&j| g >> j & 1 == 1 && r >> j & 1 == 0).count();
                    if lows % 2 == 0 {
                        1.0
                    } else {
                        -1.0
                    }
                })
                .collect();
            CodedRun {
                run_id: format!("R{}", i + 1),
                z,
            }
        })
        .collect())
}

/// Header of runs.csv.
pub fn runs_csv_header() -> Vec<&'static str> {
    std::iter::once("run_id").chain(FACTOR_NAMES).collect()
}

/// Writes runs in the runs.csv layout. Values use the shortest decimal form
/// that round-trips, so literal table values are reproduced exactly.
pub fn write_runs_csv<W: Write>(runs: &[RunConfig], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(runs_csv_header())?;
    for run in runs {
        let mut rec = vec![run.run_id.clone()];
        rec.extend(run.values().iter().map(|v| v.to_string()));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_runs_csv<R: Read>(input: R) -> Result<Vec<RunConfig>> {
    let mut r = csv::Reader::from_reader(input);
    let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    if header != runs_csv_header() {
        return Err(Error::Format(format!("unexpected runs.csv header {header:?}")));
    }
    let mut runs = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let mut v = [0.0; N_FACTORS];
        for (j, slot) in v.iter_mut().enumerate() {
            *slot = rec[j + 1]
                .trim()
                .parse()
                .map_err(|_| Error::Format(format!("bad number `{}`", &rec[j + 1])))?;
        }
        runs.push(RunConfig::from_values(rec[0].to_string(), v));
    }
    Ok(runs)
}

/// Writes a design with arbitrary factor names: `run_id,<names...>`.
/// With the seven canonical names this is the runs.csv layout.
pub fn write_design_csv<W: Write>(design: &[CodedRun], specs: &[FactorSpec], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["run_id".to_string()];
    header.extend(specs.iter().map(|s| s.name.clone()));
    w.write_record(&header)?;
    for run in design {
        let mut rec = vec![run.run_id.clone()];
        rec.extend(decode_values(run, specs)?.iter().map(|v| v.to_string()));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}
