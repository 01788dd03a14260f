//! Deterministic synthetic snap-fit simulator.
//!
//! Maps a [`RunConfig`] to an insertion force profile over normalized
//! displacement s in [0, 1]:
//!
//! ```text
//! F(s) = A (s/m)^2 exp(2 (1 - s/m)) + 0.05 A s + noise
//! A    = f0 (t/0.8)^3 (8.8/L)^3 tan(angle)/tan(46.926 deg) (1 - 1.25 cut) (d_out/21)
//! m    = 0.55 + x_offset + 0.05 tilt
//! ```
//!
//! The bump term peaks at exactly A when s = m. Cantilever stiffness scales
//! with thickness^3 / length^3, which is where the cubic factors come from.

use std::io::{Read, Write};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::doe::RunConfig;
use crate::error::{Error, Result};

/// Samples per profile in the snap-fit data set.
pub const DEFAULT_POINTS: usize = 500;

const NOMINAL_ANGLE_DEG: f64 = 46.926;
const PLATEAU_SLOPE: f64 = 0.05;

/// A sampled force-vs-displacement curve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForceProfile {
    pub run_id: String,
    pub displacement: Vec<f64>,
    pub force: Vec<f64>,
}

/// `n` uniformly spaced positions from 0 to 1 inclusive.
pub fn uniform_grid(n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![0.0],
        _ => {
            let last = (n - 1) as f64;
            (0..n).map(|i| i as f64 / last).collect()
        }
    }
}

impl ForceProfile {
    /// Profile on the uniform displacement grid.
    pub fn on_uniform_grid(run_id: impl Into<String>, force: Vec<f64>) -> Self {
        ForceProfile {
            run_id: run_id.into(),
            displacement: uniform_grid(force.len()),
            force,
        }
    }

    pub fn len(&self) -> usize {
        self.force.len()
    }

    pub fn is_empty(&self) -> bool {
        self.force.is_empty()
    }

    pub fn peak(&self) -> f64 {
        self.force.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::Format(format!("profile `{}`: {msg}", self.run_id)));
        if self.force.len() != self.displacement.len() {
            return bad("force and displacement lengths differ");
        }
        if self.force.len() < 2 {
            return bad("fewer than two samples");
        }
        if self.displacement[0] != 0.0 || *self.displacement.last().unwrap() != 1.0 {
            return bad("displacement must run from 0 to 1");
        }
        if self.displacement.windows(2).any(|w| w[1] <= w[0]) {
            return bad("displacement not strictly increasing");
        }
        if self.force.iter().any(|f| !f.is_finite()) {
            return bad("non-finite force");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OracleParams {
    /// Peak force of the nominal run.
    pub f0: f64,
    /// Noise standard deviation as a fraction of the run's amplitude A.
    pub noise_sigma_rel: f64,
    pub seed: u64,
}

impl Default for OracleParams {
    fn default() -> Self {
        OracleParams {
            f0: 10.0,
            noise_sigma_rel: 0.01,
            seed: 0,
        }
    }
}

impl OracleParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.f0 > 0.0 && self.f0.is_finite()) {
            return Err(Error::InvalidArgument("f0 must be positive".into()));
        }
        if !(self.noise_sigma_rel >= 0.0 && self.noise_sigma_rel.is_finite()) {
            return Err(Error::InvalidArgument("noise_sigma_rel must be non-negative".into()));
        }
        Ok(())
    }
}

/// Amplitude A and engagement point m of a run.
pub fn shape_parameters(run: &RunConfig, f0: f64) -> Result<(f64, f64)> {
    run.validate()?;
    let amplitude = f0
        * (run.wall_thickness / 0.8).powi(3)
        * (8.8 / run.snap_length).powi(3)
        * run.snap_angle.to_radians().tan()
        / NOMINAL_ANGLE_DEG.to_radians().tan()
        * (1.0 - 1.25 * run.snap_width_cut)
        * (run.d_out / 21.0);
    let engage = 0.55 + run.x_offset + 0.05 * run.tilt;
    if !(amplitude > 0.0) {
        return Err(Error::DegenerateGeometry {
            run_id: run.run_id.clone(),
            reason: format!("non-positive force amplitude {amplitude}"),
        });
    }
    if !(engage > 0.0 && engage < 1.0) {
        return Err(Error::DegenerateGeometry {
            run_id: run.run_id.clone(),
            reason: format!("engagement point {engage} outside (0, 1)"),
        });
    }
    Ok((amplitude, engage))
}

/// Noise-free force at displacement `s`.
pub fn clean_force(amplitude: f64, engage: f64, s: f64) -> f64 {
    let u = s / engage;
    amplitude * u * u * (2.0 * (1.0 - u)).exp() + PLATEAU_SLOPE * amplitude * s
}

/// Simulates one run, drawing noise from a generator seeded with `oracle.seed`.
pub fn snap_force(run: &RunConfig, n_points: usize, oracle: &OracleParams) -> Result<ForceProfile> {
    if n_points < 2 {
        return Err(Error::InvalidArgument(format!("n_points must be at least 2, got {n_points}")));
    }
    oracle.validate()?;
    let (amplitude, engage) = shape_parameters(run, oracle.f0)?;
    let grid = uniform_grid(n_points);
    let mut force: Vec<f64> = grid.iter().map(|&s| clean_force(amplitude, engage, s)).collect();
    if oracle.noise_sigma_rel > 0.0 {
        let normal = Normal::new(0.0, oracle.noise_sigma_rel * amplitude)
            .map_err(|e| Error::InvalidArgument(e.to_string()))?;
        let mut rng = ChaCha8Rng::seed_from_u64(oracle.seed);
        for f in &mut force {
            *f += normal.sample(&mut rng);
        }
    }
    Ok(ForceProfile {
        run_id: run.run_id.clone(),
        displacement: grid,
        force,
    })
}

/// Simulates every run; run `i` uses seed `oracle.seed + i`.
pub fn batch_simulate(runs: &[RunConfig], n_points: usize, oracle: &OracleParams) -> Result<Vec<ForceProfile>> {
    if runs.is_empty() {
        return Err(Error::InvalidArgument("no runs to simulate".into()));
    }
    runs.iter()
        .enumerate()
        .map(|(i, run)| {
            let sub = OracleParams {
                seed: oracle.seed.wrapping_add(i as u64),
                ..*oracle
            };
            snap_force(run, n_points, &sub)
        })
        .collect()
}

/// Float text form used in profile CSVs: nine significant digits.
pub fn format_sig9(v: f64) -> String {
    format!("{v:.8e}")
}

/// Writes profiles.csv in long format: `run_id,index,displacement,force`.
pub fn write_profiles_csv<W: Write>(profiles: &[ForceProfile], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["run_id", "index", "displacement", "force"])?;
    for p in profiles {
        for (i, (s, f)) in p.displacement.iter().zip(&p.force).enumerate() {
            w.write_record([p.run_id.as_str(), &i.to_string(), &format_sig9(*s), &format_sig9(*f)])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Reads profiles.csv, keeping runs in first-appearance order.
pub fn read_profiles_csv<R: Read>(input: R) -> Result<Vec<ForceProfile>> {
    let mut r = csv::Reader::from_reader(input);
    let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    if header != ["run_id", "index", "displacement", "force"] {
        return Err(Error::Format(format!("unexpected profiles header {header:?}")));
    }
    let num = |s: &str| -> Result<f64> {
        s.trim().parse().map_err(|_| Error::Format(format!("bad number `{s}`")))
    };
    let mut profiles: Vec<ForceProfile> = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let id = &rec[0];
        let index: usize = rec[1]
            .trim()
            .parse()
            .map_err(|_| Error::Format(format!("bad index `{}`", &rec[1])))?;
        let current = match profiles.last_mut() {
            Some(p) if p.run_id == id => p,
            _ => {
                if profiles.iter().any(|p| p.run_id == id) {
                    return Err(Error::Format(format!("rows of run `{id}` are not contiguous")));
                }
                profiles.push(ForceProfile {
                    run_id: id.to_string(),
                    displacement: Vec::new(),
                    force: Vec::new(),
                });
                profiles.last_mut().unwrap()
            }
        };
        if index != current.force.len() {
            return Err(Error::Format(format!("run `{id}`: index {index} out of sequence")));
        }
        current.displacement.push(num(&rec[2])?);
        current.force.push(num(&rec[3])?);
    }
    Ok(profiles)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::doe::table1_runs;

    fn quiet() -> OracleParams {
        OracleParams {
            noise_sigma_rel: 0.0,
            ..OracleParams::default()
        }
    }

    #[test]
    fn nominal_peak_matches_amplitude_at_engagement() {
        let v0 = &table1_runs()[0];
        let (a, m) = shape_parameters(v0, 10.0).unwrap();
        assert!((a - 10.0).abs() < 1e-12);
        assert!((m - 0.55).abs() < 1e-15);
        // Dense grid search on the bump term alone.
        let n = 200_001;
        let (best_s, best) = (0..n)
            .map(|i| {
                let s = i as f64 / (n - 1) as f64;
                let u = s / m;
                (s, a * u * u * (2.0 * (1.0 - u)).exp())
            })
            .fold((0.0, f64::MIN), |acc, x| if x.1 > acc.1 { x } else { acc });
        assert!((best_s - m).abs() <= 1.0 / (n - 1) as f64);
        assert!((best - a).abs() < 1e-9);
        assert!((clean_force(a, m, m) - (a + 0.05 * a * 0.55)).abs() < 1e-12);
    }

    #[test]
    fn zero_displacement_has_zero_clean_force() {
        for run in table1_runs() {
            let p = snap_force(&run, 500, &quiet()).unwrap();
            assert_eq!(p.force[0], 0.0);
            p.validate().unwrap();
        }
    }

    #[test]
    fn full_width_cut_is_degenerate() {
        let mut run = table1_runs()[0].clone();
        run.snap_width_cut = 0.8;
        assert!(matches!(
            snap_force(&run, 500, &quiet()),
            Err(Error::DegenerateGeometry { .. })
        ));
        let mut run = table1_runs()[0].clone();
        run.x_offset = 0.5;
        assert!(matches!(
            snap_force(&run, 500, &quiet()),
            Err(Error::DegenerateGeometry { .. })
        ));
    }

    #[test]
    fn batch_reports_offending_run() {
        let mut runs = table1_runs();
        runs[5].snap_width_cut = 0.9;
        match batch_simulate(&runs, 50, &quiet()) {
            Err(Error::DegenerateGeometry { run_id, .. }) => assert_eq!(run_id, "V5"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn batch_shape_and_determinism() {
        let params = OracleParams {
            seed: 42,
            ..OracleParams::default()
        };
        let a = batch_simulate(&table1_runs(), 500, &params).unwrap();
        let b = batch_simulate(&table1_runs(), 500, &params).unwrap();
        assert_eq!(a.len(), 17);
        assert!(a.iter().all(|p| p.len() == 500));
        assert_eq!(a, b);
    }

    #[test]
    fn dropping_a_run_keeps_later_seeds_by_index() {
        let params = OracleParams {
            seed: 9,
            ..OracleParams::default()
        };
        let runs = table1_runs();
        let full = batch_simulate(&runs, 100, &params).unwrap();
        let single = snap_force(
            &runs[3],
            100,
            &OracleParams {
                seed: 12,
                ..params
            },
        )
        .unwrap();
        assert_eq!(full[3], single);
    }

    #[test]
    fn noise_free_ignores_seed() {
        let runs = table1_runs();
        let a = batch_simulate(&runs, 100, &OracleParams { seed: 1, ..quiet() }).unwrap();
        let b = batch_simulate(&runs, 100, &OracleParams { seed: 2, ..quiet() }).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn thicker_wall_raises_peak() {
        let base = table1_runs()[0].clone();
        let mut last = f64::NEG_INFINITY;
        for t in [0.7, 0.75, 0.8, 0.85, 0.9] {
            let run = RunConfig {
                wall_thickness: t,
                ..base.clone()
            };
            let peak = snap_force(&run, 500, &quiet()).unwrap().peak();
            assert!(peak > last);
            last = peak;
        }
    }

    #[test]
    fn profiles_csv_round_trip_to_nine_digits() {
        let params = OracleParams {
            seed: 5,
            ..OracleParams::default()
        };
        let profiles = batch_simulate(&table1_runs()[..3], 20, &params).unwrap();
        let mut buf = Vec::new();
        write_profiles_csv(&profiles, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("run_id,index,displacement,force\nV0,0,0.00000000e0,"));
        let back = read_profiles_csv(&buf[..]).unwrap();
        assert_eq!(back.len(), 3);
        for (p, q) in profiles.iter().zip(&back) {
            assert_eq!(p.run_id, q.run_id);
            for (a, b) in p.force.iter().zip(&q.force) {
                assert!((a - b).abs() <= 1e-8 * a.abs().max(1e-300));
            }
        }
    }
}
