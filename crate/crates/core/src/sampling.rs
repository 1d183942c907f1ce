//! Seeded collocation and sensor sampling.
//!
//! Each point category draws from its own RNG stream of the same seeded
//! generator, so changing how many interior points are requested never
//! shifts the boundary or initial draws, and a single `seed` reproduces an
//! entire experiment bit-for-bit.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::beam::BeamConfig;
use crate::error::{Error, Result};

/// Stream ids per category; fixed forever for reproducibility.
const STREAM_INTERIOR: u64 = 0;
const STREAM_BOUNDARY: u64 = 1;
const STREAM_INITIAL: u64 = 2;
const STREAM_SENSOR: u64 = 3;

/// Collocation points grouped by loss term. All are (x, t) pairs.
#[derive(Clone, Debug, PartialEq)]
pub struct SampleSet {
    /// PDE residual points in the space-time interior.
    pub interior: Vec<(f64, f64)>,
    /// Points on x = 0 and x = L; first half left end, second half right.
    pub boundary: Vec<(f64, f64)>,
    /// Points at t = 0 across the span.
    pub initial: Vec<(f64, f64)>,
}

/// One deflection observation used by the inverse problem.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SensorPoint {
    pub x: f64,
    pub t: f64,
    pub u: f64,
}

fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Draw the three collocation categories. `n_boundary` must be even so the
/// two ends get equal counts.
pub fn sample_training_points(
    beam: &BeamConfig,
    n_interior: usize,
    n_boundary: usize,
    n_initial: usize,
    seed: u64,
) -> Result<SampleSet> {
    if n_boundary % 2 != 0 {
        return Err(Error::Usage(format!(
            "boundary point count must be even to split across both ends, got {n_boundary}"
        )));
    }
    let l = beam.length;
    let t_end = beam.t_end;

    let mut rng = stream_rng(seed, STREAM_INTERIOR);
    let mut interior = Vec::with_capacity(n_interior);
    for _ in 0..n_interior {
        let x = rng.gen_range(0.0..l);
        let t = rng.gen_range(0.0..t_end);
        interior.push((x, t));
    }

    let mut rng = stream_rng(seed, STREAM_BOUNDARY);
    let mut boundary = Vec::with_capacity(n_boundary);
    for _ in 0..n_boundary / 2 {
        boundary.push((0.0, rng.gen_range(0.0..t_end)));
    }
    for _ in 0..n_boundary / 2 {
        boundary.push((l, rng.gen_range(0.0..t_end)));
    }

    let mut rng = stream_rng(seed, STREAM_INITIAL);
    let mut initial = Vec::with_capacity(n_initial);
    for _ in 0..n_initial {
        initial.push((rng.gen_range(0.0..l), 0.0));
    }

    Ok(SampleSet {
        interior,
        boundary,
        initial,
    })
}

/// Draw sensor sample times at fixed locations. `n_data` is split as evenly
/// as possible: each location gets n/k, and the first n mod k locations get
/// one extra. Returns (x, t) pairs in location order; attaching observed
/// values is the caller's job.
pub fn sample_sensor_points(
    beam: &BeamConfig,
    locations: &[f64],
    n_data: usize,
    seed: u64,
) -> Result<Vec<(f64, f64)>> {
    if locations.is_empty() {
        return Err(Error::Usage("sensor sampling needs at least one location".into()));
    }
    for &x in locations {
        if !(0.0..=beam.length).contains(&x) {
            return Err(Error::Usage(format!(
                "sensor location {x} outside the beam [0, {}]",
                beam.length
            )));
        }
    }
    let base = n_data / locations.len();
    let extra = n_data % locations.len();
    let mut rng = stream_rng(seed, STREAM_SENSOR);
    let mut out = Vec::with_capacity(n_data);
    for (i, &x) in locations.iter().enumerate() {
        let count = base + usize::from(i < extra);
        for _ in 0..count {
            out.push((x, rng.gen_range(0.0..beam.t_end)));
        }
    }
    Ok(out)
}

/// Parse a sensor CSV: header `x,t,u`, then one observation per line.
pub fn read_sensor_csv(path: &Path) -> Result<Vec<SensorPoint>> {
    let text =
        std::fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let path = path.display();
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h.trim_end() == "x,t,u" => {}
        other => {
            return Err(Error::Format(format!(
                "{path}: expected header 'x,t,u', got {:?}",
                other.unwrap_or("")
            )))
        }
    }
    let mut out = Vec::new();
    for (i, line) in lines.enumerate() {
        let line = line.trim_end();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 3 {
            return Err(Error::Format(format!(
                "{path}: line {}: expected 3 comma-separated values, got {}",
                i + 2,
                fields.len()
            )));
        }
        let mut vals = [0.0; 3];
        for (j, f) in fields.iter().enumerate() {
            vals[j] = f.trim().parse::<f64>().map_err(|_| {
                Error::Format(format!("{path}: line {}: bad number {f:?}", i + 2))
            })?;
            if !vals[j].is_finite() {
                return Err(Error::Format(format!(
                    "{path}: line {}: non-finite value {f:?}",
                    i + 2
                )));
            }
        }
        out.push(SensorPoint {
            x: vals[0],
            t: vals[1],
            u: vals[2],
        });
    }
    Ok(out)
}
