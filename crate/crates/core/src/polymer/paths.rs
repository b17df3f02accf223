//! Euler–Maruyama sampling of dX = dW − |b_{T−t}(X)| X/|X| dt.

use std::path::Path;

use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::error::{domain, Error, Result};
use crate::io::{read_container, write_container};
use crate::kernels::DisorderParam;
use crate::rng::stream_rng;

use super::DriftTable;

const SDE_TAG: u64 = 0x73_6465;
const BINARY_KIND: &str = "path-ensemble";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathEnsemble {
    pub big_t: f64,
    pub theta: DisorderParam,
    pub x0: [f64; 2],
    /// Euler step.
    pub dt: f64,
    /// Recorded times, shared by all paths.
    pub times: Vec<f64>,
    pub paths: Vec<Vec<[f64; 2]>>,
    pub log_weights: Vec<f64>,
    pub seed: u64,
}

/// Samples `n_paths` trajectories over the steps of `table`, recording every
/// `record_stride`-th position (which must divide the number of steps).
pub fn sample_paths(
    table: &DriftTable,
    x0: [f64; 2],
    n_paths: usize,
    seed: u64,
    record_stride: usize,
) -> Result<PathEnsemble> {
    if x0 == [0.0, 0.0] {
        return Err(Error::Singularity("paths cannot start at the origin".into()));
    }
    if !x0[0].is_finite() || !x0[1].is_finite() {
        return Err(domain("start is not finite"));
    }
    let n_steps = table.n_steps();
    if record_stride == 0 || !n_steps.is_multiple_of(record_stride) {
        return Err(domain(format!("stride {record_stride} does not divide {n_steps} steps")));
    }
    let dt = table.dt;
    let sd = dt.sqrt();
    let paths = (0..n_paths)
        .into_par_iter()
        .map(|i| -> Result<Vec<[f64; 2]>> {
            let mut rng = stream_rng(seed, SDE_TAG, i as u64);
            let mut x = x0;
            let mut rec = Vec::with_capacity(n_steps / record_stride + 1);
            rec.push(x);
            for k in 0..n_steps {
                let r = (x[0] * x[0] + x[1] * x[1]).sqrt();
                if r > 0.0 {
                    let f = table.profile(k).magnitude(r) * dt / r;
                    x = [x[0] - f * x[0], x[1] - f * x[1]];
                }
                let z0: f64 = StandardNormal.sample(&mut rng);
                let z1: f64 = StandardNormal.sample(&mut rng);
                x = [x[0] + sd * z0, x[1] + sd * z1];
                if !x[0].is_finite() || !x[1].is_finite() {
                    return Err(Error::Overflow(format!("path {i} diverged at step {k}")));
                }
                if (k + 1) % record_stride == 0 {
                    rec.push(x);
                }
            }
            Ok(rec)
        })
        .collect::<Result<Vec<_>>>()?;
    let times = (0..=n_steps / record_stride).map(|j| (j * record_stride) as f64 * dt).collect();
    Ok(PathEnsemble {
        big_t: table.big_t,
        theta: table.theta,
        x0,
        dt,
        times,
        log_weights: vec![0.0; n_paths],
        paths,
        seed,
    })
}

impl PathEnsemble {
    pub fn n_paths(&self) -> usize {
        self.paths.len()
    }

    /// Index of a recorded time.
    pub fn time_index(&self, t: f64) -> Result<usize> {
        self.times
            .iter()
            .position(|&s| (s - t).abs() <= 1e-9 * self.big_t)
            .ok_or_else(|| domain(format!("time {t} is not on the recorded grid")))
    }

    /// All positions at a recorded time.
    pub fn at_time(&self, t: f64) -> Result<Vec<[f64; 2]>> {
        let j = self.time_index(t)?;
        Ok(self.paths.iter().map(|p| p[j]).collect())
    }

    /// Rows (path_id, time, x1, x2).
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path).map_err(|e| Error::Io(e.to_string()))?;
        w.write_record(["path_id", "time", "x1", "x2"]).map_err(|e| Error::Io(e.to_string()))?;
        for (i, p) in self.paths.iter().enumerate() {
            for (t, x) in self.times.iter().zip(p) {
                w.serialize((i, t, x[0], x[1])).map_err(|e| Error::Io(e.to_string()))?;
            }
        }
        w.flush()?;
        Ok(())
    }

    /// Binary trace: times, then the coordinates path by path, then log-weights.
    pub fn write_binary(&self, path: &Path) -> Result<()> {
        let header = json!({
            "T": self.big_t,
            "theta": self.theta.theta,
            "x0": self.x0,
            "dt": self.dt,
            "n_times": self.times.len(),
            "n_paths": self.paths.len(),
            "seed": self.seed,
        });
        let mut payload = self.times.clone();
        for p in &self.paths {
            for x in p {
                payload.extend_from_slice(x);
            }
        }
        payload.extend_from_slice(&self.log_weights);
        write_container(path, BINARY_KIND, header, &payload)
    }

    pub fn read_binary(path: &Path) -> Result<Self> {
        let (h, payload) = read_container(path, BINARY_KIND)?;
        let num = |k: &str| h[k].as_f64().ok_or_else(|| Error::Format(format!("header field {k}")));
        let count = |k: &str| h[k].as_u64().map(|v| v as usize).ok_or_else(|| Error::Format(format!("header field {k}")));
        let (nt, np) = (count("n_times")?, count("n_paths")?);
        if payload.len() != nt + 2 * nt * np + np {
            return Err(Error::Format("payload length does not match the header".into()));
        }
        let times = payload[..nt].to_vec();
        let paths = (0..np)
            .map(|i| {
                let s = &payload[nt + 2 * nt * i..nt + 2 * nt * (i + 1)];
                s.chunks_exact(2).map(|c| [c[0], c[1]]).collect()
            })
            .collect();
        Ok(PathEnsemble {
            big_t: num("T")?,
            theta: DisorderParam::new(num("theta")?),
            x0: [h["x0"][0].as_f64().unwrap_or(f64::NAN), h["x0"][1].as_f64().unwrap_or(f64::NAN)],
            dt: num("dt")?,
            times,
            paths,
            log_weights: payload[nt + 2 * nt * np..].to_vec(),
            seed: h["seed"].as_u64().ok_or_else(|| Error::Format("header field seed".into()))?,
        })
    }
}
