//! The named experiments. Each module holds a parameter schema whose
//! `Default` is the acceptance configuration, and a `run` function.

pub mod chapman;
pub mod chapman_mc;
pub mod drift;
pub mod polymer_fit;
pub mod rn_trend;
pub mod scaling;
pub mod semigroup;
pub mod she_mean;
pub mod she_var;

use std::collections::BTreeMap;
use std::time::Instant;

use crate::cache::KernelCache;
use crate::config::Params;
use crate::report::{Check, ResultRow};
use crate::HarnessError;

/// What an experiment produces before it is wrapped into a report.
#[derive(Debug, Default)]
pub struct Outcome {
    pub checks: Vec<Check>,
    pub rows: Vec<ResultRow>,
    pub row_times: Vec<f64>,
    pub notes: Vec<String>,
    pub artifacts: BTreeMap<String, serde_json::Value>,
}

impl Outcome {
    pub(crate) fn row(&mut self, row: ResultRow, since: Instant) {
        self.rows.push(row);
        self.row_times.push(since.elapsed().as_secs_f64());
    }
}

/// Count of consecutive pairs where `xs` fails to decrease strictly.
pub(crate) fn non_decreasing_steps(xs: &[f64]) -> usize {
    xs.windows(2).filter(|w| !(w[1] < w[0])).count()
}

/// Largest element, NaN if any element is NaN.
pub(crate) fn max_or_nan(xs: &[f64]) -> f64 {
    xs.iter().fold(0.0f64, |a, &x| if a.is_nan() || x.is_nan() { f64::NAN } else { a.max(x) })
}

pub(crate) fn run(params: &Params, seed: u64, cache: &KernelCache) -> Result<Outcome, HarnessError> {
    match params {
        Params::Semigroup(p) => semigroup::run(p, seed, cache),
        Params::Scaling(p) => scaling::run(p, seed),
        Params::Chapman(p) => chapman::run(p, seed),
        Params::SheMean(p) => she_mean::run(p, seed),
        Params::SheVarTrend(p) => she_var::run(p, seed),
        Params::ChapmanMc(p) => chapman_mc::run(p, seed),
        Params::PolymerFit(p) => polymer_fit::run(p, seed),
        Params::Drift(p) => drift::run(p, seed),
        Params::RnTrend(p) => rn_trend::run(p, seed),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn monotone_counting() {
        assert_eq!(non_decreasing_steps(&[3.0, 2.0, 1.0]), 0);
        assert_eq!(non_decreasing_steps(&[3.0, 3.0, 4.0, 1.0]), 2);
        assert_eq!(non_decreasing_steps(&[1.0, f64::NAN]), 1);
        assert_eq!(max_or_nan(&[1.0, 3.0, 2.0]), 3.0);
        assert!(max_or_nan(&[f64::NAN, 3.0]).is_nan());
    }
}
