use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::kernels::DisorderParam;

use super::MollifierSpec;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CouplingSchedule {
    pub theta: DisorderParam,
    pub epsilon: f64,
    pub v: f64,
}

impl CouplingSchedule {
    /// A schedule with an explicit coupling; `v = 0` switches the noise off.
    pub fn with_v(theta: DisorderParam, epsilon: f64, v: f64) -> Result<Self> {
        if !(v >= 0.0) || !v.is_finite() {
            return Err(Error::Coupling(format!("coupling must be nonnegative, got {v}")));
        }
        Ok(CouplingSchedule { theta, epsilon, v })
    }
}

/// V = (2π/ln(1/ε))·(1 + (ϑ + 2I_J)/(2 ln(1/ε))), dropping the o(1/ln²) term.
pub fn coupling(theta: DisorderParam, epsilon: f64, mollifier: &MollifierSpec) -> Result<CouplingSchedule> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(domain(format!("epsilon must lie in (0, 1), got {epsilon}")));
    }
    let l = (1.0 / epsilon).ln();
    let bracket = 1.0 + (theta.theta + 2.0 * mollifier.i_j) / (2.0 * l);
    if !(bracket > 0.0) {
        return Err(Error::Coupling(format!(
            "bracket 1 + (ϑ + 2I_J)/(2 ln(1/ε)) = {bracket} is not positive at ϑ = {}, ε = {epsilon}",
            theta.theta
        )));
    }
    Ok(CouplingSchedule { theta, epsilon, v: 2.0 * std::f64::consts::PI / l * bracket })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn plug_in_value() {
        let mut m = MollifierSpec::bump(1.0).unwrap();
        m.i_j = 0.0;
        let c = coupling(DisorderParam::new(0.0), (-10f64).exp(), &m).unwrap();
        assert!((c.v - PI / 5.0).abs() < 1e-15);
    }

    #[test]
    fn leading_order_and_monotone() {
        let m = MollifierSpec::bump(1.0).unwrap();
        let th = DisorderParam::new(0.5);
        let dev: Vec<f64> = [1e-2, 1e-4, 1e-8]
            .iter()
            .map(|&e| {
                let v = coupling(th, e, &m).unwrap().v;
                (v * (1.0 / e).ln() / (2.0 * PI) - 1.0).abs()
            })
            .collect();
        assert!(dev[0] > dev[1] && dev[1] > dev[2], "{dev:?}");
        let a = coupling(DisorderParam::new(-1.0), 0.05, &m).unwrap().v;
        let b = coupling(DisorderParam::new(1.0), 0.05, &m).unwrap().v;
        assert!(b > a);
    }

    #[test]
    fn errors() {
        let m = MollifierSpec::bump(1.0).unwrap();
        let th = DisorderParam::new(0.0);
        assert!(coupling(th, 1.0, &m).is_err());
        assert!(coupling(th, 0.0, &m).is_err());
        assert!(matches!(coupling(DisorderParam::new(-20.0), 0.1, &m), Err(Error::Coupling(_))));
    }
}
