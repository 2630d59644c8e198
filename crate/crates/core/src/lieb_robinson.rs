//! Lieb-Robinson light-cone bounds for transfer across a chain.
//!
//! For a nearest-neighbour Hamiltonian with interaction strength `J` on a
//! `D`-dimensional lattice, the commutator of operators a distance `L` apart
//! is bounded by the exponential-series tail `2 Σ_{k≥L} (2Jt(4D−1))^k/k!`,
//! which in one dimension closes to `2 exp(vt − L)` with `v = 6eJ`. Setting
//! `ε = 2 exp(vt − L)`, the success probability obeys `P(t) ≤ ε − ε²/4`.

use std::f64::consts::E;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Below this `ε` the transfer is exponentially suppressed.
pub const SUPPRESSED_EPSILON: f64 = 0.02;
/// At and above this `ε` the bound is in its steady-growth regime.
pub const STEADY_EPSILON: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LRParameters {
    /// Largest nearest-neighbour interaction norm.
    pub j: f64,
    /// Lattice dimension.
    pub d: u32,
    /// Distance between sender and receiver, `N − 1` for a chain.
    pub l: f64,
    pub v: f64,
}

impl LRParameters {
    pub fn for_chain(n_sites: usize, j: f64) -> Result<Self> {
        if n_sites < 2 {
            return Err(Error::InvalidDimension(n_sites));
        }
        Ok(Self {
            j,
            d: 1,
            l: (n_sites - 1) as f64,
            v: lr_velocity(j, 1),
        })
    }

    pub fn epsilon(&self, t: f64) -> f64 {
        lr_epsilon(t, self.l, self.v)
    }

    pub fn success_bound(&self, t: f64) -> f64 {
        lr_success_bound(t, self.l, self.v)
    }

    pub fn region(&self, t: f64) -> Region {
        classify_region(t, self.l, self.v)
    }

    pub fn transfer_time(&self) -> Result<f64> {
        transfer_time_estimate(self.l, self.v)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Region {
    Suppressed,
    ExponentialGrowth,
    SteadyGrowth,
}

impl Region {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Suppressed => "suppressed",
            Self::ExponentialGrowth => "exponential_growth",
            Self::SteadyGrowth => "steady_growth",
        }
    }
}

/// `6eJ` in one dimension, `2eJ(4D − 1)` otherwise.
pub fn lr_velocity(j: f64, d: u32) -> f64 {
    if d <= 1 {
        6.0 * E * j
    } else {
        2.0 * E * j * (4.0 * d as f64 - 1.0)
    }
}

/// `2 Σ_{k≥L} x^k/k!` with `x = 2Jt(4D−1)` and unit operator norms.
pub fn commutator_series_bound(t: f64, l: u32, j: f64, d: u32) -> f64 {
    ln_commutator_series_bound(t, l, j, d).exp()
}

/// Natural log of [`commutator_series_bound`].
///
/// Summed relative to the first term with periodic rescaling, so arguments
/// far past `exp` overflow still give a finite logarithm.
pub fn ln_commutator_series_bound(t: f64, l: u32, j: f64, d: u32) -> f64 {
    let x = 2.0 * j * t * (4.0 * d.max(1) as f64 - 1.0);
    if x <= 0.0 {
        return if l == 0 { 2.0f64.ln() } else { f64::NEG_INFINITY };
    }
    let ln_x = x.ln();
    let ln_first = l as f64 * ln_x - ln_factorial(l);

    let mut log_scale = 0.0;
    let mut term = 1.0;
    let mut sum = 1.0;
    let mut k = l as f64;
    loop {
        k += 1.0;
        term *= x / k;
        sum += term;
        if k > x && term < 1e-16 * sum {
            break;
        }
        if sum > 1e200 {
            term /= 1e200;
            sum /= 1e200;
            log_scale += 200.0 * std::f64::consts::LN_10;
        }
    }
    2.0f64.ln() + ln_first + log_scale + sum.ln()
}

fn ln_factorial(n: u32) -> f64 {
    (2..=n).map(|k| (k as f64).ln()).sum()
}

/// `ε = 2 exp(vt − L)`.
pub fn lr_epsilon(t: f64, l: f64, v: f64) -> f64 {
    2.0 * (v * t - l).exp()
}

/// `ε − ε²/4` as printed, unclamped. It peaks at 1 for `ε = 2` and turns
/// negative past `ε = 4`.
pub fn lr_success_bound_raw(t: f64, l: f64, v: f64) -> f64 {
    let eps = lr_epsilon(t, l, v);
    eps - 0.25 * eps * eps
}

/// Upper bound on the transfer probability at time `t`, clamped to `[0, 1]`.
/// Past the light-cone crossing (`ε ≥ 2`) the bound is vacuous and reported
/// as 1.
pub fn lr_success_bound(t: f64, l: f64, v: f64) -> f64 {
    let eps = lr_epsilon(t, l, v);
    if eps >= 2.0 {
        return 1.0;
    }
    (eps - 0.25 * eps * eps).clamp(0.0, 1.0)
}

/// `t ≈ L/v`, where `ε = 2`.
pub fn transfer_time_estimate(l: f64, v: f64) -> Result<f64> {
    if v == 0.0 {
        return Err(Error::InvalidConstraint("Lieb-Robinson velocity is zero".into()));
    }
    Ok(l / v)
}

pub fn classify_region(t: f64, l: f64, v: f64) -> Region {
    let eps = lr_epsilon(t, l, v);
    if eps < SUPPRESSED_EPSILON {
        Region::Suppressed
    } else if eps < STEADY_EPSILON {
        Region::ExponentialGrowth
    } else {
        Region::SteadyGrowth
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn velocity_constants() {
        let v = lr_velocity(2.0, 1);
        assert!((v - 32.619).abs() < 0.01, "{v}");
        assert!((1.0 / v - 0.03).abs() < 0.001);
        assert_eq!(lr_velocity(0.0, 1), 0.0);
        assert_eq!(lr_velocity(1.0, 2), 14.0 * E);
    }

    #[test]
    fn series_edge_cases() {
        for t in [0.1, 0.5, 1.3] {
            let full = commutator_series_bound(t, 0, 2.0, 1);
            let expected = 2.0 * (2.0 * 2.0 * t * 3.0f64).exp();
            assert!((full - expected).abs() < 1e-12 * expected);
        }
        assert_eq!(commutator_series_bound(0.0, 3, 2.0, 1), 0.0);
        assert_eq!(commutator_series_bound(0.0, 0, 2.0, 1), 2.0);
        // x = 720: the bound itself overflows, its logarithm does not
        let ln_big = ln_commutator_series_bound(60.0, 5, 2.0, 1);
        assert!(ln_big.is_finite());
        assert!((ln_big - (2.0f64.ln() + 720.0)).abs() < 1e-6);
    }

    #[test]
    fn epsilon_and_bound() {
        let v = lr_velocity(2.0, 1);
        let l = 19.0;
        assert!((lr_epsilon(l / v, l, v) - 2.0).abs() < 1e-12);
        assert!(lr_epsilon(0.0, 50.0, v) < 1e-20);
        let a = lr_epsilon(0.3, 5.0, v);
        let b = lr_epsilon(0.3, 10.0, v);
        assert!((b / a - (-5.0f64).exp()).abs() < 1e-15);

        assert_eq!(lr_success_bound(l / v, l, v), 1.0);
        assert!(lr_success_bound(0.0, 18.0, 32.62) < 1e-7);
        assert!(lr_success_bound_raw(2.0, 1.0, v) < 0.0);
    }

    #[test]
    fn transfer_time() {
        assert!((transfer_time_estimate(19.0, 32.62).unwrap() - 0.5825).abs() < 1e-3);
        assert!(transfer_time_estimate(1.0, 0.0).is_err());
        let a = transfer_time_estimate(4.0, 7.0).unwrap();
        let b = transfer_time_estimate(8.0, 7.0).unwrap();
        assert!((b - 2.0 * a).abs() < 1e-15);
    }

    #[test]
    fn regions() {
        let v = lr_velocity(2.0, 1);
        let l = 9.0;
        assert_eq!(classify_region(0.01, l, v), Region::Suppressed);
        assert_eq!(classify_region(l / v - 0.03, l, v), Region::ExponentialGrowth);
        assert_eq!(classify_region(l / v + 0.01, l, v), Region::SteadyGrowth);
    }

    #[test]
    fn chain_parameters() {
        let p = LRParameters::for_chain(20, 2.0).unwrap();
        assert_eq!(p.l, 19.0);
        assert_eq!(p.v, lr_velocity(2.0, 1));
        assert!((p.transfer_time().unwrap() - 19.0 / p.v).abs() < 1e-15);
        assert!(LRParameters::for_chain(1, 2.0).is_err());
    }
}
