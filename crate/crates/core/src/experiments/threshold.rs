use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::optimizer::{optimize, splitmix64, OptimizerConfig, OptimizerMode};
use crate::subspace::Schedule;

/// Fidelity that counts as a successful transfer.
pub const TRANSFER_THRESHOLD: f64 = 0.99;
/// Fidelity that marks the end of the exponentially suppressed region.
pub const SUPPRESSED_THRESHOLD: f64 = 0.01;

/// Depth used when a runtime sweep needs a "sufficiently large" circuit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DepthRule {
    /// `p = N + k`.
    SitesPlus(usize),
    Fixed(usize),
}

impl Default for DepthRule {
    fn default() -> Self {
        Self::SitesPlus(2)
    }
}

impl DepthRule {
    pub fn depth(self, n_sites: usize) -> usize {
        match self {
            Self::SitesPlus(k) => n_sites + k,
            Self::Fixed(p) => p.max(1),
        }
    }
}

/// Bisection settings for threshold-time queries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdSearch {
    pub depth_rule: DepthRule,
    pub optimizer: OptimizerConfig,
    /// Upper end of the bracket is `bracket_factor · N`.
    pub bracket_factor: f64,
    pub iterations: usize,
    /// Extra optimizations, with fresh restart seeds, before a probe is
    /// declared a failure. Bisection cannot recover from a false negative.
    pub failure_retries: usize,
}

impl Default for ThresholdSearch {
    fn default() -> Self {
        Self {
            depth_rule: DepthRule::default(),
            optimizer: OptimizerConfig::default(),
            bracket_factor: 4.0,
            iterations: 12,
            failure_retries: 4,
        }
    }
}

impl ThresholdSearch {
    pub fn with_restarts(restarts: usize, seed: u64) -> Self {
        Self {
            optimizer: OptimizerConfig::free(restarts, seed),
            ..Self::default()
        }
    }
}

/// Best fidelity at fixed runtime `t_f`, with extra seed schedules.
fn probe(n_sites: usize, t_f: f64, search: &ThresholdSearch, seeds: &[Schedule]) -> Result<(f64, Schedule)> {
    let depth = search.depth_rule.depth(n_sites);
    let config = OptimizerConfig {
        mode: OptimizerMode::FixedTf(t_f),
        ..search.optimizer.clone()
    };
    let r = optimize(n_sites, depth, &config, seeds)?;
    Ok((r.best_fidelity, r.best_schedule))
}

/// [`probe`] repeated with fresh restart seeds while it stays below
/// `threshold`.
fn probe_until(
    n_sites: usize,
    t_f: f64,
    threshold: f64,
    search: &ThresholdSearch,
    seeds: &[Schedule],
) -> Result<(f64, Schedule)> {
    let (mut f, mut best) = probe(n_sites, t_f, search, seeds)?;
    for attempt in 1..=search.failure_retries {
        if f >= threshold {
            break;
        }
        let retry = ThresholdSearch {
            optimizer: OptimizerConfig {
                rng_seed: splitmix64(search.optimizer.rng_seed ^ attempt as u64),
                ..search.optimizer.clone()
            },
            ..search.clone()
        };
        let (g, s) = probe(n_sites, t_f, &retry, std::slice::from_ref(&best))?;
        if g > f {
            f = g;
            best = s;
        }
    }
    Ok((f, best))
}

/// Stretches a schedule to runtime `t_f` by lengthening its final oracle
/// step, which only adds a phase to the target amplitude.
fn extend_to(schedule: &Schedule, t_f: f64) -> Option<Schedule> {
    let extra = t_f - schedule.total_time();
    if extra < 0.0 {
        return None;
    }
    let mut pairs = schedule.pairs().to_vec();
    pairs.last_mut()?.1 += extra;
    Schedule::new(pairs).ok()
}

/// Uniformly rescales a schedule to runtime `t_f`.
fn scale_to(schedule: &Schedule, t_f: f64) -> Option<Schedule> {
    let total = schedule.total_time();
    if !(total > 0.0) {
        return None;
    }
    let k = t_f / total;
    Schedule::new(schedule.pairs().iter().map(|&(b, c)| (b * k, c * k)).collect()).ok()
}

/// Runtime actually needed by `schedule`: the final oracle step only adds a
/// phase to the target amplitude and can be dropped.
fn effective_time(schedule: &Schedule) -> f64 {
    schedule.total_time() - schedule.pairs().last().map_or(0.0, |p| p.1)
}

/// Smallest runtime at which the optimized fidelity reaches `threshold`, by
/// bisection on `[0, bracket_factor · N]`. `None` when even the top of the
/// bracket falls short.
///
/// The optimum is nondecreasing in `t_f`: padding the last oracle step keeps
/// the fidelity. Each probe is therefore seeded with the best failing
/// schedule stretched to the new runtime and the best successful one
/// shrunk to it. A successful schedule also certifies its runtime minus the
/// final oracle step, which tightens the upper end.
pub fn min_tf_for_fidelity(n_sites: usize, threshold: f64, search: &ThresholdSearch) -> Result<Option<f64>> {
    if threshold == 0.0 {
        return Ok(Some(0.0));
    }
    if !(threshold > 0.0 && threshold < 1.0) {
        return Err(Error::InvalidConstraint(format!("threshold must lie in (0, 1), got {threshold}")));
    }
    if !(search.bracket_factor > 0.0) {
        return Err(Error::InvalidConstraint("bracket_factor must be positive".into()));
    }
    let mut lo = 0.0;
    let mut hi = search.bracket_factor * n_sites as f64;
    let (top, top_best) = probe_until(n_sites, hi, threshold, search, &[])?;
    if top < threshold {
        return Ok(None);
    }
    hi = hi.min(effective_time(&top_best));
    let mut hi_best = top_best;
    let mut lo_best: Option<Schedule> = None;
    for _ in 0..search.iterations {
        let mid = 0.5 * (lo + hi);
        if !(mid > lo) {
            break;
        }
        let seeds: Vec<Schedule> = [lo_best.as_ref().and_then(|s| extend_to(s, mid)), scale_to(&hi_best, mid)]
            .into_iter()
            .flatten()
            .collect();
        let (f, best) = probe_until(n_sites, mid, threshold, search, &seeds)?;
        if f >= threshold {
            hi = mid.min(effective_time(&best));
            hi_best = best;
        } else {
            lo = mid;
            lo_best = Some(best);
        }
    }
    Ok(Some(hi))
}

/// [`min_tf_for_fidelity`] at `F = 0.01`.
pub fn suppressed_time(n_sites: usize, search: &ThresholdSearch) -> Result<Option<f64>> {
    min_tf_for_fidelity(n_sites, SUPPRESSED_THRESHOLD, search)
}

/// Optimized fidelity on each runtime of `tfs`. Every probe is also seeded
/// with the previous best schedule stretched to the new runtime, so the
/// series is nondecreasing when `tfs` is sorted.
pub fn tf_sweep(n_sites: usize, tfs: &[f64], search: &ThresholdSearch) -> Result<Vec<(f64, f64)>> {
    let mut out = Vec::with_capacity(tfs.len());
    let mut previous: Option<Schedule> = None;
    for &t in tfs {
        if !(t > 0.0) {
            out.push((t, 0.0));
            continue;
        }
        let seeds: Vec<Schedule> = previous.as_ref().and_then(|s| extend_to(s, t)).into_iter().collect();
        let (f, best) = probe(n_sites, t, search, &seeds)?;
        out.push((t, f));
        previous = Some(best);
    }
    Ok(out)
}

/// Number of sign changes of the discrete derivative `ΔF/Δt_f` along a
/// series sorted by `t_f`. Steps smaller than `1e-9` count as flat and are
/// skipped.
pub fn oscillation_score(series: &[(f64, f64)]) -> usize {
    let mut last_sign = 0i8;
    let mut changes = 0;
    for w in series.windows(2) {
        let d = w[1].1 - w[0].1;
        let sign = if d > 1e-9 {
            1
        } else if d < -1e-9 {
            -1
        } else {
            continue;
        };
        if last_sign != 0 && sign != last_sign {
            changes += 1;
        }
        last_sign = sign;
    }
    changes
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quick() -> ThresholdSearch {
        ThresholdSearch::with_restarts(8, 1)
    }

    #[test]
    fn depth_rule() {
        assert_eq!(DepthRule::default().depth(10), 12);
        assert_eq!(DepthRule::Fixed(3).depth(10), 3);
    }

    #[test]
    fn trivial_thresholds() {
        assert_eq!(min_tf_for_fidelity(4, 0.0, &quick()).unwrap(), Some(0.0));
        assert!(min_tf_for_fidelity(4, 1.0, &quick()).is_err());
        assert!(min_tf_for_fidelity(4, -0.1, &quick()).is_err());
    }

    #[test]
    fn two_sites_closed_form() {
        // F = sin²(2 t_B): reaching F needs t_B = asin(√F)/2
        let search = quick();
        for threshold in [SUPPRESSED_THRESHOLD, TRANSFER_THRESHOLD] {
            let t = min_tf_for_fidelity(2, threshold, &search).unwrap().unwrap();
            let exact = threshold.sqrt().asin() / 2.0;
            let resolution = 8.0 / 4096.0;
            assert!(t >= exact - 1e-9 && t <= exact + resolution, "{threshold}: {t} vs {exact}");
        }
        assert!(suppressed_time(2, &search).unwrap().unwrap() < 0.4);
    }

    #[test]
    fn unattainable_within_bracket() {
        let search = ThresholdSearch {
            bracket_factor: 0.01,
            ..quick()
        };
        assert_eq!(min_tf_for_fidelity(6, 0.99, &search).unwrap(), None);
    }

    #[test]
    fn stretched_schedules_keep_fidelity() {
        let s = Schedule::new(vec![(0.3, 0.4), (0.7, 0.1)]).unwrap();
        let long = extend_to(&s, 3.0).unwrap();
        assert!((long.total_time() - 3.0).abs() < 1e-12);
        let f = |s: &Schedule| crate::subspace::fidelity(s, 5).unwrap();
        assert!((f(&s) - f(&long)).abs() < 1e-14);
        assert!(extend_to(&s, 1.0).is_none());
    }

    #[test]
    fn sweep_is_monotone() {
        let tfs: Vec<f64> = (1..=8).map(|k| 0.5 * k as f64).collect();
        let series = tf_sweep(4, &tfs, &ThresholdSearch::with_restarts(6, 2)).unwrap();
        for w in series.windows(2) {
            assert!(w[1].1 >= w[0].1 - 1e-9, "{series:?}");
        }
        assert_eq!(oscillation_score(&series), 0);
    }

    #[test]
    fn oscillation_counting() {
        let s = [(0.0, 0.1), (1.0, 0.5), (2.0, 0.3), (3.0, 0.3), (4.0, 0.6), (5.0, 0.2)];
        assert_eq!(oscillation_score(&s), 3);
        assert_eq!(oscillation_score(&s[..2]), 0);
    }
}
