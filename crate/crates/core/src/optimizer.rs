//! Multi-start maximisation of the transfer fidelity over QAOA durations.
//!
//! Each restart runs a projected limited-memory BFGS ascent with a
//! backtracking line search. Feasibility is kept by Euclidean projection:
//! onto the nonnegative orthant in free-runtime mode, onto the scaled simplex
//! `{δ ≥ 0, Σδ = t_f}` in fixed-runtime mode. Restarts are independent, seeded
//! from `(rng_seed, restart_index)`, and run in parallel.

use std::collections::VecDeque;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp1;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::subspace::{ChainPropagator, Schedule};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptimizerMode {
    Free,
    FixedTf(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizerConfig {
    pub restarts: usize,
    pub max_iterations: usize,
    /// Stop once the projected gradient's infinity norm drops below this.
    pub gradient_tolerance: f64,
    pub rng_seed: u64,
    pub mode: OptimizerMode,
    /// L-BFGS memory.
    pub history: usize,
    /// Free mode draws the initial runtime uniformly in
    /// `[lo·N, hi·N]`.
    pub free_tf_scale: (f64, f64),
    /// Keep the per-iteration fidelity of every restart.
    pub record_trace: bool,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            restarts: 200,
            max_iterations: 2000,
            gradient_tolerance: 1e-8,
            rng_seed: 0,
            mode: OptimizerMode::Free,
            history: 10,
            free_tf_scale: (0.5, 3.0),
            record_trace: false,
        }
    }
}

impl OptimizerConfig {
    pub fn free(restarts: usize, rng_seed: u64) -> Self {
        Self {
            restarts,
            rng_seed,
            ..Self::default()
        }
    }

    pub fn fixed_tf(t_f: f64, restarts: usize, rng_seed: u64) -> Self {
        Self {
            restarts,
            rng_seed,
            mode: OptimizerMode::FixedTf(t_f),
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.restarts == 0 {
            return Err(Error::InvalidConstraint("restarts must be at least 1".into()));
        }
        if self.max_iterations == 0 {
            return Err(Error::InvalidConstraint("max_iterations must be at least 1".into()));
        }
        if !(self.gradient_tolerance > 0.0) {
            return Err(Error::InvalidConstraint("gradient_tolerance must be positive".into()));
        }
        if self.history == 0 {
            return Err(Error::InvalidConstraint("history must be at least 1".into()));
        }
        if let OptimizerMode::FixedTf(t) = self.mode {
            if !(t > 0.0) || !t.is_finite() {
                return Err(Error::InvalidConstraint(format!("t_f must be positive, got {t}")));
            }
        }
        let (lo, hi) = self.free_tf_scale;
        if !(lo > 0.0 && hi >= lo) {
            return Err(Error::InvalidConstraint(format!("bad free_tf_scale ({lo}, {hi})")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RestartRecord {
    pub seed_index: usize,
    pub final_fidelity: f64,
    pub iterations: usize,
    pub converged: bool,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub trace: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizationResult {
    pub n_sites: usize,
    pub depth: usize,
    pub mode: OptimizerMode,
    pub best_schedule: Schedule,
    pub best_fidelity: f64,
    pub restart_records: Vec<RestartRecord>,
    #[serde(skip)]
    pub wall_time: f64,
}

impl OptimizationResult {
    pub fn converged_count(&self) -> usize {
        self.restart_records.iter().filter(|r| r.converged).count()
    }
}

/// Uniform draw from the simplex `{δ ≥ 0, Σδ = t_f}` in `2p` dimensions,
/// via normalised exponential spacings.
pub fn random_simplex_schedule<R: Rng + ?Sized>(depth: usize, t_f: f64, rng: &mut R) -> Result<Schedule> {
    if depth == 0 {
        return Err(Error::InvalidSchedule("depth must be at least 1".into()));
    }
    if !(t_f > 0.0) {
        return Err(Error::InvalidConstraint(format!("t_f must be positive, got {t_f}")));
    }
    let draws: Vec<f64> = (0..2 * depth).map(|_| rng.sample::<f64, _>(Exp1)).collect();
    let total: f64 = draws.iter().sum();
    let flat: Vec<f64> = draws.iter().map(|x| x / total * t_f).collect();
    Schedule::from_flat(&flat)
}

/// Deterministic per-restart seed.
pub fn restart_seed(rng_seed: u64, restart_index: usize) -> u64 {
    splitmix64(rng_seed ^ splitmix64(restart_index as u64 ^ 0x5851_f42d_4c95_7f2d))
}

pub(crate) fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Multi-start optimisation with no runtime constraint.
pub fn optimize_free(n_sites: usize, depth: usize, config: &OptimizerConfig) -> Result<OptimizationResult> {
    let config = OptimizerConfig {
        mode: OptimizerMode::Free,
        ..config.clone()
    };
    optimize(n_sites, depth, &config, &[])
}

/// Multi-start optimisation on `Σδ = t_f`.
pub fn optimize_fixed_tf(n_sites: usize, depth: usize, t_f: f64, config: &OptimizerConfig) -> Result<OptimizationResult> {
    let config = OptimizerConfig {
        mode: OptimizerMode::FixedTf(t_f),
        ..config.clone()
    };
    optimize(n_sites, depth, &config, &[])
}

/// Runs every random restart plus one extra restart per entry of
/// `extra_seeds` (projected onto the feasible set first). Extra seeds get
/// restart indices after the random ones.
pub fn optimize(
    n_sites: usize,
    depth: usize,
    config: &OptimizerConfig,
    extra_seeds: &[Schedule],
) -> Result<OptimizationResult> {
    config.validate()?;
    if depth == 0 {
        return Err(Error::InvalidSchedule("depth must be at least 1".into()));
    }
    for s in extra_seeds {
        if s.depth() != depth {
            return Err(Error::InvalidSchedule(format!(
                "seed schedule has depth {}, expected {depth}",
                s.depth()
            )));
        }
    }
    let propagator = ChainPropagator::for_sites(n_sites)?;
    let start = Instant::now();
    let feasible = FeasibleSet::from_mode(config.mode);

    let total = config.restarts + extra_seeds.len();
    let outcomes: Vec<(RestartRecord, Vec<f64>)> = (0..total)
        .into_par_iter()
        .map(|idx| {
            let initial = if idx < config.restarts {
                let mut rng = ChaCha8Rng::seed_from_u64(restart_seed(config.rng_seed, idx));
                let t_f = match config.mode {
                    OptimizerMode::FixedTf(t) => t,
                    OptimizerMode::Free => {
                        let (lo, hi) = config.free_tf_scale;
                        rng.random_range(lo * n_sites as f64..=hi * n_sites as f64)
                    }
                };
                random_simplex_schedule(depth, t_f, &mut rng)
                    .expect("validated depth and runtime")
                    .to_flat()
            } else {
                extra_seeds[idx - config.restarts].to_flat()
            };
            let run = ascend(&propagator, feasible, initial, config);
            let record = RestartRecord {
                seed_index: idx,
                final_fidelity: run.fidelity,
                iterations: run.iterations,
                converged: run.converged,
                trace: config.record_trace.then_some(run.trace),
            };
            (record, run.x)
        })
        .collect();

    let mut best = 0usize;
    for (i, (rec, _)) in outcomes.iter().enumerate() {
        if rec.final_fidelity > outcomes[best].0.final_fidelity {
            best = i;
        }
    }
    let best_schedule = Schedule::from_flat(&outcomes[best].1)?;
    let best_fidelity = outcomes[best].0.final_fidelity;
    Ok(OptimizationResult {
        n_sites,
        depth,
        mode: config.mode,
        best_schedule,
        best_fidelity,
        restart_records: outcomes.into_iter().map(|(r, _)| r).collect(),
        wall_time: start.elapsed().as_secs_f64(),
    })
}

/// Appends zero-duration pairs; the fidelity is unchanged.
pub fn pad_schedule(schedule: &Schedule, new_depth: usize) -> Result<Schedule> {
    schedule.padded(new_depth)
}

#[derive(Debug, Clone, Copy)]
enum FeasibleSet {
    Orthant,
    Simplex(f64),
}

impl FeasibleSet {
    fn from_mode(mode: OptimizerMode) -> Self {
        match mode {
            OptimizerMode::Free => Self::Orthant,
            OptimizerMode::FixedTf(t) => Self::Simplex(t),
        }
    }

    fn project(self, x: &mut [f64]) {
        match self {
            Self::Orthant => x.iter_mut().for_each(|v| *v = v.max(0.0)),
            Self::Simplex(t) => project_onto_simplex(x, t),
        }
    }
}

/// Euclidean projection onto `{x ≥ 0, Σx = total}`.
pub fn project_onto_simplex(x: &mut [f64], total: f64) {
    let mut sorted: Vec<f64> = x.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut cumulative = 0.0;
    let mut theta = 0.0;
    for (i, &u) in sorted.iter().enumerate() {
        cumulative += u;
        let candidate = (cumulative - total) / (i + 1) as f64;
        if u - candidate > 0.0 {
            theta = candidate;
        }
    }
    x.iter_mut().for_each(|v| *v = (*v - theta).max(0.0));
}

struct Ascent {
    x: Vec<f64>,
    fidelity: f64,
    iterations: usize,
    converged: bool,
    trace: Vec<f64>,
}

const ARMIJO: f64 = 1e-4;
const MAX_BACKTRACKS: usize = 50;

/// One projected L-BFGS run, minimising `−F`.
fn ascend(propagator: &ChainPropagator, feasible: FeasibleSet, mut x: Vec<f64>, config: &OptimizerConfig) -> Ascent {
    feasible.project(&mut x);
    let dim = x.len();
    let eval = |x: &[f64]| {
        let (f, g) = propagator.fidelity_and_gradient(x);
        (-f, g.into_iter().map(|v| -v).collect::<Vec<f64>>())
    };

    let (mut f, mut g) = eval(&x);
    let mut history: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::with_capacity(config.history);
    let mut trace = vec![-f];
    let mut iterations = 0;
    let mut converged = false;

    while iterations < config.max_iterations {
        if projected_gradient_norm(&x, &g, feasible) < config.gradient_tolerance {
            converged = true;
            break;
        }
        let free = free_variables(&x, &g, feasible);

        let mut direction = two_loop(&g, &history, &free);
        constrain_direction(&mut direction, &free, feasible);
        let mut slope = dot(&g, &direction);
        if !(slope < 0.0) {
            history.clear();
            direction = g.iter().zip(&free).map(|(&gi, &fr)| if fr { -gi } else { 0.0 }).collect();
            constrain_direction(&mut direction, &free, feasible);
            slope = dot(&g, &direction);
            if !(slope < 0.0) {
                converged = projected_gradient_norm(&x, &g, feasible) < config.gradient_tolerance.sqrt();
                break;
            }
        }

        let max_step = direction.iter().fold(0.0f64, |m, d| m.max(d.abs()));
        let mut alpha = if history.is_empty() { (1.0 / max_step).min(1.0) } else { 1.0 };
        let mut accepted = None;
        for _ in 0..MAX_BACKTRACKS {
            let mut trial: Vec<f64> = x.iter().zip(&direction).map(|(xi, di)| xi + alpha * di).collect();
            feasible.project(&mut trial);
            let step: Vec<f64> = trial.iter().zip(&x).map(|(a, b)| a - b).collect();
            let predicted = dot(&g, &step);
            let (f_trial, g_trial) = eval(&trial);
            if f_trial <= f + ARMIJO * predicted.min(0.0) && f_trial <= f {
                accepted = Some((trial, step, f_trial, g_trial));
                break;
            }
            alpha *= 0.5;
        }

        let accepted = accepted.or_else(|| projected_steepest_step(&x, f, &g, feasible, &eval));
        let Some((x_new, step, f_new, g_new)) = accepted else {
            converged = projected_gradient_norm(&x, &g, feasible) < config.gradient_tolerance.sqrt();
            break;
        };

        let y: Vec<f64> = g_new.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&step, &y);
        if sy > 1e-12 * norm(&step) * norm(&y) && sy > 0.0 {
            if history.len() == config.history {
                history.pop_front();
            }
            history.push_back((step, y, 1.0 / sy));
        }
        let improvement = f - f_new;
        x = x_new;
        f = f_new;
        g = g_new;
        iterations += 1;
        trace.push(-f);
        if improvement == 0.0 && max_step * alpha < 1e-15 {
            converged = projected_gradient_norm(&x, &g, feasible) < config.gradient_tolerance.sqrt();
            break;
        }
    }
    debug_assert_eq!(x.len(), dim);
    Ascent {
        fidelity: -f,
        x,
        iterations,
        converged,
        trace,
    }
}

type Trial = (Vec<f64>, Vec<f64>, f64, Vec<f64>);

/// Backtracking along the projected steepest-descent path `P(x − αg)`, used
/// when the quasi-Newton direction fails. Descends for small enough `α`
/// unless `x` is stationary.
fn projected_steepest_step(
    x: &[f64],
    f: f64,
    g: &[f64],
    feasible: FeasibleSet,
    eval: &impl Fn(&[f64]) -> (f64, Vec<f64>),
) -> Option<Trial> {
    let gmax = g.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if gmax == 0.0 {
        return None;
    }
    let mut alpha = 1.0 / gmax;
    for _ in 0..60 {
        let mut trial: Vec<f64> = x.iter().zip(g).map(|(xi, gi)| xi - alpha * gi).collect();
        feasible.project(&mut trial);
        let step: Vec<f64> = trial.iter().zip(x).map(|(a, b)| a - b).collect();
        let predicted = dot(g, &step);
        if predicted < 0.0 {
            let (f_trial, g_trial) = eval(&trial);
            if f_trial <= f + ARMIJO * predicted {
                return Some((trial, step, f_trial, g_trial));
            }
        }
        alpha *= 0.5;
    }
    None
}

/// Coordinates the search direction may move. On the orthant a zero
/// variable is held when the gradient pushes it outward; on the simplex when
/// moving mass into it would not beat the average gradient of the positive
/// variables.
fn free_variables(x: &[f64], g: &[f64], feasible: FeasibleSet) -> Vec<bool> {
    let threshold = match feasible {
        FeasibleSet::Orthant => 0.0,
        FeasibleSet::Simplex(_) => {
            let (sum, count) = x
                .iter()
                .zip(g)
                .filter(|(&xi, _)| xi > 0.0)
                .fold((0.0, 0usize), |(s, c), (_, &gi)| (s + gi, c + 1));
            if count == 0 {
                return vec![true; x.len()];
            }
            sum / count as f64
        }
    };
    x.iter().zip(g).map(|(&xi, &gi)| xi > 0.0 || gi < threshold).collect()
}

fn projected_gradient_norm(x: &[f64], g: &[f64], feasible: FeasibleSet) -> f64 {
    let mut moved: Vec<f64> = x.iter().zip(g).map(|(a, b)| a - b).collect();
    feasible.project(&mut moved);
    x.iter().zip(&moved).fold(0.0, |m, (a, b)| m.max((a - b).abs()))
}

fn constrain_direction(direction: &mut [f64], free: &[bool], feasible: FeasibleSet) {
    for (d, &fr) in direction.iter_mut().zip(free) {
        if !fr {
            *d = 0.0;
        }
    }
    if let FeasibleSet::Simplex(_) = feasible {
        let count = free.iter().filter(|&&f| f).count();
        if count > 0 {
            let mean = direction.iter().zip(free).filter(|(_, &f)| f).map(|(d, _)| d).sum::<f64>() / count as f64;
            for (d, &fr) in direction.iter_mut().zip(free) {
                if fr {
                    *d -= mean;
                }
            }
        }
    }
}

/// L-BFGS two-loop recursion on the free coordinates; returns `−H·g`.
fn two_loop(g: &[f64], history: &VecDeque<(Vec<f64>, Vec<f64>, f64)>, free: &[bool]) -> Vec<f64> {
    let masked = |v: &[f64]| -> Vec<f64> { v.iter().zip(free).map(|(&a, &f)| if f { a } else { 0.0 }).collect() };
    let mut q = masked(g);
    let mut alphas = Vec::with_capacity(history.len());
    for (s, y, rho) in history.iter().rev() {
        let s = masked(s);
        let y = masked(y);
        let a = rho * dot(&s, &q);
        q.iter_mut().zip(&y).for_each(|(qi, yi)| *qi -= a * yi);
        alphas.push(a);
    }
    if let Some((s, y, _)) = history.back() {
        let yy = dot(y, y);
        if yy > 0.0 {
            let gamma = dot(s, y) / yy;
            q.iter_mut().for_each(|v| *v *= gamma);
        }
    }
    for ((s, y, rho), a) in history.iter().zip(alphas.iter().rev()) {
        let s = masked(s);
        let y = masked(y);
        let b = rho * dot(&y, &q);
        q.iter_mut().zip(&s).for_each(|(qi, si)| *qi += (a - b) * si);
    }
    q.iter_mut().for_each(|v| *v = -*v);
    q
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::subspace::fidelity;

    #[test]
    fn simplex_draws_are_feasible() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for p in 1..8 {
            let s = random_simplex_schedule(p, 7.5, &mut rng).unwrap();
            assert_eq!(s.depth(), p);
            assert!((s.total_time() - 7.5).abs() < 1e-12);
            assert!(s.to_flat().iter().all(|&d| d >= 0.0));
        }
        assert!(random_simplex_schedule(0, 1.0, &mut rng).is_err());
        assert!(random_simplex_schedule(2, 0.0, &mut rng).is_err());
    }

    #[test]
    fn simplex_draws_have_uniform_marginal_means() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let (p, t_f, draws) = (3, 6.0, 100_000);
        let mut sums = vec![0.0; 2 * p];
        for _ in 0..draws {
            let s = random_simplex_schedule(p, t_f, &mut rng).unwrap();
            for (acc, d) in sums.iter_mut().zip(s.to_flat()) {
                *acc += d;
            }
        }
        let target = t_f / (2 * p) as f64;
        for s in sums {
            let mean = s / draws as f64;
            assert!((mean - target).abs() < 0.02 * target, "{mean} vs {target}");
        }
    }

    #[test]
    fn simplex_projection() {
        let mut x = vec![0.5, -0.2, 2.0, 0.1];
        project_onto_simplex(&mut x, 1.0);
        assert!((x.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(x.iter().all(|&v| v >= 0.0));
        // already feasible points stay put
        let mut y = vec![0.25, 0.25, 0.5];
        project_onto_simplex(&mut y, 1.0);
        assert_eq!(y, vec![0.25, 0.25, 0.5]);
    }

    #[test]
    fn two_site_single_layer_reaches_unity() {
        let result = optimize_free(2, 1, &OptimizerConfig::free(20, 5)).unwrap();
        assert!((result.best_fidelity - 1.0).abs() < 1e-6);
        let f = fidelity(&result.best_schedule, 2).unwrap();
        assert!((f - result.best_fidelity).abs() < 1e-12);
    }

    #[test]
    fn fixed_runtime_keeps_the_constraint() {
        let config = OptimizerConfig {
            restarts: 8,
            ..OptimizerConfig::fixed_tf(2.5, 8, 2)
        };
        let result = optimize_fixed_tf(4, 3, 2.5, &config).unwrap();
        assert!((result.best_schedule.total_time() - 2.5).abs() < 1e-9);
        assert!(result.best_schedule.to_flat().iter().all(|&d| d >= 0.0));
        assert!(matches!(
            optimize_fixed_tf(4, 3, -1.0, &config),
            Err(Error::InvalidConstraint(_))
        ));
    }

    #[test]
    fn best_is_the_max_over_restarts() {
        let result = optimize_free(4, 2, &OptimizerConfig::free(12, 9)).unwrap();
        let max = result
            .restart_records
            .iter()
            .map(|r| r.final_fidelity)
            .fold(0.0, f64::max);
        assert_eq!(result.best_fidelity, max);
        assert_eq!(result.restart_records.len(), 12);
    }

    #[test]
    fn config_validation() {
        let mut c = OptimizerConfig::default();
        c.restarts = 0;
        assert!(c.validate().is_err());
        let mut c = OptimizerConfig::default();
        c.gradient_tolerance = 0.0;
        assert!(c.validate().is_err());
    }
}
