//! Pontryagin necessary conditions for bang-bang transfer controls.
//!
//! A QAOA schedule is the bang-bang control `H(t) = s(t)H_C + (1−s(t))H_B`
//! with `s ∈ {0, 1}`. For the Mayer cost `J = −|C_N(t_f)|²` we use the real
//! control Hamiltonian `H_control = 2 Re[pᵀ f(c, s)]` with
//! `f = −iH(s)c`. The costate components are stored in conjugated (bra) form,
//! so the terminal condition is the Wirtinger derivative
//!
//! ```text
//! p(t_f) = ∂J/∂c = −C_N(t_f)* e_N
//! ```
//!
//! and the costate ket `χ = p*` obeys the same Schrödinger equation as the
//! state. The switching function is
//!
//! ```text
//! Φ(t) = ∂H_control/∂s = 2 Re[pᵀ (−i)(H_C − H_B) c]
//! ```
//!
//! i.e. the first-order change of `J` when `s` is nudged up at time `t`.
//! Optimality requires `Φ ≤ 0` wherever `s = 1`, `Φ ≥ 0` wherever `s = 0`,
//! and `Φ = 0` at every interior switch.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::subspace::{apply_hb, ExcitationVector, Schedule, SpectralDecomposition};

/// Uniform samples per segment in [`integrate_state`].
pub const DEFAULT_SAMPLES_PER_SEGMENT: usize = 64;
/// Largest fraction of a segment allowed to break the sign condition.
pub const MAX_VIOLATION_FRACTION: f64 = 1e-3;
/// Segments shorter than this fraction of the runtime are dropped.
pub const NEGLIGIBLE_DURATION: f64 = 1e-12;
/// Terminal overlaps below this make the costate identically zero.
pub const VACUOUS_OVERLAP: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    /// 0 evolves under `H_B`, 1 under `H_C`.
    pub s: u8,
    pub duration: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct PiecewiseControl {
    segments: Vec<Segment>,
}

impl PiecewiseControl {
    /// Drops empty (or roundoff-sized) segments and merges neighbours with
    /// equal `s`.
    pub fn new(raw: impl IntoIterator<Item = Segment>) -> Self {
        let mut segments: Vec<Segment> = Vec::new();
        let raw: Vec<Segment> = raw.into_iter().collect();
        let total: f64 = raw.iter().map(|s| s.duration.max(0.0)).sum();
        for seg in raw {
            // roundoff-sized segments are switch artefacts, not controls
            if seg.duration <= NEGLIGIBLE_DURATION * total.max(1.0) {
                continue;
            }
            match segments.last_mut() {
                Some(last) if last.s == seg.s => last.duration += seg.duration,
                _ => segments.push(seg),
            }
        }
        Self { segments }
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn total_time(&self) -> f64 {
        self.segments.iter().map(|s| s.duration).sum()
    }

    /// Start time of every segment plus the final time.
    pub fn boundaries(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.segments.len() + 1);
        let mut t = 0.0;
        out.push(t);
        for seg in &self.segments {
            t += seg.duration;
            out.push(t);
        }
        out
    }
}

pub fn schedule_to_control(schedule: &Schedule) -> PiecewiseControl {
    PiecewiseControl::new(schedule.pairs().iter().flat_map(|&(b, c)| {
        [Segment { s: 0, duration: b }, Segment { s: 1, duration: c }]
    }))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub time: f64,
    /// Index of the segment the sample belongs to; switch times are attached
    /// to the segment that ends there.
    pub segment: usize,
    pub vector: Vec<Complex64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StateTrajectory {
    pub checkpoints: Vec<Checkpoint>,
}

impl StateTrajectory {
    pub fn final_state(&self) -> &[Complex64] {
        &self.checkpoints.last().expect("nonempty trajectory").vector
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CostateTrajectory {
    /// Costate components `p_j` (bra form) on the state trajectory's grid.
    pub checkpoints: Vec<Checkpoint>,
}

struct Dynamics {
    spect: std::sync::Arc<SpectralDecomposition>,
}

impl Dynamics {
    fn new(n_sites: usize) -> Result<Self> {
        Ok(Self {
            spect: SpectralDecomposition::cached(n_sites)?,
        })
    }

    /// Ket evolution `exp(−iH(s)t)` in place.
    fn step(&self, v: &mut [Complex64], s: u8, t: f64) {
        if s == 0 {
            self.spect.propagate(v, t);
        } else {
            let n = v.len();
            v[n - 1] *= Complex64::from_polar(1.0, -t);
        }
    }
}

fn sample_times(control: &PiecewiseControl, samples: usize) -> Vec<(f64, usize, f64)> {
    // (absolute time, segment, offset inside segment)
    let mut grid = Vec::new();
    let mut start = 0.0;
    for (idx, seg) in control.segments().iter().enumerate() {
        let count = samples.max(1);
        let first = if idx == 0 { 0 } else { 1 };
        for i in first..=count {
            let offset = seg.duration * i as f64 / count as f64;
            grid.push((start + offset, idx, offset));
        }
        start += seg.duration;
    }
    if grid.is_empty() {
        grid.push((0.0, 0, 0.0));
    }
    grid
}

fn trajectory_from(
    dynamics: &Dynamics,
    control: &PiecewiseControl,
    initial: Vec<Complex64>,
    samples: usize,
) -> Vec<Checkpoint> {
    let grid = sample_times(control, samples);
    let mut out = Vec::with_capacity(grid.len());
    let mut current = initial;
    let mut last_offset = 0.0;
    let mut last_segment = 0;
    for (time, segment, offset) in grid {
        if segment != last_segment {
            // finish the previous segment exactly
            last_offset = 0.0;
            last_segment = segment;
        }
        if let Some(seg) = control.segments().get(segment) {
            dynamics.step(&mut current, seg.s, offset - last_offset);
        }
        last_offset = offset;
        out.push(Checkpoint {
            time,
            segment,
            vector: current.clone(),
        });
    }
    out
}

/// Piecewise-exact propagation of `|1̄⟩`, sampled at every switch time and
/// `samples_per_segment` uniform points inside each segment.
pub fn integrate_state(control: &PiecewiseControl, n_sites: usize, samples_per_segment: usize) -> Result<StateTrajectory> {
    let dynamics = Dynamics::new(n_sites)?;
    let initial = ExcitationVector::first_site(n_sites)?.into_amplitudes();
    Ok(StateTrajectory {
        checkpoints: trajectory_from(&dynamics, control, initial, samples_per_segment),
    })
}

/// Costate on the same grid as [`integrate_state`], from the terminal
/// condition `p(t_f) = −C_N(t_f)* e_N` propagated backwards.
pub fn integrate_costate(
    control: &PiecewiseControl,
    final_state: &[Complex64],
    n_sites: usize,
    samples_per_segment: usize,
) -> Result<CostateTrajectory> {
    let dynamics = Dynamics::new(n_sites)?;
    let chi0 = costate_ket_at_start(&dynamics, control, final_state);
    let kets = trajectory_from(&dynamics, control, chi0, samples_per_segment);
    Ok(CostateTrajectory {
        checkpoints: kets
            .into_iter()
            .map(|mut c| {
                c.vector.iter_mut().for_each(|z| *z = z.conj());
                c
            })
            .collect(),
    })
}

fn terminal_costate_ket(final_state: &[Complex64]) -> Vec<Complex64> {
    let n = final_state.len();
    let mut chi = vec![Complex64::new(0.0, 0.0); n];
    chi[n - 1] = -final_state[n - 1];
    chi
}

/// `χ(0) = U(t_f, 0)† χ(t_f)`.
fn costate_ket_at_start(dynamics: &Dynamics, control: &PiecewiseControl, final_state: &[Complex64]) -> Vec<Complex64> {
    let mut chi = terminal_costate_ket(final_state);
    for seg in control.segments().iter().rev() {
        dynamics.step(&mut chi, seg.s, -seg.duration);
    }
    chi
}

/// Propagates bra-form costate components forward from `p0` over the whole
/// control.
pub fn propagate_costate_forward(control: &PiecewiseControl, p0: &[Complex64], n_sites: usize) -> Result<Vec<Complex64>> {
    let dynamics = Dynamics::new(n_sites)?;
    let mut chi: Vec<Complex64> = p0.iter().map(|z| z.conj()).collect();
    for seg in control.segments() {
        dynamics.step(&mut chi, seg.s, seg.duration);
    }
    Ok(chi.into_iter().map(|z| z.conj()).collect())
}

fn switching_value(p: &[Complex64], c: &[Complex64], scratch: &mut [Complex64]) -> f64 {
    // (H_C − H_B)c
    apply_hb(c, scratch);
    let n = c.len();
    let mut acc = Complex64::new(0.0, 0.0);
    for j in 0..n {
        let mut hc = -scratch[j];
        if j == n - 1 {
            hc += c[j];
        }
        acc += p[j] * hc;
    }
    2.0 * (Complex64::new(0.0, -1.0) * acc).re
}

/// `Φ(t)` on an arbitrary time grid. Times outside `[0, t_f]` are clamped.
pub fn switching_function(control: &PiecewiseControl, n_sites: usize, time_grid: &[f64]) -> Result<Vec<f64>> {
    let dynamics = Dynamics::new(n_sites)?;
    let mut c_final = ExcitationVector::first_site(n_sites)?.into_amplitudes();
    for seg in control.segments() {
        dynamics.step(&mut c_final, seg.s, seg.duration);
    }
    let chi0 = costate_ket_at_start(&dynamics, control, &c_final);
    let bounds = control.boundaries();
    let mut scratch = vec![Complex64::new(0.0, 0.0); n_sites];

    time_grid
        .iter()
        .map(|&t| {
            let t = t.clamp(0.0, control.total_time());
            let mut c = ExcitationVector::first_site(n_sites)?.into_amplitudes();
            let mut chi = chi0.clone();
            for (seg, start) in control.segments().iter().zip(&bounds) {
                let span = (t - start).clamp(0.0, seg.duration);
                if span <= 0.0 {
                    break;
                }
                dynamics.step(&mut c, seg.s, span);
                dynamics.step(&mut chi, seg.s, span);
            }
            let p: Vec<Complex64> = chi.iter().map(|z| z.conj()).collect();
            Ok(switching_value(&p, &c, &mut scratch))
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Consistent,
    Violated,
    /// Zero terminal overlap: the costate vanishes and the conditions hold
    /// trivially.
    Vacuous,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignViolation {
    pub segment: usize,
    pub fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PontryaginReport {
    pub n_sites: usize,
    pub fidelity: f64,
    pub switch_times: Vec<f64>,
    /// `Φ` at each interior switch time.
    pub switching_values: Vec<f64>,
    pub segment_sign_violations: Vec<SignViolation>,
    pub verdict: Verdict,
    pub tolerance: f64,
}

/// Runs the full state/costate pipeline and checks the sign and switching
/// conditions at `tolerance`.
pub fn verify_pontryagin(schedule: &Schedule, n_sites: usize, tolerance: f64) -> Result<PontryaginReport> {
    verify_control(&schedule_to_control(schedule), n_sites, tolerance, DEFAULT_SAMPLES_PER_SEGMENT)
}

pub fn verify_control(
    control: &PiecewiseControl,
    n_sites: usize,
    tolerance: f64,
    samples_per_segment: usize,
) -> Result<PontryaginReport> {
    let states = integrate_state(control, n_sites, samples_per_segment)?;
    let final_state = states.final_state().to_vec();
    let fidelity = final_state[n_sites - 1].norm_sqr();
    let costates = integrate_costate(control, &final_state, n_sites, samples_per_segment)?;

    let bounds = control.boundaries();
    let switch_times: Vec<f64> = if bounds.len() > 2 {
        bounds[1..bounds.len() - 1].to_vec()
    } else {
        Vec::new()
    };

    if final_state[n_sites - 1].norm() < VACUOUS_OVERLAP {
        return Ok(PontryaginReport {
            n_sites,
            fidelity,
            switching_values: vec![0.0; switch_times.len()],
            switch_times,
            segment_sign_violations: Vec::new(),
            verdict: Verdict::Vacuous,
            tolerance,
        });
    }

    let mut scratch = vec![Complex64::new(0.0, 0.0); n_sites];
    let phi: Vec<f64> = states
        .checkpoints
        .iter()
        .zip(&costates.checkpoints)
        .map(|(c, p)| switching_value(&p.vector, &c.vector, &mut scratch))
        .collect();

    // switch time k closes segment k
    let mut switching_values = Vec::with_capacity(switch_times.len());
    for k in 0..switch_times.len() {
        let idx = states
            .checkpoints
            .iter()
            .rposition(|cp| cp.segment == k)
            .expect("every segment is sampled");
        switching_values.push(phi[idx]);
    }

    let mut segment_sign_violations = Vec::new();
    for (k, seg) in control.segments().iter().enumerate() {
        let mut total = 0usize;
        let mut bad = 0usize;
        for (cp, &value) in states.checkpoints.iter().zip(&phi) {
            if cp.segment != k {
                continue;
            }
            total += 1;
            let violates = if seg.s == 1 { value > tolerance } else { value < -tolerance };
            if violates {
                bad += 1;
            }
        }
        let fraction = if total == 0 { 0.0 } else { bad as f64 / total as f64 };
        if fraction > 0.0 {
            segment_sign_violations.push(SignViolation { segment: k, fraction });
        }
    }

    let consistent = switching_values.iter().all(|v| v.abs() < tolerance)
        && segment_sign_violations.iter().all(|v| v.fraction < MAX_VIOLATION_FRACTION);
    Ok(PontryaginReport {
        n_sites,
        fidelity,
        switch_times,
        switching_values,
        segment_sign_violations,
        verdict: if consistent { Verdict::Consistent } else { Verdict::Violated },
        tolerance,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::subspace::apply_schedule;

    #[test]
    fn control_from_schedule() {
        let s = Schedule::new(vec![(0.5, 0.3)]).unwrap();
        let c = schedule_to_control(&s);
        assert_eq!(
            c.segments(),
            &[Segment { s: 0, duration: 0.5 }, Segment { s: 1, duration: 0.3 }]
        );

        let merged = schedule_to_control(&Schedule::new(vec![(0.5, 0.0), (0.4, 0.2)]).unwrap());
        assert_eq!(merged.segments().len(), 2);
        assert!((merged.segments()[0].duration - 0.9).abs() < 1e-15);
        assert_eq!(merged.segments()[1], Segment { s: 1, duration: 0.2 });

        let s = Schedule::new(vec![(0.1, 0.7), (0.0, 0.6), (1.2, 0.0)]).unwrap();
        assert!((schedule_to_control(&s).total_time() - s.total_time()).abs() < 1e-15);
    }

    #[test]
    fn state_trajectory_matches_schedule() {
        let s = Schedule::new(vec![(0.4, 0.9), (1.1, 0.3), (0.2, 1.7)]).unwrap();
        let traj = integrate_state(&schedule_to_control(&s), 5, 16).unwrap();
        let direct = apply_schedule(&s, 5).unwrap();
        for (a, b) in traj.final_state().iter().zip(direct.amplitudes()) {
            assert!((a - b).norm() < 1e-12);
        }
        for cp in &traj.checkpoints {
            let norm: f64 = cp.vector.iter().map(|z| z.norm_sqr()).sum();
            assert!((norm - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn oracle_segments_only_rotate_the_target_phase() {
        let s = Schedule::new(vec![(0.6, 1.4)]).unwrap();
        let traj = integrate_state(&schedule_to_control(&s), 4, 8).unwrap();
        let oracle: Vec<&Checkpoint> = traj.checkpoints.iter().filter(|c| c.segment == 1).collect();
        let entry = &traj.checkpoints.iter().rfind(|c| c.segment == 0).unwrap().vector;
        for cp in oracle {
            for j in 0..3 {
                assert!((cp.vector[j] - entry[j]).norm() < 1e-14);
            }
            assert!((cp.vector[3].norm() - entry[3].norm()).abs() < 1e-14);
        }
    }

    #[test]
    fn costate_terminal_condition_and_norm() {
        let s = Schedule::new(vec![(0.4, 0.9), (1.1, 0.3)]).unwrap();
        let control = schedule_to_control(&s);
        let traj = integrate_state(&control, 4, 8).unwrap();
        let fin = traj.final_state().to_vec();
        let co = integrate_costate(&control, &fin, 4, 8).unwrap();
        let last = &co.checkpoints.last().unwrap().vector;
        assert!((last[3] + fin[3].conj()).norm() < 1e-12);
        assert!(last[..3].iter().all(|z| z.norm() < 1e-12));
        let norm0 = fin[3].norm();
        for cp in &co.checkpoints {
            let n: f64 = cp.vector.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            assert!((n - norm0).abs() < 1e-12);
        }
    }

    #[test]
    fn perfect_transfer_has_unit_costate() {
        let s = Schedule::new(vec![(std::f64::consts::FRAC_PI_4, 0.0)]).unwrap();
        let control = schedule_to_control(&s);
        let traj = integrate_state(&control, 2, 8).unwrap();
        let co = integrate_costate(&control, traj.final_state(), 2, 8).unwrap();
        let last = &co.checkpoints.last().unwrap().vector;
        assert!((last[1].norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn vacuous_when_nothing_arrives() {
        let s = Schedule::new(vec![(0.0, 0.8), (0.0, 0.5)]).unwrap();
        let report = verify_pontryagin(&s, 4, 1e-3).unwrap();
        assert_eq!(report.verdict, Verdict::Vacuous);
        let phi = switching_function(&schedule_to_control(&s), 4, &[0.0, 0.4, 1.3]).unwrap();
        assert!(phi.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn forward_costate_round_trip() {
        let s = Schedule::new(vec![(0.7, 0.2), (0.5, 1.3), (0.9, 0.4)]).unwrap();
        let control = schedule_to_control(&s);
        let traj = integrate_state(&control, 6, 4).unwrap();
        let co = integrate_costate(&control, traj.final_state(), 6, 4).unwrap();
        let p0 = &co.checkpoints[0].vector;
        let p_tf = propagate_costate_forward(&control, p0, 6).unwrap();
        for (a, b) in p_tf.iter().zip(&co.checkpoints.last().unwrap().vector) {
            assert!((a - b).norm() < 1e-10);
        }
    }

    #[test]
    fn report_is_deterministic() {
        let s = Schedule::new(vec![(0.7, 0.2), (0.5, 1.3)]).unwrap();
        let a = verify_pontryagin(&s, 5, 1e-3).unwrap();
        let b = verify_pontryagin(&s, 5, 1e-3).unwrap();
        assert_eq!(a, b);
    }
}
