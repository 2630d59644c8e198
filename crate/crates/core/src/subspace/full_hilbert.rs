//! Dense state-vector simulation on the full `2^N` Hilbert space.
//!
//! Used as an independent oracle for the single-excitation simulator. Site `s`
//! (1-based) maps to bit `s − 1` of the basis index; a set bit is an
//! excitation (`σᶻ = +1`). `H_B = Σᵢ (σˣᵢσˣᵢ₊₁ + σʸᵢσʸᵢ₊₁)` is applied
//! matrix-free and `exp(−iH_B t)` is evaluated by a sub-stepped Taylor series.
//! `H_C = (σᶻ_N + I)/2` is diagonal and applied exactly.

use num_complex::Complex64;

use super::{Schedule, HOPPING};
use crate::error::{Error, Result};

pub const MAX_FULL_HILBERT_SITES: usize = 12;

/// Result of pushing `|1̄⟩` through a schedule in the full space.
#[derive(Debug, Clone, PartialEq)]
pub struct FullHilbertOutcome {
    pub fidelity: f64,
    /// Population outside the single-excitation sector after the last step.
    pub leakage: f64,
    pub sz_initial: f64,
    /// Largest `|⟨S_z⟩(t) − ⟨S_z⟩(0)|` seen after any step.
    pub max_sz_drift: f64,
}

#[derive(Debug, Clone)]
pub struct FullHilbertSimulator {
    n_sites: usize,
}

impl FullHilbertSimulator {
    pub fn new(n_sites: usize) -> Result<Self> {
        if n_sites < 2 {
            return Err(Error::InvalidDimension(n_sites));
        }
        if n_sites > MAX_FULL_HILBERT_SITES {
            return Err(Error::ResourceLimit(format!(
                "full Hilbert simulation capped at {MAX_FULL_HILBERT_SITES} sites, got {n_sites}"
            )));
        }
        Ok(Self { n_sites })
    }

    pub fn dim(&self) -> usize {
        1 << self.n_sites
    }

    /// Basis index of the state with one excitation on `site` (1-based).
    pub fn excitation_index(&self, site: usize) -> usize {
        1 << (site - 1)
    }

    pub fn apply_hb(&self, psi: &[Complex64], out: &mut [Complex64]) {
        out.iter_mut().for_each(|x| *x = Complex64::new(0.0, 0.0));
        for i in 0..self.n_sites - 1 {
            let mask = (1usize << i) | (1usize << (i + 1));
            for (b, &amp) in psi.iter().enumerate() {
                let pair = b & mask;
                if pair != 0 && pair != mask {
                    out[b ^ mask] += amp * HOPPING;
                }
            }
        }
    }

    /// `exp(−i H_B t) ψ`.
    pub fn evolve_b(&self, psi: &mut [Complex64], t: f64) {
        let norm_bound = HOPPING * (self.n_sites - 1) as f64;
        let substeps = ((norm_bound * t.abs()) / 0.5).ceil().max(1.0) as usize;
        let dt = t / substeps as f64;
        let mut term = vec![Complex64::new(0.0, 0.0); psi.len()];
        let mut next = term.clone();
        for _ in 0..substeps {
            term.copy_from_slice(psi);
            for k in 1..60 {
                self.apply_hb(&term, &mut next);
                let scale = Complex64::new(0.0, -dt / k as f64);
                let mut size = 0.0;
                for (x, y) in term.iter_mut().zip(&next) {
                    *x = *y * scale;
                    size += x.norm_sqr();
                }
                for (p, x) in psi.iter_mut().zip(&term) {
                    *p += *x;
                }
                if size.sqrt() < 1e-18 {
                    break;
                }
            }
        }
    }

    /// `exp(−i H_C t) ψ` with `H_C = (σᶻ_N + I)/2`.
    pub fn evolve_c(&self, psi: &mut [Complex64], t: f64) {
        let target = 1usize << (self.n_sites - 1);
        let phase = Complex64::from_polar(1.0, -t);
        for (b, amp) in psi.iter_mut().enumerate() {
            if b & target != 0 {
                *amp *= phase;
            }
        }
    }

    pub fn total_sz(&self, psi: &[Complex64]) -> f64 {
        let n = self.n_sites as f64;
        psi.iter()
            .enumerate()
            .map(|(b, a)| a.norm_sqr() * (2.0 * b.count_ones() as f64 - n))
            .sum()
    }

    pub fn leakage(&self, psi: &[Complex64]) -> f64 {
        psi.iter()
            .enumerate()
            .filter(|(b, _)| b.count_ones() != 1)
            .map(|(_, a)| a.norm_sqr())
            .sum()
    }

    /// Applies every pair of the schedule to `psi` in place.
    pub fn evolve(&self, schedule: &Schedule, psi: &mut [Complex64]) {
        for &(b, c) in schedule.pairs() {
            self.evolve_b(psi, b);
            self.evolve_c(psi, c);
        }
    }

    pub fn run(&self, schedule: &Schedule) -> FullHilbertOutcome {
        let mut psi = vec![Complex64::new(0.0, 0.0); self.dim()];
        psi[self.excitation_index(1)] = Complex64::new(1.0, 0.0);
        let sz_initial = self.total_sz(&psi);
        let mut max_sz_drift: f64 = 0.0;
        for &(b, c) in schedule.pairs() {
            self.evolve_b(&mut psi, b);
            max_sz_drift = max_sz_drift.max((self.total_sz(&psi) - sz_initial).abs());
            self.evolve_c(&mut psi, c);
            max_sz_drift = max_sz_drift.max((self.total_sz(&psi) - sz_initial).abs());
        }
        FullHilbertOutcome {
            fidelity: psi[self.excitation_index(self.n_sites)].norm_sqr(),
            leakage: self.leakage(&psi),
            sz_initial,
            max_sz_drift,
        }
    }
}

/// Transfer fidelity computed in the full `2^N` space.
pub fn full_hilbert_oracle(schedule: &Schedule, n_sites: usize) -> Result<f64> {
    Ok(FullHilbertSimulator::new(n_sites)?.run(schedule).fidelity)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn size_limits() {
        assert!(matches!(FullHilbertSimulator::new(13), Err(Error::ResourceLimit(_))));
        assert!(matches!(FullHilbertSimulator::new(1), Err(Error::InvalidDimension(1))));
        assert!(FullHilbertSimulator::new(12).is_ok());
    }

    #[test]
    fn vacuum_only_gains_a_phase() {
        let sim = FullHilbertSimulator::new(5).unwrap();
        let schedule = Schedule::new(vec![(0.7, 1.3), (0.4, 2.9), (1.9, 0.2)]).unwrap();
        let mut psi = vec![Complex64::new(0.0, 0.0); sim.dim()];
        psi[0] = Complex64::new(1.0, 0.0);
        sim.evolve(&schedule, &mut psi);
        assert!((psi[0].norm() - 1.0).abs() < 1e-12);
        assert!(psi[1..].iter().all(|a| a.norm() < 1e-12));
    }

    #[test]
    fn two_site_swap() {
        let s = Schedule::new(vec![(std::f64::consts::FRAC_PI_4, 0.5)]).unwrap();
        assert!((full_hilbert_oracle(&s, 2).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn sz_and_sector_are_conserved() {
        let sim = FullHilbertSimulator::new(6).unwrap();
        let s = Schedule::new(vec![(0.9, 0.3), (1.7, 2.2), (0.05, 0.8)]).unwrap();
        let out = sim.run(&s);
        assert_eq!(out.sz_initial, 2.0 - 6.0);
        assert!(out.max_sz_drift < 1e-10);
        assert!(out.leakage < 1e-12);
    }
}
