//! Exact QAOA evolution in the single-excitation sector.
//!
//! The chain is open (no wraparound). In the basis `{|1̄⟩, …, |N̄⟩}`, where
//! `|n̄⟩` carries the excitation on site `n`, the two generators are
//!
//! * `H_B` the XY hopping term, tridiagonal with zero diagonal and `2` on both
//!   off-diagonals,
//! * `H_C = |N̄⟩⟨N̄|`, a phase on the target site.
//!
//! The vacuum `|0̄⟩` is an eigenstate of both generators and picks up at most a
//! global phase, so its amplitude is not tracked. The identity part of
//! `(σ_N^z + I)/2` only contributes a global phase inside the sector and is
//! dropped as well.
//!
//! Evolution under `H_B` goes through a [`SpectralDecomposition`] computed once
//! per chain length and shared through [`SpectralDecomposition::cached`].

mod full_hilbert;

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;
use std::sync::{Arc, Mutex, OnceLock};

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use full_hilbert::{full_hilbert_oracle, FullHilbertOutcome, FullHilbertSimulator, MAX_FULL_HILBERT_SITES};

/// Hopping amplitude of `σˣσˣ + σʸσʸ` between neighbouring sites.
pub const HOPPING: f64 = 2.0;

const I: Complex64 = Complex64::new(0.0, 1.0);

/// Amplitudes over the single-excitation basis `|1̄⟩ … |N̄⟩`.
#[derive(Debug, Clone, PartialEq)]
pub struct ExcitationVector {
    amplitudes: Vec<Complex64>,
}

impl ExcitationVector {
    /// Excitation localised on `site` (1-based).
    pub fn basis(n_sites: usize, site: usize) -> Result<Self> {
        check_sites(n_sites)?;
        if site == 0 || site > n_sites {
            return Err(Error::InvalidIndex(format!("site {site} outside 1..={n_sites}")));
        }
        let mut amplitudes = vec![Complex64::new(0.0, 0.0); n_sites];
        amplitudes[site - 1] = Complex64::new(1.0, 0.0);
        Ok(Self { amplitudes })
    }

    /// The initial state `|1̄⟩`.
    pub fn first_site(n_sites: usize) -> Result<Self> {
        Self::basis(n_sites, 1)
    }

    pub fn from_amplitudes(amplitudes: Vec<Complex64>) -> Result<Self> {
        check_sites(amplitudes.len())?;
        Ok(Self { amplitudes })
    }

    pub fn n_sites(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn into_amplitudes(self) -> Vec<Complex64> {
        self.amplitudes
    }

    /// Amplitude on `site` (1-based).
    pub fn amplitude(&self, site: usize) -> Complex64 {
        self.amplitudes[site - 1]
    }

    /// Amplitude on the last site, `c_N`.
    pub fn target_amplitude(&self) -> Complex64 {
        *self.amplitudes.last().expect("at least two sites")
    }

    pub fn norm(&self) -> f64 {
        self.amplitudes.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
    }

    /// `|c_N|²`.
    pub fn target_population(&self) -> f64 {
        self.target_amplitude().norm_sqr()
    }
}

/// Eigenpairs of `H_B` restricted to the single-excitation sector, sorted by
/// ascending eigenvalue. Column `k` of `eigenvectors` pairs with
/// `eigenvalues[k]`.
#[derive(Debug, Clone)]
pub struct SpectralDecomposition {
    eigenvalues: Vec<f64>,
    eigenvectors: DMatrix<f64>,
}

impl SpectralDecomposition {
    pub fn new(n_sites: usize) -> Result<Self> {
        diagonalize_hb(n_sites)
    }

    /// Shared decomposition for `n_sites`, computed on first use.
    pub fn cached(n_sites: usize) -> Result<Arc<Self>> {
        static CACHE: OnceLock<Mutex<HashMap<usize, Arc<SpectralDecomposition>>>> = OnceLock::new();
        check_sites(n_sites)?;
        let cache = CACHE.get_or_init(Default::default);
        if let Some(found) = cache.lock().expect("cache poisoned").get(&n_sites) {
            return Ok(Arc::clone(found));
        }
        let fresh = Arc::new(diagonalize_hb(n_sites)?);
        let mut guard = cache.lock().expect("cache poisoned");
        Ok(Arc::clone(guard.entry(n_sites).or_insert(fresh)))
    }

    pub fn n_sites(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn eigenvectors(&self) -> &DMatrix<f64> {
        &self.eigenvectors
    }

    /// `max |VᵀV − I|`.
    pub fn orthonormality_error(&self) -> f64 {
        let n = self.n_sites();
        let gram = self.eigenvectors.transpose() * &self.eigenvectors;
        (gram - DMatrix::<f64>::identity(n, n)).amax()
    }

    /// `max |V diag(E) Vᵀ − H_B|`.
    pub fn reconstruction_error(&self) -> f64 {
        let n = self.n_sites();
        let diag = DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(&self.eigenvalues));
        let rebuilt = &self.eigenvectors * diag * self.eigenvectors.transpose();
        let hb = build_hb(n).expect("n_sites validated at construction");
        (rebuilt - hb).amax()
    }

    /// Applies `exp(−i H_B t)` in place. Negative `t` evolves backwards.
    pub(crate) fn propagate(&self, amplitudes: &mut [Complex64], t: f64) {
        let n = self.n_sites();
        debug_assert_eq!(amplitudes.len(), n);
        if t == 0.0 {
            return;
        }
        let mut modes = vec![Complex64::new(0.0, 0.0); n];
        for (k, mode) in modes.iter_mut().enumerate() {
            let column = self.eigenvectors.column(k);
            let mut acc = Complex64::new(0.0, 0.0);
            for (v, c) in column.iter().zip(amplitudes.iter()) {
                acc += *c * *v;
            }
            *mode = acc * Complex64::from_polar(1.0, -self.eigenvalues[k] * t);
        }
        amplitudes.iter_mut().for_each(|c| *c = Complex64::new(0.0, 0.0));
        for (k, mode) in modes.iter().enumerate() {
            let column = self.eigenvectors.column(k);
            for (c, v) in amplitudes.iter_mut().zip(column.iter()) {
                *c += *mode * *v;
            }
        }
    }
}

/// A depth-`p` QAOA schedule: `p` pairs `(δ_B, δ_C)` of evolution times.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Schedule {
    pairs: Vec<(f64, f64)>,
}

impl Schedule {
    pub fn new(pairs: Vec<(f64, f64)>) -> Result<Self> {
        for (k, &(b, c)) in pairs.iter().enumerate() {
            for (name, d) in [("delta_B", b), ("delta_C", c)] {
                if !d.is_finite() || d < 0.0 {
                    return Err(Error::InvalidSchedule(format!(
                        "{name} of pair {} is {d}; durations must be finite and nonnegative",
                        k + 1
                    )));
                }
            }
        }
        Ok(Self { pairs })
    }

    pub fn empty() -> Self {
        Self::default()
    }

    /// Builds a schedule from interleaved durations `δ_B¹, δ_C¹, δ_B², …`.
    pub fn from_flat(durations: &[f64]) -> Result<Self> {
        if durations.len() % 2 != 0 {
            return Err(Error::InvalidSchedule(format!(
                "expected an even number of durations, got {}",
                durations.len()
            )));
        }
        Self::new(durations.chunks_exact(2).map(|c| (c[0], c[1])).collect())
    }

    pub fn to_flat(&self) -> Vec<f64> {
        self.pairs.iter().flat_map(|&(b, c)| [b, c]).collect()
    }

    pub fn pairs(&self) -> &[(f64, f64)] {
        &self.pairs
    }

    pub fn depth(&self) -> usize {
        self.pairs.len()
    }

    pub fn total_time(&self) -> f64 {
        self.pairs.iter().map(|&(b, c)| b + c).sum()
    }

    /// Appends zero-duration pairs up to `new_depth`.
    pub fn padded(&self, new_depth: usize) -> Result<Self> {
        if new_depth < self.depth() {
            return Err(Error::InvalidSchedule(format!(
                "cannot pad depth {} down to {new_depth}",
                self.depth()
            )));
        }
        let mut pairs = self.pairs.clone();
        pairs.resize(new_depth, (0.0, 0.0));
        Ok(Self { pairs })
    }
}

/// Semicolon-separated interleaved durations, `dB1;dC1;dB2;dC2;…`.
impl fmt::Display for Schedule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.to_flat().iter().map(|d| format!("{d:.16e}")).collect();
        f.write_str(&parts.join(";"))
    }
}

impl FromStr for Schedule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.is_empty() {
            return Ok(Self::empty());
        }
        let durations = s
            .split(';')
            .map(|tok| {
                tok.trim()
                    .parse::<f64>()
                    .map_err(|_| Error::Parse(format!("bad duration {tok:?} in schedule")))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::from_flat(&durations)
    }
}

fn check_sites(n_sites: usize) -> Result<()> {
    if n_sites < 2 {
        Err(Error::InvalidDimension(n_sites))
    } else {
        Ok(())
    }
}

/// The hopping Hamiltonian `H_B` of an open chain in the single-excitation
/// sector.
pub fn build_hb(n_sites: usize) -> Result<DMatrix<f64>> {
    check_sites(n_sites)?;
    let mut h = DMatrix::zeros(n_sites, n_sites);
    for j in 0..n_sites - 1 {
        h[(j, j + 1)] = HOPPING;
        h[(j + 1, j)] = HOPPING;
    }
    Ok(h)
}

pub fn diagonalize_hb(n_sites: usize) -> Result<SpectralDecomposition> {
    let h = build_hb(n_sites)?;
    let eig = SymmetricEigen::new(h);
    let mut order: Vec<usize> = (0..n_sites).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let eigenvalues = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let mut eigenvectors = DMatrix::zeros(n_sites, n_sites);
    for (dst, &src) in order.iter().enumerate() {
        eigenvectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    Ok(SpectralDecomposition {
        eigenvalues,
        eigenvectors,
    })
}

/// `exp(−i H_B δ)·state`. A negative `delta` runs the evolution backwards.
pub fn evolve_b(state: &ExcitationVector, delta: f64, spect: &SpectralDecomposition) -> Result<ExcitationVector> {
    if state.n_sites() != spect.n_sites() {
        return Err(Error::DimensionMismatch {
            expected: spect.n_sites(),
            actual: state.n_sites(),
        });
    }
    let mut out = state.clone();
    spect.propagate(&mut out.amplitudes, delta);
    Ok(out)
}

/// `exp(−i H_C δ)·state`: a phase `e^{−iδ}` on `c_N`.
pub fn evolve_c(state: &ExcitationVector, delta: f64) -> ExcitationVector {
    let mut out = state.clone();
    *out.amplitudes.last_mut().expect("at least two sites") *= Complex64::from_polar(1.0, -delta);
    out
}

/// `U_p |1̄⟩`, each pair applying `H_B` for `δ_B` and then `H_C` for `δ_C`.
pub fn apply_schedule(schedule: &Schedule, n_sites: usize) -> Result<ExcitationVector> {
    let spect = SpectralDecomposition::cached(n_sites)?;
    Ok(ChainPropagator::new(spect).apply(schedule))
}

/// Transfer fidelity `F = |⟨N̄|U_p|1̄⟩|²`.
pub fn fidelity(schedule: &Schedule, n_sites: usize) -> Result<f64> {
    Ok(apply_schedule(schedule, n_sites)?.target_population())
}

/// `∂F/∂δ` for every duration, interleaved as `∂δ_B¹, ∂δ_C¹, ∂δ_B², …`.
pub fn fidelity_gradient(schedule: &Schedule, n_sites: usize) -> Result<Vec<f64>> {
    let spect = SpectralDecomposition::cached(n_sites)?;
    Ok(ChainPropagator::new(spect).fidelity_and_gradient(&schedule.to_flat()).1)
}

/// Evaluator bound to one chain length. Cheap to clone; shares the
/// decomposition.
#[derive(Debug, Clone)]
pub struct ChainPropagator {
    spect: Arc<SpectralDecomposition>,
}

impl ChainPropagator {
    pub fn new(spect: Arc<SpectralDecomposition>) -> Self {
        Self { spect }
    }

    pub fn for_sites(n_sites: usize) -> Result<Self> {
        Ok(Self::new(SpectralDecomposition::cached(n_sites)?))
    }

    pub fn n_sites(&self) -> usize {
        self.spect.n_sites()
    }

    pub fn spectral(&self) -> &SpectralDecomposition {
        &self.spect
    }

    pub fn apply(&self, schedule: &Schedule) -> ExcitationVector {
        let mut amps = ExcitationVector::first_site(self.n_sites())
            .expect("validated chain")
            .amplitudes;
        for &(b, c) in schedule.pairs() {
            self.spect.propagate(&mut amps, b);
            *amps.last_mut().unwrap() *= Complex64::from_polar(1.0, -c);
        }
        ExcitationVector { amplitudes: amps }
    }

    /// Fidelity for interleaved durations, without validation.
    pub fn fidelity_flat(&self, durations: &[f64]) -> f64 {
        let mut amps = ExcitationVector::first_site(self.n_sites())
            .expect("validated chain")
            .amplitudes;
        for pair in durations.chunks_exact(2) {
            self.spect.propagate(&mut amps, pair[0]);
            *amps.last_mut().unwrap() *= Complex64::from_polar(1.0, -pair[1]);
        }
        amps.last().unwrap().norm_sqr()
    }

    /// Fidelity and its exact gradient by the adjoint method.
    ///
    /// With `ψ_m` the state after the `m`-th exponential and `χ_m` the target
    /// `|N̄⟩` pulled back through the remaining exponentials, the amplitude
    /// derivative is `∂A/∂δ_m = ⟨χ_m|(−iH_m)|ψ_m⟩` and
    /// `∂F/∂δ_m = 2 Re(A* ∂A/∂δ_m)`.
    pub fn fidelity_and_gradient(&self, durations: &[f64]) -> (f64, Vec<f64>) {
        let n = self.n_sites();
        let steps = durations.len();
        let zero = Complex64::new(0.0, 0.0);

        let mut forward: Vec<Vec<Complex64>> = Vec::with_capacity(steps);
        let mut psi = vec![zero; n];
        psi[0] = Complex64::new(1.0, 0.0);
        for (m, &d) in durations.iter().enumerate() {
            if m % 2 == 0 {
                self.spect.propagate(&mut psi, d);
            } else {
                psi[n - 1] *= Complex64::from_polar(1.0, -d);
            }
            forward.push(psi.clone());
        }
        let amplitude = psi[n - 1];

        let mut gradient = vec![0.0; steps];
        let mut chi = vec![zero; n];
        chi[n - 1] = Complex64::new(1.0, 0.0);
        let mut h_psi = vec![zero; n];
        for m in (0..steps).rev() {
            let psi_m = &forward[m];
            let d_amp = if m % 2 == 0 {
                apply_hb(psi_m, &mut h_psi);
                -I * inner(&chi, &h_psi)
            } else {
                -I * chi[n - 1].conj() * psi_m[n - 1]
            };
            gradient[m] = 2.0 * (amplitude.conj() * d_amp).re;
            if m % 2 == 0 {
                self.spect.propagate(&mut chi, -durations[m]);
            } else {
                chi[n - 1] *= Complex64::from_polar(1.0, durations[m]);
            }
        }
        (amplitude.norm_sqr(), gradient)
    }
}

/// `⟨a|b⟩`.
pub(crate) fn inner(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

/// `out = H_B·v` using the tridiagonal structure.
pub(crate) fn apply_hb(v: &[Complex64], out: &mut [Complex64]) {
    let n = v.len();
    for j in 0..n {
        let mut acc = Complex64::new(0.0, 0.0);
        if j > 0 {
            acc += v[j - 1];
        }
        if j + 1 < n {
            acc += v[j + 1];
        }
        out[j] = acc * HOPPING;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_PI_4, FRAC_PI_8, PI, SQRT_2};

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn hb_small_chains() {
        let h2 = build_hb(2).unwrap();
        assert_eq!(h2, DMatrix::from_row_slice(2, 2, &[0.0, 2.0, 2.0, 0.0]));
        let h3 = build_hb(3).unwrap();
        assert_eq!(
            h3,
            DMatrix::from_row_slice(3, 3, &[0.0, 2.0, 0.0, 2.0, 0.0, 2.0, 0.0, 2.0, 0.0])
        );
        for n in 2..12 {
            let h = build_hb(n).unwrap();
            assert_eq!(h, h.transpose());
        }
    }

    #[test]
    fn too_short_chain_rejected() {
        assert!(matches!(build_hb(1), Err(Error::InvalidDimension(1))));
        assert!(matches!(diagonalize_hb(0), Err(Error::InvalidDimension(0))));
        assert!(ExcitationVector::first_site(1).is_err());
    }

    #[test]
    fn closed_form_spectra() {
        let s2 = diagonalize_hb(2).unwrap();
        assert!((s2.eigenvalues()[0] + 2.0).abs() < 1e-12);
        assert!((s2.eigenvalues()[1] - 2.0).abs() < 1e-12);
        let s3 = diagonalize_hb(3).unwrap();
        let expected = [-2.0 * SQRT_2, 0.0, 2.0 * SQRT_2];
        for (e, x) in s3.eigenvalues().iter().zip(expected) {
            assert!((e - x).abs() < 1e-12, "{e} vs {x}");
        }
    }

    #[test]
    fn spectrum_is_symmetric_and_decomposition_exact() {
        for n in 2..=20 {
            let s = diagonalize_hb(n).unwrap();
            let e = s.eigenvalues();
            for k in 0..n {
                assert!((e[k] + e[n - 1 - k]).abs() < 1e-10, "N={n}");
            }
            assert!(e.windows(2).all(|w| w[0] <= w[1]));
            assert!(s.orthonormality_error() < 1e-10);
            assert!(s.reconstruction_error() < 1e-10);
        }
    }

    #[test]
    fn evolve_b_two_site_closed_form() {
        let spect = diagonalize_hb(2).unwrap();
        let start = ExcitationVector::first_site(2).unwrap();
        let same = evolve_b(&start, 0.0, &spect).unwrap();
        assert!((same.amplitude(1) - c(1.0, 0.0)).norm() < 1e-14);

        let out = evolve_b(&start, FRAC_PI_4, &spect).unwrap();
        assert!(out.amplitude(1).norm() < 1e-12);
        assert!((out.amplitude(2) - c(0.0, -1.0)).norm() < 1e-12);

        let half = evolve_b(&start, FRAC_PI_8, &spect).unwrap();
        assert!((half.target_population() - 0.5).abs() < 1e-12);
        assert!((half.norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn evolve_b_rejects_mismatched_dimension() {
        let spect = diagonalize_hb(3).unwrap();
        let start = ExcitationVector::first_site(4).unwrap();
        assert!(matches!(
            evolve_b(&start, 0.1, &spect),
            Err(Error::DimensionMismatch { expected: 3, actual: 4 })
        ));
    }

    #[test]
    fn evolve_c_phases() {
        let target = ExcitationVector::basis(3, 3).unwrap();
        let flipped = evolve_c(&target, PI);
        assert!((flipped.target_amplitude() - c(-1.0, 0.0)).norm() < 1e-15);
        let twice = evolve_c(&flipped, PI);
        assert!((twice.target_amplitude() - c(1.0, 0.0)).norm() < 1e-15);
        let full = evolve_c(&target, 2.0 * PI);
        assert!((full.target_amplitude() - c(1.0, 0.0)).norm() < 1e-15);

        let mixed = ExcitationVector::from_amplitudes(vec![c(0.6, 0.0), c(0.0, 0.0), c(0.0, 0.8)]).unwrap();
        let out = evolve_c(&mixed, 0.7);
        assert_eq!(out.amplitude(1), mixed.amplitude(1));
        assert_eq!(out.amplitude(2), mixed.amplitude(2));
    }

    #[test]
    fn schedule_basics() {
        let empty = apply_schedule(&Schedule::empty(), 5).unwrap();
        assert_eq!(empty, ExcitationVector::first_site(5).unwrap());
        assert_eq!(fidelity(&Schedule::empty(), 5).unwrap(), 0.0);

        for dc in [0.0, 0.3, 2.0] {
            let s = Schedule::new(vec![(FRAC_PI_4, dc)]).unwrap();
            assert!((fidelity(&s, 2).unwrap() - 1.0).abs() < 1e-12);
        }

        let no_hop = Schedule::new(vec![(0.0, 0.4), (0.0, 1.3), (0.0, 2.2)]).unwrap();
        let out = apply_schedule(&no_hop, 4).unwrap();
        assert!((out.amplitude(1).norm() - 1.0).abs() < 1e-15);
        assert_eq!(fidelity(&no_hop, 4).unwrap(), 0.0);
    }

    #[test]
    fn schedule_validation_and_parsing() {
        assert!(Schedule::new(vec![(-0.1, 0.0)]).is_err());
        assert!(Schedule::new(vec![(f64::NAN, 0.0)]).is_err());
        assert!(Schedule::from_flat(&[0.1, 0.2, 0.3]).is_err());

        let s: Schedule = "0.5;0.25;1;0".parse().unwrap();
        assert_eq!(s.pairs(), &[(0.5, 0.25), (1.0, 0.0)]);
        assert_eq!(s.total_time(), 1.75);
        let back: Schedule = s.to_string().parse().unwrap();
        assert_eq!(back, s);
        assert_eq!("".parse::<Schedule>().unwrap().depth(), 0);
        assert!("0.1;abc".parse::<Schedule>().is_err());
        assert!("0.1".parse::<Schedule>().is_err());
    }

    #[test]
    fn padding_keeps_fidelity() {
        let s = Schedule::new(vec![(0.3, 0.2), (0.7, 1.1)]).unwrap();
        let padded = s.padded(5).unwrap();
        assert_eq!(padded.depth(), 5);
        assert_eq!(padded.total_time(), s.total_time());
        assert_eq!(fidelity(&padded, 4).unwrap(), fidelity(&s, 4).unwrap());
        assert!(s.padded(1).is_err());
    }

    #[test]
    fn gradient_at_stationary_points() {
        for n in 3..8 {
            let zero = Schedule::new(vec![(0.0, 0.0); 3]).unwrap();
            let g = fidelity_gradient(&zero, n).unwrap();
            assert!(g.iter().all(|x| x.abs() < 1e-15), "N={n}: {g:?}");
        }
        let peak = Schedule::new(vec![(FRAC_PI_4, 0.3)]).unwrap();
        let g = fidelity_gradient(&peak, 2).unwrap();
        assert!(g[0].abs() < 1e-12);
    }

    #[test]
    fn cached_decomposition_is_shared() {
        let a = SpectralDecomposition::cached(7).unwrap();
        let b = SpectralDecomposition::cached(7).unwrap();
        assert!(Arc::ptr_eq(&a, &b));
    }
}
