use approx::assert_abs_diff_eq;
use proptest::prelude::*;

use xyqaoa::experiments::{fit_quadratic, parse_range};
use xyqaoa::optimizer::project_onto_simplex;
use xyqaoa::spectral::{grover_ansatz_fidelity, partition_sum_fidelity};
use xyqaoa::subspace::{apply_schedule, full_hilbert_oracle, ChainPropagator};
use xyqaoa::Schedule;

fn schedule(max_depth: usize) -> impl Strategy<Value = Schedule> {
    prop::collection::vec((0.0..3.0f64, 0.0..3.0f64), 1..=max_depth).prop_map(|p| Schedule::new(p).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn evolution_preserves_norm(s in schedule(6), n in 2usize..30) {
        let psi = apply_schedule(&s, n).unwrap();
        assert_abs_diff_eq!(psi.norm(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn fidelity_is_a_probability(s in schedule(6), n in 2usize..30) {
        let f = ChainPropagator::for_sites(n).unwrap().fidelity_flat(&s.to_flat());
        prop_assert!((-1e-14..=1.0 + 1e-12).contains(&f));
    }

    #[test]
    fn subspace_agrees_with_full_hilbert_space(s in schedule(4), n in 2usize..8) {
        let sub = ChainPropagator::for_sites(n).unwrap().fidelity_flat(&s.to_flat());
        let full = full_hilbert_oracle(&s, n).unwrap();
        assert_abs_diff_eq!(sub, full, epsilon = 1e-10);
    }

    #[test]
    fn gradient_matches_central_differences(s in schedule(4), n in 2usize..12) {
        let prop = ChainPropagator::for_sites(n).unwrap();
        let x = s.to_flat();
        let (_, g) = prop.fidelity_and_gradient(&x);
        let h = 1e-6;
        for k in 0..x.len() {
            let (mut up, mut dn) = (x.clone(), x.clone());
            up[k] += h;
            dn[k] -= h;
            let fd = (prop.fidelity_flat(&up) - prop.fidelity_flat(&dn)) / (2.0 * h);
            assert_abs_diff_eq!(g[k], fd, epsilon = 1e-6);
        }
    }

    #[test]
    fn zero_padding_does_not_change_fidelity(s in schedule(4), n in 2usize..12, extra in 1usize..4) {
        let prop = ChainPropagator::for_sites(n).unwrap();
        let padded = s.padded(s.depth() + extra).unwrap();
        assert_abs_diff_eq!(prop.fidelity_flat(&s.to_flat()), prop.fidelity_flat(&padded.to_flat()), epsilon = 1e-13);
    }

    #[test]
    fn partition_sum_equals_ansatz(n in 3usize..20, p in 1usize..12, delta in 0.01..0.5f64) {
        let a = grover_ansatz_fidelity(n, p, delta).unwrap();
        let b = partition_sum_fidelity(n, p, delta).unwrap();
        assert_abs_diff_eq!(a, b, epsilon = 1e-9);
    }

    #[test]
    fn simplex_projection_is_feasible(x in prop::collection::vec(-5.0..5.0f64, 1..20), total in 0.1..10.0f64) {
        let mut y = x.clone();
        project_onto_simplex(&mut y, total);
        prop_assert!(y.iter().all(|&v| v >= 0.0));
        assert_abs_diff_eq!(y.iter().sum::<f64>(), total, epsilon = 1e-9 * total.max(1.0));
    }

    #[test]
    fn quadratic_fit_recovers_exact_coefficients(a in -2.0..2.0f64, b in -2.0..2.0f64, c in -2.0..2.0f64) {
        let pts: Vec<(f64, f64)> = (0..8).map(|i| { let x = i as f64; (x, a * x * x + b * x + c) }).collect();
        let r = fit_quadratic(&pts).unwrap();
        for (got, want) in r.params.iter().zip([a, b, c]) {
            assert_abs_diff_eq!(*got, want, epsilon = 1e-8);
        }
    }

    #[test]
    fn ranges_hit_their_endpoint(start in 0u32..50, step in 1u32..10, count in 0u32..30) {
        let (a, s) = (start as f64 * 0.25, step as f64 * 0.25);
        let end = a + s * count as f64;
        let xs = parse_range(&format!("{a}:{s}:{end}")).unwrap();
        prop_assert_eq!(xs.len(), count as usize + 1);
        assert_abs_diff_eq!(*xs.last().unwrap(), end, epsilon = 1e-12);
    }
}

#[test]
fn time_reversal_returns_to_site_one() {
    // undo each pair in reverse order with negated durations
    let s = Schedule::from_flat(&[0.3, 0.8, 1.1, 0.2, 0.5, 0.4]).unwrap();
    let prop = ChainPropagator::for_sites(7).unwrap();
    let forward = prop.apply(&s);
    let mut psi = forward.into_amplitudes();
    let spect = prop.spectral();
    for &(db, dc) in s.pairs().iter().rev() {
        let v = xyqaoa::ExcitationVector::from_amplitudes(psi).unwrap();
        let v = xyqaoa::subspace::evolve_c(&v, -dc);
        let v = xyqaoa::subspace::evolve_b(&v, -db, spect).unwrap();
        psi = v.into_amplitudes();
    }
    assert_abs_diff_eq!(psi[0].norm_sqr(), 1.0, epsilon = 1e-12);
}
