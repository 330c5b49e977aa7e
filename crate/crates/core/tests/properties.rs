//! Property tests over randomized states and spectra.

use num_complex::Complex64;
use proptest::collection::vec;
use proptest::prelude::*;

use qudit_teleport::channel::{decompose_channel, nu_family, SchmidtSpectrum};
use qudit_teleport::discrimination::optimal_failure;
use qudit_teleport::fidelity::{f0, f1, f2};
use qudit_teleport::qudit::{
    apply, clock_z, enumerate_branches, fourier, measure, root_of_unity, shift_x, StateVector,
};
use qudit_teleport::teleport::{enumerate_runs, CorrectionStrategy};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn arb_state(dims: Vec<usize>) -> impl Strategy<Value = StateVector> {
    let total: usize = dims.iter().product();
    vec((-1.0f64..1.0, -1.0f64..1.0), total)
        .prop_filter_map("norm too small", move |parts| {
            let amps: Vec<Complex64> = parts
                .iter()
                .map(|&(re, im)| Complex64::new(re, im))
                .collect();
            let norm: f64 = amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
            if norm < 1e-3 {
                return None;
            }
            let amps: Vec<Complex64> = amps.into_iter().map(|a| a / norm).collect();
            Some(StateVector::new(dims.clone(), amps).expect("normalized"))
        })
}

fn arb_spectrum(d: usize) -> impl Strategy<Value = SchmidtSpectrum> {
    vec(0.05f64..1.0, d)
        .prop_map(|coeffs| SchmidtSpectrum::new_renormalized(coeffs).expect("positive entries"))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn branch_probabilities_sum_to_one(
        state in arb_state(vec![2, 3, 2]),
        target in 0usize..3,
    ) {
        let branches = enumerate_branches(&state, target, None).unwrap();
        let total: f64 = branches.iter().map(|b| b.probability).sum();
        prop_assert!((total - 1.0).abs() <= 1e-10);
        for b in &branches {
            if b.probability > 1e-12 {
                prop_assert!((b.post_state.norm() - 1.0).abs() <= 1e-10);
            }
        }
    }

    #[test]
    fn sampled_measurement_matches_enumeration(
        state in arb_state(vec![3, 4]),
        target in 0usize..2,
        seed in 0u64..1_000,
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let record = measure(&state, target, None, &mut rng).unwrap();
        let branches = enumerate_branches(&state, target, None).unwrap();
        let matching = &branches[record.outcome];
        prop_assert!((record.probability - matching.probability).abs() <= 1e-12);
    }

    #[test]
    fn unitaries_preserve_norm(
        state in arb_state(vec![3, 3]),
        x_pow in 0usize..3,
        z_pow in 0usize..3,
        target in 0usize..2,
    ) {
        let op = shift_x(3).unwrap().pow(x_pow)
            .matmul(&clock_z(3).unwrap().pow(z_pow))
            .matmul(&fourier(3).unwrap());
        let out = apply(&op, &state, &[target]).unwrap();
        prop_assert!((out.norm() - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn gram_closed_form_and_circulant(s in (2usize..=6).prop_flat_map(arb_spectrum)) {
        let d = s.d();
        let fam = nu_family(&s);
        for n in 0..d {
            prop_assert!((fam.gram.entry(n, n) - Complex64::new(1.0, 0.0)).norm() <= 1e-12);
            for m in 0..d {
                let closed: Complex64 = s
                    .coeffs()
                    .iter()
                    .enumerate()
                    .map(|(k, &a)| root_of_unity((k as i64) * (m as i64 - n as i64), d) * (a * a))
                    .sum();
                prop_assert!((fam.gram.entry(n, m) - closed).norm() <= 1e-12);
                let shift = (m + d - n) % d;
                prop_assert!((fam.gram.entry(n, m) - fam.gram.entry(0, shift)).norm() <= 1e-12);
            }
        }
    }

    #[test]
    fn decomposition_rebuilds_spectrum(s in (2usize..=6).prop_flat_map(arb_spectrum)) {
        let d = s.d() as f64;
        let dec = decompose_channel(&s).unwrap();
        match dec.residual {
            None => prop_assert!((dec.weight_success - 1.0).abs() <= 1e-12),
            Some(r) => {
                let sum_sq: f64 = r.iter().map(|x| x * x).sum();
                prop_assert!((sum_sq - 1.0).abs() <= 1e-10);
                for (m, &a) in s.coeffs().iter().enumerate() {
                    let rebuilt = dec.weight_success / d + (1.0 - dec.weight_success) * r[m] * r[m];
                    prop_assert!((rebuilt - a * a).abs() <= 1e-12);
                }
            }
        }
    }

    #[test]
    fn closed_forms_are_ordered(s in (2usize..=6).prop_flat_map(arb_spectrum)) {
        let v0 = f0(&s).unwrap();
        let v1 = f1(&s).unwrap();
        let v2 = f2(&s).unwrap();
        prop_assert!(v0 <= v1 + 1e-12);
        prop_assert!(v1 <= v2 + 1e-12);
        prop_assert!((0.0..=1.0 + 1e-12).contains(&v2));
        let failure = optimal_failure(&s).unwrap();
        prop_assert!((0.0..=1.0).contains(&failure));
    }
}

proptest! {
    // Full protocol enumeration is heavier; fewer cases.
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn protocol_branches_are_exhaustive(
        s in (2usize..=4).prop_flat_map(arb_spectrum),
        psi_seed in 0u64..1_000,
    ) {
        let d = s.d();
        let mut rng = ChaCha8Rng::seed_from_u64(psi_seed);
        let psi = qudit_teleport::qudit::haar_state(d, &mut rng);
        for strategy in CorrectionStrategy::ALL {
            let runs = enumerate_runs(&s, &psi, strategy).unwrap();
            prop_assert_eq!(runs.len(), 2 * d * d);
            let total: f64 = runs.iter().map(|r| r.probability).sum();
            prop_assert!((total - 1.0).abs() <= 1e-10);
            for run in runs.iter().filter(|r| r.branch.is_conclusive()) {
                prop_assert!((run.fidelity - 1.0).abs() <= 1e-10);
            }
        }
    }
}
