//! Property tests for the protocol's algebraic invariants.

use num_complex::Complex64;
use proptest::prelude::*;

use rqpsi::game::serfling_bound;
use rqpsi::protocol::{build_database, mask_database, PartyInput};
use rqpsi::statevec::{superposition_register, BitTable, Statevector};

fn bit_set(modulus: usize) -> impl Strategy<Value = Vec<usize>> {
    prop::collection::btree_set(1..modulus, 0..modulus.min(12)).prop_map(|s| s.into_iter().collect())
}

proptest! {
    #[test]
    fn masking_twice_restores_the_database(ones in bit_set(32), r in 0u8..2) {
        let y = PartyInput::new(ones, 32).unwrap();
        let p = build_database(&y);
        let masked = mask_database(&p, r);
        prop_assert_eq!(mask_database(&masked, r), p.clone());
        // Index 0 never carries a mask bit.
        prop_assert_eq!(masked.get(0), 0);
    }

    #[test]
    fn declared_bit_recovers_membership(p_bit in 0u8..2, r in 0u8..2) {
        // p = (p XOR r) XOR r: what Bob declares from an honest q_t is the
        // membership bit itself.
        let q = p_bit ^ r;
        prop_assert_eq!(q ^ r, p_bit);
    }

    #[test]
    fn oracle_is_norm_preserving_involution(
        m in 1usize..=6,
        seed in any::<u64>(),
    ) {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(seed);
        let dim = 1usize << m;
        let ones: Vec<usize> = (1..dim).filter(|_| rng.gen::<bool>()).collect();
        let table = BitTable::from_indices(dim, ones).unwrap();
        let raw: Vec<Complex64> =
            (0..dim).map(|_| Complex64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5)).collect();
        let norm = raw.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        prop_assume!(norm > 1e-6);
        let amps: Vec<Complex64> = raw.into_iter().map(|a| a / norm).collect();
        let state = Statevector::from_amplitudes(m, amps).unwrap();
        let once = state.apply_oracle(&table).unwrap();
        prop_assert!((once.norm_sqr() - 1.0).abs() < 1e-12);
        let twice = once.apply_oracle(&table).unwrap();
        for i in 0..dim {
            prop_assert!((twice.amplitude(i) - state.amplitude(i)).norm() < 1e-12);
        }
    }

    #[test]
    fn reduction_preserves_norm_on_valid_support(
        m in 1usize..=6,
        j_seed in any::<u64>(),
        re0 in -1.0f64..1.0,
        im0 in -1.0f64..1.0,
        rej in -1.0f64..1.0,
        imj in -1.0f64..1.0,
    ) {
        let dim = 1usize << m;
        let j = 1 + (j_seed as usize) % (dim - 1);
        let a0 = Complex64::new(re0, im0);
        let aj = Complex64::new(rej, imj);
        let norm = (a0.norm_sqr() + aj.norm_sqr()).sqrt();
        prop_assume!(norm > 1e-6);
        let mut amps = vec![Complex64::ZERO; dim];
        amps[0] = a0 / norm;
        amps[j] = aj / norm;
        let state = Statevector::from_amplitudes(m, amps).unwrap();
        let reduced = state.reduce_to_plus_minus(j).unwrap();
        prop_assert!((reduced.norm_sqr() - 1.0).abs() < 1e-12);
        let top = 1usize << (m - 1);
        prop_assert!((reduced.amplitude(0) - state.amplitude(0)).norm() < 1e-12);
        prop_assert!((reduced.amplitude(top) - state.amplitude(j)).norm() < 1e-12);
    }

    #[test]
    fn superposition_registers_are_normalized(m in 1usize..=10, j_seed in any::<u64>(), sign in prop::bool::ANY) {
        let dim = 1usize << m;
        let j = 1 + (j_seed as usize) % (dim - 1);
        let state = superposition_register(j, m, if sign { 1 } else { -1 }).unwrap();
        prop_assert!((state.norm_sqr() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn serfling_monotone_in_delta(
        n in 2u64..10_000,
        k_frac in 0.01f64..0.99,
        d1 in 0.001f64..2.0,
        step in 0.001f64..2.0,
    ) {
        let k = ((n as f64 * k_frac) as u64).clamp(1, n - 1);
        let lo = serfling_bound(d1, n, k, 0.0, 1.0).unwrap();
        let hi = serfling_bound(d1 + step, n, k, 0.0, 1.0).unwrap();
        prop_assert!(hi <= lo);
    }

    #[test]
    fn serfling_monotone_in_k(
        n in 3u64..10_000,
        delta in 0.001f64..1.0,
        k1_frac in 0.01f64..0.98,
    ) {
        let k1 = ((n as f64 * k1_frac) as u64).clamp(1, n - 2);
        let lo = serfling_bound(delta, n, k1, 0.0, 1.0).unwrap();
        let hi = serfling_bound(delta, n, k1 + 1, 0.0, 1.0).unwrap();
        prop_assert!(hi <= lo);
    }

    #[test]
    fn serfling_monotone_in_n_at_half_sampling(
        half in 1u64..2_500,
        delta in 0.001f64..1.0,
        growth in 1u64..500,
    ) {
        // Along the k = n/2 regime the bound is exp(-2δ²n) and decreasing.
        let bound = |n: u64| serfling_bound(delta, n, n / 2, 0.0, 1.0).unwrap();
        let n = 2 * half;
        prop_assert!(bound(n + 2 * growth) <= bound(n));
    }
}
