use cohere_core::assoc::{hungarian, CostMatrix};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

mod oracles;
use oracles::{brute_force, is_permutation};

fn random_matrix(rng: &mut ChaCha8Rng, n: usize) -> CostMatrix {
    CostMatrix::new(n, (0..n * n).map(|_| rng.random_range(0.0..10.0)).collect()).unwrap()
}

#[test]
fn matches_exhaustive_search() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for n in 2..=7 {
        for _ in 0..1000 {
            let cost = random_matrix(&mut rng, n);
            let a = hungarian(&cost);
            assert!(is_permutation(&a.row_to_col));
            assert_eq!(a.cost, cost.total(&a.row_to_col));
            assert_eq!(a.cost, brute_force(&cost), "n = {n}");
        }
    }
}

#[test]
fn integer_costs_with_ties() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for n in 1..=6 {
        for _ in 0..300 {
            let data = (0..n * n).map(|_| rng.random_range(0..4) as f64).collect();
            let cost = CostMatrix::new(n, data).unwrap();
            let a = hungarian(&cost);
            assert!(is_permutation(&a.row_to_col));
            assert_eq!(a.cost, brute_force(&cost));
        }
    }
}

#[test]
fn zero_size() {
    let a = hungarian(&CostMatrix::new(0, Vec::new()).unwrap());
    assert!(a.row_to_col.is_empty());
    assert_eq!(a.cost, 0.0);
}

proptest! {
    #[test]
    fn no_cheaper_than_identity_or_shuffles(seed in any::<u64>(), n in 1usize..12) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let cost = random_matrix(&mut rng, n);
        let a = hungarian(&cost);
        prop_assert!(is_permutation(&a.row_to_col));
        let identity: Vec<usize> = (0..n).collect();
        prop_assert!(a.cost <= cost.total(&identity) + 1e-9);
        for _ in 0..20 {
            let mut p = identity.clone();
            for i in (1..n).rev() {
                p.swap(i, rng.random_range(0..=i));
            }
            prop_assert!(a.cost <= cost.total(&p) + 1e-9);
        }
    }

    #[test]
    fn row_shift_moves_cost_by_shift(seed in any::<u64>(), n in 1usize..8, shift in 0.0f64..5.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let cost = random_matrix(&mut rng, n);
        let row = rng.random_range(0..n);
        let shifted: Vec<f64> = (0..n * n).map(|i| cost.get(i / n, i % n) + if i / n == row { shift } else { 0.0 }).collect();
        let a = hungarian(&cost);
        let b = hungarian(&CostMatrix::new(n, shifted).unwrap());
        prop_assert!((b.cost - a.cost - shift).abs() <= 1e-9);
    }
}
