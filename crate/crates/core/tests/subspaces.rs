use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use uos_core::{GroupStructure, SubspaceModel, SupportSet};

fn random_model(p: usize, dims: &[usize], seed: u64) -> SubspaceModel {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let bases: Vec<DMatrix<f64>> = dims
        .iter()
        .map(|&d| DMatrix::from_fn(p, d, |_, _| rng.random_range(-1.0..1.0)))
        .collect();
    SubspaceModel::orthonormalize(&bases).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn column_subset_interlaces(seed in 0u64..1000, mask in prop::collection::vec(any::<bool>(), 6)) {
        // 6 planes spanning R^12: dropping any of them keeps D <= p
        let m = random_model(12, &[2; 6], seed);
        let active: Vec<usize> = (0..6).filter(|&i| mask[i]).collect();
        prop_assume!(!active.is_empty());
        let s = SupportSet::new(active, 6).unwrap();
        prop_assert!(m.sigma_min(Some(&s)).unwrap() >= m.sigma_min(None).unwrap() - 1e-12);
    }

    #[test]
    fn disjoint_groups_have_unit_constants(sizes in prop::collection::vec(1usize..5, 1..8)) {
        let mut groups = Vec::new();
        let mut c = 0;
        for s in sizes {
            groups.push((c..c + s).collect::<Vec<_>>());
            c += s;
        }
        let m = SubspaceModel::from_groups(&GroupStructure::new(c, groups).unwrap()).unwrap();
        prop_assert_eq!(m.sigma_min(None).unwrap(), 1.0);
        prop_assert_eq!(m.condition_number().unwrap(), 1.0);
    }

    #[test]
    fn condition_number_at_least_one(seed in 0u64..1000) {
        let m = random_model(6, &[1, 2, 3, 2], seed);
        prop_assert!(m.condition_number().unwrap() >= 1.0);
    }
}

#[test]
fn singular_values_match_dense_svd() {
    let groups = vec![vec![0, 1, 2], vec![2, 3], vec![3, 4, 5], vec![0, 5]];
    let m = SubspaceModel::from_groups(&GroupStructure::new(6, groups).unwrap()).unwrap();
    let k = m.concatenation(None);
    let mut dense: Vec<f64> = k.svd(false, false).singular_values.iter().copied().collect();
    dense.sort_by(|a, b| b.total_cmp(a));
    let fast = m.singular_values(None);
    assert_eq!(fast.len(), dense.len());
    for (a, b) in fast.iter().zip(&dense) {
        assert!((a - b).abs() < 1e-12);
    }
}
