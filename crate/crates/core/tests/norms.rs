use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use uos_core::geometry::{atomic_norm, dist_to_normal_cone, dual_norm, sample_any_atom};
use uos_core::{GroupStructure, SubspaceModel};

fn disjoint() -> (GroupStructure, SubspaceModel) {
    let g = GroupStructure::contiguous(6, 3);
    let m = SubspaceModel::from_groups(&g).unwrap();
    (g, m)
}

fn overlapping() -> SubspaceModel {
    // chain of groups of 3 sharing one coordinate with each neighbour
    let groups = (0..5).map(|i| vec![2 * i, 2 * i + 1, 2 * i + 2]).collect();
    SubspaceModel::from_groups(&GroupStructure::new(11, groups).unwrap()).unwrap()
}

fn rotated() -> SubspaceModel {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let bases: Vec<DMatrix<f64>> = (0..4)
        .map(|_| DMatrix::from_fn(5, 2, |_, _| rng.random_range(-1.0..1.0)))
        .collect();
    SubspaceModel::orthonormalize(&bases).unwrap()
}

fn vec_of(len: usize) -> impl Strategy<Value = DVector<f64>> {
    prop::collection::vec(-3.0f64..3.0, len).prop_map(DVector::from_vec)
}

fn group_norm_sum(x: &DVector<f64>, g: &GroupStructure) -> f64 {
    let mut total = 0.0;
    for grp in &g.groups {
        let mut s = 0.0;
        for &i in grp {
            s += x[i] * x[i];
        }
        total += s.sqrt();
    }
    total
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn disjoint_norm_is_sum_of_group_norms(x in vec_of(18)) {
        let (g, m) = disjoint();
        let a = atomic_norm(&x, &m).unwrap();
        prop_assert!((a.value - group_norm_sum(&x, &g)).abs() <= 1e-8);
    }

    #[test]
    fn duality_pairing_overlapping(x in vec_of(11), z in vec_of(11)) {
        let m = overlapping();
        let a = atomic_norm(&x, &m).unwrap().value;
        prop_assert!(x.dot(&z) <= a * dual_norm(&z, &m) + 1e-6);
    }

    #[test]
    fn duality_pairing_rotated(x in vec_of(5), z in vec_of(5)) {
        let m = rotated();
        let a = atomic_norm(&x, &m).unwrap().value;
        prop_assert!(x.dot(&z) <= a * dual_norm(&z, &m) + 1e-6);
    }

    #[test]
    fn homogeneity(x in vec_of(11), c in -4.0f64..4.0) {
        let m = overlapping();
        let a = atomic_norm(&x, &m).unwrap().value;
        let ac = atomic_norm(&(&x * c), &m).unwrap().value;
        prop_assert!((ac - c.abs() * a).abs() <= 1e-6 * (1.0 + a * c.abs()));
    }

    #[test]
    fn triangle(x in vec_of(11), y in vec_of(11)) {
        let m = overlapping();
        let nx = atomic_norm(&x, &m).unwrap().value;
        let ny = atomic_norm(&y, &m).unwrap().value;
        let nxy = atomic_norm(&(&x + &y), &m).unwrap().value;
        prop_assert!(nxy <= nx + ny + 1e-6);
    }

    #[test]
    fn cone_witness_invariants(w in vec_of(18), active in prop::sample::subsequence((0..6usize).collect::<Vec<_>>(), 1..4)) {
        let (g, _) = disjoint();
        let mut x = DVector::zeros(18);
        for &a in &active {
            for (k, &i) in g.groups[a].iter().enumerate() {
                x[i] = 1.0 + k as f64;
            }
        }
        let (d, pt) = dist_to_normal_cone(&w, &x, &g).unwrap();
        let z = DVector::from_vec(pt.vector.clone());
        prop_assert!((d - (&w - &z).norm()).abs() <= 1e-9);
        for (gi, grp) in g.groups.iter().enumerate() {
            let zn = grp.iter().map(|&i| z[i] * z[i]).sum::<f64>().sqrt();
            if active.contains(&gi) {
                let xn = grp.iter().map(|&i| x[i] * x[i]).sum::<f64>().sqrt();
                for &i in grp {
                    prop_assert!((z[i] - pt.gamma * x[i] / xn).abs() <= 1e-9);
                }
            } else {
                prop_assert!(zn <= pt.gamma + 1e-9);
            }
        }
    }

    #[test]
    fn valid_cone_points_have_zero_distance(gamma in 0.0f64..3.0, shrink in prop::collection::vec(0.0f64..1.0, 6)) {
        let (g, _) = disjoint();
        let mut x = DVector::zeros(18);
        x[0] = 1.0;
        x[1] = -2.0;
        x[9] = 0.5;
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut w = DVector::zeros(18);
        for (gi, grp) in g.groups.iter().enumerate() {
            let xn = grp.iter().map(|&i| x[i] * x[i]).sum::<f64>().sqrt();
            if xn > 0.0 {
                for &i in grp {
                    w[i] = gamma * x[i] / xn;
                }
            } else {
                let dir: Vec<f64> = grp.iter().map(|_| rng.random_range(-1.0..1.0)).collect();
                let n = dir.iter().map(|v| v * v).sum::<f64>().sqrt();
                for (k, &i) in grp.iter().enumerate() {
                    w[i] = gamma * shrink[gi] * dir[k] / n;
                }
            }
        }
        let (d, _) = dist_to_normal_cone(&w, &x, &g).unwrap();
        prop_assert!(d <= 1e-8, "distance {d}");
    }
}

#[test]
fn atoms_have_unit_norm_and_dual_at_most_one() {
    let m = rotated();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for _ in 0..50 {
        let a = sample_any_atom(&m, &mut rng);
        let n = atomic_norm(&a, &m).unwrap().value;
        assert!(n <= 1.0 + 1e-6, "atom norm {n}");
        assert!(dual_norm(&a, &m) <= 1.0 + 1e-12);
    }
}
