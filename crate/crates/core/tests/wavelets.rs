use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use uos_core::bounds::theorem2_bound;
use uos_core::wavelet::{
    blocks, haar_analyze, haar_analyze_2d, haar_synthesize, haar_synthesize_2d, k_measured, parent_child_groups_1d,
    parent_child_groups_2d,
};

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

#[test]
fn round_trip_and_parseval_up_to_16384() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for j in 0..=14u32 {
        let p = 1usize << j;
        let x: Vec<f64> = (0..p).map(|_| rng.random_range(-1.0..1.0)).collect();
        for levels in [0, j as usize / 2, j as usize] {
            let c = haar_analyze(&x, levels).unwrap();
            assert!((norm(&c) - norm(&x)).abs() <= 1e-10 * norm(&x).max(1.0));
            let back = haar_synthesize(&c, levels).unwrap();
            let err = x.iter().zip(&back).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            assert!(err <= 1e-10, "p={p} levels={levels} err {err}");
        }
    }
}

#[test]
fn round_trip_2d() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for (r, c, l) in [(8, 8, 3), (16, 8, 2), (32, 32, 5)] {
        let x: Vec<f64> = (0..r * c).map(|_| rng.random_range(-1.0..1.0)).collect();
        let co = haar_analyze_2d(&x, r, c, l).unwrap();
        assert!((norm(&co) - norm(&x)).abs() <= 1e-10);
        let back = haar_synthesize_2d(&co, r, c, l).unwrap();
        assert!(x.iter().zip(&back).all(|(a, b)| (a - b).abs() <= 1e-10));
    }
}

#[test]
fn group_count_is_p_minus_two() {
    for j in 2..=14u32 {
        let p = 1usize << j;
        let g = parent_child_groups_1d(p, j as usize).unwrap();
        assert_eq!(g.groups.len(), p - 2);
        assert!(g.groups.iter().all(|grp| grp.len() == 2));
        let mut covered = vec![false; p];
        for grp in &g.groups {
            for &i in grp {
                covered[i] = true;
            }
        }
        assert!(!covered[0]);
        assert!(covered[1..].iter().all(|&c| c));
        assert_eq!(g.unpenalized, vec![0]);
    }
    let g = parent_child_groups_1d(2, 1).unwrap();
    assert_eq!(g.groups, vec![vec![1]]);
}

#[test]
fn quadtree_group_counts() {
    // three subbands, each coarser detail paired with four children
    assert_eq!(parent_child_groups_2d(4, 4, 2).unwrap().groups.len(), 12);
    assert_eq!(parent_child_groups_2d(8, 8, 3).unwrap().groups.len(), 60);
    let single = parent_child_groups_2d(4, 4, 1).unwrap();
    assert_eq!(single.groups.len(), 12);
    assert!(single.groups.iter().all(|g| g.len() == 1));
}

#[test]
fn blocks_operating_point() {
    let p = 1024;
    let k = k_measured(&haar_analyze(&blocks(p), 10).unwrap()).unwrap();
    assert!(k > 0 && k < p - 2);
    let n = theorem2_bound(p - 2, k, 2).unwrap().ceil() as usize;
    assert!(n < p, "bound {n} should undercut p");
    // the count quoted for the full-length signal
    assert!((theorem2_bound(16382, 47, 2).unwrap() - 1690.0).abs() <= 10.0);
}
