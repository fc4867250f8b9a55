use nnmatch::knn::NeighborIndex;
use nnmatch::rng::stream;
use nnmatch::PointSet;
use proptest::prelude::*;
use rand::Rng;

/// O(nK) scan with the same (distance, index) order.
fn brute_force(points: &PointSet, z: &[f64], k: usize) -> Vec<usize> {
    let mut all: Vec<(f64, usize)> = points
        .iter()
        .enumerate()
        .map(|(i, p)| (p.iter().zip(z).map(|(a, b)| (a - b) * (a - b)).sum(), i))
        .collect();
    all.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    all.truncate(k);
    all.into_iter().map(|(_, i)| i).collect()
}

fn random_points(n: usize, dim: usize, seed: u64) -> PointSet {
    let mut r = stream(seed, 0);
    PointSet::new((0..n * dim).map(|_| r.random::<f64>()).collect(), dim).unwrap()
}

#[test]
fn matches_brute_force_on_ten_thousand_points() {
    let pts = random_points(10_000, 3, 1);
    let index = NeighborIndex::new(&pts);
    assert_eq!(index.len(), 10_000);
    let mut r = stream(2, 0);
    for _ in 0..1000 {
        let z: Vec<f64> = (0..3).map(|_| r.random::<f64>() * 1.2 - 0.1).collect();
        let nb = index.k_nearest(&z, 30).unwrap();
        assert_eq!(nb.indices, brute_force(&pts, &z, 30));
        assert!(nb.distances.windows(2).all(|w| w[0] <= w[1]));
    }
}

#[test]
fn repeated_queries_are_identical() {
    let pts = random_points(500, 2, 3);
    let index = NeighborIndex::new(&pts);
    let a = index.k_nearest(&[0.4, 0.6], 7).unwrap();
    let b = index.k_nearest(&[0.4, 0.6], 7).unwrap();
    assert_eq!(a, b);
}

#[test]
fn lattice_ties_follow_index_order() {
    // integer lattice: many exact distance ties
    let mut rows = Vec::new();
    for i in 0..12 {
        for j in 0..12 {
            rows.push([i as f64, j as f64]);
        }
    }
    let pts = PointSet::from_rows(&rows).unwrap();
    let index = NeighborIndex::new(&pts);
    for z in [[5.5, 5.5], [3.0, 4.0], [0.5, 11.0], [6.0, 6.0]] {
        for k in [1, 4, 5, 9, 13] {
            assert_eq!(index.k_nearest(&z, k).unwrap().indices, brute_force(&pts, &z, k));
        }
    }
}

#[test]
fn monte_carlo_points_are_each_assigned_once() {
    // every query lands in exactly one K-th order cell
    let pts = random_points(300, 2, 4);
    let index = NeighborIndex::new(&pts);
    let mut r = stream(5, 0);
    let mut assigned = 0;
    for _ in 0..2000 {
        let z = [r.random::<f64>(), r.random::<f64>()];
        let nb = index.k_nearest(&z, 4).unwrap();
        let mut s = nb.indices.clone();
        s.sort_unstable();
        s.dedup();
        assert_eq!(s.len(), 4);
        assigned += 1;
    }
    assert_eq!(assigned, 2000);
}

proptest! {
    #[test]
    fn exact_for_arbitrary_clouds(
        dim in 1usize..5,
        n in 1usize..200,
        seed in any::<u64>(),
        k_frac in 0.0f64..1.0,
        grid in any::<bool>(),
    ) {
        let mut r = stream(seed, 0);
        let coords: Vec<f64> = (0..n * dim)
            .map(|_| if grid { (r.random::<f64>() * 4.0).floor() } else { r.random::<f64>() })
            .collect();
        let pts = PointSet::new(coords, dim).unwrap();
        let index = NeighborIndex::new(&pts);
        let k = 1 + ((n - 1) as f64 * k_frac) as usize;
        for _ in 0..5 {
            let z: Vec<f64> = (0..dim).map(|_| r.random::<f64>() * 4.0 - 0.5).collect();
            prop_assert_eq!(index.k_nearest(&z, k).unwrap().indices, brute_force(&pts, &z, k));
        }
    }
}
