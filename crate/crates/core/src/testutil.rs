use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::covertree::CoverNets;
use crate::linalg::dist2;
use crate::pointset::PointCloud;

pub fn uniform_cloud(n: usize, dim: usize, seed: u64) -> PointCloud {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let data = (0..n * dim).map(|_| rng.random::<f64>()).collect();
    PointCloud::new(dim, data).unwrap()
}

/// Brute-force nesting, separation and covering over every level.
pub fn check_cover_invariants(points: &PointCloud, nets: &CoverNets) {
    assert_eq!(nets.level(nets.j_min).len(), 1, "single root");
    for j in nets.j_min..=nets.j_max {
        let members = nets.members(j);
        let r = nets.radius(j);
        for (a, &p) in members.iter().enumerate() {
            for &q in &members[a + 1..] {
                assert!(
                    dist2(points.point(p), points.point(q)).sqrt() > r,
                    "separation fails at level {j} for {p},{q}"
                );
            }
        }
        if j < nets.j_max {
            let finer = nets.members(j + 1);
            for p in &members {
                assert!(finer.contains(p), "nesting fails at level {j}");
            }
            for &id in nets.level(j + 1) {
                let node = &nets.nodes[id];
                let parent = &nets.nodes[node.parent.expect("parent")];
                assert_eq!(parent.level, j);
                assert!(
                    dist2(points.point(node.point), points.point(parent.point)).sqrt() <= r,
                    "covering fails at level {j}"
                );
            }
        }
    }
}
