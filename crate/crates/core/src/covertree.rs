//! Leveled cover nets `T_j` with nesting, separation and covering.
//!
//! Level `j` uses radius `r_j = gamma^j`. Construction grows the nets one level
//! at a time: `T_{j+1}` is a maximal `r_{j+1}`-separated superset of `T_j`,
//! built by first-fit insertion in the caller's index order. Maximality is what
//! gives covering at the next level: every point sits within `r_j` of `T_j`.
//!
//! Neighbour searches go through per-node relative lists (nodes of the same
//! level within `c * r_j`, `c = 2 / (1 - gamma)`); the constant makes the lists
//! closed under descent, so each level costs `O(n * |relatives|)`.

use crate::error::{GmraError, Result};
use crate::linalg::dist2;
use crate::pointset::PointCloud;

/// Default ratio between consecutive level radii.
pub const DEFAULT_GAMMA: f64 = 0.5;

/// One net member at one level.
#[derive(Debug, Clone, PartialEq)]
pub struct NetNode {
    /// Index into the source cloud.
    pub point: usize,
    pub level: i32,
    /// Node at `level - 1` covering this one (the same point when it was
    /// already a member there).
    pub parent: Option<usize>,
    pub children: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoverNets {
    pub j_min: i32,
    pub j_max: i32,
    pub gamma: f64,
    pub nodes: Vec<NetNode>,
    /// Node ids per level, `levels[j - j_min]`.
    pub levels: Vec<Vec<usize>>,
    /// Points never promoted because an identical point is already a member:
    /// `(point, point it duplicates)`.
    pub satellites: Vec<(usize, usize)>,
}

impl CoverNets {
    pub fn radius(&self, level: i32) -> f64 {
        self.gamma.powi(level)
    }

    pub fn root(&self) -> usize {
        0
    }

    pub fn level(&self, level: i32) -> &[usize] {
        &self.levels[(level - self.j_min) as usize]
    }

    pub fn level_count(&self) -> usize {
        self.levels.len()
    }

    /// Member point indices at a level.
    pub fn members(&self, level: i32) -> Vec<usize> {
        self.level(level).iter().map(|&n| self.nodes[n].point).collect()
    }

    /// Multiplier on `gamma^j` for the bound on how far any descendant can be
    /// from a level-`j` node: `sum_{i >= j} gamma^i`.
    pub fn descendant_factor(&self) -> f64 {
        1.0 / (1.0 - self.gamma)
    }

    /// Exact nearest member of every level to `x`, coarse to fine. Ties go to
    /// the smaller point index. Returns `(node, distance)` per level.
    pub fn nearest_per_level(&self, points: &PointCloud, x: &[f64]) -> Vec<(usize, f64)> {
        let mut out = Vec::with_capacity(self.levels.len());
        let root = self.root();
        let mut frontier = vec![(root, dist2(points.point(self.nodes[root].point), x).sqrt())];
        let mut next = Vec::new();
        let desc = self.descendant_factor();
        for j in self.j_min..=self.j_max {
            let &(best, best_d) = frontier
                .iter()
                .min_by(|a, b| {
                    a.1.total_cmp(&b.1)
                        .then(self.nodes[a.0].point.cmp(&self.nodes[b.0].point))
                })
                .expect("frontier never empty");
            out.push((best, best_d));
            if j == self.j_max {
                break;
            }
            // Any descendant of a node at level j lies within desc * r_j of it,
            // and the level-j optimum stays a member below, so nodes farther
            // than best_d + desc * r_j cannot lead to a finer optimum.
            let keep = best_d + desc * self.radius(j) * (1.0 + 1e-12);
            next.clear();
            for &(node, d) in &frontier {
                if d > keep {
                    continue;
                }
                for &c in &self.nodes[node].children {
                    let dc = if self.nodes[c].point == self.nodes[node].point {
                        d
                    } else {
                        dist2(points.point(self.nodes[c].point), x).sqrt()
                    };
                    next.push((c, dc));
                }
            }
            std::mem::swap(&mut frontier, &mut next);
        }
        out
    }
}

/// Builds nets over `points[indices]`. The root is `indices[0]`; `j_min` is the
/// largest level whose radius reaches every point from the root. At most
/// `max_levels` levels are added below `j_min`; construction stops earlier
/// once every distinct point is a member.
pub fn build_cover_nets(points: &PointCloud, indices: &[usize], max_levels: usize, gamma: f64) -> Result<CoverNets> {
    if indices.is_empty() {
        return Err(GmraError::InsufficientData("cover nets need at least one point".into()));
    }
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(GmraError::InvalidArgument(format!(
            "radius ratio {gamma} outside (0,1)"
        )));
    }
    let root_point = indices[0];
    let root_x = points.point(root_point);
    let max_dist = indices
        .iter()
        .map(|&i| dist2(points.point(i), root_x))
        .fold(0.0, f64::max)
        .sqrt();
    let mut j_min = if max_dist > 0.0 {
        (max_dist.ln() / gamma.ln()).floor() as i32
    } else {
        0
    };
    while gamma.powi(j_min) < max_dist {
        j_min -= 1;
    }

    let rel_factor = 2.0 / (1.0 - gamma) * (1.0 + 1e-9);
    let mut nodes = vec![NetNode {
        point: root_point,
        level: j_min,
        parent: None,
        children: Vec::new(),
    }];
    let mut levels = vec![vec![0usize]];
    // relatives of nodes at the current level, indexed by node id
    let mut relatives: Vec<Vec<usize>> = vec![vec![0]];
    // non-members with their current cover node and squared distance to it
    let mut pending: Vec<(usize, usize, f64)> = indices[1..]
        .iter()
        .map(|&q| (q, 0usize, dist2(points.point(q), root_x)))
        .collect();

    let mut j = j_min;
    while pending.iter().any(|p| p.2 > 0.0) && ((j - j_min) as usize) < max_levels {
        let r = gamma.powi(j);
        let r_next = gamma.powi(j + 1);
        let r_next2 = r_next * r_next;
        let parent_reach2 = (r + r_next) * (r + r_next) * (1.0 + 1e-12);

        // every member persists one level down
        let first_new = nodes.len();
        let current = levels.last().unwrap().clone();
        let mut next_level = Vec::with_capacity(current.len() * 2);
        for &u in &current {
            let id = nodes.len();
            nodes.push(NetNode {
                point: nodes[u].point,
                level: j + 1,
                parent: Some(u),
                children: Vec::new(),
            });
            nodes[u].children.push(id);
            next_level.push(id);
        }

        // first-fit promotion
        let mut still_pending = Vec::with_capacity(pending.len());
        for &(q, cover, _) in &pending {
            let xq = points.point(q);
            let mut covered = false;
            'search: for &rel in &relatives[cover] {
                if dist2(xq, points.point(nodes[rel].point)) > parent_reach2 {
                    continue;
                }
                for &w in &nodes[rel].children {
                    if dist2(xq, points.point(nodes[w].point)) <= r_next2 {
                        covered = true;
                        break 'search;
                    }
                }
            }
            if covered {
                still_pending.push((q, cover, 0.0));
            } else {
                let id = nodes.len();
                nodes.push(NetNode {
                    point: q,
                    level: j + 1,
                    parent: Some(cover),
                    children: Vec::new(),
                });
                nodes[cover].children.push(id);
                next_level.push(id);
            }
        }

        // relatives at the new level
        let mut next_relatives: Vec<Vec<usize>> = vec![Vec::new(); nodes.len()];
        let rel_r2 = (rel_factor * r_next).powi(2);
        for &w in &next_level {
            let u = nodes[w].parent.unwrap();
            let xw = points.point(nodes[w].point);
            let mut rel = Vec::new();
            for &ru in &relatives[u] {
                for &c in &nodes[ru].children {
                    if dist2(xw, points.point(nodes[c].point)) <= rel_r2 {
                        rel.push(c);
                    }
                }
            }
            next_relatives[w] = rel;
        }

        // nearest cover at the new level
        for entry in still_pending.iter_mut() {
            let (q, cover, _) = *entry;
            let xq = points.point(q);
            let mut best = (usize::MAX, f64::INFINITY, usize::MAX);
            for &rel in &relatives[cover] {
                if dist2(xq, points.point(nodes[rel].point)) > parent_reach2 {
                    continue;
                }
                for &w in &nodes[rel].children {
                    let p = nodes[w].point;
                    let d = dist2(xq, points.point(p));
                    if d < best.1 || (d == best.1 && p < best.2) {
                        best = (w, d, p);
                    }
                }
            }
            debug_assert!(best.1 <= r_next2 * (1.0 + 1e-9));
            *entry = (q, best.0, best.1);
        }

        debug_assert!(next_level.iter().all(|&w| w >= first_new));
        relatives = next_relatives;
        pending = still_pending;
        levels.push(next_level);
        j += 1;
    }

    let satellites = pending
        .iter()
        .filter(|p| p.2 == 0.0)
        .map(|&(q, cover, _)| (q, nodes[cover].point))
        .collect();

    Ok(CoverNets {
        j_min,
        j_max: j,
        gamma,
        nodes,
        levels,
        satellites,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testutil::{check_cover_invariants, uniform_cloud};

    #[test]
    fn singleton() {
        let pts = PointCloud::from_rows(&[vec![0.3, 0.7]]).unwrap();
        let nets = build_cover_nets(&pts, &[0], 10, 0.5).unwrap();
        assert_eq!(nets.j_min, nets.j_max);
        assert_eq!(nets.members(nets.j_min), vec![0]);
    }

    #[test]
    fn two_points_at_unit_distance() {
        let pts = PointCloud::from_rows(&[vec![0.0, 0.0], vec![1.0, 0.0]]).unwrap();
        let nets = build_cover_nets(&pts, &[0, 1], 10, 0.5).unwrap();
        assert_eq!(nets.j_min, 0);
        assert_eq!(nets.members(0), vec![0]);
        for j in 1..=nets.j_max {
            assert_eq!(nets.members(j), vec![0, 1]);
        }
        assert_eq!(nets.j_max, 1);
        check_cover_invariants(&pts, &nets);
    }

    #[test]
    fn uniform_square_invariants() {
        let pts = uniform_cloud(64, 2, 4);
        let idx: Vec<usize> = (0..64).collect();
        let nets = build_cover_nets(&pts, &idx, 30, 0.5).unwrap();
        check_cover_invariants(&pts, &nets);
        // full depth: every point ends up a member
        assert_eq!(nets.level(nets.j_max).len(), 64);
    }

    #[test]
    fn duplicates_become_satellites() {
        let pts = PointCloud::from_rows(&[vec![0.0], vec![1.0], vec![1.0], vec![0.5]]).unwrap();
        let nets = build_cover_nets(&pts, &[0, 1, 2, 3], 20, 0.5).unwrap();
        assert_eq!(nets.satellites, vec![(2, 1)]);
        assert!(!nets.members(nets.j_max).contains(&2));
        check_cover_invariants(&pts, &nets);
    }

    #[test]
    fn level_cap_is_respected() {
        let pts = uniform_cloud(200, 3, 8);
        let idx: Vec<usize> = (0..200).collect();
        let nets = build_cover_nets(&pts, &idx, 3, 0.5).unwrap();
        assert_eq!(nets.j_max, nets.j_min + 3);
        check_cover_invariants(&pts, &nets);
    }

    #[test]
    fn other_radius_ratio() {
        let pts = uniform_cloud(150, 2, 12);
        let idx: Vec<usize> = (0..150).collect();
        let nets = build_cover_nets(&pts, &idx, 60, 0.9).unwrap();
        check_cover_invariants(&pts, &nets);
    }

    #[test]
    fn deterministic() {
        let pts = uniform_cloud(300, 3, 1);
        let idx: Vec<usize> = (0..300).rev().collect();
        let a = build_cover_nets(&pts, &idx, 40, 0.5).unwrap();
        let b = build_cover_nets(&pts, &idx, 40, 0.5).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.nodes[0].point, 299);
    }

    #[test]
    fn nearest_per_level_matches_brute_force() {
        let pts = uniform_cloud(400, 3, 2);
        let idx: Vec<usize> = (0..400).collect();
        let nets = build_cover_nets(&pts, &idx, 40, 0.5).unwrap();
        let queries = uniform_cloud(50, 3, 3);
        for x in queries.iter() {
            let got = nets.nearest_per_level(&pts, x);
            for (lvl, j) in (nets.j_min..=nets.j_max).enumerate() {
                let best = nets
                    .level(j)
                    .iter()
                    .map(|&n| dist2(pts.point(nets.nodes[n].point), x).sqrt())
                    .fold(f64::INFINITY, f64::min);
                assert!((got[lvl].1 - best).abs() < 1e-12);
            }
        }
    }
}
