//! Multiscale cell decomposition built on cover nets.
//!
//! Every net node `(j, a_{j,k})` becomes a cell `C_{j,k}` centred at its net
//! point. Two constructions are available:
//!
//! * [`CellMode::Simple`]: finest cells are Voronoi regions of the finest net
//!   intersected with balls of radius `gamma^{j_max}`; a coarser cell is the
//!   union of its cover-tree children. A point outside every finest ball is
//!   placed at the deepest scale `j` whose nearest net member lies within
//!   `gamma^j`.
//! * [`CellMode::Strict`]: cells follow the set recursion "Voronoi among the
//!   parent's net members, grown by quarter-radius balls around finer net
//!   points". A net point `b` first appearing at level `l(b)` owns the capture
//!   ball `B(b, gamma^{l(b)}/4)`; while descending, a point inside capture
//!   balls follows the coarsest one (smallest level, then smallest index)
//!   whose owner lies below the current cell, and otherwise takes the nearest
//!   child centre. Points in no capture ball are outside the covered set.
//!   Locating a point is linear in the number of net points, so this mode is
//!   meant for small clouds.

use serde::{Deserialize, Serialize};

use crate::covertree::CoverNets;
use crate::error::{GmraError, Result};
use crate::linalg::dist2;
use crate::pca::CellSummary;
use crate::pointset::PointCloud;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CellMode {
    Simple,
    Strict,
}

impl std::str::FromStr for CellMode {
    type Err = GmraError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "simple" => Ok(CellMode::Simple),
            "strict" => Ok(CellMode::Strict),
            other => Err(GmraError::InvalidArgument(format!("unknown cell mode {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Cell {
    pub scale: i32,
    /// Position among the cells of its scale.
    pub index: usize,
    /// Index of the net point in the construction cloud.
    pub center_point: usize,
    /// Row of the net point in [`MultiscaleTree::anchors`].
    pub anchor: usize,
    pub parent: Option<usize>,
    pub children: Vec<usize>,
    /// Indices (into the assigned cloud) of the points in this cell.
    pub members: Vec<u32>,
}

#[derive(Debug, Clone)]
pub struct MultiscaleTree {
    pub j_min: i32,
    pub j_max: i32,
    pub gamma: f64,
    pub mode: CellMode,
    pub cells: Vec<Cell>,
    /// Cell ids per scale, `scales[j - j_min][k]`.
    pub scales: Vec<Vec<usize>>,
    /// Coordinates of the distinct net points, ordered by cloud index.
    pub anchors: PointCloud,
    /// Coarsest level of each anchor and its cell there.
    pub anchor_first: Vec<(i32, usize)>,
    /// Cover nets re-indexed onto `anchors`.
    nets: CoverNets,
    /// Cells retained by the data-master truncation.
    pub in_master: Vec<bool>,
    pub is_data_master_tree: bool,
    /// Points of the last assignment that fell outside the root cell.
    pub outliers: Vec<usize>,
    /// Deepest cell of every assigned point, in assignment order.
    pub assignment: Vec<(usize, Option<usize>)>,
}

impl MultiscaleTree {
    pub fn root(&self) -> usize {
        0
    }

    pub fn cell(&self, id: usize) -> &Cell {
        &self.cells[id]
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn radius(&self, scale: i32) -> f64 {
        self.gamma.powi(scale)
    }

    pub fn scale(&self, j: i32) -> &[usize] {
        if j < self.j_min || j > self.j_max {
            return &[];
        }
        &self.scales[(j - self.j_min) as usize]
    }

    pub fn cell_id(&self, scale: i32, index: usize) -> Option<usize> {
        self.scale(scale).get(index).copied()
    }

    pub fn center(&self, id: usize) -> &[f64] {
        self.anchors.point(self.cells[id].anchor)
    }

    /// Children kept by the data-master truncation.
    pub fn master_children(&self, id: usize) -> impl Iterator<Item = usize> + '_ {
        self.cells[id].children.iter().copied().filter(|&c| self.in_master[c])
    }

    pub fn is_master_leaf(&self, id: usize) -> bool {
        self.in_master[id] && self.master_children(id).next().is_none()
    }

    /// Root-to-cell path of cell ids.
    pub fn path(&self, id: usize) -> Vec<usize> {
        let mut path = vec![id];
        let mut cur = id;
        while let Some(p) = self.cells[cur].parent {
            path.push(p);
            cur = p;
        }
        path.reverse();
        path
    }

    /// Deepest master-tree cell on the root path of `id`.
    pub fn clamp_to_master(&self, id: usize) -> usize {
        let mut cur = id;
        while !self.in_master[cur] {
            cur = self.cells[cur].parent.expect("root is always in the master tree");
        }
        cur
    }

    /// Deepest cell containing `x`, or `None` when `x` lies outside the root
    /// cell.
    pub fn locate(&self, x: &[f64]) -> Option<usize> {
        match self.mode {
            CellMode::Simple => self.locate_simple(x),
            CellMode::Strict => self.locate_strict(x, self.j_max),
        }
    }

    /// Deepest master-tree cell containing `x`, falling back to the root for
    /// points outside the root cell.
    pub fn locate_master(&self, x: &[f64]) -> usize {
        self.locate(x).map(|c| self.clamp_to_master(c)).unwrap_or(self.root())
    }

    fn locate_simple(&self, x: &[f64]) -> Option<usize> {
        let per_level = self.nets.nearest_per_level(&self.anchors, x);
        per_level
            .iter()
            .enumerate()
            .rev()
            .find(|(lvl, (_, d))| *d <= self.radius(self.j_min + *lvl as i32))
            .map(|(_, (node, _))| *node)
    }

    /// Capture balls containing `x` among anchors first appearing at levels up
    /// to `max_level`, as (deepest level whose ball holds `x`, anchor) sorted
    /// by (first level, anchor). An anchor's ball shrinks as it persists to
    /// finer levels.
    fn capture_balls(&self, x: &[f64], max_level: i32) -> Vec<(i32, usize)> {
        let mut balls: Vec<(i32, i32, usize)> = Vec::new();
        for (a, &(first, _)) in self.anchor_first.iter().enumerate() {
            if first > max_level {
                continue;
            }
            let d2 = dist2(self.anchors.point(a), x);
            let quarter = |l: i32| self.radius(l) / 4.0;
            if d2 > quarter(first) * quarter(first) {
                continue;
            }
            let mut deepest = first;
            while deepest < self.j_max && d2 <= quarter(deepest + 1) * quarter(deepest + 1) {
                deepest += 1;
            }
            balls.push((first, deepest, a));
        }
        balls.sort();
        balls.into_iter().map(|(_, deepest, a)| (deepest, a)).collect()
    }

    /// Cell of anchor `a` at `scale`, following its own chain below its first
    /// level and its ancestors above.
    fn anchor_cell_at(&self, a: usize, scale: i32) -> usize {
        let (first, mut cell) = self.anchor_first[a];
        if scale <= first {
            for _ in scale..first {
                cell = self.cells[cell].parent.expect("ancestor exists");
            }
        } else {
            for _ in first..scale {
                cell = *self.cells[cell]
                    .children
                    .iter()
                    .find(|&&c| self.cells[c].anchor == a)
                    .expect("net points persist to finer levels");
            }
        }
        cell
    }

    fn locate_strict(&self, x: &[f64], max_scale: i32) -> Option<usize> {
        let balls = self.capture_balls(x, max_scale);
        if balls.is_empty() {
            return None;
        }
        Some(self.strict_descend(x, &balls, max_scale))
    }

    /// Top-down descent: a capture ball wins, otherwise the nearest child.
    fn strict_descend(&self, x: &[f64], balls: &[(i32, usize)], max_scale: i32) -> usize {
        let mut cur = self.root();
        for scale in self.j_min + 1..=max_scale {
            let children = &self.cells[cur].children;
            if children.is_empty() {
                break;
            }
            let captured = balls
                .iter()
                .filter(|(lvl, _)| *lvl >= scale)
                .find(|(_, a)| self.anchor_cell_at(*a, scale - 1) == cur)
                .map(|&(_, a)| self.anchor_cell_at(a, scale));
            cur = match captured {
                Some(c) => c,
                None => self.nearest_child(children, x),
            };
        }
        cur
    }

    /// Scale `j - 1` parent for anchor `a` first appearing at scale `j`. Every
    /// anchor within `r_j / 2` of `a` will route through `a`'s chain, so the
    /// chain must pass each coarser capture ball holding one of them. Between
    /// those, it follows the deepest such ball, then the net parent, then the
    /// chain of the nearest scale `j - 1` cell below.
    fn place_anchor(&self, a: usize, j: i32, net_parent: usize) -> usize {
        let x = self.anchors.point(a);
        let reach = REACH * self.radius(j);
        let levels = (j - self.j_min) as usize;
        let mut need: Vec<Option<usize>> = vec![None; levels];
        // nearer anchors win when two balls disagree
        let mut near: Vec<(f64, usize)> = (0..self.anchors.len())
            .map(|y| (dist2(self.anchors.point(y), x), y))
            .filter(|&(d, _)| d <= reach * reach)
            .collect();
        near.sort_by(|p, q| p.0.total_cmp(&q.0));
        for (_, y) in near {
            for (deepest, c) in self.capture_balls(self.anchors.point(y), j - 1) {
                let first = self.anchor_first[c].0;
                for t in first..=deepest.min(j - 1) {
                    need[(t - self.j_min) as usize].get_or_insert(c);
                }
            }
        }
        let mut cur = self.root();
        let mut fallback = None;
        for scale in self.j_min + 1..j {
            if self.cells[cur].children.is_empty() {
                break;
            }
            let on_chain = |c: usize| self.anchor_cell_at(c, scale - 1) == cur;
            let guide = need[(scale - self.j_min) as usize..]
                .iter()
                .rev()
                .flatten()
                .copied()
                .find(|&c| on_chain(c))
                .or(Some(net_parent).filter(|&p| on_chain(p)))
                .or(fallback.filter(|&f| on_chain(f)));
            let g = match guide {
                Some(g) => g,
                None => {
                    let f = self.nearest_below(cur, j - 1, x);
                    fallback = Some(f);
                    f
                }
            };
            cur = self.anchor_cell_at(g, scale);
        }
        cur
    }

    /// Anchor of the scale-`scale` cell under `cell` nearest to `x`.
    fn nearest_below(&self, cell: usize, scale: i32, x: &[f64]) -> usize {
        let mut best = (f64::INFINITY, self.cells[cell].anchor);
        let mut stack = vec![cell];
        while let Some(c) = stack.pop() {
            let cc = &self.cells[c];
            if cc.scale == scale || cc.children.is_empty() {
                let d = dist2(self.center(c), x);
                if d < best.0 {
                    best = (d, cc.anchor);
                }
            } else {
                stack.extend(&cc.children);
            }
        }
        best.1
    }

    fn nearest_child(&self, children: &[usize], x: &[f64]) -> usize {
        *children
            .iter()
            .min_by(|&&a, &&b| {
                let da = dist2(self.center(a), x);
                let db = dist2(self.center(b), x);
                da.total_cmp(&db)
                    .then(self.cells[a].center_point.cmp(&self.cells[b].center_point))
            })
            .expect("children nonempty")
    }

    /// Assigns `points[indices]` to cells, replacing any earlier assignment.
    /// Every point joins its deepest cell and all of that cell's ancestors;
    /// points outside the root cell are recorded in `outliers`.
    pub fn assign_points(&mut self, points: &PointCloud, indices: &[usize]) {
        for c in self.cells.iter_mut() {
            c.members.clear();
        }
        self.outliers.clear();
        self.assignment.clear();
        self.is_data_master_tree = false;
        self.in_master.iter_mut().for_each(|m| *m = true);
        // locate in a cache friendly order, record in the caller's order
        let mut leaves = vec![None; indices.len()];
        for pos in crate::pointset::locality_order(points, indices) {
            leaves[pos] = self.locate(points.point(indices[pos]));
        }
        for (&i, leaf) in indices.iter().zip(leaves) {
            self.assignment.push((i, leaf));
            match leaf {
                Some(mut c) => loop {
                    self.cells[c].members.push(i as u32);
                    match self.cells[c].parent {
                        Some(p) => c = p,
                        None => break,
                    }
                },
                None => self.outliers.push(i),
            }
        }
    }

    /// Replays a stored assignment, rebuilding member lists and outliers
    /// exactly as [`Self::assign_points`] left them.
    pub fn restore_assignment(&mut self, assignment: Vec<(usize, Option<usize>)>) -> Result<()> {
        for c in self.cells.iter_mut() {
            c.members.clear();
        }
        self.outliers.clear();
        for &(i, leaf) in &assignment {
            match leaf {
                Some(mut c) => {
                    if c >= self.cells.len() {
                        return Err(GmraError::Format(format!("assignment names missing cell {c}")));
                    }
                    loop {
                        self.cells[c].members.push(i as u32);
                        match self.cells[c].parent {
                            Some(p) => c = p,
                            None => break,
                        }
                    }
                }
                None => self.outliers.push(i),
            }
        }
        self.assignment = assignment;
        Ok(())
    }

    /// Keeps the largest proper subtree whose leaves each hold at least `d`
    /// members: a cell survives iff some cell in its subtree has `>= d`
    /// members. Fails when the root itself holds fewer than `d`.
    pub fn truncate_to_data_master(&mut self, d: usize) -> Result<()> {
        if self.cells[self.root()].members.len() < d {
            return Err(GmraError::InsufficientData(format!(
                "root cell holds {} points, need at least {d}",
                self.cells[self.root()].members.len()
            )));
        }
        self.in_master = largest_valid_subtree(
            &self.cells.iter().map(|c| c.parent).collect::<Vec<_>>(),
            &self.cells.iter().map(|c| c.members.len()).collect::<Vec<_>>(),
            d,
        );
        self.is_data_master_tree = true;
        Ok(())
    }

    pub fn master_cells(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.cells.len()).filter(|&c| self.in_master[c])
    }

    /// Cover nets the tree was built from, indexed onto `anchors`.
    pub fn nets(&self) -> &CoverNets {
        &self.nets
    }

    /// Reassembles a tree from its persisted parts.
    #[allow(clippy::too_many_arguments)]
    pub fn from_parts(
        mode: CellMode,
        nets: CoverNets,
        anchors: PointCloud,
        center_points: Vec<usize>,
        parents: Vec<Option<usize>>,
        in_master: Vec<bool>,
        is_data_master_tree: bool,
    ) -> Result<Self> {
        if parents.len() != nets.nodes.len() || center_points.len() != anchors.len() {
            return Err(GmraError::Format("tree sections disagree in size".into()));
        }
        let mut tree = skeleton(&nets, anchors, center_points, mode)?;
        for c in tree.cells.iter_mut() {
            c.children.clear();
        }
        for (id, p) in parents.iter().enumerate() {
            tree.cells[id].parent = *p;
            if let Some(p) = p {
                tree.cells[*p].children.push(id);
            }
        }
        tree.in_master = in_master;
        tree.is_data_master_tree = is_data_master_tree;
        Ok(tree)
    }
}

/// `in[c]` is true iff some cell in the subtree of `c` has `count >= d`.
/// Parents must precede children in the ordering of `parents`.
pub fn largest_valid_subtree(parents: &[Option<usize>], counts: &[usize], d: usize) -> Vec<bool> {
    let mut keep: Vec<bool> = counts.iter().map(|&c| c >= d).collect();
    for id in (0..parents.len()).rev() {
        if keep[id] {
            if let Some(p) = parents[id] {
                keep[p] = true;
            }
        }
    }
    keep
}

/// Re-indexes the nets onto the distinct net points and creates one cell per
/// node with cover-tree parent links.
fn skeleton(
    nets: &CoverNets,
    anchors: PointCloud,
    center_points: Vec<usize>,
    mode: CellMode,
) -> Result<MultiscaleTree> {
    let mut scales = vec![Vec::new(); nets.levels.len()];
    let mut cells = Vec::with_capacity(nets.nodes.len());
    let mut anchor_first: Vec<Option<(i32, usize)>> = vec![None; anchors.len()];
    for (id, node) in nets.nodes.iter().enumerate() {
        let lvl = (node.level - nets.j_min) as usize;
        if node.point >= anchors.len() {
            return Err(GmraError::Format("net node refers to a missing anchor".into()));
        }
        let slot = &mut anchor_first[node.point];
        if slot.is_none() {
            *slot = Some((node.level, id));
        }
        cells.push(Cell {
            scale: node.level,
            index: scales[lvl].len(),
            center_point: center_points[node.point],
            anchor: node.point,
            parent: node.parent,
            children: node.children.clone(),
            members: Vec::new(),
        });
        scales[lvl].push(id);
    }
    let anchor_first = anchor_first
        .into_iter()
        .map(|f| f.ok_or_else(|| GmraError::Format("anchor not used by any net node".into())))
        .collect::<Result<Vec<_>>>()?;
    let n = cells.len();
    Ok(MultiscaleTree {
        j_min: nets.j_min,
        j_max: nets.j_max,
        gamma: nets.gamma,
        mode,
        cells,
        scales,
        anchors,
        anchor_first,
        nets: nets.clone(),
        in_master: vec![true; n],
        is_data_master_tree: false,
        outliers: Vec::new(),
        assignment: Vec::new(),
    })
}

/// Copies the net points into a standalone anchor cloud (ascending cloud
/// index) and remaps the nets onto it.
fn anchor_nets(points: &PointCloud, nets: &CoverNets) -> Result<(CoverNets, PointCloud, Vec<usize>)> {
    let mut distinct: Vec<usize> = nets.nodes.iter().map(|n| n.point).collect();
    distinct.sort_unstable();
    distinct.dedup();
    let anchors = points.select(&distinct)?;
    let mut remapped = nets.clone();
    for node in remapped.nodes.iter_mut() {
        node.point = distinct
            .binary_search(&node.point)
            .expect("distinct contains every node point");
    }
    remapped.satellites.clear();
    Ok((remapped, anchors, distinct))
}

/// Cells per the simpler Voronoi-in-ball construction.
pub fn build_cells_simple(points: &PointCloud, nets: &CoverNets) -> Result<MultiscaleTree> {
    let (nets, anchors, centers) = anchor_nets(points, nets)?;
    skeleton(&nets, anchors, centers, CellMode::Simple)
}

/// Neighbourhood, in units of `r_j`, whose capture balls constrain where a
/// new scale-`j` anchor is placed.
const REACH: f64 = 0.5;

/// Cells from capture balls of radius `r_j / 4`. A net point first appearing
/// at level `j` is placed under a scale-`(j-1)` cell chosen so that nearby
/// net points keep every coarser capture, and stays close to its anchors.
/// Points are then located top-down: a capture ball wins, else the nearest
/// child. Quadratic in the number of net points.
pub fn build_cells_strict(points: &PointCloud, nets: &CoverNets) -> Result<MultiscaleTree> {
    let (nets, anchors, centers) = anchor_nets(points, nets)?;
    let mut tree = skeleton(&nets, anchors, centers, CellMode::Strict)?;
    for c in tree.cells.iter_mut() {
        c.children.clear();
        if c.scale > tree.j_min {
            c.parent = None;
        }
    }
    for j in tree.j_min + 1..=tree.j_max {
        let ids = tree.scales[(j - tree.j_min) as usize].clone();
        for id in ids {
            let anchor = tree.cells[id].anchor;
            let net_parent = nets.nodes[id].parent.expect("non-root node has a parent");
            let parent = if nets.nodes[net_parent].point == anchor {
                net_parent
            } else {
                tree.place_anchor(anchor, j, tree.cells[net_parent].anchor)
            };
            tree.cells[id].parent = Some(parent);
            tree.cells[parent].children.push(id);
        }
    }
    Ok(tree)
}

/// Per-scale empirical versions of the tree regularity constants.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScaleAxioms {
    pub j: i32,
    /// Largest member distance to the cell mean over `gamma^j`.
    pub theta2_max: f64,
    pub theta3_mean: f64,
    pub theta3_std: f64,
    pub theta3_min: f64,
    pub theta4_mean: f64,
    pub theta4_std: f64,
    pub theta4_max: f64,
    pub cell_count: usize,
    /// Cells skipped for holding at most `d` members (their `lambda_d` is 0).
    pub skipped: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GlobalAxioms {
    pub theta3_min: f64,
    pub theta4_max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AxiomReport {
    pub per_scale: Vec<ScaleAxioms>,
    pub global: GlobalAxioms,
}

impl AxiomReport {
    /// Scales whose `theta4_max` exceeds `limit`, e.g. cells without a
    /// spectral gap.
    pub fn gapless_scales(&self, limit: f64) -> Vec<i32> {
        self.per_scale
            .iter()
            .filter(|s| s.theta4_max > limit)
            .map(|s| s.j)
            .collect()
    }
}

/// Diagnostics over master-tree cells: `theta3 = d * lambda_d * gamma^{-2j}`,
/// `theta4 = lambda_{d+1} / lambda_d`, `theta2 = max ||x - c|| / gamma^j`.
/// `summaries` is indexed by cell id.
pub fn axiom_report(
    tree: &MultiscaleTree,
    points: &PointCloud,
    summaries: &[Option<CellSummary>],
    d: usize,
) -> AxiomReport {
    let mut per_scale = Vec::new();
    for j in tree.j_min..=tree.j_max {
        let r = tree.radius(j);
        let mut t2 = 0.0f64;
        let mut t3 = Vec::new();
        let mut t4 = Vec::new();
        let mut count = 0;
        let mut skipped = 0;
        for &id in tree.scale(j) {
            if !tree.in_master[id] {
                continue;
            }
            let Some(s) = summaries[id].as_ref() else { continue };
            count += 1;
            if s.count <= d {
                skipped += 1;
                continue;
            }
            for &m in &tree.cells[id].members {
                t2 = t2.max(dist2(points.point(m as usize), &s.center).sqrt() / r);
            }
            let lam = |i: usize| s.eigenvalues.get(i).copied().unwrap_or(0.0);
            let ld = lam(d - 1);
            t3.push(d as f64 * ld / (r * r));
            if ld > 0.0 {
                t4.push(lam(d) / ld);
            } else {
                t4.push(if lam(d) > 0.0 { f64::INFINITY } else { 0.0 });
            }
        }
        let (m3, s3) = mean_std(&t3);
        let (m4, s4) = mean_std(&t4);
        per_scale.push(ScaleAxioms {
            j,
            theta2_max: t2,
            theta3_mean: m3,
            theta3_std: s3,
            theta3_min: t3.iter().copied().fold(f64::INFINITY, f64::min),
            theta4_mean: m4,
            theta4_std: s4,
            theta4_max: t4.iter().copied().fold(0.0, f64::max),
            cell_count: count,
            skipped,
        });
    }
    let global = GlobalAxioms {
        theta3_min: per_scale.iter().map(|s| s.theta3_min).fold(f64::INFINITY, f64::min),
        theta4_max: per_scale.iter().map(|s| s.theta4_max).fold(0.0, f64::max),
    };
    AxiomReport { per_scale, global }
}

fn mean_std(v: &[f64]) -> (f64, f64) {
    if v.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::covertree::build_cover_nets;
    use crate::testutil::uniform_cloud;

    fn simple_tree(pts: &PointCloud) -> MultiscaleTree {
        let idx: Vec<usize> = (0..pts.len()).collect();
        let nets = build_cover_nets(pts, &idx, 40, 0.5).unwrap();
        build_cells_simple(pts, &nets).unwrap()
    }

    #[test]
    fn singleton_chain() {
        let pts = PointCloud::from_rows(&[vec![1.0, 2.0]]).unwrap();
        for strict in [false, true] {
            let nets = build_cover_nets(&pts, &[0], 5, 0.5).unwrap();
            let mut tree = if strict {
                build_cells_strict(&pts, &nets).unwrap()
            } else {
                build_cells_simple(&pts, &nets).unwrap()
            };
            tree.assign_points(&pts, &[0]);
            assert!(tree.cells.iter().all(|c| c.members == vec![0]));
        }
    }

    #[test]
    fn two_points_split_at_quarter_radius() {
        let pts = PointCloud::from_rows(&[vec![0.0, 0.0], vec![1.0, 0.0]]).unwrap();
        let idx = [0, 1];
        let nets = build_cover_nets(&pts, &idx, 2, 0.5).unwrap();
        for mut tree in [
            build_cells_simple(&pts, &nets).unwrap(),
            build_cells_strict(&pts, &nets).unwrap(),
        ] {
            tree.assign_points(&pts, &idx);
            for &c in tree.scale(2) {
                assert_eq!(tree.cells[c].members.len(), 1);
                assert_eq!(tree.cells[c].members[0] as usize, tree.cells[c].center_point);
            }
        }
    }

    #[test]
    fn voronoi_tie_goes_to_smaller_index() {
        // members at x = -1, 0 (root) and 1; query 0.5 is equidistant from 0 and 1
        let pts = PointCloud::from_rows(&[vec![0.0], vec![1.0], vec![-1.0]]).unwrap();
        let nets = build_cover_nets(&pts, &[0, 1, 2], 40, 0.5).unwrap();
        let tree = build_cells_simple(&pts, &nets).unwrap();
        let leaf = tree.locate(&[0.5]).unwrap();
        assert_eq!(tree.cells[leaf].center_point, 0);
        let leaf = tree.locate(&[-0.5]).unwrap();
        assert_eq!(tree.cells[leaf].center_point, 0);
    }

    #[test]
    fn self_assignment_lands_on_own_center() {
        let pts = uniform_cloud(300, 2, 7);
        let mut tree = simple_tree(&pts);
        let idx: Vec<usize> = (0..300).collect();
        tree.assign_points(&pts, &idx);
        assert!(tree.outliers.is_empty());
        for &(i, leaf) in &tree.assignment {
            let leaf = leaf.unwrap();
            assert_eq!(tree.cells[leaf].center_point, i);
            assert_eq!(tree.cells[leaf].scale, tree.j_max);
        }
    }

    #[test]
    fn empty_assignment() {
        let pts = uniform_cloud(50, 2, 1);
        let mut tree = simple_tree(&pts);
        tree.assign_points(&pts, &[]);
        assert!(tree.cells.iter().all(|c| c.members.is_empty()));
    }

    #[test]
    fn per_scale_partition() {
        let pts = uniform_cloud(2000, 3, 5);
        let construction: Vec<usize> = (0..1000).collect();
        let stats: Vec<usize> = (1000..2000).collect();
        let nets = build_cover_nets(&pts, &construction, 40, 0.5).unwrap();
        let mut tree = build_cells_simple(&pts, &nets).unwrap();
        tree.assign_points(&pts, &stats);
        for j in tree.j_min..=tree.j_max {
            let mut seen = std::collections::HashSet::new();
            for &c in tree.scale(j) {
                for &m in &tree.cells[c].members {
                    assert!(seen.insert(m), "point {m} twice at scale {j}");
                }
            }
        }
        // children refine parents
        for c in &tree.cells {
            let parent: std::collections::HashSet<_> = c.members.iter().collect();
            for &ch in &c.children {
                assert!(tree.cells[ch].members.iter().all(|m| parent.contains(m)));
            }
        }
        let root_count = tree.cells[0].members.len();
        assert_eq!(root_count + tree.outliers.len(), 1000);
    }

    #[test]
    fn truncation_rules() {
        // root(10) -> a(6) -> {a1(4), a2(2)}, root -> b(4)
        let parents = [None, Some(0), Some(0), Some(1), Some(1)];
        let counts = [10, 6, 4, 4, 2];
        let keep = largest_valid_subtree(&parents, &counts, 3);
        assert_eq!(keep, vec![true, true, true, true, false]);
        let keep = largest_valid_subtree(&parents, &counts, 5);
        assert_eq!(keep, vec![true, true, false, false, false]);
        // all rich: unchanged
        assert!(largest_valid_subtree(&parents, &counts, 2).iter().all(|&k| k));
    }

    #[test]
    fn truncation_is_idempotent_and_rejects_sparse_root() {
        let pts = uniform_cloud(400, 2, 3);
        let mut tree = simple_tree(&pts.select(&(0..200).collect::<Vec<_>>()).unwrap());
        tree.assign_points(&pts, &(200..400).collect::<Vec<_>>());
        tree.truncate_to_data_master(2).unwrap();
        let first = tree.in_master.clone();
        tree.truncate_to_data_master(2).unwrap();
        assert_eq!(first, tree.in_master);
        assert!(tree.is_data_master_tree);
        assert!(tree.truncate_to_data_master(10_000).is_err());
    }
}
