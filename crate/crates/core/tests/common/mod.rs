//! Independent oracles shared by the integration and acceptance tests. Each
//! `check_*` returns a description of the first violation found.

#![allow(dead_code)]

use gmra::adaptive::Partition;
use gmra::linalg::dist2;
use gmra::{CoverNets, GmraModel, MultiscaleTree, PointCloud};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type Check = Result<(), String>;

/// Exact arithmetic up to accumulated rounding.
pub const EXACT: f64 = 1e-10;
/// Iterative eigensolvers against each other.
pub const EIGEN: f64 = 1e-8;

pub fn uniform_cloud(n: usize, dim: usize, seed: u64) -> PointCloud {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    PointCloud::new(dim, (0..n * dim).map(|_| rng.random::<f64>()).collect()).unwrap()
}

pub fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Nesting, separation and covering of every level, by comparing all pairs.
pub fn check_cover_nets(points: &PointCloud, indices: &[usize], nets: &CoverNets) -> Check {
    if nets.level(nets.j_min).len() != 1 {
        return Err("more than one root".into());
    }
    for j in nets.j_min..=nets.j_max {
        let r = nets.radius(j);
        let members = nets.members(j);
        for (a, &p) in members.iter().enumerate() {
            for &q in &members[a + 1..] {
                if dist(points.point(p), points.point(q)) <= r {
                    return Err(format!("level {j}: members {p} and {q} closer than {r}"));
                }
            }
        }
        if j < nets.j_max {
            let finer = nets.members(j + 1);
            if let Some(p) = members.iter().find(|p| !finer.contains(p)) {
                return Err(format!("level {j}: member {p} missing at level {}", j + 1));
            }
        }
        for &i in indices {
            let near = members
                .iter()
                .map(|&m| dist(points.point(i), points.point(m)))
                .fold(f64::INFINITY, f64::min);
            if near > r {
                return Err(format!("level {j}: point {i} at {near} from the net"));
            }
        }
    }
    Ok(())
}

/// Deepest level whose nearest member (ties to the smaller point index) is
/// within the level radius, found by scanning all members.
pub fn simple_leaf(nets: &CoverNets, anchors: &PointCloud, x: &[f64]) -> Option<(i32, usize)> {
    let mut found = None;
    for j in nets.j_min..=nets.j_max {
        let best = nets
            .members(j)
            .into_iter()
            .map(|m| (dist(anchors.point(m), x), m))
            .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)))
            .unwrap();
        if best.0 <= nets.radius(j) {
            found = Some((j, best.1));
        }
    }
    found
}

pub fn check_simple_cells(tree: &MultiscaleTree, points: &PointCloud) -> Check {
    for (i, x) in points.iter().enumerate() {
        let expect = simple_leaf(tree.nets(), &tree.anchors, x);
        let got = tree.locate(x);
        match (expect, got) {
            (None, None) => {}
            (Some((j, m)), Some(c)) => {
                let cell = tree.cell(c);
                if cell.scale != j || tree.anchors.point(m) != tree.center(c) {
                    return Err(format!("point {i}: oracle scale {j}, tree scale {}", cell.scale));
                }
            }
            _ => return Err(format!("point {i}: oracle {expect:?} vs tree {got:?}")),
        }
    }
    Ok(())
}

/// `B(a, r_j / 4) ∩ X ⊆ C ⊆ B(a, 3 r_j)` for every cell of a tree whose
/// members were assigned from `points[indices]`.
pub fn check_cell_radius_bounds(tree: &MultiscaleTree, points: &PointCloud, indices: &[usize]) -> Check {
    for (id, cell) in tree.cells.iter().enumerate() {
        let r = tree.radius(cell.scale);
        let a = tree.center(id);
        for &m in &cell.members {
            let dm = dist(points.point(m as usize), a);
            if dm > 3.0 * r * (1.0 + 1e-12) {
                return Err(format!("cell {id} (scale {}): member {m} at {dm} > 3 r", cell.scale));
            }
        }
        for &i in indices {
            if dist(points.point(i), a) <= r / 4.0 && !cell.members.contains(&(i as u32)) {
                return Err(format!(
                    "cell {id} (scale {}): point {i} inside r/4 but not a member",
                    cell.scale
                ));
            }
        }
    }
    Ok(())
}

/// Every master leaf sees exactly one partition cell on its root path, and
/// partition members add up to the located statistics points.
pub fn check_partition(model: &GmraModel, p: &Partition) -> Check {
    let tree = &model.tree;
    for leaf in tree.master_cells().filter(|&c| tree.is_master_leaf(c)) {
        let mut hits = 0;
        let mut c = Some(leaf);
        while let Some(id) = c {
            if p.contains(id) {
                hits += 1;
            }
            c = tree.cell(id).parent;
        }
        if hits != 1 {
            return Err(format!("master leaf {leaf} covered {hits} times"));
        }
    }
    // a point is served by the partition cell on its path, or by its own
    // cell when it stops above the partition
    let mut served = 0;
    for &(i, leaf) in &tree.assignment {
        let Some(leaf) = leaf else { continue };
        let path = tree.path(tree.clamp_to_master(leaf));
        let hits = path.iter().filter(|&&c| p.contains(c)).count();
        match hits {
            1 => served += 1,
            0 if p.subtree[*path.last().unwrap()] => {}
            _ => return Err(format!("point {i} meets {hits} partition cells")),
        }
    }
    let total: usize = p.cells.iter().map(|&c| tree.cell(c).members.len()).sum();
    if total != served {
        return Err(format!("partition holds {total} members, {served} served"));
    }
    Ok(())
}

/// A random rooted tree on `n` nodes with parents preceding children.
pub fn random_tree(n: usize, rng: &mut ChaCha8Rng) -> Vec<Option<usize>> {
    (0..n)
        .map(|i| if i == 0 { None } else { Some(rng.random_range(0..i)) })
        .collect()
}

fn is_proper(parents: &[Option<usize>], set: &[bool]) -> bool {
    set[0] && (1..parents.len()).all(|i| !set[i] || set[parents[i].unwrap()])
}

fn subsets(n: usize) -> impl Iterator<Item = Vec<bool>> {
    (0u32..1 << n).map(move |mask| (0..n).map(|i| mask >> i & 1 == 1).collect())
}

/// Smallest proper subtree containing every qualifying node, by enumeration.
pub fn exhaustive_smallest_subtree(parents: &[Option<usize>], qualifies: &[bool]) -> Vec<bool> {
    subsets(parents.len())
        .filter(|s| is_proper(parents, s) && qualifies.iter().zip(s).all(|(q, s)| !q || *s))
        .min_by_key(|s| s.iter().filter(|&&b| b).count())
        .unwrap()
}

/// Largest proper subtree whose leaves all hold at least `d` points, by
/// enumeration. `None` when the root alone fails.
pub fn exhaustive_largest_valid(parents: &[Option<usize>], counts: &[usize], d: usize) -> Option<Vec<bool>> {
    let n = parents.len();
    subsets(n)
        .filter(|s| is_proper(parents, s))
        .filter(|s| {
            (0..n).filter(|&i| s[i]).all(|i| {
                let leaf = !(0..n).any(|c| s[c] && parents[c] == Some(i));
                !leaf || counts[i] >= d
            })
        })
        .max_by_key(|s| s.iter().filter(|&&b| b).count())
}

/// Symmetric `n x n` eigen-decomposition by cyclic Jacobi rotations. Returns
/// eigenvalues descending and matching unit eigenvectors.
pub fn jacobi_eigen(mut a: Vec<f64>, n: usize) -> (Vec<f64>, Vec<Vec<f64>>) {
    let mut v = vec![0.0; n * n];
    for i in 0..n {
        v[i * n + i] = 1.0;
    }
    for _ in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[i * n + j].powi(2))
            .sum();
        if off < 1e-30 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[p * n + q];
                if apq.abs() < 1e-300 {
                    continue;
                }
                let theta = (a[q * n + q] - a[p * n + p]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[k * n + p];
                    let akq = a[k * n + q];
                    a[k * n + p] = c * akp - s * akq;
                    a[k * n + q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p * n + k];
                    let aqk = a[q * n + k];
                    a[p * n + k] = c * apk - s * aqk;
                    a[q * n + k] = s * apk + c * aqk;
                }
                for k in 0..n {
                    let vkp = v[k * n + p];
                    let vkq = v[k * n + q];
                    v[k * n + p] = c * vkp - s * vkq;
                    v[k * n + q] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[j * n + j].total_cmp(&a[i * n + i]));
    let vals = order.iter().map(|&i| a[i * n + i]).collect();
    let vecs = order.iter().map(|&i| (0..n).map(|k| v[k * n + i]).collect()).collect();
    (vals, vecs)
}

/// Mean and population covariance (row-major) of `points[members]`.
pub fn mean_cov(points: &PointCloud, members: &[u32]) -> (Vec<f64>, Vec<f64>) {
    let dim = points.dim();
    let n = members.len() as f64;
    let mut mean = vec![0.0; dim];
    for &m in members {
        for (a, v) in mean.iter_mut().zip(points.point(m as usize)) {
            *a += v / n;
        }
    }
    let mut cov = vec![0.0; dim * dim];
    for &m in members {
        let x = points.point(m as usize);
        for a in 0..dim {
            for b in 0..dim {
                cov[a * dim + b] += (x[a] - mean[a]) * (x[b] - mean[b]) / n;
            }
        }
    }
    (mean, cov)
}

/// Dense `dim x dim` projector onto the span of column-major `basis`.
pub fn projector_matrix(basis: &[f64], dim: usize) -> Vec<f64> {
    let mut p = vec![0.0; dim * dim];
    for col in basis.chunks_exact(dim) {
        for a in 0..dim {
            for b in 0..dim {
                p[a * dim + b] += col[a] * col[b];
            }
        }
    }
    p
}

pub fn apply_affine(center: &[f64], proj: &[f64], x: &[f64]) -> Vec<f64> {
    let dim = center.len();
    (0..dim)
        .map(|a| center[a] + (0..dim).map(|b| proj[a * dim + b] * (x[b] - center[b])).sum::<f64>())
        .collect()
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Per-cell centers, spectra and principal projectors against the Jacobi
/// oracle, on cells with at most `max_members` members and a spectral gap
/// after `d_eff`.
pub fn check_pca(model: &GmraModel, points: &PointCloud, max_members: usize) -> Result<usize, String> {
    let dim = model.dim;
    let mut checked = 0;
    for c in model.tree.master_cells() {
        let members = &model.tree.cell(c).members;
        if members.len() > max_members {
            continue;
        }
        let s = model.summary(c);
        let (mean, cov) = mean_cov(points, members);
        if max_abs_diff(&mean, &s.center) > EXACT {
            return Err(format!("cell {c}: center differs"));
        }
        let (vals, vecs) = jacobi_eigen(cov, dim);
        let scale = vals[0].abs().max(1e-300);
        for (k, v) in s.eigenvalues.iter().enumerate() {
            if (v - vals[k].max(0.0)).abs() > EIGEN * scale {
                return Err(format!("cell {c}: eigenvalue {k} {v} vs oracle {}", vals[k]));
            }
        }
        if s.d_eff == 0 {
            continue;
        }
        let gap = if s.d_eff < dim {
            vals[s.d_eff - 1] - vals[s.d_eff]
        } else {
            f64::INFINITY
        };
        if gap < 1e-6 * scale {
            continue;
        }
        let oracle: Vec<f64> = vecs[..s.d_eff].iter().flatten().copied().collect();
        let diff = max_abs_diff(&projector_matrix(&oracle, dim), &projector_matrix(&s.basis, dim));
        if diff > 1e-6 {
            return Err(format!("cell {c}: principal projector differs by {diff}"));
        }
        checked += 1;
    }
    Ok(checked)
}

/// Statistics points with the master-tree path they were assigned to, walked
/// up from the recorded leaf through parent links.
pub fn stats_paths(model: &GmraModel) -> Vec<(usize, Vec<usize>)> {
    let tree = &model.tree;
    tree.assignment
        .iter()
        .filter_map(|&(i, leaf)| {
            let mut c = leaf?;
            while !tree.in_master[c] {
                c = tree.cell(c).parent.unwrap();
            }
            let mut path = vec![c];
            while let Some(p) = tree.cell(*path.last().unwrap()).parent {
                path.push(p);
            }
            path.reverse();
            Some((i, path))
        })
        .collect()
}

fn cell_projection(model: &GmraModel, c: usize, x: &[f64]) -> Vec<f64> {
    let s = model.summary(c);
    apply_affine(&s.center, &projector_matrix(&s.basis, model.dim), x)
}

/// Refinement quantities summed directly from their definition.
pub fn check_deltas(model: &GmraModel, points: &PointCloud) -> Check {
    let n = model.tree.len();
    let mut acc = vec![0.0; n];
    let mut inf = vec![0.0f64; n];
    for (i, path) in stats_paths(model) {
        let x = points.point(i);
        for w in path.windows(2) {
            let e = dist2(&cell_projection(model, w[0], x), &cell_projection(model, w[1], x));
            acc[w[0]] += e;
            inf[w[0]] = inf[w[0]].max(e.sqrt());
        }
    }
    for c in model.tree.master_cells() {
        let s = model.summary(c);
        let want = (acc[c] / model.n_stats as f64).sqrt();
        if (s.delta - want).abs() > EXACT * (1.0 + want) || (s.delta_inf - inf[c]).abs() > EXACT * (1.0 + inf[c]) {
            return Err(format!(
                "cell {c}: delta {} vs {want}, inf {} vs {}",
                s.delta, s.delta_inf, inf[c]
            ));
        }
        if model.tree.is_master_leaf(c) && s.delta != 0.0 {
            return Err(format!("leaf {c} has nonzero delta"));
        }
    }
    Ok(())
}

/// Projector onto the span of `cols` (column-major), built from the
/// eigenvectors of their Gram matrix.
pub fn span_projector(cols: &[f64], dim: usize) -> Vec<f64> {
    let k = cols.len() / dim;
    if k == 0 {
        return vec![0.0; dim * dim];
    }
    let mut gram = vec![0.0; k * k];
    for a in 0..k {
        for b in 0..k {
            gram[a * k + b] = (0..dim).map(|i| cols[a * dim + i] * cols[b * dim + i]).sum();
        }
    }
    let (vals, vecs) = jacobi_eigen(gram, k);
    let mut basis = Vec::new();
    for (v, w) in vals.iter().zip(&vecs) {
        if *v <= 1e-14 {
            continue;
        }
        let col: Vec<f64> = (0..dim)
            .map(|i| (0..k).map(|a| w[a] * cols[a * dim + i]).sum::<f64>() / v.sqrt())
            .collect();
        basis.extend(col);
    }
    projector_matrix(&basis, dim)
}

/// Orthogonal subspaces against the span of parent subspace plus own
/// principal basis, nesting, and both refinement formulas from scratch.
pub fn check_ortho(model: &GmraModel, points: &PointCloud) -> Check {
    let ortho = model.ortho.as_ref().ok_or("no orthogonal summaries")?;
    let dim = model.dim;
    let tree = &model.tree;
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for c in tree.master_cells() {
        let o = ortho[c].as_ref().ok_or(format!("cell {c} lacks ortho summary"))?;
        let mine = projector_matrix(&o.basis, dim);
        let cols = match tree.cell(c).parent {
            None => model.summary(c).basis.clone(),
            Some(p) => {
                let mut v = ortho[p].as_ref().unwrap().basis.clone();
                v.extend_from_slice(&model.summary(c).basis);
                v
            }
        };
        if o.m == dim.min(model.config.ortho_cap.unwrap_or(dim)) && o.m < cols.len() / dim {
            // capped; span comparison does not apply
        } else {
            let diff = max_abs_diff(&mine, &span_projector(&cols, dim));
            if diff > 1e-6 {
                return Err(format!("cell {c}: ortho span differs from oracle by {diff}"));
            }
        }
        for k in 0..o.m {
            for l in 0..o.m {
                let dot: f64 = (0..dim).map(|i| o.basis[k * dim + i] * o.basis[l * dim + i]).sum();
                if (dot - if k == l { 1.0 } else { 0.0 }).abs() > EXACT {
                    return Err(format!("cell {c}: ortho basis not orthonormal"));
                }
            }
        }
        if let Some(p) = tree.cell(c).parent {
            let parent = projector_matrix(&ortho[p].as_ref().unwrap().basis, dim);
            for _ in 0..5 {
                let v: Vec<f64> = (0..dim).map(|_| rng.random::<f64>() - 0.5).collect();
                let np: f64 = apply_affine(&vec![0.0; dim], &parent, &v)
                    .iter()
                    .map(|x| x * x)
                    .sum::<f64>()
                    .sqrt();
                let nc: f64 = apply_affine(&vec![0.0; dim], &mine, &v)
                    .iter()
                    .map(|x| x * x)
                    .sum::<f64>()
                    .sqrt();
                if np > nc + EXACT {
                    return Err(format!("cell {c}: parent projection {np} exceeds child {nc}"));
                }
            }
        }
    }
    let n = tree.len();
    let mut direct = vec![0.0; n];
    let mut diff = vec![0.0; n];
    let proj = |c: usize, x: &[f64]| {
        apply_affine(
            &model.summary(c).center,
            &projector_matrix(&ortho[c].as_ref().unwrap().basis, dim),
            x,
        )
    };
    for (i, path) in stats_paths(model) {
        let x = points.point(i);
        for w in path.windows(2) {
            let (a, b) = (proj(w[0], x), proj(w[1], x));
            direct[w[0]] += dist2(&a, &b);
            diff[w[0]] += dist2(x, &a) - dist2(x, &b);
        }
    }
    for c in tree.master_cells() {
        let o = ortho[c].as_ref().unwrap();
        let want = (direct[c] / model.n_stats as f64).sqrt();
        if (o.delta_ortho - want).abs() > 1e-8 * (1.0 + want) {
            return Err(format!("cell {c}: orthogonal delta {} vs oracle {want}", o.delta_ortho));
        }
        let tol = 1e-8 * direct[c].max(diff[c].abs()) + 1e-12;
        if (direct[c] - diff[c]).abs() > tol {
            return Err(format!("cell {c}: direct {} vs difference {}", direct[c], diff[c]));
        }
        let (a2, b2) = (o.delta_ortho.powi(2), o.delta_ortho_diff.powi(2));
        if (a2 - b2).abs() > 1e-8 * a2.max(b2) + 1e-14 {
            return Err(format!("cell {c}: stored forms disagree {a2} vs {b2}"));
        }
    }
    Ok(())
}

/// Training residuals never grow down any path under the orthogonal
/// projectors. Returns the fraction of master cells where this holds.
pub fn ortho_monotone_fraction(model: &GmraModel, points: &PointCloud, tol: f64) -> f64 {
    let ortho = model.ortho.as_ref().expect("ortho");
    let tree = &model.tree;
    let mut bad = vec![false; tree.len()];
    for (i, path) in stats_paths(model) {
        let x = points.point(i);
        let res: Vec<f64> = path
            .iter()
            .map(|&c| dist2(x, &ortho[c].as_ref().unwrap().project(&model.summary(c).center, x)).sqrt())
            .collect();
        for (k, w) in res.windows(2).enumerate() {
            if w[1] > w[0] + tol {
                bad[path[k + 1]] = true;
            }
        }
    }
    let cells: Vec<usize> = tree.master_cells().collect();
    cells.iter().filter(|&&c| !bad[c]).count() as f64 / cells.len() as f64
}
