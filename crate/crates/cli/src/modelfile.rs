//! Model files.
//!
//! Layout, little-endian throughout: the magic `GMRAMDL1`, a `u32` format
//! version, then `D: u64`, `d: u64`, `gamma: f64` and a `u32` flag word. After
//! the header come sections, each a 4-byte tag, a `u64` payload length and the
//! payload. Readers skip tags they do not know, so later versions can add
//! sections without breaking older readers.

use gmra::covertree::{CoverNets, NetNode};
use gmra::ortho::OrthoSummary;
use gmra::{CellMode, CellSummary, GmraConfig, GmraModel, MultiscaleTree, PointCloud};

use crate::CliError;

pub const MODEL_MAGIC: &[u8; 8] = b"GMRAMDL1";
pub const MODEL_VERSION: u32 = 1;

const FLAG_STRICT: u32 = 1;
const FLAG_ORTHOGONAL: u32 = 2;
const FLAG_DATA_MASTER: u32 = 4;

const CONFIG: [u8; 4] = *b"CONF";
const STATS: [u8; 4] = *b"STAT";
const NETS: [u8; 4] = *b"NETS";
const ANCHORS: [u8; 4] = *b"ANCH";
const TREE: [u8; 4] = *b"TREE";
const SUMMARIES: [u8; 4] = *b"SUMM";
const ORTHO: [u8; 4] = *b"ORTH";
const ASSIGNMENT: [u8; 4] = *b"ASGN";

#[derive(Default)]
pub(crate) struct Writer {
    pub buf: Vec<u8>,
}

impl Writer {
    pub fn u8(&mut self, v: u8) {
        self.buf.push(v);
    }
    pub fn u16(&mut self, v: u16) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }
    pub fn u32(&mut self, v: u32) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }
    pub fn i32(&mut self, v: i32) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }
    pub fn u64(&mut self, v: u64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }
    pub fn usize(&mut self, v: usize) {
        self.u64(v as u64);
    }
    /// `-1` for `None`.
    pub fn opt(&mut self, v: Option<usize>) {
        self.buf.extend_from_slice(&v.map_or(-1i64, |v| v as i64).to_le_bytes());
    }
    pub fn f64(&mut self, v: f64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }
    pub fn f64s(&mut self, vs: &[f64]) {
        for &v in vs {
            self.f64(v);
        }
    }
    /// Length-prefixed `f64` list.
    pub fn vec(&mut self, vs: &[f64]) {
        self.usize(vs.len());
        self.f64s(vs);
    }
    fn section(&mut self, tag: [u8; 4], body: Writer) {
        self.buf.extend_from_slice(&tag);
        self.u64(body.buf.len() as u64);
        self.buf.extend_from_slice(&body.buf);
    }
}

pub(crate) struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

fn short() -> CliError {
    CliError::Data("file ends early".into())
}

impl<'a> Reader<'a> {
    pub fn new(buf: &'a [u8]) -> Self {
        Reader { buf, pos: 0 }
    }
    pub fn remaining(&self) -> usize {
        self.buf.len() - self.pos
    }
    pub fn bytes(&mut self, n: usize) -> Result<&'a [u8], CliError> {
        if self.remaining() < n {
            return Err(short());
        }
        let out = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }
    fn array<const N: usize>(&mut self) -> Result<[u8; N], CliError> {
        Ok(self.bytes(N)?.try_into().expect("length checked"))
    }
    pub fn u8(&mut self) -> Result<u8, CliError> {
        Ok(self.array::<1>()?[0])
    }
    pub fn u16(&mut self) -> Result<u16, CliError> {
        Ok(u16::from_le_bytes(self.array()?))
    }
    pub fn u32(&mut self) -> Result<u32, CliError> {
        Ok(u32::from_le_bytes(self.array()?))
    }
    pub fn i32(&mut self) -> Result<i32, CliError> {
        Ok(i32::from_le_bytes(self.array()?))
    }
    pub fn u64(&mut self) -> Result<u64, CliError> {
        Ok(u64::from_le_bytes(self.array()?))
    }
    pub fn usize(&mut self) -> Result<usize, CliError> {
        usize::try_from(self.u64()?).map_err(|_| CliError::Data("count does not fit in memory".into()))
    }
    /// A count of items that each take at least `item_bytes` bytes, checked
    /// against what is left so corrupt counts cannot trigger huge allocations.
    pub fn count(&mut self, item_bytes: usize) -> Result<usize, CliError> {
        let n = self.usize()?;
        if n.saturating_mul(item_bytes.max(1)) > self.remaining() {
            return Err(CliError::Data(format!("count {n} exceeds the remaining data")));
        }
        Ok(n)
    }
    pub fn opt(&mut self) -> Result<Option<usize>, CliError> {
        let v = i64::from_le_bytes(self.array()?);
        match v {
            -1 => Ok(None),
            v if v >= 0 => Ok(Some(v as usize)),
            v => Err(CliError::Data(format!("bad index {v}"))),
        }
    }
    pub fn f64(&mut self) -> Result<f64, CliError> {
        Ok(f64::from_le_bytes(self.array()?))
    }
    pub fn f64s(&mut self, n: usize) -> Result<Vec<f64>, CliError> {
        if n.saturating_mul(8) > self.remaining() {
            return Err(short());
        }
        (0..n).map(|_| self.f64()).collect()
    }
    pub fn vec(&mut self) -> Result<Vec<f64>, CliError> {
        let n = self.count(8)?;
        self.f64s(n)
    }
    fn finished(&self, what: &str) -> Result<(), CliError> {
        if self.remaining() != 0 {
            return Err(CliError::Data(format!(
                "{what} section has {} trailing bytes",
                self.remaining()
            )));
        }
        Ok(())
    }
}

/// Serializes a model. Equal models give equal bytes.
pub fn model_to_bytes(model: &GmraModel) -> Vec<u8> {
    let tree = &model.tree;
    let mut w = Writer::default();
    w.buf.extend_from_slice(MODEL_MAGIC);
    w.u32(MODEL_VERSION);
    w.usize(model.dim);
    w.usize(model.config.d);
    w.f64(model.config.gamma);
    let mut flags = 0;
    if model.config.mode == CellMode::Strict {
        flags |= FLAG_STRICT;
    }
    if model.ortho.is_some() {
        flags |= FLAG_ORTHOGONAL;
    }
    if tree.is_data_master_tree {
        flags |= FLAG_DATA_MASTER;
    }
    w.u32(flags);

    let s = Writer {
        buf: serde_json::to_vec(&model.config).expect("config serializes"),
    };
    w.section(CONFIG, s);

    let mut s = Writer::default();
    s.usize(model.n_train);
    s.usize(model.n_stats);
    s.f64(model.outlier_energy);
    w.section(STATS, s);

    w.section(NETS, write_nets(tree.nets()));

    let mut s = Writer::default();
    s.usize(tree.anchors.len());
    s.usize(tree.anchors.dim());
    s.f64s(tree.anchors.as_slice());
    let mut centers = vec![0usize; tree.anchors.len()];
    for c in &tree.cells {
        centers[c.anchor] = c.center_point;
    }
    for c in centers {
        s.usize(c);
    }
    w.section(ANCHORS, s);

    let mut s = Writer::default();
    s.usize(tree.cells.len());
    for (id, c) in tree.cells.iter().enumerate() {
        s.i32(c.scale);
        s.usize(c.index);
        s.opt(c.parent);
        s.u32(c.children.len() as u32);
        for &ch in &c.children {
            s.usize(ch);
        }
        s.usize(c.center_point);
        s.u8(tree.in_master[id] as u8);
    }
    w.section(TREE, s);

    let mut s = Writer::default();
    s.usize(model.summaries.len());
    for summary in &model.summaries {
        match summary {
            None => s.u8(0),
            Some(c) => {
                s.u8(1);
                s.usize(c.count);
                s.vec(&c.center);
                s.vec(&c.eigenvalues);
                s.usize(c.d_eff);
                s.vec(&c.basis);
                s.f64(c.delta);
                s.f64(c.delta_inf);
                s.f64(c.delta_ortho);
                s.f64(c.stay_energy);
            }
        }
    }
    w.section(SUMMARIES, s);

    if let Some(ortho) = &model.ortho {
        let mut s = Writer::default();
        s.usize(ortho.len());
        for o in ortho {
            match o {
                None => s.u8(0),
                Some(o) => {
                    s.u8(1);
                    s.usize(o.m);
                    s.vec(&o.basis);
                    s.f64(o.delta_ortho);
                    s.f64(o.delta_ortho_diff);
                    s.f64(o.energy);
                    s.f64(o.stay_energy);
                }
            }
        }
        w.section(ORTHO, s);
    }

    let mut s = Writer::default();
    s.usize(tree.assignment.len());
    for &(i, leaf) in &tree.assignment {
        s.usize(i);
        s.opt(leaf);
    }
    w.section(ASSIGNMENT, s);
    w.buf
}

fn write_nets(nets: &CoverNets) -> Writer {
    let mut s = Writer::default();
    s.i32(nets.j_min);
    s.i32(nets.j_max);
    s.f64(nets.gamma);
    s.usize(nets.nodes.len());
    for node in &nets.nodes {
        s.usize(node.point);
        s.i32(node.level);
        s.opt(node.parent);
        s.u32(node.children.len() as u32);
        for &c in &node.children {
            s.usize(c);
        }
    }
    s.usize(nets.levels.len());
    for level in &nets.levels {
        s.usize(level.len());
        for &id in level {
            s.usize(id);
        }
    }
    s.usize(nets.satellites.len());
    for &(p, q) in &nets.satellites {
        s.usize(p);
        s.usize(q);
    }
    s
}

fn read_nets(r: &mut Reader) -> Result<CoverNets, CliError> {
    let j_min = r.i32()?;
    let j_max = r.i32()?;
    let gamma = r.f64()?;
    let n = r.count(24)?;
    let mut nodes = Vec::with_capacity(n);
    for _ in 0..n {
        let point = r.usize()?;
        let level = r.i32()?;
        let parent = r.opt()?;
        let k = r.u32()? as usize;
        let children = (0..k).map(|_| r.usize()).collect::<Result<Vec<_>, _>>()?;
        nodes.push(NetNode {
            point,
            level,
            parent,
            children,
        });
    }
    let levels_n = r.count(8)?;
    let mut levels = Vec::with_capacity(levels_n);
    for _ in 0..levels_n {
        let k = r.count(8)?;
        levels.push((0..k).map(|_| r.usize()).collect::<Result<Vec<_>, _>>()?);
    }
    let sat_n = r.count(16)?;
    let satellites = (0..sat_n)
        .map(|_| Ok((r.usize()?, r.usize()?)))
        .collect::<Result<Vec<_>, CliError>>()?;
    if j_max < j_min || levels.len() != (j_max - j_min + 1) as usize {
        return Err(CliError::Data("net levels disagree with the scale range".into()));
    }
    for (id, node) in nodes.iter().enumerate() {
        let bad_parent = node.parent.is_some_and(|p| p >= id);
        if bad_parent || node.children.iter().any(|&c| c >= n || c <= id) || node.level < j_min || node.level > j_max {
            return Err(CliError::Data(format!("net node {id} is inconsistent")));
        }
    }
    if levels.iter().flatten().any(|&id| id >= n) {
        return Err(CliError::Data("net level names a missing node".into()));
    }
    Ok(CoverNets {
        j_min,
        j_max,
        gamma,
        nodes,
        levels,
        satellites,
    })
}

fn read_summary(r: &mut Reader, dim: usize) -> Result<CellSummary, CliError> {
    let count = r.usize()?;
    let center = r.vec()?;
    let eigenvalues = r.vec()?;
    let d_eff = r.usize()?;
    let basis = r.vec()?;
    if center.len() != dim || basis.len() != dim.saturating_mul(d_eff) {
        return Err(CliError::Data("cell summary has the wrong shape".into()));
    }
    Ok(CellSummary {
        count,
        center,
        eigenvalues,
        basis,
        d_eff,
        delta: r.f64()?,
        delta_inf: r.f64()?,
        delta_ortho: r.f64()?,
        stay_energy: r.f64()?,
    })
}

fn read_ortho(r: &mut Reader, dim: usize) -> Result<OrthoSummary, CliError> {
    let m = r.usize()?;
    let basis = r.vec()?;
    if basis.len() != dim.saturating_mul(m) {
        return Err(CliError::Data("orthogonal basis has the wrong shape".into()));
    }
    Ok(OrthoSummary {
        basis,
        m,
        delta_ortho: r.f64()?,
        delta_ortho_diff: r.f64()?,
        energy: r.f64()?,
        stay_energy: r.f64()?,
    })
}

/// Parses a model, validating every cross reference.
pub fn model_from_bytes(bytes: &[u8]) -> Result<GmraModel, CliError> {
    let mut r = Reader::new(bytes);
    if r.bytes(8).map_err(|_| CliError::Data("not a model file".into()))? != MODEL_MAGIC {
        return Err(CliError::Data("not a model file (bad magic)".into()));
    }
    let version = r.u32()?;
    if version != MODEL_VERSION {
        return Err(CliError::Data(format!("unsupported model format version {version}")));
    }
    let dim = r.usize()?;
    let d = r.usize()?;
    let gamma = r.f64()?;
    let flags = r.u32()?;

    let mut sections: Vec<([u8; 4], &[u8])> = Vec::new();
    while r.remaining() > 0 {
        let tag: [u8; 4] = r.bytes(4)?.try_into().expect("4 bytes");
        let len = r.usize()?;
        let body = r.bytes(len)?;
        sections.push((tag, body));
    }
    let find = |tag: [u8; 4]| sections.iter().find(|(t, _)| *t == tag).map(|(_, b)| *b);
    let need = |tag: [u8; 4]| {
        find(tag).ok_or_else(|| CliError::Data(format!("missing {} section", String::from_utf8_lossy(&tag))))
    };

    let config: GmraConfig =
        serde_json::from_slice(need(CONFIG)?).map_err(|e| CliError::Data(format!("bad config section: {e}")))?;
    if config.d != d || config.gamma.to_bits() != gamma.to_bits() {
        return Err(CliError::Data("header disagrees with the config section".into()));
    }
    let strict = flags & FLAG_STRICT != 0;
    if strict != (config.mode == CellMode::Strict) {
        return Err(CliError::Data(
            "header mode flag disagrees with the config section".into(),
        ));
    }

    let mut s = Reader::new(need(STATS)?);
    let n_train = s.usize()?;
    let n_stats = s.usize()?;
    let outlier_energy = s.f64()?;
    s.finished("STAT")?;

    let mut s = Reader::new(need(NETS)?);
    let nets = read_nets(&mut s)?;
    s.finished("NETS")?;

    let mut s = Reader::new(need(ANCHORS)?);
    let n_anchors = s.usize()?;
    let anchor_dim = s.usize()?;
    if anchor_dim != dim {
        return Err(CliError::Data("anchor dimension disagrees with the header".into()));
    }
    let data = s.f64s(n_anchors.saturating_mul(dim))?;
    let centers = (0..n_anchors).map(|_| s.usize()).collect::<Result<Vec<_>, _>>()?;
    s.finished("ANCH")?;
    let anchors = PointCloud::new(dim, data).map_err(|e| CliError::Data(format!("bad anchors: {e}")))?;
    if nets.nodes.iter().any(|node| node.point >= n_anchors) {
        return Err(CliError::Data("net node names a missing anchor".into()));
    }

    let mut s = Reader::new(need(TREE)?);
    let n_cells = s.count(34)?;
    if n_cells != nets.nodes.len() {
        return Err(CliError::Data("tree and nets disagree in size".into()));
    }
    let mut scales = Vec::with_capacity(n_cells);
    let mut parents = Vec::with_capacity(n_cells);
    let mut children = Vec::with_capacity(n_cells);
    let mut cell_centers = Vec::with_capacity(n_cells);
    let mut in_master = Vec::with_capacity(n_cells);
    for id in 0..n_cells {
        let j = s.i32()?;
        let k = s.usize()?;
        let parent = s.opt()?;
        let nc = s.u32()? as usize;
        let ch = (0..nc).map(|_| s.usize()).collect::<Result<Vec<_>, _>>()?;
        if parent.is_some_and(|p| p >= id) || ch.iter().any(|&c| c <= id || c >= n_cells) {
            return Err(CliError::Data(format!("cell {id} has inconsistent links")));
        }
        scales.push((j, k));
        parents.push(parent);
        children.push(ch);
        cell_centers.push(s.usize()?);
        in_master.push(s.u8()? != 0);
    }
    s.finished("TREE")?;

    let mut tree = MultiscaleTree::from_parts(
        config.mode,
        nets,
        anchors,
        centers,
        parents,
        in_master,
        flags & FLAG_DATA_MASTER != 0,
    )
    .map_err(|e| CliError::Data(e.to_string()))?;
    for (id, ch) in children.into_iter().enumerate() {
        let cell = &tree.cells[id];
        if (cell.scale, cell.index) != scales[id] || cell.center_point != cell_centers[id] {
            return Err(CliError::Data(format!("cell {id} disagrees with the nets")));
        }
        let mut expected = cell.children.clone();
        let mut got = ch.clone();
        expected.sort_unstable();
        got.sort_unstable();
        if expected != got {
            return Err(CliError::Data(format!(
                "children of cell {id} disagree with the parent links"
            )));
        }
        tree.cells[id].children = ch;
    }

    let mut s = Reader::new(need(SUMMARIES)?);
    if s.count(1)? != n_cells {
        return Err(CliError::Data("summary count disagrees with the tree".into()));
    }
    let mut summaries = Vec::with_capacity(n_cells);
    for _ in 0..n_cells {
        summaries.push(match s.u8()? {
            0 => None,
            1 => Some(read_summary(&mut s, dim)?),
            t => return Err(CliError::Data(format!("bad summary marker {t}"))),
        });
    }
    s.finished("SUMM")?;
    for (id, summary) in summaries.iter().enumerate() {
        if summary.is_some() != tree.in_master[id] {
            return Err(CliError::Data(format!(
                "cell {id}: summary presence disagrees with the master tree"
            )));
        }
    }

    let ortho = match (find(ORTHO), flags & FLAG_ORTHOGONAL != 0) {
        (Some(body), true) => {
            let mut s = Reader::new(body);
            if s.count(1)? != n_cells {
                return Err(CliError::Data("orthogonal section disagrees with the tree".into()));
            }
            let mut out = Vec::with_capacity(n_cells);
            for _ in 0..n_cells {
                out.push(match s.u8()? {
                    0 => None,
                    1 => Some(read_ortho(&mut s, dim)?),
                    t => return Err(CliError::Data(format!("bad orthogonal marker {t}"))),
                });
            }
            s.finished("ORTH")?;
            Some(out)
        }
        (None, false) => None,
        _ => {
            return Err(CliError::Data(
                "orthogonal flag disagrees with the sections present".into(),
            ))
        }
    };

    let mut s = Reader::new(need(ASSIGNMENT)?);
    let n_assigned = s.count(16)?;
    let mut assignment = Vec::with_capacity(n_assigned);
    for _ in 0..n_assigned {
        assignment.push((s.usize()?, s.opt()?));
    }
    s.finished("ASGN")?;
    tree.restore_assignment(assignment)
        .map_err(|e| CliError::Data(e.to_string()))?;

    Ok(GmraModel {
        tree,
        summaries,
        ortho,
        config,
        dim,
        n_train,
        n_stats,
        outlier_energy,
    })
}
