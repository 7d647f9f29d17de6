//! Point clouds: file ingestion, deterministic splitting and the synthetic
//! S/Z benchmark manifolds.
//!
//! All randomness goes through [`ChaCha8Rng`] seeded from a `u64`, so every
//! generator is a pure function of its arguments on any platform.

use std::f64::consts::PI;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{GmraError, Result};

/// Magic bytes opening a binary point file.
pub const POINTS_MAGIC: &[u8; 8] = b"GMRAPTS1";

/// Record of how a synthetic cloud was generated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub generator: String,
    pub seed: u64,
}

/// `n` points in `R^dim`, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    dim: usize,
    data: Vec<f64>,
    provenance: Option<Provenance>,
}

impl PointCloud {
    /// Builds a cloud from row-major coordinates, rejecting empty input,
    /// ragged lengths and non-finite values.
    pub fn new(dim: usize, data: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(GmraError::InvalidArgument("ambient dimension must be >= 1".into()));
        }
        if data.is_empty() {
            return Err(GmraError::InvalidArgument(
                "point cloud must hold at least one point".into(),
            ));
        }
        if !data.len().is_multiple_of(dim) {
            return Err(GmraError::DimensionMismatch {
                expected: dim,
                found: data.len() % dim,
            });
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(GmraError::NonFinite {
                point: pos / dim,
                axis: pos % dim,
            });
        }
        Ok(Self {
            dim,
            data,
            provenance: None,
        })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.first().map(Vec::len).unwrap_or(0);
        let mut data = Vec::with_capacity(rows.len() * dim);
        for row in rows {
            if row.len() != dim {
                return Err(GmraError::DimensionMismatch {
                    expected: dim,
                    found: row.len(),
                });
            }
            data.extend_from_slice(row);
        }
        Self::new(dim, data)
    }

    pub fn with_provenance(mut self, provenance: Provenance) -> Self {
        self.provenance = Some(provenance);
        self
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn provenance(&self) -> Option<&Provenance> {
        self.provenance.as_ref()
    }

    #[inline]
    pub fn point(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn iter(&self) -> impl Iterator<Item = &[f64]> + '_ {
        self.data.chunks_exact(self.dim)
    }

    /// New cloud holding the given rows, in the given order.
    pub fn select(&self, indices: &[usize]) -> Result<Self> {
        let mut data = Vec::with_capacity(indices.len() * self.dim);
        for &i in indices {
            data.extend_from_slice(self.point(i));
        }
        Self::new(self.dim, data)
    }
}

/// On-disk encodings accepted by [`load_points`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PointFormat {
    Binary,
    Csv,
}

impl PointFormat {
    /// Guesses the format from a file extension; anything but `.csv` is binary.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("csv") => PointFormat::Csv,
            _ => PointFormat::Binary,
        }
    }
}

pub fn load_points(path: &Path, format: PointFormat) -> Result<PointCloud> {
    let file = std::fs::File::open(path).map_err(|e| GmraError::io(path, e))?;
    let reader = BufReader::new(file);
    match format {
        PointFormat::Binary => read_binary(reader),
        PointFormat::Csv => read_csv(reader),
    }
}

pub fn save_points(path: &Path, cloud: &PointCloud, format: PointFormat) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| GmraError::io(path, e))?;
    let mut w = BufWriter::new(file);
    match format {
        PointFormat::Binary => write_binary(&mut w, cloud),
        PointFormat::Csv => write_csv(&mut w, cloud),
    }
    .and_then(|_| w.flush())
    .map_err(|e| GmraError::io(path, e))
}

/// Binary layout: magic, u64 n, u64 D, then n*D f64 values, all little-endian.
pub fn write_binary<W: Write>(w: &mut W, cloud: &PointCloud) -> std::io::Result<()> {
    w.write_all(POINTS_MAGIC)?;
    w.write_all(&(cloud.len() as u64).to_le_bytes())?;
    w.write_all(&(cloud.dim() as u64).to_le_bytes())?;
    for v in cloud.as_slice() {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

pub fn read_binary<R: Read>(mut r: R) -> Result<PointCloud> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)
        .map_err(|_| GmraError::Format("file shorter than header".into()))?;
    if &magic != POINTS_MAGIC {
        return Err(GmraError::Format("bad magic bytes".into()));
    }
    let n = read_u64(&mut r)?;
    let dim = read_u64(&mut r)?;
    if n == 0 || dim == 0 {
        return Err(GmraError::Format(format!("header declares n={n}, D={dim}")));
    }
    let count = n
        .checked_mul(dim)
        .filter(|c| *c <= (usize::MAX / 8) as u64)
        .ok_or_else(|| GmraError::Format("header sizes overflow".into()))? as usize;
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)
        .map_err(|e| GmraError::Format(format!("payload unreadable: {e}")))?;
    if bytes.len() != count * 8 {
        return Err(GmraError::Format(format!(
            "payload holds {} bytes, header implies {}",
            bytes.len(),
            count * 8
        )));
    }
    let data = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    PointCloud::new(dim as usize, data)
}

fn read_u64<R: Read>(r: &mut R) -> Result<u64> {
    let mut buf = [0u8; 8];
    r.read_exact(&mut buf)
        .map_err(|_| GmraError::Format("file shorter than header".into()))?;
    Ok(u64::from_le_bytes(buf))
}

/// One row per point, shortest round-trip decimal form.
pub fn write_csv<W: Write>(w: &mut W, cloud: &PointCloud) -> std::io::Result<()> {
    for p in cloud.iter() {
        let line: Vec<String> = p.iter().map(|v| format!("{v:?}")).collect();
        writeln!(w, "{}", line.join(","))?;
    }
    Ok(())
}

pub fn read_csv<R: BufRead>(r: R) -> Result<PointCloud> {
    let mut dim = 0;
    let mut data = Vec::new();
    for (lineno, line) in r.lines().enumerate() {
        let line = line.map_err(|e| GmraError::Format(format!("line {}: {e}", lineno + 1)))?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let start = data.len();
        for field in line.split(',') {
            let v: f64 = field
                .trim()
                .parse()
                .map_err(|_| GmraError::Format(format!("line {}: cannot parse {field:?}", lineno + 1)))?;
            data.push(v);
        }
        let width = data.len() - start;
        if dim == 0 {
            dim = width;
        } else if width != dim {
            return Err(GmraError::DimensionMismatch {
                expected: dim,
                found: width,
            });
        }
    }
    if data.is_empty() {
        return Err(GmraError::Format("no points in csv".into()));
    }
    PointCloud::new(dim, data)
}

/// Disjoint halves of a sample: one builds the tree, the other feeds the
/// per-cell statistics.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitPair {
    pub construction: Vec<usize>,
    pub statistics: Vec<usize>,
}

/// Seeded random split into halves whose sizes differ by at most one. The
/// construction half gets the extra point when `n` is odd.
pub fn split_even(n: usize, seed: u64) -> Result<SplitPair> {
    if n < 2 {
        return Err(GmraError::InsufficientData(format!(
            "cannot split {n} point(s) into two halves"
        )));
    }
    let mut idx: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    idx.shuffle(&mut rng);
    let statistics = idx.split_off(n.div_ceil(2));
    Ok(SplitPair {
        construction: idx,
        statistics,
    })
}

/// Positions into `indices` sorted along a Morton curve over the (at most
/// four) coordinates with the widest range. Nearby points end up close
/// together in the order, which keeps tree searches cache friendly. Ties keep
/// their input order.
pub fn locality_order(points: &PointCloud, indices: &[usize]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..indices.len()).collect();
    let dim = points.dim();
    if indices.len() < 2 || dim == 0 {
        return order;
    }
    let mut lo = vec![f64::INFINITY; dim];
    let mut hi = vec![f64::NEG_INFINITY; dim];
    for &i in indices {
        for (k, &v) in points.point(i).iter().enumerate() {
            lo[k] = lo[k].min(v);
            hi[k] = hi[k].max(v);
        }
    }
    let mut axes: Vec<usize> = (0..dim).filter(|&k| hi[k] > lo[k]).collect();
    axes.sort_by(|&a, &b| (hi[b] - lo[b]).total_cmp(&(hi[a] - lo[a])).then(a.cmp(&b)));
    axes.truncate(4);
    if axes.is_empty() {
        return order;
    }
    // at most 52 bits per axis so the scaled value is exact in f64
    let bits = (63 / axes.len() as u32).min(52);
    let top = ((1u64 << bits) - 1) as f64;
    order.sort_by_cached_key(|&pos| {
        let x = points.point(indices[pos]);
        let mut q = [0u64; 4];
        for (c, &k) in q.iter_mut().zip(&axes) {
            *c = (((x[k] - lo[k]) / (hi[k] - lo[k])).clamp(0.0, 1.0) * top) as u64;
        }
        let mut key = 0u64;
        for b in (0..bits).rev() {
            for c in &q[..axes.len()] {
                key = (key << 1) | ((c >> b) & 1);
            }
        }
        key
    });
    order
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ManifoldFamily {
    /// Two tangent unit half circles.
    S,
    /// Three segments with two corners.
    Z,
}

impl std::str::FromStr for ManifoldFamily {
    type Err = GmraError;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "s" => Ok(ManifoldFamily::S),
            "z" => Ok(ManifoldFamily::Z),
            other => Err(GmraError::InvalidArgument(format!("unknown manifold {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ManifoldSpec {
    pub family: ManifoldFamily,
    pub intrinsic_dim: usize,
    pub noise_sigma: f64,
    pub seed: u64,
}

impl ManifoldSpec {
    pub fn ambient_dim(&self) -> usize {
        self.intrinsic_dim + 1
    }
}

const SQRT2: f64 = std::f64::consts::SQRT_2;

/// Total arc length of the curve carrying the first two coordinates.
pub fn curve_length(family: ManifoldFamily) -> f64 {
    match family {
        ManifoldFamily::S => 2.0 * PI,
        ManifoldFamily::Z => 2.0 + SQRT2,
    }
}

/// Point on the planar curve at arc length `s` in `[0, curve_length]`.
///
/// S: upper half circle centred at (0,1) traversed from (0,2) through (-1,1)
/// to the origin, then the lower half circle centred at (0,-1) from the origin
/// through (1,-1) to (0,-2). Both arcs have horizontal tangent at the origin.
///
/// Z: (0,1) -> (1,1) -> (0,0) -> (1,0).
pub fn curve_point(family: ManifoldFamily, s: f64) -> [f64; 2] {
    match family {
        ManifoldFamily::S => {
            if s <= PI {
                let theta = PI / 2.0 + s;
                [theta.cos(), 1.0 + theta.sin()]
            } else {
                let phi = PI / 2.0 - (s - PI);
                [phi.cos(), -1.0 + phi.sin()]
            }
        }
        ManifoldFamily::Z => {
            if s <= 1.0 {
                [s, 1.0]
            } else if s <= 1.0 + SQRT2 {
                let t = (s - 1.0) / SQRT2;
                [1.0 - t, 1.0 - t]
            } else {
                [s - 1.0 - SQRT2, 0.0]
            }
        }
    }
}

/// Euclidean distance from a planar point to the curve.
pub fn curve_distance(family: ManifoldFamily, p: [f64; 2]) -> f64 {
    match family {
        ManifoldFamily::S => {
            // Upper arc covers the half plane x <= 0 of the circle at (0,1),
            // lower arc the half plane x >= 0 of the circle at (0,-1).
            let arc = |cy: f64, left: bool| {
                let (dx, dy) = (p[0], p[1] - cy);
                let r = dx.hypot(dy);
                let on_side = if left { dx <= 0.0 } else { dx >= 0.0 };
                if on_side && r > 0.0 {
                    (r - 1.0).abs()
                } else {
                    // nearest is one of the two endpoints (0, cy +- 1)
                    let a = dx.hypot(dy - 1.0);
                    let b = dx.hypot(dy + 1.0);
                    a.min(b)
                }
            };
            arc(1.0, true).min(arc(-1.0, false))
        }
        ManifoldFamily::Z => {
            let segs = [
                ([0.0, 1.0], [1.0, 1.0]),
                ([1.0, 1.0], [0.0, 0.0]),
                ([0.0, 0.0], [1.0, 0.0]),
            ];
            segs.iter()
                .map(|(a, b)| segment_distance(p, *a, *b))
                .fold(f64::INFINITY, f64::min)
        }
    }
}

fn segment_distance(p: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    let (ux, uy) = (b[0] - a[0], b[1] - a[1]);
    let t = (((p[0] - a[0]) * ux + (p[1] - a[1]) * uy) / (ux * ux + uy * uy)).clamp(0.0, 1.0);
    (p[0] - a[0] - t * ux).hypot(p[1] - a[1] - t * uy)
}

/// Samples `n` points on the `d`-dimensional S or Z manifold in `R^{d+1}`,
/// uniform in arc length along the curve and uniform on `[0,1]` in the
/// remaining coordinates, plus isotropic noise `(sigma/sqrt(D)) * N(0, I_D)`.
///
/// Manifold coordinates and noise come from separate ChaCha8 streams of the
/// same seed, so the noisy cloud differs from its `sigma = 0` counterpart only
/// by the noise term.
pub fn synth_manifold(spec: &ManifoldSpec, n: usize) -> Result<PointCloud> {
    if n == 0 {
        return Err(GmraError::InvalidArgument("n must be >= 1".into()));
    }
    if spec.intrinsic_dim == 0 {
        return Err(GmraError::InvalidArgument("intrinsic dimension must be >= 1".into()));
    }
    if !(spec.noise_sigma >= 0.0 && spec.noise_sigma.is_finite()) {
        return Err(GmraError::InvalidArgument("noise sigma must be finite and >= 0".into()));
    }
    let dim = spec.ambient_dim();
    let len = curve_length(spec.family);
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut noise_rng = ChaCha8Rng::seed_from_u64(spec.seed);
    noise_rng.set_stream(1);
    let scale = spec.noise_sigma / (dim as f64).sqrt();

    let mut data = Vec::with_capacity(n * dim);
    for _ in 0..n {
        let s = rng.random::<f64>() * len;
        let c = curve_point(spec.family, s);
        data.extend_from_slice(&c);
        for _ in 2..dim {
            data.push(rng.random::<f64>());
        }
    }
    if scale > 0.0 {
        for v in data.iter_mut() {
            let xi: f64 = noise_rng.sample(StandardNormal);
            *v += scale * xi;
        }
    }
    let family = match spec.family {
        ManifoldFamily::S => "s",
        ManifoldFamily::Z => "z",
    };
    Ok(PointCloud::new(dim, data)?.with_provenance(Provenance {
        generator: format!("{family}-manifold d={} sigma={}", spec.intrinsic_dim, spec.noise_sigma),
        seed: spec.seed,
    }))
}
