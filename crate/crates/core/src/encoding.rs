//! Vertex-vector sequences for the deep models.
//!
//! Every stored vertex becomes a 5-wide row `[x, y, r_full, r_sub, r_final]`.
//! The three flags are one-hot: `r_final` marks the very last vertex,
//! `r_sub` the last vertex of every other ring, `r_full` everything else.
//! Coordinates are centered on the geometry's vertex mean and divided by a
//! dataset-wide [`ScaleFactor`]. Padding rows are all zero, which no real
//! vertex can be since each has a flag set.

use alloc::string::String;
use alloc::vec::Vec;
use core::cmp::Ordering;
#[allow(unused_imports)] // inherent on newer toolchains
use num_traits::Float;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{self, douglas_peucker, Geometry, GeometryError, Point};

/// Default vertex budget above which geometries are simplified.
pub const DEFAULT_MAX_POINTS: usize = 1024;
/// Doublings of the simplification tolerance before giving up.
pub const MAX_EPSILON_DOUBLINGS: usize = 60;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EncodingError {
    #[error("empty dataset")]
    Empty,
    #[error("scale factor is zero: every geometry collapses to a single point")]
    DegenerateScale,
    #[error("scale factor must be positive and finite, got {0}")]
    InvalidScale(f64),
    #[error("vertex budget must be at least 8, got {0}")]
    BudgetTooSmall(usize),
    #[error("could not simplify geometry {id} below {budget} vertices")]
    SimplificationFailed { id: String, budget: usize },
    #[error("need n_bin >= batch_size >= 1, got n_bin {n_bin} and batch size {batch_size}")]
    BadBinning { n_bin: usize, batch_size: usize },
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RenderFlag {
    Full,
    Sub,
    Final,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct VertexVector(pub [f64; 5]);

impl VertexVector {
    pub const PADDING: VertexVector = VertexVector([0.0; 5]);

    pub fn new(p: Point, flag: RenderFlag) -> Self {
        let mut v = [p.x, p.y, 0.0, 0.0, 0.0];
        v[2 + flag as usize] = 1.0;
        VertexVector(v)
    }

    pub fn point(&self) -> Point {
        Point::new(self.0[0], self.0[1])
    }

    pub fn flag(&self) -> Option<RenderFlag> {
        match (self.0[2], self.0[3], self.0[4]) {
            (1.0, 0.0, 0.0) => Some(RenderFlag::Full),
            (0.0, 1.0, 0.0) => Some(RenderFlag::Sub),
            (0.0, 0.0, 1.0) => Some(RenderFlag::Final),
            _ => None,
        }
    }

    pub fn is_padding(&self) -> bool {
        self.0 == [0.0; 5]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeometrySequence {
    pub id: String,
    pub label: usize,
    pub vectors: Vec<VertexVector>,
}

impl GeometrySequence {
    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    /// Number of rows that are not padding.
    pub fn real_len(&self) -> usize {
        self.vectors.iter().take_while(|v| !v.is_padding()).count()
    }

    /// Splits the rows back into rings of points (padding dropped).
    pub fn rings(&self) -> Vec<Vec<Point>> {
        let mut rings = Vec::new();
        let mut current = Vec::new();
        for v in &self.vectors {
            match v.flag() {
                None => break,
                Some(flag) => {
                    current.push(v.point());
                    if flag != RenderFlag::Full {
                        rings.push(core::mem::take(&mut current));
                    }
                }
            }
        }
        if !current.is_empty() {
            rings.push(current);
        }
        rings
    }
}

/// Unnormalized sequence of a geometry: raw coordinates plus render flags.
pub fn to_sequence(g: &Geometry, label: usize) -> GeometrySequence {
    let last_ring = g.rings().len() - 1;
    let mut vectors = Vec::with_capacity(g.vertex_count());
    for (ri, ring) in g.rings().iter().enumerate() {
        let last_vertex = ring.len() - 1;
        for (vi, &p) in ring.vertices().iter().enumerate() {
            let flag = match (vi == last_vertex, ri == last_ring) {
                (false, _) => RenderFlag::Full,
                (true, false) => RenderFlag::Sub,
                (true, true) => RenderFlag::Final,
            };
            vectors.push(VertexVector::new(p, flag));
        }
    }
    GeometrySequence {
        id: g.id.clone(),
        label,
        vectors,
    }
}

/// Standard deviation convention used for the scale factor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StdConvention {
    /// Divide by `N` (ddof = 0).
    Population,
    /// Divide by `N - 1` (ddof = 1).
    Sample,
}

/// Dataset-wide coordinate scale.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct ScaleFactor(f64);

impl ScaleFactor {
    pub fn new(s: f64) -> Result<Self, EncodingError> {
        if s > 0.0 && s.is_finite() {
            Ok(Self(s))
        } else {
            Err(EncodingError::InvalidScale(s))
        }
    }

    pub fn get(self) -> f64 {
        self.0
    }
}

impl TryFrom<f64> for ScaleFactor {
    type Error = EncodingError;
    fn try_from(s: f64) -> Result<Self, Self::Error> {
        Self::new(s)
    }
}

impl From<ScaleFactor> for f64 {
    fn from(s: ScaleFactor) -> f64 {
        s.0
    }
}

/// Smallest and largest centered coordinate of a geometry, x and y pooled.
pub fn centered_extrema(g: &Geometry) -> (f64, f64) {
    let m = geometry::vertex_mean(g);
    g.points()
        .flat_map(|p| [p.x - m.x, p.y - m.y])
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
            (lo.min(v), hi.max(v))
        })
}

pub fn compute_scale_factor<'a, I>(geoms: I) -> Result<ScaleFactor, EncodingError>
where
    I: IntoIterator<Item = &'a Geometry>,
{
    compute_scale_factor_with(geoms, StdConvention::Population)
}

pub fn compute_scale_factor_with<'a, I>(
    geoms: I,
    convention: StdConvention,
) -> Result<ScaleFactor, EncodingError>
where
    I: IntoIterator<Item = &'a Geometry>,
{
    let bounds: Vec<f64> = geoms
        .into_iter()
        .flat_map(|g| {
            let (lo, hi) = centered_extrema(g);
            [lo, hi]
        })
        .collect();
    if bounds.is_empty() {
        return Err(EncodingError::Empty);
    }
    let n = bounds.len() as f64;
    let mean = bounds.iter().sum::<f64>() / n;
    let ss: f64 = bounds.iter().map(|b| (b - mean) * (b - mean)).sum();
    let denom = match convention {
        StdConvention::Population => n,
        StdConvention::Sample if n > 1.0 => n - 1.0,
        StdConvention::Sample => n,
    };
    let s = (ss / denom).sqrt();
    if s == 0.0 {
        return Err(EncodingError::DegenerateScale);
    }
    ScaleFactor::new(s)
}

/// Maps every coordinate to `(p - mean) / s`; flags are untouched.
pub fn normalize(seq: &GeometrySequence, mean: Point, s: ScaleFactor) -> GeometrySequence {
    map_coords(seq, |p| {
        Point::new((p.x - mean.x) / s.0, (p.y - mean.y) / s.0)
    })
}

/// Inverse of [`normalize`].
pub fn denormalize(seq: &GeometrySequence, mean: Point, s: ScaleFactor) -> GeometrySequence {
    map_coords(seq, |p| Point::new(p.x * s.0 + mean.x, p.y * s.0 + mean.y))
}

fn map_coords(seq: &GeometrySequence, f: impl Fn(Point) -> Point) -> GeometrySequence {
    let vectors = seq
        .vectors
        .iter()
        .map(|v| {
            if v.is_padding() {
                *v
            } else {
                let p = f(v.point());
                let mut out = v.0;
                out[0] = p.x;
                out[1] = p.y;
                VertexVector(out)
            }
        })
        .collect();
    GeometrySequence {
        id: seq.id.clone(),
        label: seq.label,
        vectors,
    }
}

/// Sequence for `g` centered on its own vertex mean and scaled by `s`.
pub fn encode(g: &Geometry, label: usize, s: ScaleFactor) -> GeometrySequence {
    normalize(&to_sequence(g, label), geometry::vertex_mean(g), s)
}

/// Douglas-Peucker simplification of geometries above a vertex budget.
///
/// The tolerance starts at 1% of the mean edge length and doubles until the
/// total stored vertex count fits.
pub fn simplify_if_needed(g: &Geometry, max_points: usize) -> Result<Geometry, EncodingError> {
    if max_points < 8 {
        return Err(EncodingError::BudgetTooSmall(max_points));
    }
    if g.vertex_count() <= max_points {
        return Ok(g.clone());
    }
    let st = geometry::stats(g);
    let mut eps = st.boundary_length / st.vertex_count as f64 * 0.01;
    for _ in 0..=MAX_EPSILON_DOUBLINGS {
        let rings = g
            .rings()
            .iter()
            .map(|r| douglas_peucker(r, eps))
            .collect::<Result<Vec<_>, _>>()?;
        let out = g.with_rings(rings);
        if out.vertex_count() <= max_points {
            return Ok(out);
        }
        eps *= 2.0;
    }
    Err(EncodingError::SimplificationFailed {
        id: g.id.clone(),
        budget: max_points,
    })
}

/// Equal-length group of sequences ready to become one tensor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Batch {
    /// Sequences zero-padded to `m_bin` rows.
    pub sequences: Vec<GeometrySequence>,
    pub labels: Vec<usize>,
    /// Unpadded length of each sequence.
    pub lengths: Vec<usize>,
    pub m_bin: usize,
}

impl Batch {
    pub fn len(&self) -> usize {
        self.sequences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sequences.is_empty()
    }

    /// Row-major `[batch, m_bin, 5]` values.
    pub fn to_flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.len() * self.m_bin * 5);
        for s in &self.sequences {
            for v in &s.vectors {
                out.extend_from_slice(&v.0);
            }
        }
        out
    }

    /// The batch with padding rows removed from every sequence.
    pub fn unpadded(&self) -> Vec<GeometrySequence> {
        self.sequences
            .iter()
            .zip(&self.lengths)
            .map(|(s, &l)| GeometrySequence {
                id: s.id.clone(),
                label: s.label,
                vectors: s.vectors[..l].to_vec(),
            })
            .collect()
    }
}

/// Descending-length order, ties by id.
fn length_order(a: &GeometrySequence, b: &GeometrySequence) -> Ordering {
    b.len().cmp(&a.len()).then_with(|| a.id.cmp(&b.id))
}

/// Sorts sequences longest first, cuts them into bins of `n_bin`, pads each
/// bin to its longest member and splits every bin into batches of
/// `batch_size`. The last bin holds whatever remains and may be short.
pub fn bin_and_pad(
    seqs: &[GeometrySequence],
    batch_size: usize,
    n_bin: usize,
) -> Result<Vec<Batch>, EncodingError> {
    if seqs.is_empty() {
        return Err(EncodingError::Empty);
    }
    if batch_size == 0 || n_bin < batch_size {
        return Err(EncodingError::BadBinning { n_bin, batch_size });
    }
    let mut sorted: Vec<&GeometrySequence> = seqs.iter().collect();
    sorted.sort_by(|a, b| length_order(a, b));

    let mut batches = Vec::new();
    for bin in sorted.chunks(n_bin) {
        let m_bin = bin[0].len();
        for chunk in bin.chunks(batch_size) {
            let sequences = chunk
                .iter()
                .map(|s| {
                    let mut vectors = s.vectors.clone();
                    vectors.resize(m_bin, VertexVector::PADDING);
                    GeometrySequence {
                        id: s.id.clone(),
                        label: s.label,
                        vectors,
                    }
                })
                .collect();
            batches.push(Batch {
                sequences,
                labels: chunk.iter().map(|s| s.label).collect(),
                lengths: chunk.iter().map(|s| s.len()).collect(),
                m_bin,
            });
        }
    }
    Ok(batches)
}

/// Batches for evaluation that reproduce the padding seen in training: a
/// sequence of length `L` is padded to the smallest of the training bin
/// lengths `m_bins` that is at least `L`, or kept at `L` when it is longer
/// than all of them. Sequences with the same target length are sorted like
/// [`bin_and_pad`] and split into batches of `batch_size`.
pub fn bin_like(
    seqs: &[GeometrySequence],
    batch_size: usize,
    m_bins: &[usize],
) -> Result<Vec<Batch>, EncodingError> {
    if seqs.is_empty() {
        return Err(EncodingError::Empty);
    }
    if batch_size == 0 {
        return Err(EncodingError::BadBinning {
            n_bin: 0,
            batch_size,
        });
    }
    let mut lengths = m_bins.to_vec();
    lengths.sort_unstable();
    lengths.dedup();
    let target = |l: usize| lengths.iter().copied().find(|&m| m >= l).unwrap_or(l);
    let mut sorted: Vec<&GeometrySequence> = seqs.iter().collect();
    sorted.sort_by(|a, b| {
        target(b.len())
            .cmp(&target(a.len()))
            .then_with(|| length_order(a, b))
    });
    let mut batches = Vec::new();
    let mut start = 0;
    while start < sorted.len() {
        let m_bin = target(sorted[start].len());
        let end = start
            + sorted[start..]
                .iter()
                .take_while(|s| target(s.len()) == m_bin)
                .count();
        for chunk in sorted[start..end].chunks(batch_size) {
            batches.push(Batch {
                sequences: chunk
                    .iter()
                    .map(|s| {
                        let mut vectors = s.vectors.clone();
                        vectors.resize(m_bin, VertexVector::PADDING);
                        GeometrySequence {
                            id: s.id.clone(),
                            label: s.label,
                            vectors,
                        }
                    })
                    .collect(),
                labels: chunk.iter().map(|s| s.label).collect(),
                lengths: chunk.iter().map(|s| s.len()).collect(),
                m_bin,
            });
        }
        start = end;
    }
    Ok(batches)
}

/// Distinct `m_bin` values of a set of batches, ascending.
pub fn bin_lengths(batches: &[Batch]) -> Vec<usize> {
    let mut m: Vec<usize> = batches.iter().map(|b| b.m_bin).collect();
    m.sort_unstable();
    m.dedup();
    m
}

/// Default bin size for a batch size.
pub fn default_n_bin(batch_size: usize) -> usize {
    8 * batch_size
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Ring;
    use alloc::format;
    use alloc::vec;

    fn tri(x: f64, y: f64) -> Ring {
        Ring::from_open(vec![
            Point::new(x, y),
            Point::new(x + 1.0, y),
            Point::new(x + 1.0, y + 1.0),
        ])
        .unwrap()
    }

    fn seq_of_len(id: &str, n: usize) -> GeometrySequence {
        let mut vectors = vec![VertexVector::new(Point::new(1.0, 1.0), RenderFlag::Full); n - 1];
        vectors.push(VertexVector::new(Point::new(1.0, 1.0), RenderFlag::Final));
        GeometrySequence {
            id: id.into(),
            label: 0,
            vectors,
        }
    }

    #[test]
    fn triangle_flags() {
        let s = to_sequence(&Geometry::polygon("t", tri(0.0, 0.0)), 3);
        assert_eq!(s.len(), 4);
        assert_eq!(s.label, 3);
        assert_eq!(s.vectors[3].0[2..], [0.0, 0.0, 1.0]);
        assert!(s.vectors[..3].iter().all(|v| v.0[2..] == [1.0, 0.0, 0.0]));
    }

    #[test]
    fn multipolygon_flags() {
        let g = Geometry::new("m", vec![tri(0.0, 0.0), tri(2.0, 2.0)]).unwrap();
        let s = to_sequence(&g, 0);
        assert_eq!(s.len(), 8);
        assert_eq!(s.vectors[3].flag(), Some(RenderFlag::Sub));
        assert_eq!(s.vectors[7].flag(), Some(RenderFlag::Final));
        assert_eq!(s.rings().len(), 2);
    }

    #[test]
    fn square_scale_factor_hand_oracle() {
        let sq = Ring::from_open(vec![
            Point::new(0.0, 0.0),
            Point::new(2.0, 0.0),
            Point::new(2.0, 2.0),
            Point::new(0.0, 2.0),
        ])
        .unwrap();
        let g = Geometry::polygon("sq", sq);
        let (lo, hi) = centered_extrema(&g);
        assert!((lo + 0.8).abs() < 1e-15 && (hi - 1.2).abs() < 1e-15);
        // Population std of {-0.8, 1.2} is exactly 1.
        assert_eq!(compute_scale_factor([&g]).unwrap().get(), 1.0);
        let sample = compute_scale_factor_with([&g], StdConvention::Sample).unwrap();
        assert!((sample.get() - 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn degenerate_scale_rejected() {
        let p = Point::new(3.0, 3.0);
        let g = Geometry::polygon("p", Ring::new(vec![p; 4]).unwrap());
        assert_eq!(
            compute_scale_factor([&g]),
            Err(EncodingError::DegenerateScale)
        );
        assert_eq!(compute_scale_factor([]), Err(EncodingError::Empty));
        assert!(ScaleFactor::new(0.0).is_err());
    }

    #[test]
    fn identity_normalization() {
        let s = to_sequence(&Geometry::polygon("t", tri(3.0, 4.0)), 0);
        let n = normalize(&s, Point::new(0.0, 0.0), ScaleFactor::new(1.0).unwrap());
        assert_eq!(n, s);
    }

    #[test]
    fn self_centering_averages_to_zero() {
        let g = Geometry::polygon("t", tri(3.0, 4.0));
        let n = encode(&g, 0, ScaleFactor::new(0.7).unwrap());
        let (sx, sy) = n
            .vectors
            .iter()
            .fold((0.0, 0.0), |(a, b), v| (a + v.0[0], b + v.0[1]));
        assert!(sx.abs() < 1e-9 && sy.abs() < 1e-9);
    }

    #[test]
    fn simplification_budget() {
        let g = Geometry::polygon("t", tri(0.0, 0.0));
        assert_eq!(simplify_if_needed(&g, 1024).unwrap(), g);
        assert!(simplify_if_needed(&g, 4).is_err());
        let ring = Ring::from_open(
            (0..9)
                .map(|k| {
                    let a = k as f64 * 0.7;
                    Point::new(a.cos(), a.sin())
                })
                .collect(),
        )
        .unwrap();
        let g = Geometry::polygon("c", ring);
        assert_eq!(g.vertex_count(), 10);
        assert_eq!(simplify_if_needed(&g, 10).unwrap(), g);
    }

    #[test]
    fn paper_style_bins() {
        let seqs: Vec<_> = [148, 144, 7, 5]
            .iter()
            .enumerate()
            .map(|(i, &n)| seq_of_len(&format!("s{i}"), n))
            .collect();
        let batches = bin_and_pad(&seqs, 2, 2).unwrap();
        assert_eq!(batches.len(), 2);
        assert_eq!(batches[0].m_bin, 148);
        assert_eq!(batches[0].lengths, vec![148, 144]);
        assert!(batches[0].sequences[1].vectors[144..]
            .iter()
            .all(VertexVector::is_padding));
        assert_eq!(batches[1].m_bin, 7);
        assert_eq!(batches[1].sequences[1].real_len(), 5);
    }

    #[test]
    fn uniform_lengths_need_no_padding() {
        let seqs: Vec<_> = (0..10).map(|i| seq_of_len(&format!("{i}"), 6)).collect();
        for b in bin_and_pad(&seqs, 3, 6).unwrap() {
            assert_eq!(b.m_bin, 6);
            assert!(b.sequences.iter().all(|s| s.real_len() == 6));
        }
    }

    #[test]
    fn binning_argument_errors() {
        assert_eq!(bin_and_pad(&[], 1, 1), Err(EncodingError::Empty));
        let s = [seq_of_len("a", 4)];
        assert!(bin_and_pad(&s, 4, 2).is_err());
        assert!(bin_and_pad(&s, 0, 2).is_err());
    }

    #[test]
    fn evaluation_bins_follow_training_lengths() {
        let train: Vec<_> = [148, 144, 7, 5]
            .iter()
            .enumerate()
            .map(|(i, &n)| seq_of_len(&format!("t{i}"), n))
            .collect();
        let reference = bin_lengths(&bin_and_pad(&train, 2, 2).unwrap());
        assert_eq!(reference, vec![7, 148]);
        let eval: Vec<_> = [3, 7, 8, 150, 100]
            .iter()
            .enumerate()
            .map(|(i, &n)| seq_of_len(&format!("e{i}"), n))
            .collect();
        let batches = bin_like(&eval, 2, &reference).unwrap();
        let shape: Vec<(usize, Vec<usize>)> = batches
            .iter()
            .map(|b| (b.m_bin, b.lengths.clone()))
            .collect();
        assert_eq!(
            shape,
            vec![(150, vec![150]), (148, vec![100, 8]), (7, vec![7, 3])]
        );
        for b in &batches {
            assert!(b.sequences.iter().all(|s| s.len() == b.m_bin));
        }
        assert_eq!(bin_like(&[], 2, &reference), Err(EncodingError::Empty));
        assert!(bin_like(&eval, 0, &reference).is_err());
    }
}
