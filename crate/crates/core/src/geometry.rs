//! Polygon geometries and the scalar measurements taken from them.
//!
//! Rings are stored closed: the first vertex is repeated as the last one and
//! that closing duplicate is counted everywhere (vertex means, vertex counts,
//! sequence encodings). Holes are not representable; a [`Geometry`] with more
//! than one ring is a multipolygon whose rings are separate parts.

use alloc::string::String;
use alloc::vec::Vec;
#[allow(unused_imports)] // inherent on newer toolchains
use num_traits::Float;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GeometryError {
    #[error("ring has {0} stored vertices, at least 4 are required")]
    TooFewVertices(usize),
    #[error("ring not closed: first and last vertex differ")]
    NotClosed,
    #[error("non-finite coordinate at vertex {0}")]
    NonFinite(usize),
    #[error("geometry has no rings")]
    NoRings,
    #[error("epsilon must be finite and non-negative")]
    BadEpsilon,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance(self, other: Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

impl core::ops::Sub for Point {
    type Output = Point;
    fn sub(self, rhs: Point) -> Point {
        Point::new(self.x - rhs.x, self.y - rhs.y)
    }
}

impl core::ops::Add for Point {
    type Output = Point;
    fn add(self, rhs: Point) -> Point {
        Point::new(self.x + rhs.x, self.y + rhs.y)
    }
}

/// Distance from `p` to the closed segment `a`-`b`.
pub fn segment_distance(p: Point, a: Point, b: Point) -> f64 {
    let dx = b.x - a.x;
    let dy = b.y - a.y;
    let len2 = dx * dx + dy * dy;
    if len2 == 0.0 {
        return p.distance(a);
    }
    let t = ((p.x - a.x) * dx + (p.y - a.y) * dy) / len2;
    let t = t.clamp(0.0, 1.0);
    p.distance(Point::new(a.x + t * dx, a.y + t * dy))
}

/// A closed vertex ring. Self-intersections are allowed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Point>", into = "Vec<Point>")]
pub struct Ring {
    vertices: Vec<Point>,
}

impl Ring {
    pub fn new(vertices: Vec<Point>) -> Result<Self, GeometryError> {
        if let Some(i) = vertices.iter().position(|p| !p.is_finite()) {
            return Err(GeometryError::NonFinite(i));
        }
        if vertices.len() < 4 {
            return Err(GeometryError::TooFewVertices(vertices.len()));
        }
        if vertices[0] != vertices[vertices.len() - 1] {
            return Err(GeometryError::NotClosed);
        }
        Ok(Self { vertices })
    }

    /// Builds a ring from an open vertex list by appending the first vertex.
    pub fn from_open(mut vertices: Vec<Point>) -> Result<Self, GeometryError> {
        if let Some(&first) = vertices.first() {
            vertices.push(first);
        }
        Self::new(vertices)
    }

    /// Stored vertices including the closing duplicate.
    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn edges(&self) -> impl Iterator<Item = (Point, Point)> + '_ {
        self.vertices.windows(2).map(|w| (w[0], w[1]))
    }

    /// Absolute shoelace area. Self-intersecting lobes of opposite
    /// orientation cancel, so a symmetric bowtie has area zero.
    pub fn area(&self) -> f64 {
        self.signed_area().abs()
    }

    pub fn signed_area(&self) -> f64 {
        // Shifting to the first vertex keeps the cross products small for
        // coordinates far from the origin.
        let o = self.vertices[0];
        let twice: f64 = self
            .edges()
            .map(|(a, b)| (a.x - o.x) * (b.y - o.y) - (b.x - o.x) * (a.y - o.y))
            .sum();
        twice / 2.0
    }

    pub fn perimeter(&self) -> f64 {
        self.edges().map(|(a, b)| a.distance(b)).sum()
    }

    pub fn map_points(&self, f: impl Fn(Point) -> Point) -> Ring {
        Ring {
            vertices: self.vertices.iter().map(|&p| f(p)).collect(),
        }
    }

    /// The same closed ring started at distinct vertex `shift`.
    pub fn rotate_start(&self, shift: usize) -> Ring {
        let open = &self.vertices[..self.vertices.len() - 1];
        let shift = shift % open.len();
        let mut v: Vec<Point> = open[shift..]
            .iter()
            .chain(&open[..shift])
            .copied()
            .collect();
        v.push(v[0]);
        Ring { vertices: v }
    }

    pub fn reversed(&self) -> Ring {
        let mut v = self.vertices.clone();
        v.reverse();
        Ring { vertices: v }
    }
}

impl TryFrom<Vec<Point>> for Ring {
    type Error = GeometryError;
    fn try_from(v: Vec<Point>) -> Result<Self, Self::Error> {
        Ring::new(v)
    }
}

impl From<Ring> for Vec<Point> {
    fn from(r: Ring) -> Self {
        r.vertices
    }
}

/// A polygon (one ring) or multipolygon (several rings), with an opaque id.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Geometry {
    pub id: String,
    rings: Vec<Ring>,
}

impl Geometry {
    pub fn new(id: impl Into<String>, rings: Vec<Ring>) -> Result<Self, GeometryError> {
        if rings.is_empty() {
            return Err(GeometryError::NoRings);
        }
        Ok(Self {
            id: id.into(),
            rings,
        })
    }

    pub fn polygon(id: impl Into<String>, ring: Ring) -> Self {
        Self {
            id: id.into(),
            rings: alloc::vec![ring],
        }
    }

    pub fn rings(&self) -> &[Ring] {
        &self.rings
    }

    pub fn is_multi(&self) -> bool {
        self.rings.len() > 1
    }

    pub fn points(&self) -> impl Iterator<Item = Point> + '_ {
        self.rings.iter().flat_map(|r| r.vertices.iter().copied())
    }

    pub fn vertex_count(&self) -> usize {
        self.rings.iter().map(Ring::len).sum()
    }

    pub fn map_points(&self, f: impl Fn(Point) -> Point) -> Geometry {
        Geometry {
            id: self.id.clone(),
            rings: self.rings.iter().map(|r| r.map_points(&f)).collect(),
        }
    }

    pub fn translate(&self, dx: f64, dy: f64) -> Geometry {
        self.map_points(|p| Point::new(p.x + dx, p.y + dy))
    }

    pub fn scale(&self, factor: f64) -> Geometry {
        self.map_points(|p| Point::new(p.x * factor, p.y * factor))
    }

    /// Index of the ring with the largest area; the first one wins ties.
    pub fn largest_ring(&self) -> usize {
        let mut best = 0;
        let mut best_area = f64::NEG_INFINITY;
        for (i, r) in self.rings.iter().enumerate() {
            let a = r.area();
            if a > best_area {
                best = i;
                best_area = a;
            }
        }
        best
    }

    pub(crate) fn with_rings(&self, rings: Vec<Ring>) -> Geometry {
        Geometry {
            id: self.id.clone(),
            rings,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeometryStats {
    pub area: f64,
    pub vertex_count: usize,
    pub boundary_length: f64,
}

/// Mean of every stored vertex, closing duplicates included.
pub fn vertex_mean(g: &Geometry) -> Point {
    let n = g.vertex_count() as f64;
    let (sx, sy) = g
        .points()
        .fold((0.0, 0.0), |(sx, sy), p| (sx + p.x, sy + p.y));
    Point::new(sx / n, sy / n)
}

pub fn stats(g: &Geometry) -> GeometryStats {
    GeometryStats {
        area: g.rings.iter().map(Ring::area).sum(),
        vertex_count: g.vertex_count(),
        boundary_length: g.rings.iter().map(Ring::perimeter).sum(),
    }
}

/// Douglas-Peucker simplification of a closed ring.
///
/// The ring is split at the vertex farthest from its start, both open chains
/// are simplified independently and then rejoined, so the start vertex and
/// the split vertex always survive. If that leaves fewer than three distinct
/// vertices the most deviating removed vertex is put back.
pub fn douglas_peucker(ring: &Ring, epsilon: f64) -> Result<Ring, GeometryError> {
    if !(epsilon >= 0.0 && epsilon.is_finite()) {
        return Err(GeometryError::BadEpsilon);
    }
    let v = ring.vertices();
    let n = v.len();
    let start = v[0];
    let (split, far) = v
        .iter()
        .enumerate()
        .map(|(i, p)| (i, p.distance(start)))
        .fold(
            (0, 0.0),
            |best, cur| if cur.1 > best.1 { cur } else { best },
        );
    if far == 0.0 {
        return Ok(ring.clone());
    }

    let mut keep = alloc::vec![false; n];
    simplify_chain(v, 0, split, epsilon, &mut keep);
    simplify_chain(v, split, n - 1, epsilon, &mut keep);

    if keep.iter().filter(|&&k| k).count() < 4 {
        // Only start, split and closing vertex survived: restore the vertex
        // farthest from the start-split chord.
        let (a, b) = (v[0], v[split]);
        if let Some((i, _)) = (1..n - 1)
            .filter(|&i| i != split)
            .map(|i| (i, segment_distance(v[i], a, b)))
            .fold(None, |best: Option<(usize, f64)>, cur| match best {
                Some(b) if b.1 >= cur.1 => Some(b),
                _ => Some(cur),
            })
        {
            keep[i] = true;
        }
    }

    let out: Vec<Point> = v
        .iter()
        .zip(&keep)
        .filter_map(|(&p, &k)| k.then_some(p))
        .collect();
    Ring::new(out)
}

/// Marks the vertices of `v[first..=last]` kept by Douglas-Peucker.
fn simplify_chain(v: &[Point], first: usize, last: usize, epsilon: f64, keep: &mut [bool]) {
    keep[first] = true;
    keep[last] = true;
    let mut stack = alloc::vec![(first, last)];
    while let Some((a, b)) = stack.pop() {
        if b <= a + 1 {
            continue;
        }
        let mut idx = a;
        let mut dmax = 0.0;
        for i in a + 1..b {
            let d = segment_distance(v[i], v[a], v[b]);
            if d > dmax {
                dmax = d;
                idx = i;
            }
        }
        if dmax > epsilon {
            keep[idx] = true;
            stack.push((a, idx));
            stack.push((idx, b));
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn unit_square() -> Geometry {
        let r = Ring::from_open(vec![
            Point::new(0.0, 0.0),
            Point::new(1.0, 0.0),
            Point::new(1.0, 1.0),
            Point::new(0.0, 1.0),
        ])
        .unwrap();
        Geometry::polygon("sq", r)
    }

    #[test]
    fn ring_validation() {
        let open = vec![
            Point::new(0.0, 0.0),
            Point::new(1.0, 0.0),
            Point::new(1.0, 1.0),
        ];
        assert_eq!(
            Ring::new(open.clone()),
            Err(GeometryError::TooFewVertices(3))
        );
        let mut not_closed = open.clone();
        not_closed.push(Point::new(0.0, 1.0));
        assert_eq!(Ring::new(not_closed), Err(GeometryError::NotClosed));
        let mut nan = open;
        nan[1].x = f64::NAN;
        nan.push(nan[0]);
        assert_eq!(Ring::new(nan), Err(GeometryError::NonFinite(1)));
        assert!(Geometry::new("x", vec![]).is_err());
    }

    #[test]
    fn mean_of_unit_square_counts_closing_vertex() {
        let m = vertex_mean(&unit_square());
        assert!((m.x - 0.4).abs() < 1e-15 && (m.y - 0.4).abs() < 1e-15);
        let shifted = vertex_mean(&unit_square().translate(10.0, 10.0));
        assert!((shifted.x - 10.4).abs() < 1e-12 && (shifted.y - 10.4).abs() < 1e-12);
    }

    #[test]
    fn square_stats_and_scaling() {
        let s = stats(&unit_square());
        assert_eq!(s.vertex_count, 5);
        assert_eq!(s.area, 1.0);
        assert_eq!(s.boundary_length, 4.0);
        let s2 = stats(&unit_square().scale(2.0));
        assert_eq!(s2.area, 4.0);
        assert_eq!(s2.boundary_length, 8.0);
    }

    #[test]
    fn bowtie_area_cancels() {
        // Hand shoelace: 0*1-1*0 + 1*0-1*1 + 1*1-0*0 + 0*0-0*1 = 0.
        let r = Ring::from_open(vec![
            Point::new(0.0, 0.0),
            Point::new(1.0, 1.0),
            Point::new(1.0, 0.0),
            Point::new(0.0, 1.0),
        ])
        .unwrap();
        assert_eq!(r.area(), 0.0);
        assert!(r.perimeter() > 0.0);
    }

    #[test]
    fn collinear_midpoint_removed() {
        let r = Ring::from_open(vec![
            Point::new(0.0, 0.0),
            Point::new(1.0, 0.0),
            Point::new(2.0, 0.0),
            Point::new(2.0, 2.0),
            Point::new(0.0, 2.0),
        ])
        .unwrap();
        let s = douglas_peucker(&r, 0.0).unwrap();
        assert_eq!(s.len(), 5);
        assert!(!s.vertices().contains(&Point::new(1.0, 0.0)));
        let s = douglas_peucker(&r, 0.1).unwrap();
        assert_eq!(s.len(), 5);
        assert_eq!(s.vertices()[0], s.vertices()[4]);
    }

    #[test]
    fn zero_epsilon_keeps_non_collinear() {
        let r = Ring::from_open(vec![
            Point::new(0.0, 0.0),
            Point::new(1.0, 1e-9),
            Point::new(2.0, 0.0),
            Point::new(2.0, 2.0),
        ])
        .unwrap();
        assert_eq!(douglas_peucker(&r, 0.0).unwrap().len(), 5);
    }

    #[test]
    fn large_epsilon_keeps_a_valid_ring() {
        let r = Ring::from_open(vec![
            Point::new(0.0, 0.0),
            Point::new(1.0, 0.0),
            Point::new(1.0, 1.0),
            Point::new(0.0, 1.0),
        ])
        .unwrap();
        let s = douglas_peucker(&r, 100.0).unwrap();
        assert_eq!(s.len(), 4);
        assert!(douglas_peucker(&r, -1.0).is_err());
    }

    #[test]
    fn rotate_start_keeps_ring() {
        let r = unit_square().rings()[0].clone();
        let rot = r.rotate_start(2);
        assert_eq!(rot.vertices()[0], Point::new(1.0, 1.0));
        assert_eq!(rot.len(), 5);
        assert_eq!(rot.area(), 1.0);
    }
}
