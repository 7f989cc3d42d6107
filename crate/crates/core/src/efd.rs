//! Elliptic Fourier descriptors of closed contours (Kuhl and Giardina, 1982).
//!
//! A ring is read as a piecewise-linear closed curve parametrized by arc
//! length `t ∈ [0, T)`. Each harmonic `n` contributes an ellipse
//! `(a_n cos(2πnt/T) + b_n sin(2πnt/T), c_n cos(2πnt/T) + d_n sin(2πnt/T))`
//! around the locus `(A0, C0)`.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::f64::consts::PI;
#[allow(unused_imports)] // inherent on newer toolchains
use num_traits::Float;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{self, Geometry, Point, Ring};

/// Version tag of the [`FeatureLayout`] column order.
pub const FEATURE_LAYOUT_VERSION: u32 = 1;

/// Descriptor orders searched for the shallow models.
pub const ORDER_GRID: [usize; 11] = [0, 1, 2, 3, 4, 6, 8, 12, 16, 20, 24];

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EfdError {
    #[error("descriptor order must be at least 1")]
    ZeroOrder,
    #[error("ring has zero perimeter")]
    DegenerateRing,
    #[error("first harmonic is degenerate, cannot normalize")]
    DegenerateFirstHarmonic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EfdCoefficients {
    /// Rows `(a_n, b_n, c_n, d_n)` for `n = 1..=order`.
    pub harmonics: Vec<[f64; 4]>,
    /// DC component `(A0, C0)`.
    pub locus: Point,
}

impl EfdCoefficients {
    pub fn order(&self) -> usize {
        self.harmonics.len()
    }

    /// Coefficients flattened as `a1 b1 c1 d1 a2 ...`.
    pub fn flat(&self) -> impl Iterator<Item = f64> + '_ {
        self.harmonics.iter().flat_map(|h| h.iter().copied())
    }

    /// The other valid normalization of the same contour: starting the
    /// parameter half a period later flips the sign of every even harmonic.
    pub fn sign_variant(&self) -> EfdCoefficients {
        EfdCoefficients {
            harmonics: self
                .harmonics
                .iter()
                .enumerate()
                .map(|(i, h)| if (i + 1) % 2 == 0 { h.map(|v| -v) } else { *h })
                .collect(),
            locus: self.locus,
        }
    }
}

/// Euclidean distance between two normalized descriptor sets, taking the
/// closer of the two sign variants of `b`.
pub fn normalized_distance(a: &EfdCoefficients, b: &EfdCoefficients) -> f64 {
    let d = |x: &EfdCoefficients, y: &EfdCoefficients| -> f64 {
        x.flat()
            .zip(y.flat())
            .map(|(u, v)| (u - v) * (u - v))
            .sum::<f64>()
            .sqrt()
    };
    d(a, b).min(d(a, &b.sign_variant()))
}

struct Edges {
    dx: Vec<f64>,
    dy: Vec<f64>,
    dt: Vec<f64>,
    /// Cumulative arc length at the end of each edge; `t[0] = 0` is implied.
    t: Vec<f64>,
    perimeter: f64,
}

fn edges(ring: &Ring) -> Result<Edges, EfdError> {
    let mut e = Edges {
        dx: Vec::new(),
        dy: Vec::new(),
        dt: Vec::new(),
        t: Vec::new(),
        perimeter: 0.0,
    };
    for (a, b) in ring.edges() {
        let (dx, dy) = (b.x - a.x, b.y - a.y);
        let dt = dx.hypot(dy);
        if dt == 0.0 {
            continue;
        }
        e.perimeter += dt;
        e.dx.push(dx);
        e.dy.push(dy);
        e.dt.push(dt);
        e.t.push(e.perimeter);
    }
    if e.perimeter == 0.0 || !e.perimeter.is_finite() {
        return Err(EfdError::DegenerateRing);
    }
    Ok(e)
}

pub fn efd(ring: &Ring, order: usize) -> Result<EfdCoefficients, EfdError> {
    if order == 0 {
        return Err(EfdError::ZeroOrder);
    }
    let e = edges(ring)?;
    let tt = e.perimeter;
    let mut harmonics = Vec::with_capacity(order);
    for n in 1..=order {
        let nf = n as f64;
        let scale = tt / (2.0 * nf * nf * PI * PI);
        let (mut a, mut b, mut c, mut d) = (0.0, 0.0, 0.0, 0.0);
        let (mut prev_cos, mut prev_sin) = (1.0, 0.0);
        for p in 0..e.dt.len() {
            let phase = 2.0 * PI * nf * e.t[p] / tt;
            let (s, co) = phase.sin_cos();
            let dcos = co - prev_cos;
            let dsin = s - prev_sin;
            let rx = e.dx[p] / e.dt[p];
            let ry = e.dy[p] / e.dt[p];
            a += rx * dcos;
            b += rx * dsin;
            c += ry * dcos;
            d += ry * dsin;
            prev_cos = co;
            prev_sin = s;
        }
        harmonics.push([scale * a, scale * b, scale * c, scale * d]);
    }
    Ok(EfdCoefficients {
        harmonics,
        locus: locus(ring, &e),
    })
}

/// DC components of the contour.
fn locus(ring: &Ring, e: &Edges) -> Point {
    let start = ring.vertices()[0];
    let dc = |delta: &[f64], origin: f64| -> f64 {
        let mut cum = 0.0;
        let mut t_prev = 0.0;
        let mut acc = 0.0;
        for ((&d, &dt), &t) in delta.iter().zip(&e.dt).zip(&e.t) {
            cum += d;
            let rate = d / dt;
            let xi = cum - rate * t;
            acc += rate / 2.0 * (t * t - t_prev * t_prev) + xi * (t - t_prev);
            t_prev = t;
        }
        acc / e.perimeter + origin
    };
    Point::new(dc(&e.dx, start.x), dc(&e.dy, start.y))
}

/// Start-point, rotation, scale and translation normalization.
///
/// The result has `a1 = 1`, `b1 = c1 = 0`, `|d1| ≤ 1` and a zero locus.
pub fn normalize_efd(c: &EfdCoefficients) -> Result<EfdCoefficients, EfdError> {
    let [a1, b1, c1, d1] = *c.harmonics.first().ok_or(EfdError::ZeroOrder)?;
    let theta = 0.5 * (2.0 * (a1 * b1 + c1 * d1)).atan2(a1 * a1 + c1 * c1 - b1 * b1 - d1 * d1);

    let mut rows: Vec<[f64; 4]> = c
        .harmonics
        .iter()
        .enumerate()
        .map(|(i, &[a, b, c, d])| {
            let (s, co) = ((i + 1) as f64 * theta).sin_cos();
            [
                a * co + b * s,
                -a * s + b * co,
                c * co + d * s,
                -c * s + d * co,
            ]
        })
        .collect();

    let psi = rows[0][2].atan2(rows[0][0]);
    let (s, co) = psi.sin_cos();
    for r in rows.iter_mut() {
        let [a, b, c, d] = *r;
        *r = [
            co * a + s * c,
            co * b + s * d,
            -s * a + co * c,
            -s * b + co * d,
        ];
    }

    let size = rows[0][0];
    let magnitude = c.flat().map(|v| v.abs()).fold(0.0, f64::max);
    if !size.is_finite() || size <= 1e-12 * magnitude || magnitude.is_nan() {
        return Err(EfdError::DegenerateFirstHarmonic);
    }
    for r in rows.iter_mut() {
        for v in r.iter_mut() {
            *v /= size;
        }
    }
    // Exact by construction; clears rounding residue.
    rows[0][0] = 1.0;
    rows[0][1] = 0.0;
    rows[0][2] = 0.0;
    Ok(EfdCoefficients {
        harmonics: rows,
        locus: Point::new(0.0, 0.0),
    })
}

/// Evaluates the truncated series at `samples` uniformly spaced parameters
/// `t = k / samples`, `k = 0..samples`.
pub fn reconstruct(c: &EfdCoefficients, samples: usize) -> Vec<Point> {
    (0..samples)
        .map(|k| evaluate(c, k as f64 / samples as f64))
        .collect()
}

/// Point on the series at normalized parameter `u ∈ [0, 1)`.
pub fn evaluate(c: &EfdCoefficients, u: f64) -> Point {
    let mut x = c.locus.x;
    let mut y = c.locus.y;
    for (i, &[a, b, cc, d]) in c.harmonics.iter().enumerate() {
        let (s, co) = (2.0 * PI * (i + 1) as f64 * u).sin_cos();
        x += a * co + b * s;
        y += cc * co + d * s;
    }
    Point::new(x, y)
}

/// Column order of a [`FeatureVector`] of a given descriptor order.
///
/// For `order ≥ 1`: locus `(A0, C0)`, raw `a_n b_n c_n d_n` for every
/// harmonic, normalized `a_n b_n c_n d_n` for every harmonic, then area,
/// vertex count and boundary length. For `order = 0` only the last three.
/// Descriptors come from the geometry's largest-area ring; the three scalar
/// measurements cover the whole geometry.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureLayout {
    pub order: usize,
}

impl FeatureLayout {
    pub fn new(order: usize) -> Self {
        Self { order }
    }

    pub fn len(&self) -> usize {
        if self.order == 0 {
            3
        } else {
            3 + 8 * self.order + 2
        }
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn names(&self) -> Vec<String> {
        let mut names = Vec::with_capacity(self.len());
        if self.order > 0 {
            names.push("locus_x".into());
            names.push("locus_y".into());
            for prefix in ["efd", "efd_norm"] {
                for n in 1..=self.order {
                    for k in ["a", "b", "c", "d"] {
                        names.push(format!("{prefix}_{k}{n}"));
                    }
                }
            }
        }
        names.push("area".into());
        names.push("vertex_count".into());
        names.push("boundary_length".into());
        names
    }

    /// Indices of this layout's columns inside a wider layout of
    /// `max_order`. Raw harmonics do not depend on how many are computed, so
    /// every lower-order feature vector is a column subset of a higher one.
    pub fn columns_within(&self, max_order: usize) -> Vec<usize> {
        assert!(self.order <= max_order, "order exceeds available columns");
        let wide = FeatureLayout::new(max_order);
        let tail = wide.len() - 3;
        let mut cols = Vec::with_capacity(self.len());
        if self.order > 0 {
            cols.extend([0, 1]);
            cols.extend(2..2 + 4 * self.order);
            let norm_start = 2 + 4 * max_order;
            cols.extend(norm_start..norm_start + 4 * self.order);
        }
        cols.extend(tail..tail + 3);
        cols
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub layout: FeatureLayout,
    pub values: Vec<f64>,
}

pub fn features(g: &Geometry, order: usize) -> Result<FeatureVector, EfdError> {
    let layout = FeatureLayout::new(order);
    let mut values = Vec::with_capacity(layout.len());
    if order > 0 {
        let ring = &g.rings()[g.largest_ring()];
        let raw = efd(ring, order)?;
        let norm = normalize_efd(&raw)?;
        values.push(raw.locus.x);
        values.push(raw.locus.y);
        values.extend(raw.flat());
        values.extend(norm.flat());
    }
    let s = geometry::stats(g);
    values.push(s.area);
    values.push(s.vertex_count as f64);
    values.push(s.boundary_length);
    Ok(FeatureVector { layout, values })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn square() -> Ring {
        Ring::from_open(vec![
            Point::new(0.0, 0.0),
            Point::new(1.0, 0.0),
            Point::new(1.0, 1.0),
            Point::new(0.0, 1.0),
        ])
        .unwrap()
    }

    fn polygon_circle(n: usize, r: f64) -> Ring {
        Ring::from_open(
            (0..n)
                .map(|k| {
                    let a = 2.0 * PI * k as f64 / n as f64;
                    Point::new(r * a.cos(), r * a.sin())
                })
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn square_first_harmonic_is_an_ellipse() {
        let c = efd(&square(), 1).unwrap();
        let [a, b, cc, d] = c.harmonics[0];
        assert!(a * a + b * b > 0.0);
        assert!(cc * cc + d * d > 0.0);
    }

    #[test]
    fn square_locus_is_its_centre() {
        let c = efd(&square(), 3).unwrap();
        assert!((c.locus.x - 0.5).abs() < 1e-12, "{:?}", c.locus);
        assert!((c.locus.y - 0.5).abs() < 1e-12, "{:?}", c.locus);
    }

    #[test]
    fn zero_order_and_degenerate_ring_rejected() {
        assert_eq!(efd(&square(), 0), Err(EfdError::ZeroOrder));
        let p = Point::new(1.0, 1.0);
        let dot = Ring::new(vec![p, p, p, p]).unwrap();
        assert_eq!(efd(&dot, 2), Err(EfdError::DegenerateRing));
    }

    #[test]
    fn zero_length_edges_are_dropped() {
        let v = square().vertices().to_vec();
        let mut dup = v.clone();
        dup.insert(2, v[2]);
        let a = efd(&square(), 5).unwrap();
        let b = efd(&Ring::new(dup).unwrap(), 5).unwrap();
        for (x, y) in a.flat().zip(b.flat()) {
            assert!((x - y).abs() < 1e-14);
        }
    }

    #[test]
    fn normalized_first_harmonic_shape() {
        let r = Ring::from_open(vec![
            Point::new(0.0, 0.0),
            Point::new(3.0, 0.5),
            Point::new(2.5, 1.7),
            Point::new(0.4, 1.1),
        ])
        .unwrap();
        let n = normalize_efd(&efd(&r, 6).unwrap()).unwrap();
        let [a, b, c, d] = n.harmonics[0];
        assert_eq!((a, b, c), (1.0, 0.0, 0.0));
        assert!(d.abs() <= 1.0 + 1e-9);
        assert_eq!(n.locus, Point::new(0.0, 0.0));
    }

    #[test]
    fn circle_has_unit_axis_ratio() {
        let n = normalize_efd(&efd(&polygon_circle(64, 3.0), 4).unwrap()).unwrap();
        assert!((n.harmonics[0][3].abs() - 1.0).abs() < 1e-2);
    }

    #[test]
    fn reconstructed_first_order_is_an_ellipse() {
        let r = Ring::from_open(vec![
            Point::new(0.0, 0.0),
            Point::new(4.0, 0.0),
            Point::new(5.0, 2.0),
            Point::new(1.0, 3.0),
            Point::new(-1.0, 1.0),
        ])
        .unwrap();
        let c = efd(&r, 1).unwrap();
        let [a, b, cc, d] = c.harmonics[0];
        // Inverting the linear map x - A0 = a cos + b sin, y - C0 = c cos + d sin
        // gives (cos, sin); on an ellipse cos² + sin² = 1.
        let det = a * d - b * cc;
        for p in reconstruct(&c, 50) {
            let (u, v) = (p.x - c.locus.x, p.y - c.locus.y);
            let co = (d * u - b * v) / det;
            let si = (-cc * u + a * v) / det;
            assert!((co * co + si * si - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn layout_lengths() {
        for o in ORDER_GRID {
            let l = FeatureLayout::new(o);
            assert_eq!(l.names().len(), l.len());
            assert_eq!(l.len(), if o == 0 { 3 } else { 3 + 8 * o + 2 });
        }
        assert_eq!(FeatureLayout::new(4).len(), 37);
    }

    #[test]
    fn order_zero_features_of_unit_square() {
        let g = Geometry::polygon("sq", square());
        assert_eq!(features(&g, 0).unwrap().values, vec![1.0, 5.0, 4.0]);
    }

    #[test]
    fn lower_order_features_are_a_column_subset() {
        let g = Geometry::polygon(
            "p",
            Ring::from_open(vec![
                Point::new(0.0, 0.0),
                Point::new(3.0, 0.5),
                Point::new(2.5, 1.7),
                Point::new(0.4, 1.1),
            ])
            .unwrap(),
        );
        let wide = features(&g, 8).unwrap();
        for o in [0, 1, 3, 8] {
            let narrow = features(&g, o).unwrap();
            let picked: Vec<f64> = FeatureLayout::new(o)
                .columns_within(8)
                .into_iter()
                .map(|j| wide.values[j])
                .collect();
            assert_eq!(picked, narrow.values, "order {o}");
        }
    }

    #[test]
    fn multipolygon_uses_largest_ring() {
        let small = square();
        let big = small.map_points(|p| Point::new(p.x * 3.0 + 10.0, p.y * 3.0));
        let g = Geometry::new("m", vec![small, big.clone()]).unwrap();
        let f = features(&g, 2).unwrap();
        let alone = features(&Geometry::polygon("b", big), 2).unwrap();
        assert_eq!(f.values[..18], alone.values[..18]);
        assert_eq!(f.values[18], 10.0);
    }
}
