//! Seeded synthetic polygon classification tasks.
//!
//! Every sample draws from its own ChaCha8 stream, selected by
//! `(class, index)`, so any subset can be regenerated independently and in
//! any order.

use alloc::format;
use alloc::vec::Vec;
use core::f64::consts::{PI, TAU};

#[allow(unused_imports)] // inherent on newer toolchains
use num_traits::Float;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::exec::Executor;
use crate::geometry::{Geometry, Point, Ring};

pub const PRNG_NAME: &str = "ChaCha8";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ShapeClass {
    Triangle,
    Rectangle,
    Ellipse64,
    Lshape,
    Star5,
}

impl ShapeClass {
    pub const ALL: [ShapeClass; 5] = [
        ShapeClass::Triangle,
        ShapeClass::Rectangle,
        ShapeClass::Ellipse64,
        ShapeClass::Lshape,
        ShapeClass::Star5,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ShapeClass::Triangle => "triangle",
            ShapeClass::Rectangle => "rectangle",
            ShapeClass::Ellipse64 => "ellipse64",
            ShapeClass::Lshape => "lshape",
            ShapeClass::Star5 => "star5",
        }
    }

    pub fn parse(s: &str) -> Option<ShapeClass> {
        ShapeClass::ALL.into_iter().find(|c| c.name() == s)
    }

    /// Inclusive range of open vertex counts. Samples above the base
    /// shape's count get extra vertices on its edges.
    pub fn vertex_range(self) -> (usize, usize) {
        match self {
            ShapeClass::Triangle => (3, 8),
            ShapeClass::Rectangle => (4, 8),
            ShapeClass::Ellipse64 => (64, 64),
            ShapeClass::Lshape => (6, 10),
            ShapeClass::Star5 => (10, 14),
        }
    }

    /// Untransformed open vertex list, roughly unit sized around the origin.
    pub fn base_shape(self) -> Vec<Point> {
        match self {
            ShapeClass::Triangle => alloc::vec![
                Point::new(0.0, 0.0),
                Point::new(1.0, 0.0),
                Point::new(0.3, 0.8)
            ],
            ShapeClass::Rectangle => rectangle(2.0),
            ShapeClass::Ellipse64 => (0..64)
                .map(|k| {
                    let t = TAU * k as f64 / 64.0;
                    Point::new(t.cos(), t.sin() / 1.5)
                })
                .collect(),
            ShapeClass::Lshape => alloc::vec![
                Point::new(0.0, 0.0),
                Point::new(2.0, 0.0),
                Point::new(2.0, 0.6),
                Point::new(0.6, 0.6),
                Point::new(0.6, 2.0),
                Point::new(0.0, 2.0),
            ],
            ShapeClass::Star5 => (0..10)
                .map(|k| {
                    let t = PI / 2.0 + PI * k as f64 / 5.0;
                    let r = if k % 2 == 0 { 1.0 } else { 0.45 };
                    Point::new(1.25 * r * t.cos(), r * t.sin())
                })
                .collect(),
        }
    }
}

fn rectangle(aspect: f64) -> Vec<Point> {
    let (w, h) = (aspect / 2.0, 0.5);
    alloc::vec![
        Point::new(-w, -h),
        Point::new(w, -h),
        Point::new(w, h),
        Point::new(-w, h)
    ]
}

/// Adds `extra` vertices at uniformly random arc-length positions along
/// the closed outline; the outline itself is unchanged.
pub fn densify<R: Rng + ?Sized>(base: &[Point], extra: usize, rng: &mut R) -> Vec<Point> {
    let n = base.len();
    let lengths: Vec<f64> = (0..n)
        .map(|i| base[i].distance(base[(i + 1) % n]))
        .collect();
    let total: f64 = lengths.iter().sum();
    let mut at: Vec<f64> = (0..extra).map(|_| rng.random_range(0.0..total)).collect();
    at.sort_by(f64::total_cmp);
    let mut out = Vec::with_capacity(n + extra);
    let (mut start, mut k) = (0.0, 0);
    for i in 0..n {
        out.push(base[i]);
        let (a, b) = (base[i], base[(i + 1) % n]);
        while k < at.len() && at[k] < start + lengths[i] {
            let t = (at[k] - start) / lengths[i];
            out.push(Point::new(a.x + t * (b.x - a.x), a.y + t * (b.y - a.y)));
            k += 1;
        }
        start += lengths[i];
    }
    // Positions lost to rounding at the very end land on the closing edge.
    while out.len() < n + extra {
        let (a, b) = (base[n - 1], base[0]);
        out.push(Point::new((a.x + b.x) / 2.0, (a.y + b.y) / 2.0));
    }
    out
}

/// Random placement and noise applied to every base shape.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Placement {
    pub scale: (f64, f64),
    pub field: f64,
    /// Jitter standard deviation as a fraction of the shape diameter.
    pub jitter: f64,
}

impl Default for Placement {
    fn default() -> Self {
        Self {
            scale: (0.5, 2.0),
            field: 100.0,
            jitter: 0.02,
        }
    }
}

/// Deterministic generator for one sample stream.
pub fn sample_rng(seed: u64, class: usize, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((class as u64) << 32) | index as u64);
    rng
}

fn diameter(pts: &[Point]) -> f64 {
    let mut d = 0.0f64;
    for (i, a) in pts.iter().enumerate() {
        for b in &pts[i + 1..] {
            d = d.max(a.distance(*b));
        }
    }
    d
}

/// Rotates, scales, translates, jitters and start-shifts `base`.
pub fn place(base: &[Point], placement: &Placement, rng: &mut ChaCha8Rng) -> Ring {
    let theta = rng.random_range(0.0..TAU);
    let scale = rng.random_range(placement.scale.0..=placement.scale.1);
    let n = base.len() as f64;
    let cx = base.iter().map(|p| p.x).sum::<f64>() / n;
    let cy = base.iter().map(|p| p.y).sum::<f64>() / n;
    let (sin, cos) = theta.sin_cos();
    let mut pts: Vec<Point> = base
        .iter()
        .map(|p| {
            let (x, y) = ((p.x - cx) * scale, (p.y - cy) * scale);
            Point::new(x * cos - y * sin, x * sin + y * cos)
        })
        .collect();
    let margin = 0.1 * placement.field;
    let tx = rng.random_range(margin..placement.field - margin);
    let ty = rng.random_range(margin..placement.field - margin);
    let sigma = placement.jitter * diameter(&pts);
    for p in &mut pts {
        let (jx, jy): (f64, f64) = if sigma > 0.0 {
            (StandardNormal.sample(rng), StandardNormal.sample(rng))
        } else {
            (0.0, 0.0)
        };
        *p = Point::new(p.x + tx + sigma * jx, p.y + ty + sigma * jy);
    }
    let shift = rng.random_range(0..pts.len());
    pts.rotate_left(shift);
    Ring::from_open(pts).expect("generated shapes are finite with at least three vertices")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledGeometry {
    pub geometry: Geometry,
    pub label: usize,
}

/// `per_class` samples of every class in `classes`, ordered by
/// `(class, index)`. Labels are positions in `classes`.
pub fn generate<E: Executor>(
    classes: &[ShapeClass],
    per_class: usize,
    seed: u64,
    placement: &Placement,
    exec: &E,
) -> Vec<LabeledGeometry> {
    let jobs: Vec<(usize, usize)> = (0..classes.len())
        .flat_map(|c| (0..per_class).map(move |i| (c, i)))
        .collect();
    exec.map(&jobs, |&(c, i)| {
        let mut rng = sample_rng(seed, c, i);
        let base = classes[c].base_shape();
        let (lo, hi) = classes[c].vertex_range();
        let count = rng.random_range(lo..=hi.max(lo));
        let base = densify(&base, count.saturating_sub(base.len()), &mut rng);
        let ring = place(&base, placement, &mut rng);
        LabeledGeometry {
            geometry: Geometry::polygon(format!("{}-{:05}", classes[c].name(), i), ring),
            label: c,
        }
    })
}

/// Two rectangle classes told apart only by aspect ratio.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HardPair {
    /// Uniform aspect-ratio range of class 0.
    pub a: (f64, f64),
    /// Uniform aspect-ratio range of class 1.
    pub b: (f64, f64),
}

impl Default for HardPair {
    /// Unit-width ranges overlapping on 30% of their support.
    fn default() -> Self {
        Self {
            a: (1.0, 2.0),
            b: (1.7, 2.7),
        }
    }
}

impl HardPair {
    /// Accuracy of the Bayes rule on aspect ratio with equal priors:
    /// `½ ∫ max(f_a, f_b)` for the two uniform densities.
    pub fn bayes_accuracy(&self) -> f64 {
        let (wa, wb) = (self.a.1 - self.a.0, self.b.1 - self.b.0);
        let overlap = (self.a.1.min(self.b.1) - self.a.0.max(self.b.0)).max(0.0);
        let outside = (wa - overlap) / wa + (wb - overlap) / wb;
        0.5 * (outside + overlap * (1.0 / wa).max(1.0 / wb))
    }

    pub fn overlap_fraction(&self) -> f64 {
        let overlap = (self.a.1.min(self.b.1) - self.a.0.max(self.b.0)).max(0.0);
        overlap / (self.a.1 - self.a.0).max(self.b.1 - self.b.0)
    }
}

/// Hard-pair dataset without vertex jitter, ordered by `(class, index)`.
pub fn generate_hard_pair<E: Executor>(
    pair: &HardPair,
    per_class: usize,
    seed: u64,
    exec: &E,
) -> Vec<LabeledGeometry> {
    let placement = Placement {
        jitter: 0.0,
        ..Placement::default()
    };
    let jobs: Vec<(usize, usize)> = (0..2)
        .flat_map(|c| (0..per_class).map(move |i| (c, i)))
        .collect();
    exec.map(&jobs, |&(c, i)| {
        let mut rng = sample_rng(seed, c, i);
        let (lo, hi) = if c == 0 { pair.a } else { pair.b };
        let aspect = if hi > lo {
            rng.random_range(lo..hi)
        } else {
            lo
        };
        let ring = place(&rectangle(aspect), &placement, &mut rng);
        LabeledGeometry {
            geometry: Geometry::polygon(format!("pair{}-{:05}", c, i), ring),
            label: c,
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::efd::{efd, normalize_efd, normalized_distance};
    use crate::exec::Sequential;

    #[test]
    fn counts_and_reproducibility() {
        let a = generate(&ShapeClass::ALL, 20, 7, &Placement::default(), &Sequential);
        let b = generate(&ShapeClass::ALL, 20, 7, &Placement::default(), &Sequential);
        assert_eq!(a.len(), 100);
        assert_eq!(a, b);
        for c in 0..5 {
            assert_eq!(a.iter().filter(|s| s.label == c).count(), 20);
        }
        let other = generate(&ShapeClass::ALL, 20, 8, &Placement::default(), &Sequential);
        assert_ne!(a, other);
    }

    #[test]
    fn vertex_counts_follow_class_ranges() {
        let data = generate(&ShapeClass::ALL, 40, 4, &Placement::default(), &Sequential);
        for (c, class) in ShapeClass::ALL.iter().enumerate() {
            let (lo, hi) = class.vertex_range();
            let counts: Vec<usize> = data
                .iter()
                .filter(|s| s.label == c)
                .map(|s| s.geometry.vertex_count() - 1)
                .collect();
            assert!(counts.iter().all(|&n| n >= lo && n <= hi), "{counts:?}");
            if hi > lo {
                assert!(counts.iter().any(|&n| n != counts[0]));
            }
        }
    }

    #[test]
    fn densify_keeps_the_outline() {
        let base = ShapeClass::Lshape.base_shape();
        let mut rng = sample_rng(0, 0, 0);
        let dense = densify(&base, 25, &mut rng);
        assert_eq!(dense.len(), base.len() + 25);
        let ring = Ring::from_open(base.clone()).unwrap();
        for p in &dense {
            let d = ring
                .edges()
                .map(|(a, b)| crate::geometry::segment_distance(*p, a, b))
                .fold(f64::INFINITY, f64::min);
            assert!(d < 1e-12);
        }
        // Original vertices keep their relative order.
        let pos: Vec<usize> = base
            .iter()
            .map(|b| dense.iter().position(|p| p == b).unwrap())
            .collect();
        assert!(pos.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn rings_are_valid_and_in_the_field() {
        for s in generate(&ShapeClass::ALL, 30, 1, &Placement::default(), &Sequential) {
            let ring = &s.geometry.rings()[0];
            assert!(ring.len() >= 4);
            assert_eq!(ring.vertices()[0], ring.vertices()[ring.len() - 1]);
            assert!(ring
                .vertices()
                .iter()
                .all(|p| p.is_finite() && p.x > -10.0 && p.x < 110.0));
        }
    }

    #[test]
    fn classes_separate_in_normalized_descriptor_space() {
        let placement = Placement {
            jitter: 0.0,
            ..Placement::default()
        };
        let data = generate(
            &[ShapeClass::Rectangle, ShapeClass::Star5],
            12,
            3,
            &placement,
            &Sequential,
        );
        let desc: Vec<_> = data
            .iter()
            .map(|s| normalize_efd(&efd(&s.geometry.rings()[0], 4).unwrap()).unwrap())
            .collect();
        let (mut intra, mut inter) = (0.0f64, f64::INFINITY);
        for i in 0..desc.len() {
            for j in i + 1..desc.len() {
                let d = normalized_distance(&desc[i], &desc[j]);
                if data[i].label == data[j].label {
                    intra = intra.max(d);
                } else {
                    inter = inter.min(d);
                }
            }
        }
        assert!(inter >= 10.0 * intra, "inter {inter} intra {intra}");
    }

    #[test]
    fn hard_pair_bayes_accuracy() {
        assert!((HardPair::default().bayes_accuracy() - 0.85).abs() < 1e-12);
        assert!((HardPair::default().overlap_fraction() - 0.3).abs() < 1e-12);
        let same = HardPair {
            a: (1.0, 2.0),
            b: (1.0, 2.0),
        };
        assert!((same.bayes_accuracy() - 0.5).abs() < 1e-12);
        let apart = HardPair {
            a: (1.0, 1.5),
            b: (2.0, 2.5),
        };
        assert_eq!(apart.bayes_accuracy(), 1.0);
        // Monte Carlo check of the closed form with the Bayes rule
        // "class 1 iff aspect > 1.7" on the overlap boundary.
        let data = generate_hard_pair(&HardPair::default(), 2000, 5, &Sequential);
        let hits = data
            .iter()
            .filter(|s| {
                let r = &s.geometry.rings()[0];
                let v = r.vertices();
                let (e1, e2) = (v[0].distance(v[1]), v[1].distance(v[2]));
                let aspect = e1.max(e2) / e1.min(e2);
                (aspect > 1.7) as usize == s.label
            })
            .count();
        let acc = hits as f64 / data.len() as f64;
        assert!((acc - 0.85).abs() < 0.02, "{acc}");
    }
}
