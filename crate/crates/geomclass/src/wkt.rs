//! Well-known text for `POLYGON` and `MULTIPOLYGON`.

use std::fmt::Write as _;

use geomclass_core::{Geometry, GeometryError, Point, Ring};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum WktError {
    #[error("syntax error at byte {pos}: expected {expected}")]
    Syntax { pos: usize, expected: &'static str },
    #[error("unsupported geometry type {0:?}")]
    Unsupported(String),
    #[error("interior ring present in polygon {polygon}")]
    InteriorRing { polygon: usize },
    #[error("invalid ring {ring}: {source}")]
    Ring { ring: usize, source: GeometryError },
    #[error("empty geometry")]
    Empty,
}

struct Cursor<'a> {
    text: &'a str,
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn skip_ws(&mut self) {
        let rest = &self.text[self.pos..];
        self.pos += rest.len() - rest.trim_start().len();
    }

    fn peek(&mut self) -> Option<char> {
        self.skip_ws();
        self.text[self.pos..].chars().next()
    }

    fn err(&self, expected: &'static str) -> WktError {
        WktError::Syntax {
            pos: self.pos,
            expected,
        }
    }

    fn expect(&mut self, c: char, expected: &'static str) -> Result<(), WktError> {
        if self.peek() == Some(c) {
            self.pos += 1;
            Ok(())
        } else {
            Err(self.err(expected))
        }
    }

    fn word(&mut self) -> &'a str {
        self.skip_ws();
        let rest = &self.text[self.pos..];
        let len = rest
            .find(|c: char| !c.is_ascii_alphabetic())
            .unwrap_or(rest.len());
        self.pos += len;
        &rest[..len]
    }

    fn number(&mut self) -> Result<f64, WktError> {
        self.skip_ws();
        let rest = &self.text[self.pos..];
        let len = rest
            .find(|c: char| !(c.is_ascii_digit() || matches!(c, '+' | '-' | '.' | 'e' | 'E')))
            .unwrap_or(rest.len());
        let v = rest[..len].parse::<f64>().map_err(|_| self.err("number"))?;
        self.pos += len;
        Ok(v)
    }

    /// `(x y, x y, ...)`
    fn ring(&mut self) -> Result<Vec<Point>, WktError> {
        self.expect('(', "'('")?;
        let mut pts = Vec::new();
        loop {
            let x = self.number()?;
            let y = self.number()?;
            pts.push(Point::new(x, y));
            match self.peek() {
                Some(',') => self.pos += 1,
                Some(')') => {
                    self.pos += 1;
                    return Ok(pts);
                }
                _ => return Err(self.err("',' or ')'")),
            }
        }
    }

    /// `((ring), (ring)...)`, the rings of one polygon.
    fn polygon(&mut self) -> Result<Vec<Vec<Point>>, WktError> {
        self.expect('(', "'('")?;
        let mut rings = Vec::new();
        loop {
            rings.push(self.ring()?);
            match self.peek() {
                Some(',') => self.pos += 1,
                Some(')') => {
                    self.pos += 1;
                    return Ok(rings);
                }
                _ => return Err(self.err("',' or ')'")),
            }
        }
    }
}

/// Parses a `POLYGON` or `MULTIPOLYGON`; rings keep their input order.
pub fn parse_wkt(id: &str, text: &str) -> Result<Geometry, WktError> {
    let mut c = Cursor { text, pos: 0 };
    let start = {
        c.skip_ws();
        c.pos
    };
    let kind = c.word().to_ascii_uppercase();
    let polygons = match kind.as_str() {
        "POLYGON" => {
            if c.peek().is_some_and(|ch| ch.is_ascii_alphabetic()) {
                let _ = c.word();
                return Err(WktError::Empty);
            }
            vec![c.polygon()?]
        }
        "MULTIPOLYGON" => {
            if c.peek().is_some_and(|ch| ch.is_ascii_alphabetic()) {
                let _ = c.word();
                return Err(WktError::Empty);
            }
            c.expect('(', "'('")?;
            let mut polys = Vec::new();
            loop {
                polys.push(c.polygon()?);
                match c.peek() {
                    Some(',') => c.pos += 1,
                    Some(')') => {
                        c.pos += 1;
                        break;
                    }
                    _ => return Err(c.err("',' or ')'")),
                }
            }
            polys
        }
        "" => {
            c.pos = start;
            return Err(c.err("geometry type"));
        }
        other => return Err(WktError::Unsupported(other.to_string())),
    };
    if c.peek().is_some() {
        return Err(c.err("end of input"));
    }
    rings_to_geometry(id, polygons)
}

/// Builds a geometry from polygons given as ring lists, rejecting holes.
pub(crate) fn rings_to_geometry(
    id: &str,
    polygons: Vec<Vec<Vec<Point>>>,
) -> Result<Geometry, WktError> {
    let mut rings = Vec::with_capacity(polygons.len());
    for (pi, mut poly) in polygons.into_iter().enumerate() {
        if poly.len() > 1 {
            return Err(WktError::InteriorRing { polygon: pi });
        }
        let ring = poly.pop().ok_or(WktError::Empty)?;
        rings.push(Ring::new(ring).map_err(|source| WktError::Ring { ring: pi, source })?);
    }
    Geometry::new(id, rings).map_err(|source| WktError::Ring { ring: 0, source })
}

/// Writes `POLYGON` for one ring and `MULTIPOLYGON` otherwise. Coordinates
/// use the shortest text that parses back to the same double.
pub fn to_wkt(g: &Geometry) -> String {
    let ring_text = |r: &Ring| {
        let mut s = String::from("(");
        for (i, p) in r.vertices().iter().enumerate() {
            if i > 0 {
                s.push_str(", ");
            }
            let _ = write!(s, "{} {}", p.x, p.y);
        }
        s.push(')');
        s
    };
    if g.rings().len() == 1 {
        format!("POLYGON ({})", ring_text(&g.rings()[0]))
    } else {
        let parts: Vec<String> = g
            .rings()
            .iter()
            .map(|r| format!("({})", ring_text(r)))
            .collect();
        format!("MULTIPOLYGON ({})", parts.join(", "))
    }
}
