use std::collections::HashMap;

use crate::error::{Error, Result};

pub type Point = [f64; 2];

/// A polygon ring stored open: the closing edge from the last vertex back
/// to the first is implicit.
#[derive(Debug, Clone, PartialEq)]
pub struct Ring(Vec<Point>);

impl Ring {
    /// Accepts rings with or without a repeated closing vertex.
    pub fn new(mut vertices: Vec<Point>) -> std::result::Result<Self, String> {
        if vertices.len() >= 2 && vertices.first() == vertices.last() {
            vertices.pop();
        }
        if vertices.len() < 3 {
            return Err(format!(
                "ring needs at least 3 distinct vertices, got {}",
                vertices.len()
            ));
        }
        if vertices.iter().any(|p| !p[0].is_finite() || !p[1].is_finite()) {
            return Err("non-finite vertex coordinate".into());
        }
        let ring = Ring(vertices);
        ring.check_simple()?;
        Ok(ring)
    }

    pub fn vertices(&self) -> &[Point] {
        &self.0
    }

    pub fn edges(&self) -> impl Iterator<Item = (Point, Point)> + '_ {
        let n = self.0.len();
        (0..n).map(move |k| (self.0[k], self.0[(k + 1) % n]))
    }

    fn check_simple(&self) -> std::result::Result<(), String> {
        let n = self.0.len();
        for a in 0..n {
            if self.0[a] == self.0[(a + 1) % n] {
                return Err(format!("zero-length edge at vertex {a}"));
            }
        }
        for a in 0..n {
            let (p1, p2) = (self.0[a], self.0[(a + 1) % n]);
            for b in (a + 1)..n {
                let (q1, q2) = (self.0[b], self.0[(b + 1) % n]);
                let adjacent = b == a + 1 || (a == 0 && b == n - 1);
                if adjacent {
                    // neighbouring edges may only meet at their shared vertex
                    let shared = if b == a + 1 { p2 } else { p1 };
                    let (other_a, other_b) = if b == a + 1 { (p1, q2) } else { (p2, q1) };
                    if collinear_overlap(p1, p2, q1, q2) > 0.0
                        || (other_a != shared && on_segment(other_a, q1, q2))
                        || (other_b != shared && on_segment(other_b, p1, p2))
                    {
                        return Err(format!("edges {a} and {b} overlap"));
                    }
                } else if segments_intersect(p1, p2, q1, q2) {
                    return Err(format!("edges {a} and {b} intersect"));
                }
            }
        }
        Ok(())
    }

    fn bbox(&self) -> [f64; 4] {
        bbox_of(self.0.iter())
    }
}

fn bbox_of<'a>(pts: impl Iterator<Item = &'a Point>) -> [f64; 4] {
    pts.fold(
        [f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY],
        |b, p| [b[0].min(p[0]), b[1].min(p[1]), b[2].max(p[0]), b[3].max(p[1])],
    )
}

fn cross(o: Point, a: Point, b: Point) -> f64 {
    (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
}

fn scale(a: Point, b: Point) -> f64 {
    (b[0] - a[0]).abs().max((b[1] - a[1]).abs()).max(1.0)
}

/// True if `p` lies on the closed segment `a`–`b`.
pub fn on_segment(p: Point, a: Point, b: Point) -> bool {
    let s = scale(a, b);
    if cross(a, b, p).abs() > 1e-12 * s * s {
        return false;
    }
    let eps = 1e-12 * s;
    p[0] >= a[0].min(b[0]) - eps
        && p[0] <= a[0].max(b[0]) + eps
        && p[1] >= a[1].min(b[1]) - eps
        && p[1] <= a[1].max(b[1]) + eps
}

fn segments_intersect(p1: Point, p2: Point, q1: Point, q2: Point) -> bool {
    let d1 = cross(q1, q2, p1);
    let d2 = cross(q1, q2, p2);
    let d3 = cross(p1, p2, q1);
    let d4 = cross(p1, p2, q2);
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0)) && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0)) {
        return true;
    }
    on_segment(p1, q1, q2) || on_segment(p2, q1, q2) || on_segment(q1, p1, p2) || on_segment(q2, p1, p2)
}

/// Length of the shared stretch of two collinear segments, 0 otherwise.
fn collinear_overlap(p1: Point, p2: Point, q1: Point, q2: Point) -> f64 {
    let s = scale(p1, p2).max(scale(q1, q2));
    let tol = 1e-12 * s * s;
    if cross(p1, p2, q1).abs() > tol || cross(p1, p2, q2).abs() > tol {
        return 0.0;
    }
    let dir = [p2[0] - p1[0], p2[1] - p1[1]];
    let len = (dir[0] * dir[0] + dir[1] * dir[1]).sqrt();
    let t = |p: Point| ((p[0] - p1[0]) * dir[0] + (p[1] - p1[1]) * dir[1]) / len;
    let (a0, a1) = (0.0_f64, len);
    let (b0, b1) = {
        let (u, v) = (t(q1), t(q2));
        (u.min(v), u.max(v))
    };
    (a1.min(b1) - a0.max(b0)).max(0.0)
}

/// The areal units of a study region, optionally with their geometry.
#[derive(Debug, Clone)]
pub struct ArealPartition {
    units: Vec<String>,
    index: HashMap<String, usize>,
    polygons: Option<Vec<Vec<Ring>>>,
}

impl ArealPartition {
    pub fn new(units: Vec<String>) -> Result<Self> {
        if units.len() < 2 {
            return Err(Error::InvalidArgument(format!(
                "a partition needs at least 2 units, got {}",
                units.len()
            )));
        }
        let mut index = HashMap::with_capacity(units.len());
        for (i, u) in units.iter().enumerate() {
            if index.insert(u.clone(), i).is_some() {
                return Err(Error::DuplicateUnit(u.clone()));
            }
        }
        Ok(Self {
            units,
            index,
            polygons: None,
        })
    }

    /// Attaches one or more rings per unit, in unit order.
    pub fn with_polygons(mut self, polygons: Vec<Vec<Ring>>) -> Result<Self> {
        if polygons.len() != self.units.len() {
            return Err(Error::DimensionMismatch {
                expected: self.units.len(),
                got: polygons.len(),
            });
        }
        for (unit, rings) in self.units.iter().zip(&polygons) {
            if rings.is_empty() {
                return Err(Error::InvalidPolygon {
                    unit: unit.clone(),
                    message: "no rings".into(),
                });
            }
        }
        self.polygons = Some(polygons);
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.units.len()
    }

    pub fn is_empty(&self) -> bool {
        self.units.is_empty()
    }

    pub fn units(&self) -> &[String] {
        &self.units
    }

    pub fn unit_id(&self, i: usize) -> &str {
        &self.units[i]
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }

    pub fn polygons(&self) -> Option<&[Vec<Ring>]> {
        self.polygons.as_deref()
    }

    /// Maps each point to the unit containing it. Points on a shared
    /// boundary go to the lowest-indexed unit that touches them.
    pub fn assign_points(&self, points: &[Point]) -> Result<Vec<Option<usize>>> {
        let polygons = self.polygons.as_ref().ok_or(Error::MissingPolygons)?;
        let boxes: Vec<[f64; 4]> = polygons
            .iter()
            .map(|rings| {
                let bbs: Vec<_> = rings.iter().map(Ring::bbox).collect();
                bbs.iter().fold(
                    [f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY],
                    |b, r| [b[0].min(r[0]), b[1].min(r[1]), b[2].max(r[2]), b[3].max(r[3])],
                )
            })
            .collect();
        Ok(points
            .iter()
            .map(|&p| {
                (0..polygons.len()).find(|&u| {
                    let b = boxes[u];
                    p[0] >= b[0] && p[0] <= b[2] && p[1] >= b[1] && p[1] <= b[3] && unit_contains(&polygons[u], p)
                })
            })
            .collect())
    }

    /// Pairs of units whose boundaries share a stretch of positive length.
    pub fn rook_edges(&self) -> Result<Vec<(usize, usize)>> {
        let polygons = self.polygons.as_ref().ok_or(Error::MissingPolygons)?;
        let boxes: Vec<[f64; 4]> = polygons
            .iter()
            .map(|rings| bbox_of(rings.iter().flat_map(|r| r.vertices().iter())))
            .collect();
        let mut edges = Vec::new();
        for i in 0..polygons.len() {
            for j in (i + 1)..polygons.len() {
                let (a, b) = (boxes[i], boxes[j]);
                if a[2] < b[0] || b[2] < a[0] || a[3] < b[1] || b[3] < a[1] {
                    continue;
                }
                let touches = polygons[i].iter().flat_map(Ring::edges).any(|(p1, p2)| {
                    polygons[j]
                        .iter()
                        .flat_map(Ring::edges)
                        .any(|(q1, q2)| collinear_overlap(p1, p2, q1, q2) > 1e-12)
                });
                if touches {
                    edges.push((i, j));
                }
            }
        }
        Ok(edges)
    }
}

/// Boundary-inclusive even-odd containment over all rings of a unit, so
/// inner rings act as holes.
fn unit_contains(rings: &[Ring], p: Point) -> bool {
    if rings.iter().flat_map(Ring::edges).any(|(a, b)| on_segment(p, a, b)) {
        return true;
    }
    let mut inside = false;
    for (a, b) in rings.iter().flat_map(Ring::edges) {
        if (a[1] > p[1]) != (b[1] > p[1]) {
            let x_cross = a[0] + (p[1] - a[1]) / (b[1] - a[1]) * (b[0] - a[0]);
            if p[0] < x_cross {
                inside = !inside;
            }
        }
    }
    inside
}
