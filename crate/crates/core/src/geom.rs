//! Signed distance, boundary projection and its gradient for simple polygons.
//!
//! A [`PolygonDomain`] is a simple, counter-clockwise polygon that may translate
//! at a constant velocity. All queries take a time `t` and are answered on the
//! reference polygon after shifting the query point back by the accumulated
//! translation, so the shape never changes.
//!
//! The signed distance `b(x)` is negative inside, positive outside and zero on
//! the boundary. Where `b` is differentiable its gradient is `(x - P(x)) / b(x)`,
//! `P(x)` being the nearest boundary point.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::vec2::Vec2;

/// Half-width of the band around the boundary where a point counts as on it.
pub const BOUNDARY_EPS: f64 = 1e-9;

/// Two candidate projections closer than this are treated as a tie and the
/// lower-indexed feature wins.
const TIE_EPS: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeomError {
    #[error("polygon needs at least 3 vertices, got {0}")]
    TooFewVertices(usize),
    #[error("vertex {0} is not finite")]
    NonFiniteVertex(usize),
    #[error("consecutive vertices {0} and {1} coincide")]
    RepeatedVertex(usize, usize),
    #[error("edges {0} and {1} intersect; polygon is not simple")]
    SelfIntersecting(usize, usize),
    #[error("vertices must be ordered counter-clockwise (signed area {0})")]
    NotCounterClockwise(f64),
    #[error("domain velocity or reference time is not finite")]
    NonFiniteMotion,
    #[error("query point is on the boundary (|b| = {0:e}); gradient undefined")]
    OnBoundary(f64),
}

/// Which part of the boundary a projection landed on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Feature {
    /// Interior of edge `k`, running from vertex `k` to vertex `k + 1`.
    Edge(usize),
    Vertex(usize),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryProjection {
    /// Nearest boundary point, in world coordinates at the query time.
    pub point: Vec2,
    pub feature: Feature,
    /// Signed distance `b(x)`.
    pub distance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "DomainSpec", into = "DomainSpec")]
pub struct PolygonDomain {
    vertices: Vec<Vec2>,
    velocity: Vec2,
    reference_time: f64,
}

/// Unvalidated serialized form of a [`PolygonDomain`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DomainSpec {
    pub vertices: Vec<Vec2>,
    #[serde(default)]
    pub velocity: Vec2,
    #[serde(default)]
    pub reference_time: f64,
}

impl TryFrom<DomainSpec> for PolygonDomain {
    type Error = GeomError;
    fn try_from(spec: DomainSpec) -> Result<Self, GeomError> {
        PolygonDomain::moving(spec.vertices, spec.velocity, spec.reference_time)
    }
}

impl From<PolygonDomain> for DomainSpec {
    fn from(d: PolygonDomain) -> Self {
        DomainSpec {
            vertices: d.vertices,
            velocity: d.velocity,
            reference_time: d.reference_time,
        }
    }
}

impl PolygonDomain {
    /// A static domain.
    pub fn new(vertices: Vec<Vec2>) -> Result<Self, GeomError> {
        Self::moving(vertices, Vec2::ZERO, 0.0)
    }

    /// A domain equal to `vertices` at `reference_time`, translating at `velocity`.
    pub fn moving(
        vertices: Vec<Vec2>,
        velocity: Vec2,
        reference_time: f64,
    ) -> Result<Self, GeomError> {
        validate_polygon(&vertices)?;
        if !velocity.is_finite() || !reference_time.is_finite() {
            return Err(GeomError::NonFiniteMotion);
        }
        Ok(Self {
            vertices,
            velocity,
            reference_time,
        })
    }

    /// Reference vertices (at `reference_time`).
    pub fn vertices(&self) -> &[Vec2] {
        &self.vertices
    }

    pub fn velocity(&self) -> Vec2 {
        self.velocity
    }

    pub fn reference_time(&self) -> f64 {
        self.reference_time
    }

    /// Translation of the domain at time `t` relative to its reference pose.
    #[inline]
    pub fn offset_at(&self, t: f64) -> Vec2 {
        self.velocity * (t - self.reference_time)
    }

    pub fn vertices_at(&self, t: f64) -> Vec<Vec2> {
        let off = self.offset_at(t);
        self.vertices.iter().map(|&v| v + off).collect()
    }

    fn edges(&self) -> impl Iterator<Item = (usize, Vec2, Vec2)> + '_ {
        let n = self.vertices.len();
        (0..n).map(move |k| (k, self.vertices[k], self.vertices[(k + 1) % n]))
    }

    /// Nearest boundary point and signed distance at time `t`.
    ///
    /// Ties between equidistant features resolve to the lowest-indexed edge
    /// scanned, so non-unique projections are reproducible.
    pub fn signed_distance(&self, x: Vec2, t: f64) -> BoundaryProjection {
        let off = self.offset_at(t);
        let q = x - off;
        let n = self.vertices.len();

        let mut best_d = f64::INFINITY;
        let mut best_point = self.vertices[0];
        let mut best_feature = Feature::Vertex(0);
        for (k, a, b) in self.edges() {
            let (point, feature) = closest_on_segment(q, a, b, k, n);
            let d = q.distance(point);
            if d < best_d - TIE_EPS {
                best_d = d;
                best_point = point;
                best_feature = feature;
            }
        }

        let distance = if best_d < BOUNDARY_EPS {
            0.0
        } else if crossing_number_inside(&self.vertices, q) {
            -best_d
        } else {
            best_d
        };
        BoundaryProjection {
            point: best_point + off,
            feature: best_feature,
            distance,
        }
    }

    /// `∇b(x) = (x - P(x)) / b(x)`; refuses on the boundary band.
    pub fn signed_distance_gradient(&self, x: Vec2, t: f64) -> Result<Vec2, GeomError> {
        let proj = self.signed_distance(x, t);
        if proj.distance.abs() < BOUNDARY_EPS {
            return Err(GeomError::OnBoundary(proj.distance));
        }
        Ok((x - proj.point) / proj.distance)
    }

    /// Direction the vehicle-domain force acts along: `∇b` off the boundary,
    /// otherwise the outward normal of the nearest edge (angle bisector of the
    /// two edge normals at a vertex).
    pub fn boundary_direction(&self, x: Vec2, t: f64) -> Vec2 {
        let proj = self.signed_distance(x, t);
        if proj.distance.abs() >= BOUNDARY_EPS {
            return (x - proj.point) / proj.distance;
        }
        self.feature_normal(proj.feature)
    }

    /// Outward unit normal of an edge, or the bisector normal at a vertex.
    pub fn feature_normal(&self, feature: Feature) -> Vec2 {
        let n = self.vertices.len();
        match feature {
            Feature::Edge(k) => self.edge_normal(k),
            Feature::Vertex(k) => {
                let sum = self.edge_normal((k + n - 1) % n) + self.edge_normal(k);
                sum.normalized().unwrap_or_else(|| self.edge_normal(k))
            }
        }
    }

    fn edge_normal(&self, k: usize) -> Vec2 {
        let n = self.vertices.len();
        let e = self.vertices[(k + 1) % n] - self.vertices[k];
        // interior is on the left of a CCW edge
        Vec2::new(e.y, -e.x) / e.norm()
    }

    /// True for points strictly inside or within [`BOUNDARY_EPS`] of the boundary.
    pub fn contains(&self, x: Vec2, t: f64) -> bool {
        self.signed_distance(x, t).distance <= 0.0
    }

    /// Shoelace area; translation invariant.
    pub fn area(&self) -> f64 {
        signed_area(&self.vertices)
    }

    /// Area centroid at time `t`.
    pub fn centroid(&self, t: f64) -> Vec2 {
        let n = self.vertices.len();
        let origin = self.vertices[0];
        let mut acc = Vec2::ZERO;
        let mut twice_area = 0.0;
        for k in 0..n {
            let a = self.vertices[k] - origin;
            let b = self.vertices[(k + 1) % n] - origin;
            let c = a.cross(b);
            twice_area += c;
            acc += (a + b) * c;
        }
        origin + acc / (3.0 * twice_area) + self.offset_at(t)
    }

    /// Axis-aligned bounding box `(min, max)` at time `t`.
    pub fn bounding_box(&self, t: f64) -> (Vec2, Vec2) {
        let off = self.offset_at(t);
        let mut lo = Vec2::new(f64::INFINITY, f64::INFINITY);
        let mut hi = Vec2::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
        for v in &self.vertices {
            lo = Vec2::new(lo.x.min(v.x), lo.y.min(v.y));
            hi = Vec2::new(hi.x.max(v.x), hi.y.max(v.y));
        }
        (lo + off, hi + off)
    }
}

fn closest_on_segment(q: Vec2, a: Vec2, b: Vec2, k: usize, n: usize) -> (Vec2, Feature) {
    let e = b - a;
    let s = (q - a).dot(e) / e.norm_squared();
    if s <= 0.0 {
        (a, Feature::Vertex(k))
    } else if s >= 1.0 {
        (b, Feature::Vertex((k + 1) % n))
    } else {
        (a + e * s, Feature::Edge(k))
    }
}

/// Even-odd ray cast along +x with half-open edge rule.
fn crossing_number_inside(vertices: &[Vec2], q: Vec2) -> bool {
    let n = vertices.len();
    let mut inside = false;
    for k in 0..n {
        let a = vertices[k];
        let b = vertices[(k + 1) % n];
        if (a.y > q.y) != (b.y > q.y) {
            let x_cross = a.x + (q.y - a.y) * (b.x - a.x) / (b.y - a.y);
            if q.x < x_cross {
                inside = !inside;
            }
        }
    }
    inside
}

pub(crate) fn signed_area(vertices: &[Vec2]) -> f64 {
    let n = vertices.len();
    let origin = vertices[0];
    let mut twice = 0.0;
    for k in 1..n - 1 {
        twice += (vertices[k] - origin).cross(vertices[k + 1] - origin);
    }
    0.5 * twice
}

fn validate_polygon(vertices: &[Vec2]) -> Result<(), GeomError> {
    let n = vertices.len();
    if n < 3 {
        return Err(GeomError::TooFewVertices(n));
    }
    if let Some(k) = vertices.iter().position(|v| !v.is_finite()) {
        return Err(GeomError::NonFiniteVertex(k));
    }
    for k in 0..n {
        if vertices[k] == vertices[(k + 1) % n] {
            return Err(GeomError::RepeatedVertex(k, (k + 1) % n));
        }
    }
    for i in 0..n {
        let (a, b) = (vertices[i], vertices[(i + 1) % n]);
        for j in i + 1..n {
            let (c, d) = (vertices[j], vertices[(j + 1) % n]);
            let adjacent = j == i + 1 || (i == 0 && j == n - 1);
            if adjacent {
                // adjacent edges share one vertex and must not fold back onto each other
                let (u, w) = if j == i + 1 { (a - b, d - b) } else { (b - a, c - a) };
                if u.cross(w) == 0.0 && u.dot(w) > 0.0 {
                    return Err(GeomError::SelfIntersecting(i, j));
                }
            } else if segments_intersect(a, b, c, d) {
                return Err(GeomError::SelfIntersecting(i, j));
            }
        }
    }
    let area = signed_area(vertices);
    if area <= 0.0 {
        return Err(GeomError::NotCounterClockwise(area));
    }
    Ok(())
}

fn orient(a: Vec2, b: Vec2, c: Vec2) -> f64 {
    (b - a).cross(c - a)
}

fn on_segment(a: Vec2, b: Vec2, p: Vec2) -> bool {
    p.x >= a.x.min(b.x) && p.x <= a.x.max(b.x) && p.y >= a.y.min(b.y) && p.y <= a.y.max(b.y)
}

/// Closed-segment intersection test (touching counts).
fn segments_intersect(a: Vec2, b: Vec2, c: Vec2, d: Vec2) -> bool {
    let o1 = orient(a, b, c);
    let o2 = orient(a, b, d);
    let o3 = orient(c, d, a);
    let o4 = orient(c, d, b);
    if ((o1 > 0.0 && o2 < 0.0) || (o1 < 0.0 && o2 > 0.0))
        && ((o3 > 0.0 && o4 < 0.0) || (o3 < 0.0 && o4 > 0.0))
    {
        return true;
    }
    (o1 == 0.0 && on_segment(a, b, c))
        || (o2 == 0.0 && on_segment(a, b, d))
        || (o3 == 0.0 && on_segment(c, d, a))
        || (o4 == 0.0 && on_segment(c, d, b))
}

/// Domains used by the built-in scenarios.
pub mod shapes {
    use super::*;

    /// Axis-aligned square `[0, side]²`, first vertex at the origin.
    pub fn square(side: f64) -> PolygonDomain {
        PolygonDomain::new(vec![
            Vec2::new(0.0, 0.0),
            Vec2::new(side, 0.0),
            Vec2::new(side, side),
            Vec2::new(0.0, side),
        ])
        .expect("square is a valid polygon")
    }

    /// Equilateral triangle with its base on the x axis, starting at the origin.
    pub fn equilateral_triangle(side: f64) -> PolygonDomain {
        PolygonDomain::new(vec![
            Vec2::new(0.0, 0.0),
            Vec2::new(side, 0.0),
            Vec2::new(0.5 * side, 0.5 * 3f64.sqrt() * side),
        ])
        .expect("triangle is a valid polygon")
    }

    /// Arrow outline in its own frame, pointing along +x with its tail notch
    /// apex on the x axis.
    ///
    /// Shaft 15 × 10 m minus a 3 m deep tail notch (135 m²) plus a head with a
    /// 20 m base and 9 m length (90 m²): 225 m² in total. Only the area of the
    /// original shape is known; the proportions here are a reconstruction.
    pub fn arrow_outline() -> Vec<Vec2> {
        vec![
            Vec2::new(0.0, -5.0),
            Vec2::new(15.0, -5.0),
            Vec2::new(15.0, -10.0),
            Vec2::new(24.0, 0.0),
            Vec2::new(15.0, 10.0),
            Vec2::new(15.0, 5.0),
            Vec2::new(0.0, 5.0),
            Vec2::new(3.0, 0.0),
        ]
    }

    /// The arrow rotated by `heading` radians, tail notch apex placed at
    /// `tail`, translating at `velocity`.
    pub fn arrow(tail: Vec2, heading: f64, velocity: Vec2) -> PolygonDomain {
        let (s, c) = heading.sin_cos();
        let apex = Vec2::new(3.0, 0.0);
        let verts = arrow_outline()
            .into_iter()
            .map(|v| {
                let r = v - apex;
                tail + Vec2::new(c * r.x - s * r.y, s * r.x + c * r.y)
            })
            .collect();
        PolygonDomain::moving(verts, velocity, 0.0).expect("arrow is a valid polygon")
    }
}

#[cfg(test)]
mod tests {
    use super::shapes::*;
    use super::*;
    use std::f64::consts::FRAC_1_SQRT_2;

    fn sq() -> PolygonDomain {
        square(20.0)
    }

    #[test]
    fn signed_distance_square_examples() {
        let p = sq().signed_distance(Vec2::new(10.0, 25.0), 0.0);
        assert_eq!(p.distance, 5.0);
        assert_eq!(p.point, Vec2::new(10.0, 20.0));
        assert_eq!(p.feature, Feature::Edge(2));

        let p = sq().signed_distance(Vec2::new(10.0, 10.0), 0.0);
        assert_eq!(p.distance, -10.0);
        assert_eq!(p.point, Vec2::new(10.0, 0.0));
        assert_eq!(p.feature, Feature::Edge(0));

        let p = sq().signed_distance(Vec2::new(25.0, 25.0), 0.0);
        assert!((p.distance - 50f64.sqrt()).abs() < 1e-12);
        assert_eq!(p.point, Vec2::new(20.0, 20.0));
        assert_eq!(p.feature, Feature::Vertex(2));
    }

    #[test]
    fn corner_projection_brute_force() {
        // 10^6 boundary samples of the square; spacing 8e-5 m
        let n = 1_000_000usize;
        let d = sq();
        let q = Vec2::new(25.0, 25.0);
        let perimeter = 80.0;
        let mut best = f64::INFINITY;
        for s in 0..n {
            let arc = perimeter * s as f64 / n as f64;
            let side = (arc / 20.0) as usize;
            let r = arc - 20.0 * side as f64;
            let pt = match side {
                0 => Vec2::new(r, 0.0),
                1 => Vec2::new(20.0, r),
                2 => Vec2::new(20.0 - r, 20.0),
                _ => Vec2::new(0.0, 20.0 - r),
            };
            best = best.min(pt.distance(q));
        }
        let b = d.signed_distance(q, 0.0).distance;
        assert!(b <= best + 1e-12);
        assert!(best - b < perimeter / n as f64);
        assert!((b - 7.0710678).abs() < 1e-7);
    }

    #[test]
    fn gradient_examples() {
        let d = sq();
        assert_eq!(
            d.signed_distance_gradient(Vec2::new(10.0, 25.0), 0.0).unwrap(),
            Vec2::new(0.0, 1.0)
        );
        let g = d.signed_distance_gradient(Vec2::new(25.0, 25.0), 0.0).unwrap();
        assert!((g.x - FRAC_1_SQRT_2).abs() < 1e-12 && (g.y - FRAC_1_SQRT_2).abs() < 1e-12);
        let g = d.signed_distance_gradient(Vec2::new(10.0, 5.0), 0.0).unwrap();
        assert_eq!(g, Vec2::new(0.0, -1.0));
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let d = sq();
        let h = 1e-6;
        for &x in &[Vec2::new(25.0, 25.0), Vec2::new(10.0, 5.0), Vec2::new(-3.0, 7.0)] {
            let g = d.signed_distance_gradient(x, 0.0).unwrap();
            let fx = (d.signed_distance(x + Vec2::new(h, 0.0), 0.0).distance
                - d.signed_distance(x - Vec2::new(h, 0.0), 0.0).distance)
                / (2.0 * h);
            let fy = (d.signed_distance(x + Vec2::new(0.0, h), 0.0).distance
                - d.signed_distance(x - Vec2::new(0.0, h), 0.0).distance)
                / (2.0 * h);
            let fd = Vec2::new(fx, fy);
            assert!((fd - g).norm() / g.norm() < 1e-5, "{x:?}: {fd:?} vs {g:?}");
        }
    }

    #[test]
    fn on_boundary_gradient_signals_and_fallback_is_normal() {
        let d = sq();
        let x = Vec2::new(10.0, 0.0);
        assert!(matches!(
            d.signed_distance_gradient(x, 0.0),
            Err(GeomError::OnBoundary(_))
        ));
        assert_eq!(d.signed_distance(x, 0.0).distance, 0.0);
        assert_eq!(d.boundary_direction(x, 0.0), Vec2::new(0.0, -1.0));
        let corner = d.boundary_direction(Vec2::new(20.0, 20.0), 0.0);
        assert!((corner - Vec2::new(FRAC_1_SQRT_2, FRAC_1_SQRT_2)).norm() < 1e-12);
    }

    #[test]
    fn contains_examples() {
        let d = sq();
        assert!(d.contains(Vec2::new(10.0, 10.0), 0.0));
        assert!(!d.contains(Vec2::new(10.0, 25.0), 0.0));
        assert!(d.contains(Vec2::new(0.0, 5.0), 0.0));

        let arrow = PolygonDomain::new(arrow_outline()).unwrap();
        // inside the tail notch
        assert!(!arrow.contains(Vec2::new(1.0, 0.0), 0.0));
        // between the head wings and the shaft
        assert!(!arrow.contains(Vec2::new(14.0, 8.0), 0.0));
        assert!(arrow.contains(Vec2::new(10.0, 0.0), 0.0));
    }

    #[test]
    fn areas() {
        assert_eq!(sq().area(), 400.0);
        let l = 25.0 * 3f64.sqrt() / 2.0;
        let tri = equilateral_triangle(l);
        assert!((tri.area() - 1875.0 * 3f64.sqrt() / 16.0).abs() < 1e-10);
        assert!((tri.area() - 202.9747).abs() < 1e-4);
        assert!((PolygonDomain::new(arrow_outline()).unwrap().area() - 225.0).abs() < 1e-12);
        let moving = arrow(Vec2::new(4.0, 4.0), 0.7, Vec2::new(0.3, 0.3));
        assert!((moving.area() - 225.0).abs() < 1e-9);
    }

    #[test]
    fn notch_projection_is_not_unique_and_resolves_to_lowest_edge() {
        let arrow = PolygonDomain::new(arrow_outline()).unwrap();
        let p = arrow.signed_distance(Vec2::new(-5.0, 0.0), 0.0);
        // edges 6 (0,5)->(3,0) and 7 (3,0)->(0,-5) are equidistant
        assert_eq!(p.feature, Feature::Edge(6));
        assert!((p.distance - 40.0 / 34f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn moving_domain_translates() {
        let d = PolygonDomain::moving(sq().vertices().to_vec(), Vec2::new(0.3, 0.3), 1.0).unwrap();
        let p = d.signed_distance(Vec2::new(13.0, 28.0), 11.0);
        assert!((p.distance - 5.0).abs() < 1e-12);
        assert!((p.point - Vec2::new(13.0, 23.0)).norm() < 1e-12);
        assert!((d.centroid(11.0) - Vec2::new(13.0, 13.0)).norm() < 1e-12);
        assert_eq!(d.area(), 400.0);
    }

    #[test]
    fn rejects_invalid_polygons() {
        let v = |x, y| Vec2::new(x, y);
        assert_eq!(
            PolygonDomain::new(vec![v(0.0, 0.0), v(1.0, 0.0)]),
            Err(GeomError::TooFewVertices(2))
        );
        assert!(matches!(
            PolygonDomain::new(vec![v(0.0, 0.0), v(0.0, 1.0), v(1.0, 0.0)]),
            Err(GeomError::NotCounterClockwise(_))
        ));
        assert!(matches!(
            PolygonDomain::new(vec![v(0.0, 0.0), v(1.0, 0.0), v(1.0, 0.0), v(0.0, 1.0)]),
            Err(GeomError::RepeatedVertex(1, 2))
        ));
        // bow tie
        assert!(matches!(
            PolygonDomain::new(vec![v(0.0, 0.0), v(1.0, 1.0), v(1.0, 0.0), v(0.0, 1.0)]),
            Err(GeomError::SelfIntersecting(_, _))
        ));
        // spike folding back along its own edge
        assert!(matches!(
            PolygonDomain::new(vec![v(0.0, 0.0), v(2.0, 0.0), v(1.0, 0.0), v(1.0, 1.0)]),
            Err(GeomError::SelfIntersecting(_, _))
        ));
    }

    #[test]
    fn serde_round_trip_validates() {
        let d = arrow(Vec2::new(1.0, 2.0), 0.3, Vec2::new(0.3, 0.3));
        let s = serde_json::to_string(&d).unwrap();
        let back: PolygonDomain = serde_json::from_str(&s).unwrap();
        assert_eq!(back, d);
        let bad = r#"{"vertices":[[0,0],[0,1],[1,0]]}"#;
        assert!(serde_json::from_str::<PolygonDomain>(bad).is_err());
    }
}
