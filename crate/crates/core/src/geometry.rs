//! Planar geometry on the 120 × 80 pitch: convex hulls, point location,
//! the valid passing zone and rasterized nearest-player ownership.
//!
//! Everything here is a pure function of its inputs. Coordinates are plain
//! `f64` pitch units; no exact-arithmetic predicates are used, so callers get
//! a fixed absolute tolerance ([`BOUNDARY_TOLERANCE`]) for boundary tests.

use serde::{Deserialize, Serialize};
use std::cmp::Ordering;

pub const PITCH_LENGTH: f64 = 120.0;
pub const PITCH_WIDTH: f64 = 80.0;

/// Absolute distance under which a point counts as lying on a polygon edge.
pub const BOUNDARY_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn dist2(self, other: Point) -> f64 {
        let dx = self.x - other.x;
        let dy = self.y - other.y;
        dx * dx + dy * dy
    }

    /// Clamp into the pitch rectangle. Returns the point and whether it moved.
    pub fn clamp_to_pitch(self) -> (Point, bool) {
        let c = Point::new(
            self.x.clamp(0.0, PITCH_LENGTH),
            self.y.clamp(0.0, PITCH_WIDTH),
        );
        (c, c != self)
    }

    fn lex_cmp(&self, other: &Point) -> Ordering {
        self.x
            .total_cmp(&other.x)
            .then_with(|| self.y.total_cmp(&other.y))
    }
}

impl From<(f64, f64)> for Point {
    fn from((x, y): (f64, f64)) -> Self {
        Point::new(x, y)
    }
}

/// z-component of (a - o) × (b - o); positive when o→a→b turns left.
pub fn cross(o: Point, a: Point, b: Point) -> f64 {
    (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x)
}

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum PolygonError {
    #[error("polygon needs at least 3 vertices, got {0}")]
    TooFewVertices(usize),
    #[error("polygon has zero area")]
    ZeroArea,
    #[error("polygon has a non-finite coordinate")]
    NonFinite,
}

/// A simple polygon in canonical form: counter-clockwise, starting at the
/// lexicographically smallest vertex, without a repeated closing vertex.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Point>", into = "Vec<Point>")]
pub struct Polygon {
    vertices: Vec<Point>,
}

impl Polygon {
    /// Canonicalize an arbitrary vertex ring. Clockwise input is reversed,
    /// a closing vertex equal to the first is dropped.
    pub fn new(mut vertices: Vec<Point>) -> Result<Self, PolygonError> {
        if vertices
            .iter()
            .any(|p| !p.x.is_finite() || !p.y.is_finite())
        {
            return Err(PolygonError::NonFinite);
        }
        if vertices.len() > 1 && vertices.first() == vertices.last() {
            vertices.pop();
        }
        if vertices.len() < 3 {
            return Err(PolygonError::TooFewVertices(vertices.len()));
        }
        let area2 = signed_area2(&vertices);
        if area2 == 0.0 {
            return Err(PolygonError::ZeroArea);
        }
        if area2 < 0.0 {
            vertices.reverse();
        }
        let start = vertices
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.lex_cmp(b.1))
            .map(|(i, _)| i)
            .unwrap_or(0);
        vertices.rotate_left(start);
        Ok(Self { vertices })
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    pub fn edges(&self) -> impl Iterator<Item = (Point, Point)> + '_ {
        let n = self.vertices.len();
        (0..n).map(move |i| (self.vertices[i], self.vertices[(i + 1) % n]))
    }

    pub fn area(&self) -> f64 {
        polygon_area(self)
    }

    pub fn centroid(&self) -> Point {
        let n = self.vertices.len() as f64;
        let (sx, sy) = self
            .vertices
            .iter()
            .fold((0.0, 0.0), |(sx, sy), p| (sx + p.x, sy + p.y));
        Point::new(sx / n, sy / n)
    }

    pub fn contains(&self, p: Point) -> bool {
        point_in_polygon(p, self) != Location::Outside
    }
}

impl TryFrom<Vec<Point>> for Polygon {
    type Error = PolygonError;

    fn try_from(v: Vec<Point>) -> Result<Self, Self::Error> {
        Polygon::new(v)
    }
}

impl From<Polygon> for Vec<Point> {
    fn from(p: Polygon) -> Self {
        p.vertices
    }
}

fn signed_area2(v: &[Point]) -> f64 {
    let n = v.len();
    (0..n)
        .map(|i| {
            let (a, b) = (v[i], v[(i + 1) % n]);
            a.x * b.y - b.x * a.y
        })
        .sum()
}

/// Shoelace area, always positive for a canonical polygon.
pub fn polygon_area(poly: &Polygon) -> f64 {
    signed_area2(&poly.vertices).abs() / 2.0
}

/// Andrew's monotone chain. Collinear boundary points and duplicates are
/// dropped. Returns `None` when fewer than three non-collinear points exist.
pub fn convex_hull(points: &[Point]) -> Option<Polygon> {
    let mut pts: Vec<Point> = points
        .iter()
        .copied()
        .filter(|p| p.x.is_finite() && p.y.is_finite())
        .collect();
    pts.sort_by(Point::lex_cmp);
    pts.dedup();
    if pts.len() < 3 {
        return None;
    }

    let mut hull: Vec<Point> = Vec::with_capacity(2 * pts.len());
    for &p in &pts {
        while hull.len() >= 2 && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0.0 {
            hull.pop();
        }
        hull.push(p);
    }
    let lower_len = hull.len() + 1;
    for &p in pts.iter().rev().skip(1) {
        while hull.len() >= lower_len && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0.0
        {
            hull.pop();
        }
        hull.push(p);
    }
    // last point repeats the first
    hull.pop();

    if hull.len() < 3 {
        return None;
    }
    // Already CCW from the lexicographic minimum.
    Some(Polygon { vertices: hull })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Location {
    Inside,
    Boundary,
    Outside,
}

fn segment_distance(p: Point, a: Point, b: Point) -> f64 {
    let (dx, dy) = (b.x - a.x, b.y - a.y);
    let len2 = dx * dx + dy * dy;
    if len2 == 0.0 {
        return p.dist2(a).sqrt();
    }
    let t = (((p.x - a.x) * dx + (p.y - a.y) * dy) / len2).clamp(0.0, 1.0);
    p.dist2(Point::new(a.x + t * dx, a.y + t * dy)).sqrt()
}

/// Classify `p` against a simple polygon (convex or not). Points within
/// [`BOUNDARY_TOLERANCE`] of an edge are `Boundary`; the rest are decided by
/// an even-odd ray cast.
pub fn point_in_polygon(p: Point, poly: &Polygon) -> Location {
    if poly
        .edges()
        .any(|(a, b)| segment_distance(p, a, b) <= BOUNDARY_TOLERANCE)
    {
        return Location::Boundary;
    }
    let mut inside = false;
    for (a, b) in poly.edges() {
        if (a.y > p.y) != (b.y > p.y) {
            let x_at = a.x + (p.y - a.y) * (b.x - a.x) / (b.y - a.y);
            if p.x < x_at {
                inside = !inside;
            }
        }
    }
    if inside {
        Location::Inside
    } else {
        Location::Outside
    }
}

/// Band of the pitch (along the attacking axis) where passes are considered.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Zone {
    pub lo: f64,
    pub hi: f64,
}

impl Zone {
    /// Skip the defensive third and the final quarter.
    pub fn for_pitch(pitch_length: f64) -> Self {
        Self {
            lo: pitch_length / 3.0,
            hi: 3.0 * pitch_length / 4.0,
        }
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }
}

impl Default for Zone {
    fn default() -> Self {
        Zone::for_pitch(PITCH_LENGTH)
    }
}

pub fn zone_contains(x: f64, pitch_length: f64) -> bool {
    Zone::for_pitch(pitch_length).contains(x)
}

/// Round half away from zero for the non-negative values used in pixel
/// mapping (equivalently, round-half-up).
pub fn round_half_up(v: f64) -> f64 {
    (v + 0.5).floor()
}

/// Mapping between pitch coordinates and a raster whose rows run from the
/// attacking end (row 0) down to the own goal line (last row), and whose
/// columns run along pitch y.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PixelMapping {
    pub width: usize,
    pub height: usize,
    pub pitch_length: f64,
    pub pitch_width: f64,
}

impl PixelMapping {
    pub fn new(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            pitch_length: PITCH_LENGTH,
            pitch_width: PITCH_WIDTH,
        }
    }

    /// Pitch coordinates of the center of pixel (row, col).
    pub fn pixel_center(&self, row: usize, col: usize) -> Point {
        let h = (self.height - 1).max(1) as f64;
        let w = (self.width - 1).max(1) as f64;
        Point::new(
            (self.height - 1 - row) as f64 * self.pitch_length / h,
            col as f64 * self.pitch_width / w,
        )
    }

    /// Pixel (row, col) nearest to a pitch point, clamped to the raster.
    pub fn to_pixel(&self, p: Point) -> (usize, usize) {
        let h = (self.height - 1) as f64;
        let w = (self.width - 1) as f64;
        let r = round_half_up((p.x / self.pitch_length).clamp(0.0, 1.0) * h);
        let c = round_half_up((p.y / self.pitch_width).clamp(0.0, 1.0) * w);
        (self.height - 1 - r as usize, c as usize)
    }
}

/// Row-major grid of nearest-seed indices; `None` marks clipped pixels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OwnerGrid {
    pub width: usize,
    pub height: usize,
    pub owners: Vec<Option<u32>>,
}

impl OwnerGrid {
    pub fn get(&self, row: usize, col: usize) -> Option<u32> {
        self.owners[row * self.width + col]
    }
}

/// Assign every pixel to the seed nearest to its center (squared Euclidean
/// distance, lowest index on exact ties). Pixels whose centers fall outside
/// `clip` are left unowned.
pub fn voronoi_owner_grid(
    seeds: &[Point],
    mapping: &PixelMapping,
    clip: Option<&Polygon>,
) -> OwnerGrid {
    let (width, height) = (mapping.width, mapping.height);
    let mut owners = vec![None; width * height];
    if seeds.is_empty() {
        return OwnerGrid {
            width,
            height,
            owners,
        };
    }
    // dx² per row is shared by the whole row; only dy² varies along it.
    let mut dx2 = vec![0.0; seeds.len()];
    for row in 0..height {
        let px = mapping.pixel_center(row, 0).x;
        for (d, s) in dx2.iter_mut().zip(seeds) {
            *d = (px - s.x) * (px - s.x);
        }
        for col in 0..width {
            let center = mapping.pixel_center(row, col);
            if let Some(c) = clip {
                if !c.contains(center) {
                    continue;
                }
            }
            let mut best = 0usize;
            let mut best_d = f64::INFINITY;
            for (i, s) in seeds.iter().enumerate() {
                let dy = center.y - s.y;
                let d = dx2[i] + dy * dy;
                if d < best_d {
                    best_d = d;
                    best = i;
                }
            }
            owners[row * width + col] = Some(best as u32);
        }
    }
    OwnerGrid {
        width,
        height,
        owners,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sq() -> Polygon {
        Polygon::new(vec![
            Point::new(0.0, 0.0),
            Point::new(1.0, 0.0),
            Point::new(1.0, 1.0),
            Point::new(0.0, 1.0),
        ])
        .unwrap()
    }

    #[test]
    fn triangle_is_its_own_hull() {
        let pts = [
            Point::new(4.0, 0.0),
            Point::new(0.0, 4.0),
            Point::new(0.0, 0.0),
        ];
        let hull = convex_hull(&pts).unwrap();
        assert_eq!(
            hull.vertices(),
            &[
                Point::new(0.0, 0.0),
                Point::new(4.0, 0.0),
                Point::new(0.0, 4.0)
            ]
        );
    }

    #[test]
    fn collinear_points_are_degenerate() {
        let pts = [
            Point::new(0.0, 0.0),
            Point::new(1.0, 1.0),
            Point::new(2.0, 2.0),
        ];
        assert!(convex_hull(&pts).is_none());
        assert!(convex_hull(&pts[..2]).is_none());
        assert!(convex_hull(&[]).is_none());
    }

    #[test]
    fn collinear_edge_points_dropped() {
        let pts = [
            Point::new(0.0, 0.0),
            Point::new(2.0, 0.0),
            Point::new(4.0, 0.0),
            Point::new(4.0, 4.0),
            Point::new(0.0, 4.0),
            Point::new(2.0, 2.0),
        ];
        let hull = convex_hull(&pts).unwrap();
        assert_eq!(hull.len(), 4);
    }

    #[test]
    fn point_location_on_unit_square() {
        let s = sq();
        assert_eq!(point_in_polygon(Point::new(0.5, 0.5), &s), Location::Inside);
        assert_eq!(
            point_in_polygon(Point::new(2.0, 2.0), &s),
            Location::Outside
        );
        assert_eq!(
            point_in_polygon(Point::new(1.0, 0.5), &s),
            Location::Boundary
        );
        assert_eq!(
            point_in_polygon(Point::new(0.0, 0.0), &s),
            Location::Boundary
        );
        assert_eq!(
            point_in_polygon(Point::new(2.0, 0.0), &s),
            Location::Outside,
            "on the extension of an edge"
        );
    }

    #[test]
    fn zone_boundaries_inclusive() {
        assert!(zone_contains(60.0, PITCH_LENGTH));
        assert!(!zone_contains(39.9, PITCH_LENGTH));
        assert!(zone_contains(40.0, PITCH_LENGTH));
        assert!(zone_contains(90.0, PITCH_LENGTH));
        assert!(!zone_contains(90.1, PITCH_LENGTH));
    }

    #[test]
    fn areas() {
        assert_eq!(polygon_area(&sq()), 1.0);
        let t = Polygon::new(vec![
            Point::new(0.0, 0.0),
            Point::new(4.0, 0.0),
            Point::new(0.0, 4.0),
        ])
        .unwrap();
        assert_eq!(polygon_area(&t), 8.0);
    }

    #[test]
    fn polygon_canonicalizes_clockwise_closed_rings() {
        let p = Polygon::new(vec![
            Point::new(1.0, 1.0),
            Point::new(1.0, 0.0),
            Point::new(0.0, 0.0),
            Point::new(0.0, 1.0),
            Point::new(1.0, 1.0),
        ])
        .unwrap();
        assert_eq!(p, sq());
        assert_eq!(
            Polygon::new(vec![Point::new(0.0, 0.0), Point::new(1.0, 1.0)]),
            Err(PolygonError::TooFewVertices(2))
        );
    }

    #[test]
    fn single_seed_owns_everything() {
        let g = voronoi_owner_grid(&[Point::new(10.0, 10.0)], &PixelMapping::new(16, 16), None);
        assert!(g.owners.iter().all(|o| *o == Some(0)));
    }

    #[test]
    fn symmetric_seeds_split_columns() {
        let seeds = [Point::new(60.0, 20.0), Point::new(60.0, 60.0)];
        let even = voronoi_owner_grid(&seeds, &PixelMapping::new(64, 16), None);
        for row in 0..16 {
            for col in 0..64 {
                assert_eq!(even.get(row, col), Some(if col < 32 { 0 } else { 1 }));
            }
        }
        // With an odd width the middle column sits exactly on the bisector.
        let odd = voronoi_owner_grid(&seeds, &PixelMapping::new(65, 16), None);
        for row in 0..16 {
            assert_eq!(odd.get(row, 32), Some(0));
            assert_eq!(odd.get(row, 33), Some(1));
        }
    }

    #[test]
    fn clip_leaves_pixels_unowned() {
        let clip = Polygon::new(vec![
            Point::new(0.0, 0.0),
            Point::new(60.0, 0.0),
            Point::new(60.0, 80.0),
            Point::new(0.0, 80.0),
        ])
        .unwrap();
        let m = PixelMapping::new(16, 17);
        let g = voronoi_owner_grid(&[Point::new(10.0, 10.0)], &m, Some(&clip));
        // rows 0..8 are x > 60
        assert!(g.get(0, 0).is_none());
        assert_eq!(g.get(8, 0), Some(0), "x = 60 lies on the clip boundary");
        assert_eq!(g.get(16, 5), Some(0));
    }

    #[test]
    fn pixel_mapping_orientation() {
        let m = PixelMapping::new(224, 224);
        assert_eq!(m.to_pixel(Point::new(120.0, 0.0)), (0, 0));
        assert_eq!(m.to_pixel(Point::new(0.0, 80.0)), (223, 223));
        let (r, c) = m.to_pixel(m.pixel_center(17, 101));
        assert_eq!((r, c), (17, 101));
    }

    fn arb_points(max: usize) -> impl Strategy<Value = Vec<Point>> {
        prop::collection::vec((0.0..120.0f64, 0.0..80.0f64), 3..max)
            .prop_map(|v| v.into_iter().map(Point::from).collect())
    }

    proptest! {
        #[test]
        fn hull_idempotent_and_contains_inputs(pts in arb_points(25)) {
            if let Some(h) = convex_hull(&pts) {
                let again = convex_hull(h.vertices());
                prop_assert_eq!(again.as_ref(), Some(&h));
                for p in &pts {
                    prop_assert_ne!(point_in_polygon(*p, &h), Location::Outside);
                }
                for v in h.vertices() {
                    prop_assert_eq!(point_in_polygon(*v, &h), Location::Boundary);
                }
                prop_assert!(h.area() > 0.0);
            }
        }

        #[test]
        fn hull_permutation_invariant(pts in arb_points(20), rot in 0usize..20) {
            let mut shuffled = pts.clone();
            shuffled.reverse();
            let k = rot % shuffled.len();
            shuffled.rotate_left(k);
            prop_assert_eq!(convex_hull(&pts), convex_hull(&shuffled));
        }

        #[test]
        fn area_matches_fan_triangles(pts in arb_points(20)) {
            if let Some(h) = convex_hull(&pts) {
                let v = h.vertices();
                let fan: f64 = (1..v.len() - 1)
                    .map(|i| cross(v[0], v[i], v[i + 1]).abs() / 2.0)
                    .sum();
                prop_assert!((fan - polygon_area(&h)).abs() < 1e-9);
            }
        }
    }
}
