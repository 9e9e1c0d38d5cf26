//! Planar geometry and raster primitives shared by every stage.
//!
//! All coordinates are meters in a projected CRS. Rasters use a lower-left
//! origin with row indices increasing northward; cells are half-open, so a
//! point on a cell boundary belongs to the higher cell.

use crate::error::{Error, Result};

/// Distance below which a point is treated as lying on a polygon edge.
const BOUNDARY_EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum PointClass {
    Ground,
    Building,
    Vegetation,
    Other,
}

impl PointClass {
    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(PointClass::Ground),
            1 => Some(PointClass::Building),
            2 => Some(PointClass::Vegetation),
            3 => Some(PointClass::Other),
            _ => None,
        }
    }

    pub fn code(self) -> u8 {
        match self {
            PointClass::Ground => 0,
            PointClass::Building => 1,
            PointClass::Vegetation => 2,
            PointClass::Other => 3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub cls: PointClass,
}

impl Point3 {
    pub fn new(x: f64, y: f64, z: f64, cls: PointClass) -> Self {
        Self { x, y, z, cls }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct PointCloud {
    pub points: Vec<Point3>,
}

impl PointCloud {
    pub fn new(points: Vec<Point3>) -> Self {
        Self { points }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn of_class(&self, cls: PointClass) -> impl Iterator<Item = &Point3> {
        self.points.iter().filter(move |p| p.cls == cls)
    }

    /// `(min_x, min_y, max_x, max_y)` over all points.
    pub fn bounds(&self) -> Option<(f64, f64, f64, f64)> {
        let mut it = self.points.iter();
        let first = it.next()?;
        let init = (first.x, first.y, first.x, first.y);
        Some(it.fold(init, |(x0, y0, x1, y1), p| {
            (x0.min(p.x), y0.min(p.y), x1.max(p.x), y1.max(p.y))
        }))
    }
}

/// Axis-aligned grid of `f64` values; NaN marks nodata.
#[derive(Debug, Clone, PartialEq)]
pub struct RasterGrid {
    pub origin_x: f64,
    pub origin_y: f64,
    pub cell: f64,
    pub nrows: usize,
    pub ncols: usize,
    values: Vec<f64>,
}

impl RasterGrid {
    pub fn new(origin_x: f64, origin_y: f64, cell: f64, nrows: usize, ncols: usize) -> Result<Self> {
        Self::from_values(origin_x, origin_y, cell, nrows, ncols, vec![f64::NAN; nrows * ncols])
    }

    pub fn filled(origin_x: f64, origin_y: f64, cell: f64, nrows: usize, ncols: usize, value: f64) -> Result<Self> {
        Self::from_values(origin_x, origin_y, cell, nrows, ncols, vec![value; nrows * ncols])
    }

    /// `values` is row-major with row 0 at the southern edge.
    pub fn from_values(
        origin_x: f64,
        origin_y: f64,
        cell: f64,
        nrows: usize,
        ncols: usize,
        values: Vec<f64>,
    ) -> Result<Self> {
        if !(cell > 0.0 && cell.is_finite()) {
            return Err(Error::Invalid(format!("raster cell size must be > 0, got {cell}")));
        }
        if nrows == 0 || ncols == 0 {
            return Err(Error::Invalid("raster must have at least one row and column".into()));
        }
        if !origin_x.is_finite() || !origin_y.is_finite() {
            return Err(Error::Invalid("raster origin must be finite".into()));
        }
        if values.len() != nrows * ncols {
            return Err(Error::Invalid(format!(
                "raster value count {} does not match {nrows}x{ncols}",
                values.len()
            )));
        }
        if values.iter().any(|v| v.is_infinite()) {
            return Err(Error::Invalid("raster values must be finite or nodata".into()));
        }
        Ok(Self {
            origin_x,
            origin_y,
            cell,
            nrows,
            ncols,
            values,
        })
    }

    /// Smallest grid aligned to multiples of `cell` that covers the box.
    pub fn covering(min_x: f64, min_y: f64, max_x: f64, max_y: f64, cell: f64) -> Result<Self> {
        let ox = (min_x / cell).floor() * cell;
        let oy = (min_y / cell).floor() * cell;
        let ncols = (((max_x - ox) / cell).floor() as usize + 1).max(1);
        let nrows = (((max_y - oy) / cell).floor() as usize + 1).max(1);
        Self::new(ox, oy, cell, nrows, ncols)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    fn index(&self, row: usize, col: usize) -> usize {
        debug_assert!(row < self.nrows && col < self.ncols);
        row * self.ncols + col
    }

    /// Value at `(row, col)`, `None` for nodata.
    pub fn get(&self, row: usize, col: usize) -> Option<f64> {
        let v = self.values[self.index(row, col)];
        (!v.is_nan()).then_some(v)
    }

    pub fn set(&mut self, row: usize, col: usize, value: Option<f64>) {
        let i = self.index(row, col);
        self.values[i] = value.unwrap_or(f64::NAN);
    }

    pub fn is_nodata(&self, row: usize, col: usize) -> bool {
        self.values[self.index(row, col)].is_nan()
    }

    /// Cell containing `(x, y)`, or `None` when outside the grid.
    pub fn world_to_cell(&self, x: f64, y: f64) -> Option<(usize, usize)> {
        let fc = ((x - self.origin_x) / self.cell).floor();
        let fr = ((y - self.origin_y) / self.cell).floor();
        if fc < 0.0 || fr < 0.0 || !fc.is_finite() || !fr.is_finite() {
            return None;
        }
        let (row, col) = (fr as usize, fc as usize);
        (row < self.nrows && col < self.ncols).then_some((row, col))
    }

    pub fn cell_center(&self, row: usize, col: usize) -> (f64, f64) {
        (
            self.origin_x + (col as f64 + 0.5) * self.cell,
            self.origin_y + (row as f64 + 0.5) * self.cell,
        )
    }

    pub fn max_x(&self) -> f64 {
        self.origin_x + self.ncols as f64 * self.cell
    }

    pub fn max_y(&self) -> f64 {
        self.origin_y + self.nrows as f64 * self.cell
    }

    /// A grid with the same geometry and all cells nodata.
    pub fn empty_like(&self) -> Self {
        Self {
            values: vec![f64::NAN; self.values.len()],
            ..self.clone()
        }
    }

    pub fn same_geometry(&self, other: &RasterGrid) -> bool {
        self.origin_x == other.origin_x
            && self.origin_y == other.origin_y
            && self.cell == other.cell
            && self.nrows == other.nrows
            && self.ncols == other.ncols
    }

    /// Iterator over `(row, col, value)` for cells holding data.
    pub fn iter_valid(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        self.values
            .iter()
            .enumerate()
            .filter_map(move |(i, v)| (!v.is_nan()).then_some((i / self.ncols, i % self.ncols, *v)))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Polygon {
    exterior: Vec<[f64; 2]>,
    holes: Vec<Vec<[f64; 2]>>,
}

impl Polygon {
    /// Validates ring closure, vertex count, exterior simplicity and area.
    /// Open rings are closed by repeating the first vertex.
    pub fn new(exterior: Vec<[f64; 2]>, holes: Vec<Vec<[f64; 2]>>) -> Result<Self> {
        let exterior = close_ring(exterior)?;
        if self_intersects(&exterior) {
            return Err(Error::Invalid("polygon exterior ring self-intersects".into()));
        }
        let holes = holes.into_iter().map(close_ring).collect::<Result<Vec<_>>>()?;
        let poly = Self { exterior, holes };
        if !(poly.area() > 0.0) {
            return Err(Error::Invalid("polygon area must be positive".into()));
        }
        Ok(poly)
    }

    /// Axis-aligned rectangle.
    pub fn rect(min_x: f64, min_y: f64, max_x: f64, max_y: f64) -> Result<Self> {
        Self::new(
            vec![
                [min_x, min_y],
                [max_x, min_y],
                [max_x, max_y],
                [min_x, max_y],
                [min_x, min_y],
            ],
            vec![],
        )
    }

    pub fn exterior(&self) -> &[[f64; 2]] {
        &self.exterior
    }

    pub fn holes(&self) -> &[Vec<[f64; 2]>] {
        &self.holes
    }

    pub fn rings(&self) -> impl Iterator<Item = &[[f64; 2]]> {
        std::iter::once(self.exterior.as_slice()).chain(self.holes.iter().map(Vec::as_slice))
    }

    pub fn area(&self) -> f64 {
        ring_signed_area(&self.exterior).abs() - self.holes.iter().map(|h| ring_signed_area(h).abs()).sum::<f64>()
    }

    /// Area centroid of the polygon including holes.
    pub fn centroid(&self) -> [f64; 2] {
        let (x0, y0) = (self.exterior[0][0], self.exterior[0][1]);
        let mut acc = [0.0, 0.0, 0.0];
        for (i, ring) in self.rings().enumerate() {
            // holes contribute negatively whatever their winding
            let (a, cx, cy) = ring_moments(ring, x0, y0);
            let sign = if i == 0 { a.signum() } else { -a.signum() };
            acc[0] += sign * a;
            acc[1] += sign * cx;
            acc[2] += sign * cy;
        }
        [x0 + acc[1] / acc[0], y0 + acc[2] / acc[0]]
    }

    pub fn bbox(&self) -> (f64, f64, f64, f64) {
        self.exterior.iter().fold(
            (f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY),
            |(x0, y0, x1, y1), p| (x0.min(p[0]), y0.min(p[1]), x1.max(p[0]), y1.max(p[1])),
        )
    }

    /// Inside the exterior and outside every hole; boundary points count as inside.
    pub fn contains(&self, p: [f64; 2]) -> bool {
        let (x0, y0, x1, y1) = self.bbox();
        if p[0] < x0 - BOUNDARY_EPS || p[0] > x1 + BOUNDARY_EPS || p[1] < y0 - BOUNDARY_EPS || p[1] > y1 + BOUNDARY_EPS
        {
            return false;
        }
        if self.rings().any(|r| ring_distance(r, p) <= BOUNDARY_EPS) {
            return true;
        }
        ring_contains(&self.exterior, p) && !self.holes.iter().any(|h| ring_contains(h, p))
    }

    /// Euclidean distance to the polygon; 0 inside.
    pub fn distance(&self, p: [f64; 2]) -> f64 {
        if self.contains(p) {
            return 0.0;
        }
        self.rings().map(|r| ring_distance(r, p)).fold(f64::INFINITY, f64::min)
    }
}

fn close_ring(mut ring: Vec<[f64; 2]>) -> Result<Vec<[f64; 2]>> {
    if ring.iter().flatten().any(|c| !c.is_finite()) {
        return Err(Error::Invalid("polygon coordinates must be finite".into()));
    }
    if ring.first() != ring.last() {
        if let Some(&first) = ring.first() {
            ring.push(first);
        }
    }
    if ring.len() < 4 {
        return Err(Error::Invalid(format!(
            "polygon ring needs at least 4 vertices (closed), got {}",
            ring.len()
        )));
    }
    Ok(ring)
}

fn ring_signed_area(ring: &[[f64; 2]]) -> f64 {
    let (x0, y0) = (ring[0][0], ring[0][1]);
    ring_moments(ring, x0, y0).0
}

/// Signed area and first moments of a closed ring relative to `(x0, y0)`.
fn ring_moments(ring: &[[f64; 2]], x0: f64, y0: f64) -> (f64, f64, f64) {
    let (mut a, mut cx, mut cy) = (0.0, 0.0, 0.0);
    for w in ring.windows(2) {
        let (xa, ya) = (w[0][0] - x0, w[0][1] - y0);
        let (xb, yb) = (w[1][0] - x0, w[1][1] - y0);
        let cross = xa * yb - xb * ya;
        a += cross;
        cx += (xa + xb) * cross;
        cy += (ya + yb) * cross;
    }
    (a / 2.0, cx / 6.0, cy / 6.0)
}

/// Even-odd ray casting.
fn ring_contains(ring: &[[f64; 2]], p: [f64; 2]) -> bool {
    let mut inside = false;
    for w in ring.windows(2) {
        let (a, b) = (w[0], w[1]);
        if (a[1] > p[1]) != (b[1] > p[1]) {
            let x = a[0] + (p[1] - a[1]) / (b[1] - a[1]) * (b[0] - a[0]);
            if p[0] < x {
                inside = !inside;
            }
        }
    }
    inside
}

fn ring_distance(ring: &[[f64; 2]], p: [f64; 2]) -> f64 {
    ring.windows(2)
        .map(|w| point_segment_distance(p, w[0], w[1]))
        .fold(f64::INFINITY, f64::min)
}

fn self_intersects(ring: &[[f64; 2]]) -> bool {
    let n = ring.len() - 1;
    for i in 0..n {
        for j in (i + 1)..n {
            // adjacent edges share a vertex by construction
            if j == i + 1 || (i == 0 && j == n - 1) {
                continue;
            }
            if segments_intersect(ring[i], ring[i + 1], ring[j], ring[j + 1]) {
                return true;
            }
        }
    }
    false
}

fn orient(a: [f64; 2], b: [f64; 2], c: [f64; 2]) -> f64 {
    (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
}

fn on_segment(a: [f64; 2], b: [f64; 2], p: [f64; 2]) -> bool {
    p[0] >= a[0].min(b[0]) && p[0] <= a[0].max(b[0]) && p[1] >= a[1].min(b[1]) && p[1] <= a[1].max(b[1])
}

fn segments_intersect(p1: [f64; 2], p2: [f64; 2], q1: [f64; 2], q2: [f64; 2]) -> bool {
    let d1 = orient(q1, q2, p1);
    let d2 = orient(q1, q2, p2);
    let d3 = orient(p1, p2, q1);
    let d4 = orient(p1, p2, q2);
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0)) && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0)) {
        return true;
    }
    (d1 == 0.0 && on_segment(q1, q2, p1))
        || (d2 == 0.0 && on_segment(q1, q2, p2))
        || (d3 == 0.0 && on_segment(p1, p2, q1))
        || (d4 == 0.0 && on_segment(p1, p2, q2))
}

pub fn point_segment_distance(p: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    let (dx, dy) = (b[0] - a[0], b[1] - a[1]);
    let len2 = dx * dx + dy * dy;
    let t = if len2 > 0.0 {
        (((p[0] - a[0]) * dx + (p[1] - a[1]) * dy) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    let (cx, cy) = (a[0] + t * dx, a[1] + t * dy);
    ((p[0] - cx).powi(2) + (p[1] - cy).powi(2)).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RoadClass {
    Main,
    Minor,
}

impl RoadClass {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "main" => Some(RoadClass::Main),
            "minor" => Some(RoadClass::Minor),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            RoadClass::Main => "main",
            RoadClass::Minor => "minor",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Polyline {
    vertices: Vec<[f64; 2]>,
    pub class: RoadClass,
}

impl Polyline {
    pub fn new(vertices: Vec<[f64; 2]>, class: RoadClass) -> Result<Self> {
        if vertices.len() < 2 {
            return Err(Error::Invalid("polyline needs at least 2 vertices".into()));
        }
        if vertices.iter().flatten().any(|c| !c.is_finite()) {
            return Err(Error::Invalid("polyline coordinates must be finite".into()));
        }
        if vertices.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::Invalid("polyline has repeated consecutive vertices".into()));
        }
        Ok(Self { vertices, class })
    }

    pub fn vertices(&self) -> &[[f64; 2]] {
        &self.vertices
    }

    pub fn distance(&self, p: [f64; 2]) -> f64 {
        self.vertices
            .windows(2)
            .map(|w| point_segment_distance(p, w[0], w[1]))
            .fold(f64::INFINITY, f64::min)
    }
}

/// Minimum distance from `p` to any segment of the roads of class `filter`.
pub fn distance_to_polylines(p: [f64; 2], roads: &[Polyline], filter: RoadClass) -> Result<f64> {
    roads
        .iter()
        .filter(|r| r.class == filter)
        .map(|r| r.distance(p))
        .reduce(f64::min)
        .ok_or(Error::NoRoads(filter))
}
