//! Roof extraction from a classified point cloud.
//!
//! Building points are projected onto a horizontal grid keeping the highest
//! point per cell. Cells on walls and roof steps are dropped when a 4-neighbour
//! differs in elevation by at least the wall threshold. The remaining cells
//! are clustered with 8-connected component labelling and every cluster is
//! split into planar segments by region growing. Slope and plan-view area of
//! each segment, together with building age, decide whether a building can
//! carry an extensive green roof.

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};

use crate::error::{Error, Result};
use crate::geocore::{Point3, PointClass, PointCloud, Polygon};
use crate::ingest::BuildingAttributes;

const NEIGHBORS_4: [(i64, i64); 4] = [(-1, 0), (1, 0), (0, -1), (0, 1)];
const NEIGHBORS_8: [(i64, i64); 8] = [(-1, -1), (-1, 0), (-1, 1), (0, -1), (0, 1), (1, -1), (1, 0), (1, 1)];

/// Highest building-point elevation inside one DSM cell.
///
/// Indices are global: the cell `(row, col)` spans
/// `[col·cell, (col+1)·cell) × [row·cell, (row+1)·cell)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RoofCell {
    pub row: i64,
    pub col: i64,
    /// Planimetric position of the highest point in the cell.
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl RoofCell {
    /// A cell whose highest point sits at the cell centre.
    pub fn centered(row: i64, col: i64, z: f64, cell: f64) -> Self {
        let (x, y) = ((col as f64 + 0.5) * cell, (row as f64 + 0.5) * cell);
        Self { row, col, x, y, z }
    }

    pub fn center(&self, cell: f64) -> (f64, f64) {
        ((self.col as f64 + 0.5) * cell, (self.row as f64 + 0.5) * cell)
    }
}

/// Sparse DSM of roof cells, iterated in `(row, col)` order.
#[derive(Debug, Clone, PartialEq)]
pub struct RoofCells {
    pub cell: f64,
    cells: BTreeMap<(i64, i64), (f64, f64, f64)>,
}

impl RoofCells {
    pub fn new(cell: f64) -> Self {
        Self {
            cell,
            cells: BTreeMap::new(),
        }
    }

    pub fn from_cells(cell: f64, cells: impl IntoIterator<Item = RoofCell>) -> Self {
        Self {
            cell,
            cells: cells.into_iter().map(|c| ((c.row, c.col), (c.x, c.y, c.z))).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    /// Elevation of the cell, if present.
    pub fn get(&self, row: i64, col: i64) -> Option<f64> {
        self.cells.get(&(row, col)).map(|v| v.2)
    }

    pub fn cell_at(&self, row: i64, col: i64) -> Option<RoofCell> {
        self.cells
            .get(&(row, col))
            .map(|&(x, y, z)| RoofCell { row, col, x, y, z })
    }

    pub fn iter(&self) -> impl Iterator<Item = RoofCell> + '_ {
        self.cells
            .iter()
            .map(|(&(row, col), &(x, y, z))| RoofCell { row, col, x, y, z })
    }

    pub fn cell_index(&self, x: f64, y: f64) -> (i64, i64) {
        ((y / self.cell).floor() as i64, (x / self.cell).floor() as i64)
    }

    /// Cells whose centres fall inside `poly`.
    pub fn inside(&self, poly: &Polygon) -> Vec<RoofCell> {
        let (x0, y0, x1, y1) = poly.bbox();
        let (r0, c0) = self.cell_index(x0, y0);
        let (r1, c1) = self.cell_index(x1, y1);
        let mut out = Vec::new();
        for row in r0..=r1 {
            for (&(row, col), &(x, y, z)) in self.cells.range((row, c0)..=(row, c1)) {
                let c = RoofCell { row, col, x, y, z };
                let (x, y) = c.center(self.cell);
                if poly.contains([x, y]) {
                    out.push(c);
                }
            }
        }
        out
    }
}

/// Plane `z = z0 + a·(x − x0) + b·(y − y0)`, kept relative to a reference
/// point so projected coordinates in the 10⁵–10⁶ m range stay well conditioned.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Plane {
    pub a: f64,
    pub b: f64,
    pub x0: f64,
    pub y0: f64,
    pub z0: f64,
}

impl Plane {
    pub fn horizontal(x0: f64, y0: f64, z0: f64) -> Self {
        Self {
            a: 0.0,
            b: 0.0,
            x0,
            y0,
            z0,
        }
    }

    pub fn eval(&self, x: f64, y: f64) -> f64 {
        self.z0 + self.a * (x - self.x0) + self.b * (y - self.y0)
    }

    /// `(a, b, c)` of `z = a·x + b·y + c` in absolute coordinates.
    pub fn coefficients(&self) -> (f64, f64, f64) {
        (self.a, self.b, self.z0 - self.a * self.x0 - self.b * self.y0)
    }

    pub fn unit_normal(&self) -> [f64; 3] {
        let n = (self.a * self.a + self.b * self.b + 1.0).sqrt();
        [-self.a / n, -self.b / n, 1.0 / n]
    }

    /// Angle between the plane normal and the vertical, in degrees.
    pub fn slope_deg(&self) -> f64 {
        self.a.hypot(self.b).atan().to_degrees()
    }

    pub fn normal_angle_deg(&self, other: &Plane) -> f64 {
        let (n, m) = (self.unit_normal(), other.unit_normal());
        let dot = n[0] * m[0] + n[1] * m[1] + n[2] * m[2];
        dot.clamp(-1.0, 1.0).acos().to_degrees()
    }
}

/// Least-squares accumulator for `z = a·x + b·y + c`, centred on a
/// reference point.
#[derive(Debug, Clone, Copy)]
struct PlaneFit {
    x0: f64,
    y0: f64,
    n: f64,
    sx: f64,
    sy: f64,
    sz: f64,
    sxx: f64,
    sxy: f64,
    syy: f64,
    sxz: f64,
    syz: f64,
}

impl PlaneFit {
    fn new(x0: f64, y0: f64) -> Self {
        Self {
            x0,
            y0,
            n: 0.0,
            sx: 0.0,
            sy: 0.0,
            sz: 0.0,
            sxx: 0.0,
            sxy: 0.0,
            syy: 0.0,
            sxz: 0.0,
            syz: 0.0,
        }
    }

    fn add(&mut self, x: f64, y: f64, z: f64) {
        let (x, y) = (x - self.x0, y - self.y0);
        self.n += 1.0;
        self.sx += x;
        self.sy += y;
        self.sz += z;
        self.sxx += x * x;
        self.sxy += x * y;
        self.syy += y * y;
        self.sxz += x * z;
        self.syz += y * z;
    }

    /// `None` when fewer than three points or all points are collinear.
    fn solve(&self) -> Option<Plane> {
        if self.n < 3.0 {
            return None;
        }
        let n = self.n;
        let (mx, my, mz) = (self.sx / n, self.sy / n, self.sz / n);
        let cxx = self.sxx - n * mx * mx;
        let cyy = self.syy - n * my * my;
        let cxy = self.sxy - n * mx * my;
        let cxz = self.sxz - n * mx * mz;
        let cyz = self.syz - n * my * mz;
        let det = cxx * cyy - cxy * cxy;
        if !(det > 1e-9 * (cxx * cyy).max(f64::MIN_POSITIVE)) {
            return None;
        }
        Some(Plane {
            a: (cxz * cyy - cyz * cxy) / det,
            b: (cyz * cxx - cxz * cxy) / det,
            x0: self.x0 + mx,
            y0: self.y0 + my,
            z0: mz,
        })
    }
}

fn fit_cells<'a>(cells: impl IntoIterator<Item = &'a RoofCell>) -> Option<Plane> {
    let mut it = cells.into_iter().peekable();
    let first = **it.peek()?;
    let mut fit = PlaneFit::new(first.x, first.y);
    for c in it {
        fit.add(c.x, c.y, c.z);
    }
    fit.solve()
}

fn residual(plane: &Plane, c: &RoofCell) -> f64 {
    (c.z - plane.eval(c.x, c.y)).abs()
}

/// One candidate per grid position holding building points: the highest
/// building point there. Non-building classes are ignored.
pub fn candidate_roof_points(pc: &PointCloud, cell: f64) -> Result<RoofCells> {
    if !(cell > 0.0 && cell.is_finite()) {
        return Err(Error::Invalid(format!("DSM cell size must be > 0, got {cell}")));
    }
    let mut out = RoofCells::new(cell);
    for p in pc.of_class(PointClass::Building) {
        let key = out.cell_index(p.x, p.y);
        out.cells
            .entry(key)
            .and_modify(|v| {
                if p.z > v.2 {
                    *v = (p.x, p.y, p.z);
                }
            })
            .or_insert((p.x, p.y, p.z));
    }
    if out.is_empty() {
        return Err(Error::NoBuildingPoints);
    }
    Ok(out)
}

/// Keeps a cell when every present 4-neighbour differs by less than
/// `threshold`. Missing neighbours do not count against a cell.
pub fn filter_wall_edges(cells: &RoofCells, threshold: f64) -> RoofCells {
    let kept = cells.iter().filter(|c| {
        NEIGHBORS_4
            .iter()
            .all(|&(dr, dc)| match cells.get(c.row + dr, c.col + dc) {
                Some(z) => (c.z - z).abs() < threshold,
                None => true,
            })
    });
    RoofCells::from_cells(cells.cell, kept.collect::<Vec<_>>())
}

/// Maximal 8-connected components, each sorted by `(row, col)` and the list
/// ordered by each component's first cell.
pub fn label_components(cells: &RoofCells) -> Vec<Vec<RoofCell>> {
    let mut visited: BTreeSet<(i64, i64)> = BTreeSet::new();
    let mut out = Vec::new();
    for start in cells.iter() {
        if !visited.insert((start.row, start.col)) {
            continue;
        }
        let mut comp = vec![start];
        let mut stack = vec![start];
        while let Some(c) = stack.pop() {
            for (dr, dc) in NEIGHBORS_8 {
                let key = (c.row + dr, c.col + dc);
                if let Some(n) = cells.cell_at(key.0, key.1) {
                    if visited.insert(key) {
                        comp.push(n);
                        stack.push(n);
                    }
                }
            }
        }
        comp.sort_by_key(|c| (c.row, c.col));
        out.push(comp);
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GrowParams {
    /// Maximum deviation of a cell's local normal from the seed normal.
    pub normal_tol_deg: f64,
    /// Maximum vertical distance of a member cell from its segment plane.
    pub residual_tol_m: f64,
}

impl Default for GrowParams {
    fn default() -> Self {
        Self {
            normal_tol_deg: 10.0,
            residual_tol_m: 0.2,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RoofSegment {
    /// Member cells sorted by `(row, col)`.
    pub cells: Vec<RoofCell>,
    pub cell_size: f64,
    pub plane: Plane,
    pub slope_deg: f64,
    pub area_m2: f64,
    pub building_id: Option<String>,
}

impl RoofSegment {
    fn from_members(mut cells: Vec<RoofCell>, cell_size: f64, fallback: Plane) -> Self {
        cells.sort_by_key(|c| (c.row, c.col));
        let plane = fit_cells(&cells).unwrap_or(fallback);
        let mut seg = Self {
            cells,
            cell_size,
            plane,
            slope_deg: 0.0,
            area_m2: 0.0,
            building_id: None,
        };
        let (slope, area) = segment_slope_area(&seg, cell_size);
        seg.slope_deg = slope;
        seg.area_m2 = area;
        seg
    }

    /// Member cell closest to the mean of the member centres.
    pub fn centroid_cell(&self) -> RoofCell {
        let n = self.cells.len() as f64;
        let (sx, sy) = self.cells.iter().fold((0.0, 0.0), |(sx, sy), c| {
            let (x, y) = c.center(self.cell_size);
            (sx + x, sy + y)
        });
        let (mx, my) = (sx / n, sy / n);
        *self
            .cells
            .iter()
            .min_by(|a, b| {
                let da = dist2(a.center(self.cell_size), (mx, my));
                let db = dist2(b.center(self.cell_size), (mx, my));
                da.total_cmp(&db)
            })
            .expect("segments are never empty")
    }
}

fn dist2(a: (f64, f64), b: (f64, f64)) -> f64 {
    (a.0 - b.0).powi(2) + (a.1 - b.1).powi(2)
}

/// Slope from the least-squares plane through the member cells (or the
/// stored local plane when the members are too few or collinear) and the
/// plan-view area `cells × cell²`.
pub fn segment_slope_area(segment: &RoofSegment, cell: f64) -> (f64, f64) {
    let plane = fit_cells(&segment.cells).unwrap_or(segment.plane);
    (plane.slope_deg(), segment.cells.len() as f64 * cell * cell)
}

struct Component<'a> {
    cells: &'a [RoofCell],
    index: HashMap<(i64, i64), usize>,
}

impl<'a> Component<'a> {
    fn new(cells: &'a [RoofCell]) -> Self {
        let index = cells.iter().enumerate().map(|(i, c)| ((c.row, c.col), i)).collect();
        Self { cells, index }
    }

    fn neighbors(&self, i: usize) -> impl Iterator<Item = usize> + '_ {
        let c = self.cells[i];
        NEIGHBORS_8
            .iter()
            .filter_map(move |&(dr, dc)| self.index.get(&(c.row + dr, c.col + dc)).copied())
    }

    /// Local plane over the 3×3 neighbourhood and its RMS residual.
    fn local_plane(&self, i: usize) -> Option<(Plane, f64)> {
        let members: Vec<&RoofCell> = std::iter::once(i)
            .chain(self.neighbors(i))
            .map(|j| &self.cells[j])
            .collect();
        let plane = fit_cells(members.iter().copied())?;
        let ss: f64 = members.iter().map(|c| residual(&plane, c).powi(2)).sum();
        Some((plane, (ss / members.len() as f64).sqrt()))
    }

    fn fit(&self, members: &[usize]) -> Option<Plane> {
        fit_cells(members.iter().map(|&j| &self.cells[j]))
    }

    fn residual(&self, plane: &Plane, i: usize) -> f64 {
        residual(plane, &self.cells[i])
    }

    /// At most two cells thick across its narrowest direction, judged on
    /// cell indices.
    fn is_strip(&self, members: &[usize]) -> bool {
        let n = members.len() as f64;
        let (mut sr, mut sc) = (0.0, 0.0);
        for &m in members {
            sr += self.cells[m].row as f64;
            sc += self.cells[m].col as f64;
        }
        let (mr, mc) = (sr / n, sc / n);
        let (mut vrr, mut vcc, mut vrc) = (0.0, 0.0, 0.0);
        for &m in members {
            let (dr, dc) = (self.cells[m].row as f64 - mr, self.cells[m].col as f64 - mc);
            vrr += dr * dr;
            vcc += dc * dc;
            vrc += dr * dc;
        }
        let (a, c, b) = (vrr / n, vcc / n, vrc / n);
        let minor = (a + c) / 2.0 - (((a - c) / 2.0).powi(2) + b * b).sqrt();
        minor <= 0.25 + 1e-9
    }

    /// Splits `members` into 8-connected parts, largest first, ties by
    /// lowest index.
    fn connected_parts(&self, members: &[usize]) -> Vec<Vec<usize>> {
        let set: BTreeSet<usize> = members.iter().copied().collect();
        let mut seen = BTreeSet::new();
        let mut parts = Vec::new();
        for &m in &set {
            if !seen.insert(m) {
                continue;
            }
            let mut part = vec![m];
            let mut stack = vec![m];
            while let Some(q) = stack.pop() {
                for nb in self.neighbors(q) {
                    if set.contains(&nb) && seen.insert(nb) {
                        part.push(nb);
                        stack.push(nb);
                    }
                }
            }
            part.sort_unstable();
            parts.push(part);
        }
        parts.sort_by(|a, b| b.len().cmp(&a.len()).then(a[0].cmp(&b[0])));
        parts
    }

    /// Refits and ejects out-of-tolerance members until the segment is
    /// consistent; keeps only the largest connected part.
    fn tighten(&self, mut members: Vec<usize>, fallback: Plane, tol: f64) -> (Vec<usize>, Plane) {
        for _ in 0..32 {
            let plane = self.fit(&members).unwrap_or(fallback);
            let (keep, drop): (Vec<usize>, Vec<usize>) =
                members.iter().partition(|&&j| self.residual(&plane, j) <= tol);
            if drop.is_empty() {
                return (members, plane);
            }
            members = self.connected_parts(&keep).into_iter().next().unwrap_or_default();
            if members.is_empty() {
                return (members, plane);
            }
        }
        let plane = self.fit(&members).unwrap_or(fallback);
        (members, plane)
    }
}

/// Splits one connected component into planar roof segments.
///
/// Seeds are taken in order of increasing local curvature (RMS residual of
/// the 3×3 neighbourhood plane), ties by `(row, col)`. A segment admits an
/// 8-neighbour whose local normal lies within `normal_tol_deg` of the seed
/// normal and whose elevation lies within `residual_tol_m` of the running
/// segment plane. Grown regions at most two cells thick are ridge or eave
/// lines and are discarded, unless they make up the whole component. Cells rejected by the normal test (ridges, step
/// edges) are afterwards attached to an adjacent segment whose plane they fit;
/// whatever remains becomes a singleton segment.
pub fn grow_segments(component: &[RoofCell], cell: f64, params: &GrowParams) -> Vec<RoofSegment> {
    if component.is_empty() {
        return Vec::new();
    }
    let comp = Component::new(component);
    let n = component.len();
    let tol = params.residual_tol_m;
    let local: Vec<Option<(Plane, f64)>> = (0..n).map(|i| comp.local_plane(i)).collect();

    let mut seeds: Vec<usize> = (0..n)
        .filter(|&i| matches!(local[i], Some((_, rms)) if rms <= tol))
        .collect();
    seeds.sort_by(|&i, &j| {
        let (ri, rj) = (local[i].unwrap().1, local[j].unwrap().1);
        ri.total_cmp(&rj)
            .then((component[i].row, component[i].col).cmp(&(component[j].row, component[j].col)))
    });

    let mut label: Vec<Option<usize>> = vec![None; n];
    let mut segs: Vec<(Vec<usize>, Plane)> = Vec::new();

    let fits_adjacent = |i: usize, label: &[Option<usize>], segs: &[(Vec<usize>, Plane)]| {
        comp.neighbors(i)
            .filter_map(|j| label[j])
            .any(|k| comp.residual(&segs[k].1, i) <= tol)
    };

    for &seed in &seeds {
        if label[seed].is_some() || fits_adjacent(seed, &label, &segs) {
            continue;
        }
        let (seed_plane, _) = local[seed].unwrap();
        let sc = component[seed];
        let mut fit = PlaneFit::new(sc.x, sc.y);
        fit.add(sc.x, sc.y, sc.z);
        let mut plane = seed_plane;
        let mut members = vec![seed];
        let mut in_seg = BTreeSet::from([seed]);
        let mut queue = VecDeque::from([seed]);
        while let Some(q) = queue.pop_front() {
            for nb in comp.neighbors(q) {
                if label[nb].is_some() || in_seg.contains(&nb) {
                    continue;
                }
                let Some((nb_plane, _)) = local[nb] else { continue };
                if nb_plane.normal_angle_deg(&seed_plane) > params.normal_tol_deg {
                    continue;
                }
                if comp.residual(&plane, nb) > tol {
                    continue;
                }
                in_seg.insert(nb);
                members.push(nb);
                let c = component[nb];
                fit.add(c.x, c.y, c.z);
                if let Some(p) = fit.solve() {
                    plane = p;
                }
                queue.push_back(nb);
            }
        }
        let (members, plane) = comp.tighten(members, seed_plane, tol);
        // ridge and eave lines are not roof planes
        if members.is_empty() || comp.fit(&members).is_none() || (members.len() < n && comp.is_strip(&members)) {
            continue;
        }
        let k = segs.len();
        for &m in &members {
            label[m] = Some(k);
        }
        segs.push((members, plane));
    }

    // attach leftovers that fit a neighbouring segment's plane
    loop {
        let mut changed = false;
        for i in 0..n {
            if label[i].is_some() {
                continue;
            }
            let best = comp
                .neighbors(i)
                .filter_map(|j| label[j])
                .map(|k| (comp.residual(&segs[k].1, i), k))
                .filter(|&(r, _)| r <= tol)
                .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            if let Some((_, k)) = best {
                label[i] = Some(k);
                segs[k].0.push(i);
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }

    // attachments can move the least-squares plane; re-tighten
    for k in 0..segs.len() {
        let members = std::mem::take(&mut segs[k].0);
        let fallback = segs[k].1;
        let (kept, plane) = comp.tighten(members.clone(), fallback, tol);
        let kept_set: BTreeSet<usize> = kept.iter().copied().collect();
        for m in members {
            if !kept_set.contains(&m) {
                label[m] = None;
            }
        }
        segs[k] = (kept, plane);
    }

    let mut out: Vec<RoofSegment> = segs
        .into_iter()
        .filter(|(m, _)| !m.is_empty())
        .map(|(members, plane)| RoofSegment::from_members(members.iter().map(|&j| component[j]).collect(), cell, plane))
        .collect();
    for i in 0..n {
        if label[i].is_none() {
            let c = component[i];
            let fallback = local[i].map(|(p, _)| p).unwrap_or(Plane::horizontal(c.x, c.y, c.z));
            out.push(RoofSegment::from_members(vec![c], cell, fallback));
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PotentialThresholds {
    /// Segments must be strictly flatter than this.
    pub max_slope_deg: f64,
    /// Segments must be strictly larger than this.
    pub min_area_m2: f64,
    /// Buildings older than this cannot carry the load.
    pub max_age_years: u32,
}

impl Default for PotentialThresholds {
    fn default() -> Self {
        Self {
            max_slope_deg: 15.0,
            min_area_m2: 10.0,
            max_age_years: 60,
        }
    }
}

impl PotentialThresholds {
    pub fn qualifies(&self, slope_deg: f64, area_m2: f64) -> bool {
        slope_deg < self.max_slope_deg && area_m2 > self.min_area_m2
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Reason {
    Slope,
    Area,
    Age,
}

impl Reason {
    pub fn as_str(self) -> &'static str {
        match self {
            Reason::Slope => "slope",
            Reason::Area => "area",
            Reason::Age => "age",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "slope" => Some(Reason::Slope),
            "area" => Some(Reason::Area),
            "age" => Some(Reason::Age),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PotentialDecision {
    pub building_id: String,
    pub potential: bool,
    pub reasons: BTreeSet<Reason>,
    /// Sum of qualifying segment areas; zero when not potential.
    pub greenable_area_m2: f64,
}

/// Reasons join with `+`, e.g. `slope+area`; empty for potential buildings.
pub fn format_reasons(reasons: &BTreeSet<Reason>) -> String {
    reasons.iter().map(|r| r.as_str()).collect::<Vec<_>>().join("+")
}

/// A building is potential when it is not too old and at least one of its
/// segments is both flat enough and large enough.
pub fn decide_potential(
    building: &BuildingAttributes,
    segments: &[&RoofSegment],
    thresholds: &PotentialThresholds,
) -> PotentialDecision {
    let mut reasons = BTreeSet::new();
    if building.age_years > thresholds.max_age_years {
        reasons.insert(Reason::Age);
    }
    let qualifying: f64 = segments
        .iter()
        .filter(|s| thresholds.qualifies(s.slope_deg, s.area_m2))
        .map(|s| s.area_m2)
        .sum();
    let any_qualifying = segments.iter().any(|s| thresholds.qualifies(s.slope_deg, s.area_m2));
    if segments.is_empty() {
        reasons.insert(Reason::Area);
    } else if !any_qualifying {
        for s in segments {
            if s.slope_deg >= thresholds.max_slope_deg {
                reasons.insert(Reason::Slope);
            }
            if s.area_m2 <= thresholds.min_area_m2 {
                reasons.insert(Reason::Area);
            }
        }
    }
    let potential = reasons.is_empty();
    PotentialDecision {
        building_id: building.id.clone(),
        potential,
        reasons,
        greenable_area_m2: if potential { qualifying } else { 0.0 },
    }
}

type Buckets = HashMap<(i64, i64), Vec<(f64, f64, f64)>>;

/// Bucketed ground points for neighbourhood minimum queries.
#[derive(Debug, Clone)]
pub struct GroundIndex {
    bucket: f64,
    buckets: Buckets,
}

impl GroundIndex {
    pub fn new(pc: &PointCloud, bucket: f64) -> Self {
        let mut buckets: Buckets = HashMap::new();
        for p in pc.of_class(PointClass::Ground) {
            let key = ((p.y / bucket).floor() as i64, (p.x / bucket).floor() as i64);
            buckets.entry(key).or_default().push((p.x, p.y, p.z));
        }
        Self { bucket, buckets }
    }

    pub fn from_points(points: &[Point3], bucket: f64) -> Self {
        Self::new(&PointCloud::new(points.to_vec()), bucket)
    }

    /// Minimum ground elevation within `radius` of the footprint, 0 when
    /// no ground point is that close.
    pub fn ground_elevation(&self, footprint: &Polygon, radius: f64) -> f64 {
        let (x0, y0, x1, y1) = footprint.bbox();
        let (r0, c0) = (
            ((y0 - radius) / self.bucket).floor() as i64,
            ((x0 - radius) / self.bucket).floor() as i64,
        );
        let (r1, c1) = (
            ((y1 + radius) / self.bucket).floor() as i64,
            ((x1 + radius) / self.bucket).floor() as i64,
        );
        let mut best: Option<f64> = None;
        for row in r0..=r1 {
            for col in c0..=c1 {
                let Some(pts) = self.buckets.get(&(row, col)) else {
                    continue;
                };
                for &(x, y, z) in pts {
                    if best.is_some_and(|b| z >= b) {
                        continue;
                    }
                    if footprint.distance([x, y]) <= radius {
                        best = Some(z);
                    }
                }
            }
        }
        best.unwrap_or(0.0)
    }
}

/// Median roof-cell elevation above `ground_z`, clamped at zero. `cells`
/// are the roof cells attributed to the building.
pub fn building_height(building: &BuildingAttributes, cells: &[RoofCell], ground_z: f64) -> Result<f64> {
    if cells.is_empty() {
        return Err(Error::NoRoofCells(building.id.clone()));
    }
    let mut z: Vec<f64> = cells.iter().map(|c| c.z).collect();
    z.sort_by(f64::total_cmp);
    let m = z.len() / 2;
    let median = if z.len() % 2 == 1 {
        z[m]
    } else {
        0.5 * (z[m - 1] + z[m])
    };
    Ok((median - ground_z).max(0.0))
}

/// Index of the first footprint containing each segment's centroid cell.
pub fn assign_segments(segments: &mut [RoofSegment], buildings: &[BuildingAttributes]) {
    let boxes: Vec<_> = buildings.iter().map(|b| b.footprint.bbox()).collect();
    for seg in segments.iter_mut() {
        let (x, y) = seg.centroid_cell().center(seg.cell_size);
        seg.building_id = buildings
            .iter()
            .zip(&boxes)
            .find(|(b, &(x0, y0, x1, y1))| x >= x0 && x <= x1 && y >= y0 && y <= y1 && b.footprint.contains([x, y]))
            .map(|(b, _)| b.id.clone());
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExtractParams {
    pub cell: f64,
    pub wall_threshold_m: f64,
    pub grow: GrowParams,
    pub thresholds: PotentialThresholds,
    /// Search radius around a footprint for the ground elevation.
    pub ground_radius_m: f64,
}

impl Default for ExtractParams {
    fn default() -> Self {
        Self {
            cell: 1.0,
            wall_threshold_m: 1.0,
            grow: GrowParams::default(),
            thresholds: PotentialThresholds::default(),
            ground_radius_m: 10.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BuildingRoof {
    pub decision: PotentialDecision,
    /// Indices into [`RoofExtraction::segments`].
    pub segments: Vec<usize>,
    pub roof_area_m2: f64,
    /// Slope of the largest segment.
    pub slope_deg: Option<f64>,
    pub height_m: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RoofExtraction {
    pub cell: f64,
    pub candidate_count: usize,
    pub roof_cells: RoofCells,
    pub component_count: usize,
    /// Segments assigned to a footprint; unassigned ones are dropped.
    pub segments: Vec<RoofSegment>,
    /// Parallel to the input buildings.
    pub buildings: Vec<BuildingRoof>,
}

/// Runs candidate → wall filter → components → region growing →
/// assignment → potential decision and height for every building.
pub fn extract_roofs(
    pc: &PointCloud,
    buildings: &[BuildingAttributes],
    params: &ExtractParams,
) -> Result<RoofExtraction> {
    use rayon::prelude::*;

    let candidates = candidate_roof_points(pc, params.cell)?;
    let roof_cells = filter_wall_edges(&candidates, params.wall_threshold_m);
    let components = label_components(&roof_cells);
    let mut segments: Vec<RoofSegment> = components
        .par_iter()
        .map(|c| grow_segments(c, params.cell, &params.grow))
        .collect::<Vec<_>>()
        .into_iter()
        .flatten()
        .collect();
    assign_segments(&mut segments, buildings);
    segments.retain(|s| s.building_id.is_some());

    let mut by_building: HashMap<&str, Vec<usize>> = HashMap::new();
    for (i, s) in segments.iter().enumerate() {
        by_building
            .entry(s.building_id.as_deref().unwrap())
            .or_default()
            .push(i);
    }
    let ground = GroundIndex::new(pc, params.ground_radius_m.max(1.0));
    let out = buildings
        .iter()
        .map(|b| {
            let idx = by_building.get(b.id.as_str()).cloned().unwrap_or_default();
            let segs: Vec<&RoofSegment> = idx.iter().map(|&i| &segments[i]).collect();
            let decision = decide_potential(b, &segs, &params.thresholds);
            let roof_area_m2 = segs.iter().map(|s| s.area_m2).sum();
            let slope_deg = segs
                .iter()
                .max_by(|a, b| {
                    a.cells
                        .len()
                        .cmp(&b.cells.len())
                        .then(b.cells[0].row.cmp(&a.cells[0].row))
                })
                .map(|s| s.slope_deg);
            let cells: Vec<RoofCell> = segs.iter().flat_map(|s| s.cells.iter().copied()).collect();
            let height_m = if cells.is_empty() {
                None
            } else {
                let gz = ground.ground_elevation(&b.footprint, params.ground_radius_m);
                Some(building_height(b, &cells, gz)?)
            };
            Ok(BuildingRoof {
                decision,
                segments: idx,
                roof_area_m2,
                slope_deg,
                height_m,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(RoofExtraction {
        cell: params.cell,
        candidate_count: candidates.len(),
        roof_cells,
        component_count: components.len(),
        segments,
        buildings: out,
    })
}
