//! The six greening indicators and their nondimensionalization.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geocore::{PointClass, PointCloud, Polygon, RasterGrid};
use crate::ingest::{Category, StationSample};
use crate::interp::{self, SampleSet, VariogramKind};
use crate::roofs::{RoofCell, RoofSegment};

/// Nondimensionalized indicators, each in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IndicatorVector {
    /// I_g, low surrounding greenspace means high demand.
    pub greenspace: f64,
    /// I_d, proximity to main roads.
    pub distance: f64,
    /// I_c, ownership category.
    pub category: f64,
    /// I_i, low income means high demand.
    pub income: f64,
    /// I_t, seasonally weighted land surface temperature.
    pub temperature: f64,
    /// I_p, annual precipitation.
    pub precipitation: f64,
}

impl IndicatorVector {
    pub const NAMES: [&'static str; 6] = ["i_g", "i_d", "i_c", "i_i", "i_t", "i_p"];

    pub fn to_array(&self) -> [f64; 6] {
        [
            self.greenspace,
            self.distance,
            self.category,
            self.income,
            self.temperature,
            self.precipitation,
        ]
    }

    pub fn from_array(v: [f64; 6]) -> Self {
        Self {
            greenspace: v[0],
            distance: v[1],
            category: v[2],
            income: v[3],
            temperature: v[4],
            precipitation: v[5],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Season {
    Spring,
    Summer,
    Autumn,
    Winter,
}

impl Season {
    pub const ALL: [Season; 4] = [Season::Spring, Season::Summer, Season::Autumn, Season::Winter];

    /// March–May spring, June–August summer, September–November autumn,
    /// December–February winter.
    pub fn of_month(month: u32) -> Result<Season> {
        match month {
            3..=5 => Ok(Season::Spring),
            6..=8 => Ok(Season::Summer),
            9..=11 => Ok(Season::Autumn),
            12 | 1 | 2 => Ok(Season::Winter),
            _ => Err(Error::Invalid(format!("month must be 1..=12, got {month}"))),
        }
    }

    pub fn months(self) -> [u32; 3] {
        match self {
            Season::Spring => [3, 4, 5],
            Season::Summer => [6, 7, 8],
            Season::Autumn => [9, 10, 11],
            Season::Winter => [12, 1, 2],
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Season::Spring => "spring",
            Season::Summer => "summer",
            Season::Autumn => "autumn",
            Season::Winter => "winter",
        }
    }
}

/// Nondimensionalized seasonal temperatures.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeasonalTemps {
    pub spring: f64,
    pub summer: f64,
    pub autumn: f64,
    pub winter: f64,
}

impl SeasonalTemps {
    pub fn from_array(t: [f64; 4]) -> Self {
        Self {
            spring: t[0],
            summer: t[1],
            autumn: t[2],
            winter: t[3],
        }
    }
}

/// Summer and autumn count four times as much as spring and winter.
pub fn combine_seasonal_temperature(t: &SeasonalTemps) -> f64 {
    (t.spring + 4.0 * t.summer + 4.0 * t.autumn + t.winter) / 10.0
}

/// Binary 5 m map of vegetated (and optionally greened roof) pixels with
/// per-row prefix counts for disk queries.
#[derive(Debug, Clone, PartialEq)]
pub struct GreenspaceMask {
    grid: RasterGrid,
    prefix: Vec<u32>,
}

impl GreenspaceMask {
    pub fn from_grid(grid: RasterGrid) -> Result<Self> {
        if grid.values().iter().any(|&v| v != 0.0 && v != 1.0) {
            return Err(Error::Invalid("greenspace mask must contain only 0 and 1".into()));
        }
        let (nr, nc) = (grid.nrows, grid.ncols);
        let mut prefix = vec![0u32; nr * (nc + 1)];
        for r in 0..nr {
            for c in 0..nc {
                let v = grid.values()[r * nc + c] as u32;
                prefix[r * (nc + 1) + c + 1] = prefix[r * (nc + 1) + c] + v;
            }
        }
        Ok(Self { grid, prefix })
    }

    pub fn grid(&self) -> &RasterGrid {
        &self.grid
    }

    pub fn count(&self) -> usize {
        self.grid.values().iter().filter(|&&v| v == 1.0).count()
    }

    fn row_count(&self, row: usize, c0: usize, c1: usize) -> u32 {
        let base = row * (self.grid.ncols + 1);
        self.prefix[base + c1 + 1] - self.prefix[base + c0]
    }
}

/// Pixels holding at least one vegetation point, plus (greened mode) every
/// pixel containing the centre of a potential roof cell. The frame is the
/// point-cloud bounding box snapped to the pixel size.
pub fn build_greenspace_mask(
    pc: &PointCloud,
    potential_roofs: Option<&[&RoofSegment]>,
    cell: f64,
) -> Result<GreenspaceMask> {
    let (x0, y0, x1, y1) = pc
        .bounds()
        .ok_or_else(|| Error::Invalid("greenspace mask needs a nonempty point cloud".into()))?;
    let mut grid = RasterGrid::covering(x0, y0, x1, y1, cell)?;
    grid.values_mut().iter_mut().for_each(|v| *v = 0.0);
    for p in pc.of_class(PointClass::Vegetation) {
        if let Some((r, c)) = grid.world_to_cell(p.x, p.y) {
            grid.set(r, c, Some(1.0));
        }
    }
    for seg in potential_roofs.unwrap_or_default() {
        for rc in &seg.cells {
            let (x, y) = rc.center(seg.cell_size);
            if let Some((r, c)) = grid.world_to_cell(x, y) {
                grid.set(r, c, Some(1.0));
            }
        }
    }
    GreenspaceMask::from_grid(grid)
}

/// Share of a disk of `radius` covered by 1-pixels, counting pixels whose
/// centres lie inside the disk. Pixels beyond the mask count as 0.
pub fn greenspace_coverage(mask: &GreenspaceMask, x: f64, y: f64, radius: f64) -> f64 {
    let g = &mask.grid;
    let r2 = radius * radius;
    let inside = |row: usize, col: usize| {
        let (cx, cy) = g.cell_center(row, col);
        let (dx, dy) = (cx - x, cy - y);
        dx * dx + dy * dy <= r2
    };
    let row_lo = ((y - radius - g.origin_y) / g.cell - 0.5).floor().max(0.0) as usize;
    let row_hi = ((y + radius - g.origin_y) / g.cell - 0.5).ceil();
    if row_hi < 0.0 {
        return 0.0;
    }
    let row_hi = (row_hi as usize).min(g.nrows.saturating_sub(1));
    let mut count: u64 = 0;
    for row in row_lo..=row_hi.min(g.nrows.saturating_sub(1)) {
        if g.nrows == 0 {
            break;
        }
        let (_, cy) = g.cell_center(row, 0);
        let dy = cy - y;
        if dy * dy > r2 {
            continue;
        }
        let half = (r2 - dy * dy).sqrt();
        let lo = ((x - half - g.origin_x) / g.cell - 0.5).floor();
        let hi = ((x + half - g.origin_x) / g.cell - 0.5).ceil();
        if hi < 0.0 || lo > (g.ncols as f64 - 1.0) {
            continue;
        }
        let mut c0 = lo.max(0.0) as usize;
        let mut c1 = (hi as usize).min(g.ncols - 1);
        while c0 <= c1 && !inside(row, c0) {
            c0 += 1;
        }
        while c1 >= c0 && !inside(row, c1) {
            if c1 == 0 {
                break;
            }
            c1 -= 1;
        }
        if c0 <= c1 && inside(row, c0) && inside(row, c1) {
            count += mask.row_count(row, c0, c1) as u64;
        }
    }
    let area = count as f64 * g.cell * g.cell;
    (area / (std::f64::consts::PI * r2)).min(1.0)
}

/// Mean coverage over the centres of `cells`.
pub fn cells_coverage_rate(cells: &[RoofCell], cell_size: f64, mask: &GreenspaceMask, radius: f64) -> f64 {
    if cells.is_empty() {
        return 0.0;
    }
    let sum: f64 = cells
        .iter()
        .map(|c| {
            let (x, y) = c.center(cell_size);
            greenspace_coverage(mask, x, y, radius)
        })
        .sum();
    sum / cells.len() as f64
}

/// Mean coverage over every cell of one roof segment.
pub fn roof_coverage_rate(roof: &RoofSegment, mask: &GreenspaceMask, radius: f64) -> f64 {
    cells_coverage_rate(&roof.cells, roof.cell_size, mask, radius)
}

/// Linear decay from 1 at the road to 0 at `cap`.
pub fn distance_indicator(d: f64, cap: f64) -> f64 {
    (1.0 - d / cap).max(0.0)
}

pub fn category_indicator(category: Category) -> f64 {
    match category {
        Category::Private => 0.5,
        Category::Public => 1.0,
        Category::Misc => 0.75,
    }
}

/// Mean of the valid surface cells whose centres lie inside the footprint,
/// or the value of the cell holding the centroid when there are none.
pub fn sample_surface_at_building(surface: &RasterGrid, footprint: &Polygon) -> Result<f64> {
    let [cx, cy] = footprint.centroid();
    let (crow, ccol) = surface
        .world_to_cell(cx, cy)
        .ok_or(Error::OutsideSurface { x: cx, y: cy })?;
    let (x0, y0, x1, y1) = footprint.bbox();
    let clamp_row = |y: f64| {
        ((y - surface.origin_y) / surface.cell)
            .floor()
            .clamp(0.0, surface.nrows as f64 - 1.0) as usize
    };
    let clamp_col = |x: f64| {
        ((x - surface.origin_x) / surface.cell)
            .floor()
            .clamp(0.0, surface.ncols as f64 - 1.0) as usize
    };
    let (mut sum, mut n) = (0.0, 0usize);
    for row in clamp_row(y0)..=clamp_row(y1) {
        for col in clamp_col(x0)..=clamp_col(x1) {
            let (x, y) = surface.cell_center(row, col);
            if let Some(v) = surface.get(row, col) {
                if footprint.contains([x, y]) {
                    sum += v;
                    n += 1;
                }
            }
        }
    }
    if n > 0 {
        return Ok(sum / n as f64);
    }
    surface
        .get(crow, ccol)
        .ok_or_else(|| Error::Invalid(format!("surface has no data at footprint centroid ({cx}, {cy})")))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Positive,
    Negative,
}

/// Min-max scaling; a constant column maps to 0.5 everywhere.
pub fn normalize_column(values: &[f64], direction: Direction) -> Vec<f64> {
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let span = max - min;
    values
        .iter()
        .map(|&v| {
            if !(span > 0.0) {
                0.5
            } else {
                match direction {
                    Direction::Positive => (v - min) / span,
                    Direction::Negative => (max - v) / span,
                }
            }
        })
        .collect()
}

/// Indicator inputs before nondimensionalization.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RawIndicators {
    /// Mean greenspace coverage over the roof.
    pub greenspace: f64,
    /// Already-decayed distance indicator.
    pub distance: f64,
    pub category: f64,
    pub income: f64,
    /// Spring, summer, autumn, winter.
    pub temperatures: [f64; 4],
    pub precipitation: f64,
}

/// Nondimensionalizes across the given population (the potential
/// buildings). Greenspace and income are negative indicators; the seasonal
/// temperatures (each scaled separately before weighting) and precipitation
/// are positive. Distance and category pass through unchanged.
pub fn normalize_indicators(raw: &[RawIndicators]) -> Vec<IndicatorVector> {
    let col = |f: &dyn Fn(&RawIndicators) -> f64| raw.iter().map(f).collect::<Vec<f64>>();
    let g = normalize_column(&col(&|r| r.greenspace), Direction::Negative);
    let i = normalize_column(&col(&|r| r.income), Direction::Negative);
    let p = normalize_column(&col(&|r| r.precipitation), Direction::Positive);
    let seasons: Vec<Vec<f64>> = (0..4)
        .map(|s| normalize_column(&col(&|r| r.temperatures[s]), Direction::Positive))
        .collect();
    raw.iter()
        .enumerate()
        .map(|(k, r)| IndicatorVector {
            greenspace: g[k],
            distance: r.distance,
            category: r.category,
            income: i[k],
            temperature: combine_seasonal_temperature(&SeasonalTemps::from_array([
                seasons[0][k],
                seasons[1][k],
                seasons[2][k],
                seasons[3][k],
            ])),
            precipitation: p[k],
        })
        .collect()
}

/// Fills nodata cells of a raster by ordinary kriging from its valid cells.
/// The variogram is fitted on at most `max_fit_samples` cells taken at a
/// regular stride.
pub fn fill_gaps_kriging(
    raster: &RasterGrid,
    kind: VariogramKind,
    k: usize,
    n_bins: usize,
    max_fit_samples: usize,
) -> Result<RasterGrid> {
    let valid: Vec<StationSample> = raster
        .iter_valid()
        .map(|(r, c, v)| {
            let (x, y) = raster.cell_center(r, c);
            StationSample::new(x, y, v)
        })
        .collect();
    let gaps: Vec<(usize, usize)> = (0..raster.nrows)
        .flat_map(|r| (0..raster.ncols).map(move |c| (r, c)))
        .filter(|&(r, c)| raster.is_nodata(r, c))
        .collect();
    if gaps.is_empty() {
        return Ok(raster.clone());
    }
    let all = SampleSet::new(valid, "")?;
    let stride = all.len().div_ceil(max_fit_samples.max(1)).max(1);
    let fit_set = SampleSet::new(all.samples().iter().step_by(stride).copied().collect(), "")?;
    let ev = interp::empirical_semivariogram(&fit_set, n_bins, None)?;
    let model = interp::fit_variogram(&ev, kind)?.model;
    let filled: Vec<f64> = gaps
        .par_iter()
        .map(|&(r, c)| {
            let (x, y) = raster.cell_center(r, c);
            interp::kriging_predict(&all, &model, x, y, k).map(|p| p.value)
        })
        .collect::<Result<_>>()?;
    let mut out = raster.clone();
    for (&(r, c), v) in gaps.iter().zip(filled) {
        out.set(r, c, Some(v));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geocore::Point3;
    use crate::roofs::Plane;
    use proptest::prelude::*;

    fn mask_from(nrows: usize, ncols: usize, cell: f64, f: impl Fn(usize, usize) -> bool) -> GreenspaceMask {
        let mut g = RasterGrid::filled(0.0, 0.0, cell, nrows, ncols, 0.0).unwrap();
        for r in 0..nrows {
            for c in 0..ncols {
                if f(r, c) {
                    g.set(r, c, Some(1.0));
                }
            }
        }
        GreenspaceMask::from_grid(g).unwrap()
    }

    fn naive_coverage(mask: &GreenspaceMask, x: f64, y: f64, radius: f64) -> f64 {
        let g = mask.grid();
        let mut n = 0usize;
        for r in 0..g.nrows {
            for c in 0..g.ncols {
                let (cx, cy) = g.cell_center(r, c);
                let (dx, dy) = (cx - x, cy - y);
                if dx * dx + dy * dy <= radius * radius && g.get(r, c) == Some(1.0) {
                    n += 1;
                }
            }
        }
        (n as f64 * g.cell * g.cell / (std::f64::consts::PI * radius * radius)).min(1.0)
    }

    #[test]
    fn mask_examples() {
        let ground = PointCloud::new(vec![
            Point3::new(0.0, 0.0, 0.0, PointClass::Ground),
            Point3::new(50.0, 50.0, 0.0, PointClass::Ground),
        ]);
        assert_eq!(build_greenspace_mask(&ground, None, 5.0).unwrap().count(), 0);

        let mut pts = ground.points.clone();
        pts.push(Point3::new(12.0, 13.0, 2.0, PointClass::Vegetation));
        let pc = PointCloud::new(pts);
        assert_eq!(build_greenspace_mask(&pc, None, 5.0).unwrap().count(), 1);

        let cells: Vec<RoofCell> = (20..30)
            .flat_map(|r| (20..30).map(move |c| RoofCell::centered(r, c, 10.0, 1.0)))
            .collect();
        let seg = RoofSegment {
            cells,
            cell_size: 1.0,
            plane: Plane::horizontal(0.0, 0.0, 10.0),
            slope_deg: 0.0,
            area_m2: 100.0,
            building_id: None,
        };
        let greened = build_greenspace_mask(&pc, Some(&[&seg]), 5.0).unwrap();
        assert_eq!(greened.count(), 1 + 4);
    }

    #[test]
    fn coverage_examples() {
        let full = mask_from(240, 240, 5.0, |_, _| true);
        let gc = greenspace_coverage(&full, 600.0, 600.0, 500.0);
        assert!((gc - 1.0).abs() <= 0.01, "{gc}");

        let empty = mask_from(240, 240, 5.0, |_, _| false);
        assert_eq!(greenspace_coverage(&empty, 600.0, 600.0, 500.0), 0.0);

        let half = mask_from(240, 240, 5.0, |_, c| c < 120);
        let gc = greenspace_coverage(&half, 600.0, 600.0, 500.0);
        assert!((gc - 0.5).abs() <= 0.01, "{gc}");
        assert_eq!(gc, naive_coverage(&half, 600.0, 600.0, 500.0));

        // a disk partly outside the mask only sees the mask's pixels
        assert!(greenspace_coverage(&full, 0.0, 0.0, 500.0) < 0.3);
    }

    #[test]
    fn roof_rate_examples() {
        let m = mask_from(40, 40, 5.0, |_, c| c < 20);
        let one = vec![RoofCell::centered(50, 60, 0.0, 1.0)];
        let gc = greenspace_coverage(&m, 60.5, 50.5, 50.0);
        assert_eq!(cells_coverage_rate(&one, 1.0, &m, 50.0), gc);
        let two = vec![
            RoofCell::centered(50, 60, 0.0, 1.0),
            RoofCell::centered(50, 130, 0.0, 1.0),
        ];
        let gc2 = greenspace_coverage(&m, 130.5, 50.5, 50.0);
        assert!((cells_coverage_rate(&two, 1.0, &m, 50.0) - 0.5 * (gc + gc2)).abs() < 1e-15);
    }

    #[test]
    fn distance_and_category() {
        assert_eq!(distance_indicator(0.0, 500.0), 1.0);
        assert_eq!(distance_indicator(500.0, 500.0), 0.0);
        assert_eq!(distance_indicator(900.0, 500.0), 0.0);
        assert_eq!(distance_indicator(250.0, 500.0), 0.5);
        assert_eq!(category_indicator(Category::Private), 0.5);
        assert_eq!(category_indicator(Category::Public), 1.0);
        assert_eq!(category_indicator(Category::Misc), 0.75);
    }

    #[test]
    fn surface_sampling() {
        let constant = RasterGrid::filled(0.0, 0.0, 30.0, 4, 4, 7.0).unwrap();
        let fp = Polygon::rect(10.0, 10.0, 50.0, 40.0).unwrap();
        assert_eq!(sample_surface_at_building(&constant, &fp).unwrap(), 7.0);

        let mut two = RasterGrid::filled(0.0, 0.0, 30.0, 4, 4, 0.0).unwrap();
        two.set(0, 0, Some(4.0));
        two.set(0, 1, Some(6.0));
        let fp = Polygon::rect(10.0, 10.0, 50.0, 20.0).unwrap();
        assert_eq!(sample_surface_at_building(&two, &fp).unwrap(), 5.0);

        let mut three = RasterGrid::filled(0.0, 0.0, 30.0, 4, 4, 0.0).unwrap();
        three.set(1, 1, Some(3.0));
        let tiny = Polygon::rect(31.0, 31.0, 33.0, 33.0).unwrap();
        assert_eq!(sample_surface_at_building(&three, &tiny).unwrap(), 3.0);

        let outside = Polygon::rect(500.0, 500.0, 510.0, 510.0).unwrap();
        assert!(matches!(
            sample_surface_at_building(&three, &outside),
            Err(Error::OutsideSurface { .. })
        ));
    }

    #[test]
    fn seasonal_combination() {
        let t = |a, b, c, d| combine_seasonal_temperature(&SeasonalTemps::from_array([a, b, c, d]));
        assert!((t(0.3, 0.3, 0.3, 0.3) - 0.3).abs() < 1e-15);
        assert!((t(0.0, 1.0, 1.0, 0.0) - 0.8).abs() < 1e-15);
        assert!((t(1.0, 0.0, 0.0, 1.0) - 0.2).abs() < 1e-15);
    }

    #[test]
    fn seasons_follow_calendar() {
        let expect = [
            (1, Season::Winter),
            (2, Season::Winter),
            (3, Season::Spring),
            (4, Season::Spring),
            (5, Season::Spring),
            (6, Season::Summer),
            (7, Season::Summer),
            (8, Season::Summer),
            (9, Season::Autumn),
            (10, Season::Autumn),
            (11, Season::Autumn),
            (12, Season::Winter),
        ];
        for (m, s) in expect {
            assert_eq!(Season::of_month(m).unwrap(), s);
            assert!(s.months().contains(&m));
        }
        assert!(Season::of_month(0).is_err() && Season::of_month(13).is_err());
    }

    #[test]
    fn normalization_examples() {
        assert_eq!(
            normalize_column(&[10.0, 20.0, 30.0], Direction::Positive),
            vec![0.0, 0.5, 1.0]
        );
        assert_eq!(
            normalize_column(&[10.0, 20.0, 30.0], Direction::Negative),
            vec![1.0, 0.5, 0.0]
        );
        assert_eq!(normalize_column(&[7.0, 7.0, 7.0], Direction::Positive), vec![0.5; 3]);
    }

    #[test]
    fn gap_fill_reproduces_smooth_field() {
        let mut g = RasterGrid::new(0.0, 0.0, 30.0, 12, 12).unwrap();
        for r in 0..12 {
            for c in 0..12 {
                if !(4..7).contains(&r) || !(4..7).contains(&c) {
                    g.set(r, c, Some(20.0 + 0.01 * (r * 30) as f64 + 0.02 * (c * 30) as f64));
                }
            }
        }
        let filled = fill_gaps_kriging(&g, VariogramKind::Spherical, 16, 15, 2000).unwrap();
        for r in 4..7 {
            for c in 4..7 {
                let truth = 20.0 + 0.01 * (r * 30) as f64 + 0.02 * (c * 30) as f64;
                let v = filled.get(r, c).unwrap();
                assert!((v - truth).abs() < 0.5, "({r},{c}) {v} vs {truth}");
            }
        }
        assert_eq!(filled.get(0, 0), g.get(0, 0));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]

        #[test]
        fn coverage_matches_pixel_scan(bits in proptest::collection::vec(proptest::bool::weighted(0.4), 200 * 200),
                                       queries in proptest::collection::vec((-100.0f64..1100.0, -100.0f64..1100.0), 100)) {
            let m = mask_from(200, 200, 5.0, |r, c| bits[r * 200 + c]);
            for (x, y) in queries {
                let fast = greenspace_coverage(&m, x, y, 500.0);
                let slow = naive_coverage(&m, x, y, 500.0);
                prop_assert!((fast - slow).abs() <= 1e-12, "{} vs {} at ({}, {})", fast, slow, x, y);
            }
        }

        #[test]
        fn greened_mask_never_lowers_coverage(bits in proptest::collection::vec(proptest::bool::weighted(0.3), 60 * 60),
                                              extra in proptest::collection::vec(proptest::bool::weighted(0.2), 60 * 60),
                                              x in 0.0f64..300.0, y in 0.0f64..300.0) {
            let base = mask_from(60, 60, 5.0, |r, c| bits[r * 60 + c]);
            let greened = mask_from(60, 60, 5.0, |r, c| bits[r * 60 + c] || extra[r * 60 + c]);
            prop_assert!(greenspace_coverage(&greened, x, y, 100.0) >= greenspace_coverage(&base, x, y, 100.0));
        }

        #[test]
        fn seasonal_within_hull(t in proptest::array::uniform4(0.0f64..1.0)) {
            let v = combine_seasonal_temperature(&SeasonalTemps::from_array(t));
            let lo = t.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = t.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            prop_assert!(v >= lo - 1e-12 && v <= hi + 1e-12);
        }

        #[test]
        fn normalization_preserves_order(v in proptest::collection::vec(-1e3f64..1e3, 2..40)) {
            let pos = normalize_column(&v, Direction::Positive);
            let neg = normalize_column(&v, Direction::Negative);
            for i in 0..v.len() {
                prop_assert!((0.0..=1.0).contains(&pos[i]) && (0.0..=1.0).contains(&neg[i]));
                for j in 0..v.len() {
                    if v[i] < v[j] {
                        prop_assert!(pos[i] <= pos[j] && neg[i] >= neg[j]);
                    }
                }
            }
        }
    }
}
