//! Seeded synthetic city with known roof geometry, for tests and demos.
//!
//! Buildings sit on a regular lot grid bounded by roads. Roof types cover
//! flat roofs (some with a chimney box), low- and steep-pitched gables,
//! tiny huts and old buildings, so every branch of the potential decision
//! is exercised. The generator also writes station samples, a population
//! raster and four seasonal temperature rasters with cloud gaps.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::Result;
use crate::geocore::{Point3, PointClass, PointCloud, Polygon, Polyline, RasterGrid, RoadClass};
use crate::ingest::{self, BuildingAttributes, Category, StationSample};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SyntheticCitySpec {
    pub seed: u64,
    pub buildings: usize,
    /// Lot edge length; roads run along lot boundaries.
    pub lot_m: f64,
    /// Open land around the built-up area.
    pub margin_m: f64,
    /// Spacing of the jittered roof point grid.
    pub roof_spacing_m: f64,
    pub origin: (f64, f64),
}

impl Default for SyntheticCitySpec {
    fn default() -> Self {
        Self {
            seed: 42,
            buildings: 60,
            lot_m: 60.0,
            margin_m: 150.0,
            roof_spacing_m: 0.5,
            origin: (830_100.0, 815_100.0),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RoofType {
    Flat,
    FlatChimney,
    LowGable,
    SteepGable,
    Small,
    Old,
}

impl RoofType {
    pub fn as_str(self) -> &'static str {
        match self {
            RoofType::Flat => "flat",
            RoofType::FlatChimney => "flat_chimney",
            RoofType::LowGable => "low_gable",
            RoofType::SteepGable => "steep_gable",
            RoofType::Small => "small",
            RoofType::Old => "old",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TruthRow {
    pub id: String,
    pub roof_type: RoofType,
    pub pitch_deg: f64,
    pub footprint_area_m2: f64,
    pub eave_height_m: f64,
    pub age_years: u32,
    pub potential: bool,
    /// Expected reason for rejection, empty when potential.
    pub reason: &'static str,
}

#[derive(Debug, Clone)]
pub struct SyntheticCity {
    pub points: PointCloud,
    pub buildings: Vec<BuildingAttributes>,
    pub roads: Vec<Polyline>,
    pub precip: Vec<StationSample>,
    pub income: Vec<StationSample>,
    pub population: RasterGrid,
    /// Spring, summer, autumn, winter.
    pub temperatures: [RasterGrid; 4],
    pub truth: Vec<TruthRow>,
    pub extent: (f64, f64, f64, f64),
}

struct Plan {
    kind: RoofType,
    x0: f64,
    y0: f64,
    w: f64,
    d: f64,
    pitch_deg: f64,
    eave: f64,
    age: u32,
    category: Category,
    chimney: Option<(f64, f64)>,
}

impl Plan {
    fn roof_z(&self, base: f64, x: f64) -> f64 {
        match self.kind {
            RoofType::LowGable | RoofType::SteepGable => {
                let half = self.w / 2.0;
                let t = self.pitch_deg.to_radians().tan();
                base + self.eave + t * (half - (x - (self.x0 + half)).abs())
            }
            _ => base + self.eave,
        }
    }
}

fn terrain(spec: &SyntheticCitySpec, x: f64, y: f64) -> f64 {
    2.0 + 0.004 * (x - spec.origin.0) + 0.002 * (y - spec.origin.1)
}

fn type_mix(n: usize) -> Vec<RoofType> {
    let share = |k: usize| (n * k / 10).max(usize::from(n >= 6));
    let mut v = Vec::with_capacity(n);
    for (kind, k) in [
        (RoofType::Old, 1),
        (RoofType::Small, 1),
        (RoofType::FlatChimney, 1),
        (RoofType::SteepGable, 2),
        (RoofType::LowGable, 2),
    ] {
        v.extend(std::iter::repeat_n(kind, share(k)));
    }
    v.truncate(n);
    v.resize(n, RoofType::Flat);
    v
}

/// Generates the city in memory. Identical specs give identical cities.
pub fn generate(spec: &SyntheticCitySpec) -> SyntheticCity {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let n = spec.buildings;
    let cols = (n as f64).sqrt().ceil().max(1.0) as usize;
    let rows = n.div_ceil(cols).max(1);
    let (ox, oy) = spec.origin;
    let width = 2.0 * spec.margin_m + cols as f64 * spec.lot_m;
    let height = 2.0 * spec.margin_m + rows as f64 * spec.lot_m;
    let extent = (ox, oy, ox + width, oy + height);
    let (cx, cy) = (ox + width / 2.0, oy + height / 2.0);

    let mut kinds = type_mix(n);
    kinds.shuffle(&mut rng);
    let categories = [Category::Private, Category::Public, Category::Misc];

    let mut plans = Vec::with_capacity(n);
    for (i, &kind) in kinds.iter().enumerate() {
        let lot_x = ox + spec.margin_m + (i % cols) as f64 * spec.lot_m;
        let lot_y = oy + spec.margin_m + (i / cols) as f64 * spec.lot_m;
        let inner = spec.lot_m - 16.0;
        let (w, d) = match kind {
            RoofType::Small => (1.8, 1.8),
            RoofType::LowGable | RoofType::SteepGable => (rng.random_range(12.0..18.0), rng.random_range(12.0..20.0)),
            _ => (rng.random_range(10.0..22.0), rng.random_range(10.0..22.0)),
        };
        let x0 = lot_x + 8.0 + rng.random_range(0.0..(inner - w));
        let y0 = lot_y + 8.0 + rng.random_range(0.0..(inner - d));
        let pitch_deg = match kind {
            RoofType::LowGable => rng.random_range(8.0..12.0),
            RoofType::SteepGable => rng.random_range(25.0..35.0),
            _ => 0.0,
        };
        let eave = match kind {
            RoofType::Small => rng.random_range(2.5..4.0),
            _ => rng.random_range(8.0..45.0),
        };
        let age = match kind {
            RoofType::Old => rng.random_range(61..95),
            _ => {
                if rng.random_bool(0.1) {
                    60
                } else {
                    rng.random_range(3..60)
                }
            }
        };
        let category = categories[rng.random_range(0..3)];
        let chimney = (kind == RoofType::FlatChimney).then(|| {
            (
                x0 + rng.random_range(3.0..(w - 4.2)),
                y0 + rng.random_range(3.0..(d - 4.2)),
            )
        });
        plans.push(Plan {
            kind,
            x0,
            y0,
            w,
            d,
            pitch_deg,
            eave,
            age,
            category,
            chimney,
        });
    }

    let width_digits = n.to_string().len().max(3);
    let mut points = Vec::new();
    let mut buildings = Vec::with_capacity(n);
    let mut truth = Vec::with_capacity(n);
    let jitter = 0.3 * spec.roof_spacing_m;
    let z_noise = 0.02;
    for (i, p) in plans.iter().enumerate() {
        let id = format!("B{:0width$}", i + 1, width = width_digits);
        let base = terrain(spec, p.x0, p.y0);
        let s = spec.roof_spacing_m;
        let nx = (p.w / s).floor() as usize;
        let ny = (p.d / s).floor() as usize;
        let (padx, pady) = ((p.w - (nx as f64 - 1.0) * s) / 2.0, (p.d - (ny as f64 - 1.0) * s) / 2.0);
        for a in 0..nx.max(1) {
            for b in 0..ny.max(1) {
                let x = (p.x0 + padx + a as f64 * s + rng.random_range(-jitter..jitter))
                    .clamp(p.x0 + 0.01, p.x0 + p.w - 0.01);
                let y = (p.y0 + pady + b as f64 * s + rng.random_range(-jitter..jitter))
                    .clamp(p.y0 + 0.01, p.y0 + p.d - 0.01);
                let mut z = p.roof_z(base, x) + rng.random_range(-z_noise..z_noise);
                if let Some((hx, hy)) = p.chimney {
                    if (hx..hx + 1.2).contains(&x) && (hy..hy + 1.2).contains(&y) {
                        z += 2.5;
                    }
                }
                points.push(Point3::new(x, y, z, PointClass::Building));
            }
        }
        // walls up to the eave, inset so they fall into the outermost roof cells
        let inset = 0.05;
        let corners = [
            (p.x0 + inset, p.y0 + inset),
            (p.x0 + p.w - inset, p.y0 + inset),
            (p.x0 + p.w - inset, p.y0 + p.d - inset),
            (p.x0 + inset, p.y0 + p.d - inset),
        ];
        for k in 0..4 {
            let (ax, ay) = corners[k];
            let (bx, by) = corners[(k + 1) % 4];
            let len = (bx - ax).hypot(by - ay);
            let steps = (len / 2.0).ceil().max(1.0) as usize;
            for st in 0..steps {
                let f = st as f64 / steps as f64;
                let (x, y) = (ax + f * (bx - ax), ay + f * (by - ay));
                let mut z = base + p.eave;
                while z > base + 0.5 {
                    points.push(Point3::new(x, y, z, PointClass::Building));
                    z -= 2.0;
                }
            }
        }
        let footprint = Polygon::rect(p.x0, p.y0, p.x0 + p.w, p.y0 + p.d).expect("positive footprint");
        let (potential, reason) = match p.kind {
            RoofType::Old => (false, "age"),
            RoofType::Small => (false, "area"),
            RoofType::SteepGable => (false, "slope"),
            _ => (true, ""),
        };
        truth.push(TruthRow {
            id: id.clone(),
            roof_type: p.kind,
            pitch_deg: p.pitch_deg,
            footprint_area_m2: footprint.area(),
            eave_height_m: p.eave,
            age_years: p.age,
            potential,
            reason,
        });
        buildings.push(BuildingAttributes {
            id,
            age_years: p.age,
            category: p.category,
            footprint,
        });
    }

    let near_building = |x: f64, y: f64, pad: f64| {
        plans
            .iter()
            .any(|p| x >= p.x0 - pad && x <= p.x0 + p.w + pad && y >= p.y0 - pad && y <= p.y0 + p.d + pad)
    };

    // ground on a regular grid
    let mut gy = oy + 1.0;
    while gy < oy + height {
        let mut gx = ox + 1.0;
        while gx < ox + width {
            if !near_building(gx, gy, 0.0) {
                let z = terrain(spec, gx, gy) + rng.random_range(-0.03..0.03);
                points.push(Point3::new(gx, gy, z, PointClass::Ground));
            }
            gx += 5.0;
        }
        gy += 5.0;
    }

    // vegetation patches, denser towards the edge of town
    let n_patches = 12 + n / 3;
    for _ in 0..n_patches {
        let (px, py) = loop {
            let x = rng.random_range(ox..ox + width);
            let y = rng.random_range(oy..oy + height);
            let r = ((x - cx) / width).hypot((y - cy) / height);
            if rng.random_bool((0.25 + 1.5 * r).min(1.0)) {
                break (x, y);
            }
        };
        let radius = rng.random_range(12.0..40.0);
        let mut vy = py - radius;
        while vy <= py + radius {
            let mut vx = px - radius;
            while vx <= px + radius {
                let (x, y) = (vx + rng.random_range(-0.5..0.5), vy + rng.random_range(-0.5..0.5));
                let inside_city = x > ox && x < ox + width && y > oy && y < oy + height;
                if inside_city && (x - px).hypot(y - py) <= radius && !near_building(x, y, 2.0) {
                    let z = terrain(spec, x, y) + rng.random_range(1.0..10.0);
                    points.push(Point3::new(x, y, z, PointClass::Vegetation));
                }
                vx += 2.0;
            }
            vy += 2.0;
        }
    }

    // roads along lot boundaries; every third line is a main road
    let mut roads = Vec::new();
    let road_y0 = oy + spec.margin_m;
    let road_x0 = ox + spec.margin_m;
    for c in 0..=cols {
        let x = road_x0 + c as f64 * spec.lot_m;
        let class = if c % 3 == 0 { RoadClass::Main } else { RoadClass::Minor };
        roads.push(Polyline::new(vec![[x, oy + 5.0], [x, oy + height - 5.0]], class).expect("valid road"));
    }
    for r in 0..=rows {
        let y = road_y0 + r as f64 * spec.lot_m;
        let class = if r % 3 == 1 { RoadClass::Main } else { RoadClass::Minor };
        roads.push(Polyline::new(vec![[ox + 5.0, y], [ox + width - 5.0, y]], class).expect("valid road"));
    }
    for _ in 0..(n / 4) {
        let x = road_x0 + rng.random_range(0..=cols) as f64 * spec.lot_m + rng.random_range(-2.0..2.0);
        let y = rng.random_range(oy + 5.0..oy + height - 5.0);
        points.push(Point3::new(x, y, terrain(spec, x, y) + 1.5, PointClass::Other));
    }

    let noise = Normal::new(0.0, 1.0).expect("unit normal");
    let precip = (0..25)
        .map(|_| {
            let x = rng.random_range(ox..ox + width);
            let y = rng.random_range(oy..oy + height);
            let v = 2300.0 + 0.4 * (x - ox) - 0.25 * (y - oy) + 30.0 * noise.sample(&mut rng);
            StationSample::new(round3(x), round3(y), round3(v))
        })
        .collect();
    let income = (0..40)
        .map(|_| {
            let x = rng.random_range(ox + 50.0..ox + width - 50.0);
            let y = rng.random_range(oy + 50.0..oy + height - 50.0);
            let r2 = (x - cx).powi(2) + (y - cy).powi(2);
            let v = 16_000.0 + 26_000.0 * (-r2 / (2.0 * 220f64.powi(2))).exp() + 2_500.0 * noise.sample(&mut rng);
            StationSample::new(round3(x), round3(y), round3(v.max(5_000.0)))
        })
        .collect();

    let mut population = RasterGrid::covering(ox, oy, ox + width, oy + height, 100.0).expect("valid extent");
    for r in 0..population.nrows {
        for c in 0..population.ncols {
            let (x, y) = population.cell_center(r, c);
            let r2 = (x - cx).powi(2) + (y - cy).powi(2);
            let v = 900.0 * (-r2 / (2.0 * 260f64.powi(2))).exp() + rng.random_range(0.0..40.0);
            population.set(r, c, Some(if v < 60.0 { 0.0 } else { v.round() }));
        }
    }

    let base_t = [24.0, 31.5, 28.0, 17.5];
    let temperatures = std::array::from_fn(|s| {
        let mut g = RasterGrid::covering(ox, oy, ox + width, oy + height, 30.0).expect("valid extent");
        let gaps: Vec<(f64, f64, f64)> = if s == 1 || s == 2 {
            (0..2)
                .map(|_| {
                    (
                        rng.random_range(ox..ox + width),
                        rng.random_range(oy..oy + height),
                        rng.random_range(50.0..90.0),
                    )
                })
                .collect()
        } else {
            Vec::new()
        };
        for r in 0..g.nrows {
            for c in 0..g.ncols {
                let (x, y) = g.cell_center(r, c);
                if gaps.iter().any(|&(gx, gy, gr)| (x - gx).hypot(y - gy) <= gr) {
                    continue;
                }
                let r2 = (x - cx).powi(2) + (y - cy).powi(2);
                let v = base_t[s]
                    + 3.5 * (-r2 / (2.0 * 240f64.powi(2))).exp()
                    + 0.002 * (x - ox)
                    + 0.3 * noise.sample(&mut rng);
                g.set(r, c, Some(round3(v)));
            }
        }
        g
    });

    let points = points
        .into_iter()
        .map(|p| Point3::new(round3(p.x), round3(p.y), round3(p.z), p.cls))
        .collect();
    SyntheticCity {
        points: PointCloud::new(points),
        buildings,
        roads,
        precip,
        income,
        population,
        temperatures,
        truth,
        extent,
    }
}

/// Values as they will read back from the three-decimal files.
fn round3(v: f64) -> f64 {
    let r = (v * 1000.0).round() / 1000.0;
    if r == 0.0 {
        0.0
    } else {
        r
    }
}

pub const TRUTH_HEADER: &str = "id,roof_type,pitch_deg,footprint_area_m2,eave_height_m,age_years,potential,reason";

pub fn format_truth(rows: &[TruthRow]) -> String {
    let mut s = String::from(TRUTH_HEADER);
    s.push('\n');
    for r in rows {
        let _ = writeln!(
            s,
            "{},{},{:.3},{:.3},{:.3},{},{},{}",
            r.id,
            r.roof_type.as_str(),
            r.pitch_deg,
            r.footprint_area_m2,
            r.eave_height_m,
            r.age_years,
            u8::from(r.potential),
            r.reason
        );
    }
    s
}

/// File names used by [`write_dataset`], relative to the dataset directory.
pub const FILES: [(&str, &str); 11] = [
    ("points", "points.csv"),
    ("footprints", "footprints.geojson"),
    ("roads", "roads.geojson"),
    ("precip_stations", "precip_stations.csv"),
    ("income_samples", "income_samples.csv"),
    ("population", "population.asc"),
    ("temp_spring", "temp_spring.asc"),
    ("temp_summer", "temp_summer.asc"),
    ("temp_autumn", "temp_autumn.asc"),
    ("temp_winter", "temp_winter.asc"),
    ("ground_truth", "ground_truth.csv"),
];

/// Writes the dataset and a `pipeline.conf` pointing at it (output into
/// `out/` next to the configuration). Returns the configuration path.
pub fn write_dataset(city: &SyntheticCity, dir: &Path) -> Result<PathBuf> {
    std::fs::create_dir_all(dir).map_err(|e| crate::Error::io(dir, e))?;
    let path = |k: &str| dir.join(FILES.iter().find(|f| f.0 == k).expect("known file").1);
    ingest::write_point_cloud(&city.points, &path("points"))?;
    ingest::write_footprints(&city.buildings, &path("footprints"))?;
    ingest::write_roads(&city.roads, &path("roads"))?;
    ingest::write_samples(&city.precip, &path("precip_stations"))?;
    ingest::write_samples(&city.income, &path("income_samples"))?;
    ingest::write_raster_asc(&city.population, &path("population"))?;
    for (k, g) in ["temp_spring", "temp_summer", "temp_autumn", "temp_winter"]
        .iter()
        .zip(&city.temperatures)
    {
        ingest::write_raster_asc(g, &path(k))?;
    }
    ingest::write_text(&path("ground_truth"), &format_truth(&city.truth))?;
    let mut conf = String::from("# synthetic city\n");
    for (k, f) in FILES.iter().filter(|f| f.0 != "ground_truth") {
        let _ = writeln!(conf, "{k} = {f}");
    }
    // a city this small is a few hundred metres across
    conf.push_str("gc_radius = 150\n");
    conf.push_str("out = out\n");
    let conf_path = dir.join("pipeline.conf");
    ingest::write_text(&conf_path, &conf)?;
    Ok(conf_path)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(seed: u64, n: usize) -> SyntheticCitySpec {
        SyntheticCitySpec {
            seed,
            buildings: n,
            ..Default::default()
        }
    }

    #[test]
    fn counts_and_mix() {
        let city = generate(&small(42, 20));
        assert_eq!(city.buildings.len(), 20);
        assert_eq!(city.truth.len(), 20);
        for kind in [
            RoofType::Flat,
            RoofType::LowGable,
            RoofType::SteepGable,
            RoofType::Small,
            RoofType::Old,
            RoofType::FlatChimney,
        ] {
            assert!(city.truth.iter().any(|t| t.roof_type == kind), "{kind:?} missing");
        }
        let mut ids: Vec<_> = city.buildings.iter().map(|b| b.id.clone()).collect();
        ids.dedup();
        assert_eq!(ids.len(), 20);
    }

    #[test]
    fn same_seed_same_city() {
        let a = generate(&small(7, 12));
        let b = generate(&small(7, 12));
        assert_eq!(a.points, b.points);
        assert_eq!(a.truth, b.truth);
        for (x, y) in a.temperatures.iter().zip(&b.temperatures) {
            assert_eq!(ingest::format_raster_asc(x), ingest::format_raster_asc(y));
        }
        let c = generate(&small(8, 12));
        assert_ne!(a.points, c.points);
    }

    #[test]
    fn empty_city_is_valid() {
        let city = generate(&small(1, 0));
        assert!(city.buildings.is_empty());
        assert!(city.points.of_class(PointClass::Building).next().is_none());
        assert!(!city.points.is_empty());
    }

    #[test]
    fn footprints_are_separated() {
        let city = generate(&small(3, 30));
        for (i, a) in city.buildings.iter().enumerate() {
            for b in &city.buildings[i + 1..] {
                let (ax0, ay0, ax1, ay1) = a.footprint.bbox();
                let (bx0, by0, bx1, by1) = b.footprint.bbox();
                let gap_x = (bx0 - ax1).max(ax0 - bx1);
                let gap_y = (by0 - ay1).max(ay0 - by1);
                assert!(gap_x.max(gap_y) >= 3.0);
            }
        }
    }

    #[test]
    fn point_budget() {
        let city = generate(&SyntheticCitySpec {
            buildings: 200,
            ..Default::default()
        });
        let by = |c| city.points.of_class(c).count();
        assert!(
            city.points.len() <= 500_000,
            "{} points: b {} g {} v {}",
            city.points.len(),
            by(PointClass::Building),
            by(PointClass::Ground),
            by(PointClass::Vegetation)
        );
    }

    #[test]
    fn write_then_read_back() {
        let city = generate(&small(42, 6));
        let dir = tempfile::tempdir().unwrap();
        let conf = write_dataset(&city, dir.path()).unwrap();
        assert!(conf.ends_with("pipeline.conf"));
        let fps = ingest::read_footprints(&dir.path().join("footprints.geojson")).unwrap();
        assert_eq!(fps, city.buildings);
        let pc = ingest::read_point_cloud(&dir.path().join("points.csv")).unwrap();
        assert_eq!(pc, city.points);
    }
}
