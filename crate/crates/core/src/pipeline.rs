//! Staged pipeline: each stage reads its inputs (and the previous stage's
//! artifacts) and writes files into the output directory.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde_json::{json, Map, Value};

use crate::benefits::{self, BenefitReport, EnergySavings};
use crate::config::PipelineConfig;
use crate::error::{Error, Result};
use crate::geocore::{self, PointCloud, RasterGrid, RoadClass};
use crate::indicators::{self, GreenspaceMask, IndicatorVector, RawIndicators, Season};
use crate::ingest::{self, fmt6, fmt6_opt, round6, BuildingAttributes, BuildingRecord, Category};
use crate::interp::{self, Method, SampleSet};
use crate::priority::{self, Scheme, WeightVector};
use crate::roofs::{self, format_reasons, RoofCell};

pub const POTENTIAL_CSV: &str = "potential.csv";
pub const POTENTIAL_GEOJSON: &str = "potential.geojson";
pub const SEGMENTS_CSV: &str = "segments.csv";
pub const ROOF_CELLS_CSV: &str = "roof_cells.csv";
pub const EXTRACT_SUMMARY: &str = "extract_summary.md";
pub const MASK_BASELINE: &str = "mask_baseline.asc";
pub const MASK_GREENED: &str = "mask_greened.asc";
pub const INCOME_ASC: &str = "income.asc";
pub const PRECIP_ASC: &str = "precipitation.asc";
pub const TEMP_FILLED: [&str; 4] = [
    "temp_spring_filled.asc",
    "temp_summer_filled.asc",
    "temp_autumn_filled.asc",
    "temp_winter_filled.asc",
];
pub const INDICATORS_CSV: &str = "indicators.csv";
pub const INDICATORS_SUMMARY: &str = "indicators_summary.md";
pub const PRIORITY_CSV: &str = "priority.csv";
pub const WEIGHTS_CSV: &str = "weights.csv";
pub const BUILDINGS_CSV: &str = "buildings.csv";
pub const BUILDINGS_GEOJSON: &str = "buildings.geojson";
pub const PRIORITIZE_SUMMARY: &str = "prioritize_summary.md";
pub const BENEFITS_CSV: &str = "benefits.csv";
pub const BENEFITS_SUMMARY: &str = "benefits_summary.md";
pub const REPORT_MD: &str = "report.md";

const POTENTIAL_HEADER: &str =
    "id,potential,reasons,age_years,category,roof_area_m2,greenable_area_m2,slope_deg,height_m,n_segments";
const SEGMENTS_HEADER: &str = "segment_id,building_id,cell_m,n_cells,slope_deg,area_m2,qualifies";
const ROOF_CELLS_HEADER: &str = "segment_id,row,col,x,y,z";
const INDICATORS_HEADER: &str =
    "id,g_raw,d_raw,c_raw,income_raw,t_spring_raw,t_summer_raw,t_autumn_raw,t_winter_raw,p_raw,i_g,i_d,i_c,i_i,i_t,i_p";
const PRIORITY_HEADER: &str = "id,p_equal,p_entropy,p_cv,p_critic,priority,rank,percentile";
const WEIGHTS_HEADER: &str = "scheme,active,w_g,w_d,w_c,w_i,w_t,w_p,zero_mean_columns";

/// Cap on the cells used to fit the gap-filling variogram of a raster.
const MAX_FIT_SAMPLES: usize = 1500;

/// One row of `potential.csv`.
#[derive(Debug, Clone, PartialEq)]
pub struct PotentialRow {
    pub id: String,
    pub potential: bool,
    pub reasons: String,
    pub age_years: u32,
    pub category: Category,
    pub roof_area_m2: f64,
    pub greenable_area_m2: f64,
    pub slope_deg: Option<f64>,
    pub height_m: Option<f64>,
    pub n_segments: usize,
}

/// One row of `segments.csv`.
#[derive(Debug, Clone, PartialEq)]
pub struct SegmentRow {
    pub segment_id: usize,
    pub building_id: String,
    pub cell_m: f64,
    pub n_cells: usize,
    pub slope_deg: f64,
    pub area_m2: f64,
    pub qualifies: bool,
}

/// One row of `priority.csv`.
#[derive(Debug, Clone, PartialEq)]
pub struct PriorityRow {
    pub id: String,
    /// Equal, entropy, CV, CRITIC.
    pub by_scheme: [f64; 4],
    pub priority: f64,
    pub rank: usize,
    pub percentile: f64,
}

fn artifact(cfg: &PipelineConfig, name: &str, stage: &'static str) -> Result<PathBuf> {
    let p = cfg.out.join(name);
    if p.is_file() {
        Ok(p)
    } else {
        Err(Error::MissingArtifact { path: p, stage })
    }
}

fn ensure_out(cfg: &PipelineConfig) -> Result<()> {
    fs::create_dir_all(&cfg.out).map_err(|e| Error::io(&cfg.out, e))
}

/// Splits a CSV with a known header into rows of fields, skipping blank lines.
fn read_table(path: &Path, header: &str) -> Result<Vec<(usize, Vec<String>)>> {
    let text = ingest::read_text(path)?;
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim() == header => {}
        _ => return Err(ingest::parse_err(path, 1, format!("expected header {header:?}"))),
    }
    let width = header.split(',').count();
    let mut rows = Vec::new();
    for (i, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let f: Vec<String> = line.split(',').map(|s| s.trim().to_string()).collect();
        if f.len() != width {
            return Err(ingest::parse_err(
                path,
                i + 1,
                format!("expected {width} fields, found {}", f.len()),
            ));
        }
        rows.push((i + 1, f));
    }
    Ok(rows)
}

fn opt_f64(path: &Path, line: usize, s: &str, name: &str) -> Result<Option<f64>> {
    if s.is_empty() {
        Ok(None)
    } else {
        ingest::parse_f64(path, line, s, name).map(Some)
    }
}

fn parse_usize(path: &Path, line: usize, s: &str, name: &str) -> Result<usize> {
    s.parse()
        .map_err(|_| ingest::parse_err(path, line, format!("{name}: expected a whole number, got {s:?}")))
}

fn parse_flag(path: &Path, line: usize, s: &str, name: &str) -> Result<bool> {
    match s {
        "1" => Ok(true),
        "0" => Ok(false),
        _ => Err(ingest::parse_err(
            path,
            line,
            format!("{name} must be 0 or 1, got {s:?}"),
        )),
    }
}

fn pct(v: f64) -> String {
    format!("{:.1}%", 100.0 * v)
}

// ---------------------------------------------------------------- extract

/// Roof extraction and potential decision. Returns the one-line summary.
pub fn run_extract(cfg: &PipelineConfig) -> Result<String> {
    let pc = ingest::read_point_cloud(&cfg.inputs.points)?;
    let buildings = ingest::read_footprints(&cfg.inputs.footprints)?;
    let ex = roofs::extract_roofs(&pc, &buildings, &cfg.extract_params())?;
    let thr = cfg.extract_params().thresholds;
    ensure_out(cfg)?;

    let mut seg_csv = String::from(SEGMENTS_HEADER);
    seg_csv.push('\n');
    let mut cell_csv = String::from(ROOF_CELLS_HEADER);
    cell_csv.push('\n');
    for (i, s) in ex.segments.iter().enumerate() {
        let _ = writeln!(
            seg_csv,
            "{i},{},{},{},{},{},{}",
            s.building_id.as_deref().unwrap_or(""),
            fmt6(s.cell_size),
            s.cells.len(),
            fmt6(s.slope_deg),
            fmt6(s.area_m2),
            thr.qualifies(s.slope_deg, s.area_m2) as u8
        );
        for c in &s.cells {
            let _ = writeln!(
                cell_csv,
                "{i},{},{},{},{},{}",
                c.row,
                c.col,
                fmt6(c.x),
                fmt6(c.y),
                fmt6(c.z)
            );
        }
    }

    let mut pot_csv = String::from(POTENTIAL_HEADER);
    pot_csv.push('\n');
    let mut feats = Vec::with_capacity(buildings.len());
    for (b, r) in buildings.iter().zip(&ex.buildings) {
        let d = &r.decision;
        let reasons = format_reasons(&d.reasons);
        let _ = writeln!(
            pot_csv,
            "{},{},{},{},{},{},{},{},{},{}",
            b.id,
            d.potential as u8,
            reasons,
            b.age_years,
            b.category.as_str(),
            fmt6(r.roof_area_m2),
            fmt6(d.greenable_area_m2),
            fmt6_opt(r.slope_deg),
            fmt6_opt(r.height_m),
            r.segments.len()
        );
        let opt = |v: Option<f64>| v.map(|x| json!(round6(x))).unwrap_or(Value::Null);
        let mut props = Map::new();
        props.insert("id".into(), json!(b.id));
        props.insert("potential".into(), json!(d.potential));
        props.insert("reasons".into(), json!(reasons));
        props.insert("age_years".into(), json!(b.age_years));
        props.insert("category".into(), json!(b.category.as_str()));
        props.insert("roof_area_m2".into(), json!(round6(r.roof_area_m2)));
        props.insert("greenable_area_m2".into(), json!(round6(d.greenable_area_m2)));
        props.insert("slope_deg".into(), opt(r.slope_deg));
        props.insert("height_m".into(), opt(r.height_m));
        feats.push(json!({
            "type": "Feature",
            "properties": Value::Object(props),
            "geometry": ingest::polygon_json(&b.footprint),
        }));
    }
    ingest::write_text(&cfg.out.join(SEGMENTS_CSV), &seg_csv)?;
    ingest::write_text(&cfg.out.join(ROOF_CELLS_CSV), &cell_csv)?;
    ingest::write_text(&cfg.out.join(POTENTIAL_CSV), &pot_csv)?;
    ingest::write_json(&ingest::collection(feats), &cfg.out.join(POTENTIAL_GEOJSON))?;

    let n = buildings.len();
    let n_pot = ex.buildings.iter().filter(|r| r.decision.potential).count();
    let area: f64 = ex.buildings.iter().map(|r| r.decision.greenable_area_m2).sum();
    let share = if n > 0 { n_pot as f64 / n as f64 } else { 0.0 };
    let mut by_reason: BTreeMap<String, usize> = BTreeMap::new();
    for r in ex.buildings.iter().filter(|r| !r.decision.potential) {
        *by_reason.entry(format_reasons(&r.decision.reasons)).or_default() += 1;
    }
    let line = format!(
        "{n_pot} of {n} buildings have green-roof potential ({}), greenable area {} m2",
        pct(share),
        fmt6(area)
    );
    let mut md = String::from("## Roof extraction\n\n");
    let _ = writeln!(md, "{line}.\n");
    let _ = writeln!(md, "| quantity | value |\n|---|---|");
    let _ = writeln!(
        md,
        "| building points | {} |",
        pc.of_class(geocore::PointClass::Building).count()
    );
    let _ = writeln!(md, "| candidate cells | {} |", ex.candidate_count);
    let _ = writeln!(md, "| roof cells after wall filter | {} |", ex.roof_cells.len());
    let _ = writeln!(md, "| connected components | {} |", ex.component_count);
    let _ = writeln!(md, "| roof segments | {} |", ex.segments.len());
    let _ = writeln!(md, "| buildings | {n} |");
    let _ = writeln!(md, "| potential buildings | {n_pot} |");
    let _ = writeln!(md, "| greenable area (m2) | {} |", fmt6(area));
    for (reason, count) in &by_reason {
        let _ = writeln!(md, "| excluded by {reason} | {count} |");
    }
    ingest::write_text(&cfg.out.join(EXTRACT_SUMMARY), &md)?;
    Ok(line)
}

pub fn read_potential(path: &Path) -> Result<Vec<PotentialRow>> {
    read_table(path, POTENTIAL_HEADER)?
        .into_iter()
        .map(|(ln, f)| {
            Ok(PotentialRow {
                id: f[0].clone(),
                potential: parse_flag(path, ln, &f[1], "potential")?,
                reasons: f[2].clone(),
                age_years: parse_usize(path, ln, &f[3], "age_years")? as u32,
                category: Category::parse(&f[4])
                    .ok_or_else(|| ingest::parse_err(path, ln, format!("unknown category {:?}", f[4])))?,
                roof_area_m2: ingest::parse_f64(path, ln, &f[5], "roof_area_m2")?,
                greenable_area_m2: ingest::parse_f64(path, ln, &f[6], "greenable_area_m2")?,
                slope_deg: opt_f64(path, ln, &f[7], "slope_deg")?,
                height_m: opt_f64(path, ln, &f[8], "height_m")?,
                n_segments: parse_usize(path, ln, &f[9], "n_segments")?,
            })
        })
        .collect()
}

pub fn read_segments(path: &Path) -> Result<Vec<SegmentRow>> {
    read_table(path, SEGMENTS_HEADER)?
        .into_iter()
        .map(|(ln, f)| {
            Ok(SegmentRow {
                segment_id: parse_usize(path, ln, &f[0], "segment_id")?,
                building_id: f[1].clone(),
                cell_m: ingest::parse_f64(path, ln, &f[2], "cell_m")?,
                n_cells: parse_usize(path, ln, &f[3], "n_cells")?,
                slope_deg: ingest::parse_f64(path, ln, &f[4], "slope_deg")?,
                area_m2: ingest::parse_f64(path, ln, &f[5], "area_m2")?,
                qualifies: parse_flag(path, ln, &f[6], "qualifies")?,
            })
        })
        .collect()
}

/// Roof cells keyed by segment id.
pub fn read_roof_cells(path: &Path) -> Result<BTreeMap<usize, Vec<RoofCell>>> {
    let mut out: BTreeMap<usize, Vec<RoofCell>> = BTreeMap::new();
    for (ln, f) in read_table(path, ROOF_CELLS_HEADER)? {
        let seg = parse_usize(path, ln, &f[0], "segment_id")?;
        let int = |s: &str, name: &str| -> Result<i64> {
            s.parse()
                .map_err(|_| ingest::parse_err(path, ln, format!("{name}: expected an integer, got {s:?}")))
        };
        out.entry(seg).or_default().push(RoofCell {
            row: int(&f[1], "row")?,
            col: int(&f[2], "col")?,
            x: ingest::parse_f64(path, ln, &f[3], "x")?,
            y: ingest::parse_f64(path, ln, &f[4], "y")?,
            z: ingest::parse_f64(path, ln, &f[5], "z")?,
        });
    }
    Ok(out)
}

// ------------------------------------------------------------- indicators

/// Marks the centres of `cells` as greenspace on a copy of `mask`.
pub fn green_cells(mask: &GreenspaceMask, cells: &[RoofCell], cell_size: f64) -> Result<GreenspaceMask> {
    let mut grid = mask.grid().clone();
    for rc in cells {
        let (x, y) = rc.center(cell_size);
        if let Some((r, c)) = grid.world_to_cell(x, y) {
            grid.set(r, c, Some(1.0));
        }
    }
    GreenspaceMask::from_grid(grid)
}

fn surface_template(pc: &PointCloud, cell: f64) -> Result<RasterGrid> {
    let (x0, y0, x1, y1) = pc
        .bounds()
        .ok_or_else(|| Error::Invalid("point cloud is empty".into()))?;
    RasterGrid::covering(x0, y0, x1, y1, cell)
}

/// Indicator surfaces, masks and the per-building indicator table.
pub fn run_indicators(cfg: &PipelineConfig) -> Result<String> {
    let pot_path = artifact(cfg, POTENTIAL_CSV, "extract")?;
    let seg_path = artifact(cfg, SEGMENTS_CSV, "extract")?;
    let cells_path = artifact(cfg, ROOF_CELLS_CSV, "extract")?;
    let potential = read_potential(&pot_path)?;
    let segments = read_segments(&seg_path)?;
    let cells = read_roof_cells(&cells_path)?;

    let pc = ingest::read_point_cloud(&cfg.inputs.points)?;
    let footprints = ingest::read_footprints(&cfg.inputs.footprints)?;
    let roads = ingest::read_roads(&cfg.inputs.roads)?;
    let precip = SampleSet::new(ingest::read_samples(&cfg.inputs.precip_stations)?, "mm")?;
    let income = SampleSet::new(ingest::read_samples(&cfg.inputs.income_samples)?, "HKD")?;
    let temps = cfg
        .inputs
        .temperatures
        .iter()
        .map(|p| ingest::read_raster_asc(p))
        .collect::<Result<Vec<_>>>()?;

    let pot_ids: HashMap<&str, bool> = potential.iter().map(|r| (r.id.as_str(), r.potential)).collect();
    let mut roof_of: HashMap<&str, (f64, Vec<RoofCell>)> = HashMap::new();
    let mut greened_cells: Vec<(f64, &RoofCell)> = Vec::new();
    for s in &segments {
        let seg_cells = cells.get(&s.segment_id).map(Vec::as_slice).unwrap_or_default();
        let entry = roof_of.entry(s.building_id.as_str()).or_insert((s.cell_m, Vec::new()));
        entry.1.extend_from_slice(seg_cells);
        if s.qualifies && pot_ids.get(s.building_id.as_str()).copied().unwrap_or(false) {
            greened_cells.extend(seg_cells.iter().map(|c| (s.cell_m, c)));
        }
    }

    let baseline = indicators::build_greenspace_mask(&pc, None, cfg.mask_cell)?;
    let mut greened = baseline.clone();
    if let Some(&(cell_m, _)) = greened_cells.first() {
        let cs: Vec<RoofCell> = greened_cells.iter().map(|(_, c)| **c).collect();
        greened = green_cells(&baseline, &cs, cell_m)?;
    }
    ensure_out(cfg)?;
    ingest::write_raster_asc(baseline.grid(), &cfg.out.join(MASK_BASELINE))?;
    ingest::write_raster_asc(greened.grid(), &cfg.out.join(MASK_GREENED))?;

    let template = surface_template(&pc, cfg.surface_cell)?;
    let income_surface = interp::interpolate_grid(
        &income,
        &Method::Idw {
            power: cfg.idw_power,
            k: cfg.idw_k,
        },
        &template,
    )?;
    let ev = interp::empirical_semivariogram(&precip, cfg.variogram_bins, None)?;
    let fit = interp::fit_variogram(&ev, cfg.variogram)?;
    let precip_surface = interp::interpolate_grid(
        &precip,
        &Method::Kriging {
            model: fit.model,
            k: cfg.kriging_k,
        },
        &template,
    )?;
    let filled = temps
        .iter()
        .map(|t| indicators::fill_gaps_kriging(t, cfg.variogram, cfg.kriging_k, cfg.variogram_bins, MAX_FIT_SAMPLES))
        .collect::<Result<Vec<_>>>()?;
    ingest::write_raster_asc(&income_surface, &cfg.out.join(INCOME_ASC))?;
    ingest::write_raster_asc(&precip_surface, &cfg.out.join(PRECIP_ASC))?;
    for (g, name) in filled.iter().zip(TEMP_FILLED) {
        ingest::write_raster_asc(g, &cfg.out.join(name))?;
    }

    let fp: HashMap<&str, &BuildingAttributes> = footprints.iter().map(|b| (b.id.as_str(), b)).collect();
    let mut ids = Vec::new();
    let mut raw = Vec::new();
    for row in potential.iter().filter(|r| r.potential) {
        let b = fp
            .get(row.id.as_str())
            .ok_or_else(|| Error::Invalid(format!("building {:?} from {POTENTIAL_CSV} not in footprints", row.id)))?;
        let (cell_m, rc) = roof_of
            .get(row.id.as_str())
            .ok_or_else(|| Error::NoRoofCells(row.id.clone()))?;
        let greenspace = indicators::cells_coverage_rate(rc, *cell_m, &baseline, cfg.gc_radius);
        let d = geocore::distance_to_polylines(b.footprint.centroid(), &roads, RoadClass::Main)?;
        let mut t = [0.0; 4];
        for (k, g) in filled.iter().enumerate() {
            t[k] = indicators::sample_surface_at_building(g, &b.footprint)?;
        }
        ids.push(row.id.clone());
        raw.push(RawIndicators {
            greenspace,
            distance: indicators::distance_indicator(d, cfg.road_cap_m),
            category: indicators::category_indicator(b.category),
            income: indicators::sample_surface_at_building(&income_surface, &b.footprint)?,
            temperatures: t,
            precipitation: indicators::sample_surface_at_building(&precip_surface, &b.footprint)?,
        });
    }
    let norm = indicators::normalize_indicators(&raw);

    let mut csv = String::from(INDICATORS_HEADER);
    csv.push('\n');
    for ((id, r), v) in ids.iter().zip(&raw).zip(&norm) {
        let mut f = vec![
            id.clone(),
            fmt6(r.greenspace),
            fmt6(r.distance),
            fmt6(r.category),
            fmt6(r.income),
        ];
        f.extend(r.temperatures.iter().map(|&t| fmt6(t)));
        f.push(fmt6(r.precipitation));
        f.extend(v.to_array().iter().map(|&x| fmt6(x)));
        csv.push_str(&f.join(","));
        csv.push('\n');
    }
    ingest::write_text(&cfg.out.join(INDICATORS_CSV), &csv)?;

    let line = format!(
        "indicators for {} potential buildings; greenspace mask covers {} of {} pixels ({} after greening)",
        ids.len(),
        baseline.count(),
        baseline.grid().nrows * baseline.grid().ncols,
        greened.count()
    );
    let mut md = String::from("## Indicators\n\n");
    let _ = writeln!(md, "{line}.\n");
    let m = &fit.model;
    let _ = writeln!(
        md,
        "Precipitation variogram: {} nugget {} sill {} range {} m{}.\n",
        m.kind.as_str(),
        fmt6(m.nugget),
        fmt6(m.sill),
        fmt6(m.range_m),
        if fit.degenerate { " (degenerate fit)" } else { "" }
    );
    let _ = writeln!(md, "| indicator | min | mean | max |\n|---|---|---|---|");
    for (k, name) in IndicatorVector::NAMES.iter().enumerate() {
        let col: Vec<f64> = norm.iter().map(|v| v.to_array()[k]).collect();
        let _ = writeln!(md, "| {name} | {} |", column_stats(&col));
    }
    let _ = writeln!(md);
    let seasons: Vec<&str> = Season::ALL.iter().map(|s| s.as_str()).collect();
    let _ = writeln!(
        md,
        "Seasonal temperatures ({}) are scaled separately and then combined.",
        seasons.join(", ")
    );
    ingest::write_text(&cfg.out.join(INDICATORS_SUMMARY), &md)?;
    Ok(line)
}

fn column_stats(col: &[f64]) -> String {
    if col.is_empty() {
        return "- | - | -".into();
    }
    let min = col.iter().copied().fold(f64::INFINITY, f64::min);
    let max = col.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mean = col.iter().sum::<f64>() / col.len() as f64;
    format!("{:.4} | {:.4} | {:.4}", min, mean, max)
}

/// Normalized indicator vectors from `indicators.csv`, in file order.
pub fn read_indicators(path: &Path) -> Result<Vec<(String, IndicatorVector)>> {
    read_table(path, INDICATORS_HEADER)?
        .into_iter()
        .map(|(ln, f)| {
            let mut v = [0.0; 6];
            for (k, name) in IndicatorVector::NAMES.iter().enumerate() {
                v[k] = ingest::parse_f64(path, ln, &f[10 + k], name)?;
            }
            Ok((f[0].clone(), IndicatorVector::from_array(v)))
        })
        .collect()
}

// ------------------------------------------------------------- prioritize

/// Weights of every scheme for the given indicator table, with the
/// zero-mean columns flagged by the CV method.
pub fn all_scheme_weights(ind: &[IndicatorVector]) -> Result<Vec<(Scheme, WeightVector, Vec<usize>)>> {
    Scheme::ALL
        .iter()
        .map(|&s| {
            if ind.is_empty() {
                return Ok((s, WeightVector::EQUAL, Vec::new()));
            }
            let w = priority::scheme_weights(s, ind)?;
            let flagged = if s == Scheme::Cv {
                let m: Vec<Vec<f64>> = ind.iter().map(|v| v.to_array().to_vec()).collect();
                priority::cv_weights(&m)?.zero_mean_columns
            } else {
                Vec::new()
            };
            Ok((s, w, flagged))
        })
        .collect()
}

/// Priorities under all four schemes, ranks for the configured one, and
/// the combined per-building report.
pub fn run_prioritize(cfg: &PipelineConfig) -> Result<String> {
    let pot_path = artifact(cfg, POTENTIAL_CSV, "extract")?;
    let ind_path = artifact(cfg, INDICATORS_CSV, "indicators")?;
    let potential = read_potential(&pot_path)?;
    let table = read_indicators(&ind_path)?;
    let footprints = ingest::read_footprints(&cfg.inputs.footprints)?;
    let ind: Vec<IndicatorVector> = table.iter().map(|(_, v)| *v).collect();

    let weights = all_scheme_weights(&ind)?;
    let active = Scheme::ALL
        .iter()
        .position(|&s| s == cfg.scheme)
        .expect("scheme listed");
    let scores: Vec<[f64; 4]> = ind
        .iter()
        .map(|v| {
            let mut p = [0.0; 4];
            for (k, (s, w, _)) in weights.iter().enumerate() {
                p[k] = if *s == Scheme::Equal {
                    priority::equal_weight_priority(v)
                } else {
                    priority::weighted_priority(v, w)
                };
            }
            p
        })
        .collect();
    let pairs: Vec<(String, f64)> = table
        .iter()
        .zip(&scores)
        .map(|((id, _), p)| (id.clone(), p[active]))
        .collect();
    let ranked = priority::rank_buildings(&pairs);
    let rank_of: HashMap<&str, (usize, f64)> = ranked
        .iter()
        .map(|r| (r.building_id.as_str(), (r.rank, r.percentile)))
        .collect();

    ensure_out(cfg)?;
    let mut csv = String::from(PRIORITY_HEADER);
    csv.push('\n');
    for ((id, _), p) in table.iter().zip(&scores) {
        let (rank, pctl) = rank_of[id.as_str()];
        let _ = writeln!(
            csv,
            "{id},{},{},{},{},{},{rank},{}",
            fmt6(p[0]),
            fmt6(p[1]),
            fmt6(p[2]),
            fmt6(p[3]),
            fmt6(p[active]),
            fmt6(pctl)
        );
    }
    ingest::write_text(&cfg.out.join(PRIORITY_CSV), &csv)?;

    let mut wcsv = String::from(WEIGHTS_HEADER);
    wcsv.push('\n');
    for (k, (s, w, flagged)) in weights.iter().enumerate() {
        let ws: Vec<String> = w.0.iter().map(|&x| fmt6(x)).collect();
        let fl: Vec<&str> = flagged.iter().map(|&j| IndicatorVector::NAMES[j]).collect();
        let _ = writeln!(
            wcsv,
            "{},{},{},{}",
            s.as_str(),
            (k == active) as u8,
            ws.join(","),
            fl.join("+")
        );
    }
    ingest::write_text(&cfg.out.join(WEIGHTS_CSV), &wcsv)?;

    let pot: HashMap<&str, &PotentialRow> = potential.iter().map(|r| (r.id.as_str(), r)).collect();
    let per: HashMap<&str, (IndicatorVector, f64)> = table
        .iter()
        .zip(&scores)
        .map(|((id, v), p)| (id.as_str(), (*v, p[active])))
        .collect();
    let records: Vec<BuildingRecord> = footprints
        .iter()
        .map(|b| {
            let row = pot.get(b.id.as_str());
            let extra = per.get(b.id.as_str());
            BuildingRecord {
                attrs: b.clone(),
                potential: row.map(|r| r.potential).unwrap_or(false),
                roof_area_m2: row.map(|r| r.roof_area_m2).unwrap_or(0.0),
                greenable_area_m2: row.map(|r| r.greenable_area_m2).unwrap_or(0.0),
                slope_deg: row.and_then(|r| r.slope_deg),
                height_m: row.and_then(|r| r.height_m),
                indicators: extra.map(|e| e.0),
                priority: extra.map(|e| e.1),
            }
        })
        .collect();
    ingest::write_building_report(&records, &cfg.out.join(BUILDINGS_CSV), &cfg.out.join(BUILDINGS_GEOJSON))?;

    let active_p: Vec<f64> = scores.iter().map(|p| p[active]).collect();
    let line = match priority::priority_distribution(&active_p) {
        Some(d) => format!(
            "{} buildings scored ({}): mean {:.3}, max {:.3}, {} above 0.5",
            d.count,
            cfg.scheme.as_str(),
            d.mean,
            d.max,
            pct(d.share_above_half)
        ),
        None => "no potential buildings to score".to_string(),
    };
    let mut md = String::from("## Priority\n\n");
    let _ = writeln!(md, "{line}.\n");
    let _ = writeln!(md, "| scheme | active | {} |", IndicatorVector::NAMES.join(" | "));
    let _ = writeln!(md, "|---|---|{}", "---|".repeat(6));
    for (k, (s, w, _)) in weights.iter().enumerate() {
        let ws: Vec<String> = w.0.iter().map(|x| format!("{x:.4}")).collect();
        let _ = writeln!(
            md,
            "| {} | {} | {} |",
            s.as_str(),
            if k == active { "yes" } else { "" },
            ws.join(" | ")
        );
    }
    let _ = writeln!(md, "\n| scheme | mean P | max P | share P > 0.5 |\n|---|---|---|---|");
    for (k, (s, _, _)) in weights.iter().enumerate() {
        let col: Vec<f64> = scores.iter().map(|p| p[k]).collect();
        if let Some(d) = priority::priority_distribution(&col) {
            let _ = writeln!(
                md,
                "| {} | {:.4} | {:.4} | {} |",
                s.as_str(),
                d.mean,
                d.max,
                pct(d.share_above_half)
            );
        }
    }
    if !ranked.is_empty() {
        let _ = writeln!(md, "\nTop buildings:\n\n| rank | id | P |\n|---|---|---|");
        for r in ranked.iter().take(10) {
            let _ = writeln!(md, "| {} | {} | {:.4} |", r.rank, r.building_id, r.p);
        }
    }
    ingest::write_text(&cfg.out.join(PRIORITIZE_SUMMARY), &md)?;
    Ok(line)
}

pub fn read_priority(path: &Path) -> Result<Vec<PriorityRow>> {
    read_table(path, PRIORITY_HEADER)?
        .into_iter()
        .map(|(ln, f)| {
            let num = |k: usize, name: &str| ingest::parse_f64(path, ln, &f[k], name);
            Ok(PriorityRow {
                id: f[0].clone(),
                by_scheme: [
                    num(1, "p_equal")?,
                    num(2, "p_entropy")?,
                    num(3, "p_cv")?,
                    num(4, "p_critic")?,
                ],
                priority: num(5, "priority")?,
                rank: parse_usize(path, ln, &f[6], "rank")?,
                percentile: num(7, "percentile")?,
            })
        })
        .collect()
}

// --------------------------------------------------------------- benefits

/// Everything the benefit stage computes, in `benefits.csv` order.
#[derive(Debug, Clone, PartialEq)]
pub struct BenefitOutcome {
    pub report: BenefitReport,
    pub area_overridden: bool,
    pub energy_overridden: bool,
    pub share_of_emissions: f64,
    pub regression: Option<benefits::Regression>,
}

impl BenefitOutcome {
    pub fn fields(&self) -> Vec<(&'static str, String)> {
        let r = &self.report;
        let reg = self.regression;
        vec![
            ("greenable_area_m2", fmt6(r.greenable_area_m2)),
            ("area_overridden", (self.area_overridden as u8).to_string()),
            ("volume_m3", fmt6(r.volume_m3)),
            ("e_kwh", fmt6(r.e_kwh)),
            ("energy_overridden", (self.energy_overridden as u8).to_string()),
            ("c_v_t", fmt6(r.c_v / 1000.0)),
            ("c_e_t", fmt6(r.c_e / 1000.0)),
            ("c_total_t", fmt6(r.c_total / 1000.0)),
            ("share_of_emissions_pct", fmt6(100.0 * self.share_of_emissions)),
            ("value_energy_hkd", fmt6(r.value_energy)),
            ("value_carbon_hkd", fmt6(r.value_carbon)),
            ("value_total_hkd", fmt6(r.value_total)),
            ("exposure_baseline", fmt6_opt(r.exposure_baseline)),
            ("exposure_greened", fmt6_opt(r.exposure_greened)),
            ("income_gc_r", fmt6_opt(reg.map(|g| g.r))),
            ("income_gc_p", fmt6_opt(reg.map(|g| g.p_value))),
            ("income_gc_n", reg.map(|g| g.n.to_string()).unwrap_or_default()),
        ]
    }
}

/// Carbon, energy and money from the measured or overridden totals,
/// plus exposure and the income–coverage regression.
pub fn compute_benefits(
    cfg: &PipelineConfig,
    potential: &[PotentialRow],
    baseline: &GreenspaceMask,
    greened: &GreenspaceMask,
) -> Result<BenefitOutcome> {
    let measured_area: f64 = potential
        .iter()
        .filter(|r| r.potential)
        .map(|r| r.greenable_area_m2)
        .sum();
    let pairs: Vec<(f64, f64)> = potential
        .iter()
        .filter(|r| r.potential)
        .map(|r| (r.roof_area_m2, r.height_m.unwrap_or(0.0)))
        .collect();
    let measured = benefits::energy_savings(&pairs, &cfg.cooling)?;
    let energy = match cfg.override_energy_kwh {
        Some(kwh) => EnergySavings {
            joules: kwh * benefits::J_PER_KWH,
            kwh,
            volume_m3: measured.volume_m3,
        },
        None => measured,
    };
    let area = cfg.override_area_m2.unwrap_or(measured_area);
    let mut report = BenefitReport::from_totals(area, energy, &cfg.econ)?;

    let population = ingest::read_raster_asc(&cfg.inputs.population)?;
    report.exposure_baseline = Some(benefits::greenspace_exposure(baseline, &population, cfg.gc_radius)?);
    report.exposure_greened = Some(benefits::greenspace_exposure(greened, &population, cfg.gc_radius)?);

    let income = ingest::read_samples(&cfg.inputs.income_samples)?;
    let reg_pairs: Vec<(f64, f64)> = income
        .iter()
        .map(|s| {
            (
                s.value,
                indicators::greenspace_coverage(baseline, s.x, s.y, cfg.gc_radius),
            )
        })
        .collect();
    let regression = match benefits::income_greenspace_regression(&reg_pairs) {
        Ok(r) => Some(r),
        Err(Error::ZeroVariance(_) | Error::TooFewSamples { .. }) => None,
        Err(e) => return Err(e),
    };
    Ok(BenefitOutcome {
        share_of_emissions: report.share_of_emissions(cfg.annual_emissions_t),
        report,
        area_overridden: cfg.override_area_m2.is_some(),
        energy_overridden: cfg.override_energy_kwh.is_some(),
        regression,
    })
}

pub fn run_benefits(cfg: &PipelineConfig) -> Result<String> {
    let pot_path = artifact(cfg, POTENTIAL_CSV, "extract")?;
    let base_path = artifact(cfg, MASK_BASELINE, "indicators")?;
    let green_path = artifact(cfg, MASK_GREENED, "indicators")?;
    let potential = read_potential(&pot_path)?;
    let baseline = GreenspaceMask::from_grid(ingest::read_raster_asc(&base_path)?)?;
    let greened = GreenspaceMask::from_grid(ingest::read_raster_asc(&green_path)?)?;
    let out = compute_benefits(cfg, &potential, &baseline, &greened)?;

    ensure_out(cfg)?;
    let mut csv = String::from("key,value\n");
    for (k, v) in out.fields() {
        let _ = writeln!(csv, "{k},{v}");
    }
    ingest::write_text(&cfg.out.join(BENEFITS_CSV), &csv)?;

    let r = &out.report;
    let line = format!(
        "carbon {:.0} t/yr ({:.4}% of annual emissions), energy {:.4e} kWh/yr, value HK${:.1}M/yr",
        r.c_total / 1000.0,
        100.0 * out.share_of_emissions,
        r.e_kwh,
        r.value_total / 1e6
    );
    let mut md = String::from("## Benefits\n\n");
    let _ = writeln!(md, "{line}.\n");
    let _ = writeln!(md, "| quantity | value |\n|---|---|");
    let _ = writeln!(
        md,
        "| greenable area (m2) | {}{} |",
        fmt6(r.greenable_area_m2),
        if out.area_overridden { " (override)" } else { "" }
    );
    let _ = writeln!(md, "| air volume above greened roofs (m3) | {} |", fmt6(r.volume_m3));
    let _ = writeln!(
        md,
        "| energy saving (kWh/yr) | {}{} |",
        fmt6(r.e_kwh),
        if out.energy_overridden { " (override)" } else { "" }
    );
    let _ = writeln!(md, "| direct sequestration (t CO2/yr) | {:.3} |", r.c_v / 1000.0);
    let _ = writeln!(md, "| indirect reduction (t CO2/yr) | {:.3} |", r.c_e / 1000.0);
    let _ = writeln!(md, "| total reduction (t CO2/yr) | {:.3} |", r.c_total / 1000.0);
    let _ = writeln!(md, "| value of energy (HK$) | {:.2} |", r.value_energy);
    let _ = writeln!(md, "| value of carbon (HK$) | {:.2} |", r.value_carbon);
    let _ = writeln!(md, "| total value (HK$) | {:.2} |", r.value_total);
    if let (Some(a), Some(b)) = (r.exposure_baseline, r.exposure_greened) {
        let _ = writeln!(md, "| greenspace exposure | {} to {} |", pct(a), pct(b));
    }
    if let Some(g) = out.regression {
        let _ = writeln!(
            md,
            "| income vs coverage r (n = {}) | {:.4} (p = {:.3e}) |",
            g.n, g.r, g.p_value
        );
    }
    ingest::write_text(&cfg.out.join(BENEFITS_SUMMARY), &md)?;
    Ok(line)
}

/// `benefits.csv` as an ordered key → raw value map.
pub fn read_benefits(path: &Path) -> Result<BTreeMap<String, String>> {
    Ok(read_table(path, "key,value")?
        .into_iter()
        .map(|(_, f)| (f[0].clone(), f[1].clone()))
        .collect())
}

// ----------------------------------------------------------------- report

/// Concatenates the stage summaries and adds a comparison with the
/// city-scale Hong Kong figures.
pub fn run_report(cfg: &PipelineConfig) -> Result<String> {
    let parts = [
        (EXTRACT_SUMMARY, "extract"),
        (INDICATORS_SUMMARY, "indicators"),
        (PRIORITIZE_SUMMARY, "prioritize"),
        (BENEFITS_SUMMARY, "benefits"),
    ];
    let mut sections = Vec::new();
    for (name, stage) in parts {
        sections.push(ingest::read_text(&artifact(cfg, name, stage)?)?);
    }
    let potential = read_potential(&artifact(cfg, POTENTIAL_CSV, "extract")?)?;
    let prio = read_priority(&artifact(cfg, PRIORITY_CSV, "prioritize")?)?;
    let ben = read_benefits(&artifact(cfg, BENEFITS_CSV, "benefits")?)?;
    let num = |k: &str| ben.get(k).and_then(|v| v.parse::<f64>().ok());

    let n = potential.len();
    let n_pot = potential.iter().filter(|r| r.potential).count();
    let share = if n > 0 { n_pot as f64 / n as f64 } else { 0.0 };
    let dist = priority::priority_distribution(&prio.iter().map(|r| r.priority).collect::<Vec<_>>());
    let or_dash = |v: Option<String>| v.unwrap_or_else(|| "-".into());

    let mut md = String::from("# Green roof assessment\n\n");
    let _ = writeln!(md, "Weighting scheme: {}.\n", cfg.scheme.as_str());
    md.push_str("## Comparison with the Hong Kong city-scale figures\n\n");
    md.push_str("The reference column is the city-wide result for Hong Kong. Rows other than the benefit chain depend on local data and are informational.\n\n");
    md.push_str("| quantity | this run | Hong Kong reference |\n|---|---|---|\n");
    let _ = writeln!(md, "| buildings with potential | {} | 85.3% |", pct(share));
    let _ = writeln!(
        md,
        "| greenable roof area | {} | 63.9 km2 |",
        or_dash(num("greenable_area_m2").map(|a| format!("{:.4} km2", a / 1e6)))
    );
    let _ = writeln!(
        md,
        "| greenspace exposure | {} | 35.3% to 56.7% |",
        or_dash(
            num("exposure_baseline")
                .zip(num("exposure_greened"))
                .map(|(a, b)| format!("{} to {}", pct(a), pct(b)))
        )
    );
    let _ = writeln!(
        md,
        "| share of potential roofs with P > 0.5 | {} | 91% |",
        or_dash(dist.map(|d| pct(d.share_above_half)))
    );
    let _ = writeln!(
        md,
        "| maximum P | {} | about 0.9 |",
        or_dash(dist.map(|d| format!("{:.3}", d.max)))
    );
    let _ = writeln!(
        md,
        "| mean P | {} | above 0.6 |",
        or_dash(dist.map(|d| format!("{:.3}", d.mean)))
    );
    let _ = writeln!(
        md,
        "| income vs coverage r | {} | -0.25 |",
        or_dash(num("income_gc_r").map(|r| format!("{r:.3}")))
    );
    let _ = writeln!(
        md,
        "| energy saving | {} | 2.33e8 kWh |",
        or_dash(num("e_kwh").map(|e| format!("{e:.4e} kWh")))
    );
    let _ = writeln!(
        md,
        "| direct sequestration | {} | 93,294 t |",
        or_dash(num("c_v_t").map(|t| format!("{t:.0} t")))
    );
    let _ = writeln!(
        md,
        "| indirect reduction | {} | 182,905 t |",
        or_dash(num("c_e_t").map(|t| format!("{t:.0} t")))
    );
    let _ = writeln!(
        md,
        "| total reduction | {} | about 276 kt |",
        or_dash(num("c_total_t").map(|t| format!("{t:.0} t")))
    );
    let _ = writeln!(
        md,
        "| share of annual emissions | {} | about 0.8% |",
        or_dash(num("share_of_emissions_pct").map(|s| format!("{s:.4}%")))
    );
    let _ = writeln!(
        md,
        "| total value | {} | around HK$318 million |",
        or_dash(num("value_total_hkd").map(|v| format!("HK${:.1} million", v / 1e6)))
    );
    for s in sections {
        md.push('\n');
        md.push_str(&s);
    }
    ensure_out(cfg)?;
    ingest::write_text(&cfg.out.join(REPORT_MD), &md)?;
    Ok(format!("report written to {REPORT_MD}"))
}

/// All five analysis stages in order.
pub fn run_all(cfg: &PipelineConfig) -> Result<Vec<String>> {
    Ok(vec![
        run_extract(cfg)?,
        run_indicators(cfg)?,
        run_prioritize(cfg)?,
        run_benefits(cfg)?,
        run_report(cfg)?,
    ])
}
