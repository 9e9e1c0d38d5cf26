//! Text-format readers and writers: point clouds and station samples as CSV,
//! footprints and roads as GeoJSON, surfaces as ESRI ASCII grids, and the
//! per-building report.
//!
//! Readers reject malformed records instead of skipping them. Report numbers
//! are written with exactly six decimals so outputs stay byte-stable.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde_json::{json, Map, Value};

use crate::error::{Error, Result};
use crate::geocore::{Point3, PointClass, PointCloud, Polygon, Polyline, RasterGrid, RoadClass};
use crate::indicators::IndicatorVector;

/// Sentinel written for nodata cells in `.asc` output.
pub const DEFAULT_NODATA: f64 = -9999.0;

/// Column order of the building report CSV.
pub const BUILDING_CSV_HEADER: &str =
    "id,potential,roof_area_m2,greenable_area_m2,slope_deg,height_m,i_g,i_d,i_c,i_i,i_t,i_p,priority";

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StationSample {
    pub x: f64,
    pub y: f64,
    pub value: f64,
}

impl StationSample {
    pub fn new(x: f64, y: f64, value: f64) -> Self {
        Self { x, y, value }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Category {
    Private,
    Public,
    Misc,
}

impl Category {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "private" => Some(Category::Private),
            "public" => Some(Category::Public),
            "misc" => Some(Category::Misc),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Category::Private => "private",
            Category::Public => "public",
            Category::Misc => "misc",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BuildingAttributes {
    pub id: String,
    pub age_years: u32,
    pub category: Category,
    pub footprint: Polygon,
}

/// A building with everything derived for it by the pipeline.
#[derive(Debug, Clone, PartialEq)]
pub struct BuildingRecord {
    pub attrs: BuildingAttributes,
    pub potential: bool,
    pub roof_area_m2: f64,
    pub greenable_area_m2: f64,
    pub slope_deg: Option<f64>,
    pub height_m: Option<f64>,
    pub indicators: Option<IndicatorVector>,
    pub priority: Option<f64>,
}

/// One parsed row of the building report CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct BuildingRow {
    pub id: String,
    pub potential: bool,
    pub roof_area_m2: f64,
    pub greenable_area_m2: f64,
    pub slope_deg: Option<f64>,
    pub height_m: Option<f64>,
    pub indicators: Option<IndicatorVector>,
    pub priority: Option<f64>,
}

impl From<&BuildingRecord> for BuildingRow {
    fn from(b: &BuildingRecord) -> Self {
        Self {
            id: b.attrs.id.clone(),
            potential: b.potential,
            roof_area_m2: b.roof_area_m2,
            greenable_area_m2: b.greenable_area_m2,
            slope_deg: b.slope_deg,
            height_m: b.height_m,
            indicators: b.indicators,
            priority: b.priority,
        }
    }
}

/// Six-decimal fixed formatting; never emits `-0.000000`.
pub fn fmt6(v: f64) -> String {
    let s = format!("{v:.6}");
    if s == "-0.000000" {
        "0.000000".to_string()
    } else {
        s
    }
}

pub fn fmt6_opt(v: Option<f64>) -> String {
    v.map(fmt6).unwrap_or_default()
}

/// Value rounded to six decimals, for JSON properties.
pub fn round6(v: f64) -> f64 {
    let r = (v * 1e6).round() / 1e6;
    if r == 0.0 {
        0.0
    } else {
        r
    }
}

pub(crate) fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

pub(crate) fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub(crate) fn parse_err(path: &Path, line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        path: path.display().to_string(),
        line,
        msg: msg.into(),
    }
}

pub(crate) fn parse_f64(path: &Path, line: usize, field: &str, name: &str) -> Result<f64> {
    let v: f64 = field
        .trim()
        .parse()
        .map_err(|_| parse_err(path, line, format!("{name}: cannot parse {field:?} as a number")))?;
    if !v.is_finite() {
        return Err(parse_err(path, line, format!("{name}: value must be finite")));
    }
    Ok(v)
}

/// Reads `x,y,z,class` rows; an optional `x,y,z,class` header is skipped.
pub fn read_point_cloud(path: &Path) -> Result<PointCloud> {
    let text = read_text(path)?;
    parse_point_cloud(&text, path)
}

pub fn parse_point_cloud(text: &str, path: &Path) -> Result<PointCloud> {
    let mut points = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let lineno = i + 1;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if i == 0 && line.replace(' ', "").eq_ignore_ascii_case("x,y,z,class") {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 4 {
            return Err(parse_err(
                path,
                lineno,
                format!("expected 4 fields, found {}", fields.len()),
            ));
        }
        let x = parse_f64(path, lineno, fields[0], "x")?;
        let y = parse_f64(path, lineno, fields[1], "y")?;
        let z = parse_f64(path, lineno, fields[2], "z")?;
        let code: u8 = fields[3]
            .trim()
            .parse()
            .map_err(|_| parse_err(path, lineno, format!("class: cannot parse {:?}", fields[3])))?;
        let cls =
            PointClass::from_code(code).ok_or_else(|| parse_err(path, lineno, format!("unknown class code {code}")))?;
        points.push(Point3::new(x, y, z, cls));
    }
    if points.is_empty() {
        return Err(parse_err(path, 0, "point cloud file contains no points"));
    }
    Ok(PointCloud::new(points))
}

pub fn write_point_cloud(pc: &PointCloud, path: &Path) -> Result<()> {
    let mut out = String::with_capacity(pc.len() * 32);
    out.push_str("x,y,z,class\n");
    for p in &pc.points {
        let _ = writeln!(out, "{:.3},{:.3},{:.3},{}", p.x, p.y, p.z, p.cls.code());
    }
    write_text(path, &out)
}

/// Reads `x,y,value` rows after exactly one header line.
pub fn read_samples(path: &Path) -> Result<Vec<StationSample>> {
    let text = read_text(path)?;
    let mut lines = text.lines().enumerate();
    if lines.next().is_none() {
        return Err(parse_err(path, 0, "sample file is empty"));
    }
    let mut out = Vec::new();
    for (i, line) in lines {
        let lineno = i + 1;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 3 {
            return Err(parse_err(
                path,
                lineno,
                format!("expected 3 fields, found {}", fields.len()),
            ));
        }
        out.push(StationSample::new(
            parse_f64(path, lineno, fields[0], "x")?,
            parse_f64(path, lineno, fields[1], "y")?,
            parse_f64(path, lineno, fields[2], "value")?,
        ));
    }
    if out.is_empty() {
        return Err(parse_err(path, 0, "sample file contains no rows"));
    }
    Ok(out)
}

pub fn write_samples(samples: &[StationSample], path: &Path) -> Result<()> {
    let mut out = String::from("x,y,value\n");
    for s in samples {
        let _ = writeln!(out, "{:.3},{:.3},{:.3}", s.x, s.y, s.value);
    }
    write_text(path, &out)
}

fn read_json(path: &Path) -> Result<Value> {
    let text = read_text(path)?;
    serde_json::from_str(&text).map_err(|e| parse_err(path, e.line(), e.to_string()))
}

fn features<'a>(doc: &'a Value, path: &Path) -> Result<&'a Vec<Value>> {
    if doc.get("type").and_then(Value::as_str) != Some("FeatureCollection") {
        return Err(Error::Invalid(format!(
            "{}: not a GeoJSON FeatureCollection",
            path.display()
        )));
    }
    doc.get("features")
        .and_then(Value::as_array)
        .ok_or_else(|| Error::Invalid(format!("{}: FeatureCollection without features", path.display())))
}

fn coord_list(v: &Value) -> Option<Vec<[f64; 2]>> {
    v.as_array()?
        .iter()
        .map(|c| {
            let c = c.as_array()?;
            Some([c.first()?.as_f64()?, c.get(1)?.as_f64()?])
        })
        .collect()
}

fn feature_label(feature: &Value, index: usize) -> String {
    match feature.pointer("/properties/id") {
        Some(Value::String(s)) => format!("feature {index} (id {s:?})"),
        Some(Value::Number(n)) => format!("feature {index} (id {n})"),
        _ => format!("feature {index}"),
    }
}

/// Reads building footprints with `id`, `age_years` and `category` properties.
pub fn read_footprints(path: &Path) -> Result<Vec<BuildingAttributes>> {
    let doc = read_json(path)?;
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for (index, f) in features(&doc, path)?.iter().enumerate() {
        let label = feature_label(f, index);
        let bad = |msg: &str| Error::Invalid(format!("{}: {label}: {msg}", path.display()));
        let id = match f.pointer("/properties/id") {
            Some(Value::String(s)) => s.clone(),
            Some(Value::Number(n)) if n.is_u64() || n.is_i64() => n.to_string(),
            Some(_) => return Err(bad("property id must be a string")),
            None => return Err(bad("missing property id")),
        };
        if id.is_empty() || id.contains([',', '"', '\n', '\r']) {
            return Err(bad("id must be nonempty and free of commas, quotes and line breaks"));
        }
        let age_years = match f.pointer("/properties/age_years") {
            Some(v) => v
                .as_u64()
                .and_then(|a| u32::try_from(a).ok())
                .ok_or_else(|| bad("age_years must be a non-negative integer"))?,
            None => return Err(bad("missing property age_years")),
        };
        let category = match f.pointer("/properties/category") {
            Some(v) => v
                .as_str()
                .and_then(Category::parse)
                .ok_or_else(|| bad("category must be one of private, public, misc"))?,
            None => return Err(bad("missing property category")),
        };
        if f.pointer("/geometry/type").and_then(Value::as_str) != Some("Polygon") {
            return Err(bad("geometry must be a Polygon"));
        }
        let rings = f
            .pointer("/geometry/coordinates")
            .and_then(Value::as_array)
            .ok_or_else(|| bad("polygon has no coordinates"))?;
        let mut rings = rings
            .iter()
            .map(|r| coord_list(r).ok_or_else(|| bad("malformed ring coordinates")))
            .collect::<Result<Vec<_>>>()?;
        if rings.is_empty() {
            return Err(bad("polygon has no rings"));
        }
        let exterior = rings.remove(0);
        let footprint = Polygon::new(exterior, rings).map_err(|e| bad(&e.to_string()))?;
        if !seen.insert(id.clone()) {
            return Err(Error::DuplicateId(id));
        }
        out.push(BuildingAttributes {
            id,
            age_years,
            category,
            footprint,
        });
    }
    Ok(out)
}

fn ring_json(ring: &[[f64; 2]]) -> Value {
    Value::Array(ring.iter().map(|p| json!([p[0], p[1]])).collect())
}

pub(crate) fn polygon_json(poly: &Polygon) -> Value {
    json!({
        "type": "Polygon",
        "coordinates": poly.rings().map(ring_json).collect::<Vec<_>>(),
    })
}

pub(crate) fn collection(features: Vec<Value>) -> Value {
    json!({ "type": "FeatureCollection", "features": features })
}

pub(crate) fn write_json(doc: &Value, path: &Path) -> Result<()> {
    let mut text = serde_json::to_string_pretty(doc).expect("json values serialize");
    text.push('\n');
    write_text(path, &text)
}

pub fn write_footprints(buildings: &[BuildingAttributes], path: &Path) -> Result<()> {
    let feats = buildings
        .iter()
        .map(|b| {
            json!({
                "type": "Feature",
                "properties": {
                    "id": b.id,
                    "age_years": b.age_years,
                    "category": b.category.as_str(),
                },
                "geometry": polygon_json(&b.footprint),
            })
        })
        .collect();
    write_json(&collection(feats), path)
}

/// Reads LineString / MultiLineString features carrying a `class` of `main` or `minor`.
pub fn read_roads(path: &Path) -> Result<Vec<Polyline>> {
    let doc = read_json(path)?;
    let mut out = Vec::new();
    for (index, f) in features(&doc, path)?.iter().enumerate() {
        let bad = |msg: &str| Error::Invalid(format!("{}: feature {index}: {msg}", path.display()));
        let class = f
            .pointer("/properties/class")
            .and_then(Value::as_str)
            .and_then(RoadClass::parse)
            .ok_or_else(|| bad("property class must be main or minor"))?;
        let coords = f
            .pointer("/geometry/coordinates")
            .ok_or_else(|| bad("missing coordinates"))?;
        let parts = match f.pointer("/geometry/type").and_then(Value::as_str) {
            Some("LineString") => vec![coord_list(coords).ok_or_else(|| bad("malformed coordinates"))?],
            Some("MultiLineString") => coords
                .as_array()
                .ok_or_else(|| bad("malformed coordinates"))?
                .iter()
                .map(|l| coord_list(l).ok_or_else(|| bad("malformed coordinates")))
                .collect::<Result<Vec<_>>>()?,
            _ => return Err(bad("geometry must be a LineString or MultiLineString")),
        };
        for part in parts {
            out.push(Polyline::new(part, class).map_err(|e| bad(&e.to_string()))?);
        }
    }
    Ok(out)
}

pub fn write_roads(roads: &[Polyline], path: &Path) -> Result<()> {
    let feats = roads
        .iter()
        .map(|r| {
            json!({
                "type": "Feature",
                "properties": { "class": r.class.as_str() },
                "geometry": { "type": "LineString", "coordinates": ring_json(r.vertices()) },
            })
        })
        .collect();
    write_json(&collection(feats), path)
}

/// Reads an ESRI ASCII grid. `xllcenter`/`yllcenter` headers are accepted
/// and shifted to corner form.
pub fn read_raster_asc(path: &Path) -> Result<RasterGrid> {
    let text = read_text(path)?;
    parse_raster_asc(&text, path)
}

pub fn parse_raster_asc(text: &str, path: &Path) -> Result<RasterGrid> {
    let mut ncols = None;
    let mut nrows = None;
    let mut xll = None;
    let mut yll = None;
    let mut centered = (false, false);
    let mut cellsize = None;
    let mut nodata = DEFAULT_NODATA;
    let mut values = Vec::new();
    let mut header_done = false;
    for (i, line) in text.lines().enumerate() {
        let lineno = i + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        let first = trimmed.split_whitespace().next().unwrap_or_default();
        let is_header = !header_done && first.chars().next().is_some_and(|c| c.is_ascii_alphabetic());
        if is_header {
            let mut parts = trimmed.split_whitespace();
            let key = parts.next().unwrap_or_default().to_ascii_lowercase();
            let val = parts
                .next()
                .ok_or_else(|| parse_err(path, lineno, format!("header {key} has no value")))?;
            let num = parse_f64(path, lineno, val, &key)?;
            let as_count = |v: f64| -> Result<usize> {
                if v >= 1.0 && v.fract() == 0.0 {
                    Ok(v as usize)
                } else {
                    Err(parse_err(path, lineno, format!("{key} must be a positive integer")))
                }
            };
            match key.as_str() {
                "ncols" => ncols = Some(as_count(num)?),
                "nrows" => nrows = Some(as_count(num)?),
                "xllcorner" => xll = Some(num),
                "yllcorner" => yll = Some(num),
                "xllcenter" => {
                    xll = Some(num);
                    centered.0 = true;
                }
                "yllcenter" => {
                    yll = Some(num);
                    centered.1 = true;
                }
                "cellsize" => cellsize = Some(num),
                "nodata_value" => nodata = num,
                _ => return Err(parse_err(path, lineno, format!("unknown header keyword {key:?}"))),
            }
            continue;
        }
        header_done = true;
        for tok in trimmed.split_whitespace() {
            values.push(parse_f64(path, lineno, tok, "cell value")?);
        }
    }
    let missing = |k: &str| parse_err(path, 0, format!("missing header keyword {k}"));
    let ncols = ncols.ok_or_else(|| missing("ncols"))?;
    let nrows = nrows.ok_or_else(|| missing("nrows"))?;
    let cell = cellsize.ok_or_else(|| missing("cellsize"))?;
    let mut ox = xll.ok_or_else(|| missing("xllcorner"))?;
    let mut oy = yll.ok_or_else(|| missing("yllcorner"))?;
    if centered.0 {
        ox -= cell / 2.0;
    }
    if centered.1 {
        oy -= cell / 2.0;
    }
    if values.len() != nrows * ncols {
        return Err(parse_err(
            path,
            0,
            format!(
                "expected {} cell values for {nrows}x{ncols}, found {}",
                nrows * ncols,
                values.len()
            ),
        ));
    }
    // file rows run north to south; internal rows run south to north
    let mut grid_values = vec![f64::NAN; values.len()];
    for (file_row, chunk) in values.chunks(ncols).enumerate() {
        let row = nrows - 1 - file_row;
        for (col, &v) in chunk.iter().enumerate() {
            grid_values[row * ncols + col] = if v == nodata { f64::NAN } else { v };
        }
    }
    RasterGrid::from_values(ox, oy, cell, nrows, ncols, grid_values)
}

pub fn format_raster_asc(grid: &RasterGrid) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "ncols {}", grid.ncols);
    let _ = writeln!(out, "nrows {}", grid.nrows);
    let _ = writeln!(out, "xllcorner {}", grid.origin_x);
    let _ = writeln!(out, "yllcorner {}", grid.origin_y);
    let _ = writeln!(out, "cellsize {}", grid.cell);
    let _ = writeln!(out, "NODATA_value {DEFAULT_NODATA}");
    for row in (0..grid.nrows).rev() {
        let line = (0..grid.ncols)
            .map(|col| match grid.get(row, col) {
                Some(v) => format!("{v}"),
                None => format!("{DEFAULT_NODATA}"),
            })
            .collect::<Vec<_>>()
            .join(" ");
        out.push_str(&line);
        out.push('\n');
    }
    out
}

pub fn write_raster_asc(grid: &RasterGrid, path: &Path) -> Result<()> {
    write_text(path, &format_raster_asc(grid))
}

fn building_csv_line(row: &BuildingRow) -> String {
    let ind = row.indicators;
    let comp = |f: fn(&IndicatorVector) -> f64| fmt6_opt(ind.as_ref().map(f));
    [
        row.id.clone(),
        (row.potential as u8).to_string(),
        fmt6(row.roof_area_m2),
        fmt6(row.greenable_area_m2),
        fmt6_opt(row.slope_deg),
        fmt6_opt(row.height_m),
        comp(|v| v.greenspace),
        comp(|v| v.distance),
        comp(|v| v.category),
        comp(|v| v.income),
        comp(|v| v.temperature),
        comp(|v| v.precipitation),
        fmt6_opt(row.priority),
    ]
    .join(",")
}

/// Writes the per-building CSV (columns in [`BUILDING_CSV_HEADER`] order)
/// and a GeoJSON of footprints carrying the same properties.
pub fn write_building_report(buildings: &[BuildingRecord], path_csv: &Path, path_geojson: &Path) -> Result<()> {
    let mut csv = String::from(BUILDING_CSV_HEADER);
    csv.push('\n');
    let mut feats = Vec::with_capacity(buildings.len());
    for b in buildings {
        let row = BuildingRow::from(b);
        csv.push_str(&building_csv_line(&row));
        csv.push('\n');

        let mut props = Map::new();
        let opt = |v: Option<f64>| v.map(|x| json!(round6(x))).unwrap_or(Value::Null);
        props.insert("id".into(), json!(row.id));
        props.insert("potential".into(), json!(row.potential));
        props.insert("age_years".into(), json!(b.attrs.age_years));
        props.insert("category".into(), json!(b.attrs.category.as_str()));
        props.insert("roof_area_m2".into(), json!(round6(row.roof_area_m2)));
        props.insert("greenable_area_m2".into(), json!(round6(row.greenable_area_m2)));
        props.insert("slope_deg".into(), opt(row.slope_deg));
        props.insert("height_m".into(), opt(row.height_m));
        let ind = row.indicators;
        props.insert("i_g".into(), opt(ind.map(|v| v.greenspace)));
        props.insert("i_d".into(), opt(ind.map(|v| v.distance)));
        props.insert("i_c".into(), opt(ind.map(|v| v.category)));
        props.insert("i_i".into(), opt(ind.map(|v| v.income)));
        props.insert("i_t".into(), opt(ind.map(|v| v.temperature)));
        props.insert("i_p".into(), opt(ind.map(|v| v.precipitation)));
        props.insert("priority".into(), opt(row.priority));
        feats.push(json!({
            "type": "Feature",
            "properties": Value::Object(props),
            "geometry": polygon_json(&b.attrs.footprint),
        }));
    }
    write_text(path_csv, &csv)?;
    write_json(&collection(feats), path_geojson)
}

/// Reads a CSV produced by [`write_building_report`].
pub fn read_building_csv(path: &Path) -> Result<Vec<BuildingRow>> {
    let text = read_text(path)?;
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim() == BUILDING_CSV_HEADER => {}
        _ => return Err(parse_err(path, 1, "unexpected building report header")),
    }
    let mut out = Vec::new();
    for (i, line) in lines {
        let lineno = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 13 {
            return Err(parse_err(
                path,
                lineno,
                format!("expected 13 fields, found {}", f.len()),
            ));
        }
        let opt = |s: &str, name: &str| -> Result<Option<f64>> {
            if s.is_empty() {
                Ok(None)
            } else {
                parse_f64(path, lineno, s, name).map(Some)
            }
        };
        let potential = match f[1] {
            "1" => true,
            "0" => false,
            other => {
                return Err(parse_err(
                    path,
                    lineno,
                    format!("potential must be 0 or 1, got {other:?}"),
                ))
            }
        };
        let comps = [
            opt(f[6], "i_g")?,
            opt(f[7], "i_d")?,
            opt(f[8], "i_c")?,
            opt(f[9], "i_i")?,
            opt(f[10], "i_t")?,
            opt(f[11], "i_p")?,
        ];
        let indicators = match comps {
            [Some(g), Some(d), Some(c), Some(i), Some(t), Some(p)] => Some(IndicatorVector {
                greenspace: g,
                distance: d,
                category: c,
                income: i,
                temperature: t,
                precipitation: p,
            }),
            [None, None, None, None, None, None] => None,
            _ => return Err(parse_err(path, lineno, "indicator columns partially filled")),
        };
        out.push(BuildingRow {
            id: f[0].to_string(),
            potential,
            roof_area_m2: parse_f64(path, lineno, f[2], "roof_area_m2")?,
            greenable_area_m2: parse_f64(path, lineno, f[3], "greenable_area_m2")?,
            slope_deg: opt(f[4], "slope_deg")?,
            height_m: opt(f[5], "height_m")?,
            indicators,
            priority: opt(f[12], "priority")?,
        });
    }
    Ok(out)
}
