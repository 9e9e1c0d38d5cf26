//! Flat `key = value` pipeline configuration.
//!
//! Blank lines and lines starting with `#` are ignored. Relative paths are
//! resolved against the directory holding the configuration file.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use crate::benefits::{CoolingParams, EconParams};
use crate::error::{Error, Result};
use crate::interp::VariogramKind;
use crate::priority::Scheme;
use crate::roofs::{ExtractParams, GrowParams, PotentialThresholds};

#[derive(Debug, Clone, PartialEq)]
pub struct InputPaths {
    pub points: PathBuf,
    pub footprints: PathBuf,
    pub roads: PathBuf,
    pub precip_stations: PathBuf,
    pub income_samples: PathBuf,
    pub population: PathBuf,
    /// Spring, summer, autumn, winter.
    pub temperatures: [PathBuf; 4],
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub inputs: InputPaths,
    pub out: PathBuf,
    pub dsm_cell: f64,
    pub wall_threshold_m: f64,
    pub normal_tol_deg: f64,
    pub residual_tol_m: f64,
    pub slope_deg: f64,
    pub area_m2: f64,
    pub age_yr: u32,
    pub ground_radius_m: f64,
    pub mask_cell: f64,
    pub gc_radius: f64,
    pub road_cap_m: f64,
    pub surface_cell: f64,
    pub idw_power: f64,
    pub idw_k: usize,
    pub kriging_k: usize,
    pub variogram: VariogramKind,
    pub variogram_bins: usize,
    pub scheme: Scheme,
    pub cooling: CoolingParams,
    pub econ: EconParams,
    /// Replace the measured greenable area in the benefit chain.
    pub override_area_m2: Option<f64>,
    /// Replace the computed energy savings in the benefit chain.
    pub override_energy_kwh: Option<f64>,
    /// Tonnes CO₂ per year, for the share line of the report.
    pub annual_emissions_t: f64,
}

const PATH_KEYS: [&str; 10] = [
    "points",
    "footprints",
    "roads",
    "precip_stations",
    "income_samples",
    "population",
    "temp_spring",
    "temp_summer",
    "temp_autumn",
    "temp_winter",
];

const KNOWN_KEYS: [&str; 44] = [
    "points",
    "footprints",
    "roads",
    "precip_stations",
    "income_samples",
    "population",
    "temp_spring",
    "temp_summer",
    "temp_autumn",
    "temp_winter",
    "out",
    "dsm_cell",
    "wall_threshold",
    "normal_tol_deg",
    "residual_tol_m",
    "slope_deg",
    "area_m2",
    "age_yr",
    "ground_radius_m",
    "mask_cell",
    "gc_radius",
    "road_cap_m",
    "surface_cell",
    "idw_power",
    "idw_k",
    "kriging_k",
    "variogram",
    "variogram_bins",
    "scheme",
    "dt_sunny",
    "dt_cloudy",
    "dt_rainy",
    "c_air",
    "d_air",
    "season_days",
    "rainy_days",
    "sunny_share",
    "hours_per_day",
    "q_co2",
    "k_conv",
    "tariff",
    "carbon_price",
    "override_area_m2",
    "override_energy_kwh",
];

fn parse_pairs(text: &str, path: &Path) -> Result<BTreeMap<String, String>> {
    let mut map = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let parse_err = |msg: String| Error::Parse {
            path: path.display().to_string(),
            line: i + 1,
            msg,
        };
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| parse_err(format!("expected key = value, got {line:?}")))?;
        let (k, v) = (k.trim(), v.trim());
        if k != "annual_emissions_t" && !KNOWN_KEYS.contains(&k) {
            return Err(parse_err(format!("unknown key {k:?}")));
        }
        if map.insert(k.to_string(), v.to_string()).is_some() {
            return Err(parse_err(format!("key {k:?} given twice")));
        }
    }
    Ok(map)
}

struct Values {
    map: BTreeMap<String, String>,
}

impl Values {
    fn num(&self, key: &str, default: f64) -> Result<f64> {
        match self.map.get(key) {
            None => Ok(default),
            Some(v) => v
                .parse::<f64>()
                .ok()
                .filter(|x| x.is_finite())
                .ok_or_else(|| Error::Config(format!("{key}: expected a number, got {v:?}"))),
        }
    }

    fn positive(&self, key: &str, default: f64) -> Result<f64> {
        let v = self.num(key, default)?;
        if v > 0.0 {
            Ok(v)
        } else {
            Err(Error::Config(format!("{key} must be positive, got {v}")))
        }
    }

    fn count(&self, key: &str, default: usize) -> Result<usize> {
        match self.map.get(key) {
            None => Ok(default),
            Some(v) => v
                .parse::<usize>()
                .ok()
                .filter(|&n| n > 0)
                .ok_or_else(|| Error::Config(format!("{key}: expected a positive integer, got {v:?}"))),
        }
    }

    fn optional(&self, key: &str) -> Result<Option<f64>> {
        match self.map.get(key) {
            None => Ok(None),
            Some(_) => {
                let v = self.num(key, 0.0)?;
                if v < 0.0 {
                    return Err(Error::Config(format!("{key} must be >= 0, got {v}")));
                }
                Ok(Some(v))
            }
        }
    }
}

impl PipelineConfig {
    /// Reads and validates a configuration file. Input files must exist.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        let cfg = Self::parse(&text, path, &base)?;
        cfg.check_inputs_exist()?;
        Ok(cfg)
    }

    /// Parses without touching the file system; `base` anchors relative paths.
    pub fn parse(text: &str, path: &Path, base: &Path) -> Result<Self> {
        let v = Values {
            map: parse_pairs(text, path)?,
        };
        let resolve = |key: &str| -> Result<PathBuf> {
            let raw = v
                .map
                .get(key)
                .ok_or_else(|| Error::Config(format!("missing required key {key:?}")))?;
            let p = PathBuf::from(raw);
            Ok(if p.is_absolute() { p } else { base.join(p) })
        };
        for key in PATH_KEYS {
            resolve(key)?;
        }
        let inputs = InputPaths {
            points: resolve("points")?,
            footprints: resolve("footprints")?,
            roads: resolve("roads")?,
            precip_stations: resolve("precip_stations")?,
            income_samples: resolve("income_samples")?,
            population: resolve("population")?,
            temperatures: [
                resolve("temp_spring")?,
                resolve("temp_summer")?,
                resolve("temp_autumn")?,
                resolve("temp_winter")?,
            ],
        };
        let out = match v.map.get("out") {
            Some(o) if PathBuf::from(o).is_absolute() => PathBuf::from(o),
            Some(o) => base.join(o),
            None => base.join("out"),
        };
        let variogram = match v.map.get("variogram") {
            None => VariogramKind::Spherical,
            Some(s) => {
                VariogramKind::parse(s).ok_or_else(|| Error::Config(format!("variogram: unknown model {s:?}")))?
            }
        };
        let scheme = match v.map.get("scheme") {
            None => Scheme::Equal,
            Some(s) => {
                Scheme::parse(s).ok_or_else(|| Error::Config(format!("scheme: unknown weighting scheme {s:?}")))?
            }
        };
        let age = v.num("age_yr", 60.0)?;
        if !(age > 0.0 && age.fract() == 0.0 && age <= u32::MAX as f64) {
            return Err(Error::Config(format!(
                "age_yr must be a positive whole number, got {age}"
            )));
        }
        let d = CoolingParams::default();
        let cooling = CoolingParams {
            dt_sunny: v.num("dt_sunny", d.dt_sunny)?,
            dt_cloudy: v.num("dt_cloudy", d.dt_cloudy)?,
            dt_rainy: v.num("dt_rainy", d.dt_rainy)?,
            c_air: v.num("c_air", d.c_air)?,
            d_air: v.num("d_air", d.d_air)?,
            season_days: v.num("season_days", d.season_days)?,
            rainy_days: v.num("rainy_days", d.rainy_days)?,
            sunny_share: v.num("sunny_share", d.sunny_share)?,
            hours_per_day: v.num("hours_per_day", d.hours_per_day)?,
        };
        cooling.validate()?;
        let e = EconParams::default();
        let econ = EconParams {
            q_co2: v.num("q_co2", e.q_co2)?,
            k_conv: v.num("k_conv", e.k_conv)?,
            tariff: v.num("tariff", e.tariff)?,
            carbon_price: v.num("carbon_price", e.carbon_price)?,
        };
        econ.validate()?;
        let cfg = Self {
            inputs,
            out,
            dsm_cell: v.positive("dsm_cell", 1.0)?,
            wall_threshold_m: v.positive("wall_threshold", 1.0)?,
            normal_tol_deg: v.positive("normal_tol_deg", 10.0)?,
            residual_tol_m: v.positive("residual_tol_m", 0.2)?,
            slope_deg: v.positive("slope_deg", 15.0)?,
            area_m2: v.positive("area_m2", 10.0)?,
            age_yr: age as u32,
            ground_radius_m: v.positive("ground_radius_m", 10.0)?,
            mask_cell: v.positive("mask_cell", 5.0)?,
            gc_radius: v.positive("gc_radius", 500.0)?,
            road_cap_m: v.positive("road_cap_m", 500.0)?,
            surface_cell: v.positive("surface_cell", 30.0)?,
            idw_power: v.positive("idw_power", 2.0)?,
            idw_k: v.count("idw_k", 12)?,
            kriging_k: v.count("kriging_k", 16)?,
            variogram,
            variogram_bins: v.count("variogram_bins", 15)?,
            scheme,
            cooling,
            econ,
            override_area_m2: v.optional("override_area_m2")?,
            override_energy_kwh: v.optional("override_energy_kwh")?,
            annual_emissions_t: v.positive("annual_emissions_t", 34.7e6)?,
        };
        Ok(cfg)
    }

    pub fn check_inputs_exist(&self) -> Result<()> {
        let i = &self.inputs;
        let all = [
            &i.points,
            &i.footprints,
            &i.roads,
            &i.precip_stations,
            &i.income_samples,
            &i.population,
        ]
        .into_iter()
        .chain(i.temperatures.iter());
        for p in all {
            if !p.is_file() {
                return Err(Error::Config(format!("input file {} does not exist", p.display())));
            }
        }
        Ok(())
    }

    pub fn extract_params(&self) -> ExtractParams {
        ExtractParams {
            cell: self.dsm_cell,
            wall_threshold_m: self.wall_threshold_m,
            grow: GrowParams {
                normal_tol_deg: self.normal_tol_deg,
                residual_tol_m: self.residual_tol_m,
            },
            thresholds: PotentialThresholds {
                max_slope_deg: self.slope_deg,
                min_area_m2: self.area_m2,
                max_age_years: self.age_yr,
            },
            ground_radius_m: self.ground_radius_m,
        }
    }
}
