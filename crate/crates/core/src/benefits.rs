//! City-level benefits of greening the potential roofs: greenspace exposure,
//! carbon offsets, cooling energy savings and their monetary value.

use rayon::prelude::*;
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};
use crate::geocore::RasterGrid;
use crate::indicators::{greenspace_coverage, GreenspaceMask};

pub const J_PER_KWH: f64 = 3.6e6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoolingParams {
    /// Cooling per hour on sunny days, °C.
    pub dt_sunny: f64,
    pub dt_cloudy: f64,
    pub dt_rainy: f64,
    /// Specific heat of air, J/(kg·°C).
    pub c_air: f64,
    /// Air density, kg/m³.
    pub d_air: f64,
    pub season_days: f64,
    pub rainy_days: f64,
    /// Sunny share of the non-rainy days.
    pub sunny_share: f64,
    pub hours_per_day: f64,
}

impl Default for CoolingParams {
    fn default() -> Self {
        Self {
            dt_sunny: 0.15,
            dt_cloudy: 0.10,
            dt_rainy: 0.0,
            c_air: 1004.0,
            d_air: 1.29,
            season_days: 180.0,
            rainy_days: 30.0,
            sunny_share: 0.5,
            hours_per_day: 24.0,
        }
    }
}

impl CoolingParams {
    pub fn validate(&self) -> Result<()> {
        let all = [
            self.dt_sunny,
            self.dt_cloudy,
            self.dt_rainy,
            self.c_air,
            self.d_air,
            self.season_days,
            self.rainy_days,
            self.sunny_share,
            self.hours_per_day,
        ];
        if all.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::Config(
                "cooling parameters must be finite and non-negative".into(),
            ));
        }
        if self.rainy_days > self.season_days {
            return Err(Error::Config("rainy days exceed season days".into()));
        }
        if self.sunny_share > 1.0 {
            return Err(Error::Config("sunny share must lie in [0, 1]".into()));
        }
        Ok(())
    }

    pub fn sunny_days(&self) -> f64 {
        (self.season_days - self.rainy_days) * self.sunny_share
    }

    pub fn cloudy_days(&self) -> f64 {
        (self.season_days - self.rainy_days) * (1.0 - self.sunny_share)
    }

    /// Seasonal total of hourly cooling, °C·h.
    pub fn degree_hours(&self) -> f64 {
        self.hours_per_day
            * (self.dt_sunny * self.sunny_days()
                + self.dt_cloudy * self.cloudy_days()
                + self.dt_rainy * self.rainy_days)
    }

    /// Volumetric heat capacity of air, J/(m³·°C).
    pub fn heat_capacity(&self) -> f64 {
        self.c_air * self.d_air
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EconParams {
    /// Annual sequestration per m² of green roof, kg CO₂.
    pub q_co2: f64,
    /// Emission factor of electricity, kg CO₂ per kWh.
    pub k_conv: f64,
    /// HK$ per kWh.
    pub tariff: f64,
    /// HK$ per tonne CO₂.
    pub carbon_price: f64,
}

impl Default for EconParams {
    fn default() -> Self {
        Self {
            q_co2: 1.46,
            k_conv: 0.785,
            tariff: 1.29,
            carbon_price: 65.0,
        }
    }
}

impl EconParams {
    pub fn validate(&self) -> Result<()> {
        if [self.q_co2, self.k_conv, self.tariff, self.carbon_price]
            .iter()
            .any(|v| !(v.is_finite() && *v > 0.0))
        {
            return Err(Error::Config("economic parameters must be finite and positive".into()));
        }
        Ok(())
    }
}

/// Population-weighted mean greenspace coverage over populated cells.
pub fn greenspace_exposure(mask: &GreenspaceMask, population: &RasterGrid, radius: f64) -> Result<f64> {
    let cells: Vec<(f64, f64, f64)> = population
        .iter_valid()
        .filter(|&(_, _, p)| p > 0.0)
        .map(|(r, c, p)| {
            let (x, y) = population.cell_center(r, c);
            (x, y, p)
        })
        .collect();
    if population.iter_valid().any(|(_, _, p)| p < 0.0) {
        return Err(Error::Invalid("population grid has negative values".into()));
    }
    let total: f64 = cells.iter().map(|c| c.2).sum();
    if !(total > 0.0) {
        return Err(Error::ZeroPopulation);
    }
    let weighted: f64 = cells
        .par_iter()
        .map(|&(x, y, p)| p * greenspace_coverage(mask, x, y, radius))
        .collect::<Vec<f64>>()
        .iter()
        .sum();
    Ok((weighted / total).clamp(0.0, 1.0))
}

/// Direct sequestration, kg CO₂ per year.
pub fn carbon_sequestration(greenable_area_m2: f64, q_co2: f64) -> Result<f64> {
    if !(greenable_area_m2 >= 0.0) {
        return Err(Error::Invalid(format!(
            "greenable area must be >= 0, got {greenable_area_m2}"
        )));
    }
    Ok(q_co2 * greenable_area_m2)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergySavings {
    pub joules: f64,
    pub kwh: f64,
    /// Σ area × height, m³.
    pub volume_m3: f64,
}

/// Heat removed from the air volume above the greened buildings over the
/// cooling season, from `(roof area, height)` pairs.
pub fn energy_savings(buildings: &[(f64, f64)], p: &CoolingParams) -> Result<EnergySavings> {
    if let Some(&(a, h)) = buildings.iter().find(|(a, h)| !(*a >= 0.0 && *h >= 0.0)) {
        return Err(Error::Invalid(format!("negative or non-finite area/height ({a}, {h})")));
    }
    let volume: f64 = buildings.iter().map(|(a, h)| a * h).sum();
    Ok(energy_from_volume(volume, p))
}

pub fn energy_from_volume(volume_m3: f64, p: &CoolingParams) -> EnergySavings {
    let joules = p.degree_hours() * p.heat_capacity() * volume_m3;
    EnergySavings {
        joules,
        kwh: joules / J_PER_KWH,
        volume_m3,
    }
}

/// Emissions avoided by the saved electricity, kg CO₂ per year.
pub fn indirect_carbon(e_kwh: f64, k_conv: f64) -> f64 {
    e_kwh * k_conv
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EconomicValue {
    pub energy: f64,
    pub carbon: f64,
    pub total: f64,
}

pub fn economic_value(e_kwh: f64, c_total_kg: f64, econ: &EconParams) -> EconomicValue {
    let energy = e_kwh * econ.tariff;
    let carbon = c_total_kg / 1000.0 * econ.carbon_price;
    EconomicValue {
        energy,
        carbon,
        total: energy + carbon,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Regression {
    pub slope: f64,
    pub intercept: f64,
    pub r: f64,
    /// Two-sided.
    pub p_value: f64,
    pub n: usize,
}

/// Ordinary least squares of `y` on `x` with Pearson's r and a two-sided
/// Student-t test of r = 0.
pub fn income_greenspace_regression(pairs: &[(f64, f64)]) -> Result<Regression> {
    let n = pairs.len();
    if n < 3 {
        return Err(Error::TooFewSamples { needed: 3, got: n });
    }
    let nf = n as f64;
    let mx = pairs.iter().map(|p| p.0).sum::<f64>() / nf;
    let my = pairs.iter().map(|p| p.1).sum::<f64>() / nf;
    let (mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0);
    for &(x, y) in pairs {
        sxx += (x - mx).powi(2);
        syy += (y - my).powi(2);
        sxy += (x - mx) * (y - my);
    }
    if sxx == 0.0 {
        return Err(Error::ZeroVariance("income"));
    }
    if syy == 0.0 {
        return Err(Error::ZeroVariance("greenspace coverage"));
    }
    let slope = sxy / sxx;
    let r = (sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0);
    let df = nf - 2.0;
    let p_value = if r.abs() >= 1.0 {
        0.0
    } else {
        let t = r * (df / (1.0 - r * r)).sqrt();
        let dist = StudentsT::new(0.0, 1.0, df).map_err(|e| Error::Invalid(e.to_string()))?;
        (2.0 * dist.cdf(-t.abs())).min(1.0)
    };
    Ok(Regression {
        slope,
        intercept: my - slope * mx,
        r,
        p_value,
        n,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BenefitReport {
    pub greenable_area_m2: f64,
    pub exposure_baseline: Option<f64>,
    pub exposure_greened: Option<f64>,
    pub volume_m3: f64,
    pub e_kwh: f64,
    /// kg CO₂ per year.
    pub c_v: f64,
    pub c_e: f64,
    pub c_total: f64,
    pub value_energy: f64,
    pub value_carbon: f64,
    pub value_total: f64,
}

impl BenefitReport {
    /// Chains the carbon and money formulas from greenable area and energy.
    pub fn from_totals(greenable_area_m2: f64, energy: EnergySavings, econ: &EconParams) -> Result<Self> {
        let c_v = carbon_sequestration(greenable_area_m2, econ.q_co2)?;
        let c_e = indirect_carbon(energy.kwh, econ.k_conv);
        let c_total = c_v + c_e;
        let value = economic_value(energy.kwh, c_total, econ);
        Ok(Self {
            greenable_area_m2,
            exposure_baseline: None,
            exposure_greened: None,
            volume_m3: energy.volume_m3,
            e_kwh: energy.kwh,
            c_v,
            c_e,
            c_total,
            value_energy: value.energy,
            value_carbon: value.carbon,
            value_total: value.total,
        })
    }

    /// Share of a city's annual emissions (given in tonnes) offset per year.
    pub fn share_of_emissions(&self, annual_emissions_t: f64) -> f64 {
        self.c_total / 1000.0 / annual_emissions_t
    }
}
