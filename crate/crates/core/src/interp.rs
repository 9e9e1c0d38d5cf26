//! Scattered-sample interpolation: inverse distance weighting and ordinary
//! kriging with a fitted spherical or exponential variogram.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geocore::RasterGrid;
use crate::ingest::StationSample;

/// Samples with duplicates merged, sorted by `(x, y)` so that every
/// downstream computation is independent of input order.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleSet {
    samples: Vec<StationSample>,
    pub units: String,
}

impl SampleSet {
    /// Averages samples that share exact coordinates.
    pub fn new(samples: Vec<StationSample>, units: impl Into<String>) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::TooFewSamples { needed: 1, got: 0 });
        }
        if let Some(s) = samples
            .iter()
            .find(|s| !(s.x.is_finite() && s.y.is_finite() && s.value.is_finite()))
        {
            return Err(Error::Invalid(format!(
                "non-finite sample ({}, {}, {})",
                s.x, s.y, s.value
            )));
        }
        let mut sorted = samples;
        sorted.sort_by(|a, b| {
            a.x.total_cmp(&b.x)
                .then(a.y.total_cmp(&b.y))
                .then(a.value.total_cmp(&b.value))
        });
        let mut merged: Vec<StationSample> = Vec::with_capacity(sorted.len());
        let mut i = 0;
        while i < sorted.len() {
            let mut j = i;
            let mut sum = 0.0;
            while j < sorted.len() && sorted[j].x == sorted[i].x && sorted[j].y == sorted[i].y {
                sum += sorted[j].value;
                j += 1;
            }
            merged.push(StationSample {
                x: sorted[i].x,
                y: sorted[i].y,
                value: sum / (j - i) as f64,
            });
            i = j;
        }
        Ok(Self {
            samples: merged,
            units: units.into(),
        })
    }

    pub fn samples(&self) -> &[StationSample] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Indices of the `k` nearest samples with their distances, nearest first;
    /// equal distances keep the canonical sample order.
    pub fn nearest(&self, x: f64, y: f64, k: usize) -> Vec<(usize, f64)> {
        let mut d: Vec<(usize, f64)> = self
            .samples
            .iter()
            .enumerate()
            .map(|(i, s)| (i, (s.x - x).hypot(s.y - y)))
            .collect();
        let cmp = |a: &(usize, f64), b: &(usize, f64)| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0));
        let k = k.min(d.len());
        if k < d.len() {
            d.select_nth_unstable_by(k, cmp);
            d.truncate(k);
        }
        d.sort_by(cmp);
        d
    }

    /// Half of the bounding-box diagonal.
    pub fn half_diagonal(&self) -> f64 {
        let (mut x0, mut y0, mut x1, mut y1) = (f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY);
        for s in &self.samples {
            x0 = x0.min(s.x);
            y0 = y0.min(s.y);
            x1 = x1.max(s.x);
            y1 = y1.max(s.y);
        }
        0.5 * (x1 - x0).hypot(y1 - y0)
    }
}

const COINCIDENT: f64 = 1e-9;

/// Inverse-distance-weighted mean over the `k` nearest samples.
pub fn idw_predict(samples: &SampleSet, x: f64, y: f64, power: f64, k: usize) -> f64 {
    let near = samples.nearest(x, y, k.max(1));
    if let Some(&(i, d)) = near.first() {
        if d < COINCIDENT {
            return samples.samples[i].value;
        }
    }
    let (mut num, mut den) = (0.0, 0.0);
    for (i, d) in near {
        let w = d.powf(-power);
        num += w * samples.samples[i].value;
        den += w;
    }
    num / den
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LagBin {
    /// Mean separation of the pairs in the bin.
    pub lag: f64,
    pub gamma: f64,
    pub pairs: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalVariogram {
    /// Non-empty bins in increasing lag order.
    pub bins: Vec<LagBin>,
    pub max_dist: f64,
    pub bin_width: f64,
}

/// Classical semivariogram estimator `½·mean (zᵢ − zⱼ)²` over equal-width
/// lag bins up to `max_dist` (half the bounding-box diagonal by default).
pub fn empirical_semivariogram(
    samples: &SampleSet,
    n_bins: usize,
    max_dist: Option<f64>,
) -> Result<EmpiricalVariogram> {
    if samples.len() < 2 {
        return Err(Error::TooFewSamples {
            needed: 2,
            got: samples.len(),
        });
    }
    if n_bins == 0 {
        return Err(Error::Invalid("semivariogram needs at least one bin".into()));
    }
    let max_dist = max_dist.unwrap_or_else(|| samples.half_diagonal());
    if !(max_dist > 0.0 && max_dist.is_finite()) {
        return Err(Error::Invalid(format!(
            "semivariogram max distance must be > 0, got {max_dist}"
        )));
    }
    let width = max_dist / n_bins as f64;
    let mut sum_d = vec![0.0; n_bins];
    let mut sum_sq = vec![0.0; n_bins];
    let mut count = vec![0usize; n_bins];
    let s = &samples.samples;
    for i in 0..s.len() {
        for j in i + 1..s.len() {
            let d = (s[i].x - s[j].x).hypot(s[i].y - s[j].y);
            if d > max_dist {
                continue;
            }
            let b = ((d / width) as usize).min(n_bins - 1);
            sum_d[b] += d;
            sum_sq[b] += (s[i].value - s[j].value).powi(2);
            count[b] += 1;
        }
    }
    let bins = (0..n_bins)
        .filter(|&b| count[b] > 0)
        .map(|b| LagBin {
            lag: sum_d[b] / count[b] as f64,
            gamma: 0.5 * sum_sq[b] / count[b] as f64,
            pairs: count[b],
        })
        .collect();
    Ok(EmpiricalVariogram {
        bins,
        max_dist,
        bin_width: width,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VariogramKind {
    Spherical,
    Exponential,
}

impl VariogramKind {
    pub fn parse(s: &str) -> Option<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "spherical" => Some(Self::Spherical),
            "exponential" => Some(Self::Exponential),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Spherical => "spherical",
            Self::Exponential => "exponential",
        }
    }

    /// Unit-sill structure function, 0 at the origin and 1 at (or
    /// asymptotically beyond) the range. The exponential form uses the
    /// practical range, reaching 95% of the sill at `range`.
    fn shape(self, h: f64, range: f64) -> f64 {
        match self {
            Self::Spherical => {
                if h >= range {
                    1.0
                } else {
                    let r = h / range;
                    1.5 * r - 0.5 * r * r * r
                }
            }
            Self::Exponential => 1.0 - (-3.0 * h / range).exp(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VariogramModel {
    pub kind: VariogramKind,
    pub nugget: f64,
    /// Total sill, nugget included.
    pub sill: f64,
    pub range_m: f64,
}

impl VariogramModel {
    pub fn new(kind: VariogramKind, nugget: f64, sill: f64, range_m: f64) -> Result<Self> {
        if !(nugget >= 0.0 && sill > nugget && range_m > 0.0 && sill.is_finite() && range_m.is_finite()) {
            return Err(Error::Invalid(format!(
                "variogram needs 0 <= nugget < sill and range > 0 (nugget {nugget}, sill {sill}, range {range_m})"
            )));
        }
        Ok(Self {
            kind,
            nugget,
            sill,
            range_m,
        })
    }

    /// γ(h); exactly zero at zero separation, jumping to the nugget just above.
    pub fn gamma(&self, h: f64) -> f64 {
        if h <= 0.0 {
            0.0
        } else {
            self.nugget + (self.sill - self.nugget) * self.kind.shape(h, self.range_m)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VariogramFit {
    pub model: VariogramModel,
    /// Set when the empirical curve is identically zero.
    pub degenerate: bool,
}

const SILL_EPS: f64 = 1e-12;

/// Pair-count-weighted least squares for `(nugget, partial sill)` at a fixed
/// range, with `nugget ≥ 0` and `partial sill ≥ ε` enforced on the boundary.
fn fit_linear(bins: &[LagBin], kind: VariogramKind, range: f64) -> (f64, f64, f64) {
    let f: Vec<f64> = bins.iter().map(|b| kind.shape(b.lag, range)).collect();
    let w: Vec<f64> = bins.iter().map(|b| b.pairs as f64).collect();
    let (mut sw, mut sf, mut sff, mut sg, mut sfg) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for ((b, &fi), &wi) in bins.iter().zip(&f).zip(&w) {
        sw += wi;
        sf += wi * fi;
        sff += wi * fi * fi;
        sg += wi * b.gamma;
        sfg += wi * fi * b.gamma;
    }
    let sse = |n: f64, p: f64| -> f64 {
        bins.iter()
            .zip(&f)
            .zip(&w)
            .map(|((b, &fi), &wi)| wi * (b.gamma - n - p * fi).powi(2))
            .sum()
    };
    let mut cands: Vec<(f64, f64)> = Vec::with_capacity(3);
    let det = sw * sff - sf * sf;
    if det.abs() > 1e-12 * (sw * sff).max(f64::MIN_POSITIVE) {
        let p = (sw * sfg - sf * sg) / det;
        let n = (sg - p * sf) / sw;
        if n >= 0.0 && p >= SILL_EPS {
            cands.push((n, p));
        }
    }
    if sff > 0.0 {
        cands.push((0.0, (sfg / sff).max(SILL_EPS)));
    }
    cands.push((((sg - SILL_EPS * sf) / sw).max(0.0), SILL_EPS));
    cands
        .into_iter()
        .map(|(n, p)| (n, p, sse(n, p)))
        .min_by(|a, b| a.2.total_cmp(&b.2))
        .expect("at least one candidate")
}

/// Weighted least-squares variogram fit: a fixed logarithmic grid over the
/// range followed by golden-section refinement around the best grid point.
pub fn fit_variogram(empirical: &EmpiricalVariogram, kind: VariogramKind) -> Result<VariogramFit> {
    let bins = &empirical.bins;
    if bins.len() < 3 {
        return Err(Error::TooFewBins(bins.len()));
    }
    if bins.iter().all(|b| b.gamma == 0.0) {
        return Ok(VariogramFit {
            model: VariogramModel {
                kind,
                nugget: 0.0,
                sill: SILL_EPS,
                range_m: empirical.max_dist,
            },
            degenerate: true,
        });
    }
    let lo = empirical.bin_width;
    let hi = match kind {
        VariogramKind::Spherical => 2.0 * empirical.max_dist,
        VariogramKind::Exponential => 3.0 * empirical.max_dist,
    }
    .max(lo * 1.0001);
    let n_grid = 40;
    let grid: Vec<f64> = (0..n_grid)
        .map(|i| lo * (hi / lo).powf(i as f64 / (n_grid - 1) as f64))
        .collect();
    let score = |r: f64| fit_linear(bins, kind, r).2;
    let best = (0..n_grid)
        .min_by(|&a, &b| score(grid[a]).total_cmp(&score(grid[b])).then(a.cmp(&b)))
        .unwrap();
    let (mut a, mut b) = (grid[best.saturating_sub(1)], grid[(best + 1).min(n_grid - 1)]);
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (score(c), score(d));
    for _ in 0..80 {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = score(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = score(d);
        }
    }
    let mut range = 0.5 * (a + b);
    if score(grid[best]) < score(range) {
        range = grid[best];
    }
    let (mut nugget, mut psill, sse) = fit_linear(bins, kind, range);
    // prefer the flat pure-nugget model when the extra structure does not
    // pay for its two parameters (Akaike criterion on weighted residuals)
    let w: f64 = bins.iter().map(|b| b.pairs as f64).sum();
    let flat = bins.iter().map(|b| b.pairs as f64 * b.gamma).sum::<f64>() / w;
    let sse_flat: f64 = bins.iter().map(|b| b.pairs as f64 * (b.gamma - flat).powi(2)).sum();
    let m = bins.len() as f64;
    let aic = |s: f64, k: f64| m * (s.max(f64::MIN_POSITIVE) / m).ln() + 2.0 * k;
    if aic(sse_flat, 1.0) <= aic(sse, 3.0) {
        nugget = flat;
        psill = SILL_EPS;
        range = lo;
    }
    Ok(VariogramFit {
        model: VariogramModel {
            kind,
            nugget,
            sill: nugget + psill,
            range_m: range,
        },
        degenerate: false,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct KrigingPrediction {
    pub value: f64,
    pub variance: f64,
    /// `(sample index, weight)` for the neighbours used.
    pub weights: Vec<(usize, f64)>,
}

/// Ordinary kriging over the `k` nearest samples, solving the
/// variogram-form system with a Lagrange multiplier.
pub fn kriging_predict(
    samples: &SampleSet,
    model: &VariogramModel,
    x: f64,
    y: f64,
    k: usize,
) -> Result<KrigingPrediction> {
    let near = samples.nearest(x, y, k.max(1));
    if let Some(&(i, d)) = near.first() {
        if d < COINCIDENT {
            return Ok(KrigingPrediction {
                value: samples.samples[i].value,
                variance: 0.0,
                weights: vec![(i, 1.0)],
            });
        }
    }
    let s = &samples.samples;
    let m = near.len();
    for a in 0..m {
        for b in a + 1..m {
            let (p, q) = (&s[near[a].0], &s[near[b].0]);
            if (p.x - q.x).hypot(p.y - q.y) < COINCIDENT {
                return Err(Error::SingularKriging(vec![near[a].0, near[b].0]));
            }
        }
    }
    let mut lhs = DMatrix::<f64>::zeros(m + 1, m + 1);
    let mut rhs = DVector::<f64>::zeros(m + 1);
    for a in 0..m {
        let p = &s[near[a].0];
        for b in 0..m {
            let q = &s[near[b].0];
            lhs[(a, b)] = model.gamma((p.x - q.x).hypot(p.y - q.y));
        }
        lhs[(a, m)] = 1.0;
        lhs[(m, a)] = 1.0;
        rhs[a] = model.gamma(near[a].1);
    }
    rhs[m] = 1.0;
    let sol = lhs
        .lu()
        .solve(&rhs)
        .filter(|v| v.iter().all(|w| w.is_finite()))
        .ok_or_else(|| Error::SingularKriging(near.iter().map(|n| n.0).collect()))?;
    let mut value = 0.0;
    let mut variance = sol[m];
    let mut weights = Vec::with_capacity(m);
    for a in 0..m {
        value += sol[a] * s[near[a].0].value;
        variance += sol[a] * rhs[a];
        weights.push((near[a].0, sol[a]));
    }
    Ok(KrigingPrediction {
        value,
        variance: variance.max(0.0),
        weights,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Method {
    Idw { power: f64, k: usize },
    Kriging { model: VariogramModel, k: usize },
}

/// Fills every cell of `template`'s geometry with the prediction at its centre.
pub fn interpolate_grid(samples: &SampleSet, method: &Method, template: &RasterGrid) -> Result<RasterGrid> {
    let (nrows, ncols) = (template.nrows, template.ncols);
    let values = (0..nrows * ncols)
        .into_par_iter()
        .map(|i| {
            let (x, y) = template.cell_center(i / ncols, i % ncols);
            match method {
                Method::Idw { power, k } => Ok(idw_predict(samples, x, y, *power, *k)),
                Method::Kriging { model, k } => kriging_predict(samples, model, x, y, *k).map(|p| p.value),
            }
        })
        .collect::<Result<Vec<f64>>>()?;
    RasterGrid::from_values(
        template.origin_x,
        template.origin_y,
        template.cell,
        nrows,
        ncols,
        values,
    )
}
