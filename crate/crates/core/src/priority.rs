//! Greening priority: the equal-weight mean of the six indicators, plus
//! objective weighting schemes (entropy, coefficient of variation, CRITIC)
//! for side-by-side comparison.

use std::cmp::Ordering;

use crate::error::{Error, Result};
use crate::indicators::IndicatorVector;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Scheme {
    Equal,
    Entropy,
    Cv,
    Critic,
}

impl Scheme {
    pub const ALL: [Scheme; 4] = [Scheme::Equal, Scheme::Entropy, Scheme::Cv, Scheme::Critic];

    pub fn parse(s: &str) -> Option<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "equal" => Some(Scheme::Equal),
            "entropy" => Some(Scheme::Entropy),
            "cv" => Some(Scheme::Cv),
            "critic" => Some(Scheme::Critic),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Scheme::Equal => "equal",
            Scheme::Entropy => "entropy",
            Scheme::Cv => "cv",
            Scheme::Critic => "critic",
        }
    }
}

/// Non-negative weights over the six indicators summing to one, in the
/// order g, d, c, i, t, p.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeightVector(pub [f64; 6]);

impl WeightVector {
    pub const EQUAL: WeightVector = WeightVector([1.0 / 6.0; 6]);

    pub fn from_slice(w: &[f64]) -> Result<Self> {
        let arr: [f64; 6] = w
            .try_into()
            .map_err(|_| Error::Invalid(format!("expected 6 weights, got {}", w.len())))?;
        if arr.iter().any(|&x| !(x >= 0.0)) || (arr.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(Error::Invalid(format!(
                "weights must be non-negative and sum to 1: {arr:?}"
            )));
        }
        Ok(Self(arr))
    }
}

/// Arithmetic mean of the six indicators.
pub fn equal_weight_priority(v: &IndicatorVector) -> f64 {
    let a = v.to_array();
    (a[0] + a[1] + a[2] + a[3] + a[4] + a[5]) / 6.0
}

pub fn weighted_priority(v: &IndicatorVector, w: &WeightVector) -> f64 {
    v.to_array().iter().zip(w.0).map(|(x, w)| x * w).sum()
}

fn columns(matrix: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    if matrix.len() < 2 {
        return Err(Error::TooFewSamples {
            needed: 2,
            got: matrix.len(),
        });
    }
    let m = matrix[0].len();
    if m == 0 || matrix.iter().any(|r| r.len() != m) {
        return Err(Error::Invalid(
            "weighting matrix must be rectangular with at least one column".into(),
        ));
    }
    if matrix.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::Invalid("weighting matrix contains non-finite values".into()));
    }
    Ok((0..m).map(|j| matrix.iter().map(|r| r[j]).collect()).collect())
}

fn is_constant(col: &[f64]) -> bool {
    col.iter().all(|&v| v == col[0])
}

fn mean(col: &[f64]) -> f64 {
    col.iter().sum::<f64>() / col.len() as f64
}

/// Population standard deviation.
fn std_dev(col: &[f64]) -> f64 {
    if is_constant(col) {
        return 0.0;
    }
    let m = mean(col);
    (col.iter().map(|v| (v - m).powi(2)).sum::<f64>() / col.len() as f64).sqrt()
}

fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let (ma, mb) = (mean(a), mean(b));
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma).powi(2);
        sbb += (y - mb).powi(2);
    }
    if saa == 0.0 || sbb == 0.0 {
        0.0
    } else {
        let r = (sab / (saa * sbb).sqrt()).clamp(-1.0, 1.0);
        // rounding leaves perfectly correlated columns a hair short of ±1
        if 1.0 - r.abs() < 1e-12 {
            r.signum()
        } else {
            r
        }
    }
}

fn normalize_or_equal(raw: Vec<f64>) -> Vec<f64> {
    let total: f64 = raw.iter().sum();
    if total > 0.0 && total.is_finite() {
        raw.iter().map(|v| v / total).collect()
    } else {
        vec![1.0 / raw.len() as f64; raw.len()]
    }
}

const ENTROPY_FLOOR: f64 = 1e-9;

/// Entropy weighting on non-negative columns. Values get a small floor so
/// that exact zeros stay inside the logarithm's domain; constant columns
/// carry no information and receive weight 0.
pub fn entropy_weights(matrix: &[Vec<f64>]) -> Result<Vec<f64>> {
    let cols = columns(matrix)?;
    if cols.iter().flatten().any(|&v| v < 0.0) {
        return Err(Error::Invalid("entropy weighting needs non-negative values".into()));
    }
    let n = matrix.len() as f64;
    let divergence = cols
        .iter()
        .map(|col| {
            if is_constant(col) {
                return 0.0;
            }
            let total: f64 = col.iter().map(|v| v + ENTROPY_FLOOR).sum();
            let e = -col
                .iter()
                .map(|v| {
                    let p = (v + ENTROPY_FLOOR) / total;
                    p * p.ln()
                })
                .sum::<f64>()
                / n.ln();
            (1.0 - e).max(0.0)
        })
        .collect();
    Ok(normalize_or_equal(divergence))
}

#[derive(Debug, Clone, PartialEq)]
pub struct CvWeights {
    pub weights: Vec<f64>,
    /// Columns with zero mean, weighted by standard deviation alone.
    pub zero_mean_columns: Vec<usize>,
}

/// Weights proportional to each column's coefficient of variation.
pub fn cv_weights(matrix: &[Vec<f64>]) -> Result<CvWeights> {
    let cols = columns(matrix)?;
    let mut flagged = Vec::new();
    let raw = cols
        .iter()
        .enumerate()
        .map(|(j, col)| {
            let (m, s) = (mean(col), std_dev(col));
            if m == 0.0 {
                flagged.push(j);
                s
            } else {
                s / m.abs()
            }
        })
        .collect();
    Ok(CvWeights {
        weights: normalize_or_equal(raw),
        zero_mean_columns: flagged,
    })
}

/// CRITIC: contrast (standard deviation) times conflict `Σ (1 − r)` with
/// the other columns.
pub fn critic_weights(matrix: &[Vec<f64>]) -> Result<Vec<f64>> {
    let cols = columns(matrix)?;
    let raw = cols
        .iter()
        .map(|a| {
            let conflict: f64 = cols.iter().map(|b| 1.0 - pearson(a, b)).sum();
            std_dev(a) * conflict
        })
        .collect();
    Ok(normalize_or_equal(raw))
}

/// Weights for the given scheme over the indicator matrix of the potential
/// buildings.
pub fn scheme_weights(scheme: Scheme, indicators: &[IndicatorVector]) -> Result<WeightVector> {
    if scheme == Scheme::Equal {
        return Ok(WeightVector::EQUAL);
    }
    let matrix: Vec<Vec<f64>> = indicators.iter().map(|v| v.to_array().to_vec()).collect();
    let w = match scheme {
        Scheme::Equal => unreachable!(),
        Scheme::Entropy => entropy_weights(&matrix)?,
        Scheme::Cv => cv_weights(&matrix)?.weights,
        Scheme::Critic => critic_weights(&matrix)?,
    };
    WeightVector::from_slice(&w)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PriorityScore {
    pub building_id: String,
    pub p: f64,
    /// 1-based.
    pub rank: usize,
    pub percentile: f64,
}

/// Descending by priority, ties broken by id.
pub fn rank_buildings(scores: &[(String, f64)]) -> Vec<PriorityScore> {
    let mut order: Vec<&(String, f64)> = scores.iter().collect();
    order.sort_by(|a, b| {
        b.1.partial_cmp(&a.1)
            .unwrap_or(Ordering::Equal)
            .then_with(|| a.0.cmp(&b.0))
    });
    let n = order.len();
    order
        .into_iter()
        .enumerate()
        .map(|(i, (id, p))| PriorityScore {
            building_id: id.clone(),
            p: *p,
            rank: i + 1,
            percentile: if n == 1 {
                100.0
            } else {
                100.0 * (n - 1 - i) as f64 / (n - 1) as f64
            },
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PriorityDistribution {
    pub count: usize,
    pub share_above_half: f64,
    pub mean: f64,
    pub max: f64,
    pub min: f64,
}

pub fn priority_distribution(p: &[f64]) -> Option<PriorityDistribution> {
    if p.is_empty() {
        return None;
    }
    let n = p.len() as f64;
    Some(PriorityDistribution {
        count: p.len(),
        share_above_half: p.iter().filter(|&&v| v > 0.5).count() as f64 / n,
        mean: p.iter().sum::<f64>() / n,
        max: p.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        min: p.iter().copied().fold(f64::INFINITY, f64::min),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn iv(a: [f64; 6]) -> IndicatorVector {
        IndicatorVector::from_array(a)
    }

    fn assert_close(a: &[f64], b: &[f64], tol: f64) {
        assert_eq!(a.len(), b.len());
        for (x, y) in a.iter().zip(b) {
            assert!((x - y).abs() <= tol, "{a:?} vs {b:?}");
        }
    }

    #[test]
    fn equal_weight_examples() {
        assert_eq!(equal_weight_priority(&iv([1.0; 6])), 1.0);
        assert_eq!(equal_weight_priority(&iv([0.0; 6])), 0.0);
        let p = equal_weight_priority(&iv([0.9, 0.8, 0.5, 0.6, 0.7, 0.9]));
        assert!((p - 0.733333).abs() < 1e-6);
    }

    #[test]
    fn entropy_symmetric_and_single_informative_column() {
        let same: Vec<Vec<f64>> = (0..5).map(|i| vec![0.1 * i as f64 + 0.05; 6]).collect();
        assert_close(&entropy_weights(&same).unwrap(), &[1.0 / 6.0; 6], 1e-12);

        let alt: Vec<Vec<f64>> = (0..8).map(|i| vec![0.3, (i % 2) as f64, 0.5, 0.5, 0.0, 1.0]).collect();
        assert_close(&entropy_weights(&alt).unwrap(), &[0.0, 1.0, 0.0, 0.0, 0.0, 0.0], 1e-12);

        let flat = vec![vec![0.2; 6]; 4];
        assert_close(&entropy_weights(&flat).unwrap(), &[1.0 / 6.0; 6], 1e-12);
    }

    #[test]
    fn cv_examples() {
        let same: Vec<Vec<f64>> = (0..5).map(|i| vec![0.1 * i as f64 + 0.05; 6]).collect();
        assert_close(&cv_weights(&same).unwrap().weights, &[1.0 / 6.0; 6], 1e-12);

        let m: Vec<Vec<f64>> = (0..6)
            .map(|i| {
                vec![
                    0.1 * i as f64,
                    0.5,
                    0.2 + 0.1 * i as f64,
                    0.9 - 0.1 * i as f64,
                    0.4,
                    0.6,
                ]
            })
            .collect();
        let w = cv_weights(&m).unwrap().weights;
        assert_eq!(w[1], 0.0);
        assert_eq!(w[4], 0.0);

        let zero_mean = vec![vec![-1.0, 1.0], vec![1.0, 2.0]];
        assert_eq!(cv_weights(&zero_mean).unwrap().zero_mean_columns, vec![0]);
    }

    #[test]
    fn critic_examples() {
        let m: Vec<Vec<f64>> = (0..6)
            .map(|i| {
                let v = (i * i % 5) as f64 / 4.0;
                vec![v, v, 0.5, 0.5, 0.1, 0.9]
            })
            .collect();
        assert_close(&critic_weights(&m).unwrap(), &[0.5, 0.5, 0.0, 0.0, 0.0, 0.0], 1e-12);

        // columns of a Sylvester-Hadamard matrix are mutually orthogonal and
        // balanced, so after (h + 1) / 2 they are uncorrelated with equal std
        let h = hadamard8();
        let m: Vec<Vec<f64>> = h
            .iter()
            .map(|row| row[1..7].iter().map(|&v| (v + 1.0) / 2.0).collect())
            .collect();
        assert_close(&critic_weights(&m).unwrap(), &[1.0 / 6.0; 6], 1e-12);
    }

    pub(crate) fn hadamard8() -> Vec<Vec<f64>> {
        let mut h = vec![vec![1.0]];
        for _ in 0..3 {
            let n = h.len();
            let mut next = vec![vec![0.0; 2 * n]; 2 * n];
            for i in 0..n {
                for j in 0..n {
                    next[i][j] = h[i][j];
                    next[i][j + n] = h[i][j];
                    next[i + n][j] = h[i][j];
                    next[i + n][j + n] = -h[i][j];
                }
            }
            h = next;
        }
        h
    }

    #[test]
    fn rank_examples() {
        let r = rank_buildings(&[("x".into(), 0.9), ("y".into(), 0.5), ("z".into(), 0.7)]);
        let ids: Vec<_> = r.iter().map(|s| (s.building_id.as_str(), s.rank)).collect();
        assert_eq!(ids, vec![("x", 1), ("z", 2), ("y", 3)]);
        assert_eq!(r[0].percentile, 100.0);
        assert_eq!(r[2].percentile, 0.0);

        let r = rank_buildings(&[("b".into(), 0.5), ("a".into(), 0.5)]);
        assert_eq!(r[0].building_id, "a");

        let r = rank_buildings(&[("only".into(), 0.3)]);
        assert_eq!((r[0].rank, r[0].percentile), (1, 100.0));
    }

    #[test]
    fn scheme_names_round_trip() {
        for s in Scheme::ALL {
            assert_eq!(Scheme::parse(s.as_str()), Some(s));
        }
        assert_eq!(Scheme::parse("ahp"), None);
    }

    fn arb_matrix() -> impl Strategy<Value = Vec<Vec<f64>>> {
        (2usize..30).prop_flat_map(|n| proptest::collection::vec(proptest::collection::vec(0.0f64..1.0, 6), n))
    }

    proptest! {
        #[test]
        fn weights_are_a_distribution(m in arb_matrix()) {
            let ws = [
                entropy_weights(&m).unwrap(),
                cv_weights(&m).unwrap().weights,
                critic_weights(&m).unwrap(),
            ];
            for w in ws {
                prop_assert!(w.iter().all(|&x| x >= 0.0));
                prop_assert!((w.iter().sum::<f64>() - 1.0).abs() <= 1e-9);
            }
        }

        #[test]
        fn uniform_scaling_keeps_argmax(m in arb_matrix(), k in 0.1f64..10.0) {
            let scaled: Vec<Vec<f64>> = m.iter().map(|r| r.iter().map(|v| v * k).collect()).collect();
            let argmax = |w: &[f64]| w.iter().enumerate().fold((0, f64::NEG_INFINITY), |acc, (i, &v)| if v > acc.1 { (i, v) } else { acc });
            let (a, wa) = argmax(&cv_weights(&m).unwrap().weights);
            let (b, _) = argmax(&cv_weights(&scaled).unwrap().weights);
            let second = cv_weights(&m).unwrap().weights.iter().enumerate().filter(|(i, _)| *i != a).map(|(_, &v)| v).fold(0.0, f64::max);
            if wa - second > 1e-9 {
                prop_assert_eq!(a, b);
            }
            let (a, wa) = argmax(&critic_weights(&m).unwrap());
            let (b, _) = argmax(&critic_weights(&scaled).unwrap());
            let second = critic_weights(&m).unwrap().iter().enumerate().filter(|(i, _)| *i != a).map(|(_, &v)| v).fold(0.0, f64::max);
            if wa - second > 1e-9 {
                prop_assert_eq!(a, b);
            }
        }

        #[test]
        fn equal_weight_is_permutation_invariant_and_monotone(v in proptest::array::uniform6(0.0f64..1.0), k in 0usize..6, bump in 0.0f64..1.0, rot in 1usize..6) {
            let p = equal_weight_priority(&iv(v));
            let mut r = v;
            r.rotate_left(rot);
            prop_assert!((equal_weight_priority(&iv(r)) - p).abs() <= 1e-15);
            let mut up = v;
            up[k] = (up[k] + bump).min(1.0);
            prop_assert!(equal_weight_priority(&iv(up)) >= p);
            prop_assert!((0.0..=1.0).contains(&p));
        }
    }
}
