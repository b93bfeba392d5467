use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// A point on the loss-vs-dimension axis: an autoencoder latent size, or the
/// uncompressed embedding (placed at its own width).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Dimension {
    Latent(usize),
    Raw(usize),
}

impl Dimension {
    /// Position on the dimension axis.
    pub fn width(self) -> usize {
        match self {
            Dimension::Latent(d) | Dimension::Raw(d) => d,
        }
    }

    pub fn is_raw(self) -> bool {
        matches!(self, Dimension::Raw(_))
    }
}

impl Ord for Dimension {
    fn cmp(&self, other: &Self) -> Ordering {
        self.width()
            .cmp(&other.width())
            .then(self.is_raw().cmp(&other.is_raw()))
    }
}

impl PartialOrd for Dimension {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for Dimension {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Dimension::Latent(d) => write!(f, "{d}"),
            Dimension::Raw(d) => write!(f, "raw:{d}"),
        }
    }
}

impl FromStr for Dimension {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidArgument(format!("bad dimension {s:?}"));
        match s.strip_prefix("raw:") {
            Some(d) => d.parse().map(Dimension::Raw).map_err(|_| bad()),
            None => s.parse().map(Dimension::Latent).map_err(|_| bad()),
        }
    }
}

impl Serialize for Dimension {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Dimension {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        String::deserialize(d)?
            .parse()
            .map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub dimension: Dimension,
    pub mean_huber: f64,
}

/// Mean loss per dimension, sorted by dimension.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossCurve {
    pub points: Vec<CurvePoint>,
    /// Max-min normalized losses aligned with `points`.
    pub normalized: Option<Vec<f64>>,
}

impl LossCurve {
    pub fn new(mut points: Vec<CurvePoint>) -> Result<Self> {
        if points.iter().any(|p| !p.mean_huber.is_finite()) {
            return Err(Error::InvalidArgument(
                "loss curve contains non-finite values".into(),
            ));
        }
        points.sort_by_key(|p| p.dimension);
        if points.windows(2).any(|w| w[0].dimension == w[1].dimension) {
            return Err(Error::InvalidArgument(
                "duplicate dimension in loss curve".into(),
            ));
        }
        Ok(LossCurve {
            points,
            normalized: None,
        })
    }

    pub fn losses(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.mean_huber).collect()
    }

    /// Point with the lowest loss; ties go to the smaller dimension.
    pub fn argmin(&self) -> Option<CurvePoint> {
        self.points.iter().copied().min_by(|a, b| {
            a.mean_huber
                .total_cmp(&b.mean_huber)
                .then(a.dimension.cmp(&b.dimension))
        })
    }

    pub fn get(&self, dim: Dimension) -> Option<f64> {
        self.points
            .iter()
            .find(|p| p.dimension == dim)
            .map(|p| p.mean_huber)
    }
}

/// Rescales losses so the minimum maps to 0 and the maximum to 1.
pub fn normalize_curve(curve: &LossCurve) -> Result<LossCurve> {
    if curve.points.len() < 2 {
        return Err(Error::InvalidArgument(
            "normalization needs at least two points".into(),
        ));
    }
    let losses = curve.losses();
    let min = losses.iter().copied().fold(f64::INFINITY, f64::min);
    let max = losses.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == min {
        return Err(Error::ZeroVariance(
            "loss curve is constant; normalization undefined".into(),
        ));
    }
    let span = max - min;
    Ok(LossCurve {
        points: curve.points.clone(),
        normalized: Some(losses.iter().map(|l| (l - min) / span).collect()),
    })
}

/// How "within threshold of the minimum" is read.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum ThresholdRule {
    /// Max-min normalized loss at most `threshold`.
    #[default]
    Normalized,
    /// Loss at most `(1 + threshold)` times the minimum loss.
    Relative,
}

impl FromStr for ThresholdRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "normalized" => Ok(ThresholdRule::Normalized),
            "relative" => Ok(ThresholdRule::Relative),
            _ => Err(Error::InvalidArgument(format!(
                "unknown threshold rule {s:?}"
            ))),
        }
    }
}

/// Smallest dimension whose loss is within `threshold` of the curve minimum.
pub fn intrinsic_dimension(
    curve: &LossCurve,
    threshold: f64,
    rule: ThresholdRule,
) -> Result<Dimension> {
    let qualifies: Vec<bool> = match rule {
        ThresholdRule::Normalized => {
            let norm = normalize_curve(curve)?;
            norm.normalized
                .unwrap()
                .iter()
                .map(|&v| v <= threshold)
                .collect()
        }
        ThresholdRule::Relative => {
            let min = curve
                .argmin()
                .ok_or_else(|| Error::Empty("empty loss curve".into()))?
                .mean_huber;
            curve
                .points
                .iter()
                .map(|p| p.mean_huber <= (1.0 + threshold) * min)
                .collect()
        }
    };
    let i = qualifies
        .iter()
        .position(|&q| q)
        .expect("the minimum always qualifies");
    Ok(curve.points[i].dimension)
}
