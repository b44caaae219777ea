use std::fmt;

use num_rational::Ratio;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::DomainError;

/// Exact weight value. Denominators are bounded so that the ranker can scale
/// every Borda sum to a common integer denominator without overflow.
pub type Weight = Ratio<i128>;

/// Largest denominator accepted when a weight arrives as a float.
pub const MAX_WEIGHT_DENOMINATOR: i128 = 1_000_000;

const FLOAT_TOLERANCE: f64 = 1e-9;

/// Converts a float into the simplest rational within `1e-9` whose
/// denominator does not exceed [`MAX_WEIGHT_DENOMINATOR`].
pub fn weight_from_f64(value: f64) -> Result<Weight, DomainError> {
    if !value.is_finite() {
        return Err(DomainError::WeightNotRepresentable(value));
    }
    let negative = value < 0.0;
    let x = value.abs();

    // Continued-fraction convergents h/k.
    let (mut h_prev, mut h) = (0i128, 1i128);
    let (mut k_prev, mut k) = (1i128, 0i128);
    let mut rest = x;
    let mut best: Option<Weight> = None;
    for _ in 0..64 {
        let a = rest.floor();
        if a > 1e18 {
            break;
        }
        let a_int = a as i128;
        let h_next = a_int * h + h_prev;
        let k_next = a_int * k + k_prev;
        if k_next > MAX_WEIGHT_DENOMINATOR {
            break;
        }
        h_prev = h;
        h = h_next;
        k_prev = k;
        k = k_next;
        let approx = h as f64 / k as f64;
        best = Some(Ratio::new(h, k));
        if (approx - x).abs() <= FLOAT_TOLERANCE * x.max(1.0) * 1e-3 {
            break;
        }
        let frac = rest - a;
        if frac <= f64::EPSILON {
            break;
        }
        rest = 1.0 / frac;
    }
    match best {
        Some(r) if (r.to_f64().unwrap_or(f64::NAN) - x).abs() <= FLOAT_TOLERANCE => Ok(if negative { -r } else { r }),
        _ => Err(DomainError::WeightNotRepresentable(value)),
    }
}

/// The (relevance, popularity, recency) weight triple.
///
/// Components are stored exactly. A triple read from JSON is not checked on
/// parse; call [`RankingWeights::validate`] (or go through
/// [`RankingWeights::new`]) before ranking with it.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct RankingWeights {
    relevance: Weight,
    popularity: Weight,
    recency: Weight,
}

impl RankingWeights {
    pub fn new(relevance: Weight, popularity: Weight, recency: Weight) -> Result<Self, DomainError> {
        let w = Self::unchecked(relevance, popularity, recency);
        w.validate()?;
        Ok(w)
    }

    /// Builds from tenths, e.g. `from_tenths(4, 3, 3)` is (0.4, 0.3, 0.3).
    pub fn from_tenths(relevance: i128, popularity: i128, recency: i128) -> Result<Self, DomainError> {
        Self::new(Ratio::new(relevance, 10), Ratio::new(popularity, 10), Ratio::new(recency, 10))
    }

    pub fn from_f64(relevance: f64, popularity: f64, recency: f64) -> Result<Self, DomainError> {
        Self::new(weight_from_f64(relevance)?, weight_from_f64(popularity)?, weight_from_f64(recency)?)
    }

    pub(crate) fn unchecked(relevance: Weight, popularity: Weight, recency: Weight) -> Self {
        Self { relevance, popularity, recency }
    }

    pub fn relevance(&self) -> Weight {
        self.relevance
    }

    pub fn popularity(&self) -> Weight {
        self.popularity
    }

    pub fn recency(&self) -> Weight {
        self.recency
    }

    pub fn sum(&self) -> Weight {
        self.relevance + self.popularity + self.recency
    }

    /// Each component in [0, 1], denominators bounded, and an exact sum of 1.
    pub fn validate(&self) -> Result<(), DomainError> {
        for w in [self.relevance, self.popularity, self.recency] {
            if w.is_negative() || w > Weight::one() || *w.denom() > MAX_WEIGHT_DENOMINATOR {
                return Err(DomainError::InvalidWeights(self.to_string()));
            }
        }
        if self.sum() != Weight::one() {
            return Err(DomainError::InvalidWeights(self.to_string()));
        }
        Ok(())
    }

    pub fn as_f64(&self) -> (f64, f64, f64) {
        (to_f64(self.relevance), to_f64(self.popularity), to_f64(self.recency))
    }

    /// Parses `"0.4,0.3,0.3"`. Sum-to-one is enforced.
    pub fn parse_triple(text: &str) -> Result<Self, DomainError> {
        let parts: Vec<&str> = text.split(',').map(str::trim).collect();
        if parts.len() != 3 {
            return Err(DomainError::InvalidWeights(text.to_string()));
        }
        let mut values = [Weight::zero(); 3];
        for (slot, part) in values.iter_mut().zip(&parts) {
            let f: f64 = part.parse().map_err(|_| DomainError::InvalidWeights(text.to_string()))?;
            *slot = weight_from_f64(f)?;
        }
        Self::new(values[0], values[1], values[2])
    }
}

fn to_f64(w: Weight) -> f64 {
    w.to_f64().unwrap_or(f64::NAN)
}

impl fmt::Debug for RankingWeights {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "RankingWeights({})", self)
    }
}

impl fmt::Display for RankingWeights {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let (r, p, c) = self.as_f64();
        write!(f, "{r},{p},{c}")
    }
}

#[derive(Serialize, Deserialize)]
struct WeightsWire {
    w_relevance: f64,
    w_popularity: f64,
    w_recency: f64,
}

impl Serialize for RankingWeights {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let (w_relevance, w_popularity, w_recency) = self.as_f64();
        WeightsWire { w_relevance, w_popularity, w_recency }.serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for RankingWeights {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let wire = WeightsWire::deserialize(deserializer)?;
        let conv = |v| weight_from_f64(v).map_err(serde::de::Error::custom);
        Ok(Self::unchecked(conv(wire.w_relevance)?, conv(wire.w_popularity)?, conv(wire.w_recency)?))
    }
}

/// Preset name or explicit weights.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RankingStyle {
    Focused,
    Fresh,
    #[default]
    Balanced,
    Trending,
    Custom(RankingWeights),
}

impl RankingStyle {
    /// Accepts a preset name or a `w_r,w_p,w_c` triple.
    pub fn parse(text: &str) -> Result<Self, DomainError> {
        match text.trim().to_ascii_lowercase().as_str() {
            "focused" => Ok(RankingStyle::Focused),
            "fresh" => Ok(RankingStyle::Fresh),
            "balanced" => Ok(RankingStyle::Balanced),
            "trending" => Ok(RankingStyle::Trending),
            _ => RankingWeights::parse_triple(text).map(RankingStyle::Custom),
        }
    }
}

/// Operator-tunable preset table.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PresetWeights {
    pub focused: RankingWeights,
    pub fresh: RankingWeights,
    pub balanced: RankingWeights,
    pub trending: RankingWeights,
}

impl Default for PresetWeights {
    fn default() -> Self {
        let t = |r, p, c| RankingWeights::from_tenths(r, p, c).expect("preset sums to one");
        Self { focused: t(7, 1, 2), fresh: t(2, 1, 7), balanced: t(4, 3, 3), trending: t(2, 7, 1) }
    }
}

impl PresetWeights {
    pub fn validate(&self) -> Result<(), DomainError> {
        for w in [&self.focused, &self.fresh, &self.balanced, &self.trending] {
            w.validate()?;
        }
        Ok(())
    }
}

/// Resolves a style to its weight triple; custom weights must sum to one.
pub fn weights_for_style(style: &RankingStyle, presets: &PresetWeights) -> Result<RankingWeights, DomainError> {
    let weights = match style {
        RankingStyle::Focused => presets.focused.clone(),
        RankingStyle::Fresh => presets.fresh.clone(),
        RankingStyle::Balanced => presets.balanced.clone(),
        RankingStyle::Trending => presets.trending.clone(),
        RankingStyle::Custom(w) => w.clone(),
    };
    weights.validate()?;
    Ok(weights)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn r(n: i128, d: i128) -> Weight {
        Ratio::new(n, d)
    }

    #[test]
    fn float_conversion_recovers_simple_fractions() {
        assert_eq!(weight_from_f64(0.4).unwrap(), r(2, 5));
        assert_eq!(weight_from_f64(0.1).unwrap(), r(1, 10));
        assert_eq!(weight_from_f64(1.0 / 3.0).unwrap(), r(1, 3));
        assert_eq!(weight_from_f64(0.0).unwrap(), r(0, 1));
        assert_eq!(weight_from_f64(1.0).unwrap(), r(1, 1));
        assert_eq!(weight_from_f64(0.123456).unwrap(), r(123456, 1_000_000).reduced());
        assert!(weight_from_f64(f64::NAN).is_err());
    }

    #[test]
    fn presets_match_defaults() {
        let p = PresetWeights::default();
        let f = |s| weights_for_style(&s, &p).unwrap().as_f64();
        assert_eq!(f(RankingStyle::Focused), (0.7, 0.1, 0.2));
        assert_eq!(f(RankingStyle::Balanced), (0.4, 0.3, 0.3));
        assert_eq!(f(RankingStyle::Fresh), (0.2, 0.1, 0.7));
        assert_eq!(f(RankingStyle::Trending), (0.2, 0.7, 0.1));
    }

    #[test]
    fn custom_passes_through_or_errors() {
        let p = PresetWeights::default();
        let one = RankingWeights::from_tenths(10, 0, 0).unwrap();
        assert_eq!(weights_for_style(&RankingStyle::Custom(one.clone()), &p).unwrap(), one);

        let bad = RankingWeights::unchecked(r(3, 10), r(3, 10), r(3, 10));
        assert!(matches!(weights_for_style(&RankingStyle::Custom(bad), &p), Err(DomainError::InvalidWeights(_))));
    }

    #[test]
    fn thirds_sum_exactly() {
        let w = RankingWeights::from_f64(1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0).unwrap();
        assert_eq!(w.sum(), Weight::one());
    }

    #[test]
    fn parse_triple_and_style() {
        assert_eq!(RankingStyle::parse("Balanced").unwrap(), RankingStyle::Balanced);
        let custom = RankingStyle::parse("1,0,0").unwrap();
        assert_eq!(custom, RankingStyle::Custom(RankingWeights::from_tenths(10, 0, 0).unwrap()));
        assert!(RankingStyle::parse("0.3,0.3,0.3").is_err());
        assert!(RankingStyle::parse("0.5,0.5").is_err());
        assert!(RankingStyle::parse("sideways").is_err());
    }

    #[test]
    fn negative_component_rejected() {
        assert!(RankingWeights::new(r(6, 5), r(-1, 5), r(0, 1)).is_err());
    }

    #[test]
    fn json_shape() {
        let style = RankingStyle::Custom(RankingWeights::from_tenths(5, 2, 3).unwrap());
        let json = serde_json::to_value(&style).unwrap();
        assert_eq!(json, serde_json::json!({"custom": {"w_relevance": 0.5, "w_popularity": 0.2, "w_recency": 0.3}}));
        assert_eq!(serde_json::to_value(RankingStyle::Focused).unwrap(), serde_json::json!("focused"));
        let back: RankingStyle = serde_json::from_value(json).unwrap();
        assert_eq!(back, style);
    }
}
