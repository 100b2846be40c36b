use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Number of candidate features drawn at each node.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MaxFeatures {
    Sqrt,
    Log2,
    All,
    Count(usize),
    Fraction(f64),
}

impl MaxFeatures {
    /// Candidate count for `p` available features, always in `1..=p`.
    pub fn resolve(self, p: usize) -> usize {
        let m = match self {
            MaxFeatures::Sqrt => (p as f64).sqrt().floor() as usize,
            MaxFeatures::Log2 => (p as f64).log2().floor() as usize,
            MaxFeatures::All => p,
            MaxFeatures::Count(k) => k,
            MaxFeatures::Fraction(f) => (f * p as f64).floor() as usize,
        };
        m.clamp(1, p.max(1))
    }

    pub fn validate(self) -> Result<()> {
        match self {
            MaxFeatures::Count(0) => Err(Error::InvalidParam("max_features count must be >= 1".into())),
            MaxFeatures::Fraction(f) if !(f > 0.0 && f <= 1.0) => {
                Err(Error::InvalidParam(format!("max_features fraction {f} not in (0, 1]")))
            }
            _ => Ok(()),
        }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum MaxFeaturesRepr {
    Name(String),
    Count(usize),
    Fraction(f64),
}

impl Serialize for MaxFeatures {
    fn serialize<Z: Serializer>(&self, s: Z) -> Result<Z::Ok, Z::Error> {
        let repr = match *self {
            MaxFeatures::Sqrt => MaxFeaturesRepr::Name("sqrt".into()),
            MaxFeatures::Log2 => MaxFeaturesRepr::Name("log2".into()),
            MaxFeatures::All => MaxFeaturesRepr::Name("all".into()),
            MaxFeatures::Count(k) => MaxFeaturesRepr::Count(k),
            MaxFeatures::Fraction(f) => MaxFeaturesRepr::Fraction(f),
        };
        repr.serialize(s)
    }
}

impl<'de> Deserialize<'de> for MaxFeatures {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        use serde::de::Error as _;
        let mf = match MaxFeaturesRepr::deserialize(d)? {
            MaxFeaturesRepr::Name(n) => match n.as_str() {
                "sqrt" => MaxFeatures::Sqrt,
                "log2" => MaxFeatures::Log2,
                "all" => MaxFeatures::All,
                other => return Err(D::Error::custom(format!("unknown max_features `{other}`"))),
            },
            MaxFeaturesRepr::Count(k) => MaxFeatures::Count(k),
            MaxFeaturesRepr::Fraction(f) => MaxFeatures::Fraction(f),
        };
        mf.validate().map_err(D::Error::custom)?;
        Ok(mf)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TreeParams {
    /// `None` grows until the other stopping rules fire.
    pub max_depth: Option<usize>,
    pub min_samples_split: usize,
    pub min_samples_leaf: usize,
    pub max_features: MaxFeatures,
}

impl Default for TreeParams {
    fn default() -> Self {
        Self {
            max_depth: None,
            min_samples_split: 6,
            min_samples_leaf: 3,
            max_features: MaxFeatures::Sqrt,
        }
    }
}

impl TreeParams {
    pub fn validate(&self) -> Result<()> {
        if self.min_samples_leaf < 1 {
            return Err(Error::InvalidParam("min_samples_leaf must be >= 1".into()));
        }
        if self.min_samples_split < 2 {
            return Err(Error::InvalidParam("min_samples_split must be >= 2".into()));
        }
        if self.max_depth == Some(0) {
            return Err(Error::InvalidParam("max_depth must be positive".into()));
        }
        self.max_features.validate()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults() {
        let p = TreeParams::default();
        assert_eq!(p.max_depth, None);
        assert_eq!(p.min_samples_split, 6);
        assert_eq!(p.min_samples_leaf, 3);
        assert_eq!(p.max_features, MaxFeatures::Sqrt);
    }

    #[test]
    fn resolve_counts() {
        assert_eq!(MaxFeatures::Sqrt.resolve(12), 3);
        assert_eq!(MaxFeatures::Log2.resolve(12), 3);
        assert_eq!(MaxFeatures::Sqrt.resolve(1), 1);
        assert_eq!(MaxFeatures::Count(50).resolve(4), 4);
        assert_eq!(MaxFeatures::Fraction(0.01).resolve(4), 1);
        assert_eq!(MaxFeatures::All.resolve(7), 7);
    }

    #[test]
    fn serde_forms() {
        let v: Vec<MaxFeatures> = serde_json::from_str(r#"["sqrt","log2","all",3,0.5]"#).unwrap();
        assert_eq!(
            v,
            vec![
                MaxFeatures::Sqrt,
                MaxFeatures::Log2,
                MaxFeatures::All,
                MaxFeatures::Count(3),
                MaxFeatures::Fraction(0.5)
            ]
        );
        assert!(serde_json::from_str::<MaxFeatures>(r#""cube""#).is_err());
        assert!(serde_json::from_str::<MaxFeatures>("1.5").is_err());
        assert!(TreeParams { min_samples_leaf: 0, ..Default::default() }.validate().is_err());
    }
}
