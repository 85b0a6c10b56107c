//! Quantities with mandatory unit suffixes.
//!
//! Config values are strings such as `"6 MHz"`, `"10 us"` or `"0.12 m"`.
//! A bare number is rejected because the unit cannot be guessed. Each
//! quantity keeps its original text so a config serializes back unchanged.

use std::fmt;
use std::marker::PhantomData;
use std::str::FromStr;

use serde::de::{self, Visitor};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// Physical dimension of a [`Quantity`], with its accepted units.
pub trait Dimension {
    /// Name used in error messages.
    const NAME: &'static str;
    /// `(suffix, SI factor)` pairs.
    const UNITS: &'static [(&'static str, f64)];
}

const TWO_PI: f64 = 2.0 * std::f64::consts::PI;

/// Angular frequency or Rabi frequency, stored in rad/s. Cyclic units are
/// multiplied by 2π: `"6 MHz"` is `2π·6e6 rad/s`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Angular;

impl Dimension for Angular {
    const NAME: &'static str = "angular frequency";
    const UNITS: &'static [(&'static str, f64)] = &[
        ("rad_s", 1.0),
        ("Hz", TWO_PI),
        ("kHz", TWO_PI * 1e3),
        ("MHz", TWO_PI * 1e6),
        ("GHz", TWO_PI * 1e9),
    ];
}

/// Cyclic frequency, stored in Hz. `rad_s` is divided by 2π.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Cyclic;

impl Dimension for Cyclic {
    const NAME: &'static str = "frequency";
    const UNITS: &'static [(&'static str, f64)] =
        &[("Hz", 1.0), ("kHz", 1e3), ("MHz", 1e6), ("GHz", 1e9), ("rad_s", 1.0 / TWO_PI)];
}

/// Exponential decay rate, stored in 1/s. Hz is not accepted since it
/// would be unclear whether a factor 2π is meant.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Decay;

impl Dimension for Decay {
    const NAME: &'static str = "decay rate";
    const UNITS: &'static [(&'static str, f64)] =
        &[("per_s", 1.0), ("per_ms", 1e3), ("per_us", 1e6), ("rad_s", 1.0)];
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Time;

impl Dimension for Time {
    const NAME: &'static str = "time";
    const UNITS: &'static [(&'static str, f64)] =
        &[("s", 1.0), ("ms", 1e-3), ("us", 1e-6), ("ns", 1e-9), ("ps", 1e-12)];
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Length;

impl Dimension for Length {
    const NAME: &'static str = "length";
    const UNITS: &'static [(&'static str, f64)] = &[("m", 1.0), ("cm", 1e-2), ("mm", 1e-3)];
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum UnitError {
    #[error("bare number {0} is ambiguous; write it with a {1} unit ({2})")]
    BareNumber(String, &'static str, String),
    #[error("cannot read {1} from {0:?}; expected `<number> <unit>` with unit one of {2}")]
    Malformed(String, &'static str, String),
    #[error("unknown {1} unit {0:?}; expected one of {2}")]
    UnknownUnit(String, &'static str, String),
}

/// A value in SI units together with the text it was written as.
pub struct Quantity<D> {
    si: f64,
    text: String,
    _dim: PhantomData<D>,
}

pub type Rate = Quantity<Angular>;
pub type Frequency = Quantity<Cyclic>;
pub type DecayRate = Quantity<Decay>;
pub type Duration = Quantity<Time>;
pub type Distance = Quantity<Length>;

fn unit_list<D: Dimension>() -> String {
    D::UNITS.iter().map(|(u, _)| *u).collect::<Vec<_>>().join(", ")
}

impl<D: Dimension> Quantity<D> {
    pub fn si(&self) -> f64 {
        self.si
    }

    pub fn text(&self) -> &str {
        &self.text
    }

    /// Quantity with a canonical spelling in the first listed unit.
    pub fn from_si(si: f64) -> Self {
        let (unit, factor) = D::UNITS[0];
        Self { si, text: format!("{} {unit}", si / factor), _dim: PhantomData }
    }

    /// Copy with the value multiplied by `factor`, spelled in the original
    /// unit.
    pub fn scaled(&self, factor: f64) -> Self {
        let unit = self.text.split_whitespace().last().unwrap_or(D::UNITS[0].0);
        let unit_factor = D::UNITS.iter().find(|(u, _)| *u == unit).map_or(1.0, |(_, f)| *f);
        let si = self.si * factor;
        Self { si, text: format!("{} {unit}", si / unit_factor), _dim: PhantomData }
    }
}

impl<D: Dimension> FromStr for Quantity<D> {
    type Err = UnitError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let trimmed = s.trim();
        if trimmed.parse::<f64>().is_ok() {
            return Err(UnitError::BareNumber(trimmed.to_string(), D::NAME, unit_list::<D>()));
        }
        let mut parts = trimmed.split_whitespace();
        let (Some(number), Some(unit), None) = (parts.next(), parts.next(), parts.next()) else {
            return Err(UnitError::Malformed(trimmed.to_string(), D::NAME, unit_list::<D>()));
        };
        let value: f64 = number
            .parse()
            .ok()
            .filter(|v: &f64| v.is_finite())
            .ok_or_else(|| UnitError::Malformed(trimmed.to_string(), D::NAME, unit_list::<D>()))?;
        let factor = D::UNITS
            .iter()
            .find(|(u, _)| *u == unit)
            .map(|(_, f)| *f)
            .ok_or_else(|| UnitError::UnknownUnit(unit.to_string(), D::NAME, unit_list::<D>()))?;
        Ok(Self { si: value * factor, text: format!("{number} {unit}"), _dim: PhantomData })
    }
}

impl<D> Clone for Quantity<D> {
    fn clone(&self) -> Self {
        Self { si: self.si, text: self.text.clone(), _dim: PhantomData }
    }
}

impl<D> PartialEq for Quantity<D> {
    fn eq(&self, other: &Self) -> bool {
        self.text == other.text
    }
}

impl<D> fmt::Debug for Quantity<D> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", self.text)
    }
}

impl<D> fmt::Display for Quantity<D> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.text)
    }
}

impl<D> Serialize for Quantity<D> {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.text)
    }
}

struct QuantityVisitor<D>(PhantomData<D>);

impl<D: Dimension> Visitor<'_> for QuantityVisitor<D> {
    type Value = Quantity<D>;

    fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "a {} with a unit, e.g. \"1 {}\"", D::NAME, D::UNITS[0].0)
    }

    fn visit_str<E: de::Error>(self, v: &str) -> Result<Self::Value, E> {
        v.parse().map_err(E::custom)
    }

    fn visit_f64<E: de::Error>(self, v: f64) -> Result<Self::Value, E> {
        Err(E::custom(UnitError::BareNumber(v.to_string(), D::NAME, unit_list::<D>())))
    }

    fn visit_i64<E: de::Error>(self, v: i64) -> Result<Self::Value, E> {
        Err(E::custom(UnitError::BareNumber(v.to_string(), D::NAME, unit_list::<D>())))
    }

    fn visit_u64<E: de::Error>(self, v: u64) -> Result<Self::Value, E> {
        Err(E::custom(UnitError::BareNumber(v.to_string(), D::NAME, unit_list::<D>())))
    }
}

impl<'de, D: Dimension> Deserialize<'de> for Quantity<D> {
    fn deserialize<De: Deserializer<'de>>(deserializer: De) -> Result<Self, De::Error> {
        deserializer.deserialize_any(QuantityVisitor(PhantomData))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn cyclic_units_gain_two_pi_for_angular_quantities() {
        let r: Rate = "6 MHz".parse().unwrap();
        assert_relative_eq!(r.si(), TWO_PI * 6e6);
        let r: Rate = "2.5e7 rad_s".parse().unwrap();
        assert_eq!(r.si(), 2.5e7);
        let f: Frequency = "1 MHz".parse().unwrap();
        assert_eq!(f.si(), 1e6);
    }

    #[test]
    fn times_and_lengths() {
        let t: Duration = "10 us".parse().unwrap();
        assert_relative_eq!(t.si(), 1e-5);
        let t: Duration = "0.390625 ns".parse().unwrap();
        assert_relative_eq!(t.si(), 3.90625e-10);
        let l: Distance = "12 cm".parse().unwrap();
        assert_relative_eq!(l.si(), 0.12);
    }

    #[test]
    fn bare_numbers_and_unknown_units_are_rejected() {
        assert!(matches!("6".parse::<Rate>(), Err(UnitError::BareNumber(..))));
        assert!(matches!("6 furlongs".parse::<Duration>(), Err(UnitError::UnknownUnit(..))));
        assert!(matches!("6MHz".parse::<Rate>(), Err(UnitError::Malformed(..))));
        assert!(matches!("20 kHz".parse::<DecayRate>(), Err(UnitError::UnknownUnit(..))));
        assert!("nan Hz".parse::<Rate>().is_err());
    }

    #[test]
    fn scaling_keeps_the_unit() {
        let t: Duration = "10 us".parse().unwrap();
        assert_eq!(t.scaled(0.5).text(), "5 us");
        assert_relative_eq!(t.scaled(0.5).si(), 5e-6);
    }

    #[test]
    fn serde_rejects_bare_toml_numbers() {
        #[derive(Deserialize)]
        struct S {
            #[allow(dead_code)]
            gamma: Rate,
        }
        let err = toml::from_str::<S>("gamma = 6.0").err().unwrap().to_string();
        assert!(err.contains("ambiguous"), "{err}");
        assert!(toml::from_str::<S>("gamma = \"6 MHz\"").is_ok());
    }
}
