use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Spatial beam identifier.
///
/// Beams 1 through 4 are the principal beams of the apparatus. `Loss` beams
/// absorb light removed by polarizers and lossy detectors, `Ancilla` beams are
/// auxiliary ports (the reflected output of a polarizing beam splitter, the
/// stages of a detector cascade).
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Beam {
    One,
    Two,
    Three,
    Four,
    Loss(u8),
    Ancilla(u8),
}

impl Beam {
    pub const PRINCIPAL: [Beam; 4] = [Beam::One, Beam::Two, Beam::Three, Beam::Four];

    pub fn h(self) -> ModeLabel {
        ModeLabel::new(self, Polarization::H)
    }

    pub fn v(self) -> ModeLabel {
        ModeLabel::new(self, Polarization::V)
    }

    /// Both polarization modes of this beam, H first.
    pub fn modes(self) -> [ModeLabel; 2] {
        [self.h(), self.v()]
    }

    pub fn is_loss(self) -> bool {
        matches!(self, Beam::Loss(_))
    }
}

impl fmt::Display for Beam {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Beam::One => write!(f, "1"),
            Beam::Two => write!(f, "2"),
            Beam::Three => write!(f, "3"),
            Beam::Four => write!(f, "4"),
            Beam::Loss(k) => write!(f, "L{k}"),
            Beam::Ancilla(k) => write!(f, "A{k}"),
        }
    }
}

impl FromStr for Beam {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::MalformedModes(format!("unknown beam `{s}`"));
        match s {
            "1" => Ok(Beam::One),
            "2" => Ok(Beam::Two),
            "3" => Ok(Beam::Three),
            "4" => Ok(Beam::Four),
            _ => {
                let (tag, rest) = s.split_at(s.len().min(1));
                let k: u8 = rest.parse().map_err(|_| bad())?;
                match tag {
                    "L" => Ok(Beam::Loss(k)),
                    "A" => Ok(Beam::Ancilla(k)),
                    _ => Err(bad()),
                }
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Polarization {
    H,
    V,
}

/// One bosonic mode: a spatial beam in a definite polarization.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ModeLabel {
    pub beam: Beam,
    pub pol: Polarization,
}

impl ModeLabel {
    pub const fn new(beam: Beam, pol: Polarization) -> Self {
        Self { beam, pol }
    }
}

impl fmt::Display for ModeLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let p = match self.pol {
            Polarization::H => "H",
            Polarization::V => "V",
        };
        write!(f, "{}{}", self.beam, p)
    }
}

impl FromStr for ModeLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let Some(last) = s.chars().last() else {
            return Err(Error::MalformedModes("empty mode label".into()));
        };
        let pol = match last {
            'H' | 'h' => Polarization::H,
            'V' | 'v' => Polarization::V,
            _ => return Err(Error::MalformedModes(format!("mode `{s}` lacks an H/V suffix"))),
        };
        let beam = s[..s.len() - 1].parse()?;
        Ok(Self { beam, pol })
    }
}

impl Serialize for ModeLabel {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for ModeLabel {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

impl Serialize for Beam {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Beam {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}
