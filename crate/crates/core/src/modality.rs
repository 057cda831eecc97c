//! Input modalities of a demonstration and ordered subsets of them.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// Declaration order is the fixed analysis order: force, hand, image.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Modality {
    Force,
    Hand,
    Image,
}

impl Modality {
    pub const ALL: [Modality; 3] = [Modality::Force, Modality::Hand, Modality::Image];

    pub fn as_str(self) -> &'static str {
        match self {
            Modality::Force => "force",
            Modality::Hand => "hand",
            Modality::Image => "image",
        }
    }
}

impl fmt::Display for Modality {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Modality {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "force" | "emg" | "audio" => Ok(Modality::Force),
            "hand" | "hands" | "hand_pose" => Ok(Modality::Hand),
            "image" | "images" | "img" => Ok(Modality::Image),
            other => Err(format!("unknown modality '{other}'")),
        }
    }
}

/// A non-empty modality subset, always iterated in analysis order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ModalitySet(u8);

impl ModalitySet {
    pub const ALL: ModalitySet = ModalitySet(0b111);

    pub fn new(modalities: impl IntoIterator<Item = Modality>) -> Option<Self> {
        let bits = modalities
            .into_iter()
            .fold(0u8, |acc, m| acc | (1 << m as u8));
        (bits != 0).then_some(Self(bits))
    }

    pub fn contains(self, m: Modality) -> bool {
        self.0 & (1 << m as u8) != 0
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn iter(self) -> impl Iterator<Item = Modality> {
        Modality::ALL.into_iter().filter(move |m| self.contains(*m))
    }

    /// `+`-joined modality names, e.g. `force+hand+image`.
    pub fn label(self) -> String {
        self.iter().map(Modality::as_str).collect::<Vec<_>>().join("+")
    }

    /// Parses either an ablation name or a `,`/`+`-separated modality list.
    pub fn parse(text: &str) -> Result<Self, String> {
        let key = text
            .to_ascii_lowercase()
            .split(|c: char| !c.is_ascii_alphanumeric())
            .filter(|w| !w.is_empty())
            .collect::<Vec<_>>()
            .join("-");
        let named = match key.as_str() {
            "all" => Some(Self::ALL),
            "image-only" | "img-only" => Self::new([Modality::Image]),
            "w-o-img" | "wo-img" | "w-o-image" | "wo-image" => {
                Self::new([Modality::Force, Modality::Hand])
            }
            "w-o-force" | "wo-force" => Self::new([Modality::Hand, Modality::Image]),
            "w-o-hand" | "wo-hand" => Self::new([Modality::Force, Modality::Image]),
            _ => None,
        };
        if let Some(set) = named {
            return Ok(set);
        }
        let parts = text
            .split([',', '+'])
            .filter(|p| !p.trim().is_empty())
            .map(Modality::from_str)
            .collect::<Result<Vec<_>, _>>()?;
        Self::new(parts).ok_or_else(|| "empty modality set".to_string())
    }
}

impl fmt::Display for ModalitySet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

impl Serialize for ModalitySet {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.label())
    }
}

impl<'de> Deserialize<'de> for ModalitySet {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let text = String::deserialize(d)?;
        ModalitySet::parse(&text).map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn iteration_follows_analysis_order() {
        let set = ModalitySet::new([Modality::Image, Modality::Force]).unwrap();
        assert_eq!(set.iter().collect::<Vec<_>>(), vec![Modality::Force, Modality::Image]);
        assert_eq!(set.label(), "force+image");
    }

    #[test]
    fn ablation_names() {
        assert_eq!(ModalitySet::parse("all").unwrap(), ModalitySet::ALL);
        assert_eq!(ModalitySet::parse("w.o. force").unwrap().label(), "hand+image");
        assert_eq!(ModalitySet::parse("image-only").unwrap().label(), "image");
        assert_eq!(ModalitySet::parse("force,hand").unwrap().label(), "force+hand");
        assert!(ModalitySet::parse("").is_err());
        assert!(ModalitySet::parse("smell").is_err());
    }
}
