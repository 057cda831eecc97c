use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::demo::HandPose;
use crate::modality::Modality;
use crate::numfmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
    Assistant,
}

/// Label carried by force series blocks.
pub const FORCE_LABEL: &str = "force";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Part {
    Text {
        text: String,
    },
    Image {
        uri: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        sha256: Option<String>,
        /// Local file backing `uri`; never part of the request digest.
        #[serde(skip)]
        path: Option<PathBuf>,
    },
    Series {
        label: String,
        values: Vec<f64>,
    },
    /// Fingertip pixel locations of both hands at one instant.
    HandPose {
        label: String,
        pose: HandPose,
    },
}

impl Part {
    pub fn text(text: impl Into<String>) -> Self {
        Part::Text { text: text.into() }
    }

    /// Image reference; the content digest is filled in when `path` is readable.
    pub fn image(uri: impl Into<String>, path: Option<PathBuf>) -> Self {
        let sha256 = path
            .as_ref()
            .and_then(|p| std::fs::read(p).ok())
            .map(|bytes| {
                use sha2::{Digest, Sha256};
                hex::encode(Sha256::digest(bytes))
            });
        Part::Image {
            uri: uri.into(),
            sha256,
            path,
        }
    }

    pub fn series(label: impl Into<String>, values: Vec<f64>) -> Self {
        Part::Series {
            label: label.into(),
            values,
        }
    }

    /// Modality this part carries, if it is data rather than instructions.
    pub fn modality(&self) -> Option<Modality> {
        match self {
            Part::Text { .. } => None,
            Part::Image { .. } => Some(Modality::Image),
            Part::Series { label, .. } if label == FORCE_LABEL => Some(Modality::Force),
            Part::Series { .. } => None,
            Part::HandPose { .. } => Some(Modality::Hand),
        }
    }

    /// Text form of a non-image part as it appears on the wire.
    pub fn render(&self) -> String {
        match self {
            Part::Text { text } => text.clone(),
            Part::Image { uri, .. } => format!("<image {uri}>"),
            Part::Series { label, values } => serialize_series(label, values)
                .unwrap_or_else(|_| format!("{label}: <non-finite>")),
            Part::HandPose { label, pose } => render_hand_pose(label, pose),
        }
    }
}

#[derive(Debug, thiserror::Error, PartialEq)]
#[error("series `{label}` has a non-finite value at position {index}")]
pub struct NonFiniteSeries {
    pub label: String,
    pub index: usize,
}

/// Renders `label: v0, v1, ...` with two decimals, rounding half up.
pub fn serialize_series(label: &str, values: &[f64]) -> Result<String, NonFiniteSeries> {
    if let Some(index) = values.iter().position(|v| !v.is_finite()) {
        return Err(NonFiniteSeries {
            label: label.to_string(),
            index,
        });
    }
    let body: Vec<String> = values.iter().map(|&v| numfmt::fixed(v, 2)).collect();
    Ok(format!("{label}: {}", body.join(", ")))
}

fn render_hand_pose(label: &str, pose: &HandPose) -> String {
    let hand = |name: &str, tips: &Option<crate::demo::Fingertips>| match tips {
        Some(t) => format!(
            "{name} thumb ({}, {}) middle ({}, {})",
            numfmt::fixed(t.thumb[0], 0),
            numfmt::fixed(t.thumb[1], 0),
            numfmt::fixed(t.middle[0], 0),
            numfmt::fixed(t.middle[1], 0),
        ),
        None => format!("{name} not visible"),
    };
    format!("{label}: {}; {}", hand("left", &pose.left), hand("right", &pose.right))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Message {
    pub role: Role,
    pub parts: Vec<Part>,
}

impl Message {
    pub fn new(role: Role, parts: Vec<Part>) -> Self {
        Self { role, parts }
    }

    pub fn system(text: impl Into<String>) -> Self {
        Self::new(Role::System, vec![Part::text(text)])
    }

    pub fn user(text: impl Into<String>) -> Self {
        Self::new(Role::User, vec![Part::text(text)])
    }

    pub fn assistant(text: impl Into<String>) -> Self {
        Self::new(Role::Assistant, vec![Part::text(text)])
    }

    /// All non-image parts rendered and joined with newlines.
    pub fn text(&self) -> String {
        self.parts
            .iter()
            .filter(|p| !matches!(p, Part::Image { .. }))
            .map(Part::render)
            .collect::<Vec<_>>()
            .join("\n")
    }
}
