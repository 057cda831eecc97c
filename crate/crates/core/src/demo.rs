//! Multimodal demonstration recordings.
//!
//! A recording is a JSON manifest listing camera frames with optional
//! fingertip tracks, plus the raw force-bearing signal (8-channel EMG or mono
//! audio) or a precomputed per-frame force column. Loading resolves the force
//! source into one value per frame in `[0, 1]`:
//!
//! * EMG: maximum over all channels and all samples in the frame window.
//! * Audio: RMS amplitude of the samples in the frame window.
//! * Precomputed: taken as given.
//!
//! followed by per-recording min-max normalization. Frame `i` owns the
//! half-open window `[i / frame_rate, (i + 1) / frame_rate)`; raw samples past
//! the last window are dropped and counted.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const EMG_CHANNELS: usize = 8;

#[derive(Debug, Error)]
pub enum DemoError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: invalid JSON at `{field}`: {message}")]
    Parse {
        path: PathBuf,
        field: String,
        message: String,
    },
    #[error("schema violation at `{field}`: {reason}")]
    Schema { field: String, reason: String },
    #[error("signal trace is empty")]
    EmptyTrace,
    #[error("zero frames requested")]
    ZeroFrames,
    #[error("trace covers {available_s:.4}s but {requested_s:.4}s of frames were requested")]
    TraceTooShort { requested_s: f64, available_s: f64 },
    #[error("cannot normalize an empty series")]
    EmptySeries,
    #[error("non-finite value at position {0}")]
    NonFinite(usize),
    #[error("keyframe count {k} outside [2, {frames}]")]
    KeyframeRange { k: usize, frames: usize },
}

fn schema(field: impl Into<String>, reason: impl Into<String>) -> DemoError {
    DemoError::Schema {
        field: field.into(),
        reason: reason.into(),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RawEmgTrace {
    pub channels: Vec<Vec<f64>>,
    pub sample_rate_hz: f64,
}

impl RawEmgTrace {
    pub fn new(channels: Vec<Vec<f64>>, sample_rate_hz: f64) -> Result<Self, DemoError> {
        let trace = Self {
            channels,
            sample_rate_hz,
        };
        trace.validate("emg")?;
        Ok(trace)
    }

    fn validate(&self, prefix: &str) -> Result<(), DemoError> {
        if !(self.sample_rate_hz > 0.0 && self.sample_rate_hz.is_finite()) {
            return Err(schema(format!("{prefix}.sample_rate_hz"), "must be positive"));
        }
        if self.channels.len() != EMG_CHANNELS {
            return Err(schema(
                format!("{prefix}.channels"),
                format!("expected {EMG_CHANNELS} channels, found {}", self.channels.len()),
            ));
        }
        let len = self.channels[0].len();
        for (c, channel) in self.channels.iter().enumerate() {
            if channel.len() != len {
                return Err(schema(
                    format!("{prefix}.channels[{c}]"),
                    format!("length {} differs from channel 0 length {len}", channel.len()),
                ));
            }
            if let Some(j) = channel.iter().position(|v| !v.is_finite()) {
                return Err(schema(format!("{prefix}.channels[{c}][{j}]"), "non-finite reading"));
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.channels.first().map_or(0, Vec::len)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RawAudioTrace {
    pub samples: Vec<f64>,
    pub sample_rate_hz: f64,
}

impl RawAudioTrace {
    pub fn new(samples: Vec<f64>, sample_rate_hz: f64) -> Result<Self, DemoError> {
        let trace = Self {
            samples,
            sample_rate_hz,
        };
        trace.validate("audio")?;
        Ok(trace)
    }

    fn validate(&self, prefix: &str) -> Result<(), DemoError> {
        if !(self.sample_rate_hz > 0.0 && self.sample_rate_hz.is_finite()) {
            return Err(schema(format!("{prefix}.sample_rate_hz"), "must be positive"));
        }
        if let Some(j) = self
            .samples
            .iter()
            .position(|v| !v.is_finite() || v.abs() > 1.0)
        {
            return Err(schema(
                format!("{prefix}.samples[{j}]"),
                "amplitude must be finite and within [-1, 1]",
            ));
        }
        Ok(())
    }
}

/// Pixel locations of the tracked fingertips of one hand.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Fingertips {
    pub thumb: [f64; 2],
    pub middle: [f64; 2],
}

/// Per-frame hand observation; an absent hand was not detected in the frame.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct HandPose {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub left: Option<Fingertips>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub right: Option<Fingertips>,
}

impl HandPose {
    pub fn is_empty(&self) -> bool {
        self.left.is_none() && self.right.is_none()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    pub index: usize,
    pub timestamp_s: f64,
    pub image: String,
    /// Normalized force in `[0, 1]`.
    pub force: f64,
    pub hands: HandPose,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ForceSource {
    Emg,
    Audio,
    Precomputed,
}

/// A validated recording with its force series resolved.
#[derive(Debug, Clone)]
pub struct MultimodalDemo {
    pub frame_rate_hz: f64,
    pub image_dir: String,
    pub image_size: Option<(u32, u32)>,
    pub task: Option<String>,
    pub frames: Vec<Frame>,
    pub force_source: ForceSource,
    pub emg: Option<RawEmgTrace>,
    pub audio: Option<RawAudioTrace>,
    /// Raw samples beyond the final frame window.
    pub dropped_samples: usize,
    /// Directory the manifest was loaded from; used to resolve image files.
    pub source_dir: Option<PathBuf>,
}

impl PartialEq for MultimodalDemo {
    // `source_dir` records where the manifest lived, not what it contains.
    fn eq(&self, other: &Self) -> bool {
        self.frame_rate_hz == other.frame_rate_hz
            && self.image_dir == other.image_dir
            && self.image_size == other.image_size
            && self.task == other.task
            && self.frames == other.frames
            && self.force_source == other.force_source
            && self.emg == other.emg
            && self.audio == other.audio
            && self.dropped_samples == other.dropped_samples
    }
}

impl MultimodalDemo {
    /// Image reference as written in prompts: `image_dir/image`.
    pub fn image_ref(&self, frame: &Frame) -> String {
        if self.image_dir.is_empty() {
            frame.image.clone()
        } else {
            format!("{}/{}", self.image_dir.trim_end_matches('/'), frame.image)
        }
    }

    /// Filesystem location of a frame image, if the manifest directory is known.
    pub fn image_path(&self, frame: &Frame) -> Option<PathBuf> {
        self.source_dir
            .as_ref()
            .map(|dir| dir.join(self.image_ref(frame)))
    }

    pub fn forces(&self) -> Vec<f64> {
        self.frames.iter().map(|f| f.force).collect()
    }

    pub fn has_hands(&self) -> bool {
        self.frames.iter().any(|f| !f.hands.is_empty())
    }

    pub fn from_manifest(manifest: RecordingManifest) -> Result<Self, DemoError> {
        let fr = manifest.frame_rate_hz;
        if !(fr > 0.0 && fr.is_finite()) {
            return Err(schema("frame_rate_hz", "must be positive"));
        }
        if manifest.frames.is_empty() {
            return Err(schema("frames", "at least one frame is required"));
        }
        let image_size = match (manifest.image_width, manifest.image_height) {
            (Some(w), Some(h)) => Some((w, h)),
            (None, None) => None,
            _ => {
                return Err(schema(
                    "image_width",
                    "image_width and image_height must be given together",
                ))
            }
        };

        let mut prev_t = f64::NEG_INFINITY;
        for (i, frame) in manifest.frames.iter().enumerate() {
            if frame.index != i {
                return Err(schema(
                    format!("frames[{i}].index"),
                    format!("expected {i}, found {}", frame.index),
                ));
            }
            if !frame.timestamp_s.is_finite() || frame.timestamp_s <= prev_t {
                return Err(schema(
                    format!("frames[{i}].timestamp_s"),
                    "timestamps must be finite and strictly increasing",
                ));
            }
            prev_t = frame.timestamp_s;
            if let Some(hands) = &frame.hands {
                check_hands(i, hands, image_size)?;
            }
        }

        let emg = manifest
            .emg
            .map(|e| {
                let t = RawEmgTrace {
                    channels: e.channels,
                    sample_rate_hz: e.sample_rate_hz,
                };
                t.validate("emg").map(|_| t)
            })
            .transpose()?;
        let audio = manifest
            .audio
            .map(|a| {
                let t = RawAudioTrace {
                    samples: a.samples,
                    sample_rate_hz: a.sample_rate_hz,
                };
                t.validate("audio").map(|_| t)
            })
            .transpose()?;

        let n = manifest.frames.len();
        let (raw_force, dropped) = match manifest.force_source {
            ForceSource::Emg => {
                let trace = emg.as_ref().ok_or_else(|| {
                    schema("emg", "force_source is \"emg\" but no emg block is present")
                })?;
                let series = emg_to_force(trace, fr, n).map_err(|e| schema("emg", e.to_string()))?;
                (series.values, series.dropped_samples)
            }
            ForceSource::Audio => {
                let trace = audio.as_ref().ok_or_else(|| {
                    schema("audio", "force_source is \"audio\" but no audio block is present")
                })?;
                let series =
                    audio_to_force(trace, fr, n).map_err(|e| schema("audio", e.to_string()))?;
                (series.values, series.dropped_samples)
            }
            ForceSource::Precomputed => {
                let mut values = Vec::with_capacity(n);
                for (i, frame) in manifest.frames.iter().enumerate() {
                    match frame.force {
                        Some(v) if v.is_finite() => values.push(v),
                        Some(_) => {
                            return Err(schema(format!("frames[{i}].force"), "non-finite force"))
                        }
                        None => {
                            return Err(schema(
                                format!("frames[{i}].force"),
                                "force_source is \"precomputed\" but the frame has no force",
                            ))
                        }
                    }
                }
                (values, 0)
            }
        };
        if dropped > 0 {
            log::warn!("dropped {dropped} raw samples past the final frame window");
        }
        let force = normalize_series(&raw_force)?;

        let frames = manifest
            .frames
            .into_iter()
            .zip(force)
            .map(|(f, force)| Frame {
                index: f.index,
                timestamp_s: f.timestamp_s,
                image: f.image,
                force,
                hands: f.hands.unwrap_or_default(),
            })
            .collect();

        Ok(Self {
            frame_rate_hz: fr,
            image_dir: manifest.image_dir,
            image_size,
            task: manifest.task,
            frames,
            force_source: manifest.force_source,
            emg,
            audio,
            dropped_samples: dropped,
            source_dir: None,
        })
    }

    /// Manifest form of this demo. Raw signals are written back verbatim; the
    /// per-frame force column is only written for precomputed recordings.
    pub fn to_manifest(&self) -> RecordingManifest {
        let precomputed = self.force_source == ForceSource::Precomputed;
        RecordingManifest {
            frame_rate_hz: self.frame_rate_hz,
            image_dir: self.image_dir.clone(),
            image_width: self.image_size.map(|s| s.0),
            image_height: self.image_size.map(|s| s.1),
            task: self.task.clone(),
            frames: self
                .frames
                .iter()
                .map(|f| FrameRecord {
                    index: f.index,
                    timestamp_s: f.timestamp_s,
                    image: f.image.clone(),
                    force: precomputed.then_some(f.force),
                    hands: (!f.hands.is_empty()).then_some(f.hands),
                })
                .collect(),
            emg: self.emg.as_ref().map(|e| EmgRecord {
                sample_rate_hz: e.sample_rate_hz,
                channels: e.channels.clone(),
            }),
            audio: self.audio.as_ref().map(|a| AudioRecord {
                sample_rate_hz: a.sample_rate_hz,
                samples: a.samples.clone(),
            }),
            force_source: self.force_source,
        }
    }

    pub fn save(&self, path: &Path) -> Result<(), DemoError> {
        let text = serde_json::to_string_pretty(&self.to_manifest())
            .expect("manifest serialization cannot fail");
        fs::write(path, text).map_err(|source| DemoError::Io {
            path: path.to_path_buf(),
            source,
        })
    }
}

fn check_hands(i: usize, hands: &HandPose, size: Option<(u32, u32)>) -> Result<(), DemoError> {
    for (name, tips) in [("left", &hands.left), ("right", &hands.right)] {
        let Some(tips) = tips else { continue };
        for (finger, [x, y]) in [("thumb", tips.thumb), ("middle", tips.middle)] {
            let field = format!("frames[{i}].hands.{name}.{finger}");
            if !(x.is_finite() && y.is_finite() && x >= 0.0 && y >= 0.0) {
                return Err(schema(field, "coordinates must be finite and non-negative"));
            }
            if let Some((w, h)) = size {
                if x > f64::from(w) || y > f64::from(h) {
                    return Err(schema(field, format!("outside the {w}x{h} image")));
                }
            }
        }
    }
    Ok(())
}

/// On-disk recording manifest.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RecordingManifest {
    pub frame_rate_hz: f64,
    pub image_dir: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub image_width: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub image_height: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub task: Option<String>,
    pub frames: Vec<FrameRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub emg: Option<EmgRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub audio: Option<AudioRecord>,
    pub force_source: ForceSource,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FrameRecord {
    pub index: usize,
    pub timestamp_s: f64,
    pub image: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub force: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hands: Option<HandPose>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EmgRecord {
    pub sample_rate_hz: f64,
    pub channels: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AudioRecord {
    pub sample_rate_hz: f64,
    pub samples: Vec<f64>,
}

/// Loads and validates a recording manifest.
pub fn load_recording(path: &Path) -> Result<MultimodalDemo, DemoError> {
    let text = fs::read_to_string(path).map_err(|source| DemoError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let de = &mut serde_json::Deserializer::from_str(&text);
    let manifest: RecordingManifest =
        serde_path_to_error::deserialize(de).map_err(|e| DemoError::Parse {
            path: path.to_path_buf(),
            field: e.path().to_string(),
            message: e.inner().to_string(),
        })?;
    let mut demo = MultimodalDemo::from_manifest(manifest)?;
    demo.source_dir = path.parent().map(Path::to_path_buf);
    Ok(demo)
}

/// Per-frame force values before normalization.
#[derive(Debug, Clone, PartialEq)]
pub struct ForceSeries {
    pub values: Vec<f64>,
    pub dropped_samples: usize,
}

/// Index of the frame window `[i / fr, (i + 1) / fr)` containing `t`, if any.
///
/// The bounds are evaluated with exactly these expressions so that membership
/// agrees with a direct per-window comparison.
fn window_of(t: f64, frame_rate_hz: f64, n_frames: usize) -> Option<usize> {
    if t < 0.0 {
        return None;
    }
    let mut i = (t * frame_rate_hz).floor() as usize;
    while i > 0 && t < i as f64 / frame_rate_hz {
        i -= 1;
    }
    while t >= (i + 1) as f64 / frame_rate_hz {
        i += 1;
    }
    (i < n_frames).then_some(i)
}

fn check_request(
    len: usize,
    sample_rate_hz: f64,
    frame_rate_hz: f64,
    n_frames: usize,
) -> Result<(), DemoError> {
    if len == 0 {
        return Err(DemoError::EmptyTrace);
    }
    if n_frames == 0 {
        return Err(DemoError::ZeroFrames);
    }
    let requested_s = n_frames as f64 / frame_rate_hz;
    let available_s = len as f64 / sample_rate_hz;
    if requested_s > available_s + 1.0 / frame_rate_hz + 1e-12 {
        return Err(DemoError::TraceTooShort {
            requested_s,
            available_s,
        });
    }
    Ok(())
}

/// Downsamples EMG to the camera rate: each frame takes the maximum reading
/// across all channels and all samples inside its window. Frames whose
/// window holds no samples read 0.
pub fn emg_to_force(
    emg: &RawEmgTrace,
    frame_rate_hz: f64,
    n_frames: usize,
) -> Result<ForceSeries, DemoError> {
    check_request(emg.len(), emg.sample_rate_hz, frame_rate_hz, n_frames)?;
    let mut values: Vec<Option<f64>> = vec![None; n_frames];
    let mut dropped = 0;
    for j in 0..emg.len() {
        let t = j as f64 / emg.sample_rate_hz;
        let Some(i) = window_of(t, frame_rate_hz, n_frames) else {
            dropped += 1;
            continue;
        };
        let peak = emg
            .channels
            .iter()
            .map(|c| c[j])
            .fold(f64::NEG_INFINITY, f64::max);
        values[i] = Some(values[i].map_or(peak, |v: f64| v.max(peak)));
    }
    Ok(ForceSeries {
        values: values.into_iter().map(|v| v.unwrap_or(0.0)).collect(),
        dropped_samples: dropped,
    })
}

/// Per-frame loudness as the RMS amplitude of the samples in each window.
pub fn audio_to_force(
    audio: &RawAudioTrace,
    frame_rate_hz: f64,
    n_frames: usize,
) -> Result<ForceSeries, DemoError> {
    check_request(audio.samples.len(), audio.sample_rate_hz, frame_rate_hz, n_frames)?;
    let mut sum_sq = vec![0.0f64; n_frames];
    let mut counts = vec![0usize; n_frames];
    let mut dropped = 0;
    for (j, &x) in audio.samples.iter().enumerate() {
        let t = j as f64 / audio.sample_rate_hz;
        match window_of(t, frame_rate_hz, n_frames) {
            Some(i) => {
                sum_sq[i] += x * x;
                counts[i] += 1;
            }
            None => dropped += 1,
        }
    }
    let values = sum_sq
        .iter()
        .zip(&counts)
        .map(|(&s, &c)| if c == 0 { 0.0 } else { (s / c as f64).sqrt() })
        .collect();
    Ok(ForceSeries {
        values,
        dropped_samples: dropped,
    })
}

/// Min-max scales a series into `[0, 1]`; a constant series maps to zeros.
pub fn normalize_series(values: &[f64]) -> Result<Vec<f64>, DemoError> {
    if values.is_empty() {
        return Err(DemoError::EmptySeries);
    }
    if let Some(i) = values.iter().position(|v| !v.is_finite()) {
        return Err(DemoError::NonFinite(i));
    }
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let range = max - min;
    if range == 0.0 {
        return Ok(vec![0.0; values.len()]);
    }
    Ok(values.iter().map(|v| (v - min) / range).collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct Keyframe {
    pub index: usize,
    pub timestamp_s: f64,
    pub image: String,
    pub force: f64,
    pub hands: HandPose,
}

#[derive(Debug, Clone, PartialEq)]
pub struct KeyframeSet {
    pub keyframes: Vec<Keyframe>,
}

impl KeyframeSet {
    pub fn indices(&self) -> Vec<usize> {
        self.keyframes.iter().map(|k| k.index).collect()
    }
}

/// Picks `k` uniformly spaced frames, always including the first and last.
pub fn select_keyframes(demo: &MultimodalDemo, k: usize) -> Result<KeyframeSet, DemoError> {
    let n = demo.frames.len();
    if k < 2 || k > n {
        return Err(DemoError::KeyframeRange { k, frames: n });
    }
    let span = n - 1;
    let steps = k - 1;
    let keyframes = (0..k)
        .map(|j| {
            // round-half-up of j * span / steps in integer arithmetic
            let idx = (2 * j * span + steps) / (2 * steps);
            let f = &demo.frames[idx];
            Keyframe {
                index: f.index,
                timestamp_s: f.timestamp_s,
                image: demo.image_ref(f),
                force: f.force,
                hands: f.hands,
            }
        })
        .collect();
    Ok(KeyframeSet { keyframes })
}
