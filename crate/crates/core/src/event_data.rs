//! Event-camera ingestion: the 5-byte N-MNIST record format, temporal binning
//! into normalized frames, event-drop corruption and a synthetic moving-blob
//! generator for runs without benchmark data.

use std::fs;
use std::path::{Path, PathBuf};

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Result, SastError};
use crate::rng::{seeded, stream_rng, Stream};
use crate::scalar::Scalar;

/// Largest timestamp representable in the 23-bit record field.
pub const MAX_TIMESTAMP: u64 = (1 << 23) - 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Event {
    /// Microseconds since the start of the recording.
    pub timestamp: u64,
    pub x: u16,
    pub y: u16,
    /// `true` for ON events.
    pub polarity: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EventStream {
    pub events: Vec<Event>,
    pub width: u16,
    pub height: u16,
    /// Recording length in microseconds; never smaller than the last timestamp.
    pub duration: u64,
}

impl EventStream {
    /// Builds a stream, sorting events (stably) by timestamp and validating bounds.
    pub fn new(mut events: Vec<Event>, width: u16, height: u16, duration: u64) -> Result<Self> {
        for (i, e) in events.iter().enumerate() {
            check_bounds(i, e, width, height)?;
            if e.timestamp > duration {
                return Err(SastError::OutOfRange {
                    index: i,
                    what: format!("timestamp {} exceeds duration {}", e.timestamp, duration),
                });
            }
        }
        events.sort_by_key(|e| e.timestamp);
        Ok(Self {
            events,
            width,
            height,
            duration,
        })
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }
}

fn check_bounds(index: usize, e: &Event, width: u16, height: u16) -> Result<()> {
    if e.x >= width || e.y >= height {
        return Err(SastError::OutOfRange {
            index,
            what: format!("pixel ({}, {}) outside {}x{} sensor", e.x, e.y, width, height),
        });
    }
    Ok(())
}

/// Decodes an N-MNIST binary file: 5 bytes per event,
/// `x | y | p:1 ts[22:16]:7 | ts[15:8] | ts[7:0]`.
///
/// The stream duration is the largest timestamp seen (0 for an empty file).
pub fn parse_nmnist_file(bytes: &[u8], width: u16, height: u16) -> Result<EventStream> {
    if !bytes.len().is_multiple_of(5) {
        return Err(SastError::Malformed(format!(
            "length {} is not a multiple of 5",
            bytes.len()
        )));
    }
    let mut events = Vec::with_capacity(bytes.len() / 5);
    for (i, rec) in bytes.chunks_exact(5).enumerate() {
        let e = Event {
            x: rec[0] as u16,
            y: rec[1] as u16,
            polarity: rec[2] & 0x80 != 0,
            timestamp: ((rec[2] as u64 & 0x7f) << 16) | ((rec[3] as u64) << 8) | rec[4] as u64,
        };
        check_bounds(i, &e, width, height)?;
        events.push(e);
    }
    let duration = events.iter().map(|e| e.timestamp).max().unwrap_or(0);
    events.sort_by_key(|e| e.timestamp);
    Ok(EventStream {
        events,
        width,
        height,
        duration,
    })
}

/// Encodes a stream in the N-MNIST record format. Fails for pixels above 255
/// or timestamps that do not fit in 23 bits.
pub fn serialize_nmnist(stream: &EventStream) -> Result<Vec<u8>> {
    let mut out = Vec::with_capacity(stream.events.len() * 5);
    for (i, e) in stream.events.iter().enumerate() {
        if e.x > 255 || e.y > 255 {
            return Err(SastError::OutOfRange {
                index: i,
                what: format!("pixel ({}, {}) does not fit in one byte", e.x, e.y),
            });
        }
        if e.timestamp > MAX_TIMESTAMP {
            return Err(SastError::OutOfRange {
                index: i,
                what: format!("timestamp {} does not fit in 23 bits", e.timestamp),
            });
        }
        let ts = e.timestamp;
        out.push(e.x as u8);
        out.push(e.y as u8);
        out.push(((e.polarity as u8) << 7) | ((ts >> 16) as u8 & 0x7f));
        out.push((ts >> 8) as u8);
        out.push(ts as u8);
    }
    Ok(out)
}

/// Dense `T × D` input, row `t` being the flattened frame at step `t`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "S: Scalar")]
pub struct FrameTensor<S> {
    steps: usize,
    dim: usize,
    data: Vec<S>,
}

impl<S: Scalar> FrameTensor<S> {
    pub fn zeros(steps: usize, dim: usize) -> Self {
        Self {
            steps,
            dim,
            data: vec![S::zero(); steps * dim],
        }
    }

    pub fn from_vec(steps: usize, dim: usize, data: Vec<S>) -> Result<Self> {
        if data.len() != steps * dim {
            return Err(SastError::shape(
                format!("{} values ({steps}x{dim})", steps * dim),
                data.len(),
            ));
        }
        Ok(Self { steps, dim, data })
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn frame(&self, t: usize) -> &[S] {
        &self.data[t * self.dim..(t + 1) * self.dim]
    }

    pub fn as_slice(&self) -> &[S] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [S] {
        &mut self.data
    }

    /// `‖x‖₂,₂`: Euclidean norm over all steps and inputs.
    pub fn norm(&self) -> S {
        crate::linalg::norm2(&self.data)
    }

    pub fn cast<U: Scalar>(&self) -> FrameTensor<U> {
        FrameTensor {
            steps: self.steps,
            dim: self.dim,
            data: self.data.iter().map(|v| U::lit(v.to_f64_lossy())).collect(),
        }
    }
}

/// Flat input index of a pixel: polarity-major, then row-major over `(y, x)`.
#[inline]
pub fn flat_index(polarity: bool, x: u16, y: u16, width: u16, height: u16) -> usize {
    (polarity as usize) * (height as usize * width as usize) + y as usize * width as usize + x as usize
}

/// Bin index of a timestamp: `min(floor(t·T/duration), T−1)`; everything lands
/// in bin 0 when `duration == 0`.
#[inline]
pub fn bin_index(timestamp: u64, steps: usize, duration: u64) -> usize {
    if duration == 0 {
        return 0;
    }
    let b = (timestamp as u128 * steps as u128 / duration as u128) as usize;
    b.min(steps - 1)
}

/// Raw per-cell event counts, `T × (2·H·W)`.
pub fn bin_counts(stream: &EventStream, steps: usize, width: u16, height: u16) -> Result<Vec<u32>> {
    if steps == 0 {
        return Err(SastError::invalid("step count must be at least 1"));
    }
    let dim = 2 * width as usize * height as usize;
    let mut counts = vec![0u32; steps * dim];
    for (i, e) in stream.events.iter().enumerate() {
        check_bounds(i, e, width, height)?;
        if e.timestamp > stream.duration {
            return Err(SastError::OutOfRange {
                index: i,
                what: format!("timestamp {} exceeds duration {}", e.timestamp, stream.duration),
            });
        }
        let b = bin_index(e.timestamp, steps, stream.duration);
        counts[b * dim + flat_index(e.polarity, e.x, e.y, width, height)] += 1;
    }
    Ok(counts)
}

/// Bins a stream into `steps` equal-width frames and divides by the largest cell
/// count, so every entry lies in `[0, 1]`.
pub fn bin_events<S: Scalar>(stream: &EventStream, steps: usize, width: u16, height: u16) -> Result<FrameTensor<S>> {
    let counts = bin_counts(stream, steps, width, height)?;
    let dim = 2 * width as usize * height as usize;
    let max = counts.iter().copied().max().unwrap_or(0);
    let data = if max == 0 {
        vec![S::zero(); counts.len()]
    } else {
        let m = S::lit(max as f64);
        counts.iter().map(|&c| S::lit(c as f64) / m).collect()
    };
    FrameTensor::from_vec(steps, dim, data)
}

/// Removes each event independently with probability `p`.
pub fn drop_events(stream: &EventStream, p: f64, seed: u64) -> Result<EventStream> {
    if !(0.0..=1.0).contains(&p) {
        return Err(SastError::invalid(format!("drop probability {p} outside [0, 1]")));
    }
    let mut rng = seeded(seed);
    let events = stream
        .events
        .iter()
        .filter(|_| rng.random::<f64>() >= p)
        .copied()
        .collect();
    Ok(EventStream {
        events,
        width: stream.width,
        height: stream.height,
        duration: stream.duration,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "S: Scalar")]
pub struct Sample<S> {
    pub frames: FrameTensor<S>,
    pub label: usize,
}

/// Binned, labeled samples sharing one `T × D` shape.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "S: Scalar")]
pub struct LabeledDataset<S> {
    samples: Vec<Sample<S>>,
    num_classes: usize,
}

impl<S: Scalar> LabeledDataset<S> {
    pub fn new(samples: Vec<Sample<S>>, num_classes: usize) -> Result<Self> {
        if let Some(first) = samples.first() {
            let (t, d) = (first.frames.steps(), first.frames.dim());
            for (i, s) in samples.iter().enumerate() {
                if s.label >= num_classes {
                    return Err(SastError::OutOfRange {
                        index: i,
                        what: format!("label {} outside [0, {num_classes})", s.label),
                    });
                }
                if s.frames.steps() != t || s.frames.dim() != d {
                    return Err(SastError::shape(
                        format!("{t}x{d}"),
                        format!("{}x{} at sample {i}", s.frames.steps(), s.frames.dim()),
                    ));
                }
            }
        }
        Ok(Self { samples, num_classes })
    }

    pub fn samples(&self) -> &[Sample<S>] {
        &self.samples
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// `(steps, dim)` of the samples, if any.
    pub fn shape(&self) -> Option<(usize, usize)> {
        self.samples.first().map(|s| (s.frames.steps(), s.frames.dim()))
    }

    pub fn subset(&self, indices: &[usize]) -> Self {
        Self {
            samples: indices.iter().map(|&i| self.samples[i].clone()).collect(),
            num_classes: self.num_classes,
        }
    }
}

/// Labeled raw event streams (before binning).
#[derive(Clone, Debug, PartialEq)]
pub struct EventDataset {
    pub streams: Vec<(EventStream, usize)>,
    pub num_classes: usize,
    pub width: u16,
    pub height: u16,
}

impl EventDataset {
    pub fn len(&self) -> usize {
        self.streams.len()
    }

    pub fn is_empty(&self) -> bool {
        self.streams.is_empty()
    }

    pub fn bin<S: Scalar>(&self, steps: usize) -> Result<LabeledDataset<S>> {
        let samples = self
            .streams
            .iter()
            .map(|(s, label)| {
                Ok(Sample {
                    frames: bin_events(s, steps, self.width, self.height)?,
                    label: *label,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        LabeledDataset::new(samples, self.num_classes)
    }

    pub fn subset(&self, indices: &[usize]) -> Self {
        Self {
            streams: indices.iter().map(|&i| self.streams[i].clone()).collect(),
            num_classes: self.num_classes,
            width: self.width,
            height: self.height,
        }
    }
}

/// Parameters of the moving-blob generator.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticSpec {
    pub classes: usize,
    pub samples_per_class: usize,
    pub width: u16,
    pub height: u16,
    /// Mean number of blob events per sample.
    pub events_per_sample: usize,
    /// Uniform background events per sample, as a fraction of `events_per_sample`.
    pub noise_fraction: f64,
    pub duration_us: u64,
    /// Blob radius (standard deviation) in pixels.
    pub blob_sigma: f64,
    /// Per-sample jitter of the trajectory start, in pixels.
    pub jitter: f64,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            classes: 2,
            samples_per_class: 10,
            width: 8,
            height: 8,
            events_per_sample: 300,
            noise_fraction: 0.1,
            duration_us: 100_000,
            blob_sigma: 1.0,
            jitter: 1.0,
            seed: 0,
        }
    }
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        if self.classes < 2 {
            return Err(SastError::invalid("synthetic generator needs at least 2 classes"));
        }
        if self.samples_per_class < 1 {
            return Err(SastError::invalid(
                "synthetic generator needs at least 1 sample per class",
            ));
        }
        if self.width == 0 || self.height == 0 || self.duration_us == 0 {
            return Err(SastError::invalid("sensor size and duration must be positive"));
        }
        if !(self.blob_sigma > 0.0) || self.noise_fraction < 0.0 || self.jitter < 0.0 {
            return Err(SastError::invalid(
                "blob_sigma must be positive; noise and jitter non-negative",
            ));
        }
        Ok(())
    }
}

/// Generates labeled event streams. Class `c` is a Gaussian blob crossing the
/// sensor along direction `2πc/classes`; ON events sit on the leading half of the
/// blob and OFF events on the trailing half. Samples are ordered class-major.
pub fn generate_synthetic_streams(spec: &SyntheticSpec) -> Result<EventDataset> {
    spec.validate()?;
    let (w, h) = (spec.width as f64, spec.height as f64);
    let center = ((w - 1.0) / 2.0, (h - 1.0) / 2.0);
    let reach = 0.35 * w.min(h);
    let blob = Normal::new(0.0, spec.blob_sigma).expect("positive sigma");
    let jitter = Normal::new(0.0, spec.jitter.max(f64::MIN_POSITIVE)).expect("positive jitter");
    let dur = spec.duration_us as f64;

    let mut streams = Vec::with_capacity(spec.classes * spec.samples_per_class);
    for class in 0..spec.classes {
        let angle = std::f64::consts::TAU * class as f64 / spec.classes as f64;
        let dir = (angle.cos(), angle.sin());
        for i in 0..spec.samples_per_class {
            let mut rng = stream_rng(
                spec.seed ^ ((class as u64) << 32 | i as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15),
                Stream::Data,
            );
            let start = (
                center.0 - reach * dir.0 + jitter.sample(&mut rng) * (spec.jitter > 0.0) as u8 as f64,
                center.1 - reach * dir.1 + jitter.sample(&mut rng) * (spec.jitter > 0.0) as u8 as f64,
            );
            let speed = 2.0 * reach * rng.random_range(0.8..1.2);
            let mut events = Vec::with_capacity(spec.events_per_sample);
            for _ in 0..spec.events_per_sample {
                let t = rng.random_range(0..spec.duration_us);
                let phase = t as f64 / dur;
                let (ox, oy) = (blob.sample(&mut rng), blob.sample(&mut rng));
                let px = (start.0 + speed * phase * dir.0 + ox).round();
                let py = (start.1 + speed * phase * dir.1 + oy).round();
                if px < 0.0 || py < 0.0 || px >= w || py >= h {
                    continue;
                }
                events.push(Event {
                    timestamp: t,
                    x: px as u16,
                    y: py as u16,
                    polarity: ox * dir.0 + oy * dir.1 > 0.0,
                });
            }
            let noise = (spec.events_per_sample as f64 * spec.noise_fraction).round() as usize;
            for _ in 0..noise {
                events.push(Event {
                    timestamp: rng.random_range(0..spec.duration_us),
                    x: rng.random_range(0..spec.width),
                    y: rng.random_range(0..spec.height),
                    polarity: rng.random(),
                });
            }
            streams.push((
                EventStream::new(events, spec.width, spec.height, spec.duration_us)?,
                class,
            ));
        }
    }
    Ok(EventDataset {
        streams,
        num_classes: spec.classes,
        width: spec.width,
        height: spec.height,
    })
}

/// Synthetic streams binned into `steps` frames.
pub fn make_synthetic_dataset<S: Scalar>(spec: &SyntheticSpec, steps: usize) -> Result<LabeledDataset<S>> {
    generate_synthetic_streams(spec)?.bin(steps)
}

/// Sensor description stored next to an on-disk dataset.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetDescriptor {
    pub width: u16,
    pub height: u16,
    pub classes: usize,
}

pub const DESCRIPTOR_FILE: &str = "dataset.toml";

/// Loads `<root>/<class_id>/<sample>.bin` using the sensor size and class count
/// from `<root>/dataset.toml`. Samples are read in file-name order per class.
pub fn load_event_dataset(root: &Path) -> Result<EventDataset> {
    let desc_path = root.join(DESCRIPTOR_FILE);
    let text = fs::read_to_string(&desc_path).map_err(|e| SastError::io(&desc_path, e))?;
    let desc: DatasetDescriptor =
        toml::from_str(&text).map_err(|e| SastError::Malformed(format!("{}: {e}", desc_path.display())))?;
    let mut streams = Vec::new();
    for class in 0..desc.classes {
        let dir = root.join(class.to_string());
        let mut files: Vec<PathBuf> = match fs::read_dir(&dir) {
            Ok(rd) => rd
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| p.extension().is_some_and(|x| x == "bin"))
                .collect(),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Vec::new(),
            Err(e) => return Err(SastError::io(&dir, e)),
        };
        files.sort();
        for f in files {
            let bytes = fs::read(&f).map_err(|e| SastError::io(&f, e))?;
            let stream = parse_nmnist_file(&bytes, desc.width, desc.height).map_err(|e| match e {
                SastError::Malformed(m) => SastError::Malformed(format!("{}: {m}", f.display())),
                SastError::OutOfRange { index, what } => SastError::OutOfRange {
                    index,
                    what: format!("{what} in {}", f.display()),
                },
                other => other,
            })?;
            streams.push((stream, class));
        }
    }
    Ok(EventDataset {
        streams,
        num_classes: desc.classes,
        width: desc.width,
        height: desc.height,
    })
}

/// Writes a dataset in the layout read by [`load_event_dataset`].
pub fn write_event_dataset(root: &Path, data: &EventDataset) -> Result<()> {
    fs::create_dir_all(root).map_err(|e| SastError::io(root, e))?;
    let desc = DatasetDescriptor {
        width: data.width,
        height: data.height,
        classes: data.num_classes,
    };
    let desc_path = root.join(DESCRIPTOR_FILE);
    let text = toml::to_string(&desc).map_err(|e| SastError::Serde(e.to_string()))?;
    fs::write(&desc_path, text).map_err(|e| SastError::io(&desc_path, e))?;
    let mut per_class = vec![0usize; data.num_classes];
    for (stream, label) in &data.streams {
        let dir = root.join(label.to_string());
        fs::create_dir_all(&dir).map_err(|e| SastError::io(&dir, e))?;
        let path = dir.join(format!("{:05}.bin", per_class[*label]));
        per_class[*label] += 1;
        fs::write(&path, serialize_nmnist(stream)?).map_err(|e| SastError::io(&path, e))?;
    }
    Ok(())
}
