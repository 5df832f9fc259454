//! Rate coding of images and class labels into input spikes.
//!
//! Every image occupies one period of `presentation_ms + silence_ms`
//! timesteps. Pixel nodes fire only during the presentation sub-window, with
//! a spike count proportional to brightness and deterministic, evenly spaced
//! spike times. The node of the image's class fires at every timestep of the
//! whole period, silence included, but only for training images: the label
//! source goes quiet once learning ends.

use crate::data::{Dataset, ImageRecord, CLASSES, PIXELS};

/// Identifies one input node of the network.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum InputNode {
    /// Pixel receptor, index `0..784` in row-major order.
    Pixel(u16),
    /// Class-label receptor, index `0..10`.
    Class(u8),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SpikeEvent {
    pub time: u64,
    pub node: InputNode,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct EncodingParams {
    pub presentation_ms: u32,
    pub silence_ms: u32,
    pub max_spikes: u32,
    pub pixel_nodes: usize,
    pub class_nodes: usize,
}

impl Default for EncodingParams {
    fn default() -> Self {
        Self { presentation_ms: 10, silence_ms: 10, max_spikes: 10, pixel_nodes: PIXELS, class_nodes: CLASSES }
    }
}

impl EncodingParams {
    /// Fails unless the presentation window is nonempty and wide enough to
    /// hold `max_spikes` spikes at one per timestep.
    pub fn new(presentation_ms: u32, silence_ms: u32, max_spikes: u32) -> Option<Self> {
        (presentation_ms > 0 && max_spikes <= presentation_ms).then_some(Self {
            presentation_ms,
            silence_ms,
            max_spikes,
            ..Self::default()
        })
    }

    pub fn period(&self) -> u64 {
        u64::from(self.presentation_ms + self.silence_ms)
    }

    pub fn window_start(&self, image_index: u64) -> u64 {
        self.period() * image_index
    }

    /// Spike count for one pixel: `floor(max_spikes * b / 255)`.
    pub fn spike_count(&self, brightness: u8) -> u32 {
        self.max_spikes * u32::from(brightness) / 255
    }

    /// Whether a pixel emitting `count` spikes per window fires at `offset`.
    pub fn fires_at(&self, count: u32, offset: u32) -> bool {
        let p = self.presentation_ms;
        offset < p && (offset + 1) * count / p > offset * count / p
    }
}

/// `floor(10 b / 255)` spikes per presentation window.
pub fn pixel_spike_count(brightness: u8) -> u32 {
    EncodingParams::default().spike_count(brightness)
}

/// Pixel spikes of one image, time-ordered, pixels ascending within a step.
pub fn encode_image(record: &ImageRecord, image_index: u64, params: &EncodingParams) -> Vec<SpikeEvent> {
    let mut events = Vec::new();
    push_image(&mut events, record, image_index, params);
    events
}

/// Label spikes of one image: one per timestep over the whole period.
pub fn encode_label(label: u8, image_index: u64, params: &EncodingParams) -> Vec<SpikeEvent> {
    let start = params.window_start(image_index);
    (start..start + params.period()).map(|time| SpikeEvent { time, node: InputNode::Class(label) }).collect()
}

fn push_image(out: &mut Vec<SpikeEvent>, record: &ImageRecord, image_index: u64, params: &EncodingParams) {
    let start = params.window_start(image_index);
    let counts: Vec<u32> = record.pixels().iter().map(|&b| params.spike_count(b)).collect();
    for offset in 0..params.presentation_ms {
        let time = start + u64::from(offset);
        out.extend(
            counts
                .iter()
                .enumerate()
                .filter(|&(_, &n)| params.fires_at(n, offset))
                .map(|(pixel, _)| SpikeEvent { time, node: InputNode::Pixel(pixel as u16) }),
        );
    }
}

/// All input spikes of one image window, sorted by time. Label spikes are
/// included when `with_label` is set.
pub fn encode_window(
    record: &ImageRecord,
    image_index: u64,
    params: &EncodingParams,
    with_label: bool,
) -> Vec<SpikeEvent> {
    let mut events = encode_image(record, image_index, params);
    if with_label {
        events.extend(encode_label(record.label(), image_index, params));
        // stable: pixel events precede the label event within a timestep
        events.sort_by_key(|e| e.time);
    }
    events
}

/// Lazily encoded spike stream over a dataset. Only one image window is held
/// in memory at a time.
#[derive(Clone, Debug)]
pub struct SpikeStream<'a> {
    records: &'a [ImageRecord],
    label_images: usize,
    params: EncodingParams,
    next_image: usize,
    buffer: std::vec::IntoIter<SpikeEvent>,
}

impl<'a> SpikeStream<'a> {
    pub fn total_duration(&self) -> u64 {
        self.params.period() * self.records.len() as u64
    }

    /// Number of leading images whose labels are emitted.
    pub fn label_images(&self) -> usize {
        self.label_images
    }

    pub fn params(&self) -> &EncodingParams {
        &self.params
    }
}

impl Iterator for SpikeStream<'_> {
    type Item = SpikeEvent;

    fn next(&mut self) -> Option<SpikeEvent> {
        loop {
            if let Some(ev) = self.buffer.next() {
                return Some(ev);
            }
            let record = self.records.get(self.next_image)?;
            let index = self.next_image;
            self.next_image += 1;
            self.buffer = encode_window(record, index as u64, &self.params, index < self.label_images).into_iter();
        }
    }
}

/// Streams the whole dataset. Labels are emitted for the training records
/// only.
pub fn build_stream<'a>(dataset: &'a Dataset, params: &EncodingParams) -> SpikeStream<'a> {
    SpikeStream {
        records: dataset.records(),
        label_images: dataset.train_count(),
        params: *params,
        next_image: 0,
        buffer: Vec::new().into_iter(),
    }
}
