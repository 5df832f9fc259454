//! Browser demo: spike rasters, live training with a weight grid, and a
//! config inspector. The logic lives in plain functions so it can be tested
//! natively; the `#[wasm_bindgen]` items only convert errors.

use colanet::config::{build_network, encoding_params, parse_config, readout_section, ConfigDocument};
use colanet::data::{parse_idx_images, parse_idx_labels, Dataset, ImageRecord, PIXELS};
use colanet::encoding::{encode_image, encode_window, EncodingParams, InputNode};
use colanet::engine::{run, Network};
use colanet::evaluation::{classify_window, WeightGrid};
use wasm_bindgen::prelude::*;

/// 5x7 glyphs, one row per byte, bit 4 leftmost.
const GLYPHS: [[u8; 7]; 10] = [
    [0x0e, 0x11, 0x13, 0x15, 0x19, 0x11, 0x0e],
    [0x04, 0x0c, 0x04, 0x04, 0x04, 0x04, 0x0e],
    [0x0e, 0x11, 0x01, 0x02, 0x04, 0x08, 0x1f],
    [0x1f, 0x02, 0x04, 0x02, 0x01, 0x11, 0x0e],
    [0x02, 0x06, 0x0a, 0x12, 0x1f, 0x02, 0x02],
    [0x1f, 0x10, 0x1e, 0x01, 0x01, 0x11, 0x0e],
    [0x06, 0x08, 0x10, 0x1e, 0x11, 0x11, 0x0e],
    [0x1f, 0x01, 0x02, 0x04, 0x08, 0x08, 0x08],
    [0x0e, 0x11, 0x11, 0x0e, 0x11, 0x11, 0x0e],
    [0x0e, 0x11, 0x11, 0x0f, 0x01, 0x02, 0x0c],
];

/// Small xorshift so the demo data needs no rng dependency.
fn xorshift(state: &mut u64) -> u64 {
    *state ^= *state << 13;
    *state ^= *state >> 7;
    *state ^= *state << 17;
    *state
}

/// A glyph scaled 3x into the 28x28 frame with a random shift and dropout.
pub fn synthetic_digit(label: u8, state: &mut u64) -> ImageRecord {
    let mut px = [0u8; PIXELS];
    let dx = 4 + (xorshift(state) % 6) as usize;
    let dy = 2 + (xorshift(state) % 4) as usize;
    for (r, bits) in GLYPHS[label as usize % 10].iter().enumerate() {
        for c in 0..5 {
            if bits & (0x10 >> c) == 0 {
                continue;
            }
            for (y, x) in (0..3).flat_map(|y| (0..3).map(move |x| (y, x))) {
                if !xorshift(state).is_multiple_of(8) {
                    px[(dy + 3 * r + y) * 28 + dx + 3 * c + x] = 255;
                }
            }
        }
    }
    ImageRecord::new(px, label % 10).expect("label below 10")
}

pub fn synthetic_dataset(train: usize, test: usize, seed: u64) -> Dataset {
    let mut state = seed.wrapping_mul(0x9e37_79b9_7f4a_7c15) | 1;
    let records = (0..train + test).map(|k| synthetic_digit((k % 10) as u8, &mut state)).collect();
    Dataset::new(records, train).expect("train within length")
}

pub fn dataset_from_idx(images: &[u8], labels: &[u8], train: usize, test: usize) -> Result<Dataset, String> {
    let path = std::path::Path::new("upload");
    let pixels = parse_idx_images(images, path).map_err(|e| e.to_string())?;
    let labels = parse_idx_labels(labels, path).map_err(|e| e.to_string())?;
    let n = (train + test).min(labels.len()).min(pixels.len() / PIXELS);
    if n <= train {
        return Err(format!("upload has {n} images, need more than {train}"));
    }
    let records = (0..n)
        .map(|k| ImageRecord::from_slice(&pixels[k * PIXELS..(k + 1) * PIXELS], labels[k]).ok_or("label out of range"))
        .collect::<Result<Vec<_>, _>>()?;
    Dataset::new(records, train).map_err(|e| e.to_string())
}

/// Input spikes of one drawn image as flat `(offset, pixel)` pairs.
pub fn raster(pixels: &[u8]) -> Result<Vec<u32>, String> {
    let record = ImageRecord::from_slice(pixels, 0).ok_or(format!("expected {PIXELS} pixels, got {}", pixels.len()))?;
    Ok(encode_image(&record, 0, &EncodingParams::default())
        .into_iter()
        .flat_map(|e| match e.node {
            InputNode::Pixel(p) => [e.time as u32, u32::from(p)],
            InputNode::Class(_) => unreachable!("images carry no label spikes"),
        })
        .collect())
}

/// One-line-per-item summary of a config document.
pub fn inspect(xml: &str) -> String {
    let doc = match parse_config(xml) {
        Ok(d) => d,
        Err(e) => return format!("parse error: {e}"),
    };
    let mut out = String::new();
    for r in &doc.receptors {
        out.push_str(&format!("receptor {} n={}\n", r.name, r.n));
    }
    for s in &doc.network.sections {
        out.push_str(&format!("section {} n={} chartime={}\n", s.name, s.n, s.chartime));
    }
    match build_network(&doc, 0) {
        Ok(net) => {
            for l in net.links() {
                out.push_str(&format!(
                    "link {} -> {} {:?} {:?} synapses={} delay={}\n",
                    net.endpoint_name(l.from),
                    net.section_name(l.to),
                    l.kind,
                    l.policy,
                    l.synapse_count(),
                    l.delay
                ));
            }
        }
        Err(e) => out.push_str(&format!("build error: {e}\n")),
    }
    out
}

/// Live training session over a small dataset.
pub struct Session {
    network: Network,
    dataset: Dataset,
    params: EncodingParams,
    out: usize,
    next: usize,
    correct: usize,
}

impl Session {
    pub fn new(doc: &ConfigDocument, dataset: Dataset, seed: u64) -> Result<Self, String> {
        let params = encoding_params(doc).map_err(|e| e.to_string())?;
        let network = build_network(doc, seed).map_err(|e| e.to_string())?;
        let out = network.section_index(readout_section(doc).unwrap_or("OUT")).ok_or("no readout section")?;
        Ok(Self { network, dataset, params, out, next: 0, correct: 0 })
    }

    /// Runs one window with or without a label and returns the output
    /// spike counts per class.
    fn window(&mut self, record: &ImageRecord, learn: bool) -> Result<Vec<u32>, String> {
        let index = self.network.clock() / self.params.period();
        let events = encode_window(record, index, &self.params, learn);
        let start = self.network.clock();
        // drawn images can interleave with training, so the cutoff follows the clock
        self.network.set_learning_until(if learn { start + self.params.period() } else { start });
        let (out, classes) = (self.out, self.network.class_dim());
        let mut counts = vec![0u32; classes];
        run(
            &mut self.network,
            &mut events.into_iter().peekable(),
            start,
            start + self.params.period(),
            learn,
            |_, fired| {
                for &n in &fired[out] {
                    counts[n as usize % classes] += 1;
                }
            },
        )
        .map_err(|e| e.to_string())?;
        Ok(counts)
    }

    /// Presents up to `n` more dataset images and returns how many ran.
    pub fn advance(&mut self, n: usize) -> Result<usize, String> {
        let stop = (self.next + n).min(self.dataset.len());
        let ran = stop - self.next;
        while self.next < stop {
            let record = self.dataset.records()[self.next].clone();
            let training = self.next < self.dataset.train_count();
            let counts = self.window(&record, training)?;
            if !training && classify_window(&counts) == Some(record.label()) {
                self.correct += 1;
            }
            self.next += 1;
        }
        Ok(ran)
    }

    /// Classifies a drawn image without learning.
    pub fn classify(&mut self, pixels: &[u8]) -> Result<Vec<u32>, String> {
        let record = ImageRecord::from_slice(pixels, 0).ok_or(format!("expected {PIXELS} pixels"))?;
        self.window(&record, false)
    }

    pub fn trained(&self) -> usize {
        self.next.min(self.dataset.train_count())
    }

    pub fn tested(&self) -> usize {
        self.next.saturating_sub(self.dataset.train_count())
    }

    pub fn accuracy(&self) -> f64 {
        if self.tested() == 0 {
            0.0
        } else {
            self.correct as f64 / self.tested() as f64
        }
    }

    pub fn grid(&self) -> Result<WeightGrid, String> {
        let s = self.network.plastic_section().ok_or("no plastic section")?;
        WeightGrid::from_matrix(self.network.plastic_into(s).expect("plastic"), self.network.class_dim())
            .map_err(|e| e.to_string())
    }
}

fn js(e: String) -> JsError {
    JsError::new(&e)
}

#[wasm_bindgen(js_name = spikeRaster)]
pub fn spike_raster(pixels: &[u8]) -> Result<Vec<u32>, JsError> {
    raster(pixels).map_err(js)
}

#[wasm_bindgen(js_name = inspectConfig)]
pub fn inspect_config(xml: &str) -> String {
    inspect(xml)
}

#[wasm_bindgen(js_name = referenceConfig)]
pub fn reference_config_xml() -> String {
    colanet::config::REFERENCE_CONFIG.to_string()
}

#[wasm_bindgen(js_name = syntheticDigit)]
pub fn synthetic_digit_pixels(label: u8, seed: u64) -> Vec<u8> {
    let mut state = seed | 1;
    synthetic_digit(label, &mut state).pixels().to_vec()
}

#[wasm_bindgen]
pub struct Demo(Session);

#[wasm_bindgen]
impl Demo {
    /// Session on procedurally drawn digits.
    #[wasm_bindgen(js_name = synthetic)]
    pub fn synthetic(train: usize, test: usize, seed: u64) -> Result<Demo, JsError> {
        let doc = colanet::config::reference_config();
        Session::new(&doc, synthetic_dataset(train, test, seed), seed).map(Demo).map_err(js)
    }

    /// Session on uploaded IDX files.
    #[wasm_bindgen(js_name = fromIdx)]
    pub fn from_idx(images: &[u8], labels: &[u8], train: usize, test: usize, seed: u64) -> Result<Demo, JsError> {
        let ds = dataset_from_idx(images, labels, train, test).map_err(js)?;
        Session::new(&colanet::config::reference_config(), ds, seed).map(Demo).map_err(js)
    }

    pub fn advance(&mut self, n: usize) -> Result<usize, JsError> {
        self.0.advance(n).map_err(js)
    }

    pub fn classify(&mut self, pixels: &[u8]) -> Result<Vec<u32>, JsError> {
        self.0.classify(pixels).map_err(js)
    }

    pub fn trained(&self) -> usize {
        self.0.trained()
    }

    pub fn tested(&self) -> usize {
        self.0.tested()
    }

    pub fn accuracy(&self) -> f64 {
        self.0.accuracy()
    }

    /// RGBA pixels of the weight grid, `gridWidth` x `gridHeight`.
    #[wasm_bindgen(js_name = weightsRgba)]
    pub fn weights_rgba(&self) -> Result<Vec<u8>, JsError> {
        let grid = self.0.grid().map_err(js)?;
        Ok(grid.rgb().chunks(3).flat_map(|p| [p[0], p[1], p[2], 255]).collect())
    }

    #[wasm_bindgen(js_name = gridWidth)]
    pub fn grid_width(&self) -> usize {
        self.0.grid().map_or(0, |g| g.width())
    }

    #[wasm_bindgen(js_name = gridHeight)]
    pub fn grid_height(&self) -> usize {
        self.0.grid().map_or(0, |g| g.height())
    }
}
