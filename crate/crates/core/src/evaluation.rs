//! Readout, accuracy metrics, prediction files and the learnt weight grid.

use std::fmt::Write as _;

use thiserror::Error;

use crate::data::{CLASSES, IMAGE_SIDE, PIXELS};
use crate::plasticity::{PlasticMatrix, WeightRow};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("no predictions to evaluate")]
    Empty,
    #[error("actual class {0} out of range")]
    BadActual(u8),
    #[error("predicted class {0} out of range")]
    BadPredicted(u8),
    #[error("line {line}: {reason}")]
    Csv { line: usize, reason: String },
    #[error("weight table is empty or has no plastic section")]
    NoWeights,
}

/// Predicted class for one image window: the most active output class,
/// lowest index on ties, `None` when the output stayed silent.
pub fn classify_window(counts: &[u32]) -> Option<u8> {
    let (best, &max) = counts.iter().enumerate().rev().max_by_key(|&(_, c)| c)?;
    (max > 0).then_some(best as u8)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Prediction {
    pub image_index: usize,
    pub predicted: Option<u8>,
    pub actual: u8,
}

impl Prediction {
    pub fn is_correct(&self) -> bool {
        self.predicted == Some(self.actual)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ClassMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f_score: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Metrics {
    pub accuracy: f64,
    pub per_class: Vec<ClassMetrics>,
    pub n_test: usize,
    pub errors: usize,
}

/// Harmonic mean of precision and recall, 0 when either is 0.
pub fn f_score(precision: f64, recall: f64) -> f64 {
    if precision * recall > 0.0 {
        2.0 / (1.0 / precision + 1.0 / recall)
    } else {
        0.0
    }
}

/// Accuracy and per-class precision/recall/F. Silent windows count as
/// errors and are attributed to no class.
pub fn evaluate(predictions: &[Prediction]) -> Result<Metrics, EvalError> {
    if predictions.is_empty() {
        return Err(EvalError::Empty);
    }
    let mut hits = [0usize; CLASSES];
    let mut predicted = [0usize; CLASSES];
    let mut actual = [0usize; CLASSES];
    for p in predictions {
        let a = p.actual as usize;
        if a >= CLASSES {
            return Err(EvalError::BadActual(p.actual));
        }
        actual[a] += 1;
        if let Some(c) = p.predicted {
            if c as usize >= CLASSES {
                return Err(EvalError::BadPredicted(c));
            }
            predicted[c as usize] += 1;
            if c == p.actual {
                hits[a] += 1;
            }
        }
    }
    let ratio = |n: usize, d: usize| if d > 0 { n as f64 / d as f64 } else { 0.0 };
    let per_class = (0..CLASSES)
        .map(|c| {
            let precision = ratio(hits[c], predicted[c]);
            let recall = ratio(hits[c], actual[c]);
            ClassMetrics { precision, recall, f_score: f_score(precision, recall) }
        })
        .collect();
    let correct: usize = hits.iter().sum();
    let n = predictions.len();
    Ok(Metrics { accuracy: correct as f64 / n as f64, per_class, n_test: n, errors: n - correct })
}

impl Metrics {
    /// Human-readable summary with accuracy to four decimals.
    pub fn summary(&self) -> String {
        let mut out = format!(
            "accuracy {:.4} ({} errors / {} images)\nclass,precision,recall,f\n",
            self.accuracy, self.errors, self.n_test
        );
        for (c, m) in self.per_class.iter().enumerate() {
            let _ = writeln!(out, "{c},{:.4},{:.4},{:.4}", m.precision, m.recall, m.f_score);
        }
        out
    }
}

pub fn predictions_csv(predictions: &[Prediction]) -> String {
    let mut out = String::from("image_index,predicted,actual\n");
    for p in predictions {
        match p.predicted {
            Some(c) => writeln!(out, "{},{c},{}", p.image_index, p.actual),
            None => writeln!(out, "{},-,{}", p.image_index, p.actual),
        }
        .expect("writing to a String");
    }
    out
}

pub fn parse_predictions_csv(text: &str) -> Result<Vec<Prediction>, EvalError> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    match lines.next() {
        Some((_, h)) if h.trim() == "image_index,predicted,actual" => {}
        _ => return Err(EvalError::Csv { line: 1, reason: "missing header".into() }),
    }
    lines
        .map(|(i, line)| {
            let bad = |reason: &str| EvalError::Csv { line: i + 1, reason: reason.into() };
            let f: Vec<&str> = line.trim().split(',').collect();
            let [idx, pred, act] = f[..] else {
                return Err(bad("expected 3 fields"));
            };
            let predicted = match pred {
                "-" => None,
                s => Some(s.parse().map_err(|_| bad("bad predicted class"))?),
            };
            Ok(Prediction {
                image_index: idx.parse().map_err(|_| bad("bad image index"))?,
                predicted,
                actual: act.parse().map_err(|_| bad("bad actual class"))?,
            })
        })
        .collect()
}

/// Learnt pixel weights of the plastic section arranged as in the figure:
/// one 28x28 tile per neuron, classes across, microcolumns down.
#[derive(Clone, Debug, PartialEq)]
pub struct WeightGrid {
    classes: usize,
    microcolumns: usize,
    /// `weights[neuron * PIXELS + pixel]`, neuron `j` sitting in microcolumn
    /// `j / classes` of class `j % classes`.
    weights: Vec<f64>,
}

impl WeightGrid {
    pub fn zeros(classes: usize, microcolumns: usize) -> Self {
        WeightGrid { classes, microcolumns, weights: vec![0.0; classes * microcolumns * PIXELS] }
    }

    /// Reads a pixel-to-neuron plastic matrix. Absent synapses show as 0.
    pub fn from_matrix(matrix: &PlasticMatrix, classes: usize) -> Result<Self, EvalError> {
        if matrix.n_pre() != PIXELS || classes == 0 || !matrix.n_post().is_multiple_of(classes) {
            return Err(EvalError::NoWeights);
        }
        let mut grid = Self::zeros(classes, matrix.n_post() / classes);
        for (pre, post, w) in matrix.weights() {
            grid.weights[post * PIXELS + pre] = w;
        }
        Ok(grid)
    }

    /// Builds the grid from snapshot rows of one section.
    pub fn from_snapshot(rows: &[WeightRow], classes: usize) -> Result<Self, EvalError> {
        let first = rows.first().ok_or(EvalError::NoWeights)?;
        let n_post = rows.iter().map(|r| r.post + 1).max().unwrap_or(0);
        let microcolumns = n_post.div_ceil(classes);
        let mut grid = Self::zeros(classes, microcolumns);
        for (i, r) in rows.iter().enumerate() {
            if r.section != first.section {
                return Err(EvalError::Csv { line: i + 2, reason: format!("second section {:?}", r.section) });
            }
            if r.pre >= PIXELS {
                return Err(EvalError::Csv { line: i + 2, reason: format!("pre index {} out of range", r.pre) });
            }
            grid.weights[r.post * PIXELS + r.pre] = r.weight;
        }
        Ok(grid)
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn microcolumns(&self) -> usize {
        self.microcolumns
    }

    pub fn weight(&self, microcolumn: usize, class: usize, row: usize, col: usize) -> f64 {
        self.weights[(microcolumn * self.classes + class) * PIXELS + row * IMAGE_SIDE + col]
    }

    pub fn set_weight(&mut self, microcolumn: usize, class: usize, row: usize, col: usize, w: f64) {
        self.weights[(microcolumn * self.classes + class) * PIXELS + row * IMAGE_SIDE + col] = w;
    }

    pub fn width(&self) -> usize {
        self.classes * IMAGE_SIDE
    }

    pub fn height(&self) -> usize {
        self.microcolumns * IMAGE_SIDE
    }

    /// Row-major RGB bytes: red for positive weights, blue for negative,
    /// intensity proportional to `|w| / max|w|`.
    pub fn rgb(&self) -> Vec<u8> {
        let scale = self.weights.iter().fold(0.0f64, |m, w| m.max(w.abs()));
        let (w, h) = (self.width(), self.height());
        let mut out = vec![0u8; w * h * 3];
        for y in 0..h {
            for x in 0..w {
                let v = self.weight(y / IMAGE_SIDE, x / IMAGE_SIDE, y % IMAGE_SIDE, x % IMAGE_SIDE);
                if scale == 0.0 || v == 0.0 {
                    continue;
                }
                let level = (v.abs() / scale * 255.0).round() as u8;
                let px = (y * w + x) * 3;
                if v > 0.0 {
                    out[px] = level;
                } else {
                    out[px + 2] = level;
                }
            }
        }
        out
    }

    /// Binary PPM (P6, maxval 255).
    pub fn to_ppm(&self) -> Vec<u8> {
        let mut out = format!("P6\n{} {}\n255\n", self.width(), self.height()).into_bytes();
        out.extend(self.rgb());
        out
    }

    /// `microcolumn,class,pixel_row,pixel_col,weight`, weights printed in
    /// shortest round-trip form.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("microcolumn,class,pixel_row,pixel_col,weight\n");
        for m in 0..self.microcolumns {
            for c in 0..self.classes {
                for r in 0..IMAGE_SIDE {
                    for col in 0..IMAGE_SIDE {
                        let _ = writeln!(out, "{m},{c},{r},{col},{}", self.weight(m, c, r, col));
                    }
                }
            }
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self, EvalError> {
        let mut rows = Vec::new();
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        match lines.next() {
            Some((_, h)) if h.trim() == "microcolumn,class,pixel_row,pixel_col,weight" => {}
            _ => return Err(EvalError::Csv { line: 1, reason: "missing header".into() }),
        }
        for (i, line) in lines {
            let bad = |reason: &str| EvalError::Csv { line: i + 1, reason: reason.into() };
            let f: Vec<&str> = line.trim().split(',').collect();
            let [m, c, r, col, w] = f[..] else {
                return Err(bad("expected 5 fields"));
            };
            let idx = |s: &str| s.parse::<usize>().map_err(|_| bad("bad index"));
            let (m, c, r, col) = (idx(m)?, idx(c)?, idx(r)?, idx(col)?);
            if r >= IMAGE_SIDE || col >= IMAGE_SIDE {
                return Err(bad("pixel coordinate out of range"));
            }
            rows.push((m, c, r, col, w.parse::<f64>().map_err(|_| bad("bad weight"))?));
        }
        let microcolumns = rows.iter().map(|r| r.0 + 1).max().ok_or(EvalError::NoWeights)?;
        let classes = rows.iter().map(|r| r.1 + 1).max().ok_or(EvalError::NoWeights)?;
        let mut grid = Self::zeros(classes, microcolumns);
        for (m, c, r, col, w) in rows {
            grid.set_weight(m, c, r, col, w);
        }
        Ok(grid)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::plasticity::{PlasticityParams, WeightMap};

    fn pred(i: usize, p: Option<u8>, a: u8) -> Prediction {
        Prediction { image_index: i, predicted: p, actual: a }
    }

    #[test]
    fn classify_examples() {
        assert_eq!(classify_window(&[0, 0, 0, 0, 0, 0, 0, 3, 0, 0]), Some(7));
        assert_eq!(classify_window(&[0; 10]), None);
        assert_eq!(classify_window(&[0, 0, 4, 0, 0, 4, 0, 0, 0, 0]), Some(2));
    }

    #[test]
    fn ties_go_to_lowest_index_for_every_tied_pair() {
        for a in 0..10 {
            for b in a + 1..10 {
                let mut counts = [1u32; 10];
                counts[a] = 5;
                counts[b] = 5;
                assert_eq!(classify_window(&counts), Some(a as u8));
            }
        }
    }

    #[test]
    fn perfect_predictions() {
        let preds: Vec<_> = (0..100).map(|i| pred(i, Some((i % 10) as u8), (i % 10) as u8)).collect();
        let m = evaluate(&preds).unwrap();
        assert_eq!(m.accuracy, 1.0);
        assert!(m.per_class.iter().all(|c| c.f_score == 1.0));
    }

    #[test]
    fn silent_windows_are_errors_and_unpredicted_class_scores_zero() {
        let preds = [pred(0, None, 3), pred(1, Some(1), 1), pred(2, Some(1), 0)];
        let m = evaluate(&preds).unwrap();
        assert!((m.accuracy - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(m.errors, 2);
        assert_eq!(m.per_class[3], ClassMetrics { precision: 0.0, recall: 0.0, f_score: 0.0 });
        assert_eq!(m.per_class[1].precision, 0.5);
        assert_eq!(m.per_class[1].recall, 1.0);
        assert!((m.per_class[1].f_score - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(m.per_class[0].precision, 0.0);
    }

    #[test]
    fn class_zero_is_counted() {
        let m = evaluate(&[pred(0, Some(0), 0)]).unwrap();
        assert_eq!(m.per_class[0].f_score, 1.0);
    }

    #[test]
    fn empty_is_an_error() {
        assert!(matches!(evaluate(&[]), Err(EvalError::Empty)));
    }

    #[test]
    fn prediction_csv_round_trip() {
        let preds = vec![pred(10, Some(3), 3), pred(11, None, 7)];
        let text = predictions_csv(&preds);
        assert_eq!(text, "image_index,predicted,actual\n10,3,3\n11,-,7\n");
        assert_eq!(parse_predictions_csv(&text).unwrap(), preds);
        assert!(parse_predictions_csv("10,3,3\n").is_err());
    }

    fn params() -> PlasticityParams {
        PlasticityParams {
            depression: 0.042,
            dopamine: 0.042,
            dopamine_window: 10,
            eligibility_window: 10,
            learning_until: u64::MAX,
            min_weight: -0.7,
            max_weight: 0.864249,
            resource_ceiling: 1.267,
            map: WeightMap::Clamp,
        }
    }

    #[test]
    fn m15_grid_is_280_by_420() {
        let m = PlasticMatrix::new(PIXELS, 150, params(), |_, _| Some(0.5));
        let grid = WeightGrid::from_matrix(&m, 10).unwrap();
        let ppm = grid.to_ppm();
        let header = b"P6\n280 420\n255\n";
        assert_eq!(&ppm[..header.len()], header);
        assert_eq!(ppm.len(), header.len() + 280 * 420 * 3);
        assert!(grid.rgb().chunks(3).all(|px| px == [255, 0, 0]));
    }

    #[test]
    fn zero_weights_are_black() {
        assert!(WeightGrid::zeros(10, 2).rgb().iter().all(|&b| b == 0));
    }

    #[test]
    fn single_saturated_synapse() {
        let mut m = PlasticMatrix::new(PIXELS, 20, params(), |_, _| Some(0.0));
        // neuron 13: microcolumn 1, class 3; pixel 30: row 1, col 2
        m.set_resource(30, 13, 1.267);
        let grid = WeightGrid::from_matrix(&m, 10).unwrap();
        assert_eq!(grid.weight(1, 3, 1, 2), 0.864249);
        let rgb = grid.rgb();
        let lit: Vec<usize> = rgb.chunks(3).enumerate().filter(|(_, px)| px != &[0, 0, 0]).map(|(i, _)| i).collect();
        let (y, x) = (28 + 1, 3 * 28 + 2);
        assert_eq!(lit, [y * 280 + x]);
        assert_eq!(&rgb[lit[0] * 3..lit[0] * 3 + 3], &[255, 0, 0]);
    }

    #[test]
    fn negative_weights_are_blue() {
        let mut grid = WeightGrid::zeros(10, 1);
        grid.set_weight(0, 0, 0, 0, -0.5);
        grid.set_weight(0, 0, 0, 1, 0.25);
        let rgb = grid.rgb();
        assert_eq!(&rgb[..6], &[0, 0, 255, 128, 0, 0]);
    }

    #[test]
    fn grid_csv_round_trip() {
        let mut grid = WeightGrid::zeros(10, 2);
        grid.set_weight(1, 9, 27, 27, 0.1 + 0.2);
        grid.set_weight(0, 4, 5, 6, -1.0 / 3.0);
        assert_eq!(WeightGrid::from_csv(&grid.to_csv()).unwrap(), grid);
    }

    #[test]
    fn from_snapshot_matches_matrix() {
        let mut m = PlasticMatrix::new(PIXELS, 10, params(), |_, _| Some(0.25));
        m.set_resource(100, 7, -0.3);
        let rows = crate::plasticity::parse_snapshot(&crate::plasticity::snapshot_csv("L", &m)).unwrap();
        assert_eq!(WeightGrid::from_snapshot(&rows, 10).unwrap(), WeightGrid::from_matrix(&m, 10).unwrap());
    }
}
