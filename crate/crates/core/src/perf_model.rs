//! Semantic quality versus encoder output dimension, and payload sizes.

use std::io::Write;
use std::path::Path;

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::fmt::f8;

/// Largest encoder output dimension in the measured table.
pub const MAX_DIMENSION: u32 = 16;

/// Table format version of [`EMBEDDED_SIMILARITY`] / [`EMBEDDED_BLEU`].
pub const CURVE_VERSION: u32 = 1;

/// Sentence similarity for D = 1..=16.
pub const EMBEDDED_SIMILARITY: [f64; 16] = [
    0.39550235, 0.40009948, 0.40945041, 0.41866887, 0.42247792, 0.42490115, 0.4295931, 0.43368545, 0.43733177,
    0.4519554, 0.47728359, 0.51547686, 0.55437698, 0.61085957, 0.7460733, 0.86169747,
];

/// 1-gram BLEU for D = 1..=16. Not monotone (dips at D = 3).
pub const EMBEDDED_BLEU: [f64; 16] = [
    0.0944817, 0.09667912, 0.09386748, 0.10047062, 0.10116262, 0.10300542, 0.11076793, 0.11739845, 0.12781957,
    0.15357989, 0.1940025, 0.27020956, 0.34242301, 0.44607532, 0.65054165, 0.82109432,
];

pub const CURVE_CSV_HEADER: &str = "dimension,similarity,bleu_1gram";

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SemanticScore {
    pub similarity: f64,
    pub bleu: f64,
}

/// Dimension to (similarity, 1-gram BLEU) table with exactly 16 entries.
#[derive(Debug, Clone, PartialEq)]
pub struct PerfCurve {
    points: [SemanticScore; 16],
}

impl Default for PerfCurve {
    fn default() -> Self {
        Self::embedded()
    }
}

impl PerfCurve {
    /// The measured sentence-transmission table.
    pub fn embedded() -> Self {
        let points = std::array::from_fn(|i| SemanticScore {
            similarity: EMBEDDED_SIMILARITY[i],
            bleu: EMBEDDED_BLEU[i],
        });
        PerfCurve { points }
    }

    pub fn from_points(points: &[SemanticScore]) -> Result<Self> {
        let points: [SemanticScore; 16] = points
            .try_into()
            .map_err(|_| Error::invalid(format!("curve needs exactly 16 points, got {}", points.len())))?;
        for (i, p) in points.iter().enumerate() {
            for v in [p.similarity, p.bleu] {
                if !(0.0..=1.0).contains(&v) {
                    return Err(Error::invalid(format!("D={}: value {v} outside [0,1]", i + 1)));
                }
            }
            if i > 0 && p.similarity <= points[i - 1].similarity {
                return Err(Error::invalid(format!(
                    "similarity must strictly increase, fails at D={}",
                    i + 1
                )));
            }
        }
        Ok(PerfCurve { points })
    }

    /// Exact table entry for dimension `d`.
    pub fn lookup(&self, d: u32) -> Result<SemanticScore> {
        if !(1..=MAX_DIMENSION).contains(&d) {
            return Err(Error::OutOfRange {
                what: "dimension",
                value: d as i64,
                range: format!("1..={MAX_DIMENSION}"),
            });
        }
        Ok(self.points[d as usize - 1])
    }

    /// `(dimension, score)` pairs in ascending dimension.
    pub fn iter(&self) -> impl Iterator<Item = (u32, SemanticScore)> + '_ {
        self.points.iter().enumerate().map(|(i, p)| (i as u32 + 1, *p))
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "{CURVE_CSV_HEADER}")?;
        for (d, p) in self.iter() {
            writeln!(w, "{d},{},{}", f8(p.similarity), f8(p.bleu))?;
        }
        Ok(())
    }

    pub fn from_csv(path: &Path) -> Result<Self> {
        #[derive(Deserialize)]
        struct Row {
            dimension: u32,
            similarity: f64,
            bleu_1gram: f64,
        }
        let mut reader = csv::Reader::from_path(path)?;
        let mut points = Vec::new();
        for (i, row) in reader.deserialize::<Row>().enumerate() {
            let row = row?;
            if row.dimension as usize != i + 1 {
                return Err(Error::Parse {
                    path: path.to_path_buf(),
                    line: i as u64 + 2,
                    message: format!("expected dimension {}, found {}", i + 1, row.dimension),
                });
            }
            points.push(SemanticScore {
                similarity: row.similarity,
                bleu: row.bleu_1gram,
            });
        }
        Self::from_points(&points)
    }
}

/// Payload of one encoded sentence: `words x dimension` features of
/// `bits_per_feature` bits each.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PayloadModel {
    words_per_sentence: u64,
    bits_per_feature: u64,
    max_dimension: u32,
}

impl Default for PayloadModel {
    fn default() -> Self {
        PayloadModel {
            words_per_sentence: 32,
            bits_per_feature: 32,
            max_dimension: MAX_DIMENSION,
        }
    }
}

impl PayloadModel {
    pub fn new(words_per_sentence: u64, bits_per_feature: u64, max_dimension: u32) -> Result<Self> {
        if words_per_sentence == 0 || bits_per_feature == 0 {
            return Err(Error::invalid("words_per_sentence and bits_per_feature must be >= 1"));
        }
        if !(1..=MAX_DIMENSION).contains(&max_dimension) {
            return Err(Error::OutOfRange {
                what: "max_dimension",
                value: max_dimension as i64,
                range: format!("1..={MAX_DIMENSION}"),
            });
        }
        Ok(PayloadModel {
            words_per_sentence,
            bits_per_feature,
            max_dimension,
        })
    }

    pub fn words_per_sentence(&self) -> u64 {
        self.words_per_sentence
    }

    pub fn bits_per_feature(&self) -> u64 {
        self.bits_per_feature
    }

    pub fn max_dimension(&self) -> u32 {
        self.max_dimension
    }

    fn bits_per_dimension(&self) -> u64 {
        self.words_per_sentence * self.bits_per_feature
    }

    pub fn payload_bits(&self, d: u32) -> Result<u64> {
        if !(1..=self.max_dimension).contains(&d) {
            return Err(Error::OutOfRange {
                what: "dimension",
                value: d as i64,
                range: format!("1..={}", self.max_dimension),
            });
        }
        Ok(self.bits_per_dimension() * d as u64)
    }

    /// Largest dimension whose payload fits `bit_budget`, or `None` when even
    /// a single dimension does not fit.
    pub fn feasible_dimension(&self, bit_budget: u64) -> Option<u32> {
        let d = (bit_budget / self.bits_per_dimension()).min(self.max_dimension as u64);
        (d >= 1).then_some(d as u32)
    }
}
