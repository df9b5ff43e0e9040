//! Semantic and timeliness metrics: BLEU, CIDEr, cosine sentence similarity,
//! and time-averaged AoI / AoII over receiver traces.
//!
//! BLEU is unsmoothed: a zero clipped match count at any order makes the score
//! zero. CIDEr is reported unscaled so that every semantic score lies in
//! `[0, 1]`. Trace averages use exact piecewise-linear integrals.

use std::collections::HashMap;
use std::path::Path;

use serde::Deserialize;

use crate::error::{Error, Result};

/// A tokenized sentence. Tokens compare by exact string equality.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct TokenSeq(Vec<String>);

impl TokenSeq {
    pub fn new<S: Into<String>>(tokens: impl IntoIterator<Item = S>) -> Self {
        TokenSeq(tokens.into_iter().map(Into::into).collect())
    }

    /// Whitespace split and lowercase. No stemming or punctuation handling.
    pub fn parse(text: &str) -> Self {
        TokenSeq(text.split_whitespace().map(str::to_lowercase).collect())
    }

    pub fn tokens(&self) -> &[String] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Counts of every contiguous `n`-gram.
    pub fn ngram_counts(&self, n: usize) -> HashMap<&[String], usize> {
        let mut counts = HashMap::new();
        if n == 0 || n > self.0.len() {
            return counts;
        }
        for gram in self.0.windows(n) {
            *counts.entry(gram).or_insert(0) += 1;
        }
        counts
    }
}

impl std::fmt::Display for TokenSeq {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0.join(" "))
    }
}

fn check_sentences(candidate: &TokenSeq, references: &[TokenSeq], max_n: usize) -> Result<()> {
    if candidate.is_empty() {
        return Err(Error::invalid("candidate sentence is empty"));
    }
    if references.is_empty() {
        return Err(Error::invalid("at least one reference is required"));
    }
    if let Some(i) = references.iter().position(TokenSeq::is_empty) {
        return Err(Error::invalid(format!("reference {i} is empty")));
    }
    if max_n == 0 || max_n > candidate.len() {
        return Err(Error::invalid(format!(
            "max_n = {max_n} must lie in 1..={}",
            candidate.len()
        )));
    }
    Ok(())
}

/// Clipped n-gram statistics behind a BLEU score.
#[derive(Debug, Clone, PartialEq)]
pub struct BleuStats {
    /// Clipped matches for n = 1..=max_n.
    pub matches: Vec<usize>,
    /// Candidate n-gram totals for n = 1..=max_n.
    pub totals: Vec<usize>,
    pub candidate_len: usize,
    /// Reference length closest to the candidate length (shorter on ties).
    pub reference_len: usize,
}

impl BleuStats {
    pub fn brevity_penalty(&self) -> f64 {
        let c = self.candidate_len as f64;
        let r = self.reference_len as f64;
        if self.candidate_len < self.reference_len {
            (1.0 - r / c).exp()
        } else {
            1.0
        }
    }

    /// Brevity penalty times the geometric mean of modified precisions.
    pub fn score(&self) -> f64 {
        if self.matches.contains(&0) {
            return 0.0;
        }
        let order = self.matches.len() as f64;
        let log_sum: f64 = self
            .matches
            .iter()
            .zip(&self.totals)
            .map(|(&m, &t)| (m as f64 / t as f64).ln())
            .sum();
        self.brevity_penalty() * (log_sum / order).exp()
    }
}

pub fn bleu_stats(candidate: &TokenSeq, references: &[TokenSeq], max_n: usize) -> Result<BleuStats> {
    check_sentences(candidate, references, max_n)?;
    let mut matches = Vec::with_capacity(max_n);
    let mut totals = Vec::with_capacity(max_n);
    for n in 1..=max_n {
        let cand = candidate.ngram_counts(n);
        let ref_counts: Vec<_> = references.iter().map(|r| r.ngram_counts(n)).collect();
        let clipped: usize = cand
            .iter()
            .map(|(gram, &count)| {
                let max_ref = ref_counts
                    .iter()
                    .map(|rc| rc.get(gram).copied().unwrap_or(0))
                    .max()
                    .unwrap_or(0);
                count.min(max_ref)
            })
            .sum();
        matches.push(clipped);
        totals.push(candidate.len() + 1 - n);
    }
    let c = candidate.len();
    let reference_len = references
        .iter()
        .map(TokenSeq::len)
        .min_by_key(|&r| (r.abs_diff(c), r))
        .expect("references checked non-empty");
    Ok(BleuStats {
        matches,
        totals,
        candidate_len: c,
        reference_len,
    })
}

/// Sentence BLEU with uniform weights over n = 1..=max_n.
pub fn bleu(candidate: &TokenSeq, references: &[TokenSeq], max_n: usize) -> Result<f64> {
    Ok(bleu_stats(candidate, references, max_n)?.score())
}

/// CIDEr: mean over n = 1..=max_n of the TF-IDF cosine between the candidate
/// and each reference, averaged over references.
///
/// Document frequencies come from the reference set. IDF is smoothed as
/// `ln((1 + M) / (1 + df)) + 1` so that a lone reference still carries
/// weight.
pub fn cider(candidate: &TokenSeq, references: &[TokenSeq], max_n: usize) -> Result<f64> {
    check_sentences(candidate, references, max_n)?;
    let docs = references.len() as f64;
    let mut total = 0.0;
    for n in 1..=max_n {
        let ref_counts: Vec<_> = references.iter().map(|r| r.ngram_counts(n)).collect();
        let mut df: HashMap<&[String], usize> = HashMap::new();
        for rc in &ref_counts {
            for gram in rc.keys() {
                *df.entry(gram).or_insert(0) += 1;
            }
        }
        let idf = |gram: &[String]| {
            let d = df.get(gram).copied().unwrap_or(0) as f64;
            ((1.0 + docs) / (1.0 + d)).ln() + 1.0
        };
        let weigh = |counts: &HashMap<&[String], usize>| -> HashMap<Vec<String>, f64> {
            counts.iter().map(|(g, &c)| (g.to_vec(), c as f64 * idf(g))).collect()
        };
        let cand = weigh(&candidate.ngram_counts(n));
        let cand_norm = norm(cand.values());
        let mut per_order = 0.0;
        for rc in &ref_counts {
            let rv = weigh(rc);
            let ref_norm = norm(rv.values());
            if cand_norm == 0.0 || ref_norm == 0.0 {
                continue;
            }
            let mut grams: Vec<_> = cand.keys().collect();
            grams.sort();
            let dot: f64 = grams
                .into_iter()
                .map(|g| cand[g] * rv.get(g).copied().unwrap_or(0.0))
                .sum();
            per_order += dot / (cand_norm * ref_norm);
        }
        total += per_order / docs;
    }
    Ok(total / max_n as f64)
}

fn norm<'a>(values: impl Iterator<Item = &'a f64>) -> f64 {
    let mut v: Vec<f64> = values.copied().collect();
    // HashMap order is random; sort for bit-stable sums.
    v.sort_by(f64::total_cmp);
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// A real-valued semantic feature vector.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingVec(Vec<f64>);

impl EmbeddingVec {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::invalid("embedding must have dimension >= 1"));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("embedding has non-finite entries"));
        }
        Ok(EmbeddingVec(values))
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|x| x * x).sum::<f64>().sqrt()
    }
}

/// Cosine similarity of two feature vectors.
pub fn sentence_similarity(a: &EmbeddingVec, b: &EmbeddingVec) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::invalid(format!(
            "dimension mismatch: {} vs {}",
            a.dim(),
            b.dim()
        )));
    }
    let (na, nb) = (a.norm(), b.norm());
    if na == 0.0 || nb == 0.0 {
        return Err(Error::invalid("cosine similarity of a zero vector"));
    }
    let dot: f64 = a.0.iter().zip(&b.0).map(|(x, y)| x * y).sum();
    Ok((dot / (na * nb)).clamp(-1.0, 1.0))
}

/// One change point of a receiver trace. The state holds until the next
/// event.
#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct TraceEvent {
    #[serde(rename = "t")]
    pub timestamp: f64,
    pub source: String,
    pub estimate: String,
    /// Generation time of the freshest update held by the receiver.
    #[serde(rename = "gen_time")]
    pub freshest_generation: f64,
}

impl TraceEvent {
    pub fn new(
        timestamp: f64,
        source: impl Into<String>,
        estimate: impl Into<String>,
        freshest_generation: f64,
    ) -> Self {
        TraceEvent {
            timestamp,
            source: source.into(),
            estimate: estimate.into(),
            freshest_generation,
        }
    }

    fn is_correct(&self) -> bool {
        self.source == self.estimate
    }
}

/// Time-ordered receiver trace starting at `t = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct StateTrace {
    events: Vec<TraceEvent>,
}

impl StateTrace {
    pub fn new(events: Vec<TraceEvent>) -> Result<Self> {
        let first = events.first().ok_or_else(|| Error::invalid("empty trace"))?;
        if first.timestamp != 0.0 {
            return Err(Error::invalid(format!(
                "trace must start at t = 0, first event is at {}",
                first.timestamp
            )));
        }
        for (i, e) in events.iter().enumerate() {
            if !e.timestamp.is_finite() || !e.freshest_generation.is_finite() {
                return Err(Error::invalid(format!("event {i}: non-finite time")));
            }
            if e.freshest_generation > e.timestamp {
                return Err(Error::invalid(format!(
                    "event {i}: generation time {} after timestamp {}",
                    e.freshest_generation, e.timestamp
                )));
            }
            if i > 0 && e.timestamp <= events[i - 1].timestamp {
                return Err(Error::invalid(format!(
                    "event {i}: timestamps must be strictly increasing"
                )));
            }
        }
        Ok(StateTrace { events })
    }

    /// Reads `t,source,estimate,gen_time` CSV.
    pub fn from_csv(path: &Path) -> Result<Self> {
        let mut reader = csv::Reader::from_path(path)?;
        let mut events = Vec::new();
        for (i, row) in reader.deserialize::<TraceEvent>().enumerate() {
            let event = row.map_err(|e| Error::Parse {
                path: path.to_path_buf(),
                line: e.position().map_or(i as u64 + 2, |p| p.line()),
                message: e.to_string(),
            })?;
            events.push(event);
        }
        StateTrace::new(events).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: 0,
            message: e.to_string(),
        })
    }

    pub fn events(&self) -> &[TraceEvent] {
        &self.events
    }

    /// Constant-state intervals clipped to `[0, horizon]`.
    fn segments(&self, horizon: f64) -> impl Iterator<Item = (f64, f64, &TraceEvent)> {
        let n = self.events.len();
        self.events.iter().enumerate().filter_map(move |(i, e)| {
            let start = e.timestamp;
            let end = if i + 1 < n {
                self.events[i + 1].timestamp.min(horizon)
            } else {
                horizon
            };
            (start < end).then_some((start, end, e))
        })
    }
}

fn check_horizon(horizon: f64) -> Result<()> {
    if !(horizon.is_finite() && horizon > 0.0) {
        return Err(Error::invalid(format!("horizon {horizon} must be positive")));
    }
    Ok(())
}

/// Time-average of `AoI(t) = t - freshest_generation(t)` over `[0, horizon]`.
pub fn average_aoi(trace: &StateTrace, horizon: f64) -> Result<f64> {
    check_horizon(horizon)?;
    let area: f64 = trace
        .segments(horizon)
        .map(|(a, b, e)| (b - a) * (0.5 * (a + b) - e.freshest_generation))
        .sum();
    Ok(area / horizon)
}

/// Time-average of `AoII(t) = (t - v(t)) * 1[source != estimate]`, where
/// `v(t)` is the last instant the estimate was correct.
pub fn average_aoii(trace: &StateTrace, horizon: f64) -> Result<f64> {
    check_horizon(horizon)?;
    let mut wrong_since: Option<f64> = None;
    let mut area = 0.0;
    for (a, b, e) in trace.segments(horizon) {
        if e.is_correct() {
            wrong_since = None;
            continue;
        }
        let v = *wrong_since.get_or_insert(a);
        // integral of (t - v) over [a, b]
        area += (b - a) * (0.5 * (a + b) - v);
    }
    Ok(area / horizon)
}

/// Reads one sentence per line.
pub fn read_sentences(path: &Path) -> Result<Vec<TokenSeq>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
    Ok(text.lines().map(TokenSeq::parse).collect())
}

/// Reads embedding vectors, one CSV row of floats each.
pub fn read_embeddings(path: &Path) -> Result<Vec<EmbeddingVec>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(path)?;
    let mut out = Vec::new();
    for row in reader.records() {
        let row = row?;
        let line = row.position().map_or(0, |p| p.line());
        let parse_err = |message: String| Error::Parse {
            path: path.to_path_buf(),
            line,
            message,
        };
        let values = row
            .iter()
            .map(|f| f.parse::<f64>().map_err(|e| parse_err(format!("{f:?}: {e}"))))
            .collect::<Result<Vec<_>>>()?;
        out.push(EmbeddingVec::new(values).map_err(|e| parse_err(e.to_string()))?);
    }
    Ok(out)
}
