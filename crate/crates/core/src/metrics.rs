//! Corpus BLEU-1..4 and ROUGE-L over token sequences.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use crate::decoder::{decode_beam, decode_greedy};
use crate::error::{Error, Result};
use crate::scenegraph::SceneRecord;
use crate::training::Checkpoint;

/// Recall weight of the LCS F-measure.
pub const ROUGE_BETA: f64 = 1.2;

fn check_corpus<T>(candidates: &[Vec<T>], references: &[Vec<Vec<T>>]) -> Result<()> {
    if candidates.is_empty() {
        return Err(Error::Argument("empty candidate set".into()));
    }
    if candidates.len() != references.len() {
        return Err(Error::Argument(alloc::format!(
            "{} candidates but {} reference sets",
            candidates.len(),
            references.len()
        )));
    }
    if let Some(i) = references.iter().position(Vec::is_empty) {
        return Err(Error::Argument(alloc::format!("candidate {i} has no reference")));
    }
    Ok(())
}

fn ngram_counts<T: Ord>(tokens: &[T], n: usize) -> BTreeMap<&[T], usize> {
    let mut counts = BTreeMap::new();
    if tokens.len() >= n {
        for g in tokens.windows(n) {
            *counts.entry(g).or_insert(0) += 1;
        }
    }
    counts
}

/// Reference length closest to `c`; the shorter one on ties.
fn closest_ref_len<T>(c: usize, refs: &[Vec<T>]) -> usize {
    refs.iter()
        .map(Vec::len)
        .min_by_key(|&r| (r.abs_diff(c), r))
        .expect("non-empty reference set")
}

/// Corpus BLEU with orders `1..=n`: pooled clipped n-gram precisions,
/// geometric mean, brevity penalty `min(1, e^{1 - r/c})`. No smoothing,
/// so any zero precision gives 0.
pub fn bleu_n<T: Ord>(candidates: &[Vec<T>], references: &[Vec<Vec<T>>], n: usize) -> Result<f64> {
    if !(1..=4).contains(&n) {
        return Err(Error::Argument(alloc::format!("BLEU order {n} outside 1..=4")));
    }
    check_corpus(candidates, references)?;
    let mut matched = [0usize; 4];
    let mut total = [0usize; 4];
    let (mut c, mut r) = (0usize, 0usize);
    for (cand, refs) in candidates.iter().zip(references) {
        c += cand.len();
        r += closest_ref_len(cand.len(), refs);
        for k in 1..=n {
            let mut max_ref: BTreeMap<&[T], usize> = BTreeMap::new();
            for rf in refs {
                for (g, cnt) in ngram_counts(rf, k) {
                    let e = max_ref.entry(g).or_insert(0);
                    *e = (*e).max(cnt);
                }
            }
            for (g, cnt) in ngram_counts(cand, k) {
                matched[k - 1] += cnt.min(max_ref.get(g).copied().unwrap_or(0));
            }
            total[k - 1] += cand.len().saturating_sub(k - 1);
        }
    }
    if c == 0 {
        return Ok(0.0);
    }
    // Orders longer than every candidate have no n-grams to judge and are
    // left out of the mean; they form a suffix since counts shrink with k.
    let orders = total[..n].iter().take_while(|&&t| t > 0).count();
    let mut log_sum = 0.0;
    for k in 0..orders {
        if matched[k] == 0 {
            return Ok(0.0);
        }
        log_sum += libm::log(matched[k] as f64 / total[k] as f64);
    }
    let bp = if c > r { 1.0 } else { libm::exp(1.0 - r as f64 / c as f64) };
    Ok(bp * libm::exp(log_sum / orders as f64))
}

/// Length of the longest common subsequence.
pub fn lcs_len<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    let mut row = alloc::vec![0usize; b.len() + 1];
    for x in a {
        let mut diag = 0;
        for (j, y) in b.iter().enumerate() {
            let up = row[j + 1];
            row[j + 1] = if x == y { diag + 1 } else { up.max(row[j]) };
            diag = up;
        }
    }
    row[b.len()]
}

/// LCS F-measure of one pair, `(1+β²)PR / (R + β²P)`.
pub fn rouge_l_pair<T: PartialEq>(candidate: &[T], reference: &[T]) -> f64 {
    let l = lcs_len(candidate, reference);
    if l == 0 {
        return 0.0;
    }
    let p = l as f64 / candidate.len() as f64;
    let r = l as f64 / reference.len() as f64;
    let b2 = ROUGE_BETA * ROUGE_BETA;
    (1.0 + b2) * p * r / (r + b2 * p)
}

fn rouge_l_example<T: PartialEq>(candidate: &[T], refs: &[Vec<T>]) -> f64 {
    refs.iter()
        .map(|r| rouge_l_pair(candidate, r))
        .fold(0.0, f64::max)
}

/// Summation in sorted order, so the result does not depend on record order.
fn order_free_mean(mut xs: Vec<f64>) -> f64 {
    let n = xs.len() as f64;
    xs.sort_by(f64::total_cmp);
    xs.iter().sum::<f64>() / n
}

/// Mean over candidates of the best ROUGE-L against any of its references.
pub fn rouge_l<T: PartialEq>(candidates: &[Vec<T>], references: &[Vec<Vec<T>>]) -> Result<f64> {
    check_corpus(candidates, references)?;
    Ok(order_free_mean(
        candidates
            .iter()
            .zip(references)
            .map(|(c, r)| rouge_l_example(c, r))
            .collect(),
    ))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExampleScore {
    pub id: String,
    pub candidate: Vec<String>,
    /// BLEU-4 of this example alone.
    pub bleu_4: f64,
    pub rouge_l: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricReport {
    /// BLEU-1 through BLEU-4.
    pub bleu: [f64; 4],
    pub rouge_l: f64,
    pub examples: Vec<ExampleScore>,
    pub candidates: usize,
    pub references: usize,
}

impl MetricReport {
    pub fn bleu_4(&self) -> f64 {
        self.bleu[3]
    }
}

/// Scores already-decoded captions.
pub fn report_from_outputs(
    ids: &[String],
    candidates: &[Vec<String>],
    references: &[Vec<Vec<String>>],
) -> Result<MetricReport> {
    check_corpus(candidates, references)?;
    if ids.len() != candidates.len() {
        return Err(Error::Argument("one id per candidate required".into()));
    }
    let mut bleu = [0.0; 4];
    for (n, b) in bleu.iter_mut().enumerate() {
        *b = bleu_n(candidates, references, n + 1)?;
    }
    let examples = ids
        .iter()
        .zip(candidates)
        .zip(references)
        .map(|((id, c), r)| {
            Ok(ExampleScore {
                id: id.clone(),
                candidate: c.clone(),
                bleu_4: bleu_n(core::slice::from_ref(c), core::slice::from_ref(r), 4)?,
                rouge_l: rouge_l_example(c, r),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(MetricReport {
        bleu,
        rouge_l: rouge_l(candidates, references)?,
        examples,
        candidates: candidates.len(),
        references: references.iter().map(Vec::len).sum(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DecodeConfig {
    /// 1 decodes greedily.
    pub beam: usize,
    pub max_len: usize,
}

impl Default for DecodeConfig {
    fn default() -> Self {
        DecodeConfig { beam: 1, max_len: 32 }
    }
}

/// Best caption for `rec` under `cfg`, as token ids without markers.
pub fn decode(ckpt: &Checkpoint, rec: &SceneRecord, cfg: &DecodeConfig) -> Result<Vec<usize>> {
    if cfg.beam <= 1 {
        if cfg.beam == 0 {
            return Err(Error::Argument("beam width must be at least 1".into()));
        }
        decode_greedy(&ckpt.params, rec, cfg.max_len)
    } else {
        let hyps = decode_beam(&ckpt.params, rec, cfg.beam, cfg.max_len)?;
        Ok(hyps.into_iter().next().map(|h| h.tokens).unwrap_or_default())
    }
}

/// Decodes every record and scores the captions against its references.
pub fn evaluate(ckpt: &Checkpoint, data: &[SceneRecord], cfg: &DecodeConfig) -> Result<MetricReport> {
    let mut ids = Vec::with_capacity(data.len());
    let mut cands = Vec::with_capacity(data.len());
    let mut refs = Vec::with_capacity(data.len());
    for rec in data {
        if rec.captions.is_empty() {
            return Err(Error::Argument(alloc::format!("scene {} has no reference caption", rec.id)));
        }
        let tokens = decode(ckpt, rec, cfg)?;
        ids.push(rec.id.clone());
        cands.push(ckpt.vocab.decode(&tokens)?);
        refs.push(rec.captions.clone());
    }
    report_from_outputs(&ids, &cands, &refs)
}
