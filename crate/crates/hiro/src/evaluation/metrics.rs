//! Text-generation and classification metrics, plus the log-of-context-
//! length efficiency adjustment.
//!
//! All generative metrics tokenize through the registered tokenizer and
//! return values in [0, 1]. The METEOR here is `meteor_lite`: unigram
//! alignment by exact match first, then Porter-stem match, with no synonym
//! matching — the synonym stage would need an external lexical database,
//! so it is dropped and the divergence is named in report metadata.

use std::collections::HashMap;
use std::hash::Hash;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tokenize::tokenizer;

/// Generative metric bundle for one candidate/reference comparison.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GenScores {
    pub rouge_l_f1: f64,
    pub bleu1: f64,
    pub bleu4: f64,
    pub meteor: f64,
}

/// Classification metric bundle. `confusion[g][p]` counts examples with
/// gold label index `g` predicted as index `p`, in the order of the label
/// list handed to [`classification_metrics`]. Precision, recall, and F1
/// are macro-averaged over that label list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClsScores {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub confusion: Vec<Vec<u64>>,
}

fn toks(text: &str, tokenizer_id: &str) -> Result<Vec<String>> {
    Ok(tokenizer(tokenizer_id)?
        .tokenize(text)
        .into_iter()
        .map(str::to_string)
        .collect())
}

/// ROUGE-L F1: token-level longest common subsequence, with
/// `P = LCS/|cand|`, `R = LCS/|ref|`, `F1 = 2PR/(P+R)` (0 when P+R = 0).
pub fn rouge_l_f1(candidate: &str, reference: &str, tokenizer_id: &str) -> Result<f64> {
    let reference_tokens = toks(reference, tokenizer_id)?;
    if reference_tokens.is_empty() {
        return Err(Error::EmptyReference);
    }
    let candidate_tokens = toks(candidate, tokenizer_id)?;
    if candidate_tokens.is_empty() {
        return Ok(0.0);
    }
    let lcs = lcs_len(&candidate_tokens, &reference_tokens) as f64;
    let p = lcs / candidate_tokens.len() as f64;
    let r = lcs / reference_tokens.len() as f64;
    if p + r == 0.0 {
        return Ok(0.0);
    }
    Ok(2.0 * p * r / (p + r))
}

fn lcs_len(a: &[String], b: &[String]) -> usize {
    let mut prev = vec![0usize; b.len() + 1];
    let mut curr = vec![0usize; b.len() + 1];
    for ai in a {
        for (j, bj) in b.iter().enumerate() {
            curr[j + 1] = if ai == bj {
                prev[j] + 1
            } else {
                prev[j + 1].max(curr[j])
            };
        }
        std::mem::swap(&mut prev, &mut curr);
    }
    prev[b.len()]
}

/// Sentence BLEU-n with uniform weights, clipped modified n-gram
/// precisions, no smoothing (any zero precision collapses the score to 0),
/// and brevity penalty `exp(1 - r/c)` when the candidate is shorter than
/// the closest reference (ties broken toward the shorter reference).
pub fn bleu_n(candidate: &str, references: &[String], n: usize, tokenizer_id: &str) -> Result<f64> {
    if references.is_empty() {
        return Err(Error::EmptyReference);
    }
    if n == 0 || n > 4 {
        return Err(Error::Domain(format!("bleu order {n} not in 1..=4")));
    }
    let candidate_tokens = toks(candidate, tokenizer_id)?;
    if candidate_tokens.is_empty() {
        return Ok(0.0);
    }
    let reference_tokens: Vec<Vec<String>> = references
        .iter()
        .map(|r| toks(r, tokenizer_id))
        .collect::<Result<_>>()?;

    let c = candidate_tokens.len();
    let r = reference_tokens
        .iter()
        .map(Vec::len)
        .min_by_key(|len| ((*len as i64 - c as i64).abs(), *len))
        .unwrap_or(0);

    let mut log_sum = 0.0;
    for order in 1..=n {
        if candidate_tokens.len() < order {
            return Ok(0.0);
        }
        let cand_grams = ngram_counts(&candidate_tokens, order);
        let total: u64 = cand_grams.values().sum();
        let mut clipped = 0u64;
        for (gram, count) in &cand_grams {
            let max_ref = reference_tokens
                .iter()
                .map(|toks| *ngram_counts(toks, order).get(gram).unwrap_or(&0))
                .max()
                .unwrap_or(0);
            clipped += (*count).min(max_ref);
        }
        if clipped == 0 {
            return Ok(0.0);
        }
        log_sum += (clipped as f64 / total as f64).ln() / n as f64;
    }

    let bp = if c < r {
        (1.0 - r as f64 / c as f64).exp()
    } else {
        1.0
    };
    Ok(bp * log_sum.exp())
}

fn ngram_counts(tokens: &[String], order: usize) -> HashMap<&[String], u64> {
    let mut counts = HashMap::new();
    if tokens.len() >= order {
        for gram in tokens.windows(order) {
            *counts.entry(gram).or_insert(0) += 1;
        }
    }
    counts
}

/// METEOR variant: unigram alignment by exact match, then Porter-stem
/// match on the remainder (no synonymy). With `m` matches in `ch` chunks,
/// `P = m/|cand|`, `R = m/|ref|`, `F_mean = 10PR/(R+9P)`,
/// `penalty = 0.5·(ch/m)³`, `score = F_mean·(1 − penalty)`; 0 when m = 0.
pub fn meteor_lite(candidate: &str, reference: &str, tokenizer_id: &str) -> Result<f64> {
    let reference_tokens = toks(reference, tokenizer_id)?;
    if reference_tokens.is_empty() {
        return Err(Error::EmptyReference);
    }
    let candidate_tokens = toks(candidate, tokenizer_id)?;
    if candidate_tokens.is_empty() {
        return Ok(0.0);
    }

    let pairs = align(&candidate_tokens, &reference_tokens);
    let m = pairs.len() as f64;
    if pairs.is_empty() {
        return Ok(0.0);
    }
    let mut chunks = 1u64;
    for w in pairs.windows(2) {
        if w[1].0 != w[0].0 + 1 || w[1].1 != w[0].1 + 1 {
            chunks += 1;
        }
    }

    let p = m / candidate_tokens.len() as f64;
    let r = m / reference_tokens.len() as f64;
    let f_mean = 10.0 * p * r / (r + 9.0 * p);
    let penalty = 0.5 * (chunks as f64 / m).powi(3);
    Ok(f_mean * (1.0 - penalty))
}

/// Two-stage alignment, each stage matching equal keys in positional
/// order: stage 1 on surface forms, stage 2 on Porter stems of whatever
/// is left. Returns (candidate index, reference index) pairs sorted by
/// candidate index.
fn align(candidate: &[String], reference: &[String]) -> Vec<(usize, usize)> {
    let mut cand_free = vec![true; candidate.len()];
    let mut ref_free = vec![true; reference.len()];
    let mut pairs = Vec::new();

    let stemmer = rust_stemmers::Stemmer::create(rust_stemmers::Algorithm::English);
    let surface = |t: &String| t.clone();
    let stem = |t: &String| stemmer.stem(&t.to_lowercase()).to_string();

    for key_of in [&surface as &dyn Fn(&String) -> String, &stem] {
        let mut ref_slots: HashMap<String, Vec<usize>> = HashMap::new();
        for (j, token) in reference.iter().enumerate() {
            if ref_free[j] {
                ref_slots.entry(key_of(token)).or_default().push(j);
            }
        }
        for slots in ref_slots.values_mut() {
            slots.reverse(); // pop() yields smallest index first
        }
        for (i, token) in candidate.iter().enumerate() {
            if !cand_free[i] {
                continue;
            }
            if let Some(slots) = ref_slots.get_mut(&key_of(token)) {
                if let Some(j) = slots.pop() {
                    cand_free[i] = false;
                    ref_free[j] = false;
                    pairs.push((i, j));
                }
            }
        }
    }

    pairs.sort_unstable();
    pairs
}

/// Confusion matrix plus accuracy and macro-averaged precision/recall/F1
/// over the given label list. Per-label scores that are undefined (empty
/// denominator) count as 0.
pub fn classification_metrics<L: Eq + Hash + Clone>(
    predictions: &[L],
    gold: &[L],
    labels: &[L],
) -> Result<ClsScores> {
    if predictions.len() != gold.len() {
        return Err(Error::Shape(format!(
            "predictions and gold differ in length: {} vs {}",
            predictions.len(),
            gold.len()
        )));
    }
    if predictions.is_empty() {
        return Err(Error::Shape("no examples to score".into()));
    }
    if labels.is_empty() {
        return Err(Error::Shape("label list is empty".into()));
    }
    let index_of: HashMap<&L, usize> = labels.iter().zip(0..).collect();
    let lookup = |l: &L| -> Result<usize> {
        index_of
            .get(l)
            .copied()
            .ok_or_else(|| Error::Shape("value outside the label list".into()))
    };

    let k = labels.len();
    let mut confusion = vec![vec![0u64; k]; k];
    for (pred, gold) in predictions.iter().zip(gold) {
        confusion[lookup(gold)?][lookup(pred)?] += 1;
    }

    let total: u64 = confusion.iter().flatten().sum();
    let trace: u64 = (0..k).map(|i| confusion[i][i]).sum();
    let accuracy = trace as f64 / total as f64;

    let mut precision_sum = 0.0;
    let mut recall_sum = 0.0;
    let mut f1_sum = 0.0;
    for label in 0..k {
        let tp = confusion[label][label] as f64;
        let pred_total: u64 = (0..k).map(|g| confusion[g][label]).sum();
        let gold_total: u64 = confusion[label].iter().sum();
        let p = if pred_total > 0 {
            tp / pred_total as f64
        } else {
            0.0
        };
        let r = if gold_total > 0 {
            tp / gold_total as f64
        } else {
            0.0
        };
        precision_sum += p;
        recall_sum += r;
        f1_sum += if p + r > 0.0 { 2.0 * p * r / (p + r) } else { 0.0 };
    }

    Ok(ClsScores {
        accuracy,
        precision: precision_sum / k as f64,
        recall: recall_sum / k as f64,
        f1: f1_sum / k as f64,
        confusion,
    })
}

/// Divide a score by the natural log of the average context length in
/// tokens. Undefined at or below one token.
pub fn efficiency_adjusted(score: f64, avg_context_tokens: f64) -> Result<f64> {
    if !(avg_context_tokens > 1.0) {
        return Err(Error::Domain(format!(
            "average context length must exceed 1 token, got {avg_context_tokens}"
        )));
    }
    Ok(score / avg_context_tokens.ln())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tokenize::WHITESPACE;

    #[test]
    fn rouge_identical_and_disjoint() {
        assert_eq!(rouge_l_f1("a b c", "a b c", WHITESPACE).unwrap(), 1.0);
        assert_eq!(rouge_l_f1("x y", "a b", WHITESPACE).unwrap(), 0.0);
    }

    #[test]
    fn rouge_partial_overlap() {
        // LCS = 2, P = 1, R = 2/3, F1 = 0.8
        let got = rouge_l_f1("the cat", "the cat sat", WHITESPACE).unwrap();
        assert!((got - 0.8).abs() < 1e-12, "got {got}");
    }

    #[test]
    fn rouge_empty_cases() {
        assert!(matches!(
            rouge_l_f1("x", "", WHITESPACE),
            Err(Error::EmptyReference)
        ));
        assert_eq!(rouge_l_f1("", "the cat", WHITESPACE).unwrap(), 0.0);
    }

    #[test]
    fn bleu_identity_is_one() {
        for n in [1, 4] {
            let got = bleu_n(
                "the cat sat on the mat",
                &["the cat sat on the mat".into()],
                n,
                WHITESPACE,
            )
            .unwrap();
            assert!((got - 1.0).abs() < 1e-12, "n={n} got {got}");
        }
    }

    #[test]
    fn bleu_clipping() {
        let got = bleu_n("the the the", &["the cat".into()], 1, WHITESPACE).unwrap();
        assert!((got - 1.0 / 3.0).abs() < 1e-9, "got {got}");
    }

    #[test]
    fn bleu4_without_4grams_is_zero() {
        assert_eq!(
            bleu_n("one two three", &["one two three".into()], 4, WHITESPACE).unwrap(),
            0.0
        );
    }

    #[test]
    fn bleu_brevity_penalty() {
        // candidate 1 token, reference 2: p1 = 1, BP = exp(1 - 2) = e^-1
        let got = bleu_n("the", &["the cat".into()], 1, WHITESPACE).unwrap();
        assert!((got - (-1.0f64).exp()).abs() < 1e-12, "got {got}");
    }

    #[test]
    fn bleu_empty_reference_list() {
        assert!(matches!(
            bleu_n("x", &[], 1, WHITESPACE),
            Err(Error::EmptyReference)
        ));
    }

    #[test]
    fn meteor_identical_three_tokens() {
        let got = meteor_lite("a b c", "a b c", WHITESPACE).unwrap();
        // F_mean = 1, chunks = 1, penalty = 0.5/27
        assert!((got - 0.98148).abs() < 1e-5, "got {got}");
    }

    #[test]
    fn meteor_zero_matches() {
        assert_eq!(meteor_lite("x y", "a b", WHITESPACE).unwrap(), 0.0);
    }

    #[test]
    fn meteor_stem_match() {
        // "cats" matches "cat" only through stemming: m=1, chunks=1,
        // P=R=1, F_mean=1, penalty=0.5 -> 0.5
        let got = meteor_lite("cats", "cat", WHITESPACE).unwrap();
        assert!((got - 0.5).abs() < 1e-12, "got {got}");
    }

    #[test]
    fn meteor_fragmentation_penalized() {
        let contiguous = meteor_lite("a b c d", "a b c d", WHITESPACE).unwrap();
        let scrambled = meteor_lite("d c b a", "a b c d", WHITESPACE).unwrap();
        assert!(scrambled < contiguous);
    }

    #[test]
    fn classification_perfect() {
        let labels = vec![0, 1, 2, 3];
        let gold = vec![0, 1, 2, 3, 0, 1];
        let scores = classification_metrics(&gold, &gold, &labels).unwrap();
        assert_eq!(scores.accuracy, 1.0);
        assert_eq!(scores.f1, 1.0);
    }

    #[test]
    fn classification_one_class_over_balanced_gold() {
        let labels = vec![0, 1, 2, 3];
        let gold: Vec<i32> = (0..4).flat_map(|l| std::iter::repeat(l).take(5)).collect();
        let predictions = vec![0; 20];
        let scores = classification_metrics(&predictions, &gold, &labels).unwrap();
        assert!((scores.accuracy - 0.25).abs() < 1e-12);
        assert!((scores.recall - 0.25).abs() < 1e-12);
    }

    #[test]
    fn classification_shape_errors() {
        assert!(matches!(
            classification_metrics(&[0], &[0, 1], &[0, 1]),
            Err(Error::Shape(_))
        ));
        assert!(matches!(
            classification_metrics::<i32>(&[], &[], &[0]),
            Err(Error::Shape(_))
        ));
    }

    #[test]
    fn efficiency_adjustment_values() {
        let got = efficiency_adjusted(0.096542025, 1864.293445).unwrap();
        assert!((got - 0.012819892).abs() < 1e-6, "got {got}");
        let got = efficiency_adjusted(0.120835776, 2253.345865).unwrap();
        assert!((got - 0.015651944).abs() < 1e-6, "got {got}");
        assert_eq!(efficiency_adjusted(0.0, 100.0).unwrap(), 0.0);
        assert!(matches!(
            efficiency_adjusted(0.5, 1.0),
            Err(Error::Domain(_))
        ));
    }
}
