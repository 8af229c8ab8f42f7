//! Batch evaluation: join query results against a QA dataset, run a
//! reader over each retrieved context, and score the answers.
//!
//! Readers are pluggable; the built-in `"extractive"` reader returns the
//! retrieved context verbatim (generative) or picks the choice with the
//! highest token overlap against the context (multiple choice), which is
//! enough to exercise the whole pipeline deterministically.

use std::collections::{BTreeMap, HashMap};
use std::io::{BufRead, BufReader, Read};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::evaluation::metrics::{
    bleu_n, classification_metrics, efficiency_adjusted, meteor_lite, rouge_l_f1, GenScores,
};
use crate::tokenize::tokenizer;

/// One line of the query results JSONL.
///
/// `context_text` travels with the record so the evaluation stage can hand
/// the retrieved context to a reader without reopening the index.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct QueryResultRecord {
    pub query_id: String,
    pub algorithm: String,
    pub params: Value,
    pub emitted: Vec<String>,
    pub context_tokens: u64,
    pub sim_evals: u64,
    pub sort_comparisons: u64,
    pub wall_time_ns: u64,
    #[serde(default)]
    pub context_text: String,
}

/// Generative dataset line: question plus reference answers.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GenerativeExample {
    pub id: String,
    pub question: String,
    pub references: Vec<String>,
}

/// Multiple-choice dataset line: question, choices, gold answer index.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MultipleChoiceExample {
    pub id: String,
    pub question: String,
    pub choices: Vec<String>,
    pub answer: usize,
}

/// The dataset variant selects the evaluation mode.
#[derive(Debug, Clone)]
pub enum Dataset {
    Generative(Vec<GenerativeExample>),
    MultipleChoice(Vec<MultipleChoiceExample>),
}

impl Dataset {
    pub fn mode(&self) -> &'static str {
        match self {
            Dataset::Generative(_) => "generative",
            Dataset::MultipleChoice(_) => "multiple_choice",
        }
    }
}

/// Downstream answer producer consuming a retrieved context.
pub trait Reader: Send + Sync {
    fn id(&self) -> &str;
    fn answer(&self, question: &str, context: &str) -> Result<String>;
    fn choose(&self, question: &str, context: &str, choices: &[String]) -> Result<usize>;
}

/// Returns the context verbatim; picks the choice with the largest token
/// overlap with the context (ties to the lowest index).
pub struct ExtractiveReader {
    pub tokenizer_id: String,
}

impl ExtractiveReader {
    pub fn new(tokenizer_id: impl Into<String>) -> Self {
        ExtractiveReader {
            tokenizer_id: tokenizer_id.into(),
        }
    }
}

impl Reader for ExtractiveReader {
    fn id(&self) -> &str {
        "extractive"
    }

    fn answer(&self, _question: &str, context: &str) -> Result<String> {
        Ok(context.to_string())
    }

    fn choose(&self, _question: &str, context: &str, choices: &[String]) -> Result<usize> {
        if choices.is_empty() {
            return Err(Error::Shape("no choices to pick from".into()));
        }
        let tok = tokenizer(&self.tokenizer_id)?;
        let context_tokens: std::collections::HashSet<&str> =
            tok.tokenize(context).into_iter().collect();
        let mut best = 0usize;
        let mut best_score = f64::NEG_INFINITY;
        for (i, choice) in choices.iter().enumerate() {
            let tokens = tok.tokenize(choice);
            let overlap = tokens
                .iter()
                .filter(|t| context_tokens.contains(**t))
                .count();
            let score = if tokens.is_empty() {
                0.0
            } else {
                overlap as f64 / tokens.len() as f64
            };
            if score > best_score {
                best_score = score;
                best = i;
            }
        }
        Ok(best)
    }
}

/// Evaluation report, serialized as the `eval` command's JSON output.
/// Means are `None` (JSON null) when there is nothing to average, never 0.
#[derive(Debug, Clone, Serialize)]
pub struct EvalReport {
    pub n_queries: usize,
    pub mode: String,
    pub absolute: Option<BTreeMap<String, f64>>,
    pub avg_context_tokens: Option<f64>,
    /// Corpus-level adjustment: mean score / ln(mean context tokens).
    pub efficiency_adjusted: Option<BTreeMap<String, f64>>,
    /// Extra: mean over queries of score / ln(own context tokens), using
    /// only queries with more than one context token.
    pub efficiency_adjusted_per_query: Option<BTreeMap<String, f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub confusion: Option<Vec<Vec<u64>>>,
    pub config: EvalReportConfig,
}

#[derive(Debug, Clone, Serialize)]
pub struct EvalReportConfig {
    pub tokenizer_id: String,
    pub reader_id: String,
    pub averaging: String,
    pub metrics: Vec<String>,
    pub notes: Vec<String>,
}

fn report_config(tokenizer_id: &str, reader_id: &str, dataset: &Dataset) -> EvalReportConfig {
    let metrics = match dataset {
        Dataset::Generative(_) => vec![
            "rouge_l_f1".to_string(),
            "bleu1".to_string(),
            "bleu4".to_string(),
            "meteor_lite".to_string(),
        ],
        Dataset::MultipleChoice(_) => vec![
            "accuracy".to_string(),
            "precision".to_string(),
            "recall".to_string(),
            "f1".to_string(),
        ],
    };
    EvalReportConfig {
        tokenizer_id: tokenizer_id.to_string(),
        reader_id: reader_id.to_string(),
        averaging: "macro".to_string(),
        metrics,
        notes: vec![
            format!("token counts use the {tokenizer_id:?} tokenizer, not a model tokenizer"),
            "meteor_lite: exact + Porter-stem alignment, synonym matching omitted".to_string(),
        ],
    }
}

/// Score a batch of retrieval results against a dataset.
///
/// Every result's `query_id` must appear in the dataset. Reader failures
/// carry the offending query id. Corpus means are order-independent.
pub fn evaluate_retrieval_run(
    results: &[QueryResultRecord],
    dataset: &Dataset,
    reader: &dyn Reader,
    tokenizer_id: &str,
) -> Result<EvalReport> {
    match dataset {
        Dataset::Generative(examples) => {
            evaluate_generative(results, examples, reader, tokenizer_id, dataset)
        }
        Dataset::MultipleChoice(examples) => {
            evaluate_multiple_choice(results, examples, reader, tokenizer_id, dataset)
        }
    }
}

fn reader_err(query_id: &str) -> impl Fn(Error) -> Error + '_ {
    move |e| Error::Reader {
        query_id: query_id.to_string(),
        message: e.to_string(),
    }
}

fn evaluate_generative(
    results: &[QueryResultRecord],
    examples: &[GenerativeExample],
    reader: &dyn Reader,
    tokenizer_id: &str,
    dataset: &Dataset,
) -> Result<EvalReport> {
    let by_id: HashMap<&str, &GenerativeExample> =
        examples.iter().map(|e| (e.id.as_str(), e)).collect();

    let mut per_query: Vec<(GenScores, u64)> = Vec::with_capacity(results.len());
    for record in results {
        let example = by_id.get(record.query_id.as_str()).ok_or_else(|| {
            Error::DatasetMismatch(format!("query id {:?} not in dataset", record.query_id))
        })?;
        if example.references.is_empty() {
            return Err(Error::EmptyReference);
        }
        let answer = reader
            .answer(&example.question, &record.context_text)
            .map_err(reader_err(&record.query_id))?;

        // Single-reference metrics take the best reference; BLEU is
        // multi-reference natively.
        let mut rouge: f64 = 0.0;
        let mut meteor: f64 = 0.0;
        for reference in &example.references {
            rouge = rouge.max(rouge_l_f1(&answer, reference, tokenizer_id)?);
            meteor = meteor.max(meteor_lite(&answer, reference, tokenizer_id)?);
        }
        let scores = GenScores {
            rouge_l_f1: rouge,
            bleu1: bleu_n(&answer, &example.references, 1, tokenizer_id)?,
            bleu4: bleu_n(&answer, &example.references, 4, tokenizer_id)?,
            meteor,
        };
        per_query.push((scores, record.context_tokens));
    }

    let n = per_query.len();
    let (absolute, avg_tokens, adjusted, adjusted_per_query) = if n == 0 {
        (None, None, None, None)
    } else {
        let mean = |f: &dyn Fn(&GenScores) -> f64| {
            per_query.iter().map(|(s, _)| f(s)).sum::<f64>() / n as f64
        };
        let names: [(&str, &dyn Fn(&GenScores) -> f64); 4] = [
            ("rouge_l_f1", &|s| s.rouge_l_f1),
            ("bleu1", &|s| s.bleu1),
            ("bleu4", &|s| s.bleu4),
            ("meteor_lite", &|s| s.meteor),
        ];
        let absolute: BTreeMap<String, f64> =
            names.iter().map(|(k, f)| (k.to_string(), mean(f))).collect();
        let avg_tokens =
            per_query.iter().map(|(_, t)| *t as f64).sum::<f64>() / n as f64;
        let adjusted = corpus_adjusted(&absolute, avg_tokens);
        let adjusted_per_query = per_query_adjusted(
            names
                .iter()
                .map(|(k, f)| {
                    (
                        k.to_string(),
                        per_query.iter().map(|(s, t)| (f(s), *t)).collect(),
                    )
                })
                .collect(),
        );
        (Some(absolute), Some(avg_tokens), adjusted, adjusted_per_query)
    };

    Ok(EvalReport {
        n_queries: n,
        mode: dataset.mode().to_string(),
        absolute,
        avg_context_tokens: avg_tokens,
        efficiency_adjusted: adjusted,
        efficiency_adjusted_per_query: adjusted_per_query,
        confusion: None,
        config: report_config(tokenizer_id, reader.id(), dataset),
    })
}

fn evaluate_multiple_choice(
    results: &[QueryResultRecord],
    examples: &[MultipleChoiceExample],
    reader: &dyn Reader,
    tokenizer_id: &str,
    dataset: &Dataset,
) -> Result<EvalReport> {
    let by_id: HashMap<&str, &MultipleChoiceExample> =
        examples.iter().map(|e| (e.id.as_str(), e)).collect();

    let mut predictions = Vec::with_capacity(results.len());
    let mut gold = Vec::with_capacity(results.len());
    let mut token_counts = Vec::with_capacity(results.len());
    let mut max_choices = 0usize;
    for record in results {
        let example = by_id.get(record.query_id.as_str()).ok_or_else(|| {
            Error::DatasetMismatch(format!("query id {:?} not in dataset", record.query_id))
        })?;
        if example.answer >= example.choices.len() {
            return Err(Error::Shape(format!(
                "example {:?}: answer index {} out of range for {} choices",
                example.id,
                example.answer,
                example.choices.len()
            )));
        }
        let predicted = reader
            .choose(&example.question, &record.context_text, &example.choices)
            .map_err(reader_err(&record.query_id))?;
        max_choices = max_choices.max(example.choices.len());
        predictions.push(predicted);
        gold.push(example.answer);
        token_counts.push(record.context_tokens);
    }

    let n = predictions.len();
    let (absolute, avg_tokens, adjusted, adjusted_per_query, confusion) = if n == 0 {
        (None, None, None, None, None)
    } else {
        let labels: Vec<usize> = (0..max_choices).collect();
        let scores = classification_metrics(&predictions, &gold, &labels)?;
        let absolute: BTreeMap<String, f64> = [
            ("accuracy".to_string(), scores.accuracy),
            ("precision".to_string(), scores.precision),
            ("recall".to_string(), scores.recall),
            ("f1".to_string(), scores.f1),
        ]
        .into_iter()
        .collect();
        let avg_tokens = token_counts.iter().map(|t| *t as f64).sum::<f64>() / n as f64;
        let adjusted = corpus_adjusted(&absolute, avg_tokens);
        let correct_and_tokens: Vec<(f64, u64)> = predictions
            .iter()
            .zip(&gold)
            .zip(&token_counts)
            .map(|((p, g), t)| (if p == g { 1.0 } else { 0.0 }, *t))
            .collect();
        let adjusted_per_query =
            per_query_adjusted([("accuracy".to_string(), correct_and_tokens)].into());
        (
            Some(absolute),
            Some(avg_tokens),
            adjusted,
            adjusted_per_query,
            Some(scores.confusion),
        )
    };

    Ok(EvalReport {
        n_queries: n,
        mode: dataset.mode().to_string(),
        absolute,
        avg_context_tokens: avg_tokens,
        efficiency_adjusted: adjusted,
        efficiency_adjusted_per_query: adjusted_per_query,
        confusion,
        config: report_config(tokenizer_id, reader.id(), dataset),
    })
}

fn corpus_adjusted(
    absolute: &BTreeMap<String, f64>,
    avg_tokens: f64,
) -> Option<BTreeMap<String, f64>> {
    if avg_tokens <= 1.0 {
        return None;
    }
    Some(
        absolute
            .iter()
            .map(|(k, v)| (k.clone(), efficiency_adjusted(*v, avg_tokens).expect("avg > 1")))
            .collect(),
    )
}

fn per_query_adjusted(
    series: BTreeMap<String, Vec<(f64, u64)>>,
) -> Option<BTreeMap<String, f64>> {
    let mut out = BTreeMap::new();
    for (name, values) in series {
        let adjusted: Vec<f64> = values
            .iter()
            .filter(|(_, tokens)| *tokens > 1)
            .map(|(score, tokens)| score / (*tokens as f64).ln())
            .collect();
        if !adjusted.is_empty() {
            out.insert(name, adjusted.iter().sum::<f64>() / adjusted.len() as f64);
        }
    }
    if out.is_empty() {
        None
    } else {
        Some(out)
    }
}

fn read_jsonl<T: serde::de::DeserializeOwned, R: Read>(source: R, what: &str) -> Result<Vec<T>> {
    let mut out = Vec::new();
    for (lineno, line) in BufReader::new(source).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let record: T = serde_json::from_str(&line)
            .map_err(|e| Error::Parse(format!("{what} line {}: {e}", lineno + 1)))?;
        out.push(record);
    }
    Ok(out)
}

pub fn read_results_jsonl<R: Read>(source: R) -> Result<Vec<QueryResultRecord>> {
    read_jsonl(source, "results")
}

pub fn read_generative_dataset<R: Read>(source: R) -> Result<Vec<GenerativeExample>> {
    read_jsonl(source, "dataset")
}

pub fn read_multiple_choice_dataset<R: Read>(source: R) -> Result<Vec<MultipleChoiceExample>> {
    read_jsonl(source, "dataset")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tokenize::WHITESPACE;

    fn record(id: &str, context: &str, tokens: u64) -> QueryResultRecord {
        QueryResultRecord {
            query_id: id.into(),
            algorithm: "hiro_recursive".into(),
            params: serde_json::json!({"S": 0.5, "Delta": 0.1}),
            emitted: vec!["n1".into()],
            context_tokens: tokens,
            sim_evals: 3,
            sort_comparisons: 0,
            wall_time_ns: 10,
            context_text: context.into(),
        }
    }

    #[test]
    fn extractive_identity_pipeline_scores_one() {
        let results = vec![
            record("q1", "exact reference text here", 4),
            record("q2", "another stored node body", 4),
        ];
        let dataset = Dataset::Generative(vec![
            GenerativeExample {
                id: "q1".into(),
                question: "what?".into(),
                references: vec!["exact reference text here".into()],
            },
            GenerativeExample {
                id: "q2".into(),
                question: "which?".into(),
                references: vec!["another stored node body".into()],
            },
        ]);
        let report = evaluate_retrieval_run(
            &results,
            &dataset,
            &ExtractiveReader::new(WHITESPACE),
            WHITESPACE,
        )
        .unwrap();
        assert_eq!(report.n_queries, 2);
        let absolute = report.absolute.unwrap();
        assert_eq!(absolute["rouge_l_f1"], 1.0);
        assert_eq!(absolute["bleu1"], 1.0);
        assert_eq!(report.avg_context_tokens, Some(4.0));
    }

    #[test]
    fn empty_results_report_nulls() {
        let dataset = Dataset::Generative(vec![]);
        let report = evaluate_retrieval_run(
            &[],
            &dataset,
            &ExtractiveReader::new(WHITESPACE),
            WHITESPACE,
        )
        .unwrap();
        assert_eq!(report.n_queries, 0);
        assert!(report.absolute.is_none());
        assert!(report.avg_context_tokens.is_none());
        assert!(report.efficiency_adjusted.is_none());
        let json = serde_json::to_value(&report).unwrap();
        assert!(json["absolute"].is_null());
    }

    #[test]
    fn unknown_query_id_is_dataset_mismatch() {
        let dataset = Dataset::Generative(vec![]);
        let err = evaluate_retrieval_run(
            &[record("ghost", "text", 2)],
            &dataset,
            &ExtractiveReader::new(WHITESPACE),
            WHITESPACE,
        )
        .unwrap_err();
        assert!(matches!(err, Error::DatasetMismatch(_)));
    }

    #[test]
    fn corpus_adjustment_recomputes_from_means() {
        let results = vec![
            record("q1", "alpha beta gamma", 10),
            record("q2", "alpha beta", 30),
        ];
        let dataset = Dataset::Generative(vec![
            GenerativeExample {
                id: "q1".into(),
                question: "?".into(),
                references: vec!["alpha beta gamma".into()],
            },
            GenerativeExample {
                id: "q2".into(),
                question: "?".into(),
                references: vec!["alpha beta gamma delta".into()],
            },
        ]);
        let report = evaluate_retrieval_run(
            &results,
            &dataset,
            &ExtractiveReader::new(WHITESPACE),
            WHITESPACE,
        )
        .unwrap();
        let absolute = report.absolute.unwrap();
        let adjusted = report.efficiency_adjusted.unwrap();
        let avg = report.avg_context_tokens.unwrap();
        for (name, value) in &absolute {
            let expect = value / avg.ln();
            assert!((adjusted[name] - expect).abs() < 1e-12);
        }
    }

    #[test]
    fn multiple_choice_extractive_picks_overlap() {
        let results = vec![record("q1", "the sky is blue today", 5)];
        let dataset = Dataset::MultipleChoice(vec![MultipleChoiceExample {
            id: "q1".into(),
            question: "sky color?".into(),
            choices: vec!["red paint".into(), "blue sky".into(), "green field".into()],
            answer: 1,
        }]);
        let report = evaluate_retrieval_run(
            &results,
            &dataset,
            &ExtractiveReader::new(WHITESPACE),
            WHITESPACE,
        )
        .unwrap();
        let absolute = report.absolute.unwrap();
        assert_eq!(absolute["accuracy"], 1.0);
        assert_eq!(report.confusion.unwrap()[1][1], 1);
    }

    #[test]
    fn results_jsonl_round_trip() {
        let rec = record("q9", "ctx", 3);
        let line = serde_json::to_string(&rec).unwrap();
        let parsed = read_results_jsonl(line.as_bytes()).unwrap();
        assert_eq!(parsed.len(), 1);
        assert_eq!(parsed[0].query_id, "q9");
        // records without context_text still parse
        let bare = r#"{"query_id":"a","algorithm":"hiro_recursive","params":{},"emitted":[],"context_tokens":0,"sim_evals":0,"sort_comparisons":0,"wall_time_ns":1}"#;
        let parsed = read_results_jsonl(bare.as_bytes()).unwrap();
        assert_eq!(parsed[0].context_text, "");
    }
}
