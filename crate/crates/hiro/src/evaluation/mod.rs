//! Text-generation and classification metrics, the efficiency-adjusted
//! scoring, and the batch evaluation loop.

mod metrics;
mod run;

pub use metrics::{
    bleu_n, classification_metrics, efficiency_adjusted, meteor_lite, rouge_l_f1, ClsScores,
    GenScores,
};
pub use run::{
    evaluate_retrieval_run, read_generative_dataset, read_multiple_choice_dataset,
    read_results_jsonl, Dataset, EvalReport, EvalReportConfig, ExtractiveReader,
    GenerativeExample, MultipleChoiceExample, QueryResultRecord, Reader,
};
