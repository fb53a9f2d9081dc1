//! Matching, micro-averaged scores and robustness statistics.

mod matching;
mod metrics;
mod report;
mod stats;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::TaskKind;

pub use matching::{match_predictions, match_triggers, Counts, MatchCounts};
pub use metrics::{micro_f1, percent, Metrics, MetricsRow};
pub use report::{evaluate_run, ClassRow, Coverage, EvalReport, TriggerIdentification};
pub use stats::{aggregate_stats, parse_decimal, round_half_up, AggregateStats};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("prediction `{0}` has no gold instance")]
    UnknownId(String),

    #[error("instance `{0}` is predicted more than once")]
    DuplicatePrediction(String),

    #[error("instance `{id}` is {found} but the run scores {expected}")]
    TaskMismatch {
        id: String,
        expected: TaskKind,
        found: TaskKind,
    },

    #[error("robustness statistics need at least 2 scores, got {0}")]
    TooFewScores(usize),

    #[error("`{0}` is not a decimal score")]
    BadScore(String),
}

/// How MRE/MIED instances whose gold label is NOTA are scored.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NotaPolicy {
    /// Gold-NOTA instances add no TP or FN; any relation or event predicted
    /// on them is a FP.
    #[default]
    Exclude,
    /// NOTA is scored as an ordinary class.
    Include,
}
