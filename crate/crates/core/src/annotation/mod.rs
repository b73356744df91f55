//! Annotation workflow: assignment of articles to annotators, hierarchical
//! judgments, gold-label aggregation and inter-annotator agreement.

mod alpha;
mod gold;
pub mod http;
mod stats;
mod store;
mod types;

pub use alpha::{agreement_report, krippendorff_alpha, AgreementReport};
pub use gold::{compute_gold_label, compute_gold_labels, group_by_comment};
pub use stats::{dataset_statistics, CharacteristicFigures, DatasetStatistics, UserDistribution};
pub use store::{pick_first_pass, AnnotationStore, ArticleTask, SkipOutcome, TaskView, MIN_POOL};
pub use types::{
    AnnotationRecord, Assignment, Characteristic, GoldExport, GoldLabel, Pass, Status, LABEL_CHARACTERISTICS,
    LABEL_NAMES,
};
