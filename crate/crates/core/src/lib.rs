//! Challenge-set evaluation for machine translation.
//!
//! A challenge set is a small collection of short probe sentences, each
//! targeting one structural divergence between source and target language.
//! This crate holds the data model and document formats, authoring lints,
//! blinded annotation plans, panel aggregation and scoring, and the report
//! tables. The bundled English–French set lives in [`fixture`].

pub mod fixture;
pub mod format;
pub mod lint;
pub mod model;
pub mod render;
pub mod report;
pub mod rng;
pub mod scoring;
pub mod session;
pub mod validate;

pub use format::{parse_challenge_set, parse_outputs, FormatError, ParsedOutputs};
pub use model::{
    ChallengeItem, ChallengeSet, DivergenceCategory, HighlightSpan, SystemOutput, SystemOutputSet,
};
pub use scoring::{
    AggregatedVerdict, Judgment, Rate, ScoreReport, ScoringError, ScoringPolicy, Verdict, VerdictMatrix,
};
pub use session::{AnnotationSession, BlindJudgment, BlindingKey, SessionItem};
pub use validate::{validate_challenge_set, ValidationReport};
