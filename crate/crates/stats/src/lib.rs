//! Measurement and analysis for the Reverie pilot trial: questionnaire
//! scoring, reliability, ANCOVA, a random-intercept mixed model and t-tests.

pub mod dataset;
pub mod dist;
pub mod error;
pub mod lmm;
pub mod ols;
pub mod reliability;
pub mod report;
pub mod scales;
pub mod simulate;
pub mod ttest;

pub use dataset::{Group, Participant, ScaleResponse, Timepoint, TrialDataset, VasRecord};
pub use dist::{normal_two_tailed, student_t_cdf, student_t_two_tailed};
pub use error::{Result, StatsError};
pub use lmm::{fit_lmm_random_intercept, fit_random_intercept, ClusteredDesign, LmmOptions, LongRecord};
pub use ols::{ancova, ols_fit, FitResult, Inference, VarianceComponents};
pub use reliability::cronbach_alpha;
pub use report::{analyze_trial, AnalysisReport, Section};
pub use scales::{
    score_cerq, score_geq, score_pss10, score_sus, Instrument, InstrumentRegistry, ScaleScore, SusScore,
};
pub use ttest::{paired_t_test, two_sample_t_test, TTestResult};
