//! Applications built on the distance: a synthetic attribute world, the
//! prototype classifier and its losses, support calibration and test-time
//! intervention.

pub mod calibration;
pub mod classifier;
pub mod intervention;
pub mod synth;

pub use calibration::{apply_calibration, calibrate_support, plan_calibration, CalibrationConfig, CalibrationPlan};
pub use classifier::{
    attribute_bce_loss, combined_loss, episode_loss, prototype_classifier_eval, ClassifierOutput,
    PrototypeSet, BETA_FIVE_SHOT, BETA_ONE_SHOT,
};
pub use intervention::{
    percentile, run_intervention, worst_k_accuracy, worst_k_tasks, AccuracyRecord,
    ExternalAccuracies, InterventionConfig, InterventionReport, ScoredTask, Strategy,
    SynthEvaluator, TaskEvaluator,
};
pub use synth::{class_id, generate_synth_world, SynthWorld, SynthWorldConfig};
