//! Evaluation reports, synthetic scenes, system registry and the end-to-end pipeline.

mod pipeline;
mod report;
mod synth;
mod systems;

pub use pipeline::{
    extract_manifest, generate_corpus, needed_extractors, run_pipeline, weight_confusion, PipelineConfig,
    PipelineOutcome, SynthConfig, WeightProtocol, FUSION_ID,
};
pub use report::{evaluate, render_confusion, render_report, render_table, EvaluationReport};
pub use synth::{
    band_level_distance, builtin_profile, builtin_profiles, octave_band_levels, synth_scene, BandEmphasis,
    SceneProfile, ToneBursts, Transients, OCTAVE_CENTRES,
};
pub use systems::{
    clip_features, fit_system, load_model, meta_path, model_extension, parse_system_list, prepare, save_model,
    score_frames, score_prepared, Classifier, Prepared, SystemModel, SystemSpec, TrainSettings, TrainedModel,
    DEFAULT_FUSED, DEFAULT_SYSTEMS,
};
