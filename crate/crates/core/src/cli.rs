//! Command-line front end.

use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

use crate::dataio::{load_features, load_manifest, save_features, DatasetManifest};
use crate::error::{Error, Result, StageContext};
use crate::eval::{
    self, clip_features, evaluate, load_model, parse_system_list, render_report, save_model, score_frames,
    PipelineConfig, SystemModel, WeightProtocol,
};
use crate::features::{parse_extractor_list, FeatureConfig};
use crate::fusion::{
    fuse, fusion_weights, normalize_scores, read_scores, read_weights, write_scores, write_weights, ScoreFile,
    ScoreMatrix,
};

#[derive(Debug, Parser)]
#[command(name = "scenefuse", version, about = "Acoustic scene classification with cepstral features and fused classifiers")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Extract features for every clip of a manifest.
    Extract {
        #[arg(long)]
        manifest: PathBuf,
        /// Comma-separated extractors, e.g. `mfcc,plp,cepscom`.
        #[arg(long)]
        features: String,
        #[arg(long)]
        out: PathBuf,
        /// Pipeline config to take frame and filterbank settings from.
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Train one system on the clips of a manifest.
    Train {
        #[arg(long)]
        features: PathBuf,
        #[arg(long)]
        manifest: PathBuf,
        /// `<features>-gmm` or `<features>-cdl`.
        #[arg(long)]
        system: String,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Estimate fusion weights from training-set confusion matrices.
    Weights {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        features: PathBuf,
        #[arg(long)]
        systems: String,
        #[arg(long, default_value_t = 4)]
        folds: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Train and evaluate on all clips instead of cross-validating.
        #[arg(long)]
        resubstitution: bool,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Score clips with a trained model.
    Classify {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        features: PathBuf,
        /// Restrict to the clips of this manifest; defaults to every clip in the store.
        #[arg(long)]
        manifest: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Fuse per-system score files with reliability weights.
    Fuse {
        /// Comma-separated score files.
        #[arg(long)]
        scores: String,
        #[arg(long)]
        weights: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Compare the argmax of a score file with manifest labels.
    Evaluate {
        #[arg(long)]
        pred: PathBuf,
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        report: PathBuf,
        /// System to evaluate when the score file holds several.
        #[arg(long)]
        system: Option<String>,
    },
    /// Write synthetic scene clips and a manifest.
    Synth {
        /// Built-in profile name, or `all`.
        #[arg(long)]
        profile: String,
        #[arg(long)]
        count: usize,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 3.0)]
        duration: f64,
        #[arg(long, default_value_t = 44100)]
        sample_rate: u32,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Run the whole pipeline from a config file.
    Run {
        #[arg(long)]
        config: PathBuf,
    },
}

fn settings(config: Option<&Path>) -> Result<PipelineConfig> {
    match config {
        Some(p) => PipelineConfig::load_settings(p),
        None => Ok(PipelineConfig::default()),
    }
}

fn manifest_base(path: &Path) -> PathBuf {
    path.parent().unwrap_or(Path::new("")).to_path_buf()
}

fn clip_ids(m: &DatasetManifest) -> Vec<String> {
    m.entries.iter().map(|e| e.clip_path.clone()).collect()
}

/// Runs one command and returns the text to print on success.
pub fn run(cli: Cli) -> Result<String> {
    match cli.command {
        Command::Extract { manifest, features, out, config } => {
            let cfg: FeatureConfig = settings(config.as_deref()).stage("config")?.features;
            let set = parse_extractor_list(&features).stage("config")?;
            let m = load_manifest(&manifest).stage("manifest")?;
            let store = eval::extract_manifest(&m, &manifest_base(&manifest), &set, &cfg).stage("extract")?;
            save_features(&store, &out).stage("extract")?;
            Ok(format!("extracted {} matrices from {} clips into {}", store.len(), m.len(), out.display()))
        }
        Command::Train { features, manifest, system, out, config } => {
            let cfg = settings(config.as_deref()).stage("config")?;
            let ts = cfg.train_settings().stage("config")?;
            let spec = system.parse().stage("config")?;
            let m = load_manifest(&manifest).stage("manifest")?;
            let store = load_features(&features).stage("extract")?;
            let prepared = eval::prepare(spec, &store, &clip_ids(&m), &ts).stage("train")?;
            let idx: Vec<usize> = (0..m.len()).collect();
            let model = eval::fit_system(spec, &prepared, &idx, &m.labels(), m.n_classes(), &ts).stage("train")?;
            let sm = SystemModel {
                spec,
                class_names: m.class_names.clone(),
                cdl_eps_scale: ts.cdl_eps_scale,
                model,
            };
            save_model(&sm, &out).stage("train")?;
            Ok(format!("trained {spec} on {} clips into {}", m.len(), out.display()))
        }
        Command::Weights { manifest, features, systems, folds, seed, resubstitution, out, config } => {
            let cfg = settings(config.as_deref()).stage("config")?;
            let ts = cfg.train_settings().stage("config")?;
            let specs = parse_system_list(&systems.split(',').collect::<Vec<_>>()).stage("config")?;
            let m = load_manifest(&manifest).stage("manifest")?;
            let store = load_features(&features).stage("extract")?;
            let protocol = if resubstitution { WeightProtocol::Resubstitution } else { WeightProtocol::Cv };
            let mut confusions = Vec::new();
            for spec in specs {
                let prepared = eval::prepare(spec, &store, &clip_ids(&m), &ts).stage("weights")?;
                let cm = eval::weight_confusion(spec, &prepared, &m.labels(), m.n_classes(), &ts, protocol, folds, seed)
                    .stage("weights")?;
                confusions.push((spec.id(), cm));
            }
            let w = fusion_weights(&confusions).stage("weights")?;
            write_weights(&out, &w, &m.class_names).stage("weights")?;
            Ok(format!("wrote weights for {} systems to {}", confusions.len(), out.display()))
        }
        Command::Classify { model, features, manifest, out } => {
            let sm = load_model(&model).stage("classify")?;
            let store = load_features(&features).stage("classify")?;
            let ids: Vec<String> = match &manifest {
                Some(p) => clip_ids(&load_manifest(p).stage("manifest")?),
                None => {
                    let part = if sm.spec.extractor == crate::features::Extractor::Cepscom {
                        crate::features::Extractor::Mfcc
                    } else {
                        sm.spec.extractor
                    };
                    store.sources_for(part.name()).map(String::from).collect()
                }
            };
            let mut values = ndarray::Array2::zeros((ids.len(), sm.class_names.len()));
            for (mut row, id) in values.rows_mut().into_iter().zip(&ids) {
                let x = clip_features(&store, id, sm.spec.extractor).stage("classify")?;
                let s = score_frames(&sm.model, &x, sm.cdl_eps_scale).stage("classify")?;
                row.assign(&ndarray::Array1::from(s));
            }
            let scores = ScoreMatrix::new(sm.spec.id(), ids, values).stage("classify")?;
            let file = ScoreFile { class_names: sm.class_names.clone(), systems: vec![scores] };
            write_scores(&out, &file).stage("classify")?;
            Ok(format!("scored {} clips with {} into {}", file.systems[0].n_clips(), sm.spec, out.display()))
        }
        Command::Fuse { scores, weights, out } => {
            let (w, weight_classes) = read_weights(&weights).stage("fuse")?;
            let mut normalized = Vec::new();
            for path in scores.split(',') {
                let file = read_scores(path.trim()).stage("fuse")?;
                if file.class_names != weight_classes {
                    return Err(Error::invalid(format!("classes of {path} differ from the weight file"))).stage("fuse");
                }
                for s in file.systems {
                    normalized.push(if s.normalized { s } else { normalize_scores(&s).stage("fuse")? });
                }
            }
            let decision = fuse(&normalized, &w).stage("fuse")?;
            let file = ScoreFile {
                class_names: weight_classes,
                systems: vec![decision.to_scores(eval::FUSION_ID)],
            };
            write_scores(&out, &file).stage("fuse")?;
            Ok(format!("fused {} systems over {} clips into {}", normalized.len(), decision.predicted.len(), out.display()))
        }
        Command::Evaluate { pred, manifest, report, system } => {
            let file = read_scores(&pred).stage("evaluate")?;
            let scores = match &system {
                Some(id) => file
                    .system(id)
                    .ok_or_else(|| Error::invalid(format!("system {id} not in {}", pred.display())))
                    .stage("evaluate")?,
                None => file.single().stage("evaluate")?,
            };
            let m = load_manifest(&manifest).stage("manifest")?;
            if file.class_names != m.class_names {
                return Err(Error::invalid("score file classes differ from the manifest's")).stage("evaluate");
            }
            let labels = m.labels();
            let truths = scores
                .clip_ids
                .iter()
                .map(|id| {
                    m.entries
                        .iter()
                        .position(|e| &e.clip_path == id)
                        .map(|i| labels[i])
                        .ok_or_else(|| Error::invalid(format!("clip {id} not in manifest")))
                })
                .collect::<Result<Vec<_>>>()
                .stage("evaluate")?;
            let r = evaluate(scores.system_id.clone(), &scores.predictions(), &truths, &m.class_names).stage("evaluate")?;
            let text = render_report(&r);
            std::fs::write(&report, &text).map_err(|e| Error::io(&report, e)).stage("evaluate")?;
            Ok(text)
        }
        Command::Synth { profile, count, out, duration, sample_rate, seed } => {
            let synth = eval::SynthConfig {
                profiles: if profile == "all" { Vec::new() } else { vec![profile] },
                clips_per_class: count,
                duration_s: duration,
                sample_rate,
                seed,
            };
            let path = eval::generate_corpus(&synth, &out).stage("synth")?;
            Ok(format!("wrote manifest {}", path.display()))
        }
        Command::Run { config } => {
            let cfg = PipelineConfig::load(&config).stage("config")?;
            let outcome = eval::run_pipeline(&cfg)?;
            let summary = outcome.out_dir.join("summary.txt");
            std::fs::read_to_string(&summary).map_err(|e| Error::io(&summary, e))
        }
    }
}
