use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::report::{evaluate, render_report, render_table, EvaluationReport};
use super::synth::{builtin_profile, builtin_profiles, synth_scene};
use super::systems::{
    fit_system, model_extension, parse_system_list, prepare, save_model, score_prepared, SystemModel, SystemSpec,
    TrainSettings, DEFAULT_FUSED, DEFAULT_SYSTEMS,
};
use crate::cdl::NeighborRule;
use crate::dataio::{
    load_manifest, read_wav, save_features, split_dataset, write_wav, DatasetManifest, FeatureStore, ManifestEntry,
    WavEncoding,
};
use crate::error::{Error, Result, StageContext};
use crate::features::{ClipAnalysis, Extractor, FeatureConfig};
use crate::fusion::{
    cross_validated_confusion, fuse, fusion_weights, normalize_scores, resubstitution_confusion, write_scores,
    write_weights, ConfusionMatrix, FusionWeights, ScoreFile, ScoreMatrix,
};
use crate::gmm::GmmConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WeightProtocol {
    /// Stratified k-fold cross-validation on the training set.
    #[default]
    Cv,
    /// Train and evaluate on the whole training set.
    Resubstitution,
}

/// Generates a labelled synthetic corpus instead of reading a manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    /// Built-in profile names; empty means all of them.
    pub profiles: Vec<String>,
    pub clips_per_class: usize,
    pub duration_s: f64,
    pub sample_rate: u32,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            profiles: Vec::new(),
            clips_per_class: 40,
            duration_s: 3.0,
            sample_rate: 44100,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    /// Tab-separated `path<TAB>label` list; clip paths are relative to it.
    pub manifest: Option<PathBuf>,
    pub out_dir: PathBuf,
    pub seed: u64,
    pub train_fraction: f64,
    pub folds: usize,
    pub weight_protocol: WeightProtocol,
    pub systems: Vec<String>,
    pub fused: Vec<String>,
    pub gmm_components: usize,
    pub plp_components: usize,
    pub gmm_max_iters: usize,
    pub gmm_tol: f64,
    pub cdl_rule: String,
    pub cdl_eps_scale: f64,
    pub features: FeatureConfig,
    pub synth: Option<SynthConfig>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        let train = TrainSettings::default();
        PipelineConfig {
            manifest: None,
            out_dir: PathBuf::from("scenefuse-out"),
            seed: 0,
            train_fraction: 0.25,
            folds: 4,
            weight_protocol: WeightProtocol::Cv,
            systems: DEFAULT_SYSTEMS.iter().map(|s| s.to_string()).collect(),
            fused: DEFAULT_FUSED.iter().map(|s| s.to_string()).collect(),
            gmm_components: train.gmm.components,
            plp_components: train.plp_components,
            gmm_max_iters: train.gmm.max_iters,
            gmm_tol: train.gmm.tol,
            cdl_rule: "centroid".into(),
            cdl_eps_scale: train.cdl_eps_scale,
            features: FeatureConfig::default(),
            synth: None,
        }
    }
}

impl PipelineConfig {
    /// Parses and validates TOML text read from the file `base`; relative paths
    /// are resolved against its directory.
    pub fn from_toml(text: &str, base: &Path) -> Result<Self> {
        let cfg = Self::parse(text, base)?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Like [`PipelineConfig::from_toml`] but without requiring a data source,
    /// for reading shared settings only.
    pub fn parse(text: &str, base: &Path) -> Result<Self> {
        let mut cfg: PipelineConfig = toml::from_str(text).map_err(|e| Error::Parse {
            path: base.display().to_string(),
            line: e.span().map_or(0, |s| text[..s.start].lines().count().max(1)),
            message: e.message().to_string(),
        })?;
        let dir = base.parent().unwrap_or(Path::new(""));
        if let Some(m) = &cfg.manifest {
            cfg.manifest = Some(dir.join(m));
        }
        cfg.out_dir = dir.join(&cfg.out_dir);
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text, path)
    }

    pub fn load_settings(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let cfg = Self::parse(&text, path)?;
        cfg.features.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.features.validate()?;
        if self.manifest.is_some() == self.synth.is_some() {
            return Err(Error::invalid("set exactly one of `manifest` and `[synth]`"));
        }
        if self.folds < 2 {
            return Err(Error::invalid("folds must be at least 2"));
        }
        let systems = self.system_specs()?;
        if systems.is_empty() {
            return Err(Error::invalid("no systems configured"));
        }
        for f in self.fused_specs()? {
            if !systems.contains(&f) {
                return Err(Error::invalid(format!("fused system {f} is not in `systems`")));
            }
        }
        if self.gmm_components == 0 || self.plp_components == 0 {
            return Err(Error::invalid("mixture counts must be positive"));
        }
        self.cdl_rule.parse::<NeighborRule>()?;
        Ok(())
    }

    pub fn system_specs(&self) -> Result<Vec<SystemSpec>> {
        parse_system_list(&self.systems)
    }

    pub fn fused_specs(&self) -> Result<Vec<SystemSpec>> {
        parse_system_list(&self.fused)
    }

    pub fn train_settings(&self) -> Result<TrainSettings> {
        Ok(TrainSettings {
            gmm: GmmConfig {
                components: self.gmm_components,
                max_iters: self.gmm_max_iters,
                tol: self.gmm_tol,
                seed: self.seed,
            },
            plp_components: self.plp_components,
            cdl_eps_scale: self.cdl_eps_scale,
            cdl_rule: self.cdl_rule.parse()?,
        })
    }
}

/// Writes `clips_per_class` clips per profile plus `manifest.tsv` into `dir`.
pub fn generate_corpus(synth: &SynthConfig, dir: &Path) -> Result<PathBuf> {
    let profiles = if synth.profiles.is_empty() {
        builtin_profiles()
    } else {
        synth.profiles.iter().map(|p| builtin_profile(p)).collect::<Result<Vec<_>>>()?
    };
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut entries = Vec::new();
    for p in &profiles {
        for i in 0..synth.clips_per_class {
            let seed = synth.seed.wrapping_mul(1_000_003).wrapping_add(i as u64);
            let clip = synth_scene(p, synth.duration_s, synth.sample_rate, seed)?;
            let name = format!("{}_{i:03}.wav", p.name);
            write_wav(&clip, dir.join(&name), WavEncoding::Pcm16)?;
            entries.push(ManifestEntry {
                clip_path: name,
                label: p.name.clone(),
            });
        }
    }
    let manifest = DatasetManifest::from_entries(entries)?;
    let path = dir.join("manifest.tsv");
    std::fs::write(&path, manifest.to_tsv()).map_err(|e| Error::io(&path, e))?;
    Ok(path)
}

/// Extracts `set` for every clip of `manifest`, resolving clip paths against `base`.
pub fn extract_manifest(
    manifest: &DatasetManifest,
    base: &Path,
    set: &[Extractor],
    cfg: &FeatureConfig,
) -> Result<FeatureStore> {
    let mut store = FeatureStore::new();
    for entry in &manifest.entries {
        let clip = read_wav(base.join(&entry.clip_path))?;
        let analysis = ClipAnalysis::new(&clip, cfg)?;
        for &e in set {
            store.insert(entry.clip_path.clone(), analysis.extract(e)?)?;
        }
    }
    Ok(store)
}

/// Extractors to store for `systems`; CepsCom is kept as its four parts.
pub fn needed_extractors(systems: &[SystemSpec]) -> Vec<Extractor> {
    let mut out = Vec::new();
    for s in systems {
        let parts: &[Extractor] = if s.extractor == Extractor::Cepscom {
            &Extractor::CEPSCOM_PARTS
        } else {
            std::slice::from_ref(&s.extractor)
        };
        for p in parts {
            if !out.contains(p) {
                out.push(*p);
            }
        }
    }
    out.sort_by_key(|e| Extractor::ALL.iter().position(|x| x == e));
    out
}

/// Result of a full run: one report per system, then the fusion report.
#[derive(Debug, Clone, PartialEq)]
pub struct PipelineOutcome {
    pub reports: Vec<EvaluationReport>,
    pub weights: FusionWeights,
    pub weight_confusions: Vec<(String, ConfusionMatrix)>,
    pub out_dir: PathBuf,
}

impl PipelineOutcome {
    pub fn report(&self, system_id: &str) -> Option<&EvaluationReport> {
        self.reports.iter().find(|r| r.system_id == system_id)
    }
}

pub const FUSION_ID: &str = "fusion";

fn create_dir(p: &Path) -> Result<()> {
    std::fs::create_dir_all(p).map_err(|e| Error::io(p, e))
}

fn write_text(p: &Path, text: &str) -> Result<()> {
    std::fs::write(p, text).map_err(|e| Error::io(p, e))
}

/// Confusion matrix used to weight `spec`, from the training clips only.
#[allow(clippy::too_many_arguments)]
pub fn weight_confusion(
    spec: SystemSpec,
    prepared: &super::systems::Prepared,
    train_labels: &[usize],
    n_classes: usize,
    settings: &TrainSettings,
    protocol: WeightProtocol,
    folds: usize,
    seed: u64,
) -> Result<ConfusionMatrix> {
    let fit_predict = |train: &[usize], held: &[usize]| -> Result<Vec<usize>> {
        let model = fit_system(spec, prepared, train, train_labels, n_classes, settings)?;
        let scores = score_prepared(&model, prepared, held)?;
        Ok(scores.rows().into_iter().map(|r| crate::scores::argmax(&r.to_vec())).collect())
    };
    match protocol {
        WeightProtocol::Cv => cross_validated_confusion(train_labels, n_classes, folds, seed, fit_predict),
        WeightProtocol::Resubstitution => resubstitution_confusion(train_labels, n_classes, fit_predict),
    }
}

/// Extract, train, weight, classify, fuse and evaluate, writing every
/// artefact under `cfg.out_dir`.
pub fn run_pipeline(cfg: &PipelineConfig) -> Result<PipelineOutcome> {
    cfg.validate().stage("config")?;
    let out = cfg.out_dir.clone();
    create_dir(&out).stage("config")?;

    let manifest_path = match (&cfg.manifest, &cfg.synth) {
        (Some(m), _) => m.clone(),
        (None, Some(s)) => generate_corpus(s, &out.join("audio")).stage("synth")?,
        (None, None) => unreachable!("validated"),
    };
    let manifest = load_manifest(&manifest_path).stage("manifest")?;
    let base = manifest_path.parent().unwrap_or(Path::new("")).to_path_buf();
    let (train, test) = split_dataset(&manifest, cfg.train_fraction, cfg.seed).stage("split")?;
    write_text(&out.join("train.tsv"), &train.to_tsv()).stage("split")?;
    write_text(&out.join("test.tsv"), &test.to_tsv()).stage("split")?;

    let systems = cfg.system_specs().stage("config")?;
    let fused_specs = cfg.fused_specs().stage("config")?;
    let settings = cfg.train_settings().stage("config")?;
    let store = extract_manifest(&manifest, &base, &needed_extractors(&systems), &cfg.features).stage("extract")?;
    save_features(&store, out.join("features.sfs")).stage("extract")?;

    let class_names = manifest.class_names.clone();
    let n_classes = class_names.len();
    let train_ids: Vec<String> = train.entries.iter().map(|e| e.clip_path.clone()).collect();
    let test_ids: Vec<String> = test.entries.iter().map(|e| e.clip_path.clone()).collect();
    let all_ids: Vec<String> = train_ids.iter().chain(&test_ids).cloned().collect();
    let train_labels = train.labels();
    let test_labels = test.labels();
    let mut labels = train_labels.clone();
    labels.extend(&test_labels);
    let train_idx: Vec<usize> = (0..train_ids.len()).collect();
    let test_idx: Vec<usize> = (train_ids.len()..all_ids.len()).collect();

    for d in ["models", "scores", "reports"] {
        create_dir(&out.join(d)).stage("config")?;
    }
    let mut reports = Vec::new();
    let mut raw_scores = Vec::new();
    let mut weight_confusions = Vec::new();
    for &spec in &systems {
        let id = spec.id();
        let prepared = prepare(spec, &store, &all_ids, &settings).stage("train")?;
        let model = fit_system(spec, &prepared, &train_idx, &labels, n_classes, &settings).stage("train")?;
        let model_path = out.join("models").join(format!("{id}.{}", model_extension(spec)));
        let sys_model = SystemModel {
            spec,
            class_names: class_names.clone(),
            cdl_eps_scale: settings.cdl_eps_scale,
            model,
        };
        save_model(&sys_model, &model_path).stage("train")?;

        let values = score_prepared(&sys_model.model, &prepared, &test_idx).stage("classify")?;
        let scores = ScoreMatrix::new(id.clone(), test_ids.clone(), values).stage("classify")?;
        let file = ScoreFile {
            class_names: class_names.clone(),
            systems: vec![scores.clone()],
        };
        write_scores(out.join("scores").join(format!("{id}.csv")), &file).stage("classify")?;

        let report = evaluate(id.clone(), &scores.predictions(), &test_labels, &class_names).stage("evaluate")?;
        write_text(&out.join("reports").join(format!("{id}.txt")), &render_report(&report)).stage("evaluate")?;
        reports.push(report);

        if fused_specs.contains(&spec) {
            // Training-side labels are the first `train_ids.len()` entries of `prepared`.
            let cm = weight_confusion(
                spec,
                &prepared,
                &train_labels,
                n_classes,
                &settings,
                cfg.weight_protocol,
                cfg.folds,
                cfg.seed,
            )
            .stage("weights")?;
            weight_confusions.push((id.clone(), cm));
            raw_scores.push(scores);
        }
    }

    let weights = fusion_weights(&weight_confusions).stage("weights")?;
    write_weights(out.join("weights.csv"), &weights, &class_names).stage("weights")?;

    let normalized = raw_scores.iter().map(normalize_scores).collect::<Result<Vec<_>>>().stage("fuse")?;
    let decision = fuse(&normalized, &weights).stage("fuse")?;
    let fused_file = ScoreFile {
        class_names: class_names.clone(),
        systems: vec![decision.to_scores(FUSION_ID)],
    };
    write_scores(out.join("fused.csv"), &fused_file).stage("fuse")?;
    let report = evaluate(FUSION_ID, &decision.predicted, &test_labels, &class_names).stage("evaluate")?;
    write_text(&out.join("reports").join(format!("{FUSION_ID}.txt")), &render_report(&report)).stage("evaluate")?;
    reports.push(report);

    let mut summary = render_table(&reports);
    summary.push_str(&format!(
        "\nfused: {}\nweights: {} ({} folds, seed {})\nAvg. is the unweighted mean of per-class accuracies.\n",
        cfg.fused.join(", "),
        match cfg.weight_protocol {
            WeightProtocol::Cv => "stratified cross-validation on the training set",
            WeightProtocol::Resubstitution => "resubstitution on the training set",
        },
        cfg.folds,
        cfg.seed
    ));
    write_text(&out.join("summary.txt"), &summary).stage("evaluate")?;

    Ok(PipelineOutcome {
        reports,
        weights,
        weight_confusions,
        out_dir: out,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_defaults_and_base_directory() {
        let cfg = PipelineConfig::from_toml("manifest = \"data/m.tsv\"\nout_dir = \"o\"\n", Path::new("/x/y/run.toml")).unwrap();
        assert_eq!(cfg.manifest.as_deref(), Some(Path::new("/x/y/data/m.tsv")));
        assert_eq!(cfg.out_dir, Path::new("/x/y/o"));
        assert_eq!(cfg.systems.len(), 7);
        assert_eq!(cfg.fused, vec!["cepscom-gmm", "cepscom-cdl", "plp-gmm"]);
        assert_eq!(cfg.train_settings().unwrap().plp_components, 4);
    }

    #[test]
    fn config_errors() {
        let base = Path::new("c.toml");
        assert!(PipelineConfig::from_toml("out_dir = \"o\"\n", base).is_err());
        assert!(PipelineConfig::from_toml("manifest = \"m\"\n[synth]\n", base).is_err());
        assert!(PipelineConfig::from_toml("manifest = \"m\"\nfused = [\"mfcc-gmm\"]\nsystems = [\"plp-gmm\"]\n", base).is_err());
        assert!(PipelineConfig::from_toml("manifest = \"m\"\nbogus = 1\n", base).is_err());
        let err = PipelineConfig::from_toml("manifest = \"m\"\n\nfolds = \"four\"\n", base).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, .. }), "{err:?}");
    }

    #[test]
    fn cepscom_is_stored_as_parts() {
        let specs = parse_system_list(&["plp-gmm", "cepscom-cdl", "mfcc-gmm"]).unwrap();
        assert_eq!(
            needed_extractors(&specs),
            vec![Extractor::Mfcc, Extractor::Plp, Extractor::Pncc, Extractor::Rcgcc, Extractor::Spcc]
        );
    }

    #[test]
    fn missing_manifest_is_stage_tagged() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = PipelineConfig {
            manifest: Some(dir.path().join("absent.tsv")),
            out_dir: dir.path().join("out"),
            ..PipelineConfig::default()
        };
        let err = run_pipeline(&cfg).unwrap_err();
        assert!(matches!(err, Error::Stage { stage: "manifest", .. }), "{err}");
    }
}
