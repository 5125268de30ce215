use std::borrow::Cow;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::cdl::{self, CdlProjection, NeighborRule};
use crate::dataio::FeatureStore;
use crate::error::{Error, Result};
use crate::features::Extractor;
use crate::gmm::{self, GmmBank, GmmConfig};
use crate::spectral::FeatureMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Classifier {
    Gmm,
    Cdl,
}

/// A feature family paired with a classifier, named like `plp-gmm`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SystemSpec {
    pub extractor: Extractor,
    pub classifier: Classifier,
}

pub const DEFAULT_SYSTEMS: [&str; 7] = [
    "mfcc-gmm",
    "pncc-gmm",
    "rcgcc-gmm",
    "spcc-gmm",
    "cepscom-gmm",
    "cepscom-cdl",
    "plp-gmm",
];

pub const DEFAULT_FUSED: [&str; 3] = ["cepscom-gmm", "cepscom-cdl", "plp-gmm"];

impl SystemSpec {
    pub fn id(&self) -> String {
        self.to_string()
    }
}

impl fmt::Display for SystemSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let c = match self.classifier {
            Classifier::Gmm => "gmm",
            Classifier::Cdl => "cdl",
        };
        write!(f, "{}-{c}", self.extractor)
    }
}

impl FromStr for SystemSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (feat, cls) = s
            .rsplit_once('-')
            .ok_or_else(|| Error::invalid(format!("system {s:?} is not of the form <features>-<gmm|cdl>")))?;
        let classifier = match cls {
            "gmm" => Classifier::Gmm,
            "cdl" => Classifier::Cdl,
            _ => return Err(Error::invalid(format!("unknown classifier {cls:?} in {s:?}"))),
        };
        Ok(SystemSpec {
            extractor: feat.parse()?,
            classifier,
        })
    }
}

pub fn parse_system_list<S: AsRef<str>>(items: &[S]) -> Result<Vec<SystemSpec>> {
    items.iter().map(|s| s.as_ref().trim().parse()).collect()
}

/// Classifier hyper-parameters shared by every system.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainSettings {
    pub gmm: GmmConfig,
    /// Mixture count for PLP systems; others use `gmm.components`.
    pub plp_components: usize,
    pub cdl_eps_scale: f64,
    pub cdl_rule: NeighborRule,
}

impl Default for TrainSettings {
    fn default() -> Self {
        TrainSettings {
            gmm: GmmConfig::default(),
            plp_components: 4,
            cdl_eps_scale: cdl::DEFAULT_EPS_SCALE,
            cdl_rule: NeighborRule::Centroid,
        }
    }
}

impl TrainSettings {
    pub fn gmm_for(&self, extractor: Extractor) -> GmmConfig {
        let components = if extractor == Extractor::Plp {
            self.plp_components
        } else {
            self.gmm.components
        };
        GmmConfig {
            components,
            ..self.gmm.clone()
        }
    }
}

/// A clip's features for `extractor`. CepsCom is assembled from its parts
/// when the store holds them but not the concatenation.
pub fn clip_features<'a>(store: &'a FeatureStore, source: &str, extractor: Extractor) -> Result<Cow<'a, Array2<f64>>> {
    if let Some(m) = store.get(source, extractor.name()) {
        return Ok(Cow::Borrowed(&m.values));
    }
    if extractor == Extractor::Cepscom {
        let parts = Extractor::CEPSCOM_PARTS
            .iter()
            .map(|e| store.require(source, e.name()))
            .collect::<Result<Vec<_>>>()?;
        let joined = FeatureMatrix::concat(&parts, Extractor::Cepscom.name())?;
        return Ok(Cow::Owned(joined.values));
    }
    Ok(Cow::Borrowed(&store.require(source, extractor.name())?.values))
}

/// Per-clip inputs prepared once and reused across training folds.
#[derive(Debug, Clone)]
pub enum Prepared {
    /// Frame matrices, one per clip.
    Frames(Vec<Array2<f64>>),
    /// Log-Euclidean descriptor embeddings, one row per clip.
    Embedded { dim: usize, rows: Array2<f64> },
}

impl Prepared {
    pub fn len(&self) -> usize {
        match self {
            Prepared::Frames(f) => f.len(),
            Prepared::Embedded { rows, .. } => rows.nrows(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

pub fn prepare(spec: SystemSpec, store: &FeatureStore, clips: &[String], settings: &TrainSettings) -> Result<Prepared> {
    match spec.classifier {
        Classifier::Gmm => clips
            .iter()
            .map(|c| clip_features(store, c, spec.extractor).map(Cow::into_owned))
            .collect::<Result<Vec<_>>>()
            .map(Prepared::Frames),
        Classifier::Cdl => {
            let mut rows: Option<Array2<f64>> = None;
            let mut dim = 0;
            for (i, c) in clips.iter().enumerate() {
                let x = clip_features(store, c, spec.extractor)?;
                let desc = cdl::covariance_descriptor(&x, settings.cdl_eps_scale, c.as_str())?;
                let v = cdl::log_embed(&desc)?;
                let r = rows.get_or_insert_with(|| {
                    dim = desc.dim();
                    Array2::zeros((clips.len(), v.len()))
                });
                if v.len() != r.ncols() {
                    return Err(Error::DimensionMismatch {
                        expected: r.ncols(),
                        found: v.len(),
                    });
                }
                r.row_mut(i).assign(&v);
            }
            Ok(Prepared::Embedded {
                dim,
                rows: rows.unwrap_or_else(|| Array2::zeros((0, 0))),
            })
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum TrainedModel {
    Gmm(GmmBank),
    Cdl(CdlProjection),
}

/// Trains on the clips at `idx`; `labels` is indexed like `prepared`.
pub fn fit_system(
    spec: SystemSpec,
    prepared: &Prepared,
    idx: &[usize],
    labels: &[usize],
    n_classes: usize,
    settings: &TrainSettings,
) -> Result<TrainedModel> {
    match prepared {
        Prepared::Frames(frames) => {
            let mut per_class = Vec::with_capacity(n_classes);
            for c in 0..n_classes {
                let views: Vec<_> = idx
                    .iter()
                    .filter(|&&i| labels[i] == c)
                    .map(|&i| frames[i].view())
                    .collect();
                if views.is_empty() {
                    return Err(Error::invalid(format!("class {c} has no training clips")));
                }
                per_class.push(ndarray::concatenate(ndarray::Axis(0), &views).map_err(|e| Error::invalid(e.to_string()))?);
            }
            Ok(TrainedModel::Gmm(GmmBank::fit(&per_class, &settings.gmm_for(spec.extractor))?))
        }
        Prepared::Embedded { dim, rows } => {
            let sub = rows.select(ndarray::Axis(0), idx);
            let sub_labels: Vec<usize> = idx.iter().map(|&i| labels[i]).collect();
            Ok(TrainedModel::Cdl(cdl::fit_embedded(&sub, &sub_labels, n_classes, *dim, settings.cdl_rule)?))
        }
    }
}

/// Raw class scores (`idx.len() x classes`) for the clips at `idx`.
pub fn score_prepared(model: &TrainedModel, prepared: &Prepared, idx: &[usize]) -> Result<Array2<f64>> {
    let n_classes = match model {
        TrainedModel::Gmm(b) => b.n_classes(),
        TrainedModel::Cdl(p) => p.n_classes(),
    };
    let mut out = Array2::zeros((idx.len(), n_classes));
    for (mut row, &i) in out.rows_mut().into_iter().zip(idx) {
        let scores = match (model, prepared) {
            (TrainedModel::Gmm(bank), Prepared::Frames(frames)) => gmm::classify_gmm(bank, &frames[i])?.scores,
            (TrainedModel::Cdl(proj), Prepared::Embedded { rows, .. }) => {
                let z = proj.discriminant.project(&rows.row(i).to_owned());
                proj.distances(&z).into_iter().map(|d| -d).collect()
            }
            _ => return Err(Error::invalid("model and prepared data belong to different classifiers")),
        };
        row.assign(&ndarray::Array1::from(scores));
    }
    Ok(out)
}

/// Raw class scores of one clip from its frame features.
pub fn score_frames(model: &TrainedModel, x: &Array2<f64>, eps_scale: f64) -> Result<Vec<f64>> {
    Ok(match model {
        TrainedModel::Gmm(bank) => gmm::classify_gmm(bank, x)?.scores,
        TrainedModel::Cdl(proj) => cdl::classify_cdl(proj, &cdl::covariance_descriptor(x, eps_scale, "")?)?.scores,
    })
}

/// A trained system with what is needed to score new clips.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemModel {
    pub spec: SystemSpec,
    pub class_names: Vec<String>,
    pub cdl_eps_scale: f64,
    pub model: TrainedModel,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelMeta {
    system: String,
    classes: Vec<String>,
    cdl_eps_scale: f64,
}

/// Sidecar holding the system id and class names next to a model file.
pub fn meta_path(model_path: &Path) -> PathBuf {
    let mut name = model_path.file_name().unwrap_or_default().to_os_string();
    name.push(".meta.toml");
    model_path.with_file_name(name)
}

pub fn save_model(model: &SystemModel, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    match &model.model {
        TrainedModel::Gmm(b) => gmm::save_gmm_bank(b, path)?,
        TrainedModel::Cdl(p) => cdl::save_cdl(p, path)?,
    }
    let meta = ModelMeta {
        system: model.spec.id(),
        classes: model.class_names.clone(),
        cdl_eps_scale: model.cdl_eps_scale,
    };
    let text = toml::to_string(&meta).map_err(|e| Error::invalid(e.to_string()))?;
    let mp = meta_path(path);
    std::fs::write(&mp, text).map_err(|e| Error::io(&mp, e))
}

pub fn load_model(path: impl AsRef<Path>) -> Result<SystemModel> {
    let path = path.as_ref();
    let mp = meta_path(path);
    let text = std::fs::read_to_string(&mp).map_err(|e| Error::io(&mp, e))?;
    let meta: ModelMeta = toml::from_str(&text).map_err(|e| Error::Parse {
        path: mp.display().to_string(),
        line: e.span().map_or(0, |s| text[..s.start].lines().count().max(1)),
        message: e.message().to_string(),
    })?;
    let spec: SystemSpec = meta.system.parse()?;
    let model = match spec.classifier {
        Classifier::Gmm => TrainedModel::Gmm(gmm::load_gmm_bank(path)?),
        Classifier::Cdl => TrainedModel::Cdl(cdl::load_cdl(path)?),
    };
    let n = match &model {
        TrainedModel::Gmm(b) => b.n_classes(),
        TrainedModel::Cdl(p) => p.n_classes(),
    };
    if n != meta.classes.len() {
        return Err(Error::DimensionMismatch {
            expected: meta.classes.len(),
            found: n,
        });
    }
    Ok(SystemModel {
        spec,
        class_names: meta.classes,
        cdl_eps_scale: meta.cdl_eps_scale,
        model,
    })
}

/// File extension a system's model is written with.
pub fn model_extension(spec: SystemSpec) -> &'static str {
    match spec.classifier {
        Classifier::Gmm => "sfg",
        Classifier::Cdl => "sfc",
    }
}
