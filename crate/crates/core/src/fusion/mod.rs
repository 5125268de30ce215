//! Late score fusion.
//!
//! Every system's raw per-class scores are min-max normalised per clip, then
//! combined as `fused_c = sum_n w_c^n s_c^n`. The weight of system `n` for
//! class `c` is `P(G = c | O = c)`: the fraction of the system's outputs of
//! class `c` that were correct, read off a confusion matrix estimated on the
//! training data.

mod io;

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::scores::argmax;

pub use io::{read_scores, read_weights, write_scores, write_weights, ScoreFile};

/// Per-clip class scores of one system.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreMatrix {
    pub system_id: String,
    pub clip_ids: Vec<String>,
    /// `clips x classes`.
    pub values: Array2<f64>,
    pub normalized: bool,
}

impl ScoreMatrix {
    pub fn new(system_id: impl Into<String>, clip_ids: Vec<String>, values: Array2<f64>) -> Result<Self> {
        if clip_ids.len() != values.nrows() {
            return Err(Error::DimensionMismatch {
                expected: values.nrows(),
                found: clip_ids.len(),
            });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("non-finite score"));
        }
        Ok(ScoreMatrix {
            system_id: system_id.into(),
            clip_ids,
            values,
            normalized: false,
        })
    }

    pub fn n_clips(&self) -> usize {
        self.values.nrows()
    }

    pub fn n_classes(&self) -> usize {
        self.values.ncols()
    }

    /// Argmax per clip, lowest index on ties.
    pub fn predictions(&self) -> Vec<usize> {
        self.values
            .rows()
            .into_iter()
            .map(|r| argmax(&r.to_vec()))
            .collect()
    }
}

/// Min-max normalises one row in place; a constant row becomes all ones.
pub fn normalize_row(row: &mut [f64]) {
    let (lo, hi) = row
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    if hi > lo {
        let span = hi - lo;
        for v in row.iter_mut() {
            *v = (*v - lo) / span;
        }
    } else {
        row.fill(1.0);
    }
}

pub fn normalize_scores(raw: &ScoreMatrix) -> Result<ScoreMatrix> {
    if raw.values.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid(format!("non-finite score in system {}", raw.system_id)));
    }
    let mut out = raw.clone();
    let mut values = out.values.as_standard_layout().into_owned();
    for mut row in values.rows_mut() {
        normalize_row(row.as_slice_mut().expect("standard layout"));
    }
    out.values = values;
    out.normalized = true;
    Ok(out)
}

/// Rows are ground truth, columns are system output.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfusionMatrix {
    pub counts: Array2<u64>,
}

impl ConfusionMatrix {
    pub fn zeros(n_classes: usize) -> Self {
        ConfusionMatrix {
            counts: Array2::zeros((n_classes, n_classes)),
        }
    }

    pub fn from_predictions(truth: &[usize], predicted: &[usize], n_classes: usize) -> Result<Self> {
        if truth.len() != predicted.len() {
            return Err(Error::DimensionMismatch {
                expected: truth.len(),
                found: predicted.len(),
            });
        }
        let mut m = ConfusionMatrix::zeros(n_classes);
        for (&t, &p) in truth.iter().zip(predicted) {
            m.record(t, p)?;
        }
        Ok(m)
    }

    pub fn record(&mut self, truth: usize, predicted: usize) -> Result<()> {
        let n = self.n_classes();
        if truth >= n || predicted >= n {
            return Err(Error::invalid(format!(
                "class index out of range ({truth}, {predicted}) for {n} classes"
            )));
        }
        self.counts[[truth, predicted]] += 1;
        Ok(())
    }

    pub fn n_classes(&self) -> usize {
        self.counts.nrows()
    }

    pub fn total(&self) -> u64 {
        self.counts.sum()
    }

    /// Correct fraction per ground-truth class; `None` for classes with no clips.
    pub fn class_accuracies(&self) -> Vec<Option<f64>> {
        self.counts
            .rows()
            .into_iter()
            .enumerate()
            .map(|(c, row)| {
                let n = row.sum();
                (n > 0).then(|| row[c] as f64 / n as f64)
            })
            .collect()
    }
}

/// Reliability weights, one row per system.
#[derive(Debug, Clone, PartialEq)]
pub struct FusionWeights {
    pub system_ids: Vec<String>,
    /// `systems x classes`, every entry in `[0, 1]`.
    pub values: Array2<f64>,
}

impl FusionWeights {
    pub fn n_classes(&self) -> usize {
        self.values.ncols()
    }

    pub fn row_of(&self, system_id: &str) -> Option<usize> {
        self.system_ids.iter().position(|s| s == system_id)
    }

    /// All-ones weights, turning fusion into a plain sum of normalised scores.
    pub fn uniform(system_ids: Vec<String>, n_classes: usize) -> Self {
        let values = Array2::ones((system_ids.len(), n_classes));
        FusionWeights { system_ids, values }
    }
}

/// `w_c = counts[c][c] / sum_g counts[g][c]`, or 0 for a class the system
/// never outputs.
pub fn class_weights(confusion: &ConfusionMatrix) -> Vec<f64> {
    let counts = &confusion.counts;
    (0..confusion.n_classes())
        .map(|c| {
            let column: u64 = counts.column(c).sum();
            if column == 0 {
                0.0
            } else {
                counts[[c, c]] as f64 / column as f64
            }
        })
        .collect()
}

pub fn fusion_weights<S: AsRef<str>>(systems: &[(S, ConfusionMatrix)]) -> Result<FusionWeights> {
    let n_classes = systems
        .first()
        .ok_or_else(|| Error::invalid("no systems to weight"))?
        .1
        .n_classes();
    let mut values = Array2::zeros((systems.len(), n_classes));
    for (mut row, (_, cm)) in values.rows_mut().into_iter().zip(systems) {
        if cm.n_classes() != n_classes {
            return Err(Error::DimensionMismatch {
                expected: n_classes,
                found: cm.n_classes(),
            });
        }
        row.assign(&ndarray::Array1::from(class_weights(cm)));
    }
    Ok(FusionWeights {
        system_ids: systems.iter().map(|(s, _)| s.as_ref().to_string()).collect(),
        values,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct FusionDecision {
    pub clip_ids: Vec<String>,
    /// `clips x classes` weighted sums.
    pub fused: Array2<f64>,
    pub predicted: Vec<usize>,
}

impl FusionDecision {
    /// The fused scores as a (non-normalised) score matrix.
    pub fn to_scores(&self, system_id: impl Into<String>) -> ScoreMatrix {
        ScoreMatrix {
            system_id: system_id.into(),
            clip_ids: self.clip_ids.clone(),
            values: self.fused.clone(),
            normalized: false,
        }
    }
}

/// Weighted sum of normalised scores, argmax per clip.
///
/// Weight rows are looked up by system id, so `weights` may cover more
/// systems than are being fused.
pub fn fuse(normalized: &[ScoreMatrix], weights: &FusionWeights) -> Result<FusionDecision> {
    let first = normalized
        .first()
        .ok_or_else(|| Error::invalid("no systems to fuse"))?;
    let (n_clips, n_classes) = first.values.dim();
    if weights.n_classes() != n_classes {
        return Err(Error::DimensionMismatch {
            expected: n_classes,
            found: weights.n_classes(),
        });
    }
    let mut fused = Array2::<f64>::zeros((n_clips, n_classes));
    for sys in normalized {
        if !sys.normalized {
            return Err(Error::invalid(format!("scores of {} are not normalized", sys.system_id)));
        }
        if sys.values.dim() != (n_clips, n_classes) {
            return Err(Error::invalid(format!(
                "scores of {} have shape {:?}, expected {:?}",
                sys.system_id,
                sys.values.dim(),
                (n_clips, n_classes)
            )));
        }
        if sys.clip_ids != first.clip_ids {
            return Err(Error::invalid(format!(
                "clip order of {} differs from {}",
                sys.system_id, first.system_id
            )));
        }
        let row = weights
            .row_of(&sys.system_id)
            .ok_or_else(|| Error::invalid(format!("no weights for system {}", sys.system_id)))?;
        let w = weights.values.row(row);
        for (mut f, s) in fused.rows_mut().into_iter().zip(sys.values.rows()) {
            for c in 0..n_classes {
                f[c] += w[c] * s[c];
            }
        }
    }
    let predicted = fused
        .rows()
        .into_iter()
        .map(|r| argmax(&r.to_vec()))
        .collect();
    Ok(FusionDecision {
        clip_ids: first.clip_ids.clone(),
        fused,
        predicted,
    })
}

/// Stratified fold index per clip: each class is shuffled with `seed` and
/// dealt round-robin over the folds.
pub fn stratified_folds(labels: &[usize], n_classes: usize, folds: usize, seed: u64) -> Result<Vec<usize>> {
    if folds < 2 {
        return Err(Error::invalid("need at least 2 folds"));
    }
    let mut per_class = vec![Vec::new(); n_classes];
    for (i, &l) in labels.iter().enumerate() {
        per_class
            .get_mut(l)
            .ok_or_else(|| Error::invalid(format!("label {l} out of range")))?
            .push(i);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut assignment = vec![0; labels.len()];
    for (c, members) in per_class.iter_mut().enumerate() {
        if members.len() < folds {
            return Err(Error::invalid(format!(
                "class {c} has {} clips, fewer than {folds} folds",
                members.len()
            )));
        }
        members.shuffle(&mut rng);
        for (pos, &i) in members.iter().enumerate() {
            assignment[i] = pos % folds;
        }
    }
    Ok(assignment)
}

/// Pools held-out predictions over stratified folds.
///
/// `fit_predict(train, held_out)` trains on the clip indices `train` and
/// returns one predicted class per index in `held_out`.
pub fn cross_validated_confusion<F>(
    labels: &[usize],
    n_classes: usize,
    folds: usize,
    seed: u64,
    mut fit_predict: F,
) -> Result<ConfusionMatrix>
where
    F: FnMut(&[usize], &[usize]) -> Result<Vec<usize>>,
{
    let assignment = stratified_folds(labels, n_classes, folds, seed)?;
    let mut cm = ConfusionMatrix::zeros(n_classes);
    for k in 0..folds {
        let (held, train): (Vec<usize>, Vec<usize>) = (0..labels.len()).partition(|&i| assignment[i] == k);
        let predicted = fit_predict(&train, &held)?;
        if predicted.len() != held.len() {
            return Err(Error::DimensionMismatch {
                expected: held.len(),
                found: predicted.len(),
            });
        }
        for (&i, &p) in held.iter().zip(&predicted) {
            cm.record(labels[i], p)?;
        }
    }
    Ok(cm)
}

/// Trains and evaluates on the same clips.
pub fn resubstitution_confusion<F>(labels: &[usize], n_classes: usize, mut fit_predict: F) -> Result<ConfusionMatrix>
where
    F: FnMut(&[usize], &[usize]) -> Result<Vec<usize>>,
{
    let all: Vec<usize> = (0..labels.len()).collect();
    let predicted = fit_predict(&all, &all)?;
    ConfusionMatrix::from_predictions(labels, &predicted, n_classes)
}
