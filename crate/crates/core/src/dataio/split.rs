use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::manifest::DatasetManifest;
use crate::error::{Error, Result};

/// Stratified train/test split. Per class, `max(1, round(f * n))` entries go to
/// train after a seeded shuffle. Both halves keep the source class list and
/// preserve manifest order.
pub fn split_dataset(
    manifest: &DatasetManifest,
    train_fraction: f64,
    seed: u64,
) -> Result<(DatasetManifest, DatasetManifest)> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::invalid(format!(
            "train fraction {train_fraction} outside (0, 1)"
        )));
    }
    let labels = manifest.labels();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut in_train = vec![false; labels.len()];
    for (c, name) in manifest.class_names.iter().enumerate() {
        let mut members: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == c).collect();
        if members.len() < 2 {
            return Err(Error::invalid(format!(
                "class {name:?} has {} entr{}; at least 2 are needed to split",
                members.len(),
                if members.len() == 1 { "y" } else { "ies" }
            )));
        }
        members.shuffle(&mut rng);
        for &i in &members[..train_count(members.len(), train_fraction)] {
            in_train[i] = true;
        }
    }
    let pick = |want: bool| {
        manifest
            .entries
            .iter()
            .zip(&in_train)
            .filter(|(_, &t)| t == want)
            .map(|(e, _)| e.clone())
            .collect::<Vec<_>>()
    };
    Ok((
        DatasetManifest::with_classes(pick(true), manifest.class_names.clone())?,
        DatasetManifest::with_classes(pick(false), manifest.class_names.clone())?,
    ))
}

pub(crate) fn train_count(n: usize, fraction: f64) -> usize {
    ((fraction * n as f64).round() as usize).clamp(1, n)
}
