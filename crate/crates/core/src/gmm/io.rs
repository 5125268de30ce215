use std::path::Path;

use ndarray::{Array1, Array2};

use super::{GmmBank, GmmModel};
use crate::binio::{Reader, Writer};
use crate::error::{Error, Result};

pub const GMM_FORMAT_VERSION: u32 = 1;
const MAGIC: &str = "SFG1";

impl GmmBank {
    /// `SFG1`, version, class count, then per class `K`, `dim`, weights,
    /// means and variances; one FNV-1a checksum over all float bytes.
    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut w = Writer::default();
        w.bytes(MAGIC.as_bytes());
        w.u32(GMM_FORMAT_VERSION);
        w.len_u32(self.models.len())?;
        for m in &self.models {
            w.len_u32(m.n_components())?;
            w.len_u32(m.dim())?;
            w.floats(m.weights.iter());
            w.floats(m.means.iter());
            w.floats(m.variances.iter());
        }
        w.checksum();
        Ok(w.buf)
    }

    pub fn from_bytes(data: &[u8]) -> Result<Self> {
        let mut r = Reader::new(data);
        r.magic(MAGIC)?;
        let version = r.u32()?;
        if version != GMM_FORMAT_VERSION {
            return Err(Error::VersionMismatch {
                expected: GMM_FORMAT_VERSION,
                found: version,
            });
        }
        let classes = r.usize()?;
        let mut models = Vec::with_capacity(classes.min(1024));
        for _ in 0..classes {
            let k = r.usize()?;
            let dim = r.usize()?;
            let size = k.checked_mul(dim).ok_or(Error::Truncated)?;
            let weights = Array1::from(r.floats(k)?);
            let shape = |v| Array2::from_shape_vec((k, dim), v).map_err(|e| Error::invalid(e.to_string()));
            let means = shape(r.floats(size)?)?;
            let variances = shape(r.floats(size)?)?;
            models.push((weights, means, variances));
        }
        r.verify_checksum("GMM bank")?;
        r.finish()?;
        let models = models
            .into_iter()
            .map(|(w, m, v)| GmmModel::new(w, m, v))
            .collect::<Result<Vec<_>>>()?;
        GmmBank::new(models)
    }
}

pub fn save_gmm_bank(bank: &GmmBank, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, bank.to_bytes()?).map_err(|e| Error::io(path, e))
}

pub fn load_gmm_bank(path: impl AsRef<Path>) -> Result<GmmBank> {
    let path = path.as_ref();
    GmmBank::from_bytes(&std::fs::read(path).map_err(|e| Error::io(path, e))?)
}
