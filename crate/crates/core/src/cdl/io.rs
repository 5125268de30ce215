use std::path::Path;

use ndarray::{Array1, Array2};

use super::{CdlProjection, FisherDiscriminant, NeighborRule};
use crate::binio::{Reader, Writer};
use crate::error::{Error, Result};

pub const CDL_FORMAT_VERSION: u32 = 1;
const MAGIC: &str = "SFC1";

impl CdlProjection {
    /// `SFC1`, version, descriptor dim, d_out, d_vec, classes, neighbor rule,
    /// reference count; then projection, centroids, mean, and each reference
    /// as a u32 class followed by its projected vector. One FNV-1a checksum
    /// over all float bytes closes the file.
    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut w = Writer::default();
        w.bytes(MAGIC.as_bytes());
        w.u32(CDL_FORMAT_VERSION);
        w.len_u32(self.dim)?;
        w.len_u32(self.d_out())?;
        w.len_u32(self.discriminant.d_in())?;
        w.len_u32(self.n_classes())?;
        w.u32(match self.rule {
            NeighborRule::Centroid => 0,
            NeighborRule::NearestSample => 1,
        });
        w.len_u32(self.references.len())?;
        w.floats(self.discriminant.projection.iter());
        w.floats(self.class_centroids.iter());
        w.floats(self.discriminant.mean.iter());
        for (c, v) in &self.references {
            w.len_u32(*c)?;
            w.floats(v.iter());
        }
        w.checksum();
        Ok(w.buf)
    }

    pub fn from_bytes(data: &[u8]) -> Result<Self> {
        let mut r = Reader::new(data);
        r.magic(MAGIC)?;
        let version = r.u32()?;
        if version != CDL_FORMAT_VERSION {
            return Err(Error::VersionMismatch {
                expected: CDL_FORMAT_VERSION,
                found: version,
            });
        }
        let dim = r.usize()?;
        let d_out = r.usize()?;
        let d_vec = r.usize()?;
        let classes = r.usize()?;
        let rule = match r.u32()? {
            0 => NeighborRule::Centroid,
            1 => NeighborRule::NearestSample,
            other => return Err(Error::invalid(format!("unknown neighbor rule tag {other}"))),
        };
        let n_refs = r.usize()?;
        if d_vec != super::embedding_len(dim) {
            return Err(Error::invalid("embedding length does not match descriptor dim"));
        }
        let shape = |rows: usize, cols: usize, v: Vec<f64>| {
            Array2::from_shape_vec((rows, cols), v).map_err(|e| Error::invalid(e.to_string()))
        };
        let projection = shape(d_out, d_vec, r.floats(d_out * d_vec)?)?;
        let class_centroids = shape(classes, d_out, r.floats(classes * d_out)?)?;
        let mean = Array1::from(r.floats(d_vec)?);
        let mut references = Vec::with_capacity(n_refs.min(1 << 16));
        for _ in 0..n_refs {
            let c = r.usize()?;
            if c >= classes {
                return Err(Error::invalid("reference class out of range"));
            }
            references.push((c, Array1::from(r.floats(d_out)?)));
        }
        r.verify_checksum("CDL model")?;
        r.finish()?;
        Ok(CdlProjection {
            dim,
            discriminant: FisherDiscriminant { projection, mean },
            class_centroids,
            rule,
            references,
        })
    }
}

pub fn save_cdl(model: &CdlProjection, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, model.to_bytes()?).map_err(|e| Error::io(path, e))
}

pub fn load_cdl(path: impl AsRef<Path>) -> Result<CdlProjection> {
    let path = path.as_ref();
    CdlProjection::from_bytes(&std::fs::read(path).map_err(|e| Error::io(path, e))?)
}
