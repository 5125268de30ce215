use std::collections::BTreeMap;
use std::path::Path;

use ndarray::Array2;

use crate::binio::{Reader, Writer};
use crate::error::{Error, Result};
use crate::spectral::FeatureMatrix;

pub const FEATURE_FORMAT_VERSION: u32 = 1;
const MAGIC: &str = "SFS1";

/// Feature matrices keyed by `(source_id, extractor)`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct FeatureStore {
    records: BTreeMap<(String, String), FeatureMatrix>,
}

impl FeatureStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn format_version(&self) -> u32 {
        FEATURE_FORMAT_VERSION
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Inserts a matrix under its own extractor name, replacing any previous one.
    pub fn insert(&mut self, source_id: impl Into<String>, matrix: FeatureMatrix) -> Result<()> {
        if let Some(dim) = self.dim_of(&matrix.extractor) {
            if dim != matrix.dim() {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: matrix.dim(),
                });
            }
        }
        self.records
            .insert((source_id.into(), matrix.extractor.clone()), matrix);
        Ok(())
    }

    pub fn get(&self, source_id: &str, extractor: &str) -> Option<&FeatureMatrix> {
        self.records
            .get(&(source_id.to_string(), extractor.to_string()))
    }

    /// Like [`get`](Self::get) but reports which record is missing.
    pub fn require(&self, source_id: &str, extractor: &str) -> Result<&FeatureMatrix> {
        self.get(source_id, extractor).ok_or_else(|| {
            Error::invalid(format!("no {extractor:?} features for {source_id:?}"))
        })
    }

    pub fn dim_of(&self, extractor: &str) -> Option<usize> {
        self.records
            .iter()
            .find(|((_, e), _)| e == extractor)
            .map(|(_, m)| m.dim())
    }

    /// Source ids holding features for `extractor`, in key order.
    pub fn sources_for<'a>(&'a self, extractor: &'a str) -> impl Iterator<Item = &'a str> + 'a {
        self.records
            .keys()
            .filter(move |(_, e)| e == extractor)
            .map(|(s, _)| s.as_str())
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &FeatureMatrix)> {
        self.records.iter().map(|((s, _), m)| (s.as_str(), m))
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut w = Writer::default();
        w.bytes(MAGIC.as_bytes());
        w.u32(FEATURE_FORMAT_VERSION);
        w.len_u32(self.records.len())?;
        for ((source, extractor), m) in &self.records {
            w.str(source)?;
            w.str(extractor)?;
            w.len_u32(m.n_frames())?;
            w.len_u32(m.dim())?;
            w.floats(m.values.iter());
            w.checksum();
        }
        Ok(w.buf)
    }

    pub fn from_bytes(data: &[u8]) -> Result<Self> {
        let mut r = Reader::new(data);
        r.magic(MAGIC)?;
        let version = r.u32()?;
        if version != FEATURE_FORMAT_VERSION {
            return Err(Error::VersionMismatch {
                expected: FEATURE_FORMAT_VERSION,
                found: version,
            });
        }
        let count = r.usize()?;
        let mut store = FeatureStore::new();
        for _ in 0..count {
            let source = r.str()?;
            let extractor = r.str()?;
            let rows = r.usize()?;
            let cols = r.usize()?;
            let values = r.floats(rows.checked_mul(cols).ok_or(Error::Truncated)?)?;
            r.verify_checksum(format!("record ({source}, {extractor})"))?;
            let values = Array2::from_shape_vec((rows, cols), values)
                .map_err(|e| Error::invalid(e.to_string()))?;
            store.insert(source, FeatureMatrix::new(values, extractor)?)?;
        }
        r.finish()?;
        Ok(store)
    }
}

pub fn save_features(store: &FeatureStore, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, store.to_bytes()?).map_err(|e| Error::io(path, e))
}

pub fn load_features(path: impl AsRef<Path>) -> Result<FeatureStore> {
    let path = path.as_ref();
    let data = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    FeatureStore::from_bytes(&data)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn matrix(rows: usize, cols: usize, extractor: &str) -> FeatureMatrix {
        let values = Array2::from_shape_fn((rows, cols), |(i, j)| (i * cols + j) as f64 * 0.125 - 3.0);
        FeatureMatrix::new(values, extractor).unwrap()
    }

    #[test]
    fn empty_store_round_trips() {
        let s = FeatureStore::new();
        let bytes = s.to_bytes().unwrap();
        assert_eq!(bytes.len(), 12);
        assert_eq!(FeatureStore::from_bytes(&bytes).unwrap(), s);
    }

    #[test]
    fn one_record_round_trips_exactly() {
        let mut s = FeatureStore::new();
        s.insert("a.wav", matrix(3, 60, "mfcc")).unwrap();
        let back = FeatureStore::from_bytes(&s.to_bytes().unwrap()).unwrap();
        let (a, b) = (s.get("a.wav", "mfcc").unwrap(), back.get("a.wav", "mfcc").unwrap());
        for (x, y) in a.values.iter().zip(b.values.iter()) {
            assert_eq!(x.to_bits(), y.to_bits());
        }
    }

    #[test]
    fn layout_matches_wire_format() {
        let mut s = FeatureStore::new();
        s.insert("ab", matrix(1, 2, "x")).unwrap();
        let bytes = s.to_bytes().unwrap();
        assert_eq!(&bytes[..4], b"SFS1");
        assert_eq!(&bytes[4..8], &1u32.to_le_bytes());
        assert_eq!(&bytes[8..12], &1u32.to_le_bytes());
        assert_eq!(&bytes[12..16], &2u32.to_le_bytes());
        assert_eq!(&bytes[16..18], b"ab");
        assert_eq!(&bytes[18..22], &1u32.to_le_bytes());
        assert_eq!(&bytes[22..23], b"x");
        assert_eq!(&bytes[23..27], &1u32.to_le_bytes());
        assert_eq!(&bytes[27..31], &2u32.to_le_bytes());
        let floats = &bytes[31..47];
        assert_eq!(&floats[..8], &(-3.0f64).to_le_bytes());
        assert_eq!(&bytes[47..55], &crate::binio::fnv1a(floats).to_le_bytes());
        assert_eq!(bytes.len(), 55);
    }

    #[test]
    fn corruption_and_version_errors() {
        let mut s = FeatureStore::new();
        s.insert("a", matrix(3, 60, "mfcc")).unwrap();
        let bytes = s.to_bytes().unwrap();

        let mut bad = bytes.clone();
        let n = bad.len();
        bad[n - 9] ^= 0xff;
        assert!(matches!(FeatureStore::from_bytes(&bad), Err(Error::Checksum { .. })));

        let mut bad = bytes.clone();
        bad[n - 1] ^= 0x01;
        assert!(matches!(FeatureStore::from_bytes(&bad), Err(Error::Checksum { .. })));

        assert!(matches!(
            FeatureStore::from_bytes(&bytes[..bytes.len() - 3]),
            Err(Error::Truncated)
        ));

        let mut bad = bytes.clone();
        bad[4] = 2;
        assert!(matches!(
            FeatureStore::from_bytes(&bad),
            Err(Error::VersionMismatch { found: 2, .. })
        ));
    }

    #[test]
    fn extractor_dimension_is_fixed() {
        let mut s = FeatureStore::new();
        s.insert("a", matrix(3, 60, "mfcc")).unwrap();
        assert!(s.insert("b", matrix(3, 39, "mfcc")).is_err());
        s.insert("b", matrix(3, 39, "plp")).unwrap();
    }

    proptest! {
        #[test]
        fn payload_is_byte_identical(
            values in proptest::collection::vec(-1e300f64..1e300, 1..64),
            cols in 1usize..8,
        ) {
            let rows = values.len() / cols;
            prop_assume!(rows > 0);
            let m = Array2::from_shape_vec((rows, cols), values[..rows * cols].to_vec()).unwrap();
            let mut s = FeatureStore::new();
            s.insert("clip", FeatureMatrix::new(m, "spcc").unwrap()).unwrap();
            let bytes = s.to_bytes().unwrap();
            let back = FeatureStore::from_bytes(&bytes).unwrap();
            prop_assert_eq!(back.to_bytes().unwrap(), bytes);
        }
    }
}
