//! Product-quantization index over the abstract representation.
//!
//! The index holds the trained codebook, a code per image and the
//! centroid-to-centroid table used for symmetric distances. Query-time search
//! uses asymmetric distances (raw query against coded candidates); the kNN
//! matrix and the explorer use symmetric code-to-code distances.

mod codebook;
mod kmeans;
mod knn;
mod search;

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};

pub use codebook::{
    codebook_size, encode_all, isqrt, train_codebook, train_codebook_on, AdcTable, PqCode, PqCodebook,
    PqCodes, PqConfig, SdcRows, SdcTable,
};
pub use kmeans::{kmeans, nearest, KMeans};
pub use knn::{build_knn_matrix, estimated_bytes, KnnBuildConfig, KnnMatrix, DEFAULT_KNN};
pub use search::{ann_search, knn_pool, knn_suggest, NnParams};

use crate::dataset::Collection;
use crate::error::{Error, Result};

const INDEX_MAGIC: [u8; 8] = *b"II20PQX\0";
const KNN_MAGIC: [u8; 8] = *b"II20KNN\0";
const FILE_VERSION: u32 = 1;

/// Codebook, per-image codes and the symmetric distance table.
#[derive(Clone, Debug)]
pub struct PqIndex {
    pub codebook: PqCodebook,
    pub codes: PqCodes,
    pub sdc: SdcTable,
}

impl PqIndex {
    pub fn build(collection: &Collection, cfg: &PqConfig) -> Result<Self> {
        let codebook = train_codebook(collection, cfg)?;
        log::info!(
            "trained PQ codebook m={} k={} (iterations {:?})",
            codebook.m,
            codebook.k,
            codebook.iterations
        );
        Ok(Self::from_codebook(codebook, collection))
    }

    pub fn from_codebook(codebook: PqCodebook, collection: &Collection) -> Self {
        let codes = encode_all(&codebook, collection.abstract_matrix());
        let sdc = codebook.sdc_table();
        PqIndex { codebook, codes, sdc }
    }

    pub fn len(&self) -> usize {
        self.codes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.codes.is_empty()
    }

    pub fn build_knn(&self, cfg: &KnnBuildConfig) -> Result<KnnMatrix> {
        build_knn_matrix(&self.codes, &self.sdc, cfg)
    }

    /// Versioned little-endian binary: magic, version, shape, training
    /// metadata, centroids, then codes.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        let cb = &self.codebook;
        let res = (|| -> std::io::Result<()> {
            w.write_all(&INDEX_MAGIC)?;
            w.write_u32::<LittleEndian>(FILE_VERSION)?;
            w.write_u32::<LittleEndian>(cb.dim as u32)?;
            w.write_u32::<LittleEndian>(cb.m as u32)?;
            w.write_u32::<LittleEndian>(cb.k as u32)?;
            w.write_u64::<LittleEndian>(cb.seed)?;
            for &it in &cb.iterations {
                w.write_u32::<LittleEndian>(it)?;
            }
            for &v in &cb.centroids {
                w.write_f32::<LittleEndian>(v)?;
            }
            w.write_u64::<LittleEndian>(self.codes.len() as u64)?;
            for &c in &self.codes.codes {
                w.write_u16::<LittleEndian>(c)?;
            }
            w.flush()
        })();
        res.map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let mut r = BufReader::new(file);
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic).map_err(|e| Error::io(path, e))?;
        if magic != INDEX_MAGIC {
            return Err(Error::BadHeader {
                path: path.to_path_buf(),
                detail: "not a PQ index file".into(),
            });
        }
        let read = |r: &mut BufReader<File>| -> std::io::Result<(PqCodebook, PqCodes, u32)> {
            let version = r.read_u32::<LittleEndian>()?;
            let dim = r.read_u32::<LittleEndian>()? as usize;
            let m = r.read_u32::<LittleEndian>()? as usize;
            let k = r.read_u32::<LittleEndian>()? as usize;
            let seed = r.read_u64::<LittleEndian>()?;
            let mut iterations = vec![0u32; m];
            r.read_u32_into::<LittleEndian>(&mut iterations)?;
            let sub_dim = dim.checked_div(m).unwrap_or(0);
            let mut centroids = vec![0f32; m * k * sub_dim];
            r.read_f32_into::<LittleEndian>(&mut centroids)?;
            let n = r.read_u64::<LittleEndian>()? as usize;
            let mut codes = vec![0u16; n * m];
            r.read_u16_into::<LittleEndian>(&mut codes)?;
            let cb = PqCodebook {
                dim,
                m,
                k,
                sub_dim,
                centroids,
                iterations,
                seed,
            };
            Ok((cb, PqCodes { m, codes }, version))
        };
        let (cb, codes, version) = read(&mut r).map_err(|e| Error::io(path, e))?;
        if version != FILE_VERSION {
            return Err(Error::Version {
                what: "PQ index",
                found: version,
            });
        }
        // revalidate shape through the checked constructor
        let checked = PqCodebook::from_centroids(cb.dim, cb.m, cb.k, cb.centroids.clone())?;
        if codes.codes.iter().any(|&c| c as usize >= checked.k) {
            return Err(Error::BadHeader {
                path: path.to_path_buf(),
                detail: "code out of range".into(),
            });
        }
        let sdc = cb.sdc_table();
        Ok(PqIndex {
            codebook: cb,
            codes,
            sdc,
        })
    }
}

impl KnnMatrix {
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        let res = (|| -> std::io::Result<()> {
            w.write_all(&KNN_MAGIC)?;
            w.write_u32::<LittleEndian>(FILE_VERSION)?;
            w.write_u64::<LittleEndian>(self.len() as u64)?;
            w.write_u32::<LittleEndian>(self.per_row() as u32)?;
            for &v in self.raw() {
                w.write_u32::<LittleEndian>(v)?;
            }
            w.flush()
        })();
        res.map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let mut r = BufReader::new(file);
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic).map_err(|e| Error::io(path, e))?;
        if magic != KNN_MAGIC {
            return Err(Error::BadHeader {
                path: path.to_path_buf(),
                detail: "not a kNN matrix file".into(),
            });
        }
        let read = |r: &mut BufReader<File>| -> std::io::Result<(u32, usize, Vec<u32>)> {
            let version = r.read_u32::<LittleEndian>()?;
            let n = r.read_u64::<LittleEndian>()? as usize;
            let per_row = r.read_u32::<LittleEndian>()? as usize;
            let mut data = vec![0u32; n * per_row];
            r.read_u32_into::<LittleEndian>(&mut data)?;
            Ok((version, per_row, data))
        };
        let (version, per_row, data) = read(&mut r).map_err(|e| Error::io(path, e))?;
        if version != FILE_VERSION {
            return Err(Error::Version {
                what: "kNN matrix",
                found: version,
            });
        }
        KnnMatrix::from_rows(per_row, data)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::synth::{generate, SynthConfig};
    use crate::ids::ImageId;

    fn small() -> (Collection, PqIndex) {
        let cfg = SynthConfig {
            n: 300,
            clusters: 3,
            abstract_dim: 16,
            concept_dim: 32,
            ..SynthConfig::default()
        };
        let (c, _) = generate(&cfg).unwrap();
        let idx = PqIndex::build(&c, &PqConfig { m: 4, ..PqConfig::default() }).unwrap();
        (c, idx)
    }

    #[test]
    fn index_file_round_trip() {
        let (_, idx) = small();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("index.pq");
        idx.save(&p).unwrap();
        let back = PqIndex::load(&p).unwrap();
        assert_eq!(back.codebook, idx.codebook);
        assert_eq!(back.codes, idx.codes);
        assert_eq!(back.sdc, idx.sdc);
    }

    #[test]
    fn knn_file_round_trip() {
        let (_, idx) = small();
        let knn = idx.build_knn(&KnnBuildConfig::default()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("knn.bin");
        knn.save(&p).unwrap();
        assert_eq!(KnnMatrix::load(&p).unwrap(), knn);
        assert!(matches!(PqIndex::load(&p), Err(Error::BadHeader { .. })));
    }

    #[test]
    fn knn_rows_exclude_self_and_are_sorted() {
        let (_, idx) = small();
        let knn = idx.build_knn(&KnnBuildConfig::default()).unwrap();
        assert_eq!(knn.per_row(), 10);
        for i in 0..idx.len() {
            let row = knn.neighbors(ImageId(i as u32));
            assert!(!row.contains(&(i as u32)));
            let rows = idx.sdc.rows_for(idx.codes.code(i));
            let d: Vec<f32> = row.iter().map(|&j| rows.distance(idx.codes.code(j as usize))).collect();
            assert!(d.windows(2).all(|w| w[0] <= w[1]));
        }
    }

    #[test]
    fn knn_memory_cap() {
        let (_, idx) = small();
        let cfg = KnnBuildConfig { k: 10, max_bytes: 1000 };
        assert!(matches!(idx.build_knn(&cfg), Err(Error::KnnTooLarge { .. })));
    }
}
