//! Collection ingest: feature files, top-t concept sparsification and the
//! immutable in-memory collection the engine works on.

mod manifest;
pub mod matrix;
pub mod synth;
mod truth;

use std::borrow::Cow;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

pub use manifest::{CollectionManifest, DEFAULT_TOP_T, MANIFEST_VERSION};
pub use truth::GroundTruth;

use crate::error::{Error, Result};
use crate::ids::ImageId;
use crate::sparse::{compress_concepts, SparseRow, SparseVec};
use matrix::{MatrixReader, MatrixWriter};

/// One collection item, borrowed from a [`Collection`].
#[derive(Clone, Debug, PartialEq)]
pub struct ImageRecord<'a> {
    pub image_id: ImageId,
    pub abstract_vec: &'a [f32],
    pub concept_vec: SparseRow<'a>,
    pub display_uri: Cow<'a, str>,
    pub metadata: Option<&'a str>,
}

/// Immutable image collection: dense abstract vectors for indexing and
/// sparse concept vectors for the interactive classifiers.
#[derive(Clone, Debug, PartialEq)]
pub struct Collection {
    name: String,
    abstract_dim: usize,
    concept_dim: usize,
    top_t: usize,
    abstract_data: Vec<f32>,
    concept_ptr: Vec<usize>,
    concept_idx: Vec<u32>,
    concept_val: Vec<f32>,
    uris: Option<Vec<String>>,
    metadata: Option<Vec<Option<String>>>,
}

impl Collection {
    /// Load and validate a collection from its JSON manifest.
    pub fn load(manifest_path: impl AsRef<Path>) -> Result<Self> {
        let manifest = CollectionManifest::load(manifest_path)?;
        Self::from_manifest(&manifest)
    }

    pub fn from_manifest(manifest: &CollectionManifest) -> Result<Self> {
        manifest.validate()?;
        manifest.verify_checksum()?;
        let n = manifest.n;

        let abstract_path = manifest.resolve(&manifest.abstract_path);
        let mut reader = open_checked(&abstract_path, n, manifest.abstract_dim)?;
        let mut abstract_data = vec![0.0f32; n * manifest.abstract_dim];
        for row in abstract_data.chunks_exact_mut(manifest.abstract_dim) {
            reader.read_row(row)?;
        }

        let concept_path = manifest.resolve(&manifest.concept_path);
        let mut reader = open_checked(&concept_path, n, manifest.concept_dim)?;
        let mut builder_row = vec![0.0f32; manifest.concept_dim];
        let mut concept_ptr = Vec::with_capacity(n + 1);
        let mut concept_idx = Vec::with_capacity(n * manifest.top_t);
        let mut concept_val = Vec::with_capacity(n * manifest.top_t);
        concept_ptr.push(0);
        for _ in 0..n {
            reader.read_row(&mut builder_row)?;
            let sparse = compress_concepts(&builder_row, manifest.top_t);
            concept_idx.extend_from_slice(&sparse.indices);
            concept_val.extend_from_slice(&sparse.values);
            concept_ptr.push(concept_idx.len());
        }

        let uris = match &manifest.uris_path {
            Some(p) => Some(read_lines(&manifest.resolve(p), n)?),
            None => None,
        };
        let metadata = match &manifest.metadata_path {
            Some(p) => {
                let path = manifest.resolve(p);
                let lines = read_lines(&path, n)?;
                let parsed = lines
                    .iter()
                    .enumerate()
                    .map(|(row, line)| {
                        serde_json::from_str::<Option<String>>(line).map_err(|e| {
                            Error::ShapeMismatch {
                                path: path.clone(),
                                row,
                                detail: format!("metadata line is not a JSON string or null: {e}"),
                            }
                        })
                    })
                    .collect::<Result<Vec<_>>>()?;
                Some(parsed)
            }
            None => None,
        };

        Ok(Collection {
            name: manifest.name.clone(),
            abstract_dim: manifest.abstract_dim,
            concept_dim: manifest.concept_dim,
            top_t: manifest.top_t,
            abstract_data,
            concept_ptr,
            concept_idx,
            concept_val,
            uris,
            metadata,
        })
    }

    /// Write the collection as feature files plus `manifest.json` under `dir`
    /// and return the manifest path.
    pub fn save(&self, dir: impl AsRef<Path>) -> Result<PathBuf> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let n = self.len();

        let abstract_path = dir.join("abstract.bin");
        let mut w = MatrixWriter::create(&abstract_path, n, self.abstract_dim)?;
        for row in self.abstract_data.chunks_exact(self.abstract_dim) {
            w.write_row(row)?;
        }
        w.finish()?;

        let concept_path = dir.join("concepts.bin");
        let mut w = MatrixWriter::create(&concept_path, n, self.concept_dim)?;
        let mut dense = vec![0.0f32; self.concept_dim];
        for i in 0..n {
            let row = self.concept(ImageId(i as u32));
            for (c, v) in row.iter() {
                dense[c as usize] = v;
            }
            w.write_row(&dense)?;
            for &c in row.indices {
                dense[c as usize] = 0.0;
            }
        }
        w.finish()?;

        let uris_path = match &self.uris {
            Some(uris) => {
                let p = dir.join("uris.txt");
                write_lines(&p, uris.iter().map(String::as_str))?;
                Some(PathBuf::from("uris.txt"))
            }
            None => None,
        };
        let metadata_path = match &self.metadata {
            Some(meta) => {
                let p = dir.join("metadata.jsonl");
                let lines: Vec<String> = meta
                    .iter()
                    .map(serde_json::to_string)
                    .collect::<std::result::Result<_, _>>()?;
                write_lines(&p, lines.iter().map(String::as_str))?;
                Some(PathBuf::from("metadata.jsonl"))
            }
            None => None,
        };

        let mut manifest = CollectionManifest {
            version: MANIFEST_VERSION,
            name: self.name.clone(),
            n,
            abstract_dim: self.abstract_dim,
            concept_dim: self.concept_dim,
            top_t: self.top_t,
            abstract_path: PathBuf::from("abstract.bin"),
            concept_path: PathBuf::from("concepts.bin"),
            uris_path,
            metadata_path,
            checksum: None,
            base_dir: dir.to_path_buf(),
        };
        manifest.checksum = Some(manifest.compute_checksum()?);
        let manifest_path = dir.join("manifest.json");
        manifest.save(&manifest_path)?;
        Ok(manifest_path)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn len(&self) -> usize {
        self.concept_ptr.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn contains(&self, id: ImageId) -> bool {
        id.index() < self.len()
    }

    pub fn abstract_dim(&self) -> usize {
        self.abstract_dim
    }

    pub fn concept_dim(&self) -> usize {
        self.concept_dim
    }

    pub fn top_t(&self) -> usize {
        self.top_t
    }

    pub fn abstract_vec(&self, id: ImageId) -> &[f32] {
        let start = id.index() * self.abstract_dim;
        &self.abstract_data[start..start + self.abstract_dim]
    }

    /// All abstract vectors, row-major.
    pub fn abstract_matrix(&self) -> &[f32] {
        &self.abstract_data
    }

    pub fn concept(&self, id: ImageId) -> SparseRow<'_> {
        let (a, b) = (self.concept_ptr[id.index()], self.concept_ptr[id.index() + 1]);
        SparseRow {
            indices: &self.concept_idx[a..b],
            values: &self.concept_val[a..b],
        }
    }

    pub fn display_uri(&self, id: ImageId) -> Cow<'_, str> {
        match &self.uris {
            Some(uris) => Cow::Borrowed(uris[id.index()].as_str()),
            None => Cow::Owned(format!("image://{}", id.0)),
        }
    }

    pub fn metadata(&self, id: ImageId) -> Option<&str> {
        self.metadata.as_ref()?.get(id.index())?.as_deref()
    }

    pub fn record(&self, id: ImageId) -> ImageRecord<'_> {
        ImageRecord {
            image_id: id,
            abstract_vec: self.abstract_vec(id),
            concept_vec: self.concept(id),
            display_uri: self.display_uri(id),
            metadata: self.metadata(id),
        }
    }

    pub fn ids(&self) -> impl Iterator<Item = ImageId> {
        (0..self.len() as u32).map(ImageId)
    }
}

fn open_checked(path: &Path, n: usize, dim: usize) -> Result<MatrixReader> {
    let reader = MatrixReader::open(path)?;
    let h = reader.header();
    if h.cols as usize != dim {
        return Err(Error::ShapeMismatch {
            path: path.to_path_buf(),
            row: 0,
            detail: format!("file has {} columns, manifest expects {dim}", h.cols),
        });
    }
    if h.rows as usize != n {
        return Err(Error::ShapeMismatch {
            path: path.to_path_buf(),
            row: (h.rows as usize).min(n),
            detail: format!("file has {} rows, manifest expects {n}", h.rows),
        });
    }
    Ok(reader)
}

fn read_lines(path: &Path, n: usize) -> Result<Vec<String>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let lines = BufReader::new(file)
        .lines()
        .collect::<std::io::Result<Vec<_>>>()
        .map_err(|e| Error::io(path, e))?;
    if lines.len() != n {
        return Err(Error::ShapeMismatch {
            path: path.to_path_buf(),
            row: lines.len().min(n),
            detail: format!("{} lines, manifest expects {n}", lines.len()),
        });
    }
    Ok(lines)
}

fn write_lines<'a>(path: &Path, lines: impl Iterator<Item = &'a str>) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for line in lines {
        writeln!(w, "{line}").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Incremental in-memory construction of a [`Collection`].
#[derive(Clone, Debug)]
pub struct CollectionBuilder {
    inner: Collection,
}

impl CollectionBuilder {
    pub fn new(abstract_dim: usize, concept_dim: usize, top_t: usize) -> Self {
        CollectionBuilder {
            inner: Collection {
                name: String::new(),
                abstract_dim,
                concept_dim,
                top_t,
                abstract_data: Vec::new(),
                concept_ptr: vec![0],
                concept_idx: Vec::new(),
                concept_val: Vec::new(),
                uris: None,
                metadata: None,
            },
        }
    }

    pub fn name(mut self, name: impl Into<String>) -> Self {
        self.inner.name = name.into();
        self
    }

    pub fn reserve(&mut self, rows: usize) {
        let c = &mut self.inner;
        c.abstract_data.reserve(rows * c.abstract_dim);
        c.concept_ptr.reserve(rows);
        c.concept_idx.reserve(rows * c.top_t);
        c.concept_val.reserve(rows * c.top_t);
    }

    /// Append an image given its dense concept row; the row is sparsified here.
    pub fn push_dense(&mut self, abstract_vec: &[f32], concept_row: &[f32]) -> Result<ImageId> {
        if concept_row.len() != self.inner.concept_dim {
            return Err(Error::InvalidParameter(format!(
                "concept row has {} values, expected {}",
                concept_row.len(),
                self.inner.concept_dim
            )));
        }
        if concept_row.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("non-finite concept value".into()));
        }
        let sparse = compress_concepts(concept_row, self.inner.top_t);
        self.push_compressed(abstract_vec, &sparse)
    }

    /// Append an image given an already sparse concept vector. Entries beyond
    /// the top `t` (and non-positive entries) are dropped.
    pub fn push_sparse(&mut self, abstract_vec: &[f32], concept: &SparseVec) -> Result<ImageId> {
        let dim = self.inner.concept_dim;
        if concept.indices.len() != concept.values.len()
            || concept.indices.windows(2).any(|w| w[0] >= w[1])
            || concept.indices.iter().any(|&i| i as usize >= dim)
        {
            return Err(Error::InvalidParameter(
                "sparse concept indices must be strictly increasing and in range".into(),
            ));
        }
        if concept.values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("non-finite concept value".into()));
        }
        let sparse = if concept.nnz() > self.inner.top_t || concept.values.iter().any(|&v| v <= 0.0) {
            compress_concepts(&concept.to_dense(dim), self.inner.top_t)
        } else {
            concept.clone()
        };
        self.push_compressed(abstract_vec, &sparse)
    }

    fn push_compressed(&mut self, abstract_vec: &[f32], sparse: &SparseVec) -> Result<ImageId> {
        let c = &mut self.inner;
        if abstract_vec.len() != c.abstract_dim {
            return Err(Error::InvalidParameter(format!(
                "abstract vector has {} values, expected {}",
                abstract_vec.len(),
                c.abstract_dim
            )));
        }
        if abstract_vec.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("non-finite abstract value".into()));
        }
        let id = ImageId((c.concept_ptr.len() - 1) as u32);
        c.abstract_data.extend_from_slice(abstract_vec);
        c.concept_idx.extend_from_slice(&sparse.indices);
        c.concept_val.extend_from_slice(&sparse.values);
        c.concept_ptr.push(c.concept_idx.len());
        Ok(id)
    }

    pub fn uris(mut self, uris: Vec<String>) -> Self {
        self.inner.uris = Some(uris);
        self
    }

    pub fn metadata(mut self, metadata: Vec<Option<String>>) -> Self {
        self.inner.metadata = Some(metadata);
        self
    }

    pub fn build(self) -> Result<Collection> {
        let c = self.inner;
        let n = c.len();
        if n == 0 {
            return Err(Error::InvalidParameter("a collection needs at least one image".into()));
        }
        if c.top_t == 0 || c.abstract_dim == 0 || c.concept_dim == 0 {
            return Err(Error::InvalidParameter("dimensions and top_t must be positive".into()));
        }
        if c.uris.as_ref().is_some_and(|u| u.len() != n)
            || c.metadata.as_ref().is_some_and(|m| m.len() != n)
        {
            return Err(Error::InvalidParameter("uri/metadata count differs from image count".into()));
        }
        Ok(c)
    }
}
