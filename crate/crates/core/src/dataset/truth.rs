use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ids::ImageId;

/// Annotation labels per image, drawn from a fixed dictionary.
///
/// On disk: CSV with header `image_id,label`, one row per (image, label) pair.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    dictionary: Vec<String>,
    labels: Vec<Vec<u32>>,
}

#[derive(Serialize, Deserialize)]
struct Row<'a> {
    image_id: u32,
    label: &'a str,
}

impl GroundTruth {
    pub fn new(n: usize) -> Self {
        GroundTruth {
            dictionary: Vec::new(),
            labels: vec![Vec::new(); n],
        }
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dictionary(&self) -> &[String] {
        &self.dictionary
    }

    pub fn label_index(&self, label: &str) -> Option<u32> {
        self.dictionary.iter().position(|l| l == label).map(|i| i as u32)
    }

    fn intern(&mut self, label: &str) -> u32 {
        match self.label_index(label) {
            Some(i) => i,
            None => {
                self.dictionary.push(label.to_owned());
                (self.dictionary.len() - 1) as u32
            }
        }
    }

    pub fn add(&mut self, image: ImageId, label: &str) -> Result<()> {
        if image.index() >= self.labels.len() {
            return Err(Error::UnknownImage(image));
        }
        let l = self.intern(label);
        let row = &mut self.labels[image.index()];
        if let Err(pos) = row.binary_search(&l) {
            row.insert(pos, l);
        }
        Ok(())
    }

    pub fn labels_of(&self, image: ImageId) -> &[u32] {
        &self.labels[image.index()]
    }

    pub fn has(&self, image: ImageId, label: u32) -> bool {
        self.labels[image.index()].binary_search(&label).is_ok()
    }

    pub fn count(&self, label: u32) -> usize {
        self.labels.iter().filter(|l| l.binary_search(&label).is_ok()).count()
    }

    pub fn images_with(&self, label: u32) -> impl Iterator<Item = ImageId> + '_ {
        self.labels
            .iter()
            .enumerate()
            .filter(move |(_, l)| l.binary_search(&label).is_ok())
            .map(|(i, _)| ImageId(i as u32))
    }

    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut w = csv::Writer::from_path(path)?;
        for (i, labels) in self.labels.iter().enumerate() {
            for &l in labels {
                w.serialize(Row {
                    image_id: i as u32,
                    label: &self.dictionary[l as usize],
                })?;
            }
        }
        w.flush().map_err(|e| Error::io(path, e))
    }

    /// Load labels for a collection of `n` images.
    pub fn load_csv(path: impl AsRef<Path>, n: usize) -> Result<Self> {
        let mut truth = GroundTruth::new(n);
        let mut r = csv::Reader::from_path(path.as_ref())?;
        let mut record = csv::StringRecord::new();
        let headers = r.headers()?.clone();
        while r.read_record(&mut record)? {
            let row: Row = record.deserialize(Some(&headers))?;
            truth.add(ImageId(row.image_id), row.label)?;
        }
        Ok(truth)
    }
}
