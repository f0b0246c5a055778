//! Dataset manifests: a JSON file naming a split and its records. Paths
//! are relative to the manifest's directory.
//!
//! ```json
//! {"split": "testA", "records": [
//!   {"id": "img01", "image": "img01.ppm", "labels": "img01.pgm", "boxes": "img01.json"}
//! ]}
//! ```

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::channels::load_boxes;
use crate::error::{Error, Result};
use crate::fsutil;
use crate::image::RgbImage;
use crate::labelops::{BBox, InstanceMap};
use crate::netpbm;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Record {
    pub id: String,
    pub image: PathBuf,
    pub labels: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub boxes: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub split: String,
    pub records: Vec<Record>,
    /// Directory that relative paths resolve against.
    #[serde(skip)]
    pub root: PathBuf,
}

/// A record with its files read.
#[derive(Debug, Clone)]
pub struct LoadedRecord {
    pub id: String,
    pub image: RgbImage,
    pub labels: InstanceMap,
    pub boxes: Option<Vec<BBox>>,
}

impl Manifest {
    pub fn new(split: impl Into<String>, root: impl Into<PathBuf>) -> Self {
        Manifest {
            split: split.into(),
            records: Vec::new(),
            root: root.into(),
        }
    }

    pub fn parse(bytes: &[u8], root: &Path) -> Result<Self> {
        let mut m: Manifest =
            serde_json::from_slice(bytes).map_err(|e| Error::data(format!("manifest: {e}")))?;
        m.root = root.to_path_buf();
        let mut ids = BTreeSet::new();
        for r in &m.records {
            if r.id.is_empty() || r.id.contains(['/', '\\']) {
                return Err(Error::data(format!("manifest: invalid record id `{}`", r.id)));
            }
            if !ids.insert(r.id.as_str()) {
                return Err(Error::data(format!("manifest: duplicate record id `{}`", r.id)));
            }
        }
        Ok(m)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let root = path.parent().unwrap_or(Path::new(".")).to_path_buf();
        Self::parse(&fsutil::read(path)?, &root).map_err(|e| e.context(path.display()))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut bytes = serde_json::to_vec_pretty(self)?;
        bytes.push(b'\n');
        fsutil::write_atomic(path, &bytes)
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        self.root.join(p)
    }

    /// Reads one record, checking that image, labels and boxes agree in size.
    pub fn load_record(&self, r: &Record) -> Result<LoadedRecord> {
        let ctx = |e: Error| e.context(format_args!("record `{}`", r.id));
        let image = netpbm::load_rgb(&self.resolve(&r.image)).map_err(ctx)?;
        let labels = netpbm::load_instance_map(&self.resolve(&r.labels)).map_err(ctx)?;
        if (image.width(), image.height()) != (labels.width(), labels.height()) {
            return Err(ctx(Error::data(format!(
                "image is {}x{} but labels are {}x{}",
                image.width(),
                image.height(),
                labels.width(),
                labels.height()
            ))));
        }
        let boxes = match &r.boxes {
            None => None,
            Some(p) => {
                let b = load_boxes(&self.resolve(p)).map_err(ctx)?;
                for (i, bb) in b.iter().enumerate() {
                    bb.validate(image.width(), image.height())
                        .map_err(|e| ctx(e.context(format_args!("box {i}"))))?;
                }
                Some(b)
            }
        };
        Ok(LoadedRecord {
            id: r.id.clone(),
            image,
            labels,
            boxes,
        })
    }

    pub fn load_all(&self) -> Result<Vec<LoadedRecord>> {
        self.records.iter().map(|r| self.load_record(r)).collect()
    }
}
