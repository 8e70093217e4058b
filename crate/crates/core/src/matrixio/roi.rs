use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Named voxel-index groups for one subject. ROIs may overlap.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RoiAtlas {
    rois: BTreeMap<String, Vec<usize>>,
}

impl RoiAtlas {
    /// Builds an atlas, sorting each index list. Duplicates and indices at or
    /// beyond `n_voxels` are rejected.
    pub fn new(rois: BTreeMap<String, Vec<usize>>, n_voxels: usize) -> Result<Self> {
        let mut checked = BTreeMap::new();
        for (name, mut idx) in rois {
            idx.sort_unstable();
            if let Some(w) = idx.windows(2).find(|w| w[0] == w[1]) {
                return Err(Error::Manifest(format!(
                    "ROI '{name}' lists voxel {} more than once",
                    w[0]
                )));
            }
            if let Some(&last) = idx.last() {
                if last >= n_voxels {
                    return Err(Error::Manifest(format!(
                        "ROI '{name}' index {last} out of range for {n_voxels} voxels"
                    )));
                }
            }
            checked.insert(name, idx);
        }
        Ok(RoiAtlas { rois: checked })
    }

    pub fn get(&self, name: &str) -> Option<&[usize]> {
        self.rois.get(name).map(Vec::as_slice)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.rois.keys().map(String::as_str)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &[usize])> {
        self.rois.iter().map(|(k, v)| (k.as_str(), v.as_slice()))
    }

    pub fn len(&self) -> usize {
        self.rois.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rois.is_empty()
    }

    /// Sorted union of the voxels of the named ROIs.
    pub fn union_of<'a>(&self, names: impl IntoIterator<Item = &'a str>) -> Result<Vec<usize>> {
        let mut all = Vec::new();
        for name in names {
            let idx = self
                .get(name)
                .ok_or_else(|| Error::InvalidArgument(format!("unknown ROI '{name}'")))?;
            all.extend_from_slice(idx);
        }
        all.sort_unstable();
        all.dedup();
        Ok(all)
    }
}

pub fn read_roi_file(path: impl AsRef<Path>, n_voxels: usize) -> Result<RoiAtlas> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let raw: BTreeMap<String, Vec<usize>> = serde_json::from_str(&text).map_err(|source| Error::Json {
        path: path.to_path_buf(),
        source,
    })?;
    RoiAtlas::new(raw, n_voxels).map_err(|e| match e {
        Error::Manifest(msg) => Error::Manifest(format!("{}: {msg}", path.display())),
        other => other,
    })
}

pub fn write_roi_file(atlas: &RoiAtlas, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let text = serde_json::to_string_pretty(atlas).map_err(|source| Error::Json {
        path: path.to_path_buf(),
        source,
    })?;
    fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}
