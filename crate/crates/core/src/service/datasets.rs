//! Registered datasets: a working volume file plus a label file with a
//! short history of snapshots on disk.

use std::collections::VecDeque;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, MutexGuard};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::io::{meta_path_for, VolumeFile, VolumeMeta};
use crate::volume::{DType, Shape, Spacing};

/// A volume file, deleted on drop when the service created it.
#[derive(Debug)]
pub struct VolumeHandle {
    pub file: VolumeFile,
    owned: bool,
}

impl Drop for VolumeHandle {
    fn drop(&mut self) {
        if self.owned {
            let _ = std::fs::remove_file(self.file.data_path());
            let _ = std::fs::remove_file(self.file.meta_path());
        }
    }
}

#[derive(Debug)]
pub struct DatasetFiles {
    /// Current intensity volume. Jobs keep a clone of the handle while they
    /// read it, so a replaced volume lingers until they finish.
    pub volume: Arc<VolumeHandle>,
    pub labels: VolumeFile,
    snapshots: VecDeque<PathBuf>,
    next_snapshot: u64,
    /// Bumped on every label change.
    pub version: u64,
}

#[derive(Debug)]
pub struct Dataset {
    pub id: u64,
    pub created: f64,
    pub source: PathBuf,
    dir: PathBuf,
    keep: usize,
    files: Mutex<DatasetFiles>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DatasetInfo {
    pub id: u64,
    pub source: PathBuf,
    pub created: f64,
    pub shape: Shape,
    pub dtype: DType,
    pub spacing: Spacing,
    pub label_version: u64,
    pub snapshots: usize,
    pub derived_volume: bool,
}

fn copy_volume(from: &VolumeFile, data: &Path) -> Result<VolumeFile> {
    std::fs::copy(from.data_path(), data).map_err(|e| Error::io(data, e))?;
    let mut meta = from.meta().clone();
    meta.offset_bytes = 0;
    meta.write(&meta_path_for(data))?;
    VolumeFile::open_default(data)
}

impl Dataset {
    /// Opens the user's files and creates an empty label file in `dir`.
    pub fn register(id: u64, data: &Path, meta: &Path, dir: PathBuf, keep: usize, created: f64) -> Result<Self> {
        let volume = VolumeFile::open(data, meta)?;
        if volume.meta().dtype == DType::U32 {
            return Err(Error::UnsupportedFormat("uint32 files are label volumes, not intensity data".into()));
        }
        std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        let m = volume.meta();
        let labels = VolumeFile::create_default(&dir.join("labels.vol"), VolumeMeta::new(DType::U32, m.shape, m.spacing))?;
        Ok(Dataset {
            id,
            created,
            source: data.to_path_buf(),
            dir,
            keep,
            files: Mutex::new(DatasetFiles {
                volume: Arc::new(VolumeHandle { file: volume, owned: false }),
                labels,
                snapshots: VecDeque::new(),
                next_snapshot: 0,
                version: 0,
            }),
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    /// The dataset lock; label writes and volume swaps happen under it.
    pub fn lock(&self) -> MutexGuard<'_, DatasetFiles> {
        self.files.lock().unwrap_or_else(|e| e.into_inner())
    }

    pub fn info(&self) -> DatasetInfo {
        let f = self.lock();
        let m = f.volume.file.meta();
        DatasetInfo {
            id: self.id,
            source: self.source.clone(),
            created: self.created,
            shape: m.shape,
            dtype: m.dtype,
            spacing: m.spacing,
            label_version: f.version,
            snapshots: f.snapshots.len(),
            derived_volume: f.volume.owned,
        }
    }

    /// Copies the current labels to a private file, e.g. as a job input.
    pub fn copy_labels(&self, files: &DatasetFiles, data: &Path) -> Result<VolumeFile> {
        copy_volume(&files.labels, data)
    }

    /// Saves the current labels as the newest snapshot, dropping the oldest
    /// beyond the kept count.
    pub fn snapshot(&self, files: &mut DatasetFiles) -> Result<()> {
        if self.keep == 0 {
            return Ok(());
        }
        let path = self.dir.join(format!("snapshot-{}.vol", files.next_snapshot));
        files.next_snapshot += 1;
        copy_volume(&files.labels, &path)?;
        files.snapshots.push_back(path);
        while files.snapshots.len() > self.keep {
            if let Some(old) = files.snapshots.pop_front() {
                remove_volume(&old);
            }
        }
        Ok(())
    }

    /// Replaces the labels with `new` (a file in the dataset directory),
    /// snapshotting the old state first.
    pub fn commit_labels(&self, files: &mut DatasetFiles, new: VolumeFile) -> Result<()> {
        if new.meta().shape != files.labels.meta().shape || new.meta().dtype != DType::U32 {
            return Err(Error::Shape("label result does not match the dataset".into()));
        }
        self.snapshot(files)?;
        let target = files.labels.data_path().to_path_buf();
        std::fs::rename(new.data_path(), &target).map_err(|e| Error::io(&target, e))?;
        let _ = std::fs::remove_file(new.meta_path());
        files.labels = VolumeFile::open_default(&target)?;
        files.version += 1;
        Ok(())
    }

    pub fn commit_volume(&self, files: &mut DatasetFiles, new: VolumeFile) -> Result<()> {
        if new.meta().shape != files.labels.meta().shape {
            return Err(Error::Shape("volume result does not match the dataset".into()));
        }
        files.volume = Arc::new(VolumeHandle { file: new, owned: true });
        Ok(())
    }

    /// Restores the newest snapshot; false when there is none.
    pub fn undo(&self) -> Result<bool> {
        let mut files = self.lock();
        let Some(snap) = files.snapshots.pop_back() else {
            return Ok(false);
        };
        let target = files.labels.data_path().to_path_buf();
        std::fs::rename(&snap, &target).map_err(|e| Error::io(&target, e))?;
        let _ = std::fs::remove_file(meta_path_for(&snap));
        files.labels = VolumeFile::open_default(&target)?;
        files.version += 1;
        Ok(true)
    }
}

pub fn remove_volume(data: &Path) {
    let _ = std::fs::remove_file(data);
    let _ = std::fs::remove_file(meta_path_for(data));
}

impl Drop for Dataset {
    fn drop(&mut self) {
        let _ = std::fs::remove_dir_all(&self.dir);
    }
}
