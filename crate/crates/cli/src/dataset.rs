use std::collections::HashSet;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};

use abscam::imaging::{load_and_preprocess, LoadedImage};
use abscam::ClassifierHandle;

use crate::CliError;

const EXTENSIONS: [&str; 3] = ["png", "jpg", "jpeg"];

#[derive(Clone, Debug)]
pub struct ImageEntry {
    pub id: String,
    pub path: PathBuf,
}

/// PNG/JPEG files directly inside `dir`, sorted by file name. The id is the
/// file stem, or the full file name when two files share a stem.
pub fn list_images(dir: &Path) -> Result<Vec<ImageEntry>, CliError> {
    let read = std::fs::read_dir(dir).map_err(|e| CliError::usage(format!("cannot read image directory {}: {e}", dir.display())))?;
    let mut paths: Vec<PathBuf> = read
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file())
        .filter(|p| {
            p.extension()
                .and_then(|e| e.to_str())
                .is_some_and(|e| EXTENSIONS.contains(&e.to_ascii_lowercase().as_str()))
        })
        .collect();
    paths.sort();
    let stem = |p: &Path| p.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let mut seen = HashSet::new();
    let clashing: HashSet<String> = paths.iter().map(|p| stem(p)).filter(|s| !seen.insert(s.clone())).collect();
    Ok(paths
        .into_iter()
        .map(|path| {
            let s = stem(&path);
            let id = if clashing.contains(&s) { path.file_name().unwrap().to_string_lossy().into_owned() } else { s };
            ImageEntry { id, path }
        })
        .collect())
}

pub fn load(handle: &ClassifierHandle, entry: &ImageEntry) -> anyhow::Result<LoadedImage> {
    Ok(load_and_preprocess(&entry.path, handle.input_size(), handle.preprocessing())?)
}

/// Runs `f`, turning a panic into an error so one image cannot abort a batch.
pub fn isolated<T>(f: impl FnOnce() -> anyhow::Result<T>) -> anyhow::Result<T> {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(r) => r,
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            Err(anyhow::anyhow!("internal error: {msg}"))
        }
    }
}
