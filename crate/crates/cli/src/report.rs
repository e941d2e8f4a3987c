use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{json, Value};

use crate::config::{LayerSelection, RunConfig};
use crate::{CliError, SCHEMA_VERSION};

/// One image's outcome as listed in `manifest.json`.
#[derive(Clone, Debug, Serialize)]
pub struct ManifestEntry {
    pub image_id: String,
    pub source: PathBuf,
    pub status: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub class: Option<usize>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub artifacts: Vec<String>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

impl ManifestEntry {
    pub fn ok(image_id: &str, source: &Path, class: Option<usize>, artifacts: Vec<String>, warnings: Vec<String>) -> Self {
        ManifestEntry { image_id: image_id.into(), source: source.into(), status: "ok", error: None, class, artifacts, warnings }
    }

    pub fn failed(image_id: &str, source: &Path, error: &anyhow::Error) -> Self {
        log::warn!("{image_id}: {error:#}");
        ManifestEntry {
            image_id: image_id.into(),
            source: source.into(),
            status: "failed",
            error: Some(format!("{error:#}")),
            class: None,
            artifacts: Vec::new(),
            warnings: Vec::new(),
        }
    }

    pub fn is_ok(&self) -> bool {
        self.status == "ok"
    }
}

/// Every knob that can change a number in this command's outputs. Worker count
/// and output directory are deliberately absent.
pub fn config_echo(cfg: &RunConfig) -> Value {
    let mut echo = json!({
        "model": cfg.model,
        "model_id": cfg.handle.model_id(),
        "layer": cfg.layer.name,
        "methods": cfg.methods.iter().map(|m| m.id()).collect::<Vec<_>>(),
        "class": cfg.class.to_string(),
        "images": cfg.images,
        "seeds": cfg.seeds,
        "sg_samples": cfg.sg_samples,
        "sg_sigma": cfg.sg_sigma,
    });
    let obj = echo.as_object_mut().expect("object");
    match cfg.command {
        "evaluate" => {
            obj.insert("steps".into(), json!(cfg.steps));
            obj.insert("mask_fraction".into(), json!(cfg.mask_fraction));
            obj.insert("baseline".into(), json!(cfg.baseline.name()));
            obj.insert("sigma".into(), json!(cfg.sigma));
            if let Some(a) = &cfg.annotations {
                obj.insert("annotations".into(), json!(a));
            }
        }
        "pointing" => {
            obj.insert("annotations".into(), json!(cfg.annotations));
        }
        "sanity" => {
            obj.insert("modes".into(), json!(cfg.modes.iter().map(|m| m.to_string()).collect::<Vec<_>>()));
            let layers = match &cfg.randomize {
                LayerSelection::AllParameterized => json!("all"),
                LayerSelection::Listed(l) => json!(l.iter().map(|l| l.name.as_str()).collect::<Vec<_>>()),
            };
            obj.insert("randomize".into(), layers);
        }
        _ => {}
    }
    echo
}

pub fn create_out_dir(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::usage(format!("cannot create output directory {}: {e}", dir.display())))
}

pub fn write_json(path: &Path, value: &impl Serialize) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value).map_err(CliError::failed)?;
    std::fs::write(path, text + "\n").map_err(|e| CliError::failed(format!("cannot write {}: {e}", path.display())))
}

pub fn write_csv<R: Serialize>(path: &Path, rows: &[R]) -> Result<(), CliError> {
    let fail = |e: csv::Error| CliError::failed(format!("cannot write {}: {e}", path.display()));
    let mut w = csv::Writer::from_path(path).map_err(fail)?;
    for r in rows {
        w.serialize(r).map_err(fail)?;
    }
    w.flush().map_err(|e| CliError::failed(format!("cannot write {}: {e}", path.display())))
}

/// Writes `manifest.json` and converts the batch outcome into the exit status.
pub fn finish(cfg: &RunConfig, entries: &[ManifestEntry], extra: Value) -> Result<usize, CliError> {
    let manifest = json!({
        "schema_version": SCHEMA_VERSION,
        "command": cfg.command,
        "config": config_echo(cfg),
        "entries": entries,
        "summary": extra,
    });
    write_json(&cfg.out.join("manifest.json"), &manifest)?;
    let ok = entries.iter().filter(|e| e.is_ok()).count();
    if entries.is_empty() {
        return Err(CliError::failed(format!("no images found in {}", cfg.images.display())));
    }
    if ok == 0 {
        return Err(CliError::failed(format!("all {} images failed; see {}", entries.len(), cfg.out.join("manifest.json").display())));
    }
    Ok(ok)
}
