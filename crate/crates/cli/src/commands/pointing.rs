use std::collections::HashMap;

use abscam::cam::{explain_class, ClassSelection};
use abscam::metrics::PointingResult;
use anyhow::Context;
use serde::Serialize;
use serde_json::json;

use super::{load_annotations, per_image, point};
use crate::config::RunConfig;
use crate::dataset::{list_images, load, ImageEntry};
use crate::report::{config_echo, create_out_dir, finish, write_json, ManifestEntry};
use crate::{CliError, SCHEMA_VERSION};

#[derive(Clone, Debug, Serialize)]
struct PointRecord {
    image_id: String,
    method: &'static str,
    class: usize,
    row: usize,
    col: usize,
    hit: bool,
}

#[derive(Clone, Debug, Serialize)]
struct MethodPointing {
    method: &'static str,
    #[serde(flatten)]
    result: PointingResult,
}

/// Each annotated (image, class label) pair is one record, explained for that
/// label. A fixed `--class` keeps only records with that label.
pub fn run(cfg: &RunConfig) -> Result<String, CliError> {
    let (boxes, order) = load_annotations(cfg)?;
    create_out_dir(&cfg.out)?;
    let available: HashMap<String, ImageEntry> = list_images(&cfg.images)?.into_iter().map(|e| (e.id.clone(), e)).collect();
    let mut skipped = Vec::new();
    let mut entries = Vec::new();
    for id in &order {
        match available.get(id) {
            Some(e) => entries.push(e.clone()),
            None => {
                log::warn!("annotated image `{id}` not found in {}; skipped", cfg.images.display());
                skipped.push(id.clone());
            }
        }
    }

    let results = per_image(cfg, &entries, |handle, entry| {
        let loaded = load(handle, entry)?;
        let mut records = Vec::new();
        for (&class, class_boxes) in &boxes[&entry.id] {
            if class >= handle.num_classes() {
                anyhow::bail!("class label {class} out of range for {} classes", handle.num_classes());
            }
            if matches!(cfg.class, ClassSelection::Fixed(c) if c != class) {
                continue;
            }
            let params = cfg.method_params(class);
            for &method in &cfg.methods {
                let map = explain_class(handle, &loaded.image, method, &cfg.layer, class, &params)
                    .with_context(|| format!("{method} failed"))?;
                let ((row, col), hit) = point(&map.grid, loaded.original_size, class_boxes)?;
                records.push(PointRecord { image_id: entry.id.clone(), method: method.id(), class, row, col, hit });
            }
        }
        Ok((records, loaded.warnings))
    });

    let mut manifest = Vec::new();
    let mut records = Vec::new();
    for (entry, r) in entries.iter().zip(results) {
        match r {
            Ok((recs, warnings)) => {
                manifest.push(ManifestEntry::ok(&entry.id, &entry.path, None, Vec::new(), warnings));
                records.extend(recs);
            }
            Err(err) => manifest.push(ManifestEntry::failed(&entry.id, &entry.path, &err)),
        }
    }
    let methods: Vec<MethodPointing> = cfg
        .methods
        .iter()
        .map(|m| {
            let mine: Vec<_> = records.iter().filter(|r| r.method == m.id()).collect();
            let hits = mine.iter().filter(|r| r.hit).count();
            MethodPointing { method: m.id(), result: PointingResult::from_counts(hits, mine.len() - hits) }
        })
        .collect();
    let report = json!({
        "schema_version": SCHEMA_VERSION,
        "config": config_echo(cfg),
        "methods": methods,
        "records": records,
        "skipped": skipped,
    });
    write_json(&cfg.out.join("pointing.json"), &report)?;
    let ok = finish(cfg, &manifest, json!({ "pointing": "pointing.json", "skipped": skipped }))?;
    let mut line = format!("pointing game on {ok}/{} annotated images", manifest.len());
    for m in &methods {
        line.push_str(&format!(
            "; {}: accuracy {:.4} ({} hits, {} misses)",
            m.method, m.result.accuracy, m.result.hits, m.result.misses
        ));
    }
    Ok(line)
}
