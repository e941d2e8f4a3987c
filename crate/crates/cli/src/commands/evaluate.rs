use std::time::Instant;

use abscam::cam::explain_class;
use abscam::metrics::{deletion_curve, drop_case, insertion_curve, DropCase};
use anyhow::Context;
use serde::Serialize;
use serde_json::json;

use super::{load_annotations, per_image, point, resolve_class};
use crate::config::RunConfig;
use crate::dataset::{list_images, load};
use crate::report::{create_out_dir, finish, write_csv, write_json, ManifestEntry};
use crate::{CliError, SCHEMA_VERSION};

/// One row of `results.csv`. `drop` is a percentage; `drop` and
/// `increase_flag` are empty when the original probability is zero.
#[derive(Clone, Debug, Serialize)]
pub struct ResultRow {
    pub schema_version: u32,
    pub image_id: String,
    pub method_id: &'static str,
    pub class: usize,
    pub original_prob: f64,
    pub masked_prob: f64,
    pub drop: Option<f64>,
    pub increase_flag: Option<u8>,
    pub deletion_auc: f64,
    pub insertion_auc: f64,
    pub pointing_hit: Option<u8>,
}

#[derive(Clone, Debug, Serialize)]
struct TimingRow {
    image_id: String,
    method_id: &'static str,
    wall_time_seconds: f64,
}

#[derive(Clone, Debug, Serialize)]
struct PointingSummary {
    hits: usize,
    misses: usize,
    accuracy: f64,
}

#[derive(Clone, Debug, Serialize)]
struct MethodSummary {
    method: &'static str,
    n_images: usize,
    n_drop_cases: usize,
    excluded: Vec<String>,
    average_drop: f64,
    average_increase: f64,
    mean_deletion_auc: f64,
    mean_insertion_auc: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pointing: Option<PointingSummary>,
}

fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

fn summarize(method: &'static str, rows: &[&ResultRow]) -> MethodSummary {
    let drops: Vec<&&ResultRow> = rows.iter().filter(|r| r.drop.is_some()).collect();
    let hits: Vec<u8> = rows.iter().filter_map(|r| r.pointing_hit).collect();
    let n_drop = drops.len();
    MethodSummary {
        method,
        n_images: rows.len(),
        n_drop_cases: n_drop,
        excluded: rows.iter().filter(|r| r.drop.is_none()).map(|r| r.image_id.clone()).collect(),
        average_drop: mean(drops.iter().map(|r| r.drop.unwrap())),
        average_increase: if n_drop == 0 {
            0.0
        } else {
            100.0 * drops.iter().filter(|r| r.increase_flag == Some(1)).count() as f64 / n_drop as f64
        },
        mean_deletion_auc: mean(rows.iter().map(|r| r.deletion_auc)),
        mean_insertion_auc: mean(rows.iter().map(|r| r.insertion_auc)),
        pointing: (!hits.is_empty()).then(|| {
            let h = hits.iter().filter(|x| **x == 1).count();
            PointingSummary { hits: h, misses: hits.len() - h, accuracy: h as f64 / hits.len() as f64 }
        }),
    }
}

pub fn run(cfg: &RunConfig) -> Result<String, CliError> {
    let (boxes, _) = load_annotations(cfg)?;
    create_out_dir(&cfg.out)?;
    let entries = list_images(&cfg.images)?;
    let results = per_image(cfg, &entries, |handle, entry| {
        let loaded = load(handle, entry)?;
        let image = &loaded.image;
        let class = resolve_class(cfg, handle, image)?;
        let params = cfg.method_params(class);
        let class_boxes = boxes.get(&entry.id).and_then(|b| b.get(&class));
        let mut rows = Vec::new();
        let mut timings = Vec::new();
        for &method in &cfg.methods {
            let start = Instant::now();
            let run = || -> anyhow::Result<ResultRow> {
                let map = explain_class(handle, image, method, &cfg.layer, class, &params)?;
                let case = DropCase { image, map: &map.grid, class };
                let drop = drop_case(handle, &case, cfg.mask_fraction)?;
                let original_prob = handle.class_prob(image, class)?;
                let deletion = deletion_curve(handle, image, &map.grid, class, cfg.steps, cfg.baseline)?;
                let insertion = insertion_curve(handle, image, &map.grid, class, cfg.steps, cfg.sigma)?;
                let pointing_hit = match class_boxes {
                    Some(b) => Some(point(&map.grid, loaded.original_size, b)?.1 as u8),
                    None => None,
                };
                Ok(ResultRow {
                    schema_version: SCHEMA_VERSION,
                    image_id: entry.id.clone(),
                    method_id: method.id(),
                    class,
                    original_prob,
                    masked_prob: drop.map_or(0.0, |d| d.masked_prob),
                    drop: drop.map(|d| d.drop_percent),
                    increase_flag: drop.map(|d| d.increased as u8),
                    deletion_auc: deletion.auc,
                    insertion_auc: insertion.auc,
                    pointing_hit,
                })
            };
            rows.push(run().with_context(|| format!("{method} failed"))?);
            timings.push(TimingRow {
                image_id: entry.id.clone(),
                method_id: method.id(),
                wall_time_seconds: start.elapsed().as_secs_f64(),
            });
        }
        Ok((class, rows, timings, loaded.warnings))
    });

    let mut manifest = Vec::new();
    let mut rows = Vec::new();
    let mut timings = Vec::new();
    for (entry, r) in entries.iter().zip(results) {
        match r {
            Ok((class, r, t, warnings)) => {
                manifest.push(ManifestEntry::ok(&entry.id, &entry.path, Some(class), Vec::new(), warnings));
                rows.extend(r);
                timings.extend(t);
            }
            Err(err) => manifest.push(ManifestEntry::failed(&entry.id, &entry.path, &err)),
        }
    }
    write_csv(&cfg.out.join("results.csv"), &rows)?;
    write_csv(&cfg.out.join("timings.csv"), &timings)?;
    let methods: Vec<MethodSummary> = cfg
        .methods
        .iter()
        .map(|m| summarize(m.id(), &rows.iter().filter(|r| r.method_id == m.id()).collect::<Vec<_>>()))
        .collect();
    let summary = json!({
        "schema_version": SCHEMA_VERSION,
        "config": crate::report::config_echo(cfg),
        "n_images": manifest.iter().filter(|e| e.is_ok()).count(),
        "n_failed": manifest.iter().filter(|e| !e.is_ok()).count(),
        "methods": methods,
    });
    write_json(&cfg.out.join("summary.json"), &summary)?;
    let ok = finish(cfg, &manifest, json!({ "results": "results.csv", "summary": "summary.json" }))?;
    let mut line = format!("evaluated {ok}/{} images", manifest.len());
    for m in &methods {
        line.push_str(&format!(
            "; {}: drop {:.2}% increase {:.2}% deletion {:.4} insertion {:.4}",
            m.method, m.average_drop, m.average_increase, m.mean_deletion_auc, m.mean_insertion_auc
        ));
    }
    Ok(line)
}
