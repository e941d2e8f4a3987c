use abscam::cam::Method;
use abscam::imaging::{overlay, ImageTensor};
use abscam::metrics::{monotone_fraction, sanity_check, SanityReport};
use abscam::model::RandomizationMode;
use anyhow::Context;
use serde::Serialize;
use serde_json::json;

use super::{per_image, resolve_class};
use crate::config::{LayerSelection, RunConfig};
use crate::dataset::{list_images, load};
use crate::report::{config_echo, create_out_dir, finish, write_csv, write_json, ManifestEntry};
use crate::{CliError, SCHEMA_VERSION};

/// Minimum fraction of adjacent layer pairs whose similarity does not increase
/// under full cascade randomization, measured on the reference model.
pub const MONOTONE_BOUND: f64 = 0.6;

#[derive(Clone, Debug, Serialize)]
struct SanityRow {
    schema_version: u32,
    image_id: String,
    method_id: &'static str,
    mode: String,
    class: usize,
    layer: String,
    mean_similarity: f64,
    per_seed: String,
}

#[derive(Clone, Debug, Serialize)]
struct GroupSummary {
    method: &'static str,
    mode: String,
    layers: Vec<String>,
    /// Per-layer similarity averaged over images, output layer first.
    mean_similarity: Vec<f64>,
    monotone_fraction: f64,
    monotone_bound: f64,
    monotone_ok: bool,
    per_image_monotone: Vec<(String, f64)>,
}

fn strip(image: &ImageTensor, report: &SanityReport) -> anyhow::Result<ImageTensor> {
    let mut panels = vec![overlay(image, &report.original.grid, 0.5)?];
    for l in &report.layers {
        panels.push(overlay(image, &l.example_map, 0.5)?);
    }
    let (h, w) = image.dims();
    ImageTensor::from_fn(h, w * panels.len(), |r, c| panels[c / w].pixel(r, c % w)).map_err(Into::into)
}

pub fn run(cfg: &RunConfig) -> Result<String, CliError> {
    create_out_dir(&cfg.out)?;
    let entries = list_images(&cfg.images)?;
    let layers = match &cfg.randomize {
        LayerSelection::AllParameterized => None,
        LayerSelection::Listed(l) => Some(l.as_slice()),
    };
    let results = per_image(cfg, &entries, |handle, entry| {
        let loaded = load(handle, entry)?;
        let class = resolve_class(cfg, handle, &loaded.image)?;
        let params = cfg.method_params(class);
        let mut reports = Vec::new();
        let mut artifacts = Vec::new();
        for &method in &cfg.methods {
            for &mode in &cfg.modes {
                let report = sanity_check(handle, &loaded.image, method, &params, mode, &cfg.seeds, layers)
                    .with_context(|| format!("{method} {mode} sanity check failed"))?;
                if cfg.strip {
                    let name = format!("strip__{}__{}__{mode}.png", entry.id, method.id());
                    strip(&loaded.image, &report)?.save_png(cfg.out.join(&name))?;
                    artifacts.push(name);
                }
                reports.push(report);
            }
        }
        let mut warnings = loaded.warnings;
        warnings.extend(reports.iter().flat_map(|r| r.warnings.iter().cloned()));
        warnings.dedup();
        Ok((class, reports, artifacts, warnings))
    });

    let mut manifest = Vec::new();
    let mut rows = Vec::new();
    let mut grouped: Vec<((Method, RandomizationMode), Vec<(String, Vec<f64>, Vec<String>)>)> = Vec::new();
    for (entry, r) in entries.iter().zip(results) {
        let (class, reports, artifacts, warnings) = match r {
            Ok(v) => v,
            Err(err) => {
                manifest.push(ManifestEntry::failed(&entry.id, &entry.path, &err));
                continue;
            }
        };
        manifest.push(ManifestEntry::ok(&entry.id, &entry.path, Some(class), artifacts, warnings));
        for report in reports {
            let row = |layer: &str, mean: f64, per_seed: String| SanityRow {
                schema_version: SCHEMA_VERSION,
                image_id: entry.id.clone(),
                method_id: report.method.id(),
                mode: report.mode.to_string(),
                class,
                layer: layer.into(),
                mean_similarity: mean,
                per_seed,
            };
            rows.push(row("original", 1.0, String::new()));
            for l in &report.layers {
                let seeds = l.per_seed.iter().map(|s| s.to_string()).collect::<Vec<_>>().join(";");
                rows.push(row(&l.layer, l.mean_similarity, seeds));
            }
            let key = (report.method, report.mode);
            let sims = report.similarities();
            let names = report.layers.iter().map(|l| l.layer.clone()).collect();
            match grouped.iter_mut().find(|(k, _)| *k == key) {
                Some((_, v)) => v.push((entry.id.clone(), sims, names)),
                None => grouped.push((key, vec![(entry.id.clone(), sims, names)])),
            }
        }
    }
    write_csv(&cfg.out.join("sanity.csv"), &rows)?;

    let groups: Vec<GroupSummary> = grouped
        .into_iter()
        .map(|((method, mode), per_image)| {
            let layers = per_image[0].2.clone();
            let n = per_image.len() as f64;
            let mut mean = vec![0.0; layers.len()];
            for (_, sims, _) in &per_image {
                for (m, s) in mean.iter_mut().zip(sims) {
                    *m += s / n;
                }
            }
            let fraction = monotone_fraction(&mean);
            GroupSummary {
                method: method.id(),
                mode: mode.to_string(),
                layers,
                mean_similarity: mean,
                monotone_fraction: fraction,
                monotone_bound: MONOTONE_BOUND,
                monotone_ok: fraction >= MONOTONE_BOUND,
                per_image_monotone: per_image.iter().map(|(id, s, _)| (id.clone(), monotone_fraction(s))).collect(),
            }
        })
        .collect();
    write_json(
        &cfg.out.join("sanity_summary.json"),
        &json!({ "schema_version": SCHEMA_VERSION, "config": config_echo(cfg), "groups": groups }),
    )?;
    let ok = finish(cfg, &manifest, json!({ "table": "sanity.csv", "summary": "sanity_summary.json" }))?;
    let mut line = format!("sanity check on {ok}/{} images", manifest.len());
    for g in &groups {
        let last = g.mean_similarity.last().copied().unwrap_or(1.0);
        line.push_str(&format!(
            "; {} {}: deepest-randomization similarity {last:.3}, monotone {:.2} ({})",
            g.method,
            g.mode,
            g.monotone_fraction,
            if g.monotone_ok { "ok" } else { "below bound" }
        ));
    }
    Ok(line)
}
