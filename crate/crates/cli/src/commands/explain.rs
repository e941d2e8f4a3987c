use std::fs::File;
use std::io::BufWriter;

use abscam::cam::explain_class;
use abscam::imaging::export::{write_binary, write_csv};
use abscam::imaging::overlay;
use anyhow::Context;
use serde_json::json;

use super::{per_image, resolve_class};
use crate::config::RunConfig;
use crate::dataset::{list_images, load};
use crate::report::{create_out_dir, finish, ManifestEntry};
use crate::CliError;

const OVERLAY_ALPHA: f64 = 0.5;

pub fn run(cfg: &RunConfig) -> Result<String, CliError> {
    create_out_dir(&cfg.out)?;
    let entries = list_images(&cfg.images)?;
    let results = per_image(cfg, &entries, |handle, entry| {
        let loaded = load(handle, entry)?;
        let class = resolve_class(cfg, handle, &loaded.image)?;
        let params = cfg.method_params(class);
        let mut artifacts = Vec::new();
        for &method in &cfg.methods {
            let map = explain_class(handle, &loaded.image, method, &cfg.layer, class, &params)
                .with_context(|| format!("{method} failed"))?;
            let stem = format!("{}__{}__c{class}", entry.id, method.id());
            let png = format!("{stem}.png");
            overlay(&loaded.image, &map.grid, OVERLAY_ALPHA)?.save_png(cfg.out.join(&png))?;
            let csv = format!("{stem}.csv");
            write_csv(&map.grid, BufWriter::new(File::create(cfg.out.join(&csv))?))?;
            let bin = format!("{stem}.bin");
            write_binary(&map.grid, BufWriter::new(File::create(cfg.out.join(&bin))?))?;
            artifacts.extend([png, csv, bin]);
        }
        Ok((class, artifacts, loaded.warnings))
    });
    let manifest: Vec<ManifestEntry> = entries
        .iter()
        .zip(results)
        .map(|(e, r)| match r {
            Ok((class, artifacts, warnings)) => ManifestEntry::ok(&e.id, &e.path, Some(class), artifacts, warnings),
            Err(err) => ManifestEntry::failed(&e.id, &e.path, &err),
        })
        .collect();
    let ok = finish(cfg, &manifest, json!({ "images": manifest.len() }))?;
    Ok(format!(
        "explained {ok}/{} images with {} method(s); artifacts in {}",
        manifest.len(),
        cfg.methods.len(),
        cfg.out.display()
    ))
}
