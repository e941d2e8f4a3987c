//! Flags, the optional config file, and the validated run configuration.
//!
//! The config file is TOML whose keys are the long flag names, e.g.
//!
//! ```toml
//! model = "reference"
//! method = ["abs-cam", "grad-cam"]
//! steps = 50
//! mask-fraction = 0.5
//! seed = [0, 1, 2]
//! ```
//!
//! Relative paths in the file resolve against the file's directory.
//! Flags given on the command line override the file.

use std::path::{Path, PathBuf};

use abscam::cam::{ClassSelection, Method};
use abscam::imaging::DEFAULT_BLUR_SIGMA;
use abscam::metrics::{DeletionBaseline, DEFAULT_MASK_FRACTION, DEFAULT_STEPS};
use abscam::model::{ModelProfile, RandomizationMode, WeightSource};
use abscam::{ClassifierHandle, LayerRef};
use clap::{Args, Parser, Subcommand};
use serde::Deserialize;

use crate::CliError;

#[derive(Parser, Debug)]
#[command(name = "abscam", version, about = "Class activation maps and their faithfulness metrics")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Write overlay, CSV and binary heatmaps per image and method.
    Explain(Flags),
    /// Average Drop/Increase and Deletion/Insertion AUC per image and method.
    Evaluate(Flags),
    /// Pointing Game accuracy against bounding-box annotations.
    Pointing(Flags),
    /// Similarity of maps under cascade/independent weight randomization.
    Sanity(Flags),
}

impl Command {
    pub fn parts(self) -> (&'static str, Flags) {
        match self {
            Command::Explain(f) => ("explain", f),
            Command::Evaluate(f) => ("evaluate", f),
            Command::Pointing(f) => ("pointing", f),
            Command::Sanity(f) => ("sanity", f),
        }
    }
}

#[derive(Args, Debug, Default, Clone)]
pub struct Flags {
    /// TOML file supplying any of the flags below.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// `reference`, `reference:<seed>`, or a model profile TOML.
    #[arg(long)]
    pub model: Option<String>,
    /// Target layer (defaults to the model's last conv layer).
    #[arg(long)]
    pub layer: Option<String>,
    /// Method id; repeatable or comma-separated.
    #[arg(long = "method", value_delimiter = ',')]
    pub methods: Vec<String>,
    /// `auto` (predicted class) or a class index.
    #[arg(long)]
    pub class: Option<String>,
    /// Directory of PNG/JPEG images.
    #[arg(long)]
    pub images: Option<PathBuf>,
    /// CSV with header `image_id,class_label,x0,y0,x1,y1`.
    #[arg(long)]
    pub annotations: Option<PathBuf>,
    /// Output directory (created if missing).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Deletion/Insertion step count.
    #[arg(long)]
    pub steps: Option<usize>,
    /// Fraction of top pixels kept for Average Drop/Increase.
    #[arg(long)]
    pub mask_fraction: Option<f64>,
    /// Deletion fill: `zeros` or `blur`.
    #[arg(long)]
    pub baseline: Option<String>,
    /// Blur std in pixels (insertion start, blur deletion baseline).
    #[arg(long)]
    pub sigma: Option<f64>,
    /// Seed; repeatable. Sanity uses all, other commands the first.
    #[arg(long = "seed", value_delimiter = ',')]
    pub seeds: Vec<u64>,
    /// Worker threads (defaults to the number of CPUs).
    #[arg(long)]
    pub workers: Option<usize>,
    /// Smooth Grad-CAM++ sample count.
    #[arg(long)]
    pub sg_samples: Option<usize>,
    /// Smooth Grad-CAM++ noise std in model input space.
    #[arg(long)]
    pub sg_sigma: Option<f64>,
    /// Sanity randomization: `cascade`, `independent` or `both`.
    #[arg(long)]
    pub mode: Option<String>,
    /// Sanity: layers to randomize (repeatable); `none` for no layers.
    #[arg(long = "randomize", value_delimiter = ',')]
    pub randomize: Vec<String>,
    /// Sanity: also write a PNG strip of the randomized maps.
    #[arg(long)]
    pub strip: bool,
}

#[derive(Deserialize, Debug, Clone)]
#[serde(untagged)]
enum OneOrMany<T> {
    One(T),
    Many(Vec<T>),
}

impl<T> OneOrMany<T> {
    fn into_vec(self) -> Vec<T> {
        match self {
            OneOrMany::One(v) => vec![v],
            OneOrMany::Many(v) => v,
        }
    }
}

#[derive(Deserialize, Debug, Clone)]
#[serde(untagged)]
enum ClassValue {
    Index(usize),
    Text(String),
}

#[derive(Deserialize, Debug, Default)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
struct FileConfig {
    model: Option<String>,
    layer: Option<String>,
    method: Option<OneOrMany<String>>,
    class: Option<ClassValue>,
    images: Option<PathBuf>,
    annotations: Option<PathBuf>,
    out: Option<PathBuf>,
    steps: Option<usize>,
    mask_fraction: Option<f64>,
    baseline: Option<String>,
    sigma: Option<f64>,
    seed: Option<OneOrMany<u64>>,
    workers: Option<usize>,
    sg_samples: Option<usize>,
    sg_sigma: Option<f64>,
    mode: Option<String>,
    randomize: Option<OneOrMany<String>>,
    strip: Option<bool>,
}

impl FileConfig {
    fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::usage(format!("cannot read config {}: {e}", path.display())))?;
        let mut cfg: FileConfig =
            toml::from_str(&text).map_err(|e| CliError::usage(format!("invalid config {}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        for p in [&mut cfg.images, &mut cfg.annotations, &mut cfg.out].into_iter().flatten() {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        if let Some(m) = &mut cfg.model {
            if !m.starts_with("reference") && Path::new(m.as_str()).is_relative() {
                *m = base.join(&*m).to_string_lossy().into_owned();
            }
        }
        Ok(cfg)
    }

    /// Fills every flag the command line left unset.
    fn merge_under(self, flags: Flags) -> Flags {
        fn vec_or<T>(flag: Vec<T>, file: Option<OneOrMany<T>>) -> Vec<T> {
            if flag.is_empty() {
                file.map(OneOrMany::into_vec).unwrap_or_default()
            } else {
                flag
            }
        }
        Flags {
            config: flags.config,
            model: flags.model.or(self.model),
            layer: flags.layer.or(self.layer),
            methods: vec_or(flags.methods, self.method),
            class: flags.class.or(self.class.map(|c| match c {
                ClassValue::Index(i) => i.to_string(),
                ClassValue::Text(t) => t,
            })),
            images: flags.images.or(self.images),
            annotations: flags.annotations.or(self.annotations),
            out: flags.out.or(self.out),
            steps: flags.steps.or(self.steps),
            mask_fraction: flags.mask_fraction.or(self.mask_fraction),
            baseline: flags.baseline.or(self.baseline),
            sigma: flags.sigma.or(self.sigma),
            seeds: vec_or(flags.seeds, self.seed),
            workers: flags.workers.or(self.workers),
            sg_samples: flags.sg_samples.or(self.sg_samples),
            sg_sigma: flags.sg_sigma.or(self.sg_sigma),
            mode: flags.mode.or(self.mode),
            randomize: vec_or(flags.randomize, self.randomize),
            strip: flags.strip || self.strip.unwrap_or(false),
        }
    }
}

/// Which layers the sanity command randomizes.
#[derive(Clone, Debug, PartialEq)]
pub enum LayerSelection {
    AllParameterized,
    Listed(Vec<LayerRef>),
}

/// Fully resolved and validated settings for one run.
#[derive(Clone, Debug)]
pub struct RunConfig {
    pub command: &'static str,
    /// The `--model` value as given.
    pub model: String,
    pub handle: ClassifierHandle,
    pub layer: LayerRef,
    pub methods: Vec<Method>,
    pub class: ClassSelection,
    pub images: PathBuf,
    pub annotations: Option<PathBuf>,
    pub out: PathBuf,
    pub steps: usize,
    pub mask_fraction: f64,
    pub baseline: DeletionBaseline,
    pub sigma: f64,
    pub seeds: Vec<u64>,
    pub workers: Option<usize>,
    pub sg_samples: usize,
    pub sg_sigma: f64,
    pub modes: Vec<RandomizationMode>,
    pub randomize: LayerSelection,
    pub strip: bool,
}

fn load_model(model: &str) -> Result<ClassifierHandle, CliError> {
    let profile = if model == "reference" {
        ModelProfile::reference()
    } else if let Some(seed) = model.strip_prefix("reference:") {
        let seed: u64 = seed.parse().map_err(|_| CliError::usage(format!("bad reference seed in `{model}`")))?;
        ModelProfile { weights: WeightSource::Reference { seed }, ..ModelProfile::reference() }
    } else {
        ModelProfile::load(model).map_err(|e| CliError::usage(format!("cannot load model profile {model}: {e}")))?
    };
    profile.build().map_err(|e| CliError::usage(format!("cannot build model `{model}`: {e}")))
}

impl RunConfig {
    /// Merges the config file under `flags`, then validates everything that can
    /// be checked before touching any image.
    pub fn resolve(command: &'static str, flags: Flags) -> Result<Self, CliError> {
        let flags = match &flags.config {
            Some(path) => FileConfig::load(path)?.merge_under(flags),
            None => flags,
        };

        let model = flags.model.unwrap_or_else(|| "reference".into());
        let handle = load_model(&model)?;
        let layer = match &flags.layer {
            Some(name) => handle.layer(name).map_err(CliError::usage)?,
            None => handle.default_layer(),
        };

        let names = if flags.methods.is_empty() { vec!["abs-cam".to_string()] } else { flags.methods };
        let mut methods = Vec::new();
        for name in &names {
            let m: Method = name.parse().map_err(CliError::usage)?;
            if !methods.contains(&m) {
                methods.push(m);
            }
        }

        let class: ClassSelection = flags.class.as_deref().unwrap_or("auto").parse().map_err(CliError::usage)?;
        if let ClassSelection::Fixed(c) = class {
            if c >= handle.num_classes() {
                return Err(CliError::usage(format!("class {c} out of range for {} classes", handle.num_classes())));
            }
        }

        let images = flags.images.ok_or_else(|| CliError::usage("--images <dir> is required"))?;
        let out = flags.out.ok_or_else(|| CliError::usage("--out <dir> is required"))?;
        if command == "pointing" && flags.annotations.is_none() {
            return Err(CliError::usage("pointing needs --annotations <file>"));
        }

        let steps = flags.steps.unwrap_or(DEFAULT_STEPS);
        if steps == 0 {
            return Err(CliError::usage("--steps must be at least 1"));
        }
        let mask_fraction = flags.mask_fraction.unwrap_or(DEFAULT_MASK_FRACTION);
        if !(mask_fraction > 0.0 && mask_fraction <= 1.0) {
            return Err(CliError::usage(format!("--mask-fraction must be in (0, 1], got {mask_fraction}")));
        }
        let sigma = flags.sigma.unwrap_or(DEFAULT_BLUR_SIGMA);
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(CliError::usage(format!("--sigma must be positive, got {sigma}")));
        }
        let baseline = match flags.baseline.as_deref().unwrap_or("zeros") {
            "zeros" => DeletionBaseline::Zeros,
            "blur" => DeletionBaseline::Blur { sigma },
            other => return Err(CliError::usage(format!("--baseline must be `zeros` or `blur`, got `{other}`"))),
        };
        let seeds = if flags.seeds.is_empty() { vec![0] } else { flags.seeds };
        if flags.workers == Some(0) {
            return Err(CliError::usage("--workers must be at least 1"));
        }
        let sg_samples = flags.sg_samples.unwrap_or(8);
        if sg_samples == 0 {
            return Err(CliError::usage("--sg-samples must be at least 1"));
        }
        let sg_sigma = flags.sg_sigma.unwrap_or(0.1);
        if !(sg_sigma >= 0.0 && sg_sigma.is_finite()) {
            return Err(CliError::usage(format!("--sg-sigma must be nonnegative, got {sg_sigma}")));
        }
        let modes = match flags.mode.as_deref().unwrap_or("both") {
            "both" => vec![RandomizationMode::Cascade, RandomizationMode::Independent],
            other => vec![other.parse().map_err(CliError::usage)?],
        };
        let randomize = if flags.randomize.is_empty() {
            LayerSelection::AllParameterized
        } else if flags.randomize.iter().any(|r| r == "none") {
            if flags.randomize.len() > 1 {
                return Err(CliError::usage("--randomize none cannot be combined with layer names"));
            }
            LayerSelection::Listed(Vec::new())
        } else {
            let parameterized = handle.parameterized_layers();
            let mut listed = Vec::new();
            for name in &flags.randomize {
                let l = handle.layer(name).map_err(CliError::usage)?;
                if !parameterized.contains(&l) {
                    return Err(CliError::usage(format!("layer `{name}` has no parameters to randomize")));
                }
                listed.push(l);
            }
            LayerSelection::Listed(listed)
        };

        Ok(RunConfig {
            command,
            model,
            handle,
            layer,
            methods,
            class,
            images,
            annotations: flags.annotations,
            out,
            steps,
            mask_fraction,
            baseline,
            sigma,
            seeds,
            workers: flags.workers,
            sg_samples,
            sg_sigma,
            modes,
            randomize,
            strip: flags.strip,
        })
    }

    /// Method parameters for a resolved class.
    pub fn method_params(&self, class: usize) -> abscam::MethodParams {
        abscam::MethodParams {
            layer: Some(self.layer.name.clone()),
            class: ClassSelection::Fixed(class),
            seed: self.seeds[0],
            sg_samples: self.sg_samples,
            sg_sigma: self.sg_sigma,
            ..Default::default()
        }
    }
}
