use std::fs;
use std::path::{Path, PathBuf};

use anyhow::Context;
use decompose::datagen::{generate_synthetic, inject_ground_truth, GroundTruth, SyntheticSpec};
use decompose::Source;
use serde::{Deserialize, Serialize};

use crate::io::{self, read_json, write_json, write_matrix, write_vector};
use crate::{Failure, SynthArgs, UsageContext};

pub const MANIFEST: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Injection {
    /// Background matrix the sources are added to.
    pub background: PathBuf,
    /// Elementwise variance each source is scaled to.
    pub target_variance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub out: Option<PathBuf>,
    /// Data file name inside `out`; `.bin` selects the binary format.
    pub data_file: String,
    pub synthetic: SyntheticSpec,
    /// When set, the generated sources are injected into the background
    /// instead of being summed with Gaussian noise.
    pub injection: Option<Injection>,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            out: None,
            data_file: "data.csv".into(),
            synthetic: SyntheticSpec::default(),
            injection: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestSource {
    pub index: usize,
    pub spatial: String,
    pub temporal: String,
    pub variance: f64,
    pub scale: f64,
    pub variance_explained: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub rows: usize,
    pub cols: usize,
    pub data_file: String,
    pub noise_sigma: Option<f64>,
    pub sources: Vec<ManifestSource>,
    pub config: SynthConfig,
}

/// Reads the sources listed in a manifest; `path` is the manifest or its
/// directory.
pub fn load_truth(path: &Path) -> anyhow::Result<(Manifest, Vec<Source>)> {
    let file = if path.is_dir() {
        path.join(MANIFEST)
    } else {
        path.to_path_buf()
    };
    let dir = file.parent().unwrap_or(Path::new("."));
    let manifest: Manifest = read_json(&file)?;
    let mut sources = Vec::with_capacity(manifest.sources.len());
    for s in &manifest.sources {
        let spatial = io::read_vector(&dir.join(&s.spatial))?;
        let temporal = io::read_vector(&dir.join(&s.temporal))?;
        anyhow::ensure!(
            spatial.len() == manifest.rows && temporal.len() == manifest.cols,
            "source {} does not match the {}x{} manifest",
            s.index,
            manifest.rows,
            manifest.cols
        );
        sources.push(Source {
            index: s.index,
            spatial,
            temporal,
            variance_explained: s.variance_explained,
        });
    }
    Ok((manifest, sources))
}

fn write_truth(dir: &Path, truth: &GroundTruth, rows: usize, cols: usize, config: &SynthConfig) -> anyhow::Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
    let mut sources = Vec::new();
    for (i, s) in truth.sources.iter().enumerate() {
        let spatial = format!("source_{i:03}_spatial.csv");
        let temporal = format!("source_{i:03}_temporal.csv");
        write_vector(&dir.join(&spatial), &s.spatial)?;
        write_vector(&dir.join(&temporal), &s.temporal)?;
        sources.push(ManifestSource {
            index: s.index,
            spatial,
            temporal,
            variance: truth.variances[i],
            scale: truth.scales[i],
            variance_explained: s.variance_explained,
        });
    }
    let manifest = Manifest {
        rows,
        cols,
        data_file: format!("../{}", config.data_file),
        noise_sigma: truth.noise_sigma,
        sources,
        config: config.clone(),
    };
    write_json(&dir.join(MANIFEST), &manifest)
}

pub fn cmd_synth(args: SynthArgs) -> Result<(), Failure> {
    let mut config: SynthConfig = match &args.config {
        Some(p) => read_json(p).usage()?,
        None => SynthConfig::default(),
    };
    if let Some(out) = args.out {
        config.out = Some(out);
    }
    if let Some(seed) = args.seed {
        config.synthetic.seed = seed;
    }
    let out = config
        .out
        .clone()
        .ok_or_else(|| anyhow::anyhow!("no output directory: pass --out or set \"out\" in the config"))
        .usage()?;
    config.synthetic.validate().usage()?;

    let (data, truth) = match &config.injection {
        None => generate_synthetic(&config.synthetic).usage()?,
        Some(inj) => {
            let background = io::read_data(&inj.background).usage()?;
            let mut spec = config.synthetic.clone();
            spec.rows = background.rows();
            spec.cols = background.cols();
            spec.noise_sigma = 0.0;
            let (_, cells) = generate_synthetic(&spec).usage()?;
            inject_ground_truth(&background, &cells.sources, inj.target_variance).usage()?
        }
    };

    fs::create_dir_all(&out).with_context(|| format!("cannot create {}", out.display()))?;
    write_matrix(&out.join(&config.data_file), data.rows(), data.cols(), data.as_slice())?;
    write_truth(&out.join("truth"), &truth, data.rows(), data.cols(), &config)?;
    println!(
        "wrote {}x{} data with {} sources to {}",
        data.rows(),
        data.cols(),
        truth.sources.len(),
        out.display()
    );
    Ok(())
}
