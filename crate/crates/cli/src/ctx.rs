use hexamer::config::{DeviceConfig, Grid};
use hexamer::disorder::RNG_ALGORITHM;
use hexamer::io::Metadata;
use hexamer::{Error, Result};
use sha2::{Digest, Sha256};
use std::path::{Path, PathBuf};

const DEFAULT_GRID: &str = "10:1e5:41:log";

/// Everything a subcommand needs: the validated device, the output
/// directory and the provenance header written into each file.
pub struct Ctx {
    pub config: DeviceConfig,
    pub out: PathBuf,
    pub seed: u64,
    grid: Option<String>,
    meta: Metadata,
}

pub fn config_hash(config: &DeviceConfig) -> String {
    Sha256::digest(config.to_json().as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
}

impl Ctx {
    pub fn new(config: &str, out: PathBuf, seed: Option<u64>, grid: Option<String>, command: &str) -> Result<Self> {
        let config = DeviceConfig::resolve(config)?;
        let seed = seed.unwrap_or(config.run.seed);
        std::fs::create_dir_all(&out)?;
        let meta = Metadata::new()
            .with("tool", concat!("hexamer ", env!("CARGO_PKG_VERSION")))
            .with("command", command)
            .with("config", &config.name)
            .with("config_sha256", config_hash(&config))
            .with("seed", seed)
            .with("rng", RNG_ALGORITHM);
        Ok(Self { config, out, seed, grid, meta })
    }

    pub fn meta(&self) -> Metadata {
        self.meta.clone()
    }

    pub fn path(&self, file: &str) -> PathBuf {
        self.out.join(file)
    }

    /// `--grid`, else the configuration's grid, else 10..1e5 (41 log points).
    pub fn grid(&self) -> Result<Vec<f64>> {
        let spec = self.grid.clone().or_else(|| self.config.run.cooperativity_grid.clone());
        let g: Grid = spec.as_deref().unwrap_or(DEFAULT_GRID).parse()?;
        let v = g.values();
        if v.iter().any(|c| !(*c >= 0.0)) {
            return Err(Error::Config("cooperativities must be non-negative".into()));
        }
        Ok(v)
    }

    pub fn announce(&self, path: &Path) {
        println!("wrote {}", path.display());
    }
}

/// Comma-separated floats.
pub fn parse_list(s: &str) -> Result<Vec<f64>> {
    s.split(',')
        .filter(|t| !t.trim().is_empty())
        .map(|t| t.trim().parse::<f64>().map_err(|_| Error::Config(format!("'{t}' is not a number"))))
        .collect()
}
