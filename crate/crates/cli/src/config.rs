//! Experiment configuration files.

use std::fs::{self, File};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use autoneb_core::io::Meta;
use autoneb_core::landscape::{
    init_params, init_uniform, make_double_well, Dataset, GaussianWell, GaussianWells, Landscape, MlpLandscape,
    MlpSpec, TrainConfig,
};
use autoneb_core::{AutoNebSchedule, ExploreConfig, ParamVector};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum LandscapeConfig {
    DoubleWell,
    GaussianWells {
        wells: Vec<GaussianWell>,
        #[serde(default)]
        confinement: f64,
    },
    /// `GaussianWells::random_2d(count, seed)`.
    RandomWells { count: usize, seed: u64 },
    /// Dataset path is relative to the config file.
    Mlp { spec: MlpSpec, dataset: PathBuf },
}

/// Starting points on analytic surfaces. MLPs always use the seeded
/// fan-in initialisation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitConfig {
    /// Every coordinate uniform in `[low, high]`.
    Box { low: f64, high: f64 },
    /// Minimum `k` starts at the center of well `k mod wells`.
    WellCenters,
}

impl Default for InitConfig {
    fn default() -> Self {
        InitConfig::Box { low: -1.5, high: 1.5 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExploreSettings {
    pub budget: usize,
    #[serde(default = "default_stop_ratio")]
    pub stop_ratio: f64,
}

fn default_stop_ratio() -> f64 {
    0.1
}

/// Hidden-unit permutation applied by `train` to write a mirrored copy of
/// every minimum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PermuteConfig {
    pub layer: usize,
    pub perm: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    pub landscape: LandscapeConfig,
    #[serde(default)]
    pub init: Option<InitConfig>,
    pub train: TrainConfig,
    #[serde(default)]
    pub schedule: AutoNebSchedule,
    #[serde(default)]
    pub explore: Option<ExploreSettings>,
    #[serde(default)]
    pub permute: Option<PermuteConfig>,
}

pub enum BuiltLandscape {
    Analytic(Box<dyn Landscape>),
    Mlp(MlpLandscape),
}

impl BuiltLandscape {
    pub fn as_landscape(&self) -> &dyn Landscape {
        match self {
            BuiltLandscape::Analytic(l) => l.as_ref(),
            BuiltLandscape::Mlp(m) => m,
        }
    }

    pub fn mlp(&self) -> Option<&MlpLandscape> {
        match self {
            BuiltLandscape::Mlp(m) => Some(m),
            BuiltLandscape::Analytic(_) => None,
        }
    }
}

/// A parsed config together with everything resolved from it.
pub struct Experiment {
    pub config: ExperimentConfig,
    pub meta: Meta,
    pub landscape: BuiltLandscape,
}

impl Experiment {
    /// Reads and validates `path`; `seed` overrides the file's seed.
    pub fn load(path: &Path, seed: Option<u64>) -> anyhow::Result<Self> {
        let bytes = fs::read(path).with_context(|| format!("reading config {}", path.display()))?;
        let mut config: ExperimentConfig =
            serde_json::from_slice(&bytes).with_context(|| format!("parsing config {}", path.display()))?;
        if let Some(s) = seed {
            config.seed = s;
        }
        let base = path.parent().unwrap_or(Path::new(""));
        let landscape = build_landscape(&config.landscape, base)?;
        config.train.validate()?;
        config.schedule.validate()?;
        match config.init {
            Some(InitConfig::Box { low, high }) => {
                init_uniform(1, low, high, 0)?;
            }
            Some(InitConfig::WellCenters) if well_centers(&config.landscape).is_none() => {
                bail!("well_centers init needs a gaussian_wells or random_wells landscape");
            }
            _ => {}
        }
        if let Some(e) = &config.explore {
            if !(e.stop_ratio >= 0.0 && e.stop_ratio.is_finite()) {
                bail!("explore.stop_ratio must be a non-negative number");
            }
        }
        if config.permute.is_some() && landscape.mlp().is_none() {
            bail!("permute needs an mlp landscape");
        }
        let meta = Meta { seed: config.seed, config_hash: hex::encode(Sha256::digest(&bytes)) };
        Ok(Experiment { config, meta, landscape })
    }

    pub fn landscape(&self) -> &dyn Landscape {
        self.landscape.as_landscape()
    }

    /// Starting point of minimum number `index`.
    pub fn initial_point(&self, index: usize) -> anyhow::Result<ParamVector> {
        let seed = self.config.seed.wrapping_add(index as u64);
        Ok(match &self.landscape {
            BuiltLandscape::Mlp(m) => init_params(m.spec(), seed),
            BuiltLandscape::Analytic(l) => match self.config.init.unwrap_or_default() {
                InitConfig::Box { low, high } => init_uniform(l.dim(), low, high, seed)?,
                InitConfig::WellCenters => {
                    let centers = well_centers(&self.config.landscape).expect("checked at load");
                    ParamVector::new(centers[index % centers.len()].clone())?
                }
            },
        })
    }

    pub fn explore_config(&self) -> anyhow::Result<ExploreConfig> {
        let Some(e) = &self.config.explore else {
            bail!("config has no explore section");
        };
        Ok(ExploreConfig { budget: e.budget, stop_ratio: e.stop_ratio, seed: self.config.seed })
    }
}

fn well_centers(cfg: &LandscapeConfig) -> Option<Vec<Vec<f64>>> {
    let wells = match cfg {
        LandscapeConfig::GaussianWells { wells, .. } => wells.clone(),
        LandscapeConfig::RandomWells { count, seed } => GaussianWells::random_2d(*count, *seed).wells,
        _ => return None,
    };
    Some(wells.into_iter().map(|w| w.center).collect())
}

fn build_landscape(cfg: &LandscapeConfig, base: &Path) -> anyhow::Result<BuiltLandscape> {
    Ok(match cfg {
        LandscapeConfig::DoubleWell => BuiltLandscape::Analytic(Box::new(make_double_well())),
        LandscapeConfig::GaussianWells { wells, confinement } => {
            if wells.is_empty() || wells.iter().any(|w| w.center.len() != wells[0].center.len()) {
                bail!("gaussian_wells needs at least one well and equal-length centers");
            }
            BuiltLandscape::Analytic(Box::new(GaussianWells::new(wells.clone(), *confinement)))
        }
        LandscapeConfig::RandomWells { count, seed } => {
            if *count == 0 {
                bail!("random_wells needs count > 0");
            }
            BuiltLandscape::Analytic(Box::new(GaussianWells::random_2d(*count, *seed)))
        }
        LandscapeConfig::Mlp { spec, dataset } => {
            let path = base.join(dataset);
            let file = File::open(&path).with_context(|| format!("opening dataset {}", path.display()))?;
            let data = Dataset::from_csv(file, spec.loss_kind)?;
            BuiltLandscape::Mlp(MlpLandscape::new(spec.clone(), data)?)
        }
    })
}
