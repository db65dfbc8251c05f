//! Setting resolution with the precedence: CLI flags > `HEARTHLAB_*`
//! environment variables > config file > built-in defaults.

use std::path::PathBuf;
use std::str::FromStr;

use anyhow::{bail, Context, Result};
use serde::Deserialize;

use hearthlab::embed::DEFAULT_EMBED_DIM;
use hearthlab::rl::{PpoHyper, RewardParams, TrainConfig, DEFAULT_FEATURE_DIM};

/// Which embedding provider similarity computations use.
#[derive(Clone, Debug, PartialEq)]
pub enum ProviderSpec {
    Hashed,
    File(PathBuf),
    Http(String),
}

impl FromStr for ProviderSpec {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "hashed" {
            Ok(ProviderSpec::Hashed)
        } else if let Some(path) = s.strip_prefix("file:") {
            Ok(ProviderSpec::File(PathBuf::from(path)))
        } else if s.starts_with("http://") || s.starts_with("https://") {
            Ok(ProviderSpec::Http(s.to_string()))
        } else if let Some(url) = s.strip_prefix("http:") {
            Ok(ProviderSpec::Http(url.to_string()))
        } else {
            bail!("embedding provider must be `hashed`, `file:<path>`, or `http:<url>`, got `{s}`")
        }
    }
}

/// Optional overrides read from a JSON config file; every missing key falls
/// through to the next precedence level.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub episodes: Option<usize>,
    pub seeds: Option<usize>,
    pub seed: Option<u64>,
    pub max_steps: Option<u32>,
    pub c: Option<f64>,
    pub feature_dim: Option<usize>,
    pub hidden_dim: Option<usize>,
    pub embed_dim: Option<usize>,
    pub checkpoints: Option<Vec<usize>>,
    pub out: Option<PathBuf>,
    pub jobs: Option<usize>,
    pub gamma: Option<f64>,
    pub lambda: Option<f64>,
    pub clip: Option<f64>,
    pub epochs: Option<usize>,
    pub minibatch: Option<usize>,
    pub learning_rate: Option<f64>,
    pub vf_coef: Option<f64>,
    pub ent_coef: Option<f64>,
    pub grad_clip: Option<f64>,
    pub rollout_steps: Option<usize>,
    pub mask_invalid: Option<bool>,
    pub keep_primitive_head: Option<bool>,
    pub embedding_provider: Option<String>,
}

impl ConfigFile {
    pub fn load(path: &PathBuf) -> Result<ConfigFile> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("cannot read config file {}", path.display()))?;
        serde_json::from_str(&text)
            .with_context(|| format!("bad config file {}", path.display()))
    }
}

/// Fully resolved settings.
#[derive(Clone, Debug)]
pub struct Settings {
    pub episodes: usize,
    pub seeds: usize,
    pub seed: u64,
    pub max_steps: u32,
    pub c: f64,
    pub feature_dim: usize,
    pub hidden_dim: usize,
    pub embed_dim: usize,
    pub checkpoints: Vec<usize>,
    pub out: PathBuf,
    pub jobs: usize,
    pub ppo: PpoHyper,
    pub mask_invalid: bool,
    pub keep_primitive_head: bool,
    pub provider: ProviderSpec,
}

impl Default for Settings {
    fn default() -> Self {
        Settings {
            episodes: 512,
            seeds: 3,
            seed: 0,
            max_steps: 64,
            c: 200.0,
            feature_dim: DEFAULT_FEATURE_DIM,
            hidden_dim: 128,
            embed_dim: DEFAULT_EMBED_DIM,
            checkpoints: vec![80, 160],
            out: PathBuf::from("out"),
            jobs: 0,
            ppo: PpoHyper::default(),
            mask_invalid: false,
            keep_primitive_head: false,
            provider: ProviderSpec::Hashed,
        }
    }
}

fn env_parse<T: FromStr>(name: &str) -> Result<Option<T>>
where
    T::Err: std::fmt::Display,
{
    match std::env::var(name) {
        Ok(raw) => match raw.parse() {
            Ok(v) => Ok(Some(v)),
            Err(e) => bail!("bad value for {name}: {e}"),
        },
        Err(_) => Ok(None),
    }
}

impl Settings {
    /// Apply the config file, then the environment. CLI flags are applied by
    /// the caller afterwards.
    pub fn resolve(config: Option<&PathBuf>) -> Result<Settings> {
        let mut s = Settings::default();
        let file = match config {
            Some(path) => ConfigFile::load(path)?,
            None => match env_parse::<PathBuf>("HEARTHLAB_CONFIG")? {
                Some(path) => ConfigFile::load(&path)?,
                None => ConfigFile::default(),
            },
        };
        macro_rules! take {
            ($field:ident) => {
                if let Some(v) = file.$field {
                    s.$field = v;
                }
            };
        }
        take!(episodes);
        take!(seeds);
        take!(seed);
        take!(max_steps);
        take!(c);
        take!(feature_dim);
        take!(hidden_dim);
        take!(embed_dim);
        take!(checkpoints);
        take!(out);
        take!(jobs);
        take!(mask_invalid);
        take!(keep_primitive_head);
        macro_rules! take_ppo {
            ($field:ident) => {
                if let Some(v) = file.$field {
                    s.ppo.$field = v;
                }
            };
        }
        take_ppo!(gamma);
        take_ppo!(lambda);
        take_ppo!(clip);
        take_ppo!(epochs);
        take_ppo!(minibatch);
        take_ppo!(learning_rate);
        take_ppo!(vf_coef);
        take_ppo!(ent_coef);
        take_ppo!(grad_clip);
        take_ppo!(rollout_steps);
        if let Some(p) = file.embedding_provider {
            s.provider = p.parse()?;
        }

        if let Some(v) = env_parse("HEARTHLAB_EPISODES")? {
            s.episodes = v;
        }
        if let Some(v) = env_parse("HEARTHLAB_SEEDS")? {
            s.seeds = v;
        }
        if let Some(v) = env_parse("HEARTHLAB_SEED")? {
            s.seed = v;
        }
        if let Some(v) = env_parse("HEARTHLAB_MAX_STEPS")? {
            s.max_steps = v;
        }
        if let Some(v) = env_parse("HEARTHLAB_C")? {
            s.c = v;
        }
        if let Some(v) = env_parse("HEARTHLAB_FEATURE_DIM")? {
            s.feature_dim = v;
        }
        if let Some(v) = env_parse("HEARTHLAB_HIDDEN_DIM")? {
            s.hidden_dim = v;
        }
        if let Some(v) = env_parse("HEARTHLAB_EMBED_DIM")? {
            s.embed_dim = v;
        }
        if let Some(v) = env_parse("HEARTHLAB_OUT")? {
            s.out = v;
        }
        if let Some(v) = env_parse("HEARTHLAB_JOBS")? {
            s.jobs = v;
        }
        if let Some(v) = env_parse::<String>("HEARTHLAB_EMBEDDING_PROVIDER")? {
            s.provider = v.parse()?;
        }
        Ok(s)
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            episodes: self.episodes,
            feature_dim: self.feature_dim,
            hidden_dim: self.hidden_dim,
            reward: RewardParams {
                c: self.c,
                invalid_penalty: -1.0,
                max_steps: self.max_steps,
            },
            ppo: self.ppo,
            mask_invalid: self.mask_invalid,
        }
    }

    pub fn provider(&self) -> Result<Box<dyn hearthlab::embed::EmbeddingProvider>> {
        Ok(match &self.provider {
            ProviderSpec::Hashed => {
                Box::new(hearthlab::embed::HashedProvider { dim: self.embed_dim })
            }
            ProviderSpec::File(path) => Box::new(
                hearthlab::embed::FileProvider::load(path)
                    .with_context(|| format!("loading embedding table {}", path.display()))?,
            ),
            ProviderSpec::Http(url) => {
                Box::new(hearthlab::embed::HttpProvider { base_url: url.clone() })
            }
        })
    }
}
