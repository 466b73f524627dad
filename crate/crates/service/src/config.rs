use std::path::{Path, PathBuf};
use std::sync::Arc;

use palettizer::prefs::Lexicon;
use palettizer::recommender::{Imputer, MiceConfig, MiceImputer, VaeacModel};
use palettizer::synth::generate_corpus;
use palettizer::featurize;
use serde::{Deserialize, Serialize};

use crate::error::ServiceError;

/// Environment variable naming the config file; wins over any path given
/// on the command line.
pub const CONFIG_ENV: &str = "PALETTIZER_CONFIG";

/// How recommend requests without an explicit seed are seeded.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "policy")]
pub enum SeedPolicy {
    Fixed { seed: u64 },
    PerRequest,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServiceConfig {
    /// VAEAC checkpoint. Without one the service fits a chained-equations
    /// model on a small generated corpus at startup.
    pub model_path: Option<PathBuf>,
    /// Lexicon JSON; the built-in lexicon when absent.
    pub lexicon_path: Option<PathBuf>,
    pub store_path: PathBuf,
    pub listen: String,
    pub default_n: usize,
    pub seed_policy: SeedPolicy,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        Self {
            model_path: None,
            lexicon_path: None,
            store_path: PathBuf::from("palettizer-store.json"),
            listen: "127.0.0.1:8080".into(),
            default_n: 5,
            seed_policy: SeedPolicy::PerRequest,
        }
    }
}

impl ServiceConfig {
    pub fn from_file(path: &Path) -> Result<Self, ServiceError> {
        let text = std::fs::read_to_string(path).map_err(|e| ServiceError::Io(path.to_path_buf(), e))?;
        let config: Self = serde_json::from_str(&text).map_err(|e| ServiceError::Config(format!("{}: {e}", path.display())))?;
        config.validate()?;
        Ok(config)
    }

    /// `$PALETTIZER_CONFIG`, else `path`, else defaults.
    pub fn load(path: Option<&Path>) -> Result<Self, ServiceError> {
        match std::env::var_os(CONFIG_ENV) {
            Some(p) => Self::from_file(Path::new(&p)),
            None => match path {
                Some(p) => Self::from_file(p),
                None => Ok(Self::default()),
            },
        }
    }

    pub fn validate(&self) -> Result<(), ServiceError> {
        if self.default_n == 0 {
            return Err(ServiceError::Config("default_n must be at least 1".into()));
        }
        for p in self.model_path.iter().chain(&self.lexicon_path) {
            std::fs::metadata(p).map_err(|e| ServiceError::Io(p.clone(), e))?;
        }
        Ok(())
    }

    pub fn load_lexicon(&self) -> Result<Lexicon, ServiceError> {
        match &self.lexicon_path {
            None => Ok(Lexicon::builtin()),
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| ServiceError::Io(p.clone(), e))?;
                Ok(Lexicon::from_json(&text)?)
            }
        }
    }

    pub fn load_model(&self) -> Result<Arc<dyn Imputer + Send + Sync>, ServiceError> {
        match &self.model_path {
            Some(p) => Ok(Arc::new(VaeacModel::load(p)?)),
            None => Ok(Arc::new(fallback_model()?)),
        }
    }
}

/// Chained-equations model fitted on 500 generated documents (seed 0).
pub fn fallback_model() -> Result<MiceImputer, ServiceError> {
    let corpus: Vec<_> = generate_corpus(500, 0)
        .iter()
        .map(|i| featurize(&i.doc))
        .collect::<Result<_, _>>()
        .map_err(|e| ServiceError::Config(format!("fallback corpus: {e}")))?;
    Ok(MiceImputer::fit(&corpus, MiceConfig::default())?)
}
