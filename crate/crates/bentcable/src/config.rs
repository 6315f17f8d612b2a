//! Run configuration: JSON file merged under command-line flags.

use std::path::Path;

use bentcable_core::priors::{self, Hyperparameters};
use bentcable_core::{ChainSettings, LongitudinalDataset, Variant, Warning};
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use sha2::{Digest, Sha256};

use crate::error::{CliError, Result};
use crate::io::read_json;

/// Which prior family hyperparameters start from before overrides.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PriorChoice {
    /// Elicited scales with weakly informative, data-centred location priors.
    #[default]
    Weak,
    /// Elicited scales with the vague defaults for everything else.
    Vague,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub iters: usize,
    pub burnin: usize,
    pub thin: usize,
    pub seed: u64,
    pub chains: usize,
    pub adapt_interval: usize,
    pub p: usize,
    pub variant: Variant,
    /// AR orders and variants of a DIC comparison.
    pub p_list: Vec<usize>,
    pub variants: Vec<Variant>,
    /// Credible level of intervals and bands.
    pub level: f64,
    /// Points in the time grid of fitted curves.
    pub grid_points: usize,
    pub prior: PriorChoice,
    /// Overrides of individual hyperparameters; keys mirror field names.
    pub hyperparameters: Map<String, Value>,
}

impl Default for RunConfig {
    fn default() -> Self {
        let s = ChainSettings::default();
        RunConfig {
            iters: s.iters,
            burnin: s.burnin,
            thin: s.thin,
            seed: s.seed,
            chains: 1,
            adapt_interval: s.adapt_interval,
            p: 1,
            variant: Variant::Flexible,
            p_list: vec![0, 1, 2, 3],
            variants: vec![Variant::Flexible, Variant::GOnly, Variant::AOnly],
            level: 0.95,
            grid_points: 200,
            prior: PriorChoice::Weak,
            hyperparameters: Map::new(),
        }
    }
}

/// Command-line values that take precedence over the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub chains: Option<usize>,
    pub iters: Option<usize>,
    pub burnin: Option<usize>,
    pub thin: Option<usize>,
    pub p: Option<usize>,
    pub variant: Option<Variant>,
    pub p_list: Option<Vec<usize>>,
    pub variants: Option<Vec<Variant>>,
}

impl RunConfig {
    pub fn load(path: Option<&Path>, over: &Overrides) -> Result<Self> {
        let mut c: RunConfig = match path {
            Some(p) => read_json(p)?,
            None => RunConfig::default(),
        };
        macro_rules! take {
            ($($f:ident),*) => { $( if let Some(v) = over.$f.clone() { c.$f = v; } )* };
        }
        take!(seed, chains, iters, burnin, thin, p, variant, p_list, variants);
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        self.chain_settings().validate()?;
        if self.chains == 0 {
            return Err(CliError::Config("chains must be at least 1".into()));
        }
        if !(self.level > 0.0 && self.level < 1.0) {
            return Err(CliError::Config(format!("level must lie in (0, 1), got {}", self.level)));
        }
        if self.grid_points < 2 {
            return Err(CliError::Config("grid_points must be at least 2".into()));
        }
        Ok(())
    }

    pub fn chain_settings(&self) -> ChainSettings {
        ChainSettings {
            iters: self.iters,
            burnin: self.burnin,
            thin: self.thin,
            seed: self.seed,
            stream: 0,
            adapt_interval: self.adapt_interval,
            variant: self.variant,
            pinned: Default::default(),
        }
    }

    /// SHA-256 of the resolved configuration's canonical JSON.
    pub fn digest(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("configuration serializes");
        hex(&Sha256::digest(bytes))
    }
}

pub fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// Hyperparameters for `ds` at AR order `p`: the chosen prior family, then
/// the configuration's overrides.
pub fn resolve_hyperparameters(
    ds: &LongitudinalDataset,
    p: usize,
    config: &RunConfig,
) -> Result<(Hyperparameters, Vec<Warning>)> {
    let (base, warnings) = match config.prior {
        PriorChoice::Weak => bentcable_core::hyperparameters_for(ds, p)?,
        PriorChoice::Vague => {
            let (_, warnings) = bentcable_core::hyperparameters_for(ds, p)?;
            let e = priors::elicit_scale_matrices(ds);
            (priors::default_hyperparameters(p, e.scale_beta, e.scale_alpha)?, warnings)
        }
    };
    Ok((apply_overrides(base, &config.hyperparameters)?, warnings))
}

pub fn apply_overrides(base: Hyperparameters, overrides: &Map<String, Value>) -> Result<Hyperparameters> {
    if overrides.is_empty() {
        return Ok(base);
    }
    let mut v = serde_json::to_value(&base).expect("hyperparameters serialize");
    let obj = v.as_object_mut().expect("struct serializes to an object");
    for (k, x) in overrides {
        if !obj.contains_key(k) {
            let known: Vec<&String> = obj.keys().collect();
            return Err(CliError::Config(format!("unknown hyperparameter `{k}` (known: {known:?})")));
        }
        obj.insert(k.clone(), x.clone());
    }
    let h: Hyperparameters =
        serde_json::from_value(v).map_err(|e| CliError::Config(format!("hyperparameter override: {e}")))?;
    h.validate()?;
    Ok(h)
}
