//! Declarative experiment description, read from TOML.
//!
//! Every key is optional; missing keys take the defaults below.
//!
//! ```toml
//! snr_db = 12.0
//! lambda = 0.998
//! rank_policy = "auto-3-8"      # or "fixed-4"
//! mode = "dfe"                  # or "linear"
//! algorithm = "proposed"        # or "full-rank"
//! n_runs = 100
//!
//! [dims]
//! n_t = 4
//! n_r = 8
//!
//! [fading]
//! fd_t = 0.0001
//!
//! [sweep]
//! variable = "snr"
//! values = [6, 9, 12, 15]
//! ```

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::adaptation::{check_lambda_delta, RankPolicy, TargetScaling};
use crate::channel::{vehicular_a_profile, FadingConfig, MimoDims};
use crate::equalizer::Mode;
use crate::parallel::Execution;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AlgorithmKind {
    #[default]
    Proposed,
    FullRank,
}

impl AlgorithmKind {
    pub fn name(&self) -> &'static str {
        match self {
            AlgorithmKind::Proposed => "proposed",
            AlgorithmKind::FullRank => "full-rank",
        }
    }
}

impl fmt::Display for AlgorithmKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for AlgorithmKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "proposed" => Ok(AlgorithmKind::Proposed),
            "full-rank" => Ok(AlgorithmKind::FullRank),
            other => Err(Error::Parameter(format!("unknown algorithm {other:?}"))),
        }
    }
}

/// Doppler and delay profile; the per-run seed is derived by the engine.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FadingSpec {
    pub fd_t: f64,
    /// Linear path powers; defaults to the normalized vehicular A profile.
    pub profile: Option<Vec<f64>>,
}

impl Default for FadingSpec {
    fn default() -> Self {
        Self { fd_t: 1e-4, profile: None }
    }
}

impl FadingSpec {
    pub fn with_seed(&self, rng_seed: u64, l_p: usize) -> FadingConfig {
        let profile = self.profile.clone().unwrap_or_else(|| {
            let p = vehicular_a_profile();
            if l_p == p.len() {
                p
            } else {
                // Truncate or pad the default profile and renormalize.
                let mut q: Vec<f64> = (0..l_p).map(|i| p.get(i).copied().unwrap_or(0.0)).collect();
                let s: f64 = q.iter().sum();
                q.iter_mut().for_each(|v| *v /= s);
                q
            }
        });
        FadingConfig { fd_t: self.fd_t, profile, rng_seed }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OfdmConfig {
    pub n_subcarriers: usize,
    pub cyclic_prefix: usize,
}

impl Default for OfdmConfig {
    fn default() -> Self {
        Self { n_subcarriers: 64, cyclic_prefix: 8 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub variable: String,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub snr_db: f64,
    pub lambda: f64,
    pub delta: f64,
    pub rank_policy: RankPolicy,
    pub mode: Mode,
    pub algorithm: AlgorithmKind,
    pub target_scaling: TargetScaling,
    pub n_training: usize,
    pub n_symbols: usize,
    pub n_runs: usize,
    pub master_seed: u64,
    pub execution: Execution,
    pub dims: MimoDims,
    pub fading: FadingSpec,
    pub ofdm: OfdmConfig,
    pub sweep: Option<SweepSpec>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            snr_db: 12.0,
            lambda: 0.998,
            delta: 0.01,
            rank_policy: RankPolicy::Auto { d_min: 3, d_max: 8 },
            mode: Mode::Dfe,
            algorithm: AlgorithmKind::Proposed,
            target_scaling: TargetScaling::PseudoInverse,
            n_training: 250,
            n_symbols: 1000,
            n_runs: 100,
            master_seed: 1,
            execution: Execution::Parallel,
            dims: MimoDims::default(),
            fading: FadingSpec::default(),
            ofdm: OfdmConfig::default(),
            sweep: None,
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> std::result::Result<Self, String> {
        toml::from_str(text).map_err(|e| e.to_string())
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::ConfigIo { path: path.to_owned(), source })?;
        let cfg = Self::from_toml_str(&text).map_err(|message| Error::ConfigParse { path: path.to_owned(), message })?;
        cfg.validate().map_err(|e| Error::ConfigParse { path: path.to_owned(), message: e.to_string() })?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// First 16 hex digits of the SHA-256 of the canonical TOML form.
    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.to_toml().as_bytes());
        digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }

    /// Dimensions the equalizer actually sees.
    pub fn effective_dims(&self) -> MimoDims {
        match self.mode {
            Mode::Dfe => self.dims,
            Mode::Linear => self.dims.without_feedback(),
        }
    }

    /// Noise variance per receive antenna for unit-power symbols:
    /// `SNR = 10·log10(n_t/σ²)`.
    pub fn noise_var(&self) -> f64 {
        noise_var(self.dims.n_t, self.snr_db)
    }

    pub fn validate(&self) -> Result<()> {
        self.dims.validate()?;
        check_lambda_delta(self.lambda, self.delta)?;
        self.rank_policy.validate(self.effective_dims().m())?;
        if !self.snr_db.is_finite() {
            return Err(Error::Parameter("snr_db must be finite".into()));
        }
        if !(self.fading.fd_t >= 0.0 && self.fading.fd_t.is_finite()) {
            return Err(Error::Parameter("fd_t must be finite and non-negative".into()));
        }
        if let Some(p) = &self.fading.profile {
            if p.len() != self.dims.l_p {
                return Err(Error::Parameter(format!("profile has {} taps, l_p={}", p.len(), self.dims.l_p)));
            }
        }
        if self.n_symbols == 0 || self.n_training > self.n_symbols {
            return Err(Error::Parameter(format!(
                "need 0 < n_training ({}) <= n_symbols ({})",
                self.n_training, self.n_symbols
            )));
        }
        if self.n_runs == 0 {
            return Err(Error::Parameter("n_runs must be positive".into()));
        }
        if self.ofdm.n_subcarriers < self.dims.l_p || self.ofdm.cyclic_prefix + 1 < self.dims.l_p {
            return Err(Error::Parameter("OFDM tones and cyclic prefix must cover the channel".into()));
        }
        Ok(())
    }
}

pub fn noise_var(n_t: usize, snr_db: f64) -> f64 {
    n_t as f64 / 10f64.powf(snr_db / 10.0)
}
