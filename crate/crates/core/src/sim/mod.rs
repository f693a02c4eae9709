//! Configuration-driven experiment harness.

mod csv;
mod fer;
mod sweeps;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::construction::{design_distribution, CodeConstruction, SetSizes};
use crate::crc::CrcSpec;
use crate::error::{Error, Result};
use crate::modem::{
    entropy_matched, make_constellation, sigma_for_snr, Constellation, ConstellationKind,
    InputDistribution, ShapingFamily,
};
use crate::shaping::MlhyCode;

pub use csv::{CsvTable, Metadata};
pub use fer::{calibrate, run_fer, snr_at_fer, Calibration, FerRecord};
pub use sweeps::{
    capacity_sweep, rate_loss_sweep, rcu_sweep, CapacityReport, CapacityRow, RateLossRow, RcuRow,
};

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    /// Shaped multilevel Honda-Yamamoto code.
    Mlhy,
    /// Uniform-input multilevel polar code without shaping positions.
    UniformMlpc,
    /// Shaping only: no channel, no frozen positions.
    DmOnly,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstellationConfig {
    pub kind: ConstellationKind,
    pub bits: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CodeConfig {
    pub block_len: usize,
    /// Bits per channel use, CRC included.
    pub rate: f64,
    #[serde(default)]
    pub design_snr_db: f64,
    #[serde(default)]
    pub kappa_db: f64,
    #[serde(default)]
    pub n_dm: usize,
    /// Generator coefficients, highest degree first, e.g. `"10001001"`.
    #[serde(default)]
    pub crc: Option<String>,
    #[serde(default = "default_construction_trials")]
    pub construction_trials: usize,
}

fn default_construction_trials() -> usize {
    100_000
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DecoderConfig {
    #[serde(default = "one")]
    pub list_enc: usize,
    #[serde(default = "default_list")]
    pub list_dec: usize,
}

impl Default for DecoderConfig {
    fn default() -> Self {
        Self {
            list_enc: 1,
            list_dec: default_list(),
        }
    }
}

fn one() -> usize {
    1
}

fn default_list() -> usize {
    32
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub snr_db: Vec<f64>,
    #[serde(default = "default_min_errors")]
    pub min_errors: u64,
    #[serde(default)]
    pub min_frames: u64,
    #[serde(default = "default_max_frames")]
    pub max_frames: u64,
    /// Frames dispatched per parallel batch.
    #[serde(default = "default_batch")]
    pub batch: u64,
}

fn default_min_errors() -> u64 {
    100
}

fn default_max_frames() -> u64 {
    1_000_000
}

fn default_batch() -> u64 {
    256
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RcuConfig {
    #[serde(default = "default_outer_trials")]
    pub outer_trials: usize,
    #[serde(default = "default_grid_step")]
    pub grid_step: f64,
    /// Encoder runs used to measure the realized symbol distribution.
    #[serde(default = "default_calibration_frames")]
    pub calibration_frames: usize,
}

impl Default for RcuConfig {
    fn default() -> Self {
        Self {
            outer_trials: default_outer_trials(),
            grid_step: default_grid_step(),
            calibration_frames: default_calibration_frames(),
        }
    }
}

fn default_outer_trials() -> usize {
    2000
}

fn default_grid_step() -> f64 {
    crate::bounds::DEFAULT_GRID_STEP
}

fn default_calibration_frames() -> usize {
    1000
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RateLossConfig {
    /// Block lengths `2^e`.
    pub exponents: Vec<u32>,
    #[serde(default = "default_rate_loss_frames")]
    pub frames: usize,
    #[serde(default = "default_list")]
    pub list_size: usize,
    /// Construction trials are `max(min_trials, trial_budget / N)`.
    #[serde(default = "default_trial_budget")]
    pub trial_budget: usize,
    #[serde(default = "default_min_trials")]
    pub min_trials: usize,
}

fn default_rate_loss_frames() -> usize {
    100
}

fn default_trial_budget() -> usize {
    4_000_000
}

fn default_min_trials() -> usize {
    2000
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CapacityConfig {
    pub snr_db: Vec<f64>,
    /// Rate for the threshold search; defaults to the code rate.
    #[serde(default)]
    pub target_rate: Option<f64>,
    #[serde(default = "default_tol")]
    pub tol_db: f64,
}

fn default_tol() -> f64 {
    1e-4
}

/// Complete experiment description; the TOML file maps onto this struct.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub mode: Mode,
    #[serde(default)]
    pub seed: u64,
    pub constellation: ConstellationConfig,
    pub code: CodeConfig,
    #[serde(default)]
    pub decoder: DecoderConfig,
    #[serde(default)]
    pub sweep: Option<SweepConfig>,
    #[serde(default)]
    pub rcu: Option<RcuConfig>,
    #[serde(default)]
    pub rate_loss: Option<RateLossConfig>,
    #[serde(default)]
    pub capacity: Option<CapacityConfig>,
}

/// The part of a config that determines the code.
#[derive(Serialize)]
struct DesignKey<'a> {
    mode: Mode,
    seed: u64,
    constellation: &'a ConstellationConfig,
    code: &'a CodeConfig,
}

fn config_err<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Config(msg.into()))
}

fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// JSON with object keys sorted, used for hashing.
pub fn canonical_json<T: Serialize>(value: &T) -> Result<String> {
    let v = serde_json::to_value(value)?;
    Ok(serde_json::to_string(&v)?)
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        let code = &self.code;
        if self.constellation.bits == 0 || self.constellation.bits > 8 {
            return config_err("constellation bits must lie in 1..=8");
        }
        if !code.block_len.is_power_of_two() {
            return config_err("block length must be a power of two");
        }
        if !(code.rate > 0.0 && code.rate <= self.constellation.bits as f64) {
            return config_err("rate must lie in (0, m]");
        }
        if self.decoder.list_enc == 0 || self.decoder.list_dec == 0 {
            return config_err("list sizes must be at least 1");
        }
        match self.mode {
            Mode::UniformMlpc if code.n_dm != 0 => return config_err("uniform-mlpc has no DM positions"),
            Mode::DmOnly if code.crc.is_some() => return config_err("dm-only codes carry no CRC"),
            _ => {}
        }
        if let Some(s) = &self.sweep {
            if s.snr_db.is_empty() {
                return config_err("SNR sweep is empty");
            }
            if s.batch == 0 || s.max_frames == 0 {
                return config_err("batch and max_frames must be positive");
            }
        }
        self.crc()?;
        Ok(())
    }

    pub fn crc(&self) -> Result<Option<CrcSpec>> {
        self.code
            .crc
            .as_deref()
            .map(CrcSpec::from_bit_string)
            .transpose()
            .map_err(|e| Error::Config(e.to_string()))
    }

    pub fn constellation(&self) -> Result<Constellation> {
        make_constellation(self.constellation.kind, self.constellation.bits)
    }

    /// Hash of the fields that determine the code.
    pub fn design_hash(&self) -> Result<String> {
        let key = DesignKey {
            mode: self.mode,
            seed: self.seed,
            constellation: &self.constellation,
            code: &self.code,
        };
        Ok(sha256_hex(canonical_json(&key)?.as_bytes()))
    }

    pub fn config_hash(&self) -> Result<String> {
        Ok(sha256_hex(canonical_json(self)?.as_bytes()))
    }

    /// Target input distribution for the configured mode.
    pub fn target_distribution(&self, c: &Constellation) -> Result<InputDistribution> {
        match self.mode {
            Mode::Mlhy => design_distribution(c, self.code.design_snr_db, self.code.kappa_db),
            Mode::UniformMlpc => Ok(InputDistribution::uniform(c.size())),
            Mode::DmOnly => entropy_matched(c, self.code.rate),
        }
    }

    fn sizes(&self, block_len: usize) -> Result<SetSizes> {
        let crc_len = self.crc()?.map_or(0, |s| s.len());
        let m = self.constellation.bits;
        let data = SetSizes::for_rate(self.code.rate, block_len, 0, crc_len)?.data;
        let dm = match self.mode {
            Mode::DmOnly => m * block_len - data,
            _ => self.code.n_dm,
        };
        Ok(SetSizes { data, dm, crc_len })
    }

    /// Runs the construction at block length `block_len` with `trials` samples.
    pub fn construct_with(&self, block_len: usize, trials: usize) -> Result<CodeConstruction> {
        let c = self.constellation()?;
        let target = self.target_distribution(&c)?;
        let sigma = match self.mode {
            Mode::DmOnly => None,
            _ => Some(sigma_for_snr(target.energy(&c), self.code.design_snr_db)),
        };
        let mut cons = CodeConstruction::build(
            &c,
            target,
            sigma,
            block_len,
            trials,
            self.seed,
            self.sizes(block_len)?,
            self.crc()?,
        )?;
        cons.config_hash = Some(self.design_hash()?);
        Ok(cons)
    }

    pub fn construct(&self) -> Result<CodeConstruction> {
        self.construct_with(self.code.block_len, self.code.construction_trials)
    }

    /// Loads the code for `cons`, refusing constructions built from another design.
    pub fn code_for(&self, cons: CodeConstruction) -> Result<MlhyCode> {
        let want = self.design_hash()?;
        if cons.config_hash.as_deref() != Some(want.as_str()) {
            return Err(Error::ConstructionMismatch(format!(
                "construction hash {:?} differs from config design hash {want}",
                cons.config_hash
            )));
        }
        MlhyCode::new(cons, self.constellation()?)
    }
}

/// Content hash of a construction's JSON form.
pub fn construction_hash(cons: &CodeConstruction) -> Result<String> {
    Ok(sha256_hex(canonical_json(cons)?.as_bytes()))
}

pub fn construction_to_json(cons: &CodeConstruction) -> Result<String> {
    Ok(serde_json::to_string_pretty(cons)?)
}

pub fn construction_from_json(text: &str) -> Result<CodeConstruction> {
    let cons: CodeConstruction = serde_json::from_str(text)?;
    cons.validate()?;
    Ok(cons)
}

/// Family used for the shaped threshold of a constellation kind's paired variant.
pub fn paired_family() -> ShapingFamily {
    ShapingFamily::PairedMaxwellBoltzmann
}
