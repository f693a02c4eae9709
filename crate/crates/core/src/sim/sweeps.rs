//! Rate-loss, capacity and RCU sweeps.

use rayon::prelude::*;

use super::{Calibration, ExperimentConfig, Mode, RcuConfig};
use crate::bounds::{rcu_bound, RcuParams};
use crate::ccdm::{quantize_distribution, CcdmCode};
use crate::error::{Error, Result};
use crate::modem::{
    constellation_capacity, entropy_bits, rate_optimal, sigma_for_snr, snr_threshold,
    ConstellationKind, InputDistribution, ShapingFamily,
};
use crate::rng::stream_rng;
use crate::shaping::{rate_loss, EncodeMode, MlhyCode};

#[derive(Debug, Clone, PartialEq)]
pub struct RateLossRow {
    pub block_len: usize,
    pub data_positions: usize,
    pub mlhy_delta: f64,
    pub mlhy_entropy: f64,
    pub ccdm_delta: f64,
    pub ccdm_input_bits: usize,
    pub frames: usize,
    pub construction_trials: usize,
}

/// Shaping-only rate loss of MLHY and CCDM over the configured block lengths.
pub fn rate_loss_sweep(cfg: &ExperimentConfig) -> Result<Vec<RateLossRow>> {
    if cfg.mode != Mode::DmOnly {
        return Err(Error::Config("rate-loss needs mode = \"dm-only\"".into()));
    }
    let Some(rl) = &cfg.rate_loss else {
        return Err(Error::Config("rate-loss needs a [rate_loss] section".into()));
    };
    let c = cfg.constellation()?;
    let target = cfg.target_distribution(&c)?;
    let mut rows = Vec::new();
    for &e in &rl.exponents {
        if e > 20 {
            return Err(Error::Config(format!("block length 2^{e} is too large")));
        }
        let n = 1usize << e;
        let trials = rl.min_trials.max(rl.trial_budget / n);
        let code = MlhyCode::new(cfg.construct_with(n, trials)?, c.clone())?;
        let words = (0..rl.frames)
            .into_par_iter()
            .map(|f| {
                let mut rng = stream_rng(cfg.seed, 1 << 32 | u64::from(e), f as u64);
                let msg: Vec<u8> = (0..code.payload_len()).map(|_| rand::Rng::random_range(&mut rng, 0..2u8)).collect();
                code.encode::<rand_chacha::ChaCha8Rng>(&msg, EncodeMode::List(rl.list_size), None)
            })
            .collect::<Result<Vec<_>>>()?;
        let data = code.construction().sizes.data;
        let loss = rate_loss(&words, data, c.size())?;
        let comp = quantize_distribution(target.pmf(), n as u64)?;
        let h = entropy_bits(&comp.pmf());
        let ccdm = CcdmCode::new(comp)?;
        rows.push(RateLossRow {
            block_len: n,
            data_positions: data,
            mlhy_delta: loss.delta,
            mlhy_entropy: loss.empirical_entropy,
            ccdm_delta: h - ccdm.input_bits() as f64 / n as f64,
            ccdm_input_bits: ccdm.input_bits(),
            frames: rl.frames,
            construction_trials: trials,
        });
    }
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CapacityRow {
    pub snr_db: f64,
    pub mi_uniform: f64,
    pub mi_shaped: f64,
    pub nu_shaped: f64,
    /// Best pair-symmetric distribution; PAM only.
    pub mi_paired: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CapacityReport {
    pub rows: Vec<CapacityRow>,
    pub target_rate: f64,
    pub threshold_uniform_db: f64,
    pub threshold_shaped_db: f64,
    pub threshold_paired_db: Option<f64>,
}

impl CapacityReport {
    pub fn shaping_gain_db(&self) -> f64 {
        self.threshold_uniform_db - self.threshold_shaped_db
    }

    /// Gain of the unrestricted over the pair-symmetric family.
    pub fn asymmetry_gain_db(&self) -> Option<f64> {
        self.threshold_paired_db.map(|p| p - self.threshold_shaped_db)
    }
}

/// Mutual information over the SNR grid and threshold SNRs for the target rate.
pub fn capacity_sweep(cfg: &ExperimentConfig) -> Result<CapacityReport> {
    let c = cfg.constellation()?;
    let cap = cfg.capacity.clone().unwrap_or(super::CapacityConfig {
        snr_db: Vec::new(),
        target_rate: None,
        tol_db: 1e-4,
    });
    let rate = cap.target_rate.unwrap_or(cfg.code.rate);
    let uniform = InputDistribution::uniform(c.size());
    let paired = c.kind() == ConstellationKind::Pam;
    let best = |snr: f64, family: ShapingFamily| rate_optimal(&c, snr, family).map(|r| r.1).unwrap_or(0.0);
    let rows = cap
        .snr_db
        .par_iter()
        .map(|&snr| {
            let (d, mi) = rate_optimal(&c, snr, ShapingFamily::MaxwellBoltzmann)?;
            Ok(CapacityRow {
                snr_db: snr,
                mi_uniform: constellation_capacity(&c, &uniform, snr),
                mi_shaped: mi,
                nu_shaped: d.nu().unwrap_or(0.0),
                mi_paired: paired.then(|| best(snr, ShapingFamily::PairedMaxwellBoltzmann)),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let threshold_uniform_db = snr_threshold(|s| constellation_capacity(&c, &uniform, s), rate, cap.tol_db)?;
    let threshold_shaped_db = snr_threshold(|s| best(s, ShapingFamily::MaxwellBoltzmann), rate, cap.tol_db)?;
    let threshold_paired_db = if paired {
        Some(snr_threshold(|s| best(s, ShapingFamily::PairedMaxwellBoltzmann), rate, cap.tol_db)?)
    } else {
        None
    };
    Ok(CapacityReport {
        rows,
        target_rate: rate,
        threshold_uniform_db,
        threshold_shaped_db,
        threshold_paired_db,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct RcuRow {
    pub snr_db: f64,
    pub bound: f64,
    pub std_err: f64,
    pub trials: usize,
}

/// RCU bound at each sweep SNR for the encoder-realized distribution.
pub fn rcu_sweep(cfg: &ExperimentConfig, calibration: &Calibration) -> Result<Vec<RcuRow>> {
    let Some(sweep) = &cfg.sweep else {
        return Err(Error::Config("rcu needs a [sweep] section".into()));
    };
    let rc = cfg.rcu.clone().unwrap_or_else(RcuConfig::default);
    let c = cfg.constellation()?;
    sweep
        .snr_db
        .iter()
        .enumerate()
        .map(|(s, &snr)| {
            let mut params = RcuParams::new(cfg.code.block_len, cfg.code.rate, rc.outer_trials, cfg.seed);
            params.grid_step = rc.grid_step;
            params.stream = s as u64;
            let sigma = sigma_for_snr(calibration.energy, snr);
            let est = rcu_bound(&c, &calibration.realized, sigma, params)?;
            Ok(RcuRow {
                snr_db: snr,
                bound: est.bound,
                std_err: est.std_err,
                trials: est.trials,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    const DM: &str = r#"
mode = "dm-only"
seed = 3

[constellation]
kind = "ask"
bits = 2

[code]
block_len = 64
rate = 1.625

[rate_loss]
exponents = [5, 6]
frames = 20
list_size = 4
trial_budget = 64000
"#;

    #[test]
    fn rate_loss_rows() {
        let cfg = ExperimentConfig::from_toml(DM).unwrap();
        let rows = rate_loss_sweep(&cfg).unwrap();
        assert_eq!(rows.len(), 2);
        assert_eq!(rows[0].data_positions, 52);
        assert_eq!(rows[1].construction_trials, 2000);
        for r in &rows {
            assert!(r.mlhy_delta > 0.0 && r.ccdm_delta > 0.0);
        }
        assert_eq!(rows, rate_loss_sweep(&cfg).unwrap());
    }

    #[test]
    fn capacity_thresholds_bracket() {
        let cfg = ExperimentConfig::from_toml(&format!(
            "{}\n[capacity]\nsnr_db = [0.0, 10.0]\ntarget_rate = 1.25\n",
            DM.replace("kind = \"ask\"", "kind = \"pam\"")
        ))
        .unwrap();
        let r = capacity_sweep(&cfg).unwrap();
        assert!(r.rows[0].mi_shaped >= r.rows[0].mi_uniform - 1e-9);
        assert!(r.rows[1].mi_paired.unwrap() <= r.rows[1].mi_shaped + 1e-9);
        assert!(r.shaping_gain_db() > 0.0);
        assert!(r.asymmetry_gain_db().unwrap() > 0.0);
    }
}
