//! Frame error rate sweeps.
//!
//! Frame `f` at sweep point `s` draws everything from `stream_rng(seed, s, f)`.
//! Frames run in fixed batches and the tally stops at the exact frame where the
//! stopping rule fires, so counts do not depend on the worker count.

use std::time::Instant;

use rand::Rng;
use rayon::prelude::*;

use super::{ExperimentConfig, Mode};
use crate::error::{Error, Result};
use crate::modem::{awgn_transmit, sigma_for_snr, InputDistribution};
use crate::rng::stream_rng;
use crate::shaping::{empirical_pmf, DmRule, EncodeMode, MlhyCode};

const CALIBRATION_STREAM: u64 = u64::MAX - 1;

/// Symbol statistics of the encoder output.
#[derive(Debug, Clone, PartialEq)]
pub struct Calibration {
    pub realized: InputDistribution,
    /// `E[X²]` under the realized distribution; sets the noise level.
    pub energy: f64,
    pub frames: usize,
}

fn encode_mode(list_enc: usize) -> EncodeMode {
    if list_enc <= 1 {
        EncodeMode::Deterministic
    } else {
        EncodeMode::List(list_enc)
    }
}

fn random_payload(len: usize, rng: &mut impl Rng) -> Vec<u8> {
    (0..len).map(|_| rng.random_range(0..2u8)).collect()
}

/// Measures the pooled symbol distribution over `frames` encoded random payloads.
pub fn calibrate(cfg: &ExperimentConfig, code: &MlhyCode, frames: usize) -> Result<Calibration> {
    if frames == 0 {
        return Err(Error::Config("calibration needs at least one frame".into()));
    }
    let mode = encode_mode(cfg.decoder.list_enc);
    let words = (0..frames)
        .into_par_iter()
        .map(|f| {
            let mut rng = stream_rng(cfg.seed, CALIBRATION_STREAM, f as u64);
            let msg = random_payload(code.payload_len(), &mut rng);
            code.encode::<rand_chacha::ChaCha8Rng>(&msg, mode, None)
        })
        .collect::<Result<Vec<_>>>()?;
    let c = code.constellation();
    let realized = InputDistribution::new(empirical_pmf(&words, c.size()))?;
    let energy = realized.energy(c);
    Ok(Calibration {
        realized,
        energy,
        frames,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct FerRecord {
    pub snr_db: f64,
    pub frames: u64,
    pub frame_errors: u64,
    pub bit_errors: u64,
    pub fer: f64,
    pub ber: f64,
    /// 95% normal-approximation interval on the FER.
    pub ci_low: f64,
    pub ci_high: f64,
    pub max_frames_reached: bool,
    pub wall_time_s: f64,
}

struct FrameOutcome {
    frame_error: bool,
    bit_errors: u64,
}

fn run_frame(
    code: &MlhyCode,
    cfg: &ExperimentConfig,
    sigma: f64,
    sweep: u64,
    frame: u64,
) -> Result<FrameOutcome> {
    let mut rng = stream_rng(cfg.seed, sweep, frame);
    let msg = random_payload(code.payload_len(), &mut rng);
    let cw = code.encode::<rand_chacha::ChaCha8Rng>(&msg, encode_mode(cfg.decoder.list_enc), None)?;
    let points: Vec<f64> = cw.symbols.iter().map(|&j| code.constellation().point(j)).collect();
    let y = awgn_transmit(&points, sigma, &mut rng);
    let rule = if cfg.decoder.list_enc <= 1 { DmRule::Argmax } else { DmRule::Fork };
    let decoded = code.decode(&y, sigma, cfg.decoder.list_dec, rule)?;
    let bit_errors = decoded.payload.iter().zip(&msg).filter(|(a, b)| a != b).count() as u64;
    Ok(FrameOutcome {
        frame_error: decoded.payload != msg,
        bit_errors,
    })
}

/// Runs the configured SNR sweep. Parallelism comes from the ambient rayon pool.
pub fn run_fer(cfg: &ExperimentConfig, code: &MlhyCode, calibration: &Calibration) -> Result<Vec<FerRecord>> {
    if cfg.mode == Mode::DmOnly {
        return Err(Error::Config("dm-only configs have no channel to simulate".into()));
    }
    let Some(sweep) = &cfg.sweep else {
        return Err(Error::Config("fer needs a [sweep] section".into()));
    };
    let payload = code.payload_len() as u64;
    let mut records = Vec::with_capacity(sweep.snr_db.len());
    for (s, &snr) in sweep.snr_db.iter().enumerate() {
        let start = Instant::now();
        let sigma = sigma_for_snr(calibration.energy, snr);
        let (mut frames, mut errors, mut bits) = (0u64, 0u64, 0u64);
        let done = |frames: u64, errors: u64| {
            (errors >= sweep.min_errors && frames >= sweep.min_frames) || frames >= sweep.max_frames
        };
        'batches: while !done(frames, errors) {
            let end = (frames + sweep.batch).min(sweep.max_frames);
            let outcomes = (frames..end)
                .into_par_iter()
                .map(|f| run_frame(code, cfg, sigma, s as u64, f))
                .collect::<Result<Vec<_>>>()?;
            for o in outcomes {
                frames += 1;
                errors += u64::from(o.frame_error);
                bits += o.bit_errors;
                if done(frames, errors) {
                    break 'batches;
                }
            }
        }
        let fer = errors as f64 / frames as f64;
        let half = 1.96 * (fer * (1.0 - fer) / frames as f64).sqrt();
        records.push(FerRecord {
            snr_db: snr,
            frames,
            frame_errors: errors,
            bit_errors: bits,
            fer,
            ber: if payload == 0 { 0.0 } else { bits as f64 / (frames * payload) as f64 },
            ci_low: (fer - half).max(0.0),
            ci_high: (fer + half).min(1.0),
            max_frames_reached: errors < sweep.min_errors,
            wall_time_s: start.elapsed().as_secs_f64(),
        });
    }
    Ok(records)
}

/// SNR at which a decreasing error curve crosses `target`, interpolating
/// `log10` of the error rate linearly between the bracketing points.
pub fn snr_at_fer(points: &[(f64, f64)], target: f64) -> Option<f64> {
    points.windows(2).find_map(|w| {
        let ((s0, f0), (s1, f1)) = (w[0], w[1]);
        if f0 >= target && f1 <= target && f0 > 0.0 && f1 > 0.0 {
            if f0 == f1 {
                return Some(s0);
            }
            let t = (f0.log10() - target.log10()) / (f0.log10() - f1.log10());
            Some(s0 + t * (s1 - s0))
        } else {
            None
        }
    })
}
