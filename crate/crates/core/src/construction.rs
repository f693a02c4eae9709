//! Monte-Carlo construction of multilevel Honda-Yamamoto polar codes.
//!
//! For every bitlevel `ℓ` and index `i` two conditional entropies are
//! estimated with a genie-aided multistage SC pass:
//! `H(U^ℓ_i | V^ℓ_i)` without the channel output and `H(U^ℓ_i | V^ℓ_i, Y)`
//! with it, where `V^ℓ_i` collects `u^ℓ_{<i}` and all lower bitlevels. Positions
//! with the lowest source entropy become shaping (DM) bits, those with the
//! highest channel entropy are frozen, and the rest carry data.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::crc::CrcSpec;
use crate::error::{invalid, Error, Result};
use crate::modem::{rate_optimal, Constellation, InputDistribution, ShapingFamily, SymbolModel};
use crate::polar::{
    binary_entropy_of_llr, sc_pass, transform_unchecked, BitView, Decision, MetricSource,
    PolarParams,
};
use crate::rng::{cumulative, sample_index, stream_rng};

/// Below this many trials the estimates are flagged as unreliable.
pub const MIN_RELIABLE_TRIALS: usize = 1000;

const TRIALS_PER_CHUNK: usize = 256;

/// Per-position entropy estimates, indexed `[level][i]`, in bits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BitchannelStats {
    pub h_source: Vec<Vec<f64>>,
    pub h_channel: Vec<Vec<f64>>,
    /// Standard errors of the means above.
    pub se_source: Vec<Vec<f64>>,
    pub se_channel: Vec<Vec<f64>>,
    pub trials: usize,
    /// Set when `trials < MIN_RELIABLE_TRIALS`.
    pub low_trial_warning: bool,
}

impl BitchannelStats {
    pub fn levels(&self) -> usize {
        self.h_source.len()
    }

    pub fn block_len(&self) -> usize {
        self.h_source.first().map_or(0, Vec::len)
    }
}

#[derive(Clone)]
struct Accum {
    sum: Vec<f64>,
    sq: Vec<f64>,
}

impl Accum {
    fn new(len: usize) -> Self {
        Self {
            sum: vec![0.0; len],
            sq: vec![0.0; len],
        }
    }

    fn add(&mut self, k: usize, v: f64) {
        self.sum[k] += v;
        self.sq[k] += v * v;
    }

    fn merge(&mut self, other: &Accum) {
        for (a, b) in self.sum.iter_mut().zip(&other.sum) {
            *a += b;
        }
        for (a, b) in self.sq.iter_mut().zip(&other.sq) {
            *a += b;
        }
    }

    fn finish(&self, trials: usize, levels: usize, len: usize) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
        let t = trials as f64;
        let mut mean = vec![vec![0.0; len]; levels];
        let mut se = vec![vec![0.0; len]; levels];
        for l in 0..levels {
            for i in 0..len {
                let k = l * len + i;
                let m = self.sum[k] / t;
                let var = if trials > 1 {
                    ((self.sq[k] - t * m * m) / (t - 1.0)).max(0.0)
                } else {
                    0.0
                };
                mean[l][i] = m;
                se[l][i] = (var / t).sqrt();
            }
        }
        (mean, se)
    }
}

/// Estimates both entropy families by genie-aided multistage SC over
/// `trials` random words drawn i.i.d. from `input`.
///
/// With `sigma = None` no channel is simulated and `h_channel` equals
/// `h_source`. Trials are split into fixed chunks with their own random
/// streams and merged in chunk order, so results do not depend on the
/// thread count.
pub fn estimate_bitchannels(
    c: &Constellation,
    input: &InputDistribution,
    sigma: Option<f64>,
    block_len: usize,
    trials: usize,
    seed: u64,
) -> Result<BitchannelStats> {
    PolarParams::from_len(block_len)?;
    if trials == 0 {
        return invalid("at least one trial is required");
    }
    if let Some(s) = sigma {
        if !(s >= 0.0) {
            return invalid(format!("noise standard deviation {s} must be non-negative"));
        }
    }
    let model = SymbolModel::new(c, input)?;
    let levels = c.bits();
    let total = levels * block_len;
    let cdf = cumulative(input.pmf());
    let chunks = trials.div_ceil(TRIALS_PER_CHUNK);

    let partials: Vec<Result<(Accum, Accum)>> = (0..chunks)
        .into_par_iter()
        .map(|chunk| {
            let mut rng = stream_rng(seed, u64::MAX, chunk as u64);
            let mut src = Accum::new(total);
            let mut chn = Accum::new(total);
            let count = TRIALS_PER_CHUNK.min(trials - chunk * TRIALS_PER_CHUNK);
            for _ in 0..count {
                trial(c, &model, &cdf, sigma, block_len, &mut rng, &mut src, &mut chn)?;
            }
            Ok((src, chn))
        })
        .collect();

    let mut src = Accum::new(total);
    let mut chn = Accum::new(total);
    for p in partials {
        let (s, ch) = p?;
        src.merge(&s);
        chn.merge(&ch);
    }
    let (h_source, se_source) = src.finish(trials, levels, block_len);
    let (h_channel, se_channel) = if sigma.is_some() {
        chn.finish(trials, levels, block_len)
    } else {
        (h_source.clone(), se_source.clone())
    };
    Ok(BitchannelStats {
        h_source,
        h_channel,
        se_source,
        se_channel,
        trials,
        low_trial_warning: trials < MIN_RELIABLE_TRIALS,
    })
}

#[allow(clippy::too_many_arguments)]
fn trial<R: rand::Rng>(
    c: &Constellation,
    model: &SymbolModel,
    cdf: &[f64],
    sigma: Option<f64>,
    block_len: usize,
    rng: &mut R,
    src: &mut Accum,
    chn: &mut Accum,
) -> Result<()> {
    let symbols: Vec<usize> = (0..block_len).map(|_| sample_index(cdf, rng)).collect();
    let loglik: Option<Vec<Vec<f64>>> = sigma.map(|s| {
        let xs: Vec<f64> = symbols.iter().map(|&j| c.point(j)).collect();
        crate::modem::awgn_transmit(&xs, s, rng)
            .into_iter()
            .map(|y| model.log_likelihoods(y, s))
            .collect()
    });
    for level in 0..c.bits() {
        let mask = (1usize << level) - 1;
        let x: Vec<u8> = symbols.iter().map(|&j| Constellation::label_bit(j, level)).collect();
        let prior = symbols
            .iter()
            .map(|&j| model.prior_llr(level, j & mask))
            .collect::<Result<Vec<_>>>()?;
        let channel = match &loglik {
            Some(ll) => Some(
                symbols
                    .iter()
                    .zip(ll)
                    .map(|(&j, l)| model.channel_llr(l, level, j & mask))
                    .collect::<Result<Vec<_>>>()?,
            ),
            None => None,
        };
        let u = transform_unchecked(&x);
        let mut genie = |b: &BitView| Decision::Bit(u[b.index]);
        let out = sc_pass(channel.as_deref(), Some(&prior), &mut genie, MetricSource::Prior, level)?;
        let base = level * block_len;
        for i in 0..block_len {
            src.add(base + i, binary_entropy_of_llr(out.prior_llrs[i]));
            if channel.is_some() {
                chn.add(base + i, binary_entropy_of_llr(out.channel_llrs[i]));
            }
        }
    }
    Ok(())
}

/// Role of a bit position in the multilevel code.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PositionClass {
    Data,
    Frozen,
    Dm,
}

/// Number of data and shaping positions to allocate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SetSizes {
    /// Data positions including CRC bits: `R · N`.
    pub data: usize,
    pub dm: usize,
    pub crc_len: usize,
}

impl SetSizes {
    /// Sizes for rate `rate` bits/channel-use at block length `block_len`.
    pub fn for_rate(rate: f64, block_len: usize, dm: usize, crc_len: usize) -> Result<Self> {
        let exact = rate * block_len as f64;
        let data = exact.round();
        if (exact - data).abs() > 1e-6 || data < 0.0 {
            return invalid(format!("R·N = {exact} is not a whole number of bits"));
        }
        Ok(Self {
            data: data as usize,
            dm,
            crc_len,
        })
    }
}

/// Classification of all `m · N` positions, indexed `[level][i]`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Classification {
    pub classes: Vec<Vec<PositionClass>>,
}

impl Classification {
    pub fn count(&self, class: PositionClass) -> usize {
        self.classes.iter().flatten().filter(|&&c| c == class).count()
    }

    /// `(level, i)` of every data position in visiting order.
    pub fn data_positions(&self) -> Vec<(usize, usize)> {
        self.positions(PositionClass::Data)
    }

    pub fn positions(&self, class: PositionClass) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for (l, row) in self.classes.iter().enumerate() {
            for (i, &c) in row.iter().enumerate() {
                if c == class {
                    out.push((l, i));
                }
            }
        }
        out
    }
}

/// Picks the `dm` positions of lowest source entropy for shaping, then the
/// `m·N − data − dm` remaining positions of highest channel entropy to freeze.
/// Ties resolve to the lower `(level, i)`.
pub fn select_sets(stats: &BitchannelStats, sizes: SetSizes) -> Result<Classification> {
    let levels = stats.levels();
    let len = stats.block_len();
    let total = levels * len;
    if sizes.data + sizes.dm > total {
        return invalid(format!(
            "{} data + {} DM positions exceed the {total} available",
            sizes.data, sizes.dm
        ));
    }
    if sizes.crc_len > sizes.data {
        return invalid(format!("CRC of {} bits does not fit {} data bits", sizes.crc_len, sizes.data));
    }
    let frozen = total - sizes.data - sizes.dm;
    let key = |p: usize| (p / len, p % len);
    let mut order: Vec<usize> = (0..total).collect();
    order.sort_by(|&a, &b| {
        let (la, ia) = key(a);
        let (lb, ib) = key(b);
        stats.h_source[la][ia].total_cmp(&stats.h_source[lb][ib]).then(a.cmp(&b))
    });
    let mut classes = vec![vec![PositionClass::Data; len]; levels];
    for &p in &order[..sizes.dm] {
        let (l, i) = key(p);
        classes[l][i] = PositionClass::Dm;
    }
    let mut rest: Vec<usize> = order[sizes.dm..].to_vec();
    rest.sort_by(|&a, &b| {
        let (la, ia) = key(a);
        let (lb, ib) = key(b);
        stats.h_channel[lb][ib].total_cmp(&stats.h_channel[la][ia]).then(a.cmp(&b))
    });
    for &p in &rest[..frozen] {
        let (l, i) = key(p);
        classes[l][i] = PositionClass::Frozen;
    }
    Ok(Classification { classes })
}

/// Rate-optimal Maxwell-Boltzmann input at `snr_design_db + kappa_db`.
pub fn design_distribution(
    c: &Constellation,
    snr_design_db: f64,
    kappa_db: f64,
) -> Result<InputDistribution> {
    rate_optimal(c, snr_design_db + kappa_db, ShapingFamily::MaxwellBoltzmann).map(|(d, _)| d)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Fractions {
    /// Fraction of positions with entropy below δ.
    pub low: f64,
    /// Fraction above 1 − δ.
    pub high: f64,
    pub unpolarized: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PolarizationFractions {
    pub source: Fractions,
    pub channel: Fractions,
    /// `|{h_source > 1 − δ} ∩ {h_channel < δ}| / N`, in bits per symbol.
    pub info_rate: f64,
}

pub fn polarization_fractions(stats: &BitchannelStats, delta: f64) -> Result<PolarizationFractions> {
    if !(delta > 0.0 && delta < 0.5) {
        return invalid(format!("δ = {delta} outside (0, 1/2)"));
    }
    let total = (stats.levels() * stats.block_len()) as f64;
    let fractions = |h: &Vec<Vec<f64>>| {
        let (mut low, mut high) = (0usize, 0usize);
        for &v in h.iter().flatten() {
            if v < delta {
                low += 1;
            } else if v > 1.0 - delta {
                high += 1;
            }
        }
        Fractions {
            low: low as f64 / total,
            high: high as f64 / total,
            unpolarized: (total - (low + high) as f64) / total,
        }
    };
    let info = stats
        .h_source
        .iter()
        .flatten()
        .zip(stats.h_channel.iter().flatten())
        .filter(|(&s, &c)| s > 1.0 - delta && c < delta)
        .count();
    Ok(PolarizationFractions {
        source: fractions(&stats.h_source),
        channel: fractions(&stats.h_channel),
        info_rate: info as f64 / stats.block_len() as f64,
    })
}

/// A complete code: classification plus the design record that produced it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CodeConstruction {
    pub block_len: usize,
    pub levels: usize,
    pub sizes: SetSizes,
    pub classification: Classification,
    /// Target input distribution used for shaping priors.
    pub target: InputDistribution,
    /// Noise standard deviation of the channel-entropy estimate, if any.
    pub design_sigma: Option<f64>,
    pub crc: Option<CrcSpec>,
    /// Hash of the experiment configuration this code was built from.
    pub config_hash: Option<String>,
    pub stats: BitchannelStats,
}

impl CodeConstruction {
    pub fn class(&self, level: usize, i: usize) -> PositionClass {
        self.classification.classes[level][i]
    }

    pub fn payload_len(&self) -> usize {
        self.sizes.data - self.sizes.crc_len
    }

    /// Estimates the bitchannels for `target` and classifies the positions.
    #[allow(clippy::too_many_arguments)]
    pub fn build(
        c: &Constellation,
        target: InputDistribution,
        design_sigma: Option<f64>,
        block_len: usize,
        trials: usize,
        seed: u64,
        sizes: SetSizes,
        crc: Option<CrcSpec>,
    ) -> Result<Self> {
        if crc.map_or(0, |s| s.len()) != sizes.crc_len {
            return invalid("CRC width disagrees with the reserved CRC length");
        }
        let stats = estimate_bitchannels(c, &target, design_sigma, block_len, trials, seed)?;
        let classification = select_sets(&stats, sizes)?;
        Ok(Self {
            block_len,
            levels: c.bits(),
            sizes,
            classification,
            target,
            design_sigma,
            crc,
            config_hash: None,
            stats,
        })
    }

    pub fn validate(&self) -> Result<()> {
        let c = &self.classification;
        if c.classes.len() != self.levels || c.classes.iter().any(|r| r.len() != self.block_len) {
            return Err(Error::ConstructionMismatch("classification shape".into()));
        }
        if c.count(PositionClass::Data) != self.sizes.data || c.count(PositionClass::Dm) != self.sizes.dm {
            return Err(Error::ConstructionMismatch("class counts".into()));
        }
        if self.crc.map_or(0, |s| s.len()) != self.sizes.crc_len {
            return Err(Error::ConstructionMismatch("CRC length".into()));
        }
        if self.target.pmf().len() != 1 << self.levels {
            return Err(Error::ConstructionMismatch("target distribution size".into()));
        }
        Ok(())
    }
}
