//! MLHY encoder and multistage list receiver.
//!
//! The encoder walks the bitlevels in label order with the channel-free
//! shaping prior: data positions carry message bits, frozen positions carry
//! zero and shaping (DM) positions are chosen from the prior. The receiver
//! repeats the walk with the channel posterior, forking on data positions.

use rand::Rng;

use crate::construction::{CodeConstruction, PositionClass};
use crate::crc::CrcSpec;
use crate::error::{invalid, Error, Result};
use crate::modem::{entropy_bits, Constellation, SymbolModel};
use crate::polar::{
    hard_decision, BitView, Decision, LevelInputs, ListConfig, ListDecoder, ListOutput,
    MetricSource, PolarParams, RankedPath,
};

/// How the encoder resolves shaping positions.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EncodeMode {
    /// Most likely value under the prior.
    Deterministic,
    /// List search over shaping choices keeping `L` paths; the result is never
    /// less likely than the deterministic word.
    List(usize),
    /// Sample from the prior.
    Randomized,
}

/// How the receiver resolves shaping positions.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DmRule {
    /// Per-path most likely value under the prior; matches
    /// [`EncodeMode::Deterministic`].
    Argmax,
    /// Treat shaping positions as unknowns, as for list-encoded words.
    Fork,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Codeword {
    pub symbols: Vec<usize>,
    /// Codeword bit planes `x^ℓ`, one per level.
    pub x: Vec<Vec<u8>>,
    /// `u^ℓ = x^ℓ G_N`.
    pub u: Vec<Vec<u8>>,
    /// `ln P(x)` under the target distribution.
    pub log_prob: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Decoded {
    pub payload: Vec<u8>,
    /// `None` without a CRC.
    pub crc_passed: Option<bool>,
    pub x: Vec<Vec<u8>>,
    pub symbols: Vec<usize>,
}

/// Encoder and receiver for one construction and constellation.
#[derive(Debug, Clone)]
pub struct MlhyCode {
    construction: CodeConstruction,
    constellation: Constellation,
    model: SymbolModel,
    /// `ln P(x = j)` per symbol.
    log_pmf: Vec<f64>,
    data: Vec<(usize, usize)>,
}

impl MlhyCode {
    pub fn new(construction: CodeConstruction, constellation: Constellation) -> Result<Self> {
        construction.validate()?;
        if constellation.bits() != construction.levels {
            return Err(Error::ConstructionMismatch(format!(
                "construction has {} levels, constellation {}",
                construction.levels,
                constellation.bits()
            )));
        }
        let model = SymbolModel::new(&constellation, &construction.target)?;
        let log_pmf = construction.target.pmf().iter().map(|p| p.ln()).collect();
        let data = construction.classification.data_positions();
        Ok(Self {
            construction,
            constellation,
            model,
            log_pmf,
            data,
        })
    }

    pub fn construction(&self) -> &CodeConstruction {
        &self.construction
    }

    pub fn constellation(&self) -> &Constellation {
        &self.constellation
    }

    pub fn block_len(&self) -> usize {
        self.construction.block_len
    }

    pub fn payload_len(&self) -> usize {
        self.construction.payload_len()
    }

    fn crc(&self) -> Option<&CrcSpec> {
        self.construction.crc.as_ref()
    }

    fn decoder(&self, list_size: usize, metric: MetricSource) -> Result<ListDecoder> {
        ListDecoder::new(
            PolarParams::from_len(self.block_len())?,
            self.construction.levels,
            ListConfig { list_size, metric },
        )
    }

    fn prior_inputs(&self, level: usize, lower: &[&[u8]]) -> Result<LevelInputs> {
        let prior = (0..self.block_len())
            .map(|k| self.model.prior_llr(level, pattern(lower, k)))
            .collect::<Result<Vec<_>>>()?;
        Ok(LevelInputs {
            channel: None,
            prior: Some(prior),
        })
    }

    /// Data-position bits `[level][i]`: payload followed by its CRC.
    fn fixed_bits(&self, payload: &[u8]) -> Result<Vec<Vec<u8>>> {
        if payload.len() != self.payload_len() {
            return Err(Error::LengthMismatch {
                expected: self.payload_len(),
                actual: payload.len(),
            });
        }
        if payload.iter().any(|&b| b > 1) {
            return invalid("payload bits must be 0 or 1");
        }
        let mut framed = payload.to_vec();
        if let Some(spec) = self.crc() {
            framed.extend(spec.compute(payload));
        }
        let mut bits = vec![vec![0u8; self.block_len()]; self.construction.levels];
        for (&(l, i), &b) in self.data.iter().zip(&framed) {
            bits[l][i] = b;
        }
        Ok(bits)
    }

    fn codeword(&self, path: &RankedPath) -> Codeword {
        let symbols = symbols_of(&path.x);
        let log_prob = symbols.iter().map(|&j| self.log_pmf[j]).sum();
        Codeword {
            symbols,
            x: path.x.clone(),
            u: path.u.clone(),
            log_prob,
        }
    }

    /// Encodes `payload`. `rng` is required only by [`EncodeMode::Randomized`].
    pub fn encode<R: Rng + ?Sized>(
        &self,
        payload: &[u8],
        mode: EncodeMode,
        rng: Option<&mut R>,
    ) -> Result<Codeword> {
        let fixed = self.fixed_bits(payload)?;
        let cons = &self.construction;
        match mode {
            EncodeMode::Deterministic => {
                let mut policy = |v: &BitView| match cons.class(v.level, v.index) {
                    PositionClass::Data => Decision::Bit(fixed[v.level][v.index]),
                    PositionClass::Frozen => Decision::Bit(0),
                    PositionClass::Dm => Decision::Bit(hard_decision(v.llr(MetricSource::Prior))),
                };
                let out = self.decoder(1, MetricSource::Prior)?.run(|l, lo| self.prior_inputs(l, lo), &mut policy)?;
                Ok(self.codeword(&out.paths[0]))
            }
            EncodeMode::Randomized => {
                let Some(rng) = rng else {
                    return invalid("randomized encoding needs a random source");
                };
                let mut policy = |v: &BitView| match cons.class(v.level, v.index) {
                    PositionClass::Data => Decision::Bit(fixed[v.level][v.index]),
                    PositionClass::Frozen => Decision::Bit(0),
                    PositionClass::Dm => {
                        let p1 = 1.0 / (1.0 + v.llr(MetricSource::Prior).exp());
                        Decision::Bit(u8::from(rng.random::<f64>() < p1))
                    }
                };
                let out = self.decoder(1, MetricSource::Prior)?.run(|l, lo| self.prior_inputs(l, lo), &mut policy)?;
                Ok(self.codeword(&out.paths[0]))
            }
            EncodeMode::List(list_size) => {
                let mut policy = |v: &BitView| match cons.class(v.level, v.index) {
                    PositionClass::Data => Decision::Bit(fixed[v.level][v.index]),
                    PositionClass::Frozen => Decision::Bit(0),
                    PositionClass::Dm => Decision::Fork,
                };
                let out = self.decoder(list_size, MetricSource::Prior)?.run(|l, lo| self.prior_inputs(l, lo), &mut policy)?;
                let listed = self
                    .best_codeword(&out)
                    .expect("a list pass keeps at least one path");
                let greedy = self.encode::<R>(payload, EncodeMode::Deterministic, None)?;
                Ok(if greedy.log_prob > listed.log_prob { greedy } else { listed })
            }
        }
    }

    fn best_codeword(&self, out: &ListOutput) -> Option<Codeword> {
        out.paths
            .iter()
            .map(|p| self.codeword(p))
            .reduce(|a, b| if b.log_prob > a.log_prob { b } else { a })
    }

    /// Multistage list decoding of the received samples `y`.
    pub fn decode(&self, y: &[f64], sigma: f64, list_size: usize, dm_rule: DmRule) -> Result<Decoded> {
        if y.len() != self.block_len() {
            return Err(Error::LengthMismatch {
                expected: self.block_len(),
                actual: y.len(),
            });
        }
        let loglik: Vec<Vec<f64>> = y.iter().map(|&v| self.model.log_likelihoods(v, sigma)).collect();
        let source = |level: usize, lower: &[&[u8]]| -> Result<LevelInputs> {
            let mut channel = Vec::with_capacity(y.len());
            let mut prior = Vec::with_capacity(y.len());
            for (k, ll) in loglik.iter().enumerate() {
                let pat = pattern(lower, k);
                // A path whose lower levels contradict a noiseless observation
                // is already ruled out by its metric.
                channel.push(self.model.channel_llr(ll, level, pat).unwrap_or(0.0));
                prior.push(self.model.prior_llr(level, pat)?);
            }
            Ok(LevelInputs {
                channel: Some(channel),
                prior: Some(prior),
            })
        };
        let cons = &self.construction;
        let mut policy = |v: &BitView| match cons.class(v.level, v.index) {
            PositionClass::Data => Decision::Fork,
            PositionClass::Frozen => Decision::Bit(0),
            PositionClass::Dm => match dm_rule {
                DmRule::Argmax => Decision::Bit(hard_decision(v.llr(MetricSource::Prior))),
                DmRule::Fork => Decision::Fork,
            },
        };
        let out = self.decoder(list_size, MetricSource::Channel)?.run(source, &mut policy)?;
        let data_bits = |p: &RankedPath| -> Vec<u8> { self.data.iter().map(|&(l, i)| p.u[l][i]).collect() };
        let (pick, crc_passed) = match self.crc() {
            None => (0, None),
            Some(spec) => match out.paths.iter().position(|p| spec.check(&data_bits(p))) {
                Some(k) => (k, Some(true)),
                None => (0, Some(false)),
            },
        };
        let best = &out.paths[pick];
        let mut payload = data_bits(best);
        payload.truncate(self.payload_len());
        Ok(Decoded {
            payload,
            crc_passed,
            x: best.x.clone(),
            symbols: symbols_of(&best.x),
        })
    }
}

fn pattern(lower: &[&[u8]], k: usize) -> usize {
    lower.iter().enumerate().map(|(l, p)| usize::from(p[k]) << l).sum()
}

fn symbols_of(x: &[Vec<u8>]) -> Vec<usize> {
    let lower: Vec<&[u8]> = x.iter().map(Vec::as_slice).collect();
    (0..x.first().map_or(0, Vec::len)).map(|k| pattern(&lower, k)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateLoss {
    /// `H(P̂_X) − |U|/N` in bits per channel use.
    pub delta: f64,
    /// Entropy of the pooled empirical symbol distribution.
    pub empirical_entropy: f64,
    /// Set when the empirical entropy falls below the data rate.
    pub degenerate: bool,
}

/// Rate loss of a set of codewords carrying `data_positions` uniform bits each.
pub fn rate_loss(codewords: &[Codeword], data_positions: usize, alphabet: usize) -> Result<RateLoss> {
    let Some(first) = codewords.first() else {
        return invalid("rate loss needs at least one codeword");
    };
    let len = first.symbols.len();
    let mut counts = vec![0u64; alphabet];
    for cw in codewords {
        if cw.symbols.len() != len {
            return Err(Error::LengthMismatch {
                expected: len,
                actual: cw.symbols.len(),
            });
        }
        for &s in &cw.symbols {
            *counts.get_mut(s).ok_or_else(|| Error::InvalidArgument(format!("symbol {s} outside alphabet")))? += 1;
        }
    }
    let total: u64 = counts.iter().sum();
    let pmf: Vec<f64> = counts.iter().map(|&c| c as f64 / total as f64).collect();
    let h = entropy_bits(&pmf);
    let delta = h - data_positions as f64 / len as f64;
    Ok(RateLoss {
        delta,
        empirical_entropy: h,
        degenerate: delta < 0.0,
    })
}

/// Pooled empirical symbol distribution of `codewords`.
pub fn empirical_pmf(codewords: &[Codeword], alphabet: usize) -> Vec<f64> {
    let mut counts = vec![0u64; alphabet];
    for cw in codewords {
        for &s in &cw.symbols {
            counts[s] += 1;
        }
    }
    let total: u64 = counts.iter().sum::<u64>().max(1);
    counts.iter().map(|&c| c as f64 / total as f64).collect()
}
