//! Constant-composition distribution matching.
//!
//! Sequences of a fixed composition are enumerated in lexicographic order;
//! the matcher maps a `k`-bit integer to the sequence of that rank. This is
//! arithmetic coding with exact interval arithmetic, where each symbol splits
//! the current interval in proportion to the remaining counts.

use num_bigint::BigUint;
use num_traits::{One, Zero};

use crate::error::{invalid, Error, Result};
use crate::modem::entropy_bits;

/// Symbol counts summing to the block length.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Composition {
    pub counts: Vec<u64>,
}

impl Composition {
    pub fn len(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn pmf(&self) -> Vec<f64> {
        let n = self.len() as f64;
        self.counts.iter().map(|&c| c as f64 / n).collect()
    }
}

fn divergence_term(c: u64, target: f64) -> f64 {
    if c == 0 {
        0.0
    } else {
        c as f64 * (c as f64 / target).ln()
    }
}

/// `n`-type approximation of `pmf` minimizing `D(type ‖ pmf)`.
///
/// Counts start at `⌊n·p⌋`; each remaining slot goes to the symbol whose
/// increment raises `Σ c·ln(c / (n p))` least, ties to the lowest index.
pub fn quantize_distribution(pmf: &[f64], n: u64) -> Result<Composition> {
    if n == 0 {
        return invalid("block length must be positive");
    }
    if pmf.is_empty() || pmf.iter().any(|p| !(0.0..=1.0).contains(p)) {
        return invalid("pmf entries must lie in [0, 1]");
    }
    let total: f64 = pmf.iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        return invalid(format!("pmf sums to {total}"));
    }
    let targets: Vec<f64> = pmf.iter().map(|p| n as f64 * p).collect();
    let mut counts: Vec<u64> = targets.iter().map(|t| t.floor() as u64).collect();
    let mut assigned: u64 = counts.iter().sum();
    while assigned < n {
        let mut best: Option<(usize, f64)> = None;
        for (j, (&c, &t)) in counts.iter().zip(&targets).enumerate() {
            if t <= 0.0 {
                continue;
            }
            let gain = divergence_term(c + 1, t) - divergence_term(c, t);
            if best.is_none_or(|(_, g)| gain < g) {
                best = Some((j, gain));
            }
        }
        let (j, _) = best.expect("a positive pmf entry exists");
        counts[j] += 1;
        assigned += 1;
    }
    Ok(Composition { counts })
}

/// Number of distinct sequences with composition `counts`.
pub fn multinomial(counts: &[u64]) -> BigUint {
    let mut acc = BigUint::one();
    let mut placed = 0u64;
    for &c in counts {
        for t in 1..=c {
            placed += 1;
            acc *= placed;
            acc /= t;
        }
    }
    acc
}

/// Matcher for one composition, carrying `k = ⌊log2 multinomial⌋` input bits.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CcdmCode {
    composition: Composition,
    k: usize,
}

impl CcdmCode {
    pub fn new(composition: Composition) -> Result<Self> {
        if composition.is_empty() {
            return invalid("composition must have at least one symbol");
        }
        let k = (multinomial(&composition.counts).bits() - 1) as usize;
        Ok(Self { composition, k })
    }

    pub fn composition(&self) -> &Composition {
        &self.composition
    }

    pub fn input_bits(&self) -> usize {
        self.k
    }

    pub fn block_len(&self) -> usize {
        self.composition.len() as usize
    }

    /// Maps `bits` (most significant first) to the sequence of that rank.
    pub fn encode(&self, bits: &[u8]) -> Result<Vec<usize>> {
        if bits.len() != self.k {
            return Err(Error::LengthMismatch {
                expected: self.k,
                actual: bits.len(),
            });
        }
        let mut rank = BigUint::zero();
        for &b in bits {
            if b > 1 {
                return invalid("input bits must be 0 or 1");
            }
            rank <<= 1u32;
            if b == 1 {
                rank += 1u32;
            }
        }
        let mut counts = self.composition.counts.clone();
        let mut remaining = self.composition.len();
        let mut block = multinomial(&counts);
        let mut out = Vec::with_capacity(remaining as usize);
        while remaining > 0 {
            for (a, c) in counts.iter_mut().enumerate() {
                if *c == 0 {
                    continue;
                }
                let sub = &block * *c / remaining;
                if rank < sub {
                    out.push(a);
                    *c -= 1;
                    block = sub;
                    break;
                }
                rank -= &sub;
            }
            remaining -= 1;
        }
        Ok(out)
    }

    /// Inverse of [`CcdmCode::encode`]; fails on sequences of another
    /// composition or rank beyond `2^k`.
    pub fn decode(&self, symbols: &[usize]) -> Result<Vec<u8>> {
        if symbols.len() != self.block_len() {
            return Err(Error::LengthMismatch {
                expected: self.block_len(),
                actual: symbols.len(),
            });
        }
        let mut counts = self.composition.counts.clone();
        let mut remaining = self.composition.len();
        let mut block = multinomial(&counts);
        let mut rank = BigUint::zero();
        for &s in symbols {
            if s >= counts.len() || counts[s] == 0 {
                return invalid("sequence does not have the code composition");
            }
            for c in &counts[..s] {
                rank += &block * *c / remaining;
            }
            block = &block * counts[s] / remaining;
            counts[s] -= 1;
            remaining -= 1;
        }
        if rank.bits() > self.k as u64 {
            return invalid("sequence rank outside the message set");
        }
        Ok((0..self.k).rev().map(|j| u8::from(rank.bit(j as u64))).collect())
    }
}

/// `H(quantized pmf) − k/n` for the matcher built on `pmf` at length `n`.
pub fn ccdm_rate_loss(pmf: &[f64], n: u64) -> Result<f64> {
    let comp = quantize_distribution(pmf, n)?;
    let h = entropy_bits(&comp.pmf());
    let code = CcdmCode::new(comp)?;
    Ok(h - code.input_bits() as f64 / n as f64)
}
