//! Binary polar transform and the successive-cancellation machinery shared by
//! the shaping encoder and the multistage receiver.
//!
//! Codes follow the `G_N = B_N F^{⊗n}` convention: `B_N` is the bit-reversal
//! permutation and `F = [[1, 0], [1, 1]]`. The transform is its own inverse.
//!
//! Soft values are log-likelihood ratios `ln(P(0) / P(1))` throughout.

mod list;
mod sc;

pub use list::{
    scl_pass, LevelInputs, ListConfig, ListDecoder, ListOutput, RankedPath, SclResult,
};
pub use sc::{sc_pass, ScOutput};

use crate::error::{invalid, Error, Result};

/// Log-likelihood ratio `ln(P(0) / P(1))`.
pub type Llr = f64;

/// Magnitude at which channel LLRs are clamped before entering the recursion.
pub const LLR_LIMIT: Llr = 1.0e6;

/// Block length `N = 2^n` of a binary polar code.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct PolarParams {
    n: u32,
}

impl PolarParams {
    pub fn from_exponent(n: u32) -> Result<Self> {
        if n > 24 {
            return invalid(format!("block length exponent {n} is too large"));
        }
        Ok(Self { n })
    }

    pub fn from_len(len: usize) -> Result<Self> {
        if len == 0 || !len.is_power_of_two() {
            return invalid(format!("block length {len} is not a power of two"));
        }
        Self::from_exponent(len.trailing_zeros())
    }

    pub fn exponent(&self) -> u32 {
        self.n
    }

    pub fn len(&self) -> usize {
        1 << self.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

/// Bit-reversal permutation on `2^n` indices: `perm[i]` is `i` with its `n`
/// low bits reversed. The permutation is an involution.
pub fn bit_reversal_permutation(n: u32) -> Vec<usize> {
    let len = 1usize << n;
    (0..len).map(|i| reverse_bits(i, n)).collect()
}

#[inline]
pub(crate) fn reverse_bits(i: usize, n: u32) -> usize {
    if n == 0 {
        0
    } else {
        i.reverse_bits() >> (usize::BITS - n)
    }
}

/// Computes `x = u G_N` over GF(2).
pub fn polar_transform(u: &[u8], params: PolarParams) -> Result<Vec<u8>> {
    if u.len() != params.len() {
        return Err(Error::LengthMismatch {
            expected: params.len(),
            actual: u.len(),
        });
    }
    Ok(transform_unchecked(u))
}

/// `polar_transform` for a slice whose length is known to be a power of two.
pub(crate) fn transform_unchecked(u: &[u8]) -> Vec<u8> {
    let len = u.len();
    debug_assert!(len.is_power_of_two());
    let n = len.trailing_zeros();
    let mut x: Vec<u8> = (0..len).map(|i| u[reverse_bits(i, n)] & 1).collect();
    let mut half = 1;
    while half < len {
        for block in x.chunks_mut(2 * half) {
            let (lo, hi) = block.split_at_mut(half);
            for (a, b) in lo.iter_mut().zip(hi.iter()) {
                *a ^= *b;
            }
        }
        half *= 2;
    }
    x
}

/// A normalized binary posterior `(P(0), P(1))`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PosteriorPair {
    pub p0: f64,
    pub p1: f64,
}

impl PosteriorPair {
    pub fn new(p0: f64, p1: f64) -> Result<Self> {
        let ok = (0.0..=1.0).contains(&p0) && (0.0..=1.0).contains(&p1);
        if !ok || (p0 + p1 - 1.0).abs() > 1e-9 {
            return invalid(format!("({p0}, {p1}) is not a binary distribution"));
        }
        Ok(Self { p0, p1 })
    }

    pub fn from_llr(llr: Llr) -> Self {
        let p0 = 1.0 / (1.0 + (-llr).exp());
        Self { p0, p1: 1.0 - p0 }
    }

    pub fn llr(&self) -> Llr {
        match (self.p0 > 0.0, self.p1 > 0.0) {
            (true, true) => (self.p0.ln() - self.p1.ln()).clamp(-LLR_LIMIT, LLR_LIMIT),
            (true, false) => LLR_LIMIT,
            (false, _) => -LLR_LIMIT,
        }
    }

    pub fn prob(&self, bit: u8) -> f64 {
        if bit == 0 {
            self.p0
        } else {
            self.p1
        }
    }
}

#[inline]
fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

/// `ln P(bit)` for a binary variable with the given LLR.
#[inline]
pub fn log_prob(llr: Llr, bit: u8) -> f64 {
    if bit == 0 {
        -softplus(-llr)
    } else {
        -softplus(llr)
    }
}

/// Binary entropy (bits) of a variable with the given LLR.
pub fn binary_entropy_of_llr(llr: Llr) -> f64 {
    let p0 = log_prob(llr, 0);
    let p1 = log_prob(llr, 1);
    -(p0.exp() * p0 + p1.exp() * p1) / std::f64::consts::LN_2
}

/// Exact check-node combination: the LLR of `a ⊕ b`.
#[inline]
pub fn boxplus(a: Llr, b: Llr) -> Llr {
    let sign = if (a < 0.0) != (b < 0.0) { -1.0 } else { 1.0 };
    sign * a.abs().min(b.abs()) + (-(a + b).abs()).exp().ln_1p() - (-(a - b).abs()).exp().ln_1p()
}

/// Variable-node combination given the partner bit `u`.
#[inline]
pub fn combine(a: Llr, b: Llr, u: u8) -> Llr {
    if u == 0 {
        b + a
    } else {
        b - a
    }
}

/// Hard decision on an LLR; ties resolve to 0.
#[inline]
pub fn hard_decision(llr: Llr) -> u8 {
    u8::from(llr < 0.0)
}

/// Which soft stream a bit sees when the decision is made.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MetricSource {
    /// Posterior including the channel observation.
    Channel,
    /// Channel-free shaping prior.
    Prior,
}

/// Soft information available for one bit `u_i` of one level.
#[derive(Debug, Clone, Copy)]
pub struct BitView {
    pub level: usize,
    pub index: usize,
    /// `ln P(U_i = 0 | past, y) / P(U_i = 1 | past, y)` when a channel stream is present.
    pub channel: Option<Llr>,
    /// `ln P(U_i = 0 | past) / P(U_i = 1 | past)` when a prior stream is present.
    pub prior: Option<Llr>,
}

impl BitView {
    pub fn llr(&self, source: MetricSource) -> Llr {
        let v = match source {
            MetricSource::Channel => self.channel,
            MetricSource::Prior => self.prior,
        };
        v.expect("metric stream missing from bit view")
    }
}

/// Outcome of a per-bit decision.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Decision {
    /// Fix the bit.
    Bit(u8),
    /// Keep both values. Under plain SC this resolves to the hard decision on
    /// the metric stream.
    Fork,
}

/// Per-bit decision rule driving an SC or SCL pass.
pub trait DecisionPolicy {
    fn decide(&mut self, bit: &BitView) -> Decision;
}

impl<F: FnMut(&BitView) -> Decision> DecisionPolicy for F {
    fn decide(&mut self, bit: &BitView) -> Decision {
        self(bit)
    }
}

/// Freezes every bit to zero.
pub struct AllFrozen;

impl DecisionPolicy for AllFrozen {
    fn decide(&mut self, _bit: &BitView) -> Decision {
        Decision::Bit(0)
    }
}

/// Forks on positions flagged in `free`, freezes the rest to zero.
pub struct FrozenMask<'a> {
    pub free: &'a [bool],
}

impl DecisionPolicy for FrozenMask<'_> {
    fn decide(&mut self, bit: &BitView) -> Decision {
        if self.free[bit.index] {
            Decision::Fork
        } else {
            Decision::Bit(0)
        }
    }
}

pub(crate) fn check_bit(d: Decision) -> Decision {
    if let Decision::Bit(b) = d {
        assert!(b <= 1, "decision policy returned non-binary value {b}");
    }
    d
}

pub(crate) fn clamp_llrs(v: &[Llr]) -> Vec<Llr> {
    v.iter()
        .map(|&l| {
            assert!(!l.is_nan(), "NaN channel LLR");
            l.clamp(-LLR_LIMIT, LLR_LIMIT)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Explicit `B_N F^{⊗n}` as a dense GF(2) matrix.
    fn generator_oracle(n: u32) -> Vec<Vec<u8>> {
        let mut f = vec![vec![1u8]];
        for _ in 0..n {
            let s = f.len();
            let mut g = vec![vec![0u8; 2 * s]; 2 * s];
            for r in 0..s {
                for c in 0..s {
                    g[r][c] = f[r][c];
                    g[r + s][c] = f[r][c];
                    g[r + s][c + s] = f[r][c];
                }
            }
            f = g;
        }
        let len = f.len();
        // B_N permutes rows.
        let mut rev = vec![0usize; len];
        for (i, r) in rev.iter_mut().enumerate() {
            let mut v = 0;
            for b in 0..n {
                if i >> b & 1 == 1 {
                    v |= 1 << (n - 1 - b);
                }
            }
            *r = v;
        }
        (0..len).map(|i| f[rev[i]].clone()).collect()
    }

    fn mul_oracle(u: &[u8], g: &[Vec<u8>]) -> Vec<u8> {
        let len = u.len();
        (0..len)
            .map(|c| (0..len).fold(0u8, |acc, r| acc ^ (u[r] & g[r][c])))
            .collect()
    }

    #[test]
    fn bit_reversal_small_cases() {
        assert_eq!(bit_reversal_permutation(0), vec![0]);
        assert_eq!(bit_reversal_permutation(2), vec![0, 2, 1, 3]);
        assert_eq!(bit_reversal_permutation(3), vec![0, 4, 2, 6, 1, 5, 3, 7]);
    }

    #[test]
    fn transform_examples() {
        let p2 = PolarParams::from_len(2).unwrap();
        assert_eq!(polar_transform(&[1, 1], p2).unwrap(), vec![0, 1]);
        for n in 0..6 {
            let p = PolarParams::from_exponent(n).unwrap();
            assert!(polar_transform(&vec![0; p.len()], p)
                .unwrap()
                .iter()
                .all(|&b| b == 0));
        }
        assert!(matches!(
            polar_transform(&[0, 1, 1], PolarParams::from_len(4).unwrap()),
            Err(Error::LengthMismatch { .. })
        ));
        assert!(PolarParams::from_len(12).is_err());
    }

    #[test]
    fn transform_matches_dense_generator() {
        for n in 0..=4 {
            let g = generator_oracle(n);
            let p = PolarParams::from_exponent(n).unwrap();
            for w in 0..(1usize << p.len()).min(1 << 12) {
                let u: Vec<u8> = (0..p.len()).map(|i| (w >> i & 1) as u8).collect();
                assert_eq!(polar_transform(&u, p).unwrap(), mul_oracle(&u, &g));
            }
        }
    }

    #[test]
    fn dense_generator_is_involution_n8() {
        let g = generator_oracle(3);
        let u = [1, 0, 1, 1, 0, 0, 1, 0];
        let x = mul_oracle(&u, &g);
        assert_eq!(mul_oracle(&x, &g), u.to_vec());
        let p = PolarParams::from_len(8).unwrap();
        assert_eq!(polar_transform(&polar_transform(&u, p).unwrap(), p).unwrap(), u);
    }

    #[test]
    fn posterior_pair_roundtrip() {
        let p = PosteriorPair::new(0.9, 0.1).unwrap();
        let q = PosteriorPair::from_llr(p.llr());
        assert!((q.p0 - 0.9).abs() < 1e-12);
        assert!(PosteriorPair::new(0.6, 0.6).is_err());
        assert_eq!(PosteriorPair::new(1.0, 0.0).unwrap().llr(), LLR_LIMIT);
    }

    #[test]
    fn boxplus_is_exact() {
        for &(a, b) in &[(0.3, -1.7), (5.0, 4.0), (-20.0, 0.01), (0.0, 3.0)] {
            let pa = PosteriorPair::from_llr(a);
            let pb = PosteriorPair::from_llr(b);
            let p0 = pa.p0 * pb.p0 + pa.p1 * pb.p1;
            let p1 = pa.p0 * pb.p1 + pa.p1 * pb.p0;
            assert!((boxplus(a, b) - (p0 / p1).ln()).abs() < 1e-10);
        }
        assert!((binary_entropy_of_llr(0.0) - 1.0).abs() < 1e-12);
        assert!(binary_entropy_of_llr(40.0) < 1e-12);
    }

    proptest! {
        #[test]
        fn transform_is_involution(n in 0u32..=10, seed in any::<u64>()) {
            let p = PolarParams::from_exponent(n).unwrap();
            let mut s = seed | 1;
            let u: Vec<u8> = (0..p.len()).map(|_| { s ^= s << 13; s ^= s >> 7; s ^= s << 17; (s & 1) as u8 }).collect();
            let x = polar_transform(&u, p).unwrap();
            prop_assert_eq!(polar_transform(&x, p).unwrap(), u);
        }

        #[test]
        fn bit_reversal_is_self_inverse(n in 0u32..=12) {
            let perm = bit_reversal_permutation(n);
            for (i, &j) in perm.iter().enumerate() {
                prop_assert_eq!(perm[j], i);
            }
        }
    }
}
