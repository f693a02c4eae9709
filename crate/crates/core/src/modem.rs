//! Constellations, Maxwell-Boltzmann inputs, the AWGN channel and bitlevel
//! posteriors for multistage decoding.
//!
//! Labels use set partitioning on the sorted point list: the point index is
//! `Σ_ℓ b_ℓ 2^ℓ` with bitlevel 0 the least significant bit, so fixing the
//! lowest `k` bits leaves a subset with `2^k` times the minimum distance.
//!
//! SNR is `E[X²] / σ²` with the second moment taken under the pmf actually
//! transmitted.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::polar::{Llr, PosteriorPair, LLR_LIMIT};

/// Number of Gauss-Hermite nodes used for mutual information.
pub const QUADRATURE_NODES: usize = 128;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ConstellationKind {
    /// Bipolar `{±1, ±3, …, ±(M-1)}`.
    Ask,
    /// Unipolar `{0, 1, …, M-1}`.
    Pam,
}

impl std::str::FromStr for ConstellationKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ask" => Ok(Self::Ask),
            "pam" => Ok(Self::Pam),
            other => invalid(format!("unsupported constellation kind {other:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Constellation {
    kind: ConstellationKind,
    bits: usize,
    points: Vec<f64>,
}

pub fn make_constellation(kind: ConstellationKind, bits: usize) -> Result<Constellation> {
    if bits == 0 || bits > 8 {
        return invalid(format!("{bits} bits per symbol is outside 1..=8"));
    }
    let size = 1usize << bits;
    let points = match kind {
        ConstellationKind::Ask => (0..size).map(|i| 2.0 * i as f64 - (size as f64 - 1.0)).collect(),
        ConstellationKind::Pam => (0..size).map(|i| i as f64).collect(),
    };
    Ok(Constellation { kind, bits, points })
}

impl Constellation {
    pub fn kind(&self) -> ConstellationKind {
        self.kind
    }

    /// Bits per symbol `m`.
    pub fn bits(&self) -> usize {
        self.bits
    }

    pub fn size(&self) -> usize {
        self.points.len()
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn point(&self, index: usize) -> f64 {
        self.points[index]
    }

    /// Bit of `index` on bitlevel `level` (0-based).
    #[inline]
    pub fn label_bit(index: usize, level: usize) -> u8 {
        (index >> level & 1) as u8
    }

    pub fn label(&self, index: usize) -> Vec<u8> {
        (0..self.bits).map(|l| Self::label_bit(index, l)).collect()
    }

    pub fn index_of_label(&self, bits: &[u8]) -> Result<usize> {
        if bits.len() != self.bits {
            return Err(Error::LengthMismatch {
                expected: self.bits,
                actual: bits.len(),
            });
        }
        Ok(bits.iter().enumerate().map(|(l, &b)| ((b & 1) as usize) << l).sum())
    }

    pub fn min_distance(&self) -> f64 {
        self.points.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min)
    }
}

/// Probability mass over the points of a constellation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputDistribution {
    pmf: Vec<f64>,
    /// Shaping parameter when the pmf comes from an exponential family.
    nu: Option<f64>,
}

impl InputDistribution {
    pub fn new(pmf: Vec<f64>) -> Result<Self> {
        if pmf.is_empty() || pmf.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return invalid("pmf entries must lie in [0, 1]");
        }
        let total: f64 = pmf.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return invalid(format!("pmf sums to {total}"));
        }
        let pmf = pmf.iter().map(|p| p / total).collect();
        Ok(Self { pmf, nu: None })
    }

    pub fn uniform(size: usize) -> Self {
        Self {
            pmf: vec![1.0 / size as f64; size],
            nu: Some(0.0),
        }
    }

    /// Empirical distribution of symbol indices.
    pub fn from_counts(counts: &[u64]) -> Result<Self> {
        let total: u64 = counts.iter().sum();
        if total == 0 {
            return invalid("no symbols counted");
        }
        Self::new(counts.iter().map(|&c| c as f64 / total as f64).collect())
    }

    pub fn pmf(&self) -> &[f64] {
        &self.pmf
    }

    pub fn nu(&self) -> Option<f64> {
        self.nu
    }

    pub fn entropy_bits(&self) -> f64 {
        entropy_bits(&self.pmf)
    }

    pub fn energy(&self, c: &Constellation) -> f64 {
        self.pmf.iter().zip(c.points()).map(|(p, x)| p * x * x).sum()
    }

    pub fn total_variation(&self, other: &InputDistribution) -> f64 {
        0.5 * self.pmf.iter().zip(&other.pmf).map(|(a, b)| (a - b).abs()).sum::<f64>()
    }
}

pub fn entropy_bits(pmf: &[f64]) -> f64 {
    -pmf.iter().filter(|&&p| p > 0.0).map(|p| p * p.log2()).sum::<f64>()
}

/// Shape of the exponential family searched by the optimizers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ShapingFamily {
    /// `P(x) ∝ exp(-ν x²)`.
    MaxwellBoltzmann,
    /// Points `2i` and `2i+1` share the mass `∝ exp(-ν c_i²)` where `c_i` is
    /// the pair midpoint; the symmetric-pair input used with PAS on PAM.
    PairedMaxwellBoltzmann,
}

fn family_pmf(c: &Constellation, nu: f64, family: ShapingFamily) -> Vec<f64> {
    let energy: Vec<f64> = match family {
        ShapingFamily::MaxwellBoltzmann => c.points().iter().map(|x| x * x).collect(),
        ShapingFamily::PairedMaxwellBoltzmann => c
            .points()
            .chunks(2)
            .flat_map(|pair| {
                let mid = pair.iter().sum::<f64>() / pair.len() as f64;
                std::iter::repeat(mid * mid).take(pair.len())
            })
            .collect(),
    };
    let floor = energy.iter().copied().fold(f64::INFINITY, f64::min);
    let w: Vec<f64> = energy.iter().map(|e| (-nu * (e - floor)).exp()).collect();
    let total: f64 = w.iter().sum();
    w.into_iter().map(|v| v / total).collect()
}

/// Maxwell-Boltzmann pmf `∝ exp(-ν|x|²)` over the constellation points.
pub fn maxent_pmf(c: &Constellation, nu: f64) -> Result<InputDistribution> {
    family_input(c, nu, ShapingFamily::MaxwellBoltzmann)
}

pub fn family_input(c: &Constellation, nu: f64, family: ShapingFamily) -> Result<InputDistribution> {
    if !(nu >= 0.0) {
        return invalid(format!("shaping parameter {nu} must be non-negative"));
    }
    Ok(InputDistribution {
        pmf: family_pmf(c, nu, family),
        nu: Some(nu),
    })
}

/// Target selection for [`optimize_nu`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NuTarget {
    /// Bisection on ν until `H(P_X)` equals the rate (bits).
    Entropy(f64),
    /// ν maximizing `I(X;Y)` at the given SNR (dB).
    RateOptimal { snr_db: f64 },
}

pub fn optimize_nu(c: &Constellation, target: NuTarget) -> Result<InputDistribution> {
    match target {
        NuTarget::Entropy(rate) => entropy_matched(c, rate),
        NuTarget::RateOptimal { snr_db } => {
            rate_optimal(c, snr_db, ShapingFamily::MaxwellBoltzmann).map(|(d, _)| d)
        }
    }
}

/// Maxwell-Boltzmann input whose entropy equals `rate` bits within 1e-9.
pub fn entropy_matched(c: &Constellation, rate: f64) -> Result<InputDistribution> {
    let max = c.bits() as f64;
    if !(rate > 0.0 && rate <= max) {
        return invalid(format!("target rate {rate} outside (0, {max}]"));
    }
    let h = |nu: f64| entropy_bits(&family_pmf(c, nu, ShapingFamily::MaxwellBoltzmann));
    if rate >= max - 1e-12 {
        return maxent_pmf(c, 0.0);
    }
    let scale = c.points().iter().map(|x| x * x).fold(0.0, f64::max).max(1.0);
    let mut hi = 1.0 / scale;
    while h(hi) > rate {
        hi *= 2.0;
        if hi > 1e6 {
            return invalid(format!("entropy {rate} is below what the family can reach"));
        }
    }
    let mut lo = 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if h(mid) > rate {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-15 * hi.max(1e-300) {
            break;
        }
    }
    let nu = 0.5 * (lo + hi);
    let d = maxent_pmf(c, nu)?;
    debug_assert!((d.entropy_bits() - rate).abs() < 1e-6);
    Ok(d)
}

/// Member of `family` maximizing `I(X;Y)` at `snr_db`, found by a 200-point
/// log-spaced grid in ν followed by golden-section refinement. Returns the
/// distribution and its mutual information.
pub fn rate_optimal(
    c: &Constellation,
    snr_db: f64,
    family: ShapingFamily,
) -> Result<(InputDistribution, f64)> {
    if !snr_db.is_finite() {
        return invalid("SNR must be finite");
    }
    let quad = GaussHermite::new(QUADRATURE_NODES);
    let eval = |nu: f64| {
        let pmf = family_pmf(c, nu, family);
        mutual_information_at_snr(c, &pmf, snr_db, &quad)
    };
    let scale = c.points().iter().map(|x| x * x).fold(0.0, f64::max).max(1.0);
    let (lo_exp, hi_exp) = (-4.0f64, 2.0f64);
    let grid: Vec<f64> = std::iter::once(0.0)
        .chain((0..200).map(|k| 10f64.powf(lo_exp + (hi_exp - lo_exp) * k as f64 / 199.0) / scale))
        .collect();
    let values: Vec<f64> = grid.iter().map(|&nu| eval(nu)).collect();
    let best = values
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1).then(b.0.cmp(&a.0)))
        .map(|(i, _)| i)
        .expect("grid is non-empty");
    let a = grid[best.saturating_sub(1)];
    let b = grid[(best + 1).min(grid.len() - 1)];
    let (nu, mi) = golden_section_max(eval, a, b, 1e-10 / scale);
    let (nu, mi) = if mi >= values[best] { (nu, mi) } else { (grid[best], values[best]) };
    Ok((family_input(c, nu, family)?, mi))
}

fn golden_section_max(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> (f64, f64) {
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    for _ in 0..200 {
        if (b - a).abs() < tol {
            break;
        }
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d);
        }
    }
    if fc > fd {
        (c, fc)
    } else {
        (d, fd)
    }
}

/// Noise standard deviation giving `snr_db` for a signal of second moment `energy`.
pub fn sigma_for_snr(energy: f64, snr_db: f64) -> f64 {
    (energy / 10f64.powf(snr_db / 10.0)).sqrt()
}

/// `y = x + z` with `z ~ N(0, σ²)` i.i.d.
pub fn awgn_transmit<R: Rng + ?Sized>(symbols: &[f64], sigma: f64, rng: &mut R) -> Vec<f64> {
    assert!(sigma >= 0.0, "noise standard deviation must be non-negative");
    symbols
        .iter()
        .map(|&x| {
            let z: f64 = StandardNormal.sample(rng);
            x + sigma * z
        })
        .collect()
}

/// Gauss-Hermite rule for `∫ e^{-t²} f(t) dt`.
#[derive(Debug, Clone)]
pub struct GaussHermite {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussHermite {
    pub fn new(n: usize) -> Self {
        assert!(n >= 1);
        let mut x = vec![0.0; n];
        let mut w = vec![0.0; n];
        let pim4 = std::f64::consts::PI.powf(-0.25);
        let nf = n as f64;
        let mut z = 0.0f64;
        for i in 0..n.div_ceil(2) {
            z = match i {
                0 => (2.0 * nf + 1.0).sqrt() - 1.85575 * (2.0 * nf + 1.0).powf(-1.0 / 6.0),
                1 => z - 1.14 * nf.powf(0.426) / z,
                2 => 1.86 * z - 0.86 * x[0],
                3 => 1.91 * z - 0.91 * x[1],
                _ => 2.0 * z - x[i - 2],
            };
            let mut pp = 0.0;
            for _ in 0..200 {
                let mut p1 = pim4;
                let mut p2 = 0.0;
                for j in 0..n {
                    let p3 = p2;
                    p2 = p1;
                    let jf = j as f64;
                    p1 = z * (2.0 / (jf + 1.0)).sqrt() * p2 - (jf / (jf + 1.0)).sqrt() * p3;
                }
                pp = (2.0 * nf).sqrt() * p2;
                let z1 = z;
                z = z1 - p1 / pp;
                if (z - z1).abs() <= 1e-14 * z.abs().max(1.0) {
                    break;
                }
            }
            x[i] = z;
            x[n - 1 - i] = -z;
            w[i] = 2.0 / (pp * pp);
            w[n - 1 - i] = w[i];
        }
        Self { nodes: x, weights: w }
    }
}

#[inline]
fn log_sum_exp(values: impl Iterator<Item = f64>) -> f64 {
    let v: Vec<f64> = values.collect();
    let m = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + v.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// `I(X;Y)` in bits for the AWGN channel with noise standard deviation `sigma`.
pub fn mutual_information(c: &Constellation, pmf: &[f64], sigma: f64, quad: &GaussHermite) -> f64 {
    let two_var = 2.0 * sigma * sigma;
    let scale = std::f64::consts::SQRT_2 * sigma;
    let log_p: Vec<f64> = pmf.iter().map(|p| p.ln()).collect();
    let mut total = 0.0;
    for (j, &px) in pmf.iter().enumerate() {
        if px <= 0.0 {
            continue;
        }
        let x = c.point(j);
        let mut acc = 0.0;
        for (&t, &w) in quad.nodes.iter().zip(&quad.weights) {
            let y = x + scale * t;
            let log_py = log_sum_exp(
                c.points()
                    .iter()
                    .zip(&log_p)
                    .map(|(&xp, &lp)| lp - (y - xp).powi(2) / two_var),
            );
            acc += w * (-t * t - log_py);
        }
        total += px * acc / std::f64::consts::PI.sqrt();
    }
    (total / std::f64::consts::LN_2).max(0.0)
}

fn mutual_information_at_snr(c: &Constellation, pmf: &[f64], snr_db: f64, quad: &GaussHermite) -> f64 {
    let energy: f64 = pmf.iter().zip(c.points()).map(|(p, x)| p * x * x).sum();
    mutual_information(c, pmf, sigma_for_snr(energy, snr_db), quad)
}

/// Constellation-constrained capacity `I(X;Y)` (bits/channel use) at `snr_db`.
pub fn constellation_capacity(c: &Constellation, input: &InputDistribution, snr_db: f64) -> f64 {
    let quad = GaussHermite::new(QUADRATURE_NODES);
    mutual_information_at_snr(c, input.pmf(), snr_db, &quad)
}

/// Smallest SNR (dB) at which the nondecreasing function `mi` reaches `rate`,
/// by bisection to `tol_db`.
pub fn snr_threshold(mut mi: impl FnMut(f64) -> f64, rate: f64, tol_db: f64) -> Result<f64> {
    let (mut lo, mut hi) = (-10.0f64, 10.0f64);
    while mi(lo) >= rate {
        lo -= 10.0;
        if lo < -100.0 {
            return invalid(format!("rate {rate} reached at every SNR"));
        }
    }
    while mi(hi) < rate {
        hi += 10.0;
        if hi > 100.0 {
            return invalid(format!("rate {rate} not reachable"));
        }
    }
    while hi - lo > tol_db {
        let mid = 0.5 * (lo + hi);
        if mi(mid) >= rate {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Posteriors for one bitlevel of one symbol slot.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BitlevelPosterior {
    /// `P(X^ℓ = b | y, lower bits)`.
    pub channel: PosteriorPair,
    /// `P(X^ℓ = b | lower bits)`, without the observation.
    pub prior: PosteriorPair,
}

/// Bitlevel posterior for level `decided_lower_bits.len()` of one received sample.
pub fn bitlevel_posteriors(
    y: f64,
    c: &Constellation,
    input: &InputDistribution,
    decided_lower_bits: &[u8],
    sigma: f64,
) -> Result<BitlevelPosterior> {
    let model = SymbolModel::new(c, input)?;
    let level = decided_lower_bits.len();
    if level >= c.bits() {
        return invalid(format!("level {level} does not exist for m = {}", c.bits()));
    }
    let pattern = decided_lower_bits
        .iter()
        .enumerate()
        .map(|(l, &b)| ((b & 1) as usize) << l)
        .sum();
    let ll = model.log_likelihoods(y, sigma);
    let prior = model.prior_llr(level, pattern)?;
    let channel = model.channel_llr(&ll, level, pattern)?;
    Ok(BitlevelPosterior {
        channel: PosteriorPair::from_llr(channel),
        prior: PosteriorPair::from_llr(prior),
    })
}

/// Precomputed per-level quantities of a constellation and pmf.
#[derive(Debug, Clone)]
pub struct SymbolModel {
    points: Vec<f64>,
    log_pmf: Vec<f64>,
    bits: usize,
    /// `prior[level][pattern]`, `None` where the pattern has no mass.
    prior: Vec<Vec<Option<Llr>>>,
}

impl SymbolModel {
    pub fn new(c: &Constellation, input: &InputDistribution) -> Result<Self> {
        if input.pmf().len() != c.size() {
            return Err(Error::LengthMismatch {
                expected: c.size(),
                actual: input.pmf().len(),
            });
        }
        let log_pmf: Vec<f64> = input.pmf().iter().map(|p| p.ln()).collect();
        let bits = c.bits();
        let mut prior = Vec::with_capacity(bits);
        for level in 0..bits {
            let row = (0..1usize << level)
                .map(|pattern| split_llr(&log_pmf, bits, level, pattern, |_| 0.0))
                .collect();
            prior.push(row);
        }
        Ok(Self {
            points: c.points().to_vec(),
            log_pmf,
            bits,
            prior,
        })
    }

    pub fn bits(&self) -> usize {
        self.bits
    }

    /// `-(y - x_j)² / (2σ²)` for every point `j`.
    pub fn log_likelihoods(&self, y: f64, sigma: f64) -> Vec<f64> {
        let two_var = 2.0 * sigma * sigma;
        self.points
            .iter()
            .map(|&x| {
                let d = y - x;
                if two_var > 0.0 {
                    -d * d / two_var
                } else if d == 0.0 {
                    0.0
                } else {
                    f64::NEG_INFINITY
                }
            })
            .collect()
    }

    pub fn prior_llr(&self, level: usize, pattern: usize) -> Result<Llr> {
        self.prior[level][pattern].ok_or(Error::DegenerateConditioning { level, pattern })
    }

    pub fn channel_llr(&self, loglik: &[f64], level: usize, pattern: usize) -> Result<Llr> {
        split_llr(&self.log_pmf, self.bits, level, pattern, |j| loglik[j])
            .ok_or(Error::DegenerateConditioning { level, pattern })
    }

    /// Log-probability of point `j` under the pmf.
    pub fn log_pmf(&self, j: usize) -> f64 {
        self.log_pmf[j]
    }
}

/// `ln Σ_{S0} w − ln Σ_{S1} w` over the points matching `pattern` on the levels
/// below `level`, with `w_j = P(j) · exp(extra(j))`.
fn split_llr(
    log_pmf: &[f64],
    bits: usize,
    level: usize,
    pattern: usize,
    extra: impl Fn(usize) -> f64,
) -> Option<Llr> {
    let upper = 1usize << (bits - level - 1);
    let side = |b: usize| {
        log_sum_exp((0..upper).map(|h| {
            let j = pattern | (b << level) | (h << (level + 1));
            log_pmf[j] + extra(j)
        }))
    };
    let (l0, l1) = (side(0), side(1));
    match (l0.is_finite(), l1.is_finite()) {
        (true, true) => Some((l0 - l1).clamp(-LLR_LIMIT, LLR_LIMIT)),
        (true, false) => Some(LLR_LIMIT),
        (false, true) => Some(-LLR_LIMIT),
        (false, false) => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn ask8() -> Constellation {
        make_constellation(ConstellationKind::Ask, 3).unwrap()
    }

    #[test]
    fn constellation_points() {
        assert_eq!(ask8().points(), &[-7.0, -5.0, -3.0, -1.0, 1.0, 3.0, 5.0, 7.0]);
        let pam = make_constellation(ConstellationKind::Pam, 2).unwrap();
        assert_eq!(pam.points(), &[0.0, 1.0, 2.0, 3.0]);
        let bpsk = make_constellation(ConstellationKind::Ask, 1).unwrap();
        assert_eq!(bpsk.points(), &[-1.0, 1.0]);
        assert_eq!(bpsk.label(0), vec![0]);
        assert_eq!(bpsk.label(1), vec![1]);
        assert!("qam".parse::<ConstellationKind>().is_err());
        assert!(make_constellation(ConstellationKind::Ask, 0).is_err());
    }

    #[test]
    fn labelling_is_bijective() {
        for m in 1..=5 {
            let c = make_constellation(ConstellationKind::Ask, m).unwrap();
            for j in 0..c.size() {
                assert_eq!(c.index_of_label(&c.label(j)).unwrap(), j);
            }
        }
    }

    #[test]
    fn set_partitioning_doubles_distance() {
        for kind in [ConstellationKind::Ask, ConstellationKind::Pam] {
            let c = make_constellation(kind, 4).unwrap();
            let d = c.min_distance();
            for level in 1..c.bits() {
                for pattern in 0..1usize << level {
                    let subset: Vec<f64> = (0..c.size())
                        .filter(|j| j & ((1 << level) - 1) == pattern)
                        .map(|j| c.point(j))
                        .collect();
                    let dmin = subset.windows(2).map(|w| (w[1] - w[0]).abs()).fold(f64::INFINITY, f64::min);
                    assert_eq!(dmin, d * (1 << level) as f64);
                }
            }
        }
    }

    #[test]
    fn maxent_limits() {
        let c = ask8();
        let u = maxent_pmf(&c, 0.0).unwrap();
        assert!(u.pmf().iter().all(|p| (p - 0.125).abs() < 1e-15));
        let peaked = maxent_pmf(&c, 50.0).unwrap();
        assert!((peaked.pmf()[3] - 0.5).abs() < 1e-12 && (peaked.pmf()[4] - 0.5).abs() < 1e-12);
        // Direct normalization.
        let d = maxent_pmf(&c, 0.05).unwrap();
        let w: Vec<f64> = c.points().iter().map(|x| (-0.05 * x * x).exp()).collect();
        let z: f64 = w.iter().sum();
        for (p, wi) in d.pmf().iter().zip(&w) {
            assert!((p - wi / z).abs() < 1e-14);
        }
        assert!((d.pmf().iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(maxent_pmf(&c, -1.0).is_err());
    }

    #[test]
    fn entropy_matching() {
        let c4 = make_constellation(ConstellationKind::Ask, 2).unwrap();
        assert_eq!(entropy_matched(&c4, 2.0).unwrap().nu(), Some(0.0));
        let d8 = entropy_matched(&ask8(), 2.375).unwrap();
        assert!((d8.entropy_bits() - 2.375).abs() < 1e-6);
        let c16 = make_constellation(ConstellationKind::Ask, 4).unwrap();
        let d16 = entropy_matched(&c16, 3.25).unwrap();
        assert!((d16.entropy_bits() - 3.25).abs() < 1e-6);
        assert!(entropy_matched(&ask8(), 3.5).is_err());
        assert!(entropy_matched(&ask8(), 0.0).is_err());
    }

    #[test]
    fn gauss_hermite_moments() {
        let q = GaussHermite::new(QUADRATURE_NODES);
        let pi = std::f64::consts::PI;
        let m0: f64 = q.weights.iter().sum();
        let m2: f64 = q.weights.iter().zip(&q.nodes).map(|(w, t)| w * t * t).sum();
        let m4: f64 = q.weights.iter().zip(&q.nodes).map(|(w, t)| w * t.powi(4)).sum();
        assert!((m0 - pi.sqrt()).abs() < 1e-12);
        assert!((m2 - pi.sqrt() / 2.0).abs() < 1e-12);
        assert!((m4 - 3.0 * pi.sqrt() / 4.0).abs() < 1e-11);
    }

    #[test]
    fn capacity_limits_and_monotonicity() {
        let c = ask8();
        let u = InputDistribution::uniform(8);
        assert!(constellation_capacity(&c, &u, -60.0) < 1e-5);
        assert!((constellation_capacity(&c, &u, 60.0) - 3.0).abs() < 1e-4);
        let mut prev = 0.0;
        for s in (-10..=30).map(|s| s as f64) {
            let i = constellation_capacity(&c, &u, s);
            assert!(i >= prev - 1e-9);
            prev = i;
        }
    }

    #[test]
    fn bpsk_capacity_matches_integration() {
        // Trapezoidal integration on a fine grid as an independent route.
        let c = make_constellation(ConstellationKind::Ask, 1).unwrap();
        let u = InputDistribution::uniform(2);
        let sigma = 0.8f64;
        let snr = 10.0 * (1.0 / (sigma * sigma)).log10();
        let pdf = |y: f64, x: f64| (-(y - x).powi(2) / (2.0 * sigma * sigma)).exp() / (sigma * (2.0 * std::f64::consts::PI).sqrt());
        let step = 1e-4;
        let mut acc = 0.0;
        let mut y = -12.0;
        while y <= 12.0 {
            let py = 0.5 * (pdf(y, -1.0) + pdf(y, 1.0));
            for x in [-1.0, 1.0] {
                let p = pdf(y, x);
                if p > 0.0 {
                    acc += 0.5 * p * (p / py).log2() * step;
                }
            }
            y += step;
        }
        assert!((constellation_capacity(&c, &u, snr) - acc).abs() < 1e-4);
    }

    #[test]
    fn awgn_properties() {
        let xs = vec![1.0, -3.0, 5.0];
        let mut r = ChaCha8Rng::seed_from_u64(1);
        assert_eq!(awgn_transmit(&xs, 0.0, &mut r), xs);
        let a = awgn_transmit(&xs, 0.7, &mut ChaCha8Rng::seed_from_u64(9));
        let b = awgn_transmit(&xs, 0.7, &mut ChaCha8Rng::seed_from_u64(9));
        assert_eq!(a, b);
        let n = 1_000_000;
        let zeros = vec![0.0; n];
        let y = awgn_transmit(&zeros, 1.3, &mut ChaCha8Rng::seed_from_u64(5));
        let var = y.iter().map(|v| v * v).sum::<f64>() / n as f64;
        assert!((var / 1.69 - 1.0).abs() < 0.01);
    }

    #[test]
    fn posterior_edge_cases() {
        let bpsk = make_constellation(ConstellationKind::Ask, 1).unwrap();
        let u2 = InputDistribution::uniform(2);
        let p = bitlevel_posteriors(1e3, &bpsk, &u2, &[], 1.0).unwrap();
        assert!(p.channel.p1 > 1.0 - 1e-12);
        let c = ask8();
        let u8d = InputDistribution::uniform(8);
        // Top level of 8-ASK is the sign under set partitioning.
        for lower in [[0u8, 0], [1, 0], [0, 1], [1, 1]] {
            let p = bitlevel_posteriors(0.0, &c, &u8d, &lower, 1.3).unwrap();
            // Subsets {±x} pair symmetrically only when both signs are present.
            assert!((p.prior.p0 - 0.5).abs() < 1e-12);
            assert!(p.channel.p0 > 0.0);
        }
        let p = bitlevel_posteriors(0.0, &c, &u8d, &[], 2.0).unwrap();
        assert!((p.channel.p0 - 0.5).abs() < 1e-12);
        assert!(bitlevel_posteriors(0.0, &c, &u8d, &[0, 0, 0], 1.0).is_err());
    }

    #[test]
    fn pam_shaped_posterior_direct_sum() {
        let c = make_constellation(ConstellationKind::Pam, 2).unwrap();
        let d = maxent_pmf(&c, 0.3).unwrap();
        let (y, sigma) = (1.4, 0.6);
        // Level 1 given lower bit 1: points with index 1 (x=1) and 3 (x=3).
        let p = bitlevel_posteriors(y, &c, &d, &[1], sigma).unwrap();
        let g = |x: f64| (-(y - x) * (y - x) / (2.0 * sigma * sigma)).exp();
        let w0 = d.pmf()[1] * g(1.0);
        let w1 = d.pmf()[3] * g(3.0);
        assert!((p.channel.p0 - w0 / (w0 + w1)).abs() < 1e-12);
        assert!((p.prior.p0 - d.pmf()[1] / (d.pmf()[1] + d.pmf()[3])).abs() < 1e-12);
    }

    #[test]
    fn degenerate_conditioning_is_reported() {
        let c = make_constellation(ConstellationKind::Pam, 2).unwrap();
        let d = InputDistribution::new(vec![0.5, 0.0, 0.5, 0.0]).unwrap();
        assert!(matches!(
            bitlevel_posteriors(1.0, &c, &d, &[1], 1.0),
            Err(Error::DegenerateConditioning { level: 1, pattern: 1 })
        ));
    }

    #[test]
    fn posterior_chain_equals_symbol_posterior() {
        let c = ask8();
        let d = maxent_pmf(&c, 0.04).unwrap();
        let sigma = 1.1;
        for &y in &[-6.3, -0.2, 0.0, 2.7, 8.5] {
            let lik: Vec<f64> = c
                .points()
                .iter()
                .zip(d.pmf())
                .map(|(&x, p)| p * (-(y - x) * (y - x) / (2.0 * sigma * sigma)).exp())
                .collect();
            let z: f64 = lik.iter().sum();
            for j in 0..c.size() {
                let bits = c.label(j);
                let mut prod = 1.0;
                for level in 0..c.bits() {
                    let p = bitlevel_posteriors(y, &c, &d, &bits[..level], sigma).unwrap();
                    prod *= p.channel.prob(bits[level]);
                }
                assert!((prod - lik[j] / z).abs() < 1e-9);
            }
        }
    }
}
