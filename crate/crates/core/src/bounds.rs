//! Random-coding union bound for i.i.d. inputs on the AWGN channel.
//!
//! The bound is `E[min(1, (2^{NR} − 1) · Pr(i(X̄; Y) ≥ i(X; Y) | X, Y))]`. The
//! outer expectation is a Monte-Carlo average; the inner probability is
//! evaluated exactly for each draw by convolving the per-sample information
//! density distributions of `X̄` on an integer grid.
//!
//! Candidate atoms are rounded up to the grid, which only enlarges the event
//! `Σ a ≥ T`, so the inner probability is never underestimated. Partial sums
//! that cannot reach the threshold are discarded and those that cannot fall
//! below it are absorbed, so the live window never exceeds the slack
//! `Σ_k max_j ⌈a_kj⌉ − ⌈T⌉` in grid units.

use rayon::prelude::*;

use crate::error::{invalid, Error, Result};
use crate::modem::{awgn_transmit, Constellation, InputDistribution, SymbolModel};
use crate::rng::{cumulative, sample_index, stream_rng};

pub const DEFAULT_GRID_STEP: f64 = 0.01;
pub const DEFAULT_MAX_BINS: usize = 1 << 22;

const TRIALS_PER_CHUNK: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RcuParams {
    pub block_len: usize,
    /// Bits per channel use.
    pub rate: f64,
    pub outer_trials: usize,
    /// Grid resolution in bits.
    pub grid_step: f64,
    pub max_bins: usize,
    pub seed: u64,
    /// Sweep index mixed into the random streams.
    pub stream: u64,
}

impl RcuParams {
    pub fn new(block_len: usize, rate: f64, outer_trials: usize, seed: u64) -> Self {
        Self {
            block_len,
            rate,
            outer_trials,
            grid_step: DEFAULT_GRID_STEP,
            max_bins: DEFAULT_MAX_BINS,
            seed,
            stream: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RcuEstimate {
    pub bound: f64,
    pub std_err: f64,
    pub trials: usize,
}

/// Per-sample information densities `log2(p(y|x_j) / p(y))`, in bits, with
/// the input weights.
#[derive(Debug, Clone, PartialEq)]
pub struct InfoDensityGrid {
    pub atoms: Vec<f64>,
    pub weights: Vec<f64>,
}

impl InfoDensityGrid {
    /// Atoms for one received sample; inputs of zero probability are omitted.
    pub fn new(model: &SymbolModel, pmf: &[f64], y: f64, sigma: f64) -> Self {
        Self::with_input(model, pmf, y, sigma, 0).0
    }

    /// Atoms for `y` together with the density of the transmitted input `x`.
    pub fn with_input(model: &SymbolModel, pmf: &[f64], y: f64, sigma: f64, x: usize) -> (Self, f64) {
        let ll = model.log_likelihoods(y, sigma);
        let support: Vec<usize> = (0..pmf.len()).filter(|&j| pmf[j] > 0.0).collect();
        let peak = support.iter().map(|&j| ll[j]).fold(f64::NEG_INFINITY, f64::max);
        let log_py = peak + support.iter().map(|&j| pmf[j] * (ll[j] - peak).exp()).sum::<f64>().ln();
        let bits = |j: usize| (ll[j] - log_py) / std::f64::consts::LN_2;
        let grid = Self {
            atoms: support.iter().map(|&j| bits(j)).collect(),
            weights: support.iter().map(|&j| pmf[j]).collect(),
        };
        (grid, bits(x))
    }
}

/// `Pr(Σ_k A_k ≥ T)` for independent `A_k` over the rounded atoms of `grids`.
pub fn tail_probability(grids: &[InfoDensityGrid], threshold: f64, step: f64, max_bins: usize) -> Result<f64> {
    let rounded: Vec<Vec<i64>> = grids
        .iter()
        .map(|g| g.atoms.iter().map(|a| (a / step).ceil() as i64).collect())
        .collect();
    // Tolerance keeps float error in `threshold` from tightening the event.
    let t = (threshold / step - 1e-9).ceil() as i64;
    let n = grids.len();
    let mut rmax = vec![0i64; n + 1];
    let mut rmin = vec![0i64; n + 1];
    for k in (0..n).rev() {
        rmax[k] = rmax[k + 1] + rounded[k].iter().max().copied().unwrap_or(0);
        rmin[k] = rmin[k + 1] + rounded[k].iter().min().copied().unwrap_or(0);
    }
    if rmin[0] >= t {
        return Ok(1.0);
    }
    if rmax[0] < t {
        return Ok(0.0);
    }
    let slack = (rmax[0] - t + 1) as usize;
    if slack > max_bins {
        return Err(Error::GridOverflow {
            bins: slack,
            limit: max_bins,
        });
    }
    let mut saturated = 0.0;
    // Live partial sums occupy [lo, lo + mass.len()).
    let mut lo = 0i64;
    let mut mass = vec![1.0f64];
    let (mut smin, mut smax) = (0i64, 0i64);
    for k in 0..n {
        let atoms = &rounded[k];
        let w = &grids[k].weights;
        smin += atoms.iter().min().copied().unwrap_or(0);
        smax += atoms.iter().max().copied().unwrap_or(0);
        let new_lo = (t - rmax[k + 1]).max(smin);
        let new_hi = (t - rmin[k + 1]).min(smax + 1);
        let width = (new_hi - new_lo).max(0) as usize;
        let mut next = vec![0.0f64; width];
        for (off, &m) in mass.iter().enumerate() {
            if m == 0.0 {
                continue;
            }
            let s = lo + off as i64;
            for (&a, &p) in atoms.iter().zip(w) {
                let v = s + a;
                if v >= new_hi {
                    saturated += m * p;
                } else if v >= new_lo {
                    next[(v - new_lo) as usize] += m * p;
                }
            }
        }
        lo = new_lo;
        mass = next;
    }
    Ok(saturated.min(1.0))
}

/// `min(1, (2^{NR} − 1) · p)` without overflow.
fn union_term(n_r: f64, p: f64) -> f64 {
    if p <= 0.0 {
        return 0.0;
    }
    let log_count = if n_r > 50.0 { n_r } else { (n_r.exp2() - 1.0).max(0.0).log2() };
    (log_count + p.log2()).exp2().min(1.0)
}

/// Monte-Carlo estimate of the RCU bound for inputs drawn i.i.d. from `input`.
pub fn rcu_bound(c: &Constellation, input: &InputDistribution, sigma: f64, params: RcuParams) -> Result<RcuEstimate> {
    if params.outer_trials == 0 {
        return invalid("at least one outer trial is required");
    }
    if !(params.grid_step > 0.0) {
        return invalid("grid step must be positive");
    }
    if !(sigma > 0.0) {
        return invalid("noise standard deviation must be positive");
    }
    let model = SymbolModel::new(c, input)?;
    let pmf = input.pmf();
    let cdf = cumulative(pmf);
    let n_r = params.block_len as f64 * params.rate;
    let chunks = params.outer_trials.div_ceil(TRIALS_PER_CHUNK);
    let partials: Vec<Result<(f64, f64)>> = (0..chunks)
        .into_par_iter()
        .map(|chunk| {
            let mut rng = stream_rng(params.seed, params.stream, chunk as u64);
            let count = TRIALS_PER_CHUNK.min(params.outer_trials - chunk * TRIALS_PER_CHUNK);
            let (mut sum, mut sq) = (0.0, 0.0);
            for _ in 0..count {
                let xs: Vec<usize> = (0..params.block_len).map(|_| sample_index(&cdf, &mut rng)).collect();
                let points: Vec<f64> = xs.iter().map(|&j| c.point(j)).collect();
                let ys = awgn_transmit(&points, sigma, &mut rng);
                let mut threshold = 0.0;
                let grids: Vec<InfoDensityGrid> = xs
                    .iter()
                    .zip(&ys)
                    .map(|(&x, &y)| {
                        let (g, own) = InfoDensityGrid::with_input(&model, pmf, y, sigma, x);
                        threshold += own;
                        g
                    })
                    .collect();
                let p = tail_probability(&grids, threshold, params.grid_step, params.max_bins)?;
                let v = union_term(n_r, p);
                sum += v;
                sq += v * v;
            }
            Ok((sum, sq))
        })
        .collect();
    let (mut sum, mut sq) = (0.0, 0.0);
    for p in partials {
        let (s, q) = p?;
        sum += s;
        sq += q;
    }
    let t = params.outer_trials as f64;
    let mean = sum / t;
    let var = if params.outer_trials > 1 {
        ((sq - t * mean * mean) / (t - 1.0)).max(0.0)
    } else {
        0.0
    };
    Ok(RcuEstimate {
        bound: mean,
        std_err: (var / t).sqrt(),
        trials: params.outer_trials,
    })
}
