//! Successive-cancellation list engine over one or more chained levels.
//!
//! Each path owns per-layer LLR and partial-sum arrays behind `Rc`, so a fork
//! costs a handful of pointer copies and an array is duplicated only when a
//! shared layer is about to be overwritten.

use std::rc::Rc;

use super::{
    boxplus, check_bit, clamp_llrs, combine, log_prob, transform_unchecked, BitView, Decision,
    DecisionPolicy, Llr, MetricSource, PolarParams,
};
use crate::crc::CrcSpec;
use crate::error::{invalid, Error, Result};

/// Soft inputs for one level of one path.
#[derive(Debug, Clone, Default)]
pub struct LevelInputs {
    pub channel: Option<Vec<Llr>>,
    pub prior: Option<Vec<Llr>>,
}

#[derive(Debug, Clone, Copy)]
pub struct ListConfig {
    pub list_size: usize,
    pub metric: MetricSource,
}

/// A surviving path at the end of a list pass.
#[derive(Debug, Clone)]
pub struct RankedPath {
    /// Codeword bit planes, one per level.
    pub x: Vec<Vec<u8>>,
    /// Input bit planes `u = x G_N`, one per level.
    pub u: Vec<Vec<u8>>,
    pub metric: f64,
}

#[derive(Debug, Clone)]
pub struct ListOutput {
    /// Paths ordered by decreasing metric; ties keep the lower path index first.
    pub paths: Vec<RankedPath>,
    /// `(level, index)` of every position at which some path forked.
    pub fork_positions: Vec<(usize, usize)>,
}

#[derive(Clone)]
struct Tree {
    llr: Vec<Rc<Vec<Llr>>>,
}

impl Tree {
    fn new(input: Vec<Llr>, n: u32) -> Self {
        let mut llr = Vec::with_capacity(n as usize + 1);
        llr.push(Rc::new(input));
        for lambda in 1..=n {
            llr.push(Rc::new(vec![0.0; 1 << (n - lambda)]));
        }
        Self { llr }
    }

    fn calc(&mut self, bits: &[Rc<Vec<[u8; 2]>>], lambda: usize, phi: usize) {
        if lambda == 0 {
            return;
        }
        if phi % 2 == 0 {
            self.calc(bits, lambda - 1, phi >> 1);
        }
        let (lo, hi) = self.llr.split_at_mut(lambda);
        let src = &lo[lambda - 1];
        let dst = Rc::make_mut(&mut hi[0]);
        if phi % 2 == 0 {
            for (beta, d) in dst.iter_mut().enumerate() {
                *d = boxplus(src[2 * beta], src[2 * beta + 1]);
            }
        } else {
            let c = &bits[lambda];
            for (beta, d) in dst.iter_mut().enumerate() {
                *d = combine(src[2 * beta], src[2 * beta + 1], c[beta][0]);
            }
        }
    }

    fn leaf(&self) -> Llr {
        self.llr.last().expect("tree has layers")[0]
    }
}

#[derive(Clone)]
struct Path {
    channel: Option<Tree>,
    prior: Option<Tree>,
    bits: Vec<Rc<Vec<[u8; 2]>>>,
    metric: f64,
    planes: Vec<Rc<Vec<u8>>>,
}

fn update_bits(bits: &mut [Rc<Vec<[u8; 2]>>], lambda: usize, phi: usize) {
    let psi = phi >> 1;
    let (lo, hi) = bits.split_at_mut(lambda);
    let src = &hi[0];
    let dst = Rc::make_mut(&mut lo[lambda - 1]);
    for (beta, c) in src.iter().enumerate() {
        dst[2 * beta][psi & 1] = c[0] ^ c[1];
        dst[2 * beta + 1][psi & 1] = c[1];
    }
    if psi % 2 == 1 {
        update_bits(bits, lambda - 1, psi);
    }
}

/// List decoder / shaping searcher over `levels` chained polar codes of a
/// common length. Levels are processed in order; the inputs of a level are
/// requested per path from the codeword planes that path chose at lower levels.
#[derive(Debug, Clone, Copy)]
pub struct ListDecoder {
    params: PolarParams,
    levels: usize,
    config: ListConfig,
}

impl ListDecoder {
    pub fn new(params: PolarParams, levels: usize, config: ListConfig) -> Result<Self> {
        if config.list_size == 0 {
            return invalid("list size must be at least 1");
        }
        if levels == 0 {
            return invalid("at least one level is required");
        }
        Ok(Self {
            params,
            levels,
            config,
        })
    }

    pub fn run<S, P>(&self, mut source: S, policy: &mut P) -> Result<ListOutput>
    where
        S: FnMut(usize, &[&[u8]]) -> Result<LevelInputs>,
        P: DecisionPolicy + ?Sized,
    {
        let n = self.params.exponent();
        let len = self.params.len();
        let nl = n as usize;
        let max_paths = self.config.list_size;
        let metric_src = self.config.metric;

        let mut paths = vec![Path {
            channel: None,
            prior: None,
            bits: Vec::new(),
            metric: 0.0,
            planes: Vec::new(),
        }];
        let mut fork_positions = Vec::new();

        for level in 0..self.levels {
            for path in paths.iter_mut() {
                let lower: Vec<&[u8]> = path.planes.iter().map(|p| p.as_slice()).collect();
                let inputs = source(level, &lower)?;
                let build = |v: Option<Vec<Llr>>| -> Result<Option<Tree>> {
                    v.map(|v| {
                        if v.len() != len {
                            return Err(Error::LengthMismatch {
                                expected: len,
                                actual: v.len(),
                            });
                        }
                        Ok(Tree::new(clamp_llrs(&v), n))
                    })
                    .transpose()
                };
                path.channel = build(inputs.channel)?;
                path.prior = build(inputs.prior)?;
                let present = match metric_src {
                    MetricSource::Channel => path.channel.is_some(),
                    MetricSource::Prior => path.prior.is_some(),
                };
                if !present {
                    return invalid(format!("metric stream {metric_src:?} not supplied"));
                }
                path.bits = (0..=n).map(|l| Rc::new(vec![[0u8; 2]; 1 << (n - l)])).collect();
            }

            for phi in 0..len {
                let mut candidates: Vec<(usize, u8, f64)> = Vec::with_capacity(2 * paths.len());
                let mut forked = false;
                for (p, path) in paths.iter_mut().enumerate() {
                    if let Some(t) = path.channel.as_mut() {
                        t.calc(&path.bits, nl, phi);
                    }
                    if let Some(t) = path.prior.as_mut() {
                        t.calc(&path.bits, nl, phi);
                    }
                    let view = BitView {
                        level,
                        index: phi,
                        channel: path.channel.as_ref().map(Tree::leaf),
                        prior: path.prior.as_ref().map(Tree::leaf),
                    };
                    let llr = view.llr(metric_src);
                    match check_bit(policy.decide(&view)) {
                        Decision::Bit(b) => candidates.push((p, b, path.metric + log_prob(llr, b))),
                        Decision::Fork => {
                            forked = true;
                            candidates.push((p, 0, path.metric + log_prob(llr, 0)));
                            candidates.push((p, 1, path.metric + log_prob(llr, 1)));
                        }
                    }
                }
                if forked {
                    fork_positions.push((level, phi));
                }
                if candidates.len() > max_paths {
                    let mut order: Vec<usize> = (0..candidates.len()).collect();
                    order.sort_by(|&a, &b| {
                        candidates[b].2.total_cmp(&candidates[a].2).then(a.cmp(&b))
                    });
                    order.truncate(max_paths);
                    order.sort_unstable();
                    candidates = order.into_iter().map(|i| candidates[i]).collect();
                }

                let mut remaining = vec![0usize; paths.len()];
                for c in &candidates {
                    remaining[c.0] += 1;
                }
                let mut old: Vec<Option<Path>> = paths.drain(..).map(Some).collect();
                for (parent, bit, metric) in candidates {
                    remaining[parent] -= 1;
                    let mut path = if remaining[parent] == 0 {
                        old[parent].take().expect("parent consumed once")
                    } else {
                        old[parent].as_ref().expect("parent alive").clone()
                    };
                    path.metric = metric;
                    Rc::make_mut(&mut path.bits[nl])[0][phi & 1] = bit;
                    if phi % 2 == 1 {
                        update_bits(&mut path.bits, nl, phi);
                    }
                    paths.push(path);
                }
            }

            for path in paths.iter_mut() {
                let x: Vec<u8> = if nl == 0 {
                    vec![path.bits[0][0][0]]
                } else {
                    path.bits[0].iter().map(|c| c[0]).collect()
                };
                path.planes.push(Rc::new(x));
                path.channel = None;
                path.prior = None;
            }
        }

        let mut order: Vec<usize> = (0..paths.len()).collect();
        order.sort_by(|&a, &b| paths[b].metric.total_cmp(&paths[a].metric).then(a.cmp(&b)));
        let ranked = order
            .into_iter()
            .map(|i| {
                let p = &paths[i];
                let x: Vec<Vec<u8>> = p.planes.iter().map(|v| v.as_ref().clone()).collect();
                let u = x.iter().map(|xl| transform_unchecked(xl)).collect();
                RankedPath {
                    x,
                    u,
                    metric: p.metric,
                }
            })
            .collect();
        Ok(ListOutput {
            paths: ranked,
            fork_positions,
        })
    }
}

/// Outcome of a single-level list pass.
#[derive(Debug, Clone)]
pub struct SclResult {
    pub best: RankedPath,
    /// `None` without a CRC; otherwise whether `best` satisfies it.
    pub crc_passed: Option<bool>,
    pub list: Vec<RankedPath>,
}

/// Single-level successive-cancellation list pass.
///
/// With a CRC, the bits at fork positions (in order) are read as payload
/// followed by the CRC; the best-metric path passing the check wins, and the
/// best-metric path is returned with a failure flag when none passes.
pub fn scl_pass<P: DecisionPolicy + ?Sized>(
    channel: Option<&[Llr]>,
    prior: Option<&[Llr]>,
    policy: &mut P,
    config: ListConfig,
    crc: Option<&CrcSpec>,
) -> Result<SclResult> {
    let len = channel.or(prior).map(|v| v.len()).unwrap_or(0);
    let params = PolarParams::from_len(len)?;
    let decoder = ListDecoder::new(params, 1, config)?;
    let inputs = LevelInputs {
        channel: channel.map(|v| v.to_vec()),
        prior: prior.map(|v| v.to_vec()),
    };
    let out = decoder.run(|_, _| Ok(inputs.clone()), policy)?;
    let pick = |paths: &[RankedPath]| -> Option<usize> {
        let spec = crc?;
        paths.iter().position(|p| {
            let bits: Vec<u8> = out.fork_positions.iter().map(|&(_, i)| p.u[0][i]).collect();
            spec.check(&bits)
        })
    };
    let (best, crc_passed) = match (crc, pick(&out.paths)) {
        (None, _) => (0, None),
        (Some(_), Some(i)) => (i, Some(true)),
        (Some(_), None) => (0, Some(false)),
    };
    Ok(SclResult {
        best: out.paths[best].clone(),
        crc_passed,
        list: out.paths,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::polar::{polar_transform, sc_pass, FrozenMask, PosteriorPair};

    fn lcg(seed: &mut u64) -> f64 {
        *seed = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        (*seed >> 11) as f64 / (1u64 << 53) as f64
    }

    fn random_llrs(len: usize, seed: &mut u64, scale: f64) -> Vec<Llr> {
        (0..len).map(|_| (lcg(seed) - 0.5) * scale).collect()
    }

    fn fork_all(_: &BitView) -> Decision {
        Decision::Fork
    }

    #[test]
    fn list_of_one_equals_sc() {
        let mut seed = 11;
        for len in [2usize, 8, 64, 256] {
            let ch = random_llrs(len, &mut seed, 8.0);
            let pr = random_llrs(len, &mut seed, 3.0);
            let free: Vec<bool> = (0..len).map(|_| lcg(&mut seed) < 0.6).collect();
            let sc = sc_pass(
                Some(&ch),
                Some(&pr),
                &mut FrozenMask { free: &free },
                MetricSource::Channel,
                0,
            )
            .unwrap();
            let cfg = ListConfig {
                list_size: 1,
                metric: MetricSource::Channel,
            };
            let scl = scl_pass(Some(&ch), Some(&pr), &mut FrozenMask { free: &free }, cfg, None)
                .unwrap();
            assert_eq!(scl.best.u[0], sc.u);
            assert_eq!(scl.best.x[0], sc.x);
            assert_eq!(scl.best.metric, sc.log_prob);
        }
    }

    #[test]
    fn full_list_finds_ml_word() {
        let mut seed = 3;
        let p = PolarParams::from_len(4).unwrap();
        for _ in 0..20 {
            let ch = random_llrs(4, &mut seed, 6.0);
            let cfg = ListConfig {
                list_size: 16,
                metric: MetricSource::Channel,
            };
            let out = scl_pass(Some(&ch), None, &mut fork_all, cfg, None).unwrap();
            let mut best = (f64::NEG_INFINITY, vec![]);
            for w in 0..16usize {
                let u: Vec<u8> = (0..4).map(|k| (w >> k & 1) as u8).collect();
                let x = polar_transform(&u, p).unwrap();
                let ll: f64 = x
                    .iter()
                    .zip(&ch)
                    .map(|(&b, &l)| PosteriorPair::from_llr(l).prob(b).ln())
                    .sum();
                if ll > best.0 {
                    best = (ll, u);
                }
            }
            assert_eq!(out.best.u[0], best.1);
            assert!((out.best.metric - best.0).abs() < 1e-9);
            assert_eq!(out.list.len(), 16);
        }
    }

    #[test]
    fn doubling_the_list_rarely_loses_metric() {
        // Pruning acts on partial metrics, so a larger list can end on a worse
        // path; this is rare and the exhaustive list is always optimal.
        let mut seed = 99;
        let (mut checks, mut losses) = (0, 0);
        let mut sums = [0.0f64; 6];
        for _ in 0..200 {
            let ch = random_llrs(32, &mut seed, 4.0);
            let free: Vec<bool> = (0..32).map(|i| i >= 20 || lcg(&mut seed) < 0.3).collect();
            let best = |l: usize| {
                let cfg = ListConfig {
                    list_size: l,
                    metric: MetricSource::Channel,
                };
                scl_pass(Some(&ch), None, &mut FrozenMask { free: &free }, cfg, None)
                    .unwrap()
                    .best
                    .metric
            };
            let metrics: Vec<f64> = [1usize, 2, 4, 8, 16, 32].iter().map(|&l| best(l)).collect();
            for (s, m) in sums.iter_mut().zip(&metrics) {
                *s += m;
            }
            for w in metrics.windows(2) {
                checks += 1;
                losses += usize::from(w[1] < w[0] - 1e-12);
            }
            let free_count = free.iter().filter(|&&f| f).count();
            let full = best(1 << free_count.min(12));
            if free_count <= 12 {
                assert!(metrics.iter().all(|&m| full >= m - 1e-12));
            }
        }
        assert!(losses * 10 < checks, "{losses} of {checks} doublings lost metric");
        assert!(sums.windows(2).all(|w| w[1] >= w[0]), "{sums:?}");
    }

    #[test]
    fn crc_failure_falls_back_to_best_path() {
        let ch = [5.0, -4.0, 3.0, 2.0, -1.0, 6.0, 0.5, -0.5];
        let spec = CrcSpec::new(4, 0b0011).unwrap();
        // Only four free bits: all of them are CRC bits over an empty payload, so
        // just the all-zero word passes.
        let free = [false, false, false, false, true, true, true, true];
        let cfg = ListConfig {
            list_size: 2,
            metric: MetricSource::Channel,
        };
        let out = scl_pass(Some(&ch), None, &mut FrozenMask { free: &free }, cfg, Some(&spec))
            .unwrap();
        let zero_alive = out.list.iter().any(|p| p.u[0].iter().all(|&b| b == 0));
        assert_eq!(out.crc_passed, Some(zero_alive));
        if !zero_alive {
            assert_eq!(out.best.metric, out.list[0].metric);
        }
    }

    #[test]
    fn crc_picks_passing_path() {
        // Payload of 2 bits followed by a 2-bit CRC (x^2 + x + 1).
        let spec = CrcSpec::new(2, 0b11).unwrap();
        let p = PolarParams::from_len(4).unwrap();
        let payload = [1u8, 0];
        let mut u = payload.to_vec();
        u.extend(spec.compute(&payload));
        let x = polar_transform(&u, p).unwrap();
        // Weak, slightly misleading observation.
        let ch: Vec<Llr> = x.iter().map(|&b| if b == 0 { 0.2 } else { -0.2 }).collect();
        let mut ch_noisy = ch.clone();
        ch_noisy[0] = -ch_noisy[0];
        let cfg = ListConfig {
            list_size: 16,
            metric: MetricSource::Channel,
        };
        let out = scl_pass(Some(&ch_noisy), None, &mut fork_all, cfg, Some(&spec)).unwrap();
        assert_eq!(out.crc_passed, Some(true));
        assert!(spec.check(&out.best.u[0]));
    }

    #[test]
    fn multilevel_inputs_see_lower_planes() {
        let p = PolarParams::from_len(8).unwrap();
        let cfg = ListConfig {
            list_size: 4,
            metric: MetricSource::Prior,
        };
        let dec = ListDecoder::new(p, 3, cfg).unwrap();
        let mut seen = Vec::new();
        let out = dec
            .run(
                |level, lower: &[&[u8]]| {
                    seen.push((level, lower.len()));
                    // Level k prefers x = lower-level plane XOR 1.
                    let prior = match lower.last() {
                        None => vec![2.0; 8],
                        Some(prev) => prev.iter().map(|&b| if b == 0 { -2.0 } else { 2.0 }).collect(),
                    };
                    Ok(LevelInputs {
                        channel: None,
                        prior: Some(prior),
                    })
                },
                &mut fork_all,
            )
            .unwrap();
        assert!(seen.iter().all(|&(l, k)| l == k));
        let best = &out.paths[0];
        assert_eq!(best.x[0], vec![0; 8]);
        assert_eq!(best.x[1], vec![1; 8]);
        assert_eq!(best.x[2], vec![0; 8]);
        assert_eq!(out.fork_positions.len(), 24);
    }
}
