use super::{
    boxplus, check_bit, clamp_llrs, combine, hard_decision, log_prob, reverse_bits, BitView,
    Decision, DecisionPolicy, Llr, MetricSource,
};
use crate::error::{invalid, Error, Result};

/// Result of a successive-cancellation pass.
#[derive(Debug, Clone)]
pub struct ScOutput {
    pub u: Vec<u8>,
    pub x: Vec<u8>,
    /// Sum of `ln P(u_i | u_{<i}, ·)` under the metric stream.
    pub log_prob: f64,
    /// Per-bit channel-stream LLRs seen by the policy (empty without a channel stream).
    pub channel_llrs: Vec<Llr>,
    /// Per-bit prior-stream LLRs seen by the policy (empty without a prior stream).
    pub prior_llrs: Vec<Llr>,
}

struct Pass<'p, P: ?Sized> {
    policy: &'p mut P,
    metric: MetricSource,
    level: usize,
    has_channel: bool,
    has_prior: bool,
    u: Vec<u8>,
    log_prob: f64,
    channel_llrs: Vec<Llr>,
    prior_llrs: Vec<Llr>,
}

impl<P: DecisionPolicy + ?Sized> Pass<'_, P> {
    /// Decodes the subtree whose leaves start at `base`; returns its re-encoded bits.
    fn node(&mut self, chan: &[Llr], prior: &[Llr], base: usize) -> Vec<u8> {
        let len = chan.len().max(prior.len());
        if len == 1 {
            return vec![self.leaf(chan.first().copied(), prior.first().copied(), base)];
        }
        let h = len / 2;
        let f = |l: &[Llr]| -> Vec<Llr> { (0..l.len() / 2).map(|j| boxplus(l[j], l[j + l.len() / 2])).collect() };
        let left = self.node(&f(chan), &f(prior), base);
        let g = |l: &[Llr]| -> Vec<Llr> {
            let h = l.len() / 2;
            (0..h).map(|j| combine(l[j], l[j + h], left[j])).collect()
        };
        let right = self.node(&g(chan), &g(prior), base + h);
        left.iter().zip(&right).map(|(a, b)| a ^ b).chain(right.iter().copied()).collect()
    }

    fn leaf(&mut self, chan: Option<Llr>, prior: Option<Llr>, index: usize) -> u8 {
        let view = BitView {
            level: self.level,
            index,
            channel: chan,
            prior,
        };
        let metric_llr = view.llr(self.metric);
        let bit = match check_bit(self.policy.decide(&view)) {
            Decision::Bit(b) => b,
            Decision::Fork => hard_decision(metric_llr),
        };
        self.log_prob += log_prob(metric_llr, bit);
        if let Some(l) = chan {
            self.channel_llrs.push(l);
        }
        if let Some(l) = prior {
            self.prior_llrs.push(l);
        }
        self.u.push(bit);
        bit
    }
}

/// One successive-cancellation pass over a length-`N` code.
///
/// `channel` holds per-codeword-bit posteriors that already include the
/// shaping prior; `prior` holds the channel-free shaping posteriors. Either
/// may be absent, but the stream named by `metric` must be present. `Fork`
/// decisions resolve to the hard decision on the metric stream.
pub fn sc_pass<P: DecisionPolicy + ?Sized>(
    channel: Option<&[Llr]>,
    prior: Option<&[Llr]>,
    policy: &mut P,
    metric: MetricSource,
    level: usize,
) -> Result<ScOutput> {
    let len = match (channel, prior) {
        (Some(c), Some(p)) if c.len() != p.len() => {
            return Err(Error::LengthMismatch {
                expected: c.len(),
                actual: p.len(),
            })
        }
        (Some(c), _) => c.len(),
        (None, Some(p)) => p.len(),
        (None, None) => return invalid("sc_pass needs at least one soft stream"),
    };
    if len == 0 || !len.is_power_of_two() {
        return invalid(format!("block length {len} is not a power of two"));
    }
    let present = match metric {
        MetricSource::Channel => channel.is_some(),
        MetricSource::Prior => prior.is_some(),
    };
    if !present {
        return invalid(format!("metric stream {metric:?} not supplied"));
    }
    let n = len.trailing_zeros();
    let permute = |v: &[Llr]| -> Vec<Llr> {
        let v = clamp_llrs(v);
        (0..len).map(|k| v[reverse_bits(k, n)]).collect()
    };
    let chan = channel.map(permute).unwrap_or_default();
    let pri = prior.map(permute).unwrap_or_default();

    let mut pass = Pass {
        policy,
        metric,
        level,
        has_channel: channel.is_some(),
        has_prior: prior.is_some(),
        u: Vec::with_capacity(len),
        log_prob: 0.0,
        channel_llrs: Vec::with_capacity(if channel.is_some() { len } else { 0 }),
        prior_llrs: Vec::with_capacity(if prior.is_some() { len } else { 0 }),
    };
    let permuted_x = pass.node(&chan, &pri, 0);
    debug_assert!(pass.has_channel || pass.has_prior);
    let x = (0..len).map(|j| permuted_x[reverse_bits(j, n)]).collect();
    Ok(ScOutput {
        u: pass.u,
        x,
        log_prob: pass.log_prob,
        channel_llrs: pass.channel_llrs,
        prior_llrs: pass.prior_llrs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::polar::{polar_transform, AllFrozen, PolarParams, PosteriorPair};

    fn argmax_all(_: &BitView) -> Decision {
        Decision::Fork
    }

    /// `P(U_i = b | u_{<i}, y)` by enumerating every input word.
    fn brute_force_bit_posterior(llrs: &[Llr], prefix: &[u8]) -> [f64; 2] {
        let len = llrs.len();
        let p = PolarParams::from_len(len).unwrap();
        let i = prefix.len();
        let mut mass = [0.0f64; 2];
        for w in 0..(1usize << len) {
            let u: Vec<u8> = (0..len).map(|k| (w >> k & 1) as u8).collect();
            if u[..i] != *prefix {
                continue;
            }
            let x = polar_transform(&u, p).unwrap();
            let lik: f64 = x
                .iter()
                .zip(llrs)
                .map(|(&b, &l)| PosteriorPair::from_llr(l).prob(b))
                .product();
            mass[u[i] as usize] += lik;
        }
        mass
    }

    fn lcg(seed: &mut u64) -> f64 {
        *seed = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        (*seed >> 11) as f64 / (1u64 << 53) as f64
    }

    #[test]
    fn all_frozen_gives_zero_word() {
        let llrs = [1.2, -3.0, 0.5, -0.1];
        let out = sc_pass(Some(&llrs), None, &mut AllFrozen, MetricSource::Channel, 0).unwrap();
        assert_eq!(out.u, vec![0; 4]);
        assert_eq!(out.x, vec![0; 4]);
    }

    #[test]
    fn noiseless_two_bit_inversion() {
        // x = [0, 1] observed perfectly.
        let llrs = [50.0, -50.0];
        let out = sc_pass(Some(&llrs), None, &mut argmax_all, MetricSource::Channel, 0).unwrap();
        assert_eq!(out.u, vec![1, 1]);
        assert_eq!(out.x, vec![0, 1]);
    }

    #[test]
    fn bsc_realization_matches_map_per_bit() {
        // BSC(0.1) observation of a random codeword, N = 4.
        let l = (0.9f64 / 0.1).ln();
        let y = [0u8, 1, 1, 0];
        let llrs: Vec<Llr> = y.iter().map(|&b| if b == 0 { l } else { -l }).collect();
        let out = sc_pass(Some(&llrs), None, &mut argmax_all, MetricSource::Channel, 0).unwrap();
        for i in 0..4 {
            let m = brute_force_bit_posterior(&llrs, &out.u[..i]);
            let expect = (m[0] / m[1]).ln();
            assert!((out.channel_llrs[i] - expect).abs() < 1e-9);
            assert_eq!(out.u[i], u8::from(m[1] > m[0]));
        }
    }

    #[test]
    fn posteriors_equal_brute_force_marginals() {
        let mut seed = 7u64;
        for len in [1usize, 2, 4, 8, 16] {
            for trial in 0..3 {
                let llrs: Vec<Llr> = (0..len).map(|_| (lcg(&mut seed) - 0.5) * 6.0).collect();
                // Follow a pseudo-random path rather than argmax.
                let mut s2 = seed ^ trial;
                let mut policy = |_: &BitView| Decision::Bit((lcg(&mut s2) < 0.5) as u8);
                let out = sc_pass(Some(&llrs), None, &mut policy, MetricSource::Channel, 0).unwrap();
                for i in 0..len {
                    let m = brute_force_bit_posterior(&llrs, &out.u[..i]);
                    let p1 = m[1] / (m[0] + m[1]);
                    let got = PosteriorPair::from_llr(out.channel_llrs[i]).p1;
                    assert!((got - p1).abs() < 1e-9, "len {len} bit {i}: {got} vs {p1}");
                }
                let p = PolarParams::from_len(len).unwrap();
                assert_eq!(polar_transform(&out.u, p).unwrap(), out.x);
            }
        }
    }

    #[test]
    fn log_prob_accumulates_chain_rule() {
        let llrs = [0.4, -1.1, 2.0, 0.3, -0.2, 0.9, 1.5, -2.5];
        let out = sc_pass(Some(&llrs), None, &mut argmax_all, MetricSource::Channel, 0).unwrap();
        let direct: f64 = out
            .x
            .iter()
            .zip(&llrs)
            .map(|(&b, &l)| PosteriorPair::from_llr(l).prob(b).ln())
            .sum();
        assert!((out.log_prob - direct).abs() < 1e-9);
    }

    #[test]
    #[should_panic(expected = "non-binary")]
    fn non_binary_policy_is_a_contract_violation() {
        let mut bad = |_: &BitView| Decision::Bit(2);
        let _ = sc_pass(Some(&[0.0, 0.0]), None, &mut bad, MetricSource::Channel, 0);
    }

    #[test]
    fn missing_metric_stream_is_rejected() {
        assert!(sc_pass(Some(&[0.0, 0.0]), None, &mut AllFrozen, MetricSource::Prior, 0).is_err());
        assert!(sc_pass(Some(&[0.0; 3]), None, &mut AllFrozen, MetricSource::Channel, 0).is_err());
    }
}
