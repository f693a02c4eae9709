//! Counter-style random streams keyed by `(seed, sweep index, item index)`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Independent stream for item `item` of sweep point `sweep` under `seed`.
///
/// The result depends only on the three keys, so work can be split across
/// any number of threads without changing what each item draws.
pub fn stream_rng(seed: u64, sweep: u64, item: u64) -> ChaCha8Rng {
    let key = splitmix(seed ^ splitmix(sweep.wrapping_add(0x5eed)));
    let mut rng = ChaCha8Rng::seed_from_u64(key);
    rng.set_stream(item);
    rng
}

/// Draws an index from `pmf` by inversion of its CDF.
pub fn sample_index<R: rand::Rng + ?Sized>(cdf: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.random();
    cdf.partition_point(|&c| c <= u).min(cdf.len() - 1)
}

pub fn cumulative(pmf: &[f64]) -> Vec<f64> {
    let mut acc = 0.0;
    let mut cdf: Vec<f64> = pmf
        .iter()
        .map(|p| {
            acc += p;
            acc
        })
        .collect();
    if let Some(last) = cdf.last_mut() {
        *last = 1.0;
    }
    cdf
}
