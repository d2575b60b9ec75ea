//! Counter-based random numbers.
//!
//! Both the simulator and the Monte-Carlo integrators draw uniforms as a pure
//! function of `(seed, counter words...)` using a SplitMix64-style finalizer.
//! This gives every (slot, user, purpose) triple its own reproducible variate,
//! independent of thread scheduling, and lets two runs share identical
//! randomness for coupled comparisons (common random numbers).

/// SplitMix64 finalizer: a fast, well-mixed 64-bit permutation.
#[inline]
fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

const GOLDEN: u64 = 0x9e37_79b9_7f4a_7c15;

/// Hash a seed together with a sequence of counter words into 64 bits.
#[inline]
pub fn hash_words(seed: u64, words: &[u64]) -> u64 {
    let mut h = mix(seed ^ GOLDEN);
    for (i, &w) in words.iter().enumerate() {
        h = mix(h ^ w.wrapping_add(GOLDEN.wrapping_mul(i as u64 + 1)));
    }
    h
}

/// Uniform in `[0, 1)` with 53-bit resolution, as a pure function of the
/// seed and counter words.
#[inline]
pub fn uniform(seed: u64, words: &[u64]) -> f64 {
    (hash_words(seed, words) >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Exponential variate with the given mean via inverse CDF.
#[inline]
pub fn exponential(seed: u64, words: &[u64], mean: f64) -> f64 {
    let u = uniform(seed, words);
    -mean * (1.0 - u).ln()
}

/// Geometric packet-arrival count with mean `lambda`:
/// `P(A = j) = (1/(1+λ)) (λ/(1+λ))^j`, j ≥ 0 (number of failures before the
/// first success of a Bernoulli(1/(1+λ)) sequence), via inverse CDF.
#[inline]
pub fn geometric_arrivals(u: f64, lambda: f64) -> u64 {
    if lambda <= 0.0 {
        return 0;
    }
    let ratio = lambda / (1.0 + lambda);
    // P(A >= k) = ratio^k, so A = floor(ln(1-u)/ln(ratio)).
    let a = ((1.0 - u).ln() / ratio.ln()).floor();
    if a < 0.0 {
        0
    } else {
        a as u64
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_and_seed_sensitive() {
        let a = uniform(42, &[1, 2, 3]);
        let b = uniform(42, &[1, 2, 3]);
        let c = uniform(43, &[1, 2, 3]);
        let d = uniform(42, &[1, 2, 4]);
        assert_eq!(a, b);
        assert!(a != c && a != d);
        assert!((0.0..1.0).contains(&a));
    }

    #[test]
    fn uniform_mean_is_half() {
        let n = 100_000u64;
        let mean: f64 = (0..n).map(|i| uniform(7, &[i])).sum::<f64>() / n as f64;
        assert!((mean - 0.5).abs() < 0.005, "mean {mean}");
    }

    #[test]
    fn geometric_matches_pmf() {
        let lambda = 0.7;
        let n = 200_000u64;
        let mut counts = [0u64; 4];
        let mut total_val = 0.0;
        for i in 0..n {
            let a = geometric_arrivals(uniform(11, &[i]), lambda);
            if (a as usize) < counts.len() {
                counts[a as usize] += 1;
            }
            total_val += a as f64;
        }
        let mean = total_val / n as f64;
        assert!((mean - lambda).abs() < 0.01, "mean {mean} vs {lambda}");
        // P(A=0) = 1/(1+λ)
        let p0 = counts[0] as f64 / n as f64;
        assert!((p0 - 1.0 / (1.0 + lambda)).abs() < 0.005, "p0 {p0}");
        // P(A=1) = λ/(1+λ)^2
        let p1 = counts[1] as f64 / n as f64;
        let expect_p1 = lambda / ((1.0 + lambda) * (1.0 + lambda));
        assert!((p1 - expect_p1).abs() < 0.005, "p1 {p1}");
    }

    #[test]
    fn zero_rate_yields_no_arrivals() {
        for i in 0..100 {
            assert_eq!(geometric_arrivals(uniform(3, &[i]), 0.0), 0);
        }
    }
}
