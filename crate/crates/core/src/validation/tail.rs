// Licensed under the Apache License, Version 2.0 (the "License"); you may
// not use this file except in compliance with the License. You may obtain
// a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS, WITHOUT
// WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied. See the
// License for the specific language governing permissions and limitations
// under the License.

//! Upper tails of sums of independent Bernoulli variables.

/// `P(V >= k)` for `V` a sum of independent Bernoulli(`q_i`) variables.
///
/// Dynamic programming over the counts `0..k`, with an absorbing state for
/// `>= k` so the tail is accumulated directly rather than as `1 - cdf`.
pub fn poisson_binomial_sf(q: &[f64], k: usize) -> f64 {
    poisson_binomial_sf_grouped(q.iter().map(|&p| (p, 1)), k)
}

/// Same as [`poisson_binomial_sf`] with probabilities given as
/// `(q, multiplicity)` pairs.
pub fn poisson_binomial_sf_grouped(groups: impl IntoIterator<Item = (f64, usize)>, k: usize) -> f64 {
    if k == 0 {
        return 1.0;
    }
    let mut dp = vec![0.0f64; k + 1];
    dp[0] = 1.0;
    for (q, count) in groups {
        let q = q.clamp(0.0, 1.0);
        if q == 0.0 {
            continue;
        }
        let r = 1.0 - q;
        for _ in 0..count {
            dp[k] += dp[k - 1] * q;
            for j in (1..k).rev() {
                dp[j] = dp[j] * r + dp[j - 1] * q;
            }
            dp[0] *= r;
        }
    }
    dp[k].min(1.0)
}

/// `P(X >= k)` for `X ~ Poisson(lambda)`.
pub fn poisson_sf(lambda: f64, k: usize) -> f64 {
    if k == 0 {
        return 1.0;
    }
    if lambda <= 0.0 {
        return 0.0;
    }
    let ln_lambda = lambda.ln();
    if (k as f64) <= lambda {
        // The lower sum is small against 1 here, so subtracting it is safe.
        let mut ln_fact = 0.0;
        let mut lower = 0.0;
        for j in 0..k {
            if j > 0 {
                ln_fact += (j as f64).ln();
            }
            lower += (j as f64 * ln_lambda - lambda - ln_fact).exp();
        }
        return (1.0 - lower).clamp(0.0, 1.0);
    }
    let ln_fact_k: f64 = (1..=k).map(|j| (j as f64).ln()).sum();
    let mut term = (k as f64 * ln_lambda - lambda - ln_fact_k).exp();
    let mut total = 0.0;
    let mut j = k;
    while term > 0.0 {
        total += term;
        j += 1;
        term *= lambda / j as f64;
        if term <= total * 1e-17 {
            break;
        }
    }
    total.min(1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Sums the probability of every outcome vector with at least `k` ones.
    fn brute_force_sf(q: &[f64], k: usize) -> f64 {
        let n = q.len();
        let mut total = 0.0;
        for mask in 0u32..(1 << n) {
            if (mask.count_ones() as usize) < k {
                continue;
            }
            let mut p = 1.0;
            for (i, qi) in q.iter().enumerate() {
                p *= if mask & (1 << i) != 0 { *qi } else { 1.0 - qi };
            }
            total += p;
        }
        total
    }

    #[test]
    fn small_examples() {
        assert_eq!(poisson_binomial_sf(&[0.5, 0.5], 2), 0.25);
        assert_eq!(poisson_binomial_sf(&[0.3, 0.9], 0), 1.0);
        assert_eq!(poisson_binomial_sf(&[0.5, 0.5, 0.5], 2), 0.5);
        assert_eq!(poisson_binomial_sf(&[0.5, 0.5], 3), 0.0);
        assert_eq!(poisson_binomial_sf(&[1.0, 1.0, 0.0], 2), 1.0);
        assert_eq!(poisson_binomial_sf(&[], 1), 0.0);
    }

    #[test]
    fn poisson_tail_values() {
        // P(X >= 1) = 1 - e^-2
        assert!((poisson_sf(2.0, 1) - (1.0 - (-2.0f64).exp())).abs() < 1e-15);
        // P(X >= 3) for lambda 1: 1 - e^-1 (1 + 1 + 1/2)
        let expected = 1.0 - (-1.0f64).exp() * 2.5;
        assert!((poisson_sf(1.0, 3) - expected).abs() < 1e-15);
        assert_eq!(poisson_sf(0.0, 1), 0.0);
        assert_eq!(poisson_sf(5.0, 0), 1.0);
        // Deep tail stays positive and tiny.
        let deep = poisson_sf(0.01, 20);
        assert!(deep > 0.0 && deep < 1e-50);
        // Large rates do not underflow.
        assert!((poisson_sf(2000.0, 1) - 1.0).abs() < 1e-12);
        assert!(poisson_sf(2000.0, 2300) > 0.0);
    }

    proptest! {
        #[test]
        fn dp_matches_enumeration(
            q in prop::collection::vec(0.0f64..=1.0, 0..=12),
            k in 0usize..14,
        ) {
            let exact = poisson_binomial_sf(&q, k);
            prop_assert!((exact - brute_force_sf(&q, k)).abs() <= 1e-12);
        }

        #[test]
        fn tail_is_non_increasing(q in prop::collection::vec(0.0f64..=1.0, 1..40)) {
            let mut prev = 1.0;
            for k in 0..=q.len() + 1 {
                let p = poisson_binomial_sf(&q, k);
                prop_assert!(p <= prev + 1e-15);
                prop_assert!((0.0..=1.0).contains(&p));
                prev = p;
            }
        }

        #[test]
        fn poisson_tail_is_non_increasing(lambda in 0.0f64..50.0) {
            let mut prev = 1.0;
            for k in 0..120 {
                let p = poisson_sf(lambda, k);
                prop_assert!(p <= prev + 1e-12);
                prev = p;
            }
        }
    }
}
