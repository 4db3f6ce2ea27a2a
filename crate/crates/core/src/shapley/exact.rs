use rayon::prelude::*;

use super::{check_background, value_with, Background, Coalition, Estimator, Explanation, Features, ShapleyError, MAX_EXACT_FEATURES};
use crate::Scalar;

/// `|S|!(M−|S|−1)!/M!` for every coalition size `|S| < M`.
pub(crate) fn shapley_weights(m: usize) -> Vec<f64> {
    // 1 / (M · C(M−1, s)), with the binomial built up multiplicatively
    let mut binom = 1.0f64;
    (0..m)
        .map(|s| {
            if s > 0 {
                binom = binom * (m - s) as f64 / s as f64;
            }
            1.0 / (m as f64 * binom)
        })
        .collect()
}

/// Shapley values by full enumeration of the `2^M` coalitions.
///
/// Every coalition value is computed once (in parallel) and kept in a
/// table indexed by its bit mask; the attribution sums run in ascending
/// mask order so the result does not depend on scheduling.
pub fn exact_shapley<I, T, F>(f: &F, x: &I, bg: &Background<I>) -> Result<Explanation<T>, ShapleyError>
where
    I: Features,
    T: Scalar,
    F: Fn(&I) -> T + Sync,
{
    let m = x.feature_count();
    if m > MAX_EXACT_FEATURES {
        return Err(ShapleyError::TooManyFeatures { got: m, max: MAX_EXACT_FEATURES });
    }
    check_background(x, bg)?;
    let n = 1usize << m;
    let values: Vec<T> = (0..n as u64)
        .into_par_iter()
        .map_init(|| x.clone(), |scratch, mask| value_with(f, x, Coalition(mask), bg, scratch))
        .collect();

    let weights: Vec<T> = shapley_weights(m).into_iter().map(T::of).collect();
    let phi = (0..m)
        .map(|i| {
            let bit = 1usize << i;
            let mut acc = T::zero();
            for mask in (0..n).filter(|s| s & bit == 0) {
                let size = mask.count_ones() as usize;
                acc += weights[size] * (values[mask | bit] - values[mask]);
            }
            acc
        })
        .collect();

    Ok(Explanation {
        base: values[0],
        phi,
        fx: values[n - 1],
        feature_summaries: vec![T::zero(); m],
        estimator: Estimator::Exact,
        samples: n,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn factorial(n: usize) -> f64 {
        (1..=n).map(|k| k as f64).product()
    }

    #[test]
    fn weights_match_factorial_formula() {
        for m in 1..10 {
            let w = shapley_weights(m);
            for (s, &v) in w.iter().enumerate() {
                let expect = factorial(s) * factorial(m - s - 1) / factorial(m);
                assert!((v - expect).abs() < 1e-15 * expect.max(1.0), "m={m} s={s}");
            }
            // per feature, the weights over all coalitions without it sum to one
            let total: f64 = (0..m).map(|s| w[s] * factorial(m - 1) / (factorial(s) * factorial(m - 1 - s))).sum();
            assert!((total - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn constant_function_gets_no_attribution() {
        let f = |_: &Vec<f64>| 4.0;
        let e = exact_shapley(&f, &vec![1.0, 2.0, 3.0], &Background::new(vec![vec![0.0; 3]])).unwrap();
        assert_eq!(e.phi, vec![0.0; 3]);
        assert_eq!(e.base, e.fx);
    }

    #[test]
    fn weighted_sum_with_origin_background() {
        let f = |v: &Vec<f64>| 2.0 * v[0] + 3.0 * v[1];
        let e = exact_shapley(&f, &vec![1.0, 1.0], &Background::new(vec![vec![0.0, 0.0]])).unwrap();
        assert_eq!(e.base, 0.0);
        assert!((e.phi[0] - 2.0).abs() < 1e-12 && (e.phi[1] - 3.0).abs() < 1e-12);
        assert_eq!(e.samples, 4);
    }

    #[test]
    fn symmetric_features_share_credit() {
        let f = |v: &Vec<f64>| v[0] + v[1] + v[0] * v[1];
        let e = exact_shapley(&f, &vec![0.7, 0.7], &Background::new(vec![vec![0.1, 0.3], vec![0.3, 0.1]])).unwrap();
        assert_eq!(e.phi[0], e.phi[1]);
        assert!(e.is_efficient());
    }

    #[test]
    fn interaction_is_split_evenly() {
        // f = x0·x1 with zero background: each feature gets half of f(x)
        let f = |v: &Vec<f64>| v[0] * v[1];
        let e = exact_shapley(&f, &vec![2.0, 3.0], &Background::new(vec![vec![0.0, 0.0]])).unwrap();
        assert_eq!(e.phi, vec![3.0, 3.0]);
    }

    #[test]
    fn too_many_features() {
        let f = |_: &Vec<f64>| 0.0;
        let x = vec![0.0; 21];
        assert_eq!(
            exact_shapley(&f, &x, &Background::new(vec![x.clone()])),
            Err(ShapleyError::TooManyFeatures { got: 21, max: 20 })
        );
    }
}
