use std::collections::BTreeMap;

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::{check_background, value_with, Background, Coalition, Estimator, Explanation, Features, ShapleyError};
use crate::linalg;
use crate::Scalar;

/// Kernel weight `(M−1) / (C(M,|z|)·|z|·(M−|z|))` of a proper coalition.
pub fn kernel_weight(m: usize, size: usize) -> f64 {
    assert!(size > 0 && size < m, "kernel weight is defined for proper, non-empty coalitions");
    (m - 1) as f64 / (binomial(m, size) * size as f64 * (m - size) as f64)
}

fn binomial(n: usize, k: usize) -> f64 {
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Draws coalitions in complementary pairs: a size `s` with probability
/// proportional to `(M−1)/(s(M−s))`, then a uniform subset of that size.
/// Under this scheme every drawn coalition carries unit regression weight.
fn paired_samples(m: usize, pairs: usize, seed: u64) -> BTreeMap<Coalition, f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let size_mass: Vec<f64> = (1..m).map(|s| (m - 1) as f64 / (s * (m - s)) as f64).collect();
    let total: f64 = size_mass.iter().sum();
    let mut drawn = BTreeMap::new();
    for _ in 0..pairs {
        let mut u = rng.random::<f64>() * total;
        let mut size = m - 1;
        for (k, &p) in size_mass.iter().enumerate() {
            if u < p {
                size = k + 1;
                break;
            }
            u -= p;
        }
        let mut z = Coalition::EMPTY;
        for i in index::sample(&mut rng, m, size) {
            z = z.with(i);
        }
        *drawn.entry(z).or_insert(0.0) += 1.0;
        *drawn.entry(z.complement(m)).or_insert(0.0) += 1.0;
    }
    drawn
}

/// Kernel-weighted regression estimate of the Shapley values.
///
/// The empty and full coalitions enter as constraints (`φ` sums to
/// `f(x) − b`). When `n_samples` covers all `2^M − 2` proper coalitions
/// they are enumerated once each with their exact kernel weights, which
/// reproduces the exact Shapley values; otherwise `n_samples` coalitions
/// are drawn in complementary pairs with a seeded generator.
pub fn kernel_shap<I, T, F>(
    f: &F,
    x: &I,
    bg: &Background<I>,
    n_samples: usize,
    seed: u64,
) -> Result<Explanation<T>, ShapleyError>
where
    I: Features,
    T: Scalar,
    F: Fn(&I) -> T + Sync,
{
    let m = x.feature_count();
    if m > 62 {
        return Err(ShapleyError::TooManyFeatures { got: m, max: 62 });
    }
    // full enumeration needs fewer than 2M + 2 coalitions when M ≤ 3
    let need = (2 * m + 2).min(((1u64 << m) - 2).max(1) as usize);
    if n_samples < need {
        return Err(ShapleyError::InsufficientSamples { got: n_samples, need });
    }
    check_background(x, bg)?;

    let mut scratch = x.clone();
    let base = value_with(f, x, Coalition::EMPTY, bg, &mut scratch);
    let fx = f(x);
    let delta = fx - base;
    if m == 1 {
        return Ok(Explanation {
            base,
            phi: vec![delta],
            fx,
            feature_summaries: vec![T::zero()],
            estimator: Estimator::Kernel,
            samples: 0,
        });
    }

    let proper = (1u64 << m) - 2;
    let (weights, samples): (BTreeMap<Coalition, f64>, usize) = if n_samples as u64 >= proper {
        let all = (1..=proper).map(|z| (Coalition(z), kernel_weight(m, Coalition(z).len()))).collect();
        (all, proper as usize)
    } else {
        (paired_samples(m, n_samples / 2, seed), n_samples / 2 * 2)
    };

    let coalitions: Vec<(Coalition, f64)> = weights.into_iter().collect();
    let values: Vec<T> = coalitions
        .par_iter()
        .map_init(|| x.clone(), |scratch, (z, _)| value_with(f, x, *z, bg, scratch))
        .collect();

    // eliminate the last feature through the efficiency constraint
    let k = m - 1;
    let last = m - 1;
    let mut ata = vec![T::zero(); k * k];
    let mut aty = vec![T::zero(); k];
    let mut row = vec![T::zero(); k];
    for ((z, w), &v) in coalitions.iter().zip(&values) {
        let w = T::of(*w);
        let z_last = if z.contains(last) { T::one() } else { T::zero() };
        for (i, r) in row.iter_mut().enumerate() {
            *r = (if z.contains(i) { T::one() } else { T::zero() }) - z_last;
        }
        let y = v - base - z_last * delta;
        for i in 0..k {
            if row[i] == T::zero() {
                continue;
            }
            aty[i] += w * row[i] * y;
            for j in 0..=i {
                ata[i * k + j] += w * row[i] * row[j];
            }
        }
    }
    for i in 0..k {
        for j in 0..i {
            ata[j * k + i] = ata[i * k + j];
        }
    }
    let l = linalg::cholesky(&ata, k).ok_or(ShapleyError::DegenerateSystem)?;
    let mut phi = linalg::cholesky_solve(&l, k, &aty);
    let rest = delta - phi.iter().copied().sum::<T>();
    phi.push(rest);

    Ok(Explanation {
        base,
        phi,
        fx,
        feature_summaries: vec![T::zero(); m],
        estimator: Estimator::Kernel,
        samples,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::shapley::exact_shapley;

    #[test]
    fn weight_formula() {
        assert_eq!(kernel_weight(4, 1), 0.25);
        assert_eq!(kernel_weight(4, 3), 0.25);
        assert!((kernel_weight(4, 2) - 3.0 / (6.0 * 4.0)).abs() < 1e-15);
    }

    #[test]
    fn full_enumeration_matches_exact() {
        let f = |v: &Vec<f64>| v[0] * v[1] - v[2].powi(2) + (v[3] * v[0]).sin();
        let x = vec![0.3, -1.2, 0.8, 2.0];
        let bg = Background::new(vec![vec![0.0, 0.5, -0.5, 1.0], vec![1.0, 1.0, 0.0, -1.0]]);
        let exact = exact_shapley(&f, &x, &bg).unwrap();
        let kernel = kernel_shap(&f, &x, &bg, 14, 0).unwrap();
        assert_eq!(kernel.samples, 14);
        for (a, b) in exact.phi.iter().zip(&kernel.phi) {
            assert!((a - b).abs() < 1e-10, "{a} vs {b}");
        }
    }

    #[test]
    fn sampling_is_seeded_and_paired() {
        let s1 = paired_samples(8, 40, 3);
        assert_eq!(s1, paired_samples(8, 40, 3));
        for (z, w) in &s1 {
            assert_eq!(s1.get(&z.complement(8)), Some(w));
            assert!(!z.is_empty() && *z != Coalition::full(8));
        }
    }

    #[test]
    fn too_few_samples() {
        let f = |v: &Vec<f64>| v[0];
        let x = vec![1.0; 5];
        assert_eq!(
            kernel_shap(&f, &x, &Background::new(vec![vec![0.0; 5]]), 11, 0),
            Err(ShapleyError::InsufficientSamples { got: 11, need: 12 })
        );
    }

    #[test]
    fn small_games_accept_full_enumeration_below_two_m_plus_two() {
        let f = |v: &Vec<f64>| v[0] * v[1] + v[2];
        let x = vec![1.0, 2.0, 3.0];
        let bg = Background::new(vec![vec![0.0; 3]]);
        let k = kernel_shap(&f, &x, &bg, 6, 0).unwrap();
        let e = exact_shapley(&f, &x, &bg).unwrap();
        for i in 0..3 {
            assert!((k.phi[i] - e.phi[i]).abs() < 1e-12);
        }
        assert!(kernel_shap(&f, &x, &bg, 5, 0).is_err());
    }

    #[test]
    fn efficiency_holds_when_sampled() {
        let f = |v: &Vec<f64>| v.iter().enumerate().map(|(i, a)| a * a * (i as f64 + 1.0)).sum::<f64>();
        let x: Vec<f64> = (0..10).map(|i| i as f64 / 5.0).collect();
        let e = kernel_shap(&f, &x, &Background::new(vec![vec![0.0; 10]]), 200, 9).unwrap();
        assert!(e.efficiency_gap() < 1e-9);
        assert!(e.is_efficient());
    }
}
