//! Reference joints used by tests and the identity suite.

use rand::Rng;

use super::discrete::DiscreteJoint;
use crate::rng;

fn coins(p_equal: f64) -> DiscreteJoint {
    let mut probs = vec![0.0; 8];
    for x1 in 0..2 {
        for x2 in 0..2 {
            let cx = x1 * 2 + x2;
            let p = if x1 == x2 { p_equal / 2.0 } else { (1.0 - p_equal) / 2.0 };
            // y = x2
            probs[cx * 2 + x2] = p;
        }
    }
    DiscreteJoint::new(vec![vec![0.0, 1.0]; 2], vec![0.0, 1.0], probs).expect("valid coins")
}

/// Two independent fair coins with `y = x2`.
pub fn independent_coins() -> DiscreteJoint {
    coins(0.5)
}

/// Two fair coins equal with probability 0.8 and `y = x2`; `x1` is
/// conditionally null but correlated with the target.
pub fn correlated_coins() -> DiscreteJoint {
    coins(0.8)
}

fn random_support<R: Rng>(r: &mut R, size: usize) -> Vec<f64> {
    let mut s: Vec<f64> = Vec::with_capacity(size);
    while s.len() < size {
        let v = (r.random_range(-30..=30) as f64) / 10.0;
        if !s.contains(&v) {
            s.push(v);
        }
    }
    s
}

fn normalize(mut w: Vec<f64>) -> Vec<f64> {
    let total: f64 = w.iter().sum();
    w.iter_mut().for_each(|v| *v /= total);
    w
}

/// Joint with `p` covariates, supports of size `1..=max_support`, a target
/// support of size `2..=max_support.max(2)`, and strictly positive random
/// masses.
pub fn random_joint(p: usize, max_support: usize, seed: u64) -> DiscreteJoint {
    let mut r = rng::rng_from(seed);
    let supports: Vec<Vec<f64>> = (0..p)
        .map(|_| {
            let k = r.random_range(1..=max_support);
            random_support(&mut r, k)
        })
        .collect();
    let ky = r.random_range(2..=max_support.max(2));
    let ys = random_support(&mut r, ky);
    let atoms: usize = supports.iter().map(Vec::len).product::<usize>() * ky;
    let probs = normalize((0..atoms).map(|_| r.random_range(0.05..1.0)).collect());
    DiscreteJoint::new(supports, ys, probs).expect("valid random joint")
}

/// Random joint in which feature `null` is conditionally independent of the
/// target given the other covariates:
/// `p(x, y) = p(x^-j) p(x^j | x^-j) p(y | x^-j)`, all factors positive.
pub fn factored_null_joint(p: usize, null: usize, max_support: usize, seed: u64) -> DiscreteJoint {
    assert!(null < p && p >= 1);
    let mut r = rng::rng_from(seed);
    let supports: Vec<Vec<f64>> = (0..p)
        .map(|k| {
            let lo = if k == null { 2 } else { 1 };
            let n = r.random_range(lo..=max_support.max(lo));
            random_support(&mut r, n)
        })
        .collect();
    let ky = r.random_range(2..=max_support.max(2));
    let ys = random_support(&mut r, ky);
    let rest: Vec<usize> = (0..p).filter(|&k| k != null).collect();
    let n_rest: usize = rest.iter().map(|&k| supports[k].len()).product();
    let sj = supports[null].len();
    let p_rest = normalize((0..n_rest).map(|_| r.random_range(0.05..1.0)).collect());
    let p_j: Vec<Vec<f64>> = (0..n_rest)
        .map(|_| normalize((0..sj).map(|_| r.random_range(0.05..1.0)).collect()))
        .collect();
    let p_y: Vec<Vec<f64>> = (0..n_rest)
        .map(|_| normalize((0..ky).map(|_| r.random_range(0.05..1.0)).collect()))
        .collect();
    let n_configs: usize = supports.iter().map(Vec::len).product();
    let scaffold = DiscreteJoint::new(supports.clone(), ys.clone(), vec![1.0 / (n_configs * ky) as f64; n_configs * ky])
        .expect("uniform scaffold");
    let mut probs = vec![0.0; n_configs * ky];
    for cx in 0..n_configs {
        let digits = scaffold.decode(cx);
        let k = rest.iter().fold(0, |acc, &q| acc * supports[q].len() + digits[q]);
        for yi in 0..ky {
            probs[cx * ky + yi] = p_rest[k] * p_j[k][digits[null]] * p_y[k][yi];
        }
    }
    let probs = normalize(probs);
    DiscreteJoint::new(supports, ys, probs).expect("valid factored joint")
}

/// Joint in which feature `j` is independent of the other covariates and
/// of the target, while the target depends on the rest.
pub fn independent_null_joint(p: usize, null: usize, seed: u64) -> DiscreteJoint {
    let mut r = rng::rng_from(seed);
    let supports: Vec<Vec<f64>> = (0..p).map(|_| random_support(&mut r, 2)).collect();
    let ys = random_support(&mut r, 2);
    let rest: Vec<usize> = (0..p).filter(|&k| k != null).collect();
    let n_rest: usize = 1 << rest.len();
    let p_rest = normalize((0..n_rest).map(|_| r.random_range(0.05..1.0)).collect());
    let p_y: Vec<Vec<f64>> = (0..n_rest)
        .map(|_| normalize((0..2).map(|_| r.random_range(0.05..1.0)).collect()))
        .collect();
    let p_j = normalize((0..2).map(|_| r.random_range(0.05..1.0)).collect());
    let n_configs = 1usize << p;
    let scaffold = DiscreteJoint::new(supports.clone(), ys.clone(), vec![1.0 / (2 * n_configs) as f64; 2 * n_configs])
        .expect("uniform scaffold");
    let mut probs = vec![0.0; 2 * n_configs];
    for cx in 0..n_configs {
        let digits = scaffold.decode(cx);
        let k = rest.iter().fold(0, |acc, &q| acc * 2 + digits[q]);
        for yi in 0..2 {
            probs[cx * 2 + yi] = p_rest[k] * p_j[digits[null]] * p_y[k][yi];
        }
    }
    DiscreteJoint::new(supports, ys, normalize(probs)).expect("valid joint")
}
