//! Gauss–Legendre rules at any working precision.

use std::any::{Any, TypeId};
use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use crate::mp::Real;

/// Nodes and weights on [−1, 1], nodes ascending.
#[derive(Clone, Debug)]
pub struct GaussLegendre<R> {
    pub nodes: Vec<R>,
    pub weights: Vec<R>,
}

/// (P_n(x), P_{n−1}(x)) by the three-term recurrence.
fn legendre_pair<R: Real>(n: usize, x: &R) -> (R, R) {
    let mut prev = R::one();
    let mut cur = x.clone();
    for k in 1..n {
        let next = (R::from_i64(2 * k as i64 + 1) * x.clone() * cur.clone()
            - R::from_i64(k as i64) * prev)
            / R::from_i64(k as i64 + 1);
        prev = cur;
        cur = next;
    }
    (cur, prev)
}

fn derivative<R: Real>(n: usize, x: &R, p: &R, q: &R) -> R {
    R::from_i64(n as i64) * (x.clone() * p.clone() - q.clone()) / (x.clone() * x.clone() - R::one())
}

fn build<R: Real>(n: usize) -> GaussLegendre<R> {
    assert!(n >= 2, "a Gauss rule needs at least two nodes");
    let half = n / 2;
    let mut pos_nodes = Vec::with_capacity(half);
    let mut pos_weights = Vec::with_capacity(half);
    // Newton stops a few bits above the working resolution
    let eps = {
        let mut e = R::one();
        let two = R::from_i64(2);
        let mut steps = 0;
        while !e.is_zero() && steps < 4000 {
            let next = e.clone() / two.clone();
            if (R::one() + next.clone()) == R::one() || next.is_zero() {
                break;
            }
            e = next;
            steps += 1;
        }
        e * R::from_i64(64)
    };
    for i in 0..half {
        let guess = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut x = guess;
        for _ in 0..100 {
            let (p, q) = legendre_pair(n, &x);
            let dx = p / derivative(n, &x, &p, &q);
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        let mut x = R::from_f64(x);
        for _ in 0..12 {
            let (p, q) = legendre_pair(n, &x);
            let d = derivative(n, &x, &p, &q);
            let dx = p / d;
            x = x - dx.clone();
            if dx.abs() <= eps {
                break;
            }
        }
        let (p, q) = legendre_pair(n, &x);
        let d = derivative(n, &x, &p, &q);
        let w = R::from_i64(2) / ((R::one() - x.clone() * x.clone()) * d.clone() * d);
        pos_nodes.push(x);
        pos_weights.push(w);
    }
    let mut nodes: Vec<R> = pos_nodes.iter().map(|x| -x.clone()).collect();
    let mut weights = pos_weights.clone();
    if n % 2 == 1 {
        let (_, q) = legendre_pair(n, &R::zero());
        // P′_n(0) = n P_{n−1}(0)
        let d = R::from_i64(n as i64) * q;
        nodes.push(R::zero());
        weights.push(R::from_i64(2) / (d.clone() * d));
    }
    for i in (0..half).rev() {
        nodes.push(pos_nodes[i].clone());
        weights.push(pos_weights[i].clone());
    }
    GaussLegendre { nodes, weights }
}

/// The n-point rule, cached per (precision, n).
pub fn gauss_legendre<R: Real>(n: usize) -> Arc<GaussLegendre<R>> {
    type Cache = HashMap<(TypeId, usize), Arc<dyn Any + Send + Sync>>;
    static CACHE: OnceLock<Mutex<Cache>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let key = (TypeId::of::<R>(), n);
    if let Some(v) = cache.lock().unwrap().get(&key) {
        return v.clone().downcast::<GaussLegendre<R>>().expect("rule type");
    }
    let rule = Arc::new(build::<R>(n));
    cache.lock().unwrap().insert(key, rule.clone());
    rule
}

impl<R: Real> GaussLegendre<R> {
    /// (node, weight) pairs mapped to [a, b].
    pub fn on(&self, a: &R, b: &R) -> Vec<(R, R)> {
        let two = R::from_i64(2);
        let mid = (a.clone() + b.clone()) / two.clone();
        let half = (b.clone() - a.clone()) / two;
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(x, w)| (mid.clone() + half.clone() * x.clone(), half.clone() * w.clone()))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mp::F192;
    use num_traits::{One, Zero};

    #[test]
    fn integrates_polynomials_exactly() {
        for n in [2usize, 5, 16, 33] {
            let g = gauss_legendre::<f64>(n);
            for deg in 0..2 * n {
                let s: f64 = g.nodes.iter().zip(&g.weights).map(|(x, w)| w * f64::powi(*x, deg as i32)).sum();
                let want = if deg % 2 == 1 { 0.0 } else { 2.0 / (deg as f64 + 1.0) };
                assert!((s - want).abs() < 1e-13, "n={n} deg={deg}: {s}");
            }
        }
    }

    #[test]
    fn high_precision_rule_integrates_exp() {
        let g = gauss_legendre::<F192>(40);
        let mut s = F192::zero();
        for (x, w) in g.nodes.iter().zip(&g.weights) {
            s = s + w.clone() * x.exp();
        }
        let e = F192::one().exp();
        let want = e.clone() - F192::one() / e;
        let diff = (s - want).abs().to_f64();
        assert!(diff < 1e-50, "{diff}");
    }
}
