//! Exact truncated q-series and the partition generating functions built from
//! them: p(n), the σ function in two forms, u_j, α_j, p_od^eu and r_o.

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::{BigRational, Ratio};
use num_traits::{One, Signed, ToPrimitive, Zero};
use rayon::prelude::*;
use serde_json::json;

use crate::error::{Error, Result};
use crate::maass;

/// Grid denominator shared by every exponent in this crate.
pub const GRID: i64 = 48;

/// Truncated series `Σ_{i < order} c_i q^{offset + i}` with exact rational
/// coefficients. Exponents at or beyond `offset + order` are unknown.
#[derive(Clone, Debug, PartialEq)]
pub struct QExpansion {
    offset48: i64,
    coeffs: Vec<BigRational>,
}

fn ratio_of(n: i64, d: i64) -> Ratio<i64> {
    Ratio::new(n, d)
}

impl QExpansion {
    /// Builds a series; the offset denominator must divide 48.
    pub fn new(offset: Ratio<i64>, coeffs: Vec<BigRational>) -> Result<Self> {
        if GRID % offset.denom() != 0 {
            return Err(Error::invalid(format!(
                "offset {offset} is not on the 1/48 grid"
            )));
        }
        Ok(Self {
            offset48: offset.numer() * (GRID / offset.denom()),
            coeffs,
        })
    }

    pub fn from_integers(offset48: i64, coeffs: &[BigInt]) -> Self {
        Self {
            offset48,
            coeffs: coeffs.iter().map(|c| BigRational::from_integer(c.clone())).collect(),
        }
    }

    pub fn from_i64(offset48: i64, coeffs: &[i64]) -> Self {
        Self {
            offset48,
            coeffs: coeffs
                .iter()
                .map(|&c| BigRational::from_integer(BigInt::from(c)))
                .collect(),
        }
    }

    /// The constant series 1 known to the given order.
    pub fn one(order: usize) -> Self {
        let mut c = vec![BigRational::zero(); order];
        if order > 0 {
            c[0] = BigRational::one();
        }
        Self { offset48: 0, coeffs: c }
    }

    pub fn offset(&self) -> Ratio<i64> {
        ratio_of(self.offset48, GRID)
    }

    pub fn offset48(&self) -> i64 {
        self.offset48
    }

    /// Number of known coefficients.
    pub fn order(&self) -> usize {
        self.coeffs.len()
    }

    pub fn coeffs(&self) -> &[BigRational] {
        &self.coeffs
    }

    /// Coefficient of `q^exponent`. Exponents below the offset read as zero;
    /// reading at or past the truncation bound is an error.
    pub fn coeff_at(&self, exponent: Ratio<i64>) -> Result<BigRational> {
        if GRID % exponent.denom() != 0 {
            return Err(Error::invalid(format!("exponent {exponent} is off the grid")));
        }
        let e48 = exponent.numer() * (GRID / exponent.denom());
        let d = e48 - self.offset48;
        if d.rem_euclid(GRID) != 0 {
            return Ok(BigRational::zero());
        }
        if d < 0 {
            return Ok(BigRational::zero());
        }
        let i = (d / GRID) as usize;
        if i >= self.coeffs.len() {
            return Err(Error::Truncated {
                exponent: exponent.to_string(),
                bound: ratio_of(self.offset48 + GRID * self.coeffs.len() as i64, GRID).to_string(),
            });
        }
        Ok(self.coeffs[i].clone())
    }

    fn same_class(&self, other: &Self) -> Result<()> {
        if (self.offset48 - other.offset48).rem_euclid(GRID) != 0 {
            return Err(Error::invalid(format!(
                "exponent classes {} and {} differ modulo 1",
                self.offset(),
                other.offset()
            )));
        }
        Ok(())
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.same_class(other)?;
        let lo = self.offset48.min(other.offset48);
        let end = (self.offset48 + GRID * self.order() as i64)
            .min(other.offset48 + GRID * other.order() as i64);
        let len = ((end - lo) / GRID).max(0) as usize;
        let mut c = vec![BigRational::zero(); len];
        for s in [self, other] {
            let shift = ((s.offset48 - lo) / GRID) as usize;
            for (i, v) in s.coeffs.iter().enumerate() {
                if i + shift < len {
                    c[i + shift] += v;
                }
            }
        }
        Ok(Self { offset48: lo, coeffs: c })
    }

    pub fn neg(&self) -> Self {
        Self {
            offset48: self.offset48,
            coeffs: self.coeffs.iter().map(|c| -c).collect(),
        }
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.add(&other.neg())
    }

    pub fn scale(&self, s: &BigRational) -> Self {
        Self {
            offset48: self.offset48,
            coeffs: self.coeffs.iter().map(|c| c * s).collect(),
        }
    }

    /// Multiply by `q^{shift48/48}`.
    pub fn shift(&self, shift48: i64) -> Self {
        Self {
            offset48: self.offset48 + shift48,
            coeffs: self.coeffs.clone(),
        }
    }

    pub fn mul(&self, other: &Self) -> Self {
        let len = self.order().min(other.order());
        let mut c = vec![BigRational::zero(); len];
        for (i, a) in self.coeffs.iter().take(len).enumerate() {
            if a.is_zero() {
                continue;
            }
            for (j, b) in other.coeffs.iter().take(len - i).enumerate() {
                if !b.is_zero() {
                    c[i + j] += a * b;
                }
            }
        }
        Self {
            offset48: self.offset48 + other.offset48,
            coeffs: c,
        }
    }

    /// Multiplicative inverse; the leading coefficient must be nonzero.
    pub fn inverse(&self) -> Result<Self> {
        let n = self.order();
        if n == 0 || self.coeffs[0].is_zero() {
            return Err(Error::invalid("series with vanishing leading coefficient is not invertible"));
        }
        let a0 = self.coeffs[0].clone();
        let mut b = vec![BigRational::zero(); n];
        b[0] = a0.recip();
        for i in 1..n {
            let mut s = BigRational::zero();
            for k in 1..=i {
                if !self.coeffs[k].is_zero() {
                    s += &self.coeffs[k] * &b[i - k];
                }
            }
            b[i] = -s / &a0;
        }
        Ok(Self {
            offset48: -self.offset48,
            coeffs: b,
        })
    }

    pub fn div(&self, other: &Self) -> Result<Self> {
        Ok(self.mul(&other.inverse()?))
    }

    /// Substitute `q → -q`; only meaningful for integral exponents.
    pub fn negate_q(&self) -> Result<Self> {
        if self.offset48 % GRID != 0 {
            return Err(Error::invalid("q → -q needs an integral offset"));
        }
        let base = self.offset48 / GRID;
        Ok(Self {
            offset48: self.offset48,
            coeffs: self
                .coeffs
                .iter()
                .enumerate()
                .map(|(i, c)| if (base + i as i64).is_odd() { -c } else { c.clone() })
                .collect(),
        })
    }

    /// Substitute `q → q^m`.
    pub fn dilate(&self, m: usize) -> Self {
        assert!(m >= 1);
        let mut c = vec![BigRational::zero(); self.order() * m];
        for (i, v) in self.coeffs.iter().enumerate() {
            c[i * m] = v.clone();
        }
        Self {
            offset48: self.offset48 * m as i64,
            coeffs: c,
        }
    }

    /// Keep only the first `order` coefficients.
    pub fn truncate(&self, order: usize) -> Self {
        Self {
            offset48: self.offset48,
            coeffs: self.coeffs.iter().take(order).cloned().collect(),
        }
    }

    /// Coefficients as integers, failing if any denominator differs from 1.
    pub fn to_integers(&self) -> Result<Vec<BigInt>> {
        self.coeffs
            .iter()
            .enumerate()
            .map(|(i, c)| {
                if c.is_integer() {
                    Ok(c.to_integer())
                } else {
                    Err(Error::check(format!(
                        "coefficient {c} at exponent {} is not an integer",
                        ratio_of(self.offset48 + GRID * i as i64, GRID)
                    )))
                }
            })
            .collect()
    }

    /// JSON export `{ "offset": "p/q", "coeffs": [...], "order": N }`.
    pub fn to_json(&self) -> serde_json::Value {
        json!({
            "offset": format!("{}/{}", self.offset().numer(), self.offset().denom()),
            "coeffs": self.coeffs.iter().map(|c| c.to_string()).collect::<Vec<_>>(),
            "order": self.order(),
        })
    }
}

fn to_expansion(offset48: i64, v: &[BigInt]) -> QExpansion {
    QExpansion::from_integers(offset48, v)
}

/// Multiply an integer series in place by `1 - c q^e`, keeping `len` terms.
fn mul_binomial(a: &mut [BigInt], c: i64, e: usize) {
    if e >= a.len() {
        return;
    }
    for i in (e..a.len()).rev() {
        if !a[i - e].is_zero() {
            let t = &a[i - e] * c;
            a[i] -= t;
        }
    }
}

/// `∏_{j≥1} (1 - s^j q^{m j})`, i.e. `(s q^m; s q^m)_∞`, to the given order.
/// With `s = 1, m = 1` this is `(q;q)_∞`; `s = -1, m = 1` gives `(-q;-q)_∞`.
pub fn pochhammer(a_sign: i32, step: usize, order: usize) -> Result<QExpansion> {
    if order == 0 {
        return Err(Error::invalid("order must be positive"));
    }
    if a_sign != 1 && a_sign != -1 {
        return Err(Error::invalid("sign must be +1 or -1"));
    }
    if step == 0 {
        return Err(Error::invalid("step must be positive"));
    }
    let mut a = vec![BigInt::zero(); order];
    a[0] = BigInt::one();
    let mut j = 1usize;
    while j * step < order {
        let c = if a_sign == -1 && j % 2 == 1 { -1 } else { 1 };
        mul_binomial(&mut a, c, j * step);
        j += 1;
    }
    Ok(to_expansion(0, &a))
}

/// p(0..=n_max) from the pentagonal-number recurrence.
pub fn partitions(n_max: usize) -> Vec<BigInt> {
    let mut p = vec![BigInt::zero(); n_max + 1];
    p[0] = BigInt::one();
    for n in 1..=n_max {
        let mut acc = BigInt::zero();
        let mut k = 1usize;
        loop {
            let g1 = k * (3 * k - 1) / 2;
            if g1 > n {
                break;
            }
            let positive = k % 2 == 1;
            let g2 = k * (3 * k + 1) / 2;
            if positive {
                acc += &p[n - g1];
                if g2 <= n {
                    acc += &p[n - g2];
                }
            } else {
                acc -= &p[n - g1];
                if g2 <= n {
                    acc -= &p[n - g2];
                }
            }
            k += 1;
        }
        p[n] = acc;
    }
    p
}

fn sigma_hyper_ints(order: usize) -> Vec<BigInt> {
    let mut total = vec![BigInt::zero(); order];
    // term_n = q^{n(n+1)/2} / (-q;q)_n, updated by q^n / (1 + q^n)
    let mut term = vec![BigInt::zero(); order];
    term[0] = BigInt::one();
    let mut n = 0usize;
    loop {
        for (t, v) in total.iter_mut().zip(term.iter()) {
            *t += v;
        }
        n += 1;
        if n * (n + 1) / 2 >= order {
            break;
        }
        let mut next = vec![BigInt::zero(); order];
        for i in (n..order).rev() {
            next[i] = term[i - n].clone();
        }
        for i in n..order {
            let prev = next[i - n].clone();
            next[i] -= prev;
        }
        term = next;
    }
    total
}

fn sigma_theta_ints(order: usize) -> Vec<i64> {
    let mut s = vec![0i64; order];
    let ord = order as i64;
    let mut n = 0i64;
    // smallest exponent for given n is n(n+1)/2 (at |j| = n)
    while n * (n + 1) / 2 < ord {
        for j in -n..=n {
            let e = n * (3 * n + 1) / 2 - j * j;
            let sg = if (n + j).is_even() { 1 } else { -1 };
            if e < ord {
                s[e as usize] += sg;
            }
            let e2 = e + 2 * n + 1;
            if e2 < ord {
                s[e2 as usize] -= sg;
            }
        }
        n += 1;
    }
    s
}

/// σ(q) = Σ q^{n(n+1)/2} / (-q;q)_n.
pub fn sigma_hypergeometric(order: usize) -> Result<QExpansion> {
    if order == 0 {
        return Err(Error::invalid("order must be positive"));
    }
    Ok(to_expansion(0, &sigma_hyper_ints(order)))
}

/// σ(q) as the signed double sum over n ≥ 0, |j| ≤ n.
pub fn sigma_theta(order: usize) -> Result<QExpansion> {
    if order == 0 {
        return Err(Error::invalid("order must be positive"));
    }
    Ok(QExpansion::from_i64(0, &sigma_theta_ints(order)))
}

/// Exponent offset β_j of u_j, in 48ths.
pub fn beta48(j: usize) -> i64 {
    [1, 25, 46][j]
}

/// Δ_j = β_j - 1/24, the offset of u_j / η, in 48ths.
pub fn delta48(j: usize) -> i64 {
    beta48(j) - 2
}

pub fn beta(j: usize) -> Ratio<i64> {
    ratio_of(beta48(j), GRID)
}

pub fn delta(j: usize) -> Ratio<i64> {
    ratio_of(delta48(j), GRID)
}

fn check_j(j: usize) -> Result<()> {
    if j > 2 {
        return Err(Error::invalid(format!("component index {j} is not in 0..=2")));
    }
    Ok(())
}

/// Coefficients of `u_j q^{-β_j}` from the parity split of σ(q^{1/2}).
pub fn u_coeffs_from_sigma(j: usize, order: usize) -> Result<Vec<i64>> {
    match j {
        0 => {
            let s = sigma_theta_ints(2 * order);
            Ok((0..order).map(|i| -s[2 * i]).collect())
        }
        1 => {
            let s = sigma_theta_ints(2 * order + 1);
            Ok((0..order).map(|i| s[2 * i + 1]).collect())
        }
        _ => Err(Error::invalid("the σ route only exists for j = 0, 1")),
    }
}

/// Coefficients of `u_j q^{-β_j}` from the shifted-lattice sum.
pub fn u_coeffs_from_lattice(j: usize, order: usize) -> Result<Vec<i64>> {
    check_j(j)?;
    let d = maass::positive_coefficients(j, order);
    d.iter()
        .enumerate()
        .map(|(i, v)| {
            if v.is_integer() {
                Ok(v.to_integer())
            } else {
                Err(Error::check(format!(
                    "lattice coefficient {v} of u_{j} at index {i} is not an integer"
                )))
            }
        })
        .collect()
}

/// u_j as a series on ℤ + β_j. For j ∈ {0, 1} both constructions are run and
/// must agree.
pub fn u_series(j: usize, order: usize) -> Result<QExpansion> {
    check_j(j)?;
    if order == 0 {
        return Err(Error::invalid("order must be positive"));
    }
    let lattice = u_coeffs_from_lattice(j, order)?;
    if j < 2 {
        let sigma = u_coeffs_from_sigma(j, order)?;
        if let Some(i) = (0..order).find(|&i| sigma[i] != lattice[i]) {
            return Err(Error::check(format!(
                "u_{j}: σ route gives {} but the lattice gives {} at index {i}",
                sigma[i], lattice[i]
            )));
        }
    }
    Ok(QExpansion::from_i64(beta48(j), &lattice))
}

/// Exact Σ_i u[i] p[n - i] for n in 0..len.
fn convolve_with_partitions(u: &[i64], p: &[BigInt], len: usize) -> Vec<BigInt> {
    let nz: Vec<(usize, i64)> = u
        .iter()
        .take(len)
        .enumerate()
        .filter(|(_, &c)| c != 0)
        .map(|(i, &c)| (i, c))
        .collect();
    (0..len)
        .into_par_iter()
        .map(|n| {
            let mut acc = BigInt::zero();
            for &(i, c) in &nz {
                if i > n {
                    break;
                }
                acc += &p[n - i] * c;
            }
            acc
        })
        .collect()
}

/// α_j(0..=n_max): coefficients of u_j / η, whose exponents are n + Δ_j.
pub fn alpha(j: usize, n_max: usize) -> Result<Vec<BigInt>> {
    check_j(j)?;
    let len = n_max + 1;
    let u = if j < 2 {
        u_coeffs_from_sigma(j, len)?
    } else {
        u_coeffs_from_lattice(j, len)?
    };
    let p = partitions(n_max);
    Ok(convolve_with_partitions(&u, &p, len))
}

/// α_j via generic series division, for cross-checking [`alpha`].
pub fn alpha_by_division(j: usize, n_max: usize) -> Result<QExpansion> {
    let len = n_max + 1;
    let u = u_series(j, len)?;
    let eta = pochhammer(1, 1, len)?.shift(2);
    u.div(&eta)
}

/// r_o(0..=n_max): partitions into distinct odd parts.
pub fn r_odd_distinct(n_max: usize) -> Vec<BigInt> {
    let len = n_max + 1;
    let mut a = vec![BigInt::zero(); len];
    a[0] = BigInt::one();
    let mut part = 1usize;
    while part < len {
        mul_binomial(&mut a, -1, part);
        part += 2;
    }
    a
}

/// p_od^eu(0..=n_max): partitions with distinct odd parts, every even part
/// exceeding every odd part.
pub fn podeu(n_max: usize) -> Result<Vec<BigInt>> {
    let len = n_max + 1;
    // 2F = (2 - σ(-q) + (-q;-q)_∞) / (q²;q²)_∞
    let sigma = sigma_theta_ints(len);
    let minus_q = pochhammer(-1, 1, len)?.to_integers()?;
    let mut x: Vec<BigInt> = (0..len)
        .map(|i| {
            let s = if i % 2 == 1 { -sigma[i] } else { sigma[i] };
            &minus_q[i] - BigInt::from(s)
        })
        .collect();
    x[0] += 2;
    let p = partitions(n_max / 2);
    let twice: Vec<BigInt> = (0..len)
        .into_par_iter()
        .map(|n| {
            let mut acc = BigInt::zero();
            for k in 0..=n / 2 {
                if !x[n - 2 * k].is_zero() {
                    acc += &p[k] * &x[n - 2 * k];
                }
            }
            acc
        })
        .collect();
    twice
        .into_iter()
        .enumerate()
        .map(|(n, v)| {
            let (q, r) = v.div_rem(&BigInt::from(2));
            if r.is_zero() {
                Ok(q)
            } else {
                Err(Error::check(format!("p_od^eu({n}) is not an integer")))
            }
        })
        .collect()
}

/// Checks 2p_od^eu(2n) = 2p(n) + r_o(2n) + α_0(n) and
/// 2p_od^eu(2n+1) = r_o(2n+1) + α_1(n) for n ≤ n_max.
pub fn check_decomposition(n_max: usize) -> Result<()> {
    let pe = podeu(2 * n_max + 1)?;
    let ro = r_odd_distinct(2 * n_max + 1);
    let p = partitions(n_max);
    let a0 = alpha(0, n_max)?;
    let a1 = alpha(1, n_max)?;
    for n in 0..=n_max {
        let lhs = &pe[2 * n] * 2;
        let rhs = &p[n] * 2 + &ro[2 * n] + &a0[n];
        if lhs != rhs {
            return Err(Error::check(format!(
                "even decomposition fails at n = {n}: {lhs} vs {rhs}"
            )));
        }
        let lhs = &pe[2 * n + 1] * 2;
        let rhs = &ro[2 * n + 1] + &a1[n];
        if lhs != rhs {
            return Err(Error::check(format!(
                "odd decomposition fails at n = {n}: {lhs} vs {rhs}"
            )));
        }
    }
    Ok(())
}

/// Exhaustive count of partitions of n with distinct odd parts and all even
/// parts above all odd parts.
pub fn podeu_brute_force(n: usize) -> u64 {
    // parts are generated in non-increasing order, so every even part must
    // come before the first odd one
    fn rec(rem: usize, max_part: usize, last_odd: usize, seen_odd: bool) -> u64 {
        if rem == 0 {
            return 1;
        }
        let mut count = 0;
        for part in (1..=max_part.min(rem)).rev() {
            if part % 2 == 0 {
                if !seen_odd {
                    count += rec(rem - part, part, last_odd, false);
                }
            } else if !seen_odd || part < last_odd {
                count += rec(rem - part, part, part, true);
            }
        }
        count
    }
    rec(n, n, usize::MAX, false)
}

/// Exhaustive count of partitions of n into distinct odd parts.
pub fn r_odd_brute_force(n: usize) -> u64 {
    fn rec(rem: usize, below: usize) -> u64 {
        if rem == 0 {
            return 1;
        }
        let mut c = 0;
        let mut part = 1;
        while part < below && part <= rem {
            c += rec(rem - part, part);
            part += 2;
        }
        c
    }
    rec(n, n + 1)
}

/// Largest |coefficient| / √(n) over the positive-index coefficients of u_j.
pub fn u_growth_constant(j: usize, order: usize) -> Result<f64> {
    let u = u_coeffs_from_lattice(j, order)?;
    let b = beta(j).to_f64().unwrap_or(0.0);
    Ok(u.iter()
        .enumerate()
        .map(|(i, &c)| (c as f64).abs() / (i as f64 + b).sqrt())
        .fold(0.0, f64::max))
}

/// Ratio of two BigInts as f64 helpers for downstream numerics.
pub fn big_to_f64(x: &BigInt) -> f64 {
    x.to_f64().unwrap_or_else(|| if x.is_negative() { f64::NEG_INFINITY } else { f64::INFINITY })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ints(v: &[i64]) -> Vec<BigInt> {
        v.iter().map(|&x| BigInt::from(x)).collect()
    }

    #[test]
    fn euler_product_head() {
        let e = pochhammer(1, 1, 8).unwrap().to_integers().unwrap();
        assert_eq!(e, ints(&[1, -1, -1, 0, 0, 1, 0, 1]));
    }

    #[test]
    fn minus_q_product_starts_at_one() {
        let e = pochhammer(-1, 1, 6).unwrap().to_integers().unwrap();
        assert_eq!(e[0], BigInt::one());
        // (1+q)(1-q^2)(1+q^3)(1-q^4)(1+q^5)
        assert_eq!(e, ints(&[1, 1, -1, 0, 0, -1]));
    }

    #[test]
    fn even_partition_product_inverts_to_partitions() {
        let inv = pochhammer(1, 2, 41).unwrap().inverse().unwrap().to_integers().unwrap();
        let p = partitions(20);
        for k in 0..=20 {
            assert_eq!(inv[2 * k], p[k]);
            if 2 * k + 1 < inv.len() {
                assert!(inv[2 * k + 1].is_zero());
            }
        }
    }

    #[test]
    fn partition_numbers() {
        let p = partitions(100);
        assert_eq!(p[5], BigInt::from(7));
        assert_eq!(p[100], "190569292".parse::<BigInt>().unwrap());
    }

    #[test]
    fn sigma_routes_agree() {
        let a = sigma_hypergeometric(200).unwrap();
        let b = sigma_theta(200).unwrap();
        assert_eq!(a, b);
        let head = a.to_integers().unwrap();
        assert_eq!(head[..13].to_vec(), ints(&[1, 1, -1, 2, -2, 1, 0, 1, -2, 0, 2, 0, -1]));
    }

    #[test]
    fn reading_past_truncation_fails() {
        let s = sigma_theta(10).unwrap();
        assert!(s.coeff_at(Ratio::from_integer(9)).is_ok());
        assert!(matches!(s.coeff_at(Ratio::from_integer(10)), Err(Error::Truncated { .. })));
        assert_eq!(s.coeff_at(Ratio::from_integer(-3)).unwrap(), BigRational::zero());
    }

    #[test]
    fn mul_propagates_minimum_order() {
        let a = sigma_theta(10).unwrap();
        let b = sigma_theta(6).unwrap();
        assert_eq!(a.mul(&b).order(), 6);
        assert_eq!(a.add(&b.shift(48)).unwrap().order(), 7);
    }

    #[test]
    fn eta_inversion_roundtrip() {
        let eta = pochhammer(1, 1, 60).unwrap().shift(2);
        let prod = eta.mul(&eta.inverse().unwrap());
        assert_eq!(prod, QExpansion::one(60));
    }

    #[test]
    fn u_quotients_match_displayed_expansions() {
        let a0 = alpha(0, 11).unwrap();
        assert_eq!(a0, ints(&[-1, 0, 1, 1, 4, 4, 9, 11, 19, 23, 37, 44]));
        let a1 = alpha(1, 10).unwrap();
        assert_eq!(a1, ints(&[1, 3, 5, 9, 14, 22, 31, 48, 65, 92, 126]));
    }

    #[test]
    fn alpha_fast_path_matches_series_division() {
        for j in 0..3 {
            let fast = alpha(j, 40).unwrap();
            let slow = alpha_by_division(j, 40).unwrap();
            assert_eq!(slow.offset48(), delta48(j));
            assert_eq!(slow.to_integers().unwrap(), fast);
        }
    }

    #[test]
    fn podeu_head_and_brute_force() {
        let v = podeu(40).unwrap();
        assert_eq!(v[..10].to_vec(), ints(&[1, 1, 1, 2, 3, 3, 4, 5, 8, 8]));
        for n in 0..=40 {
            assert_eq!(v[n], BigInt::from(podeu_brute_force(n)), "n = {n}");
        }
    }

    #[test]
    fn r_odd_brute_force_agrees() {
        let v = r_odd_distinct(40);
        for n in 0..=40 {
            assert_eq!(v[n], BigInt::from(r_odd_brute_force(n)), "n = {n}");
        }
    }

    #[test]
    fn decomposition_small() {
        check_decomposition(60).unwrap();
    }

    #[test]
    fn u0_leading_coefficient() {
        let u0 = u_series(0, 5).unwrap();
        assert_eq!(u0.offset(), Ratio::new(1, 48));
        assert_eq!(u0.coeffs()[0], BigRational::from_integer(BigInt::from(-1)));
    }

    #[test]
    fn json_export_shape() {
        let u1 = u_series(1, 3).unwrap();
        let v = u1.to_json();
        assert_eq!(v["offset"], "25/48");
        assert_eq!(v["order"], 3);
        assert_eq!(v["coeffs"][0], "1");
    }
}
