//! Multiplier systems: Gauss sums of the lattice, the vector multiplier of
//! (U₀, U₁, U₂), Dedekind sums, the eta multiplier and the circle-method
//! matrices ψ_{h,k}.
//!
//! Every Gauss sum is a sum of 48|c|-th roots of unity, so it is first
//! tallied exactly as a [`CyclotomicSum`] and only then evaluated in the
//! requested precision.

use std::collections::BTreeMap;

use num_complex::{Complex, Complex64};
use num_integer::Integer;
use num_rational::Ratio;
use num_traits::{One, Zero};
use serde_json::json;

use crate::error::{Error, Result};
use crate::maass::{family, ShiftVector};
use crate::mp::Real;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct ModularMatrix {
    pub a: i64,
    pub b: i64,
    pub c: i64,
    pub d: i64,
}

impl ModularMatrix {
    pub fn new(a: i64, b: i64, c: i64, d: i64) -> Result<Self> {
        if a * d - b * c != 1 {
            return Err(Error::invalid(format!(
                "({a} {b}; {c} {d}) has determinant {} ≠ 1",
                a * d - b * c
            )));
        }
        Ok(Self { a, b, c, d })
    }

    pub const IDENTITY: Self = Self { a: 1, b: 0, c: 0, d: 1 };
    pub const S: Self = Self { a: 0, b: -1, c: 1, d: 0 };
    pub const T: Self = Self { a: 1, b: 1, c: 0, d: 1 };

    pub fn mul(&self, o: &Self) -> Self {
        Self {
            a: self.a * o.a + self.b * o.c,
            b: self.a * o.b + self.b * o.d,
            c: self.c * o.a + self.d * o.c,
            d: self.c * o.b + self.d * o.d,
        }
    }

    pub fn neg(&self) -> Self {
        Self { a: -self.a, b: -self.b, c: -self.c, d: -self.d }
    }
}

/// (h, k, h′) with hh′ ≡ −1 (mod k) and M_{h,k} = (h, −(hh′+1)/k; k, −h′).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct ModularTriple {
    pub h: i64,
    pub k: i64,
    pub h_prime: i64,
    pub matrix: ModularMatrix,
}

impl ModularTriple {
    pub fn new(h: i64, k: i64) -> Result<Self> {
        if k < 1 || h < 0 || h >= k.max(1) || h.gcd(&k) != 1 {
            return Err(Error::invalid(format!("need 0 ≤ h < k with gcd(h, k) = 1, got ({h}, {k})")));
        }
        let h_prime = if k == 1 { 0 } else { (-inverse_mod(h, k)).rem_euclid(k) };
        let matrix = ModularMatrix::new(h, -(h * h_prime + 1) / k, k, -h_prime)?;
        Ok(Self { h, k, h_prime, matrix })
    }

    /// All triples with the given denominator, ordered by h.
    pub fn all_for(k: i64) -> Vec<Self> {
        (0..k).filter_map(|h| Self::new(h, k).ok()).collect()
    }
}

fn inverse_mod(a: i64, m: i64) -> i64 {
    let e = a.extended_gcd(&m);
    e.x.rem_euclid(m)
}

/// Σ count·e^{2πi e/order} with an overall factor scale_num/(scale_den·√96).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CyclotomicSum {
    pub order: i64,
    pub terms: BTreeMap<i64, i64>,
    /// The sum carries a factor 1/(denominator·√96) when `gauss` is set.
    pub denominator: i64,
    pub gauss: bool,
}

impl CyclotomicSum {
    fn zero(order: i64) -> Self {
        Self { order, terms: BTreeMap::new(), denominator: 1, gauss: false }
    }

    fn add_term(&mut self, e: i64, count: i64) {
        let e = e.rem_euclid(self.order);
        let v = self.terms.entry(e).or_insert(0);
        *v += count;
        if *v == 0 {
            self.terms.remove(&e);
        }
    }

    /// Adds `sign·other`; both sides must share order and normalisation.
    fn accumulate(&mut self, other: &Self, sign: i64) {
        let l = self.order.lcm(&other.order);
        if l != self.order {
            let f = l / self.order;
            let old = std::mem::take(&mut self.terms);
            self.order = l;
            for (e, c) in old {
                self.add_term(e * f, c);
            }
        }
        let f = l / other.order;
        for (&e, &c) in &other.terms {
            self.add_term(e * f, sign * c);
        }
    }

    pub fn eval<R: Real>(&self) -> Complex<R> {
        let mut acc = Complex::new(R::zero(), R::zero());
        for (&e, &c) in &self.terms {
            let z = R::cis_turn(e, self.order);
            acc = acc + z.scale(R::from_i64(c));
        }
        let mut s = R::one() / R::from_i64(self.denominator);
        if self.gauss {
            s = s / R::from_i64(96).sqrt();
        }
        acc.scale(s)
    }
}

/// 48·Q(x) for scaled coordinates.
fn q48(x: i64, y: i64) -> i64 {
    x * x - 6 * y * y
}

/// ψ_{M,Q}(μ, ν) as an exact root-of-unity sum.
pub fn gauss_multiplier_exact(m: &ModularMatrix, mu: ShiftVector, nu: ShiftVector) -> CyclotomicSum {
    let ModularMatrix { a, b, c, d } = *m;
    if c == 0 {
        let mut s = CyclotomicSum::zero(48);
        let target = if d > 0 { nu } else { ShiftVector::new(-nu.a, -nu.b) };
        if mu == target {
            // e^{2πi ab Q(μ)}
            s.add_term(a * b * mu.q48(), 1);
        }
        return s;
    }
    let ac = c.abs();
    let order = 48 * ac;
    let mut s = CyclotomicSum::zero(order);
    s.denominator = ac;
    s.gauss = true;
    let q_nu = q48(nu.a, nu.b);
    let sign = c.signum();
    let mut counts = vec![0i64; order as usize];
    for m1 in 0..ac {
        let x = mu.a + 24 * m1;
        for m2 in 0..ac {
            let y = mu.b + 4 * m2;
            // 48·(aQ(x) − B(x,ν) + dQ(ν)) with B(x,ν) = (2XX_ν − 12YY_ν)/48
            let e = a * q48(x, y) - (2 * x * nu.a - 12 * y * nu.b) + d * q_nu;
            counts[(sign * e).rem_euclid(order) as usize] += 1;
        }
    }
    for (e, &n) in counts.iter().enumerate() {
        if n != 0 {
            s.terms.insert(e as i64, n);
        }
    }
    s
}

pub fn gauss_multiplier(m: &ModularMatrix, mu: ShiftVector, nu: ShiftVector) -> Complex64 {
    gauss_multiplier_exact(m, mu, nu).eval::<f64>()
}

/// The matrix Ψ_M(j, ℓ) as exact root-of-unity sums, using the
/// representative ν = S_ℓ^+[rep].
pub fn psi_exact(m: &ModularMatrix, rep: usize) -> [[CyclotomicSum; 3]; 3] {
    let entry = |j: usize, l: usize| {
        let nu = family(l).plus[rep];
        let mut acc = CyclotomicSum::zero(48);
        let mut first = true;
        for (mu, s) in family(j).signed() {
            let g = gauss_multiplier_exact(m, mu, nu);
            if first {
                acc.denominator = g.denominator;
                acc.gauss = g.gauss;
                first = false;
            }
            acc.accumulate(&g, s);
        }
        acc
    };
    [
        [entry(0, 0), entry(0, 1), entry(0, 2)],
        [entry(1, 0), entry(1, 1), entry(1, 2)],
        [entry(2, 0), entry(2, 1), entry(2, 2)],
    ]
}

/// A 3×3 complex matrix acting on (U₀, U₁, U₂).
#[derive(Clone, Debug, PartialEq)]
pub struct MultiplierMatrix {
    pub entries: [[Complex64; 3]; 3],
}

impl MultiplierMatrix {
    pub fn identity() -> Self {
        let mut e = [[Complex64::zero(); 3]; 3];
        for (i, row) in e.iter_mut().enumerate() {
            row[i] = Complex64::one();
        }
        Self { entries: e }
    }

    pub fn mul(&self, o: &Self) -> Self {
        let mut e = [[Complex64::zero(); 3]; 3];
        for (i, row) in e.iter_mut().enumerate() {
            for (l, v) in row.iter_mut().enumerate() {
                *v = (0..3).map(|m| self.entries[i][m] * o.entries[m][l]).sum();
            }
        }
        Self { entries: e }
    }

    pub fn scale(&self, z: Complex64) -> Self {
        let mut e = self.entries;
        for row in e.iter_mut() {
            for v in row.iter_mut() {
                *v *= z;
            }
        }
        Self { entries: e }
    }

    pub fn max_diff(&self, o: &Self) -> f64 {
        let mut m: f64 = 0.0;
        for i in 0..3 {
            for l in 0..3 {
                m = m.max((self.entries[i][l] - o.entries[i][l]).norm());
            }
        }
        m
    }

    pub fn adjoint(&self) -> Self {
        let mut e = [[Complex64::zero(); 3]; 3];
        for (i, row) in e.iter_mut().enumerate() {
            for (l, v) in row.iter_mut().enumerate() {
                *v = self.entries[l][i].conj();
            }
        }
        Self { entries: e }
    }

    /// max |(M M*)_{il} − δ_{il}|.
    pub fn unitarity_defect(&self) -> f64 {
        self.mul(&self.adjoint()).max_diff(&Self::identity())
    }

    pub fn determinant(&self) -> Complex64 {
        let e = &self.entries;
        e[0][0] * (e[1][1] * e[2][2] - e[1][2] * e[2][1])
            - e[0][1] * (e[1][0] * e[2][2] - e[1][2] * e[2][0])
            + e[0][2] * (e[1][0] * e[2][1] - e[1][1] * e[2][0])
    }

    pub fn to_json(&self) -> serde_json::Value {
        let rows: Vec<_> = self
            .entries
            .iter()
            .map(|row| row.iter().map(|z| json!([z.re, z.im])).collect::<Vec<_>>())
            .collect();
        json!(rows)
    }
}

fn eval_matrix(m: &[[CyclotomicSum; 3]; 3]) -> MultiplierMatrix {
    let mut e = [[Complex64::zero(); 3]; 3];
    for i in 0..3 {
        for l in 0..3 {
            e[i][l] = m[i][l].eval::<f64>();
        }
    }
    MultiplierMatrix { entries: e }
}

/// Ψ_M, checked to be independent of the representative ν ∈ S_ℓ^+.
pub fn psi_vector(m: &ModularMatrix) -> Result<MultiplierMatrix> {
    let base = eval_matrix(&psi_exact(m, 0));
    for rep in 1..4 {
        let other = eval_matrix(&psi_exact(m, rep));
        let diff = base.max_diff(&other);
        if diff > 1e-12 {
            return Err(Error::check(format!(
                "Ψ_M for {m:?} depends on the representative (difference {diff:.3e})"
            )));
        }
    }
    Ok(base)
}

/// s(h, k) = Σ_{r=1}^{k−1} (r/k)(hr/k − ⌊hr/k⌋ − 1/2).
pub fn dedekind_sum(h: i64, k: i64) -> Result<Ratio<i64>> {
    if k < 1 {
        return Err(Error::invalid("Dedekind sum needs k ≥ 1"));
    }
    // k²·s = Σ r·(hr mod k) − k·Σ r/2
    let mut acc: i128 = 0;
    for r in 1..k {
        acc += (r as i128) * ((h * r).rem_euclid(k) as i128);
    }
    let kk = k as i128;
    // Σ_{r<k} r = k(k−1)/2
    let num = 2 * acc - kk * (kk * (kk - 1) / 2);
    let den = 2 * kk * kk;
    let g = num.gcd(&den);
    Ok(Ratio::new((num / g) as i64, (den / g) as i64))
}

/// ν_η(M) in turns: (a+d)/(24c) − 1/8 + s(−d, c)/2.
pub fn eta_multiplier_turn(m: &ModularMatrix) -> Result<Ratio<i64>> {
    if m.c <= 0 {
        return Err(Error::invalid("the eta multiplier is defined here only for c > 0"));
    }
    let s = dedekind_sum(-m.d, m.c)?;
    Ok(Ratio::new(m.a + m.d, 24 * m.c) - Ratio::new(1, 8) + s / 2)
}

pub fn eta_multiplier(m: &ModularMatrix) -> Result<Complex64> {
    let t = eta_multiplier_turn(m)?;
    Ok(f64::cis_turn(*t.numer(), *t.denom()))
}

/// Turn of the scalar e^{−πi/4}/ν_η(M_{h,k}).
pub fn circle_phase_turn(t: &ModularTriple) -> Ratio<i64> {
    let eta = eta_multiplier_turn(&t.matrix).expect("M_{h,k} has c = k > 0");
    -Ratio::new(1, 8) - eta
}

/// ψ_{h,k}(j, ℓ) = e^{−πi/4} Ψ_{M_{h,k}}(j, ℓ)/ν_η(M_{h,k}).
pub fn circle_multiplier(t: &ModularTriple) -> Result<MultiplierMatrix> {
    let psi = psi_vector(&t.matrix)?;
    let ph = circle_phase_turn(t);
    Ok(psi.scale(f64::cis_turn(*ph.numer(), *ph.denom())))
}

/// The translation multiplier diag(ζ₄₈, ζ₄₈²⁵, ζ₂₄²³).
pub fn psi_t_reference() -> MultiplierMatrix {
    let mut m = MultiplierMatrix { entries: [[Complex64::zero(); 3]; 3] };
    m.entries[0][0] = f64::cis_turn(1, 48);
    m.entries[1][1] = f64::cis_turn(25, 48);
    m.entries[2][2] = f64::cis_turn(23, 24);
    m
}

/// The inversion multiplier ½(1 1 √2; 1 1 −√2; √2 −√2 0).
pub fn psi_s_reference() -> MultiplierMatrix {
    let r = std::f64::consts::SQRT_2;
    let v = |x: f64| Complex64::new(x / 2.0, 0.0);
    MultiplierMatrix {
        entries: [
            [v(1.0), v(1.0), v(r)],
            [v(1.0), v(1.0), v(-r)],
            [v(r), v(-r), v(0.0)],
        ],
    }
}

/// The full 96×96 matrix ψ_{M,Q}(μ, ν).
pub fn gauss_matrix(m: &ModularMatrix) -> Vec<Vec<Complex64>> {
    let all = ShiftVector::all();
    all.iter()
        .map(|&mu| all.iter().map(|&nu| gauss_multiplier(m, mu, nu)).collect())
        .collect()
}

/// Dedekind eta by its product, for τ in the upper half-plane.
pub fn eta_product(tau: Complex64) -> Complex64 {
    let q = (Complex64::i() * 2.0 * std::f64::consts::PI * tau).exp();
    let mut acc = (Complex64::i() * 2.0 * std::f64::consts::PI * tau / 24.0).exp();
    let mut qn = q;
    for _ in 0..100_000 {
        acc *= Complex64::one() - qn;
        qn *= q;
        if qn.norm() < 1e-18 {
            break;
        }
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn translation_multiplier() {
        let psi = psi_vector(&ModularMatrix::T).unwrap();
        assert!(psi.max_diff(&psi_t_reference()) < 1e-12);
    }

    #[test]
    fn inversion_multiplier() {
        let psi = psi_vector(&ModularMatrix::S).unwrap();
        assert!(psi.max_diff(&psi_s_reference()) < 1e-12);
        assert!(psi.mul(&psi).max_diff(&MultiplierMatrix::identity()) < 1e-12);
    }

    #[test]
    fn gauss_translation_phase() {
        let mu = ShiftVector::new(7, 0);
        let z = gauss_multiplier(&ModularMatrix::T, mu, mu);
        assert!((z - f64::cis_turn(49, 48)).norm() < 1e-15);
    }

    #[test]
    fn gauss_inversion_closed_form() {
        for mu in [ShiftVector::new(7, 0), ShiftVector::new(10, 3)] {
            for nu in [ShiftVector::new(1, 2), ShiftVector::new(13, 1)] {
                let z = gauss_multiplier(&ModularMatrix::S, mu, nu);
                // e^{−2πi(24μ₁ν₁ − 4μ₂ν₂)} with 24μ₁ν₁ = aa'/24, 4μ₂ν₂ = bb'/4
                let want = f64::cis_turn(-(mu.a * nu.a - 6 * mu.b * nu.b), 24) / (4.0 * 6f64.sqrt());
                assert!((z - want).norm() < 1e-14);
            }
        }
    }

    #[test]
    fn dedekind_values() {
        assert_eq!(dedekind_sum(0, 1).unwrap(), Ratio::from_integer(0));
        assert_eq!(dedekind_sum(1, 3).unwrap(), Ratio::new(1, 18));
    }

    #[test]
    fn triples() {
        let t = ModularTriple::new(1, 2).unwrap();
        assert_eq!(t.h_prime, 1);
        assert_eq!(t.matrix, ModularMatrix { a: 1, b: -1, c: 2, d: -1 });
        let t = ModularTriple::new(0, 1).unwrap();
        assert_eq!(t.matrix, ModularMatrix::S);
        assert!(ModularTriple::new(2, 4).is_err());
    }

    #[test]
    fn circle_multiplier_at_zero_is_inversion() {
        let t = ModularTriple::new(0, 1).unwrap();
        let psi = circle_multiplier(&t).unwrap();
        assert!(psi.max_diff(&psi_vector(&ModularMatrix::S).unwrap()) == 0.0);
    }

    #[test]
    fn eta_inversion() {
        let tau = Complex64::new(0.0, 1.3);
        let lhs = eta_product(-1.0 / tau);
        let rhs = (-Complex64::i() * tau).sqrt() * eta_product(tau);
        assert!((lhs - rhs).norm() < 1e-12);
        let nu = eta_multiplier(&ModularMatrix::S).unwrap();
        assert!((nu - f64::cis_turn(-1, 8)).norm() < 1e-15);
    }

    #[test]
    fn eta_transformation_at_one_half() {
        let t = ModularTriple::new(1, 2).unwrap();
        let z = 0.7;
        let lhs = eta_product(Complex64::new(0.5, z / 4.0));
        let nu = eta_multiplier(&t.matrix).unwrap();
        let root = (Complex64::i() * 2.0 / z).sqrt();
        let rhs = nu * root * eta_product(Complex64::new(0.5, 1.0 / z));
        assert!((lhs - rhs).norm() < 1e-10, "{lhs} vs {rhs}");
    }
}
