//! Real scalars for the numeric kernels.
//!
//! [`Real`] abstracts over `f64` and [`Fixed`], a binary fixed-point number
//! with `B` fractional bits backed by a `BigInt`. Fixed point suits the
//! circle-method sums: every term is eventually multiplied into a quantity of
//! known size, so a uniform absolute error of `2^-B` is what matters.

use std::collections::HashMap;
use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Rem, Sub};
use std::sync::Mutex;

use num_bigint::{BigInt, Sign};
use num_complex::Complex;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{Num, One, Signed, ToPrimitive, Zero};

/// Scalar field used by generic numeric code.
pub trait Real:
    Clone
    + Send
    + Sync
    + fmt::Debug
    + PartialOrd
    + Num
    + Neg<Output = Self>
    + 'static
{
    fn from_f64(x: f64) -> Self;
    fn from_i64(x: i64) -> Self;
    /// Nearest representable value to `p/q`.
    fn from_ratio(p: &BigInt, q: &BigInt) -> Self;
    fn to_f64(&self) -> f64;
    /// The exact value as a rational.
    fn to_ratio(&self) -> BigRational;
    fn pi() -> Self;
    fn sqrt(&self) -> Self;
    fn exp(&self) -> Self;
    fn abs(&self) -> Self;
    /// `e^{2πi p/q}`, with the argument reduced exactly before rounding.
    fn cis_turn(p: i64, q: i64) -> Complex<Self>;

    fn sinh(&self) -> Self {
        let e = self.exp();
        let ei = Self::one() / e.clone();
        (e - ei) / Self::from_i64(2)
    }

    fn powi(&self, n: u32) -> Self {
        let mut acc = Self::one();
        let mut base = self.clone();
        let mut n = n;
        while n > 0 {
            if n & 1 == 1 {
                acc = acc * base.clone();
            }
            base = base.clone() * base;
            n >>= 1;
        }
        acc
    }
}

impl Real for f64 {
    fn from_f64(x: f64) -> Self {
        x
    }
    fn from_i64(x: i64) -> Self {
        x as f64
    }
    fn from_ratio(p: &BigInt, q: &BigInt) -> Self {
        ratio_to_f64(p, q)
    }
    fn to_f64(&self) -> f64 {
        *self
    }
    fn to_ratio(&self) -> BigRational {
        BigRational::from_float(*self).expect("finite value")
    }
    fn pi() -> Self {
        std::f64::consts::PI
    }
    fn sqrt(&self) -> Self {
        f64::sqrt(*self)
    }
    fn exp(&self) -> Self {
        f64::exp(*self)
    }
    fn sinh(&self) -> Self {
        f64::sinh(*self)
    }
    fn abs(&self) -> Self {
        f64::abs(*self)
    }
    fn cis_turn(p: i64, q: i64) -> Complex<Self> {
        let (p, q) = reduce_turn(p, q);
        let x = 2.0 * std::f64::consts::PI * (p as f64) / (q as f64);
        let (s, c) = x.sin_cos();
        Complex::new(c, s)
    }
}

/// `p/q` as f64 without overflowing on huge numerators and denominators.
pub fn ratio_to_f64(p: &BigInt, q: &BigInt) -> f64 {
    let pb = p.bits() as i64;
    let qb = q.bits() as i64;
    if pb < 1000 && qb < 1000 {
        if let (Some(a), Some(b)) = (p.to_f64(), q.to_f64()) {
            if a.is_finite() && b.is_finite() && b != 0.0 {
                return a / b;
            }
        }
    }
    // Scale so the quotient keeps 64 significant bits.
    let shift = 64 - (pb - qb);
    let num = if shift >= 0 {
        p << shift as usize
    } else {
        p >> (-shift) as usize
    };
    let v = (num / q).to_f64().unwrap_or(f64::NAN);
    v * 2f64.powi(-shift as i32)
}

/// Reduce `p/q` to the representative in `[-1/2, 1/2)`, keeping `q > 0`.
fn reduce_turn(p: i64, q: i64) -> (i64, i64) {
    assert!(q != 0, "zero denominator in turn");
    let (mut p, mut q) = if q < 0 { (-p, -q) } else { (p, q) };
    let g = p.gcd(&q);
    if g > 1 {
        p /= g;
        q /= g;
    }
    let mut r = p.rem_euclid(q);
    if 2 * r >= q {
        r -= q;
    }
    (r, q)
}

/// Fixed-point real `v / 2^B`.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Fixed<const B: u32>(BigInt);

impl<const B: u32> fmt::Debug for Fixed<B> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Fixed<{}>({:e})", B, self.to_f64())
    }
}

impl<const B: u32> Fixed<B> {
    pub fn raw(&self) -> &BigInt {
        &self.0
    }

    pub fn from_raw(v: BigInt) -> Self {
        Fixed(v)
    }

    /// Round to the nearest integer.
    pub fn round(&self) -> BigInt {
        let half = BigInt::one() << (B as usize - 1);
        (&self.0 + half) >> B as usize
    }
}

impl<const B: u32> Zero for Fixed<B> {
    fn zero() -> Self {
        Fixed(BigInt::zero())
    }
    fn is_zero(&self) -> bool {
        self.0.is_zero()
    }
}

impl<const B: u32> One for Fixed<B> {
    fn one() -> Self {
        Fixed(BigInt::one() << B as usize)
    }
}

impl<const B: u32> Add for Fixed<B> {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Fixed(self.0 + o.0)
    }
}

impl<const B: u32> Sub for Fixed<B> {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        Fixed(self.0 - o.0)
    }
}

impl<const B: u32> Mul for Fixed<B> {
    type Output = Self;
    fn mul(self, o: Self) -> Self {
        Fixed((self.0 * o.0) >> B as usize)
    }
}

impl<const B: u32> Div for Fixed<B> {
    type Output = Self;
    fn div(self, o: Self) -> Self {
        assert!(!o.0.is_zero(), "fixed-point division by zero");
        Fixed((self.0 << B as usize) / o.0)
    }
}

impl<const B: u32> Rem for Fixed<B> {
    type Output = Self;
    fn rem(self, o: Self) -> Self {
        Fixed(self.0 % o.0)
    }
}

impl<const B: u32> Neg for Fixed<B> {
    type Output = Self;
    fn neg(self) -> Self {
        Fixed(-self.0)
    }
}

impl<const B: u32> Num for Fixed<B> {
    type FromStrRadixErr = std::num::ParseFloatError;
    fn from_str_radix(s: &str, _radix: u32) -> Result<Self, Self::FromStrRadixErr> {
        s.parse::<f64>().map(<Self as Real>::from_f64)
    }
}

const GUARD: u32 = 32;

fn mul_raw(a: &BigInt, b: &BigInt, bits: u32) -> BigInt {
    (a * b) >> bits as usize
}

fn atan_inv_raw(n: u64, bits: u32) -> BigInt {
    let mut term = (BigInt::one() << bits as usize) / n;
    let n2 = BigInt::from(n) * n;
    let mut sum = BigInt::zero();
    let mut k = 0u64;
    while !term.is_zero() {
        let t = &term / (2 * k + 1);
        if k % 2 == 0 {
            sum += t;
        } else {
            sum -= t;
        }
        term /= &n2;
        k += 1;
    }
    sum
}

static PI_CACHE: Mutex<Option<HashMap<u32, BigInt>>> = Mutex::new(None);
static LN2_CACHE: Mutex<Option<HashMap<u32, BigInt>>> = Mutex::new(None);

fn with_cache(
    slot: &Mutex<Option<HashMap<u32, BigInt>>>,
    bits: u32,
    f: impl Fn(u32) -> BigInt,
) -> BigInt {
    {
        let guard = slot.lock().expect("constant cache poisoned");
        if let Some(v) = guard.as_ref().and_then(|m| m.get(&bits)) {
            return v.clone();
        }
    }
    let v = f(bits);
    slot.lock()
        .expect("constant cache poisoned")
        .get_or_insert_with(HashMap::new)
        .insert(bits, v.clone());
    v
}

/// π with `bits` fractional bits.
pub fn pi_raw(bits: u32) -> BigInt {
    with_cache(&PI_CACHE, bits, |bits| {
        let w = bits + GUARD;
        let v = atan_inv_raw(5, w) * 16u32 - atan_inv_raw(239, w) * 4u32;
        v >> GUARD as usize
    })
}

/// ln 2 with `bits` fractional bits.
pub fn ln2_raw(bits: u32) -> BigInt {
    with_cache(&LN2_CACHE, bits, |bits| {
        let w = bits + GUARD;
        let one = BigInt::one() << w as usize;
        let mut sum = BigInt::zero();
        let mut k = 1u64;
        loop {
            let t = (&one >> k as usize) / k;
            if t.is_zero() {
                break;
            }
            sum += t;
            k += 1;
        }
        sum >> GUARD as usize
    })
}

/// e^x for a fixed-point argument with `bits` fractional bits.
pub fn exp_raw(x: &BigInt, bits: u32) -> BigInt {
    let w = bits + GUARD;
    let xw = x << GUARD as usize;
    let ln2 = ln2_raw(w);
    // x = n ln2 + r with |r| <= ln2/2
    let (q, _) = (&xw + (&ln2 >> 1usize)).div_mod_floor(&ln2);
    let n = q.to_i64().expect("exponent out of range");
    let r = &xw - &q * &ln2;
    let s = 12u32;
    let r = r >> s as usize;
    let one = BigInt::one() << w as usize;
    let mut sum = one.clone();
    let mut term = one;
    let mut k = 1u32;
    loop {
        term = mul_raw(&term, &r, w) / k;
        if term.is_zero() {
            break;
        }
        sum += &term;
        k += 1;
    }
    for _ in 0..s {
        sum = mul_raw(&sum, &sum, w);
    }
    let shifted = if n >= 0 {
        sum << n as usize
    } else {
        sum >> (-n) as usize
    };
    shifted >> GUARD as usize
}

/// (cos 2πx, sin 2πx) for x = p/q, both with `bits` fractional bits.
pub fn cis_turn_raw(p: i64, q: i64, bits: u32) -> (BigInt, BigInt) {
    let (p, q) = reduce_turn(p, q);
    if p == 0 {
        return (BigInt::one() << bits as usize, BigInt::zero());
    }
    let w = bits + GUARD;
    let s = 12u32;
    // θ / 2^s with θ = 2π p / q in [-π, π)
    let theta = (pi_raw(w) * (2 * p)) / q;
    let t = theta >> s as usize;
    let one = BigInt::one() << w as usize;
    let t2 = mul_raw(&t, &t, w);
    let mut c = one.clone();
    let mut sn = t.clone();
    let mut cterm = one;
    let mut sterm = t;
    let mut k = 1u64;
    loop {
        cterm = -mul_raw(&cterm, &t2, w) / ((2 * k - 1) * (2 * k));
        sterm = -mul_raw(&sterm, &t2, w) / ((2 * k) * (2 * k + 1));
        if cterm.is_zero() && sterm.is_zero() {
            break;
        }
        c += &cterm;
        sn += &sterm;
        k += 1;
    }
    for _ in 0..s {
        let nc = mul_raw(&c, &c, w) - mul_raw(&sn, &sn, w);
        let ns = mul_raw(&c, &sn, w) << 1usize;
        c = nc;
        sn = ns;
    }
    (c >> GUARD as usize, sn >> GUARD as usize)
}

impl<const B: u32> Real for Fixed<B> {
    fn from_f64(x: f64) -> Self {
        if x == 0.0 || !x.is_finite() {
            assert!(x.is_finite(), "non-finite value converted to fixed point");
            return Self::zero();
        }
        let bits = x.abs().to_bits();
        let exp = ((bits >> 52) & 0x7ff) as i64;
        let frac = bits & ((1u64 << 52) - 1);
        let (mant, e) = if exp == 0 {
            (frac, -1074)
        } else {
            (frac | (1u64 << 52), exp - 1075)
        };
        let m = BigInt::from(mant);
        let shift = e + B as i64;
        let v = if shift >= 0 {
            m << shift as usize
        } else {
            m >> (-shift) as usize
        };
        Fixed(if x < 0.0 { -v } else { v })
    }

    fn from_i64(x: i64) -> Self {
        Fixed(BigInt::from(x) << B as usize)
    }

    fn from_ratio(p: &BigInt, q: &BigInt) -> Self {
        Fixed((p << B as usize) / q)
    }

    fn to_f64(&self) -> f64 {
        let nb = self.0.bits() as i64;
        if nb == 0 {
            return 0.0;
        }
        let shift = (nb - 64).max(0);
        let top = (&self.0 >> shift as usize).to_f64().unwrap_or(f64::NAN);
        let e = shift - B as i64;
        // Split the power to stay inside the f64 exponent range.
        let half = (e / 2) as i32;
        top * 2f64.powi(half) * 2f64.powi(e as i32 - half)
    }

    fn to_ratio(&self) -> BigRational {
        BigRational::new(self.0.clone(), BigInt::one() << B as usize)
    }

    fn pi() -> Self {
        Fixed(pi_raw(B))
    }

    fn sqrt(&self) -> Self {
        assert!(self.0.sign() != Sign::Minus, "square root of negative value");
        Fixed((&self.0 << B as usize).sqrt())
    }

    fn exp(&self) -> Self {
        Fixed(exp_raw(&self.0, B))
    }

    fn abs(&self) -> Self {
        Fixed(self.0.abs())
    }

    fn cis_turn(p: i64, q: i64) -> Complex<Self> {
        let (c, s) = cis_turn_raw(p, q, B);
        Complex::new(Fixed(c), Fixed(s))
    }
}

/// Fixed point with 192 fractional bits.
pub type F192 = Fixed<192>;
/// Fixed point with 320 fractional bits.
pub type F320 = Fixed<320>;
/// Fixed point with 448 fractional bits.
pub type F448 = Fixed<448>;
/// Fixed point with 640 fractional bits.
pub type F640 = Fixed<640>;

#[cfg(test)]
mod tests {
    use super::*;

    type F = Fixed<256>;

    #[test]
    fn pi_digits() {
        let p = F::pi();
        assert!((p.to_f64() - std::f64::consts::PI).abs() < 1e-15);
        // 355/113 agrees with π to about 2.7e-7
        let d = (p - F::from_ratio(&BigInt::from(355), &BigInt::from(113))).to_f64();
        assert!((d + 2.667e-7).abs() < 1e-9);
    }

    #[test]
    fn exp_and_log_identities() {
        let one = F::one();
        let e = one.exp();
        assert!((e.to_f64() - std::f64::consts::E).abs() < 1e-15);
        let x = F::from_f64(37.25);
        let y = F::from_f64(-37.25);
        let prod = x.exp() * y.exp();
        assert!((prod - F::one()).abs().to_f64() < 1e-40);
        let big = F::from_i64(200).exp();
        assert!((big.to_f64() / 200f64.exp() - 1.0).abs() < 1e-13);
    }

    #[test]
    fn sqrt_squares_back() {
        let x = F::from_f64(2.0);
        let r = x.sqrt();
        let back = r.clone() * r;
        assert!((back - F::from_i64(2)).abs().to_f64() < 1e-70);
    }

    #[test]
    fn cis_turn_matches_f64_and_is_unit() {
        for &(p, q) in &[(1, 48), (25, 48), (-7, 24), (5, 12), (11, 96), (3, 4), (1, 2)] {
            let z = F::cis_turn(p, q);
            let w = f64::cis_turn(p, q);
            assert!((z.re.to_f64() - w.re).abs() < 1e-15);
            assert!((z.im.to_f64() - w.im).abs() < 1e-15);
            let n = z.re.clone() * z.re + z.im.clone() * z.im;
            assert!((n - F::one()).abs().to_f64() < 1e-70);
        }
    }

    #[test]
    fn f64_roundtrip() {
        for &x in &[1.5, -3.25e-20, 6.02e23, 1e-300] {
            let f = F::from_f64(x);
            if x.abs() > 1e-70 {
                assert_eq!(f.to_f64(), x);
            }
        }
    }

    #[test]
    fn ratio_to_f64_handles_huge_operands() {
        let p = BigInt::from(3) << 5000usize;
        let q = BigInt::from(2) << 5000usize;
        assert_eq!(ratio_to_f64(&p, &q), 1.5);
    }
}
