//! The integral kernel Φ_{ℓ,h′/k}(t) = Σ*_{m ∈ ℤ+β_ℓ} d_ℓ(m) e^{2πih′m/k}/(t − m).
//!
//! Two independent routes are provided. The Euler–Maclaurin closed form
//! gives the aggregated Taylor coefficients Σ_ℓ Ψ_{M_{h,k}}(j,ℓ) Φ^{(r)}(0)
//! exactly (rational times π^{2r+2} when k = 1). The symmetric-sum route
//! evaluates Φ itself: the conditionally convergent part Σ* d e/m is
//! summed strip by strip over the lattice with digamma functions, and the
//! remainder converges absolutely.

use std::collections::{BTreeMap, HashMap};
use std::sync::{Arc, Mutex, OnceLock};

use num_bigint::BigInt;
use num_complex::{Complex, Complex64};
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::maass::{self, family, CoefficientTable};
use crate::modular::{self, ModularTriple};
use crate::mp::{ratio_to_f64, Real};
use crate::qseries::GRID;

fn big(x: i64) -> BigInt {
    BigInt::from(x)
}

fn factorial(n: usize) -> BigInt {
    (1..=n).fold(BigInt::one(), |acc, i| acc * BigInt::from(i))
}

fn binomial_row(n: usize) -> Vec<BigInt> {
    let mut row = vec![BigInt::one(); n + 1];
    for i in 1..n {
        row[i] = &row[i - 1] * BigInt::from(n - i + 1) / BigInt::from(i);
    }
    row
}

static BERNOULLI: OnceLock<Mutex<Vec<BigRational>>> = OnceLock::new();

/// B_0, …, B_n with B_1 = −1/2.
pub fn bernoulli_numbers(n: usize) -> Vec<BigRational> {
    let cell = BERNOULLI.get_or_init(|| Mutex::new(vec![BigRational::one()]));
    let mut b = cell.lock().unwrap();
    while b.len() <= n {
        let m = b.len();
        let row = binomial_row(m + 1);
        let mut acc = BigRational::zero();
        for (k, bk) in b.iter().enumerate() {
            acc += bk * BigRational::from_integer(row[k].clone());
        }
        b.push(-acc / BigRational::from_integer(big(m as i64 + 1)));
    }
    b[..=n].to_vec()
}

/// B̃_n(x) = B_n(x − ⌊x⌋).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PeriodicBernoulli {
    pub degree: usize,
}

impl PeriodicBernoulli {
    pub fn new(degree: usize) -> Self {
        Self { degree }
    }

    pub fn eval(&self, x: &BigRational) -> Result<BigRational> {
        if self.degree == 1 && x.is_integer() {
            return Err(Error::invalid("B̃_1 is discontinuous at integers"));
        }
        let f = x - x.floor();
        let b = bernoulli_numbers(self.degree);
        let row = binomial_row(self.degree);
        // Horner in f over Σ C(n,i) B_i f^{n−i}
        let mut acc = BigRational::zero();
        for i in 0..=self.degree {
            acc = acc * &f + &b[i] * BigRational::from_integer(row[i].clone());
        }
        Ok(acc)
    }

    pub fn eval_f64(&self, x: f64) -> f64 {
        let f = x - x.floor();
        let b = bernoulli_numbers(self.degree);
        let row = binomial_row(self.degree);
        let mut acc = 0.0;
        for i in 0..=self.degree {
            let c = ratio_to_f64(b[i].numer(), b[i].denom()) * row[i].to_f64().unwrap();
            acc = acc * f + c;
        }
        acc
    }
}

/// ∂^{n₁}∂^{n₂} f = P·f for f(x) = e^{−x₁²−10x₁x₂−x₂²}; P has integer coefficients.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GaussianDerivative {
    pub n1: usize,
    pub n2: usize,
    /// (i, j) ↦ coefficient of x₁^i x₂^j.
    pub poly: BTreeMap<(usize, usize), BigInt>,
}

impl GaussianDerivative {
    pub fn new(n1: usize, n2: usize) -> Self {
        let mut p: BTreeMap<(usize, usize), BigInt> = BTreeMap::new();
        p.insert((0, 0), BigInt::one());
        for _ in 0..n1 {
            p = Self::step(&p, 0);
        }
        for _ in 0..n2 {
            p = Self::step(&p, 1);
        }
        Self { n1, n2, poly: p }
    }

    /// ∂_v(P f) = (∂_v P + P·∂_v(log f)) f, ∂₁ log f = −2x₁ − 10x₂, ∂₂ log f = −10x₁ − 2x₂.
    fn step(p: &BTreeMap<(usize, usize), BigInt>, v: usize) -> BTreeMap<(usize, usize), BigInt> {
        let mut out: BTreeMap<(usize, usize), BigInt> = BTreeMap::new();
        let mut add = |k: (usize, usize), c: BigInt| {
            let e = out.entry(k).or_insert_with(BigInt::zero);
            *e += c;
        };
        let (own, cross) = (-2i64, -10i64);
        for (&(i, j), c) in p {
            if v == 0 {
                if i > 0 {
                    add((i - 1, j), c * big(i as i64));
                }
                add((i + 1, j), c * big(own));
                add((i, j + 1), c * big(cross));
            } else {
                if j > 0 {
                    add((i, j - 1), c * big(j as i64));
                }
                add((i, j + 1), c * big(own));
                add((i + 1, j), c * big(cross));
            }
        }
        out.retain(|_, c| !c.is_zero());
        out
    }

    pub fn degree(&self) -> usize {
        self.poly.keys().map(|&(i, j)| i + j).max().unwrap_or(0)
    }

    pub fn at_zero(&self) -> BigInt {
        self.poly.get(&(0, 0)).cloned().unwrap_or_default()
    }

    /// ∂^{n₁}∂^{n₂} f at (x₁, x₂).
    pub fn eval_f64(&self, x1: f64, x2: f64) -> f64 {
        let p: f64 = self
            .poly
            .iter()
            .map(|(&(i, j), c)| c.to_f64().unwrap() * x1.powi(i as i32) * x2.powi(j as i32))
            .sum();
        p * (-x1 * x1 - 10.0 * x1 * x2 - x2 * x2).exp()
    }
}

/// f^{(a,b)}(0) for a + b ≤ order, read off the Taylor coefficients of f.
pub fn gaussian_derivatives_at_zero(order: usize) -> Vec<Vec<BigInt>> {
    let fact: Vec<BigInt> = (0..=order).map(factorial).collect();
    let mut t = vec![vec![BigInt::zero(); order + 1]; order + 1];
    // f = Σ (−x₁²)^i/i! (−10x₁x₂)^j/j! (−x₂²)^k/k!; a = 2i + j, b = j + 2k
    for i in 0..=order / 2 {
        for j in 0..=order {
            for k in 0..=order / 2 {
                let a = 2 * i + j;
                let b = j + 2 * k;
                if a + b > order {
                    continue;
                }
                // a!/(i! j!) · b!/k! is an integer
                let c = &fact[a] / (&fact[i] * &fact[j]) * (&fact[b] / &fact[k]);
                let sign = if (i + k) % 2 == 1 { -1 } else { 1 };
                let ten = BigInt::from(10).pow(j as u32);
                let v = c * ten * sign * if j % 2 == 1 { -1 } else { 1 };
                t[a][b] += v;
            }
        }
    }
    t
}

/// ∫₀^∞ f^{(2r+1,0)}(0, x) dx via half-Gaussian moments.
pub fn boundary_integral(r: usize) -> BigRational {
    let m = 2 * r + 1;
    let mut tot = BigRational::zero();
    for b in 0..=m / 2 {
        let a = m - 2 * b;
        let c = factorial(m) / (factorial(a) * factorial(b));
        let sign = if (a + b) % 2 == 1 { -1 } else { 1 };
        let v = c * BigInt::from(10).pow(a as u32) * sign * factorial((a - 1) / 2);
        tot += BigRational::new(v, big(2));
    }
    tot
}

/// One term of the Euler–Maclaurin sum: x = p/D, y = q/D and the phase key.
struct BracketSite {
    sign: i64,
    key: i64,
    p: i64,
    q: i64,
}

fn bracket_sites(j: usize, k: i64) -> Result<Vec<BracketSite>> {
    let d = 96 * k;
    let mut v = Vec::with_capacity(32 * (k * k) as usize);
    for (mu, s) in family(j).signed() {
        for r1 in 0..k {
            let x = mu.a + 24 * r1;
            for r2 in 0..k {
                let y = mu.b + 4 * r2;
                let key = (x * x - 6 * y * y).rem_euclid(48 * k);
                for alpha in 0..4 {
                    let p = (2 * x - 6 * y - 24 * k * alpha).rem_euclid(d);
                    let q = (2 * x + 6 * y + 24 * k * alpha).rem_euclid(d);
                    if p == 0 || q == 0 {
                        return Err(Error::check("Bernoulli argument at an integer"));
                    }
                    v.push(BracketSite { sign: s, key, p, q });
                }
            }
        }
    }
    Ok(v)
}

/// Exact Euler–Maclaurin brackets for the aggregated Taylor coefficients,
/// grouped by the phase key 48Q(r+μ) mod 48k.
///
/// For r < order: Σ_ℓ Ψ_{M_{h,k}}(j,ℓ) Φ^{(r)}_{ℓ,h′/k}(0)
/// = (4π)^{2r+2}/(8k) · Σ_c num[r][c] e^{2πihc/(48k)} / den[r].
#[derive(Clone, Debug)]
pub struct TaylorBrackets {
    pub j: usize,
    pub k: i64,
    pub order: usize,
    pub den: Vec<BigInt>,
    pub num: Vec<Vec<(i64, BigInt)>>,
}

impl TaylorBrackets {
    pub fn compute(j: usize, k: i64, order: usize) -> Result<Self> {
        if j > 2 || k < 1 || order == 0 {
            return Err(Error::invalid("need j ≤ 2, k ≥ 1, order ≥ 1"));
        }
        let nmax = 2 * order;
        let d = 96 * k;
        let bn = bernoulli_numbers(nmax);
        let lb = bn.iter().fold(BigInt::one(), |l, b| l.lcm(b.denom()));
        let lbb: Vec<BigInt> = bn.iter().map(|b| b.numer() * (&lb / b.denom())).collect();
        let dpow: Vec<BigInt> = (0..=nmax).map(|i| BigInt::from(d).pow(i as u32)).collect();
        let rows: Vec<Vec<BigInt>> = (0..=nmax).map(binomial_row).collect();
        let fder = gaussian_derivatives_at_zero(nmax.saturating_sub(2));
        let half: Vec<BigInt> = (0..order)
            .map(|r| {
                let h = boundary_integral(r) * BigRational::from_integer(big(2));
                h.to_integer()
            })
            .collect();

        // V_n(p) = Σ_i C(n,i) (L·B_i) p^{n−i} D^i = L·D^n·B_n(p/D)
        let v_of = |p: i64| -> Vec<BigInt> {
            let pp: Vec<BigInt> = (0..=nmax).map(|e| BigInt::from(p).pow(e as u32)).collect();
            (0..=nmax)
                .map(|n| {
                    let mut acc = BigInt::zero();
                    for i in 0..=n {
                        if lbb[i].is_zero() {
                            continue;
                        }
                        acc += &rows[n][i] * &lbb[i] * &pp[n - i] * &dpow[i];
                    }
                    acc
                })
                .collect()
        };

        let sites = bracket_sites(j, k)?;
        let mut needed: Vec<i64> = sites.iter().flat_map(|s| [s.p, s.q]).collect();
        needed.sort_unstable();
        needed.dedup();
        let table: HashMap<i64, Vec<BigInt>> =
            needed.par_iter().map(|&p| (p, v_of(p))).collect();

        let per_site: Vec<(i64, Vec<BigInt>)> = sites
            .par_iter()
            .map(|s| {
                let vx = &table[&s.p];
                let vy = &table[&s.q];
                let vals = (0..order)
                    .map(|r| {
                        let n = 2 * r + 2;
                        let row = &rows[n];
                        let mut acc = BigInt::zero();
                        for n1 in 0..=2 * r {
                            let n2 = 2 * r - n1;
                            let f = &fder[n1][n2];
                            if f.is_zero() {
                                continue;
                            }
                            acc += &row[n1 + 1] * &vx[n1 + 1] * &vy[n2 + 1] * f;
                        }
                        acc *= 2;
                        acc -= &lb * (&vx[n] + &vy[n]) * &half[r];
                        acc * s.sign
                    })
                    .collect();
                (s.key, vals)
            })
            .collect();

        let mut num = vec![BTreeMap::<i64, BigInt>::new(); order];
        for (key, vals) in per_site {
            for (r, v) in vals.into_iter().enumerate() {
                *num[r].entry(key).or_insert_with(BigInt::zero) += v;
            }
        }
        let den = (0..order)
            .map(|r| big(2) * &lb * &lb * &dpow[2 * r + 2] * factorial(2 * r + 2))
            .collect();
        let num = num
            .into_iter()
            .map(|m| m.into_iter().filter(|(_, v)| !v.is_zero()).collect())
            .collect();
        Ok(Self { j, k, order, den, num })
    }

    /// Cached by (j, k, order); a larger cached order serves smaller requests.
    pub fn cached(j: usize, k: i64, order: usize) -> Result<Arc<Self>> {
        static CACHE: OnceLock<Mutex<HashMap<(usize, i64), Arc<TaylorBrackets>>>> = OnceLock::new();
        let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
        if let Some(b) = cache.lock().unwrap().get(&(j, k)) {
            if b.order >= order {
                return Ok(b.clone());
            }
        }
        let b = Arc::new(Self::compute(j, k, order)?);
        cache.lock().unwrap().insert((j, k), b.clone());
        Ok(b)
    }

    /// The bracket sum as an exact rational combination of roots of unity.
    pub fn aggregated<R: Real>(&self, h: i64, r: usize) -> Complex<R> {
        self.aggregated_scaled(h, r, &BigInt::one())
    }

    /// The aggregated value divided by an integer, reduced before rounding.
    pub fn aggregated_scaled<R: Real>(&self, h: i64, r: usize, divisor: &BigInt) -> Complex<R> {
        let order = 48 * self.k;
        let pre = BigInt::from(4).pow(2 * r as u32 + 2);
        let den = &self.den[r] * big(8 * self.k) * divisor;
        let mut acc = Complex::new(R::zero(), R::zero());
        for (key, v) in &self.num[r] {
            let z = R::cis_turn((h * key).rem_euclid(order), order);
            acc = acc + z.scale(R::from_ratio(&(v * &pre), &den));
        }
        acc.scale(R::pi().powi(2 * r as u32 + 2))
    }

    /// For k = 1: the rational q with Σ_ℓ Ψ_S(j,ℓ)Φ^{(r)}_{ℓ,0}(0) = q π^{2r+2}.
    pub fn rational_k1(&self, r: usize) -> BigRational {
        assert_eq!(self.k, 1, "only k = 1 is a rational multiple of a power of π");
        let s: BigInt = self.num[r].iter().map(|(_, v)| v.clone()).sum();
        let pre = BigInt::from(4).pow(2 * r as u32 + 2);
        BigRational::new(s * pre, &self.den[r] * big(8))
    }
}

/// Σ_ℓ Ψ_{M_{h,k}}(j,ℓ) Φ^{(r)}_{ℓ,h′/k}(0) by the Euler–Maclaurin closed form.
pub fn phi_taylor(j: usize, r: usize, triple: &ModularTriple) -> Result<Complex64> {
    let b = TaylorBrackets::cached(j, triple.k, r + 1)?;
    Ok(b.aggregated::<f64>(triple.h, r))
}

/// The exact k = 1 value as q with value q π^{2r+2}.
pub fn table_one_rational(j: usize, r: usize) -> Result<BigRational> {
    let b = TaylorBrackets::cached(j, 1, r + 1)?;
    Ok(b.rational_k1(r))
}

pub fn pi_power_string(q: &BigRational, power: usize) -> String {
    if q.is_zero() {
        return "0".to_string();
    }
    if q.denom().is_one() {
        format!("{}*pi^{}", q.numer(), power)
    } else {
        format!("{}*pi^{}/{}", q.numer(), power, q.denom())
    }
}

/// ψ(b) − ψ(a) for a, b > 0.
pub fn digamma_diff(a: f64, b: f64) -> f64 {
    debug_assert!(a > 0.0 && b > 0.0);
    let mut a = a;
    let mut b = b;
    let mut acc = 0.0;
    // ψ(x) = ψ(x+1) − 1/x
    while a < 12.0 {
        acc += 1.0 / a;
        a += 1.0;
    }
    while b < 12.0 {
        acc -= 1.0 / b;
        b += 1.0;
    }
    let tail = |x: f64| {
        let x2 = 1.0 / (x * x);
        -0.5 / x
            - x2 * (1.0 / 12.0
                - x2 * (1.0 / 120.0 - x2 * (1.0 / 252.0 - x2 * (1.0 / 240.0 - x2 / 132.0))))
    };
    acc + ((b - a) / a).ln_1p() + tail(b) - tail(a)
}

pub fn digamma(x: f64) -> f64 {
    // ψ(1) = −γ
    -0.577_215_664_901_532_9 + digamma_diff(1.0, x)
}

/// Σ_{Y ∈ [lo, hi], Y ≡ c (mod L)} 1/(z + Y), all denominators positive.
fn progression_sum(z: f64, l: i64, lo: i64, hi: i64, c: i64) -> f64 {
    if lo > hi {
        return 0.0;
    }
    let y0 = lo + (c - lo).rem_euclid(l);
    if y0 > hi {
        return 0.0;
    }
    let n = (hi - y0) / l;
    if n < 24 {
        let mut s = 0.0;
        for t in (0..=n).rev() {
            s += 1.0 / (z + (y0 + l * t) as f64);
        }
        return s;
    }
    let w = (z + y0 as f64) / l as f64;
    digamma_diff(w, w + (n + 1) as f64) / l as f64
}

fn isqrt_floor(v: i64) -> i64 {
    if v <= 0 {
        return 0;
    }
    let mut s = (v as f64).sqrt() as i64;
    while s * s > v {
        s -= 1;
    }
    while (s + 1) * (s + 1) <= v {
        s += 1;
    }
    s
}

fn isqrt_ceil(v: i64) -> i64 {
    let s = isqrt_floor(v);
    if s * s < v {
        s + 1
    } else {
        s
    }
}

/// Neumaier-compensated complex accumulator.
#[derive(Clone, Copy, Default)]
struct CompSum {
    re: f64,
    im: f64,
    cre: f64,
    cim: f64,
}

impl CompSum {
    fn add(&mut self, z: Complex64) {
        let step = |s: &mut f64, c: &mut f64, x: f64| {
            let t = *s + x;
            if s.abs() >= x.abs() {
                *c += (*s - t) + x;
            } else {
                *c += (x - t) + *s;
            }
            *s = t;
        };
        step(&mut self.re, &mut self.cre, z.re);
        step(&mut self.im, &mut self.cim, z.im);
    }

    fn value(&self) -> Complex64 {
        Complex64::new(self.re + self.cre, self.im + self.cim)
    }
}

/// Σ*_{0<|m|≤X} d_ℓ(m) e^{2πih′m/k}/m over the lattice, strip by strip.
pub fn symmetric_reciprocal_sum(ell: usize, h_prime: i64, k: i64, cutoff: f64) -> Complex64 {
    let x48 = (cutoff * GRID as f64).floor() as i64;
    let order = 48 * k;
    let lk = 4 * k;
    let phase = |q48: i64| f64::cis_turn((h_prime * q48).rem_euclid(order), order);
    let mut jobs: Vec<(i64, i64, i64, bool)> = Vec::new();
    for (mu, s) in family(ell).signed() {
        jobs.push((mu.a, mu.b, s, true));
        jobs.push((mu.a, mu.b, s, false));
    }
    const CHUNK: i64 = 4096;
    let mut tasks: Vec<(usize, i64)> = Vec::new();
    for (ji, &(a, _, _, pos)) in jobs.iter().enumerate() {
        let xmax = if pos { isqrt_floor(3 * x48) } else { isqrt_floor(2 * x48) };
        let first = -xmax + (a + xmax).rem_euclid(24);
        let count = if first > xmax { 0 } else { (xmax - first) / 24 + 1 };
        let mut start = 0;
        while start < count {
            tasks.push((ji, start));
            start += CHUNK;
        }
    }
    let partials: Vec<Complex64> = tasks
        .par_iter()
        .map(|&(ji, start)| {
            let (a, b, s, pos) = jobs[ji];
            let xmax = if pos { isqrt_floor(3 * x48) } else { isqrt_floor(2 * x48) };
            let first = -xmax + (a + xmax).rem_euclid(24);
            let mut acc = CompSum::default();
            for t in start..start + CHUNK {
                let x = first + 24 * t;
                if x > xmax {
                    break;
                }
                let ax = x.abs();
                let x2 = x * x;
                if ax == 0 {
                    continue;
                }
                let sigma = ax as f64 / 6f64.sqrt();
                for c in 0..k {
                    let yc = b + 4 * c;
                    let e = phase(x2 - 6 * yc * yc);
                    let mut val = 0.0;
                    if pos {
                        let ylim = ax / 3;
                        let ymin = if x2 > x48 { isqrt_ceil((x2 - x48 + 5) / 6) } else { 0 };
                        if ymin > ylim {
                            continue;
                        }
                        // Σ over Y of 1/(σ+Y) + 1/(σ−Y), Y in the admissible set
                        let f = |lo: i64, hi: i64| {
                            progression_sum(sigma, lk, lo, hi, yc)
                                + progression_sum(sigma, lk, -hi, -lo, -yc)
                        };
                        let mut tot = if ymin == 0 {
                            f(-ylim, ylim)
                        } else {
                            f(ymin, ylim) + f(-ylim, -ymin)
                        };
                        // 1/(X² − 6Y²) = (1/(12σ))(1/(σ−Y) + 1/(σ+Y)), weight 2
                        tot *= 2.0 / (12.0 * sigma);
                        if ax % 3 == 0 && ylim >= ymin {
                            for yb in [ylim, -ylim] {
                                if (yb - yc).rem_euclid(lk) == 0 {
                                    tot -= 1.0 / (x2 - 6 * yb * yb) as f64;
                                }
                            }
                        }
                        val += tot;
                    } else {
                        let ylo = (ax + 1) / 2;
                        let yhi = isqrt_floor((x2 + x48) / 6);
                        if ylo > yhi {
                            continue;
                        }
                        // 1/(6Y² − X²) = (1/(12σ))(1/(|Y|−σ) − 1/(|Y|+σ)) for both signs of Y
                        let g = |cls: i64| {
                            progression_sum(-sigma, lk, ylo, yhi, cls)
                                - progression_sum(sigma, lk, ylo, yhi, cls)
                        };
                        let mut tot = (g(yc) + g(-yc)) * 2.0 / (12.0 * sigma);
                        if ax % 2 == 0 && ylo * 2 == ax {
                            for yb in [ylo, -ylo] {
                                if (yb - yc).rem_euclid(lk) == 0 {
                                    tot -= 1.0 / (6 * yb * yb - x2) as f64;
                                }
                            }
                        }
                        // 48Q = −(6Y² − X²)
                        val -= tot;
                    }
                    acc.add(e * (s as f64 * val));
                }
            }
            acc.value()
        })
        .collect();
    let mut total = CompSum::default();
    for p in partials {
        total.add(p);
    }
    // Σ d e/m = 12 Σ s w e/(48Q) with w the doubled weight
    total.value() * 12.0
}

/// Configuration of the symmetric-sum route.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SumConfig {
    /// Symmetric cutoff for the conditionally convergent Σ* d e/m.
    pub reciprocal_cutoff: f64,
    /// Terms with |m| ≤ near_cutoff enter Φ(t) exactly.
    pub near_cutoff: f64,
    /// Absolutely convergent tails are summed to this bound.
    pub far_cutoff: f64,
}

impl Default for SumConfig {
    fn default() -> Self {
        Self::for_modulus(1)
    }
}

impl SumConfig {
    /// Cutoffs used for denominator k; strip work grows like k·√cutoff.
    pub fn for_modulus(k: i64) -> Self {
        let near = (200.0 * (k * k) as f64).max(1e4);
        Self { reciprocal_cutoff: 1e11 / k as f64, near_cutoff: near, far_cutoff: (100.0 * near).max(1e6) }
    }

    /// Cheap cutoffs for scans where 1e−5 accuracy suffices.
    pub fn coarse() -> Self {
        Self { reciprocal_cutoff: 1e8, near_cutoff: 1e3, far_cutoff: 1e5 }
    }
}

/// Σ_{|m|>M} d_ℓ(m)e^{2πih′m/k}/m^p predicted by the class densities, equal on both sides.
fn density_tail(ell: usize, h_prime: i64, k: i64, cutoff: f64, p: usize) -> Result<Complex64> {
    if p % 2 == 1 {
        return Ok(Complex64::zero());
    }
    let b48 = crate::qseries::beta48(ell);
    let mut acc = Complex64::zero();
    for r in 0..k {
        let a = maass::class_density(ell, r, k)?;
        if a != 0.0 {
            let e = f64::cis_turn((h_prime * (b48 + GRID * r)).rem_euclid(48 * k), 48 * k);
            acc += e * a;
        }
    }
    Ok(acc * (2.0 * cutoff.powi(1 - p as i32) / (p as f64 - 1.0)))
}

const TAIL_TERMS: usize = 8;

/// Everything needed to evaluate Φ_{ℓ,h′/k} on [0, 1/24].
#[derive(Clone, Debug)]
pub struct KernelSums {
    pub ell: usize,
    pub h_prime: i64,
    pub k: i64,
    pub config: SumConfig,
    /// Σ* d e/m at the configured cutoff.
    pub reciprocal: Complex64,
    /// |difference| to the same sum at a quarter of the cutoff.
    pub reciprocal_error: f64,
    /// (m, d_ℓ(m) e^{2πih′m/k}) for |m| ≤ near_cutoff.
    pub near: Vec<(f64, Complex64)>,
    /// Σ_{near<|m|≤far} d e/m^p for p = 2, 3, …
    pub tails: Vec<Complex64>,
    /// Σ_{0<|m|≤far} d e/m^p for p = 2, 3, …
    pub power_sums: Vec<Complex64>,
    /// Twice the change of the p = 2 sum between far_cutoff/4 and far_cutoff.
    pub far_bound: f64,
}

impl KernelSums {
    pub fn new(ell: usize, h_prime: i64, k: i64, config: SumConfig) -> Result<Self> {
        if ell > 2 || k < 1 {
            return Err(Error::invalid("need ℓ ≤ 2 and k ≥ 1"));
        }
        let reciprocal = symmetric_reciprocal_sum(ell, h_prime, k, config.reciprocal_cutoff);
        let coarse = symmetric_reciprocal_sum(ell, h_prime, k, config.reciprocal_cutoff / 4.0);
        let table = coefficient_list(ell, config.far_cutoff);
        let order = 48 * k;
        let quarter = config.far_cutoff / 4.0;
        let mut near = Vec::new();
        let mut tails = vec![CompSum::default(); TAIL_TERMS];
        let mut sums = vec![CompSum::default(); TAIL_TERMS];
        let mut quarter_sum = CompSum::default();
        for &(m48, q) in table.iter() {
            let m = m48 as f64 / GRID as f64;
            let de = f64::cis_turn((h_prime * m48).rem_euclid(order), order) * (q as f64 / 4.0);
            let mut w = de / (m * m);
            if m.abs() <= quarter {
                quarter_sum.add(w);
            }
            for p in 0..TAIL_TERMS {
                sums[p].add(w);
                if m.abs() > config.near_cutoff {
                    tails[p].add(w);
                }
                w /= m;
            }
            if m.abs() <= config.near_cutoff {
                near.push((m, de));
            }
        }
        let mut tails: Vec<Complex64> = tails.iter().map(|s| s.value()).collect();
        let mut power_sums: Vec<Complex64> = sums.iter().map(|s| s.value()).collect();
        for p in 0..TAIL_TERMS {
            let c = density_tail(ell, h_prime, k, config.far_cutoff, p + 2)?;
            tails[p] += c;
            power_sums[p] += c;
        }
        let q2 = quarter_sum.value() + density_tail(ell, h_prime, k, quarter, 2)?;
        let far_bound = 2.0 * (power_sums[0] - q2).norm();
        Ok(Self {
            ell,
            h_prime,
            k,
            config,
            reciprocal,
            reciprocal_error: (reciprocal - coarse).norm(),
            near,
            tails,
            power_sums,
            far_bound,
        })
    }

    /// Cached per (ℓ, h′, k) for the default configuration.
    pub fn cached(ell: usize, h_prime: i64, k: i64) -> Result<Arc<Self>> {
        type Key = (usize, i64, i64);
        static CACHE: OnceLock<Mutex<HashMap<Key, Arc<KernelSums>>>> = OnceLock::new();
        let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
        let key = (ell, h_prime.rem_euclid(k), k);
        if let Some(v) = cache.lock().unwrap().get(&key) {
            return Ok(v.clone());
        }
        let v = Arc::new(Self::new(ell, key.1, k, SumConfig::for_modulus(k))?);
        cache.lock().unwrap().insert(key, v.clone());
        Ok(v)
    }

    /// Φ(0) = −Σ* d e/m.
    pub fn phi_zero(&self) -> Complex64 {
        -self.reciprocal
    }

    /// Σ* d e/m^{r+1}; equals −Φ^{(r)}(0)/r!.
    pub fn moment(&self, r: usize) -> Result<Complex64> {
        if r == 0 {
            return Ok(self.reciprocal);
        }
        self.power_sums
            .get(r - 1)
            .copied()
            .ok_or_else(|| Error::invalid(format!("moment order {r} beyond the cached range")))
    }

    /// Error bound for [`Self::phi_eval`] at t.
    pub fn error_bound(&self, t: f64) -> f64 {
        self.reciprocal_error + t.abs() * self.far_bound
    }

    /// Φ(t) = Φ(0) + t Σ d e/((t − m) m).
    pub fn phi_eval(&self, t: f64) -> Complex64 {
        let mut acc = CompSum::default();
        for &(m, de) in &self.near {
            acc.add(de / ((t - m) * m));
        }
        // Σ_{|m|>near} d e/((t−m)m) = −Σ_p t^p Σ d e/m^{p+2}
        let mut tp = 1.0;
        for tail in &self.tails {
            acc.add(-tail * tp);
            tp *= t;
        }
        self.phi_zero() + acc.value() * t
    }

    /// Φ* = Φ − d₀(1/48)e^{2πih′/(48k)}δ_{ℓ,0}/(t − 1/48), continuous at 1/48.
    pub fn phi_star(&self, t: f64) -> Complex64 {
        if self.ell != 0 {
            return self.phi_eval(t);
        }
        let m0 = 1.0 / 48.0;
        let mut acc = CompSum::default();
        for &(m, de) in &self.near {
            if (m - m0).abs() > 1e-12 {
                acc.add(de / ((t - m) * m));
            }
        }
        let mut tp = 1.0;
        for tail in &self.tails {
            acc.add(-tail * tp);
            tp *= t;
        }
        // R t/((t − m₀)m₀) − R/(t − m₀) = R/m₀
        self.phi_zero() + acc.value() * t + self.pole_residue() / m0
    }

    /// d₀(1/48) e^{2πih′/(48k)} for ℓ = 0, zero otherwise.
    pub fn pole_residue(&self) -> Complex64 {
        if self.ell != 0 {
            return Complex64::zero();
        }
        f64::cis_turn(self.h_prime.rem_euclid(48 * self.k), 48 * self.k) * -1.0
    }
}

/// Φ_{ℓ,h′/k}(t) by the symmetric-sum route.
pub fn phi_eval(ell: usize, triple: &ModularTriple, t: f64, tol: f64) -> Result<Complex64> {
    if ell == 0 && (t - 1.0 / 48.0).abs() < 1e-300 {
        return Err(Error::invalid("t = 1/48 is a pole of Φ_0; use phi_star"));
    }
    let s = KernelSums::cached(ell, triple.h_prime, triple.k)?;
    let bound = s.error_bound(t);
    if bound > tol {
        return Err(Error::NonConvergence { what: "kernel symmetric sum".into(), achieved: bound });
    }
    Ok(s.phi_eval(t))
}

pub fn phi_star(ell: usize, triple: &ModularTriple, t: f64, tol: f64) -> Result<Complex64> {
    let s = KernelSums::cached(ell, triple.h_prime, triple.k)?;
    let bound = s.error_bound(t);
    if bound > tol {
        return Err(Error::NonConvergence { what: "kernel symmetric sum".into(), achieved: bound });
    }
    Ok(s.phi_star(t))
}

/// max_{t, ℓ, h} |Φ*_{ℓ,h′/k}(t)| for each k, and the smallest C with max ≤ C·k.
#[derive(Clone, Debug, PartialEq)]
pub struct PhiStarBound {
    pub per_k: Vec<(i64, f64)>,
    pub constant: f64,
}

pub fn phi_star_bound_scan(k_max: i64, config: SumConfig, grid: usize) -> Result<PhiStarBound> {
    if k_max < 1 || grid < 2 {
        return Err(Error::invalid("need k_max ≥ 1 and at least two grid points"));
    }
    let jobs: Vec<(usize, i64, i64)> = (1..=k_max)
        .flat_map(|k| {
            ModularTriple::all_for(k)
                .into_iter()
                .flat_map(move |t| (0..3).map(move |ell| (ell, t.h_prime, k)))
        })
        .collect();
    let maxima: Vec<Result<(i64, f64)>> = jobs
        .par_iter()
        .map(|&(ell, hp, k)| {
            let s = KernelSums::new(ell, hp, k, config)?;
            let m = (0..grid)
                .map(|i| s.phi_star(i as f64 / (24.0 * (grid - 1) as f64)).norm())
                .fold(0.0, f64::max);
            Ok((k, m))
        })
        .collect();
    let mut per_k: BTreeMap<i64, f64> = BTreeMap::new();
    for r in maxima {
        let (k, m) = r?;
        let e = per_k.entry(k).or_insert(0.0);
        *e = e.max(m);
    }
    let constant = per_k.iter().map(|(&k, &m)| m / k as f64).fold(0.0, f64::max);
    Ok(PhiStarBound { per_k: per_k.into_iter().collect(), constant })
}

/// Individual and aggregated Taylor coefficients at t = 0.
#[derive(Clone, Debug)]
pub struct KernelTaylorTable {
    /// (ℓ, r, h′, k) ↦ Φ^{(r)}_{ℓ,h′/k}(0) by symmetric sums.
    pub entries: BTreeMap<(usize, usize, i64, i64), Complex64>,
    /// (j, r) ↦ Σ_ℓ Ψ_S(j,ℓ) Φ^{(r)}_{ℓ,0}(0) by Euler–Maclaurin.
    pub aggregated: BTreeMap<(usize, usize), f64>,
    /// Exact rational multiples of π^{2r+2} for the aggregated values.
    pub rational: BTreeMap<(usize, usize), BigRational>,
}

impl KernelTaylorTable {
    /// The k = 1 table for r < order; `with_sums` adds the individual values.
    pub fn at_cusp(order: usize, with_sums: bool) -> Result<Self> {
        let mut t = Self { entries: BTreeMap::new(), aggregated: BTreeMap::new(), rational: BTreeMap::new() };
        for j in 0..3 {
            let b = TaylorBrackets::cached(j, 1, order)?;
            for r in 0..order {
                let q = b.rational_k1(r);
                let v = ratio_to_f64(q.numer(), q.denom()) * std::f64::consts::PI.powi(2 * r as i32 + 2);
                t.aggregated.insert((j, r), v);
                t.rational.insert((j, r), q);
            }
        }
        if with_sums {
            for ell in 0..3 {
                let s = KernelSums::cached(ell, 0, 1)?;
                let mut fact = 1.0;
                for r in 0..order.min(TAIL_TERMS) {
                    if r > 0 {
                        fact *= r as f64;
                    }
                    t.entries.insert((ell, r, 0, 1), -s.moment(r)? * fact);
                }
            }
        }
        Ok(t)
    }

    /// Σ_ℓ Ψ_S(j,ℓ) entries[(ℓ, r, 0, 1)].
    pub fn aggregate_entries(&self, j: usize, r: usize) -> Option<Complex64> {
        let psi = modular::psi_s_reference();
        let mut acc = Complex64::zero();
        for ell in 0..3 {
            acc += psi.entries[j][ell] * self.entries.get(&(ell, r, 0, 1))?;
        }
        Some(acc)
    }
}

/// Nonzero (48m, 4d_ℓ(m)) for |m| ≤ cutoff, cached.
pub fn coefficient_list(ell: usize, cutoff: f64) -> Arc<Vec<(i64, i64)>> {
    static CACHE: OnceLock<Mutex<HashMap<(usize, u64), Arc<Vec<(i64, i64)>>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let key = (ell, cutoff.to_bits());
    if let Some(v) = cache.lock().unwrap().get(&key) {
        return v.clone();
    }
    let v = Arc::new(CoefficientTable::build(ell, cutoff).nonzero());
    cache.lock().unwrap().insert(key, v.clone());
    v
}

/// Σ_{skip ≤ |m| ≤ cutoff} d_ℓ(m)/m^{r+1} split by the class of m mod k.
/// Class i holds m ≡ β_ℓ + i (mod k).
#[derive(Clone, Debug)]
pub struct ClassPowerSums {
    pub k: i64,
    pub r_min: usize,
    pub r_max: usize,
    pub cutoff: f64,
    /// [ℓ][r − r_min][i]
    pub sums: Vec<Vec<Vec<f64>>>,
}

impl ClassPowerSums {
    pub fn compute(k: i64, r_min: usize, r_max: usize, cutoff: f64, skip_below: f64) -> Self {
        let sums = (0..3)
            .map(|ell| {
                let b48 = crate::qseries::beta48(ell);
                let mut acc = vec![vec![0.0f64; k as usize]; r_max + 1 - r_min];
                for &(m48, q) in coefficient_list(ell, cutoff).iter() {
                    let m = m48 as f64 / GRID as f64;
                    if m.abs() < skip_below {
                        continue;
                    }
                    let class = ((m48 - b48) / GRID).rem_euclid(k) as usize;
                    let mut w = q as f64 / 4.0 / m.powi(r_min as i32 + 1);
                    for slot in acc.iter_mut() {
                        slot[class] += w;
                        w /= m;
                    }
                }
                acc
            })
            .collect();
        Self { k, r_min, r_max, cutoff, sums }
    }

    /// Cached with the main-sum defaults: |m| ≥ 3, cutoff 2·10⁵, r from 2.
    pub fn cached(k: i64, r_max: usize) -> Arc<Self> {
        static CACHE: OnceLock<Mutex<HashMap<i64, Arc<ClassPowerSums>>>> = OnceLock::new();
        let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
        if let Some(v) = cache.lock().unwrap().get(&k) {
            if v.r_max >= r_max {
                return v.clone();
            }
        }
        let v = Arc::new(Self::compute(k, 2, r_max.max(2), 2e5, 3.0));
        cache.lock().unwrap().insert(k, v.clone());
        v
    }

    /// Σ d_ℓ(m) e^{2πih′m/k}/m^{r+1} over the summation range.
    pub fn twisted(&self, ell: usize, r: usize, h_prime: i64) -> Complex64 {
        let b48 = crate::qseries::beta48(ell);
        let order = 48 * self.k;
        self.sums[ell][r - self.r_min]
            .iter()
            .enumerate()
            .map(|(i, &v)| f64::cis_turn((h_prime * (b48 + GRID * i as i64)).rem_euclid(order), order) * v)
            .sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(n: i64, d: i64) -> BigRational {
        BigRational::new(big(n), big(d))
    }

    #[test]
    fn bernoulli_head() {
        let b = bernoulli_numbers(8);
        assert_eq!(b[1], q(-1, 2));
        assert_eq!(b[2], q(1, 6));
        assert_eq!(b[3], q(0, 1));
        assert_eq!(b[4], q(-1, 30));
        assert_eq!(b[8], q(-1, 30));
    }

    #[test]
    fn periodic_bernoulli_values() {
        let b2 = PeriodicBernoulli::new(2);
        // B_2(x) = x² − x + 1/6
        assert_eq!(b2.eval(&q(7, 4)).unwrap(), q(9, 16) - q(3, 4) + q(1, 6));
        assert!(PeriodicBernoulli::new(1).eval(&q(3, 1)).is_err());
        assert!((b2.eval_f64(1.75) - (0.5625 - 0.75 + 1.0 / 6.0)).abs() < 1e-15);
    }

    #[test]
    fn gaussian_recurrence_matches_taylor_route() {
        let t = gaussian_derivatives_at_zero(10);
        for n1 in 0..=5 {
            for n2 in 0..=5 {
                let g = GaussianDerivative::new(n1, n2);
                assert_eq!(g.at_zero(), t[n1][n2], "({n1},{n2})");
                assert_eq!(g.degree(), n1 + n2);
            }
        }
    }

    #[test]
    fn boundary_integral_low_order() {
        // r = 0: ∫ −10x e^{−x²} dx = −5
        assert_eq!(boundary_integral(0), q(-5, 1));
    }

    #[test]
    fn table_one_low_rows() {
        let cases = [
            (0, 0, q(0, 1)),
            (1, 0, q(4, 1)),
            (2, 0, q(4, 1)),
            (0, 1, q(16, 1)),
            (1, 1, q(23, 3)),
            (2, 1, q(50, 3)),
        ];
        for (j, r, want) in cases {
            assert_eq!(table_one_rational(j, r).unwrap(), want, "j={j} r={r}");
        }
    }

    #[test]
    fn brackets_reduce_to_k1_value() {
        let b = TaylorBrackets::compute(1, 1, 2).unwrap();
        let z = b.aggregated::<f64>(0, 1);
        let want = 23.0 / 3.0 * std::f64::consts::PI.powi(4);
        assert!((z.re - want).abs() < 1e-10 * want && z.im.abs() < 1e-9);
    }

    #[test]
    fn digamma_values() {
        assert!((digamma(1.0) + 0.5772156649015329).abs() < 1e-15);
        assert!((digamma(0.5) - (-1.9635100260214235)).abs() < 1e-14);
        assert!((digamma(10.0) - 2.251752589066721).abs() < 1e-14);
        assert!((digamma_diff(1e6, 1e6 + 3.0) - (1.0 / 1e6 + 1.0 / (1e6 + 1.0) + 1.0 / (1e6 + 2.0))).abs() < 1e-20);
    }

    #[test]
    fn progression_sum_matches_direct() {
        let z = 12.345;
        let direct: f64 = (3..=2000).filter(|y| (y - 1) % 7 == 0).map(|y| 1.0 / (z + y as f64)).sum();
        assert!((progression_sum(z, 7, 3, 2000, 1) - direct).abs() < 1e-14);
    }

    #[test]
    fn reciprocal_sum_small_cutoff_matches_table() {
        for ell in 0..3 {
            for (hp, k) in [(0, 1), (1, 2), (2, 3)] {
                let x = 300.0;
                let fast = symmetric_reciprocal_sum(ell, hp, k, x);
                let t = CoefficientTable::build(ell, x);
                let mut direct = Complex64::zero();
                for (m48, q4) in t.nonzero() {
                    let e = f64::cis_turn((hp * m48).rem_euclid(48 * k), 48 * k);
                    direct += e * (q4 as f64 / 4.0) / (m48 as f64 / 48.0);
                }
                assert!((fast - direct).norm() < 1e-11, "ℓ={ell} k={k}: {fast} vs {direct}");
            }
        }
    }

    #[test]
    fn table_one_full() {
        let rows = [
            [(0, 1), (4, 1), (4, 1)],
            [(16, 1), (23, 3), (50, 3)],
            [(284, 3), (9745, 72), (2929, 18)],
            [(32881, 18), (3965831, 2592), (769033, 324)],
            [(20222423, 648), (4241759521, 124416), (359054305, 7776)],
        ];
        for (r, row) in rows.iter().enumerate() {
            for (j, &(n, d)) in row.iter().enumerate() {
                assert_eq!(table_one_rational(j, r).unwrap(), q(n, d), "j={j} r={r}");
            }
        }
        assert_eq!(pi_power_string(&q(23, 3), 4), "23*pi^4/3");
    }

    #[test]
    fn taylor_routes_agree_at_cusp() {
        let tab = KernelTaylorTable::at_cusp(5, true).unwrap();
        for j in 0..3 {
            for r in 0..5 {
                let sums = tab.aggregate_entries(j, r).unwrap();
                let exact = tab.aggregated[&(j, r)];
                let tol = if r == 0 { 1e-6 } else { 1e-10 * exact.abs() };
                assert!((sums - exact).norm() < tol, "j={j} r={r}: {sums} vs {exact}");
            }
        }
    }

    #[test]
    fn phi_star_removes_the_pole() {
        let t = ModularTriple::new(0, 1).unwrap();
        let m0 = 1.0 / 48.0;
        let near = phi_star(0, &t, m0 - 1e-6, 1e-6).unwrap();
        let at = phi_star(0, &t, m0, 1e-6).unwrap();
        assert!((near - at).norm() < 1e-4);
        let raw = phi_eval(0, &t, 0.01, 1e-6).unwrap();
        let star = phi_star(0, &t, 0.01, 1e-6).unwrap();
        assert!((raw - star + 1.0 / (0.01 - m0)).norm() < 1e-9);
        assert!(phi_eval(0, &t, 0.01, 1e-15).is_err());
    }

    #[test]
    fn pole_residue_limit() {
        let s = KernelSums::new(0, 0, 1, SumConfig::coarse()).unwrap();
        let m0 = 1.0 / 48.0;
        for e in 4..8 {
            let t = m0 + 10f64.powi(-e);
            let v = s.phi_eval(t) * (t - m0);
            assert!((v.re + 1.0).abs() < 2e3 * 10f64.powi(-e), "e={e}: {v}");
            assert!(v.im.abs() < 1e-15);
        }
    }

    #[test]
    fn rearrangement_stable_under_far_cutoff() {
        let mut a = SumConfig::coarse();
        a.far_cutoff = 2e5;
        let mut b = a;
        b.far_cutoff = 4e5;
        for ell in 0..3 {
            let sa = KernelSums::new(ell, 1, 2, a).unwrap();
            let sb = KernelSums::new(ell, 1, 2, b).unwrap();
            for t in [0.005, 0.02, 1.0 / 24.0] {
                let d = (sa.phi_star(t) - sb.phi_star(t)).norm();
                assert!(d <= t * sa.far_bound + 1e-14, "ℓ={ell} t={t}: {d} vs {}", sa.far_bound);
            }
        }
    }

    #[test]
    fn periodic_bernoulli_has_zero_mean() {
        let n = 4000;
        for deg in 1..=10 {
            let b = PeriodicBernoulli::new(deg);
            let mean: f64 = (0..n).map(|i| b.eval_f64(0.3 + (i as f64 + 0.5) / n as f64)).sum::<f64>() / n as f64;
            assert!(mean.abs() < 1e-6, "degree {deg}: {mean}");
        }
    }

    #[test]
    fn phi_star_bounded_for_small_k() {
        let b = phi_star_bound_scan(3, SumConfig::coarse(), 9).unwrap();
        assert_eq!(b.per_k.len(), 3);
        assert!(b.constant.is_finite() && b.constant < 50.0, "{b:?}");
    }
}
