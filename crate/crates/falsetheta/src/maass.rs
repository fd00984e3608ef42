//! Fourier coefficients d_j(n) of the Maass forms U_j by shifted-lattice
//! counting, their residue-class densities, and truncated evaluation of U_j.
//!
//! Lattice points n = (n₁, n₂) ∈ μ + ℤ² are stored as integers
//! X = 24 n₁, Y = 4 n₂, so that 48 Q(n) = X² − 6Y² with Q(n) = 12n₁² − 2n₂².

use std::collections::BTreeMap;

use num_complex::Complex64;
use num_integer::Integer;
use num_rational::Ratio;
use num_traits::{Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};
use crate::qseries::{beta48, GRID};

/// Area constant log(√2 + √3)/√6 of the counting regions.
pub fn density_constant() -> f64 {
    (2f64.sqrt() + 3f64.sqrt()).ln() / 6f64.sqrt()
}

/// A class μ ∈ A⁻¹ℤ²/ℤ² for A = diag(24, −4), stored as (24μ₁ mod 24, 4μ₂ mod 4).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ShiftVector {
    pub a: i64,
    pub b: i64,
}

impl ShiftVector {
    pub fn new(a: i64, b: i64) -> Self {
        Self {
            a: a.rem_euclid(24),
            b: b.rem_euclid(4),
        }
    }

    pub fn from_ratios(mu1: Ratio<i64>, mu2: Ratio<i64>) -> Result<Self> {
        let a = mu1 * 24;
        let b = mu2 * 4;
        if !a.is_integer() || !b.is_integer() {
            return Err(Error::invalid(format!("({mu1}, {mu2}) is not in A⁻¹ℤ²")));
        }
        Ok(Self::new(a.to_integer(), b.to_integer()))
    }

    pub fn mu1(&self) -> Ratio<i64> {
        Ratio::new(self.a, 24)
    }

    pub fn mu2(&self) -> Ratio<i64> {
        Ratio::new(self.b, 4)
    }

    /// 48 Q(μ) for the reduced representative.
    pub fn q48(&self) -> i64 {
        self.a * self.a - 6 * self.b * self.b
    }

    /// Image under n ↦ γn with γ = (5 2; 12 5), reduced mod ℤ².
    pub fn gamma_image(&self) -> Self {
        // n₁' = 5n₁ + 2n₂, n₂' = 12n₁ + 5n₂ in the scaled coordinates
        let x = 5 * self.a + 12 * self.b;
        let y = 2 * self.a + 5 * self.b;
        Self::new(x, y)
    }

    /// All 96 classes of A⁻¹ℤ²/ℤ².
    pub fn all() -> Vec<ShiftVector> {
        let mut v = Vec::with_capacity(96);
        for a in 0..24 {
            for b in 0..4 {
                v.push(ShiftVector::new(a, b));
            }
        }
        v
    }
}

/// The signed families S_j^±.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ShiftFamily {
    pub j: usize,
    pub plus: [ShiftVector; 4],
    pub minus: [ShiftVector; 4],
}

const fn sv(a: i64, b: i64) -> ShiftVector {
    ShiftVector { a, b }
}

const FAMILIES: [([ShiftVector; 4], [ShiftVector; 4]); 3] = [
    (
        [sv(7, 0), sv(17, 0), sv(11, 2), sv(13, 2)],
        [sv(1, 0), sv(23, 0), sv(5, 2), sv(19, 2)],
    ),
    (
        [sv(11, 0), sv(13, 0), sv(7, 2), sv(17, 2)],
        [sv(5, 0), sv(19, 0), sv(1, 2), sv(23, 2)],
    ),
    (
        [sv(10, 1), sv(14, 1), sv(10, 3), sv(14, 3)],
        [sv(2, 1), sv(22, 1), sv(2, 3), sv(22, 3)],
    ),
];

pub fn family(j: usize) -> ShiftFamily {
    let (plus, minus) = FAMILIES[j];
    ShiftFamily { j, plus, minus }
}

impl ShiftFamily {
    /// (μ, sign) pairs, plus side first.
    pub fn signed(&self) -> impl Iterator<Item = (ShiftVector, i64)> + '_ {
        self.plus
            .iter()
            .map(|&m| (m, 1))
            .chain(self.minus.iter().map(|&m| (m, -1)))
    }
}

fn check_j(j: usize) -> Result<()> {
    if j > 2 {
        return Err(Error::invalid(format!("component index {j} is not in 0..=2")));
    }
    Ok(())
}

/// Smallest integer ≥ `lo` congruent to `r` mod `m`.
fn first_at_least(lo: i64, r: i64, m: i64) -> i64 {
    lo + (r - lo).rem_euclid(m)
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

/// Calls `f(q48, twice_weight)` for every lattice point of μ + ℤ² on the
/// positive side with 0 < Q ≤ x48/48, where twice_weight ∈ {1, 2}.
fn visit_positive(mu: ShiftVector, x48: i64, mut f: impl FnMut(i64, i64)) {
    // 3|Y| ≤ |X| and 0 < X² − 6Y² ≤ x48 force X² ≤ 3 x48
    let xmax = isqrt_floor(3 * x48);
    let mut x = first_at_least(-xmax, mu.a, 24);
    while x <= xmax {
        let ax = x.abs();
        let x2 = x * x;
        let ylim = ax / 3;
        // Y² ≥ (X² − x48)/6
        let ymin = isqrt_ceil(((x2 - x48) + 5).div_euclid(6).max(0));
        // Y ranges over ymin ≤ |Y| ≤ ylim
        if ymin <= ylim {
            let mut y = first_at_least(-ylim, mu.b, 4);
            while y <= ylim {
                if y.abs() >= ymin {
                    let q = x2 - 6 * y * y;
                    if q > 0 && q <= x48 {
                        let w = if 3 * y.abs() == ax { 1 } else { 2 };
                        f(q, w);
                    }
                }
                y += 4;
            }
        }
        x += 24;
    }
}

/// As [`visit_positive`] for the negative side, reporting |48Q| = 6Y² − X².
fn visit_negative(mu: ShiftVector, x48: i64, mut f: impl FnMut(i64, i64)) {
    // |X| ≤ 2|Y| and 0 < 6Y² − X² ≤ x48 force 2Y² ≤ x48
    let ymax = isqrt_floor(x48 / 2);
    let mut y = first_at_least(-ymax, mu.b, 4);
    while y <= ymax {
        let ay = y.abs();
        let y6 = 6 * y * y;
        let xlim = 2 * ay;
        // X² ≥ 6Y² − x48
        let xmin = isqrt_ceil((y6 - x48).max(0));
        if xmin <= xlim {
            let mut x = first_at_least(-xlim, mu.a, 24);
            while x <= xlim {
                if x.abs() >= xmin {
                    let q = y6 - x * x;
                    if q > 0 && q <= x48 {
                        let w = if x.abs() == xlim { 1 } else { 2 };
                        f(q, w);
                    }
                }
                x += 24;
            }
        }
        y += 4;
    }
}

/// Coefficients of U_j for |n| ≤ x_max in quarter units: entry i of `pos`
/// is 4 d_j(β_j + i), entry i of `neg` is 4 d_j(β_j − 1 − i).
#[derive(Clone, Debug)]
pub struct CoefficientTable {
    pub j: usize,
    pub pos: Vec<i64>,
    pub neg: Vec<i64>,
}

impl CoefficientTable {
    pub fn build(j: usize, x_max: f64) -> Self {
        let x48 = (x_max * GRID as f64).floor() as i64;
        let b48 = beta48(j);
        let npos = if x48 >= b48 { ((x48 - b48) / GRID + 1) as usize } else { 0 };
        let nneg = if x48 >= GRID - b48 {
            ((x48 - (GRID - b48)) / GRID + 1) as usize
        } else {
            0
        };
        let mut pos = vec![0i64; npos];
        let mut neg = vec![0i64; nneg];
        for (mu, s) in family(j).signed() {
            visit_positive(mu, x48, |q, w| {
                let d = q - b48;
                debug_assert_eq!(d.rem_euclid(GRID), 0);
                pos[(d / GRID) as usize] += s * w;
            });
            visit_negative(mu, x48, |q, w| {
                // m = −q/48 = β − 1 − i
                let d = q + b48 - GRID;
                debug_assert_eq!(d.rem_euclid(GRID), 0);
                neg[(d / GRID) as usize] += s * w;
            });
        }
        Self { j, pos, neg }
    }

    /// d_j(n) for n on the grid; None outside the tabulated range.
    pub fn get(&self, n48: i64) -> Option<Ratio<i64>> {
        let b48 = beta48(self.j);
        if n48 > 0 {
            let i = (n48 - b48) / GRID;
            self.pos.get(i as usize).map(|&v| Ratio::new(v, 4))
        } else {
            let i = (b48 - GRID - n48) / GRID;
            self.neg.get(i as usize).map(|&v| Ratio::new(v, 4))
        }
    }

    /// Nonzero entries as (48 m, 4 d_j(m)), ordered by |m| then sign.
    pub fn nonzero(&self) -> Vec<(i64, i64)> {
        let b48 = beta48(self.j);
        let mut v: Vec<(i64, i64)> = Vec::new();
        for (i, &c) in self.pos.iter().enumerate() {
            if c != 0 {
                v.push((b48 + GRID * i as i64, c));
            }
        }
        for (i, &c) in self.neg.iter().enumerate() {
            if c != 0 {
                v.push((b48 - GRID - GRID * i as i64, c));
            }
        }
        v.sort_by_key(|&(m, _)| (m.abs(), m));
        v
    }
}

/// d_j(β_j + i) for i < count.
pub fn positive_coefficients(j: usize, count: usize) -> Vec<Ratio<i64>> {
    if count == 0 {
        return Vec::new();
    }
    let b = beta48(j) as f64 / GRID as f64;
    let t = CoefficientTable::build(j, b + (count - 1) as f64 + 0.5 / GRID as f64);
    t.pos.iter().take(count).map(|&v| Ratio::new(v, 4)).collect()
}

fn validate_index(j: usize, n: Ratio<i64>) -> Result<i64> {
    check_j(j)?;
    if n.is_zero() {
        return Err(Error::invalid("d_j(0) is not defined (no constant term)"));
    }
    if GRID % n.denom() != 0 {
        return Err(Error::invalid(format!("{n} is not on the 1/48 grid")));
    }
    let n48 = n.numer() * (GRID / n.denom());
    if (n48 - beta48(j)).rem_euclid(GRID) != 0 {
        return Err(Error::invalid(format!("{n} is not in ℤ + β_{j}")));
    }
    Ok(n48)
}

/// Weighted count a_μ(n) in quarter units for a single shift.
fn a_mu_quarters(mu: ShiftVector, n48: i64) -> i64 {
    let mut acc = 0;
    if n48 > 0 {
        let xmax = isqrt_floor(3 * n48);
        let mut x = first_at_least(-xmax, mu.a, 24);
        while x <= xmax {
            let t = x * x - n48;
            if t >= 0 && t % 6 == 0 {
                let y2 = t / 6;
                let y = isqrt_floor(y2);
                if y * y == y2 && 3 * y <= x.abs() {
                    for yy in if y == 0 { vec![0] } else { vec![y, -y] } {
                        if yy.rem_euclid(4) == mu.b {
                            acc += if 3 * y == x.abs() { 1 } else { 2 };
                        }
                    }
                }
            }
            x += 24;
        }
    } else {
        let m = -n48;
        let ymax = isqrt_floor(m / 2);
        let mut y = first_at_least(-ymax, mu.b, 4);
        while y <= ymax {
            let t = 6 * y * y - m;
            if t >= 0 {
                let x = isqrt_floor(t);
                if x * x == t && x <= 2 * y.abs() {
                    for xx in if x == 0 { vec![0] } else { vec![x, -x] } {
                        if xx.rem_euclid(24) == mu.a {
                            acc += if x == 2 * y.abs() { 1 } else { 2 };
                        }
                    }
                }
            }
            y += 4;
        }
    }
    acc
}

/// a_μ(n) = ½ Σ_{n ∈ μ+ℤ², Q(n) = n} (1 ± sgn·sgn) for one shift.
pub fn a_mu(mu: ShiftVector, n: Ratio<i64>) -> Result<Ratio<i64>> {
    if GRID % n.denom() != 0 || n.is_zero() {
        return Err(Error::invalid(format!("{n} is not a nonzero grid point")));
    }
    let n48 = n.numer() * (GRID / n.denom());
    Ok(Ratio::new(a_mu_quarters(mu, n48), 2))
}

/// d_j(n) = ½(Σ_{S_j^+} a_μ(n) − Σ_{S_j^−} a_μ(n)).
pub fn d_coefficient(j: usize, n: Ratio<i64>) -> Result<Ratio<i64>> {
    let n48 = validate_index(j, n)?;
    let q: i64 = family(j)
        .signed()
        .map(|(mu, s)| s * a_mu_quarters(mu, n48))
        .sum();
    Ok(Ratio::new(q, 4))
}

/// a_{c,μ,r}(n): the part of a_μ(n) from points n with n − μ ≡ r (mod c).
pub fn a_mu_class(mu: ShiftVector, c: i64, r: (i64, i64), n: Ratio<i64>) -> Result<Ratio<i64>> {
    if c < 1 || !(0..c).contains(&r.0) || !(0..c).contains(&r.1) {
        return Err(Error::invalid("residue class out of range"));
    }
    if GRID % n.denom() != 0 || n.is_zero() {
        return Err(Error::invalid(format!("{n} is not a nonzero grid point")));
    }
    let n48 = n.numer() * (GRID / n.denom());
    let x48 = n48.abs();
    let mut acc = 0i64;
    let mut take = |x: i64, y: i64, w: i64| {
        let k1 = (x - mu.a) / 24;
        let k2 = (y - mu.b) / 4;
        if k1.rem_euclid(c) == r.0 && k2.rem_euclid(c) == r.1 {
            acc += w;
        }
    };
    if n48 > 0 {
        visit_points_positive(mu, x48, |x, y, q, w| {
            if q == n48 {
                take(x, y, w)
            }
        });
    } else {
        visit_points_negative(mu, x48, |x, y, q, w| {
            if q == -n48 {
                take(x, y, w)
            }
        });
    }
    Ok(Ratio::new(acc, 2))
}

fn visit_points_positive(mu: ShiftVector, x48: i64, mut f: impl FnMut(i64, i64, i64, i64)) {
    let xmax = isqrt_floor(3 * x48);
    let mut x = first_at_least(-xmax, mu.a, 24);
    while x <= xmax {
        let ylim = x.abs() / 3;
        let mut y = first_at_least(-ylim, mu.b, 4);
        while y <= ylim {
            let q = x * x - 6 * y * y;
            if q > 0 && q <= x48 {
                f(x, y, q, if 3 * y.abs() == x.abs() { 1 } else { 2 });
            }
            y += 4;
        }
        x += 24;
    }
}

fn visit_points_negative(mu: ShiftVector, x48: i64, mut f: impl FnMut(i64, i64, i64, i64)) {
    let ymax = isqrt_floor(x48 / 2);
    let mut y = first_at_least(-ymax, mu.b, 4);
    while y <= ymax {
        let xlim = 2 * y.abs();
        let mut x = first_at_least(-xlim, mu.a, 24);
        while x <= xlim {
            let q = 6 * y * y - x * x;
            if q > 0 && q <= x48 {
                f(x, y, q, if x.abs() == xlim { 1 } else { 2 });
            }
            x += 24;
        }
        y += 4;
    }
}

/// Reference enumeration straight from the sign-factor definition, over a
/// box that certainly contains the region. Quarter units, keyed by 48Q.
pub fn naive_coefficients(j: usize, x_max: i64) -> BTreeMap<i64, i64> {
    let sgn = |v: Ratio<i64>| -> i64 {
        if v > Ratio::zero() {
            1
        } else if v < Ratio::zero() {
            -1
        } else {
            0
        }
    };
    let mut out = BTreeMap::new();
    let r = 2 * (x_max as f64).sqrt() as i64 + 3;
    for (mu, s) in family(j).signed() {
        for i1 in -r..=r {
            let n1 = mu.mu1() + i1;
            for i2 in -3 * r..=3 * r {
                let n2 = mu.mu2() + i2;
                let q = n1 * n1 * 12 - n2 * n2 * 2;
                if q.is_zero() || q.abs() > Ratio::from_integer(x_max) {
                    continue;
                }
                let w2 = if q > Ratio::zero() {
                    1 + sgn(n1 * 2 + n2) * sgn(n1 * 2 - n2)
                } else {
                    1 - sgn(n1 * 3 + n2) * sgn(n1 * 3 - n2)
                };
                if w2 != 0 {
                    let key = (q * 48).to_integer();
                    *out.entry(key).or_insert(0) += s * w2;
                }
            }
        }
    }
    out.retain(|_, v| *v != 0);
    out
}

/// Partial sums of d_j over a residue class and the density prediction.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityReport {
    /// Σ d_j(n) over 0 < n ≤ X, n ≡ r + β_j (mod c).
    pub positive_sum: Ratio<i64>,
    /// Σ d_j(n) over −X ≤ n < 0, n ≡ r + β_j (mod c).
    pub negative_sum: Ratio<i64>,
    /// 𝒜_{j,r,c} · X.
    pub prediction: f64,
    /// 𝒜_{j,r,c}.
    pub class_density: f64,
}

/// 𝒜_{j,r,c} = 𝒜/(2c²) (Σ_{S⁺} − Σ_{S⁻}) #{r ∈ (ℤ/c)² : Q(μ + r) ≡ r + β_j (mod c)}.
pub fn class_density(j: usize, r: i64, c: i64) -> Result<f64> {
    check_j(j)?;
    if c < 1 || !(0..c).contains(&r) {
        return Err(Error::invalid("need c ≥ 1 and 0 ≤ r < c"));
    }
    let b48 = beta48(j);
    let mut count = 0i64;
    for (mu, s) in family(j).signed() {
        for r1 in 0..c {
            for r2 in 0..c {
                let x = mu.a + 24 * r1;
                let y = mu.b + 4 * r2;
                let q48 = x * x - 6 * y * y;
                // (Q − β_j) is an integer; compare it with r mod c
                let t = (q48 - b48) / GRID;
                if (t - r).rem_euclid(c) == 0 {
                    count += s;
                }
            }
        }
    }
    Ok(density_constant() * count as f64 / (2.0 * (c * c) as f64))
}

pub fn partial_sum_density(j: usize, r: i64, c: i64, x: f64) -> Result<DensityReport> {
    let class_density = class_density(j, r, c)?;
    if x < 0.0 {
        return Err(Error::invalid("X must be non-negative"));
    }
    let t = CoefficientTable::build(j, x);
    let mut pos = 0i64;
    for (i, &v) in t.pos.iter().enumerate() {
        if (i as i64 - r).rem_euclid(c) == 0 {
            pos += v;
        }
    }
    let mut neg = 0i64;
    for (i, &v) in t.neg.iter().enumerate() {
        // n = β − 1 − i, so n − β ≡ −1 − i
        if ((-1 - i as i64) - r).rem_euclid(c) == 0 {
            neg += v;
        }
    }
    Ok(DensityReport {
        positive_sum: Ratio::new(pos, 4),
        negative_sum: Ratio::new(neg, 4),
        prediction: class_density * x,
        class_density,
    })
}

/// Weighted point counts of a single shift with 0 < Q ≤ X and −X ≤ Q < 0.
pub fn shift_counts(mu: ShiftVector, x: f64) -> (Ratio<i64>, Ratio<i64>) {
    let x48 = (x * GRID as f64).floor() as i64;
    let mut p = 0;
    visit_positive(mu, x48, |_, w| p += w);
    let mut n = 0;
    visit_negative(mu, x48, |_, w| n += w);
    (Ratio::new(p, 2), Ratio::new(n, 2))
}

const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// Modified Bessel function K₀ for x > 0.
pub fn bessel_k0(x: f64) -> f64 {
    assert!(x > 0.0, "K0 needs a positive argument");
    if x <= 2.0 {
        // K₀ = −(ln(x/2) + γ) I₀ + Σ_{k≥1} H_k (x²/4)^k / (k!)²
        let y = x * x / 4.0;
        let mut term = 1.0;
        let mut i0 = 1.0;
        let mut s = 0.0;
        let mut h = 0.0;
        for k in 1..60 {
            let kf = k as f64;
            term *= y / (kf * kf);
            h += 1.0 / kf;
            i0 += term;
            s += h * term;
            if term < 1e-18 * i0 {
                break;
            }
        }
        -((x / 2.0).ln() + EULER_GAMMA) * i0 + s
    } else if x < 30.0 {
        // ∫₀^∞ e^{−x cosh t} dt by the trapezoidal rule, scaled by e^{x}
        let h = 0.125;
        let mut s = 0.5;
        let mut k = 1;
        loop {
            let t = k as f64 * h;
            let v = (-x * (t.cosh() - 1.0)).exp();
            s += v;
            if v < 1e-18 {
                break;
            }
            k += 1;
        }
        h * s * (-x).exp()
    } else {
        // √(π/2x) e^{−x} Σ (−1)^k ((2k−1)!!)² / (k! (8x)^k)
        let mut term = 1.0;
        let mut sum = 1.0;
        for k in 1..30 {
            let kf = k as f64;
            let next = term * -((2.0 * kf - 1.0).powi(2)) / (kf * 8.0 * x);
            if next.abs() > term.abs() {
                break;
            }
            term = next;
            sum += term;
            if term.abs() < 1e-17 * sum.abs() {
                break;
            }
        }
        (std::f64::consts::PI / (2.0 * x)).sqrt() * (-x).exp() * sum
    }
}

/// Truncated Fourier evaluation of U_j together with a tail estimate.
#[derive(Clone, Debug)]
pub struct UEvaluation {
    pub value: Complex64,
    pub n_cut: usize,
    pub tail_bound: f64,
}

/// Smallest N with √N e^{−2πN y} < 1e−16.
pub fn default_cutoff(y: f64) -> usize {
    let mut n = 1usize;
    while (n as f64).sqrt() * (-2.0 * std::f64::consts::PI * n as f64 * y).exp() >= 1e-16 {
        n += 1;
    }
    n
}

/// U_j(τ) = √y Σ_{n ∈ ℤ+β_j} d_j(n) K₀(2π|n|y) e^{2πinx}, truncated at |n| ≤ n_cut.
pub fn evaluate_u(j: usize, tau: Complex64, n_cut: Option<usize>) -> Result<UEvaluation> {
    check_j(j)?;
    if tau.im <= 0.0 {
        return Err(Error::invalid("τ must lie in the upper half-plane"));
    }
    let (x, y) = (tau.re, tau.im);
    let n_cut = n_cut.unwrap_or_else(|| default_cutoff(y));
    let table = CoefficientTable::build(j, n_cut as f64);
    let two_pi = 2.0 * std::f64::consts::PI;
    let mut acc = Complex64::new(0.0, 0.0);
    for (m48, q) in table.nonzero() {
        let m = m48 as f64 / GRID as f64;
        let d = q as f64 / 4.0;
        let k = bessel_k0(two_pi * m.abs() * y);
        acc += Complex64::from_polar(d * k, two_pi * m * x);
    }
    // d_j(n) ≪ √n and K₀(z) ≤ √(π/2z) e^{−z}: bound the first omitted shells
    let c = 2.0;
    let mut tail = 0.0;
    for n in (n_cut + 1)..(n_cut + 200) {
        let z = two_pi * n as f64 * y;
        tail += 2.0 * c * (n as f64).sqrt() * (std::f64::consts::PI / (2.0 * z)).sqrt() * (-z).exp();
    }
    Ok(UEvaluation {
        value: acc * y.sqrt(),
        n_cut,
        tail_bound: tail * y.sqrt(),
    })
}

/// Exact rational value as f64.
pub fn ratio_f64(r: Ratio<i64>) -> f64 {
    r.to_f64().unwrap_or(f64::NAN)
}

/// `n48` is a valid index of U_j.
pub fn on_grid(j: usize, n48: i64) -> bool {
    n48 != 0 && (n48 - beta48(j)).mod_floor(&GRID) == 0
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn families_have_the_right_norm_class() {
        for j in 0..3 {
            for (mu, _) in family(j).signed() {
                assert_eq!((mu.q48() - beta48(j)).rem_euclid(GRID), 0, "j={j} {mu:?}");
            }
        }
    }

    #[test]
    fn gamma_preserves_each_family() {
        for j in 0..3 {
            let f = family(j);
            for set in [f.plus, f.minus] {
                let mut img: Vec<_> = set.iter().map(|m| m.gamma_image()).collect();
                let mut orig = set.to_vec();
                img.sort();
                orig.sort();
                assert_eq!(img, orig, "j = {j}");
            }
        }
    }

    #[test]
    fn leading_coefficient_of_u0() {
        assert_eq!(d_coefficient(0, Ratio::new(1, 48)).unwrap(), Ratio::from_integer(-1));
    }

    #[test]
    fn rejects_bad_indices() {
        assert!(d_coefficient(0, Ratio::from_integer(0)).is_err());
        assert!(d_coefficient(0, Ratio::new(25, 48)).is_err());
        assert!(d_coefficient(3, Ratio::new(1, 48)).is_err());
    }

    #[test]
    fn bulk_table_matches_pointwise_and_naive() {
        for j in 0..3 {
            let t = CoefficientTable::build(j, 30.0);
            let naive = naive_coefficients(j, 30);
            for (m48, q) in t.nonzero() {
                assert_eq!(naive.get(&m48), Some(&q), "j={j} m48={m48}");
                let d = d_coefficient(j, Ratio::new(m48, 48)).unwrap();
                assert_eq!(d, Ratio::new(q, 4));
            }
            assert_eq!(naive.len(), t.nonzero().len());
        }
    }

    #[test]
    fn residue_classes_partition_counts() {
        let mu = family(1).plus[2];
        for m in 0..12 {
            let n = Ratio::new(mu.q48().rem_euclid(48), 48) + m;
            let total = a_mu(mu, n).unwrap();
            let mut s = Ratio::from_integer(0);
            for r1 in 0..5 {
                for r2 in 0..5 {
                    s += a_mu_class(mu, 5, (r1, r2), n).unwrap();
                }
            }
            assert_eq!(s, total);
        }
    }

    #[test]
    fn class_densities_sum_consistently() {
        for j in 0..3 {
            let total1: f64 = (0..1).map(|r| class_density(j, r, 1).unwrap()).sum();
            for c in 2..6 {
                let total: f64 = (0..c).map(|r| class_density(j, r, c).unwrap()).sum();
                assert!((total - total1).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn empty_partial_sum() {
        let r = partial_sum_density(0, 0, 1, 0.0).unwrap();
        assert_eq!(r.positive_sum, Ratio::from_integer(0));
        assert_eq!(r.negative_sum, Ratio::from_integer(0));
    }

    #[test]
    fn k0_reference_values() {
        let cases = [
            (0.01, 4.7212447301610949651),
            (0.1, 2.4270690247020166125),
            (0.5, 0.92441907122766586178),
            (1.0, 0.42102443824070833334),
            (2.0, 0.11389387274953343565),
            (2.5, 0.062347553200366186029),
            (5.0, 0.0036910983340425942747),
            (10.0, 0.000017780062316167651811),
            (30.0, 2.1324774964630563712e-14),
            (60.0, 1.4138978405591078091e-27),
        ];
        for (x, v) in cases {
            let got = bessel_k0(x);
            assert!(((got - v) / v).abs() < 1e-14, "K0({x}) = {got}, want {v}");
        }
    }

    #[test]
    fn u_translation_phase() {
        let tau = Complex64::new(0.13, 0.9);
        for j in 0..3 {
            let a = evaluate_u(j, tau, None).unwrap().value;
            let b = evaluate_u(j, tau + 1.0, None).unwrap().value;
            let phase = Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI * beta48(j) as f64 / 48.0);
            assert!((b - phase * a).norm() < 1e-13 * a.norm().max(1e-3));
        }
    }
}
