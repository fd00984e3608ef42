//! Special functions, the Rademacher series for p(n), the circle-method
//! main term for α_j(n) and its leading-exponential expansion.
//!
//! The main term integrates Φ(t)·w(t) over [0, 1/24] with
//! w(t) = (1/24 − t)^{1/4} I_{1/2}(c√(1/24 − t)) = √(2/(πc)) sinh(c√(1/24 − t)).
//! The aggregated kernel is split into its poles with |m| < 3 and a remainder
//! whose Taylor series at 0 has radius ≥ 3, so each Farey term reduces to
//! moments of w and a few pole integrals. The pole at 1/48 is taken as a
//! principal value through (w(t) − w(1/48))/(t − 1/48).

use std::collections::{BTreeMap, HashMap};
use std::sync::{Arc, Mutex, OnceLock};

use num_bigint::BigInt;
use num_complex::{Complex, Complex64};
use num_rational::{BigRational, Ratio};
use num_traits::{One, Zero};
use rayon::prelude::*;
use serde_json::json;

use crate::error::{Error, Result};
use crate::kernel::{self, ClassPowerSums, KernelSums, SumConfig, TaylorBrackets};
use crate::maass;
use crate::modular::{self, circle_phase_turn, psi_exact, ModularTriple, MultiplierMatrix};
use crate::mp::{ratio_to_f64, Fixed, Real, F192, F320, F448, F640};
use crate::quadrature::gauss_legendre;
use crate::qseries::{self, delta48, GRID};

fn check_positive(x: f64) -> Result<()> {
    if !(x > 0.0) || !x.is_finite() {
        return Err(Error::invalid(format!("Bessel argument must be positive, got {x}")));
    }
    Ok(())
}

/// Σ_k (x/2)^{2k+ν}/(k! Γ(k+ν+1)) from its first term.
fn bessel_i_series(x: f64, first: f64, nu: f64) -> f64 {
    let q = x * x / 4.0;
    let mut term = first;
    let mut sum = term;
    for k in 1..200 {
        term *= q / (k as f64 * (k as f64 + nu));
        sum += term;
        if term.abs() < 1e-17 * sum.abs() {
            break;
        }
    }
    sum
}

/// I_{1/2}(x) = √(2/(πx)) sinh x.
pub fn bessel_i_half(x: f64) -> Result<f64> {
    check_positive(x)?;
    if x < 0.5 {
        // (x/2)^{1/2}/Γ(3/2)
        let first = (x / 2.0).sqrt() * 2.0 / std::f64::consts::PI.sqrt();
        return Ok(bessel_i_series(x, first, 0.5));
    }
    Ok((2.0 / (std::f64::consts::PI * x)).sqrt() * x.sinh())
}

/// I_{3/2}(x) = √(2/(πx)) (cosh x − sinh x / x).
pub fn bessel_i_threehalves(x: f64) -> Result<f64> {
    check_positive(x)?;
    if x < 1.0 {
        // (x/2)^{3/2}/Γ(5/2), Γ(5/2) = 3√π/4
        let first = (x / 2.0).powf(1.5) * 4.0 / (3.0 * std::f64::consts::PI.sqrt());
        return Ok(bessel_i_series(x, first, 1.5));
    }
    Ok((2.0 / (std::f64::consts::PI * x)).sqrt() * (x.cosh() - x.sinh() / x))
}

/// A_k(n) = Σ_{0≤h<k, (h,k)=1} e^{πi s(h,k) − 2πinh/k}; the sum is real.
pub fn kloosterman_a(k: i64, n: i64) -> Result<f64> {
    if k < 1 {
        return Err(Error::invalid("A_k needs k ≥ 1"));
    }
    let mut acc = Complex64::zero();
    for t in ModularTriple::all_for(k) {
        let turn = modular::dedekind_sum(t.h, k)? / 2 - Ratio::new((n % k) * t.h, k);
        acc += f64::cis_turn(*turn.numer(), *turn.denom());
    }
    Ok(acc.re)
}

/// (2π/(24n−1)^{3/4}) Σ_{k≤k_max} (A_k(n)/k) I_{3/2}(π√(24n−1)/(6k)).
pub fn rademacher_p(n: u64, k_max: u64) -> Result<f64> {
    if n < 1 || k_max < 1 {
        return Err(Error::invalid("need n ≥ 1 and k_max ≥ 1"));
    }
    let m = 24.0 * n as f64 - 1.0;
    let mut sum = 0.0;
    for k in 1..=k_max as i64 {
        let a = kloosterman_a(k, n as i64)?;
        if a != 0.0 {
            sum += a / k as f64 * bessel_i_threehalves(std::f64::consts::PI * m.sqrt() / (6.0 * k as f64))?;
        }
    }
    Ok(2.0 * std::f64::consts::PI / m.powf(0.75) * sum)
}

/// Nonzero (48m, 4d_ℓ(m)) with |m| < 3 for each ℓ.
fn small_poles() -> &'static [Vec<(i64, i64)>; 3] {
    static POLES: OnceLock<[Vec<(i64, i64)>; 3]> = OnceLock::new();
    POLES.get_or_init(|| {
        let list = |ell: usize| {
            kernel::coefficient_list(ell, 3.0)
                .iter()
                .copied()
                .filter(|&(m48, _)| m48.abs() < 3 * GRID)
                .collect()
        };
        [list(0), list(1), list(2)]
    })
}

/// Ψ_{M_{h,k}} in double precision, cached per (h, k).
fn psi_f64(t: &ModularTriple) -> Arc<MultiplierMatrix> {
    static CACHE: OnceLock<Mutex<HashMap<(i64, i64), Arc<MultiplierMatrix>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(v) = cache.lock().unwrap().get(&(t.h, t.k)) {
        return v.clone();
    }
    let e = psi_exact(&t.matrix, 0);
    let mut m = MultiplierMatrix::identity();
    for (j, row) in e.iter().enumerate() {
        for (l, c) in row.iter().enumerate() {
            m.entries[j][l] = c.eval::<f64>();
        }
    }
    let v = Arc::new(m);
    cache.lock().unwrap().insert((t.h, t.k), v.clone());
    v
}

/// Options for [`main_sum`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MainSumOptions {
    /// Minimum number of Gauss–Legendre nodes.
    pub quad_nodes: usize,
    /// Absolute tolerance on the total error estimate.
    pub tol: f64,
    /// Overrides ⌊√n⌋.
    pub k_max: Option<i64>,
}

impl Default for MainSumOptions {
    fn default() -> Self {
        Self { quad_nodes: 64, tol: 1e-3, k_max: None }
    }
}

/// Natural log of the size of the k-th Farey term: c/√24 with c = 4π√(n+Δ)/k.
fn term_scale(n48: i64, k: i64) -> f64 {
    4.0 * std::f64::consts::PI * (n48 as f64 / GRID as f64).sqrt() / (k as f64 * 24f64.sqrt())
}

/// Terms at most e^{20} are evaluated in double precision.
const FLOAT_SCALE: f64 = 20.0;

#[derive(Clone, Copy, Debug)]
struct KPlan {
    j: usize,
    k: i64,
    n48: i64,
    terms: usize,
    nodes: usize,
    bits: u32,
    float: bool,
}

fn plan(j: usize, n48: i64, k: i64, min_nodes: usize) -> KPlan {
    let scale = term_scale(n48, k);
    let mag_bits = scale / std::f64::consts::LN_2 + 8.0;
    // remainder terms decay like 72^{−r}
    let terms = (((mag_bits + 40.0) / 72f64.log2()).ceil() as usize + 2).max(4);
    let float = scale <= FLOAT_SCALE;
    let bits = if float { 53 } else { (mag_bits + 3.5 * terms as f64 + 64.0).ceil() as u32 };
    let target = if float { 60.0 } else { bits as f64 };
    // e^{a x} on [−1, 1] with a = scale/2 needs (e·a/(4N))^{2N} below the target,
    // and the pole at t = −1/24 costs about 3.5 bits per node
    let a = (scale / 2.0).max(1.0);
    let mut nodes = min_nodes.max(terms + 20).max(((target + 20.0) / 3.0).ceil() as usize);
    while 2.0 * nodes as f64 * (4.0 * nodes as f64 / (std::f64::consts::E * a)).log2() < target + 20.0 {
        nodes += 8;
    }
    KPlan { j, k, n48, terms, nodes, bits, float }
}

/// Contribution of one denominator k to the main sum.
#[derive(Clone, Debug)]
pub struct KTerm {
    pub k: i64,
    pub re: BigRational,
    pub im: BigRational,
    /// Node-refinement difference plus truncation estimates.
    pub error: f64,
    pub precision_bits: u32,
    pub taylor_terms: usize,
    pub nodes: usize,
}

struct Integrals<R> {
    /// 24^r ∫ t^r w(t) dt
    moments: Vec<R>,
    /// ∫ w(t)/(t − m) dt, principal value at m = 1/48
    poles: BTreeMap<i64, R>,
}

fn rule_integrals<R: Real>(nodes: usize, c: &R, amp: &R, terms: usize, poles: &[i64]) -> Integrals<R> {
    let rule = gauss_legendre::<R>(nodes);
    let l = (R::one() / R::from_i64(24)).sqrt();
    let pts = rule.on(&R::zero(), &l);
    let inv24 = R::one() / R::from_i64(24);
    let w0 = amp.clone() * (c.clone() * (R::one() / R::from_i64(48)).sqrt()).sinh();
    let mut moments = vec![R::zero(); terms];
    let mut pole_int: BTreeMap<i64, R> = poles.iter().map(|&m| (m, R::zero())).collect();
    let pole_vals: Vec<(i64, R)> = poles.iter().map(|&m| (m, R::from_ratio(&BigInt::from(m), &BigInt::from(GRID)))).collect();
    for (s, wt) in pts {
        let s2 = s.clone() * s.clone();
        let t = inv24.clone() - s2.clone();
        let jac = R::from_i64(2) * s.clone() * wt;
        let w = amp.clone() * (c.clone() * s).sinh();
        let ws = jac.clone() * w.clone();
        let step = R::one() - R::from_i64(24) * s2;
        let mut pw = ws.clone();
        for m in moments.iter_mut() {
            *m = m.clone() + pw.clone();
            pw = pw * step.clone();
        }
        for (m48, mv) in &pole_vals {
            let d = t.clone() - mv.clone();
            let v = if *m48 == 1 {
                jac.clone() * (w.clone() - w0.clone()) / d
            } else {
                ws.clone() / d
            };
            let e = pole_int.get_mut(m48).unwrap();
            *e = e.clone() + v;
        }
    }
    Integrals { moments, poles: pole_int }
}

fn complex_norm<R: Real>(z: &Complex<R>) -> f64 {
    z.re.to_f64().hypot(z.im.to_f64())
}

fn k_term<R: Real>(p: &KPlan) -> Result<KTerm> {
    let KPlan { j, k, n48, terms, nodes, .. } = *p;
    let nd = R::from_ratio(&BigInt::from(n48), &BigInt::from(GRID));
    let pi = R::pi();
    let c = R::from_i64(4) * pi.clone() * nd.sqrt() / R::from_i64(k);
    let amp = (R::from_i64(2) / (pi * c.clone())).sqrt();

    let poles = small_poles();
    let mut pole_keys: Vec<i64> = poles.iter().flatten().map(|&(m, _)| m).collect();
    pole_keys.sort_unstable();
    pole_keys.dedup();

    let fine = nodes + nodes / 4;
    let rules = [
        rule_integrals(nodes, &c, &amp, terms, &pole_keys),
        rule_integrals(fine, &c, &amp, terms, &pole_keys),
    ];

    let brackets = TaylorBrackets::cached(j, k, if p.float { 2 } else { terms })?;
    let exact_orders = if p.float { 2 } else { terms };
    let power_sums = if p.float { Some(ClassPowerSums::cached(k, terms - 1)) } else { None };
    let scale_div: Vec<BigInt> = (0..exact_orders)
        .map(|r| (1..=r).fold(BigInt::one(), |a, i| a * BigInt::from(i)) * BigInt::from(24).pow(r as u32))
        .collect();

    let czero = || Complex::new(R::zero(), R::zero());
    let mut acc = [czero(), czero()];
    let mut truncation = 0.0;
    for t in ModularTriple::all_for(k) {
        let psi: [Complex<R>; 3] = if p.float {
            let m = psi_f64(&t);
            let e = m.entries[j];
            [0, 1, 2].map(|l| Complex::new(R::from_f64(e[l].re), R::from_f64(e[l].im)))
        } else {
            let e = psi_exact(&t.matrix, 0);
            [0, 1, 2].map(|l| e[j][l].eval::<R>())
        };
        let order = 48 * k;
        // ρ_m = Σ_ℓ Ψ(j,ℓ) d_ℓ(m) e^{2πih′m/k}
        let mut rho: BTreeMap<i64, Complex<R>> = BTreeMap::new();
        for (ell, list) in poles.iter().enumerate() {
            for &(m48, q4) in list {
                let d = R::from_ratio(&BigInt::from(q4), &BigInt::from(4));
                let z = R::cis_turn((t.h_prime * m48).rem_euclid(order), order) * psi[ell].clone();
                let e = rho.entry(m48).or_insert_with(czero);
                *e = e.clone() + z.scale(d);
            }
        }
        // G_r = g_r/24^r with g_r the Taylor coefficients of the pole-free remainder
        let mut g: Vec<Complex<R>> = Vec::with_capacity(terms);
        for r in 0..terms {
            if r < exact_orders {
                let mut v = brackets.aggregated_scaled::<R>(t.h, r, &scale_div[r]);
                for (&m48, z) in &rho {
                    // 48^{r+1}/(m48^{r+1} 24^r) = 48·2^r/m48^{r+1}
                    let f = R::from_ratio(
                        &(BigInt::from(48) << r),
                        &BigInt::from(m48).pow(r as u32 + 1),
                    );
                    v = v + z.clone().scale(f);
                }
                g.push(v);
            } else {
                let ps = power_sums.as_ref().unwrap();
                let mut v = Complex64::zero();
                for (ell, z) in psi.iter().enumerate() {
                    let zf = Complex64::new(z.re.to_f64(), z.im.to_f64());
                    v -= zf * ps.twisted(ell, r, t.h_prime);
                }
                v /= 24f64.powi(r as i32);
                g.push(Complex::new(R::from_f64(v.re), R::from_f64(v.im)));
            }
        }
        let turn = circle_phase_turn(&t) - Ratio::new(2 * t.h_prime + n48 * t.h, 48 * k);
        let phase = R::cis_turn(*turn.numer(), *turn.denom());
        for (slot, ints) in acc.iter_mut().zip(&rules) {
            let mut integral = czero();
            for (gr, m) in g.iter().zip(&ints.moments) {
                integral = integral + gr.clone().scale(m.clone());
            }
            for (m48, z) in &rho {
                integral = integral + z.clone().scale(ints.poles[m48].clone());
            }
            *slot = slot.clone() + phase.clone() * integral;
        }
        truncation += complex_norm(&g[terms - 1]) * rules[1].moments[terms - 1].to_f64().abs();
    }
    let pre = R::from_i64(2) / (nd.sqrt().sqrt() * R::from_i64(k));
    let coarse = acc[0].clone().scale(pre.clone());
    let value = acc[1].clone().scale(pre.clone());
    let pre_f = pre.to_f64();
    let mut error = complex_norm(&(value.clone() - coarse)) + 2.0 * truncation * pre_f;
    if p.float {
        // direct sums stop at 2·10⁵; the r = 2 tail dominates
        let m2 = rules[1].moments[2.min(terms - 1)].to_f64().abs();
        let count = ModularTriple::all_for(k).len() as f64;
        error += count * 3.0 * maass::density_constant() / (2e5f64).powi(2) / 576.0 * m2 * pre_f;
    }
    Ok(KTerm {
        k,
        re: value.re.to_ratio(),
        im: value.im.to_ratio(),
        error,
        precision_bits: p.bits,
        taylor_terms: terms,
        nodes: p.nodes,
    })
}

fn dispatch(p: &KPlan) -> Result<KTerm> {
    if p.float {
        return k_term::<f64>(p);
    }
    match p.bits {
        0..=192 => k_term::<F192>(p),
        193..=320 => k_term::<F320>(p),
        321..=448 => k_term::<F448>(p),
        449..=640 => k_term::<F640>(p),
        641..=1024 => k_term::<Fixed<1024>>(p),
        1025..=1536 => k_term::<Fixed<1536>>(p),
        1537..=2048 => k_term::<Fixed<2048>>(p),
        b => Err(Error::invalid(format!("main sum would need {b} bits; n is too large"))),
    }
}

/// The circle-method main term split by denominator.
#[derive(Clone, Debug)]
pub struct MainSum {
    pub j: usize,
    pub n: u64,
    pub terms: Vec<KTerm>,
}

impl MainSum {
    /// Σ_{k ≤ k_max} of the real and imaginary parts, exactly as accumulated.
    pub fn partial(&self, k_max: i64) -> (BigRational, BigRational) {
        let mut re = BigRational::zero();
        let mut im = BigRational::zero();
        for t in self.terms.iter().filter(|t| t.k <= k_max) {
            re += &t.re;
            im += &t.im;
        }
        (re, im)
    }

    pub fn total(&self) -> (BigRational, BigRational) {
        self.partial(i64::MAX)
    }

    pub fn value(&self) -> f64 {
        let (re, _) = self.total();
        ratio_to_f64(re.numer(), re.denom())
    }

    pub fn imag(&self) -> f64 {
        let (_, im) = self.total();
        ratio_to_f64(im.numer(), im.denom())
    }

    pub fn error(&self) -> f64 {
        self.terms.iter().map(|t| t.error).sum()
    }
}

pub fn main_sum(j: usize, n: u64, opts: MainSumOptions) -> Result<MainSum> {
    if j > 2 {
        return Err(Error::invalid(format!("component index {j} is not in 0..=2")));
    }
    if n < 1 {
        return Err(Error::invalid("n must be at least 1"));
    }
    let k_max = opts.k_max.unwrap_or((n as f64).sqrt().floor() as i64).max(1);
    let n48 = GRID * n as i64 + delta48(j);
    let plans: Vec<KPlan> = (1..=k_max).map(|k| plan(j, n48, k, opts.quad_nodes)).collect();
    let terms: Vec<KTerm> = plans.par_iter().map(dispatch).collect::<Result<_>>()?;
    let out = MainSum { j, n, terms };
    let err = out.error();
    if !(err <= opts.tol) {
        return Err(Error::NonConvergence { what: "main-sum quadrature".into(), achieved: err });
    }
    Ok(out)
}

/// Main term against the exact coefficient.
#[derive(Clone, Debug, PartialEq)]
pub struct AsymptoticReport {
    pub j: usize,
    pub n: u64,
    pub main_sum: f64,
    pub exact: Option<BigInt>,
    pub residual: Option<f64>,
    pub residual_over_n34: Option<f64>,
    pub error_estimate: f64,
}

impl AsymptoticReport {
    pub fn to_json(&self) -> serde_json::Value {
        json!({
            "j": self.j,
            "n": self.n,
            "exact": self.exact.as_ref().map(|e| e.to_string()),
            "main_sum": self.main_sum,
            "residual": self.residual,
            "n34_ratio": self.residual_over_n34,
        })
    }
}

/// Exact coefficients are computed up to this n by default.
pub const EXACT_LIMIT: u64 = 5000;

fn report(s: &MainSum, exact: Option<BigInt>) -> Result<AsymptoticReport> {
    let (re, im) = s.total();
    let main = ratio_to_f64(re.numer(), re.denom());
    let imag = ratio_to_f64(im.numer(), im.denom());
    if imag.abs() > 1e-9 * main.abs().max(1.0) {
        return Err(Error::check(format!("main sum has imaginary part {imag:e} against {main:e}")));
    }
    let residual = exact.as_ref().map(|e| {
        let r = BigRational::from_integer(e.clone()) - re;
        ratio_to_f64(r.numer(), r.denom())
    });
    Ok(AsymptoticReport {
        j: s.j,
        n: s.n,
        main_sum: main,
        residual_over_n34: residual.map(|r| r / (s.n as f64).powf(0.75)),
        exact,
        residual,
        error_estimate: s.error(),
    })
}

/// The circle-method main term for α_j(n), with the exact value when n ≤ [`EXACT_LIMIT`].
pub fn main_term_report(j: usize, n: u64, quad_nodes: usize, tol: f64) -> Result<AsymptoticReport> {
    let s = main_sum(j, n, MainSumOptions { quad_nodes, tol, k_max: None })?;
    let exact = if n <= EXACT_LIMIT { Some(qseries::alpha(j, n as usize)?[n as usize].clone()) } else { None };
    report(&s, exact)
}

/// Reports for several n, sharing one exact computation.
pub fn scan(j: usize, ns: &[u64], opts: MainSumOptions, with_exact: bool) -> Result<Vec<AsymptoticReport>> {
    let top = ns.iter().copied().max().unwrap_or(0);
    if with_exact && top > EXACT_LIMIT {
        return Err(Error::invalid(format!("exact coefficients are limited to n ≤ {EXACT_LIMIT}")));
    }
    let alpha = if with_exact { Some(qseries::alpha(j, top as usize)?) } else { None };
    ns.iter()
        .map(|&n| {
            let s = main_sum(j, n, opts)?;
            report(&s, alpha.as_ref().map(|a| a[n as usize].clone()))
        })
        .collect()
}

/// ∫₀^{1/24} (f(t) − f(m))/(t − m) dt in the variable s = √(1/24 − t).
/// Equals PV∫ f(t)/(t − m) dt when m = 1/48, where PV∫ dt/(t − m) vanishes.
pub fn pv_integral(f: impl Fn(f64) -> f64, m: f64, nodes: usize) -> f64 {
    let rule = gauss_legendre::<f64>(nodes);
    let fm = f(m);
    rule.on(&0.0, &(1.0 / 24f64).sqrt())
        .into_iter()
        .map(|(s, wt)| {
            let t = 1.0 / 24.0 - s * s;
            2.0 * s * wt * (f(t) - fm) / (t - m)
        })
        .sum()
}

/// Main term by quadrature of Φ* itself, with kernel values from symmetric sums.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DirectMainSum {
    pub value: Complex64,
    pub error: f64,
}

pub fn main_sum_direct(j: usize, n: u64, nodes: usize, config: SumConfig) -> Result<DirectMainSum> {
    if j > 2 || n < 1 {
        return Err(Error::invalid("need j ≤ 2 and n ≥ 1"));
    }
    let k_max = (n as f64).sqrt().floor() as i64;
    let n48 = GRID * n as i64 + delta48(j);
    let nd = n48 as f64 / GRID as f64;
    let m0 = 1.0 / 48.0;
    let jobs: Vec<(ModularTriple, usize)> = (1..=k_max)
        .flat_map(|k| ModularTriple::all_for(k).into_iter().flat_map(|t| (0..3).map(move |l| (t, l))))
        .collect();
    let parts: Vec<(Complex64, f64)> = jobs
        .par_iter()
        .map(|&(t, ell)| {
            let k = t.k as f64;
            let c = 4.0 * std::f64::consts::PI * nd.sqrt() / k;
            let amp = (2.0 / (std::f64::consts::PI * c)).sqrt();
            let w = |t: f64| amp * (c * (1.0 / 24.0 - t).max(0.0).sqrt()).sinh();
            let sums = KernelSums::new(ell, t.h_prime, t.k, config)?;
            let rule = gauss_legendre::<f64>(nodes);
            let mut smooth = Complex64::zero();
            let mut mass = 0.0;
            for (s, wt) in rule.on(&0.0, &(1.0 / 24f64).sqrt()) {
                let tt = 1.0 / 24.0 - s * s;
                let jw = 2.0 * s * wt * w(tt);
                smooth += sums.phi_star(tt) * jw;
                mass += jw.abs();
            }
            let integral = smooth + sums.pole_residue() * pv_integral(w, m0, nodes);
            let psi = psi_f64(&t).entries[j][ell];
            let turn = circle_phase_turn(&t) - Ratio::new(2 * t.h_prime + n48 * t.h, 48 * t.k);
            let phase = f64::cis_turn(*turn.numer(), *turn.denom());
            let pre = 2.0 / (nd.powf(0.25) * k);
            Ok((phase * psi * integral * pre, psi.norm() * sums.error_bound(1.0 / 24.0) * mass * pre))
        })
        .collect::<Result<_>>()?;
    let mut value = Complex64::zero();
    let mut error = 0.0;
    for (v, e) in parts {
        value += v;
        error += e;
    }
    Ok(DirectMainSum { value, error })
}

/// Coefficients a_r of α_j(n) ~ e^{4π√((n+Δ)/24)}/(n+Δ) Σ_r a_r (n+Δ)^{−r/2}.
#[derive(Clone, Debug, PartialEq)]
pub struct LeadingExpansion {
    pub j: usize,
    pub coefficients: Vec<f64>,
    pub delta: Ratio<i64>,
    /// a_r = 4√3/(4π√6)^{r+2} · Σ_p c_p π^p; entry r maps p ↦ c_p.
    pub pi_polynomials: Vec<BTreeMap<i32, BigRational>>,
}

impl LeadingExpansion {
    /// Σ_{r < terms} a_r x^{−r/2} times the exponential prefactor, skipping leading zeros.
    pub fn evaluate(&self, n: u64, terms: usize) -> f64 {
        let x = n as f64 + ratio_to_f64(&BigInt::from(*self.delta.numer()), &BigInt::from(*self.delta.denom()));
        let pre = (4.0 * std::f64::consts::PI * (x / 24.0).sqrt()).exp() / x;
        let first = self.coefficients.iter().position(|a| *a != 0.0).unwrap_or(0);
        let mut s = 0.0;
        for r in first..(first + terms).min(self.coefficients.len()) {
            s += self.coefficients[r] * x.powf(-(r as f64) / 2.0);
        }
        pre * s
    }
}

/// a_r = 4√3/(4π√6)^{r+2} [d^r/du^r (1−12u) Σ_ℓ Ψ_S(j,ℓ)Φ_{ℓ,0}(u(1−6u))]_{u=0},
/// expanded by the chain rule over the exact Taylor values.
pub fn leading_expansion(j: usize, n_terms: usize) -> Result<LeadingExpansion> {
    if j > 2 || n_terms == 0 {
        return Err(Error::invalid("need j ≤ 2 and at least one term"));
    }
    if n_terms > 40 {
        return Err(Error::invalid("at most 40 expansion terms are supported"));
    }
    let q: Vec<BigRational> = (0..n_terms).map(|r| kernel::table_one_rational(j, r)).collect::<Result<_>>()?;
    let fact = |n: usize| (1..=n).fold(BigInt::one(), |a, i| a * BigInt::from(i));
    // (u − 6u²)^s as coefficient vectors up to u^{n−1}
    let mut power = vec![BigInt::zero(); n_terms];
    power[0] = BigInt::one();
    let mut polys = Vec::with_capacity(n_terms);
    let mut coefficients = Vec::with_capacity(n_terms);
    let mut powers = Vec::with_capacity(n_terms);
    for _ in 0..n_terms {
        powers.push(power.clone());
        let mut next = vec![BigInt::zero(); n_terms];
        for i in 0..n_terms {
            if i + 1 < n_terms {
                next[i + 1] += &power[i];
            }
            if i + 2 < n_terms {
                next[i + 2] -= &power[i] * 6;
            }
        }
        power = next;
    }
    for r in 0..n_terms {
        // r!·[u^r] (1 − 12u) Σ_s T_s/s! (u − 6u²)^s with T_s = q_s π^{2s+2}
        let mut poly: BTreeMap<i32, BigRational> = BTreeMap::new();
        for s in 0..n_terms {
            let mut c = BigRational::from_integer(powers[s][r].clone());
            if r >= 1 {
                c -= BigRational::from_integer(&powers[s][r - 1] * 12);
            }
            if c.is_zero() || q[s].is_zero() {
                continue;
            }
            let v = c * &q[s] * BigRational::new(fact(r), fact(s));
            *poly.entry(2 * s as i32 + 2).or_insert_with(BigRational::zero) += v;
        }
        poly.retain(|_, v| !v.is_zero());
        let scale = 4.0 * 3f64.sqrt() / (4.0 * std::f64::consts::PI * 6f64.sqrt()).powi(r as i32 + 2);
        let value: f64 = poly
            .iter()
            .map(|(&p, c)| ratio_to_f64(c.numer(), c.denom()) * std::f64::consts::PI.powi(p))
            .sum::<f64>()
            * scale;
        coefficients.push(value);
        polys.push(poly);
    }
    Ok(LeadingExpansion { j, coefficients, delta: qseries::delta(j), pi_polynomials: polys })
}

/// The closed forms a_0, …, a_3 in terms of T_r = Σ_ℓ Ψ_S(j,ℓ)Φ^{(r)}_{ℓ,0}(0).
pub fn closed_leading_coefficients(t: [f64; 4]) -> [f64; 4] {
    let pi = std::f64::consts::PI;
    let (s2, s3) = (2f64.sqrt(), 3f64.sqrt());
    [
        t[0] / (8.0 * s3 * pi.powi(2)),
        (t[1] - 12.0 * t[0]) / (96.0 * s2 * pi.powi(3)),
        (t[2] - 36.0 * t[1]) / (768.0 * s3 * pi.powi(4)),
        (t[3] - 72.0 * t[2] + 432.0 * t[1]) / (9216.0 * s2 * pi.powi(5)),
    ]
}

/// One n of [`expansion_check`].
#[derive(Clone, Debug, PartialEq)]
pub struct ExpansionRow {
    pub n: u64,
    pub exact: f64,
    /// 1-, 2-, 3-term truncations.
    pub partial: Vec<f64>,
    /// |exact − partial|/|exact| for each truncation.
    pub relative_residuals: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExpansionTable {
    pub j: usize,
    pub rows: Vec<ExpansionRow>,
    /// Log-log slope in n of the N-term residual over the (N−1)-term residual, N = 1, 2, 3.
    pub slopes: Vec<f64>,
}

/// Least-squares slope of ln y against ln x.
pub fn loglog_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let num: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let den: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    num / den
}

pub fn expansion_check(j: usize, ns: &[u64]) -> Result<ExpansionTable> {
    if ns.len() < 2 {
        return Err(Error::invalid("need at least two n for a slope"));
    }
    let top = *ns.iter().max().unwrap();
    if top > EXACT_LIMIT {
        return Err(Error::invalid(format!("exact coefficients are limited to n ≤ {EXACT_LIMIT}")));
    }
    let exp = leading_expansion(j, 5)?;
    let alpha = qseries::alpha(j, top as usize)?;
    let rows: Vec<ExpansionRow> = ns
        .iter()
        .map(|&n| {
            let exact = qseries::big_to_f64(&alpha[n as usize]);
            let partial: Vec<f64> = (1..=3).map(|t| exp.evaluate(n, t)).collect();
            let relative_residuals = partial.iter().map(|p| ((exact - p) / exact).abs()).collect();
            ExpansionRow { n, exact, partial, relative_residuals }
        })
        .collect();
    let xs: Vec<f64> = rows.iter().map(|r| r.n as f64).collect();
    let slopes = (0..3)
        .map(|t| {
            let ys: Vec<f64> = rows
                .iter()
                .map(|r| if t == 0 { r.relative_residuals[0] } else { r.relative_residuals[t] / r.relative_residuals[t - 1] })
                .collect();
            loglog_slope(&xs, &ys)
        })
        .collect();
    Ok(ExpansionTable { j, rows, slopes })
}

/// u_j(h/k + iV/k²) against (k/2π²) Σ_{r<N} (V/2π)^r Σ_ℓ Ψ_{M_{h,k}}(j,ℓ)Φ^{(r)}_{ℓ,h′/k}(0).
#[derive(Clone, Debug, PartialEq)]
pub struct RadialPoint {
    pub v: f64,
    pub series: Complex64,
    pub expansion: Complex64,
    /// |series − expansion| / V^N
    pub scaled_error: f64,
}

pub fn radial_limit_check(j: usize, triple: &ModularTriple, vs: &[f64], n_terms: usize) -> Result<Vec<RadialPoint>> {
    if vs.iter().any(|&v| !(v > 0.0)) || n_terms == 0 {
        return Err(Error::invalid("need V > 0 and at least one term"));
    }
    let k = triple.k as f64;
    let vmin = vs.iter().copied().fold(f64::INFINITY, f64::min);
    let count = ((40.0 * k * k / (2.0 * std::f64::consts::PI * vmin)).ceil() as usize + 64).min(400_000);
    let u = qseries::u_coeffs_from_lattice(j, count)?;
    let b = qseries::beta(j);
    let beta = *b.numer() as f64 / *b.denom() as f64;
    let brackets = TaylorBrackets::cached(j, triple.k, n_terms)?;
    vs.iter()
        .map(|&v| {
            let mut series = Complex64::zero();
            for (i, &c) in u.iter().enumerate().rev() {
                if c == 0 {
                    continue;
                }
                let x = i as f64 + beta;
                // q^x with q = e^{2πi(h/k + iV/k²)}
                let arg = 2.0 * std::f64::consts::PI * x * triple.h as f64 / k;
                series += Complex64::from_polar((-2.0 * std::f64::consts::PI * x * v / (k * k)).exp(), arg) * c as f64;
            }
            let mut expansion = Complex64::zero();
            for r in 0..n_terms {
                expansion += brackets.aggregated::<f64>(triple.h, r) * (v / (2.0 * std::f64::consts::PI)).powi(r as i32);
            }
            expansion *= k / (2.0 * std::f64::consts::PI.powi(2));
            Ok(RadialPoint { v, series, expansion, scaled_error: (series - expansion).norm() / v.powi(n_terms as i32) })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bessel_half_closed_form_vs_series() {
        let series = bessel_i_series(1.0, (0.5f64).sqrt() * 2.0 / std::f64::consts::PI.sqrt(), 0.5);
        let closed = (2.0 / std::f64::consts::PI).sqrt() * 1f64.sinh();
        assert!((series - closed).abs() < 1e-15);
        assert!((bessel_i_half(1.0).unwrap() - closed).abs() < 1e-15);
        assert!(bessel_i_half(0.0).is_err());
        let x = 1e-6;
        assert!(((std::f64::consts::PI * x / 2.0).sqrt() * bessel_i_half(x).unwrap() / x - 1.0).abs() < 1e-12);
    }

    #[test]
    fn bessel_threehalves_regimes_join() {
        for x in [0.999_999, 1.0, 1.000_001] {
            let a = bessel_i_threehalves(x).unwrap();
            let b = (2.0 / (std::f64::consts::PI * x)).sqrt() * (x.cosh() - x.sinh() / x);
            assert!((a - b).abs() < 1e-14, "{x}");
        }
        let mut prev = 0.0;
        for i in 1..500 {
            let v = bessel_i_threehalves(i as f64 * 0.1).unwrap();
            assert!(v > prev);
            prev = v;
        }
    }

    #[test]
    fn kloosterman_first() {
        for n in 1..20 {
            assert_eq!(kloosterman_a(1, n).unwrap(), 1.0);
        }
    }

    #[test]
    fn rademacher_small() {
        assert_eq!(rademacher_p(5, 5).unwrap().round(), 7.0);
        let p = qseries::partitions(200);
        let v = rademacher_p(200, 15).unwrap();
        assert!((v - qseries::big_to_f64(&p[200])).abs() < 0.5);
    }

    #[test]
    fn pv_of_constant_vanishes() {
        assert!(pv_integral(|_| 1.0, 1.0 / 48.0, 64).abs() < 1e-12);
    }

    #[test]
    fn closed_coefficients_match_chain_rule() {
        for j in 0..3 {
            let e = leading_expansion(j, 6).unwrap();
            let t: Vec<f64> = (0..4)
                .map(|r| {
                    let q = kernel::table_one_rational(j, r).unwrap();
                    ratio_to_f64(q.numer(), q.denom()) * std::f64::consts::PI.powi(2 * r as i32 + 2)
                })
                .collect();
            let closed = closed_leading_coefficients([t[0], t[1], t[2], t[3]]);
            for r in 0..4 {
                assert!((closed[r] - e.coefficients[r]).abs() <= 1e-12 * closed[r].abs().max(1e-300), "j={j} r={r}");
            }
        }
    }

    #[test]
    fn leading_constants() {
        let pi = std::f64::consts::PI;
        let (s2, s3) = (2f64.sqrt(), 3f64.sqrt());
        let want = [
            [0.0, pi / (6.0 * s2), (71.0 * pi * pi - 432.0) / (576.0 * s3)],
            [1.0 / (2.0 * s3), (23.0 * pi * pi - 144.0) / (288.0 * s2 * pi), (9745.0 * pi * pi - 19872.0) / (55296.0 * s3)],
            [1.0 / (2.0 * s3), (25.0 * pi * pi - 72.0) / (144.0 * s2 * pi), (2929.0 * pi * pi - 10800.0) / (13824.0 * s3)],
        ];
        for j in 0..3 {
            let e = leading_expansion(j, 3).unwrap();
            for r in 0..3 {
                assert!((e.coefficients[r] - want[j][r]).abs() < 1e-13, "j={j} r={r}: {}", e.coefficients[r]);
            }
        }
    }

    #[test]
    fn plan_switches_precision() {
        let n48 = GRID * 4000 - 1;
        assert!(!plan(0, n48, 1, 64).float);
        assert!(plan(0, n48, 20, 64).float);
        assert!(plan(0, n48, 1, 64).bits > 300);
    }

    fn ratio_value(t: &KTerm) -> Complex64 {
        Complex64::new(ratio_to_f64(t.re.numer(), t.re.denom()), ratio_to_f64(t.im.numer(), t.im.denom()))
    }

    #[test]
    fn exact_brackets_and_direct_sums_agree() {
        for j in 0..3 {
            for k in 1..=3 {
                let n48 = GRID * 100 + delta48(j);
                let mut p = plan(j, n48, k, 64);
                p.float = true;
                p.bits = 53;
                let a = ratio_value(&k_term::<f64>(&p).unwrap());
                p.float = false;
                p.bits = 256;
                let b = ratio_value(&dispatch(&p).unwrap());
                assert!((a - b).norm() <= 1e-11 * b.norm().max(1.0), "j={j} k={k}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn direct_quadrature_route_agrees() {
        let cfg = SumConfig { reciprocal_cutoff: 1e9, near_cutoff: 1e4, far_cutoff: 1e6 };
        for j in 0..3 {
            let n = 30;
            let d = main_sum_direct(j, n, 64, cfg).unwrap();
            let s = main_sum(j, n, MainSumOptions::default()).unwrap();
            let diff = (d.value.re - s.value()).abs();
            assert!(diff <= d.error + 1e-9 * s.value().abs(), "j={j}: {} vs {} (bound {})", d.value, s.value(), d.error);
            assert!(d.value.im.abs() <= d.error + 1e-9 * s.value().abs());
        }
    }

    #[test]
    fn higher_denominators_are_subleading() {
        let n = 500u64;
        for j in 0..3 {
            let s = main_sum(j, n, MainSumOptions::default()).unwrap();
            let (full, _) = s.total();
            let (first, _) = s.partial(1);
            let rest = full - first;
            let rest = ratio_to_f64(rest.numer(), rest.denom()).abs();
            let nd = n as f64 + (delta48(j) as f64) / GRID as f64;
            let bound = (std::f64::consts::PI * (nd / 2.0).sqrt()).exp();
            assert!(rest <= bound, "j={j}: {rest:e} vs {bound:e}");
            // the k = 2 scale e^{2π√((n+Δ)/24)} is the sharper size
            assert!(rest <= 10.0 * (2.0 * std::f64::consts::PI * (nd / 24.0).sqrt()).exp(), "j={j}: {rest:e}");
        }
    }

    #[test]
    fn radial_expansion_error_scales_like_v_to_the_n() {
        for (h, k, j, n) in [(0, 1, 1, 3), (0, 1, 0, 4), (1, 2, 2, 3)] {
            let t = ModularTriple::new(h, k).unwrap();
            let base = 0.01 * (k * k) as f64;
            let vs: Vec<f64> = (3..6).map(|i| base / 2f64.powi(i)).collect();
            let pts = radial_limit_check(j, &t, &vs, n).unwrap();
            for w in pts.windows(2) {
                let ratio = w[1].scaled_error / w[0].scaled_error;
                assert!((0.8..1.25).contains(&ratio), "{h}/{k} j={j} N={n}: {ratio}");
            }
        }
    }
}
