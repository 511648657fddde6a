//! The exponential-sum engines: single / coprime / multi-term / prime-time /
//! von-Mangoldt-weighted / Möbius-twisted / bilinear / multiple sums, plus
//! max-over-h scans.
//!
//! All engines share the skip-and-count pole convention: a term whose orbit
//! value is the point at infinity contributes nothing and increments
//! `poles_skipped`. Affine values are recovered from homogeneous orbit
//! coordinates by batched inversion, and accumulation is compensated.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::arith::{
    self, check_budget, divisors, lambda_base_table, mobius_table, sieve_primes, FactoredInt,
};
use crate::error::{Error, Result};
use crate::fpcore::{gcd_u64, mul_mod, Fp};
use crate::moebius::OrbitSpec;
use crate::residue;

/// Inversion batch size; one field inversion per block.
const BATCH: usize = 4096;

/// Precompute the root-of-unity table up to this modulus; evaluate
/// trigonometrically above it.
pub const TABLE_LIMIT: u64 = 1 << 20;

/// e_p(z) = exp(2 pi i z / p), either from a precomputed table or by
/// direct trigonometric evaluation.
pub struct UnityTable {
    p: u64,
    roots: Option<Vec<Complex64>>,
}

impl UnityTable {
    /// Table mode for p <= 2^20, direct mode above.
    pub fn new(p: u64) -> Self {
        if p <= TABLE_LIMIT {
            Self::with_table(p)
        } else {
            Self::direct(p)
        }
    }

    pub fn with_table(p: u64) -> Self {
        let roots = (0..p).map(|z| Self::eval(z, p)).collect();
        UnityTable {
            p,
            roots: Some(roots),
        }
    }

    pub fn direct(p: u64) -> Self {
        UnityTable { p, roots: None }
    }

    fn eval(z: u64, p: u64) -> Complex64 {
        let angle = 2.0 * std::f64::consts::PI * (z as f64) / (p as f64);
        Complex64::new(angle.cos(), angle.sin())
    }

    pub fn modulus(&self) -> u64 {
        self.p
    }

    #[inline]
    pub fn ep(&self, z: u64) -> Complex64 {
        let z = z % self.p;
        match &self.roots {
            Some(roots) => roots[z as usize],
            None => Self::eval(z, self.p),
        }
    }
}

#[derive(Debug, Clone, Copy, Default)]
struct Kahan {
    sum: f64,
    comp: f64,
}

impl Kahan {
    #[inline]
    fn add(&mut self, x: f64) {
        let y = x - self.comp;
        let t = self.sum + y;
        self.comp = (t - self.sum) - y;
        self.sum = t;
    }
}

/// Compensated complex accumulator with a running error estimate.
#[derive(Debug, Clone, Copy, Default)]
pub struct KahanComplex {
    re: Kahan,
    im: Kahan,
    bound: f64,
}

impl KahanComplex {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, v: Complex64) {
        self.re.add(v.re);
        self.im.add(v.im);
        self.bound += f64::EPSILON * (self.re.sum.abs() + self.im.sum.abs());
    }

    pub fn value(&self) -> Complex64 {
        Complex64::new(self.re.sum, self.im.sum)
    }

    pub fn bound(&self) -> f64 {
        self.bound
    }
}

/// Outcome of one exponential sum.
#[derive(Debug, Clone, Copy)]
pub struct SumResult {
    pub value: Complex64,
    /// Number of accumulated (non-skipped, nonzero-weight) terms.
    pub terms: u64,
    pub poles_skipped: u64,
    /// Accumulated compensation-error estimate.
    pub comp_bound: f64,
    /// Sum of |weight| over accumulated terms; equals `terms` for the
    /// unit-weight families, and is the correct normalizer otherwise.
    pub weight_mass: f64,
}

impl SumResult {
    fn from_acc(acc: KahanComplex, terms: u64, poles_skipped: u64, weight_mass: f64) -> Self {
        SumResult {
            value: acc.value(),
            terms,
            poles_skipped,
            comp_bound: acc.bound(),
            weight_mass,
        }
    }
}

fn check_h(fp: Fp, h: u64) -> Result<u64> {
    let h = fp.reduce(h);
    if h == 0 {
        return Err(Error::ZeroFrequency);
    }
    Ok(h)
}

/// Walk the orbit at indices start, start+stride, ..., `count` terms, and
/// hand each term's affine value (`None` at infinity) to the visitor.
/// Homogeneous coordinates are normalized in blocks of [`BATCH`] with one
/// inversion per block.
pub fn stream_affine<F: FnMut(u64, Option<u64>)>(
    spec: &OrbitSpec,
    start: u64,
    stride: u64,
    count: u64,
    mut visit: F,
) {
    let fp = spec.field();
    let mut iter = spec.iter(start, stride);
    let mut block: Vec<(u64, u64)> = Vec::with_capacity(BATCH);
    let mut done = 0u64;
    while done < count {
        let take = ((count - done) as usize).min(BATCH);
        block.clear();
        for _ in 0..take {
            block.push(iter.next_raw());
        }
        for (i, value) in batch_affine(fp, &block).into_iter().enumerate() {
            visit(done + i as u64, value);
        }
        done += take as u64;
    }
}

/// Batch-convert homogeneous pairs to affine values with the product-tree
/// trick; zero denominators come back as `None`.
fn batch_affine(fp: Fp, block: &[(u64, u64)]) -> Vec<Option<u64>> {
    let mut prefix = Vec::with_capacity(block.len());
    let mut acc = 1u64;
    for &(_, z) in block {
        prefix.push(acc);
        if z != 0 {
            acc = fp.mul(acc, z);
        }
    }
    let mut inv_acc = fp.inv(acc).expect("product of nonzero z");
    let mut out = vec![None; block.len()];
    for i in (0..block.len()).rev() {
        let (x, z) = block[i];
        if z != 0 {
            let z_inv = fp.mul(prefix[i], inv_acc);
            inv_acc = fp.mul(inv_acc, z);
            out[i] = Some(fp.mul(x, z_inv));
        }
    }
    out
}

/// Strided-window sum: sum over n in [K, K+N) of e_p(h u_{kn}).
pub fn sum_single(
    table: &UnityTable,
    spec: &OrbitSpec,
    h: u64,
    k: u64,
    start_k: u64,
    n: u64,
) -> Result<SumResult> {
    let h = check_h(spec.field(), h)?;
    let mut acc = KahanComplex::new();
    let mut terms = 0u64;
    let mut poles = 0u64;
    stream_affine(spec, k * start_k, k, n, |_, value| match value {
        Some(u) => {
            acc.add(table.ep(mul_mod(h, u, table.modulus())));
            terms += 1;
        }
        None => poles += 1,
    });
    Ok(SumResult::from_acc(acc, terms, poles, terms as f64))
}

/// Which implementation route `sum_coprime` takes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CoprimeStrategy {
    /// Filter n by gcd(n, t) = 1 directly.
    DirectFilter,
    /// Möbius inclusion-exclusion over divisors d | t, writing n = dm.
    InclusionExclusion,
}

/// Coprime-restricted sum: sum over 1 <= n <= N, gcd(n, t) = 1, of
/// e_p(h u_{kn}). The inclusion-exclusion route is the default above a
/// small cutoff; the two routes are mutual oracles.
pub fn sum_coprime(
    table: &UnityTable,
    spec: &OrbitSpec,
    h: u64,
    k: u64,
    n: u64,
) -> Result<SumResult> {
    let strategy = if n > 1024 {
        CoprimeStrategy::InclusionExclusion
    } else {
        CoprimeStrategy::DirectFilter
    };
    sum_coprime_with(table, spec, h, k, n, strategy)
}

pub fn sum_coprime_with(
    table: &UnityTable,
    spec: &OrbitSpec,
    h: u64,
    k: u64,
    n: u64,
    strategy: CoprimeStrategy,
) -> Result<SumResult> {
    let h = check_h(spec.field(), h)?;
    let t = spec.period();
    match strategy {
        CoprimeStrategy::DirectFilter => {
            let mut acc = KahanComplex::new();
            let mut terms = 0u64;
            let mut poles = 0u64;
            stream_affine(spec, k, k, n, |i, value| {
                let idx = i + 1;
                if gcd_u64(idx, t) != 1 {
                    return;
                }
                match value {
                    Some(u) => {
                        acc.add(table.ep(mul_mod(h, u, table.modulus())));
                        terms += 1;
                    }
                    None => poles += 1,
                }
            });
            Ok(SumResult::from_acc(acc, terms, poles, terms as f64))
        }
        CoprimeStrategy::InclusionExclusion => {
            // sum_{d|t} mu(d) sum_{m <= N/d} e_p(h u_{kdm}); signed term
            // and pole counts telescope to the direct route's counts.
            let t_f = FactoredInt::factor(t);
            let mut value = Complex64::new(0.0, 0.0);
            let mut terms: i64 = 0;
            let mut poles: i64 = 0;
            let mut bound = 0.0;
            for d in divisors(&t_f) {
                let mu = arith::mobius_mu(&FactoredInt::factor(d));
                if mu == 0 || n / d == 0 {
                    continue;
                }
                let inner = sum_single(table, spec, h, k * d, 1, n / d)?;
                value += inner.value * mu as f64;
                terms += mu * inner.terms as i64;
                poles += mu * inner.poles_skipped as i64;
                bound += inner.comp_bound;
            }
            Ok(SumResult {
                value,
                terms: terms as u64,
                poles_skipped: poles as u64,
                comp_bound: bound,
                weight_mass: terms as f64,
            })
        }
    }
}

/// Multi-term sum: sum over n in [K, K+N) of
/// e_p(a_1 u_{m_1 n} + ... + a_s u_{m_s n}). A term is skipped when any
/// of the s orbit values is at infinity.
pub fn sum_multi_term(
    table: &UnityTable,
    spec: &OrbitSpec,
    coefficients: &[u64],
    exponents: &[u64],
    start_k: u64,
    n: u64,
) -> Result<SumResult> {
    let fp = spec.field();
    if coefficients.len() != exponents.len() || exponents.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::OutOfRange {
            what: "exponents",
            detail: "must be strictly increasing and match coefficients".into(),
        });
    }
    // Zero coefficients add nothing to the phase; drop them so their
    // stream's poles do not disturb the term count.
    let (coeffs, exps): (Vec<u64>, Vec<u64>) = coefficients
        .iter()
        .zip(exponents)
        .map(|(&a, &m)| (fp.reduce(a), m))
        .filter(|&(a, _)| a != 0)
        .unzip();
    if coeffs.is_empty() {
        return Err(Error::ZeroCoefficients);
    }
    let s = coeffs.len();
    let mut streams: Vec<_> = exps.iter().map(|&m| spec.iter(m * start_k, m)).collect();
    let mut acc = KahanComplex::new();
    let mut terms = 0u64;
    let mut poles = 0u64;
    let mut done = 0u64;
    let mut blocks: Vec<Vec<(u64, u64)>> = vec![Vec::with_capacity(BATCH); s];
    while done < n {
        let take = ((n - done) as usize).min(BATCH);
        for (j, stream) in streams.iter_mut().enumerate() {
            blocks[j].clear();
            for _ in 0..take {
                blocks[j].push(stream.next_raw());
            }
        }
        let affine: Vec<Vec<Option<u64>>> =
            blocks.iter().map(|b| batch_affine(fp, b)).collect();
        for i in 0..take {
            let mut arg = 0u64;
            let mut pole = false;
            for j in 0..s {
                match affine[j][i] {
                    Some(u) => arg = fp.add(arg, fp.mul(coeffs[j], u)),
                    None => {
                        pole = true;
                        break;
                    }
                }
            }
            if pole {
                poles += 1;
            } else {
                acc.add(table.ep(arg));
                terms += 1;
            }
        }
        done += take as u64;
    }
    Ok(SumResult::from_acc(acc, terms, poles, terms as f64))
}

/// Prime-time sum T_h(N): sum over primes l <= N of e_p(h u_l), streaming
/// the sieve and the orbit in lockstep (one orbit pass).
pub fn sum_prime(table: &UnityTable, spec: &OrbitSpec, h: u64, n: u64) -> Result<SumResult> {
    let h = check_h(spec.field(), h)?;
    let samples = prime_orbit_samples(spec, n);
    let mut acc = KahanComplex::new();
    let mut terms = 0u64;
    let mut poles = 0u64;
    for &(_, value) in &samples {
        match value {
            Some(u) => {
                acc.add(table.ep(mul_mod(h, u, table.modulus())));
                terms += 1;
            }
            None => poles += 1,
        }
    }
    Ok(SumResult::from_acc(acc, terms, poles, terms as f64))
}

/// One orbit pass collecting the affine value at every prime index <= n.
fn prime_orbit_samples(spec: &OrbitSpec, n: u64) -> Vec<(u64, Option<u64>)> {
    let primes = sieve_primes(n);
    let mut out = Vec::with_capacity(primes.len());
    if primes.is_empty() {
        return out;
    }
    let t = spec.period();
    if n >= 4 * t {
        // Long range: one pass over a single period, then read each prime
        // through its residue mod t.
        let orbit = orbit_values(spec);
        for &l in &primes {
            out.push((l, orbit[(l % t) as usize]));
        }
    } else {
        let mut next = 0usize;
        stream_affine(spec, 1, 1, n, |i, value| {
            let idx = i + 1;
            if next < primes.len() && primes[next] == idx {
                out.push((idx, value));
                next += 1;
            }
        });
    }
    out
}

/// Affine values u_0 .. u_{t-1} over one full period (`None` at infinity).
pub fn orbit_values(spec: &OrbitSpec) -> Vec<Option<u64>> {
    let t = spec.period();
    let mut out = Vec::with_capacity(t as usize);
    stream_affine(spec, 0, 1, t, |_, value| out.push(value));
    out
}

/// U_h(N) = sum_{n <= N} Lambda(n) e_p(h u_n), or the dyadic variant
/// V_h(N) over N <= n < 2N with gcd(n, t) = 1.
pub fn sum_lambda(
    table: &UnityTable,
    spec: &OrbitSpec,
    h: u64,
    n: u64,
    dyadic: bool,
) -> Result<SumResult> {
    let h = check_h(spec.field(), h)?;
    let (lo, hi) = if dyadic { (n, 2 * n - 1) } else { (1, n) };
    let bases = lambda_base_table(hi as usize);
    let t = spec.period();
    let mut acc = KahanComplex::new();
    let mut terms = 0u64;
    let mut poles = 0u64;
    let mut mass = 0.0f64;
    stream_affine(spec, lo, 1, hi - lo + 1, |i, value| {
        let idx = lo + i;
        let q = bases[idx as usize];
        if q == 0 {
            return;
        }
        if dyadic && gcd_u64(idx, t) != 1 {
            return;
        }
        match value {
            Some(u) => {
                let w = (q as f64).ln();
                acc.add(table.ep(mul_mod(h, u, table.modulus())) * w);
                terms += 1;
                mass += w;
            }
            None => poles += 1,
        }
    });
    Ok(SumResult::from_acc(acc, terms, poles, mass))
}

/// Möbius-twisted sum r_h(N) = sum_{n <= N} mu(n) e_p(h u_n).
pub fn sum_mobius_twisted(
    table: &UnityTable,
    spec: &OrbitSpec,
    h: u64,
    n: u64,
) -> Result<SumResult> {
    let h = check_h(spec.field(), h)?;
    let mu = mobius_table(n as usize);
    let mut acc = KahanComplex::new();
    let mut terms = 0u64;
    let mut poles = 0u64;
    stream_affine(spec, 1, 1, n, |i, value| {
        let idx = (i + 1) as usize;
        if mu[idx] == 0 {
            return;
        }
        match value {
            Some(u) => {
                acc.add(table.ep(mul_mod(h, u, table.modulus())) * mu[idx] as f64);
                terms += 1;
            }
            None => poles += 1,
        }
    });
    Ok(SumResult::from_acc(acc, terms, poles, terms as f64))
}

/// Bilinear sum: sum_{k <= K} sum_{m <= M} alpha_k beta_m e_p(h u_{km}),
/// evaluated row-wise with one stride pass per k.
pub fn sum_bilinear(
    table: &UnityTable,
    spec: &OrbitSpec,
    h: u64,
    alpha: &[Complex64],
    beta: &[Complex64],
) -> Result<SumResult> {
    let h = check_h(spec.field(), h)?;
    if alpha.is_empty() || beta.is_empty() {
        return Err(Error::OutOfRange {
            what: "bilinear coefficients",
            detail: "alpha and beta must be nonempty".into(),
        });
    }
    let mut value = Complex64::new(0.0, 0.0);
    let mut terms = 0u64;
    let mut poles = 0u64;
    let mut bound = 0.0f64;
    let mut mass = 0.0f64;
    for (ki, &a) in alpha.iter().enumerate() {
        let k = ki as u64 + 1;
        let mut row = KahanComplex::new();
        let mut row_terms = 0u64;
        let a_abs = a.norm();
        let mut row_mass = 0.0f64;
        stream_affine(spec, k, k, beta.len() as u64, |m, val| match val {
            Some(u) => {
                row.add(table.ep(mul_mod(h, u, table.modulus())) * beta[m as usize]);
                row_terms += 1;
                row_mass += beta[m as usize].norm();
            }
            None => poles += 1,
        });
        value += a * row.value();
        terms += row_terms;
        bound += a_abs * row.bound();
        mass += a_abs * row_mass;
    }
    Ok(SumResult {
        value,
        terms,
        poles_skipped: poles,
        comp_bound: bound,
        weight_mass: mass,
    })
}

/// Multiple sum over n_1 <= N_1, ..., n_v <= N_v
/// (each coprime to t when flagged) of e_p(h u_{k n_1 ... n_v}),
/// aggregated by residue-class multiplicity of the product mod t —
/// never by a naive v-fold orbit walk.
pub fn sum_multiple(
    table: &UnityTable,
    spec: &OrbitSpec,
    h: u64,
    k: u64,
    ranges: &[u64],
    coprime_to_t: bool,
    budget: u128,
) -> Result<SumResult> {
    let h = check_h(spec.field(), h)?;
    if ranges.is_empty() {
        return Err(Error::OutOfRange {
            what: "ranges",
            detail: "need at least one range".into(),
        });
    }
    let tuples: u128 = ranges.iter().map(|&n| n as u128).product();
    check_budget("multiple-sum index space", tuples, budget)?;
    let t = spec.period();
    check_budget(
        "multiple-sum class convolution",
        ranges.len() as u128 * (t as u128) * (t as u128),
        budget,
    )?;
    let counts = residue::product_class_counts(t, ranges, coprime_to_t);
    let orbit = orbit_values(spec);
    let mut acc = KahanComplex::new();
    let mut terms = 0u64;
    let mut poles = 0u64;
    for (c, &count) in counts.iter().enumerate() {
        if count == 0 {
            continue;
        }
        let count = count as u64;
        let idx = mul_mod(k % t.max(1), c as u64, t);
        match orbit[idx as usize] {
            Some(u) => {
                acc.add(table.ep(mul_mod(h, u, table.modulus())) * count as f64);
                terms += count;
            }
            None => poles += count,
        }
    }
    Ok(SumResult::from_acc(acc, terms, poles, terms as f64))
}

/// Which sum family a scan runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Family {
    /// sum_single with this stride, K = 1.
    Single { k: u64 },
    Coprime { k: u64 },
    Prime,
    Lambda { dyadic: bool },
    Moebius,
}

impl Family {
    pub fn name(self) -> &'static str {
        match self {
            Family::Single { .. } => "single",
            Family::Coprime { .. } => "coprime",
            Family::Prime => "prime",
            Family::Lambda { dyadic: false } => "lambda",
            Family::Lambda { dyadic: true } => "lambda-dyadic",
            Family::Moebius => "moebius",
        }
    }
}

/// Which h values a scan covers.
#[derive(Debug, Clone, Copy)]
pub enum HSet {
    All,
    Sample { count: u64, seed: u64 },
}

#[derive(Debug, Clone, Copy)]
pub struct ScanRow {
    pub h: u64,
    pub value: Complex64,
    pub abs_value: f64,
    pub terms: u64,
    pub poles_skipped: u64,
    pub weight_mass: f64,
}

/// Per-term weighted orbit samples for a family: only nonzero weights are
/// kept, so an h-scan is a flat pass per h.
pub fn family_samples(spec: &OrbitSpec, family: Family, n: u64) -> Vec<(f64, Option<u64>)> {
    let mut samples = Vec::new();
    match family {
        Family::Single { k } => {
            stream_affine(spec, k, k, n, |_, v| samples.push((1.0, v)));
        }
        Family::Coprime { k } => {
            let t = spec.period();
            stream_affine(spec, k, k, n, |i, v| {
                if gcd_u64(i + 1, t) == 1 {
                    samples.push((1.0, v));
                }
            });
        }
        Family::Prime => {
            samples = prime_orbit_samples(spec, n)
                .into_iter()
                .map(|(_, v)| (1.0, v))
                .collect();
        }
        Family::Lambda { dyadic } => {
            let (lo, hi) = if dyadic { (n, 2 * n - 1) } else { (1, n) };
            let bases = lambda_base_table(hi as usize);
            let t = spec.period();
            stream_affine(spec, lo, 1, hi - lo + 1, |i, v| {
                let idx = lo + i;
                let q = bases[idx as usize];
                if q == 0 || (dyadic && gcd_u64(idx, t) != 1) {
                    return;
                }
                samples.push(((q as f64).ln(), v));
            });
        }
        Family::Moebius => {
            let mu = mobius_table(n as usize);
            stream_affine(spec, 1, 1, n, |i, v| {
                let m = mu[(i + 1) as usize];
                if m != 0 {
                    samples.push((m as f64, v));
                }
            });
        }
    }
    samples
}

/// Accumulate precomputed samples for one frequency.
pub fn scan_one(table: &UnityTable, samples: &[(f64, Option<u64>)], h: u64) -> ScanRow {
    let p = table.modulus();
    let mut acc = KahanComplex::new();
    let mut terms = 0u64;
    let mut poles = 0u64;
    let mut mass = 0.0f64;
    for &(w, value) in samples {
        match value {
            Some(u) => {
                let e = table.ep(mul_mod(h, u, p));
                if w == 1.0 {
                    acc.add(e);
                } else {
                    acc.add(e * w);
                }
                terms += 1;
                mass += w.abs();
            }
            None => poles += 1,
        }
    }
    let value = acc.value();
    ScanRow {
        h,
        value,
        abs_value: value.norm(),
        terms,
        poles_skipped: poles,
        weight_mass: mass,
    }
}

/// Resolve an [`HSet`] to a concrete, deterministic list of frequencies.
pub fn resolve_h_set(p: u64, h_set: HSet) -> Result<Vec<u64>> {
    let hs: Vec<u64> = match h_set {
        HSet::All => (1..p).collect(),
        HSet::Sample { count, seed } => {
            if count == 0 {
                return Err(Error::EmptyHSet);
            }
            let mut rng = crate::harness::SplitMix64::new(seed);
            let mut seen = std::collections::BTreeSet::new();
            while (seen.len() as u64) < count.min(p - 1) {
                seen.insert(1 + rng.below(p - 1));
            }
            seen.into_iter().collect()
        }
    };
    if hs.is_empty() {
        return Err(Error::EmptyHSet);
    }
    Ok(hs)
}

/// Scan |sum| over a set of frequencies. Parallel across h; rows come back
/// in h order regardless of thread count. Returns the rows and the argmax
/// index (first maximum).
pub fn max_scan(
    table: &UnityTable,
    spec: &OrbitSpec,
    family: Family,
    n: u64,
    h_set: HSet,
) -> Result<(Vec<ScanRow>, usize)> {
    let hs = resolve_h_set(spec.field().modulus(), h_set)?;
    let samples = family_samples(spec, family, n);
    let rows: Vec<ScanRow> = hs
        .par_iter()
        .map(|&h| scan_one(table, &samples, h))
        .collect();
    let argmax = rows
        .iter()
        .enumerate()
        .max_by(|a, b| {
            a.1.abs_value
                .partial_cmp(&b.1.abs_value)
                .unwrap()
                .then(b.0.cmp(&a.0))
        })
        .map(|(i, _)| i)
        .expect("nonempty");
    Ok((rows, argmax))
}
