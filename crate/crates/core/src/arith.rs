//! Classical arithmetic functions: segmented prime sieve, Möbius mu,
//! von Mangoldt as an exact [`LogVector`], phi/tau/divisors, and the
//! coprime counter N* used by the residue-class machinery.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::fpcore;

/// A formal integer combination of log q over primes q. Keeps every
/// log-weighted identity exact: equality is key/value equality, and the
/// numeric value is only materialized at the very end.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct LogVector {
    coeffs: BTreeMap<u64, i64>,
}

impl LogVector {
    pub fn zero() -> Self {
        Self::default()
    }

    /// log q with multiplicity e.
    pub fn single(q: u64, e: i64) -> Self {
        let mut v = Self::zero();
        v.add_term(q, e);
        v
    }

    /// The exact log n = sum e_q log q of a factored integer.
    pub fn log_of(n: &FactoredInt) -> Self {
        let mut v = Self::zero();
        for (&q, &e) in &n.factorization {
            v.add_term(q, e as i64);
        }
        v
    }

    pub fn add_term(&mut self, q: u64, e: i64) {
        if e == 0 {
            return;
        }
        let entry = self.coeffs.entry(q).or_insert(0);
        *entry += e;
        if *entry == 0 {
            self.coeffs.remove(&q);
        }
    }

    pub fn add_scaled(&mut self, other: &LogVector, scale: i64) {
        if scale == 0 {
            return;
        }
        for (&q, &e) in &other.coeffs {
            self.add_term(q, e * scale);
        }
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (u64, i64)> + '_ {
        self.coeffs.iter().map(|(&q, &e)| (q, e))
    }

    /// Numeric value in double precision; the only lossy step.
    pub fn eval_f64(&self) -> f64 {
        self.coeffs
            .iter()
            .map(|(&q, &e)| e as f64 * (q as f64).ln())
            .sum()
    }
}

/// An integer together with its (verified) prime factorization.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FactoredInt {
    pub n: u64,
    pub factorization: BTreeMap<u64, u32>,
}

impl FactoredInt {
    pub fn factor(n: u64) -> Self {
        FactoredInt {
            n,
            factorization: fpcore::factorize(n),
        }
    }

    pub fn one() -> Self {
        FactoredInt {
            n: 1,
            factorization: BTreeMap::new(),
        }
    }
}

/// All primes <= n, ascending. Segmented so memory stays
/// O(sqrt n + segment).
pub fn sieve_primes(n: u64) -> Vec<u64> {
    if n < 2 {
        return Vec::new();
    }
    let root = (n as f64).sqrt() as u64 + 1;
    let small = simple_sieve(root);
    let mut primes: Vec<u64> = small.iter().copied().filter(|&p| p <= n).collect();
    const SEGMENT: u64 = 1 << 18;
    let mut low = root + 1;
    let mut mark = vec![false; SEGMENT as usize];
    while low <= n {
        let high = (low + SEGMENT - 1).min(n);
        let len = (high - low + 1) as usize;
        mark[..len].fill(false);
        for &p in &small {
            if p * p > high {
                break;
            }
            let mut m = ((low + p - 1) / p) * p;
            if m < p * p {
                m = p * p;
            }
            while m <= high {
                mark[(m - low) as usize] = true;
                m += p;
            }
        }
        for i in 0..len {
            if !mark[i] {
                primes.push(low + i as u64);
            }
        }
        low = high + 1;
    }
    primes
}

fn simple_sieve(n: u64) -> Vec<u64> {
    let mut is_comp = vec![false; (n + 1) as usize];
    let mut primes = Vec::new();
    for q in 2..=n {
        if !is_comp[q as usize] {
            primes.push(q);
            let mut m = q * q;
            while m <= n {
                is_comp[m as usize] = true;
                m += q;
            }
        }
    }
    primes
}

/// Smallest-prime-factor table for 2..=limit; shared read-only.
pub struct SpfTable {
    spf: Vec<u32>,
}

impl SpfTable {
    pub fn new(limit: usize) -> Self {
        let mut spf = vec![0u32; limit + 1];
        for i in 2..=limit {
            if spf[i] == 0 {
                let mut m = i;
                while m <= limit {
                    if spf[m] == 0 {
                        spf[m] = i as u32;
                    }
                    m += i;
                }
            }
        }
        SpfTable { spf }
    }

    pub fn limit(&self) -> usize {
        self.spf.len() - 1
    }

    pub fn factor(&self, mut n: u64) -> FactoredInt {
        assert!(n as usize <= self.limit(), "n exceeds SPF table");
        let orig = n;
        let mut factorization = BTreeMap::new();
        while n > 1 {
            let q = self.spf[n as usize] as u64;
            let mut e = 0;
            while n % q == 0 {
                n /= q;
                e += 1;
            }
            factorization.insert(q, e);
        }
        FactoredInt {
            n: orig,
            factorization,
        }
    }
}

/// Möbius values mu(0..=n) by sieve (index 0 unused).
pub fn mobius_table(n: usize) -> Vec<i8> {
    let mut mu = vec![1i8; n + 1];
    let mut is_comp = vec![false; n + 1];
    let mut primes = Vec::new();
    if n >= 1 {
        mu[0] = 0;
    }
    for i in 2..=n {
        if !is_comp[i] {
            primes.push(i);
            mu[i] = -1;
        }
        for &q in &primes {
            let m = i * q;
            if m > n {
                break;
            }
            is_comp[m] = true;
            if i % q == 0 {
                mu[m] = 0;
                break;
            }
            mu[m] = -mu[i];
        }
    }
    mu
}

/// For each 1..=n: the prime q if the index is a prime power q^a, else 0.
/// This is the exact (LogVector) form of the von Mangoldt weight.
pub fn lambda_base_table(n: usize) -> Vec<u64> {
    let mut base = vec![0u64; n + 1];
    for q in sieve_primes(n as u64) {
        let mut m = q;
        loop {
            base[m as usize] = q;
            match m.checked_mul(q) {
                Some(next) if next <= n as u64 => m = next,
                _ => break,
            }
        }
    }
    base
}

/// mu(n) from a factorization: 0 on non-squarefree, else (-1)^omega.
pub fn mobius_mu(n: &FactoredInt) -> i64 {
    if n.factorization.values().any(|&e| e >= 2) {
        0
    } else if n.factorization.len() % 2 == 0 {
        1
    } else {
        -1
    }
}

/// Lambda(n) as an exact LogVector: {q: 1} on prime powers q^a, else zero.
pub fn von_mangoldt(n: &FactoredInt) -> LogVector {
    if n.factorization.len() == 1 {
        let (&q, _) = n.factorization.iter().next().unwrap();
        LogVector::single(q, 1)
    } else {
        LogVector::zero()
    }
}

pub fn euler_phi(n: &FactoredInt) -> u64 {
    let mut phi = 1u64;
    for (&q, &e) in &n.factorization {
        phi *= q.pow(e - 1) * (q - 1);
    }
    phi
}

pub fn divisor_tau(n: &FactoredInt) -> u64 {
    n.factorization.values().map(|&e| e as u64 + 1).product()
}

/// All divisors, ascending.
pub fn divisors(n: &FactoredInt) -> Vec<u64> {
    let mut divs = vec![1u64];
    for (&q, &e) in &n.factorization {
        let prev = divs.clone();
        let mut pw = 1u64;
        for _ in 0..e {
            pw *= q;
            divs.extend(prev.iter().map(|d| d * pw));
        }
    }
    divs.sort_unstable();
    divs
}

///// N* of the residue-count main term: #{1 <= m <= n_max : gcd(m, t) = 1},
/// by inclusion-exclusion over squarefree divisors of t.
pub fn coprime_count(n_max: u64, t: &FactoredInt) -> u64 {
    let mut total: i64 = 0;
    for d in squarefree_divisors(t) {
        let mu = if count_prime_factors(d, t) % 2 == 0 {
            1i64
        } else {
            -1
        };
        total += mu * (n_max / d) as i64;
    }
    total as u64
}

fn squarefree_divisors(t: &FactoredInt) -> Vec<u64> {
    let mut divs = vec![1u64];
    for &q in t.factorization.keys() {
        let prev = divs.clone();
        divs.extend(prev.iter().map(|d| d * q));
    }
    divs
}

fn count_prime_factors(d: u64, t: &FactoredInt) -> usize {
    t.factorization.keys().filter(|&&q| d % q == 0).count()
}

/// Errors when the requested range exceeds a caller-supplied budget.
pub fn check_budget(task: &'static str, needed: u128, budget: u128) -> Result<()> {
    if needed > budget {
        return Err(Error::BudgetExceeded {
            task,
            needed,
            budget,
        });
    }
    Ok(())
}
