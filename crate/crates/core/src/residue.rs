//! Products in residue classes: exact counting of R_t(N_1..N_v; n) by
//! histogram convolution, the multiplicative-character expansion of the
//! same count, the main-term comparison, and Burgess-ratio diagnostics.
//!
//! Characters mod t are built by CRT: odd prime-power components get a
//! primitive root and a discrete-log table; powers of two use the
//! {+-1} x <5> structure. Character values live as integer phases
//! (numerators over the group exponent) until accumulation.

use num_complex::Complex64;
use num_rational::Ratio;

use crate::arith::{coprime_count, euler_phi, FactoredInt};
use crate::error::{Error, Result};
use crate::fpcore::{gcd_u64, pow_mod};

/// Default cap on the modulus of a character table.
pub const DEFAULT_TABLE_BUDGET: u64 = 100_000;

/// One cyclic factor of (Z/t)^*: the prime power it came from, the cyclic
/// order, and the discrete log of every unit of that component.
struct CyclicFactor {
    prime_power: u64,
    order: u64,
    /// dlog[x mod prime_power] for units; usize::MAX on non-units.
    dlog: Vec<u64>,
}

/// All phi(t) multiplicative characters mod t, with per-unit discrete-log
/// vectors so evaluation is table lookup plus integer arithmetic.
pub struct CharacterTable {
    t: u64,
    factors: Vec<CyclicFactor>,
    /// lcm of the cyclic orders (the group exponent).
    exponent: u64,
    /// e^(2 pi i j / exponent) for j < exponent.
    roots: Vec<Complex64>,
    /// Per residue x mod t: the dlog vector of x, or None on non-units.
    unit_dlogs: Vec<Option<Vec<u64>>>,
    phi: u64,
}

fn lcm(a: u64, b: u64) -> u64 {
    a / gcd_u64(a, b) * b
}

/// Smallest primitive root modulo an odd prime power.
fn primitive_root(ell: u64, a: u32) -> u64 {
    let q = ell.pow(a);
    let phi_ell = ell - 1;
    let prime_factors: Vec<u64> = crate::fpcore::factorize(phi_ell).into_keys().collect();
    let mut g = 2u64;
    loop {
        if g % ell != 0
            && prime_factors
                .iter()
                .all(|&r| pow_mod(g, phi_ell / r, ell) != 1)
        {
            break;
        }
        g += 1;
    }
    if a == 1 {
        return g;
    }
    // Lift to ell^a: g works unless g^(ell-1) = 1 mod ell^2.
    if pow_mod(g, ell - 1, ell * ell) == 1 {
        g += ell;
    }
    g % q
}

fn dlog_table(modulus: u64, generator: u64, order: u64) -> Vec<u64> {
    let mut table = vec![u64::MAX; modulus as usize];
    let mut x = 1u64;
    for e in 0..order {
        table[x as usize] = e;
        x = crate::fpcore::mul_mod(x, generator, modulus);
    }
    table
}

impl CharacterTable {
    pub fn new(t: u64) -> Result<Self> {
        Self::with_budget(t, DEFAULT_TABLE_BUDGET)
    }

    pub fn with_budget(t: u64, budget: u64) -> Result<Self> {
        if t == 0 {
            return Err(Error::OutOfRange {
                what: "modulus",
                detail: "t must be >= 1".into(),
            });
        }
        if t > budget {
            return Err(Error::BudgetExceeded {
                task: "character table construction",
                needed: t as u128,
                budget: budget as u128,
            });
        }
        let t_f = FactoredInt::factor(t);
        let mut factors = Vec::new();
        for (&ell, &a) in &t_f.factorization {
            let q = ell.pow(a);
            if ell == 2 {
                match a {
                    1 => {} // (Z/2)^* is trivial
                    2 => factors.push(CyclicFactor {
                        prime_power: 4,
                        order: 2,
                        dlog: {
                            let mut d = vec![u64::MAX; 4];
                            d[1] = 0;
                            d[3] = 1;
                            d
                        },
                    }),
                    _ => {
                        // 2^k, k >= 3: {+-1} x <5>
                        let half = q / 4;
                        let mut sign = vec![u64::MAX; q as usize];
                        let mut five = vec![u64::MAX; q as usize];
                        let mut x = 1u64;
                        for e in 0..half {
                            sign[x as usize] = 0;
                            five[x as usize] = e;
                            sign[(q - x) as usize] = 1;
                            five[(q - x) as usize] = e;
                            x = crate::fpcore::mul_mod(x, 5, q);
                        }
                        factors.push(CyclicFactor {
                            prime_power: q,
                            order: 2,
                            dlog: sign,
                        });
                        factors.push(CyclicFactor {
                            prime_power: q,
                            order: half,
                            dlog: five,
                        });
                    }
                }
            } else {
                let order = q / ell * (ell - 1);
                let g = primitive_root(ell, a);
                factors.push(CyclicFactor {
                    prime_power: q,
                    order,
                    dlog: dlog_table(q, g, order),
                });
            }
        }
        let exponent = factors.iter().fold(1u64, |acc, f| lcm(acc, f.order));
        let roots = (0..exponent)
            .map(|j| {
                let angle = 2.0 * std::f64::consts::PI * j as f64 / exponent as f64;
                Complex64::new(angle.cos(), angle.sin())
            })
            .collect();
        let unit_dlogs = (0..t)
            .map(|x| {
                if gcd_u64(x, t) != 1 {
                    return None;
                }
                Some(
                    factors
                        .iter()
                        .map(|f| f.dlog[(x % f.prime_power) as usize])
                        .collect(),
                )
            })
            .collect();
        let phi = factors.iter().map(|f| f.order).product();
        debug_assert_eq!(phi, euler_phi(&t_f));
        Ok(CharacterTable {
            t,
            factors,
            exponent,
            roots,
            unit_dlogs,
            phi,
        })
    }

    pub fn modulus(&self) -> u64 {
        self.t
    }

    pub fn phi(&self) -> u64 {
        self.phi
    }

    /// Number of characters (= phi(t)); index 0 is the principal one.
    pub fn num_characters(&self) -> u64 {
        self.phi
    }

    /// Mixed-radix exponent vector of character `idx`.
    fn exponents(&self, idx: u64) -> Vec<u64> {
        let mut rem = idx;
        self.factors
            .iter()
            .map(|f| {
                let c = rem % f.order;
                rem /= f.order;
                c
            })
            .collect()
    }

    /// Integer phase of chi_idx(x) as a numerator over the group exponent,
    /// or None when x is not a unit.
    pub fn eval_phase(&self, idx: u64, x: u64) -> Option<u64> {
        let dlogs = self.unit_dlogs[(x % self.t) as usize].as_ref()?;
        let cs = self.exponents(idx);
        let mut phase = 0u64;
        for ((c, d), f) in cs.iter().zip(dlogs).zip(&self.factors) {
            let scale = self.exponent / f.order;
            phase = (phase + (c * d % f.order) * scale) % self.exponent;
        }
        Some(phase)
    }

    /// chi_idx(x); zero on non-units.
    pub fn eval(&self, idx: u64, x: u64) -> Complex64 {
        match self.eval_phase(idx, x) {
            Some(phase) => self.roots[phase as usize],
            None => Complex64::new(0.0, 0.0),
        }
    }
}

/// Partial character sum sum_{x <= n_max} chi(x).
pub fn char_partial_sum(table: &CharacterTable, idx: u64, n_max: u64) -> Complex64 {
    let mut acc = Complex64::new(0.0, 0.0);
    for x in 1..=n_max {
        acc += table.eval(idx, x);
    }
    acc
}

/// |partial sum| / N: the empirical character-sum saving (a diagnostic,
/// not an assertion of the Burgess exponent).
pub fn burgess_ratio(table: &CharacterTable, idx: u64, n_max: u64) -> f64 {
    if n_max == 0 {
        return 0.0;
    }
    char_partial_sum(table, idx, n_max).norm() / n_max as f64
}

/// Residue-class histogram of {1..n_max} mod t, optionally zeroing
/// non-unit classes.
fn range_histogram(t: u64, n_max: u64, coprime: bool) -> Vec<u128> {
    let mut hist = vec![0u128; t as usize];
    for r in 0..t {
        let count = if r == 0 {
            n_max / t
        } else if r <= n_max {
            (n_max - r) / t + 1
        } else {
            0
        };
        if !coprime || gcd_u64(r, t) == 1 || t == 1 {
            hist[r as usize] = count as u128;
        }
    }
    hist
}

/// Exact counts, per residue class c mod t, of tuples n_i <= N_i with
/// n_1 ... n_v = c (mod t); pure integer convolution, O(v t^2), never a
/// naive walk of the index space.
pub fn product_class_counts(t: u64, ranges: &[u64], coprime: bool) -> Vec<u128> {
    assert!(t >= 1 && !ranges.is_empty());
    let mut acc = range_histogram(t, ranges[0], coprime);
    for &n_max in &ranges[1..] {
        let hist = range_histogram(t, n_max, coprime);
        let mut next = vec![0u128; t as usize];
        for (r1, &c1) in acc.iter().enumerate() {
            if c1 == 0 {
                continue;
            }
            for (r2, &c2) in hist.iter().enumerate() {
                if c2 == 0 {
                    continue;
                }
                let r = crate::fpcore::mul_mod(r1 as u64, r2 as u64, t);
                next[r as usize] += c1 * c2;
            }
        }
        acc = next;
    }
    acc
}

/// R_t(N_1..N_v; n): tuples with product congruent to n mod t, no
/// coprimality restriction on the n_i.
pub fn rt_count(t: u64, ranges: &[u64], n: u64) -> u128 {
    product_class_counts(t, ranges, false)[(n % t) as usize]
}

/// Same count restricted to tuples with every gcd(n_i, t) = 1 (the set
/// the character expansion actually counts).
pub fn rt_count_coprime(t: u64, ranges: &[u64], n: u64) -> u128 {
    product_class_counts(t, ranges, true)[(n % t) as usize]
}

/// The exact main term N_1^* ... N_v^* / phi(t).
pub fn rt_main_term(t: u64, ranges: &[u64]) -> Ratio<i128> {
    let t_f = FactoredInt::factor(t);
    let mut num: i128 = 1;
    for &n_max in ranges {
        num *= coprime_count(n_max, &t_f) as i128;
    }
    Ratio::new(num, euler_phi(&t_f) as i128)
}

/// Per-character products prod_i sum_{x <= N_i} chi(x); one pass that a
/// caller can reuse across many target residues n.
pub fn rt_char_products(table: &CharacterTable, ranges: &[u64]) -> Vec<Complex64> {
    (0..table.num_characters())
        .map(|idx| {
            ranges
                .iter()
                .map(|&n_max| char_partial_sum(table, idx, n_max))
                .product()
        })
        .collect()
}

/// Combine precomputed per-character products for one unit residue n:
/// (1/phi) sum_chi conj(chi(n)) prod_i S_chi(N_i).
pub fn rt_combine(table: &CharacterTable, products: &[Complex64], n: u64) -> Result<Complex64> {
    if gcd_u64(n % table.t, table.t) != 1 {
        return Err(Error::NonUnitResidue {
            n: n % table.t,
            t: table.t,
        });
    }
    let mut acc = Complex64::new(0.0, 0.0);
    for (idx, &prod) in products.iter().enumerate() {
        acc += table.eval(idx as u64, n).conj() * prod;
    }
    Ok(acc / table.phi as f64)
}

/// The orthogonality expansion of the coprime-restricted count; must match
/// [`rt_count_coprime`] up to roundoff.
pub fn rt_via_characters(table: &CharacterTable, ranges: &[u64], n: u64) -> Result<Complex64> {
    let products = rt_char_products(table, ranges);
    rt_combine(table, &products, n)
}
