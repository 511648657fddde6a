//! The Heath-Brown identity as an exactly verifiable combinatorial object,
//! the dyadic decomposition of its summed form, and the weighted box sums
//! S(M, N) with an exact reconstruction check against the Lambda-weighted
//! engine.
//!
//! Everything log-weighted is carried as a [`LogVector`] so the identity
//! check is pure integer arithmetic; doubles appear only when a box sum is
//! finally accumulated against roots of unity.

use num_complex::Complex64;

use crate::arith::{divisors, mobius_mu, von_mangoldt, FactoredInt, LogVector};
use crate::error::{Error, Result};
use crate::expsum::{self, KahanComplex, SumResult, UnityTable};
use crate::fpcore::gcd_u64;
use crate::moebius::OrbitSpec;

/// Default cap on enumerated tuples before a hard resource error.
pub const DEFAULT_TUPLE_BUDGET: u128 = 100_000_000;

/// Largest integer m with m^j <= x (the short-variable cap Z = X^{1/J}).
pub fn integer_root(x: u64, j: u32) -> u64 {
    if x == 0 {
        return 0;
    }
    let mut r = (x as f64).powf(1.0 / j as f64).round() as u64 + 1;
    while r.checked_pow(j).map_or(true, |v| v > x) {
        r -= 1;
    }
    r
}

fn binomial(n: u64, k: u64) -> i64 {
    let mut acc = 1i64;
    for i in 0..k {
        acc = acc * (n - i) as i64 / (i + 1) as i64;
    }
    acc
}

/// The signed coefficient -(-1)^j C(J, j) of the depth-j block.
pub fn hb_sign(big_j: u32, j: u32) -> i64 {
    let b = binomial(big_j as u64, j as u64);
    if j % 2 == 1 {
        b
    } else {
        -b
    }
}

/// Evaluate the right-hand side of the identity at n, exactly:
/// -sum_j (-1)^j C(J,j) over ordered factorizations
/// m_1..m_j n_1..n_j = n with m_i <= Z, weighted mu(m_1)..mu(m_j) log n_1.
/// Returns the exact LogVector and the number of contributing tuples.
pub fn hb_lambda_eval(n: u64, big_j: u32, x: u64) -> Result<(LogVector, u64)> {
    if n < 1 || n >= 2 * x {
        return Err(Error::OutOfRange {
            what: "n",
            detail: format!("identity requires 1 <= n < 2X, got n={n}, X={x}"),
        });
    }
    let z = integer_root(x, big_j);
    let mut total = LogVector::zero();
    let mut tuples = 0u64;
    for j in 1..=big_j {
        let sign = hb_sign(big_j, j);
        let mut block = LogVector::zero();
        enumerate_m_tuples(n, j, z, 1, 1, &mut |mu_prod, count, residual| {
            // residual = n / (m_1 ... m_j); split it as n_1 ... n_j, with
            // log n_1 recorded and the remaining n-variables contributing
            // only their ordered-factorization multiplicity.
            let res_f = FactoredInt::factor(residual);
            for n1 in divisors(&res_f) {
                let ways = ordered_factorizations(residual / n1, j - 1);
                if ways == 0 {
                    continue;
                }
                tuples += count * ways;
                let n1_log = LogVector::log_of(&FactoredInt::factor(n1));
                block.add_scaled(&n1_log, mu_prod * ways as i64);
            }
        });
        total.add_scaled(&block, sign);
    }
    Ok((total, tuples))
}

/// Visit every ordered squarefree m-tuple with product dividing n and
/// each m_i <= z. The callback receives the mu-product, the tuple count
/// (always 1 per visit), and n / (m_1 ... m_j).
fn enumerate_m_tuples(
    n: u64,
    j: u32,
    z: u64,
    mu_prod: i64,
    count: u64,
    visit: &mut impl FnMut(i64, u64, u64),
) {
    if j == 0 {
        visit(mu_prod, count, n);
        return;
    }
    for m in divisors(&FactoredInt::factor(n)) {
        if m > z {
            continue;
        }
        let mu = mobius_mu(&FactoredInt::factor(m));
        if mu == 0 {
            continue;
        }
        enumerate_m_tuples(n / m, j - 1, z, mu_prod * mu, count, visit);
    }
}

/// tau_k(n): ordered factorizations of n into exactly k positive parts.
fn ordered_factorizations(n: u64, k: u32) -> u64 {
    if k == 0 {
        return u64::from(n == 1);
    }
    FactoredInt::factor(n)
        .factorization
        .values()
        .map(|&e| binomial((e + k - 1) as u64, (k - 1) as u64) as u64)
        .product()
}

/// Report of an exhaustive identity check over 1 <= n < 2X.
#[derive(Debug, Clone)]
pub struct HbVerifyReport {
    pub big_j: u32,
    pub x: u64,
    pub checked: u64,
    pub mismatches: u64,
    pub max_tuple_fanout: u64,
    pub total_tuples: u64,
}

impl HbVerifyReport {
    pub fn all_match(&self) -> bool {
        self.mismatches == 0
    }
}

/// Check hb_lambda_eval(n, J, X) = Lambda(n), exact LogVector equality,
/// for every 1 <= n < 2X.
pub fn hb_verify_range(big_j: u32, x: u64, budget: u128) -> Result<HbVerifyReport> {
    crate::arith::check_budget("identity verification range", 2 * x as u128, budget)?;
    let mut report = HbVerifyReport {
        big_j,
        x,
        checked: 0,
        mismatches: 0,
        max_tuple_fanout: 0,
        total_tuples: 0,
    };
    for n in 1..2 * x {
        let (got, tuples) = hb_lambda_eval(n, big_j, x)?;
        let want = von_mangoldt(&FactoredInt::factor(n));
        report.checked += 1;
        report.total_tuples += tuples;
        report.max_tuple_fanout = report.max_tuple_fanout.max(tuples);
        if got != want {
            report.mismatches += 1;
        }
    }
    Ok(report)
}

/// A dyadic box: depth j and block starts (powers of two). The index set
/// is m_i in [M_i, 2 M_i), n_i in [N_i, 2 N_i).
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct DyadicVector {
    pub j: u32,
    pub m_blocks: Vec<u64>,
    pub n_blocks: Vec<u64>,
}

/// Enumerate, for each j <= J, every dyadic box with M_i <= N^{1/J} whose
/// product range can intersect [N, 2N). Every tuple with m_i <= Z and
/// product in [N, 2N) lies in exactly one box (dyadic rounding).
pub fn dyadic_cover(n: u64, big_j: u32) -> Vec<DyadicVector> {
    assert!(n >= 2 && big_j >= 1);
    let z = integer_root(n, big_j);
    let mut boxes = Vec::new();
    for j in 1..=big_j {
        let mut stack = Vec::new();
        enumerate_boxes(n, z, 2 * j, j, &mut stack, &mut boxes);
    }
    boxes
}

fn enumerate_boxes(
    n: u64,
    z: u64,
    dims: u32,
    j: u32,
    chosen: &mut Vec<u64>,
    out: &mut Vec<DyadicVector>,
) {
    if chosen.len() as u32 == dims {
        let (m_blocks, n_blocks) = chosen.split_at(j as usize);
        if box_intersects(n, chosen) {
            out.push(DyadicVector {
                j,
                m_blocks: m_blocks.to_vec(),
                n_blocks: n_blocks.to_vec(),
            });
        }
        return;
    }
    let is_m_coord = (chosen.len() as u32) < j;
    let min_so_far: u128 = chosen.iter().map(|&b| b as u128).product();
    let mut block = 1u64;
    while !(is_m_coord && block > z) && min_so_far * (block as u128) < 2 * (n as u128) {
        chosen.push(block);
        enumerate_boxes(n, z, dims, j, chosen, out);
        chosen.pop();
        block *= 2;
    }
}

fn box_intersects(n: u64, blocks: &[u64]) -> bool {
    let min: u128 = blocks.iter().map(|&b| b as u128).product();
    let max: u128 = blocks.iter().map(|&b| (2 * b - 1) as u128).product();
    min < 2 * n as u128 && max >= n as u128
}

/// The dyadic box containing a tuple, by per-coordinate rounding.
pub fn box_of(tuple_m: &[u64], tuple_n: &[u64]) -> DyadicVector {
    let round = |v: u64| 1u64 << (63 - v.leading_zeros());
    DyadicVector {
        j: tuple_m.len() as u32,
        m_blocks: tuple_m.iter().map(|&v| round(v)).collect(),
        n_blocks: tuple_n.iter().map(|&v| round(v)).collect(),
    }
}

/// One box sum plus its enumeration statistics.
#[derive(Debug, Clone, Copy)]
pub struct BoxSum {
    pub sum: SumResult,
    /// Contributing tuples (in range, coprime product, nonzero weight).
    pub tuples: u64,
}

/// The mu-and-log weighted sum over one box, restricted to product in
/// [N, 2N), gcd(product, t) = 1, and m_i <= m_cap when given. Weights are
/// grouped per residue class of the product mod the period, then one
/// orbit evaluation per class.
pub fn s_mn_sum(
    table: &UnityTable,
    spec: &OrbitSpec,
    h: u64,
    dyadic_box: &DyadicVector,
    n: u64,
    m_cap: Option<u64>,
    budget: u128,
) -> Result<BoxSum> {
    let p = spec.field().modulus();
    let h = h % p;
    if h == 0 {
        return Err(Error::ZeroFrequency);
    }
    let t = spec.period();
    let mut class_weight = vec![0.0f64; t as usize];
    let mut class_count = vec![0u64; t as usize];
    let mut mass = 0.0f64;
    let mut tuples = 0u64;
    let mut visited = 0u128;
    let j = dyadic_box.j as usize;
    let mut coords = Vec::with_capacity(2 * j);
    enumerate_box_tuples(
        dyadic_box,
        n,
        m_cap,
        &mut coords,
        1,
        &mut visited,
        budget,
        &mut |mu_prod, n1, product| {
            if gcd_u64(product, t) != 1 {
                return;
            }
            let w = mu_prod as f64 * (n1 as f64).ln();
            if w == 0.0 {
                // n_1 = 1 carries log 1 = 0; it contributes nothing but
                // still counts as an enumerated tuple.
                tuples += 1;
                return;
            }
            let c = (product % t) as usize;
            class_weight[c] += w;
            class_count[c] += 1;
            mass += w.abs();
            tuples += 1;
        },
    )?;
    let orbit = expsum::orbit_values(spec);
    let mut acc = KahanComplex::new();
    let mut terms = 0u64;
    let mut poles = 0u64;
    for c in 0..t as usize {
        if class_count[c] == 0 {
            continue;
        }
        match orbit[c] {
            Some(u) => {
                acc.add(table.ep(crate::fpcore::mul_mod(h, u, p)) * class_weight[c]);
                terms += class_count[c];
            }
            None => poles += class_count[c],
        }
    }
    Ok(BoxSum {
        sum: SumResult {
            value: acc.value(),
            terms,
            poles_skipped: poles,
            comp_bound: acc.bound(),
            weight_mass: mass,
        },
        tuples,
    })
}

#[allow(clippy::too_many_arguments)]
fn enumerate_box_tuples(
    dyadic_box: &DyadicVector,
    n: u64,
    m_cap: Option<u64>,
    coords: &mut Vec<u64>,
    running: u128,
    visited: &mut u128,
    budget: u128,
    visit: &mut impl FnMut(i64, u64, u64),
) -> Result<()> {
    let j = dyadic_box.j as usize;
    let depth = coords.len();
    if depth == 2 * j {
        let product = running as u64;
        if (product as u128) >= n as u128 && (product as u128) < 2 * n as u128 {
            let mu_prod: i64 = coords[..j]
                .iter()
                .map(|&m| mobius_mu(&FactoredInt::factor(m)))
                .product();
            visit(mu_prod, coords[j], product);
        }
        return Ok(());
    }
    let is_m = depth < j;
    let start = if is_m {
        dyadic_box.m_blocks[depth]
    } else {
        dyadic_box.n_blocks[depth - j]
    };
    let mut end = 2 * start - 1;
    if is_m {
        if let Some(cap) = m_cap {
            end = end.min(cap);
        }
    }
    for v in start..=end {
        *visited += 1;
        if *visited > budget {
            return Err(Error::BudgetExceeded {
                task: "box tuple enumeration",
                needed: *visited,
                budget,
            });
        }
        let next = running * v as u128;
        if next >= 2 * n as u128 {
            break;
        }
        if is_m && mobius_mu(&FactoredInt::factor(v)) == 0 {
            continue;
        }
        coords.push(v);
        enumerate_box_tuples(dyadic_box, n, m_cap, coords, next, visited, budget, visit)?;
        coords.pop();
    }
    Ok(())
}

/// Both sides of the exact signed decomposition of the dyadic
/// Lambda-weighted sum, with per-depth contributions.
#[derive(Debug, Clone)]
pub struct HbReconstructReport {
    pub lhs: Complex64,
    pub rhs: Complex64,
    pub per_j: Vec<Complex64>,
    pub boxes: usize,
    pub tuples: u64,
    pub tolerance: f64,
}

impl HbReconstructReport {
    pub fn agrees(&self) -> bool {
        (self.lhs - self.rhs).norm() <= self.tolerance
    }
}

/// Reconstruct sum_{n ~ N, gcd(n,t)=1} Lambda(n) e_p(h u_n) as the signed
/// total of all box sums with X = N; the Lambda engine is the oracle.
pub fn hb_reconstruct(
    table: &UnityTable,
    spec: &OrbitSpec,
    h: u64,
    n: u64,
    big_j: u32,
    budget: u128,
) -> Result<HbReconstructReport> {
    let z = integer_root(n, big_j);
    let boxes = dyadic_cover(n, big_j);
    let mut per_j = vec![Complex64::new(0.0, 0.0); big_j as usize];
    let mut rhs = Complex64::new(0.0, 0.0);
    let mut tuples = 0u64;
    for dyadic_box in &boxes {
        let bs = s_mn_sum(table, spec, h, dyadic_box, n, Some(z), budget)?;
        let signed = bs.sum.value * hb_sign(big_j, dyadic_box.j) as f64;
        per_j[(dyadic_box.j - 1) as usize] += signed;
        rhs += signed;
        tuples += bs.tuples;
    }
    let lhs = expsum::sum_lambda(table, spec, h, n, true)?.value;
    Ok(HbReconstructReport {
        lhs,
        rhs,
        per_j,
        boxes: boxes.len(),
        tuples,
        tolerance: 1e-8 * tuples.max(1) as f64,
    })
}
