//! Exact arithmetic in F_p and F_{p^2}, plus spectral classification of
//! 2x2 matrices (split / nonsplit / parabolic over the quadratic extension).
//!
//! The modulus is capped at 2^62 so every product fits in a u128
//! intermediate; larger moduli are rejected at context construction.

use std::collections::BTreeMap;

use crate::error::{Error, Result};

/// Largest supported modulus (exclusive).
pub const MODULUS_CAP: u64 = 1 << 62;

/// Deterministic Miller-Rabin, valid for all n < 2^64.
pub fn is_prime_u64(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    for &q in &[2u64, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37] {
        if n % q == 0 {
            return n == q;
        }
    }
    let d = (n - 1) >> (n - 1).trailing_zeros();
    let s = (n - 1).trailing_zeros();
    // These bases are sufficient below 2^64 (Sinclair / Jaeschke style set).
    'witness: for &a in &[2u64, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37] {
        let mut x = pow_mod(a % n, d, n);
        if x == 0 || x == 1 || x == n - 1 {
            continue;
        }
        for _ in 1..s {
            x = mul_mod(x, x, n);
            if x == n - 1 {
                continue 'witness;
            }
        }
        return false;
    }
    true
}

#[inline]
pub fn mul_mod(a: u64, b: u64, m: u64) -> u64 {
    ((a as u128 * b as u128) % m as u128) as u64
}

pub fn pow_mod(mut base: u64, mut exp: u64, m: u64) -> u64 {
    if m == 1 {
        return 0;
    }
    let mut acc = 1u64;
    base %= m;
    while exp > 0 {
        if exp & 1 == 1 {
            acc = mul_mod(acc, base, m);
        }
        base = mul_mod(base, base, m);
        exp >>= 1;
    }
    acc
}

pub fn gcd_u64(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        let r = a % b;
        a = b;
        b = r;
    }
    a
}

/// Factor n by trial division up to 10^6 followed by Brent's cycle-finding
/// rho on the remaining cofactor.
pub fn factorize(mut n: u64) -> BTreeMap<u64, u32> {
    let mut out = BTreeMap::new();
    if n <= 1 {
        return out;
    }
    for q in std::iter::once(2u64).chain((3..=1_000_000).step_by(2)) {
        if q * q > n {
            break;
        }
        while n % q == 0 {
            *out.entry(q).or_insert(0) += 1;
            n /= q;
        }
    }
    if n > 1 {
        factor_large(n, &mut out);
    }
    out
}

fn factor_large(n: u64, out: &mut BTreeMap<u64, u32>) {
    if n == 1 {
        return;
    }
    if is_prime_u64(n) {
        *out.entry(n).or_insert(0) += 1;
        return;
    }
    let d = brent_rho(n);
    factor_large(d, out);
    factor_large(n / d, out);
}

/// Brent's variant of Pollard rho; n must be composite and odd.
fn brent_rho(n: u64) -> u64 {
    let mut c = 1u64;
    loop {
        let f = |x: u64| (mul_mod(x, x, n) + c) % n;
        let mut x = 2u64;
        let mut y = 2u64;
        let mut d = 1u64;
        let mut count = 0u64;
        while d == 1 {
            x = f(x);
            y = f(f(y));
            d = gcd_u64(x.abs_diff(y), n);
            count += 1;
            if count > 1 << 24 {
                break;
            }
        }
        if d != n && d != 1 {
            return d;
        }
        c += 1;
    }
}

/// Validated prime-field context. Copyable; elements are plain `u64`
/// residues in `[0, p)` carried alongside the context.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Fp {
    p: u64,
}

impl Fp {
    pub fn new(p: u64) -> Result<Self> {
        if p >= MODULUS_CAP {
            return Err(Error::ModulusTooLarge(p));
        }
        if p == 2 || !is_prime_u64(p) {
            return Err(Error::NonPrimeModulus(p));
        }
        Ok(Fp { p })
    }

    #[inline]
    pub fn modulus(self) -> u64 {
        self.p
    }

    #[inline]
    pub fn reduce(self, x: u64) -> u64 {
        x % self.p
    }

    #[inline]
    pub fn reduce_i64(self, x: i64) -> u64 {
        x.rem_euclid(self.p as i64) as u64
    }

    #[inline]
    pub fn add(self, a: u64, b: u64) -> u64 {
        let s = a + b;
        if s >= self.p {
            s - self.p
        } else {
            s
        }
    }

    #[inline]
    pub fn sub(self, a: u64, b: u64) -> u64 {
        if a >= b {
            a - b
        } else {
            a + self.p - b
        }
    }

    #[inline]
    pub fn neg(self, a: u64) -> u64 {
        if a == 0 {
            0
        } else {
            self.p - a
        }
    }

    #[inline]
    pub fn mul(self, a: u64, b: u64) -> u64 {
        mul_mod(a, b, self.p)
    }

    pub fn pow(self, base: u64, exp: u64) -> u64 {
        pow_mod(base, exp, self.p)
    }

    pub fn inv(self, x: u64) -> Result<u64> {
        if x % self.p == 0 {
            return Err(Error::ZeroInverse);
        }
        Ok(self.pow(x, self.p - 2))
    }

    /// Euler criterion: is x a nonzero square mod p?
    pub fn is_square(self, x: u64) -> bool {
        x % self.p != 0 && self.pow(x, (self.p - 1) / 2) == 1
    }

    /// Tonelli-Shanks square root; `None` when x is a nonresidue.
    pub fn sqrt(self, x: u64) -> Option<u64> {
        let p = self.p;
        let x = x % p;
        if x == 0 {
            return Some(0);
        }
        if !self.is_square(x) {
            return None;
        }
        if p % 4 == 3 {
            return Some(self.pow(x, (p + 1) / 4));
        }
        // p = 1 mod 4: full Tonelli-Shanks.
        let s = (p - 1).trailing_zeros();
        let q = (p - 1) >> s;
        let mut z = 2u64;
        while self.is_square(z) {
            z += 1;
        }
        let mut m = s;
        let mut c = self.pow(z, q);
        let mut t = self.pow(x, q);
        let mut r = self.pow(x, (q + 1) / 2);
        while t != 1 {
            let mut i = 0u32;
            let mut t2 = t;
            while t2 != 1 {
                t2 = self.mul(t2, t2);
                i += 1;
            }
            let b = self.pow(c, 1u64 << (m - i - 1));
            m = i;
            c = self.mul(b, b);
            t = self.mul(t, c);
            r = self.mul(r, b);
        }
        Some(r)
    }
}

/// Smallest quadratic nonresidue mod p; deterministic so the F_{p^2}
/// representation is identical across runs.
pub fn find_nonresidue(fp: Fp) -> u64 {
    let mut r = 2u64;
    while fp.is_square(r) {
        r += 1;
    }
    r
}

/// An element c0 + c1*w of F_{p^2} where w^2 = r for the context's fixed
/// nonresidue r.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Fp2El {
    pub c0: u64,
    pub c1: u64,
}

impl Fp2El {
    pub fn from_fp(x: u64) -> Self {
        Fp2El { c0: x, c1: 0 }
    }

    pub fn is_zero(self) -> bool {
        self.c0 == 0 && self.c1 == 0
    }
}

/// The quadratic extension F_{p^2} = F_p(w), w^2 = r.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Fp2 {
    pub fp: Fp,
    /// The fixed quadratic nonresidue defining the extension.
    pub r: u64,
}

impl Fp2 {
    pub fn new(fp: Fp) -> Self {
        Fp2 {
            fp,
            r: find_nonresidue(fp),
        }
    }

    pub fn one(self) -> Fp2El {
        Fp2El { c0: 1, c1: 0 }
    }

    pub fn add(self, a: Fp2El, b: Fp2El) -> Fp2El {
        Fp2El {
            c0: self.fp.add(a.c0, b.c0),
            c1: self.fp.add(a.c1, b.c1),
        }
    }

    pub fn sub(self, a: Fp2El, b: Fp2El) -> Fp2El {
        Fp2El {
            c0: self.fp.sub(a.c0, b.c0),
            c1: self.fp.sub(a.c1, b.c1),
        }
    }

    pub fn mul(self, a: Fp2El, b: Fp2El) -> Fp2El {
        let f = self.fp;
        Fp2El {
            c0: f.add(f.mul(a.c0, b.c0), f.mul(self.r, f.mul(a.c1, b.c1))),
            c1: f.add(f.mul(a.c0, b.c1), f.mul(a.c1, b.c0)),
        }
    }

    /// Norm to F_p: c0^2 - r*c1^2.
    pub fn norm(self, a: Fp2El) -> u64 {
        let f = self.fp;
        f.sub(f.mul(a.c0, a.c0), f.mul(self.r, f.mul(a.c1, a.c1)))
    }

    pub fn inv(self, a: Fp2El) -> Result<Fp2El> {
        if a.is_zero() {
            return Err(Error::ZeroInverse);
        }
        let f = self.fp;
        let n_inv = f.inv(self.norm(a))?;
        Ok(Fp2El {
            c0: f.mul(a.c0, n_inv),
            c1: f.mul(f.neg(a.c1), n_inv),
        })
    }

    pub fn pow(self, base: Fp2El, mut exp: u64) -> Fp2El {
        let mut acc = self.one();
        let mut b = base;
        while exp > 0 {
            if exp & 1 == 1 {
                acc = self.mul(acc, b);
            }
            b = self.mul(b, b);
            exp >>= 1;
        }
        acc
    }

    /// Frobenius x -> x^p, which is conjugation c0 + c1*w -> c0 - c1*w.
    pub fn frobenius(self, a: Fp2El) -> Fp2El {
        Fp2El {
            c0: a.c0,
            c1: self.fp.neg(a.c1),
        }
    }
}

/// Multiplicative order of x given a verified factorization of a group
/// order n that ord(x) divides. Rejects x = 0 and factorizations that do
/// not satisfy x^n = 1.
pub fn fp2_order(ext: Fp2, x: Fp2El, order_factorization: &BTreeMap<u64, u32>) -> Result<u64> {
    if x.is_zero() {
        return Err(Error::ZeroInverse);
    }
    let mut n: u64 = 1;
    for (&q, &e) in order_factorization {
        for _ in 0..e {
            n = n
                .checked_mul(q)
                .ok_or(Error::IncompleteFactorization)?;
        }
    }
    if ext.pow(x, n) != ext.one() {
        return Err(Error::IncompleteFactorization);
    }
    let mut ord = n;
    for &q in order_factorization.keys() {
        while ord % q == 0 && ext.pow(x, ord / q) == ext.one() {
            ord /= q;
        }
    }
    Ok(ord)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpectralKind {
    /// Two distinct eigenvalues in F_p.
    Split,
    /// Eigenvalues are F_{p^2}-conjugates outside F_p.
    Nonsplit,
    /// Repeated eigenvalue (discriminant 0).
    Parabolic,
}

/// Eigenstructure of a nonsingular 2x2 matrix over F_p.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SpectralData {
    pub kind: SpectralKind,
    pub lambda1: Fp2El,
    pub lambda2: Fp2El,
    /// lambda1 / lambda2; `None` exactly when parabolic.
    pub ratio: Option<Fp2El>,
    pub discriminant: u64,
}

/// Classify a nonsingular matrix [[a,b],[c,d]] by the roots of its
/// characteristic polynomial X^2 - tr X + det in F_{p^2}.
pub fn classify(ext: Fp2, a: u64, b: u64, c: u64, d: u64) -> Result<SpectralData> {
    let f = ext.fp;
    let det = f.sub(f.mul(a, d), f.mul(b, c));
    if det == 0 {
        return Err(Error::SingularMatrix);
    }
    let tr = f.add(a, d);
    let disc = f.sub(f.mul(tr, tr), f.mul(4 % f.modulus(), det));
    let half = f.inv(2).expect("p is odd");
    let half_tr = f.mul(tr, half);
    if disc == 0 {
        let lam = Fp2El::from_fp(half_tr);
        return Ok(SpectralData {
            kind: SpectralKind::Parabolic,
            lambda1: lam,
            lambda2: lam,
            ratio: None,
            discriminant: 0,
        });
    }
    let (kind, half_sqrt_disc) = match f.sqrt(disc) {
        Some(s) => (SpectralKind::Split, Fp2El::from_fp(f.mul(s, half))),
        None => {
            // disc = r * (disc/r) with disc/r a residue, so sqrt(disc) = s*w.
            let s = f
                .sqrt(f.mul(disc, f.inv(ext.r).expect("r nonzero")))
                .expect("disc/r is a residue");
            (
                SpectralKind::Nonsplit,
                Fp2El {
                    c0: 0,
                    c1: f.mul(s, half),
                },
            )
        }
    };
    let half_tr2 = Fp2El::from_fp(half_tr);
    let lambda1 = ext.add(half_tr2, half_sqrt_disc);
    let lambda2 = ext.sub(half_tr2, half_sqrt_disc);
    let ratio = ext.mul(lambda1, ext.inv(lambda2)?);
    Ok(SpectralData {
        kind,
        lambda1,
        lambda2,
        ratio: Some(ratio),
        discriminant: disc,
    })
}
