//! The Möbius dynamical system on P^1(F_p): map evaluation, composition,
//! fast powers, stride orbit iteration, and period computation by two
//! independent algorithms (direct iteration and eigenvalue-ratio order).

use std::fmt;

use once_cell::sync::OnceCell;

use crate::arith::{divisors, FactoredInt};
use crate::error::{Error, Result};
use crate::fpcore::{classify, factorize, fp2_order, Fp, Fp2, SpectralData, SpectralKind};

/// A point of the projective line: an affine residue or infinity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ProjPoint {
    Affine(u64),
    Infinity,
}

impl ProjPoint {
    /// Homogeneous coordinates (x : z).
    pub fn to_homogeneous(self) -> (u64, u64) {
        match self {
            ProjPoint::Affine(x) => (x, 1),
            ProjPoint::Infinity => (1, 0),
        }
    }

    pub fn from_homogeneous(fp: Fp, x: u64, z: u64) -> Result<ProjPoint> {
        if z == 0 {
            Ok(ProjPoint::Infinity)
        } else {
            Ok(ProjPoint::Affine(fp.mul(x, fp.inv(z)?)))
        }
    }
}

impl fmt::Display for ProjPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ProjPoint::Affine(x) => write!(f, "{x}"),
            ProjPoint::Infinity => write!(f, "inf"),
        }
    }
}

/// A nonsingular 2x2 matrix over F_p modulo scalars. The stored
/// representative is normalized so the first nonzero entry of (a,b,c,d)
/// is 1, making map equality plain entry equality.
#[derive(Debug, Clone)]
pub struct MoebiusMap {
    fp: Fp,
    pub a: u64,
    pub b: u64,
    pub c: u64,
    pub d: u64,
    spectral: OnceCell<SpectralData>,
}

impl PartialEq for MoebiusMap {
    fn eq(&self, other: &Self) -> bool {
        self.fp == other.fp
            && self.a == other.a
            && self.b == other.b
            && self.c == other.c
            && self.d == other.d
    }
}
impl Eq for MoebiusMap {}

impl MoebiusMap {
    pub fn new(fp: Fp, a: u64, b: u64, c: u64, d: u64) -> Result<Self> {
        let (a, b, c, d) = (fp.reduce(a), fp.reduce(b), fp.reduce(c), fp.reduce(d));
        if fp.sub(fp.mul(a, d), fp.mul(b, c)) == 0 {
            return Err(Error::SingularMatrix);
        }
        let lead = [a, b, c, d].into_iter().find(|&x| x != 0).unwrap();
        let s = fp.inv(lead)?;
        Ok(MoebiusMap {
            fp,
            a: fp.mul(a, s),
            b: fp.mul(b, s),
            c: fp.mul(c, s),
            d: fp.mul(d, s),
            spectral: OnceCell::new(),
        })
    }

    pub fn identity(fp: Fp) -> Self {
        MoebiusMap {
            fp,
            a: 1,
            b: 0,
            c: 0,
            d: 1,
            spectral: OnceCell::new(),
        }
    }

    pub fn field(&self) -> Fp {
        self.fp
    }

    pub fn entries(&self) -> [u64; 4] {
        [self.a, self.b, self.c, self.d]
    }

    /// Eigenstructure, computed once and cached.
    pub fn spectral(&self) -> SpectralData {
        *self.spectral.get_or_init(|| {
            let ext = Fp2::new(self.fp);
            classify(ext, self.a, self.b, self.c, self.d)
                .expect("constructor guarantees nonsingularity")
        })
    }

    /// psi(P): total on P^1. Poles map to infinity; infinity maps to a/c
    /// (or stays at infinity when c = 0).
    pub fn apply(&self, point: ProjPoint) -> ProjPoint {
        let (x, z) = point.to_homogeneous();
        let (nx, nz) = self.apply_homogeneous(x, z);
        if nz == 0 {
            ProjPoint::Infinity
        } else {
            ProjPoint::Affine(self.fp.mul(nx, self.fp.inv(nz).expect("nz nonzero")))
        }
    }

    /// One matrix-vector step in homogeneous coordinates; no inversion.
    #[inline]
    pub fn apply_homogeneous(&self, x: u64, z: u64) -> (u64, u64) {
        let f = self.fp;
        (
            f.add(f.mul(self.a, x), f.mul(self.b, z)),
            f.add(f.mul(self.c, x), f.mul(self.d, z)),
        )
    }

    /// Matrix product self * other, renormalized.
    pub fn compose(&self, other: &MoebiusMap) -> MoebiusMap {
        let f = self.fp;
        let a = f.add(f.mul(self.a, other.a), f.mul(self.b, other.c));
        let b = f.add(f.mul(self.a, other.b), f.mul(self.b, other.d));
        let c = f.add(f.mul(self.c, other.a), f.mul(self.d, other.c));
        let d = f.add(f.mul(self.c, other.b), f.mul(self.d, other.d));
        MoebiusMap::new(f, a, b, c, d).expect("product of nonsingular maps")
    }

    /// n-th iterate by binary powering; pow(M, 0) is the identity.
    pub fn pow(&self, mut n: u64) -> MoebiusMap {
        let mut acc = MoebiusMap::identity(self.fp);
        let mut base = self.clone();
        while n > 0 {
            if n & 1 == 1 {
                acc = acc.compose(&base);
            }
            base = base.compose(&base);
            n >>= 1;
        }
        acc
    }
}

/// A dynamical-system instance: prime, map, and initial value, with the
/// period computed lazily (spectral route when possible).
#[derive(Debug, Clone)]
pub struct OrbitSpec {
    pub map: MoebiusMap,
    pub u0: ProjPoint,
    period: OnceCell<u64>,
}

impl OrbitSpec {
    pub fn new(map: MoebiusMap, u0: ProjPoint) -> Self {
        OrbitSpec {
            map,
            u0,
            period: OnceCell::new(),
        }
    }

    pub fn field(&self) -> Fp {
        self.map.field()
    }

    /// Least t >= 1 with psi^t(u0) = u0. Spectral when non-parabolic,
    /// direct iteration otherwise. Always <= p + 1.
    pub fn period(&self) -> u64 {
        *self.period.get_or_init(|| {
            self.period_spectral()
                .unwrap_or_else(|_| self.period_direct())
        })
    }

    /// Period by plain iteration; O(t) map applications. This is the
    /// oracle the spectral route is tested against.
    pub fn period_direct(&self) -> u64 {
        let mut point = self.map.apply(self.u0);
        let mut t = 1u64;
        while point != self.u0 {
            point = self.map.apply(point);
            t += 1;
        }
        t
    }

    /// Period via the eigenvalue ratio: the map's order m in PGL_2 is
    /// ord(lambda1/lambda2) (dividing p-1 split, p+1 nonsplit); the point
    /// period is the least divisor of m fixing u0, divisors tried in
    /// increasing order for determinism.
    pub fn period_spectral(&self) -> Result<u64> {
        let spectral = self.map.spectral();
        let ratio = match spectral.kind {
            SpectralKind::Parabolic => return Err(Error::ParabolicMatrix),
            _ => spectral.ratio.expect("non-parabolic has a ratio"),
        };
        let p = self.field().modulus();
        let group = match spectral.kind {
            SpectralKind::Split => p - 1,
            SpectralKind::Nonsplit => p + 1,
            SpectralKind::Parabolic => unreachable!(),
        };
        let ext = Fp2::new(self.field());
        let m = fp2_order(ext, ratio, &factorize(group))?;
        for d in divisors(&FactoredInt::factor(m)) {
            if self.map.pow(d).apply(self.u0) == self.u0 {
                return Ok(d);
            }
        }
        unreachable!("psi^m fixes every point")
    }

    /// Stream u_{n0}, u_{n0+k}, ..., stepping with one precomputed stride
    /// map per term.
    pub fn iter(&self, start: u64, stride: u64) -> OrbitIter {
        assert!(stride >= 1, "stride must be >= 1");
        let (x, z) = self.u0.to_homogeneous();
        let (x, z) = {
            let jump = self.map.pow(start);
            jump.apply_homogeneous(x, z)
        };
        OrbitIter {
            stride_map: self.map.pow(stride),
            cur: (x, z),
        }
    }
}

/// Orbit stream in homogeneous coordinates. `next_raw` avoids the
/// per-term inversion; the `Iterator` impl normalizes for convenience.
pub struct OrbitIter {
    stride_map: MoebiusMap,
    cur: (u64, u64),
}

impl OrbitIter {
    /// Current point as (x : z), then advance.
    #[inline]
    pub fn next_raw(&mut self) -> (u64, u64) {
        let out = self.cur;
        self.cur = self.stride_map.apply_homogeneous(self.cur.0, self.cur.1);
        out
    }
}

impl Iterator for OrbitIter {
    type Item = ProjPoint;

    fn next(&mut self) -> Option<ProjPoint> {
        let (x, z) = self.next_raw();
        Some(
            ProjPoint::from_homogeneous(self.stride_map.field(), x, z)
                .expect("z nonzero handled by Infinity"),
        )
    }
}

/// All points of P^1(F_p): 0..p then infinity.
pub fn projective_line(fp: Fp) -> impl Iterator<Item = ProjPoint> {
    (0..fp.modulus())
        .map(ProjPoint::Affine)
        .chain(std::iter::once(ProjPoint::Infinity))
}
