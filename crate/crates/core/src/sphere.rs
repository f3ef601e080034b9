//! Points on the Riemann sphere with the chordal metric, and Moebius
//! transformations (fractional linear maps, optionally precomposed with
//! complex conjugation).

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SphereError {
    #[error("Moebius determinant too close to zero: |ad - bc| = {0:.3e}")]
    SingularMoebius(f64),
    #[error("non-finite matrix entry in Moebius transformation")]
    NonFiniteEntry,
}

/// A point of the Riemann sphere: a finite complex value or infinity.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum SpherePoint {
    Finite(Complex64),
    Infinity,
}

impl SpherePoint {
    /// Wraps a complex value, sending non-finite values to infinity so no
    /// NaN/overflow sentinel leaks into results.
    pub fn from_complex(z: Complex64) -> Self {
        if z.re.is_finite() && z.im.is_finite() {
            SpherePoint::Finite(z)
        } else {
            SpherePoint::Infinity
        }
    }

    pub fn finite(re: f64, im: f64) -> Self {
        SpherePoint::from_complex(Complex64::new(re, im))
    }

    pub fn is_infinite(&self) -> bool {
        matches!(self, SpherePoint::Infinity)
    }

    pub fn as_complex(&self) -> Option<Complex64> {
        match self {
            SpherePoint::Finite(z) => Some(*z),
            SpherePoint::Infinity => None,
        }
    }

    /// Stereographic embedding into the unit sphere in R^3; the chordal
    /// metric is the Euclidean distance between embedded points.
    pub fn to_r3(&self) -> [f64; 3] {
        match self {
            SpherePoint::Infinity => [0.0, 0.0, 1.0],
            SpherePoint::Finite(z) => {
                let n = z.norm_sqr();
                if n > 1e200 {
                    // embed via 1/z to avoid overflow in 1 + |z|^2
                    let w = z.inv();
                    let m = w.norm_sqr();
                    let d = 1.0 + m;
                    return [2.0 * w.re / d, -2.0 * w.im / d, (1.0 - m) / d];
                }
                let d = 1.0 + n;
                [2.0 * z.re / d, 2.0 * z.im / d, (n - 1.0) / d]
            }
        }
    }

    pub fn chordal(&self, other: &SpherePoint) -> f64 {
        chordal_distance(*self, *other)
    }
}

/// Chordal metric on the sphere: sigma(z, w) = 2|z-w| / sqrt((1+|z|^2)(1+|w|^2)),
/// sigma(z, inf) = 2 / sqrt(1+|z|^2). Values lie in [0, 2].
pub fn chordal_distance(a: SpherePoint, b: SpherePoint) -> f64 {
    match (a, b) {
        (SpherePoint::Infinity, SpherePoint::Infinity) => 0.0,
        (SpherePoint::Finite(z), SpherePoint::Infinity)
        | (SpherePoint::Infinity, SpherePoint::Finite(z)) => {
            let n = z.norm();
            if n > 1.0 {
                // 2 / sqrt(1 + n^2) = 2 (1/n) / sqrt(1/n^2 + 1), overflow-safe
                let inv = 1.0 / n;
                2.0 * inv / (1.0 + inv * inv).sqrt()
            } else {
                2.0 / (1.0 + n * n).sqrt()
            }
        }
        (SpherePoint::Finite(z), SpherePoint::Finite(w)) => {
            if z == w {
                return 0.0;
            }
            let (nz, nw) = (z.norm(), w.norm());
            if nz.max(nw) > 1e130 {
                // sigma is invariant under z -> 1/z; invert to tame magnitudes
                let zi = if nz == f64::INFINITY { Complex64::new(0.0, 0.0) } else { z.inv() };
                let wi = if nw == f64::INFINITY { Complex64::new(0.0, 0.0) } else { w.inv() };
                return chordal_finite(zi, wi);
            }
            chordal_finite(z, w)
        }
    }
}

fn chordal_finite(z: Complex64, w: Complex64) -> f64 {
    let num = 2.0 * (z - w).norm();
    let den = ((1.0 + z.norm_sqr()) * (1.0 + w.norm_sqr())).sqrt();
    (num / den).min(2.0)
}

/// Fractional linear transformation z -> (az + b)/(cz + d) with ad - bc
/// normalized to 1, optionally precomposed with complex conjugation.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct MoebiusMap {
    pub a: Complex64,
    pub b: Complex64,
    pub c: Complex64,
    pub d: Complex64,
    /// Apply z -> conj(z) before the fractional linear part.
    pub conjugate_first: bool,
}

impl MoebiusMap {
    pub fn new(
        a: Complex64,
        b: Complex64,
        c: Complex64,
        d: Complex64,
        conjugate_first: bool,
    ) -> Result<Self, SphereError> {
        for e in [a, b, c, d] {
            if !(e.re.is_finite() && e.im.is_finite()) {
                return Err(SphereError::NonFiniteEntry);
            }
        }
        let det = a * d - b * c;
        let scale = [a, b, c, d].iter().map(|e| e.norm()).fold(0.0, f64::max);
        if det.norm() <= 1e-14 * scale * scale {
            return Err(SphereError::SingularMoebius(det.norm()));
        }
        let s = det.sqrt().inv();
        Ok(MoebiusMap {
            a: a * s,
            b: b * s,
            c: c * s,
            d: d * s,
            conjugate_first,
        })
    }

    pub fn identity() -> Self {
        MoebiusMap {
            a: Complex64::new(1.0, 0.0),
            b: Complex64::new(0.0, 0.0),
            c: Complex64::new(0.0, 0.0),
            d: Complex64::new(1.0, 0.0),
            conjugate_first: false,
        }
    }

    /// z -> s z
    pub fn scaling(s: Complex64) -> Result<Self, SphereError> {
        MoebiusMap::new(
            s,
            Complex64::new(0.0, 0.0),
            Complex64::new(0.0, 0.0),
            Complex64::new(1.0, 0.0),
            false,
        )
    }

    /// z -> z + t
    pub fn translation(t: Complex64) -> Self {
        MoebiusMap::new(
            Complex64::new(1.0, 0.0),
            t,
            Complex64::new(0.0, 0.0),
            Complex64::new(1.0, 0.0),
            false,
        )
        .expect("translation is never singular")
    }

    /// z -> conj(z)
    pub fn conjugation() -> Self {
        let mut m = MoebiusMap::identity();
        m.conjugate_first = true;
        m
    }

    /// The unique orientation-preserving map sending (z1, z2, z3) to (0, 1, inf).
    pub fn to_zero_one_inf(
        z1: SpherePoint,
        z2: SpherePoint,
        z3: SpherePoint,
    ) -> Result<Self, SphereError> {
        let one = Complex64::new(1.0, 0.0);
        let zero = Complex64::new(0.0, 0.0);
        match (z1, z2, z3) {
            (SpherePoint::Infinity, SpherePoint::Finite(z2), SpherePoint::Finite(z3)) => {
                MoebiusMap::new(zero, z2 - z3, -one, z3, false)
            }
            (SpherePoint::Finite(z1), SpherePoint::Infinity, SpherePoint::Finite(z3)) => {
                MoebiusMap::new(one, -z1, one, -z3, false)
            }
            (SpherePoint::Finite(z1), SpherePoint::Finite(z2), SpherePoint::Infinity) => {
                MoebiusMap::new(-one, z1, zero, -(z2 - z1), false)
            }
            (SpherePoint::Finite(z1), SpherePoint::Finite(z2), SpherePoint::Finite(z3)) => {
                MoebiusMap::new(z2 - z3, -z1 * (z2 - z3), z2 - z1, -z3 * (z2 - z1), false)
            }
            _ => Err(SphereError::SingularMoebius(0.0)),
        }
    }

    /// The Moebius map sending one ordered triple to another; when
    /// `conjugate` is set the result is orientation-reversing.
    pub fn from_triples(
        src: [SpherePoint; 3],
        dst: [SpherePoint; 3],
        conjugate: bool,
    ) -> Result<Self, SphereError> {
        let src = if conjugate {
            let conj = |p: SpherePoint| match p {
                SpherePoint::Finite(z) => SpherePoint::Finite(z.conj()),
                SpherePoint::Infinity => SpherePoint::Infinity,
            };
            [conj(src[0]), conj(src[1]), conj(src[2])]
        } else {
            src
        };
        let t1 = MoebiusMap::to_zero_one_inf(src[0], src[1], src[2])?;
        let t2 = MoebiusMap::to_zero_one_inf(dst[0], dst[1], dst[2])?;
        let mut m = t2.inverse().compose(&t1);
        m.conjugate_first = conjugate;
        Ok(m)
    }

    pub fn apply(&self, p: SpherePoint) -> SpherePoint {
        let p = if self.conjugate_first {
            match p {
                SpherePoint::Finite(z) => SpherePoint::Finite(z.conj()),
                SpherePoint::Infinity => SpherePoint::Infinity,
            }
        } else {
            p
        };
        match p {
            SpherePoint::Infinity => {
                if self.c.norm() == 0.0 {
                    SpherePoint::Infinity
                } else {
                    SpherePoint::from_complex(self.a / self.c)
                }
            }
            SpherePoint::Finite(z) => {
                let den = self.c * z + self.d;
                let num = self.a * z + self.b;
                if den.norm() <= 1e-300 * num.norm().max(1.0) {
                    return SpherePoint::Infinity;
                }
                if z.norm() > 1e150 {
                    // evaluate via w = 1/z to avoid overflow
                    let w = z.inv();
                    let den_w = self.c + self.d * w;
                    if den_w.norm() == 0.0 {
                        return SpherePoint::Infinity;
                    }
                    return SpherePoint::from_complex((self.a + self.b * w) / den_w);
                }
                SpherePoint::from_complex(num / den)
            }
        }
    }

    /// self o other (apply `other` first). The composition of two
    /// orientation-reversing maps is orientation-preserving.
    pub fn compose(&self, other: &MoebiusMap) -> MoebiusMap {
        let (oa, ob, oc, od) = if self.conjugate_first {
            (other.a.conj(), other.b.conj(), other.c.conj(), other.d.conj())
        } else {
            (other.a, other.b, other.c, other.d)
        };
        MoebiusMap::new(
            self.a * oa + self.b * oc,
            self.a * ob + self.b * od,
            self.c * oa + self.d * oc,
            self.c * ob + self.d * od,
            self.conjugate_first ^ other.conjugate_first,
        )
        .expect("composition of nonsingular maps is nonsingular")
    }

    pub fn inverse(&self) -> MoebiusMap {
        // det is normalized to 1, so inv matrix = [d, -b; -c, a]
        let (a, b, c, d) = (self.d, -self.b, -self.c, self.a);
        if self.conjugate_first {
            MoebiusMap::new(a.conj(), b.conj(), c.conj(), d.conj(), true)
                .expect("inverse of nonsingular map")
        } else {
            MoebiusMap::new(a, b, c, d, false).expect("inverse of nonsingular map")
        }
    }

    /// Canonical projective form: entries scaled so the largest-magnitude
    /// entry becomes 1. Quotients out the overall phase before comparison.
    pub fn canonical(&self) -> [Complex64; 4] {
        let entries = [self.a, self.b, self.c, self.d];
        let mut pivot = entries[0];
        for e in entries {
            if e.norm() > pivot.norm() {
                pivot = e;
            }
        }
        let s = pivot.inv();
        [entries[0] * s, entries[1] * s, entries[2] * s, entries[3] * s]
    }

    /// Max entrywise distance between canonical forms; infinity when the
    /// orientation flags differ.
    pub fn matrix_distance(&self, other: &MoebiusMap) -> f64 {
        if self.conjugate_first != other.conjugate_first {
            return f64::INFINITY;
        }
        let x = self.canonical();
        let y = other.canonical();
        x.iter()
            .zip(y.iter())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    pub fn is_identity(&self, tol: f64) -> bool {
        self.matrix_distance(&MoebiusMap::identity()) <= tol && !self.conjugate_first
    }
}
