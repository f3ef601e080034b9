//! Rational maps on the Riemann sphere: dual-chart evaluation, chart
//! derivatives, critical points with local degrees, Moebius conjugation and
//! symbolic iteration.

use num_complex::Complex64;
use thiserror::Error;

use crate::poly::{Polynomial, PolyError, ROOT_MERGE_TOL};
use crate::sphere::{chordal_distance, MoebiusMap, SpherePoint};

#[derive(Debug, Error)]
pub enum RatMapError {
    #[error("denominator is the zero polynomial")]
    ZeroDenominator,
    #[error("map has degree {0}, need at least {1}")]
    DegreeTooLow(usize, usize),
    #[error("numerator and denominator share a root (chordal distance {0:.3e} <= {ROOT_MERGE_TOL:.0e})")]
    NotCoprime(f64),
    #[error("root finding failed: {0}")]
    Roots(#[from] PolyError),
    #[error("conjugating by a singular Moebius map")]
    BadConjugation,
}

/// A rational map P/Q with coprime numerator and denominator.
///
/// Evaluation picks the chart (standard or w = 1/z) in which the input
/// coordinate has magnitude <= 1, so poles and infinity are handled without
/// overflow.
#[derive(Clone, Debug)]
pub struct RationalMap {
    num: Polynomial,
    den: Polynomial,
    degree: usize,
    // reversed, degree-padded coefficients: num_rev(w) = w^degree * P(1/w)
    num_rev: Polynomial,
    den_rev: Polynomial,
    num_d: Polynomial,
    den_d: Polynomial,
    num_rev_d: Polynomial,
    den_rev_d: Polynomial,
    critical: Vec<(SpherePoint, u32)>,
}

fn reversed_padded(p: &Polynomial, n: usize) -> Polynomial {
    let mut c = vec![Complex64::new(0.0, 0.0); n + 1];
    for (i, &v) in p.coeffs().iter().enumerate() {
        c[n - i] = v;
    }
    Polynomial::new(c)
}

impl RationalMap {
    pub fn new(num: Polynomial, den: Polynomial) -> Result<Self, RatMapError> {
        if den.is_zero() {
            return Err(RatMapError::ZeroDenominator);
        }
        let dp = num.degree().unwrap_or(0);
        let dq = den.degree().unwrap_or(0);
        let degree = dp.max(dq);
        if num.is_zero() || degree < 1 {
            return Err(RatMapError::DegreeTooLow(degree, 1));
        }
        // numeric coprimality: no root of P within tolerance of a root of Q
        if num.degree().unwrap_or(0) >= 1 && den.degree().unwrap_or(0) >= 1 {
            let pr = num.roots()?;
            let qr = den.roots()?;
            let mut min_dist = f64::INFINITY;
            for (p, _) in &pr {
                for (q, _) in &qr {
                    let d = chordal_distance(
                        SpherePoint::from_complex(*p),
                        SpherePoint::from_complex(*q),
                    );
                    min_dist = min_dist.min(d);
                }
            }
            if min_dist <= ROOT_MERGE_TOL {
                return Err(RatMapError::NotCoprime(min_dist));
            }
        }
        let num_rev = reversed_padded(&num, degree);
        let den_rev = reversed_padded(&den, degree);
        let mut map = RationalMap {
            num_d: num.derivative(),
            den_d: den.derivative(),
            num_rev_d: num_rev.derivative(),
            den_rev_d: den_rev.derivative(),
            num,
            den,
            degree,
            num_rev,
            den_rev,
            critical: Vec::new(),
        };
        if degree >= 2 {
            map.critical = map.compute_critical_points()?;
        }
        Ok(map)
    }

    /// Builds a map from (re, im) coefficient pairs, constant term first.
    pub fn from_coeff_pairs(num: &[[f64; 2]], den: &[[f64; 2]]) -> Result<Self, RatMapError> {
        let conv = |c: &[[f64; 2]]| {
            Polynomial::new(c.iter().map(|p| Complex64::new(p[0], p[1])).collect())
        };
        RationalMap::new(conv(num), conv(den))
    }

    /// The example carpet map f(z) = z^2 - 1/(16 z^2) = (16 z^4 - 1)/(16 z^2).
    pub fn carpet_example() -> Self {
        let num = Polynomial::new(vec![
            Complex64::new(-1.0, 0.0),
            Complex64::new(0.0, 0.0),
            Complex64::new(0.0, 0.0),
            Complex64::new(0.0, 0.0),
            Complex64::new(16.0, 0.0),
        ]);
        let den = Polynomial::new(vec![
            Complex64::new(0.0, 0.0),
            Complex64::new(0.0, 0.0),
            Complex64::new(16.0, 0.0),
        ]);
        RationalMap::new(num, den).expect("example map is valid")
    }

    /// z -> z^k
    pub fn power_map(k: usize) -> Self {
        RationalMap::new(
            Polynomial::monomial(k, Complex64::new(1.0, 0.0)),
            Polynomial::one(),
        )
        .expect("power map is valid")
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn numerator(&self) -> &Polynomial {
        &self.num
    }

    pub fn denominator(&self) -> &Polynomial {
        &self.den
    }

    pub fn eval(&self, p: SpherePoint) -> SpherePoint {
        let (num, den) = match p {
            SpherePoint::Infinity => (
                self.num_rev.eval(Complex64::new(0.0, 0.0)),
                self.den_rev.eval(Complex64::new(0.0, 0.0)),
            ),
            SpherePoint::Finite(z) => {
                if z.norm_sqr() <= 1.0 {
                    (self.num.eval(z), self.den.eval(z))
                } else {
                    let w = z.inv();
                    (self.num_rev.eval(w), self.den_rev.eval(w))
                }
            }
        };
        if den.norm() == 0.0 {
            return SpherePoint::Infinity;
        }
        SpherePoint::from_complex(num / den)
    }

    /// Chart-explicit evaluation: interprets `coord` in the standard chart,
    /// or as w = 1/z when `w_chart` is set. Exposed for chart-agreement
    /// verification.
    pub fn eval_in_chart(&self, coord: Complex64, w_chart: bool) -> SpherePoint {
        let (num, den) = if w_chart {
            (self.num_rev.eval(coord), self.den_rev.eval(coord))
        } else {
            (self.num.eval(coord), self.den.eval(coord))
        };
        if den.norm() == 0.0 {
            return SpherePoint::Infinity;
        }
        SpherePoint::from_complex(num / den)
    }

    /// Evaluates f and the derivative of chart_out o f o chart_in^-1, where
    /// each chart is the one in which the coordinate magnitude is <= 1.
    /// Multipliers of cycles are products of these chart derivatives.
    pub fn eval_with_deriv(&self, p: SpherePoint) -> (SpherePoint, Complex64) {
        let (n, d, nd, dd, w_in) = match p {
            SpherePoint::Infinity => {
                let w = Complex64::new(0.0, 0.0);
                (
                    self.num_rev.eval(w),
                    self.den_rev.eval(w),
                    self.num_rev_d.eval(w),
                    self.den_rev_d.eval(w),
                    true,
                )
            }
            SpherePoint::Finite(z) => {
                if z.norm_sqr() <= 1.0 {
                    (
                        self.num.eval(z),
                        self.den.eval(z),
                        self.num_d.eval(z),
                        self.den_d.eval(z),
                        false,
                    )
                } else {
                    let w = z.inv();
                    (
                        self.num_rev.eval(w),
                        self.den_rev.eval(w),
                        self.num_rev_d.eval(w),
                        self.den_rev_d.eval(w),
                        true,
                    )
                }
            }
        };
        let _ = w_in;
        let wronsk = nd * d - n * dd;
        let value = if d.norm() == 0.0 {
            SpherePoint::Infinity
        } else {
            SpherePoint::from_complex(n / d)
        };
        // output chart follows the same magnitude rule as the input chart
        let out_w = match value {
            SpherePoint::Infinity => true,
            SpherePoint::Finite(v) => v.norm_sqr() > 1.0,
        };
        let deriv = if out_w {
            // d(1/f) = -f'/f^2 = -(n'd - nd')/n^2
            if n.norm() == 0.0 {
                Complex64::new(f64::INFINITY, 0.0)
            } else {
                -wronsk / (n * n)
            }
        } else if d.norm() == 0.0 {
            Complex64::new(f64::INFINITY, 0.0)
        } else {
            wronsk / (d * d)
        };
        (value, deriv)
    }

    fn compute_critical_points(&self) -> Result<Vec<(SpherePoint, u32)>, RatMapError> {
        let w = self
            .num_d
            .mul(&self.den)
            .sub(&self.num.mul(&self.den_d))
            .trimmed(1e-11);
        let target = 2 * self.degree - 2;
        let mut out: Vec<(SpherePoint, u32)> = Vec::new();
        let wdeg = match w.degree() {
            None => 0,
            Some(d) => {
                for (root, mult) in w.roots()? {
                    out.push((SpherePoint::from_complex(root), mult as u32 + 1));
                }
                d
            }
        };
        if wdeg < target {
            out.push((SpherePoint::Infinity, (target - wdeg) as u32 + 1));
        }
        debug_assert_eq!(
            out.iter().map(|(_, k)| (*k - 1) as usize).sum::<usize>(),
            target
        );
        Ok(out)
    }

    /// All critical points with local degrees; the multiplicities satisfy
    /// sum (deg - 1) = 2 deg(f) - 2.
    pub fn critical_points(&self) -> Result<&[(SpherePoint, u32)], RatMapError> {
        if self.degree < 2 {
            return Err(RatMapError::DegreeTooLow(self.degree, 2));
        }
        Ok(&self.critical)
    }

    /// Local degree of f at p: 1 at non-critical points.
    pub fn local_degree(&self, p: SpherePoint) -> u32 {
        for (c, k) in &self.critical {
            if chordal_distance(p, *c) < ROOT_MERGE_TOL {
                return *k;
            }
        }
        1
    }

    /// All solutions of f(z) = target with multiplicities (sum = deg f).
    pub fn preimages(&self, target: SpherePoint) -> Result<Vec<(SpherePoint, usize)>, RatMapError> {
        let r = match target {
            SpherePoint::Infinity => self.den.clone(),
            SpherePoint::Finite(t) => self.num.sub(&self.den.scale(t)).trimmed(1e-12),
        };
        let mut out: Vec<(SpherePoint, usize)> = Vec::new();
        let rdeg = match r.degree() {
            None => 0,
            Some(d) => {
                for (root, mult) in r.roots()? {
                    out.push((SpherePoint::from_complex(root), mult));
                }
                d
            }
        };
        if rdeg < self.degree {
            out.push((SpherePoint::Infinity, self.degree - rdeg));
        }
        Ok(out)
    }

    /// self o inner, as a rational map with expanded coefficients.
    pub fn compose(&self, inner: &RationalMap) -> Result<RationalMap, RatMapError> {
        let n = self.degree;
        let dp = self.num.degree().unwrap_or(0);
        let dq = self.den.degree().unwrap_or(0);
        let a = self
            .num
            .compose_rational(&inner.num, &inner.den)
            .mul(&inner.den.pow(n - dp));
        let b = self
            .den
            .compose_rational(&inner.num, &inner.den)
            .mul(&inner.den.pow(n - dq));
        RationalMap::new(a.trimmed(1e-13), b.trimmed(1e-13))
    }

    /// The n-th iterate as a rational map (degree grows as deg^n).
    pub fn iterate(&self, n: usize) -> Result<RationalMap, RatMapError> {
        assert!(n >= 1);
        let mut acc = self.clone();
        for _ in 1..n {
            acc = self.compose(&acc)?;
        }
        Ok(acc)
    }

    /// Conjugate m o f o m^-1. Orientation-reversing m is supported via
    /// coefficient conjugation.
    pub fn conjugate(&self, m: &MoebiusMap) -> Result<RationalMap, RatMapError> {
        let conj_poly = |p: &Polynomial| {
            Polynomial::new(p.coeffs().iter().map(|c| c.conj()).collect())
        };
        let (num, den) = if m.conjugate_first {
            // m = M o conj, so m o f o m^-1 = M o (conj o f o conj) o M^-1
            (conj_poly(&self.num), conj_poly(&self.den))
        } else {
            (self.num.clone(), self.den.clone())
        };
        // m^-1(z) = (dz - b)/(-cz + a) for the linear part (det = 1)
        let rn = Polynomial::new(vec![-m.b, m.d]);
        let rd = Polynomial::new(vec![m.a, -m.c]);
        let n = self.degree;
        let dp = num.degree().unwrap_or(0);
        let dq = den.degree().unwrap_or(0);
        let a = num.compose_rational(&rn, &rd).mul(&rd.pow(n - dp));
        let b = den.compose_rational(&rn, &rd).mul(&rd.pow(n - dq));
        // postcompose with the linear part of m
        let new_num = a.scale(m.a).add(&b.scale(m.b));
        let new_den = a.scale(m.c).add(&b.scale(m.d));
        RationalMap::new(new_num.trimmed(1e-13), new_den.trimmed(1e-13))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn example_map_eval() {
        let f = RationalMap::carpet_example();
        assert_eq!(f.degree(), 4);
        // i/2 -> 0
        let v = f.eval(SpherePoint::finite(0.0, 0.5));
        assert!(chordal_distance(v, SpherePoint::finite(0.0, 0.0)) < 1e-14);
        // 0 -> inf (double pole)
        assert_eq!(f.eval(SpherePoint::finite(0.0, 0.0)), SpherePoint::Infinity);
        // inf -> inf (fixed)
        assert_eq!(f.eval(SpherePoint::Infinity), SpherePoint::Infinity);
    }

    #[test]
    fn example_map_critical_points() {
        let f = RationalMap::carpet_example();
        let crit = f.critical_points().unwrap();
        // six critical points: 0, inf, and the four roots of 16 z^4 + 1
        assert_eq!(crit.len(), 6);
        let mut found_zero = false;
        let mut found_inf = false;
        let mut quartic = 0;
        for (p, k) in crit {
            assert_eq!(*k, 2);
            match p {
                SpherePoint::Infinity => found_inf = true,
                SpherePoint::Finite(z) if z.norm() < 1e-9 => found_zero = true,
                SpherePoint::Finite(z) => {
                    assert!((z.norm() - 0.5).abs() < 1e-9);
                    let v = 16.0 * (z * z * z * z) + Complex64::new(1.0, 0.0);
                    assert!(v.norm() < 1e-9);
                    quartic += 1;
                }
            }
        }
        assert!(found_zero && found_inf && quartic == 4);
    }

    #[test]
    fn power_map_critical_points() {
        for k in 2..=5 {
            let f = RationalMap::power_map(k);
            let crit = f.critical_points().unwrap();
            assert_eq!(crit.len(), 2);
            for (p, deg) in crit {
                assert_eq!(*deg as usize, k);
                assert!(matches!(p, SpherePoint::Infinity) || p.as_complex().unwrap().norm() < 1e-12);
            }
        }
    }

    #[test]
    fn local_degrees() {
        let f = RationalMap::carpet_example();
        assert_eq!(f.local_degree(SpherePoint::finite(1.0, 0.0)), 1);
        assert_eq!(f.local_degree(SpherePoint::Infinity), 2);
        assert_eq!(f.local_degree(SpherePoint::finite(0.0, 0.0)), 2);
        let z2 = RationalMap::power_map(2);
        assert_eq!(z2.local_degree(SpherePoint::finite(0.0, 0.0)), 2);
    }

    #[test]
    fn degree_one_critical_points_rejected() {
        let m = RationalMap::new(
            Polynomial::new(vec![c(1.0, 0.0), c(2.0, 0.0)]),
            Polynomial::one(),
        )
        .unwrap();
        assert!(matches!(
            m.critical_points(),
            Err(RatMapError::DegreeTooLow(1, 2))
        ));
    }

    #[test]
    fn coprimality_enforced() {
        // (z-1)(z+1) / (z-1)
        let num = Polynomial::new(vec![c(-1.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)]);
        let den = Polynomial::new(vec![c(-1.0, 0.0), c(1.0, 0.0)]);
        assert!(matches!(
            RationalMap::new(num, den),
            Err(RatMapError::NotCoprime(_))
        ));
    }

    #[test]
    fn preimages_of_infinity_and_points() {
        let f = RationalMap::carpet_example();
        // f(z) = inf at the double pole z = 0, and inf itself (local degree 2)
        let pre = f.preimages(SpherePoint::Infinity).unwrap();
        assert_eq!(pre.iter().map(|p| p.1).sum::<usize>(), 4);
        assert!(pre.iter().any(|(p, m)| p.is_infinite() && *m == 2));
        assert!(pre
            .iter()
            .any(|(p, m)| !p.is_infinite() && p.as_complex().unwrap().norm() < 1e-9 && *m == 2));
        // f(z) = 0 at the four roots of 16 z^4 = 1
        let pre0 = f.preimages(SpherePoint::finite(0.0, 0.0)).unwrap();
        assert_eq!(pre0.len(), 4);
        for (p, m) in pre0 {
            assert_eq!(m, 1);
            assert!((p.as_complex().unwrap().norm() - 0.5).abs() < 1e-9);
        }
    }

    #[test]
    fn compose_and_iterate() {
        let f = RationalMap::carpet_example();
        let f2 = f.iterate(2).unwrap();
        assert_eq!(f2.degree(), 16);
        for z in [c(0.3, 0.2), c(-0.7, 0.9), c(1.4, -0.3)] {
            let direct = f.eval(f.eval(SpherePoint::Finite(z)));
            let composed = f2.eval(SpherePoint::Finite(z));
            assert!(chordal_distance(direct, composed) < 1e-9);
        }
    }

    #[test]
    fn conjugation_by_scaling() {
        let f = RationalMap::carpet_example();
        let s = c(2.0, 0.0);
        let m = MoebiusMap::scaling(s).unwrap();
        let g = f.conjugate(&m).unwrap();
        // g(z) = 2 f(z/2)
        for z in [c(0.5, 0.1), c(-0.2, 0.9), c(1.8, -0.6)] {
            let expect = match f.eval(SpherePoint::Finite(z / s)) {
                SpherePoint::Finite(v) => SpherePoint::Finite(v * s),
                SpherePoint::Infinity => SpherePoint::Infinity,
            };
            assert!(chordal_distance(g.eval(SpherePoint::Finite(z)), expect) < 1e-10);
        }
    }

    #[test]
    fn critical_points_conjugation_equivariance() {
        let f = RationalMap::carpet_example();
        let m = MoebiusMap::new(c(1.1, 0.2), c(0.3, -0.1), c(0.05, 0.02), c(1.0, 0.0), false).unwrap();
        let g = f.conjugate(&m).unwrap();
        let fc = f.critical_points().unwrap();
        let gc = g.critical_points().unwrap();
        assert_eq!(fc.len(), gc.len());
        for (p, k) in fc {
            let image = m.apply(*p);
            let best = gc
                .iter()
                .filter(|(_, kk)| kk == k)
                .map(|(q, _)| chordal_distance(image, *q))
                .fold(f64::INFINITY, f64::min);
            assert!(best < 1e-8, "critical point {p:?} image off by {best:.3e}");
        }
    }

    #[test]
    fn derivative_chart_products() {
        // multiplier of the fixed point of z^2 at inf is 0 (superattracting)
        let f = RationalMap::power_map(2);
        let (v, d) = f.eval_with_deriv(SpherePoint::Infinity);
        assert_eq!(v, SpherePoint::Infinity);
        assert_eq!(d.norm(), 0.0);
        // repelling fixed point of z^2 at 1: derivative 2
        let (v, d) = f.eval_with_deriv(SpherePoint::finite(1.0, 0.0));
        assert!(chordal_distance(v, SpherePoint::finite(1.0, 0.0)) < 1e-15);
        assert!((d - c(2.0, 0.0)).norm() < 1e-12);
    }

    proptest! {
        // standard-chart and w-chart evaluation agree wherever both are
        // numerically admissible
        #[test]
        fn dual_chart_agreement(a0 in -2.0..2.0f64, a1 in -2.0..2.0f64, a2 in -2.0..2.0f64,
                                b0 in -2.0..2.0f64, b1 in -2.0..2.0f64,
                                zr in -1.5..1.5f64, zi in -1.5..1.5f64) {
            let num = Polynomial::new(vec![c(a0, 0.3), c(a1, -0.2), c(a2 + 2.5, 0.0)]);
            let den = Polynomial::new(vec![c(b0, 0.0), c(b1, 0.1), c(1.0, 0.0)]);
            let f = RationalMap::new(num, den);
            prop_assume!(f.is_ok());
            let f = f.unwrap();
            let z = c(zr, zi);
            prop_assume!(z.norm() > 0.5 && z.norm() < 1.5);
            let v_std = f.eval_in_chart(z, false);
            let v_w = f.eval_in_chart(z.inv(), true);
            prop_assert!(chordal_distance(v_std, v_w) < 1e-10);
        }

        #[test]
        fn critical_multiplicity_sum(a0 in -2.0..2.0f64, a1 in -2.0..2.0f64,
                                     b0 in -2.0..2.0f64, b2 in 0.5..2.0f64) {
            let num = Polynomial::new(vec![c(a0, 0.1), c(a1, 0.0), c(0.0,0.0), c(1.0, 0.0)]);
            let den = Polynomial::new(vec![c(b0, -0.3), c(0.0,0.0), c(b2, 0.0)]);
            let f = RationalMap::new(num, den);
            prop_assume!(f.is_ok());
            let f = f.unwrap();
            let crit = f.critical_points();
            prop_assume!(crit.is_ok());
            let total: usize = crit.unwrap().iter().map(|(_, k)| (*k - 1) as usize).sum();
            prop_assert_eq!(total, 2 * f.degree() - 2);
        }
    }
}
