//! Complex polynomials and a simultaneous-iteration (Aberth–Ehrlich) root
//! finder with clustered-root merging.

use num_complex::Complex64;
use thiserror::Error;

/// Relative residual below which a root is accepted.
pub const ROOT_RESIDUAL_TOL: f64 = 1e-12;
/// Roots closer than this are merged into one root with summed multiplicity.
pub const ROOT_MERGE_TOL: f64 = 1e-6;

const MAX_ABERTH_ITER: usize = 400;

#[derive(Debug, Error)]
pub enum PolyError {
    #[error("root finder did not converge within {iterations} iterations (worst residual {worst_residual:.3e})")]
    NoConvergence { iterations: usize, worst_residual: f64 },
    #[error("cannot extract roots of the zero polynomial")]
    ZeroPolynomial,
}

/// Dense polynomial c0 + c1 z + ... + cd z^d. The zero polynomial is the
/// empty coefficient list; otherwise the leading coefficient is nonzero.
#[derive(Clone, Debug, PartialEq)]
pub struct Polynomial {
    coeffs: Vec<Complex64>,
}

impl Polynomial {
    pub fn new(mut coeffs: Vec<Complex64>) -> Self {
        while coeffs.last().is_some_and(|c| c.norm() == 0.0) {
            coeffs.pop();
        }
        Polynomial { coeffs }
    }

    pub fn zero() -> Self {
        Polynomial { coeffs: Vec::new() }
    }

    pub fn one() -> Self {
        Polynomial::new(vec![Complex64::new(1.0, 0.0)])
    }

    pub fn monomial(degree: usize, coeff: Complex64) -> Self {
        let mut c = vec![Complex64::new(0.0, 0.0); degree + 1];
        c[degree] = coeff;
        Polynomial::new(c)
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// Degree, or `None` for the zero polynomial.
    pub fn degree(&self) -> Option<usize> {
        self.coeffs.len().checked_sub(1)
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn eval(&self, z: Complex64) -> Complex64 {
        let mut acc = Complex64::new(0.0, 0.0);
        for &c in self.coeffs.iter().rev() {
            acc = acc * z + c;
        }
        acc
    }

    /// Evaluates w^n p(1/w), the chart-at-infinity form padded to degree `n`.
    pub fn eval_reversed(&self, w: Complex64, n: usize) -> Complex64 {
        let mut acc = Complex64::new(0.0, 0.0);
        // p(1/w) w^n = sum_i c_i w^(n-i); Horner in w over reversed, padded coeffs.
        for &c in self.coeffs.iter() {
            acc = acc * w + c;
        }
        let pad = n + 1 - self.coeffs.len().max(1);
        if self.coeffs.is_empty() {
            return Complex64::new(0.0, 0.0);
        }
        acc * w.powu(pad as u32)
    }

    pub fn derivative(&self) -> Polynomial {
        if self.coeffs.len() <= 1 {
            return Polynomial::zero();
        }
        let c = self
            .coeffs
            .iter()
            .enumerate()
            .skip(1)
            .map(|(i, &c)| c * i as f64)
            .collect();
        Polynomial::new(c)
    }

    pub fn add(&self, other: &Polynomial) -> Polynomial {
        let n = self.coeffs.len().max(other.coeffs.len());
        let mut c = vec![Complex64::new(0.0, 0.0); n];
        for (i, &a) in self.coeffs.iter().enumerate() {
            c[i] += a;
        }
        for (i, &b) in other.coeffs.iter().enumerate() {
            c[i] += b;
        }
        Polynomial::new(c)
    }

    pub fn sub(&self, other: &Polynomial) -> Polynomial {
        self.add(&other.scale(Complex64::new(-1.0, 0.0)))
    }

    pub fn scale(&self, s: Complex64) -> Polynomial {
        Polynomial::new(self.coeffs.iter().map(|&c| c * s).collect())
    }

    pub fn mul(&self, other: &Polynomial) -> Polynomial {
        if self.is_zero() || other.is_zero() {
            return Polynomial::zero();
        }
        let mut c = vec![Complex64::new(0.0, 0.0); self.coeffs.len() + other.coeffs.len() - 1];
        for (i, &a) in self.coeffs.iter().enumerate() {
            for (j, &b) in other.coeffs.iter().enumerate() {
                c[i + j] += a * b;
            }
        }
        Polynomial::new(c)
    }

    pub fn pow(&self, n: usize) -> Polynomial {
        let mut acc = Polynomial::one();
        for _ in 0..n {
            acc = acc.mul(self);
        }
        acc
    }

    /// Substitutes z = (num/den) and returns the numerator of the result,
    /// i.e. sum_i c_i num^i den^(d-i) where d = deg(self).
    pub fn compose_rational(&self, num: &Polynomial, den: &Polynomial) -> Polynomial {
        if self.is_zero() {
            return Polynomial::zero();
        }
        let d = self.coeffs.len() - 1;
        let mut acc = Polynomial::zero();
        let mut num_pow = Polynomial::one();
        // den powers from d down to 0
        let mut den_pows = vec![Polynomial::one()];
        for _ in 0..d {
            den_pows.push(den_pows.last().unwrap().mul(den));
        }
        for (i, &c) in self.coeffs.iter().enumerate() {
            let term = num_pow.mul(&den_pows[d - i]).scale(c);
            acc = acc.add(&term);
            if i < d {
                num_pow = num_pow.mul(num);
            }
        }
        acc
    }

    /// Max coefficient magnitude, used for relative tolerances.
    pub fn coeff_scale(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max)
    }

    /// Drops leading coefficients below `rel_tol` times the coefficient scale.
    /// Needed after arithmetic that cancels the leading term (e.g. Wronskians).
    pub fn trimmed(&self, rel_tol: f64) -> Polynomial {
        let scale = self.coeff_scale();
        if scale == 0.0 {
            return Polynomial::zero();
        }
        let mut coeffs = self.coeffs.clone();
        while coeffs.last().is_some_and(|c| c.norm() <= rel_tol * scale) {
            coeffs.pop();
        }
        Polynomial { coeffs }
    }

    /// All roots with multiplicities. Roots closer than [`ROOT_MERGE_TOL`]
    /// are merged and their multiplicities summed.
    pub fn roots(&self) -> Result<Vec<(Complex64, usize)>, PolyError> {
        if self.is_zero() {
            return Err(PolyError::ZeroPolynomial);
        }
        let mut coeffs = self.coeffs.clone();
        let mut zero_mult = 0usize;
        let scale = self.coeff_scale();
        while coeffs.len() > 1 && coeffs[0].norm() <= 1e-14 * scale {
            coeffs.remove(0);
            zero_mult += 1;
        }
        let mut raw = match coeffs.len() {
            0 | 1 => Vec::new(),
            2 => vec![-coeffs[0] / coeffs[1]],
            3 => quadratic_roots(coeffs[0], coeffs[1], coeffs[2]),
            _ => aberth(&coeffs)?,
        };
        if zero_mult > 0 {
            raw.extend(std::iter::repeat(Complex64::new(0.0, 0.0)).take(zero_mult));
        }
        Ok(merge_clusters(raw))
    }
}

fn quadratic_roots(c: Complex64, b: Complex64, a: Complex64) -> Vec<Complex64> {
    let disc = (b * b - 4.0 * a * c).sqrt();
    // pick the sign that avoids cancellation
    let q = if (b + disc).norm() >= (b - disc).norm() {
        -0.5 * (b + disc)
    } else {
        -0.5 * (b - disc)
    };
    if q.norm() == 0.0 {
        return vec![Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0)];
    }
    vec![q / a, c / q]
}

/// Simultaneous Aberth–Ehrlich iteration on a polynomial of degree >= 3.
fn aberth(coeffs: &[Complex64]) -> Result<Vec<Complex64>, PolyError> {
    let d = coeffs.len() - 1;
    let lead = coeffs[d];
    let monic: Vec<Complex64> = coeffs.iter().map(|&c| c / lead).collect();
    let p = Polynomial {
        coeffs: monic.clone(),
    };
    let dp = p.derivative();

    // Cauchy bound for the root radius, slightly inflated.
    let radius = 1.0 + monic[..d].iter().map(|c| c.norm()).fold(0.0, f64::max);
    let mut z: Vec<Complex64> = (0..d)
        .map(|k| {
            let theta = 2.0 * std::f64::consts::PI * k as f64 / d as f64 + 0.41;
            let r = radius * (0.5 + 0.5 * (k as f64 + 1.0) / d as f64);
            Complex64::from_polar(r, theta)
        })
        .collect();

    let residual = |x: Complex64| -> f64 {
        let mut s = 0.0;
        let ax = x.norm();
        let mut pw = 1.0;
        for c in &monic {
            s += c.norm() * pw;
            pw *= ax;
        }
        p.eval(x).norm() / s.max(f64::MIN_POSITIVE)
    };

    let mut worst = f64::INFINITY;
    for _ in 0..MAX_ABERTH_ITER {
        let mut moved = 0.0f64;
        for i in 0..d {
            let pv = p.eval(z[i]);
            let dv = dp.eval(z[i]);
            if pv.norm() == 0.0 {
                continue;
            }
            let newton = if dv.norm() > 0.0 {
                pv / dv
            } else {
                Complex64::new(1e-8, 1e-8)
            };
            let mut s = Complex64::new(0.0, 0.0);
            for j in 0..d {
                if j != i {
                    let diff = z[i] - z[j];
                    if diff.norm() > 1e-300 {
                        s += diff.inv();
                    }
                }
            }
            let denom = Complex64::new(1.0, 0.0) - newton * s;
            let step = if denom.norm() > 1e-300 {
                newton / denom
            } else {
                newton
            };
            if step.is_finite() {
                z[i] -= step;
                moved = moved.max(step.norm());
            }
        }
        worst = z.iter().map(|&x| residual(x)).fold(0.0, f64::max);
        if worst <= ROOT_RESIDUAL_TOL || moved <= 1e-16 * radius {
            break;
        }
    }
    if worst > ROOT_RESIDUAL_TOL.max(1e-9) {
        return Err(PolyError::NoConvergence {
            iterations: MAX_ABERTH_ITER,
            worst_residual: worst,
        });
    }
    // polish with multiplicity-scaled Newton; an m-fold root leaves a cluster
    // of radius ~ residual^(1/m), so plain Newton is not enough to collapse it
    let ddp = dp.derivative();
    for zi in z.iter_mut() {
        for _ in 0..6 {
            let pv = p.eval(*zi);
            let dv = dp.eval(*zi);
            if dv.norm() <= 1e-300 {
                break;
            }
            // Lagouanelle multiplicity estimate m = 1 / (1 - p p'' / p'^2)
            let l = pv * ddp.eval(*zi) / (dv * dv);
            let denom = Complex64::new(1.0, 0.0) - l;
            let m = if denom.norm() > 1e-10 {
                (1.0 / denom).re.round().clamp(1.0, d as f64)
            } else {
                1.0
            };
            let step = pv / dv * m;
            if step.is_finite() && step.norm() < 1e-2 * (1.0 + zi.norm()) {
                *zi -= step;
            } else {
                break;
            }
        }
    }
    Ok(z)
}

fn merge_clusters(mut roots: Vec<Complex64>) -> Vec<(Complex64, usize)> {
    roots.sort_by(|a, b| {
        (a.re, a.im)
            .partial_cmp(&(b.re, b.im))
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let mut out: Vec<(Complex64, usize)> = Vec::new();
    let mut used = vec![false; roots.len()];
    for i in 0..roots.len() {
        if used[i] {
            continue;
        }
        let mut cluster = vec![roots[i]];
        used[i] = true;
        // grow the cluster transitively
        let mut grew = true;
        while grew {
            grew = false;
            for (j, u) in used.iter_mut().enumerate() {
                if !*u && cluster.iter().any(|c| (roots[j] - c).norm() < ROOT_MERGE_TOL) {
                    cluster.push(roots[j]);
                    *u = true;
                    grew = true;
                }
            }
        }
        let mean = cluster.iter().sum::<Complex64>() / cluster.len() as f64;
        out.push((mean, cluster.len()));
    }
    out
}
