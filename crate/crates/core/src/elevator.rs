//! The conformal elevator: normalization of a subhyperbolic map so its Julia
//! set sits in half the unit disk with infinity an attracting fixed point,
//! selection of the blow-up scale, maximal-iterate elevation of small disks
//! to definite size, and empirical distortion constants.
//!
//! All metric notions here are Euclidean in the normalized chart, where the
//! Julia set lives inside the unit disk.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::orbits::{postcritical_report, OrbitError, OrbitReport, DEFAULT_ORBIT_BUDGET};
use crate::raster::{rasterize, RasterError, RasterParams};
use crate::ratmap::{RatMapError, RationalMap};
use crate::spatial::PlanarGrid;
use crate::sphere::{MoebiusMap, SpherePoint, SphereError};

/// Boundary samples per elevated disk.
const BOUNDARY_SAMPLES: usize = 256;
/// Interior samples per elevated disk (guards chart seams; images of disks
/// under iterates need not be convex).
const INTERIOR_SAMPLES: usize = 32;
/// Iteration cap for a single elevation.
const ELEVATE_CAP: u32 = 100_000;

#[derive(Debug, Error)]
pub enum ElevatorError {
    #[error("map has no attracting cycle (not subhyperbolic at tolerance)")]
    NoAttractingCycle,
    #[error("normalization failed the boundary-invariance samples after {0} rescale attempts")]
    AddinvViolation(usize),
    #[error("julia raster did not fit any window")]
    WindowExhausted,
    #[error("radius {r:.3e} out of range (0, eps0 = {eps0:.3e})")]
    BadRadius { r: f64, eps0: f64 },
    #[error("point is {0:.3e} away from the nearest julia pixel (more than one pixel)")]
    NotOnJulia(f64),
    #[error("elevation exceeded the iteration cap (radius below the numeric floor)")]
    IterationCap,
    #[error("too few usable samples for distortion fitting: {0}")]
    TooFewSamples(usize),
    #[error(transparent)]
    Map(#[from] RatMapError),
    #[error(transparent)]
    Orbit(#[from] OrbitError),
    #[error(transparent)]
    Raster(#[from] RasterError),
    #[error(transparent)]
    Sphere(#[from] SphereError),
}

/// Normalized dynamics with the blow-up scale eps0 and supporting data.
pub struct ElevatorContext {
    /// The normalized map (a conjugated iterate of the input).
    pub map: RationalMap,
    /// Conjugation from input coordinates to normalized coordinates.
    pub conjugation: MoebiusMap,
    /// Iterate power applied before conjugation.
    pub iterate: u32,
    pub eps0: f64,
    /// Minimum observed blown-up diameter over the calibration run.
    pub delta0: f64,
    /// Finite postcritical points of the normalized map.
    pub post_finite: Vec<Complex64>,
    /// Finite points of post^c (cycles of periodic critical points).
    pub postc_finite: Vec<Complex64>,
    /// Julia pixel centers of the normalized map.
    pub julia: Vec<Complex64>,
    pub pixel_size: f64,
    /// N(f) for the normalized map.
    pub degree_bound: u64,
    pub report: OrbitReport,
    julia_index: PlanarGrid,
}

impl ElevatorContext {
    pub fn julia_diameter(&self) -> f64 {
        julia_diameter(&self.julia)
    }
}

fn julia_diameter(julia: &[Complex64]) -> f64 {
    // subsampled max-pairwise Euclidean diameter
    let step = (julia.len() / 2048).max(1);
    let pts: Vec<Complex64> = julia.iter().step_by(step).copied().collect();
    let mut best = 0.0f64;
    for i in 0..pts.len() {
        for j in (i + 1)..pts.len() {
            best = best.max((pts[i] - pts[j]).norm());
        }
    }
    best
}

/// Conjugates f so that an attracting cycle point sits at infinity, replaces
/// f by the cycle-period iterate, and rescales until the Julia set fits in
/// the 0.45-disk. Verifies both normalization conditions by sampling, then
/// selects eps0 by bisection and calibrates delta0.
pub fn normalize(f: &RationalMap, resolution: usize) -> Result<ElevatorContext, ElevatorError> {
    if f.degree() < 2 {
        return Err(ElevatorError::Map(RatMapError::DegreeTooLow(f.degree(), 2)));
    }
    let base_report = postcritical_report(f, DEFAULT_ORBIT_BUDGET)?;
    let cycle = base_report
        .attracting_cycles
        .first()
        .ok_or(ElevatorError::NoAttractingCycle)?;
    // prefer a cycle point already at infinity
    let anchor = cycle
        .points
        .iter()
        .find(|p| p.is_infinite())
        .copied()
        .unwrap_or(cycle.points[0]);
    let m1 = match anchor {
        SpherePoint::Infinity => MoebiusMap::identity(),
        SpherePoint::Finite(p) => MoebiusMap::new(
            Complex64::new(0.0, 0.0),
            Complex64::new(1.0, 0.0),
            Complex64::new(1.0, 0.0),
            -p,
            false,
        )?,
    };
    let g0 = f.iterate(cycle.period as usize)?.conjugate(&m1)?;
    let report0 = postcritical_report(&g0, DEFAULT_ORBIT_BUDGET)?;

    // find a window containing the whole julia raster
    let mut hw = 2.0f64;
    let mut extent = None;
    for _ in 0..4 {
        let grid = rasterize(&g0, &report0, RasterParams::square(512, hw))?;
        let px = grid.pixel_size();
        let e = grid
            .julia_points()
            .iter()
            .map(|z| z.norm())
            .fold(0.0f64, f64::max);
        if e < hw - 2.0 * px && grid.julia_pixel_count() > 0 {
            extent = Some(e + px);
            break;
        }
        hw *= 2.0;
    }
    let extent = extent.ok_or(ElevatorError::WindowExhausted)?;

    let mut scale = extent / 0.45;
    for attempt in 0..3 {
        let m2 = MoebiusMap::scaling(Complex64::new(1.0 / scale, 0.0))?;
        let conjugation = m2.compose(&m1);
        let map = g0.conjugate(&m2)?;
        let report = postcritical_report(&map, DEFAULT_ORBIT_BUDGET)?;
        let grid = rasterize(&map, &report, RasterParams::square(resolution, 1.0))?;
        let julia = grid.julia_points();
        if julia.is_empty() {
            scale *= 1.5;
            continue;
        }
        let px = grid.pixel_size();
        // J(f) inside the half disk, with one pixel of slack
        let max_abs = julia.iter().map(|z| z.norm()).fold(0.0f64, f64::max);
        if max_abs > 0.5 - px {
            scale *= 1.5;
            continue;
        }
        // f^{-1}(D) inside D, sampled on |z| = 1
        let boundary_ok = (0..1000).all(|k| {
            let t = 2.0 * std::f64::consts::PI * k as f64 / 1000.0;
            let z = Complex64::from_polar(1.0, t);
            match map.eval(SpherePoint::Finite(z)) {
                SpherePoint::Infinity => true,
                SpherePoint::Finite(v) => v.norm() >= 1.0,
            }
        });
        // infinity fixed and attracting for the iterate
        let (v_inf, d_inf) = map.eval_with_deriv(SpherePoint::Infinity);
        let inf_ok = v_inf.is_infinite() && d_inf.norm() < 1.0;
        if !(boundary_ok && inf_ok) {
            if attempt == 2 {
                return Err(ElevatorError::AddinvViolation(attempt + 1));
            }
            scale *= 1.5;
            continue;
        }

        let post_finite: Vec<Complex64> = report
            .postcritical
            .clone()
            .unwrap_or_default()
            .iter()
            .filter_map(|p| p.as_complex())
            .collect();
        let postc_finite: Vec<Complex64> = report
            .postcritical_cyclic
            .iter()
            .filter_map(|p| p.as_complex())
            .collect();
        let eps0 = select_eps0(&julia, &post_finite, &postc_finite, px);
        let degree_bound = report.degree_bound;
        let julia_index = PlanarGrid::build(&julia, (4.0 * px).max(eps0 / 8.0));
        let mut ctx = ElevatorContext {
            map,
            conjugation,
            iterate: cycle.period,
            eps0,
            delta0: 0.0,
            post_finite,
            postc_finite,
            julia,
            pixel_size: px,
            degree_bound,
            report,
            julia_index,
        };
        calibrate_delta0(&mut ctx)?;
        return Ok(ctx);
    }
    Err(ElevatorError::AddinvViolation(3))
}

/// Largest eps passing the context invariants (bisection), halved once for
/// margin: diam(J) > 2 eps, and every disk of radius 8 eps centered on a
/// julia pixel lies in the unit disk, avoids post^c, and meets at most one
/// postcritical point.
fn select_eps0(julia: &[Complex64], post: &[Complex64], postc: &[Complex64], px: f64) -> f64 {
    let diam = julia_diameter(julia);
    let ok = |eps: f64| -> bool {
        if 2.0 * eps >= diam {
            return false;
        }
        let r8 = 8.0 * eps;
        julia.iter().all(|q| {
            if q.norm() + r8 > 1.0 {
                return false;
            }
            if postc.iter().any(|p| (p - q).norm() <= r8) {
                return false;
            }
            post.iter().filter(|p| (*p - q).norm() <= r8).count() <= 1
        })
    };
    let mut lo = px / 16.0;
    let mut hi = diam / 4.0;
    if !ok(lo) {
        return lo / 2.0;
    }
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if ok(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo / 2.0
}

fn calibrate_delta0(ctx: &mut ElevatorContext) -> Result<(), ElevatorError> {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let r_lo = ctx.eps0 * 0.02;
    let r_hi = ctx.eps0 * 0.8;
    let plan: Vec<(Complex64, f64)> = (0..256)
        .map(|_| {
            let p = ctx.julia[rng.gen_range(0..ctx.julia.len())];
            let t: f64 = rng.gen();
            let r = (r_lo.ln() + t * (r_hi.ln() - r_lo.ln())).exp();
            (p, r)
        })
        .collect();
    let diams: Vec<f64> = plan
        .par_iter()
        .filter_map(|&(p, r)| elevate_inner(ctx, p, r).ok().map(|res| res.image_diameter))
        .collect();
    if diams.is_empty() {
        return Err(ElevatorError::TooFewSamples(0));
    }
    // the sampled minimum is an estimate, not a bound; the freeze halves it
    // so later elevations stay above the frozen value
    ctx.delta0 = 0.5 * diams.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(())
}

/// One application of the conformal elevator to the disk B(p, r).
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ElevatorResult {
    pub input_center: Complex64,
    pub input_radius: f64,
    /// Maximal n with f^n(B) inside an eps0-disk centered at a julia point.
    pub n: u32,
    pub b_prime_center: Complex64,
    pub b_prime_radius: f64,
    /// True when B' was recentered on the unique nearby postcritical point.
    pub postcritical_adjusted: bool,
    /// Mapping degree along the pulled-back branch of the B' center.
    pub k: u64,
    /// Diameter of f^n(B) measured over the samples.
    pub image_diameter: f64,
    /// f^n images of the 256 boundary samples, in circle order.
    pub boundary_images: Vec<Complex64>,
    pub interior_images: Vec<Complex64>,
    pub center_image: Complex64,
    /// Property (i): f^n(B) inside half of B' and inside the unit disk.
    pub half_containment: bool,
}

/// Applies the elevator to B(p, r): finds the maximal n with f^n(B) inside
/// some eps0-disk centered at a julia point, then builds B' by the two-case
/// postcritical rule and computes the branch degree k.
pub fn elevate(ctx: &ElevatorContext, p: Complex64, r: f64) -> Result<ElevatorResult, ElevatorError> {
    let (_, julia_dist) = ctx.julia_index.nearest(p);
    if julia_dist > 1.5 * ctx.pixel_size {
        return Err(ElevatorError::NotOnJulia(julia_dist));
    }
    elevate_inner(ctx, p, r)
}

fn elevate_inner(
    ctx: &ElevatorContext,
    p: Complex64,
    r: f64,
) -> Result<ElevatorResult, ElevatorError> {
    if !(r > 0.0 && r < ctx.eps0) {
        return Err(ElevatorError::BadRadius { r, eps0: ctx.eps0 });
    }
    // deterministic sample pattern: boundary ring, golden-angle interior, center
    let mut cloud: Vec<Complex64> = Vec::with_capacity(BOUNDARY_SAMPLES + INTERIOR_SAMPLES + 1);
    for k in 0..BOUNDARY_SAMPLES {
        let t = 2.0 * std::f64::consts::PI * k as f64 / BOUNDARY_SAMPLES as f64;
        cloud.push(p + Complex64::from_polar(r, t));
    }
    const GOLDEN: f64 = 2.399963229728653;
    for k in 0..INTERIOR_SAMPLES {
        let rho = r * (((k as f64) + 0.5) / INTERIOR_SAMPLES as f64).sqrt();
        cloud.push(p + Complex64::from_polar(rho, GOLDEN * k as f64));
    }
    cloud.push(p);

    let fits = |pts: &[Complex64]| -> Option<Complex64> {
        let centroid = pts.iter().sum::<Complex64>() / pts.len() as f64;
        let (qi, _) = ctx.julia_index.nearest(centroid);
        let q = ctx.julia[qi];
        let max_d = pts.iter().map(|x| (x - q).norm()).fold(0.0f64, f64::max);
        (max_d <= ctx.eps0).then_some(q)
    };
    let diam = |pts: &[Complex64]| -> f64 {
        let mut best = 0.0f64;
        for i in 0..pts.len() {
            for j in (i + 1)..pts.len() {
                best = best.max((pts[i] - pts[j]).norm());
            }
        }
        best
    };

    let mut last_fit: Option<(u32, Vec<Complex64>, Complex64, f64)> = None;
    let mut k_step: u32 = 0;
    loop {
        let d = diam(&cloud);
        if let Some(q) = fits(&cloud) {
            last_fit = Some((k_step, cloud.clone(), q, d));
        }
        if d > 2.0 * ctx.eps0 {
            break;
        }
        if k_step >= ELEVATE_CAP {
            return Err(ElevatorError::IterationCap);
        }
        for x in cloud.iter_mut() {
            match ctx.map.eval(SpherePoint::Finite(*x)) {
                SpherePoint::Finite(v) => *x = v,
                SpherePoint::Infinity => *x = Complex64::new(1e9, 0.0),
            }
        }
        k_step += 1;
    }
    let (n, images, q_tilde, image_diameter) = last_fit.ok_or(ElevatorError::IterationCap)?;

    // two-case rule for B'
    let nearby: Vec<Complex64> = ctx
        .post_finite
        .iter()
        .filter(|pp| (*pp - q_tilde).norm() <= 2.0 * ctx.eps0)
        .copied()
        .collect();
    debug_assert!(nearby.len() <= 1, "eps0 invariant violated");
    let (b_center, b_radius, adjusted) = match nearby.first() {
        None => (q_tilde, 2.0 * ctx.eps0, false),
        Some(q) => (*q, 8.0 * ctx.eps0, true),
    };

    // branch degree along the pullback of the B' center through p's orbit
    let mut orbit_p = Vec::with_capacity(n as usize + 1);
    let mut x = SpherePoint::Finite(p);
    for _ in 0..=n {
        orbit_p.push(x);
        x = ctx.map.eval(x);
    }
    let mut k: u64 = 1;
    let mut target = SpherePoint::Finite(b_center);
    for i in (0..n as usize).rev() {
        let pre = ctx.map.preimages(target)?;
        let reference = orbit_p[i];
        let chosen = pre
            .iter()
            .min_by(|a, b| {
                crate::sphere::chordal_distance(a.0, reference)
                    .partial_cmp(&crate::sphere::chordal_distance(b.0, reference))
                    .unwrap_or(std::cmp::Ordering::Equal)
            })
            .map(|(q, _)| *q)
            .unwrap_or(reference);
        k *= ctx.map.local_degree(chosen) as u64;
        target = chosen;
    }

    let half_containment = images
        .iter()
        .all(|x| (x - b_center).norm() <= 0.5 * b_radius && x.norm() <= 1.0);
    let boundary_images = images[..BOUNDARY_SAMPLES].to_vec();
    let interior_images = images[BOUNDARY_SAMPLES..BOUNDARY_SAMPLES + INTERIOR_SAMPLES].to_vec();
    let center_image = images[BOUNDARY_SAMPLES + INTERIOR_SAMPLES];
    Ok(ElevatorResult {
        input_center: p,
        input_radius: r,
        n,
        b_prime_center: b_center,
        b_prime_radius: b_radius,
        postcritical_adjusted: adjusted,
        k,
        image_diameter,
        boundary_images,
        interior_images,
        center_image,
        half_containment,
    })
}

/// Least-squares exponent fit for the distortion envelope: gamma is the
/// slope of log(ratio) on log(image diameter), C1 the envelope shift.
pub fn fit_gamma_c1(points: &[(f64, f64)]) -> (f64, f64, bool) {
    let n = points.len() as f64;
    let xs: Vec<f64> = points.iter().map(|(d, _)| d.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|(_, r)| r.ln()).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let degenerate = sxx / n < 1e-4;
    let gamma = if degenerate { 1.0 } else { sxy / sxx };
    let c1 = points
        .iter()
        .map(|(d, r)| r / d.powf(gamma))
        .fold(0.0f64, f64::max);
    (gamma, c1, degenerate)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DistortionStats {
    pub gamma: f64,
    pub c1: f64,
    pub r1: f64,
    pub c2: f64,
    pub c3: Option<f64>,
    /// Max |log ratio - (a + gamma log d)| about the least-squares line.
    pub fit_residual: f64,
    pub degenerate_fit: bool,
    pub samples_used: usize,
    pub seed: u64,
}

/// Empirical distortion constants over sampled disks B and connected subsets
/// A of B (sub-disks and arcs): the (C1, gamma) envelope, the inscribed
/// radius r1 of f^n(half B), the rescaled Lipschitz constant C2, and the
/// collision constant C3 (None when no image collisions occur).
pub fn distortion_stats(
    ctx: &ElevatorContext,
    n_samples: usize,
    seed: u64,
) -> Result<DistortionStats, ElevatorError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let r_lo = ctx.eps0 * 0.02;
    let r_hi = ctx.eps0 * 0.8;
    let plan: Vec<(Complex64, f64, u64)> = (0..n_samples)
        .map(|_| {
            let p = ctx.julia[rng.gen_range(0..ctx.julia.len())];
            let t: f64 = rng.gen();
            let r = (r_lo.ln() + t * (r_hi.ln() - r_lo.ln())).exp();
            (p, r, rng.gen())
        })
        .collect();

    struct SampleOut {
        points: Vec<(f64, f64)>,
        r1: f64,
        c2: f64,
        c3: Option<f64>,
    }
    let outs: Vec<Option<SampleOut>> = plan
        .par_iter()
        .map(|&(p, r, sub_seed)| {
            let res = elevate_inner(ctx, p, r).ok()?;
            let mut sub_rng = ChaCha8Rng::seed_from_u64(sub_seed);
            let diam_b = 2.0 * r;
            let mut points = Vec::new();
            // sub-disks and arcs as connected subsets A of B
            for kind in 0..6 {
                let pts: Vec<Complex64> = if kind < 4 {
                    let off = Complex64::from_polar(0.5 * r * sub_rng.gen::<f64>(), sub_rng.gen::<f64>() * 6.2831853);
                    let ra = r * (0.1 + 0.3 * sub_rng.gen::<f64>());
                    (0..48)
                        .map(|j| {
                            let t = 2.0 * std::f64::consts::PI * j as f64 / 48.0;
                            p + off + Complex64::from_polar(ra, t)
                        })
                        .collect()
                } else {
                    let rho = r * (0.3 + 0.6 * sub_rng.gen::<f64>());
                    let t0 = sub_rng.gen::<f64>() * 6.2831853;
                    let span = 0.7853982 + sub_rng.gen::<f64>() * 2.3561945;
                    (0..48)
                        .map(|j| {
                            let t = t0 + span * j as f64 / 47.0;
                            p + Complex64::from_polar(rho, t)
                        })
                        .collect()
                };
                let diam_a = {
                    let mut best = 0.0f64;
                    for i in 0..pts.len() {
                        for j in (i + 1)..pts.len() {
                            best = best.max((pts[i] - pts[j]).norm());
                        }
                    }
                    best
                };
                let mut imgs = pts;
                for _ in 0..res.n {
                    for x in imgs.iter_mut() {
                        match ctx.map.eval(SpherePoint::Finite(*x)) {
                            SpherePoint::Finite(v) => *x = v,
                            SpherePoint::Infinity => *x = Complex64::new(1e9, 0.0),
                        }
                    }
                }
                let mut d_img = 0.0f64;
                for i in 0..imgs.len() {
                    for j in (i + 1)..imgs.len() {
                        d_img = d_img.max((imgs[i] - imgs[j]).norm());
                    }
                }
                if d_img > 0.0 && diam_a > 0.0 {
                    points.push((d_img, diam_a / diam_b));
                }
            }
            // (b): inscribed radius of f^n(half B) around f^n(p)
            let mut half_boundary: Vec<Complex64> = (0..64)
                .map(|j| {
                    let t = 2.0 * std::f64::consts::PI * j as f64 / 64.0;
                    p + Complex64::from_polar(0.5 * r, t)
                })
                .collect();
            for _ in 0..res.n {
                for x in half_boundary.iter_mut() {
                    match ctx.map.eval(SpherePoint::Finite(*x)) {
                        SpherePoint::Finite(v) => *x = v,
                        SpherePoint::Infinity => *x = Complex64::new(1e9, 0.0),
                    }
                }
            }
            let r1 = half_boundary
                .iter()
                .map(|x| (x - res.center_image).norm())
                .fold(f64::INFINITY, f64::min);
            // (c) and (d) over sample pairs of the elevation cloud
            let mut src: Vec<Complex64> = (0..BOUNDARY_SAMPLES)
                .step_by(4)
                .map(|j| {
                    let t = 2.0 * std::f64::consts::PI * j as f64 / BOUNDARY_SAMPLES as f64;
                    p + Complex64::from_polar(r, t)
                })
                .collect();
            src.push(p);
            let imgs: Vec<Complex64> = res
                .boundary_images
                .iter()
                .step_by(4)
                .copied()
                .chain(std::iter::once(res.center_image))
                .collect();
            let mut c2 = 0.0f64;
            let mut c3: Option<f64> = None;
            let collision_tol = ctx.pixel_size;
            for i in 0..src.len() {
                for j in (i + 1)..src.len() {
                    let ds = (src[i] - src[j]).norm();
                    if ds <= 0.0 {
                        continue;
                    }
                    let di = (imgs[i] - imgs[j]).norm();
                    c2 = c2.max(di * diam_b / ds);
                    if di <= collision_tol && ds >= 1e-3 * r && res.postcritical_adjusted {
                        let v = (imgs[i] - res.b_prime_center).norm() * diam_b / ds;
                        c3 = Some(c3.map_or(v, |cur: f64| cur.max(v)));
                    }
                }
            }
            Some(SampleOut { points, r1, c2, c3 })
        })
        .collect();

    let mut points = Vec::new();
    let mut r1 = f64::INFINITY;
    let mut c2 = 0.0f64;
    let mut c3: Option<f64> = None;
    let mut used = 0usize;
    for out in outs.into_iter().flatten() {
        points.extend(out.points);
        r1 = r1.min(out.r1);
        c2 = c2.max(out.c2);
        if let Some(v) = out.c3 {
            c3 = Some(c3.map_or(v, |cur: f64| cur.max(v)));
        }
        used += 1;
    }
    if used < (n_samples / 4).max(1) || points.len() < 8 {
        return Err(ElevatorError::TooFewSamples(used));
    }
    let (gamma, c1, degenerate_fit) = fit_gamma_c1(&points);
    // residual about the least-squares line
    let n = points.len() as f64;
    let mx = points.iter().map(|(d, _)| d.ln()).sum::<f64>() / n;
    let my = points.iter().map(|(_, r)| r.ln()).sum::<f64>() / n;
    let a = my - gamma * mx;
    let fit_residual = points
        .iter()
        .map(|(d, r)| (r.ln() - (a + gamma * d.ln())).abs())
        .fold(0.0f64, f64::max);
    Ok(DistortionStats {
        gamma,
        c1,
        r1,
        c2,
        c3,
        fit_residual,
        degenerate_fit,
        samples_used: used,
        seed,
    })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct NestedConsistency {
    pub radii: [f64; 3],
    pub ns: [u32; 3],
    pub n_monotone: bool,
    /// The n_shallow-step images of the deeper disk land inside the
    /// shallower blown-up region (winding or 2-pixel proximity test).
    pub landing_ok: bool,
    pub max_violation: f64,
}

/// Branch-consistency check for nested elevations at the same center with
/// radii r > r/2 > r/4.
pub fn nested_consistency(
    ctx: &ElevatorContext,
    p: Complex64,
    r: f64,
    tol_px: f64,
) -> Result<NestedConsistency, ElevatorError> {
    let radii = [r, r / 2.0, r / 4.0];
    let results: Vec<ElevatorResult> = radii
        .iter()
        .map(|&ri| elevate(ctx, p, ri))
        .collect::<Result<_, _>>()?;
    let ns = [results[0].n, results[1].n, results[2].n];
    let n_monotone = ns[1] >= ns[0] && ns[2] >= ns[1];
    let tol = tol_px * ctx.pixel_size;
    let mut landing_ok = true;
    let mut max_violation = 0.0f64;
    for pair in 0..2 {
        let shallow = &results[pair];
        let deep_r = radii[pair + 1];
        // the shallower blown-up region as a closed polygon
        let polygon = crate::raster::PeripheralCurve::from_vertices(
            shallow.boundary_images.clone(),
            usize::MAX,
        );
        for j in 0..64 {
            let t = 2.0 * std::f64::consts::PI * j as f64 / 64.0;
            let mut x = p + Complex64::from_polar(deep_r, t);
            for _ in 0..shallow.n {
                match ctx.map.eval(SpherePoint::Finite(x)) {
                    SpherePoint::Finite(v) => x = v,
                    SpherePoint::Infinity => x = Complex64::new(1e9, 0.0),
                }
            }
            if polygon.winding_number(x) == 0 {
                let d = crate::geometry::point_to_curve_distance(x, &polygon);
                if d > tol {
                    landing_ok = false;
                    max_violation = max_violation.max(d);
                }
            }
        }
    }
    Ok(NestedConsistency {
        radii,
        ns,
        n_monotone,
        landing_ok,
        max_violation,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn example_ctx() -> &'static ElevatorContext {
        static CTX: std::sync::OnceLock<ElevatorContext> = std::sync::OnceLock::new();
        CTX.get_or_init(|| {
            normalize(&RationalMap::carpet_example(), 1024).expect("normalize example map")
        })
    }

    #[test]
    fn normalize_example_map() {
        let ctx = example_ctx();
        // infinity stays superattracting and fixed for the normalized map
        let (v, d) = ctx.map.eval_with_deriv(SpherePoint::Infinity);
        assert!(v.is_infinite());
        assert!(d.norm() < 1e-9);
        // julia inside the half disk
        assert!(ctx.julia.iter().all(|z| z.norm() < 0.5));
        assert!(ctx.eps0 > 0.0 && 2.0 * ctx.eps0 < ctx.julia_diameter());
        assert!(ctx.delta0 > 0.0);
        assert_eq!(ctx.degree_bound, 64);
        // boundary invariance resampled independently
        for k in 0..100 {
            let t = 2.0 * std::f64::consts::PI * (k as f64 + 0.31) / 100.0;
            match ctx.map.eval(SpherePoint::Finite(Complex64::from_polar(1.0, t))) {
                SpherePoint::Finite(v) => assert!(v.norm() >= 1.0),
                SpherePoint::Infinity => {}
            }
        }
    }

    #[test]
    fn normalize_power_map_sanity() {
        // z^2 is not a carpet but normalize has no carpet precondition
        let ctx = normalize(&RationalMap::power_map(2), 512).unwrap();
        assert!(ctx.julia.iter().all(|z| z.norm() < 0.5));
        assert!(ctx.eps0 > 0.0);
    }

    #[test]
    fn degree_one_rejected() {
        let m = RationalMap::new(
            crate::poly::Polynomial::new(vec![Complex64::new(0.0, 0.0), Complex64::new(2.0, 0.0)]),
            crate::poly::Polynomial::one(),
        )
        .unwrap();
        assert!(normalize(&m, 256).is_err());
    }

    #[test]
    fn elevate_maximality_and_monotonicity() {
        let ctx = example_ctx();
        let p = ctx.julia[ctx.julia.len() / 3];
        // r just below eps0 elevates trivially
        let res = elevate(&ctx, p, ctx.eps0 * 0.98).unwrap();
        assert_eq!(res.n, 0);
        // halving the radius cannot decrease n
        let r = ctx.eps0 * 0.5;
        let n1 = elevate(&ctx, p, r).unwrap().n;
        let n2 = elevate(&ctx, p, r / 2.0).unwrap().n;
        assert!(n2 >= n1);
        // radius at or above eps0 is rejected
        assert!(matches!(
            elevate(&ctx, p, ctx.eps0),
            Err(ElevatorError::BadRadius { .. })
        ));
        // points far from the julia set are rejected
        assert!(matches!(
            elevate(&ctx, Complex64::new(0.9, 0.9), r),
            Err(ElevatorError::NotOnJulia(_))
        ));
    }

    #[test]
    fn elevate_invariants_on_samples() {
        let ctx = example_ctx();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut checked = 0;
        for _ in 0..20 {
            let p = ctx.julia[rng.gen_range(0..ctx.julia.len())];
            let t: f64 = rng.gen();
            let r = (ctx.eps0 * 0.02).powf(1.0 - t) * (ctx.eps0 * 0.8).powf(t);
            if let Ok(res) = elevate(&ctx, p, r) {
                assert!(res.half_containment, "property (i) failed");
                assert!(res.k <= ctx.degree_bound, "k = {} > N", res.k);
                assert!(
                    res.image_diameter >= ctx.delta0,
                    "property (iv): {} < {}",
                    res.image_diameter,
                    ctx.delta0
                );
                assert!(res.image_diameter <= 16.0 * ctx.eps0);
                checked += 1;
            }
        }
        assert!(checked >= 15, "only {checked} elevations succeeded");
    }

    #[test]
    fn elevation_deterministic() {
        let ctx = example_ctx();
        let p = ctx.julia[7];
        let r = ctx.eps0 * 0.3;
        let a = elevate(&ctx, p, r).unwrap();
        let b = elevate(&ctx, p, r).unwrap();
        assert_eq!(a.n, b.n);
        assert_eq!(a.k, b.k);
        assert_eq!(a.image_diameter.to_bits(), b.image_diameter.to_bits());
    }

    #[test]
    fn affine_harness_gamma_one() {
        // synthetic z -> 2z data: choose r = eps/2^n exactly so the blow-up
        // lands at a fixed size; the fitted exponent must be 1 and C1 * C2
        // must equal 1 to within 1%
        let eps = 0.01;
        let mut points = Vec::new();
        let mut c2 = 0.0f64;
        for n in 1..=10u32 {
            let r = eps / 2f64.powi(n as i32);
            let diam_b = 2.0 * r;
            for frac in [0.1, 0.25, 0.5, 0.75] {
                let diam_a = frac * diam_b;
                let d_img = 2f64.powi(n as i32) * diam_a;
                points.push((d_img, diam_a / diam_b));
            }
            // |f^n u - f^n v| * diam B / |u - v| = 2^n * diam B
            c2 = c2.max(2f64.powi(n as i32) * diam_b);
        }
        let (gamma, c1, degenerate) = fit_gamma_c1(&points);
        assert!(!degenerate);
        assert!((gamma - 1.0).abs() < 1e-12, "gamma = {gamma}");
        assert!((c1 * c2 - 1.0).abs() < 0.01, "C1*C2 = {}", c1 * c2);
    }

    #[test]
    fn degenerate_fit_flagged() {
        // all samples at one image size
        let points: Vec<(f64, f64)> = (0..20).map(|i| (0.5, 0.1 + 0.01 * i as f64)).collect();
        let (_, _, degenerate) = fit_gamma_c1(&points);
        assert!(degenerate);
    }

    #[test]
    fn distortion_stats_example() {
        let ctx = example_ctx();
        let stats = distortion_stats(&ctx, 40, 1).unwrap();
        assert!(stats.gamma >= 1.0 / ctx.degree_bound as f64);
        assert!(stats.c1.is_finite() && stats.c1 > 0.0);
        assert!(stats.c2.is_finite() && stats.c2 > 0.0);
        assert!(stats.r1.is_finite() && stats.r1 > 0.0);
        assert!(!stats.degenerate_fit);
    }

    #[test]
    fn nested_branches_consistent() {
        let ctx = example_ctx();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut done = 0;
        for _ in 0..10 {
            let p = ctx.julia[rng.gen_range(0..ctx.julia.len())];
            if let Ok(rep) = nested_consistency(&ctx, p, ctx.eps0 * 0.6, 2.0) {
                assert!(rep.n_monotone, "n not monotone: {:?}", rep.ns);
                assert!(rep.landing_ok, "violation {}", rep.max_violation);
                done += 1;
            }
        }
        assert!(done >= 5);
    }
}
