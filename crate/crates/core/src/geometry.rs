//! Numerical estimators for the carpet geometry: quasicircle constants,
//! uniform relative separation, locations-and-scales, porosity, and
//! quasisymmetric distortion profiles. All metric notions are chordal.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::raster::{PeripheralCurve, RasterGrid};
use crate::spatial::distance_transform;
use crate::sphere::{chordal_distance, SpherePoint};

#[derive(Debug, Error)]
pub enum GeometryError {
    #[error("curve needs at least 8 vertices, got {0}")]
    TooFewVertices(usize),
    #[error("need at least two curves")]
    NeedTwoCurves,
    #[error("no admissible samples")]
    NoAdmissibleSamples,
    #[error("candidate-map graph needs at least 100 sample points, got {0}")]
    TooFewGraphSamples(usize),
}

fn dist3(a: [f64; 3], b: [f64; 3]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
}

/// Quasicircle constant of a closed polyline: the max over vertex pairs
/// (u, v) of min(diam a, diam b) / sigma(u, v), where a and b are the two
/// subarcs with endpoints u, v. Exact over the vertex set, O(V^2).
pub fn quasicircle_constant(curve: &PeripheralCurve) -> Result<f64, GeometryError> {
    let mut pts: Vec<Complex64> = curve.vertices.clone();
    pts.dedup_by(|a, b| (*a - *b).norm() == 0.0);
    if pts.len() >= 2 && (pts[0] - *pts.last().unwrap()).norm() == 0.0 {
        pts.pop();
    }
    let v = pts.len();
    if v < 8 {
        return Err(GeometryError::TooFewVertices(v));
    }
    let p3: Vec<[f64; 3]> = pts.iter().map(|z| SpherePoint::Finite(*z).to_r3()).collect();

    // d[a * v + s] = diameter of the forward arc from vertex a spanning s
    // edges (s + 1 vertices). Filled per absolute endpoint b = a + s over the
    // doubled index range; g accumulates max_k dist(p[k], p[b]) as a scans
    // down, so each (a, s) costs O(1).
    let mut d = vec![0.0f64; v * v];
    for b in 1..(2 * v - 1) {
        let a_lo = b.saturating_sub(v - 1);
        let pb = p3[b % v];
        let mut g = 0.0f64;
        for a in (a_lo..b).rev() {
            g = g.max(dist3(p3[a % v], pb));
            if a < v {
                let s = b - a;
                let prev = d[a * v + (s - 1)];
                d[a * v + s] = if prev > g { prev } else { g };
            }
        }
    }
    let mut best = 1.0f64;
    for i in 0..v {
        for s in 1..v {
            let j = (i + s) % v;
            let sep = dist3(p3[i], p3[j]);
            if sep <= 0.0 {
                continue;
            }
            let arc = d[i * v + s].min(d[j * v + (v - s)]);
            let ratio = arc / sep;
            if ratio > best {
                best = ratio;
            }
        }
    }
    Ok(best)
}

/// Chordal distance from a chart point to a polyline (vertex-to-segment).
pub fn point_to_curve_distance(p: Complex64, curve: &PeripheralCurve) -> f64 {
    let sp = SpherePoint::Finite(p);
    let v = &curve.vertices;
    let mut best = f64::INFINITY;
    for i in 0..v.len() {
        let a = v[i];
        let b = v[(i + 1) % v.len()];
        let ab = b - a;
        let len2 = ab.norm_sqr();
        let t = if len2 > 0.0 {
            (((p - a).re * ab.re + (p - a).im * ab.im) / len2).clamp(0.0, 1.0)
        } else {
            0.0
        };
        let foot = a + ab * t;
        let d = chordal_distance(sp, SpherePoint::Finite(foot));
        if d < best {
            best = d;
        }
    }
    best
}

fn curves_min_distance(a: &PeripheralCurve, b: &PeripheralCurve) -> f64 {
    let mut best = f64::INFINITY;
    for p in &a.vertices {
        best = best.min(point_to_curve_distance(*p, b));
    }
    for p in &b.vertices {
        best = best.min(point_to_curve_distance(*p, a));
    }
    best
}

fn segments_cross(a1: Complex64, a2: Complex64, b1: Complex64, b2: Complex64) -> bool {
    let orient = |p: Complex64, q: Complex64, r: Complex64| -> f64 {
        (q.re - p.re) * (r.im - p.im) - (q.im - p.im) * (r.re - p.re)
    };
    let d1 = orient(b1, b2, a1);
    let d2 = orient(b1, b2, a2);
    let d3 = orient(a1, a2, b1);
    let d4 = orient(a1, a2, b2);
    ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0))
        && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0))
}

fn curves_intersect(a: &PeripheralCurve, b: &PeripheralCurve) -> bool {
    for i in 0..a.vertices.len() {
        let a1 = a.vertices[i];
        let a2 = a.vertices[(i + 1) % a.vertices.len()];
        for j in 0..b.vertices.len() {
            let b1 = b.vertices[j];
            let b2 = b.vertices[(j + 1) % b.vertices.len()];
            if segments_cross(a1, a2, b1, b2) {
                return true;
            }
        }
    }
    false
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SeparationReport {
    /// min over curve pairs of dist(J_k, J_l) / min(diam J_k, diam J_l);
    /// zero when some pair intersects.
    pub c: f64,
    /// Pair of curve indices achieving the minimum (or the intersecting pair).
    pub worst_pair: Option<(usize, usize)>,
}

/// Minimum relative separation over all unordered curve pairs.
pub fn relative_separation(curves: &[PeripheralCurve]) -> Result<SeparationReport, GeometryError> {
    if curves.len() < 2 {
        return Err(GeometryError::NeedTwoCurves);
    }
    let bounds: Vec<([f64; 3], f64)> = curves.iter().map(curve_bounding_sphere).collect();

    // cheap upper bound on the best ratio to prune against
    let mut threshold = f64::INFINITY;
    let mut pairs: Vec<(usize, usize, f64)> = Vec::new();
    for i in 0..curves.len() {
        for j in (i + 1)..curves.len() {
            let min_diam = curves[i].diameter.min(curves[j].diameter);
            if min_diam <= 0.0 {
                continue;
            }
            let upper = chordal_distance(
                SpherePoint::Finite(curves[i].vertices[0]),
                SpherePoint::Finite(curves[j].vertices[0]),
            ) / min_diam;
            threshold = threshold.min(upper);
            let lower =
                (dist3(bounds[i].0, bounds[j].0) - bounds[i].1 - bounds[j].1).max(0.0) / min_diam;
            pairs.push((i, j, lower));
        }
    }
    let candidates: Vec<(usize, usize)> = pairs
        .iter()
        .filter(|(_, _, lb)| *lb <= threshold)
        .map(|(i, j, _)| (*i, *j))
        .collect();
    let evaluated: Vec<(usize, usize, f64)> = candidates
        .par_iter()
        .map(|&(i, j)| {
            let ratio = if curves_intersect(&curves[i], &curves[j]) {
                0.0
            } else {
                curves_min_distance(&curves[i], &curves[j])
                    / curves[i].diameter.min(curves[j].diameter)
            };
            (i, j, ratio)
        })
        .collect();
    let mut best = (f64::INFINITY, None);
    for (i, j, ratio) in evaluated {
        if ratio < best.0 {
            best = (ratio, Some((i, j)));
        }
    }
    Ok(SeparationReport {
        c: best.0,
        worst_pair: best.1,
    })
}

fn curve_bounding_sphere(c: &PeripheralCurve) -> ([f64; 3], f64) {
    let p3: Vec<[f64; 3]> = c
        .vertices
        .iter()
        .map(|z| SpherePoint::Finite(*z).to_r3())
        .collect();
    let mut centroid = [0.0f64; 3];
    for p in &p3 {
        centroid[0] += p[0];
        centroid[1] += p[1];
        centroid[2] += p[2];
    }
    let n = p3.len() as f64;
    centroid = [centroid[0] / n, centroid[1] / n, centroid[2] / n];
    let radius = p3.iter().map(|p| dist3(*p, centroid)).fold(0.0f64, f64::max);
    (centroid, radius)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LocationsScales {
    /// Smallest C making >= 99% of samples satisfiable (infinite if more
    /// than 1% of samples see no curve at all).
    pub c: f64,
    pub pass_rate: f64,
    pub n_samples: usize,
    pub unsatisfiable: usize,
    pub seed: u64,
}

/// Locations-and-scales estimator: for random (p, r) with p a julia pixel
/// center and r log-uniform in [8 * pixel_size, 2], the per-sample constant
/// is min over curves meeting B(p, r) of max(r / diam, diam / r); C is the
/// 99th percentile over samples.
pub fn locations_and_scales(
    curves: &[PeripheralCurve],
    julia_points: &[Complex64],
    pixel_size: f64,
    n_samples: usize,
    seed: u64,
) -> Result<LocationsScales, GeometryError> {
    if curves.is_empty() || julia_points.is_empty() || n_samples == 0 {
        return Err(GeometryError::NoAdmissibleSamples);
    }
    let bounds: Vec<([f64; 3], f64)> = curves.iter().map(curve_bounding_sphere).collect();
    let r_lo = (8.0 * pixel_size).min(1.0);
    let r_hi = 2.0f64;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let samples: Vec<(Complex64, f64)> = (0..n_samples)
        .map(|_| {
            let p = julia_points[rng.gen_range(0..julia_points.len())];
            let t: f64 = rng.gen();
            let r = (r_lo.ln() + t * (r_hi.ln() - r_lo.ln())).exp();
            (p, r)
        })
        .collect();
    let cs: Vec<f64> = samples
        .par_iter()
        .map(|&(p, r)| {
            let p3 = SpherePoint::Finite(p).to_r3();
            let mut best = f64::INFINITY;
            for (ci, curve) in curves.iter().enumerate() {
                let lb = dist3(p3, bounds[ci].0) - bounds[ci].1;
                if lb > r {
                    continue;
                }
                let need = (r / curve.diameter).max(curve.diameter / r).max(1.0);
                if need >= best {
                    continue;
                }
                if point_to_curve_distance(p, curve) < r {
                    best = need;
                }
            }
            best
        })
        .collect();
    let unsatisfiable = cs.iter().filter(|c| !c.is_finite()).count();
    let mut sorted = cs.clone();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    let idx = ((0.99 * n_samples as f64).ceil() as usize).clamp(1, n_samples) - 1;
    let c = sorted[idx];
    let pass_rate = if c.is_finite() {
        cs.iter().filter(|v| **v <= c).count() as f64 / n_samples as f64
    } else {
        (n_samples - unsatisfiable) as f64 / n_samples as f64
    };
    Ok(LocationsScales {
        c,
        pass_rate,
        n_samples,
        unsatisfiable,
        seed,
    })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PorosityReport {
    /// 1st percentile of (largest empty-disk radius found) / r.
    pub c_por: f64,
    /// Fraction of samples whose best hole exceeds one pixel.
    pub pass_rate: f64,
    pub n_samples: usize,
    pub seed: u64,
}

/// Porosity estimator: for sampled chordal balls B(p, r) around julia
/// pixels, finds via the distance transform the largest julia-free disk
/// inside B(p, r). On a grid with no julia pixels the samples roam the whole
/// window and the estimate approaches 1.
pub fn porosity_constant(grid: &RasterGrid, n_samples: usize, seed: u64) -> PorosityReport {
    let n = grid.resolution();
    let px = grid.pixel_size();
    let dt = distance_transform(grid.julia_mask(), n, n);
    let julia: Vec<(usize, usize)> = {
        let mut v = Vec::new();
        for iy in 0..n {
            for ix in 0..n {
                if grid.is_julia(ix, iy) {
                    v.push((ix, iy));
                }
            }
        }
        v
    };
    let centers: Vec<(usize, usize)> = if julia.is_empty() {
        (0..n * n)
            .step_by((n * n / 1024).max(1))
            .map(|i| (i % n, i / n))
            .collect()
    } else {
        julia
    };
    let r_lo = (8.0 * px).min(1.0);
    let r_hi = 2.0f64;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let samples: Vec<((usize, usize), f64)> = (0..n_samples)
        .map(|_| {
            let p = centers[rng.gen_range(0..centers.len())];
            let t: f64 = rng.gen();
            let r = (r_lo.ln() + t * (r_hi.ln() - r_lo.ln())).exp();
            (p, r)
        })
        .collect();
    let max_abs = grid.params.center.norm() + grid.params.half_width * std::f64::consts::SQRT_2;
    let vals: Vec<(f64, bool)> = samples
        .par_iter()
        .map(|&((ix, iy), r)| {
            let p = grid.pixel_center(ix, iy);
            let sp = SpherePoint::Finite(p);
            // chart-radius superset of the chordal ball
            let rho = (r * (1.0 + max_abs * max_abs) / 2.0).min(2.0 * grid.params.half_width);
            let span = (rho / px).ceil() as i64 + 1;
            let stride = ((2 * span) as usize / 160).max(1);
            let mut best = 0.0f64;
            let mut qy = iy as i64 - span;
            while qy <= iy as i64 + span {
                let mut qx = ix as i64 - span;
                while qx <= ix as i64 + span {
                    if qx >= 0 && qy >= 0 && (qx as usize) < n && (qy as usize) < n {
                        let q = grid.pixel_center(qx as usize, qy as usize);
                        let spq = chordal_distance(sp, SpherePoint::Finite(q));
                        if spq < r {
                            let hole_chart = dt[qy as usize * n + qx as usize] * px;
                            let hole = hole_chart * 2.0 / (1.0 + q.norm_sqr());
                            let val = hole.min(r - spq);
                            if val > best {
                                best = val;
                            }
                        }
                    }
                    qx += stride as i64;
                }
                qy += stride as i64;
            }
            (best / r, best > px)
        })
        .collect();
    let mut sorted: Vec<f64> = vals.iter().map(|v| v.0).collect();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    let idx = ((0.01 * n_samples as f64).floor() as usize).min(n_samples.saturating_sub(1));
    PorosityReport {
        c_por: sorted[idx],
        pass_rate: vals.iter().filter(|v| v.1).count() as f64 / n_samples.max(1) as f64,
        n_samples,
        seed,
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DistortionBin {
    pub input_ratio: f64,
    pub output_p99: f64,
    pub count: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DistortionProfile {
    pub bins: Vec<DistortionBin>,
    pub triples_used: usize,
    pub seed: u64,
}

/// Empirical quasisymmetric distortion profile of a sampled map graph: for
/// random triples (u, v, w), records input ratio sigma(u,v)/sigma(u,w)
/// against output ratio; the profile is the 99th-percentile output per
/// log2 input-ratio bin. Degenerate triples (u = w or coincident images)
/// are skipped.
pub fn qs_distortion(
    pairs: &[(SpherePoint, SpherePoint)],
    n_triples: usize,
    seed: u64,
) -> Result<DistortionProfile, GeometryError> {
    if pairs.len() < 100 {
        return Err(GeometryError::TooFewGraphSamples(pairs.len()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    const LOG_LO: f64 = -8.0;
    const LOG_HI: f64 = 8.0;
    const WIDTH: f64 = 0.5;
    let n_bins = ((LOG_HI - LOG_LO) / WIDTH) as usize;
    let mut bins: Vec<Vec<f64>> = vec![Vec::new(); n_bins];
    let mut used = 0usize;
    for _ in 0..n_triples {
        let u = rng.gen_range(0..pairs.len());
        let v = rng.gen_range(0..pairs.len());
        let w = rng.gen_range(0..pairs.len());
        if u == w || u == v {
            continue;
        }
        let duv = chordal_distance(pairs[u].0, pairs[v].0);
        let duw = chordal_distance(pairs[u].0, pairs[w].0);
        if duw <= 0.0 || duv <= 0.0 {
            continue;
        }
        let ouv = chordal_distance(pairs[u].1, pairs[v].1);
        let ouw = chordal_distance(pairs[u].1, pairs[w].1);
        if ouw <= 0.0 {
            continue;
        }
        let input = duv / duw;
        let output = ouv / ouw;
        let b = ((input.log2() - LOG_LO) / WIDTH).floor();
        if b < 0.0 || b >= n_bins as f64 {
            continue;
        }
        bins[b as usize].push(output);
        used += 1;
    }
    let mut out = Vec::new();
    for (i, mut values) in bins.into_iter().enumerate() {
        if values.is_empty() {
            continue;
        }
        values.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
        let idx = ((0.99 * values.len() as f64).ceil() as usize).clamp(1, values.len()) - 1;
        out.push(DistortionBin {
            input_ratio: (LOG_LO + (i as f64 + 0.5) * WIDTH).exp2(),
            output_p99: values[idx],
            count: values.len(),
        });
    }
    Ok(DistortionProfile {
        bins: out,
        triples_used: used,
        seed,
    })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CarpetConsistency {
    pub resolution: usize,
    pub traced_curves: usize,
    pub all_simple: bool,
    pub pairwise_disjoint: bool,
    pub diameters_decay: bool,
    /// "carpet-consistent at resolution n": necessary numerical evidence
    /// only, not the topological statement.
    pub verdict: bool,
}

/// Necessary numerical evidence that a raster looks like a Sierpinski
/// carpet: many traced curves, simple and pairwise disjoint, with diameters
/// decaying down the size ranking.
pub fn carpet_consistency(curves: &[PeripheralCurve], resolution: usize) -> CarpetConsistency {
    let mut diams: Vec<f64> = curves.iter().map(|c| c.diameter).collect();
    diams.sort_by(|a, b| b.partial_cmp(a).unwrap_or(std::cmp::Ordering::Equal));
    let all_simple = curves.iter().all(|c| {
        c.len() >= 3 && {
            let mut seen = std::collections::HashSet::new();
            c.vertices
                .iter()
                .all(|v| seen.insert((v.re.to_bits(), v.im.to_bits())))
        }
    });
    let pairwise_disjoint = if curves.len() >= 2 {
        relative_separation(curves).map(|s| s.c > 0.0).unwrap_or(false)
    } else {
        false
    };
    let diameters_decay = diams.len() >= 10 && diams[9] <= 0.5 * diams[1];
    CarpetConsistency {
        resolution,
        traced_curves: curves.len(),
        all_simple,
        pairwise_disjoint,
        diameters_decay,
        verdict: curves.len() >= 10 && all_simple && pairwise_disjoint && diameters_decay,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn circle_curve(center: Complex64, radius: f64, n: usize) -> PeripheralCurve {
        let v: Vec<Complex64> = (0..n)
            .map(|k| {
                let t = 2.0 * std::f64::consts::PI * k as f64 / n as f64;
                center + Complex64::from_polar(radius, t)
            })
            .collect();
        PeripheralCurve::from_vertices(v, 0)
    }

    fn square_curve(half: f64, per_side: usize) -> PeripheralCurve {
        let corners = [
            Complex64::new(-half, -half),
            Complex64::new(half, -half),
            Complex64::new(half, half),
            Complex64::new(-half, half),
        ];
        let mut v = Vec::new();
        for s in 0..4 {
            let a = corners[s];
            let b = corners[(s + 1) % 4];
            for k in 0..per_side {
                let t = k as f64 / per_side as f64;
                v.push(a + (b - a) * t);
            }
        }
        PeripheralCurve::from_vertices(v, 0)
    }

    /// Brute-force oracle: walks both subarcs per pair and takes exact
    /// diameters, O(V^3). Independent of the table-based implementation.
    fn quasicircle_brute(curve: &PeripheralCurve) -> f64 {
        let pts: Vec<SpherePoint> = curve.sphere_points();
        let v = pts.len();
        let diam = |lo: usize, hi: usize| -> f64 {
            let len = (hi + v - lo) % v + 1;
            let mut best = 0.0f64;
            for x in 0..len {
                for y in (x + 1)..len {
                    let d = chordal_distance(pts[(lo + x) % v], pts[(lo + y) % v]);
                    if d > best {
                        best = d;
                    }
                }
            }
            best
        };
        let mut best = 1.0f64;
        for i in 0..v {
            for j in (i + 1)..v {
                let sep = chordal_distance(pts[i], pts[j]);
                if sep <= 0.0 {
                    continue;
                }
                let r = diam(i, j).min(diam(j, i)) / sep;
                if r > best {
                    best = r;
                }
            }
        }
        best
    }

    #[test]
    fn round_circle_l_near_one() {
        let c = circle_curve(Complex64::new(0.0, 0.0), 0.8, 64);
        let l = quasicircle_constant(&c).unwrap();
        assert!((1.0..=1.05).contains(&l), "L = {l}");
    }

    #[test]
    fn too_few_vertices_error() {
        let c = PeripheralCurve::from_vertices(
            vec![Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0)],
            0,
        );
        assert!(matches!(
            quasicircle_constant(&c),
            Err(GeometryError::TooFewVertices(_))
        ));
    }

    #[test]
    fn table_matches_brute_force() {
        for curve in [
            square_curve(0.5, 15),
            circle_curve(Complex64::new(0.3, -0.2), 0.6, 41),
            PeripheralCurve::from_vertices(
                (0..37)
                    .map(|k| {
                        let t = 2.0 * std::f64::consts::PI * k as f64 / 37.0;
                        Complex64::from_polar(0.5 + 0.2 * (3.0 * t).cos(), t)
                    })
                    .collect(),
                0,
            ),
        ] {
            let fast = quasicircle_constant(&curve).unwrap();
            let brute = quasicircle_brute(&curve);
            assert!(
                (fast - brute).abs() < 1e-12,
                "table {fast} vs brute {brute}"
            );
        }
    }

    #[test]
    fn square_quasicircle_regression() {
        // frozen from the brute-force oracle at a 1000-point discretization
        // of the square with corners (+-1/2, +-1/2)
        const FROZEN_SQUARE_L: f64 = 1.0523497807379918;
        let c = square_curve(0.5, 250);
        assert_eq!(c.len(), 1000);
        let l = quasicircle_constant(&c).unwrap();
        assert!(
            (l - FROZEN_SQUARE_L).abs() < 1e-9,
            "square L = {l:.16} vs frozen {FROZEN_SQUARE_L:.16}"
        );
    }

    #[test]
    fn quasicircle_invariances() {
        let c = square_curve(0.4, 20);
        let l = quasicircle_constant(&c).unwrap();
        // relabeling the starting vertex changes nothing (exact)
        let mut rotated = c.vertices.clone();
        rotated.rotate_left(13);
        let l2 = quasicircle_constant(&PeripheralCurve::from_vertices(rotated, 0)).unwrap();
        assert_eq!(l, l2);
        // chordal isometries: sphere rotation via a unitary Moebius map
        let m = crate::sphere::MoebiusMap::new(
            Complex64::new(0.8, 0.3),
            Complex64::new(0.2, -0.4),
            Complex64::new(-0.2, -0.4),
            Complex64::new(0.8, -0.3),
            false,
        )
        .unwrap();
        let moved: Vec<Complex64> = c
            .vertices
            .iter()
            .map(|z| m.apply(SpherePoint::Finite(*z)).as_complex().unwrap())
            .collect();
        let l3 = quasicircle_constant(&PeripheralCurve::from_vertices(moved, 0)).unwrap();
        assert!((l - l3).abs() < 1e-9, "isometry changed L: {l} -> {l3}");
    }

    #[test]
    fn separation_of_small_circles() {
        // two radius-s circles with centers 4s apart: in the small-scale
        // limit the chordal ratio approaches the Euclidean value 1.0
        let s = 0.01;
        let a = circle_curve(Complex64::new(-2.0 * s, 0.0), s, 64);
        let b = circle_curve(Complex64::new(2.0 * s, 0.0), s, 64);
        let rep = relative_separation(&[a, b]).unwrap();
        assert!((rep.c - 1.0).abs() < 2e-3, "c = {}", rep.c);
    }

    #[test]
    fn separation_tangent_circles_zero() {
        let outer = circle_curve(Complex64::new(0.0, 0.0), 0.2, 128);
        let inner = circle_curve(Complex64::new(0.1, 0.0), 0.1, 128);
        let rep = relative_separation(&[outer, inner]).unwrap();
        assert!(rep.c < 2e-3, "c = {}", rep.c);
        assert_eq!(rep.worst_pair, Some((0, 1)));
    }

    #[test]
    fn separation_monotone_decreasing() {
        let s = 0.01;
        let a = circle_curve(Complex64::new(-2.0 * s, 0.0), s, 32);
        let b = circle_curve(Complex64::new(2.0 * s, 0.0), s, 32);
        let c = circle_curve(Complex64::new(0.0, 3.0 * s), s, 32);
        let two = relative_separation(&[a.clone(), b.clone()]).unwrap().c;
        let three = relative_separation(&[a, b, c]).unwrap().c;
        assert!(three <= two + 1e-12);
    }

    #[test]
    fn locations_scales_negative_control() {
        // a single round circle is not a carpet: small r near the circle has
        // no curve of comparable diameter, so C blows up
        let circle = circle_curve(Complex64::new(0.0, 0.0), 0.5, 256);
        let julia: Vec<Complex64> = circle.vertices.clone();
        let report = locations_and_scales(&[circle], &julia, 1e-3, 2000, 7).unwrap();
        assert!(report.c > 20.0, "C = {}", report.c);
    }

    #[test]
    fn qs_distortion_identity_and_similarity() {
        // samples in a small disk where chordal distances are near-Euclidean
        let pts: Vec<SpherePoint> = (0..200)
            .map(|k| {
                let t = k as f64 * 0.7;
                SpherePoint::finite(0.04 * t.cos() * (k as f64 / 200.0), 0.04 * t.sin())
            })
            .collect();
        let identity: Vec<(SpherePoint, SpherePoint)> = pts.iter().map(|p| (*p, *p)).collect();
        let prof = qs_distortion(&identity, 20_000, 3).unwrap();
        for bin in &prof.bins {
            let rel = (bin.output_p99 - bin.input_ratio).abs() / bin.input_ratio;
            // identity ratios land inside their own bin
            assert!(
                rel <= 0.5,
                "identity bin at {} -> {}",
                bin.input_ratio,
                bin.output_p99
            );
        }
        // z -> 2z preserves ratios in the small-scale limit
        let doubled: Vec<(SpherePoint, SpherePoint)> = pts
            .iter()
            .map(|p| {
                let z = p.as_complex().unwrap();
                (*p, SpherePoint::Finite(z * 2.0))
            })
            .collect();
        let prof2 = qs_distortion(&doubled, 20_000, 3).unwrap();
        for (a, b) in prof.bins.iter().zip(prof2.bins.iter()) {
            assert!(
                (a.output_p99 - b.output_p99).abs() / a.output_p99 < 0.01,
                "similarity distorted a bin: {} vs {}",
                a.output_p99,
                b.output_p99
            );
        }
    }

    #[test]
    fn qs_distortion_squaring_above_diagonal() {
        // z -> z^2 on an annulus distorts large ratios upward
        let pts: Vec<SpherePoint> = (0..300)
            .map(|k| {
                let t = k as f64;
                let r = 0.5 + 0.4 * ((t * 0.61).sin() * 0.5 + 0.5);
                SpherePoint::Finite(Complex64::from_polar(r, t * 2.39996))
            })
            .collect();
        let graph: Vec<(SpherePoint, SpherePoint)> = pts
            .iter()
            .map(|p| {
                let z = p.as_complex().unwrap();
                (*p, SpherePoint::Finite(z * z))
            })
            .collect();
        let prof = qs_distortion(&graph, 40_000, 11).unwrap();
        let high: Vec<&DistortionBin> = prof
            .bins
            .iter()
            .filter(|b| b.input_ratio >= 4.0 && b.count >= 50)
            .collect();
        assert!(!high.is_empty());
        for bin in high {
            assert!(
                bin.output_p99 > bin.input_ratio,
                "expected above-diagonal at {}: {}",
                bin.input_ratio,
                bin.output_p99
            );
        }
        assert!(qs_distortion(&graph[..50], 100, 1).is_err());
    }

    #[test]
    fn determinism_given_seed() {
        let circle = circle_curve(Complex64::new(0.0, 0.0), 0.5, 128);
        let julia: Vec<Complex64> = circle.vertices.clone();
        let a = locations_and_scales(&[circle.clone()], &julia, 1e-3, 500, 42).unwrap();
        let b = locations_and_scales(&[circle], &julia, 1e-3, 500, 42).unwrap();
        assert_eq!(a.c.to_bits(), b.c.to_bits());
        assert_eq!(a.pass_rate.to_bits(), b.pass_rate.to_bits());
    }
}
