//! Basin rasterization of the sphere, Julia boundary pixels, Fatou component
//! labeling, and peripheral-curve tracing.
//!
//! The Julia set is represented as boundary pixels of basin labels (plus
//! pixels whose orbits stay unresolved within the budget), matching its
//! definition as the complement of the Fatou components.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::orbits::{CycleInfo, OrbitReport};
use crate::ratmap::RationalMap;
use crate::sphere::{chordal_distance, SpherePoint};

/// Capture radius used when only a single attracting cycle exists (the
/// pairwise-distance rule has nothing to halve).
pub const SINGLE_CYCLE_CAPTURE_RADIUS: f64 = 1e-2;
/// Floor for the capture radius derived from cycle separations.
pub const CAPTURE_RADIUS_FLOOR: f64 = 1e-3;
/// Cap for the derived capture radius: a capture ball must stay well inside
/// its basin, and widely separated superattracting cycles (e.g. 0 and
/// infinity) would otherwise produce balls that swallow the Julia set.
pub const CAPTURE_RADIUS_CAP: f64 = 5e-2;
/// Vertex cap for traced curves; longer contours are uniformly resampled.
pub const CURVE_VERTEX_CAP: usize = 4096;

#[derive(Debug, Error)]
pub enum RasterError {
    #[error("map not subhyperbolic at tolerance: no attracting cycles found")]
    NotSubhyperbolic,
    #[error("component {0} has fewer than 4 pixels (sub-resolution)")]
    SubResolution(usize),
    #[error("component {0} out of range")]
    NoSuchComponent(usize),
    #[error("tracing failed in both charts for component {0}")]
    BothChartsFailed(usize),
    #[error("resolution must be at least 2")]
    BadResolution,
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct RasterParams {
    pub center: Complex64,
    pub half_width: f64,
    pub resolution: usize,
    pub max_iter: u32,
    /// `None` applies the default rule (half the minimal pairwise chordal
    /// cycle distance, floored; a fixed radius for single-cycle maps).
    pub capture_radius: Option<f64>,
}

impl RasterParams {
    pub fn square(resolution: usize, half_width: f64) -> Self {
        RasterParams {
            center: Complex64::new(0.0, 0.0),
            half_width,
            resolution,
            max_iter: default_max_iter(resolution),
            capture_radius: None,
        }
    }
}

/// Default per-pixel iteration budget. The budget tracks resolution so the
/// unresolved band around the Julia set stays at pixel scale; a fixed budget
/// would freeze the band at a fixed physical width and julia pixel counts
/// would scale like area.
pub fn default_max_iter(resolution: usize) -> u32 {
    let log2 = (resolution.max(2) as f64).log2();
    ((2.0 * log2) as i64 - 8).clamp(8, 512) as u32
}

/// Pixel classification of a rectangular window of the sphere.
#[derive(Clone, Debug)]
pub struct RasterGrid {
    pub params: RasterParams,
    pub map: RationalMap,
    pub cycles: Vec<CycleInfo>,
    pub capture_radius: f64,
    /// Basin label per pixel (-1 = unresolved), row-major, y increasing with Im.
    labels: Vec<i32>,
    iterations: Vec<u32>,
    julia: Vec<bool>,
}

impl RasterGrid {
    pub fn resolution(&self) -> usize {
        self.params.resolution
    }

    pub fn pixel_size(&self) -> f64 {
        2.0 * self.params.half_width / self.params.resolution as f64
    }

    pub fn index(&self, ix: usize, iy: usize) -> usize {
        iy * self.params.resolution + ix
    }

    pub fn pixel_center(&self, ix: usize, iy: usize) -> Complex64 {
        let n = self.params.resolution as f64;
        let hw = self.params.half_width;
        self.params.center
            + Complex64::new(
                (ix as f64 + 0.5) / n * 2.0 * hw - hw,
                (iy as f64 + 0.5) / n * 2.0 * hw - hw,
            )
    }

    pub fn label(&self, ix: usize, iy: usize) -> i32 {
        self.labels[self.index(ix, iy)]
    }

    pub fn labels(&self) -> &[i32] {
        &self.labels
    }

    pub fn iterations(&self, ix: usize, iy: usize) -> u32 {
        self.iterations[self.index(ix, iy)]
    }

    pub fn is_julia(&self, ix: usize, iy: usize) -> bool {
        self.julia[self.index(ix, iy)]
    }

    pub fn julia_mask(&self) -> &[bool] {
        &self.julia
    }

    pub fn julia_pixel_count(&self) -> usize {
        self.julia.iter().filter(|j| **j).count()
    }

    /// Centers of julia-flagged pixels.
    pub fn julia_points(&self) -> Vec<Complex64> {
        let n = self.params.resolution;
        let mut out = Vec::new();
        for iy in 0..n {
            for ix in 0..n {
                if self.julia[self.index(ix, iy)] {
                    out.push(self.pixel_center(ix, iy));
                }
            }
        }
        out
    }

    /// Pixel coordinates containing the chart point z, if inside the window.
    pub fn locate(&self, z: Complex64) -> Option<(usize, usize)> {
        let n = self.params.resolution as f64;
        let hw = self.params.half_width;
        let fx = (z.re - self.params.center.re + hw) / (2.0 * hw) * n - 0.5;
        let fy = (z.im - self.params.center.im + hw) / (2.0 * hw) * n - 0.5;
        let ix = fx.round();
        let iy = fy.round();
        if ix < 0.0 || iy < 0.0 || ix >= n || iy >= n {
            return None;
        }
        Some((ix as usize, iy as usize))
    }
}

fn derive_capture_radius(cycles: &[CycleInfo], requested: Option<f64>) -> f64 {
    if let Some(r) = requested {
        return r;
    }
    if cycles.len() < 2 {
        return SINGLE_CYCLE_CAPTURE_RADIUS;
    }
    let mut min_dist = f64::INFINITY;
    for i in 0..cycles.len() {
        for j in (i + 1)..cycles.len() {
            for p in &cycles[i].points {
                for q in &cycles[j].points {
                    min_dist = min_dist.min(chordal_distance(*p, *q));
                }
            }
        }
    }
    (0.5 * min_dist).clamp(CAPTURE_RADIUS_FLOOR, CAPTURE_RADIUS_CAP)
}

/// Classifies every pixel of the window by the first attracting cycle whose
/// capture neighborhood its center orbit enters. Deterministic for fixed
/// parameters.
pub fn rasterize(
    f: &RationalMap,
    report: &OrbitReport,
    params: RasterParams,
) -> Result<RasterGrid, RasterError> {
    if params.resolution < 2 {
        return Err(RasterError::BadResolution);
    }
    let cycles = report.attracting_cycles.clone();
    if cycles.is_empty() {
        return Err(RasterError::NotSubhyperbolic);
    }
    let capture_radius = derive_capture_radius(&cycles, params.capture_radius);
    let n = params.resolution;
    let mut labels = vec![-1i32; n * n];
    let mut iterations = vec![0u32; n * n];

    let cycle_points: Vec<(usize, SpherePoint)> = cycles
        .iter()
        .enumerate()
        .flat_map(|(ci, c)| c.points.iter().map(move |p| (ci, *p)))
        .collect();

    labels
        .par_chunks_mut(n)
        .zip(iterations.par_chunks_mut(n))
        .enumerate()
        .for_each(|(iy, (label_row, iter_row))| {
            let hw = params.half_width;
            let nn = n as f64;
            for ix in 0..n {
                let z = params.center
                    + Complex64::new(
                        (ix as f64 + 0.5) / nn * 2.0 * hw - hw,
                        (iy as f64 + 0.5) / nn * 2.0 * hw - hw,
                    );
                let (label, its) = classify_orbit(
                    f,
                    SpherePoint::Finite(z),
                    &cycle_points,
                    capture_radius,
                    params.max_iter,
                );
                label_row[ix] = label;
                iter_row[ix] = its;
            }
        });

    let julia = julia_flags(&labels, n);
    Ok(RasterGrid {
        params,
        map: f.clone(),
        cycles,
        capture_radius,
        labels,
        iterations,
        julia,
    })
}

fn classify_orbit(
    f: &RationalMap,
    start: SpherePoint,
    cycle_points: &[(usize, SpherePoint)],
    capture_radius: f64,
    max_iter: u32,
) -> (i32, u32) {
    let mut z = start;
    for k in 0..max_iter {
        for (ci, p) in cycle_points {
            if chordal_distance(z, *p) <= capture_radius {
                return (*ci as i32, k);
            }
        }
        z = f.eval(z);
    }
    (-1, max_iter)
}

/// A pixel is a Julia pixel when its 3x3 neighborhood (self included)
/// contains two distinct basin labels or an unresolved pixel.
fn julia_flags(labels: &[i32], n: usize) -> Vec<bool> {
    let mut julia = vec![false; n * n];
    julia.par_chunks_mut(n).enumerate().for_each(|(iy, row)| {
        for (ix, out) in row.iter_mut().enumerate() {
            let mut seen: i32 = -2;
            let mut flag = false;
            'scan: for dy in -1i64..=1 {
                for dx in -1i64..=1 {
                    let jx = ix as i64 + dx;
                    let jy = iy as i64 + dy;
                    if jx < 0 || jy < 0 || jx >= n as i64 || jy >= n as i64 {
                        continue;
                    }
                    let l = labels[jy as usize * n + jx as usize];
                    if l < 0 {
                        flag = true;
                        break 'scan;
                    }
                    if seen == -2 {
                        seen = l;
                    } else if l != seen {
                        flag = true;
                        break 'scan;
                    }
                }
            }
            *out = flag;
        }
    });
    julia
}

/// A 4-connected component of non-Julia pixels.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FatouComponentPixels {
    pub id: usize,
    pub basin_label: i32,
    pub pixel_count: usize,
    /// (min_ix, min_iy, max_ix, max_iy)
    pub bbox: (usize, usize, usize, usize),
    pub touches_edge: bool,
    /// Flat pixel indices, ascending.
    pub pixels: Vec<u32>,
}

/// Labels 4-connected components of non-Julia pixels; ids are sorted by
/// descending pixel count, ties broken by scanline order of the
/// topmost-leftmost pixel.
pub fn label_components(grid: &RasterGrid) -> Vec<FatouComponentPixels> {
    let n = grid.params.resolution;
    let mut comp = vec![u32::MAX; n * n];
    let mut comps: Vec<FatouComponentPixels> = Vec::new();
    let mut stack: Vec<u32> = Vec::new();
    for start in 0..n * n {
        if grid.julia[start] || comp[start] != u32::MAX {
            continue;
        }
        let cid = comps.len() as u32;
        let mut pixels: Vec<u32> = Vec::new();
        let mut bbox = (usize::MAX, usize::MAX, 0usize, 0usize);
        let mut touches = false;
        stack.push(start as u32);
        comp[start] = cid;
        while let Some(idx) = stack.pop() {
            let idx_us = idx as usize;
            let (ix, iy) = (idx_us % n, idx_us / n);
            pixels.push(idx);
            bbox.0 = bbox.0.min(ix);
            bbox.1 = bbox.1.min(iy);
            bbox.2 = bbox.2.max(ix);
            bbox.3 = bbox.3.max(iy);
            if ix == 0 || iy == 0 || ix == n - 1 || iy == n - 1 {
                touches = true;
            }
            let neighbors = [
                (ix > 0).then(|| idx_us - 1),
                (ix + 1 < n).then(|| idx_us + 1),
                (iy > 0).then(|| idx_us - n),
                (iy + 1 < n).then(|| idx_us + n),
            ];
            for nb in neighbors.into_iter().flatten() {
                if !grid.julia[nb] && comp[nb] == u32::MAX {
                    comp[nb] = cid;
                    stack.push(nb as u32);
                }
            }
        }
        pixels.sort_unstable();
        comps.push(FatouComponentPixels {
            id: 0,
            basin_label: grid.labels[start],
            pixel_count: pixels.len(),
            bbox,
            touches_edge: touches,
            pixels,
        });
    }
    comps.sort_by(|a, b| {
        b.pixel_count
            .cmp(&a.pixel_count)
            .then(a.pixels[0].cmp(&b.pixels[0]))
    });
    for (i, c) in comps.iter_mut().enumerate() {
        c.id = i;
    }
    comps
}

/// A traced closed polyline approximating one peripheral circle.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PeripheralCurve {
    pub vertices: Vec<Complex64>,
    pub component_id: usize,
    /// Max pairwise chordal distance over the vertices.
    pub diameter: f64,
}

impl PeripheralCurve {
    /// Builds a curve from an ordered closed polyline (the closing edge back
    /// to the first vertex is implicit). Duplicate adjacent vertices are
    /// cleaned; contours beyond the vertex cap are uniformly resampled.
    pub fn from_vertices(mut vertices: Vec<Complex64>, component_id: usize) -> Self {
        vertices.dedup_by(|a, b| (*a - *b).norm() == 0.0);
        if vertices.len() > 1 && (vertices[0] - *vertices.last().unwrap()).norm() == 0.0 {
            vertices.pop();
        }
        if vertices.len() > CURVE_VERTEX_CAP {
            let v = vertices.len();
            vertices = (0..CURVE_VERTEX_CAP)
                .map(|i| vertices[i * v / CURVE_VERTEX_CAP])
                .collect();
        }
        let diameter = chordal_diameter(&vertices);
        PeripheralCurve {
            vertices,
            component_id,
            diameter,
        }
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    /// Winding number of the polyline around a chart point.
    pub fn winding_number(&self, p: Complex64) -> i32 {
        let mut total = 0.0f64;
        let v = &self.vertices;
        for i in 0..v.len() {
            let a = v[i] - p;
            let b = v[(i + 1) % v.len()] - p;
            total += (b * a.conj()).arg();
        }
        (total / (2.0 * std::f64::consts::PI)).round() as i32
    }

    /// Signed area (shoelace) in the chart.
    pub fn signed_area(&self) -> f64 {
        let v = &self.vertices;
        let mut acc = 0.0;
        for i in 0..v.len() {
            let a = v[i];
            let b = v[(i + 1) % v.len()];
            acc += a.re * b.im - b.re * a.im;
        }
        0.5 * acc
    }

    pub fn sphere_points(&self) -> Vec<SpherePoint> {
        self.vertices
            .iter()
            .map(|z| SpherePoint::Finite(*z))
            .collect()
    }
}

fn chordal_diameter(vertices: &[Complex64]) -> f64 {
    let pts: Vec<[f64; 3]> = vertices
        .iter()
        .map(|z| SpherePoint::Finite(*z).to_r3())
        .collect();
    let mut best = 0.0f64;
    for i in 0..pts.len() {
        for j in (i + 1)..pts.len() {
            let d2 = (pts[i][0] - pts[j][0]).powi(2)
                + (pts[i][1] - pts[j][1]).powi(2)
                + (pts[i][2] - pts[j][2]).powi(2);
            if d2 > best {
                best = d2;
            }
        }
    }
    best.sqrt()
}

/// Traces the outer boundary of a component as a closed, simple, oriented
/// polyline (component interior on the left). Components touching the window
/// edge are traced in the w = 1/z chart and re-projected.
pub fn trace_peripheral_curve(
    grid: &RasterGrid,
    comps: &[FatouComponentPixels],
    component_id: usize,
) -> Result<PeripheralCurve, RasterError> {
    let comp = comps
        .get(component_id)
        .ok_or(RasterError::NoSuchComponent(component_id))?;
    if comp.pixel_count < 4 {
        return Err(RasterError::SubResolution(component_id));
    }
    if !comp.touches_edge {
        let loops = marching_squares(grid.params.resolution, |ix, iy| {
            let idx = iy * grid.params.resolution + ix;
            comp.pixels.binary_search(&(idx as u32)).is_ok()
        });
        let outer = largest_loop(loops).ok_or(RasterError::BothChartsFailed(component_id))?;
        let vertices: Vec<Complex64> = outer
            .into_iter()
            .map(|(fx, fy)| fractional_to_chart(grid, fx, fy))
            .collect();
        return Ok(orient_ccw(PeripheralCurve::from_vertices(
            vertices,
            component_id,
        )));
    }
    trace_in_w_chart(grid, comp, component_id)
}

fn fractional_to_chart(grid: &RasterGrid, fx: f64, fy: f64) -> Complex64 {
    let n = grid.params.resolution as f64;
    let hw = grid.params.half_width;
    grid.params.center
        + Complex64::new(
            (fx + 0.5) / n * 2.0 * hw - hw,
            (fy + 0.5) / n * 2.0 * hw - hw,
        )
}

fn orient_ccw(mut curve: PeripheralCurve) -> PeripheralCurve {
    if curve.signed_area() < 0.0 {
        curve.vertices.reverse();
    }
    curve
}

/// Traces the edge-touching (unbounded) component in the w = 1/z chart: the
/// component containing w = 0 in an auxiliary raster of the same dynamics,
/// re-projected back to the standard chart.
fn trace_in_w_chart(
    grid: &RasterGrid,
    comp: &FatouComponentPixels,
    component_id: usize,
) -> Result<PeripheralCurve, RasterError> {
    let n = grid.params.resolution;
    // the w-window must contain 1/z for every component pixel near the carpet
    let mut min_abs = f64::INFINITY;
    for &idx in &comp.pixels {
        let (ix, iy) = (idx as usize % n, idx as usize / n);
        let z = grid.pixel_center(ix, iy);
        min_abs = min_abs.min(z.norm());
    }
    if !(min_abs > 1e-9) {
        return Err(RasterError::BothChartsFailed(component_id));
    }
    let w_hw = (1.15 / min_abs).min(4.0);
    let cycle_points: Vec<(usize, SpherePoint)> = grid
        .cycles
        .iter()
        .enumerate()
        .flat_map(|(ci, c)| c.points.iter().map(move |p| (ci, *p)))
        .collect();
    // classify the w-grid: pixel w corresponds to the sphere point 1/w
    let mut labels = vec![-1i32; n * n];
    labels.par_chunks_mut(n).enumerate().for_each(|(iy, row)| {
        let nn = n as f64;
        for (ix, out) in row.iter_mut().enumerate() {
            let w = Complex64::new(
                (ix as f64 + 0.5) / nn * 2.0 * w_hw - w_hw,
                (iy as f64 + 0.5) / nn * 2.0 * w_hw - w_hw,
            );
            let z = if w.norm() == 0.0 {
                SpherePoint::Infinity
            } else {
                SpherePoint::Finite(w.inv())
            };
            let (label, _) = classify_orbit(
                &grid.map,
                z,
                &cycle_points,
                grid.capture_radius,
                grid.params.max_iter,
            );
            *out = label;
        }
    });
    let julia = julia_flags(&labels, n);
    // pixel containing w = 0
    let n_f = n as f64;
    let c0 = ((0.5 * n_f - 0.5).round() as usize).min(n - 1);
    let origin = c0 * n + c0;
    if julia[origin] {
        return Err(RasterError::BothChartsFailed(component_id));
    }
    // flood fill the w-component containing the origin pixel
    let mut in_comp = vec![false; n * n];
    let mut stack = vec![origin];
    in_comp[origin] = true;
    while let Some(idx) = stack.pop() {
        let (ix, iy) = (idx % n, idx / n);
        let neighbors = [
            (ix > 0).then(|| idx - 1),
            (ix + 1 < n).then(|| idx + 1),
            (iy > 0).then(|| idx - n),
            (iy + 1 < n).then(|| idx + n),
        ];
        for nb in neighbors.into_iter().flatten() {
            if !julia[nb] && !in_comp[nb] {
                in_comp[nb] = true;
                stack.push(nb);
            }
        }
    }
    let loops = marching_squares(n, |ix, iy| in_comp[iy * n + ix]);
    let outer = largest_loop(loops).ok_or(RasterError::BothChartsFailed(component_id))?;
    let w_vertices: Vec<Complex64> = outer
        .iter()
        .map(|(fx, fy)| {
            Complex64::new(
                (fx + 0.5) / n_f * 2.0 * w_hw - w_hw,
                (fy + 0.5) / n_f * 2.0 * w_hw - w_hw,
            )
        })
        .collect();
    // orientation fixed in the w-chart; 1/w is holomorphic so "interior on
    // the left" survives re-projection
    let w_curve = orient_ccw(PeripheralCurve::from_vertices(w_vertices, component_id));
    let vertices: Vec<Complex64> = w_curve
        .vertices
        .iter()
        .map(|w| {
            let mut w = *w;
            if w.norm() < 1e-12 {
                w += Complex64::new(1e-9 * w_hw, 0.0);
            }
            w.inv()
        })
        .collect();
    Ok(PeripheralCurve::from_vertices(vertices, component_id))
}

type Loop = Vec<(f64, f64)>;

/// Marching squares at the 0.5 level of a binary indicator sampled at pixel
/// centers. Returns closed loops of subpixel vertices in fractional pixel
/// coordinates, oriented with the positive region on the left.
fn marching_squares<F: Fn(usize, usize) -> bool>(n: usize, inside: F) -> Vec<Loop> {
    use std::collections::HashMap;
    // vertex key: doubled fractional coordinates stay integral
    type Key = (i64, i64);
    let key = |fx: f64, fy: f64| -> Key { ((fx * 2.0).round() as i64, (fy * 2.0).round() as i64) };
    let mut segs: HashMap<Key, Vec<(f64, f64)>> = HashMap::new();
    let mut push = |from: (f64, f64), to: (f64, f64)| {
        segs.entry(key(from.0, from.1)).or_default().push(to);
    };
    for cy in 0..n.saturating_sub(1) {
        for cx in 0..n - 1 {
            let a = inside(cx, cy) as usize;
            let b = inside(cx + 1, cy) as usize;
            let c = inside(cx + 1, cy + 1) as usize;
            let d = inside(cx, cy + 1) as usize;
            let code = a | (b << 1) | (c << 2) | (d << 3);
            if code == 0 || code == 15 {
                continue;
            }
            let fx = cx as f64;
            let fy = cy as f64;
            let s = (fx + 0.5, fy);
            let e = (fx + 1.0, fy + 0.5);
            let nn = (fx + 0.5, fy + 1.0);
            let w = (fx, fy + 0.5);
            match code {
                1 => push(s, w),
                2 => push(e, s),
                3 => push(e, w),
                4 => push(nn, e),
                5 => {
                    push(s, w);
                    push(nn, e);
                }
                6 => push(nn, s),
                7 => push(nn, w),
                8 => push(w, nn),
                9 => push(s, nn),
                10 => {
                    push(e, s);
                    push(w, nn);
                }
                11 => push(e, nn),
                12 => push(w, e),
                13 => push(s, e),
                14 => push(w, s),
                _ => unreachable!(),
            }
        }
    }
    // link segments into loops, starting from the smallest key for determinism
    let mut starts: Vec<Key> = segs.keys().copied().collect();
    starts.sort_unstable();
    let mut loops = Vec::new();
    for start in starts {
        loop {
            let first = match segs.get_mut(&start).and_then(|v| v.pop()) {
                Some(to) => to,
                None => break,
            };
            let mut path: Loop = vec![(start.0 as f64 / 2.0, start.1 as f64 / 2.0), first];
            loop {
                let cur = *path.last().unwrap();
                let k = key(cur.0, cur.1);
                if k == start {
                    path.pop();
                    loops.push(path);
                    break;
                }
                match segs.get_mut(&k).and_then(|v| v.pop()) {
                    Some(next) => path.push(next),
                    None => {
                        // open chain; should not occur on closed indicators
                        loops.push(path);
                        break;
                    }
                }
            }
        }
    }
    loops
}

fn largest_loop(loops: Vec<Loop>) -> Option<Loop> {
    let area = |l: &Loop| -> f64 {
        let mut acc = 0.0;
        for i in 0..l.len() {
            let p = l[i];
            let q = l[(i + 1) % l.len()];
            acc += p.0 * q.1 - q.0 * p.1;
        }
        acc.abs()
    };
    loops
        .into_iter()
        .max_by(|a, b| area(a).partial_cmp(&area(b)).unwrap_or(std::cmp::Ordering::Equal))
}
