//! Shared spatial search utilities: a uniform-grid nearest-neighbor index
//! over the embedded sphere, and an exact Euclidean distance transform.

use std::collections::HashMap;

use crate::sphere::SpherePoint;

/// Uniform-grid nearest-neighbor index over points embedded in R^3 via the
/// stereographic embedding; distances returned are chordal.
pub struct SphereGrid {
    cell: f64,
    bins: HashMap<(i32, i32, i32), Vec<u32>>,
    points: Vec<[f64; 3]>,
}

impl SphereGrid {
    pub fn build(points: &[SpherePoint], cell: f64) -> Self {
        let cell = cell.max(1e-6);
        let mut bins: HashMap<(i32, i32, i32), Vec<u32>> = HashMap::new();
        let pts: Vec<[f64; 3]> = points.iter().map(|p| p.to_r3()).collect();
        for (i, p) in pts.iter().enumerate() {
            bins.entry(Self::key(p, cell)).or_default().push(i as u32);
        }
        SphereGrid {
            cell,
            bins,
            points: pts,
        }
    }

    fn key(p: &[f64; 3], cell: f64) -> (i32, i32, i32) {
        (
            (p[0] / cell).floor() as i32,
            (p[1] / cell).floor() as i32,
            (p[2] / cell).floor() as i32,
        )
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Chordal distance from `p` to the nearest indexed point.
    pub fn nearest_distance(&self, p: SpherePoint) -> f64 {
        self.nearest(p).1
    }

    /// Index and chordal distance of the nearest indexed point.
    pub fn nearest(&self, p: SpherePoint) -> (usize, f64) {
        assert!(!self.points.is_empty());
        let q = p.to_r3();
        let (kx, ky, kz) = Self::key(&q, self.cell);
        let mut best = (usize::MAX, f64::INFINITY);
        for ring in 0..64i32 {
            for dx in -ring..=ring {
                for dy in -ring..=ring {
                    for dz in -ring..=ring {
                        if dx.abs().max(dy.abs()).max(dz.abs()) != ring {
                            continue;
                        }
                        if let Some(ids) = self.bins.get(&(kx + dx, ky + dy, kz + dz)) {
                            for &i in ids {
                                let r = self.points[i as usize];
                                let d = ((q[0] - r[0]).powi(2)
                                    + (q[1] - r[1]).powi(2)
                                    + (q[2] - r[2]).powi(2))
                                .sqrt();
                                if d < best.1 {
                                    best = (i as usize, d);
                                }
                            }
                        }
                    }
                }
            }
            // a hit at ring k guarantees the true nearest lies within ring k+1
            if best.1.is_finite() && best.1 <= self.cell * (ring as f64) {
                break;
            }
        }
        if best.0 == usize::MAX {
            // sparse fallback
            for (i, r) in self.points.iter().enumerate() {
                let d = ((q[0] - r[0]).powi(2) + (q[1] - r[1]).powi(2) + (q[2] - r[2]).powi(2))
                    .sqrt();
                if d < best.1 {
                    best = (i, d);
                }
            }
        }
        best
    }
}

/// Uniform-grid nearest-neighbor index over points of the plane (Euclidean
/// metric in the chart).
pub struct PlanarGrid {
    cell: f64,
    bins: HashMap<(i32, i32), Vec<u32>>,
    points: Vec<[f64; 2]>,
}

impl PlanarGrid {
    pub fn build(points: &[num_complex::Complex64], cell: f64) -> Self {
        let cell = cell.max(1e-12);
        let mut bins: HashMap<(i32, i32), Vec<u32>> = HashMap::new();
        let pts: Vec<[f64; 2]> = points.iter().map(|z| [z.re, z.im]).collect();
        for (i, p) in pts.iter().enumerate() {
            let k = ((p[0] / cell).floor() as i32, (p[1] / cell).floor() as i32);
            bins.entry(k).or_default().push(i as u32);
        }
        PlanarGrid { cell, bins, points: pts }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Index and Euclidean distance of the nearest indexed point.
    pub fn nearest(&self, p: num_complex::Complex64) -> (usize, f64) {
        assert!(!self.points.is_empty());
        let q = [p.re, p.im];
        let (kx, ky) = (
            (q[0] / self.cell).floor() as i32,
            (q[1] / self.cell).floor() as i32,
        );
        let mut best = (usize::MAX, f64::INFINITY);
        for ring in 0..1024i32 {
            for dx in -ring..=ring {
                for dy in -ring..=ring {
                    if dx.abs().max(dy.abs()) != ring {
                        continue;
                    }
                    if let Some(ids) = self.bins.get(&(kx + dx, ky + dy)) {
                        for &i in ids {
                            let r = self.points[i as usize];
                            let d = ((q[0] - r[0]).powi(2) + (q[1] - r[1]).powi(2)).sqrt();
                            if d < best.1 {
                                best = (i as usize, d);
                            }
                        }
                    }
                }
            }
            if best.1.is_finite() && best.1 <= self.cell * ring as f64 {
                break;
            }
        }
        if best.0 == usize::MAX {
            for (i, r) in self.points.iter().enumerate() {
                let d = ((q[0] - r[0]).powi(2) + (q[1] - r[1]).powi(2)).sqrt();
                if d < best.1 {
                    best = (i, d);
                }
            }
        }
        best
    }
}

/// Exact Euclidean distance transform (Felzenszwalb–Huttenlocher): distance
/// in pixel units from every cell to the nearest `true` cell of the mask.
pub fn distance_transform(mask: &[bool], width: usize, height: usize) -> Vec<f64> {
    assert_eq!(mask.len(), width * height);
    const INF: f64 = 1e20;
    let mut g = vec![0.0f64; width * height];
    for (i, &m) in mask.iter().enumerate() {
        g[i] = if m { 0.0 } else { INF };
    }
    // columns
    let mut col = vec![0.0f64; height];
    let mut out_col = vec![0.0f64; height];
    for x in 0..width {
        for y in 0..height {
            col[y] = g[y * width + x];
        }
        dt_1d(&col, &mut out_col);
        for y in 0..height {
            g[y * width + x] = out_col[y];
        }
    }
    // rows
    let mut row = vec![0.0f64; width];
    let mut out_row = vec![0.0f64; width];
    for y in 0..height {
        row.copy_from_slice(&g[y * width..(y + 1) * width]);
        dt_1d(&row, &mut out_row);
        for x in 0..width {
            g[y * width + x] = out_row[x];
        }
    }
    g.iter_mut().for_each(|v| *v = v.sqrt());
    g
}

/// 1-D squared-distance transform of a sampled function (lower envelope of
/// parabolas).
fn dt_1d(f: &[f64], out: &mut [f64]) {
    let n = f.len();
    let mut v = vec![0usize; n];
    let mut z = vec![0.0f64; n + 1];
    let mut k = 0usize;
    v[0] = 0;
    z[0] = -1e30;
    z[1] = 1e30;
    for q in 1..n {
        let mut s;
        loop {
            let p = v[k];
            s = ((f[q] + (q * q) as f64) - (f[p] + (p * p) as f64)) / (2.0 * (q as f64 - p as f64));
            if s <= z[k] {
                if k == 0 {
                    break;
                }
                k -= 1;
            } else {
                break;
            }
        }
        k += 1;
        v[k] = q;
        z[k] = s;
        z[k + 1] = 1e30;
    }
    k = 0;
    for q in 0..n {
        while z[k + 1] < q as f64 {
            k += 1;
        }
        let p = v[k];
        out[q] = (q as f64 - p as f64).powi(2) + f[p];
    }
}
