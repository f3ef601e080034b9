//! Orbit computation: postcritical sets, cycle detection and classification,
//! PCF / subhyperbolic / hyperbolic verdicts, and orbit-product degree bounds.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ratmap::{RatMapError, RationalMap};
use crate::sphere::{chordal_distance, SpherePoint};

/// Chordal tolerance at which an orbit revisit is suspected.
pub const CYCLE_DETECT_TOL: f64 = 1e-9;
/// A tail is accepted as finite only if the Newton-refined cycle closes up
/// to this tolerance.
pub const CYCLE_EXACT_TOL: f64 = 1e-12;
/// Default iteration budget per critical orbit.
pub const DEFAULT_ORBIT_BUDGET: u32 = 10_000;
/// Multiplier magnitude below which a cycle is superattracting.
pub const SUPERATTRACTING_TOL: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum OrbitError {
    #[error("points do not form a cycle: closure error {0:.3e}")]
    NotACycle(f64),
    #[error("map error: {0}")]
    Map(#[from] RatMapError),
    #[error("dynamical operations need degree >= 2, got {0}")]
    DegreeTooLow(usize),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CycleClass {
    Superattracting,
    Attracting,
    Repelling,
    Indifferent,
}

/// A periodic cycle with its multiplier magnitude and classification.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CycleInfo {
    pub points: Vec<SpherePoint>,
    pub period: u32,
    pub multiplier_magnitude: f64,
    pub class: CycleClass,
}

impl CycleInfo {
    pub fn is_attracting(&self) -> bool {
        matches!(self.class, CycleClass::Attracting | CycleClass::Superattracting)
    }
}

/// Minimal (preperiod, period) of a resolved orbit tail, with the refined cycle.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct OrbitTail {
    pub preperiod: u32,
    pub period: u32,
    pub cycle: Vec<SpherePoint>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum TailResult {
    Resolved(OrbitTail),
    Unresolved { iterations: u32 },
}

/// Iterates z under f until a revisit within `tol` occurs; the detected
/// cycle is refined by Newton iteration on f^period before acceptance, and
/// the returned (preperiod, period) pair is minimal.
pub fn orbit_tail(f: &RationalMap, z: SpherePoint, max_iter: u32, tol: f64) -> TailResult {
    assert!(max_iter >= 1 && tol > 0.0);
    let mut orbit: Vec<SpherePoint> = vec![z];
    let mut current = z;
    for _ in 0..max_iter {
        current = f.eval(current);
        // earliest revisit against the stored orbit
        for (i, p) in orbit.iter().enumerate() {
            if chordal_distance(*p, current) < tol {
                let raw_period = (orbit.len() - i) as u32;
                if let Some(tail) = accept_tail(f, &orbit, *p, raw_period) {
                    return TailResult::Resolved(tail);
                }
            }
        }
        orbit.push(current);
    }
    TailResult::Unresolved {
        iterations: max_iter,
    }
}

/// Points chordally indistinguishable from infinity at [`CYCLE_EXACT_TOL`]
/// are represented by the marker: sigma(z, inf) = 2/|z| < tol means
/// |z| > 2/tol.
fn snap_infinity(p: SpherePoint) -> SpherePoint {
    match p {
        SpherePoint::Finite(z) if z.norm() > 2.0 / CYCLE_EXACT_TOL => SpherePoint::Infinity,
        other => other,
    }
}

/// Refine the suspected cycle entry and re-derive the minimal tail. Returns
/// `None` when Newton refinement fails to close the cycle to
/// [`CYCLE_EXACT_TOL`].
fn accept_tail(
    f: &RationalMap,
    orbit: &[SpherePoint],
    entry: SpherePoint,
    raw_period: u32,
) -> Option<OrbitTail> {
    let refined = snap_infinity(refine_periodic_point(f, snap_infinity(entry), raw_period)?);
    // minimal period divides the detected one
    let mut period = raw_period;
    for p in 1..raw_period {
        if raw_period % p == 0 {
            let mut q = refined;
            for _ in 0..p {
                q = f.eval(q);
            }
            if chordal_distance(q, refined) < CYCLE_EXACT_TOL.max(1e-11) {
                period = p;
                break;
            }
        }
    }
    let mut cycle = Vec::with_capacity(period as usize);
    let mut q = refined;
    for _ in 0..period {
        cycle.push(q);
        q = snap_infinity(f.eval(q));
    }
    if chordal_distance(q, refined) > CYCLE_EXACT_TOL.max(1e-11) {
        return None;
    }
    // minimal preperiod: first orbit index within tolerance of the cycle set
    let mut preperiod = orbit.len() as u32;
    'outer: for (i, p) in orbit.iter().enumerate() {
        for c in &cycle {
            if chordal_distance(*p, *c) < CYCLE_DETECT_TOL {
                preperiod = i as u32;
                break 'outer;
            }
        }
    }
    Some(OrbitTail {
        preperiod,
        period,
        cycle,
    })
}

/// Newton refinement of a periodic point of period p, run in the canonical
/// chart of the point. Returns `None` if the iteration does not converge to
/// a revisit-exact cycle.
fn refine_periodic_point(f: &RationalMap, start: SpherePoint, period: u32) -> Option<SpherePoint> {
    let mut point = start;
    for _ in 0..12 {
        // evaluate f^period and the chart-derivative product along the cycle
        let mut deriv = Complex64::new(1.0, 0.0);
        let mut value = point;
        for _ in 0..period {
            let (v, d) = f.eval_with_deriv(value);
            deriv *= d;
            value = v;
        }
        let err = chordal_distance(value, point);
        if err < CYCLE_EXACT_TOL {
            return Some(point);
        }
        // Newton step in the chart of `point`: x - (F(x) - x)/(F'(x) - 1)
        let in_w = match point {
            SpherePoint::Infinity => true,
            SpherePoint::Finite(z) => z.norm_sqr() > 1.0,
        };
        let x = match point {
            SpherePoint::Infinity => Complex64::new(0.0, 0.0),
            SpherePoint::Finite(z) => {
                if in_w {
                    z.inv()
                } else {
                    z
                }
            }
        };
        // the chart of `value` must match the chart of `point` for the
        // difference to make sense; if they disagree the guess is too far off
        let fx = match (value, in_w) {
            (SpherePoint::Infinity, true) => Complex64::new(0.0, 0.0),
            (SpherePoint::Infinity, false) => return None,
            (SpherePoint::Finite(v), false) => v,
            (SpherePoint::Finite(v), true) => {
                if v.norm() == 0.0 {
                    return None;
                }
                v.inv()
            }
        };
        let denom = deriv - Complex64::new(1.0, 0.0);
        if !denom.is_finite() || denom.norm() < 1e-14 {
            // superattracting-or-degenerate; accept only if already exact
            return if err < CYCLE_EXACT_TOL { Some(point) } else { None };
        }
        let step = (fx - x) / denom;
        if !step.is_finite() {
            return None;
        }
        let nx = x - step;
        point = if in_w {
            if nx.norm() == 0.0 {
                SpherePoint::Infinity
            } else {
                SpherePoint::from_complex(nx.inv())
            }
        } else {
            SpherePoint::from_complex(nx)
        };
    }
    // converged?
    let mut value = point;
    for _ in 0..period {
        value = f.eval(value);
    }
    if chordal_distance(value, point) < CYCLE_EXACT_TOL {
        Some(point)
    } else {
        None
    }
}

/// Classifies an approximate cycle. The multiplier is the product of chart
/// derivatives along the cycle; classification thresholds follow the module
/// constants.
pub fn classify_cycle(f: &RationalMap, cycle: &[SpherePoint]) -> Result<CycleInfo, OrbitError> {
    if cycle.is_empty() {
        return Err(OrbitError::NotACycle(f64::INFINITY));
    }
    // closure check
    let mut q = cycle[0];
    for _ in 0..cycle.len() {
        q = f.eval(q);
    }
    let err = chordal_distance(q, cycle[0]);
    if err >= 1e-6 {
        return Err(OrbitError::NotACycle(err));
    }
    let mut magnitude = 1.0f64;
    let mut point = cycle[0];
    for _ in 0..cycle.len() {
        let (v, d) = f.eval_with_deriv(point);
        magnitude *= d.norm();
        point = v;
    }
    let contains_critical = cycle.iter().any(|p| f.local_degree(*p) >= 2);
    let class = if magnitude < SUPERATTRACTING_TOL || contains_critical {
        CycleClass::Superattracting
    } else if magnitude < 1.0 - SUPERATTRACTING_TOL {
        CycleClass::Attracting
    } else if magnitude > 1.0 + SUPERATTRACTING_TOL {
        CycleClass::Repelling
    } else {
        CycleClass::Indifferent
    };
    Ok(CycleInfo {
        points: cycle.to_vec(),
        period: cycle.len() as u32,
        multiplier_magnitude: magnitude,
        class,
    })
}

/// Product of local degrees along the orbit segment q, f(q), ..., f^(n-1)(q).
pub fn orbit_local_degree(f: &RationalMap, q: SpherePoint, n: u32) -> u64 {
    assert!(n >= 1);
    let mut acc = 1u64;
    let mut p = q;
    for _ in 0..n {
        acc *= f.local_degree(p) as u64;
        p = f.eval(p);
    }
    acc
}

/// N(f) = product of local degrees over all critical points; the uniform
/// bound for mapping degrees over postcritically-free disks.
pub fn degree_bound_n(f: &RationalMap) -> Result<u64, OrbitError> {
    if f.degree() < 2 {
        return Err(OrbitError::DegreeTooLow(f.degree()));
    }
    Ok(f.critical_points()?
        .iter()
        .map(|(_, k)| *k as u64)
        .product())
}

/// Verdict for one critical orbit.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum CriticalFate {
    /// Orbit tail resolved; cycle classified.
    Resolved {
        preperiod: u32,
        period: u32,
        cycle_class: CycleClass,
    },
    /// No revisit within budget, but the orbit approaches a known attracting
    /// cycle within the capture tolerance.
    ConvergesToAttractor { cycle_index: usize },
    /// Budget exhausted with no verdict.
    NotFiniteWithinBudget,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CriticalOrbit {
    pub point: SpherePoint,
    pub local_degree: u32,
    pub fate: CriticalFate,
    /// Set when the tail lands on an indifferent cycle, where Julia
    /// membership cannot be decided at raster precision.
    pub boundary_ambiguous: bool,
}

/// Postcritical analysis of a rational map.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct OrbitReport {
    pub degree: usize,
    pub critical_orbits: Vec<CriticalOrbit>,
    /// post(f) as a finite list; `None` when some orbit did not resolve.
    pub postcritical: Option<Vec<SpherePoint>>,
    /// Points on cycles of periodic critical points (post^c(f)).
    pub postcritical_cyclic: Vec<SpherePoint>,
    pub attracting_cycles: Vec<CycleInfo>,
    pub is_pcf: bool,
    pub is_subhyperbolic: bool,
    pub is_hyperbolic: bool,
    pub degree_bound: u64,
    pub budget: u32,
    pub tolerance: f64,
}

/// Computes critical orbits, the postcritical set, cycle classifications and
/// the PCF / subhyperbolic / hyperbolic verdicts.
pub fn postcritical_report(f: &RationalMap, budget: u32) -> Result<OrbitReport, OrbitError> {
    if f.degree() < 2 {
        return Err(OrbitError::DegreeTooLow(f.degree()));
    }
    let crit = f.critical_points()?.to_vec();
    let degree_bound = crit.iter().map(|(_, k)| *k as u64).product();

    let mut attracting_cycles: Vec<CycleInfo> = Vec::new();
    let mut post: Vec<SpherePoint> = Vec::new();
    let mut postc: Vec<SpherePoint> = Vec::new();
    let mut orbits_out: Vec<CriticalOrbit> = Vec::new();
    let mut all_resolved = true;
    let mut any_indifferent = false;
    let mut crit_on_julia = false;
    let mut crit_unresolved_convergent = 0usize;

    let push_post = |set: &mut Vec<SpherePoint>, p: SpherePoint| {
        if !set.iter().any(|q| chordal_distance(*q, p) < 1e-8) {
            set.push(p);
        }
    };

    for (c, k) in &crit {
        let tail = orbit_tail(f, *c, budget, CYCLE_DETECT_TOL);
        match tail {
            TailResult::Resolved(t) => {
                let info = classify_cycle(f, &t.cycle)?;
                // collect the forward orbit of the critical value into post(f)
                let mut p = f.eval(*c);
                let steps = t.preperiod + t.period;
                for _ in 0..steps.max(1) {
                    push_post(&mut post, p);
                    p = f.eval(p);
                }
                for cp in &t.cycle {
                    push_post(&mut post, *cp);
                }
                if t.preperiod == 0 {
                    // periodic critical point: its cycle is in post^c(f)
                    for cp in &t.cycle {
                        push_post(&mut postc, *cp);
                    }
                }
                match info.class {
                    CycleClass::Superattracting | CycleClass::Attracting => {
                        if !attracting_cycles.iter().any(|cy| {
                            cy.points
                                .iter()
                                .any(|p| chordal_distance(*p, info.points[0]) < 1e-8)
                        }) {
                            attracting_cycles.push(info.clone());
                        }
                    }
                    CycleClass::Repelling => {
                        // a finite orbit ending in a repelling cycle lies in J(f)
                        crit_on_julia = true;
                    }
                    CycleClass::Indifferent => {
                        any_indifferent = true;
                    }
                }
                orbits_out.push(CriticalOrbit {
                    point: *c,
                    local_degree: *k,
                    fate: CriticalFate::Resolved {
                        preperiod: t.preperiod,
                        period: t.period,
                        cycle_class: info.class,
                    },
                    boundary_ambiguous: matches!(info.class, CycleClass::Indifferent),
                });
            }
            TailResult::Unresolved { .. } => {
                all_resolved = false;
                orbits_out.push(CriticalOrbit {
                    point: *c,
                    local_degree: *k,
                    fate: CriticalFate::NotFiniteWithinBudget,
                    boundary_ambiguous: true,
                });
            }
        }
    }

    // second pass: unresolved orbits may still converge to a now-known
    // attracting cycle (hyperbolic but not PCF maps)
    if !attracting_cycles.is_empty() {
        for orbit in orbits_out.iter_mut() {
            if matches!(orbit.fate, CriticalFate::NotFiniteWithinBudget) {
                let mut p = orbit.point;
                let mut captured = None;
                'steps: for _ in 0..budget {
                    p = f.eval(p);
                    for (ci, cy) in attracting_cycles.iter().enumerate() {
                        if cy
                            .points
                            .iter()
                            .any(|q| chordal_distance(*q, p) < 1e-3)
                        {
                            captured = Some(ci);
                            break 'steps;
                        }
                    }
                }
                if let Some(ci) = captured {
                    orbit.fate = CriticalFate::ConvergesToAttractor { cycle_index: ci };
                    orbit.boundary_ambiguous = false;
                    crit_unresolved_convergent += 1;
                }
            }
        }
    }

    let unresolved = orbits_out
        .iter()
        .filter(|o| matches!(o.fate, CriticalFate::NotFiniteWithinBudget))
        .count();
    let is_pcf = all_resolved;
    // hyperbolic: every critical orbit converges to an attracting cycle
    let is_hyperbolic = unresolved == 0
        && !crit_on_julia
        && !any_indifferent
        && orbits_out.iter().all(|o| match &o.fate {
            CriticalFate::Resolved { cycle_class, .. } => {
                matches!(cycle_class, CycleClass::Attracting | CycleClass::Superattracting)
            }
            CriticalFate::ConvergesToAttractor { .. } => true,
            CriticalFate::NotFiniteWithinBudget => false,
        });
    // subhyperbolic: critical points in J(f) have finite orbits, the rest
    // converge to attracting cycles
    let is_subhyperbolic = unresolved == 0 && !any_indifferent;
    let _ = crit_unresolved_convergent;

    Ok(OrbitReport {
        degree: f.degree(),
        critical_orbits: orbits_out,
        postcritical: if all_resolved { Some(post) } else { None },
        postcritical_cyclic: postc,
        attracting_cycles,
        is_pcf,
        is_subhyperbolic,
        is_hyperbolic,
        degree_bound,
        budget,
        tolerance: CYCLE_DETECT_TOL,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pt(re: f64, im: f64) -> SpherePoint {
        SpherePoint::finite(re, im)
    }

    #[test]
    fn orbit_tail_example_map() {
        let f = RationalMap::carpet_example();
        // i/2 -> 0 -> inf -> inf: preperiod 2, period 1
        match orbit_tail(&f, pt(0.0, 0.5), 100, CYCLE_DETECT_TOL) {
            TailResult::Resolved(t) => {
                assert_eq!((t.preperiod, t.period), (2, 1));
                assert!(t.cycle[0].is_infinite());
            }
            other => panic!("expected resolved tail, got {other:?}"),
        }
        // inf is fixed
        match orbit_tail(&f, SpherePoint::Infinity, 10, CYCLE_DETECT_TOL) {
            TailResult::Resolved(t) => assert_eq!((t.preperiod, t.period), (0, 1)),
            other => panic!("expected fixed point, got {other:?}"),
        }
        // generic Julia point with a tiny budget stays unresolved
        match orbit_tail(&f, pt(0.9, 0.41), 5, CYCLE_DETECT_TOL) {
            TailResult::Unresolved { iterations } => assert_eq!(iterations, 5),
            other => panic!("expected unresolved, got {other:?}"),
        }
    }

    #[test]
    fn classify_cycles() {
        let f = RationalMap::carpet_example();
        let info = classify_cycle(&f, &[SpherePoint::Infinity]).unwrap();
        assert_eq!(info.class, CycleClass::Superattracting);
        assert_eq!(info.period, 1);

        let z2 = RationalMap::power_map(2);
        let info = classify_cycle(&z2, &[pt(0.0, 0.0)]).unwrap();
        assert_eq!(info.class, CycleClass::Superattracting);
        let info = classify_cycle(&z2, &[pt(1.0, 0.0)]).unwrap();
        assert_eq!(info.class, CycleClass::Repelling);
        assert!((info.multiplier_magnitude - 2.0).abs() < 1e-10);

        assert!(classify_cycle(&z2, &[pt(0.5, 0.5)]).is_err());
    }

    #[test]
    fn orbit_degree_products() {
        let z2 = RationalMap::power_map(2);
        assert_eq!(orbit_local_degree(&z2, pt(0.0, 0.0), 3), 8);
        let f = RationalMap::carpet_example();
        // non-critical orbit avoids critical points
        assert_eq!(orbit_local_degree(&f, pt(1.0, 0.0), 5), 1);
        // chain through the double critical points 0 -> inf
        assert_eq!(orbit_local_degree(&f, pt(0.0, 0.0), 2), 4);
        // i/2 -> 0: degree 1 at i/2 (not critical), 2 at 0
        assert_eq!(orbit_local_degree(&f, pt(0.0, 0.5), 2), 2);
    }

    #[test]
    fn orbit_degree_additivity() {
        let f = RationalMap::carpet_example();
        for q in [pt(0.0, 0.5), pt(0.3, 0.2), pt(0.0, 0.0)] {
            for (a, b) in [(1u32, 2u32), (2, 3), (1, 1)] {
                let mut mid = q;
                for _ in 0..a {
                    mid = f.eval(mid);
                }
                assert_eq!(
                    orbit_local_degree(&f, q, a + b),
                    orbit_local_degree(&f, q, a) * orbit_local_degree(&f, mid, b)
                );
            }
        }
    }

    #[test]
    fn degree_bounds() {
        assert_eq!(degree_bound_n(&RationalMap::power_map(2)).unwrap(), 4);
        assert_eq!(degree_bound_n(&RationalMap::power_map(3)).unwrap(), 9);
        assert_eq!(degree_bound_n(&RationalMap::carpet_example()).unwrap(), 64);
    }

    #[test]
    fn report_example_map() {
        let f = RationalMap::carpet_example();
        let report = postcritical_report(&f, DEFAULT_ORBIT_BUDGET).unwrap();
        assert!(report.is_pcf && report.is_hyperbolic && report.is_subhyperbolic);
        assert_eq!(report.degree_bound, 64);
        let post = report.postcritical.as_ref().unwrap();
        assert_eq!(post.len(), 4);
        for expect in [
            pt(0.0, 0.5),
            pt(0.0, -0.5),
            pt(0.0, 0.0),
            SpherePoint::Infinity,
        ] {
            assert!(
                post.iter().any(|p| chordal_distance(*p, expect) < 1e-9),
                "missing postcritical point {expect:?}"
            );
        }
        // the unique periodic cycle in post(f) is {inf}, superattracting
        assert_eq!(report.postcritical_cyclic.len(), 1);
        assert!(report.postcritical_cyclic[0].is_infinite());
        assert_eq!(report.attracting_cycles.len(), 1);
        assert_eq!(report.attracting_cycles[0].class, CycleClass::Superattracting);
    }

    #[test]
    fn report_power_map_and_basilica() {
        let z2 = RationalMap::power_map(2);
        let report = postcritical_report(&z2, 100).unwrap();
        assert!(report.is_pcf);
        let post = report.postcritical.as_ref().unwrap();
        assert_eq!(post.len(), 2);

        // z^2 - 1: 0 <-> -1 superattracting two-cycle
        let f = RationalMap::new(
            crate::poly::Polynomial::new(vec![
                Complex64::new(-1.0, 0.0),
                Complex64::new(0.0, 0.0),
                Complex64::new(1.0, 0.0),
            ]),
            crate::poly::Polynomial::one(),
        )
        .unwrap();
        let report = postcritical_report(&f, 100).unwrap();
        assert!(report.is_pcf);
        let post = report.postcritical.as_ref().unwrap();
        assert_eq!(post.len(), 3, "post(z^2-1) = {{0, -1, inf}}, got {post:?}");
        for expect in [pt(0.0, 0.0), pt(-1.0, 0.0), SpherePoint::Infinity] {
            assert!(post.iter().any(|p| chordal_distance(*p, expect) < 1e-9));
        }
        assert!(report
            .attracting_cycles
            .iter()
            .any(|c| c.period == 2 && c.class == CycleClass::Superattracting));
    }

    #[test]
    fn post_invariance_under_iterates() {
        // post(f) = post(f^n) for PCF test maps
        for (f, ns) in [
            (RationalMap::power_map(2), vec![2usize, 3]),
            (
                RationalMap::new(
                    crate::poly::Polynomial::new(vec![
                        Complex64::new(-1.0, 0.0),
                        Complex64::new(0.0, 0.0),
                        Complex64::new(1.0, 0.0),
                    ]),
                    crate::poly::Polynomial::one(),
                )
                .unwrap(),
                vec![2, 3],
            ),
            (RationalMap::carpet_example(), vec![2]),
        ] {
            let base = postcritical_report(&f, 1000).unwrap();
            let post_f = base.postcritical.unwrap();
            for n in ns {
                let fn_ = f.iterate(n).unwrap();
                let rep = postcritical_report(&fn_, 1000).unwrap();
                let post_fn = rep.postcritical.unwrap();
                for p in &post_f {
                    assert!(
                        post_fn.iter().any(|q| chordal_distance(*p, *q) < 1e-8),
                        "post(f) point {p:?} missing from post(f^{n})"
                    );
                }
                for q in &post_fn {
                    assert!(
                        post_f.iter().any(|p| chordal_distance(*p, *q) < 1e-8),
                        "post(f^{n}) point {q:?} missing from post(f)"
                    );
                }
            }
        }
    }

    #[test]
    fn post_forward_invariance() {
        let f = RationalMap::carpet_example();
        let report = postcritical_report(&f, 1000).unwrap();
        let post = report.postcritical.unwrap();
        for p in &post {
            let image = f.eval(*p);
            assert!(
                post.iter().any(|q| chordal_distance(image, *q) < 1e-8),
                "post(f) not forward invariant at {p:?}"
            );
        }
    }
}
