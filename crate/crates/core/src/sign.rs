//! Recovery of a signed boundary trace from its square on a closed curve.
//!
//! A squared trace `f^2` determines `f` only up to sign on each arc between
//! zeros. The sign is continued across a zero of vanishing order `m` by the
//! factor `(-1)^m`: an odd-order zero is a genuine sign change, an
//! even-order zero is a touching point. The order is the minimal integer
//! `m` with `f(s)/|s - sbar|^m` tending to a nonzero limit.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::geometry::BoundaryMesh;
use crate::linalg::{lu_factor, Mat};

/// Tuning knobs for zero detection and order estimation.
#[derive(Debug, Clone, Copy)]
pub struct SignConfig {
    /// A refined minimum below `tau_rel * max(f^2)` counts as an exact zero.
    pub tau_rel: f64,
    /// Coarse screen: nodal minima above `screen_rel * max(f^2)` are never
    /// zero candidates. Grid sampling of an off-grid simple zero can leave
    /// nodal values as large as `(f'(sbar) h / 2)^2`, so this is much looser
    /// than `tau_rel`; the refined fit decides.
    pub screen_rel: f64,
    /// Fitted minimum below `zero_frac` times the fitted window-edge value
    /// is treated as vanishing.
    pub zero_frac: f64,
    /// Fit window half-width in nodes.
    pub window: usize,
    /// Largest vanishing order considered.
    pub m_max: usize,
    /// Minimum accepted ratio of second-best to best order-fit residual.
    pub confidence_min: f64,
}

impl Default for SignConfig {
    fn default() -> Self {
        SignConfig {
            tau_rel: 1e-8,
            screen_rel: 0.05,
            zero_frac: 0.2,
            window: 5,
            m_max: 6,
            confidence_min: 2.0,
        }
    }
}

/// A zero of the trace with its estimated vanishing order.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ZeroAnnotation {
    /// Sub-grid arclength of the zero.
    pub location: f64,
    /// Estimated minimal vanishing order.
    pub order: usize,
    /// Ratio of second-best to best fit residual.
    pub confidence: f64,
}

/// Zeros and the arcs they cut the closed curve into.
#[derive(Debug, Clone)]
pub struct ZeroSet {
    /// Refined zero locations, ascending in arclength.
    pub locations: Vec<f64>,
    /// Component index per boundary node (0 when there are no zeros).
    pub component_of: Vec<usize>,
    pub n_components: usize,
}

/// Signed trace recovered from a squared one.
#[derive(Debug, Clone)]
pub struct SignedTrace {
    pub values: Vec<f64>,
    pub zeros: Vec<ZeroAnnotation>,
    pub seed_node: usize,
}

fn validate_square(boundary: &BoundaryMesh, sq: &[f64]) -> Result<f64> {
    assert_eq!(sq.len(), boundary.len());
    assert!(boundary.closed, "sign recovery needs a closed boundary");
    let max = sq.iter().fold(0.0_f64, |m, &v| m.max(v));
    if !(max > 0.0) {
        return Err(Error::ZeroFunction);
    }
    Ok(max)
}

/// Signed arclength offset from `origin` to `s`, wrapped to
/// `(-perimeter/2, perimeter/2]`.
fn cyclic_offset(s: f64, origin: f64, perimeter: f64) -> f64 {
    let mut d = s - origin;
    while d > 0.5 * perimeter {
        d -= perimeter;
    }
    while d <= -0.5 * perimeter {
        d += perimeter;
    }
    d
}

/// Least-squares quadratic `c0 + c1 u + c2 u^2`.
fn fit_quadratic(us: &[f64], vs: &[f64]) -> Option<[f64; 3]> {
    let n = us.len();
    if n < 3 {
        return None;
    }
    let mut s = [0.0_f64; 5];
    let mut t = [0.0_f64; 3];
    for (&u, &v) in us.iter().zip(vs.iter()) {
        let mut p = 1.0;
        for k in 0..5 {
            s[k] += p;
            if k < 3 {
                t[k] += v * p;
            }
            p *= u;
        }
    }
    let a = Mat::from_rows(
        3,
        3,
        vec![s[0], s[1], s[2], s[1], s[2], s[3], s[2], s[3], s[4]],
    );
    let lu = lu_factor(&a).ok()?;
    let c = lu.solve(&t);
    Some([c[0], c[1], c[2]])
}

struct RefinedMinimum {
    location: f64,
    /// Whether the fitted minimum passed the vanishing criterion (below
    /// `tau_rel * max` in `f^2` units, or a small fraction of the fitted
    /// window-edge value).
    vanishes: bool,
}

/// Fit `(f^2)^(1/m)` with a parabola around node `i0` for each candidate
/// `m`, keep the best-fitting one.
fn refine_minimum(
    boundary: &BoundaryMesh,
    sq: &[f64],
    i0: usize,
    cfg: &SignConfig,
    max: f64,
) -> Option<RefinedMinimum> {
    let count = boundary.len();
    let p = boundary.perimeter;
    let s0 = boundary.nodes[i0].s;
    // Tight stencil on purpose: a wide window reaches into the steep side
    // of an asymmetric zero and drags the fitted vertex out of range. Five
    // points are enough to place a parabola vertex.
    let w = cfg.window.min(2).max(1);
    let mut us = Vec::with_capacity(2 * w + 1);
    let mut idx = Vec::with_capacity(2 * w + 1);
    for off in -(w as isize)..=(w as isize) {
        let i = ((i0 as isize + off).rem_euclid(count as isize)) as usize;
        us.push(cyclic_offset(boundary.nodes[i].s, s0, p));
        idx.push(i);
    }
    let mut best: Option<(f64, RefinedMinimum)> = None;
    // Even transforms only: this path is reached when the signed-root fit
    // has already ruled out a crossing, so the zero (if any) touches from
    // one side and `(f^2)^(1/m)` is smooth precisely for even `m`. Odd
    // transforms of a tangential dip can fit a parabola dipping below
    // zero and fake a vanishing minimum.
    for m in (2..=cfg.m_max.max(2)).step_by(2) {
        let vs: Vec<f64> = idx
            .iter()
            .map(|&i| libm::pow(sq[i], 1.0 / m as f64))
            .collect();
        let Some([c0, c1, c2]) = fit_quadratic(&us, &vs) else {
            continue;
        };
        if c2 <= 0.0 {
            continue;
        }
        let u_star = -c1 / (2.0 * c2);
        let half_span = us.iter().fold(0.0_f64, |a, &u| a.max(u.abs()));
        if u_star.abs() > half_span {
            continue;
        }
        let v_min = c0 - c1 * c1 / (4.0 * c2);
        // Relative fit residual in the transformed coordinate.
        let mut res = 0.0;
        let mut scale = 0.0;
        for (&u, &v) in us.iter().zip(vs.iter()) {
            let pv = c0 + c1 * u + c2 * u * u;
            res += (pv - v) * (pv - v);
            scale += v * v;
        }
        if scale == 0.0 {
            continue;
        }
        let rel = res / scale;
        let edge = c2 * half_span * half_span;
        let depth_ratio = if edge > 0.0 { v_min / edge } else { 1.0 };
        let min_sq = libm::pow(v_min.max(0.0), m as f64);
        let mut location = s0 + u_star;
        while location >= p {
            location -= p;
        }
        while location < 0.0 {
            location += p;
        }
        let cand = RefinedMinimum {
            location,
            vanishes: min_sq < cfg.tau_rel * max || depth_ratio < cfg.zero_frac,
        };
        // A vanishing candidate beats any non-vanishing one: no single
        // transform fits an asymmetric crossing well, and missing a zero
        // breaks the sign walk outright, while the order estimate is
        // re-derived (with its own confidence gate) downstream anyway.
        let better = match &best {
            None => true,
            Some((r, c)) => (cand.vanishes && !c.vanishes) || (cand.vanishes == c.vanishes && rel < *r),
        };
        if better {
            best = Some((rel, cand));
        }
    }
    best.map(|(_, c)| c)
}

/// Value at `x` of the Lagrange interpolant through `(us, vs)`.
fn lagrange_eval(us: &[f64], vs: &[f64], x: f64) -> f64 {
    let n = us.len();
    let mut acc = 0.0;
    for k in 0..n {
        let mut w = vs[k];
        for j in 0..n {
            if j != k {
                w *= (x - us[j]) / (us[k] - us[j]);
            }
        }
        acc += w;
    }
    acc
}

/// Root of the Newton-form interpolant through `(us, vs)` inside the
/// bracket `[us[lo], us[hi]]`; the bracket endpoints must have opposite
/// (or zero) values.
fn polish_root(us: &[f64], vs: &[f64], lo: usize, hi: usize) -> Option<f64> {
    let n = us.len();
    // Divided differences.
    let mut coef = vs.to_vec();
    for level in 1..n {
        for k in (level..n).rev() {
            coef[k] = (coef[k] - coef[k - 1]) / (us[k] - us[k - level]);
        }
    }
    let eval = |x: f64| -> f64 {
        let mut acc = coef[n - 1];
        for k in (0..n - 1).rev() {
            acc = acc * (x - us[k]) + coef[k];
        }
        acc
    };
    let (mut a, mut b) = (us[lo], us[hi]);
    let (fa, fb) = (eval(a), eval(b));
    if fa == 0.0 {
        return Some(a);
    }
    if fb == 0.0 {
        return Some(b);
    }
    if fa * fb > 0.0 {
        return None;
    }
    let positive_left = fa > 0.0;
    for _ in 0..80 {
        let mid = 0.5 * (a + b);
        if mid <= a || mid >= b {
            break;
        }
        let fm = eval(mid);
        if fm == 0.0 {
            return Some(mid);
        }
        if (fm > 0.0) == positive_left {
            a = mid;
        } else {
            b = mid;
        }
    }
    Some(0.5 * (a + b))
}

/// Sharpen the location of a crossing zero by fitting the signed root.
///
/// The vertex of the quadratic fit to `f^2` is biased by O(h) when the
/// crossing is shallow and asymmetric (the cubic term `f' f'' u^3`
/// dominates near small `f'`), which can hand the node next to the zero
/// to the wrong arc. Re-signing `sqrt(f^2)` on each side of the candidate
/// node recovers samples of the smooth trace (up to a harmless global
/// flip); the node itself is excluded because its own side is exactly
/// what is being determined. The root of the interpolant through the
/// re-signed samples then pins the crossing to roundoff. A non-crossing
/// (even-order) zero fits the sign pattern badly and keeps the vertex
/// location instead.
fn refine_crossing(boundary: &BoundaryMesh, sq: &[f64], i0: usize) -> Option<f64> {
    let count = boundary.len();
    let p = boundary.perimeter;
    let s0 = boundary.nodes[i0].s;
    let mut us = Vec::with_capacity(6);
    let mut vs = Vec::with_capacity(6);
    for off in -3_isize..=3 {
        if off == 0 {
            continue;
        }
        let i = ((i0 as isize + off).rem_euclid(count as isize)) as usize;
        let g = libm::sqrt(sq[i]);
        us.push(cyclic_offset(boundary.nodes[i].s, s0, p));
        vs.push(if off < 0 { g } else { -g });
    }
    // Crossing plausibility: the signed samples must sit on one smooth
    // curve through zero; a quadratic residual is enough to tell them
    // from the |f|-shaped pattern of an even-order zero.
    let [c0, c1, c2] = fit_quadratic(&us, &vs)?;
    let mut res = 0.0;
    let mut scale = 0.0;
    for (&u, &v) in us.iter().zip(vs.iter()) {
        let pv = c0 + c1 * u + c2 * u * u;
        res += (pv - v) * (pv - v);
        scale += v * v;
    }
    if scale == 0.0 || res / scale >= 1e-2 {
        return None;
    }
    // Consistency with the held-out centre node: a genuine crossing's
    // interpolant reproduces |f| there; re-signing a wide tangential dip
    // also fakes a plausible straight-line crossing, but then the
    // interpolant passes near zero while the node value does not.
    let g0 = libm::sqrt(sq[i0]);
    let predicted = lagrange_eval(&us, &vs, 0.0).abs();
    let window_scale = vs.iter().fold(0.0_f64, |a, &v| a.max(v.abs()));
    if (predicted - g0).abs() > 0.2 * window_scale {
        return None;
    }
    // Bracket between the nearest re-signed neighbours (indices 2 and 3
    // after dropping the centre node).
    let u = polish_root(&us, &vs, 2, 3)?;
    Some(u).map(|u| {
        let mut location = s0 + u;
        while location >= p {
            location -= p;
        }
        while location < 0.0 {
            location += p;
        }
        location
    })
}

/// Locate the zeros of the trace and partition the curve into arcs.
///
/// Candidates are cyclic local minima of `f^2` below the coarse screen;
/// each is refined by an even-polynomial fit and kept when the fitted
/// minimum actually vanishes (below `tau_rel * max` or a small fraction of
/// the fitted edge value).
pub fn detect_zeros(boundary: &BoundaryMesh, sq: &[f64], cfg: &SignConfig) -> Result<ZeroSet> {
    let max = validate_square(boundary, sq)?;
    let count = boundary.len();
    let screen = cfg.screen_rel.max(cfg.tau_rel) * max;
    let mut locations = Vec::new();
    for i in 0..count {
        let prev = sq[(i + count - 1) % count];
        let next = sq[(i + 1) % count];
        let v = sq[i];
        // Local minimum; plateau ties break toward the earlier node.
        let is_min = (v < prev && v <= next) || (v <= prev && v < next) || (v == 0.0 && v <= prev && v <= next);
        if !is_min || v >= screen {
            continue;
        }
        // Crossing zeros are certified by the signed-root fit; the
        // fitted-minimum fallback catches even-order (touching) zeros.
        if let Some(z) = refine_crossing(boundary, sq, i) {
            locations.push(z);
        } else if let Some(r) = refine_minimum(boundary, sq, i, cfg, max) {
            if r.vanishes {
                locations.push(r.location);
            }
        }
    }
    locations.sort_by(|a, b| a.partial_cmp(b).unwrap());
    // Merge refinements that landed on the same zero from adjacent nodes.
    let h_typ = boundary.perimeter / count as f64;
    locations.dedup_by(|a, b| (*a - *b).abs() < 0.5 * h_typ);
    if locations.len() >= 2 {
        let first = locations[0] + boundary.perimeter;
        if (first - *locations.last().unwrap()).abs() < 0.5 * h_typ {
            locations.pop();
        }
    }

    let n_components = locations.len().max(1);
    let mut component_of = vec![0usize; count];
    if !locations.is_empty() {
        for (i, node) in boundary.nodes.iter().enumerate() {
            // Component k covers the arc [z_k, z_{k+1}).
            let mut k = match locations
                .binary_search_by(|z| z.partial_cmp(&node.s).unwrap())
            {
                Ok(exact) => exact,
                Err(ins) => (ins + locations.len() - 1) % locations.len(),
            };
            if k >= locations.len() {
                k = locations.len() - 1;
            }
            component_of[i] = k;
        }
    }
    Ok(ZeroSet {
        locations,
        component_of,
        n_components,
    })
}

/// Estimate the vanishing order at a refined zero location by comparing
/// log-log fits `log f^2 = 2m log|s - sbar| + c` across candidate orders.
pub fn estimate_order(
    boundary: &BoundaryMesh,
    sq: &[f64],
    s_bar: f64,
    window: usize,
    m_max: usize,
    confidence_min: f64,
) -> Result<ZeroAnnotation> {
    let max = validate_square(boundary, sq)?;
    let count = boundary.len();
    let p = boundary.perimeter;
    let h_typ = p / count as f64;
    let floor = 1e-250_f64.max(max * 1e-28);
    // Usable samples: within the window, away from the zero itself, above
    // the roundoff floor.
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for (i, node) in boundary.nodes.iter().enumerate() {
        let d = cyclic_offset(node.s, s_bar, p).abs();
        if d < 0.3 * h_typ || d > window as f64 * h_typ {
            continue;
        }
        if sq[i] < floor {
            continue;
        }
        xs.push(libm::log(d));
        ys.push(libm::log(sq[i]));
    }
    if xs.len() < 4 {
        return Err(Error::OrderAmbiguous {
            location: s_bar,
            confidence: 0.0,
        });
    }
    let n = xs.len() as f64;
    let mut residuals = Vec::with_capacity(m_max);
    for m in 1..=m_max {
        let slope = 2.0 * m as f64;
        let c: f64 = xs
            .iter()
            .zip(ys.iter())
            .map(|(x, y)| y - slope * x)
            .sum::<f64>()
            / n;
        let r: f64 = xs
            .iter()
            .zip(ys.iter())
            .map(|(x, y)| {
                let e = y - slope * x - c;
                e * e
            })
            .sum();
        residuals.push(r);
    }
    let mut best_m = 1;
    for m in 2..=m_max {
        if residuals[m - 1] < residuals[best_m - 1] {
            best_m = m;
        }
    }
    let best = residuals[best_m - 1];
    let second = residuals
        .iter()
        .enumerate()
        .filter(|(k, _)| k + 1 != best_m)
        .map(|(_, &r)| r)
        .fold(f64::INFINITY, f64::min);
    let confidence = if best == 0.0 {
        f64::INFINITY
    } else {
        second / best
    };
    if confidence < confidence_min {
        return Err(Error::OrderAmbiguous {
            location: s_bar,
            confidence,
        });
    }
    Ok(ZeroAnnotation {
        location: s_bar,
        order: best_m,
        confidence,
    })
}

/// Recover the signed trace: positive root on the component holding the
/// maximum of `f^2`, sign flipped by `(-1)^m` at each zero crossing while
/// walking the closed curve. The walk must return to `+1`.
pub fn lift_sign(boundary: &BoundaryMesh, sq: &[f64], cfg: &SignConfig) -> Result<SignedTrace> {
    validate_square(boundary, sq)?;
    let zero_set = detect_zeros(boundary, sq, cfg)?;
    let mut zeros = Vec::with_capacity(zero_set.locations.len());
    for &s_bar in &zero_set.locations {
        zeros.push(estimate_order(
            boundary,
            sq,
            s_bar,
            cfg.window,
            cfg.m_max,
            cfg.confidence_min,
        )?);
    }
    // Loop closure: the accumulated sign over the full curve is
    // (-1)^(sum of orders) and must come back to +1.
    let total_order: usize = zeros.iter().map(|z| z.order).sum();
    if total_order % 2 != 0 {
        return Err(Error::ParityInconsistent);
    }

    // First maximum wins so ties cannot flip the global sign between runs.
    let mut seed_node = 0;
    for (i, &v) in sq.iter().enumerate() {
        if v > sq[seed_node] {
            seed_node = i;
        }
    }
    // Sign per component: start at the seed component with +1; crossing
    // zero k (the boundary between components k-1... component k starts at
    // zero k) multiplies by (-1)^order(k).
    let ncomp = zero_set.n_components;
    let mut comp_sign = vec![1.0_f64; ncomp];
    if !zeros.is_empty() {
        let seed_comp = zero_set.component_of[seed_node];
        let mut sign = 1.0;
        for step in 1..ncomp {
            let comp = (seed_comp + step) % ncomp;
            // Walking forward from component comp-1 into comp crosses the
            // zero at the start of comp.
            if zeros[comp].order % 2 == 1 {
                sign = -sign;
            }
            comp_sign[comp] = sign;
        }
        comp_sign[seed_comp] = 1.0;
    }
    let values: Vec<f64> = sq
        .iter()
        .enumerate()
        .map(|(i, &v)| comp_sign[zero_set.component_of[i]] * libm::sqrt(v))
        .collect();
    Ok(SignedTrace {
        values,
        zeros,
        seed_node,
    })
}

/// Testable content of the square-uniqueness lemma: two smooth functions
/// with the same square and finite-order zeros agree up to a global sign.
pub fn verify_square_uniqueness(f: &[f64], g: &[f64]) -> Result<bool> {
    assert_eq!(f.len(), g.len());
    let scale_sq = f.iter().map(|v| v * v).fold(0.0_f64, f64::max).max(1e-300);
    for (a, b) in f.iter().zip(g.iter()) {
        if (a * a - b * b).abs() > 1e-12 * scale_sq {
            return Err(Error::PreconditionViolated);
        }
    }
    let scale = libm::sqrt(scale_sq);
    let same = f
        .iter()
        .zip(g.iter())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0_f64, f64::max);
    let flip = f
        .iter()
        .zip(g.iter())
        .map(|(a, b)| (a + b).abs())
        .fold(0.0_f64, f64::max);
    Ok(same <= 1e-10 * scale || flip <= 1e-10 * scale)
}
