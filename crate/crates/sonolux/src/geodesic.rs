//! Geodesic tracing by gradient descent on the travel-time field.

use crate::error::{Error, Result};
use crate::grid::{dist3, dot3, norm3, sub3};
use crate::media::Phantom;
use crate::eikonal::TravelTimeField;

/// Polyline approximation of the geodesic from the source to a target point,
/// with the cumulative travel time along the path.
#[derive(Debug, Clone)]
pub struct Geodesic {
    /// Points ordered from the source `x` to the target `y`.
    pub points: Vec<[f64; 3]>,
    /// Cumulative travel time at each point, `arclen_tau[0] = 0`.
    pub arclen_tau: Vec<f64>,
}

impl Geodesic {
    pub fn total_tau(&self) -> f64 {
        *self.arclen_tau.last().unwrap_or(&0.0)
    }
}

/// Trace the geodesic from `y` back to the source of `tt` by integrating
/// the descent ODE with explicit midpoint steps of spatial length `h/2`,
/// then return it reversed (from the source to `y`).
///
/// The cumulative travel time is accumulated as the line integral of the
/// slowness, an independent check against the field value `tau(y)`.
pub fn trace_geodesic(tt: &TravelTimeField, phantom: &Phantom, y: [f64; 3]) -> Result<Geodesic> {
    let tau_y = tt.value_at(y)?;
    if !tau_y.is_finite() {
        return Err(Error::Numerical(format!("travel time not finite at {y:?}")));
    }
    let h = tt.geom.spacing;
    let step = 0.5 * h;
    let src = tt.source;

    // Degenerate case: target at (or within a step of) the source.
    if dist3(y, src) <= step {
        return Ok(Geodesic { points: vec![y], arclen_tau: vec![0.0] });
    }

    let c_max = phantom.c.max();
    let max_steps = (10.0 * tau_y * c_max / step).ceil() as usize + 64;

    // Backtrack from y to the source.
    let mut pts_rev: Vec<[f64; 3]> = vec![y];
    let mut cur = y;
    let mut reached = false;
    for _ in 0..max_steps {
        if dist3(cur, src) <= h {
            reached = true;
            break;
        }
        let dir = descent_direction(tt, cur)?;
        let mid = [
            cur[0] - 0.5 * step * dir[0],
            cur[1] - 0.5 * step * dir[1],
            cur[2] - 0.5 * step * dir[2],
        ];
        let dir_mid = if tt.geom.contains(mid) { descent_direction(tt, mid)? } else { dir };
        let mut next = [
            cur[0] - step * dir_mid[0],
            cur[1] - step * dir_mid[1],
            cur[2] - step * dir_mid[2],
        ];
        if !tt.geom.contains(next) {
            // Clamp to the grid; a path pushing outside signals a
            // hypothesis violation which the step bound below reports.
            let hi = tt.geom.max_corner();
            for a in 0..3 {
                next[a] = next[a].clamp(tt.geom.origin[a], hi[a]);
            }
        }
        // Guard against stagnation in flat regions.
        if dist3(next, cur) < 1e-6 * step {
            break;
        }
        pts_rev.push(next);
        cur = next;
    }
    if !reached && dist3(cur, src) > h {
        return Err(Error::Numerical(format!(
            "geodesic from {y:?} failed to reach the source within {max_steps} steps \
             (geodesic hypotheses violated?)"
        )));
    }
    pts_rev.push(src);

    // Reverse to source-to-target order and accumulate the slowness integral.
    pts_rev.reverse();
    let mut arclen = Vec::with_capacity(pts_rev.len());
    arclen.push(0.0);
    let mut acc = 0.0;
    for w in pts_rev.windows(2) {
        let (a, b) = (w[0], w[1]);
        let mid = [(a[0] + b[0]) / 2.0, (a[1] + b[1]) / 2.0, (a[2] + b[2]) / 2.0];
        let c_mid = phantom.c.interp(mid)?;
        acc += dist3(a, b) / c_mid;
        arclen.push(acc);
    }
    Ok(Geodesic { points: pts_rev, arclen_tau: arclen })
}

/// Unit descent direction `grad tau / |grad tau|` at `p`.
fn descent_direction(tt: &TravelTimeField, p: [f64; 3]) -> Result<[f64; 3]> {
    let (g, _) = tt.grad_at(p)?;
    let n = norm3(g);
    if n < 1e-14 {
        return Err(Error::Numerical(format!("vanishing travel-time gradient at {p:?}")));
    }
    Ok([g[0] / n, g[1] / n, g[2] / n])
}

/// Result of the heuristic geodesic-hypotheses check.
#[derive(Debug, Clone)]
pub struct HypothesesReport {
    pub samples: usize,
    pub failures: Vec<([f64; 3], String)>,
}

impl HypothesesReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

/// Heuristic check of the unique-geodesic hypotheses: for `samples`
/// deterministically sampled points inside the domain, tracing must converge
/// and the traced path must stay inside the domain box (convexity surrogate).
/// This is a spot check, not a proof.
pub fn check_geodesic_hypotheses(
    tt: &TravelTimeField,
    phantom: &Phantom,
    samples: usize,
) -> HypothesesReport {
    let mut failures = Vec::new();
    let (lo, hi) = phantom.omega_domain.corners(&phantom.geom);
    let mut state = 0x9e3779b97f4a7c15u64;
    let mut next_unit = || {
        // splitmix64 stream; deterministic sampling.
        state = state.wrapping_add(0x9e3779b97f4a7c15);
        let mut z = state;
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
        z = z ^ (z >> 31);
        (z >> 11) as f64 / (1u64 << 53) as f64
    };
    for _ in 0..samples {
        let y = [
            lo[0] + (hi[0] - lo[0]) * next_unit(),
            lo[1] + (hi[1] - lo[1]) * next_unit(),
            lo[2] + (hi[2] - lo[2]) * next_unit(),
        ];
        match trace_geodesic(tt, phantom, y) {
            Err(e) => failures.push((y, e.to_string())),
            Ok(geo) => {
                let slack = phantom.geom.spacing;
                let escaped = geo.points.iter().any(|p| {
                    (0..3).any(|a| p[a] < lo[a] - slack || p[a] > hi[a] + slack)
                });
                if escaped {
                    failures.push((y, "traced path left the domain box".into()));
                }
            }
        }
    }
    HypothesesReport { samples, failures }
}

/// Trapezoid line integral of an interpolated vector field along a geodesic:
/// `int <F, d xi>`.
pub fn line_integral_vector(
    geo: &Geodesic,
    field_at: impl Fn([f64; 3]) -> Result<[f64; 3]>,
) -> Result<f64> {
    if geo.points.len() < 2 {
        return Ok(0.0);
    }
    let mut acc = 0.0;
    let mut prev = field_at(geo.points[0])?;
    for w in geo.points.windows(2) {
        let cur = field_at(w[1])?;
        let d = sub3(w[1], w[0]);
        acc += 0.5 * (dot3(prev, d) + dot3(cur, d));
        prev = cur;
    }
    Ok(acc)
}

/// Trapezoid integral of a scalar integrand against `d tau` along a geodesic:
/// `int q(xi) d tau(xi)` using the accumulated travel-time parameter.
pub fn line_integral_dtau(
    geo: &Geodesic,
    integrand_at: impl Fn([f64; 3], f64) -> Result<f64>,
) -> Result<f64> {
    if geo.points.len() < 2 {
        return Ok(0.0);
    }
    let mut acc = 0.0;
    let mut prev = integrand_at(geo.points[0], geo.arclen_tau[0])?;
    for i in 1..geo.points.len() {
        let cur = integrand_at(geo.points[i], geo.arclen_tau[i])?;
        let dt = geo.arclen_tau[i] - geo.arclen_tau[i - 1];
        acc += 0.5 * (prev + cur) * dt;
        prev = cur;
    }
    Ok(acc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eikonal::solve_travel_time;
    use crate::media::generators;

    #[test]
    fn constant_speed_gives_straight_segment() {
        let phantom = generators::constant(33, 10.0, 1.0, 1.0, 1.0).unwrap();
        let x = [5.0, 5.0, 1.25];
        let tt = solve_travel_time(&phantom, x).unwrap();
        let y = [6.25, 6.875, 6.25];
        let geo = trace_geodesic(&tt, &phantom, y).unwrap();
        assert_eq!(geo.points.first().unwrap(), &tt.source);
        let last = geo.points.last().unwrap();
        assert!(dist3(*last, y) < 1e-12);
        // Max deviation from the chord stays within one grid step.
        let d = sub3(y, tt.source);
        let len = norm3(d);
        let mut max_dev = 0.0f64;
        for p in &geo.points {
            let v = sub3(*p, tt.source);
            let t = dot3(v, d) / (len * len);
            let proj = [tt.source[0] + t * d[0], tt.source[1] + t * d[1], tt.source[2] + t * d[2]];
            max_dev = max_dev.max(dist3(*p, proj));
        }
        assert!(max_dev <= phantom.geom.spacing, "deviation {max_dev}");
        // Strictly increasing cumulative tau, total consistent with the field.
        for w in geo.arclen_tau.windows(2) {
            assert!(w[1] > w[0]);
        }
        let field_tau = tt.value_at(y).unwrap();
        assert!((geo.total_tau() - field_tau).abs() / field_tau < 0.01);
    }

    #[test]
    fn degenerate_target_at_source() {
        let phantom = generators::constant(17, 10.0, 1.0, 1.0, 1.0).unwrap();
        let tt = solve_travel_time(&phantom, [5.0, 5.0, 2.5]).unwrap();
        let geo = trace_geodesic(&tt, &phantom, tt.source).unwrap();
        assert_eq!(geo.points.len(), 1);
        assert_eq!(geo.total_tau(), 0.0);
    }

    #[test]
    fn linear_ramp_self_consistency() {
        // Speed ramp c = c0 (1 + alpha y3): traced total tau matches the
        // solved field within 1%.
        // Module-level test field; the shell invariant is not re-validated here.
        let mut phantom = generators::constant(33, 10.0, 1.0, 1.0, 1.0).unwrap();
        let geom = phantom.geom;
        phantom.c = crate::grid::Grid3::from_fn(geom, |p| 1.0 + 0.05 * p[2]);
        let x = [5.0, 5.0, 0.3125];
        let tt = solve_travel_time(&phantom, x).unwrap();
        let y = [6.25, 5.625, 6.875];
        let geo = trace_geodesic(&tt, &phantom, y).unwrap();
        let field_tau = tt.value_at(y).unwrap();
        let rel = (geo.total_tau() - field_tau).abs() / field_tau;
        assert!(rel < 0.01, "relative mismatch {rel}");
    }

    #[test]
    fn hypotheses_check_passes_on_constant_and_reports_on_lens() {
        let phantom = generators::constant(25, 10.0, 1.0, 1.0, 1.0).unwrap();
        let x = [5.0, 5.0, 1.6667];
        let tt = solve_travel_time(&phantom, x).unwrap();
        let report = check_geodesic_hypotheses(&tt, &phantom, 40);
        assert!(report.passed(), "failures: {:?}", report.failures);

        // Vacuous pass on an empty sample set.
        let report = check_geodesic_hypotheses(&tt, &phantom, 0);
        assert!(report.passed());

        // A strong lens bends rays; expect reported failures.
        let lens = generators::strong_lens(25, 10.0).unwrap();
        let tt = solve_travel_time(&lens, x).unwrap();
        let report = check_geodesic_hypotheses(&tt, &lens, 60);
        assert!(!report.passed(), "lens phantom unexpectedly passed");
    }

    #[test]
    fn exact_form_line_integral_matches_log_density() {
        // int grad(log rho) . dxi = log rho(y) - log rho(x) for smooth rho.
        let beta = [0.02, -0.015, 0.01];
        let phantom = generators::exponential_density(33, 10.0, 1.0, 1.0, beta).unwrap();
        let x = [5.0, 5.0, 1.25];
        let tt = solve_travel_time(&phantom, x).unwrap();
        let log_rho = crate::grid::Grid3 {
            geom: phantom.geom,
            values: phantom.rho.values.iter().map(|v| v.ln()).collect(),
        };
        let grad_log_rho = crate::grid::VecField3::gradient_of(&log_rho);
        let y = [5.9, 5.4, 4.7];
        let geo = trace_geodesic(&tt, &phantom, y).unwrap();
        let integral = line_integral_vector(&geo, |p| grad_log_rho.interp(p)).unwrap();
        let exact = phantom.rho.interp(y).unwrap().ln() - phantom.rho.interp(tt.source).unwrap().ln();
        assert!(
            (integral - exact).abs() <= 0.01 * exact.abs().max(0.01),
            "integral {integral} vs exact {exact}"
        );
    }
}
