//! Geodesic progressing-wave expansion of the acoustic Green's kernel.
//!
//! The kernel separates into a singular wavefront term and smooth tails,
//! `G(x,t,y) = sum_{k>=-1} alpha_k(x,y) Theta_k(t^2 - tau^2(x,y))`. The
//! wavefront amplitude combines a geometric-spreading determinant factor
//! with the exponential of half the geodesic integral of `grad log rho`;
//! the higher coefficients follow by a recurrence of geodesic integrals.
//!
//! For a fixed boundary source the coefficients are computed as grid fields:
//! the mixed second derivatives of `tau^2` (one derivative in the source,
//! one in the field point) come from six extra eikonal solves at perturbed
//! sources, and all line integrals are trapezoid sums along traced geodesics.

use rayon::prelude::*;

use crate::eikonal::{solve_travel_time, TravelTimeField};
use crate::error::{Error, Result};
use crate::geodesic::trace_geodesic;
use crate::grid::{dist3, dot3, Grid3, GridGeometry, VecField3};
use crate::media::Phantom;

/// `Theta_0` is the unit step at zero; `Theta_k(t) = t^k/k! * Theta_0(t)`.
///
/// The `k = -1` Dirac term is handled symbolically by [`GreenEval`];
/// requesting it pointwise is an error.
pub fn theta_k(k: i64, t: f64) -> Result<f64> {
    if k < 0 {
        return Err(Error::Config(
            "theta_k: the k = -1 Dirac term has no pointwise values; use GreenEval".into(),
        ));
    }
    if t < 0.0 {
        return Ok(0.0);
    }
    let mut factorial = 1.0;
    for i in 2..=k {
        factorial *= i as f64;
    }
    Ok(t.powi(k as i32) / factorial)
}

/// Number of grid cells around the source that stay masked in the
/// coefficient fields.
pub const SOURCE_MASK_CELLS: f64 = 2.0;

/// Kernel coefficient fields for a fixed boundary source.
#[derive(Debug, Clone)]
pub struct KernelCoefficients {
    pub source: [f64; 3],
    pub k_max: usize,
    pub geom: GridGeometry,
    /// Wavefront amplitude `alpha_{-1}`.
    pub alpha_minus1: Grid3,
    /// Smooth coefficients `alpha_0 .. alpha_{k_max}`.
    pub alpha: Vec<Grid3>,
    /// Square root of the mixed-derivative determinant.
    pub det_factor: Grid3,
    /// Geodesic integral of `grad log rho` from the source to each node.
    pub rho_line_integral: Grid3,
    /// Node validity: interior, frozen, positive determinant, traced, and
    /// outside the source mask.
    pub valid: Vec<bool>,
}

/// Evaluation of the truncated kernel at one field point: the Dirac
/// wavefront is kept symbolic as `singular_coeff * delta(t - singular_time)`,
/// the smooth tail is a polynomial in `t^2 - tau^2` cut off at `k_max`.
#[derive(Debug, Clone)]
pub struct GreenEval {
    /// Wavefront arrival time `tau(x,y)`.
    pub singular_time: f64,
    /// Weight of `delta(t - tau)`: `alpha_{-1} / (2 tau)`.
    pub singular_coeff: f64,
    /// Interpolated `alpha_0 .. alpha_{k_max}`.
    pub alphas: Vec<f64>,
}

impl GreenEval {
    /// Smooth part `sum_k alpha_k Theta_k(t^2 - tau^2)`; zero for `t` before
    /// the wavefront.
    pub fn smooth_value(&self, t: f64) -> f64 {
        let arg = t * t - self.singular_time * self.singular_time;
        if arg < 0.0 {
            return 0.0;
        }
        let mut acc = 0.0;
        let mut power = 1.0; // arg^k / k!
        for (k, &a) in self.alphas.iter().enumerate() {
            if k > 0 {
                power *= arg / k as f64;
            }
            acc += a * power;
        }
        acc
    }
}

/// Square root of `det d/dx_i ( -1/2 d(tau^2)/dy_j )` on the grid, from six
/// perturbed-source eikonal solves. Returns the field and a per-node flag
/// that is false where the determinant is not positive (caustic or
/// discretization failure).
pub fn det_factor_field(phantom: &Phantom, x: [f64; 3]) -> Result<(Grid3, Vec<bool>)> {
    let geom = phantom.geom;
    let h = geom.spacing;
    let src_node = geom.nearest_node(x)?;
    let src = geom.node(src_node[0], src_node[1], src_node[2]);

    // Gradients of tau^2 for sources at x +- h e_i.
    let mut grads: Vec<VecField3> = Vec::with_capacity(6);
    for axis in 0..3 {
        for sign in [1.0f64, -1.0] {
            let mut xs = src;
            xs[axis] += sign * h;
            if !geom.contains(xs) {
                return Err(Error::Config(format!(
                    "perturbed source {xs:?} outside grid; keep the source one cell inside"
                )));
            }
            let tt = solve_travel_time(phantom, xs)?;
            let tau_sq = Grid3 {
                geom,
                values: tt.tau.values.iter().map(|t| t * t).collect(),
            };
            grads.push(VecField3::gradient_of(&tau_sq));
        }
    }

    let n = geom.len();
    let mut values = vec![0.0; n];
    let mut ok = vec![false; n];
    let [nx, ny, nz] = geom.dims;
    values
        .par_iter_mut()
        .zip(ok.par_iter_mut())
        .enumerate()
        .for_each(|(idx, (v, flag))| {
            let k = idx / (nx * ny);
            let j = (idx / nx) % ny;
            let i = idx % nx;
            if i == 0 || j == 0 || k == 0 || i == nx - 1 || j == ny - 1 || k == nz - 1 {
                return;
            }
            // m[r][c] = d/dx_r ( -1/2 d tau^2 / dy_c )
            let mut m = [[0.0f64; 3]; 3];
            for axis in 0..3 {
                let plus = &grads[2 * axis].values[idx];
                let minus = &grads[2 * axis + 1].values[idx];
                for c in 0..3 {
                    m[axis][c] = -(plus[c] - minus[c]) / (4.0 * h);
                }
            }
            let det = m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
                - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
                + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
            if det > 0.0 {
                *v = det.sqrt();
                *flag = true;
            }
        });
    Ok((Grid3 { geom, values }, ok))
}

/// Build all kernel coefficient fields for the source `x` up to `k_max`.
pub fn build_kernel_coefficients(
    phantom: &Phantom,
    x: [f64; 3],
    k_max: usize,
) -> Result<KernelCoefficients> {
    let tt = solve_travel_time(phantom, x)?;
    build_kernel_coefficients_with_tt(phantom, &tt, k_max)
}

/// As [`build_kernel_coefficients`] but reusing an existing travel-time
/// solve for the central source.
pub fn build_kernel_coefficients_with_tt(
    phantom: &Phantom,
    tt: &TravelTimeField,
    k_max: usize,
) -> Result<KernelCoefficients> {
    let geom = phantom.geom;
    let h = geom.spacing;
    let src = tt.source;
    let (det_factor, det_ok) = det_factor_field(phantom, src)?;

    let log_rho = Grid3 { geom, values: phantom.rho.values.iter().map(|v| v.ln()).collect() };
    let grad_log_rho = VecField3::gradient_of(&log_rho);

    // Geodesic integral of grad log rho per node, plus trace success flags.
    let n = geom.len();
    let [nx, ny, _] = geom.dims;
    let mut rho_int = vec![0.0f64; n];
    let mut trace_ok = vec![false; n];
    rho_int
        .par_iter_mut()
        .zip(trace_ok.par_iter_mut())
        .enumerate()
        .for_each(|(idx, (v, flag))| {
            let k = idx / (nx * ny);
            let j = (idx / nx) % ny;
            let i = idx % nx;
            let p = geom.node(i, j, k);
            match trace_geodesic(tt, phantom, p) {
                Ok(geo) => {
                    let mut acc = 0.0;
                    let mut prev = match grad_log_rho.interp(geo.points[0]) {
                        Ok(g) => g,
                        Err(_) => return,
                    };
                    for w in geo.points.windows(2) {
                        let cur = match grad_log_rho.interp(w[1]) {
                            Ok(g) => g,
                            Err(_) => return,
                        };
                        let d = crate::grid::sub3(w[1], w[0]);
                        acc += 0.5 * (dot3(prev, d) + dot3(cur, d));
                        prev = cur;
                    }
                    *v = acc;
                    *flag = true;
                }
                Err(_) => {}
            }
        });

    // alpha_{-1} = (1/2pi) det^(1/2) exp( rho integral / 2 ).
    let mut am1 = vec![0.0f64; n];
    let mut valid = vec![false; n];
    for idx in 0..n {
        if det_ok[idx] && trace_ok[idx] && tt.frozen[idx] {
            am1[idx] = det_factor.values[idx] / (2.0 * std::f64::consts::PI)
                * (0.5 * rho_int[idx]).exp();
            valid[idx] = true;
        }
    }
    // Source mask: nodes within SOURCE_MASK_CELLS of the source stay hidden.
    let mask_r = SOURCE_MASK_CELLS * h;
    for [i, j, k] in geom.iter_nodes() {
        let idx = geom.idx(i, j, k);
        if dist3(geom.node(i, j, k), src) < mask_r {
            valid[idx] = false;
        }
    }
    let alpha_minus1 = Grid3 { geom, values: am1 };

    let mut coeffs = KernelCoefficients {
        source: src,
        k_max,
        geom,
        alpha_minus1,
        alpha: Vec::new(),
        det_factor,
        rho_line_integral: Grid3 { geom, values: rho_int },
        valid,
    };
    for k in 0..=k_max {
        let next = alpha_k_field(phantom, tt, &coeffs, k)?;
        coeffs.alpha.push(next);
    }
    Ok(coeffs)
}

/// One level of the coefficient recurrence:
/// `alpha_k(y) = alpha_{-1}(y) / (4 tau^{k+1}) *
///  int_Gamma [c^2 lap(alpha_{k-1}) - c^2 grad(log rho).grad(alpha_{k-1})]
///             / alpha_{-1} * tau'^k dtau'`.
///
/// `coeffs` must already hold levels below `k`. Derivatives of the previous
/// level are central differences on the grid; the integrand is interpolated
/// along the traced geodesic and integrated by the trapezoid rule in the
/// cumulative travel time.
pub fn alpha_k_field(
    phantom: &Phantom,
    tt: &TravelTimeField,
    coeffs: &KernelCoefficients,
    k: usize,
) -> Result<Grid3> {
    let geom = phantom.geom;
    if coeffs.alpha.len() < k {
        return Err(Error::Config(format!(
            "alpha_k_field: level {k} requested but only {} levels available",
            coeffs.alpha.len()
        )));
    }
    let prev: &Grid3 = if k == 0 { &coeffs.alpha_minus1 } else { &coeffs.alpha[k - 1] };

    // Integrand field q = [c^2 lap(prev) - c^2 grad(log rho).grad(prev)] / alpha_{-1}.
    let log_rho = Grid3 { geom, values: phantom.rho.values.iter().map(|v| v.ln()).collect() };
    let grad_log_rho = VecField3::gradient_of(&log_rho);
    let [nx, ny, nz] = geom.dims;
    let n = geom.len();
    let mut q_values = vec![0.0f64; n];
    q_values.par_iter_mut().enumerate().for_each(|(idx, q)| {
        let kk = idx / (nx * ny);
        let jj = (idx / nx) % ny;
        let ii = idx % nx;
        if ii == 0 || jj == 0 || kk == 0 || ii == nx - 1 || jj == ny - 1 || kk == nz - 1 {
            return;
        }
        let am1 = coeffs.alpha_minus1.values[idx];
        if am1 <= 0.0 {
            return;
        }
        let c = phantom.c.values[idx];
        let lap = prev.node_laplacian(ii, jj, kk);
        let grad_prev = prev.node_gradient(ii, jj, kk);
        let glr = grad_log_rho.values[idx];
        *q = (c * c * lap - c * c * dot3(glr, grad_prev)) / am1;
    });
    let q_field = Grid3 { geom, values: q_values };

    let h = geom.spacing;
    let tau_floor = h / phantom.c.max();
    let mut out = vec![0.0f64; n];
    out.par_iter_mut().enumerate().for_each(|(idx, v)| {
        let kk = idx / (nx * ny);
        let jj = (idx / nx) % ny;
        let ii = idx % nx;
        let p = geom.node(ii, jj, kk);
        let am1_here = coeffs.alpha_minus1.values[idx];
        if am1_here <= 0.0 {
            return;
        }
        let geo = match trace_geodesic(tt, phantom, p) {
            Ok(g) => g,
            Err(_) => return,
        };
        let tau_total = geo.total_tau();
        if tau_total < tau_floor {
            // Too close to the source for the 1/tau^{k+1} division; use the
            // limiting value q(x) * alpha_{-1}(y) / (4 (k+1)).
            if let Ok(q_src) = q_field.interp(p) {
                *v = am1_here * q_src / (4.0 * (k as f64 + 1.0));
            }
            return;
        }
        let mut acc = 0.0;
        let mut prev_val = None;
        for (pt, &t) in geo.points.iter().zip(geo.arclen_tau.iter()) {
            let q = match q_field.interp(*pt) {
                Ok(q) => q,
                Err(_) => return,
            };
            let integrand = q * t.powi(k as i32);
            if let Some((t0, q0)) = prev_val {
                acc += 0.5 * (q0 + integrand) * (t - t0);
            }
            prev_val = Some((t, integrand));
        }
        *v = am1_here / (4.0 * tau_total.powi(k as i32 + 1)) * acc;
    });
    Ok(Grid3 { geom, values: out })
}

impl KernelCoefficients {
    /// True when all eight interpolation corners around `y` are valid.
    pub fn is_valid_at(&self, y: [f64; 3]) -> bool {
        match self.geom.locate(y) {
            Err(_) => false,
            Ok((b, _)) => {
                let [i, j, k] = b;
                [
                    (i, j, k),
                    (i + 1, j, k),
                    (i, j + 1, k),
                    (i + 1, j + 1, k),
                    (i, j, k + 1),
                    (i + 1, j, k + 1),
                    (i, j + 1, k + 1),
                    (i + 1, j + 1, k + 1),
                ]
                .iter()
                .all(|&(a, b_, c)| self.valid[self.geom.idx(a, b_, c)])
            }
        }
    }

    /// Interpolated wavefront amplitude at `y`; errors in masked regions.
    pub fn alpha_minus1_at(&self, y: [f64; 3]) -> Result<f64> {
        if !self.is_valid_at(y) {
            return Err(Error::Masked(format!("alpha_{{-1}} masked at {y:?}")));
        }
        self.alpha_minus1.interp(y)
    }

    /// Interpolated smooth coefficient `alpha_k` at `y`.
    pub fn alpha_at(&self, k: usize, y: [f64; 3]) -> Result<f64> {
        if k >= self.alpha.len() {
            return Err(Error::Config(format!("alpha_{k} not built (k_max = {})", self.k_max)));
        }
        if !self.is_valid_at(y) {
            return Err(Error::Masked(format!("alpha_{k} masked at {y:?}")));
        }
        self.alpha[k].interp(y)
    }
}

/// Assemble the truncated kernel evaluation at `y`: the symbolic wavefront
/// weight `alpha_{-1}/(2 tau)` (from `delta(t^2-tau^2) = delta(t-tau)/(2t)`)
/// and the interpolated smooth coefficients.
pub fn green_eval(
    coeffs: &KernelCoefficients,
    tt: &TravelTimeField,
    y: [f64; 3],
) -> Result<GreenEval> {
    let am1 = coeffs.alpha_minus1_at(y)?;
    let tau = tt.value_at(y)?;
    if tau <= 0.0 {
        return Err(Error::Masked("green_eval at the source point".into()));
    }
    let mut alphas = Vec::with_capacity(coeffs.alpha.len());
    for k in 0..coeffs.alpha.len() {
        alphas.push(coeffs.alpha_at(k, y)?);
    }
    Ok(GreenEval { singular_time: tau, singular_coeff: am1 / (2.0 * tau), alphas })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::media::generators;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    #[test]
    fn theta_values() {
        assert_eq!(theta_k(0, -1.0).unwrap(), 0.0);
        assert_eq!(theta_k(0, 0.0).unwrap(), 1.0);
        assert_eq!(theta_k(2, 2.0).unwrap(), 2.0);
        // 1.5^3 / 3! computed independently.
        let expected = 1.5f64 * 1.5 * 1.5 / 6.0;
        assert_relative_eq!(theta_k(3, 1.5).unwrap(), expected, max_relative = 1e-15);
        assert_relative_eq!(theta_k(3, 1.5).unwrap(), 0.5625, max_relative = 1e-15);
        assert!(theta_k(-1, 0.3).is_err());
    }

    #[test]
    fn alpha_minus1_constant_medium() {
        // alpha_{-1} = 1/(2 pi c^3) for constant c and rho.
        let c0 = 1.5;
        let phantom = generators::constant(25, 10.0, c0, 1.0, 1.0).unwrap();
        let x = [5.0, 5.0, 1.6667];
        let coeffs = build_kernel_coefficients(&phantom, x, 0).unwrap();
        let expected = 1.0 / (2.0 * PI * c0.powi(3));
        let mut errs = Vec::new();
        for [i, j, k] in phantom.omega_domain.iter_nodes() {
            let idx = phantom.geom.idx(i, j, k);
            if !coeffs.valid[idx] {
                continue;
            }
            errs.push((coeffs.alpha_minus1.values[idx] - expected).abs() / expected);
        }
        assert!(errs.len() > 1000);
        let mut sorted = errs.clone();
        let med = crate::eikonal::median(&mut sorted);
        assert!(med < 0.05, "median alpha_{{-1}} error {med}");
        // Determinant factor alone must match c^{-3}.
        let det_mid = coeffs.det_factor.interp([5.0, 5.0, 5.0]).unwrap();
        assert_relative_eq!(det_mid, c0.powi(-3), max_relative = 1e-6);
    }

    #[test]
    fn alpha_minus1_exponential_density() {
        // rho = rho0 exp(beta . y): alpha_{-1} = (2 pi c^3)^{-1} exp(beta.(y-x)/2).
        let beta = [0.0, 0.0, 0.06];
        let phantom = crate::testutil::pure_exponential_phantom(25, 10.0, 1.0, 1.0, beta);
        let x = [5.0, 5.0, 1.6667];
        let coeffs = build_kernel_coefficients(&phantom, x, 0).unwrap();
        for y in [[5.0, 5.0, 3.75], [5.4167, 4.5833, 4.5833], [5.0, 5.8333, 5.0]] {
            let am1 = coeffs.alpha_minus1_at(y).unwrap();
            let expected =
                1.0 / (2.0 * PI) * ((y[2] - coeffs.source[2]) * beta[2] / 2.0).exp();
            assert_relative_eq!(am1, expected, max_relative = 0.02);
        }
    }

    #[test]
    fn alpha_minus1_masked_near_source() {
        let phantom = generators::constant(17, 10.0, 1.0, 1.0, 1.0).unwrap();
        let x = [5.0, 5.0, 2.5];
        let coeffs = build_kernel_coefficients(&phantom, x, 0).unwrap();
        let near = [5.0, 5.0, 2.5 + 0.9 * phantom.geom.spacing];
        assert!(matches!(coeffs.alpha_minus1_at(near), Err(Error::Masked(_))));
    }

    #[test]
    fn alpha0_vanishes_for_constant_medium() {
        let c0 = 1.2;
        let phantom = generators::constant(25, 10.0, c0, 1.0, 1.0).unwrap();
        let x = [5.0, 5.0, 1.6667];
        let coeffs = build_kernel_coefficients(&phantom, x, 0).unwrap();
        let scale = 1.0 / (2.0 * PI * c0.powi(3));
        for [i, j, k] in phantom.omega_domain.iter_nodes() {
            let idx = phantom.geom.idx(i, j, k);
            if !coeffs.valid[idx] {
                continue;
            }
            let a0 = coeffs.alpha[0].values[idx];
            assert!(a0.abs() <= 1e-3 * scale, "alpha_0 = {a0} at [{i},{j},{k}]");
        }
    }

    #[test]
    fn alpha_k_zero_propagates() {
        let phantom = generators::constant(17, 10.0, 1.0, 1.0, 1.0).unwrap();
        let x = [5.0, 5.0, 2.5];
        let tt = solve_travel_time(&phantom, x).unwrap();
        let mut coeffs = build_kernel_coefficients_with_tt(&phantom, &tt, 0).unwrap();
        // Force the previous level to exactly zero; the next must vanish.
        coeffs.alpha[0] = Grid3::constant(phantom.geom, 0.0);
        let a1 = alpha_k_field(&phantom, &tt, &coeffs, 1).unwrap();
        assert!(a1.values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn alpha0_matches_closed_form_for_exponential_density() {
        // For rho = rho0 exp(beta.y), c constant:
        // q/alpha_{-1} = -c^2 |beta|^2 / 4 (constant), so
        // alpha_0 = -alpha_{-1} c^2 |beta|^2 / 16, and the dense straight-line
        // quadrature of the same constant integrand gives the same value.
        let beta = [0.0, 0.0, 0.08];
        let c0 = 1.0;
        let phantom = crate::testutil::pure_exponential_phantom(33, 10.0, c0, 1.0, beta);
        let x = [5.0, 5.0, 1.25];
        let coeffs = build_kernel_coefficients(&phantom, x, 0).unwrap();
        let y = [5.0, 5.0, 4.0625];
        let am1_y = coeffs.alpha_minus1_at(y).unwrap();
        let closed_form = -am1_y * c0 * c0 * (beta[2] * beta[2]) / 16.0;
        let a0 = coeffs.alpha_at(0, y).unwrap();
        let dense = {
            let n = 4000;
            let tau_total = crate::grid::dist3(y, coeffs.source) / c0;
            let q_const = -c0 * c0 * beta[2] * beta[2] / 4.0;
            let dt = tau_total / n as f64;
            let integral: f64 = (0..n).map(|_| q_const * dt).sum();
            am1_y / (4.0 * tau_total) * integral
        };
        assert_relative_eq!(a0, closed_form, max_relative = 0.02);
        assert_relative_eq!(a0, dense, max_relative = 0.02);
    }

    #[test]
    fn green_eval_matches_free_space_kernel() {
        // Constant medium: singular coefficient is 1/(4 pi c^2 r), matching
        // delta(t - r/c) / (4 pi c^2 r).
        let c0 = 2.0;
        let phantom = generators::constant(25, 10.0, c0, 1.0, 1.0).unwrap();
        let x = [5.0, 5.0, 1.6667];
        let tt = solve_travel_time(&phantom, x).unwrap();
        let coeffs = build_kernel_coefficients_with_tt(&phantom, &tt, 2).unwrap();
        let y = [5.8333, 4.5833, 5.4167];
        let ev = green_eval(&coeffs, &tt, y).unwrap();
        let r = crate::grid::dist3(y, tt.source);
        let expected = 1.0 / (4.0 * PI * c0 * c0 * r);
        assert_relative_eq!(ev.singular_coeff, expected, max_relative = 0.05);
        // Causality: zero smooth value before the arrival.
        assert_eq!(ev.smooth_value(0.5 * ev.singular_time), 0.0);
        assert_eq!(ev.smooth_value(0.999 * ev.singular_time), 0.0);
        // K_max = 0 and K_max = 2 agree before the front, differ only after.
        let ev0 = GreenEval { alphas: ev.alphas[..1].to_vec(), ..ev.clone() };
        assert_eq!(ev0.smooth_value(0.9 * ev.singular_time), ev.smooth_value(0.9 * ev.singular_time));
    }

    #[test]
    fn rho_line_integral_is_exact_form() {
        // The integral equals log rho(y) - log rho(x) for smooth rho.
        let beta = [0.01, 0.02, 0.05];
        let phantom = crate::testutil::pure_exponential_phantom(33, 10.0, 1.0, 1.0, beta);
        let x = [5.0, 5.0, 1.25];
        let coeffs = build_kernel_coefficients(&phantom, x, 0).unwrap();
        let mut worst: f64 = 0.0;
        for y in [[5.3, 5.1, 4.2], [4.6, 5.9, 5.0], [5.0, 5.0, 5.9]] {
            let got = coeffs.rho_line_integral.interp(y).unwrap();
            let exact = phantom.rho.interp(y).unwrap().ln()
                - phantom.rho.interp(coeffs.source).unwrap().ln();
            worst = worst.max((got - exact).abs() / exact.abs().max(1e-3));
        }
        assert!(worst <= 0.01, "relative exact-form violation {worst}");
    }

    #[test]
    fn grid_convergence_of_alpha_minus1() {
        // Constant medium: the factored solver makes alpha_{-1} essentially
        // exact at every resolution, so the analytic anchor holds with a
        // wide margin already on coarse grids.
        let beta = [0.0, 0.0, 0.05];
        let x = [5.0, 5.0, 10.0 / 6.0];
        let y = [5.0, 5.0, 35.0 / 6.0];
        for n in [13usize, 25] {
            let phantom = crate::testutil::pure_exponential_phantom(n, 10.0, 1.0, 1.0, beta);
            let coeffs = build_kernel_coefficients(&phantom, x, 0).unwrap();
            let am1 = coeffs.alpha_minus1_at(y).unwrap();
            let expected =
                1.0 / (2.0 * PI) * (beta[2] * (y[2] - coeffs.source[2]) / 2.0).exp();
            let rel = (am1 - expected).abs() / expected;
            assert!(rel < 1e-12, "constant-medium alpha_{{-1}} error {rel} at n={n}");
        }

        // Heterogeneous speed: median determinant-factor error against a
        // fine reference must shrink monotonically with observed order >= 0.8.
        let probes: Vec<[f64; 3]> = {
            let mut v = Vec::new();
            for iz in 0..5 {
                for iy in 0..5 {
                    for ix in 0..5 {
                        v.push([
                            3.125 + 0.9375 * ix as f64,
                            3.125 + 0.9375 * iy as f64,
                            4.0625 + 0.9375 * iz as f64,
                        ]);
                    }
                }
            }
            v
        };
        let reference = {
            let phantom = generators::speed_bump(97, 10.0, 1.0, 0.08).unwrap();
            let (det, _) = det_factor_field(&phantom, x).unwrap();
            probes.iter().map(|p| det.interp(*p).unwrap()).collect::<Vec<_>>()
        };
        let mut meds = Vec::new();
        let mut hs = Vec::new();
        for n in [17usize, 25, 33, 49] {
            let phantom = generators::speed_bump(n, 10.0, 1.0, 0.08).unwrap();
            let (det, _) = det_factor_field(&phantom, x).unwrap();
            let mut errs: Vec<f64> = probes
                .iter()
                .zip(&reference)
                .map(|(p, r)| (det.interp(*p).unwrap() - r).abs())
                .collect();
            meds.push(crate::eikonal::median(&mut errs));
            hs.push(phantom.geom.spacing);
        }
        for w in meds.windows(2) {
            assert!(w[1] < w[0], "median errors not monotone: {meds:?}");
        }
        let order = crate::testutil::loglog_slope(&hs, &meds);
        assert!(order >= 0.8, "observed order {order}, errors {meds:?}");
    }
}
