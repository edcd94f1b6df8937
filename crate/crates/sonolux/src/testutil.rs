//! Shared helpers for unit tests: analytic phantoms that bypass the
//! background-shell validation so closed-form oracles hold on the whole grid.

use crate::grid::{dot3, sub3, Grid3};
use crate::media::{generators, Phantom};

/// Pure exponential density `rho0 * exp(beta . (y - center))` on the whole
/// grid with constant speed. Closed-form kernel oracles hold everywhere.
/// The boundary-shell invariant intentionally does not hold; the phantom is
/// not re-validated.
pub(crate) fn pure_exponential_phantom(
    n: usize,
    extent: f64,
    c0: f64,
    rho0: f64,
    beta: [f64; 3],
) -> Phantom {
    let mut phantom = generators::constant(n, extent, c0, rho0, 1.0).unwrap();
    let center = [extent / 2.0; 3];
    let geom = phantom.geom;
    phantom.rho = Grid3::from_fn(geom, |p| rho0 * dot3(beta, sub3(p, center)).exp());
    phantom
}

/// Least-squares slope of `log(y)` against `log(x)`.
pub(crate) fn loglog_slope(xs: &[f64], ys: &[f64]) -> f64 {
    assert_eq!(xs.len(), ys.len());
    let lx: Vec<f64> = xs.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let num: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let den: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
    num / den
}
