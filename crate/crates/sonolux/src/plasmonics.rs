//! Dispersion equation of the driven nanoparticle mode, its exact complex
//! root, the real approximate resonance and the permittivity inversion map.
//!
//! The dispersion function is `f(omega) = eps0 - (eps0 - eps_p(omega)) * lambda`;
//! its zero in the complex plane has closed form, and its dominant (real)
//! part is the resonance frequency at which the frequency sweep of the
//! measured pressure peaks. Inverting the Lorentz model at the detected
//! peak recovers the background permittivity at the particle position.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::media::{lorentz_permittivity, LorentzParams};

/// Inputs of the dispersion equation at one particle position.
#[derive(Debug, Clone, Copy)]
pub struct DispersionContext {
    /// Background permittivity at the particle position (complex).
    pub eps0_at_z: Complex64,
    /// Magnetization-operator eigenvalue of the driven mode, in (0,1).
    pub lambda_n0: f64,
    pub lorentz: LorentzParams,
}

impl DispersionContext {
    pub fn new(eps0_at_z: Complex64, lambda_n0: f64, lorentz: LorentzParams) -> Result<Self> {
        if !(lambda_n0 > 0.0 && lambda_n0 < 1.0) {
            return Err(Error::Config(format!(
                "lambda_n0 must lie strictly in (0,1), got {lambda_n0}"
            )));
        }
        if !(eps0_at_z.re > 0.0) {
            return Err(Error::Config(format!(
                "Re eps0 must be positive, got {}",
                eps0_at_z.re
            )));
        }
        lorentz.validate()?;
        Ok(Self { eps0_at_z, lambda_n0, lorentz })
    }
}

/// Dispersion value `f(omega) = eps0 - (eps0 - eps_p(omega)) * lambda`.
pub fn dispersion_value(ctx: &DispersionContext, omega: f64) -> Result<Complex64> {
    let eps_p = lorentz_permittivity(&ctx.lorentz, omega)?;
    Ok(ctx.eps0_at_z - (ctx.eps0_at_z - eps_p) * ctx.lambda_n0)
}

/// Exact complex root of the dispersion equation,
/// `omega = [i gamma_p + sqrt(-gamma_p^2 + 4 (omega_0^2 +
///    eps_inf lambda omega_p^2 / (eps_inf lambda + (1-lambda) eps0)))] / 2`,
/// with the branch chosen so the real part is positive.
pub fn complex_root(ctx: &DispersionContext) -> Result<Complex64> {
    let lt = &ctx.lorentz;
    let lambda = ctx.lambda_n0;
    let denom = lt.eps_infinity * lambda + (1.0 - lambda) * ctx.eps0_at_z;
    if denom.norm() < 1e-14 {
        return Err(Error::Numerical("degenerate dispersion denominator".into()));
    }
    let inner = Complex64::new(-lt.gamma_p * lt.gamma_p + 4.0 * lt.omega_0 * lt.omega_0, 0.0)
        + 4.0 * lt.eps_infinity * lambda * lt.omega_p * lt.omega_p / denom;
    let mut root = inner.sqrt();
    if root.re < 0.0 {
        root = -root;
    }
    Ok((Complex64::new(0.0, lt.gamma_p) + root) / 2.0)
}

/// Real approximate resonance, the dominant part of the complex root:
/// `omega_n0 = sqrt(omega_0^2 + omega_p^2 lambda eps_inf /
///   (lambda eps_inf + (1-lambda) Re eps0))`. Lies strictly inside the band
/// `(omega_0, sqrt(omega_0^2 + omega_p^2))` for lambda in (0,1).
pub fn approx_resonance(ctx: &DispersionContext) -> Result<f64> {
    let lt = &ctx.lorentz;
    let lambda = ctx.lambda_n0;
    let denom = lambda * lt.eps_infinity + (1.0 - lambda) * ctx.eps0_at_z.re;
    if denom <= 0.0 {
        return Err(Error::Numerical(format!(
            "nonpositive resonance denominator {denom}"
        )));
    }
    Ok((lt.omega_0 * lt.omega_0 + lt.omega_p * lt.omega_p * lambda * lt.eps_infinity / denom)
        .sqrt())
}

/// `|f(omega_n0)|`, the residual of the approximate resonance in the
/// dispersion equation. Bounded by a constant times `gamma + gamma_p`.
pub fn residual_bound_check(ctx: &DispersionContext, omega_n0: f64) -> Result<f64> {
    Ok(dispersion_value(ctx, omega_n0)?.norm())
}

/// Permittivity inversion from a detected resonance peak:
/// `eps0 = lambda / (lambda - 1) * eps_p(omega_peak)`.
pub fn invert_permittivity(
    omega_peak: f64,
    lambda_n0: f64,
    lorentz: &LorentzParams,
) -> Result<Complex64> {
    if (lambda_n0 - 1.0).abs() < 1e-14 {
        return Err(Error::Config("lambda_n0 = 1 makes the inversion singular".into()));
    }
    let eps_p = lorentz_permittivity(lorentz, omega_peak)?;
    Ok(eps_p * (lambda_n0 / (lambda_n0 - 1.0)))
}
