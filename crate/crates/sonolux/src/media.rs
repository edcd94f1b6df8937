//! Material phantoms, the Lorentz permittivity model and nanoparticle data.
//!
//! A phantom carries the acoustic and optical material fields on one shared
//! grid: sound speed `c`, mass density `rho` and the complex background
//! permittivity `eps0 = eps0_re + i eps0_im`. The imaging domain is an
//! axis-aligned sub-box of the grid; outside it every field equals its
//! declared background constant. All quantities are nondimensional.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{dot3, norm3, Grid3, GridGeometry, IndexBox};

/// Which phantom field to sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FieldSelector {
    SoundSpeed,
    Density,
    Eps0Re,
    Eps0Im,
}

/// Lorentz oscillator parameters of the nanoparticle permittivity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LorentzParams {
    /// High-frequency permittivity limit.
    pub eps_infinity: f64,
    /// Plasma frequency.
    pub omega_p: f64,
    /// Undamped oscillator frequency.
    pub omega_0: f64,
    /// Damping frequency, assumed small.
    pub gamma_p: f64,
}

impl LorentzParams {
    pub fn validate(&self) -> Result<()> {
        let all = [self.eps_infinity, self.omega_p, self.omega_0, self.gamma_p];
        if all.iter().any(|v| !v.is_finite()) {
            return Err(Error::Config("Lorentz parameters must be finite".into()));
        }
        if self.eps_infinity <= 0.0 || self.omega_p <= 0.0 || self.omega_0 <= 0.0 {
            return Err(Error::Config("eps_infinity, omega_p, omega_0 must be positive".into()));
        }
        if self.gamma_p < 0.0 {
            return Err(Error::Config("gamma_p must be nonnegative".into()));
        }
        Ok(())
    }

    /// True when the damping is not small against the oscillator frequency;
    /// the dispersion approximations degrade there.
    pub fn damping_is_large(&self) -> bool {
        self.gamma_p > 0.1 * self.omega_0
    }

    /// Upper edge of the resonance band, `sqrt(omega_0^2 + omega_p^2)`.
    pub fn omega_max(&self) -> f64 {
        (self.omega_0 * self.omega_0 + self.omega_p * self.omega_p).sqrt()
    }
}

/// Lorentz-model permittivity
/// `eps_p(omega) = eps_inf * (1 + omega_p^2 / (omega_0^2 - omega^2 + i omega gamma_p))`.
///
/// With this sign convention the imaginary part is nonpositive for positive
/// damping; the absorption magnitude used by the pressure model is
/// [`absorption`].
pub fn lorentz_permittivity(params: &LorentzParams, omega: f64) -> Result<Complex64> {
    if !(omega > 0.0) {
        return Err(Error::Config(format!("omega must be positive, got {omega}")));
    }
    let den = Complex64::new(
        params.omega_0 * params.omega_0 - omega * omega,
        omega * params.gamma_p,
    );
    if den.norm() == 0.0 {
        return Err(Error::Pole(format!(
            "undamped Lorentz pole at omega = omega_0 = {}",
            params.omega_0
        )));
    }
    Ok(params.eps_infinity * (Complex64::new(1.0, 0.0) + params.omega_p.powi(2) / den))
}

/// Absorption magnitude of the nanoparticle, `|Im eps_p(omega)|`.
///
/// The pressure source is proportional to the absorbed energy, which is
/// nonnegative; the Lorentz formula above yields `Im eps_p <= 0`, so the
/// measurement model uses this magnitude.
pub fn absorption(params: &LorentzParams, omega: f64) -> Result<f64> {
    Ok(lorentz_permittivity(params, omega)?.im.abs())
}

/// Plasmonic nanoparticle: ball of radius `a` at `z` with a Lorentz
/// permittivity, a single magnetization-operator mode and the plane-wave
/// illumination geometry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Nanoparticle {
    /// Center position.
    pub z: [f64; 3],
    /// Radius.
    pub a: f64,
    pub lorentz: LorentzParams,
    /// Eigenvalue of the magnetization operator for the driven mode, in (0,1).
    /// 1/3 is the dipole eigenvalue of the ball.
    pub lambda_n0: f64,
    /// Moment vector of the driven mode, the integral of the eigenfunction
    /// over the unit ball.
    pub mode_moment: [f64; 3],
    /// Incident propagation direction (unit).
    pub incident_dir: [f64; 3],
    /// Incident polarization (unit, orthogonal to the direction).
    pub polarization: [f64; 3],
}

impl Nanoparticle {
    pub fn validate(&self) -> Result<()> {
        self.lorentz.validate()?;
        if !(self.a > 0.0) {
            return Err(Error::Config("particle radius must be positive".into()));
        }
        if !(self.lambda_n0 > 0.0 && self.lambda_n0 < 1.0) {
            return Err(Error::Config(format!(
                "lambda_n0 must lie strictly in (0,1), got {}",
                self.lambda_n0
            )));
        }
        if (norm3(self.incident_dir) - 1.0).abs() > 1e-9 {
            return Err(Error::Config("incident_dir must be a unit vector".into()));
        }
        if (norm3(self.polarization) - 1.0).abs() > 1e-9 {
            return Err(Error::Config("polarization must be a unit vector".into()));
        }
        if dot3(self.incident_dir, self.polarization).abs() > 1e-9 {
            return Err(Error::Config("polarization must be orthogonal to incident_dir".into()));
        }
        Ok(())
    }

    /// Same particle moved to a new center.
    pub fn at_position(&self, z: [f64; 3]) -> Self {
        Self { z, ..self.clone() }
    }

    /// Default reference particle: ball dipole mode, x-polarized plane wave
    /// travelling along +z. The mode moment defaults to the ball volume
    /// times e_x.
    pub fn reference(z: [f64; 3], a: f64, lorentz: LorentzParams) -> Self {
        let ball_volume = 4.0 * std::f64::consts::PI / 3.0;
        Self {
            z,
            a,
            lorentz,
            lambda_n0: 1.0 / 3.0,
            mode_moment: [ball_volume, 0.0, 0.0],
            incident_dir: [0.0, 0.0, 1.0],
            polarization: [1.0, 0.0, 0.0],
        }
    }
}

/// Gridded material fields plus the global constants of the model.
#[derive(Debug, Clone)]
pub struct Phantom {
    pub geom: GridGeometry,
    /// Sound speed field.
    pub c: Grid3,
    /// Mass density field, positive.
    pub rho: Grid3,
    /// Real part of the background permittivity.
    pub eps0_re: Grid3,
    /// Imaginary part of the background permittivity (absorption).
    pub eps0_im: Grid3,
    /// Imaging domain box inside the grid.
    pub omega_domain: IndexBox,
    pub c_background: f64,
    pub rho_background: f64,
    pub eps_infinity: f64,
    /// Declared bound with `|c^2|_{C^{1,1}} <= m_bound` and `c >= 1/m_bound`.
    pub m_bound: f64,
}

impl Phantom {
    /// Validate all structural invariants; called by constructors and loaders.
    pub fn validate(&self) -> Result<()> {
        for f in [&self.c, &self.rho, &self.eps0_re, &self.eps0_im] {
            if f.geom != self.geom {
                return Err(Error::Config("phantom fields must share one grid".into()));
            }
        }
        self.omega_domain.validate(&self.geom)?;
        if self.rho.min() <= 0.0 {
            return Err(Error::Config("mass density must be positive everywhere".into()));
        }
        if !(self.m_bound > 0.0) {
            return Err(Error::Config("m_bound must be positive".into()));
        }
        if self.c.min() < 1.0 / self.m_bound - 1e-12 {
            return Err(Error::Config(format!(
                "speed violates c >= 1/M: min c = {}, M = {}",
                self.c.min(),
                self.m_bound
            )));
        }
        let c11 = self.c_squared_c11_norm();
        if c11 > self.m_bound * (1.0 + 1e-12) {
            return Err(Error::Config(format!(
                "speed violates |c^2|_C11 <= M: norm = {c11}, M = {}",
                self.m_bound
            )));
        }
        self.check_background_shell()?;
        Ok(())
    }

    /// Discrete `C^{1,1}` norm of `c^2`: sup norm plus sup of first
    /// differences plus the Lipschitz constant of those differences.
    pub fn c_squared_c11_norm(&self) -> f64 {
        let g = self.geom;
        let h = g.spacing;
        let c2 = |i: usize, j: usize, k: usize| {
            let v = self.c.at(i, j, k);
            v * v
        };
        let mut sup = 0.0f64;
        let mut sup_d1 = 0.0f64;
        let mut lip = 0.0f64;
        let [nx, ny, nz] = g.dims;
        // First differences along each axis live on staggered positions;
        // their nearest-neighbor variation bounds the Lipschitz constant.
        for k in 0..nz {
            for j in 0..ny {
                for i in 0..nx {
                    sup = sup.max(c2(i, j, k).abs());
                }
            }
        }
        let diff = |a: f64, b: f64| (b - a) / h;
        for axis in 0..3 {
            let bound = [nx, ny, nz];
            let mut d1 = vec![0.0f64; g.len()];
            for k in 0..nz {
                for j in 0..ny {
                    for i in 0..nx {
                        let idx = [i, j, k];
                        if idx[axis] + 1 >= bound[axis] {
                            continue;
                        }
                        let mut up = idx;
                        up[axis] += 1;
                        let v = diff(c2(idx[0], idx[1], idx[2]), c2(up[0], up[1], up[2]));
                        d1[g.idx(i, j, k)] = v;
                        sup_d1 = sup_d1.max(v.abs());
                    }
                }
            }
            for k in 0..nz {
                for j in 0..ny {
                    for i in 0..nx {
                        let idx = [i, j, k];
                        if idx[axis] + 2 >= bound[axis] {
                            continue;
                        }
                        for other in 0..3 {
                            let mut up = idx;
                            up[other] += 1;
                            if up[other] >= bound[other] || up[axis] + 1 >= bound[axis] {
                                continue;
                            }
                            let a = d1[g.idx(idx[0], idx[1], idx[2])];
                            let b = d1[g.idx(up[0], up[1], up[2])];
                            lip = lip.max(((b - a) / h).abs());
                        }
                    }
                }
            }
        }
        sup + sup_d1 + lip
    }

    /// Fields must equal their backgrounds on the outermost two grid shells.
    fn check_background_shell(&self) -> Result<()> {
        let g = self.geom;
        let [nx, ny, nz] = g.dims;
        let on_shell = |i: usize, j: usize, k: usize| {
            i < 2 || j < 2 || k < 2 || i >= nx - 2 || j >= ny - 2 || k >= nz - 2
        };
        let tol = 1e-12;
        for [i, j, k] in g.iter_nodes() {
            if !on_shell(i, j, k) {
                continue;
            }
            if (self.c.at(i, j, k) - self.c_background).abs() > tol
                || (self.rho.at(i, j, k) - self.rho_background).abs() > tol
                || (self.eps0_re.at(i, j, k) - self.eps0_re_background()).abs() > tol
                || self.eps0_im.at(i, j, k).abs() > tol
            {
                return Err(Error::Config(format!(
                    "fields deviate from background on the boundary shell at node [{i},{j},{k}]"
                )));
            }
        }
        Ok(())
    }

    /// The permittivity background equals `eps_infinity` outside the domain.
    pub fn eps0_re_background(&self) -> f64 {
        self.eps_infinity
    }

    /// Sup of the permittivity imaginary part over the domain nodes.
    pub fn gamma(&self) -> f64 {
        let mut g = 0.0f64;
        for [i, j, k] in self.omega_domain.iter_nodes() {
            g = g.max(self.eps0_im.at(i, j, k));
        }
        g
    }

    /// Trilinear sample of a selected field at `y`.
    pub fn sample(&self, selector: FieldSelector, y: [f64; 3]) -> Result<f64> {
        match selector {
            FieldSelector::SoundSpeed => self.c.interp(y),
            FieldSelector::Density => self.rho.interp(y),
            FieldSelector::Eps0Re => self.eps0_re.interp(y),
            FieldSelector::Eps0Im => self.eps0_im.interp(y),
        }
    }

    /// Complex permittivity of the background medium at `y`.
    pub fn eps0_at(&self, y: [f64; 3]) -> Result<Complex64> {
        Ok(Complex64::new(self.eps0_re.interp(y)?, self.eps0_im.interp(y)?))
    }

    /// Diameter of the imaging domain.
    pub fn domain_diameter(&self) -> f64 {
        self.omega_domain.diameter(&self.geom)
    }

    /// Upper bound of the admissible time window `(0, Diam(Omega)/M)`.
    pub fn time_window_end(&self) -> f64 {
        self.domain_diameter() / self.m_bound
    }

    /// True if the ball of radius `r` around `p` lies inside the domain box.
    pub fn ball_inside_domain(&self, p: [f64; 3], r: f64) -> bool {
        let (lo, hi) = self.omega_domain.corners(&self.geom);
        (0..3).all(|a| p[a] - r >= lo[a] && p[a] + r <= hi[a])
    }
}

/// Built-in analytic phantom generators used by the oracles and the CLI.
pub mod generators {
    use super::*;

    /// Compactly supported C^2 radial bump: `(1 - (r/radius)^2)^3` inside,
    /// zero outside.
    pub fn bump(p: [f64; 3], center: [f64; 3], radius: f64) -> f64 {
        let r2 = (p[0] - center[0]).powi(2) + (p[1] - center[1]).powi(2) + (p[2] - center[2]).powi(2);
        let u2 = r2 / (radius * radius);
        if u2 >= 1.0 {
            0.0
        } else {
            (1.0 - u2).powi(3)
        }
    }

    /// Radial plateau: exactly 1 inside `r_inner`, quintic C^2 decay to 0 at
    /// `r_outer`.
    pub fn plateau(p: [f64; 3], center: [f64; 3], r_inner: f64, r_outer: f64) -> f64 {
        let r = ((p[0] - center[0]).powi(2)
            + (p[1] - center[1]).powi(2)
            + (p[2] - center[2]).powi(2))
        .sqrt();
        if r <= r_inner {
            1.0
        } else if r >= r_outer {
            0.0
        } else {
            let t = (r_outer - r) / (r_outer - r_inner);
            t * t * t * (10.0 - 15.0 * t + 6.0 * t * t)
        }
    }

    /// Standard grid for the built-in phantoms: cube of side `extent`
    /// starting at the origin, `n` nodes per axis, domain box with a
    /// 4-node margin.
    pub fn standard_geometry(n: usize, extent: f64) -> (GridGeometry, IndexBox) {
        let geom = GridGeometry::new([0.0; 3], extent / (n as f64 - 1.0), [n; 3]).unwrap();
        let margin = 4.min(n / 4);
        let omega = IndexBox { lo: [margin; 3], hi: [n - 1 - margin; 3] };
        (geom, omega)
    }

    fn assemble(
        geom: GridGeometry,
        omega: IndexBox,
        c: Grid3,
        rho: Grid3,
        eps0_re: Grid3,
        eps0_im: Grid3,
        backgrounds: (f64, f64, f64),
    ) -> Result<Phantom> {
        let (c_bg, rho_bg, eps_inf) = backgrounds;
        let mut phantom = Phantom {
            geom,
            c,
            rho,
            eps0_re,
            eps0_im,
            omega_domain: omega,
            c_background: c_bg,
            rho_background: rho_bg,
            eps_infinity: eps_inf,
            m_bound: 1.0,
        };
        let norm = phantom.c_squared_c11_norm();
        let inv_min = 1.0 / phantom.c.min();
        phantom.m_bound = norm.max(inv_min) * (1.0 + 1e-9);
        phantom.validate()?;
        Ok(phantom)
    }

    /// Uniform medium: `c`, `rho`, `eps0` constant everywhere.
    pub fn constant(n: usize, extent: f64, c0: f64, rho0: f64, eps0: f64) -> Result<Phantom> {
        let (geom, omega) = standard_geometry(n, extent);
        assemble(
            geom,
            omega,
            Grid3::constant(geom, c0),
            Grid3::constant(geom, rho0),
            Grid3::constant(geom, eps0),
            Grid3::constant(geom, 0.0),
            (c0, rho0, eps0),
        )
    }

    /// Constant fields except a single smooth speed bump of relative
    /// amplitude `rel_amp` at the domain center.
    pub fn speed_bump(n: usize, extent: f64, c0: f64, rel_amp: f64) -> Result<Phantom> {
        let (geom, omega) = standard_geometry(n, extent);
        let center = [extent / 2.0; 3];
        let radius = 0.3 * extent;
        let c = Grid3::from_fn(geom, |p| c0 * (1.0 + rel_amp * bump(p, center, radius)));
        assemble(
            geom,
            omega,
            c,
            Grid3::constant(geom, 1.0),
            Grid3::constant(geom, 1.0),
            Grid3::constant(geom, 0.0),
            (c0, 1.0, 1.0),
        )
    }

    /// Constant speed with an exponential density profile along a direction,
    /// tapered so the boundary shell stays at the background. The profile is
    /// exactly `rho0 * exp(beta . (y - center))` inside the plateau core
    /// (radius 0.28 * extent around the domain center).
    pub fn exponential_density(
        n: usize,
        extent: f64,
        c0: f64,
        rho0: f64,
        beta: [f64; 3],
    ) -> Result<Phantom> {
        let (geom, omega) = standard_geometry(n, extent);
        let center = [extent / 2.0; 3];
        let rho = Grid3::from_fn(geom, |p| {
            let q = dot3(beta, crate::grid::sub3(p, center));
            rho0 * (q * plateau(p, center, 0.28 * extent, 0.44 * extent)).exp()
        });
        assemble(
            geom,
            omega,
            Grid3::constant(geom, c0),
            rho,
            Grid3::constant(geom, 1.0),
            Grid3::constant(geom, 0.0),
            (c0, rho0, 1.0),
        )
    }

    /// Smooth heterogeneous reference phantom: speed bump (+10%),
    /// exponential-type density variation (around +-20%), permittivity
    /// varying within [1.5, 2.5] and a small absorption bump of peak `gamma`.
    pub fn smooth_heterogeneous(n: usize, extent: f64, gamma: f64) -> Result<Phantom> {
        let (geom, omega) = standard_geometry(n, extent);
        let e = extent;
        let c_center = [0.52 * e, 0.48 * e, 0.36 * e];
        let rho_center = [0.46 * e, 0.53 * e, 0.40 * e];
        let ep_center = [0.55 * e, 0.50 * e, 0.33 * e];
        let em_center = [0.44 * e, 0.49 * e, 0.42 * e];
        let im_center = [0.50 * e, 0.50 * e, 0.38 * e];
        let r_big = 0.26 * e;
        let c = Grid3::from_fn(geom, |p| 1.0 + 0.10 * bump(p, c_center, r_big));
        let rho = Grid3::from_fn(geom, |p| 1.5 * (0.18 * bump(p, rho_center, r_big)).exp());
        let eps0_re = Grid3::from_fn(geom, |p| {
            2.0 + 0.5 * bump(p, ep_center, 0.20 * e) - 0.5 * bump(p, em_center, 0.20 * e)
        });
        let eps0_im = Grid3::from_fn(geom, |p| gamma * bump(p, im_center, r_big));
        assemble(geom, omega, c, rho, eps0_re, eps0_im, (1.0, 1.5, 2.0))
    }

    /// Strong lens phantom used to demonstrate geodesic-hypothesis failure:
    /// a very slow slab spans the whole domain cross-section at mid-height,
    /// leaving fast channels only in the margin outside the domain box, so
    /// geodesics to targets behind the slab detour out of the box.
    pub fn strong_lens(n: usize, extent: f64) -> Result<Phantom> {
        let (geom, omega) = standard_geometry(n, extent);
        let e = extent;
        let smoothstep = |t: f64| {
            let t = t.clamp(0.0, 1.0);
            t * t * (3.0 - 2.0 * t)
        };
        // 1 on the inner plateau, 0 within 0.09*e of the grid walls.
        let taper = |u: f64| smoothstep((u - 0.09 * e) / (0.09 * e)).min(smoothstep((0.91 * e - u) / (0.09 * e)));
        let c = Grid3::from_fn(geom, |p| {
            let z_profile = {
                let u = (p[2] - 0.5 * e) / (0.18 * e);
                if u.abs() >= 1.0 {
                    0.0
                } else {
                    (1.0 - u * u).powi(3)
                }
            };
            let slab = z_profile * taper(p[0]) * taper(p[1]);
            1.0 - 0.95 * slab
        });
        assemble(
            geom,
            omega,
            c,
            Grid3::constant(geom, 1.0),
            Grid3::constant(geom, 1.0),
            Grid3::constant(geom, 0.0),
            (1.0, 1.0, 1.0),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn params(eps_inf: f64, wp: f64, w0: f64, gp: f64) -> LorentzParams {
        LorentzParams { eps_infinity: eps_inf, omega_p: wp, omega_0: w0, gamma_p: gp }
    }

    #[test]
    fn lorentz_static_limit() {
        // eps_inf=1, wp=2, w0=1, gp=0: omega -> 0+ gives 1*(1+4/1) = 5.
        let p = params(1.0, 2.0, 1.0, 0.0);
        let v = lorentz_permittivity(&p, 1e-9).unwrap();
        assert_relative_eq!(v.re, 5.0, max_relative = 1e-6);
        assert_eq!(v.im, 0.0);
    }

    #[test]
    fn lorentz_vanishes_at_band_edge() {
        // eps_p = 0 at omega^2 = w0^2 + wp^2.
        let p = params(1.0, 2.0, 1.0, 0.0);
        let v = lorentz_permittivity(&p, 5f64.sqrt()).unwrap();
        assert!(v.norm() < 1e-12);
    }

    #[test]
    fn lorentz_damped_at_resonance() {
        // Independent complex arithmetic: 2*(1 + 1/(0.01 i)) = 2 - 200 i.
        let p = params(2.0, 1.0, 1.0, 0.01);
        let v = lorentz_permittivity(&p, 1.0).unwrap();
        let expected = 2.0 * (Complex64::new(1.0, 0.0) + 1.0 / Complex64::new(0.0, 0.01));
        assert_relative_eq!(v.re, expected.re, max_relative = 1e-12);
        assert_relative_eq!(v.im, expected.im, max_relative = 1e-12);
        assert_relative_eq!(v.im, -200.0, max_relative = 1e-12);
        assert!(absorption(&p, 1.0).unwrap() > 0.0);
    }

    #[test]
    fn lorentz_pole_is_an_error() {
        let p = params(1.0, 2.0, 1.0, 0.0);
        assert!(matches!(lorentz_permittivity(&p, 1.0), Err(Error::Pole(_))));
    }

    #[test]
    fn lorentz_negative_real_part_in_band() {
        // For gp = 0 and omega in (w0, sqrt(w0^2+wp^2)), Re eps_p < 0.
        let p = params(1.3, 2.0, 1.0, 0.0);
        let wmax = p.omega_max();
        for i in 1..64 {
            let w = 1.0 + (wmax - 1.0) * i as f64 / 64.0;
            let v = lorentz_permittivity(&p, w).unwrap();
            assert!(v.re < 0.0, "Re eps_p = {} at omega = {w}", v.re);
        }
    }

    #[test]
    fn lorentz_continuous_away_from_pole() {
        // Dense sampling on [1.5, 2.2] with bounded finite differences.
        let p = params(1.0, 2.0, 1.0, 0.0);
        let n = 2000;
        let (a, b) = (1.5, 2.2);
        let step = (b - a) / n as f64;
        let mut prev = lorentz_permittivity(&p, a).unwrap();
        let mut max_slope = 0.0f64;
        for i in 1..=n {
            let v = lorentz_permittivity(&p, a + step * i as f64).unwrap();
            max_slope = max_slope.max((v - prev).norm() / step);
            prev = v;
        }
        assert!(max_slope < 50.0, "max finite-difference slope {max_slope}");
    }

    #[test]
    fn gamma_of_constant_and_bump() {
        let phantom = generators::constant(12, 10.0, 2.0, 1.0, 1.0).unwrap();
        assert_eq!(phantom.gamma(), 0.0);

        let phantom = generators::smooth_heterogeneous(16, 10.0, 1e-3).unwrap();
        // Brute-force max over domain nodes must land within one cell of the peak.
        let mut brute = 0.0f64;
        for [i, j, k] in phantom.omega_domain.iter_nodes() {
            brute = brute.max(phantom.eps0_im.at(i, j, k));
        }
        assert_eq!(phantom.gamma(), brute);
        assert!(brute > 0.8e-3 && brute <= 1e-3);
    }

    #[test]
    fn background_shell_is_enforced() {
        let mut phantom = generators::constant(12, 10.0, 1.5, 1.0, 1.0).unwrap();
        phantom.c.set(0, 5, 5, 2.0);
        assert!(phantom.validate().is_err());
    }

    #[test]
    fn sample_constant_field() {
        let phantom = generators::constant(12, 10.0, 2.0, 1.3, 1.0).unwrap();
        let v = phantom.sample(FieldSelector::Density, [3.3, 7.1, 5.2]).unwrap();
        assert_relative_eq!(v, 1.3, max_relative = 1e-14);
        assert!(phantom.sample(FieldSelector::Density, [-1.0, 0.0, 0.0]).is_err());
    }

    #[test]
    fn nanoparticle_validation() {
        let lt = params(1.0, 2.0, 1.0, 1e-3);
        let mut p = Nanoparticle::reference([5.0, 5.0, 5.0], 0.2, lt);
        p.validate().unwrap();
        p.lambda_n0 = 1.0;
        assert!(p.validate().is_err());
        p.lambda_n0 = 1.0 / 3.0;
        p.polarization = [0.0, 0.0, 1.0];
        assert!(p.validate().is_err());
    }

    #[test]
    fn smooth_phantom_ranges() {
        let phantom = generators::smooth_heterogeneous(24, 10.0, 1e-4).unwrap();
        assert!(phantom.c.max() <= 1.1 + 1e-9);
        assert!(phantom.c.min() >= 1.0 - 1e-9);
        assert!(phantom.eps0_re.min() >= 1.5 - 1e-9);
        assert!(phantom.eps0_re.max() <= 2.5 + 1e-9);
        let rng = phantom.rho.max() / phantom.rho.min();
        assert!(rng <= 0.2f64.exp() + 1e-9);
        // Time window must accommodate mid-domain arrivals.
        assert!(phantom.time_window_end() > 0.6 * phantom.domain_diameter());
    }
}
