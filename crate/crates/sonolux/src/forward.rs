//! Forward synthesis of the boundary measurement `p*(x, s, omega)`.
//!
//! After the exit time the measurement factorizes into a kernel part and an
//! electromagnetic energy part, `p* = Psi_2(x,z,s) * int_D |u_1|^2`; between
//! entrance and exit the energy integral is restricted to the covered part
//! of the particle. The electric energy follows the near-resonance closed
//! form with the dispersion denominator `|eps0 - (eps0 - eps_p) lambda|^2`.
//! An independent volume-quadrature path evaluates the same measurement
//! directly from the level-set integrals for cross-validation, and the
//! remainder orders of the model enter as an optional noise model.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::eikonal::TravelTimeField;
use crate::error::{Error, Result};
use crate::grid::{dist3, dot3, norm3, sub3, Grid3};
use crate::kernel::KernelCoefficients;
use crate::levelset::{extract_isosurface, triangle_area, triangle_centroid};
use crate::media::{absorption, Nanoparticle, Phantom};
use crate::rng::{ball_cloud, uniform_pm1};

const TAG_GAMMA: u64 = 1;
const TAG_WAVE: u64 = 2;
const TAG_ENERGY: u64 = 3;

/// Entrance and exit times of the particle relative to the expanding
/// travel-time front.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegimeTimes {
    /// `inf_D tau - a`.
    pub tau1: f64,
    /// `sup_D tau + a`.
    pub tau2: f64,
}

/// Noise model for the remainder terms of the expansion.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NoiseMode {
    /// Exact regime formulas, no remainders.
    Off,
    /// Add each remainder at its full deterministic bound.
    DeterministicBound,
    /// Draw each remainder uniformly within its bound, keyed on the sample
    /// coordinates so parallel order never changes the dataset.
    SeededRandom,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub mode: NoiseMode,
    /// Scale of the background-absorption term `O(gamma)`.
    pub c_gamma: f64,
    /// Scale of the wave remainder `O(a^{4-2h})`.
    pub c_wave: f64,
    /// Scale of the energy remainder `O(a^{min(3,4-3h)})`.
    pub c_energy: f64,
    pub seed: u64,
}

impl Default for NoiseSpec {
    fn default() -> Self {
        Self { mode: NoiseMode::Off, c_gamma: 1.0, c_wave: 1.0, c_energy: 1.0, seed: 0 }
    }
}

/// Forward-model configuration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForwardConfig {
    /// Detuning exponent: the incident frequency satisfies
    /// `omega^2 - omega_n0^2 ~ a^h`, `h` in [0,1). Only the remainder
    /// magnitudes depend on it.
    pub h_exponent: f64,
    /// Truncation level of the kernel series.
    pub k_max: usize,
    /// Quadrature cloud size inside the particle.
    pub quad_points: usize,
    pub noise: NoiseSpec,
}

impl Default for ForwardConfig {
    fn default() -> Self {
        Self { h_exponent: 0.0, k_max: 2, quad_points: 4096, noise: NoiseSpec::default() }
    }
}

impl ForwardConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.h_exponent) {
            return Err(Error::Config(format!(
                "h_exponent must lie in [0,1), got {}",
                self.h_exponent
            )));
        }
        if self.quad_points == 0 {
            return Err(Error::Config("quad_points must be positive".into()));
        }
        Ok(())
    }

    fn wave_remainder_scale(&self, a: f64) -> f64 {
        self.noise.c_wave * a.powf(4.0 - 2.0 * self.h_exponent)
    }

    fn energy_remainder_scale(&self, a: f64) -> f64 {
        self.noise.c_energy * a.powf((4.0 - 3.0 * self.h_exponent).min(3.0))
    }

    fn draw(&self, coords: &[f64], tag: u64) -> f64 {
        match self.noise.mode {
            NoiseMode::Off => 0.0,
            NoiseMode::DeterministicBound => 1.0,
            NoiseMode::SeededRandom => uniform_pm1(self.noise.seed, coords, tag),
        }
    }
}

/// Entrance and exit times from the interpolated travel time over a
/// quadrature cloud filling the particle.
pub fn regime_times(
    tt: &TravelTimeField,
    particle: &Nanoparticle,
    quad_points: usize,
) -> Result<RegimeTimes> {
    let cloud = ball_cloud(particle.z, particle.a, quad_points);
    let mut inf = f64::INFINITY;
    let mut sup = f64::NEG_INFINITY;
    for p in &cloud {
        let tau = tt.value_at(*p)?;
        if !tau.is_finite() {
            return Err(Error::Masked(format!("travel time undefined inside D at {p:?}")));
        }
        inf = inf.min(tau);
        sup = sup.max(tau);
    }
    let rt = RegimeTimes { tau1: inf - particle.a, tau2: sup + particle.a };
    if !(rt.tau1 > 0.0) {
        return Err(Error::Numerical(format!(
            "entrance time {} not positive; particle too close to the source",
            rt.tau1
        )));
    }
    Ok(rt)
}

/// Check `tau2 - tau1 <= kappa a` with `kappa = 2 (M + 1)` from the speed
/// bounds.
pub fn regime_width_ok(rt: &RegimeTimes, particle: &Nanoparticle, m_bound: f64) -> bool {
    rt.tau2 - rt.tau1 <= 2.0 * (m_bound + 1.0) * particle.a
}

/// Post-exit kernel factor
/// `Psi_2 = |Im eps_p| [ alpha_{-1}(z)|grad tau(z)| +
///   int_{tau2}^{s} 2r sum_k alpha_k(z) (r^2 - tau^2)^k / k! dr ]`,
/// the integral by adaptive Simpson.
pub fn psi2(
    coeffs: &KernelCoefficients,
    tt: &TravelTimeField,
    particle: &Nanoparticle,
    regimes: &RegimeTimes,
    omega: f64,
    s: f64,
) -> Result<f64> {
    let z = particle.z;
    let am1 = coeffs.alpha_minus1_at(z)?;
    let (grad, _) = tt.grad_at(z)?;
    let tau_z = tt.value_at(z)?;
    let mut alphas = Vec::with_capacity(coeffs.alpha.len());
    for k in 0..coeffs.alpha.len() {
        alphas.push(coeffs.alpha_at(k, z)?);
    }
    let series = |r: f64| {
        let arg = r * r - tau_z * tau_z;
        let mut acc = 0.0;
        let mut power = 1.0; // arg^k / k!
        for (k, &a) in alphas.iter().enumerate() {
            if k > 0 {
                power *= arg / k as f64;
            }
            acc += a * power;
        }
        2.0 * r * acc
    };
    let tail = if s > regimes.tau2 { adaptive_simpson(&series, regimes.tau2, s, 1e-12) } else { 0.0 };
    Ok(absorption(&particle.lorentz, omega)? * (am1 * norm3(grad) + tail))
}

/// Transit kernel factor at a covered point,
/// `Psi_1 = |Im eps_p| alpha_{-1}(z*) |grad tau(z*)|`.
pub fn psi1(
    coeffs: &KernelCoefficients,
    tt: &TravelTimeField,
    lorentz: &crate::media::LorentzParams,
    z_star: [f64; 3],
    omega: f64,
) -> Result<f64> {
    let am1 = coeffs.alpha_minus1_at(z_star)?;
    let (grad, _) = tt.grad_at(z_star)?;
    Ok(absorption(lorentz, omega)? * am1 * norm3(grad))
}

/// Electric energy stored in the particle,
/// `int_D |u_1|^2 = a^3 |eps0(z)|^2 |<u_0(z); m>|^2 / |f(omega,z)|^2`
/// plus the optional remainder of order `a^{min(3,4-3h)}`.
pub fn field_energy(
    particle: &Nanoparticle,
    phantom: &Phantom,
    omega: f64,
    config: &ForwardConfig,
) -> Result<f64> {
    let eps0 = phantom.eps0_at(particle.z)?;
    let eps_p = crate::media::lorentz_permittivity(&particle.lorentz, omega)?;
    let f = eps0 - (eps0 - eps_p) * particle.lambda_n0;
    let f2 = f.norm_sqr();
    if f2 < 1e-12 * eps0.norm_sqr() {
        return Err(Error::Pole(format!(
            "dispersion denominator vanished at omega = {omega} (exact resonance hit)"
        )));
    }
    // Plane wave u0(z) = d exp(i omega sqrt(eps_inf) z.theta), unit
    // permeability; the phase drops out of the modulus.
    let phase = omega * phantom.eps_infinity.sqrt() * dot3(particle.z, particle.incident_dir);
    let coupling = num_complex::Complex64::from_polar(1.0, phase)
        * dot3(particle.polarization, particle.mode_moment);
    let a3 = particle.a.powi(3);
    let mut energy = a3 * eps0.norm_sqr() * coupling.norm_sqr() / f2;
    energy += config.energy_remainder_scale(particle.a)
        * config.draw(&[particle.z[0], particle.z[1], particle.z[2], omega], TAG_ENERGY);
    Ok(energy.max(0.0))
}

/// Cached per-particle forward evaluation: cloud travel times sorted for
/// covered-fraction queries, prefix centroids, and the particle-center
/// kernel values.
pub struct ParticleForward {
    pub regimes: RegimeTimes,
    cloud_tau_sorted: Vec<f64>,
    prefix_centroid: Vec<[f64; 3]>,
    volume: f64,
}

impl ParticleForward {
    pub fn new(
        tt: &TravelTimeField,
        particle: &Nanoparticle,
        quad_points: usize,
    ) -> Result<Self> {
        let cloud = ball_cloud(particle.z, particle.a, quad_points);
        let mut taus = Vec::with_capacity(cloud.len());
        for p in &cloud {
            taus.push(tt.value_at(*p)?);
        }
        let mut order: Vec<usize> = (0..cloud.len()).collect();
        order.sort_by(|&i, &j| taus[i].total_cmp(&taus[j]));
        let cloud_tau_sorted: Vec<f64> = order.iter().map(|&i| taus[i]).collect();
        let mut prefix_centroid = Vec::with_capacity(cloud.len() + 1);
        let mut acc = [0.0f64; 3];
        prefix_centroid.push(acc);
        for &i in &order {
            for a in 0..3 {
                acc[a] += cloud[i][a];
            }
            prefix_centroid.push(acc);
        }
        let inf = cloud_tau_sorted[0];
        let sup = *cloud_tau_sorted.last().unwrap();
        let regimes = RegimeTimes { tau1: inf - particle.a, tau2: sup + particle.a };
        if !(regimes.tau1 > 0.0) {
            return Err(Error::Numerical("particle overlaps the source region".into()));
        }
        let volume = 4.0 / 3.0 * std::f64::consts::PI * particle.a.powi(3);
        Ok(Self { regimes, cloud_tau_sorted, prefix_centroid, volume })
    }

    /// Fraction of the particle covered by the Riemannian volume of radius `s`
    /// and the centroid of the covered part.
    pub fn covered(&self, s: f64) -> (f64, Option<[f64; 3]>) {
        let n = self.cloud_tau_sorted.partition_point(|&t| t <= s);
        if n == 0 {
            return (0.0, None);
        }
        let total = self.cloud_tau_sorted.len();
        let c = self.prefix_centroid[n];
        let nf = n as f64;
        (nf / total as f64, Some([c[0] / nf, c[1] / nf, c[2] / nf]))
    }

    pub fn particle_volume(&self) -> f64 {
        self.volume
    }
}

/// The measurement `p*(x, s, omega)` by regime dispatch: background noise
/// before the entrance time, the covered-fraction transit formula between
/// entrance and exit, and the `Psi_2 * energy` plateau after exit.
pub fn p_star(
    tt: &TravelTimeField,
    coeffs: &KernelCoefficients,
    particle: &Nanoparticle,
    phantom: &Phantom,
    config: &ForwardConfig,
    s: f64,
    omega: f64,
) -> Result<f64> {
    let pf = ParticleForward::new(tt, particle, config.quad_points)?;
    p_star_cached(tt, coeffs, particle, phantom, config, &pf, s, omega)
}

/// As [`p_star`] with a prebuilt per-particle cache; the sweep synthesis
/// hoists the cache per particle position.
#[allow(clippy::too_many_arguments)]
pub fn p_star_cached(
    tt: &TravelTimeField,
    coeffs: &KernelCoefficients,
    particle: &Nanoparticle,
    phantom: &Phantom,
    config: &ForwardConfig,
    pf: &ParticleForward,
    s: f64,
    omega: f64,
) -> Result<f64> {
    if !(s > 0.0) || s >= phantom.time_window_end() {
        return Err(Error::Config(format!(
            "s = {s} outside the admissible window (0, {})",
            phantom.time_window_end()
        )));
    }
    let z = particle.z;
    let gamma = phantom.gamma();
    let noise_gamma = config.noise.c_gamma
        * gamma
        * config.draw(&[z[0], z[1], z[2], s, omega], TAG_GAMMA);
    let rt = pf.regimes;
    if s < rt.tau1 {
        return Ok(noise_gamma);
    }
    let noise_wave = config.wave_remainder_scale(particle.a)
        * config.draw(&[z[0], z[1], z[2], s, omega], TAG_WAVE);
    let energy = field_energy(particle, phantom, omega, config)?;
    if s <= rt.tau2 {
        let (fraction, z_star) = pf.covered(s);
        let main = match z_star {
            None => 0.0,
            Some(zs) => psi1(coeffs, tt, &particle.lorentz, zs, omega)? * energy * fraction,
        };
        Ok(main + noise_gamma + noise_wave)
    } else {
        let main = psi2(coeffs, tt, particle, &rt, omega, s)? * energy;
        Ok(main + noise_gamma + noise_wave)
    }
}

/// Independent volume-quadrature evaluation of the same measurement:
/// `|Im eps_p| [ int_{D cap RV(s)} |u1|^2 alpha_{-1} |grad tau| dy
///   + int_0^s 2r int_{D cap RV(r)} |u1|^2 sum_k alpha_k (r^2-tau^2)^k/k! dy dr ]`
/// with `|u1|^2` spatially constant on the particle at `energy / |D|`.
/// No Taylor collapse at the particle center; slower than [`p_star`].
#[allow(clippy::too_many_arguments)]
pub fn p_star_quadrature_oracle(
    tt: &TravelTimeField,
    coeffs: &KernelCoefficients,
    particle: &Nanoparticle,
    phantom: &Phantom,
    s: f64,
    omega: f64,
    quad_points: usize,
    n_r: usize,
) -> Result<f64> {
    let noise_free = ForwardConfig {
        noise: NoiseSpec { mode: NoiseMode::Off, ..Default::default() },
        ..Default::default()
    };
    let energy = field_energy(particle, phantom, omega, &noise_free)?;
    let volume = 4.0 / 3.0 * std::f64::consts::PI * particle.a.powi(3);
    let u1_sq = energy / volume;
    let cloud = ball_cloud(particle.z, particle.a, quad_points);
    let weight = volume / cloud.len() as f64;

    // Per-point kernel data.
    let mut taus = Vec::with_capacity(cloud.len());
    let mut front = Vec::with_capacity(cloud.len()); // alpha_{-1} |grad tau|
    let mut alphas = vec![Vec::with_capacity(cloud.len()); coeffs.alpha.len()];
    for p in &cloud {
        let tau = tt.value_at(*p)?;
        let am1 = coeffs.alpha_minus1_at(*p)?;
        let (g, _) = tt.grad_at(*p)?;
        taus.push(tau);
        front.push(am1 * norm3(g));
        for (k, store) in alphas.iter_mut().enumerate() {
            store.push(coeffs.alpha_at(k, *p)?);
        }
    }

    // Surface-collapsed first term over the covered points.
    let mut term1 = 0.0;
    for (i, &tau) in taus.iter().enumerate() {
        if tau <= s {
            term1 += front[i];
        }
    }
    term1 *= u1_sq * weight;

    // Double integral: simple composite trapezoid in r over the support
    // [inf tau, s]; the integrand vanishes before the front reaches D.
    let r_lo = taus.iter().cloned().fold(f64::INFINITY, f64::min);
    let mut term2 = 0.0;
    if s > r_lo && !alphas.is_empty() {
        let n_r = n_r.max(8);
        let dr = (s - r_lo) / n_r as f64;
        let integrand = |r: f64| {
            let mut acc = 0.0;
            for (i, &tau) in taus.iter().enumerate() {
                if tau <= r {
                    let arg = r * r - tau * tau;
                    let mut power = 1.0;
                    let mut sum = 0.0;
                    for (k, store) in alphas.iter().enumerate() {
                        if k > 0 {
                            power *= arg / k as f64;
                        }
                        sum += store[i] * power;
                    }
                    acc += sum;
                }
            }
            2.0 * r * acc * u1_sq * weight
        };
        let mut acc = 0.5 * (integrand(r_lo) + integrand(s));
        for i in 1..n_r {
            acc += integrand(r_lo + dr * i as f64);
        }
        term2 = acc * dr;
    }

    Ok(absorption(&particle.lorentz, omega)? * (term1 + term2))
}

/// Coarea self-check: returns the pair
/// `( int_0^s int_{Omega cap RS(r)} f dsigma dr ,
///    int_{Omega cap RV(s)} f |grad tau| dy )`
/// with the left side by marching-tetrahedra surface quadrature over `n_r`
/// travel-time levels and the right side by a grid-node sum.
pub fn coarea_selfcheck(
    tt: &TravelTimeField,
    phantom: &Phantom,
    f: impl Fn([f64; 3]) -> f64 + Sync,
    s: f64,
    n_r: usize,
) -> (f64, f64) {
    let geom = tt.geom;
    // Left: midpoint rule in r over level surfaces clipped to the domain.
    let levels: Vec<f64> = (0..n_r).map(|i| s * (i as f64 + 0.5) / n_r as f64).collect();
    let areas: Vec<f64> = levels
        .par_iter()
        .map(|&r| {
            let tris = extract_isosurface(&tt.tau, r);
            tris.iter()
                .filter(|t| {
                    phantom
                        .omega_domain
                        .contains_point(&geom, triangle_centroid(t))
                })
                .map(|t| triangle_area(t) * f(triangle_centroid(t)))
                .sum::<f64>()
        })
        .collect();
    let lhs = areas.iter().sum::<f64>() * s / n_r as f64;

    // Right: node sum over the covered domain.
    let h3 = geom.spacing.powi(3);
    let mut rhs = 0.0;
    for [i, j, k] in phantom.omega_domain.iter_nodes() {
        let tau = tt.tau.at(i, j, k);
        if tau <= s {
            let g = tt.tau.node_gradient(i, j, k);
            rhs += f(geom.node(i, j, k)) * norm3(g) * h3;
        }
    }
    (lhs, rhs)
}

/// Regular grid of particle positions for a sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ZGridSpec {
    pub origin: [f64; 3],
    pub spacing: f64,
    pub dims: [usize; 3],
}

impl ZGridSpec {
    pub fn positions(&self) -> Vec<[f64; 3]> {
        let mut out = Vec::with_capacity(self.dims[0] * self.dims[1] * self.dims[2]);
        for k in 0..self.dims[2] {
            for j in 0..self.dims[1] {
                for i in 0..self.dims[0] {
                    out.push([
                        self.origin[0] + self.spacing * i as f64,
                        self.origin[1] + self.spacing * j as f64,
                        self.origin[2] + self.spacing * k as f64,
                    ]);
                }
            }
        }
        out
    }

    pub fn len(&self) -> usize {
        self.dims[0] * self.dims[1] * self.dims[2]
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Dataset metadata carried alongside the measurement tensor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetMeta {
    pub particle_template: Nanoparticle,
    pub gamma: f64,
    pub config: ForwardConfig,
    /// Indices of particle positions skipped because of masked kernel data.
    pub skipped_z: Vec<usize>,
}

/// The synthesized measurement tensor `p*(x, s, omega)` over particle
/// positions, time samples and incident frequencies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasurementSet {
    pub boundary_x: [f64; 3],
    pub z_grid: ZGridSpec,
    pub z_positions: Vec<[f64; 3]>,
    pub s_grid: Vec<f64>,
    pub w_grid: Vec<f64>,
    /// Flattened `[iz][is][iw]`, `iw` fastest. Skipped positions hold NaN.
    pub values: Vec<f64>,
    pub meta: DatasetMeta,
}

impl MeasurementSet {
    #[inline]
    pub fn value(&self, iz: usize, is: usize, iw: usize) -> f64 {
        self.values[(iz * self.s_grid.len() + is) * self.w_grid.len() + iw]
    }

    /// Time trace at fixed position and frequency.
    pub fn trace(&self, iz: usize, iw: usize) -> Vec<f64> {
        (0..self.s_grid.len()).map(|is| self.value(iz, is, iw)).collect()
    }

    /// Frequency sweep at fixed position and time.
    pub fn sweep(&self, iz: usize, is: usize) -> Vec<f64> {
        (0..self.w_grid.len()).map(|iw| self.value(iz, is, iw)).collect()
    }

    pub fn is_skipped(&self, iz: usize) -> bool {
        self.meta.skipped_z.contains(&iz)
    }
}

/// Uniform closed sample grid over `[start, stop]`.
pub fn linspace(start: f64, stop: f64, n: usize) -> Vec<f64> {
    assert!(n >= 2, "linspace needs at least two samples");
    let step = (stop - start) / (n as f64 - 1.0);
    (0..n).map(|i| start + step * i as f64).collect()
}

/// Synthesize the full measurement tensor for a particle template swept over
/// a position grid.
///
/// Preconditions: every position at least `5h` from the boundary point with
/// the particle ball inside the domain, the time grid inside the admissible
/// window `(0, Diam(Omega)/M)` and the frequency grid inside the resonance
/// band. Positions with masked kernel data are skipped and reported in the
/// metadata; their tensor entries hold NaN.
#[allow(clippy::too_many_arguments)]
pub fn synthesize_measurements(
    phantom: &Phantom,
    tt: &TravelTimeField,
    coeffs: &KernelCoefficients,
    particle_template: &Nanoparticle,
    z_grid: &ZGridSpec,
    s_grid: &[f64],
    w_grid: &[f64],
    config: &ForwardConfig,
) -> Result<MeasurementSet> {
    config.validate()?;
    particle_template.validate()?;
    let h = phantom.geom.spacing;
    let window_end = phantom.time_window_end();
    for &s in s_grid {
        if !(s > 0.0) || s >= window_end {
            return Err(Error::Config(format!(
                "time sample {s} outside the admissible window (0, {window_end})"
            )));
        }
    }
    let band = (
        particle_template.lorentz.omega_0,
        particle_template.lorentz.omega_max(),
    );
    for &w in w_grid {
        if !(w > band.0) || w >= band.1 {
            return Err(Error::Config(format!(
                "frequency sample {w} outside the resonance band ({}, {})",
                band.0, band.1
            )));
        }
    }
    let z_positions = z_grid.positions();
    for z in &z_positions {
        if dist3(*z, tt.source) < 5.0 * h {
            return Err(Error::Config(format!(
                "particle position {z:?} closer than 5h to the boundary point"
            )));
        }
        if !phantom.ball_inside_domain(*z, particle_template.a) {
            return Err(Error::Config(format!(
                "particle ball at {z:?} not inside the imaging domain"
            )));
        }
    }

    let ns = s_grid.len();
    let nw = w_grid.len();
    let blocks: Vec<(usize, Option<Vec<f64>>)> = z_positions
        .par_iter()
        .enumerate()
        .map(|(iz, z)| {
            let particle = particle_template.at_position(*z);
            let pf = match ParticleForward::new(tt, &particle, config.quad_points) {
                Ok(pf) => pf,
                Err(_) => return (iz, None),
            };
            let mut block = Vec::with_capacity(ns * nw);
            for &s in s_grid {
                for &w in w_grid {
                    match p_star_cached(tt, coeffs, &particle, phantom, config, &pf, s, w) {
                        Ok(v) => block.push(v),
                        Err(Error::Pole(_)) | Err(Error::Masked(_)) => return (iz, None),
                        Err(_) => return (iz, None),
                    }
                }
            }
            (iz, Some(block))
        })
        .collect();

    let mut values = vec![f64::NAN; z_positions.len() * ns * nw];
    let mut skipped = Vec::new();
    for (iz, block) in blocks {
        match block {
            Some(b) => values[iz * ns * nw..(iz + 1) * ns * nw].copy_from_slice(&b),
            None => skipped.push(iz),
        }
    }
    skipped.sort_unstable();
    Ok(MeasurementSet {
        boundary_x: tt.source,
        z_grid: *z_grid,
        z_positions,
        s_grid: s_grid.to_vec(),
        w_grid: w_grid.to_vec(),
        values,
        meta: DatasetMeta {
            particle_template: particle_template.clone(),
            gamma: phantom.gamma(),
            config: *config,
            skipped_z: skipped,
        },
    })
}

/// Adaptive Simpson quadrature with absolute tolerance.
fn adaptive_simpson(f: &impl Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    fn simpson(fa: f64, fm: f64, fb: f64, a: f64, b: f64) -> f64 {
        (b - a) / 6.0 * (fa + 4.0 * fm + fb)
    }
    #[allow(clippy::too_many_arguments)]
    fn recurse(
        f: &impl Fn(f64) -> f64,
        a: f64,
        b: f64,
        fa: f64,
        fm: f64,
        fb: f64,
        whole: f64,
        tol: f64,
        depth: usize,
    ) -> f64 {
        let m = 0.5 * (a + b);
        let lm = 0.5 * (a + m);
        let rm = 0.5 * (m + b);
        let flm = f(lm);
        let frm = f(rm);
        let left = simpson(fa, flm, fm, a, m);
        let right = simpson(fm, frm, fb, m, b);
        if depth == 0 || (left + right - whole).abs() <= 15.0 * tol {
            left + right + (left + right - whole) / 15.0
        } else {
            recurse(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1)
                + recurse(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
        }
    }
    if a == b {
        return 0.0;
    }
    let m = 0.5 * (a + b);
    let (fa, fm, fb) = (f(a), f(m), f(b));
    let whole = simpson(fa, fm, fb, a, b);
    recurse(f, a, b, fa, fm, fb, whole, tol.max(1e-15), 28)
}
