//! Local and global Maxwellians, relative entropies and the ideal-gas
//! equation of state.

use crate::error::{KinError, Result};
use crate::grid::{integrate_p, integrate_q, integrate_qp, PhaseField, PhaseGrid, SpatialField};
use crate::moments::{
    density, generalized_entropy_density, kinetic_velocity_temperature, momentum_density, DistributionFunction,
};
use crate::scalar::Real;

/// Below this value of `f1`, a vanishing `f2` is not reported as a support
/// mismatch; the node contributes nothing.
pub const SUPPORT_TOL: f64 = 1e-200;

/// Domain-averaged density, velocity and temperature.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeanState<R: Real> {
    pub n: usize,
    pub rho0: R,
    pub u0: [R; 2],
    pub theta0: R,
}

impl<R: Real> MeanState<R> {
    pub fn speed_sq(&self) -> R {
        (0..self.n).map(|i| self.u0[i] * self.u0[i]).sum()
    }
}

/// Local fluid moments `(ρ, u, θ)` of a distribution.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalMoments<R: Real> {
    pub rho: SpatialField<R>,
    pub u: Vec<SpatialField<R>>,
    pub theta: SpatialField<R>,
}

impl<R: Real> LocalMoments<R> {
    pub fn of(f: &DistributionFunction<R>) -> Result<Self> {
        let rho = density(f);
        let (u, theta) = kinetic_velocity_temperature(f)?;
        if let Some(i) = theta.values().iter().position(|&t| !(t > R::zero())) {
            return Err(KinError::NonPositiveTemperature(i));
        }
        Ok(Self { rho, u, theta })
    }

    fn velocity(&self, iq: usize) -> [R; 2] {
        let mut v = [R::zero(); 2];
        for (i, ui) in self.u.iter().enumerate() {
            v[i] = ui.values()[iq];
        }
        v
    }
}

/// `ρ / (2πθ)^(n/2) exp(-|p - u|^2 / 2θ)` at one phase point.
#[inline]
pub fn maxwellian_value<R: Real>(n: usize, rho: R, u: [R; 2], theta: R, p: [R; 2]) -> R {
    let mut c2 = R::zero();
    for i in 0..n {
        c2 += (p[i] - u[i]) * (p[i] - u[i]);
    }
    let two_pi_theta = R::lit(2.0) * R::PI() * theta;
    let norm = if n == 1 { two_pi_theta.sqrt() } else { two_pi_theta };
    rho / norm * (-c2 / (theta + theta)).exp()
}

/// Maxwellian field with prescribed local moments.
pub fn maxwellian_from_moments<R: Real>(moments: &LocalMoments<R>) -> Result<DistributionFunction<R>> {
    let grid = moments.rho.grid();
    let n = grid.n();
    let fl = grid.fibre_len();
    let mut values = Vec::with_capacity(grid.len());
    for iq in 0..grid.spatial_len() {
        let rho = moments.rho.values()[iq];
        let theta = moments.theta.values()[iq];
        let u = moments.velocity(iq);
        for ip in 0..fl {
            values.push(maxwellian_value(n, rho, u, theta, grid.p_point(ip)));
        }
    }
    DistributionFunction::new(PhaseField::from_values(grid, values)?)
}

/// Local Maxwellian `f_m` sharing `ρ`, `u` and `θ` with `f`.
pub fn local_maxwellian<R: Real>(f: &DistributionFunction<R>) -> Result<DistributionFunction<R>> {
    maxwellian_from_moments(&LocalMoments::of(f)?)
}

/// Mean density, velocity and temperature of `f` over the torus.
pub fn mean_state<R: Real>(f: &DistributionFunction<R>) -> Result<MeanState<R>> {
    let grid = f.grid();
    let n = grid.n();
    let vol = grid.volume();
    let mass = integrate_qp(f.field());
    if !(mass > R::zero()) {
        return Err(KinError::NoMass);
    }
    let rho0 = mass / vol;
    let mut u0 = [R::zero(); 2];
    for (i, mi) in momentum_density(f.field()).iter().enumerate() {
        u0[i] = integrate_q(mi) / mass;
    }
    let energy2 = integrate_qp(&f.field().map_with_coords(|v, _, p| {
        let mut p2 = R::zero();
        for pi in p.iter().take(n) {
            p2 += *pi * *pi;
        }
        v * p2
    }));
    let mut state = MeanState { n, rho0, u0, theta0: R::zero() };
    state.theta0 = (energy2 / (rho0 * vol) - state.speed_sq()) / R::from_usize_lossy(n);
    if !(state.theta0 > R::zero()) {
        return Err(KinError::NonPositiveTemperature(0));
    }
    Ok(state)
}

/// Spatially uniform Maxwellian built from a mean state.
pub fn maxwellian_from_mean<R: Real>(grid: &PhaseGrid<R>, mean: &MeanState<R>) -> Result<DistributionFunction<R>> {
    DistributionFunction::from_fn(grid, |_, p| maxwellian_value(mean.n, mean.rho0, mean.u0, mean.theta0, p))
}

/// Global Maxwellian `f_M` and the mean state it was built from.
pub fn global_maxwellian<R: Real>(f: &DistributionFunction<R>) -> Result<(DistributionFunction<R>, MeanState<R>)> {
    let mean = mean_state(f)?;
    Ok((maxwellian_from_mean(f.grid(), &mean)?, mean))
}

/// `h(z) = (1 + z) log(1 + z) - z`, accurate for tiny `|z|`.
pub fn h_fn<R: Real>(z: R) -> R {
    if z.abs() < R::lit(1e-4) {
        // z^2/2 - z^3/6 + z^4/12 - z^5/20
        let z2 = z * z;
        z2 * (R::lit(0.5) - z / R::lit(6.0) + z2 / R::lit(12.0) - z2 * z / R::lit(20.0))
    } else if z == -R::one() {
        R::one()
    } else {
        (R::one() + z) * z.ln_1p() - z
    }
}

/// `k(z) = z - log(1 + z)`, accurate for tiny `|z|`.
pub fn k_fn<R: Real>(z: R) -> R {
    if z.abs() < R::lit(1e-4) {
        // z^2/2 - z^3/3 + z^4/4 - z^5/5
        let z2 = z * z;
        z2 * (R::lit(0.5) - z / R::lit(3.0) + z2 / R::lit(4.0) - z2 * z / R::lit(5.0))
    } else {
        z - z.ln_1p()
    }
}

/// Pointwise integrand `f1 log(f1/f2) - f1 + f2`, written as `f2 h(f1/f2 - 1)`.
#[inline]
fn relative_integrand<R: Real>(f1: R, f2: R) -> Option<R> {
    if f1 <= R::zero() {
        return Some(f2);
    }
    if f2 <= R::zero() {
        return if f1 < R::lit(SUPPORT_TOL) { Some(R::zero()) } else { None };
    }
    let z = (f1 - f2) / f2;
    Some(f2 * h_fn(z))
}

/// Relative entropy density `r[f1|f2](q) = ∫ (f1 log(f1/f2) - f1 + f2) dp`.
pub fn relative_entropy_density<R: Real>(
    f1: &DistributionFunction<R>,
    f2: &DistributionFunction<R>,
) -> Result<SpatialField<R>> {
    if f1.grid() != f2.grid() {
        return Err(KinError::GridMismatch);
    }
    let mut values = Vec::with_capacity(f1.values().len());
    for (i, (&a, &b)) in f1.values().iter().zip(f2.values()).enumerate() {
        match relative_integrand(a, b) {
            Some(v) => values.push(v),
            None => return Err(KinError::SupportMismatch { index: i, value: a.as_f64() }),
        }
    }
    Ok(integrate_p(&PhaseField::from_values(f1.grid(), values)?))
}

/// Total relative entropy `R[f1|f2]`.
pub fn relative_entropy_total<R: Real>(f1: &DistributionFunction<R>, f2: &DistributionFunction<R>) -> Result<R> {
    Ok(integrate_q(&relative_entropy_density(f1, f2)?))
}

/// Ideal-gas temperature `T(ρ, s) = ρ^(2/n) / (2πe) exp(-(2/n) s/ρ)`.
pub fn eos_temperature<R: Real>(rho: R, s: R, n: usize) -> R {
    let two_over_n = R::lit(2.0) / R::from_usize_lossy(n);
    let two_pi_e = R::lit(2.0) * R::PI() * R::one().exp();
    rho.powf(two_over_n) / two_pi_e * (-two_over_n * s / rho).exp()
}

/// `T(ρ, s)` applied pointwise.
pub fn eos_temperature_field<R: Real>(rho: &SpatialField<R>, s: &SpatialField<R>) -> Result<SpatialField<R>> {
    let n = rho.grid().n();
    if let Some(i) = rho.values().iter().position(|&v| !(v > R::zero())) {
        return Err(KinError::NonPositiveDensity(i));
    }
    rho.zip_map(s, |r, s| eos_temperature(r, s, n))
}

/// Entropy density of a Maxwellian with density `ρ` and temperature `θ`:
/// `ρ log(ρ / (2πθ)^(n/2)) - nρ/2`.
pub fn maxwellian_entropy<R: Real>(rho: R, theta: R, n: usize) -> R {
    let half_n = R::from_usize_lossy(n) / R::lit(2.0);
    rho * (rho.ln() - half_n * (R::lit(2.0) * R::PI() * theta).ln()) - half_n * rho
}

/// The three temperature evaluations that must coincide, plus `T(ρ, s[f])`.
#[derive(Debug, Clone, PartialEq)]
pub struct ThetaIdentity<R: Real> {
    /// Kinetic temperature from the second moment.
    pub theta: SpatialField<R>,
    /// `T(ρ, s[f_m])` with `s[f_m]` from quadrature of the local Maxwellian.
    pub t_of_maxwellian: SpatialField<R>,
    /// `T(ρ, s[f]) exp((2/n) r[f|f_m] / ρ)`.
    pub t_corrected: SpatialField<R>,
    /// `T(ρ, s[f])`.
    pub t_eos: SpatialField<R>,
    /// Largest pointwise deviation from `θ`, relative to `θ`.
    pub residual: R,
}

pub fn theta_identity_check<R: Real>(f: &DistributionFunction<R>) -> Result<ThetaIdentity<R>> {
    let n = f.grid().n();
    let two_over_n = R::lit(2.0) / R::from_usize_lossy(n);
    let moments = LocalMoments::of(f)?;
    let fm = maxwellian_from_moments(&moments)?;
    let rho = &moments.rho;
    let s = generalized_entropy_density(f, 1);
    let s_m = generalized_entropy_density(&fm, 1);
    let r = relative_entropy_density(f, &fm)?;
    let t_eos = eos_temperature_field(rho, &s)?;
    let t_of_maxwellian = eos_temperature_field(rho, &s_m)?;
    let growth = r.zip_map(rho, |r, rho| (two_over_n * r / rho).exp())?;
    let t_corrected = t_eos.zip_map(&growth, |t, g| t * g)?;
    let theta = moments.theta;
    let mut residual = R::zero();
    for iq in 0..theta.values().len() {
        let th = theta.values()[iq];
        for other in [&t_of_maxwellian, &t_corrected] {
            residual = residual.max((other.values()[iq] - th).abs() / th);
        }
    }
    Ok(ThetaIdentity { theta, t_of_maxwellian, t_corrected, t_eos, residual })
}

/// Split of `R[f_m|f_M]` into density, thermal and velocity contributions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GlobalSplit<R: Real> {
    pub density: R,
    pub thermal: R,
    pub velocity: R,
}

impl<R: Real> GlobalSplit<R> {
    pub fn total(&self) -> R {
        self.density + self.thermal + self.velocity
    }
}

/// `∫ (ρ0 h((ρ-ρ0)/ρ0) + (n/2) ρ k((θ-θ0)/θ0) + ρ |u-u0|^2 / 2θ0) dq`.
pub fn global_split<R: Real>(moments: &LocalMoments<R>, mean: &MeanState<R>) -> GlobalSplit<R> {
    let grid = moments.rho.grid();
    let n = grid.n();
    let half_n = R::from_usize_lossy(n) / R::lit(2.0);
    let (mut d, mut t, mut v) = (R::zero(), R::zero(), R::zero());
    for iq in 0..grid.spatial_len() {
        let rho = moments.rho.values()[iq];
        let theta = moments.theta.values()[iq];
        let u = moments.velocity(iq);
        d += mean.rho0 * h_fn((rho - mean.rho0) / mean.rho0);
        t += half_n * rho * k_fn((theta - mean.theta0) / mean.theta0);
        let mut du2 = R::zero();
        for i in 0..n {
            du2 += (u[i] - mean.u0[i]) * (u[i] - mean.u0[i]);
        }
        v += rho * du2 / (mean.theta0 + mean.theta0);
    }
    let w = grid.wq();
    GlobalSplit { density: d * w, thermal: t * w, velocity: v * w }
}
