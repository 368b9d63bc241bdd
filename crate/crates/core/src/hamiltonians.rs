//! Kinetic, fluid and mean-field Hamiltonians and the decomposition
//! `H_KT = J_1^* H_fluids + ΔH`.

use rustfft::num_complex::Complex;

use crate::error::{KinError, Result};
use crate::grid::spectral::{fft_axis, wavenumber};
use crate::grid::{integrate_q, integrate_qp, SpatialField};
use crate::maxwellian::{eos_temperature, local_maxwellian, relative_entropy_density, LocalMoments};
use crate::moments::{poisson_map_ja, DistributionFunction, HydroState};
use crate::scalar::Real;

/// Mean-field interaction model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CouplingConstants<R: Real> {
    Neutral,
    /// Repulsive electrostatic interaction with strength `e^2`.
    Electrostatic {
        e2: R,
    },
    /// Attractive gravitational interaction with strength `G`.
    SelfGravitating {
        g: R,
    },
}

impl<R: Real> CouplingConstants<R> {
    pub fn electrostatic(e2: R) -> Result<Self> {
        if !(e2 >= R::zero()) {
            return Err(KinError::Domain(format!("e^2 = {e2} must be nonnegative")));
        }
        Ok(Self::Electrostatic { e2 })
    }

    pub fn self_gravitating(g: R) -> Result<Self> {
        if !(g >= R::zero()) {
            return Err(KinError::Domain(format!("G = {g} must be nonnegative")));
        }
        Ok(Self::SelfGravitating { g })
    }

    /// Signed coefficient in `-∇²φ = κ (ρ - ρ̄)`: `e^2`, `-G` or zero.
    pub fn signed(&self) -> R {
        match *self {
            Self::Neutral => R::zero(),
            Self::Electrostatic { e2 } => e2,
            Self::SelfGravitating { g } => -g,
        }
    }

    pub fn is_self_gravitating(&self) -> bool {
        matches!(self, Self::SelfGravitating { .. })
    }

    pub fn mode_name(&self) -> &'static str {
        match self {
            Self::Neutral => "neutral",
            Self::Electrostatic { .. } => "electrostatic",
            Self::SelfGravitating { .. } => "selfgravitating",
        }
    }
}

/// `∫ |p|^2/2 f dq dp`.
pub fn h_kinetic<R: Real>(f: &DistributionFunction<R>) -> R {
    let n = f.grid().n();
    integrate_qp(&f.field().map_with_coords(|v, _, p| {
        let mut p2 = R::zero();
        for pi in p.iter().take(n) {
            p2 += *pi * *pi;
        }
        v * p2 / R::lit(2.0)
    }))
}

/// `(∫ |m|^2 / 2ρ, ∫ (n/2) ρ θ)`: bulk and thermal parts of `H_KT`.
pub fn kinetic_split<R: Real>(f: &DistributionFunction<R>) -> Result<(R, R)> {
    let mom = LocalMoments::of(f)?;
    let grid = f.grid();
    let half_n = R::from_usize_lossy(grid.n()) / R::lit(2.0);
    let (mut bulk, mut thermal) = (R::zero(), R::zero());
    for iq in 0..grid.spatial_len() {
        let rho = mom.rho.values()[iq];
        let u2: R = mom.u.iter().map(|u| u.values()[iq] * u.values()[iq]).sum();
        bulk += rho * u2 / R::lit(2.0);
        thermal += half_n * rho * mom.theta.values()[iq];
    }
    Ok((bulk * grid.wq(), thermal * grid.wq()))
}

/// `∫ (|m|^2 / 2ρ + (n/2) ρ T(ρ, s_1)) dq`.
pub fn h_fluids<R: Real>(state: &HydroState<R>) -> Result<R> {
    if state.order() < 1 {
        return Err(KinError::Domain("fluid Hamiltonian needs the entropy density s_1".into()));
    }
    state.check_positive_density()?;
    let grid = state.grid();
    let n = grid.n();
    let half_n = R::from_usize_lossy(n) / R::lit(2.0);
    let mut acc = R::zero();
    for iq in 0..grid.spatial_len() {
        let rho = state.s[0].values()[iq];
        let s = state.s[1].values()[iq];
        let m2: R = state.m.iter().map(|m| m.values()[iq] * m.values()[iq]).sum();
        acc += m2 / (rho + rho) + half_n * rho * eos_temperature(rho, s, n);
    }
    Ok(acc * grid.wq())
}

/// `ΔH = (n/2) ∫ ρ θ (1 - exp(-(2/n) r[f|f_m] / ρ)) dq`, evaluated directly.
pub fn delta_h<R: Real>(f: &DistributionFunction<R>) -> Result<R> {
    Ok(integrate_q(&delta_h_density(f)?))
}

/// Integrand of `ΔH` as a function of q.
pub fn delta_h_density<R: Real>(f: &DistributionFunction<R>) -> Result<SpatialField<R>> {
    let n = f.grid().n();
    let half_n = R::from_usize_lossy(n) / R::lit(2.0);
    let mom = LocalMoments::of(f)?;
    let fm = local_maxwellian(f)?;
    let r = relative_entropy_density(f, &fm)?;
    let values = (0..f.grid().spatial_len())
        .map(|iq| {
            let rho = mom.rho.values()[iq];
            let eta = -(-r.values()[iq] / (half_n * rho)).exp_m1();
            half_n * rho * mom.theta.values()[iq] * eta
        })
        .collect();
    SpatialField::from_values(f.grid(), values)
}

/// `H_KT[f] - H_fluids(J_1[f])`: the same quantity by a separate route.
pub fn delta_h_by_difference<R: Real>(f: &DistributionFunction<R>) -> Result<R> {
    Ok(h_kinetic(f) - h_fluids(&poisson_map_ja(f, 1))?)
}

/// Solution of `-∇²φ = κ (ρ - ρ̄)` with zero mean, and the field energy
/// `½ ∫ (ρ - ρ̄) φ dq`.
pub fn greens_solve<R: Real>(rho: &SpatialField<R>, kappa: R) -> (SpatialField<R>, R) {
    let grid = rho.grid();
    let shape = grid.spatial_shape();
    let nq = grid.nq();
    let lq = grid.lq();
    let mut data: Vec<Complex<R>> = rho.values().iter().map(|&v| Complex::new(v, R::zero())).collect();
    for axis in 0..shape.len() {
        fft_axis(&mut data, &shape, axis, grid.fft_q(), false);
    }
    for (idx, c) in data.iter_mut().enumerate() {
        let mut k2 = R::zero();
        let mut rest = idx;
        for _ in 0..shape.len() {
            let j = rest % nq;
            rest /= nq;
            let k = wavenumber(j, nq, lq);
            k2 += k * k;
        }
        *c = if k2 == R::zero() { Complex::new(R::zero(), R::zero()) } else { *c * (kappa / k2) };
    }
    for axis in 0..shape.len() {
        fft_axis(&mut data, &shape, axis, grid.fft_q(), true);
    }
    let phi = SpatialField::from_raw(grid, data.iter().map(|c| c.re).collect());
    let mean = rho.mean();
    let energy =
        rho.values().iter().zip(phi.values()).map(|(&r, &p)| (r - mean) * p).sum::<R>() * grid.wq() / R::lit(2.0);
    (phi, energy)
}

/// Mean-field energy `½ κ ∫∫ ρ(q) ρ(q') G(q, q')` of the density of `f`.
pub fn field_energy<R: Real>(f: &DistributionFunction<R>, couplings: &CouplingConstants<R>) -> R {
    let kappa = couplings.signed();
    if kappa == R::zero() {
        return R::zero();
    }
    greens_solve(&crate::moments::density(f), kappa).1
}

/// `H_KT + ½ e^2 ∫∫ ρ ρ G`.
pub fn h_vlasov<R: Real>(f: &DistributionFunction<R>, couplings: &CouplingConstants<R>) -> R {
    h_kinetic(f) + field_energy(f, couplings)
}

/// `H_KT - ½ G ∫∫ ρ ρ G`.
pub fn h_selfgrav<R: Real>(f: &DistributionFunction<R>, couplings: &CouplingConstants<R>) -> R {
    h_vlasov(f, couplings)
}

/// Active Hamiltonian for the coupling mode.
pub fn h_total<R: Real>(f: &DistributionFunction<R>, couplings: &CouplingConstants<R>) -> R {
    h_vlasov(f, couplings)
}

/// Terms of `H = J_1^*(H_fluids + H_static) + ΔH`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Decomposition<R: Real> {
    pub h_total: R,
    pub h_kinetic: R,
    pub h_fluids: R,
    pub h_static: R,
    pub delta_h: R,
    pub delta_h_difference: R,
}

impl<R: Real> Decomposition<R> {
    /// `|H - J_1^*(H_fluids + H_static) - ΔH|`.
    pub fn residual(&self) -> R {
        (self.h_total - self.h_fluids - self.h_static - self.delta_h).abs()
    }

    pub fn relative_residual(&self) -> R {
        self.residual() / self.h_total.abs().max(R::lit(1e-300))
    }
}

pub fn decompose<R: Real>(f: &DistributionFunction<R>, couplings: &CouplingConstants<R>) -> Result<Decomposition<R>> {
    let h_kinetic = h_kinetic(f);
    let h_static = field_energy(f, couplings);
    let h_fluids = h_fluids(&poisson_map_ja(f, 1))?;
    Ok(Decomposition {
        h_total: h_kinetic + h_static,
        h_kinetic,
        h_fluids,
        h_static,
        delta_h: delta_h(f)?,
        delta_h_difference: h_kinetic - h_fluids,
    })
}
