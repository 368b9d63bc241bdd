//! Constants of motion and the a-priori bounds on `ΔH` for collisionless
//! and Vlasov-Poisson evolution.

use crate::error::{KinError, Result};
use crate::grid::{integrate_q, SpatialField};
use crate::hamiltonians::{delta_h, h_total, CouplingConstants};
use crate::maxwellian::{
    global_maxwellian, k_fn, local_maxwellian, relative_entropy_density, relative_entropy_total, LocalMoments,
    MeanState,
};
use crate::moments::{generalized_entropy_density, DistributionFunction};
use crate::scalar::Real;

/// Absolute slack allowed on every inequality for quadrature round-off.
pub const BOUND_SLACK: f64 = 1e-12;

/// Constants of motion and relative entropies of one distribution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConservedSet<R: Real> {
    pub mean: MeanState<R>,
    /// Hamiltonian of the active coupling mode.
    pub h: R,
    /// `R[f | f_M]`.
    pub r_in: R,
    /// `R[f | f_m]`.
    pub r_m: R,
    /// `R[f_m | f_M]`.
    pub r_big_m: R,
    /// Modified temperature; `None` without a mean field.
    pub phi0: Option<R>,
    /// Entropy bound with `θ_0` replaced by `Φ_0`; `None` without a mean field.
    pub s_in: Option<R>,
}

impl<R: Real> ConservedSet<R> {
    /// `|R_in - (R_m + R_M)|`, zero in exact arithmetic.
    pub fn split_residual(&self) -> R {
        (self.r_in - self.r_m - self.r_big_m).abs()
    }
}

/// `∫ f log f + ρ_0 vol (-log ρ_0 + (n/2) log t + (n/2) log 2πe)`: equals
/// `R_in` for `t = θ_0` and `S_in` for `t = Φ_0`.
fn cross_entropy_form<R: Real>(f: &DistributionFunction<R>, mean: &MeanState<R>, t: R) -> R {
    let grid = f.grid();
    let half_n = R::from_usize_lossy(grid.n()) / R::lit(2.0);
    let two_pi_e = R::lit(2.0) * R::PI() * R::one().exp();
    let entropy = integrate_q(&generalized_entropy_density(f, 1));
    entropy + mean.rho0 * grid.volume() * (-mean.rho0.ln() + half_n * t.ln() + half_n * two_pi_e.ln())
}

/// `R_in` from the closed form in `∫ f log f` and the mean state.
pub fn maxwellian_cross_entropy<R: Real>(f: &DistributionFunction<R>) -> Result<R> {
    let mean = crate::maxwellian::mean_state(f)?;
    Ok(cross_entropy_form(f, &mean, mean.theta0))
}

/// `Φ_0` from `ρ_0 (|u_0|^2 + n Φ_0) vol = 2 H`.
pub fn modified_temperature<R: Real>(
    f: &DistributionFunction<R>,
    mean: &MeanState<R>,
    couplings: &CouplingConstants<R>,
) -> R {
    let vol = f.grid().volume();
    let n = R::from_usize_lossy(mean.n);
    (R::lit(2.0) * h_total(f, couplings) / (mean.rho0 * vol) - mean.speed_sq()) / n
}

pub fn conserved_set<R: Real>(
    f: &DistributionFunction<R>,
    couplings: &CouplingConstants<R>,
) -> Result<ConservedSet<R>> {
    let (fbig, mean) = global_maxwellian(f)?;
    let fm = local_maxwellian(f)?;
    let r_in = relative_entropy_total(f, &fbig)?;
    let r_m = relative_entropy_total(f, &fm)?;
    let r_big_m = relative_entropy_total(&fm, &fbig)?;
    let (phi0, s_in) = match couplings {
        CouplingConstants::Neutral => (None, None),
        _ => {
            let phi0 = modified_temperature(f, &mean, couplings);
            let s_in = if phi0 > R::zero() { cross_entropy_form(f, &mean, phi0) } else { R::nan() };
            (Some(phi0), Some(s_in))
        }
    };
    Ok(ConservedSet { mean, h: h_total(f, couplings), r_in, r_m, r_big_m, phi0, s_in })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundStatus {
    Pass,
    Fail,
    /// Self-gravitating mode: no upper bound on `θ_0` by constants of motion.
    NotApplicable,
}

/// Outcome of `ΔH <= rhs`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundCheck<R: Real> {
    pub delta_h: R,
    pub rhs: R,
    /// `rhs - ΔH`.
    pub margin: R,
    pub status: BoundStatus,
}

impl<R: Real> BoundCheck<R> {
    fn new(delta_h: R, rhs: R) -> Self {
        let margin = rhs - delta_h;
        let status = if margin >= -R::lit(BOUND_SLACK) { BoundStatus::Pass } else { BoundStatus::Fail };
        Self { delta_h, rhs, margin, status }
    }
}

/// `ΔH <= 2 θ_0 R_in` (neutral) or `ΔH <= 2 Φ_0 S_in` (electrostatic).
pub fn check_bound<R: Real>(f: &DistributionFunction<R>, couplings: &CouplingConstants<R>) -> Result<BoundCheck<R>> {
    let set = conserved_set(f, couplings)?;
    bound_from_set(f, couplings, &set)
}

/// [`check_bound`] reusing an already computed [`ConservedSet`].
pub fn bound_from_set<R: Real>(
    f: &DistributionFunction<R>,
    couplings: &CouplingConstants<R>,
    set: &ConservedSet<R>,
) -> Result<BoundCheck<R>> {
    let dh = delta_h(f)?;
    let two = R::lit(2.0);
    Ok(match (couplings, set.phi0, set.s_in) {
        (CouplingConstants::Neutral, _, _) => BoundCheck::new(dh, two * set.mean.theta0 * set.r_in),
        (CouplingConstants::Electrostatic { .. }, Some(phi0), Some(s_in)) => BoundCheck::new(dh, two * phi0 * s_in),
        (CouplingConstants::SelfGravitating { .. }, phi0, s_in) => {
            let rhs = match (phi0, s_in) {
                (Some(p), Some(s)) => two * p * s,
                _ => R::nan(),
            };
            BoundCheck { delta_h: dh, rhs, margin: rhs - dh, status: BoundStatus::NotApplicable }
        }
        _ => return Err(KinError::Domain("mean-field quantities missing".into())),
    })
}

/// One inequality `lhs <= rhs` of the bound's derivation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Inequality<R: Real> {
    pub lhs: R,
    pub rhs: R,
}

impl<R: Real> Inequality<R> {
    pub fn margin(&self) -> R {
        self.rhs - self.lhs
    }

    pub fn holds(&self) -> bool {
        self.margin() >= -R::lit(BOUND_SLACK)
    }
}

/// Intermediate inequalities of the collisionless bound, evaluated on `f`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProofSteps<R: Real> {
    /// `∫ ρ η^a <= (2/n) R_m` for `a = 1, 2`, `η = 1 - exp(-2r/nρ)`.
    pub eta_powers: [Inequality<R>; 2],
    /// `∫ ρ θ̂^2 <= ∫ ρ k((θ - θ_0)/θ_0)`, `θ̂ = sqrt(θ/θ_0) - 1`.
    pub renormalized: Inequality<R>,
    /// `∫ ρ k((θ - θ_0)/θ_0) <= (2/n) R_M`.
    pub thermal: Inequality<R>,
    /// `ΔH <= 2 θ_0 (R_m + R_M)`.
    pub assembly: Inequality<R>,
    /// `∫ ρ |u - u_0|^2 / 2θ_0 <= R_in`.
    pub mach: Inequality<R>,
}

impl<R: Real> ProofSteps<R> {
    pub fn all(&self) -> Vec<(&'static str, Inequality<R>)> {
        vec![
            ("eta_power_1", self.eta_powers[0]),
            ("eta_power_2", self.eta_powers[1]),
            ("renormalized_fluctuation", self.renormalized),
            ("thermal_fluctuation", self.thermal),
            ("assembly", self.assembly),
            ("mach", self.mach),
        ]
    }

    pub fn all_hold(&self) -> bool {
        self.all().iter().all(|(_, i)| i.holds())
    }
}

pub fn proof_steps<R: Real>(f: &DistributionFunction<R>) -> Result<ProofSteps<R>> {
    let grid = f.grid();
    let half_n = R::from_usize_lossy(grid.n()) / R::lit(2.0);
    let set = conserved_set(f, &CouplingConstants::Neutral)?;
    let lm = LocalMoments::of(f)?;
    let fm = local_maxwellian(f)?;
    let r = relative_entropy_density(f, &fm)?;
    let theta0 = set.mean.theta0;
    let field = |g: &dyn Fn(usize) -> R| -> Result<R> {
        let v = (0..grid.spatial_len()).map(g).collect();
        Ok(integrate_q(&SpatialField::from_values(grid, v)?))
    };
    let rho = |iq: usize| lm.rho.values()[iq];
    let eta = |iq: usize| -(-r.values()[iq] / (half_n * rho(iq))).exp_m1();
    let rel_theta = |iq: usize| (lm.theta.values()[iq] - theta0) / theta0;
    let bound_m = set.r_m / half_n;
    let eta1 = field(&|iq| rho(iq) * eta(iq))?;
    let eta2 = field(&|iq| rho(iq) * eta(iq) * eta(iq))?;
    let hat2 = field(&|iq| {
        let h = (lm.theta.values()[iq] / theta0).sqrt() - R::one();
        rho(iq) * h * h
    })?;
    let kint = field(&|iq| rho(iq) * k_fn(rel_theta(iq)))?;
    let mach = field(&|iq| {
        let du2: R =
            lm.u.iter()
                .enumerate()
                .map(|(i, ui)| {
                    let d = ui.values()[iq] - set.mean.u0[i];
                    d * d
                })
                .sum();
        rho(iq) * du2 / (theta0 + theta0)
    })?;
    Ok(ProofSteps {
        eta_powers: [Inequality { lhs: eta1, rhs: bound_m }, Inequality { lhs: eta2, rhs: bound_m }],
        renormalized: Inequality { lhs: hat2, rhs: kint },
        thermal: Inequality { lhs: kint, rhs: set.r_big_m / half_n },
        assembly: Inequality { lhs: delta_h(f)?, rhs: R::lit(2.0) * theta0 * (set.r_m + set.r_big_m) },
        mach: Inequality { lhs: mach, rhs: set.r_in },
    })
}
