//! Seeded random inputs: positive distributions, sign-indefinite phase
//! fields and band-limited test functionals.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::brackets::LinearTestFunctional;
use crate::error::Result;
use crate::grid::{PhaseField, PhaseGrid, SpatialField};
use crate::maxwellian::maxwellian_value;
use crate::moments::DistributionFunction;
use crate::scalar::Real;

/// Generator for trial `trial` of a campaign seeded with `seed`.
pub fn trial_rng(seed: u64, trial: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial);
    rng
}

/// Parameters of the random near-Maxwellian family
/// `f = f_m(ρ(q), u(q), θ(q)) (1 + h(q, p)) + floor`.
#[derive(Debug, Clone, PartialEq)]
pub struct StateFamily {
    /// Range of the pole parameter in `ρ ∝ 1 / (1 - κ cos(k·q - φ))`; larger
    /// values put more weight in high q modes.
    pub kappa: (f64, f64),
    pub rho_scale: (f64, f64),
    pub theta: (f64, f64),
    /// Amplitude of the band-limited velocity and temperature modulation.
    pub u_amp: f64,
    pub theta_amp: f64,
    /// Bound on `|h|`; at most 0.5 keeps `f` positive.
    pub perturbation: f64,
    /// Constant added everywhere. A nonzero floor keeps `f` away from zero
    /// but leaves boundary terms at `±pmax` in p integrations by parts.
    pub floor: f64,
}

impl Default for StateFamily {
    fn default() -> Self {
        Self {
            kappa: (0.88, 0.93),
            rho_scale: (0.3, 0.6),
            theta: (0.5, 0.8),
            u_amp: 0.4,
            theta_amp: 0.15,
            perturbation: 0.4,
            floor: 0.0,
        }
    }
}

impl StateFamily {
    /// Spatially smooth family with only low q modes.
    pub fn smooth() -> Self {
        Self { kappa: (0.2, 0.4), ..Self::default() }
    }
}

struct Mode {
    k: [f64; 2],
    phase: f64,
    amp: f64,
}

fn random_modes<G: Rng>(rng: &mut G, n: usize, count: usize, max_k: i32, total_amp: f64) -> Vec<Mode> {
    let mut modes: Vec<Mode> = (0..count)
        .map(|_| {
            let mut k = [0.0; 2];
            loop {
                for ki in k.iter_mut().take(n) {
                    *ki = rng.gen_range(-max_k..=max_k) as f64;
                }
                if k.iter().any(|&x| x != 0.0) {
                    break;
                }
            }
            Mode { k, phase: rng.gen_range(0.0..std::f64::consts::TAU), amp: rng.gen_range(-1.0..1.0) }
        })
        .collect();
    let sum: f64 = modes.iter().map(|m| m.amp.abs()).sum();
    if sum > 0.0 {
        for m in &mut modes {
            m.amp *= total_amp / sum;
        }
    }
    modes
}

fn eval_modes(modes: &[Mode], x: &[f64; 2]) -> f64 {
    modes.iter().map(|m| m.amp * (m.k[0] * x[0] + m.k[1] * x[1] + m.phase).cos()).sum()
}

fn angles<R: Real>(grid: &PhaseGrid<R>, q: &[R; 2]) -> [f64; 2] {
    let s = std::f64::consts::TAU / grid.lq().as_f64();
    [q[0].as_f64() * s, q[1].as_f64() * s]
}

/// Random strictly positive distribution from `family`.
pub fn random_distribution<R: Real, G: Rng>(
    grid: &PhaseGrid<R>,
    rng: &mut G,
    family: &StateFamily,
) -> Result<DistributionFunction<R>> {
    let n = grid.n();
    let kappa = rng.gen_range(family.kappa.0..=family.kappa.1);
    let pole_phase = rng.gen_range(0.0..std::f64::consts::TAU);
    let rho_scale = rng.gen_range(family.rho_scale.0..=family.rho_scale.1);
    let theta_bar = rng.gen_range(family.theta.0..=family.theta.1);
    let u_bar: Vec<f64> = (0..n).map(|_| rng.gen_range(-0.1..0.1)).collect();
    let u_modes: Vec<Vec<Mode>> = (0..n).map(|_| random_modes(rng, n, 2, 2, family.u_amp)).collect();
    let theta_modes = random_modes(rng, n, 2, 2, family.theta_amp);
    let pert_space = random_modes(rng, n, 3, 3, 1.0);
    let freqs: Vec<[f64; 2]> =
        (0..3).map(|_| [rng.gen_range(0.5..1.5), if n > 1 { rng.gen_range(0.5..1.5) } else { 0.0 }]).collect();
    let p_phase: Vec<f64> = (0..3).map(|_| rng.gen_range(0.0..std::f64::consts::TAU)).collect();
    let eps = family.perturbation;
    let floor = family.floor;
    let f = PhaseField::from_fn(grid, |q, p| {
        let x = angles(grid, &q);
        let pole = if n == 1 { x[0] } else { x[0] + x[1] };
        let rho = rho_scale / (1.0 - kappa * (pole - pole_phase).cos());
        let mut u = [0.0; 2];
        for i in 0..n {
            u[i] = u_bar[i] + eval_modes(&u_modes[i], &x);
        }
        let theta = theta_bar * (1.0 + eval_modes(&theta_modes, &x));
        let pf = [p[0].as_f64(), p[1].as_f64()];
        let base = maxwellian_value(n, rho, u, theta, pf);
        let mut h = 0.0;
        for (j, m) in pert_space.iter().enumerate() {
            let arg = freqs[j][0] * (pf[0] - u[0]) + freqs[j][1] * (pf[1] - u[1]) + p_phase[j];
            h += m.amp * (m.k[0] * x[0] + m.k[1] * x[1] + m.phase).cos() * arg.cos();
        }
        R::lit(base * (1.0 + eps * h) + floor)
    })?;
    DistributionFunction::new(f)
}

/// Random sign-changing phase field: a Maxwellian envelope times an
/// oscillation with nonzero mean.
pub fn random_signed_field<R: Real, G: Rng>(
    grid: &PhaseGrid<R>,
    rng: &mut G,
    family: &StateFamily,
) -> Result<PhaseField<R>> {
    let n = grid.n();
    let kappa = rng.gen_range(family.kappa.0..=family.kappa.1);
    let pole_phase = rng.gen_range(0.0..std::f64::consts::TAU);
    let theta = rng.gen_range(0.5..0.8);
    let offset = rng.gen_range(0.2..0.5);
    let space = random_modes(rng, n, 3, 3, 1.0);
    let rho_modes = random_modes(rng, n, 2, 2, 0.3);
    let w = rng.gen_range(0.8..1.6);
    let phase = rng.gen_range(0.0..std::f64::consts::TAU);
    PhaseField::from_fn(grid, |q, p| {
        let x = angles(grid, &q);
        let pf = [p[0].as_f64(), p[1].as_f64()];
        let pole = if n == 1 { x[0] } else { x[0] + x[1] };
        let rho = (1.0 + eval_modes(&rho_modes, &x)) * (1.0 - kappa) / (1.0 - kappa * (pole - pole_phase).cos());
        let env = maxwellian_value(n, rho, [0.0; 2], theta, pf);
        let osc = (w * (pf[0] + pf[1]) + phase).cos() * (1.0 + eval_modes(&space, &x));
        R::lit(env * (offset + osc))
    })
}

/// Random trigonometric field with wavenumbers `|k_i| <= max_mode`.
pub fn random_bandlimited<R: Real, G: Rng>(
    grid: &PhaseGrid<R>,
    rng: &mut G,
    max_mode: usize,
    amplitude: f64,
) -> Result<SpatialField<R>> {
    let modes = random_modes(rng, grid.n(), 2 * max_mode.max(1), max_mode as i32, amplitude);
    let mean = rng.gen_range(-amplitude..amplitude) / 2.0;
    SpatialField::from_fn(grid, |q| R::lit(mean + eval_modes(&modes, &angles(grid, &q))))
}

/// Random band-limited test functional with `components` entropy slots.
pub fn random_functional<R: Real, G: Rng>(
    grid: &PhaseGrid<R>,
    rng: &mut G,
    components: usize,
    max_mode: usize,
) -> Result<LinearTestFunctional<R>> {
    let u = (0..grid.n()).map(|_| random_bandlimited(grid, rng, max_mode, 1.0)).collect::<Result<_>>()?;
    let g = (0..components).map(|_| random_bandlimited(grid, rng, max_mode, 1.0)).collect::<Result<_>>()?;
    LinearTestFunctional::new(u, g)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::make_phase_grid;
    use std::f64::consts::PI;

    #[test]
    fn reproducible_and_positive() {
        let g = make_phase_grid::<f64>(1, 2.0 * PI, 64, 8.0, 128).unwrap();
        let fam = StateFamily::default();
        let a = random_distribution(&g, &mut trial_rng(7, 3), &fam).unwrap();
        let b = random_distribution(&g, &mut trial_rng(7, 3), &fam).unwrap();
        let c = random_distribution(&g, &mut trial_rng(7, 4), &fam).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert!(a.field().min_value() > 0.0);
        let s = random_signed_field(&g, &mut trial_rng(1, 0), &fam).unwrap();
        assert!(s.min_value() < 0.0 && s.max_abs() > 0.0);
    }

    #[test]
    fn functionals_are_band_limited() {
        let g = make_phase_grid::<f64>(1, 2.0 * PI, 32, 8.0, 16).unwrap();
        for t in 0..5 {
            let fa: LinearTestFunctional<f64> = random_functional(&g, &mut trial_rng(11, t), 3, 4).unwrap();
            assert!(fa.is_band_limited());
        }
        let g2 = make_phase_grid::<f64>(2, 2.0 * PI, 16, 8.0, 8).unwrap();
        let fb: LinearTestFunctional<f64> = random_functional(&g2, &mut trial_rng(11, 0), 2, 3).unwrap();
        assert!(fb.is_band_limited() && fb.u.len() == 2);
    }
}
