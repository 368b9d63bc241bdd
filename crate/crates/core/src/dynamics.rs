//! Time evolution: collisionless free streaming, Vlasov-Poisson by Strang
//! splitting, and a finite-volume compressible Euler solver, plus a scenario
//! runner that records conserved quantities and bounds.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::bounds::{bound_from_set, conserved_set, BoundStatus};
use crate::error::{KinError, Result};
use crate::grid::spectral::{apply_shift, transform_lines};
use crate::grid::{
    ddq_spatial, integrate_p, integrate_q, integrate_qp, p_boundary_ratio, GridConfig, PhaseField, SpatialField,
    BOUNDARY_DECAY_TOL,
};
use crate::hamiltonians::{delta_h, greens_solve, h_fluids, CouplingConstants};
use crate::maxwellian::{eos_temperature, maxwellian_value};
use crate::moments::{generalized_entropy_density, momentum_density, poisson_map_ja, DistributionFunction, HydroState};
use crate::samples::{random_distribution, trial_rng, StateFamily};
use crate::scalar::Real;

/// Clamped negative mass, relative to the total, above which a warning is
/// logged.
pub const CLAMP_WARN_FRACTION: f64 = 1e-10;

/// Exact free streaming `f(q, p) <- f(q - p dt, p)` by a Fourier phase shift
/// along every q-axis.
pub fn free_stream_step<R: Real>(f: &PhaseField<R>, dt: R) -> PhaseField<R> {
    let grid = f.grid();
    let shape = grid.phase_shape();
    let fl = grid.fibre_len();
    let lq = grid.lq();
    let mut values = f.values().to_vec();
    for axis in 0..grid.n() {
        values = transform_lines(&values, &shape, axis, grid.fft_q(), |base, coeffs| {
            let p = grid.p_point(base % fl)[axis];
            apply_shift(coeffs, lq, p * dt);
        });
    }
    PhaseField::from_raw(grid, values)
}

/// Momentum kick `f(q, p) <- f(q, p + dt ∇φ(q))` by a Fourier phase shift
/// along every p-axis.
fn kick<R: Real>(f: &PhaseField<R>, grad_phi: &[SpatialField<R>], dt: R) -> PhaseField<R> {
    let grid = f.grid();
    let shape = grid.phase_shape();
    let fl = grid.fibre_len();
    let period = grid.pmax() + grid.pmax();
    let mut values = f.values().to_vec();
    for (i, g) in grad_phi.iter().enumerate() {
        values = transform_lines(&values, &shape, grid.n() + i, grid.fft_p(), |base, coeffs| {
            apply_shift(coeffs, period, -dt * g.values()[base / fl]);
        });
    }
    PhaseField::from_raw(grid, values)
}

/// Mean-field potential gradient `∇φ` with `-∇²φ = κ (ρ - ρ̄)`.
pub fn potential_gradient<R: Real>(
    f: &PhaseField<R>,
    couplings: &CouplingConstants<R>,
) -> Result<Vec<SpatialField<R>>> {
    let (phi, _) = greens_solve(&integrate_p(f), couplings.signed());
    (0..f.grid().n()).map(|i| ddq_spatial(&phi, i)).collect()
}

/// One Strang step: half free stream, full kick in the self-consistent
/// field, half free stream.
pub fn vlasov_poisson_step<R: Real>(
    f: &PhaseField<R>,
    dt: R,
    couplings: &CouplingConstants<R>,
) -> Result<PhaseField<R>> {
    let half = dt / R::lit(2.0);
    let g = free_stream_step(f, half);
    let out = if couplings.signed() == R::zero() {
        g
    } else {
        let grad = potential_gradient(&g, couplings)?;
        kick(&g, &grad, dt)
    };
    let out = free_stream_step(&out, half);
    let ratio = p_boundary_ratio(&out);
    if ratio > R::lit(BOUNDARY_DECAY_TOL) {
        log::warn!("vlasov step: p-boundary amplitude ratio {:.3e}", ratio.as_f64());
    }
    Ok(out)
}

/// Conserved variables of the one-dimensional Euler system.
#[derive(Debug, Clone, PartialEq)]
pub struct EulerState<R: Real> {
    pub rho: SpatialField<R>,
    pub m: SpatialField<R>,
    pub s: SpatialField<R>,
}

impl<R: Real> EulerState<R> {
    pub fn new(rho: SpatialField<R>, m: SpatialField<R>, s: SpatialField<R>) -> Result<Self> {
        if rho.grid().n() != 1 {
            return Err(KinError::Unsupported("the Euler solver is one-dimensional".into()));
        }
        if rho.grid() != m.grid() || rho.grid() != s.grid() {
            return Err(KinError::GridMismatch);
        }
        let st = Self { rho, m, s };
        st.check()?;
        Ok(st)
    }

    /// `(ρ, m, s) = (s_0, m, s_1)` of a hydrodynamic state.
    pub fn from_hydro(state: &HydroState<R>) -> Result<Self> {
        if state.order() < 1 {
            return Err(KinError::Domain("Euler state needs s_1".into()));
        }
        Self::new(state.s[0].clone(), state.m[0].clone(), state.s[1].clone())
    }

    pub fn to_hydro(&self) -> Result<HydroState<R>> {
        HydroState::new(vec![self.m.clone()], vec![self.rho.clone(), self.s.clone()])
    }

    fn check(&self) -> Result<()> {
        for (i, (&r, &s)) in self.rho.values().iter().zip(self.s.values()).enumerate() {
            if !(r > R::zero()) {
                return Err(KinError::NonPositiveDensity(i));
            }
            if !(eos_temperature(r, s, 1) > R::zero()) {
                return Err(KinError::NonPositiveTemperature(i));
            }
        }
        Ok(())
    }

    /// `∫ (m^2/2ρ + ρT/2) dq`.
    pub fn hamiltonian(&self) -> Result<R> {
        h_fluids(&self.to_hydro()?)
    }

    /// Totals `(∫ρ, ∫m, ∫s)`.
    pub fn totals(&self) -> [R; 3] {
        [integrate_q(&self.rho), integrate_q(&self.m), integrate_q(&self.s)]
    }

    /// Largest `|u| + c`, `c = sqrt(3T)`.
    pub fn max_speed(&self) -> R {
        let mut a = R::zero();
        for ((&r, &m), &s) in self.rho.values().iter().zip(self.m.values()).zip(self.s.values()) {
            a = a.max(wave_speed([r, m, s]));
        }
        a
    }

    /// Step size with Courant number `cfl`.
    pub fn cfl_dt(&self, cfl: R) -> R {
        cfl * self.rho.grid().dq() / self.max_speed()
    }
}

const EULER_GAMMA: f64 = 3.0;

/// Courant number used when a scenario step is sub-cycled.
pub const EULER_CFL: f64 = 0.45;

fn wave_speed<R: Real>(u: [R; 3]) -> R {
    let t = eos_temperature(u[0], u[2], 1);
    (u[1] / u[0]).abs() + (R::lit(EULER_GAMMA) * t).sqrt()
}

fn euler_flux<R: Real>(u: [R; 3]) -> [R; 3] {
    let vel = u[1] / u[0];
    let p = u[0] * eos_temperature(u[0], u[2], 1);
    [u[1], u[1] * vel + p, vel * u[2]]
}

fn minmod<R: Real>(a: R, b: R) -> R {
    if a * b <= R::zero() {
        R::zero()
    } else if a.abs() < b.abs() {
        a
    } else {
        b
    }
}

/// `-∂_q F(U)` with MUSCL-minmod reconstruction and the Rusanov flux.
fn euler_rhs<R: Real>(u: &[Vec<R>; 3], dq: R) -> [Vec<R>; 3] {
    let n = u[0].len();
    let slope: Vec<[R; 3]> = (0..n)
        .map(|i| {
            let (l, r) = ((i + n - 1) % n, (i + 1) % n);
            [0, 1, 2].map(|c| minmod(u[c][i] - u[c][l], u[c][r] - u[c][i]))
        })
        .collect();
    let half = R::lit(0.5);
    let flux: Vec<[R; 3]> = (0..n)
        .map(|i| {
            let r = (i + 1) % n;
            let ul = [0, 1, 2].map(|c| u[c][i] + half * slope[i][c]);
            let ur = [0, 1, 2].map(|c| u[c][r] - half * slope[r][c]);
            let a = wave_speed(ul).max(wave_speed(ur));
            let (fl, fr) = (euler_flux(ul), euler_flux(ur));
            [0, 1, 2].map(|c| half * (fl[c] + fr[c]) - half * a * (ur[c] - ul[c]))
        })
        .collect();
    [0, 1, 2].map(|c| (0..n).map(|i| -(flux[i][c] - flux[(i + n - 1) % n][c]) / dq).collect())
}

/// One SSP-RK2 step of the finite-volume Euler scheme.
pub fn euler_step<R: Real>(state: &EulerState<R>, dt: R) -> Result<EulerState<R>> {
    let grid = state.rho.grid();
    let dq = grid.dq();
    let u0 = [state.rho.values().to_vec(), state.m.values().to_vec(), state.s.values().to_vec()];
    let k0 = euler_rhs(&u0, dq);
    let u1: [Vec<R>; 3] = [0, 1, 2].map(|c| u0[c].iter().zip(&k0[c]).map(|(&a, &k)| a + dt * k).collect());
    EulerState::new(
        SpatialField::from_values(grid, u1[0].clone())?,
        SpatialField::from_values(grid, u1[1].clone())?,
        SpatialField::from_values(grid, u1[2].clone())?,
    )?;
    let k1 = euler_rhs(&u1, dq);
    let half = R::lit(0.5);
    let u2: [Vec<R>; 3] =
        [0, 1, 2].map(|c| (0..u0[c].len()).map(|i| half * u0[c][i] + half * (u1[c][i] + dt * k1[c][i])).collect());
    let [r, m, s] = u2;
    EulerState::new(
        SpatialField::from_values(grid, r)?,
        SpatialField::from_values(grid, m)?,
        SpatialField::from_values(grid, s)?,
    )
}

/// Integrates to `t_end` at Courant number `cfl`, landing on `t_end` exactly.
pub fn euler_run<R: Real>(state: &EulerState<R>, t_end: R, cfl: R) -> Result<EulerState<R>> {
    let mut st = state.clone();
    let mut t = R::zero();
    while t < t_end {
        let dt = st.cfl_dt(cfl).min(t_end - t);
        st = euler_step(&st, dt).map_err(|e| abort(t, e))?;
        t += dt;
    }
    Ok(st)
}

fn abort<R: Real>(t: R, e: KinError) -> KinError {
    KinError::SolverAbort { time: t.as_f64(), reason: e.to_string() }
}

/// Serializable mean-field coupling.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case", deny_unknown_fields)]
pub enum CouplingConfig {
    Neutral,
    Electrostatic { e2: f64 },
    SelfGravitating { g: f64 },
}

impl CouplingConfig {
    pub fn build<R: Real>(&self) -> Result<CouplingConstants<R>> {
        match *self {
            Self::Neutral => Ok(CouplingConstants::Neutral),
            Self::Electrostatic { e2 } => CouplingConstants::electrostatic(R::lit(e2)),
            Self::SelfGravitating { g } => CouplingConstants::self_gravitating(R::lit(g)),
        }
    }
}

/// Named initial-condition families.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialCondition {
    /// `f_M(p) (1 + ε cos(2π k q_0 / L))` with a uniform Maxwellian `f_M`.
    Perturbed { epsilon: f64, mode: usize, rho0: f64, u0: f64, theta0: f64 },
    /// A member of the random near-Maxwellian family, smooth in q.
    Random { seed: u64, trial: u64 },
}

impl InitialCondition {
    pub fn build<R: Real>(&self, grid: &crate::grid::PhaseGrid<R>) -> Result<DistributionFunction<R>> {
        match *self {
            Self::Perturbed { epsilon, mode, rho0, u0, theta0 } => {
                let k = R::lit(2.0 * std::f64::consts::PI * mode as f64) / grid.lq();
                let n = grid.n();
                DistributionFunction::from_fn(grid, |q, p| {
                    let fm = maxwellian_value(n, R::lit(rho0), [R::lit(u0), R::zero()], R::lit(theta0), p);
                    fm * (R::one() + R::lit(epsilon) * (k * q[0]).cos())
                })
            }
            Self::Random { seed, trial } => {
                random_distribution(grid, &mut trial_rng(seed, trial), &StateFamily::smooth())
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Model {
    /// Kinetic evolution: free streaming (neutral) or Vlasov-Poisson.
    Kinetic,
    /// Euler system started from the `J_1` image of the initial data.
    Euler,
}

/// Complete description of one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub grid: GridConfig,
    pub initial: InitialCondition,
    pub coupling: CouplingConfig,
    #[serde(default = "default_model")]
    pub model: Model,
    pub dt: f64,
    pub t_end: f64,
    /// Record diagnostics every this many steps (and at the end).
    pub sample_every: usize,
    /// Highest generalized-entropy total recorded.
    #[serde(default = "default_entropy_order")]
    pub entropy_order: usize,
}

fn default_model() -> Model {
    Model::Kinetic
}

fn default_entropy_order() -> usize {
    4
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0) || !(self.t_end >= 0.0) || !self.dt.is_finite() || !self.t_end.is_finite() {
            return Err(KinError::Domain("dt must be positive and t_end nonnegative".into()));
        }
        if self.sample_every == 0 {
            return Err(KinError::Domain("sample_every must be at least 1".into()));
        }
        let limit = 0.5 * (self.grid.lq / self.grid.nq as f64) / self.grid.pmax;
        if self.model == Model::Kinetic && self.coupling != CouplingConfig::Neutral && self.dt > limit {
            log::warn!("dt = {} exceeds 0.5 dq / pmax = {limit:.3e}; splitting error may be large", self.dt);
        }
        Ok(())
    }

    pub fn steps(&self) -> usize {
        (self.t_end / self.dt).round() as usize
    }
}

/// Diagnostics at one sample time. Kinetic-only entries are `None` for
/// Euler runs.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiagnosticSample {
    pub t: f64,
    /// Active Hamiltonian (`H_KT`, `H_VP`, `H_SG` or `H_fluids`).
    pub h: f64,
    pub mass: f64,
    pub momentum: Vec<f64>,
    /// Totals of `s_0..s_A` (`s_0, s_1` only for Euler runs).
    pub s_totals: Vec<f64>,
    pub delta_h: Option<f64>,
    pub rho0: Option<f64>,
    pub u0: Option<Vec<f64>>,
    pub theta0: Option<f64>,
    pub phi0: Option<f64>,
    pub r_in: Option<f64>,
    pub s_in: Option<f64>,
    pub bound_rhs: Option<f64>,
    pub bound_margin: Option<f64>,
    pub bound_status: Option<BoundStatus>,
    /// Negative mass removed before computing moments.
    pub clamp_mass: f64,
}

/// Time series of a run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiagnosticSeries {
    pub scenario: Scenario,
    pub samples: Vec<DiagnosticSample>,
}

/// Run-level conservation report. Drifts are the largest deviation from the
/// initial value over all samples, relative to the initial value (`s_a`
/// totals relative to `max(|s_a(0)|, mass)`).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunSummary {
    pub scenario: Scenario,
    pub samples: usize,
    pub t_final: f64,
    pub h_drift: f64,
    pub mass_drift: f64,
    pub s_total_drift: Vec<f64>,
    pub min_bound_margin: Option<f64>,
    pub bounds_pass: bool,
    pub max_clamp_fraction: f64,
}

fn opt(x: Option<f64>) -> String {
    x.map(|v| format!("{v:.17e}")).unwrap_or_default()
}

impl DiagnosticSeries {
    /// Largest relative deviation of `key(sample)` from its initial value,
    /// relative to `max(|initial|, floor)`.
    pub fn max_drift(&self, key: impl Fn(&DiagnosticSample) -> f64, floor: f64) -> f64 {
        let Some(first) = self.samples.first() else { return 0.0 };
        let x0 = key(first);
        let scale = x0.abs().max(floor);
        self.samples.iter().map(|s| (key(s) - x0).abs() / scale).fold(0.0, f64::max)
    }

    /// Final conservation errors and bound outcome.
    pub fn summary(&self) -> RunSummary {
        let mass = self.samples.first().map(|s| s.mass).unwrap_or(1.0);
        let ns = self.samples.first().map(|s| s.s_totals.len()).unwrap_or(0);
        RunSummary {
            scenario: self.scenario.clone(),
            samples: self.samples.len(),
            t_final: self.samples.last().map(|s| s.t).unwrap_or(0.0),
            h_drift: self.max_drift(|s| s.h, 0.0),
            mass_drift: self.max_drift(|s| s.mass, 0.0),
            s_total_drift: (0..ns).map(|a| self.max_drift(|s| s.s_totals[a], mass)).collect(),
            min_bound_margin: self.samples.iter().filter_map(|s| s.bound_margin).reduce(f64::min),
            bounds_pass: self.all_bounds_pass(),
            max_clamp_fraction: self.samples.iter().map(|s| s.clamp_mass / s.mass.abs()).fold(0.0, f64::max),
        }
    }

    pub fn all_bounds_pass(&self) -> bool {
        self.samples.iter().all(|s| s.bound_status != Some(BoundStatus::Fail))
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        let (nm, ns) = self.samples.first().map(|s| (s.momentum.len(), s.s_totals.len())).unwrap_or((0, 0));
        let mut header = vec!["t".to_string(), "h".into(), "mass".into()];
        header.extend((0..nm).map(|i| format!("momentum{i}")));
        header.extend((0..ns).map(|a| format!("s{a}_total")));
        header.extend(["delta_h", "rho0"].map(String::from));
        header.extend((0..nm).map(|i| format!("u0_{i}")));
        header.extend(
            ["theta0", "phi0", "r_in", "s_in", "bound_rhs", "bound_margin", "bound_status", "clamp_mass"]
                .map(String::from),
        );
        writeln!(w, "{}", header.join(","))?;
        for s in &self.samples {
            let mut row = vec![format!("{:.17e}", s.t), format!("{:.17e}", s.h), format!("{:.17e}", s.mass)];
            row.extend(s.momentum.iter().map(|v| format!("{v:.17e}")));
            row.extend(s.s_totals.iter().map(|v| format!("{v:.17e}")));
            row.push(opt(s.delta_h));
            row.push(opt(s.rho0));
            match &s.u0 {
                Some(u) => row.extend(u.iter().map(|v| format!("{v:.17e}"))),
                None => row.extend((0..nm).map(|_| String::new())),
            }
            for v in [s.theta0, s.phi0, s.r_in, s.s_in, s.bound_rhs, s.bound_margin] {
                row.push(opt(v));
            }
            row.push(match s.bound_status {
                Some(BoundStatus::Pass) => "pass".into(),
                Some(BoundStatus::Fail) => "fail".into(),
                Some(BoundStatus::NotApplicable) => "not_applicable".into(),
                None => String::new(),
            });
            row.push(format!("{:.17e}", s.clamp_mass));
            writeln!(w, "{}", row.join(","))?;
        }
        Ok(())
    }
}

fn kinetic_sample<R: Real>(
    t: R,
    field: &PhaseField<R>,
    couplings: &CouplingConstants<R>,
    entropy_order: usize,
) -> Result<DiagnosticSample> {
    let total: R = integrate_qp(field);
    let (f, clamp) = DistributionFunction::clamped(field.clone())?;
    if clamp > R::lit(CLAMP_WARN_FRACTION) * total.abs() {
        log::warn!("t = {:.4}: clamped negative mass {:.3e} of {:.3e}", t.as_f64(), clamp.as_f64(), total.as_f64());
    }
    let set = conserved_set(&f, couplings)?;
    let bound = bound_from_set(&f, couplings, &set)?;
    let n = f.grid().n();
    Ok(DiagnosticSample {
        t: t.as_f64(),
        h: set.h.as_f64(),
        mass: integrate_qp(f.field()).as_f64(),
        momentum: momentum_density(f.field()).iter().map(|m| integrate_q(m).as_f64()).collect(),
        s_totals: (0..=entropy_order).map(|a| integrate_q(&generalized_entropy_density(&f, a)).as_f64()).collect(),
        delta_h: Some(bound.delta_h.as_f64()),
        rho0: Some(set.mean.rho0.as_f64()),
        u0: Some(set.mean.u0[..n].iter().map(|v| v.as_f64()).collect()),
        theta0: Some(set.mean.theta0.as_f64()),
        phi0: set.phi0.map(|v| v.as_f64()),
        r_in: Some(set.r_in.as_f64()),
        s_in: set.s_in.map(|v| v.as_f64()),
        bound_rhs: Some(bound.rhs.as_f64()),
        bound_margin: Some(bound.margin.as_f64()),
        bound_status: Some(bound.status),
        clamp_mass: clamp.as_f64(),
    })
}

fn euler_sample<R: Real>(t: R, st: &EulerState<R>) -> Result<DiagnosticSample> {
    let [rho, m, s] = st.totals();
    Ok(DiagnosticSample {
        t: t.as_f64(),
        h: st.hamiltonian()?.as_f64(),
        mass: rho.as_f64(),
        momentum: vec![m.as_f64()],
        s_totals: vec![rho.as_f64(), s.as_f64()],
        delta_h: None,
        rho0: None,
        u0: None,
        theta0: None,
        phi0: None,
        r_in: None,
        s_in: None,
        bound_rhs: None,
        bound_margin: None,
        bound_status: None,
        clamp_mass: 0.0,
    })
}

/// Runs `scenario`, sampling diagnostics at `t = 0`, every `sample_every`
/// steps and at the final time.
pub fn run_simulation<R: Real>(scenario: &Scenario) -> Result<DiagnosticSeries> {
    scenario.validate()?;
    let grid = scenario.grid.build::<R>()?;
    let couplings = scenario.coupling.build::<R>()?;
    let f0 = scenario.initial.build(&grid)?;
    let dt = R::lit(scenario.dt);
    let steps = scenario.steps();
    let mut samples = Vec::new();
    match scenario.model {
        Model::Kinetic => {
            let mut field = f0.into_field();
            samples.push(kinetic_sample(R::zero(), &field, &couplings, scenario.entropy_order)?);
            for step in 1..=steps {
                field = vlasov_poisson_step(&field, dt, &couplings)?;
                let t = dt * R::from_usize_lossy(step);
                field.check_finite().map_err(|e| abort(t, e))?;
                if step % scenario.sample_every == 0 || step == steps {
                    samples
                        .push(kinetic_sample(t, &field, &couplings, scenario.entropy_order).map_err(|e| abort(t, e))?);
                }
            }
        }
        Model::Euler => {
            let mut st = EulerState::from_hydro(&poisson_map_ja(&f0, 1))?;
            samples.push(euler_sample(R::zero(), &st)?);
            for step in 1..=steps {
                let t = dt * R::from_usize_lossy(step);
                st = euler_run(&st, dt, R::lit(EULER_CFL)).map_err(|e| match e {
                    KinError::SolverAbort { time, reason } => {
                        KinError::SolverAbort { time: time + (t - dt).as_f64(), reason }
                    }
                    e => e,
                })?;
                if step % scenario.sample_every == 0 || step == steps {
                    samples.push(euler_sample(t, &st)?);
                }
            }
        }
    }
    Ok(DiagnosticSeries { scenario: scenario.clone(), samples })
}

/// `ΔH` along a trajectory, exposed for quick checks.
pub fn delta_h_of_field<R: Real>(field: &PhaseField<R>) -> Result<R> {
    delta_h(&DistributionFunction::clamped(field.clone())?.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::make_phase_grid;
    use crate::hamiltonians::h_vlasov;
    use std::f64::consts::PI;

    fn landau(grid: &crate::grid::PhaseGrid<f64>, eps: f64) -> PhaseField<f64> {
        InitialCondition::Perturbed { epsilon: eps, mode: 1, rho0: 1.0, u0: 0.0, theta0: 1.0 }
            .build(grid)
            .unwrap()
            .into_field()
    }

    #[test]
    fn free_streaming_matches_characteristics() {
        let g = make_phase_grid::<f64>(1, 2.0 * PI, 32, 8.0, 128).unwrap();
        let uniform = PhaseField::from_fn(&g, |_, p| (-p[0] * p[0] / 2.0).exp()).unwrap();
        let moved = free_stream_step(&uniform, 0.37);
        assert!(moved.values().iter().zip(uniform.values()).all(|(a, b)| (a - b).abs() < 1e-15));
        let f = landau(&g, 0.1);
        let t = 0.5;
        let out = free_stream_step(&f, t);
        let exact = PhaseField::from_fn(&g, |q, p| {
            maxwellian_value(1, 1.0, [0.0; 2], 1.0, p) * (1.0 + 0.1 * (q[0] - p[0] * t).cos())
        })
        .unwrap();
        let err = out.values().iter().zip(exact.values()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(err < 1e-10, "err {err:e}");
    }

    #[test]
    fn free_streaming_in_two_dimensions() {
        let g = make_phase_grid::<f64>(2, 2.0 * PI, 16, 8.0, 32).unwrap();
        let f = PhaseField::from_fn(&g, |q, p| {
            (-(p[0] * p[0] + p[1] * p[1]) / 2.0).exp() * (1.0 + 0.2 * (q[0] + 2.0 * q[1]).sin())
        })
        .unwrap();
        let t = 0.3;
        let out = free_stream_step(&f, t);
        let exact = PhaseField::from_fn(&g, |q, p| {
            (-(p[0] * p[0] + p[1] * p[1]) / 2.0).exp() * (1.0 + 0.2 * (q[0] - p[0] * t + 2.0 * (q[1] - p[1] * t)).sin())
        })
        .unwrap();
        let err = out.values().iter().zip(exact.values()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(err < 1e-10, "err {err:e}");
    }

    #[test]
    fn neutral_vlasov_step_is_free_streaming() {
        let g = make_phase_grid::<f64>(1, 2.0 * PI, 32, 8.0, 64).unwrap();
        let f = landau(&g, 0.05);
        let a = vlasov_poisson_step(&f, 0.1, &CouplingConstants::Neutral).unwrap();
        let b = free_stream_step(&free_stream_step(&f, 0.05), 0.05);
        assert_eq!(a, b);
    }

    #[test]
    fn vlasov_energy_drift_is_second_order() {
        let g = make_phase_grid::<f64>(1, 4.0 * PI, 32, 8.0, 128).unwrap();
        let c = CouplingConstants::electrostatic(1.0).unwrap();
        let f0 = landau(&g, 0.3);
        let h0 = h_vlasov(&DistributionFunction::clamped(f0.clone()).unwrap().0, &c);
        let drift = |dt: f64| {
            let mut f = f0.clone();
            let mut worst: f64 = 0.0;
            for _ in 0..(2.0 / dt).round() as usize {
                f = vlasov_poisson_step(&f, dt, &c).unwrap();
                let h = h_vlasov(&DistributionFunction::clamped(f.clone()).unwrap().0, &c);
                worst = worst.max((h - h0).abs() / h0);
            }
            worst
        };
        let (d1, d2) = (drift(0.1), drift(0.05));
        assert!(d1 < 1e-3);
        let ratio = d1 / d2;
        assert!((3.0..5.5).contains(&ratio), "ratio {ratio}");
    }

    fn euler_grid() -> crate::grid::PhaseGrid<f64> {
        make_phase_grid(1, 2.0 * PI, 256, 8.0, 8).unwrap()
    }

    #[test]
    fn euler_uniform_state_is_stationary() {
        let g = euler_grid();
        let st = EulerState::new(
            SpatialField::constant(&g, 1.2),
            SpatialField::constant(&g, 0.3),
            SpatialField::constant(&g, -0.5),
        )
        .unwrap();
        let out = euler_run(&st, 0.5, 0.45).unwrap();
        for (a, b) in [(&out.rho, &st.rho), (&out.m, &st.m), (&out.s, &st.s)] {
            assert!(a.values().iter().zip(b.values()).all(|(x, y)| (x - y).abs() < 1e-14));
        }
    }

    #[test]
    fn euler_pulse_travels_at_sound_speed_and_conserves_totals() {
        let g = euler_grid();
        let (rho0, eta) = (1.0, -0.5);
        let bump = |q: f64| 1e-3 * (-((q - PI) / 0.4).powi(2) / 2.0).exp();
        let rho = SpatialField::from_fn(&g, |q| rho0 + bump(q[0])).unwrap();
        let s = rho.map(|r| eta * r);
        let st = EulerState::new(rho, SpatialField::constant(&g, 0.0), s).unwrap();
        let t_end = 1.0;
        let out = euler_run(&st, t_end, 0.45).unwrap();
        let before = st.totals();
        let after = out.totals();
        for c in 0..3 {
            assert!((before[c] - after[c]).abs() < 1e-12 * before[c].abs().max(1.0));
        }
        let temp = eos_temperature(rho0, eta * rho0, 1);
        let c = (3.0 * temp).sqrt();
        let vals = out.rho.values();
        let len = vals.len();
        let half = len / 2;
        let idx = (half..len).max_by(|&i, &j| vals[i].partial_cmp(&vals[j]).unwrap()).unwrap();
        let (ym, y0, yp) = (vals[idx - 1], vals[idx], vals[(idx + 1) % len]);
        let x = g.q_point(idx)[0] + 0.5 * (ym - yp) / (ym - 2.0 * y0 + yp) * g.dq();
        let speed = (x - PI) / t_end;
        assert!((speed / c - 1.0).abs() < 0.02, "speed {speed} vs {c}");
    }

    #[test]
    fn euler_energy_drift_from_maxwellian_data() {
        let sc = Scenario {
            grid: GridConfig { n: 1, lq: 2.0 * PI, nq: 256, pmax: 8.0, np: 64 },
            initial: InitialCondition::Perturbed { epsilon: 0.1, mode: 1, rho0: 1.0, u0: 0.2, theta0: 0.8 },
            coupling: CouplingConfig::Neutral,
            model: Model::Euler,
            dt: 0.05,
            t_end: 1.0,
            sample_every: 4,
            entropy_order: 1,
        };
        let series = run_simulation::<f64>(&sc).unwrap();
        let summary = series.summary();
        assert!(summary.h_drift < 1e-4, "drift {:e}", summary.h_drift);
        assert!(summary.mass_drift < 1e-12 && summary.s_total_drift[1] < 1e-12);
        assert!((summary.t_final - 1.0).abs() < 1e-12);
    }

    #[test]
    fn euler_rejects_bad_states() {
        let g = euler_grid();
        let bad = EulerState::new(
            SpatialField::constant(&g, -1.0),
            SpatialField::constant(&g, 0.0),
            SpatialField::constant(&g, 0.0),
        );
        assert_eq!(bad, Err(KinError::NonPositiveDensity(0)));
        let g2 = make_phase_grid::<f64>(2, 2.0 * PI, 8, 8.0, 8).unwrap();
        let c = SpatialField::constant(&g2, 1.0);
        assert!(EulerState::new(c.clone(), c.clone(), c).is_err());
    }

    #[test]
    fn scenario_runs_and_serializes() {
        let sc = Scenario {
            grid: GridConfig { n: 1, lq: 2.0 * PI, nq: 16, pmax: 8.0, np: 64 },
            initial: InitialCondition::Perturbed { epsilon: 0.05, mode: 1, rho0: 1.0, u0: 0.1, theta0: 1.0 },
            coupling: CouplingConfig::Neutral,
            model: Model::Kinetic,
            dt: 0.05,
            t_end: 0.5,
            sample_every: 5,
            entropy_order: 2,
        };
        let series = run_simulation::<f64>(&sc).unwrap();
        assert_eq!(series.samples.len(), 3);
        assert!(series.all_bounds_pass());
        assert!(series.max_drift(|s| s.s_totals[2], 1.0) < 1e-10);
        let mut buf = Vec::new();
        series.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 4);
        assert!(text.starts_with("t,h,mass,momentum0,s0_total,s1_total,s2_total,delta_h"));
        let json = serde_json_like(&sc);
        assert!(json.contains("perturbed"));
        let euler = Scenario { model: Model::Euler, dt: 0.005, t_end: 0.05, ..sc };
        let es = run_simulation::<f64>(&euler).unwrap();
        assert!(es.max_drift(|s| s.mass, 1.0) < 1e-12);
    }

    fn serde_json_like(sc: &Scenario) -> String {
        format!("{:?}", sc).to_lowercase()
    }
}
