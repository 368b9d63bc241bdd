//! Hydrodynamic images of distribution functions.
//!
//! A distribution `f(q, p)` is mapped to the momentum density
//! `m_i = ∫ p_i f dp` together with densities `∫ φ(f) dp` for a family of
//! fibre nonlinearities `φ`: the generalized entropies `y_a(x) = x (log x)^a`,
//! the Tsallis power `x^(1+ξ)` and the integer powers `x^(1+a)`.

use crate::error::{KinError, Result};
use crate::grid::{integrate_p, PhaseField, PhaseGrid, SpatialField};
use crate::scalar::Real;

/// Smallest argument fed to `ln` when evaluating `y_a` near zero.
pub const LOG_FLOOR: f64 = 1e-300;

/// Default cap on the generalized entropy order.
pub const DEFAULT_MAX_ORDER: usize = 8;

/// Admissible Tsallis exponents `ξ`.
pub const XI_RANGE: (f64, f64) = (-0.5, 1.0);

#[inline]
fn safe_ln<R: Real>(x: R) -> R {
    x.max(R::lit(LOG_FLOOR)).ln()
}

/// `y_a(x) = x (log x)^a`, continuous at `x = 0`.
pub fn y_a<R: Real>(x: R, a: usize) -> Result<R> {
    if x < R::zero() || x.is_nan() {
        return Err(KinError::Domain(format!("y_a undefined for x = {}", x)));
    }
    Ok(y_unchecked(x, a))
}

#[inline]
pub(crate) fn y_unchecked<R: Real>(x: R, a: usize) -> R {
    if a == 0 {
        return x;
    }
    if x == R::zero() {
        return R::zero();
    }
    x * safe_ln(x).powi(a as i32)
}

/// `y_a'(x) = (log x)^a + a (log x)^(a-1)`.
pub fn dy_a<R: Real>(x: R, a: usize) -> R {
    if a == 0 {
        return R::one();
    }
    let l = safe_ln(x);
    l.powi(a as i32) + R::from_usize_lossy(a) * l.powi(a as i32 - 1)
}

/// `x y_a''(x) = a (log x)^(a-1) + a (a-1) (log x)^(a-2)`.
pub fn x_d2y_a<R: Real>(x: R, a: usize) -> R {
    match a {
        0 => R::zero(),
        1 => R::one(),
        _ => {
            let l = safe_ln(x);
            let af = R::from_usize_lossy(a);
            af * l.powi(a as i32 - 1) + af * (af - R::one()) * l.powi(a as i32 - 2)
        }
    }
}

/// Nonlinearity integrated along the fibres to form a hydrodynamic density.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FibreFunction<R: Real> {
    /// `y_a(x) = x (log x)^a`.
    Entropy(usize),
    /// `x^(1+ξ)`, for positive `x`.
    Tsallis(R),
    /// `x^(1+a)`, defined for any sign of `x`.
    Power(usize),
}

impl<R: Real> FibreFunction<R> {
    pub fn value(&self, x: R) -> R {
        match *self {
            Self::Entropy(a) => y_unchecked(x.max(R::zero()), a),
            Self::Tsallis(xi) => {
                if x <= R::zero() {
                    R::zero()
                } else {
                    x.powf(R::one() + xi)
                }
            }
            Self::Power(a) => x.powi(a as i32 + 1),
        }
    }

    /// First derivative `φ'(x)`.
    pub fn first(&self, x: R) -> R {
        match *self {
            Self::Entropy(a) => dy_a(x, a),
            Self::Tsallis(xi) => (R::one() + xi) * x.max(R::lit(LOG_FLOOR)).powf(xi),
            Self::Power(a) => R::from_usize_lossy(a + 1) * x.powi(a as i32),
        }
    }

    /// `x φ''(x)`, finite wherever `φ'` is.
    pub fn x_second(&self, x: R) -> R {
        match *self {
            Self::Entropy(a) => x_d2y_a(x, a),
            Self::Tsallis(xi) => (R::one() + xi) * xi * x.max(R::lit(LOG_FLOOR)).powf(xi),
            Self::Power(a) => {
                let af = R::from_usize_lossy(a);
                (af + R::one()) * af * x.powi(a as i32)
            }
        }
    }

    /// `φ''(x)`. For `Power` this is evaluated without dividing by `x`.
    pub fn second(&self, x: R) -> R {
        match *self {
            Self::Power(a) => {
                if a == 0 {
                    R::zero()
                } else {
                    let af = R::from_usize_lossy(a);
                    (af + R::one()) * af * x.powi(a as i32 - 1)
                }
            }
            _ => self.x_second(x) / x.max(R::lit(LOG_FLOOR)),
        }
    }

    /// `x φ'(x) - φ(x)`, the antiderivative of `x φ''(x)` vanishing at 0.
    pub fn conjugate(&self, x: R) -> R {
        match *self {
            Self::Entropy(0) => R::zero(),
            Self::Entropy(a) => R::from_usize_lossy(a) * y_unchecked(x.max(R::zero()), a - 1),
            Self::Tsallis(xi) => xi * self.value(x),
            Self::Power(a) => R::from_usize_lossy(a) * x.powi(a as i32 + 1),
        }
    }

    /// `Θ(x) = ∫_0^x φ'(t) t ψ''(t) dt` for `φ = self`, `ψ = other`, when a
    /// closed form is available for the pair.
    pub fn cross_antiderivative(&self, other: &Self, x: R) -> Option<R> {
        match (*self, *other) {
            (Self::Entropy(a), Self::Entropy(b)) => {
                let prod = poly_mul(&log_poly_first::<R>(a), &log_poly_x_second::<R>(b));
                let anti = log_poly_antiderivative(&prod);
                if x <= R::zero() {
                    return Some(R::zero());
                }
                Some(x * poly_eval(&anti, safe_ln(x)))
            }
            (Self::Tsallis(xi), Self::Tsallis(eta)) => {
                let e = R::one() + xi + eta;
                if e <= R::zero() {
                    return None;
                }
                let c = (R::one() + xi) * (R::one() + eta) * eta;
                Some(if x <= R::zero() { R::zero() } else { c * x.powf(e) / e })
            }
            (Self::Power(a), Self::Power(b)) => {
                let (af, bf) = (R::from_usize_lossy(a), R::from_usize_lossy(b));
                let e = a + b + 1;
                Some((af + R::one()) * (bf + R::one()) * bf * x.powi(e as i32) / R::from_usize_lossy(e))
            }
            _ => None,
        }
    }
}

/// Coefficients in `L = log x` of `y_a'(x) = L^a + a L^(a-1)`.
fn log_poly_first<R: Real>(a: usize) -> Vec<R> {
    let mut c = vec![R::zero(); a + 1];
    c[a] = R::one();
    if a > 0 {
        c[a - 1] = R::from_usize_lossy(a);
    }
    c
}

/// Coefficients in `L` of `x y_b''(x) = b L^(b-1) + b (b-1) L^(b-2)`.
fn log_poly_x_second<R: Real>(b: usize) -> Vec<R> {
    let mut c = vec![R::zero(); b.max(1)];
    if b >= 1 {
        c[b - 1] = R::from_usize_lossy(b);
    }
    if b >= 2 {
        c[b - 2] = R::from_usize_lossy(b * (b - 1));
    }
    c
}

fn poly_mul<R: Real>(a: &[R], b: &[R]) -> Vec<R> {
    let mut out = vec![R::zero(); a.len() + b.len() - 1];
    for (i, &x) in a.iter().enumerate() {
        for (j, &y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

/// `∫_0^x P(log t) dt = x Q(log x)`, using `∫ L^k = x Σ_j (-1)^j k!/(k-j)! L^(k-j)`.
fn log_poly_antiderivative<R: Real>(p: &[R]) -> Vec<R> {
    let mut out = vec![R::zero(); p.len()];
    for (k, &c) in p.iter().enumerate() {
        let mut coef = c;
        for j in 0..=k {
            out[k - j] += coef;
            coef = -coef * R::from_usize_lossy(k - j);
        }
    }
    out
}

fn poly_eval<R: Real>(p: &[R], x: R) -> R {
    p.iter().rev().fold(R::zero(), |acc, &c| acc * x + c)
}

/// Nonnegative distribution function on a phase grid.
#[derive(Debug, Clone, PartialEq)]
pub struct DistributionFunction<R: Real> {
    field: PhaseField<R>,
    strictly_positive: bool,
}

impl<R: Real> DistributionFunction<R> {
    pub fn new(field: PhaseField<R>) -> Result<Self> {
        field.check_finite()?;
        if let Some((i, &v)) = field.values().iter().enumerate().find(|(_, &v)| v < R::zero()) {
            return Err(KinError::NegativeDistribution { index: i, value: v.as_f64() });
        }
        Self::from_nonnegative(field)
    }

    /// Clamps negative values to zero; returns the removed mass `∫ |f_-|`.
    pub fn clamped(field: PhaseField<R>) -> Result<(Self, R)> {
        field.check_finite()?;
        let w = field.grid().wq() * field.grid().wp();
        let mut removed = R::zero();
        let clamped = field.map(|v| {
            if v < R::zero() {
                removed += -v;
                R::zero()
            } else {
                v
            }
        });
        Ok((Self::from_nonnegative(clamped)?, removed * w))
    }

    fn from_nonnegative(field: PhaseField<R>) -> Result<Self> {
        let total: R = field.values().iter().copied().sum();
        if !(total > R::zero()) {
            return Err(KinError::NoMass);
        }
        let strictly_positive = field.min_value() > R::zero();
        Ok(Self { field, strictly_positive })
    }

    pub fn from_fn<F>(grid: &PhaseGrid<R>, f: F) -> Result<Self>
    where
        F: FnMut([R; 2], [R; 2]) -> R,
    {
        Self::new(PhaseField::from_fn(grid, f)?)
    }

    pub fn field(&self) -> &PhaseField<R> {
        &self.field
    }

    pub fn grid(&self) -> &PhaseGrid<R> {
        self.field.grid()
    }

    pub fn values(&self) -> &[R] {
        self.field.values()
    }

    pub fn strictly_positive(&self) -> bool {
        self.strictly_positive
    }

    pub fn into_field(self) -> PhaseField<R> {
        self.field
    }
}

/// Point in `s*_A`: momentum density and densities `s_0, ..., s_A`.
#[derive(Debug, Clone, PartialEq)]
pub struct HydroState<R: Real> {
    pub m: Vec<SpatialField<R>>,
    pub s: Vec<SpatialField<R>>,
}

impl<R: Real> HydroState<R> {
    pub fn new(m: Vec<SpatialField<R>>, s: Vec<SpatialField<R>>) -> Result<Self> {
        let grid = s.first().ok_or_else(|| KinError::Domain("empty density list".into()))?.grid();
        if m.len() != grid.n() {
            return Err(KinError::Domain(format!(
                "momentum has {} components on a {}-dimensional grid",
                m.len(),
                grid.n()
            )));
        }
        if m.iter().chain(&s).any(|f| f.grid() != grid) {
            return Err(KinError::GridMismatch);
        }
        Ok(Self { m, s })
    }

    /// Entropy order `A` (number of densities minus one).
    pub fn order(&self) -> usize {
        self.s.len() - 1
    }

    pub fn grid(&self) -> &PhaseGrid<R> {
        self.s[0].grid()
    }

    pub fn density(&self) -> &SpatialField<R> {
        &self.s[0]
    }

    pub fn check_positive_density(&self) -> Result<()> {
        match self.s[0].values().iter().position(|&v| !(v > R::zero())) {
            Some(i) => Err(KinError::NonPositiveDensity(i)),
            None => Ok(()),
        }
    }

    /// CSV with columns `iq, m0.., s0..sA`.
    pub fn write_csv<W: std::io::Write>(&self, mut w: W) -> std::io::Result<()> {
        let mut header = vec!["iq".to_string()];
        header.extend((0..self.m.len()).map(|i| format!("m{i}")));
        header.extend((0..self.s.len()).map(|a| format!("s{a}")));
        writeln!(w, "{}", header.join(","))?;
        for iq in 0..self.grid().spatial_len() {
            let mut row = iq.to_string();
            for f in self.m.iter().chain(&self.s) {
                row.push_str(&format!(",{:.16e}", f.values()[iq].as_f64()));
            }
            writeln!(w, "{row}")?;
        }
        Ok(())
    }
}

/// Componentwise `∫ p_i f dp`. Accepts sign-indefinite fields.
pub fn momentum_density<R: Real>(f: &PhaseField<R>) -> Vec<SpatialField<R>> {
    (0..f.grid().n()).map(|i| integrate_p(&f.map_with_coords(|v, _, p| v * p[i]))).collect()
}

/// Mass density `∫ f dp`.
pub fn density<R: Real>(f: &DistributionFunction<R>) -> SpatialField<R> {
    integrate_p(f.field())
}

/// `∫ φ(f) dp` for a fibre nonlinearity.
pub fn fibre_density<R: Real>(f: &PhaseField<R>, phi: FibreFunction<R>) -> SpatialField<R> {
    integrate_p(&f.map(|v| phi.value(v)))
}

/// `s_a = ∫ f (log f)^a dp`.
pub fn generalized_entropy_density<R: Real>(f: &DistributionFunction<R>, a: usize) -> SpatialField<R> {
    fibre_density(f.field(), FibreFunction::Entropy(a))
}

fn check_xi<R: Real>(xi: R) -> Result<()> {
    if xi < R::lit(XI_RANGE.0) || xi > R::lit(XI_RANGE.1) || xi.is_nan() {
        return Err(KinError::Domain(format!("xi = {xi} outside [{}, {}]", XI_RANGE.0, XI_RANGE.1)));
    }
    Ok(())
}

/// Tsallis density `ρ_ξ = ∫ f^(1+ξ) dp`.
pub fn tsallis_density<R: Real>(f: &DistributionFunction<R>, xi: R) -> Result<SpatialField<R>> {
    check_xi(xi)?;
    Ok(fibre_density(f.field(), FibreFunction::Tsallis(xi)))
}

/// `J_A[f] = (m, s_0, ..., s_A)`.
pub fn poisson_map_ja<R: Real>(f: &DistributionFunction<R>, order: usize) -> HydroState<R> {
    let m = momentum_density(f.field());
    let s = (0..=order).map(|a| generalized_entropy_density(f, a)).collect();
    HydroState { m, s }
}

/// `J_ξ[f] = (m, ρ_ξ)` in `s*_0`.
pub fn poisson_map_jxi<R: Real>(f: &DistributionFunction<R>, xi: R) -> Result<HydroState<R>> {
    let rho_xi = tsallis_density(f, xi)?;
    Ok(HydroState { m: momentum_density(f.field()), s: vec![rho_xi] })
}

/// `J^pol_A[f] = (m, ∫ f, ∫ f^2, ..., ∫ f^(1+A))`; `f` may change sign.
pub fn poisson_map_jpol<R: Real>(f: &PhaseField<R>, order: usize) -> HydroState<R> {
    let m = momentum_density(f);
    let s = (0..=order).map(|a| fibre_density(f, FibreFunction::Power(a))).collect();
    HydroState { m, s }
}

/// Mean velocity `u = m / ρ` and kinetic temperature
/// `θ = (1 / nρ) ∫ |p - u|^2 f dp`.
pub fn kinetic_velocity_temperature<R: Real>(
    f: &DistributionFunction<R>,
) -> Result<(Vec<SpatialField<R>>, SpatialField<R>)> {
    let grid = f.grid();
    let n = grid.n();
    let rho = density(f);
    if let Some(i) = rho.values().iter().position(|&v| !(v > R::zero())) {
        return Err(KinError::NonPositiveDensity(i));
    }
    let m = momentum_density(f.field());
    let u: Vec<SpatialField<R>> = m.iter().map(|mi| mi.zip_map(&rho, |a, b| a / b).expect("same grid")).collect();
    let fl = grid.fibre_len();
    let wp = grid.wp();
    let nf = R::from_usize_lossy(n);
    let theta: Vec<R> = (0..grid.spatial_len())
        .map(|iq| {
            let uq = [u[0].values()[iq], if n > 1 { u[1].values()[iq] } else { R::zero() }];
            let fibre = f.field().fibre(iq);
            let second: R = (0..fl)
                .map(|ip| {
                    let p = grid.p_point(ip);
                    let mut c2 = R::zero();
                    for i in 0..n {
                        c2 += (p[i] - uq[i]) * (p[i] - uq[i]);
                    }
                    c2 * fibre[ip]
                })
                .sum();
            second * wp / (nf * rho.values()[iq])
        })
        .collect();
    Ok((u, SpatialField::from_raw(grid, theta)))
}

/// Strictly upper-triangular matrix of entropy gauge constants, `lambda[b][a]`
/// for `b < a`.
#[derive(Debug, Clone, PartialEq)]
pub struct GaugeMatrix<R: Real> {
    entries: Vec<Vec<R>>,
}

impl<R: Real> GaugeMatrix<R> {
    pub fn new(entries: Vec<Vec<R>>) -> Result<Self> {
        let dim = entries.len();
        for (b, row) in entries.iter().enumerate() {
            if row.len() != dim {
                return Err(KinError::Domain("gauge matrix must be square".into()));
            }
            for (a, &v) in row.iter().enumerate() {
                if b >= a && v != R::zero() {
                    return Err(KinError::Domain(format!("gauge entry ({b},{a}) = {v} on or below the diagonal")));
                }
            }
        }
        Ok(Self { entries })
    }

    pub fn zero(dim: usize) -> Self {
        Self { entries: vec![vec![R::zero(); dim]; dim] }
    }

    pub fn dim(&self) -> usize {
        self.entries.len()
    }

    pub fn get(&self, b: usize, a: usize) -> R {
        self.entries[b][a]
    }

    /// Gauge matrix of the inverse transformation: if `U = I + Λ` then the
    /// returned `Λ'` satisfies `(I + Λ)(I + Λ') = I`.
    pub fn inverse(&self) -> Self {
        let d = self.dim();
        // Solve (I + Λ) X = I column by column; X is unipotent upper triangular.
        let mut x = vec![vec![R::zero(); d]; d];
        for col in 0..d {
            for row in (0..d).rev() {
                let mut acc = if row == col { R::one() } else { R::zero() };
                for k in row + 1..d {
                    acc -= self.entries[row][k] * x[k][col];
                }
                x[row][col] = acc;
            }
        }
        for (i, row) in x.iter_mut().enumerate() {
            row[i] = R::zero();
        }
        Self { entries: x }
    }
}

/// `s̃_a = s_a + Σ_{b<a} s_b Λ_ba`; momentum unchanged.
pub fn gauge_shift<R: Real>(state: &HydroState<R>, lambda: &GaugeMatrix<R>) -> Result<HydroState<R>> {
    if lambda.dim() != state.s.len() {
        return Err(KinError::Domain(format!("gauge matrix of size {} for order {}", lambda.dim(), state.order())));
    }
    let s = (0..state.s.len())
        .map(|a| {
            let mut acc = state.s[a].clone();
            for b in 0..a {
                let c = lambda.get(b, a);
                if c != R::zero() {
                    acc = acc.zip_map(&state.s[b], |x, y| x + c * y)?;
                }
            }
            Ok(acc)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(HydroState { m: state.m.clone(), s })
}

/// Smooth bump supported on `[-width/2, width/2]`.
pub fn bump<R: Real>(x: R, width: R) -> R {
    let z = (x + x) / width;
    if z.abs() >= R::one() {
        R::zero()
    } else {
        (-R::one() / (R::one() - z * z)).exp()
    }
}

/// `f_c(p) = (B(p - c) + B(p + c)) / 2`, constant in q (n = 1).
pub fn bimodal_counterexample<R: Real>(grid: &PhaseGrid<R>, c: R, width: R) -> Result<DistributionFunction<R>> {
    if grid.n() != 1 {
        return Err(KinError::Unsupported("bimodal counterexample is one-dimensional".into()));
    }
    if c < R::one() {
        return Err(KinError::Domain(format!("shift c = {c} must be >= 1")));
    }
    if !(width > R::zero()) || width > R::one() {
        return Err(KinError::Domain(format!("bump width {width} not in (0, 1]")));
    }
    if c + width / R::lit(2.0) > grid.pmax() {
        return Err(KinError::Domain(format!("bump at c = {c} leaves the p box")));
    }
    DistributionFunction::from_fn(grid, |_, p| (bump(p[0] - c, width) + bump(p[0] + c, width)) / R::lit(2.0))
}
