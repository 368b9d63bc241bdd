//! Poisson-map verification: both sides of
//! `{F∘J, G∘J}_KT = {F, G}_{s*_A} ∘ J` for linear test functionals.
//!
//! The kinetic side is `∫ f {δF/δf, δG/δf} dq dp` with spectral derivatives
//! of `f`. The pulled-back derivative `δF/δf = u·p + Σ_a w_a(p) φ_a'(f) g_a(q)`
//! is differentiated analytically, so the integrand is assembled as
//!
//! `f (B_F·Ũ_G - B_G·Ũ_F) + f_p·(B_F a_G - B_G a_F) + f_q·(a_F Ũ_G - a_G Ũ_F)`
//!
//! with `Ũ = u + Σ g_a ∇w_a φ_a'(f)`, `B_i = ∂_i u·p + Σ w_a φ_a'(f) ∂_i g_a`
//! and `a = Σ w_a f φ_a''(f) g_a`. The `f_q f_p / f` terms cancel identically
//! and are never formed.

use rustfft::num_complex::Complex;

use crate::error::{KinError, Result};
use crate::grid::spectral::fft_axis;
use crate::grid::{ddp, ddq, ddq_spatial, integrate_p, integrate_q, PhaseField, PhaseGrid, SpatialField};
use crate::moments::{momentum_density, FibreFunction, HydroState, DEFAULT_MAX_ORDER, XI_RANGE};
use crate::scalar::Real;

/// Point `(u, (g_0, ..., g_A))` of the Lie algebra, used as the linear
/// functional `(m, s) ↦ ∫ (m·u + Σ s_a g_a) dq`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearTestFunctional<R: Real> {
    pub u: Vec<SpatialField<R>>,
    pub g: Vec<SpatialField<R>>,
}

impl<R: Real> LinearTestFunctional<R> {
    pub fn new(u: Vec<SpatialField<R>>, g: Vec<SpatialField<R>>) -> Result<Self> {
        let grid = g.first().ok_or_else(|| KinError::Domain("functional needs at least g_0".into()))?.grid();
        if u.len() != grid.n() {
            return Err(KinError::Domain(format!("u has {} components, expected {}", u.len(), grid.n())));
        }
        if u.iter().chain(&g).any(|f| f.grid() != grid) {
            return Err(KinError::GridMismatch);
        }
        Ok(Self { u, g })
    }

    pub fn zero(grid: &PhaseGrid<R>, components: usize) -> Self {
        let z = SpatialField::constant(grid, R::zero());
        Self { u: vec![z.clone(); grid.n()], g: vec![z; components] }
    }

    pub fn grid(&self) -> &PhaseGrid<R> {
        self.g[0].grid()
    }

    pub fn components(&self) -> usize {
        self.g.len()
    }

    pub fn scale(&self, c: R) -> Self {
        Self { u: self.u.iter().map(|f| f.scale(c)).collect(), g: self.g.iter().map(|f| f.scale(c)).collect() }
    }

    /// Whether every field has no Fourier content in the top third of modes.
    pub fn is_band_limited(&self) -> bool {
        self.u.iter().chain(&self.g).all(|f| top_third_energy(f) <= R::lit(1e-24))
    }
}

/// Largest squared Fourier coefficient (relative to the largest overall)
/// among modes with `|k| > N/3` on any axis.
fn top_third_energy<R: Real>(field: &SpatialField<R>) -> R {
    let grid = field.grid();
    let shape = grid.spatial_shape();
    let nq = grid.nq();
    let mut data: Vec<Complex<R>> = field.values().iter().map(|&v| Complex::new(v, R::zero())).collect();
    for axis in 0..shape.len() {
        fft_axis(&mut data, &shape, axis, grid.fft_q(), false);
    }
    let cut = nq / 3;
    let (mut top, mut all) = (R::zero(), R::zero());
    for (idx, c) in data.iter().enumerate() {
        let e = c.norm_sqr();
        all = all.max(e);
        let mut rest = idx;
        let mut high = false;
        for _ in 0..shape.len() {
            let j = rest % nq;
            rest /= nq;
            let signed = if j <= nq / 2 { j } else { nq - j };
            high |= signed > cut;
        }
        if high {
            top = top.max(e);
        }
    }
    if all == R::zero() {
        R::zero()
    } else {
        top / all
    }
}

/// `∫ (m·u + Σ s_a g_a) dq`.
pub fn functional_value<R: Real>(func: &LinearTestFunctional<R>, state: &HydroState<R>) -> Result<R> {
    if func.grid() != state.grid() {
        return Err(KinError::GridMismatch);
    }
    if func.components() != state.s.len() {
        return Err(KinError::Domain(format!(
            "functional has {} entropy slots, state has {}",
            func.components(),
            state.s.len()
        )));
    }
    let mut acc = R::zero();
    for (m, u) in state.m.iter().zip(&func.u) {
        acc += integrate_q(&m.zip_map(u, |a, b| a * b)?);
    }
    for (s, g) in state.s.iter().zip(&func.g) {
        acc += integrate_q(&s.zip_map(g, |a, b| a * b)?);
    }
    Ok(acc)
}

/// Momentum weight multiplying a fibre nonlinearity in a density `∫ w(p) φ(f) dp`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MomentWeight {
    Unit,
    /// `|p|^2 / 2`.
    HalfSquare,
}

impl MomentWeight {
    fn value<R: Real>(self, p: &[R; 2], n: usize) -> R {
        match self {
            Self::Unit => R::one(),
            Self::HalfSquare => (0..n).map(|i| p[i] * p[i]).sum::<R>() / R::lit(2.0),
        }
    }

    fn gradient<R: Real>(self, p: &[R; 2]) -> [R; 2] {
        match self {
            Self::Unit => [R::zero(); 2],
            Self::HalfSquare => *p,
        }
    }
}

/// Map from distributions to `s*_A`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MapVariant<R: Real> {
    /// `(m, s_0, ..., s_A)` with `s_a = ∫ f (log f)^a`.
    Entropy { order: usize },
    /// `(m, ∫ f^(1+ξ))`.
    Tsallis { xi: R },
    /// `(m, ∫ f, ..., ∫ f^(1+A))`.
    Polynomial { order: usize },
    /// `(m, ∫ f, ∫ |p|^2 f / 2)`. Not a Poisson map; used as a control.
    SecondMoment,
}

impl<R: Real> MapVariant<R> {
    pub fn validate(&self) -> Result<()> {
        match *self {
            Self::Entropy { order } | Self::Polynomial { order } if order > DEFAULT_MAX_ORDER => {
                Err(KinError::Domain(format!("order {order} above the cap {DEFAULT_MAX_ORDER}")))
            }
            Self::Tsallis { xi } if xi < R::lit(XI_RANGE.0) || xi > R::lit(XI_RANGE.1) => {
                Err(KinError::Domain(format!("xi = {xi} outside [{}, {}]", XI_RANGE.0, XI_RANGE.1)))
            }
            _ => Ok(()),
        }
    }

    pub fn components(&self) -> Vec<(FibreFunction<R>, MomentWeight)> {
        match *self {
            Self::Entropy { order } => (0..=order).map(|a| (FibreFunction::Entropy(a), MomentWeight::Unit)).collect(),
            Self::Tsallis { xi } => vec![(FibreFunction::Tsallis(xi), MomentWeight::Unit)],
            Self::Polynomial { order } => (0..=order).map(|a| (FibreFunction::Power(a), MomentWeight::Unit)).collect(),
            Self::SecondMoment => {
                vec![(FibreFunction::Power(0), MomentWeight::Unit), (FibreFunction::Power(0), MomentWeight::HalfSquare)]
            }
        }
    }

    pub fn allows_sign_change(&self) -> bool {
        matches!(self, Self::Polynomial { .. } | Self::SecondMoment)
    }

    pub fn label(&self) -> String {
        match self {
            Self::Entropy { order } => format!("entropy:{order}"),
            Self::Tsallis { xi } => format!("tsallis:{xi}"),
            Self::Polynomial { order } => format!("polynomial:{order}"),
            Self::SecondMoment => "second-moment".into(),
        }
    }

    /// Image of `f` in `s*_A`.
    pub fn image(&self, f: &PhaseField<R>) -> Result<HydroState<R>> {
        self.validate()?;
        self.check_input(f)?;
        let n = f.grid().n();
        let s = self
            .components()
            .into_iter()
            .map(|(phi, w)| integrate_p(&f.map_with_coords(|v, _, p| w.value(&p, n) * phi.value(v))))
            .collect();
        Ok(HydroState { m: momentum_density(f), s })
    }

    fn check_input(&self, f: &PhaseField<R>) -> Result<()> {
        f.check_finite()?;
        if !self.allows_sign_change() {
            if let Some((i, &v)) = f.values().iter().enumerate().find(|(_, &v)| v < R::zero()) {
                return Err(KinError::NegativeDistribution { index: i, value: v.as_f64() });
            }
        }
        Ok(())
    }
}

/// Fibrewise-affine phase function `a(q) + b(q)·p`.
#[derive(Debug, Clone, PartialEq)]
pub struct FibreAffine<R: Real> {
    pub offset: SpatialField<R>,
    pub slope: Vec<SpatialField<R>>,
}

impl<R: Real> FibreAffine<R> {
    pub fn to_phase(&self) -> PhaseField<R> {
        PhaseField::from_spatial(&self.offset).zip_map(&self.linear_part(), |a, b| a + b).expect("same grid")
    }

    fn linear_part(&self) -> PhaseField<R> {
        let grid = self.offset.grid();
        let fl = grid.fibre_len();
        let mut values = vec![R::zero(); grid.len()];
        for iq in 0..grid.spatial_len() {
            for ip in 0..fl {
                let p = grid.p_point(ip);
                values[iq * fl + ip] = (0..grid.n()).map(|i| self.slope[i].values()[iq] * p[i]).sum();
            }
        }
        PhaseField::from_values(grid, values).expect("finite")
    }
}

/// Closed-form canonical bracket of two fibrewise-affine functions:
/// `{u·p + g, v·p + h} = -[u, v]·p - (u·∇h - v·∇g)`.
pub fn affine_bracket<R: Real>(a: &FibreAffine<R>, b: &FibreAffine<R>) -> Result<FibreAffine<R>> {
    let grid = a.offset.grid();
    let n = grid.n();
    let lie = vector_lie_bracket(&a.slope, &b.slope)?;
    let slope = lie.iter().map(|f| f.scale(-R::one())).collect();
    let ugh = directional(&a.slope, &b.offset)?;
    let vgg = directional(&b.slope, &a.offset)?;
    let offset = ugh.zip_map(&vgg, |x, y| y - x)?;
    debug_assert_eq!(a.slope.len(), n);
    Ok(FibreAffine { offset, slope })
}

/// `u·∇g`.
fn directional<R: Real>(u: &[SpatialField<R>], g: &SpatialField<R>) -> Result<SpatialField<R>> {
    let mut acc = SpatialField::constant(g.grid(), R::zero());
    for (i, ui) in u.iter().enumerate() {
        let dg = ddq_spatial(g, i)?;
        acc = acc.zip_map(&ui.zip_map(&dg, |a, b| a * b)?, |a, b| a + b)?;
    }
    Ok(acc)
}

/// `[u, v]^i = u^j ∂_j v^i - v^j ∂_j u^i`.
pub fn vector_lie_bracket<R: Real>(u: &[SpatialField<R>], v: &[SpatialField<R>]) -> Result<Vec<SpatialField<R>>> {
    (0..u.len())
        .map(|i| {
            let a = directional(u, &v[i])?;
            let b = directional(v, &u[i])?;
            a.zip_map(&b, |x, y| x - y)
        })
        .collect()
}

/// Canonical bracket `∂_q a·∂_p b - ∂_q b·∂_p a` with spectral derivatives.
/// Both fields should decay at the p boundary.
pub fn canonical_bracket<R: Real>(a: &PhaseField<R>, b: &PhaseField<R>) -> Result<PhaseField<R>> {
    if a.grid() != b.grid() {
        return Err(KinError::GridMismatch);
    }
    let grid = a.grid();
    let mut acc = PhaseField::constant(grid, R::zero());
    for i in 0..grid.n() {
        let (aq, ap) = (ddq(a, i)?, ddp(a, i)?);
        let (bq, bp) = (ddq(b, i)?, ddp(b, i)?);
        let t1 = aq.zip_map(&bp, |x, y| x * y)?;
        let t2 = bq.zip_map(&ap, |x, y| x * y)?;
        acc = acc.zip_map(&t1.zip_map(&t2, |x, y| x - y)?, |x, y| x + y)?;
    }
    Ok(acc)
}

fn check_pairing<R: Real>(func: &LinearTestFunctional<R>, f: &PhaseField<R>, comps: usize) -> Result<()> {
    if func.grid() != f.grid() {
        return Err(KinError::GridMismatch);
    }
    if func.components() != comps {
        return Err(KinError::Domain(format!(
            "functional has {} entropy slots, map produces {}",
            func.components(),
            comps
        )));
    }
    Ok(())
}

/// `δ(F∘J)/δf = u·p + Σ_a w_a(p) φ_a'(f) g_a(q)`.
pub fn kt_variational_derivative<R: Real>(
    func: &LinearTestFunctional<R>,
    f: &PhaseField<R>,
    variant: &MapVariant<R>,
) -> Result<PhaseField<R>> {
    let comps = variant.components();
    check_pairing(func, f, comps.len())?;
    let grid = f.grid();
    let n = grid.n();
    let fl = grid.fibre_len();
    let mut out = Vec::with_capacity(grid.len());
    let mut underflow = 0usize;
    for iq in 0..grid.spatial_len() {
        for ip in 0..fl {
            let v = f.values()[iq * fl + ip];
            let p = grid.p_point(ip);
            let mut acc: R = (0..n).map(|i| func.u[i].values()[iq] * p[i]).sum();
            for (a, (phi, w)) in comps.iter().enumerate() {
                let g = func.g[a].values()[iq];
                if g != R::zero() && v <= R::lit(1e-30) && !variant.allows_sign_change() {
                    underflow += 1;
                }
                acc += w.value(&p, n) * phi.first(v) * g;
            }
            out.push(acc);
        }
    }
    if underflow > 0 {
        log::warn!("{underflow} nodes evaluate log-derivatives where f <= 1e-30");
    }
    PhaseField::from_values(grid, out)
}

/// Per-functional data at one q node.
struct SpatialData<R: Real> {
    u: Vec<Vec<R>>,
    du: Vec<Vec<Vec<R>>>,
    g: Vec<Vec<R>>,
    dg: Vec<Vec<Vec<R>>>,
}

impl<R: Real> SpatialData<R> {
    fn of(func: &LinearTestFunctional<R>) -> Result<Self> {
        let n = func.grid().n();
        let values = |f: &SpatialField<R>| f.values().to_vec();
        let grads = |f: &SpatialField<R>| -> Result<Vec<Vec<R>>> {
            (0..n).map(|i| Ok(ddq_spatial(f, i)?.into_values())).collect()
        };
        Ok(Self {
            u: func.u.iter().map(values).collect(),
            du: func.u.iter().map(grads).collect::<Result<_>>()?,
            g: func.g.iter().map(values).collect(),
            dg: func.g.iter().map(grads).collect::<Result<_>>()?,
        })
    }
}

/// Ũ, B and a for one functional at one phase node.
#[allow(clippy::too_many_arguments)]
fn node_terms<R: Real>(
    d: &SpatialData<R>,
    comps: &[(FibreFunction<R>, MomentWeight)],
    n: usize,
    iq: usize,
    p: &[R; 2],
    first: &[R],
    x_second: &[R],
) -> ([R; 2], [R; 2], R) {
    let mut ut = [R::zero(); 2];
    let mut b = [R::zero(); 2];
    let mut a = R::zero();
    for i in 0..n {
        ut[i] = d.u[i][iq];
        // ∂_i (u·p) = Σ_j ∂_i u_j p_j
        for j in 0..n {
            b[i] += d.du[j][i][iq] * p[j];
        }
    }
    for (k, (_, w)) in comps.iter().enumerate() {
        let g = d.g[k][iq];
        let wv = w.value(p, n);
        let wg = w.gradient(p);
        for i in 0..n {
            ut[i] += g * wg[i] * first[k];
            b[i] += wv * first[k] * d.dg[k][i][iq];
        }
        a += wv * x_second[k] * g;
    }
    (ut, b, a)
}

/// `{F∘J, G∘J}_KT = ∫ f {δF/δf, δG/δf} dq dp`.
///
/// Products `∂_p f · Γ(f)` are evaluated as spectral p-derivatives of
/// `∫_0^f Γ`, which keeps their error relative to the size of `f` in the
/// Maxwellian tails. Pairs without a closed-form antiderivative fall back to
/// the direct product.
pub fn kt_bracket<R: Real>(
    fa: &LinearTestFunctional<R>,
    gb: &LinearTestFunctional<R>,
    f: &PhaseField<R>,
    variant: &MapVariant<R>,
) -> Result<R> {
    kt_bracket_impl(fa, gb, f, variant, true)
}

/// Same as [`kt_bracket`] but with `∂_p f` always formed directly.
pub fn kt_bracket_direct<R: Real>(
    fa: &LinearTestFunctional<R>,
    gb: &LinearTestFunctional<R>,
    f: &PhaseField<R>,
    variant: &MapVariant<R>,
) -> Result<R> {
    kt_bracket_impl(fa, gb, f, variant, false)
}

fn kt_bracket_impl<R: Real>(
    fa: &LinearTestFunctional<R>,
    gb: &LinearTestFunctional<R>,
    f: &PhaseField<R>,
    variant: &MapVariant<R>,
    chain_rule: bool,
) -> Result<R> {
    variant.validate()?;
    variant.check_input(f)?;
    let comps = variant.components();
    check_pairing(fa, f, comps.len())?;
    check_pairing(gb, f, comps.len())?;
    let grid = f.grid();
    let n = grid.n();
    let fl = grid.fibre_len();
    let nc = comps.len();
    let fq: Vec<PhaseField<R>> = (0..n).map(|i| ddq(f, i)).collect::<Result<_>>()?;
    let fp: Vec<PhaseField<R>> = (0..n).map(|i| ddp(f, i)).collect::<Result<_>>()?;

    // dpsi[b][i] ≈ ∂_{p_i} f · f ψ_b''(f);  dtheta[a][b][i] ≈ ∂_{p_i} f · φ_a'(f) f ψ_b''(f)
    let active: Vec<bool> =
        comps.iter().map(|(phi, _)| *phi != FibreFunction::Power(0) && *phi != FibreFunction::Entropy(0)).collect();
    let direct = |i: usize, g: &dyn Fn(R) -> R| fp[i].zip_map(f, |d, v| d * g(v));
    let mut dpsi: Vec<Vec<Option<PhaseField<R>>>> = vec![vec![None; n]; nc];
    let mut dtheta: Vec<Vec<Vec<Option<PhaseField<R>>>>> = vec![vec![vec![None; n]; nc]; nc];
    for b in 0..nc {
        if !active[b] {
            continue;
        }
        let psi = comps[b].0;
        for i in 0..n {
            dpsi[b][i] =
                Some(if chain_rule { ddp(&f.map(|v| psi.conjugate(v)), i)? } else { direct(i, &|v| psi.x_second(v))? });
        }
        for a in 0..nc {
            let phi = comps[a].0;
            let closed = chain_rule && phi.cross_antiderivative(&psi, R::one()).is_some();
            for i in 0..n {
                dtheta[a][b][i] = Some(if closed {
                    ddp(&f.map(|v| phi.cross_antiderivative(&psi, v).unwrap_or(R::zero())), i)?
                } else {
                    direct(i, &|v| phi.first(v) * psi.x_second(v))?
                });
            }
        }
    }

    let df = SpatialData::of(fa)?;
    let dg = SpatialData::of(gb)?;
    let mut first = vec![R::zero(); nc];
    let mut x_second = vec![R::zero(); nc];
    let mut total = R::zero();
    for iq in 0..grid.spatial_len() {
        let mut line = R::zero();
        for ip in 0..fl {
            let idx = iq * fl + ip;
            let v = f.values()[idx];
            let p = grid.p_point(ip);
            for (k, (phi, _)) in comps.iter().enumerate() {
                first[k] = phi.first(v);
                x_second[k] = phi.x_second(v);
            }
            let (uf, bf, af) = node_terms(&df, &comps, n, iq, &p, &first, &x_second);
            let (ug, bg, ag) = node_terms(&dg, &comps, n, iq, &p, &first, &x_second);
            let mut acc = R::zero();
            for i in 0..n {
                acc += v * (bf[i] * ug[i] - bg[i] * uf[i]);
                acc += fq[i].values()[idx] * (af * ug[i] - ag * uf[i]);
                for b in 0..nc {
                    if let Some(d) = &dpsi[b][i] {
                        let mut w = R::zero();
                        for j in 0..n {
                            w += (df.du[j][i][iq] * dg.g[b][iq] - dg.du[j][i][iq] * df.g[b][iq]) * p[j];
                        }
                        acc += w * d.values()[idx];
                    }
                    for a in 0..nc {
                        if let Some(d) = &dtheta[a][b][i] {
                            let w = df.dg[a][i][iq] * dg.g[b][iq] - dg.dg[a][i][iq] * df.g[b][iq];
                            acc += w * d.values()[idx];
                        }
                    }
                }
            }
            line += acc;
        }
        total += line;
    }
    Ok(total * grid.wq() * grid.wp())
}

/// Deliberate defects for exercising the verifier.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Corruption {
    #[default]
    None,
    /// Flip the sign of the entropy transport terms on the fluid side.
    FlipEntropyTransport,
}

/// `-∫ m·[u, v] - Σ_a ∫ s_a (u·∇h_a - v·∇g_a)`.
pub fn lie_poisson_bracket_sa<R: Real>(
    fa: &LinearTestFunctional<R>,
    gb: &LinearTestFunctional<R>,
    state: &HydroState<R>,
) -> Result<R> {
    lie_poisson_bracket_with(fa, gb, state, Corruption::None)
}

fn lie_poisson_bracket_with<R: Real>(
    fa: &LinearTestFunctional<R>,
    gb: &LinearTestFunctional<R>,
    state: &HydroState<R>,
    corruption: Corruption,
) -> Result<R> {
    let k = bracket_functional(fa, gb)?;
    if corruption == Corruption::None {
        return functional_value(&k, state);
    }
    let momentum =
        LinearTestFunctional { u: k.u.clone(), g: vec![SpatialField::constant(k.grid(), R::zero()); k.components()] };
    let transport = LinearTestFunctional { u: vec![SpatialField::constant(k.grid(), R::zero()); k.u.len()], g: k.g };
    Ok(functional_value(&momentum, state)? - functional_value(&transport, state)?)
}

/// Linear functional representing `{F, G}_{s*_A}`:
/// `(-[u, v], -(u·∇h_a - v·∇g_a))`.
pub fn bracket_functional<R: Real>(
    fa: &LinearTestFunctional<R>,
    gb: &LinearTestFunctional<R>,
) -> Result<LinearTestFunctional<R>> {
    if fa.grid() != gb.grid() {
        return Err(KinError::GridMismatch);
    }
    if fa.components() != gb.components() {
        return Err(KinError::Domain("functionals have different orders".into()));
    }
    let u = vector_lie_bracket(&fa.u, &gb.u)?.iter().map(|f| f.scale(-R::one())).collect();
    let g =
        fa.g.iter()
            .zip(&gb.g)
            .map(|(ga, ha)| {
                let uh = directional(&fa.u, ha)?;
                let vg = directional(&gb.u, ga)?;
                uh.zip_map(&vg, |x, y| y - x)
            })
            .collect::<Result<_>>()?;
    Ok(LinearTestFunctional { u, g })
}

/// Outcome of one two-sided bracket evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct BracketReport<R: Real> {
    pub lhs: R,
    pub rhs: R,
    pub abs_err: R,
    pub rel_err: R,
    pub n: usize,
    pub nq: usize,
    pub np: usize,
}

impl<R: Real> BracketReport<R> {
    pub fn new(lhs: R, rhs: R, grid: &PhaseGrid<R>) -> Self {
        let abs_err = (lhs - rhs).abs();
        let rel_err = abs_err / lhs.abs().max(rhs.abs()).max(R::lit(1e-30));
        Self { lhs, rhs, abs_err, rel_err, n: grid.n(), nq: grid.nq(), np: grid.np() }
    }
}

/// Both sides of the Poisson-map identity for `J = variant`.
pub fn verify_poisson_map<R: Real>(
    fa: &LinearTestFunctional<R>,
    gb: &LinearTestFunctional<R>,
    f: &PhaseField<R>,
    variant: &MapVariant<R>,
    corruption: Corruption,
) -> Result<BracketReport<R>> {
    let lhs = kt_bracket(fa, gb, f, variant)?;
    let state = variant.image(f)?;
    let rhs = lie_poisson_bracket_with(fa, gb, &state, corruption)?;
    Ok(BracketReport::new(lhs, rhs, f.grid()))
}

/// Control pairing: the kinetic side uses the entropy pullback while the
/// fluid side sees `s_1` replaced by `∫ f^2`.
pub fn verify_mismatched_entropy<R: Real>(
    fa: &LinearTestFunctional<R>,
    gb: &LinearTestFunctional<R>,
    f: &PhaseField<R>,
) -> Result<BracketReport<R>> {
    let variant = MapVariant::Entropy { order: 1 };
    let lhs = kt_bracket(fa, gb, f, &variant)?;
    let mut state = variant.image(f)?;
    state.s[1] = integrate_p(&f.map(|v| v * v));
    let rhs = lie_poisson_bracket_sa(fa, gb, &state)?;
    Ok(BracketReport::new(lhs, rhs, f.grid()))
}

/// Identity for `Φ(F) = F^2`: `{Φ(F)∘J, G∘J} = 2F(J f) {F∘J, G∘J}`, with the
/// left side built from the chain-rule derivative `2 F(J f) δF/δf`.
pub fn verify_composite_square<R: Real>(
    fa: &LinearTestFunctional<R>,
    gb: &LinearTestFunctional<R>,
    f: &PhaseField<R>,
    variant: &MapVariant<R>,
) -> Result<BracketReport<R>> {
    let state = variant.image(f)?;
    let scale = R::lit(2.0) * functional_value(fa, &state)?;
    let lhs = kt_bracket(&fa.scale(scale), gb, f, variant)?;
    let rhs = scale * lie_poisson_bracket_sa(fa, gb, &state)?;
    Ok(BracketReport::new(lhs, rhs, f.grid()))
}

/// Cyclic sum `{F, {G, H}} + {G, {H, F}} + {H, {F, G}}` of kinetic brackets,
/// the inner brackets represented by their linear functionals. Returns the
/// sum and the largest absolute term.
pub fn jacobi_residual<R: Real>(
    fa: &LinearTestFunctional<R>,
    gb: &LinearTestFunctional<R>,
    hc: &LinearTestFunctional<R>,
    f: &PhaseField<R>,
    variant: &MapVariant<R>,
) -> Result<(R, R)> {
    let t1 = kt_bracket(fa, &bracket_functional(gb, hc)?, f, variant)?;
    let t2 = kt_bracket(gb, &bracket_functional(hc, fa)?, f, variant)?;
    let t3 = kt_bracket(hc, &bracket_functional(fa, gb)?, f, variant)?;
    Ok((t1 + t2 + t3, t1.abs().max(t2.abs()).max(t3.abs())))
}
