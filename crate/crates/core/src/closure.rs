//! Isotropic near-Maxwellian closure: Laguerre calculus, entropy moments of
//! Maxwellians, the triangular system linking entropy moments to Laguerre
//! coefficients, and the truncated correction `ΔH_A`.
//!
//! The algebra is generic over [`Field`] so the matrices can be formed in
//! exact rationals; the grid-facing functions use `f64`/`f32`.

use crate::error::{KinError, Result};
use crate::grid::{integrate_q, PhaseField, SpatialField};
use crate::hamiltonians::h_fluids;
use crate::maxwellian::{eos_temperature, maxwellian_value, LocalMoments};
use crate::moments::{DistributionFunction, HydroState, DEFAULT_MAX_ORDER};
use crate::scalar::{Field, Real};

/// Default tolerance of the isotropy check in [`laguerre_project`].
pub const ISOTROPY_TOL: f64 = 1e-8;

/// `L_b^(α)(χ)` by the three-term recurrence.
pub fn laguerre<K: Field>(alpha: &K, b: usize, chi: &K) -> K {
    let mut prev = K::one();
    if b == 0 {
        return prev;
    }
    let mut cur = K::one() + alpha.clone() - chi.clone();
    for k in 1..b {
        let kk = K::int(k as i64);
        let next = ((K::int(2 * k as i64 + 1) + alpha.clone() - chi.clone()) * cur.clone()
            - (kk.clone() + alpha.clone()) * prev)
            / (kk + K::one());
        prev = cur;
        cur = next;
    }
    cur
}

/// Coefficients of `L_b^(α)` in ascending powers of `χ`, from the same
/// recurrence.
pub fn laguerre_poly<K: Field>(alpha: &K, b: usize) -> Vec<K> {
    let mut prev = vec![K::one()];
    if b == 0 {
        return prev;
    }
    let mut cur = vec![K::one() + alpha.clone(), -K::one()];
    for k in 1..b {
        let kk = K::int(k as i64);
        let lin = [K::int(2 * k as i64 + 1) + alpha.clone(), -K::one()];
        let mut next = poly_mul(&cur, &lin);
        let c = kk.clone() + alpha.clone();
        for (j, p) in prev.iter().enumerate() {
            next[j] = next[j].clone() - c.clone() * p.clone();
        }
        let d = kk + K::one();
        prev = cur;
        cur = next.into_iter().map(|x| x / d.clone()).collect();
    }
    cur
}

fn poly_mul<K: Field>(a: &[K], b: &[K]) -> Vec<K> {
    let mut out = vec![K::zero(); a.len() + b.len() - 1];
    for (i, x) in a.iter().enumerate() {
        for (j, y) in b.iter().enumerate() {
            out[i + j] = out[i + j].clone() + x.clone() * y.clone();
        }
    }
    out
}

fn poly_pow<K: Field>(base: &[K], e: usize) -> Vec<K> {
    (0..e).fold(vec![K::one()], |acc, _| poly_mul(&acc, base))
}

/// `Γ(n/2)` for a positive integer `n`.
pub fn gamma_half<R: Real>(n: usize) -> R {
    let (mut g, mut x) = if n.is_multiple_of(2) { (R::one(), R::one()) } else { (R::PI().sqrt(), R::lit(0.5)) };
    let target = R::from_usize_lossy(n) / R::lit(2.0);
    while x < target {
        g *= x;
        x += R::one();
    }
    g
}

/// Probability density `F_n(χ) = χ^(n/2 - 1) e^(-χ) / Γ(n/2)` of `χ = |p - u|^2 / 2θ`
/// under a Maxwellian.
pub fn chi_weight<R: Real>(n: usize, chi: R) -> R {
    let e = R::from_usize_lossy(n) / R::lit(2.0) - R::one();
    chi.powf(e) * (-chi).exp() / gamma_half::<R>(n)
}

/// Lower-triangular square matrix stored by rows.
#[derive(Debug, Clone, PartialEq)]
pub struct LowerTriangular<K: Field> {
    rows: Vec<Vec<K>>,
}

impl<K: Field> LowerTriangular<K> {
    /// Builds from full rows; entries above the diagonal must be zero.
    pub fn from_rows(rows: Vec<Vec<K>>) -> Result<Self> {
        let dim = rows.len();
        let mut out = Vec::with_capacity(dim);
        for (i, r) in rows.into_iter().enumerate() {
            if r.len() != dim {
                return Err(KinError::Domain("matrix is not square".into()));
            }
            if r[i + 1..].iter().any(|x| *x != K::zero()) {
                return Err(KinError::Domain(format!("row {i} has entries above the diagonal")));
            }
            out.push(r.into_iter().take(i + 1).collect());
        }
        Ok(Self { rows: out })
    }

    pub fn identity(dim: usize) -> Self {
        Self { rows: (0..dim).map(|i| (0..=i).map(|j| if i == j { K::one() } else { K::zero() }).collect()).collect() }
    }

    pub fn dim(&self) -> usize {
        self.rows.len()
    }

    pub fn get(&self, i: usize, j: usize) -> K {
        if j > i {
            K::zero()
        } else {
            self.rows[i][j].clone()
        }
    }

    pub fn to_rows(&self) -> Vec<Vec<K>> {
        (0..self.dim()).map(|i| (0..self.dim()).map(|j| self.get(i, j)).collect()).collect()
    }

    pub fn mul_vec(&self, x: &[K]) -> Vec<K> {
        self.rows.iter().map(|r| r.iter().zip(x).fold(K::zero(), |acc, (a, b)| acc + a.clone() * b.clone())).collect()
    }

    pub fn mul(&self, other: &Self) -> Self {
        let d = self.dim();
        let rows = (0..d)
            .map(|i| {
                (0..=i).map(|j| (j..=i).fold(K::zero(), |acc, k| acc + self.get(i, k) * other.get(k, j))).collect()
            })
            .collect();
        Self { rows }
    }

    /// Solves `L x = rhs` by forward substitution.
    pub fn solve(&self, rhs: &[K]) -> Result<Vec<K>> {
        let mut x: Vec<K> = Vec::with_capacity(self.dim());
        for (i, r) in self.rows.iter().enumerate() {
            if r[i] == K::zero() {
                return Err(KinError::Singular(i));
            }
            let mut acc = rhs[i].clone();
            for (a, xj) in r[..i].iter().zip(&x) {
                acc = acc - a.clone() * xj.clone();
            }
            x.push(acc / r[i].clone());
        }
        Ok(x)
    }

    pub fn inverse(&self) -> Result<Self> {
        let d = self.dim();
        let mut cols = Vec::with_capacity(d);
        for j in 0..d {
            let e: Vec<K> = (0..d).map(|i| if i == j { K::one() } else { K::zero() }).collect();
            cols.push(self.solve(&e)?);
        }
        Ok(Self { rows: (0..d).map(|i| (0..=i).map(|j| cols[j][i].clone()).collect()).collect() })
    }
}

/// Isotropic closure of order `A` in `n` dimensions.
///
/// Index conventions: entropy moments `η_a = s_a / ρ` are passed as the
/// slice `[η_1, ..., η_A]`; matrix rows and columns run over `2..=A`.
#[derive(Debug, Clone, PartialEq)]
pub struct ClosureModel<K: Field> {
    n: usize,
    order: usize,
    gamma: Vec<K>,
}

impl<K: Field> ClosureModel<K> {
    pub fn new(n: usize, order: usize) -> Result<Self> {
        if n == 0 {
            return Err(KinError::Domain("dimension must be positive".into()));
        }
        if !(2..=DEFAULT_MAX_ORDER).contains(&order) {
            return Err(KinError::Domain(format!("closure order {order} outside 2..={DEFAULT_MAX_ORDER}")));
        }
        let half_n = K::ratio(n as i64, 2);
        let mut gamma = vec![K::one()];
        for k in 0..2 * order + 2 {
            let next = gamma[k].clone() * (half_n.clone() + K::int(k as i64));
            gamma.push(next);
        }
        Ok(Self { n, order, gamma })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn order(&self) -> usize {
        self.order
    }

    /// `g_k = Γ(n/2 + k) / Γ(n/2) = ∫ F_n χ^k dχ` for `k <= 2A + 2`.
    pub fn gamma_moments(&self) -> &[K] {
        &self.gamma
    }

    /// Laguerre parameter `α = n/2 - 1`.
    pub fn alpha(&self) -> K {
        K::ratio(self.n as i64, 2) - K::one()
    }

    /// `∫ F_n P(χ) dχ` for a polynomial given by ascending coefficients.
    pub fn expectation(&self, poly: &[K]) -> K {
        assert!(poly.len() <= self.gamma.len(), "polynomial degree exceeds the moment table");
        poly.iter().zip(&self.gamma).fold(K::zero(), |acc, (c, g)| acc + c.clone() * g.clone())
    }

    /// `∫ F_n (L_b)^2 dχ = Γ(b + n/2) / (Γ(b + 1) Γ(n/2))`.
    pub fn norm(&self, b: usize) -> K {
        let fact = (1..=b).fold(K::one(), |acc, k| acc * K::int(k as i64));
        self.gamma[b].clone() / fact
    }

    pub fn laguerre_poly(&self, b: usize) -> Vec<K> {
        laguerre_poly(&self.alpha(), b)
    }

    fn shift(&self, eta1: &K) -> K {
        eta1.clone() + K::ratio(self.n as i64, 2)
    }

    /// `η̄_a(η_1) = ∫ F_n (c - χ)^a dχ` with `c = η_1 + n/2`, the entropy
    /// moment of a Maxwellian.
    pub fn eta_bar(&self, a: usize, eta1: &K) -> K {
        let c = self.shift(eta1);
        self.expectation(&poly_pow(&[c, -K::one()], a))
    }

    /// All entries `M_ab = ∫ F_n L_b (c - χ)^(a-1) (c + a - χ) dχ` for `a, b`
    /// in `2..=A`, including those above the diagonal, which vanish by
    /// orthogonality.
    pub fn matrix_entries(&self, eta1: &K) -> Vec<Vec<K>> {
        let c = self.shift(eta1);
        let lag: Vec<Vec<K>> = (2..=self.order).map(|b| self.laguerre_poly(b)).collect();
        (2..=self.order)
            .map(|a| {
                let weight =
                    poly_mul(&poly_pow(&[c.clone(), -K::one()], a - 1), &[c.clone() + K::int(a as i64), -K::one()]);
                lag.iter().map(|l| self.expectation(&poly_mul(l, &weight))).collect()
            })
            .collect()
    }

    /// Lower-triangular part of [`Self::matrix_entries`].
    pub fn matrix(&self, eta1: &K) -> Result<LowerTriangular<K>> {
        let mut rows = self.matrix_entries(eta1);
        for (i, r) in rows.iter_mut().enumerate() {
            for x in r.iter_mut().skip(i + 1) {
                *x = K::zero();
            }
        }
        LowerTriangular::from_rows(rows)
    }

    /// `β̃_b = Σ_c (M^-1)_bc (η_c - η̄_c)` for `b = 2..=A`; `eta = [η_1, ..., η_A]`.
    pub fn beta_tilde(&self, eta: &[K]) -> Result<Vec<K>> {
        if eta.len() < self.order {
            return Err(KinError::Domain(format!("need η_1..η_{}, got {}", self.order, eta.len())));
        }
        let eta1 = &eta[0];
        let rhs: Vec<K> = (2..=self.order).map(|a| eta[a - 1].clone() - self.eta_bar(a, eta1)).collect();
        self.matrix(eta1)?.solve(&rhs)
    }

    /// `dM_ab / dη_1`, lower-triangular like [`Self::matrix`].
    pub fn matrix_derivative(&self, eta1: &K) -> Result<LowerTriangular<K>> {
        let c = self.shift(eta1);
        let lag: Vec<Vec<K>> = (2..=self.order).map(|b| self.laguerre_poly(b)).collect();
        let rows = (2..=self.order)
            .enumerate()
            .map(|(i, a)| {
                let lin = [c.clone() + K::int(a as i64), -K::one()];
                let mut weight = poly_mul(&poly_pow(&[c.clone(), -K::one()], a - 2), &lin);
                for w in weight.iter_mut() {
                    *w = w.clone() * K::int(a as i64 - 1);
                }
                for (w, x) in weight.iter_mut().zip(poly_pow(&[c.clone(), -K::one()], a - 1)) {
                    *w = w.clone() + x;
                }
                lag.iter()
                    .enumerate()
                    .map(|(j, l)| if j > i { K::zero() } else { self.expectation(&poly_mul(l, &weight)) })
                    .collect()
            })
            .collect();
        LowerTriangular::from_rows(rows)
    }

    /// Gradient of [`Self::weighted_square`] with respect to `[η_1, ..., η_A]`.
    pub fn weighted_square_gradient(&self, eta: &[K]) -> Result<Vec<K>> {
        let beta = self.beta_tilde(eta)?;
        let eta1 = &eta[0];
        let inv = self.matrix(eta1)?.inverse()?;
        let d = beta.len();
        let lambda: Vec<K> = (0..d)
            .map(|a| (a..d).fold(K::zero(), |acc, b| acc + inv.get(b, a) * self.norm(b + 2) * beta[b].clone()))
            .collect();
        let dm_beta = self.matrix_derivative(eta1)?.mul_vec(&beta);
        let g1 = (0..d).fold(K::zero(), |acc, i| {
            let a = i + 2;
            let r = -(K::int(a as i64) * self.eta_bar(a - 1, eta1)) - dm_beta[i].clone();
            acc + lambda[i].clone() * r
        });
        let two = K::int(2);
        let mut out = vec![two.clone() * g1];
        out.extend(lambda.into_iter().map(|l| two.clone() * l));
        Ok(out)
    }

    /// `Σ_b norm_b β̃_b^2`, the Laguerre-weighted square of the deviation.
    pub fn weighted_square(&self, eta: &[K]) -> Result<K> {
        Ok(self
            .beta_tilde(eta)?
            .into_iter()
            .enumerate()
            .fold(K::zero(), |acc, (i, b)| acc + self.norm(i + 2) * b.clone() * b))
    }
}

/// `η_a = s_a / ρ` at every node, `a = 1..=A`.
pub fn eta_fields<R: Real>(state: &HydroState<R>) -> Result<Vec<SpatialField<R>>> {
    state.check_positive_density()?;
    let rho = state.density();
    state.s[1..].iter().map(|s| s.zip_map(rho, |s, r| s / r)).collect()
}

/// Pointwise `β̃_b` fields for `b = 2..=A`, `A = state.order()`.
pub fn beta_tilde_fields<R: Real + Field>(state: &HydroState<R>) -> Result<Vec<SpatialField<R>>> {
    let model = ClosureModel::<R>::new(state.grid().n(), state.order())?;
    let eta = eta_fields(state)?;
    let grid = state.grid();
    let mut out = vec![Vec::with_capacity(grid.spatial_len()); state.order() - 1];
    for iq in 0..grid.spatial_len() {
        let e: Vec<R> = eta.iter().map(|f| f.values()[iq]).collect();
        for (o, b) in out.iter_mut().zip(model.beta_tilde(&e)?) {
            o.push(b);
        }
    }
    out.into_iter().map(|v| SpatialField::from_values(grid, v)).collect()
}

/// `ΔH_A = ½ ∫ ρ T(ρ, s_1) Σ_{b=2}^{A} norm_b β̃_b^2 dq`, using `s_0..s_A`
/// from `state`.
pub fn delta_h_truncated<R: Real + Field>(state: &HydroState<R>, order: usize) -> Result<R> {
    if state.order() < order {
        return Err(KinError::Domain(format!("state carries s_0..s_{}, need order {order}", state.order())));
    }
    let model = ClosureModel::<R>::new(state.grid().n(), order)?;
    let eta = eta_fields(state)?;
    let grid = state.grid();
    let n = grid.n();
    let mut dens = Vec::with_capacity(grid.spatial_len());
    for iq in 0..grid.spatial_len() {
        let rho = state.s[0].values()[iq];
        let t = eos_temperature(rho, state.s[1].values()[iq], n);
        let e: Vec<R> = eta[..order].iter().map(|f| f.values()[iq]).collect();
        dens.push(R::lit(0.5) * rho * t * model.weighted_square(&e)?);
    }
    Ok(integrate_q(&SpatialField::from_values(grid, dens)?))
}

/// Closing Hamiltonian `H_fluids + ΔH_A` on the order-`A` hydrodynamic state.
pub fn closing_hamiltonian<R: Real + Field>(state: &HydroState<R>, order: usize) -> Result<R> {
    Ok(h_fluids(state)? + delta_h_truncated(state, order)?)
}

/// Functional derivatives `δΔH_A/δs_a` for `a = 0..=A` (`s_0 = ρ`).
/// `ΔH_A` does not depend on the momentum density.
pub fn delta_h_truncated_gradient<R: Real + Field>(
    state: &HydroState<R>,
    order: usize,
) -> Result<Vec<SpatialField<R>>> {
    if state.order() < order {
        return Err(KinError::Domain(format!("state carries s_0..s_{}, need order {order}", state.order())));
    }
    let model = ClosureModel::<R>::new(state.grid().n(), order)?;
    let eta = eta_fields(state)?;
    let grid = state.grid();
    let n = grid.n();
    let two_over_n = R::lit(2.0) / R::from_usize_lossy(n);
    let half = R::lit(0.5);
    let mut out = vec![Vec::with_capacity(grid.spatial_len()); order + 1];
    for iq in 0..grid.spatial_len() {
        let rho = state.s[0].values()[iq];
        let s1 = state.s[1].values()[iq];
        let t = eos_temperature(rho, s1, n);
        let e: Vec<R> = eta[..order].iter().map(|f| f.values()[iq]).collect();
        let w = model.weighted_square(&e)?;
        let g = model.weighted_square_gradient(&e)?;
        let dt_drho = t * two_over_n * (R::one() + s1 / rho) / rho;
        let dt_ds1 = -two_over_n * t / rho;
        let eta_dot_g = e.iter().zip(&g).fold(R::zero(), |acc, (&x, &y)| acc + x * y);
        out[0].push(half * (t * w + rho * dt_drho * w - t * eta_dot_g));
        for a in 1..=order {
            let dt = if a == 1 { dt_ds1 } else { R::zero() };
            out[a].push(half * (rho * dt * w + t * g[a - 1]));
        }
    }
    out.into_iter().map(|v| SpatialField::from_values(grid, v)).collect()
}

/// Density of the order-2 closing Hamiltonian,
/// `|m|^2/2ρ + (n/2) ρ T (1 + (2 s_2 - 2 s_1^2/ρ - nρ)^2 / (2 n^2 (n+2) ρ^2))`.
pub fn closing_density_order2<R: Real>(m_sq: R, rho: R, s1: R, s2: R, n: usize) -> R {
    let nr = R::from_usize_lossy(n);
    let t = eos_temperature(rho, s1, n);
    let dev = R::lit(2.0) * s2 - R::lit(2.0) * s1 * s1 / rho - nr * rho;
    let corr = dev * dev / (R::lit(2.0) * nr * nr * (nr + R::lit(2.0)) * rho * rho);
    m_sq / (rho + rho) + nr / R::lit(2.0) * rho * t * (R::one() + corr)
}

/// Isotropic perturbation `f = f_m (1 + ε Σ_b β_b L_b^(n/2-1)(χ))` with
/// `betas[i]` the coefficient of `L_{i+2}`.
pub fn synthesize_isotropic<R: Real + Field>(
    moments: &LocalMoments<R>,
    betas: &[SpatialField<R>],
    eps: R,
) -> Result<DistributionFunction<R>> {
    let grid = moments.rho.grid();
    let n = grid.n();
    let alpha = R::from_usize_lossy(n) / R::lit(2.0) - R::one();
    let fl = grid.fibre_len();
    let mut values = Vec::with_capacity(grid.len());
    for iq in 0..grid.spatial_len() {
        let rho = moments.rho.values()[iq];
        let theta = moments.theta.values()[iq];
        let mut u = [R::zero(); 2];
        for (i, ui) in moments.u.iter().enumerate() {
            u[i] = ui.values()[iq];
        }
        for ip in 0..fl {
            let p = grid.p_point(ip);
            let chi = chi_of(n, p, u, theta);
            let h = betas
                .iter()
                .enumerate()
                .fold(R::zero(), |acc, (i, b)| acc + b.values()[iq] * laguerre(&alpha, i + 2, &chi));
            values.push(maxwellian_value(n, rho, u, theta, p) * (R::one() + eps * h));
        }
    }
    DistributionFunction::new(PhaseField::from_values(grid, values)?)
}

fn chi_of<R: Real>(n: usize, p: [R; 2], u: [R; 2], theta: R) -> R {
    let mut w2 = R::zero();
    for i in 0..n {
        w2 += (p[i] - u[i]) * (p[i] - u[i]);
    }
    w2 / (theta + theta)
}

/// Largest normalised anisotropic moment of `f` about its local velocity:
/// odd moments `∫ f w^k` (k = 3, 5) for `n = 1`, angular harmonics
/// `∫ f (w_x + i w_y)^m` (m = 1..4) for `n = 2`, each divided by `ρ θ^(k/2)`.
pub fn anisotropy<R: Real>(f: &DistributionFunction<R>, moments: &LocalMoments<R>) -> R {
    let grid = f.grid();
    let n = grid.n();
    let fl = grid.fibre_len();
    let mut worst = R::zero();
    for iq in 0..grid.spatial_len() {
        let rho = moments.rho.values()[iq];
        let theta = moments.theta.values()[iq];
        let fibre = f.field().fibre(iq);
        let u: Vec<R> = moments.u.iter().map(|ui| ui.values()[iq]).collect();
        let orders: &[i32] = if n == 1 { &[3, 5] } else { &[1, 2, 3, 4] };
        for &k in orders {
            let (mut re, mut im) = (R::zero(), R::zero());
            for (ip, &v) in fibre.iter().enumerate().take(fl) {
                let p = grid.p_point(ip);
                if n == 1 {
                    re += v * (p[0] - u[0]).powi(k);
                } else {
                    let (wx, wy) = (p[0] - u[0], p[1] - u[1]);
                    let r = (wx * wx + wy * wy).sqrt();
                    let phi = wy.atan2(wx);
                    let kr = R::from_usize_lossy(k as usize);
                    re += v * r.powi(k) * (kr * phi).cos();
                    im += v * r.powi(k) * (kr * phi).sin();
                }
            }
            let scale = rho * theta.powf(R::lit(k as f64 / 2.0));
            worst = worst.max((re * re + im * im).sqrt() * grid.wp() / scale);
        }
    }
    worst
}

/// Laguerre coefficients `β_0..β_max` of `h = f / f_m - 1`, projected with
/// the `F_n` weight. Fails if `f` is not isotropic to within `tol`.
pub fn laguerre_project<R: Real + Field>(
    f: &DistributionFunction<R>,
    max_b: usize,
    tol: R,
) -> Result<Vec<SpatialField<R>>> {
    let grid = f.grid();
    let n = grid.n();
    let moments = LocalMoments::of(f)?;
    let aniso = anisotropy(f, &moments);
    if aniso > tol {
        return Err(KinError::Domain(format!("distribution is not isotropic (anisotropy {:e})", aniso.as_f64())));
    }
    let alpha = R::from_usize_lossy(n) / R::lit(2.0) - R::one();
    let model = ClosureModel::<R>::new(n, max_b.max(2))?;
    let fl = grid.fibre_len();
    let mut out = vec![Vec::with_capacity(grid.spatial_len()); max_b + 1];
    for iq in 0..grid.spatial_len() {
        let rho = moments.rho.values()[iq];
        let theta = moments.theta.values()[iq];
        let mut u = [R::zero(); 2];
        for (i, ui) in moments.u.iter().enumerate() {
            u[i] = ui.values()[iq];
        }
        let fibre = f.field().fibre(iq);
        let mut acc = vec![R::zero(); max_b + 1];
        for (ip, &v) in fibre.iter().enumerate().take(fl) {
            let p = grid.p_point(ip);
            let chi = chi_of(n, p, u, theta);
            let dev = v - maxwellian_value(n, rho, u, theta, p);
            for (b, a) in acc.iter_mut().enumerate() {
                *a += dev * laguerre(&alpha, b, &chi);
            }
        }
        for (b, (o, a)) in out.iter_mut().zip(acc).enumerate() {
            o.push(a * grid.wp() / (rho * model.norm(b)));
        }
    }
    out.into_iter().map(|v| SpatialField::from_values(grid, v)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::make_phase_grid;
    use crate::scalar::{rational, Rational};
    use std::f64::consts::PI;

    #[test]
    fn laguerre_values_and_poly_agree() {
        let alpha = 0.5f64;
        assert_eq!(laguerre(&alpha, 0, &3.0), 1.0);
        assert!((laguerre(&alpha, 1, &3.0) - (1.0 + alpha - 3.0)).abs() < 1e-15);
        for b in 0..7 {
            let poly = laguerre_poly(&alpha, b);
            for &x in &[0.0, 0.7, 2.5, 9.0] {
                let v: f64 = poly.iter().rev().fold(0.0, |acc, c| acc * x + c);
                assert!((v - laguerre(&alpha, b, &x)).abs() < 1e-10 * (1.0 + v.abs()));
            }
        }
        let a = rational(-1, 2);
        let l2 = laguerre_poly(&a, 2);
        assert_eq!(l2, vec![rational(3, 8), rational(-3, 2), rational(1, 2)]);
    }

    #[test]
    fn gamma_moments_recurrence() {
        let m = ClosureModel::<Rational>::new(3, 4).unwrap();
        let g = m.gamma_moments();
        assert_eq!(g.len(), 11);
        for k in 0..g.len() - 1 {
            assert_eq!(g[k + 1], g[k].clone() * (rational(3, 2) + rational(k as i64, 1)));
        }
        assert_eq!(m.norm(2), rational(15, 8));
        assert!((gamma_half::<f64>(5) - 0.75 * PI.sqrt()).abs() < 1e-15);
        assert_eq!(gamma_half::<f64>(6), 2.0);
    }

    #[test]
    fn chi_weight_is_a_density_with_mean_half_n() {
        for n in 1..=4 {
            let (mut mass, mut mean) = (0.0, 0.0);
            let h = 1e-4;
            let mut x: f64 = 0.0;
            let sub = |x: f64| x * x;
            while x < 60.0 {
                let c = sub(x + h / 2.0);
                let w = chi_weight(n, c) * 2.0 * (x + h / 2.0) * h;
                mass += w;
                mean += w * c;
                x += h;
            }
            assert!((mass - 1.0).abs() < 1e-7, "n={n} mass={mass}");
            assert!((mean - n as f64 / 2.0).abs() < 1e-6);
        }
        assert!((chi_weight(2, 1.3f64) - (-1.3f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn matrix_is_lower_triangular_with_inverse() {
        let m = ClosureModel::<Rational>::new(2, 5).unwrap();
        let full = m.matrix_entries(&rational(7, 3));
        assert!(full.iter().enumerate().all(|(i, r)| r[i + 1..].iter().all(|x| *x == rational(0, 1))));
        assert!(full.iter().enumerate().all(|(i, r)| r[i] != rational(0, 1)));
        let mat = m.matrix(&rational(7, 3)).unwrap();
        let inv = mat.inverse().unwrap();
        assert_eq!(mat.mul(&inv), LowerTriangular::identity(4));
        let fm = ClosureModel::<f64>::new(3, 6).unwrap();
        let fmat = fm.matrix(&-1.7).unwrap();
        let prod = fmat.mul(&fmat.inverse().unwrap());
        for i in 0..5 {
            for j in 0..5 {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((prod.get(i, j) - want).abs() < 1e-12);
            }
        }
        assert!(LowerTriangular::from_rows(vec![vec![1.0, 1.0], vec![0.0, 1.0]]).is_err());
        let sing = LowerTriangular::from_rows(vec![vec![1.0, 0.0], vec![2.0, 0.0]]).unwrap();
        assert_eq!(sing.inverse(), Err(KinError::Singular(1)));
    }

    #[test]
    fn maxwellian_state_has_zero_coefficients() {
        let m = ClosureModel::<Rational>::new(3, 4).unwrap();
        let eta1 = rational(-5, 4);
        let eta: Vec<Rational> = std::iter::once(eta1.clone()).chain((2..=4).map(|a| m.eta_bar(a, &eta1))).collect();
        assert!(m.beta_tilde(&eta).unwrap().iter().all(|b| *b == rational(0, 1)));
        assert!(ClosureModel::<f64>::new(1, 1).is_err());
        assert!(ClosureModel::<f64>::new(0, 3).is_err());
    }

    fn wide_grid(n: usize) -> crate::grid::PhaseGrid<f64> {
        if n == 1 {
            make_phase_grid(1, 2.0 * PI, 8, 10.0, 256).unwrap()
        } else {
            make_phase_grid(2, 2.0 * PI, 8, 10.0, 128).unwrap()
        }
    }

    fn moments(g: &crate::grid::PhaseGrid<f64>) -> LocalMoments<f64> {
        let rho = SpatialField::from_fn(g, |q| 1.0 + 0.3 * q[0].sin()).unwrap();
        let theta = SpatialField::from_fn(g, |q| 0.8 + 0.1 * (q[0] + q[1]).cos()).unwrap();
        let u = (0..g.n()).map(|i| SpatialField::from_fn(g, |q| 0.2 * (q[0] + i as f64).cos()).unwrap()).collect();
        LocalMoments { rho, u, theta }
    }

    #[test]
    fn projection_recovers_injected_coefficient() {
        for n in [1, 2] {
            let g = wide_grid(n);
            let lm = moments(&g);
            let beta2 = SpatialField::constant(&g, 1.0);
            let f = synthesize_isotropic(&lm, &[beta2], 0.01).unwrap();
            let beta = laguerre_project(&f, 4, ISOTROPY_TOL).unwrap();
            for (b, field) in beta.iter().enumerate() {
                let want = if b == 2 { 0.01 } else { 0.0 };
                let err = field.values().iter().map(|v| (v - want).abs()).fold(0.0, f64::max);
                let tol = if b == 2 {
                    1e-6
                } else if b < 2 {
                    1e-9
                } else {
                    1e-8
                };
                assert!(err < tol, "n={n} b={b} err={err:e}");
            }
            let fm = crate::maxwellian::maxwellian_from_moments(&lm).unwrap();
            let zero = laguerre_project(&fm, 3, ISOTROPY_TOL).unwrap();
            assert!(zero.iter().all(|f| f.max_abs() < 1e-10));
        }
    }

    #[test]
    fn projection_rejects_anisotropic_input() {
        let g = wide_grid(1);
        let f = DistributionFunction::from_fn(&g, |_, p| {
            maxwellian_value(1, 1.0, [0.0; 2], 1.0, p) * (1.0 + 0.1 * (p[0] / 2.0).tanh())
        })
        .unwrap();
        assert!(laguerre_project(&f, 3, ISOTROPY_TOL).is_err());
        let g2 = wide_grid(2);
        let f2 = DistributionFunction::from_fn(&g2, |_, p| {
            maxwellian_value(2, 1.0, [0.0; 2], 1.0, p) * (1.0 + 0.1 * ((p[0] * p[0] - p[1] * p[1]) / 4.0).tanh())
        })
        .unwrap();
        assert!(laguerre_project(&f2, 3, ISOTROPY_TOL).is_err());
    }

    #[test]
    fn truncated_correction_tracks_relative_entropy_form() {
        let g = wide_grid(1);
        let lm = moments(&g);
        let fm = crate::maxwellian::maxwellian_from_moments(&lm).unwrap();
        let st = crate::moments::poisson_map_ja(&fm, 3);
        assert!(delta_h_truncated(&st, 3).unwrap().abs() < 1e-12);
        let beta2 = SpatialField::constant(&g, 1.0);
        let f = synthesize_isotropic(&lm, &[beta2], 1e-3).unwrap();
        let st = crate::moments::poisson_map_ja(&f, 2);
        let ratio = delta_h_truncated(&st, 2).unwrap() / crate::hamiltonians::delta_h(&f).unwrap();
        assert!((0.9..=1.1).contains(&ratio), "ratio {ratio}");
        assert!(delta_h_truncated(&st, 3).is_err());
    }

    #[test]
    fn truncated_correction_gradient_matches_finite_differences() {
        let g = wide_grid(1);
        let lm = moments(&g);
        let b2 = SpatialField::from_fn(&g, |q| 1.0 + 0.5 * q[0].sin()).unwrap();
        let b3 = SpatialField::from_fn(&g, |q| -0.7 + 0.3 * q[0].cos()).unwrap();
        let f = synthesize_isotropic(&lm, &[b2, b3], 0.05).unwrap();
        let st = crate::moments::poisson_map_ja(&f, 3);
        let grad = delta_h_truncated_gradient(&st, 3).unwrap();
        let wq = g.wq();
        for a in 0..=3 {
            for iq in [0, 3, 6] {
                let h = 1e-5 * st.s[a].values()[iq].abs().max(1e-2);
                let bumped = |d: f64| {
                    let mut s = st.clone();
                    let mut v = s.s[a].values().to_vec();
                    v[iq] += d;
                    s.s[a] = SpatialField::from_values(&g, v).unwrap();
                    delta_h_truncated(&s, 3).unwrap()
                };
                let fd = (bumped(h) - bumped(-h)) / (2.0 * h * wq);
                let an = grad[a].values()[iq];
                assert!((fd - an).abs() < 1e-6 * an.abs().max(1e-3), "a={a} iq={iq}: {fd} vs {an}");
            }
        }
        let e1 = rational(1, 3);
        let model = ClosureModel::<Rational>::new(2, 4).unwrap();
        let eta = vec![e1.clone(), rational(5, 2), rational(-7, 3), rational(11, 4)];
        let grad = model.weighted_square_gradient(&eta).unwrap();
        let at = |k: usize, d: Rational| {
            let mut e = eta.clone();
            e[k] = e[k].clone() + d;
            model.weighted_square(&e).unwrap()
        };
        for k in 1..4 {
            let d = rational(1, 1000);
            let quad = (at(k, d.clone()) - at(k, -d.clone())) / (rational(2, 1) * d);
            assert_eq!(quad, grad[k]);
        }
    }

    #[test]
    fn order2_closing_density_matches_correction() {
        let g = make_phase_grid::<f64>(1, 2.0 * PI, 8, 8.0, 16).unwrap();
        let c = |v: f64| SpatialField::constant(&g, v);
        for (rho, s1, s2) in [(1.0, -1.2, 1.9), (2.5, -0.4, 0.6), (0.3, 0.2, 1.1)] {
            let st = HydroState::new(vec![c(0.7)], vec![c(rho), c(s1), c(s2)]).unwrap();
            let h = closing_hamiltonian(&st, 2).unwrap();
            let want = closing_density_order2(0.49, rho, s1, s2, 1) * 2.0 * PI;
            assert!((h - want).abs() < 1e-12 * want.abs(), "{h} vs {want}");
        }
    }
}
