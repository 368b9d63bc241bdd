//! Discretized phase space `T^n x R^n`.
//!
//! The q-axes are periodic and uniform. Each p-axis covers `[-pmax, pmax]`
//! with `np` cell-centred nodes; the rectangle rule on these nodes is the
//! trapezoid rule of the periodic extension, so both directions share one
//! spectral (FFT) machinery. Fields are stored row-major with all q indices
//! before all p indices, so the fibre over one q node is contiguous.

pub(crate) mod spectral;

use std::fmt;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::{KinError, Result};
use crate::scalar::Real;
use spectral::FftPair;

/// Relative p-boundary amplitude above which spectral p-derivatives alias.
pub const BOUNDARY_DECAY_TOL: f64 = 1e-10;

/// Serializable grid parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub n: usize,
    pub lq: f64,
    pub nq: usize,
    pub pmax: f64,
    pub np: usize,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self { n: 1, lq: 2.0 * std::f64::consts::PI, nq: 64, pmax: 8.0, np: 128 }
    }
}

impl GridConfig {
    pub fn build<R: Real>(&self) -> Result<PhaseGrid<R>> {
        make_phase_grid(self.n, R::lit(self.lq), self.nq, R::lit(self.pmax), self.np)
    }
}

#[derive(Clone)]
pub struct PhaseGrid<R: Real> {
    n: usize,
    lq: R,
    nq: usize,
    pmax: R,
    np: usize,
    fft_q: FftPair<R>,
    fft_p: FftPair<R>,
}

impl<R: Real> fmt::Debug for PhaseGrid<R> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PhaseGrid")
            .field("n", &self.n)
            .field("lq", &self.lq)
            .field("nq", &self.nq)
            .field("pmax", &self.pmax)
            .field("np", &self.np)
            .finish()
    }
}

impl<R: Real> PartialEq for PhaseGrid<R> {
    fn eq(&self, other: &Self) -> bool {
        self.n == other.n
            && self.lq == other.lq
            && self.nq == other.nq
            && self.pmax == other.pmax
            && self.np == other.np
    }
}

/// Builds a phase grid. `nq` and `np` must be powers of two no smaller than 8.
pub fn make_phase_grid<R: Real>(n: usize, lq: R, nq: usize, pmax: R, np: usize) -> Result<PhaseGrid<R>> {
    if n != 1 && n != 2 {
        return Err(KinError::InvalidGrid(format!("dimension {n} not in {{1, 2}}")));
    }
    for (name, size) in [("nq", nq), ("np", np)] {
        if size < 8 || !size.is_power_of_two() {
            return Err(KinError::InvalidGrid(format!("{name} = {size} must be a power of two >= 8")));
        }
    }
    if !(lq > R::zero()) || !lq.is_finite() {
        return Err(KinError::InvalidGrid("lq must be positive".into()));
    }
    if !(pmax > R::zero()) || !pmax.is_finite() {
        return Err(KinError::InvalidGrid("pmax must be positive".into()));
    }
    Ok(PhaseGrid { n, lq, nq, pmax, np, fft_q: FftPair::new(nq), fft_p: FftPair::new(np) })
}

impl<R: Real> PhaseGrid<R> {
    pub fn n(&self) -> usize {
        self.n
    }
    pub fn lq(&self) -> R {
        self.lq
    }
    pub fn nq(&self) -> usize {
        self.nq
    }
    pub fn pmax(&self) -> R {
        self.pmax
    }
    pub fn np(&self) -> usize {
        self.np
    }

    pub fn config(&self) -> GridConfig {
        GridConfig { n: self.n, lq: self.lq.as_f64(), nq: self.nq, pmax: self.pmax.as_f64(), np: self.np }
    }

    /// Same domain with every axis resolution multiplied by `factor`.
    pub fn refined(&self, factor: usize) -> Result<Self> {
        make_phase_grid(self.n, self.lq, self.nq * factor, self.pmax, self.np * factor)
    }

    pub fn dq(&self) -> R {
        self.lq / R::from_usize_lossy(self.nq)
    }

    pub fn dp(&self) -> R {
        (self.pmax + self.pmax) / R::from_usize_lossy(self.np)
    }

    /// Quadrature weight of one q node (`dq^n`).
    pub fn wq(&self) -> R {
        self.dq().powi(self.n as i32)
    }

    /// Quadrature weight of one p node (`dp^n`).
    pub fn wp(&self) -> R {
        self.dp().powi(self.n as i32)
    }

    /// Torus volume `lq^n`.
    pub fn volume(&self) -> R {
        self.lq.powi(self.n as i32)
    }

    /// Number of q nodes (`nq^n`).
    pub fn spatial_len(&self) -> usize {
        self.nq.pow(self.n as u32)
    }

    /// Number of p nodes per fibre (`np^n`).
    pub fn fibre_len(&self) -> usize {
        self.np.pow(self.n as u32)
    }

    pub fn len(&self) -> usize {
        self.spatial_len() * self.fibre_len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn q_axis(&self) -> Vec<R> {
        let dq = self.dq();
        (0..self.nq).map(|j| R::from_usize_lossy(j) * dq).collect()
    }

    pub fn p_axis(&self) -> Vec<R> {
        let dp = self.dp();
        (0..self.np).map(|j| -self.pmax + (R::from_usize_lossy(j) + R::lit(0.5)) * dp).collect()
    }

    /// Coordinates of flat q node `iq`; unused components are zero.
    pub fn q_point(&self, iq: usize) -> [R; 2] {
        let dq = self.dq();
        match self.n {
            1 => [R::from_usize_lossy(iq) * dq, R::zero()],
            _ => [R::from_usize_lossy(iq / self.nq) * dq, R::from_usize_lossy(iq % self.nq) * dq],
        }
    }

    /// Coordinates of flat p node `ip`; unused components are zero.
    pub fn p_point(&self, ip: usize) -> [R; 2] {
        let dp = self.dp();
        let at = |j: usize| -self.pmax + (R::from_usize_lossy(j) + R::lit(0.5)) * dp;
        match self.n {
            1 => [at(ip), R::zero()],
            _ => [at(ip / self.np), at(ip % self.np)],
        }
    }

    pub(crate) fn phase_shape(&self) -> Vec<usize> {
        let mut shape = vec![self.nq; self.n];
        shape.extend(std::iter::repeat_n(self.np, self.n));
        shape
    }

    pub(crate) fn spatial_shape(&self) -> Vec<usize> {
        vec![self.nq; self.n]
    }

    pub(crate) fn fft_q(&self) -> &FftPair<R> {
        &self.fft_q
    }

    pub(crate) fn fft_p(&self) -> &FftPair<R> {
        &self.fft_p
    }

    /// True if `ip` lies on the outer edge of the p box.
    pub fn is_p_boundary(&self, ip: usize) -> bool {
        let edge = |j: usize| j == 0 || j == self.np - 1;
        match self.n {
            1 => edge(ip),
            _ => edge(ip / self.np) || edge(ip % self.np),
        }
    }

    fn check_axis(&self, axis: usize) -> Result<()> {
        if axis >= self.n {
            return Err(KinError::Domain(format!("axis {axis} >= dimension {}", self.n)));
        }
        Ok(())
    }
}

/// Scalar field on the full phase grid.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseField<R: Real> {
    grid: PhaseGrid<R>,
    values: Vec<R>,
}

/// Scalar field on the q nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct SpatialField<R: Real> {
    grid: PhaseGrid<R>,
    values: Vec<R>,
}

fn check_finite<R: Real>(values: &[R]) -> Result<()> {
    match values.iter().position(|v| !v.is_finite()) {
        Some(i) => Err(KinError::NonFinite(i)),
        None => Ok(()),
    }
}

impl<R: Real> PhaseField<R> {
    pub fn from_values(grid: &PhaseGrid<R>, values: Vec<R>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(KinError::GridMismatch);
        }
        check_finite(&values)?;
        Ok(Self { grid: grid.clone(), values })
    }

    /// Samples `f(q, p)` at every node. Unused coordinate slots are zero.
    pub fn from_fn<F>(grid: &PhaseGrid<R>, mut f: F) -> Result<Self>
    where
        F: FnMut([R; 2], [R; 2]) -> R,
    {
        let fl = grid.fibre_len();
        let mut values = Vec::with_capacity(grid.len());
        for iq in 0..grid.spatial_len() {
            let q = grid.q_point(iq);
            for ip in 0..fl {
                values.push(f(q, grid.p_point(ip)));
            }
        }
        Self::from_values(grid, values)
    }

    pub fn constant(grid: &PhaseGrid<R>, c: R) -> Self {
        Self { grid: grid.clone(), values: vec![c; grid.len()] }
    }

    /// Broadcasts a spatial field along the fibres.
    pub fn from_spatial(field: &SpatialField<R>) -> Self {
        let fl = field.grid.fibre_len();
        let mut values = Vec::with_capacity(field.grid.len());
        for &v in &field.values {
            values.extend(std::iter::repeat_n(v, fl));
        }
        Self { grid: field.grid.clone(), values }
    }

    pub(crate) fn from_raw(grid: &PhaseGrid<R>, values: Vec<R>) -> Self {
        debug_assert_eq!(values.len(), grid.len());
        Self { grid: grid.clone(), values }
    }

    pub fn grid(&self) -> &PhaseGrid<R> {
        &self.grid
    }

    pub fn values(&self) -> &[R] {
        &self.values
    }

    pub fn into_values(self) -> Vec<R> {
        self.values
    }

    /// Values of the fibre over q node `iq`.
    pub fn fibre(&self, iq: usize) -> &[R] {
        let fl = self.grid.fibre_len();
        &self.values[iq * fl..(iq + 1) * fl]
    }

    pub fn map<F: FnMut(R) -> R>(&self, f: F) -> Self {
        Self::from_raw(&self.grid, self.values.iter().copied().map(f).collect())
    }

    /// Applies `f(value, q, p)` at each node.
    pub fn map_with_coords<F>(&self, mut f: F) -> Self
    where
        F: FnMut(R, [R; 2], [R; 2]) -> R,
    {
        let fl = self.grid.fibre_len();
        let mut out = Vec::with_capacity(self.values.len());
        for iq in 0..self.grid.spatial_len() {
            let q = self.grid.q_point(iq);
            for ip in 0..fl {
                out.push(f(self.values[iq * fl + ip], q, self.grid.p_point(ip)));
            }
        }
        Self::from_raw(&self.grid, out)
    }

    pub fn zip_map<F: FnMut(R, R) -> R>(&self, other: &Self, mut f: F) -> Result<Self> {
        if self.grid != other.grid {
            return Err(KinError::GridMismatch);
        }
        Ok(Self::from_raw(&self.grid, self.values.iter().zip(&other.values).map(|(&a, &b)| f(a, b)).collect()))
    }

    pub fn max_abs(&self) -> R {
        self.values.iter().fold(R::zero(), |m, v| m.max(v.abs()))
    }

    pub fn min_value(&self) -> R {
        self.values.iter().fold(R::infinity(), |m, &v| m.min(v))
    }

    pub fn check_finite(&self) -> Result<()> {
        check_finite(&self.values)
    }

    /// CSV snapshot: header naming the axes, one row per node, values with
    /// 17 significant digits.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        let n = self.grid.n;
        let mut header: Vec<String> = (0..n).map(|i| format!("q{i}")).collect();
        header.extend((0..n).map(|i| format!("p{i}")));
        header.push("value".into());
        writeln!(w, "{}", header.join(","))?;
        let fl = self.grid.fibre_len();
        for iq in 0..self.grid.spatial_len() {
            let q = self.grid.q_point(iq);
            for ip in 0..fl {
                let p = self.grid.p_point(ip);
                let mut row = String::new();
                for c in q.iter().take(n).chain(p.iter().take(n)) {
                    row.push_str(&format!("{:.16e},", c.as_f64()));
                }
                row.push_str(&format!("{:.16e}", self.values[iq * fl + ip].as_f64()));
                writeln!(w, "{row}")?;
            }
        }
        Ok(())
    }

    /// Reads a snapshot written by [`PhaseField::write_csv`] onto `grid`.
    pub fn read_csv<B: BufRead>(grid: &PhaseGrid<R>, reader: B) -> Result<Self> {
        let values = read_value_column(reader, 2 * grid.n() + 1)?;
        Self::from_values(grid, values)
    }
}

impl<R: Real> SpatialField<R> {
    pub fn from_values(grid: &PhaseGrid<R>, values: Vec<R>) -> Result<Self> {
        if values.len() != grid.spatial_len() {
            return Err(KinError::GridMismatch);
        }
        check_finite(&values)?;
        Ok(Self { grid: grid.clone(), values })
    }

    pub fn from_fn<F: FnMut([R; 2]) -> R>(grid: &PhaseGrid<R>, mut f: F) -> Result<Self> {
        let values = (0..grid.spatial_len()).map(|iq| f(grid.q_point(iq))).collect();
        Self::from_values(grid, values)
    }

    pub fn constant(grid: &PhaseGrid<R>, c: R) -> Self {
        Self { grid: grid.clone(), values: vec![c; grid.spatial_len()] }
    }

    pub(crate) fn from_raw(grid: &PhaseGrid<R>, values: Vec<R>) -> Self {
        debug_assert_eq!(values.len(), grid.spatial_len());
        Self { grid: grid.clone(), values }
    }

    pub fn grid(&self) -> &PhaseGrid<R> {
        &self.grid
    }

    pub fn values(&self) -> &[R] {
        &self.values
    }

    pub fn into_values(self) -> Vec<R> {
        self.values
    }

    pub fn map<F: FnMut(R) -> R>(&self, f: F) -> Self {
        Self::from_raw(&self.grid, self.values.iter().copied().map(f).collect())
    }

    pub fn zip_map<F: FnMut(R, R) -> R>(&self, other: &Self, mut f: F) -> Result<Self> {
        if self.grid != other.grid {
            return Err(KinError::GridMismatch);
        }
        Ok(Self::from_raw(&self.grid, self.values.iter().zip(&other.values).map(|(&a, &b)| f(a, b)).collect()))
    }

    pub fn scale(&self, c: R) -> Self {
        self.map(|v| v * c)
    }

    pub fn max_abs(&self) -> R {
        self.values.iter().fold(R::zero(), |m, v| m.max(v.abs()))
    }

    pub fn min_value(&self) -> R {
        self.values.iter().fold(R::infinity(), |m, &v| m.min(v))
    }

    pub fn max_value(&self) -> R {
        self.values.iter().fold(R::neg_infinity(), |m, &v| m.max(v))
    }

    pub fn mean(&self) -> R {
        integrate_q(self) / self.grid.volume()
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        let n = self.grid.n;
        let mut header: Vec<String> = (0..n).map(|i| format!("q{i}")).collect();
        header.push("value".into());
        writeln!(w, "{}", header.join(","))?;
        for (iq, v) in self.values.iter().enumerate() {
            let q = self.grid.q_point(iq);
            let mut row = String::new();
            for c in q.iter().take(n) {
                row.push_str(&format!("{:.16e},", c.as_f64()));
            }
            row.push_str(&format!("{:.16e}", v.as_f64()));
            writeln!(w, "{row}")?;
        }
        Ok(())
    }

    pub fn read_csv<B: BufRead>(grid: &PhaseGrid<R>, reader: B) -> Result<Self> {
        let values = read_value_column(reader, grid.n() + 1)?;
        Self::from_values(grid, values)
    }
}

fn read_value_column<R: Real, B: BufRead>(reader: B, columns: usize) -> Result<Vec<R>> {
    let mut lines = reader.lines();
    match lines.next() {
        Some(Ok(_header)) => {}
        _ => return Err(KinError::Parse("missing header line".into())),
    }
    let mut values = Vec::new();
    for (row, line) in lines.enumerate() {
        let line = line.map_err(|e| KinError::Parse(e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() != columns {
            return Err(KinError::Parse(format!("row {row}: expected {columns} columns, found {}", cols.len())));
        }
        let v: f64 = cols[columns - 1].trim().parse().map_err(|e| KinError::Parse(format!("row {row}: {e}")))?;
        values.push(R::lit(v));
    }
    Ok(values)
}

/// Per-q quadrature over the fibre.
pub fn integrate_p<R: Real>(field: &PhaseField<R>) -> SpatialField<R> {
    let grid = field.grid();
    let wp = grid.wp();
    let values = (0..grid.spatial_len()).map(|iq| field.fibre(iq).iter().copied().sum::<R>() * wp).collect();
    SpatialField::from_raw(grid, values)
}

/// Full phase-space quadrature.
pub fn integrate_qp<R: Real>(field: &PhaseField<R>) -> R {
    integrate_q(&integrate_p(field))
}

pub fn integrate_q<R: Real>(field: &SpatialField<R>) -> R {
    field.values().iter().copied().sum::<R>() * field.grid().wq()
}

/// Spectral derivative along q-axis `axis`.
pub fn ddq<R: Real>(field: &PhaseField<R>, axis: usize) -> Result<PhaseField<R>> {
    let grid = field.grid();
    grid.check_axis(axis)?;
    let values = spectral::derivative(field.values(), &grid.phase_shape(), axis, grid.fft_q(), grid.lq());
    Ok(PhaseField::from_raw(grid, values))
}

pub fn ddq_spatial<R: Real>(field: &SpatialField<R>, axis: usize) -> Result<SpatialField<R>> {
    let grid = field.grid();
    grid.check_axis(axis)?;
    let values = spectral::derivative(field.values(), &grid.spatial_shape(), axis, grid.fft_q(), grid.lq());
    Ok(SpatialField::from_raw(grid, values))
}

/// Spectral derivative along p-axis `axis`, treating the p box as periodic.
/// Logs a warning when the field does not decay at the p boundary.
pub fn ddp<R: Real>(field: &PhaseField<R>, axis: usize) -> Result<PhaseField<R>> {
    let grid = field.grid();
    grid.check_axis(axis)?;
    let ratio = p_boundary_ratio(field);
    if ratio > R::lit(BOUNDARY_DECAY_TOL) {
        log::warn!(
            "ddp: boundary amplitude ratio {:.3e} exceeds {:.0e}; spectral p-derivative may alias",
            ratio.as_f64(),
            BOUNDARY_DECAY_TOL
        );
    }
    let values = spectral::derivative(
        field.values(),
        &grid.phase_shape(),
        grid.n() + axis,
        grid.fft_p(),
        grid.pmax() + grid.pmax(),
    );
    Ok(PhaseField::from_raw(grid, values))
}

/// `max |field|` on the p boundary divided by `max |field|` overall.
pub fn p_boundary_ratio<R: Real>(field: &PhaseField<R>) -> R {
    let grid = field.grid();
    let total = field.max_abs();
    if total == R::zero() {
        return R::zero();
    }
    let fl = grid.fibre_len();
    let mut edge = R::zero();
    for iq in 0..grid.spatial_len() {
        for (ip, v) in field.fibre(iq).iter().enumerate() {
            if grid.is_p_boundary(ip) {
                edge = edge.max(v.abs());
            }
        }
        debug_assert_eq!(field.fibre(iq).len(), fl);
    }
    edge / total
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn grid1() -> PhaseGrid<f64> {
        make_phase_grid(1, 2.0 * PI, 64, 8.0, 128).unwrap()
    }

    #[test]
    fn rejects_bad_sizes() {
        assert!(make_phase_grid::<f64>(1, 1.0, 12, 4.0, 16).is_err());
        assert!(make_phase_grid::<f64>(1, 1.0, 4, 4.0, 16).is_err());
        assert!(make_phase_grid::<f64>(3, 1.0, 8, 4.0, 16).is_err());
        assert!(make_phase_grid::<f64>(1, -1.0, 8, 4.0, 16).is_err());
        assert!(make_phase_grid::<f64>(1, 1.0, 8, 0.0, 16).is_err());
    }

    #[test]
    fn weights_and_volume() {
        let g = grid1();
        let sw = g.wq() * g.spatial_len() as f64 * g.wp() * g.fibre_len() as f64;
        assert!((sw - 2.0 * PI * 16.0).abs() < 1e-12);

        let g2 = make_phase_grid::<f64>(2, 2.0 * PI, 32, 8.0, 64).unwrap();
        let sq = g2.wq() * g2.spatial_len() as f64;
        assert!((sq - 4.0 * PI * PI).abs() < 1e-12);

        let g3 = make_phase_grid::<f64>(1, 1.0, 8, 4.0, 16).unwrap();
        assert_eq!(g3.len(), 8 * 16);
        assert_eq!(g3.wq(), 1.0 / 8.0);
    }

    #[test]
    fn p_axis_is_symmetric() {
        let g = grid1();
        let p = g.p_axis();
        for j in 0..p.len() {
            assert_eq!(p[j], -p[p.len() - 1 - j]);
        }
    }

    #[test]
    fn integrate_p_gaussian_and_odd() {
        let g = grid1();
        let c = PhaseField::constant(&g, 1.0);
        for v in integrate_p(&c).values() {
            assert!((v - 16.0).abs() < 1e-12);
        }
        let gauss = PhaseField::from_fn(&g, |_, p| (-p[0] * p[0] / 2.0).exp() / (2.0 * PI).sqrt()).unwrap();
        for v in integrate_p(&gauss).values() {
            assert!((v - 1.0).abs() < 1e-12);
        }
        let odd = PhaseField::from_fn(&g, |_, p| p[0] * (-p[0] * p[0] / 2.0).exp()).unwrap();
        for v in integrate_p(&odd).values() {
            assert!(v.abs() < 1e-14);
        }
        assert!((integrate_qp(&c) - 32.0 * PI).abs() < 1e-11);
    }

    #[test]
    fn integrate_q_sine() {
        let g = grid1();
        let s = SpatialField::from_fn(&g, |q| q[0].sin()).unwrap();
        assert!(integrate_q(&s).abs() < 1e-14);
    }

    #[test]
    fn derivatives() {
        let g = grid1();
        let s = PhaseField::from_fn(&g, |q, _| q[0].sin()).unwrap();
        let d = ddq(&s, 0).unwrap();
        let exact = PhaseField::from_fn(&g, |q, _| q[0].cos()).unwrap();
        let err = d.zip_map(&exact, |a, b| a - b).unwrap().max_abs();
        assert!(err < 1e-12, "{err}");

        let gauss = PhaseField::from_fn(&g, |_, p| (-p[0] * p[0] / 2.0).exp()).unwrap();
        let dg = ddp(&gauss, 0).unwrap();
        let exact = PhaseField::from_fn(&g, |_, p| -p[0] * (-p[0] * p[0] / 2.0).exp()).unwrap();
        assert!(dg.zip_map(&exact, |a, b| a - b).unwrap().max_abs() < 1e-10);

        let c = PhaseField::constant(&g, 3.5);
        assert!(ddq(&c, 0).unwrap().values().iter().all(|&v| v == 0.0));
        assert!(ddq(&c, 1).is_err());
    }

    #[test]
    fn boundary_ratio_flags_non_decaying_fields() {
        let g = grid1();
        let lin = PhaseField::from_fn(&g, |_, p| p[0]).unwrap();
        assert!(p_boundary_ratio(&lin) > 0.5);
        let gauss = PhaseField::from_fn(&g, |_, p| (-p[0] * p[0] / 2.0).exp()).unwrap();
        assert!(p_boundary_ratio(&gauss) < BOUNDARY_DECAY_TOL);
    }

    #[test]
    fn two_dimensional_derivatives() {
        let g = make_phase_grid::<f64>(2, 2.0 * PI, 16, 8.0, 64).unwrap();
        let f = PhaseField::from_fn(&g, |q, p| (q[0] + 2.0 * q[1]).sin() * (-(p[0] * p[0] + p[1] * p[1]) / 2.0).exp())
            .unwrap();
        let d1 = ddq(&f, 1).unwrap();
        let exact = PhaseField::from_fn(&g, |q, p| {
            2.0 * (q[0] + 2.0 * q[1]).cos() * (-(p[0] * p[0] + p[1] * p[1]) / 2.0).exp()
        })
        .unwrap();
        assert!(d1.zip_map(&exact, |a, b| a - b).unwrap().max_abs() < 1e-12);
        let dp1 = ddp(&f, 1).unwrap();
        let exact = PhaseField::from_fn(&g, |q, p| {
            -p[1] * (q[0] + 2.0 * q[1]).sin() * (-(p[0] * p[0] + p[1] * p[1]) / 2.0).exp()
        })
        .unwrap();
        assert!(dp1.zip_map(&exact, |a, b| a - b).unwrap().max_abs() < 1e-9);
    }

    #[test]
    fn single_precision_grid() {
        let g = make_phase_grid::<f32>(1, 2.0 * std::f32::consts::PI, 32, 8.0, 64).unwrap();
        let gauss =
            PhaseField::from_fn(&g, |_, p| (-p[0] * p[0] / 2.0).exp() / (2.0 * std::f32::consts::PI).sqrt()).unwrap();
        for v in integrate_p(&gauss).values() {
            assert!((v - 1.0).abs() < 1e-5);
        }
    }

    #[test]
    fn csv_round_trip_is_bit_exact() {
        let g = make_phase_grid::<f64>(1, 1.0, 8, 4.0, 16).unwrap();
        let f = PhaseField::from_fn(&g, |q, p| (q[0] * 7.3).sin() / 3.0 + p[0].exp()).unwrap();
        let mut buf = Vec::new();
        f.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("q0,p0,value\n"));
        let back = PhaseField::read_csv(&g, buf.as_slice()).unwrap();
        assert_eq!(back, f);
    }
}
