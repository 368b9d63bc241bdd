//! FFT plumbing on periodic lines of a row-major array.

use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::scalar::Real;

/// Forward / inverse plan pair for one line length.
#[derive(Clone)]
pub(crate) struct FftPair<R: Real> {
    pub(crate) len: usize,
    fwd: Arc<dyn Fft<R>>,
    inv: Arc<dyn Fft<R>>,
}

impl<R: Real> FftPair<R> {
    pub(crate) fn new(len: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self { len, fwd: planner.plan_fft_forward(len), inv: planner.plan_fft_inverse(len) }
    }

    pub(crate) fn forward(&self, buf: &mut [Complex<R>]) {
        self.fwd.process(buf);
    }

    /// Inverse transform including the `1/N` normalization.
    pub(crate) fn inverse(&self, buf: &mut [Complex<R>]) {
        self.inv.process(buf);
        let scale = R::one() / R::from_usize_lossy(self.len);
        for c in buf.iter_mut() {
            *c *= scale;
        }
    }
}

/// Angular wavenumber of FFT mode `j` on a line of `len` points and period
/// `period`. The Nyquist mode is reported with its positive frequency.
#[inline]
pub(crate) fn wavenumber<R: Real>(j: usize, len: usize, period: R) -> R {
    let signed = if j <= len / 2 { j as f64 } else { j as f64 - len as f64 };
    R::lit(2.0 * std::f64::consts::PI * signed) / period
}

#[inline]
pub(crate) fn is_nyquist(j: usize, len: usize) -> bool {
    len.is_multiple_of(2) && j == len / 2
}

/// Row-major strides helper: number of elements between consecutive entries
/// along `axis`.
fn stride(shape: &[usize], axis: usize) -> usize {
    shape[axis + 1..].iter().product()
}

/// Visits every line along `axis`, handing the closure the flat index of the
/// line's first element and its Fourier coefficients (forward transformed).
/// The modified coefficients are transformed back and written into `out`.
pub(crate) fn transform_lines<R, F>(values: &[R], shape: &[usize], axis: usize, plan: &FftPair<R>, mut op: F) -> Vec<R>
where
    R: Real,
    F: FnMut(usize, &mut [Complex<R>]),
{
    let len = shape[axis];
    debug_assert_eq!(len, plan.len);
    let st = stride(shape, axis);
    let outer: usize = shape[..axis].iter().product();
    let mut out = vec![R::zero(); values.len()];
    let mut buf = vec![Complex::new(R::zero(), R::zero()); len];
    for o in 0..outer {
        for inner in 0..st {
            let base = o * len * st + inner;
            for (j, c) in buf.iter_mut().enumerate() {
                *c = Complex::new(values[base + j * st], R::zero());
            }
            plan.forward(&mut buf);
            op(base, &mut buf);
            plan.inverse(&mut buf);
            for (j, c) in buf.iter().enumerate() {
                out[base + j * st] = c.re;
            }
        }
    }
    out
}

/// In-place complex FFT along one axis of a row-major array.
pub(crate) fn fft_axis<R: Real>(
    data: &mut [Complex<R>],
    shape: &[usize],
    axis: usize,
    plan: &FftPair<R>,
    inverse: bool,
) {
    let len = shape[axis];
    let st = stride(shape, axis);
    let outer: usize = shape[..axis].iter().product();
    let mut buf = vec![Complex::new(R::zero(), R::zero()); len];
    for o in 0..outer {
        for inner in 0..st {
            let base = o * len * st + inner;
            for (j, c) in buf.iter_mut().enumerate() {
                *c = data[base + j * st];
            }
            if inverse {
                plan.inverse(&mut buf);
            } else {
                plan.forward(&mut buf);
            }
            for (j, c) in buf.iter().enumerate() {
                data[base + j * st] = *c;
            }
        }
    }
}

/// Spectral derivative of every line along `axis` (Nyquist mode zeroed).
pub(crate) fn derivative<R: Real>(values: &[R], shape: &[usize], axis: usize, plan: &FftPair<R>, period: R) -> Vec<R> {
    let len = shape[axis];
    transform_lines(values, shape, axis, plan, |_, coeffs| {
        for (j, c) in coeffs.iter_mut().enumerate() {
            if is_nyquist(j, len) {
                *c = Complex::new(R::zero(), R::zero());
            } else {
                let k = wavenumber(j, len, period);
                *c = Complex::new(-c.im * k, c.re * k);
            }
        }
    })
}

/// Multiplies the coefficients of one line by the phase of a translation by
/// `shift` (new(x) = old(x - shift)). The Nyquist mode keeps only the real
/// part of its phase so that real data stays real.
pub(crate) fn apply_shift<R: Real>(coeffs: &mut [Complex<R>], period: R, shift: R) {
    let len = coeffs.len();
    for (j, c) in coeffs.iter_mut().enumerate() {
        let k = wavenumber(j, len, period);
        let arg = -k * shift;
        if is_nyquist(j, len) {
            *c *= arg.cos();
        } else {
            *c *= Complex::new(arg.cos(), arg.sin());
        }
    }
}
