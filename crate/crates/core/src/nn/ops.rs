//! Forward and backward kernels for the layers used by the translator
//! networks. All kernels work on one sample (CHW) at a time.

use super::Real;

/// Spatial geometry of a strided convolution window.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Window {
    pub kernel: usize,
    pub stride: usize,
    pub pad: usize,
}

impl Window {
    /// Output extent along one axis, or `None` when the window does not fit.
    pub fn out_len(&self, input: usize) -> Option<usize> {
        let padded = input + 2 * self.pad;
        if padded < self.kernel {
            None
        } else {
            Some((padded - self.kernel) / self.stride + 1)
        }
    }

    /// Output extent of the transposed convolution with this window.
    pub fn transposed_out_len(&self, input: usize, output_pad: usize) -> Option<usize> {
        ((input - 1) * self.stride + self.kernel + output_pad).checked_sub(2 * self.pad)
    }
}

/// Unfold `input` (C×H×W) into columns of shape (C·k·k) × (oh·ow).
#[allow(clippy::too_many_arguments)]
pub fn im2col<T: Real>(
    input: &[T],
    channels: usize,
    h: usize,
    w: usize,
    win: Window,
    oh: usize,
    ow: usize,
    cols: &mut [T],
) {
    let k = win.kernel;
    let n_out = oh * ow;
    debug_assert_eq!(cols.len(), channels * k * k * n_out);
    for c in 0..channels {
        let plane = &input[c * h * w..(c + 1) * h * w];
        for ki in 0..k {
            for kj in 0..k {
                let row = (c * k + ki) * k + kj;
                let dst = &mut cols[row * n_out..(row + 1) * n_out];
                for oy in 0..oh {
                    let iy = (oy * win.stride + ki) as isize - win.pad as isize;
                    let line = &mut dst[oy * ow..(oy + 1) * ow];
                    if iy < 0 || iy >= h as isize {
                        line.fill(T::zero());
                        continue;
                    }
                    let src = &plane[iy as usize * w..(iy as usize + 1) * w];
                    for (ox, slot) in line.iter_mut().enumerate() {
                        let ix = (ox * win.stride + kj) as isize - win.pad as isize;
                        *slot = if ix < 0 || ix >= w as isize {
                            T::zero()
                        } else {
                            src[ix as usize]
                        };
                    }
                }
            }
        }
    }
}

/// Adjoint of [`im2col`]: scatter-add columns back onto a C×H×W plane.
#[allow(clippy::too_many_arguments)]
pub fn col2im<T: Real>(
    cols: &[T],
    channels: usize,
    h: usize,
    w: usize,
    win: Window,
    oh: usize,
    ow: usize,
    out: &mut [T],
) {
    let k = win.kernel;
    let n_out = oh * ow;
    debug_assert_eq!(out.len(), channels * h * w);
    for c in 0..channels {
        let plane = &mut out[c * h * w..(c + 1) * h * w];
        for ki in 0..k {
            for kj in 0..k {
                let row = (c * k + ki) * k + kj;
                let src = &cols[row * n_out..(row + 1) * n_out];
                for oy in 0..oh {
                    let iy = (oy * win.stride + ki) as isize - win.pad as isize;
                    if iy < 0 || iy >= h as isize {
                        continue;
                    }
                    let dst = &mut plane[iy as usize * w..(iy as usize + 1) * w];
                    for ox in 0..ow {
                        let ix = (ox * win.stride + kj) as isize - win.pad as isize;
                        if ix >= 0 && ix < w as isize {
                            dst[ix as usize] += src[oy * ow + ox];
                        }
                    }
                }
            }
        }
    }
}

#[inline]
fn reflect(i: isize, n: usize) -> usize {
    let n = n as isize;
    let r = if i < 0 {
        -i
    } else if i >= n {
        2 * (n - 1) - i
    } else {
        i
    };
    r as usize
}

pub fn reflection_pad<T: Real>(input: &[T], channels: usize, h: usize, w: usize, pad: usize) -> Vec<T> {
    let (ph, pw) = (h + 2 * pad, w + 2 * pad);
    let mut out = Vec::with_capacity(channels * ph * pw);
    for c in 0..channels {
        let plane = &input[c * h * w..(c + 1) * h * w];
        for y in 0..ph {
            let sy = reflect(y as isize - pad as isize, h);
            for x in 0..pw {
                let sx = reflect(x as isize - pad as isize, w);
                out.push(plane[sy * w + sx]);
            }
        }
    }
    out
}

pub fn reflection_pad_backward<T: Real>(
    grad_out: &[T],
    channels: usize,
    h: usize,
    w: usize,
    pad: usize,
) -> Vec<T> {
    let (ph, pw) = (h + 2 * pad, w + 2 * pad);
    let mut grad_in = vec![T::zero(); channels * h * w];
    for c in 0..channels {
        let src = &grad_out[c * ph * pw..(c + 1) * ph * pw];
        let dst = &mut grad_in[c * h * w..(c + 1) * h * w];
        for y in 0..ph {
            let sy = reflect(y as isize - pad as isize, h);
            for x in 0..pw {
                let sx = reflect(x as isize - pad as isize, w);
                dst[sy * w + sx] += src[y * pw + x];
            }
        }
    }
    grad_in
}

pub const NORM_EPS: f64 = 1e-5;

/// Per-channel standardization in place; returns the inverse std per channel.
pub fn instance_norm<T: Real>(data: &mut [T], channels: usize, plane: usize) -> Vec<T> {
    let eps = T::of(NORM_EPS);
    let count = T::of(plane as f64);
    let mut inv = Vec::with_capacity(channels);
    for c in 0..channels {
        let x = &mut data[c * plane..(c + 1) * plane];
        let mean = x.iter().copied().sum::<T>() / count;
        let var = x.iter().map(|&v| (v - mean) * (v - mean)).sum::<T>() / count;
        let s = T::one() / (var + eps).sqrt();
        for v in x.iter_mut() {
            *v = (*v - mean) * s;
        }
        inv.push(s);
    }
    inv
}

/// Gradient of [`instance_norm`] given its output `xhat`.
pub fn instance_norm_backward<T: Real>(grad: &mut [T], xhat: &[T], inv: &[T], plane: usize) {
    let count = T::of(plane as f64);
    for (c, &s) in inv.iter().enumerate() {
        let g = &mut grad[c * plane..(c + 1) * plane];
        let xh = &xhat[c * plane..(c + 1) * plane];
        let mean_g = g.iter().copied().sum::<T>() / count;
        let mean_gx = g.iter().zip(xh).map(|(&a, &b)| a * b).sum::<T>() / count;
        for (gv, &xv) in g.iter_mut().zip(xh) {
            *gv = s * (*gv - mean_g - xv * mean_gx);
        }
    }
}
