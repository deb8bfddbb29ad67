//! Raw forward/backward loops for the heavier ops. Shapes are validated by
//! the caller in `graph.rs`.

use super::Element;

#[derive(Clone, Copy, Debug)]
pub(crate) struct Conv1dDims {
    pub batch: usize,
    pub cin: usize,
    pub len: usize,
    pub cout: usize,
    pub kernel: usize,
    pub stride: usize,
    pub pad: usize,
    pub out_len: usize,
}

pub(crate) fn conv1d_forward<T: Element>(d: Conv1dDims, x: &[T], w: &[T], bias: Option<&[T]>) -> Vec<T> {
    let mut y = vec![T::zero(); d.batch * d.cout * d.out_len];
    for b in 0..d.batch {
        for co in 0..d.cout {
            let row = &mut y[(b * d.cout + co) * d.out_len..][..d.out_len];
            if let Some(bias) = bias {
                row.iter_mut().for_each(|v| *v = bias[co]);
            }
            for ci in 0..d.cin {
                let xr = &x[(b * d.cin + ci) * d.len..][..d.len];
                let wr = &w[(co * d.cin + ci) * d.kernel..][..d.kernel];
                for (k, &wk) in wr.iter().enumerate() {
                    let (lo_start, lo_end) = valid_range(d.out_len, d.len, k, d.stride, d.pad);
                    for lo in lo_start..lo_end {
                        row[lo] = row[lo] + wk * xr[lo * d.stride + k - d.pad];
                    }
                }
            }
        }
    }
    y
}

/// Output positions `lo` for which `lo*stride + k - pad` lands in `[0, len)`.
fn valid_range(out_len: usize, len: usize, k: usize, stride: usize, pad: usize) -> (usize, usize) {
    let start = if k >= pad { 0 } else { (pad - k).div_ceil(stride) };
    // lo*stride + k - pad <= len - 1
    let end = if len + pad < k + 1 { 0 } else { ((len + pad - k - 1) / stride + 1).min(out_len) };
    (start.min(end), end)
}

pub(crate) fn conv1d_backward<T: Element>(
    d: Conv1dDims,
    x: &[T],
    w: &[T],
    dy: &[T],
    dx: Option<&mut [T]>,
    dw: Option<&mut [T]>,
    db: Option<&mut [T]>,
) {
    if let Some(db) = db {
        for b in 0..d.batch {
            for co in 0..d.cout {
                let row = &dy[(b * d.cout + co) * d.out_len..][..d.out_len];
                db[co] = db[co] + row.iter().copied().sum::<T>();
            }
        }
    }
    let mut dx = dx;
    let mut dw = dw;
    for b in 0..d.batch {
        for co in 0..d.cout {
            let gr = &dy[(b * d.cout + co) * d.out_len..][..d.out_len];
            for ci in 0..d.cin {
                let xoff = (b * d.cin + ci) * d.len;
                let woff = (co * d.cin + ci) * d.kernel;
                for k in 0..d.kernel {
                    let (lo_start, lo_end) = valid_range(d.out_len, d.len, k, d.stride, d.pad);
                    if let Some(dw) = dw.as_deref_mut() {
                        let mut acc = T::zero();
                        for lo in lo_start..lo_end {
                            acc = acc + gr[lo] * x[xoff + lo * d.stride + k - d.pad];
                        }
                        dw[woff + k] = dw[woff + k] + acc;
                    }
                    if let Some(dx) = dx.as_deref_mut() {
                        let wk = w[woff + k];
                        for lo in lo_start..lo_end {
                            let i = xoff + lo * d.stride + k - d.pad;
                            dx[i] = dx[i] + wk * gr[lo];
                        }
                    }
                }
            }
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub(crate) struct Conv2dDims {
    pub batch: usize,
    pub cin: usize,
    pub height: usize,
    pub width: usize,
    pub cout: usize,
    pub kernel: usize,
    pub pad: usize,
    pub out_h: usize,
    pub out_w: usize,
}

fn span(out: usize, inp: usize, k: usize, pad: usize) -> (usize, usize) {
    valid_range(out, inp, k, 1, pad)
}

pub(crate) fn conv2d_forward<T: Element>(d: Conv2dDims, x: &[T], w: &[T], bias: Option<&[T]>) -> Vec<T> {
    let plane_in = d.height * d.width;
    let plane_out = d.out_h * d.out_w;
    let mut y = vec![T::zero(); d.batch * d.cout * plane_out];
    for b in 0..d.batch {
        for co in 0..d.cout {
            let out = &mut y[(b * d.cout + co) * plane_out..][..plane_out];
            if let Some(bias) = bias {
                out.iter_mut().for_each(|v| *v = bias[co]);
            }
            for ci in 0..d.cin {
                let xin = &x[(b * d.cin + ci) * plane_in..][..plane_in];
                for ky in 0..d.kernel {
                    let (y0, y1) = span(d.out_h, d.height, ky, d.pad);
                    for kx in 0..d.kernel {
                        let wv = w[((co * d.cin + ci) * d.kernel + ky) * d.kernel + kx];
                        let (x0, x1) = span(d.out_w, d.width, kx, d.pad);
                        for oy in y0..y1 {
                            let iy = oy + ky - d.pad;
                            let orow = &mut out[oy * d.out_w..][..d.out_w];
                            let irow = &xin[iy * d.width..][..d.width];
                            for ox in x0..x1 {
                                orow[ox] = orow[ox] + wv * irow[ox + kx - d.pad];
                            }
                        }
                    }
                }
            }
        }
    }
    y
}

pub(crate) fn conv2d_backward<T: Element>(
    d: Conv2dDims,
    x: &[T],
    w: &[T],
    dy: &[T],
    dx: Option<&mut [T]>,
    dw: Option<&mut [T]>,
    db: Option<&mut [T]>,
) {
    let plane_in = d.height * d.width;
    let plane_out = d.out_h * d.out_w;
    if let Some(db) = db {
        for b in 0..d.batch {
            for co in 0..d.cout {
                let g = &dy[(b * d.cout + co) * plane_out..][..plane_out];
                db[co] = db[co] + g.iter().copied().sum::<T>();
            }
        }
    }
    let mut dx = dx;
    let mut dw = dw;
    for b in 0..d.batch {
        for co in 0..d.cout {
            let g = &dy[(b * d.cout + co) * plane_out..][..plane_out];
            for ci in 0..d.cin {
                let xoff = (b * d.cin + ci) * plane_in;
                for ky in 0..d.kernel {
                    let (y0, y1) = span(d.out_h, d.height, ky, d.pad);
                    for kx in 0..d.kernel {
                        let widx = ((co * d.cin + ci) * d.kernel + ky) * d.kernel + kx;
                        let (x0, x1) = span(d.out_w, d.width, kx, d.pad);
                        let wv = w[widx];
                        let mut acc = T::zero();
                        for oy in y0..y1 {
                            let iy = oy + ky - d.pad;
                            let grow = &g[oy * d.out_w..][..d.out_w];
                            let rbase = xoff + iy * d.width;
                            if dw.is_some() {
                                let irow = &x[rbase..][..d.width];
                                for ox in x0..x1 {
                                    acc = acc + grow[ox] * irow[ox + kx - d.pad];
                                }
                            }
                            if let Some(dx) = dx.as_deref_mut() {
                                let drow = &mut dx[rbase..][..d.width];
                                for ox in x0..x1 {
                                    drow[ox + kx - d.pad] = drow[ox + kx - d.pad] + wv * grow[ox];
                                }
                            }
                        }
                        if let Some(dw) = dw.as_deref_mut() {
                            dw[widx] = dw[widx] + acc;
                        }
                    }
                }
            }
        }
    }
}

/// `y[b, o] = sum_i x[b, i] * w[o, i] + bias[o]`.
pub(crate) fn linear_forward<T: Element>(batch: usize, fin: usize, fout: usize, x: &[T], w: &[T], bias: Option<&[T]>) -> Vec<T> {
    let mut y = vec![T::zero(); batch * fout];
    for b in 0..batch {
        let xr = &x[b * fin..][..fin];
        for o in 0..fout {
            let wr = &w[o * fin..][..fin];
            let mut acc = bias.map_or(T::zero(), |bb| bb[o]);
            for (a, c) in xr.iter().zip(wr) {
                acc = acc + *a * *c;
            }
            y[b * fout + o] = acc;
        }
    }
    y
}

#[allow(clippy::too_many_arguments)]
pub(crate) fn linear_backward<T: Element>(
    batch: usize,
    fin: usize,
    fout: usize,
    x: &[T],
    w: &[T],
    dy: &[T],
    mut dx: Option<&mut [T]>,
    mut dw: Option<&mut [T]>,
    db: Option<&mut [T]>,
) {
    if let Some(db) = db {
        for b in 0..batch {
            for o in 0..fout {
                db[o] = db[o] + dy[b * fout + o];
            }
        }
    }
    for b in 0..batch {
        let xr = &x[b * fin..][..fin];
        for o in 0..fout {
            let g = dy[b * fout + o];
            if g == T::zero() {
                continue;
            }
            if let Some(dw) = dw.as_deref_mut() {
                let dwr = &mut dw[o * fin..][..fin];
                for (d, a) in dwr.iter_mut().zip(xr) {
                    *d = *d + g * *a;
                }
            }
            if let Some(dx) = dx.as_deref_mut() {
                let wr = &w[o * fin..][..fin];
                let dxr = &mut dx[b * fin..][..fin];
                for (d, c) in dxr.iter_mut().zip(wr) {
                    *d = *d + g * *c;
                }
            }
        }
    }
}

pub(crate) fn upsample2d_forward<T: Element>(planes: usize, h: usize, w: usize, f: usize, x: &[T]) -> Vec<T> {
    let (oh, ow) = (h * f, w * f);
    let mut y = vec![T::zero(); planes * oh * ow];
    for p in 0..planes {
        let src = &x[p * h * w..][..h * w];
        let dst = &mut y[p * oh * ow..][..oh * ow];
        for oy in 0..oh {
            for ox in 0..ow {
                dst[oy * ow + ox] = src[(oy / f) * w + ox / f];
            }
        }
    }
    y
}

pub(crate) fn upsample2d_backward<T: Element>(planes: usize, h: usize, w: usize, f: usize, dy: &[T], dx: &mut [T]) {
    let (oh, ow) = (h * f, w * f);
    for p in 0..planes {
        let g = &dy[p * oh * ow..][..oh * ow];
        let d = &mut dx[p * h * w..][..h * w];
        for oy in 0..oh {
            for ox in 0..ow {
                let i = (oy / f) * w + ox / f;
                d[i] = d[i] + g[oy * ow + ox];
            }
        }
    }
}

pub(crate) const NORM_EPS: f64 = 1e-5;

/// Per-(sample, channel) standardization followed by a per-channel affine map.
/// Returns `(y, x_hat, inv_std)`.
pub(crate) fn channel_norm_forward<T: Element>(
    batch: usize,
    channels: usize,
    spatial: usize,
    x: &[T],
    gamma: &[T],
    beta: &[T],
) -> (Vec<T>, Vec<T>, Vec<T>) {
    let n = T::of(spatial as f64);
    let eps = T::of(NORM_EPS);
    let mut y = vec![T::zero(); x.len()];
    let mut xhat = vec![T::zero(); x.len()];
    let mut inv = vec![T::zero(); batch * channels];
    for b in 0..batch {
        for c in 0..channels {
            let off = (b * channels + c) * spatial;
            let xs = &x[off..off + spatial];
            let mean = xs.iter().copied().sum::<T>() / n;
            let var = xs.iter().map(|&v| (v - mean) * (v - mean)).sum::<T>() / n;
            let is = T::one() / (var + eps).sqrt();
            inv[b * channels + c] = is;
            for i in 0..spatial {
                let h = (xs[i] - mean) * is;
                xhat[off + i] = h;
                y[off + i] = gamma[c] * h + beta[c];
            }
        }
    }
    (y, xhat, inv)
}

#[allow(clippy::too_many_arguments)]
pub(crate) fn channel_norm_backward<T: Element>(
    batch: usize,
    channels: usize,
    spatial: usize,
    xhat: &[T],
    inv_std: &[T],
    gamma: &[T],
    dy: &[T],
    mut dx: Option<&mut [T]>,
    mut dgamma: Option<&mut [T]>,
    mut dbeta: Option<&mut [T]>,
) {
    let n = T::of(spatial as f64);
    for b in 0..batch {
        for c in 0..channels {
            let off = (b * channels + c) * spatial;
            let g = &dy[off..off + spatial];
            let h = &xhat[off..off + spatial];
            let sum_g = g.iter().copied().sum::<T>();
            let sum_gh = g.iter().zip(h).map(|(a, b)| *a * *b).sum::<T>();
            if let Some(db) = dbeta.as_deref_mut() {
                db[c] = db[c] + sum_g;
            }
            if let Some(dg) = dgamma.as_deref_mut() {
                dg[c] = dg[c] + sum_gh;
            }
            if let Some(dx) = dx.as_deref_mut() {
                let k = gamma[c] * inv_std[b * channels + c];
                let mg = sum_g / n;
                let mgh = sum_gh / n;
                for i in 0..spatial {
                    dx[off + i] = dx[off + i] + k * (g[i] - mg - h[i] * mgh);
                }
            }
        }
    }
}
