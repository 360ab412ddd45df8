//! Hot loops shared by the layers.

#[cfg(not(feature = "std"))]
use num_traits::Float;

/// Dot product over four independent lanes plus a scalar tail.
///
/// [`matmul_nt`] reproduces this summation order exactly for every sample, so
/// batched and one-at-a-time evaluation agree bit for bit.
#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let ca = a.chunks_exact(4);
    let cb = b.chunks_exact(4);
    let tail = tail_dot(ca.remainder(), cb.remainder());
    let mut acc = [0.0f64; 4];
    for (x, y) in ca.zip(cb) {
        for l in 0..4 {
            acc[l] += x[l] * y[l];
        }
    }
    reduce4(acc, tail)
}

#[inline(always)]
fn reduce4(a: [f64; 4], tail: f64) -> f64 {
    (a[0] + a[2]) + (a[1] + a[3]) + tail
}

#[inline(always)]
fn tail_dot(a: &[f64], b: &[f64]) -> f64 {
    let mut s = 0.0;
    for (x, y) in a.iter().zip(b) {
        s += x * y;
    }
    s
}

/// `Y = X W^T (+ b)` for a batch of row-major samples: `x` is `T x n_in`,
/// `w` is `out x n_in`, `y` is `T x out`.
pub fn matmul_nt(x: &[f64], w: &[f64], b: Option<&[f64]>, n_in: usize, y: &mut [f64]) {
    assert!(n_in > 0, "matmul_nt needs at least one input feature");
    let t = x.len() / n_in;
    let n_out = w.len() / n_in;
    debug_assert_eq!(y.len(), t * n_out);
    let blocked = t / 4 * 4;
    let split = n_in / 4 * 4;
    for o in 0..n_out {
        let wr = &w[o * n_in..(o + 1) * n_in];
        let bias = b.map_or(0.0, |b| b[o]);
        for s in (0..blocked).step_by(4) {
            let rows = [
                &x[s * n_in..(s + 1) * n_in],
                &x[(s + 1) * n_in..(s + 2) * n_in],
                &x[(s + 2) * n_in..(s + 3) * n_in],
                &x[(s + 3) * n_in..(s + 4) * n_in],
            ];
            let mut acc = [[0.0f64; 4]; 4];
            for k in (0..split).step_by(4) {
                let wc = &wr[k..k + 4];
                for (a, row) in acc.iter_mut().zip(&rows) {
                    let xc = &row[k..k + 4];
                    for l in 0..4 {
                        a[l] += wc[l] * xc[l];
                    }
                }
            }
            for (r, (a, row)) in acc.iter().zip(&rows).enumerate() {
                let tail = tail_dot(&wr[split..], &row[split..]);
                y[(s + r) * n_out + o] = bias + reduce4(*a, tail);
            }
        }
        for s in blocked..t {
            y[s * n_out + o] = bias + dot(wr, &x[s * n_in..(s + 1) * n_in]);
        }
    }
}

/// `dW += DY^T X`: `dy` is `T x out`, `x` is `T x n_in`, `dw` is `out x n_in`.
pub fn matmul_tn_acc(dy: &[f64], x: &[f64], n_in: usize, dw: &mut [f64]) {
    let n_out = dw.len() / n_in;
    matmul_tn_acc_cols(dy, n_out, 0, x, n_in, dw);
}

/// [`matmul_tn_acc`] restricted to columns `col0..col0 + dw.len() / n_in` of
/// a `dy` whose rows are `dy_stride` wide.
pub fn matmul_tn_acc_cols(dy: &[f64], dy_stride: usize, col0: usize, x: &[f64], n_in: usize, dw: &mut [f64]) {
    let n_out = dw.len() / n_in;
    let t_len = x.len() / n_in;
    debug_assert!(dy.len() >= t_len * dy_stride && col0 + n_out <= dy_stride);
    let split = n_in / 4 * 4;
    let mut o = 0;
    // Four output rows at a time, each row chunk held in registers over all samples.
    while o + 4 <= n_out {
        for k in (0..split).step_by(4) {
            let mut acc = [[0.0f64; 4]; 4];
            for t in 0..t_len {
                let xc = &x[t * n_in + k..t * n_in + k + 4];
                let g = &dy[t * dy_stride + col0 + o..t * dy_stride + col0 + o + 4];
                for (a, &gv) in acc.iter_mut().zip(g) {
                    for l in 0..4 {
                        a[l] += gv * xc[l];
                    }
                }
            }
            for (r, a) in acc.iter().enumerate() {
                let row = &mut dw[(o + r) * n_in + k..(o + r) * n_in + k + 4];
                for l in 0..4 {
                    row[l] += a[l];
                }
            }
        }
        for r in o..o + 4 {
            for k in split..n_in {
                let mut acc = 0.0;
                for t in 0..t_len {
                    acc += dy[t * dy_stride + col0 + r] * x[t * n_in + k];
                }
                dw[r * n_in + k] += acc;
            }
        }
        o += 4;
    }
    for r in o..n_out {
        for t in 0..t_len {
            let g = dy[t * dy_stride + col0 + r];
            if g != 0.0 {
                axpy(g, &x[t * n_in..(t + 1) * n_in], &mut dw[r * n_in..(r + 1) * n_in]);
            }
        }
    }
}

/// `DX += DY W`: `dy` is `T x out`, `w` is `out x n_in`, `dx` is `T x n_in`.
pub fn matmul_nn_acc(dy: &[f64], w: &[f64], n_in: usize, dx: &mut [f64]) {
    let n_out = w.len() / n_in;
    let t_len = dx.len() / n_in;
    let split = n_in / 4 * 4;
    let blocked = t_len / 4 * 4;
    // Four samples at a time, each sample chunk held in registers over all outputs.
    for s in (0..blocked).step_by(4) {
        for k in (0..split).step_by(4) {
            let mut acc = [[0.0f64; 4]; 4];
            for o in 0..n_out {
                let wc = &w[o * n_in + k..o * n_in + k + 4];
                for (r, a) in acc.iter_mut().enumerate() {
                    let g = dy[(s + r) * n_out + o];
                    for l in 0..4 {
                        a[l] += g * wc[l];
                    }
                }
            }
            for (r, a) in acc.iter().enumerate() {
                let row = &mut dx[(s + r) * n_in + k..(s + r) * n_in + k + 4];
                for l in 0..4 {
                    row[l] += a[l];
                }
            }
        }
        for r in s..s + 4 {
            for k in split..n_in {
                let mut acc = 0.0;
                for o in 0..n_out {
                    acc += dy[r * n_out + o] * w[o * n_in + k];
                }
                dx[r * n_in + k] += acc;
            }
        }
    }
    for r in blocked..t_len {
        let dxt = &mut dx[r * n_in..(r + 1) * n_in];
        for o in 0..n_out {
            let g = dy[r * n_out + o];
            if g != 0.0 {
                axpy(g, &w[o * n_in..(o + 1) * n_in], dxt);
            }
        }
    }
}

/// Column sums of a `T x n` row-major matrix added into `out`.
pub fn add_column_sums(m: &[f64], out: &mut [f64]) {
    for row in m.chunks_exact(out.len()) {
        for (o, v) in out.iter_mut().zip(row) {
            *o += v;
        }
    }
}

/// `y += alpha * x`
#[inline]
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    debug_assert_eq!(x.len(), y.len());
    for (yi, &xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// `y = W x + b`, `W` row-major `out x in`.
#[inline]
pub fn affine(w: &[f64], b: Option<&[f64]>, x: &[f64], y: &mut [f64]) {
    if x.is_empty() {
        for (o, yo) in y.iter_mut().enumerate() {
            *yo = b.map_or(0.0, |b| b[o]);
        }
        return;
    }
    matmul_nt(x, w, b, x.len(), y);
}

/// `dW += dy x^T` and, when requested, `dx += W^T dy`.
#[inline]
pub fn affine_backward(w: &[f64], dw: &mut [f64], x: &[f64], dy: &[f64], dx: Option<&mut [f64]>) {
    let n_in = x.len();
    for (o, &g) in dy.iter().enumerate() {
        if g != 0.0 {
            axpy(g, x, &mut dw[o * n_in..(o + 1) * n_in]);
        }
    }
    if let Some(dx) = dx {
        for (o, &g) in dy.iter().enumerate() {
            if g != 0.0 {
                axpy(g, &w[o * n_in..(o + 1) * n_in], dx);
            }
        }
    }
}

pub fn tanh_inplace(v: &mut [f64]) {
    for x in v {
        *x = x.tanh();
    }
}

/// Turns `dy` into `dy * (1 - y^2)` where `y` is the tanh output.
pub fn tanh_backward_inplace(y: &[f64], dy: &mut [f64]) {
    for (g, &t) in dy.iter_mut().zip(y) {
        *g *= 1.0 - t * t;
    }
}

#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}
