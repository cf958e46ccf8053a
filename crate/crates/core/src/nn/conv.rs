//! Temporal convolution (cross-correlation) with "same" zero padding and
//! stride 1, lowered to a matrix product over unfolded patches.

use ndarray::linalg::general_mat_mul;
use ndarray::{Array1, Array2, Array3, Axis};

use crate::error::{Error, Result};

/// Unfolds `x` (`batch × frames × ch`) into `(batch·frames) × (k·ch)`
/// patches; column `j·ch + c` holds `x[b, t + j - k/2, c]` or 0 outside.
pub(crate) fn im2col(x: &Array3<f64>, k: usize) -> Array2<f64> {
    let (batch, frames, ch) = x.dim();
    let pad = k / 2;
    let mut out = Array2::zeros((batch * frames, k * ch));
    let src = x.as_standard_layout();
    let src = src.as_slice().expect("standard layout");
    let dst = out.as_slice_mut().expect("fresh array");
    let row_len = k * ch;
    for b in 0..batch {
        for t in 0..frames {
            let row = &mut dst[(b * frames + t) * row_len..(b * frames + t + 1) * row_len];
            for j in 0..k {
                let s = t + j;
                if s < pad || s - pad >= frames {
                    continue;
                }
                let from = (b * frames + s - pad) * ch;
                row[j * ch..(j + 1) * ch].copy_from_slice(&src[from..from + ch]);
            }
        }
    }
    out
}

/// Adjoint of [`im2col`]: folds patch gradients back onto the input.
pub(crate) fn col2im(patches: &Array2<f64>, batch: usize, frames: usize, ch: usize, k: usize) -> Array3<f64> {
    let pad = k / 2;
    let mut out = Array3::zeros((batch, frames, ch));
    let src = patches.as_slice().expect("standard layout");
    let dst = out.as_slice_mut().expect("fresh array");
    let row_len = k * ch;
    for b in 0..batch {
        for t in 0..frames {
            let row = &src[(b * frames + t) * row_len..(b * frames + t + 1) * row_len];
            for j in 0..k {
                let s = t + j;
                if s < pad || s - pad >= frames {
                    continue;
                }
                let to = (b * frames + s - pad) * ch;
                for (d, v) in dst[to..to + ch].iter_mut().zip(&row[j * ch..(j + 1) * ch]) {
                    *d += v;
                }
            }
        }
    }
    out
}

pub(crate) fn check_kernel(kernels: &Array3<f64>, ch_in: usize, bias_len: usize) -> Result<()> {
    let (out, k, kin) = kernels.dim();
    if k % 2 == 0 {
        return Err(Error::Shape(format!("kernel length {k} must be odd")));
    }
    if kin != ch_in {
        return Err(Error::Shape(format!(
            "kernel expects {kin} input channels, input has {ch_in}"
        )));
    }
    if bias_len != out {
        return Err(Error::Shape(format!(
            "bias has {bias_len} entries for {out} kernels"
        )));
    }
    Ok(())
}

/// Batched forward pass. Returns the output and the unfolded patches.
pub(crate) fn conv_batch(x: &Array3<f64>, kernels: &Array3<f64>, bias: &Array1<f64>) -> (Array3<f64>, Array2<f64>) {
    let (batch, frames, _) = x.dim();
    let (out_ch, k, ch) = kernels.dim();
    let patches = im2col(x, k);
    let w = kernels
        .view()
        .into_shape_with_order((out_ch, k * ch))
        .expect("kernel tensor is contiguous");
    let mut y = Array2::zeros((batch * frames, out_ch));
    for mut row in y.rows_mut() {
        row.assign(bias);
    }
    general_mat_mul(1.0, &patches, &w.t(), 1.0, &mut y);
    let y = y
        .into_shape_with_order((batch, frames, out_ch))
        .expect("contiguous output");
    (y, patches)
}

/// Gradients of the batched convolution: `(d input, d kernels, d bias)`.
pub(crate) fn conv_batch_backward(
    patches: &Array2<f64>,
    kernels: &Array3<f64>,
    dy: &Array3<f64>,
) -> (Array3<f64>, Array3<f64>, Array1<f64>) {
    let (batch, frames, out_ch) = dy.dim();
    let (_, k, ch) = kernels.dim();
    let dy2 = dy
        .as_standard_layout()
        .into_owned()
        .into_shape_with_order((batch * frames, out_ch))
        .expect("contiguous gradient");
    let w = kernels
        .view()
        .into_shape_with_order((out_ch, k * ch))
        .expect("kernel tensor is contiguous");
    let mut dw = Array2::zeros((out_ch, k * ch));
    general_mat_mul(1.0, &dy2.t(), patches, 0.0, &mut dw);
    let db = dy2.sum_axis(Axis(0));
    let mut dpatches = Array2::zeros((batch * frames, k * ch));
    general_mat_mul(1.0, &dy2, &w, 0.0, &mut dpatches);
    let dx = col2im(&dpatches, batch, frames, ch, k);
    let dw = dw.into_shape_with_order((out_ch, k, ch)).expect("contiguous");
    (dx, dw, db)
}

/// Single-sample convolution: `input` is `frames × ch_in`, `kernels` is
/// `ch_out × kernel_len × ch_in`; the output keeps the input length.
pub fn conv1d_forward(input: &Array2<f64>, kernels: &Array3<f64>, bias: &Array1<f64>) -> Result<Array2<f64>> {
    check_kernel(kernels, input.ncols(), bias.len())?;
    let x = input.view().insert_axis(Axis(0)).to_owned();
    let (y, _) = conv_batch(&x, kernels, bias);
    Ok(y.index_axis_move(Axis(0), 0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{arr1, arr2, Array};

    #[test]
    fn box_kernel_with_zero_padding() {
        let x = arr2(&[[1.0], [2.0], [3.0], [4.0], [5.0]]);
        let k = Array::from_shape_vec((1, 3, 1), vec![1.0, 1.0, 1.0]).unwrap();
        let y = conv1d_forward(&x, &k, &arr1(&[0.0])).unwrap();
        assert_eq!(y.column(0).to_vec(), vec![3.0, 6.0, 9.0, 12.0, 9.0]);
    }

    #[test]
    fn identity_kernel_and_zero_input() {
        let x = arr2(&[[1.5, -2.0], [0.25, 3.0], [7.0, 1.0]]);
        let mut k = Array3::zeros((2, 3, 2));
        k[[0, 1, 0]] = 1.0;
        k[[1, 1, 1]] = 1.0;
        let y = conv1d_forward(&x, &k, &arr1(&[0.0, 0.0])).unwrap();
        assert_eq!(y, x);

        let zeros = Array2::zeros((4, 2));
        let y = conv1d_forward(&zeros, &k, &arr1(&[0.5, -1.0])).unwrap();
        assert!(y.column(0).iter().all(|v| *v == 0.5));
        assert!(y.column(1).iter().all(|v| *v == -1.0));
    }

    #[test]
    fn shape_errors() {
        let x = Array2::zeros((5, 2));
        assert!(conv1d_forward(&x, &Array3::zeros((1, 4, 2)), &arr1(&[0.0])).is_err());
        assert!(conv1d_forward(&x, &Array3::zeros((1, 3, 3)), &arr1(&[0.0])).is_err());
        assert!(conv1d_forward(&x, &Array3::zeros((1, 3, 2)), &arr1(&[0.0, 1.0])).is_err());
    }

    #[test]
    fn kernel_longer_than_input() {
        let x = arr2(&[[1.0], [2.0]]);
        let k = Array::from_shape_vec((1, 5, 1), vec![1.0, 2.0, 3.0, 4.0, 5.0]).unwrap();
        let y = conv1d_forward(&x, &k, &arr1(&[0.0])).unwrap();
        // y[0] = x0*w2 + x1*w3, y[1] = x0*w1 + x1*w2
        assert_eq!(y.column(0).to_vec(), vec![3.0 + 8.0, 2.0 + 6.0]);
    }
}
