//! Batched forward and reverse passes of the gated MLP over input jets.

use std::ops::Range;

use ndarray::linalg::general_mat_mul;
use ndarray::{s, Array2, ArrayView2, ArrayViewMut2};

use super::jet::{gate_backward, gate_forward, tanh_backward, tanh_forward, Order};
use super::params::ParamVector;
use crate::{Error, Result};

/// Parameter ranges of one affine map `x W + b`.
#[derive(Debug, Clone, PartialEq)]
pub struct Affine {
    pub w: Range<usize>,
    pub b: Range<usize>,
    pub fan_in: usize,
    pub fan_out: usize,
}

impl Affine {
    fn w<'a>(&self, p: &'a [f64]) -> ArrayView2<'a, f64> {
        ArrayView2::from_shape((self.fan_in, self.fan_out), &p[self.w.clone()]).expect("shape")
    }
}

/// Where each layer of the gated MLP lives inside a [`ParamVector`].
#[derive(Debug, Clone, PartialEq)]
pub struct NetLayout {
    pub enc_u: Affine,
    pub enc_v: Affine,
    pub hidden: Vec<Affine>,
    pub head: Affine,
    pub input_dim: usize,
    pub width: usize,
}

impl NetLayout {
    /// Resolves the `enc_u`, `enc_v`, `hidden{k}` and `head` groups.
    pub fn resolve(p: &ParamVector, n_hidden: usize) -> Result<Self> {
        let affine = |name: &str| -> Result<Affine> {
            let w = p
                .group(&format!("{name}.w"))
                .ok_or_else(|| Error::Checkpoint(format!("missing group {name}.w")))?;
            let b = p
                .group(&format!("{name}.b"))
                .ok_or_else(|| Error::Checkpoint(format!("missing group {name}.b")))?;
            if b.len() != w.cols {
                return Err(Error::Checkpoint(format!("bias width mismatch in {name}")));
            }
            Ok(Affine { w: w.range(), b: b.range(), fan_in: w.rows, fan_out: w.cols })
        };
        let enc_u = affine("enc_u")?;
        let enc_v = affine("enc_v")?;
        let hidden = (0..n_hidden).map(|k| affine(&format!("hidden{k}"))).collect::<Result<Vec<_>>>()?;
        let head = affine("head")?;
        let input_dim = enc_u.fan_in;
        let width = enc_u.fan_out;
        let consistent = enc_v.fan_in == input_dim
            && enc_v.fan_out == width
            && hidden.first().map_or(false, |h| h.fan_in == input_dim)
            && hidden.iter().all(|h| h.fan_out == width)
            && hidden.iter().skip(1).all(|h| h.fan_in == width)
            && head.fan_in == width
            && head.fan_out == 1;
        if !consistent {
            return Err(Error::Checkpoint("inconsistent layer shapes".into()));
        }
        Ok(Self { enc_u, enc_v, hidden, head, input_dim, width })
    }
}

struct LayerTape {
    pre: Array2<f64>,
    h: Array2<f64>,
    g: Array2<f64>,
}

/// Intermediates kept for the reverse pass.
pub struct Tape {
    order: Order,
    rows: usize,
    x: Array2<f64>,
    u_pre: Array2<f64>,
    u: Array2<f64>,
    v_pre: Array2<f64>,
    v: Array2<f64>,
    layers: Vec<LayerTape>,
}

fn affine_forward(order: Order, rows: usize, x: &Array2<f64>, a: &Affine, p: &[f64]) -> Array2<f64> {
    let mut out = x.dot(&a.w(p));
    let b = &p[a.b.clone()];
    for mut r in out.slice_mut(s![..rows, ..]).rows_mut() {
        r.iter_mut().zip(b).for_each(|(o, &bb)| *o += bb);
    }
    debug_assert_eq!(out.nrows(), rows * order.channels());
    out
}

/// Accumulates `∂L/∂W`, `∂L/∂b` of one affine map into `grad`.
fn affine_param_grads(rows: usize, x: &Array2<f64>, a_bar: &Array2<f64>, a: &Affine, grad: &mut [f64]) {
    let mut gw = ArrayViewMut2::from_shape((a.fan_in, a.fan_out), &mut grad[a.w.clone()]).expect("shape");
    general_mat_mul(1.0, &x.t(), a_bar, 1.0, &mut gw);
    let gb = &mut grad[a.b.clone()];
    for r in a_bar.slice(s![..rows, ..]).rows() {
        gb.iter_mut().zip(r).for_each(|(g, &v)| *g += v);
    }
}

fn tanh_jet(order: Order, pre: &Array2<f64>) -> Array2<f64> {
    let mut y = Array2::zeros(pre.raw_dim());
    let n = pre.len() / order.channels();
    tanh_forward(order, n, pre.as_slice().expect("contiguous"), y.as_slice_mut().expect("contiguous"));
    y
}

/// Runs the network on a stacked input jet `x` of `rows` points.
///
/// Returns the raw output jet (`channels·rows × 1`) and, when `keep_tape`, the
/// intermediates for [`backward`].
pub fn forward(
    layout: &NetLayout,
    p: &[f64],
    order: Order,
    rows: usize,
    x: Array2<f64>,
    keep_tape: bool,
) -> (Array2<f64>, Option<Tape>) {
    let u_pre = affine_forward(order, rows, &x, &layout.enc_u, p);
    let u = tanh_jet(order, &u_pre);
    let v_pre = affine_forward(order, rows, &x, &layout.enc_v, p);
    let v = tanh_jet(order, &v_pre);
    let n = rows * layout.width;

    let mut layers: Vec<LayerTape> = Vec::with_capacity(layout.hidden.len());
    let mut prev: Option<Array2<f64>> = None;
    for (k, layer) in layout.hidden.iter().enumerate() {
        let input = match (k, keep_tape) {
            (0, _) => &x,
            (_, true) => &layers[k - 1].g,
            (_, false) => prev.as_ref().expect("previous layer"),
        };
        let pre = affine_forward(order, rows, input, layer, p);
        let h = tanh_jet(order, &pre);
        let mut g = Array2::zeros(h.raw_dim());
        gate_forward(
            order,
            n,
            h.as_slice().expect("contiguous"),
            u.as_slice().expect("contiguous"),
            v.as_slice().expect("contiguous"),
            g.as_slice_mut().expect("contiguous"),
        );
        if keep_tape {
            layers.push(LayerTape { pre, h, g });
        } else {
            prev = Some(g);
        }
    }
    let last = if keep_tape { &layers.last().expect("hidden layers").g } else { prev.as_ref().expect("hidden layers") };
    let out = affine_forward(order, rows, last, &layout.head, p);
    let tape = keep_tape.then(|| Tape { order, rows, x, u_pre, u, v_pre, v, layers });
    (out, tape)
}

/// Reverse pass: accumulates `∂L/∂p` into `grad` given `out_bar = ∂L/∂out`.
pub fn backward(layout: &NetLayout, p: &[f64], tape: &Tape, out_bar: &Array2<f64>, grad: &mut [f64]) {
    let order = tape.order;
    let rows = tape.rows;
    let n = rows * layout.width;
    let last_g = &tape.layers.last().expect("layers").g;
    affine_param_grads(rows, last_g, out_bar, &layout.head, grad);
    let mut g_bar = Array2::<f64>::zeros(tape.u.raw_dim());
    general_mat_mul(1.0, out_bar, &layout.head.w(p).t(), 0.0, &mut g_bar);

    let mut u_bar = Array2::<f64>::zeros(tape.u.raw_dim());
    let mut v_bar = Array2::<f64>::zeros(tape.v.raw_dim());
    let mut h_bar = Array2::<f64>::zeros(tape.u.raw_dim());
    let mut pre_bar = Array2::<f64>::zeros(tape.u.raw_dim());
    for k in (0..layout.hidden.len()).rev() {
        let lt = &tape.layers[k];
        gate_backward(
            order,
            n,
            lt.h.as_slice().expect("contiguous"),
            tape.u.as_slice().expect("contiguous"),
            tape.v.as_slice().expect("contiguous"),
            g_bar.as_slice().expect("contiguous"),
            h_bar.as_slice_mut().expect("contiguous"),
            u_bar.as_slice_mut().expect("contiguous"),
            v_bar.as_slice_mut().expect("contiguous"),
        );
        tanh_backward(
            order,
            n,
            lt.pre.as_slice().expect("contiguous"),
            lt.h.as_slice().expect("contiguous"),
            h_bar.as_slice().expect("contiguous"),
            pre_bar.as_slice_mut().expect("contiguous"),
        );
        let layer = &layout.hidden[k];
        if k > 0 {
            let input = &tape.layers[k - 1].g;
            affine_param_grads(rows, input, &pre_bar, layer, grad);
            general_mat_mul(1.0, &pre_bar, &layer.w(p).t(), 0.0, &mut g_bar);
        } else {
            affine_param_grads(rows, &tape.x, &pre_bar, layer, grad);
        }
    }
    let mut enc_bar = Array2::<f64>::zeros(tape.u.raw_dim());
    for (pre, y, y_bar, aff) in [
        (&tape.u_pre, &tape.u, &u_bar, &layout.enc_u),
        (&tape.v_pre, &tape.v, &v_bar, &layout.enc_v),
    ] {
        tanh_backward(
            order,
            n,
            pre.as_slice().expect("contiguous"),
            y.as_slice().expect("contiguous"),
            y_bar.as_slice().expect("contiguous"),
            enc_bar.as_slice_mut().expect("contiguous"),
        );
        affine_param_grads(rows, &tape.x, &enc_bar, aff, grad);
    }
}

/// Splits a stacked output column into its channels.
pub fn channel(out: &Array2<f64>, rows: usize, ch: usize) -> ndarray::ArrayView1<'_, f64> {
    out.slice(s![ch * rows..(ch + 1) * rows, 0])
}
