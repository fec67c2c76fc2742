//! Sequential networks with residual blocks over a flat parameter vector.
//!
//! A forward pass can record a [`Tape`]; [`Network::backward`] consumes it to
//! produce the input gradient and accumulate parameter gradients. Because the
//! tape is returned to the caller, the same network can be applied several
//! times within one objective and each application differentiated
//! separately.

use rand::Rng;
use rand_distr::{Distribution, Normal};

use super::ops::{self, Window};
use super::{Real, Tensor};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct ConvLayer {
    pub in_ch: usize,
    pub out_ch: usize,
    pub window: Window,
    /// Only meaningful for transposed convolutions.
    pub output_pad: usize,
    pub weight: usize,
    pub bias: Option<usize>,
}

impl ConvLayer {
    fn weight_len(&self) -> usize {
        self.in_ch * self.out_ch * self.window.kernel * self.window.kernel
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Layer {
    /// Weight layout `[out][in][k][k]`.
    Conv(ConvLayer),
    /// Weight layout `[in][out][k][k]`.
    ConvTranspose(ConvLayer),
    ReflectionPad(usize),
    InstanceNorm,
    Relu,
    LeakyRelu(f64),
    Tanh,
    /// `x + body(x)`.
    Residual(Vec<Layer>),
}

#[derive(Debug, Clone)]
enum Record<T> {
    Conv { cols: Vec<T>, in_shape: [usize; 4] },
    ConvTranspose { input: Tensor<T> },
    Pad { in_shape: [usize; 4] },
    Norm { xhat: Tensor<T>, inv: Vec<T> },
    Activation { out: Tensor<T> },
    Residual(Vec<Record<T>>),
}

/// Activations retained by a traced forward pass.
#[derive(Debug, Clone)]
pub struct Tape<T> {
    records: Vec<Record<T>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Network<T> {
    layers: Vec<Layer>,
    params: Vec<T>,
}

/// Incrementally assembles a layer list and allocates parameter slots.
#[derive(Debug, Default)]
pub struct NetBuilder {
    layers: Vec<Layer>,
    n_params: usize,
    bias_slots: Vec<(usize, usize)>,
}

impl NetBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    fn conv_layer(&mut self, in_ch: usize, out_ch: usize, window: Window, output_pad: usize, bias: bool) -> ConvLayer {
        let mut layer = ConvLayer {
            in_ch,
            out_ch,
            window,
            output_pad,
            weight: self.n_params,
            bias: None,
        };
        self.n_params += layer.weight_len();
        if bias {
            layer.bias = Some(self.n_params);
            self.bias_slots.push((self.n_params, out_ch));
            self.n_params += out_ch;
        }
        layer
    }

    pub fn conv(mut self, in_ch: usize, out_ch: usize, kernel: usize, stride: usize, pad: usize, bias: bool) -> Self {
        let win = Window { kernel, stride, pad };
        let l = self.conv_layer(in_ch, out_ch, win, 0, bias);
        self.layers.push(Layer::Conv(l));
        self
    }

    #[allow(clippy::too_many_arguments)]
    pub fn conv_transpose(
        mut self,
        in_ch: usize,
        out_ch: usize,
        kernel: usize,
        stride: usize,
        pad: usize,
        output_pad: usize,
        bias: bool,
    ) -> Self {
        let win = Window { kernel, stride, pad };
        let l = self.conv_layer(in_ch, out_ch, win, output_pad, bias);
        self.layers.push(Layer::ConvTranspose(l));
        self
    }

    pub fn layer(mut self, layer: Layer) -> Self {
        assert!(
            !matches!(layer, Layer::Conv(_) | Layer::ConvTranspose(_) | Layer::Residual(_)),
            "parametrized layers must go through the builder"
        );
        self.layers.push(layer);
        self
    }

    pub fn residual(mut self, body: impl FnOnce(NetBuilder) -> NetBuilder) -> Self {
        let inner = body(NetBuilder {
            layers: Vec::new(),
            n_params: self.n_params,
            bias_slots: Vec::new(),
        });
        self.n_params = inner.n_params;
        self.bias_slots.extend(inner.bias_slots);
        self.layers.push(Layer::Residual(inner.layers));
        self
    }

    pub fn n_params(&self) -> usize {
        self.n_params
    }

    /// Weights drawn from N(0, `init_std`), biases zero.
    pub fn build<T: Real, R: Rng>(self, rng: &mut R, init_std: f64) -> Network<T> {
        let normal = Normal::new(0.0, init_std).expect("finite init std");
        let mut params: Vec<T> = (0..self.n_params).map(|_| T::of(normal.sample(rng))).collect();
        for (start, len) in self.bias_slots {
            params[start..start + len].fill(T::zero());
        }
        Network {
            layers: self.layers,
            params,
        }
    }
}

impl<T: Real> Network<T> {
    pub fn params(&self) -> &[T] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [T] {
        &mut self.params
    }

    pub fn n_params(&self) -> usize {
        self.params.len()
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn set_params(&mut self, params: Vec<T>) -> Result<()> {
        if params.len() != self.params.len() {
            return Err(Error::Shape(format!(
                "expected {} parameters, got {}",
                self.params.len(),
                params.len()
            )));
        }
        self.params = params;
        Ok(())
    }

    pub fn zero_grads(&self) -> Vec<T> {
        vec![T::zero(); self.params.len()]
    }

    /// Output shape for a given input shape, or a shape error if some layer
    /// cannot be applied.
    pub fn output_shape(&self, shape: [usize; 4]) -> Result<[usize; 4]> {
        shape_through(&self.layers, shape)
    }

    pub fn forward(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        self.output_shape(x.shape())?;
        Ok(run(&self.layers, &self.params, x.clone(), None))
    }

    pub fn forward_traced(&self, x: &Tensor<T>) -> Result<(Tensor<T>, Tape<T>)> {
        self.output_shape(x.shape())?;
        let mut records = Vec::new();
        let y = run(&self.layers, &self.params, x.clone(), Some(&mut records));
        Ok((y, Tape { records }))
    }

    /// Back-propagates `grad_out` through a traced pass, adding parameter
    /// gradients into `grads` and returning the gradient w.r.t. the input.
    pub fn backward(&self, tape: Tape<T>, grad_out: Tensor<T>, grads: &mut [T]) -> Tensor<T> {
        assert_eq!(grads.len(), self.params.len(), "gradient buffer size");
        back(&self.layers, &self.params, tape.records, grad_out, grads)
    }
}

fn shape_through(layers: &[Layer], mut s: [usize; 4]) -> Result<[usize; 4]> {
    for layer in layers {
        s = match layer {
            Layer::Conv(l) => {
                if s[1] != l.in_ch {
                    return Err(Error::Shape(format!("conv expects {} channels, got {}", l.in_ch, s[1])));
                }
                match (l.window.out_len(s[2]), l.window.out_len(s[3])) {
                    (Some(h), Some(w)) if h > 0 && w > 0 => [s[0], l.out_ch, h, w],
                    _ => {
                        return Err(Error::Shape(format!(
                            "{}x{} input too small for {}x{} kernel",
                            s[2], s[3], l.window.kernel, l.window.kernel
                        )))
                    }
                }
            }
            Layer::ConvTranspose(l) => {
                if s[1] != l.in_ch {
                    return Err(Error::Shape(format!("transposed conv expects {} channels, got {}", l.in_ch, s[1])));
                }
                match (
                    l.window.transposed_out_len(s[2], l.output_pad),
                    l.window.transposed_out_len(s[3], l.output_pad),
                ) {
                    (Some(h), Some(w)) if h > 0 && w > 0 => [s[0], l.out_ch, h, w],
                    _ => return Err(Error::Shape("transposed conv output would be empty".into())),
                }
            }
            Layer::ReflectionPad(p) => {
                if s[2] <= *p || s[3] <= *p {
                    return Err(Error::Shape(format!(
                        "reflection pad {} needs spatial size > {}, got {}x{}",
                        p, p, s[2], s[3]
                    )));
                }
                [s[0], s[1], s[2] + 2 * p, s[3] + 2 * p]
            }
            Layer::InstanceNorm | Layer::Relu | Layer::LeakyRelu(_) | Layer::Tanh => s,
            Layer::Residual(body) => {
                let out = shape_through(body, s)?;
                if out != s {
                    return Err(Error::Shape("residual body must preserve shape".into()));
                }
                s
            }
        };
    }
    Ok(s)
}

fn run<T: Real>(layers: &[Layer], params: &[T], mut x: Tensor<T>, mut tape: Option<&mut Vec<Record<T>>>) -> Tensor<T> {
    for layer in layers {
        x = match layer {
            Layer::Conv(l) => {
                let (y, cols) = conv_forward(l, params, &x);
                if let Some(t) = tape.as_deref_mut() {
                    t.push(Record::Conv { cols, in_shape: x.shape() });
                }
                y
            }
            Layer::ConvTranspose(l) => {
                let y = conv_transpose_forward(l, params, &x);
                if let Some(t) = tape.as_deref_mut() {
                    t.push(Record::ConvTranspose { input: x });
                }
                y
            }
            Layer::ReflectionPad(p) => {
                let mut data = Vec::with_capacity(x.n * x.c * (x.h + 2 * p) * (x.w + 2 * p));
                for i in 0..x.n {
                    data.extend(ops::reflection_pad(x.sample(i), x.c, x.h, x.w, *p));
                }
                if let Some(t) = tape.as_deref_mut() {
                    t.push(Record::Pad { in_shape: x.shape() });
                }
                Tensor::from_vec(x.n, x.c, x.h + 2 * p, x.w + 2 * p, data)
            }
            Layer::InstanceNorm => {
                let plane = x.h * x.w;
                let mut inv = Vec::with_capacity(x.n * x.c);
                for i in 0..x.n {
                    let c = x.c;
                    inv.extend(ops::instance_norm(x.sample_mut(i), c, plane));
                }
                if let Some(t) = tape.as_deref_mut() {
                    t.push(Record::Norm { xhat: x.clone(), inv });
                }
                x
            }
            Layer::Relu | Layer::LeakyRelu(_) | Layer::Tanh => {
                let y = match layer {
                    Layer::Relu => x.map(|v| v.max(T::zero())),
                    Layer::LeakyRelu(slope) => {
                        let s = T::of(*slope);
                        x.map(|v| if v > T::zero() { v } else { v * s })
                    }
                    _ => x.map(|v| v.tanh()),
                };
                if let Some(t) = tape.as_deref_mut() {
                    t.push(Record::Activation { out: y.clone() });
                }
                y
            }
            Layer::Residual(body) => {
                let (inner, inner_tape) = match tape.as_deref_mut() {
                    Some(_) => {
                        let mut rec = Vec::new();
                        let y = run(body, params, x.clone(), Some(&mut rec));
                        (y, Some(rec))
                    }
                    None => (run(body, params, x.clone(), None), None),
                };
                if let (Some(t), Some(rec)) = (tape.as_deref_mut(), inner_tape) {
                    t.push(Record::Residual(rec));
                }
                let mut y = x;
                for (a, b) in y.data.iter_mut().zip(inner.data) {
                    *a += b;
                }
                y
            }
        };
    }
    x
}

fn back<T: Real>(layers: &[Layer], params: &[T], records: Vec<Record<T>>, mut g: Tensor<T>, grads: &mut [T]) -> Tensor<T> {
    assert_eq!(layers.len(), records.len(), "tape does not match network");
    for (layer, rec) in layers.iter().zip(records).rev() {
        g = match (layer, rec) {
            (Layer::Conv(l), Record::Conv { cols, in_shape }) => conv_backward(l, params, &cols, in_shape, &g, grads),
            (Layer::ConvTranspose(l), Record::ConvTranspose { input }) => {
                conv_transpose_backward(l, params, &input, &g, grads)
            }
            (Layer::ReflectionPad(p), Record::Pad { in_shape: [n, c, h, w] }) => {
                let mut data = Vec::with_capacity(n * c * h * w);
                for i in 0..n {
                    data.extend(ops::reflection_pad_backward(g.sample(i), c, h, w, *p));
                }
                Tensor::from_vec(n, c, h, w, data)
            }
            (Layer::InstanceNorm, Record::Norm { xhat, inv }) => {
                let plane = g.h * g.w;
                let c = g.c;
                for i in 0..g.n {
                    ops::instance_norm_backward(g.sample_mut(i), xhat.sample(i), &inv[i * c..(i + 1) * c], plane);
                }
                g
            }
            (Layer::Relu, Record::Activation { out }) => {
                for (gv, &y) in g.data.iter_mut().zip(&out.data) {
                    if y <= T::zero() {
                        *gv = T::zero();
                    }
                }
                g
            }
            (Layer::LeakyRelu(slope), Record::Activation { out }) => {
                let s = T::of(*slope);
                for (gv, &y) in g.data.iter_mut().zip(&out.data) {
                    if y <= T::zero() {
                        *gv *= s;
                    }
                }
                g
            }
            (Layer::Tanh, Record::Activation { out }) => {
                for (gv, &y) in g.data.iter_mut().zip(&out.data) {
                    *gv *= T::one() - y * y;
                }
                g
            }
            (Layer::Residual(body), Record::Residual(rec)) => {
                let through = back(body, params, rec, g.clone(), grads);
                for (a, b) in g.data.iter_mut().zip(through.data) {
                    *a += b;
                }
                g
            }
            _ => unreachable!("tape record does not match layer"),
        };
    }
    g
}

fn conv_forward<T: Real>(l: &ConvLayer, params: &[T], x: &Tensor<T>) -> (Tensor<T>, Vec<T>) {
    let k = l.window.kernel;
    let oh = l.window.out_len(x.h).expect("checked shape");
    let ow = l.window.out_len(x.w).expect("checked shape");
    let rows = l.in_ch * k * k;
    let n_out = oh * ow;
    let w = &params[l.weight..l.weight + l.weight_len()];
    let mut y = Tensor::zeros(x.n, l.out_ch, oh, ow);
    let mut all_cols = vec![T::zero(); x.n * rows * n_out];
    for i in 0..x.n {
        let cols = &mut all_cols[i * rows * n_out..(i + 1) * rows * n_out];
        ops::im2col(x.sample(i), x.c, x.h, x.w, l.window, oh, ow, cols);
        let out = y.sample_mut(i);
        if let Some(b) = l.bias {
            for (oc, chunk) in out.chunks_mut(n_out).enumerate() {
                chunk.fill(params[b + oc]);
            }
        }
        let beta = if l.bias.is_some() { T::one() } else { T::zero() };
        T::gemm(l.out_ch, rows, n_out, w, rows as isize, 1, cols, n_out as isize, 1, beta, out, n_out as isize, 1);
    }
    (y, all_cols)
}

fn conv_backward<T: Real>(
    l: &ConvLayer,
    params: &[T],
    cols: &[T],
    in_shape: [usize; 4],
    g: &Tensor<T>,
    grads: &mut [T],
) -> Tensor<T> {
    let [n, c, h, w] = in_shape;
    let k = l.window.kernel;
    let rows = l.in_ch * k * k;
    let n_out = g.h * g.w;
    let wlen = l.weight_len();
    let weight = &params[l.weight..l.weight + wlen];
    let mut dx = Tensor::zeros(n, c, h, w);
    let mut dcols = vec![T::zero(); rows * n_out];
    for i in 0..n {
        let gi = g.sample(i);
        let ci = &cols[i * rows * n_out..(i + 1) * rows * n_out];
        // dW += dY · colsᵀ
        T::gemm(
            l.out_ch,
            n_out,
            rows,
            gi,
            n_out as isize,
            1,
            ci,
            1,
            n_out as isize,
            T::one(),
            &mut grads[l.weight..l.weight + wlen],
            rows as isize,
            1,
        );
        if let Some(b) = l.bias {
            for (oc, chunk) in gi.chunks(n_out).enumerate() {
                grads[b + oc] += chunk.iter().copied().sum::<T>();
            }
        }
        // dcols = Wᵀ · dY
        T::gemm(rows, l.out_ch, n_out, weight, 1, rows as isize, gi, n_out as isize, 1, T::zero(), &mut dcols, n_out as isize, 1);
        ops::col2im(&dcols, c, h, w, l.window, g.h, g.w, dx.sample_mut(i));
    }
    dx
}

fn conv_transpose_forward<T: Real>(l: &ConvLayer, params: &[T], x: &Tensor<T>) -> Tensor<T> {
    let k = l.window.kernel;
    let oh = l.window.transposed_out_len(x.h, l.output_pad).expect("checked shape");
    let ow = l.window.transposed_out_len(x.w, l.output_pad).expect("checked shape");
    let rows = l.out_ch * k * k;
    let n_in = x.h * x.w;
    let w = &params[l.weight..l.weight + l.weight_len()];
    let mut y = Tensor::zeros(x.n, l.out_ch, oh, ow);
    let mut cols = vec![T::zero(); rows * n_in];
    for i in 0..x.n {
        // cols = Wᵀ · X, with W viewed as [in][out·k·k]
        T::gemm(rows, l.in_ch, n_in, w, 1, rows as isize, x.sample(i), n_in as isize, 1, T::zero(), &mut cols, n_in as isize, 1);
        let out = y.sample_mut(i);
        ops::col2im(&cols, l.out_ch, oh, ow, l.window, x.h, x.w, out);
        if let Some(b) = l.bias {
            for (oc, chunk) in out.chunks_mut(oh * ow).enumerate() {
                for v in chunk {
                    *v += params[b + oc];
                }
            }
        }
    }
    y
}

fn conv_transpose_backward<T: Real>(
    l: &ConvLayer,
    params: &[T],
    x: &Tensor<T>,
    g: &Tensor<T>,
    grads: &mut [T],
) -> Tensor<T> {
    let k = l.window.kernel;
    let rows = l.out_ch * k * k;
    let n_in = x.h * x.w;
    let wlen = l.weight_len();
    let weight = &params[l.weight..l.weight + wlen];
    let mut dx = Tensor::zeros(x.n, x.c, x.h, x.w);
    let mut dcols = vec![T::zero(); rows * n_in];
    for i in 0..x.n {
        let gi = g.sample(i);
        ops::im2col(gi, l.out_ch, g.h, g.w, l.window, x.h, x.w, &mut dcols);
        // dX = W · dcols
        T::gemm(l.in_ch, rows, n_in, weight, rows as isize, 1, &dcols, n_in as isize, 1, T::zero(), dx.sample_mut(i), n_in as isize, 1);
        // dW += X · dcolsᵀ
        T::gemm(
            l.in_ch,
            n_in,
            rows,
            x.sample(i),
            n_in as isize,
            1,
            &dcols,
            1,
            n_in as isize,
            T::one(),
            &mut grads[l.weight..l.weight + wlen],
            rows as isize,
            1,
        );
        if let Some(b) = l.bias {
            for (oc, chunk) in gi.chunks(g.h * g.w).enumerate() {
                grads[b + oc] += chunk.iter().copied().sum::<T>();
            }
        }
    }
    dx
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn tiny_net() -> Network<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        NetBuilder::new()
            .layer(Layer::ReflectionPad(1))
            .conv(2, 3, 3, 1, 0, true)
            .layer(Layer::InstanceNorm)
            .layer(Layer::LeakyRelu(0.2))
            .residual(|b| b.conv(3, 3, 3, 1, 1, false).layer(Layer::Relu))
            .conv(3, 4, 3, 2, 1, false)
            .conv_transpose(4, 2, 3, 2, 1, 1, true)
            .layer(Layer::Tanh)
            .build(&mut rng, 0.5)
    }

    fn input() -> Tensor<f64> {
        let data = (0..2 * 2 * 6 * 6).map(|i| ((i * 7 % 13) as f64 - 6.0) / 6.0).collect();
        Tensor::from_vec(2, 2, 6, 6, data)
    }

    // sum(y * r) with fixed weights r gives a scalar objective
    fn objective(net: &Network<f64>, x: &Tensor<f64>) -> f64 {
        let y = net.forward(x).unwrap();
        y.data.iter().enumerate().map(|(i, v)| v * ((i % 5) as f64 - 2.0)).sum()
    }

    #[test]
    fn shape_propagates() {
        let net = tiny_net();
        assert_eq!(net.output_shape([2, 2, 6, 6]).unwrap(), [2, 2, 6, 6]);
        assert!(net.output_shape([1, 1, 6, 6]).is_err());
        assert!(net.output_shape([1, 2, 1, 1]).is_err());
    }

    #[test]
    fn backward_matches_finite_differences() {
        let net = tiny_net();
        let x = input();
        let (y, tape) = net.forward_traced(&x).unwrap();
        let gy = Tensor::from_vec(y.n, y.c, y.h, y.w, (0..y.len()).map(|i| (i % 5) as f64 - 2.0).collect());
        let mut grads = net.zero_grads();
        let gx = net.backward(tape, gy, &mut grads);

        let h = 1e-6;
        for idx in (0..net.n_params()).step_by(7) {
            let mut p = net.clone();
            p.params_mut()[idx] += h;
            let up = objective(&p, &x);
            p.params_mut()[idx] -= 2.0 * h;
            let down = objective(&p, &x);
            let fd = (up - down) / (2.0 * h);
            assert!((fd - grads[idx]).abs() < 1e-6 * (1.0 + fd.abs()), "param {idx}: {fd} vs {}", grads[idx]);
        }
        for idx in (0..x.len()).step_by(5) {
            let mut xp = x.clone();
            xp.data[idx] += h;
            let up = objective(&net, &xp);
            xp.data[idx] -= 2.0 * h;
            let down = objective(&net, &xp);
            let fd = (up - down) / (2.0 * h);
            assert!((fd - gx.data[idx]).abs() < 1e-6 * (1.0 + fd.abs()), "input {idx}");
        }
    }
}
