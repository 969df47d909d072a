//! Single-hidden-layer complex MLP with split activation.
//!
//! The net maps C^n_in -> C^n_out through one hidden layer:
//! u = W1 x + b1, h = tanh(Re u) + i tanh(Im u), y = W2 h + b2.
//! Every real and imaginary part is an independent real parameter; the
//! cost is the mean squared symbol error E = mean |y - t|^2. Gradients are
//! packaged over the same flat layout as the parameters, so the optimizer
//! can treat the whole net as one real vector.
//!
//! Forward and backward passes run whole batches as real matrix products
//! (the four real blocks of each complex product), which is what makes
//! training the wide grouped nets tractable on one core.

use ndarray::{Array2, ArrayView1, ArrayView2, Axis, Zip};
use num_complex::Complex64;
use rand::Rng;
use rand_chacha::ChaCha12Rng;

/// Flat parameter layout:
/// `[w1re (H*I), w1im (H*I), b1re (H), b1im (H), w2re (O*H), w2im (O*H), b2re (O), b2im (O)]`
/// with row-major weight matrices (output index major).
#[derive(Debug, Clone, PartialEq)]
pub struct SubNetwork {
    pub n_in: usize,
    pub n_hidden: usize,
    pub n_out: usize,
    pub params: Vec<f64>,
}

pub(crate) struct Slices<'a> {
    pub w1re: &'a [f64],
    pub w1im: &'a [f64],
    pub b1re: &'a [f64],
    pub b1im: &'a [f64],
    pub w2re: &'a [f64],
    pub w2im: &'a [f64],
    pub b2re: &'a [f64],
    pub b2im: &'a [f64],
}

pub(crate) struct SlicesMut<'a> {
    pub w1re: &'a mut [f64],
    pub w1im: &'a mut [f64],
    pub b1re: &'a mut [f64],
    pub b1im: &'a mut [f64],
    pub w2re: &'a mut [f64],
    pub w2im: &'a mut [f64],
    pub b2re: &'a mut [f64],
    pub b2im: &'a mut [f64],
}

fn view(buf: &[f64], rows: usize, cols: usize) -> ArrayView2<'_, f64> {
    ArrayView2::from_shape((rows, cols), buf).expect("parameter block shape")
}

fn split_parts(x: ArrayView2<Complex64>) -> (Array2<f64>, Array2<f64>) {
    (x.mapv(|v| v.re), x.mapv(|v| v.im))
}

impl SubNetwork {
    pub fn param_count(n_in: usize, n_hidden: usize, n_out: usize) -> usize {
        2 * (n_hidden * n_in + n_hidden + n_out * n_hidden + n_out)
    }

    /// All parameters drawn i.i.d. uniform on [-0.1, 0.1].
    pub fn new_random(n_in: usize, n_hidden: usize, n_out: usize, rng: &mut ChaCha12Rng) -> Self {
        let n = Self::param_count(n_in, n_hidden, n_out);
        let params = (0..n).map(|_| rng.gen_range(-0.1..0.1)).collect();
        Self {
            n_in,
            n_hidden,
            n_out,
            params,
        }
    }

    /// Single-output net whose `anchor` input-column pathway consumes the
    /// rng in exactly the order `new_random(1, n_hidden, 1, rng)` would, so
    /// a subnet seeded per subcarrier starts from the same own-carrier
    /// weights no matter how wide its group is. Remaining weights follow
    /// from the same stream.
    pub fn new_random_anchored(
        n_in: usize,
        n_hidden: usize,
        anchor: usize,
        rng: &mut ChaCha12Rng,
    ) -> Self {
        assert!(anchor < n_in, "anchor column out of range");
        let mut net = Self {
            n_in,
            n_hidden,
            n_out: 1,
            params: vec![0.0; Self::param_count(n_in, n_hidden, 1)],
        };
        let h = n_hidden;
        let w1im = h * n_in;
        let tail = 2 * h * n_in;
        for j in 0..h {
            net.params[j * n_in + anchor] = rng.gen_range(-0.1..0.1);
        }
        for j in 0..h {
            net.params[w1im + j * n_in + anchor] = rng.gen_range(-0.1..0.1);
        }
        // b1, w2, b2 blocks, in flat layout order.
        for i in tail..net.params.len() {
            net.params[i] = rng.gen_range(-0.1..0.1);
        }
        for j in 0..h {
            for c in (0..n_in).filter(|&c| c != anchor) {
                net.params[j * n_in + c] = rng.gen_range(-0.1..0.1);
            }
        }
        for j in 0..h {
            for c in (0..n_in).filter(|&c| c != anchor) {
                net.params[w1im + j * n_in + c] = rng.gen_range(-0.1..0.1);
            }
        }
        net
    }

    pub fn n_params(&self) -> usize {
        Self::param_count(self.n_in, self.n_hidden, self.n_out)
    }

    pub(crate) fn split<'a>(&self, buf: &'a [f64]) -> Slices<'a> {
        let (i, h, o) = (self.n_in, self.n_hidden, self.n_out);
        let (w1re, rest) = buf.split_at(h * i);
        let (w1im, rest) = rest.split_at(h * i);
        let (b1re, rest) = rest.split_at(h);
        let (b1im, rest) = rest.split_at(h);
        let (w2re, rest) = rest.split_at(o * h);
        let (w2im, rest) = rest.split_at(o * h);
        let (b2re, b2im) = rest.split_at(o);
        Slices {
            w1re,
            w1im,
            b1re,
            b1im,
            w2re,
            w2im,
            b2re,
            b2im,
        }
    }

    pub(crate) fn split_mut<'a>(&self, buf: &'a mut [f64]) -> SlicesMut<'a> {
        let (i, h, o) = (self.n_in, self.n_hidden, self.n_out);
        let (w1re, rest) = buf.split_at_mut(h * i);
        let (w1im, rest) = rest.split_at_mut(h * i);
        let (b1re, rest) = rest.split_at_mut(h);
        let (b1im, rest) = rest.split_at_mut(h);
        let (w2re, rest) = rest.split_at_mut(o * h);
        let (w2im, rest) = rest.split_at_mut(o * h);
        let (b2re, b2im) = rest.split_at_mut(o);
        SlicesMut {
            w1re,
            w1im,
            b1re,
            b1im,
            w2re,
            w2im,
            b2re,
            b2im,
        }
    }

    /// Hidden activations for a batch: returns (tanh Re u, tanh Im u),
    /// both `batch x n_hidden`.
    fn hidden(&self, p: &Slices<'_>, xre: &Array2<f64>, xim: &Array2<f64>) -> (Array2<f64>, Array2<f64>) {
        let w1re = view(p.w1re, self.n_hidden, self.n_in);
        let w1im = view(p.w1im, self.n_hidden, self.n_in);
        let mut ure = xre.dot(&w1re.t()) - xim.dot(&w1im.t());
        let mut uim = xre.dot(&w1im.t()) + xim.dot(&w1re.t());
        ure += &ArrayView1::from(p.b1re);
        uim += &ArrayView1::from(p.b1im);
        ure.mapv_inplace(f64::tanh);
        uim.mapv_inplace(f64::tanh);
        (ure, uim)
    }

    /// Forward a whole batch (`batch x n_in` -> `batch x n_out`).
    pub fn forward_batch(&self, x: ArrayView2<Complex64>) -> Array2<Complex64> {
        debug_assert_eq!(x.ncols(), self.n_in);
        let p = self.split(&self.params);
        let (xre, xim) = split_parts(x);
        let (hre, him) = self.hidden(&p, &xre, &xim);
        let w2re = view(p.w2re, self.n_out, self.n_hidden);
        let w2im = view(p.w2im, self.n_out, self.n_hidden);
        let yre = hre.dot(&w2re.t()) - him.dot(&w2im.t());
        let yim = hre.dot(&w2im.t()) + him.dot(&w2re.t());
        Array2::from_shape_fn((x.nrows(), self.n_out), |(s, k)| {
            Complex64::new(yre[(s, k)] + p.b2re[k], yim[(s, k)] + p.b2im[k])
        })
    }

    /// Full-batch cost and gradient. `inputs` is `batch x n_in`, `targets`
    /// `batch x n_out`. `grad` must have `n_params` entries; it is
    /// overwritten with the batch-summed gradient. Returns the cost
    /// `mean_{samples,outputs} |y - t|^2`.
    pub fn cost_and_grad(
        &self,
        inputs: ArrayView2<Complex64>,
        targets: ArrayView2<Complex64>,
        grad: &mut [f64],
    ) -> f64 {
        let b = inputs.nrows();
        debug_assert_eq!(inputs.ncols(), self.n_in);
        debug_assert_eq!(targets.dim(), (b, self.n_out));
        debug_assert_eq!(grad.len(), self.n_params());
        let p = self.split(&self.params);
        let (xre, xim) = split_parts(inputs);
        let (hre, him) = self.hidden(&p, &xre, &xim);
        let w2re = view(p.w2re, self.n_out, self.n_hidden);
        let w2im = view(p.w2im, self.n_out, self.n_hidden);

        // Output error e = y - t, split into parts.
        let mut ere = hre.dot(&w2re.t()) - him.dot(&w2im.t());
        let mut eim = hre.dot(&w2im.t()) + him.dot(&w2re.t());
        ere += &ArrayView1::from(p.b2re);
        eim += &ArrayView1::from(p.b2im);
        for ((s, k), t) in targets.indexed_iter() {
            ere[(s, k)] -= t.re;
            eim[(s, k)] -= t.im;
        }
        let cost = ere.iter().map(|v| v * v).sum::<f64>() + eim.iter().map(|v| v * v).sum::<f64>();

        // dE/dW2 = 2 e conj(h) summed over the batch, dE/db2 = 2 e.
        let gw2re = (ere.t().dot(&hre) + eim.t().dot(&him)) * 2.0;
        let gw2im = (eim.t().dot(&hre) - ere.t().dot(&him)) * 2.0;
        // gamma = 2 W2^H e, then zeta = gamma folded with the split-tanh
        // derivative: zeta = Re(gamma)(1 - hre^2) + i Im(gamma)(1 - him^2).
        let mut zre = (ere.dot(&w2re) + eim.dot(&w2im)) * 2.0;
        let mut zim = (eim.dot(&w2re) - ere.dot(&w2im)) * 2.0;
        Zip::from(&mut zre).and(&hre).for_each(|z, &h| *z *= 1.0 - h * h);
        Zip::from(&mut zim).and(&him).for_each(|z, &h| *z *= 1.0 - h * h);
        // dE/dW1 = zeta conj(x), dE/db1 = zeta.
        let gw1re = zre.t().dot(&xre) + zim.t().dot(&xim);
        let gw1im = zim.t().dot(&xre) - zre.t().dot(&xim);

        let g = self.split_mut(grad);
        g.w1re.copy_from_slice(gw1re.as_slice().expect("standard layout"));
        g.w1im.copy_from_slice(gw1im.as_slice().expect("standard layout"));
        copy_colsum(&zre, g.b1re, 1.0);
        copy_colsum(&zim, g.b1im, 1.0);
        g.w2re.copy_from_slice(gw2re.as_slice().expect("standard layout"));
        g.w2im.copy_from_slice(gw2im.as_slice().expect("standard layout"));
        copy_colsum(&ere, g.b2re, 2.0);
        copy_colsum(&eim, g.b2im, 2.0);

        cost / (b * self.n_out) as f64
    }
}

fn copy_colsum(m: &Array2<f64>, out: &mut [f64], scale: f64) {
    let s = m.sum_axis(Axis(0));
    for (o, v) in out.iter_mut().zip(s.iter()) {
        *o = scale * v;
    }
}
