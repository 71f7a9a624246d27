//! Small differentiable building blocks with hand-written gradients.
//!
//! Batches are row-major: one sample per row. Every learnable container
//! implements [`Parameters`] so that optimizers, the finite-difference
//! checker and checkpointing can walk its tensors uniformly.

mod adam;
mod gradcheck;

pub use adam::{adam_step, AdamState};
pub use gradcheck::{grad_check, GradCheckReport};

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::Rng;
use rand_distr::{Bernoulli, Distribution, Uniform};

use crate::error::{Error, Result};
use crate::linalg;

/// Read-only view of one named parameter tensor.
pub struct TensorRef<'a> {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: &'a [f64],
}

/// A fixed collection of named `f64` tensors.
///
/// `tensors` and `tensors_mut` must enumerate the same tensors in the same
/// order.
pub trait Parameters: Clone {
    fn tensors(&self) -> Vec<TensorRef<'_>>;

    fn tensors_mut(&mut self) -> Vec<(String, &mut [f64])>;

    fn zeros_like(&self) -> Self {
        let mut z = self.clone();
        for (_, t) in z.tensors_mut() {
            t.fill(0.0);
        }
        z
    }

    fn num_params(&self) -> usize {
        self.tensors().iter().map(|t| t.data.len()).sum()
    }

    fn is_finite(&self) -> bool {
        self.tensors().iter().all(|t| t.data.iter().all(|v| v.is_finite()))
    }

    /// `self += scale·other`, tensor by tensor.
    fn add_scaled(&mut self, other: &Self, scale: f64) {
        let src: Vec<Vec<f64>> = other.tensors().into_iter().map(|t| t.data.to_vec()).collect();
        for ((_, dst), src) in self.tensors_mut().into_iter().zip(src) {
            for (d, s) in dst.iter_mut().zip(src) {
                *d += scale * s;
            }
        }
    }

    /// Bit-level fingerprint of all tensors (FNV-1a over the f64 bit patterns).
    fn fingerprint(&self) -> u64 {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for t in self.tensors() {
            for v in t.data {
                for b in v.to_bits().to_le_bytes() {
                    h ^= b as u64;
                    h = h.wrapping_mul(0x0100_0000_01b3);
                }
            }
        }
        h
    }
}

pub(crate) fn prefixed<'a>(prefix: &str, inner: Vec<TensorRef<'a>>) -> Vec<TensorRef<'a>> {
    inner
        .into_iter()
        .map(|t| TensorRef {
            name: format!("{prefix}.{}", t.name),
            ..t
        })
        .collect()
}

pub(crate) fn prefixed_mut<'a>(prefix: &str, inner: Vec<(String, &'a mut [f64])>) -> Vec<(String, &'a mut [f64])> {
    inner.into_iter().map(|(n, t)| (format!("{prefix}.{n}"), t)).collect()
}

pub(crate) fn slice_of<D: ndarray::Dimension>(a: &ndarray::Array<f64, D>) -> &[f64] {
    a.as_slice().expect("parameter tensors are kept in standard layout")
}

pub(crate) fn slice_of_mut<D: ndarray::Dimension>(a: &mut ndarray::Array<f64, D>) -> &mut [f64] {
    a.as_slice_mut().expect("parameter tensors are kept in standard layout")
}

/// Fully connected layer `y = x·Wᵀ + b` with `W` shaped `out×in`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub weight: Array2<f64>,
    pub bias: Array1<f64>,
}

impl Dense {
    pub fn new(weight: Array2<f64>, bias: Array1<f64>) -> Self {
        assert_eq!(weight.nrows(), bias.len(), "bias length must match output width");
        Dense {
            weight: weight.as_standard_layout().into_owned(),
            bias,
        }
    }

    pub fn zeros(input: usize, output: usize) -> Self {
        Dense::new(Array2::zeros((output, input)), Array1::zeros(output))
    }

    /// Weights and biases uniform in `±1/√fan_in`.
    pub fn uniform<R: Rng + ?Sized>(input: usize, output: usize, rng: &mut R) -> Self {
        let bound = 1.0 / (input as f64).sqrt();
        let dist = Uniform::new_inclusive(-bound, bound).expect("finite bound");
        Dense::new(
            Array2::from_shape_simple_fn((output, input), || dist.sample(rng)),
            Array1::from_shape_simple_fn(output, || dist.sample(rng)),
        )
    }

    pub fn input_dim(&self) -> usize {
        self.weight.ncols()
    }

    pub fn output_dim(&self) -> usize {
        self.weight.nrows()
    }

    pub fn forward(&self, x: ArrayView2<'_, f64>) -> Array2<f64> {
        x.dot(&self.weight.t()) + &self.bias
    }

    pub fn checked_forward(&self, x: ArrayView2<'_, f64>, op: &'static str) -> Result<Array2<f64>> {
        if x.ncols() != self.input_dim() {
            return Err(Error::Shape {
                op,
                expected: (x.nrows(), self.input_dim()),
                got: x.dim(),
            });
        }
        Ok(self.forward(x))
    }

    /// Accumulates parameter gradients into `grad` and returns `∂L/∂x`.
    pub fn backward(&self, x: ArrayView2<'_, f64>, d_out: ArrayView2<'_, f64>, grad: &mut Dense) -> Array2<f64> {
        self.accumulate_grads(x, d_out, grad);
        self.backward_input(d_out)
    }

    pub fn accumulate_grads(&self, x: ArrayView2<'_, f64>, d_out: ArrayView2<'_, f64>, grad: &mut Dense) {
        ndarray::linalg::general_mat_mul(1.0, &d_out.t(), &x, 1.0, &mut grad.weight);
        grad.bias += &d_out.sum_axis(Axis(0));
    }

    pub fn backward_input(&self, d_out: ArrayView2<'_, f64>) -> Array2<f64> {
        d_out.dot(&self.weight)
    }
}

impl Parameters for Dense {
    fn tensors(&self) -> Vec<TensorRef<'_>> {
        vec![
            TensorRef {
                name: "weight".into(),
                shape: self.weight.shape().to_vec(),
                data: slice_of(&self.weight),
            },
            TensorRef {
                name: "bias".into(),
                shape: self.bias.shape().to_vec(),
                data: slice_of(&self.bias),
            },
        ]
    }

    fn tensors_mut(&mut self) -> Vec<(String, &mut [f64])> {
        vec![
            ("weight".into(), slice_of_mut(&mut self.weight)),
            ("bias".into(), slice_of_mut(&mut self.bias)),
        ]
    }
}

/// Affine encoder/decoder pair between the embedding space (`d`) and the
/// latent space (`d_latent`).
#[derive(Debug, Clone, PartialEq)]
pub struct Autoencoder {
    pub encoder: Dense,
    pub decoder: Dense,
}

impl Autoencoder {
    /// Encoder with random orthonormal rows (or columns, when
    /// `d_latent > d`), decoder set to its transpose, zero biases.
    pub fn orthonormal<R: Rng + ?Sized>(dim: usize, latent: usize, rng: &mut R) -> Self {
        let enc = linalg::random_orthonormal(latent, dim, rng);
        let dec = enc.t().as_standard_layout().into_owned();
        Autoencoder {
            encoder: Dense::new(enc, Array1::zeros(latent)),
            decoder: Dense::new(dec, Array1::zeros(dim)),
        }
    }

    pub fn identity(dim: usize) -> Self {
        Autoencoder {
            encoder: Dense::new(Array2::eye(dim), Array1::zeros(dim)),
            decoder: Dense::new(Array2::eye(dim), Array1::zeros(dim)),
        }
    }

    pub fn dim(&self) -> usize {
        self.encoder.input_dim()
    }

    pub fn latent_dim(&self) -> usize {
        self.encoder.output_dim()
    }

    pub fn encode(&self, batch: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        self.encoder.checked_forward(batch, "encode")
    }

    pub fn decode(&self, latent: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        self.decoder.checked_forward(latent, "decode")
    }
}

impl Parameters for Autoencoder {
    fn tensors(&self) -> Vec<TensorRef<'_>> {
        let mut out = prefixed("enc", self.encoder.tensors());
        out.extend(prefixed("dec", self.decoder.tensors()));
        out
    }

    fn tensors_mut(&mut self) -> Vec<(String, &mut [f64])> {
        let mut out = prefixed_mut("enc", self.encoder.tensors_mut());
        out.extend(prefixed_mut("dec", self.decoder.tensors_mut()));
        out
    }
}

/// Square latent-space map `W` of an interpolating generator.
#[derive(Debug, Clone, PartialEq)]
pub struct Generator {
    pub weight: Array2<f64>,
}

impl Generator {
    pub fn identity(latent: usize) -> Self {
        Generator {
            weight: Array2::eye(latent),
        }
    }

    pub fn new(weight: Array2<f64>) -> Self {
        assert_eq!(weight.nrows(), weight.ncols(), "generator weight must be square");
        Generator {
            weight: weight.as_standard_layout().into_owned(),
        }
    }

    pub fn dim(&self) -> usize {
        self.weight.nrows()
    }
}

impl Parameters for Generator {
    fn tensors(&self) -> Vec<TensorRef<'_>> {
        vec![TensorRef {
            name: "weight".into(),
            shape: self.weight.shape().to_vec(),
            data: slice_of(&self.weight),
        }]
    }

    fn tensors_mut(&mut self) -> Vec<(String, &mut [f64])> {
        vec![("weight".into(), slice_of_mut(&mut self.weight))]
    }
}

/// MLP critic `d_latent → h → … → 1` with leaky-ReLU hidden layers, input
/// dropout and a sigmoid output.
#[derive(Debug, Clone, PartialEq)]
pub struct Discriminator {
    pub layers: Vec<Dense>,
    pub slope: f64,
    pub dropout: f64,
}

/// Activations recorded by [`Discriminator::forward`] for backpropagation.
#[derive(Debug, Clone)]
pub struct DiscForward {
    /// Input to each layer (after dropout for the first one).
    inputs: Vec<Array2<f64>>,
    /// Pre-activations of the hidden layers.
    pre: Vec<Array2<f64>>,
    /// Input dropout scale per element (`None` outside train mode).
    mask: Option<Array2<f64>>,
    pub logits: Array1<f64>,
    pub probs: Array1<f64>,
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

impl Discriminator {
    pub fn new<R: Rng + ?Sized>(input: usize, hidden: &[usize], slope: f64, dropout: f64, rng: &mut R) -> Self {
        let mut widths = vec![input];
        widths.extend_from_slice(hidden);
        widths.push(1);
        let layers = widths.windows(2).map(|w| Dense::uniform(w[0], w[1], rng)).collect();
        Discriminator { layers, slope, dropout }
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].input_dim()
    }

    pub fn hidden_widths(&self) -> Vec<usize> {
        self.layers[..self.layers.len() - 1].iter().map(Dense::output_dim).collect()
    }

    /// Output probabilities in `(0, 1)`, one per batch row.
    pub fn discriminate<R: Rng + ?Sized>(&self, batch: ArrayView2<'_, f64>, train_mode: bool, rng: &mut R) -> Result<Array1<f64>> {
        if batch.ncols() != self.input_dim() {
            return Err(Error::Shape {
                op: "discriminate",
                expected: (batch.nrows(), self.input_dim()),
                got: batch.dim(),
            });
        }
        Ok(self.forward(batch, train_mode, rng).probs)
    }

    pub fn forward<R: Rng + ?Sized>(&self, batch: ArrayView2<'_, f64>, train_mode: bool, rng: &mut R) -> DiscForward {
        let mask = (train_mode && self.dropout > 0.0).then(|| {
            let keep = Bernoulli::new(1.0 - self.dropout).expect("dropout rate in [0,1)");
            let scale = 1.0 / (1.0 - self.dropout);
            Array2::from_shape_simple_fn(batch.dim(), || if keep.sample(rng) { scale } else { 0.0 })
        });
        let mut x = match &mask {
            Some(m) => &batch * m,
            None => batch.to_owned(),
        };
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut pre = Vec::with_capacity(self.layers.len() - 1);
        let last = self.layers.len() - 1;
        for (i, layer) in self.layers.iter().enumerate() {
            let z = layer.forward(x.view());
            inputs.push(x);
            if i == last {
                x = z;
            } else {
                let slope = self.slope;
                x = z.mapv(|v| if v > 0.0 { v } else { slope * v });
                pre.push(z);
            }
        }
        let logits = x.column(0).to_owned();
        let probs = logits.mapv(sigmoid);
        DiscForward {
            inputs,
            pre,
            mask,
            logits,
            probs,
        }
    }

    /// Backpropagates `∂L/∂logit`. Accumulates parameter gradients when
    /// `grad` is given and returns `∂L/∂input` when `want_input` is set.
    pub fn backward(
        &self,
        cache: &DiscForward,
        d_logits: ArrayView1<'_, f64>,
        mut grad: Option<&mut Discriminator>,
        want_input: bool,
    ) -> Option<Array2<f64>> {
        let mut d = d_logits.to_owned().insert_axis(Axis(1));
        for i in (0..self.layers.len()).rev() {
            let layer = &self.layers[i];
            if let Some(g) = grad.as_deref_mut() {
                layer.accumulate_grads(cache.inputs[i].view(), d.view(), &mut g.layers[i]);
            }
            if i == 0 && !want_input {
                return None;
            }
            d = layer.backward_input(d.view());
            if i > 0 {
                let slope = self.slope;
                ndarray::Zip::from(&mut d)
                    .and(&cache.pre[i - 1])
                    .for_each(|g, &z| {
                        if z <= 0.0 {
                            *g *= slope
                        }
                    });
            }
        }
        if let Some(m) = &cache.mask {
            d *= m;
        }
        Some(d)
    }
}

impl Parameters for Discriminator {
    fn tensors(&self) -> Vec<TensorRef<'_>> {
        self.layers
            .iter()
            .enumerate()
            .flat_map(|(i, l)| prefixed(&format!("layer{i}"), l.tensors()))
            .collect()
    }

    fn tensors_mut(&mut self) -> Vec<(String, &mut [f64])> {
        self.layers
            .iter_mut()
            .enumerate()
            .flat_map(|(i, l)| prefixed_mut(&format!("layer{i}"), l.tensors_mut()))
            .collect()
    }
}

macro_rules! composite_parameters {
    ($ty:ty { $($field:ident => $name:literal),+ $(,)? }) => {
        impl $crate::nets::Parameters for $ty {
            fn tensors(&self) -> Vec<$crate::nets::TensorRef<'_>> {
                let mut out = Vec::new();
                $( out.extend($crate::nets::prefixed($name, self.$field.tensors())); )+
                out
            }

            fn tensors_mut(&mut self) -> Vec<(String, &mut [f64])> {
                let mut out = Vec::new();
                $( out.extend($crate::nets::prefixed_mut($name, self.$field.tensors_mut())); )+
                out
            }
        }
    };
}
pub(crate) use composite_parameters;


#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rng() -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(7)
    }

    #[test]
    fn encode_identity_and_scale() {
        let ae = Autoencoder::identity(2);
        let x = array![[1.0, -1.0]];
        assert_eq!(ae.encode(x.view()).unwrap(), x);
        let mut ae2 = ae.clone();
        ae2.encoder.weight *= 2.0;
        assert_eq!(ae2.encode(x.view()).unwrap(), array![[2.0, -2.0]]);
        assert_eq!(ae.decode(x.view()).unwrap(), x);
    }

    #[test]
    fn encode_batch_consistency() {
        let mut r = rng();
        let mut ae = Autoencoder::orthonormal(5, 3, &mut r);
        ae.encoder.bias = array![0.1, -0.2, 0.3];
        let x = linalg::gaussian_matrix(2, 5, &mut r);
        let both = ae.encode(x.view()).unwrap();
        for i in 0..2 {
            let one = ae.encode(x.slice(ndarray::s![i..i + 1, ..])).unwrap();
            assert_eq!(one.row(0), both.row(i));
        }
        let h = linalg::gaussian_matrix(2, 3, &mut r);
        let both = ae.decode(h.view()).unwrap();
        let one = ae.decode(h.slice(ndarray::s![1..2, ..])).unwrap();
        assert_eq!(one.row(0), both.row(1));
    }

    #[test]
    fn encode_shape_mismatch() {
        let ae = Autoencoder::identity(3);
        assert!(matches!(ae.encode(array![[1.0, 2.0]].view()), Err(Error::Shape { .. })));
    }

    #[test]
    fn pseudo_inverse_decoder_reconstructs_row_space() {
        // wide encoder 3×6; decoder = pinv(enc) from an SVD
        let mut r = rng();
        let enc = linalg::gaussian_matrix(3, 6, &mut r);
        let (u, s, v) = linalg::svd(enc.view());
        let pinv = v.dot(&Array2::from_diag(&s.mapv(|x| 1.0 / x))).dot(&u.t());
        let ae = Autoencoder {
            encoder: Dense::new(enc.clone(), Array1::zeros(3)),
            decoder: Dense::new(pinv, Array1::zeros(6)),
        };
        // rows of x lie in the row space of enc
        let coeffs = linalg::gaussian_matrix(4, 3, &mut r);
        let x = coeffs.dot(&enc);
        let back = ae.decode(ae.encode(x.view()).unwrap().view()).unwrap();
        assert!(linalg::frobenius((back - &x).view()) < 1e-6);
    }

    #[test]
    fn zero_discriminator_outputs_half() {
        let mut r = rng();
        let mut d = Discriminator::new(4, &[8, 8], 0.2, 0.1, &mut r);
        for (_, t) in d.tensors_mut() {
            t.fill(0.0);
        }
        let x = linalg::gaussian_matrix(5, 4, &mut r);
        let p = d.discriminate(x.view(), true, &mut r).unwrap();
        assert!(p.iter().all(|&v| v == 0.5));
    }

    #[test]
    fn discriminator_range_and_determinism() {
        let mut r = rng();
        let d = Discriminator::new(4, &[16, 16], 0.2, 0.1, &mut r);
        let x = linalg::gaussian_matrix(50, 4, &mut r) * 3.0;
        let a = d.discriminate(x.view(), false, &mut r).unwrap();
        let b = d.discriminate(x.view(), false, &mut r).unwrap();
        assert_eq!(a, b);
        assert!(a.iter().all(|&p| p > 0.0 && p < 1.0));
        let t = d.discriminate(x.view(), true, &mut r).unwrap();
        assert!(t.iter().all(|&p| p > 0.0 && p < 1.0));
    }

    #[test]
    fn discriminator_rejects_wrong_width() {
        let mut r = rng();
        let d = Discriminator::new(4, &[8], 0.2, 0.0, &mut r);
        assert!(d.discriminate(array![[1.0]].view(), false, &mut r).is_err());
    }

    #[test]
    fn parameter_names_are_role_scoped() {
        let mut r = rng();
        let d = Discriminator::new(3, &[4, 4], 0.2, 0.0, &mut r);
        let names: Vec<_> = d.tensors().into_iter().map(|t| t.name).collect();
        assert_eq!(names[0], "layer0.weight");
        assert_eq!(names.len(), 6);
        let ae = Autoencoder::identity(2);
        let names: Vec<_> = ae.tensors().into_iter().map(|t| t.name).collect();
        assert_eq!(names, ["enc.weight", "enc.bias", "dec.weight", "dec.bias"]);
    }

    #[test]
    fn batch_permutation_equivariance() {
        let mut r = rng();
        let d = Discriminator::new(3, &[6, 6], 0.2, 0.0, &mut r);
        let x = linalg::gaussian_matrix(4, 3, &mut r);
        let perm = [2usize, 0, 3, 1];
        let xp = x.select(Axis(0), &perm);
        let p = d.discriminate(x.view(), false, &mut r).unwrap();
        let pp = d.discriminate(xp.view(), false, &mut r).unwrap();
        for (k, &i) in perm.iter().enumerate() {
            assert_eq!(pp[k], p[i]);
        }
    }
}
