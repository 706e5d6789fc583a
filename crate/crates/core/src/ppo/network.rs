//! Shared-trunk MLP with a two-branch categorical policy head and a scalar
//! value head. Parameters live in one flat, layer-ordered vector so the
//! optimizer, the gradient check and the checkpoint all see the same layout.

use ndarray::{
    s, Array1, Array2, ArrayView1, ArrayView2, ArrayViewMut1, ArrayViewMut2, Axis, LinalgScalar,
};
use num_traits::Float;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::perception::OBSERVATION_LEN;

/// Scalar type usable by the network: f64 for training, f32 for the fast path.
pub trait Real:
    Float + LinalgScalar + std::ops::AddAssign + std::fmt::Debug + Send + Sync + 'static
{
    fn lit(v: f64) -> Self;
    fn as_f64(self) -> f64;
}

impl Real for f64 {
    fn lit(v: f64) -> Self {
        v
    }
    fn as_f64(self) -> f64 {
        self
    }
}

impl Real for f32 {
    fn lit(v: f64) -> Self {
        v as f32
    }
    fn as_f64(self) -> f64 {
        f64::from(self)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetworkConfig {
    pub input_dim: usize,
    pub hidden_width: usize,
    pub hidden_depth: usize,
    /// Actions per policy branch (horizontal, vertical).
    pub branch_sizes: [usize; 2],
}

impl Default for NetworkConfig {
    fn default() -> Self {
        Self {
            input_dim: OBSERVATION_LEN,
            hidden_width: 512,
            hidden_depth: 2,
            branch_sizes: [2, 2],
        }
    }
}

impl NetworkConfig {
    pub fn logits(&self) -> usize {
        self.branch_sizes[0] + self.branch_sizes[1]
    }

    /// (fan_in, fan_out) per layer: trunk layers, policy head, value head.
    pub fn layer_dims(&self) -> Vec<(usize, usize)> {
        let mut dims = Vec::with_capacity(self.hidden_depth + 2);
        let mut fan_in = self.input_dim;
        for _ in 0..self.hidden_depth {
            dims.push((fan_in, self.hidden_width));
            fan_in = self.hidden_width;
        }
        dims.push((fan_in, self.logits()));
        dims.push((fan_in, 1));
        dims
    }

    pub fn param_count(&self) -> usize {
        self.layer_dims().iter().map(|(i, o)| i * o + o).sum()
    }

    /// Rebuilds a config from a layer table; `None` if the table is not a trunk plus two heads.
    pub fn from_layer_dims(dims: &[(usize, usize)], branch_sizes: [usize; 2]) -> Option<Self> {
        if dims.len() < 2 {
            return None;
        }
        let depth = dims.len() - 2;
        let input_dim = dims[0].0;
        let width = if depth > 0 { dims[0].1 } else { input_dim };
        let cfg = Self {
            input_dim,
            hidden_width: width,
            hidden_depth: depth,
            branch_sizes,
        };
        (cfg.layer_dims() == dims).then_some(cfg)
    }
}

#[derive(Debug, Clone, Copy)]
struct LayerSlice {
    fan_in: usize,
    fan_out: usize,
    offset: usize,
}

impl LayerSlice {
    fn weight_len(&self) -> usize {
        self.fan_in * self.fan_out
    }
}

/// Network parameters: per layer a `fan_in × fan_out` row-major weight
/// matrix followed by `fan_out` biases.
#[derive(Debug, Clone, PartialEq)]
pub struct Network<T: Real = f64> {
    pub config: NetworkConfig,
    pub params: Vec<T>,
}

/// Batched forward outputs.
#[derive(Debug, Clone)]
pub struct Forward<T: Real> {
    /// `N × (b0 + b1)` policy logits, branch 0 first.
    pub logits: Array2<T>,
    pub values: Array1<T>,
    /// Trunk activations, `acts[0]` is the input.
    acts: Vec<Array2<T>>,
}

impl<T: Real> Network<T> {
    pub fn zeros(config: NetworkConfig) -> Self {
        let n = config.param_count();
        Self {
            config,
            params: vec![T::zero(); n],
        }
    }

    /// Orthogonal initialization: gain √2 in the trunk, 0.01 on the policy
    /// head (near-uniform initial policy), 1 on the value head; zero biases.
    pub fn init<R: Rng + ?Sized>(config: NetworkConfig, rng: &mut R) -> Self {
        let mut net = Self::zeros(config);
        let layers = net.layers();
        let last = layers.len() - 1;
        for (i, l) in layers.iter().enumerate() {
            let gain = if i == last {
                1.0
            } else if i == last - 1 {
                0.01
            } else {
                std::f64::consts::SQRT_2
            };
            let w = orthogonal(l.fan_in, l.fan_out, gain, rng);
            for (dst, src) in net.params[l.offset..l.offset + l.weight_len()]
                .iter_mut()
                .zip(w)
            {
                *dst = T::lit(src);
            }
        }
        net
    }

    fn layers(&self) -> Vec<LayerSlice> {
        let mut offset = 0;
        self.config
            .layer_dims()
            .into_iter()
            .map(|(fan_in, fan_out)| {
                let l = LayerSlice {
                    fan_in,
                    fan_out,
                    offset,
                };
                offset += fan_in * fan_out + fan_out;
                l
            })
            .collect()
    }

    fn weights<'a>(params: &'a [T], l: &LayerSlice) -> (ArrayView2<'a, T>, ArrayView1<'a, T>) {
        let w = ArrayView2::from_shape(
            (l.fan_in, l.fan_out),
            &params[l.offset..l.offset + l.weight_len()],
        )
        .expect("layer shape");
        let b = ArrayView1::from(
            &params[l.offset + l.weight_len()..l.offset + l.weight_len() + l.fan_out],
        );
        (w, b)
    }

    /// Forward pass over a batch of observations (`N × input_dim`).
    pub fn forward_batch(&self, obs: ArrayView2<'_, T>) -> Forward<T> {
        assert_eq!(obs.ncols(), self.config.input_dim, "observation width");
        let layers = self.layers();
        let depth = self.config.hidden_depth;
        let mut acts = Vec::with_capacity(depth + 1);
        acts.push(obs.to_owned());
        for l in &layers[..depth] {
            let (w, b) = Self::weights(&self.params, l);
            let mut z = acts.last().unwrap().dot(&w);
            z += &b;
            z.mapv_inplace(Float::tanh);
            acts.push(z);
        }
        let h = acts.last().unwrap();
        let (wp, bp) = Self::weights(&self.params, &layers[depth]);
        let mut logits = h.dot(&wp);
        logits += &bp;
        let (wv, bv) = Self::weights(&self.params, &layers[depth + 1]);
        let mut values = h.dot(&wv);
        values += &bv;
        let values = values.index_axis_move(Axis(1), 0);
        Forward {
            logits,
            values,
            acts,
        }
    }

    /// Single-observation forward: (horizontal logits, vertical logits, value).
    pub fn forward(&self, obs: &[T]) -> (Vec<T>, Vec<T>, T) {
        let view = ArrayView2::from_shape((1, obs.len()), obs).expect("row");
        let f = self.forward_batch(view);
        let row = f.logits.row(0);
        let b0 = self.config.branch_sizes[0];
        (
            row.slice(s![..b0]).to_vec(),
            row.slice(s![b0..]).to_vec(),
            f.values[0],
        )
    }

    /// Backpropagates output gradients through a cached forward pass,
    /// returning the gradient with the same layout as `params`.
    pub fn backward(
        &self,
        fwd: &Forward<T>,
        d_logits: ArrayView2<'_, T>,
        d_values: ArrayView1<'_, T>,
    ) -> Vec<T> {
        let layers = self.layers();
        let depth = self.config.hidden_depth;
        let mut grad = vec![T::zero(); self.params.len()];
        let h = &fwd.acts[depth];

        let (wp, _) = Self::weights(&self.params, &layers[depth]);
        let (wv, _) = Self::weights(&self.params, &layers[depth + 1]);
        let d_values2 = d_values.insert_axis(Axis(1));
        write_layer_grad(&mut grad, &layers[depth], h.view(), d_logits);
        write_layer_grad(&mut grad, &layers[depth + 1], h.view(), d_values2);

        let mut dh = d_logits.dot(&wp.t());
        dh += &d_values2.dot(&wv.t());
        for i in (0..depth).rev() {
            let a = &fwd.acts[i + 1];
            // tanh' = 1 - a²
            let dz = &dh * &a.mapv(|v| T::one() - v * v);
            write_layer_grad(&mut grad, &layers[i], fwd.acts[i].view(), dz.view());
            if i > 0 {
                let (w, _) = Self::weights(&self.params, &layers[i]);
                dh = dz.dot(&w.t());
            }
        }
        grad
    }

    pub fn cast<U: Real>(&self) -> Network<U> {
        Network {
            config: self.config,
            params: self.params.iter().map(|v| U::lit(v.as_f64())).collect(),
        }
    }
}

fn write_layer_grad<T: Real>(
    grad: &mut [T],
    l: &LayerSlice,
    input: ArrayView2<'_, T>,
    dz: ArrayView2<'_, T>,
) {
    let (wg, bg) =
        grad[l.offset..l.offset + l.weight_len() + l.fan_out].split_at_mut(l.weight_len());
    let mut wg = ArrayViewMut2::from_shape((l.fan_in, l.fan_out), wg).expect("layer shape");
    wg.assign(&input.t().dot(&dz));
    ArrayViewMut1::from(bg).assign(&dz.sum_axis(Axis(0)));
}

/// `fan_in × fan_out` matrix with orthonormal columns (or rows, whichever is
/// shorter) scaled by `gain`, via Gram-Schmidt on a Gaussian draw.
fn orthogonal<R: Rng + ?Sized>(fan_in: usize, fan_out: usize, gain: f64, rng: &mut R) -> Vec<f64> {
    let (rows, cols) = if fan_in >= fan_out {
        (fan_in, fan_out)
    } else {
        (fan_out, fan_in)
    };
    // columns of a rows × cols matrix, orthonormalized
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(cols);
    while basis.len() < cols {
        let mut v: Vec<f64> = (0..rows).map(|_| StandardNormal.sample(rng)).collect();
        for q in &basis {
            let d: f64 = v.iter().zip(q).map(|(a, b)| a * b).sum();
            v.iter_mut().zip(q).for_each(|(a, b)| *a -= d * b);
        }
        let norm = v.iter().map(|a| a * a).sum::<f64>().sqrt();
        if norm > 1e-8 {
            v.iter_mut().for_each(|a| *a /= norm);
            basis.push(v);
        }
    }
    let mut out = vec![0.0; fan_in * fan_out];
    for i in 0..fan_in {
        for j in 0..fan_out {
            let val = if fan_in >= fan_out {
                basis[j][i]
            } else {
                basis[i][j]
            };
            out[i * fan_out + j] = gain * val;
        }
    }
    out
}

/// Log-softmax of one branch.
pub fn log_softmax<T: Real>(logits: &[T]) -> Vec<T> {
    let max = logits.iter().copied().fold(T::neg_infinity(), T::max);
    let lse = logits
        .iter()
        .map(|&z| (z - max).exp())
        .fold(T::zero(), |a, b| a + b)
        .ln()
        + max;
    logits.iter().map(|&z| z - lse).collect()
}

pub fn softmax<T: Real>(logits: &[T]) -> Vec<T> {
    log_softmax(logits).into_iter().map(Float::exp).collect()
}

/// Entropy of one categorical branch given its logits.
pub fn entropy<T: Real>(logits: &[T]) -> T {
    log_softmax(logits)
        .into_iter()
        .map(|lp| -lp.exp() * lp)
        .fold(T::zero(), |a, b| a + b)
}
