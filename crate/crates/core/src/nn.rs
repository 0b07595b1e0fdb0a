//! Dense layers and multilayer perceptrons on top of [`Graph`].

use rand::Rng;

use crate::autodiff::{Activation, Graph, Var};
use crate::error::{Error, Result};
use crate::rng;
use crate::tensor::Tensor;

/// Affine map `x·W + b` followed by an activation. `W` is `in × out`.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseLayer {
    pub weight: Tensor,
    pub bias: Tensor,
    pub activation: Activation,
}

impl DenseLayer {
    pub fn new(weight: Tensor, bias: Tensor, activation: Activation) -> Result<Self> {
        if weight.rank() != 2 || bias.shape() != [weight.shape()[1]] {
            return Err(Error::dim("dense layer", weight.shape(), bias.shape()));
        }
        Ok(DenseLayer {
            weight,
            bias,
            activation,
        })
    }

    pub fn in_dim(&self) -> usize {
        self.weight.shape()[0]
    }

    pub fn out_dim(&self) -> usize {
        self.weight.shape()[1]
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Mlp {
    layers: Vec<DenseLayer>,
}

impl Mlp {
    /// Xavier-uniform weights (`U(±√(6/(fan_in+fan_out)))`), zero biases.
    pub fn init(dims: &[usize], activations: &[Activation], seed: u64) -> Result<Self> {
        if dims.len() < 2 {
            return Err(Error::contract("an MLP needs at least an input and an output dim"));
        }
        if activations.len() != dims.len() - 1 {
            return Err(Error::contract(format!(
                "{} activations for {} layers",
                activations.len(),
                dims.len() - 1
            )));
        }
        if dims.contains(&0) {
            return Err(Error::contract("zero-width layer"));
        }
        let mut rng = rng::stream(seed, rng::streams::INIT);
        let layers = dims
            .windows(2)
            .zip(activations)
            .map(|(w, &act)| {
                let (fan_in, fan_out) = (w[0], w[1]);
                let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
                let weights = (0..fan_in * fan_out)
                    .map(|_| rng.random_range(-limit..limit))
                    .collect();
                DenseLayer::new(
                    Tensor::matrix(fan_in, fan_out, weights)?,
                    Tensor::zeros(vec![fan_out])?,
                    act,
                )
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Mlp { layers })
    }

    pub fn from_layers(layers: Vec<DenseLayer>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::contract("an MLP needs at least one layer"));
        }
        for pair in layers.windows(2) {
            if pair[0].out_dim() != pair[1].in_dim() {
                return Err(Error::dim(
                    "mlp chain",
                    pair[0].weight.shape(),
                    pair[1].weight.shape(),
                ));
            }
        }
        Ok(Mlp { layers })
    }

    pub fn layers(&self) -> &[DenseLayer] {
        &self.layers
    }

    pub fn in_dim(&self) -> usize {
        self.layers[0].in_dim()
    }

    pub fn out_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].out_dim()
    }

    /// Parameters in layer order: `w0, b0, w1, b1, …`.
    pub fn parameters(&self) -> Vec<&Tensor> {
        self.layers.iter().flat_map(|l| [&l.weight, &l.bias]).collect()
    }

    pub fn parameters_mut(&mut self) -> Vec<&mut Tensor> {
        self.layers
            .iter_mut()
            .flat_map(|l| [&mut l.weight, &mut l.bias])
            .collect()
    }

    /// `("{i}.weight", w_i), ("{i}.bias", b_i), …`, same order as [`Mlp::parameters`].
    pub fn named_parameters(&self) -> Vec<(String, &Tensor)> {
        self.layers
            .iter()
            .enumerate()
            .flat_map(|(i, l)| [(format!("{i}.weight"), &l.weight), (format!("{i}.bias"), &l.bias)])
            .collect()
    }

    pub fn num_parameters(&self) -> usize {
        self.parameters().iter().map(|t| t.numel()).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.parameters().iter().all(|t| t.is_finite())
    }

    /// Copies the parameters onto `g`, tracked when `trainable`.
    pub fn bind(&self, g: &mut Graph, trainable: bool) -> BoundMlp {
        let layers = self
            .layers
            .iter()
            .map(|l| {
                let (w, b) = if trainable {
                    (g.param(l.weight.clone()), g.param(l.bias.clone()))
                } else {
                    (g.constant(l.weight.clone()), g.constant(l.bias.clone()))
                };
                BoundLayer {
                    weight: w,
                    bias: b,
                    activation: l.activation,
                }
            })
            .collect();
        BoundMlp { layers }
    }

    /// Graph-free forward pass over the rows of `x` (`[in]` or `[batch × in]`).
    pub fn eval(&self, x: &Tensor) -> Result<Tensor> {
        let mut g = Graph::new();
        let bound = self.bind(&mut g, false);
        let xv = g.constant(x.clone());
        let y = bound.forward(&mut g, xv)?;
        Ok(g.value(y).clone())
    }
}

#[derive(Clone, Copy, Debug)]
pub struct BoundLayer {
    pub weight: Var,
    pub bias: Var,
    pub activation: Activation,
}

/// An [`Mlp`] whose parameters live on a particular graph.
#[derive(Clone, Debug)]
pub struct BoundMlp {
    layers: Vec<BoundLayer>,
}

impl BoundMlp {
    /// Builds from explicit parameter nodes (`w0, b0, w1, b1, …`).
    pub fn from_vars(vars: &[Var], activations: &[Activation]) -> Result<Self> {
        if vars.len() != 2 * activations.len() {
            return Err(Error::contract("need one weight and one bias per activation"));
        }
        let layers = vars
            .chunks(2)
            .zip(activations)
            .map(|(wb, &activation)| BoundLayer {
                weight: wb[0],
                bias: wb[1],
                activation,
            })
            .collect();
        Ok(BoundMlp { layers })
    }

    pub fn params(&self) -> Vec<Var> {
        self.layers.iter().flat_map(|l| [l.weight, l.bias]).collect()
    }

    pub fn forward(&self, g: &mut Graph, x: Var) -> Result<Var> {
        let h = self.forward_logits(g, x)?;
        let last = self.layers[self.layers.len() - 1].activation;
        g.activation(last, h)
    }

    /// Forward pass without the final activation.
    pub fn forward_logits(&self, g: &mut Graph, x: Var) -> Result<Var> {
        let in_dim = g.shape(self.layers[0].weight)[0];
        let mut h = match g.shape(x) {
            [d] if *d == in_dim => g.reshape(x, vec![1, in_dim])?,
            [_, d] if *d == in_dim => x,
            other => {
                return Err(Error::dim("mlp forward", other, &[in_dim]));
            }
        };
        let last = self.layers.len() - 1;
        for (i, layer) in self.layers.iter().enumerate() {
            h = g.matmul(h, layer.weight)?;
            h = g.add_bias(h, layer.bias)?;
            if i < last {
                h = g.activation(layer.activation, h)?;
            }
        }
        Ok(h)
    }

    /// Leaf gradients after `backward`; zeros for parameters that received none.
    pub fn grads(&self, g: &Graph) -> Result<Vec<Tensor>> {
        self.params()
            .into_iter()
            .map(|v| match g.grad(v) {
                Some(t) => Ok(t),
                None => Tensor::zeros(g.shape(v).to_vec()),
            })
            .collect()
    }
}
