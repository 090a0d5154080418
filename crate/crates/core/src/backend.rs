//! Execution backends.
//!
//! The model's forward pass is written once against [`Backend`]. Three
//! backends exist: the gradient [`Tape`] used for training, [`FloatEval`]
//! for plain float inference, and the dynamic int8 backend in
//! [`crate::quantize`]. What a parameter *is* differs per backend (a tensor,
//! a tape handle, an int8 payload) and is described by a [`ParamKind`].

use std::fmt::Debug;

use crate::error::Result;
use crate::tensor::{self, Tape, Tensor, Var};

/// Storage types for the three roles a model parameter can play.
///
/// `Weight` is a matrix that multiplies activations (quantizable),
/// `Param` is a bias, norm scale or token kept in float, and `Embedding` is
/// an additive table stored compactly but applied in float.
pub trait ParamKind {
    type Weight: Clone + Debug;
    type Param: Clone + Debug;
    type Embedding: Clone + Debug;
}

/// Plain `f32` tensors.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Float;

impl ParamKind for Float {
    type Weight = Tensor;
    type Param = Tensor;
    type Embedding = Tensor;
}

/// Parameters registered as leaves of a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OnTape;

impl ParamKind for OnTape {
    type Weight = Var;
    type Param = Var;
    type Embedding = Var;
}

/// Borrowed view of one parameter during a visit.
#[derive(Debug)]
pub enum Slot<'a, K: ParamKind> {
    Weight(&'a K::Weight),
    Param(&'a K::Param),
    Embedding(&'a K::Embedding),
}

/// Converts every parameter of a structure from kind `A` to kind `B`.
pub trait ParamMap<A: ParamKind, B: ParamKind> {
    fn weight(&mut self, name: &str, w: &A::Weight) -> Result<B::Weight>;
    fn param(&mut self, name: &str, p: &A::Param) -> Result<B::Param>;
    fn embedding(&mut self, name: &str, e: &A::Embedding) -> Result<B::Embedding>;
}

/// Registers float parameters as tape leaves.
pub struct BindToTape<'t>(pub &'t mut Tape);

impl ParamMap<Float, OnTape> for BindToTape<'_> {
    fn weight(&mut self, _: &str, w: &Tensor) -> Result<Var> {
        Ok(self.0.leaf(w.clone()))
    }
    fn param(&mut self, _: &str, p: &Tensor) -> Result<Var> {
        Ok(self.0.leaf(p.clone()))
    }
    fn embedding(&mut self, _: &str, e: &Tensor) -> Result<Var> {
        Ok(self.0.leaf(e.clone()))
    }
}

/// Primitive operations the forward pass is composed from.
pub trait Backend {
    type Kind: ParamKind;
    type Node: Clone;

    fn value<'a>(&'a self, n: &'a Self::Node) -> &'a Tensor;
    fn input(&mut self, t: Tensor) -> Self::Node;
    fn param(&mut self, p: &<Self::Kind as ParamKind>::Param) -> Self::Node;
    fn embedding(&mut self, e: &<Self::Kind as ParamKind>::Embedding) -> Result<Self::Node>;

    /// `x·W + b` with a model weight.
    fn linear(
        &mut self,
        x: &Self::Node,
        w: &<Self::Kind as ParamKind>::Weight,
        b: &<Self::Kind as ParamKind>::Param,
    ) -> Result<Self::Node>;

    /// Product of two activations.
    fn matmul(&mut self, a: &Self::Node, b: &Self::Node) -> Result<Self::Node>;
    fn transpose(&mut self, a: &Self::Node) -> Result<Self::Node>;
    fn add(&mut self, a: &Self::Node, b: &Self::Node) -> Result<Self::Node>;
    fn scale(&mut self, a: &Self::Node, c: f32) -> Self::Node;
    fn softmax(&mut self, a: &Self::Node, axis: usize) -> Result<Self::Node>;
    fn gelu(&mut self, a: &Self::Node) -> Self::Node;
    fn relu(&mut self, a: &Self::Node) -> Self::Node;
    fn layer_norm(
        &mut self,
        x: &Self::Node,
        gamma: &<Self::Kind as ParamKind>::Param,
        beta: &<Self::Kind as ParamKind>::Param,
        eps: f32,
    ) -> Result<Self::Node>;
    fn slice_cols(&mut self, x: &Self::Node, start: usize, len: usize) -> Result<Self::Node>;
    fn concat_cols(&mut self, parts: &[Self::Node]) -> Result<Self::Node>;
    fn slice_rows(&mut self, x: &Self::Node, start: usize, len: usize) -> Result<Self::Node>;
    fn concat_rows(&mut self, parts: &[Self::Node]) -> Result<Self::Node>;
    fn reshape(&mut self, x: &Self::Node, shape: &[usize]) -> Result<Self::Node>;
}

impl Backend for Tape {
    type Kind = OnTape;
    type Node = Var;

    fn value<'a>(&'a self, n: &'a Var) -> &'a Tensor {
        Tape::value(self, *n)
    }
    fn input(&mut self, t: Tensor) -> Var {
        self.leaf(t)
    }
    fn param(&mut self, p: &Var) -> Var {
        *p
    }
    fn embedding(&mut self, e: &Var) -> Result<Var> {
        Ok(*e)
    }
    fn linear(&mut self, x: &Var, w: &Var, b: &Var) -> Result<Var> {
        Tape::linear(self, *x, *w, *b)
    }
    fn matmul(&mut self, a: &Var, b: &Var) -> Result<Var> {
        Tape::matmul(self, *a, *b)
    }
    fn transpose(&mut self, a: &Var) -> Result<Var> {
        Tape::transpose(self, *a)
    }
    fn add(&mut self, a: &Var, b: &Var) -> Result<Var> {
        Tape::add(self, *a, *b)
    }
    fn scale(&mut self, a: &Var, c: f32) -> Var {
        Tape::scale(self, *a, c)
    }
    fn softmax(&mut self, a: &Var, axis: usize) -> Result<Var> {
        Tape::softmax(self, *a, axis)
    }
    fn gelu(&mut self, a: &Var) -> Var {
        Tape::gelu(self, *a)
    }
    fn relu(&mut self, a: &Var) -> Var {
        Tape::relu(self, *a)
    }
    fn layer_norm(&mut self, x: &Var, gamma: &Var, beta: &Var, eps: f32) -> Result<Var> {
        Tape::layer_norm(self, *x, *gamma, *beta, eps)
    }
    fn slice_cols(&mut self, x: &Var, start: usize, len: usize) -> Result<Var> {
        Tape::slice_cols(self, *x, start, len)
    }
    fn concat_cols(&mut self, parts: &[Var]) -> Result<Var> {
        Tape::concat_cols(self, parts)
    }
    fn slice_rows(&mut self, x: &Var, start: usize, len: usize) -> Result<Var> {
        Tape::slice_rows(self, *x, start, len)
    }
    fn concat_rows(&mut self, parts: &[Var]) -> Result<Var> {
        Tape::concat_rows(self, parts)
    }
    fn reshape(&mut self, x: &Var, shape: &[usize]) -> Result<Var> {
        Tape::reshape(self, *x, shape)
    }
}

/// Float inference without recording anything.
#[derive(Debug, Default, Clone, Copy)]
pub struct FloatEval;

/// Value-level operations shared by the eval backends; only `linear` and
/// the parameter lifts differ between float and quantized inference.
macro_rules! value_ops {
    () => {
        fn value<'a>(&'a self, n: &'a Tensor) -> &'a Tensor {
            n
        }
        fn input(&mut self, t: Tensor) -> Tensor {
            t
        }
        fn param(&mut self, p: &Tensor) -> Tensor {
            p.clone()
        }
        fn matmul(&mut self, a: &Tensor, b: &Tensor) -> Result<Tensor> {
            tensor::matmul(a, b)
        }
        fn transpose(&mut self, a: &Tensor) -> Result<Tensor> {
            tensor::transpose(a)
        }
        fn add(&mut self, a: &Tensor, b: &Tensor) -> Result<Tensor> {
            tensor::add(a, b)
        }
        fn scale(&mut self, a: &Tensor, c: f32) -> Tensor {
            tensor::scale(a, c)
        }
        fn softmax(&mut self, a: &Tensor, axis: usize) -> Result<Tensor> {
            tensor::softmax(a, axis)
        }
        fn gelu(&mut self, a: &Tensor) -> Tensor {
            tensor::gelu(a)
        }
        fn relu(&mut self, a: &Tensor) -> Tensor {
            tensor::relu(a)
        }
        fn layer_norm(
            &mut self,
            x: &Tensor,
            gamma: &Tensor,
            beta: &Tensor,
            eps: f32,
        ) -> Result<Tensor> {
            tensor::layer_norm(x, gamma, beta, eps)
        }
        fn slice_cols(&mut self, x: &Tensor, start: usize, len: usize) -> Result<Tensor> {
            tensor::slice_cols(x, start, len)
        }
        fn concat_cols(&mut self, parts: &[Tensor]) -> Result<Tensor> {
            tensor::concat_cols(&parts.iter().collect::<Vec<_>>())
        }
        fn slice_rows(&mut self, x: &Tensor, start: usize, len: usize) -> Result<Tensor> {
            tensor::slice_rows(x, start, len)
        }
        fn concat_rows(&mut self, parts: &[Tensor]) -> Result<Tensor> {
            tensor::concat_rows(&parts.iter().collect::<Vec<_>>())
        }
        fn reshape(&mut self, x: &Tensor, shape: &[usize]) -> Result<Tensor> {
            x.reshape(shape)
        }
    };
}
pub(crate) use value_ops;

impl Backend for FloatEval {
    type Kind = Float;
    type Node = Tensor;

    value_ops!();

    fn embedding(&mut self, e: &Tensor) -> Result<Tensor> {
        Ok(e.clone())
    }

    fn linear(&mut self, x: &Tensor, w: &Tensor, b: &Tensor) -> Result<Tensor> {
        tensor::linear(x, w, b)
    }
}

/// Swaps the tape handle of one named parameter for another handle, leaving
/// the rest untouched. Used to differentiate with respect to a single
/// parameter tensor.
pub struct Substitute<'a> {
    pub name: &'a str,
    pub var: Var,
}

impl Substitute<'_> {
    fn pick(&self, name: &str, current: Var) -> Var {
        if name == self.name {
            self.var
        } else {
            current
        }
    }
}

impl ParamMap<OnTape, OnTape> for Substitute<'_> {
    fn weight(&mut self, name: &str, w: &Var) -> Result<Var> {
        Ok(self.pick(name, *w))
    }
    fn param(&mut self, name: &str, p: &Var) -> Result<Var> {
        Ok(self.pick(name, *p))
    }
    fn embedding(&mut self, name: &str, e: &Var) -> Result<Var> {
        Ok(self.pick(name, *e))
    }
}
