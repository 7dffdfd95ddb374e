//! Convolutional multi-label classifier built from scratch: convolution and
//! pooling, dense layers with weight regularizers, sigmoid heads, binary
//! cross-entropy, Adam and backpropagation.

pub mod adam;
pub mod conv;
pub mod dense;
pub mod loss;
pub mod network;
pub mod regularizer;

pub use adam::{adam_step, AdamState};
pub use conv::{concat_pooled, conv_encode, max_over_time, relu, ConvFilterBank, ConvLayer};
pub use dense::{affine, dense_forward, Activation, DenseLayer, Mode};
pub use loss::{bce_loss, sample_bce, sigmoid, sigmoid_head};
pub use network::{Example, InputShape, LayerCoefficients, Network, NetworkHyper, Params, TensorSpec, TrainReport};
pub use regularizer::{coefficient_mask, dropconnect, nsw_coefficients, nsw_reduce, weight_stats, RegularizerConfig};
