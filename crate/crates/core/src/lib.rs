//! A numerical laboratory for quantum channels.
//!
//! Every channel can be enlarged to a bistochastic channel (and further to
//! a unital one) without changing its minimal output entropy, maximal output
//! p-norm or convex closure of output entropy, even when tensored with an
//! arbitrary second channel. This crate builds those extensions and checks
//! the claims numerically at small dimension:
//!
//! - [`matrix`]: dense complex matrices, density matrices, entropy, Schatten
//!   norms, tensor products and partial traces.
//! - [`channel`]: Kraus-form channels, validation, generators.
//! - [`weyl`]: the discrete Weyl system and its twirl.
//! - [`extension`]: the bistochastic and unital extensions.
//! - [`solvers`]: minimal output entropy, maximal output p-norm and convex
//!   closure of output entropy by multi-start manifold descent, plus a
//!   brute-force sampling oracle.
//! - [`verify`]: the harness that assembles all checks into a report.

pub mod channel;
pub mod error;
pub mod extension;
pub mod matrix;
pub mod random;
pub mod solvers;
pub mod verify;
pub mod weyl;

pub use channel::{
    named_channel, random_channel, tensor_channel, Channel, ChannelKind, NamedChannel,
};
pub use error::{Error, Result};
pub use extension::{bistochastic_extension, embed_input, unital_extension, ExtensionBundle};
pub use matrix::{
    partial_trace, schatten_norm, tensor, von_neumann_entropy, ComplexMatrix, DensityMatrix,
    PureState, SchattenP, Subsystem,
};
pub use solvers::{convex_closure, max_output_pnorm, min_output_entropy, OptimizerConfig, Optimum};
pub use weyl::{build_weyl, GroupElement, WeylSystem};
