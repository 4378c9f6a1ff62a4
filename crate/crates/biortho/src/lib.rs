//! Biorthogonal measures with double contour integral kernels: the symbol
//! W_N, its kernels, the Fredholm determinants that compute multiplicative
//! averages, and Monte Carlo oracles for the polymer and matrix models that
//! realize them.

pub mod error;
pub mod fredholm;
pub mod invariants;
pub mod kernels;
mod linalg;
pub mod models;
pub mod quadrature;
pub mod samplers;
pub mod specfun;

pub use error::{Error, Result};
pub use fredholm::SigmaSpec;
pub use kernels::KernelContext;
pub use models::{make_symbol, ModelKind, ModelParams, ModelSymbol};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    pub struct Introduction;
    #[doc = include_str!("../../../book/src/symbols.md")]
    pub struct Symbols;
    #[doc = include_str!("../../../book/src/kernels.md")]
    pub struct Kernels;
    #[doc = include_str!("../../../book/src/determinants.md")]
    pub struct Determinants;
    #[doc = include_str!("../../../book/src/polymers.md")]
    pub struct Polymers;
    #[doc = include_str!("../../../book/src/zero-temperature.md")]
    pub struct ZeroTemperature;
    #[doc = include_str!("../../../book/src/log-derivative.md")]
    pub struct LogDerivative;
    #[doc = include_str!("../../../book/src/cli.md")]
    pub struct Cli;
}
