//! Differentiable interpreters whose programs call a shared library of
//! trainable neural functions.

pub mod error;
pub mod terpret;

pub use error::{Error, Result};
pub mod arith;
mod binio;
pub mod neural;
pub mod perception;
pub mod model_2x2;
pub mod model_math;
pub mod tasks;
pub mod check;
pub mod trainer;

// Book chapters, compiled and run as doctests.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/marginal-semantics.md")]
    mod marginal_semantics {}
    #[doc = include_str!("../../../book/src/models.md")]
    mod models {}
    #[doc = include_str!("../../../book/src/grid.md")]
    mod grid {}
    #[doc = include_str!("../../../book/src/math.md")]
    mod math {}
    #[doc = include_str!("../../../book/src/library.md")]
    mod library {}
    #[doc = include_str!("../../../book/src/training.md")]
    mod training {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
