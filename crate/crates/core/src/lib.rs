// `!(x > 0.0)` is used on purpose throughout: it rejects NaN as well.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod biphoton;
pub mod classical;
pub mod delay;
pub mod error;
pub mod formats;
pub mod modeops;
pub mod qfp;
pub mod special;

pub use error::{Error, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../README.md")]
    mod readme {}
    #[doc = include_str!("../../../book/src/conventions.md")]
    mod conventions {}
    #[doc = include_str!("../../../book/src/mode-transforms.md")]
    mod mode_transforms {}
    #[doc = include_str!("../../../book/src/classical.md")]
    mod classical {}
    #[doc = include_str!("../../../book/src/biphoton.md")]
    mod biphoton {}
    #[doc = include_str!("../../../book/src/qfp.md")]
    mod qfp {}
}
