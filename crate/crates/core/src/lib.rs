//! Privacy-utility trade-offs for finite alphabets.
//!
//! A private variable `X` and a useful variable `Y` are jointly distributed;
//! an agent releases `U` and wants `I(U;Y)` large while keeping the leakage
//! about `X` below a budget. This crate provides:
//!
//! * [`probcore`]: distributions, kernels and information measures;
//! * [`mechanisms`]: functional-representation constructions of `U`;
//! * [`bounds`]: closed-form lower and upper bounds on the optimal utility;
//! * [`geometry`]: the extreme-point machinery of the leakage matrix `P_{X|Y}`;
//! * [`lpapprox`]: linear programs approximating the per-letter problems;
//! * [`oracle`]: exhaustive grid search used as ground truth on tiny instances.
//!
//! The guide in `book/` walks through each part with runnable examples; its
//! chapters are compiled as doctests of this crate.

#![allow(clippy::needless_range_loop)]

pub mod bounds;
pub mod error;
pub mod geometry;
pub mod lpapprox;
pub mod mechanisms;
pub mod oracle;
pub mod probcore;

pub use error::{Error, Result};
pub use probcore::{JointDist, Kernel, LogBase, ProbVec};

#[cfg(doctest)]
pub mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    pub mod introduction {}
    #[doc = include_str!("../../../book/src/distributions.md")]
    pub mod distributions {}
    #[doc = include_str!("../../../book/src/mechanisms.md")]
    pub mod mechanisms {}
    #[doc = include_str!("../../../book/src/bounds.md")]
    pub mod bounds {}
    #[doc = include_str!("../../../book/src/geometry.md")]
    pub mod geometry {}
    #[doc = include_str!("../../../book/src/linear-programs.md")]
    pub mod linear_programs {}
    #[doc = include_str!("../../../book/src/oracle.md")]
    pub mod oracle {}
    #[doc = include_str!("../../../book/src/command-line.md")]
    pub mod command_line {}
    #[doc = include_str!("../../../README.md")]
    pub mod readme {}
}
