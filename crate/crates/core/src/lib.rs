pub mod bernstein;
pub mod config;
pub mod dynamics;
pub mod error;
pub mod error_bound;
pub mod flowpipe;
pub mod interval;
pub mod lipschitz;
pub mod nn;
mod parallelepiped;
pub mod poly;
pub mod series;
pub mod simulate;
pub mod svg;
pub mod taylor;

pub use error::{Error, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/intervals.md")]
    mod intervals {}
    #[doc = include_str!("../../../book/src/networks.md")]
    mod networks {}
    #[doc = include_str!("../../../book/src/bernstein.md")]
    mod bernstein {}
    #[doc = include_str!("../../../book/src/taylor-models.md")]
    mod taylor_models {}
    #[doc = include_str!("../../../book/src/verification.md")]
    mod verification {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
