pub mod binio;
pub mod cdl;
pub mod cli;
pub mod dataio;
pub mod error;
pub mod eval;
pub mod features;
pub mod fusion;
pub mod gmm;
mod linalg;
pub mod scores;
pub mod spectral;

pub use error::{Error, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/scenes.md")]
    mod scenes {}
    #[doc = include_str!("../../../book/src/features.md")]
    mod features {}
    #[doc = include_str!("../../../book/src/gmm.md")]
    mod gmm {}
    #[doc = include_str!("../../../book/src/cdl.md")]
    mod cdl {}
    #[doc = include_str!("../../../book/src/fusion.md")]
    mod fusion {}
    #[doc = include_str!("../../../book/src/evaluation.md")]
    mod evaluation {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
