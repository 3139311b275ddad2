pub mod dispersion;
pub mod error;
pub mod imaging;
pub mod jsa;
pub mod modes;
pub mod photonstats;
pub mod pipeline;
pub mod presets;
pub mod scene;
pub mod units;

pub use error::{Error, Result};

// Guide chapters are compiled as doc-tests so the book cannot drift from the API.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/overview.md")]
    mod overview {}
    #[doc = include_str!("../../../book/src/dispersion.md")]
    mod dispersion {}
    #[doc = include_str!("../../../book/src/jsa.md")]
    mod jsa {}
    #[doc = include_str!("../../../book/src/modes.md")]
    mod modes {}
    #[doc = include_str!("../../../book/src/photonstats.md")]
    mod photonstats {}
    #[doc = include_str!("../../../book/src/scene.md")]
    mod scene {}
    #[doc = include_str!("../../../book/src/imaging.md")]
    mod imaging {}
    #[doc = include_str!("../../../book/src/mraf.md")]
    mod mraf {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
