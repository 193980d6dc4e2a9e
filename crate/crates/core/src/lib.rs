//! Problem-decomposition methods for molecular electronic structure.
//!
//! Integrals come in through [`fcidump`], a closed-shell mean field is in
//! [`mean_field`], and [`solvers`] holds the exact and variational
//! correlated solvers. Three decompositions build on them:
//! density matrix embedding ([`dmet`]), fragment molecular orbitals
//! ([`fmo`]) and divide-and-conquer ([`dc`]). [`analysis`] ranks
//! methods against each other and quantifies measurement noise.

pub mod analysis;
pub mod dc;
pub mod dmet;
pub mod error;
pub mod fcidump;
pub mod fmo;
pub mod linalg;
pub mod mean_field;
pub mod partition;
pub mod qubit_map;
pub mod solvers;

pub use error::{Error, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/integrals.md")]
    mod integrals {}
    #[doc = include_str!("../../../book/src/solvers.md")]
    mod solvers {}
    #[doc = include_str!("../../../book/src/sampling.md")]
    mod sampling {}
    #[doc = include_str!("../../../book/src/dmet.md")]
    mod dmet {}
    #[doc = include_str!("../../../book/src/fmo.md")]
    mod fmo {}
    #[doc = include_str!("../../../book/src/dc.md")]
    mod dc {}
    #[doc = include_str!("../../../book/src/ranking.md")]
    mod ranking {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
