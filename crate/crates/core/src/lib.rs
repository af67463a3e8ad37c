//! Simultaneous renewal times of two independent time-inhomogeneous finite
//! Markov chains: simulation, exact propagation, dominating sequences and
//! upper bounds on `E[T]`.
//!
//! ```
//! use simrenew::kernel::{birth_death_schedule, BirthDeathSpec};
//! use simrenew::exact::product_tail;
//!
//! let s = birth_death_schedule(&BirthDeathSpec::constant(0.75, 6)).unwrap();
//! let start = simrenew::simulate::dirac(7, 0);
//! let law = product_tail(&s, &s, &start, &start, 2000, 10_000).unwrap();
//! assert!(law.mean_lower() > 1.0);
//! ```

pub mod bounds;
pub mod domination;
pub mod error;
pub mod exact;
pub mod kernel;
pub mod report;
pub mod scenario;
pub mod seed;
pub mod simulate;

pub use error::{Error, Result};
pub use kernel::{KernelSchedule, Matrix, StateSpace, Tail};
pub use report::{Bound, Estimate, Provenance};

/// The guide's code blocks, compiled and run as doctests.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/kernels.md")]
    mod kernels {}
    #[doc = include_str!("../../../book/src/renewals.md")]
    mod renewals {}
    #[doc = include_str!("../../../book/src/exact.md")]
    mod exact {}
    #[doc = include_str!("../../../book/src/domination.md")]
    mod domination {}
    #[doc = include_str!("../../../book/src/bounds.md")]
    mod bounds {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
