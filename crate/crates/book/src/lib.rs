//! Runs the code listings of the guide in `book/src` and of the README as doctests.

#[doc = include_str!("../../../README.md")]
mod readme {}

#[doc = include_str!("../../../book/src/introduction.md")]
mod introduction {}

#[doc = include_str!("../../../book/src/networks.md")]
mod networks {}

#[doc = include_str!("../../../book/src/equilibria.md")]
mod equilibria {}

#[doc = include_str!("../../../book/src/criteria.md")]
mod criteria {}

#[doc = include_str!("../../../book/src/simulation.md")]
mod simulation {}

#[doc = include_str!("../../../book/src/studies.md")]
mod studies {}

#[doc = include_str!("../../../book/src/cli.md")]
mod cli {}
