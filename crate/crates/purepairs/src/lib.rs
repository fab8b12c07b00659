//! Exact, certificate-producing algorithms around graph congestion, handle
//! decompositions, blockades, and pure-pair forcing.
//!
//! Everything here computes with exact rationals and returns witnesses that
//! can be re-verified independently of the algorithm that produced them. The
//! `examples/` directory of this crate is the guided tour; the `purepairs`
//! binary exposes the same operations as subcommands.

pub mod exact;
pub mod blockade;
pub mod buildable;
pub mod congestion;
pub mod experiment;
pub mod forcing;
pub mod graph;
pub mod machinery;
