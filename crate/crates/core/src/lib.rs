//! Planning toolkit for secure multicast in hierarchical hybrid networks.
//!
//! * [`tree`]: complete D-ary tree model, leader probabilities and link
//!   reliability.
//! * [`prefix`]: Kraft sums, Huffman-optimal leader depths and canonical
//!   prefix-free paths.
//! * [`multicast`]: the same planning on an arbitrary weighted graph via its
//!   minimum spanning tree and an embedded binary tree.
//! * [`gossip`]: level-controlled gossip simulation and leveling-sectoring
//!   localization.
//! * [`fusion`]: fault-tolerant interval fusion (M, Ω, N and S).
//! * [`cli`]: the `hhcn` command-line front end.

pub mod cli;
pub mod exact;
pub mod fusion;
pub mod gossip;
pub mod multicast;
pub mod prefix;
pub mod rng;
pub mod tree;

pub use exact::{Exact, Rational};
