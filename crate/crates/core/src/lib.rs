//! Construction, verification and analysis of PolarStar diameter-3 network
//! topologies: star products of Erdős–Rényi polarity graphs with
//! Inductive-Quad, Paley or complete supernodes.

pub mod analysis;
pub mod design;
pub mod factor;
pub mod galois;
pub mod graph;
pub mod sim;
pub mod star;
