//! Batched sparse erasure codes over multi-hop lossy networks.
//!
//! The library covers the full pipeline: GF(2^8) linear algebra ([`gf`]),
//! Tanner-graph construction — classical random sampling and the
//! structured cyclic-shift expansion of a small base graph ([`graph`]) —
//! batch encoding, recoding, and the belief-propagation, inactivation,
//! and layered decoders ([`codec`]), a multi-hop erasure channel with
//! recoding at intermediate nodes ([`channel`]), degree-distribution
//! optimization ([`degree_opt`]), decodability dependence diagnostics
//! ([`analysis`]), and a reproducible experiment harness
//! ([`experiment`]).

pub mod analysis;
pub mod channel;
pub mod codec;
pub mod degree_opt;
pub mod experiment;
pub mod gf;
pub mod graph;
pub mod presets;
pub mod seed;
