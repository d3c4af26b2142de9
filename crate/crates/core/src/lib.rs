//! Simulation and symbolic analysis of dynamics near heteroclinic networks.
//!
//! The crate covers the full pipeline from a declared network to stability
//! statistics:
//!
//! - [`network`] — networks as labeled directed multigraphs, symbolic
//!   sequences over connection labels, the shift operator, and cycle-level
//!   recodings.
//! - [`flow`] — vector fields (built-in families and user polynomials), an
//!   adaptive Runge-Kutta integrator with dense output and boundary-crossing
//!   event location, and finite-difference linearization.
//! - [`geometry`] — polyline samplings of the connecting orbits and
//!   distance-to-network queries.
//! - [`itinerary`] — tube and ball neighborhoods, the follows-a-word
//!   certificate, and maximal itinerary extraction from trajectories.
//! - [`returnmap`] — the local saddle passage model `δ ↦ ĉ δ^ν`, passage
//!   times, closed-form multi-turn times, and turn-count relations between
//!   two competing cycles.
//! - [`basin`] — seeded Monte Carlo estimation of how many initial
//!   conditions follow, and are attracted along, a given sequence, plus a
//!   census of realized itineraries.
//! - [`specfile`] — the JSON network/field declaration format.
//!
//! Everything is deterministic for a fixed seed: sample generation is
//! sequential, per-sample work is pure, and parallel batches reduce in
//! sample order.

pub mod basin;
pub mod error;
pub mod flow;
pub mod geometry;
pub mod itinerary;
pub mod network;
pub mod returnmap;
pub mod specfile;

pub use error::{Error, Result};
pub use network::{
    Connection, ConnectionId, CycleCoding, Equilibrium, EquilibriumId, HeteroclinicNetwork,
    SymbolSequence,
};
