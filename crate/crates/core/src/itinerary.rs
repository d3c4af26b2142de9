//! Neighborhood systems and symbolic reading of trajectories.
//!
//! A [`NeighborhoodSet`] consists of disjoint balls around every equilibrium
//! and every connection witness, all inside the distance-δ tube around the
//! network. A trajectory *follows* a word `q_1 q_2 …` if there are times
//! `t_k < t'_k < t_{k+1}` with
//!
//! 1. the trajectory inside the tube for all `t > t_1`,
//! 2. `x(t_k)` in the ball of the source of `q_k` and `x(t'_k)` in the ball
//!    of `q_k`'s witness,
//! 3. no equilibrium ball other than the target of `q_k` visited between
//!    `t'_k` and `t'_{k+1}`.
//!
//! Because all balls are pairwise disjoint, a record's ball visits form a
//! totally ordered stream of intervals, and the existence of such times is
//! decided exactly by a small dynamic program over that stream. The verdict
//! is therefore assignment-free: if any valid time assignment exists, it is
//! found, and the reported certificate is the lexicographically earliest
//! one. Dropping a leading symbol, or truncating the word, can only remove
//! constraints, so prefix monotonicity and shift inclusion hold by
//! construction.

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::ItineraryError;
use crate::flow::{
    dist, EventKind, EventProbes, EventTarget, TrajectoryRecord, VectorField,
};
use crate::geometry::NetworkGeometry;
use crate::network::{ConnectionId, EquilibriumId, HeteroclinicNetwork};

/// Euclidean ball.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ball {
    pub center: Vec<f64>,
    pub radius: f64,
}

impl Ball {
    pub fn contains(&self, x: &[f64]) -> bool {
        dist(&self.center, x) < self.radius
    }
}

/// Per-ball radius overrides for [`make_neighborhoods`].
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RadiiOverrides {
    #[serde(default)]
    pub equilibria: BTreeMap<u32, f64>,
    #[serde(default)]
    pub connections: BTreeMap<u32, f64>,
}

/// Disjoint balls around equilibria and witnesses inside the δ-tube.
#[derive(Debug, Clone)]
pub struct NeighborhoodSet {
    delta: f64,
    equilibrium_balls: BTreeMap<EquilibriumId, Ball>,
    connection_balls: BTreeMap<ConnectionId, Ball>,
    geometry: Arc<NetworkGeometry>,
    sources: BTreeMap<ConnectionId, EquilibriumId>,
    targets: BTreeMap<ConnectionId, EquilibriumId>,
}

/// Fraction of δ used as the default ball radius. Kept close to the tube
/// radius so trajectories anywhere in the tube still register ball visits.
const DEFAULT_RADIUS_FACTOR: f64 = 0.9;
/// Hard cap on any radius relative to δ (balls must stay inside the tube).
const MAX_RADIUS_FACTOR: f64 = 0.95;
/// Shrink target when balls collide: fraction of the smallest center gap.
const COLLISION_SHRINK_FACTOR: f64 = 0.4;

/// Builds the neighborhood system.
///
/// Witness centers are snapped to the nearest vertex of their connection's
/// polyline so that every ball center lies on the sampled network. Default
/// radii are `0.9 δ`; if any two balls would overlap, all radii shrink to
/// `0.4×` the smallest center distance. The polylines are refined until no
/// segment exceeds `δ/10` so the tube boundary is resolved.
pub fn make_neighborhoods(
    net: &HeteroclinicNetwork,
    geometry: &NetworkGeometry,
    delta: f64,
    overrides: Option<&RadiiOverrides>,
) -> Result<NeighborhoodSet, ItineraryError> {
    if !(delta > 0.0) {
        return Err(ItineraryError::EmptyTube(delta));
    }
    let geometry = geometry.refined(delta / 10.0);
    check_tube_width(net, &geometry, delta)?;

    let default_radius = DEFAULT_RADIUS_FACTOR * delta;
    let cap = MAX_RADIUS_FACTOR * delta;

    let mut equilibrium_balls = BTreeMap::new();
    for eq in net.equilibria() {
        let radius = overrides
            .and_then(|o| o.equilibria.get(&eq.id.0).copied())
            .unwrap_or(default_radius)
            .min(cap);
        equilibrium_balls.insert(eq.id, Ball { center: eq.position.clone(), radius });
    }
    let mut connection_balls = BTreeMap::new();
    for conn in net.connections() {
        let line = geometry
            .polyline(conn.id)
            .ok_or(ItineraryError::MissingPolyline(conn.id.0))?;
        // Snap the witness onto the sampled orbit.
        let center = line
            .points
            .iter()
            .min_by(|a, b| {
                dist(a, &conn.witness)
                    .partial_cmp(&dist(b, &conn.witness))
                    .unwrap()
            })
            .expect("polylines are nonempty")
            .clone();
        let radius = overrides
            .and_then(|o| o.connections.get(&conn.id.0).copied())
            .unwrap_or(default_radius)
            .min(cap);
        connection_balls.insert(conn.id, Ball { center, radius });
    }

    // Enforce pairwise disjointness by the shrink rule.
    let balls: Vec<&Ball> = equilibrium_balls
        .values()
        .chain(connection_balls.values())
        .collect();
    let mut min_gap = f64::INFINITY;
    let mut collides = false;
    for i in 0..balls.len() {
        for j in i + 1..balls.len() {
            let gap = dist(&balls[i].center, &balls[j].center);
            min_gap = min_gap.min(gap);
            if gap <= balls[i].radius + balls[j].radius {
                collides = true;
            }
        }
    }
    if collides {
        let shrunk = COLLISION_SHRINK_FACTOR * min_gap;
        for ball in equilibrium_balls.values_mut().chain(connection_balls.values_mut()) {
            ball.radius = ball.radius.min(shrunk);
        }
    }

    Ok(NeighborhoodSet {
        delta,
        equilibrium_balls,
        connection_balls,
        geometry: Arc::new(geometry),
        sources: net.connections().iter().map(|c| (c.id, c.source)).collect(),
        targets: net.connections().iter().map(|c| (c.id, c.target)).collect(),
    })
}

/// Flags tube radii so large that tubes around distinct connections merge
/// away from their shared equilibria.
fn check_tube_width(
    net: &HeteroclinicNetwork,
    geometry: &NetworkGeometry,
    delta: f64,
) -> Result<(), ItineraryError> {
    let conns = net.connections();
    for i in 0..conns.len() {
        for j in i + 1..conns.len() {
            let (a, b) = (&conns[i], &conns[j]);
            let shared: Vec<&Vec<f64>> = [a.source, a.target]
                .iter()
                .filter(|id| **id == b.source || **id == b.target)
                .filter_map(|id| geometry.equilibrium_position(*id))
                .collect();
            let line_a = match geometry.polyline(a.id) {
                Some(l) => l,
                None => continue,
            };
            let line_b = match geometry.polyline(b.id) {
                Some(l) => l,
                None => continue,
            };
            let exclusion = 3.0 * delta;
            let mut min_gap = f64::INFINITY;
            for p in &line_a.points {
                if shared.iter().any(|s| dist(p, s) < exclusion) {
                    continue;
                }
                for q in &line_b.points {
                    if shared.iter().any(|s| dist(q, s) < exclusion) {
                        continue;
                    }
                    min_gap = min_gap.min(dist(p, q));
                }
            }
            if min_gap < 2.0 * delta {
                return Err(ItineraryError::TubeSelfIntersects {
                    delta,
                    a: a.id.0,
                    b: b.id.0,
                    distance: min_gap,
                });
            }
        }
    }
    Ok(())
}

impl NeighborhoodSet {
    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn geometry(&self) -> &NetworkGeometry {
        &self.geometry
    }

    pub fn equilibrium_ball(&self, id: EquilibriumId) -> Option<&Ball> {
        self.equilibrium_balls.get(&id)
    }

    pub fn connection_ball(&self, id: ConnectionId) -> Option<&Ball> {
        self.connection_balls.get(&id)
    }

    pub fn equilibrium_balls(&self) -> &BTreeMap<EquilibriumId, Ball> {
        &self.equilibrium_balls
    }

    pub fn connection_balls(&self) -> &BTreeMap<ConnectionId, Ball> {
        &self.connection_balls
    }

    pub fn source_of(&self, id: ConnectionId) -> Option<EquilibriumId> {
        self.sources.get(&id).copied()
    }

    pub fn target_of(&self, id: ConnectionId) -> Option<EquilibriumId> {
        self.targets.get(&id).copied()
    }

    /// Step cap keeping ball transits resolvable: half the smallest radius
    /// over the largest field speed seen at the ball centers.
    pub fn suggested_max_step(&self, field: &VectorField) -> f64 {
        let min_radius = self
            .equilibrium_balls
            .values()
            .chain(self.connection_balls.values())
            .map(|b| b.radius)
            .fold(f64::INFINITY, f64::min);
        let max_speed = self
            .connection_balls
            .values()
            .map(|b| crate::flow::norm(&field.eval(&b.center)))
            .fold(1e-6, f64::max);
        (0.5 * min_radius / max_speed).min(1.0)
    }
}

impl EventProbes for NeighborhoodSet {
    fn targets(&self) -> Vec<EventTarget> {
        let mut out = vec![EventTarget::Tube];
        out.extend(self.equilibrium_balls.keys().map(|&id| EventTarget::Equilibrium(id)));
        out.extend(self.connection_balls.keys().map(|&id| EventTarget::Connection(id)));
        out
    }

    fn value(&self, target: EventTarget, state: &[f64]) -> f64 {
        match target {
            EventTarget::Tube => self.delta - self.geometry.distance_to_network(state),
            EventTarget::Equilibrium(id) => {
                let ball = &self.equilibrium_balls[&id];
                ball.radius - dist(&ball.center, state)
            }
            EventTarget::Connection(id) => {
                let ball = &self.connection_balls[&id];
                ball.radius - dist(&ball.center, state)
            }
        }
    }
}

/// One stay inside a ball.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Visit {
    pub target: EventTarget,
    pub enter: f64,
    pub exit: f64,
}

impl Visit {
    pub fn midpoint(&self) -> f64 {
        0.5 * (self.enter + self.exit)
    }
}

/// A record reduced to its ordered ball-visit intervals and tube timing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VisitStream {
    /// Ball visits ordered by entry time. Balls are disjoint, so the
    /// intervals are pairwise non-overlapping.
    pub visits: Vec<Visit>,
    /// Start of the final tube stay, if that stay lasts to the record's end.
    pub settle_time: Option<f64>,
    pub end_time: f64,
}

impl VisitStream {
    pub fn from_record(record: &TrajectoryRecord) -> Self {
        let end_time = record.end_time();
        let mut open: BTreeMap<EventTarget, f64> = BTreeMap::new();
        let mut visits = Vec::new();
        for event in &record.events {
            match event.kind {
                EventKind::Enter => {
                    open.insert(event.target, event.time);
                }
                EventKind::Exit => {
                    if let Some(enter) = open.remove(&event.target) {
                        if event.target != EventTarget::Tube {
                            visits.push(Visit { target: event.target, enter, exit: event.time });
                        }
                    }
                }
            }
        }
        // Whatever is still open at the record's end closes there; an open
        // tube stay is exactly the settled phase.
        let mut settle_time = None;
        for (target, enter) in open {
            match target {
                EventTarget::Tube => settle_time = Some(enter),
                _ => visits.push(Visit { target, enter, exit: end_time }),
            }
        }
        visits.sort_by(|a, b| a.enter.partial_cmp(&b.enter).unwrap());
        Self { visits, settle_time, end_time }
    }

    fn is_equilibrium(&self, index: usize) -> Option<EquilibriumId> {
        match self.visits[index].target {
            EventTarget::Equilibrium(id) => Some(id),
            _ => None,
        }
    }

    fn is_connection(&self, index: usize) -> Option<ConnectionId> {
        match self.visits[index].target {
            EventTarget::Connection(id) => Some(id),
            _ => None,
        }
    }

    /// Index of the first visit lying in the settled tube stay.
    fn settled_start(&self) -> Option<usize> {
        let settle = self.settle_time?;
        Some(
            self.visits
                .partition_point(|v| v.midpoint() < settle),
        )
    }
}

/// Conditions of the follow definition, for violation reports.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FollowCondition {
    /// Stay inside the tube from the anchor time on.
    StayInTube,
    /// Reach the required source ball then witness ball, in order.
    VisitOrder,
    /// No foreign equilibrium ball between consecutive witness times.
    NoForeignPassage,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum FollowVerdict {
    /// The full requested prefix is certified; `matched` is its length.
    Follows { matched: usize },
    Violated {
        condition: FollowCondition,
        time: f64,
        detail: String,
    },
}

impl FollowVerdict {
    pub fn is_follows(&self) -> bool {
        matches!(self, FollowVerdict::Follows { .. })
    }
}

/// Witnessed times for a followed prefix, or the first obstruction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FollowCertificate {
    pub word: Vec<ConnectionId>,
    /// `t_k`: a time inside the source ball of symbol `k`.
    pub entry_times: Vec<f64>,
    /// `t'_k`: a time inside the witness ball of symbol `k`.
    pub witness_times: Vec<f64>,
    pub verdict: FollowVerdict,
}

/// Decides whether the trajectory follows `word` inside the neighborhood
/// system. See the module docs for the exact predicate.
pub fn follows(
    record: &TrajectoryRecord,
    word: &[ConnectionId],
    nbhd: &NeighborhoodSet,
) -> Result<FollowCertificate, ItineraryError> {
    follows_stream(&VisitStream::from_record(record), word, nbhd)
}

/// [`follows`] on a pre-extracted visit stream.
pub fn follows_stream(
    stream: &VisitStream,
    word: &[ConnectionId],
    nbhd: &NeighborhoodSet,
) -> Result<FollowCertificate, ItineraryError> {
    for &q in word {
        if nbhd.source_of(q).is_none() {
            return Err(ItineraryError::UnknownConnection(q.0));
        }
    }
    let no_equilibrium_visit = stream
        .visits
        .iter()
        .all(|v| !matches!(v.target, EventTarget::Equilibrium(_)));
    if no_equilibrium_visit && !word.is_empty() {
        return Err(ItineraryError::NoAnchor);
    }

    let start = match stream.settled_start() {
        Some(s) => s,
        None => {
            return Ok(FollowCertificate {
                word: word.to_vec(),
                entry_times: Vec::new(),
                witness_times: Vec::new(),
                verdict: FollowVerdict::Violated {
                    condition: FollowCondition::StayInTube,
                    time: stream.end_time,
                    detail: "trajectory is outside the tube at the end of the record".into(),
                },
            });
        }
    };

    if word.is_empty() {
        return Ok(FollowCertificate {
            word: Vec::new(),
            entry_times: Vec::new(),
            witness_times: Vec::new(),
            verdict: FollowVerdict::Follows { matched: 0 },
        });
    }

    // Feasible witness-visit indices per symbol, with parent pointers for
    // certificate reconstruction.
    let n = stream.visits.len();
    let mut layers: Vec<BTreeMap<usize, Option<usize>>> = Vec::with_capacity(word.len());

    // Layer 0: any witness visit of word[0] preceded (within the settled
    // stay) by a visit to the source ball.
    let source0 = nbhd.source_of(word[0]).unwrap();
    let mut seen_anchor = false;
    let mut layer0 = BTreeMap::new();
    for idx in start..n {
        if stream.is_equilibrium(idx) == Some(source0) {
            seen_anchor = true;
        } else if stream.is_connection(idx) == Some(word[0]) && seen_anchor {
            layer0.insert(idx, None);
        }
    }
    layers.push(layer0);

    for k in 1..word.len() {
        if layers[k - 1].is_empty() {
            break;
        }
        // Between witness k-1 and witness k only the target of symbol k-1
        // may be visited, and the anchor of symbol k must be that same
        // equilibrium; if the word is not a path, no assignment exists.
        let allowed = nbhd.target_of(word[k - 1]).unwrap();
        let needed = nbhd.source_of(word[k]).unwrap();
        let mut layer = BTreeMap::new();
        if allowed == needed {
            for (&j, _) in layers[k - 1].iter() {
                let mut seen_u = false;
                for idx in j + 1..n {
                    if let Some(eq) = stream.is_equilibrium(idx) {
                        if eq == allowed {
                            seen_u = true;
                        } else {
                            break; // foreign passage: later witnesses are blocked
                        }
                    } else if stream.is_connection(idx) == Some(word[k]) && seen_u {
                        layer.entry(idx).or_insert(Some(j));
                    }
                }
            }
        }
        layers.push(layer);
    }

    let matched = layers.iter().take_while(|l| !l.is_empty()).count();
    if matched == word.len() {
        // Lexicographically earliest chain via the stored parents.
        let mut chain = vec![0usize; word.len()];
        let (&last, &parent) = layers[word.len() - 1].iter().next().unwrap();
        chain[word.len() - 1] = last;
        let mut parent = parent;
        for k in (0..word.len() - 1).rev() {
            let j = parent.expect("non-root layers have parents");
            chain[k] = j;
            parent = *layers[k].get(&j).unwrap();
        }
        let mut entry_times = Vec::with_capacity(word.len());
        let mut witness_times = Vec::with_capacity(word.len());
        for (k, &j) in chain.iter().enumerate() {
            let lower = if k == 0 { start } else { chain[k - 1] + 1 };
            let source = nbhd.source_of(word[k]).unwrap();
            let anchor = (lower..j)
                .find(|&idx| stream.is_equilibrium(idx) == Some(source))
                .expect("feasible witness has a preceding source visit");
            entry_times.push(stream.visits[anchor].midpoint());
            witness_times.push(stream.visits[j].midpoint());
        }
        return Ok(FollowCertificate {
            word: word.to_vec(),
            entry_times,
            witness_times,
            verdict: FollowVerdict::Follows { matched },
        });
    }

    // Diagnose the first failing symbol from the earliest viable position.
    let verdict = diagnose(stream, word, nbhd, &layers, matched, start);
    Ok(FollowCertificate {
        word: word.to_vec(),
        entry_times: Vec::new(),
        witness_times: Vec::new(),
        verdict,
    })
}

fn diagnose(
    stream: &VisitStream,
    word: &[ConnectionId],
    nbhd: &NeighborhoodSet,
    layers: &[BTreeMap<usize, Option<usize>>],
    matched: usize,
    start: usize,
) -> FollowVerdict {
    let n = stream.visits.len();
    let k = matched; // first symbol with an empty layer
    let from = if k == 0 {
        start
    } else {
        layers[k - 1].keys().next().map(|&j| j + 1).unwrap_or(start)
    };
    let needed = nbhd.source_of(word[k]).unwrap();
    let mut seen_u = false;
    for idx in from..n {
        if let Some(eq) = stream.is_equilibrium(idx) {
            if eq == needed {
                seen_u = true;
            } else if k > 0 {
                return FollowVerdict::Violated {
                    condition: FollowCondition::NoForeignPassage,
                    time: stream.visits[idx].enter,
                    detail: format!(
                        "equilibrium ball {} entered between witness visits while following symbol {} (connection {})",
                        eq.0,
                        k + 1,
                        word[k].0
                    ),
                };
            }
        } else if stream.is_connection(idx) == Some(word[k]) && seen_u {
            // Reachable in isolation; the block must have been upstream.
            break;
        }
    }
    FollowVerdict::Violated {
        condition: FollowCondition::VisitOrder,
        time: stream.end_time,
        detail: format!(
            "no admissible source-then-witness visit pair for symbol {} (connection {})",
            k + 1,
            word[k].0
        ),
    }
}

/// Maximal word a record realizes: the witness visits in order from the
/// last time the trajectory enters the tube and stays.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaximalItinerary {
    pub word: Vec<ConnectionId>,
    /// When the trajectory entered the tube for its final stay.
    pub entry_time: f64,
    /// The record's end; permanence is only known up to here.
    pub record_end: f64,
}

/// Reads the maximal itinerary of a record, truncated to `horizon` symbols.
pub fn extract_maximal_itinerary(
    record: &TrajectoryRecord,
    horizon: usize,
) -> Result<MaximalItinerary, ItineraryError> {
    extract_from_stream(&VisitStream::from_record(record), horizon)
}

/// [`extract_maximal_itinerary`] on a pre-extracted stream.
pub fn extract_from_stream(
    stream: &VisitStream,
    horizon: usize,
) -> Result<MaximalItinerary, ItineraryError> {
    let entry_time = stream.settle_time.ok_or(ItineraryError::NeverSettles)?;
    let start = stream.settled_start().unwrap();
    let word: Vec<ConnectionId> = stream.visits[start..]
        .iter()
        .filter_map(|v| match v.target {
            EventTarget::Connection(id) => Some(id),
            _ => None,
        })
        .take(horizon)
        .collect();
    Ok(MaximalItinerary { word, entry_time, record_end: stream.end_time })
}

/// Checks that certifying a word also certifies the word with its first
/// symbol dropped (vacuously true when the word is not certified).
pub fn shift_consistency_check(
    record: &TrajectoryRecord,
    word: &[ConnectionId],
    nbhd: &NeighborhoodSet,
) -> Result<bool, ItineraryError> {
    let stream = VisitStream::from_record(record);
    let full = follows_stream(&stream, word, nbhd)?;
    if !full.verdict.is_follows() || word.is_empty() {
        return Ok(true);
    }
    let shifted = follows_stream(&stream, &word[1..], nbhd)?;
    Ok(shifted.verdict.is_follows())
}

/// Shared helpers for tests in this crate.
#[cfg(test)]
pub(crate) mod tests_support {
    use super::*;
    use crate::network::kirk_silber_graph;

    /// Neighborhood set over the graph-level geometry (straight-line
    /// polylines between endpoint positions through the witness).
    pub(crate) fn ks_neighborhoods(delta: f64) -> NeighborhoodSet {
        let net = kirk_silber_graph();
        let mut lines = BTreeMap::new();
        for conn in net.connections() {
            let a = net.equilibrium(conn.source).unwrap().position.clone();
            let b = net.equilibrium(conn.target).unwrap().position.clone();
            lines.insert(conn.id, vec![a, conn.witness.clone(), b]);
        }
        let geometry = NetworkGeometry::from_polylines(&net, lines);
        make_neighborhoods(&net, &geometry, delta, None).unwrap()
    }
}
