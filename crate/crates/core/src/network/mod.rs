//! Directed multigraphs of equilibria and connecting orbits.
//!
//! A heteroclinic network is stored as a labeled directed multigraph: nodes
//! are hyperbolic equilibria, edges are connecting trajectories. Symbolic
//! itineraries over the edge labels live in [`sequence`], cycle-level
//! recodings in [`coding`].

mod coding;
mod instances;
mod sequence;

pub use coding::CycleCoding;
pub use instances::{
    double_homoclinic, kirk_silber_coding, kirk_silber_graph, podvigina_coding, podvigina_graph,
};
pub use sequence::{
    canonical_word_form, shift_related_words, GeneratorRule, Periodicity, SymbolSequence,
    ValidationOutcome, WordForm,
};

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use serde::{Deserialize, Serialize};

use crate::error::{NetworkError, SequenceError};

/// Integer label of an equilibrium.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EquilibriumId(pub u32);

/// Integer label of a connecting orbit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ConnectionId(pub u32);

impl std::fmt::Display for EquilibriumId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl std::fmt::Display for ConnectionId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// A hyperbolic equilibrium of the flow.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Equilibrium {
    pub id: EquilibriumId,
    /// Point in state space, dimension equals the network's ambient dimension.
    pub position: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
}

/// A trajectory connecting two equilibria (possibly the same one).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Connection {
    pub id: ConnectionId,
    /// Where the orbit comes from in backward time.
    pub source: EquilibriumId,
    /// Where the orbit goes in forward time.
    pub target: EquilibriumId,
    /// A marked point on the orbit, distinct from both endpoints.
    pub witness: Vec<f64>,
}

/// A connected union of equilibria and connecting orbits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeteroclinicNetwork {
    ambient_dim: usize,
    equilibria: Vec<Equilibrium>,
    connections: Vec<Connection>,
}

impl HeteroclinicNetwork {
    /// Validates and assembles a network.
    ///
    /// Checks id uniqueness, endpoint resolution, dimensions, witness
    /// placement, and connectivity of the underlying undirected graph.
    pub fn new(
        ambient_dim: usize,
        equilibria: Vec<Equilibrium>,
        connections: Vec<Connection>,
    ) -> Result<Self, NetworkError> {
        if equilibria.is_empty() {
            return Err(NetworkError::Empty);
        }
        let mut seen = BTreeSet::new();
        for eq in &equilibria {
            if !seen.insert(eq.id) {
                return Err(NetworkError::DuplicateEquilibrium(eq.id.0));
            }
            if eq.position.len() != ambient_dim {
                return Err(NetworkError::DimensionMismatch {
                    id: eq.id.0,
                    got: eq.position.len(),
                    expected: ambient_dim,
                });
            }
        }
        let mut seen_conn = BTreeSet::new();
        for conn in &connections {
            if !seen_conn.insert(conn.id) {
                return Err(NetworkError::DuplicateConnection(conn.id.0));
            }
            for endpoint in [conn.source, conn.target] {
                if !seen.contains(&endpoint) {
                    return Err(NetworkError::DanglingEndpoint {
                        connection: conn.id.0,
                        endpoint: endpoint.0,
                    });
                }
            }
            if conn.witness.len() != ambient_dim {
                return Err(NetworkError::WitnessDimension {
                    connection: conn.id.0,
                    got: conn.witness.len(),
                    expected: ambient_dim,
                });
            }
            for eq in &equilibria {
                let gap: f64 = conn
                    .witness
                    .iter()
                    .zip(&eq.position)
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum::<f64>()
                    .sqrt();
                if gap == 0.0 {
                    return Err(NetworkError::WitnessAtEquilibrium {
                        connection: conn.id.0,
                        equilibrium: eq.id.0,
                    });
                }
            }
        }

        let net = Self { ambient_dim, equilibria, connections };
        net.check_connected()?;
        Ok(net)
    }

    /// Undirected breadth-first reachability from the first equilibrium.
    fn check_connected(&self) -> Result<(), NetworkError> {
        let root = self.equilibria[0].id;
        let mut adjacency: BTreeMap<EquilibriumId, Vec<EquilibriumId>> = BTreeMap::new();
        for conn in &self.connections {
            adjacency.entry(conn.source).or_default().push(conn.target);
            adjacency.entry(conn.target).or_default().push(conn.source);
        }
        let mut visited = BTreeSet::from([root]);
        let mut queue = VecDeque::from([root]);
        while let Some(node) = queue.pop_front() {
            for &next in adjacency.get(&node).into_iter().flatten() {
                if visited.insert(next) {
                    queue.push_back(next);
                }
            }
        }
        for eq in &self.equilibria {
            if !visited.contains(&eq.id) {
                return Err(NetworkError::Disconnected(eq.id.0, root.0));
            }
        }
        Ok(())
    }

    pub fn ambient_dim(&self) -> usize {
        self.ambient_dim
    }

    pub fn equilibria(&self) -> &[Equilibrium] {
        &self.equilibria
    }

    pub fn connections(&self) -> &[Connection] {
        &self.connections
    }

    pub fn equilibrium(&self, id: EquilibriumId) -> Option<&Equilibrium> {
        self.equilibria.iter().find(|e| e.id == id)
    }

    pub fn connection(&self, id: ConnectionId) -> Option<&Connection> {
        self.connections.iter().find(|c| c.id == id)
    }

    /// Source equilibrium of a connection (its backward limit).
    pub fn alpha(&self, id: ConnectionId) -> Result<EquilibriumId, SequenceError> {
        self.connection(id)
            .map(|c| c.source)
            .ok_or(SequenceError::UnknownSymbol(id.0))
    }

    /// Target equilibrium of a connection (its forward limit).
    pub fn omega(&self, id: ConnectionId) -> Result<EquilibriumId, SequenceError> {
        self.connection(id)
            .map(|c| c.target)
            .ok_or(SequenceError::UnknownSymbol(id.0))
    }

    /// Checks that consecutive symbols chain head to tail.
    ///
    /// Returns `Valid`, or `InvalidAt(i)` with the first index `i >= 1` whose
    /// symbol does not continue from its predecessor. The empty word is valid.
    pub fn validate_word(&self, word: &[ConnectionId]) -> Result<ValidationOutcome, SequenceError> {
        for &symbol in word {
            if self.connection(symbol).is_none() {
                return Err(SequenceError::UnknownSymbol(symbol.0));
            }
        }
        for (i, pair) in word.windows(2).enumerate() {
            if self.omega(pair[0])? != self.alpha(pair[1])? {
                return Ok(ValidationOutcome::InvalidAt(i + 1));
            }
        }
        Ok(ValidationOutcome::Valid)
    }

    /// Checks a sequence up to `horizon` symbols.
    pub fn validate_sequence(
        &self,
        seq: &SymbolSequence,
        horizon: usize,
    ) -> Result<ValidationOutcome, SequenceError> {
        let prefix = seq.prefix(horizon);
        self.validate_word(&prefix)
    }

    /// Equilibria with two or more outgoing connections; the only places a
    /// trajectory near the network has a choice to make.
    pub fn distribution_nodes(&self) -> BTreeSet<EquilibriumId> {
        let mut out_degree: BTreeMap<EquilibriumId, usize> = BTreeMap::new();
        for conn in &self.connections {
            *out_degree.entry(conn.source).or_insert(0) += 1;
        }
        out_degree
            .into_iter()
            .filter(|&(_, deg)| deg >= 2)
            .map(|(id, _)| id)
            .collect()
    }

    /// Equilibria and connections appearing in the sequence's inspected
    /// prefix. Exact for finite and eventually periodic sequences when the
    /// horizon covers head and tail.
    pub fn invariant_set(
        &self,
        seq: &SymbolSequence,
        horizon: usize,
    ) -> Result<InvariantSet, SequenceError> {
        let symbols = match seq.exact_symbol_support() {
            Some(support) => support,
            None => seq.prefix(horizon),
        };
        let mut connections = BTreeSet::new();
        let mut equilibria = BTreeSet::new();
        for symbol in symbols {
            if self.connection(symbol).is_none() {
                return Err(SequenceError::UnknownSymbol(symbol.0));
            }
            connections.insert(symbol);
            equilibria.insert(self.alpha(symbol)?);
            equilibria.insert(self.omega(symbol)?);
        }
        Ok(InvariantSet { equilibria, connections })
    }

    /// Bounding box of all equilibrium positions and witnesses.
    pub fn bounding_box(&self) -> (Vec<f64>, Vec<f64>) {
        let mut lo = vec![f64::INFINITY; self.ambient_dim];
        let mut hi = vec![f64::NEG_INFINITY; self.ambient_dim];
        let points = self
            .equilibria
            .iter()
            .map(|e| &e.position)
            .chain(self.connections.iter().map(|c| &c.witness));
        for p in points {
            for (i, &v) in p.iter().enumerate() {
                lo[i] = lo[i].min(v);
                hi[i] = hi[i].max(v);
            }
        }
        (lo, hi)
    }
}

/// The part of the network a sequence actually visits.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InvariantSet {
    pub equilibria: BTreeSet<EquilibriumId>,
    pub connections: BTreeSet<ConnectionId>,
}

impl InvariantSet {
    pub fn is_subset_of(&self, other: &InvariantSet) -> bool {
        self.equilibria.is_subset(&other.equilibria)
            && self.connections.is_subset(&other.connections)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ks() -> HeteroclinicNetwork {
        kirk_silber_graph()
    }

    fn ids(word: &[u32]) -> Vec<ConnectionId> {
        word.iter().map(|&q| ConnectionId(q)).collect()
    }

    #[test]
    fn kirk_silber_has_four_equilibria_five_connections() {
        let net = ks();
        assert_eq!(net.equilibria().len(), 4);
        assert_eq!(net.connections().len(), 5);
        assert_eq!(net.ambient_dim(), 4);
    }

    #[test]
    fn kirk_silber_distribution_node() {
        assert_eq!(
            ks().distribution_nodes(),
            BTreeSet::from([EquilibriumId(2)])
        );
    }

    #[test]
    fn podvigina_distribution_node() {
        assert_eq!(
            podvigina_graph().distribution_nodes(),
            BTreeSet::from([EquilibriumId(2)])
        );
    }

    #[test]
    fn single_cycle_has_no_distribution_nodes() {
        // A-cycle alone: 1 -> 2 -> 3 -> 1.
        let net = ks();
        let sub = HeteroclinicNetwork::new(
            4,
            net.equilibria()[..3].to_vec(),
            net.connections()[..3].to_vec(),
        )
        .unwrap();
        assert!(sub.distribution_nodes().is_empty());
    }

    #[test]
    fn homoclinic_loop_is_a_valid_network() {
        let net = double_homoclinic();
        assert_eq!(net.equilibria().len(), 1);
        assert_eq!(net.connections().len(), 2);
        // Both loops attach to the single node, which distributes.
        assert_eq!(
            net.distribution_nodes(),
            BTreeSet::from([EquilibriumId(1)])
        );
    }

    #[test]
    fn dangling_endpoint_is_reported_with_the_offender() {
        let net = ks();
        let mut conns = net.connections().to_vec();
        conns[0].target = EquilibriumId(9);
        let err = HeteroclinicNetwork::new(4, net.equilibria().to_vec(), conns).unwrap_err();
        assert_eq!(
            err,
            NetworkError::DanglingEndpoint { connection: 1, endpoint: 9 }
        );
    }

    #[test]
    fn duplicate_ids_are_rejected() {
        let net = ks();
        let mut eqs = net.equilibria().to_vec();
        eqs[1].id = eqs[0].id;
        let err = HeteroclinicNetwork::new(4, eqs, net.connections().to_vec()).unwrap_err();
        assert_eq!(err, NetworkError::DuplicateEquilibrium(1));
    }

    #[test]
    fn disconnected_graph_is_rejected() {
        let eqs = vec![
            Equilibrium { id: EquilibriumId(1), position: vec![0.0, 0.0], name: None },
            Equilibrium { id: EquilibriumId(2), position: vec![1.0, 0.0], name: None },
        ];
        let conns = vec![Connection {
            id: ConnectionId(1),
            source: EquilibriumId(1),
            target: EquilibriumId(1),
            witness: vec![0.5, 0.5],
        }];
        let err = HeteroclinicNetwork::new(2, eqs, conns).unwrap_err();
        assert!(matches!(err, NetworkError::Disconnected(2, 1)));
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let eqs = vec![Equilibrium {
            id: EquilibriumId(1),
            position: vec![0.0, 0.0, 0.0],
            name: None,
        }];
        let err = HeteroclinicNetwork::new(2, eqs, vec![]).unwrap_err();
        assert_eq!(err, NetworkError::DimensionMismatch { id: 1, got: 3, expected: 2 });
    }

    #[test]
    fn word_validation_reports_first_violation() {
        let net = ks();
        assert_eq!(net.validate_word(&ids(&[1, 2, 3])).unwrap(), ValidationOutcome::Valid);
        assert_eq!(
            net.validate_word(&ids(&[1, 3])).unwrap(),
            ValidationOutcome::InvalidAt(1)
        );
        assert_eq!(net.validate_word(&[]).unwrap(), ValidationOutcome::Valid);
        assert_eq!(
            net.validate_word(&ids(&[7])).unwrap_err(),
            SequenceError::UnknownSymbol(7)
        );
    }

    #[test]
    fn invariant_set_of_the_a_cycle() {
        let net = ks();
        let seq = SymbolSequence::periodic(ids(&[1, 2, 3])).unwrap();
        let inv = net.invariant_set(&seq, 100).unwrap();
        assert_eq!(
            inv.equilibria,
            BTreeSet::from([EquilibriumId(1), EquilibriumId(2), EquilibriumId(3)])
        );
        assert_eq!(
            inv.connections,
            BTreeSet::from([ConnectionId(1), ConnectionId(2), ConnectionId(3)])
        );
    }

    #[test]
    fn invariant_set_of_both_cycles_covers_the_network() {
        let net = ks();
        let seq = SymbolSequence::periodic(ids(&[1, 2, 3, 1, 4, 5])).unwrap();
        let inv = net.invariant_set(&seq, 6).unwrap();
        assert_eq!(inv.equilibria.len(), 4);
        assert_eq!(inv.connections.len(), 5);
    }

    #[test]
    fn invariant_set_of_a_homoclinic_loop() {
        let net = double_homoclinic();
        let seq = SymbolSequence::periodic(ids(&[1])).unwrap();
        let inv = net.invariant_set(&seq, 10).unwrap();
        assert_eq!(inv.equilibria, BTreeSet::from([EquilibriumId(1)]));
        assert_eq!(inv.connections, BTreeSet::from([ConnectionId(1)]));
    }
}
