//! Ready-made network graphs used throughout tests and demos.

use std::collections::BTreeMap;

use super::{
    Connection, ConnectionId, CycleCoding, Equilibrium, EquilibriumId, HeteroclinicNetwork,
};

fn eq(id: u32, position: Vec<f64>, name: &str) -> Equilibrium {
    Equilibrium { id: EquilibriumId(id), position, name: Some(name.to_string()) }
}

fn conn(id: u32, source: u32, target: u32, witness: Vec<f64>) -> Connection {
    Connection {
        id: ConnectionId(id),
        source: EquilibriumId(source),
        target: EquilibriumId(target),
        witness,
    }
}

/// Two cycles sharing one connection: four equilibria on the coordinate
/// axes of R^4, five connections, and a distribution node at equilibrium 2.
///
/// Connections: 1: ξ1→ξ2, 2: ξ2→ξ3, 3: ξ3→ξ1, 4: ξ2→ξ4, 5: ξ4→ξ1.
/// The usual coding is A = 1-2-3, B = 1-4-5, anchored at connection 1.
pub fn kirk_silber_graph() -> HeteroclinicNetwork {
    let equilibria = vec![
        eq(1, vec![1.0, 0.0, 0.0, 0.0], "xi1"),
        eq(2, vec![0.0, 1.0, 0.0, 0.0], "xi2"),
        eq(3, vec![0.0, 0.0, 1.0, 0.0], "xi3"),
        eq(4, vec![0.0, 0.0, 0.0, 1.0], "xi4"),
    ];
    let connections = vec![
        conn(1, 1, 2, vec![0.7, 0.7, 0.0, 0.0]),
        conn(2, 2, 3, vec![0.0, 0.7, 0.7, 0.0]),
        conn(3, 3, 1, vec![0.7, 0.0, 0.7, 0.0]),
        conn(4, 2, 4, vec![0.0, 0.7, 0.0, 0.7]),
        conn(5, 4, 1, vec![0.7, 0.0, 0.0, 0.7]),
    ];
    HeteroclinicNetwork::new(4, equilibria, connections).expect("builtin graph is valid")
}

/// The A = 1-2-3 / B = 1-4-5 coding for [`kirk_silber_graph`].
pub fn kirk_silber_coding(net: &HeteroclinicNetwork) -> CycleCoding {
    let word = |w: &[u32]| w.iter().map(|&q| ConnectionId(q)).collect::<Vec<_>>();
    CycleCoding::new(
        net,
        ConnectionId(1),
        BTreeMap::from([
            ("A".to_string(), word(&[1, 2, 3])),
            ("B".to_string(), word(&[1, 4, 5])),
        ]),
    )
    .expect("builtin coding is valid")
}

/// The two-cycle graph obtained from [`kirk_silber_graph`] by splitting each
/// return connection with an extra node: 3→1 becomes 3→3'→1 and 4→1 becomes
/// 4→4'→1. Six equilibria on the axes of R^6, seven connections, and the
/// same single distribution node. Graph level only; no vector field ships
/// for it.
///
/// Connections: 1: ξ1→ξ2, 2: ξ2→ξ3, 3: ξ3→ξ3', 4: ξ3'→ξ1,
/// 5: ξ2→ξ4, 6: ξ4→ξ4', 7: ξ4'→ξ1.
pub fn podvigina_graph() -> HeteroclinicNetwork {
    let unit = |axis: usize| {
        let mut p = vec![0.0; 6];
        p[axis] = 1.0;
        p
    };
    let mid = |a: usize, b: usize| {
        let mut p = vec![0.0; 6];
        p[a] = 0.7;
        p[b] = 0.7;
        p
    };
    let equilibria = vec![
        eq(1, unit(0), "xi1"),
        eq(2, unit(1), "xi2"),
        eq(3, unit(2), "xi3"),
        eq(4, unit(3), "xi3p"),
        eq(5, unit(4), "xi4"),
        eq(6, unit(5), "xi4p"),
    ];
    let connections = vec![
        conn(1, 1, 2, mid(0, 1)),
        conn(2, 2, 3, mid(1, 2)),
        conn(3, 3, 4, mid(2, 3)),
        conn(4, 4, 1, mid(3, 0)),
        conn(5, 2, 5, mid(1, 4)),
        conn(6, 5, 6, mid(4, 5)),
        conn(7, 6, 1, mid(5, 0)),
    ];
    HeteroclinicNetwork::new(6, equilibria, connections).expect("builtin graph is valid")
}

/// The A/B omnicycle coding for [`podvigina_graph`]: A = 1-2-3-4, B = 1-5-6-7.
pub fn podvigina_coding(net: &HeteroclinicNetwork) -> CycleCoding {
    let word = |w: &[u32]| w.iter().map(|&q| ConnectionId(q)).collect::<Vec<_>>();
    CycleCoding::new(
        net,
        ConnectionId(1),
        BTreeMap::from([
            ("A".to_string(), word(&[1, 2, 3, 4])),
            ("B".to_string(), word(&[1, 5, 6, 7])),
        ]),
    )
    .expect("builtin coding is valid")
}

/// One equilibrium at the origin of R^4 with two homoclinic loops, one in
/// each coordinate plane pair. Witness points sit at the far turning points
/// of the loops.
pub fn double_homoclinic() -> HeteroclinicNetwork {
    let equilibria = vec![eq(1, vec![0.0; 4], "origin")];
    let connections = vec![
        conn(1, 1, 1, vec![1.5, 0.0, 0.0, 0.0]),
        conn(2, 1, 1, vec![0.0, 0.0, 1.5, 0.0]),
    ];
    HeteroclinicNetwork::new(4, equilibria, connections).expect("builtin graph is valid")
}
