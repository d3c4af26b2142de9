//! The JSON declaration format for networks, codings, and vector fields.
//!
//! ```json
//! {
//!   "ambient_dim": 4,
//!   "equilibria":  [{"id": 1, "position": [1, 0, 0, 0], "name": "xi1"}],
//!   "connections": [{"id": 1, "source": 1, "target": 2, "witness": [0.7, 0.7, 0, 0]}],
//!   "codings":     [{"anchor": 1, "symbols": {"A": [1, 2, 3], "B": [1, 4, 5]}}],
//!   "fields":      [{"kind": "kirk_silber", "coefficients": [[1,2,0,0], ...]}]
//! }
//! ```
//!
//! Networks are declared, not discovered: the file lists everything and
//! [`build_network`] validates it.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::flow::{
    builtin_kirk_silber, builtin_product_homoclinic, polynomial_field, Monomial,
    ProductHomoclinicParams, VectorField,
};
use crate::network::{
    Connection, ConnectionId, CycleCoding, Equilibrium, EquilibriumId, HeteroclinicNetwork,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquilibriumSpec {
    pub id: u32,
    pub position: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConnectionSpec {
    pub id: u32,
    pub source: u32,
    pub target: u32,
    pub witness: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CodingSpec {
    pub anchor: u32,
    pub symbols: BTreeMap<String, Vec<u32>>,
}

/// Vector-field declaration: a builtin family keyed by `kind`, or an
/// explicit polynomial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FieldSpec {
    KirkSilber {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        name: Option<String>,
        coefficients: [[f64; 4]; 4],
    },
    ProductHomoclinic {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        name: Option<String>,
        #[serde(flatten)]
        params: ProductHomoclinicParams,
    },
    Polynomial {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        name: Option<String>,
        dim: usize,
        terms: Vec<Monomial>,
        #[serde(default)]
        known_equilibria: Vec<Vec<f64>>,
    },
}

impl FieldSpec {
    /// The label this entry is selected by: its `name` if given, else its kind.
    pub fn label(&self) -> String {
        match self {
            FieldSpec::KirkSilber { name, .. } => {
                name.clone().unwrap_or_else(|| "kirk_silber".into())
            }
            FieldSpec::ProductHomoclinic { name, .. } => {
                name.clone().unwrap_or_else(|| "product_homoclinic".into())
            }
            FieldSpec::Polynomial { name, .. } => {
                name.clone().unwrap_or_else(|| "polynomial".into())
            }
        }
    }

    pub fn build(&self) -> Result<VectorField, Error> {
        Ok(match self {
            FieldSpec::KirkSilber { coefficients, .. } => builtin_kirk_silber(*coefficients)?,
            FieldSpec::ProductHomoclinic { params, .. } => builtin_product_homoclinic(*params)?,
            FieldSpec::Polynomial { dim, terms, known_equilibria, .. } => {
                polynomial_field(*dim, terms.clone(), known_equilibria.clone())?
            }
        })
    }
}

/// The whole declaration file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkSpecFile {
    pub ambient_dim: usize,
    pub equilibria: Vec<EquilibriumSpec>,
    pub connections: Vec<ConnectionSpec>,
    #[serde(default)]
    pub codings: Vec<CodingSpec>,
    #[serde(default)]
    pub fields: Vec<FieldSpec>,
}

/// Validated contents of a spec file.
#[derive(Debug, Clone)]
pub struct ParsedSpec {
    pub network: HeteroclinicNetwork,
    pub codings: Vec<CycleCoding>,
    pub fields: Vec<FieldSpec>,
}

impl ParsedSpec {
    /// Looks a field up by label; with `None`, the sole entry is returned.
    pub fn field(&self, label: Option<&str>) -> Result<&FieldSpec, Error> {
        match label {
            Some(l) => self
                .fields
                .iter()
                .find(|f| f.label() == l)
                .ok_or_else(|| Error::Spec(format!("no field named '{l}' in the spec file"))),
            None => match self.fields.len() {
                0 => Err(Error::Spec("spec file declares no fields".into())),
                1 => Ok(&self.fields[0]),
                n => Err(Error::Spec(format!(
                    "spec file declares {n} fields; select one by name"
                ))),
            },
        }
    }
}

/// Builds and validates the network graph of a spec file.
pub fn build_network(spec: &NetworkSpecFile) -> Result<HeteroclinicNetwork, Error> {
    let equilibria = spec
        .equilibria
        .iter()
        .map(|e| Equilibrium {
            id: EquilibriumId(e.id),
            position: e.position.clone(),
            name: e.name.clone(),
        })
        .collect();
    let connections = spec
        .connections
        .iter()
        .map(|c| Connection {
            id: ConnectionId(c.id),
            source: EquilibriumId(c.source),
            target: EquilibriumId(c.target),
            witness: c.witness.clone(),
        })
        .collect();
    Ok(HeteroclinicNetwork::new(spec.ambient_dim, equilibria, connections)?)
}

/// Parses a JSON string into a validated network, codings, and fields.
pub fn parse_spec(json: &str) -> Result<ParsedSpec, Error> {
    let file: NetworkSpecFile = serde_json::from_str(json)?;
    let network = build_network(&file)?;
    let mut codings = Vec::with_capacity(file.codings.len());
    for c in &file.codings {
        let symbols = c
            .symbols
            .iter()
            .map(|(label, word)| {
                (label.clone(), word.iter().map(|&q| ConnectionId(q)).collect())
            })
            .collect();
        codings.push(CycleCoding::new(&network, ConnectionId(c.anchor), symbols)?);
    }
    Ok(ParsedSpec { network, codings, fields: file.fields })
}

/// Reads and parses a spec file from disk.
pub fn load_spec(path: &Path) -> Result<ParsedSpec, Error> {
    let json = std::fs::read_to_string(path)
        .map_err(|e| Error::Spec(format!("cannot read '{}': {e}", path.display())))?;
    parse_spec(&json)
}
