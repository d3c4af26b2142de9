//! Vector fields, numerical integration, and linearization.

mod builtin;
mod integrator;

pub use builtin::{
    builtin_kirk_silber, builtin_product_homoclinic, kirk_silber_demo_coefficients,
    planar_loop_energy, polynomial_field, Monomial, ProductHomoclinicParams,
};
pub use integrator::{escape_radius_for, integrate, EventProbes, IntegrateOptions, Tolerances};

use std::collections::BTreeMap;
use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::FlowError;
use crate::network::{ConnectionId, EquilibriumId};

/// Residual bound under which a declared equilibrium is accepted.
pub const EQUILIBRIUM_RESIDUAL_TOL: f64 = 1e-10;

/// A deterministic vector field on R^d.
#[derive(Clone)]
pub struct VectorField {
    dim: usize,
    name: String,
    params: BTreeMap<String, f64>,
    known_equilibria: Vec<Vec<f64>>,
    eval: Arc<dyn Fn(&[f64], &mut [f64]) + Send + Sync>,
}

impl std::fmt::Debug for VectorField {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("VectorField")
            .field("dim", &self.dim)
            .field("name", &self.name)
            .field("params", &self.params)
            .field("known_equilibria", &self.known_equilibria.len())
            .finish()
    }
}

impl VectorField {
    /// Registers a field, checking that it actually vanishes at every
    /// declared equilibrium.
    pub fn new(
        dim: usize,
        name: impl Into<String>,
        params: BTreeMap<String, f64>,
        known_equilibria: Vec<Vec<f64>>,
        eval: Arc<dyn Fn(&[f64], &mut [f64]) + Send + Sync>,
    ) -> Result<Self, FlowError> {
        let field = Self { dim, name: name.into(), params, known_equilibria, eval };
        let mut derivative = vec![0.0; dim];
        for (index, point) in field.known_equilibria.iter().enumerate() {
            if point.len() != dim {
                return Err(FlowError::DimensionMismatch { got: point.len(), expected: dim });
            }
            field.eval_into(point, &mut derivative);
            let residual = norm(&derivative);
            if residual >= EQUILIBRIUM_RESIDUAL_TOL {
                return Err(FlowError::EquilibriumResidual { index, residual });
            }
        }
        Ok(field)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn params(&self) -> &BTreeMap<String, f64> {
        &self.params
    }

    pub fn known_equilibria(&self) -> &[Vec<f64>] {
        &self.known_equilibria
    }

    pub fn eval_into(&self, state: &[f64], derivative: &mut [f64]) {
        (self.eval)(state, derivative);
    }

    pub fn eval(&self, state: &[f64]) -> Vec<f64> {
        let mut derivative = vec![0.0; self.dim];
        self.eval_into(state, &mut derivative);
        derivative
    }
}

/// What a boundary-crossing event refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum EventTarget {
    /// Ball around an equilibrium.
    Equilibrium(EquilibriumId),
    /// Ball around a connection's witness point.
    Connection(ConnectionId),
    /// The distance-δ tube around the whole network.
    Tube,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EventKind {
    Enter,
    Exit,
}

/// A located boundary crossing.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub time: f64,
    pub kind: EventKind,
    pub target: EventTarget,
}

/// Time-stamped states from one integration plus located crossings.
///
/// Times are strictly increasing and states finite; events are time-sorted
/// and every exit is preceded by a matching enter (containment at the start
/// of the record is materialized as an enter at the initial time).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRecord {
    pub initial: Vec<f64>,
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    pub events: Vec<Event>,
}

impl TrajectoryRecord {
    pub fn start_time(&self) -> f64 {
        *self.times.first().expect("record is never empty")
    }

    pub fn end_time(&self) -> f64 {
        *self.times.last().expect("record is never empty")
    }

    pub fn final_state(&self) -> &[f64] {
        self.states.last().expect("record is never empty")
    }

    /// State at time `t` on the cubic Hermite interpolant the event locator
    /// used; derivatives are recomputed from the field, which reproduces the
    /// integrator's interpolant exactly.
    pub fn dense_state_at(&self, field: &VectorField, t: f64) -> Vec<f64> {
        let i = match self.times.binary_search_by(|probe| probe.partial_cmp(&t).unwrap()) {
            Ok(i) => return self.states[i].clone(),
            Err(0) => return self.states[0].clone(),
            Err(i) if i >= self.times.len() => return self.final_state().to_vec(),
            Err(i) => i,
        };
        let (t0, t1) = (self.times[i - 1], self.times[i]);
        let h = t1 - t0;
        let theta = (t - t0) / h;
        let (y0, y1) = (&self.states[i - 1], &self.states[i]);
        let f0 = field.eval(y0);
        let f1 = field.eval(y1);
        let t2 = theta * theta;
        let t3 = t2 * theta;
        let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
        let h10 = t3 - 2.0 * t2 + theta;
        let h01 = -2.0 * t3 + 3.0 * t2;
        let h11 = t3 - t2;
        (0..y0.len())
            .map(|k| h00 * y0[k] + h10 * h * f0[k] + h01 * y1[k] + h11 * h * f1[k])
            .collect()
    }

    /// State at an arbitrary recorded-or-earlier time by linear interpolation
    /// between stored samples.
    pub fn state_at(&self, t: f64) -> Vec<f64> {
        match self.times.binary_search_by(|probe| probe.partial_cmp(&t).unwrap()) {
            Ok(i) => self.states[i].clone(),
            Err(0) => self.states[0].clone(),
            Err(i) if i >= self.times.len() => self.final_state().to_vec(),
            Err(i) => {
                let (t0, t1) = (self.times[i - 1], self.times[i]);
                let w = (t - t0) / (t1 - t0);
                self.states[i - 1]
                    .iter()
                    .zip(&self.states[i])
                    .map(|(a, b)| a + w * (b - a))
                    .collect()
            }
        }
    }
}

/// Jacobian and eigenvalues at a (near-)equilibrium.
#[derive(Debug, Clone, PartialEq)]
pub struct Linearization {
    pub jacobian: Vec<Vec<f64>>,
    /// Sorted by real part, ascending.
    pub eigenvalues: Vec<Complex64>,
}

/// Central finite-difference Jacobian at `point`, which must satisfy
/// `|f(point)| < 1e-8`.
pub fn linearize_at(
    field: &VectorField,
    point: &[f64],
    fd_step: f64,
) -> Result<Linearization, FlowError> {
    if point.len() != field.dim() {
        return Err(FlowError::DimensionMismatch { got: point.len(), expected: field.dim() });
    }
    if !(fd_step > 0.0) {
        return Err(FlowError::InvalidParams(format!("fd_step must be positive, got {fd_step}")));
    }
    let residual = norm(&field.eval(point));
    if residual >= 1e-8 {
        return Err(FlowError::NotAnEquilibrium { residual });
    }
    let d = field.dim();
    let mut jacobian = vec![vec![0.0; d]; d];
    let mut plus = vec![0.0; d];
    let mut minus = vec![0.0; d];
    let mut x = point.to_vec();
    for j in 0..d {
        let old = x[j];
        x[j] = old + fd_step;
        field.eval_into(&x, &mut plus);
        x[j] = old - fd_step;
        field.eval_into(&x, &mut minus);
        x[j] = old;
        for i in 0..d {
            jacobian[i][j] = (plus[i] - minus[i]) / (2.0 * fd_step);
        }
    }
    let matrix = DMatrix::from_fn(d, d, |i, j| jacobian[i][j]);
    let mut eigenvalues: Vec<Complex64> = matrix.complex_eigenvalues().iter().copied().collect();
    eigenvalues.sort_by(|a, b| a.re.partial_cmp(&b.re).unwrap());
    Ok(Linearization { jacobian, eigenvalues })
}

impl Linearization {
    /// Real eigenpairs with eigenvalue above `threshold`, eigenvectors unit
    /// length. Used to pick launch directions for tracing connecting orbits.
    pub fn real_unstable_directions(&self, threshold: f64) -> Vec<(f64, Vec<f64>)> {
        let d = self.jacobian.len();
        let matrix = DMatrix::from_fn(d, d, |i, j| self.jacobian[i][j]);
        let mut out = Vec::new();
        for lambda in &self.eigenvalues {
            if lambda.im.abs() > 1e-9 || lambda.re <= threshold {
                continue;
            }
            let shifted = &matrix - DMatrix::identity(d, d) * lambda.re;
            let svd = shifted.svd(true, true);
            let v_t = svd.v_t.as_ref().expect("requested V^T");
            // Null direction = right-singular vector of the smallest singular value.
            let row = v_t.row(v_t.nrows() - 1);
            let mut v: Vec<f64> = row.iter().copied().collect();
            let n = norm(&v);
            if n > 0.0 {
                for value in &mut v {
                    *value /= n;
                }
                out.push((lambda.re, v));
            }
        }
        out
    }
}

pub(crate) fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub(crate) fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn linear_decay() -> VectorField {
        VectorField::new(
            1,
            "decay",
            BTreeMap::new(),
            vec![vec![0.0]],
            Arc::new(|x: &[f64], dx: &mut [f64]| dx[0] = -x[0]),
        )
        .unwrap()
    }

    #[test]
    fn registration_rejects_fake_equilibria() {
        let err = VectorField::new(
            1,
            "bad",
            BTreeMap::new(),
            vec![vec![1.0]],
            Arc::new(|x: &[f64], dx: &mut [f64]| dx[0] = -x[0]),
        )
        .unwrap_err();
        assert!(matches!(err, FlowError::EquilibriumResidual { index: 0, .. }));
    }

    #[test]
    fn linearize_linear_decay() {
        let field = linear_decay();
        let lin = linearize_at(&field, &[0.0], 1e-5).unwrap();
        assert_relative_eq!(lin.jacobian[0][0], -1.0, epsilon = 1e-9);
        assert_relative_eq!(lin.eigenvalues[0].re, -1.0, epsilon = 1e-9);
    }

    #[test]
    fn linearize_rejects_non_equilibria() {
        let field = linear_decay();
        assert!(matches!(
            linearize_at(&field, &[0.5], 1e-5),
            Err(FlowError::NotAnEquilibrium { .. })
        ));
    }

    #[test]
    fn finite_differences_match_an_analytic_jacobian() {
        // Cubic test field: f0 = x0 - x0^3 + 2 x0 x1^2, f1 = -x1 + x0^2 x1.
        let field = VectorField::new(
            2,
            "cubic",
            BTreeMap::new(),
            vec![vec![0.0, 0.0]],
            Arc::new(|x: &[f64], dx: &mut [f64]| {
                dx[0] = x[0] - x[0].powi(3) + 2.0 * x[0] * x[1] * x[1];
                dx[1] = -x[1] + x[0] * x[0] * x[1];
            }),
        )
        .unwrap();
        let lin = linearize_at(&field, &[0.0, 0.0], 1e-5).unwrap();
        // Analytic Jacobian at the origin for the same cubic, written by hand.
        let analytic = [[1.0, 0.0], [0.0, -1.0]];
        for i in 0..2 {
            for j in 0..2 {
                assert!((lin.jacobian[i][j] - analytic[i][j]).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn unstable_directions_of_a_planar_saddle() {
        // dx = y, dy = x has eigenpairs (+1, (1,1)/sqrt2) and (-1, (1,-1)/sqrt2).
        let field = VectorField::new(
            2,
            "saddle",
            BTreeMap::new(),
            vec![vec![0.0, 0.0]],
            Arc::new(|x: &[f64], dx: &mut [f64]| {
                dx[0] = x[1];
                dx[1] = x[0];
            }),
        )
        .unwrap();
        let lin = linearize_at(&field, &[0.0, 0.0], 1e-6).unwrap();
        let dirs = lin.real_unstable_directions(1e-6);
        assert_eq!(dirs.len(), 1);
        let (lambda, v) = &dirs[0];
        assert_relative_eq!(*lambda, 1.0, epsilon = 1e-6);
        assert_relative_eq!(v[0].abs(), v[1].abs(), epsilon = 1e-6);
        assert_relative_eq!(norm(v), 1.0, epsilon = 1e-12);
        // Must be the (1,1) direction, not (1,-1).
        assert!(v[0] * v[1] > 0.0);
    }
}
