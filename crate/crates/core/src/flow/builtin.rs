//! Built-in vector field families and user-defined polynomial fields.

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::VectorField;
use crate::error::FlowError;

/// One monomial term of a polynomial vector field: contributes
/// `coefficient · Π x_j^powers[j]` to `dx[equation]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Monomial {
    pub equation: usize,
    pub coefficient: f64,
    pub powers: Vec<u32>,
}

/// Assembles a polynomial field from explicit monomials.
pub fn polynomial_field(
    dim: usize,
    terms: Vec<Monomial>,
    known_equilibria: Vec<Vec<f64>>,
) -> Result<VectorField, FlowError> {
    for (i, term) in terms.iter().enumerate() {
        if term.equation >= dim {
            return Err(FlowError::InvalidParams(format!(
                "term {i} targets equation {} of a {dim}-dimensional field",
                term.equation
            )));
        }
        if term.powers.len() != dim {
            return Err(FlowError::InvalidParams(format!(
                "term {i} has {} exponents, expected {dim}",
                term.powers.len()
            )));
        }
    }
    VectorField::new(
        dim,
        "polynomial",
        BTreeMap::new(),
        known_equilibria,
        Arc::new(move |x: &[f64], dx: &mut [f64]| {
            dx.fill(0.0);
            for term in &terms {
                let mut value = term.coefficient;
                for (j, &p) in term.powers.iter().enumerate() {
                    if p > 0 {
                        value *= x[j].powi(p as i32);
                    }
                }
                dx[term.equation] += value;
            }
        }),
    )
}

/// Parameters of the product of two planar homoclinic loops.
///
/// Each factor is the level-set construction below, time-scaled so that the
/// saddle rates are `(-c_j, e_j)`. The construction forces `c_j = e_j`
/// (ratio one); asymmetric rates are rejected — the return-map module is the
/// place for quantitative ratio experiments.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProductHomoclinicParams {
    pub contraction_a: f64,
    pub expansion_a: f64,
    pub contraction_b: f64,
    pub expansion_b: f64,
    /// Strength of the loop-attracting dissipation in factor A.
    pub dissipation_a: f64,
    /// Strength of the loop-attracting dissipation in factor B.
    pub dissipation_b: f64,
}

impl ProductHomoclinicParams {
    pub fn validate(&self) -> Result<(), FlowError> {
        for (name, v) in [
            ("contraction_a", self.contraction_a),
            ("expansion_a", self.expansion_a),
            ("contraction_b", self.contraction_b),
            ("expansion_b", self.expansion_b),
        ] {
            if !(v > 0.0) {
                return Err(FlowError::InvalidParams(format!("{name} must be positive, got {v}")));
            }
        }
        for (factor, c, e) in [
            ("A", self.contraction_a, self.expansion_a),
            ("B", self.contraction_b, self.expansion_b),
        ] {
            if (c - e).abs() > 1e-12 {
                return Err(FlowError::InvalidParams(format!(
                    "factor {factor}: the loop construction realizes ratio one only; \
                     got contraction {c} != expansion {e}"
                )));
            }
        }
        if !(self.dissipation_a > 0.0) || !(self.dissipation_b > 0.0) {
            return Err(FlowError::InvalidParams(
                "dissipation must be positive or the loops stop attracting".into(),
            ));
        }
        Ok(())
    }

    pub fn nu_a(&self) -> f64 {
        self.contraction_a / self.expansion_a
    }

    pub fn nu_b(&self) -> f64 {
        self.contraction_b / self.expansion_b
    }
}

/// Level function of the planar loop: `H(x, y) = y²/2 − x²/2 + x³/3`.
///
/// `H = 0` carries a homoclinic loop to the saddle at the origin through the
/// turning point `(3/2, 0)`.
pub fn planar_loop_energy(x: f64, y: f64) -> f64 {
    0.5 * y * y - 0.5 * x * x + x * x * x / 3.0
}

/// Product system on R^4 = (x_A, y_A, x_B, y_B): two independent planar
/// factors, each a saddle at the origin with an attracting homoclinic loop.
///
/// One factor evolves by the level-preserving field of [`planar_loop_energy`]
/// plus the dissipation `−α H ∇H`, which damps `H` to zero off the loop and
/// vanishes on it:
///
/// ```text
/// ẋ = λ (y − α H (x² − x))
/// ẏ = λ (x − x² − α H y)
/// ```
///
/// The time scale λ equals the factor's common rate `c = e`, so the
/// linearization at the origin is `diag(−c_A, e_A, −c_B, e_B)` up to the
/// eigenbasis rotation within each factor.
pub fn builtin_product_homoclinic(
    params: ProductHomoclinicParams,
) -> Result<VectorField, FlowError> {
    params.validate()?;
    let scale_a = params.expansion_a;
    let scale_b = params.expansion_b;
    let alpha_a = params.dissipation_a;
    let alpha_b = params.dissipation_b;
    let mut map = BTreeMap::new();
    map.insert("contraction_a".into(), params.contraction_a);
    map.insert("expansion_a".into(), params.expansion_a);
    map.insert("contraction_b".into(), params.contraction_b);
    map.insert("expansion_b".into(), params.expansion_b);
    map.insert("dissipation_a".into(), params.dissipation_a);
    map.insert("dissipation_b".into(), params.dissipation_b);
    VectorField::new(
        4,
        "product_homoclinic",
        map,
        vec![vec![0.0; 4]],
        Arc::new(move |state: &[f64], dx: &mut [f64]| {
            let factor = |x: f64, y: f64, scale: f64, alpha: f64| {
                let h = planar_loop_energy(x, y);
                let hx = x * x - x;
                let hy = y;
                (scale * (y - alpha * h * hx), scale * (x - x * x - alpha * h * hy))
            };
            let (dxa, dya) = factor(state[0], state[1], scale_a, alpha_a);
            let (dxb, dyb) = factor(state[2], state[3], scale_b, alpha_b);
            dx[0] = dxa;
            dx[1] = dya;
            dx[2] = dxb;
            dx[3] = dyb;
        }),
    )
}

/// Cubic competition system on R^4 with equilibria on the coordinate axes:
///
/// ```text
/// ẋ_i = x_i (1 − Σ_j a_ij x_j²)
/// ```
///
/// Every coordinate hyperplane is invariant and axis equilibria sit at
/// `x_j = 1/√a_jj`, so all diagonal coefficients must be positive. The
/// eigenvalue at the axis-`j` equilibrium in direction `i ≠ j` is
/// `1 − a_ij / a_jj`; choosing signs of those combinations wires up which
/// connections exist in which coordinate plane.
pub fn builtin_kirk_silber(coefficients: [[f64; 4]; 4]) -> Result<VectorField, FlowError> {
    let mut known = Vec::new();
    for j in 0..4 {
        if !(coefficients[j][j] > 0.0) {
            return Err(FlowError::InvalidParams(format!(
                "diagonal coefficient a[{j}][{j}] = {} must be positive for an axis equilibrium",
                coefficients[j][j]
            )));
        }
        let mut p = vec![0.0; 4];
        p[j] = 1.0 / coefficients[j][j].sqrt();
        known.push(p);
    }
    let mut map = BTreeMap::new();
    for (i, row) in coefficients.iter().enumerate() {
        for (j, &a) in row.iter().enumerate() {
            map.insert(format!("a{}{}", i + 1, j + 1), a);
        }
    }
    VectorField::new(
        4,
        "kirk_silber",
        map,
        known,
        Arc::new(move |x: &[f64], dx: &mut [f64]| {
            for i in 0..4 {
                let mut rate = 1.0;
                for j in 0..4 {
                    rate -= coefficients[i][j] * x[j] * x[j];
                }
                dx[i] = x[i] * rate;
            }
        }),
    )
}

/// Coefficients realizing the two-cycle competition regime used by the
/// demos: both cycles attract, the `1-2-3` cycle leaks trajectories toward
/// the `1-4-5` cycle, and the `1-4-5` cycle keeps them. Found by simulation
/// sweep over sign-compatible matrices.
pub fn kirk_silber_demo_coefficients() -> [[f64; 4]; 4] {
    [
        [1.0, 2.0, 0.0, 0.0],
        [0.0, 1.0, 1.7, 3.0],
        [1.8, 0.5, 1.0, 3.0],
        [1.6, 0.0, 1.3, 1.0],
    ]
}
