//! Saddle passage model for a pair of competing homoclinic cycles.
//!
//! For a planar saddle with contraction rate `c` and expansion rate `e`, a
//! trajectory entering the ε-section at offset δ leaves after time
//! `T(δ) = c̃ ln δ` (with a negative time constant `c̃`) at offset
//! `ĉ δ^ν`, where `ν = c/e`. Dropping the prefactor and the global map,
//! `n` passages starting from δ take
//!
//! ```text
//! Tⁿ(δ) = c̃ ln δ · (1 − νⁿ) / (1 − ν)
//! ```
//!
//! and equating the times spent around two cycles with ratios ν_A, ν_B
//! relates their turn counts:
//!
//! ```text
//! n(m) = ln(1 − (1 − ν_A)/(1 − ν_B) · (1 − ν_B^m)) / ln ν_A .
//! ```
//!
//! All geometric sums are evaluated through `expm1`/log-space forms so large
//! `n` neither underflows nor cancels. ν = 1 boundaries take their analytic
//! limits.

use serde::{Deserialize, Serialize};

use crate::error::ReturnMapError;

/// Parameters of the local passage model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReturnMapParams {
    /// Contraction rate at the saddle, `c > 0`.
    pub contraction: f64,
    /// Expansion rate at the saddle, `e > 0`.
    pub expansion: f64,
    /// Passage time constant `c̃ < 0` in `T(δ) = c̃ ln δ`.
    pub time_constant: f64,
    /// Prefactor `ĉ > 0` of the full local map `δ ↦ ĉ δ^ν`.
    pub prefactor: f64,
    /// Section level ε > 0; offsets must satisfy `0 < δ < ε`.
    pub section_level: f64,
}

impl ReturnMapParams {
    pub fn new(
        contraction: f64,
        expansion: f64,
        time_constant: f64,
        prefactor: f64,
        section_level: f64,
    ) -> Result<Self, ReturnMapError> {
        if !(contraction > 0.0) {
            return Err(ReturnMapError::NonPositiveRate(contraction));
        }
        if !(expansion > 0.0) {
            return Err(ReturnMapError::NonPositiveRate(expansion));
        }
        if !(time_constant < 0.0) {
            return Err(ReturnMapError::BadConstant {
                name: "time_constant",
                requirement: "negative",
                value: time_constant,
            });
        }
        if !(prefactor > 0.0) {
            return Err(ReturnMapError::BadConstant {
                name: "prefactor",
                requirement: "positive",
                value: prefactor,
            });
        }
        if !(section_level > 0.0) {
            return Err(ReturnMapError::BadConstant {
                name: "section_level",
                requirement: "positive",
                value: section_level,
            });
        }
        Ok(Self { contraction, expansion, time_constant, prefactor, section_level })
    }

    /// Contraction-to-expansion ratio `ν = c/e`.
    pub fn nu(&self) -> f64 {
        self.contraction / self.expansion
    }
}

/// Whether the local map keeps the prefactor `ĉ` or drops it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LocalMapVariant {
    /// `δ ↦ ĉ δ^ν`.
    Full,
    /// `δ ↦ δ^ν`; the variant used by every multi-turn formula here.
    Simplified,
}

/// One application of the local map.
pub fn local_map(
    delta: f64,
    params: &ReturnMapParams,
    variant: LocalMapVariant,
) -> Result<f64, ReturnMapError> {
    if !(delta > 0.0 && delta < params.section_level) {
        return Err(ReturnMapError::OffsetOutOfRange { value: delta, upper: params.section_level });
    }
    let powered = delta.powf(params.nu());
    Ok(match variant {
        LocalMapVariant::Full => params.prefactor * powered,
        LocalMapVariant::Simplified => powered,
    })
}

/// Iterates of the simplified map `δ ↦ δ^ν`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalMapIterates {
    /// `n + 1` values, starting with δ itself; entry `k` is `δ^(ν^k)`.
    pub values: Vec<f64>,
    /// Index of the first entry clamped to zero by floating-point underflow.
    pub underflow_at: Option<usize>,
}

/// Computes `δ, δ^ν, δ^(ν²), …` in log space so deep iterates degrade to an
/// explicit underflow clamp instead of silent garbage.
pub fn iterate_local_map(
    delta0: f64,
    nu: f64,
    n: usize,
) -> Result<LocalMapIterates, ReturnMapError> {
    if !(delta0 > 0.0 && delta0 < 1.0) {
        return Err(ReturnMapError::OffsetOutOfRange { value: delta0, upper: 1.0 });
    }
    if !(nu > 0.0) {
        return Err(ReturnMapError::NonPositiveRate(nu));
    }
    let log_delta0 = delta0.ln();
    let mut values = Vec::with_capacity(n + 1);
    let mut underflow_at = None;
    let mut scale = 1.0_f64; // ν^k
    for k in 0..=n {
        let value = (scale * log_delta0).exp();
        if value == 0.0 && underflow_at.is_none() {
            underflow_at = Some(k);
        }
        values.push(value);
        scale *= nu;
    }
    Ok(LocalMapIterates { values, underflow_at })
}

/// Time for a single passage, `T(δ) = c̃ ln δ`.
pub fn transition_time(delta: f64, params: &ReturnMapParams) -> Result<f64, ReturnMapError> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(ReturnMapError::OffsetOutOfRange { value: delta, upper: 1.0 });
    }
    Ok(params.time_constant * delta.ln())
}

/// `(1 − νⁿ)/(1 − ν)` for real `n`, with the ν = 1 limit `n`.
///
/// Written as `expm1(n ln ν)/expm1(ln ν)`, which stays accurate both for
/// ν near 1 and for νⁿ far from 1.
fn geometric_sum(nu: f64, n: f64) -> f64 {
    if nu == 1.0 {
        n
    } else {
        let log_nu = nu.ln();
        (n * log_nu).exp_m1() / log_nu.exp_m1()
    }
}

/// Total time for `n` turns around one cycle starting from offset δ.
pub fn total_time_n_turns(
    delta0: f64,
    nu: f64,
    n: usize,
    time_constant: f64,
) -> Result<f64, ReturnMapError> {
    if !(delta0 > 0.0 && delta0 < 1.0) {
        return Err(ReturnMapError::OffsetOutOfRange { value: delta0, upper: 1.0 });
    }
    if !(nu > 0.0) {
        return Err(ReturnMapError::NonPositiveRate(nu));
    }
    if n < 1 {
        return Err(ReturnMapError::BadTurnCount(n as f64));
    }
    if !(time_constant < 0.0) {
        return Err(ReturnMapError::BadConstant {
            name: "time_constant",
            requirement: "negative",
            value: time_constant,
        });
    }
    Ok(time_constant * delta0.ln() * geometric_sum(nu, n as f64))
}

/// Inverts [`total_time_n_turns`]: the (real) number of turns completed in
/// time `total` from offset δ.
///
/// For ν < 1 the total time saturates at `c̃ ln δ / (1 − ν)`; a `total`
/// beyond that has no solution and is reported as saturation.
pub fn turns_in_time(
    total: f64,
    delta0: f64,
    nu: f64,
    time_constant: f64,
) -> Result<f64, ReturnMapError> {
    if !(delta0 > 0.0 && delta0 < 1.0) {
        return Err(ReturnMapError::OffsetOutOfRange { value: delta0, upper: 1.0 });
    }
    if !(nu > 0.0) {
        return Err(ReturnMapError::NonPositiveRate(nu));
    }
    if !(total > 0.0) {
        return Err(ReturnMapError::BadConstant {
            name: "total",
            requirement: "positive",
            value: total,
        });
    }
    let per_unit = time_constant * delta0.ln(); // > 0
    let scaled = total / per_unit;
    if (nu - 1.0).abs() < 1e-12 {
        return Ok(scaled);
    }
    // Solve (1 - ν^n)/(1 - ν) = scaled  =>  ν^n = 1 + scaled · expm1(ln ν).
    let argument = 1.0 + scaled * nu.ln().exp_m1();
    if !(argument > 0.0) {
        return Err(ReturnMapError::Saturated { m: scaled, argument });
    }
    Ok(argument.ln() / nu.ln())
}

/// Turn-count relation between two cycles: the number of turns `n` around
/// cycle A taking the same time as `m` turns around cycle B.
///
/// The prefactors and both global maps are dropped, as in the multi-turn
/// time above. A negative log argument means cycle A cannot absorb that much
/// time and is reported as saturation at the offending `m`.
pub fn n_of_m(m: f64, nu_a: f64, nu_b: f64) -> Result<f64, ReturnMapError> {
    if !(nu_a > 0.0) {
        return Err(ReturnMapError::NonPositiveRate(nu_a));
    }
    if !(nu_b > 0.0) {
        return Err(ReturnMapError::NonPositiveRate(nu_b));
    }
    if (nu_a - 1.0).abs() < 1e-12 {
        return Err(ReturnMapError::BadConstant {
            name: "nu_a",
            requirement: "different from 1",
            value: nu_a,
        });
    }
    if !(m >= 1.0) {
        return Err(ReturnMapError::BadTurnCount(m));
    }
    // g = 1 - (1-ν_A)/(1-ν_B)·(1-ν_B^m), arranged as (1-r) + r·ν_B^m so the
    // symmetric case ν_A = ν_B evaluates to ν_B^m without cancellation.
    let argument = if (1.0 - nu_b).abs() >= 1e-9 {
        let ratio = (1.0 - nu_a) / (1.0 - nu_b);
        (1.0 - ratio) + ratio * nu_b.powf(m)
    } else {
        // ν_B → 1: the geometric sum tends to m; keep the first-order term.
        1.0 - (1.0 - nu_a) * m * (1.0 + 0.5 * (m - 1.0) * (nu_b - 1.0))
    };
    if !(argument > 0.0) {
        return Err(ReturnMapError::Saturated { m, argument });
    }
    Ok(argument.ln() / nu_a.ln())
}

/// Classification of a single homoclinic cycle by its rate ratio.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CycleStability {
    /// `c > e`: the local map contracts, the cycle attracts.
    Stable,
    /// `c < e`: the local map expands, the cycle repels.
    Unstable,
    /// `c = e`: the simplified local map is the identity.
    Boundary,
}

pub fn cycle_stability(contraction: f64, expansion: f64) -> Result<CycleStability, ReturnMapError> {
    if !(contraction > 0.0) {
        return Err(ReturnMapError::NonPositiveRate(contraction));
    }
    if !(expansion > 0.0) {
        return Err(ReturnMapError::NonPositiveRate(expansion));
    }
    Ok(if contraction > expansion {
        CycleStability::Stable
    } else if contraction < expansion {
        CycleStability::Unstable
    } else {
        CycleStability::Boundary
    })
}

/// One row of the turn-count table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TurnCountPair {
    pub m: f64,
    pub n: f64,
}

/// Turn counts over a range of `m` together with a straight-line fit of the
/// tail half.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TurnCountReport {
    pub nu_a: f64,
    pub nu_b: f64,
    pub pairs: Vec<TurnCountPair>,
    /// Least-squares slope of `n` against `m` over the tail half of the range.
    pub fitted_slope: f64,
    pub fitted_intercept: f64,
    /// `ln ν_B / ln ν_A`. The relation is expected to straighten out to this
    /// slope for large `m`; reported for comparison, not asserted.
    pub conjectured_slope: f64,
    /// Largest `|n_fit − n| / |n|` over the tail half.
    pub max_relative_residual: f64,
    /// Root mean square of the relative residuals over the tail half.
    pub rms_relative_residual: f64,
}

/// Evaluates `n(m)` on integer `m` in `[m_min, m_max]` and fits the tail.
///
/// Both ratios must exceed 1 (two attracting cycles); saturation inside the
/// range is reported as an error naming the offending `m`.
pub fn asymptotic_linearity_report(
    nu_a: f64,
    nu_b: f64,
    m_min: usize,
    m_max: usize,
) -> Result<TurnCountReport, ReturnMapError> {
    if !(nu_a > 1.0 && nu_b > 1.0) {
        return Err(ReturnMapError::NotContracting(nu_a, nu_b));
    }
    if m_min < 1 || m_max < m_min {
        return Err(ReturnMapError::BadRange(m_min as f64, m_max as f64));
    }
    let mut pairs = Vec::with_capacity(m_max - m_min + 1);
    for m in m_min..=m_max {
        let m = m as f64;
        pairs.push(TurnCountPair { m, n: n_of_m(m, nu_a, nu_b)? });
    }
    let tail_start = pairs.len() / 2;
    let tail = &pairs[tail_start..];
    let (slope, intercept) = least_squares_line(tail);
    let tail_len = tail.len();
    let mut max_rel = 0.0_f64;
    let mut sum_sq = 0.0_f64;
    for p in tail {
        let fit = slope * p.m + intercept;
        let rel = ((fit - p.n) / p.n).abs();
        max_rel = max_rel.max(rel);
        sum_sq += rel * rel;
    }
    Ok(TurnCountReport {
        nu_a,
        nu_b,
        pairs,
        fitted_slope: slope,
        fitted_intercept: intercept,
        conjectured_slope: nu_b.ln() / nu_a.ln(),
        max_relative_residual: max_rel,
        rms_relative_residual: (sum_sq / tail_len as f64).sqrt(),
    })
}

fn least_squares_line(pairs: &[TurnCountPair]) -> (f64, f64) {
    let n = pairs.len() as f64;
    let mean_m = pairs.iter().map(|p| p.m).sum::<f64>() / n;
    let mean_n = pairs.iter().map(|p| p.n).sum::<f64>() / n;
    let mut cov = 0.0;
    let mut var = 0.0;
    for p in pairs {
        cov += (p.m - mean_m) * (p.n - mean_n);
        var += (p.m - mean_m) * (p.m - mean_m);
    }
    if var == 0.0 {
        return (0.0, mean_n);
    }
    let slope = cov / var;
    (slope, mean_n - slope * mean_m)
}
