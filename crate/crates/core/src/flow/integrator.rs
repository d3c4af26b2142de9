//! Embedded Dormand-Prince 5(4) integrator with dense output and event
//! location.
//!
//! Accepted steps interpolate with a cubic Hermite on the step's endpoint
//! values and derivatives; boundary crossings of the supplied probes are
//! located on that interpolant by bisection down to a configurable time
//! accuracy.

use serde::{Deserialize, Serialize};

use super::{dist, norm, Event, EventKind, EventTarget, TrajectoryRecord, VectorField};
use crate::error::FlowError;

/// Relative/absolute error tolerances of the step controller.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    pub rel: f64,
    pub abs: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self { rel: 1e-8, abs: 1e-10 }
    }
}

/// Scalar probes whose zero crossings become events. Values are positive
/// inside the probed region.
pub trait EventProbes {
    fn targets(&self) -> Vec<EventTarget>;
    fn value(&self, target: EventTarget, state: &[f64]) -> f64;
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntegrateOptions {
    pub tol: Tolerances,
    /// Absolute time accuracy of located events.
    pub event_time_tol: f64,
    /// Hard cap on the step size; `None` leaves the controller free.
    pub max_step: Option<f64>,
    /// Integration aborts when the state norm exceeds this.
    pub escape_radius: f64,
    /// Safety cap on accepted+rejected steps.
    pub max_steps: usize,
}

impl Default for IntegrateOptions {
    fn default() -> Self {
        Self {
            tol: Tolerances::default(),
            event_time_tol: 1e-9,
            max_step: None,
            escape_radius: f64::INFINITY,
            max_steps: 5_000_000,
        }
    }
}

impl IntegrateOptions {
    fn validate(&self) -> Result<(), FlowError> {
        if !(self.tol.rel > 0.0) || !(self.tol.abs > 0.0) {
            return Err(FlowError::InvalidTolerance(format!(
                "rel and abs must be positive, got rel={} abs={}",
                self.tol.rel, self.tol.abs
            )));
        }
        if !(self.event_time_tol > 0.0) {
            return Err(FlowError::InvalidTolerance(format!(
                "event_time_tol must be positive, got {}",
                self.event_time_tol
            )));
        }
        Ok(())
    }
}

// Dormand-Prince 5(4) tableau.
const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 6] = [
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];
// 5th-order weights equal the last A row (FSAL); these are the 4th-order
// embedded weights used for the error estimate.
const B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

/// Integrates `field` from `x0` over `[0, t_max]`.
///
/// Every accepted step appends a sample to the record. When probes are
/// supplied, their sign changes across a step are bisected on the dense
/// output and recorded as enter/exit events; probes already positive at the
/// initial state produce an enter event at time zero so that every exit has
/// a matching enter.
pub fn integrate(
    field: &VectorField,
    x0: &[f64],
    t_max: f64,
    opts: &IntegrateOptions,
    probes: Option<&dyn EventProbes>,
) -> Result<TrajectoryRecord, FlowError> {
    opts.validate()?;
    if x0.len() != field.dim() {
        return Err(FlowError::DimensionMismatch { got: x0.len(), expected: field.dim() });
    }
    if !x0.iter().all(|v| v.is_finite()) {
        return Err(FlowError::NonFiniteState { time: 0.0 });
    }
    if !(t_max > 0.0) {
        return Err(FlowError::InvalidParams(format!("t_max must be positive, got {t_max}")));
    }

    let dim = field.dim();
    let targets = probes.map(|p| p.targets()).unwrap_or_default();
    let mut probe_values: Vec<f64> = targets
        .iter()
        .map(|&t| probes.unwrap().value(t, x0))
        .collect();

    let mut events: Vec<Event> = targets
        .iter()
        .zip(&probe_values)
        .filter(|&(_, &v)| v > 0.0)
        .map(|(&target, _)| Event { time: 0.0, kind: EventKind::Enter, target })
        .collect();

    let mut t = 0.0;
    let mut y = x0.to_vec();
    let mut f_now = field.eval(&y);

    let mut times = vec![0.0];
    let mut states = vec![y.clone()];

    let mut h = initial_step(&y, &f_now, &opts.tol, t_max);
    if let Some(cap) = opts.max_step {
        h = h.min(cap);
    }

    let mut stages = vec![vec![0.0; dim]; 7];
    let mut y_stage = vec![0.0; dim];
    let mut y_next = vec![0.0; dim];

    let mut steps = 0usize;
    while t < t_max {
        steps += 1;
        if steps > opts.max_steps {
            return Err(FlowError::StepUnderflow { time: t });
        }
        h = h.min(t_max - t);
        if h < f64::EPSILON * t.abs().max(1.0) {
            return Err(FlowError::StepUnderflow { time: t });
        }

        stages[0].copy_from_slice(&f_now);
        for s in 1..7 {
            for i in 0..dim {
                let mut acc = 0.0;
                for (j, stage) in stages.iter().enumerate().take(s) {
                    let a = A[s - 1][j];
                    if a != 0.0 {
                        acc += a * stage[i];
                    }
                }
                y_stage[i] = y[i] + h * acc;
            }
            let _ = C; // stage times are implicit for an autonomous field
            let (head, tail) = stages.split_at_mut(s);
            field.eval_into(&y_stage, &mut tail[0]);
            let _ = head;
        }
        // 5th-order solution = stage 7 input (FSAL): y + h Σ A[5][j] k_j.
        for i in 0..dim {
            let mut acc = 0.0;
            for j in 0..6 {
                let a = A[5][j];
                if a != 0.0 {
                    acc += a * stages[j][i];
                }
            }
            y_next[i] = y[i] + h * acc;
        }

        // Error estimate against the embedded 4th-order weights.
        let mut err_sq = 0.0;
        for i in 0..dim {
            let mut low = 0.0;
            for j in 0..7 {
                if B4[j] != 0.0 {
                    low += B4[j] * stages[j][i];
                }
            }
            let low = y[i] + h * low;
            let scale = opts.tol.abs + opts.tol.rel * y[i].abs().max(y_next[i].abs());
            let e = (y_next[i] - low) / scale;
            err_sq += e * e;
        }
        let err = (err_sq / dim as f64).sqrt();

        if err <= 1.0 {
            if !y_next.iter().all(|v| v.is_finite()) {
                return Err(FlowError::NonFiniteState { time: t + h });
            }
            let f_next = field.eval(&y_next); // FSAL stage, reused below
            let t_next = t + h;

            if let Some(probe_set) = probes {
                locate_events(
                    probe_set,
                    &targets,
                    &mut probe_values,
                    (t, &y, &f_now),
                    (t_next, &y_next, &f_next),
                    opts.event_time_tol,
                    &mut events,
                );
            }

            t = t_next;
            y.copy_from_slice(&y_next);
            f_now = f_next;
            times.push(t);
            states.push(y.clone());

            let n = norm(&y);
            if n > opts.escape_radius {
                return Err(FlowError::Escaped { time: t, norm: n, radius: opts.escape_radius });
            }

            let factor = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
            h *= factor;
        } else {
            h *= (0.9 * err.powf(-0.2)).clamp(0.2, 1.0);
        }
        if let Some(cap) = opts.max_step {
            h = h.min(cap);
        }
    }

    Ok(TrajectoryRecord { initial: x0.to_vec(), times, states, events })
}

/// Conservative first step from the size of the state and its derivative.
fn initial_step(y: &[f64], f: &[f64], tol: &Tolerances, t_max: f64) -> f64 {
    let d0 = norm(y).max(1e-5);
    let d1 = norm(f);
    let h = if d1 > 1e-12 { 0.01 * d0 / d1 } else { 1e-6 };
    h.min(t_max).max(1e-12).min(tol.rel.sqrt().max(1e-6))
}

/// Cubic Hermite interpolation between step endpoints.
fn hermite(
    theta: f64,
    h: f64,
    y0: &[f64],
    f0: &[f64],
    y1: &[f64],
    f1: &[f64],
    out: &mut [f64],
) {
    let t2 = theta * theta;
    let t3 = t2 * theta;
    let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
    let h10 = t3 - 2.0 * t2 + theta;
    let h01 = -2.0 * t3 + 3.0 * t2;
    let h11 = t3 - t2;
    for i in 0..out.len() {
        out[i] = h00 * y0[i] + h10 * h * f0[i] + h01 * y1[i] + h11 * h * f1[i];
    }
}

#[allow(clippy::too_many_arguments)]
fn locate_events(
    probes: &dyn EventProbes,
    targets: &[EventTarget],
    values: &mut [f64],
    from: (f64, &[f64], &[f64]),
    to: (f64, &[f64], &[f64]),
    time_tol: f64,
    events: &mut Vec<Event>,
) {
    let (t0, y0, f0) = from;
    let (t1, y1, f1) = to;
    let h = t1 - t0;
    let mut found: Vec<Event> = Vec::new();
    let mut x = vec![0.0; y0.len()];
    for (idx, &target) in targets.iter().enumerate() {
        let v0 = values[idx];
        let v1 = probes.value(target, y1);
        if (v0 > 0.0) != (v1 > 0.0) {
            // Bisect on the dense output for the crossing time.
            let (mut lo, mut hi) = (t0, t1);
            let mut v_lo = v0;
            while hi - lo > time_tol {
                let mid = 0.5 * (lo + hi);
                hermite((mid - t0) / h, h, y0, f0, y1, f1, &mut x);
                let v_mid = probes.value(target, &x);
                if (v_lo > 0.0) == (v_mid > 0.0) {
                    lo = mid;
                    v_lo = v_mid;
                } else {
                    hi = mid;
                }
            }
            let kind = if v1 > 0.0 { EventKind::Enter } else { EventKind::Exit };
            found.push(Event { time: 0.5 * (lo + hi), kind, target });
        }
        values[idx] = v1;
    }
    found.sort_by(|a, b| a.time.partial_cmp(&b.time).unwrap());
    events.extend(found);
}

/// Default escape radius from a bounding box: ten times its diagonal.
pub fn escape_radius_for(bbox: (&[f64], &[f64])) -> f64 {
    10.0 * dist(bbox.0, bbox.1).max(1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeMap;
    use std::sync::Arc;

    fn decay_field() -> VectorField {
        VectorField::new(
            1,
            "decay",
            BTreeMap::new(),
            vec![vec![0.0]],
            Arc::new(|x: &[f64], dx: &mut [f64]| dx[0] = -x[0]),
        )
        .unwrap()
    }

    fn run_decay(rel: f64) -> f64 {
        let opts = IntegrateOptions {
            tol: Tolerances { rel, abs: rel * 1e-2 },
            ..Default::default()
        };
        let record = integrate(&decay_field(), &[1.0], 1.0, &opts, None).unwrap();
        record.final_state()[0]
    }

    #[test]
    fn linear_decay_hits_the_exponential() {
        let got = run_decay(1e-8);
        assert!((got - (-1.0_f64).exp()).abs() < 1e-7);
    }

    #[test]
    fn tighter_tolerance_reduces_the_error() {
        // Compare against a tol=1e-12 reference run rather than the closed form.
        let reference = run_decay(1e-12);
        let mut errors = Vec::new();
        for &rel in &[1e-4, 1e-6, 1e-8] {
            errors.push((run_decay(rel) - reference).abs());
        }
        assert!(errors[1] < errors[0] / 4.0, "errors {errors:?}");
        assert!(errors[2] < errors[1] / 4.0, "errors {errors:?}");
    }

    #[test]
    fn zero_field_stays_put() {
        let field = VectorField::new(
            3,
            "still",
            BTreeMap::new(),
            vec![],
            Arc::new(|_: &[f64], dx: &mut [f64]| dx.fill(0.0)),
        )
        .unwrap();
        let record = integrate(&field, &[0.3, -0.2, 0.9], 5.0, &Default::default(), None).unwrap();
        assert_eq!(record.final_state(), &[0.3, -0.2, 0.9]);
        assert!(record.events.is_empty());
    }

    #[test]
    fn escape_radius_aborts_growth() {
        let field = VectorField::new(
            1,
            "growth",
            BTreeMap::new(),
            vec![vec![0.0]],
            Arc::new(|x: &[f64], dx: &mut [f64]| dx[0] = x[0]),
        )
        .unwrap();
        let opts = IntegrateOptions { escape_radius: 10.0, ..Default::default() };
        let err = integrate(&field, &[1.0], 50.0, &opts, None).unwrap_err();
        assert!(matches!(err, FlowError::Escaped { .. }));
    }

    #[test]
    fn zero_tolerance_is_rejected() {
        let opts = IntegrateOptions {
            tol: Tolerances { rel: 0.0, abs: 1e-10 },
            ..Default::default()
        };
        assert!(matches!(
            integrate(&decay_field(), &[1.0], 1.0, &opts, None),
            Err(FlowError::InvalidTolerance(_))
        ));
    }

    struct IntervalProbe;
    impl EventProbes for IntervalProbe {
        fn targets(&self) -> Vec<EventTarget> {
            vec![EventTarget::Tube]
        }
        fn value(&self, _target: EventTarget, state: &[f64]) -> f64 {
            // Inside while x > 1/2.
            state[0] - 0.5
        }
    }

    #[test]
    fn events_are_located_to_the_requested_accuracy() {
        // x(t) = e^{-t} crosses 1/2 at t = ln 2. The located time carries
        // the dense-output error on top of the bisection accuracy.
        let record = integrate(
            &decay_field(),
            &[1.0],
            2.0,
            &Default::default(),
            Some(&IntervalProbe),
        )
        .unwrap();
        assert_eq!(record.events.len(), 2);
        assert_eq!(record.events[0].kind, EventKind::Enter);
        assert_eq!(record.events[0].time, 0.0);
        let exit = record.events[1];
        assert_eq!(exit.kind, EventKind::Exit);
        assert!((exit.time - std::f64::consts::LN_2).abs() < 1e-4);
    }

    #[test]
    fn probe_signs_bracket_each_event() {
        let field = decay_field();
        let probe = IntervalProbe;
        let record = integrate(&field, &[1.0], 2.0, &Default::default(), Some(&probe)).unwrap();
        let eps = 10.0 * 1e-9;
        for event in &record.events {
            if event.time == 0.0 {
                continue;
            }
            let before = probe.value(event.target, &record.dense_state_at(&field, event.time - eps));
            let after = probe.value(event.target, &record.dense_state_at(&field, event.time + eps));
            assert!(
                before * after < 0.0,
                "probe must change sign across the event at t={}",
                event.time
            );
        }
    }

    #[test]
    fn times_are_strictly_increasing() {
        let record = integrate(&decay_field(), &[1.0], 3.0, &Default::default(), None).unwrap();
        for w in record.times.windows(2) {
            assert!(w[1] > w[0]);
        }
    }
}
