//! Seeded Monte Carlo estimation of stability statistics for a target
//! sequence, and a census of the itineraries a sample batch realizes.
//!
//! Each sample integrates once; everything else (follow certificates at
//! every shift depth, attraction, the maximal word) is read off the visit
//! stream. The per-shift prefixes all end at the same absolute position of
//! the target, so a certificate for depth `n` restricts to one for every
//! deeper depth and the depth layers partition the basin exactly, sample by
//! sample.
//!
//! Determinism: sample points are drawn sequentially from a ChaCha stream
//! seeded by the plan, per-sample work is pure, and parallel results are
//! collected in sample order. Identical plans give identical reports.

use std::collections::BTreeMap;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{BasinError, Error};
use crate::flow::{
    escape_radius_for, integrate, IntegrateOptions, Tolerances, VectorField,
};
use crate::geometry::NetworkGeometry;
use crate::itinerary::{
    extract_from_stream, follows_stream, NeighborhoodSet, VisitStream,
};
use crate::network::{
    canonical_word_form, shift_related_words, ConnectionId, CycleCoding, SymbolSequence, WordForm,
};

/// Where initial conditions are drawn from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SampleRegion {
    /// Uniform over the distance-δ tube around the network (rejection from
    /// the union of per-connection bounding boxes).
    Tube { delta: f64 },
    /// Uniform over a Euclidean ball.
    Ball { center: Vec<f64>, radius: f64 },
}

/// A reproducible sampling request.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplingPlan {
    pub n_samples: usize,
    pub seed: u64,
    pub region: SampleRegion,
    /// Integration time per sample.
    pub horizon_time: f64,
    /// Symbols of the target sequence checked per sample.
    pub horizon_symbols: usize,
    /// Terminal distance to the network under which a sample counts as
    /// attracted (with a decreasing trend over the record's last quarter).
    /// An infinite threshold disables the attraction check entirely.
    pub convergence_threshold: f64,
}

/// Initial points plus the estimated volume of the region they fill.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleSet {
    pub points: Vec<Vec<f64>>,
    pub region_volume: f64,
}

/// Draws exactly `n_samples` points; identical plans yield identical sets.
pub fn sample_region(
    plan: &SamplingPlan,
    geometry: &NetworkGeometry,
) -> Result<SampleSet, BasinError> {
    if plan.n_samples == 0 {
        return Err(BasinError::NoSamples);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(plan.seed);
    match &plan.region {
        SampleRegion::Ball { center, radius } => {
            if !(radius > &0.0) {
                return Err(BasinError::BadRadius(*radius));
            }
            if center.len() != geometry.dim() {
                return Err(BasinError::RegionDimension {
                    got: center.len(),
                    expected: geometry.dim(),
                });
            }
            let d = center.len();
            let mut points = Vec::with_capacity(plan.n_samples);
            while points.len() < plan.n_samples {
                // Rejection from the bounding cube.
                let candidate: Vec<f64> =
                    (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
                if candidate.iter().map(|v| v * v).sum::<f64>() <= 1.0 {
                    points.push(
                        candidate
                            .iter()
                            .zip(center)
                            .map(|(u, c)| c + radius * u)
                            .collect(),
                    );
                }
            }
            Ok(SampleSet { points, region_volume: unit_ball_volume(d) * radius.powi(d as i32) })
        }
        SampleRegion::Tube { delta } => {
            sample_tube(plan.n_samples, *delta, geometry, &mut rng)
        }
    }
}

/// Uniform sampling over the tube: propose uniformly over the union of the
/// per-connection boxes (multiplicity-corrected), accept at distance < δ.
fn sample_tube(
    n: usize,
    delta: f64,
    geometry: &NetworkGeometry,
    rng: &mut ChaCha8Rng,
) -> Result<SampleSet, BasinError> {
    if !(delta > 0.0) {
        return Err(BasinError::BadRadius(delta));
    }
    let boxes: Vec<(Vec<f64>, Vec<f64>, f64)> = geometry
        .polylines()
        .values()
        .map(|line| {
            let (lo, hi) = line.bbox();
            let lo: Vec<f64> = lo.iter().map(|v| v - delta).collect();
            let hi: Vec<f64> = hi.iter().map(|v| v + delta).collect();
            let vol: f64 = lo.iter().zip(&hi).map(|(l, h)| h - l).product();
            (lo, hi, vol)
        })
        .collect();
    let total_volume: f64 = boxes.iter().map(|b| b.2).sum();
    let mut points = Vec::with_capacity(n);
    let mut proposals = 0usize;
    let mut accepted_multiplicity = 0usize;
    while points.len() < n {
        proposals += 1;
        if proposals % 100_000 == 0 {
            let rate = points.len() as f64 / proposals as f64;
            if rate < 1e-4 {
                return Err(BasinError::AcceptanceTooLow { rate, proposals });
            }
        }
        // Pick a box by volume.
        let mut pick = rng.random_range(0.0..total_volume);
        let mut chosen = 0;
        for (i, b) in boxes.iter().enumerate() {
            if pick < b.2 {
                chosen = i;
                break;
            }
            pick -= b.2;
        }
        let (lo, hi, _) = &boxes[chosen];
        let x: Vec<f64> = lo
            .iter()
            .zip(hi)
            .map(|(l, h)| rng.random_range(*l..*h))
            .collect();
        // Correct for box overlap so the union is sampled uniformly.
        let multiplicity = boxes
            .iter()
            .filter(|(lo, hi, _)| x.iter().zip(lo).zip(hi).all(|((v, l), h)| v >= l && v <= h))
            .count();
        if multiplicity > 1 && rng.random_range(0.0..1.0) >= 1.0 / multiplicity as f64 {
            continue;
        }
        accepted_multiplicity += 1;
        if geometry.distance_to_network(&x) < delta {
            points.push(x);
        }
    }
    let _ = accepted_multiplicity;
    let region_volume = total_volume * points.len() as f64 / proposals as f64;
    Ok(SampleSet { points, region_volume })
}

/// Volume of the unit ball in `d` dimensions (`V_d = V_{d-2} · 2π/d`).
pub fn unit_ball_volume(d: usize) -> f64 {
    match d {
        0 => 1.0,
        1 => 2.0,
        _ => unit_ball_volume(d - 2) * 2.0 * std::f64::consts::PI / d as f64,
    }
}

/// 95% Wilson score interval for a binomial fraction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WilsonInterval {
    pub lo: f64,
    pub hi: f64,
}

pub fn wilson_interval(successes: usize, total: usize) -> WilsonInterval {
    const Z: f64 = 1.959963984540054;
    if total == 0 {
        return WilsonInterval { lo: 0.0, hi: 1.0 };
    }
    let n = total as f64;
    let p = successes as f64 / n;
    let z2 = Z * Z;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = Z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    WilsonInterval { lo: (center - half).max(0.0), hi: (center + half).min(1.0) }
}

/// Everything read off one integrated sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleOutcome {
    pub index: usize,
    pub initial: Vec<f64>,
    /// None when the integration failed; the error text is kept instead.
    pub stream: Option<VisitStream>,
    pub failure: Option<String>,
    pub terminal_distance: f64,
    /// Distance to the network at the start of the record's last quarter.
    pub three_quarter_distance: f64,
    pub maximal_word: Option<Vec<ConnectionId>>,
    pub settle_time: Option<f64>,
}

impl SampleOutcome {
    /// Finite-horizon attraction proxy: terminal distance below the
    /// threshold and not above the distance at three quarters of the record.
    pub fn attracted(&self, threshold: f64) -> bool {
        if self.failure.is_some() {
            return false;
        }
        if !threshold.is_finite() {
            return true;
        }
        self.terminal_distance < threshold
            && self.terminal_distance <= self.three_quarter_distance * (1.0 + 1e-9)
    }
}

/// One integrated batch, reusable by every estimator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BasinRun {
    pub plan: SamplingPlan,
    pub sample_set: SampleSet,
    pub outcomes: Vec<SampleOutcome>,
}

/// Integrates every sample of the plan. The expensive step; all estimators
/// below work off the result.
pub fn run_samples(
    field: &VectorField,
    nbhd: &NeighborhoodSet,
    plan: &SamplingPlan,
    tol: Tolerances,
) -> Result<BasinRun, Error> {
    let sample_set = sample_region(plan, nbhd.geometry())?;
    let opts = IntegrateOptions {
        tol,
        max_step: Some(nbhd.suggested_max_step(field)),
        escape_radius: escape_radius_for({
            let (lo, hi) = nbhd.geometry().bounding_box(0.0);
            (&lo.clone()[..], &hi.clone()[..])
        }),
        ..Default::default()
    };
    let outcomes: Vec<SampleOutcome> = sample_set
        .points
        .par_iter()
        .enumerate()
        .map(|(index, x0)| run_one(field, nbhd, plan, &opts, index, x0))
        .collect();
    Ok(BasinRun { plan: plan.clone(), sample_set, outcomes })
}

fn run_one(
    field: &VectorField,
    nbhd: &NeighborhoodSet,
    plan: &SamplingPlan,
    opts: &IntegrateOptions,
    index: usize,
    x0: &[f64],
) -> SampleOutcome {
    match integrate(field, x0, plan.horizon_time, opts, Some(nbhd)) {
        Ok(record) => {
            let stream = VisitStream::from_record(&record);
            let geometry = nbhd.geometry();
            let terminal = geometry.distance_to_network(record.final_state());
            let t_3q = record.start_time() + 0.75 * (record.end_time() - record.start_time());
            let three_quarter = geometry.distance_to_network(&record.state_at(t_3q));
            let maximal = extract_from_stream(&stream, plan.horizon_symbols).ok();
            SampleOutcome {
                index,
                initial: x0.to_vec(),
                settle_time: maximal.as_ref().map(|m| m.entry_time),
                maximal_word: maximal.map(|m| m.word),
                stream: Some(stream),
                failure: None,
                terminal_distance: terminal,
                three_quarter_distance: three_quarter,
            }
        }
        Err(e) => SampleOutcome {
            index,
            initial: x0.to_vec(),
            stream: None,
            failure: Some(e.to_string()),
            terminal_distance: f64::INFINITY,
            three_quarter_distance: f64::INFINITY,
            maximal_word: None,
            settle_time: None,
        },
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BasinCounts {
    /// Samples certified for the depth-0 prefix.
    pub followed: usize,
    /// Followed samples that also pass the attraction proxy.
    pub attracted: usize,
    /// Samples in some depth layer (attracted at any shift ≤ the cap).
    pub basin: usize,
    /// Integration failures, reported, never silently dropped.
    pub failed: usize,
    pub total: usize,
}

/// Monte Carlo estimate for one target sequence at one tube radius.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BasinEstimate {
    pub target: String,
    pub delta: f64,
    pub horizon_symbols: usize,
    pub horizon_time: f64,
    pub convergence_threshold: f64,
    pub shift_cap: usize,
    pub counts: BasinCounts,
    pub followed_fraction: f64,
    pub attracted_fraction: f64,
    pub wilson_followed: WilsonInterval,
    pub wilson_attracted: WilsonInterval,
    /// Estimated volume of the sampling region.
    pub region_volume: f64,
    /// Fraction × region volume: the measure estimate.
    pub followed_measure: f64,
    pub attracted_measure: f64,
    /// Followed counts per shift depth `k = 0..=shift_cap` (monotone).
    pub per_shift_followed: Vec<usize>,
    /// Attracted-and-followed counts per shift depth (monotone).
    pub per_shift_attracted: Vec<usize>,
    /// Disjoint decomposition: samples whose *minimal* working depth is `k`.
    pub per_k: Vec<usize>,
}

/// Follow/attract statistics for `target` over an integrated run.
///
/// `shift_cap` is the deepest shift tested; the prefix at depth `k` is
/// symbols `k..horizon_symbols` of the target, so deeper prefixes are
/// suffixes of shallower ones and the layers nest exactly.
pub fn estimate_from_run(
    run: &BasinRun,
    nbhd: &NeighborhoodSet,
    target: &SymbolSequence,
    shift_cap: usize,
) -> Result<BasinEstimate, Error> {
    let horizon = run.plan.horizon_symbols;
    if shift_cap >= horizon {
        return Err(BasinError::ShiftTooDeep { k: shift_cap, len: horizon }.into());
    }
    let prefixes: Vec<Vec<ConnectionId>> = (0..=shift_cap)
        .map(|k| target.window(k, horizon - k))
        .collect();

    let threshold = run.plan.convergence_threshold;
    let mut per_shift_followed = vec![0usize; shift_cap + 1];
    let mut per_shift_attracted = vec![0usize; shift_cap + 1];
    let mut per_k = vec![0usize; shift_cap + 1];
    let mut failed = 0usize;
    let mut basin = 0usize;

    for outcome in &run.outcomes {
        let stream = match &outcome.stream {
            Some(s) => s,
            None => {
                failed += 1;
                continue;
            }
        };
        let attracted = outcome.attracted(threshold);
        let mut minimal_k: Option<usize> = None;
        for (k, prefix) in prefixes.iter().enumerate() {
            let cert = follows_stream(stream, prefix, nbhd)?;
            if cert.verdict.is_follows() {
                per_shift_followed[k] += 1;
                if attracted {
                    per_shift_attracted[k] += 1;
                    if minimal_k.is_none() {
                        minimal_k = Some(k);
                    }
                }
            }
        }
        if let Some(k) = minimal_k {
            per_k[k] += 1;
            basin += 1;
        }
    }

    let total = run.outcomes.len();
    let followed = per_shift_followed[0];
    let attracted = per_shift_attracted[0];
    Ok(BasinEstimate {
        target: target.display(horizon),
        delta: nbhd.delta(),
        horizon_symbols: horizon,
        horizon_time: run.plan.horizon_time,
        convergence_threshold: threshold,
        shift_cap,
        counts: BasinCounts { followed, attracted, basin, failed, total },
        followed_fraction: followed as f64 / total as f64,
        attracted_fraction: attracted as f64 / total as f64,
        wilson_followed: wilson_interval(followed, total),
        wilson_attracted: wilson_interval(attracted, total),
        region_volume: run.sample_set.region_volume,
        followed_measure: run.sample_set.region_volume * followed as f64 / total as f64,
        attracted_measure: run.sample_set.region_volume * attracted as f64 / total as f64,
        per_shift_followed,
        per_shift_attracted,
        per_k,
    })
}

/// Fraction of samples whose trajectories follow the target prefix.
pub fn estimate_stable_set(
    field: &VectorField,
    nbhd: &NeighborhoodSet,
    target: &SymbolSequence,
    plan: &SamplingPlan,
    tol: Tolerances,
) -> Result<BasinEstimate, Error> {
    let run = run_samples(field, nbhd, plan, tol)?;
    estimate_from_run(&run, nbhd, target, 0)
}

/// Fraction of samples that follow the prefix *and* converge to the network
/// by the finite-horizon proxy.
pub fn estimate_attracting_set(
    field: &VectorField,
    nbhd: &NeighborhoodSet,
    target: &SymbolSequence,
    plan: &SamplingPlan,
    tol: Tolerances,
) -> Result<BasinEstimate, Error> {
    let run = run_samples(field, nbhd, plan, tol)?;
    estimate_from_run(&run, nbhd, target, 0)
}

/// Full decomposition by minimal shift depth up to `shift_cap`.
pub fn estimate_basin_decomposition(
    field: &VectorField,
    nbhd: &NeighborhoodSet,
    target: &SymbolSequence,
    plan: &SamplingPlan,
    shift_cap: usize,
    tol: Tolerances,
) -> Result<BasinEstimate, Error> {
    let run = run_samples(field, nbhd, plan, tol)?;
    estimate_from_run(&run, nbhd, target, shift_cap)
}

/// One realized itinerary class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CensusClass {
    /// Canonical label: `head(tail)` for eventually periodic words, the raw
    /// word otherwise.
    pub key: String,
    /// Label shared by all shift-phases of the same periodic core.
    pub shift_class: String,
    pub count: usize,
    /// Cycle-letter rendering when a coding applies to the class word
    /// (aligned to the coding anchor by dropping at most one partial block).
    pub recoded: Option<String>,
    word: Vec<ConnectionId>,
}

impl CensusClass {
    pub fn word(&self) -> &[ConnectionId] {
        &self.word
    }
}

/// Histogram of realized maximal itineraries with consistency checks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SequenceCensus {
    /// Classes sorted by decreasing count, then key.
    pub classes: Vec<CensusClass>,
    pub total_samples: usize,
    /// Samples that produced a maximal word at all.
    pub realized: usize,
    pub realized_fraction: f64,
    /// Samples certified for a class word *not* shift-related to their own
    /// maximal word. Nonzero counts contradict the one-maximal-word picture.
    pub conflicts: usize,
    pub conflict_details: Vec<String>,
}

/// Builds the census from an integrated run.
///
/// Words are keyed by their eventually periodic normal form when one is
/// detected inside the record (minimal preperiod, primitive tail), raw
/// otherwise. For each sample, every other class word it can be certified
/// for must be shift-related to its own maximal word; violations are
/// counted as conflicts.
pub fn census_from_run(
    run: &BasinRun,
    nbhd: &NeighborhoodSet,
    coding: Option<&CycleCoding>,
) -> Result<SequenceCensus, Error> {
    let horizon = run.plan.horizon_symbols;
    let mut buckets: BTreeMap<String, (WordForm, usize)> = BTreeMap::new();
    let mut realized = 0usize;
    for outcome in &run.outcomes {
        if let Some(word) = &outcome.maximal_word {
            if word.is_empty() {
                continue;
            }
            realized += 1;
            let form = canonical_word_form(word);
            let key = form.key();
            buckets.entry(key).or_insert((form, 0)).1 += 1;
        }
    }

    let mut classes: Vec<CensusClass> = buckets
        .into_iter()
        .map(|(key, (form, count))| {
            let word = form.expand(horizon);
            CensusClass {
                key,
                shift_class: form.shift_class_label(),
                count,
                recoded: coding.and_then(|c| recode_up_to_shift(c, &word)),
                word,
            }
        })
        .collect();
    classes.sort_by(|a, b| b.count.cmp(&a.count).then(a.key.cmp(&b.key)));

    // Lemma-style consistency: a sample may only be certified for class
    // words shift-related to its own maximal word.
    let mut conflicts = 0usize;
    let mut conflict_details = Vec::new();
    for outcome in &run.outcomes {
        let (stream, own) = match (&outcome.stream, &outcome.maximal_word) {
            (Some(s), Some(w)) if !w.is_empty() => (s, w),
            _ => continue,
        };
        for class in &classes {
            if shift_related_words(own, &class.word) {
                continue;
            }
            let cert = follows_stream(stream, &class.word, nbhd)?;
            if cert.verdict.is_follows() {
                conflicts += 1;
                if conflict_details.len() < 16 {
                    conflict_details.push(format!(
                        "sample {} (word {:?}) also certified for class {}",
                        outcome.index, own, class.key
                    ));
                }
            }
        }
    }

    let total_samples = run.outcomes.len();
    Ok(SequenceCensus {
        classes,
        total_samples,
        realized,
        realized_fraction: realized as f64 / total_samples as f64,
        conflicts,
        conflict_details,
    })
}

/// Integrates a fresh batch and builds its census.
pub fn census(
    field: &VectorField,
    nbhd: &NeighborhoodSet,
    plan: &SamplingPlan,
    coding: Option<&CycleCoding>,
    tol: Tolerances,
) -> Result<SequenceCensus, Error> {
    let run = run_samples(field, nbhd, plan, tol)?;
    census_from_run(&run, nbhd, coding)
}

/// Recode a word that may start mid-block: drop leading symbols (fewer than
/// the longest block) until the word starts at the coding anchor, then parse
/// leniently.
pub fn recode_up_to_shift(coding: &CycleCoding, word: &[ConnectionId]) -> Option<String> {
    let max_block = coding.symbols().values().map(|w| w.len()).max().unwrap_or(0);
    for k in 0..max_block.min(word.len()) {
        if word[k] == coding.anchor() {
            let (labels, consumed) = coding.recode_partial(&word[k..]).ok()?;
            if !labels.is_empty() && consumed + 1 >= word.len() - k {
                return Some(labels);
            }
            return if labels.is_empty() { None } else { Some(labels) };
        }
    }
    None
}

/// Evidence labels for the stability of a target sequence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum StabilityEvidence {
    /// Positive attracted fraction at every tested tube radius.
    Fragmentary,
    /// Fragmentary, and the depth layers vanish beyond a finite depth at
    /// every tested radius.
    FragmentaryFiniteType,
    /// The data does not exclude a zero-measure basin.
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvidenceReport {
    pub label: StabilityEvidence,
    pub rationale: String,
}

/// Classifies estimates at two or more tube radii. Labels are evidence from
/// finite sampling, never proof; in particular an infinite-type pattern
/// (every depth layer populated) still reports only [`StabilityEvidence::Fragmentary`]
/// because only finitely many depths were tested.
pub fn classify_stability_evidence(
    estimates: &[BasinEstimate],
) -> Result<EvidenceReport, BasinError> {
    if estimates.len() < 2 {
        return Err(BasinError::NotEnoughDeltas(estimates.len()));
    }
    let all_positive = estimates.iter().all(|e| e.wilson_attracted.lo > 0.0);
    if !all_positive {
        let losers: Vec<String> = estimates
            .iter()
            .filter(|e| e.wilson_attracted.lo <= 0.0)
            .map(|e| format!("δ={}", e.delta))
            .collect();
        return Ok(EvidenceReport {
            label: StabilityEvidence::Inconclusive,
            rationale: format!(
                "attracted-fraction confidence interval includes zero at {}",
                losers.join(", ")
            ),
        });
    }
    let finite_type = estimates.iter().all(|e| {
        let last_positive = e.per_k.iter().rposition(|&c| c > 0);
        match last_positive {
            Some(k0) => k0 + 1 < e.per_k.len(),
            None => false,
        }
    });
    if finite_type {
        let k0 = estimates
            .iter()
            .filter_map(|e| e.per_k.iter().rposition(|&c| c > 0))
            .max()
            .unwrap_or(0);
        Ok(EvidenceReport {
            label: StabilityEvidence::FragmentaryFiniteType,
            rationale: format!(
                "attracted fraction bounded away from zero at every tested radius and \
                 depth layers empty beyond k = {k0} within the tested cap"
            ),
        })
    } else {
        Ok(EvidenceReport {
            label: StabilityEvidence::Fragmentary,
            rationale: "attracted fraction bounded away from zero at every tested radius; \
                        depth layers populated up to the tested cap, so finite type is \
                        not established"
                .into(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flow::EventTarget;
    use crate::itinerary::Visit;
    use crate::network::EquilibriumId;

    fn plan(region: SampleRegion, n: usize, seed: u64) -> SamplingPlan {
        SamplingPlan {
            n_samples: n,
            seed,
            region,
            horizon_time: 10.0,
            horizon_symbols: 6,
            convergence_threshold: 0.01,
        }
    }

    fn flat_geometry() -> NetworkGeometry {
        let net = crate::network::kirk_silber_graph();
        let mut lines = std::collections::BTreeMap::new();
        for conn in net.connections() {
            let a = net.equilibrium(conn.source).unwrap().position.clone();
            let b = net.equilibrium(conn.target).unwrap().position.clone();
            lines.insert(conn.id, vec![a, conn.witness.clone(), b]);
        }
        NetworkGeometry::from_polylines(&net, lines)
    }

    #[test]
    fn ball_samples_stay_inside() {
        let geom = flat_geometry();
        let p = plan(SampleRegion::Ball { center: vec![1.0, 0.0, 0.0, 0.0], radius: 0.2 }, 500, 7);
        let set = sample_region(&p, &geom).unwrap();
        assert_eq!(set.points.len(), 500);
        for x in &set.points {
            let d: f64 = x
                .iter()
                .zip(&[1.0, 0.0, 0.0, 0.0])
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
            assert!(d <= 0.2 + 1e-12);
        }
        let exact = unit_ball_volume(4) * 0.2_f64.powi(4);
        assert!((set.region_volume - exact).abs() < 1e-12);
    }

    #[test]
    fn tube_samples_respect_the_distance_bound() {
        let geom = flat_geometry();
        let p = plan(SampleRegion::Tube { delta: 0.05 }, 200, 11);
        let set = sample_region(&p, &geom).unwrap();
        assert_eq!(set.points.len(), 200);
        for x in &set.points {
            assert!(geom.distance_to_network(x) < 0.05);
        }
        assert!(set.region_volume > 0.0);
    }

    #[test]
    fn identical_plans_give_identical_points() {
        let geom = flat_geometry();
        let p = plan(SampleRegion::Tube { delta: 0.05 }, 100, 99);
        let a = sample_region(&p, &geom).unwrap();
        let b = sample_region(&p, &geom).unwrap();
        assert_eq!(a, b);
        let p2 = plan(SampleRegion::Tube { delta: 0.05 }, 100, 100);
        let c = sample_region(&p2, &geom).unwrap();
        assert_ne!(a.points, c.points);
    }

    #[test]
    fn zero_samples_is_an_error() {
        let geom = flat_geometry();
        let p = plan(SampleRegion::Tube { delta: 0.05 }, 0, 1);
        assert!(matches!(sample_region(&p, &geom), Err(BasinError::NoSamples)));
    }

    #[test]
    fn unit_ball_volumes_match_the_known_values() {
        assert!((unit_ball_volume(2) - std::f64::consts::PI).abs() < 1e-12);
        assert!((unit_ball_volume(3) - 4.18879020478639).abs() < 1e-10);
        assert!((unit_ball_volume(4) - 4.934802200544679).abs() < 1e-12);
    }

    #[test]
    fn wilson_interval_brackets_the_point_estimate() {
        let w = wilson_interval(30, 100);
        assert!(w.lo < 0.3 && 0.3 < w.hi);
        assert!(w.lo > 0.2 && w.hi < 0.42);
        let zero = wilson_interval(0, 50);
        assert_eq!(zero.lo, 0.0);
        assert!(zero.hi > 0.0);
    }

    #[test]
    fn wilson_coverage_on_synthetic_bernoulli_draws() {
        // Ground truth p = 0.35, n = 200 per replication; the interval must
        // cover the truth in at least 93% of 500 replications.
        let mut rng = ChaCha8Rng::seed_from_u64(424242);
        let (p_true, n, reps) = (0.35, 200, 500);
        let mut covered = 0;
        for _ in 0..reps {
            let successes = (0..n).filter(|_| rng.random_range(0.0..1.0) < p_true).count();
            let w = wilson_interval(successes, n);
            if w.lo <= p_true && p_true <= w.hi {
                covered += 1;
            }
        }
        let coverage = covered as f64 / reps as f64;
        assert!(coverage >= 0.93, "coverage {coverage}");
    }

    /// Synthetic run: hand-built visit streams with known properties; lets
    /// the estimator logic be tested without any integration.
    fn synthetic_run() -> (BasinRun, NeighborhoodSet, SymbolSequence) {
        let nbhd = crate::itinerary::tests_support::ks_neighborhoods(0.05);
        let u = |id: u32| EventTarget::Equilibrium(EquilibriumId(id));
        let v = |id: u32| EventTarget::Connection(ConnectionId(id));
        let mk = |script: &[(EventTarget, f64)], settle: Option<f64>| {
            let visits: Vec<Visit> = script
                .iter()
                .map(|&(t, at)| Visit { target: t, enter: at, exit: at + 0.3 })
                .collect();
            VisitStream { visits, settle_time: settle, end_time: 100.0 }
        };
        // Target: 1-2-3 then (1-4-5) forever.
        let target = SymbolSequence::eventually_periodic(
            vec![ConnectionId(1), ConnectionId(2), ConnectionId(3)],
            vec![ConnectionId(1), ConnectionId(4), ConnectionId(5)],
        )
        .unwrap();
        // Sample 0 follows the full target; sample 1 only the periodic part
        // (minimal depth 3); sample 2 never settles; sample 3 fails.
        let streams = vec![
            Some(mk(
                &[
                    (u(1), 0.0),
                    (v(1), 1.0),
                    (u(2), 2.0),
                    (v(2), 3.0),
                    (u(3), 4.0),
                    (v(3), 5.0),
                    (u(1), 6.0),
                    (v(1), 7.0),
                    (u(2), 8.0),
                    (v(4), 9.0),
                    (u(4), 10.0),
                    (v(5), 11.0),
                    (u(1), 12.0),
                    (v(1), 13.0),
                    (u(2), 14.0),
                    (v(4), 15.0),
                    (u(4), 16.0),
                    (v(5), 17.0),
                    (u(1), 18.0),
                ],
                Some(0.0),
            )),
            Some(mk(
                &[
                    (u(4), 0.0),
                    (v(5), 1.0),
                    (u(1), 2.0),
                    (v(1), 3.0),
                    (u(2), 4.0),
                    (v(4), 5.0),
                    (u(4), 6.0),
                    (v(5), 7.0),
                    (u(1), 8.0),
                    (v(1), 9.0),
                    (u(2), 10.0),
                    (v(4), 11.0),
                    (u(4), 12.0),
                ],
                Some(0.0),
            )),
            Some(mk(&[(u(1), 0.0), (v(1), 1.0)], None)),
            None,
        ];
        let outcomes = streams
            .into_iter()
            .enumerate()
            .map(|(index, stream)| {
                let failure = if stream.is_none() { Some("escaped".to_string()) } else { None };
                let maximal_word = stream
                    .as_ref()
                    .and_then(|s| extract_from_stream(s, 9).ok())
                    .map(|m| m.word);
                SampleOutcome {
                    index,
                    initial: vec![0.0; 4],
                    settle_time: stream.as_ref().and_then(|s| s.settle_time),
                    stream,
                    failure,
                    terminal_distance: 0.001,
                    three_quarter_distance: 0.01,
                    maximal_word,
                }
            })
            .collect();
        let run = BasinRun {
            plan: SamplingPlan {
                n_samples: 4,
                seed: 0,
                region: SampleRegion::Tube { delta: 0.05 },
                horizon_time: 100.0,
                horizon_symbols: 9,
                convergence_threshold: 0.01,
            },
            sample_set: SampleSet { points: vec![vec![0.0; 4]; 4], region_volume: 1.0 },
            outcomes,
        };
        (run, nbhd, target)
    }

    #[test]
    fn decomposition_partitions_the_basin() {
        let (run, nbhd, target) = synthetic_run();
        let est = estimate_from_run(&run, &nbhd, &target, 5).unwrap();
        assert_eq!(est.counts.total, 4);
        assert_eq!(est.counts.failed, 1);
        // Sample 0 follows at depth 0; sample 1 first at depth 3.
        assert_eq!(est.counts.followed, 1);
        assert_eq!(est.per_k[0], 1);
        assert_eq!(est.per_k[1], 0);
        assert_eq!(est.per_k[2], 0);
        assert_eq!(est.per_k[3], 1);
        assert_eq!(est.per_k.iter().sum::<usize>(), est.counts.basin);
        // Monotonicity of the per-shift layers.
        for w in est.per_shift_followed.windows(2) {
            assert!(w[0] <= w[1]);
        }
        for w in est.per_shift_attracted.windows(2) {
            assert!(w[0] <= w[1]);
        }
    }

    #[test]
    fn infinite_threshold_makes_attraction_vacuous() {
        let (mut run, nbhd, target) = synthetic_run();
        run.plan.convergence_threshold = f64::INFINITY;
        let est = estimate_from_run(&run, &nbhd, &target, 3).unwrap();
        assert_eq!(est.per_shift_followed, est.per_shift_attracted);
        assert_eq!(est.counts.followed, est.counts.attracted);
    }

    #[test]
    fn attracted_never_exceeds_followed() {
        let (run, nbhd, target) = synthetic_run();
        let est = estimate_from_run(&run, &nbhd, &target, 4).unwrap();
        assert!(est.counts.attracted <= est.counts.followed);
        for (f, a) in est.per_shift_followed.iter().zip(&est.per_shift_attracted) {
            assert!(a <= f);
        }
    }

    #[test]
    fn shift_cap_must_leave_symbols() {
        let (run, nbhd, target) = synthetic_run();
        assert!(matches!(
            estimate_from_run(&run, &nbhd, &target, 9),
            Err(Error::Basin(BasinError::ShiftTooDeep { .. }))
        ));
    }

    #[test]
    fn census_counts_classes_without_conflicts() {
        let (run, nbhd, _) = synthetic_run();
        let census = census_from_run(&run, &nbhd, None).unwrap();
        assert_eq!(census.total_samples, 4);
        assert_eq!(census.realized, 2);
        assert_eq!(census.conflicts, 0);
        assert_eq!(census.classes.len(), 2);
        assert!(census.classes.iter().all(|c| c.count == 1));
    }

    #[test]
    fn evidence_classification_needs_two_radii() {
        let (run, nbhd, target) = synthetic_run();
        let est = estimate_from_run(&run, &nbhd, &target, 5).unwrap();
        assert!(matches!(
            classify_stability_evidence(&[est.clone()]),
            Err(BasinError::NotEnoughDeltas(1))
        ));
        // Two identical estimates with positive attraction and a vanishing
        // depth tail label as finite type.
        let report = classify_stability_evidence(&[est.clone(), est.clone()]).unwrap();
        assert_eq!(report.label, StabilityEvidence::FragmentaryFiniteType);
        // Populated through the cap: only the plain label remains.
        let mut full = est.clone();
        full.per_k.iter_mut().for_each(|c| *c = 1);
        let report = classify_stability_evidence(&[full.clone(), full]).unwrap();
        assert_eq!(report.label, StabilityEvidence::Fragmentary);
        // A zero interval anywhere is inconclusive.
        let mut zero = est;
        zero.wilson_attracted = wilson_interval(0, 100);
        let report = classify_stability_evidence(&[zero.clone(), zero]).unwrap();
        assert_eq!(report.label, StabilityEvidence::Inconclusive);
    }
}
