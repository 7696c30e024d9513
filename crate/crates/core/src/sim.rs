//! Seeded continuous-time event simulation of the full pipeline: Poisson
//! arrivals, semantic filtering, bufferless blocking on a busy channel,
//! multi-round transmission, delivery bookkeeping, per-layer age traces, and
//! rate statistics.

use crate::error::Result;
use crate::filter::{adaptive_admit, FilterKind, ThresholdMode};
use crate::rng::{replica_seed, stream, StreamKind};
use crate::scenario::{compile, CompiledScenario, Scenario};
use crate::soi::{empirical_soi, Delivery, SoiTrace, UtilityKind};
use crate::optimizer::SolverOptions;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::cmp::Ordering;
use std::collections::BinaryHeap;

/// Per-link counters and rates for one run. Every arrival is classified
/// exactly once as filtered, blocked, or transmitted; transmitted splits into
/// delivered and budget-exhausted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkStats {
    pub sensor: usize,
    pub monitor: usize,
    pub arrived: u64,
    pub filtered: u64,
    pub blocked: u64,
    pub transmitted: u64,
    pub delivered: u64,
    pub exhausted: u64,
    /// Admitted-set arrivals dropped by the adaptive inspection; a subset of
    /// `filtered`.
    pub inspection_dropped: u64,
    pub filtered_pct: f64,
    pub blocked_pct: f64,
    pub transmitted_pct: f64,
    /// Transmission load rate: share of all arrivals put on the air.
    pub load_rate_pct: f64,
    /// Fraction of the horizon the channel spent busy.
    pub busy_pct: f64,
}

/// Time-averaged SoI of one monitor-side processing layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerSoi {
    pub monitor: usize,
    pub group: usize,
    pub deliveries: u64,
    pub soi: f64,
    pub initial_segment_only: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunStats {
    pub seed: u64,
    pub horizon: f64,
    pub links: Vec<LinkStats>,
    pub layers: Vec<LayerSoi>,
    /// Weighted network objective over all layers.
    pub j_soi: f64,
}

impl RunStats {
    pub fn mean_link<F: Fn(&LinkStats) -> f64>(&self, f: F) -> f64 {
        self.links.iter().map(&f).sum::<f64>() / self.links.len() as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct EventTime(f64);

impl Eq for EventTime {}
impl PartialOrd for EventTime {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for EventTime {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.total_cmp(&other.0)
    }
}

/// Min-heap entry: (time, sequence) with sequence breaking ties for
/// determinism.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Arrival {
    time: EventTime,
    seq: u64,
    sensor: usize,
}

impl PartialOrd for Arrival {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Arrival {
    fn cmp(&self, other: &Self) -> Ordering {
        // Reversed for a min-heap.
        other
            .time
            .cmp(&self.time)
            .then_with(|| other.seq.cmp(&self.seq))
    }
}

struct LayerRuntime {
    busy_until: f64,
    busy_time: f64,
    last_admitted_rho: Option<f64>,
    d_counter: u32,
    arrived: u64,
    filtered: u64,
    blocked: u64,
    transmitted: u64,
    delivered: u64,
    exhausted: u64,
    inspection_dropped: u64,
}

impl LayerRuntime {
    fn new() -> Self {
        LayerRuntime {
            busy_until: 0.0,
            busy_time: 0.0,
            last_admitted_rho: None,
            d_counter: 1,
            arrived: 0,
            filtered: 0,
            blocked: 0,
            transmitted: 0,
            delivered: 0,
            exhausted: 0,
            inspection_dropped: 0,
        }
    }
}

/// One deterministic run. Identical (scenario, seed) pairs produce
/// bit-identical statistics.
pub fn run(compiled: &CompiledScenario, seed: u64) -> Result<(RunStats, Vec<SoiTrace>)> {
    let horizon = compiled.horizon;
    let mut layers: Vec<LayerRuntime> = compiled.links.iter().map(|_| LayerRuntime::new()).collect();
    let mut group_deliveries: Vec<Vec<Delivery>> = vec![Vec::new(); compiled.group_count];

    let mut arrival_rngs: Vec<_> = (0..compiled.sensors.len())
        .map(|k| stream(seed, StreamKind::Arrivals, k as u64))
        .collect();
    let mut realization_rngs: Vec<_> = (0..compiled.sensors.len())
        .map(|k| stream(seed, StreamKind::Realizations, k as u64))
        .collect();
    let mut channel_rngs: Vec<_> = (0..compiled.links.len())
        .map(|l| stream(seed, StreamKind::Channel, l as u64))
        .collect();
    let mut threshold_rngs: Vec<_> = (0..compiled.links.len())
        .map(|l| stream(seed, StreamKind::Thresholds, l as u64))
        .collect();

    let mut heap: BinaryHeap<Arrival> = BinaryHeap::new();
    let mut seq = 0u64;
    for (k, sensor) in compiled.sensors.iter().enumerate() {
        let u: f64 = arrival_rngs[k].random();
        let t = -(1.0 - u).ln() / sensor.lambda;
        heap.push(Arrival {
            time: EventTime(t),
            seq,
            sensor: k,
        });
        seq += 1;
    }

    while let Some(ev) = heap.pop() {
        let t = ev.time.0;
        if t > horizon {
            continue;
        }
        let k = ev.sensor;
        // One physical measurement, seen by every layer of this sensor.
        let u: f64 = realization_rngs[k].random();
        let cdf = &compiled.sensors[k].cdf;
        let realization = match cdf.iter().position(|&c| u <= c) {
            Some(i) => i,
            None => cdf.len() - 1,
        };

        for &li in &compiled.sensors[k].links {
            let link = &compiled.links[li];
            let lay = &mut layers[li];
            lay.arrived += 1;

            let slot = match link.slot_of[realization] {
                Some(s) => s as usize,
                None => {
                    lay.filtered += 1;
                    continue;
                }
            };
            if t < lay.busy_until {
                lay.blocked += 1;
                // A blocked admitted-set arrival still advances the drop
                // order: the thresholds model elapsed admitted-set gaps.
                if link.problem.filter.is_adaptive() && lay.last_admitted_rho.is_some() {
                    lay.d_counter = (lay.d_counter + 1).min(link.problem.filter.d_max);
                }
                continue;
            }
            let rho = link.design.rho[slot];
            if link.problem.filter.is_adaptive() {
                if let Some(prev_rho) = lay.last_admitted_rho {
                    let pass = match link.problem.filter.threshold_mode {
                        ThresholdMode::Sampled => adaptive_admit(
                            prev_rho,
                            rho,
                            lay.d_counter,
                            &link.problem.filter,
                            link.design.lambda_q,
                            Some(&mut threshold_rngs[li]),
                        ),
                        ThresholdMode::Expectation => {
                            adaptive_admit::<rand_chacha::ChaCha12Rng>(
                                prev_rho,
                                rho,
                                lay.d_counter,
                                &link.problem.filter,
                                link.design.lambda_q,
                                None,
                            )
                        }
                    };
                    if !pass {
                        lay.filtered += 1;
                        lay.inspection_dropped += 1;
                        lay.d_counter = (lay.d_counter + 1).min(link.problem.filter.d_max);
                        continue;
                    }
                }
            }
            // Admitted and channel idle: transmit.
            lay.last_admitted_rho = Some(rho);
            lay.d_counter = 1;
            lay.transmitted += 1;
            let budget = link.design.budgets[slot];
            let (rounds, success) = link
                .problem
                .error
                .sample_rounds(budget, &mut channel_rngs[li]);
            let occupancy =
                rounds as f64 * link.problem.error.phy_time * link.assignment.lengths[slot];
            lay.busy_until = t + occupancy;
            lay.busy_time += occupancy.min((horizon - t).max(0.0));
            if success {
                lay.delivered += 1;
                let delivery_time = t + occupancy;
                if delivery_time <= horizon {
                    group_deliveries[link.group].push(Delivery {
                        time: delivery_time,
                        rho,
                        service_time: occupancy,
                    });
                }
            } else {
                lay.exhausted += 1;
            }
        }

        // Schedule this sensor's next arrival.
        let u: f64 = arrival_rngs[k].random();
        let dt = -(1.0 - u).ln() / compiled.sensors[k].lambda;
        heap.push(Arrival {
            time: EventTime(t + dt),
            seq,
            sensor: k,
        });
        seq += 1;
    }

    // Assemble traces; deliveries from different links interleave, so order
    // them by time (ties by insertion order via stable sort).
    let mut traces = Vec::with_capacity(compiled.group_count);
    for deliveries in group_deliveries {
        let mut trace = SoiTrace::new(horizon, compiled.rho_max);
        trace.deliveries = deliveries;
        trace.deliveries.sort_by(|a, b| a.time.total_cmp(&b.time));
        traces.push(trace);
    }

    let mut layers_out = Vec::with_capacity(compiled.group_count);
    let mut group_soi = vec![0.0; compiled.group_count];
    for (g, trace) in traces.iter().enumerate() {
        let soi = empirical_soi(trace, &compiled.form)?;
        group_soi[g] = soi.value;
        layers_out.push(LayerSoi {
            monitor: compiled.group_monitor[g],
            group: g,
            deliveries: trace.deliveries.len() as u64,
            soi: soi.value,
            initial_segment_only: soi.initial_segment_only,
        });
    }

    let mut j_soi = 0.0;
    let mut links_out = Vec::with_capacity(compiled.links.len());
    for (li, link) in compiled.links.iter().enumerate() {
        let lay = &layers[li];
        let denom = lay.arrived.max(1) as f64;
        links_out.push(LinkStats {
            sensor: link.sensor,
            monitor: link.monitor,
            arrived: lay.arrived,
            filtered: lay.filtered,
            blocked: lay.blocked,
            transmitted: lay.transmitted,
            delivered: lay.delivered,
            exhausted: lay.exhausted,
            inspection_dropped: lay.inspection_dropped,
            filtered_pct: 100.0 * lay.filtered as f64 / denom,
            blocked_pct: 100.0 * lay.blocked as f64 / denom,
            transmitted_pct: 100.0 * lay.transmitted as f64 / denom,
            load_rate_pct: 100.0 * lay.transmitted as f64 / denom,
            busy_pct: 100.0 * lay.busy_time / horizon,
        });
        j_soi += compiled.monitor_weight * link.obs_prob * group_soi[link.group];
    }

    Ok((
        RunStats {
            seed,
            horizon,
            links: links_out,
            layers: layers_out,
            j_soi,
        },
        traces,
    ))
}

/// One grid point of a sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub lambda: f64,
    /// Admitted size; `None` lets the analytics pick it.
    pub l: Option<usize>,
    pub filter: FilterKind,
    pub form: UtilityKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub point: SweepPoint,
    pub replicas: u32,
    /// Admitted size actually used.
    pub l_used: usize,
    pub j_mean: f64,
    pub j_std: f64,
    pub filtered_mean_pct: f64,
    pub blocked_mean_pct: f64,
    pub transmitted_mean_pct: f64,
    pub load_rate_mean_pct: f64,
    pub busy_mean_pct: f64,
}

/// Apply a sweep point to a scenario.
pub fn apply_point(base: &Scenario, point: &SweepPoint) -> Scenario {
    let mut s = base.clone();
    s.source.lambda = point.lambda;
    s.filter.kind = point.filter;
    s.filter.admitted_size = match point.filter {
        FilterKind::AdaptiveAsymptotic => Some(s.source.n),
        _ => point.l,
    };
    s.utility.form = point.form;
    s
}

/// Run independent seeded replicas of one compiled scenario and fold the
/// statistics. Replica seeds depend only on (seed_base, replica index), so
/// grid points share common random numbers.
pub fn replicate(
    compiled: &CompiledScenario,
    seed_base: u64,
    replicas: u32,
) -> Result<Vec<RunStats>> {
    (0..replicas)
        .into_par_iter()
        .map(|r| run(compiled, replica_seed(seed_base, r as u64)).map(|(stats, _)| stats))
        .collect()
}

/// Sweep a grid of (lambda, admitted size, filter, form) points with seeded
/// replicas per point.
pub fn sweep(
    base: &Scenario,
    grid: &[SweepPoint],
    seed_base: u64,
    replicas: u32,
    solver: &SolverOptions,
) -> Result<Vec<SweepRow>> {
    let mut rows = Vec::with_capacity(grid.len());
    for point in grid {
        let scenario = apply_point(base, point);
        let compiled = compile(&scenario, solver)?;
        let stats = replicate(&compiled, seed_base, replicas)?;
        let n = stats.len() as f64;
        let js: Vec<f64> = stats.iter().map(|s| s.j_soi).collect();
        let j_mean = js.iter().sum::<f64>() / n;
        let j_var = js.iter().map(|j| (j - j_mean) * (j - j_mean)).sum::<f64>() / n.max(1.0);
        let mean_of = |f: &dyn Fn(&LinkStats) -> f64| -> f64 {
            stats.iter().map(|s| s.mean_link(f)).sum::<f64>() / n
        };
        rows.push(SweepRow {
            point: point.clone(),
            replicas,
            l_used: compiled.links[0].design.admitted.len(),
            j_mean,
            j_std: j_var.sqrt(),
            filtered_mean_pct: mean_of(&|l| l.filtered_pct),
            blocked_mean_pct: mean_of(&|l| l.blocked_pct),
            transmitted_mean_pct: mean_of(&|l| l.transmitted_pct),
            load_rate_mean_pct: mean_of(&|l| l.load_rate_pct),
            busy_mean_pct: mean_of(&|l| l.busy_pct),
        });
    }
    Ok(rows)
}
