//! Scenario files: the complete description of a monitoring network run.
//!
//! A scenario is a single JSON document with a fail-closed schema (unknown
//! keys are rejected). Generators emit the reference 100-sensor/16-monitor
//! layout and a minimal single-link variant; `compile` turns a scenario into
//! per-link problems, meta-value tables, admitted designs, and codebooks
//! shared by the analytics and the event simulator.

use crate::channel::{ErrorControlConfig, Protocol, RmaxMode};
use crate::error::{Error, Result};
use crate::filter::{FilterKind, FilterPolicy, ThresholdMode};
use crate::optimizer::{
    admitted_design, optimize_codebook, select_admission_size, AdmittedDesign,
    CodebookAssignment, EtaMode, LinkProblem, SolverOptions,
};
use crate::rng::{stream, StreamKind};
use crate::soi::{UtilityForm, UtilityKind};
use crate::source::{build_topology, zipf_pmf, Topology};
use crate::value::{choquet_weights, meta_value, sugeno_lambda, LinkValues, ValueFunctionSpec};
use rand::Rng;
use serde::{Deserialize, Serialize};

pub const SCHEMA_TAG: &str = "dms-scenario-v1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourceConfig {
    pub n: usize,
    pub s: f64,
    pub lambda: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UtilityConfig {
    pub form: UtilityKind,
    pub beta: f64,
    pub kappa: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AttenuationConfig {
    pub rho_min: f64,
    pub rho_max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FilterConfig {
    pub kind: FilterKind,
    pub d_max: u32,
    /// Codeword-length bound in the drop thresholds; `null` means unbounded.
    pub ell_max: Option<f64>,
    pub threshold_mode: ThresholdMode,
    /// Admitted-set size; `null` selects the objective-maximizing size.
    pub admitted_size: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ErrorControlFile {
    pub protocol: Protocol,
    pub snr_avg_db: f64,
    #[serde(rename = "gamma_M_db")]
    pub gamma_m_db: f64,
    pub g: f64,
    pub c: f64,
    pub r_max: u32,
    pub rmax_mode: RmaxMode,
}

/// How the per-realization sample of an intrinsic feature is derived.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IntrinsicSamples {
    /// The realization's own occurrence probability.
    Pmf,
    /// Linear ramp over the realization index.
    Linspace { from: f64, to: f64 },
    /// `top - span * u^exponent` with `u` the normalized index.
    PowerDecay { top: f64, span: f64, exponent: f64 },
    /// `top` for the first realization, then `top - head_drop - slope * u`.
    HeadSlope { top: f64, head_drop: f64, slope: f64 },
    Constant { value: f64 },
    Explicit { values: Vec<f64> },
}

/// How the per-sensor sample of an extrinsic feature is derived.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExtrinsicSamples {
    /// Mean Euclidean distance from the sensor to the critical zones.
    ZoneDistance,
    /// Seeded uniform draw per sensor.
    Uniform { lo: f64, hi: f64 },
    Constant { value: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntrinsicFeature {
    pub name: String,
    pub limits: [f64; 2],
    pub critical_points: Vec<f64>,
    pub criticality: Vec<f64>,
    pub alpha: f64,
    pub samples: IntrinsicSamples,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExtrinsicFeature {
    pub name: String,
    pub weight: f64,
    pub limits: [f64; 2],
    pub critical_points: Vec<f64>,
    pub criticality: Vec<f64>,
    pub alpha_bar: f64,
    pub samples: ExtrinsicSamples,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SigmaSearch {
    /// First sigma tried, as a fraction of the feature range.
    pub start_frac: f64,
    /// Step between candidates, as a fraction of the feature range.
    pub step_frac: f64,
    pub max_iters: usize,
}

impl Default for SigmaSearch {
    fn default() -> Self {
        SigmaSearch {
            start_frac: 1e-3,
            step_frac: 1e-3,
            max_iters: 100_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FeaturesConfig {
    pub vf_min: f64,
    pub sigma_search: SigmaSearch,
    pub intrinsic: Vec<IntrinsicFeature>,
    pub extrinsic: Vec<ExtrinsicFeature>,
    pub critical_zones: Vec<[f64; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TopologyConfig {
    pub ssm_positions: Vec<[f64; 2]>,
    pub mm_positions: Vec<[f64; 2]>,
    pub fan_out: usize,
    /// Sensors share goal parameters, so each monitor merges them into one
    /// processing layer (one shared age process).
    pub identical_sensors: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CodebookConfig {
    /// Solve for the lengths.
    Optimized,
    /// Use the given real lengths, aligned with the admitted order.
    Explicit { lengths: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub schema: String,
    pub seed: u64,
    pub horizon: f64,
    pub source: SourceConfig,
    pub utility: UtilityConfig,
    pub attenuation: AttenuationConfig,
    pub filter: FilterConfig,
    pub error_control: ErrorControlFile,
    pub monitor_weight: f64,
    pub features: FeaturesConfig,
    pub topology: TopologyConfig,
    pub codebook: CodebookConfig,
}

impl Scenario {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let s: Scenario = serde_json::from_str(text)?;
        if s.schema != SCHEMA_TAG {
            return Err(Error::Validation(format!(
                "unsupported schema tag {:?}",
                s.schema
            )));
        }
        Ok(s)
    }

    pub fn utility_form(&self) -> Result<UtilityForm> {
        UtilityForm::new(self.utility.form, self.utility.beta, self.utility.kappa)
    }

    pub fn filter_policy(&self) -> FilterPolicy {
        FilterPolicy {
            kind: self.filter.kind,
            d_max: self.filter.d_max,
            ell_max: self.filter.ell_max.unwrap_or(f64::INFINITY),
            threshold_mode: self.filter.threshold_mode,
        }
    }

    pub fn error_config(&self) -> Result<ErrorControlConfig> {
        ErrorControlConfig::from_db(
            self.error_control.protocol,
            self.error_control.snr_avg_db,
            self.error_control.gamma_m_db,
            self.error_control.g,
            self.error_control.c,
            self.error_control.r_max,
            self.error_control.rmax_mode,
        )
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema != SCHEMA_TAG {
            return Err(Error::Validation("bad schema tag".into()));
        }
        if !(self.horizon > 0.0) {
            return Err(Error::Validation("horizon must be positive".into()));
        }
        if self.source.n == 0 || !(self.source.lambda > 0.0) || self.source.s < 0.0 {
            return Err(Error::Validation("bad source parameters".into()));
        }
        if !(self.attenuation.rho_min > 0.0)
            || self.attenuation.rho_max < self.attenuation.rho_min
        {
            return Err(Error::Validation("bad attenuation range".into()));
        }
        if !(self.monitor_weight > 0.0) {
            return Err(Error::Validation("monitor weight must be positive".into()));
        }
        if let Some(l) = self.filter.admitted_size {
            if l == 0 || l > self.source.n {
                return Err(Error::Validation("admitted size outside alphabet".into()));
            }
        }
        self.filter_policy().validate().map_err(map_validation)?;
        self.error_config().map_err(map_validation)?;
        self.utility_form().map_err(map_validation)?;
        if self.topology.ssm_positions.is_empty() || self.topology.mm_positions.is_empty() {
            return Err(Error::Validation("topology needs sensors and monitors".into()));
        }
        if self.topology.fan_out == 0 || self.topology.fan_out > self.topology.mm_positions.len()
        {
            return Err(Error::Validation("fan_out outside monitor count".into()));
        }
        if self.features.intrinsic.is_empty() {
            return Err(Error::Validation("need at least one intrinsic feature".into()));
        }
        if self.features.extrinsic.len() < 2 {
            return Err(Error::Validation("need at least two extrinsic features".into()));
        }
        Ok(())
    }
}

fn map_validation(e: Error) -> Error {
    Error::Validation(e.to_string())
}

/// Knobs for the reference scenario generator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GenOptions {
    pub sensors: usize,
    pub monitors_side: usize,
    pub area: f64,
    pub fan_out: usize,
    pub lambda: f64,
}

impl Default for GenOptions {
    fn default() -> Self {
        GenOptions {
            sensors: 100,
            monitors_side: 4,
            area: 10.0,
            fan_out: 4,
            lambda: 0.5,
        }
    }
}

fn default_features(zones: Vec<[f64; 2]>) -> FeaturesConfig {
    FeaturesConfig {
        vf_min: 0.1,
        sigma_search: SigmaSearch::default(),
        intrinsic: vec![
            IntrinsicFeature {
                name: "occurrence".into(),
                limits: [0.0, 1.0],
                critical_points: vec![0.0],
                criticality: vec![1.0],
                alpha: 0.5,
                samples: IntrinsicSamples::Pmf,
            },
            IntrinsicFeature {
                name: "usefulness".into(),
                limits: [0.0, 100.0],
                critical_points: vec![100.0],
                criticality: vec![1.0],
                alpha: 0.5,
                samples: IntrinsicSamples::HeadSlope {
                    top: 100.0,
                    head_drop: 20.7,
                    slope: 0.0,
                },
            },
            IntrinsicFeature {
                name: "loss_risk".into(),
                limits: [0.0, 100.0],
                critical_points: vec![100.0],
                criticality: vec![1.0],
                alpha: 0.5,
                samples: IntrinsicSamples::PowerDecay {
                    top: 100.0,
                    span: 450.0,
                    exponent: 3.0,
                },
            },
        ],
        extrinsic: vec![
            ExtrinsicFeature {
                name: "avg_distance".into(),
                weight: 0.4,
                limits: [3.66, 8.68],
                critical_points: vec![3.66],
                criticality: vec![1.0],
                alpha_bar: 1.0,
                samples: ExtrinsicSamples::ZoneDistance,
            },
            ExtrinsicFeature {
                name: "resolution".into(),
                weight: 0.2,
                limits: [0.0, 5.0],
                critical_points: vec![5.0],
                criticality: vec![1.0],
                alpha_bar: 1.0,
                samples: ExtrinsicSamples::Uniform { lo: 0.5, hi: 5.0 },
            },
            ExtrinsicFeature {
                name: "battery".into(),
                weight: 0.3,
                limits: [0.0, 100.0],
                critical_points: vec![0.0],
                criticality: vec![1.0],
                alpha_bar: 1.0,
                samples: ExtrinsicSamples::Uniform { lo: 5.0, hi: 100.0 },
            },
        ],
        critical_zones: zones,
    }
}

fn base_scenario(seed: u64, topology: TopologyConfig, zones: Vec<[f64; 2]>, lambda: f64) -> Scenario {
    Scenario {
        schema: SCHEMA_TAG.into(),
        seed,
        horizon: 1000.0,
        source: SourceConfig {
            n: 100,
            s: 0.4,
            lambda,
        },
        utility: UtilityConfig {
            form: UtilityKind::Eut,
            beta: 5.0,
            kappa: 2,
        },
        attenuation: AttenuationConfig {
            rho_min: 0.1,
            rho_max: 5.0,
        },
        filter: FilterConfig {
            kind: FilterKind::Fixed,
            d_max: 10,
            ell_max: Some(100.0),
            threshold_mode: ThresholdMode::Sampled,
            admitted_size: None,
        },
        error_control: ErrorControlFile {
            protocol: Protocol::Arq,
            snr_avg_db: 12.0,
            gamma_m_db: 7.4663,
            g: 0.1,
            c: 2.0,
            r_max: 3,
            rmax_mode: RmaxMode::Fixed,
        },
        monitor_weight: 1.0,
        features: default_features(zones),
        topology,
        codebook: CodebookConfig::Optimized,
    }
}

/// HARQ counterpart of the default error-control block.
pub fn harq_error_control() -> ErrorControlFile {
    ErrorControlFile {
        protocol: Protocol::Harq,
        snr_avg_db: 12.0,
        gamma_m_db: 4.3865,
        g: 0.96,
        c: 2.0,
        r_max: 3,
        rmax_mode: RmaxMode::Fixed,
    }
}

/// Reference layout: uniformly scattered sensors, a square grid of monitors,
/// each sensor feeding its four nearest monitors.
pub fn gen_reference(seed: u64, opts: &GenOptions) -> Scenario {
    let mut rng = stream(seed, StreamKind::Scenario, 0);
    let ssm: Vec<[f64; 2]> = (0..opts.sensors)
        .map(|_| {
            let x: f64 = rng.random::<f64>() * opts.area;
            let y: f64 = rng.random::<f64>() * opts.area;
            [x, y]
        })
        .collect();
    let side = opts.monitors_side;
    let cell = opts.area / side as f64;
    let mm: Vec<[f64; 2]> = (0..side * side)
        .map(|z| {
            let col = z % side;
            let row = z / side;
            [cell * (col as f64 + 0.5), cell * (row as f64 + 0.5)]
        })
        .collect();
    // Crucial zones 8, 11, 13 in one-based row-major numbering.
    let zones: Vec<[f64; 2]> = [7usize, 10, 12]
        .iter()
        .filter(|&&z| z < mm.len())
        .map(|&z| mm[z])
        .collect();
    base_scenario(
        seed,
        TopologyConfig {
            ssm_positions: ssm,
            mm_positions: mm,
            fan_out: opts.fan_out.min(side * side),
            identical_sensors: true,
        },
        zones,
        opts.lambda,
    )
}

/// Minimal single-sensor single-monitor scenario with the same defaults.
pub fn gen_single_link(seed: u64, lambda: f64) -> Scenario {
    base_scenario(
        seed,
        TopologyConfig {
            ssm_positions: vec![[2.0, 2.0]],
            mm_positions: vec![[5.0, 5.0]],
            fan_out: 1,
            identical_sensors: true,
        },
        vec![[8.75, 3.75], [6.25, 6.25], [1.25, 8.75]],
        lambda,
    )
}

fn intrinsic_sample(samples: &IntrinsicSamples, i: usize, n: usize, pmf: &[f64]) -> Result<f64> {
    let u = if n > 1 { i as f64 / (n - 1) as f64 } else { 0.0 };
    Ok(match samples {
        IntrinsicSamples::Pmf => pmf[i],
        IntrinsicSamples::Linspace { from, to } => from + (to - from) * u,
        IntrinsicSamples::PowerDecay { top, span, exponent } => top - span * u.powf(*exponent),
        IntrinsicSamples::HeadSlope { top, head_drop, slope } => {
            if i == 0 {
                *top
            } else {
                top - head_drop - slope * u
            }
        }
        IntrinsicSamples::Constant { value } => *value,
        IntrinsicSamples::Explicit { values } => *values
            .get(i)
            .ok_or_else(|| Error::Validation("explicit samples shorter than alphabet".into()))?,
    })
}

fn clamp_to(limits: [f64; 2], z: f64) -> f64 {
    z.clamp(limits[0], limits[1])
}

/// A fully derived (sensor, monitor) link ready for simulation.
#[derive(Debug, Clone)]
pub struct CompiledLink {
    pub sensor: usize,
    pub monitor: usize,
    pub obs_prob: f64,
    /// Age-process group this link's deliveries feed.
    pub group: usize,
    pub problem: LinkProblem,
    pub design: AdmittedDesign,
    pub assignment: CodebookAssignment,
    /// Realization -> admitted slot, for constant-time lookups.
    pub slot_of: Vec<Option<u32>>,
}

#[derive(Debug, Clone)]
pub struct CompiledSensor {
    pub lambda: f64,
    /// Cumulative pmf for realization draws.
    pub cdf: Vec<f64>,
    pub links: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct CompiledScenario {
    pub seed: u64,
    pub horizon: f64,
    pub form: UtilityForm,
    pub rho_max: f64,
    pub monitor_weight: f64,
    pub links: Vec<CompiledLink>,
    pub sensors: Vec<CompiledSensor>,
    pub group_count: usize,
    /// Monitor owning each group.
    pub group_monitor: Vec<usize>,
    pub topology: Topology,
}

/// Turn a scenario file into runnable links. The chosen admitted size is
/// `filter.admitted_size`, or the analytic objective maximizer when absent.
pub fn compile(scenario: &Scenario, solver: &SolverOptions) -> Result<CompiledScenario> {
    scenario.validate()?;
    let n = scenario.source.n;
    let pmf = zipf_pmf(n, scenario.source.s)?;
    let topology = build_topology(
        &scenario.topology.ssm_positions,
        &scenario.topology.mm_positions,
        scenario.topology.fan_out,
    )?;
    let form = scenario.utility_form()?;
    let filter = scenario.filter_policy();
    let error = scenario.error_config()?;

    // Calibrated value functions.
    let feats = &scenario.features;
    let make_vf = |limits: [f64; 2], points: &[f64], weights: &[f64]| -> Result<ValueFunctionSpec> {
        let range = limits[1] - limits[0];
        ValueFunctionSpec::calibrated(
            points.to_vec(),
            weights.to_vec(),
            limits[0],
            limits[1],
            feats.vf_min,
            feats.sigma_search.start_frac * range,
            feats.sigma_search.step_frac * range,
            feats.sigma_search.max_iters,
        )
    };
    let intrinsic_vfs: Vec<ValueFunctionSpec> = feats
        .intrinsic
        .iter()
        .map(|f| make_vf(f.limits, &f.critical_points, &f.criticality))
        .collect::<Result<_>>()?;
    let extrinsic_vfs: Vec<ValueFunctionSpec> = feats
        .extrinsic
        .iter()
        .map(|f| make_vf(f.limits, &f.critical_points, &f.criticality))
        .collect::<Result<_>>()?;

    // Fusion weights.
    let weights: Vec<f64> = feats.extrinsic.iter().map(|f| f.weight).collect();
    let lambda_g = sugeno_lambda(&weights)?;
    let u = choquet_weights(&weights, lambda_g)?;
    let alphas: Vec<f64> = feats.intrinsic.iter().map(|f| f.alpha).collect();
    let alpha_bars: Vec<f64> = feats.extrinsic.iter().map(|f| f.alpha_bar).collect();

    // Intrinsic feature values per realization (sensor-independent).
    let mut intrinsic_vals = vec![vec![0.0; feats.intrinsic.len()]; n];
    for (a, feat) in feats.intrinsic.iter().enumerate() {
        for (i, row) in intrinsic_vals.iter_mut().enumerate() {
            let z = clamp_to(feat.limits, intrinsic_sample(&feat.samples, i, n, &pmf)?);
            row[a] = intrinsic_vfs[a].value(z)?;
        }
    }

    // Extrinsic feature values per sensor.
    let k_count = scenario.topology.ssm_positions.len();
    let mut extrinsic_vals = vec![vec![0.0; feats.extrinsic.len()]; k_count];
    let mut ext_rng = stream(scenario.seed, StreamKind::Scenario, 1);
    for (b, feat) in feats.extrinsic.iter().enumerate() {
        for (k, row) in extrinsic_vals.iter_mut().enumerate() {
            let z = match &feat.samples {
                ExtrinsicSamples::ZoneDistance => {
                    let pos = scenario.topology.ssm_positions[k];
                    let mean: f64 = feats
                        .critical_zones
                        .iter()
                        .map(|z| {
                            let dx = pos[0] - z[0];
                            let dy = pos[1] - z[1];
                            (dx * dx + dy * dy).sqrt()
                        })
                        .sum::<f64>()
                        / feats.critical_zones.len().max(1) as f64;
                    mean
                }
                ExtrinsicSamples::Uniform { lo, hi } => lo + (hi - lo) * ext_rng.random::<f64>(),
                ExtrinsicSamples::Constant { value } => *value,
            };
            row[b] = extrinsic_vfs[b].value(clamp_to(feat.limits, z))?;
        }
    }

    // Meta-values per sensor; monitors of one sensor share them.
    let mut sensor_values: Vec<LinkValues> = Vec::with_capacity(k_count);
    for k in 0..k_count {
        let mut v_raw = Vec::with_capacity(n);
        for row in intrinsic_vals.iter() {
            v_raw.push(meta_value(
                row,
                &alphas,
                &extrinsic_vals[k],
                &alpha_bars,
                &u,
            )?);
        }
        sensor_values.push(LinkValues::from_raw(
            &v_raw,
            scenario.attenuation.rho_min,
            scenario.attenuation.rho_max,
        )?);
    }

    // Assemble links. Identical sensors share one group per monitor.
    let identical = scenario.topology.identical_sensors;
    let mut links = Vec::new();
    let mut group_monitor = Vec::new();
    let mut monitor_group: Vec<Option<usize>> = vec![None; scenario.topology.mm_positions.len()];
    // Cache one solved design per admitted-size key when sensors are identical.
    let mut cached: Option<(usize, AdmittedDesign, CodebookAssignment)> = None;
    for (k, m) in topology.links() {
        let problem = LinkProblem {
            pmf: pmf.clone(),
            values: sensor_values[k].clone(),
            lambda: scenario.source.lambda,
            filter: filter.clone(),
            error: error.clone(),
            form,
            weight: scenario.monitor_weight,
            obs_prob: topology.observation(k, m),
        };
        let chosen_l = match scenario.filter.admitted_size {
            Some(l) => l,
            None => {
                if filter.kind == FilterKind::AdaptiveAsymptotic {
                    n
                } else if let Some((l, _, _)) = &cached {
                    *l
                } else {
                    select_admission_size(&problem, 1..=n, EtaMode::Delivery, solver)?.l_star
                }
            }
        };
        let reuse = identical
            && cached
                .as_ref()
                .map(|(l, _, _)| *l == chosen_l)
                .unwrap_or(false);
        let (design, assignment) = if reuse {
            let (_, d, a) = cached.as_ref().unwrap();
            (d.clone(), a.clone())
        } else {
            let design = admitted_design(&problem, chosen_l)?;
            let assignment = match &scenario.codebook {
                CodebookConfig::Optimized => optimize_codebook(
                    &form,
                    &design.pi,
                    &design.rho,
                    &design.phi,
                    design.gamma,
                    solver,
                )?,
                CodebookConfig::Explicit { lengths } => {
                    if lengths.len() != design.admitted.len() {
                        return Err(Error::Validation(
                            "explicit codebook length does not match admitted size".into(),
                        ));
                    }
                    if lengths.iter().any(|&l| !(l > 0.0)) {
                        return Err(Error::Validation(
                            "explicit codeword lengths must be positive".into(),
                        ));
                    }
                    CodebookAssignment {
                        lengths: lengths.clone(),
                        lengths_int: crate::optimizer::round_lengths(lengths),
                        kraft_sum: crate::optimizer::kraft_sum(lengths),
                        mu: 0.0,
                        chi: 1.0,
                        xi: 0.0,
                        inner_iterations: 0,
                        outer_iterations: 0,
                    }
                }
            };
            if identical {
                cached = Some((chosen_l, design.clone(), assignment.clone()));
            }
            (design, assignment)
        };
        let group = if identical {
            *monitor_group[m].get_or_insert_with(|| {
                group_monitor.push(m);
                group_monitor.len() - 1
            })
        } else {
            group_monitor.push(m);
            group_monitor.len() - 1
        };
        let mut slot_of = vec![None; n];
        for (slot, &i) in design.admitted.indices.iter().enumerate() {
            slot_of[i] = Some(slot as u32);
        }
        links.push(CompiledLink {
            sensor: k,
            monitor: m,
            obs_prob: topology.observation(k, m),
            group,
            problem,
            design,
            assignment,
            slot_of,
        });
    }

    let mut sensors = Vec::with_capacity(k_count);
    for k in 0..k_count {
        let mut cdf = Vec::with_capacity(n);
        let mut acc = 0.0;
        for &p in &pmf {
            acc += p;
            cdf.push(acc);
        }
        sensors.push(CompiledSensor {
            lambda: scenario.source.lambda,
            cdf,
            links: links
                .iter()
                .enumerate()
                .filter(|(_, l)| l.sensor == k)
                .map(|(i, _)| i)
                .collect(),
        });
    }

    Ok(CompiledScenario {
        seed: scenario.seed,
        horizon: scenario.horizon,
        form,
        rho_max: scenario.attenuation.rho_max,
        monitor_weight: scenario.monitor_weight,
        links,
        sensors,
        group_count: group_monitor.len(),
        group_monitor,
        topology,
    })
}
