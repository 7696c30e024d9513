//! Information sources, truncated admitted distributions, and the
//! sensor-monitor topology.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// One sensor's source: a finite alphabet with a Zipf pmf and a Poisson
/// packet arrival rate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourceSpec {
    /// Alphabet size.
    pub n: usize,
    /// Zipf exponent (0 = uniform).
    pub s: f64,
    /// Arrival rate in packets per second.
    pub lambda: f64,
    /// Probability of each realization, non-increasing in index.
    pub pmf: Vec<f64>,
}

impl SourceSpec {
    pub fn zipf(n: usize, s: f64, lambda: f64) -> Result<Self> {
        if lambda <= 0.0 {
            return Err(Error::invalid("arrival rate must be positive"));
        }
        Ok(SourceSpec {
            n,
            s,
            lambda,
            pmf: zipf_pmf(n, s)?,
        })
    }
}

/// Zipf(n, s) pmf: p_i = i^-s / sum_l l^-s, indices 1-based in the math,
/// 0-based in the returned vector. Normalizer summed in ascending index order.
pub fn zipf_pmf(n: usize, s: f64) -> Result<Vec<f64>> {
    if n == 0 {
        return Err(Error::invalid("alphabet size must be at least 1"));
    }
    if s < 0.0 {
        return Err(Error::invalid("Zipf exponent must be non-negative"));
    }
    let mut norm = 0.0;
    for i in 1..=n {
        norm += (i as f64).powf(-s);
    }
    Ok((1..=n).map(|i| (i as f64).powf(-s) / norm).collect())
}

/// The admitted index set of a semantic filter: the `len` most important
/// realizations on one link, ordered by descending meta-value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdmittedSet {
    /// 0-based realization indices, descending meta-value order.
    pub indices: Vec<usize>,
    /// Total source mass of the admitted indices.
    pub mass: f64,
    membership: Vec<bool>,
}

impl AdmittedSet {
    /// Build from the top `len` entries of a descending-value index order.
    pub fn top_of_order(order: &[usize], len: usize, pmf: &[f64]) -> Result<Self> {
        if len == 0 || len > order.len() {
            return Err(Error::invalid(format!(
                "admitted size {len} outside 1..={}",
                order.len()
            )));
        }
        let indices: Vec<usize> = order[..len].to_vec();
        let mut membership = vec![false; pmf.len()];
        let mut mass = 0.0;
        for &i in &indices {
            membership[i] = true;
            mass += pmf[i];
        }
        Ok(AdmittedSet {
            indices,
            mass,
            membership,
        })
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    /// Fixed-length filtering: a packet passes iff its realization is admitted.
    pub fn contains(&self, realization: usize) -> bool {
        self.membership.get(realization).copied().unwrap_or(false)
    }
}

/// Truncated distribution seen by a monitor: the admitted realizations keep
/// their relative frequencies, renormalized and scaled by the observation
/// probability; everything else is zero.
pub fn truncated_pmf(pmf: &[f64], admitted: &AdmittedSet, obs_prob: f64) -> Result<Vec<f64>> {
    if admitted.is_empty() {
        return Err(Error::invalid("admitted set is empty"));
    }
    if !(obs_prob > 0.0 && obs_prob <= 1.0) {
        return Err(Error::invalid("observation probability must be in (0, 1]"));
    }
    let mut out = vec![0.0; pmf.len()];
    for &i in &admitted.indices {
        out[i] = obs_prob * pmf[i] / admitted.mass;
    }
    Ok(out)
}

/// Sensor-monitor connectivity with observation probabilities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Topology {
    pub ssm_positions: Vec<[f64; 2]>,
    pub mm_positions: Vec<[f64; 2]>,
    /// served[k] = monitors of sensor k, ascending.
    pub served: Vec<Vec<usize>>,
    /// serving[m] = sensors of monitor m, ascending.
    pub serving: Vec<Vec<usize>>,
    /// obs_prob[m][slot] aligned with serving[m].
    pub obs_prob: Vec<Vec<f64>>,
    /// Monitors that no sensor reaches.
    pub orphan_monitors: Vec<usize>,
}

impl Topology {
    /// Observation probability of sensor `k` at monitor `m`, zero if not connected.
    pub fn observation(&self, k: usize, m: usize) -> f64 {
        self.serving[m]
            .iter()
            .position(|&kk| kk == k)
            .map(|slot| self.obs_prob[m][slot])
            .unwrap_or(0.0)
    }

    /// All (sensor, monitor) links, sensor-major order.
    pub fn links(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for (k, ms) in self.served.iter().enumerate() {
            for &m in ms {
                out.push((k, m));
            }
        }
        out
    }
}

fn dist2(a: [f64; 2], b: [f64; 2]) -> f64 {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    dx * dx + dy * dy
}

/// Connect every sensor to its `fan_out` nearest monitors (Euclidean), ties
/// broken by lower monitor index, and give each monitor equal observation
/// probability over its serving sensors. Monitors left unserved are reported
/// in `orphan_monitors` rather than treated as an error.
pub fn build_topology(
    ssm_positions: &[[f64; 2]],
    mm_positions: &[[f64; 2]],
    fan_out: usize,
) -> Result<Topology> {
    if fan_out == 0 || fan_out > mm_positions.len() {
        return Err(Error::invalid(format!(
            "fan_out {fan_out} outside 1..={}",
            mm_positions.len()
        )));
    }
    let mut served = Vec::with_capacity(ssm_positions.len());
    let mut serving = vec![Vec::new(); mm_positions.len()];
    for (k, &sp) in ssm_positions.iter().enumerate() {
        let mut by_distance: Vec<usize> = (0..mm_positions.len()).collect();
        by_distance.sort_by(|&a, &b| {
            dist2(sp, mm_positions[a])
                .total_cmp(&dist2(sp, mm_positions[b]))
                .then(a.cmp(&b))
        });
        let mut ms: Vec<usize> = by_distance[..fan_out].to_vec();
        ms.sort_unstable();
        for &m in &ms {
            serving[m].push(k);
        }
        served.push(ms);
    }
    let mut obs_prob = Vec::with_capacity(serving.len());
    let mut orphan_monitors = Vec::new();
    for (m, ks) in serving.iter().enumerate() {
        if ks.is_empty() {
            orphan_monitors.push(m);
            obs_prob.push(Vec::new());
        } else {
            obs_prob.push(vec![1.0 / ks.len() as f64; ks.len()]);
        }
    }
    Ok(Topology {
        ssm_positions: ssm_positions.to_vec(),
        mm_positions: mm_positions.to_vec(),
        served,
        serving,
        obs_prob,
        orphan_monitors,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn assert_close(a: f64, b: f64, tol: f64) {
        assert!((a - b).abs() <= tol, "{a} vs {b}");
    }

    #[test]
    fn zipf_uniform_when_exponent_zero() {
        let p = zipf_pmf(4, 0.0).unwrap();
        assert_eq!(p, vec![0.25; 4]);
    }

    #[test]
    fn zipf_single_symbol() {
        assert_eq!(zipf_pmf(1, 0.4).unwrap(), vec![1.0]);
    }

    #[test]
    fn zipf_head_matches_direct_summation() {
        // Brute-force normalizer at higher effective precision: Kahan sum.
        let (n, s) = (100usize, 0.4f64);
        let mut sum = 0.0f64;
        let mut comp = 0.0f64;
        for i in 1..=n {
            let term = (i as f64).powf(-s);
            let y = term - comp;
            let t = sum + y;
            comp = (t - sum) - y;
            sum = t;
        }
        let expect = 1.0 / sum;
        let p = zipf_pmf(n, s).unwrap();
        assert_close(p[0], expect, 1e-14);
    }

    #[test]
    fn zipf_rejects_empty_alphabet() {
        assert!(zipf_pmf(0, 0.4).is_err());
    }

    #[test]
    fn zipf_sums_to_one_and_non_increasing() {
        for &(n, s) in &[(3usize, 0.0f64), (10, 0.4), (100, 1.0), (57, 2.3)] {
            let p = zipf_pmf(n, s).unwrap();
            let total: f64 = p.iter().sum();
            assert_close(total, 1.0, 1e-12);
            for w in p.windows(2) {
                assert!(w[0] >= w[1]);
                if s > 0.0 {
                    assert!(w[0] > w[1]);
                }
            }
            assert!(p.iter().all(|&x| x > 0.0));
        }
    }

    #[test]
    fn truncation_renormalizes() {
        let pmf = vec![0.5, 0.3, 0.2];
        let adm = AdmittedSet::top_of_order(&[0, 1, 2], 2, &pmf).unwrap();
        let t = truncated_pmf(&pmf, &adm, 1.0).unwrap();
        assert_close(t[0], 0.625, 1e-15);
        assert_close(t[1], 0.375, 1e-15);
        assert_eq!(t[2], 0.0);
    }

    #[test]
    fn truncation_full_set_is_identity() {
        let pmf = zipf_pmf(6, 0.7).unwrap();
        let adm = AdmittedSet::top_of_order(&[0, 1, 2, 3, 4, 5], 6, &pmf).unwrap();
        let t = truncated_pmf(&pmf, &adm, 1.0).unwrap();
        for (a, b) in t.iter().zip(pmf.iter()) {
            assert_close(*a, *b, 1e-12);
        }
    }

    #[test]
    fn truncation_scales_by_observation_probability() {
        let pmf = vec![0.5, 0.3, 0.2];
        let adm = AdmittedSet::top_of_order(&[0, 1], 2, &pmf).unwrap();
        let t = truncated_pmf(&pmf, &adm, 0.25).unwrap();
        assert_close(t[0], 0.15625, 1e-15);
        assert_close(t[1], 0.09375, 1e-15);
        let total: f64 = adm.indices.iter().map(|&i| t[i]).sum();
        assert_close(total, 0.25, 1e-12);
    }

    #[test]
    fn truncation_rejects_empty_admitted() {
        let pmf = vec![1.0];
        let adm = AdmittedSet {
            indices: vec![],
            mass: 0.0,
            membership: vec![false],
        };
        assert!(truncated_pmf(&pmf, &adm, 1.0).is_err());
    }

    #[test]
    fn single_link_topology() {
        let t = build_topology(&[[0.0, 0.0]], &[[1.0, 1.0]], 1).unwrap();
        assert_eq!(t.observation(0, 0), 1.0);
        assert!(t.orphan_monitors.is_empty());
    }

    #[test]
    fn two_sensors_share_one_monitor_equally() {
        let t = build_topology(&[[0.0, 0.0], [2.0, 0.0]], &[[1.0, 0.0]], 1).unwrap();
        assert_eq!(t.observation(0, 0), 0.5);
        assert_eq!(t.observation(1, 0), 0.5);
    }

    #[test]
    fn nearest_tie_breaks_to_lower_monitor_index() {
        // Sensor equidistant from both monitors.
        let t = build_topology(&[[0.0, 0.0]], &[[1.0, 0.0], [-1.0, 0.0]], 1).unwrap();
        assert_eq!(t.served[0], vec![0]);
    }

    #[test]
    fn topology_is_deterministic() {
        let ssm: Vec<[f64; 2]> = (0..30)
            .map(|i| [(i * 7 % 13) as f64, (i * 5 % 11) as f64])
            .collect();
        let mm: Vec<[f64; 2]> = (0..6).map(|i| [i as f64 * 2.0, 3.0]).collect();
        let a = build_topology(&ssm, &mm, 3).unwrap();
        let b = build_topology(&ssm, &mm, 3).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn observation_probabilities_sum_to_one_per_served_monitor() {
        let ssm: Vec<[f64; 2]> = (0..25)
            .map(|i| [((i * 31) % 97) as f64 / 10.0, ((i * 17) % 89) as f64 / 10.0])
            .collect();
        let mm: Vec<[f64; 2]> = (0..9)
            .map(|i| [(i % 3) as f64 * 3.0 + 1.5, (i / 3) as f64 * 3.0 + 1.5])
            .collect();
        let t = build_topology(&ssm, &mm, 4).unwrap();
        for m in 0..mm.len() {
            if t.orphan_monitors.contains(&m) {
                continue;
            }
            let sum: f64 = t.obs_prob[m].iter().sum();
            assert_close(sum, 1.0, 1e-12);
        }
    }
}
