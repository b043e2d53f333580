//! Monte-Carlo evaluation over random antenna subsets and subcarriers:
//! empirical CDFs, medians, means, and 90% confidence intervals per antenna
//! count.
//!
//! Every (subset, subcarrier) cell is an independent work item; cells are
//! evaluated in parallel and reduced over a canonically ordered sample set,
//! so reports are bit-identical regardless of thread count. Subset draws
//! derive one seed per draw from the master seed through a SplitMix64-style
//! mix, which keeps the ensemble reproducible under any schedule.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::capacity::{dpc_capacity, DEFAULT_MAX_ITER, DEFAULT_TOL};
use crate::channel::{AntennaSubset, ChannelTensor, EvalParams, NormState};
use crate::error::{Error, Result};
use crate::spectral::singular_spread;

/// Statistics of one metric at one antenna count.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleRecord {
    /// Metric name: `spread_db` or `dpc_capacity`.
    pub metric: String,
    /// Antenna count M this record was computed at.
    pub antennas: usize,
    /// Number of (subset, subcarrier) samples.
    pub samples: usize,
    pub mean: f64,
    /// Value at the 0.5 crossing of the emitted CDF (lower empirical median).
    pub median: f64,
    /// 5th percentile with linear interpolation (90% interval, lower edge).
    pub ci_low: f64,
    /// 95th percentile with linear interpolation (90% interval, upper edge).
    pub ci_high: f64,
    /// Empirical CDF as (value, cumulative probability) pairs; probabilities
    /// are strictly increasing and end at 1.
    pub cdf: Vec<(f64, f64)>,
}

/// Per-M ensemble statistics for one metric.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleReport {
    pub records: Vec<EnsembleRecord>,
}

impl EnsembleReport {
    /// The record for a given antenna count, if present.
    pub fn at(&self, antennas: usize) -> Option<&EnsembleRecord> {
        self.records.iter().find(|r| r.antennas == antennas)
    }

    /// Writes all CDFs as CSV with columns `metric,M,value,cum_prob`.
    pub fn write_cdf_csv<W: std::io::Write>(&self, w: &mut W) -> Result<()> {
        writeln!(w, "metric,M,value,cum_prob")?;
        for rec in &self.records {
            for &(value, prob) in &rec.cdf {
                writeln!(w, "{},{},{},{}", rec.metric, rec.antennas, value, prob)?;
            }
        }
        Ok(())
    }
}

/// Seed for subset draw `index` under `master_seed`: a SplitMix64 finalizer
/// over the master seed xor the golden-ratio-stepped index.
pub fn subset_seed(master_seed: u64, index: u64) -> u64 {
    let mut z = master_seed ^ index.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Draws `count` antenna subsets of size `m` out of `ports`, each uniform
/// without replacement within the draw; repeats across draws are allowed.
/// When `m == ports` there is only one possible choice and exactly one
/// subset is returned regardless of `count`.
pub fn draw_subsets(
    ports: usize,
    m: usize,
    count: usize,
    master_seed: u64,
) -> Result<Vec<AntennaSubset>> {
    if m == 0 || m > ports {
        return Err(Error::BadSubset(format!(
            "cannot choose {m} of {ports} ports"
        )));
    }
    if count == 0 {
        return Err(Error::InvalidParam("subset count must be at least 1".into()));
    }
    if m == ports {
        return Ok(vec![AntennaSubset::full(ports)]);
    }
    (0..count)
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(subset_seed(master_seed, i as u64));
            // partial Fisher-Yates, then sort into the canonical increasing form
            let mut pool: Vec<usize> = (0..ports).collect();
            for j in 0..m {
                let pick = j + rng.gen_range(0..ports - j);
                pool.swap(j, pick);
            }
            let mut indices = pool[..m].to_vec();
            indices.sort_unstable();
            AntennaSubset::new(indices)
        })
        .collect()
}

/// Singular-value-spread ensemble. Requires Normalization 1: the spread
/// should reflect joint user orthogonality only, not channel-norm imbalance.
pub fn run_spread_ensemble(tensor: &ChannelTensor, params: &EvalParams) -> Result<EnsembleReport> {
    if tensor.norm_state() != NormState::Norm1 {
        return Err(Error::InvalidParam(format!(
            "spread ensemble requires a NORM1 tensor, got {}",
            tensor.norm_state()
        )));
    }
    run_ensemble(tensor, params, "spread_db", |h, _| {
        singular_spread(h).map(|r| r.spread_db)
    })
}

/// DPC-capacity ensemble. The tensor must be normalized; the caller picks
/// Normalization 2 for co-located users and Normalization 1 for users far
/// apart with large attenuation imbalance.
pub fn run_capacity_ensemble(tensor: &ChannelTensor, params: &EvalParams) -> Result<EnsembleReport> {
    if tensor.norm_state() == NormState::Raw {
        return Err(Error::NormalizationRequired);
    }
    run_ensemble(tensor, params, "dpc_capacity", |h, rho| {
        dpc_capacity(h, rho, DEFAULT_TOL, DEFAULT_MAX_ITER).map(|r| r.c_dpc)
    })
}

fn run_ensemble<F>(
    tensor: &ChannelTensor,
    params: &EvalParams,
    metric: &str,
    cell_fn: F,
) -> Result<EnsembleReport>
where
    F: Fn(&nalgebra::DMatrix<num_complex::Complex64>, f64) -> Result<f64> + Sync,
{
    params.validate(tensor)?;
    let n = tensor.subcarriers();
    let mut records = Vec::with_capacity(params.antenna_counts.len());
    for &m in &params.antenna_counts {
        let subsets = draw_subsets(tensor.ports(), m, params.num_subsets, params.master_seed)?;
        // flattened (subset, subcarrier) grid in canonical order
        let cells: Vec<(usize, usize)> = (0..subsets.len())
            .flat_map(|s| (0..n).map(move |l| (s, l)))
            .collect();
        let samples: Vec<f64> = cells
            .par_iter()
            .map(|&(s, l)| {
                let h = tensor
                    .select_subset(&subsets[s], l)
                    .map_err(|e| e.at_cell(m, s, l))?;
                cell_fn(&h, params.rho).map_err(|e| e.at_cell(m, s, l))
            })
            .collect::<Result<_>>()?;
        records.push(summarize(metric, m, samples));
    }
    Ok(EnsembleReport { records })
}

fn summarize(metric: &str, antennas: usize, mut samples: Vec<f64>) -> EnsembleRecord {
    samples.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = samples.len();
    let mean = crate::channel::neumaier_sum(samples.iter().cloned()) / n as f64;
    let cdf = empirical_cdf(&samples);
    let median = cdf
        .iter()
        .find(|&&(_, p)| p >= 0.5)
        .map(|&(v, _)| v)
        .unwrap_or(f64::NAN);
    EnsembleRecord {
        metric: metric.to_string(),
        antennas,
        samples: n,
        mean,
        median,
        ci_low: percentile(&samples, 0.05),
        ci_high: percentile(&samples, 0.95),
        cdf,
    }
}

/// Empirical CDF of a sorted sample set: one point per distinct value,
/// probabilities strictly increasing, ending at exactly 1.
pub fn empirical_cdf(sorted: &[f64]) -> Vec<(f64, f64)> {
    let n = sorted.len();
    let mut out = Vec::new();
    let mut i = 0;
    while i < n {
        let v = sorted[i];
        let mut j = i + 1;
        while j < n && sorted[j] == v {
            j += 1;
        }
        out.push((v, j as f64 / n as f64));
        i = j;
    }
    out
}

/// Linearly interpolated percentile of a sorted sample set, `q` in [0, 1].
pub fn percentile(sorted: &[f64], q: f64) -> f64 {
    let n = sorted.len();
    if n == 0 {
        return f64::NAN;
    }
    if n == 1 {
        return sorted[0];
    }
    let pos = q.clamp(0.0, 1.0) * (n - 1) as f64;
    let lo = pos.floor() as usize;
    let frac = pos - lo as f64;
    if lo + 1 >= n || frac == 0.0 {
        return sorted[lo.min(n - 1)];
    }
    if sorted[lo].is_infinite() || sorted[lo + 1].is_infinite() {
        // avoid inf * 0 artifacts at degenerate cells
        return if frac > 0.0 { sorted[lo + 1] } else { sorted[lo] };
    }
    sorted[lo] * (1.0 - frac) + sorted[lo + 1] * frac
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::Normalization;
    use crate::models::gen_rayleigh;
    use crate::norm::{normalize1, normalize2};
    use num_complex::Complex64;

    fn params(users: usize, counts: Vec<usize>, subsets: usize, seed: u64) -> EvalParams {
        EvalParams {
            rho: 10.0,
            num_users: users,
            antenna_counts: counts,
            num_subsets: subsets,
            master_seed: seed,
            normalization: Normalization::Norm1,
        }
    }

    #[test]
    fn full_subset_is_single_choice() {
        let subs = draw_subsets(128, 128, 2000, 1).unwrap();
        assert_eq!(subs.len(), 1);
        assert_eq!(subs[0].indices(), (0..128).collect::<Vec<_>>().as_slice());

        let subs = draw_subsets(5, 5, 17, 9).unwrap();
        assert_eq!(subs.len(), 1);
        assert_eq!(subs[0].indices(), &[0, 1, 2, 3, 4]);
    }

    #[test]
    fn subset_draws_are_deterministic_and_uniform_shaped() {
        let a = draw_subsets(128, 4, 50, 42).unwrap();
        let b = draw_subsets(128, 4, 50, 42).unwrap();
        assert_eq!(a, b);
        let c = draw_subsets(128, 4, 50, 43).unwrap();
        assert_ne!(a, c);
        for s in &a {
            assert_eq!(s.len(), 4);
            assert!(s.indices().windows(2).all(|w| w[0] < w[1]));
            assert!(*s.indices().last().unwrap() < 128);
        }
    }

    #[test]
    fn oversized_subset_is_rejected() {
        assert!(matches!(
            draw_subsets(8, 9, 1, 0),
            Err(Error::BadSubset(_))
        ));
    }

    #[test]
    fn spread_ensemble_requires_norm1() {
        let t = gen_rayleigh(2, 8, 3, 0).unwrap();
        let p = params(2, vec![4], 5, 0);
        assert!(run_spread_ensemble(&t, &p).is_err());
        let n2 = normalize2(&t).unwrap();
        assert!(run_spread_ensemble(&n2, &p).is_err());
        let n1 = normalize1(&t).unwrap();
        run_spread_ensemble(&n1, &p).unwrap();
    }

    #[test]
    fn orthogonal_rows_give_point_mass_at_zero() {
        // K orthogonal equal-norm rows at every subcarrier, M = A
        let t = crate::channel::ChannelTensor::from_fn(
            2,
            4,
            3,
            2.6e9,
            50e6,
            crate::channel::ArrayKind::Generic,
            NormState::Raw,
            |k, m, _| {
                if m == 2 * k || m == 2 * k + 1 {
                    Complex64::new(2f64.sqrt(), 0.0)
                } else {
                    Complex64::new(0.0, 0.0)
                }
            },
        )
        .unwrap();
        let n1 = normalize1(&t).unwrap();
        let rep = run_spread_ensemble(&n1, &params(2, vec![4], 10, 3)).unwrap();
        let rec = rep.at(4).unwrap();
        assert_eq!(rec.cdf.len(), 1);
        assert!(rec.cdf[0].0.abs() < 1e-9);
        assert_eq!(rec.cdf[0].1, 1.0);
        assert!(rec.median.abs() < 1e-9);
        assert_eq!(rec.samples, 3); // one subset, three subcarriers

        // capacity over the same tensor: mean K log2(1 + rho), zero-width CI
        let mut p = params(2, vec![4], 10, 3);
        p.normalization = Normalization::Norm2;
        let n2 = normalize2(&t).unwrap();
        let rep = run_capacity_ensemble(&n2, &p).unwrap();
        let rec = rep.at(4).unwrap();
        assert!((rec.mean - crate::capacity::if_capacity(2, 10.0)).abs() < 1e-9);
        assert!((rec.ci_high - rec.ci_low).abs() < 1e-9);
    }

    #[test]
    fn reports_are_deterministic() {
        let t = normalize1(&gen_rayleigh(2, 16, 4, 5).unwrap()).unwrap();
        let p = params(2, vec![2, 4, 16], 25, 99);
        let a = run_spread_ensemble(&t, &p).unwrap();
        let b = run_spread_ensemble(&t, &p).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn order_independence_under_thread_counts() {
        let t = normalize1(&gen_rayleigh(2, 16, 6, 5).unwrap()).unwrap();
        let p = params(2, vec![4], 40, 7);
        let single = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap()
            .install(|| run_spread_ensemble(&t, &p))
            .unwrap();
        let multi = rayon::ThreadPoolBuilder::new()
            .num_threads(4)
            .build()
            .unwrap()
            .install(|| run_spread_ensemble(&t, &p))
            .unwrap();
        assert_eq!(single, multi);
    }

    #[test]
    fn rayleigh_capacity_mean_grows_with_antennas() {
        let draws = 400;
        let mut means = Vec::new();
        for &m in &[4usize, 16, 64] {
            let t = normalize2(&gen_rayleigh(4, m, draws, 17).unwrap()).unwrap();
            let mut p = params(4, vec![m], 1, 17);
            p.normalization = Normalization::Norm2;
            let rep = run_capacity_ensemble(&t, &p).unwrap();
            means.push(rep.at(m).unwrap().mean);
        }
        assert!(
            means[0] < means[1] && means[1] < means[2],
            "means must grow with M: {means:?}"
        );
    }

    #[test]
    fn cdf_ends_at_one_and_median_matches_crossing() {
        let t = normalize1(&gen_rayleigh(2, 12, 5, 21).unwrap()).unwrap();
        let rep = run_spread_ensemble(&t, &params(2, vec![4], 30, 11)).unwrap();
        let rec = rep.at(4).unwrap();
        assert_eq!(rec.cdf.last().unwrap().1, 1.0);
        for w in rec.cdf.windows(2) {
            assert!(w[0].0 < w[1].0);
            assert!(w[0].1 < w[1].1);
        }
        let crossing = rec.cdf.iter().find(|&&(_, p)| p >= 0.5).unwrap().0;
        assert_eq!(rec.median, crossing);
        assert!(rec.ci_low <= rec.median && rec.median <= rec.ci_high);
    }

    #[test]
    fn cell_errors_carry_coordinates() {
        // 3 users but M=2 antennas: overloaded cells
        let t = normalize1(&gen_rayleigh(3, 8, 2, 0).unwrap()).unwrap();
        let p = params(3, vec![2], 4, 0);
        let err = run_spread_ensemble(&t, &p).unwrap_err();
        match err {
            Error::Cell { antennas, .. } => assert_eq!(antennas, 2),
            other => panic!("expected cell error, got {other:?}"),
        }
    }

    #[test]
    fn percentile_interpolates() {
        let xs = vec![0.0, 10.0];
        assert_eq!(percentile(&xs, 0.5), 5.0);
        assert_eq!(percentile(&xs, 0.0), 0.0);
        assert_eq!(percentile(&xs, 1.0), 10.0);
        let xs = vec![1.0, 2.0, 3.0, 4.0, 5.0];
        assert!((percentile(&xs, 0.25) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn csv_emission_shape() {
        let t = normalize1(&gen_rayleigh(2, 8, 2, 1).unwrap()).unwrap();
        let rep = run_spread_ensemble(&t, &params(2, vec![2, 4], 3, 1)).unwrap();
        let mut buf = Vec::new();
        rep.write_cdf_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), "metric,M,value,cum_prob");
        assert!(text.lines().skip(1).all(|l| l.starts_with("spread_db,")));
    }
}
