//! Born-rule outcome sampling, direct and two-stage (sharp value, then
//! kernel randomization), with homogeneity and concentration checks.
//!
//! RNG contract: ChaCha8 seeded with `seed_from_u64(seed)`. Draws are split
//! into shards of [`SHARD_SIZE`]; shard `s` uses stream `s` of that
//! generator. Shard boundaries depend on `N` alone, so a histogram is
//! identical whatever the thread count or execution strategy.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::kernels::MarkovKernel;
use crate::operators::{expectation, State};
use crate::povm::{Povm, SpectralMeasure, POVM_TOL};
use crate::sets::{check_partition, MeasurableSet};

pub const SHARD_SIZE: u64 = 8192;
/// Probabilities may leave `[0, 1]` by this much before they are rejected.
pub const PROBABILITY_SLACK: f64 = 1e-10;
/// Confidence level of the chi-square acceptance quantile.
pub const CHI_SQUARE_LEVEL: f64 = 0.999;
/// Per-cell acceptance in binomial standard deviations.
pub const SIGMA_BOUND: f64 = 4.0;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OutcomeHistogram {
    pub cells: Vec<String>,
    /// Convex hull `(lower, upper)` of each cell.
    pub bounds: Vec<(f64, f64)>,
    pub counts: Vec<u64>,
    pub total: u64,
    pub seed: u64,
    pub observable: String,
}

fn hull(set: &MeasurableSet) -> (f64, f64) {
    use crate::sets::NatSet;
    match set {
        MeasurableSet::Line(l) => match (l.intervals().first(), l.intervals().last()) {
            (Some(a), Some(b)) => (a.lo, b.hi),
            _ => (f64::NAN, f64::NAN),
        },
        MeasurableSet::Circle(c) => match (c.arcs().first(), c.arcs().last()) {
            (Some(a), Some(b)) => (a.lo, b.hi),
            _ => (f64::NAN, f64::NAN),
        },
        MeasurableSet::Nat(NatSet::Finite(v)) => match (v.first(), v.last()) {
            (Some(&a), Some(&b)) => (a as f64, (b + 1) as f64),
            _ => (f64::NAN, f64::NAN),
        },
        MeasurableSet::Nat(NatSet::Cofinite(v)) => {
            let first = (0..).find(|n| !v.contains(n)).unwrap_or(0);
            (first as f64, f64::INFINITY)
        }
        MeasurableSet::Point { at, .. } => (*at, *at),
    }
}

impl OutcomeHistogram {
    fn new(partition: &[MeasurableSet], counts: Vec<u64>, seed: u64, observable: String) -> Self {
        OutcomeHistogram {
            cells: partition.iter().map(ToString::to_string).collect(),
            bounds: partition.iter().map(hull).collect(),
            total: counts.iter().sum(),
            counts,
            seed,
            observable,
        }
    }

    pub fn frequencies(&self) -> Vec<f64> {
        self.counts.iter().map(|&c| c as f64 / self.total as f64).collect()
    }

    /// `cell,lower,upper,count` rows with a header.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("cell,lower,upper,count\n");
        for ((cell, (lo, hi)), count) in self.cells.iter().zip(&self.bounds).zip(&self.counts) {
            out.push_str(&format!("\"{cell}\",{lo:?},{hi:?},{count}\n"));
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("histogram serializes")
    }
}

fn check_probabilities(p: Vec<f64>) -> Result<Vec<f64>> {
    if let Some(&bad) = p.iter().find(|&&x| !(-PROBABILITY_SLACK..=1.0 + PROBABILITY_SLACK).contains(&x)) {
        return Err(Error::NotEffect { eigenvalue: bad });
    }
    let total: f64 = p.iter().sum();
    if (total - 1.0).abs() > POVM_TOL {
        return Err(Error::NotNormalized { norm: total });
    }
    Ok(p.into_iter().map(|x| x.clamp(0.0, 1.0)).collect())
}

/// `p_j = ⟨ψ, F(Δ_j) ψ⟩`.
pub fn born_probabilities(povm: &Povm, psi: &State, partition: &[MeasurableSet]) -> Result<Vec<f64>> {
    check_partition(partition)?;
    if psi.dim() != povm.dim() {
        return Err(Error::DimensionMismatch {
            left: povm.dim(),
            right: psi.dim(),
        });
    }
    let p = Exec::default().try_map(partition, |s| expectation(povm.effect(s)?.op(), psi))?;
    check_probabilities(p)
}

/// Row `μ_{Δ_j}(λ)` of the kernel over a partition.
fn kernel_row(kernel: &MarkovKernel, lambda: f64, partition: &[MeasurableSet]) -> Result<Vec<f64>> {
    partition.iter().map(|s| kernel.evaluate(lambda, s)).collect()
}

/// `Σ_k ⟨ψ, P_k ψ⟩ μ_{Δ_j}(λ_k)`, the law of the two-stage procedure.
pub fn two_stage_marginal(
    spectral: &SpectralMeasure,
    kernel: &MarkovKernel,
    psi: &State,
    partition: &[MeasurableSet],
) -> Result<Vec<f64>> {
    check_partition(partition)?;
    let atoms = spectral.atom_probabilities(psi.amplitudes());
    let mut p = vec![0.0; partition.len()];
    for (&lambda, &w) in spectral.points().iter().zip(&atoms) {
        if w == 0.0 {
            continue;
        }
        for (pj, r) in p.iter_mut().zip(kernel_row(kernel, lambda, partition)?) {
            *pj += w * r;
        }
    }
    Ok(p)
}

fn weighted(p: &[f64]) -> Result<WeightedIndex<f64>> {
    WeightedIndex::new(p).map_err(|_| Error::DegenerateProbabilities {
        total: p.iter().sum(),
    })
}

/// Splits `n` draws into shards and merges the per-shard counts in order.
fn sharded_counts<F>(n: u64, seed: u64, cells: usize, exec: Exec, draw: F) -> Result<Vec<u64>>
where
    F: Fn(&mut ChaCha8Rng) -> usize + Sync + Send,
{
    if n == 0 {
        return Err(Error::InvalidParameter("sample size must be at least 1".into()));
    }
    let shards = n.div_ceil(SHARD_SIZE) as usize;
    let parts = exec.map_range(shards, |s| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(s as u64);
        let len = SHARD_SIZE.min(n - s as u64 * SHARD_SIZE);
        let mut counts = vec![0u64; cells];
        for _ in 0..len {
            counts[draw(&mut rng)] += 1;
        }
        counts
    });
    let mut total = vec![0u64; cells];
    for part in parts {
        for (t, c) in total.iter_mut().zip(part) {
            *t += c;
        }
    }
    Ok(total)
}

/// `N` i.i.d. categorical draws from a probability vector.
pub fn sample_categorical(p: &[f64], n: u64, seed: u64, exec: Exec) -> Result<Vec<u64>> {
    let dist = weighted(p)?;
    sharded_counts(n, seed, p.len(), exec, |rng| dist.sample(rng))
}

pub fn sample_direct(
    povm: &Povm,
    psi: &State,
    partition: &[MeasurableSet],
    n: u64,
    seed: u64,
) -> Result<OutcomeHistogram> {
    sample_direct_with(povm, psi, partition, n, seed, Exec::default())
}

pub fn sample_direct_with(
    povm: &Povm,
    psi: &State,
    partition: &[MeasurableSet],
    n: u64,
    seed: u64,
    exec: Exec,
) -> Result<OutcomeHistogram> {
    let p = born_probabilities(povm, psi, partition)?;
    let counts = sample_categorical(&p, n, seed, exec)?;
    Ok(OutcomeHistogram::new(partition, counts, seed, povm.label().to_string()))
}

pub fn sample_two_stage(
    spectral: &SpectralMeasure,
    kernel: &MarkovKernel,
    psi: &State,
    partition: &[MeasurableSet],
    n: u64,
    seed: u64,
) -> Result<OutcomeHistogram> {
    sample_two_stage_with(spectral, kernel, psi, partition, n, seed, Exec::default())
}

/// Per draw: a sharp atom `λ_k` with probability `⟨ψ, P_k ψ⟩`, then a cell
/// `j` with probability `μ_{Δ_j}(λ_k)`.
pub fn sample_two_stage_with(
    spectral: &SpectralMeasure,
    kernel: &MarkovKernel,
    psi: &State,
    partition: &[MeasurableSet],
    n: u64,
    seed: u64,
    exec: Exec,
) -> Result<OutcomeHistogram> {
    check_partition(partition)?;
    if psi.dim() != spectral.dim() {
        return Err(Error::DimensionMismatch {
            left: spectral.dim(),
            right: psi.dim(),
        });
    }
    // Validates the kernel domain the same way the smeared POVM would.
    crate::povm::smear(spectral, kernel)?;
    let atoms = spectral.atom_probabilities(psi.amplitudes());
    let first = weighted(&atoms)?;
    let rows = spectral
        .points()
        .iter()
        .zip(&atoms)
        .map(|(&lambda, &w)| {
            if w > 0.0 {
                weighted(&kernel_row(kernel, lambda, partition)?).map(Some)
            } else {
                Ok(None)
            }
        })
        .collect::<Result<Vec<_>>>()?;
    let counts = sharded_counts(n, seed, partition.len(), exec, |rng| {
        let k = first.sample(rng);
        rows[k].as_ref().expect("sampled atoms have positive weight").sample(rng)
    })?;
    Ok(OutcomeHistogram::new(
        partition,
        counts,
        seed,
        format!("two-stage({} atoms, {kernel})", spectral.points().len()),
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ChiSquareReport {
    pub statistic: f64,
    pub dof: usize,
    pub critical: f64,
    pub passed: bool,
}

fn chi_square_critical(dof: usize) -> f64 {
    if dof == 0 {
        return 0.0;
    }
    ChiSquared::new(dof as f64)
        .expect("positive degrees of freedom")
        .inverse_cdf(CHI_SQUARE_LEVEL)
}

/// Two-sample homogeneity test on a `2 × K` table, skipping empty columns.
pub fn chi_square_homogeneity(a: &[u64], b: &[u64]) -> Result<ChiSquareReport> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch { left: a.len(), right: b.len() });
    }
    let (na, nb) = (a.iter().sum::<u64>() as f64, b.iter().sum::<u64>() as f64);
    if na == 0.0 || nb == 0.0 {
        return Err(Error::Empty("histogram".into()));
    }
    let n = na + nb;
    let mut stat = 0.0;
    let mut used = 0usize;
    for (&x, &y) in a.iter().zip(b) {
        let col = (x + y) as f64;
        if col == 0.0 {
            continue;
        }
        used += 1;
        let (ea, eb) = (na * col / n, nb * col / n);
        stat += (x as f64 - ea).powi(2) / ea + (y as f64 - eb).powi(2) / eb;
    }
    let dof = used.saturating_sub(1);
    let critical = chi_square_critical(dof);
    Ok(ChiSquareReport {
        statistic: stat,
        dof,
        critical,
        passed: stat <= critical,
    })
}

/// Pearson goodness of fit against exact probabilities, skipping cells
/// with `p = 0` (which must then be empty).
pub fn chi_square_goodness(counts: &[u64], p: &[f64]) -> Result<ChiSquareReport> {
    if counts.len() != p.len() {
        return Err(Error::DimensionMismatch { left: counts.len(), right: p.len() });
    }
    let n = counts.iter().sum::<u64>() as f64;
    let mut stat = 0.0;
    let mut used = 0usize;
    for (&c, &pj) in counts.iter().zip(p) {
        if pj == 0.0 {
            if c > 0 {
                stat = f64::INFINITY;
            }
            continue;
        }
        used += 1;
        stat += (c as f64 - n * pj).powi(2) / (n * pj);
    }
    let dof = used.saturating_sub(1);
    let critical = chi_square_critical(dof);
    Ok(ChiSquareReport {
        statistic: stat,
        dof,
        critical,
        passed: stat <= critical,
    })
}

/// Largest `|c_j − N p_j| / sqrt(N p_j (1 − p_j))`; cells with a degenerate
/// probability count as infinitely far unless their count is exact.
pub fn max_sigma_deviation(counts: &[u64], p: &[f64]) -> f64 {
    let n = counts.iter().sum::<u64>() as f64;
    counts
        .iter()
        .zip(p)
        .map(|(&c, &pj)| {
            let dev = (c as f64 - n * pj).abs();
            let sd = (n * pj * (1.0 - pj)).sqrt();
            if sd > 0.0 {
                dev / sd
            } else if dev < 0.5 {
                0.0
            } else {
                f64::INFINITY
            }
        })
        .fold(0.0, f64::max)
}

/// `½ Σ |c_j/N − p_j|`.
pub fn tv_distance(counts: &[u64], p: &[f64]) -> f64 {
    let n = counts.iter().sum::<u64>() as f64;
    0.5 * counts.iter().zip(p).map(|(&c, &pj)| (c as f64 / n - pj).abs()).sum::<f64>()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::{gaussian_kernel, point_kernel};
    use crate::povm::smear;

    fn set(s: &str) -> MeasurableSet {
        s.parse().unwrap()
    }

    fn cells() -> Vec<MeasurableSet> {
        ["(-inf,-1)", "[-1,0)", "[0,0.5)", "[0.5,1)", "[1,2)", "[2,inf)"]
            .iter()
            .map(|s| set(s))
            .collect()
    }

    fn grid() -> SpectralMeasure {
        SpectralMeasure::uniform_grid(-1.0, 2.0, 7).unwrap()
    }

    #[test]
    fn born_rule_examples() {
        let e = grid();
        let pvm = smear(&e, &point_kernel()).unwrap();
        let psi = State::basis(7, 3);
        let p = born_probabilities(&pvm, &psi, &cells()).unwrap();
        assert_eq!(p, vec![0.0, 0.0, 0.0, 1.0, 0.0, 0.0]);

        let g = gaussian_kernel(1.0).unwrap();
        let q = smear(&e, &g).unwrap();
        let p = born_probabilities(&q, &psi, &cells()).unwrap();
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        for (pj, c) in p.iter().zip(cells()) {
            assert!((pj - g.evaluate(e.points()[3], &c).unwrap()).abs() < 1e-15);
        }
        assert!(born_probabilities(&q, &psi, &cells()[1..]).is_err());
    }

    #[test]
    fn direct_sampling_examples() {
        let c = sample_categorical(&[1.0, 0.0, 0.0], 1000, 7, Exec::default()).unwrap();
        assert_eq!(c, vec![1000, 0, 0]);
        let n = 100_000;
        let c = sample_categorical(&[0.5, 0.5], n, 11, Exec::default()).unwrap();
        assert!((c[0] as f64 - 50_000.0).abs() <= 4.0 * (n as f64 * 0.25).sqrt());
        assert!(matches!(
            sample_categorical(&[0.0, 0.0], 10, 1, Exec::default()),
            Err(Error::DegenerateProbabilities { .. })
        ));
    }

    #[test]
    fn sampling_is_independent_of_strategy() {
        let p = [0.1, 0.2, 0.3, 0.4];
        let a = sample_categorical(&p, 50_000, 3, Exec::Sequential).unwrap();
        let b = sample_categorical(&p, 50_000, 3, Exec::Parallel).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, sample_categorical(&p, 50_000, 4, Exec::Sequential).unwrap());
    }

    #[test]
    fn two_stage_matches_direct() {
        let e = grid();
        let g = gaussian_kernel(1.0).unwrap();
        let q = smear(&e, &g).unwrap();
        let psi = State::from_real(&[1.0, 2.0, 0.0, 1.0, 3.0, 0.5, 1.0].map(|x| x / 16.25f64.sqrt())).unwrap();
        let exact = born_probabilities(&q, &psi, &cells()).unwrap();
        let marginal = two_stage_marginal(&e, &g, &psi, &cells()).unwrap();
        for (a, b) in exact.iter().zip(&marginal) {
            assert!((a - b).abs() <= 1e-12);
        }
        let d = sample_direct(&q, &psi, &cells(), 100_000, 1).unwrap();
        let t = sample_two_stage(&e, &g, &psi, &cells(), 100_000, 2).unwrap();
        assert!(chi_square_homogeneity(&d.counts, &t.counts).unwrap().passed);
        assert!(max_sigma_deviation(&t.counts, &exact) <= SIGMA_BOUND);
    }

    #[test]
    fn point_kernel_two_stage_gives_sharp_outcomes() {
        let e = grid();
        let psi = State::basis(7, 5);
        let t = sample_two_stage(&e, &point_kernel(), &psi, &cells(), 500, 9).unwrap();
        assert_eq!(t.counts, vec![0, 0, 0, 0, 500, 0]);
    }

    #[test]
    fn exports() {
        let h = OutcomeHistogram::new(&cells(), vec![1, 2, 3, 4, 5, 6], 42, "x".into());
        let csv = h.to_csv();
        assert!(csv.starts_with("cell,lower,upper,count\n"));
        assert!(csv.contains("-inf,-1.0,1"));
        let v: serde_json::Value = serde_json::from_str(&h.to_json()).unwrap();
        assert_eq!(v["seed"], 42);
        assert_eq!(v["total"], 21);
    }

    #[test]
    fn tv_and_chi_square() {
        assert_eq!(tv_distance(&[5, 5], &[0.5, 0.5]), 0.0);
        let r = chi_square_goodness(&[500, 500], &[0.5, 0.5]).unwrap();
        assert_eq!(r.statistic, 0.0);
        assert!((r.critical - 10.827566170662733).abs() < 1e-6);
    }
}
