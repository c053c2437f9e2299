//! POVMs at finite dimension, the smearing constructor, and the analyzers
//! for normalization, commutativity, sharpness, spectrum, absolute
//! continuity, the norm-1 property and uniform continuity.
//!
//! At finite `D` every POVM is trivially uniformly continuous, so single-`D`
//! probes only describe the truncation. Statements about the untruncated
//! observable come from [`dimension_scaling`] trends.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::catalog::PhaseFormula;
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::kernels::MarkovKernel;
use crate::operators::{
    commutator_norm, distance, idempotency_defect, operator_norm, Effect, HermitianOperator,
    Projection, C64,
};
use crate::sets::{check_partition, CircleSet, Domain, LineSet, MeasurableSet, NatSet,
    ReferenceMeasure};

/// Normalization/additivity tolerance in operator norm.
pub const POVM_TOL: f64 = 1e-9;
/// Orthogonality/completeness tolerance for spectral measures.
pub const SPECTRAL_TOL: f64 = 1e-10;
/// `‖F(Δ)² − F(Δ)‖` bound for [`is_pvm`].
pub const PVM_TOL: f64 = 1e-8;
/// Effects with norm at or below this count as zero.
pub const NONZERO_TOL: f64 = 1e-9;
/// Norms at or above `1 − NORM1_TOL` count as norm one.
pub const NORM1_TOL: f64 = 1e-6;
/// `decays` requires the final norm below this fraction of the initial one
/// (or the power-law alternative below).
pub const DECAY_FACTOR: f64 = 0.01;
/// Power-law alternative for `decays`: fitted rate at least this ...
pub const POWER_LAW_MIN_RATE: f64 = 0.5;
/// ... and final norm below this fraction of the initial one.
pub const POWER_LAW_MAX_RATIO: f64 = 0.1;
/// `persists` when the final norm keeps this fraction of the initial one;
/// also the obstruction level of [`dimension_scaling`].
pub const OBSTRUCTION_LEVEL: f64 = 0.9;
/// Slack for monotone-trend checks on norm sequences.
pub const TREND_TOL: f64 = 1e-12;

// ------------------------------------------------------------ spectral measure

/// Discrete PVM `{(λ_k, P_k)}` stored as an orthonormal basis whose columns
/// are assigned to atoms.
#[derive(Debug, Clone)]
pub struct SpectralMeasure {
    domain: Domain,
    points: Vec<f64>,
    /// Column `j` of the basis spans part of atom `assignment[j]`.
    assignment: Vec<usize>,
    /// `None` means the standard basis.
    basis: Option<DMatrix<C64>>,
}

impl SpectralMeasure {
    /// One atom per standard basis vector: `P_k = |k⟩⟨k|`.
    pub fn diagonal(domain: Domain, points: &[f64]) -> Result<Self> {
        let indices: Vec<usize> = (0..points.len()).collect();
        Self::standard_basis(domain, points.to_vec(), indices)
    }

    /// Standard basis with `assignment[j]` naming the atom of `|j⟩`.
    pub fn standard_basis(domain: Domain, points: Vec<f64>, assignment: Vec<usize>) -> Result<Self> {
        let s = SpectralMeasure {
            domain,
            points,
            assignment,
            basis: None,
        };
        s.validate_points()?;
        Ok(s)
    }

    /// Number observable on `span{|0⟩, ..., |D−1⟩}`.
    pub fn number(dim: usize) -> Result<Self> {
        let points: Vec<f64> = (0..dim).map(|m| m as f64).collect();
        Self::diagonal(Domain::Naturals, &points)
    }

    /// Position eigenbasis on a uniform grid of `count` points in `[lo, hi]`.
    pub fn uniform_grid(lo: f64, hi: f64, count: usize) -> Result<Self> {
        if count < 2 || !(lo < hi) {
            return Err(Error::InvalidParameter(format!(
                "grid needs count >= 2 and lo < hi, got {count} on [{lo},{hi}]"
            )));
        }
        let step = (hi - lo) / (count - 1) as f64;
        let points: Vec<f64> = (0..count)
            .map(|j| if j + 1 == count { hi } else { lo + step * j as f64 })
            .collect();
        Self::diagonal(Domain::Line, &points)
    }

    /// General PVM from explicit projections: checks `P_j P_k = 0` for
    /// `j ≠ k` and `Σ P_k = 1`.
    pub fn from_projections(domain: Domain, points: Vec<f64>, projections: Vec<Projection>) -> Result<Self> {
        if points.len() != projections.len() || points.is_empty() {
            return Err(Error::InvalidParameter(format!(
                "{} points for {} projections",
                points.len(),
                projections.len()
            )));
        }
        let dim = projections[0].op().dim();
        let mut total = HermitianOperator::zeros(dim);
        for (j, p) in projections.iter().enumerate() {
            total.axpy(1.0, p.op())?;
            for q in &projections[j + 1..] {
                let prod = p.op().matrix() * q.op().matrix();
                let defect = prod.iter().fold(0.0f64, |a, z| a.max(z.norm()));
                if defect > SPECTRAL_TOL {
                    return Err(Error::NotProjection(format!(
                        "projections {j} and a later one are not orthogonal (|PQ| {defect:e})"
                    )));
                }
            }
        }
        let completeness = distance(&total, &HermitianOperator::identity(dim))?;
        if completeness > SPECTRAL_TOL {
            return Err(Error::NotProjection(format!(
                "projections sum to identity only within {completeness:e}"
            )));
        }
        let mut columns = Vec::with_capacity(dim);
        let mut assignment = Vec::with_capacity(dim);
        for (k, p) in projections.iter().enumerate() {
            let eig = p.op().matrix().clone().symmetric_eigen();
            for (j, v) in eig.eigenvalues.iter().enumerate() {
                if *v > 0.5 {
                    columns.push(eig.eigenvectors.column(j).into_owned());
                    assignment.push(k);
                }
            }
        }
        if columns.len() != dim {
            return Err(Error::NotProjection(format!(
                "ranks sum to {} in dimension {dim}",
                columns.len()
            )));
        }
        let s = SpectralMeasure {
            domain,
            points,
            assignment,
            basis: Some(DMatrix::from_columns(&columns)),
        };
        s.validate_points()?;
        Ok(s)
    }

    fn validate_points(&self) -> Result<()> {
        if self.assignment.is_empty() {
            return Err(Error::InvalidParameter("spectral measure has dimension 0".into()));
        }
        if let Some(&bad) = self.assignment.iter().find(|&&k| k >= self.points.len()) {
            return Err(Error::InvalidParameter(format!("atom index {bad} out of range")));
        }
        let mut sorted = self.points.clone();
        sorted.sort_by(f64::total_cmp);
        if sorted.windows(2).any(|w| w[0] == w[1]) || sorted.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidParameter(
                "spectral points must be distinct and finite".into(),
            ));
        }
        Ok(())
    }

    pub fn domain(&self) -> Domain {
        self.domain
    }

    pub fn dim(&self) -> usize {
        self.assignment.len()
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    /// `P_k`.
    pub fn projection(&self, k: usize) -> Projection {
        let mut per_atom = vec![0.0; self.points.len()];
        per_atom[k] = 1.0;
        Projection::new(self.operator_from_atom_weights(&per_atom))
            .expect("atoms of a spectral measure are projections")
    }

    /// `Σ_k w_k P_k`.
    pub fn operator_from_atom_weights(&self, weights: &[f64]) -> HermitianOperator {
        let per_column: Vec<f64> = self.assignment.iter().map(|&k| weights[k]).collect();
        match &self.basis {
            None => HermitianOperator::from_real_diagonal(&per_column),
            Some(u) => {
                let mut scaled = u.clone();
                for (j, w) in per_column.iter().enumerate() {
                    scaled.column_mut(j).scale_mut(*w);
                }
                HermitianOperator::from_matrix_unchecked(scaled * u.adjoint())
            }
        }
    }

    /// `⟨ψ, P_k ψ⟩` for every atom.
    pub fn atom_probabilities(&self, psi: &DVector<C64>) -> Vec<f64> {
        let mut probs = vec![0.0; self.points.len()];
        for (j, &k) in self.assignment.iter().enumerate() {
            let amp = match &self.basis {
                None => psi[j],
                Some(u) => u.column(j).dotc(psi),
            };
            probs[k] += amp.norm_sqr();
        }
        probs
    }

    /// `E(Δ) = Σ_{λ_k ∈ Δ} P_k`.
    pub fn evaluate(&self, set: &MeasurableSet) -> Result<HermitianOperator> {
        if set.domain() != self.domain {
            return Err(Error::DomainMismatch {
                left: self.domain,
                right: set.domain(),
            });
        }
        let w: Vec<f64> = self
            .points
            .iter()
            .map(|&x| if set.contains(x) { 1.0 } else { 0.0 })
            .collect();
        Ok(self.operator_from_atom_weights(&w))
    }
}

// ------------------------------------------------------------------ POVM

type DiagonalWeights = Arc<dyn Fn(&MeasurableSet) -> Result<Vec<f64>> + Send + Sync>;

#[derive(Clone)]
pub enum Provenance {
    /// `F(Δ) = Σ_k μ_Δ(λ_k) P_k`.
    Smeared {
        spectral: SpectralMeasure,
        kernel: MarkovKernel,
    },
    /// Diagonal in the standard basis with eigenvalues computed per set.
    Diagonal { weights: DiagonalWeights },
    /// Matrix elements from a closed-form formula.
    Explicit(PhaseFormula),
}

impl fmt::Debug for Provenance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Provenance::Smeared { spectral, kernel } => f
                .debug_struct("Smeared")
                .field("atoms", &spectral.points().len())
                .field("kernel", &kernel.label())
                .finish(),
            Provenance::Diagonal { .. } => f.write_str("Diagonal"),
            Provenance::Explicit(p) => f.debug_tuple("Explicit").field(p).finish(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Povm {
    domain: Domain,
    dim: usize,
    label: String,
    provenance: Provenance,
}

/// `F(Δ) = ∫ μ_Δ(λ) dE_λ`.
pub fn smear(spectral: &SpectralMeasure, kernel: &MarkovKernel) -> Result<Povm> {
    let kd = kernel.domain();
    if let Some(&bad) = spectral.points().iter().find(|&&x| !kd.contains(x)) {
        return Err(Error::OutsideKernelDomain {
            point: bad,
            domain: kd.to_string(),
        });
    }
    let domain = kernel.outcome_domain().unwrap_or(spectral.domain());
    Ok(Povm {
        domain,
        dim: spectral.dim(),
        label: format!("smear({} atoms, {kernel})", spectral.points().len()),
        provenance: Provenance::Smeared {
            spectral: spectral.clone(),
            kernel: kernel.clone(),
        },
    })
}

impl Povm {
    pub fn diagonal(
        domain: Domain,
        dim: usize,
        label: impl Into<String>,
        weights: impl Fn(&MeasurableSet) -> Result<Vec<f64>> + Send + Sync + 'static,
    ) -> Self {
        Povm {
            domain,
            dim,
            label: label.into(),
            provenance: Provenance::Diagonal {
                weights: Arc::new(weights),
            },
        }
    }

    pub fn explicit(formula: PhaseFormula, label: impl Into<String>) -> Self {
        Povm {
            domain: Domain::Circle,
            dim: formula.dim(),
            label: label.into(),
            provenance: Provenance::Explicit(formula),
        }
    }

    pub fn domain(&self) -> Domain {
        self.domain
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    pub fn provenance(&self) -> &Provenance {
        &self.provenance
    }

    /// `F(Δ)`. The output is not re-classified here; see [`Effect::new`].
    pub fn effect(&self, set: &MeasurableSet) -> Result<Effect> {
        if set.domain() != self.domain {
            return Err(Error::DomainMismatch {
                left: self.domain,
                right: set.domain(),
            });
        }
        let op = match &self.provenance {
            Provenance::Smeared { spectral, kernel } => {
                let w = spectral
                    .points()
                    .iter()
                    .map(|&x| kernel.evaluate(x, set))
                    .collect::<Result<Vec<_>>>()?;
                spectral.operator_from_atom_weights(&w)
            }
            Provenance::Diagonal { weights } => {
                let w = weights(set)?;
                if w.len() != self.dim {
                    return Err(Error::DimensionMismatch {
                        left: self.dim,
                        right: w.len(),
                    });
                }
                HermitianOperator::from_real_diagonal(&w)
            }
            Provenance::Explicit(formula) => formula.effect(set)?,
        };
        Ok(Effect::new_unchecked(op))
    }

    pub fn effects(&self, family: &[MeasurableSet], exec: Exec) -> Result<Vec<Effect>> {
        exec.try_map(family, |s| self.effect(s))
    }

    pub fn norm(&self, set: &MeasurableSet) -> Result<f64> {
        self.effect(set)?.norm()
    }

    /// `‖F(X) − 1‖`.
    pub fn normalization_error(&self) -> Result<f64> {
        let full = self.effect(&MeasurableSet::full(self.domain))?;
        distance(full.op(), &HermitianOperator::identity(self.dim))
    }
}

/// `‖Σ_j F(Δ_j) − 1‖` over a disjoint cover.
pub fn partition_error(povm: &Povm, partition: &[MeasurableSet]) -> Result<f64> {
    check_partition(partition)?;
    let mut total = HermitianOperator::zeros(povm.dim());
    for e in povm.effects(partition, Exec::default())? {
        total.axpy(1.0, e.op())?;
    }
    distance(&total, &HermitianOperator::identity(povm.dim()))
}

/// `‖F(A ∪ B) − F(A) − F(B)‖` for disjoint `A`, `B`.
pub fn additivity_error(povm: &Povm, a: &MeasurableSet, b: &MeasurableSet) -> Result<f64> {
    if !a.is_disjoint(b)? {
        return Err(Error::NonDisjointPartition { first: 0, second: 1 });
    }
    let union = povm.effect(&a.union(b)?)?;
    let mut parts = povm.effect(a)?.into_op();
    parts.axpy(1.0, povm.effect(b)?.op())?;
    distance(union.op(), &parts)
}

// ---------------------------------------------------------- commutativity

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CommutativityReport {
    pub max_commutator_norm: f64,
    pub worst_pair: Option<(usize, usize)>,
    pub pairs_checked: usize,
}

pub fn check_commutative(
    povm: &Povm,
    family: &[MeasurableSet],
    pairs_budget: usize,
) -> Result<CommutativityReport> {
    check_commutative_with(povm, family, pairs_budget, Exec::default())
}

/// Max `‖[F(Δ_i), F(Δ_j)]‖` over all pairs, or over an evenly strided
/// subset of `pairs_budget` pairs when there are more.
pub fn check_commutative_with(
    povm: &Povm,
    family: &[MeasurableSet],
    pairs_budget: usize,
    exec: Exec,
) -> Result<CommutativityReport> {
    if family.is_empty() {
        return Err(Error::Empty("commutativity family".into()));
    }
    let effects = povm.effects(family, exec)?;
    let n = family.len();
    let all: Vec<(usize, usize)> = (0..n)
        .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
        .collect();
    let pairs: Vec<(usize, usize)> = if all.len() <= pairs_budget.max(1) {
        all
    } else {
        let budget = pairs_budget.max(1);
        (0..budget).map(|k| all[k * all.len() / budget]).collect()
    };
    let norms = exec.try_map(&pairs, |&(i, j)| commutator_norm(effects[i].op(), effects[j].op()))?;
    let (worst, max) = norms
        .iter()
        .enumerate()
        .fold((None, 0.0f64), |(w, m), (k, &v)| if v > m { (Some(pairs[k]), v) } else { (w, m) });
    Ok(CommutativityReport {
        max_commutator_norm: max,
        worst_pair: worst,
        pairs_checked: pairs.len(),
    })
}

// ------------------------------------------------------------- sharpness

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PvmReport {
    pub is_pvm: bool,
    pub worst_index: usize,
    pub worst_defect: f64,
}

/// `‖F(Δ)² − F(Δ)‖ ≤ PVM_TOL` on every member.
pub fn is_pvm(povm: &Povm, family: &[MeasurableSet]) -> Result<PvmReport> {
    if family.is_empty() {
        return Err(Error::Empty("sharpness family".into()));
    }
    let defects = Exec::default().try_map(family, |s| idempotency_defect(povm.effect(s)?.op()))?;
    let (worst_index, worst_defect) = defects
        .iter()
        .copied()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |a, (i, d)| if d > a.1 { (i, d) } else { a });
    Ok(PvmReport {
        is_pvm: worst_defect <= PVM_TOL,
        worst_index,
        worst_defect,
    })
}

// -------------------------------------------------------------- spectrum

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpectrumEstimate {
    pub points: Vec<f64>,
    pub radii: Vec<f64>,
    /// Only finitely many balls are tested, so this is an under-approximation
    /// of the points whose every neighbourhood has a nonzero effect.
    pub under_approximation: bool,
}

fn ball(domain: Domain, x: f64, r: f64) -> Result<MeasurableSet> {
    Ok(match domain {
        Domain::Line => LineSet::interval(x - r, x + r)?.into(),
        Domain::Circle => {
            if 2.0 * r >= std::f64::consts::TAU {
                CircleSet::full().into()
            } else {
                CircleSet::arc(x - r, x + r)?.into()
            }
        }
        Domain::Naturals => {
            let lo = (x - r).max(0.0).floor() as u64;
            let hi = (x + r).ceil().max(0.0) as u64;
            NatSet::finite((lo..=hi).filter(|&n| (n as f64 - x).abs() < r)).into()
        }
    })
}

/// Grid points `x` with `‖F(ball(x, r))‖ > NONZERO_TOL` for every radius.
pub fn spectrum_estimate(povm: &Povm, grid: &[f64], radii: &[f64]) -> Result<SpectrumEstimate> {
    if radii.is_empty() || radii.iter().any(|&r| !(r > 0.0)) || radii.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::InvalidParameter(
            "radii must be positive and strictly decreasing".into(),
        ));
    }
    let keep = Exec::default().try_map(grid, |&x| -> Result<bool> {
        for &r in radii {
            if povm.norm(&ball(povm.domain(), x, r)?)? <= NONZERO_TOL {
                return Ok(false);
            }
        }
        Ok(true)
    })?;
    Ok(SpectrumEstimate {
        points: grid
            .iter()
            .zip(keep)
            .filter_map(|(&x, k)| k.then_some(x))
            .collect(),
        radii: radii.to_vec(),
        under_approximation: true,
    })
}

// --------------------------------------------------- absolute continuity

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AbsContReport {
    /// `max ‖F(Δ)‖ / ν(Δ)` over members with `0 < ν(Δ) < ∞`.
    pub c_hat: Option<f64>,
    pub extremal_index: Option<usize>,
    pub ratios: Vec<Option<f64>>,
    /// Members with `ν(Δ) = 0` but `‖F(Δ)‖ > NONZERO_TOL`.
    pub null_set_failures: Vec<usize>,
    /// Members with `ν(Δ) = ∞`, skipped.
    pub skipped_infinite: Vec<usize>,
}

impl AbsContReport {
    pub fn is_absolutely_continuous(&self) -> bool {
        self.null_set_failures.is_empty()
    }
}

pub fn absolute_continuity_fit(
    povm: &Povm,
    nu: &ReferenceMeasure,
    family: &[MeasurableSet],
) -> Result<AbsContReport> {
    if nu.domain() != povm.domain() {
        return Err(Error::DomainMismatch {
            left: nu.domain(),
            right: povm.domain(),
        });
    }
    let rows = Exec::default().try_map(family, |s| -> Result<(f64, f64)> {
        let m = nu.measure(s)?;
        let norm = if m.is_infinite() { f64::NAN } else { povm.norm(s)? };
        Ok((m, norm))
    })?;
    let mut report = AbsContReport {
        c_hat: None,
        extremal_index: None,
        ratios: Vec::with_capacity(rows.len()),
        null_set_failures: Vec::new(),
        skipped_infinite: Vec::new(),
    };
    for (i, (m, norm)) in rows.into_iter().enumerate() {
        if m.is_infinite() {
            report.skipped_infinite.push(i);
            report.ratios.push(None);
        } else if m == 0.0 {
            if norm > NONZERO_TOL {
                report.null_set_failures.push(i);
            }
            report.ratios.push(None);
        } else {
            let r = norm / m;
            if report.c_hat.is_none_or(|c| r > c) {
                report.c_hat = Some(r);
                report.extremal_index = Some(i);
            }
            report.ratios.push(Some(r));
        }
    }
    Ok(report)
}

// ---------------------------------------------------- uniform continuity

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ContinuityVerdict {
    Decays,
    Persists,
    Inconclusive,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProbeMode {
    /// `‖F(Δ_i)‖` for `Δ_i ↓`.
    FromAbove,
    /// `‖F(Δ) − F(Δ_i)‖` for `Δ_i ↑ Δ`.
    FromBelow,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ContinuityReport {
    pub mode: ProbeMode,
    pub family: Vec<String>,
    pub norms: Vec<f64>,
    /// `α` in a least-squares fit `norm ≈ C i^(−α)` over the tail half.
    pub decay_rate: Option<f64>,
    pub verdict: ContinuityVerdict,
}

fn fitted_decay_rate(tail: &[(usize, f64)]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = tail
        .iter()
        .filter(|(_, v)| *v > 0.0)
        .map(|&(i, v)| (((i + 1) as f64).ln(), v.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    (sxx > 0.0).then(|| -sxy / sxx)
}

/// Verdict rule shared by both probe modes.
pub fn continuity_verdict(norms: &[f64]) -> (ContinuityVerdict, Option<f64>) {
    if norms.len() < 2 {
        return (ContinuityVerdict::Inconclusive, None);
    }
    let initial = norms[0];
    let last = *norms.last().unwrap();
    let start = norms.len() / 2;
    let tail: Vec<(usize, f64)> = norms.iter().copied().enumerate().skip(start).collect();
    let rate = fitted_decay_rate(&tail);
    if norms.iter().all(|&v| v <= NONZERO_TOL) {
        return (ContinuityVerdict::Decays, rate);
    }
    let monotone_tail = tail.windows(2).all(|w| w[1].1 <= w[0].1 + TREND_TOL);
    let ratio_ok = last < DECAY_FACTOR * initial;
    let power_law_ok = rate.is_some_and(|a| a >= POWER_LAW_MIN_RATE) && last < POWER_LAW_MAX_RATIO * initial;
    let verdict = if monotone_tail && (ratio_ok || power_law_ok) {
        ContinuityVerdict::Decays
    } else if last >= OBSTRUCTION_LEVEL * initial && last > NONZERO_TOL {
        ContinuityVerdict::Persists
    } else {
        ContinuityVerdict::Inconclusive
    };
    (verdict, rate)
}

/// `‖F(Δ_i)‖` along a decreasing family.
pub fn uniform_continuity_probe(povm: &Povm, family: &[MeasurableSet]) -> Result<ContinuityReport> {
    if family.is_empty() {
        return Err(Error::Empty("continuity family".into()));
    }
    for (i, w) in family.windows(2).enumerate() {
        if !w[1].is_subset(&w[0])? {
            return Err(Error::NonMonotoneFamily { index: i + 1 });
        }
    }
    let norms = Exec::default().try_map(family, |s| povm.norm(s))?;
    let (verdict, decay_rate) = continuity_verdict(&norms);
    Ok(ContinuityReport {
        mode: ProbeMode::FromAbove,
        family: family.iter().map(ToString::to_string).collect(),
        norms,
        decay_rate,
        verdict,
    })
}

/// `‖F(Δ) − F(Δ_i)‖` along an increasing family inside `target`.
pub fn uniform_continuity_from_below(
    povm: &Povm,
    target: &MeasurableSet,
    family: &[MeasurableSet],
) -> Result<ContinuityReport> {
    if family.is_empty() {
        return Err(Error::Empty("continuity family".into()));
    }
    for (i, w) in family.windows(2).enumerate() {
        if !w[0].is_subset(&w[1])? {
            return Err(Error::NonMonotoneFamily { index: i + 1 });
        }
    }
    if let Some(i) = family
        .iter()
        .position(|s| !s.is_subset(target).unwrap_or(false))
    {
        return Err(Error::NonMonotoneFamily { index: i });
    }
    let whole = povm.effect(target)?;
    let norms = Exec::default().try_map(family, |s| distance(whole.op(), povm.effect(s)?.op()))?;
    let (verdict, decay_rate) = continuity_verdict(&norms);
    Ok(ContinuityReport {
        mode: ProbeMode::FromBelow,
        family: family.iter().map(ToString::to_string).collect(),
        norms,
        decay_rate,
        verdict,
    })
}

// ------------------------------------------------------ dimension scaling

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScalingVerdict {
    /// Nondecreasing in `D` and above [`OBSTRUCTION_LEVEL`] at the largest `D`.
    Obstruction,
    /// Below the obstruction level and stable or decreasing in `D`.
    UcEvidence,
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScalingReport {
    pub dims: Vec<usize>,
    pub values: Vec<f64>,
    pub verdict: ScalingVerdict,
}

pub fn scaling_verdict(values: &[f64]) -> ScalingVerdict {
    if values.len() < 2 {
        return ScalingVerdict::Inconclusive;
    }
    let last = *values.last().unwrap();
    let nondecreasing = values.windows(2).all(|w| w[1] >= w[0] - TREND_TOL);
    let nonincreasing = values.windows(2).all(|w| w[1] <= w[0] + TREND_TOL);
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    if nondecreasing && last > OBSTRUCTION_LEVEL {
        ScalingVerdict::Obstruction
    } else if max < OBSTRUCTION_LEVEL && (nonincreasing || max - min <= 0.1 * max + TREND_TOL) {
        ScalingVerdict::UcEvidence
    } else {
        ScalingVerdict::Inconclusive
    }
}

pub fn dimension_scaling<B, P>(dims: &[usize], builder: B, probe: P) -> Result<ScalingReport>
where
    B: Fn(usize) -> Result<Povm> + Sync + Send,
    P: Fn(&Povm) -> Result<f64> + Sync + Send,
{
    dimension_scaling_with(dims, builder, probe, Exec::default())
}

/// Evaluates `probe(builder(D))` per dimension; dims are processed
/// concurrently and merged in input order.
pub fn dimension_scaling_with<B, P>(dims: &[usize], builder: B, probe: P, exec: Exec) -> Result<ScalingReport>
where
    B: Fn(usize) -> Result<Povm> + Sync + Send,
    P: Fn(&Povm) -> Result<f64> + Sync + Send,
{
    if dims.is_empty() || dims.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidParameter("dims must be nonempty and strictly increasing".into()));
    }
    let values = exec.try_map(dims, |&d| {
        let povm = builder(d).map_err(|e| Error::BuilderFailure {
            dim: d,
            reason: e.to_string(),
        })?;
        probe(&povm)
    })?;
    Ok(ScalingReport {
        dims: dims.to_vec(),
        verdict: scaling_verdict(&values),
        values,
    })
}

// ---------------------------------------------------------------- norm-1

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Norm1Report {
    pub sets: Vec<String>,
    pub norms: Vec<f64>,
    /// Every nonzero `F(Δ)` in the family has norm `≥ 1 − NORM1_TOL`.
    pub norm1_on_family: bool,
    pub singletons: Vec<String>,
    pub singleton_norms: Vec<f64>,
    /// `‖F({x})‖ ≠ 0` at every probe; necessary for the norm-1 property of
    /// a uniformly continuous POVM.
    pub point_mass_condition: bool,
}

pub fn norm1_scan(povm: &Povm, family: &[MeasurableSet], singletons: &[MeasurableSet]) -> Result<Norm1Report> {
    if family.is_empty() {
        return Err(Error::Empty("norm-1 family".into()));
    }
    let exec = Exec::default();
    let norms = exec.try_map(family, |s| povm.norm(s))?;
    let singleton_norms = exec.try_map(singletons, |s| povm.norm(s))?;
    Ok(Norm1Report {
        sets: family.iter().map(ToString::to_string).collect(),
        norm1_on_family: norms
            .iter()
            .filter(|&&n| n > NONZERO_TOL)
            .all(|&n| n >= 1.0 - NORM1_TOL),
        norms,
        singletons: singletons.iter().map(ToString::to_string).collect(),
        point_mass_condition: singleton_norms.iter().all(|&n| n > NONZERO_TOL),
        singleton_norms,
    })
}

// ----------------------------------------------------------- integration

/// Partition used by [`integrate`].
#[derive(Debug, Clone, PartialEq)]
pub enum IntegrationGrid {
    /// Cells `(−∞, b_0), [b_0, b_1), ..., [b_n, ∞)`.
    Line { breaks: Vec<f64> },
    /// Cells `[b_k, b_{k+1})` and the arc `[b_n, b_0)` through zero.
    Circle { breaks: Vec<f64> },
    /// Cells `{0}, ..., {cutoff − 1}` and `{m ≥ cutoff}`.
    Naturals { cutoff: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Tag {
    #[default]
    Left,
    Midpoint,
}

#[derive(Debug, Clone)]
pub struct IntegralReport {
    pub operator: HermitianOperator,
    /// `‖S(refined) − S(given)‖` with every finite cell bisected once.
    pub refinement_difference: f64,
    pub cells: usize,
}

fn checked_breaks(breaks: &[f64], circle: bool) -> Result<Vec<f64>> {
    if breaks.is_empty() || breaks.windows(2).any(|w| w[1] <= w[0]) || breaks.iter().any(|b| !b.is_finite()) {
        return Err(Error::InvalidParameter("breaks must be finite and strictly increasing".into()));
    }
    if circle && (breaks[0] < 0.0 || *breaks.last().unwrap() >= std::f64::consts::TAU) {
        return Err(Error::InvalidParameter("circle breaks must lie in [0, 2π)".into()));
    }
    Ok(breaks.to_vec())
}

impl IntegrationGrid {
    fn cells(&self, tag: Tag) -> Result<Vec<(MeasurableSet, f64)>> {
        let pick = |lo: f64, hi: f64| match tag {
            Tag::Left => lo,
            Tag::Midpoint => 0.5 * (lo + hi),
        };
        match self {
            IntegrationGrid::Line { breaks } => {
                let b = checked_breaks(breaks, false)?;
                let w = if b.len() > 1 { b[1] - b[0] } else { 1.0 };
                let mut out = vec![(LineSet::below(b[0])?.into(), b[0] - w)];
                for pair in b.windows(2) {
                    out.push((LineSet::interval(pair[0], pair[1])?.into(), pick(pair[0], pair[1])));
                }
                out.push((LineSet::above(*b.last().unwrap())?.into(), *b.last().unwrap()));
                Ok(out)
            }
            IntegrationGrid::Circle { breaks } => {
                let b = checked_breaks(breaks, true)?;
                let tau = std::f64::consts::TAU;
                let mut out = Vec::with_capacity(b.len());
                for pair in b.windows(2) {
                    out.push((CircleSet::arc(pair[0], pair[1])?.into(), pick(pair[0], pair[1])));
                }
                let (lo, hi) = (*b.last().unwrap(), b[0] + tau);
                let cell = if b.len() == 1 { CircleSet::full() } else { CircleSet::arc(lo, b[0])? };
                out.push((cell.into(), pick(lo, hi).rem_euclid(tau)));
                Ok(out)
            }
            IntegrationGrid::Naturals { cutoff } => {
                let mut out: Vec<(MeasurableSet, f64)> =
                    (0..*cutoff).map(|n| (NatSet::singleton(n).into(), n as f64)).collect();
                out.push((NatSet::cofinite(0..*cutoff).into(), *cutoff as f64));
                Ok(out)
            }
        }
    }

    fn refined(&self) -> Self {
        let bisect = |b: &[f64]| {
            let mut out = Vec::with_capacity(2 * b.len());
            for w in b.windows(2) {
                out.push(w[0]);
                out.push(0.5 * (w[0] + w[1]));
            }
            out.extend(b.last());
            out
        };
        match self {
            IntegrationGrid::Line { breaks } => IntegrationGrid::Line { breaks: bisect(breaks) },
            IntegrationGrid::Circle { breaks } => IntegrationGrid::Circle { breaks: bisect(breaks) },
            IntegrationGrid::Naturals { .. } => self.clone(),
        }
    }

    fn domain(&self) -> Domain {
        match self {
            IntegrationGrid::Line { .. } => Domain::Line,
            IntegrationGrid::Circle { .. } => Domain::Circle,
            IntegrationGrid::Naturals { .. } => Domain::Naturals,
        }
    }
}

fn riemann_stieltjes(
    povm: &Povm,
    grid: &IntegrationGrid,
    f: &(dyn Fn(f64) -> f64 + Sync),
    tag: Tag,
) -> Result<(HermitianOperator, usize)> {
    let cells = grid.cells(tag)?;
    let mut total = HermitianOperator::zeros(povm.dim());
    for (set, t) in &cells {
        let v = f(*t);
        if !v.is_finite() {
            return Err(Error::UnboundedSample { tag: *t, value: v });
        }
        total.axpy(v, povm.effect(set)?.op())?;
    }
    Ok((total, cells.len()))
}

/// `Σ_j f(t_j) F(Δ_j)` with tags `t_j ∈ Δ_j`, i.e. `∫ f dF`.
pub fn integrate(
    povm: &Povm,
    grid: &IntegrationGrid,
    f: &(dyn Fn(f64) -> f64 + Sync),
    tag: Tag,
) -> Result<IntegralReport> {
    if grid.domain() != povm.domain() {
        return Err(Error::DomainMismatch {
            left: grid.domain(),
            right: povm.domain(),
        });
    }
    let (operator, cells) = riemann_stieltjes(povm, grid, f, tag)?;
    let (fine, _) = riemann_stieltjes(povm, &grid.refined(), f, tag)?;
    Ok(IntegralReport {
        refinement_difference: distance(&operator, &fine)?,
        operator,
        cells,
    })
}

pub fn effect_norm(povm: &Povm, set: &MeasurableSet) -> Result<f64> {
    operator_norm(povm.effect(set)?.op())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::{binomial_kernel, gaussian_kernel, point_kernel};
    use crate::operators::{classify, OperatorClass};
    use crate::sets::{shrinking_family, ShrinkingKind};

    fn set(s: &str) -> MeasurableSet {
        s.parse().unwrap()
    }

    fn positions() -> SpectralMeasure {
        SpectralMeasure::uniform_grid(0.0, 1.0, 11).unwrap()
    }

    #[test]
    fn point_smearing_is_the_pvm() {
        let e = positions();
        let f = smear(&e, &point_kernel()).unwrap();
        for s in ["[0,0.5)", "[0.25,0.75)∪[0.9,2)", "R", "{0.3}"] {
            let a = f.effect(&set(s)).unwrap();
            let b = e.evaluate(&set(s)).unwrap();
            assert!(distance(a.op(), &b).unwrap() <= 1e-12);
        }
        assert!(is_pvm(&f, &[set("[0,0.5)"), set("[0.3,2)")]).unwrap().is_pvm);
        assert!(f.normalization_error().unwrap() <= 1e-12);
    }

    #[test]
    fn gaussian_smearing_entries_are_kernel_values() {
        let e = positions();
        let g = gaussian_kernel(0.2).unwrap();
        let f = smear(&e, &g).unwrap();
        let delta = set("[0,1)");
        let eff = f.effect(&delta).unwrap();
        for (j, &x) in e.points().iter().enumerate() {
            assert_eq!(eff.op().entry(j, j).re, g.evaluate(x, &delta).unwrap());
        }
        assert!(!is_pvm(&f, &[delta]).unwrap().is_pvm);
        assert!(f.normalization_error().unwrap() <= POVM_TOL);
    }

    #[test]
    fn smear_rejects_points_outside_kernel_domain() {
        let e = SpectralMeasure::diagonal(Domain::Line, &[0.5, 1.5]).unwrap();
        assert!(matches!(
            smear(&e, &binomial_kernel(0.5).unwrap()),
            Err(Error::OutsideKernelDomain { .. })
        ));
    }

    #[test]
    fn projections_constructor_validates() {
        let dim = 3;
        let p0 = Projection::basis(dim, 0);
        let p12 = Projection::new(HermitianOperator::from_real_diagonal(&[0.0, 1.0, 1.0])).unwrap();
        let e = SpectralMeasure::from_projections(Domain::Line, vec![-1.0, 2.0], vec![p0.clone(), p12])
            .unwrap();
        assert_eq!(e.dim(), 3);
        let proj = e.projection(1);
        assert!(distance(proj.op(), &HermitianOperator::from_real_diagonal(&[0.0, 1.0, 1.0])).unwrap() < 1e-12);
        assert!(SpectralMeasure::from_projections(Domain::Line, vec![0.0, 1.0], vec![p0.clone(), p0]).is_err());
    }

    #[test]
    fn commutativity_of_smeared_povms() {
        let f = smear(&positions(), &gaussian_kernel(0.3).unwrap()).unwrap();
        let fam: Vec<MeasurableSet> = ["[0,0.4)", "[0.2,0.9)", "(-inf,0.5)", "[0.7,inf)"]
            .iter()
            .map(|s| set(s))
            .collect();
        let r = check_commutative(&f, &fam, 100).unwrap();
        assert_eq!(r.max_commutator_norm, 0.0);
        assert_eq!(r.pairs_checked, 6);
        assert_eq!(check_commutative(&f, &fam, 2).unwrap().pairs_checked, 2);
    }

    #[test]
    fn spectrum_of_a_two_point_pvm() {
        let e = SpectralMeasure::diagonal(Domain::Line, &[0.0, 1.0]).unwrap();
        let f = smear(&e, &point_kernel()).unwrap();
        let grid: Vec<f64> = (0..=20).map(|k| -0.5 + 0.1 * k as f64).collect();
        let est = spectrum_estimate(&f, &grid, &[0.3, 0.1, 0.01]).unwrap();
        assert_eq!(est.points.len(), 2);
        assert!(est.points[0].abs() < 1e-12 && (est.points[1] - 1.0).abs() < 1e-12);
        assert!(spectrum_estimate(&f, &grid, &[0.1, 0.3]).is_err());
    }

    #[test]
    fn spectrum_of_gaussian_position() {
        let f = smear(
            &SpectralMeasure::uniform_grid(0.0, 1.0, 21).unwrap(),
            &gaussian_kernel(0.1).unwrap(),
        )
        .unwrap();
        let grid: Vec<f64> = (0..=10).map(|k| 0.1 * k as f64).chain([10.0]).collect();
        let est = spectrum_estimate(&f, &grid, &[0.5, 0.05]).unwrap();
        assert_eq!(est.points.len(), 11);
        assert!(!est.points.contains(&10.0));
    }

    #[test]
    fn counting_fit_for_number_pvm() {
        let f = smear(&SpectralMeasure::number(8).unwrap(), &point_kernel()).unwrap();
        let fam: Vec<MeasurableSet> = vec![set("nat:{0}"), set("nat:{1,2,3}"), set("nat:co{0}"), set("nat:{20}")];
        let r = absolute_continuity_fit(&f, &ReferenceMeasure::Counting, &fam).unwrap();
        assert_eq!(r.c_hat, Some(1.0));
        assert_eq!(r.skipped_infinite, vec![2]);
        assert!(r.is_absolutely_continuous());
    }

    #[test]
    fn null_sets_with_mass_are_flagged() {
        let f = smear(&positions(), &point_kernel()).unwrap();
        let r = absolute_continuity_fit(&f, &ReferenceMeasure::LebesgueLine, &[set("{0.5}"), set("[0,1)")])
            .unwrap();
        assert_eq!(r.null_set_failures, vec![0]);
    }

    #[test]
    fn verdict_rules() {
        let decaying: Vec<f64> = (1..=50).map(|i| 1.0 / i as f64).collect();
        assert_eq!(continuity_verdict(&decaying).0, ContinuityVerdict::Decays);
        let flat = vec![1.0; 20];
        assert_eq!(continuity_verdict(&flat).0, ContinuityVerdict::Persists);
        assert_eq!(continuity_verdict(&[0.0; 5]).0, ContinuityVerdict::Decays);
        assert_eq!(continuity_verdict(&[1.0]).0, ContinuityVerdict::Inconclusive);
        let bumpy = vec![1.0, 0.5, 0.6, 0.5, 0.6, 0.5];
        assert_eq!(continuity_verdict(&bumpy).0, ContinuityVerdict::Inconclusive);

        assert_eq!(scaling_verdict(&[0.5, 0.8, 0.95]), ScalingVerdict::Obstruction);
        assert_eq!(scaling_verdict(&[0.03, 0.031, 0.0305]), ScalingVerdict::UcEvidence);
        assert_eq!(scaling_verdict(&[0.95]), ScalingVerdict::Inconclusive);
        assert_eq!(scaling_verdict(&[0.2, 0.8, 0.5]), ScalingVerdict::Inconclusive);
    }

    #[test]
    fn probe_rejects_non_monotone_family() {
        let f = smear(&positions(), &point_kernel()).unwrap();
        let fam = vec![set("[0,0.5)"), set("[0,0.7)")];
        assert!(matches!(
            uniform_continuity_probe(&f, &fam),
            Err(Error::NonMonotoneFamily { index: 1 })
        ));
    }

    #[test]
    fn pvm_with_no_spectrum_near_zero() {
        let e = SpectralMeasure::diagonal(Domain::Line, &[-1.0, 2.0]).unwrap();
        let f = smear(&e, &point_kernel()).unwrap();
        let fam = shrinking_family(ShrinkingKind::NestedInterval { start: 0.0, width: 1.0 }, 10).unwrap();
        let r = uniform_continuity_probe(&f, &fam).unwrap();
        assert!(r.norms.iter().all(|&n| n == 0.0));
        assert_eq!(r.verdict, ContinuityVerdict::Decays);
    }

    #[test]
    fn from_below_mode() {
        let f = smear(
            &SpectralMeasure::uniform_grid(0.0, 1.0, 51).unwrap(),
            &gaussian_kernel(0.2).unwrap(),
        )
        .unwrap();
        let target = set("[0,1)");
        let fam = crate::sets::growing_interval(0.0, 1.0, 60).unwrap();
        let r = uniform_continuity_from_below(&f, &target, &fam).unwrap();
        assert_eq!(r.mode, ProbeMode::FromBelow);
        assert_eq!(r.verdict, ContinuityVerdict::Decays, "{:?}", r.norms);
        assert!(uniform_continuity_from_below(&f, &set("[0,0.5)"), &fam).is_err());
    }

    #[test]
    fn norm1_scan_on_pvm_and_gaussian() {
        let e = positions();
        let pvm = smear(&e, &point_kernel()).unwrap();
        let fam = vec![set("[0,0.5)"), set("[2,3)"), set("[0.05,0.06)")];
        let r = norm1_scan(&pvm, &fam, &[set("{0.5}")]).unwrap();
        assert!(r.norm1_on_family && r.point_mass_condition);

        let g = smear(&e, &gaussian_kernel(0.1).unwrap()).unwrap();
        let r = norm1_scan(&g, &fam, &[set("{0.5}")]).unwrap();
        assert_eq!(r.singleton_norms, vec![0.0]);
        assert!(!r.point_mass_condition);
        assert!(!r.norm1_on_family);
    }

    #[test]
    fn integrals() {
        let e = positions();
        let pvm = smear(&e, &point_kernel()).unwrap();
        let grid = IntegrationGrid::Line { breaks: e.points().to_vec() };
        let one = integrate(&pvm, &grid, &|_| 1.0, Tag::Left).unwrap();
        assert!(distance(&one.operator, &HermitianOperator::identity(e.dim())).unwrap() <= 1e-12);
        let x = integrate(&pvm, &grid, &|t| t, Tag::Left).unwrap();
        assert!(distance(&x.operator, &HermitianOperator::from_real_diagonal(e.points())).unwrap() <= 1e-15);
        assert!(x.refinement_difference <= 1e-15);
        let chi = integrate(&pvm, &grid, &|t| if (0.2..0.5).contains(&t) { 1.0 } else { 0.0 }, Tag::Left)
            .unwrap();
        let direct = pvm.effect(&set("[0.2,0.5)")).unwrap();
        assert!(distance(&chi.operator, direct.op()).unwrap() <= 1e-12);
        assert!(matches!(
            integrate(&pvm, &grid, &|t| 1.0 / (t - 0.5), Tag::Left),
            Err(Error::UnboundedSample { .. })
        ));

        let number = smear(&SpectralMeasure::number(6).unwrap(), &binomial_kernel(0.4).unwrap()).unwrap();
        let one = integrate(&number, &IntegrationGrid::Naturals { cutoff: 4 }, &|_| 1.0, Tag::Left).unwrap();
        assert!(distance(&one.operator, &HermitianOperator::identity(6)).unwrap() <= 1e-12);
    }

    #[test]
    fn smeared_effects_are_effects() {
        let f = smear(&positions(), &gaussian_kernel(0.05).unwrap()).unwrap();
        for s in ["[0,0.3)", "[0.11,0.12)", "(-inf,-1)"] {
            let c = classify(f.effect(&set(s)).unwrap().op()).unwrap();
            assert!(matches!(c.class, OperatorClass::Effect | OperatorClass::Projection));
        }
    }
}
