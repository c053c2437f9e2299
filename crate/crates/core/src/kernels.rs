//! Markov kernels `μ : Λ × B → [0, 1]` as pure evaluators.
//!
//! Each kernel maps a sharp value `λ` and an outcome set `Δ` to the
//! probability `μ_Δ(λ)` of a reading in `Δ`. Axioms (range, normalization,
//! finite additivity) are checked by [`kernel_axiom_report`]; continuity in
//! `λ` is probed by [`continuity_modulus`].

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::quad::adaptive_simpson;
use crate::sets::{check_partition, Domain, MeasurableSet, NatSet};

/// Absolute tolerance for the convolution-kernel quadrature.
pub const QUADRATURE_TOL: f64 = 1e-10;
/// Pass threshold for every field of an [`AxiomReport`].
pub const AXIOM_TOL: f64 = 1e-9;

// ------------------------------------------------------------ special functions

/// Standard normal distribution function `Φ`.
pub fn normal_cdf(z: f64) -> f64 {
    0.5 * libm::erfc(-z * std::f64::consts::FRAC_1_SQRT_2)
}

/// Upper tail `1 − Φ(z)` without cancellation.
pub fn normal_sf(z: f64) -> f64 {
    0.5 * libm::erfc(z * std::f64::consts::FRAC_1_SQRT_2)
}

pub fn normal_pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// `Φ(hi) − Φ(lo)` evaluated on the tail that avoids cancellation.
pub fn normal_mass(lo: f64, hi: f64) -> f64 {
    if lo >= hi {
        0.0
    } else if lo >= 0.0 {
        normal_sf(lo) - normal_sf(hi)
    } else if hi <= 0.0 {
        normal_cdf(hi) - normal_cdf(lo)
    } else {
        1.0 - normal_cdf(lo) - normal_sf(hi)
    }
}

// Loader's saddle-point evaluation of the binomial law.

const STIRLING_ERR: [f64; 16] = [
    0.0,
    0.081_061_466_795_327_258_219_67,
    0.041_340_695_955_409_294_093_82,
    0.027_677_925_684_998_339_148_79,
    0.020_790_672_103_765_093_111_52,
    0.016_644_691_189_821_192_163_19,
    0.013_876_128_823_070_747_998_75,
    0.011_896_709_945_891_770_095_06,
    0.010_411_265_261_972_096_497_48,
    0.009_255_462_182_712_732_917_729,
    0.008_330_563_433_362_871_256_469,
    0.007_573_675_487_951_840_794_972,
    0.006_942_840_107_209_529_865_664,
    0.006_408_994_188_004_207_068_440,
    0.005_951_370_112_758_847_735_624,
    0.005_554_733_551_962_801_371_039,
];

/// `ln n! − (n + ½) ln n + n − ½ ln 2π`.
fn stirling_err(n: u64) -> f64 {
    const S0: f64 = 1.0 / 12.0;
    const S1: f64 = 1.0 / 360.0;
    const S2: f64 = 1.0 / 1260.0;
    const S3: f64 = 1.0 / 1680.0;
    const S4: f64 = 1.0 / 1188.0;
    if n < 16 {
        return STIRLING_ERR[n as usize];
    }
    let n = n as f64;
    let nn = n * n;
    if n > 500.0 {
        (S0 - S1 / nn) / n
    } else if n > 80.0 {
        (S0 - (S1 - S2 / nn) / nn) / n
    } else if n > 35.0 {
        (S0 - (S1 - (S2 - S3 / nn) / nn) / nn) / n
    } else {
        (S0 - (S1 - (S2 - (S3 - S4 / nn) / nn) / nn) / nn) / n
    }
}

/// Deviance term `x ln(x/np) + np − x`.
fn bd0(x: f64, np: f64) -> f64 {
    if (x - np).abs() < 0.1 * (x + np) {
        let mut v = (x - np) / (x + np);
        let mut s = (x - np) * v;
        let mut ej = 2.0 * x * v;
        v *= v;
        for j in 1..1000 {
            ej *= v;
            let s1 = s + ej / (2 * j + 1) as f64;
            if s1 == s {
                return s1;
            }
            s = s1;
        }
        s
    } else {
        x * (x / np).ln() + np - x
    }
}

/// `C(m, n) p^n (1 − p)^(m − n)`, zero for `n > m`.
pub fn binomial_pmf(n: u64, m: u64, p: f64) -> f64 {
    let q = 1.0 - p;
    if n > m {
        return 0.0;
    }
    if p == 0.0 {
        return if n == 0 { 1.0 } else { 0.0 };
    }
    if q == 0.0 {
        return if n == m { 1.0 } else { 0.0 };
    }
    let mf = m as f64;
    if n == 0 {
        if m == 0 {
            return 1.0;
        }
        let lc = if p < 0.1 { -bd0(mf, mf * q) - mf * p } else { mf * q.ln() };
        return lc.exp();
    }
    if n == m {
        let lc = if q < 0.1 { -bd0(mf, mf * p) - mf * q } else { mf * p.ln() };
        return lc.exp();
    }
    let nf = n as f64;
    let lc = stirling_err(m)
        - stirling_err(n)
        - stirling_err(m - n)
        - bd0(nf, mf * p)
        - bd0(mf - nf, mf * q);
    let lf = (2.0 * std::f64::consts::PI).ln() + nf.ln() + (-nf / mf).ln_1p();
    (lc - 0.5 * lf).exp()
}

// ------------------------------------------------------------------ weights

/// Convolution weight `f` supported on `[0, 1]` with `∫ f = 1` and `0 ≤ f ≤ M`.
#[derive(Clone)]
pub struct KernelWeight {
    label: String,
    bound: f64,
    density: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
}

impl fmt::Debug for KernelWeight {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("KernelWeight")
            .field("label", &self.label)
            .field("bound", &self.bound)
            .finish()
    }
}

impl KernelWeight {
    pub fn new(
        label: impl Into<String>,
        bound: f64,
        density: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Result<Self> {
        let w = KernelWeight {
            label: label.into(),
            bound,
            density: Arc::new(density),
        };
        w.validate()?;
        Ok(w)
    }

    /// `f(y) = 6y(1 − y)` on `[0, 1]`, bound `M = 1.5`.
    pub fn parabolic() -> Self {
        KernelWeight {
            label: "default".into(),
            bound: 1.5,
            density: Arc::new(|y| 6.0 * y * (1.0 - y)),
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.bound > 0.0 && self.bound.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "weight bound must be positive, got {}",
                self.bound
            )));
        }
        for k in 0..=1000 {
            let y = k as f64 / 1000.0;
            let v = (self.density)(y);
            if !(v >= 0.0) || v > self.bound * (1.0 + 1e-12) {
                return Err(Error::InvalidParameter(format!(
                    "weight {} takes value {v} at {y}, outside [0, {}]",
                    self.label, self.bound
                )));
            }
        }
        let total = self.mass(0.0, 1.0);
        if (total - 1.0).abs() > 1e-8 {
            return Err(Error::InvalidParameter(format!(
                "weight {} integrates to {total}, not 1",
                self.label
            )));
        }
        Ok(())
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn bound(&self) -> f64 {
        self.bound
    }

    /// `f(y)`, zero off `[0, 1]`.
    pub fn eval(&self, y: f64) -> f64 {
        if (0.0..=1.0).contains(&y) {
            (self.density)(y)
        } else {
            0.0
        }
    }

    /// `∫_a^b f` with `[a, b]` clipped to the support.
    pub fn mass(&self, a: f64, b: f64) -> f64 {
        let (a, b) = (a.max(0.0), b.min(1.0));
        if b <= a {
            return 0.0;
        }
        let f = |y: f64| (self.density)(y);
        adaptive_simpson(&f, a, b, QUADRATURE_TOL)
    }
}

// ------------------------------------------------------------------ kernels

/// Admissible sharp values `λ`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum KernelDomain {
    Line,
    UnitInterval,
    Naturals,
    Any,
}

impl KernelDomain {
    pub fn contains(&self, lambda: f64) -> bool {
        match self {
            KernelDomain::Line | KernelDomain::Any => lambda.is_finite(),
            KernelDomain::UnitInterval => (0.0..=1.0).contains(&lambda),
            KernelDomain::Naturals => lambda >= 0.0 && lambda.fract() == 0.0 && lambda.is_finite(),
        }
    }

    fn meet(self, other: Self) -> Option<Self> {
        use KernelDomain::*;
        match (self, other) {
            (Any, x) | (x, Any) => Some(x),
            (a, b) if a == b => Some(a),
            (Line, UnitInterval) | (UnitInterval, Line) => Some(UnitInterval),
            _ => None,
        }
    }
}

impl fmt::Display for KernelDomain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            KernelDomain::Line => "line",
            KernelDomain::UnitInterval => "[0,1]",
            KernelDomain::Naturals => "naturals",
            KernelDomain::Any => "any",
        })
    }
}

#[derive(Debug, Clone)]
pub enum MarkovKernel {
    /// `μ_Δ(λ) = χ_Δ(λ)`.
    Point,
    /// Gaussian with standard deviation `width`.
    Gaussian { width: f64 },
    /// Detector efficiency `efficiency` binomial thinning on ℕ.
    Binomial { efficiency: f64 },
    /// `μ_Δ(x) = ∫ χ_Δ(x − y) f(y) dy` on `x ∈ [0, 1]`.
    Convolution(KernelWeight),
    /// Convex combination of kernels sharing a domain.
    Mixture(Vec<(f64, MarkovKernel)>),
}

pub fn point_kernel() -> MarkovKernel {
    MarkovKernel::Point
}

pub fn gaussian_kernel(width: f64) -> Result<MarkovKernel> {
    if !(width > 0.0 && width.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "gaussian width must be positive, got {width}"
        )));
    }
    Ok(MarkovKernel::Gaussian { width })
}

pub fn binomial_kernel(efficiency: f64) -> Result<MarkovKernel> {
    if !(efficiency > 0.0 && efficiency < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "efficiency must lie in (0, 1), got {efficiency}"
        )));
    }
    Ok(MarkovKernel::Binomial { efficiency })
}

pub fn convolution_kernel(weight: KernelWeight) -> Result<MarkovKernel> {
    weight.validate()?;
    Ok(MarkovKernel::Convolution(weight))
}

pub fn mixture(parts: Vec<(f64, MarkovKernel)>) -> Result<MarkovKernel> {
    if parts.is_empty() {
        return Err(Error::Empty("mixture has no components".into()));
    }
    let total: f64 = parts.iter().map(|(w, _)| w).sum();
    if parts.iter().any(|(w, _)| !(*w >= 0.0)) || (total - 1.0).abs() > 1e-12 {
        return Err(Error::InvalidParameter(format!(
            "mixture weights must be nonnegative and sum to 1, got total {total}"
        )));
    }
    let mut domain = KernelDomain::Any;
    let mut outcome: Option<Domain> = None;
    for (_, k) in &parts {
        domain = domain.meet(k.domain()).ok_or_else(|| {
            Error::InvalidParameter("mixture components have incompatible domains".into())
        })?;
        if let Some(o) = k.outcome_domain() {
            if outcome.is_some_and(|prev| prev != o) {
                return Err(Error::InvalidParameter(
                    "mixture components have different outcome spaces".into(),
                ));
            }
            outcome = Some(o);
        }
    }
    Ok(MarkovKernel::Mixture(parts))
}

impl MarkovKernel {
    pub fn domain(&self) -> KernelDomain {
        match self {
            MarkovKernel::Point => KernelDomain::Any,
            MarkovKernel::Gaussian { .. } => KernelDomain::Line,
            MarkovKernel::Binomial { .. } => KernelDomain::Naturals,
            MarkovKernel::Convolution(_) => KernelDomain::UnitInterval,
            MarkovKernel::Mixture(parts) => parts
                .iter()
                .fold(Some(KernelDomain::Any), |acc, (_, k)| acc?.meet(k.domain()))
                .unwrap_or(KernelDomain::Any),
        }
    }

    /// Outcome space the kernel measures, `None` for the point kernel.
    pub fn outcome_domain(&self) -> Option<Domain> {
        match self {
            MarkovKernel::Point => None,
            MarkovKernel::Gaussian { .. } | MarkovKernel::Convolution(_) => Some(Domain::Line),
            MarkovKernel::Binomial { .. } => Some(Domain::Naturals),
            MarkovKernel::Mixture(parts) => parts.iter().find_map(|(_, k)| k.outcome_domain()),
        }
    }

    pub fn label(&self) -> String {
        self.to_string()
    }

    fn check_set(&self, set: &MeasurableSet) -> Result<()> {
        match self.outcome_domain() {
            Some(d) if d != set.domain() => Err(Error::DomainMismatch {
                left: d,
                right: set.domain(),
            }),
            _ => Ok(()),
        }
    }

    /// `μ_Δ(λ)`.
    pub fn evaluate(&self, lambda: f64, set: &MeasurableSet) -> Result<f64> {
        let domain = self.domain();
        if !domain.contains(lambda) {
            return Err(Error::OutsideKernelDomain {
                point: lambda,
                domain: domain.to_string(),
            });
        }
        self.check_set(set)?;
        Ok(self.eval_unchecked(lambda, set))
    }

    fn eval_unchecked(&self, lambda: f64, set: &MeasurableSet) -> f64 {
        match self {
            MarkovKernel::Point => {
                if set.contains(lambda) {
                    1.0
                } else {
                    0.0
                }
            }
            MarkovKernel::Gaussian { width } => match set {
                MeasurableSet::Line(s) => s
                    .intervals()
                    .iter()
                    .map(|p| normal_mass((p.lo - lambda) / width, (p.hi - lambda) / width))
                    .sum::<f64>()
                    .clamp(0.0, 1.0),
                _ => 0.0,
            },
            MarkovKernel::Binomial { efficiency } => match set {
                MeasurableSet::Nat(s) => binomial_set_mass(s, lambda as u64, *efficiency),
                _ => 0.0,
            },
            MarkovKernel::Convolution(w) => match set {
                // mass over y = x − z with z ∈ [lo, hi)
                MeasurableSet::Line(s) => s
                    .intervals()
                    .iter()
                    .map(|p| w.mass(lambda - p.hi, lambda - p.lo))
                    .sum::<f64>()
                    .clamp(0.0, 1.0),
                _ => 0.0,
            },
            MarkovKernel::Mixture(parts) => parts
                .iter()
                .map(|(wt, k)| wt * k.eval_unchecked(lambda, set))
                .sum::<f64>()
                .clamp(0.0, 1.0),
        }
    }
}

fn binomial_set_mass(set: &NatSet, m: u64, eps: f64) -> f64 {
    let listed = set
        .listed()
        .iter()
        .take_while(|&&n| n <= m)
        .map(|&n| binomial_pmf(n, m, eps))
        .sum::<f64>();
    match set {
        NatSet::Finite(_) => listed.clamp(0.0, 1.0),
        NatSet::Cofinite(_) => (1.0 - listed).clamp(0.0, 1.0),
    }
}

impl fmt::Display for MarkovKernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MarkovKernel::Point => f.write_str("point"),
            MarkovKernel::Gaussian { width } => write!(f, "gaussian:l={width}"),
            MarkovKernel::Binomial { efficiency } => write!(f, "binomial:eps={efficiency}"),
            MarkovKernel::Convolution(w) => write!(f, "conv:{}", w.label()),
            MarkovKernel::Mixture(parts) => {
                f.write_str("mixture(")?;
                for (i, (w, k)) in parts.iter().enumerate() {
                    if i > 0 {
                        f.write_str(" + ")?;
                    }
                    write!(f, "{w}*{k}")?;
                }
                f.write_str(")")
            }
        }
    }
}

impl FromStr for MarkovKernel {
    type Err = Error;

    /// `gaussian:l=1.0`, `binomial:eps=0.5`, `conv:default`, `point`.
    fn from_str(input: &str) -> Result<Self> {
        let s = input.trim();
        if s == "conv:default" || s == "conv" {
            return Ok(MarkovKernel::Convolution(KernelWeight::parabolic()));
        }
        let (name, params) = crate::spec::split_spec(s)?;
        let kernel = match name {
            "point" => point_kernel(),
            "gaussian" => gaussian_kernel(params.require_float("l")?)?,
            "binomial" => binomial_kernel(params.require_float("eps")?)?,
            other => return Err(Error::parse(input, format!("unknown kernel {other:?}"))),
        };
        params.finish(input)?;
        Ok(kernel)
    }
}

// ----------------------------------------------------------- continuity

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "kebab-case")]
pub enum ModulusReport {
    Measured {
        /// `sup |μ_Δ(λ) − μ_Δ(λ')|` over grid pairs with `|λ − λ'| ≤ δ`.
        modulus: f64,
        worst_pair: (f64, f64),
        pairs: usize,
    },
    /// Discrete parameter space; there is no small-δ refinement.
    NotApplicable,
}

impl ModulusReport {
    pub fn modulus(&self) -> Option<f64> {
        match self {
            ModulusReport::Measured { modulus, .. } => Some(*modulus),
            ModulusReport::NotApplicable => None,
        }
    }
}

fn kernel_row(
    kernel: &MarkovKernel,
    set: &MeasurableSet,
    grid: &[f64],
    exec: Exec,
) -> Result<(Vec<f64>, Vec<f64>)> {
    if grid.is_empty() {
        return Err(Error::Empty("continuity grid".into()));
    }
    let mut xs = grid.to_vec();
    xs.sort_by(f64::total_cmp);
    let values = exec.try_map(&xs, |&x| kernel.evaluate(x, set))?;
    Ok((xs, values))
}

/// Folds `score(i, j)` over grid pairs with `0 < x_j − x_i ≤ δ`.
fn fold_pairs(
    xs: &[f64],
    delta: f64,
    exec: Exec,
    score: impl Fn(usize, usize) -> f64 + Sync + Send,
) -> (f64, (usize, usize), usize) {
    let rows = exec.map_range(xs.len(), |i| {
        let mut best = (f64::NEG_INFINITY, (i, i), 0usize);
        for j in i + 1..xs.len() {
            if xs[j] - xs[i] > delta {
                break;
            }
            best.2 += 1;
            let s = score(i, j);
            if s > best.0 {
                best.0 = s;
                best.1 = (i, j);
            }
        }
        best
    });
    rows.into_iter().fold(
        (f64::NEG_INFINITY, (0, 0), 0),
        |acc, r| {
            let count = acc.2 + r.2;
            if r.0 > acc.0 {
                (r.0, r.1, count)
            } else {
                (acc.0, acc.1, count)
            }
        },
    )
}

pub fn continuity_modulus(
    kernel: &MarkovKernel,
    set: &MeasurableSet,
    grid: &[f64],
    delta: f64,
) -> Result<ModulusReport> {
    continuity_modulus_with(kernel, set, grid, delta, Exec::default())
}

pub fn continuity_modulus_with(
    kernel: &MarkovKernel,
    set: &MeasurableSet,
    grid: &[f64],
    delta: f64,
    exec: Exec,
) -> Result<ModulusReport> {
    if !(delta > 0.0) {
        return Err(Error::InvalidParameter(format!("delta must be positive, got {delta}")));
    }
    if kernel.domain() == KernelDomain::Naturals {
        if grid.is_empty() {
            return Err(Error::Empty("continuity grid".into()));
        }
        return Ok(ModulusReport::NotApplicable);
    }
    let (xs, values) = kernel_row(kernel, set, grid, exec)?;
    let (best, (i, j), pairs) =
        fold_pairs(&xs, delta, exec, |i, j| (values[i] - values[j]).abs());
    Ok(ModulusReport::Measured {
        modulus: best.max(0.0),
        worst_pair: (xs[i], xs[j]),
        pairs,
    })
}

/// `sup (|μ_Δ(λ) − μ_Δ(λ')| − L·|λ − λ'|)` over grid pairs within `δ`;
/// nonpositive iff the Lipschitz bound `L` holds on the grid. Zero pairs
/// gives `-inf`.
pub fn lipschitz_excess(
    kernel: &MarkovKernel,
    set: &MeasurableSet,
    grid: &[f64],
    delta: f64,
    lipschitz: f64,
) -> Result<f64> {
    let exec = Exec::default();
    let (xs, values) = kernel_row(kernel, set, grid, exec)?;
    let (best, _, _) = fold_pairs(&xs, delta, exec, |i, j| {
        (values[i] - values[j]).abs() - lipschitz * (xs[j] - xs[i])
    });
    Ok(best)
}

/// `√2 / (l √π)`, the Lipschitz constant of `x ↦ μ_Δ(x)` for the
/// Gaussian kernel of width `l`.
pub fn gaussian_lipschitz_constant(width: f64) -> f64 {
    std::f64::consts::SQRT_2 / (width * std::f64::consts::PI.sqrt())
}

// ---------------------------------------------------------------- axioms

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RangeViolation {
    pub lambda: f64,
    pub cell: Option<usize>,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AxiomReport {
    pub normalization_error: f64,
    pub additivity_error: f64,
    pub range_violations: Vec<RangeViolation>,
}

impl AxiomReport {
    pub fn passed(&self) -> bool {
        self.normalization_error <= AXIOM_TOL
            && self.additivity_error <= AXIOM_TOL
            && self.range_violations.is_empty()
    }
}

/// Checks the probability-measure axioms of `μ_(·)(λ)` at each sample `λ`
/// against a finite disjoint cover of the outcome space.
pub fn kernel_axiom_report(
    kernel: &MarkovKernel,
    samples: &[f64],
    partition: &[MeasurableSet],
) -> Result<AxiomReport> {
    let domain = check_partition(partition)?;
    if samples.is_empty() {
        return Err(Error::Empty("kernel samples".into()));
    }
    let full = MeasurableSet::full(domain);
    let mut report = AxiomReport {
        normalization_error: 0.0,
        additivity_error: 0.0,
        range_violations: Vec::new(),
    };
    let in_range = |v: f64| (0.0..=1.0).contains(&v);
    for &lambda in samples {
        let total = kernel.evaluate(lambda, &full)?;
        if !in_range(total) {
            report.range_violations.push(RangeViolation {
                lambda,
                cell: None,
                value: total,
            });
        }
        report.normalization_error = report.normalization_error.max((total - 1.0).abs());
        let mut sum = 0.0;
        for (cell, set) in partition.iter().enumerate() {
            let v = kernel.evaluate(lambda, set)?;
            if !in_range(v) {
                report.range_violations.push(RangeViolation {
                    lambda,
                    cell: Some(cell),
                    value: v,
                });
            }
            sum += v;
        }
        report.additivity_error = report.additivity_error.max((sum - total).abs());
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sets::LineSet;
    use approx::assert_abs_diff_eq;

    fn line(s: &str) -> MeasurableSet {
        s.parse().unwrap()
    }

    #[test]
    fn gaussian_values() {
        let g = gaussian_kernel(1.0).unwrap();
        for x in [-3.0, 0.0, 2.5] {
            assert_eq!(g.evaluate(x, &line("R")).unwrap(), 1.0);
            assert_abs_diff_eq!(
                g.evaluate(x, &LineSet::below(x).unwrap().into()).unwrap(),
                0.5,
                epsilon = 1e-15
            );
        }
        // erf(1/√2) to 20 digits
        let one_sigma = g
            .evaluate(0.3, &LineSet::interval(-0.7, 1.3).unwrap().into())
            .unwrap();
        assert_abs_diff_eq!(one_sigma, 0.682_689_492_137_085_9, epsilon = 1e-14);
        assert_eq!(g.evaluate(0.0, &line("{0}")).unwrap(), 0.0);
        assert!(gaussian_kernel(0.0).is_err());
        assert!(g.evaluate(0.0, &"nat:{0}".parse().unwrap()).is_err());
    }

    #[test]
    fn binomial_values() {
        let b = binomial_kernel(0.5).unwrap();
        assert_eq!(b.evaluate(0.0, &NatSet::singleton(0).into()).unwrap(), 1.0);
        assert_abs_diff_eq!(
            b.evaluate(2.0, &NatSet::singleton(1).into()).unwrap(),
            0.5,
            epsilon = 1e-15
        );
        assert_eq!(b.evaluate(3.0, &NatSet::singleton(4).into()).unwrap(), 0.0);
        assert_abs_diff_eq!(
            b.evaluate(7.0, &NatSet::full().into()).unwrap(),
            1.0,
            epsilon = 1e-15
        );
        assert!(binomial_kernel(1.0).is_err());
        assert!(b.evaluate(0.5, &NatSet::singleton(0).into()).is_err());
    }

    #[test]
    fn binomial_pmf_matches_exact_coefficients() {
        // exact C(m, n) in u128, then p = 1/2 scaling is exact in binary
        for m in [1u64, 7, 40, 100] {
            let mut c: u128 = 1;
            for n in 0..=m {
                if n > 0 {
                    c = c * (m - n + 1) as u128 / n as u128;
                }
                let exact = c as f64 * 0.5f64.powi(m as i32);
                let got = binomial_pmf(n, m, 0.5);
                assert!(
                    (got - exact).abs() <= 1e-13 * exact.max(1e-300),
                    "m={m} n={n}: {got} vs {exact}"
                );
            }
        }
    }

    #[test]
    fn convolution_values() {
        let k = convolution_kernel(KernelWeight::parabolic()).unwrap();
        assert_abs_diff_eq!(k.evaluate(0.4, &line("R")).unwrap(), 1.0, epsilon = 1e-12);
        assert_eq!(k.evaluate(0.4, &line("[2,3)")).unwrap(), 0.0);
        let x = 0.7;
        assert_abs_diff_eq!(
            k.evaluate(x, &LineSet::interval(x - 1.0, x).unwrap().into()).unwrap(),
            1.0,
            epsilon = 1e-12
        );
        // antiderivative 3y² − 2y³: mass of y ∈ [x − 0.5, x − 0.2]
        let cdf = |y: f64| 3.0 * y * y - 2.0 * y * y * y;
        assert_abs_diff_eq!(
            k.evaluate(x, &line("[0.2,0.5)")).unwrap(),
            cdf(0.5) - cdf(0.2),
            epsilon = 1e-12
        );
        assert!(k.evaluate(1.5, &line("R")).is_err());
        assert!(KernelWeight::new("flat2", 2.0, |_| 2.0).is_err());
    }

    #[test]
    fn point_kernel_values() {
        let p = point_kernel();
        assert_eq!(p.evaluate(0.5, &line("[0,1)")).unwrap(), 1.0);
        assert_eq!(p.evaluate(1.0, &line("[0,1)")).unwrap(), 0.0);
        assert_eq!(p.evaluate(1.0, &line("R")).unwrap(), 1.0);
        assert_eq!(p.evaluate(2.0, &"nat:{2}".parse().unwrap()).unwrap(), 1.0);
    }

    #[test]
    fn spec_strings() {
        for s in ["gaussian:l=1", "binomial:eps=0.5", "conv:default", "point"] {
            assert_eq!(s.parse::<MarkovKernel>().unwrap().to_string(), s);
        }
        assert!("gaussian".parse::<MarkovKernel>().is_err());
        assert!("gaussian:l=1,eps=2".parse::<MarkovKernel>().is_err());
        assert!("laplace:b=1".parse::<MarkovKernel>().is_err());
    }

    #[test]
    fn modulus_cases() {
        let grid: Vec<f64> = (0..=200).map(|k| -1.0 + k as f64 * 0.01).collect();
        let g = gaussian_kernel(1.0).unwrap();
        let m = continuity_modulus(&g, &line("[-0.3,0.4)"), &grid, 0.1)
            .unwrap()
            .modulus()
            .unwrap();
        assert!(m <= gaussian_lipschitz_constant(1.0) * 0.1 + 1e-9);
        assert!(m > 0.0);
        let p = continuity_modulus(&point_kernel(), &line("[0,1)"), &grid, 0.05).unwrap();
        assert_eq!(p.modulus(), Some(1.0));
        let b = continuity_modulus(
            &binomial_kernel(0.3).unwrap(),
            &NatSet::singleton(1).into(),
            &[0.0, 1.0, 2.0],
            0.5,
        )
        .unwrap();
        assert_eq!(b, ModulusReport::NotApplicable);
        assert!(continuity_modulus(&g, &line("R"), &[], 0.1).is_err());
    }

    #[test]
    fn axiom_reports() {
        let g = gaussian_kernel(1.0).unwrap();
        let mut cells: Vec<MeasurableSet> = vec![line("(-inf,-4)"), line("[4,inf)")];
        for k in 0..8 {
            let lo = -4.0 + k as f64;
            cells.push(LineSet::interval(lo, lo + 1.0).unwrap().into());
        }
        let r = kernel_axiom_report(&g, &[-5.0, -0.3, 0.0, 2.2, 7.0], &cells).unwrap();
        assert!(r.normalization_error <= 1e-10 && r.additivity_error <= 1e-10, "{r:?}");
        assert!(r.passed());

        let b = binomial_kernel(0.3).unwrap();
        let mut nat: Vec<MeasurableSet> = (0..10).map(|n| NatSet::singleton(n).into()).collect();
        nat.push(NatSet::cofinite(0..10).into());
        let r = kernel_axiom_report(&b, &[5.0], &nat).unwrap();
        assert!(r.normalization_error <= 1e-12 && r.additivity_error <= 1e-12);

        let r = kernel_axiom_report(&point_kernel(), &[-1.0, 0.5, 3.0], &cells).unwrap();
        assert_eq!((r.normalization_error, r.additivity_error), (0.0, 0.0));

        let overlapping = vec![line("(-inf,1)"), line("[0,inf)")];
        assert!(matches!(
            kernel_axiom_report(&g, &[0.0], &overlapping),
            Err(Error::NonDisjointPartition { .. })
        ));
    }

    #[test]
    fn mixture_is_convex_combination() {
        let a = gaussian_kernel(0.5).unwrap();
        let b = point_kernel();
        let m = mixture(vec![(0.25, a.clone()), (0.75, b.clone())]).unwrap();
        let set = line("[0,1)");
        let x = 0.2;
        let expect = 0.25 * a.evaluate(x, &set).unwrap() + 0.75 * b.evaluate(x, &set).unwrap();
        assert_abs_diff_eq!(m.evaluate(x, &set).unwrap(), expect, epsilon = 1e-15);
        assert!(mixture(vec![(0.5, a.clone())]).is_err());
        assert!(mixture(vec![(0.5, a), (0.5, binomial_kernel(0.5).unwrap())]).is_err());
    }
}
