//! Catalog observables: unsharp number, phase observables built from an
//! overlap matrix, and unsharp positions on uniform grids.

use std::f64::consts::{PI, TAU};
use std::fmt;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::kernels::{binomial_kernel, convolution_kernel, gaussian_kernel, normal_cdf, normal_pdf,
    normal_sf, KernelWeight, MarkovKernel};
use crate::operators::{distance, HermitianOperator, C64, HERMITIAN_TOL, MAX_DIM};
use crate::povm::{smear, Povm, SpectralMeasure};
use crate::sets::{CircleSet, Domain, MeasurableSet, NatSet};
use crate::spec::split_spec;

/// Unit-diagonal tolerance and Cauchy–Schwarz slack for overlap matrices.
pub const OVERLAP_TOL: f64 = 1e-12;
/// Smallest eigenvalue accepted as positive semidefinite.
pub const OVERLAP_PSD_TOL: f64 = 1e-10;

fn check_dim(dim: usize, min: usize) -> Result<()> {
    if dim < min || dim > MAX_DIM {
        return Err(Error::InvalidParameter(format!(
            "dimension must lie in [{min}, {MAX_DIM}], got {dim}"
        )));
    }
    Ok(())
}

/// Gram matrix `g_nm = ⟨ψ_n|ψ_m⟩` of unit vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct OverlapMatrix(DMatrix<C64>);

impl OverlapMatrix {
    pub fn new(g: DMatrix<C64>) -> Result<Self> {
        let dim = g.nrows();
        if g.ncols() != dim || dim == 0 {
            return Err(Error::DimensionMismatch { left: dim, right: g.ncols() });
        }
        for n in 0..dim {
            if (g[(n, n)] - C64::new(1.0, 0.0)).norm() > OVERLAP_TOL {
                return Err(Error::InvalidParameter(format!(
                    "overlap diagonal must be 1, entry {n} is {}",
                    g[(n, n)]
                )));
            }
            for m in 0..dim {
                if g[(n, m)].norm() > 1.0 + OVERLAP_TOL {
                    return Err(Error::InvalidParameter(format!(
                        "|g[{n},{m}]| = {} exceeds 1",
                        g[(n, m)].norm()
                    )));
                }
                if (g[(n, m)] - g[(m, n)].conj()).norm() > HERMITIAN_TOL {
                    return Err(Error::NotHermitian {
                        deviation: (g[(n, m)] - g[(m, n)].conj()).norm(),
                    });
                }
            }
        }
        let h = HermitianOperator::new(g)?;
        let lo = h.eigenvalues()?[0];
        if lo < -OVERLAP_PSD_TOL {
            return Err(Error::InvalidParameter(format!(
                "overlap matrix is not positive semidefinite (eigenvalue {lo:e})"
            )));
        }
        Ok(OverlapMatrix(h.into_matrix()))
    }

    /// Orthonormal `ψ_n`.
    pub fn identity(dim: usize) -> Self {
        OverlapMatrix(DMatrix::identity(dim, dim))
    }

    /// `ψ_n = ψ` for every `n`.
    pub fn all_ones(dim: usize) -> Self {
        OverlapMatrix(DMatrix::from_element(dim, dim, C64::new(1.0, 0.0)))
    }

    /// Identity except `g_st = value`, `g_ts = conj(value)`.
    pub fn single_pair(dim: usize, s: usize, t: usize, value: C64) -> Result<Self> {
        if s == t || s >= dim || t >= dim {
            return Err(Error::InvalidParameter(format!(
                "need distinct s, t below {dim}, got s={s}, t={t}"
            )));
        }
        let mut g = DMatrix::identity(dim, dim);
        g[(s, t)] = value;
        g[(t, s)] = value.conj();
        Self::new(g)
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.0
    }
}

/// `N = diag(0, ..., D−1)` in the Fock basis.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NumberOperator {
    pub dim: usize,
}

impl NumberOperator {
    pub fn operator(&self) -> HermitianOperator {
        let d: Vec<f64> = (0..self.dim).map(|m| m as f64).collect();
        HermitianOperator::from_real_diagonal(&d)
    }

    /// `e^{iNθ}`.
    pub fn phase_shift(&self, theta: f64) -> DMatrix<C64> {
        DMatrix::from_diagonal(&nalgebra::DVector::from_fn(self.dim, |m, _| {
            C64::from_polar(1.0, m as f64 * theta)
        }))
    }
}

/// `E(Δ)_nm = g_nm (1/2π) ∫_Δ e^{i(n−m)x} dx`.
#[derive(Clone, PartialEq)]
pub struct PhaseFormula {
    overlap: OverlapMatrix,
}

impl fmt::Debug for PhaseFormula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "PhaseFormula(dim {})", self.dim())
    }
}

impl PhaseFormula {
    pub fn dim(&self) -> usize {
        self.overlap.dim()
    }

    pub fn overlap(&self) -> &OverlapMatrix {
        &self.overlap
    }

    /// `(1/2π) ∫_Δ e^{ikx} dx` for `k = 0..D−1`.
    fn fourier_moments(&self, arcs: &CircleSet) -> Vec<C64> {
        let mut out = vec![C64::new(0.0, 0.0); self.dim()];
        for arc in arcs.arcs() {
            let (a, b) = (arc.lo, arc.hi);
            out[0] += C64::new((b - a) / TAU, 0.0);
            let mid = 0.5 * (a + b);
            let half = 0.5 * (b - a);
            for (k, slot) in out.iter_mut().enumerate().skip(1) {
                let kf = k as f64;
                // (e^{ikb} − e^{ika}) / (2πik), written without cancellation.
                *slot += C64::from_polar((kf * half).sin() / (PI * kf), kf * mid);
            }
        }
        out
    }

    pub fn effect(&self, set: &MeasurableSet) -> Result<HermitianOperator> {
        let arcs = match set {
            MeasurableSet::Circle(c) => c,
            MeasurableSet::Point { .. } => return Ok(HermitianOperator::zeros(self.dim())),
            other => {
                return Err(Error::DomainMismatch {
                    left: Domain::Circle,
                    right: other.domain(),
                })
            }
        };
        let moments = self.fourier_moments(arcs);
        let g = self.overlap.matrix();
        let m = DMatrix::from_fn(self.dim(), self.dim(), |n, m| {
            let t = if n >= m { moments[n - m] } else { moments[m - n].conj() };
            g[(n, m)] * t
        });
        Ok(HermitianOperator::from_matrix_unchecked(m))
    }
}

/// `F_n^ε = Σ_m C(m,n) ε^n (1−ε)^{m−n} |m⟩⟨m|` on `span{|0⟩..|D−1⟩}`.
pub fn unsharp_number(eps: f64, dim: usize) -> Result<Povm> {
    check_dim(dim, 1)?;
    let kernel = binomial_kernel(eps)?;
    let label = format!("unsharp-number:eps={eps},dim={dim}");
    Ok(Povm::diagonal(Domain::Naturals, dim, label, move |set| {
        (0..dim).map(|m| kernel.evaluate(m as f64, set)).collect()
    }))
}

pub fn phase_povm(overlap: OverlapMatrix) -> Result<Povm> {
    check_dim(overlap.dim(), 1)?;
    let dim = overlap.dim();
    Ok(Povm::explicit(PhaseFormula { overlap }, format!("phase:dim={dim}")))
}

/// Orthonormal `ψ_n` except `⟨ψ_s|ψ_t⟩ = g`, `|g| < 1`.
pub fn phase_e1(s: usize, t: usize, g: f64, dim: usize) -> Result<Povm> {
    check_dim(dim, 2)?;
    if !(g.abs() < 1.0) {
        return Err(Error::InvalidParameter(format!("overlap must satisfy |g| < 1, got {g}")));
    }
    let overlap = OverlapMatrix::single_pair(dim, s, t, C64::new(g, 0.0))?;
    Ok(phase_povm(overlap)?.with_label(format!("phase-e1:s={s},t={t},g={g},dim={dim}")))
}

pub fn canonical_phase(dim: usize) -> Result<Povm> {
    check_dim(dim, 2)?;
    Ok(phase_povm(OverlapMatrix::all_ones(dim))?.with_label(format!("phase-can:dim={dim}")))
}

/// `max ‖e^{iNθ} F(Δ) e^{−iNθ} − F(Δ ⊕ θ)‖` over all `(θ, Δ)` combinations.
pub fn covariance_check(povm: &Povm, thetas: &[f64], sets: &[CircleSet]) -> Result<f64> {
    if !matches!(povm.provenance(), crate::povm::Provenance::Explicit(_)) {
        return Err(Error::InvalidParameter(format!(
            "covariance check needs a phase observable, got {}",
            povm.label()
        )));
    }
    let n = NumberOperator { dim: povm.dim() };
    let mut worst = 0.0f64;
    for &theta in thetas {
        let u = n.phase_shift(theta);
        for set in sets {
            let rotated = povm.effect(&set.clone().into())?.op().conjugate_by(&u)?;
            let shifted = povm.effect(&set.shift(theta).into())?;
            worst = worst.max(distance(&rotated, shifted.op())?);
        }
    }
    Ok(worst)
}

/// Grid `[0, 1]` of `G` points smeared with the convolution kernel of `weight`.
pub fn bounded_unsharp_position(weight: KernelWeight, grid: usize) -> Result<Povm> {
    let e = SpectralMeasure::uniform_grid(0.0, 1.0, grid)?;
    let label = format!("bounded-pos:weight={},grid={grid}", weight.label());
    Ok(smear(&e, &convolution_kernel(weight)?)?.with_label(label))
}

/// Grid `[min, max]` of `G` points smeared with a Gaussian of width `l`.
pub fn gaussian_unsharp_position(l: f64, min: f64, max: f64, grid: usize) -> Result<Povm> {
    let kernel = gaussian_kernel(l)?;
    let e = SpectralMeasure::uniform_grid(min, max, grid)?;
    Ok(smear(&e, &kernel)?.with_label(format!("gauss-pos:l={l},min={min},max={max},grid={grid}")))
}

/// `l ∫_{u1}^{u0} Φ(u) du` where `u0 − u1 = 1/l`.
fn integrated_cdf(l: f64, u0: f64, u1: f64) -> f64 {
    if u1 >= 0.0 {
        // One minus the integrated tail; `uQ(u) − φ(u)` is an antiderivative of `Q`.
        let h = |u: f64| u * normal_sf(u) - normal_pdf(u);
        1.0 - l * (h(u0) - h(u1))
    } else {
        let g = |u: f64| u * normal_cdf(u) + normal_pdf(u);
        l * (g(u0) - g(u1))
    }
}

/// `⟨ψ_n, Q((−∞, a)) ψ_n⟩` for the Gaussian position of width `l` and
/// `ψ_n` the normalized indicator of `[−n, −n+1]`, in closed form.
pub fn halfline_localization(l: f64, a: f64, n: u64) -> Result<f64> {
    if !(l > 0.0 && l.is_finite()) || n == 0 || !a.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "need l > 0, finite a and n >= 1, got l={l}, a={a}, n={n}"
        )));
    }
    let nf = n as f64;
    let u0 = (a + nf) / l;
    let u1 = (a + nf - 1.0) / l;
    Ok(integrated_cdf(l, u0, u1).clamp(0.0, 1.0))
}

/// Spectral grid of a smeared observable.
pub fn position_grid(povm: &Povm) -> Option<&[f64]> {
    match povm.provenance() {
        crate::povm::Provenance::Smeared { spectral, .. } => Some(spectral.points()),
        _ => None,
    }
}

/// Builds an observable from strings such as `"phase-can:dim=256"`.
pub fn parse_observable(input: &str) -> Result<Povm> {
    let (name, p) = split_spec(input)?;
    let dim = |default: u64| -> Result<usize> { Ok(p.uint_or("dim", default)? as usize) };
    let povm = match name {
        "unsharp-number" => unsharp_number(p.float_or("eps", 0.5)?, dim(200)?),
        "phase-e1" => phase_e1(
            p.uint_or("s", 0)? as usize,
            p.uint_or("t", 1)? as usize,
            p.float_or("g", 0.5)?,
            dim(64)?,
        ),
        "phase-can" => canonical_phase(dim(256)?),
        "bounded-pos" => {
            let grid = p.uint_or("grid", 200)? as usize;
            match p.raw("weight").unwrap_or("default") {
                "default" => bounded_unsharp_position(KernelWeight::parabolic(), grid),
                w => return Err(Error::parse(input, format!("unknown weight {w:?}"))),
            }
        }
        "gauss-pos" => gaussian_unsharp_position(
            p.float_or("l", 1.0)?,
            p.float_or("min", -50.0)?,
            p.float_or("max", 0.0)?,
            p.uint_or("grid", 500)? as usize,
        ),
        other => return Err(Error::parse(input, format!("unknown observable {other:?}"))),
    };
    p.finish(input)?;
    povm
}

/// Kernel used by a smeared observable, if any.
pub fn kernel_of(povm: &Povm) -> Option<&MarkovKernel> {
    match povm.provenance() {
        crate::povm::Provenance::Smeared { kernel, .. } => Some(kernel),
        _ => None,
    }
}

/// `{0, ..., k}` as a set of outcomes.
pub fn number_block(k: u64) -> MeasurableSet {
    NatSet::finite(0..=k).into()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operators::{classify, operator_norm, OperatorClass};
    use crate::povm::{check_commutative, partition_error};
    use approx::assert_abs_diff_eq;

    fn set(s: &str) -> MeasurableSet {
        s.parse().unwrap()
    }

    #[test]
    fn unsharp_number_examples() {
        let f = unsharp_number(0.5, 4).unwrap();
        let e = f.effect(&set("nat:{1}")).unwrap();
        let d = e.op().real_diagonal();
        for (got, want) in d.iter().zip([0.0, 0.5, 0.5, 0.375]) {
            assert_abs_diff_eq!(*got, want, epsilon = 1e-15);
        }
        assert_eq!(f.norm(&set("nat:{0}")).unwrap(), 1.0);
        assert!(f.normalization_error().unwrap() <= 1e-12);
        assert!(unsharp_number(1.0, 4).is_err());
        assert!(unsharp_number(0.5, 0).is_err());
    }

    #[test]
    fn unsharp_number_is_the_smeared_number_pvm() {
        let f = unsharp_number(0.3, 12).unwrap();
        let g = smear(&SpectralMeasure::number(12).unwrap(), &binomial_kernel(0.3).unwrap()).unwrap();
        for s in ["nat:{0}", "nat:{2,5}", "nat:co{1}", "nat:{}"] {
            assert_eq!(f.effect(&set(s)).unwrap(), g.effect(&set(s)).unwrap());
        }
    }

    #[test]
    fn phase_examples() {
        let eye = phase_povm(OverlapMatrix::identity(5)).unwrap();
        let e = eye.effect(&set("circ:[0,1)∪[2,2.5)")).unwrap();
        assert!(distance(e.op(), &HermitianOperator::identity(5).scale(1.5 / TAU)).unwrap() < 1e-14);
        let can = canonical_phase(16).unwrap();
        assert!(can.normalization_error().unwrap() < 1e-12);
        assert_eq!(can.norm(&set("circ:{1.0}")).unwrap(), 0.0);
    }

    #[test]
    fn e1_example_bound() {
        let e1 = phase_e1(0, 1, 0.5, 16).unwrap();
        let e = e1.effect(&set("circ:[0,3.141592653589793)")).unwrap();
        let c = classify(e.op()).unwrap();
        assert!(matches!(c.class, OperatorClass::Effect));
        assert!(c.max_eigenvalue <= 0.75 + 1e-12);
        assert!(phase_e1(0, 0, 0.5, 16).is_err());
        assert!(phase_e1(0, 1, 1.0, 16).is_err());
    }

    #[test]
    fn overlap_validation() {
        let mut g = DMatrix::identity(3, 3);
        g[(0, 1)] = C64::new(1.0, 0.0);
        g[(1, 0)] = C64::new(1.0, 0.0);
        g[(1, 2)] = C64::new(1.0, 0.0);
        g[(2, 1)] = C64::new(1.0, 0.0);
        // Pairwise admissible but not a Gram matrix.
        assert!(OverlapMatrix::new(g).is_err());
        let mut h = DMatrix::identity(2, 2);
        h[(0, 0)] = C64::new(0.9, 0.0);
        assert!(OverlapMatrix::new(h).is_err());
    }

    #[test]
    fn covariance_examples() {
        let e1 = phase_e1(0, 1, 0.5, 32).unwrap();
        let arc = CircleSet::arc(0.0, PI).unwrap();
        assert_eq!(covariance_check(&e1, &[0.0], &[arc.clone()]).unwrap(), 0.0);
        assert!(covariance_check(&e1, &[PI], &[arc.clone()]).unwrap() <= 1e-10);
        let pos = gaussian_unsharp_position(1.0, -1.0, 1.0, 5).unwrap();
        assert!(covariance_check(&pos, &[1.0], &[arc]).is_err());
    }

    #[test]
    fn e1_does_not_commute() {
        let e1 = phase_e1(0, 1, 0.5, 16).unwrap();
        let fam = vec![set("circ:[0,3.141592653589793)"), set("circ:[1.5707963267948966,4.71238898038469)")];
        assert!(check_commutative(&e1, &fam, 10).unwrap().max_commutator_norm > 1e-3);
    }

    #[test]
    fn bounded_position_examples() {
        let q = bounded_unsharp_position(KernelWeight::parabolic(), 50).unwrap();
        assert!(distance(q.effect(&set("[-1,2)")).unwrap().op(), &HermitianOperator::identity(50)).unwrap() < 1e-9);
        assert_eq!(q.norm(&set("{0.5}")).unwrap(), 0.0);
        let n = q.norm(&set("[0.2,0.3)")).unwrap();
        assert!(n <= 1.5 * 0.1 + 1e-9);
        assert!(partition_error(&q, &[set("(-inf,0.4)"), set("[0.4,inf)")]).unwrap() < 1e-9);
    }

    #[test]
    fn gaussian_position_examples() {
        let q = gaussian_unsharp_position(1.0, -50.0, 0.0, 500).unwrap();
        assert!(q.normalization_error().unwrap() <= 1e-15);
        let grid = position_grid(&q).unwrap();
        let xj = grid[123];
        let below = q.effect(&MeasurableSet::Line(crate::sets::LineSet::below(xj).unwrap())).unwrap();
        assert_abs_diff_eq!(below.op().entry(123, 123).re, 0.5, epsilon = 1e-15);
        assert!(operator_norm(q.effect(&set("(-inf,-1)")).unwrap().op()).unwrap() >= 0.999);
    }

    #[test]
    fn halfline_values() {
        let oracle = crate::quad::adaptive_simpson(&|x: f64| normal_cdf(-1.0 - x), -1.0, 0.0, 1e-14);
        let v = halfline_localization(1.0, -1.0, 1).unwrap();
        assert_abs_diff_eq!(v, oracle, epsilon = 1e-12);
        assert!(v > 0.0 && v < 0.5);
        assert!(halfline_localization(1.0, -1.0, 40).unwrap() >= 1.0 - 1e-9);
        let seq: Vec<f64> = (1..60).map(|n| halfline_localization(0.7, 0.3, n).unwrap()).collect();
        assert!(seq.windows(2).all(|w| w[1] >= w[0]));
        for n in [2u64, 3, 5] {
            let o = crate::quad::adaptive_simpson(&|x: f64| normal_cdf((0.3 - x) / 0.7), -(n as f64), 1.0 - n as f64, 1e-14);
            assert_abs_diff_eq!(halfline_localization(0.7, 0.3, n).unwrap(), o, epsilon = 1e-12);
        }
    }

    #[test]
    fn observable_specs() {
        for s in [
            "unsharp-number:eps=0.5,dim=20",
            "phase-e1:s=0,t=1,g=0.5,dim=8",
            "phase-can:dim=8",
            "bounded-pos:grid=20",
            "gauss-pos:l=1,min=-5,max=0,grid=50",
        ] {
            assert!(parse_observable(s).is_ok(), "{s}");
        }
        assert!(matches!(parse_observable("phase-can:dim=8,x=1"), Err(Error::Parse { .. })));
        assert!(matches!(parse_observable("nope"), Err(Error::Parse { .. })));
        assert!(matches!(parse_observable("phase-can:dim=1"), Err(Error::InvalidParameter(_))));
    }
}
