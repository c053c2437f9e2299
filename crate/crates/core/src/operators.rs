//! Dense complex Hermitian operators at truncation dimension `D`.
//!
//! Norms and classifications come from a full Hermitian eigensolve.

use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::Deserialize;

use crate::error::{Error, Result};

pub type C64 = Complex64;

/// Default cap on the truncation dimension.
pub const MAX_DIM: usize = 512;

/// Hermiticity tolerance relative to `1 + max|entry|`.
pub const HERMITIAN_TOL: f64 = 1e-12;
/// Idempotency tolerance `‖H² − H‖` for projections.
pub const PROJECTION_TOL: f64 = 1e-10;
/// Eigenvalue-in-{0,1} tolerance for projections.
pub const PROJECTION_EIG_TOL: f64 = 1e-8;
/// Relative positivity tolerance for effects.
pub const POSITIVITY_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct HermitianOperator {
    m: DMatrix<C64>,
}

fn max_abs(m: &DMatrix<C64>) -> f64 {
    m.iter().fold(0.0, |acc, z| acc.max(z.norm()))
}

impl HermitianOperator {
    /// Validates Hermiticity and stores the symmetrized matrix `(M + M†)/2`.
    pub fn new(m: DMatrix<C64>) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::DimensionMismatch {
                left: m.nrows(),
                right: m.ncols(),
            });
        }
        if m.nrows() == 0 {
            return Err(Error::InvalidParameter("dimension must be positive".into()));
        }
        let adj = m.adjoint();
        let deviation = max_abs(&(&m - &adj));
        if deviation.is_nan() || deviation > HERMITIAN_TOL * (1.0 + max_abs(&m)) {
            return Err(Error::NotHermitian { deviation });
        }
        Ok(HermitianOperator {
            m: (m + adj).unscale(2.0),
        })
    }

    pub(crate) fn from_matrix_unchecked(m: DMatrix<C64>) -> Self {
        debug_assert_eq!(m.nrows(), m.ncols());
        HermitianOperator { m }
    }

    pub fn from_real_diagonal(diag: &[f64]) -> Self {
        let d = DVector::from_iterator(diag.len(), diag.iter().map(|&x| C64::new(x, 0.0)));
        HermitianOperator {
            m: DMatrix::from_diagonal(&d),
        }
    }

    pub fn identity(dim: usize) -> Self {
        HermitianOperator {
            m: DMatrix::identity(dim, dim),
        }
    }

    pub fn zeros(dim: usize) -> Self {
        HermitianOperator {
            m: DMatrix::zeros(dim, dim),
        }
    }

    pub fn dim(&self) -> usize {
        self.m.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.m
    }

    pub fn into_matrix(self) -> DMatrix<C64> {
        self.m
    }

    pub fn entry(&self, row: usize, col: usize) -> C64 {
        self.m[(row, col)]
    }

    pub fn is_diagonal(&self) -> bool {
        let d = self.dim();
        (0..d).all(|j| (0..d).all(|i| i == j || self.m[(i, j)] == C64::new(0.0, 0.0)))
    }

    pub fn real_diagonal(&self) -> Vec<f64> {
        (0..self.dim()).map(|i| self.m[(i, i)].re).collect()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.m.norm()
    }

    fn check_dim(&self, other: &Self) -> Result<()> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch {
                left: self.dim(),
                right: other.dim(),
            });
        }
        Ok(())
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_dim(other)?;
        Ok(HermitianOperator {
            m: &self.m + &other.m,
        })
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.check_dim(other)?;
        Ok(HermitianOperator {
            m: &self.m - &other.m,
        })
    }

    pub fn scale(&self, alpha: f64) -> Self {
        HermitianOperator {
            m: self.m.scale(alpha),
        }
    }

    /// `self += alpha * other`.
    pub fn axpy(&mut self, alpha: f64, other: &Self) -> Result<()> {
        self.check_dim(other)?;
        self.m.zip_apply(&other.m, |a, b| *a += b * alpha);
        Ok(())
    }

    /// Unitary conjugation `U H U†`.
    pub fn conjugate_by(&self, u: &DMatrix<C64>) -> Result<Self> {
        if u.nrows() != self.dim() || u.ncols() != self.dim() {
            return Err(Error::DimensionMismatch {
                left: self.dim(),
                right: u.nrows(),
            });
        }
        Ok(HermitianOperator {
            m: u * &self.m * u.adjoint(),
        })
    }

    /// Eigenvalues in ascending order.
    pub fn eigenvalues(&self) -> Result<Vec<f64>> {
        let mut vals = if self.is_diagonal() {
            self.real_diagonal()
        } else {
            if self.m.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
                return Err(self.eigen_failure("non-finite entries"));
            }
            let vals: Vec<f64> = self.m.symmetric_eigenvalues().iter().copied().collect();
            if vals.iter().any(|v| !v.is_finite()) {
                return Err(self.eigen_failure("non-finite eigenvalues"));
            }
            vals
        };
        if vals.iter().any(|v| v.is_nan()) {
            return Err(self.eigen_failure("NaN on the diagonal"));
        }
        vals.sort_by(f64::total_cmp);
        Ok(vals)
    }

    fn eigen_failure(&self, what: &str) -> Error {
        let mut report = String::new();
        let _ = write!(
            report,
            "{what}; frobenius norm {:e}, max |entry| {:e}",
            self.frobenius_norm(),
            max_abs(&self.m)
        );
        Error::EigenFailure {
            dim: self.dim(),
            report,
        }
    }

    /// Matrix text format: first line `dim`, then one `re im` pair per
    /// entry in row-major order, 17 significant digits.
    pub fn to_text(&self) -> String {
        let d = self.dim();
        let mut out = format!("{d}\n");
        for i in 0..d {
            for j in 0..d {
                let z = self.m[(i, j)];
                let _ = writeln!(out, "{:.16e} {:.16e}", z.re, z.im);
            }
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut tokens = text.split_whitespace();
        let dim: usize = tokens
            .next()
            .ok_or_else(|| Error::parse(text, "missing dimension"))?
            .parse()
            .map_err(|_| Error::parse(text, "bad dimension"))?;
        let mut entries = Vec::with_capacity(dim * dim);
        for _ in 0..dim * dim {
            let mut next = || -> Result<f64> {
                tokens
                    .next()
                    .ok_or_else(|| Error::parse("matrix text", "too few entries"))?
                    .parse::<f64>()
                    .map_err(|_| Error::parse("matrix text", "bad entry"))
            };
            let re = next()?;
            let im = next()?;
            entries.push(C64::new(re, im));
        }
        if tokens.next().is_some() {
            return Err(Error::parse("matrix text", "trailing tokens"));
        }
        Self::new(DMatrix::from_row_slice(dim, dim, &entries))
    }

    /// JSON `{"dim": D, "entries": [[re, im], ...]}`, row-major.
    pub fn to_json(&self) -> String {
        let d = self.dim();
        let mut out = format!("{{\"dim\":{d},\"entries\":[");
        for i in 0..d {
            for j in 0..d {
                if i + j > 0 {
                    out.push(',');
                }
                let z = self.m[(i, j)];
                let _ = write!(out, "[{:.16e},{:.16e}]", z.re, z.im);
            }
        }
        out.push_str("]}");
        out
    }

    pub fn from_json(text: &str) -> Result<Self> {
        #[derive(Deserialize)]
        struct Wire {
            dim: usize,
            entries: Vec<[f64; 2]>,
        }
        let w: Wire = serde_json::from_str(text).map_err(|e| Error::parse("matrix json", e.to_string()))?;
        if w.entries.len() != w.dim * w.dim {
            return Err(Error::parse(
                "matrix json",
                format!("expected {} entries, got {}", w.dim * w.dim, w.entries.len()),
            ));
        }
        let entries: Vec<C64> = w.entries.iter().map(|[re, im]| C64::new(*re, *im)).collect();
        Self::new(DMatrix::from_row_slice(w.dim, w.dim, &entries))
    }
}

/// `max |eigenvalue|`.
pub fn operator_norm(h: &HermitianOperator) -> Result<f64> {
    let vals = h.eigenvalues()?;
    Ok(vals.first().unwrap().abs().max(vals.last().unwrap().abs()))
}

/// `‖A − B‖`.
pub fn distance(a: &HermitianOperator, b: &HermitianOperator) -> Result<f64> {
    operator_norm(&a.sub(b)?)
}

/// `‖AB − BA‖`, computed as the norm of the Hermitian operator `i(AB − BA)`.
pub fn commutator_norm(a: &HermitianOperator, b: &HermitianOperator) -> Result<f64> {
    a.check_dim(b)?;
    if a.is_diagonal() && b.is_diagonal() {
        return Ok(0.0);
    }
    let ab = &a.m * &b.m;
    let c = (&ab - ab.adjoint()) * C64::new(0.0, 1.0);
    operator_norm(&HermitianOperator::from_matrix_unchecked(c))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "lowercase")]
pub enum OperatorClass {
    Projection,
    Effect,
    Positive,
    Indefinite,
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct Classification {
    pub class: OperatorClass,
    /// Offending eigenvalue for `positive`/`indefinite`, `‖H² − H‖` otherwise.
    pub witness: f64,
    pub min_eigenvalue: f64,
    pub max_eigenvalue: f64,
}

/// `‖H² − H‖`.
pub fn idempotency_defect(h: &HermitianOperator) -> Result<f64> {
    if h.is_diagonal() {
        return Ok(h
            .real_diagonal()
            .iter()
            .fold(0.0, |acc, &x| acc.max((x * x - x).abs())));
    }
    let sq = &h.m * &h.m;
    operator_norm(&HermitianOperator::from_matrix_unchecked(sq - &h.m))
}

pub fn classify(h: &HermitianOperator) -> Result<Classification> {
    let vals = h.eigenvalues()?;
    let lo = *vals.first().unwrap();
    let hi = *vals.last().unwrap();
    let norm = lo.abs().max(hi.abs());
    let tol = POSITIVITY_TOL * (1.0 + norm);
    let (class, witness) = if lo < -tol {
        (OperatorClass::Indefinite, lo)
    } else if hi > 1.0 + tol {
        (OperatorClass::Positive, hi)
    } else {
        let defect = idempotency_defect(h)?;
        let binary = vals
            .iter()
            .all(|&v| v.abs() <= PROJECTION_EIG_TOL || (v - 1.0).abs() <= PROJECTION_EIG_TOL);
        if defect <= PROJECTION_TOL && binary {
            (OperatorClass::Projection, defect)
        } else {
            (OperatorClass::Effect, defect)
        }
    };
    Ok(Classification {
        class,
        witness,
        min_eigenvalue: lo,
        max_eigenvalue: hi,
    })
}

/// Positive operator with spectrum in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Effect(HermitianOperator);

impl Effect {
    pub fn new(op: HermitianOperator) -> Result<Self> {
        let c = classify(&op)?;
        match c.class {
            OperatorClass::Effect | OperatorClass::Projection => Ok(Effect(op)),
            _ => Err(Error::NotEffect {
                eigenvalue: c.witness,
            }),
        }
    }

    pub(crate) fn new_unchecked(op: HermitianOperator) -> Self {
        Effect(op)
    }

    pub fn op(&self) -> &HermitianOperator {
        &self.0
    }

    pub fn into_op(self) -> HermitianOperator {
        self.0
    }

    pub fn norm(&self) -> Result<f64> {
        operator_norm(&self.0)
    }
}

/// Orthogonal projection.
#[derive(Debug, Clone, PartialEq)]
pub struct Projection(HermitianOperator);

impl Projection {
    pub fn new(op: HermitianOperator) -> Result<Self> {
        let c = classify(&op)?;
        if c.class == OperatorClass::Projection {
            Ok(Projection(op))
        } else {
            Err(Error::NotProjection(format!(
                "class {:?}, witness {:e}",
                c.class, c.witness
            )))
        }
    }

    /// Rank-one projection onto the `k`-th standard basis vector.
    pub fn basis(dim: usize, k: usize) -> Self {
        let mut d = vec![0.0; dim];
        d[k] = 1.0;
        Projection(HermitianOperator::from_real_diagonal(&d))
    }

    pub fn op(&self) -> &HermitianOperator {
        &self.0
    }
}

/// Unit vector `ψ`.
#[derive(Debug, Clone, PartialEq)]
pub struct State(DVector<C64>);

pub const STATE_NORM_TOL: f64 = 1e-12;

impl State {
    pub fn new(v: DVector<C64>) -> Result<Self> {
        let norm = v.norm();
        if v.is_empty() || (norm - 1.0).abs() > STATE_NORM_TOL {
            return Err(Error::NotNormalized { norm });
        }
        Ok(State(v))
    }

    /// Normalizes a nonzero vector.
    pub fn normalized(v: DVector<C64>) -> Result<Self> {
        let norm = v.norm();
        if !(norm > 0.0 && norm.is_finite()) {
            return Err(Error::NotNormalized { norm });
        }
        Ok(State(v.unscale(norm)))
    }

    pub fn from_real(v: &[f64]) -> Result<Self> {
        Self::normalized(DVector::from_iterator(
            v.len(),
            v.iter().map(|&x| C64::new(x, 0.0)),
        ))
    }

    pub fn basis(dim: usize, k: usize) -> Self {
        let mut v = DVector::zeros(dim);
        v[k] = C64::new(1.0, 0.0);
        State(v)
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn amplitudes(&self) -> &DVector<C64> {
        &self.0
    }
}

/// `⟨ψ, Hψ⟩`.
pub fn expectation(h: &HermitianOperator, psi: &State) -> Result<f64> {
    if h.dim() != psi.dim() {
        return Err(Error::DimensionMismatch {
            left: h.dim(),
            right: psi.dim(),
        });
    }
    let z = psi.0.dotc(&(&h.m * &psi.0));
    debug_assert!(z.im.abs() <= 1e-12 * (1.0 + z.re.abs()));
    Ok(z.re)
}
