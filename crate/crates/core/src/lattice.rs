//! Unimodular lattices in ℝⁿ: representation, LLL reduction, short-vector
//! enumeration and minimal-vector sets.
//!
//! A lattice is stored as a square basis matrix whose columns are the basis
//! vectors. Lattice points are addressed by integer coefficient vectors with
//! respect to that basis, so membership is always exact.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance on `|det(basis)| - 1` accepted at construction.
pub const UNIMODULAR_TOL: f64 = 1e-9;
/// Relative tolerance deciding equality of squared norms.
pub const NORM_TIE_TOL: f64 = 1e-9;
/// Relative singular-value cutoff used for every rank computation.
pub const RANK_TOL: f64 = 1e-9;
/// Lovász parameter.
pub const LLL_DELTA: f64 = 0.99;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "LatticeJson", into = "LatticeJson")]
pub struct Lattice {
    basis: DMatrix<f64>,
}

/// Wire form: `{"n": int, "basis": [[row-major floats]]}`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LatticeJson {
    pub n: usize,
    pub basis: Vec<Vec<f64>>,
}

impl TryFrom<LatticeJson> for Lattice {
    type Error = Error;

    fn try_from(value: LatticeJson) -> Result<Self> {
        if value.basis.len() != value.n {
            return Err(Error::InvalidLattice(format!(
                "n = {} but basis has {} rows",
                value.n,
                value.basis.len()
            )));
        }
        Lattice::from_rows(&value.basis)
    }
}

impl From<Lattice> for LatticeJson {
    fn from(l: Lattice) -> Self {
        LatticeJson { n: l.dim(), basis: l.rows() }
    }
}

impl Lattice {
    /// Validates shape, finiteness, independence and unimodularity.
    pub fn new(basis: DMatrix<f64>) -> Result<Self> {
        Self::with_tolerance(basis, UNIMODULAR_TOL)
    }

    pub fn with_tolerance(basis: DMatrix<f64>, det_tol: f64) -> Result<Self> {
        let n = basis.nrows();
        if n < 2 || basis.ncols() != n {
            return Err(Error::InvalidLattice(format!(
                "basis must be square with n >= 2, got {}x{}",
                basis.nrows(),
                basis.ncols()
            )));
        }
        if basis.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidLattice("non-finite entry".into()));
        }
        let det = basis.determinant();
        if det.abs() < 1e-300 || basis.clone().svd(false, false).singular_values.min() <= 1e-14 {
            return Err(Error::DegenerateBasis);
        }
        if (det.abs() - 1.0).abs() > det_tol {
            return Err(Error::InvalidLattice(format!("|det| = {} is not 1", det.abs())));
        }
        Ok(Lattice { basis })
    }

    /// Row-major construction, the same layout as the JSON form.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(Error::InvalidLattice("basis rows must all have length n".into()));
        }
        Self::new(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
    }

    pub fn identity(n: usize) -> Self {
        Lattice { basis: DMatrix::identity(n, n) }
    }

    pub fn diagonal(entries: &[f64]) -> Result<Self> {
        Self::new(DMatrix::from_diagonal(&DVector::from_column_slice(entries)))
    }

    /// Skips the unimodularity check; used for states produced by exact
    /// determinant-one maps whose drift is tracked separately.
    pub(crate) fn from_basis_unchecked(basis: DMatrix<f64>) -> Self {
        Lattice { basis }
    }

    pub fn dim(&self) -> usize {
        self.basis.nrows()
    }

    pub fn basis(&self) -> &DMatrix<f64> {
        &self.basis
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.basis.row_iter().map(|r| r.iter().copied().collect()).collect()
    }

    pub fn det(&self) -> f64 {
        self.basis.determinant()
    }

    /// `| |det| - 1 |`.
    pub fn det_drift(&self) -> f64 {
        (self.det().abs() - 1.0).abs()
    }

    pub fn gram(&self) -> DMatrix<f64> {
        self.basis.transpose() * &self.basis
    }

    /// The lattice point with the given integer coefficients.
    pub fn point(&self, coeffs: &[i64]) -> DVector<f64> {
        &self.basis * int_vector(coeffs)
    }

    pub fn norm_sq(&self, coeffs: &[i64]) -> f64 {
        self.point(coeffs).norm_squared()
    }
}

pub(crate) fn int_vector(coeffs: &[i64]) -> DVector<f64> {
    DVector::from_iterator(coeffs.len(), coeffs.iter().map(|&c| c as f64))
}

/// Minimal squared norm together with all minimal vectors (one per ± pair).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MinimalVectorSet {
    /// Squared minimal norm.
    pub m: f64,
    /// Coefficient vectors w.r.t. the lattice basis, first nonzero entry positive.
    pub vectors: Vec<Vec<i64>>,
    /// Dimension of the real span of `vectors`.
    pub rank: usize,
}

impl MinimalVectorSet {
    /// Orthonormal basis (as columns) of the span of the minimal vectors.
    pub fn span_basis(&self, lattice: &Lattice) -> DMatrix<f64> {
        orthonormal_span(lattice, &self.vectors)
    }

    /// Orthogonal projector onto the span of the minimal vectors.
    pub fn projector(&self, lattice: &Lattice) -> DMatrix<f64> {
        let u = self.span_basis(lattice);
        &u * u.transpose()
    }
}

/// Orthonormal basis of the real span of the given lattice points.
pub(crate) fn orthonormal_span(lattice: &Lattice, coeffs: &[Vec<i64>]) -> DMatrix<f64> {
    let n = lattice.dim();
    if coeffs.is_empty() {
        return DMatrix::zeros(n, 0);
    }
    let cols: Vec<DVector<f64>> = coeffs.iter().map(|c| lattice.point(c)).collect();
    let a = DMatrix::from_columns(&cols);
    let svd = a.svd(true, false);
    let u = svd.u.expect("left singular vectors requested");
    let smax = svd.singular_values.max();
    let keep: Vec<usize> = (0..svd.singular_values.len())
        .filter(|&i| svd.singular_values[i] > RANK_TOL * smax)
        .collect();
    DMatrix::from_columns(&keep.iter().map(|&i| u.column(i).into_owned()).collect::<Vec<_>>())
}

/// Rank of the real span of the given lattice points.
pub fn span_rank(lattice: &Lattice, coeffs: &[Vec<i64>]) -> usize {
    orthonormal_span(lattice, coeffs).ncols()
}

/// Puts a coefficient vector in ± canonical form (first nonzero entry positive).
pub(crate) fn canonical_sign(mut v: Vec<i64>) -> Vec<i64> {
    if v.iter().find(|&&c| c != 0).is_some_and(|&c| c < 0) {
        v.iter_mut().for_each(|c| *c = -*c);
    }
    v
}

fn gram_schmidt(cols: &[DVector<f64>]) -> Result<(DMatrix<f64>, Vec<f64>)> {
    let n = cols.len();
    let mut mu = DMatrix::zeros(n, n);
    let mut stars: Vec<DVector<f64>> = Vec::with_capacity(n);
    let mut norms = Vec::with_capacity(n);
    let scale = cols.iter().map(|c| c.norm_squared()).fold(0.0, f64::max);
    for i in 0..n {
        let mut v = cols[i].clone();
        for j in 0..i {
            mu[(i, j)] = cols[i].dot(&stars[j]) / norms[j];
            v -= mu[(i, j)] * &stars[j];
        }
        let ns = v.norm_squared();
        if !(ns > 1e-24 * scale) {
            return Err(Error::DegenerateBasis);
        }
        norms.push(ns);
        stars.push(v);
    }
    Ok((mu, norms))
}

/// LLL reduction (δ = 0.99) returning the reduced lattice and the integer
/// unimodular transform `U` with `reduced.basis = lattice.basis · U`.
pub fn reduce_basis_with_transform(lattice: &Lattice) -> Result<(Lattice, DMatrix<i64>)> {
    let n = lattice.dim();
    let mut cols: Vec<DVector<f64>> = lattice.basis.column_iter().map(|c| c.into_owned()).collect();
    let mut u = DMatrix::<i64>::identity(n, n);
    let (mut mu, mut norms) = gram_schmidt(&cols)?;
    let mut k = 1;
    let mut guard = 0usize;
    while k < n {
        guard += 1;
        if guard > 1_000_000 {
            return Err(Error::DegenerateBasis);
        }
        for j in (0..k).rev() {
            let q = mu[(k, j)].round();
            if q != 0.0 {
                let qi = q as i64;
                let bj = cols[j].clone();
                cols[k] -= q * bj;
                for r in 0..n {
                    u[(r, k)] -= qi * u[(r, j)];
                }
                (mu, norms) = gram_schmidt(&cols)?;
            }
        }
        if norms[k] >= (LLL_DELTA - mu[(k, k - 1)].powi(2)) * norms[k - 1] {
            k += 1;
        } else {
            cols.swap(k, k - 1);
            u.swap_columns(k, k - 1);
            (mu, norms) = gram_schmidt(&cols)?;
            k = (k - 1).max(1);
        }
    }
    Ok((Lattice::from_basis_unchecked(DMatrix::from_columns(&cols)), u))
}

pub fn reduce_basis(lattice: &Lattice) -> Result<Lattice> {
    reduce_basis_with_transform(lattice).map(|(l, _)| l)
}

/// Fincke–Pohst enumeration of all nonzero `x` with `xᵀ G x ≤ bound`,
/// one representative per ± pair, paired with its exact quadratic-form value.
pub fn enumerate_short_vectors(gram: &DMatrix<f64>, bound: f64) -> Vec<(Vec<i64>, f64)> {
    let n = gram.nrows();
    let chol = match gram.clone().cholesky() {
        Some(c) => c,
        None => return Vec::new(),
    };
    let r = chol.l().transpose();
    let slack = bound * (1.0 + 1e-12);
    let mut x = vec![0i64; n];
    let mut out = Vec::new();
    fp_level(&r, n - 1, 0.0, slack, &mut x, &mut out);
    out.retain(|(v, _)| v.iter().find(|&&c| c != 0).is_some_and(|&c| c > 0));
    for (v, q) in out.iter_mut() {
        let xv = int_vector(v);
        *q = (xv.transpose() * gram * &xv)[(0, 0)];
    }
    out
}

fn fp_level(
    r: &DMatrix<f64>,
    i: usize,
    partial: f64,
    bound: f64,
    x: &mut Vec<i64>,
    out: &mut Vec<(Vec<i64>, f64)>,
) {
    let n = r.nrows();
    let s: f64 = ((i + 1)..n).map(|j| r[(i, j)] * x[j] as f64).sum();
    let rii = r[(i, i)];
    let rem = bound - partial;
    if rem < 0.0 {
        return;
    }
    let rad = rem.sqrt() / rii;
    let center = -s / rii;
    let lo = (center - rad).ceil() as i64;
    let hi = (center + rad).floor() as i64;
    for xi in lo..=hi {
        let t = rii * xi as f64 + s;
        let p = partial + t * t;
        if p > bound {
            continue;
        }
        x[i] = xi;
        if i == 0 {
            if x.iter().any(|&c| c != 0) {
                out.push((x.clone(), p));
            }
        } else {
            fp_level(r, i - 1, p, bound, x, out);
        }
    }
    x[i] = 0;
}

/// All lattice vectors (original-basis coefficients) with squared norm at most
/// `bound`, one per ± pair, sorted by norm then coefficients.
pub fn vectors_within(lattice: &Lattice, bound: f64) -> Result<Vec<(Vec<i64>, f64)>> {
    let (reduced, u) = reduce_basis_with_transform(lattice)?;
    let gram = reduced.gram();
    let mut found: Vec<(Vec<i64>, f64)> = enumerate_short_vectors(&gram, bound)
        .into_iter()
        .map(|(x, _)| {
            let c: Vec<i64> = (0..x.len()).map(|r| (0..x.len()).map(|k| u[(r, k)] * x[k]).sum()).collect();
            let c = canonical_sign(c);
            let q = lattice.norm_sq(&c);
            (c, q)
        })
        .collect();
    found.sort_by(|a, b| a.1.total_cmp(&b.1).then_with(|| a.0.cmp(&b.0)));
    Ok(found)
}

pub fn minimal_vectors(lattice: &Lattice) -> Result<MinimalVectorSet> {
    let (reduced, _) = reduce_basis_with_transform(lattice)?;
    let first = reduced.basis.column_iter().map(|c| c.norm_squared()).fold(f64::INFINITY, f64::min);
    let found = vectors_within(lattice, first * (1.0 + NORM_TIE_TOL))?;
    let m = found.iter().map(|(_, q)| *q).fold(f64::INFINITY, f64::min);
    let mut vectors: Vec<Vec<i64>> = found
        .into_iter()
        .filter(|(_, q)| *q <= m * (1.0 + NORM_TIE_TOL))
        .map(|(c, _)| c)
        .collect();
    vectors.sort();
    let rank = span_rank(lattice, &vectors);
    Ok(MinimalVectorSet { m, vectors, rank })
}

pub fn well_rounded(lattice: &Lattice) -> Result<bool> {
    Ok(minimal_vectors(lattice)?.rank == lattice.dim())
}
