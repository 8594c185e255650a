//! Well-rounded deformation retraction of unimodular lattices.
//!
//! Let `M` be the minimal vectors of Λ, `V` their real span (dimension `d < n`),
//! `P` the orthogonal projector onto `V` and `Q = I - P`. The rescaled inner
//! product multiplies squared lengths in `V` by `t` and those in `V^⊥` by
//! `t^{-d/(n-d)}`; that exponent is the only one keeping the covolume equal to 1:
//!
//! ```text
//! ‖v‖_t² = t‖Pv‖² + t^{-d/(n-d)}‖Qv‖²
//! ```
//!
//! Minimal vectors lie in `V`, so their norm grows exactly like `t·m`. Another
//! vector `v` (necessarily with `‖Pv‖² < m`) catches up when
//! `t‖Pv‖² + t^{-d/(n-d)}‖Qv‖² = t·m`, i.e. at
//!
//! ```text
//! t*(v) = (‖Qv‖² / (m - ‖Pv‖²))^{(n-d)/n}
//! ```
//!
//! The step stops at the smallest such `t*`, and the lattice is carried back to
//! the standard inner product by `A_t = t^{1/2}P + t^{-d/(2(n-d))}Q`, which has
//! determinant one. Every step raises the rank of the minimal span by at least
//! one, so at most `n - 1` steps reach a well-rounded lattice.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{
    minimal_vectors, orthonormal_span, span_rank, vectors_within, Lattice, MinimalVectorSet, NORM_TIE_TOL,
};

/// Starting bound for the catch-time search; doubled until a candidate shows up.
pub const INITIAL_CATCH_BOUND: f64 = 4.0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CatchEvent {
    pub t_star: f64,
    pub rank_before: usize,
    pub rank_after: usize,
    pub new_vectors: Vec<Vec<i64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LatticeTrajectory {
    pub states: Vec<Lattice>,
    pub events: Vec<CatchEvent>,
}

impl LatticeTrajectory {
    pub fn last(&self) -> &Lattice {
        self.states.last().expect("trajectory always holds the input state")
    }
}

struct Split {
    n: usize,
    d: usize,
    proj: DMatrix<f64>,
}

fn split(lattice: &Lattice, mins: &MinimalVectorSet) -> Result<Split> {
    let n = lattice.dim();
    let d = mins.rank;
    if d >= n {
        return Err(Error::AlreadyWellRounded);
    }
    let u = orthonormal_span(lattice, &mins.vectors);
    Ok(Split { n, d, proj: &u * u.transpose() })
}

impl Split {
    fn parts(&self, lattice: &Lattice, v: &[i64]) -> (f64, f64) {
        let x = lattice.point(v);
        let p = &self.proj * &x;
        let q = &x - &p;
        (p.norm_squared(), q.norm_squared())
    }

    fn perp_exponent(&self) -> f64 {
        -(self.d as f64) / ((self.n - self.d) as f64)
    }
}

/// Squared length of lattice vector `v` in the rescaled inner product at `t`.
pub fn scaled_norm(lattice: &Lattice, mins: &MinimalVectorSet, v: &[i64], t: f64) -> Result<f64> {
    if !(t >= 1.0) {
        return Err(Error::InvalidParameter(format!("scaling parameter t = {t} must be >= 1")));
    }
    let s = split(lattice, mins)?;
    let (p2, q2) = s.parts(lattice, v);
    Ok(t * p2 + t.powf(s.perp_exponent()) * q2)
}

/// Smallest `t* > 1` at which a vector outside the minimal span becomes minimal.
pub fn catch_time(lattice: &Lattice, mins: &MinimalVectorSet) -> Result<CatchEvent> {
    let s = split(lattice, mins)?;
    let m = mins.m;
    let expo = (s.n - s.d) as f64 / s.n as f64;
    let mut bound = INITIAL_CATCH_BOUND;
    loop {
        // a vector is caught by time `bound` exactly when its scaled norm there
        // is at most bound·m, so enumerate the deformed lattice at that radius;
        // its minimum stays below the Hermite constant until the catch
        let deformed = Lattice::from_basis_unchecked(identification(&s, bound) * lattice.basis());
        let mut cands: Vec<(Vec<i64>, f64)> = Vec::new();
        for (v, _) in vectors_within(&deformed, bound * m * (1.0 + NORM_TIE_TOL))? {
            let (p2, q2) = s.parts(lattice, &v);
            if q2 <= NORM_TIE_TOL * m || p2 >= m {
                continue;
            }
            let t = (q2 / (m - p2)).powf(expo);
            if t <= bound {
                cands.push((v, t));
            }
        }
        if let Some(t_star) = cands.iter().map(|c| c.1).reduce(f64::min) {
            let mut new_vectors: Vec<Vec<i64>> = cands
                .into_iter()
                .filter(|(_, t)| *t <= t_star * (1.0 + NORM_TIE_TOL))
                .map(|(v, _)| v)
                .collect();
            new_vectors.sort();
            let mut all = mins.vectors.clone();
            all.extend(new_vectors.iter().cloned());
            return Ok(CatchEvent {
                t_star,
                rank_before: s.d,
                rank_after: span_rank(lattice, &all),
                new_vectors,
            });
        }
        bound *= 2.0;
        if bound > 1e300 {
            // a full-rank lattice always has vectors off the span
            return Err(Error::DegenerateBasis);
        }
    }
}

/// The linear map `A_t = t^{1/2}P + t^{-d/(2(n-d))}Q`.
fn identification(s: &Split, t: f64) -> DMatrix<f64> {
    let id = DMatrix::<f64>::identity(s.n, s.n);
    let q = &id - &s.proj;
    &s.proj * t.sqrt() + q * t.powf(0.5 * s.perp_exponent())
}

/// One retraction step: deform to the catch time and re-identify with the
/// standard inner product. The marking (basis order) is carried along.
pub fn deform_step(lattice: &Lattice) -> Result<(Lattice, CatchEvent)> {
    let mins = minimal_vectors(lattice)?;
    let s = split(lattice, &mins)?;
    let event = catch_time(lattice, &mins)?;
    let a = identification(&s, event.t_star);
    Ok((Lattice::from_basis_unchecked(a * lattice.basis()), event))
}

/// Iterates [`deform_step`] until the minimal vectors span ℝⁿ.
pub fn retract(lattice: &Lattice) -> Result<LatticeTrajectory> {
    let mut states = vec![lattice.clone()];
    let mut events = Vec::new();
    let n = lattice.dim();
    loop {
        let cur = states.last().expect("nonempty");
        if minimal_vectors(cur)?.rank == n {
            break;
        }
        if events.len() >= n - 1 {
            // rank rises every step; reaching here means a tie was lost numerically
            return Err(Error::InvalidLattice("retraction exceeded n - 1 steps".into()));
        }
        let (next, ev) = deform_step(cur)?;
        events.push(ev);
        states.push(next);
    }
    Ok(LatticeTrajectory { states, events })
}

/// Distance between two marked lattices: `min_R ‖A - R·B‖_op` over orthogonal `R`,
/// with `R` the Procrustes solution.
pub fn marked_distance(a: &Lattice, b: &Lattice) -> f64 {
    let m = a.basis() * b.basis().transpose();
    let svd = m.svd(true, true);
    let r = svd.u.expect("u") * svd.v_t.expect("v_t");
    let diff = a.basis() - r * b.basis();
    diff.svd(false, false).singular_values.max()
}

/// Unimodular lattice of the point `z` of the upper half-plane: basis
/// `(1, 0), (Re z, Im z)` scaled by `(Im z)^{-1/2}`.
pub fn h2_point_to_lattice(z: Complex64) -> Result<Lattice> {
    if !(z.im > 0.0) || !z.re.is_finite() || !z.im.is_finite() {
        return Err(Error::InvalidPoint(format!("Im z must be positive, got {z}")));
    }
    let s = z.im.sqrt().recip();
    let basis = DMatrix::from_row_slice(2, 2, &[s, z.re * s, 0.0, z.im * s]);
    Lattice::with_tolerance(basis, 1e-9)
}

/// Inverse of [`h2_point_to_lattice`] up to rotation and reflection.
pub fn lattice_to_h2_point(lattice: &Lattice) -> Result<Complex64> {
    if lattice.dim() != 2 {
        return Err(Error::InvalidParameter(format!("expected n = 2, got n = {}", lattice.dim())));
    }
    let b = lattice.basis();
    let v1 = Complex64::new(b[(0, 0)], b[(1, 0)]);
    let v2 = Complex64::new(b[(0, 1)], b[(1, 1)]);
    let z = v2 / v1;
    if z.im == 0.0 {
        return Err(Error::DegenerateBasis);
    }
    Ok(if z.im < 0.0 { z.conj() } else { z })
}

/// Tolerance for membership in the closed standard fundamental domain.
pub const FD_TOL: f64 = 1e-12;

pub fn in_fundamental_domain(z: Complex64) -> bool {
    z.im > 0.0 && z.re.abs() <= 0.5 + FD_TOL && z.norm_sqr() >= 1.0 - FD_TOL
}

/// Moves `z` into the standard fundamental domain of SL(2, ℤ); returns the
/// reduced point and the matrix `[[a, b], [c, d]]` with `z' = (az + b)/(cz + d)`.
pub fn reduce_to_fundamental_domain(z: Complex64) -> Result<(Complex64, [[i64; 2]; 2])> {
    if !(z.im > 0.0) {
        return Err(Error::InvalidPoint(format!("Im z must be positive, got {z}")));
    }
    let mut w = z;
    let mut g = [[1i64, 0], [0, 1]];
    for _ in 0..10_000 {
        let k = w.re.round();
        if k != 0.0 {
            w -= k;
            let k = k as i64;
            g = [[g[0][0] - k * g[1][0], g[0][1] - k * g[1][1]], g[1]];
        }
        if w.norm_sqr() < 1.0 - FD_TOL {
            w = -w.inv();
            g = [[-g[1][0], -g[1][1]], g[0]];
        } else {
            return Ok((w, g));
        }
    }
    Err(Error::InvalidPoint(format!("reduction of {z} did not converge")))
}

/// Closed form of the retraction on the modular surface: for `z = x + iy` in
/// the fundamental domain the only catch happens at `t* = y / √(1 - x²)`, which
/// fixes `x` and drops `y` onto the unit circle.
pub fn retract_h2(z: Complex64) -> Result<Complex64> {
    if !in_fundamental_domain(z) {
        return Err(Error::ReduceFirst);
    }
    let x = z.re.clamp(-0.5, 0.5);
    let t_star = z.im / (1.0 - x * x).sqrt();
    if t_star <= 1.0 {
        return Ok(z);
    }
    Ok(Complex64::new(z.re, z.im / t_star))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scaled_norm_identity_at_t1() {
        let l = Lattice::diagonal(&[0.5, 2.0]).unwrap();
        let mv = minimal_vectors(&l).unwrap();
        for v in [[1, 0], [0, 1], [3, -2]] {
            let a = scaled_norm(&l, &mv, &v, 1.0).unwrap();
            assert!((a - l.norm_sq(&v)).abs() < 1e-12);
        }
    }

    #[test]
    fn scaled_norm_closed_forms() {
        let l = Lattice::diagonal(&[0.5, 2.0]).unwrap();
        let mv = minimal_vectors(&l).unwrap();
        let s = scaled_norm(&l, &mv, &[0, 1], 4.0).unwrap();
        assert!((s - 1.0).abs() < 1e-12);
        assert!((s - 4.0 * mv.m).abs() < 1e-12);

        let l3 = Lattice::diagonal(&[0.8, 0.8, 1.0 / 0.64]).unwrap();
        let mv3 = minimal_vectors(&l3).unwrap();
        assert_eq!(mv3.rank, 2);
        let t = 0.8f64.powi(-2);
        let s3 = scaled_norm(&l3, &mv3, &[0, 0, 1], t).unwrap();
        assert!((s3 - t * mv3.m).abs() < 1e-12);
    }

    #[test]
    fn scaled_norm_rejects_well_rounded() {
        let l = Lattice::identity(2);
        let mv = minimal_vectors(&l).unwrap();
        assert_eq!(scaled_norm(&l, &mv, &[1, 1], 2.0), Err(Error::AlreadyWellRounded));
    }

    #[test]
    fn catch_time_diagonal() {
        let l = Lattice::diagonal(&[0.5, 2.0]).unwrap();
        let ev = catch_time(&l, &minimal_vectors(&l).unwrap()).unwrap();
        assert!((ev.t_star - 4.0).abs() < 1e-12);
        assert_eq!(ev.new_vectors, vec![vec![0, 1]]);
        assert_eq!((ev.rank_before, ev.rank_after), (1, 2));

        let l3 = Lattice::diagonal(&[0.8, 0.8, 1.0 / 0.64]).unwrap();
        let ev3 = catch_time(&l3, &minimal_vectors(&l3).unwrap()).unwrap();
        assert!((ev3.t_star - 1.5625).abs() < 1e-12);
        assert_eq!(ev3.new_vectors, vec![vec![0, 0, 1]]);
    }

    #[test]
    fn catch_time_on_z2_fails() {
        let l = Lattice::identity(2);
        let mv = minimal_vectors(&l).unwrap();
        assert_eq!(catch_time(&l, &mv), Err(Error::AlreadyWellRounded));
    }

    #[test]
    fn deform_step_examples() {
        let (out, _) = deform_step(&Lattice::diagonal(&[0.5, 2.0]).unwrap()).unwrap();
        assert!((out.basis() - DMatrix::identity(2, 2)).abs().max() < 1e-12);
        let (out3, _) = deform_step(&Lattice::diagonal(&[0.8, 0.8, 1.0 / 0.64]).unwrap()).unwrap();
        assert!((out3.basis() - DMatrix::identity(3, 3)).abs().max() < 1e-12);
        let s = (2.0 / 3f64.sqrt()).sqrt();
        let hex = Lattice::from_rows(&[vec![s, 0.5 * s], vec![0.0, 0.5 * 3f64.sqrt() * s]]).unwrap();
        assert_eq!(deform_step(&hex).unwrap_err(), Error::AlreadyWellRounded);
    }

    #[test]
    fn retract_identity_has_no_events() {
        let t = retract(&Lattice::identity(4)).unwrap();
        assert!(t.events.is_empty());
        assert_eq!(t.states.len(), 1);
    }

    #[test]
    fn retract_mixed_diagonal() {
        let l = Lattice::diagonal(&[0.9, 0.8, 1.0 / 0.72]).unwrap();
        let t = retract(&l).unwrap();
        assert!(!t.events.is_empty() && t.events.len() <= 2);
        assert!(well_rounded_checked(t.last()));
    }

    fn well_rounded_checked(l: &Lattice) -> bool {
        crate::lattice::well_rounded(l).unwrap()
    }

    #[test]
    fn h2_embedding() {
        let l = h2_point_to_lattice(Complex64::new(0.0, 1.0)).unwrap();
        assert!((l.basis() - DMatrix::identity(2, 2)).abs().max() < 1e-15);
        let l2 = h2_point_to_lattice(Complex64::new(0.0, 2.0)).unwrap();
        let want = DMatrix::from_row_slice(2, 2, &[0.5f64.sqrt(), 0.0, 0.0, 2f64.sqrt()]);
        assert!((l2.basis() - want).abs().max() < 1e-15);
        let z = Complex64::new(0.3, 1.7);
        let back = lattice_to_h2_point(&h2_point_to_lattice(z).unwrap()).unwrap();
        assert!((back - z).norm() < 1e-12);
        assert!(h2_point_to_lattice(Complex64::new(0.3, 0.0)).is_err());
    }

    #[test]
    fn h2_retraction_examples() {
        let i = Complex64::new(0.0, 1.0);
        assert_eq!(retract_h2(i).unwrap(), i);
        let w = retract_h2(Complex64::new(0.1, 1.2)).unwrap();
        assert!((w - Complex64::new(0.1, 0.99f64.sqrt())).norm() < 1e-15);
        assert!((w.im - 0.994987).abs() < 1e-6);
        assert!((retract_h2(Complex64::new(0.0, 2.0)).unwrap() - i).norm() < 1e-15);
        assert_eq!(retract_h2(Complex64::new(0.7, 2.0)), Err(Error::ReduceFirst));
        assert_eq!(retract_h2(Complex64::new(0.1, 0.5)), Err(Error::ReduceFirst));
    }

    #[test]
    fn fundamental_domain_reduction() {
        let z = Complex64::new(3.3, 0.05);
        let (w, g) = reduce_to_fundamental_domain(z).unwrap();
        assert!(in_fundamental_domain(w));
        let [[a, b], [c, d]] = g;
        assert_eq!(a * d - b * c, 1);
        let img = (z * a as f64 + b as f64) / (z * c as f64 + d as f64);
        assert!((img - w).norm() < 1e-9);
    }
}
