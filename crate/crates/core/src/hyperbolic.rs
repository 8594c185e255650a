//! Isometries of the upper half-plane, geodesic axes, pants groups and the
//! Fenchel–Nielsen gluing for genus 2.
//!
//! # Gluing
//!
//! The surface is two pants `P₁, P₂` glued along their three cuffs `c₁, c₂, c₃`.
//! `P₁` is uniformized by `⟨A, B⟩` from [`pants_generators`], with boundary loops
//! `A`, `B`, `C = (AB)⁻¹`, each having the pants on its right. `P₂` is the image
//! `g₁P₁` under `g₁ = R(p₁)·T_{A⁻¹}(τ₁)`, where `R(p)` is the half-turn about `p`
//! and `T_γ(τ)` translates by `τ` along `γ`; `p₁` is the foot on `c₁` of the seam
//! to `c₂`, so `g₁Ag₁⁻¹ = A⁻¹` and `P₂` sits across `c₁`. The remaining two
//! cuffs are closed up by
//!
//! ```text
//! s = g₁·R(p₂)·T_{B⁻¹}(τ₂)      s B⁻¹ s⁻¹ = g₁ B g₁⁻¹
//! u = g₁·R(p₃)·T_{C⁻¹}(τ₃)      u C⁻¹ u⁻¹ = g₁ C g₁⁻¹
//! ```
//!
//! with `p₂, p₃` the seam feet on `c₂, c₃`. At zero twist the seams of the two
//! pants line up. The boundary relation of `P₂` then reads
//! `A⁻¹ · sB⁻¹s⁻¹ · uC⁻¹u⁻¹ = 1`, which is a cyclic conjugate of
//! `[a₁,b₁][a₂,b₂] = 1` for
//!
//! ```text
//! a₁ = s,  b₁ = B⁻¹,  a₂ = B⁻¹u,  b₂ = AB.
//! ```
//!
//! The cuffs are the words `c₁ = b₂b₁`, `c₂ = b₁`, `c₃ = b₂`. A full twist
//! `τᵢ → τᵢ + ℓᵢ` multiplies `g₁`, `s` or `u` by a group element, so it
//! changes the generators but not the group.

use std::ops::Mul;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::word::Word;

/// `|trace| > 2 + HYPERBOLIC_TOL` classifies an isometry as hyperbolic.
pub const HYPERBOLIC_TOL: f64 = 1e-10;
/// Tolerance on the genus-2 relation.
pub const RELATION_TOL: f64 = 1e-8;

/// Element of PSL(2, ℝ), stored as a determinant-one matrix `[[a, b], [c, d]]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Isometry {
    pub m: [[f64; 2]; 2],
}

impl Isometry {
    pub const IDENTITY: Isometry = Isometry { m: [[1.0, 0.0], [0.0, 1.0]] };

    /// Checks `det = 1` within 1e-12.
    pub fn new(a: f64, b: f64, c: f64, d: f64) -> Result<Isometry> {
        let det = a * d - b * c;
        if !((det - 1.0).abs() <= 1e-12) {
            return Err(Error::InvalidParameter(format!("isometry determinant {det} != 1")));
        }
        Ok(Isometry { m: [[a, b], [c, d]] })
    }

    /// Rescales any positive-determinant matrix to determinant one.
    pub fn normalized(a: f64, b: f64, c: f64, d: f64) -> Isometry {
        let det = a * d - b * c;
        debug_assert!(det > 0.0);
        let s = det.sqrt().recip();
        Isometry { m: [[a * s, b * s], [c * s, d * s]] }
    }

    pub fn diag(lambda: f64) -> Isometry {
        Isometry { m: [[lambda, 0.0], [0.0, lambda.recip()]] }
    }

    /// Half-turn (rotation by π) about `p`.
    pub fn half_turn(p: Complex64) -> Isometry {
        let s = p.im.sqrt();
        let g = Isometry { m: [[s, p.re / s], [0.0, 1.0 / s]] };
        let j = Isometry { m: [[0.0, -1.0], [1.0, 0.0]] };
        g * j * g.inverse()
    }

    pub fn trace(&self) -> f64 {
        self.m[0][0] + self.m[1][1]
    }

    pub fn det(&self) -> f64 {
        self.m[0][0] * self.m[1][1] - self.m[0][1] * self.m[1][0]
    }

    pub fn inverse(&self) -> Isometry {
        let [[a, b], [c, d]] = self.m;
        Isometry { m: [[d, -b], [-c, a]] }
    }

    pub fn is_hyperbolic(&self) -> bool {
        self.trace().abs() > 2.0 + HYPERBOLIC_TOL
    }

    /// Distance to `±I` in the max-entry norm.
    pub fn distance_to_identity(&self) -> f64 {
        let [[a, b], [c, d]] = self.m;
        let plus = (a - 1.0).abs().max(b.abs()).max(c.abs()).max((d - 1.0).abs());
        let minus = (a + 1.0).abs().max(b.abs()).max(c.abs()).max((d + 1.0).abs());
        plus.min(minus)
    }

    pub fn apply(&self, z: Complex64) -> Complex64 {
        let [[a, b], [c, d]] = self.m;
        (z * a + b) / (z * c + d)
    }

    pub fn apply_boundary(&self, x: BoundaryPoint) -> BoundaryPoint {
        let [[a, b], [c, d]] = self.m;
        match x {
            BoundaryPoint::Infinity => {
                if c == 0.0 {
                    BoundaryPoint::Infinity
                } else {
                    BoundaryPoint::Finite(a / c)
                }
            }
            BoundaryPoint::Finite(x) => {
                let den = c * x + d;
                if den == 0.0 {
                    BoundaryPoint::Infinity
                } else {
                    BoundaryPoint::Finite((a * x + b) / den)
                }
            }
        }
    }

    /// `2·arccosh(|tr|/2)`.
    pub fn translation_length(&self) -> Result<f64> {
        let t = self.trace().abs();
        if t <= 2.0 + HYPERBOLIC_TOL {
            return Err(Error::NotHyperbolic(t));
        }
        Ok(2.0 * (t / 2.0).acosh())
    }

    /// The invariant geodesic, attracting endpoint first.
    pub fn axis(&self) -> Result<GeodesicAxis> {
        let t = self.trace();
        if t.abs() <= 2.0 + HYPERBOLIC_TOL {
            return Err(Error::NotHyperbolic(t.abs()));
        }
        let [[a, b], [c, d]] = self.m;
        // fixed points: c x² + (d - a) x - b = 0
        let bq = d - a;
        let disc = (t * t - 4.0).sqrt();
        let sgn = if bq >= 0.0 { 1.0 } else { -1.0 };
        let q = -0.5 * (bq + sgn * disc);
        let r1 = if c == 0.0 { BoundaryPoint::Infinity } else { BoundaryPoint::Finite(q / c) };
        let r2 = BoundaryPoint::Finite(-b / q);
        let derivative_small = |x: BoundaryPoint| match x {
            BoundaryPoint::Infinity => a.abs() > d.abs(),
            BoundaryPoint::Finite(x) => (c * x + d).abs() > 1.0,
        };
        let (att, rep) = if derivative_small(r1) { (r1, r2) } else { (r2, r1) };
        Ok(GeodesicAxis { attracting: att, repelling: rep })
    }
}

impl Mul for Isometry {
    type Output = Isometry;
    fn mul(self, o: Isometry) -> Isometry {
        let [[a, b], [c, d]] = self.m;
        let [[e, f], [g, h]] = o.m;
        Isometry { m: [[a * e + b * g, a * f + b * h], [c * e + d * g, c * f + d * h]] }
    }
}

/// Point of ∂ℍ² = ℝ ∪ {∞}.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum BoundaryPoint {
    Finite(f64),
    Infinity,
}

impl BoundaryPoint {
    /// Angle on the unit circle under the Cayley map `z ↦ (z - i)/(z + i)`;
    /// `∞` goes to angle 0.
    pub fn disk_angle(self) -> f64 {
        match self {
            BoundaryPoint::Infinity => 0.0,
            BoundaryPoint::Finite(x) => {
                let w = Complex64::new(x, -1.0) / Complex64::new(x, 1.0);
                w.arg()
            }
        }
    }
}

fn angle_gap(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(std::f64::consts::TAU);
    d.min(std::f64::consts::TAU - d)
}

/// Oriented geodesic, from `repelling` to `attracting`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeodesicAxis {
    pub attracting: BoundaryPoint,
    pub repelling: BoundaryPoint,
}

impl GeodesicAxis {
    pub fn image(&self, g: &Isometry) -> GeodesicAxis {
        GeodesicAxis { attracting: g.apply_boundary(self.attracting), repelling: g.apply_boundary(self.repelling) }
    }

    /// Transversal crossing: the endpoints of one axis separate those of the other.
    pub fn crosses(&self, other: &GeodesicAxis) -> bool {
        let tau = std::f64::consts::TAU;
        let a = self.repelling.disk_angle();
        let span = (self.attracting.disk_angle() - a).rem_euclid(tau);
        let inside = |x: BoundaryPoint| {
            let r = (x.disk_angle() - a).rem_euclid(tau);
            r > 0.0 && r < span
        };
        inside(other.attracting) != inside(other.repelling)
    }

    /// Same unoriented geodesic, endpoints compared as disk angles.
    pub fn same_geodesic(&self, other: &GeodesicAxis, tol: f64) -> bool {
        let (a1, r1) = (self.attracting.disk_angle(), self.repelling.disk_angle());
        let (a2, r2) = (other.attracting.disk_angle(), other.repelling.disk_angle());
        (angle_gap(a1, a2) < tol && angle_gap(r1, r2) < tol) || (angle_gap(a1, r2) < tol && angle_gap(r1, a2) < tol)
    }

    /// Orientation-preserving isometry taking the upward imaginary axis onto
    /// this axis (0 to the repelling end, ∞ to the attracting end).
    pub fn frame(&self) -> Isometry {
        use BoundaryPoint::*;
        match (self.repelling, self.attracting) {
            (Finite(r), Infinity) => Isometry { m: [[1.0, r], [0.0, 1.0]] },
            (Infinity, Finite(a)) => Isometry { m: [[a, -1.0], [1.0, 0.0]] },
            (Finite(r), Finite(a)) => {
                if a > r {
                    Isometry::normalized(a, r, 1.0, 1.0)
                } else {
                    Isometry::normalized(a, -r, 1.0, -1.0)
                }
            }
            (Infinity, Infinity) => unreachable!("axis endpoints are distinct"),
        }
    }

    /// Translation by `tau` along the axis, in its direction.
    pub fn translation(&self, tau: f64) -> Isometry {
        let f = self.frame();
        f * Isometry::diag((0.5 * tau).exp()) * f.inverse()
    }

    /// Nearest point of the axis to `z`.
    pub fn project(&self, z: Complex64) -> Complex64 {
        let f = self.frame();
        let w = f.inverse().apply(z);
        f.apply(Complex64::new(0.0, w.norm()))
    }

    /// Feet on `self` and on `other` of the common perpendicular of two
    /// disjoint, non-asymptotic geodesics.
    pub fn common_perpendicular(&self, other: &GeodesicAxis) -> (Complex64, Complex64) {
        let f = self.frame();
        let o = other.image(&f.inverse());
        let (u, v) = match (o.attracting, o.repelling) {
            (BoundaryPoint::Finite(u), BoundaryPoint::Finite(v)) => (u.min(v), u.max(v)),
            _ => unreachable!("disjoint from the imaginary axis, so both endpoints are finite"),
        };
        // the circle |z| = √(uv) is orthogonal to both geodesics
        let r = (u * v).sqrt();
        let x = 2.0 * u * v / (u + v);
        let y = (u * v - x * x).max(0.0).sqrt();
        (f.apply(Complex64::new(0.0, r)), f.apply(Complex64::new(x, y)))
    }
}

pub fn hyperbolic_distance(z: Complex64, w: Complex64) -> f64 {
    (1.0 + (z - w).norm_sqr() / (2.0 * z.im * w.im)).acosh()
}

/// Generators of a pair of pants with cuff lengths `L1, L2, L3`:
/// `tr X = 2cosh(L1/2)`, `tr Y = 2cosh(L2/2)`, `tr XY = -2cosh(L3/2)`.
///
/// `X` translates up the imaginary axis; `Y` translates along the geodesic at
/// distance `d` from it across the unit circle, where `d` is the hexagon side
/// `cosh d = (cosh(L1/2)cosh(L2/2) + cosh(L3/2)) / (sinh(L1/2)sinh(L2/2))`.
pub fn pants_generators(l1: f64, l2: f64, l3: f64) -> Result<(Isometry, Isometry)> {
    for l in [l1, l2, l3] {
        if !(l > 0.0 && l.is_finite()) {
            return Err(Error::InvalidParameter(format!("pants cuff length {l} must be positive")));
        }
    }
    let (h1, h2, h3) = (0.5 * l1, 0.5 * l2, 0.5 * l3);
    let cosh_d = (h1.cosh() * h2.cosh() + h3.cosh()) / (h1.sinh() * h2.sinh());
    let d = cosh_d.acosh();
    let t = Isometry { m: [[(0.5 * d).cosh(), (0.5 * d).sinh()], [(0.5 * d).sinh(), (0.5 * d).cosh()]] };
    let x = Isometry::diag(h1.exp());
    let y = t * Isometry::diag((-h2).exp()) * t.inverse();
    Ok((x, y))
}

/// Fenchel–Nielsen coordinates for the fixed genus-2 pants decomposition.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FnPoint {
    pub lengths: [f64; 3],
    pub twists: [f64; 3],
}

impl FnPoint {
    pub fn new(lengths: [f64; 3], twists: [f64; 3]) -> Result<FnPoint> {
        let p = FnPoint { lengths, twists };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(l) = self.lengths.iter().find(|l| !(**l > 0.0 && l.is_finite())) {
            return Err(Error::InvalidFnPoint(format!("length {l} must be positive")));
        }
        if self.twists.iter().any(|t| !t.is_finite()) {
            return Err(Error::InvalidFnPoint("twists must be finite".into()));
        }
        Ok(())
    }

    /// `(ℓ₁, ℓ₂, ℓ₃, τ₁, τ₂, τ₃)`.
    pub fn to_array(&self) -> [f64; 6] {
        let [l1, l2, l3] = self.lengths;
        let [t1, t2, t3] = self.twists;
        [l1, l2, l3, t1, t2, t3]
    }

    pub fn from_array(x: [f64; 6]) -> FnPoint {
        FnPoint { lengths: [x[0], x[1], x[2]], twists: [x[3], x[4], x[5]] }
    }

    /// Full Dehn twist about cuff `i`: `τᵢ → τᵢ + ℓᵢ`.
    pub fn dehn_twist(&self, i: usize) -> FnPoint {
        let mut p = *self;
        p.twists[i] += p.lengths[i];
        p
    }
}

/// Genus-2 surface group `⟨a₁, b₁, a₂, b₂ | [a₁,b₁][a₂,b₂]⟩`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FuchsianGroup {
    pub generators: [Isometry; 4],
    pub relation_residual: f64,
}

/// Cuff curves of the pants decomposition as words (`c₁ = b₂b₁`, `c₂ = b₁`, `c₃ = b₂`).
pub fn cuff_words() -> [Word; 3] {
    [Word::parse("db").unwrap(), Word::parse("b").unwrap(), Word::parse("d").unwrap()]
}

impl FuchsianGroup {
    pub fn from_generators(generators: [Isometry; 4]) -> Result<FuchsianGroup> {
        let relation_residual = crate::gluing::exact_residual(&generators);
        if !(relation_residual <= RELATION_TOL) {
            return Err(Error::GluingFailed(relation_residual));
        }
        if let Some(g) = generators.iter().find(|g| !g.is_hyperbolic()) {
            return Err(Error::NotHyperbolic(g.trace().abs()));
        }
        Ok(FuchsianGroup { generators, relation_residual })
    }

    pub fn letter(&self, l: crate::word::Letter) -> Isometry {
        let g = self.generators[l.generator()];
        if l.is_inverse() {
            g.inverse()
        } else {
            g
        }
    }

    pub fn eval(&self, w: &Word) -> Isometry {
        w.letters().iter().fold(Isometry::IDENTITY, |acc, &l| acc * self.letter(l))
    }

    /// Conjugates every generator by `h`.
    pub fn conjugated(&self, h: &Isometry) -> FuchsianGroup {
        let hi = h.inverse();
        let generators = self.generators.map(|g| *h * g * hi);
        FuchsianGroup {
            generators,
            relation_residual: crate::gluing::exact_residual(&generators),
        }
    }
}

/// Glues the two pants of `p` into a marked genus-2 surface group.
pub fn fn_to_group(p: &FnPoint) -> Result<FuchsianGroup> {
    FuchsianGroup::from_generators(fn_generators(p)?)
}

/// Generators `a₁, b₁, a₂, b₂` of the glued group, without the relation check.
pub fn fn_generators(p: &FnPoint) -> Result<[Isometry; 4]> {
    p.validate()?;
    Ok(crate::gluing::glue(p.lengths, p.twists))
}
