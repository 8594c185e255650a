//! Dirichlet fundamental domain of a surface group centred at `i`.
//!
//! Work happens in the hyperboloid model `⟨p, p⟩ = -1` with the form
//! `⟨a, b⟩ = -a₀b₀ + a₁b₁ + a₂b₂`, where bisectors are linear and the polygon
//! is clipped as a Euclidean polygon in Klein coordinates `(p₁/p₀, p₂/p₀)`.
//! A candidate polygon is accepted once it is compact, its face pairings come
//! in inverse pairs and its area equals `4π`: a polygon cut out by a subset of
//! the bisectors contains the true domain, so equal area means equality.

use std::collections::HashSet;
use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::exec::{self, Execution};
use crate::hyperbolic::{hyperbolic_distance, BoundaryPoint, FuchsianGroup, GeodesicAxis, Isometry};
use crate::word::{Letter, Word};

pub(crate) type Point = [f64; 3];

/// Gauss–Bonnet area of a closed genus-2 surface.
pub const SURFACE_AREA: f64 = 4.0 * PI;
const AREA_TOL: f64 = 1e-7;
const CLIP_TOL: f64 = 1e-12;
const CHORD_TOL: f64 = 1e-10;
const LOOSE_CHORD_TOL: f64 = 1e-8;
/// Disk-angle tolerance for identifying two lifts.
pub(crate) const LIFT_TOL: f64 = 1e-7;

pub(crate) fn mink(a: &Point, b: &Point) -> f64 {
    -a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

pub(crate) fn to_hyperboloid(z: Complex64) -> Point {
    let r = z.norm_sqr();
    let y = z.im;
    [(r + 1.0) / (2.0 * y), (r - 1.0) / (2.0 * y), z.re / y]
}

fn from_klein(k: [f64; 2]) -> Point {
    let s = (1.0 - k[0] * k[0] - k[1] * k[1]).sqrt().recip();
    [s, k[0] * s, k[1] * s]
}

fn boundary_klein(b: BoundaryPoint) -> [f64; 2] {
    match b {
        BoundaryPoint::Infinity => [1.0, 0.0],
        BoundaryPoint::Finite(x) => {
            let q = x * x + 1.0;
            [(x * x - 1.0) / q, 2.0 * x / q]
        }
    }
}

pub(crate) fn base_point() -> Complex64 {
    Complex64::new(0.0, 1.0)
}

/// Matrix key up to sign, for deduplicating group elements.
pub(crate) fn element_key(g: &Isometry) -> [i64; 4] {
    let [[a, b], [c, d]] = g.m;
    let mut e = [a, b, c, d];
    let t = a + d;
    let flip = if t.abs() > 1e-6 {
        t < 0.0
    } else {
        let big = e.iter().copied().fold(0.0f64, |m, x| if x.abs() > m.abs() { x } else { m });
        big < 0.0
    };
    if flip {
        e.iter_mut().for_each(|x| *x = -*x);
    }
    e.map(|x| (x * 1e6).round() as i64)
}

#[derive(Clone, Debug)]
pub(crate) struct Element {
    pub word: Word,
    pub g: Isometry,
}

/// Breadth-first search over words in the generators up to length `depth`,
/// expanding only elements accepted by `keep`.
pub(crate) fn word_ball<F>(group: &FuchsianGroup, depth: usize, keep: F, exec: Execution) -> Vec<Element>
where
    F: Fn(&Isometry) -> bool + Sync + Send,
{
    let letters: Vec<(Letter, Isometry)> = Letter::ALL.iter().map(|&l| (l, group.letter(l))).collect();
    let mut seen: HashSet<[i64; 4]> = HashSet::new();
    seen.insert(element_key(&Isometry::IDENTITY));
    let mut all = vec![Element { word: Word::default(), g: Isometry::IDENTITY }];
    let mut frontier = all.clone();
    for _ in 0..depth {
        let children = exec::map(exec, &frontier, |e| {
            let last = e.word.letters().last().copied();
            letters
                .iter()
                .filter(|(l, _)| Some(l.inverse()) != last)
                .filter_map(|(l, m)| {
                    let g = e.g * *m;
                    keep(&g).then(|| {
                        let mut w = e.word.clone();
                        w.push(*l);
                        Element { word: w, g }
                    })
                })
                .collect::<Vec<_>>()
        });
        let mut next = Vec::new();
        for c in children.into_iter().flatten() {
            if seen.insert(element_key(&c.g)) {
                next.push(c);
            }
        }
        if next.is_empty() {
            break;
        }
        all.extend(next.iter().cloned());
        frontier = next;
    }
    all
}

#[derive(Clone, Debug)]
pub struct Face {
    /// Unit spacelike normal; the domain is `⟨p, normal⟩ ≥ 0`.
    pub(crate) normal: Point,
    pub pairing: Isometry,
    pub word: Word,
}

#[derive(Clone, Debug)]
struct Edge {
    start: Point,
    end: Point,
    face: usize,
}

#[derive(Clone, Debug)]
pub struct DirichletDomain {
    faces: Vec<Face>,
    edges: Vec<Edge>,
    klein: Vec<[f64; 2]>,
    /// Largest distance from `i` to a point of the domain.
    pub radius: f64,
    pub area: f64,
}

/// Clips the convex Klein polygon (vertex, label of the edge leaving it) by
/// `-n₀ + n₁k₁ + n₂k₂ ≥ 0`.
fn clip(poly: &[([f64; 2], Option<usize>)], n: &Point, label: usize) -> Option<Vec<([f64; 2], Option<usize>)>> {
    let f = |k: &[f64; 2]| -n[0] + n[1] * k[0] + n[2] * k[1];
    let vals: Vec<f64> = poly.iter().map(|(k, _)| f(k)).collect();
    if vals.iter().all(|&v| v >= -CLIP_TOL) {
        return None;
    }
    let mut out: Vec<([f64; 2], Option<usize>)> = Vec::with_capacity(poly.len() + 1);
    let m = poly.len();
    for i in 0..m {
        let j = (i + 1) % m;
        let (a, la) = poly[i];
        let b = poly[j].0;
        let (fa, fb) = (vals[i], vals[j]);
        let cross = |t: f64| [a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])];
        if fa >= -CLIP_TOL {
            out.push((a, la));
            if fb < -CLIP_TOL && fa > CLIP_TOL {
                out.push((cross(fa / (fa - fb)), Some(label)));
            } else if fb < -CLIP_TOL {
                // a sits on the new line: the edge leaving it is the new face
                out.last_mut().expect("pushed").1 = Some(label);
            }
        } else if fb >= -CLIP_TOL {
            if fb > CLIP_TOL {
                out.push((cross(fa / (fa - fb)), la));
            }
        }
    }
    let mut dedup: Vec<([f64; 2], Option<usize>)> = Vec::with_capacity(out.len());
    for (k, l) in out {
        match dedup.last_mut() {
            Some(prev) if (prev.0[0] - k[0]).hypot(prev.0[1] - k[1]) < 1e-13 => prev.1 = l,
            _ => dedup.push((k, l)),
        }
    }
    while dedup.len() > 1 {
        let (f0, l) = (dedup[0].0, dedup.last().expect("nonempty").0);
        if (f0[0] - l[0]).hypot(f0[1] - l[1]) < 1e-13 {
            let lab = dedup.pop().expect("nonempty").1;
            dedup[0].1 = dedup[0].1.or(lab);
        } else {
            break;
        }
    }
    Some(dedup)
}

fn interior_angle(v: &Point, a: &Point, b: &Point) -> f64 {
    let tangent = |p: &Point| {
        let s = mink(p, v);
        [p[0] + s * v[0], p[1] + s * v[1], p[2] + s * v[2]]
    };
    let (ta, tb) = (tangent(a), tangent(b));
    let c = mink(&ta, &tb) / (mink(&ta, &ta) * mink(&tb, &tb)).sqrt();
    c.clamp(-1.0, 1.0).acos()
}

impl DirichletDomain {
    /// Domain cut out by the bisectors between `i` and `g·i` for the given
    /// elements; `None` unless the result is an exact fundamental domain.
    pub(crate) fn from_elements(elements: &[Element]) -> Option<DirichletDomain> {
        let x0 = base_point();
        let p = to_hyperboloid(x0);
        let mut cands: Vec<(f64, usize)> = elements
            .iter()
            .enumerate()
            .map(|(i, e)| (hyperbolic_distance(x0, e.g.apply(x0)), i))
            .filter(|(d, _)| *d > 1e-9)
            .collect();
        cands.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let mut poly: Vec<([f64; 2], Option<usize>)> =
            vec![([2.0, -2.0], None), ([2.0, 2.0], None), ([-2.0, 2.0], None), ([-2.0, -2.0], None)];
        let mut normals: Vec<Point> = Vec::with_capacity(cands.len());
        for (slot, &(_, i)) in cands.iter().enumerate() {
            let q = to_hyperboloid(elements[i].g.apply(x0));
            let n = [p[0] - q[0], p[1] - q[1], p[2] - q[2]];
            let s = mink(&n, &n).sqrt();
            let n = n.map(|x| x / s);
            normals.push(n);
            if let Some(next) = clip(&poly, &n, slot) {
                poly = next;
            }
            if poly.len() < 3 {
                return None;
            }
        }
        if poly.iter().any(|(k, l)| l.is_none() || k[0] * k[0] + k[1] * k[1] >= 1.0 - 1e-12) {
            return None;
        }
        let mut faces: Vec<Face> = Vec::new();
        let mut slot_to_face: Vec<Option<usize>> = vec![None; cands.len()];
        let verts: Vec<Point> = poly.iter().map(|(k, _)| from_klein(*k)).collect();
        let m = poly.len();
        let mut edges = Vec::with_capacity(m);
        for i in 0..m {
            let slot = poly[i].1.expect("checked");
            let fi = *slot_to_face[slot].get_or_insert_with(|| {
                let e = &elements[cands[slot].1];
                faces.push(Face { normal: normals[slot], pairing: e.g, word: e.word.clone() });
                faces.len() - 1
            });
            edges.push(Edge { start: verts[i], end: verts[(i + 1) % m], face: fi });
        }
        let angle_sum: f64 = (0..m).map(|i| interior_angle(&verts[i], &verts[(i + m - 1) % m], &verts[(i + 1) % m])).sum();
        let area = (m as f64 - 2.0) * PI - angle_sum;
        if (area - SURFACE_AREA).abs() > AREA_TOL * SURFACE_AREA {
            return None;
        }
        // where several bisectors meet in one vertex a face can degenerate to a
        // point; only faces with a proper edge need their partner
        let keys: HashSet<[i64; 4]> = faces.iter().map(|f| element_key(&f.pairing)).collect();
        let unpaired = edges.iter().any(|e| {
            (-mink(&e.start, &e.end)).max(1.0).acosh() > 1e-6
                && !keys.contains(&element_key(&faces[e.face].pairing.inverse()))
        });
        if unpaired {
            return None;
        }
        let radius = verts.iter().map(|v| v[0].max(1.0).acosh()).fold(0.0, f64::max);
        Some(DirichletDomain { faces, edges, klein: poly.into_iter().map(|(k, _)| k).collect(), radius, area })
    }

    /// Builds the domain from words of increasing length and displacement,
    /// trying `hint` words (for instance the face words of a nearby surface) first.
    pub fn build(group: &FuchsianGroup, hint: &[Word], exec: Execution) -> Result<DirichletDomain> {
        if !hint.is_empty() {
            let mut els: Vec<Element> = hint.iter().map(|w| Element { word: w.clone(), g: group.eval(w) }).collect();
            els.extend(hint.iter().map(|w| {
                let inv = w.inverse();
                Element { g: group.eval(&inv), word: inv }
            }));
            if let Some(d) = DirichletDomain::from_elements(&els) {
                return Ok(d);
            }
        }
        let x0 = base_point();
        let reach = Letter::ALL
            .iter()
            .map(|&l| hyperbolic_distance(x0, group.letter(l).apply(x0)))
            .fold(0.0, f64::max);
        let mut radius = reach + 1.0;
        let mut depth = 6;
        for _ in 0..12 {
            let r = radius;
            let els = word_ball(group, depth, |g| hyperbolic_distance(x0, g.apply(x0)) <= r, exec);
            if let Some(d) = DirichletDomain::from_elements(&els) {
                if 2.0 * d.radius <= radius {
                    return Ok(d);
                }
                radius = 2.0 * d.radius + 0.5;
            } else {
                radius *= 1.25;
            }
            depth += 2;
        }
        Err(Error::FundamentalDomain(format!("no exact Dirichlet domain within displacement {radius:.3}")))
    }

    pub fn faces(&self) -> &[Face] {
        &self.faces
    }

    pub fn face_words(&self) -> Vec<Word> {
        self.faces.iter().map(|f| f.word.clone()).collect()
    }

    pub fn sides(&self) -> usize {
        self.edges.len()
    }

    fn contains(&self, p: &Point) -> bool {
        self.faces.iter().all(|f| mink(p, &f.normal) >= -CLIP_TOL)
    }

    /// Hyperbolic distance from `z` to the domain.
    pub fn distance_from(&self, z: Complex64) -> f64 {
        let q = to_hyperboloid(z);
        if self.contains(&q) {
            return 0.0;
        }
        let mut best = f64::INFINITY;
        for e in &self.edges {
            let n = &self.faces[e.face].normal;
            let s = mink(&q, n);
            let f = [q[0] - s * n[0], q[1] - s * n[1], q[2] - s * n[2]];
            let c = mink(&e.start, &e.end);
            let (fu, fv) = (mink(&f, &e.start), mink(&f, &e.end));
            // f = αu + βv with Gram matrix [[-1, c], [c, -1]]
            let det = 1.0 - c * c;
            let alpha = (-fu - c * fv) / det;
            let beta = (-c * fu - fv) / det;
            let d = if alpha >= 0.0 && beta >= 0.0 {
                s.abs().asinh()
            } else {
                (-mink(&q, &e.start)).max(1.0).acosh().min((-mink(&q, &e.end)).max(1.0).acosh())
            };
            best = best.min(d);
        }
        best
    }

    /// Whether the geodesic meets the closed domain.
    pub fn meets(&self, axis: &GeodesicAxis) -> bool {
        self.meets_within(axis, CHORD_TOL)
    }

    fn meets_within(&self, axis: &GeodesicAxis, tol: f64) -> bool {
        let a = boundary_klein(axis.repelling);
        let b = boundary_klein(axis.attracting);
        let (dx, dy) = (b[0] - a[0], b[1] - a[1]);
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for k in &self.klein {
            let s = dx * (k[1] - a[1]) - dy * (k[0] - a[0]);
            lo = lo.min(s);
            hi = hi.max(s);
        }
        lo <= tol && hi >= -tol
    }

    /// Writes `z = h·w` with `w` in the domain; returns `h`, a word for it, and `w`.
    pub fn reduce(&self, z: Complex64) -> (Isometry, Word, Complex64) {
        let mut w = z;
        let mut h = Isometry::IDENTITY;
        let mut word = Word::default();
        for _ in 0..100_000 {
            let p = to_hyperboloid(w);
            let (worst, val) = self
                .faces
                .iter()
                .enumerate()
                .map(|(i, f)| (i, mink(&p, &f.normal)))
                .fold((0, f64::INFINITY), |a, b| if b.1 < a.1 { b } else { a });
            if val >= -CLIP_TOL {
                break;
            }
            let f = &self.faces[worst];
            w = f.pairing.inverse().apply(w);
            h = h * f.pairing;
            word = word.concat(&f.word);
        }
        (h, word, w)
    }

    /// Breadth-first walk over tiles `h·D` through face pairings, starting
    /// from `start` and visiting only tiles accepted by `keep`.
    pub(crate) fn flood<F>(&self, start: Element, keep: F, exec: Execution) -> Vec<Element>
    where
        F: Fn(&Isometry) -> bool + Sync + Send,
    {
        let mut seen: HashSet<[i64; 4]> = HashSet::new();
        seen.insert(element_key(&start.g));
        let mut all = vec![start.clone()];
        let mut frontier = vec![start];
        while !frontier.is_empty() {
            let children = exec::map(exec, &frontier, |e| {
                self.faces
                    .iter()
                    .filter_map(|f| {
                        let g = e.g * f.pairing;
                        keep(&g).then(|| Element { word: e.word.concat(&f.word), g })
                    })
                    .collect::<Vec<_>>()
            });
            let mut next = Vec::new();
            for c in children.into_iter().flatten() {
                if seen.insert(element_key(&c.g)) {
                    next.push(c);
                }
            }
            all.extend(next.iter().cloned());
            frontier = next;
        }
        all
    }

    /// Every group element `h` whose tile `h·D` comes within `r` of `i`; in
    /// particular every `h` with `d(i, h·i) ≤ r`.
    pub(crate) fn tiles_within(&self, r: f64, exec: Execution) -> Vec<Element> {
        let x0 = base_point();
        let start = Element { word: Word::default(), g: Isometry::IDENTITY };
        self.flood(start, |g| self.distance_from(g.inverse().apply(x0)) <= r + 1e-9, exec)
    }

    /// Lifts of the closed geodesic covered by `axis` (translation length
    /// `length`) that meet the domain, walking tile by tile along one period.
    /// Lifts passing within rounding distance of the domain are included too;
    /// they are genuine lifts, so an extra one never changes an answer.
    pub fn lifts(&self, axis: &GeodesicAxis, length: f64) -> Vec<GeodesicAxis> {
        let x0 = base_point();
        let frame_inv = axis.frame().inverse();
        let param = |z: Complex64| frame_inv.apply(z).norm().ln();
        let y0 = axis.project(x0);
        let t0 = param(y0);
        let (lo, hi) = (t0 - 2.0 * self.radius - 1.0, t0 + length + 2.0 * self.radius + 1.0);
        let (h0, w0, _) = self.reduce(y0);
        let tiles = self.flood(
            Element { word: w0, g: h0 },
            |g| {
                let t = param(g.apply(x0));
                t >= lo && t <= hi && self.meets_within(&axis.image(&g.inverse()), LOOSE_CHORD_TOL)
            },
            Execution::Sequential,
        );
        let mut out: Vec<GeodesicAxis> = Vec::new();
        for t in tiles {
            let l = axis.image(&t.g.inverse());
            if self.meets_within(&l, LOOSE_CHORD_TOL) && !out.iter().any(|o| o.same_geodesic(&l, LIFT_TOL)) {
                out.push(l);
            }
        }
        out
    }
}
