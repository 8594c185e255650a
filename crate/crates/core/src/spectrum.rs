//! Closed-geodesic length spectra, systole sets and intersection tests.
//!
//! Everything is read off the Dirichlet domain `P` of the group centred at
//! `i` (see [`crate::dirichlet`]). Every closed geodesic has a lift meeting
//! `P`, and the primitive element translating along such a lift moves some
//! point of `P` by its length, so its tile lies within `ℓ + radius(P)` of `i`.
//! Collecting the hyperbolic tile elements whose axes meet `P` and grouping
//! them by the lifts of their closed geodesic gives each class exactly once.
//! Two closed geodesics meet on the surface exactly when two of their lifts
//! through `P` cross.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::dirichlet::{base_point, DirichletDomain, LIFT_TOL};
use crate::error::{Error, Result};
use crate::exec::{self, Execution};
use crate::hyperbolic::{cuff_words, FuchsianGroup, GeodesicAxis, Isometry};
use crate::word::{Letter, Word};

/// Collar constant `ε₀ = 2·arcsinh(1)`: closed geodesics no longer than this
/// are pairwise disjoint.
pub const EPSILON_0: f64 = 1.762_747_174_039_086;
/// Equal-length tolerance shared by systole grouping and the flow constraint.
pub const DEFAULT_TOL_SYS: f64 = 1e-8;
pub const DEFAULT_WORD_CAP: usize = 16;
/// Relative tolerance under which two classes count as equally long.
const MERGE_TOL: f64 = 1e-9;
/// Word length of the dictionary of short names tried for every class.
const DICTIONARY_WORD_LENGTH: usize = 4;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SpectrumParams {
    /// Hard cap on the word-length bound `W(cutoff)`.
    pub word_cap: usize,
    pub exec: Execution,
}

impl Default for SpectrumParams {
    fn default() -> Self {
        SpectrumParams { word_cap: DEFAULT_WORD_CAP, exec: Execution::Parallel }
    }
}

/// A primitive closed geodesic. `matrix` is the value of `word`, and `axis`
/// its axis.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeodesicClass {
    pub word: Word,
    pub length: f64,
    pub axis: GeodesicAxis,
    pub matrix: Isometry,
}

impl GeodesicClass {
    pub fn from_word(group: &FuchsianGroup, word: &Word) -> Result<GeodesicClass> {
        let matrix = group.eval(word);
        Ok(GeodesicClass { word: word.clone(), length: matrix.translation_length()?, axis: matrix.axis()?, matrix })
    }
}

fn ratio_bound(group: &FuchsianGroup) -> f64 {
    let mut best = f64::INFINITY;
    for &l in &Letter::ALL {
        let g = group.letter(l);
        if let Ok(t) = g.translation_length() {
            best = best.min(t);
        }
        for &k in &Letter::ALL {
            if k == l.inverse() {
                continue;
            }
            if let Ok(t) = (g * group.letter(k)).translation_length() {
                best = best.min(t / 2.0);
            }
        }
    }
    best
}

/// Heuristic word-length bound `W(cutoff) = ⌈cutoff / λ_min⌉ + 4`.
pub fn word_bound(group: &FuchsianGroup, cutoff: f64) -> usize {
    (cutoff / ratio_bound(group)).ceil() as usize + 4
}

/// All cyclically reduced, primitive canonical words up to `max_word_length`,
/// one per free-group conjugacy class, sorted by geodesic length.
pub fn enumerate_classes(group: &FuchsianGroup, max_word_length: usize) -> Vec<GeodesicClass> {
    enumerate_classes_with(group, max_word_length, Execution::Parallel)
}

pub fn enumerate_classes_with(group: &FuchsianGroup, max_word_length: usize, exec: Execution) -> Vec<GeodesicClass> {
    let firsts: Vec<Letter> = Letter::ALL.to_vec();
    let per_first = exec::map(exec, &firsts, |&l| {
        let mut out = Vec::new();
        let mut stack = vec![Word::new(vec![l])];
        while let Some(w) = stack.pop() {
            if w.is_cyclically_reduced() && w.is_primitive() && w.canonical() == w {
                if let Ok(c) = GeodesicClass::from_word(group, &w) {
                    out.push(c);
                }
            }
            if w.len() < max_word_length {
                let last = *w.letters().last().expect("nonempty");
                for &k in &Letter::ALL {
                    if k != last.inverse() {
                        let mut nw = w.clone();
                        nw.push(k);
                        stack.push(nw);
                    }
                }
            }
        }
        out
    });
    let mut all: Vec<GeodesicClass> = per_first.into_iter().flatten().collect();
    sort_classes(&mut all);
    all
}

/// Sorts by length; runs of equal length (to `MERGE_TOL`) are ordered by word.
fn sort_classes(v: &mut [GeodesicClass]) {
    v.sort_by(|a, b| a.length.total_cmp(&b.length).then_with(|| a.word.cmp(&b.word)));
    let mut start = 0;
    while start < v.len() {
        let base = v[start].length;
        let mut end = start + 1;
        while end < v.len() && v[end].length - base <= MERGE_TOL * base {
            end += 1;
        }
        v[start..end].sort_by(|a, b| a.word.cmp(&b.word));
        start = end;
    }
}

fn word_rank(w: &Word) -> (usize, &Word) {
    (w.len(), w)
}

fn same_length(a: f64, b: f64) -> bool {
    (a - b).abs() <= MERGE_TOL * a.max(b)
}

/// How two closed geodesics sit on the surface.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Relation {
    Same,
    Crossing,
    Disjoint,
}

fn relation_of_lifts(l1: &[GeodesicAxis], l2: &[GeodesicAxis]) -> Relation {
    if l1.iter().any(|a| l2.iter().any(|b| a.same_geodesic(b, LIFT_TOL))) {
        return Relation::Same;
    }
    if l1.iter().any(|a| l2.iter().any(|b| a.crosses(b))) {
        Relation::Crossing
    } else {
        Relation::Disjoint
    }
}

/// A group together with its Dirichlet domain, for repeated queries.
#[derive(Clone, Debug)]
pub struct SpectrumEngine {
    group: FuchsianGroup,
    domain: DirichletDomain,
    dictionary: Vec<GeodesicClass>,
    params: SpectrumParams,
}

impl SpectrumEngine {
    pub fn new(group: &FuchsianGroup, params: &SpectrumParams) -> Result<SpectrumEngine> {
        SpectrumEngine::with_hint(group, &[], params)
    }

    /// Like [`SpectrumEngine::new`], trying the face words `hint` of a nearby
    /// surface's domain first.
    pub fn with_hint(group: &FuchsianGroup, hint: &[Word], params: &SpectrumParams) -> Result<SpectrumEngine> {
        let domain = DirichletDomain::build(group, hint, params.exec)?;
        let dictionary = enumerate_classes_with(group, DICTIONARY_WORD_LENGTH, params.exec);
        Ok(SpectrumEngine { group: group.clone(), domain, dictionary, params: *params })
    }

    pub fn group(&self) -> &FuchsianGroup {
        &self.group
    }

    pub fn domain(&self) -> &DirichletDomain {
        &self.domain
    }

    /// Lifts of the class's closed geodesic meeting the domain.
    pub fn lifts(&self, c: &GeodesicClass) -> Vec<GeodesicAxis> {
        self.domain.lifts(&c.axis, c.length)
    }

    fn lift_through_domain(&self, axis: &GeodesicAxis) -> GeodesicAxis {
        let (h, _, _) = self.domain.reduce(axis.project(base_point()));
        axis.image(&h.inverse())
    }

    /// Every class of length at most `cutoff`, without the word-length check
    /// of [`SpectrumEngine::length_spectrum`].
    pub fn classes_below(&self, cutoff: f64) -> Vec<GeodesicClass> {
        let exec = self.params.exec;
        let limit = cutoff * (1.0 + 1e-12);
        let tiles = self.domain.tiles_within(cutoff + self.domain.radius, exec);
        let found = exec::map(exec, &tiles, |e| {
            let len = e.g.translation_length().ok().filter(|l| *l <= limit)?;
            let axis = e.g.axis().ok()?;
            self.domain.meets(&axis).then(|| (len, axis, e.word.canonical()))
        });
        let mut cands: Vec<(f64, GeodesicAxis, Word)> = found.into_iter().flatten().collect();
        cands.sort_by(|a, b| a.0.total_cmp(&b.0).then_with(|| word_rank(&a.2).cmp(&word_rank(&b.2))));
        // one entry per axis; the shortest element on it is primitive
        let mut axes: Vec<(f64, GeodesicAxis, Word)> = Vec::new();
        for c in cands {
            if !axes.iter().any(|a| a.1.same_geodesic(&c.1, LIFT_TOL)) {
                axes.push(c);
            }
        }
        let mut clusters: Vec<(f64, Vec<GeodesicAxis>, Vec<Word>)> = Vec::new();
        let mut assigned = vec![false; axes.len()];
        for i in 0..axes.len() {
            if assigned[i] {
                continue;
            }
            let (len, axis, _) = &axes[i];
            let lifts = self.domain.lifts(axis, *len);
            let mut words = Vec::new();
            for j in i..axes.len() {
                if !same_length(axes[j].0, *len) {
                    break;
                }
                if !assigned[j] && (j == i || lifts.iter().any(|l| l.same_geodesic(&axes[j].1, LIFT_TOL))) {
                    assigned[j] = true;
                    words.push(axes[j].2.clone());
                }
            }
            clusters.push((*len, lifts, words));
        }
        for d in self.dictionary.iter().take_while(|d| d.length <= limit) {
            let lift = self.lift_through_domain(&d.axis);
            if let Some(c) = clusters
                .iter_mut()
                .find(|c| same_length(c.0, d.length) && c.1.iter().any(|l| l.same_geodesic(&lift, LIFT_TOL)))
            {
                c.2.push(d.word.clone());
            }
        }
        let mut classes: Vec<GeodesicClass> = clusters
            .into_iter()
            .filter_map(|(_, _, words)| {
                let w = words.into_iter().min_by(|a, b| word_rank(a).cmp(&word_rank(b)))?;
                GeodesicClass::from_word(&self.group, &w).ok()
            })
            .collect();
        sort_classes(&mut classes);
        classes
    }

    /// Classes of length at most `cutoff`, sorted by length with ties broken by word.
    pub fn length_spectrum(&self, cutoff: f64) -> Result<Vec<GeodesicClass>> {
        check_cutoff(&self.group, cutoff, &self.params)?;
        Ok(self.classes_below(cutoff))
    }

    pub fn relative_position(&self, c1: &GeodesicClass, c2: &GeodesicClass) -> Relation {
        relation_of_lifts(&self.lifts(c1), &self.lifts(c2))
    }

    /// Whether the closed geodesics of two distinct classes meet on the
    /// surface. Pairs no longer than `ε₀` are answered by the collar theorem.
    pub fn intersects(&self, g1: &GeodesicClass, g2: &GeodesicClass) -> Result<bool> {
        if g1.word.canonical() == g2.word.canonical() {
            return Err(Error::SameClass);
        }
        if g1.length <= EPSILON_0 && g2.length <= EPSILON_0 {
            return Ok(false);
        }
        match self.relative_position(g1, g2) {
            Relation::Same => Err(Error::SameClass),
            Relation::Crossing => Ok(true),
            Relation::Disjoint => Ok(false),
        }
    }

    pub fn systole_set(&self, tol_sys: f64) -> Result<SystoleSet> {
        if !(tol_sys > 0.0) {
            return Err(Error::InvalidParameter(format!("tol_sys {tol_sys} must be positive")));
        }
        let mut searched = systole_upper_bound(&self.group) * 1.5;
        let mut spec = self.classes_below(searched);
        let systole = spec.first().ok_or_else(|| Error::InvalidParameter("no closed geodesic found".into()))?.length;
        let mut cutoff = systole * 1.5;
        loop {
            check_cutoff(&self.group, cutoff, &self.params)?;
            if cutoff > searched {
                searched = cutoff;
                spec = self.classes_below(searched);
            }
            if spec.iter().any(|c| c.length > systole + tol_sys && c.length <= cutoff) {
                break;
            }
            cutoff *= 1.5;
        }
        let (classes, rest): (Vec<_>, Vec<_>) = spec.into_iter().partition(|c| c.length <= systole + tol_sys);
        let next_length = rest[0].length;
        let lifts: Vec<Vec<GeodesicAxis>> = classes.iter().map(|c| self.lifts(c)).collect();
        let mut intersection_pairs = Vec::new();
        for i in 0..classes.len() {
            for j in (i + 1)..classes.len() {
                if classes[i].length <= EPSILON_0 && classes[j].length <= EPSILON_0 {
                    continue;
                }
                match relation_of_lifts(&lifts[i], &lifts[j]) {
                    Relation::Same => return Err(Error::SameClass),
                    Relation::Crossing => intersection_pairs.push((i, j)),
                    Relation::Disjoint => {}
                }
            }
        }
        Ok(SystoleSet {
            systole,
            near_degenerate: next_length - systole < 10.0 * tol_sys,
            next_length,
            classes,
            intersection_pairs,
        })
    }
}

fn check_cutoff(group: &FuchsianGroup, cutoff: f64, params: &SpectrumParams) -> Result<()> {
    if !(cutoff > 0.0) {
        return Err(Error::InvalidParameter(format!("cutoff {cutoff} must be positive")));
    }
    let depth = word_bound(group, cutoff);
    if depth > params.word_cap {
        return Err(Error::CutoffTooDeep { needed: depth, cap: params.word_cap });
    }
    Ok(())
}

/// Classes of length at most `cutoff`, sorted by length with ties broken by word.
pub fn length_spectrum(group: &FuchsianGroup, cutoff: f64, params: &SpectrumParams) -> Result<Vec<GeodesicClass>> {
    check_cutoff(group, cutoff, params)?;
    Ok(SpectrumEngine::new(group, params)?.classes_below(cutoff))
}

pub fn relative_position(
    group: &FuchsianGroup,
    c1: &GeodesicClass,
    c2: &GeodesicClass,
    params: &SpectrumParams,
) -> Result<Relation> {
    Ok(SpectrumEngine::new(group, params)?.relative_position(c1, c2))
}

/// Whether the closed geodesics of two distinct classes meet on the surface.
/// Pairs no longer than `ε₀` are answered by the collar theorem.
pub fn intersects(group: &FuchsianGroup, g1: &GeodesicClass, g2: &GeodesicClass, params: &SpectrumParams) -> Result<bool> {
    if g1.word.canonical() == g2.word.canonical() {
        return Err(Error::SameClass);
    }
    if g1.length <= EPSILON_0 && g2.length <= EPSILON_0 {
        return Ok(false);
    }
    SpectrumEngine::new(group, params)?.intersects(g1, g2)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SystoleSet {
    pub classes: Vec<GeodesicClass>,
    pub systole: f64,
    pub next_length: f64,
    pub intersection_pairs: Vec<(usize, usize)>,
    /// Set when `next_length - systole < 10·tol_sys`: the grouping is then a
    /// numerical judgement call.
    pub near_degenerate: bool,
}

impl SystoleSet {
    pub fn k(&self) -> usize {
        self.classes.len()
    }

    pub fn words(&self) -> Vec<Word> {
        self.classes.iter().map(|c| c.word.clone()).collect()
    }

    /// `max ℓ - min ℓ` over the set.
    pub fn spread(&self) -> f64 {
        let (lo, hi) = self.classes.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), c| {
            (lo.min(c.length), hi.max(c.length))
        });
        hi - lo
    }
}

/// Cheap upper bound on the systole from generators, two-letter products and cuffs.
fn systole_upper_bound(group: &FuchsianGroup) -> f64 {
    let mut best = ratio_bound(group) * 2.0;
    for l in &Letter::ALL {
        if let Ok(t) = group.letter(*l).translation_length() {
            best = best.min(t);
        }
    }
    for w in cuff_words() {
        if let Ok(t) = group.eval(&w).translation_length() {
            best = best.min(t);
        }
    }
    best
}

pub fn systole_set(group: &FuchsianGroup, tol_sys: f64, params: &SpectrumParams) -> Result<SystoleSet> {
    SpectrumEngine::new(group, params)?.systole_set(tol_sys)
}

/// CSV export: `word,length,trace`.
pub fn write_spectrum_csv<W: Write>(out: W, classes: &[GeodesicClass]) -> std::io::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["word", "length", "trace"])?;
    for c in classes {
        w.write_record([c.word.to_string(), format!("{:.12}", c.length), format!("{:.12}", c.matrix.trace())])?;
    }
    w.flush()
}
