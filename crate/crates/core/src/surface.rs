//! The systole-equalizing flow on genus-2 Teichmüller space in Fenchel–Nielsen
//! coordinates, with stopping rules for the thick part, the spine `S` and the
//! stratum `S″`.
//!
//! Gradients are taken for the Euclidean metric of the coordinate chart
//! `(ℓ₁, ℓ₂, ℓ₃, τ₁, τ₂, τ₃)`. The flow moves at unit speed along the
//! minimum-norm direction that raises all current systoles at the same rate,
//! and projects back onto their equal-length locus after every step.

use std::io::Write;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hyperbolic::{fn_to_group, FnPoint, FuchsianGroup};
use crate::spectrum::{
    GeodesicClass, Relation, SpectrumEngine, SpectrumParams, SystoleSet, DEFAULT_TOL_SYS, EPSILON_0,
};
use crate::word::Word;

pub const DEFAULT_INITIAL_STEP: f64 = 1e-2;
pub const DEFAULT_MIN_STEP: f64 = 1e-10;
pub const DEFAULT_MAX_STEPS: usize = 20_000;
/// Smallest `λ_min / λ_max` of `GGᵀ` accepted by [`stratum_direction`].
pub const DEGENERACY_RATIO: f64 = 1e-10;
/// A thick-part flow stops with the systole in `[ε, ε + THICK_LANDING]`.
const THICK_LANDING: f64 = 1e-10;
const NEWTON_ITERS: usize = 25;
const BISECTION_ITERS: usize = 80;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SurfaceParams {
    pub tol_sys: f64,
    /// Collar constant; thick-part thresholds must not exceed it.
    pub eps0: f64,
    pub initial_step: f64,
    pub min_step: f64,
    pub max_steps: usize,
    pub spectrum: SpectrumParams,
}

impl Default for SurfaceParams {
    fn default() -> Self {
        SurfaceParams {
            tol_sys: DEFAULT_TOL_SYS,
            eps0: EPSILON_0,
            initial_step: DEFAULT_INITIAL_STEP,
            min_step: DEFAULT_MIN_STEP,
            max_steps: DEFAULT_MAX_STEPS,
            spectrum: SpectrumParams::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Classification {
    pub in_thick: bool,
    pub systoles: SystoleSet,
    pub in_s: bool,
    pub in_s_prime: bool,
    pub in_s_doubleprime: bool,
}

fn check_eps(eps: f64, params: &SurfaceParams) -> Result<()> {
    if !(eps > 0.0 && eps <= params.eps0) {
        return Err(Error::InvalidParameter(format!("eps {eps} must lie in (0, {}]", params.eps0)));
    }
    Ok(())
}

fn classification(s: SystoleSet, eps: f64, tol_sys: f64) -> Classification {
    let k = s.k();
    let in_s = k >= 2 && !s.intersection_pairs.is_empty();
    Classification {
        in_thick: s.systole >= eps - tol_sys,
        in_s,
        in_s_prime: k == 2 && in_s,
        in_s_doubleprime: in_s && k >= 3,
        systoles: s,
    }
}

pub fn classify(p: &FnPoint, eps: f64, params: &SurfaceParams) -> Result<Classification> {
    check_eps(eps, params)?;
    let s = SpectrumEngine::new(&fn_to_group(p)?, &params.spectrum)?.systole_set(params.tol_sys)?;
    Ok(classification(s, eps, params.tol_sys))
}

fn lengths(g: &FuchsianGroup, words: &[Word]) -> Result<Vec<f64>> {
    words.iter().map(|w| g.eval(w).translation_length()).collect()
}

fn lengths_at(x: &[f64; 6], words: &[Word]) -> Result<Vec<f64>> {
    lengths(&fn_to_group(&FnPoint::from_array(*x))?, words)
}

/// Central-difference gradients of the lengths of `words` in the six
/// coordinates, step `1e-5·|xᵢ|` floored at `1e-6`.
fn gradients(x: &[f64; 6], words: &[Word]) -> Result<Vec<[f64; 6]>> {
    let mut out = vec![[0.0; 6]; words.len()];
    for i in 0..6 {
        let h = (1e-5 * x[i].abs()).max(1e-6);
        let (mut xp, mut xm) = (*x, *x);
        xp[i] += h;
        xm[i] -= h;
        let (lp, lm) = (lengths_at(&xp, words)?, lengths_at(&xm, words)?);
        for (j, g) in out.iter_mut().enumerate() {
            g[i] = (lp[j] - lm[j]) / (2.0 * h);
        }
    }
    Ok(out)
}

pub fn length_gradient(p: &FnPoint, c: &GeodesicClass) -> Result<[f64; 6]> {
    p.validate()?;
    Ok(gradients(&p.to_array(), std::slice::from_ref(&c.word))?[0])
}

/// `Gᵀ(GGᵀ)⁻¹·rhs` for the `k×6` matrix with rows `g`.
fn min_norm_solve(g: &[[f64; 6]], rhs: &[f64]) -> Result<[f64; 6]> {
    let k = g.len();
    let gm = DMatrix::from_fn(k, 6, |i, j| g[i][j]);
    let m = &gm * gm.transpose();
    let eig = m.clone().symmetric_eigen();
    let (lo, hi) = eig.eigenvalues.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), &e| (lo.min(e), hi.max(e.abs())));
    let ratio = if hi > 0.0 { lo / hi } else { 0.0 };
    if !(ratio >= DEGENERACY_RATIO) {
        return Err(Error::DegenerateStratum(ratio));
    }
    let y = m.cholesky().ok_or(Error::DegenerateStratum(ratio))?.solve(&DVector::from_column_slice(rhs));
    let v = gm.transpose() * y;
    Ok([v[0], v[1], v[2], v[3], v[4], v[5]])
}

fn unit(v: [f64; 6]) -> [f64; 6] {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.map(|x| x / n)
}

fn direction(x: &[f64; 6], words: &[Word]) -> Result<[f64; 6]> {
    if words.len() > 6 {
        return Err(Error::DegenerateStratum(0.0));
    }
    let g = gradients(x, words)?;
    Ok(unit(min_norm_solve(&g, &vec![1.0; words.len()])?))
}

/// Unit minimum-norm direction along which every systole grows at the same rate.
pub fn stratum_direction(p: &FnPoint, s: &SystoleSet) -> Result<[f64; 6]> {
    p.validate()?;
    direction(&p.to_array(), &s.words())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StopRule {
    /// Stop in the thick part `systole ≥ ε`.
    Thick(f64),
    /// Stop on the spine: two or more systoles, some pair intersecting.
    Spine,
    /// Stop on `S″`: on the spine with at least three systoles.
    S2,
}

impl StopRule {
    fn terminal(self) -> TerminalClass {
        match self {
            StopRule::Thick(_) => TerminalClass::Thick,
            StopRule::Spine => TerminalClass::SpineS,
            StopRule::S2 => TerminalClass::SpineS2,
        }
    }

    fn arrival(self) -> EventKind {
        match self {
            StopRule::Thick(_) => EventKind::ThickArrival,
            StopRule::Spine => EventKind::SpineArrival,
            StopRule::S2 => EventKind::S2Arrival,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum TerminalClass {
    #[serde(rename = "thick")]
    Thick,
    #[serde(rename = "spine-S")]
    SpineS,
    #[serde(rename = "spine-S2")]
    SpineS2,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EventKind {
    StratumGrowth,
    ThickArrival,
    SpineArrival,
    S2Arrival,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FlowEvent {
    pub kind: EventKind,
    pub time: f64,
    pub systole_before: f64,
    pub systole_after: f64,
    pub k_before: usize,
    pub k_after: usize,
    /// Set when a class within `10·tol_sys` but not `tol_sys` was merged.
    pub degenerate: bool,
    /// Classes joining the systole set.
    pub joined: Vec<Word>,
}

/// Systole data at one state of a trajectory.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StateRecord {
    pub time: f64,
    pub systole: f64,
    pub k: usize,
    /// `max ℓ - min ℓ` over the tracked systoles.
    pub spread: f64,
    pub words: Vec<Word>,
    /// Index pairs of tracked systoles that intersect.
    pub intersecting: Vec<(usize, usize)>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SurfaceTrajectory {
    pub states: Vec<FnPoint>,
    pub records: Vec<StateRecord>,
    pub events: Vec<FlowEvent>,
    pub terminal_class: TerminalClass,
}

impl SurfaceTrajectory {
    pub fn steps(&self) -> usize {
        self.states.len() - 1
    }

    pub fn terminal(&self) -> &FnPoint {
        self.states.last().expect("a trajectory has a start")
    }

    pub fn terminal_systole(&self) -> f64 {
        self.records.last().expect("a trajectory has a start").systole
    }

    /// CSV export: `time,systole,k`.
    pub fn write_csv<W: Write>(&self, out: W) -> std::io::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["time", "systole", "k"])?;
        for r in &self.records {
            w.write_record([format!("{:.12}", r.time), format!("{:.12}", r.systole), r.k.to_string()])?;
        }
        w.flush()
    }
}

/// Point reached by one projected step, with the tracked lengths there.
struct Probe {
    x: [f64; 6],
    lens: Vec<f64>,
}

impl Probe {
    fn common(&self) -> f64 {
        self.lens.iter().copied().fold(f64::INFINITY, f64::min)
    }

    fn spread(&self) -> f64 {
        self.lens.iter().copied().fold(f64::NEG_INFINITY, f64::max) - self.common()
    }
}

struct Flow<'a> {
    params: &'a SurfaceParams,
    stop: StopRule,
    hint: Vec<Word>,
}

impl Flow<'_> {
    fn engine(&mut self, x: &[f64; 6]) -> Result<SpectrumEngine> {
        let e = SpectrumEngine::with_hint(&fn_to_group(&FnPoint::from_array(*x))?, &self.hint, &self.params.spectrum)?;
        self.hint = e.domain().face_words();
        Ok(e)
    }

    /// Newton projection onto `ℓᵢ = ℓ₁`; `None` when it does not converge.
    fn project(&self, mut x: [f64; 6], words: &[Word]) -> Result<Option<Probe>> {
        // residuals well inside tol_sys keep the set grouped as one stratum
        let tol = 0.25 * self.params.tol_sys;
        for _ in 0..NEWTON_ITERS {
            if FnPoint::from_array(x).validate().is_err() {
                return Ok(None);
            }
            let lens = lengths_at(&x, words)?;
            let r: Vec<f64> = lens[1..].iter().map(|l| l - lens[0]).collect();
            if r.iter().all(|v| v.abs() <= tol) {
                return Ok(Some(Probe { x, lens }));
            }
            let g = gradients(&x, words)?;
            let rows: Vec<[f64; 6]> = g[1..].iter().map(|gi| std::array::from_fn(|j| gi[j] - g[0][j])).collect();
            // at orbifold points the constraints can be dependent yet consistent
            let j = DMatrix::from_fn(rows.len(), 6, |i, c| rows[i][c]);
            let Ok(d) = j.svd(true, true).solve(&DVector::from_column_slice(&r), 1e-12) else {
                return Ok(None);
            };
            for j in 0..6 {
                x[j] -= d[j];
            }
        }
        Ok(None)
    }

    fn advance(&self, x: &[f64; 6], v: &[f64; 6], h: f64, words: &[Word]) -> Result<Option<Probe>> {
        self.project(std::array::from_fn(|j| x[j] + h * v[j]), words)
    }

    /// Classes within `10·tol_sys` of the tracked common length that are not tracked.
    fn newcomers(&self, e: &SpectrumEngine, probe: &Probe, tracked: &[GeodesicClass]) -> Vec<GeodesicClass> {
        let limit = probe.common() + 10.0 * self.params.tol_sys;
        e.classes_below(limit)
            .into_iter()
            .filter(|c| !tracked.iter().any(|t| e.relative_position(c, t) == Relation::Same))
            .collect()
    }

    fn record(&self, e: &SpectrumEngine, time: f64, probe: &Probe, words: &[Word]) -> Result<StateRecord> {
        let classes = tracked(e.group(), words)?;
        let mut intersecting = Vec::new();
        for i in 0..classes.len() {
            for j in (i + 1)..classes.len() {
                if e.intersects(&classes[i], &classes[j])? {
                    intersecting.push((i, j));
                }
            }
        }
        Ok(StateRecord {
            time,
            systole: probe.common(),
            k: words.len(),
            spread: probe.spread(),
            words: words.to_vec(),
            intersecting,
        })
    }

    fn satisfied(&self, r: &StateRecord) -> bool {
        let on_spine = r.k >= 2 && !r.intersecting.is_empty();
        match self.stop {
            StopRule::Thick(eps) => r.systole >= eps - self.params.tol_sys,
            StopRule::Spine => on_spine,
            StopRule::S2 => on_spine && r.k >= 3,
        }
    }

    /// Bisects the step length on `f`, which is positive at `0` and negative
    /// at `hi`, until `f ∈ [-band, band]`.
    fn bisect<F>(&self, x: &[f64; 6], v: &[f64; 6], hi: f64, words: &[Word], band: f64, f: F) -> Result<(f64, Probe)>
    where
        F: Fn(&Probe) -> Result<f64>,
    {
        let (mut lo, mut hi) = (0.0, hi);
        for _ in 0..BISECTION_ITERS {
            let mid = 0.5 * (lo + hi);
            let Some(probe) = self.advance(x, v, mid, words)? else {
                hi = mid;
                continue;
            };
            let val = f(&probe)?;
            if val.abs() <= band {
                return Ok((mid, probe));
            }
            if val > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let systole = lengths_at(x, words)?.into_iter().fold(f64::INFINITY, f64::min);
        Err(Error::Stalled { time: lo, systole })
    }

    fn run(&mut self, start: &FnPoint) -> Result<SurfaceTrajectory> {
        start.validate()?;
        let tol = self.params.tol_sys;
        let mut x = start.to_array();
        let e = self.engine(&x)?;
        let s = e.systole_set(tol)?;
        let mut words: Vec<Word> = s.words();
        let mut degenerate = false;
        let mut joined = Vec::new();
        for c in e.classes_below(s.systole + 10.0 * tol) {
            if !s.classes.iter().any(|t| e.relative_position(&c, t) == Relation::Same) {
                degenerate = true;
                joined.push(c.word.clone());
                words.push(c.word);
            }
        }
        let mut probe = Probe { x, lens: lengths_at(&x, &words)? };
        let mut time = 0.0;
        let mut states = vec![*start];
        let mut records = vec![self.record(&e, time, &probe, &words)?];
        let mut events = Vec::new();
        if degenerate {
            events.push(FlowEvent {
                kind: EventKind::StratumGrowth,
                time,
                systole_before: s.systole,
                systole_after: probe.common(),
                k_before: s.k(),
                k_after: words.len(),
                degenerate,
                joined,
            });
        }
        let mut h = self.params.initial_step;
        while !self.satisfied(records.last().expect("nonempty")) {
            if states.len() > self.params.max_steps {
                return Err(Error::Stalled { time, systole: probe.common() });
            }
            let v = direction(&x, &words)?;
            let l0 = probe.common();
            let (step, next, e, merged) = loop {
                if h < self.params.min_step {
                    return Err(Error::Stalled { time, systole: l0 });
                }
                let Some(trial) = self.advance(&x, &v, h, &words)? else {
                    h *= 0.5;
                    continue;
                };
                if !(trial.common() > l0) {
                    h *= 0.5;
                    continue;
                }
                let e = self.engine(&trial.x)?;
                let current = tracked(e.group(), &words)?;
                let fresh = self.newcomers(&e, &trial, &current);
                if fresh.iter().any(|c| c.length < trial.common() - tol) {
                    // a class overtook the systoles within the step
                    let fresh_words: Vec<Word> = fresh.iter().map(|c| c.word.clone()).collect();
                    let (hs, at) = self.bisect(&x, &v, h, &words, 0.5 * tol, |p| {
                        let g = fn_to_group(&FnPoint::from_array(p.x))?;
                        let m = lengths(&g, &fresh_words)?.into_iter().fold(f64::INFINITY, f64::min);
                        Ok(m - p.common())
                    })?;
                    let e = self.engine(&at.x)?;
                    let current = tracked(e.group(), &words)?;
                    let fresh = self.newcomers(&e, &at, &current);
                    break (hs, at, e, fresh);
                }
                if let StopRule::Thick(eps) = self.stop {
                    if fresh.is_empty() && trial.common() > eps + THICK_LANDING {
                        let (hs, at) = self.bisect(&x, &v, h, &words, 0.5 * THICK_LANDING, |p| {
                            Ok(eps + 0.5 * THICK_LANDING - p.common())
                        })?;
                        let e = self.engine(&at.x)?;
                        break (hs, at, e, Vec::new());
                    }
                }
                break (h, trial, e, fresh);
            };
            time += step;
            x = next.x;
            if !merged.is_empty() {
                let k_before = words.len();
                let degenerate = merged.iter().any(|c| c.length > next.common() + tol);
                let joined: Vec<Word> = merged.iter().map(|c| c.word.clone()).collect();
                words.extend(joined.iter().cloned());
                probe = self.project(x, &words)?.ok_or(Error::Stalled { time, systole: next.common() })?;
                x = probe.x;
                events.push(FlowEvent {
                    kind: EventKind::StratumGrowth,
                    time,
                    systole_before: l0,
                    systole_after: probe.common(),
                    k_before,
                    k_after: words.len(),
                    degenerate,
                    joined,
                });
            } else {
                probe = next;
            }
            states.push(FnPoint::from_array(x));
            records.push(self.record(&e, time, &probe, &words)?);
            h = (2.0 * step).min(self.params.initial_step);
        }
        let last = records.last().expect("nonempty");
        events.push(FlowEvent {
            kind: self.stop.arrival(),
            time,
            systole_before: last.systole,
            systole_after: last.systole,
            k_before: last.k,
            k_after: last.k,
            degenerate: false,
            joined: Vec::new(),
        });
        Ok(SurfaceTrajectory { states, records, events, terminal_class: self.stop.terminal() })
    }
}

fn tracked(g: &FuchsianGroup, words: &[Word]) -> Result<Vec<GeodesicClass>> {
    words.iter().map(|w| GeodesicClass::from_word(g, w)).collect()
}

/// Flows `p` until `stop` holds.
pub fn flow(p: &FnPoint, stop: StopRule, params: &SurfaceParams) -> Result<SurfaceTrajectory> {
    if let StopRule::Thick(eps) = stop {
        check_eps(eps, params)?;
    }
    if !(params.tol_sys > 0.0 && params.initial_step > 0.0 && params.min_step > 0.0) {
        return Err(Error::InvalidParameter("tolerances and steps must be positive".into()));
    }
    Flow { params, stop, hint: Vec::new() }.run(p)
}
