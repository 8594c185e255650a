mod common;

use std::collections::BTreeSet;

use common::{face_orbit, group, sampled_crossing, slow_lengths};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use roundwalk::hyperbolic::{fn_to_group, FnPoint, Isometry};
use roundwalk::spectrum::{
    enumerate_classes, intersects, length_spectrum, word_bound, GeodesicClass, Relation, SpectrumEngine,
    SpectrumParams, EPSILON_0,
};
use roundwalk::word::{Letter, Word};
use roundwalk::Error;

fn naive_canonical(w: &[Letter]) -> Option<Vec<Letter>> {
    let n = w.len();
    if (0..n).any(|k| w[(k + 1) % n] == w[k].inverse()) && n > 1 {
        return None;
    }
    if (1..n).any(|p| n % p == 0 && (0..n).all(|k| w[k] == w[(k + p) % n])) {
        return None;
    }
    let inv: Vec<Letter> = w.iter().rev().map(|l| l.inverse()).collect();
    let mut best: Option<Vec<Letter>> = None;
    for base in [w.to_vec(), inv] {
        for k in 0..n {
            let r: Vec<Letter> = base[k..].iter().chain(&base[..k]).copied().collect();
            if best.as_ref().is_none_or(|b| r < *b) {
                best = Some(r);
            }
        }
    }
    best
}

#[test]
fn class_count_matches_naive_enumeration() {
    let g = group([1.3, 2.1, 0.9], [0.2, -0.4, 0.1]);
    let mut naive = BTreeSet::new();
    let mut words: Vec<Vec<Letter>> = vec![vec![]];
    for _ in 0..4 {
        words = words.iter().flat_map(|w| Letter::ALL.iter().map(move |&l| [w.clone(), vec![l]].concat())).collect();
        for w in &words {
            if w.windows(2).all(|p| p[1] != p[0].inverse()) {
                if let Some(c) = naive_canonical(w) {
                    naive.insert(c);
                }
            }
        }
    }
    let classes = enumerate_classes(&g, 4);
    assert_eq!(classes.len(), naive.len());
    let got: BTreeSet<Vec<Letter>> = classes.iter().map(|c| c.word.letters().to_vec()).collect();
    assert_eq!(got, naive);
    assert!(classes.windows(2).all(|p| p[0].length <= p[1].length));
}

#[test]
fn rotations_share_one_class() {
    let w = Word::parse("abCd").unwrap();
    let c = w.canonical();
    for k in 0..4 {
        let mut v = w.letters()[k..].to_vec();
        v.extend_from_slice(&w.letters()[..k]);
        assert_eq!(Word::new(v).canonical(), c);
    }
}

#[test]
fn spectrum_matches_slow_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let params = SpectrumParams { word_cap: 64, ..SpectrumParams::default() };
    for _ in 0..4 {
        let l = [rng.gen_range(0.8..3.0), rng.gen_range(0.8..3.0), rng.gen_range(0.8..3.0)];
        let t = [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
        let g = group(l, t);
        let cutoff = 3.5;
        let engine = SpectrumEngine::new(&g, &params).unwrap();
        let spec = engine.length_spectrum(cutoff).unwrap();
        let mut ours: Vec<f64> = spec.iter().map(|c| c.length).collect();
        ours.dedup_by(|a, b| (*a - *b).abs() <= 1e-9 * *a);
        let radius = cutoff + 2.0 * engine.domain().radius + 1.0;
        let slow = slow_lengths(&g, cutoff, word_bound(&g, cutoff) + 3, radius);
        assert_eq!(ours.len(), slow.len(), "{l:?} {t:?}: {ours:?} vs {slow:?}");
        for (a, b) in ours.iter().zip(&slow) {
            assert!((a - b).abs() < 1e-9, "{a} vs {b}");
        }
    }
}

#[test]
fn spectrum_is_monotone_in_cutoff() {
    let g = group([2.0, 2.4, 2.2], [0.3, 0.0, -0.5]);
    let params = SpectrumParams { word_cap: 64, ..SpectrumParams::default() };
    let short = length_spectrum(&g, 4.0, &params).unwrap();
    let long = length_spectrum(&g, 6.0, &params).unwrap();
    assert!(long.len() > short.len());
    assert_eq!(&long[..short.len()], &short[..]);
}

#[test]
fn cutoff_too_deep_is_reported() {
    let g = group([0.3, 2.0, 2.0], [0.0; 3]);
    let err = length_spectrum(&g, 6.0, &SpectrumParams::default()).unwrap_err();
    assert!(matches!(err, Error::CutoffTooDeep { cap: 16, .. }));
}

#[test]
fn classes_satisfy_invariants() {
    let g = group([1.1, 1.9, 2.6], [0.5, -0.3, 0.8]);
    let spec = length_spectrum(&g, 4.0, &SpectrumParams { word_cap: 64, ..SpectrumParams::default() }).unwrap();
    for c in &spec {
        assert_eq!(c.word.canonical(), c.word);
        assert!((c.length - c.matrix.translation_length().unwrap()).abs() < 1e-10);
        assert_eq!(c.matrix, g.eval(&c.word));
    }
}

#[test]
fn dual_curve_crossing_agrees_with_sampling() {
    let g = group([2.0, 2.5, 3.0], [0.3, 0.0, 0.0]);
    let engine = SpectrumEngine::new(&g, &SpectrumParams::default()).unwrap();
    let orbit = face_orbit(&g, engine.domain().radius);
    let c = |s: &str| GeodesicClass::from_word(&g, &Word::parse(s).unwrap()).unwrap();
    for (x, y, expect) in [("b", "a", true), ("b", "d", false), ("bd", "b", false), ("d", "c", true)] {
        assert_eq!(engine.intersects(&c(x), &c(y)).unwrap(), expect, "{x} {y}");
        assert_eq!(sampled_crossing(&c(x), &c(y), &orbit, 2e-3), expect, "{x} {y} sampled");
    }
}

#[test]
fn spectrum_pairs_agree_with_sampling() {
    let g = group([1.2, 2.9, 1.7], [-0.6, 0.4, 0.2]);
    let engine = SpectrumEngine::new(&g, &SpectrumParams::default()).unwrap();
    let orbit = face_orbit(&g, engine.domain().radius);
    let spec = engine.classes_below(3.6);
    assert!(spec.len() >= 4);
    let mut seen_cross = false;
    for i in 0..spec.len() {
        for j in (i + 1)..spec.len() {
            let r = engine.relative_position(&spec[i], &spec[j]);
            assert_ne!(r, Relation::Same);
            let sampled = sampled_crossing(&spec[i], &spec[j], &orbit, 2e-3);
            assert_eq!(r == Relation::Crossing, sampled, "{} {}", spec[i].word, spec[j].word);
            seen_cross |= sampled;
        }
    }
    assert!(seen_cross);
}

#[test]
fn short_pairs_are_disjoint() {
    let g = group([0.8, 1.2, 1.6], [0.3, -0.7, 0.1]);
    let engine = SpectrumEngine::new(&g, &SpectrumParams::default()).unwrap();
    let short = engine.classes_below(EPSILON_0);
    assert!(short.len() >= 3);
    for i in 0..short.len() {
        for j in (i + 1)..short.len() {
            assert!(!engine.intersects(&short[i], &short[j]).unwrap());
            assert_eq!(engine.relative_position(&short[i], &short[j]), Relation::Disjoint);
        }
    }
}

#[test]
fn same_class_is_an_error() {
    let g = group([1.0, 2.0, 2.0], [0.0; 3]);
    let engine = SpectrumEngine::new(&g, &SpectrumParams::default()).unwrap();
    let a = GeodesicClass::from_word(&g, &Word::parse("ab").unwrap()).unwrap();
    let b = GeodesicClass::from_word(&g, &Word::parse("ba").unwrap()).unwrap();
    assert_eq!(engine.intersects(&a, &b), Err(Error::SameClass));
}

#[test]
fn conjugation_invariance() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let params = SpectrumParams { word_cap: 64, ..SpectrumParams::default() };
    for _ in 0..3 {
        let l = [rng.gen_range(0.8..3.0), rng.gen_range(0.8..3.0), rng.gen_range(0.8..3.0)];
        let t = [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
        let g = group(l, t);
        let (x, y): (f64, f64) = (rng.gen_range(-0.5..0.5), rng.gen_range(0.7..1.4));
        let s = y.sqrt();
        let h = Isometry::new(s, x / s, 0.0, 1.0 / s).unwrap();
        let gc = g.conjugated(&h);
        let e1 = SpectrumEngine::new(&g, &params).unwrap();
        let e2 = SpectrumEngine::new(&gc, &params).unwrap();
        let s1 = e1.length_spectrum(3.5).unwrap();
        let s2 = e2.length_spectrum(3.5).unwrap();
        assert_eq!(s1.len(), s2.len());
        for (a, b) in s1.iter().zip(&s2) {
            assert!((a.length - b.length).abs() < 1e-9);
        }
        for i in 0..s1.len() {
            for j in (i + 1)..s1.len() {
                let c = |k: usize| GeodesicClass::from_word(&gc, &s1[k].word).unwrap();
                assert_eq!(e1.relative_position(&s1[i], &s1[j]), e2.relative_position(&c(i), &c(j)));
            }
        }
    }
}

#[test]
fn dehn_twist_preserves_spectrum() {
    let params = SpectrumParams { word_cap: 64, ..SpectrumParams::default() };
    let p = FnPoint::new([1.4, 2.2, 1.8], [0.3, -0.2, 0.6]).unwrap();
    let base = length_spectrum(&fn_to_group(&p).unwrap(), 5.0, &params).unwrap();
    for i in 0..3 {
        let twisted = length_spectrum(&fn_to_group(&p.dehn_twist(i)).unwrap(), 5.0, &params).unwrap();
        assert_eq!(base.len(), twisted.len(), "twist {i}");
        for (a, b) in base.iter().zip(&twisted) {
            assert!((a.length - b.length).abs() < 1e-8, "twist {i}: {} vs {}", a.length, b.length);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn intersects_is_symmetric(l in prop::array::uniform3(0.8f64..3.0), t in prop::array::uniform3(-1.0f64..1.0)) {
        let g = group(l, t);
        let engine = SpectrumEngine::new(&g, &SpectrumParams::default()).unwrap();
        let spec = engine.classes_below(3.5);
        for i in 0..spec.len() {
            for j in (i + 1)..spec.len() {
                prop_assert_eq!(engine.intersects(&spec[i], &spec[j]), engine.intersects(&spec[j], &spec[i]));
            }
        }
        if spec.len() >= 2 {
            prop_assert_eq!(
                intersects(&g, &spec[0], &spec[1], &SpectrumParams::default()),
                engine.intersects(&spec[0], &spec[1])
            );
        }
    }
}
