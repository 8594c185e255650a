mod common;

use common::{brute_force_minimum, random_unimodular};
use num_complex::Complex64;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use roundwalk::lattice::{minimal_vectors, reduce_basis, Lattice};
use roundwalk::lattice_retract::{
    h2_point_to_lattice, lattice_to_h2_point, marked_distance, reduce_to_fundamental_domain, retract, retract_h2,
};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn retraction_ends_well_rounded(seed in any::<u64>(), n in 2usize..=4) {
        let l = random_unimodular(&mut ChaCha8Rng::seed_from_u64(seed), n);
        let t = retract(&l).unwrap();
        let (_, rank) = brute_force_minimum(t.last());
        prop_assert_eq!(rank, n);
        prop_assert!(t.events.len() < n);
        for e in &t.events {
            prop_assert!(e.rank_after > e.rank_before);
        }
        for w in t.events.windows(2) {
            prop_assert!(w[1].rank_before == w[0].rank_after);
        }
        prop_assert!(t.last().det_drift() <= 1e-8);
    }

    #[test]
    fn minimal_vectors_match_brute_force(seed in any::<u64>(), n in 2usize..=4) {
        let l = random_unimodular(&mut ChaCha8Rng::seed_from_u64(seed), n);
        let (m, rank) = brute_force_minimum(&l);
        let mv = minimal_vectors(&l).unwrap();
        prop_assert!((mv.m - m).abs() <= 1e-9 * m);
        prop_assert_eq!(mv.rank, rank);
    }

    #[test]
    fn reduction_keeps_the_lattice(seed in any::<u64>(), n in 2usize..=5) {
        let l = random_unimodular(&mut ChaCha8Rng::seed_from_u64(seed), n);
        let r = reduce_basis(&l).unwrap();
        // same lattice: the change of basis is integral with determinant ±1
        let u = l.basis().clone().try_inverse().unwrap() * r.basis();
        prop_assert!(u.iter().all(|x| (x - x.round()).abs() < 1e-6));
        prop_assert!((u.determinant().abs() - 1.0).abs() < 1e-6);
    }

    #[test]
    fn h2_closed_form(x in -0.5f64..=0.5, y in 0.0f64..3.0) {
        let y = (1.0 - x * x).sqrt() + y;
        let z = Complex64::new(x, y);
        let w = retract_h2(z).unwrap();
        prop_assert!((w - Complex64::new(x, (1.0 - x * x).sqrt())).norm() < 1e-9);
    }

    #[test]
    fn h2_matches_generic_pipeline(x in -0.49f64..=0.49, y in 0.01f64..3.0) {
        let z = Complex64::new(x, (1.0 - x * x).sqrt() + y);
        let t = retract(&h2_point_to_lattice(z).unwrap()).unwrap();
        let (w, _) = reduce_to_fundamental_domain(lattice_to_h2_point(t.last()).unwrap()).unwrap();
        prop_assert!((w - retract_h2(z).unwrap()).norm() < 1e-9, "{} vs {}", w, retract_h2(z).unwrap());
    }
}

#[test]
fn unit_arc_is_fixed() {
    for k in 0..=100 {
        let x = -0.5 + k as f64 / 100.0;
        let z = Complex64::new(x, (1.0 - x * x).sqrt());
        assert!((retract_h2(z).unwrap() - z).norm() < 1e-12);
    }
}

#[test]
fn diagonal_closed_forms() {
    for a in [0.3, 0.5, 0.9] {
        let t = retract(&Lattice::diagonal(&[a, 1.0 / a]).unwrap()).unwrap();
        assert_eq!(t.events.len(), 1);
        assert!((t.events[0].t_star - a.powi(-2)).abs() < 1e-9);
        assert!(marked_distance(t.last(), &Lattice::identity(2)) < 1e-9);
    }
    for a in [0.5, 0.8] {
        let t = retract(&Lattice::diagonal(&[a, a, a.powi(-2)]).unwrap()).unwrap();
        assert!((t.events[0].t_star - a.powi(-2)).abs() < 1e-9);
        assert!(marked_distance(t.last(), &Lattice::identity(3)) < 1e-9);
    }
}

#[test]
fn marked_distance_ignores_rotation() {
    let l = random_unimodular(&mut ChaCha8Rng::seed_from_u64(3), 3);
    let (c, s) = (0.3f64.cos(), 0.3f64.sin());
    let r = nalgebra::DMatrix::from_row_slice(3, 3, &[c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0]);
    let rotated = Lattice::new(r * l.basis()).unwrap();
    assert!(marked_distance(&l, &rotated) < 1e-12);
    assert!(marked_distance(&l, &Lattice::identity(3)) > 1e-3);
}
