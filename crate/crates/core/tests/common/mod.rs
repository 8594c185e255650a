//! Independent oracles shared by the integration tests.
#![allow(dead_code)]

use std::collections::{HashMap, HashSet};

use num_complex::Complex64;
use roundwalk::hyperbolic::{fn_to_group, hyperbolic_distance, FnPoint, FuchsianGroup, Isometry};
use roundwalk::spectrum::GeodesicClass;
use roundwalk::word::Letter;

pub fn group(l: [f64; 3], t: [f64; 3]) -> FuchsianGroup {
    fn_to_group(&FnPoint::new(l, t).unwrap()).unwrap()
}

fn key(g: &Isometry) -> [i64; 4] {
    let [[a, b], [c, d]] = g.m;
    let s = if a + d < 0.0 || (a + d == 0.0 && b < 0.0) { -1.0 } else { 1.0 };
    [a, b, c, d].map(|x| (x * s * 1e6).round() as i64)
}

/// Group elements reachable by reduced words of length `≤ depth` whose every
/// prefix moves `i` by at most `radius`.
pub fn word_ball(group: &FuchsianGroup, depth: usize, radius: f64) -> Vec<Isometry> {
    let i = Complex64::new(0.0, 1.0);
    let gens: Vec<(usize, Isometry)> = Letter::ALL.iter().enumerate().map(|(k, &l)| (k, group.letter(l))).collect();
    let mut seen = HashSet::new();
    seen.insert(key(&Isometry::IDENTITY));
    let mut out = vec![Isometry::IDENTITY];
    let mut frontier: Vec<(Isometry, Option<usize>)> = vec![(Isometry::IDENTITY, None)];
    for _ in 0..depth {
        let mut next = Vec::new();
        for (g, last) in &frontier {
            for (k, m) in &gens {
                if last.is_some_and(|l| l ^ 1 == *k) {
                    continue;
                }
                let h = *g * *m;
                if hyperbolic_distance(i, h.apply(i)) <= radius && seen.insert(key(&h)) {
                    out.push(h);
                    next.push((h, Some(*k)));
                }
            }
        }
        frontier = next;
    }
    out
}

/// Enough of the orbit of `i` that greedy reduction lands in the Dirichlet
/// region of `i`, whose radius is `radius`. Smaller balls miss face pairings.
pub fn face_orbit(group: &FuchsianGroup, radius: f64) -> Vec<Isometry> {
    word_ball(group, 12, 2.0 * radius + 3.0)
}

/// Distinct primitive closed-geodesic lengths up to `cutoff` among the
/// elements of [`word_ball`].
pub fn slow_lengths(group: &FuchsianGroup, cutoff: f64, depth: usize, radius: f64) -> Vec<f64> {
    let mut lens: Vec<f64> = word_ball(group, depth, radius)
        .iter()
        .filter_map(|g| {
            let t = g.trace().abs();
            (t > 2.0 + 1e-9).then(|| 2.0 * (t / 2.0).acosh())
        })
        .filter(|l| *l <= cutoff * (1.0 + 1e-12))
        .collect();
    lens.sort_by(f64::total_cmp);
    let mut distinct: Vec<f64> = Vec::new();
    for l in lens {
        if distinct.last().is_none_or(|d| l - d > 1e-9 * l) {
            distinct.push(l);
        }
    }
    let roots = distinct.clone();
    distinct.retain(|l| {
        !roots.iter().any(|r| {
            let q = l / r;
            q > 1.5 && (q - q.round()).abs() < 1e-8 * q
        })
    });
    distinct
}

fn klein(z: Complex64) -> [f64; 2] {
    let r = z.norm_sqr();
    let p0 = (r + 1.0) / (2.0 * z.im);
    [(r - 1.0) / (2.0 * z.im) / p0, z.re / z.im / p0]
}

/// Moves `z` by elements of `orbit` until `i` is its nearest orbit point.
fn reduce(z: Complex64, start: Isometry, orbit: &[Isometry]) -> (Isometry, Complex64) {
    let i = Complex64::new(0.0, 1.0);
    let mut acc = start;
    let mut w = start.inverse().apply(z);
    loop {
        let d0 = hyperbolic_distance(w, i);
        let best = orbit
            .iter()
            .map(|g| (g, hyperbolic_distance(w, g.apply(i))))
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .expect("nonempty orbit");
        if best.1 >= d0 - 1e-12 {
            return (acc, w);
        }
        acc = acc * *best.0;
        w = best.0.inverse().apply(w);
    }
}

type Segment = ([f64; 2], [f64; 2]);

/// One period of the geodesic, cut into pieces of hyperbolic length `step`
/// and moved into the Dirichlet region of `i`; a piece whose ends land in
/// different tiles is kept in both.
fn reduced_segments(c: &GeodesicClass, orbit: &[Isometry], step: f64) -> Vec<Segment> {
    let i = Complex64::new(0.0, 1.0);
    let f = c.axis.frame();
    let t0 = f.inverse().apply(c.axis.project(i)).norm().ln();
    let n = (c.length / step).ceil() as usize;
    let pts: Vec<Complex64> =
        (0..=n).map(|k| f.apply(Complex64::new(0.0, (t0 + c.length * k as f64 / n as f64).exp()))).collect();
    let mut out = Vec::new();
    let mut acc = Isometry::IDENTITY;
    let mut prev: Option<(Isometry, Complex64, Complex64)> = None;
    for &p in &pts {
        let (g, w) = reduce(p, acc, orbit);
        acc = g;
        if let Some((pg, pw, pp)) = prev {
            out.push((klein(pw), klein(pg.inverse().apply(p))));
            if key(&pg) != key(&g) {
                out.push((klein(g.inverse().apply(pp)), klein(w)));
            }
        }
        prev = Some((g, w, p));
    }
    out
}

fn cross(a: &Segment, b: &Segment) -> bool {
    let o = |p: [f64; 2], q: [f64; 2], r: [f64; 2]| (q[0] - p[0]) * (r[1] - p[1]) - (q[1] - p[1]) * (r[0] - p[0]);
    let (d1, d2) = (o(a.0, a.1, b.0), o(a.0, a.1, b.1));
    let (d3, d4) = (o(b.0, b.1, a.0), o(b.0, b.1, a.1));
    d1 * d2 < 0.0 && d3 * d4 < 0.0
}

/// Whether the two closed geodesics cross, found by sampling both densely in
/// a fundamental region. `orbit` must contain the face pairings of the
/// Dirichlet region of `i`.
pub fn sampled_crossing(c1: &GeodesicClass, c2: &GeodesicClass, orbit: &[Isometry], step: f64) -> bool {
    const CELL: f64 = 0.01;
    let s1 = reduced_segments(c1, orbit, step);
    let s2 = reduced_segments(c2, orbit, step);
    let cell = |p: [f64; 2]| ((p[0] / CELL).floor() as i64, (p[1] / CELL).floor() as i64);
    let mut grid: HashMap<(i64, i64), Vec<usize>> = HashMap::new();
    for (k, s) in s2.iter().enumerate() {
        let (a, b) = (cell(s.0), cell(s.1));
        for x in a.0.min(b.0)..=a.0.max(b.0) {
            for y in a.1.min(b.1)..=a.1.max(b.1) {
                grid.entry((x, y)).or_default().push(k);
            }
        }
    }
    s1.iter().any(|s| {
        let (a, b) = (cell(s.0), cell(s.1));
        (a.0.min(b.0)..=a.0.max(b.0)).any(|x| {
            (a.1.min(b.1)..=a.1.max(b.1))
                .any(|y| grid.get(&(x, y)).is_some_and(|v| v.iter().any(|&k| cross(s, &s2[k]))))
        })
    })
}

/// Random basis with `|det| = 1`, entries spread by a random diagonal scaling.
pub fn random_unimodular(rng: &mut impl rand::Rng, n: usize) -> roundwalk::lattice::Lattice {
    use nalgebra::DMatrix;
    let scale: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0f64..1.0).exp()).collect();
    let mut b = DMatrix::from_fn(n, n, |i, j| {
        let e = rng.gen_range(-0.6..0.6) + if i == j { 1.0 } else { 0.0 };
        e * scale[j]
    });
    let det = b.determinant();
    if det < 0.0 {
        b.column_mut(0).neg_mut();
    }
    let b = b / det.abs().powf(1.0 / n as f64);
    roundwalk::lattice::Lattice::new(b).unwrap()
}

/// Minimal squared norm and the rank of the minimal vectors, by listing every
/// coefficient vector in a box that provably contains them. The box is taken
/// in a reduced basis, checked here to span the same lattice.
pub fn brute_force_minimum(l: &roundwalk::lattice::Lattice) -> (f64, usize) {
    use nalgebra::{DMatrix, DVector};
    let b = roundwalk::lattice::reduce_basis(l).unwrap().basis().clone();
    let u = l.basis().clone().try_inverse().unwrap() * &b;
    assert!(u.iter().all(|x| (x - x.round()).abs() < 1e-6), "reduction left the lattice");
    assert!((u.determinant().abs() - 1.0).abs() < 1e-6);
    let n = b.nrows();
    let inv = b.clone().try_inverse().unwrap();
    let bound = (0..n).map(|j| b.column(j).norm_squared()).fold(f64::INFINITY, f64::min);
    let reach: Vec<i64> = (0..n).map(|i| (inv.row(i).norm() * bound.sqrt() * (1.0 + 1e-9)).floor() as i64).collect();
    let mut c: Vec<i64> = reach.iter().map(|r| -r).collect();
    let mut m = f64::INFINITY;
    let mut mins: Vec<DVector<f64>> = Vec::new();
    loop {
        if c.iter().any(|&x| x != 0) {
            let v = &b * DVector::from_iterator(n, c.iter().map(|&x| x as f64));
            let q = v.norm_squared();
            if q < m * (1.0 - 1e-9) {
                m = q;
                mins.retain(|w| w.norm_squared() <= m * (1.0 + 1e-9));
            }
            if q <= m * (1.0 + 1e-9) {
                mins.push(v);
            }
        }
        let mut k = 0;
        while k < n && c[k] == reach[k] {
            c[k] = -reach[k];
            k += 1;
        }
        if k == n {
            break;
        }
        c[k] += 1;
    }
    (m, DMatrix::from_columns(&mins).rank(1e-9 * m.sqrt()))
}

/// Primitive closed geodesics up to `cutoff` as sorted lengths, one entry per
/// class. Candidates are ball elements whose axes pass within `near` of `i`;
/// two candidates are one class when a ball element carries one axis onto the
/// other. `near` must be at least the covering radius of `i`.
pub fn slow_classes(group: &FuchsianGroup, cutoff: f64, depth: usize, radius: f64, near: f64) -> Vec<f64> {
    use roundwalk::hyperbolic::GeodesicAxis;
    let i = Complex64::new(0.0, 1.0);
    let mut ball: Vec<(f64, Isometry)> =
        word_ball(group, depth, radius).into_iter().map(|g| (hyperbolic_distance(i, g.apply(i)), g)).collect();
    ball.sort_by(|a, b| a.0.total_cmp(&b.0));

    const Q: f64 = 1e6;
    let n = (std::f64::consts::TAU * Q).round() as i64;
    let angles = |ax: &GeodesicAxis| {
        let a = ax.attracting.disk_angle().rem_euclid(std::f64::consts::TAU);
        let r = ax.repelling.disk_angle().rem_euclid(std::f64::consts::TAU);
        if a <= r { (a, r) } else { (r, a) }
    };
    let bucket = |x: f64| ((x * Q).round() as i64).rem_euclid(n);

    // shortest element per axis: the primitive one
    let mut axes: Vec<(GeodesicAxis, f64)> = Vec::new();
    let mut index: HashMap<(i64, i64), Vec<usize>> = HashMap::new();
    let find = |index: &HashMap<(i64, i64), Vec<usize>>, axes: &[(GeodesicAxis, f64)], ax: &GeodesicAxis| {
        let (a, r) = angles(ax);
        let (ba, br) = (bucket(a), bucket(r));
        for da in -1..=1 {
            for db in -1..=1 {
                for key in [((ba + da).rem_euclid(n), (br + db).rem_euclid(n)), ((br + db).rem_euclid(n), (ba + da).rem_euclid(n))] {
                    if let Some(v) = index.get(&key) {
                        if let Some(&k) = v.iter().find(|&&k| axes[k].0.same_geodesic(ax, 1e-7)) {
                            return Some(k);
                        }
                    }
                }
            }
        }
        None
    };
    for (_, g) in &ball {
        let t = g.trace().abs();
        if t <= 2.0 + 1e-9 {
            continue;
        }
        let len = 2.0 * (t / 2.0).acosh();
        if len > cutoff * (1.0 + 1e-12) {
            continue;
        }
        let ax = g.axis().unwrap();
        if hyperbolic_distance(i, ax.project(i)) > near {
            continue;
        }
        match find(&index, &axes, &ax) {
            Some(k) => axes[k].1 = axes[k].1.min(len),
            None => {
                let (a, r) = angles(&ax);
                index.entry((bucket(a), bucket(r))).or_default().push(axes.len());
                axes.push((ax, len));
            }
        }
    }

    let mut parent: Vec<usize> = (0..axes.len()).collect();
    fn root(p: &mut [usize], mut x: usize) -> usize {
        while p[x] != x {
            p[x] = p[p[x]];
            x = p[x];
        }
        x
    }
    for k in 0..axes.len() {
        let (ax, len) = axes[k];
        let reach = 2.0 * near + 0.5 * len + 1e-9;
        for (d, f) in &ball {
            if *d > reach {
                break;
            }
            if let Some(j) = find(&index, &axes, &ax.image(f)) {
                if (axes[j].1 - len).abs() < 1e-9 * len {
                    let (a, b) = (root(&mut parent, k), root(&mut parent, j));
                    parent[a] = b;
                }
            }
        }
    }
    let mut out: Vec<f64> = (0..axes.len()).filter(|&k| root(&mut parent, k) == k).map(|k| axes[k].1).collect();
    out.sort_by(f64::total_cmp);
    out
}
