use std::f64::consts::TAU;

use lacuna::directions::{slopes2d, Direction, DirectionSet};
use lacuna::grid::{apply_multiplier, inverse_transform, Field, Grid, Spectrum, Symbol};
use lacuna::operators::*;
use lacuna::symbols::Convention;
use num_complex::Complex64;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

fn random_field(grid: Grid, seed: u64) -> Field {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    Field::from_fn(grid, |_| Complex64::new(r.random_range(-1.0..1.0), r.random_range(-1.0..1.0))).unwrap()
}

fn band_limited(grid: Grid, seed: u64, reach: i64) -> Field {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    let s = Spectrum::from_fn(grid, |xi| {
        if xi.iter().all(|k| k.abs() <= reach) {
            Complex64::new(r.random_range(-1.0..1.0), r.random_range(-1.0..1.0))
        } else {
            c(0.0)
        }
    })
    .unwrap();
    let f = inverse_transform(&s);
    let m = f.max_abs();
    f.scale(c(1.0 / m))
}

fn dirs(v: &[f64]) -> DirectionSet {
    DirectionSet::new(2, v.iter().map(|&t| Direction::angle2d(t)).collect()).unwrap()
}

#[test]
fn hilbert_identity_on_half_spectrum() {
    let g = Grid::unit(2, 16).unwrap();
    let w = Direction::angle2d(0.3);
    let keep = Symbol::real("half", {
        let w = w.clone();
        move |xi| if w.dot(xi) > 0.0 { 1.0 } else { 0.0 }
    });
    let f = apply_multiplier(&random_field(g, 3), &keep).unwrap();
    let h = hilbert_dir(&f, &w, Convention::Indicator).unwrap();
    assert!(h.max_diff(&f).unwrap() < 1e-10);
    let once = hilbert_dir(&random_field(g, 4), &w, Convention::Indicator).unwrap();
    assert!(hilbert_dir(&once, &w, Convention::Indicator).unwrap().max_diff(&once).unwrap() < 1e-10);
}

#[test]
fn hilbert_along_axis_matches_columnwise_dft() {
    let m = 8usize;
    let g = Grid::unit(2, m).unwrap();
    let f = random_field(g, 12);
    let h = hilbert_dir(&f, &Direction::axis(2, 0), Convention::Indicator).unwrap();
    for col in 0..m {
        let line: Vec<Complex64> = (0..m).map(|i| f.values()[i * m + col]).collect();
        for x in 0..m {
            let mut acc = c(0.0);
            for xi in 1..(m as i64 / 2) {
                let coef: Complex64 = line
                    .iter()
                    .enumerate()
                    .map(|(j, v)| v * Complex64::from_polar(1.0, -TAU * (xi * j as i64) as f64 / m as f64))
                    .sum();
                acc += coef * Complex64::from_polar(1.0, TAU * (xi * x as i64) as f64 / m as f64) / m as f64;
            }
            assert!((h.values()[x * m + col] - acc).norm() < 1e-12);
        }
    }
}

#[test]
fn hilbert_projection_properties() {
    let g = Grid::unit(2, 16).unwrap();
    let w = Direction::angle2d(1.1);
    let (f, k) = (random_field(g, 21), random_field(g, 22));
    let hf = hilbert_dir(&f, &w, Convention::Indicator).unwrap();
    let hk = hilbert_dir(&k, &w, Convention::Indicator).unwrap();
    assert!((hf.inner(&k).unwrap() - f.inner(&hk).unwrap()).norm() < 1e-10);
    assert!(hf.norm() <= f.norm() * (1.0 + 1e-12));
    // H_ω + H_{−ω} = Id off the line ξ·ω = 0, which holds no lattice point but 0 here
    let both = hf.add(&hilbert_dir(&f, &w.neg(), Convention::Indicator).unwrap()).unwrap();
    let mean = f.values().iter().sum::<Complex64>() / g.points() as f64;
    assert!(both.max_diff(&f.map(|z| z - mean)).unwrap() < 1e-10);
}

#[test]
fn maximal_hilbert_examples() {
    let g = Grid::unit(2, 4).unwrap();
    let f = random_field(g, 1);
    let set = dirs(&[0.4, 1.0]);
    let mh = maximal_hilbert(&f, &set, Convention::Indicator).unwrap();
    let a = hilbert_dir(&f, &set.members()[0], Convention::Indicator).unwrap();
    let b = hilbert_dir(&f, &set.members()[1], Convention::Indicator).unwrap();
    for i in 0..g.points() {
        assert_eq!(mh.values()[i].re, a.values()[i].norm().max(b.values()[i].norm()));
    }
    let one = maximal_hilbert(&f, &set.prefix(1), Convention::Indicator).unwrap();
    assert!(one.re().iter().zip(a.abs()).all(|(x, y)| *x == y));
    assert!(one.re().iter().zip(mh.re()).all(|(x, y)| *x <= y));
    assert!(maximal_hilbert(&f, &set.prefix(0), Convention::Indicator).is_err());
}

#[test]
fn segment_average_examples() {
    let g = Grid::unit(2, 32).unwrap();
    let seg = |x: Vec<f64>, r: f64, w: Direction| SegmentSpec { center: x, radius: r, direction: w };
    let k = Field::constant(g, Complex64::new(2.5, -1.0));
    let v = avg_segment(&k, &seg(vec![0.3, 0.7], 0.21, Direction::angle2d(0.5))).unwrap();
    assert!((v - Complex64::new(2.5, -1.0)).norm() < 1e-14);
    let lin = Field::from_fn(g, |x| c(1.0 + 3.0 * x[0])).unwrap();
    let v = avg_segment(&lin, &seg(vec![0.5, 0.25], 0.2, Direction::axis(2, 0))).unwrap();
    assert!((v.re - 2.5).abs() < 1e-12);
    let s = Field::from_fn(g, |x| c((TAU * x[0]).sin())).unwrap();
    let v = avg_segment(&s, &seg(vec![0.0, 0.0], 0.25, Direction::axis(2, 0))).unwrap();
    assert!(v.norm() < 1e-14);
}

#[test]
fn directional_maximal_examples() {
    let g = Grid::unit(2, 64).unwrap();
    let radii = dyadic_radii(&g);
    let set = slopes2d(4).unwrap();
    let one = maximal_set(&Field::constant(g, c(1.0)), &set, &radii).unwrap();
    assert!(one.re().iter().all(|v| (v - 1.0).abs() < 1e-12));

    let mut imp = vec![c(0.0); g.points()];
    imp[0] = c(1.0);
    let imp = Field::new(g, imp).unwrap();
    let m = maximal_dir(&imp, &Direction::axis(2, 0), &radii).unwrap();
    let h = g.cell();
    let r = 15.0 * h;
    let expect = h / (2.0 * r);
    let got = m.values()[15 * 64].re;
    assert!((got - expect).abs() <= 0.1 * expect, "{got} vs {expect}");

    let f = random_field(g, 5);
    let full = maximal_set(&f, &set, &radii).unwrap();
    let smallest = maximal_set(&f, &set, &radii[..1]).unwrap();
    let mut parts = vec![f64::NEG_INFINITY; g.points()];
    for w in set.members() {
        for (p, v) in parts.iter_mut().zip(maximal_dir(&f, w, &radii).unwrap().re()) {
            *p = p.max(v);
        }
    }
    for i in 0..g.points() {
        assert!(full.values()[i].re >= smallest.values()[i].re - 1e-12 && smallest.values()[i].re >= -1e-12);
        assert_eq!(full.values()[i].re, parts[i]);
    }
    assert!(maximal_dir(&f, &set.members()[0], &[]).is_err());
}

fn brute_strong(g: &Grid, v: &[f64]) -> Vec<f64> {
    let m = g.side() as i64;
    let sizes: Vec<i64> = (0..=g.depth()).map(|k| 1i64 << k).collect();
    (0..g.points())
        .map(|idx| {
            let (x, y) = ((idx as i64) / m, (idx as i64) % m);
            let mut best = f64::NEG_INFINITY;
            for &a in &sizes {
                for &b in &sizes {
                    let mut s = 0.0;
                    for i in 0..a {
                        for j in 0..b {
                            let (p, q) = ((x + i - a / 2).rem_euclid(m), (y + j - b / 2).rem_euclid(m));
                            s += v[(p * m + q) as usize];
                        }
                    }
                    best = best.max(s / (a * b) as f64);
                }
            }
            best
        })
        .collect()
}

#[test]
fn strong_maximal_examples() {
    let g = Grid::unit(2, 8).unwrap();
    let one = strong_maximal(&Field::constant(g, c(1.0)));
    assert!(one.re().iter().all(|v| (v - 1.0).abs() < 1e-14));
    let f = random_field(g, 77);
    let ms = strong_maximal(&f);
    let oracle = brute_strong(&g, &f.abs());
    for (a, b) in ms.re().iter().zip(&oracle) {
        assert!((a - b).abs() < 1e-12);
    }
    assert!(ms.re().iter().zip(f.abs()).all(|(m, a)| *m >= a));
    let sq = strong_maximal_sq(&f);
    assert!(sq.re().iter().zip(ms.re()).all(|(a, b)| *a >= b - 1e-14));
}

#[test]
fn martingale_examples() {
    let g = Grid::unit(2, 16).unwrap();
    let k = Field::constant(g, c(3.0));
    for j in 0..=g.depth() {
        assert!(dyadic_expect(&k, j, 1).unwrap().max_diff(&k).unwrap() < 1e-14);
    }
    assert!(martingale_sq(&k, 0).unwrap().max_abs() < 1e-14);
    let f = random_field(g, 8);
    for j in 0..=4 {
        for l in 0..=4 {
            let a = dyadic_expect(&dyadic_expect(&f, l, 0).unwrap(), j, 0).unwrap();
            let b = dyadic_expect(&f, j.min(l), 0).unwrap();
            assert!(a.max_diff(&b).unwrap() < 1e-13);
        }
    }
    for seed in 0..10 {
        let f = random_field(g, 100 + seed);
        let lhs = f.sub(&dyadic_expect(&f, 0, 1).unwrap()).unwrap().norm().powi(2);
        let rhs = martingale_sq(&f, 1).unwrap().norm().powi(2);
        assert!((lhs - rhs).abs() < 1e-10 * lhs);
    }
    assert!(dyadic_expect(&f, 5, 0).is_err());
    assert!(dyadic_expect(&f, 0, 2).is_err());
}

#[test]
fn good_lambda_probe() {
    let g = Grid::unit(2, 32).unwrap();
    let zero = cww_probe(&Field::constant(g, c(1.0)), 0.5, 1.0, 0, CwwConstants { a: 1.0, b: 1.0 }).unwrap();
    assert_eq!((zero.lhs, zero.level_set), (0.0, 1.0));
    assert!((zero.rhs - (-1.0f64).exp()).abs() < 1e-15 && !zero.violation);

    let lambdas = [0.1, 0.5, 1.0];
    let gammas = [0.5, 1.0, 2.0];
    let mut training = Vec::new();
    for seed in 0..10 {
        let f = band_limited(g, 1000 + seed, 4);
        for &l in &lambdas {
            for &gm in &gammas {
                training.push(cww_probe(&f, l, gm, 0, CwwConstants { a: 0.0, b: 0.0 }).unwrap());
            }
        }
    }
    let k = calibrate_cww(&training, 2.0);
    let mut violations = 0;
    for seed in 0..100 {
        let f = band_limited(g, seed, 4);
        for &l in &lambdas {
            for &gm in &gammas {
                let o = cww_probe(&f, l, gm, 0, k).unwrap();
                assert!(o.lhs <= o.level_set);
                violations += o.violation as usize;
            }
        }
    }
    assert_eq!(violations, 0, "constants {k:?}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn maximal_operators_sublinear(seed in any::<u64>(), s in -3.0..3.0f64) {
        let g = Grid::unit(2, 16).unwrap();
        let (f, h) = (random_field(g, seed), random_field(g, !seed));
        let set = dirs(&[0.2, 0.9]);
        let radii = dyadic_radii(&g);
        let ops: Vec<Box<dyn Fn(&Field) -> Vec<f64>>> = vec![
            Box::new(|x| maximal_hilbert(x, &set, Convention::Indicator).unwrap().re()),
            Box::new(|x| maximal_set(x, &set, &radii).unwrap().re()),
            Box::new(|x| strong_maximal(x).re()),
        ];
        let sum = f.add(&h).unwrap();
        let scaled = f.scale(c(s));
        for op in &ops {
            let (a, b, ab) = (op(&f), op(&h), op(&sum));
            for i in 0..g.points() {
                prop_assert!(ab[i] <= a[i] + b[i] + 1e-12);
            }
            for (x, y) in op(&scaled).iter().zip(&a) {
                prop_assert!((x - s.abs() * y).abs() <= 1e-12 * (1.0 + y));
            }
        }
    }

    #[test]
    fn maximal_hilbert_monotone_in_set(seed in any::<u64>(), k in 1usize..5) {
        let g = Grid::unit(2, 16).unwrap();
        let f = random_field(g, seed);
        let set = slopes2d(5).unwrap();
        let small = maximal_hilbert(&f, &set.prefix(k), Convention::Sign).unwrap();
        let big = maximal_hilbert(&f, &set, Convention::Sign).unwrap();
        for (a, b) in small.re().iter().zip(big.re()) {
            prop_assert!(*a <= b);
        }
    }
}
