use std::f64::consts::TAU;

use lacuna::grid::{apply_multiplier, forward_transform, inverse_transform, Field, Grid, Spectrum, Symbol};
use lacuna::symbols::{halfspace_symbol, Convention};
use lacuna::directions::Direction;
use num_complex::Complex64;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_field(grid: Grid, seed: u64) -> Field {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    Field::from_fn(grid, |_| Complex64::new(r.random_range(-1.0..1.0), r.random_range(-1.0..1.0))).unwrap()
}

fn rel(a: &Field, b: &Field) -> f64 {
    a.sub(b).unwrap().norm() / b.norm().max(1e-300)
}

#[test]
fn grid_shapes() {
    let g = Grid::new(2, 8, 1.0).unwrap();
    assert_eq!(g.points(), 64);
    let mut f: Vec<i64> = (0..8).map(|k| g.freq(k)).collect();
    f.sort();
    assert_eq!(f, (-4..4).collect::<Vec<_>>());
    let g1 = Grid::unit(1, 4).unwrap();
    let mut f1: Vec<i64> = g1.frequencies().map(|v| v[0]).collect();
    f1.sort();
    assert_eq!(f1, vec![-2, -1, 0, 1]);
    assert_eq!(Grid::unit(3, 16).unwrap().points(), 4096);
    assert_eq!(g.frequencies().next().unwrap(), vec![0, 0]);
}

#[test]
fn bad_grids_rejected() {
    assert!(Grid::unit(2, 6).is_err());
    assert!(Grid::unit(2, 2).is_err());
    assert!(Grid::unit(0, 8).is_err());
    assert!(Grid::unit(5, 8).is_err());
    assert!(Grid::new(2, 8, 0.0).is_err());
    assert!(Grid::new(2, 8, f64::NAN).is_err());
}

#[test]
fn impulse_has_flat_spectrum() {
    let g = Grid::unit(2, 8).unwrap();
    let mut v = vec![Complex64::new(0.0, 0.0); g.points()];
    v[0] = Complex64::new(1.0, 0.0);
    let s = forward_transform(&Field::new(g, v).unwrap());
    let m = 1.0 / (g.points() as f64).sqrt();
    assert!(s.coeffs().iter().all(|z| (z.norm() - m).abs() < 1e-14));
}

#[test]
fn matches_naive_dft() {
    let g = Grid::unit(1, 8).unwrap();
    let f = random_field(g, 5);
    let s = forward_transform(&f);
    for xi in -4i64..4 {
        let direct: Complex64 = f
            .values()
            .iter()
            .enumerate()
            .map(|(j, v)| v * Complex64::from_polar(1.0, -TAU * (xi * j as i64) as f64 / 8.0))
            .sum::<Complex64>()
            / 8f64.sqrt();
        assert!((s.get(&[xi]).unwrap() - direct).norm() < 1e-12, "ξ = {xi}");
    }
}

#[test]
fn trivial_multipliers() {
    let g = Grid::unit(2, 16).unwrap();
    let f = random_field(g, 9);
    let id = apply_multiplier(&f, &Symbol::constant(Complex64::new(1.0, 0.0))).unwrap();
    assert!(rel(&id, &f) < 1e-12);
    let zero = apply_multiplier(&f, &Symbol::constant(Complex64::new(0.0, 0.0))).unwrap();
    assert_eq!(zero.max_abs(), 0.0);
    let h = halfspace_symbol(&Direction::angle2d(0.7), Convention::Indicator);
    let once = apply_multiplier(&f, &h).unwrap();
    assert!(rel(&apply_multiplier(&once, &h).unwrap(), &once) < 1e-12);
}

#[test]
fn nonfinite_symbol_rejected() {
    let g = Grid::unit(2, 8).unwrap();
    let f = random_field(g, 1);
    assert!(apply_multiplier(&f, &Symbol::real("bad", |_| f64::NAN)).is_err());
}

#[test]
fn spectrum_lookup_outside_box() {
    let g = Grid::unit(1, 8).unwrap();
    let s = Spectrum::from_fn(g, |xi| Complex64::new(xi[0] as f64, 0.0)).unwrap();
    assert_eq!(s.get(&[-4]).unwrap().re, -4.0);
    assert!(s.get(&[4]).is_none());
}

#[test]
fn plancherel_many_sizes() {
    let mut count = 0;
    for side in [4usize, 8, 16, 32] {
        for dim in 1..=2 {
            let g = Grid::unit(dim, side).unwrap();
            for seed in 0..125 {
                let f = random_field(g, seed * 31 + side as u64);
                let s = forward_transform(&f);
                assert!((s.norm() - f.norm()).abs() <= 1e-10 * f.norm());
                count += 1;
            }
        }
    }
    assert_eq!(count, 1000);
}

fn wave_symbol(a: f64, b: f64) -> Symbol {
    Symbol::new("wave", move |xi: &[f64]| Complex64::from_polar(1.0 / (1.0 + (a * xi[0]).abs()), b * xi[1]))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn roundtrip(seed in any::<u64>(), side_log in 2u32..6, dim in 1usize..4) {
        let g = Grid::unit(dim, 1 << side_log).unwrap();
        let f = random_field(g, seed);
        prop_assert!(rel(&inverse_transform(&forward_transform(&f)), &f) < 1e-10);
    }

    #[test]
    fn composition_is_product(seed in any::<u64>(), a in 0.0..3.0f64, b in -2.0..2.0f64, c in 0.0..3.0f64) {
        let g = Grid::unit(2, 16).unwrap();
        let f = random_field(g, seed);
        let (m1, m2) = (wave_symbol(a, b), wave_symbol(c, -b / 3.0));
        let two = apply_multiplier(&apply_multiplier(&f, &m1).unwrap(), &m2).unwrap();
        let once = apply_multiplier(&f, &m1.product(&m2)).unwrap();
        prop_assert!(rel(&two, &once) < 1e-10);
    }

    #[test]
    fn linearity(seed in any::<u64>(), ar in -3.0..3.0f64, ai in -3.0..3.0f64, b in -3.0..3.0f64) {
        let g = Grid::unit(2, 8).unwrap();
        let (f, h) = (random_field(g, seed), random_field(g, seed ^ 0x5555));
        let (a, b) = (Complex64::new(ar, ai), Complex64::new(b, 0.0));
        let m = wave_symbol(1.0, 0.5);
        let lhs = apply_multiplier(&f.scale(a).add(&h.scale(b)).unwrap(), &m).unwrap();
        let rhs = apply_multiplier(&f, &m).unwrap().scale(a).add(&apply_multiplier(&h, &m).unwrap().scale(b)).unwrap();
        prop_assert!(lhs.max_diff(&rhs).unwrap() < 1e-10 * (1.0 + lhs.max_abs()));
    }
}
