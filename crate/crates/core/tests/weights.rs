use lacuna::directions::{nsw_set, Basis, Direction, DirectionSet};
use lacuna::grid::{Field, Grid};
use lacuna::normlab::{estimate_positive_norm, EstimatorConfig};
use lacuna::operators::{dyadic_radii, maximal_set};
use lacuna::weights::*;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::TAU;

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * b.abs().max(1.0)
}

fn power(grid: Grid, a: f64, axis: usize) -> Weight {
    Weight::from_fn(grid, |x| (1.0 + (TAU * x[axis]).sin().abs()).powf(a)).unwrap()
}

fn cfg() -> EstimatorConfig {
    EstimatorConfig { iters: 60, restarts: 3, tol: 1e-9, seed: 1 }
}

#[test]
fn dual_weight_examples() {
    let g = Grid::unit(2, 8).unwrap();
    let one = Weight::constant(g, 1.0).unwrap();
    assert!(dual_weight(&one, 3.0).unwrap().values().iter().all(|&v| v == 1.0));
    let w = power(g, 1.5, 0);
    let d = dual_weight(&w, 2.0).unwrap();
    assert!(d.values().iter().zip(w.values()).all(|(a, b)| close(*a, 1.0 / b, 1e-14)));
    for p in [1.5, 2.0, 4.0] {
        let q = p / (p - 1.0);
        let back = dual_weight(&dual_weight(&w, p).unwrap(), q).unwrap();
        assert!(back.values().iter().zip(w.values()).all(|(a, b)| close(*a, *b, 1e-12)));
    }
    assert!(dual_weight(&w, 1.0).is_err());
}

#[test]
fn weights_are_floored_and_validated() {
    let g = Grid::unit(1, 4).unwrap();
    let w = Weight::new(g, vec![0.0, 1.0, 2.0, 3.0]).unwrap();
    assert_eq!(w.values()[0], WEIGHT_FLOOR);
    assert!(Weight::new(g, vec![1.0, f64::NAN, 1.0, 1.0]).is_err());
    assert!(Weight::new(g, vec![1.0; 3]).is_err());
}

#[test]
fn ap_examples() {
    let g = Grid::unit(2, 32).unwrap();
    let set = nsw_set(0.5, &[1.0, 2.0], 4).unwrap();
    let fam = SegmentFamily::dyadic(&g, &set, 4).unwrap();
    let one = Weight::constant(g, 1.0).unwrap();
    for p in [1.0, 1.5, 2.0, 3.0] {
        assert!(close(ap_constant(&one, &fam, p).unwrap(), 1.0, 1e-12));
    }
    let canon = SegmentFamily::new(4, dyadic_radii(&g), Basis::canonical(2).vectors().iter().map(|v| Direction::new(v.clone()).unwrap()).collect()).unwrap();
    let w = Weight::from_fn(g, |x| 1.0 + 3.0 * (TAU * x[0]).cos().powi(2) + (TAU * x[1]).sin().abs()).unwrap();
    assert!(ap_constant(&w, &canon, 2.0).unwrap() >= 1.0);

    let line = Grid::unit(1, 64).unwrap();
    let step = Weight::from_fn(line, |x| if x[0] < 0.5 { 1.0 } else { 4.0 }).unwrap();
    let v = ap_segment_value(&step, 0, &Direction::axis(1, 0), 0.5, 2.0).unwrap();
    assert!(close(v, 25.0 / 16.0, 1e-12), "{v}");
}

#[test]
fn a1_examples() {
    let g = Grid::unit(2, 16).unwrap();
    let set = nsw_set(0.5, &[1.0, 2.0], 3).unwrap();
    let radii = dyadic_radii(&g);
    assert!(close(a1_constant(&Weight::constant(g, 2.0).unwrap(), &set, &radii).unwrap(), 1.0, 1e-12));
    assert!(a1_constant(&power(g, 2.0, 1), &set, &radii).unwrap() >= 1.0 - 1e-12);

    // an impulse of height 9 seen from the next cell along e₁: 1 + 9/4
    let mut v = vec![1.0; g.points()];
    v[0] = 10.0;
    let w = Weight::new(g, v).unwrap();
    let e1 = DirectionSet::new(2, vec![Direction::axis(2, 0)]).unwrap();
    let a1 = a1_constant(&w, &e1, &radii).unwrap();
    assert!(close(a1, 3.25, 1e-12), "{a1}");
    let m = maximal_set(&weight_field(&w), &e1, &radii).unwrap();
    let ratios: Vec<f64> = m.re().iter().zip(w.values()).map(|(a, b)| a / b).collect();
    let arg = (0..ratios.len()).max_by(|&i, &j| ratios[i].total_cmp(&ratios[j])).unwrap();
    assert!(arg == 16 || arg == 15 * 16, "maximized at {arg}");
}

#[test]
fn rubio_de_francia_examples() {
    let g = Grid::unit(2, 16).unwrap();
    let set = nsw_set(0.5, &[1.0, 2.0], 3).unwrap();
    let radii = dyadic_radii(&g);
    let zero = rubio_de_francia(&Field::zeros(g), &set, &radii, 1.5, 5).unwrap();
    assert!(zero.value.iter().all(|&v| v == 0.0));

    let mut r = ChaCha8Rng::seed_from_u64(4);
    let gv: Vec<f64> = (0..g.points()).map(|_| r.random::<f64>().powi(3)).collect();
    let gf = Field::from_real(g, &gv).unwrap();
    let k0 = rubio_de_francia(&gf, &set, &radii, 1.5, 0).unwrap();
    assert_eq!(k0.value, gv);

    let fam = segment_family(&g, &set, &radii).unwrap();
    let norm = estimate_positive_norm(&fam, 2.0, None, &cfg()).unwrap().estimate;
    assert!(norm >= 1.0 - 1e-9);
    let maj = rubio_de_francia(&gf, &set, &radii, norm, 20).unwrap();
    assert!(maj.value.iter().zip(&gv).all(|(e, x)| e >= x));
    let l2 = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    assert!(l2(&maj.value) <= 2.0 * l2(&gv) * (1.0 + 1e-3));
    let me = maximal_set(&Field::from_real(g, &maj.value).unwrap(), &set, &radii).unwrap();
    for (i, m) in me.re().iter().enumerate() {
        assert!(*m <= 2.0 * norm * maj.value[i] + 1e-4);
        assert!(*m <= 2.0 * norm * maj.value[i] + maj.tail[i] + 1e-12);
    }
    // the tail halves (at least) with every extra term
    let short = rubio_de_francia(&gf, &set, &radii, norm, 6).unwrap();
    let long = rubio_de_francia(&gf, &set, &radii, norm, 7).unwrap();
    let mx = |v: &[f64]| v.iter().cloned().fold(0.0, f64::max);
    assert!(mx(&long.tail) <= 0.5 * mx(&short.tail) * (1.0 + 1e-12));
    assert!(rubio_de_francia(&gf.scale(num_complex::Complex64::new(-1.0, 0.0)), &set, &radii, norm, 2).is_err());
    assert!(rubio_de_francia(&gf, &set, &radii, 0.0, 2).is_err());
}

#[test]
fn factorization_examples() {
    let g = Grid::unit(2, 16).unwrap();
    let set = nsw_set(0.5, &[1.0, 2.0], 3).unwrap();
    let fam = SegmentFamily::dyadic(&g, &set, 2).unwrap();
    let one = Weight::constant(g, 1.0).unwrap();
    let r = factorization_check(&one, &one, 2.0, 2.0, &fam, 1e-12).unwrap();
    assert!(r.holds && close(r.lhs, 1.0, 1e-12) && close(r.rhs, 1.0, 1e-12));

    let w = power(g, 0.8, 0);
    let u = power(g, -0.5, 1);
    let same = factorization_check(&w, &u, 2.5, 2.5, &fam, 1e-12).unwrap();
    assert!(same.holds && same.lhs <= same.rhs_plain * (1.0 + 1e-12));

    let mut rng = ChaCha8Rng::seed_from_u64(20);
    for _ in 0..20 {
        let p = rng.random_range(1.0..4.0);
        let p0 = rng.random_range(1.1..4.0);
        let w = power(g, rng.random_range(-0.9..0.9), rng.random_range(0..2));
        let u = Weight::from_fn(g, |x| (0.3 + (TAU * x[1]).cos().abs()).powf(-0.4)).unwrap();
        let rep = factorization_check(&w, &u, p, p0, &fam, 1e-10).unwrap();
        assert!(rep.holds, "{rep:?}");
    }
}

#[test]
fn family_monotonicity() {
    let g = Grid::unit(2, 16).unwrap();
    let set = nsw_set(0.5, &[1.0, 2.0], 4).unwrap();
    let w = power(g, 1.5, 0).mul(&power(g, 0.7, 1)).unwrap();
    let big = SegmentFamily::dyadic(&g, &set, 2).unwrap();
    let coarse = SegmentFamily::dyadic(&g, &set, 4).unwrap();
    let fewer = SegmentFamily::new(2, big.radii.clone(), big.directions[..2].to_vec()).unwrap();
    for p in [1.0, 1.5, 3.0] {
        let full = ap_constant(&w, &big, p).unwrap();
        assert!(ap_constant(&w, &coarse, p).unwrap() <= full);
        assert!(ap_constant(&w, &fewer, p).unwrap() <= full);
    }
}

#[test]
fn weighted_probe_examples() {
    let g = Grid::unit(2, 16).unwrap();
    let set = nsw_set(0.5, &[1.0, 2.0], 3).unwrap();
    let radii = dyadic_radii(&g);
    let fam = SegmentFamily::dyadic(&g, &set, 2).unwrap();
    let mut rows = Vec::new();
    for a in [0.0, 1.0, 2.0] {
        rows.push(weighted_norm_probe(&format!("a={a}"), &set, &radii, 2.0, &power(g, a, 0), &fam, &cfg()).unwrap());
    }
    assert!(rows[0].norm >= 1.0 - 1e-9);
    for w in rows.windows(2) {
        assert!(w[1].ap >= w[0].ap);
        assert!(w[1].norm >= w[0].norm * (1.0 - 1e-6), "{} then {}", w[0].norm, w[1].norm);
    }
    let mut out = Vec::new();
    write_probe_csv(&rows, &mut out).unwrap();
    assert_eq!(String::from_utf8(out).unwrap().lines().count(), 4);
}

#[test]
fn weight_family_json() {
    let g = Grid::unit(2, 8).unwrap();
    let fam = WeightFamily::from_json(r#"{"kind":"power","exponents":[0,1,2]}"#).unwrap();
    let ws = fam.realize(&g).unwrap();
    assert_eq!(ws.len(), 3);
    assert!(ws[0].1.values().iter().all(|&v| v == 1.0));
    let step = WeightFamily::from_json(r#"{"kind":"step","heights":[4],"axis":1}"#).unwrap();
    let s = &step.realize(&g).unwrap()[0].1;
    assert_eq!((s.values()[0], s.values()[7]), (1.0, 4.0));
    let custom = WeightFamily::from_json(&format!(r#"{{"kind":"custom-grid","values":[{:?}]}}"#, vec![2.0; 64])).unwrap();
    assert_eq!(custom.realize(&g).unwrap()[0].1.values()[5], 2.0);
    assert!(WeightFamily::from_json(r#"{"kind":"power","exponents":[1],"bogus":0}"#).is_err());
    assert!(WeightFamily::from_json(r#"{"kind":"step","heights":[1],"axis":3}"#).unwrap().realize(&g).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn ap_at_least_one(seed in any::<u64>(), p in 1.0..5.0f64) {
        let g = Grid::unit(2, 8).unwrap();
        let mut r = ChaCha8Rng::seed_from_u64(seed);
        let w = Weight::new(g, (0..64).map(|_| 10f64.powf(r.random_range(-2.0..2.0))).collect()).unwrap();
        let set = nsw_set(0.5, &[1.0, 2.0], 2).unwrap();
        let fam = SegmentFamily::dyadic(&g, &set, 2).unwrap();
        prop_assert!(ap_constant(&w, &fam, p).unwrap() >= 1.0 - 1e-12);
        prop_assert!(a1_constant(&w, &set, &dyadic_radii(&g)).unwrap() >= 1.0 - 1e-12);
    }
}
