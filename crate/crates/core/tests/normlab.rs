use lacuna::directions::{cell_of, slopes2d, Direction, DirectionSet, Dissection, Pair};
use lacuna::grid::{Grid, Symbol};
use lacuna::normlab::*;
use lacuna::symbols::{halfspace_symbol, kappa_value, Convention, Cutoff};
use num_complex::Complex64;
use proptest::prelude::*;

fn cfg(seed: u64) -> EstimatorConfig {
    EstimatorConfig { iters: 300, restarts: 8, tol: 1e-12, seed }
}

fn planar(theta: f64) -> Direction {
    Direction::new(vec![theta.cos(), theta.sin()]).unwrap()
}

#[test]
fn single_projection_has_norm_one() {
    let g = Grid::unit(2, 16).unwrap();
    for conv in [Convention::Indicator, Convention::Sign] {
        let set = DirectionSet::new(2, vec![planar(0.3)]).unwrap();
        let fam = MultiplierFamily::halfspaces(g, &set, conv).unwrap();
        let r = estimate_maximal_norm(&fam, &cfg(1), None).unwrap();
        assert!((r.estimate - 1.0).abs() < 1e-6, "{conv:?}: {}", r.estimate);
    }
}

#[test]
fn two_directions_match_brute_force() {
    let g = Grid::unit(2, 4).unwrap();
    // fewer restarts stall in local optima of the indicator family on this grid
    let many = EstimatorConfig { iters: 500, restarts: 128, tol: 1e-12, seed: 5 };
    for (a, b) in [(0.2, 1.9), (0.5, 1.0), (0.1, 2.5)] {
        let set = DirectionSet::new(2, vec![planar(a), planar(b)]).unwrap();
        let fam = MultiplierFamily::halfspaces(g, &set, Convention::Indicator).unwrap();
        let exact = brute_force_selection_norm(&fam, 1 << 16).unwrap();
        let est = estimate_maximal_norm(&fam, &many, None).unwrap().estimate;
        assert!(est <= exact + 1e-9, "estimate {est} above the exact norm {exact}");
        assert!((est - exact).abs() < 1e-6, "estimate {est}, exact {exact}");
    }
    let set = DirectionSet::new(2, vec![planar(0.2), planar(1.9)]).unwrap();
    let fam = MultiplierFamily::halfspaces(g, &set, Convention::Indicator).unwrap();
    assert!(matches!(brute_force_selection_norm(&fam, 1000), Err(lacuna::error::Error::Budget(_))));
}

#[test]
fn dense_and_multiplier_families_agree() {
    let g = Grid::unit(2, 4).unwrap();
    let set = DirectionSet::new(2, vec![planar(0.2), planar(1.9)]).unwrap();
    let fam = MultiplierFamily::halfspaces(g, &set, Convention::Sign).unwrap();
    let dense = DenseFamily::from_family(&fam).unwrap();
    let f: Vec<Complex64> = (0..16).map(|i| Complex64::new((i as f64).sin(), (i as f64 * 0.7).cos())).collect();
    assert!((maximal_ratio(&fam, &f) - maximal_ratio(&dense, &f)).abs() < 1e-12);
}

#[test]
fn witness_attains_the_estimate() {
    let g = Grid::unit(2, 32).unwrap();
    let set = slopes2d(6).unwrap();
    let fam = MultiplierFamily::halfspaces(g, &set, Convention::Sign).unwrap();
    let r = estimate_maximal_norm(&fam, &cfg(2), None).unwrap();
    assert!((maximal_ratio(&fam, &r.witness) - r.estimate).abs() < 1e-10 * r.estimate);
    assert_eq!(r.witness_field().unwrap().grid(), &g);
    assert!(r.trace.iter().all(|&t| t <= r.estimate));
}

#[test]
fn same_seed_same_report() {
    let g = Grid::unit(2, 16).unwrap();
    let set = slopes2d(4).unwrap();
    let fam = MultiplierFamily::halfspaces(g, &set, Convention::Sign).unwrap();
    let a = estimate_maximal_norm(&fam, &cfg(9), None).unwrap();
    let b = estimate_maximal_norm(&fam, &cfg(9), None).unwrap();
    assert_eq!(a, b);
}

#[test]
fn duplicated_members_change_nothing() {
    let g = Grid::unit(2, 16).unwrap();
    let syms: Vec<Symbol> = [0.4, 1.1].iter().map(|&t| halfspace_symbol(&planar(t), Convention::Sign)).collect();
    let mut doubled = syms.clone();
    doubled.extend(syms.iter().cloned());
    let a = MultiplierFamily::from_symbols(g, &syms).unwrap();
    let b = MultiplierFamily::from_symbols(g, &doubled).unwrap();
    assert_eq!(b.symbols().len(), 2);
    assert_eq!(b.origin(), &[0, 1, 0, 1]);
    assert_eq!(b.original_len(), 4);
    let ea = estimate_maximal_norm(&a, &cfg(3), None).unwrap().estimate;
    let eb = estimate_maximal_norm(&b, &cfg(3), None).unwrap().estimate;
    assert_eq!(ea, eb);
}

#[test]
fn nested_growth_is_monotone() {
    let g = Grid::unit(2, 32).unwrap();
    let set = slopes2d(16).unwrap();
    let (table, reports) =
        growth_experiment(&set, &[1, 2, 4, 8, 16], &g, Convention::Sign, &EstimatorConfig { iters: 60, ..cfg(4) }).unwrap();
    let est = table.estimates();
    assert!((est[0] - 1.0).abs() < 1e-6);
    assert!(est.windows(2).all(|w| w[1] >= w[0]), "{est:?}");
    assert_eq!(reports.len(), 5);
    assert_eq!(reports[2].subset.as_ref().unwrap().len(), 4);
    let mut out = Vec::new();
    table.write_csv(&mut out).unwrap();
    assert_eq!(String::from_utf8(out).unwrap().lines().count(), 6);
    assert!(growth_experiment(&set, &[4, 2], &g, Convention::Sign, &cfg(0)).is_err());
    assert!(growth_experiment(&set, &[32], &g, Convention::Sign, &cfg(0)).is_err());
}

#[test]
fn growth_fits() {
    let pts: Vec<(usize, usize, f64)> = [2usize, 4, 8, 16].iter().map(|&n| (n, n, 0.7 * (n as f64).ln().sqrt())).collect();
    let t = GrowthTable::from_estimates(&pts);
    assert!((t.sqrt_log.c - 0.7).abs() < 1e-14 && t.sqrt_log.residual < 1e-14);
    assert!(t.log.residual > 0.0);
    for r in &t.rows {
        assert!((r.sqrt_log_model - r.estimate).abs() < 1e-14);
    }
    let fit = fit_through_origin(&[1.0, 2.0], &[1.0, 3.0]);
    assert!((fit.c - 1.4).abs() < 1e-15 && (fit.residual - 0.2f64.sqrt()).abs() < 1e-15);
    assert_eq!(fit_through_origin(&[0.0], &[1.0]).c, 0.0);
}

#[test]
fn theta_probe_examples() {
    let g = Grid::unit(2, 16).unwrap();
    let set = slopes2d(3).unwrap();
    let one = theta_probe(&set, None, 1, 3, &g, Convention::Sign, &cfg(6)).unwrap();
    assert!((one.value - 1.0).abs() < 1e-6);
    assert_eq!(one.best_subset.len(), 1);
    let all = theta_probe(&set, None, 3, 5, &g, Convention::Sign, &cfg(6)).unwrap();
    assert_eq!((all.sampled, all.best_subset.clone()), (1, vec![0, 1, 2]));
    assert!(all.value >= one.value - 1e-9);
    let w = vec![2.0; g.points()];
    let weighted = theta_probe(&set, Some(&w), 1, 3, &g, Convention::Sign, &cfg(6)).unwrap();
    assert!((weighted.value - 1.0).abs() < 1e-6);
    assert!(theta_probe(&set, None, 0, 1, &g, Convention::Sign, &cfg(0)).is_err());
}

#[test]
fn counterexample_cells() {
    let spec = counterexample_build(2, 4).unwrap();
    assert_eq!((spec.directions.len(), spec.cells.len(), spec.factors.len()), (16, 16, 2));
    let diss = Dissection::canonical(4);
    for ((w, c), m) in spec.directions.members().iter().zip(&spec.cells).zip(&spec.tuples) {
        assert_eq!(&cell_of(w, &diss).unwrap(), c);
        assert_eq!(c.get(Pair::new(0, 1).unwrap()), m[0] as i64 - 1);
        assert_eq!(c.get(Pair::new(2, 3).unwrap()), m[1] as i64 - 1);
    }
    for i in 0..spec.cells.len() {
        for j in 0..i {
            assert_ne!(spec.cells[i], spec.cells[j]);
        }
    }
    assert_eq!(counterexample_build(3, 3).unwrap().cells.len(), 27);
    assert!(counterexample_build(1, 1).is_err());
    assert!(matches!(counterexample_build(4, 32), Err(lacuna::error::Error::Budget(_))));
    let cuts = counterexample_cutoffs(4);
    assert_eq!(cuts.len(), 6);
    assert_eq!(cuts[0], Cutoff::Plus);
}

#[test]
fn tensor_product_factorizes() {
    let t = tensor_consistency(2, 16, 7).unwrap();
    assert!(t.norm_product > 0.1, "{t:?}");
    assert!(t.composition_gap < 1e-8, "{t:?}");
    assert!(t.sup_gap < 1e-8, "{t:?}");
    assert!((t.norm_direct - t.norm_product).abs() < 1e-8 * t.norm_product, "{t:?}");
    assert!(tensor_consistency(2, 8, 7).is_err());
}

#[test]
fn model_outer_is_a_power_of_the_factor() {
    let g = Grid::unit(2, 32).unwrap();
    let one = model_outer_norm(1, 4, &g, &cfg(1), None).unwrap();
    assert_eq!(one.estimate, one.factor_norm);
    let two = model_outer_norm(2, 4, &g, &cfg(1), None).unwrap();
    assert!((two.estimate - two.factor_norm.powi(2)).abs() < 1e-15);
    assert!(one.factor_norm >= 1.0 - 1e-9);
}

#[test]
fn single_multiplier_norm_is_its_sup() {
    let g = Grid::unit(2, 32).unwrap();
    let p = Pair::new(0, 1).unwrap();
    let r = two_sided_2d_probe(1, &g, Cutoff::Plus, &cfg(8), None).unwrap();
    assert!(r.ratio.is_none());
    let keep = quadrant_annulus(&g);
    let mut sup: f64 = 0.0;
    g.for_each_frequency(|_, xi| {
        if keep(xi) {
            sup = sup.max(kappa_value(xi, p, 0, Cutoff::Plus, 2).abs());
        }
    });
    assert!(r.estimate <= sup + 1e-12 && r.estimate >= 0.99 * sup, "{} vs {sup}", r.estimate);
    let two = two_sided_2d_probe(4, &g, Cutoff::Plus, &cfg(8), None).unwrap();
    assert!((two.ratio.unwrap() - two.estimate / 4f64.ln().sqrt()).abs() < 1e-15);
}

#[test]
fn positive_estimator_examples() {
    let g = Grid::unit(2, 16).unwrap();
    let set = slopes2d(3).unwrap();
    let radii = lacuna::operators::dyadic_radii(&g);
    let fam = lacuna::weights::segment_family(&g, &set, &radii).unwrap();
    let r = estimate_positive_norm(&fam, 2.0, None, &cfg(1)).unwrap();
    assert!(r.estimate >= 1.0 - 1e-9);
    assert!((maximal_ratio(&fam, &r.witness) - r.estimate).abs() < 1e-10 * r.estimate);
    assert!(estimate_positive_norm(&fam, 1.0, None, &cfg(1)).is_err());
    assert!(estimate_positive_norm(&fam, 2.0, Some(&[1.0]), &cfg(1)).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn estimates_are_lower_bounds(seed in 0u64..1000, t1 in 0.0..3.1f64, t2 in 0.0..3.1f64) {
        prop_assume!((t1 - t2).abs() > 1e-3);
        let g = Grid::unit(2, 4).unwrap();
        let set = DirectionSet::new(2, vec![planar(t1), planar(t2)]).unwrap();
        let fam = MultiplierFamily::halfspaces(g, &set, Convention::Sign).unwrap();
        let exact = brute_force_selection_norm(&fam, 1 << 16).unwrap();
        let est = estimate_maximal_norm(&fam, &EstimatorConfig { iters: 50, restarts: 2, tol: 1e-9, seed }, None).unwrap();
        prop_assert!(est.estimate <= exact + 1e-9);
        prop_assert!(est.estimate >= 1.0 - 1e-9);
    }
}
