//! The identity suite behind `lacuna verify`: exact symbol identities and
//! small-grid decomposition checks, each with a tolerance.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::decomposition::{check_inclusion, inclusion_exclusion_residual, split_residual};
use crate::directions::{cell_of, CellIndex, Direction, Dissection};
use crate::error::Result;
use crate::grid::{apply_multiplier, Field, Grid};
use crate::symbols::{halfspace_symbol, lp_p, phi_minus, phi_plus, Convention};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl Check {
    fn new(name: &str, value: f64, tolerance: f64) -> Check {
        Check { name: name.into(), value, tolerance, pass: value <= tolerance }
    }
}

fn positive_direction(r: &mut ChaCha8Rng, n: usize) -> Result<Direction> {
    let v: Vec<f64> = (0..n).map(|_| 0.05 + r.random::<f64>()).collect();
    Direction::new(v)
}

fn gaussian_field(grid: Grid, r: &mut ChaCha8Rng) -> Result<Field> {
    Field::from_fn(grid, |_| {
        num_complex::Complex64::new(StandardNormal.sample(&mut *r), StandardNormal.sample(&mut *r))
    })
}

pub fn identity_suite(seed: u64) -> Result<Vec<Check>> {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();

    let g3 = Grid::unit(3, 8)?;
    let mut ie: f64 = 0.0;
    for _ in 0..5 {
        let cell = CellIndex::new(3, (0..3).map(|_| r.random_range(-2..6)).collect())?;
        ie = ie.max(inclusion_exclusion_residual(&cell, &g3)?);
    }
    out.push(Check::new("inclusion-exclusion residual", ie, 1e-12));

    let mut split: f64 = 0.0;
    for _ in 0..1000 {
        let n = r.random_range(1..6usize);
        let x = r.random_range(-2.0 * (n as f64 + 1.0)..1.0);
        let (a, b) = (phi_plus(n, x), phi_minus(n, x));
        split = split.max(((1.0 - a * b) - ((1.0 - a) + (1.0 - b))).abs());
    }
    out.push(Check::new("cutoff split 1 - phi+ phi- = (1 - phi+) + (1 - phi-)", split, 1e-15));

    let mut lp: f64 = 0.0;
    for _ in 0..1000 {
        let x = 10f64.powf(r.random_range(-5.0..5.0));
        let s: f64 = (-50..=50).map(|t| lp_p((-t as f64).exp2() * x)).sum();
        lp = lp.max((s - 1.0).abs());
    }
    out.push(Check::new("Littlewood-Paley partition of unity", lp, 1e-12));

    let mut missed = 0usize;
    for (n, side) in [(2usize, 16usize), (3, 8)] {
        let grid = Grid::unit(n, side)?;
        let diss = Dissection::canonical(n);
        for _ in 0..50 {
            let w = positive_direction(&mut r, n)?;
            missed += check_inclusion(&w, &cell_of(&w, &diss)?, &grid)?.len();
        }
    }
    out.push(Check::new("cone frequencies outside every wedge", missed as f64, 0.0));

    let mut dec: f64 = 0.0;
    for _ in 0..3 {
        let w = positive_direction(&mut r, 3)?;
        let cell = cell_of(&w, &Dissection::canonical(3))?;
        let f = gaussian_field(g3, &mut r)?;
        dec = dec.max(split_residual(&f, &w, &cell)?);
    }
    out.push(Check::new("Hilbert transform decomposition residual", dec, 1e-12));

    let g2 = Grid::unit(2, 16)?;
    let mut proj: f64 = 0.0;
    for _ in 0..10 {
        let w = Direction::angle2d(r.random_range(0.0..std::f64::consts::TAU));
        let f = gaussian_field(g2, &mut r)?;
        let h = halfspace_symbol(&w, Convention::Indicator);
        let hf = apply_multiplier(&f, &h)?;
        proj = proj.max(apply_multiplier(&hf, &h)?.sub(&hf)?.norm() / f.norm());
    }
    out.push(Check::new("half-space projection idempotence", proj, 1e-12));
    Ok(out)
}
