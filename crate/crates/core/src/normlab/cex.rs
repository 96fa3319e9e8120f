use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{estimate_maximal_norm, EstimatorConfig, MultiplierFamily, NormReport, OperatorFamily};
use crate::directions::{cell_of, pow2, sigma_set, Basis, CellIndex, Direction, DirectionSet, Dissection, Pair};
use crate::error::{invalid, Error, Result};
use crate::grid::{apply_multiplier, inverse_transform, Field, Grid, Spectrum, Symbol};
use crate::symbols::{kappa_value, Cutoff};

/// Field with independent Gaussian Fourier coefficients on the frequencies kept by `keep`.
pub fn random_restricted_field(grid: &Grid, seed: u64, keep: impl Fn(&[f64]) -> bool) -> Result<Field> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut coeffs = vec![Complex64::new(0.0, 0.0); grid.points()];
    grid.for_each_frequency(|i, xi| {
        let z = Complex64::new(StandardNormal.sample(&mut rng), StandardNormal.sample(&mut rng));
        if keep(xi) {
            coeffs[i] = z;
        }
    });
    Ok(inverse_transform(&Spectrum::new(*grid, coeffs)?))
}

/// Quadrant {ξ₁ > 0, ξ₂ < 0} intersected with the annulus 0 < |ξ| < M/2.
pub fn quadrant_annulus(grid: &Grid) -> impl Fn(&[f64]) -> bool + Send + Sync + 'static {
    let r = grid.side() as f64 / 2.0;
    move |xi: &[f64]| xi[0] > 0.0 && xi[1] < 0.0 && xi[0].hypot(xi[1]) < r
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FactorSpec {
    pub k: usize,
    /// Coordinate pair (2k−1, 2k), 0-based.
    pub pair: Pair,
    /// Frequency support lies in ξ_{2k−1} > 0, ξ_{2k} < 0.
    pub quadrant: [i8; 2],
    /// log₂ of the annulus radii (−3kM, −(3k−1)M); realized at unit scale.
    pub annulus_log2: (i64, i64),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CounterexampleSpec {
    pub d: usize,
    pub n: usize,
    pub directions: DirectionSet,
    /// (m₁, …, m_d) for each direction, m_k ∈ 1..=N.
    pub tuples: Vec<Vec<usize>>,
    pub cells: Vec<CellIndex>,
    pub factors: Vec<FactorSpec>,
    /// Annulus separation parameter M of the factor bookkeeping.
    pub separation: i64,
}

/// Directions x_{2k−1} = 2^{−2kN}, x_{2k} = 2^{−2kN−m_k} in S^{2d−1}, their cells, and factor specs.
pub fn counterexample_build(d: usize, n: usize) -> Result<CounterexampleSpec> {
    if d == 0 || n < 2 {
        return invalid("counterexample needs d ≥ 1 and N ≥ 2");
    }
    if d > 2 && n.checked_pow(d as u32).is_none_or(|c| c > 1_000_000) {
        return Err(Error::Budget(format!("{n}^{d} cells")));
    }
    if (2 * d * n + n) as i64 > 1000 {
        return Err(Error::Underflow(format!("2^-{} is below the float range", 2 * d * n + n)));
    }
    if n <= 10 * d {
        log::warn!("N = {n} is below the asymptotic range N > 10d");
    }
    let dim = 2 * d;
    let diss = Dissection::canonical(dim);
    let total = n.pow(d as u32);
    let mut members = Vec::with_capacity(total);
    let mut tuples = Vec::with_capacity(total);
    let mut cells = Vec::with_capacity(total);
    for idx in 0..total {
        let mut rest = idx;
        let mut m = vec![0usize; d];
        for k in (0..d).rev() {
            m[k] = rest % n + 1;
            rest /= n;
        }
        let mut raw = vec![0.0; dim];
        for k in 1..=d {
            let base = -2 * (k as i64) * n as i64;
            raw[2 * k - 2] = pow2(base);
            raw[2 * k - 1] = pow2(base - m[k - 1] as i64);
        }
        let w = Direction::exact(raw)?;
        cells.push(cell_of(&w, &diss)?);
        members.push(w);
        tuples.push(m);
    }
    let separation = 2 * n as i64;
    let factors = (1..=d)
        .map(|k| {
            Ok(FactorSpec {
                k,
                pair: Pair::new(2 * k - 2, 2 * k - 1)?,
                quadrant: [1, -1],
                annulus_log2: (-3 * k as i64 * separation, -(3 * k as i64 - 1) * separation),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let directions = DirectionSet::new(dim, members)?.with_basis(Basis::canonical(dim))?;
    Ok(CounterexampleSpec { d, n, directions, tuples, cells, factors, separation })
}

/// Cutoff choice for the full composition: + on pairs of opposite parity, − on
/// pairs of equal parity (where the frequency signs agree and κ⁻ vanishes).
pub fn counterexample_cutoffs(dim: usize) -> Vec<Cutoff> {
    sigma_set(dim)
        .into_iter()
        .map(|p| if (p.first + p.second) % 2 == 0 { Cutoff::Minus } else { Cutoff::Plus })
        .collect()
}

/// {Id − K⁺_{(1,2),ℓ}} over the given ℓ, restricted to the quadrant annulus.
pub fn factor_family(grid: &Grid, ells: &[i64], dim_param: usize) -> Result<MultiplierFamily> {
    if grid.dim() != 2 {
        return invalid("factor families live on planar grids");
    }
    let p = Pair::new(0, 1)?;
    let symbols: Vec<Symbol> = ells
        .iter()
        .map(|&l| Symbol::real(format!("1-k+@{l}"), move |xi| 1.0 - kappa_value(xi, p, l, Cutoff::Plus, dim_param)))
        .collect();
    MultiplierFamily::from_symbols(*grid, &symbols)?.restricted(quadrant_annulus(grid))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelOuterReport {
    pub d: usize,
    pub n: usize,
    pub factor_norm: f64,
    pub estimate: f64,
    pub factor: NormReport,
}

/// ∏_k ‖sup_m |(Id − K⁺_{(2k−1,2k),ℓ_m}) ·|‖ evaluated factor-wise. The factors are
/// dilates of one another, so one planar estimate serves every k. The indices ℓ_m
/// are the cell entries of the built directions (ℓ = m − 1).
pub fn model_outer_norm(
    d: usize,
    n: usize,
    grid: &Grid,
    cfg: &EstimatorConfig,
    warm: Option<&[Complex64]>,
) -> Result<ModelOuterReport> {
    if d == 0 || n == 0 {
        return invalid("model_outer_norm needs d, N ≥ 1");
    }
    let ells: Vec<i64> = (1..=n as i64).map(|m| m - 1).collect();
    let fam = factor_family(grid, &ells, 2 * d)?;
    let factor = estimate_maximal_norm(&fam, cfg, warm)?;
    let factor_norm = factor.estimate;
    Ok(ModelOuterReport { d, n, factor_norm, estimate: factor_norm.powi(d as i32), factor })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TwoSidedReport {
    pub n: usize,
    pub estimate: f64,
    /// estimate / √(ln N); undefined for N = 1.
    pub ratio: Option<f64>,
    pub report: NormReport,
}

/// Lower estimate of ‖sup_{ℓ<N} |K^ε_{(1,2),ℓ} ·|‖ on quadrant-annulus fields.
pub fn two_sided_2d_probe(
    n: usize,
    grid: &Grid,
    eps: Cutoff,
    cfg: &EstimatorConfig,
    warm: Option<&[Complex64]>,
) -> Result<TwoSidedReport> {
    if grid.dim() != 2 || n == 0 {
        return invalid("two_sided_2d_probe needs a planar grid and N ≥ 1");
    }
    let p = Pair::new(0, 1)?;
    let symbols: Vec<Symbol> = (0..n as i64)
        .map(|l| Symbol::real(format!("k{}@{l}", eps.tag()), move |xi| kappa_value(xi, p, l, eps, 2)))
        .collect();
    let fam = MultiplierFamily::from_symbols(*grid, &symbols)?.restricted(quadrant_annulus(grid))?;
    let report = estimate_maximal_norm(&fam, cfg, warm)?;
    let ratio = (n > 1).then(|| report.estimate / (n as f64).ln().sqrt());
    Ok(TwoSidedReport { n, estimate: report.estimate, ratio, report })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TensorCheck {
    /// max over 𝕃 of the pointwise gap between the four-dimensional product multiplier
    /// applied to f₁ ⊗ f₂ and the product of the planar factor outputs, relative to the
    /// largest output value
    pub composition_gap: f64,
    /// same for the suprema over 𝕃
    pub sup_gap: f64,
    pub norm_direct: f64,
    pub norm_product: f64,
}

/// Separation-of-variables check for d = 2: the multiplier
/// ∏_k (1 − κ⁺_{(2k−1,2k),ℓ_k}) on the 4-torus applied to f₁ ⊗ f₂ against factor-wise
/// evaluation, with f₁, f₂ random fields on the quadrant annulus.
pub fn tensor_consistency(n: usize, side: usize, seed: u64) -> Result<TensorCheck> {
    if side < 16 {
        return invalid("tensor check needs side ≥ 16");
    }
    let spec = counterexample_build(2, n)?;
    let g2 = Grid::unit(2, side)?;
    let g4 = Grid::unit(4, side)?;
    let f1 = random_restricted_field(&g2, seed, quadrant_annulus(&g2))?;
    let f2 = random_restricted_field(&g2, seed ^ 0x9e37_79b9, quadrant_annulus(&g2))?;
    let big: Vec<Complex64> =
        f1.values().iter().flat_map(|a| f2.values().iter().map(move |b| a * b)).collect();
    let big = Field::new(g4, big)?;
    let (p12, p34) = (Pair::new(0, 1)?, Pair::new(2, 3)?);
    let factor = |f: &Field, l: i64| {
        apply_multiplier(f, &Symbol::real("factor", move |xi| 1.0 - kappa_value(xi, p12, l, Cutoff::Plus, 4)))
    };
    let np = g2.points();
    let mut sup_direct = vec![0.0f64; g4.points()];
    let mut s1 = vec![0.0f64; np];
    let mut s2 = vec![0.0f64; np];
    let mut gaps = Vec::with_capacity(spec.cells.len());
    let mut scale: f64 = 0.0;
    for cell in &spec.cells {
        let (l1, l2) = (cell.get(p12), cell.get(p34));
        let product = Symbol::real("product", move |xi| {
            (1.0 - kappa_value(xi, p12, l1, Cutoff::Plus, 4)) * (1.0 - kappa_value(xi, p34, l2, Cutoff::Plus, 4))
        });
        let direct = apply_multiplier(&big, &product)?;
        let a = factor(&f1, l1)?;
        let b = factor(&f2, l2)?;
        let mut gap: f64 = 0.0;
        for (i, z) in direct.values().iter().enumerate() {
            let prod = a.values()[i / np] * b.values()[i % np];
            gap = gap.max((z - prod).norm());
            scale = scale.max(z.norm());
            sup_direct[i] = sup_direct[i].max(z.norm());
        }
        gaps.push(gap);
        for (s, z) in s1.iter_mut().zip(a.values()) {
            *s = s.max(z.norm());
        }
        for (s, z) in s2.iter_mut().zip(b.values()) {
            *s = s.max(z.norm());
        }
    }
    if !(scale > 0.0) {
        return invalid("the factors annihilate the test functions");
    }
    let composition_gap = gaps.iter().fold(0.0f64, |m, g| m.max(*g)) / scale;
    let mut sup_gap: f64 = 0.0;
    for (i, v) in sup_direct.iter().enumerate() {
        sup_gap = sup_gap.max((v - s1[i / np] * s2[i % np]).abs() / scale);
    }
    let l2 = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let norm_direct = l2(&sup_direct) / big.norm();
    let norm_product = (l2(&s1) / f1.norm()) * (l2(&s2) / f2.norm());
    Ok(TensorCheck { composition_gap, sup_gap, norm_direct, norm_product })
}

/// Selection-frozen evaluation of a family on a given field, for reporting.
pub fn maximal_of(family: &dyn OperatorFamily, f: &Field) -> Vec<f64> {
    family.maximal(f.values())
}
