//! Operator-norm estimation for maximal operators f ↦ sup_j |T_j f|.
//!
//! The estimator alternates between freezing the pointwise argmax selection
//! (which makes the operator linear) and a power step with the adjoint of
//! the frozen operator. Every reported value is attained by a stored witness,
//! so it is a lower bound for the true norm.

mod cex;
mod growth;

pub use cex::*;
pub use growth::*;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use rustfft::FftDirection;
use serde::{Deserialize, Serialize};

use crate::directions::{Direction, DirectionSet};
use crate::error::{invalid, Error, Result};
use crate::grid::{fft_nd, l2, Field, Grid, SampledSymbol, Symbol};
use crate::symbols::{halfspace_symbol, Convention};

fn zero() -> Complex64 {
    Complex64::new(0.0, 0.0)
}

/// Pointwise maximal selection: `values[x] = T_{index[x]} f(x)`.
#[derive(Clone, Debug)]
pub struct Selection {
    pub values: Vec<Complex64>,
    pub index: Vec<u32>,
}

/// A finite family of linear operators on a fixed finite-dimensional space.
pub trait OperatorFamily: Send + Sync {
    fn points(&self) -> usize;
    fn len(&self) -> usize;
    fn apply_member(&self, j: usize, f: &[Complex64]) -> Vec<Complex64>;
    fn adjoint_member(&self, j: usize, g: &[Complex64]) -> Vec<Complex64>;

    fn grid(&self) -> Option<Grid> {
        None
    }

    fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Argmax over members of |T_j f(x)|; ties go to the lowest index.
    fn select(&self, f: &[Complex64]) -> Selection {
        let mut values = vec![zero(); self.points()];
        let mut index = vec![0u32; self.points()];
        let mut best = vec![f64::NEG_INFINITY; self.points()];
        for j in 0..self.len() {
            for (x, v) in self.apply_member(j, f).into_iter().enumerate() {
                let a = v.norm();
                if a > best[x] {
                    best[x] = a;
                    values[x] = v;
                    index[x] = j as u32;
                }
            }
        }
        Selection { values, index }
    }

    /// Adjoint of the selection-frozen operator: Σ_j T_j^*(1_{sel=j} g).
    fn adjoint_selected(&self, g: &[Complex64], sel: &[u32]) -> Vec<Complex64> {
        let mut acc = vec![zero(); self.points()];
        for j in 0..self.len() {
            if !sel.iter().any(|&s| s as usize == j) {
                continue;
            }
            let masked: Vec<Complex64> =
                g.iter().zip(sel).map(|(v, &s)| if s as usize == j { *v } else { zero() }).collect();
            for (a, v) in acc.iter_mut().zip(self.adjoint_member(j, &masked)) {
                *a += v;
            }
        }
        acc
    }

    fn maximal(&self, f: &[Complex64]) -> Vec<f64> {
        self.select(f).values.iter().map(|z| z.norm()).collect()
    }
}

/// Fourier multipliers on a grid. Members with identical sampled symbols are merged.
#[derive(Clone, Debug)]
pub struct MultiplierFamily {
    grid: Grid,
    symbols: Vec<SampledSymbol>,
    labels: Vec<String>,
    /// original member → merged operator
    origin: Vec<usize>,
}

impl MultiplierFamily {
    pub fn new(grid: Grid, sampled: Vec<(String, SampledSymbol)>) -> Result<MultiplierFamily> {
        if sampled.is_empty() {
            return invalid("empty operator family");
        }
        let mut symbols: Vec<SampledSymbol> = Vec::new();
        let mut labels = Vec::new();
        let mut origin = Vec::new();
        for (label, s) in sampled {
            grid.check_same(s.grid())?;
            match symbols.iter().position(|t| t.values() == s.values()) {
                Some(i) => origin.push(i),
                None => {
                    origin.push(symbols.len());
                    symbols.push(s);
                    labels.push(label);
                }
            }
        }
        Ok(MultiplierFamily { grid, symbols, labels, origin })
    }

    pub fn from_symbols(grid: Grid, symbols: &[Symbol]) -> Result<MultiplierFamily> {
        let sampled =
            symbols.iter().map(|s| Ok((s.label().to_string(), s.sample(&grid)?))).collect::<Result<Vec<_>>>()?;
        MultiplierFamily::new(grid, sampled)
    }

    /// Directional Hilbert transforms {H_ω : ω ∈ set}.
    pub fn halfspaces(grid: Grid, set: &DirectionSet, convention: Convention) -> Result<MultiplierFamily> {
        if set.dims() != grid.dim() {
            return Err(Error::Shape("direction set and grid dimensions differ".into()));
        }
        let symbols: Vec<Symbol> = set.members().iter().map(|w| halfspace_symbol(w, convention)).collect();
        MultiplierFamily::from_symbols(grid, &symbols)
    }

    /// Multiplies every symbol by a {0,1} restriction.
    pub fn restricted(self, keep: impl Fn(&[f64]) -> bool) -> Result<MultiplierFamily> {
        let mut mask = vec![zero(); self.grid.points()];
        self.grid.for_each_frequency(|i, xi| {
            if keep(xi) {
                mask[i] = Complex64::new(1.0, 0.0);
            }
        });
        let mask = SampledSymbol::from_values(self.grid, mask)?;
        let grid = self.grid;
        let sampled = self
            .labels
            .into_iter()
            .zip(self.symbols)
            .map(|(l, s)| Ok((l, s.product(&mask)?)))
            .collect::<Result<Vec<_>>>()?;
        MultiplierFamily::new(grid, sampled)
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    /// Number of members before merging.
    pub fn original_len(&self) -> usize {
        self.origin.len()
    }

    pub fn origin(&self) -> &[usize] {
        &self.origin
    }

    pub fn symbols(&self) -> &[SampledSymbol] {
        &self.symbols
    }
}

impl OperatorFamily for MultiplierFamily {
    fn points(&self) -> usize {
        self.grid.points()
    }

    fn len(&self) -> usize {
        self.symbols.len()
    }

    fn grid(&self) -> Option<Grid> {
        Some(self.grid)
    }

    fn apply_member(&self, j: usize, f: &[Complex64]) -> Vec<Complex64> {
        let mut d = f.to_vec();
        crate::grid::multiply_in_place(&self.grid, &mut d, self.symbols[j].values());
        d
    }

    fn adjoint_member(&self, j: usize, g: &[Complex64]) -> Vec<Complex64> {
        let mut d = g.to_vec();
        let conj: Vec<Complex64> = self.symbols[j].values().iter().map(|z| z.conj()).collect();
        crate::grid::multiply_in_place(&self.grid, &mut d, &conj);
        d
    }

    fn select(&self, f: &[Complex64]) -> Selection {
        let mut spec = f.to_vec();
        fft_nd(&self.grid, &mut spec, FftDirection::Forward);
        let n = self.points();
        let mut values = vec![zero(); n];
        let mut index = vec![0u32; n];
        let mut best = vec![f64::NEG_INFINITY; n];
        let mut buf = vec![zero(); n];
        for (j, s) in self.symbols.iter().enumerate() {
            for ((b, a), m) in buf.iter_mut().zip(&spec).zip(s.values()) {
                *b = a * m;
            }
            fft_nd(&self.grid, &mut buf, FftDirection::Inverse);
            for x in 0..n {
                let a = buf[x].norm();
                if a > best[x] {
                    best[x] = a;
                    values[x] = buf[x];
                    index[x] = j as u32;
                }
            }
        }
        Selection { values, index }
    }

    fn adjoint_selected(&self, g: &[Complex64], sel: &[u32]) -> Vec<Complex64> {
        let n = self.points();
        let mut acc = vec![zero(); n];
        let mut buf = vec![zero(); n];
        for (j, s) in self.symbols.iter().enumerate() {
            if !sel.iter().any(|&k| k as usize == j) {
                continue;
            }
            for ((b, v), &k) in buf.iter_mut().zip(g).zip(sel) {
                *b = if k as usize == j { *v } else { zero() };
            }
            fft_nd(&self.grid, &mut buf, FftDirection::Forward);
            for ((a, b), m) in acc.iter_mut().zip(&buf).zip(s.values()) {
                *a += b * m.conj();
            }
        }
        fft_nd(&self.grid, &mut acc, FftDirection::Inverse);
        acc
    }
}

/// Explicit matrices, used for tiny tori and as an oracle substrate.
#[derive(Clone, Debug)]
pub struct DenseFamily {
    mats: Vec<DMatrix<Complex64>>,
}

impl DenseFamily {
    pub fn new(mats: Vec<DMatrix<Complex64>>) -> Result<DenseFamily> {
        let Some(first) = mats.first() else {
            return invalid("empty operator family");
        };
        let n = first.nrows();
        if mats.iter().any(|m| m.nrows() != n || m.ncols() != n) {
            return Err(Error::Shape("family matrices must be square of one size".into()));
        }
        Ok(DenseFamily { mats })
    }

    /// Fourier multipliers on the torus ∏ Z_{shape[a]} (any sides), with frequencies
    /// in the half-open box and the unitary DFT built by direct summation.
    pub fn multipliers(shape: &[usize], symbols: &[Symbol]) -> Result<DenseFamily> {
        if shape.is_empty() || shape.iter().any(|&s| s == 0) {
            return invalid("torus shape must have positive sides");
        }
        let n: usize = shape.iter().product();
        let coords = |mut i: usize| -> Vec<usize> {
            let mut c = vec![0; shape.len()];
            for a in (0..shape.len()).rev() {
                c[a] = i % shape[a];
                i /= shape[a];
            }
            c
        };
        let freq = |c: &[usize]| -> Vec<f64> {
            c.iter()
                .zip(shape)
                .map(|(&k, &s)| if k < s.div_ceil(2) { k as f64 } else { k as f64 - s as f64 })
                .collect()
        };
        let mut dft = DMatrix::<Complex64>::zeros(n, n);
        for r in 0..n {
            let kr = coords(r);
            for c in 0..n {
                let xc = coords(c);
                let phase: f64 = kr.iter().zip(&xc).zip(shape).map(|((&k, &x), &s)| (k * x) as f64 / s as f64).sum();
                dft[(r, c)] = Complex64::from_polar(1.0 / (n as f64).sqrt(), -2.0 * std::f64::consts::PI * phase);
            }
        }
        let inv = dft.adjoint();
        let mats = symbols
            .iter()
            .map(|s| {
                let diag = DMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
                    n,
                    (0..n).map(|r| s.eval(&freq(&coords(r)))),
                ));
                &inv * diag * &dft
            })
            .collect();
        DenseFamily::new(mats)
    }

    /// Directional Hilbert transforms on a tiny torus.
    pub fn halfspaces(shape: &[usize], directions: &[Direction], convention: Convention) -> Result<DenseFamily> {
        if directions.iter().any(|d| d.dim() != shape.len()) {
            return Err(Error::Shape("direction and torus dimensions differ".into()));
        }
        let symbols: Vec<Symbol> = directions.iter().map(|w| halfspace_symbol(w, convention)).collect();
        DenseFamily::multipliers(shape, &symbols)
    }

    /// Materializes any family.
    pub fn from_family(family: &dyn OperatorFamily) -> Result<DenseFamily> {
        let n = family.points();
        let mats = (0..family.len())
            .map(|j| {
                let mut m = DMatrix::<Complex64>::zeros(n, n);
                for c in 0..n {
                    let mut e = vec![zero(); n];
                    e[c] = Complex64::new(1.0, 0.0);
                    for (r, v) in family.apply_member(j, &e).into_iter().enumerate() {
                        m[(r, c)] = v;
                    }
                }
                m
            })
            .collect();
        DenseFamily::new(mats)
    }

    pub fn matrices(&self) -> &[DMatrix<Complex64>] {
        &self.mats
    }
}

impl OperatorFamily for DenseFamily {
    fn points(&self) -> usize {
        self.mats[0].nrows()
    }

    fn len(&self) -> usize {
        self.mats.len()
    }

    fn apply_member(&self, j: usize, f: &[Complex64]) -> Vec<Complex64> {
        let v = nalgebra::DVector::from_column_slice(f);
        (&self.mats[j] * v).iter().copied().collect()
    }

    fn adjoint_member(&self, j: usize, g: &[Complex64]) -> Vec<Complex64> {
        let v = nalgebra::DVector::from_column_slice(g);
        (self.mats[j].adjoint() * v).iter().copied().collect()
    }
}

/// W^{1/2} T W^{−1/2}: the unweighted norm of the wrapper is the L²(w) norm of T.
pub struct Weighted<F> {
    inner: F,
    sqrt_w: Vec<f64>,
    inv_sqrt_w: Vec<f64>,
}

impl<F: OperatorFamily> Weighted<F> {
    pub fn new(inner: F, weight: &[f64]) -> Result<Weighted<F>> {
        if weight.len() != inner.points() {
            return Err(Error::Shape("weight length differs from the family's space".into()));
        }
        if weight.iter().any(|w| !(*w > 0.0 && w.is_finite())) {
            return invalid("weights must be positive and finite");
        }
        Ok(Weighted {
            inner,
            sqrt_w: weight.iter().map(|w| w.sqrt()).collect(),
            inv_sqrt_w: weight.iter().map(|w| 1.0 / w.sqrt()).collect(),
        })
    }

    pub fn inner(&self) -> &F {
        &self.inner
    }

    fn scaled(v: &[Complex64], s: &[f64]) -> Vec<Complex64> {
        v.iter().zip(s).map(|(z, w)| z * w).collect()
    }
}

impl<F: OperatorFamily> OperatorFamily for Weighted<F> {
    fn points(&self) -> usize {
        self.inner.points()
    }

    fn len(&self) -> usize {
        self.inner.len()
    }

    fn grid(&self) -> Option<Grid> {
        self.inner.grid()
    }

    fn apply_member(&self, j: usize, f: &[Complex64]) -> Vec<Complex64> {
        Self::scaled(&self.inner.apply_member(j, &Self::scaled(f, &self.inv_sqrt_w)), &self.sqrt_w)
    }

    fn adjoint_member(&self, j: usize, g: &[Complex64]) -> Vec<Complex64> {
        Self::scaled(&self.inner.adjoint_member(j, &Self::scaled(g, &self.sqrt_w)), &self.inv_sqrt_w)
    }

    fn select(&self, f: &[Complex64]) -> Selection {
        let mut s = self.inner.select(&Self::scaled(f, &self.inv_sqrt_w));
        s.values = Self::scaled(&s.values, &self.sqrt_w);
        s
    }

    fn adjoint_selected(&self, g: &[Complex64], sel: &[u32]) -> Vec<Complex64> {
        Self::scaled(&self.inner.adjoint_selected(&Self::scaled(g, &self.sqrt_w), sel), &self.inv_sqrt_w)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EstimatorConfig {
    pub iters: usize,
    pub restarts: usize,
    /// Relative change of the ratio below which a restart stops.
    pub tol: f64,
    pub seed: u64,
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        EstimatorConfig { iters: 200, restarts: 8, tol: 1e-6, seed: 0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormReport {
    pub estimate: f64,
    pub witness: Vec<Complex64>,
    pub grid: Option<Grid>,
    pub subset: Option<DirectionSet>,
    pub members: usize,
    pub iterations: usize,
    pub restarts: usize,
    pub seed: u64,
    /// Ratio after each iteration of the winning restart.
    pub trace: Vec<f64>,
}

impl NormReport {
    pub fn witness_field(&self) -> Option<Field> {
        self.grid.and_then(|g| Field::new(g, self.witness.clone()).ok())
    }
}

/// ‖sup_j |T_j f|‖₂ / ‖f‖₂.
pub fn maximal_ratio(family: &dyn OperatorFamily, f: &[Complex64]) -> f64 {
    let n = l2(f);
    if n == 0.0 {
        return 0.0;
    }
    l2(&family.select(f).values) / n
}

fn start_vector(points: usize, seed: u64, restart: usize) -> Vec<Complex64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(restart as u64);
    (0..points)
        .map(|_| Complex64::new(StandardNormal.sample(&mut rng), StandardNormal.sample(&mut rng)))
        .collect()
}

struct Run {
    best: f64,
    witness: Vec<Complex64>,
    iterations: usize,
    trace: Vec<f64>,
}

fn power_run(family: &dyn OperatorFamily, start: Vec<Complex64>, cfg: &EstimatorConfig) -> Run {
    let n0 = l2(&start);
    let mut f: Vec<Complex64> = if n0 > 0.0 { start.iter().map(|z| z / n0).collect() } else { start };
    let mut run = Run { best: 0.0, witness: f.clone(), iterations: 0, trace: Vec::new() };
    let mut prev = f64::NAN;
    for it in 0..cfg.iters.max(1) {
        run.iterations = it + 1;
        let sel = family.select(&f);
        let r = l2(&sel.values) / l2(&f).max(f64::MIN_POSITIVE);
        run.trace.push(r);
        if r > run.best {
            run.best = r;
            run.witness = f.clone();
        }
        if (r - prev).abs() <= cfg.tol * r {
            break;
        }
        prev = r;
        let g = family.adjoint_selected(&sel.values, &sel.index);
        let ng = l2(&g);
        if !(ng > 0.0) || !ng.is_finite() {
            break;
        }
        f = g.into_iter().map(|z| z / ng).collect();
    }
    run
}

/// Alternating maximization with `cfg.restarts` random starts (plus the warm
/// start, if any, as restart 0). Restarts run in parallel; the winner is the
/// largest estimate, ties going to the lowest restart index.
pub fn estimate_maximal_norm(
    family: &dyn OperatorFamily,
    cfg: &EstimatorConfig,
    warm: Option<&[Complex64]>,
) -> Result<NormReport> {
    if family.is_empty() {
        return invalid("empty operator family");
    }
    if let Some(w) = warm {
        if w.len() != family.points() {
            return Err(Error::Shape("warm start has the wrong length".into()));
        }
    }
    let restarts = cfg.restarts.max(1);
    let runs: Vec<Run> = (0..restarts)
        .into_par_iter()
        .map(|r| {
            let start = match (r, warm) {
                (0, Some(w)) if l2(w) > 0.0 => w.to_vec(),
                _ => start_vector(family.points(), cfg.seed, r),
            };
            power_run(family, start, cfg)
        })
        .collect();
    let mut best = 0;
    for (i, r) in runs.iter().enumerate() {
        if r.best > runs[best].best {
            best = i;
        }
    }
    let total: usize = runs.iter().map(|r| r.iterations).sum();
    let win = runs.into_iter().nth(best).expect("at least one restart");
    Ok(NormReport {
        estimate: win.best,
        witness: win.witness,
        grid: family.grid(),
        subset: None,
        members: family.len(),
        iterations: total,
        restarts,
        seed: cfg.seed,
        trace: win.trace,
    })
}

/// Norm of the maximal operator on positive functions in L^p(w), by the
/// nonlinear power iteration f ← ((S^*(w (Sf)^{p−1}))/w)^{1/(p−1)} with
/// reselection. Members must be positivity preserving.
pub fn estimate_positive_norm(
    family: &dyn OperatorFamily,
    p: f64,
    weight: Option<&[f64]>,
    cfg: &EstimatorConfig,
) -> Result<NormReport> {
    if family.is_empty() {
        return invalid("empty operator family");
    }
    if !(p > 1.0 && p.is_finite()) {
        return invalid("exponent must satisfy 1 < p < ∞");
    }
    let n = family.points();
    let ones = vec![1.0; n];
    let w = weight.unwrap_or(&ones);
    if w.len() != n || w.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
        return invalid("weight must be positive with one value per point");
    }
    let lp = |v: &[f64]| v.iter().zip(w).map(|(a, b)| a.powf(p) * b).sum::<f64>().powf(1.0 / p);
    let restarts = cfg.restarts.max(1);
    let runs: Vec<Run> = (0..restarts)
        .into_par_iter()
        .map(|r| {
            let start = start_vector(n, cfg.seed, r);
            let mut f: Vec<f64> = start.iter().map(|z| z.norm() + if r == 0 { 1.0 } else { 0.0 }).collect();
            let mut run = Run { best: 0.0, witness: Vec::new(), iterations: 0, trace: Vec::new() };
            let mut prev = f64::NAN;
            for it in 0..cfg.iters.max(1) {
                let nf = lp(&f);
                if !(nf > 0.0) {
                    break;
                }
                f.iter_mut().for_each(|v| *v /= nf);
                let fc: Vec<Complex64> = f.iter().map(|&v| Complex64::new(v, 0.0)).collect();
                let sel = family.select(&fc);
                let y: Vec<f64> = sel.values.iter().map(|z| z.norm()).collect();
                let ratio = lp(&y);
                run.iterations = it + 1;
                run.trace.push(ratio);
                if ratio > run.best {
                    run.best = ratio;
                    run.witness = fc;
                }
                if (ratio - prev).abs() <= cfg.tol * ratio {
                    break;
                }
                prev = ratio;
                let z: Vec<Complex64> =
                    y.iter().zip(w).map(|(a, b)| Complex64::new(b * a.powf(p - 1.0), 0.0)).collect();
                let g = family.adjoint_selected(&z, &sel.index);
                f = g.iter().zip(w).map(|(v, b)| (v.re.max(0.0) / b).powf(1.0 / (p - 1.0))).collect();
            }
            run
        })
        .collect();
    let mut best = 0;
    for (i, r) in runs.iter().enumerate() {
        if r.best > runs[best].best {
            best = i;
        }
    }
    let total: usize = runs.iter().map(|r| r.iterations).sum();
    let win = runs.into_iter().nth(best).expect("at least one restart");
    Ok(NormReport {
        estimate: win.best,
        witness: win.witness,
        grid: family.grid(),
        subset: None,
        members: family.len(),
        iterations: total,
        restarts,
        seed: cfg.seed,
        trace: win.trace,
    })
}

/// Exact L² norm of the maximal operator on a tiny space: the largest spectral
/// norm over all |family|^points selection-frozen operators.
pub fn brute_force_selection_norm(family: &dyn OperatorFamily, budget: u64) -> Result<f64> {
    let dense = DenseFamily::from_family(family)?;
    let n = dense.points();
    let k = dense.len() as u64;
    let count = (0..n).try_fold(1u64, |acc, _| acc.checked_mul(k)).filter(|&c| c <= budget);
    let count = count.ok_or_else(|| Error::Budget(format!("{k}^{n} selections exceed the budget {budget}")))?;
    let mut sel = vec![0usize; n];
    let mut best: f64 = 0.0;
    let mut s = DMatrix::<Complex64>::zeros(n, n);
    for _ in 0..count {
        for r in 0..n {
            s.set_row(r, &dense.mats[sel[r]].row(r));
        }
        let sv = s.clone().singular_values();
        best = best.max(sv.iter().fold(0.0, |m: f64, &v| m.max(v)));
        for d in sel.iter_mut() {
            *d += 1;
            if *d < k as usize {
                break;
            }
            *d = 0;
        }
    }
    Ok(best)
}
