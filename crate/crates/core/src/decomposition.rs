//! The inner/outer split of a directional Hilbert transform and the checks
//! built on it: wedge covering, inclusion–exclusion, sign constancy of the
//! outer symbols, the pointwise represent bound and the annular bound.

use std::collections::HashMap;

use num_complex::Complex64;
use rustfft::FftDirection;
use serde::{Deserialize, Serialize};

use crate::directions::{cell_of, sigma_set, CellIndex, Direction, Dissection, Pair};
use crate::error::{invalid, Error, Result};
use crate::grid::{apply_multiplier, fft_nd, Field, Grid, Symbol};
use crate::operators::strong_maximal_values;
use crate::symbols::{
    compose_k, halfspace_symbol, halfspace_value, kappa_value, lp_p, project_symbol, wedge_contains, Convention,
    Cutoff, LpKind, WedgeSpec,
};

/// All nonempty subsets of `items`, in binary counting order.
pub fn nonempty_subsets<T: Clone>(items: &[T]) -> Vec<Vec<T>> {
    (1..(1usize << items.len()))
        .map(|mask| items.iter().enumerate().filter(|(i, _)| mask >> i & 1 == 1).map(|(_, x)| x.clone()).collect())
        .collect()
}

/// All sign vectors in {+,−}^k.
pub fn sign_vectors(k: usize) -> Vec<Vec<Cutoff>> {
    (0..(1usize << k))
        .map(|mask| (0..k).map(|i| if mask >> i & 1 == 0 { Cutoff::Plus } else { Cutoff::Minus }).collect())
        .collect()
}

fn check_cell(omega: &Direction, cell: &CellIndex) -> Result<()> {
    let actual = cell_of(omega, &Dissection::canonical(omega.dim()))?;
    if &actual != cell {
        return Err(Error::InvalidArgument(format!("direction lies in cell {actual}, not {cell}")));
    }
    Ok(())
}

/// Frequencies in the cone |ξ·ω| < max_j|ω_jξ_j| / n that miss every wedge Ψ_{σ,ℓ_σ}.
pub fn check_inclusion(omega: &Direction, cell: &CellIndex, grid: &Grid) -> Result<Vec<Vec<i64>>> {
    let n = grid.dim();
    if omega.dim() != n || cell.dim() != n {
        return Err(Error::Shape("direction, cell and grid dimensions differ".into()));
    }
    check_cell(omega, cell)?;
    let wedges: Vec<WedgeSpec> = sigma_set(n).into_iter().map(|s| WedgeSpec::core(s, cell.get(s), n)).collect();
    let w = omega.coords();
    let mut out = Vec::new();
    grid.for_each_frequency(|_, xi| {
        let dot: f64 = w.iter().zip(xi).map(|(a, b)| a * b).sum();
        let mx = w.iter().zip(xi).map(|(a, b)| (a * b).abs()).fold(0.0, f64::max);
        if dot.abs() < mx / n as f64 && !wedges.iter().any(|s| wedge_contains(xi, s)) {
            out.push(xi.iter().map(|&v| v as i64).collect());
        }
    });
    Ok(out)
}

fn circ_values(xi: &[f64], pairs: &[Pair], cell: &CellIndex) -> Vec<f64> {
    pairs.iter().map(|&s| kappa_value(xi, s, cell.get(s), Cutoff::Circ, cell.dim())).collect()
}

/// max_ξ |1 − Σ_U (−1)^{#U+1} ∏_{σ∈U} κ°_σ − ∏_σ (1 − κ°_σ)| over the grid.
pub fn inclusion_exclusion_residual(cell: &CellIndex, grid: &Grid) -> Result<f64> {
    if cell.dim() != grid.dim() {
        return Err(Error::Shape("cell and grid dimensions differ".into()));
    }
    let pairs = sigma_set(grid.dim());
    let masks = 1usize << pairs.len();
    let mut worst: f64 = 0.0;
    grid.for_each_frequency(|_, xi| {
        let k = circ_values(xi, &pairs, cell);
        let mut sum = 0.0;
        for mask in 1..masks {
            let mut prod = 1.0;
            for (i, v) in k.iter().enumerate() {
                if mask >> i & 1 == 1 {
                    prod *= v;
                }
            }
            sum += if mask.count_ones() % 2 == 1 { prod } else { -prod };
        }
        let tail: f64 = k.iter().map(|v| 1.0 - v).product();
        worst = worst.max((1.0 - sum - tail).abs());
    });
    Ok(worst)
}

/// Symbol of the remainder T: sign(ω·ξ) ∏_σ (1 − κ°_σ).
pub fn remainder_symbol(omega: &Direction, cell: &CellIndex) -> Symbol {
    let w = omega.coords().to_vec();
    let pairs = sigma_set(cell.dim());
    let cell = cell.clone();
    Symbol::real(format!("T@{cell}"), move |xi| {
        let dot: f64 = w.iter().zip(xi).map(|(a, b)| a * b).sum();
        let k = circ_values(xi, &pairs, &cell);
        halfspace_value(dot, Convention::Sign) * k.iter().map(|v| 1.0 - v).product::<f64>()
    })
}

/// Symbol κ_ε = ∏_σ (1 − κ^{ε_σ}_σ) for ε ∈ {+,−}^Σ.
pub fn outer_symbol(cell: &CellIndex, eps: &[Cutoff]) -> Result<Symbol> {
    let pairs = sigma_set(cell.dim());
    if eps.len() != pairs.len() {
        return invalid("one cutoff per pair required");
    }
    let parts: Vec<(Pair, i64, Cutoff)> = pairs.iter().zip(eps).map(|(&p, &e)| (p, cell.get(p), e)).collect();
    let n = cell.dim();
    Ok(Symbol::real(format!("k_eps@{cell}"), move |xi| {
        parts.iter().map(|&(p, l, e)| 1.0 - kappa_value(xi, p, l, e, n)).product()
    }))
}

/// Relative L² error of H_ω f = Σ_U (−1)^{#U+1} H_ω K_U f + T f (sign convention).
pub fn split_residual(f: &Field, omega: &Direction, cell: &CellIndex) -> Result<f64> {
    let n = f.grid().dim();
    let h = halfspace_symbol(omega, Convention::Sign);
    let lhs = apply_multiplier(f, &h)?;
    let mut rhs = apply_multiplier(f, &remainder_symbol(omega, cell))?;
    for u in nonempty_subsets(&sigma_set(n)) {
        let k = compose_k(&u, cell, &vec![Cutoff::Circ; u.len()])?;
        let term = apply_multiplier(f, &h.product(&k))?;
        let s = if u.len() % 2 == 1 { 1.0 } else { -1.0 };
        rhs = rhs.zip_with(&term, |a, b| a + s * b)?;
    }
    let scale = lhs.norm().max(f.norm()).max(f64::MIN_POSITIVE);
    Ok(lhs.sub(&rhs)?.norm() / scale)
}

/// Sign pattern of an open orthant; entries are ±1.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Octant(pub Vec<i8>);

impl Octant {
    pub fn all(n: usize) -> Vec<Octant> {
        (0..(1usize << n)).map(|m| Octant((0..n).map(|i| if m >> i & 1 == 0 { 1 } else { -1 }).collect())).collect()
    }

    pub fn of(xi: &[f64]) -> Option<Octant> {
        if xi.iter().any(|&v| v == 0.0) {
            return None;
        }
        Some(Octant(xi.iter().map(|&v| if v > 0.0 { 1 } else { -1 }).collect()))
    }

    /// Closed orthant membership.
    pub fn contains(&self, xi: &[f64]) -> bool {
        self.0.iter().zip(xi).all(|(&s, &v)| s as f64 * v >= 0.0)
    }

    /// Whether the orthant lies in Q_σ = {ξ_{σ(1)} ξ_{σ(2)} ≥ 0}.
    pub fn within_q(&self, sigma: Pair) -> bool {
        self.0[sigma.first] == self.0[sigma.second]
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SignViolation {
    pub eps: Vec<Cutoff>,
    pub octant: Octant,
    pub positive: usize,
    pub negative: usize,
}

/// Checks that sign(ω·ξ) is constant on the support of each κ_ε within each
/// open orthant (κ_ε is even in ξ, so constancy across ±ξ cannot hold).
pub fn sign_constancy(omega: &Direction, cell: &CellIndex, grid: &Grid) -> Result<Vec<SignViolation>> {
    let n = grid.dim();
    check_cell(omega, cell)?;
    let npairs = sigma_set(n).len();
    let mut out = Vec::new();
    for eps in sign_vectors(npairs) {
        let sym = outer_symbol(cell, &eps)?;
        let mut counts: HashMap<Octant, (usize, usize)> = HashMap::new();
        grid.for_each_frequency(|_, xi| {
            let Some(q) = Octant::of(xi) else { return };
            if sym.eval(xi).re == 0.0 {
                return;
            }
            let d = omega.dot(xi);
            let c = counts.entry(q).or_default();
            if d > 0.0 {
                c.0 += 1;
            } else {
                c.1 += 1;
            }
        });
        let mut bad: Vec<_> = counts.into_iter().filter(|(_, (p, m))| *p > 0 && *m > 0).collect();
        bad.sort_by(|a, b| a.0 .0.cmp(&b.0 .0));
        for (octant, (positive, negative)) in bad {
            out.push(SignViolation { eps: eps.clone(), octant, positive, negative });
        }
    }
    Ok(out)
}

/// The pieces of the represent bound at every grid point.
#[derive(Clone, Debug)]
pub struct RepresentTerms {
    pub lhs: Vec<f64>,
    /// |f| + sup_U |H_ω K_U f| + sup_ε sup_U |K^ε_U f|
    pub rhs: Vec<f64>,
}

pub fn represent_terms(f: &Field, omega: &Direction) -> Result<RepresentTerms> {
    let g = f.grid();
    let n = g.dim();
    let cell = cell_of(omega, &Dissection::canonical(n))?;
    let h = halfspace_symbol(omega, Convention::Sign);
    let lhs = apply_multiplier(f, &h)?.abs();
    let mut sup_h = vec![0.0f64; g.points()];
    let mut sup_k = vec![0.0f64; g.points()];
    for u in nonempty_subsets(&sigma_set(n)) {
        let k = compose_k(&u, &cell, &vec![Cutoff::Circ; u.len()])?;
        for (a, v) in sup_h.iter_mut().zip(apply_multiplier(f, &h.product(&k))?.abs()) {
            *a = a.max(v);
        }
        for eps in sign_vectors(u.len()) {
            let k = compose_k(&u, &cell, &eps)?;
            for (a, v) in sup_k.iter_mut().zip(apply_multiplier(f, &k)?.abs()) {
                *a = a.max(v);
            }
        }
    }
    let rhs = f.abs().iter().zip(&sup_h).zip(&sup_k).map(|((a, b), c)| a + b + c).collect();
    Ok(RepresentTerms { lhs, rhs })
}

/// Pointwise margin C·rhs − lhs.
pub fn represent_bound_check(f: &Field, omega: &Direction, c: f64) -> Result<Field> {
    let t = represent_terms(f, omega)?;
    let m: Vec<f64> = t.lhs.iter().zip(&t.rhs).map(|(l, r)| c * r - l).collect();
    Field::from_real(*f.grid(), &m)
}

/// Smallest C making every training margin nonnegative.
pub fn calibrate_represent(training: &[RepresentTerms]) -> f64 {
    let mut c: f64 = 1.0;
    for t in training {
        let scale = t.rhs.iter().fold(0.0, |m: f64, &v| m.max(v));
        for (l, r) in t.lhs.iter().zip(&t.rhs) {
            if *r > 1e-12 * scale {
                c = c.max(l / r);
            } else if *l > 1e-12 * scale {
                c = f64::INFINITY;
            }
        }
    }
    c
}

/// υ(U, ε, Q) from the case analysis, or `None` when K^ε_U vanishes on Q.
pub fn choose_upsilon(u: &[Pair], eps: &[Cutoff], octant: &Octant) -> Result<Option<usize>> {
    if u.is_empty() || u.len() != eps.len() {
        return invalid("U must be nonempty with one cutoff per pair");
    }
    match u.len() {
        1 => Ok(Some(u[0].first)),
        2 => u[0]
            .common(&u[1])
            .map(Some)
            .ok_or_else(|| Error::InvalidArgument("two pairs without a common component".into())),
        3 => {
            let i = (0..3)
                .find(|&i| octant.within_q(u[i]))
                .ok_or_else(|| Error::InvalidArgument("no pair of U has matching signs on the octant".into()))?;
            if eps[i] == Cutoff::Minus {
                return Ok(None);
            }
            let rest: Vec<Pair> = (0..3).filter(|&j| j != i).map(|j| u[j]).collect();
            Ok(rest[0].common(&rest[1]))
        }
        _ => invalid("the annular bound is stated for subsets of Σ(3)"),
    }
}

fn check_octant_support(f: &Field, octant: &Octant) -> Result<Vec<Complex64>> {
    let g = f.grid();
    let mut spec = f.values().to_vec();
    fft_nd(g, &mut spec, FftDirection::Forward);
    let tol = 1e-12 * crate::grid::l2(&spec).max(f64::MIN_POSITIVE);
    let mut bad = false;
    g.for_each_frequency(|i, xi| {
        if spec[i].norm() > tol && !octant.contains(xi) {
            bad = true;
        }
    });
    if bad {
        return invalid("spectrum is not confined to the octant");
    }
    Ok(spec)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnnularRatio {
    pub ratio: f64,
    pub upsilon: Option<usize>,
    /// max |K P_t f|
    pub peak: f64,
    /// max |P_t f|
    pub projected: f64,
}

/// Evaluates annular ratios for one test function, caching P_t^υ f and
/// M_s²(P_t^υ f) across calls.
pub struct AnnularSweep {
    grid: Grid,
    octant: Octant,
    spectrum: Vec<Complex64>,
    floor: f64,
    cache: HashMap<(i64, usize), (Vec<Complex64>, Vec<f64>, f64)>,
}

impl AnnularSweep {
    pub fn new(f: &Field, octant: Octant) -> Result<AnnularSweep> {
        if f.grid().dim() != 3 || octant.0.len() != 3 {
            return invalid("the annular bound is checked in three dimensions");
        }
        let spectrum = check_octant_support(f, &octant)?;
        Ok(AnnularSweep { grid: *f.grid(), octant, spectrum, floor: 1e-14 * f.max_abs(), cache: HashMap::new() })
    }

    fn projected(&mut self, t: i64, axis: usize) -> &(Vec<Complex64>, Vec<f64>, f64) {
        let grid = self.grid;
        let spectrum = &self.spectrum;
        self.cache.entry((t, axis)).or_insert_with(|| {
            let s = crate::directions::pow2(-t);
            let mut ps = spectrum.clone();
            grid.for_each_frequency(|i, xi| ps[i] *= lp_p(s * xi[axis]));
            let mut field = ps.clone();
            fft_nd(&grid, &mut field, FftDirection::Inverse);
            let abs: Vec<f64> = field.iter().map(|z| z.norm()).collect();
            let peak = abs.iter().fold(0.0, |m: f64, &v| m.max(v));
            let once = strong_maximal_values(&grid, &abs);
            (ps, strong_maximal_values(&grid, &once), peak)
        })
    }

    pub fn ratio(&mut self, u: &[Pair], eps: &[Cutoff], cell: &CellIndex, t: i64) -> Result<AnnularRatio> {
        let Some(axis) = choose_upsilon(u, eps, &self.octant)? else {
            return Ok(AnnularRatio { ratio: 0.0, upsilon: None, peak: 0.0, projected: 0.0 });
        };
        let k = compose_k(u, cell, eps)?;
        let grid = self.grid;
        let floor = self.floor;
        let (ps, ms2, projected) = self.projected(t, axis);
        let mut data = ps.clone();
        let mut bad = false;
        grid.for_each_frequency(|i, xi| {
            let v = k.eval(xi);
            bad |= !v.re.is_finite();
            data[i] *= v;
        });
        if bad {
            return Err(Error::NonFinite(k.label().to_string()));
        }
        fft_nd(&grid, &mut data, FftDirection::Inverse);
        let mut ratio: f64 = 0.0;
        let mut peak: f64 = 0.0;
        for (z, m) in data.iter().zip(ms2) {
            let a = z.norm();
            peak = peak.max(a);
            ratio = ratio.max(a / (m + floor));
        }
        Ok(AnnularRatio { ratio, upsilon: Some(axis), peak, projected: *projected })
    }
}

/// Annular ratio for single exponentials e^{iξ·x}: P_t^υ of a plane wave has
/// constant modulus, so M_s² returns it exactly and the ratio is |K(ξ)|. Returns
/// the largest |K(ξ)| over octant frequencies with 1 ≤ |ξ_i| ≤ `reach` where
/// P_t^υ does not vanish, or None if K vanishes identically or no frequency
/// survives the projection.
pub fn plane_wave_ratio(
    u: &[Pair],
    eps: &[Cutoff],
    cell: &CellIndex,
    t: i64,
    octant: &Octant,
    reach: i64,
) -> Result<Option<f64>> {
    let Some(axis) = choose_upsilon(u, eps, octant)? else {
        return Ok(None);
    };
    let n = octant.0.len();
    if cell.dim() != n || reach < 1 {
        return invalid("cell and octant dimensions differ, or empty frequency range");
    }
    let k = compose_k(u, cell, eps)?;
    let s = crate::directions::pow2(-t);
    let mut best: Option<f64> = None;
    let mut idx = vec![1i64; n];
    let mut xi = vec![0.0; n];
    loop {
        for a in 0..n {
            xi[a] = (idx[a] * octant.0[a] as i64) as f64;
        }
        if lp_p(s * xi[axis]) != 0.0 {
            let v = k.eval(&xi).norm();
            best = Some(best.map_or(v, |b| b.max(v)));
        }
        let mut a = 0;
        while a < n && idx[a] == reach {
            idx[a] = 1;
            a += 1;
        }
        if a == n {
            break;
        }
        idx[a] += 1;
    }
    Ok(best)
}

/// One-shot form of [`AnnularSweep::ratio`].
pub fn annular_bound_check(
    f: &Field,
    u: &[Pair],
    eps: &[Cutoff],
    cell: &CellIndex,
    t: i64,
    octant: &Octant,
) -> Result<AnnularRatio> {
    AnnularSweep::new(f, octant.clone())?.ratio(u, eps, cell, t)
}

/// General-dimension variant: projections along a minimum spanning set of U
/// (one scale per spanning axis) against the n-fold strong maximal function.
pub fn annular_bound_general(f: &Field, u: &[Pair], eps: &[Cutoff], cell: &CellIndex, ts: &[i64]) -> Result<f64> {
    let g = f.grid();
    let n = g.dim();
    let report = spanning_and_cycles(u, n)?;
    if ts.len() != report.spanning.len() {
        return invalid(format!("{} scales for a spanning set of size {}", ts.len(), report.spanning.len()));
    }
    let proj = Symbol::product_all(
        &report.spanning.iter().zip(ts).map(|(&a, &t)| project_symbol(t, a, LpKind::P)).collect::<Vec<_>>(),
    );
    let pf = apply_multiplier(f, &proj)?;
    let lhs = apply_multiplier(&pf, &compose_k(u, cell, eps)?)?.abs();
    let mut rhs = pf.abs();
    for _ in 0..n {
        rhs = strong_maximal_values(g, &rhs);
    }
    let floor = 1e-14 * f.max_abs();
    Ok(lhs.iter().zip(&rhs).fold(0.0, |m: f64, (a, b)| m.max(a / (b + floor))))
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CycleReport {
    pub has_odd_cycle: bool,
    /// A minimum vertex set meeting every pair of U (0-based axes).
    pub spanning: Vec<usize>,
}

/// Treats U as a graph on the axes: bipartiteness test and exhaustive minimum vertex cover.
pub fn spanning_and_cycles(u: &[Pair], n: usize) -> Result<CycleReport> {
    if n > 16 || u.iter().any(|p| p.second >= n) {
        return invalid("pairs must lie in Σ(n) with n ≤ 16");
    }
    let mut color: Vec<Option<bool>> = vec![None; n];
    let mut odd = false;
    for start in 0..n {
        if color[start].is_some() {
            continue;
        }
        color[start] = Some(false);
        let mut stack = vec![start];
        while let Some(v) = stack.pop() {
            let c = color[v].unwrap_or(false);
            for p in u {
                let w = if p.first == v {
                    p.second
                } else if p.second == v {
                    p.first
                } else {
                    continue;
                };
                match color[w] {
                    None => {
                        color[w] = Some(!c);
                        stack.push(w);
                    }
                    Some(cw) if cw == c => odd = true,
                    _ => {}
                }
            }
        }
    }
    let mut best: Option<u32> = None;
    for mask in 0u32..(1 << n) {
        if best.is_some_and(|b| mask.count_ones() >= b.count_ones()) {
            continue;
        }
        if u.iter().all(|p| mask >> p.first & 1 == 1 || mask >> p.second & 1 == 1) {
            best = Some(mask);
        }
    }
    let mask = best.unwrap_or(0);
    Ok(CycleReport { has_odd_cycle: odd, spanning: (0..n).filter(|&i| mask >> i & 1 == 1).collect() })
}
