//! Spatial-side operators: directional Hilbert transforms, segment averages,
//! directional and strong maximal functions, dyadic martingales.

use std::collections::BTreeMap;

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::FftDirection;
use serde::{Deserialize, Serialize};

use crate::directions::{Direction, DirectionSet};
use crate::error::{invalid, Error, Result};
use crate::grid::{apply_multiplier, fft_nd, Field, Grid, SampledSymbol};
use crate::symbols::{halfspace_symbol, Convention};

fn zero() -> Complex64 {
    Complex64::new(0.0, 0.0)
}

fn real_field(grid: Grid, v: Vec<f64>) -> Field {
    Field::from_vec_unchecked(grid, v.into_iter().map(|x| Complex64::new(x, 0.0)).collect())
}

fn check_dir(grid: &Grid, omega: &Direction) -> Result<()> {
    if omega.dim() != grid.dim() {
        return Err(Error::Shape(format!("direction of dimension {} on a {}-d grid", omega.dim(), grid.dim())));
    }
    Ok(())
}

pub fn hilbert_dir(f: &Field, omega: &Direction, convention: Convention) -> Result<Field> {
    check_dir(f.grid(), omega)?;
    apply_multiplier(f, &halfspace_symbol(omega, convention))
}

/// sup over `set` of |H_ω f|.
pub fn maximal_hilbert(f: &Field, set: &DirectionSet, convention: Convention) -> Result<Field> {
    if set.is_empty() {
        return invalid("empty direction set");
    }
    let parts = set
        .members()
        .par_iter()
        .map(|w| hilbert_dir(f, w, convention).map(|h| h.abs()))
        .collect::<Result<Vec<_>>>()?;
    Ok(real_field(*f.grid(), pointwise_max(parts)))
}

fn pointwise_max(parts: Vec<Vec<f64>>) -> Vec<f64> {
    let mut it = parts.into_iter();
    let mut acc = it.next().unwrap_or_default();
    for p in it {
        for (a, b) in acc.iter_mut().zip(p) {
            if b > *a {
                *a = b;
            }
        }
    }
    acc
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SegmentSpec {
    pub center: Vec<f64>,
    pub radius: f64,
    pub direction: Direction,
}

/// Trapezoid nodes `(t, weight)` on [−η, η] with step at most a quarter cell;
/// weights sum to one.
pub fn segment_nodes(grid: &Grid, radius: f64) -> Vec<(f64, f64)> {
    let q = grid.cell() / 4.0;
    let n = ((2.0 * radius / q).ceil() as usize).max(1);
    let h = 2.0 * radius / n as f64;
    let mut nodes: Vec<(f64, f64)> = (0..=n)
        .map(|i| {
            let w = if i == 0 || i == n { 0.5 } else { 1.0 };
            (-radius + i as f64 * h, w)
        })
        .collect();
    let total: f64 = nodes.iter().map(|p| p.1).sum();
    for p in &mut nodes {
        p.1 /= total;
    }
    nodes
}

/// Multilinear interpolation corners for a point in grid units: (offset, weight).
fn corners(p: &[f64], out: &mut Vec<(Vec<i64>, f64)>) {
    out.clear();
    let n = p.len();
    let base: Vec<i64> = p.iter().map(|x| x.floor() as i64).collect();
    let frac: Vec<f64> = p.iter().zip(&base).map(|(x, b)| x - *b as f64).collect();
    for bits in 0..(1usize << n) {
        let mut w = 1.0;
        let mut o = base.clone();
        for a in 0..n {
            if bits >> a & 1 == 1 {
                w *= frac[a];
                o[a] += 1;
            } else {
                w *= 1.0 - frac[a];
            }
        }
        if w != 0.0 {
            out.push((o, w));
        }
    }
}

/// (1/2η)∫ f(x + tω) dt by the trapezoid rule on interpolated samples.
pub fn avg_segment(f: &Field, seg: &SegmentSpec) -> Result<Complex64> {
    let g = f.grid();
    check_dir(g, &seg.direction)?;
    if seg.center.len() != g.dim() || !(seg.radius > 0.0) {
        return invalid("segment needs a center in the grid dimension and a positive radius");
    }
    let h = g.cell();
    let w = seg.direction.coords();
    let mut buf = Vec::new();
    let mut p = vec![0.0; g.dim()];
    let mut acc = zero();
    for (t, wt) in segment_nodes(g, seg.radius) {
        for a in 0..g.dim() {
            p[a] = (seg.center[a] + t * w[a]) / h;
        }
        corners(&p, &mut buf);
        for (o, cw) in &buf {
            acc += f.values()[wrap(g, o)] * (wt * cw);
        }
    }
    Ok(acc)
}

/// Fourier multiplier of the segment-average operator at grid points.
pub fn segment_multiplier(grid: &Grid, omega: &Direction, radius: f64) -> Result<SampledSymbol> {
    let mut kernel = vec![zero(); grid.points()];
    for (o, w) in segment_stencil(grid, omega, radius)? {
        // (A f)(x) = Σ K(y) f(x − y) with y = −o
        let neg: Vec<i64> = o.iter().map(|k| -k).collect();
        kernel[wrap(grid, &neg)] += w;
    }
    fft_nd(grid, &mut kernel, FftDirection::Forward);
    let s = (grid.points() as f64).sqrt();
    for z in &mut kernel {
        *z *= s;
    }
    SampledSymbol::from_values(*grid, kernel)
}

/// Lattice offsets and weights of the segment average centred at a grid point:
/// (A f)(x) = Σ w f(x + o·h). Offsets are unwrapped and merged; weights sum to one.
pub fn segment_stencil(grid: &Grid, omega: &Direction, radius: f64) -> Result<Vec<(Vec<i64>, f64)>> {
    check_dir(grid, omega)?;
    if !(radius > 0.0) {
        return invalid("segment radius must be positive");
    }
    let mut acc: BTreeMap<Vec<i64>, f64> = BTreeMap::new();
    let mut buf = Vec::new();
    let w = omega.coords();
    let h = grid.cell();
    let mut p = vec![0.0; grid.dim()];
    for (t, wt) in segment_nodes(grid, radius) {
        for a in 0..grid.dim() {
            p[a] = t * w[a] / h;
        }
        corners(&p, &mut buf);
        for (o, cw) in buf.drain(..) {
            *acc.entry(o).or_insert(0.0) += wt * cw;
        }
    }
    Ok(acc.into_iter().collect())
}

/// Flat index of a lattice point after periodic wrapping.
pub(crate) fn wrap(grid: &Grid, o: &[i64]) -> usize {
    let m = grid.side() as i64;
    o.iter().fold(0usize, |acc, &k| acc * grid.side() + k.rem_euclid(m) as usize)
}

/// Dyadic radii from one cell up to half the period.
pub fn dyadic_radii(grid: &Grid) -> Vec<f64> {
    let mut r = grid.cell();
    let mut out = Vec::new();
    while r <= grid.length() / 2.0 * (1.0 + 1e-12) {
        out.push(r);
        r *= 2.0;
    }
    out
}

fn spectrum_of_abs(f: &Field) -> Vec<Complex64> {
    let mut d: Vec<Complex64> = f.values().iter().map(|z| Complex64::new(z.norm(), 0.0)).collect();
    fft_nd(f.grid(), &mut d, FftDirection::Forward);
    d
}

fn averages_from_spectrum(grid: &Grid, spec: &[Complex64], omega: &Direction, radii: &[f64]) -> Result<Vec<f64>> {
    let mut best = vec![0.0f64; grid.points()];
    let mut buf = vec![zero(); grid.points()];
    for &r in radii {
        let m = segment_multiplier(grid, omega, r)?;
        for ((b, s), k) in buf.iter_mut().zip(spec).zip(m.values()) {
            *b = s * k;
        }
        fft_nd(grid, &mut buf, FftDirection::Inverse);
        for (a, z) in best.iter_mut().zip(&buf) {
            if z.re > *a {
                *a = z.re;
            }
        }
    }
    Ok(best)
}

/// sup over radii of the segment averages of |f| along ω.
pub fn maximal_dir(f: &Field, omega: &Direction, radii: &[f64]) -> Result<Field> {
    check_dir(f.grid(), omega)?;
    if radii.is_empty() {
        return invalid("empty radius ladder");
    }
    let spec = spectrum_of_abs(f);
    Ok(real_field(*f.grid(), averages_from_spectrum(f.grid(), &spec, omega, radii)?))
}

pub fn maximal_set(f: &Field, set: &DirectionSet, radii: &[f64]) -> Result<Field> {
    if set.is_empty() {
        return invalid("empty direction set");
    }
    if radii.is_empty() {
        return invalid("empty radius ladder");
    }
    let spec = spectrum_of_abs(f);
    let parts = set
        .members()
        .par_iter()
        .map(|w| {
            check_dir(f.grid(), w)?;
            averages_from_spectrum(f.grid(), &spec, w, radii)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(real_field(*f.grid(), pointwise_max(parts)))
}

/// Periodic window mean along one axis: window of `s` points at offsets
/// −⌊s/2⌋ ..= s−1−⌊s/2⌋.
pub(crate) fn window_mean(grid: &Grid, v: &[f64], axis: usize, s: usize) -> Vec<f64> {
    let m = grid.side();
    let stride = grid.stride(axis);
    let mut out = vec![0.0; v.len()];
    if s == 1 {
        out.copy_from_slice(v);
        return out;
    }
    let lo = (s / 2) as isize;
    let inv = 1.0 / s as f64;
    let block = m * stride;
    let mut line = vec![0.0; m];
    let mut prefix = vec![0.0; 3 * m + 1];
    for base in (0..v.len()).step_by(block) {
        for o in 0..stride {
            for i in 0..m {
                line[i] = v[base + i * stride + o];
            }
            for i in 0..3 * m {
                prefix[i + 1] = prefix[i] + line[i % m];
            }
            for i in 0..m {
                // window [i − lo, i − lo + s) shifted by m to stay nonnegative
                let a = (i as isize - lo + m as isize) as usize;
                out[base + i * stride + o] = (prefix[a + s] - prefix[a]) * inv;
            }
        }
    }
    out
}

fn strong_rec(grid: &Grid, v: &[f64], axis: usize, sizes: &[usize], best: &mut [f64]) {
    if axis + 1 == grid.dim() {
        max_window_means(grid, v, axis, sizes, best);
        return;
    }
    for &s in sizes {
        let w = window_mean(grid, v, axis, s);
        strong_rec(grid, &w, axis + 1, sizes, best);
    }
}

/// best = max(best, window means of v along `axis` for every size), without
/// materializing the means.
fn max_window_means(grid: &Grid, v: &[f64], axis: usize, sizes: &[usize], best: &mut [f64]) {
    let m = grid.side();
    let stride = grid.stride(axis);
    let block = m * stride;
    let mut prefix = vec![0.0; 3 * m + 1];
    for base in (0..v.len()).step_by(block) {
        for o in 0..stride {
            for i in 0..3 * m {
                prefix[i + 1] = prefix[i] + v[base + (i % m) * stride + o];
            }
            for &s in sizes {
                if s == 1 {
                    for i in 0..m {
                        let b = &mut best[base + i * stride + o];
                        *b = b.max(v[base + i * stride + o]);
                    }
                    continue;
                }
                let lo = s / 2;
                let inv = 1.0 / s as f64;
                for i in 0..m {
                    let a = i + m - lo;
                    let mean = (prefix[a + s] - prefix[a]) * inv;
                    let b = &mut best[base + i * stride + o];
                    if mean > *b {
                        *b = mean;
                    }
                }
            }
        }
    }
}

/// Strong maximal function over axis-parallel windows with dyadic side lengths.
pub fn strong_maximal(f: &Field) -> Field {
    let g = *f.grid();
    real_field(g, strong_maximal_values(&g, &f.abs()))
}

pub(crate) fn strong_maximal_values(g: &Grid, v: &[f64]) -> Vec<f64> {
    let sizes: Vec<usize> = (0..=g.depth()).map(|k| 1usize << k).collect();
    let mut best = vec![f64::NEG_INFINITY; v.len()];
    strong_rec(g, v, 0, &sizes, &mut best);
    best
}

pub fn strong_maximal_sq(f: &Field) -> Field {
    let g = *f.grid();
    let once = strong_maximal_values(&g, &f.abs());
    real_field(g, strong_maximal_values(&g, &once))
}

/// Average over dyadic blocks of `side / 2^j` points along `axis`.
pub fn dyadic_expect(f: &Field, j: usize, axis: usize) -> Result<Field> {
    let g = f.grid();
    if axis >= g.dim() || j > g.depth() {
        return invalid(format!("level {j} / axis {axis} outside the grid"));
    }
    let m = g.side();
    let len = m >> j;
    let stride = g.stride(axis);
    let block = m * stride;
    let vals = f.values();
    let mut out = vec![zero(); vals.len()];
    let inv = 1.0 / len as f64;
    for base in (0..vals.len()).step_by(block) {
        for o in 0..stride {
            for b in 0..(m / len) {
                let mut s = zero();
                for i in b * len..(b + 1) * len {
                    s += vals[base + i * stride + o];
                }
                s *= inv;
                for i in b * len..(b + 1) * len {
                    out[base + i * stride + o] = s;
                }
            }
        }
    }
    Ok(Field::from_vec_unchecked(*g, out))
}

/// Martingale square function (Σ_j |E_{j+1} f − E_j f|²)^{1/2} along `axis`.
pub fn martingale_sq(f: &Field, axis: usize) -> Result<Field> {
    let g = f.grid();
    let mut acc = vec![0.0; g.points()];
    let mut prev = dyadic_expect(f, 0, axis)?;
    for j in 0..g.depth() {
        let next = dyadic_expect(f, j + 1, axis)?;
        for ((a, x), y) in acc.iter_mut().zip(next.values()).zip(prev.values()) {
            *a += (x - y).norm_sqr();
        }
        prev = next;
    }
    Ok(real_field(*g, acc.into_iter().map(f64::sqrt).collect()))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CwwConstants {
    pub a: f64,
    pub b: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CwwOutcome {
    /// |{|g − E₀g| > 2λ, Δg ≤ γλ}|
    pub lhs: f64,
    /// |{M g > λ}|
    pub level_set: f64,
    pub gamma: f64,
    pub rhs: f64,
    pub violation: bool,
}

/// Maximal function used by the good-λ probe: the segment ladder along the
/// axis together with the degenerate radius 0, so that M g ≥ |g|.
pub fn cww_maximal(g: &Field, axis: usize) -> Result<Vec<f64>> {
    let grid = g.grid();
    if axis >= grid.dim() {
        return invalid("axis outside the grid");
    }
    let m = maximal_dir(g, &Direction::axis(grid.dim(), axis), &dyadic_radii(grid))?;
    Ok(m.re().into_iter().zip(g.abs()).map(|(a, b)| a.max(b)).collect())
}

pub fn cww_probe(g: &Field, lambda: f64, gamma: f64, axis: usize, c: CwwConstants) -> Result<CwwOutcome> {
    if !(lambda > 0.0 && gamma > 0.0) {
        return invalid("λ and γ must be positive");
    }
    let grid = g.grid();
    let cell_measure = grid.cell().powi(grid.dim() as i32);
    let e0 = dyadic_expect(g, 0, axis)?;
    let sq = martingale_sq(g, axis)?;
    let mx = cww_maximal(g, axis)?;
    let mut lhs = 0usize;
    for ((x, e), s) in g.values().iter().zip(e0.values()).zip(sq.values()) {
        if (x - e).norm() > 2.0 * lambda && s.re <= gamma * lambda {
            lhs += 1;
        }
    }
    let level = mx.iter().filter(|&&v| v > lambda).count();
    let lhs = lhs as f64 * cell_measure;
    let level_set = level as f64 * cell_measure;
    let rhs = c.a * (-c.b / (gamma * gamma)).exp() * level_set;
    Ok(CwwOutcome { lhs, level_set, gamma, rhs, violation: lhs > rhs })
}

/// Picks b from a grid and A as `safety` times the largest training ratio,
/// preferring the pair with the smallest total right-hand side.
pub fn calibrate_cww(training: &[CwwOutcome], safety: f64) -> CwwConstants {
    let mut best = CwwConstants { a: safety, b: 0.0 };
    let mut best_total = f64::INFINITY;
    for k in 0..=40 {
        let b = k as f64 * 0.05;
        let a = training
            .iter()
            .filter(|o| o.lhs > 0.0)
            .map(|o| o.lhs / ((-b / (o.gamma * o.gamma)).exp() * o.level_set))
            .fold(0.0, f64::max);
        let total: f64 = training.iter().map(|o| a * (-b / (o.gamma * o.gamma)).exp() * o.level_set).sum();
        if total < best_total {
            best_total = total;
            best = CwwConstants { a: a * safety, b };
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn window_full_period_is_mean() {
        let g = Grid::unit(1, 8).unwrap();
        let v: Vec<f64> = (0..8).map(|i| i as f64).collect();
        let w = window_mean(&g, &v, 0, 8);
        assert!(w.iter().all(|x| (x - 3.5).abs() < 1e-12));
    }

    #[test]
    fn nodes_sum_to_one() {
        let g = Grid::unit(2, 16).unwrap();
        let s: f64 = segment_nodes(&g, 0.3).iter().map(|p| p.1).sum();
        assert!((s - 1.0).abs() < 1e-14);
    }
}
