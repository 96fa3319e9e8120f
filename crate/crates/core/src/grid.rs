//! Periodic sampling grids, fields, spectra and Fourier multipliers.
//!
//! The torus `[0, length)^dim` is sampled at `side` points per axis in
//! row-major order (last axis fastest). The transform pair is unitary, so
//! `‖f‖₂ = ‖f̂‖₂` holds for the plain ℓ² sums used throughout the crate.

use std::cell::RefCell;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftDirection, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest grid for which sampled symbols are materialized.
pub const MAX_SAMPLED_POINTS: usize = 1 << 20;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GridSpec", into = "GridSpec")]
pub struct Grid {
    dim: usize,
    side: usize,
    length: f64,
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
struct GridSpec {
    dim: usize,
    side: usize,
    #[serde(default = "unit_length")]
    length: f64,
}

fn unit_length() -> f64 {
    1.0
}

impl TryFrom<GridSpec> for Grid {
    type Error = Error;
    fn try_from(s: GridSpec) -> Result<Grid> {
        Grid::new(s.dim, s.side, s.length)
    }
}

impl From<Grid> for GridSpec {
    fn from(g: Grid) -> GridSpec {
        GridSpec { dim: g.dim, side: g.side, length: g.length }
    }
}

impl Grid {
    pub fn new(dim: usize, side: usize, length: f64) -> Result<Grid> {
        if !(1..=4).contains(&dim) {
            return Err(Error::InvalidGrid(format!("dimension {dim} not in 1..=4")));
        }
        if side < 4 || !side.is_power_of_two() {
            return Err(Error::InvalidGrid(format!("side {side} is not a power of two >= 4")));
        }
        if !(length.is_finite() && length > 0.0) {
            return Err(Error::InvalidGrid(format!("period {length} must be positive")));
        }
        // keep every index computation inside usize comfortably
        if side.checked_pow(dim as u32).map_or(true, |p| p > 1 << 28) {
            return Err(Error::InvalidGrid(format!("{side}^{dim} points is too large")));
        }
        Ok(Grid { dim, side, length })
    }

    pub fn unit(dim: usize, side: usize) -> Result<Grid> {
        Grid::new(dim, side, 1.0)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn side(&self) -> usize {
        self.side
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn points(&self) -> usize {
        self.side.pow(self.dim as u32)
    }

    /// Grid spacing.
    pub fn cell(&self) -> f64 {
        self.length / self.side as f64
    }

    /// log2 of the side.
    pub fn depth(&self) -> usize {
        self.side.trailing_zeros() as usize
    }

    /// Flat-index stride of `axis`.
    pub fn stride(&self, axis: usize) -> usize {
        self.side.pow((self.dim - 1 - axis) as u32)
    }

    /// Signed frequency stored in slot `k` of an axis; the Nyquist slot is negative.
    pub fn freq(&self, k: usize) -> i64 {
        let m = self.side as i64;
        let k = k as i64;
        if k < m / 2 {
            k
        } else {
            k - m
        }
    }

    /// Slot of a frequency, reduced modulo the side.
    pub fn slot(&self, xi: i64) -> usize {
        xi.rem_euclid(self.side as i64) as usize
    }

    /// Whether `xi` lies in the half-open box `[-M/2, M/2)`.
    pub fn contains_freq(&self, xi: i64) -> bool {
        let h = (self.side / 2) as i64;
        (-h..h).contains(&xi)
    }

    pub fn coords(&self, mut idx: usize, out: &mut [usize]) {
        for a in (0..self.dim).rev() {
            out[a] = idx % self.side;
            idx /= self.side;
        }
    }

    pub fn index(&self, coords: &[usize]) -> usize {
        coords.iter().fold(0, |acc, &c| acc * self.side + c)
    }

    /// Flat index of a frequency vector.
    pub fn freq_index(&self, xi: &[i64]) -> usize {
        xi.iter().fold(0, |acc, &k| acc * self.side + self.slot(k))
    }

    /// Frequency vectors of every slot in storage order.
    pub fn frequencies(&self) -> FreqIter {
        FreqIter { grid: *self, next: 0, buf: vec![0; self.dim] }
    }

    /// Calls `f(index, ξ)` for every frequency with ξ as floating coordinates.
    pub fn for_each_frequency(&self, mut f: impl FnMut(usize, &[f64])) {
        let mut c = vec![0usize; self.dim];
        let mut xi = vec![0.0; self.dim];
        for idx in 0..self.points() {
            self.coords(idx, &mut c);
            for a in 0..self.dim {
                xi[a] = self.freq(c[a]) as f64;
            }
            f(idx, &xi);
        }
    }

    /// Physical position of a grid point.
    pub fn position(&self, idx: usize) -> Vec<f64> {
        let mut c = vec![0; self.dim];
        self.coords(idx, &mut c);
        c.iter().map(|&k| k as f64 * self.cell()).collect()
    }

    /// Same dimension and period with twice the points per axis.
    pub fn refined(&self) -> Result<Grid> {
        Grid::new(self.dim, self.side * 2, self.length)
    }

    pub(crate) fn check_same(&self, other: &Grid) -> Result<()> {
        if self != other {
            return Err(Error::Shape(format!("{self} vs {other}")));
        }
        Ok(())
    }
}

impl fmt::Display for Grid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}^{} (period {})", self.side, self.dim, self.length)
    }
}

pub struct FreqIter {
    grid: Grid,
    next: usize,
    buf: Vec<usize>,
}

impl Iterator for FreqIter {
    type Item = Vec<i64>;
    fn next(&mut self) -> Option<Vec<i64>> {
        if self.next >= self.grid.points() {
            return None;
        }
        self.grid.coords(self.next, &mut self.buf);
        self.next += 1;
        Some(self.buf.iter().map(|&k| self.grid.freq(k)).collect())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Field {
    grid: Grid,
    values: Vec<Complex64>,
}

impl Field {
    pub fn new(grid: Grid, values: Vec<Complex64>) -> Result<Field> {
        if values.len() != grid.points() {
            return Err(Error::Shape(format!(
                "{} values for a grid of {} points",
                values.len(),
                grid.points()
            )));
        }
        if values.iter().any(|z| !(z.re.is_finite() && z.im.is_finite())) {
            return Err(Error::NonFinite("field".into()));
        }
        Ok(Field { grid, values })
    }

    pub(crate) fn from_vec_unchecked(grid: Grid, values: Vec<Complex64>) -> Field {
        debug_assert_eq!(values.len(), grid.points());
        Field { grid, values }
    }

    pub fn zeros(grid: Grid) -> Field {
        Field { grid, values: vec![Complex64::new(0.0, 0.0); grid.points()] }
    }

    pub fn constant(grid: Grid, c: Complex64) -> Field {
        Field { grid, values: vec![c; grid.points()] }
    }

    pub fn from_real(grid: Grid, values: &[f64]) -> Result<Field> {
        Field::new(grid, values.iter().map(|&v| Complex64::new(v, 0.0)).collect())
    }

    /// Samples `f` at the physical grid positions.
    pub fn from_fn(grid: Grid, mut f: impl FnMut(&[f64]) -> Complex64) -> Result<Field> {
        let mut c = vec![0usize; grid.dim()];
        let mut x = vec![0.0; grid.dim()];
        let h = grid.cell();
        let mut values = Vec::with_capacity(grid.points());
        for idx in 0..grid.points() {
            grid.coords(idx, &mut c);
            for a in 0..grid.dim() {
                x[a] = c[a] as f64 * h;
            }
            values.push(f(&x));
        }
        Field::new(grid, values)
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<Complex64> {
        self.values
    }

    pub fn abs(&self) -> Vec<f64> {
        self.values.iter().map(|z| z.norm()).collect()
    }

    pub fn re(&self) -> Vec<f64> {
        self.values.iter().map(|z| z.re).collect()
    }

    pub fn norm(&self) -> f64 {
        l2(&self.values)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, z| m.max(z.norm()))
    }

    /// ⟨f, g⟩ = Σ f ḡ.
    pub fn inner(&self, other: &Field) -> Result<Complex64> {
        self.grid.check_same(&other.grid)?;
        Ok(self.values.iter().zip(&other.values).map(|(a, b)| a * b.conj()).sum())
    }

    pub fn map(&self, f: impl Fn(Complex64) -> Complex64) -> Field {
        Field { grid: self.grid, values: self.values.iter().map(|&z| f(z)).collect() }
    }

    pub fn scale(&self, c: Complex64) -> Field {
        self.map(|z| z * c)
    }

    pub fn add(&self, other: &Field) -> Result<Field> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Field) -> Result<Field> {
        self.zip_with(other, |a, b| a - b)
    }

    pub fn zip_with(
        &self,
        other: &Field,
        f: impl Fn(Complex64, Complex64) -> Complex64,
    ) -> Result<Field> {
        self.grid.check_same(&other.grid)?;
        let values = self.values.iter().zip(&other.values).map(|(&a, &b)| f(a, b)).collect();
        Ok(Field { grid: self.grid, values })
    }

    /// Largest pointwise difference.
    pub fn max_diff(&self, other: &Field) -> Result<f64> {
        self.grid.check_same(&other.grid)?;
        Ok(self.values.iter().zip(&other.values).fold(0.0, |m, (a, b)| m.max((a - b).norm())))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Spectrum {
    grid: Grid,
    coeffs: Vec<Complex64>,
}

impl Spectrum {
    pub fn new(grid: Grid, coeffs: Vec<Complex64>) -> Result<Spectrum> {
        if coeffs.len() != grid.points() {
            return Err(Error::Shape(format!(
                "{} coefficients for a grid of {} points",
                coeffs.len(),
                grid.points()
            )));
        }
        if coeffs.iter().any(|z| !(z.re.is_finite() && z.im.is_finite())) {
            return Err(Error::NonFinite("spectrum".into()));
        }
        Ok(Spectrum { grid, coeffs })
    }

    /// Builds a spectrum from a function of the integer frequency vector.
    pub fn from_fn(grid: Grid, mut f: impl FnMut(&[i64]) -> Complex64) -> Result<Spectrum> {
        let coeffs = grid.frequencies().map(|xi| f(&xi)).collect();
        Spectrum::new(grid, coeffs)
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    /// Coefficients in storage order (slot `k` of each axis holds `freq(k)`).
    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<Complex64> {
        self.coeffs
    }

    /// Coefficient at a frequency inside the box.
    pub fn get(&self, xi: &[i64]) -> Option<Complex64> {
        if xi.len() != self.grid.dim() || !xi.iter().all(|&k| self.grid.contains_freq(k)) {
            return None;
        }
        Some(self.coeffs[self.grid.freq_index(xi)])
    }

    pub fn norm(&self) -> f64 {
        l2(&self.coeffs)
    }
}

/// Frequency-domain multiplier defined on all of ℝⁿ and sampled at lattice points.
#[derive(Clone)]
pub struct Symbol {
    label: String,
    eval: Arc<dyn Fn(&[f64]) -> Complex64 + Send + Sync>,
}

impl fmt::Debug for Symbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Symbol({})", self.label)
    }
}

impl Symbol {
    pub fn new(
        label: impl Into<String>,
        eval: impl Fn(&[f64]) -> Complex64 + Send + Sync + 'static,
    ) -> Symbol {
        Symbol { label: label.into(), eval: Arc::new(eval) }
    }

    pub fn real(label: impl Into<String>, eval: impl Fn(&[f64]) -> f64 + Send + Sync + 'static) -> Symbol {
        Symbol::new(label, move |xi| Complex64::new(eval(xi), 0.0))
    }

    pub fn constant(c: Complex64) -> Symbol {
        Symbol::new(format!("{c}"), move |_| c)
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn eval(&self, xi: &[f64]) -> Complex64 {
        (self.eval)(xi)
    }

    pub fn eval_int(&self, xi: &[i64]) -> Complex64 {
        let v: Vec<f64> = xi.iter().map(|&k| k as f64).collect();
        self.eval(&v)
    }

    /// Pointwise product.
    pub fn product(&self, other: &Symbol) -> Symbol {
        let (a, b) = (self.eval.clone(), other.eval.clone());
        Symbol {
            label: format!("{}·{}", self.label, other.label),
            eval: Arc::new(move |xi| a(xi) * b(xi)),
        }
    }

    pub fn product_all(symbols: &[Symbol]) -> Symbol {
        match symbols.split_first() {
            None => Symbol::constant(Complex64::new(1.0, 0.0)),
            Some((first, rest)) => rest.iter().fold(first.clone(), |acc, s| acc.product(s)),
        }
    }

    /// `1 − m`.
    pub fn complement(&self) -> Symbol {
        let a = self.eval.clone();
        Symbol { label: format!("1-{}", self.label), eval: Arc::new(move |xi| 1.0 - a(xi)) }
    }

    pub fn sample(&self, grid: &Grid) -> Result<SampledSymbol> {
        if grid.points() > MAX_SAMPLED_POINTS {
            return Err(Error::Budget(format!(
                "refusing to materialize {} symbol values",
                grid.points()
            )));
        }
        let mut values = vec![Complex64::new(0.0, 0.0); grid.points()];
        let mut bad = false;
        grid.for_each_frequency(|i, xi| {
            let v = self.eval(xi);
            bad |= !(v.re.is_finite() && v.im.is_finite());
            values[i] = v;
        });
        if bad {
            return Err(Error::NonFinite(format!("symbol {}", self.label)));
        }
        Ok(SampledSymbol { grid: *grid, values })
    }
}

/// Symbol values on a grid's frequency box, in storage order.
#[derive(Clone, Debug, PartialEq)]
pub struct SampledSymbol {
    grid: Grid,
    values: Vec<Complex64>,
}

impl SampledSymbol {
    pub fn from_values(grid: Grid, values: Vec<Complex64>) -> Result<SampledSymbol> {
        Spectrum::new(grid, values).map(|s| SampledSymbol { grid: s.grid, values: s.coeffs })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn product(&self, other: &SampledSymbol) -> Result<SampledSymbol> {
        self.grid.check_same(&other.grid)?;
        let values = self.values.iter().zip(&other.values).map(|(a, b)| a * b).collect();
        Ok(SampledSymbol { grid: self.grid, values })
    }

    pub fn conj(&self) -> SampledSymbol {
        SampledSymbol { grid: self.grid, values: self.values.iter().map(|z| z.conj()).collect() }
    }
}

pub fn forward_transform(f: &Field) -> Spectrum {
    let mut data = f.values.clone();
    fft_nd(&f.grid, &mut data, FftDirection::Forward);
    Spectrum { grid: f.grid, coeffs: data }
}

pub fn inverse_transform(s: &Spectrum) -> Field {
    let mut data = s.coeffs.clone();
    fft_nd(&s.grid, &mut data, FftDirection::Inverse);
    Field { grid: s.grid, values: data }
}

/// Multiplies the spectrum of `f` by `m` evaluated at each lattice frequency.
pub fn apply_multiplier(f: &Field, m: &Symbol) -> Result<Field> {
    let mut data = f.values.clone();
    fft_nd(&f.grid, &mut data, FftDirection::Forward);
    let mut bad = false;
    f.grid.for_each_frequency(|i, xi| {
        let v = m.eval(xi);
        bad |= !(v.re.is_finite() && v.im.is_finite());
        data[i] *= v;
    });
    if bad {
        return Err(Error::NonFinite(format!("symbol {}", m.label())));
    }
    fft_nd(&f.grid, &mut data, FftDirection::Inverse);
    Ok(Field { grid: f.grid, values: data })
}

pub fn apply_sampled(f: &Field, m: &SampledSymbol) -> Result<Field> {
    f.grid.check_same(&m.grid)?;
    let mut data = f.values.clone();
    multiply_in_place(&f.grid, &mut data, &m.values);
    Ok(Field { grid: f.grid, values: data })
}

/// In-place `data ← F⁻¹(m · F data)`.
pub(crate) fn multiply_in_place(grid: &Grid, data: &mut [Complex64], m: &[Complex64]) {
    fft_nd(grid, data, FftDirection::Forward);
    for (z, w) in data.iter_mut().zip(m) {
        *z *= w;
    }
    fft_nd(grid, data, FftDirection::Inverse);
}

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

fn plan(len: usize, dir: FftDirection) -> Arc<dyn Fft<f64>> {
    PLANNER.with(|p| p.borrow_mut().plan_fft(len, dir))
}

/// Unitary n-dimensional transform in place.
pub(crate) fn fft_nd(grid: &Grid, data: &mut [Complex64], dir: FftDirection) {
    let m = grid.side();
    let total = data.len();
    debug_assert_eq!(total, grid.points());
    let fft = plan(m, dir);
    let mut scratch = vec![Complex64::new(0.0, 0.0); fft.get_inplace_scratch_len()];
    let mut buf: Vec<Complex64> = Vec::new();
    for axis in 0..grid.dim() {
        let stride = grid.stride(axis);
        if stride == 1 {
            fft.process_with_scratch(data, &mut scratch);
            continue;
        }
        // transpose each (m × stride) block so the lines become contiguous
        let block = m * stride;
        buf.resize(block, Complex64::new(0.0, 0.0));
        for base in (0..total).step_by(block) {
            let chunk = &mut data[base..base + block];
            for i in 0..m {
                for o in 0..stride {
                    buf[o * m + i] = chunk[i * stride + o];
                }
            }
            fft.process_with_scratch(&mut buf, &mut scratch);
            for i in 0..m {
                for o in 0..stride {
                    chunk[i * stride + o] = buf[o * m + i];
                }
            }
        }
    }
    let s = 1.0 / (total as f64).sqrt();
    for z in data.iter_mut() {
        *z *= s;
    }
}

pub(crate) fn l2(v: &[Complex64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}
