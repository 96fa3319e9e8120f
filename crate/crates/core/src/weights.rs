//! Directional Muckenhoupt constants on segment families, dual weights, the
//! Rubio de Francia majorant and weighted norm probes.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::directions::{Direction, DirectionSet};
use crate::error::{invalid, Error, Result};
use crate::grid::{Field, Grid};
use crate::normlab::{estimate_positive_norm, EstimatorConfig, MultiplierFamily, NormReport};
use crate::operators::{dyadic_radii, maximal_set, segment_multiplier, segment_stencil, wrap};

/// Smallest admissible weight value; smaller samples are raised to it.
pub const WEIGHT_FLOOR: f64 = 1e-8;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Weight {
    grid: Grid,
    values: Vec<f64>,
}

impl Weight {
    pub fn new(grid: Grid, mut values: Vec<f64>) -> Result<Weight> {
        if values.len() != grid.points() {
            return Err(Error::Shape(format!("{} weight values for {} points", values.len(), grid.points())));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("weight".into()));
        }
        if values.iter().any(|v| *v < 0.0) {
            return invalid("weights must be nonnegative");
        }
        for v in &mut values {
            *v = v.max(WEIGHT_FLOOR);
        }
        Ok(Weight { grid, values })
    }

    pub fn constant(grid: Grid, c: f64) -> Result<Weight> {
        Weight::new(grid, vec![c; grid.points()])
    }

    pub fn from_fn(grid: Grid, f: impl Fn(&[f64]) -> f64) -> Result<Weight> {
        let values = (0..grid.points()).map(|i| f(&grid.position(i))).collect();
        Weight::new(grid, values)
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Pointwise power; stays above the floor.
    pub fn powf(&self, a: f64) -> Result<Weight> {
        Weight::new(self.grid, self.values.iter().map(|v| v.powf(a)).collect())
    }

    pub fn mul(&self, other: &Weight) -> Result<Weight> {
        self.grid.check_same(&other.grid)?;
        Weight::new(self.grid, self.values.iter().zip(&other.values).map(|(a, b)| a * b).collect())
    }
}

/// σ = w^{−1/(p−1)}.
pub fn dual_weight(w: &Weight, p: f64) -> Result<Weight> {
    if !(p > 1.0 && p.is_finite()) {
        return invalid("dual weight needs 1 < p < ∞");
    }
    w.powf(-1.0 / (p - 1.0))
}

/// Segments centred on the sublattice of points whose coordinates are multiples
/// of `stride`, with the given radii and directions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SegmentFamily {
    pub stride: usize,
    pub radii: Vec<f64>,
    pub directions: Vec<Direction>,
}

impl SegmentFamily {
    pub fn new(stride: usize, radii: Vec<f64>, directions: Vec<Direction>) -> Result<SegmentFamily> {
        if stride == 0 || radii.is_empty() || directions.is_empty() {
            return invalid("segment family needs a stride ≥ 1, radii and directions");
        }
        if radii.iter().any(|r| !(*r > 0.0 && r.is_finite())) {
            return invalid("segment radii must be positive");
        }
        Ok(SegmentFamily { stride, radii, directions })
    }

    /// Dyadic radii of the grid and the members of `set`.
    pub fn dyadic(grid: &Grid, set: &DirectionSet, stride: usize) -> Result<SegmentFamily> {
        SegmentFamily::new(stride, dyadic_radii(grid), set.members().to_vec())
    }

    pub fn centers(&self, grid: &Grid) -> Vec<usize> {
        let mut c = vec![0usize; grid.dim()];
        (0..grid.points())
            .filter(|&i| {
                grid.coords(i, &mut c);
                c.iter().all(|k| k % self.stride == 0)
            })
            .collect()
    }

    fn stencils(&self, grid: &Grid) -> Result<Vec<Vec<(Vec<i64>, f64)>>> {
        let mut out = Vec::with_capacity(self.radii.len() * self.directions.len());
        for d in &self.directions {
            for &r in &self.radii {
                out.push(segment_stencil(grid, d, r)?);
            }
        }
        Ok(out)
    }
}

struct Placed {
    idx: Vec<usize>,
    wts: Vec<f64>,
}

fn place(grid: &Grid, center: usize, stencil: &[(Vec<i64>, f64)]) -> Placed {
    let mut c = vec![0usize; grid.dim()];
    grid.coords(center, &mut c);
    let mut p = vec![0i64; grid.dim()];
    let mut idx = Vec::with_capacity(stencil.len());
    let mut wts = Vec::with_capacity(stencil.len());
    for (o, w) in stencil {
        for a in 0..grid.dim() {
            p[a] = c[a] as i64 + o[a];
        }
        idx.push(wrap(grid, &p));
        wts.push(*w);
    }
    Placed { idx, wts }
}

fn avg(v: &[f64], s: &Placed) -> f64 {
    s.idx.iter().zip(&s.wts).map(|(&i, w)| v[i] * w).sum()
}

/// Maximum of `value(segment)` over every segment of the family.
fn sup_over_family(grid: &Grid, fam: &SegmentFamily, value: impl Fn(&Placed) -> f64 + Sync) -> Result<f64> {
    let stencils = fam.stencils(grid)?;
    let centers = fam.centers(grid);
    Ok(centers
        .par_iter()
        .map(|&c| stencils.iter().map(|st| value(&place(grid, c, st))).fold(f64::NEG_INFINITY, f64::max))
        .reduce(|| f64::NEG_INFINITY, f64::max))
}

/// (avg_I w)(avg_I σ)^{p−1} for the segment centred at grid point `center`.
pub fn ap_segment_value(w: &Weight, center: usize, omega: &Direction, radius: f64, p: f64) -> Result<f64> {
    let sigma = dual_weight(w, p)?;
    let st = segment_stencil(w.grid(), omega, radius)?;
    let s = place(w.grid(), center, &st);
    Ok(avg(w.values(), &s) * avg(sigma.values(), &s).powf(p - 1.0))
}

/// Sampled [w]_{A_p} over the segment family. For p = 1 this is the family
/// A₁ constant.
pub fn ap_constant(w: &Weight, family: &SegmentFamily, p: f64) -> Result<f64> {
    if p == 1.0 {
        return a1_family_constant(w, family);
    }
    let sigma = dual_weight(w, p)?;
    sup_over_family(w.grid(), family, |s| avg(w.values(), s) * avg(sigma.values(), s).powf(p - 1.0))
}

/// max over segments I and stencil points y ∈ I of avg_I u / u(y).
pub fn a1_family_constant(u: &Weight, family: &SegmentFamily) -> Result<f64> {
    let v = u.values();
    sup_over_family(u.grid(), family, |s| {
        let lo = s.idx.iter().map(|&i| v[i]).fold(f64::INFINITY, f64::min);
        avg(v, s) / lo
    })
}

/// max over grid points of M_Ω w / w.
pub fn a1_constant(w: &Weight, set: &DirectionSet, radii: &[f64]) -> Result<f64> {
    let f = Field::from_real(*w.grid(), w.values())?;
    let m = maximal_set(&f, set, radii)?;
    Ok(m.values().iter().zip(w.values()).map(|(a, b)| a.re / b).fold(f64::NEG_INFINITY, f64::max))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FactorizationReport {
    pub p: f64,
    pub p0: f64,
    /// sampled constant of the combined weight in A_{p0}
    pub lhs: f64,
    /// bound with the exponents that make the inequality true
    pub rhs: f64,
    /// [w]_{A_p}[u]_{A_1}
    pub rhs_plain: f64,
    pub holds: bool,
}

/// Compares [w u^{p−p0}]_{A_{p0}} with [w]_{A_p}[u]_{A_1}^{p0−p} when p ≤ p0, and
/// [w^a u^{1−a}]_{A_{p0}} with [w]_{A_p}^a [u]_{A_1}^{1−a}, a = (p0−1)/(p−1), when
/// p > p0. All constants are sampled sups over the same family.
pub fn factorization_check(
    w: &Weight,
    u: &Weight,
    p: f64,
    p0: f64,
    family: &SegmentFamily,
    rel_tol: f64,
) -> Result<FactorizationReport> {
    if !(p >= 1.0 && p.is_finite() && p0 > 1.0 && p0.is_finite()) {
        return invalid("factorization needs 1 ≤ p < ∞ and 1 < p0 < ∞");
    }
    let wp = ap_constant(w, family, p)?;
    let u1 = a1_family_constant(u, family)?;
    let (combined, rhs) = if p <= p0 {
        (w.mul(&u.powf(p - p0)?)?, wp * u1.powf(p0 - p))
    } else {
        let a = (p0 - 1.0) / (p - 1.0);
        (w.powf(a)?.mul(&u.powf(1.0 - a)?)?, wp.powf(a) * u1.powf(1.0 - a))
    };
    let lhs = ap_constant(&combined, family, p0)?;
    Ok(FactorizationReport { p, p0, lhs, rhs, rhs_plain: wp * u1, holds: lhs <= rhs * (1.0 + rel_tol) })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Majorant {
    pub terms: usize,
    pub norm: f64,
    /// E_K g
    pub value: Vec<f64>,
    /// M^{K+1}g / (2^K ‖M‖^K), the exact slack in M(E_K g) ≤ 2‖M‖ E_K g + tail
    pub tail: Vec<f64>,
}

/// E_K g = Σ_{k≤K} M^k g / (2^k ‖M‖^k) with M the segment maximal operator over `set`.
pub fn rubio_de_francia(g: &Field, set: &DirectionSet, radii: &[f64], norm: f64, terms: usize) -> Result<Majorant> {
    if g.values().iter().any(|z| z.re < 0.0 || z.im != 0.0) {
        return invalid("majorant needs a nonnegative real function");
    }
    if !(norm > 0.0 && norm.is_finite()) {
        return invalid("operator norm estimate must be positive");
    }
    let mut cur = g.clone();
    let mut value = g.re();
    let mut scale = 1.0;
    for _ in 0..terms {
        cur = maximal_set(&cur, set, radii)?;
        scale /= 2.0 * norm;
        for (v, z) in value.iter_mut().zip(cur.values()) {
            *v += z.re * scale;
        }
    }
    let next = maximal_set(&cur, set, radii)?;
    let tail = next.values().iter().map(|z| z.re * scale).collect();
    Ok(Majorant { terms, norm, value, tail })
}

/// Segment multipliers for every direction of `set` and radius, as a family for
/// the positive norm estimator.
pub fn segment_family(grid: &Grid, set: &DirectionSet, radii: &[f64]) -> Result<MultiplierFamily> {
    let mut parts = Vec::with_capacity(set.len() * radii.len());
    for (j, d) in set.members().iter().enumerate() {
        for &r in radii {
            parts.push((format!("seg{j}@{r}"), segment_multiplier(grid, d, r)?));
        }
    }
    MultiplierFamily::new(*grid, parts)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeightedProbe {
    pub label: String,
    pub ap: f64,
    pub norm: f64,
    #[serde(skip)]
    pub report: Option<NormReport>,
}

/// Lower estimate of ‖M_Ω‖_{L^p(w)} and the sampled [w]_{A_p^Ω}.
pub fn weighted_norm_probe(
    label: &str,
    set: &DirectionSet,
    radii: &[f64],
    p: f64,
    w: &Weight,
    segments: &SegmentFamily,
    cfg: &EstimatorConfig,
) -> Result<WeightedProbe> {
    let fam = segment_family(w.grid(), set, radii)?;
    let report = estimate_positive_norm(&fam, p, Some(w.values()), cfg)?;
    let ap = ap_constant(w, segments, p)?;
    Ok(WeightedProbe { label: label.to_string(), ap, norm: report.estimate, report: Some(report) })
}

pub fn write_probe_csv<W: Write>(rows: &[WeightedProbe], out: W) -> Result<()> {
    let mut wr = csv::Writer::from_writer(out);
    wr.write_record(["weight", "ap_constant", "norm_estimate"])?;
    for r in rows {
        wr.write_record([r.label.clone(), format!("{:.12e}", r.ap), format!("{:.12e}", r.norm)])?;
    }
    wr.flush()?;
    Ok(())
}

fn default_offset() -> f64 {
    1.0
}

fn default_split() -> f64 {
    0.5
}

/// Weight families as read from JSON, tagged by `kind`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum WeightFamily {
    /// (offset + |sin(2π x_axis / L)|)^a for each exponent a
    Power {
        exponents: Vec<f64>,
        #[serde(default)]
        axis: usize,
        #[serde(default = "default_offset")]
        offset: f64,
    },
    /// 1 below `split`·L along `axis`, `height` above, for each height
    Step {
        heights: Vec<f64>,
        #[serde(default)]
        axis: usize,
        #[serde(default = "default_split")]
        split: f64,
    },
    CustomGrid { values: Vec<Vec<f64>> },
}

impl WeightFamily {
    pub fn from_json(text: &str) -> Result<WeightFamily> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn realize(&self, grid: &Grid) -> Result<Vec<(String, Weight)>> {
        let check_axis = |axis: usize| {
            if axis >= grid.dim() {
                invalid(format!("axis {axis} outside a {}-dimensional grid", grid.dim()))
            } else {
                Ok(())
            }
        };
        match self {
            WeightFamily::Power { exponents, axis, offset } => {
                check_axis(*axis)?;
                if !(*offset >= 0.0 && offset.is_finite()) {
                    return invalid("power weight offset must be nonnegative");
                }
                let l = grid.length();
                exponents
                    .iter()
                    .map(|&a| {
                        let w = Weight::from_fn(*grid, |x| {
                            (offset + (2.0 * std::f64::consts::PI * x[*axis] / l).sin().abs()).powf(a)
                        })?;
                        Ok((format!("power a={a}"), w))
                    })
                    .collect()
            }
            WeightFamily::Step { heights, axis, split } => {
                check_axis(*axis)?;
                if !(0.0..=1.0).contains(split) {
                    return invalid("step split must lie in [0, 1]");
                }
                let cut = split * grid.length();
                heights
                    .iter()
                    .map(|&h| {
                        let w = Weight::from_fn(*grid, |x| if x[*axis] < cut { 1.0 } else { h })?;
                        Ok((format!("step K={h}"), w))
                    })
                    .collect()
            }
            WeightFamily::CustomGrid { values } => values
                .iter()
                .enumerate()
                .map(|(i, v)| Ok((format!("custom {i}"), Weight::new(*grid, v.clone())?)))
                .collect(),
        }
    }
}

/// The weight as a real field.
pub fn weight_field(w: &Weight) -> Field {
    Field::from_real(*w.grid(), w.values()).expect("weight matches its grid")
}
