//! Direction sets, lacunary dissections, sectors and cells.

use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

const UNIT_TOL: f64 = 1e-12;
const PARSE_TOL: f64 = 1e-9;
const GUARD: f64 = 1e-12;

/// Unit vector. `raw` keeps exact unnormalized coordinates when a generator
/// produced dyadic data, so sector ratios can be formed without rounding.
#[derive(Clone, Debug, PartialEq)]
pub struct Direction {
    coords: Vec<f64>,
    raw: Option<Vec<f64>>,
}

impl Direction {
    /// Normalizes `v`.
    pub fn new(v: Vec<f64>) -> Result<Direction> {
        let coords = normalized(&v)?;
        Ok(Direction { coords, raw: None })
    }

    /// Normalizes `v` and keeps it as exact ratio data.
    pub fn exact(v: Vec<f64>) -> Result<Direction> {
        let coords = normalized(&v)?;
        Ok(Direction { coords, raw: Some(v) })
    }

    /// Accepts an already-unit vector within tolerance `tol`, renormalizing it.
    pub fn from_unit(v: Vec<f64>, tol: f64) -> Result<Direction> {
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if !n.is_finite() || (n - 1.0).abs() > tol {
            return invalid(format!("vector of norm {n} is not a unit vector"));
        }
        Direction::new(v)
    }

    pub fn angle2d(theta: f64) -> Direction {
        Direction { coords: vec![theta.cos(), theta.sin()], raw: None }
    }

    pub fn axis(dim: usize, a: usize) -> Direction {
        let mut v = vec![0.0; dim];
        v[a] = 1.0;
        Direction { coords: v.clone(), raw: Some(v) }
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn raw(&self) -> Option<&[f64]> {
        self.raw.as_deref()
    }

    pub fn dot(&self, xi: &[f64]) -> f64 {
        self.coords.iter().zip(xi).map(|(a, b)| a * b).sum()
    }

    pub fn neg(&self) -> Direction {
        Direction {
            coords: self.coords.iter().map(|x| -x).collect(),
            raw: self.raw.as_ref().map(|r| r.iter().map(|x| -x).collect()),
        }
    }

    /// Angle of a planar direction in (−π, π].
    pub fn angle(&self) -> f64 {
        self.coords[1].atan2(self.coords[0])
    }

    /// Components in `basis`, exact when both the raw data and the canonical basis are available.
    fn components(&self, basis: &Basis) -> (Vec<f64>, bool) {
        match (&self.raw, basis.is_canonical()) {
            (Some(r), true) => (r.clone(), true),
            _ => (basis.vectors.iter().map(|e| self.dot(e)).collect(), false),
        }
    }
}

fn normalized(v: &[f64]) -> Result<Vec<f64>> {
    if v.is_empty() || v.iter().any(|x| !x.is_finite()) {
        return invalid("direction needs finite coordinates");
    }
    let scale = v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    if scale == 0.0 {
        return invalid("zero vector has no direction");
    }
    let n = v.iter().map(|x| (x / scale).powi(2)).sum::<f64>().sqrt() * scale;
    let out: Vec<f64> = v.iter().map(|x| x / n).collect();
    if v.iter().zip(&out).any(|(a, b)| *a != 0.0 && *b == 0.0) {
        return Err(Error::Underflow("normalization flushed a coordinate to zero".into()));
    }
    Ok(out)
}

/// Orthonormal basis, stored as row vectors.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(transparent)]
pub struct Basis {
    vectors: Vec<Vec<f64>>,
}

impl Basis {
    pub fn new(vectors: Vec<Vec<f64>>) -> Result<Basis> {
        let d = vectors.len();
        if d == 0 || vectors.iter().any(|v| v.len() != d) {
            return invalid("basis must be a square array of row vectors");
        }
        for i in 0..d {
            for j in 0..d {
                let dot: f64 = vectors[i].iter().zip(&vectors[j]).map(|(a, b)| a * b).sum();
                let want = if i == j { 1.0 } else { 0.0 };
                if !((dot - want).abs() <= UNIT_TOL) {
                    return invalid(format!("basis rows {i},{j} have inner product {dot}"));
                }
            }
        }
        Ok(Basis { vectors })
    }

    pub fn canonical(d: usize) -> Basis {
        let vectors = (0..d)
            .map(|i| (0..d).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
            .collect();
        Basis { vectors }
    }

    /// Planar basis with first vector at angle `theta`.
    pub fn rotation2d(theta: f64) -> Basis {
        let (s, c) = theta.sin_cos();
        Basis { vectors: vec![vec![c, s], vec![-s, c]] }
    }

    pub fn dim(&self) -> usize {
        self.vectors.len()
    }

    pub fn vectors(&self) -> &[Vec<f64>] {
        &self.vectors
    }

    pub fn is_canonical(&self) -> bool {
        self.vectors
            .iter()
            .enumerate()
            .all(|(i, v)| v.iter().enumerate().all(|(j, &x)| x == if i == j { 1.0 } else { 0.0 }))
    }
}

impl<'de> Deserialize<'de> for Basis {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Basis, D::Error> {
        let rows = Vec::<Vec<f64>>::deserialize(d)?;
        Basis::new(rows).map_err(serde::de::Error::custom)
    }
}

/// Coordinate pair σ = (first, second), zero-based, first < second.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Pair {
    pub first: usize,
    pub second: usize,
}

impl Pair {
    pub fn new(first: usize, second: usize) -> Result<Pair> {
        if first >= second {
            return invalid(format!("pair ({first},{second}) must be increasing"));
        }
        Ok(Pair { first, second })
    }

    pub fn contains(&self, a: usize) -> bool {
        self.first == a || self.second == a
    }

    /// Shared coordinate of two distinct pairs.
    pub fn common(&self, other: &Pair) -> Option<usize> {
        [self.first, self.second].into_iter().find(|&a| other.contains(a))
    }
}

impl fmt::Display for Pair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.first + 1, self.second + 1)
    }
}

/// All pairs j < k of {0..d}, lexicographic.
pub fn sigma_set(d: usize) -> Vec<Pair> {
    let mut out = Vec::with_capacity(d * d.saturating_sub(1) / 2);
    for j in 0..d {
        for k in j + 1..d {
            out.push(Pair { first: j, second: k });
        }
    }
    out
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dissection {
    basis: Basis,
    sigma: Vec<Pair>,
}

impl Dissection {
    pub fn new(basis: Basis) -> Dissection {
        let sigma = sigma_set(basis.dim());
        Dissection { basis, sigma }
    }

    pub fn canonical(d: usize) -> Dissection {
        Dissection::new(Basis::canonical(d))
    }

    pub fn basis(&self) -> &Basis {
        &self.basis
    }

    pub fn sigma_set(&self) -> &[Pair] {
        &self.sigma
    }

    pub fn dim(&self) -> usize {
        self.basis.dim()
    }

    /// θ_{σ,ℓ} = 2^{−ℓ}.
    pub fn theta(ell: i64) -> f64 {
        pow2(-ell)
    }
}

/// ℓ_σ for every σ ∈ Σ(d), in `sigma_set` order.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct CellIndex {
    dim: usize,
    entries: Vec<i64>,
}

impl CellIndex {
    pub fn new(dim: usize, entries: Vec<i64>) -> Result<CellIndex> {
        if entries.len() != dim * dim.saturating_sub(1) / 2 {
            return invalid(format!("{} entries for a cell in dimension {dim}", entries.len()));
        }
        Ok(CellIndex { dim, entries })
    }

    /// Same ℓ for every pair.
    pub fn uniform(dim: usize, ell: i64) -> CellIndex {
        CellIndex { dim, entries: vec![ell; dim * dim.saturating_sub(1) / 2] }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn entries(&self) -> &[i64] {
        &self.entries
    }

    pub fn get(&self, sigma: Pair) -> i64 {
        self.entries[pair_position(self.dim, sigma)]
    }

    pub fn shifted(&self, s: i64) -> CellIndex {
        CellIndex { dim: self.dim, entries: self.entries.iter().map(|l| l + s).collect() }
    }
}

impl fmt::Display for CellIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = sigma_set(self.dim)
            .iter()
            .zip(&self.entries)
            .map(|(p, l)| format!("{p}:{l}"))
            .collect();
        write!(f, "[{}]", parts.join(" "))
    }
}

pub fn pair_position(d: usize, sigma: Pair) -> usize {
    // pairs before row j: Σ_{i<j} (d−1−i)
    let j = sigma.first;
    j * (2 * d - j - 1) / 2 + (sigma.second - j - 1)
}

pub(crate) fn pow2(e: i64) -> f64 {
    (e as f64).exp2()
}

/// The ℓ with 2^{−(ℓ+1)} ≤ r < 2^{−ℓ}, computed exactly from the binary exponent.
pub fn dyadic_band(r: f64) -> i64 {
    debug_assert!(r > 0.0 && r.is_finite());
    let mut e = r.log2().floor() as i64 + 1;
    while pow2(e - 1) > r {
        e -= 1;
    }
    while r >= pow2(e) {
        e += 1;
    }
    -e
}

fn sector_key(omega: &Direction, sigma: Pair, basis: &Basis) -> Result<Option<i64>> {
    let (c, exact) = omega.components(basis);
    let (a, b) = (c[sigma.first].abs(), c[sigma.second].abs());
    if a == 0.0 || b == 0.0 {
        return Ok(None);
    }
    let r = b / a;
    if r == 0.0 || !r.is_finite() {
        return Err(Error::Underflow(format!("ratio {b}/{a} leaves the float range")));
    }
    let ell = dyadic_band(r);
    if !exact {
        let lo = pow2(-(ell + 1));
        let hi = pow2(-ell);
        if (r - lo).abs() <= GUARD * lo || (hi - r).abs() <= GUARD * hi {
            log::warn!("ratio {r} for pair {sigma} lies within the guard band of a dyadic boundary");
        }
    }
    Ok(Some(ell))
}

pub fn sector_of(omega: &Direction, sigma: Pair, basis: &Basis) -> Result<i64> {
    if omega.dim() != basis.dim() || sigma.second >= basis.dim() {
        return invalid("direction, pair and basis dimensions disagree");
    }
    sector_key(omega, sigma, basis)?.ok_or_else(|| Error::Hyperplane(sigma.to_string()))
}

pub fn cell_of(omega: &Direction, dissection: &Dissection) -> Result<CellIndex> {
    let entries = dissection
        .sigma_set()
        .iter()
        .map(|&s| sector_of(omega, s, dissection.basis()))
        .collect::<Result<Vec<_>>>()?;
    CellIndex::new(dissection.dim(), entries)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "DirectionSetJson", into = "DirectionSetJson")]
pub struct DirectionSet {
    dims: usize,
    members: Vec<Direction>,
    claimed_order: Option<u32>,
    basis: Option<Basis>,
}

impl DirectionSet {
    pub fn new(dims: usize, members: Vec<Direction>) -> Result<DirectionSet> {
        if dims == 0 {
            return invalid("direction sets need a positive dimension");
        }
        if let Some(m) = members.iter().find(|m| m.dim() != dims) {
            return invalid(format!("member of dimension {} in a set of dimension {dims}", m.dim()));
        }
        for i in 0..members.len() {
            for j in 0..i {
                if members[i].coords == members[j].coords {
                    return invalid(format!("members {j} and {i} coincide"));
                }
            }
        }
        Ok(DirectionSet { dims, members, claimed_order: None, basis: None })
    }

    pub fn with_order(mut self, order: u32) -> DirectionSet {
        self.claimed_order = Some(order);
        self
    }

    pub fn with_basis(mut self, basis: Basis) -> Result<DirectionSet> {
        if basis.dim() != self.dims {
            return invalid("basis dimension differs from the set");
        }
        self.basis = Some(basis);
        Ok(self)
    }

    pub fn dims(&self) -> usize {
        self.dims
    }

    pub fn members(&self) -> &[Direction] {
        &self.members
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn claimed_order(&self) -> Option<u32> {
        self.claimed_order
    }

    pub fn basis(&self) -> Option<&Basis> {
        self.basis.as_ref()
    }

    /// The first `n` members, keeping metadata.
    pub fn prefix(&self, n: usize) -> DirectionSet {
        DirectionSet {
            dims: self.dims,
            members: self.members[..n.min(self.members.len())].to_vec(),
            claimed_order: self.claimed_order,
            basis: self.basis.clone(),
        }
    }

    /// Members plus the attached basis vectors (the statement convention).
    pub fn with_basis_members(&self) -> Result<DirectionSet> {
        let mut members = self.members.clone();
        if let Some(b) = &self.basis {
            for v in b.vectors() {
                if !members.iter().any(|m| m.coords == *v) {
                    members.push(Direction { coords: v.clone(), raw: None });
                }
            }
        }
        let mut out = DirectionSet::new(self.dims, members)?;
        out.claimed_order = self.claimed_order;
        out.basis = self.basis.clone();
        Ok(out)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&DirectionSetJson::from(self))?)
    }

    pub fn from_json(text: &str) -> Result<DirectionSet> {
        let j: DirectionSetJson = serde_json::from_str(text)?;
        j.try_into()
    }

    /// CSV rows of member coordinates and cell entries.
    pub fn write_cell_table<W: Write>(&self, dissection: &Dissection, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header: Vec<String> = (0..self.dims).map(|i| format!("w{}", i + 1)).collect();
        header.extend(dissection.sigma_set().iter().map(|p| format!("l{}{}", p.first + 1, p.second + 1)));
        w.write_record(&header)?;
        for m in &self.members {
            let cell = cell_of(m, dissection)?;
            let mut row: Vec<String> = m.coords.iter().map(|x| format!("{x:.17e}")).collect();
            row.extend(cell.entries.iter().map(|l| l.to_string()));
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }
}

impl Serialize for Direction {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.coords.serialize(s)
    }
}

impl<'de> Deserialize<'de> for Direction {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Direction, D::Error> {
        let v = Vec::<f64>::deserialize(d)?;
        Direction::from_unit(v, PARSE_TOL).map_err(serde::de::Error::custom)
    }
}

#[derive(Clone, Serialize, Deserialize)]
struct DirectionSetJson {
    dims: usize,
    #[serde(default)]
    order: Option<u32>,
    #[serde(default)]
    basis: Option<Vec<Vec<f64>>>,
    members: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    raw: Option<Vec<Vec<f64>>>,
}

impl From<&DirectionSet> for DirectionSetJson {
    fn from(s: &DirectionSet) -> Self {
        let raw = if s.members.iter().all(|m| m.raw.is_some()) && !s.members.is_empty() {
            Some(s.members.iter().map(|m| m.raw.clone().unwrap()).collect())
        } else {
            None
        };
        DirectionSetJson {
            dims: s.dims,
            order: s.claimed_order,
            basis: s.basis.as_ref().map(|b| b.vectors.clone()),
            members: s.members.iter().map(|m| m.coords.clone()).collect(),
            raw,
        }
    }
}

impl From<DirectionSet> for DirectionSetJson {
    fn from(s: DirectionSet) -> Self {
        DirectionSetJson::from(&s)
    }
}

impl TryFrom<DirectionSetJson> for DirectionSet {
    type Error = Error;
    fn try_from(j: DirectionSetJson) -> Result<DirectionSet> {
        if j.dims == 0 || j.dims > 64 {
            return invalid(format!("unsupported dimension {}", j.dims));
        }
        let mut members = Vec::with_capacity(j.members.len());
        for (i, v) in j.members.into_iter().enumerate() {
            let mut d = Direction::from_unit(v, PARSE_TOL)?;
            if let Some(raw) = j.raw.as_ref().and_then(|r| r.get(i)) {
                let check = Direction::exact(raw.clone())?;
                if check.coords.len() != d.coords.len()
                    || check.coords.iter().zip(&d.coords).any(|(a, b)| (a - b).abs() > PARSE_TOL)
                {
                    return invalid(format!("raw data of member {i} disagrees with its coordinates"));
                }
                d.raw = check.raw;
            }
            members.push(d);
        }
        let mut set = DirectionSet::new(j.dims, members)?;
        set.claimed_order = j.order;
        if let Some(b) = j.basis {
            set = set.with_basis(Basis::new(b)?)?;
        }
        Ok(set)
    }
}

/// Vectors (2^{k_1},…,2^{k_n}) over k ∈ range^n, up to collinearity.
pub fn carbery_set(n: usize, lo: i32, hi: i32) -> Result<DirectionSet> {
    if n == 0 || lo > hi {
        return invalid("carbery_set needs n ≥ 1 and a nonempty exponent range");
    }
    let spread = (hi - lo) as i64;
    if spread > 1000 {
        return Err(Error::Underflow(format!("exponent spread {spread} exceeds the float range")));
    }
    // collinear vectors share the differences k_i − k_1
    let width = (2 * spread + 1) as usize;
    let mut keys = std::collections::BTreeSet::new();
    let total = ((hi - lo + 1) as usize).checked_pow(n as u32).filter(|&t| t <= 10_000_000);
    let total = total.ok_or_else(|| Error::Budget("carbery_set enumeration too large".into()))?;
    let mut k = vec![lo; n];
    for _ in 0..total {
        let diffs: Vec<i64> = k.iter().map(|&x| (x - k[0]) as i64).collect();
        keys.insert(diffs);
        for a in (0..n).rev() {
            if k[a] < hi {
                k[a] += 1;
                break;
            }
            k[a] = lo;
        }
    }
    debug_assert!(keys.len() <= width.pow(n.saturating_sub(1) as u32));
    let members = keys
        .into_iter()
        .map(|d| Direction::exact(d.iter().map(|&e| pow2(e)).collect()))
        .collect::<Result<Vec<_>>>()?;
    Ok(DirectionSet::new(n, members)?
        .with_order(n.saturating_sub(1) as u32)
        .with_basis(Basis::canonical(n))?)
}

/// Normalized (λ^{kα_1},…,λ^{kα_n}) for k = 1..count, up to collinearity.
pub fn nsw_set(lambda: f64, alphas: &[f64], count: usize) -> Result<DirectionSet> {
    if !(lambda > 0.0 && lambda < 1.0) || alphas.is_empty() || alphas.iter().any(|a| !(*a > 0.0)) || count == 0 {
        return invalid("nsw_set needs 0 < λ < 1, positive exponents and count ≥ 1");
    }
    let mut members: Vec<Direction> = Vec::new();
    for k in 1..=count {
        let raw: Vec<f64> = alphas.iter().map(|a| lambda.powf(k as f64 * a)).collect();
        if raw.iter().any(|x| !x.is_normal()) {
            return Err(Error::Underflow(format!("λ^(kα) underflows at k = {k}")));
        }
        let d = Direction::exact(raw)?;
        let dup = members.iter().any(|m| {
            m.coords.iter().zip(&d.coords).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max) < UNIT_TOL
        });
        if !dup {
            members.push(d);
        }
    }
    Ok(DirectionSet::new(alphas.len(), members)?.with_basis(Basis::canonical(alphas.len()))?)
}

/// Planar slopes (1, 2^{−k}), k = 1..count, kept exact; prefixes are nested.
pub fn slopes2d(count: usize) -> Result<DirectionSet> {
    if count == 0 || count > 1000 {
        return invalid("slopes2d needs 1 ≤ count ≤ 1000");
    }
    let members = (1..=count as i64).map(|k| Direction::exact(vec![1.0, pow2(-k)])).collect::<Result<Vec<_>>>()?;
    Ok(DirectionSet::new(2, members)?.with_order(1).with_basis(Basis::canonical(2))?)
}

/// Planar lacunary set of order `order`: slopes 2^{−k}, k = 1..depth, and in every
/// gap of the previous order a rotated copy of a dyadic sequence accumulating at
/// the gap's lower endpoint.
pub fn lacunary2d(order: u32, depth: usize) -> Result<DirectionSet> {
    if depth == 0 {
        return invalid("lacunary2d needs depth ≥ 1");
    }
    if order == 0 {
        let d = Direction::exact(vec![1.0, 0.5])?;
        return Ok(DirectionSet::new(2, vec![d])?.with_order(0).with_basis(Basis::canonical(2))?);
    }
    let mut members: Vec<Direction> = (1..=depth)
        .rev()
        .map(|k| Direction::exact(vec![1.0, pow2(-(k as i64))]))
        .collect::<Result<_>>()?;
    for _ in 1..order {
        let mut next = members.clone();
        for w in members.windows(2) {
            let (a, b) = (w[0].angle(), w[1].angle());
            let gap = (b - a).tan();
            // keep the inserted points well inside the band of `a`
            let e = dyadic_band(gap / 16.0);
            let tau = 0.75 * pow2(-e - 1);
            let (s, c) = a.sin_cos();
            for j in 1..=depth {
                let t = tau * pow2(-(j as i64));
                next.push(Direction::new(vec![c - s * t, s + c * t])?);
            }
        }
        next.sort_by(|x, y| x.angle().total_cmp(&y.angle()));
        members = next;
    }
    Ok(DirectionSet::new(2, members)?.with_order(order).with_basis(Basis::canonical(2))?)
}

/// `n` directions equispaced on the open first-quadrant arc: angles jπ/(2(n+1)).
pub fn uniform_set(n: usize) -> Result<DirectionSet> {
    if n == 0 {
        return invalid("uniform_set needs N ≥ 1");
    }
    let step = std::f64::consts::FRAC_PI_2 / (n + 1) as f64;
    let members = (1..=n).map(|j| Direction::angle2d(j as f64 * step)).collect();
    DirectionSet::new(2, members)?.with_basis(Basis::canonical(2))
}

/// Failure witness: a sector at recursion depth `level` that could not be certified.
#[derive(Clone, Debug, PartialEq)]
pub struct LacunaryWitness {
    pub level: usize,
    /// `None` when the whole set fails at order 0.
    pub sigma: Option<Pair>,
    /// `None` marks the coordinate-hyperplane sector.
    pub ell: Option<i64>,
    pub members: Vec<Direction>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LacunaryVerdict {
    pub holds: bool,
    pub witness: Option<LacunaryWitness>,
}

/// Supplies the basis used to re-dissect a sector at the next recursion level.
pub type BasisProvider<'a> = &'a dyn Fn(&[Direction], &Basis, usize) -> Basis;

pub fn same_basis(_: &[Direction], parent: &Basis, _: usize) -> Basis {
    parent.clone()
}

/// Planar provider: first basis vector along the member of smallest angle.
pub fn align_lowest(members: &[Direction], parent: &Basis, _: usize) -> Basis {
    if parent.dim() != 2 || members.is_empty() {
        return parent.clone();
    }
    let a = members.iter().map(|m| m.angle()).fold(f64::INFINITY, f64::min);
    Basis::rotation2d(a)
}

pub fn verify_lacunary(set: &DirectionSet, basis: &Basis, order: u32, provider: BasisProvider) -> LacunaryVerdict {
    let res = if order == 0 && set.len() > 1 {
        Err(LacunaryWitness { level: 0, sigma: None, ell: None, members: set.members().to_vec() })
    } else {
        verify_rec(set.members(), basis, order, provider, 0)
    };
    match res {
        Ok(()) => LacunaryVerdict { holds: true, witness: None },
        Err(w) => LacunaryVerdict { holds: false, witness: Some(w) },
    }
}

fn verify_rec(
    members: &[Direction],
    basis: &Basis,
    order: u32,
    provider: BasisProvider,
    level: usize,
) -> std::result::Result<(), LacunaryWitness> {
    if members.len() <= 1 {
        return Ok(());
    }
    for s in sigma_set(basis.dim()) {
        let mut sectors: BTreeMap<Option<i64>, Vec<Direction>> = BTreeMap::new();
        for m in members {
            let key = sector_key(m, s, basis).unwrap_or(None);
            sectors.entry(key).or_default().push(m.clone());
        }
        for (ell, group) in sectors {
            if group.len() <= 1 {
                continue;
            }
            if order <= 1 {
                return Err(LacunaryWitness { level, sigma: Some(s), ell, members: group });
            }
            let next = provider(&group, basis, level + 1);
            verify_rec(&group, &next, order - 1, provider, level + 1)?;
        }
    }
    Ok(())
}
