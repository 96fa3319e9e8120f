//! Multiplier symbols: half-spaces, angular cutoffs, wedges, Littlewood–Paley pieces.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::directions::{pow2, CellIndex, Direction, Pair};
use crate::error::{invalid, Result};
use crate::grid::Symbol;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Convention {
    Sign,
    Indicator,
}

/// Which angular cutoff: κ⁺, κ⁻ or κ° = κ⁺κ⁻.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Cutoff {
    Plus,
    Minus,
    Circ,
}

impl Cutoff {
    pub fn tag(&self) -> &'static str {
        match self {
            Cutoff::Plus => "+",
            Cutoff::Minus => "-",
            Cutoff::Circ => "o",
        }
    }
}

fn h(x: f64) -> f64 {
    if x > 0.0 {
        (-1.0 / x).exp()
    } else {
        0.0
    }
}

/// C^∞ ramp, exactly 0 for x ≤ 0 and exactly 1 for x ≥ 1.
pub fn ramp(x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else if x >= 1.0 {
        1.0
    } else {
        let a = h(x);
        a / (a + h(1.0 - x))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CutoffProfile {
    pub kind: Cutoff,
    pub dim_param: usize,
}

impl CutoffProfile {
    pub fn new(kind: Cutoff, dim_param: usize) -> Result<CutoffProfile> {
        if kind == Cutoff::Circ || dim_param == 0 {
            return invalid("profiles are φ⁺ or φ⁻ with a positive dimension parameter");
        }
        Ok(CutoffProfile { kind, dim_param })
    }

    pub fn eval(&self, x: f64) -> f64 {
        match self.kind {
            Cutoff::Plus => phi_plus(self.dim_param, x),
            _ => phi_minus(self.dim_param, x),
        }
    }

    /// The transition interval; the profile is constant outside it.
    pub fn transition(&self) -> (f64, f64) {
        let n = self.dim_param as f64;
        match self.kind {
            Cutoff::Plus => (-(n + 1.0), -n),
            _ => (-1.0 / (2.0 * n), -1.0 / (2.0 * (n + 1.0))),
        }
    }
}

/// 0 for x < −(n+1), 1 for x > −n.
pub fn phi_plus(n: usize, x: f64) -> f64 {
    if x.is_nan() {
        return 0.0;
    }
    ramp(x + n as f64 + 1.0)
}

/// 1 for x < −1/(2n), 0 for x > −1/(2(n+1)).
pub fn phi_minus(n: usize, x: f64) -> f64 {
    if x.is_nan() {
        return 0.0;
    }
    let n = n as f64;
    let a = 1.0 / (2.0 * n);
    let b = 1.0 / (2.0 * (n + 1.0));
    1.0 - ramp((x + a) / (a - b))
}

pub fn halfspace_symbol(omega: &Direction, convention: Convention) -> Symbol {
    let w = omega.coords().to_vec();
    let label = format!("H[{convention:?}]{w:?}");
    Symbol::real(label, move |xi| {
        let d: f64 = w.iter().zip(xi).map(|(a, b)| a * b).sum();
        halfspace_value(d, convention)
    })
}

pub fn halfspace_value(dot: f64, convention: Convention) -> f64 {
    match convention {
        Convention::Indicator => {
            if dot > 0.0 {
                1.0
            } else {
                0.0
            }
        }
        Convention::Sign => {
            if dot > 0.0 {
                1.0
            } else if dot < 0.0 {
                -1.0
            } else {
                0.0
            }
        }
    }
}

/// Ψ_{σ,ℓ,γ}: −ξ_{σ(1)}/ξ_{σ(2)} in the γ-widened dyadic band of ℓ.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WedgeSpec {
    pub sigma: Pair,
    pub ell: i64,
    pub gamma: f64,
}

impl WedgeSpec {
    /// Core wedge Ψ_{σ,ℓ} in ambient dimension n.
    pub fn core(sigma: Pair, ell: i64, n: usize) -> WedgeSpec {
        WedgeSpec { sigma, ell, gamma: n as f64 }
    }

    /// Widened wedge Ψ̃_{σ,ℓ}.
    pub fn widened(sigma: Pair, ell: i64, n: usize) -> WedgeSpec {
        WedgeSpec { sigma, ell, gamma: n as f64 + 1.0 }
    }

    /// Band [lower, upper) for −ξ_{σ(1)}/ξ_{σ(2)}.
    pub fn band(&self) -> (f64, f64) {
        (pow2(-(self.ell + 1)) / self.gamma, self.gamma * pow2(-self.ell))
    }
}

pub fn wedge_contains(xi: &[f64], spec: &WedgeSpec) -> bool {
    let b = xi[spec.sigma.second];
    if b == 0.0 {
        return false;
    }
    let r = -xi[spec.sigma.first] / b;
    let (lo, hi) = spec.band();
    lo <= r && r < hi
}

/// κ^ε_{σ,ℓ} evaluated at ξ, with the limit convention on ξ_{σ(2)} = 0.
pub fn kappa_value(xi: &[f64], sigma: Pair, ell: i64, cut: Cutoff, n: usize) -> f64 {
    let b = xi[sigma.second];
    if b == 0.0 {
        return match cut {
            Cutoff::Plus => 1.0,
            _ => 0.0,
        };
    }
    let x = xi[sigma.first] / b * pow2(ell);
    match cut {
        Cutoff::Plus => phi_plus(n, x),
        Cutoff::Minus => phi_minus(n, x),
        Cutoff::Circ => phi_plus(n, x) * phi_minus(n, x),
    }
}

pub fn kappa(sigma: Pair, ell: i64, cut: Cutoff, n: usize) -> Symbol {
    Symbol::real(format!("k{}{sigma}@{ell}", cut.tag()), move |xi| kappa_value(xi, sigma, ell, cut, n))
}

/// ∏_{σ∈U} κ^{ε_σ}_{σ,ℓ_σ}.
pub fn compose_k(u: &[Pair], cell: &CellIndex, eps: &[Cutoff]) -> Result<Symbol> {
    if u.is_empty() || u.len() != eps.len() {
        return invalid("compose_k needs a nonempty U with one cutoff per pair");
    }
    let n = cell.dim();
    if u.iter().any(|p| p.second >= n) {
        return invalid("pair outside the cell's dimension");
    }
    let parts: Vec<(Pair, i64, Cutoff)> = u.iter().zip(eps).map(|(&p, &e)| (p, cell.get(p), e)).collect();
    let label = if eps.iter().all(|&e| e == Cutoff::Circ) {
        format!("K{:?}@{cell}", u.iter().map(|p| p.to_string()).collect::<Vec<_>>())
    } else {
        format!("K^e{:?}@{cell}", parts.iter().map(|(p, _, e)| format!("{p}{}", e.tag())).collect::<Vec<_>>())
    };
    Ok(Symbol::real(label, move |xi| {
        parts.iter().map(|&(p, l, e)| kappa_value(xi, p, l, e, n)).product()
    }))
}

/// Littlewood–Paley piece supported in 1/2 < |x| < 2; dyadic dilates sum to 1.
pub fn lp_p(x: f64) -> f64 {
    let a = x.abs();
    ramp(2.0 * (a - 0.5)) - ramp(a - 1.0)
}

/// Equals 1 on the support of `lp_p`, supported in 1/4 < |x| < 4.
pub fn lp_q(x: f64) -> f64 {
    let a = x.abs();
    ramp(4.0 * (a - 0.25)) * (1.0 - ramp((a - 2.0) / 2.0))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum LpKind {
    P,
    Q,
}

/// ξ ↦ p(2^{−t} ξ_υ) (or q).
pub fn project_symbol(t: i64, axis: usize, kind: LpKind) -> Symbol {
    let s = pow2(-t);
    Symbol::real(format!("{kind:?}[{t}]@{}", axis + 1), move |xi| match kind {
        LpKind::P => lp_p(s * xi[axis]),
        LpKind::Q => lp_q(s * xi[axis]),
    })
}

/// Product of projections along several axes at independent scales.
pub fn project_many(ts: &[(i64, usize)], kind: LpKind) -> Symbol {
    Symbol::product_all(&ts.iter().map(|&(t, a)| project_symbol(t, a, kind)).collect::<Vec<_>>())
}

fn binom(k: usize, i: usize) -> f64 {
    (0..i).fold(1.0, |acc, j| acc * (k - j) as f64 / (j + 1) as f64)
}

/// Mixed central difference ∂^{a₁}_{σ(1)}∂^{a₂}_{σ(2)} m at ξ with relative steps, scaled by
/// |ξ_{σ(1)}|^{a₁}|ξ_{σ(2)}|^{a₂}.
pub fn scaled_difference(m: &Symbol, xi: &[f64], sigma: Pair, a1: usize, a2: usize, rel: f64) -> f64 {
    let h1 = rel * xi[sigma.first].abs();
    let h2 = rel * xi[sigma.second].abs();
    let mut acc = 0.0;
    let mut p = xi.to_vec();
    for i in 0..=a1 {
        for j in 0..=a2 {
            let c = binom(a1, i) * binom(a2, j) * if (i + j) % 2 == 0 { 1.0 } else { -1.0 };
            p[sigma.first] = xi[sigma.first] + (a1 as f64 / 2.0 - i as f64) * h1;
            p[sigma.second] = xi[sigma.second] + (a2 as f64 / 2.0 - j as f64) * h2;
            acc += c * m.eval(&p).re;
        }
    }
    // |ξ|^a / h^a = rel^{−a}
    acc / rel.powi((a1 + a2) as i32)
}

/// Largest scaled finite difference of κ^ε_{σ,ℓ} over orders a₁+a₂ ≤ 4 on frequencies
/// whose angular variable 2^ℓξ_{σ(1)}/ξ_{σ(2)} is drawn across both transition bands.
pub fn derivative_bound_probe(cut: Cutoff, sigma: Pair, ell: i64, n: usize, samples: usize, seed: u64) -> f64 {
    let m = kappa(sigma, ell, cut, n);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dim = sigma.second + 1;
    let mut best: f64 = 0.0;
    for _ in 0..samples {
        let x: f64 = rng.random_range(-(n as f64 + 2.0)..0.5);
        let b: f64 = rng.random_range(1.0..10.0) * if rng.random_bool(0.5) { 1.0 } else { -1.0 };
        let mut xi = vec![1.0; dim];
        xi[sigma.second] = b;
        xi[sigma.first] = x * b * pow2(-ell);
        if xi[sigma.first] == 0.0 {
            continue;
        }
        for a1 in 0..=4usize {
            for a2 in 0..=(4 - a1) {
                let v = scaled_difference(&m, &xi, sigma, a1, a2, 1e-2).abs();
                best = best.max(v);
            }
        }
    }
    best
}
