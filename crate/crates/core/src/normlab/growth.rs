use std::io::Write;

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{estimate_maximal_norm, EstimatorConfig, MultiplierFamily, NormReport, Weighted};
use crate::directions::DirectionSet;
use crate::error::{invalid, Result};
use crate::grid::Grid;
use crate::symbols::Convention;

/// Least-squares fit y ≈ c·x through the origin.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelFit {
    pub c: f64,
    /// Root of the residual sum of squares.
    pub residual: f64,
}

pub fn fit_through_origin(x: &[f64], y: &[f64]) -> ModelFit {
    let sxx: f64 = x.iter().map(|v| v * v).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| a * b).sum();
    let c = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let residual = x.iter().zip(y).map(|(a, b)| (b - c * a).powi(2)).sum::<f64>().sqrt();
    ModelFit { c, residual }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GrowthRow {
    pub n: usize,
    /// Distinct operators after merging identical symbols.
    pub distinct: usize,
    pub estimate: f64,
    pub sqrt_log_model: f64,
    pub log_model: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GrowthTable {
    pub rows: Vec<GrowthRow>,
    pub sqrt_log: ModelFit,
    pub log: ModelFit,
}

impl GrowthTable {
    /// Fits c·√(ln N) and c·ln N to (N, estimate) pairs.
    pub fn from_estimates(points: &[(usize, usize, f64)]) -> GrowthTable {
        let y: Vec<f64> = points.iter().map(|p| p.2).collect();
        let lx: Vec<f64> = points.iter().map(|p| (p.0 as f64).ln()).collect();
        let sx: Vec<f64> = lx.iter().map(|v| v.sqrt()).collect();
        let sqrt_log = fit_through_origin(&sx, &y);
        let log = fit_through_origin(&lx, &y);
        let rows = points
            .iter()
            .zip(sx.iter().zip(&lx))
            .map(|(&(n, distinct, estimate), (s, l))| GrowthRow {
                n,
                distinct,
                estimate,
                sqrt_log_model: sqrt_log.c * s,
                log_model: log.c * l,
            })
            .collect();
        GrowthTable { rows, sqrt_log, log }
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["n", "distinct", "estimate", "sqrt_log_model", "log_model"])?;
        for r in &self.rows {
            w.write_record([
                r.n.to_string(),
                r.distinct.to_string(),
                format!("{:.12e}", r.estimate),
                format!("{:.12e}", r.sqrt_log_model),
                format!("{:.12e}", r.log_model),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn estimates(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.estimate).collect()
    }
}

/// Norms of the maximal Hilbert transform over the nested prefixes O_N of `set`,
/// each run warm-started from the previous witness.
pub fn growth_experiment(
    set: &DirectionSet,
    ns: &[usize],
    grid: &Grid,
    convention: Convention,
    cfg: &EstimatorConfig,
) -> Result<(GrowthTable, Vec<NormReport>)> {
    if ns.is_empty() || ns.windows(2).any(|w| w[0] >= w[1]) {
        return invalid("N list must be nonempty and strictly increasing");
    }
    if *ns.last().unwrap_or(&0) > set.len() || ns[0] == 0 {
        return invalid(format!("N must lie in 1..={}", set.len()));
    }
    let mut points = Vec::new();
    let mut reports: Vec<NormReport> = Vec::new();
    for &n in ns {
        let subset = set.prefix(n);
        let fam = MultiplierFamily::halfspaces(*grid, &subset, convention)?;
        let warm = reports.last().map(|r| r.witness.as_slice());
        let mut rep = estimate_maximal_norm(&fam, cfg, warm)?;
        log::info!("growth N = {n}: {} distinct operators, estimate {:.6}", fam.symbols().len(), rep.estimate);
        rep.subset = Some(subset);
        points.push((n, fam.symbols().len(), rep.estimate));
        reports.push(rep);
    }
    Ok((GrowthTable::from_estimates(&points), reports))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThetaReport {
    pub value: f64,
    pub best_subset: Vec<usize>,
    pub sampled: usize,
}

/// Lower bound for Θ_N(Ω, w): the best weighted-L² maximal Hilbert norm over
/// `samples` random subsets of size min(N, |Ω|).
pub fn theta_probe(
    set: &DirectionSet,
    weight: Option<&[f64]>,
    n: usize,
    samples: usize,
    grid: &Grid,
    convention: Convention,
    cfg: &EstimatorConfig,
) -> Result<ThetaReport> {
    if n == 0 || samples == 0 || set.is_empty() {
        return invalid("theta_probe needs N ≥ 1, a sample budget and a nonempty set");
    }
    let k = n.min(set.len());
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut best = ThetaReport { value: 0.0, best_subset: Vec::new(), sampled: 0 };
    for s in 0..samples {
        let mut idx = sample(&mut rng, set.len(), k).into_vec();
        idx.sort_unstable();
        let members = idx.iter().map(|&i| set.members()[i].clone()).collect();
        let subset = DirectionSet::new(set.dims(), members)?;
        let fam = MultiplierFamily::halfspaces(*grid, &subset, convention)?;
        let sub_cfg = EstimatorConfig { seed: cfg.seed.wrapping_add(s as u64), ..*cfg };
        let est = match weight {
            Some(w) => estimate_maximal_norm(&Weighted::new(fam, w)?, &sub_cfg, None)?.estimate,
            None => estimate_maximal_norm(&fam, &sub_cfg, None)?.estimate,
        };
        best.sampled += 1;
        if est > best.value {
            best.value = est;
            best.best_subset = idx;
        }
        if k == set.len() {
            break;
        }
    }
    Ok(best)
}
