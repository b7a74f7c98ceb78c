//! Sub-group ratio sweep and the regulatory policy derived from it.

use std::io::{Read, Write};

use rayon::prelude::*;

use crate::controller::{Genotype, RegulatoryPolicy};
use crate::error::{Error, Result};
use crate::field::{build_arena, ArenaKind};
use crate::harness::config::ExperimentConfig;
use crate::harness::seeds::{derive_seed, tag};
use crate::harness::trial::Evaluator;
use crate::metrics::GroupSummary;

/// Update period given to derived policies, seconds.
pub const POLICY_UPDATE_PERIOD: f64 = 5.0;

/// Mean fitness per (spawn distance, ratio) cell.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepGrid {
    /// Training spawn distance that `distances` are fractions of, m.
    pub spawn_radius: f64,
    /// Fraction of the swarm in sub-group 0, one per column.
    pub ratios: Vec<f64>,
    /// `r_dist` values, one per row.
    pub distances: Vec<f64>,
    /// `mean[row][col]`.
    pub mean: Vec<Vec<f64>>,
    pub std: Vec<Vec<f64>>,
    /// Trials per cell.
    pub trials: usize,
    /// Raw per-trial fitness `samples[row][col]`; empty when loaded from CSV.
    pub samples: Vec<Vec<Vec<f64>>>,
}

impl SweepGrid {
    /// Builds a grid from means only.
    pub fn from_means(
        spawn_radius: f64,
        ratios: Vec<f64>,
        distances: Vec<f64>,
        mean: Vec<Vec<f64>>,
        trials: usize,
    ) -> Result<Self> {
        if mean.len() != distances.len() || mean.iter().any(|row| row.len() != ratios.len()) {
            return Err(Error::Config("grid shape does not match its axes".into()));
        }
        let std = vec![vec![0.0; ratios.len()]; distances.len()];
        Ok(Self {
            spawn_radius,
            ratios,
            distances,
            mean,
            std,
            trials,
            samples: Vec::new(),
        })
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["r_dist", "ratio", "mean", "std", "n", "spawn_radius"])?;
        for (i, (d, row)) in self.distances.iter().zip(&self.mean).enumerate() {
            for (c, (ratio, m)) in self.ratios.iter().zip(row).enumerate() {
                w.write_record([
                    d.to_string(),
                    ratio.to_string(),
                    m.to_string(),
                    self.std[i][c].to_string(),
                    self.trials.to_string(),
                    self.spawn_radius.to_string(),
                ])?;
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(input: R) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(input);
        let mut rows: Vec<(f64, f64, f64, f64, usize, f64)> = Vec::new();
        for (i, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let line = i + 2;
            let field = |k: usize| -> Result<f64> {
                rec.get(k)
                    .ok_or_else(|| Error::Parse {
                        line,
                        msg: format!("missing column {k}"),
                    })?
                    .parse::<f64>()
                    .map_err(|e| Error::Parse {
                        line,
                        msg: e.to_string(),
                    })
            };
            rows.push((
                field(0)?,
                field(1)?,
                field(2)?,
                field(3)?,
                field(4)? as usize,
                field(5)?,
            ));
        }
        if rows.is_empty() {
            return Err(Error::EmptySeries);
        }
        let mut distances: Vec<f64> = Vec::new();
        let mut ratios: Vec<f64> = Vec::new();
        for r in &rows {
            if !distances.contains(&r.0) {
                distances.push(r.0);
            }
            if !ratios.contains(&r.1) {
                ratios.push(r.1);
            }
        }
        let mut mean = vec![vec![f64::NAN; ratios.len()]; distances.len()];
        let mut std = mean.clone();
        for r in &rows {
            let i = distances.iter().position(|d| *d == r.0).unwrap();
            let j = ratios.iter().position(|x| *x == r.1).unwrap();
            mean[i][j] = r.2;
            std[i][j] = r.3;
        }
        if mean.iter().flatten().any(|m| m.is_nan()) {
            return Err(Error::Config("grid CSV is missing cells".into()));
        }
        Ok(Self {
            spawn_radius: rows[0].5,
            ratios,
            distances,
            mean,
            std,
            trials: rows[0].4,
            samples: Vec::new(),
        })
    }
}

/// Re-tests one genotype at every (ratio, spawn distance) pair of the config.
pub fn run_ratio_sweep(cfg: &ExperimentConfig, genotype: &Genotype) -> Result<SweepGrid> {
    cfg.validate()?;
    let field = build_arena(cfg.arena, cfg.cells_per_meter);
    let (nd, nr, nt) = (
        cfg.sweep_distances.len(),
        cfg.sweep_ratios.len(),
        cfg.sweep_trials,
    );
    let evaluators: Vec<Vec<Evaluator>> = cfg
        .sweep_distances
        .iter()
        .map(|&r_dist| {
            cfg.sweep_ratios
                .iter()
                .map(|&ratio| {
                    let cell = ExperimentConfig {
                        r_dist,
                        ratio,
                        adaptive: false,
                        ..cfg.clone()
                    };
                    Evaluator::with_field(cell, field.clone(), None)
                })
                .collect::<Result<_>>()
        })
        .collect::<Result<_>>()?;

    let flat: Vec<f64> = (0..nd * nr * nt)
        .into_par_iter()
        .map(|k| {
            let (d, rest) = (k / (nr * nt), k % (nr * nt));
            let (r, t) = (rest / nt, rest % nt);
            let seed = derive_seed(cfg.master_seed, &[tag::SWEEP, d as u64, r as u64, t as u64]);
            evaluators[d][r].fitness(genotype, seed)
        })
        .collect::<Result<_>>()?;

    let mut samples = vec![vec![Vec::new(); nr]; nd];
    let mut mean = vec![vec![0.0; nr]; nd];
    let mut std = vec![vec![0.0; nr]; nd];
    for d in 0..nd {
        for r in 0..nr {
            let start = (d * nr + r) * nt;
            let cell = flat[start..start + nt].to_vec();
            let s = GroupSummary::of(&cell);
            mean[d][r] = s.mean;
            std[d][r] = s.std;
            samples[d][r] = cell;
        }
    }
    Ok(SweepGrid {
        spawn_radius: cfg.spawn_radius,
        ratios: cfg.sweep_ratios.clone(),
        distances: cfg.sweep_distances.clone(),
        mean,
        std,
        trials: nt,
        samples,
    })
}

/// Light of the center arena at `distance` meters from its peak, truncated
/// to an integer.
pub fn center_light_at(distance: f64) -> f64 {
    ArenaKind::Center.analytic(15.0 + distance, 15.0).trunc()
}

fn mixedness(ratio: f64) -> f64 {
    (ratio - 0.5).abs()
}

fn argmax_set(row: &[f64]) -> Vec<usize> {
    let best = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    (0..row.len()).filter(|&j| row[j] == best).collect()
}

/// Picks the best ratio per spawn distance and turns the choice into light
/// bands.
///
/// Rows are sorted by distance; band edges sit halfway between neighboring
/// distances and are mapped to light through the center arena. A row with a
/// tied maximum takes the tied ratio closest to the unique choices of its
/// adjacent rows; if that is still ambiguous (or no neighbor is unique) the
/// more evenly mixed ratio wins, then the greener one. Adjacent bands with the
/// same probability are merged.
pub fn derive_policy(grid: &SweepGrid) -> Result<RegulatoryPolicy> {
    if grid.distances.is_empty() || grid.ratios.is_empty() {
        return Err(Error::Config("empty sweep grid".into()));
    }
    let mut rows: Vec<usize> = (0..grid.distances.len()).collect();
    rows.sort_by(|&a, &b| grid.distances[a].total_cmp(&grid.distances[b]));
    let ties: Vec<Vec<usize>> = rows.iter().map(|&i| argmax_set(&grid.mean[i])).collect();

    let choice: Vec<usize> = (0..rows.len())
        .map(|k| {
            let cands = &ties[k];
            if cands.len() == 1 {
                return cands[0];
            }
            let neighbors: Vec<f64> = [k.checked_sub(1), Some(k + 1)]
                .into_iter()
                .flatten()
                .filter_map(|n| ties.get(n))
                .filter(|t| t.len() == 1)
                .map(|t| grid.ratios[t[0]])
                .collect();
            let target = (!neighbors.is_empty())
                .then(|| neighbors.iter().sum::<f64>() / neighbors.len() as f64);
            *cands
                .iter()
                .min_by(|&&a, &&b| {
                    let (ra, rb) = (grid.ratios[a], grid.ratios[b]);
                    let near = |r: f64| target.map_or(0.0, |t| (r - t).abs());
                    near(ra)
                        .total_cmp(&near(rb))
                        .then(mixedness(ra).total_cmp(&mixedness(rb)))
                        .then(rb.total_cmp(&ra))
                })
                .expect("non-empty argmax")
        })
        .collect();

    // bands from brightest (closest) to darkest; edge k separates row k and k+1
    let probs: Vec<f64> = choice.iter().map(|&c| grid.ratios[c]).collect();
    let edges: Vec<f64> = rows
        .windows(2)
        .map(|w| {
            let mid = 0.5 * (grid.distances[w[0]] + grid.distances[w[1]]);
            center_light_at(mid * grid.spawn_radius)
        })
        .collect();

    // walk from dark to bright, emitting ascending thresholds
    let mut thresholds: Vec<f64> = Vec::new();
    let mut probabilities: Vec<f64> = vec![probs[probs.len() - 1]];
    for k in (0..edges.len()).rev() {
        let edge = edges[k];
        let p = probs[k];
        if thresholds.last().is_some_and(|&t| edge <= t) {
            // the band below this edge is empty
            *probabilities.last_mut().unwrap() = p;
            let n = probabilities.len();
            if n >= 2 && probabilities[n - 2] == p {
                probabilities.pop();
                thresholds.pop();
            }
            continue;
        }
        if *probabilities.last().unwrap() == p {
            continue;
        }
        thresholds.push(edge);
        probabilities.push(p);
    }
    RegulatoryPolicy::new(thresholds, probabilities, POLICY_UPDATE_PERIOD)
}

#[cfg(test)]
mod tests {
    use super::*;

    const RATIOS: [f64; 5] = [1.0, 0.75, 0.5, 0.25, 0.0];
    const DISTANCES: [f64; 6] = [0.0, 0.25, 0.5, 0.75, 1.0, 1.25];

    fn grid(mean: Vec<Vec<f64>>) -> SweepGrid {
        SweepGrid::from_means(12.0, RATIOS.to_vec(), DISTANCES.to_vec(), mean, 60).unwrap()
    }

    #[test]
    fn light_breakpoints() {
        assert_eq!(center_light_at(0.125 * 12.0), 229.0);
        assert_eq!(center_light_at(0.875 * 12.0), 76.0);
        assert_eq!(center_light_at(20.0), 0.0);
    }

    #[test]
    fn uniform_grid_gives_even_split() {
        let p = derive_policy(&grid(vec![vec![0.5; 5]; 6])).unwrap();
        assert!(p.thresholds.is_empty());
        assert_eq!(p.probabilities, vec![0.5]);
    }

    #[test]
    fn red_dominant_grid() {
        let mean = (0..6)
            .map(|_| vec![0.1, 0.2, 0.3, 0.4, 0.9])
            .collect::<Vec<_>>();
        let p = derive_policy(&grid(mean)).unwrap();
        assert_eq!(p.probabilities, vec![0.0]);
        for light in [0.0, 100.0, 255.0] {
            assert_eq!(p.p_green(light), 0.0);
        }
    }

    #[test]
    fn distinct_bands() {
        // green near the peak, red far away
        let mut mean = vec![vec![0.0; 5]; 6];
        for (d, row) in mean.iter_mut().enumerate() {
            row[if d < 3 { 0 } else { 4 }] = 1.0;
        }
        let p = derive_policy(&grid(mean)).unwrap();
        // edge between r_dist 0.5 and 0.75: 255 * (1 - 0.625 * 12 / 15)
        assert_eq!(p.thresholds, vec![127.0]);
        assert_eq!(p.probabilities, vec![0.0, 1.0]);
    }

    #[test]
    fn csv_round_trip() {
        let g = grid(
            (0..6)
                .map(|d| RATIOS.iter().map(|r| r * 0.1 + d as f64).collect())
                .collect(),
        );
        let mut buf = Vec::new();
        g.write_csv(&mut buf).unwrap();
        let back = SweepGrid::read_csv(buf.as_slice()).unwrap();
        assert_eq!(back.mean, g.mean);
        assert_eq!(back.ratios, g.ratios);
        assert_eq!(back.distances, g.distances);
        assert_eq!(back.spawn_radius, 12.0);
    }

    #[test]
    fn small_sweep_shape() {
        let cfg = ExperimentConfig {
            swarm_size: 4,
            eval_minutes: 0.05,
            cells_per_meter: 2,
            sweep_trials: 2,
            ..ExperimentConfig::desk()
        };
        let g = run_ratio_sweep(&cfg, &Genotype::zeros()).unwrap();
        assert_eq!(g.mean.len(), 6);
        assert!(g.mean.iter().all(|r| r.len() == 5));
        assert!(g.samples.iter().flatten().all(|c| c.len() == 2));
    }
}
