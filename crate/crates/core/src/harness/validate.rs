//! Scalability and robustness comparison of a fixed ratio against the
//! adaptive policy.

use std::io::Write;

use rayon::prelude::*;

use crate::controller::{Genotype, RegulatoryPolicy};
use crate::error::{Error, Result};
use crate::field::ArenaKind;
use crate::harness::config::ExperimentConfig;
use crate::harness::seeds::{derive_seed, tag};
use crate::harness::trial::Evaluator;
use crate::metrics::{two_sample_t, StatReport};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ValidationSetting {
    /// Center arena with a different swarm size.
    Size(usize),
    /// Different arena at the configured swarm size.
    Arena(ArenaKind),
}

impl ValidationSetting {
    pub fn label(&self) -> String {
        match self {
            ValidationSetting::Size(n) => format!("size_{n}"),
            ValidationSetting::Arena(a) => format!("arena_{a}"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ValidationCell {
    pub setting: ValidationSetting,
    pub fixed: Vec<f64>,
    pub adaptive: Vec<f64>,
    /// Adaptive (group a) against fixed (group b), uncorrected.
    pub stats: StatReport,
}

#[derive(Debug, Clone)]
pub struct ValidationReport {
    pub cells: Vec<ValidationCell>,
    /// All adaptive trials against all fixed trials, Bonferroni-corrected by the cell count.
    pub aggregate: StatReport,
}

/// Both variants share the spawn seed of each trial index.
pub fn run_validation(
    cfg: &ExperimentConfig,
    genotype: &Genotype,
    policy: &RegulatoryPolicy,
) -> Result<ValidationReport> {
    cfg.validate()?;
    let settings: Vec<ValidationSetting> = cfg
        .validation_sizes
        .iter()
        .map(|&n| ValidationSetting::Size(n))
        .chain(
            cfg.validation_arenas
                .iter()
                .map(|&a| ValidationSetting::Arena(a)),
        )
        .collect();
    if settings.is_empty() {
        return Err(Error::Config("no validation settings".into()));
    }
    let nt = cfg.validation_trials;

    let mut cells = Vec::with_capacity(settings.len());
    for (c, setting) in settings.iter().enumerate() {
        let base = match *setting {
            ValidationSetting::Size(n) => ExperimentConfig {
                swarm_size: n,
                arena: ArenaKind::Center,
                ..cfg.clone()
            },
            ValidationSetting::Arena(a) => ExperimentConfig {
                arena: a,
                ..cfg.clone()
            },
        };
        let fixed = Evaluator::new(
            ExperimentConfig {
                adaptive: false,
                ..base.clone()
            },
            None,
        )?;
        let adaptive = Evaluator::with_field(
            ExperimentConfig {
                adaptive: true,
                ..base
            },
            fixed.field().clone(),
            Some(policy.clone()),
        )?;
        let runs: Vec<(f64, f64)> = (0..nt)
            .into_par_iter()
            .map(|t| {
                let seed = derive_seed(cfg.master_seed, &[tag::VALIDATION, c as u64, t as u64]);
                Ok((
                    fixed.fitness(genotype, seed)?,
                    adaptive.fitness(genotype, seed)?,
                ))
            })
            .collect::<Result<_>>()?;
        let (f, a): (Vec<f64>, Vec<f64>) = runs.into_iter().unzip();
        let stats = two_sample_t(&a, &f, 1.0)?;
        cells.push(ValidationCell {
            setting: *setting,
            fixed: f,
            adaptive: a,
            stats,
        });
    }
    let all_fixed: Vec<f64> = cells.iter().flat_map(|c| c.fixed.iter().copied()).collect();
    let all_adaptive: Vec<f64> = cells
        .iter()
        .flat_map(|c| c.adaptive.iter().copied())
        .collect();
    let aggregate = two_sample_t(&all_adaptive, &all_fixed, cells.len() as f64)?;
    Ok(ValidationReport { cells, aggregate })
}

impl ValidationReport {
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record([
            "setting",
            "n",
            "fixed_mean",
            "fixed_std",
            "adaptive_mean",
            "adaptive_std",
            "t",
            "df",
            "p",
            "bonferroni",
            "significance",
        ])?;
        let rows = self
            .cells
            .iter()
            .map(|c| (c.setting.label(), &c.stats))
            .chain(std::iter::once(("aggregate".to_string(), &self.aggregate)));
        for (label, s) in rows {
            w.write_record([
                label,
                s.a.n.to_string(),
                s.b.mean.to_string(),
                s.b.std.to_string(),
                s.a.mean.to_string(),
                s.a.std.to_string(),
                s.t.to_string(),
                s.df.to_string(),
                s.p_value.to_string(),
                s.bonferroni.to_string(),
                s.stars().to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}
