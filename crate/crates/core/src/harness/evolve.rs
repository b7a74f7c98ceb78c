use std::io::Write;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::cma::{init_cma, CmaState, EvaluatedIndividual};
use crate::controller::{Genotype, LAYER_WEIGHTS};
use crate::error::{Error, Result};
use crate::harness::config::ExperimentConfig;
use crate::harness::seeds::{derive_seed, tag};
use crate::harness::trial::Evaluator;

#[derive(Debug, Clone, PartialEq)]
pub struct GenerationRecord {
    pub generation: usize,
    pub best_fitness: f64,
    pub mean_fitness: f64,
    pub sigma: f64,
    /// Mean per-gene population standard deviation for each reservoir's weights.
    pub std_reservoir: [f64; 2],
    pub std_mean: f64,
}

#[derive(Debug, Clone)]
pub struct EvolutionResult {
    pub run: usize,
    /// Best individual ever evaluated (by median fitness).
    pub best: Genotype,
    pub best_fitness: f64,
    pub best_generation: usize,
    pub generations: Vec<GenerationRecord>,
    pub trials_run: usize,
    pub final_state: CmaState,
}

pub const GENERATION_HEADER: [&str; 7] = [
    "generation",
    "best_fitness",
    "mean_fitness",
    "sigma",
    "std_reservoir0",
    "std_reservoir1",
    "std_mean",
];

/// Seed of repeat `repeat` of individual `individual` in `generation` of `run`.
pub fn evolution_trial_seed(
    master: u64,
    run: usize,
    generation: usize,
    individual: usize,
    repeat: usize,
) -> u64 {
    derive_seed(
        master,
        &[
            tag::EVOLUTION,
            run as u64,
            generation as u64,
            individual as u64,
            repeat as u64,
        ],
    )
}

fn population_std(population: &[Genotype]) -> [f64; 2] {
    let n = population.len() as f64;
    let gene_std = |g: usize| {
        let mean = population.iter().map(|p| p.values()[g]).sum::<f64>() / n;
        let var = population
            .iter()
            .map(|p| (p.values()[g] - mean).powi(2))
            .sum::<f64>()
            / n;
        var.sqrt()
    };
    let block = |start: usize| {
        (start..start + LAYER_WEIGHTS).map(gene_std).sum::<f64>() / LAYER_WEIGHTS as f64
    };
    [block(0), block(LAYER_WEIGHTS)]
}

/// Evaluates one generation: every candidate gets `repeats` trials in
/// parallel and the median becomes its fitness.
pub fn evaluate_population(
    evaluator: &Evaluator,
    population: &[Genotype],
    run: usize,
    generation: usize,
) -> Result<Vec<EvaluatedIndividual>> {
    let cfg = evaluator.config();
    let repeats = cfg.repeats;
    let scores: Vec<f64> = (0..population.len() * repeats)
        .into_par_iter()
        .map(|k| {
            let (ind, rep) = (k / repeats, k % repeats);
            let seed = evolution_trial_seed(cfg.master_seed, run, generation, ind, rep);
            evaluator.fitness(&population[ind], seed)
        })
        .collect::<Result<_>>()?;
    Ok(population
        .iter()
        .enumerate()
        .map(|(i, g)| {
            EvaluatedIndividual::from_trials(
                i,
                g.clone(),
                scores[i * repeats..(i + 1) * repeats].to_vec(),
            )
        })
        .collect())
}

/// One CMA-ES run over genotypes.
///
/// `on_generation` sees each generation's record as soon as it is complete.
pub fn run_evolution<F>(
    cfg: &ExperimentConfig,
    run: usize,
    mut on_generation: F,
) -> Result<EvolutionResult>
where
    F: FnMut(&GenerationRecord),
{
    let evaluator = Evaluator::new(cfg.clone(), None)?;
    let mut rng =
        ChaCha8Rng::seed_from_u64(derive_seed(cfg.master_seed, &[tag::OPTIMIZER, run as u64]));
    let mut state = init_cma(&mut rng, cfg.lambda, cfg.sigma0);
    let mut records = Vec::with_capacity(cfg.generations);
    let mut best: Option<(Genotype, f64, usize)> = None;

    for generation in 0..cfg.generations {
        let wrap = |e: Error| Error::Generation {
            generation,
            source: Box::new(e),
        };
        let population = state.ask_genotypes(&mut rng).map_err(wrap)?;
        let evaluated = evaluate_population(&evaluator, &population, run, generation)?;

        let mut gen_best = &evaluated[0];
        for e in &evaluated[1..] {
            if e.fitness > gen_best.fitness {
                gen_best = e;
            }
        }
        if best.as_ref().is_none_or(|b| gen_best.fitness > b.1) {
            best = Some((gen_best.genotype.clone(), gen_best.fitness, generation));
        }
        let std = population_std(&population);
        let record = GenerationRecord {
            generation,
            best_fitness: gen_best.fitness,
            mean_fitness: evaluated.iter().map(|e| e.fitness).sum::<f64>() / evaluated.len() as f64,
            sigma: state.sigma,
            std_reservoir: std,
            std_mean: 0.5 * (std[0] + std[1]),
        };
        on_generation(&record);
        records.push(record);
        state.tell(&evaluated).map_err(wrap)?;
    }

    let (best, best_fitness, best_generation) =
        best.ok_or_else(|| Error::Config("generations must be positive".into()))?;
    Ok(EvolutionResult {
        run,
        best,
        best_fitness,
        best_generation,
        generations: records,
        trials_run: state.eval_count,
        final_state: state,
    })
}

pub fn write_generations_csv<W: Write>(records: &[GenerationRecord], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(GENERATION_HEADER)?;
    for r in records {
        w.write_record([
            r.generation.to_string(),
            r.best_fitness.to_string(),
            r.mean_fitness.to_string(),
            r.sigma.to_string(),
            r.std_reservoir[0].to_string(),
            r.std_reservoir[1].to_string(),
            r.std_mean.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
