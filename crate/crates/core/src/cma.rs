//! CMA-ES with rank-one and rank-mu covariance updates and cumulative
//! step-size adaptation.
//!
//! The optimizer maximizes. Candidates are ranked by descending fitness,
//! ties broken by the index at which they were sampled.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::controller::{Genotype, GENOTYPE_LEN};
use crate::error::{Error, Result};

/// Eigenvalues below this fraction of the largest one are clamped.
const EIGEN_FLOOR: f64 = 1e-14;

/// Strategy parameters derived from dimension and population size.
#[derive(Debug, Clone)]
pub struct CmaParams {
    pub dim: usize,
    pub lambda: usize,
    pub mu: usize,
    /// Positive recombination weights, nonincreasing, summing to 1.
    pub weights: Vec<f64>,
    pub mu_eff: f64,
    pub c_sigma: f64,
    pub d_sigma: f64,
    pub c_c: f64,
    pub c_1: f64,
    pub c_mu: f64,
    /// E||N(0, I)||.
    pub chi_n: f64,
}

impl CmaParams {
    pub fn new(dim: usize, lambda: usize) -> Self {
        let n = dim as f64;
        let mu = lambda / 2;
        let raw: Vec<f64> = (1..=mu)
            .map(|i| ((lambda as f64 + 1.0) / 2.0).ln() - (i as f64).ln())
            .collect();
        let total: f64 = raw.iter().sum();
        let weights: Vec<f64> = raw.iter().map(|w| w / total).collect();
        let mu_eff = 1.0 / weights.iter().map(|w| w * w).sum::<f64>();

        let c_sigma = (mu_eff + 2.0) / (n + mu_eff + 5.0);
        let d_sigma = 1.0 + 2.0 * (((mu_eff - 1.0) / (n + 1.0)).sqrt() - 1.0).max(0.0) + c_sigma;
        let c_c = (4.0 + mu_eff / n) / (n + 4.0 + 2.0 * mu_eff / n);
        let c_1 = 2.0 / ((n + 1.3).powi(2) + mu_eff);
        let c_mu =
            (2.0 * (mu_eff - 2.0 + 1.0 / mu_eff) / ((n + 2.0).powi(2) + mu_eff)).min(1.0 - c_1);
        let chi_n = n.sqrt() * (1.0 - 1.0 / (4.0 * n) + 1.0 / (21.0 * n * n));
        Self {
            dim,
            lambda,
            mu,
            weights,
            mu_eff,
            c_sigma,
            d_sigma,
            c_c,
            c_1,
            c_mu,
            chi_n,
        }
    }

    /// `4 + floor(3 ln n)`.
    pub fn default_lambda(dim: usize) -> usize {
        4 + (3.0 * (dim as f64).ln()).floor() as usize
    }
}

#[derive(Debug, Clone)]
pub struct CmaState {
    pub params: CmaParams,
    pub mean: DVector<f64>,
    pub sigma: f64,
    pub cov: DMatrix<f64>,
    pub path_sigma: DVector<f64>,
    pub path_c: DVector<f64>,
    pub generation: usize,
    /// Trials consumed so far (one per repeat per individual).
    pub eval_count: usize,
    /// Eigenvectors of `cov`, one per column.
    basis: DMatrix<f64>,
    /// Square roots of the (clamped) eigenvalues.
    scales: DVector<f64>,
}

/// A scored candidate. `index` is its position in the batch returned by `ask`.
#[derive(Debug, Clone)]
pub struct EvaluatedIndividual {
    pub index: usize,
    pub genotype: Genotype,
    pub fitness: f64,
    pub trial_fitnesses: Vec<f64>,
}

impl EvaluatedIndividual {
    /// Fitness is the median of the repeat trials.
    pub fn from_trials(index: usize, genotype: Genotype, trial_fitnesses: Vec<f64>) -> Self {
        Self {
            index,
            genotype,
            fitness: median(&trial_fitnesses),
            trial_fitnesses,
        }
    }
}

/// Median; the mean of the two middle values for even lengths.
pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n == 0 {
        return f64::NAN;
    }
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Genotype search with mean drawn from U[-5, 5]^36 and identity covariance.
pub fn init_cma<R: Rng + ?Sized>(rng: &mut R, population_size: usize, sigma0: f64) -> CmaState {
    let mean: Vec<f64> = (0..GENOTYPE_LEN)
        .map(|_| rng.random_range(-5.0..=5.0))
        .collect();
    CmaState::new(mean, sigma0, population_size)
}

impl CmaState {
    pub fn new(mean: Vec<f64>, sigma0: f64, lambda: usize) -> Self {
        let dim = mean.len();
        assert!(lambda >= 2, "population size must be at least 2");
        assert!(sigma0 > 0.0, "initial step size must be positive");
        Self {
            params: CmaParams::new(dim, lambda),
            mean: DVector::from_vec(mean),
            sigma: sigma0,
            cov: DMatrix::identity(dim, dim),
            path_sigma: DVector::zeros(dim),
            path_c: DVector::zeros(dim),
            generation: 0,
            eval_count: 0,
            basis: DMatrix::identity(dim, dim),
            scales: DVector::from_element(dim, 1.0),
        }
    }

    pub fn dim(&self) -> usize {
        self.params.dim
    }

    pub fn lambda(&self) -> usize {
        self.params.lambda
    }

    /// Draws `lambda` candidates `mean + sigma * B * D * z`.
    pub fn ask<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<Vec<f64>> {
        let n = self.dim();
        (0..self.lambda())
            .map(|_| {
                let z = DVector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal));
                let y = &self.basis * z.component_mul(&self.scales);
                (&self.mean + self.sigma * y).iter().copied().collect()
            })
            .collect()
    }

    /// Genotype-typed `ask`.
    pub fn ask_genotypes<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<Vec<Genotype>> {
        self.ask(rng).into_iter().map(Genotype::new).collect()
    }

    /// Updates the distribution from a full scored generation.
    pub fn tell(&mut self, evaluated: &[EvaluatedIndividual]) -> Result<()> {
        if evaluated.len() != self.lambda() {
            return Err(Error::PopulationSize {
                expected: self.lambda(),
                actual: evaluated.len(),
            });
        }
        if evaluated.iter().any(|e| !e.fitness.is_finite()) {
            return Err(Error::NonFinite("fitness"));
        }
        let mut order: Vec<&EvaluatedIndividual> = evaluated.iter().collect();
        order.sort_by(|a, b| b.fitness.total_cmp(&a.fitness).then(a.index.cmp(&b.index)));
        let ranked: Vec<&[f64]> = order.iter().map(|e| e.genotype.values()).collect();
        self.update(&ranked)?;
        self.eval_count += evaluated
            .iter()
            .map(|e| e.trial_fitnesses.len())
            .sum::<usize>();
        Ok(())
    }

    /// Untyped `tell`: `scores[i]` belongs to `candidates[i]`, higher is better.
    pub fn tell_scores(&mut self, candidates: &[Vec<f64>], scores: &[f64]) -> Result<()> {
        if candidates.len() != self.lambda() || scores.len() != self.lambda() {
            return Err(Error::PopulationSize {
                expected: self.lambda(),
                actual: candidates.len().min(scores.len()),
            });
        }
        if scores.iter().any(|s| !s.is_finite()) {
            return Err(Error::NonFinite("fitness"));
        }
        let mut idx: Vec<usize> = (0..scores.len()).collect();
        idx.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
        let ranked: Vec<&[f64]> = idx.iter().map(|&i| candidates[i].as_slice()).collect();
        self.update(&ranked)?;
        self.eval_count += self.lambda();
        Ok(())
    }

    fn update(&mut self, ranked: &[&[f64]]) -> Result<()> {
        let p = &self.params;
        let n = p.dim;
        let steps: Vec<DVector<f64>> = ranked[..p.mu]
            .iter()
            .map(|x| (DVector::from_column_slice(x) - &self.mean) / self.sigma)
            .collect();
        let mut y_w = DVector::zeros(n);
        for (w, y) in p.weights.iter().zip(&steps) {
            y_w.axpy(*w, y, 1.0);
        }

        // C^{-1/2} y_w = B D^{-1} B^T y_w
        let inv_sqrt_y = &self.basis * (self.basis.tr_mul(&y_w).component_div(&self.scales));
        self.path_sigma = (1.0 - p.c_sigma) * &self.path_sigma
            + (p.c_sigma * (2.0 - p.c_sigma) * p.mu_eff).sqrt() * inv_sqrt_y;
        let ps_norm = self.path_sigma.norm();
        let gen = (self.generation + 1) as i32;
        let h_sigma = ps_norm / (1.0 - (1.0 - p.c_sigma).powi(2 * gen)).sqrt()
            < (1.4 + 2.0 / (n as f64 + 1.0)) * p.chi_n;
        let h = if h_sigma { 1.0 } else { 0.0 };
        self.path_c =
            (1.0 - p.c_c) * &self.path_c + h * (p.c_c * (2.0 - p.c_c) * p.mu_eff).sqrt() * &y_w;

        let decay = 1.0 - p.c_1 - p.c_mu + (1.0 - h) * p.c_1 * p.c_c * (2.0 - p.c_c);
        let mut cov = decay * &self.cov;
        cov.ger(p.c_1, &self.path_c, &self.path_c, 1.0);
        for (w, y) in p.weights.iter().zip(&steps) {
            cov.ger(p.c_mu * w, y, y, 1.0);
        }
        let sym = 0.5 * (&cov + cov.transpose());

        self.mean += self.sigma * &y_w;
        self.sigma *= ((p.c_sigma / p.d_sigma) * (ps_norm / p.chi_n - 1.0)).exp();
        self.cov = sym;
        self.generation += 1;
        if !self.sigma.is_finite() || self.mean.iter().any(|m| !m.is_finite()) {
            return Err(Error::NonFinite("search distribution"));
        }
        self.refresh_eigen()
    }

    fn refresh_eigen(&mut self) -> Result<()> {
        let eig = SymmetricEigen::new(self.cov.clone());
        let max = eig.eigenvalues.max();
        if max.is_nan() || max <= 0.0 || eig.eigenvalues.iter().any(|v| !v.is_finite()) {
            return Err(Error::Covariance(max));
        }
        let floor = EIGEN_FLOOR * max;
        self.scales = eig.eigenvalues.map(|v| v.max(floor).sqrt());
        self.basis = eig.eigenvectors;
        Ok(())
    }

    /// Clamped eigenvalues of the covariance.
    pub fn eigenvalues(&self) -> Vec<f64> {
        self.scales.iter().map(|s| s * s).collect()
    }
}

/// Minimizes `f` from `x0` until the value drops below `target` or the
/// evaluation budget runs out. Returns (best value, evaluations used).
pub fn minimize<R, F>(
    f: F,
    x0: Vec<f64>,
    sigma0: f64,
    target: f64,
    max_evals: usize,
    rng: &mut R,
) -> Result<(f64, usize)>
where
    R: Rng + ?Sized,
    F: Fn(&[f64]) -> f64,
{
    let lambda = CmaParams::default_lambda(x0.len());
    let mut state = CmaState::new(x0, sigma0, lambda);
    let mut best = f64::INFINITY;
    while state.eval_count + lambda <= max_evals {
        let xs = state.ask(rng);
        let values: Vec<f64> = xs.iter().map(|x| f(x)).collect();
        for &v in &values {
            best = best.min(v);
        }
        let scores: Vec<f64> = values.iter().map(|v| -v).collect();
        state.tell_scores(&xs, &scores)?;
        if best < target {
            break;
        }
    }
    Ok((best, state.eval_count))
}
