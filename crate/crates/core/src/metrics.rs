//! Swarm fitness, heading order, and the pooled two-sample t-test.

use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};
use crate::field::{ScalarField, G_MAX};
use crate::sim::WorldState;

/// Significance levels checked by [`two_sample_t`].
pub const ALPHAS: [f64; 3] = [0.05, 0.01, 0.001];

/// Mean light over the swarm at one instant.
pub fn instant_light(world: &WorldState, field: &ScalarField) -> f64 {
    let n = world.robots.len();
    world
        .robots
        .iter()
        .map(|r| field.sample(r.pose.x, r.pose.y))
        .sum::<f64>()
        / n as f64
}

/// `mean(l_t) / 255`.
pub fn trial_fitness(light_series: &[f64]) -> Result<f64> {
    if light_series.is_empty() {
        return Err(Error::EmptySeries);
    }
    let mean = light_series.iter().sum::<f64>() / light_series.len() as f64;
    Ok(mean / G_MAX)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OrderReading {
    pub overall: f64,
    /// Mean local order over robots running reservoir 0 / 1; `None` if empty.
    pub per_group: [Option<f64>; 2],
}

/// Local order of every robot: the length of the mean heading unit vector
/// over itself and all robots within `range`.
pub fn local_order(world: &WorldState, range: f64) -> Vec<f64> {
    let r2 = range * range;
    let units: Vec<(f64, f64)> = world
        .robots
        .iter()
        .map(|r| {
            let (s, c) = r.pose.heading.sin_cos();
            (c, s)
        })
        .collect();
    world
        .robots
        .iter()
        .enumerate()
        .map(|(i, me)| {
            let (mut sx, mut sy) = units[i];
            let mut count = 1usize;
            for (j, other) in world.robots.iter().enumerate() {
                if j == i {
                    continue;
                }
                let dx = other.pose.x - me.pose.x;
                let dy = other.pose.y - me.pose.y;
                if dx * dx + dy * dy <= r2 {
                    sx += units[j].0;
                    sy += units[j].1;
                    count += 1;
                }
            }
            (sx.hypot(sy) / count as f64).min(1.0)
        })
        .collect()
}

/// Swarm order overall and per active reservoir.
pub fn order(world: &WorldState, neighbor_range: f64) -> OrderReading {
    let phi = local_order(world, neighbor_range);
    let overall = phi.iter().sum::<f64>() / phi.len() as f64;
    let mut per_group = [None; 2];
    for (g, slot) in per_group.iter_mut().enumerate() {
        let members: Vec<f64> = world
            .robots
            .iter()
            .zip(&phi)
            .filter(|(r, _)| r.active_reservoir == g)
            .map(|(_, p)| *p)
            .collect();
        if !members.is_empty() {
            *slot = Some(members.iter().sum::<f64>() / members.len() as f64);
        }
    }
    OrderReading { overall, per_group }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroupSummary {
    pub n: usize,
    pub mean: f64,
    /// Sample standard deviation (n - 1 denominator).
    pub std: f64,
}

impl GroupSummary {
    pub fn of(values: &[f64]) -> Self {
        let n = values.len();
        let mean = values.iter().sum::<f64>() / n as f64;
        let var = if n > 1 {
            values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64
        } else {
            0.0
        };
        Self {
            n,
            mean,
            std: var.sqrt(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StatReport {
    pub a: GroupSummary,
    pub b: GroupSummary,
    pub t: f64,
    pub df: usize,
    /// Two-sided.
    pub p_value: f64,
    /// Both groups have zero variance but different means.
    pub degenerate: bool,
    pub bonferroni: f64,
    /// `p <= alpha / bonferroni` for each entry of [`ALPHAS`].
    pub significant: [bool; 3],
}

impl StatReport {
    pub fn stars(&self) -> &'static str {
        match self.significant {
            [_, _, true] => "***",
            [_, true, _] => "**",
            [true, _, _] => "*",
            _ => "",
        }
    }
}

/// Student's pooled-variance two-sample t-test.
pub fn two_sample_t(a: &[f64], b: &[f64], bonferroni: f64) -> Result<StatReport> {
    if a.len() < 2 || b.len() < 2 {
        return Err(Error::TooFewSamples);
    }
    if a.iter().chain(b).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("t-test sample"));
    }
    let sa = GroupSummary::of(a);
    let sb = GroupSummary::of(b);
    let df = sa.n + sb.n - 2;
    let pooled =
        ((sa.n - 1) as f64 * sa.std.powi(2) + (sb.n - 1) as f64 * sb.std.powi(2)) / df as f64;
    let se = (pooled * (1.0 / sa.n as f64 + 1.0 / sb.n as f64)).sqrt();
    let diff = sa.mean - sb.mean;
    let (t, p_value, degenerate) = if se > 0.0 {
        let t = diff / se;
        let dist = StudentsT::new(0.0, 1.0, df as f64).expect("df is positive");
        (t, 2.0 * dist.sf(t.abs()), false)
    } else if diff == 0.0 {
        (0.0, 1.0, false)
    } else {
        (diff.signum() * f64::INFINITY, 0.0, true)
    };
    let bonferroni = bonferroni.max(1.0);
    let significant = ALPHAS.map(|alpha| p_value <= alpha / bonferroni);
    Ok(StatReport {
        a: sa,
        b: sb,
        t,
        df,
        p_value,
        degenerate,
        bonferroni,
        significant,
    })
}
