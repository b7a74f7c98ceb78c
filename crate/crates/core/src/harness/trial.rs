use std::io::Write;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::controller::{
    build_reservoir, regulate, Brain, Genotype, RegulatoryPolicy, ReservoirSpec,
};
use crate::error::{Error, Result};
use crate::field::{build_arena, ScalarField};
use crate::harness::config::ExperimentConfig;
use crate::metrics::{instant_light, order, trial_fitness};
use crate::sensing::{normalize, sense, SENSOR_RANGE};
use crate::sim::{apply_command, spawn_swarm, WorldState};

/// Per-tick measurements of one trial.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialSeries {
    /// Mean swarm light at each controller tick.
    pub light: Vec<f64>,
    pub order: Vec<f64>,
    /// Order among robots running reservoir 0 / 1.
    pub order_group: Vec<[Option<f64>; 2]>,
    pub fitness: f64,
}

/// One robot at one controller tick.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectoryRow {
    pub time: f64,
    pub id: usize,
    pub subgroup: usize,
    pub active_reservoir: usize,
    pub x: f64,
    pub y: f64,
    pub heading: f64,
    pub light: f64,
}

#[derive(Debug, Clone)]
pub struct TrialOutcome {
    pub series: TrialSeries,
    pub seed: u64,
    pub trajectory: Option<Vec<TrajectoryRow>>,
}

/// A fixed experiment setup (arena, reservoirs, optional policy) that can run
/// any number of trials.
#[derive(Debug, Clone)]
pub struct Evaluator {
    cfg: ExperimentConfig,
    field: ScalarField,
    reservoirs: [ReservoirSpec; 2],
    policy: Option<RegulatoryPolicy>,
}

impl Evaluator {
    pub fn new(cfg: ExperimentConfig, policy: Option<RegulatoryPolicy>) -> Result<Self> {
        let field = build_arena(cfg.arena, cfg.cells_per_meter);
        Self::with_field(cfg, field, policy)
    }

    pub fn with_field(
        cfg: ExperimentConfig,
        field: ScalarField,
        policy: Option<RegulatoryPolicy>,
    ) -> Result<Self> {
        cfg.validate()?;
        if cfg.adaptive != policy.is_some() {
            return Err(Error::Config(
                "a regulatory policy is required exactly when `adaptive` is set".into(),
            ));
        }
        let reservoirs = cfg.reservoir_seeds.map(build_reservoir);
        Ok(Self {
            cfg,
            field,
            reservoirs,
            policy,
        })
    }

    pub fn config(&self) -> &ExperimentConfig {
        &self.cfg
    }

    pub fn field(&self) -> &ScalarField {
        &self.field
    }

    pub fn fitness(&self, genotype: &Genotype, seed: u64) -> Result<f64> {
        Ok(self.run(genotype, seed, false)?.series.fitness)
    }

    /// Spawns the swarm and runs it for the configured duration.
    ///
    /// Each controller tick every robot senses, runs its active reservoir and
    /// sets its wheels; the command is held until the next tick. In adaptive
    /// mode every robot re-draws its reservoir once per policy period.
    pub fn run(&self, genotype: &Genotype, seed: u64, record: bool) -> Result<TrialOutcome> {
        let cfg = &self.cfg;
        let brain = Brain {
            reservoirs: self.reservoirs.clone(),
            outputs: {
                let (a, b) = genotype.decode();
                [a, b]
            },
        };
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut world = spawn_swarm(cfg.swarm_size, cfg.ratio, cfg.spawn_distance(), &mut rng)?;
        world.dt = cfg.dt;

        let steps = cfg.physics_steps();
        let per_tick = cfg.steps_per_tick();
        let per_update = self
            .policy
            .as_ref()
            .map(|p| ((p.update_period / cfg.dt).round() as u64).max(1));

        let ticks = cfg.controller_ticks() as usize;
        let mut series = TrialSeries {
            light: Vec::with_capacity(ticks),
            order: Vec::with_capacity(ticks),
            order_group: Vec::with_capacity(ticks),
            fitness: 0.0,
        };
        let mut trajectory = record.then(Vec::new);
        let mut commands = Vec::with_capacity(cfg.swarm_size);

        for k in 0..steps {
            if let (Some(policy), Some(every)) = (&self.policy, per_update) {
                if k % every == 0 {
                    self.regulate_all(&mut world, policy);
                }
            }
            if k % per_tick == 0 {
                commands.clear();
                for i in 0..world.robots.len() {
                    let input = normalize(&sense(&world, i, &self.field));
                    commands.push(brain.act(world.robots[i].active_reservoir, &input));
                }
                for (r, cmd) in world.robots.iter_mut().zip(&commands) {
                    *r = apply_command(*r, *cmd);
                }
                self.record(&world, &mut series, trajectory.as_mut());
            }
            world.step();
        }
        series.fitness = trial_fitness(&series.light)?;
        Ok(TrialOutcome {
            series,
            seed,
            trajectory,
        })
    }

    fn regulate_all(&self, world: &mut WorldState, policy: &RegulatoryPolicy) {
        for (r, stream) in world.robots.iter_mut().zip(world.streams.iter_mut()) {
            let light = self.field.sample(r.pose.x, r.pose.y);
            r.active_reservoir = regulate(policy, light, stream);
        }
    }

    fn record(
        &self,
        world: &WorldState,
        series: &mut TrialSeries,
        trajectory: Option<&mut Vec<TrajectoryRow>>,
    ) {
        series.light.push(instant_light(world, &self.field));
        let o = order(world, SENSOR_RANGE);
        series.order.push(o.overall);
        series.order_group.push(o.per_group);
        if let Some(rows) = trajectory {
            let time = world.time();
            rows.extend(
                world
                    .robots
                    .iter()
                    .enumerate()
                    .map(|(id, r)| TrajectoryRow {
                        time,
                        id,
                        subgroup: r.subgroup,
                        active_reservoir: r.active_reservoir,
                        x: r.pose.x,
                        y: r.pose.y,
                        heading: r.pose.heading,
                        light: self.field.sample(r.pose.x, r.pose.y),
                    }),
            );
        }
    }
}

/// One-off trial; builds the arena and reservoirs from `cfg`.
pub fn run_trial(
    cfg: &ExperimentConfig,
    genotype: &Genotype,
    seed: u64,
    policy: Option<&RegulatoryPolicy>,
) -> Result<TrialOutcome> {
    Evaluator::new(cfg.clone(), policy.cloned())?.run(genotype, seed, true)
}

pub const TRAJECTORY_HEADER: [&str; 8] = [
    "time",
    "id",
    "subgroup",
    "active_reservoir",
    "x",
    "y",
    "heading",
    "light",
];

pub const METRICS_HEADER: [&str; 5] = ["tick", "l_t", "phi", "phi_green", "phi_red"];

pub fn write_trajectory_csv<W: Write>(rows: &[TrajectoryRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(TRAJECTORY_HEADER)?;
    for r in rows {
        w.write_record([
            r.time.to_string(),
            r.id.to_string(),
            r.subgroup.to_string(),
            r.active_reservoir.to_string(),
            r.x.to_string(),
            r.y.to_string(),
            r.heading.to_string(),
            r.light.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_metrics_csv<W: Write>(series: &TrialSeries, out: W) -> Result<()> {
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    let mut w = csv::Writer::from_writer(out);
    w.write_record(METRICS_HEADER)?;
    for (t, ((l, o), g)) in series
        .light
        .iter()
        .zip(&series.order)
        .zip(&series.order_group)
        .enumerate()
    {
        w.write_record([
            t.to_string(),
            l.to_string(),
            o.to_string(),
            opt(g[0]),
            opt(g[1]),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn short_cfg() -> ExperimentConfig {
        ExperimentConfig {
            eval_minutes: 0.5,
            swarm_size: 6,
            cells_per_meter: 5,
            ..ExperimentConfig::desk()
        }
    }

    #[test]
    fn tick_counts() {
        let cfg = short_cfg();
        let ev = Evaluator::new(cfg.clone(), None).unwrap();
        let out = ev.run(&Genotype::zeros(), 3, true).unwrap();
        assert_eq!(out.series.light.len(), 300);
        assert_eq!(out.trajectory.unwrap().len(), 300 * 6);
    }

    #[test]
    fn zero_genotype_stands_still() {
        let cfg = short_cfg();
        let ev = Evaluator::new(cfg.clone(), None).unwrap();
        let out = ev.run(&Genotype::zeros(), 9, true).unwrap();
        let first = out.series.light[0];
        assert!(out.series.light.iter().all(|&l| l == first));
        assert!((out.series.fitness - first / 255.0).abs() < 1e-12);
        let traj = out.trajectory.unwrap();
        let n = cfg.swarm_size;
        for (a, b) in traj[..n].iter().zip(&traj[traj.len() - n..]) {
            assert_eq!((a.x, a.y, a.heading), (b.x, b.y, b.heading));
        }
    }

    #[test]
    fn policy_must_match_adaptive_flag() {
        let cfg = short_cfg();
        assert!(Evaluator::new(cfg.clone(), Some(RegulatoryPolicy::reference())).is_err());
        let adaptive = ExperimentConfig {
            adaptive: true,
            ..cfg
        };
        assert!(Evaluator::new(adaptive.clone(), None).is_err());
        assert!(Evaluator::new(adaptive, Some(RegulatoryPolicy::reference())).is_ok());
    }

    #[test]
    fn metrics_csv_shape() {
        let series = TrialSeries {
            light: vec![1.0, 2.0],
            order: vec![0.5, 0.25],
            order_group: vec![[Some(1.0), None], [Some(0.5), Some(0.0)]],
            fitness: 0.0,
        };
        let mut buf = Vec::new();
        write_metrics_csv(&series, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(
            text,
            "tick,l_t,phi,phi_green,phi_red\n0,1,0.5,1,\n1,2,0.25,0.5,0\n"
        );
    }
}
