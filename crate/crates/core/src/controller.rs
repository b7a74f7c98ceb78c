//! Reservoir controllers.
//!
//! Each controller is a 9-9-9-2 feed-forward network without biases. The two
//! hidden layers are frozen random reservoirs; only the 2 x 9 output layer is
//! evolved. A genotype carries the output layers of both sub-group controllers.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sensing::{NormalizedInput, INPUT_SIZE};
use crate::sim::WheelCommand;

pub const HIDDEN: usize = 9;
pub const OUTPUTS: usize = 2;
pub const LAYER_WEIGHTS: usize = OUTPUTS * HIDDEN;
pub const GENOTYPE_LEN: usize = 2 * LAYER_WEIGHTS;

type Matrix9 = [[f64; INPUT_SIZE]; HIDDEN];

/// The frozen hidden layers of one controller.
#[derive(Debug, Clone, PartialEq)]
pub struct ReservoirSpec {
    pub w_h1: Matrix9,
    pub w_h2: Matrix9,
    pub seed: u64,
}

impl ReservoirSpec {
    pub fn entries(&self) -> impl Iterator<Item = f64> + '_ {
        self.w_h1
            .iter()
            .chain(self.w_h2.iter())
            .flat_map(|row| row.iter().copied())
    }
}

/// Draws both hidden matrices from U[-1, 1]; a pure function of `seed`.
pub fn build_reservoir(seed: u64) -> ReservoirSpec {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut draw = || {
        let mut m = [[0.0; INPUT_SIZE]; HIDDEN];
        for row in &mut m {
            for w in row.iter_mut() {
                *w = rng.random_range(-1.0..=1.0);
            }
        }
        m
    };
    let w_h1 = draw();
    let w_h2 = draw();
    ReservoirSpec { w_h1, w_h2, seed }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OutputLayer {
    pub w_out: [[f64; HIDDEN]; OUTPUTS],
}

impl OutputLayer {
    pub const ZERO: OutputLayer = OutputLayer {
        w_out: [[0.0; HIDDEN]; OUTPUTS],
    };

    fn from_slice(values: &[f64]) -> Self {
        let mut w_out = [[0.0; HIDDEN]; OUTPUTS];
        for (r, row) in w_out.iter_mut().enumerate() {
            row.copy_from_slice(&values[r * HIDDEN..(r + 1) * HIDDEN]);
        }
        Self { w_out }
    }
}

fn relu_matvec(m: &Matrix9, x: &[f64; HIDDEN]) -> [f64; HIDDEN] {
    let mut out = [0.0; HIDDEN];
    for (o, row) in out.iter_mut().zip(m) {
        let s: f64 = row.iter().zip(x).map(|(w, v)| w * v).sum();
        *o = s.max(0.0);
    }
    out
}

/// `tanh(W_out · relu(W_h2 · relu(W_h1 · input)))`, returned as `(v, w)`.
pub fn forward(res: &ReservoirSpec, out: &OutputLayer, input: &NormalizedInput) -> WheelCommand {
    let h1 = relu_matvec(&res.w_h1, &input.0);
    let h2 = relu_matvec(&res.w_h2, &h1);
    let mut y = [0.0; OUTPUTS];
    for (o, row) in y.iter_mut().zip(&out.w_out) {
        *o = row.iter().zip(&h2).map(|(w, v)| w * v).sum::<f64>().tanh();
    }
    WheelCommand { v: y[0], w: y[1] }
}

/// 36 output weights: reservoir 0's layer row-major, then reservoir 1's.
#[derive(Debug, Clone, PartialEq)]
pub struct Genotype(Vec<f64>);

impl Genotype {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.len() != GENOTYPE_LEN {
            return Err(Error::GenotypeLength {
                expected: GENOTYPE_LEN,
                actual: values.len(),
            });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("genotype"));
        }
        Ok(Self(values))
    }

    pub fn zeros() -> Self {
        Self(vec![0.0; GENOTYPE_LEN])
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn decode(&self) -> (OutputLayer, OutputLayer) {
        (
            OutputLayer::from_slice(&self.0[..LAYER_WEIGHTS]),
            OutputLayer::from_slice(&self.0[LAYER_WEIGHTS..]),
        )
    }

    pub fn encode(first: &OutputLayer, second: &OutputLayer) -> Self {
        let values = [first, second]
            .iter()
            .flat_map(|l| l.w_out.iter().flat_map(|row| row.iter().copied()))
            .collect();
        Self(values)
    }

    /// One value per line.
    pub fn to_text(&self) -> String {
        self.0.iter().map(|v| format!("{v}\n")).collect()
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut values = Vec::with_capacity(GENOTYPE_LEN);
        for (i, line) in text.lines().enumerate() {
            let t = line.trim();
            if t.is_empty() || t.starts_with('#') {
                continue;
            }
            values.push(t.parse::<f64>().map_err(|e| Error::Parse {
                line: i + 1,
                msg: e.to_string(),
            })?);
        }
        Self::new(values)
    }
}

/// Length-checked decode of a raw weight vector.
pub fn decode(values: &[f64]) -> Result<(OutputLayer, OutputLayer)> {
    Ok(Genotype::new(values.to_vec())?.decode())
}

/// Both sub-group controllers of one individual.
#[derive(Debug, Clone)]
pub struct Brain {
    pub reservoirs: [ReservoirSpec; 2],
    pub outputs: [OutputLayer; 2],
}

impl Brain {
    pub fn new(reservoir_seeds: [u64; 2], genotype: &Genotype) -> Self {
        let (a, b) = genotype.decode();
        Self {
            reservoirs: [
                build_reservoir(reservoir_seeds[0]),
                build_reservoir(reservoir_seeds[1]),
            ],
            outputs: [a, b],
        }
    }

    pub fn act(&self, reservoir: usize, input: &NormalizedInput) -> WheelCommand {
        forward(&self.reservoirs[reservoir], &self.outputs[reservoir], input)
    }
}

/// Light-dependent probability of expressing the first (green) controller.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegulatoryPolicy {
    /// Strictly increasing light breakpoints.
    pub thresholds: Vec<f64>,
    /// `thresholds.len() + 1` band probabilities, darkest band first.
    pub probabilities: Vec<f64>,
    /// Seconds between re-draws.
    pub update_period: f64,
}

impl RegulatoryPolicy {
    pub fn new(thresholds: Vec<f64>, probabilities: Vec<f64>, update_period: f64) -> Result<Self> {
        if probabilities.len() != thresholds.len() + 1 {
            return Err(Error::Config(
                "policy needs one more probability than thresholds".into(),
            ));
        }
        if thresholds.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Config("policy thresholds must increase".into()));
        }
        if probabilities.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(Error::Config(
                "policy probabilities must lie in [0, 1]".into(),
            ));
        }
        if update_period.is_nan() || update_period <= 0.0 {
            return Err(Error::Config(
                "policy update period must be positive".into(),
            ));
        }
        Ok(Self {
            thresholds,
            probabilities,
            update_period,
        })
    }

    /// 0.5 up to light 76, 0.75 up to 229, 1.0 above; re-drawn every 5 s.
    pub fn reference() -> Self {
        Self {
            thresholds: vec![76.0, 229.0],
            probabilities: vec![0.5, 0.75, 1.0],
            update_period: 5.0,
        }
    }

    pub fn p_green(&self, light: f64) -> f64 {
        let band = self.thresholds.iter().filter(|&&t| light > t).count();
        self.probabilities[band]
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("policy serializes")
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let p: RegulatoryPolicy = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        Self::new(p.thresholds, p.probabilities, p.update_period)
    }
}

/// Picks the active reservoir: 0 with probability `p_green(light)`, else 1.
pub fn regulate<R: Rng + ?Sized>(policy: &RegulatoryPolicy, light: f64, rng: &mut R) -> usize {
    let p = policy.p_green(light);
    usize::from(rng.random::<f64>() >= p)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reservoir_determinism_and_range() {
        let a = build_reservoir(7);
        assert_eq!(a, build_reservoir(7));
        assert_ne!(a.w_h1, build_reservoir(8).w_h1);
        assert!(a.entries().all(|w| (-1.0..=1.0).contains(&w)));
        assert_eq!(a.entries().count(), 162);
    }

    #[test]
    fn zero_input_gives_zero_command() {
        let res = build_reservoir(1);
        let out = OutputLayer {
            w_out: [[3.0; HIDDEN]; OUTPUTS],
        };
        let cmd = forward(&res, &out, &NormalizedInput([0.0; INPUT_SIZE]));
        assert_eq!((cmd.v, cmd.w), (0.0, 0.0));
    }

    #[test]
    fn outputs_stay_in_range() {
        let res = build_reservoir(2);
        let out = OutputLayer {
            w_out: [[50.0; HIDDEN], [-50.0; HIDDEN]],
        };
        let cmd = forward(&res, &out, &NormalizedInput([1.0; INPUT_SIZE]));
        assert!(cmd.v.abs() <= 1.0 && cmd.w.abs() <= 1.0);
    }

    #[test]
    fn genotype_layout() {
        let g = Genotype::new((1..=36).map(f64::from).collect()).unwrap();
        let (a, b) = g.decode();
        assert_eq!(a.w_out[0], [1., 2., 3., 4., 5., 6., 7., 8., 9.]);
        assert_eq!(a.w_out[1], [10., 11., 12., 13., 14., 15., 16., 17., 18.]);
        assert_eq!(b.w_out[0], [19., 20., 21., 22., 23., 24., 25., 26., 27.]);
        assert_eq!(b.w_out[1], [28., 29., 30., 31., 32., 33., 34., 35., 36.]);
        assert_eq!(Genotype::encode(&a, &b), g);
        let (z0, z1) = Genotype::zeros().decode();
        assert_eq!((z0, z1), (OutputLayer::ZERO, OutputLayer::ZERO));
    }

    #[test]
    fn genotype_rejects_wrong_length() {
        assert!(matches!(
            decode(&[0.0; 35]),
            Err(Error::GenotypeLength { actual: 35, .. })
        ));
        assert!(Genotype::new(vec![f64::NAN; 36]).is_err());
    }

    #[test]
    fn genotype_text_round_trip() {
        let g = Genotype::new((0..36).map(|i| i as f64 * 0.1 - 1.7).collect()).unwrap();
        assert_eq!(Genotype::from_text(&g.to_text()).unwrap(), g);
    }

    #[test]
    fn reference_policy_bands() {
        let p = RegulatoryPolicy::reference();
        assert_eq!(p.p_green(255.0), 1.0);
        assert_eq!(p.p_green(230.0), 1.0);
        assert_eq!(p.p_green(229.0), 0.75);
        assert_eq!(p.p_green(77.0), 0.75);
        assert_eq!(p.p_green(76.0), 0.5);
        assert_eq!(p.p_green(0.0), 0.5);
        let back = RegulatoryPolicy::from_toml(&p.to_toml()).unwrap();
        assert_eq!(back, p);
    }

    #[test]
    fn regulate_certain_band() {
        let p = RegulatoryPolicy::reference();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!((0..1000).all(|_| regulate(&p, 255.0, &mut rng) == 0));
    }

    #[test]
    fn regulate_fair_band() {
        let p = RegulatoryPolicy::reference();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let n = 100_000;
        let green = (0..n).filter(|_| regulate(&p, 50.0, &mut rng) == 0).count();
        let frac = green as f64 / n as f64;
        assert!((frac - 0.5).abs() <= 0.005, "{frac}");
    }

    #[test]
    fn policy_validation() {
        assert!(RegulatoryPolicy::new(vec![10.0, 5.0], vec![0.1, 0.2, 0.3], 5.0).is_err());
        assert!(RegulatoryPolicy::new(vec![10.0], vec![0.1], 5.0).is_err());
        assert!(RegulatoryPolicy::new(vec![], vec![1.5], 5.0).is_err());
    }
}
