use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};

use crate::error::ModelError;
use crate::lp::PiecewiseLinearConcave;
use crate::net::Instance;
use crate::static_opt::DEFAULT_FLOW_UNIT_BITS;

pub const DEFAULT_CAPACITY_SPREAD: f64 = 0.25;
pub const DEFAULT_UTILITY_NOISE: f64 = 0.2;
pub const SLOT_SECONDS: f64 = 1.0;

#[derive(Debug, Clone, PartialEq)]
pub struct StochasticConfig {
    /// Arrivals come in whole frames of this size.
    pub frame_bits: f64,
    /// Link capacities are uniform on `[(1-δ)μ, (1+δ)μ]`.
    pub capacity_spread: f64,
    /// Same for processing capacities; 0 keeps them constant.
    pub processing_spread: f64,
    /// Utilities are scaled by a uniform factor on `[1-η, 1+η]`.
    pub utility_noise: f64,
    /// Poisson frame counts when set, otherwise exactly the mean bits.
    pub poisson_arrivals: bool,
}

impl Default for StochasticConfig {
    fn default() -> Self {
        Self {
            frame_bits: DEFAULT_FLOW_UNIT_BITS,
            capacity_spread: DEFAULT_CAPACITY_SPREAD,
            processing_spread: 0.0,
            utility_noise: DEFAULT_UTILITY_NOISE,
            poisson_arrivals: true,
        }
    }
}

impl StochasticConfig {
    /// No randomness at all: mean arrivals, mean capacities, exact utilities.
    pub fn deterministic() -> Self {
        Self { capacity_spread: 0.0, utility_noise: 0.0, poisson_arrivals: false, ..Self::default() }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let unit = |x: f64| (0.0..=1.0).contains(&x);
        if !(self.frame_bits > 0.0) {
            return Err(ModelError::InvalidInstance("frame size must be positive".into()));
        }
        if !unit(self.capacity_spread) || !unit(self.processing_spread) || !unit(self.utility_noise) {
            return Err(ModelError::InvalidInstance("spreads and noise must lie in [0, 1]".into()));
        }
        Ok(())
    }
}

/// Everything random about one slot.
#[derive(Debug, Clone, PartialEq)]
pub struct SlotRealization {
    /// Bits arriving during the slot, `[node][app]`.
    pub arrivals: Vec<Vec<f64>>,
    /// bit/s per link.
    pub link_capacity: Vec<f64>,
    /// bit/s per node.
    pub proc_capacity: Vec<f64>,
    /// Multiplicative utility noise, `[node][app]`.
    pub utility_factor: Vec<Vec<f64>>,
}

/// Independent generators for arrivals, capacities and utility noise, so a
/// policy change never shifts another quantity's draws.
#[derive(Debug, Clone)]
pub struct RealizationStreams {
    arrivals: ChaCha8Rng,
    capacities: ChaCha8Rng,
    noise: ChaCha8Rng,
}

impl RealizationStreams {
    pub fn new(seed: u64) -> Self {
        let stream = |s: u64| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(s);
            rng
        };
        Self { arrivals: stream(11), capacities: stream(12), noise: stream(13) }
    }
}

fn spread(rng: &mut ChaCha8Rng, mean: f64, delta: f64) -> f64 {
    if delta > 0.0 {
        mean * rng.gen_range(1.0 - delta..=1.0 + delta)
    } else {
        mean
    }
}

pub fn sample_slot(instance: &Instance, cfg: &StochasticConfig, streams: &mut RealizationStreams) -> SlotRealization {
    let n = instance.num_nodes();
    let nc = instance.num_apps();
    let mut arrivals = vec![vec![0.0; nc]; n];
    for (c, app) in instance.apps().iter().enumerate() {
        for i in 0..n {
            let mean_bits = app.arrival[i] * SLOT_SECONDS;
            if mean_bits <= 0.0 {
                continue;
            }
            arrivals[i][c] = if cfg.poisson_arrivals {
                let frames = Poisson::new(mean_bits / cfg.frame_bits).expect("positive mean").sample(&mut streams.arrivals);
                frames * cfg.frame_bits
            } else {
                mean_bits
            };
        }
    }
    let link_capacity = instance
        .links()
        .iter()
        .map(|l| spread(&mut streams.capacities, l.mean_capacity, cfg.capacity_spread))
        .collect();
    let proc_capacity = instance
        .nodes()
        .iter()
        .map(|v| spread(&mut streams.capacities, v.proc_capacity, cfg.processing_spread))
        .collect();
    let utility_factor = (0..n)
        .map(|_| (0..nc).map(|_| spread(&mut streams.noise, 1.0, cfg.utility_noise)).collect())
        .collect();
    SlotRealization { arrivals, link_capacity, proc_capacity, utility_factor }
}

/// A utility observed through multiplicative noise.
#[derive(Debug, Clone)]
pub struct NoisyUtility {
    pub base: PiecewiseLinearConcave<f64>,
    pub noise: f64,
}

impl NoisyUtility {
    pub fn eval(&self, y: f64, factor: f64) -> f64 {
        self.base.eval(y) * factor
    }

    /// Largest possible estimation error over `[0, cap]`.
    pub fn error_bound(&self, cap: f64) -> f64 {
        // non-decreasing, so |ω| peaks at an end of the interval
        self.noise * self.base.eval(0.0).abs().max(self.base.eval(cap.max(0.0)).abs())
    }
}
