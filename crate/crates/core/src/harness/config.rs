use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::error::ConfigError;
use crate::net::fixtures::frame_utility;
use crate::net::PhysicalParams;
use crate::online::{StochasticConfig, DEFAULT_CAPACITY_SPREAD, DEFAULT_UTILITY_NOISE};

#[derive(Debug, Clone, PartialEq)]
pub struct NetworkConfig {
    pub n: usize,
    pub radius: Vec<f64>,
    pub seeds: usize,
    /// Master seed every per-cell seed is derived from.
    pub seed: u64,
    /// Mean link capacity, bit/s.
    pub link_capacity: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AppConfig {
    pub frame_bytes: f64,
    /// Frames per second at each source.
    pub frame_rate: f64,
    pub map_node: f64,
    pub map_gateway: f64,
    /// Fraction of a processed frame that is sent on as results.
    pub beta: f64,
    pub source_probability: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnergyConfig {
    pub budget: f64,
    pub p_tx: f64,
    pub p_rx: f64,
    pub p_proc: f64,
    pub t_frame_node: f64,
    pub t_frame_gateway: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    pub theta: Vec<f64>,
    pub alpha: Vec<f64>,
    pub delta: f64,
    pub noise: f64,
    pub max_slots: usize,
    /// Bits per unit of the controller's multipliers and subgradients.
    pub flow_unit: f64,
    /// θ of the convergence and comparison experiments.
    pub online_theta: f64,
    pub convergence_radius: f64,
    /// Flat reward per frame of the comparison experiment, at every node.
    pub comparison_map: f64,
    pub comparison_alpha: f64,
    pub comparison_radius: f64,
    /// Source draws tried per cell before it is reported infeasible.
    pub source_draws: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub network: NetworkConfig,
    pub app: AppConfig,
    pub energy: EnergyConfig,
    pub sweep: SweepConfig,
    pub out: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            network: NetworkConfig {
                n: 20,
                radius: vec![0.2, 0.25, 0.3, 0.35, 0.45, 0.5, 0.6, 0.7, 0.8],
                seeds: 50,
                seed: 1,
                link_capacity: 24e6,
            },
            app: AppConfig {
                frame_bytes: 0.5e6,
                frame_rate: 1.0,
                map_node: 33.1,
                map_gateway: 57.9,
                beta: 500.0 / 0.5e6,
                source_probability: 0.5,
            },
            energy: EnergyConfig {
                budget: 2500.0,
                p_tx: 0.4,
                p_rx: 0.4,
                p_proc: 2.1,
                t_frame_node: 3.0,
                t_frame_gateway: 0.1,
            },
            sweep: SweepConfig {
                theta: logspace(-8.0, 0.0, 9),
                alpha: vec![1e-2, 1e-3, 1e-4],
                delta: DEFAULT_CAPACITY_SPREAD,
                noise: DEFAULT_UTILITY_NOISE,
                max_slots: 20_000,
                flow_unit: 1e6,
                online_theta: 1e-5,
                convergence_radius: 0.25,
                comparison_map: 40.0,
                comparison_alpha: 1e-3,
                comparison_radius: 0.25,
                source_draws: 100,
            },
            out: PathBuf::from("out"),
        }
    }
}

/// `n` points evenly spaced in log10 between `10^a` and `10^b`.
pub fn logspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![10f64.powf(a)];
    }
    (0..n).map(|k| 10f64.powf(a + (b - a) * k as f64 / (n - 1) as f64)).collect()
}

impl ExperimentConfig {
    pub fn frame_bits(&self) -> f64 {
        8.0 * self.app.frame_bytes
    }

    /// Per-bit energies and throughputs derived from the measured powers.
    pub fn physical_params(&self) -> PhysicalParams {
        let f = self.frame_bits();
        let mu = self.network.link_capacity;
        let e = &self.energy;
        PhysicalParams {
            link_capacity: mu,
            e_tx: e.p_tx / mu,
            e_rx: e.p_rx / mu,
            energy_budget: e.budget,
            node_proc_capacity: f / e.t_frame_node,
            gateway_proc_capacity: f / e.t_frame_gateway,
            node_proc_energy: e.p_proc * e.t_frame_node / f,
            gateway_proc_energy: e.p_proc * e.t_frame_gateway / f,
            source_rate: self.app.frame_rate * f,
            flow_reduction: self.app.beta,
            node_utility: frame_utility(self.app.map_node, f),
            gateway_utility: frame_utility(self.app.map_gateway, f),
        }
    }

    /// The same network with one flat per-frame reward everywhere.
    pub fn comparison_params(&self) -> PhysicalParams {
        let f = self.frame_bits();
        PhysicalParams {
            node_utility: frame_utility(self.sweep.comparison_map, f),
            gateway_utility: frame_utility(self.sweep.comparison_map, f),
            ..self.physical_params()
        }
    }

    pub fn stochastic(&self) -> StochasticConfig {
        StochasticConfig {
            frame_bits: self.frame_bits(),
            capacity_spread: self.sweep.delta,
            utility_noise: self.sweep.noise,
            ..StochasticConfig::default()
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |key: &str, msg: &str| Err(ConfigError::invalid(key, msg));
        let positive = |key: &str, v: f64| if v > 0.0 && v.is_finite() { Ok(()) } else { bad(key, "must be positive") };
        if self.network.n < 2 {
            return bad("network.n", "need at least 2 nodes");
        }
        if self.network.seeds < 1 {
            return bad("network.seeds", "need at least one seed");
        }
        if self.network.radius.is_empty() {
            return bad("network.radius", "grid is empty");
        }
        if self.network.radius.iter().any(|&r| !(r > 0.0)) {
            return bad("network.radius", "radii must be positive");
        }
        positive("network.link_capacity", self.network.link_capacity)?;
        positive("app.frame_bytes", self.app.frame_bytes)?;
        positive("app.frame_rate", self.app.frame_rate)?;
        if !(0.0..=1.0).contains(&self.app.source_probability) {
            return bad("app.source_probability", "must lie in [0, 1]");
        }
        if !(0.0..1.0).contains(&self.app.beta) {
            return bad("app.beta", "must lie in [0, 1)");
        }
        for (key, v) in [("app.map_node", self.app.map_node), ("app.map_gateway", self.app.map_gateway)] {
            if !(v >= 0.0) {
                return bad(key, "must be non-negative");
            }
        }
        positive("energy.budget", self.energy.budget)?;
        positive("energy.t_frame_node", self.energy.t_frame_node)?;
        positive("energy.t_frame_gateway", self.energy.t_frame_gateway)?;
        for (key, v) in [("energy.p_tx", self.energy.p_tx), ("energy.p_rx", self.energy.p_rx), ("energy.p_proc", self.energy.p_proc)] {
            if !(v >= 0.0) {
                return bad(key, "must be non-negative");
            }
        }
        if self.sweep.theta.is_empty() {
            return bad("sweep.theta", "grid is empty");
        }
        if self.sweep.theta.iter().any(|t| !(0.0..=1.0).contains(t)) {
            return bad("sweep.theta", "values must lie in [0, 1]");
        }
        if self.sweep.alpha.is_empty() {
            return bad("sweep.alpha", "grid is empty");
        }
        if self.sweep.alpha.iter().any(|&a| !(a > 0.0)) {
            return bad("sweep.alpha", "step sizes must be positive");
        }
        for (key, v) in [("sweep.delta", self.sweep.delta), ("sweep.noise", self.sweep.noise)] {
            if !(0.0..=1.0).contains(&v) {
                return bad(key, "must lie in [0, 1]");
            }
        }
        if self.sweep.max_slots < 1 {
            return bad("sweep.max_slots", "must be at least 1");
        }
        positive("sweep.flow_unit", self.sweep.flow_unit)?;
        if !(0.0..=1.0).contains(&self.sweep.online_theta) {
            return bad("sweep.online_theta", "must lie in [0, 1]");
        }
        positive("sweep.convergence_radius", self.sweep.convergence_radius)?;
        positive("sweep.comparison_radius", self.sweep.comparison_radius)?;
        positive("sweep.comparison_alpha", self.sweep.comparison_alpha)?;
        if !(self.sweep.comparison_map >= 0.0) {
            return bad("sweep.comparison_map", "must be non-negative");
        }
        if self.sweep.source_draws < 1 {
            return bad("sweep.source_draws", "must be at least 1");
        }
        Ok(())
    }

    /// Every setting as `section.key = value`, in a fixed order. Parsing the
    /// output gives back the same configuration.
    pub fn canonical(&self) -> String {
        let list = |v: &[f64]| v.iter().map(|x| format!("{x:e}")).collect::<Vec<_>>().join(", ");
        let mut s = String::new();
        let n = &self.network;
        let a = &self.app;
        let e = &self.energy;
        let w = &self.sweep;
        let _ = writeln!(s, "network.n = {}", n.n);
        let _ = writeln!(s, "network.radius = {}", list(&n.radius));
        let _ = writeln!(s, "network.seeds = {}", n.seeds);
        let _ = writeln!(s, "network.seed = {}", n.seed);
        let _ = writeln!(s, "network.link_capacity = {:e}", n.link_capacity);
        let _ = writeln!(s, "app.frame_bytes = {:e}", a.frame_bytes);
        let _ = writeln!(s, "app.frame_rate = {:e}", a.frame_rate);
        let _ = writeln!(s, "app.map_node = {:e}", a.map_node);
        let _ = writeln!(s, "app.map_gateway = {:e}", a.map_gateway);
        let _ = writeln!(s, "app.beta = {:e}", a.beta);
        let _ = writeln!(s, "app.source_probability = {:e}", a.source_probability);
        let _ = writeln!(s, "energy.budget = {:e}", e.budget);
        let _ = writeln!(s, "energy.p_tx = {:e}", e.p_tx);
        let _ = writeln!(s, "energy.p_rx = {:e}", e.p_rx);
        let _ = writeln!(s, "energy.p_proc = {:e}", e.p_proc);
        let _ = writeln!(s, "energy.t_frame_node = {:e}", e.t_frame_node);
        let _ = writeln!(s, "energy.t_frame_gateway = {:e}", e.t_frame_gateway);
        let _ = writeln!(s, "sweep.theta = {}", list(&w.theta));
        let _ = writeln!(s, "sweep.alpha = {}", list(&w.alpha));
        let _ = writeln!(s, "sweep.delta = {:e}", w.delta);
        let _ = writeln!(s, "sweep.noise = {:e}", w.noise);
        let _ = writeln!(s, "sweep.max_slots = {}", w.max_slots);
        let _ = writeln!(s, "sweep.flow_unit = {:e}", w.flow_unit);
        let _ = writeln!(s, "sweep.online_theta = {:e}", w.online_theta);
        let _ = writeln!(s, "sweep.convergence_radius = {:e}", w.convergence_radius);
        let _ = writeln!(s, "sweep.comparison_map = {:e}", w.comparison_map);
        let _ = writeln!(s, "sweep.comparison_alpha = {:e}", w.comparison_alpha);
        let _ = writeln!(s, "sweep.comparison_radius = {:e}", w.comparison_radius);
        let _ = writeln!(s, "sweep.source_draws = {}", w.source_draws);
        let _ = writeln!(s, "out.dir = {}", self.out.display());
        s
    }
}

/// A number with an optional `k` (10³) or `M` (10⁶) suffix.
pub fn parse_number(text: &str) -> Option<f64> {
    let t = text.trim();
    let (body, scale) = match t.as_bytes().last()? {
        b'k' => (&t[..t.len() - 1], 1e3),
        b'M' => (&t[..t.len() - 1], 1e6),
        _ => (t, 1.0),
    };
    let v: f64 = body.trim().parse().ok()?;
    v.is_finite().then_some(v * scale)
}

/// Comma-separated numbers, or `logspace(a, b, n)` for `n` points from `a`
/// to `b` evenly spaced in log10.
fn parse_grid(text: &str) -> Option<Vec<f64>> {
    let t = text.trim();
    if let Some(inner) = t.strip_prefix("logspace(").and_then(|r| r.strip_suffix(')')) {
        let parts: Vec<&str> = inner.split(',').collect();
        if parts.len() != 3 {
            return None;
        }
        let a = parse_number(parts[0])?;
        let b = parse_number(parts[1])?;
        let n: usize = parts[2].trim().parse().ok()?;
        if !(a > 0.0 && b > 0.0) || n == 0 {
            return None;
        }
        return Some(logspace(a.log10(), b.log10(), n));
    }
    t.split(',').map(parse_number).collect()
}

fn parse_count(text: &str) -> Option<usize> {
    let v = parse_number(text)?;
    (v >= 0.0 && v.fract() == 0.0 && v <= usize::MAX as f64).then_some(v as usize)
}

/// Parses config text on top of the defaults. `app.beta` wins over the
/// ratio of `app.result_bytes` to `app.frame_bytes` when both are given.
pub fn parse_config(text: &str) -> Result<ExperimentConfig, ConfigError> {
    let mut cfg = ExperimentConfig::default();
    let mut result_bytes: Option<f64> = None;
    let mut beta: Option<f64> = None;
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(ConfigError::Syntax { line: idx + 1, msg: format!("expected `key = value`, got `{line}`") });
        };
        let key = key.trim();
        let value = value.trim();
        let num = || parse_number(value).ok_or_else(|| ConfigError::invalid(key, format!("`{value}` is not a number")));
        let count = || {
            parse_count(value).ok_or_else(|| ConfigError::invalid(key, format!("`{value}` is not a whole number")))
        };
        let grid = || parse_grid(value).ok_or_else(|| ConfigError::invalid(key, format!("`{value}` is not a grid")));
        match key {
            "network.n" => cfg.network.n = count()?,
            "network.radius" => cfg.network.radius = grid()?,
            "network.seeds" => cfg.network.seeds = count()?,
            "network.seed" => cfg.network.seed = count()? as u64,
            "network.link_capacity" => cfg.network.link_capacity = num()?,
            "app.frame_bytes" => cfg.app.frame_bytes = num()?,
            "app.result_bytes" => result_bytes = Some(num()?),
            "app.beta" => beta = Some(num()?),
            "app.frame_rate" => cfg.app.frame_rate = num()?,
            "app.map_node" => cfg.app.map_node = num()?,
            "app.map_gateway" => cfg.app.map_gateway = num()?,
            "app.source_probability" => cfg.app.source_probability = num()?,
            "energy.budget" => cfg.energy.budget = num()?,
            "energy.p_tx" => cfg.energy.p_tx = num()?,
            "energy.p_rx" => cfg.energy.p_rx = num()?,
            "energy.p_proc" => cfg.energy.p_proc = num()?,
            "energy.t_frame_node" => cfg.energy.t_frame_node = num()?,
            "energy.t_frame_gateway" => cfg.energy.t_frame_gateway = num()?,
            "sweep.theta" => cfg.sweep.theta = grid()?,
            "sweep.alpha" => cfg.sweep.alpha = grid()?,
            "sweep.delta" => cfg.sweep.delta = num()?,
            "sweep.noise" => cfg.sweep.noise = num()?,
            "sweep.max_slots" => cfg.sweep.max_slots = count()?,
            "sweep.flow_unit" => cfg.sweep.flow_unit = num()?,
            "sweep.online_theta" => cfg.sweep.online_theta = num()?,
            "sweep.convergence_radius" => cfg.sweep.convergence_radius = num()?,
            "sweep.comparison_map" => cfg.sweep.comparison_map = num()?,
            "sweep.comparison_alpha" => cfg.sweep.comparison_alpha = num()?,
            "sweep.comparison_radius" => cfg.sweep.comparison_radius = num()?,
            "sweep.source_draws" => cfg.sweep.source_draws = count()?,
            "out.dir" => cfg.out = PathBuf::from(value),
            _ => return Err(ConfigError::UnknownKey(key.to_string())),
        }
    }
    cfg.app.beta = match (beta, result_bytes) {
        (Some(b), _) => b,
        (None, Some(r)) => r / cfg.app.frame_bytes,
        (None, None) => ExperimentConfig::default().app.beta * 0.5e6 / cfg.app.frame_bytes,
    };
    cfg.validate()?;
    Ok(cfg)
}

pub fn load_config(path: &Path) -> Result<ExperimentConfig, ConfigError> {
    parse_config(&std::fs::read_to_string(path)?)
}
