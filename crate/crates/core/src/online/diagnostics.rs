use crate::net::Instance;

use super::episode::EpisodeTrace;
use super::realization::NoisyUtility;
use super::OnlineConfig;

#[derive(Debug, Clone, PartialEq)]
pub struct TheoremDiagnostics {
    /// `(1/T)Σ(f(x[t], y[t]) − f*)`.
    pub average_gap: f64,
    /// `½ max_t ‖g + λ[t]‖²`, flow units.
    pub epsilon1: f64,
    /// `½ mean_t ‖g + λ[t]‖²`.
    pub epsilon1_mean: f64,
    /// `θ Σ ξ` from the utility noise amplitude.
    pub epsilon2: f64,
    /// `α ε₁ + ε₂`.
    pub bound: f64,
    pub bound_holds: bool,
    /// `(1/T)Σ(g + λ)` per `[node][app]`.
    pub mean_excess: Vec<Vec<f64>>,
    /// `max |ν[T+1]/(αT)|`.
    pub feasibility_residual: f64,
    pub identity_error: f64,
    pub identity_holds: bool,
}

/// Slack on the gap bound, in objective units.
const BOUND_SLACK: f64 = 1e-6;

pub fn theorem_diagnostics(
    instance: &Instance,
    cfg: &OnlineConfig,
    trace: &EpisodeTrace,
    f_star: f64,
) -> TheoremDiagnostics {
    let t = trace.slots.len().max(1) as f64;
    let average_gap = trace.slots.iter().map(|s| s.objective - f_star).sum::<f64>() / t;
    let epsilon1 = 0.5 * trace.slots.iter().map(|s| s.excess_norm_sq).fold(0.0, f64::max);
    let epsilon1_mean = 0.5 * trace.slots.iter().map(|s| s.excess_norm_sq).sum::<f64>() / t;

    let noise = cfg.stochastic.utility_noise;
    let mut xi = 0.0;
    for app in instance.apps() {
        for (i, node) in instance.nodes().iter().enumerate() {
            let u = NoisyUtility { base: app.utility[i].clone(), noise };
            xi += u.error_bound(node.proc_capacity / app.proc_demand[i]);
        }
    }
    let epsilon2 = cfg.theta * xi;
    let bound = trace.alpha * epsilon1 + epsilon2;

    let mean_excess: Vec<Vec<f64>> =
        trace.excess_sum.iter().map(|row| row.iter().map(|s| s / t).collect()).collect();
    let feasibility_residual = trace
        .final_nu
        .iter()
        .flatten()
        .map(|nu| (nu / (trace.alpha * t)).abs())
        .fold(0.0, f64::max);

    TheoremDiagnostics {
        average_gap,
        epsilon1,
        epsilon1_mean,
        epsilon2,
        bound,
        bound_holds: average_gap <= bound + BOUND_SLACK,
        mean_excess,
        feasibility_residual,
        identity_error: trace.identity_error,
        identity_holds: trace.identity_holds(),
    }
}

/// `(1/T)Σ_{t≤T}(f(x[t], y[t]) − f*)` for every prefix length `T`.
pub fn running_average_gap(trace: &EpisodeTrace, f_star: f64) -> Vec<f64> {
    let mut sum = 0.0;
    trace
        .slots
        .iter()
        .enumerate()
        .map(|(k, s)| {
            sum += s.objective - f_star;
            sum / (k + 1) as f64
        })
        .collect()
}
