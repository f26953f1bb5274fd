use crate::error::ModelError;
use crate::net::Instance;
use crate::static_opt::Policy;

use super::realization::{SlotRealization, SLOT_SECONDS};

/// Multipliers of the flow-balance constraints, in the flow unit of the
/// controller. Gateway rows stay at zero.
#[derive(Debug, Clone, PartialEq)]
pub struct DualState {
    /// `[node][app]`.
    pub nu: Vec<Vec<f64>>,
    pub alpha: f64,
    /// Slots completed so far.
    pub t: usize,
}

impl DualState {
    pub fn new(instance: &Instance, alpha: f64) -> Result<Self, ModelError> {
        if !(alpha > 0.0) || !alpha.is_finite() {
            return Err(ModelError::InvalidInstance(format!("step size {alpha} must be positive")));
        }
        Ok(Self { nu: vec![vec![0.0; instance.num_apps()]; instance.num_nodes()], alpha, t: 0 })
    }

    /// `αν`, the weights the slot Lagrangian puts on the balance terms.
    pub fn prices(&self) -> Vec<Vec<f64>> {
        self.nu.iter().map(|row| row.iter().map(|v| self.alpha * v).collect()).collect()
    }

    /// `Σ ν` over every node and application.
    pub fn congestion(&self) -> f64 {
        self.nu.iter().flatten().sum()
    }

    /// Adds `α·excess` and advances the slot counter.
    pub fn step(&mut self, excess: &[Vec<f64>]) {
        for (row, e) in self.nu.iter_mut().zip(excess) {
            for (v, d) in row.iter_mut().zip(e) {
                *v += self.alpha * d;
            }
        }
        self.t += 1;
    }
}

/// `g(x, y) + λ[t]/T_slot` per `[node][app]` in flow units per second:
/// inflow − outflow + (β − 1)y + arrivals. Zero at the gateway.
pub fn flow_excess(instance: &Instance, action: &Policy, slot: &SlotRealization, flow_unit: f64) -> Vec<Vec<f64>> {
    let nc = instance.num_apps();
    let mut out = vec![vec![0.0; nc]; instance.num_nodes()];
    for (c, app) in instance.apps().iter().enumerate() {
        for i in instance.energy_nodes() {
            let inflow: f64 = instance.in_links(i).iter().map(|&l| action.x[l][c]).sum();
            let outflow: f64 = instance.out_links(i).iter().map(|&l| action.x[l][c]).sum();
            let g = inflow - outflow + (app.flow_reduction[i] - 1.0) * action.y[i][c];
            out[i][c] = (g + slot.arrivals[i][c] / SLOT_SECONDS) / flow_unit;
        }
    }
    out
}

pub fn dual_update(
    dual: &DualState,
    instance: &Instance,
    slot: &SlotRealization,
    action: &Policy,
    flow_unit: f64,
) -> DualState {
    let mut next = dual.clone();
    next.step(&flow_excess(instance, action, slot, flow_unit));
    next
}
