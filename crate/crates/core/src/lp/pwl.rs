use crate::error::ModelError;
use crate::scalar::Scalar;

use super::{LinearProgram, Relation, VarId};

/// Concave, non-decreasing piecewise-linear function on `[0, ∞)`.
///
/// Defined by breakpoints `(input, value)` starting at input zero; the last
/// segment's slope extends past the final breakpoint. A single breakpoint is
/// a constant function.
#[derive(Debug, Clone, PartialEq)]
pub struct PiecewiseLinearConcave<T> {
    points: Vec<(T, T)>,
}

impl<T: Scalar> PiecewiseLinearConcave<T> {
    pub fn new(points: Vec<(T, T)>) -> Result<Self, ModelError> {
        let Some(&(x0, v0)) = points.first() else {
            return Err(ModelError::NotConcave("no breakpoints".into()));
        };
        if x0 != T::zero() {
            return Err(ModelError::NotConcave(format!("first breakpoint at {x0}, expected 0")));
        }
        if !v0.is_finite() {
            return Err(ModelError::NotConcave("non-finite value".into()));
        }
        let slack = T::lit(1e-12);
        let mut prev_slope = T::infinity();
        for w in points.windows(2) {
            let ((xa, va), (xb, vb)) = (w[0], w[1]);
            if !(xb > xa) || !vb.is_finite() {
                return Err(ModelError::NotConcave("breakpoint inputs must increase strictly".into()));
            }
            let slope = (vb - va) / (xb - xa);
            if slope < -slack {
                return Err(ModelError::NotConcave(format!("negative slope {slope}")));
            }
            if slope > prev_slope + slack * T::one().max(prev_slope.abs()) {
                return Err(ModelError::NotConcave(format!(
                    "slope increases from {prev_slope} to {slope}"
                )));
            }
            prev_slope = slope;
        }
        Ok(Self { points })
    }

    /// `y ↦ slope · y`.
    pub fn linear(slope: T) -> Result<Self, ModelError> {
        Self::new(vec![(T::zero(), T::zero()), (T::one(), slope)])
    }

    pub fn constant(value: T) -> Self {
        Self { points: vec![(T::zero(), value)] }
    }

    pub fn breakpoints(&self) -> &[(T, T)] {
        &self.points
    }

    /// `(anchor input, anchor value, slope)` for each segment; the function is
    /// the pointwise minimum of the corresponding lines.
    pub fn segments(&self) -> Vec<(T, T, T)> {
        if self.points.len() == 1 {
            return vec![(T::zero(), self.points[0].1, T::zero())];
        }
        self.points
            .windows(2)
            .map(|w| {
                let ((xa, va), (xb, vb)) = (w[0], w[1]);
                (xa, va, (vb - va) / (xb - xa))
            })
            .collect()
    }

    pub fn value_at_zero(&self) -> T {
        self.points[0].1
    }

    /// Slope of the first segment, i.e. the largest marginal value.
    pub fn max_slope(&self) -> T {
        self.segments()[0].2
    }

    pub fn eval(&self, y: T) -> T {
        self.segments()
            .into_iter()
            .map(|(xa, va, s)| va + s * (y - xa))
            .fold(T::infinity(), T::min)
    }

    /// Same shape with every value multiplied by `factor ≥ 0`.
    pub fn scaled(&self, factor: T) -> Self {
        Self { points: self.points.iter().map(|&(x, v)| (x, v * factor)).collect() }
    }

    /// Same function of an input measured in units `unit` times larger.
    pub fn rescale_input(&self, unit: T) -> Self {
        Self { points: self.points.iter().map(|&(x, v)| (x / unit, v)).collect() }
    }

    pub fn is_zero(&self) -> bool {
        self.points.iter().all(|&(_, v)| v == T::zero())
    }
}

/// Adds a hypograph variable `u ≤ ω(var)` (one row per segment). Minimizing
/// `-u` drives `u` to `ω(var)` exactly.
pub fn encode_pwl_utility<T: Scalar>(
    u: &PiecewiseLinearConcave<T>,
    var: VarId,
    lp: &mut LinearProgram<T>,
) -> Result<VarId, ModelError> {
    // re-validate: callers may construct through `scaled`
    let u = PiecewiseLinearConcave::new(u.points.clone())?;
    let lower = if lp.var(var).lower >= T::zero() { u.value_at_zero() } else { T::neg_infinity() };
    let name = format!("util[{}]", lp.var(var).name);
    let aux = lp.add_var(name, lower, T::infinity());
    for (xa, va, slope) in u.segments() {
        // aux - slope·var ≤ va - slope·xa
        lp.add_constraint(vec![(aux, T::one()), (var, -slope)], Relation::Le, va - slope * xa);
    }
    Ok(aux)
}
