use std::fmt::Write as _;

use crate::scalar::Scalar;

use super::{LinearProgram, Relation};

/// Plain-text rendering for cross-checking with external solvers.
///
/// ```text
/// min: <coef> <name> ...
/// var <name> <lower> <upper>
/// c<i>: <coef> <name> ... <= | = | >= <rhs>
/// ```
pub fn write_lp<T: Scalar>(lp: &LinearProgram<T>) -> String {
    let mut out = String::new();
    let name = |j: usize| lp.vars()[j].name.replace(' ', "_");
    out.push_str("min:");
    for (j, &c) in lp.objective().iter().enumerate() {
        if c != T::zero() {
            let _ = write!(out, " {:+e} {}", c.as_f64(), name(j));
        }
    }
    out.push('\n');
    for (j, v) in lp.vars().iter().enumerate() {
        let _ = writeln!(out, "var {} {} {}", name(j), v.lower.as_f64(), v.upper.as_f64());
    }
    for (i, c) in lp.constraints().iter().enumerate() {
        let _ = write!(out, "c{i}:");
        for &(v, a) in &c.terms {
            let _ = write!(out, " {:+e} {}", a.as_f64(), name(v.0));
        }
        let rel = match c.relation {
            Relation::Le => "<=",
            Relation::Eq => "=",
            Relation::Ge => ">=",
        };
        let _ = writeln!(out, " {rel} {:e}", c.rhs.as_f64());
    }
    out
}
