use std::fmt::Write as _;

use crate::error::ModelError;

use super::{Instance, LinkSpec};

/// One line per directed link: `src dst capacity e_tx e_rx`.
pub fn write_edge_list(instance: &Instance) -> String {
    let mut out = String::new();
    for l in instance.links() {
        let _ = writeln!(out, "{} {} {} {:e} {:e}", l.src, l.dst, l.mean_capacity, l.e_tx, l.e_rx);
    }
    out
}

/// Inverse of [`write_edge_list`]; blank lines and `#` comments are skipped.
pub fn parse_edge_list(text: &str) -> Result<Vec<LinkSpec>, ModelError> {
    let mut links = Vec::new();
    for (no, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        let err = || ModelError::InvalidInstance(format!("edge list line {}: `{raw}`", no + 1));
        if fields.len() != 5 {
            return Err(err());
        }
        let src = fields[0].parse().map_err(|_| err())?;
        let dst = fields[1].parse().map_err(|_| err())?;
        let nums: Vec<f64> = fields[2..].iter().map(|f| f.parse()).collect::<Result<_, _>>().map_err(|_| err())?;
        links.push(LinkSpec { src, dst, mean_capacity: nums[0], e_tx: nums[1], e_rx: nums[2] });
    }
    Ok(links)
}
