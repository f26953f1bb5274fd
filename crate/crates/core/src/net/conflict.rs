use std::collections::BTreeSet;

use fixedbitset::FixedBitSet;

use crate::error::ModelError;

use super::{Instance, LinkSpec};

/// Symmetric "cannot be active together" relation between directed links.
#[derive(Debug, Clone)]
pub struct ConflictGraph {
    adjacency: Vec<FixedBitSet>,
}

fn raw_interference(links: &[LinkSpec], n: usize, link: usize) -> BTreeSet<usize> {
    let mut neighbors = vec![Vec::new(); n];
    let mut index = std::collections::HashMap::new();
    for (k, l) in links.iter().enumerate() {
        neighbors[l.src].push(l.dst);
        index.insert((l.src, l.dst), k);
    }
    let (i, j) = (links[link].src, links[link].dst);
    let mut ds: BTreeSet<usize> = neighbors[i].iter().copied().collect();
    ds.extend(neighbors[j].iter().copied());
    let mut out = BTreeSet::new();
    for d in ds {
        for &a in &neighbors[d] {
            // (a, d) with a ∈ N_d, and (d, a) with a ∈ N_d
            if let Some(&k) = index.get(&(a, d)) {
                out.insert(k);
            }
            if let Some(&k) = index.get(&(d, a)) {
                out.insert(k);
            }
        }
    }
    out.remove(&link);
    out
}

impl ConflictGraph {
    /// Builds the symmetric closure of the protocol-interference sets.
    pub fn from_links(links: &[LinkSpec], n: usize) -> Self {
        let l = links.len();
        let mut adjacency = vec![FixedBitSet::with_capacity(l); l];
        for k in 0..l {
            for other in raw_interference(links, n, k) {
                adjacency[k].insert(other);
                adjacency[other].insert(k);
            }
        }
        Self { adjacency }
    }

    pub fn from_adjacency(sets: &[Vec<usize>]) -> Self {
        let l = sets.len();
        let mut adjacency = vec![FixedBitSet::with_capacity(l); l];
        for (k, set) in sets.iter().enumerate() {
            for &o in set {
                if o != k {
                    adjacency[k].insert(o);
                    adjacency[o].insert(k);
                }
            }
        }
        Self { adjacency }
    }

    pub fn num_links(&self) -> usize {
        self.adjacency.len()
    }

    pub fn conflicts(&self, a: usize, b: usize) -> bool {
        self.adjacency[a].contains(b)
    }

    pub fn neighbors(&self, link: usize) -> impl Iterator<Item = usize> + '_ {
        self.adjacency[link].ones()
    }

    pub fn is_independent(&self, set: &[usize]) -> bool {
        set.iter().enumerate().all(|(p, &a)| set[p + 1..].iter().all(|&b| a != b && !self.conflicts(a, b)))
    }

    /// Independent and not extendable by any link of `universe`.
    pub fn is_maximal_within(&self, set: &[usize], universe: &[usize]) -> bool {
        self.is_independent(set)
            && universe
                .iter()
                .all(|&l| set.contains(&l) || set.iter().any(|&s| self.conflicts(s, l)))
    }
}

/// `I(i, j)`: links that must be silent while `src → dst` is active, the link
/// itself excluded.
pub fn interference_set(instance: &Instance, src: usize, dst: usize) -> Result<Vec<usize>, ModelError> {
    let link = instance.link_id(src, dst).ok_or(ModelError::UnknownLink(src, dst))?;
    Ok(raw_interference(instance.links(), instance.num_nodes(), link).into_iter().collect())
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MisResult {
    /// Sorted sets in lexicographic order.
    pub sets: Vec<Vec<usize>>,
    /// Set when enumeration stopped at the cap; `sets` is then partial.
    pub overflow: bool,
}

/// All maximal independent sets of the conflict graph restricted to
/// `universe` (every link when `None`), by pivoting Bron–Kerbosch on the
/// complement graph.
pub fn maximal_independent_sets(conflict: &ConflictGraph, universe: Option<&[usize]>, cap: usize) -> MisResult {
    let l = conflict.num_links();
    let mut pool = FixedBitSet::with_capacity(l);
    match universe {
        Some(u) => u.iter().for_each(|&k| pool.insert(k)),
        None => pool.insert_range(..),
    }
    // compatible[k] = links in the pool that may be active together with k
    let compatible: Vec<FixedBitSet> = (0..l)
        .map(|k| {
            let mut c = pool.clone();
            c.difference_with(&conflict.adjacency[k]);
            c.set(k, false);
            c
        })
        .collect();

    let mut out = Vec::new();
    let mut overflow = false;
    let mut r = Vec::new();
    let x = FixedBitSet::with_capacity(l);
    bron_kerbosch(&compatible, &mut r, pool, x, cap.max(1), &mut out, &mut overflow);
    for s in out.iter_mut() {
        s.sort_unstable();
    }
    out.sort();
    MisResult { sets: out, overflow }
}

fn bron_kerbosch(
    compatible: &[FixedBitSet],
    r: &mut Vec<usize>,
    mut p: FixedBitSet,
    mut x: FixedBitSet,
    cap: usize,
    out: &mut Vec<Vec<usize>>,
    overflow: &mut bool,
) {
    if *overflow {
        return;
    }
    if p.count_ones(..) == 0 {
        if x.count_ones(..) == 0 {
            if out.len() >= cap {
                *overflow = true;
                return;
            }
            out.push(r.clone());
        }
        return;
    }
    // pivot maximizing |P ∩ N(u)|, lowest index on ties
    let pivot = p
        .ones()
        .chain(x.ones())
        .max_by_key(|&u| (p.intersection(&compatible[u]).count(), std::cmp::Reverse(u)))
        .expect("P is non-empty");
    let mut candidates = p.clone();
    candidates.difference_with(&compatible[pivot]);
    for v in candidates.ones() {
        r.push(v);
        let mut p2 = p.clone();
        p2.intersect_with(&compatible[v]);
        let mut x2 = x.clone();
        x2.intersect_with(&compatible[v]);
        bron_kerbosch(compatible, r, p2, x2, cap, out, overflow);
        r.pop();
        if *overflow {
            return;
        }
        p.set(v, false);
        x.insert(v);
    }
}
