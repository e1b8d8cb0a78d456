//! Two-block partitions of the variable set `{1..d}`.
//!
//! Indices are 1-based in the public type, matching how variables are named
//! in reports (`{1,2}|{3,4}`). Canonical form pins variable 1 into `b1`, which
//! removes mirror duplicates.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Bipartition {
    b1: Vec<usize>,
    b2: Vec<usize>,
    d: usize,
}

impl Bipartition {
    /// Builds a canonical bipartition from one block (1-based indices); the
    /// other block is the complement. Blocks are swapped if needed so that
    /// variable 1 lands in `b1`.
    pub fn from_block(d: usize, block: &[usize]) -> Result<Self> {
        if d < 2 {
            return Err(invalid(format!("bipartitions need d >= 2, got {d}")));
        }
        let mut in_block = vec![false; d + 1];
        for &i in block {
            if i == 0 || i > d {
                return Err(invalid(format!("variable index {i} outside 1..={d}")));
            }
            if in_block[i] {
                return Err(invalid(format!("variable index {i} repeated")));
            }
            in_block[i] = true;
        }
        let mut b1: Vec<usize> = (1..=d).filter(|&i| in_block[i]).collect();
        let mut b2: Vec<usize> = (1..=d).filter(|&i| !in_block[i]).collect();
        if b1.is_empty() || b2.is_empty() {
            return Err(invalid("both blocks of a bipartition must be nonempty"));
        }
        if !in_block[1] {
            std::mem::swap(&mut b1, &mut b2);
        }
        Ok(Self { b1, b2, d })
    }

    pub fn b1(&self) -> &[usize] {
        &self.b1
    }

    pub fn b2(&self) -> &[usize] {
        &self.b2
    }

    pub fn d(&self) -> usize {
        self.d
    }

    /// The isolated variable, if either block is a singleton.
    pub fn singleton(&self) -> Option<usize> {
        if self.b1.len() == 1 {
            Some(self.b1[0])
        } else if self.b2.len() == 1 {
            Some(self.b2[0])
        } else {
            None
        }
    }

    pub fn has_singleton(&self) -> bool {
        self.singleton().is_some()
    }

    /// Zero-based copies of both blocks.
    pub fn zero_based(&self) -> (Vec<usize>, Vec<usize>) {
        (
            self.b1.iter().map(|i| i - 1).collect(),
            self.b2.iter().map(|i| i - 1).collect(),
        )
    }
}

impl fmt::Display for Bipartition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let join = |b: &[usize]| {
            b.iter()
                .map(usize::to_string)
                .collect::<Vec<_>>()
                .join(",")
        };
        // Singleton bipartitions read as `{m}|rest`; the stored form is unchanged.
        let (first, second) = if self.b2.len() == 1 && self.b1.len() > 1 {
            (&self.b2, &self.b1)
        } else {
            (&self.b1, &self.b2)
        };
        write!(f, "{{{}}}|{{{}}}", join(first), join(second))
    }
}

/// The `d` bipartitions `{m} | rest`, ordered by `m`. For `d = 2` the single
/// bipartition `{1}|{2}` is returned once.
pub fn singleton_bipartitions(d: usize) -> Result<Vec<Bipartition>> {
    if d < 2 {
        return Err(invalid(format!("singleton bipartitions need d >= 2, got {d}")));
    }
    if d == 2 {
        return Ok(vec![Bipartition::from_block(2, &[1])?]);
    }
    (1..=d).map(|m| Bipartition::from_block(d, &[m])).collect()
}

/// All canonical bipartitions whose blocks both have at least two elements,
/// ordered by `(|b1|, b1)` lexicographically. Empty for `d < 4`.
pub fn nonsingleton_bipartitions(d: usize) -> Vec<Bipartition> {
    if d < 4 {
        return Vec::new();
    }
    let mut out = Vec::with_capacity((1usize << (d - 1)) - 1 - d);
    // Every canonical b1 is {1} plus a subset of {2..d}; enumerate those subsets
    // by size, then lexicographically.
    for extra in 1..=d - 3 {
        for combo in combinations(2..=d, extra) {
            let mut b1 = vec![1];
            b1.extend(combo);
            if d - b1.len() >= 2 {
                out.push(Bipartition::from_block(d, &b1).expect("valid by construction"));
            }
        }
    }
    out
}

/// Every canonical bipartition: singletons first, then non-singletons.
pub fn all_bipartitions(d: usize) -> Result<Vec<Bipartition>> {
    let mut all = singleton_bipartitions(d)?;
    all.extend(nonsingleton_bipartitions(d));
    Ok(all)
}

/// `k`-element subsets of `items` in lexicographic order.
pub fn combinations(items: impl IntoIterator<Item = usize>, k: usize) -> Vec<Vec<usize>> {
    let items: Vec<usize> = items.into_iter().collect();
    let n = items.len();
    let mut out = Vec::new();
    if k > n {
        return out;
    }
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        out.push(idx.iter().map(|&i| items[i]).collect());
        // Advance the rightmost index that still has room.
        let mut pos = k;
        while pos > 0 && idx[pos - 1] == n - k + pos - 1 {
            pos -= 1;
        }
        if pos == 0 {
            return out;
        }
        idx[pos - 1] += 1;
        for q in pos..k {
            idx[q] = idx[q - 1] + 1;
        }
    }
}
