//! Disjoint orbital partitions shared by the decomposition methods.

use crate::error::{Error, Result};

/// Ordered list of disjoint, non-empty orbital sets covering `0..n_orb`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FragmentSpec {
    fragments: Vec<Vec<usize>>,
    n_orb: usize,
}

impl FragmentSpec {
    pub fn new(n_orb: usize, fragments: Vec<Vec<usize>>) -> Result<Self> {
        if fragments.is_empty() {
            return Err(Error::InvalidInput("no fragments given".into()));
        }
        let mut owner = vec![None; n_orb];
        for (i, frag) in fragments.iter().enumerate() {
            if frag.is_empty() {
                return Err(Error::InvalidInput(format!("fragment {i} is empty")));
            }
            for &p in frag {
                if p >= n_orb {
                    return Err(Error::InvalidInput(format!(
                        "fragment {i} names orbital {p}, but only {n_orb} exist"
                    )));
                }
                if let Some(j) = owner[p] {
                    return Err(Error::InvalidInput(format!(
                        "orbital {p} appears in fragments {j} and {i}"
                    )));
                }
                owner[p] = Some(i);
            }
        }
        if let Some(p) = owner.iter().position(Option::is_none) {
            return Err(Error::InvalidInput(format!("orbital {p} is in no fragment")));
        }
        Ok(FragmentSpec { fragments, n_orb })
    }

    /// One fragment holding every orbital.
    pub fn whole(n_orb: usize) -> Result<Self> {
        Self::new(n_orb, vec![(0..n_orb).collect()])
    }

    /// Consecutive blocks of `size` orbitals; the last block may be shorter.
    pub fn contiguous(n_orb: usize, size: usize) -> Result<Self> {
        if size == 0 {
            return Err(Error::InvalidInput("fragment size must be positive".into()));
        }
        let fragments = (0..n_orb)
            .step_by(size)
            .map(|start| (start..(start + size).min(n_orb)).collect())
            .collect();
        Self::new(n_orb, fragments)
    }

    pub fn fragments(&self) -> &[Vec<usize>] {
        &self.fragments
    }

    pub fn len(&self) -> usize {
        self.fragments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fragments.is_empty()
    }

    pub fn n_orb(&self) -> usize {
        self.n_orb
    }
}
