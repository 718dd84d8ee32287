use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::FockError;

/// Exchange statistics of the particles occupying the modes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Statistics {
    Boson,
    Fermion,
}

/// Which occupation vectors a basis contains.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sector {
    /// Fixed total particle number.
    Fixed(usize),
    /// Union of fixed-total sectors.
    Totals(Vec<usize>),
    /// All occupations up to a per-mode cutoff.
    Cutoff(usize),
}

enum Index {
    /// Combinatorial rank for fixed-total sectors; `counts[m][n]` is the
    /// number of states of `n` particles on `m` modes.
    Ranked {
        counts: Vec<Vec<u64>>,
        total: usize,
    },
    Hashed(HashMap<Box<[u8]>, usize>),
}

/// Enumerated occupation-number basis.
///
/// States are stored in descending lexicographic order of their occupation
/// vectors, so `(2,0), (1,1), (0,2)` for two bosons on two modes.
pub struct FockBasis {
    statistics: Statistics,
    num_modes: usize,
    sector: Sector,
    occupations: Vec<u8>,
    index: Index,
}

impl fmt::Debug for FockBasis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FockBasis")
            .field("statistics", &self.statistics)
            .field("num_modes", &self.num_modes)
            .field("sector", &self.sector)
            .field("dim", &self.dim())
            .finish()
    }
}

impl PartialEq for FockBasis {
    fn eq(&self, other: &Self) -> bool {
        self.statistics == other.statistics && self.num_modes == other.num_modes && self.sector == other.sector
    }
}

impl Eq for FockBasis {}

fn binomial(n: usize, k: usize) -> u64 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
    }
    acc as u64
}

/// Number of occupation vectors of `n` particles on `m` modes.
pub fn sector_dimension(statistics: Statistics, m: usize, n: usize) -> u64 {
    match statistics {
        Statistics::Boson => {
            if m == 0 {
                u64::from(n == 0)
            } else {
                binomial(n + m - 1, n)
            }
        }
        Statistics::Fermion => binomial(m, n),
    }
}

impl FockBasis {
    /// Enumerates the basis for `num_modes` modes restricted to `sector`.
    pub fn new(statistics: Statistics, num_modes: usize, sector: Sector) -> Result<Self, FockError> {
        if num_modes == 0 {
            return Err(FockError::InfeasibleSector("a basis needs at least one mode".into()));
        }
        let cap = |limit: usize| match statistics {
            Statistics::Boson => limit,
            Statistics::Fermion => limit.min(1),
        };
        let mut occupations = Vec::new();
        let mut scratch = vec![0u8; num_modes];
        let index = match &sector {
            Sector::Fixed(n) => {
                let n = *n;
                if statistics == Statistics::Fermion && n > num_modes {
                    return Err(FockError::InfeasibleSector(format!(
                        "{n} fermions do not fit on {num_modes} modes"
                    )));
                }
                if n > u8::MAX as usize {
                    return Err(FockError::OccupationOverflow(n));
                }
                enumerate_fixed(num_modes, n, cap(n), 0, &mut scratch, &mut occupations);
                let counts = (0..=num_modes)
                    .map(|m| (0..=n).map(|k| sector_dimension(statistics, m, k)).collect())
                    .collect();
                Index::Ranked { counts, total: n }
            }
            Sector::Totals(totals) => {
                let mut allowed: Vec<usize> = totals
                    .iter()
                    .copied()
                    .filter(|&n| statistics == Statistics::Boson || n <= num_modes)
                    .collect();
                allowed.sort_unstable();
                allowed.dedup();
                let Some(&max) = allowed.last() else {
                    return Err(FockError::InfeasibleSector(format!(
                        "no feasible total among {totals:?} on {num_modes} modes"
                    )));
                };
                if max > u8::MAX as usize {
                    return Err(FockError::OccupationOverflow(max));
                }
                enumerate_totals(num_modes, cap(max), max, &allowed, 0, 0, &mut scratch, &mut occupations);
                Index::Hashed(HashMap::new())
            }
            Sector::Cutoff(n_max) => {
                if *n_max > u8::MAX as usize {
                    return Err(FockError::OccupationOverflow(*n_max));
                }
                let states = (cap(*n_max) as u128 + 1).checked_pow(num_modes as u32);
                if states.is_none_or(|s| s > 50_000_000) {
                    return Err(FockError::InfeasibleSector(format!(
                        "cutoff {n_max} on {num_modes} modes is too large to enumerate"
                    )));
                }
                enumerate_cutoff(num_modes, cap(*n_max), 0, &mut scratch, &mut occupations);
                Index::Hashed(HashMap::new())
            }
        };
        let mut basis = Self {
            statistics,
            num_modes,
            sector,
            occupations,
            index,
        };
        if let Index::Hashed(map) = &mut basis.index {
            let dim = basis.occupations.len() / num_modes;
            map.reserve(dim);
            for i in 0..dim {
                let key: Box<[u8]> = basis.occupations[i * num_modes..(i + 1) * num_modes].into();
                map.insert(key, i);
            }
        }
        Ok(basis)
    }

    pub fn statistics(&self) -> Statistics {
        self.statistics
    }

    pub fn num_modes(&self) -> usize {
        self.num_modes
    }

    pub fn sector(&self) -> &Sector {
        &self.sector
    }

    pub fn dim(&self) -> usize {
        self.occupations.len() / self.num_modes
    }

    /// Total particle number when the sector fixes it.
    pub fn fixed_total(&self) -> Option<usize> {
        match self.sector {
            Sector::Fixed(n) => Some(n),
            _ => None,
        }
    }

    /// Largest occupation any single mode can hold in this basis.
    pub fn max_occupation(&self) -> usize {
        let raw = match &self.sector {
            Sector::Fixed(n) => *n,
            Sector::Totals(t) => t.iter().copied().max().unwrap_or(0),
            Sector::Cutoff(c) => *c,
        };
        match self.statistics {
            Statistics::Boson => raw,
            Statistics::Fermion => raw.min(1),
        }
    }

    /// Occupation vector of state `i`.
    #[inline]
    pub fn state(&self, i: usize) -> &[u8] {
        &self.occupations[i * self.num_modes..(i + 1) * self.num_modes]
    }

    pub fn states(&self) -> impl ExactSizeIterator<Item = &[u8]> + '_ {
        self.occupations.chunks_exact(self.num_modes)
    }

    /// Total particle number of state `i`.
    pub fn total(&self, i: usize) -> usize {
        self.state(i).iter().map(|&n| n as usize).sum()
    }

    /// Ordinal of an occupation vector, if it belongs to the basis.
    pub fn index_of(&self, occ: &[u8]) -> Option<usize> {
        if occ.len() != self.num_modes {
            return None;
        }
        match &self.index {
            Index::Hashed(map) => map.get(occ).copied(),
            Index::Ranked { counts, total } => {
                let cap = self.max_occupation();
                let mut rem = *total;
                let mut rank = 0u64;
                for (i, &o) in occ.iter().enumerate() {
                    let o = o as usize;
                    if o > rem || o > cap {
                        return None;
                    }
                    let after = self.num_modes - i - 1;
                    for k in (o + 1)..=rem.min(cap) {
                        rank += counts[after][rem - k];
                    }
                    rem -= o;
                }
                (rem == 0).then_some(rank as usize)
            }
        }
    }
}

fn enumerate_fixed(modes: usize, rem: usize, cap: usize, pos: usize, scratch: &mut [u8], out: &mut Vec<u8>) {
    if pos + 1 == modes {
        if rem <= cap {
            scratch[pos] = rem as u8;
            out.extend_from_slice(scratch);
        }
        return;
    }
    for k in (0..=rem.min(cap)).rev() {
        scratch[pos] = k as u8;
        enumerate_fixed(modes, rem - k, cap, pos + 1, scratch, out);
    }
}

#[allow(clippy::too_many_arguments)]
fn enumerate_totals(
    modes: usize,
    cap: usize,
    max: usize,
    allowed: &[usize],
    pos: usize,
    used: usize,
    scratch: &mut [u8],
    out: &mut Vec<u8>,
) {
    if pos == modes {
        if allowed.binary_search(&used).is_ok() {
            out.extend_from_slice(scratch);
        }
        return;
    }
    for k in (0..=cap.min(max - used)).rev() {
        scratch[pos] = k as u8;
        enumerate_totals(modes, cap, max, allowed, pos + 1, used + k, scratch, out);
    }
}

fn enumerate_cutoff(modes: usize, cap: usize, pos: usize, scratch: &mut [u8], out: &mut Vec<u8>) {
    if pos == modes {
        out.extend_from_slice(scratch);
        return;
    }
    for k in (0..=cap).rev() {
        scratch[pos] = k as u8;
        enumerate_cutoff(modes, cap, pos + 1, scratch, out);
    }
}
