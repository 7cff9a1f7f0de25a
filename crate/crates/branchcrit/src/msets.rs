//! Multisets with integer entries and the four cut operators.
//!
//! # Key operations
//! - `count_in` — interval counts `|I|^S` with open/closed/infinite bounds
//! - `replace_one` — `I_{x↦y}`, replacing exactly one occurrence
//! - `cut_l` / `cut_r` — clamp down to `m−1` / keep entries `≥ m−1`
//! - `cut_lup` / `cut_rup` — keep entries `≤ m−1` / clamp up to `m−1`
//!
//! # Design notes
//! - Canonical form is a weakly increasing sequence, so multiset equality
//!   is plain sequence equality. Sizes stay tiny (at most `d < p`), so a
//!   sorted vector beats a counter map on clarity and speed alike.
//! - `replace_one` removes the first occurrence in canonical order and
//!   re-sorts; which occurrence is removed is unobservable.

use std::fmt;
use std::str::FromStr;

use crate::{Error, Result};

/// A finite multiset of integers, stored weakly increasing.
///
/// ```
/// use branchcrit::msets::Multiset;
/// let j = Multiset::from_entries(vec![0, 1, 2]);
/// assert_eq!(j.cut_l(2).to_string(), "⟨0,1,1⟩");
/// assert_eq!(j.cut_r(2).to_string(), "⟨1,2⟩");
/// ```
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Multiset(Vec<i64>);

impl Multiset {
    /// The empty multiset `⟨⟩`.
    pub fn new() -> Self {
        Multiset(Vec::new())
    }

    /// Build from any entries; sorts into canonical form.
    pub fn from_entries(entries: impl IntoIterator<Item = i64>) -> Self {
        let mut v: Vec<i64> = entries.into_iter().collect();
        v.sort_unstable();
        Multiset(v)
    }

    /// The multiset `⟨x^k⟩` of `k` copies of `x`.
    pub fn copies(x: i64, k: usize) -> Self {
        Multiset(vec![x; k])
    }

    /// Total number of entries counted with multiplicity.
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn entries(&self) -> impl Iterator<Item = i64> + '_ {
        self.0.iter().copied()
    }

    pub fn contains(&self, x: i64) -> bool {
        self.0.binary_search(&x).is_ok()
    }

    pub fn min(&self) -> Option<i64> {
        self.0.first().copied()
    }

    pub fn max(&self) -> Option<i64> {
        self.0.last().copied()
    }

    /// `|I|^S` for the interval S given by the bounds; `None` means the
    /// bound is infinite. `lo_open`/`hi_open` exclude the endpoint.
    pub fn count_in(
        &self,
        lo: Option<i64>,
        hi: Option<i64>,
        lo_open: bool,
        hi_open: bool,
    ) -> usize {
        let start = match lo {
            None => 0,
            Some(b) => {
                let b = if lo_open { b.saturating_add(1) } else { b };
                self.0.partition_point(|&e| e < b)
            }
        };
        let end = match hi {
            None => self.0.len(),
            Some(b) => {
                let b = if hi_open { b.saturating_sub(1) } else { b };
                self.0.partition_point(|&e| e <= b)
            }
        };
        end.saturating_sub(start)
    }

    /// `|I|^{(−∞..t)}`
    pub fn count_lt(&self, t: i64) -> usize {
        self.count_in(None, Some(t), false, true)
    }

    /// `|I|^{(−∞..t]}`
    pub fn count_le(&self, t: i64) -> usize {
        self.count_in(None, Some(t), false, false)
    }

    /// `|I|^{{t}}`
    pub fn count_eq(&self, t: i64) -> usize {
        self.count_in(Some(t), Some(t), false, false)
    }

    /// `|I|^{[t..+∞)}`
    pub fn count_ge(&self, t: i64) -> usize {
        self.count_in(Some(t), None, false, false)
    }

    /// `|I|^{(t..+∞)}`
    pub fn count_gt(&self, t: i64) -> usize {
        self.count_in(Some(t), None, true, false)
    }

    /// `I_{x↦y}`: replace exactly one occurrence of `x` by `y`.
    pub fn replace_one(&self, x: i64, y: i64) -> Result<Multiset> {
        match self.0.binary_search(&x) {
            Err(_) => Err(Error::AbsentEntry { entry: x }),
            Ok(pos) => {
                let mut v = self.0.clone();
                v[pos] = y;
                v.sort_unstable();
                Ok(Multiset(v))
            }
        }
    }

    /// Multiset union: concatenation of entries.
    pub fn union(&self, other: &Multiset) -> Multiset {
        let mut v = self.0.clone();
        v.extend_from_slice(&other.0);
        v.sort_unstable();
        Multiset(v)
    }

    /// `I ∪ ⟨x⟩`.
    pub fn adjoin(&self, x: i64) -> Multiset {
        let pos = self.0.partition_point(|&e| e <= x);
        let mut v = self.0.clone();
        v.insert(pos, x);
        Multiset(v)
    }

    /// `ℒ_m`: clamp every entry down to at most `m−1`.
    pub fn cut_l(&self, m: i64) -> Multiset {
        Multiset::from_entries(self.0.iter().map(|&j| j.min(m - 1)))
    }

    /// `ℛ_m`: keep the entries that are `≥ m−1`.
    pub fn cut_r(&self, m: i64) -> Multiset {
        Multiset(self.0.iter().copied().filter(|&j| j >= m - 1).collect())
    }

    /// `ℒ^m`: keep the entries that are `≤ m−1`.
    pub fn cut_lup(&self, m: i64) -> Multiset {
        Multiset(self.0.iter().copied().filter(|&j| j <= m - 1).collect())
    }

    /// `ℛ^m`: clamp every entry up to at least `m−1`.
    pub fn cut_rup(&self, m: i64) -> Multiset {
        Multiset::from_entries(self.0.iter().map(|&j| j.max(m - 1)))
    }
}

impl FromIterator<i64> for Multiset {
    fn from_iter<T: IntoIterator<Item = i64>>(iter: T) -> Self {
        Multiset::from_entries(iter)
    }
}

impl fmt::Display for Multiset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "⟨")?;
        for (k, e) in self.0.iter().enumerate() {
            if k > 0 {
                write!(f, ",")?;
            }
            write!(f, "{e}")?;
        }
        write!(f, "⟩")
    }
}

impl FromStr for Multiset {
    type Err = std::num::ParseIntError;

    /// Parses comma-separated integers, with optional `⟨⟩` or `<>`
    /// wrapping; the empty string is the empty multiset.
    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        let s = s
            .trim()
            .trim_start_matches(['⟨', '<'])
            .trim_end_matches(['⟩', '>'])
            .trim();
        if s.is_empty() {
            return Ok(Multiset::new());
        }
        s.split(',')
            .map(|part| part.trim().parse::<i64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map(Multiset::from_entries)
    }
}
