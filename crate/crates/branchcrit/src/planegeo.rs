//! Order geometry of ℤ²: cones, snakes, antichains, decreasing
//! injections, the rectangle criterion, stripe avoidance maps and the
//! Σ/Ω diagrams.
//!
//! # Key operations
//! - `cone_members` / `snake_members` — cones and their boundaries,
//!   materialized against a finite universe
//! - `exists_weak_dec_inj` / `exists_strict_dec_inj` — injection
//!   existence via deterministic bipartite matching, with witnesses
//! - `enumerate_antichains` — all incomparable subsets of a finite set
//! - `rectangle_transfer` — both sides of the rectangle equivalence
//! - `phi_s` — the stripe avoidance injection
//! - `antichain_cover` — the multiset whose diagram boundary covers a
//!   given antichain
//!
//! # Design notes
//! - Cones are infinite; every operation takes a finite universe and
//!   returns members inside it.
//! - Matching is augmenting-path search with vertices visited in sorted
//!   (col, ht) order, so witnesses are deterministic.
//! - Brute-force and cone-counting reference implementations are public:
//!   they are the independent second route for every existence check and
//!   are kept permanently.

use std::collections::{BTreeMap, BTreeSet};

use crate::msets::Multiset;
use crate::{Error, Point, Result};

/// A finite set of points with deterministic (col, ht) iteration order.
pub type PointSet = BTreeSet<Point>;

/// Strict comparison `p ⋖̇ q`: both coordinates strictly increase.
pub fn lt_strict(p: Point, q: Point) -> bool {
    p.0 < q.0 && p.1 < q.1
}

/// Weak comparison `p ⋖̇≤ q`: both coordinates weakly increase.
pub fn le_weak(p: Point, q: Point) -> bool {
    p.0 <= q.0 && p.1 <= q.1
}

/// Translate a point set by `delta`.
pub fn shift(s: &PointSet, delta: Point) -> PointSet {
    s.iter().map(|&(x, y)| (x + delta.0, y + delta.1)).collect()
}

/// First strictly comparable pair in a set, if any.
pub fn comparable_pair(s: &PointSet) -> Option<(Point, Point)> {
    for &p in s {
        for &q in s {
            if lt_strict(p, q) {
                return Some((p, q));
            }
        }
    }
    None
}

/// `U ∩ cone(G)`: the members of the universe lying weakly below some
/// point of `G`.
pub fn cone_members(g: &PointSet, u: &PointSet) -> PointSet {
    u.iter()
        .copied()
        .filter(|&p| g.iter().any(|&q| le_weak(p, q)))
        .collect()
}

/// `U ∩ snake(G)`: the boundary of the cone of `G`, i.e.
/// `cone(G) ∖ cone(G − (1,1))`.
pub fn snake_members(g: &PointSet, u: &PointSet) -> PointSet {
    u.iter()
        .copied()
        .filter(|&p| {
            g.iter().any(|&q| le_weak(p, q))
                && !g.iter().any(|&q| le_weak(p, (q.0 - 1, q.1 - 1)))
        })
        .collect()
}

fn augment(
    a_idx: usize,
    adj: &[Vec<usize>],
    seen: &mut [bool],
    match_b: &mut [Option<usize>],
) -> bool {
    for &b in &adj[a_idx] {
        if !seen[b] {
            seen[b] = true;
            let free = match match_b[b] {
                None => true,
                Some(prev) => augment(prev, adj, seen, match_b),
            };
            if free {
                match_b[b] = Some(a_idx);
                return true;
            }
        }
    }
    false
}

fn matching_with_edges<F>(a: &PointSet, b: &PointSet, edge: F) -> Option<BTreeMap<Point, Point>>
where
    F: Fn(Point, Point) -> bool,
{
    let av: Vec<Point> = a.iter().copied().collect();
    let bv: Vec<Point> = b.iter().copied().collect();
    let adj: Vec<Vec<usize>> = av
        .iter()
        .map(|&x| {
            bv.iter()
                .enumerate()
                .filter(|&(_, &y)| edge(x, y))
                .map(|(j, _)| j)
                .collect()
        })
        .collect();
    let mut match_b: Vec<Option<usize>> = vec![None; bv.len()];
    for i in 0..av.len() {
        let mut seen = vec![false; bv.len()];
        if !augment(i, &adj, &mut seen, &mut match_b) {
            return None;
        }
    }
    let mut map = BTreeMap::new();
    for (j, owner) in match_b.iter().enumerate() {
        if let Some(i) = owner {
            map.insert(av[*i], bv[j]);
        }
    }
    Some(map)
}

/// Does a weakly decreasing injection `A → B` exist? Returns the witness
/// `ψ` with `ψ(x) ⋖̇≤ x` when it does.
pub fn exists_weak_dec_inj(a: &PointSet, b: &PointSet) -> Option<BTreeMap<Point, Point>> {
    matching_with_edges(a, b, |x, y| le_weak(y, x))
}

/// Does a strictly decreasing injection `A → B` exist? Equivalent to a
/// weakly decreasing injection into `B + (1,1)`.
///
/// ```
/// use branchcrit::planegeo::{exists_strict_dec_inj, PointSet};
/// let a: PointSet = [(3, 1)].into_iter().collect();
/// let b: PointSet = [(2, 0), (3, 0)].into_iter().collect();
/// let psi = exists_strict_dec_inj(&a, &b).unwrap();
/// assert_eq!(psi[&(3, 1)], (2, 0));
/// ```
pub fn exists_strict_dec_inj(a: &PointSet, b: &PointSet) -> Option<BTreeMap<Point, Point>> {
    matching_with_edges(a, b, |x, y| lt_strict(y, x))
}

/// Exhaustive reference: try all injections `A → B` with `ψ(x) ⋖̇≤ x`.
pub fn weak_dec_inj_brute(a: &PointSet, b: &PointSet) -> bool {
    dec_inj_brute(a, b, le_weak)
}

/// Exhaustive reference: try all injections `A → B` with `ψ(x) ⋖̇ x`.
pub fn strict_dec_inj_brute(a: &PointSet, b: &PointSet) -> bool {
    dec_inj_brute(a, b, lt_strict)
}

fn dec_inj_brute(a: &PointSet, b: &PointSet, below: fn(Point, Point) -> bool) -> bool {
    fn go(
        av: &[Point],
        bv: &[Point],
        used: &mut [bool],
        k: usize,
        below: fn(Point, Point) -> bool,
    ) -> bool {
        if k == av.len() {
            return true;
        }
        for j in 0..bv.len() {
            if !used[j] && below(bv[j], av[k]) {
                used[j] = true;
                if go(av, bv, used, k + 1, below) {
                    return true;
                }
                used[j] = false;
            }
        }
        false
    }
    let av: Vec<Point> = a.iter().copied().collect();
    let bv: Vec<Point> = b.iter().copied().collect();
    let mut used = vec![false; bv.len()];
    go(&av, &bv, &mut used, 0, below)
}

/// Cone-counting reference for the weak case: for every `S ⊆ A`,
/// `|cone(S) ∩ A| ≤ |cone(S) ∩ B|`.
pub fn weak_cone_condition(a: &PointSet, b: &PointSet) -> bool {
    subsets(a).into_iter().all(|s| {
        cone_members(&s, a).len() <= cone_members(&s, b).len()
    })
}

/// Cone-counting reference for the strict case: for every `Γ ⊆ A`,
/// `|cone(Γ) ∩ A| ≤ |cone(Γ − (1,1)) ∩ B|`.
pub fn strict_cone_condition(a: &PointSet, b: &PointSet) -> bool {
    subsets(a).into_iter().all(|s| {
        cone_members(&s, a).len() <= cone_members(&shift(&s, (-1, -1)), b).len()
    })
}

fn subsets(s: &PointSet) -> Vec<PointSet> {
    let v: Vec<Point> = s.iter().copied().collect();
    let mut out = vec![PointSet::new()];
    for &p in &v {
        let mut more: Vec<PointSet> = out
            .iter()
            .map(|t| {
                let mut t = t.clone();
                t.insert(p);
                t
            })
            .collect();
        out.append(&mut more);
    }
    out
}

/// All subsets of `Y` whose points are pairwise ⋖̇-incomparable, in a
/// deterministic order (extension order over the sorted elements).
pub fn enumerate_antichains(y: &PointSet) -> Vec<PointSet> {
    let v: Vec<Point> = y.iter().copied().collect();
    let mut out = Vec::new();
    let mut chosen: Vec<Point> = Vec::new();
    fn go(v: &[Point], k: usize, chosen: &mut Vec<Point>, out: &mut Vec<PointSet>) {
        if k == v.len() {
            out.push(chosen.iter().copied().collect());
            return;
        }
        // exclude v[k]
        go(v, k + 1, chosen, out);
        // include v[k] when still incomparable
        let p = v[k];
        if chosen
            .iter()
            .all(|&q| !lt_strict(p, q) && !lt_strict(q, p))
        {
            chosen.push(p);
            go(v, k + 1, chosen, out);
            chosen.pop();
        }
    }
    go(&v, 0, &mut chosen, &mut out);
    out.sort();
    out.dedup();
    out
}

/// The two sides of the rectangle equivalence, which must agree.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RectangleReport {
    /// A strictly decreasing injection `Y → X` exists, where `Y` is the
    /// part of `X` above the bottom row.
    pub injection_exists: bool,
    /// Every ⋖̇-antichain of `Y` admits a strictly decreasing injection
    /// into the bottom row `X ∩ ([a..b]×{c})`.
    pub antichains_embed: bool,
}

/// Evaluate both sides of the rectangle equivalence for
/// `X ⊆ [a..b]×[c..d]`.
pub fn rectangle_transfer(
    x: &PointSet,
    a: i64,
    b: i64,
    c: i64,
    d: i64,
) -> Result<RectangleReport> {
    for &p in x {
        if !(a <= p.0 && p.0 <= b && c <= p.1 && p.1 <= d) {
            return Err(Error::BadRectangle(format!(
                "point {p:?} outside [{a}..{b}]x[{c}..{d}]"
            )));
        }
    }
    let y: PointSet = x.iter().copied().filter(|&p| p.1 > c).collect();
    let bottom: PointSet = x.iter().copied().filter(|&p| p.1 == c).collect();
    let injection_exists = exists_strict_dec_inj(&y, x).is_some();
    let antichains_embed = enumerate_antichains(&y)
        .into_iter()
        .all(|delta| exists_strict_dec_inj(&delta, &bottom).is_some());
    Ok(RectangleReport {
        injection_exists,
        antichains_embed,
    })
}

/// A stripe: for each column `s` in `[a..b]`, the segment `[f_s..l_s]`,
/// subject to `f_{s+1} ≤ f_s ≤ l_{s+1} ≤ l_s` and `f_s ≥ l_{s+2}`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Stripe {
    pub a: i64,
    pub b: i64,
    /// `f[s − a]` is the lowest row of column `s`.
    pub f: Vec<i64>,
    /// `l[s − a]` is the highest row of column `s`.
    pub l: Vec<i64>,
}

impl Stripe {
    pub fn new(a: i64, b: i64, f: Vec<i64>, l: Vec<i64>) -> Self {
        let width = usize::try_from(b - a + 1).expect("stripe has at least one column");
        assert_eq!(f.len(), width, "one lower bound per column");
        assert_eq!(l.len(), width, "one upper bound per column");
        for s in 0..width {
            assert!(f[s] <= l[s], "column {s} of the stripe is empty");
            if s + 1 < width {
                assert!(
                    f[s + 1] <= f[s] && f[s] <= l[s + 1] && l[s + 1] <= l[s],
                    "stripe chain condition fails between columns {s} and {}",
                    s + 1
                );
            }
            if s + 2 < width {
                assert!(f[s] >= l[s + 2], "stripe two-step condition fails at {s}");
            }
        }
        Stripe { a, b, f, l }
    }

    pub fn contains(&self, p: Point) -> bool {
        if p.0 < self.a || p.0 > self.b {
            return false;
        }
        let s = (p.0 - self.a) as usize;
        self.f[s] <= p.1 && p.1 <= self.l[s]
    }

    /// Is `p` below the stripe (inside the strip of columns)?
    pub fn is_below(&self, p: Point) -> bool {
        assert!(self.a <= p.0 && p.0 <= self.b, "point outside the strip");
        p.1 < self.f[(p.0 - self.a) as usize]
    }
}

/// The stripe avoidance injection: given `M ⊆ X ⊆ [a..b]×ℤ`, a strictly
/// increasing injection `φ: M → X`, and a stripe whose intersection with
/// `X` is an antichain, produce an injection `M → X ∖ S` fixing the
/// points below the stripe and following `φ` elsewhere. Each value is
/// strictly above its argument or equal to it (the latter only below
/// the stripe).
pub fn phi_s(
    m: &PointSet,
    x: &PointSet,
    phi: &BTreeMap<Point, Point>,
    s: &Stripe,
) -> Result<BTreeMap<Point, Point>> {
    for &p in x {
        assert!(s.a <= p.0 && p.0 <= s.b, "X leaves the stripe's strip");
    }
    assert!(m.is_subset(x), "M must lie inside X");
    let mut values = BTreeSet::new();
    for &p in m {
        let q = *phi.get(&p).expect("phi defined on all of M");
        assert!(x.contains(&q), "phi maps into X");
        assert!(lt_strict(p, q), "phi strictly increasing");
        assert!(values.insert(q), "phi injective");
    }
    let x_in_s: PointSet = x.iter().copied().filter(|&p| s.contains(p)).collect();
    if let Some((p, q)) = comparable_pair(&x_in_s) {
        return Err(Error::ComparablePairInStripe { a: p, b: q });
    }
    let mut out = BTreeMap::new();
    for &p in m {
        let image = if s.is_below(p) { p } else { phi[&p] };
        out.insert(p, image);
    }
    // the construction guarantees an injection into X ∖ S
    let mut seen = BTreeSet::new();
    for (&p, &q) in &out {
        debug_assert!(!s.contains(q), "value {q:?} landed in the stripe");
        debug_assert!(seen.insert(q), "collision at {q:?}");
        debug_assert!(lt_strict(p, q) || (p == q && s.is_below(p)));
    }
    Ok(out)
}

/// A diagram: the staircase region `Σ^{(d)}_{k,j}(I)` and its interior
/// `Ω^{(d)}_{k,j}(I)` determined by a multiset `I`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Diagram {
    pub k: i64,
    pub j: i64,
    pub d: i64,
    pub entries: Multiset,
}

impl Diagram {
    pub fn new(k: i64, j: i64, d: i64, entries: Multiset) -> Self {
        assert!(k < j, "diagram needs k < j");
        assert!(d >= 0, "diagram needs d ≥ 0");
        Diagram { k, j, d, entries }
    }

    /// `Σ`: points `(t,h)` with `k < t ≤ j` and
    /// `0 ≤ h ≤ d − |I|^{(−∞..t−1]}`.
    pub fn sigma_members(&self) -> PointSet {
        let mut out = PointSet::new();
        for t in (self.k + 1)..=self.j {
            let cap = self.d - self.entries.count_le(t - 1) as i64;
            for h in 0..=cap {
                out.insert((t, h));
            }
        }
        out
    }

    /// `Ω`: points `(t,h)` with `k < t < j` and
    /// `0 ≤ h < d − |I|^{(−∞..t]}`.
    pub fn omega_members(&self) -> PointSet {
        let mut out = PointSet::new();
        for t in (self.k + 1)..self.j {
            let cap = self.d - self.entries.count_le(t) as i64;
            for h in 0..cap {
                out.insert((t, h));
            }
        }
        out
    }

    /// The boundary `Σ ∖ Ω`.
    pub fn boundary_members(&self) -> PointSet {
        self.sigma_members()
            .difference(&self.omega_members())
            .copied()
            .collect()
    }
}

/// Build the multiset `I` whose diagram boundary contains the antichain
/// `G ⊆ (i..n]×[0..d]`: column maxima of `G` off column `n` give the
/// drop heights, column `n` (or zero) gives the final height.
pub fn antichain_cover(g: &PointSet, d: i64, i: i64, n: i64) -> Result<Multiset> {
    for &p in g {
        assert!(
            i < p.0 && p.0 <= n && 0 <= p.1 && p.1 <= d,
            "point {p:?} outside (i..n]x[0..d]"
        );
    }
    if let Some((p, q)) = comparable_pair(g) {
        return Err(Error::NotAntichain { a: p, b: q });
    }
    let mut col_max: BTreeMap<i64, i64> = BTreeMap::new();
    for &(t, h) in g {
        if t < n {
            let e = col_max.entry(t).or_insert(h);
            *e = (*e).max(h);
        }
    }
    let last_h = g
        .iter()
        .filter(|&&(t, _)| t == n)
        .map(|&(_, h)| h)
        .max()
        .unwrap_or(0);
    // heights h_1 ≥ h_2 ≥ ... ≥ h_{k+1} along the columns t_1 < ... < t_k, n
    let cols: Vec<i64> = col_max.keys().copied().collect();
    let mut heights: Vec<i64> = cols.iter().map(|t| col_max[t]).collect();
    heights.push(last_h);
    let first_h = heights[0];
    let mut out = Multiset::copies(i, (d - first_h) as usize);
    for (idx, &t) in cols.iter().enumerate() {
        let drop = heights[idx] - heights[idx + 1];
        out = out.union(&Multiset::copies(t, drop as usize));
    }
    debug_assert!(out.len() as i64 <= d);
    Ok(out)
}
