//! The branching decision engine: the distance function, the point sets
//! it carves out of the board `(i..n]×[0..d]`, and two independent
//! algorithms deciding whether a high weight vector of weight
//! `λ − d·α(i,n)` survives in the irreducible module.
//!
//! # Key operations
//! - `dist` — the λ-twisted distance between board points
//! - `sets` — the congruence-zero sets `Y`, `C×{0}`, `X` and the corner
//! - `decide_fast` — one strictly decreasing matching `Y → X`
//! - `decide_direct` — the antichain-by-antichain definition, plus a
//!   one-dimensional reformulation, asserted to agree
//! - `witness_m` — the image set `M = Im ψ` and inverse `φ` that feed
//!   the lowering-operator construction
//!
//! # Design notes
//! - Both decision paths are kept permanently. The fast path is the
//!   authoritative single matching; the direct path checks every
//!   antichain and is used by sweeps and the `--verify` flag.
//! - The fast path matches into all of `X` (which may contain the corner
//!   `(n,0)`); a strictly decreasing map must strictly drop the column
//!   and no source column exceeds `n`, so the corner never receives.
//!   Rather than trusting that argument, `decide_direct` is asserted
//!   equal on every instance the test sweeps touch.

use std::collections::BTreeMap;

use crate::planegeo::{
    enumerate_antichains, exists_strict_dec_inj, exists_weak_dec_inj, lt_strict, PointSet,
};
use crate::{Error, Point, Result, Weight};

/// Is `p` prime? Trial division; moduli here are tiny.
pub fn is_prime(p: u64) -> bool {
    if p < 2 {
        return false;
    }
    let mut k = 2;
    while k * k <= p {
        if p % k == 0 {
            return false;
        }
        k += 1;
    }
    true
}

/// Is the weight weakly decreasing?
pub fn is_dominant(lambda: &Weight) -> bool {
    lambda.windows(2).all(|w| w[0] >= w[1])
}

/// The λ-twisted distance
/// `dist_λ(x, y) = y₁ − x₁ + λ_{x₁} − λ_{y₁} + x₂ − y₂`
/// between points of `[1..n]×ℤ`. Additive along paths and zero on the
/// diagonal.
pub fn dist(lambda: &Weight, x: Point, y: Point) -> Result<i64> {
    let n = lambda.len() as i64;
    for col in [x.0, y.0] {
        if col < 1 || col > n {
            return Err(Error::ColumnOutOfRange { col, n });
        }
    }
    Ok(y.0 - x.0 + lambda[(x.0 - 1) as usize] - lambda[(y.0 - 1) as usize] + x.1 - y.1)
}

/// A validated problem instance: dominant `λ ∈ ℤⁿ`, prime `p`,
/// `1 ≤ i < n` and `1 ≤ d < p`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BranchingInstance {
    pub lambda: Weight,
    pub p: u64,
    pub i: i64,
    pub n: i64,
    pub d: i64,
}

impl BranchingInstance {
    pub fn new(lambda: Weight, p: u64, i: i64, n: i64, d: i64) -> Result<Self> {
        if n as usize != lambda.len() {
            return Err(Error::InvalidInstance(format!(
                "n = {n} but λ has {} entries",
                lambda.len()
            )));
        }
        if !(1 <= i && i < n) {
            return Err(Error::InvalidInstance(format!(
                "need 1 ≤ i < n, got i = {i}, n = {n}"
            )));
        }
        if !is_prime(p) {
            return Err(Error::InvalidInstance(format!("p = {p} is not prime")));
        }
        if !(1 <= d && (d as u64) < p) {
            return Err(Error::InvalidInstance(format!(
                "need 1 ≤ d < p, got d = {d}, p = {p}"
            )));
        }
        if !is_dominant(&lambda) {
            return Err(Error::InvalidInstance(format!(
                "λ = {lambda:?} is not weakly decreasing"
            )));
        }
        Ok(BranchingInstance { lambda, p, i, n, d })
    }
}

/// The congruence-zero sets of an instance.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InstanceSets {
    /// Sources: board points in rows `[1..d]` at distance `≡ 0 (mod p)`.
    pub y: PointSet,
    /// Targets: interior bottom-row points `(s, 0)` with `i < s < n`.
    pub c: PointSet,
    /// The full congruence-zero set on `(i..n]×[0..d]`.
    pub x: PointSet,
    /// The corner `{(n, 0)}` when its distance vanishes, else empty.
    pub frakx: PointSet,
}

/// Compute the sets `Y`, `C×{0}`, `X` and the corner. The disjoint
/// decomposition `X = Y ⊔ C ⊔ corner` is asserted, as is the fact that
/// `Y` has at most one point per column (forced by `d < p`).
pub fn sets(inst: &BranchingInstance) -> InstanceSets {
    let (i, n, d, p) = (inst.i, inst.n, inst.d, inst.p as i64);
    let base = (i, 0);
    let mut x = PointSet::new();
    for t in (i + 1)..=n {
        for h in 0..=d {
            let dd = dist(&inst.lambda, base, (t, h)).expect("columns validated");
            if dd.rem_euclid(p) == 0 {
                x.insert((t, h));
            }
        }
    }
    let y: PointSet = x.iter().copied().filter(|&(_, h)| h >= 1).collect();
    let c: PointSet = x
        .iter()
        .copied()
        .filter(|&(t, h)| h == 0 && t < n)
        .collect();
    let frakx: PointSet = x.iter().copied().filter(|&q| q == (n, 0)).collect();
    assert_eq!(
        x.len(),
        y.len() + c.len() + frakx.len(),
        "the three pieces partition X"
    );
    for t in (i + 1)..=n {
        assert!(
            y.iter().filter(|&&(s, _)| s == t).count() <= 1,
            "column {t} of Y has two points though d < p"
        );
    }
    InstanceSets { y, c, x, frakx }
}

/// Outcome of the single-matching decision.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FastDecision {
    pub holds: bool,
    /// The witnessing strictly decreasing injection `ψ: Y → X`.
    pub psi: Option<BTreeMap<Point, Point>>,
}

/// Decide by one strictly decreasing matching `Y → X`.
///
/// ```
/// use branchcrit::criterion::{decide_fast, BranchingInstance};
/// let inst = BranchingInstance::new(vec![1, 0, 0], 2, 1, 3, 1).unwrap();
/// assert!(decide_fast(&inst).holds);
/// let inst = BranchingInstance::new(vec![2, 0], 2, 1, 2, 1).unwrap();
/// assert!(!decide_fast(&inst).holds);
/// ```
pub fn decide_fast(inst: &BranchingInstance) -> FastDecision {
    let s = sets(inst);
    match exists_strict_dec_inj(&s.y, &s.x) {
        Some(psi) => FastDecision {
            holds: true,
            psi: Some(psi),
        },
        None => FastDecision {
            holds: false,
            psi: None,
        },
    }
}

/// Outcome of the antichain-by-antichain decision.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DirectDecision {
    pub holds: bool,
    pub antichains_checked: usize,
    /// An antichain admitting no strictly decreasing injection into the
    /// bottom row, when the decision is negative.
    pub blocker: Option<Vec<Point>>,
}

/// Decide by checking, for every ⋖̇-antichain `Δ ⊆ Y`, that a strictly
/// decreasing injection `Δ → C×{0}` exists. Each antichain is also
/// re-checked through the one-dimensional reformulation (a weakly
/// decreasing injection of `π₁(Δ) − 1` into the columns of `C`), and the
/// two answers are asserted to agree.
pub fn decide_direct(inst: &BranchingInstance) -> DirectDecision {
    let s = sets(inst);
    let c_cols: PointSet = s.c.iter().map(|&(t, _)| (t, 0)).collect();
    let antichains = enumerate_antichains(&s.y);
    let antichains_checked = antichains.len();
    for delta in antichains {
        let two_dim = exists_strict_dec_inj(&delta, &s.c).is_some();
        // every Δ-point sits in its own column and strictly above row 0,
        // so only the column coordinates matter
        let shifted: PointSet = delta.iter().map(|&(t, _)| (t - 1, 0)).collect();
        assert_eq!(shifted.len(), delta.len(), "one point per column");
        let one_dim = exists_weak_dec_inj(&shifted, &c_cols).is_some();
        assert_eq!(
            two_dim, one_dim,
            "one-dimensional reformulation disagrees on {delta:?}"
        );
        if !two_dim {
            return DirectDecision {
                holds: false,
                antichains_checked,
                blocker: Some(delta.into_iter().collect()),
            };
        }
    }
    DirectDecision {
        holds: true,
        antichains_checked,
        blocker: None,
    }
}

/// The witness data for a positive decision: the image `M = Im ψ` of the
/// matching and the inverse map `φ: M → Y`. `M` lies in `(i..n)×[0..d)`
/// with at most one point per column, and `φ` is strictly increasing.
pub fn witness_m(
    inst: &BranchingInstance,
) -> Result<(PointSet, BTreeMap<Point, Point>)> {
    let fast = decide_fast(inst);
    let Some(psi) = fast.psi else {
        let direct = decide_direct(inst);
        let blocker = direct.blocker.unwrap_or_default();
        return Err(Error::CriterionFails {
            antichain: blocker,
        });
    };
    let mut m = PointSet::new();
    let mut phi = BTreeMap::new();
    for (&src, &img) in &psi {
        m.insert(img);
        phi.insert(img, src);
        assert!(lt_strict(img, src), "ψ strictly decreasing");
        assert!(
            inst.i < img.0 && img.0 < inst.n && 0 <= img.1 && img.1 < inst.d,
            "M must lie in (i..n)×[0..d)"
        );
    }
    let mut cols = PointSet::new();
    for &(t, _) in &m {
        assert!(cols.insert((t, 0)), "M has two points in column {t}");
    }
    Ok((m, phi))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::planegeo::Stripe;
    use proptest::prelude::*;

    fn inst(lambda: &[i64], p: u64, i: i64, d: i64) -> BranchingInstance {
        BranchingInstance::new(lambda.to_vec(), p, i, lambda.len() as i64, d).unwrap()
    }

    // ---- dist ----

    #[test]
    fn test_dist_formula() {
        let lambda = vec![3, 1, 0];
        assert_eq!(dist(&lambda, (1, 0), (3, 2)).unwrap(), 3);
    }

    #[test]
    fn test_dist_rejects_bad_column() {
        let lambda = vec![3, 1, 0];
        assert_eq!(
            dist(&lambda, (0, 0), (1, 1)),
            Err(Error::ColumnOutOfRange { col: 0, n: 3 })
        );
        assert_eq!(
            dist(&lambda, (1, 0), (4, 1)),
            Err(Error::ColumnOutOfRange { col: 4, n: 3 })
        );
    }

    // ---- instance validation ----

    #[test]
    fn test_instance_rejects_d_not_below_p() {
        let e = BranchingInstance::new(vec![5, 0], 2, 1, 2, 2);
        assert!(matches!(e, Err(Error::InvalidInstance(_))));
        // the classic trap: d = p with λ₁ − λ₂ = 2p − 1 must error,
        // never report a decision
        let e = BranchingInstance::new(vec![3, 0], 2, 1, 2, 2);
        assert!(matches!(e, Err(Error::InvalidInstance(_))));
    }

    #[test]
    fn test_instance_rejects_junk() {
        assert!(BranchingInstance::new(vec![0, 1], 2, 1, 2, 1).is_err());
        assert!(BranchingInstance::new(vec![1, 0], 4, 1, 2, 1).is_err());
        assert!(BranchingInstance::new(vec![1, 0], 2, 2, 2, 1).is_err());
        assert!(BranchingInstance::new(vec![1, 0], 2, 1, 3, 1).is_err());
    }

    // ---- sets ----

    #[test]
    fn test_sets_example_n3() {
        let s = sets(&inst(&[1, 0, 0], 2, 1, 1));
        assert_eq!(s.y, [(3, 1)].into_iter().collect());
        assert_eq!(s.c, [(2, 0)].into_iter().collect());
        assert!(s.frakx.is_empty());
    }

    #[test]
    fn test_sets_example_n2() {
        let s = sets(&inst(&[2, 0], 2, 1, 1));
        assert_eq!(s.y, [(2, 1)].into_iter().collect());
        assert!(s.c.is_empty());
        assert!(s.frakx.is_empty());
    }

    #[test]
    fn test_sets_zero_weight() {
        // dist((1,0),(t,h)) = t − 1 − h here, so Y is the diagonal t = h + 1
        let s = sets(&inst(&[0, 0, 0], 3, 1, 1));
        assert_eq!(s.y, [(2, 1)].into_iter().collect());
    }

    // ---- decisions ----

    #[test]
    fn test_decide_positive_example() {
        let inst = inst(&[1, 0, 0], 2, 1, 1);
        assert!(decide_fast(&inst).holds);
        assert!(decide_direct(&inst).holds);
    }

    #[test]
    fn test_decide_negative_example() {
        let inst = inst(&[2, 0], 2, 1, 1);
        assert!(!decide_fast(&inst).holds);
        let direct = decide_direct(&inst);
        assert!(!direct.holds);
        assert_eq!(direct.blocker, Some(vec![(2, 1)]));
    }

    #[test]
    fn test_witness_example() {
        let inst = inst(&[1, 0, 0], 2, 1, 1);
        let (m, phi) = witness_m(&inst).unwrap();
        assert_eq!(m, [(2, 0)].into_iter().collect());
        assert_eq!(phi[&(2, 0)], (3, 1));
    }

    #[test]
    fn test_witness_failure_carries_blocker() {
        let inst = inst(&[2, 0], 2, 1, 1);
        assert_eq!(
            witness_m(&inst),
            Err(Error::CriterionFails {
                antichain: vec![(2, 1)]
            })
        );
    }

    #[test]
    fn test_base_case_matches_binomial() {
        // one-column instances: the decision is exactly whether
        // binomial(λ₁−λ₂, d) survives mod p
        fn binom_mod(top: i64, k: i64, p: u64) -> u64 {
            let mut acc = num_bigint::BigInt::from(1);
            for j in 0..k {
                acc *= top - j;
            }
            for j in 1..=k {
                acc /= j;
            }
            let m = num_bigint::BigInt::from(p);
            u64::try_from(((acc % &m) + &m) % &m).unwrap()
        }
        for p in [2u64, 3, 5] {
            for gap in 0..=(3 * p as i64) {
                for d in 1..(p as i64) {
                    let inst = inst(&[gap, 0], p, 1, d);
                    let expected = binom_mod(gap, d, p) != 0;
                    assert_eq!(
                        decide_fast(&inst).holds,
                        expected,
                        "p={p} gap={gap} d={d}"
                    );
                }
            }
        }
    }

    // ---- randomized laws ----

    fn arb_instance() -> impl Strategy<Value = BranchingInstance> {
        (2usize..=4, 0u8..=2)
            .prop_flat_map(|(n, pidx)| {
                let p = [2u64, 3, 5][pidx as usize];
                (
                    proptest::collection::vec(0i64..=6, n),
                    Just(p),
                    1i64..(n as i64),
                    1i64..(p as i64),
                )
            })
            .prop_map(|(mut lam, p, i, d)| {
                lam.sort_unstable_by(|a, b| b.cmp(a));
                let n = lam.len() as i64;
                BranchingInstance::new(lam, p, i, n, d).unwrap()
            })
    }

    proptest! {
        #[test]
        fn prop_dist_vanishes_on_diagonal(
            lam in proptest::collection::vec(-5i64..=5, 2..5),
            col in 1i64..=2,
            h in -3i64..=3,
        ) {
            prop_assert_eq!(dist(&lam, (col, h), (col, h)).unwrap(), 0);
        }

        #[test]
        fn prop_dist_additive(
            lam in proptest::collection::vec(-5i64..=5, 3..5),
            xs in proptest::collection::vec((1i64..=3, -3i64..=3), 3),
        ) {
            let (x, y, z) = (xs[0], xs[1], xs[2]);
            let xy = dist(&lam, x, y).unwrap();
            let yz = dist(&lam, y, z).unwrap();
            let xz = dist(&lam, x, z).unwrap();
            prop_assert_eq!(xy + yz, xz);
        }

        #[test]
        fn prop_fast_equals_direct(inst in arb_instance()) {
            prop_assert_eq!(decide_fast(&inst).holds, decide_direct(&inst).holds);
        }

        #[test]
        fn prop_decision_shift_invariant(inst in arb_instance(), c in -3i64..=3) {
            let shifted = BranchingInstance::new(
                inst.lambda.iter().map(|&x| x + c).collect(),
                inst.p, inst.i, inst.n, inst.d,
            ).unwrap();
            prop_assert_eq!(decide_fast(&inst).holds, decide_fast(&shifted).holds);
        }

        #[test]
        fn prop_witness_points_satisfy_congruence(inst in arb_instance()) {
            if let Ok((m, phi)) = witness_m(&inst) {
                let s = sets(&inst);
                for &x in m.iter().chain(s.y.iter()) {
                    let dd = dist(&inst.lambda, (inst.i, 0), x).unwrap();
                    prop_assert_eq!(dd.rem_euclid(inst.p as i64), 0);
                }
                for (&x, &y) in &phi {
                    prop_assert!(lt_strict(x, y));
                    prop_assert!(s.y.contains(&y));
                }
            }
        }

        #[test]
        fn prop_stripe_pairs_adjacent_and_divisible(
            lam in proptest::collection::vec(0i64..=8, 5),
            seed in any::<u64>(),
        ) {
            use rand::rngs::StdRng;
            use rand::{Rng, SeedableRng};
            let mut lam = lam;
            lam.sort_unstable_by(|a, b| b.cmp(a));
            let mut rng = StdRng::seed_from_u64(seed);
            // random stripe within columns [1..=4] so t+1 ≤ 5 stays legal
            let w = rng.gen_range(1..=4usize);
            let a = rng.gen_range(1..=(5 - w)) as i64;
            let b = a + w as i64 - 1;
            let mut f = vec![0i64; w];
            let mut l = vec![0i64; w];
            f[w - 1] = rng.gen_range(0..=2);
            l[w - 1] = f[w - 1] + rng.gen_range(0..=2);
            for s in (0..w.saturating_sub(1)).rev() {
                let lo = if s + 2 < w { f[s + 1].max(l[s + 2]) } else { f[s + 1] };
                f[s] = rng.gen_range(lo..=l[s + 1]);
                l[s] = l[s + 1] + rng.gen_range(0..=2);
            }
            let stripe = Stripe::new(a, b, f.clone(), l.clone());
            let members: Vec<Point> = (a..=b)
                .flat_map(|t| {
                    let s = (t - a) as usize;
                    (f[s]..=l[s]).map(move |h| (t, h))
                })
                .collect();
            for &x in &members {
                for &y in &members {
                    if lt_strict(x, y) {
                        prop_assert!(stripe.contains(x) && stripe.contains(y));
                        prop_assert_eq!(y.0, x.0 + 1, "comparable pair must be adjacent");
                        let t = x.0 as usize;
                        let gap = lam[t - 1] - lam[t];
                        let exp = l[(y.0 - a) as usize] - f[(x.0 - a) as usize];
                        let mut fall = 1i64;
                        for j in 0..exp {
                            fall *= gap - j;
                        }
                        let m = dist(&lam, x, y).unwrap();
                        if m == 0 {
                            prop_assert_eq!(fall, 0);
                        } else {
                            prop_assert_eq!(fall.rem_euclid(m.abs()), 0);
                        }
                    }
                }
            }
        }
    }
}
