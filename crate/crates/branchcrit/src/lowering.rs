//! Deformed lowering operators: block expressions in the negative half of
//! the divided-power algebra, their closed raising rules, a formal layer
//! of commuting block symbols with cutting and raising endomorphisms, and
//! the coefficient homomorphisms that extract scalar parts.
//!
//! The central datum is a chain `i = m₀ < m₁ < … < m_{k+1} = n` together
//! with per-block multisets `(I_s, J_s)`; `J₀ = ⟨(i−1)^d⟩` is implicit.
//! Such a spec expands to an explicit element of the lowering half with
//! polynomial Cartan coefficients, commutes with each simple raising
//! generator by a closed three-term rule, and supports exact division by
//! the polynomials `C(i,m) − u_m`, which produces the operators whose
//! mod-p specializations witness branching.
//!
//! # Key operations
//! - [`ElemSpec`] — validated block data (entry ranges, junction balance)
//! - [`elementary_expression`] — the expansion into divided-power terms
//! - [`e_times_s`] / [`rule_rhs`] — one raising step, computed two ways
//! - [`p_coefficient`] — closed form of the fully raised scalar
//! - [`build_t_formal`], [`ev_formal`], [`t_eval`] — the divided
//!   operator, symbolically and concretely, each checking the other
//! - [`rho`] — raising endomorphisms on the formal layer
//! - [`cf_kappa`] / [`cf_total`] — scalar-part homomorphisms
//! - [`script_t`] — the operator attached to a column/row point set
//!
//! # Design notes
//! - The formal layer is a free commutative algebra on block symbols.
//!   Monomials keep a structured denominator: a list of index pairs
//!   `(a,b)` standing for `C(a,b) − u_b + u_a`, each of degree at most
//!   one. Equality clears denominators groupwise and compares exact
//!   fractions, so alternative recursive presentations compare equal.
//! - `t_eval` and `ev_formal ∘ build_t_formal` compute the same element
//!   along unrelated routes (coefficient recursion vs. symbolic
//!   expansion); the test suite holds them equal. Division is exact at
//!   every step and any remainder is a hard error, never a warning.
//! - Raising rules guard every replacement by its count: a vanishing
//!   count multiplies an undefined replacement, and the product is zero.

use std::collections::{BTreeMap, BTreeSet};

use num_bigint::BigInt;
use num_traits::{One, Zero};

use crate::hyperalg::{
    divide_elem, e_action, enumerate_matrices, factorial, sigma_elem, specialize_elem,
    FpHypVector, HypElement, UTMatrix,
};
use crate::msets::Multiset;
use crate::planegeo::PointSet;
use crate::polyring::{
    cdiff, exact_div, falling, hvar, sigma, subst_u, ubar, uvar, FracPoly, IntPoly, Var,
};
use crate::{Error, Result, Weight};

/// Binomial coefficient with a nonnegative top; zero off the support
/// `0 ≤ k ≤ top`. A negative top is a violated precondition upstream.
fn binom(top: i64, k: i64) -> BigInt {
    if k < 0 {
        return BigInt::zero();
    }
    assert!(top >= 0, "binomial top must be nonnegative, got {top}");
    if k > top {
        return BigInt::zero();
    }
    let mut num = BigInt::one();
    for j in 0..k {
        num *= top - j;
    }
    num / factorial(k as u64)
}

/// The shift parameter of column `t`, pinned to zero at the base column.
fn u_of(i: usize, t: usize) -> IntPoly {
    ubar(t, i)
}

/// Falling-factorial product of a linear seed over an offset interval
/// with a gap removed: `Π { seed − c : c ∈ [0..=top] ∖ [gap_lo..=gap_hi] }`.
/// Requires the gap to sit inside `[0..=top]`, which makes the quotient of
/// the two falling factorials exact by construction.
fn falling_with_gap(seed: &IntPoly, top: i64, gap_lo: i64, gap_hi: i64) -> IntPoly {
    assert!(
        0 <= gap_lo && gap_lo <= gap_hi && gap_hi <= top,
        "gap [{gap_lo}..={gap_hi}] must sit inside [0..={top}]"
    );
    let mut acc = IntPoly::one();
    for c in 0..=top {
        if c >= gap_lo && c <= gap_hi {
            continue;
        }
        acc = &acc * &(seed - &IntPoly::constant(c));
    }
    acc
}

// ---------------------------------------------------------------------------
// Block specs and their expansion

/// A validated block spec: the chain `i = m₀ < … < m_{k+1} = n`, the
/// multisets `I₁..I_{k+1}` and `J₁..J_k`. `J₀ = ⟨(i−1)^d⟩` is implicit.
///
/// Invariants enforced by [`ElemSpec::new`]:
/// - entries of `I₁` lie in `[i..m₁)`; entries of `I_s` lie in
///   `[m_{s−1}−1..m_s)` for `s ≥ 2`;
/// - entries of `J_s` lie in `[m_s−1..m_{s+1})`;
/// - at every interior cut `m_s` the junction balance holds:
///   `|I_{s+1}|^{{m_s−1}} + |J_s| = |I_s| + |J_{s−1}|^{{m_s−1}}`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ElemSpec {
    pub i: usize,
    pub n: usize,
    pub d: i64,
    pub mcal: Vec<usize>,
    pub iseq: Vec<Multiset>,
    pub jseq: Vec<Multiset>,
}

impl ElemSpec {
    pub fn new(
        i: usize,
        n: usize,
        d: i64,
        mcal: Vec<usize>,
        iseq: Vec<Multiset>,
        jseq: Vec<Multiset>,
    ) -> Result<Self> {
        let bad = |msg: String| Err(Error::InvalidSpec(msg));
        if !(1 <= i && i < n) {
            return bad(format!("need 1 ≤ i < n, got i={i}, n={n}"));
        }
        if d < 0 {
            return bad(format!("need d ≥ 0, got d={d}"));
        }
        for w in mcal.windows(2) {
            if w[0] >= w[1] {
                return bad(format!("cut list not strictly increasing: {mcal:?}"));
            }
        }
        if let (Some(&lo), Some(&hi)) = (mcal.first(), mcal.last()) {
            if lo <= i || hi >= n {
                return bad(format!("cuts must lie strictly between {i} and {n}: {mcal:?}"));
            }
        }
        let k = mcal.len();
        if iseq.len() != k + 1 || jseq.len() != k {
            return bad(format!(
                "need {} I-blocks and {} J-blocks, got {} and {}",
                k + 1,
                k,
                iseq.len(),
                jseq.len()
            ));
        }
        let spec = ElemSpec { i, n, d, mcal, iseq, jseq };
        let cuts = spec.cuts();
        for s in 1..=k + 1 {
            let lo = if s == 1 { i as i64 } else { cuts[s - 1] as i64 - 1 };
            let hi = cuts[s] as i64;
            let iset = &spec.iseq[s - 1];
            if iset.entries().any(|e| e < lo || e >= hi) {
                return bad(format!("I-block {s} must lie in [{lo}..{hi}), got {iset}"));
            }
        }
        for s in 1..=k {
            let lo = cuts[s] as i64 - 1;
            let hi = cuts[s + 1] as i64;
            let jset = &spec.jseq[s - 1];
            if jset.entries().any(|e| e < lo || e >= hi) {
                return bad(format!("J-block {s} must lie in [{lo}..{hi}), got {jset}"));
            }
        }
        for s in 1..=k {
            let ms = cuts[s] as i64;
            let lhs = spec.iseq[s].count_eq(ms - 1) + spec.jseq[s - 1].len();
            let rhs = spec.iseq[s - 1].len() + spec.jset(s - 1).count_eq(ms - 1);
            if lhs != rhs {
                return bad(format!(
                    "junction balance fails at cut {ms}: {lhs} ≠ {rhs}"
                ));
            }
        }
        Ok(spec)
    }

    /// Number of interior cuts.
    pub fn k(&self) -> usize {
        self.mcal.len()
    }

    /// The full chain `m₀ = i, m₁, …, m_k, m_{k+1} = n`.
    pub fn cuts(&self) -> Vec<usize> {
        let mut v = Vec::with_capacity(self.k() + 2);
        v.push(self.i);
        v.extend_from_slice(&self.mcal);
        v.push(self.n);
        v
    }

    /// The implicit zeroth J-block `⟨(i−1)^d⟩`.
    pub fn j0(&self) -> Multiset {
        Multiset::copies(self.i as i64 - 1, self.d as usize)
    }

    /// `J_s` with the implicit `s = 0` block included.
    pub fn jset(&self, s: usize) -> Multiset {
        if s == 0 {
            self.j0()
        } else {
            self.jseq[s - 1].clone()
        }
    }
}

/// The simple-root coefficients `c_t` (index `t−1`, for `t = 1..n−1`) of
/// the weight of the spec's expansion: `c_t = 0` for `t < i`, and
/// `c_t = −d + |I_{s+1}|^{(−∞..t]} + |J_s|^{[t..∞)}` on the block owning
/// `t`. Panics if the two block formulas disagree at an interior cut,
/// which the junction balance rules out.
pub fn weight_of_spec(spec: &ElemSpec) -> Result<Vec<i64>> {
    let cuts = spec.cuts();
    let coeff_by_block = |s: usize, t: usize| -> i64 {
        -spec.d + spec.iseq[s].count_le(t as i64) as i64 + spec.jset(s).count_ge(t as i64) as i64
    };
    let mut out = vec![0i64; spec.n - 1];
    for s in 0..=spec.k() {
        for t in cuts[s]..cuts[s + 1] {
            if t <= spec.n - 1 {
                out[t - 1] = coeff_by_block(s, t);
            }
        }
    }
    for s in 1..=spec.k() {
        let t = cuts[s] - 1;
        assert_eq!(
            out[t - 1],
            coeff_by_block(s, t),
            "junction coefficient mismatch at column {t}"
        );
    }
    Ok(out)
}

/// `a_t := −c_t` for `t = 1..n−1`: the amount of raising in direction `t`
/// needed to return to weight zero. Nonnegative iff the weight is ≤ 0.
pub fn raising_profile(spec: &ElemSpec) -> Result<Vec<i64>> {
    Ok(weight_of_spec(spec)?.iter().map(|c| -c).collect())
}

/// The expansion of a spec: the sum over all exponent matrices `N` of the
/// spec's weight of `F^(N)` times
/// `Π_s Π_t (N_t + |J_s|^{{t−1}})!·(C(m_s,t) + u_{m_s})^{falling exponent}`
/// with exponent `d − (N_t + |J_s|^{{t−1}} + |I_{s+1}|^{(−∞..t)})`, where
/// `N_t` is the column sum. A negative exponent is a hard error: the
/// junction balance makes every exponent nonnegative.
pub fn elementary_expression(spec: &ElemSpec) -> Result<HypElement> {
    let flows = raising_profile(spec)?;
    let cuts = spec.cuts();
    let mut acc = HypElement::zero(spec.n);
    for nmat in enumerate_matrices(spec.n, &flows) {
        let mut coef = IntPoly::one();
        for s in 0..=spec.k() {
            let jcur = spec.jset(s);
            let iset = &spec.iseq[s];
            let ms = cuts[s];
            for t in cuts[s]..cuts[s + 1] {
                let nt = nmat.col_sum(t);
                let jcount = jcur.count_eq(t as i64 - 1) as i64;
                coef = coef.scale(&factorial((nt + jcount) as u64));
                let expo = spec.d - (nt + jcount + iset.count_lt(t as i64) as i64);
                if expo < 0 {
                    return Err(Error::NegativeExponent { k: expo });
                }
                let seed = &cdiff(ms, t) + &u_of(spec.i, ms);
                coef = &coef * &falling(&seed, expo)?;
            }
        }
        acc.add_term(nmat, coef);
    }
    Ok(acc)
}

// ---------------------------------------------------------------------------
// Raising rules

/// Which closed raising rule applies at generator index `l`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RuleCase {
    /// `l < i`: the action vanishes.
    Below,
    /// `m_r ≤ l < m_{r+1} − 1`: the two-term interior rule at block `r`.
    Interior(usize),
    /// `l = m_r − 1` for an interior cut: the three-term junction rule.
    AtCut(usize),
    /// `l = n − 1`: the two-term top rule.
    Top,
}

/// Classify the raising index against the spec's chain.
pub fn rule_case(l: usize, spec: &ElemSpec) -> RuleCase {
    if l < spec.i {
        return RuleCase::Below;
    }
    assert!(l < spec.n, "raising index {l} outside [1..{})", spec.n);
    if l == spec.n - 1 {
        return RuleCase::Top;
    }
    if let Some(pos) = spec.mcal.iter().position(|&m| m == l + 1) {
        return RuleCase::AtCut(pos + 1);
    }
    let cuts = spec.cuts();
    let r = (0..=spec.k()).rev().find(|&s| cuts[s] <= l).unwrap();
    RuleCase::Interior(r)
}

/// The raising generator applied to the spec's expansion, reduced modulo
/// the left raising ideal. One side of the rule identity.
pub fn e_times_s(l: usize, spec: &ElemSpec) -> Result<HypElement> {
    Ok(e_action(l, &elementary_expression(spec)?))
}

/// The other side: the closed-form right-hand side of whichever raising
/// rule applies. Every replacement is guarded by its count; a zero count
/// kills the term before the replacement is attempted.
pub fn rule_rhs(l: usize, spec: &ElemSpec) -> Result<HypElement> {
    let i = spec.i;
    let d = spec.d;
    let cuts = spec.cuts();
    let k = spec.k();
    let mut acc = HypElement::zero(spec.n);
    match rule_case(l, spec) {
        RuleCase::Below => {}
        RuleCase::Interior(r) => {
            let mr = cuts[r];
            let cj = spec.jset(r).count_eq(l as i64 - 1) as i64;
            if l > i && cj > 0 {
                assert!(r >= 1, "the implicit J-block has no entry at {}", l - 1);
                let mut js = spec.jseq.clone();
                js[r - 1] = js[r - 1].replace_one(l as i64 - 1, l as i64)?;
                let s1 = ElemSpec::new(i, spec.n, d, spec.mcal.clone(), spec.iseq.clone(), js)?;
                acc = acc.add(&elementary_expression(&s1)?.scale(&IntPoly::constant(-cj)));
            }
            let ci = spec.iseq[r].count_eq(l as i64 + 1) as i64;
            if ci > 0 {
                let mut is = spec.iseq.clone();
                is[r] = is[r].replace_one(l as i64 + 1, l as i64)?;
                let s2 = ElemSpec::new(i, spec.n, d, spec.mcal.clone(), is, spec.jseq.clone())?;
                let mult = &(&(&cdiff(mr, l + 1) + &u_of(i, mr))
                    - &IntPoly::constant(d))
                    + &IntPoly::constant(spec.iseq[r].count_le(l as i64) as i64);
                acc = acc.add(
                    &elementary_expression(&s2)?
                        .scale(&mult.scale(&BigInt::from(ci))),
                );
            }
        }
        RuleCase::AtCut(r) => {
            let mr = cuts[r];
            let mr_prev = cuts[r - 1];
            let cj = spec.jset(r - 1).count_eq(mr as i64 - 2) as i64;
            if l > i && cj > 0 {
                assert!(r >= 2, "the implicit J-block has no entry at {}", mr - 2);
                let mut js = spec.jseq.clone();
                js[r - 2] = js[r - 2].replace_one(mr as i64 - 2, mr as i64 - 1)?;
                js[r - 1] = js[r - 1].adjoin(mr as i64 - 1);
                let s1 = ElemSpec::new(i, spec.n, d, spec.mcal.clone(), spec.iseq.clone(), js)?;
                acc = acc.add(&elementary_expression(&s1)?.scale(&IntPoly::constant(-cj)));
            }
            {
                let mut is = spec.iseq.clone();
                let mut js = spec.jseq.clone();
                is[r - 1] = is[r - 1].adjoin(mr as i64 - 1);
                js[r - 1] = js[r - 1].adjoin(mr as i64 - 1);
                let s2 = ElemSpec::new(i, spec.n, d, spec.mcal.clone(), is, js)?;
                let mult = &(&(&(&cdiff(mr_prev, mr) + &u_of(i, mr_prev)) - &u_of(i, mr))
                    + &IntPoly::constant(spec.iseq[r - 1].len() as i64))
                    - &IntPoly::constant(spec.iseq[r].count_eq(mr as i64 - 1) as i64);
                acc = acc.add(&elementary_expression(&s2)?.scale(&mult));
            }
            let ci = spec.iseq[r].count_eq(mr as i64) as i64;
            if ci > 0 {
                let mut is = spec.iseq.clone();
                is[r - 1] = is[r - 1].adjoin(mr as i64 - 1);
                is[r] = is[r].replace_one(mr as i64, mr as i64 - 1)?;
                let s3 = ElemSpec::new(i, spec.n, d, spec.mcal.clone(), is, spec.jseq.clone())?;
                let mult = &(&u_of(i, mr) - &IntPoly::constant(d))
                    + &IntPoly::constant(spec.iseq[r].count_eq(mr as i64 - 1) as i64);
                acc = acc.add(
                    &elementary_expression(&s3)?
                        .scale(&mult.scale(&BigInt::from(ci))),
                );
            }
        }
        RuleCase::Top => {
            let mk = cuts[k];
            let cj = spec.jset(k).count_eq(spec.n as i64 - 2) as i64;
            if l > i && cj > 0 {
                assert!(k >= 1, "the implicit J-block has no entry at {}", spec.n - 2);
                let mut js = spec.jseq.clone();
                js[k - 1] = js[k - 1].replace_one(spec.n as i64 - 2, spec.n as i64 - 1)?;
                let s1 = ElemSpec::new(i, spec.n, d, spec.mcal.clone(), spec.iseq.clone(), js)?;
                acc = acc.add(&elementary_expression(&s1)?.scale(&IntPoly::constant(-cj)));
            }
            {
                let mut is = spec.iseq.clone();
                is[k] = is[k].adjoin(spec.n as i64 - 1);
                let s2 = ElemSpec::new(i, spec.n, d, spec.mcal.clone(), is, spec.jseq.clone())?;
                let mult = &(&(&cdiff(mk, spec.n) + &u_of(i, mk)) - &IntPoly::constant(d))
                    + &IntPoly::constant(spec.iseq[k].len() as i64);
                acc = acc.add(&elementary_expression(&s2)?.scale(&mult));
            }
        }
    }
    Ok(acc)
}

// ---------------------------------------------------------------------------
// The closed fully-raised coefficient

/// The closed form of the fully raised scalar: zero when any raising
/// amount `a_t` is negative, otherwise the product over blocks and
/// columns of gap-free falling-factorial quotients, divided by
/// `a_{n−1}!`. Equals `raise_divided(a, elementary_expression(spec))`.
pub fn p_coefficient(spec: &ElemSpec) -> Result<IntPoly> {
    let a = raising_profile(spec)?;
    if a.iter().any(|&x| x < 0) {
        return Ok(IntPoly::zero());
    }
    // Raising amount at column t, with t < i contributing zero.
    let aval = |t: i64| -> i64 {
        if t < spec.i as i64 {
            0
        } else {
            a[(t - 1) as usize]
        }
    };
    let cuts = spec.cuts();
    let mut res = IntPoly::one();
    for s in 0..=spec.k() {
        let ms = cuts[s];
        let jcur = spec.jset(s);
        let iset = &spec.iseq[s];
        res = &res * &falling(&u_of(spec.i, ms), jcur.count_ge(ms as i64) as i64)?;
        for t in ms + 1..=cuts[s + 1] {
            let tt = t as i64;
            let jt2 = jcur.count_eq(tt - 2) as i64;
            res = res.scale(&factorial(jt2 as u64));
            let at1 = aval(tt - 1);
            let at2 = aval(tt - 2);
            let it1 = iset.count_eq(tt - 1) as i64;
            let ile = iset.count_le(tt - 1) as i64;
            let jge = jcur.count_ge(tt) as i64;
            let jge1 = jcur.count_ge(tt - 1) as i64;
            let seed = &cdiff(ms, t) + &u_of(spec.i, ms);
            let mut inner = IntPoly::zero();
            for q in 0..=at1 {
                let b1 = binom(it1, at2 - at1 + q);
                if b1.is_zero() {
                    continue;
                }
                let b2 = binom(at1, q);
                let frac = falling_with_gap(&seed, spec.d - ile, jge, jge1 + q);
                let hfall = falling(&(&hvar(t - 1) - &hvar(t)), q)?;
                inner = &inner + &(&frac * &hfall).scale(&(b1 * b2));
            }
            res = &res * &inner;
        }
    }
    let an1 = factorial(a[spec.n - 2] as u64);
    exact_div(&res, &IntPoly::constant(an1))
}

// ---------------------------------------------------------------------------
// The formal layer

/// One block symbol: the column interval `[lo..hi)` and its multisets.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct FormalBlock {
    pub lo: usize,
    pub hi: usize,
    pub iset: Multiset,
    pub jset: Multiset,
}

impl FormalBlock {
    /// Entry ranges relative to the ambient base column `i`:
    /// `I ⊆ [lo−1..hi)` and `J ⊆ [lo−1..hi)` when `lo > i`;
    /// `I ⊆ [i..hi)` and `J = ⟨(i−1)^d⟩` when `lo = i`.
    pub fn validate(&self, i: usize, d: i64) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidSpec(msg));
        if !(i <= self.lo && self.lo < self.hi) {
            return bad(format!("block interval [{}, {}) out of order", self.lo, self.hi));
        }
        let ilo = if self.lo == i { i as i64 } else { self.lo as i64 - 1 };
        if self.iset.entries().any(|e| e < ilo || e >= self.hi as i64) {
            return bad(format!("block I-entries out of [{}..{}): {}", ilo, self.hi, self.iset));
        }
        if self.lo == i {
            if self.jset != Multiset::copies(i as i64 - 1, d as usize) {
                return bad(format!("base block must carry the implicit J, got {}", self.jset));
            }
        } else if self
            .jset
            .entries()
            .any(|e| e < self.lo as i64 - 1 || e >= self.hi as i64)
        {
            return bad(format!(
                "block J-entries out of [{}..{}): {}",
                self.lo - 1,
                self.hi,
                self.jset
            ));
        }
        Ok(())
    }

    /// Simple-root coefficients of the block symbol's weight, written
    /// into `out[t−1]` for `t` in `[lo..hi)`.
    fn weight_into(&self, d: i64, out: &mut [i64]) {
        for t in self.lo..self.hi {
            out[t - 1] +=
                -d + self.iset.count_le(t as i64) as i64 + self.jset.count_ge(t as i64) as i64;
        }
    }
}

/// A product of block symbols, a polynomial numerator, and a structured
/// denominator: a list of index pairs `(a,b)` standing for the factors
/// `C(a,b) − u_b + u_a`, each of degree at most one.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FormalMonomial {
    pub blocks: Vec<FormalBlock>,
    pub num: IntPoly,
    pub den: Vec<(usize, usize)>,
}

/// A finite sum of formal monomials over a fixed ambient `(i, n, d)`.
#[derive(Debug, Clone)]
pub struct FormalPoly {
    pub i: usize,
    pub n: usize,
    pub d: i64,
    pub monomials: Vec<FormalMonomial>,
}

/// The denominator factor `C(a,b) − u_b + u_a` with the base-column
/// convention `u_i = 0`.
pub fn den_factor(i: usize, a: usize, b: usize) -> IntPoly {
    &(&cdiff(a, b) - &uvar(b)) + &ubar(a, i)
}

impl FormalPoly {
    pub fn zero(i: usize, n: usize, d: i64) -> Self {
        FormalPoly { i, n, d, monomials: Vec::new() }
    }

    /// A single block symbol with coefficient one.
    pub fn from_block(i: usize, n: usize, d: i64, block: FormalBlock) -> Result<Self> {
        block.validate(i, d)?;
        Ok(FormalPoly {
            i,
            n,
            d,
            monomials: vec![FormalMonomial {
                blocks: vec![block],
                num: IntPoly::one(),
                den: Vec::new(),
            }],
        })
    }

    /// A bare scalar (no block symbols).
    pub fn from_poly(i: usize, n: usize, d: i64, f: IntPoly) -> Self {
        if f.is_zero() {
            return FormalPoly::zero(i, n, d);
        }
        FormalPoly {
            i,
            n,
            d,
            monomials: vec![FormalMonomial { blocks: Vec::new(), num: f, den: Vec::new() }],
        }
    }

    pub fn is_structurally_zero(&self) -> bool {
        self.monomials.is_empty()
    }

    fn assert_compatible(&self, other: &FormalPoly) {
        assert!(
            self.i == other.i && self.n == other.n && self.d == other.d,
            "ambient (i,n,d) mismatch"
        );
    }

    pub fn add(&self, other: &FormalPoly) -> FormalPoly {
        self.assert_compatible(other);
        let mut monomials = self.monomials.clone();
        monomials.extend(other.monomials.iter().cloned());
        FormalPoly { i: self.i, n: self.n, d: self.d, monomials }
    }

    pub fn neg(&self) -> FormalPoly {
        self.scale(&IntPoly::constant(-1))
    }

    pub fn sub(&self, other: &FormalPoly) -> FormalPoly {
        self.add(&other.neg())
    }

    pub fn scale(&self, f: &IntPoly) -> FormalPoly {
        if f.is_zero() {
            return FormalPoly::zero(self.i, self.n, self.d);
        }
        let monomials = self
            .monomials
            .iter()
            .map(|m| FormalMonomial { blocks: m.blocks.clone(), num: &m.num * f, den: m.den.clone() })
            .collect();
        FormalPoly { i: self.i, n: self.n, d: self.d, monomials }
    }

    /// Product. Block intervals from the two sides must not overlap, and
    /// a denominator factor may not appear on both sides.
    pub fn mul(&self, other: &FormalPoly) -> FormalPoly {
        self.assert_compatible(other);
        let mut monomials = Vec::new();
        for a in &self.monomials {
            for b in &other.monomials {
                let mut blocks = a.blocks.clone();
                blocks.extend(b.blocks.iter().cloned());
                blocks.sort();
                for w in blocks.windows(2) {
                    assert!(
                        w[0].hi <= w[1].lo,
                        "block intervals overlap: [{},{}) and [{},{})",
                        w[0].lo,
                        w[0].hi,
                        w[1].lo,
                        w[1].hi
                    );
                }
                let mut den = a.den.clone();
                den.extend(b.den.iter().copied());
                den.sort();
                for w in den.windows(2) {
                    assert!(w[0] != w[1], "denominator factor {:?} repeated", w[0]);
                }
                monomials.push(FormalMonomial { blocks, num: &a.num * &b.num, den });
            }
        }
        FormalPoly { i: self.i, n: self.n, d: self.d, monomials }
    }

    /// The common weight of all monomials as simple-root coefficients,
    /// `None` for the structural zero, `MixedWeights` on disagreement.
    pub fn weight(&self) -> Result<Option<Vec<i64>>> {
        let mut seen: Option<Vec<i64>> = None;
        for m in &self.monomials {
            let mut w = vec![0i64; self.n - 1];
            for b in &m.blocks {
                b.weight_into(self.d, &mut w);
            }
            match &seen {
                None => seen = Some(w),
                Some(prev) if *prev == w => {}
                Some(_) => return Err(Error::MixedWeights),
            }
        }
        Ok(seen)
    }

    /// Structural sanity: every block validated; adjacent blocks balanced
    /// at their junction when they touch; denominator factors distinct,
    /// anchored at a block start, and reaching no further than that
    /// block's end.
    pub fn check_regular(&self) -> Result<()> {
        for m in &self.monomials {
            for b in &m.blocks {
                b.validate(self.i, self.d)?;
            }
            for w in m.blocks.windows(2) {
                if w[0].hi == w[1].lo {
                    let cut = w[1].lo as i64;
                    let lhs = w[1].iset.count_eq(cut - 1) + w[1].jset.len();
                    let rhs = w[0].iset.len() + w[0].jset.count_eq(cut - 1);
                    if lhs != rhs {
                        return Err(Error::InvalidSpec(format!(
                            "junction balance fails at {cut}: {lhs} ≠ {rhs}"
                        )));
                    }
                }
            }
            let mut seen = BTreeSet::new();
            for &(a, b) in &m.den {
                if !seen.insert((a, b)) {
                    return Err(Error::InvalidSpec(format!(
                        "denominator factor ({a},{b}) repeated"
                    )));
                }
                if !m.blocks.iter().any(|blk| blk.lo == a && b <= blk.hi) {
                    return Err(Error::InvalidSpec(format!(
                        "denominator factor ({a},{b}) has no supporting block"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Group the monomials by block content and return each group's exact
    /// fraction (numerator over the product of denominator factors).
    fn grouped(&self) -> BTreeMap<Vec<FormalBlock>, FracPoly> {
        let mut out: BTreeMap<Vec<FormalBlock>, FracPoly> = BTreeMap::new();
        for m in &self.monomials {
            let mut blocks = m.blocks.clone();
            blocks.sort();
            let mut den = IntPoly::one();
            for &(a, b) in &m.den {
                den = &den * &den_factor(self.i, a, b);
            }
            let frac = FracPoly::new(m.num.clone(), den);
            out.entry(blocks)
                .and_modify(|acc| *acc = &*acc + &frac)
                .or_insert(frac);
        }
        out.retain(|_, f| !f.is_zero());
        out
    }
}

/// Exact equality of formal polynomials: blockwise grouping, then exact
/// comparison of the cleared fractions.
pub fn formal_eq(p: &FormalPoly, q: &FormalPoly) -> bool {
    p.assert_compatible(q);
    let gp = p.grouped();
    let gq = q.grouped();
    if gp.len() != gq.len() {
        return false;
    }
    gp.iter().all(|(blocks, f)| gq.get(blocks).is_some_and(|g| f == g))
}

/// Multiply by the factor `C(a,b) − u_b + u_a`: cancel it where it
/// divides the denominator, push it into the numerator elsewhere.
pub fn mul_cdiff(p: &FormalPoly, a: usize, b: usize) -> FormalPoly {
    let monomials = p
        .monomials
        .iter()
        .map(|m| {
            if let Some(pos) = m.den.iter().position(|&f| f == (a, b)) {
                let mut den = m.den.clone();
                den.remove(pos);
                FormalMonomial { blocks: m.blocks.clone(), num: m.num.clone(), den }
            } else {
                FormalMonomial {
                    blocks: m.blocks.clone(),
                    num: &m.num * &den_factor(p.i, a, b),
                    den: m.den.clone(),
                }
            }
        })
        .collect();
    FormalPoly { i: p.i, n: p.n, d: p.d, monomials }
}

/// The cutting endomorphism on the formal layer. On a block it splits at
/// `mp` when the block starts at `m` and reaches past `mp`, fixes blocks
/// whose interval is disjoint from or equal to `[m..mp)`, and kills
/// everything else. On coefficients it is the polynomial substitution.
/// Monomials whose denominator contains `(m,mp)` must be cleared first
/// via [`mul_cdiff`]; such a factor is a hard error here.
pub fn sigma_formal(m: usize, mp: usize, p: &FormalPoly) -> Result<FormalPoly> {
    let mut monomials = Vec::new();
    'mono: for mono in &p.monomials {
        let mut blocks = Vec::new();
        for b in &mono.blocks {
            if b.lo == m && mp < b.hi {
                blocks.push(FormalBlock {
                    lo: m,
                    hi: mp,
                    iset: b.iset.cut_lup(mp as i64),
                    jset: b.jset.cut_l(mp as i64),
                });
                blocks.push(FormalBlock {
                    lo: mp,
                    hi: b.hi,
                    iset: b.iset.cut_rup(mp as i64),
                    jset: b.jset.cut_r(mp as i64),
                });
            } else if b.hi <= m || mp <= b.lo || (b.lo == m && b.hi == mp) {
                blocks.push(b.clone());
            } else {
                continue 'mono;
            }
        }
        let num = sigma(m, mp, p.i, &mono.num)?;
        let mut den = Vec::new();
        for &(a, b) in &mono.den {
            assert!(
                (a, b) != (m, mp),
                "denominator factor ({a},{b}) must be cleared before cutting"
            );
            if a < mp && mp <= b {
                assert!(a == m, "cut at ({m},{mp}) meets unrelated factor ({a},{b})");
                den.push((mp, b));
            } else {
                den.push((a, b));
            }
        }
        den.sort();
        monomials.push(FormalMonomial { blocks, num, den });
    }
    Ok(FormalPoly { i: p.i, n: p.n, d: p.d, monomials })
}

/// The recursively divided operator on the formal layer. With no interior
/// cuts it is the bare block symbol; with cuts it subtracts the split at
/// the smallest cut and divides by the corresponding factor, which the
/// structured denominator absorbs exactly.
#[allow(clippy::too_many_arguments)]
pub fn build_t_formal(
    i: usize,
    n: usize,
    d: i64,
    k: usize,
    j: usize,
    mcal: &[usize],
    iset: &Multiset,
    jset: &Multiset,
) -> Result<FormalPoly> {
    if !(i <= k && k < j && j <= n) {
        return Err(Error::InvalidSpec(format!("need i ≤ k < j ≤ n, got k={k}, j={j}")));
    }
    if mcal.iter().any(|&m| m <= k || m >= j) {
        return Err(Error::InvalidSpec(format!("cuts {mcal:?} must lie in ({k}..{j})")));
    }
    if mcal.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidSpec(format!("cut list not strictly increasing: {mcal:?}")));
    }
    let block = FormalBlock { lo: k, hi: j, iset: iset.clone(), jset: jset.clone() };
    block.validate(i, d)?;
    if mcal.is_empty() {
        return FormalPoly::from_block(i, n, d, block);
    }
    let m = mcal[0];
    let rest = &mcal[1..];
    let whole = build_t_formal(i, n, d, k, j, rest, iset, jset)?;
    let left = build_t_formal(i, n, d, k, m, &[], &iset.cut_lup(m as i64), &jset.cut_l(m as i64))?;
    let right = build_t_formal(
        i,
        n,
        d,
        m,
        j,
        rest,
        &iset.cut_rup(m as i64),
        &jset.cut_r(m as i64),
    )?;
    let diff = whole.sub(&left.mul(&right));
    let monomials = diff
        .monomials
        .into_iter()
        .map(|mut mono| {
            assert!(
                !mono.den.contains(&(k, m)),
                "denominator factor ({k},{m}) would repeat"
            );
            mono.den.push((k, m));
            mono.den.sort();
            mono
        })
        .collect();
    Ok(FormalPoly { i, n, d, monomials })
}

// ---------------------------------------------------------------------------
// Raising endomorphisms on the formal layer

/// The four raising endomorphism variants. The first, the two halves of
/// the second, and the third are multiplicative on block products; the
/// difference of the two second-variant halves is not.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RhoTag {
    R1,
    R2L,
    R2R,
    R3,
}

/// One variant applied to one block: `None` kills the monomial, otherwise
/// the replacement block and a scalar multiplier.
fn rho_block(
    tag: RhoTag,
    l: usize,
    i: usize,
    d: i64,
    b: &FormalBlock,
) -> Option<(FormalBlock, IntPoly)> {
    let (m, mp) = (b.lo, b.hi);
    let ll = l as i64;
    let keep = Some((b.clone(), IntPoly::one()));
    match tag {
        RhoTag::R1 => {
            if m <= l && l < mp {
                if l <= i {
                    return None;
                }
                let cj = b.jset.count_eq(ll - 1) as i64;
                if cj == 0 {
                    return None;
                }
                let nb = FormalBlock {
                    jset: b.jset.replace_one(ll - 1, ll).expect("guarded by count"),
                    ..b.clone()
                };
                Some((nb, IntPoly::constant(-cj)))
            } else if l + 1 == m {
                Some((
                    FormalBlock { jset: b.jset.adjoin(ll), ..b.clone() },
                    IntPoly::one(),
                ))
            } else {
                keep
            }
        }
        RhoTag::R2L => {
            if m <= l && l < mp - 1 {
                None
            } else if l == mp - 1 {
                let mult = &(&(&cdiff(m, mp) + &u_of(i, m)) - &IntPoly::constant(d))
                    + &IntPoly::constant(b.iset.len() as i64);
                Some((FormalBlock { iset: b.iset.adjoin(ll), ..b.clone() }, mult))
            } else if l + 1 == m {
                Some((
                    FormalBlock { jset: b.jset.adjoin(ll), ..b.clone() },
                    IntPoly::one(),
                ))
            } else {
                keep
            }
        }
        RhoTag::R2R => {
            if m <= l && l < mp - 1 {
                None
            } else if l == mp - 1 {
                Some((
                    FormalBlock { iset: b.iset.adjoin(ll), ..b.clone() },
                    IntPoly::one(),
                ))
            } else if l + 1 == m {
                let mult = &(&u_of(i, m) - &IntPoly::constant(d))
                    + &IntPoly::constant(b.iset.count_eq(m as i64 - 1) as i64);
                Some((FormalBlock { jset: b.jset.adjoin(ll), ..b.clone() }, mult))
            } else {
                keep
            }
        }
        RhoTag::R3 => {
            if m <= l + 1 && l < mp - 1 {
                let ci = b.iset.count_eq(ll + 1) as i64;
                if ci == 0 {
                    return None;
                }
                let mult = &(&(&cdiff(m, l + 1) + &u_of(i, m)) - &IntPoly::constant(d))
                    + &IntPoly::constant(b.iset.count_le(ll) as i64);
                let nb = FormalBlock {
                    iset: b.iset.replace_one(ll + 1, ll).expect("guarded by count"),
                    ..b.clone()
                };
                Some((nb, mult.scale(&BigInt::from(ci))))
            } else if l == mp - 1 {
                Some((
                    FormalBlock { iset: b.iset.adjoin(ll), ..b.clone() },
                    IntPoly::one(),
                ))
            } else {
                keep
            }
        }
    }
}

/// One raising endomorphism variant applied blockwise to every monomial.
/// Scalars (numerator and denominator) are fixed.
pub fn rho(tag: RhoTag, l: usize, p: &FormalPoly) -> FormalPoly {
    assert!(p.i <= l && l < p.n, "raising index {l} outside [{}..{})", p.i, p.n);
    let mut monomials = Vec::new();
    'mono: for mono in &p.monomials {
        let mut blocks = Vec::new();
        let mut num = mono.num.clone();
        for b in &mono.blocks {
            match rho_block(tag, l, p.i, p.d, b) {
                None => continue 'mono,
                Some((nb, mult)) => {
                    blocks.push(nb);
                    num = &num * &mult;
                }
            }
        }
        if num.is_zero() {
            continue;
        }
        monomials.push(FormalMonomial { blocks, num, den: mono.den.clone() });
    }
    FormalPoly { i: p.i, n: p.n, d: p.d, monomials }
}

/// The difference of the two second-variant halves.
pub fn rho2(l: usize, p: &FormalPoly) -> FormalPoly {
    rho(RhoTag::R2L, l, p).sub(&rho(RhoTag::R2R, l, p))
}

/// The combined raising endomorphism: first variant plus the difference
/// of the second-variant halves plus the third variant.
pub fn rho_combined(l: usize, p: &FormalPoly) -> FormalPoly {
    rho(RhoTag::R1, l, p).add(&rho2(l, p)).add(&rho(RhoTag::R3, l, p))
}

// ---------------------------------------------------------------------------
// Evaluation of the formal layer

/// Evaluate a formal polynomial whose every monomial tiles `[i..n)` with
/// balanced blocks: each monomial contributes its spec expansion scaled
/// by its exact fraction, and the assembled coefficients must clear to
/// polynomials.
pub fn ev_formal(p: &FormalPoly) -> Result<HypElement> {
    // Every monomial's denominator is a squarefree product drawn from one
    // small pair set, so accumulating over the common denominator (the
    // product over the union) keeps all arithmetic polynomial. Summing
    // lazy fractions instead would square the degrees at every addition.
    let all_pairs: BTreeSet<(usize, usize)> = p
        .monomials
        .iter()
        .flat_map(|mono| mono.den.iter().copied())
        .collect();
    let mut full_den = IntPoly::one();
    for &(a, b) in &all_pairs {
        full_den = &full_den * &den_factor(p.i, a, b);
    }
    let mut acc: BTreeMap<UTMatrix, IntPoly> = BTreeMap::new();
    for mono in &p.monomials {
        let mut blocks = mono.blocks.clone();
        blocks.sort();
        if blocks.is_empty()
            || blocks[0].lo != p.i
            || blocks.last().unwrap().hi != p.n
            || blocks.windows(2).any(|w| w[0].hi != w[1].lo)
        {
            return Err(Error::NotFull(format!(
                "blocks do not tile [{}..{}): {:?}",
                p.i,
                p.n,
                blocks.iter().map(|b| (b.lo, b.hi)).collect::<Vec<_>>()
            )));
        }
        let mcal: Vec<usize> = blocks[1..].iter().map(|b| b.lo).collect();
        let iseq: Vec<Multiset> = blocks.iter().map(|b| b.iset.clone()).collect();
        let jseq: Vec<Multiset> = blocks[1..].iter().map(|b| b.jset.clone()).collect();
        if blocks[0].jset != Multiset::copies(p.i as i64 - 1, p.d as usize) {
            return Err(Error::NotFull(format!(
                "base block must carry the implicit J, got {}",
                blocks[0].jset
            )));
        }
        let spec = ElemSpec::new(p.i, p.n, p.d, mcal, iseq, jseq)?;
        let expansion = elementary_expression(&spec)?;
        let mono_pairs: BTreeSet<(usize, usize)> = mono.den.iter().copied().collect();
        let mut cofactor = mono.num.clone();
        for &(a, b) in all_pairs.difference(&mono_pairs) {
            cofactor = &cofactor * &den_factor(p.i, a, b);
        }
        for (nmat, coef) in expansion.terms() {
            let contrib = &cofactor * coef;
            acc.entry(nmat.clone())
                .and_modify(|f| *f = &*f + &contrib)
                .or_insert(contrib);
        }
    }
    let mut out = HypElement::zero(p.n);
    for (nmat, num) in acc {
        let poly = exact_div(&num, &full_den).map_err(|_| {
            Error::DenominatorSurvived(format!("coefficient of {nmat} is not polynomial"))
        })?;
        out.add_term(nmat, poly);
    }
    Ok(out)
}

/// The divided operator computed directly on expansions: starting from
/// the cut-free spec, repeatedly subtract the cut image and divide by
/// `C(i,m) − u_m`, consuming the cut columns in increasing order.
///
/// ```
/// use branchcrit::hyperalg::UTMatrix;
/// use branchcrit::lowering::t_eval;
/// use branchcrit::msets::Multiset;
/// let x = t_eval(1, 3, 1, &[2], &Multiset::new()).unwrap();
/// assert_eq!(x.num_terms(), 1);
/// assert!(!x.coeff(&UTMatrix::e(3, 1, 3)).is_zero());
/// ```
pub fn t_eval(i: usize, n: usize, d: i64, mcal: &[usize], iset: &Multiset) -> Result<HypElement> {
    if mcal.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidSpec(format!("cut list not strictly increasing: {mcal:?}")));
    }
    if mcal.iter().any(|&m| m <= i || m >= n) {
        return Err(Error::InvalidSpec(format!("cuts {mcal:?} must lie in ({i}..{n})")));
    }
    if mcal.is_empty() {
        let spec = ElemSpec::new(i, n, d, vec![], vec![iset.clone()], vec![])?;
        return elementary_expression(&spec);
    }
    let m = mcal[0];
    let prev = t_eval(i, n, d, &mcal[1..], iset)?;
    let cut = sigma_elem(i, m, i, &prev)?;
    let divisor = &cdiff(i, m) - &uvar(m);
    divide_elem(&prev.add(&cut.scale(&IntPoly::constant(-1))), &divisor)
}

// ---------------------------------------------------------------------------
// The specialized operator

/// Input for the specialized operator: the base column `i`, the ambient
/// size `n`, the drop `d`, a point set `M ⊆ (i..n)×ℤ` with at most one
/// point per column, and a multiset `I` with entries in `[i..n)` of
/// length at most `d`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LoweringSpec {
    pub i: usize,
    pub n: usize,
    pub d: i64,
    pub m: PointSet,
    pub iset: Multiset,
}

impl LoweringSpec {
    pub fn new(i: usize, n: usize, d: i64, m: PointSet, iset: Multiset) -> Result<Self> {
        if !(1 <= i && i < n) {
            return Err(Error::InvalidSpec(format!("need 1 ≤ i < n, got i={i}, n={n}")));
        }
        if d < 1 {
            return Err(Error::InvalidSpec(format!("need d ≥ 1, got d={d}")));
        }
        let mut cols = BTreeSet::new();
        for &(t, _) in &m {
            if t <= i as i64 || t >= n as i64 {
                return Err(Error::InvalidSpec(format!(
                    "point column {t} outside ({i}..{n})"
                )));
            }
            if !cols.insert(t) {
                return Err(Error::InvalidSpec(format!("two points in column {t}")));
            }
        }
        if iset.len() as i64 > d {
            return Err(Error::InvalidSpec(format!(
                "multiset length {} exceeds d = {d}",
                iset.len()
            )));
        }
        if iset.entries().any(|e| e < i as i64 || e >= n as i64) {
            return Err(Error::InvalidSpec(format!("entries of {iset} outside [{i}..{n})")));
        }
        Ok(LoweringSpec { i, n, d, m, iset })
    }

    /// The cut columns: first coordinates of the point set.
    pub fn columns(&self) -> Vec<usize> {
        self.m.iter().map(|&(t, _)| t as usize).collect()
    }
}

/// The specialized operator: the divided operator for the spec's columns
/// with each `u_t` replaced by the row of the point in column `t`. The
/// result carries no shift variables; its Cartan coefficients stay
/// symbolic. Requires `d < p`.
pub fn script_t(spec: &LoweringSpec, p: u64) -> Result<HypElement> {
    if spec.d >= p as i64 {
        return Err(Error::DGreaterEqualP { d: spec.d, p: p as i64 });
    }
    let x = t_eval(spec.i, spec.n, spec.d, &spec.columns(), &spec.iset)?;
    let assignments: BTreeMap<u32, IntPoly> = spec
        .m
        .iter()
        .map(|&(t, h)| (t as u32, IntPoly::constant(h)))
        .collect();
    let y = x.map_coeffs(|c| Ok(subst_u(c, &assignments)))?;
    for (nmat, coef) in y.terms() {
        for (mono, _) in coef.terms() {
            for (v, _) in mono.vars() {
                if let Var::U(t) = v {
                    return Err(Error::UnassignedVariable(format!(
                        "u_{t} survives in the coefficient of {nmat}"
                    )));
                }
            }
        }
    }
    Ok(y)
}

/// The specialized operator reduced at a weight: evaluate every Cartan
/// coefficient at `λ` and reduce mod `p`.
pub fn script_t_specialized(
    spec: &LoweringSpec,
    lambda: &Weight,
    p: u64,
) -> Result<FpHypVector> {
    let y = script_t(spec, p)?;
    specialize_elem(&y, lambda, &BTreeMap::new(), p)
}

// ---------------------------------------------------------------------------
// Coefficient homomorphisms

/// The entry of `kappa` at column `t`, with `q_t = 0` for `t ≤ i`.
fn q_of(kappa: &[i64], i: usize, t: usize) -> i64 {
    if t <= i {
        0
    } else {
        kappa[t - i - 1]
    }
}

/// The scalar-part image of one block under the `kappa`-indexed
/// homomorphism. Zero when a binomial support is violated; otherwise the
/// product over the block's columns of factorial, binomial, gap-free
/// falling-quotient, and Cartan falling factors, with the shift-variable
/// prefactor.
fn cf_block(i: usize, d: i64, b: &FormalBlock, kappa: &[i64]) -> Result<IntPoly> {
    for t in b.lo..b.hi {
        let a = d - b.iset.count_le(t as i64) as i64 - b.jset.count_ge(t as i64) as i64;
        if a < 0 {
            return Err(Error::InvalidSpec(format!(
                "block [{}..{}) has positive weight at column {t}",
                b.lo, b.hi
            )));
        }
    }
    let mut res = falling(&u_of(i, b.lo), b.jset.count_ge(b.lo as i64) as i64)?;
    for t in b.lo + 1..=b.hi {
        let tt = t as i64;
        let q = q_of(kappa, i, t);
        let jt2 = b.jset.count_eq(tt - 2) as i64;
        let it1 = b.iset.count_eq(tt - 1) as i64;
        let ile = b.iset.count_le(tt - 1) as i64;
        let jge = b.jset.count_ge(tt) as i64;
        let jge1 = b.jset.count_ge(tt - 1) as i64;
        let b1 = binom(it1, it1 - jt2 + q);
        let b2 = binom(d - ile - jge1, q);
        if b1.is_zero() || b2.is_zero() {
            return Ok(IntPoly::zero());
        }
        let seed = &cdiff(b.lo, t) + &u_of(i, b.lo);
        let frac = falling_with_gap(&seed, d - ile, jge, jge1 + q);
        let hfall = falling(&(&hvar(t - 1) - &hvar(t)), q)?;
        res = &res * &(&frac * &hfall).scale(&(factorial(jt2 as u64) * b1 * b2));
    }
    Ok(res)
}

/// The `kappa`-indexed scalar homomorphism on a formal polynomial:
/// blockwise product, identity on coefficients, denominators cleared at
/// the end. Requires every block to have weight ≤ 0.
pub fn cf_kappa(p: &FormalPoly, kappa: &[i64]) -> Result<IntPoly> {
    assert_eq!(kappa.len(), p.n - p.i, "kappa must have one entry per column in (i..n]");
    let mut acc = FracPoly::zero();
    for mono in &p.monomials {
        let mut num = mono.num.clone();
        for b in &mono.blocks {
            num = &num * &cf_block(p.i, p.d, b, kappa)?;
        }
        let mut den = IntPoly::one();
        for &(a, b) in &mono.den {
            den = &den * &den_factor(p.i, a, b);
        }
        acc = &acc + &FracPoly::new(num, den);
    }
    acc.to_poly()
        .map_err(|_| Error::DenominatorSurvived("scalar part is not polynomial".into()))
}

/// The per-column support bounds of one monomial: those `q_t` outside the
/// box make the blockwise image vanish. `None` when some column's box is
/// empty.
fn kappa_box(p: &FormalPoly, mono: &FormalMonomial) -> Result<Option<Vec<(i64, i64)>>> {
    let mut bounds = vec![None; p.n - p.i];
    for b in &mono.blocks {
        for t in b.lo + 1..=b.hi {
            if t <= p.i {
                continue;
            }
            let tt = t as i64;
            let jt2 = b.jset.count_eq(tt - 2) as i64;
            let it1 = b.iset.count_eq(tt - 1) as i64;
            let ile = b.iset.count_le(tt - 1) as i64;
            let jge1 = b.jset.count_ge(tt - 1) as i64;
            let lo = (jt2 - it1).max(0);
            let hi = jt2.min(p.d - ile - jge1);
            bounds[t - p.i - 1] = Some((lo, hi));
        }
    }
    let mut out = Vec::with_capacity(bounds.len());
    for (idx, b) in bounds.into_iter().enumerate() {
        let (lo, hi) = b.ok_or_else(|| {
            Error::NotFull(format!("column {} covered by no block", p.i + 1 + idx))
        })?;
        if lo > hi {
            return Ok(None);
        }
        out.push((lo, hi));
    }
    Ok(Some(out))
}

/// The total scalar homomorphism: the sum of the `kappa`-indexed images
/// over the finite support. Requires every monomial to tile `(i..n]`.
pub fn cf_total(p: &FormalPoly) -> Result<IntPoly> {
    let mut kappas: BTreeSet<Vec<i64>> = BTreeSet::new();
    for mono in &p.monomials {
        let Some(bounds) = kappa_box(p, mono)? else { continue };
        let mut stack = vec![Vec::new()];
        for &(lo, hi) in &bounds {
            let mut next = Vec::new();
            for partial in &stack {
                for q in lo..=hi {
                    let mut ext = partial.clone();
                    ext.push(q);
                    next.push(ext);
                }
            }
            stack = next;
        }
        kappas.extend(stack);
    }
    let mut acc = IntPoly::zero();
    for kappa in kappas {
        acc = &acc + &cf_kappa(p, &kappa)?;
    }
    Ok(acc)
}

/// The combinatorial scalar factor of an interval `[k..j)` with data
/// `(I, J)`: the product over `t = k+1..j` of
/// `|J|^{{t−2}}!·binom(|I|^{{t−1}}, |I|^{{t−1}}−|J|^{{t−2}}+q_t)·
/// binom(d−|I|^{(−∞..t−1]}−|J|^{[t−1..∞)}, q_t)·(H_{t−1}−H_t)^{falling q_t}`.
pub fn cf_interval(
    i: usize,
    d: i64,
    k: usize,
    j: usize,
    iset: &Multiset,
    jset: &Multiset,
    kappa: &[i64],
) -> Result<IntPoly> {
    let mut res = IntPoly::one();
    for t in k + 1..=j {
        let tt = t as i64;
        let q = q_of(kappa, i, t);
        let jt2 = jset.count_eq(tt - 2) as i64;
        let it1 = iset.count_eq(tt - 1) as i64;
        let top = d - iset.count_le(tt - 1) as i64 - jset.count_ge(tt - 1) as i64;
        if top < 0 {
            return Err(Error::InvalidSpec(format!(
                "interval [{k}..{j}) has positive weight at column {}",
                t - 1
            )));
        }
        let b1 = binom(it1, it1 - jt2 + q);
        let b2 = binom(top, q);
        if b1.is_zero() || b2.is_zero() {
            return Ok(IntPoly::zero());
        }
        let hfall = falling(&(&hvar(t - 1) - &hvar(t)), q)?;
        res = &res * &hfall.scale(&(factorial(jt2 as u64) * b1 * b2));
    }
    Ok(res)
}

/// The staircase strip attached to `(J, kappa)` over the interval
/// `(k..j]`: the points `(t,h)` with `|J|^{[t..∞)} ≤ h ≤ |J|^{[t−1..∞)} + q_t`.
pub fn delta_kappa(
    i: usize,
    k: usize,
    j: usize,
    jset: &Multiset,
    kappa: &[i64],
) -> PointSet {
    let mut out = PointSet::new();
    for t in k + 1..=j {
        let tt = t as i64;
        let lo = jset.count_ge(tt) as i64;
        let hi = jset.count_ge(tt - 1) as i64 + q_of(kappa, i, t);
        for h in lo..=hi {
            out.insert((tt, h));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::planegeo::Diagram;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn ms(entries: &[i64]) -> Multiset {
        Multiset::from_entries(entries.iter().copied())
    }

    fn simple_spec(i: usize, n: usize, d: i64) -> ElemSpec {
        ElemSpec::new(i, n, d, vec![], vec![Multiset::new()], vec![]).unwrap()
    }

    /// `d!·F^{(d)}` as a bare element: single matrix `d·e(1,2)`.
    #[test]
    fn expansion_of_the_cut_free_rank_one_spec() {
        for d in 1..=4i64 {
            let s = simple_spec(1, 2, d);
            let e = elementary_expression(&s).unwrap();
            assert_eq!(e.num_terms(), 1);
            let mut nm = UTMatrix::zero(2);
            nm.set(1, 2, d as u32);
            assert_eq!(e.coeff(&nm), IntPoly::constant(factorial(d as u64)));
        }
    }

    /// Two matrices at `n = 3`, `d = 1`: the straight drop carries the
    /// Cartan factor `1 + H₁ − H₂`, the two-step route carries 1.
    #[test]
    fn expansion_of_the_two_column_spec() {
        let s = simple_spec(1, 3, 1);
        let e = elementary_expression(&s).unwrap();
        assert_eq!(e.num_terms(), 2);
        let direct = UTMatrix::e(3, 1, 3);
        let mut two_step = UTMatrix::zero(3);
        two_step.set(1, 2, 1);
        two_step.set(2, 3, 1);
        let expected = &(&IntPoly::one() + &hvar(1)) - &hvar(2);
        assert_eq!(e.coeff(&direct), expected);
        assert_eq!(e.coeff(&two_step), IntPoly::one());
    }

    /// A weight-zero spec expands to the zero matrix alone, with the
    /// closed factorial product as its coefficient.
    #[test]
    fn expansion_of_a_weight_zero_spec() {
        let s = ElemSpec::new(1, 2, 2, vec![], vec![ms(&[1, 1])], vec![]).unwrap();
        assert_eq!(weight_of_spec(&s).unwrap(), vec![0]);
        let e = elementary_expression(&s).unwrap();
        assert_eq!(e.num_terms(), 1);
        assert_eq!(e.coeff(&UTMatrix::zero(2)), IntPoly::constant(2));
    }

    #[test]
    fn spec_validation_rejects_bad_data() {
        assert!(ElemSpec::new(1, 3, 1, vec![], vec![ms(&[2]), ms(&[])], vec![]).is_err());
        assert!(ElemSpec::new(1, 3, 1, vec![1], vec![ms(&[]), ms(&[])], vec![ms(&[])]).is_err());
        assert!(ElemSpec::new(1, 3, 1, vec![2], vec![ms(&[]), ms(&[0])], vec![ms(&[])]).is_err());
        // Junction balance: at the cut 2 the left entry count plus the
        // implicit count must match the right side.
        assert!(ElemSpec::new(1, 3, 1, vec![2], vec![ms(&[]), ms(&[1])], vec![ms(&[1])]).is_err());
        assert!(ElemSpec::new(1, 3, 1, vec![2], vec![ms(&[1]), ms(&[])], vec![ms(&[2])]).is_ok());
    }

    #[test]
    fn weight_of_the_cut_free_empty_spec_is_flat() {
        let s = simple_spec(2, 5, 3);
        assert_eq!(weight_of_spec(&s).unwrap(), vec![0, -3, -3, -3]);
    }

    #[test]
    fn weight_shifts_by_one_when_the_last_block_gains_the_top_entry() {
        let base = simple_spec(1, 4, 2);
        let grown = ElemSpec::new(1, 4, 2, vec![], vec![ms(&[3])], vec![]).unwrap();
        let mut w = weight_of_spec(&base).unwrap();
        w[2] += 1;
        assert_eq!(weight_of_spec(&grown).unwrap(), w);
    }

    /// Splitting a block at an interior column with the four cuts leaves
    /// the weight unchanged.
    #[test]
    fn weight_is_invariant_under_block_splitting() {
        let iset = ms(&[1, 2]);
        let whole = ElemSpec::new(1, 4, 2, vec![], vec![iset.clone()], vec![]).unwrap();
        let split = ElemSpec::new(
            1,
            4,
            2,
            vec![2],
            vec![iset.cut_lup(2), iset.cut_rup(2)],
            vec![Multiset::copies(0, 2).cut_r(2)],
        )
        .unwrap();
        assert_eq!(weight_of_spec(&whole).unwrap(), weight_of_spec(&split).unwrap());
    }

    fn assert_rule_matches(l: usize, spec: &ElemSpec) {
        let lhs = e_times_s(l, spec).unwrap();
        let rhs = rule_rhs(l, spec).unwrap();
        assert_eq!(lhs, rhs, "rule mismatch at l={l} for {spec:?}");
    }

    #[test]
    fn raising_rule_below_the_base_column_vanishes() {
        let s = simple_spec(2, 4, 1);
        assert!(e_times_s(1, &s).unwrap().is_zero());
        assert!(rule_rhs(1, &s).unwrap().is_zero());
    }

    #[test]
    fn raising_rule_anchors() {
        // Top rule at the two-column spec.
        assert_rule_matches(2, &simple_spec(1, 3, 1));
        // Interior rule at the base column: the first summand dies.
        assert_rule_matches(1, &simple_spec(1, 3, 1));
        // Junction rule at a genuine cut.
        let s = ElemSpec::new(1, 3, 1, vec![2], vec![ms(&[1]), ms(&[])], vec![ms(&[2])]).unwrap();
        assert_rule_matches(1, &s);
        assert_rule_matches(2, &s);
    }

    /// Draw a random valid spec: random cuts, random I-blocks, then
    /// J-lengths solved from the junction balance left to right.
    fn random_spec(rng: &mut ChaCha8Rng, n_max: usize, d_max: i64) -> Option<ElemSpec> {
        let n = rng.gen_range(2..=n_max);
        let i = rng.gen_range(1..n);
        let d = rng.gen_range(1..=d_max);
        let mut mcal = Vec::new();
        for m in i + 1..n {
            if rng.gen_bool(0.4) {
                mcal.push(m);
            }
        }
        let cuts: Vec<usize> = std::iter::once(i)
            .chain(mcal.iter().copied())
            .chain(std::iter::once(n))
            .collect();
        let k = mcal.len();
        let mut iseq = Vec::new();
        for s in 1..=k + 1 {
            let lo = if s == 1 { i as i64 } else { cuts[s - 1] as i64 - 1 };
            let hi = cuts[s] as i64;
            let len = rng.gen_range(0..=d as usize);
            let mut entries = Vec::new();
            for _ in 0..len {
                entries.push(rng.gen_range(lo..hi));
            }
            iseq.push(ms(&entries));
        }
        let mut jseq: Vec<Multiset> = Vec::new();
        for s in 1..=k {
            let ms_col = cuts[s] as i64;
            let jprev = if s == 1 {
                Multiset::copies(i as i64 - 1, d as usize)
            } else {
                jseq[s - 2].clone()
            };
            let need = iseq[s - 1].len() as i64 + jprev.count_eq(ms_col - 1) as i64
                - iseq[s].count_eq(ms_col - 1) as i64;
            if need < 0 {
                return None;
            }
            let lo = ms_col - 1;
            let hi = cuts[s + 1] as i64;
            let mut entries = Vec::new();
            for _ in 0..need {
                entries.push(rng.gen_range(lo..hi));
            }
            jseq.push(ms(&entries));
        }
        ElemSpec::new(i, n, d, mcal, iseq, jseq).ok()
    }

    /// Dual route over a random sweep, counting how often each rule fires.
    #[test]
    fn raising_rules_match_the_action_on_random_specs() {
        let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0001);
        let mut hits: BTreeMap<&'static str, usize> = BTreeMap::new();
        let mut done = 0;
        while done < 60 {
            let Some(spec) = random_spec(&mut rng, 4, 3) else { continue };
            for l in 1..spec.n {
                let name = match rule_case(l, &spec) {
                    RuleCase::Below => "below",
                    RuleCase::Interior(_) => "interior",
                    RuleCase::AtCut(_) => "at_cut",
                    RuleCase::Top => "top",
                };
                *hits.entry(name).or_default() += 1;
                assert_rule_matches(l, &spec);
            }
            done += 1;
        }
        for case in ["interior", "at_cut", "top"] {
            assert!(hits.get(case).copied().unwrap_or(0) >= 3, "case {case} undersampled: {hits:?}");
        }
    }

    #[test]
    fn closed_raised_scalar_for_the_rank_one_spec() {
        for d in 1..=4i64 {
            let s = simple_spec(1, 2, d);
            let expect = falling(&(&hvar(1) - &hvar(2)), d).unwrap();
            assert_eq!(p_coefficient(&s).unwrap(), expect);
        }
    }

    #[test]
    fn closed_raised_scalar_vanishes_on_positive_weight() {
        // Entries pushing a simple-root coefficient positive.
        let s = ElemSpec::new(1, 3, 1, vec![], vec![ms(&[1, 1])], vec![]).unwrap();
        assert!(weight_of_spec(&s).unwrap()[0] > 0);
        assert!(p_coefficient(&s).unwrap().is_zero());
    }

    #[test]
    fn closed_raised_scalar_matches_raising_the_expansion() {
        let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0002);
        let mut done = 0;
        while done < 40 {
            let Some(spec) = random_spec(&mut rng, 4, 3) else { continue };
            let a = raising_profile(&spec).unwrap();
            let closed = p_coefficient(&spec).unwrap();
            if a.iter().any(|&x| x < 0) {
                assert!(closed.is_zero());
            } else {
                let raised = crate::hyperalg::raise_divided(
                    &a,
                    &elementary_expression(&spec).unwrap(),
                )
                .unwrap();
                assert_eq!(closed, raised, "mismatch for {spec:?}");
            }
            done += 1;
        }
    }

    fn j0(i: usize, d: i64) -> Multiset {
        Multiset::copies(i as i64 - 1, d as usize)
    }

    #[test]
    fn divided_operator_with_no_cuts_is_the_block_symbol() {
        let t = build_t_formal(1, 3, 1, 1, 3, &[], &Multiset::new(), &j0(1, 1)).unwrap();
        assert_eq!(t.monomials.len(), 1);
        assert!(t.monomials[0].den.is_empty());
        assert_eq!(t.monomials[0].blocks.len(), 1);
        t.check_regular().unwrap();
    }

    #[test]
    fn divided_operator_with_one_cut_has_two_denominated_monomials() {
        let t = build_t_formal(1, 4, 2, 1, 4, &[2], &ms(&[1, 3]), &j0(1, 2)).unwrap();
        assert_eq!(t.monomials.len(), 2);
        for mono in &t.monomials {
            assert_eq!(mono.den, vec![(1, 2)]);
        }
        t.check_regular().unwrap();
    }

    /// Cutting below the least interior cut factorizes the divided
    /// operator into a block symbol times the shifted divided operator.
    #[test]
    fn cutting_factorizes_the_divided_operator() {
        let i = 1;
        let (n, d) = (5, 2);
        let iset = ms(&[1, 3]);
        let t = build_t_formal(i, n, d, 1, 5, &[3, 4], &iset, &j0(i, d)).unwrap();
        for m0 in 2..3usize.min(3) {
            let cut = sigma_formal(1, m0, &t).unwrap();
            let left = build_t_formal(i, n, d, 1, m0, &[], &iset.cut_lup(m0 as i64), &j0(i, d).cut_l(m0 as i64)).unwrap();
            let right = build_t_formal(
                i,
                n,
                d,
                m0,
                5,
                &[3, 4],
                &iset.cut_rup(m0 as i64),
                &j0(i, d).cut_r(m0 as i64),
            )
            .unwrap();
            assert!(formal_eq(&cut, &left.mul(&right)), "factorization fails at m0={m0}");
        }
    }

    #[test]
    fn raising_endomorphism_adjoin_examples() {
        // Variant one at l = lo − 1 adjoins to J.
        let p = build_t_formal(2, 5, 2, 3, 5, &[], &ms(&[2, 3]), &ms(&[2, 4])).unwrap();
        let img = rho(RhoTag::R1, 2, &p);
        let expect = build_t_formal(2, 5, 2, 3, 5, &[], &ms(&[2, 3]), &ms(&[2, 2, 4])).unwrap();
        assert!(formal_eq(&img, &expect));
        // Variant three at l = hi − 1 adjoins to I.
        let q = build_t_formal(1, 4, 1, 1, 4, &[2], &Multiset::new(), &j0(1, 1)).unwrap();
        let img3 = rho(RhoTag::R3, 3, &q);
        let expect3 = build_t_formal(1, 4, 1, 1, 4, &[2], &ms(&[3]), &j0(1, 1)).unwrap();
        assert!(formal_eq(&img3, &expect3));
        // Out-of-range index fixes the operator.
        let r = build_t_formal(1, 5, 1, 3, 5, &[], &ms(&[3]), &ms(&[2])).unwrap();
        assert!(formal_eq(&rho(RhoTag::R1, 1, &r), &r));
    }

    /// Variant one moves a J-entry up; on the divided operator the image
    /// is the divided operator of the moved data.
    #[test]
    fn raising_variant_one_commutes_with_division() {
        let (i, n, d) = (1, 5, 2);
        let t = build_t_formal(i, n, d, 2, 5, &[3], &ms(&[1, 2]), &ms(&[2, 3])).unwrap();
        // Interior move at l = 3: J gains 3 for 2.
        let img = rho(RhoTag::R1, 3, &t);
        let expect = build_t_formal(i, n, d, 2, 5, &[3], &ms(&[1, 2]), &ms(&[3, 3]))
            .unwrap()
            .scale(&IntPoly::constant(-1));
        assert!(formal_eq(&img, &expect));
        // At l = k − 1 = 1 the image adjoins to J.
        let img2 = rho(RhoTag::R1, 1, &t);
        let expect2 = build_t_formal(i, n, d, 2, 5, &[3], &ms(&[1, 2]), &ms(&[1, 2, 3])).unwrap();
        assert!(formal_eq(&img2, &expect2));
    }

    /// The second variant on a divided operator: zero off cuts, and the
    /// split product at a cut.
    #[test]
    fn raising_variant_two_splits_at_cuts() {
        let (i, n, d) = (1, 5, 2);
        let iset = ms(&[1, 2]);
        let t = build_t_formal(i, n, d, 2, 5, &[4], &iset, &ms(&[2, 3])).unwrap();
        // l + 1 = 3 is no cut: the difference vanishes.
        assert!(
            rho2(2, &t).is_structurally_zero()
                || formal_eq(&rho2(2, &t), &FormalPoly::zero(i, n, d))
        );
        // l + 1 = 4 is the cut: minus the split product.
        let img = rho2(3, &t);
        let left = build_t_formal(i, n, d, 2, 4, &[], &iset.cut_lup(4).adjoin(3), &ms(&[2, 3]).cut_l(4)).unwrap();
        let right = build_t_formal(i, n, d, 4, 5, &[], &iset.cut_rup(4), &ms(&[2, 3]).cut_r(4).adjoin(3)).unwrap();
        let expect = left.mul(&right).neg();
        assert!(formal_eq(&img, &expect));
    }

    /// Both halves of the second variant at the left edge, and the full
    /// second variant at the right edge with its cut-indexed sum.
    #[test]
    fn raising_variant_two_edge_rules() {
        let (i, n, d) = (1, 6, 2);
        let iset = ms(&[2, 3]);
        let jset = ms(&[2, 4]);
        let mcal = vec![4];
        let t = build_t_formal(i, n, d, 3, 6, &mcal, &iset, &jset).unwrap();
        // Left edge l = k − 1 = 2.
        let grown = build_t_formal(i, n, d, 3, 6, &mcal, &iset, &jset.adjoin(2)).unwrap();
        assert!(formal_eq(&rho(RhoTag::R2L, 2, &t), &grown));
        let mult = &(&uvar(3) - &IntPoly::constant(d))
            + &IntPoly::constant(iset.count_eq(2) as i64);
        assert!(formal_eq(&rho(RhoTag::R2R, 2, &t), &grown.scale(&mult)));
        // Right edge l = j − 1 = 5.
        let img_l = rho(RhoTag::R2L, 5, &t);
        let mult_top = &(&(&cdiff(3, 6) + &uvar(3)) - &IntPoly::constant(d))
            + &IntPoly::constant(iset.len() as i64);
        let mut expect = build_t_formal(i, n, d, 3, 6, &mcal, &iset.adjoin(5), &jset)
            .unwrap()
            .scale(&mult_top);
        for &q in &mcal {
            let left = build_t_formal(i, n, d, 3, q, &[], &iset.cut_lup(q as i64), &jset.cut_l(q as i64)).unwrap();
            let right = build_t_formal(
                i,
                n,
                d,
                q,
                6,
                &[],
                &iset.cut_rup(q as i64).adjoin(5),
                &jset.cut_r(q as i64),
            )
            .unwrap();
            expect = expect.add(&left.mul(&right));
        }
        assert!(formal_eq(&img_l, &expect));
        let img_r = rho(RhoTag::R2R, 5, &t);
        let expect_r = build_t_formal(i, n, d, 3, 6, &mcal, &iset.adjoin(5), &jset).unwrap();
        assert!(formal_eq(&img_r, &expect_r));
    }

    /// The third variant against its two-origin closed forms.
    #[test]
    fn raising_variant_three_origin_forms() {
        let (i, n, d) = (1, 6, 2);
        let iset = ms(&[2, 4]);
        let jset = ms(&[2, 3]);
        let mcal = vec![3];
        let t = build_t_formal(i, n, d, 2, 6, &mcal, &iset, &jset).unwrap();
        let l = 3usize;
        let lhs = rho(RhoTag::R3, l, &t);
        let ci = iset.count_eq(l as i64 + 1) as i64;
        // Origin at the interval start k = 2.
        let mult_k = &(&(&cdiff(2, l + 1) + &uvar(2)) - &IntPoly::constant(d))
            + &IntPoly::constant(iset.count_le(l as i64) as i64);
        let moved = iset.replace_one(l as i64 + 1, l as i64).unwrap();
        let mut rhs_k = build_t_formal(i, n, d, 2, 6, &mcal, &moved, &jset)
            .unwrap()
            .scale(&mult_k.scale(&BigInt::from(ci)));
        for &q in mcal.iter().filter(|&&q| 2 < q && q <= l + 1) {
            let left = build_t_formal(i, n, d, 2, q, &[], &moved.cut_lup(q as i64), &jset.cut_l(q as i64)).unwrap();
            let right = build_t_formal(
                i,
                n,
                d,
                q,
                6,
                &[],
                &iset.cut_rup(q as i64).replace_one(l as i64 + 1, l as i64).unwrap(),
                &jset.cut_r(q as i64),
            )
            .unwrap();
            rhs_k = rhs_k.add(&left.mul(&right).scale(&IntPoly::constant(ci)));
        }
        assert!(formal_eq(&lhs, &rhs_k), "origin at the interval start");
        // Origin at the cut 3 > k.
        let mp = 3usize;
        let mult_m = &(&(&cdiff(mp, l + 1) + &uvar(mp)) - &IntPoly::constant(d))
            + &IntPoly::constant(iset.count_le(l as i64) as i64);
        let mut rhs_m = build_t_formal(i, n, d, 2, 6, &mcal, &moved, &jset)
            .unwrap()
            .scale(&mult_m.scale(&BigInt::from(ci)));
        let dropped: Vec<usize> = mcal.iter().copied().filter(|&x| x != mp).collect();
        rhs_m = rhs_m.add(
            &build_t_formal(i, n, d, 2, 6, &dropped, &moved, &jset)
                .unwrap()
                .scale(&IntPoly::constant(ci)),
        );
        for &q in mcal.iter().filter(|&&q| mp < q && q <= l + 1) {
            let left = build_t_formal(i, n, d, 2, q, &[], &moved.cut_lup(q as i64), &jset.cut_l(q as i64)).unwrap();
            let right = build_t_formal(
                i,
                n,
                d,
                q,
                6,
                &[],
                &iset.cut_rup(q as i64).replace_one(l as i64 + 1, l as i64).unwrap(),
                &jset.cut_r(q as i64),
            )
            .unwrap();
            rhs_m = rhs_m.add(&left.mul(&right).scale(&IntPoly::constant(ci)));
        }
        assert!(formal_eq(&lhs, &rhs_m), "origin at the cut");
    }

    #[test]
    fn evaluation_of_a_block_symbol_is_its_expansion() {
        let p = build_t_formal(1, 3, 1, 1, 3, &[], &Multiset::new(), &j0(1, 1)).unwrap();
        let direct = elementary_expression(&simple_spec(1, 3, 1)).unwrap();
        assert_eq!(ev_formal(&p).unwrap(), direct);
    }

    /// The one-cut divided operator at `n = 3`, `d = 1` evaluates to the
    /// bare straight drop.
    #[test]
    fn evaluation_of_the_one_cut_operator() {
        let p = build_t_formal(1, 3, 1, 1, 3, &[2], &Multiset::new(), &j0(1, 1)).unwrap();
        let e = ev_formal(&p).unwrap();
        assert_eq!(e.num_terms(), 1);
        assert_eq!(e.coeff(&UTMatrix::e(3, 1, 3)), IntPoly::one());
        let direct = t_eval(1, 3, 1, &[2], &Multiset::new()).unwrap();
        assert_eq!(e, direct);
    }

    /// The recursion and the symbolic expansion agree on every cut set.
    #[test]
    fn divided_operator_dual_routes_agree() {
        for (n, d) in [(3usize, 1i64), (3, 2), (4, 1), (4, 2)] {
            let i = 1usize;
            let isets = [Multiset::new(), ms(&[1])];
            for iset in &isets {
                let interior: Vec<usize> = (i + 1..n).collect();
                for mask in 0..(1u32 << interior.len()) {
                    let mcal: Vec<usize> = interior
                        .iter()
                        .enumerate()
                        .filter(|(b, _)| mask & (1 << b) != 0)
                        .map(|(_, &m)| m)
                        .collect();
                    let via_recursion = t_eval(i, n, d, &mcal, iset).unwrap();
                    let formal = build_t_formal(i, n, d, i, n, &mcal, iset, &j0(i, d)).unwrap();
                    formal.check_regular().unwrap();
                    let via_formal = ev_formal(&formal).unwrap();
                    assert_eq!(
                        via_recursion, via_formal,
                        "routes disagree at n={n}, d={d}, cuts {mcal:?}, I={iset}"
                    );
                }
            }
        }
    }

    /// Raising the evaluated operator equals evaluating the combined
    /// raising endomorphism.
    #[test]
    fn raising_commutes_with_evaluation() {
        let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0003);
        for _ in 0..12 {
            let n = rng.gen_range(3..=4usize);
            let i = rng.gen_range(1..n.min(3));
            let d = rng.gen_range(1..=2i64);
            let interior: Vec<usize> = (i + 1..n).collect();
            let mcal: Vec<usize> =
                interior.into_iter().filter(|_| rng.gen_bool(0.5)).collect();
            let len = rng.gen_range(0..=d) as usize;
            let entries: Vec<i64> =
                (0..len).map(|_| rng.gen_range(i as i64..n as i64)).collect();
            let iset = ms(&entries);
            let p = build_t_formal(i, n, d, i, n, &mcal, &iset, &j0(i, d)).unwrap();
            let ev = ev_formal(&p).unwrap();
            for l in i..n {
                let lhs = e_action(l, &ev);
                let rhs = ev_formal(&rho_combined(l, &p)).unwrap();
                assert_eq!(lhs, rhs, "raising at l={l} for i={i}, n={n}, d={d}, cuts {mcal:?}, I={iset}");
            }
        }
    }

    #[test]
    fn specialized_operator_anchor() {
        let m: PointSet = [(2i64, 0i64)].into_iter().collect();
        let spec = LoweringSpec::new(1, 3, 1, m, Multiset::new()).unwrap();
        let y = script_t(&spec, 2).unwrap();
        assert_eq!(y.num_terms(), 1);
        assert_eq!(y.coeff(&UTMatrix::e(3, 1, 3)), IntPoly::one());
        let v = script_t_specialized(&spec, &vec![1, 0, 0], 2).unwrap();
        assert_eq!(v.get(&UTMatrix::e(3, 1, 3)), 1);
        assert_eq!(v.len(), 1);
    }

    #[test]
    fn specialized_operator_requires_small_drop() {
        let spec = LoweringSpec::new(1, 3, 2, PointSet::new(), Multiset::new()).unwrap();
        assert!(matches!(script_t(&spec, 2), Err(Error::DGreaterEqualP { .. })));
    }

    /// The divided operator only involves shift variables at its cut
    /// columns, so any values for the others leave the result unchanged.
    #[test]
    fn specialized_operator_ignores_unused_shifts() {
        let m: PointSet = [(2i64, 1i64)].into_iter().collect();
        let spec = LoweringSpec::new(1, 4, 2, m, ms(&[2])).unwrap();
        let x = t_eval(spec.i, spec.n, spec.d, &spec.columns(), &spec.iset).unwrap();
        let mut with_used: BTreeMap<u32, IntPoly> = BTreeMap::new();
        with_used.insert(2, IntPoly::constant(1));
        let mut with_extra = with_used.clone();
        with_extra.insert(3, IntPoly::constant(7));
        let a = x.map_coeffs(|c| Ok(subst_u(c, &with_used))).unwrap();
        let b = x.map_coeffs(|c| Ok(subst_u(c, &with_extra))).unwrap();
        assert_eq!(a, b);
        assert_eq!(a, script_t(&spec, 3).unwrap());
    }

    #[test]
    fn scalar_homomorphism_anchor() {
        for d in 1..=3i64 {
            let p = build_t_formal(1, 2, d, 1, 2, &[], &Multiset::new(), &j0(1, d)).unwrap();
            let kappa = vec![d];
            let expect = falling(&(&hvar(1) - &hvar(2)), d)
                .unwrap()
                .scale(&factorial(d as u64));
            assert_eq!(cf_kappa(&p, &kappa).unwrap(), expect);
            assert!(cf_kappa(&p, &[d - 1]).unwrap().is_zero());
            assert!(cf_kappa(&p, &[d + 1]).unwrap().is_zero());
            assert_eq!(cf_total(&p).unwrap(), expect);
        }
    }

    /// The total scalar homomorphism equals the fully raised coefficient
    /// times `a_{n−1}!`.
    #[test]
    fn scalar_homomorphism_matches_full_raising() {
        let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0004);
        for _ in 0..10 {
            let n = rng.gen_range(2..=4usize);
            let i = rng.gen_range(1..n);
            let d = rng.gen_range(1..=2i64);
            let interior: Vec<usize> = (i + 1..n).collect();
            let mcal: Vec<usize> =
                interior.into_iter().filter(|_| rng.gen_bool(0.5)).collect();
            let p = build_t_formal(i, n, d, i, n, &mcal, &Multiset::new(), &j0(i, d)).unwrap();
            let total = cf_total(&p).unwrap();
            let ev = ev_formal(&p).unwrap();
            let a: Vec<i64> = (1..n).map(|t| if t < i { 0 } else { d }).collect();
            let raised = crate::hyperalg::raise_divided(&a, &ev).unwrap();
            let expect = raised.scale(&factorial(d as u64));
            assert_eq!(total, expect, "mismatch at i={i}, n={n}, d={d}, cuts {mcal:?}");
        }
    }

    /// The `kappa`-image of a divided operator is exactly divisible by
    /// the combinatorial interval factor.
    #[test]
    fn scalar_image_divisible_by_the_interval_factor() {
        let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0005);
        let mut done = 0;
        while done < 12 {
            let n = rng.gen_range(3..=4usize);
            let i = rng.gen_range(1..n - 1);
            let d = rng.gen_range(1..=2i64);
            let k = i;
            let j = n;
            let interior: Vec<usize> = (k + 1..j).collect();
            let mcal: Vec<usize> =
                interior.into_iter().filter(|_| rng.gen_bool(0.5)).collect();
            let len = rng.gen_range(0..=d) as usize;
            let entries: Vec<i64> =
                (0..len).map(|_| rng.gen_range(i as i64..j as i64)).collect();
            let iset = ms(&entries);
            let jset = j0(i, d);
            let t = build_t_formal(i, n, d, k, j, &mcal, &iset, &jset).unwrap();
            if t.weight().unwrap().is_some_and(|w| w.iter().any(|&c| c > 0)) {
                continue;
            }
            let kappa: Vec<i64> = (0..n - i).map(|_| rng.gen_range(0..=d)).collect();
            let img = cf_kappa(&t, &kappa).unwrap();
            let factor = cf_interval(i, d, k, j, &iset, &jset, &kappa).unwrap();
            if factor.is_zero() {
                assert!(img.is_zero(), "image must vanish with its factor");
            } else {
                exact_div(&img, &factor).unwrap();
            }
            done += 1;
        }
    }

    /// Cutting commutes with the scalar homomorphism on cleared products.
    #[test]
    fn cutting_commutes_with_the_scalar_homomorphism() {
        let (i, n, d) = (1usize, 4usize, 2i64);
        let t = build_t_formal(i, n, d, i, n, &[2, 3], &ms(&[1]), &j0(i, d)).unwrap();
        for (m, mp) in [(1usize, 2usize), (1, 3), (2, 3)] {
            let cleared = mul_cdiff(&t, m, mp);
            let kappa = vec![1, 0, 1];
            let lhs = sigma(m, mp, i, &cf_kappa(&sigma_formal(m, mp, &cleared).unwrap(), &kappa).unwrap()).unwrap();
            let rhs = sigma(m, mp, i, &cf_kappa(&cleared, &kappa).unwrap()).unwrap();
            assert_eq!(lhs, rhs, "cut ({m},{mp})");
        }
    }

    /// Cutting commutes with evaluation on cleared products.
    #[test]
    fn cutting_commutes_with_evaluation() {
        let (i, n, d) = (1usize, 4usize, 2i64);
        for mcal in [vec![2], vec![3], vec![2, 3]] {
            let t = build_t_formal(i, n, d, i, n, &mcal, &ms(&[2]), &j0(i, d)).unwrap();
            for (m, mp) in [(1usize, 2usize), (1, 3), (2, 3)] {
                let cleared = mul_cdiff(&t, m, mp);
                let lhs = sigma_elem(m, mp, i, &ev_formal(&cleared).unwrap()).unwrap();
                let rhs = ev_formal(&sigma_formal(m, mp, &cleared).unwrap()).unwrap();
                assert_eq!(lhs, rhs, "cut ({m},{mp}) with cuts {mcal:?}");
            }
        }
    }

    /// The staircase strip transforms under the two cuts exactly as the
    /// interval bookkeeping displays.
    #[test]
    fn staircase_strip_bookkeeping() {
        let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0006);
        for _ in 0..40 {
            let i = rng.gen_range(1..3usize);
            let k = rng.gen_range(i - 1..i + 2);
            let j = rng.gen_range(k + 1..k + 4);
            let len = rng.gen_range(0..4usize);
            let entries: Vec<i64> =
                (0..len).map(|_| rng.gen_range(k as i64 - 1..j as i64)).collect();
            let jset = ms(&entries);
            let kappa: Vec<i64> = (0..(j.max(i + 1) - i)).map(|_| rng.gen_range(0..3)).collect();
            let base = delta_kappa(i, k, j, &jset, &kappa);
            // Clamping at j adds the full column j below the J-count.
            let clamped = delta_kappa(i, k, j, &jset.cut_l(j as i64), &kappa);
            let mut expect = base.clone();
            for h in 0..jset.count_ge(j as i64) as i64 {
                expect.insert((j as i64, h));
            }
            assert_eq!(clamped, expect);
            // Filtering at k changes nothing.
            let filtered = delta_kappa(i, k, j, &jset.cut_r(k as i64), &kappa);
            assert_eq!(filtered, base);
        }
    }

    /// The interval factor is multiplicative across a cut.
    #[test]
    fn interval_factor_splits_multiplicatively() {
        let (i, d) = (1usize, 3i64);
        let iset = ms(&[1, 2, 3]);
        let jset = ms(&[0, 0, 0]);
        let kappa = vec![1, 0, 2, 0];
        for m in 2..5usize {
            let whole = cf_interval(i, d, 1, 5, &iset, &jset, &kappa).unwrap();
            let left = cf_interval(i, d, 1, m, &iset.cut_lup(m as i64), &jset.cut_l(m as i64), &kappa).unwrap();
            let right = cf_interval(i, d, m, 5, &iset.cut_rup(m as i64), &jset.cut_r(m as i64), &kappa).unwrap();
            assert_eq!(whole, &left * &right, "split at {m}");
        }
    }

    /// The reduced product rule: after pinning each cut column's shift to
    /// a chosen target point, the scalar image collapses to the displayed
    /// product over the remaining staircase complement.
    #[test]
    fn scalar_image_product_rule_along_an_injection() {
        let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0007);
        let mut done = 0;
        'outer: while done < 8 {
            let n = rng.gen_range(3..=4usize);
            let i = rng.gen_range(1..n - 1);
            let d = rng.gen_range(1..=2i64);
            let (k, j) = (i, n);
            let interior: Vec<usize> = (k + 1..j).collect();
            let mcal: Vec<usize> =
                interior.into_iter().filter(|_| rng.gen_bool(0.6)).collect();
            if mcal.is_empty() {
                continue;
            }
            let iset = Multiset::new();
            let jset = j0(i, d);
            // Support box keeps the staircase inside the diagram.
            let kappa: Vec<i64> = (i + 1..=n)
                .map(|t| {
                    let tt = t as i64;
                    let jt2 = jset.count_eq(tt - 2) as i64;
                    jt2.min(d - jset.count_ge(tt - 1) as i64)
                })
                .collect();
            let diagram = Diagram::new(k as i64, j as i64, d, iset.clone());
            let sigma_set = diagram.sigma_members();
            let delta = delta_kappa(i, k, j, &jset, &kappa);
            if !delta.iter().all(|p| sigma_set.contains(p)) {
                continue;
            }
            let free: Vec<crate::Point> =
                sigma_set.difference(&delta).copied().collect();
            // Draw an injection: column t maps to a free point in a
            // column ≥ t, strictly right or below the staircase top.
            let mut used = BTreeSet::new();
            let mut iota = BTreeMap::new();
            for &t in &mcal {
                let choices: Vec<crate::Point> = free
                    .iter()
                    .copied()
                    .filter(|&(c, h)| {
                        !used.contains(&(c, h))
                            && (c > t as i64
                                || (c == t as i64 && h < jset.count_ge(t as i64) as i64))
                    })
                    .collect();
                if choices.is_empty() {
                    continue 'outer;
                }
                let pick = choices[rng.gen_range(0..choices.len())];
                used.insert(pick);
                iota.insert(t, pick);
            }
            let t_formal = build_t_formal(i, n, d, k, j, &mcal, &iset, &jset).unwrap();
            let img = cf_kappa(&t_formal, &kappa).unwrap();
            // Pin u_t to the target: u_t = h − C(t, c).
            let assignments: BTreeMap<u32, IntPoly> = iota
                .iter()
                .map(|(&t, &(c, h))| {
                    (t as u32, &IntPoly::constant(h) - &cdiff(t, c as usize))
                })
                .collect();
            let lhs = subst_u(&img, &assignments);
            let mut rhs = falling(&u_of(i, k), jset.count_ge(k as i64) as i64).unwrap();
            rhs = &rhs * &cf_interval(i, d, k, j, &iset, &jset, &kappa).unwrap();
            for &(c, h) in free.iter().filter(|p| !used.contains(*p)) {
                let factor = &(&cdiff(k, c as usize) + &u_of(i, k)) - &IntPoly::constant(h);
                rhs = &rhs * &factor;
            }
            let rhs = subst_u(&rhs, &assignments);
            assert_eq!(lhs, rhs, "product rule at i={i}, n={n}, d={d}, cuts {mcal:?}, iota {iota:?}");
            done += 1;
        }
    }
}
