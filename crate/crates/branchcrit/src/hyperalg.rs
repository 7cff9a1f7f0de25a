//! The integral form of the enveloping algebra, restricted to what the
//! lowering construction needs: strictly upper triangular exponent
//! matrices, elements `Σ F^(N)·H_N` with polynomial Cartan parts, the
//! left action of the raising generators modulo the raising ideal, and
//! an independent straightening engine for contravariant pairings.
//!
//! # Key operations
//! - `wt`, `enumerate_matrices` — flow vectors of exponent matrices and
//!   the fibre of matrices over a flow vector
//! - `e_action` — one raising generator applied to an element, reduced
//!   modulo the left ideal it generates
//! - `raise_divided` — a full divided-power raising word, returning the
//!   scalar part with an exactness check
//! - `sigma_elem`, `divide_elem`, `specialize_elem` — coefficient-wise
//!   substitution, exact division and reduction mod p
//! - `Straightener`, `straighten_pairing` — normal ordering of plain
//!   generator words over ℚ, used as the independent oracle for every
//!   closed product formula in this crate
//!
//! # Design notes
//! - Elements never carry raising parts. Every operation that would
//!   produce them discards such terms immediately; all downstream
//!   consumers only ever need results modulo the raising ideal, and the
//!   discarded terms stay inside that ideal under further left
//!   multiplication.
//! - The straightening engine works with non-divided generators and
//!   single commutator steps only, so its correctness rests on nothing
//!   but the bracket of matrix units; factorial normalization happens
//!   at the very end with an integrality assertion.

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use num_bigint::BigInt;
use num_traits::{One, Zero};

use crate::polyring::{exact_div, hvar, sigma, specialize, IntPoly};
use crate::{Error, Result, Weight};

/// `k!` as a big integer.
pub fn factorial(k: u64) -> BigInt {
    let mut acc = BigInt::one();
    for j in 2..=k {
        acc *= j;
    }
    acc
}

/// A strictly upper triangular matrix of nonnegative exponents, the
/// shape `N` of a basis monomial `F^(N)`.
///
/// Entries are addressed with 1-based indices `(a, b)`, `a < b`. The
/// derived order is row-major and is used everywhere deterministic
/// output matters.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct UTMatrix {
    n: usize,
    entries: Vec<u32>,
}

impl UTMatrix {
    pub fn zero(n: usize) -> Self {
        assert!(n >= 1, "matrix size must be positive");
        UTMatrix {
            n,
            entries: vec![0; n * n],
        }
    }

    /// The single-entry matrix `e_{a,b}`.
    pub fn e(n: usize, a: usize, b: usize) -> Self {
        let mut m = UTMatrix::zero(n);
        m.set(a, b, 1);
        m
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, a: usize, b: usize) -> u32 {
        assert!(1 <= a && a < b && b <= self.n, "need 1 ≤ a < b ≤ n");
        self.entries[(a - 1) * self.n + (b - 1)]
    }

    pub fn set(&mut self, a: usize, b: usize, v: u32) {
        assert!(1 <= a && a < b && b <= self.n, "need 1 ≤ a < b ≤ n");
        self.entries[(a - 1) * self.n + (b - 1)] = v;
    }

    /// Add `delta` to entry `(a, b)`, or `None` if it would go negative
    /// (the monomial with a negative exponent is zero).
    pub fn shift(&self, a: usize, b: usize, delta: i64) -> Option<UTMatrix> {
        let cur = self.get(a, b) as i64 + delta;
        if cur < 0 {
            return None;
        }
        let mut m = self.clone();
        m.set(a, b, u32::try_from(cur).expect("entry fits u32"));
        Some(m)
    }

    /// Column sum `N_t`.
    pub fn col_sum(&self, t: usize) -> i64 {
        (1..t).map(|a| self.get(a, t) as i64).sum()
    }

    /// Row sum `N^s`.
    pub fn row_sum(&self, s: usize) -> i64 {
        (s + 1..=self.n).map(|b| self.get(s, b) as i64).sum()
    }

    /// Flow `N(k) = Σ_{a ≤ k < b} N_{a,b}` across the cut between
    /// columns `k` and `k+1`; zero at `k = 0` and `k = n`.
    pub fn flow(&self, k: usize) -> i64 {
        let mut acc = 0;
        for a in 1..=k.min(self.n) {
            for b in (k + 1)..=self.n {
                acc += self.get(a, b) as i64;
            }
        }
        acc
    }

    pub fn total(&self) -> u64 {
        self.entries.iter().map(|&x| x as u64).sum()
    }

    pub fn is_zero(&self) -> bool {
        self.entries.iter().all(|&x| x == 0)
    }

    /// The product of entry factorials, the normalization between the
    /// divided-power monomial and the plain generator word.
    pub fn pbw_factor(&self) -> BigInt {
        let mut acc = BigInt::one();
        for &x in &self.entries {
            acc *= factorial(x as u64);
        }
        acc
    }

    /// All positions `(a, b, N_{a,b})` with a nonzero entry, row-major.
    pub fn support(&self) -> Vec<(usize, usize, u32)> {
        let mut out = Vec::new();
        for a in 1..self.n {
            for b in (a + 1)..=self.n {
                let v = self.get(a, b);
                if v > 0 {
                    out.push((a, b, v));
                }
            }
        }
        out
    }
}

impl fmt::Display for UTMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self
            .support()
            .into_iter()
            .map(|(a, b, v)| {
                if v == 1 {
                    format!("e[{a},{b}]")
                } else {
                    format!("{v}·e[{a},{b}]")
                }
            })
            .collect();
        if parts.is_empty() {
            write!(f, "0")
        } else {
            write!(f, "{}", parts.join(" + "))
        }
    }
}

/// The flow vector `(N(1), …, N(n−1))`: `F^(N)` has weight
/// `−Σ_t N(t)·α_t`. The balance law `N(l−1) − N(l) = N_l − N^l` is
/// asserted at every cut.
pub fn wt(m: &UTMatrix) -> Vec<i64> {
    let n = m.n();
    for l in 1..=n {
        assert_eq!(
            m.flow(l - 1) - m.flow(l),
            m.col_sum(l) - m.row_sum(l),
            "flow balance at cut {l}"
        );
    }
    (1..n).map(|k| m.flow(k)).collect()
}

/// All `N ∈ UT^{≥0}(n)` with the prescribed flow vector, ascending in
/// the row-major order. Any flow vector with a negative entry has an
/// empty fibre; every nonnegative one is hit (e.g. by simple-root
/// entries alone).
///
/// ```
/// use branchcrit::hyperalg::{enumerate_matrices, wt};
/// let mats = enumerate_matrices(3, &[1, 1]);
/// assert_eq!(mats.len(), 2);
/// for m in &mats {
///     assert_eq!(wt(m), vec![1, 1]);
/// }
/// ```
pub fn enumerate_matrices(n: usize, flows: &[i64]) -> Vec<UTMatrix> {
    assert_eq!(flows.len(), n - 1, "one flow per cut");
    if flows.iter().any(|&f| f < 0) {
        return Vec::new();
    }
    let mut out = Vec::new();
    let mut cur = UTMatrix::zero(n);
    let mut residual = flows.to_vec();
    // entries in row-major order; entry (a, b) feeds every cut in [a..b)
    let pairs: Vec<(usize, usize)> = (1..n)
        .flat_map(|a| ((a + 1)..=n).map(move |b| (a, b)))
        .collect();
    fn dfs(
        idx: usize,
        pairs: &[(usize, usize)],
        cur: &mut UTMatrix,
        residual: &mut Vec<i64>,
        out: &mut Vec<UTMatrix>,
    ) {
        if idx == pairs.len() {
            if residual.iter().all(|&r| r == 0) {
                out.push(cur.clone());
            }
            return;
        }
        let (a, b) = pairs[idx];
        // once row a is complete, nothing later can feed cut a
        let cap = (a..b).map(|k| residual[k - 1]).min().unwrap_or(0);
        for v in 0..=cap {
            cur.set(a, b, v as u32);
            for k in a..b {
                residual[k - 1] -= v;
            }
            let row_done = b == cur.n();
            if !(row_done && residual[a - 1] != 0) {
                dfs(idx + 1, pairs, cur, residual, out);
            }
            for k in a..b {
                residual[k - 1] += v;
            }
            cur.set(a, b, 0);
        }
    }
    dfs(0, &pairs, &mut cur, &mut residual, &mut out);
    out.sort();
    out
}

/// An element `Σ_N F^(N)·H_N` with `H_N` polynomial in the Cartan
/// generators and the auxiliary variables. Zero coefficients are never
/// stored.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HypElement {
    n: usize,
    terms: BTreeMap<UTMatrix, IntPoly>,
}

impl HypElement {
    pub fn zero(n: usize) -> Self {
        HypElement {
            n,
            terms: BTreeMap::new(),
        }
    }

    pub fn single(m: UTMatrix, h: IntPoly) -> Self {
        let mut x = HypElement::zero(m.n());
        x.add_term(m, h);
        x
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&UTMatrix, &IntPoly)> {
        self.terms.iter()
    }

    /// The `F^(N)`-coefficient; zero if absent.
    pub fn coeff(&self, m: &UTMatrix) -> IntPoly {
        self.terms.get(m).cloned().unwrap_or_else(IntPoly::zero)
    }

    pub fn add_term(&mut self, m: UTMatrix, h: IntPoly) {
        assert_eq!(m.n(), self.n, "matrix size mismatch");
        if h.is_zero() {
            return;
        }
        use std::collections::btree_map::Entry;
        match self.terms.entry(m) {
            Entry::Vacant(e) => {
                e.insert(h);
            }
            Entry::Occupied(mut e) => {
                let sum = e.get() + &h;
                if sum.is_zero() {
                    e.remove();
                } else {
                    *e.get_mut() = sum;
                }
            }
        }
    }

    pub fn add(&self, other: &HypElement) -> HypElement {
        assert_eq!(self.n, other.n, "size mismatch");
        let mut out = self.clone();
        for (m, h) in &other.terms {
            out.add_term(m.clone(), h.clone());
        }
        out
    }

    pub fn scale(&self, f: &IntPoly) -> HypElement {
        let mut out = HypElement::zero(self.n);
        for (m, h) in &self.terms {
            out.add_term(m.clone(), h * f);
        }
        out
    }

    /// Apply `f` to every coefficient, propagating the first error.
    pub fn map_coeffs<F>(&self, mut f: F) -> Result<HypElement>
    where
        F: FnMut(&IntPoly) -> Result<IntPoly>,
    {
        let mut out = HypElement::zero(self.n);
        for (m, h) in &self.terms {
            out.add_term(m.clone(), f(h)?);
        }
        Ok(out)
    }

    /// The common flow vector of all monomials, `Ok(None)` for the zero
    /// element, `MixedWeights` if two monomials disagree.
    pub fn weight(&self) -> Result<Option<Vec<i64>>> {
        let mut found: Option<Vec<i64>> = None;
        for m in self.terms.keys() {
            let w = wt(m);
            match &found {
                None => found = Some(w),
                Some(prev) if *prev != w => return Err(Error::MixedWeights),
                _ => {}
            }
        }
        Ok(found)
    }
}

impl fmt::Display for HypElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return write!(f, "0");
        }
        let parts: Vec<String> = self
            .terms
            .iter()
            .map(|(m, h)| format!("F({m})·({h})"))
            .collect();
        write!(f, "{}", parts.join(" + "))
    }
}

/// Left multiplication by the raising generator `E_l`, reduced modulo
/// the left ideal `U·E_l`:
///
/// ```text
/// [E_l, F^(N)] = Σ_{1≤s<l} (N_{s,l}+1)·F^(N − e_{s,l+1} + e_{s,l})
///   + F^(N − e_{l,l+1})·(H_l − H_{l+1} + 1 − Σ_{l<b≤n} N_{l,b}
///                                         + Σ_{l+1<b≤n} N_{l+1,b})
///   − Σ_{l+1<t≤n} (N_{l+1,t}+1)·F^(N − e_{l,t} + e_{l+1,t})
/// ```
///
/// applied term by term; the `F^(N)·(…)·E_l` tail is dropped.
pub fn e_action(l: usize, x: &HypElement) -> HypElement {
    let n = x.n();
    assert!(1 <= l && l < n, "need 1 ≤ l ≤ n−1");
    let mut out = HypElement::zero(n);
    for (mat, h) in x.terms() {
        for s in 1..l {
            if let Some(m1) = mat.shift(s, l + 1, -1) {
                let m2 = m1.shift(s, l, 1).expect("increment never fails");
                let c = BigInt::from(m2.get(s, l));
                out.add_term(m2, h.scale(&c));
            }
        }
        if let Some(m2) = mat.shift(l, l + 1, -1) {
            let mut k = BigInt::one();
            for b in (l + 1)..=n {
                k -= mat.get(l, b);
            }
            for b in (l + 2)..=n {
                k += mat.get(l + 1, b);
            }
            let cartan = &(&hvar(l) - &hvar(l + 1)) + &IntPoly::constant(k);
            out.add_term(m2, h * &cartan);
        }
        for t in (l + 2)..=n {
            if let Some(m1) = mat.shift(l, t, -1) {
                let m2 = m1.shift(l + 1, t, 1).expect("increment never fails");
                let c = -BigInt::from(m2.get(l + 1, t));
                out.add_term(m2, h.scale(&c));
            }
        }
    }
    out
}

/// Apply the divided raising word `E_1^(a_1)···E_{n−1}^(a_{n−1})` to
/// `x` and return the scalar part modulo the raising ideal: the
/// rightmost factor acts first, each `E_l^(a_l)` as `a_l` single steps
/// followed by one exact division by `a_l!` at the end. A negative
/// exponent makes the whole word zero.
pub fn raise_divided(a: &[i64], x: &HypElement) -> Result<IntPoly> {
    let n = x.n();
    assert_eq!(a.len(), n - 1, "one exponent per raising generator");
    if a.iter().any(|&e| e < 0) {
        return Ok(IntPoly::zero());
    }
    let mut cur = x.clone();
    for l in (1..n).rev() {
        for _ in 0..a[l - 1] {
            cur = e_action(l, &cur);
        }
    }
    let scalar = cur.coeff(&UTMatrix::zero(n));
    let mut denom = BigInt::one();
    for &e in a {
        denom *= factorial(e as u64);
    }
    exact_div(&scalar, &IntPoly::constant(denom)).map_err(|_| {
        Error::NonIntegralResult(format!(
            "raising word {a:?} left a scalar not divisible by the factorials"
        ))
    })
}

/// Coefficient-wise substitution `H_t ↦ H_t + C(l,m) − u_m + u_l` for
/// `t ≥ m` (the lowering parts are untouched).
pub fn sigma_elem(l: usize, m: usize, base: usize, x: &HypElement) -> Result<HypElement> {
    x.map_coeffs(|h| sigma(l, m, base, h))
}

/// Coefficient-wise exact division by `g`; `NotDivisible` signals a
/// genuine bug in the caller's divisibility argument.
pub fn divide_elem(x: &HypElement, g: &IntPoly) -> Result<HypElement> {
    x.map_coeffs(|h| exact_div(h, g))
}

/// A vector over 𝔽_p supported on basis monomials, all of one weight.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FpHypVector {
    p: u64,
    weight: Option<Vec<i64>>,
    entries: BTreeMap<UTMatrix, u64>,
}

impl FpHypVector {
    pub fn new(p: u64) -> Self {
        assert!(p >= 2);
        FpHypVector {
            p,
            weight: None,
            entries: BTreeMap::new(),
        }
    }

    pub fn p(&self) -> u64 {
        self.p
    }

    pub fn is_zero(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, m: &UTMatrix) -> u64 {
        self.entries.get(m).copied().unwrap_or(0)
    }

    pub fn entries(&self) -> impl Iterator<Item = (&UTMatrix, u64)> {
        self.entries.iter().map(|(m, &c)| (m, c))
    }

    /// Add `c·F^(N)`; rejects a monomial whose weight differs from the
    /// ones already present.
    pub fn add(&mut self, m: UTMatrix, c: u64) -> Result<()> {
        let c = c % self.p;
        let w = wt(&m);
        match &self.weight {
            None => self.weight = Some(w),
            Some(prev) if *prev != w => return Err(Error::MixedWeights),
            _ => {}
        }
        use std::collections::btree_map::Entry;
        match self.entries.entry(m) {
            Entry::Vacant(e) => {
                if c != 0 {
                    e.insert(c);
                }
            }
            Entry::Occupied(mut e) => {
                let s = (e.get() + c) % self.p;
                if s == 0 {
                    e.remove();
                } else {
                    *e.get_mut() = s;
                }
            }
        }
        Ok(())
    }
}

/// Reduce every coefficient at `λ` and the given `u`-values mod `p`,
/// pruning zeros.
pub fn specialize_elem(
    x: &HypElement,
    lambda: &Weight,
    uvals: &BTreeMap<u32, i64>,
    p: u64,
) -> Result<FpHypVector> {
    let mut v = FpHypVector::new(p);
    for (m, h) in x.terms() {
        let c = specialize(h, lambda, uvals, p)?;
        v.add(m.clone(), c)?;
    }
    Ok(v)
}

// ---- straightening oracle ----

/// A plain (non-divided) generator letter. `E(a,b)` and `F(a,b)` both
/// require `a < b`; `F(a,b)` is the matrix unit at `(b,a)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Gen {
    E(u8, u8),
    F(u8, u8),
    H(u8),
}

/// The word of plain generators whose product is `ΠN_{a,b}! · F^(N)`:
/// factors ordered by (column, row), each repeated by its exponent.
pub fn f_word(m: &UTMatrix) -> Vec<Gen> {
    let mut pos = m.support();
    pos.sort_by_key(|&(a, b, _)| (b, a));
    let mut w = Vec::new();
    for (a, b, v) in pos {
        for _ in 0..v {
            w.push(Gen::F(a as u8, b as u8));
        }
    }
    w
}

/// The transpose of `f_word(m)`: the same letters reversed and flipped
/// to raising generators, the word of `ΠN_{a,b}! · τ(F^(N))`.
pub fn e_word_transposed(m: &UTMatrix) -> Vec<Gen> {
    f_word(m)
        .into_iter()
        .rev()
        .map(|g| match g {
            Gen::F(a, b) => Gen::E(a, b),
            _ => unreachable!("f_word emits lowering letters only"),
        })
        .collect()
}

fn unit(s: u8, t: u8) -> Gen {
    use std::cmp::Ordering::*;
    match s.cmp(&t) {
        Less => Gen::E(s, t),
        Greater => Gen::F(t, s),
        Equal => Gen::H(s),
    }
}

/// The bracket `[g, F(k,l)]` as a short integer combination of single
/// letters, straight from the matrix-unit commutation rule.
fn bracket_with_f(g: Gen, k: u8, l: u8) -> Vec<(i64, Gen)> {
    let mut out = Vec::new();
    match g {
        Gen::H(s) => {
            let c = i64::from(s == l) - i64::from(s == k);
            if c != 0 {
                out.push((c, Gen::F(k, l)));
            }
        }
        Gen::E(a, b) => {
            if b == l {
                out.push((1, unit(a, k)));
            }
            if k == a {
                out.push((-1, unit(l, b)));
            }
        }
        Gen::F(..) => unreachable!("only swapped past non-lowering letters"),
    }
    out
}

/// Memoized evaluation of generator words against a highest weight
/// vector, with the weight kept symbolic: `vc(w)` is the coefficient of
/// the highest weight vector in `w·v⁺`, as a polynomial in `H_1..H_n`.
///
/// Rules: the empty word gives 1; a word whose leftmost letter lowers
/// gives 0 (nothing below the top weight maps back onto it); a trailing
/// raising letter kills v⁺; a trailing `H_s` contributes the symbol
/// `H_s`; otherwise the leftmost lowering letter is swapped one step
/// left, paying the single commutator. The measure (length, position of
/// leftmost lowering letter) drops on every recursion, and the memo is
/// shared across calls.
#[derive(Debug, Default)]
pub struct Straightener {
    memo: HashMap<Vec<Gen>, IntPoly>,
}

impl Straightener {
    pub fn new() -> Self {
        Straightener::default()
    }

    pub fn vc(&mut self, word: &[Gen]) -> IntPoly {
        if word.is_empty() {
            return IntPoly::one();
        }
        if let Some(hit) = self.memo.get(word) {
            return hit.clone();
        }
        let val = self.vc_uncached(word);
        self.memo.insert(word.to_vec(), val.clone());
        val
    }

    fn vc_uncached(&mut self, word: &[Gen]) -> IntPoly {
        let first_f = word.iter().position(|g| matches!(g, Gen::F(..)));
        match first_f {
            Some(0) => IntPoly::zero(),
            None => {
                // raising and Cartan letters only
                match *word.last().expect("nonempty") {
                    Gen::E(..) => IntPoly::zero(),
                    Gen::H(s) => &hvar(s as usize) * &self.vc(&word[..word.len() - 1]),
                    Gen::F(..) => unreachable!(),
                }
            }
            Some(j) => {
                let Gen::F(k, l) = word[j] else { unreachable!() };
                let g = word[j - 1];
                let mut swapped = word.to_vec();
                swapped.swap(j - 1, j);
                let mut val = self.vc(&swapped);
                for (c, letter) in bracket_with_f(g, k, l) {
                    let mut shorter = Vec::with_capacity(word.len() - 1);
                    shorter.extend_from_slice(&word[..j - 1]);
                    shorter.push(letter);
                    shorter.extend_from_slice(&word[j + 1..]);
                    val = &val + &self.vc(&shorter).scale(&BigInt::from(c));
                }
                val
            }
        }
    }

    /// The contravariant pairing `⟨F^(N)v⁺, F^(M)v⁺⟩` at the given
    /// integral weight: straighten the word `τ(F^(N))·F^(M)`, evaluate
    /// the Cartan symbols at `λ`, divide by the factorial
    /// normalizations. Integrality of the result is asserted.
    pub fn pairing(&mut self, n: &UTMatrix, m: &UTMatrix, lambda: &Weight) -> Result<BigInt> {
        assert_eq!(n.n(), m.n(), "size mismatch");
        assert_eq!(n.n(), lambda.len(), "weight length mismatch");
        if wt(n) != wt(m) {
            return Ok(BigInt::zero());
        }
        let mut word = e_word_transposed(n);
        word.extend(f_word(m));
        let sym = self.vc(&word);
        let raw = sym.eval_big(lambda, &BTreeMap::new())?;
        let denom = n.pbw_factor() * m.pbw_factor();
        if !(&raw % &denom).is_zero() {
            return Err(Error::NonIntegralResult(format!(
                "pairing of {n} and {m} gave {raw}/{denom}"
            )));
        }
        Ok(raw / denom)
    }
}

/// One-shot form of [`Straightener::pairing`] with a fresh memo.
pub fn straighten_pairing(n: &UTMatrix, m: &UTMatrix, lambda: &Weight) -> Result<BigInt> {
    Straightener::new().pairing(n, m, lambda)
}
