//! Sparse exact polynomial arithmetic over ℤ in the variables
//! `H1, ..., Hn` and `u1, u2, ...`, plus the cutting substitution and
//! falling factorials used throughout the crate.
//!
//! # Key operations
//! - `cdiff(k, l)` — the column difference `l − k + H_k − H_l`
//! - `falling(f, k)` — the falling factorial `f·(f−1)···(f−k+1)`
//! - `sigma(l, m, base, f)` — the cutting substitution on `H_m, ..., Hn`
//! - `exact_div(f, g)` — exact division, erroring on any remainder
//! - `subst_u` / `specialize` — substitution of `u`'s, then full numeric
//!   evaluation mod `p`
//!
//! # Design notes
//! - `IntPoly` is a map from monomials to arbitrary-precision integers;
//!   zero coefficients are never stored, so `==` is structural.
//! - Monomials are ordered lexicographically with `H1` most significant,
//!   then `H2, ..., Hn`, then the `u`'s. Every divisor the crate uses is
//!   linear with leading coefficient 1 in this order, so exact division
//!   by single-divisor reduction is complete.
//! - `u_base` is never a variable: the ring fixes `u_i = 0` for the base
//!   column `i`, and `ubar` encodes that convention.
//! - Fractions are lazy: no gcd is ever computed. Equality of `FracPoly`
//!   is tested by cross-multiplication.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use num_bigint::BigInt;
use num_traits::{One, Zero};

use crate::{Error, Result, Weight};

/// A polynomial variable: `H(s)` for the diagonal generator `H_s`,
/// `U(t)` for the shift parameter `u_t`.
///
/// The derived order (`H(1) < H(2) < ... < U(1) < U(2) < ...`) lists
/// variables from most to least significant for the monomial order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Var {
    H(u32),
    U(u32),
}

impl fmt::Display for Var {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Var::H(s) => write!(f, "H{s}"),
            Var::U(t) => write!(f, "u{t}"),
        }
    }
}

/// A monomial: variables with positive exponents, sorted by variable.
///
/// `Ord` is the lexicographic monomial order: compare exponents variable
/// by variable, most significant variable first; the larger exponent at
/// the first difference wins. The constant monomial is the minimum.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct Mono(Vec<(Var, u32)>);

impl Mono {
    /// The constant monomial `1`.
    pub fn one() -> Self {
        Mono(Vec::new())
    }

    /// The monomial consisting of a single variable.
    pub fn var(v: Var) -> Self {
        Mono(vec![(v, 1)])
    }

    pub fn is_constant(&self) -> bool {
        self.0.is_empty()
    }

    pub fn total_degree(&self) -> u32 {
        self.0.iter().map(|&(_, e)| e).sum()
    }

    /// Product of two monomials: merge variables, add exponents.
    pub fn mul(&self, other: &Mono) -> Mono {
        let mut out = Vec::with_capacity(self.0.len() + other.0.len());
        let (mut a, mut b) = (self.0.iter().peekable(), other.0.iter().peekable());
        loop {
            match (a.peek(), b.peek()) {
                (Some(&&(va, ea)), Some(&&(vb, eb))) => match va.cmp(&vb) {
                    Ordering::Less => {
                        out.push((va, ea));
                        a.next();
                    }
                    Ordering::Greater => {
                        out.push((vb, eb));
                        b.next();
                    }
                    Ordering::Equal => {
                        out.push((va, ea + eb));
                        a.next();
                        b.next();
                    }
                },
                (Some(_), None) => {
                    out.extend(a.cloned());
                    break;
                }
                (None, Some(_)) => {
                    out.extend(b.cloned());
                    break;
                }
                (None, None) => break,
            }
        }
        Mono(out)
    }

    /// Does `self` divide `other` variable-wise?
    pub fn divides(&self, other: &Mono) -> bool {
        self.0.iter().all(|&(v, e)| {
            other
                .0
                .iter()
                .any(|&(w, f)| w == v && f >= e)
        })
    }

    /// Quotient monomial `other / self`; caller guarantees divisibility.
    pub fn div_into(&self, other: &Mono) -> Mono {
        let mut out = Vec::with_capacity(other.0.len());
        for &(v, e) in &other.0 {
            let sub = self
                .0
                .iter()
                .find(|&&(w, _)| w == v)
                .map_or(0, |&(_, f)| f);
            debug_assert!(sub <= e, "monomial division underflow");
            if e > sub {
                out.push((v, e - sub));
            }
        }
        Mono(out)
    }

    pub fn vars(&self) -> impl Iterator<Item = (Var, u32)> + '_ {
        self.0.iter().copied()
    }
}

impl Ord for Mono {
    fn cmp(&self, other: &Self) -> Ordering {
        let (mut a, mut b) = (self.0.iter().peekable(), other.0.iter().peekable());
        loop {
            match (a.peek(), b.peek()) {
                (None, None) => return Ordering::Equal,
                (Some(_), None) => return Ordering::Greater,
                (None, Some(_)) => return Ordering::Less,
                (Some(&&(va, ea)), Some(&&(vb, eb))) => match va.cmp(&vb) {
                    // the side holding the more significant variable has a
                    // positive exponent where the other has zero
                    Ordering::Less => return Ordering::Greater,
                    Ordering::Greater => return Ordering::Less,
                    Ordering::Equal => {
                        if ea != eb {
                            return ea.cmp(&eb);
                        }
                        a.next();
                        b.next();
                    }
                },
            }
        }
    }
}

impl PartialOrd for Mono {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for Mono {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return write!(f, "1");
        }
        let mut first = true;
        for &(v, e) in &self.0 {
            if !first {
                write!(f, "*")?;
            }
            first = false;
            if e == 1 {
                write!(f, "{v}")?;
            } else {
                write!(f, "{v}^{e}")?;
            }
        }
        Ok(())
    }
}

/// A sparse polynomial with arbitrary-precision integer coefficients.
/// Zero coefficients are never stored.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct IntPoly {
    terms: BTreeMap<Mono, BigInt>,
}

impl IntPoly {
    pub fn zero() -> Self {
        IntPoly::default()
    }

    pub fn one() -> Self {
        IntPoly::constant(1)
    }

    pub fn constant(c: impl Into<BigInt>) -> Self {
        let mut p = IntPoly::default();
        p.add_term(Mono::one(), c.into());
        p
    }

    pub fn var(v: Var) -> Self {
        let mut p = IntPoly::default();
        p.add_term(Mono::var(v), BigInt::one());
        p
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// The constant value, if the polynomial is constant.
    pub fn as_constant(&self) -> Option<BigInt> {
        match self.terms.len() {
            0 => Some(BigInt::zero()),
            1 => self.terms.get(&Mono::one()).cloned(),
            _ => None,
        }
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    pub fn total_degree(&self) -> u32 {
        self.terms
            .keys()
            .map(Mono::total_degree)
            .max()
            .unwrap_or(0)
    }

    /// Leading term in the monomial order, unless zero.
    pub fn leading(&self) -> Option<(&Mono, &BigInt)> {
        self.terms.iter().next_back()
    }

    /// Add `c · m`, pruning a resulting zero coefficient.
    pub fn add_term(&mut self, m: Mono, c: BigInt) {
        if c.is_zero() {
            return;
        }
        let entry = self.terms.entry(m).or_insert_with(BigInt::zero);
        *entry += c;
        if entry.is_zero() {
            // re-borrow to remove; the key is the one just touched
            let key = self
                .terms
                .iter()
                .find(|(_, v)| v.is_zero())
                .map(|(k, _)| k.clone());
            if let Some(k) = key {
                self.terms.remove(&k);
            }
        }
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Mono, &BigInt)> {
        self.terms.iter()
    }

    /// Multiply by an integer scalar.
    pub fn scale(&self, c: &BigInt) -> IntPoly {
        if c.is_zero() {
            return IntPoly::zero();
        }
        IntPoly {
            terms: self
                .terms
                .iter()
                .map(|(m, a)| (m.clone(), a * c))
                .collect(),
        }
    }

    pub fn pow(&self, k: u32) -> IntPoly {
        let mut acc = IntPoly::one();
        for _ in 0..k {
            acc = &acc * self;
        }
        acc
    }

    /// Substitute each variable by `image(v)` where assigned; unassigned
    /// variables stay in place.
    pub fn substitute<F>(&self, mut image: F) -> IntPoly
    where
        F: FnMut(Var) -> Option<IntPoly>,
    {
        let mut out = IntPoly::zero();
        for (m, c) in &self.terms {
            let mut fixed = Mono::one();
            let mut acc = IntPoly::constant(c.clone());
            for (v, e) in m.vars() {
                match image(v) {
                    Some(g) => acc = &acc * &g.pow(e),
                    None => fixed = fixed.mul(&Mono(vec![(v, e)])),
                }
            }
            for (mm, cc) in acc.terms {
                out.add_term(fixed.mul(&mm), cc);
            }
        }
        out
    }

    /// Exact integer evaluation: `H_s ↦ hvals[s−1]`, `u_t ↦ uvals[t]`.
    pub fn eval_big(&self, hvals: &[i64], uvals: &BTreeMap<u32, i64>) -> Result<BigInt> {
        let mut sum = BigInt::zero();
        for (m, c) in &self.terms {
            let mut prod = c.clone();
            for (v, e) in m.vars() {
                let val = match v {
                    Var::H(s) => *hvals
                        .get(s as usize - 1)
                        .ok_or_else(|| Error::UnassignedVariable(format!("H{s}")))?,
                    Var::U(t) => *uvals
                        .get(&t)
                        .ok_or_else(|| Error::UnassignedVariable(format!("u{t}")))?,
                };
                prod *= BigInt::from(val).pow(e);
            }
            sum += prod;
        }
        Ok(sum)
    }
}

impl From<i64> for IntPoly {
    fn from(c: i64) -> Self {
        IntPoly::constant(c)
    }
}

impl Add for &IntPoly {
    type Output = IntPoly;
    fn add(self, rhs: &IntPoly) -> IntPoly {
        let mut out = self.clone();
        for (m, c) in &rhs.terms {
            out.add_term(m.clone(), c.clone());
        }
        out
    }
}

impl Sub for &IntPoly {
    type Output = IntPoly;
    fn sub(self, rhs: &IntPoly) -> IntPoly {
        let mut out = self.clone();
        for (m, c) in &rhs.terms {
            out.add_term(m.clone(), -c.clone());
        }
        out
    }
}

impl Neg for &IntPoly {
    type Output = IntPoly;
    fn neg(self) -> IntPoly {
        IntPoly {
            terms: self
                .terms
                .iter()
                .map(|(m, c)| (m.clone(), -c))
                .collect(),
        }
    }
}

impl Mul for &IntPoly {
    type Output = IntPoly;
    fn mul(self, rhs: &IntPoly) -> IntPoly {
        let mut out = IntPoly::zero();
        for (ma, ca) in &self.terms {
            for (mb, cb) in &rhs.terms {
                out.add_term(ma.mul(mb), ca * cb);
            }
        }
        out
    }
}

impl fmt::Display for IntPoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        let mut first = true;
        for (m, c) in self.terms.iter().rev() {
            let neg = c < &BigInt::zero();
            let abs = if neg { -c } else { c.clone() };
            if first {
                if neg {
                    write!(f, "-")?;
                }
                first = false;
            } else if neg {
                write!(f, " - ")?;
            } else {
                write!(f, " + ")?;
            }
            if m.is_constant() {
                write!(f, "{abs}")?;
            } else if abs.is_one() {
                write!(f, "{m}")?;
            } else {
                write!(f, "{abs}*{m}")?;
            }
        }
        Ok(())
    }
}

/// The variable `H_s`.
pub fn hvar(s: usize) -> IntPoly {
    assert!(s >= 1, "H-index starts at 1");
    IntPoly::var(Var::H(s as u32))
}

/// The variable `u_t`.
pub fn uvar(t: usize) -> IntPoly {
    assert!(t >= 1, "u-index starts at 1");
    IntPoly::var(Var::U(t as u32))
}

/// The shift parameter with the base convention: `u_base = 0`, so this is
/// zero when `t == base` and the variable `u_t` otherwise.
pub fn ubar(t: usize, base: usize) -> IntPoly {
    if t == base {
        IntPoly::zero()
    } else {
        uvar(t)
    }
}

/// The column difference `C(k,l) = l − k + H_k − H_l`. `cdiff(k,k) = 0`.
pub fn cdiff(k: usize, l: usize) -> IntPoly {
    if k == l {
        return IntPoly::zero();
    }
    let mut out = IntPoly::constant(l as i64 - k as i64);
    out = &out + &hvar(k);
    &out - &hvar(l)
}

/// Falling factorial `f·(f−1)···(f−k+1)`; `falling(f, 0) = 1`.
///
/// ```
/// use branchcrit::polyring::{cdiff, falling};
/// let f = falling(&cdiff(1, 2), 2).unwrap();
/// assert_eq!(f.total_degree(), 2);
/// assert!(falling(&cdiff(1, 1), 2).unwrap().is_zero());
/// ```
pub fn falling(f: &IntPoly, k: i64) -> Result<IntPoly> {
    if k < 0 {
        return Err(Error::NegativeExponent { k });
    }
    let mut acc = IntPoly::one();
    for j in 0..k {
        acc = &acc * &(f - &IntPoly::constant(j));
    }
    Ok(acc)
}

/// The cutting substitution: `H_t ↦ H_t` for `t < m` and
/// `H_t ↦ H_t + C(l,m) − u_m + u_l` for `t ≥ m`; every `u` is fixed.
/// `base` is the column whose shift parameter is pinned to zero, so the
/// added `u_l` term vanishes when `l == base`. Requires `base ≤ l < m`.
pub fn sigma(l: usize, m: usize, base: usize, f: &IntPoly) -> Result<IntPoly> {
    if !(base <= l && l < m) {
        return Err(Error::BadIndices { l, m, base });
    }
    let shift = &(&cdiff(l, m) - &uvar(m)) + &ubar(l, base);
    Ok(f.substitute(|v| match v {
        Var::H(t) if t as usize >= m => Some(&hvar(t as usize) + &shift),
        _ => None,
    }))
}

/// Exact division: the quotient `q` with `f = q·g`, or `NotDivisible`.
///
/// Single-divisor reduction in the monomial order. When `f` is exactly
/// divisible the leading coefficients divide at every step, so the loop
/// strips one leading term of the quotient per iteration; the leading
/// monomial strictly decreases, so the loop always terminates.
pub fn exact_div(f: &IntPoly, g: &IntPoly) -> Result<IntPoly> {
    assert!(!g.is_zero(), "division by the zero polynomial");
    let (gm, gc) = {
        let (m, c) = g.leading().unwrap();
        (m.clone(), c.clone())
    };
    let mut rem = f.clone();
    let mut quot = IntPoly::zero();
    while let Some((fm, fc)) = rem.leading() {
        if !gm.divides(fm) {
            return Err(Error::NotDivisible);
        }
        if !(fc % &gc).is_zero() {
            return Err(Error::NotDivisible);
        }
        let tm = gm.div_into(fm);
        let tc = fc / &gc;
        let mut t = IntPoly::zero();
        t.add_term(tm, tc);
        quot = &quot + &t;
        rem = &rem - &(&t * g);
    }
    Ok(quot)
}

/// Substitute the assigned `u`'s by polynomials; unassigned `u`'s and all
/// `H`'s are left alone.
pub fn subst_u(f: &IntPoly, assignments: &BTreeMap<u32, IntPoly>) -> IntPoly {
    f.substitute(|v| match v {
        Var::U(t) => assignments.get(&t).cloned(),
        Var::H(_) => None,
    })
}

/// Full numeric evaluation mod `p`: `H_s ↦ λ_s`, `u_t ↦ uvals[t]`, then
/// reduce. Every variable occurring in `f` must be covered.
pub fn specialize(
    f: &IntPoly,
    lambda: &Weight,
    uvals: &BTreeMap<u32, i64>,
    p: u64,
) -> Result<u64> {
    assert!(p >= 2, "modulus must be at least 2");
    let val = f.eval_big(lambda, uvals)?;
    let m = BigInt::from(p);
    let r = ((val % &m) + &m) % &m;
    Ok(u64::try_from(r).expect("residue fits in u64"))
}

/// A lazy fraction of polynomials. No normalization is performed;
/// equality is cross-multiplication.
#[derive(Debug, Clone)]
pub struct FracPoly {
    pub num: IntPoly,
    pub den: IntPoly,
}

impl FracPoly {
    pub fn new(num: IntPoly, den: IntPoly) -> Self {
        assert!(!den.is_zero(), "fraction with zero denominator");
        FracPoly { num, den }
    }

    pub fn from_poly(num: IntPoly) -> Self {
        FracPoly {
            num,
            den: IntPoly::one(),
        }
    }

    pub fn zero() -> Self {
        FracPoly::from_poly(IntPoly::zero())
    }

    pub fn is_zero(&self) -> bool {
        self.num.is_zero()
    }

    /// The underlying polynomial if the denominator divides exactly.
    pub fn to_poly(&self) -> Result<IntPoly> {
        exact_div(&self.num, &self.den)
    }
}

impl PartialEq for FracPoly {
    fn eq(&self, other: &Self) -> bool {
        &self.num * &other.den == &other.num * &self.den
    }
}

impl Add for &FracPoly {
    type Output = FracPoly;
    fn add(self, rhs: &FracPoly) -> FracPoly {
        FracPoly::new(
            &(&self.num * &rhs.den) + &(&rhs.num * &self.den),
            &self.den * &rhs.den,
        )
    }
}

impl Sub for &FracPoly {
    type Output = FracPoly;
    fn sub(self, rhs: &FracPoly) -> FracPoly {
        FracPoly::new(
            &(&self.num * &rhs.den) - &(&rhs.num * &self.den),
            &self.den * &rhs.den,
        )
    }
}

impl Mul for &FracPoly {
    type Output = FracPoly;
    fn mul(self, rhs: &FracPoly) -> FracPoly {
        FracPoly::new(&self.num * &rhs.num, &self.den * &rhs.den)
    }
}

impl Neg for &FracPoly {
    type Output = FracPoly;
    fn neg(self) -> FracPoly {
        FracPoly {
            num: -&self.num,
            den: self.den.clone(),
        }
    }
}

impl fmt::Display for FracPoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.den == IntPoly::one() {
            write!(f, "{}", self.num)
        } else {
            write!(f, "({}) / ({})", self.num, self.den)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ip(c: i64) -> IntPoly {
        IntPoly::constant(c)
    }

    // ---- construction and rendering ----

    #[test]
    fn test_cdiff_formula() {
        let expected = &(&ip(1) + &hvar(1)) - &hvar(2);
        assert_eq!(cdiff(1, 2), expected);
        assert_eq!(cdiff(1, 2).to_string(), "H1 - H2 + 1");
    }

    #[test]
    fn test_cdiff_diagonal_is_zero() {
        assert!(cdiff(3, 3).is_zero());
    }

    #[test]
    fn test_cdiff_telescopes() {
        assert_eq!(&cdiff(1, 2) + &cdiff(2, 4), cdiff(1, 4));
    }

    #[test]
    fn test_display_is_sorted_and_signed() {
        let f = &(&hvar(2).pow(2) - &hvar(1)) + &(&uvar(3) - &ip(2));
        assert_eq!(f.to_string(), "-H1 + H2^2 + u3 - 2");
    }

    // ---- falling factorials ----

    #[test]
    fn test_falling_zero_exponent_is_one() {
        assert_eq!(falling(&hvar(1), 0).unwrap(), IntPoly::one());
    }

    #[test]
    fn test_falling_expands() {
        let x = &hvar(1) - &hvar(2);
        let expected = &x * &(&x - &ip(1));
        assert_eq!(falling(&x, 2).unwrap(), expected);
    }

    #[test]
    fn test_falling_at_its_exponent_is_factorial() {
        // x(x−1)···(x−k+1) at x = k equals k!
        let f = falling(&hvar(1), 4).unwrap();
        let v = f.eval_big(&[4], &BTreeMap::new()).unwrap();
        assert_eq!(v, BigInt::from(24));
    }

    #[test]
    fn test_falling_negative_exponent_errors() {
        assert_eq!(
            falling(&hvar(1), -1),
            Err(Error::NegativeExponent { k: -1 })
        );
    }

    // ---- the cutting substitution ----

    #[test]
    fn test_sigma_moves_h2() {
        // with base column 1, u1 = 0, so H2 ↦ H1 + 1 − u2
        let got = sigma(1, 2, 1, &hvar(2)).unwrap();
        let expected = &(&ip(1) + &hvar(1)) - &uvar(2);
        assert_eq!(got, expected);
    }

    #[test]
    fn test_sigma_kills_its_own_factor() {
        let f = &(&cdiff(2, 4) - &uvar(4)) + &uvar(2);
        assert!(sigma(2, 4, 1, &f).unwrap().is_zero());
    }

    #[test]
    fn test_sigma_bad_indices() {
        assert!(matches!(
            sigma(3, 3, 1, &hvar(1)),
            Err(Error::BadIndices { .. })
        ));
        assert!(matches!(
            sigma(1, 3, 2, &hvar(1)),
            Err(Error::BadIndices { .. })
        ));
    }

    #[test]
    fn test_sigma_trichotomy() {
        // For base ≤ l < m < n and 1 ≤ q ≤ t ≤ n:
        //   σ_{l,m}(C(q,t) + ū_l) = C(q,t) + ū_l   if q ≤ t < m or m ≤ q,
        //   σ_{l,m}(C(q,t) + ū_l) = C(m,t) + C(q,l) + u_m   if q < m ≤ t.
        let n = 5;
        for base in 1..=2 {
            for l in base..n {
                for m in (l + 1)..n {
                    for q in 1..=n {
                        for t in q..=n {
                            let f = &cdiff(q, t) + &ubar(l, base);
                            let got = sigma(l, m, base, &f).unwrap();
                            let expected = if q < m && m <= t {
                                &(&cdiff(m, t) + &cdiff(q, l)) + &uvar(m)
                            } else {
                                f.clone()
                            };
                            assert_eq!(got, expected, "l={l} m={m} q={q} t={t}");
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn test_sigma_annihilates_exactly_its_own_pair() {
        // σ_{l,m}(C(q,t) − ū_t + ū_q) = 0 precisely when (q,t) = (l,m)
        let n = 5;
        let base = 1;
        for l in base..n {
            for m in (l + 1)..n {
                for q in base..n {
                    for t in (q + 1)..n {
                        let f = &(&cdiff(q, t) - &ubar(t, base)) + &ubar(q, base);
                        let img = sigma(l, m, base, &f).unwrap();
                        assert_eq!(
                            img.is_zero(),
                            (q, t) == (l, m),
                            "l={l} m={m} q={q} t={t}"
                        );
                    }
                }
            }
        }
    }

    // ---- division ----

    #[test]
    fn test_exact_div_linear_factor() {
        let g = &cdiff(1, 2) - &uvar(2);
        let q = &hvar(3) + &ip(5);
        assert_eq!(exact_div(&(&g * &q), &g).unwrap(), q);
    }

    #[test]
    fn test_exact_div_rejects_nondivisor() {
        let g = &cdiff(1, 2) - &uvar(2);
        assert_eq!(exact_div(&hvar(1), &g), Err(Error::NotDivisible));
    }

    #[test]
    fn test_sigma_zero_implies_divisible() {
        // anything of the form y·(C(l,m) − u_m + u_l) divides back out
        let (l, m, base) = (2, 3, 1);
        let factor = &(&cdiff(l, m) - &uvar(m)) + &uvar(l);
        let y = &(&hvar(1) * &hvar(3)) - &(&uvar(2) * &ip(7));
        let f = &y * &factor;
        assert!(sigma(l, m, base, &f).unwrap().is_zero());
        assert_eq!(exact_div(&f, &factor).unwrap(), y);
    }

    // ---- substitution and specialization ----

    #[test]
    fn test_subst_u_kills_designed_factor() {
        // u_t ↦ h − C(t, j) turns C(t,j) + u_t − h into zero
        let (t, j, h) = (2usize, 5usize, 3i64);
        let mut asg = BTreeMap::new();
        asg.insert(t as u32, &ip(h) - &cdiff(t, j));
        let f = &(&cdiff(t, j) + &uvar(t)) - &ip(h);
        assert!(subst_u(&f, &asg).is_zero());
    }

    #[test]
    fn test_subst_u_leaves_unassigned() {
        let f = &uvar(2) + &uvar(3);
        let mut asg = BTreeMap::new();
        asg.insert(2, ip(0));
        assert_eq!(subst_u(&f, &asg), uvar(3));
    }

    #[test]
    fn test_specialize_example() {
        let f = &cdiff(1, 3) + &uvar(2);
        let lambda = vec![1, 0, 0];
        let mut uvals = BTreeMap::new();
        uvals.insert(2, 0);
        assert_eq!(specialize(&f, &lambda, &uvals, 2).unwrap(), 1);
    }

    #[test]
    fn test_specialize_zero() {
        assert_eq!(
            specialize(&IntPoly::zero(), &vec![1, 1], &BTreeMap::new(), 5).unwrap(),
            0
        );
    }

    #[test]
    fn test_specialize_unassigned_u_errors() {
        assert_eq!(
            specialize(&uvar(3), &vec![1, 1, 1], &BTreeMap::new(), 5),
            Err(Error::UnassignedVariable("u3".into()))
        );
    }

    // ---- fractions ----

    #[test]
    fn test_frac_equality_by_cross_multiplication() {
        let a = FracPoly::new(hvar(1), ip(2));
        let b = FracPoly::new(&hvar(1) * &hvar(2), &ip(2) * &hvar(2));
        assert_eq!(a, b);
        let c = FracPoly::new(hvar(2), ip(2));
        assert_ne!(a, c);
    }

    #[test]
    fn test_frac_to_poly() {
        let g = cdiff(1, 2);
        let f = FracPoly::new(&g * &hvar(3), g.clone());
        assert_eq!(f.to_poly().unwrap(), hvar(3));
        let bad = FracPoly::new(hvar(1), g);
        assert_eq!(bad.to_poly(), Err(Error::NotDivisible));
    }

    // ---- randomized laws ----

    fn arb_poly() -> impl Strategy<Value = IntPoly> {
        let var = prop_oneof![
            (1u32..=4).prop_map(Var::H),
            (2u32..=4).prop_map(Var::U),
        ];
        let term = (
            proptest::collection::vec((var, 1u32..=2), 0..3),
            -4i64..=4,
        );
        proptest::collection::vec(term, 0..4).prop_map(|terms| {
            let mut p = IntPoly::zero();
            for (vars, c) in terms {
                let mut m = Mono::one();
                for (v, e) in vars {
                    m = m.mul(&Mono(vec![(v, e)]));
                }
                p.add_term(m, BigInt::from(c));
            }
            p
        })
    }

    proptest! {
        #[test]
        fn prop_ring_axioms(a in arb_poly(), b in arb_poly(), c in arb_poly()) {
            prop_assert_eq!(&a + &b, &b + &a);
            prop_assert_eq!(&(&a + &b) + &c, &a + &(&b + &c));
            prop_assert_eq!(&a * &b, &b * &a);
            prop_assert_eq!(&(&a * &b) * &c, &a * &(&b * &c));
            prop_assert_eq!(&a * &(&b + &c), &(&a * &b) + &(&a * &c));
            prop_assert_eq!(&a - &a, IntPoly::zero());
        }

        #[test]
        fn prop_sigma_is_ring_homomorphism(a in arb_poly(), b in arb_poly()) {
            let (l, m, base) = (2, 3, 1);
            let sa = sigma(l, m, base, &a).unwrap();
            let sb = sigma(l, m, base, &b).unwrap();
            prop_assert_eq!(sigma(l, m, base, &(&a + &b)).unwrap(), &sa + &sb);
            prop_assert_eq!(sigma(l, m, base, &(&a * &b)).unwrap(), &sa * &sb);
        }

        #[test]
        fn prop_sigma_idempotent(a in arb_poly()) {
            for (l, m) in [(1, 2), (2, 3), (1, 4)] {
                let once = sigma(l, m, 1, &a).unwrap();
                prop_assert_eq!(sigma(l, m, 1, &once).unwrap(), once.clone());
            }
        }

        #[test]
        fn prop_exact_div_inverts_mul(a in arb_poly(), b in arb_poly()) {
            prop_assume!(!b.is_zero());
            prop_assert_eq!(exact_div(&(&a * &b), &b).unwrap(), a);
        }

        #[test]
        fn prop_frac_equivalence_and_compat(
            a in arb_poly(), b in arb_poly(), c in arb_poly(),
        ) {
            prop_assume!(!b.is_zero() && !c.is_zero());
            // a/b == (a·c)/(b·c), and adding e/f respects the equivalence
            let x = FracPoly::new(a.clone(), b.clone());
            let y = FracPoly::new(&a * &c, &b * &c);
            prop_assert_eq!(&x, &y);
            let e = FracPoly::new(c.clone(), b.clone());
            prop_assert_eq!(&(&x + &e), &(&y + &e));
            prop_assert_eq!(&(&x * &e), &(&y * &e));
        }
    }
}
