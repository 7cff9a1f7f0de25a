//! Brute-force module oracle: decide membership questions about the
//! irreducible head of a Weyl module without ever materializing the
//! module. Everything reduces to integer Gram matrices of the
//! contravariant form, computed by word straightening, and to ranks of
//! those matrices over ℚ and over 𝔽_p.
//!
//! A vector of weight `μ` is zero in the irreducible head iff it pairs
//! to zero with the whole `μ` weight space; it is a high weight vector
//! for the leading subgroup iff additionally every divided raising
//! condition pairs to zero. Both are finite linear algebra over 𝔽_p.
//!
//! # Key operations
//! - [`weight_basis`] — all exponent matrices of one weight, in a fixed
//!   deterministic order
//! - [`gram`] — the integer Gram table of the contravariant form
//! - [`rank_qq`] / [`rank_fp`] — fraction-free and mod-p ranks
//! - [`weight_dim_l`] — dimension of a weight space of the head
//! - [`high_weight_dim`] — dimension and existence of high weight
//!   vectors for the leading subgroup, modulo the form's radical
//! - [`vector_status`] — zeroness and high-weightness of a concrete
//!   mod-p vector
//! - [`check_scalar_identity`] — the fully raised operator against the
//!   closed distance product
//! - [`coeff_check`] — the straight-drop coefficient of the divided
//!   operator against its closed product form
//! - [`weyl_dim`] — the classical dimension product
//!
//! # Design notes
//! - The irreducible head is never constructed; its weight space
//!   dimensions are ranks of Gram matrices and its membership questions
//!   are pairings, so every answer is exact integer arithmetic.
//! - Raising conditions are transposed through the form: killing a
//!   vector by `E_s^{(r)}` is the same as pairing to zero against
//!   `F_s^{(r)}` times a spanning set one level up. The condition rows
//!   come from word straightening; on small sizes an independent route
//!   through the closed commutation rules recomputes them.
//! - The rational rank uses fraction-free elimination with full
//!   pivoting, so all intermediate values stay integers and every
//!   division is checked exact.

use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_traits::{One, Signed, Zero};

use crate::criterion::{dist, is_prime, sets, witness_m, BranchingInstance};
use crate::hyperalg::{
    e_word_transposed, enumerate_matrices, f_word, factorial, raise_divided, specialize_elem,
    FpHypVector, Gen, HypElement, Straightener, UTMatrix,
};
use crate::lowering::{script_t, t_eval, LoweringSpec};
use crate::msets::Multiset;
use crate::planegeo::{Diagram, PointSet};
use crate::polyring::{cdiff, specialize, subst_u, IntPoly};
use crate::{Error, Result, Weight};

/// Shift a weight so its last entry is zero: returns the polynomial
/// weight and the subtracted constant. Rejects non-dominant input.
pub fn normalize(lambda: &Weight) -> Result<(Weight, i64)> {
    if lambda.is_empty() {
        return Err(Error::InvalidInstance("empty weight".into()));
    }
    if lambda.windows(2).any(|w| w[0] < w[1]) {
        return Err(Error::NotDominant(lambda.clone()));
    }
    let c = *lambda.last().expect("nonempty");
    Ok((lambda.iter().map(|&x| x - c).collect(), c))
}

/// The simple-root coordinates of `λ − μ`, or `None` when the difference
/// is not in the root lattice (entry sums differ).
pub fn alpha_coords(lambda: &Weight, mu: &Weight) -> Option<Vec<i64>> {
    assert_eq!(lambda.len(), mu.len(), "weight length mismatch");
    if lambda.iter().sum::<i64>() != mu.iter().sum::<i64>() {
        return None;
    }
    let mut acc = 0i64;
    let mut out = Vec::with_capacity(lambda.len() - 1);
    for t in 0..lambda.len() - 1 {
        acc += lambda[t] - mu[t];
        out.push(acc);
    }
    Some(out)
}

/// All exponent matrices whose monomials have weight `μ` when applied to
/// a highest weight vector of weight `λ`, in ascending row-major order.
#[derive(Debug, Clone)]
pub struct WeightBasis {
    pub lambda: Weight,
    pub mu: Weight,
    pub mats: Vec<UTMatrix>,
}

pub fn weight_basis(lambda: &Weight, mu: &Weight) -> Result<WeightBasis> {
    if lambda.len() != mu.len() || lambda.len() < 2 {
        return Err(Error::InvalidInstance(format!(
            "weights must share a length ≥ 2, got {} and {}",
            lambda.len(),
            mu.len()
        )));
    }
    let mats = match alpha_coords(lambda, mu) {
        None => Vec::new(),
        Some(a) => {
            if a.iter().any(|&x| x < 0) {
                Vec::new()
            } else {
                enumerate_matrices(lambda.len(), &a)
            }
        }
    };
    Ok(WeightBasis {
        lambda: lambda.clone(),
        mu: mu.clone(),
        mats,
    })
}

/// The Gram table of the contravariant form on one weight space of the
/// Weyl module: symmetric with integer entries.
#[derive(Debug, Clone)]
pub struct GramTable {
    pub basis: WeightBasis,
    pub entries: Vec<Vec<BigInt>>,
}

pub fn gram(lambda: &Weight, mu: &Weight) -> Result<GramTable> {
    let basis = weight_basis(lambda, mu)?;
    gram_with(&mut Straightener::new(), basis)
}

/// Gram table reusing a caller-held straightening memo.
pub fn gram_with(st: &mut Straightener, basis: WeightBasis) -> Result<GramTable> {
    let k = basis.mats.len();
    let mut entries = vec![vec![BigInt::zero(); k]; k];
    for a in 0..k {
        for b in a..k {
            let v = st.pairing(&basis.mats[a], &basis.mats[b], &basis.lambda)?;
            entries[a][b] = v.clone();
            entries[b][a] = v;
        }
    }
    Ok(GramTable { basis, entries })
}

/// Reduce a big integer into `[0..p)`.
fn red(x: &BigInt, p: u64) -> u64 {
    let pb = BigInt::from(p);
    let mut r = x % &pb;
    if r.is_negative() {
        r += &pb;
    }
    let digits = r.to_u64_digits().1;
    digits.first().copied().unwrap_or(0)
}

fn mod_inv(x: u64, p: u64) -> u64 {
    // Fermat: p is prime and x ≢ 0
    let mut base = x % p;
    let mut exp = p - 2;
    let mut acc: u64 = 1;
    while exp > 0 {
        if exp & 1 == 1 {
            acc = ((acc as u128 * base as u128) % p as u128) as u64;
        }
        base = ((base as u128 * base as u128) % p as u128) as u64;
        exp >>= 1;
    }
    acc
}

/// Rank of an integer matrix over 𝔽_p by Gaussian elimination.
pub fn rank_fp(m: &[Vec<BigInt>], p: u64) -> usize {
    let rows = m.len();
    if rows == 0 {
        return 0;
    }
    let cols = m[0].len();
    let mut a: Vec<Vec<u64>> = m
        .iter()
        .map(|row| {
            assert_eq!(row.len(), cols, "ragged matrix");
            row.iter().map(|x| red(x, p)).collect()
        })
        .collect();
    let mut rank = 0;
    for col in 0..cols {
        let Some(piv) = (rank..rows).find(|&r| a[r][col] != 0) else {
            continue;
        };
        a.swap(rank, piv);
        let inv = mod_inv(a[rank][col], p);
        for j in col..cols {
            a[rank][j] = ((a[rank][j] as u128 * inv as u128) % p as u128) as u64;
        }
        for r in 0..rows {
            if r != rank && a[r][col] != 0 {
                let f = a[r][col];
                for j in col..cols {
                    let sub = (f as u128 * a[rank][j] as u128) % p as u128;
                    a[r][j] = ((a[r][j] as u128 + p as u128 * p as u128 - sub)
                        % p as u128) as u64;
                }
            }
        }
        rank += 1;
        if rank == rows {
            break;
        }
    }
    rank
}

/// Rank of an integer matrix over ℚ by fraction-free elimination with
/// full pivoting; every division is exact by the minor identity and is
/// checked.
pub fn rank_qq(m: &[Vec<BigInt>]) -> usize {
    let rows = m.len();
    if rows == 0 {
        return 0;
    }
    let cols = m[0].len();
    let mut a: Vec<Vec<BigInt>> = m.to_vec();
    for row in &a {
        assert_eq!(row.len(), cols, "ragged matrix");
    }
    let mut prev = BigInt::one();
    let mut rank = 0;
    while rank < rows.min(cols) {
        let pivot = (rank..rows)
            .flat_map(|r| (rank..cols).map(move |c| (r, c)))
            .find(|&(r, c)| !a[r][c].is_zero());
        let Some((pr, pc)) = pivot else { break };
        a.swap(rank, pr);
        for row in a.iter_mut() {
            row.swap(rank, pc);
        }
        for r in rank + 1..rows {
            for c in rank + 1..cols {
                let t = &(&a[rank][rank] * &a[r][c]) - &(&a[r][rank] * &a[rank][c]);
                assert!((&t % &prev).is_zero(), "fraction-free step left a remainder");
                a[r][c] = &t / &prev;
            }
            a[r][rank] = BigInt::zero();
        }
        prev = a[rank][rank].clone();
        rank += 1;
    }
    rank
}

/// Dimension of the `μ` weight space of the irreducible head over 𝔽_p:
/// the mod-p rank of the Gram table.
pub fn weight_dim_l(lambda: &Weight, mu: &Weight, p: u64) -> Result<usize> {
    if !is_prime(p) {
        return Err(Error::InvalidInstance(format!("{p} is not prime")));
    }
    Ok(rank_fp(&gram(lambda, mu)?.entries, p))
}

/// Dimension of the `μ` weight space of the Weyl module (rational rank
/// of the Gram table, the classical multiplicity).
pub fn weight_dim_weyl(lambda: &Weight, mu: &Weight) -> Result<usize> {
    Ok(rank_qq(&gram(lambda, mu)?.entries))
}

/// The pairing `⟨F^(N)v⁺, F_s^{(r)}·F^(M)v⁺⟩` at `λ`: straighten the
/// word with the `r` lowering letters inserted in the middle, then
/// normalize by the three factorial factors.
fn inserted_pairing(
    st: &mut Straightener,
    nmat: &UTMatrix,
    s: usize,
    r: u32,
    mmat: &UTMatrix,
    lambda: &Weight,
) -> Result<BigInt> {
    let mut word = e_word_transposed(nmat);
    word.extend(std::iter::repeat(Gen::F(s as u8, s as u8 + 1)).take(r as usize));
    word.extend(f_word(mmat));
    let sym = st.vc(&word);
    let raw = sym.eval_big(lambda, &BTreeMap::new())?;
    let denom = nmat.pbw_factor() * factorial(r as u64) * mmat.pbw_factor();
    if !(&raw % &denom).is_zero() {
        return Err(Error::NonIntegralResult(format!(
            "inserted pairing gave {raw}/{denom}"
        )));
    }
    Ok(raw / denom)
}

/// The condition rows cutting out, inside the `μ` weight space, the
/// vectors killed by every divided raising generator `E_s^{(r)}` with
/// `s < cutoff`: one row per spanning vector one level up, columns
/// indexed by the weight basis. `r` runs while the level-up weight space
/// can be nonzero.
fn condition_rows(
    basis: &WeightBasis,
    cutoff: usize,
) -> Result<Vec<Vec<BigInt>>> {
    let mut st = Straightener::new();
    let mut rows = Vec::new();
    let Some(a) = alpha_coords(&basis.lambda, &basis.mu) else {
        return Ok(rows);
    };
    for s in 1..cutoff {
        for r in 1..=a[s - 1].max(0) {
            let mut nu = basis.mu.clone();
            nu[s - 1] += r;
            nu[s] -= r;
            let upper = weight_basis(&basis.lambda, &nu)?;
            for mb in &upper.mats {
                let mut row = Vec::with_capacity(basis.mats.len());
                for na in &basis.mats {
                    row.push(inserted_pairing(
                        &mut st,
                        na,
                        s,
                        r as u32,
                        mb,
                        &basis.lambda,
                    )?);
                }
                rows.push(row);
            }
        }
    }
    Ok(rows)
}

/// The same condition rows through the closed commutation rules instead
/// of word straightening: apply the raising generator `r` times to each
/// basis monomial, evaluate the Cartan coefficients at `λ`, pair the
/// residue against the level-up basis, divide by `r!`. Exponential in
/// the matrix totals; small sizes only.
#[cfg(test)]
fn condition_rows_via_action(
    basis: &WeightBasis,
    cutoff: usize,
) -> Result<Vec<Vec<BigInt>>> {
    use crate::hyperalg::e_action;
    let mut st = Straightener::new();
    let mut rows = Vec::new();
    let Some(a) = alpha_coords(&basis.lambda, &basis.mu) else {
        return Ok(rows);
    };
    for s in 1..cutoff {
        for r in 1..=a[s - 1].max(0) {
            let mut nu = basis.mu.clone();
            nu[s - 1] += r;
            nu[s] -= r;
            let upper = weight_basis(&basis.lambda, &nu)?;
            if upper.mats.is_empty() {
                continue;
            }
            // raised[a] = E_s^r · F^(N_a) reduced mod the raising ideal
            let mut raised = Vec::with_capacity(basis.mats.len());
            for na in &basis.mats {
                let mut cur = HypElement::single(na.clone(), IntPoly::one());
                for _ in 0..r {
                    cur = e_action(s, &cur);
                }
                raised.push(cur);
            }
            let rfact = factorial(r as u64);
            for mb in &upper.mats {
                let mut row = Vec::with_capacity(basis.mats.len());
                for cur in &raised {
                    let mut val = BigInt::zero();
                    for (nmat, h) in cur.terms() {
                        let c = h.eval_big(&basis.lambda, &BTreeMap::new())?;
                        if c.is_zero() {
                            continue;
                        }
                        val += c * st.pairing(nmat, mb, &basis.lambda)?;
                    }
                    if !(&val % &rfact).is_zero() {
                        return Err(Error::NonIntegralResult(format!(
                            "action route gave {val}/{rfact}"
                        )));
                    }
                    row.push(val / &rfact);
                }
                rows.push(row);
            }
        }
    }
    Ok(rows)
}

/// Existence and dimension of high weight vectors for the leading
/// subgroup of size `cutoff` inside the `μ` weight space of the head.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HighWeightReport {
    /// Dimension of the solution space modulo the form's radical.
    pub dim: usize,
    /// Whether a nonzero high weight vector exists in the head.
    pub exists: bool,
}

/// Decide whether the `μ` weight space of the irreducible head contains
/// a nonzero vector killed by every `E_s^{(r)}` with `s < cutoff`. The
/// radical of the form lies inside the solution space, so the dimension
/// is the rank gap between the Gram table and the condition rows.
///
/// ```
/// use branchcrit::modoracle::high_weight_dim;
/// let report = high_weight_dim(&vec![1, 0, 0], &vec![0, 0, 1], 2, 2).unwrap();
/// assert!(report.exists);
/// assert_eq!(report.dim, 1);
/// ```
pub fn high_weight_dim(
    lambda: &Weight,
    mu: &Weight,
    p: u64,
    cutoff: usize,
) -> Result<HighWeightReport> {
    if !is_prime(p) {
        return Err(Error::InvalidInstance(format!("{p} is not prime")));
    }
    if cutoff > lambda.len() {
        return Err(Error::InvalidInstance(format!(
            "cutoff {cutoff} exceeds the size {}",
            lambda.len()
        )));
    }
    let g = gram(lambda, mu)?;
    let rank_g = rank_fp(&g.entries, p);
    let rows = condition_rows(&g.basis, cutoff)?;
    let rank_a = rank_fp(&rows, p);
    assert!(
        rank_a <= rank_g,
        "radical escaped the condition rows: {rank_a} > {rank_g}"
    );
    Ok(HighWeightReport {
        dim: rank_g - rank_a,
        exists: rank_g > rank_a,
    })
}

/// Status of a concrete mod-p vector inside the head.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct VectorStatus {
    pub is_zero_in_l: bool,
    pub is_high_weight: bool,
}

/// Decide whether a mod-p vector is zero in the head and whether it is a
/// high weight vector for the leading subgroup of size `cutoff`: pair it
/// against its own weight space and against the condition rows.
pub fn vector_status(
    coeffs: &FpHypVector,
    lambda: &Weight,
    p: u64,
    cutoff: usize,
) -> Result<VectorStatus> {
    assert_eq!(coeffs.p(), p, "modulus mismatch");
    if coeffs.is_zero() {
        return Ok(VectorStatus {
            is_zero_in_l: true,
            is_high_weight: false,
        });
    }
    let n = lambda.len();
    let flows = crate::hyperalg::wt(
        coeffs.entries().next().expect("nonzero vector").0,
    );
    // μ = λ − Σ flows_t·α_t, coordinatewise λ_s − (flows_s − flows_{s−1})
    let mu: Weight = (0..n)
        .map(|s| {
            let cur = if s < n - 1 { flows[s] } else { 0 };
            let prev = if s > 0 { flows[s - 1] } else { 0 };
            lambda[s] - (cur - prev)
        })
        .collect();
    let g = gram(lambda, &mu)?;
    let cvec: Vec<u64> = g.basis.mats.iter().map(|m| coeffs.get(m)).collect();
    let supported: u64 = cvec.iter().sum();
    let total: u64 = coeffs.entries().map(|(_, c)| c).sum();
    assert_eq!(supported, total, "vector leaves its weight basis");
    let pairs_to_zero = |rows: &[Vec<BigInt>]| -> bool {
        rows.iter().all(|row| {
            let dot: u128 = row
                .iter()
                .zip(&cvec)
                .map(|(x, &c)| red(x, p) as u128 * c as u128 % p as u128)
                .sum();
            dot % p as u128 == 0
        })
    };
    let is_zero_in_l = pairs_to_zero(&g.entries);
    if is_zero_in_l {
        return Ok(VectorStatus {
            is_zero_in_l,
            is_high_weight: false,
        });
    }
    let rows = condition_rows(&g.basis, cutoff)?;
    Ok(VectorStatus {
        is_zero_in_l,
        is_high_weight: pairs_to_zero(&rows),
    })
}

/// The fully raised specialized operator against the closed distance
/// product: raise the witness operator by `d` in every direction from
/// `i` on, scale by `d!`, and compare with `d!` times the product of the
/// nonzero distances over the rectangle. Both sides must agree and be
/// nonzero mod p. Returns the common value.
pub fn check_scalar_identity(inst: &BranchingInstance) -> Result<u64> {
    let p = inst.p;
    let (i, n, d) = (inst.i as usize, inst.n as usize, inst.d);
    let (m, _phi) = witness_m(inst)?;
    let spec = LoweringSpec::new(i, n, d, m, Multiset::new())?;
    let y = script_t(&spec, p)?;
    let a: Vec<i64> = (1..n).map(|t| if t < i { 0 } else { d }).collect();
    let scalar = raise_divided(&a, &y)?;
    let dfact = red(&factorial(d as u64), p);
    let lhs = dfact * specialize(&scalar, &inst.lambda, &BTreeMap::new(), p)? % p;
    let inst_sets = sets(inst);
    let mut rhs = dfact;
    for t in (i as i64 + 1)..=n as i64 {
        for h in 1..=d {
            if inst_sets.y.contains(&(t, h)) {
                continue;
            }
            let dv = dist(&inst.lambda, (i as i64, 0), (t, h))?;
            rhs = rhs * dv.rem_euclid(p as i64) as u64 % p;
        }
    }
    if lhs != rhs {
        return Err(Error::IdentityFailed(format!(
            "raised operator gave {lhs}, distance product gave {rhs} (mod {p})"
        )));
    }
    if lhs == 0 {
        return Err(Error::IdentityFailed(
            "raised operator vanished though every excluded distance is a unit".into(),
        ));
    }
    Ok(lhs)
}

/// The straight-drop coefficient of the divided operator against its
/// closed product form: the coefficient at the single-row exponent
/// matrix of `(I, d)`, with the shift variables pinned to the rows of
/// `M`, must equal `d!·Π_t |I|^{{t}}!` times the product of
/// `C(i,t) − h` over the inner diagram points away from `M`.
pub fn coeff_check(
    i: usize,
    n: usize,
    d: i64,
    iset: &Multiset,
    m: &PointSet,
) -> Result<()> {
    if iset.len() as i64 > d {
        return Err(Error::InvalidSpec(format!(
            "multiset length {} exceeds d = {d}",
            iset.len()
        )));
    }
    let diagram = Diagram::new(i as i64, n as i64, d, iset.clone());
    let omega = diagram.omega_members();
    let mut cols = Vec::new();
    for &(t, h) in m {
        if !omega.contains(&(t, h)) {
            return Err(Error::InvalidSpec(format!(
                "point ({t},{h}) outside the inner diagram"
            )));
        }
        if cols.contains(&(t as usize)) {
            return Err(Error::InvalidSpec(format!("two points in column {t}")));
        }
        cols.push(t as usize);
    }
    let x = t_eval(i, n, d, &cols, iset)?;
    let mut target = UTMatrix::zero(n);
    for t in i + 1..n {
        let c = iset.count_eq(t as i64);
        if c > 0 {
            target.set(i, t, c as u32);
        }
    }
    let drop = d - iset.len() as i64 + iset.count_eq(i as i64) as i64;
    target.set(i, n, drop as u32);
    let coef = x.coeff(&target);
    let assignments: BTreeMap<u32, IntPoly> = m
        .iter()
        .map(|&(t, h)| (t as u32, IntPoly::constant(h)))
        .collect();
    let lhs = subst_u(&coef, &assignments);
    let mut rhs = IntPoly::constant(factorial(d as u64));
    for t in i + 1..n {
        rhs = rhs.scale(&factorial(iset.count_eq(t as i64) as u64));
    }
    for &(t, h) in omega.difference(m) {
        rhs = &rhs * &(&cdiff(i, t as usize) - &IntPoly::constant(h));
    }
    if lhs != rhs {
        return Err(Error::IdentityFailed(format!(
            "straight-drop coefficient mismatch at i={i}, n={n}, d={d}, I={iset}, M={m:?}"
        )));
    }
    Ok(())
}

/// The classical dimension of the Weyl module:
/// `Π_{a<b} (λ_a − λ_b + b − a)/(b − a)`.
pub fn weyl_dim(lambda: &Weight) -> Result<BigInt> {
    if !crate::criterion::is_dominant(lambda) {
        return Err(Error::NotDominant(lambda.clone()));
    }
    let n = lambda.len();
    let mut num = BigInt::one();
    let mut den = BigInt::one();
    for a in 0..n {
        for b in a + 1..n {
            num *= lambda[a] - lambda[b] + (b - a) as i64;
            den *= (b - a) as i64;
        }
    }
    assert!((&num % &den).is_zero(), "dimension product must be integral");
    Ok(num / den)
}

/// Every weight that could support a nonzero weight space: entries
/// confined to the range of `λ`, same entry sum, enumerated
/// lexicographically.
pub fn weight_candidates(lambda: &Weight) -> Vec<Weight> {
    let n = lambda.len();
    let lo = *lambda.iter().min().expect("nonempty");
    let hi = *lambda.iter().max().expect("nonempty");
    let total: i64 = lambda.iter().sum();
    let mut out = Vec::new();
    let mut cur = vec![0i64; n];
    fn rec(
        idx: usize,
        remaining: i64,
        lo: i64,
        hi: i64,
        cur: &mut Vec<i64>,
        out: &mut Vec<Weight>,
    ) {
        let n = cur.len();
        if idx == n {
            if remaining == 0 {
                out.push(cur.clone());
            }
            return;
        }
        let slots_left = (n - idx - 1) as i64;
        for v in lo..=hi {
            let rest = remaining - v;
            if rest < lo * slots_left || rest > hi * slots_left {
                continue;
            }
            cur[idx] = v;
            rec(idx + 1, rest, lo, hi, cur, out);
        }
    }
    rec(0, total, lo, hi, &mut cur, &mut out);
    out
}

/// Specialize a symbolic operator at `λ` and report its status in the
/// head: a convenience wrapper for the witness pipeline.
pub fn operator_status(
    y: &HypElement,
    lambda: &Weight,
    p: u64,
    cutoff: usize,
) -> Result<VectorStatus> {
    let v = specialize_elem(y, lambda, &BTreeMap::new(), p)?;
    vector_status(&v, lambda, p, cutoff)
}
