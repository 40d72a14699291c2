//! Real polynomials in `n` variables of degree at most `d`.
//!
//! Coefficients are stored over the monomial basis in graded
//! lexicographic order: monomials are sorted by total degree, and within a
//! degree by exponent vector in descending lexicographic order, so for
//! `n = 2, d = 2` the basis reads `1, x1, x2, x1^2, x1 x2, x2^2`.
//!
//! Univariate restrictions are counted with Sturm sequences, which count
//! *distinct* real roots: a tangential intersection of a line with the zero
//! set counts once.

use std::collections::HashMap;
use std::fmt;
use std::sync::{Arc, OnceLock};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative threshold below which a restricted polynomial is treated as
/// identically zero.
pub const LINE_CONTAINED_TOL: f64 = 1e-12;

/// The line lies inside the zero set; root counting is meaningless.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LineContained;

impl fmt::Display for LineContained {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("line contained in the zero set")
    }
}

impl std::error::Error for LineContained {}

/// `C(n, k)` as `u128`; saturates instead of overflowing.
pub fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc.saturating_mul((n - i) as u128) / (i as u128 + 1);
    }
    acc
}

/// Dimension of the space of polynomials of degree `<= d` in `n` variables.
pub fn basis_len(n: usize, d: usize) -> usize {
    binomial(n + d, d) as usize
}

/// Smallest degree `d` whose coefficient sphere has dimension at least `r`,
/// i.e. `C(n+d, d) - 1 >= r`.
pub fn stone_tukey_degree(n: usize, r: usize) -> usize {
    assert!(n >= 1, "dimension must be positive");
    let mut d = 0;
    while binomial(n + d, d) - 1 < r as u128 {
        d += 1;
    }
    d
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct MultiIndex(pub Vec<u32>);

impl MultiIndex {
    pub fn degree(&self) -> usize {
        self.0.iter().map(|&e| e as usize).sum()
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn exponents(&self) -> &[u32] {
        &self.0
    }
}

/// Graded-lex monomial basis for degree `<= d` in `n` variables.
pub fn monomial_basis(n: usize, d: usize) -> Vec<MultiIndex> {
    fn fill(prefix: &mut Vec<u32>, remaining: u32, vars_left: usize, out: &mut Vec<MultiIndex>) {
        if vars_left == 1 {
            prefix.push(remaining);
            out.push(MultiIndex(prefix.clone()));
            prefix.pop();
            return;
        }
        for e in (0..=remaining).rev() {
            prefix.push(e);
            fill(prefix, remaining - e, vars_left - 1, out);
            prefix.pop();
        }
    }
    assert!(n >= 1, "dimension must be positive");
    let mut out = Vec::with_capacity(basis_len(n, d));
    let mut prefix = Vec::with_capacity(n);
    for k in 0..=d as u32 {
        fill(&mut prefix, k, n, &mut out);
    }
    out
}

/// Nested Horner representation: level `i` branches on the exponent of `x_i`.
#[derive(Debug)]
enum Node {
    Zero,
    Leaf(f64),
    Branch(Vec<Node>),
}

impl Node {
    fn build(terms: &[(&[u32], f64)], var: usize, n: usize) -> Node {
        if terms.is_empty() {
            return Node::Zero;
        }
        if var == n {
            return Node::Leaf(terms.iter().map(|t| t.1).sum());
        }
        let top = terms.iter().map(|t| t.0[var]).max().unwrap_or(0) as usize;
        let mut groups: Vec<Vec<(&[u32], f64)>> = vec![Vec::new(); top + 1];
        for &(e, c) in terms {
            groups[e[var] as usize].push((e, c));
        }
        Node::Branch(groups.iter().map(|g| Node::build(g, var + 1, n)).collect())
    }

    fn eval(&self, x: &[f64], var: usize) -> f64 {
        match self {
            Node::Zero => 0.0,
            Node::Leaf(c) => *c,
            Node::Branch(children) => {
                let xi = x[var];
                let mut acc = 0.0;
                for child in children.iter().rev() {
                    acc = acc * xi + child.eval(x, var + 1);
                }
                acc
            }
        }
    }

    /// Coefficients (ascending in `t`) of the node evaluated at `p + t u`.
    fn restrict(&self, p: &[f64], u: &[f64], var: usize) -> Vec<f64> {
        match self {
            Node::Zero => vec![0.0],
            Node::Leaf(c) => vec![*c],
            Node::Branch(children) => {
                let (c0, c1) = (p[var], u[var]);
                let mut acc: Vec<f64> = vec![0.0];
                for child in children.iter().rev() {
                    // acc <- acc * (c0 + c1 t) + child(t)
                    let mut next = vec![0.0; acc.len() + 1];
                    for (k, &a) in acc.iter().enumerate() {
                        next[k] += c0 * a;
                        next[k + 1] += c1 * a;
                    }
                    let ch = child.restrict(p, u, var + 1);
                    if ch.len() > next.len() {
                        next.resize(ch.len(), 0.0);
                    }
                    for (k, c) in ch.into_iter().enumerate() {
                        next[k] += c;
                    }
                    acc = next;
                }
                acc
            }
        }
    }
}

/// A real polynomial of degree `<= d` in `n` variables.
#[derive(Clone)]
pub struct MultiPoly {
    n: usize,
    d: usize,
    coeffs: Vec<f64>,
    basis: Arc<Vec<MultiIndex>>,
    tree: Arc<Node>,
    partials: Arc<OnceLock<Vec<MultiPoly>>>,
}

impl fmt::Debug for MultiPoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("MultiPoly")
            .field("n", &self.n)
            .field("d", &self.d)
            .field("coeffs", &self.coeffs)
            .finish()
    }
}

impl PartialEq for MultiPoly {
    fn eq(&self, other: &Self) -> bool {
        self.n == other.n && self.d == other.d && self.coeffs == other.coeffs
    }
}

impl MultiPoly {
    /// Build from a coefficient vector in graded-lex order.
    pub fn new(n: usize, d: usize, coeffs: Vec<f64>) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidArgument("dimension must be positive".into()));
        }
        let len = basis_len(n, d);
        if coeffs.len() != len {
            return Err(Error::InvalidArgument(format!(
                "expected {len} coefficients for n={n}, d={d}, got {}",
                coeffs.len()
            )));
        }
        if coeffs.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidArgument("non-finite coefficient".into()));
        }
        Ok(Self::from_parts(
            n,
            d,
            coeffs,
            Arc::new(monomial_basis(n, d)),
        ))
    }

    fn from_parts(n: usize, d: usize, coeffs: Vec<f64>, basis: Arc<Vec<MultiIndex>>) -> Self {
        let terms: Vec<(&[u32], f64)> = basis
            .iter()
            .zip(&coeffs)
            .filter(|(_, &c)| c != 0.0)
            .map(|(m, &c)| (m.exponents(), c))
            .collect();
        let tree = Arc::new(Node::build(&terms, 0, n));
        MultiPoly {
            n,
            d,
            coeffs,
            basis,
            tree,
            partials: Arc::new(OnceLock::new()),
        }
    }

    pub fn zero(n: usize, d: usize) -> Self {
        Self::new(n, d, vec![0.0; basis_len(n, d)]).expect("valid shape")
    }

    /// Build from sparse `(exponents, coefficient)` terms; repeated
    /// monomials are summed.
    pub fn from_terms(n: usize, d: usize, terms: &[(&[u32], f64)]) -> Result<Self> {
        let basis = monomial_basis(n, d);
        let index = basis_index(&basis);
        let mut coeffs = vec![0.0; basis.len()];
        for (e, c) in terms {
            let key = MultiIndex(e.to_vec());
            if key.dim() != n {
                return Err(Error::InvalidArgument(format!(
                    "multi-index {:?} has wrong length for n={n}",
                    e
                )));
            }
            let i = *index.get(&key).ok_or_else(|| {
                Error::InvalidArgument(format!("multi-index {:?} exceeds degree {d}", e))
            })?;
            coeffs[i] += c;
        }
        Self::new(n, d, coeffs)
    }

    /// The affine function `a . x + b`.
    pub fn linear(a: &[f64], b: f64) -> Self {
        let n = a.len();
        let mut coeffs = Vec::with_capacity(n + 1);
        coeffs.push(b);
        coeffs.extend_from_slice(a);
        Self::new(n, 1, coeffs).expect("linear shape")
    }

    pub fn constant(n: usize, c: f64) -> Self {
        let mut coeffs = vec![0.0; 1];
        coeffs[0] = c;
        Self::new(n, 0, coeffs).expect("constant shape")
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn degree(&self) -> usize {
        self.d
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn basis(&self) -> &[MultiIndex] {
        &self.basis
    }

    /// Same shape, new coefficients.
    pub fn with_coeffs(&self, coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.len() != self.coeffs.len() {
            return Err(Error::InvalidArgument("coefficient length mismatch".into()));
        }
        Ok(Self::from_parts(self.n, self.d, coeffs, self.basis.clone()))
    }

    pub fn norm(&self) -> f64 {
        self.coeffs.iter().map(|c| c * c).sum::<f64>().sqrt()
    }

    pub fn max_abs_coeff(&self) -> f64 {
        self.coeffs.iter().fold(0.0_f64, |m, c| m.max(c.abs()))
    }

    /// Projection onto the unit coefficient sphere; the zero polynomial is
    /// returned unchanged.
    pub fn normalized(&self) -> Self {
        let norm = self.norm();
        if norm == 0.0 {
            return self.clone();
        }
        self.scaled(1.0 / norm)
    }

    pub fn scaled(&self, s: f64) -> Self {
        self.with_coeffs(self.coeffs.iter().map(|c| c * s).collect())
            .expect("same shape")
    }

    /// Re-express over a larger degree (zero padding).
    pub fn raised_to_degree(&self, d: usize) -> Result<Self> {
        if d < self.d {
            return Err(Error::InvalidArgument("cannot lower the degree".into()));
        }
        let terms: Vec<(&[u32], f64)> = self
            .basis
            .iter()
            .zip(&self.coeffs)
            .map(|(m, &c)| (m.exponents(), c))
            .collect();
        Self::from_terms(self.n, d, &terms)
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), self.n);
        self.tree.eval(x, 0)
    }

    /// `d P / d x_var`, as a polynomial of the same nominal degree.
    pub fn partial(&self, var: usize) -> MultiPoly {
        let index = basis_index(&self.basis);
        let mut coeffs = vec![0.0; self.coeffs.len()];
        for (m, &c) in self.basis.iter().zip(&self.coeffs) {
            let e = m.exponents()[var];
            if e == 0 || c == 0.0 {
                continue;
            }
            let mut lowered = m.clone();
            lowered.0[var] -= 1;
            coeffs[index[&lowered]] += c * e as f64;
        }
        Self::from_parts(self.n, self.d, coeffs, self.basis.clone())
    }

    fn partials(&self) -> &[MultiPoly] {
        self.partials
            .get_or_init(|| (0..self.n).map(|i| self.partial(i)).collect())
    }

    pub fn gradient(&self, x: &[f64]) -> Vec<f64> {
        self.partials().iter().map(|p| p.eval(x)).collect()
    }

    /// `q(t) = P(p + t u)`, expanded exactly by nested Horner evaluation in
    /// univariate arithmetic. The reference magnitude for the zero test is
    /// the largest coefficient of `P`.
    pub fn restrict_to_line(&self, p: &[f64], u: &[f64]) -> UniPoly {
        debug_assert_eq!(p.len(), self.n);
        debug_assert_eq!(u.len(), self.n);
        let mut coeffs = self.tree.restrict(p, u, 0);
        coeffs.resize(self.d + 1, 0.0);
        UniPoly::with_reference(coeffs, self.max_abs_coeff())
    }

    /// Product of two polynomials in the same number of variables.
    pub fn mul(&self, other: &MultiPoly) -> Result<MultiPoly> {
        if self.n != other.n {
            return Err(Error::InvalidArgument("dimension mismatch".into()));
        }
        let d = self.d + other.d;
        let basis = monomial_basis(self.n, d);
        let index = basis_index(&basis);
        let mut coeffs = vec![0.0; basis.len()];
        let mut key = MultiIndex(vec![0; self.n]);
        for (ma, &ca) in self.basis.iter().zip(&self.coeffs) {
            if ca == 0.0 {
                continue;
            }
            for (mb, &cb) in other.basis.iter().zip(&other.coeffs) {
                if cb == 0.0 {
                    continue;
                }
                for i in 0..self.n {
                    key.0[i] = ma.0[i] + mb.0[i];
                }
                coeffs[index[&key]] += ca * cb;
            }
        }
        Ok(Self::from_parts(self.n, d, coeffs, Arc::new(basis)))
    }

    /// `Q(x) = P(scale * x + shift)` with a diagonal affine change of
    /// variables.
    pub fn compose_diagonal_affine(&self, scale: &[f64], shift: &[f64]) -> MultiPoly {
        assert_eq!(scale.len(), self.n);
        assert_eq!(shift.len(), self.n);
        let index = basis_index(&self.basis);
        let mut coeffs = vec![0.0; self.coeffs.len()];
        let mut target = vec![0u32; self.n];
        for (m, &c) in self.basis.iter().zip(&self.coeffs) {
            if c == 0.0 {
                continue;
            }
            expand_term(
                m.exponents(),
                scale,
                shift,
                0,
                c,
                &mut target,
                &index,
                &mut coeffs,
            );
        }
        Self::from_parts(self.n, self.d, coeffs, self.basis.clone())
    }
}

#[allow(clippy::too_many_arguments)]
fn expand_term(
    exps: &[u32],
    scale: &[f64],
    shift: &[f64],
    var: usize,
    weight: f64,
    target: &mut Vec<u32>,
    index: &HashMap<MultiIndex, usize>,
    coeffs: &mut [f64],
) {
    if var == exps.len() {
        coeffs[index[&MultiIndex(target.clone())]] += weight;
        return;
    }
    let a = exps[var] as usize;
    for k in 0..=a {
        let w = binomial(a, k) as f64 * scale[var].powi(k as i32) * shift[var].powi((a - k) as i32);
        if w == 0.0 {
            continue;
        }
        target[var] = k as u32;
        expand_term(
            exps,
            scale,
            shift,
            var + 1,
            weight * w,
            target,
            index,
            coeffs,
        );
    }
    target[var] = 0;
}

fn basis_index(basis: &[MultiIndex]) -> HashMap<MultiIndex, usize> {
    basis
        .iter()
        .cloned()
        .enumerate()
        .map(|(i, m)| (m, i))
        .collect()
}

impl std::ops::Neg for &MultiPoly {
    type Output = MultiPoly;

    fn neg(self) -> MultiPoly {
        self.with_coeffs(self.coeffs.iter().map(|c| -c).collect())
            .expect("same shape")
    }
}

#[derive(Serialize, Deserialize)]
struct PolyRecord {
    n: usize,
    d: usize,
    coeffs: Vec<(MultiIndex, f64)>,
}

impl Serialize for MultiPoly {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        PolyRecord {
            n: self.n,
            d: self.d,
            coeffs: self
                .basis
                .iter()
                .zip(&self.coeffs)
                .filter(|(_, &c)| c != 0.0)
                .map(|(m, &c)| (m.clone(), c))
                .collect(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for MultiPoly {
    fn deserialize<D: serde::Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
        let rec = PolyRecord::deserialize(de)?;
        let terms: Vec<(&[u32], f64)> = rec
            .coeffs
            .iter()
            .map(|(m, c)| (m.exponents(), *c))
            .collect();
        MultiPoly::from_terms(rec.n, rec.d, &terms).map_err(serde::de::Error::custom)
    }
}

/// A univariate polynomial with ascending coefficients.
///
/// `reference` is the magnitude against which the identically-zero test is
/// made; for restrictions it is the largest coefficient of the parent
/// multivariate polynomial.
#[derive(Debug, Clone, PartialEq)]
pub struct UniPoly {
    coeffs: Vec<f64>,
    reference: f64,
}

impl UniPoly {
    pub fn new(coeffs: Vec<f64>) -> Self {
        let reference = coeffs.iter().fold(0.0_f64, |m, c| m.max(c.abs()));
        Self { coeffs, reference }
    }

    pub fn with_reference(coeffs: Vec<f64>, reference: f64) -> Self {
        Self { coeffs, reference }
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    /// Nominal degree; the leading stored coefficient may be zero.
    pub fn degree(&self) -> usize {
        self.coeffs.len().saturating_sub(1)
    }

    pub fn eval(&self, t: f64) -> f64 {
        horner(&self.coeffs, t)
    }

    pub fn is_negligible(&self) -> bool {
        let tol = LINE_CONTAINED_TOL * self.reference;
        self.coeffs.iter().all(|c| c.abs() <= tol)
    }

    /// Number of distinct real roots in `(a, b]`.
    pub fn count_distinct_roots(&self, a: f64, b: f64) -> Result<usize, LineContained> {
        assert!(a < b, "empty interval");
        if self.is_negligible() {
            return Err(LineContained);
        }
        Ok(Sturm::on_interval(&self.coeffs, a, b).map_or(0, |s| s.count(-1.0, 1.0)))
    }

    /// Distinct real roots in `(a, b]`, in increasing order.
    pub fn real_roots(&self, a: f64, b: f64) -> Result<Vec<f64>, LineContained> {
        assert!(a < b, "empty interval");
        if self.is_negligible() {
            return Err(LineContained);
        }
        let Some(sturm) = Sturm::on_interval(&self.coeffs, a, b) else {
            return Ok(Vec::new());
        };
        let mid = 0.5 * (a + b);
        let half = 0.5 * (b - a);
        Ok(sturm
            .isolate()
            .into_iter()
            .map(|s| mid + half * s)
            .collect())
    }
}

fn horner(c: &[f64], t: f64) -> f64 {
    c.iter().rev().fold(0.0, |acc, &ci| acc * t + ci)
}

fn trim(c: &mut Vec<f64>, rel: f64) {
    let scale = c.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
    while c.len() > 1 && c.last().is_some_and(|x| x.abs() <= rel * scale) {
        c.pop();
    }
}

fn normalize_max(c: &mut [f64]) {
    let scale = c.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
    if scale > 0.0 {
        c.iter_mut().for_each(|x| *x /= scale);
    }
}

/// Sturm chain of a polynomial rescaled so that the interval of interest is
/// `(-1, 1]`.
struct Sturm {
    chain: Vec<Vec<f64>>,
}

impl Sturm {
    const TRIM: f64 = 1e-13;
    const REMAINDER_ZERO: f64 = 1e-11;

    /// `None` when the polynomial is a nonzero constant on the interval.
    fn on_interval(coeffs: &[f64], a: f64, b: f64) -> Option<Sturm> {
        let m = 0.5 * (a + b);
        let h = 0.5 * (b - a);
        // q(m + h s) by Horner in polynomial arithmetic.
        let mut shifted: Vec<f64> = vec![0.0];
        for &c in coeffs.iter().rev() {
            let mut next = vec![0.0; shifted.len() + 1];
            for (k, &s) in shifted.iter().enumerate() {
                next[k] += m * s;
                next[k + 1] += h * s;
            }
            next[0] += c;
            shifted = next;
        }
        trim(&mut shifted, Self::TRIM);
        if shifted.len() <= 1 {
            return None;
        }
        normalize_max(&mut shifted);
        let mut deriv: Vec<f64> = shifted
            .iter()
            .enumerate()
            .skip(1)
            .map(|(k, &c)| k as f64 * c)
            .collect();
        trim(&mut deriv, Self::TRIM);
        normalize_max(&mut deriv);
        let mut chain = vec![shifted, deriv];
        loop {
            let len = chain.len();
            if chain[len - 1].len() <= 1 {
                break;
            }
            let mut rem = remainder(&chain[len - 2], &chain[len - 1]);
            let size = rem.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
            if size <= Self::REMAINDER_ZERO {
                break;
            }
            rem.iter_mut().for_each(|x| *x = -*x);
            trim(&mut rem, Self::TRIM);
            normalize_max(&mut rem);
            chain.push(rem);
        }
        Some(Sturm { chain })
    }

    fn variations(&self, x: f64) -> usize {
        let mut count = 0;
        let mut last = 0.0_f64;
        for p in &self.chain {
            let v = horner(p, x);
            let mag: f64 = p
                .iter()
                .enumerate()
                .map(|(k, c)| c.abs() * x.abs().powi(k as i32))
                .sum();
            if v.abs() <= 1e-14 * mag {
                continue;
            }
            if last != 0.0 && (v > 0.0) != (last > 0.0) {
                count += 1;
            }
            last = v;
        }
        count
    }

    fn count(&self, lo: f64, hi: f64) -> usize {
        let degree = self.chain[0].len() - 1;
        self.variations(lo)
            .saturating_sub(self.variations(hi))
            .min(degree)
    }

    fn isolate(&self) -> Vec<f64> {
        let p = &self.chain[0];
        let mut roots = Vec::new();
        let mut stack = vec![(-1.0_f64, 1.0_f64, self.count(-1.0, 1.0))];
        while let Some((lo, hi, k)) = stack.pop() {
            if k == 0 {
                continue;
            }
            if k == 1 || hi - lo < 1e-13 {
                roots.push(self.refine(p, lo, hi));
                continue;
            }
            // Split slightly off-centre so that dyadic roots do not land on
            // the cut point.
            let mid = lo + (hi - lo) * 0.500_000_119;
            let left = self.count(lo, mid);
            stack.push((mid, hi, k.saturating_sub(left)));
            stack.push((lo, mid, left));
        }
        roots.sort_by(f64::total_cmp);
        roots
    }

    fn refine(&self, p: &[f64], mut lo: f64, mut hi: f64) -> f64 {
        let flo = horner(p, lo);
        let fhi = horner(p, hi);
        if flo != 0.0 && fhi != 0.0 && (flo > 0.0) != (fhi > 0.0) {
            let lo_positive = flo > 0.0;
            for _ in 0..80 {
                let mid = 0.5 * (lo + hi);
                let fm = horner(p, mid);
                if fm == 0.0 {
                    return mid;
                }
                if (fm > 0.0) == lo_positive {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            return 0.5 * (lo + hi);
        }
        if fhi == 0.0 {
            return hi;
        }
        // Even multiplicity: shrink with root counts.
        for _ in 0..80 {
            let mid = 0.5 * (lo + hi);
            if self.count(lo, mid) > 0 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        0.5 * (lo + hi)
    }
}

/// Remainder of `a / b` (both ascending, `b` with nonzero leading term).
fn remainder(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut r = a.to_vec();
    let db = b.len() - 1;
    let lead = b[db];
    while r.len() > db {
        let k = r.len() - 1;
        let q = r[k] / lead;
        let shift = k - db;
        for (i, &bi) in b.iter().enumerate() {
            r[shift + i] -= q * bi;
        }
        r.pop();
    }
    if r.is_empty() {
        r.push(0.0);
    }
    r
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn poly2(terms: &[(&[u32], f64)], d: usize) -> MultiPoly {
        MultiPoly::from_terms(2, d, terms).unwrap()
    }

    #[test]
    fn basis_examples() {
        let b = monomial_basis(1, 2);
        assert_eq!(
            b,
            vec![
                MultiIndex(vec![0]),
                MultiIndex(vec![1]),
                MultiIndex(vec![2])
            ]
        );
        assert_eq!(monomial_basis(2, 2).len(), 6);
        assert_eq!(monomial_basis(3, 0), vec![MultiIndex(vec![0, 0, 0])]);
        let b22: Vec<Vec<u32>> = monomial_basis(2, 2).into_iter().map(|m| m.0).collect();
        assert_eq!(
            b22,
            vec![
                vec![0, 0],
                vec![1, 0],
                vec![0, 1],
                vec![2, 0],
                vec![1, 1],
                vec![0, 2]
            ]
        );
    }

    #[test]
    fn basis_is_sorted_and_unique() {
        let b = monomial_basis(3, 4);
        for w in b.windows(2) {
            let (x, y) = (&w[0], &w[1]);
            assert!(x.degree() < y.degree() || (x.degree() == y.degree() && x.0 > y.0));
        }
    }

    #[test]
    fn pascal_recurrence() {
        for n in 2..=5 {
            for d in 1..=6 {
                assert_eq!(
                    monomial_basis(n, d).len(),
                    monomial_basis(n - 1, d).len() + monomial_basis(n, d - 1).len()
                );
            }
        }
    }

    #[test]
    fn stone_tukey_examples() {
        assert_eq!(stone_tukey_degree(2, 5), 2);
        assert_eq!(stone_tukey_degree(2, 1), 1);
        // C(6,3) - 1 = 19
        assert_eq!(binomial(6, 3) - 1, 19);
        assert_eq!(stone_tukey_degree(3, 19), 3);
    }

    #[test]
    fn stone_tukey_boundaries() {
        for n in 1..=6 {
            for d in 1..=6 {
                let cap = (binomial(n + d, d) - 1) as usize;
                assert_eq!(stone_tukey_degree(n, cap), d, "n={n} d={d}");
                assert_eq!(stone_tukey_degree(n, cap + 1), d + 1, "n={n} d={d}");
            }
        }
    }

    #[test]
    fn evaluate_examples() {
        let x1 = poly2(&[(&[1, 0], 1.0)], 1);
        assert_eq!(x1.eval(&[3.0, 0.0]), 3.0);
        let circle = poly2(&[(&[2, 0], 1.0), (&[0, 2], 1.0), (&[0, 0], -1.0)], 2);
        assert_eq!(circle.eval(&[1.0, 0.0]), 0.0);
        assert_eq!(MultiPoly::zero(2, 3).eval(&[0.3, -7.0]), 0.0);
    }

    #[test]
    fn restriction_examples() {
        let p = poly2(&[(&[2, 0], 1.0), (&[0, 2], 1.0)], 2);
        let q = p.restrict_to_line(&[0.0, 0.0], &[1.0, 0.0]);
        assert_eq!(q.coeffs(), &[0.0, 0.0, 1.0]);

        let p = poly2(&[(&[1, 0], 1.0), (&[0, 0], -1.0)], 1);
        let q = p.restrict_to_line(&[0.0, 0.0], &[0.0, 1.0]);
        assert_eq!(q.coeffs(), &[-1.0, 0.0]);
        assert_eq!(q.count_distinct_roots(-5.0, 5.0), Ok(0));

        // x1 x2 at (1,1) + t (1,0) = 1 + t
        let p = poly2(&[(&[1, 1], 1.0)], 2);
        let q = p.restrict_to_line(&[1.0, 1.0], &[1.0, 0.0]);
        assert_eq!(q.coeffs(), &[1.0, 1.0, 0.0]);
    }

    #[test]
    fn root_count_examples() {
        let q = UniPoly::new(vec![-1.0, 0.0, 1.0]);
        assert_eq!(q.count_distinct_roots(-2.0, 2.0), Ok(2));
        let q = UniPoly::new(vec![1.0, 0.0, 1.0]);
        assert_eq!(q.count_distinct_roots(-2.0, 2.0), Ok(0));
        let q = UniPoly::new(vec![1.0, -2.0, 1.0]);
        assert_eq!(q.count_distinct_roots(0.0, 2.0), Ok(1));
        assert_eq!(dense_scan_distinct(&q, 0.0, 2.0), 1);
    }

    #[test]
    fn half_open_interval() {
        // roots at 0 and 1; (0, 1] contains only 1
        let q = UniPoly::new(vec![0.0, -1.0, 1.0]);
        assert_eq!(q.count_distinct_roots(0.0, 1.0), Ok(1));
        assert_eq!(q.count_distinct_roots(-1.0, 0.0), Ok(1));
        assert_eq!(q.count_distinct_roots(-1.0, 1.0), Ok(2));
    }

    #[test]
    fn line_contained() {
        let p = poly2(&[(&[0, 1], 1.0)], 1);
        let q = p.restrict_to_line(&[3.0, 0.0], &[1.0, 0.0]);
        assert_eq!(q.count_distinct_roots(-1.0, 1.0), Err(LineContained));
    }

    #[test]
    fn real_roots_located() {
        // (t - 0.3)(t + 0.7)(t - 1.9)
        let q = UniPoly::new(vec![0.399, -0.97, -1.5, 1.0]);
        let r = q.real_roots(-1.0, 2.0).unwrap();
        assert_eq!(r.len(), 3);
        for (got, want) in r.iter().zip([-0.7, 0.3, 1.9]) {
            assert!((got - want).abs() < 1e-10, "{got} vs {want}");
        }
        let double = UniPoly::new(vec![0.25, -1.0, 1.0]);
        let r = double.real_roots(0.0, 1.0).unwrap();
        assert_eq!(r.len(), 1);
        assert!((r[0] - 0.5).abs() < 1e-6);
    }

    #[test]
    fn many_real_roots() {
        // product of (t - k/10) for k = 1..9
        let mut c = vec![1.0];
        for k in 1..=9 {
            let r = k as f64 / 10.0;
            let mut next = vec![0.0; c.len() + 1];
            for (i, &ci) in c.iter().enumerate() {
                next[i] -= r * ci;
                next[i + 1] += ci;
            }
            c = next;
        }
        let q = UniPoly::new(c);
        assert_eq!(q.count_distinct_roots(0.0, 1.0), Ok(9));
        assert_eq!(q.count_distinct_roots(0.15, 0.55), Ok(4));
    }

    #[test]
    fn products_and_affine_composition() {
        let a = MultiPoly::linear(&[1.0, 0.0], -1.0);
        let b = MultiPoly::linear(&[0.0, 2.0], 0.5);
        let ab = a.mul(&b).unwrap();
        let x = [0.3, -1.2];
        assert!((ab.eval(&x) - a.eval(&x) * b.eval(&x)).abs() < 1e-14);

        let s = [2.0, -0.5];
        let t = [1.0, 3.0];
        let c = ab.compose_diagonal_affine(&s, &t);
        let y = [s[0] * x[0] + t[0], s[1] * x[1] + t[1]];
        assert!((c.eval(&x) - ab.eval(&y)).abs() < 1e-12);
    }

    #[test]
    fn gradient_matches_finite_difference() {
        let p = poly2(&[(&[2, 1], 1.5), (&[0, 3], -0.5), (&[1, 0], 2.0)], 3);
        let x = [0.4, -0.8];
        let g = p.gradient(&x);
        for i in 0..2 {
            let mut xp = x;
            let mut xm = x;
            xp[i] += 1e-6;
            xm[i] -= 1e-6;
            let fd = (p.eval(&xp) - p.eval(&xm)) / 2e-6;
            assert!((g[i] - fd).abs() < 1e-6);
        }
    }

    #[test]
    fn serde_round_trip_omits_zeros() {
        let p = poly2(&[(&[1, 1], 2.0), (&[0, 0], -1.0)], 2);
        let s = serde_json::to_string(&p).unwrap();
        assert_eq!(s, r#"{"n":2,"d":2,"coeffs":[[[0,0],-1.0],[[1,1],2.0]]}"#);
        let back: MultiPoly = serde_json::from_str(&s).unwrap();
        assert_eq!(back, p);
        assert!(
            serde_json::from_str::<MultiPoly>(r#"{"n":2,"d":1,"coeffs":[[[1,1],1.0]]}"#).is_err()
        );
    }

    /// Independent distinct-root count: dense sign scan plus local minima of
    /// |q| that touch zero (even multiplicity).
    fn dense_scan_distinct(q: &UniPoly, a: f64, b: f64) -> usize {
        let steps = 200_000;
        let h = (b - a) / steps as f64;
        let vals: Vec<f64> = (0..=steps).map(|i| q.eval(a + h * i as f64)).collect();
        let mut count = 0;
        let mut i = 1;
        while i <= steps {
            let (prev, cur) = (vals[i - 1], vals[i]);
            let crossing = prev != 0.0 && cur != 0.0 && (prev > 0.0) != (cur > 0.0);
            let touch = cur.abs() < 1e-9
                && i < steps
                && vals[i + 1].abs() > cur.abs()
                && prev.abs() > cur.abs();
            if crossing || touch {
                count += 1;
            }
            i += 1;
        }
        count
    }

    fn arb_poly(n: usize, d: usize) -> impl Strategy<Value = MultiPoly> {
        prop::collection::vec(-1.0f64..1.0, basis_len(n, d))
            .prop_map(move |c| MultiPoly::new(n, d, c).unwrap())
    }

    proptest! {
        #[test]
        fn restriction_agrees_with_evaluation(
            p in arb_poly(3, 4),
            base in prop::collection::vec(-2.0f64..2.0, 3),
            dir in prop::collection::vec(-1.0f64..1.0, 3),
            ts in prop::collection::vec(-3.0f64..3.0, 20),
        ) {
            let norm = dir.iter().map(|x| x * x).sum::<f64>().sqrt();
            prop_assume!(norm > 1e-3);
            let u: Vec<f64> = dir.iter().map(|x| x / norm).collect();
            let q = p.restrict_to_line(&base, &u);
            for t in ts {
                let x: Vec<f64> = base.iter().zip(&u).map(|(b, v)| b + t * v).collect();
                let direct = p.eval(&x);
                let scale = 1.0 + direct.abs();
                prop_assert!((q.eval(t) - direct).abs() <= 1e-9 * scale * 100.0);
            }
        }

        #[test]
        fn root_count_never_exceeds_degree(
            p in arb_poly(2, 5),
            base in prop::collection::vec(-1.0f64..1.0, 2),
            angle in 0.0f64..std::f64::consts::PI,
        ) {
            let u = [angle.cos(), angle.sin()];
            let q = p.restrict_to_line(&base, &u);
            if let Ok(k) = q.count_distinct_roots(-3.0, 3.0) {
                prop_assert!(k <= 5);
            }
        }

        #[test]
        fn root_count_matches_root_isolation(
            roots in prop::collection::vec(-0.95f64..0.95, 1..6),
        ) {
            let mut sorted = roots.clone();
            sorted.sort_by(f64::total_cmp);
            prop_assume!(sorted.windows(2).all(|w| w[1] - w[0] > 1e-2));
            let mut c = vec![1.0];
            for r in &sorted {
                let mut next = vec![0.0; c.len() + 1];
                for (i, &ci) in c.iter().enumerate() {
                    next[i] -= r * ci;
                    next[i + 1] += ci;
                }
                c = next;
            }
            let q = UniPoly::new(c);
            prop_assert_eq!(q.count_distinct_roots(-1.0, 1.0).unwrap(), sorted.len());
            let found = q.real_roots(-1.0, 1.0).unwrap();
            prop_assert_eq!(found.len(), sorted.len());
            for (f, r) in found.iter().zip(&sorted) {
                prop_assert!((f - r).abs() < 1e-7);
            }
        }
    }
}
