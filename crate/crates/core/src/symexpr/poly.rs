//! Sparse multivariate polynomials over the rationals.
//!
//! Variables are chart coordinates or opaque elementary-function atoms. Terms
//! are kept in a `BTreeMap` keyed by monomials ordered graded-lexicographically,
//! so the last entry is always the leading term.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::Arc;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use super::scalar::Atom;

pub type Rat = BigRational;

/// A polynomial indeterminate.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Var {
    Coord(usize),
    Atom(Arc<Atom>),
}

/// A power product, sorted by variable with strictly positive exponents.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Monomial(Vec<(Var, u32)>);

impl Monomial {
    pub fn one() -> Self {
        Monomial(Vec::new())
    }

    pub fn var(v: Var, e: u32) -> Self {
        if e == 0 {
            Monomial::one()
        } else {
            Monomial(vec![(v, e)])
        }
    }

    pub fn is_one(&self) -> bool {
        self.0.is_empty()
    }

    pub fn degree(&self) -> u32 {
        self.0.iter().map(|(_, e)| e).sum()
    }

    pub fn factors(&self) -> &[(Var, u32)] {
        &self.0
    }

    pub fn exponent(&self, v: &Var) -> u32 {
        self.0
            .iter()
            .find(|(w, _)| w == v)
            .map(|(_, e)| *e)
            .unwrap_or(0)
    }

    pub fn mul(&self, other: &Monomial) -> Monomial {
        let mut out = Vec::with_capacity(self.0.len() + other.0.len());
        let (mut i, mut j) = (0, 0);
        while i < self.0.len() && j < other.0.len() {
            match self.0[i].0.cmp(&other.0[j].0) {
                Ordering::Less => {
                    out.push(self.0[i].clone());
                    i += 1;
                }
                Ordering::Greater => {
                    out.push(other.0[j].clone());
                    j += 1;
                }
                Ordering::Equal => {
                    out.push((self.0[i].0.clone(), self.0[i].1 + other.0[j].1));
                    i += 1;
                    j += 1;
                }
            }
        }
        out.extend_from_slice(&self.0[i..]);
        out.extend_from_slice(&other.0[j..]);
        Monomial(out)
    }

    /// `self / other` when `other` divides `self`.
    pub fn div(&self, other: &Monomial) -> Option<Monomial> {
        let mut out = Vec::with_capacity(self.0.len());
        let mut j = 0;
        for (v, e) in &self.0 {
            if j < other.0.len() && other.0[j].0 < *v {
                return None;
            }
            if j < other.0.len() && other.0[j].0 == *v {
                let f = other.0[j].1;
                j += 1;
                match e.cmp(&f) {
                    Ordering::Less => return None,
                    Ordering::Equal => {}
                    Ordering::Greater => out.push((v.clone(), e - f)),
                }
            } else {
                out.push((v.clone(), *e));
            }
        }
        if j < other.0.len() {
            return None;
        }
        Some(Monomial(out))
    }

    /// Removes variable `v`, returning its exponent and the remaining monomial.
    pub fn split_off(&self, v: &Var) -> (u32, Monomial) {
        let mut e = 0;
        let rest = self
            .0
            .iter()
            .filter(|(w, k)| {
                if w == v {
                    e = *k;
                    false
                } else {
                    true
                }
            })
            .cloned()
            .collect();
        (e, Monomial(rest))
    }
}

impl Ord for Monomial {
    fn cmp(&self, other: &Self) -> Ordering {
        let d = self.degree().cmp(&other.degree());
        if d != Ordering::Equal {
            return d;
        }
        // graded lex: earlier variables are more significant
        let (mut i, mut j) = (0, 0);
        loop {
            match (self.0.get(i), other.0.get(j)) {
                (None, None) => return Ordering::Equal,
                (Some(_), None) => return Ordering::Greater,
                (None, Some(_)) => return Ordering::Less,
                (Some((a, ea)), Some((b, eb))) => match a.cmp(b) {
                    Ordering::Less => return Ordering::Greater,
                    Ordering::Greater => return Ordering::Less,
                    Ordering::Equal => {
                        if ea != eb {
                            return ea.cmp(eb);
                        }
                        i += 1;
                        j += 1;
                    }
                },
            }
        }
    }
}

impl PartialOrd for Monomial {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, PartialOrd, Ord)]
pub struct Poly {
    terms: BTreeMap<Monomial, Rat>,
}

impl Poly {
    pub fn zero() -> Self {
        Poly::default()
    }

    pub fn one() -> Self {
        Poly::constant(Rat::one())
    }

    pub fn constant(c: Rat) -> Self {
        let mut terms = BTreeMap::new();
        if !c.is_zero() {
            terms.insert(Monomial::one(), c);
        }
        Poly { terms }
    }

    pub fn var(v: Var) -> Self {
        Poly::term(Rat::one(), Monomial::var(v, 1))
    }

    pub fn term(c: Rat, m: Monomial) -> Self {
        let mut terms = BTreeMap::new();
        if !c.is_zero() {
            terms.insert(m, c);
        }
        Poly { terms }
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn is_one(&self) -> bool {
        self.as_constant().map(|c| c.is_one()).unwrap_or(false)
    }

    pub fn as_constant(&self) -> Option<Rat> {
        match self.terms.len() {
            0 => Some(Rat::zero()),
            1 => {
                let (m, c) = self.terms.iter().next().unwrap();
                m.is_one().then(|| c.clone())
            }
            _ => None,
        }
    }

    pub fn terms(&self) -> impl DoubleEndedIterator<Item = (&Monomial, &Rat)> {
        self.terms.iter()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn leading(&self) -> Option<(&Monomial, &Rat)> {
        self.terms.iter().next_back()
    }

    pub fn total_degree(&self) -> u32 {
        self.leading().map(|(m, _)| m.degree()).unwrap_or(0)
    }

    pub fn vars(&self) -> BTreeSet<Var> {
        self.terms
            .keys()
            .flat_map(|m| m.0.iter().map(|(v, _)| v.clone()))
            .collect()
    }

    pub fn has_atoms(&self) -> bool {
        self.terms
            .keys()
            .any(|m| m.0.iter().any(|(v, _)| matches!(v, Var::Atom(_))))
    }

    fn add_term(&mut self, m: Monomial, c: Rat) {
        if c.is_zero() {
            return;
        }
        match self.terms.get_mut(&m) {
            Some(existing) => {
                *existing += c;
                if existing.is_zero() {
                    self.terms.remove(&m);
                }
            }
            None => {
                self.terms.insert(m, c);
            }
        }
    }

    pub fn add(&self, other: &Poly) -> Poly {
        let (mut big, small) = if self.len() >= other.len() {
            (self.clone(), other)
        } else {
            (other.clone(), self)
        };
        for (m, c) in &small.terms {
            big.add_term(m.clone(), c.clone());
        }
        big
    }

    pub fn sub(&self, other: &Poly) -> Poly {
        self.add(&other.neg())
    }

    pub fn neg(&self) -> Poly {
        Poly {
            terms: self.terms.iter().map(|(m, c)| (m.clone(), -c)).collect(),
        }
    }

    pub fn scale(&self, k: &Rat) -> Poly {
        if k.is_zero() {
            return Poly::zero();
        }
        Poly {
            terms: self.terms.iter().map(|(m, c)| (m.clone(), c * k)).collect(),
        }
    }

    pub fn mul_term(&self, m: &Monomial, k: &Rat) -> Poly {
        if k.is_zero() {
            return Poly::zero();
        }
        Poly {
            terms: self
                .terms
                .iter()
                .map(|(n, c)| (n.mul(m), c * k))
                .collect(),
        }
    }

    pub fn mul(&self, other: &Poly) -> Poly {
        if self.is_zero() || other.is_zero() {
            return Poly::zero();
        }
        let mut out = Poly::zero();
        for (m1, c1) in &self.terms {
            for (m2, c2) in &other.terms {
                out.add_term(m1.mul(m2), c1 * c2);
            }
        }
        out
    }

    pub fn pow(&self, e: u32) -> Poly {
        let mut acc = Poly::one();
        let mut base = self.clone();
        let mut e = e;
        while e > 0 {
            if e & 1 == 1 {
                acc = acc.mul(&base);
            }
            e >>= 1;
            if e > 0 {
                base = base.mul(&base);
            }
        }
        acc
    }

    /// Exact quotient `self / d`, or `None` when `d` does not divide `self`.
    pub fn div_exact(&self, d: &Poly) -> Option<Poly> {
        assert!(!d.is_zero(), "division by the zero polynomial");
        if let Some(c) = d.as_constant() {
            return Some(self.scale(&c.recip()));
        }
        let (lm, lc) = d.leading().map(|(m, c)| (m.clone(), c.clone()))?;
        let mut rem = self.clone();
        let mut quot = Poly::zero();
        while let Some((m, c)) = rem.leading().map(|(m, c)| (m.clone(), c.clone())) {
            let qm = m.div(&lm)?;
            let qc = c / &lc;
            rem = rem.sub(&d.mul_term(&qm, &qc));
            quot.add_term(qm, qc);
        }
        Some(quot)
    }

    /// Scales so the leading coefficient is one. Returns the factor removed.
    pub fn monic(&self) -> (Rat, Poly) {
        match self.leading() {
            None => (Rat::one(), Poly::zero()),
            Some((_, lc)) => {
                let lc = lc.clone();
                (lc.clone(), self.scale(&lc.recip()))
            }
        }
    }

    pub fn degree_in(&self, v: &Var) -> u32 {
        self.terms.keys().map(|m| m.exponent(v)).max().unwrap_or(0)
    }

    /// Coefficient of `v^k`, a polynomial free of `v`.
    pub fn coeff_in(&self, v: &Var, k: u32) -> Poly {
        let mut out = Poly::zero();
        for (m, c) in &self.terms {
            let (e, rest) = m.split_off(v);
            if e == k {
                out.add_term(rest, c.clone());
            }
        }
        out
    }

    fn coeffs_in(&self, v: &Var) -> Vec<Poly> {
        let n = self.degree_in(v) as usize;
        let mut out = vec![Poly::zero(); n + 1];
        for (m, c) in &self.terms {
            let (e, rest) = m.split_off(v);
            out[e as usize].add_term(rest, c.clone());
        }
        out
    }

    /// Partial derivative with respect to a polynomial variable.
    pub fn diff_var(&self, v: &Var) -> Poly {
        let mut out = Poly::zero();
        for (m, c) in &self.terms {
            let e = m.exponent(v);
            if e == 0 {
                continue;
            }
            let reduced = m.div(&Monomial::var(v.clone(), 1)).expect("exponent checked");
            out.add_term(reduced, c * Rat::from_integer(BigInt::from(e)));
        }
        out
    }

    /// Substitutes the polynomial `p` for variable `v`.
    pub fn substitute(&self, v: &Var, p: &Poly) -> Poly {
        let coeffs = self.coeffs_in(v);
        // Horner
        let mut acc = Poly::zero();
        for c in coeffs.iter().rev() {
            acc = acc.mul(p).add(c);
        }
        acc
    }

    pub fn eval_with<F>(&self, mut var_value: F) -> f64
    where
        F: FnMut(&Var) -> f64,
    {
        let mut total = 0.0;
        for (m, c) in &self.terms {
            let mut t = rat_to_f64(c);
            for (v, e) in &m.0 {
                t *= var_value(v).powi(*e as i32);
            }
            total += t;
        }
        total
    }

    /// Greatest common divisor, normalised to be monic.
    pub fn gcd(&self, other: &Poly) -> Poly {
        if self.is_zero() {
            return other.monic().1;
        }
        if other.is_zero() {
            return self.monic().1;
        }
        if self.as_constant().is_some() || other.as_constant().is_some() {
            return Poly::one();
        }
        if self == other {
            return self.monic().1;
        }
        gcd_recursive(self, other).monic().1
    }

    /// The largest rational `q` such that `self / q` has integer coprime
    /// coefficients with positive leading coefficient.
    pub fn numeric_content(&self) -> Rat {
        let mut num = BigInt::zero();
        let mut den = BigInt::one();
        for c in self.terms.values() {
            num = num.gcd(c.numer());
            den = den.lcm(c.denom());
        }
        if num.is_zero() {
            return Rat::one();
        }
        let mut q = Rat::new(num, den);
        if self.leading().map(|(_, c)| c.is_negative()).unwrap_or(false) {
            q = -q;
        }
        q
    }
}

fn content_in(p: &Poly, v: &Var) -> Poly {
    let mut g = Poly::zero();
    for c in p.coeffs_in(v) {
        if c.is_zero() {
            continue;
        }
        g = if g.is_zero() { c.monic().1 } else { g.gcd(&c) };
        if g.is_one() {
            break;
        }
    }
    g
}

fn primitive_in(p: &Poly, v: &Var) -> Poly {
    let c = content_in(p, v);
    p.div_exact(&c).expect("content divides").monic().1
}

/// Pseudo-remainder of `a` by `b` as polynomials in `v`.
fn pseudo_rem(a: &Poly, b: &Poly, v: &Var) -> Poly {
    let n = b.degree_in(v);
    let lc_b = b.coeff_in(v, n);
    let mut r = a.clone();
    while !r.is_zero() && r.degree_in(v) >= n {
        let dr = r.degree_in(v);
        let lc_r = r.coeff_in(v, dr);
        let shift = Poly::term(Rat::one(), Monomial::var(v.clone(), dr - n));
        r = lc_b.mul(&r).sub(&lc_r.mul(&shift).mul(b));
        // the rational scale is a unit over Q; keep coefficients small
        let k = r.numeric_content();
        if !r.is_zero() {
            r = r.scale(&k.recip());
        }
    }
    r
}

fn gcd_recursive(a: &Poly, b: &Poly) -> Poly {
    let vars: BTreeSet<Var> = a.vars().union(&b.vars()).cloned().collect();
    let v = match vars.iter().next() {
        Some(v) => v.clone(),
        None => return Poly::one(),
    };
    let ca = content_in(a, &v);
    let cb = content_in(b, &v);
    let c = ca.gcd(&cb);
    let mut r0 = a.div_exact(&ca).expect("content divides");
    let mut r1 = b.div_exact(&cb).expect("content divides");
    if r0.degree_in(&v) == 0 || r1.degree_in(&v) == 0 {
        return c;
    }
    if r0.degree_in(&v) < r1.degree_in(&v) {
        std::mem::swap(&mut r0, &mut r1);
    }
    let g = loop {
        let r = pseudo_rem(&r0, &r1, &v);
        if r.is_zero() {
            break primitive_in(&r1, &v);
        }
        if r.degree_in(&v) == 0 {
            break Poly::one();
        }
        r0 = r1;
        r1 = primitive_in(&r, &v);
    };
    c.mul(&g)
}

pub fn rat_to_f64(c: &Rat) -> f64 {
    match (c.numer().to_f64(), c.denom().to_f64()) {
        (Some(n), Some(d)) if n.is_finite() && d.is_finite() => n / d,
        _ => c.to_f64().unwrap_or(f64::NAN),
    }
}

pub fn rat(n: i64, d: i64) -> Rat {
    Rat::new(BigInt::from(n), BigInt::from(d))
}

pub fn int(n: i64) -> Rat {
    Rat::from_integer(BigInt::from(n))
}

impl fmt::Display for Var {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Var::Coord(i) => write!(f, "x{}", i + 1),
            Var::Atom(a) => write!(f, "{}(..)", a.func.name()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn x(i: usize) -> Poly {
        Poly::var(Var::Coord(i))
    }

    fn c(n: i64) -> Poly {
        Poly::constant(int(n))
    }

    #[test]
    fn leading_term_is_graded_lex_maximum() {
        let p = x(0).add(&x(1).pow(2)).add(&c(3));
        let (m, _) = p.leading().unwrap();
        assert_eq!(m, &Monomial::var(Var::Coord(1), 2));
        let q = x(0).mul(&x(1)).add(&x(1).pow(2));
        // x0*x1 > x1^2 since x0 is more significant
        assert_eq!(q.leading().unwrap().0.exponent(&Var::Coord(0)), 1);
    }

    #[test]
    fn exact_division_and_failure() {
        let p = x(0).add(&c(1));
        let q = x(0).sub(&c(1));
        let prod = p.mul(&q);
        assert_eq!(prod.div_exact(&p), Some(q.clone()));
        assert_eq!(prod.add(&c(1)).div_exact(&p), None);
    }

    #[test]
    fn gcd_finds_common_factor() {
        let common = x(0).pow(3).add(&c(1));
        let a = common.mul(&x(1).add(&c(2)));
        let b = common.mul(&common).mul(&x(0).sub(&x(1)));
        assert_eq!(a.gcd(&b), common.monic().1);
        let coprime = x(0).add(&x(1)).gcd(&x(0).sub(&x(1)));
        assert!(coprime.is_one());
    }

    #[test]
    fn gcd_multivariate_with_content() {
        // (x0*x1 + 1)(x2 - x0) and (x0*x1 + 1) * x2^2
        let f = x(0).mul(&x(1)).add(&c(1));
        let a = f.mul(&x(2).sub(&x(0)));
        let b = f.mul(&x(2).pow(2));
        assert_eq!(a.gcd(&b), f);
    }

    #[test]
    fn substitution_and_derivative() {
        let p = x(0).pow(3).add(&x(0).mul(&x(1)));
        let dp = p.diff_var(&Var::Coord(0));
        assert_eq!(dp, x(0).pow(2).scale(&int(3)).add(&x(1)));
        let s = p.substitute(&Var::Coord(1), &c(2));
        assert_eq!(s, x(0).pow(3).add(&x(0).scale(&int(2))));
    }
}
