//! Canonical rational functions of chart coordinates and elementary-function
//! atoms.
//!
//! A [`Scalar`] is `num / den` with `gcd(num, den) = 1` and `den` monic, so two
//! scalars are equal as rational functions exactly when they are structurally
//! equal. Atoms (`sin`, `cos`, `exp`, `log`, `sqrt` applied to a scalar) behave
//! as independent indeterminates, except that `sqrt(u)^2` is rewritten to `u`.

use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};
use std::sync::Arc;

use num_traits::{One, Signed, Zero};

use super::poly::{int, Monomial, Poly, Rat, Var};
use super::{EvalError, Node, ScalarExpr};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Func {
    Sin,
    Cos,
    Exp,
    Log,
    Sqrt,
}

impl Func {
    pub fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Sqrt => "sqrt",
        }
    }

    pub fn from_name(s: &str) -> Option<Func> {
        Some(match s {
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "exp" => Func::Exp,
            "log" => Func::Log,
            "sqrt" => Func::Sqrt,
            _ => return None,
        })
    }

    /// Real evaluation; `None` outside the real domain.
    pub fn apply_f64(self, x: f64) -> Option<f64> {
        match self {
            Func::Sin => Some(x.sin()),
            Func::Cos => Some(x.cos()),
            Func::Exp => Some(x.exp()),
            Func::Log => (x > 0.0).then(|| x.ln()),
            Func::Sqrt => (x >= 0.0).then(|| x.sqrt()),
        }
    }
}

/// An elementary function applied to a normalised argument.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct Atom {
    pub func: Func,
    pub arg: Scalar,
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct Scalar {
    num: Poly,
    den: Poly,
}

impl Default for Scalar {
    fn default() -> Self {
        Scalar::zero()
    }
}

impl Scalar {
    pub fn zero() -> Self {
        Scalar {
            num: Poly::zero(),
            den: Poly::one(),
        }
    }

    pub fn one() -> Self {
        Scalar::from_rat(Rat::one())
    }

    pub fn from_rat(c: Rat) -> Self {
        Scalar {
            num: Poly::constant(c),
            den: Poly::one(),
        }
    }

    pub fn from_int(n: i64) -> Self {
        Scalar::from_rat(int(n))
    }

    pub fn coord(i: usize) -> Self {
        Scalar::from_poly(Poly::var(Var::Coord(i)))
    }

    pub fn from_poly(p: Poly) -> Self {
        Scalar::from_parts(p, Poly::one())
    }

    pub fn numer(&self) -> &Poly {
        &self.num
    }

    pub fn denom(&self) -> &Poly {
        &self.den
    }

    /// Canonicalises `num / den`.
    pub fn from_parts(num: Poly, den: Poly) -> Self {
        assert!(!den.is_zero(), "zero denominator");
        if num.is_zero() {
            return Scalar::zero();
        }
        let (num, den) = if let Some(c) = den.as_constant() {
            (num.scale(&c.recip()), Poly::one())
        } else {
            let g = num.gcd(&den);
            let (num, den) = if g.is_one() {
                (num, den)
            } else {
                (
                    num.div_exact(&g).expect("gcd divides"),
                    den.div_exact(&g).expect("gcd divides"),
                )
            };
            let (lc, den) = den.monic();
            (num.scale(&lc.recip()), den)
        };
        let s = Scalar { num, den };
        if s.has_reducible_roots() {
            s.reduce_roots()
        } else {
            s
        }
    }

    pub fn is_zero(&self) -> bool {
        self.num.is_zero()
    }

    pub fn is_one(&self) -> bool {
        self.den.is_one() && self.num.is_one()
    }

    pub fn as_rat(&self) -> Option<Rat> {
        if self.den.is_one() {
            self.num.as_constant()
        } else {
            None
        }
    }

    pub fn is_polynomial(&self) -> bool {
        self.den.is_one()
    }

    pub fn has_atoms(&self) -> bool {
        self.num.has_atoms() || self.den.has_atoms()
    }

    /// Total degree in the coordinates when this is a polynomial in them.
    pub fn coordinate_degree(&self) -> Option<u32> {
        if !self.is_polynomial() || self.has_atoms() {
            return None;
        }
        Some(self.num.total_degree())
    }

    /// Largest coordinate index that occurs, including inside atoms.
    pub fn max_coord(&self) -> Option<usize> {
        let mut best: Option<usize> = None;
        for p in [&self.num, &self.den] {
            for v in p.vars() {
                let cand = match v {
                    Var::Coord(i) => Some(i),
                    Var::Atom(a) => a.arg.max_coord(),
                };
                best = best.max(cand);
            }
        }
        best
    }

    pub fn recip(&self) -> Scalar {
        assert!(!self.is_zero(), "reciprocal of zero");
        Scalar::from_parts(self.den.clone(), self.num.clone())
    }

    pub fn powi(&self, e: i32) -> Scalar {
        if e < 0 {
            return self.recip().powi(-e);
        }
        let e = e as u32;
        Scalar::from_parts(self.num.pow(e), self.den.pow(e))
    }

    pub fn scale(&self, k: &Rat) -> Scalar {
        if k.is_zero() {
            return Scalar::zero();
        }
        Scalar {
            num: self.num.scale(k),
            den: self.den.clone(),
        }
    }

    /// Applies an elementary function, folding the exactly representable cases.
    pub fn apply(func: Func, arg: Scalar) -> Scalar {
        if let Some(c) = arg.as_rat() {
            match func {
                Func::Sin if c.is_zero() => return Scalar::zero(),
                Func::Cos | Func::Exp if c.is_zero() => return Scalar::one(),
                Func::Log if c.is_one() => return Scalar::zero(),
                Func::Sqrt => {
                    if let Some(r) = rational_sqrt(&c) {
                        return Scalar::from_rat(r);
                    }
                }
                _ => {}
            }
        }
        if func == Func::Log {
            if let Some(inner) = arg.as_single_atom(Func::Exp) {
                return inner;
            }
        }
        Scalar::from_poly(Poly::var(Var::Atom(Arc::new(Atom { func, arg }))))
    }

    fn as_single_atom(&self, func: Func) -> Option<Scalar> {
        if !self.den.is_one() || self.num.len() != 1 {
            return None;
        }
        let (m, c) = self.num.leading()?;
        if !c.is_one() || m.factors().len() != 1 || m.factors()[0].1 != 1 {
            return None;
        }
        match &m.factors()[0].0 {
            Var::Atom(a) if a.func == func => Some(a.arg.clone()),
            _ => None,
        }
    }

    fn has_reducible_roots(&self) -> bool {
        [&self.num, &self.den].iter().any(|p| {
            p.terms().any(|(m, _)| {
                m.factors()
                    .iter()
                    .any(|(v, e)| *e >= 2 && matches!(v, Var::Atom(a) if a.func == Func::Sqrt))
            })
        })
    }

    fn reduce_roots(&self) -> Scalar {
        let num = reduce_poly_roots(&self.num);
        let den = reduce_poly_roots(&self.den);
        &num / &den
    }

    /// Exact partial derivative with respect to coordinate `i`.
    pub fn diff(&self, i: usize) -> Scalar {
        let dn = diff_poly(&self.num, i);
        if self.den.is_one() {
            return dn;
        }
        let dd = diff_poly(&self.den, i);
        let n = Scalar::from_poly(self.num.clone());
        let d = Scalar::from_poly(self.den.clone());
        &(&(&dn * &d) - &(&n * &dd)) / &(&d * &d)
    }

    pub fn eval(&self, p: &[f64]) -> Result<f64, EvalError> {
        let n = eval_poly(&self.num, p)?;
        if self.den.is_one() {
            return Ok(n);
        }
        let d = eval_poly(&self.den, p)?;
        if d == 0.0 || !d.is_finite() {
            return Err(EvalError::Pole { point: p.to_vec() });
        }
        let v = n / d;
        if v.is_finite() {
            Ok(v)
        } else {
            Err(EvalError::Pole { point: p.to_vec() })
        }
    }

    /// Like [`Scalar::eval`] but maps evaluation failures to NaN.
    pub fn eval_or_nan(&self, p: &[f64]) -> f64 {
        self.eval(p).unwrap_or(f64::NAN)
    }

    /// Builds the canonical expression tree of this scalar.
    pub fn to_expr(&self) -> ScalarExpr {
        let n = poly_to_expr(&self.num);
        if self.den.is_one() {
            n
        } else {
            ScalarExpr::new(Node::Quotient(n, poly_to_expr(&self.den)))
        }
    }

    pub fn display<'a>(&'a self, names: &'a [String]) -> impl fmt::Display + 'a {
        DisplayScalar { s: self, names }
    }
}

struct DisplayScalar<'a> {
    s: &'a Scalar,
    names: &'a [String],
}

impl fmt::Display for DisplayScalar<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.s.to_expr().display(self.names))
    }
}

fn rational_sqrt(c: &Rat) -> Option<Rat> {
    if c.is_negative() {
        return None;
    }
    let n = c.numer().sqrt();
    let d = c.denom().sqrt();
    (&n * &n == *c.numer() && &d * &d == *c.denom()).then(|| Rat::new(n, d))
}

fn reduce_poly_roots(p: &Poly) -> Scalar {
    let mut acc = Scalar::zero();
    for (m, c) in p.terms() {
        let mut term = Scalar::from_rat(c.clone());
        let mut plain = Monomial::one();
        for (v, e) in m.factors() {
            match v {
                Var::Atom(a) if a.func == Func::Sqrt && *e >= 2 => {
                    term = &term * &a.arg.powi((*e / 2) as i32);
                    if e % 2 == 1 {
                        plain = plain.mul(&Monomial::var(v.clone(), 1));
                    }
                }
                _ => plain = plain.mul(&Monomial::var(v.clone(), *e)),
            }
        }
        let plain = Scalar {
            num: Poly::term(Rat::one(), plain),
            den: Poly::one(),
        };
        acc = &acc + &(&term * &plain);
    }
    acc
}

fn atom_derivative(a: &Atom, i: usize) -> Scalar {
    let du = a.arg.diff(i);
    if du.is_zero() {
        return Scalar::zero();
    }
    let outer = match a.func {
        Func::Sin => Scalar::apply(Func::Cos, a.arg.clone()),
        Func::Cos => -Scalar::apply(Func::Sin, a.arg.clone()),
        Func::Exp => Scalar::apply(Func::Exp, a.arg.clone()),
        Func::Log => a.arg.recip(),
        Func::Sqrt => Scalar::apply(Func::Sqrt, a.arg.clone())
            .scale(&int(2))
            .recip(),
    };
    &outer * &du
}

fn diff_poly(p: &Poly, i: usize) -> Scalar {
    let mut out = Scalar::from_poly(p.diff_var(&Var::Coord(i)));
    for v in p.vars() {
        if let Var::Atom(a) = &v {
            let da = atom_derivative(a, i);
            if da.is_zero() {
                continue;
            }
            let dp = Scalar::from_poly(p.diff_var(&v));
            out = &out + &(&dp * &da);
        }
    }
    out
}

fn eval_poly(p: &Poly, point: &[f64]) -> Result<f64, EvalError> {
    let mut err = None;
    let v = p.eval_with(|var| match var {
        Var::Coord(i) => match point.get(*i) {
            Some(x) => *x,
            None => {
                err = Some(EvalError::Dimension {
                    expected: i + 1,
                    got: point.len(),
                });
                f64::NAN
            }
        },
        Var::Atom(a) => match a.arg.eval(point) {
            Ok(x) => match a.func.apply_f64(x) {
                Some(y) => y,
                None => {
                    err.get_or_insert(EvalError::Domain {
                        func: a.func.name(),
                        point: point.to_vec(),
                    });
                    f64::NAN
                }
            },
            Err(e) => {
                err.get_or_insert(e);
                f64::NAN
            }
        },
    });
    match err {
        Some(e) => Err(e),
        None => Ok(v),
    }
}

fn var_expr(v: &Var) -> ScalarExpr {
    match v {
        Var::Coord(i) => ScalarExpr::new(Node::Coord(*i)),
        Var::Atom(a) => ScalarExpr::new(Node::Apply(a.func, a.arg.to_expr())),
    }
}

fn poly_to_expr(p: &Poly) -> ScalarExpr {
    let mut terms: Vec<ScalarExpr> = p
        .terms()
        .map(|(m, c)| {
            let mut factors = Vec::new();
            if m.is_one() || !c.is_one() {
                factors.push(ScalarExpr::new(Node::Num(c.clone())));
            }
            for (v, e) in m.factors() {
                let base = var_expr(v);
                factors.push(if *e == 1 {
                    base
                } else {
                    ScalarExpr::new(Node::Pow(base, *e as i32))
                });
            }
            if factors.len() == 1 {
                factors.pop().unwrap()
            } else {
                ScalarExpr::new(Node::Product(factors))
            }
        })
        .collect();
    match terms.len() {
        0 => ScalarExpr::new(Node::Num(Rat::zero())),
        1 => terms.pop().unwrap(),
        _ => ScalarExpr::new(Node::Sum(terms)),
    }
}

impl From<Rat> for Scalar {
    fn from(c: Rat) -> Self {
        Scalar::from_rat(c)
    }
}

impl From<i64> for Scalar {
    fn from(n: i64) -> Self {
        Scalar::from_int(n)
    }
}

impl<'a> Add<&'a Scalar> for &'a Scalar {
    type Output = Scalar;
    fn add(self, rhs: &Scalar) -> Scalar {
        if self.is_zero() {
            return rhs.clone();
        }
        if rhs.is_zero() {
            return self.clone();
        }
        if self.den.is_one() && rhs.den.is_one() {
            return Scalar {
                num: self.num.add(&rhs.num),
                den: Poly::one(),
            };
        }
        if self.den == rhs.den {
            return Scalar::from_parts(self.num.add(&rhs.num), self.den.clone());
        }
        let g = self.den.gcd(&rhs.den);
        let a = rhs.den.div_exact(&g).expect("gcd divides");
        let b = self.den.div_exact(&g).expect("gcd divides");
        Scalar::from_parts(
            self.num.mul(&a).add(&rhs.num.mul(&b)),
            self.den.mul(&a),
        )
    }
}

impl<'a> Sub<&'a Scalar> for &'a Scalar {
    type Output = Scalar;
    fn sub(self, rhs: &Scalar) -> Scalar {
        self + &(-rhs)
    }
}

impl Neg for &Scalar {
    type Output = Scalar;
    fn neg(self) -> Scalar {
        Scalar {
            num: self.num.neg(),
            den: self.den.clone(),
        }
    }
}

impl Neg for Scalar {
    type Output = Scalar;
    fn neg(self) -> Scalar {
        -&self
    }
}

impl<'a> Mul<&'a Scalar> for &'a Scalar {
    type Output = Scalar;
    fn mul(self, rhs: &Scalar) -> Scalar {
        if self.is_zero() || rhs.is_zero() {
            return Scalar::zero();
        }
        if let Some(c) = self.as_rat() {
            return rhs.scale(&c);
        }
        if let Some(c) = rhs.as_rat() {
            return self.scale(&c);
        }
        if self.den.is_one() && rhs.den.is_one() {
            let s = Scalar {
                num: self.num.mul(&rhs.num),
                den: Poly::one(),
            };
            return if s.has_reducible_roots() {
                s.reduce_roots()
            } else {
                s
            };
        }
        let g1 = self.num.gcd(&rhs.den);
        let g2 = rhs.num.gcd(&self.den);
        let n1 = self.num.div_exact(&g1).expect("gcd divides");
        let d2 = rhs.den.div_exact(&g1).expect("gcd divides");
        let n2 = rhs.num.div_exact(&g2).expect("gcd divides");
        let d1 = self.den.div_exact(&g2).expect("gcd divides");
        let den = d1.mul(&d2);
        let (lc, den) = den.monic();
        let s = Scalar {
            num: n1.mul(&n2).scale(&lc.recip()),
            den,
        };
        if s.has_reducible_roots() {
            s.reduce_roots()
        } else {
            s
        }
    }
}

impl<'a> Div<&'a Scalar> for &'a Scalar {
    type Output = Scalar;
    fn div(self, rhs: &Scalar) -> Scalar {
        self * &rhs.recip()
    }
}

macro_rules! forward_owned {
    ($tr:ident, $m:ident) => {
        impl $tr<Scalar> for Scalar {
            type Output = Scalar;
            fn $m(self, rhs: Scalar) -> Scalar {
                (&self).$m(&rhs)
            }
        }
        impl<'a> $tr<&'a Scalar> for Scalar {
            type Output = Scalar;
            fn $m(self, rhs: &'a Scalar) -> Scalar {
                (&self).$m(rhs)
            }
        }
        impl<'a> $tr<Scalar> for &'a Scalar {
            type Output = Scalar;
            fn $m(self, rhs: Scalar) -> Scalar {
                self.$m(&rhs)
            }
        }
    };
}

forward_owned!(Add, add);
forward_owned!(Sub, sub);
forward_owned!(Mul, mul);
forward_owned!(Div, div);

impl std::iter::Sum for Scalar {
    fn sum<I: Iterator<Item = Scalar>>(iter: I) -> Scalar {
        iter.fold(Scalar::zero(), |a, b| &a + &b)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symexpr::poly::rat;

    fn x(i: usize) -> Scalar {
        Scalar::coord(i)
    }

    #[test]
    fn cancellation_is_canonical() {
        let p = &Scalar::one() + &x(0).powi(3);
        let q = &p * &p;
        let r = &p / &q;
        assert_eq!(r, p.recip());
        assert_eq!(&r * &p, Scalar::one());
    }

    #[test]
    fn sum_of_fractions_reduces() {
        // 1/(x-1) - 1/(x+1) = 2/(x^2-1)
        let a = (&x(0) - &Scalar::one()).recip();
        let b = (&x(0) + &Scalar::one()).recip();
        let lhs = &a - &b;
        let rhs = Scalar::from_int(2) / (&x(0).powi(2) - &Scalar::one());
        assert_eq!(lhs, rhs);
    }

    #[test]
    fn quotient_rule() {
        let p = &Scalar::one() + &x(0).powi(3);
        let f = p.recip().scale(&rat(-1, 1)) * x(1);
        let df = f.diff(0);
        let expected = Scalar::from_int(3) * x(0).powi(2) * x(1) / (&p * &p);
        assert_eq!(df, expected);
    }

    #[test]
    fn sqrt_square_reduces() {
        let u = &Scalar::one() + &x(0).powi(2);
        let s = Scalar::apply(Func::Sqrt, u.clone());
        assert_eq!(&s * &s, u);
        assert_eq!(Scalar::apply(Func::Sqrt, Scalar::from_int(4)), Scalar::from_int(2));
        let ds = s.diff(0);
        assert_eq!(&ds * &s, x(0));
    }

    #[test]
    fn atom_derivatives() {
        let s = Scalar::apply(Func::Sin, x(0).powi(2));
        let ds = s.diff(0);
        let expected = Scalar::from_int(2) * x(0) * Scalar::apply(Func::Cos, x(0).powi(2));
        assert_eq!(ds, expected);
        let l = Scalar::apply(Func::Log, x(0));
        assert_eq!(l.diff(0), x(0).recip());
        assert_eq!(Scalar::apply(Func::Log, Scalar::apply(Func::Exp, x(1))), x(1));
    }

    #[test]
    fn eval_pole_and_domain() {
        let f = x(0).recip();
        assert!(matches!(f.eval(&[0.0, 0.0]), Err(EvalError::Pole { .. })));
        let l = Scalar::apply(Func::Log, x(0));
        assert!(matches!(l.eval(&[-1.0]), Err(EvalError::Domain { .. })));
        assert_eq!(Scalar::from_rat(rat(1, 3)).eval(&[]).unwrap(), 1.0 / 3.0);
    }
}
