//! Exact scalar expressions over named chart coordinates.
//!
//! [`ScalarExpr`] is the expression tree produced by the parser and printed
//! back to users. All algebra happens on [`Scalar`], the canonical
//! rational-function form; [`ScalarExpr::normalize`] round-trips a tree through
//! it.

mod parse;
pub mod poly;
pub mod scalar;
mod zero;

use std::fmt;
use std::sync::Arc;

use num_traits::{One, Signed};
use thiserror::Error;

pub use parse::parse;
pub use poly::{int, rat, Rat};
pub use scalar::{Func, Scalar};
pub use zero::{all_zero, equals_zero, DomainBox, ZeroMethod, ZeroTest, ZERO_TEST_SAMPLES};

#[derive(Clone, Debug, Error, PartialEq)]
pub enum EvalError {
    #[error("pole at {point:?}")]
    Pole { point: Vec<f64> },
    #[error("{func} evaluated outside its real domain at {point:?}")]
    Domain { func: &'static str, point: Vec<f64> },
    #[error("point has {got} coordinates, expression needs at least {expected}")]
    Dimension { expected: usize, got: usize },
}

#[derive(Clone, Debug, Error, PartialEq)]
pub enum ExprError {
    #[error("syntax error at position {pos}: {message}")]
    Syntax { pos: usize, message: String },
    #[error("unknown identifier `{name}` at position {pos}")]
    UnknownIdentifier { name: String, pos: usize },
    #[error("domain too singular: {failures} of {attempts} sample points hit a pole")]
    DomainTooSingular { failures: usize, attempts: usize },
    #[error("tolerance must be positive, got {0}")]
    BadTolerance(f64),
}

/// A point of a chart.
#[derive(Clone, Debug, PartialEq)]
pub struct Point(Vec<f64>);

impl Point {
    pub fn new(coords: Vec<f64>) -> Option<Point> {
        coords.iter().all(|x| x.is_finite()).then_some(Point(coords))
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn coords(&self) -> &[f64] {
        &self.0
    }
}

impl std::ops::Deref for Point {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Node {
    Num(Rat),
    Coord(usize),
    Sum(Vec<ScalarExpr>),
    Product(Vec<ScalarExpr>),
    Pow(ScalarExpr, i32),
    Quotient(ScalarExpr, ScalarExpr),
    Apply(Func, ScalarExpr),
}

/// Immutable, cheaply clonable expression tree.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ScalarExpr(Arc<Node>);

impl ScalarExpr {
    pub fn new(node: Node) -> Self {
        ScalarExpr(Arc::new(node))
    }

    pub fn node(&self) -> &Node {
        &self.0
    }

    pub fn num(c: Rat) -> Self {
        ScalarExpr::new(Node::Num(c))
    }

    pub fn coord(i: usize) -> Self {
        ScalarExpr::new(Node::Coord(i))
    }

    pub fn to_scalar(&self) -> Scalar {
        match self.node() {
            Node::Num(c) => Scalar::from_rat(c.clone()),
            Node::Coord(i) => Scalar::coord(*i),
            Node::Sum(ts) => ts.iter().map(|t| t.to_scalar()).sum(),
            Node::Product(fs) => fs
                .iter()
                .fold(Scalar::one(), |acc, f| &acc * &f.to_scalar()),
            Node::Pow(b, e) => b.to_scalar().powi(*e),
            Node::Quotient(n, d) => &n.to_scalar() / &d.to_scalar(),
            Node::Apply(f, a) => Scalar::apply(*f, a.to_scalar()),
        }
    }

    /// Canonical expanded form.
    pub fn normalize(&self) -> ScalarExpr {
        self.to_scalar().to_expr()
    }

    pub fn differentiate(&self, i: usize) -> ScalarExpr {
        self.to_scalar().diff(i).to_expr()
    }

    /// Direct evaluation of the tree.
    pub fn eval(&self, p: &[f64]) -> Result<f64, EvalError> {
        let pole = || EvalError::Pole { point: p.to_vec() };
        Ok(match self.node() {
            Node::Num(c) => poly::rat_to_f64(c),
            Node::Coord(i) => *p.get(*i).ok_or(EvalError::Dimension {
                expected: i + 1,
                got: p.len(),
            })?,
            Node::Sum(ts) => ts.iter().map(|t| t.eval(p)).sum::<Result<f64, _>>()?,
            Node::Product(fs) => fs
                .iter()
                .map(|f| f.eval(p))
                .product::<Result<f64, _>>()?,
            Node::Pow(b, e) => {
                let v = b.eval(p)?;
                if v == 0.0 && *e < 0 {
                    return Err(pole());
                }
                v.powi(*e)
            }
            Node::Quotient(n, d) => {
                let dv = d.eval(p)?;
                if dv == 0.0 {
                    return Err(pole());
                }
                n.eval(p)? / dv
            }
            Node::Apply(f, a) => {
                let v = a.eval(p)?;
                f.apply_f64(v).ok_or(EvalError::Domain {
                    func: f.name(),
                    point: p.to_vec(),
                })?
            }
        })
    }

    pub fn display<'a>(&'a self, names: &'a [String]) -> impl fmt::Display + 'a {
        DisplayExpr { e: self, names }
    }

    fn is_negative_term(&self) -> bool {
        match self.node() {
            Node::Num(c) => c.is_negative(),
            Node::Product(fs) => matches!(fs[0].node(), Node::Num(c) if c.is_negative()),
            Node::Quotient(n, _) => n.is_negative_term(),
            _ => false,
        }
    }

    /// Negation that folds into a leading numeric factor.
    pub fn negated(&self) -> ScalarExpr {
        match self.node() {
            Node::Num(c) => ScalarExpr::num(-c),
            Node::Product(fs) => {
                if let Node::Num(c) = fs[0].node() {
                    let c = -c;
                    let mut rest: Vec<ScalarExpr> = fs[1..].to_vec();
                    if c.is_one() {
                        return if rest.len() == 1 {
                            rest.pop().unwrap()
                        } else {
                            ScalarExpr::new(Node::Product(rest))
                        };
                    }
                    let mut v = vec![ScalarExpr::num(c)];
                    v.append(&mut rest);
                    ScalarExpr::new(Node::Product(v))
                } else {
                    let mut v = vec![ScalarExpr::num(-Rat::one())];
                    v.extend(fs.iter().cloned());
                    ScalarExpr::new(Node::Product(v))
                }
            }
            Node::Quotient(n, d) => ScalarExpr::new(Node::Quotient(n.negated(), d.clone())),
            _ => ScalarExpr::new(Node::Product(vec![
                ScalarExpr::num(-Rat::one()),
                self.clone(),
            ])),
        }
    }
}

struct DisplayExpr<'a> {
    e: &'a ScalarExpr,
    names: &'a [String],
}

const PREC_SUM: u8 = 1;
const PREC_PRODUCT: u8 = 2;
const PREC_POW: u8 = 3;
const PREC_ATOM: u8 = 4;

fn precedence(e: &ScalarExpr) -> u8 {
    match e.node() {
        Node::Num(c) if c.is_negative() || !c.is_integer() => PREC_PRODUCT,
        Node::Num(_) | Node::Coord(_) | Node::Apply(..) => PREC_ATOM,
        Node::Sum(_) => PREC_SUM,
        Node::Product(_) | Node::Quotient(..) => PREC_PRODUCT,
        Node::Pow(..) => PREC_POW,
    }
}

impl DisplayExpr<'_> {
    fn sub<'b>(&'b self, e: &'b ScalarExpr) -> DisplayExpr<'b> {
        DisplayExpr {
            e,
            names: self.names,
        }
    }

    fn write_wrapped(&self, f: &mut fmt::Formatter<'_>, e: &ScalarExpr, min: u8) -> fmt::Result {
        if precedence(e) < min {
            write!(f, "({})", self.sub(e))
        } else {
            write!(f, "{}", self.sub(e))
        }
    }
}

impl fmt::Display for DisplayExpr<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.e.node() {
            Node::Num(c) => {
                if c.is_integer() {
                    write!(f, "{}", c.numer())
                } else {
                    write!(f, "{}/{}", c.numer(), c.denom())
                }
            }
            Node::Coord(i) => match self.names.get(*i) {
                Some(n) => write!(f, "{n}"),
                None => write!(f, "x{}", i + 1),
            },
            Node::Sum(ts) => {
                for (k, t) in ts.iter().enumerate() {
                    if k == 0 {
                        write!(f, "{}", self.sub(t))?;
                    } else if t.is_negative_term() {
                        write!(f, " - ")?;
                        self.write_wrapped(f, &t.negated(), PREC_PRODUCT)?;
                    } else {
                        write!(f, " + ")?;
                        self.write_wrapped(f, t, PREC_PRODUCT)?;
                    }
                }
                Ok(())
            }
            Node::Product(fs) => {
                let mut rest = &fs[..];
                if let Node::Num(c) = fs[0].node() {
                    if (-c).is_one() && fs.len() > 1 {
                        write!(f, "-")?;
                        rest = &fs[1..];
                    }
                }
                for (k, t) in rest.iter().enumerate() {
                    if k > 0 {
                        write!(f, "*")?;
                    }
                    let leading_num = k == 0 && matches!(t.node(), Node::Num(_));
                    if leading_num {
                        write!(f, "{}", self.sub(t))?;
                    } else {
                        self.write_wrapped(f, t, PREC_POW)?;
                    }
                }
                Ok(())
            }
            Node::Quotient(n, d) => {
                self.write_wrapped(f, n, PREC_PRODUCT)?;
                write!(f, "/")?;
                self.write_wrapped(f, d, PREC_POW)
            }
            Node::Pow(b, e) => {
                self.write_wrapped(f, b, PREC_ATOM)?;
                write!(f, "^{e}")
            }
            Node::Apply(func, a) => write!(f, "{}({})", func.name(), self.sub(a)),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn names(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn parse_polynomial_shape() {
        let n = names(&["x1", "x2"]);
        let e = parse("1 + x1^3", &n).unwrap();
        match e.node() {
            Node::Sum(ts) => {
                assert_eq!(ts.len(), 2);
                assert_eq!(ts[0].node(), &Node::Num(int(1)));
                assert_eq!(ts[1].node(), &Node::Pow(ScalarExpr::coord(0), 3));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn unknown_identifier_rejected() {
        let n = names(&["x1", "x2"]);
        assert!(matches!(
            parse("x3", &n),
            Err(ExprError::UnknownIdentifier { .. })
        ));
    }

    #[test]
    fn aff1_component_parses_as_power() {
        let n = names(&["a", "b"]);
        let e = parse("a^2", &n).unwrap();
        assert_eq!(e.node(), &Node::Pow(ScalarExpr::coord(0), 2));
        assert_eq!(e.eval(&[1.0, 0.0]).unwrap(), 1.0);
    }

    #[test]
    fn derivatives() {
        let n = names(&["x1", "x2"]);
        let e = parse("1 + x1^3", &n).unwrap();
        assert_eq!(e.differentiate(0), parse("3*x1^2", &n).unwrap().normalize());
        assert_eq!(parse("x1^3", &n).unwrap().differentiate(1).to_scalar(), Scalar::zero());
        let third = e.to_scalar().diff(0).diff(0).diff(0);
        assert_eq!(third, Scalar::from_int(6));
    }

    #[test]
    fn eval_examples() {
        let n = names(&["x1", "x2"]);
        assert_eq!(parse("1 + x1^3", &n).unwrap().eval(&[1.0, 0.0]).unwrap(), 2.0);
        assert!(matches!(
            parse("1/x1", &n).unwrap().eval(&[0.0, 0.0]),
            Err(EvalError::Pole { .. })
        ));
    }

    #[test]
    fn printing_normal_forms() {
        let n = names(&["x1", "x2"]);
        let cases = [
            ("1 + x1^3", "1 + x1^3"),
            ("x1 - x1", "0"),
            ("-(x2)/(1 + x1^3)", "-x2/(1 + x1^3)"),
            ("3/2*x1 - x2^2*x1", "3/2*x1 - x1*x2^2"),
            ("sin(x1)^2", "sin(x1)^2"),
        ];
        for (src, want) in cases {
            let e = parse(src, &n).unwrap().normalize();
            assert_eq!(e.display(&n).to_string(), want, "source {src}");
        }
    }

    fn arb_expr() -> impl Strategy<Value = String> {
        let leaf = prop_oneof![
            (-5i64..6).prop_map(|k| format!("{k}")),
            (1i64..5, 2i64..5).prop_map(|(a, b)| format!("{a}/{b}")),
            Just("x".to_string()),
            Just("y".to_string()),
            Just("z".to_string()),
        ];
        leaf.prop_recursive(4, 24, 3, |inner| {
            prop_oneof![
                (inner.clone(), inner.clone()).prop_map(|(a, b)| format!("({a}) + ({b})")),
                (inner.clone(), inner.clone()).prop_map(|(a, b)| format!("({a}) - ({b})")),
                (inner.clone(), inner.clone()).prop_map(|(a, b)| format!("({a}) * ({b})")),
                (inner.clone(), 0u32..4).prop_map(|(a, e)| format!("({a})^{e}")),
                inner.clone().prop_map(|a| format!("({a})/(1 + x^2)")),
                inner.prop_map(|a| format!("sin({a})")),
            ]
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn normalize_is_idempotent_and_round_trips(src in arb_expr()) {
            let n = names(&["x", "y", "z"]);
            let e = parse(&src, &n).unwrap();
            let once = e.normalize();
            prop_assert_eq!(once.normalize(), once.clone());
            let printed = once.display(&n).to_string();
            let reparsed = parse(&printed, &n).unwrap();
            prop_assert_eq!(&reparsed, &once);
            prop_assert_eq!(reparsed.display(&n).to_string(), printed);
        }

        #[test]
        fn normalize_preserves_value(src in arb_expr(), px in -1.0f64..1.0, py in -1.0f64..1.0, pz in -1.0f64..1.0) {
            let n = names(&["x", "y", "z"]);
            let e = parse(&src, &n).unwrap();
            let p = [px, py, pz];
            if let (Ok(a), Ok(b)) = (e.eval(&p), e.normalize().eval(&p)) {
                let scale = a.abs().max(1.0);
                prop_assert!((a - b).abs() <= 1e-12 * scale * 1e3, "{} vs {}", a, b);
            }
        }

        #[test]
        fn mixed_partials_commute(src in arb_expr()) {
            let n = names(&["x", "y", "z"]);
            let s = parse(&src, &n).unwrap().to_scalar();
            for i in 0..3 {
                for j in 0..i {
                    prop_assert!((&s.diff(i).diff(j) - &s.diff(j).diff(i)).is_zero());
                }
            }
        }

        #[test]
        fn differentiation_is_linear_and_leibniz(a in arb_expr(), b in arb_expr()) {
            let n = names(&["x", "y", "z"]);
            let f = parse(&a, &n).unwrap().to_scalar();
            let g = parse(&b, &n).unwrap().to_scalar();
            let lhs = (&f * &g).diff(0);
            let rhs = &(&f.diff(0) * &g) + &(&f * &g.diff(0));
            prop_assert!((&lhs - &rhs).is_zero());
            prop_assert_eq!((&f + &g).diff(1), &f.diff(1) + &g.diff(1));
        }
    }
}
