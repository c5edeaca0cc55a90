//! Differential forms and multivector fields in coordinate (co)bases.

use std::collections::BTreeMap;
use std::fmt;
use std::marker::PhantomData;
use std::ops::{Add, Mul, Neg, Sub};

use crate::poisson::PoissonStructure;
use crate::symexpr::{EvalError, Scalar};
use crate::{Error, Result};

mod sealed {
    pub trait Kind: Clone + std::fmt::Debug + PartialEq + Eq {
        const SYMBOL: &'static str;
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Co;
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Contra;

impl sealed::Kind for Co {
    const SYMBOL: &'static str = "d";
}
impl sealed::Kind for Contra {
    const SYMBOL: &'static str = "∂";
}

/// Mixed-degree exterior object; coefficients keyed by strictly increasing
/// index lists, zero coefficients never stored.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Graded<K: sealed::Kind> {
    dim: usize,
    terms: BTreeMap<Vec<usize>, Scalar>,
    kind: PhantomData<K>,
}

pub type DiffForm = Graded<Co>;
pub type MultiVector = Graded<Contra>;
pub type OneForm = DiffForm;
pub type VectorField = MultiVector;

/// Sorts `idx` in place and returns the permutation sign, or `None` when an
/// index repeats.
fn sort_signed(idx: &mut [usize]) -> Option<i32> {
    let mut sign = 1;
    for i in 1..idx.len() {
        let mut j = i;
        while j > 0 && idx[j - 1] > idx[j] {
            idx.swap(j - 1, j);
            sign = -sign;
            j -= 1;
        }
    }
    if idx.windows(2).any(|w| w[0] == w[1]) {
        None
    } else {
        Some(sign)
    }
}

fn merge_sign(a: &[usize], b: &[usize]) -> Option<(Vec<usize>, i32)> {
    let mut idx: Vec<usize> = a.iter().chain(b).copied().collect();
    sort_signed(&mut idx).map(|s| (idx, s))
}

impl<K: sealed::Kind> Graded<K> {
    pub fn zero(dim: usize) -> Self {
        Graded {
            dim,
            terms: BTreeMap::new(),
            kind: PhantomData,
        }
    }

    pub fn scalar(dim: usize, s: Scalar) -> Self {
        Self::basis(dim, &[], s)
    }

    /// `coeff · e_{i1} ∧ … ∧ e_{ip}` for an arbitrary index order.
    pub fn basis(dim: usize, idx: &[usize], coeff: Scalar) -> Self {
        assert!(idx.iter().all(|&i| i < dim), "index out of range");
        let mut out = Self::zero(dim);
        let mut idx = idx.to_vec();
        if let Some(sign) = sort_signed(&mut idx) {
            out.insert(idx, if sign < 0 { -coeff } else { coeff });
        }
        out
    }

    /// Degree-1 object with the given components.
    pub fn from_components(comps: &[Scalar]) -> Self {
        let mut out = Self::zero(comps.len());
        for (i, c) in comps.iter().enumerate() {
            out.insert(vec![i], c.clone());
        }
        out
    }

    fn insert(&mut self, idx: Vec<usize>, c: Scalar) {
        if c.is_zero() {
            return;
        }
        match self.terms.entry(idx) {
            std::collections::btree_map::Entry::Vacant(v) => {
                v.insert(c);
            }
            std::collections::btree_map::Entry::Occupied(mut o) => {
                let s = o.get() + &c;
                if s.is_zero() {
                    o.remove();
                } else {
                    *o.get_mut() = s;
                }
            }
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn terms(&self) -> impl Iterator<Item = (&[usize], &Scalar)> {
        self.terms.iter().map(|(k, v)| (k.as_slice(), v))
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// Coefficient along `e_{i1} ∧ … ∧ e_{ip}`, any index order.
    pub fn coeff(&self, idx: &[usize]) -> Scalar {
        let mut idx = idx.to_vec();
        match sort_signed(&mut idx) {
            None => Scalar::zero(),
            Some(sign) => {
                let c = self.terms.get(&idx).cloned().unwrap_or_default();
                if sign < 0 {
                    -c
                } else {
                    c
                }
            }
        }
    }

    /// Components of the degree-1 part.
    pub fn components(&self) -> Vec<Scalar> {
        (0..self.dim).map(|i| self.coeff(&[i])).collect()
    }

    pub fn degree(&self) -> Option<usize> {
        let mut it = self.terms.keys().map(|k| k.len());
        let first = it.next()?;
        it.all(|p| p == first).then_some(first)
    }

    pub fn max_degree(&self) -> Option<usize> {
        self.terms.keys().map(|k| k.len()).max()
    }

    pub fn part(&self, p: usize) -> Self {
        let mut out = Self::zero(self.dim);
        for (k, v) in &self.terms {
            if k.len() == p {
                out.terms.insert(k.clone(), v.clone());
            }
        }
        out
    }

    pub fn map(&self, mut f: impl FnMut(&Scalar) -> Scalar) -> Self {
        let mut out = Self::zero(self.dim);
        for (k, v) in &self.terms {
            out.insert(k.clone(), f(v));
        }
        out
    }

    pub fn scale(&self, s: &Scalar) -> Self {
        if s.is_zero() {
            return Self::zero(self.dim);
        }
        self.map(|c| s * c)
    }

    pub(crate) fn same_chart(&self, other_dim: usize) -> Result<()> {
        if self.dim == other_dim {
            Ok(())
        } else {
            Err(Error::ChartMismatch {
                left: self.dim,
                right: other_dim,
            })
        }
    }

    pub fn wedge(&self, other: &Self) -> Result<Self> {
        self.same_chart(other.dim)?;
        Ok(self.wedge_unchecked(other))
    }

    pub(crate) fn wedge_unchecked(&self, other: &Self) -> Self {
        let mut out = Self::zero(self.dim);
        for (a, x) in &self.terms {
            for (b, y) in &other.terms {
                if let Some((idx, sign)) = merge_sign(a, b) {
                    let c = x * y;
                    out.insert(idx, if sign < 0 { -c } else { c });
                }
            }
        }
        out
    }

    /// Coefficients evaluated at `p`.
    pub fn eval(&self, p: &[f64]) -> Result<BTreeMap<Vec<usize>, f64>, EvalError> {
        self.terms
            .iter()
            .map(|(k, v)| Ok((k.clone(), v.eval(p)?)))
            .collect()
    }

    /// Largest absolute coefficient at `p`.
    pub fn max_abs_at(&self, p: &[f64]) -> Result<f64, EvalError> {
        Ok(self.eval(p)?.values().fold(0.0, |m, v| m.max(v.abs())))
    }

    pub fn display<'a>(&'a self, names: &'a [String]) -> impl fmt::Display + 'a {
        DisplayGraded { g: self, names }
    }
}

struct DisplayGraded<'a, K: sealed::Kind> {
    g: &'a Graded<K>,
    names: &'a [String],
}

impl<K: sealed::Kind> fmt::Display for DisplayGraded<'_, K> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.g.is_zero() {
            return write!(f, "0");
        }
        for (n, (k, v)) in self.g.terms.iter().enumerate() {
            if n > 0 {
                write!(f, " + ")?;
            }
            write!(f, "({})", v.display(self.names))?;
            for (m, i) in k.iter().enumerate() {
                let name = self.names.get(*i).cloned().unwrap_or(format!("x{}", i + 1));
                let sep = if m == 0 { " " } else { "∧" };
                write!(f, "{sep}{}{name}", K::SYMBOL)?;
            }
        }
        Ok(())
    }
}

impl<K: sealed::Kind> Add for &Graded<K> {
    type Output = Graded<K>;
    fn add(self, other: &Graded<K>) -> Graded<K> {
        assert_eq!(self.dim, other.dim, "chart mismatch");
        let mut out = self.clone();
        for (k, v) in &other.terms {
            out.insert(k.clone(), v.clone());
        }
        out
    }
}

impl<K: sealed::Kind> Sub for &Graded<K> {
    type Output = Graded<K>;
    fn sub(self, other: &Graded<K>) -> Graded<K> {
        self + &(-other)
    }
}

impl<K: sealed::Kind> Neg for &Graded<K> {
    type Output = Graded<K>;
    fn neg(self) -> Graded<K> {
        self.map(|c| -c)
    }
}

impl<K: sealed::Kind> Add for Graded<K> {
    type Output = Graded<K>;
    fn add(self, other: Graded<K>) -> Graded<K> {
        &self + &other
    }
}

impl<K: sealed::Kind> Sub for Graded<K> {
    type Output = Graded<K>;
    fn sub(self, other: Graded<K>) -> Graded<K> {
        &self - &other
    }
}

impl<K: sealed::Kind> Neg for Graded<K> {
    type Output = Graded<K>;
    fn neg(self) -> Graded<K> {
        -&self
    }
}

impl<K: sealed::Kind> Mul<&Graded<K>> for &Scalar {
    type Output = Graded<K>;
    fn mul(self, g: &Graded<K>) -> Graded<K> {
        g.scale(self)
    }
}

impl DiffForm {
    pub fn dx(dim: usize, i: usize) -> Self {
        Self::basis(dim, &[i], Scalar::one())
    }

    /// Exact differential of a function.
    pub fn df(dim: usize, f: &Scalar) -> Self {
        Self::from_components(&(0..dim).map(|i| f.diff(i)).collect::<Vec<_>>())
    }

    pub fn exterior_d(&self) -> Self {
        let mut out = Self::zero(self.dim);
        for (idx, c) in &self.terms {
            for k in 0..self.dim {
                if idx.contains(&k) {
                    continue;
                }
                let dc = c.diff(k);
                if dc.is_zero() {
                    continue;
                }
                let pos = idx.iter().filter(|&&i| i < k).count();
                let mut new = idx.clone();
                new.insert(pos, k);
                out.insert(new, if pos % 2 == 1 { -dc } else { dc });
            }
        }
        out
    }

    /// `i_P σ`, with `i_{X∧Y} = i_Y ∘ i_X`.
    pub fn interior(&self, p: &MultiVector) -> Result<Self> {
        self.same_chart(p.dim)?;
        if let (Some(q), Some(r)) = (p.max_degree(), self.max_degree()) {
            if q > r {
                return Err(Error::DegreeUnderflow { vector: q, form: r });
            }
        }
        let mut out = Self::zero(self.dim);
        for (vidx, vc) in &p.terms {
            for (fidx, fc) in &self.terms {
                let mut cur = fidx.clone();
                let mut sign = 1;
                let mut alive = true;
                for j in vidx {
                    match cur.iter().position(|i| i == j) {
                        Some(pos) => {
                            if pos % 2 == 1 {
                                sign = -sign;
                            }
                            cur.remove(pos);
                        }
                        None => {
                            alive = false;
                            break;
                        }
                    }
                }
                if alive {
                    let c = vc * fc;
                    out.insert(cur, if sign < 0 { -c } else { c });
                }
            }
        }
        Ok(out)
    }

    /// Cartan formula `L_X = i_X d + d i_X`.
    pub fn lie_derivative(&self, x: &VectorField) -> Result<Self> {
        self.same_chart(x.dim)?;
        let x = x.part(1);
        let a = self.exterior_d().interior_lenient(&x);
        let b = self.interior_lenient(&x).exterior_d();
        Ok(&a + &b)
    }

    fn interior_lenient(&self, x: &VectorField) -> Self {
        let mut out = Self::zero(self.dim);
        for p in 1..=self.max_degree().unwrap_or(0) {
            out = &out + &self.part(p).interior(x).expect("degree checked");
        }
        out
    }

    /// `⟨α, X⟩` for the degree-1 parts.
    pub fn pair(&self, x: &VectorField) -> Scalar {
        (0..self.dim)
            .map(|i| &self.coeff(&[i]) * &x.coeff(&[i]))
            .sum()
    }
}

impl MultiVector {
    pub fn partial(dim: usize, i: usize) -> Self {
        Self::basis(dim, &[i], Scalar::one())
    }

    /// `X(f)` for the degree-1 part.
    pub fn apply(&self, f: &Scalar) -> Scalar {
        self.terms
            .iter()
            .filter(|(k, _)| k.len() == 1)
            .map(|(k, c)| c * &f.diff(k[0]))
            .sum()
    }

    pub fn lie_bracket(&self, other: &Self) -> Result<Self> {
        self.same_chart(other.dim)?;
        let comps: Vec<Scalar> = (0..self.dim)
            .map(|k| &self.apply(&other.coeff(&[k])) - &other.apply(&self.coeff(&[k])))
            .collect();
        Ok(Self::from_components(&comps))
    }
}

pub fn wedge(a: &DiffForm, b: &DiffForm) -> Result<DiffForm> {
    a.wedge(b)
}

pub fn exterior_d(a: &DiffForm) -> DiffForm {
    a.exterior_d()
}

pub fn lie_derivative(x: &VectorField, s: &DiffForm) -> Result<DiffForm> {
    s.lie_derivative(x)
}

pub fn lie_bracket(x: &VectorField, y: &VectorField) -> Result<VectorField> {
    x.lie_bracket(y)
}

pub fn interior_product(p: &MultiVector, s: &DiffForm) -> Result<DiffForm> {
    s.interior(p)
}

/// `[α, β]_π = L_{π♯α} β − L_{π♯β} α − d π(α, β)` on 1-forms.
pub fn koszul_bracket(pi: &PoissonStructure, a: &OneForm, b: &OneForm) -> Result<OneForm> {
    a.same_chart(pi.dim())?;
    b.same_chart(pi.dim())?;
    let (a, b) = (a.part(1), b.part(1));
    let pa = pi.anchor(&a)?;
    let pb = pi.anchor(&b)?;
    let t1 = b.lie_derivative(&pa)?;
    let t2 = a.lie_derivative(&pb)?;
    let t3 = DiffForm::df(pi.dim(), &pi.pair(&a, &b)?);
    Ok(&(&t1 - &t2) - &t3)
}

/// Extension of `[α, ·]_π` to forms of any degree as a degree-0 derivation,
/// with `[α, f]_π = π♯α(f)`.
pub fn koszul_bracket_with_form(
    pi: &PoissonStructure,
    a: &OneForm,
    s: &DiffForm,
) -> Result<DiffForm> {
    s.same_chart(pi.dim())?;
    let d = pi.dim();
    let pa = pi.anchor(a)?;
    let brackets: Vec<DiffForm> = (0..d)
        .map(|i| koszul_bracket(pi, a, &DiffForm::dx(d, i)))
        .collect::<Result<_>>()?;
    let mut out = DiffForm::zero(d);
    for (idx, c) in s.terms() {
        out = &out + &DiffForm::basis(d, idx, pa.apply(c));
        for (p, &i) in idx.iter().enumerate() {
            let left = DiffForm::basis(d, &idx[..p], c.clone());
            let right = DiffForm::basis(d, &idx[p + 1..], Scalar::one());
            out = &out + &left.wedge_unchecked(&brackets[i]).wedge_unchecked(&right);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symexpr::parse;

    fn s(src: &str, names: &[&str]) -> Scalar {
        let n: Vec<String> = names.iter().map(|x| x.to_string()).collect();
        parse(src, &n).unwrap().to_scalar()
    }

    #[test]
    fn wedge_examples() {
        let dx1 = DiffForm::dx(2, 0);
        let dx2 = DiffForm::dx(2, 1);
        assert_eq!(dx1.wedge(&dx2).unwrap().coeff(&[0, 1]), Scalar::one());
        assert!(dx1.wedge(&dx1).unwrap().is_zero());
        let phi1 = -&dx2;
        assert_eq!(phi1.wedge(&dx1).unwrap().coeff(&[0, 1]), Scalar::one());
        assert!(matches!(
            dx1.wedge(&DiffForm::dx(3, 0)),
            Err(Error::ChartMismatch { .. })
        ));
    }

    #[test]
    fn exterior_d_examples() {
        let xy = ["x1", "x2"];
        let f = DiffForm::basis(2, &[1], s("x1", &xy));
        assert_eq!(f.exterior_d(), DiffForm::basis(2, &[0, 1], Scalar::one()));
        assert!(DiffForm::basis(2, &[0, 1], Scalar::one()).exterior_d().is_zero());
        let phi1 = DiffForm::basis(2, &[1], s("-1/(1 + x1^3)", &xy));
        assert_eq!(
            phi1.exterior_d().coeff(&[0, 1]),
            s("3*x1^2/(1 + x1^3)^2", &xy)
        );
    }

    #[test]
    fn lie_derivative_examples() {
        let xy = ["x1", "x2"];
        let form = DiffForm::basis(2, &[1], s("x1", &xy));
        assert_eq!(
            form.lie_derivative(&VectorField::partial(2, 0)).unwrap(),
            DiffForm::dx(2, 1)
        );
        assert!(DiffForm::dx(2, 0)
            .lie_derivative(&VectorField::partial(2, 1))
            .unwrap()
            .is_zero());
        let ab = ["a", "b"];
        let x = VectorField::basis(2, &[0], s("a", &ab));
        let da_over_a = DiffForm::basis(2, &[0], s("1/a", &ab));
        assert!(da_over_a.lie_derivative(&x).unwrap().is_zero());
    }

    #[test]
    fn lie_bracket_examples() {
        let ab = ["a", "b"];
        assert!(VectorField::partial(2, 0)
            .lie_bracket(&VectorField::partial(2, 1))
            .unwrap()
            .is_zero());
        let e1 = VectorField::basis(2, &[0], s("a", &ab));
        let e2 = VectorField::basis(2, &[1], s("a", &ab));
        assert_eq!(e1.lie_bracket(&e2).unwrap(), e2);

        let xy = ["x1", "x2"];
        let p = s("1 + x1^3", &xy);
        let x1 = VectorField::basis(2, &[1], -&p);
        let x2 = VectorField::basis(2, &[0], p.clone());
        let want = x1.scale(&s("-3*x1^2", &xy));
        assert_eq!(x1.lie_bracket(&x2).unwrap(), want);
    }

    #[test]
    fn interior_examples() {
        let ab = ["a", "b"];
        let vol = DiffForm::basis(2, &[0, 1], Scalar::one());
        let biv = MultiVector::basis(2, &[0, 1], Scalar::one());
        assert_eq!(vol.interior(&biv).unwrap(), DiffForm::scalar(2, Scalar::one()));
        assert!(DiffForm::dx(2, 1)
            .interior(&MultiVector::partial(2, 0))
            .unwrap()
            .is_zero());
        let pi = MultiVector::basis(2, &[0, 1], s("a^2", &ab));
        let mu = DiffForm::basis(2, &[0, 1], s("1/a^2", &ab));
        assert_eq!(mu.interior(&pi).unwrap(), DiffForm::scalar(2, Scalar::one()));
        assert!(matches!(
            DiffForm::dx(2, 0).interior(&biv),
            Err(Error::DegreeUnderflow { .. })
        ));
    }
}
