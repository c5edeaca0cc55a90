use crate::connection::{ContravariantConnection, Metric};
use crate::forms::{DiffForm, OneForm, VectorField};
use crate::linalg::{self, SymMatrix};
use crate::poisson::PoissonStructure;
use crate::symexpr::Scalar;
use crate::{Error, Result};

/// Coframe `φ_i = Σ_j π^{ij}(dx_j + Σ_u A_j^u dy_u)`, `dy_u` of a split
/// chart, with its dual frame `X_i = −π♯dx_i`, `Y_u = ∂_{y_u} − Σ_i A_i^u ∂_{x_i}`.
///
/// Coordinates `0..leaf` are the leaf coordinates `x`, the rest are `y`.
/// Frame indices follow the same layout.
#[derive(Clone, Debug)]
pub struct FlatFrame {
    dc: ContravariantConnection,
    leaf: usize,
    a: Vec<Vec<Scalar>>,
    pi_inv: SymMatrix,
    coframe: Vec<OneForm>,
    frame: Vec<VectorField>,
}

/// Checks that `π` lives on the leading `leaf × leaf` block and returns the
/// symbolic inverse of that block.
pub(crate) fn leaf_block_inverse(pi: &PoissonStructure, leaf: usize) -> Result<SymMatrix> {
    let d = pi.dim();
    if leaf > d || leaf % 2 != 0 {
        return Err(Error::NotSplit(format!("leaf dimension {leaf} in a {d}-dimensional chart")));
    }
    for i in 0..d {
        for j in leaf.max(i + 1)..d {
            if !pi.entry(i, j).is_zero() {
                return Err(Error::NotSplit(format!(
                    "poisson component ({i}, {j}) reaches a transverse coordinate"
                )));
            }
        }
    }
    let block: SymMatrix = (0..leaf)
        .map(|i| (0..leaf).map(|j| pi.entry(i, j).clone()).collect())
        .collect();
    linalg::inverse(&block).ok_or_else(|| Error::NotSplit("leaf block of π is singular".into()))
}

impl FlatFrame {
    /// Builds the frame and verifies duality and parallelism exactly.
    pub fn new(dc: ContravariantConnection, leaf: usize, a: Vec<Vec<Scalar>>) -> Result<Self> {
        let frame = Self::unverified(dc, leaf, a)?;
        frame.verify()?;
        Ok(frame)
    }

    pub(crate) fn unverified(dc: ContravariantConnection, leaf: usize, a: Vec<Vec<Scalar>>) -> Result<Self> {
        let d = dc.dim();
        let s = d.saturating_sub(leaf);
        if a.len() != leaf || a.iter().any(|r| r.len() != s) {
            return Err(Error::UnverifiedFrame(format!("A must be {leaf}x{s}")));
        }
        let pi_inv = leaf_block_inverse(dc.poisson(), leaf)?;
        let mut coframe = Vec::with_capacity(d);
        for i in 0..leaf {
            let mut comps = vec![Scalar::zero(); d];
            for j in 0..leaf {
                if pi_inv[i][j].is_zero() {
                    continue;
                }
                comps[j] = &comps[j] + &pi_inv[i][j];
                for u in 0..s {
                    comps[leaf + u] = &comps[leaf + u] + &(&pi_inv[i][j] * &a[j][u]);
                }
            }
            coframe.push(OneForm::from_components(&comps));
        }
        for u in 0..s {
            coframe.push(OneForm::dx(d, leaf + u));
        }
        let mut frame: Vec<VectorField> = (0..leaf).map(|i| -dc.poisson().anchor_dx(i)).collect();
        for u in 0..s {
            let mut comps = vec![Scalar::zero(); d];
            comps[leaf + u] = Scalar::one();
            for i in 0..leaf {
                comps[i] = -&a[i][u];
            }
            frame.push(VectorField::from_components(&comps));
        }
        Ok(FlatFrame {
            dc,
            leaf,
            a,
            pi_inv,
            coframe,
            frame,
        })
    }

    fn verify(&self) -> Result<()> {
        let d = self.dim();
        for (p, e) in self.coframe.iter().enumerate() {
            for (q, x) in self.frame.iter().enumerate() {
                let want = if p == q { Scalar::one() } else { Scalar::zero() };
                if e.pair(x) != want {
                    return Err(Error::UnverifiedFrame(format!("pairing ({p}, {q}) is not δ")));
                }
            }
            for m in 0..d {
                if !self.dc.apply(&OneForm::dx(d, m), e)?.is_zero() {
                    return Err(Error::UnverifiedFrame(format!(
                        "coframe element {p} is not parallel along dx{}",
                        m + 1
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dc.dim()
    }

    pub fn leaf(&self) -> usize {
        self.leaf
    }

    pub fn transverse(&self) -> usize {
        self.dim() - self.leaf
    }

    pub fn connection(&self) -> &ContravariantConnection {
        &self.dc
    }

    pub fn a(&self) -> &[Vec<Scalar>] {
        &self.a
    }

    /// `π^{ij}` on the leaf block.
    pub fn pi_inv(&self) -> &SymMatrix {
        &self.pi_inv
    }

    pub fn coframe(&self) -> &[OneForm] {
        &self.coframe
    }

    pub fn frame(&self) -> &[VectorField] {
        &self.frame
    }

    /// Components of a coordinate form in the coframe basis:
    /// `ω(E_{a1}, …, E_{ap})` on `e_{a1} ∧ … ∧ e_{ap}`.
    pub fn to_frame(&self, w: &DiffForm) -> DiffForm {
        let d = self.dim();
        let mut out = DiffForm::zero(d);
        for p in 0..=w.max_degree().unwrap_or(0) {
            let part = w.part(p);
            if part.is_zero() {
                continue;
            }
            for idx in increasing(d, p) {
                let mut cur = part.clone();
                for &a in &idx {
                    cur = cur.interior(&self.frame[a]).expect("degrees checked");
                }
                out = &out + &DiffForm::basis(d, &idx, cur.coeff(&[]));
            }
        }
        out
    }

    /// Inverse of [`FlatFrame::to_frame`].
    pub fn from_frame(&self, w: &DiffForm) -> DiffForm {
        let d = self.dim();
        let mut out = DiffForm::zero(d);
        for (idx, c) in w.terms() {
            let mut acc = DiffForm::scalar(d, c.clone());
            for &a in idx {
                acc = acc.wedge_unchecked(&self.coframe[a]);
            }
            out = &out + &acc;
        }
        out
    }

    /// `C_k^{uv} = ∂A_k^u/∂y_v − ∂A_k^v/∂y_u + Σ_l A_l^u ∂A_k^v/∂x_l − A_l^v ∂A_k^u/∂x_l`
    pub fn transverse_curvature(&self, k: usize, u: usize, v: usize) -> Scalar {
        let leaf = self.leaf;
        let a = &self.a;
        let mut s = &a[k][u].diff(leaf + v) - &a[k][v].diff(leaf + u);
        for l in 0..leaf {
            s = &s + &(&a[l][u] * &a[k][v].diff(l));
            s = &s - &(&a[l][v] * &a[k][u].diff(l));
        }
        s
    }
}

/// Strictly increasing index lists of length `p` from `0..d`.
pub(crate) fn increasing(d: usize, p: usize) -> Vec<Vec<usize>> {
    fn rec(start: usize, d: usize, p: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == p {
            out.push(cur.clone());
            return;
        }
        for i in start..d {
            cur.push(i);
            rec(i + 1, d, p, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(0, d, p, &mut Vec::new(), &mut out);
    out
}

/// `A_i^u = −Σ_v ⟨dx_i, dy_v⟩ g^{vu}`, `g^{vu}` the inverse of the transverse
/// block of the cotangent pairing.
pub fn riemannian_a(g: &Metric, leaf: usize, base: &[f64]) -> Result<Vec<Vec<Scalar>>> {
    let d = g.dim();
    if leaf > d {
        return Err(Error::NotSplit(format!("leaf dimension {leaf} in a {d}-dimensional chart")));
    }
    let s = d - leaf;
    let gp = g.pairing();
    let block: SymMatrix = (0..s)
        .map(|u| (0..s).map(|v| gp[leaf + u][leaf + v].clone()).collect())
        .collect();
    if s > 0 {
        let at_base = linalg::eval_matrix(&block, base)?;
        if at_base.determinant().abs() < 1e-12 {
            return Err(Error::DegenerateMetric);
        }
    }
    let inv = linalg::inverse(&block).ok_or(Error::DegenerateMetric)?;
    Ok((0..leaf)
        .map(|i| {
            (0..s)
                .map(|u| -(0..s).map(|v| &gp[i][leaf + v] * &inv[v][u]).sum::<Scalar>())
                .collect()
        })
        .collect())
}
