//! Contravariant connections given by Christoffel tables
//! `D_{dx_i} dx_j = Σ_k Γ_ij^k dx_k`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::Serialize;

use crate::forms::{koszul_bracket, DiffForm, OneForm, VectorField};
use crate::linalg::{self, SymMatrix};
use crate::poisson::{build_pi_r, LieAlgebraAction, PoissonStructure};
use crate::symexpr::{Rat, Scalar};
use crate::{Error, Result};

/// `table[i][j][k]`
pub type Table3 = Vec<Vec<Vec<Scalar>>>;
/// `table[i][j][k][l]`
pub type Table4 = Vec<Vec<Vec<Vec<Scalar>>>>;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ContravariantConnection {
    pi: PoissonStructure,
    gamma: Table3,
}

fn zeros3(d: usize) -> Table3 {
    vec![vec![vec![Scalar::zero(); d]; d]; d]
}

impl ContravariantConnection {
    pub fn new(pi: PoissonStructure, gamma: Table3) -> Result<Self> {
        let d = pi.dim();
        if gamma.len() != d || gamma.iter().flatten().any(|r| r.len() != d) || gamma.iter().any(|r| r.len() != d) {
            return Err(Error::ChartMismatch {
                left: d,
                right: gamma.len(),
            });
        }
        Ok(ContravariantConnection { pi, gamma })
    }

    pub fn trivial(pi: PoissonStructure) -> Self {
        let d = pi.dim();
        ContravariantConnection {
            pi,
            gamma: zeros3(d),
        }
    }

    pub fn dim(&self) -> usize {
        self.pi.dim()
    }

    pub fn poisson(&self) -> &PoissonStructure {
        &self.pi
    }

    pub fn christoffel(&self) -> &Table3 {
        &self.gamma
    }

    pub fn gamma(&self, i: usize, j: usize, k: usize) -> &Scalar {
        &self.gamma[i][j][k]
    }

    /// `D_{dx_i} dx_j`
    pub fn on_coframe(&self, i: usize, j: usize) -> OneForm {
        OneForm::from_components(&self.gamma[i][j])
    }

    /// `D_α β = Σ α_i β_j Γ_ij^k dx_k + Σ_j π♯α(β_j) dx_j`
    pub fn apply(&self, a: &OneForm, b: &OneForm) -> Result<OneForm> {
        a.same_chart(self.dim())?;
        b.same_chart(self.dim())?;
        self.apply_form(a, &b.part(1))
    }

    /// `D_α` extended to forms of every degree as a degree-0 derivation with
    /// `D_α f = π♯α(f)`.
    pub fn apply_form(&self, a: &OneForm, s: &DiffForm) -> Result<DiffForm> {
        s.same_chart(self.dim())?;
        let d = self.dim();
        let alpha = a.components();
        let pa = self.pi.anchor(a)?;
        let d_alpha: Vec<OneForm> = (0..d)
            .map(|j| {
                let comps: Vec<Scalar> = (0..d)
                    .map(|k| (0..d).map(|i| &alpha[i] * &self.gamma[i][j][k]).sum())
                    .collect();
                OneForm::from_components(&comps)
            })
            .collect();
        let mut out = DiffForm::zero(d);
        for (idx, c) in s.terms() {
            out = &out + &DiffForm::basis(d, idx, pa.apply(c));
            for (p, &j) in idx.iter().enumerate() {
                if d_alpha[j].is_zero() {
                    continue;
                }
                let left = DiffForm::basis(d, &idx[..p], c.clone());
                let right = DiffForm::basis(d, &idx[p + 1..], Scalar::one());
                out = &out + &left.wedge_unchecked(&d_alpha[j]).wedge_unchecked(&right);
            }
        }
        Ok(out)
    }

    /// `T_ij^k = Γ_ij^k − Γ_ji^k − ∂_k π_ij`
    pub fn torsion(&self) -> Table3 {
        let d = self.dim();
        (0..d)
            .map(|i| {
                (0..d)
                    .map(|j| {
                        (0..d)
                            .map(|k| {
                                &(&self.gamma[i][j][k] - &self.gamma[j][i][k])
                                    - &self.pi.entry(i, j).diff(k)
                            })
                            .collect()
                    })
                    .collect()
            })
            .collect()
    }

    /// `R_ijk^l = Σ_m Γ_im^l Γ_jk^m − Γ_jm^l Γ_ik^m + π_im ∂_m Γ_jk^l
    /// − π_jm ∂_m Γ_ik^l − ∂_m π_ij Γ_mk^l`
    pub fn curvature(&self) -> Table4 {
        let d = self.dim();
        let g = &self.gamma;
        let pi = &self.pi;
        let comp = |i: usize, j: usize, k: usize, l: usize| -> Scalar {
            let mut s = Scalar::zero();
            for m in 0..d {
                s = &s + &(&g[i][m][l] * &g[j][k][m]);
                s = &s - &(&g[j][m][l] * &g[i][k][m]);
                s = &s + &(pi.entry(i, m) * &g[j][k][l].diff(m));
                s = &s - &(pi.entry(j, m) * &g[i][k][l].diff(m));
                s = &s - &(&pi.entry(i, j).diff(m) * &g[m][k][l]);
            }
            s
        };
        (0..d)
            .map(|i| {
                (0..d)
                    .map(|j| (0..d).map(|k| (0..d).map(|l| comp(i, j, k, l)).collect()).collect())
                    .collect()
            })
            .collect()
    }

    pub fn first_torsion(&self) -> Option<(usize, usize, usize)> {
        let t = self.torsion();
        let d = self.dim();
        for i in 0..d {
            for j in 0..d {
                for k in 0..d {
                    if !t[i][j][k].is_zero() {
                        return Some((i, j, k));
                    }
                }
            }
        }
        None
    }

    pub fn first_curvature(&self) -> Option<(usize, usize, usize, usize)> {
        let r = self.curvature();
        let d = self.dim();
        for i in 0..d {
            for j in 0..d {
                for k in 0..d {
                    for l in 0..d {
                        if !r[i][j][k][l].is_zero() {
                            return Some((i, j, k, l));
                        }
                    }
                }
            }
        }
        None
    }

    pub fn require_torsion_free(&self) -> Result<()> {
        match self.first_torsion() {
            Some((i, j, k)) => Err(Error::Torsion { i, j, k }),
            None => Ok(()),
        }
    }

    pub fn require_flat(&self) -> Result<()> {
        match self.first_curvature() {
            Some((i, j, k, l)) => Err(Error::NotFlat { i, j, k, l }),
            None => Ok(()),
        }
    }

    /// `D_α β − D_β α − [α, β]_π`
    pub fn torsion_of(&self, a: &OneForm, b: &OneForm) -> Result<OneForm> {
        Ok(&(&self.apply(a, b)? - &self.apply(b, a)?) - &koszul_bracket(&self.pi, a, b)?)
    }

    /// `D_α D_β γ − D_β D_α γ − D_{[α,β]_π} γ`
    pub fn curvature_of(&self, a: &OneForm, b: &OneForm, c: &OneForm) -> Result<OneForm> {
        let ab = koszul_bracket(&self.pi, a, b)?;
        let t1 = self.apply(a, &self.apply(b, c)?)?;
        let t2 = self.apply(b, &self.apply(a, c)?)?;
        Ok(&(&t1 - &t2) - &self.apply(&ab, c)?)
    }

    /// `π♯(D_α β)`, the induced partial connection `∇_{π♯α} π♯β`.
    pub fn induced_partial_connection(&self, a: &OneForm, b: &OneForm) -> Result<VectorField> {
        self.pi.anchor(&self.apply(a, b)?)
    }

    /// `D_a β` at `p` for a numeric covector `a` and coordinate `β = dx_j`.
    fn numeric_on_coframe(&self, p: &[f64], a: &DVector<f64>, j: usize) -> Result<DVector<f64>> {
        let d = self.dim();
        let mut out = DVector::zeros(d);
        for i in 0..d {
            if a[i] == 0.0 {
                continue;
            }
            for k in 0..d {
                out[k] += a[i] * self.gamma[i][j][k].eval(p)?;
            }
        }
        Ok(out)
    }

    /// Sup of `|D_a β|` over a kernel basis `a` of `π♯` and coordinate `β`.
    pub fn is_f_connection(&self, region: &[Vec<f64>], tol: f64) -> Result<FReport> {
        let mut worst = 0.0f64;
        for p in region {
            let prof = self.pi.rank_at(p, tol)?;
            if !prof.regular {
                return Err(Error::NotRegular { point: p.clone() });
            }
            let m = self.pi.matrix_at(p)?;
            for a in linalg::kernel_basis(&m, tol) {
                for j in 0..self.dim() {
                    worst = worst.max(self.numeric_on_coframe(p, &a, j)?.amax());
                }
            }
        }
        Ok(FReport {
            is_f: worst < tol,
            max_residual: worst,
            points: region.len(),
        })
    }

    /// For kernel fields `β = P b` (`P` the kernel projector, `b` a kernel
    /// basis at the point) and coframe `α = dx_i`, measures `|π♯(D_α β)|` and
    /// `|D_α β − L_{π♯α} β|`.
    pub fn kernel_stability_check(&self, region: &[Vec<f64>], tol: f64) -> Result<KernelStability> {
        let d = self.dim();
        let coframe: Vec<OneForm> = (0..d).map(|i| OneForm::dx(d, i)).collect();
        self.kernel_stability_with(region, &coframe, tol)
    }

    pub fn kernel_stability_with(
        &self,
        region: &[Vec<f64>],
        alphas: &[OneForm],
        tol: f64,
    ) -> Result<KernelStability> {
        let d = self.dim();
        let h = 1e-5;
        let mut rank0 = None;
        let mut anchor_res = 0.0f64;
        let mut lie_res = 0.0f64;
        for p in region {
            let m = self.pi.matrix_at(p)?;
            let rank = linalg::numeric_rank(&m, tol);
            if *rank0.get_or_insert(rank) != rank {
                return Err(Error::RankJump);
            }
            let basis = linalg::kernel_basis(&m, tol);
            let pi_p = m.clone();
            let projector = |q: &[f64]| -> Result<DMatrix<f64>> {
                let mq = self.pi.matrix_at(q)?;
                let ker = linalg::kernel_basis(&mq, tol);
                if ker.len() != basis.len() {
                    return Err(Error::RankJump);
                }
                let mut pm = DMatrix::zeros(d, d);
                for v in &ker {
                    pm += v * v.transpose();
                }
                Ok(pm)
            };
            // ∂_m β for every kernel field, by centered differences
            let mut dbeta = vec![vec![DVector::<f64>::zeros(d); d]; basis.len()];
            for mdir in 0..d {
                let mut qp = p.clone();
                let mut qm = p.clone();
                qp[mdir] += h;
                qm[mdir] -= h;
                let (pp, pm) = (projector(&qp)?, projector(&qm)?);
                for (n, b) in basis.iter().enumerate() {
                    dbeta[n][mdir] = (&pp * b - &pm * b) / (2.0 * h);
                }
            }
            for a in alphas {
                let alpha: Vec<f64> = a
                    .components()
                    .iter()
                    .map(|c| c.eval(p))
                    .collect::<std::result::Result<_, _>>()?;
                let x = self.pi.anchor(a)?;
                let xv: Vec<f64> = x
                    .components()
                    .iter()
                    .map(|c| c.eval(p))
                    .collect::<std::result::Result<_, _>>()?;
                let mut dx = DMatrix::zeros(d, d); // dx[(m, k)] = ∂_k X^m
                for mi in 0..d {
                    let xm = x.coeff(&[mi]);
                    for k in 0..d {
                        dx[(mi, k)] = xm.diff(k).eval(p)?;
                    }
                }
                for (n, b) in basis.iter().enumerate() {
                    let mut dab = DVector::zeros(d);
                    for i in 0..d {
                        for j in 0..d {
                            if alpha[i] == 0.0 || b[j] == 0.0 {
                                continue;
                            }
                            for k in 0..d {
                                dab[k] += alpha[i] * b[j] * self.gamma[i][j][k].eval(p)?;
                            }
                        }
                    }
                    let mut lie = DVector::zeros(d);
                    for k in 0..d {
                        for mi in 0..d {
                            dab[k] += xv[mi] * dbeta[n][mi][k];
                            lie[k] += xv[mi] * dbeta[n][mi][k] + b[mi] * dx[(mi, k)];
                        }
                    }
                    let anchored = pi_p.transpose() * &dab;
                    anchor_res = anchor_res.max(anchored.amax());
                    lie_res = lie_res.max((&dab - &lie).amax());
                }
            }
        }
        Ok(KernelStability {
            stable: anchor_res < tol && lie_res < tol,
            max_anchor_residual: anchor_res,
            max_lie_residual: lie_res,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FReport {
    pub is_f: bool,
    pub max_residual: f64,
    pub points: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct KernelStability {
    pub stable: bool,
    pub max_anchor_residual: f64,
    pub max_lie_residual: f64,
}

/// Tangent metric `g_ij` with its cotangent pairing `⟨dx_i, dx_j⟩ = g^{ij}`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Metric {
    g: SymMatrix,
    pairing: SymMatrix,
    pseudo: bool,
}

impl Metric {
    /// Checks symmetry and, unless `pseudo`, positive definiteness at `base`;
    /// pseudo metrics only need to be invertible there.
    pub fn new(g: SymMatrix, base: &[f64], pseudo: bool) -> Result<Self> {
        let d = g.len();
        for i in 0..d {
            if g[i].len() != d {
                return Err(Error::InvalidChart("metric is not square".into()));
            }
            for j in 0..i {
                if g[i][j] != g[j][i] {
                    return Err(Error::InvalidChart(format!("metric is not symmetric at ({i}, {j})")));
                }
            }
        }
        let m = linalg::eval_matrix(&g, base)?;
        let eig = SymmetricEigen::new(m).eigenvalues;
        let ok = if pseudo {
            eig.iter().all(|e| e.abs() > 1e-9)
        } else {
            eig.iter().all(|e| *e > 1e-9)
        };
        if !ok {
            return Err(Error::DegenerateMetric);
        }
        let pairing = linalg::inverse(&g).ok_or(Error::DegenerateMetric)?;
        Ok(Metric { g, pairing, pseudo })
    }

    /// Builds from the cotangent pairing `⟨dx_i, dx_j⟩`.
    pub fn from_pairing(pairing: SymMatrix, base: &[f64], pseudo: bool) -> Result<Self> {
        let g = linalg::inverse(&pairing).ok_or(Error::DegenerateMetric)?;
        Metric::new(g, base, pseudo)
    }

    pub fn euclidean(d: usize) -> Self {
        Metric {
            g: linalg::identity(d),
            pairing: linalg::identity(d),
            pseudo: false,
        }
    }

    pub fn dim(&self) -> usize {
        self.g.len()
    }

    pub fn tangent(&self) -> &SymMatrix {
        &self.g
    }

    pub fn pairing(&self) -> &SymMatrix {
        &self.pairing
    }

    pub fn is_pseudo(&self) -> bool {
        self.pseudo
    }

    /// `⟨α, β⟩`
    pub fn pair(&self, a: &OneForm, b: &OneForm) -> Scalar {
        let (a, b) = (a.components(), b.components());
        let d = self.dim();
        let mut s = Scalar::zero();
        for i in 0..d {
            for j in 0..d {
                if a[i].is_zero() || b[j].is_zero() {
                    continue;
                }
                s = &s + &(&(&a[i] * &b[j]) * &self.pairing[i][j]);
            }
        }
        s
    }
}

/// Metric contravariant connection from the contravariant Koszul formula.
pub fn levi_civita_contravariant(pi: &PoissonStructure, g: &Metric) -> Result<ContravariantConnection> {
    let d = pi.dim();
    if g.dim() != d {
        return Err(Error::ChartMismatch { left: d, right: g.dim() });
    }
    let gp = g.pairing();
    let anchors: Vec<VectorField> = (0..d).map(|i| pi.anchor_dx(i)).collect();
    // ⟨[dx_i, dx_j]_π, dx_k⟩ = ⟨dπ_ij, dx_k⟩
    let br = |i: usize, j: usize, k: usize| -> Scalar {
        (0..d).map(|m| &pi.entry(i, j).diff(m) * &gp[m][k]).sum()
    };
    let mut k3 = zeros3(d);
    let half = Scalar::from_rat(crate::symexpr::rat(1, 2));
    for i in 0..d {
        for j in 0..d {
            for k in 0..d {
                let s = &(&(&(&anchors[i].apply(&gp[j][k]) + &anchors[j].apply(&gp[i][k]))
                    - &anchors[k].apply(&gp[i][j]))
                    + &(&br(i, j, k) - &br(j, k, i)))
                    + &br(k, i, j);
                k3[i][j][k] = &half * &s;
            }
        }
    }
    let gt = g.tangent();
    let mut gamma = zeros3(d);
    for i in 0..d {
        for j in 0..d {
            for l in 0..d {
                gamma[i][j][l] = (0..d).map(|k| &k3[i][j][k] * &gt[k][l]).sum();
            }
        }
    }
    ContravariantConnection::new(pi.clone(), gamma)
}

/// `π♯dx_i(⟨dx_j, dx_k⟩) − ⟨D_{dx_i}dx_j, dx_k⟩ − ⟨dx_j, D_{dx_i}dx_k⟩`
pub fn metric_compatibility_residual(dc: &ContravariantConnection, g: &Metric) -> Table3 {
    let d = dc.dim();
    let gp = g.pairing();
    let mut out = zeros3(d);
    for i in 0..d {
        let a = dc.poisson().anchor_dx(i);
        for j in 0..d {
            for k in 0..d {
                let mut s = a.apply(&gp[j][k]);
                for l in 0..d {
                    s = &s - &(dc.gamma(i, j, l) * &gp[l][k]);
                    s = &s - &(dc.gamma(i, k, l) * &gp[j][l]);
                }
                out[i][j][k] = s;
            }
        }
    }
    out
}

/// `D^r_α β = Σ a_ij α(ζ_i) L_{ζ_j} β`, i.e. `Γ_kl^m = Σ a_ij ζ_i^k ∂_m ζ_j^l`.
pub fn build_dr(action: &LieAlgebraAction, pi: &PoissonStructure) -> Result<ContravariantConnection> {
    let pr = build_pi_r(action)?;
    let d = pi.dim();
    if pr.dim() != d {
        return Err(Error::ChartMismatch { left: d, right: pr.dim() });
    }
    for i in 0..d {
        for j in 0..d {
            if pr.entry(i, j) != pi.entry(i, j) {
                return Err(Error::PiMismatch { i, j });
            }
        }
    }
    let n = action.n();
    let zeta: Vec<Vec<Scalar>> = action.fields.iter().map(|f| f.components()).collect();
    let zero = Rat::from_integer(0.into());
    let mut gamma = zeros3(d);
    for k in 0..d {
        for l in 0..d {
            for m in 0..d {
                let mut s = Scalar::zero();
                for i in 0..n {
                    for j in 0..n {
                        if action.r[i][j] == zero {
                            continue;
                        }
                        let a = Scalar::from_rat(action.r[i][j].clone());
                        s = &s + &(&a * &(&zeta[i][k] * &zeta[j][l].diff(m)));
                    }
                }
                gamma[k][l][m] = s;
            }
        }
    }
    ContravariantConnection::new(pi.clone(), gamma)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symexpr::parse;

    fn names(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    fn sc(src: &str, n: &[&str]) -> Scalar {
        parse(src, &names(n)).unwrap().to_scalar()
    }

    fn cubic() -> ContravariantConnection {
        let xy = ["x1", "x2"];
        let pi = PoissonStructure::from_upper(2, &[(0, 1, sc("1 + x1^3", &xy))]).unwrap();
        let mut g = zeros3(2);
        g[1][0][0] = sc("-3*x1^2", &xy);
        g[1][1][1] = sc("-3*x1^2", &xy);
        ContravariantConnection::new(pi, g).unwrap()
    }

    #[test]
    fn apply_examples() {
        let pi = PoissonStructure::from_upper(2, &[(0, 1, Scalar::one())]).unwrap();
        let dc = ContravariantConnection::trivial(pi);
        assert!(dc.apply(&OneForm::dx(2, 0), &OneForm::dx(2, 1)).unwrap().is_zero());
        let c = cubic();
        assert_eq!(
            c.apply(&OneForm::dx(2, 1), &OneForm::dx(2, 0)).unwrap(),
            OneForm::basis(2, &[0], sc("-3*x1^2", &["x1", "x2"]))
        );
        assert!(c.first_torsion().is_none());
        assert!(c.first_curvature().is_none());
    }

    #[test]
    fn torsion_fixture() {
        let pi = PoissonStructure::from_upper(2, &[(0, 1, Scalar::one())]).unwrap();
        let mut g = zeros3(2);
        g[0][1][0] = Scalar::one();
        let dc = ContravariantConnection::new(pi, g).unwrap();
        assert_eq!(dc.torsion()[0][1][0], Scalar::one());
        assert!(matches!(dc.require_torsion_free(), Err(Error::Torsion { i: 0, j: 1, k: 0 })));
    }

    #[test]
    fn koszul_example_value() {
        let xy = ["x1", "x2"];
        let pi = PoissonStructure::from_upper(2, &[(0, 1, Scalar::one())]).unwrap();
        let g = Metric::new(
            vec![vec![sc("1 + x1^2", &xy), Scalar::zero()], vec![Scalar::zero(), Scalar::one()]],
            &[0.0, 0.0],
            false,
        )
        .unwrap();
        let dc = levi_civita_contravariant(&pi, &g).unwrap();
        assert_eq!(dc.gamma(0, 0, 1).eval(&[1.0, 0.0]).unwrap(), -0.25);
        assert!(dc.first_torsion().is_none());
        assert!(metric_compatibility_residual(&dc, &g).iter().flatten().flatten().all(|s| s.is_zero()));
    }

    #[test]
    fn degenerate_metric_rejected() {
        let m = vec![vec![Scalar::one(), Scalar::zero()], vec![Scalar::zero(), -Scalar::one()]];
        assert!(matches!(Metric::new(m.clone(), &[0.0, 0.0], false), Err(Error::DegenerateMetric)));
        assert!(Metric::new(m, &[0.0, 0.0], true).is_ok());
    }

    #[test]
    fn f_connection_and_kernel_stability() {
        let pi = PoissonStructure::from_upper(3, &[(0, 1, Scalar::one())]).unwrap();
        let region = vec![vec![0.0, 0.0, 0.0], vec![0.2, -0.1, 0.3]];
        let dc = ContravariantConnection::trivial(pi.clone());
        assert!(dc.is_f_connection(&region, 1e-9).unwrap().is_f);
        let ks = dc.kernel_stability_check(&region, 1e-9).unwrap();
        assert!(ks.stable, "{ks:?}");
        let x1dx2 = OneForm::basis(3, &[1], Scalar::coord(0));
        assert!(dc.kernel_stability_with(&region, &[x1dx2], 1e-9).unwrap().stable);

        let mut g = zeros3(3);
        g[2][0][0] = Scalar::one();
        g[0][2][0] = Scalar::one();
        let broken = ContravariantConnection::new(pi, g).unwrap();
        assert!(broken.first_torsion().is_none());
        let f = broken.is_f_connection(&region, 1e-9).unwrap();
        assert!(!f.is_f);
        assert!((f.max_residual - 1.0).abs() < 1e-12);
        let ks = broken.kernel_stability_check(&region, 1e-9).unwrap();
        assert!(ks.max_anchor_residual > 0.5);
    }
}
