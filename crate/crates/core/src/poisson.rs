//! Poisson tensors, anchors, regularity, and Lie-algebra actions with
//! r-matrices.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::forms::{DiffForm, MultiVector, OneForm, VectorField};
use crate::linalg::{self, SymMatrix};
use crate::symexpr::{EvalError, Rat, Scalar};
use crate::{Error, Result};

/// Antisymmetric component matrix `π_ij = π(dx_i, dx_j)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PoissonStructure {
    pi: SymMatrix,
}

impl PoissonStructure {
    /// Builds from a full matrix; fails unless `π_ij = −π_ji` exactly.
    pub fn from_matrix(pi: SymMatrix) -> Result<Self> {
        let d = pi.len();
        if pi.iter().any(|r| r.len() != d) {
            return Err(Error::InvalidChart("poisson matrix is not square".into()));
        }
        for i in 0..d {
            for j in i..d {
                if !(&pi[i][j] + &pi[j][i]).is_zero() {
                    return Err(Error::NotAntisymmetric { i, j });
                }
            }
        }
        Ok(PoissonStructure { pi })
    }

    /// Builds from upper-triangle entries `(i, j, π_ij)` with `i < j`.
    pub fn from_upper(dim: usize, entries: &[(usize, usize, Scalar)]) -> Result<Self> {
        let mut pi = vec![vec![Scalar::zero(); dim]; dim];
        for (i, j, c) in entries {
            if *i >= dim || *j >= dim || i == j {
                return Err(Error::InvalidChart(format!("bad poisson index ({i}, {j})")));
            }
            pi[*i][*j] = c.clone();
            pi[*j][*i] = -c;
        }
        Ok(PoissonStructure { pi })
    }

    pub fn zero(dim: usize) -> Self {
        PoissonStructure {
            pi: vec![vec![Scalar::zero(); dim]; dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.pi.len()
    }

    pub fn entry(&self, i: usize, j: usize) -> &Scalar {
        &self.pi[i][j]
    }

    pub fn matrix(&self) -> &SymMatrix {
        &self.pi
    }

    pub fn bivector(&self) -> MultiVector {
        let d = self.dim();
        let mut out = MultiVector::zero(d);
        for i in 0..d {
            for j in i + 1..d {
                out = &out + &MultiVector::basis(d, &[i, j], self.pi[i][j].clone());
            }
        }
        out
    }

    /// `(π♯α)^j = Σ_i α_i π_ij`.
    pub fn anchor(&self, a: &OneForm) -> Result<VectorField> {
        a.same_chart(self.dim())?;
        let d = self.dim();
        let alpha = a.components();
        let comps: Vec<Scalar> = (0..d)
            .map(|j| (0..d).map(|i| &alpha[i] * &self.pi[i][j]).sum())
            .collect();
        Ok(VectorField::from_components(&comps))
    }

    /// `π♯(dx_i)`.
    pub fn anchor_dx(&self, i: usize) -> VectorField {
        VectorField::from_components(&self.pi[i])
    }

    pub fn pair(&self, a: &OneForm, b: &OneForm) -> Result<Scalar> {
        Ok(b.pair(&self.anchor(a)?))
    }

    /// `H_f = π♯(df)`.
    pub fn hamiltonian(&self, f: &Scalar) -> VectorField {
        self.anchor(&DiffForm::df(self.dim(), f)).expect("same chart")
    }

    /// `{f, g} = π(df, dg)`.
    pub fn bracket(&self, f: &Scalar, g: &Scalar) -> Scalar {
        self.hamiltonian(f).apply(g)
    }

    /// Trivector with components `Σ_l π_il ∂_l π_jk + π_jl ∂_l π_ki + π_kl ∂_l π_ij`.
    pub fn jacobi_residual(&self) -> MultiVector {
        let d = self.dim();
        let mut out = MultiVector::zero(d);
        let term = |i: usize, j: usize, k: usize| -> Scalar {
            (0..d).map(|l| &self.pi[i][l] * &self.pi[j][k].diff(l)).sum()
        };
        for i in 0..d {
            for j in i + 1..d {
                for k in j + 1..d {
                    let c = &(&term(i, j, k) + &term(j, k, i)) + &term(k, i, j);
                    out = &out + &MultiVector::basis(d, &[i, j, k], c);
                }
            }
        }
        out
    }

    pub fn is_poisson(&self) -> bool {
        self.jacobi_residual().is_zero()
    }

    pub fn matrix_at(&self, p: &[f64]) -> Result<nalgebra::DMatrix<f64>, EvalError> {
        linalg::eval_matrix(&self.pi, p)
    }

    pub fn rank_at(&self, p: &[f64], tol: f64) -> Result<RankProfile, EvalError> {
        let rank = linalg::numeric_rank(&self.matrix_at(p)?, tol);
        let mut regular = true;
        for q in probe_points(p) {
            let r = linalg::numeric_rank(&self.matrix_at(&q)?, tol);
            if r != rank {
                regular = false;
            }
        }
        Ok(RankProfile {
            point: p.to_vec(),
            rank,
            regular,
        })
    }
}

pub const PROBE_RADIUS: f64 = 1e-3;
pub const PROBE_COUNT: usize = 8;

/// Fixed probe points on the sphere of radius [`PROBE_RADIUS`] around `p`.
pub fn probe_points(p: &[f64]) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    (0..PROBE_COUNT)
        .map(|_| {
            let dir: Vec<f64> = p.iter().map(|_| rng.gen_range(-1.0..1.0)).collect();
            let n = dir.iter().map(|x| x * x).sum::<f64>().sqrt().max(1e-12);
            p.iter()
                .zip(&dir)
                .map(|(x, u)| x + PROBE_RADIUS * u / n)
                .collect()
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RankProfile {
    pub point: Vec<f64>,
    pub rank: usize,
    pub regular: bool,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActionConvention {
    /// `[ζ(u_i), ζ(u_j)] = ζ([u_i, u_j])`
    #[default]
    Homomorphism,
    /// `[ζ(u_i), ζ(u_j)] = −ζ([u_i, u_j])`
    AntiHomomorphism,
}

/// Infinitesimal action of an `n`-dimensional Lie algebra with an r-matrix.
#[derive(Clone, Debug)]
pub struct LieAlgebraAction {
    /// `c[i][j][k] = c_ij^k`
    pub structure_constants: Vec<Vec<Vec<Rat>>>,
    pub fields: Vec<VectorField>,
    pub r: Vec<Vec<Rat>>,
    pub convention: ActionConvention,
}

impl LieAlgebraAction {
    /// Validates the structure constants, the field brackets and the
    /// antisymmetry of `r`.
    pub fn new(
        structure_constants: Vec<Vec<Vec<Rat>>>,
        fields: Vec<VectorField>,
        r: Vec<Vec<Rat>>,
        convention: ActionConvention,
    ) -> Result<Self> {
        let n = fields.len();
        let bad = |m: String| Err(Error::BadAction(m));
        let c = &structure_constants;
        if c.len() != n || c.iter().any(|x| x.len() != n || x.iter().any(|y| y.len() != n)) {
            return bad(format!("structure constants must be {n}x{n}x{n}"));
        }
        if r.len() != n || r.iter().any(|x| x.len() != n) {
            return bad(format!("r must be {n}x{n}"));
        }
        let dim = fields.first().map_or(0, |f| f.dim());
        if fields.iter().any(|f| f.dim() != dim) {
            return bad("fundamental fields live on different charts".into());
        }
        for i in 0..n {
            for j in 0..n {
                if r[i][j] != -r[j][i].clone() {
                    return bad(format!("r is not antisymmetric at ({}, {})", i + 1, j + 1));
                }
                for k in 0..n {
                    if c[i][j][k] != -c[j][i][k].clone() {
                        return bad(format!("c is not antisymmetric at ({}, {}, {})", i + 1, j + 1, k + 1));
                    }
                }
            }
        }
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    for m in 0..n {
                        let s: Rat = (0..n)
                            .map(|l| {
                                &c[i][j][l] * &c[l][k][m]
                                    + &c[j][k][l] * &c[l][i][m]
                                    + &c[k][i][l] * &c[l][j][m]
                            })
                            .sum();
                        if s != Rat::from_integer(0.into()) {
                            return bad(format!("structure constants violate Jacobi at ({}, {}, {})", i + 1, j + 1, k + 1));
                        }
                    }
                }
            }
        }
        let sign = match convention {
            ActionConvention::Homomorphism => Scalar::one(),
            ActionConvention::AntiHomomorphism => -Scalar::one(),
        };
        for i in 0..n {
            for j in i + 1..n {
                let lhs = fields[i].lie_bracket(&fields[j])?;
                let mut rhs = VectorField::zero(dim);
                for k in 0..n {
                    rhs = &rhs + &fields[k].scale(&Scalar::from_rat(c[i][j][k].clone()));
                }
                if !(&lhs - &rhs.scale(&sign)).is_zero() {
                    return bad(format!(
                        "fundamental fields {}, {} do not bracket as the structure constants say",
                        i + 1,
                        j + 1
                    ));
                }
            }
        }
        Ok(LieAlgebraAction {
            structure_constants,
            fields,
            r,
            convention,
        })
    }

    pub fn n(&self) -> usize {
        self.fields.len()
    }

    pub fn dim(&self) -> usize {
        self.fields.first().map_or(0, |f| f.dim())
    }

    /// `[r, r]^{ijk} = Σ_{l,m} c_lm^i a^{lj} a^{mk} + cyclic`.
    pub fn cybe_residual(&self) -> Vec<Vec<Vec<Rat>>> {
        let n = self.n();
        let c = &self.structure_constants;
        let a = &self.r;
        let part = |i: usize, j: usize, k: usize| -> Rat {
            let mut s = Rat::from_integer(0.into());
            for l in 0..n {
                for m in 0..n {
                    s += &c[l][m][i] * &a[l][j] * &a[m][k];
                }
            }
            s
        };
        (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| (0..n).map(|k| part(i, j, k) + part(j, k, i) + part(k, i, j)).collect())
                    .collect()
            })
            .collect()
    }

    pub fn satisfies_cybe(&self) -> bool {
        self.cybe_residual()
            .iter()
            .flatten()
            .flatten()
            .all(|x| *x == Rat::from_integer(0.into()))
    }
}

/// `π^r = ½ Σ a_ij ζ(u_i) ∧ ζ(u_j)`, i.e. `π^r_kl = Σ a_ij ζ_i^k ζ_j^l`.
pub fn build_pi_r(action: &LieAlgebraAction) -> Result<PoissonStructure> {
    if !action.satisfies_cybe() {
        let res: Vec<String> = action
            .cybe_residual()
            .iter()
            .flatten()
            .flatten()
            .map(|x| x.to_string())
            .collect();
        return Err(Error::Cybe(format!("[{}]", res.join(", "))));
    }
    let d = action.dim();
    let n = action.n();
    let zeta: Vec<Vec<Scalar>> = action.fields.iter().map(|f| f.components()).collect();
    let mut pi = vec![vec![Scalar::zero(); d]; d];
    for k in 0..d {
        for l in 0..d {
            let mut s = Scalar::zero();
            for i in 0..n {
                for j in 0..n {
                    if action.r[i][j] == Rat::from_integer(0.into()) {
                        continue;
                    }
                    let a = Scalar::from_rat(action.r[i][j].clone());
                    s = &s + &(&a * &(&zeta[i][k] * &zeta[j][l]));
                }
            }
            pi[k][l] = s;
        }
    }
    PoissonStructure::from_matrix(pi)
}
