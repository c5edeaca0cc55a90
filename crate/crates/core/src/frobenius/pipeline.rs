use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use super::frame::{leaf_block_inverse, FlatFrame};
use super::grid::{Grid, GridField};
use super::system::{solve, symbolic_matrix, symbolic_vector, zero_vector, FrobeniusSystem, MatrixFn, Solution};
use crate::connection::{ContravariantConnection, Metric};
use crate::hawkins::{tensor_t, tensor_zero};
use crate::linalg::{self, SymMatrix};
use crate::poisson::probe_points;
use crate::symexpr::{DomainBox, Scalar};
use crate::{Error, Result};

/// Initial horizontal subspace on the transversal.
#[derive(Clone, Debug)]
pub enum InitialSplitting {
    /// `2r` covectors at the base point, used on the whole transversal.
    Basis(Vec<Vec<f64>>),
    /// `A_i^u` evaluated on the transversal.
    Symbolic(Vec<Vec<Scalar>>),
}

/// Numeric `A_i^u` over the full grid.
#[derive(Clone, Debug)]
pub struct Splitting {
    pub grid: Grid,
    /// `a[i][u]`
    pub a: Vec<Vec<GridField>>,
    pub integrability: f64,
    pub path_discrepancy: f64,
}

impl Splitting {
    /// Largest nodal gap to a symbolic table.
    pub fn deviation_from(&self, sym: &[Vec<Scalar>], base: &[f64]) -> f64 {
        let mut worst: f64 = 0.0;
        for (i, row) in self.a.iter().enumerate() {
            for (u, f) in row.iter().enumerate() {
                for n in 0..self.grid.len() {
                    let p = self.grid.point(n, base);
                    worst = worst.max((f.values()[n] - sym[i][u].eval_or_nan(&p)).abs());
                }
            }
        }
        worst
    }
}

fn require_full_grid(grid: &Grid, d: usize) -> Result<()> {
    if grid.axes() != (0..d).collect::<Vec<_>>().as_slice() {
        return Err(Error::Grid("expected a grid over every chart coordinate".into()));
    }
    Ok(())
}

/// Transverse nodes with the matching base point of each leaf.
fn leaves(grid: &Grid, leaf: usize, base: &[f64]) -> Result<(Option<Grid>, Vec<Vec<f64>>)> {
    let d = grid.dim();
    if leaf == d {
        return Ok((None, vec![base.to_vec()]));
    }
    let ty = grid.restrict(&(leaf..d).collect::<Vec<_>>())?;
    let bases = (0..ty.len()).map(|n| ty.point(n, base)).collect();
    Ok((Some(ty), bases))
}

/// Glues per-leaf solutions (over the leaf axes) into fields on the full grid.
fn assemble(grid: &Grid, leaf: usize, ty: Option<&Grid>, per_leaf: &[Vec<GridField>]) -> Result<Vec<GridField>> {
    let comps = per_leaf.first().map_or(0, |v| v.len());
    (0..comps)
        .map(|c| {
            let values = (0..grid.len())
                .map(|n| {
                    let idx = grid.multi_index(n);
                    let t = ty.map_or(0, |g| g.flat_index(&idx[leaf..]));
                    per_leaf[t][c].at(&idx[..leaf])
                })
                .collect();
            GridField::new(grid.clone(), values)
        })
        .collect()
}

/// Solves `∂B_j^u/∂x_i = Σ_k (Σ_l π^{il} Γ_lj^k) B_k^u − Σ_l π^{il} Γ_lj^u`
/// leaf by leaf from the initial subspace on the transversal.
pub fn flat_splitting(
    dc: &ContravariantConnection,
    leaf: usize,
    h0: &InitialSplitting,
    grid: &Grid,
    base: &[f64],
    step: f64,
) -> Result<Splitting> {
    let d = dc.dim();
    require_full_grid(grid, d)?;
    let pinv = leaf_block_inverse(dc.poisson(), leaf)?;
    for i in 0..leaf {
        for j in 0..leaf {
            if dc.poisson().entry(i, j).as_rat().is_none() {
                return Err(Error::NotSplit(format!("π_{}{} is not constant", i + 1, j + 1)));
            }
        }
    }
    dc.require_torsion_free()?;
    dc.require_flat()?;
    let s = d - leaf;
    let (ty, bases) = leaves(grid, leaf, base)?;
    let xg = grid.restrict(&(0..leaf).collect::<Vec<_>>())?;
    let g = |l: usize, j: usize, k: usize| dc.gamma(l, j, k);
    let contract = |i: usize, j: usize, k: usize| -> Scalar {
        (0..leaf).map(|l| &pinv[i][l] * g(l, j, k)).sum()
    };
    let gammas: Vec<MatrixFn> = (0..leaf)
        .map(|i| symbolic_matrix((0..leaf).map(|j| (0..leaf).map(|k| contract(i, j, k)).collect()).collect()))
        .collect();
    let initial: Box<dyn Fn(&[f64]) -> Result<DMatrix<f64>>> = match h0 {
        InitialSplitting::Basis(rows) => {
            if rows.len() != leaf || rows.iter().any(|r| r.len() != d) {
                return Err(Error::Grid(format!("initial subspace needs {leaf} covectors of length {d}")));
            }
            let m = DMatrix::from_fn(leaf, leaf, |i, j| rows[i][j]);
            let n = DMatrix::from_fn(leaf, s, |i, u| rows[i][leaf + u]);
            if m.determinant().abs() < 1e-9 {
                return Err(Error::NotSplit("initial subspace meets the kernel of the anchor".into()));
            }
            let b = m.try_inverse().expect("determinant checked") * n;
            Box::new(move |_| Ok(b.clone()))
        }
        InitialSplitting::Symbolic(a) => {
            if a.len() != leaf || a.iter().any(|r| r.len() != s) {
                return Err(Error::Grid(format!("A must be {leaf}x{s}")));
            }
            let a = a.clone();
            Box::new(move |p| {
                let mut m = DMatrix::zeros(leaf, s);
                for i in 0..leaf {
                    for u in 0..s {
                        m[(i, u)] = a[i][u].eval(p)?;
                    }
                }
                Ok(m)
            })
        }
    };
    let mut integrability: f64 = 0.0;
    let mut path: f64 = 0.0;
    let mut per_leaf = Vec::with_capacity(bases.len());
    for bt in &bases {
        let b0 = initial(bt)?;
        let mut comps = Vec::with_capacity(leaf * s);
        let mut sols: Vec<Solution> = Vec::with_capacity(s);
        for u in 0..s {
            let inhom = (0..leaf)
                .map(|i| symbolic_vector((0..leaf).map(|j| -contract(i, j, leaf + u)).collect()))
                .collect();
            let sys = FrobeniusSystem {
                size: leaf,
                params: (0..leaf).collect(),
                gamma: gammas.clone(),
                inhom,
                initial: b0.column(u).into_owned(),
                base: bt.clone(),
                step,
            };
            let sol = solve(&sys, &xg)?;
            integrability = integrability.max(sol.integrability);
            path = path.max(sol.path_discrepancy);
            sols.push(sol);
        }
        for i in 0..leaf {
            for sol in &sols {
                comps.push(sol.fields[i].clone());
            }
        }
        per_leaf.push(comps);
    }
    let flat = if s == 0 { vec![] } else { assemble(grid, leaf, ty.as_ref(), &per_leaf)? };
    let mut it = flat.into_iter();
    let a = (0..leaf).map(|_| (0..s).map(|_| it.next().expect("leaf*s fields")).collect()).collect();
    Ok(Splitting {
        grid: grid.clone(),
        a,
        integrability,
        path_discrepancy: path,
    })
}

/// Vector fields on the grid, `fields[i][m]` the `m`-th component of field `i`.
#[derive(Clone, Debug)]
pub struct CommutingFields {
    pub grid: Grid,
    pub fields: Vec<Vec<GridField>>,
    pub integrability: f64,
    pub path_discrepancy: f64,
}

/// On every leaf, solves `[T, X_j] = 0` as `∂_l T = Σ_j (X⁻¹)_{lj} (∂X_j) T`
/// with `T_i = X_i` on the transversal.
pub fn build_commuting_fields(ff: &FlatFrame, grid: &Grid, base: &[f64], step: f64) -> Result<CommutingFields> {
    let d = ff.dim();
    let leaf = ff.leaf();
    require_full_grid(grid, d)?;
    let x: Vec<Vec<Scalar>> = ff.frame()[..leaf].iter().map(|f| f.components()[..leaf].to_vec()).collect();
    let minv = linalg::inverse(&x).ok_or_else(|| Error::NotRegular { point: base.to_vec() })?;
    let jac: Vec<SymMatrix> = x
        .iter()
        .map(|xj| (0..leaf).map(|m| (0..leaf).map(|k| xj[m].diff(k)).collect()).collect())
        .collect();
    let gammas: Vec<MatrixFn> = (0..leaf)
        .map(|l| {
            let g: SymMatrix = (0..leaf)
                .map(|m| (0..leaf).map(|k| (0..leaf).map(|j| &minv[l][j] * &jac[j][m][k]).sum()).collect())
                .collect();
            symbolic_matrix(g)
        })
        .collect();
    let (ty, bases) = leaves(grid, leaf, base)?;
    let xg = grid.restrict(&(0..leaf).collect::<Vec<_>>())?;
    let mut integrability: f64 = 0.0;
    let mut path: f64 = 0.0;
    let mut per_field: Vec<Vec<Vec<GridField>>> = vec![Vec::new(); leaf];
    for bt in &bases {
        let xm = linalg::eval_matrix(&x, bt)?;
        if linalg::numeric_rank(&xm, 1e-9) < leaf {
            return Err(Error::NotRegular { point: bt.clone() });
        }
        for (i, out) in per_field.iter_mut().enumerate() {
            let sys = FrobeniusSystem {
                size: leaf,
                params: (0..leaf).collect(),
                gamma: gammas.clone(),
                inhom: (0..leaf).map(|_| zero_vector(leaf)).collect(),
                initial: xm.row(i).transpose(),
                base: bt.clone(),
                step,
            };
            let sol = solve(&sys, &xg)?;
            integrability = integrability.max(sol.integrability);
            path = path.max(sol.path_discrepancy);
            out.push(sol.fields);
        }
    }
    let fields = per_field
        .iter()
        .map(|pl| {
            let mut comps = assemble(grid, leaf, ty.as_ref(), pl)?;
            comps.extend((leaf..d).map(|_| GridField::constant(grid, 0.0)));
            Ok(comps)
        })
        .collect::<Result<_>>()?;
    Ok(CommutingFields {
        grid: grid.clone(),
        fields,
        integrability,
        path_discrepancy: path,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct ReconstructOptions {
    pub nodes: usize,
    pub half_width: f64,
    pub step: f64,
    pub tol: f64,
}

impl Default for ReconstructOptions {
    fn default() -> Self {
        ReconstructOptions {
            nodes: super::grid::DEFAULT_NODES,
            half_width: super::grid::DEFAULT_HALF_WIDTH,
            step: super::system::DEFAULT_STEP,
            tol: 1e-6,
        }
    }
}

/// Max residuals of the reconstruction, one per stage.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ResidualReport {
    pub commutation_x: f64,
    pub commutation_y: f64,
    pub a_constancy: f64,
    pub c_constancy: f64,
    pub c_jacobi: f64,
    pub pi_reconstruction: f64,
    pub d_reconstruction: f64,
    pub killing: Option<f64>,
    pub splitting_deviation: Option<f64>,
    pub gamma_integrability: f64,
    pub path_discrepancy: f64,
    pub a_det: f64,
}

impl ResidualReport {
    pub fn stages(&self) -> Vec<(&'static str, f64)> {
        let mut v = vec![
            ("commutation_x", self.commutation_x),
            ("commutation_y", self.commutation_y),
            ("a_constancy", self.a_constancy),
            ("c_constancy", self.c_constancy),
            ("c_jacobi", self.c_jacobi),
            ("pi_reconstruction", self.pi_reconstruction),
            ("d_reconstruction", self.d_reconstruction),
            ("gamma_integrability", self.gamma_integrability),
            ("path_discrepancy", self.path_discrepancy),
        ];
        v.extend(self.killing.map(|k| ("killing", k)));
        v.extend(self.splitting_deviation.map(|k| ("splitting_deviation", k)));
        v
    }

    /// First stage above `tol`, or a singular `a`.
    pub fn first_failure(&self, tol: f64) -> Option<(&'static str, f64)> {
        if !(self.a_det.abs() > tol) {
            return Some(("a_invertible", self.a_det));
        }
        self.stages().into_iter().find(|(_, r)| !(*r < tol))
    }
}

#[derive(Clone, Debug)]
pub struct ReconstructionResult {
    pub grid: Grid,
    pub step: f64,
    pub t: Vec<Vec<GridField>>,
    /// `xi[i][j] = ξ_ji` on the transversal; empty without transverse coordinates.
    pub xi: Vec<Vec<GridField>>,
    pub z: Vec<Vec<GridField>>,
    pub a: Vec<Vec<f64>>,
    /// `c[i][j][k] = c_ij^k`
    pub c: Vec<Vec<Vec<f64>>>,
    pub residuals: ResidualReport,
}

fn fmax(a: f64, b: f64) -> f64 {
    if a.is_nan() || b.is_nan() {
        f64::NAN
    } else {
        a.max(b)
    }
}

/// `∂_k` of every component of every field.
fn partials(fields: &[Vec<GridField>], d: usize) -> Result<Vec<Vec<Vec<GridField>>>> {
    fields
        .iter()
        .map(|f| f.iter().map(|c| (0..d).map(|k| c.partial(k)).collect()).collect())
        .collect()
}

/// Lie bracket `[Z, X]^m` at node `n` of a grid field against a symbolic one.
fn bracket_with(
    z: &[GridField],
    dz: &[Vec<GridField>],
    x: &[f64],
    dx: &[Vec<f64>],
    n: usize,
) -> Vec<f64> {
    let d = z.len();
    (0..d)
        .map(|m| {
            (0..d)
                .map(|k| z[k].values()[n] * dx[m][k] - x[k] * dz[m][k].values()[n])
                .sum()
        })
        .collect()
}

fn eval_field(v: &[Scalar], p: &[f64]) -> (Vec<f64>, Vec<Vec<f64>>) {
    let d = v.len();
    (
        v.iter().map(|s| s.eval_or_nan(p)).collect(),
        v.iter().map(|s| (0..d).map(|k| s.diff(k).eval_or_nan(p)).collect()).collect(),
    )
}

fn frame_at(z: &[Vec<GridField>], leaf: usize, n: usize) -> DMatrix<f64> {
    DMatrix::from_fn(leaf, leaf, |i, m| z[i][m].values()[n])
}

/// Describes the first nonzero component of `T` for the precondition error.
fn first_t_component(ff: &FlatFrame, names: &[String]) -> Option<String> {
    let t = tensor_t(ff);
    let labels = crate::hawkins::frame_labels(names, ff.leaf(), ff.dim());
    t.nonzero().first().map(|(idx, w)| {
        format!(
            "T({}, {}) = {}",
            labels[idx[0]],
            labels[idx[1]],
            crate::hawkins::display_frame_form(w, &labels)
        )
    })
}

/// Builds the fields `Z_i`, the constant matrix `a` and the structure
/// constants `c`, and measures every residual.
pub fn reconstruct(
    ff: &FlatFrame,
    metric: Option<&Metric>,
    base: &[f64],
    names: &[String],
    opts: &ReconstructOptions,
) -> Result<ReconstructionResult> {
    let dc = ff.connection();
    let d = ff.dim();
    let leaf = ff.leaf();
    let s = d - leaf;
    let tol = opts.tol;
    dc.require_torsion_free()?;
    dc.require_flat()?;
    let mut region = probe_points(base);
    region.push(base.to_vec());
    let f = dc.is_f_connection(&region, 1e-9)?;
    if !f.is_f {
        return Err(Error::Residual {
            stage: "f_connection",
            residual: f.max_residual,
            tol: 1e-9,
        });
    }
    let domain = DomainBox::around(base);
    if !tensor_zero(&tensor_t(ff), tol, &domain, 0)?.is_zero {
        return Err(Error::TensorTNonzero(
            first_t_component(ff, names).unwrap_or_else(|| "sampled nonzero".into()),
        ));
    }
    let grid = Grid::around(base, &(0..d).collect::<Vec<_>>(), opts.half_width, opts.nodes)?;
    let splitting_deviation = if s > 0 {
        let sym = ff.a().to_vec();
        let sp = flat_splitting(dc, leaf, &InitialSplitting::Symbolic(sym.clone()), &grid, base, opts.step)?;
        Some(sp.deviation_from(&sym, base))
    } else {
        None
    };
    let tf = build_commuting_fields(ff, &grid, base, opts.step)?;
    let mut path = tf.path_discrepancy;
    let xs: Vec<Vec<Scalar>> = ff.frame().iter().map(|f| f.components()).collect();
    let base_node = grid.node_of(base)?;
    let base_flat = grid.flat_index(&base_node);

    let (xi, gamma_integrability) = if s > 0 {
        let dt = partials(&tf.fields, d)?;
        let ty = grid.restrict(&(leaf..d).collect::<Vec<_>>())?;
        // gamma[u][k][j] = γ_ju^k on the transversal
        let mut gamma = vec![vec![vec![vec![0.0; ty.len()]; leaf]; leaf]; s];
        for tn in 0..ty.len() {
            let mut idx = base_node.clone();
            idx[leaf..].copy_from_slice(&ty.multi_index(tn));
            let n = grid.flat_index(&idx);
            let p = grid.point(n, base);
            let tm = frame_at(&tf.fields, leaf, n);
            let tinv_t = tm
                .transpose()
                .try_inverse()
                .ok_or_else(|| Error::NotRegular { point: p.clone() })?;
            for u in 0..s {
                let (yv, dy) = eval_field(&xs[leaf + u], &p);
                for j in 0..leaf {
                    let br = bracket_with(&tf.fields[j], &dt[j], &yv, &dy, n);
                    let g = &tinv_t * DVector::from_iterator(leaf, br[..leaf].iter().copied());
                    for k in 0..leaf {
                        gamma[u][k][j][tn] = g[k];
                    }
                }
            }
        }
        let fields: Vec<Vec<Vec<GridField>>> = gamma
            .into_iter()
            .map(|gu| {
                gu.into_iter()
                    .map(|row| row.into_iter().map(|v| GridField::new(ty.clone(), v)).collect())
                    .collect::<Result<_>>()
            })
            .collect::<Result<_>>()?;
        let fields = Arc::new(fields);
        let coeffs: Vec<MatrixFn> = (0..s)
            .map(|u| {
                let f = Arc::clone(&fields);
                Arc::new(move |p: &[f64]| DMatrix::from_fn(leaf, leaf, |k, j| f[u][k][j].interpolate(p))) as MatrixFn
            })
            .collect();
        let mut xi = Vec::with_capacity(leaf);
        let mut integ: f64 = 0.0;
        for i in 0..leaf {
            let sys = FrobeniusSystem {
                size: leaf,
                params: (leaf..d).collect(),
                gamma: coeffs.clone(),
                inhom: (0..s).map(|_| zero_vector(leaf)).collect(),
                initial: DVector::from_fn(leaf, |j, _| if j == i { 1.0 } else { 0.0 }),
                base: base.to_vec(),
                step: opts.step,
            };
            let sol = solve(&sys, &ty).map_err(|e| match e {
                Error::NotIntegrable { residual, tol } => Error::Residual {
                    stage: "gamma_integrability",
                    residual,
                    tol,
                },
                e => e,
            })?;
            integ = integ.max(sol.integrability);
            path = path.max(sol.path_discrepancy);
            xi.push(sol.fields);
        }
        (xi, integ)
    } else {
        (vec![], 0.0)
    };

    let z: Vec<Vec<GridField>> = (0..leaf)
        .map(|i| {
            (0..d)
                .map(|m| {
                    let values = (0..grid.len())
                        .map(|n| {
                            if xi.is_empty() {
                                return tf.fields[i][m].values()[n];
                            }
                            let idx = grid.multi_index(n);
                            (0..leaf)
                                .map(|j| xi[i][j].at(&idx[leaf..]) * tf.fields[j][m].values()[n])
                                .sum()
                        })
                        .collect();
                    GridField::new(grid.clone(), values)
                })
                .collect::<Result<_>>()
        })
        .collect::<Result<_>>()?;
    let dz = partials(&z, d)?;

    let pi = dc.poisson();
    let a_at = |n: usize| -> Result<DMatrix<f64>> {
        let p = grid.point(n, base);
        let zm = frame_at(&z, leaf, n);
        let zinv = zm.clone().try_inverse().ok_or_else(|| Error::NotRegular { point: p.clone() })?;
        let pim = DMatrix::from_fn(leaf, leaf, |k, l| pi.entry(k, l).eval_or_nan(&p));
        Ok(zinv.transpose() * pim * zinv)
    };
    let c_at = |n: usize| -> Result<Vec<Vec<Vec<f64>>>> {
        let zm = frame_at(&z, leaf, n);
        let zinv_t = zm
            .transpose()
            .try_inverse()
            .ok_or_else(|| Error::NotRegular { point: grid.point(n, base) })?;
        let mut c = vec![vec![vec![0.0; leaf]; leaf]; leaf];
        for i in 0..leaf {
            for j in 0..leaf {
                let v = DVector::from_fn(leaf, |m, _| {
                    (0..d)
                        .map(|k| {
                            z[i][k].values()[n] * dz[j][m][k].values()[n]
                                - z[j][k].values()[n] * dz[i][m][k].values()[n]
                        })
                        .sum()
                });
                let ck = &zinv_t * v;
                for k in 0..leaf {
                    c[i][j][k] = ck[k];
                }
            }
        }
        Ok(c)
    };
    let abar = a_at(base_flat)?;
    let cbar = c_at(base_flat)?;
    let gamma_num: Vec<Vec<Vec<Scalar>>> = dc.christoffel().clone();
    let metric_d: Option<(SymMatrix, Vec<Vec<Vec<Scalar>>>)> = metric.map(|g| {
        let t = g.tangent().clone();
        let dt = t.iter().map(|r| r.iter().map(|s| (0..d).map(|k| s.diff(k)).collect()).collect()).collect();
        (t, dt)
    });

    let mut r = ResidualReport {
        commutation_x: 0.0,
        commutation_y: 0.0,
        a_constancy: 0.0,
        c_constancy: 0.0,
        c_jacobi: 0.0,
        pi_reconstruction: 0.0,
        d_reconstruction: 0.0,
        killing: metric.map(|_| 0.0),
        splitting_deviation,
        gamma_integrability,
        path_discrepancy: path,
        a_det: abar.determinant(),
    };
    for n in 0..grid.len() {
        let p = grid.point(n, base);
        for (j, xj) in xs.iter().enumerate() {
            let (xv, dx) = eval_field(xj, &p);
            for i in 0..leaf {
                let br = bracket_with(&z[i], &dz[i], &xv, &dx, n);
                let m = br.iter().fold(0.0, |a, v| fmax(a, v.abs()));
                if j < leaf {
                    r.commutation_x = fmax(r.commutation_x, m);
                } else {
                    r.commutation_y = fmax(r.commutation_y, m);
                }
            }
        }
        let an = a_at(n)?;
        r.a_constancy = fmax(r.a_constancy, (&an - &abar).amax());
        let cn = c_at(n)?;
        for i in 0..leaf {
            for j in 0..leaf {
                for k in 0..leaf {
                    r.c_constancy = fmax(r.c_constancy, (cn[i][j][k] - cbar[i][j][k]).abs());
                }
            }
        }
        let zm = frame_at(&z, leaf, n);
        let pirec = zm.transpose() * &abar * &zm;
        for k in 0..d {
            for l in 0..d {
                let rec = if k < leaf && l < leaf { pirec[(k, l)] } else { 0.0 };
                r.pi_reconstruction = fmax(r.pi_reconstruction, (rec - pi.entry(k, l).eval_or_nan(&p)).abs());
                for m in 0..d {
                    let mut gr = 0.0;
                    if k < leaf && l < leaf {
                        for i in 0..leaf {
                            for j in 0..leaf {
                                gr += abar[(i, j)] * z[i][k].values()[n] * dz[j][l][m].values()[n];
                            }
                        }
                    }
                    let g = gamma_num[k][l][m].eval_or_nan(&p);
                    r.d_reconstruction = fmax(r.d_reconstruction, (gr - g).abs());
                }
            }
        }
        if let Some((g, dg)) = &metric_d {
            for zi in 0..leaf {
                for a in 0..d {
                    for b in 0..d {
                        let mut v = 0.0;
                        for c in 0..d {
                            v += z[zi][c].values()[n] * dg[a][b][c].eval_or_nan(&p)
                                + g[c][b].eval_or_nan(&p) * dz[zi][c][a].values()[n]
                                + g[a][c].eval_or_nan(&p) * dz[zi][c][b].values()[n];
                        }
                        r.killing = r.killing.map(|k| fmax(k, v.abs()));
                    }
                }
            }
        }
    }
    for i in 0..leaf {
        for j in 0..leaf {
            for k in 0..leaf {
                for m in 0..leaf {
                    let v: f64 = (0..leaf)
                        .map(|l| {
                            cbar[i][j][l] * cbar[l][k][m]
                                + cbar[j][k][l] * cbar[l][i][m]
                                + cbar[k][i][l] * cbar[l][j][m]
                        })
                        .sum();
                    r.c_jacobi = fmax(r.c_jacobi, v.abs());
                }
            }
        }
    }
    Ok(ReconstructionResult {
        grid,
        step: opts.step,
        t: tf.fields,
        xi,
        z,
        a: (0..leaf).map(|i| (0..leaf).map(|j| abar[(i, j)]).collect()).collect(),
        c: cbar,
        residuals: r,
    })
}
