use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use super::grid::{Grid, GridField};
use crate::linalg::SymMatrix;
use crate::symexpr::Scalar;
use crate::{Error, Result};

pub type MatrixFn = Arc<dyn Fn(&[f64]) -> DMatrix<f64> + Send + Sync>;
pub type VectorFn = Arc<dyn Fn(&[f64]) -> DVector<f64> + Send + Sync>;

/// Default integration step.
pub const DEFAULT_STEP: f64 = 1e-2;
/// Default bound on the integrability residual before solving.
pub const DEFAULT_TOL_INT: f64 = 1e-6;
const FD_EPS: f64 = 1e-5;
const MIN_STEP: f64 = 1e-12;

/// `∂B/∂x_{p_i} = Γ_i(x) B + Y_i(x)` for `i` over the parameter coordinates.
#[derive(Clone)]
pub struct FrobeniusSystem {
    pub size: usize,
    /// Chart coordinates driving the integration.
    pub params: Vec<usize>,
    pub gamma: Vec<MatrixFn>,
    pub inhom: Vec<VectorFn>,
    pub initial: DVector<f64>,
    /// Full chart point; coordinates outside `params` stay frozen here.
    pub base: Vec<f64>,
    pub step: f64,
}

impl fmt::Debug for FrobeniusSystem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FrobeniusSystem")
            .field("size", &self.size)
            .field("params", &self.params)
            .field("initial", &self.initial)
            .field("base", &self.base)
            .field("step", &self.step)
            .finish_non_exhaustive()
    }
}

pub fn symbolic_matrix(m: SymMatrix) -> MatrixFn {
    Arc::new(move |p| {
        let rows = m.len();
        let cols = m.first().map_or(0, |r| r.len());
        DMatrix::from_fn(rows, cols, |i, j| m[i][j].eval_or_nan(p))
    })
}

pub fn symbolic_vector(v: Vec<Scalar>) -> VectorFn {
    Arc::new(move |p| DVector::from_iterator(v.len(), v.iter().map(|s| s.eval_or_nan(p))))
}

pub fn zero_vector(n: usize) -> VectorFn {
    Arc::new(move |_| DVector::zeros(n))
}

/// Solution of a [`FrobeniusSystem`] on a grid over its parameters.
#[derive(Clone, Debug)]
pub struct Solution {
    pub fields: Vec<GridField>,
    pub integrability: f64,
    /// Max-norm gap between the forward and reversed axis orders.
    pub path_discrepancy: f64,
    pub step: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SolveMeta {
    pub nodes: Vec<usize>,
    pub step: f64,
    pub integrability: f64,
    pub path_discrepancy: f64,
}

impl Solution {
    pub fn meta(&self) -> SolveMeta {
        SolveMeta {
            nodes: self.fields.first().map_or(vec![], |f| f.grid().nodes().to_vec()),
            step: self.step,
            integrability: self.integrability,
            path_discrepancy: self.path_discrepancy,
        }
    }
}

impl FrobeniusSystem {
    fn check(&self) -> Result<()> {
        if self.gamma.len() != self.params.len() || self.inhom.len() != self.params.len() {
            return Err(Error::Grid("one coefficient pair per parameter is required".into()));
        }
        if self.initial.len() != self.size {
            return Err(Error::Grid("initial vector has the wrong length".into()));
        }
        Ok(())
    }

    fn grid_matches(&self, grid: &Grid) -> Result<()> {
        if grid.axes() != self.params.as_slice() {
            return Err(Error::Grid("grid axes differ from the system parameters".into()));
        }
        Ok(())
    }

    fn shifted(&self, p: &[f64], coord: usize, h: f64) -> Vec<f64> {
        let mut q = p.to_vec();
        q[coord] += h;
        q
    }

    /// Integrability defect at one point.
    pub fn residual_at(&self, p: &[f64]) -> f64 {
        let mut worst: f64 = 0.0;
        let k = self.params.len();
        for i in 0..k {
            for j in i + 1..k {
                let (ci, cj) = (self.params[i], self.params[j]);
                let d = |f: &dyn Fn(&[f64]) -> DMatrix<f64>, c: usize| {
                    (f(&self.shifted(p, c, FD_EPS)) - f(&self.shifted(p, c, -FD_EPS))) / (2.0 * FD_EPS)
                };
                let dv = |f: &dyn Fn(&[f64]) -> DVector<f64>, c: usize| {
                    (f(&self.shifted(p, c, FD_EPS)) - f(&self.shifted(p, c, -FD_EPS))) / (2.0 * FD_EPS)
                };
                let gi = (self.gamma[i])(p);
                let gj = (self.gamma[j])(p);
                let yi = (self.inhom[i])(p);
                let yj = (self.inhom[j])(p);
                let m = &gi * &gj + d(&*self.gamma[i], cj) - &gj * &gi - d(&*self.gamma[j], ci);
                let v = &gi * &yj + dv(&*self.inhom[i], cj) - &gj * &yi - dv(&*self.inhom[j], ci);
                worst = worst.max(m.amax()).max(v.amax());
            }
        }
        worst
    }
}

/// Max over grid nodes and parameter pairs of the integrability defect,
/// derivatives by centred differences.
pub fn integrability_residual(sys: &FrobeniusSystem, grid: &Grid) -> Result<f64> {
    sys.check()?;
    sys.grid_matches(grid)?;
    Ok((0..grid.len()).fold(0.0, |acc, n| acc.max(sys.residual_at(&grid.point(n, &sys.base)))))
}

pub fn solve(sys: &FrobeniusSystem, grid: &Grid) -> Result<Solution> {
    solve_with(sys, grid, DEFAULT_TOL_INT)
}

/// Fourth-order single-step sweeps along axis 1, then 2, …, audited by the
/// reversed order.
pub fn solve_with(sys: &FrobeniusSystem, grid: &Grid, tol_int: f64) -> Result<Solution> {
    let integrability = integrability_residual(sys, grid)?;
    if !(integrability <= tol_int) {
        return Err(Error::NotIntegrable {
            residual: integrability,
            tol: tol_int,
        });
    }
    if !(sys.step >= MIN_STEP) || !sys.step.is_finite() {
        return Err(Error::StepUnderflow { step: sys.step });
    }
    let start = grid.node_of(&sys.base)?;
    let order: Vec<usize> = (0..grid.dim()).collect();
    let forward = sweep(sys, grid, &start, &order);
    let reversed: Vec<usize> = order.iter().rev().copied().collect();
    let backward = sweep(sys, grid, &start, &reversed);
    let path_discrepancy = forward
        .iter()
        .zip(&backward)
        .fold(0.0f64, |acc, (a, b)| acc.max((a - b).amax()));
    let fields = (0..sys.size)
        .map(|c| GridField::new(grid.clone(), forward.iter().map(|v| v[c]).collect()))
        .collect::<Result<_>>()?;
    Ok(Solution {
        fields,
        integrability,
        path_discrepancy,
        step: sys.step,
    })
}

fn rk4_segment(sys: &FrobeniusSystem, k: usize, p: &mut [f64], b: &DVector<f64>, length: f64) -> DVector<f64> {
    let coord = sys.params[k];
    let n = (length.abs() / sys.step - 1e-9).ceil().max(1.0) as usize;
    let h = length / n as f64;
    let rhs = |p: &[f64], b: &DVector<f64>| (sys.gamma[k])(p) * b + (sys.inhom[k])(p);
    let mut b = b.clone();
    for _ in 0..n {
        let x0 = p[coord];
        let k1 = rhs(p, &b);
        p[coord] = x0 + h / 2.0;
        let k2 = rhs(p, &(&b + &k1 * (h / 2.0)));
        let k3 = rhs(p, &(&b + &k2 * (h / 2.0)));
        p[coord] = x0 + h;
        let k4 = rhs(p, &(&b + &k3 * h));
        b += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
    }
    b
}

fn sweep(sys: &FrobeniusSystem, grid: &Grid, start: &[usize], order: &[usize]) -> Vec<DVector<f64>> {
    let mut values: Vec<Option<DVector<f64>>> = vec![None; grid.len()];
    values[grid.flat_index(start)] = Some(sys.initial.clone());
    for &k in order {
        let known: Vec<usize> = (0..grid.len()).filter(|&n| values[n].is_some()).collect();
        for n in known {
            let idx = grid.multi_index(n);
            for dir in [1isize, -1] {
                let mut cur = idx.clone();
                let mut b = values[n].clone().expect("known node");
                loop {
                    let next = cur[k] as isize + dir;
                    if next < 0 || next as usize >= grid.nodes()[k] {
                        break;
                    }
                    let mut p = sys.base.clone();
                    grid.place(&cur, &mut p);
                    let from = grid.coord(k, cur[k]);
                    cur[k] = next as usize;
                    let to = grid.coord(k, cur[k]);
                    b = rk4_segment(sys, k, &mut p, &b, to - from);
                    values[grid.flat_index(&cur)] = Some(b.clone());
                }
            }
        }
    }
    values.into_iter().map(|v| v.expect("sweeps cover the grid")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar_system(gamma: f64, step: f64) -> FrobeniusSystem {
        FrobeniusSystem {
            size: 1,
            params: vec![0],
            gamma: vec![Arc::new(move |_| DMatrix::from_element(1, 1, gamma))],
            inhom: vec![zero_vector(1)],
            initial: DVector::from_element(1, 1.0),
            base: vec![0.0],
            step,
        }
    }

    #[test]
    fn exponential() {
        let g = Grid::new(vec![0], &[(0.0, 1.0)], vec![101]).unwrap();
        let s = solve(&scalar_system(1.0, 0.01), &g).unwrap();
        assert!((s.fields[0].at(&[100]) - 1f64.exp()).abs() < 1e-8);
        let c = solve(&scalar_system(0.0, 0.01), &g).unwrap();
        assert!(c.fields[0].values().iter().all(|v| *v == 1.0));
    }

    #[test]
    fn fourth_order() {
        let g = Grid::new(vec![0], &[(0.0, 1.0)], vec![11]).unwrap();
        let err = |h| (solve(&scalar_system(1.0, h), &g).unwrap().fields[0].at(&[10]) - 1f64.exp()).abs();
        let ratio = err(0.1) / err(0.05);
        assert!(ratio >= 12.0, "{ratio}");
    }

    #[test]
    fn non_integrable_fixture() {
        let n = Arc::new(|p: &[f64]| DMatrix::from_row_slice(2, 2, &[0.0, p[1], 0.0, 0.0])) as MatrixFn;
        let sys = FrobeniusSystem {
            size: 2,
            params: vec![0, 1],
            gamma: vec![n, Arc::new(|_| DMatrix::zeros(2, 2))],
            inhom: vec![zero_vector(2), zero_vector(2)],
            initial: DVector::from_element(2, 1.0),
            base: vec![0.0, 0.0],
            step: 0.01,
        };
        let g = Grid::around(&[0.0, 0.0], &[0, 1], 0.5, 5).unwrap();
        assert!((integrability_residual(&sys, &g).unwrap() - 1.0).abs() < 1e-8);
        assert!(matches!(solve(&sys, &g), Err(Error::NotIntegrable { .. })));
    }

    #[test]
    fn step_underflow() {
        let g = Grid::new(vec![0], &[(0.0, 1.0)], vec![3]).unwrap();
        assert!(matches!(solve(&scalar_system(1.0, 0.0), &g), Err(Error::StepUnderflow { .. })));
    }
}
