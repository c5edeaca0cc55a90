use serde::Serialize;

use crate::{Error, Result};

/// Nodes per axis used by the default grid.
pub const DEFAULT_NODES: usize = 33;
/// Half-width of the default grid around the base point.
pub const DEFAULT_HALF_WIDTH: f64 = 0.5;

const STENCIL: usize = 7;
const INTERP: usize = 4;

/// Regular grid over a subset of the chart coordinates.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Grid {
    axes: Vec<usize>,
    lo: Vec<f64>,
    hi: Vec<f64>,
    nodes: Vec<usize>,
}

/// Finite-difference weights for derivatives `0..=m` at `z` from nodes `x`
/// (Fornberg's recursion); `w[k][j]` is the weight of node `j` for order `k`.
pub fn fd_weights(z: f64, x: &[f64], m: usize) -> Vec<Vec<f64>> {
    let n = x.len();
    let mut c = vec![vec![0.0; n]; m + 1];
    let mut c1 = 1.0;
    let mut c4 = x[0] - z;
    c[0][0] = 1.0;
    for i in 1..n {
        let mn = i.min(m);
        let mut c2 = 1.0;
        let c5 = c4;
        c4 = x[i] - z;
        for j in 0..i {
            let c3 = x[i] - x[j];
            c2 *= c3;
            if j == i - 1 {
                for k in (1..=mn).rev() {
                    c[k][i] = c1 * (k as f64 * c[k - 1][i - 1] - c5 * c[k][i - 1]) / c2;
                }
                c[0][i] = -c1 * c5 * c[0][i - 1] / c2;
            }
            for k in (1..=mn).rev() {
                c[k][j] = (c4 * c[k][j] - k as f64 * c[k - 1][j]) / c3;
            }
            c[0][j] = c4 * c[0][j] / c3;
        }
        c1 = c2;
    }
    c
}

fn window(n: usize, width: usize, centre: usize) -> usize {
    let width = width.min(n);
    centre.saturating_sub(width / 2).min(n - width)
}

impl Grid {
    pub fn new(axes: Vec<usize>, bounds: &[(f64, f64)], nodes: Vec<usize>) -> Result<Self> {
        if axes.len() != bounds.len() || axes.len() != nodes.len() {
            return Err(Error::Grid("axes, bounds and node counts differ in length".into()));
        }
        for (k, (&(lo, hi), &n)) in bounds.iter().zip(&nodes).enumerate() {
            if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
                return Err(Error::Grid(format!("empty or invalid interval on axis {k}")));
            }
            if n < 2 {
                return Err(Error::Grid(format!("axis {k} needs at least 2 nodes")));
            }
        }
        Ok(Grid {
            axes,
            lo: bounds.iter().map(|b| b.0).collect(),
            hi: bounds.iter().map(|b| b.1).collect(),
            nodes,
        })
    }

    /// `n` nodes per axis on `[b − w, b + w]`; `n` must be odd so that the
    /// base point is a node.
    pub fn around(base: &[f64], axes: &[usize], half_width: f64, n: usize) -> Result<Self> {
        if n % 2 == 0 {
            return Err(Error::Grid(format!("node count {n} must be odd to centre the base point")));
        }
        let bounds: Vec<_> = axes.iter().map(|&a| (base[a] - half_width, base[a] + half_width)).collect();
        Grid::new(axes.to_vec(), &bounds, vec![n; axes.len()])
    }

    /// The same nodes restricted to a subset of this grid's axes.
    pub fn restrict(&self, axes: &[usize]) -> Result<Self> {
        let pos: Vec<usize> = axes
            .iter()
            .map(|a| {
                self.axes
                    .iter()
                    .position(|b| b == a)
                    .ok_or_else(|| Error::Grid(format!("axis {a} is not on the grid")))
            })
            .collect::<Result<_>>()?;
        Ok(Grid {
            axes: axes.to_vec(),
            lo: pos.iter().map(|&p| self.lo[p]).collect(),
            hi: pos.iter().map(|&p| self.hi[p]).collect(),
            nodes: pos.iter().map(|&p| self.nodes[p]).collect(),
        })
    }

    pub fn dim(&self) -> usize {
        self.axes.len()
    }

    pub fn axes(&self) -> &[usize] {
        &self.axes
    }

    pub fn nodes(&self) -> &[usize] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn spacing(&self, k: usize) -> f64 {
        (self.hi[k] - self.lo[k]) / (self.nodes[k] - 1) as f64
    }

    pub fn coord(&self, k: usize, i: usize) -> f64 {
        self.lo[k] + i as f64 * self.spacing(k)
    }

    /// Diameter of the box.
    pub fn diameter(&self) -> f64 {
        self.lo.iter().zip(&self.hi).map(|(l, h)| (h - l).powi(2)).sum::<f64>().sqrt()
    }

    pub fn multi_index(&self, mut flat: usize) -> Vec<usize> {
        let mut idx = vec![0; self.dim()];
        for k in (0..self.dim()).rev() {
            idx[k] = flat % self.nodes[k];
            flat /= self.nodes[k];
        }
        idx
    }

    pub fn flat_index(&self, idx: &[usize]) -> usize {
        idx.iter().zip(&self.nodes).fold(0, |acc, (&i, &n)| acc * n + i)
    }

    /// Writes the node's coordinates into a full chart point.
    pub fn place(&self, idx: &[usize], point: &mut [f64]) {
        for (k, &i) in idx.iter().enumerate() {
            point[self.axes[k]] = self.coord(k, i);
        }
    }

    /// Full chart point of node `flat`, other coordinates taken from `base`.
    pub fn point(&self, flat: usize, base: &[f64]) -> Vec<f64> {
        let mut p = base.to_vec();
        self.place(&self.multi_index(flat), &mut p);
        p
    }

    /// Node index whose coordinates match `point` on every grid axis.
    pub fn node_of(&self, point: &[f64]) -> Result<Vec<usize>> {
        (0..self.dim())
            .map(|k| {
                let x = point[self.axes[k]];
                let t = (x - self.lo[k]) / self.spacing(k);
                let i = t.round();
                if i < 0.0 || i as usize >= self.nodes[k] || (t - i).abs() > 1e-9 {
                    Err(Error::Grid(format!("coordinate {x} is not a node of axis {}", self.axes[k])))
                } else {
                    Ok(i as usize)
                }
            })
            .collect()
    }
}

/// Real values at every node of a [`Grid`].
#[derive(Clone, Debug, PartialEq)]
pub struct GridField {
    grid: Grid,
    values: Vec<f64>,
}

impl GridField {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::Grid(format!("{} values for {} nodes", values.len(), grid.len())));
        }
        Ok(GridField { grid, values })
    }

    pub fn from_fn(grid: &Grid, base: &[f64], f: impl Fn(&[f64]) -> f64) -> Self {
        let values = (0..grid.len()).map(|n| f(&grid.point(n, base))).collect();
        GridField {
            grid: grid.clone(),
            values,
        }
    }

    pub fn constant(grid: &Grid, c: f64) -> Self {
        GridField {
            grid: grid.clone(),
            values: vec![c; grid.len()],
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn at(&self, idx: &[usize]) -> f64 {
        self.values[self.grid.flat_index(idx)]
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |a, v| a.max(v.abs()))
    }

    /// Largest deviation from the value at node `idx`.
    pub fn spread_from(&self, idx: &[usize]) -> f64 {
        let c = self.at(idx);
        self.values.iter().fold(0.0, |a, v| a.max((v - c).abs()))
    }

    /// Piecewise cubic interpolation at a full chart point.
    pub fn interpolate(&self, point: &[f64]) -> f64 {
        let g = &self.grid;
        let mut axes = Vec::with_capacity(g.dim());
        for k in 0..g.dim() {
            let n = g.nodes[k];
            let x = point[g.axes[k]];
            let t = ((x - g.lo[k]) / g.spacing(k)).floor().clamp(0.0, (n - 1) as f64) as usize;
            let start = t.saturating_sub(1).min(n - INTERP.min(n));
            let xs: Vec<f64> = (start..start + INTERP.min(n)).map(|i| g.coord(k, i)).collect();
            let w = fd_weights(x, &xs, 0).swap_remove(0);
            axes.push((start, w));
        }
        let mut total = 0.0;
        let mut idx = vec![0; g.dim()];
        let counts: Vec<usize> = axes.iter().map(|(_, w)| w.len()).collect();
        let combos: usize = counts.iter().product();
        for c in 0..combos {
            let mut rem = c;
            let mut weight = 1.0;
            for k in 0..g.dim() {
                let j = rem % counts[k];
                rem /= counts[k];
                idx[k] = axes[k].0 + j;
                weight *= axes[k].1[j];
            }
            total += weight * self.at(&idx);
        }
        total
    }

    /// Derivative of the given order along grid axis `k` at every node, from
    /// 7-node stencils (shifted near the boundary).
    pub fn derivative(&self, k: usize, order: usize) -> Result<GridField> {
        if order > 3 {
            return Err(Error::Grid(format!("derivative order {order} exceeds 3")));
        }
        let g = &self.grid;
        if k >= g.dim() {
            return Err(Error::Grid(format!("axis {k} is not on the grid")));
        }
        if order == 0 {
            return Ok(self.clone());
        }
        let n = g.nodes[k];
        if n <= order {
            return Err(Error::Grid(format!("axis {k} has too few nodes for order {order}")));
        }
        let stencils: Vec<(usize, Vec<f64>)> = (0..n)
            .map(|i| {
                let start = window(n, STENCIL, i);
                let xs: Vec<f64> = (start..start + STENCIL.min(n)).map(|j| g.coord(k, j)).collect();
                (start, fd_weights(g.coord(k, i), &xs, order).swap_remove(order))
            })
            .collect();
        let mut out = vec![0.0; self.values.len()];
        for (flat, o) in out.iter_mut().enumerate() {
            let mut idx = g.multi_index(flat);
            let (start, w) = &stencils[idx[k]];
            let mut s = 0.0;
            for (j, wj) in w.iter().enumerate() {
                idx[k] = start + j;
                s += wj * self.at(&idx);
            }
            *o = s;
        }
        Ok(GridField {
            grid: g.clone(),
            values: out,
        })
    }

    /// Derivative along a chart coordinate; zero when the grid does not span it.
    pub fn partial(&self, coord: usize) -> Result<GridField> {
        match self.grid.axes.iter().position(|&a| a == coord) {
            Some(k) => self.derivative(k, 1),
            None => Ok(GridField::constant(&self.grid, 0.0)),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weights_reproduce_polynomials() {
        let xs = [0.0, 0.1, 0.2, 0.3];
        let w = fd_weights(0.15, &xs, 2);
        let f = |x: f64| 1.0 + 2.0 * x - x * x + 4.0 * x * x * x;
        let val: f64 = xs.iter().zip(&w[0]).map(|(x, c)| c * f(*x)).sum();
        let d1: f64 = xs.iter().zip(&w[1]).map(|(x, c)| c * f(*x)).sum();
        assert!((val - f(0.15)).abs() < 1e-12);
        assert!((d1 - (2.0 - 0.3 + 12.0 * 0.0225)).abs() < 1e-10);
    }

    #[test]
    fn derivatives_and_interpolation() {
        let g = Grid::around(&[0.0, 0.0], &[0, 1], 0.5, 33).unwrap();
        let f = GridField::from_fn(&g, &[0.0, 0.0], |p| (p[0]).sin() * (2.0 * p[1]).exp());
        let dx = f.derivative(0, 1).unwrap();
        let dyyy = f.derivative(1, 3).unwrap();
        let mut err: f64 = 0.0;
        let mut err3: f64 = 0.0;
        for n in 0..g.len() {
            let p = g.point(n, &[0.0, 0.0]);
            err = err.max((dx.values[n] - p[0].cos() * (2.0 * p[1]).exp()).abs());
            err3 = err3.max((dyyy.values[n] - 8.0 * p[0].sin() * (2.0 * p[1]).exp()).abs());
        }
        assert!(err < 1e-7, "{err}");
        assert!(err3 < 1e-2, "{err3}");
        let p = [0.1234, -0.321];
        assert!((f.interpolate(&p) - p[0].sin() * (2.0 * p[1]).exp()).abs() < 1e-5);
        assert!(matches!(f.derivative(0, 4), Err(Error::Grid(_))));
    }

    #[test]
    fn base_must_be_a_node() {
        assert!(Grid::around(&[0.0], &[0], 0.5, 32).is_err());
        let g = Grid::around(&[0.3], &[0], 0.5, 33).unwrap();
        assert_eq!(g.node_of(&[0.3]).unwrap(), vec![16]);
    }
}
