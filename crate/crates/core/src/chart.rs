//! Chart description files.
//!
//! Indices in chart files are 1-based. `metric` lists the tangent metric
//! `g_ij`; `christoffel` lists `Γ_ij^k` with `D_{dx_i} dx_j = Σ_k Γ_ij^k dx_k`.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::connection::{build_dr, levi_civita_contravariant, ContravariantConnection, Metric, Table3};
use crate::forms::VectorField;
use crate::linalg::SymMatrix;
use crate::poisson::{ActionConvention, LieAlgebraAction, PoissonStructure};
use crate::symexpr::{parse, DomainBox, Rat, Scalar};
use crate::{Error, Result};

/// Rational given as a JSON integer or a `"p/q"` string.
#[derive(Clone, Debug, PartialEq, Deserialize, Serialize)]
#[serde(untagged)]
pub enum RatValue {
    Int(i64),
    Text(String),
}

impl RatValue {
    pub fn to_rat(&self) -> Result<Rat> {
        match self {
            RatValue::Int(n) => Ok(Rat::from_integer((*n).into())),
            RatValue::Text(s) => s
                .trim()
                .parse::<Rat>()
                .map_err(|_| Error::InvalidChart(format!("`{s}` is not a rational number"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct ActionSpec {
    pub dim: usize,
    pub structure_constants: Vec<(usize, usize, usize, RatValue)>,
    pub fundamental_fields: Vec<Vec<String>>,
    pub r: Vec<(usize, usize, RatValue)>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub convention: Option<ActionConvention>,
}

#[derive(Clone, Debug, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct ChartFile {
    pub name: String,
    pub coordinates: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub leaf_count: Option<usize>,
    pub base_point: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub domain_box: Option<Vec<(f64, f64)>>,
    pub poisson: Vec<(usize, usize, String)>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub metric: Option<Vec<(usize, usize, String)>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub christoffel: Option<Vec<(usize, usize, usize, String)>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub action: Option<ActionSpec>,
    #[serde(default)]
    pub declared_flat: bool,
}

const BUNDLED: &[(&str, &str)] = &[
    ("symp2_const", include_str!("../charts/symp2_const.json")),
    ("symp2_quad", include_str!("../charts/symp2_quad.json")),
    ("symp2_cubic", include_str!("../charts/symp2_cubic.json")),
    ("reg3_product", include_str!("../charts/reg3_product.json")),
    ("reg3_riemannian", include_str!("../charts/reg3_riemannian.json")),
    ("aff1_liepoisson", include_str!("../charts/aff1_liepoisson.json")),
    ("aff1_group", include_str!("../charts/aff1_group.json")),
    ("broken_antisymmetry", include_str!("../charts/broken_antisymmetry.json")),
    ("broken_jacobi", include_str!("../charts/broken_jacobi.json")),
];

/// Names of the charts shipped with the crate.
pub fn bundled_names() -> Vec<&'static str> {
    BUNDLED.iter().map(|(n, _)| *n).collect()
}

pub fn bundled(name: &str) -> Option<ChartFile> {
    BUNDLED
        .iter()
        .find(|(n, _)| *n == name)
        .map(|(_, s)| ChartFile::from_json(s).expect("bundled charts parse"))
}

impl ChartFile {
    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| Error::InvalidChart(e.to_string()))
    }

    /// Reads a chart file, falling back to a bundled chart of that name.
    pub fn load(path: &Path) -> Result<Self> {
        match std::fs::read_to_string(path) {
            Ok(s) => ChartFile::from_json(&s),
            Err(e) => path
                .to_str()
                .and_then(bundled)
                .ok_or_else(|| Error::InvalidChart(format!("{}: {e}", path.display()))),
        }
    }

    pub fn dim(&self) -> usize {
        self.coordinates.len()
    }

    fn index(&self, i: usize, what: &str) -> Result<usize> {
        if i == 0 || i > self.dim() {
            return Err(Error::InvalidChart(format!("{what} index {i} is out of range 1..={}", self.dim())));
        }
        Ok(i - 1)
    }

    fn expr(&self, s: &str) -> Result<Scalar> {
        Ok(parse(s, &self.coordinates)?.to_scalar())
    }

    /// Poisson matrix as written; entries with `i > j` override the
    /// antisymmetric completion, so inconsistent files stay detectable.
    pub fn poisson_matrix(&self) -> Result<SymMatrix> {
        let d = self.dim();
        let mut m = vec![vec![Scalar::zero(); d]; d];
        let mut explicit = vec![vec![false; d]; d];
        for (i, j, e) in &self.poisson {
            let (i, j) = (self.index(*i, "poisson")?, self.index(*j, "poisson")?);
            let v = self.expr(e)?;
            m[i][j] = v.clone();
            explicit[i][j] = true;
            if !explicit[j][i] {
                m[j][i] = -v;
            }
        }
        Ok(m)
    }

    pub fn metric_matrix(&self) -> Result<Option<SymMatrix>> {
        let Some(entries) = &self.metric else { return Ok(None) };
        let d = self.dim();
        let mut m = vec![vec![Scalar::zero(); d]; d];
        for (i, j, e) in entries {
            let (i, j) = (self.index(*i, "metric")?, self.index(*j, "metric")?);
            let v = self.expr(e)?;
            m[i][j] = v.clone();
            m[j][i] = v;
        }
        Ok(Some(m))
    }
}

/// Where the connection of a chart came from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ConnectionSource {
    Christoffel,
    Metric,
    Action,
}

/// A parsed and checked chart.
#[derive(Clone, Debug)]
pub struct Chart {
    pub file: ChartFile,
    pub names: Vec<String>,
    pub base: Vec<f64>,
    pub domain: DomainBox,
    pub pi: PoissonStructure,
    pub metric: Option<Metric>,
    pub christoffel: Option<Table3>,
    pub action: Option<LieAlgebraAction>,
}

impl Chart {
    pub fn new(file: ChartFile) -> Result<Self> {
        let d = file.dim();
        if d == 0 {
            return Err(Error::InvalidChart("no coordinates".into()));
        }
        if file.base_point.len() != d {
            return Err(Error::InvalidChart(format!("base point has {} entries for {d} coordinates", file.base_point.len())));
        }
        for (k, n) in file.coordinates.iter().enumerate() {
            if file.coordinates[..k].contains(n) {
                return Err(Error::InvalidChart(format!("coordinate `{n}` is repeated")));
            }
        }
        if let Some(l) = file.leaf_count {
            if l > d || l % 2 != 0 {
                return Err(Error::InvalidChart(format!("leaf_count {l} must be even and at most {d}")));
            }
        }
        let domain = match &file.domain_box {
            Some(b) if b.len() != d => {
                return Err(Error::InvalidChart(format!("domain box has {} intervals for {d} coordinates", b.len())))
            }
            Some(b) => DomainBox::new(b),
            None => DomainBox::around(&file.base_point),
        };
        if !domain.contains(&file.base_point) {
            return Err(Error::InvalidChart("base point lies outside the domain box".into()));
        }
        let pi = PoissonStructure::from_matrix(file.poisson_matrix()?)?;
        let metric = file
            .metric_matrix()?
            .map(|g| Metric::new(g, &file.base_point, false))
            .transpose()?;
        let christoffel = match &file.christoffel {
            None => None,
            Some(entries) => {
                let mut g = vec![vec![vec![Scalar::zero(); d]; d]; d];
                for (i, j, k, e) in entries {
                    let (i, j, k) = (
                        file.index(*i, "christoffel")?,
                        file.index(*j, "christoffel")?,
                        file.index(*k, "christoffel")?,
                    );
                    g[i][j][k] = file.expr(e)?;
                }
                Some(g)
            }
        };
        let action = file.action.as_ref().map(|a| build_action(&file, a)).transpose()?;
        Ok(Chart {
            names: file.coordinates.clone(),
            base: file.base_point.clone(),
            domain,
            pi,
            metric,
            christoffel,
            action,
            file,
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        Chart::new(ChartFile::load(path)?)
    }

    pub fn name(&self) -> &str {
        &self.file.name
    }

    pub fn dim(&self) -> usize {
        self.file.dim()
    }

    /// Leaf dimension, defaulting to the rank of `π` at the base point.
    pub fn leaf(&self) -> Result<usize> {
        match self.file.leaf_count {
            Some(l) => Ok(l),
            None => Ok(self.pi.rank_at(&self.base, 1e-9)?.rank),
        }
    }

    /// Connection by priority: Christoffel table, then the metric, then the action.
    pub fn connection(&self) -> Result<(ContravariantConnection, ConnectionSource)> {
        if let Some(g) = &self.christoffel {
            return Ok((ContravariantConnection::new(self.pi.clone(), g.clone())?, ConnectionSource::Christoffel));
        }
        if let Some(g) = &self.metric {
            return Ok((levi_civita_contravariant(&self.pi, g)?, ConnectionSource::Metric));
        }
        if let Some(a) = &self.action {
            return Ok((build_dr(a, &self.pi)?, ConnectionSource::Action));
        }
        Err(Error::InvalidChart("no christoffel, metric or action to build a connection from".into()))
    }
}

fn build_action(file: &ChartFile, a: &ActionSpec) -> Result<LieAlgebraAction> {
    let n = a.dim;
    let d = file.dim();
    let zero = Rat::from_integer(0.into());
    let idx = |i: usize| {
        if i == 0 || i > n {
            Err(Error::InvalidChart(format!("algebra index {i} is out of range 1..={n}")))
        } else {
            Ok(i - 1)
        }
    };
    let mut c = vec![vec![vec![zero.clone(); n]; n]; n];
    for (i, j, k, v) in &a.structure_constants {
        let (i, j, k) = (idx(*i)?, idx(*j)?, idx(*k)?);
        let v = v.to_rat()?;
        c[j][i][k] = -v.clone();
        c[i][j][k] = v;
    }
    let mut r = vec![vec![zero; n]; n];
    for (i, j, v) in &a.r {
        let (i, j) = (idx(*i)?, idx(*j)?);
        let v = v.to_rat()?;
        r[j][i] = -v.clone();
        r[i][j] = v;
    }
    if a.fundamental_fields.len() != n {
        return Err(Error::InvalidChart(format!("{} fundamental fields for a {n}-dimensional algebra", a.fundamental_fields.len())));
    }
    let fields = a
        .fundamental_fields
        .iter()
        .map(|f| {
            if f.len() != d {
                return Err(Error::InvalidChart(format!("fundamental field needs {d} components")));
            }
            let comps = f.iter().map(|e| file.expr(e)).collect::<Result<Vec<_>>>()?;
            Ok(VectorField::from_components(&comps))
        })
        .collect::<Result<Vec<_>>>()?;
    LieAlgebraAction::new(c, fields, r, a.convention.unwrap_or_default())
}
