//! The Hawkins bracket of a torsion-free contravariant connection, the
//! metacurvature `M`, the tensor `T`, and the conditions H1-H3.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::connection::{ContravariantConnection, Metric};
use crate::forms::{interior_product, koszul_bracket_with_form, DiffForm, OneForm};
use crate::frobenius::{riemannian_a, FlatFrame};
use crate::linalg;
use crate::poisson::PoissonStructure;
use crate::symexpr::{all_zero, int, DomainBox, Func, Rat, Scalar, ZeroMethod, ZeroTest};
use crate::{Error, Result};

/// Hawkins bracket of a torsion-free connection.
#[derive(Clone, Debug)]
pub struct Hawkins {
    dc: ContravariantConnection,
}

fn sign(n: usize) -> i32 {
    if n % 2 == 0 {
        1
    } else {
        -1
    }
}

fn signed(w: DiffForm, s: i32) -> DiffForm {
    if s < 0 {
        -w
    } else {
        w
    }
}

impl Hawkins {
    pub fn new(dc: ContravariantConnection) -> Result<Self> {
        dc.require_torsion_free()?;
        Ok(Hawkins { dc })
    }

    pub fn connection(&self) -> &ContravariantConnection {
        &self.dc
    }

    fn dim(&self) -> usize {
        self.dc.dim()
    }

    /// `{α, β} = −D_α dβ − D_β dα + d D_β α + [α, dβ]_π`
    pub fn one_forms(&self, a: &OneForm, b: &OneForm) -> Result<DiffForm> {
        let dc = &self.dc;
        let t1 = dc.apply_form(a, &b.exterior_d())?;
        let t2 = dc.apply_form(b, &a.exterior_d())?;
        let t3 = dc.apply(b, a)?.exterior_d();
        let t4 = koszul_bracket_with_form(dc.poisson(), a, &b.exterior_d())?;
        Ok(&(&(&t3 - &t1) - &t2) + &t4)
    }

    /// Bilinear extension over homogeneous decomposable terms.
    pub fn bracket(&self, s: &DiffForm, t: &DiffForm) -> Result<DiffForm> {
        s.same_chart(self.dim())?;
        t.same_chart(self.dim())?;
        let d = self.dim();
        let mut out = DiffForm::zero(d);
        for (i, c) in s.terms() {
            for (j, e) in t.terms() {
                out = &out + &self.bracket_terms(i, c, j, e)?;
            }
        }
        Ok(out)
    }

    fn bracket_terms(&self, i: &[usize], c: &Scalar, j: &[usize], e: &Scalar) -> Result<DiffForm> {
        let d = self.dim();
        let (k, l) = (i.len(), j.len());
        match (k, l) {
            (0, 0) => Ok(DiffForm::scalar(d, self.dc.poisson().bracket(c, e))),
            (0, _) => self
                .dc
                .apply_form(&DiffForm::df(d, c), &DiffForm::basis(d, j, e.clone())),
            (_, 0) => Ok(-self
                .dc
                .apply_form(&DiffForm::df(d, e), &DiffForm::basis(d, i, c.clone()))?),
            _ => {
                let alphas: Vec<OneForm> = i
                    .iter()
                    .enumerate()
                    .map(|(n, &a)| DiffForm::basis(d, &[a], if n == 0 { c.clone() } else { Scalar::one() }))
                    .collect();
                let betas: Vec<OneForm> = j
                    .iter()
                    .enumerate()
                    .map(|(n, &b)| DiffForm::basis(d, &[b], if n == 0 { e.clone() } else { Scalar::one() }))
                    .collect();
                let mut out = DiffForm::zero(d);
                for (p, ap) in alphas.iter().enumerate() {
                    for (q, bq) in betas.iter().enumerate() {
                        let mut term = self.one_forms(ap, bq)?;
                        for (n, a) in alphas.iter().enumerate() {
                            if n != p {
                                term = term.wedge_unchecked(a);
                            }
                        }
                        for (n, b) in betas.iter().enumerate() {
                            if n != q {
                                term = term.wedge_unchecked(b);
                            }
                        }
                        out = &out + &signed(term, sign(p + q));
                    }
                }
                Ok(signed(out, sign(k + 1)))
            }
        }
    }

    /// `{σ,{τ,ρ}} − {{σ,τ},ρ} − (−1)^{|σ||τ|} {τ,{σ,ρ}}` for homogeneous σ, τ.
    pub fn graded_jacobi(&self, s: &DiffForm, t: &DiffForm, r: &DiffForm) -> Result<DiffForm> {
        let ds = s.degree().unwrap_or(0);
        let dt = t.degree().unwrap_or(0);
        let a = self.bracket(s, &self.bracket(t, r)?)?;
        let b = self.bracket(&self.bracket(s, t)?, r)?;
        let c = self.bracket(t, &self.bracket(s, r)?)?;
        Ok(&(&a - &b) - &signed(c, sign(ds * dt)))
    }
}

/// `M(df, α, β) = {f,{α,β}} − {{f,α},β} − {α,{f,β}}`; needs a flat connection.
pub fn metacurvature_def(h: &Hawkins, f: &Scalar, a: &OneForm, b: &OneForm) -> Result<DiffForm> {
    h.dc.require_flat()?;
    metacurvature_unchecked(h, f, a, b)
}

fn metacurvature_unchecked(h: &Hawkins, f: &Scalar, a: &OneForm, b: &OneForm) -> Result<DiffForm> {
    let d = h.dim();
    let f = DiffForm::scalar(d, f.clone());
    let t1 = h.bracket(&f, &h.bracket(a, b)?)?;
    let t2 = h.bracket(&h.bracket(&f, a)?, b)?;
    let t3 = h.bracket(a, &h.bracket(&f, b)?)?;
    Ok(&(&t1 - &t2) - &t3)
}

/// `M(γ, α, β)` for an arbitrary first slot, by linearity over `γ = Σ γ_m dx_m`.
pub fn metacurvature_at(h: &Hawkins, g: &OneForm, a: &OneForm, b: &OneForm) -> Result<DiffForm> {
    h.dc.require_flat()?;
    let mut out = DiffForm::zero(h.dim());
    for (m, gm) in g.components().iter().enumerate() {
        if gm.is_zero() {
            continue;
        }
        out = &out + &metacurvature_unchecked(h, &Scalar::coord(m), a, b)?.scale(gm);
    }
    Ok(out)
}

/// Table of 2-forms in the coframe basis of a flat frame, indexed by frame
/// slots.
#[derive(Clone, Debug, PartialEq)]
pub struct FrameTensor {
    pub slots: usize,
    pub dim: usize,
    pub leaf: usize,
    pub components: Vec<DiffForm>,
}

impl FrameTensor {
    fn new(slots: usize, dim: usize, leaf: usize) -> Self {
        FrameTensor {
            slots,
            dim,
            leaf,
            components: vec![DiffForm::zero(dim); dim.pow(slots as u32)],
        }
    }

    fn index(&self, idx: &[usize]) -> usize {
        idx.iter().fold(0, |acc, &i| acc * self.dim + i)
    }

    pub fn get(&self, idx: &[usize]) -> &DiffForm {
        &self.components[self.index(idx)]
    }

    fn set(&mut self, idx: &[usize], w: DiffForm) {
        let n = self.index(idx);
        self.components[n] = w;
    }

    pub fn indices(&self) -> Vec<Vec<usize>> {
        let mut out = vec![vec![]];
        for _ in 0..self.slots {
            out = out
                .into_iter()
                .flat_map(|v| {
                    (0..self.dim).map(move |i| {
                        let mut w = v.clone();
                        w.push(i);
                        w
                    })
                })
                .collect();
        }
        out
    }

    pub fn is_zero(&self) -> bool {
        self.components.iter().all(|c| c.is_zero())
    }

    pub fn nonzero(&self) -> Vec<(Vec<usize>, &DiffForm)> {
        self.indices()
            .into_iter()
            .filter_map(|i| {
                let c = self.get(&i);
                (!c.is_zero()).then_some((i, c))
            })
            .collect()
    }

    /// First slot permutation that changes a component, if any.
    pub fn symmetry_violation(&self) -> Option<(Vec<usize>, Vec<usize>)> {
        for idx in self.indices() {
            for p in permutations(&idx) {
                if self.get(&idx) != self.get(&p) {
                    return Some((idx, p));
                }
            }
        }
        None
    }

    /// True when every component with a transverse slot vanishes.
    pub fn transverse_slots_vanish(&self) -> bool {
        self.indices()
            .into_iter()
            .filter(|i| i.iter().any(|&s| s >= self.leaf))
            .all(|i| self.get(&i).is_zero())
    }
}

fn permutations(v: &[usize]) -> Vec<Vec<usize>> {
    if v.len() <= 1 {
        return vec![v.to_vec()];
    }
    let mut out = Vec::new();
    for i in 0..v.len() {
        let mut rest = v.to_vec();
        let x = rest.remove(i);
        for mut p in permutations(&rest) {
            p.insert(0, x);
            out.push(p);
        }
    }
    out
}

/// Labels of the coframe `φ_1, …, φ_{2r}, dy_1, …` using the chart's names
/// for the transverse coordinates.
pub fn frame_labels(names: &[String], leaf: usize, dim: usize) -> Vec<String> {
    (0..dim)
        .map(|a| {
            if a < leaf {
                format!("φ{}", a + 1)
            } else {
                format!("d{}", names.get(a).cloned().unwrap_or(format!("y{}", a - leaf + 1)))
            }
        })
        .collect()
}

/// A form given in coframe components, printed against the coframe labels.
pub fn display_frame_form(w: &DiffForm, labels: &[String]) -> String {
    if w.is_zero() {
        return "0".into();
    }
    let coords: Vec<String> = (0..w.dim()).map(|i| format!("x{}", i + 1)).collect();
    w.terms()
        .map(|(idx, c)| {
            let c = c.display(&coords).to_string();
            let c = if c.contains([' ', '+']) || c[1..].contains('-') { format!("({c})") } else { c };
            let basis: Vec<&str> = idx.iter().map(|&i| labels[i].as_str()).collect();
            format!("{c}·{}", basis.join("∧"))
        })
        .collect::<Vec<_>>()
        .join(" + ")
}

/// `M` in the coframe from the closed formula in flat coordinates.
pub fn metacurvature_coords(ff: &FlatFrame) -> FrameTensor {
    closed_form(ff, 3)
}

/// `T` in the coframe from the closed formula in flat coordinates.
pub fn tensor_t(ff: &FlatFrame) -> FrameTensor {
    closed_form(ff, 2)
}

/// The `φ∧φ`, `φ∧dy` and `dy∧dy` terms with `order` leaf derivatives:
/// `−∂^n π_lm φ_l∧φ_m + ∂^n A_l^u φ_l∧dy_u + ∂^{n−1}(π^{kl} C_l^{uv}) dy_u∧dy_v`,
/// where `k` is the last slot.
fn closed_form(ff: &FlatFrame, slots: usize) -> FrameTensor {
    let d = ff.dim();
    let leaf = ff.leaf();
    let s = ff.transverse();
    let pi = ff.connection().poisson();
    let mut out = FrameTensor::new(slots, d, leaf);
    for idx in out.indices() {
        if idx.iter().any(|&i| i >= leaf) {
            continue;
        }
        let diff_all = |x: &Scalar| idx.iter().fold(x.clone(), |acc, &i| acc.diff(i));
        let (last, head) = idx.split_last().expect("slots >= 1");
        let diff_head = |x: &Scalar| head.iter().fold(x.clone(), |acc, &i| acc.diff(i));
        let mut w = DiffForm::zero(d);
        for l in 0..leaf {
            for m in l + 1..leaf {
                w = &w + &DiffForm::basis(d, &[l, m], -diff_all(pi.entry(l, m)));
            }
            for u in 0..s {
                w = &w + &DiffForm::basis(d, &[l, leaf + u], diff_all(&ff.a()[l][u]));
            }
        }
        for u in 0..s {
            for v in u + 1..s {
                let inner: Scalar = (0..leaf)
                    .map(|l| &ff.pi_inv()[*last][l] * &ff.transverse_curvature(l, u, v))
                    .sum();
                w = &w + &DiffForm::basis(d, &[leaf + u, leaf + v], diff_head(&inner));
            }
        }
        out.set(&idx, w);
    }
    out
}

/// `M` on all frame slots from the bracket definition, converted to the
/// coframe basis.
pub fn metacurvature_def_frame(h: &Hawkins, ff: &FlatFrame) -> Result<FrameTensor> {
    h.dc.require_flat()?;
    let d = ff.dim();
    let mut out = FrameTensor::new(3, d, ff.leaf());
    let e = ff.coframe();
    for idx in out.indices() {
        let m = metacurvature_at(h, &e[idx[0]], &e[idx[1]], &e[idx[2]])?;
        out.set(&idx, ff.to_frame(&m));
    }
    Ok(out)
}

fn require_parallel(dc: &ContravariantConnection, a: &OneForm) -> Result<()> {
    let d = dc.dim();
    for m in 0..d {
        if !dc.apply(&OneForm::dx(d, m), a)?.is_zero() {
            return Err(Error::NotParallel);
        }
    }
    Ok(())
}

/// `T(α, β) = {α, β}` for parallel α, β; also checks it equals `−D_α dβ`.
pub fn tensor_t_def(h: &Hawkins, a: &OneForm, b: &OneForm) -> Result<DiffForm> {
    h.dc.require_flat()?;
    require_parallel(&h.dc, a)?;
    require_parallel(&h.dc, b)?;
    let br = h.bracket(a, b)?;
    let alt = -h.dc.apply_form(a, &b.exterior_d())?;
    debug_assert_eq!(br, alt);
    Ok(br)
}

/// `T` on all frame slots from the definition.
pub fn tensor_t_def_frame(h: &Hawkins, ff: &FlatFrame) -> Result<FrameTensor> {
    let d = ff.dim();
    let mut out = FrameTensor::new(2, d, ff.leaf());
    let e = ff.coframe();
    for idx in out.indices() {
        out.set(&idx, ff.to_frame(&tensor_t_def(h, &e[idx[0]], &e[idx[1]])?));
    }
    Ok(out)
}

/// `D_{e_a}(T(e_b, e_c)) − M(e_a, e_b, e_c)` in a parallel coframe.
pub fn dt_minus_m(ff: &FlatFrame, t: &FrameTensor, m: &FrameTensor) -> FrameTensor {
    let d = ff.dim();
    let pi = ff.connection().poisson();
    let anchors: Vec<_> = ff.coframe().iter().map(|e| pi.anchor(e).expect("same chart")).collect();
    let mut out = FrameTensor::new(3, d, ff.leaf());
    for idx in out.indices() {
        let dt = t.get(&idx[1..]).map(|c| anchors[idx[0]].apply(c));
        out.set(&idx, &dt - m.get(&idx));
    }
    out
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DtmReport {
    pub zero: bool,
    pub method: ZeroMethod,
    pub max_residual: f64,
}

pub fn check_dt_equals_m(ff: &FlatFrame, tol: f64, domain: &DomainBox, seed: u64) -> Result<DtmReport> {
    let t = tensor_t(ff);
    let m = metacurvature_coords(ff);
    let r = dt_minus_m(ff, &t, &m);
    let z = tensor_zero(&r, tol, domain, seed)?;
    Ok(DtmReport {
        zero: z.is_zero,
        method: z.method,
        max_residual: z.max_abs,
    })
}

pub fn tensor_zero(t: &FrameTensor, tol: f64, domain: &DomainBox, seed: u64) -> Result<ZeroTest> {
    let coeffs: Vec<Scalar> = t
        .components
        .iter()
        .flat_map(|c| c.terms().map(|(_, s)| s.clone()).collect::<Vec<_>>())
        .collect();
    Ok(all_zero(coeffs.iter(), tol, domain, seed)?)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct H3Report {
    pub holds: bool,
    pub method: ZeroMethod,
    pub residual: String,
}

/// `d(i_π μ)` with `μ = sqrt(det g) dx_1∧…∧dx_d`.
pub fn h3_residual(pi: &PoissonStructure, g: &Metric) -> Result<DiffForm> {
    let d = pi.dim();
    let det = linalg::det(g.tangent());
    if det.is_zero() {
        return Err(Error::DegenerateMetric);
    }
    let vol = Scalar::apply(Func::Sqrt, det);
    let all: Vec<usize> = (0..d).collect();
    let mu = DiffForm::basis(d, &all, vol);
    Ok(interior_product(&pi.bivector(), &mu)?.exterior_d())
}

pub fn h3_check(
    pi: &PoissonStructure,
    g: &Metric,
    names: &[String],
    tol: f64,
    domain: &DomainBox,
    seed: u64,
) -> Result<H3Report> {
    let r = h3_residual(pi, g)?;
    let z = all_zero(r.terms().map(|(_, s)| s), tol, domain, seed)?;
    let residual = r.display(names).to_string();
    Ok(H3Report {
        holds: z.is_zero,
        method: z.method,
        residual,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(untagged)]
pub enum Degree {
    Degree(u32),
    Verdict(&'static str),
}

/// Polynomial degree of `π` in the leaf coordinates of a symplectic chart.
pub fn symplectic_degree(pi: &PoissonStructure) -> Degree {
    let d = pi.dim();
    let mut deg = 0;
    for i in 0..d {
        for j in i + 1..d {
            match pi.entry(i, j).coordinate_degree() {
                Some(k) => deg = deg.max(k),
                None => return Degree::Verdict("not polynomial"),
            }
        }
    }
    Degree::Degree(deg)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct HawkinsReport {
    pub h1_flat: bool,
    pub h2_metacurvature_zero: bool,
    pub h3_volume_compatible: Option<bool>,
    pub tensor_t_zero: Option<bool>,
    pub symplectic_degree: Option<Degree>,
    pub classification: Option<&'static str>,
    pub methods: HawkinsMethods,
    pub h3_residual: Option<String>,
    pub first_curvature: Option<[usize; 4]>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct HawkinsMethods {
    pub h1: ZeroMethod,
    /// "symbolic" for the closed formula in a verified flat frame, "sampled"
    /// for the definition evaluated on generators.
    pub h2: ZeroMethod,
    pub h3: Option<ZeroMethod>,
    pub tensor_t: Option<ZeroMethod>,
    pub flat_frame: bool,
}

/// Inputs for [`hawkins_conditions`].
pub struct HawkinsInput<'a> {
    pub dc: ContravariantConnection,
    pub metric: Option<&'a Metric>,
    pub leaf: usize,
    pub declared_flat: bool,
    pub base: &'a [f64],
    pub names: &'a [String],
    pub domain: &'a DomainBox,
    pub tol: f64,
    pub seed: u64,
}

pub const SAMPLED_FUNCTION_SLOTS: usize = 20;

pub fn hawkins_conditions(inp: HawkinsInput<'_>) -> Result<HawkinsReport> {
    let dc = inp.dc;
    let d = dc.dim();
    let first_curvature = dc.first_curvature();
    let h1 = first_curvature.is_none();
    let h = Hawkins::new(dc.clone())?;
    let (h3, h3_method, h3_res) = match inp.metric {
        Some(g) => {
            let r = h3_check(dc.poisson(), g, inp.names, inp.tol, inp.domain, inp.seed)?;
            (Some(r.holds), Some(r.method), Some(r.residual))
        }
        None => (None, None, None),
    };
    let frame = if h1 && inp.declared_flat {
        let a = match inp.metric {
            Some(g) if inp.leaf < d => riemannian_a(g, inp.leaf, inp.base)?,
            _ => vec![vec![Scalar::zero(); d - inp.leaf]; inp.leaf],
        };
        FlatFrame::new(dc.clone(), inp.leaf, a).ok()
    } else {
        None
    };
    let (h2, h2_method, t_zero, t_method) = match &frame {
        Some(ff) => {
            let m = tensor_zero(&metacurvature_coords(ff), inp.tol, inp.domain, inp.seed)?;
            let t = tensor_zero(&tensor_t(ff), inp.tol, inp.domain, inp.seed)?;
            (m.is_zero, m.method, Some(t.is_zero), Some(t.method))
        }
        None if h1 => (sampled_m_zero(&h, inp.tol, inp.domain, inp.seed)?, ZeroMethod::Sampled, None, None),
        None => (false, ZeroMethod::Sampled, None, None),
    };
    let symplectic = inp.leaf == d && inp.declared_flat;
    let degree = symplectic.then(|| symplectic_degree(dc.poisson()));
    let classification = match &degree {
        Some(Degree::Degree(k)) if *k <= 1 => Some("degree at most one: M and T vanish"),
        Some(Degree::Degree(2)) => Some("quadratic: M vanishes, T does not"),
        Some(Degree::Degree(_)) => Some("degree above two: M does not vanish"),
        _ => None,
    };
    Ok(HawkinsReport {
        h1_flat: h1,
        h2_metacurvature_zero: h1 && h2,
        h3_volume_compatible: h3,
        tensor_t_zero: t_zero,
        symplectic_degree: degree,
        classification,
        methods: HawkinsMethods {
            h1: ZeroMethod::Symbolic,
            h2: h2_method,
            h3: h3_method,
            tensor_t: t_method,
            flat_frame: frame.is_some(),
        },
        h3_residual: h3_res,
        first_curvature: first_curvature.map(|(i, j, k, l)| [i, j, k, l]),
    })
}

/// Random polynomial of total degree ≤ 2 with small integer coefficients.
pub fn random_polynomial(rng: &mut impl Rng, d: usize) -> Scalar {
    let mut s = Scalar::from_rat(Rat::from_integer(rng.gen_range(-3..=3).into()));
    for i in 0..d {
        let c = rng.gen_range(-3..=3);
        if c != 0 {
            s = &s + &Scalar::coord(i).scale(&int(c));
        }
        for j in i..d {
            if rng.gen_bool(0.3) {
                let c = rng.gen_range(-2..=2);
                s = &s + &(&Scalar::coord(i) * &Scalar::coord(j)).scale(&int(c));
            }
        }
    }
    s
}

/// `M(df, dx_a, dx_b)` for seeded random `f` and all coordinate pairs.
fn sampled_m_zero(h: &Hawkins, tol: f64, domain: &DomainBox, seed: u64) -> Result<bool> {
    let d = h.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..SAMPLED_FUNCTION_SLOTS {
        let f = random_polynomial(&mut rng, d);
        for a in 0..d {
            for b in a..d {
                let m = metacurvature_unchecked(h, &f, &OneForm::dx(d, a), &OneForm::dx(d, b))?;
                if !all_zero(m.terms().map(|(_, s)| s), tol, domain, seed)?.is_zero {
                    return Ok(false);
                }
            }
        }
    }
    Ok(true)
}
