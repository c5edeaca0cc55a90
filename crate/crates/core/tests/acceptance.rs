//! Acceptance criteria 1-9, one line each.

use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use metacurv::chart::{bundled, Chart, ChartFile};
use metacurv::cli::{self, chart_flat_frame, Command, Options, EXIT_CHECK_FAILED, EXIT_PRECONDITION};
use metacurv::connection::{levi_civita_contravariant, metric_compatibility_residual, Metric};
use metacurv::forms::{DiffForm, OneForm};
use metacurv::frobenius::{
    build_commuting_fields, flat_splitting, reconstruct, riemannian_a, solve, zero_vector, FlatFrame,
    FrobeniusSystem, Grid, InitialSplitting, ReconstructOptions,
};
use metacurv::hawkins::{
    check_dt_equals_m, hawkins_conditions, metacurvature_coords, metacurvature_def, metacurvature_def_frame,
    random_polynomial, tensor_t, Degree, FrameTensor, Hawkins, HawkinsInput,
};
use metacurv::symexpr::{parse, Scalar};

type Outcome = Result<String, String>;

const FLAT_CHARTS: [&str; 5] = ["symp2_const", "symp2_quad", "symp2_cubic", "reg3_product", "aff1_liepoisson"];

fn chart(name: &str) -> Chart {
    Chart::new(bundled(name).expect("bundled chart")).expect("chart loads")
}

fn frame(name: &str) -> (Chart, Hawkins, FlatFrame) {
    let c = chart(name);
    let (dc, _) = c.connection().expect("connection");
    let h = Hawkins::new(dc.clone()).expect("torsion free");
    let ff = chart_flat_frame(&c, dc).expect("flat frame");
    (c, h, ff)
}

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within(t: Instant, limit: Duration) -> Result<Duration, String> {
    let e = t.elapsed();
    ensure(e < limit, || format!("took {e:?}, limit {limit:?}"))?;
    Ok(e)
}

fn random_form(rng: &mut ChaCha8Rng, d: usize) -> DiffForm {
    let p = rng.gen_range(0..=d.min(2));
    let mut idx: Vec<usize> = (0..d).collect();
    while idx.len() > p {
        idx.remove(rng.gen_range(0..idx.len()));
    }
    DiffForm::basis(d, &idx, random_polynomial(rng, d))
}

fn random_one_form(rng: &mut ChaCha8Rng, d: usize) -> OneForm {
    let comps: Vec<Scalar> = (0..d).map(|_| random_polynomial(rng, d)).collect();
    OneForm::from_components(&comps)
}

fn sign(n: usize) -> Scalar {
    if n % 2 == 0 {
        Scalar::one()
    } else {
        -Scalar::one()
    }
}

fn koszul_connection() -> Outcome {
    let t = Instant::now();
    for name in ["symp2_const", "reg3_product"] {
        let c = chart(name);
        let dc = levi_civita_contravariant(&c.pi, &Metric::euclidean(c.dim())).map_err(|e| e.to_string())?;
        ensure(dc.christoffel().iter().flatten().flatten().all(Scalar::is_zero), || {
            format!("{name}: Γ is not identically zero")
        })?;
    }
    let c = chart("symp2_const");
    let g = Metric::new(
        vec![
            vec![parse("1 + x1^2", &c.names).unwrap().to_scalar(), Scalar::zero()],
            vec![Scalar::zero(), Scalar::one()],
        ],
        &c.base,
        false,
    )
    .map_err(|e| e.to_string())?;
    let dc = levi_civita_contravariant(&c.pi, &g).map_err(|e| e.to_string())?;
    ensure(dc.torsion().iter().flatten().flatten().all(Scalar::is_zero), || "torsion nonzero".into())?;
    ensure(
        metric_compatibility_residual(&dc, &g).iter().flatten().flatten().all(Scalar::is_zero),
        || "metric compatibility residual nonzero".into(),
    )?;
    let v = dc.gamma(0, 0, 1).eval(&[1.0, 0.0]).map_err(|e| e.to_string())?;
    ensure((v + 0.25).abs() < 1e-12, || format!("Γ_11^2(1,0) = {v}"))?;
    let e = within(t, Duration::from_secs(5))?;
    Ok(format!("Γ ≡ 0 on both Euclidean charts, Γ_11^2(1,0) = {v}, {e:.2?}"))
}

fn bracket_axioms() -> Outcome {
    let t = Instant::now();
    let mut checked = 0;
    for name in FLAT_CHARTS {
        let (c, h, _) = frame(name);
        let d = c.dim();
        let mut rng = ChaCha8Rng::seed_from_u64(0xb4ac);
        for n in 0..50 {
            let s = random_form(&mut rng, d);
            let u = random_form(&mut rng, d);
            let r = random_form(&mut rng, d);
            let (p, q) = (s.degree().unwrap_or(0), u.degree().unwrap_or(0));
            let su = h.bracket(&s, &u).unwrap();
            let us = h.bracket(&u, &s).unwrap();
            let anti = &su + &us.scale(&sign(p * q));
            ensure(anti.is_zero(), || format!("{name} pair {n}: graded antisymmetry fails"))?;
            let deriv = &(&su.exterior_d() - &h.bracket(&s.exterior_d(), &u).unwrap())
                - &h.bracket(&s, &u.exterior_d()).unwrap().scale(&sign(p));
            ensure(deriv.is_zero(), || format!("{name} pair {n}: d is not a derivation"))?;
            let ur = u.wedge(&r).unwrap();
            let leib = &(&h.bracket(&s, &ur).unwrap() - &su.wedge(&r).unwrap())
                - &u.wedge(&h.bracket(&s, &r).unwrap()).unwrap().scale(&sign(p * q));
            ensure(leib.is_zero(), || format!("{name} pair {n}: Leibniz rule fails"))?;
            checked += 1;
        }
    }
    let e = within(t, Duration::from_secs(60))?;
    Ok(format!("{checked} pairs: antisymmetry, d-derivation and Leibniz residuals all zero, {e:.2?}"))
}

fn metacurvature_oracle() -> Outcome {
    for name in ["symp2_const", "symp2_quad", "symp2_cubic", "reg3_product"] {
        let (_, h, ff) = frame(name);
        let closed = metacurvature_coords(&ff);
        let def = metacurvature_def_frame(&h, &ff).map_err(|e| e.to_string())?;
        ensure(closed == def, || format!("{name}: definition and closed formula differ"))?;
    }
    let (_, _, cubic) = frame("symp2_cubic");
    let m = metacurvature_coords(&cubic);
    let nz = m.nonzero();
    ensure(
        nz.len() == 1 && nz[0].0 == vec![0, 0, 0] && *nz[0].1 == DiffForm::basis(2, &[0, 1], Scalar::from_int(-6)),
        || format!("cubic M components: {}", nz.len()),
    )?;
    let (_, _, quad) = frame("symp2_quad");
    ensure(metacurvature_coords(&quad).is_zero(), || "quadratic M is nonzero".into())?;
    let t = tensor_t(&quad);
    ensure(*t.get(&[0, 0]) == DiffForm::basis(2, &[0, 1], Scalar::from_int(-2)), || {
        "quadratic T(φ1,φ1) differs from -2 φ1∧φ2".into()
    })?;
    let mut classes = Vec::new();
    for (name, want) in [("symp2_const", 0), ("symp2_quad", 2), ("symp2_cubic", 3)] {
        let c = chart(name);
        let (dc, _) = c.connection().unwrap();
        let r = hawkins_conditions(HawkinsInput {
            dc,
            metric: c.metric.as_ref(),
            leaf: 2,
            declared_flat: true,
            base: &c.base,
            names: &c.names,
            domain: &c.domain,
            tol: 1e-9,
            seed: 0,
        })
        .map_err(|e| e.to_string())?;
        ensure(r.symplectic_degree == Some(Degree::Degree(want)), || format!("{name}: degree {:?}", r.symplectic_degree))?;
        ensure(r.h2_metacurvature_zero == (want <= 2), || format!("{name}: H2 verdict"))?;
        ensure(r.tensor_t_zero == Some(want <= 1), || format!("{name}: T verdict"))?;
        classes.push(format!("{name}: {}", r.classification.unwrap_or("-")));
    }
    Ok(format!("definition ≡ closed formula on 4 charts; {}", classes.join("; ")))
}

fn dt_equals_m() -> Outcome {
    for name in FLAT_CHARTS {
        let (c, _, ff) = frame(name);
        let r = check_dt_equals_m(&ff, 1e-9, &c.domain, 0).map_err(|e| e.to_string())?;
        ensure(r.zero, || format!("{name}: D T − M residual {}", r.max_residual))?;
    }
    Ok(format!("D T − M normalizes to zero on {} flat charts", FLAT_CHARTS.len()))
}

/// `M(df, α, β)` from the closed coframe table by tensoriality.
fn m_from_table(ff: &FlatFrame, m: &FrameTensor, f: &Scalar, a: &OneForm, b: &OneForm) -> DiffForm {
    let d = ff.dim();
    let df = DiffForm::df(d, f);
    let pair = |w: &OneForm| -> Vec<Scalar> { ff.frame().iter().map(|e| w.pair(e)).collect() };
    let (pf, pa, pb) = (pair(&df), pair(a), pair(b));
    let mut out = DiffForm::zero(d);
    for i in 0..d {
        for j in 0..d {
            for k in 0..d {
                let c = &(&pf[i] * &pa[j]) * &pb[k];
                if !c.is_zero() {
                    out = &out + &m.get(&[i, j, k]).scale(&c);
                }
            }
        }
    }
    ff.from_frame(&out)
}

fn jacobi_matches_m() -> Outcome {
    let t = Instant::now();
    let mut triples = 0;
    for name in FLAT_CHARTS {
        let (c, h, ff) = frame(name);
        let d = c.dim();
        let table = metacurvature_coords(&ff);
        let mut rng = ChaCha8Rng::seed_from_u64(0x1ac0b1);
        for n in 0..20 {
            let f = random_polynomial(&mut rng, d);
            let a = random_one_form(&mut rng, d);
            let b = random_one_form(&mut rng, d);
            let jac = h.graded_jacobi(&DiffForm::scalar(d, f.clone()), &a, &b).unwrap();
            let def = metacurvature_def(&h, &f, &a, &b).unwrap();
            ensure(jac == def, || format!("{name} triple {n}: Jacobi combination differs from M"))?;
            let closed = m_from_table(&ff, &table, &f, &a, &b);
            ensure(jac == closed, || format!("{name} triple {n}: Jacobi combination differs from the M table"))?;
            ensure(!table.is_zero() || jac.is_zero(), || format!("{name} triple {n}: nonzero where M = 0"))?;
            triples += 1;
        }
    }
    Ok(format!("{triples} triples agree with M, {:.2?}", t.elapsed()))
}

fn frobenius_integrator() -> Outcome {
    let scalar = |h: f64| FrobeniusSystem {
        size: 1,
        params: vec![0],
        gamma: vec![std::sync::Arc::new(|_: &[f64]| DMatrix::from_element(1, 1, 1.0))],
        inhom: vec![zero_vector(1)],
        initial: DVector::from_element(1, 1.0),
        base: vec![0.0],
        step: h,
    };
    let fine = Grid::new(vec![0], &[(0.0, 1.0)], vec![101]).unwrap();
    let err = (solve(&scalar(0.01), &fine).unwrap().fields[0].at(&[100]) - 1f64.exp()).abs();
    ensure(err < 1e-8, || format!("e^1 error {err:e}"))?;
    let coarse = Grid::new(vec![0], &[(0.0, 1.0)], vec![11]).unwrap();
    let e1 = (solve(&scalar(0.1), &coarse).unwrap().fields[0].at(&[10]) - 1f64.exp()).abs();
    let e2 = (solve(&scalar(0.05), &coarse).unwrap().fields[0].at(&[10]) - 1f64.exp()).abs();
    ensure(e1 / e2 >= 12.0, || format!("halving h improved the error by {:.2}x", e1 / e2))?;

    let mut worst: f64 = 0.0;
    for name in ["reg3_product", "reg3_riemannian"] {
        let c = chart(name);
        let (dc, _) = c.connection().unwrap();
        let grid = Grid::around(&c.base, &[0, 1, 2], 0.5, 33).unwrap();
        let basis = vec![vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0]];
        let s = flat_splitting(&dc, 2, &InitialSplitting::Basis(basis), &grid, &c.base, 0.01).map_err(|e| e.to_string())?;
        worst = worst.max(s.path_discrepancy);
    }
    for name in ["symp2_const", "aff1_liepoisson", "reg3_product"] {
        let (c, _, ff) = frame(name);
        let grid = Grid::around(&c.base, &(0..c.dim()).collect::<Vec<_>>(), 0.5, 33).unwrap();
        let t = build_commuting_fields(&ff, &grid, &c.base, 0.01).map_err(|e| e.to_string())?;
        worst = worst.max(t.path_discrepancy);
        let r = reconstruct(&ff, c.metric.as_ref(), &c.base, &c.names, &ReconstructOptions::default())
            .map_err(|e| e.to_string())?;
        worst = worst.max(r.residuals.path_discrepancy);
    }
    ensure(worst < 1e-6, || format!("path discrepancy {worst:e}"))?;
    Ok(format!("e^1 error {err:.1e}, order ratio {:.1}, path discrepancy {worst:.1e}", e1 / e2))
}

fn riemannian_splitting() -> Outcome {
    let c = chart("reg3_riemannian");
    let (dc, _) = c.connection().unwrap();
    let g = c.metric.as_ref().unwrap();
    let sym = riemannian_a(g, 2, &c.base).map_err(|e| e.to_string())?;
    ensure(sym[0][0] == -Scalar::coord(1) && sym[1][0].is_zero(), || "symbolic A differs from A_1^1 = -x2".into())?;
    let grid = Grid::around(&c.base, &[0, 1, 2], 0.5, 33).unwrap();
    let basis = vec![vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0]];
    let s = flat_splitting(&dc, 2, &InitialSplitting::Basis(basis), &grid, &c.base, 0.01).map_err(|e| e.to_string())?;
    let dev = s.deviation_from(&sym, &c.base);
    ensure(dev < 1e-6, || format!("numeric and symbolic A differ by {dev:e}"))?;
    Ok(format!("numeric A matches -x2 within {dev:.1e}"))
}

fn theorem_reconstruction() -> Outcome {
    let t = Instant::now();
    let (c, _, ff) = frame("aff1_liepoisson");
    let r = reconstruct(&ff, None, &c.base, &c.names, &ReconstructOptions::default()).map_err(|e| e.to_string())?;
    let res = &r.residuals;
    for (stage, v) in res.stages() {
        ensure(v < 1e-6, || format!("aff1 {stage} residual {v:e}"))?;
    }
    ensure(res.a_det.abs() > 1e-6, || format!("det a = {}", res.a_det))?;
    let nonabelian = r.c.iter().flatten().flatten().any(|v| v.abs() > 0.5);
    ensure(nonabelian, || "structure constants vanish".into())?;
    let e = within(t, Duration::from_secs(120))?;

    let (c, _, ff) = frame("symp2_const");
    let r = reconstruct(&ff, c.metric.as_ref(), &c.base, &c.names, &ReconstructOptions::default())
        .map_err(|e| e.to_string())?;
    let node = r.grid.node_of(&c.base).unwrap();
    let variation = r.z.iter().flatten().fold(0.0f64, |a, f| a.max(f.spread_from(&node)));
    ensure(variation < 1e-9, || format!("Z varies by {variation:e}"))?;
    let killing = r.residuals.killing.unwrap_or(f64::NAN);
    ensure(killing < 1e-9, || format!("Killing residual {killing:e}"))?;
    ensure(r.c.iter().flatten().flatten().all(|v| v.abs() < 1e-9), || "c is not zero".into())?;
    Ok(format!(
        "aff1: worst residual {:.1e}, det a = {:.3}, {e:.2?}; symp2_const: constant Z, Killing {killing:.1e}",
        res.stages().iter().fold(0.0f64, |a, s| a.max(s.1)),
        res.a_det
    ))
}

fn run(name: &str, cmd: Command) -> cli::Outcome {
    cli::run(cmd, bundled(name).unwrap(), &Options::default())
}

fn negative_controls() -> Outcome {
    let quad = run("symp2_quad", Command::Reconstruct);
    ensure(quad.exit == EXIT_PRECONDITION, || format!("symp2_quad reconstruct exit {}", quad.exit))?;
    let msg = quad.report["error"].as_str().unwrap_or_default().to_string();
    ensure(msg.contains("T(φ1, φ1) = -2·φ1∧φ2"), || format!("rejection does not cite T: {msg}"))?;
    let jac = run("broken_jacobi", Command::Validate);
    ensure(jac.exit == EXIT_CHECK_FAILED, || format!("broken_jacobi validate exit {}", jac.exit))?;
    let residual = jac.report["checks"]["jacobi"]["residual"].as_str().unwrap_or_default().to_string();
    let file: ChartFile = bundled("broken_antisymmetry").unwrap();
    let anti = cli::run(Command::Validate, file, &Options::default());
    ensure(anti.exit == EXIT_CHECK_FAILED, || format!("broken_antisymmetry validate exit {}", anti.exit))?;
    Ok(format!("quad rejected with `{msg}`; Jacobi residual {residual}"))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 9] = [
        ("koszul connection", koszul_connection),
        ("hawkins bracket axioms", bracket_axioms),
        ("metacurvature oracle equivalence", metacurvature_oracle),
        ("D T = M", dt_equals_m),
        ("graded Jacobi and M", jacobi_matches_m),
        ("frobenius integrator", frobenius_integrator),
        ("riemannian splitting", riemannian_splitting),
        ("action reconstruction", theorem_reconstruction),
        ("negative controls", negative_controls),
    ];
    let mut failed = Vec::new();
    for (n, (name, f)) in criteria.iter().enumerate() {
        match f() {
            Ok(detail) => println!("criterion {} ({name}): PASS: {detail}", n + 1),
            Err(why) => {
                println!("criterion {} ({name}): FAIL: {why}", n + 1);
                failed.push(n + 1);
            }
        }
    }
    if !failed.is_empty() {
        eprintln!("failed criteria: {failed:?}");
        std::process::exit(1);
    }
}
