use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::{ExprError, Scalar};

pub const ZERO_TEST_SAMPLES: usize = 64;

/// Axis-aligned sampling box of a chart.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DomainBox {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl DomainBox {
    pub fn new(bounds: &[(f64, f64)]) -> Self {
        DomainBox {
            lo: bounds.iter().map(|b| b.0.min(b.1)).collect(),
            hi: bounds.iter().map(|b| b.0.max(b.1)).collect(),
        }
    }

    /// `[-1, 1]^d`, shifted so that it contains `base`.
    pub fn around(base: &[f64]) -> Self {
        let (lo, hi) = base
            .iter()
            .map(|&b| {
                if (-1.0..=1.0).contains(&b) {
                    (-1.0, 1.0)
                } else {
                    (b - 1.0, b + 1.0)
                }
            })
            .unzip();
        DomainBox { lo, hi }
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn contains(&self, p: &[f64]) -> bool {
        p.len() == self.dim()
            && p.iter()
                .zip(self.lo.iter().zip(&self.hi))
                .all(|(x, (l, h))| *l <= *x && *x <= *h)
    }

    pub fn sample(&self, rng: &mut impl Rng) -> Vec<f64> {
        self.lo
            .iter()
            .zip(&self.hi)
            .map(|(l, h)| if l == h { *l } else { rng.gen_range(*l..*h) })
            .collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ZeroMethod {
    Symbolic,
    Sampled,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ZeroTest {
    pub is_zero: bool,
    pub method: ZeroMethod,
    pub max_abs: f64,
}

/// Decides whether `s` vanishes identically on `domain`.
///
/// Atom-free scalars are decided exactly. With atoms the canonical form may
/// hide identities such as `sin^2 + cos^2 = 1`, so the scalar is evaluated at
/// [`ZERO_TEST_SAMPLES`] seeded points instead; points hitting a pole are
/// redrawn.
pub fn equals_zero(
    s: &Scalar,
    tol: f64,
    domain: &DomainBox,
    seed: u64,
) -> Result<ZeroTest, ExprError> {
    if !(tol > 0.0) {
        return Err(ExprError::BadTolerance(tol));
    }
    if s.is_zero() || !s.has_atoms() {
        return Ok(ZeroTest {
            is_zero: s.is_zero(),
            method: ZeroMethod::Symbolic,
            max_abs: if s.is_zero() { 0.0 } else { f64::NAN },
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut accepted = 0;
    let mut attempts = 0;
    let mut max_abs = 0.0f64;
    while accepted < ZERO_TEST_SAMPLES {
        attempts += 1;
        let p = domain.sample(&mut rng);
        match s.eval(&p) {
            Ok(v) if v.is_finite() => {
                accepted += 1;
                max_abs = max_abs.max(v.abs());
            }
            _ => {
                let failures = attempts - accepted;
                if attempts >= ZERO_TEST_SAMPLES && 2 * failures > attempts {
                    return Err(ExprError::DomainTooSingular { failures, attempts });
                }
            }
        }
    }
    Ok(ZeroTest {
        is_zero: max_abs < tol,
        method: ZeroMethod::Sampled,
        max_abs,
    })
}

/// [`equals_zero`] over a whole table; the method is `Sampled` as soon as one
/// entry needed sampling.
pub fn all_zero<'a>(
    entries: impl IntoIterator<Item = &'a Scalar>,
    tol: f64,
    domain: &DomainBox,
    seed: u64,
) -> Result<ZeroTest, ExprError> {
    let mut out = ZeroTest {
        is_zero: true,
        method: ZeroMethod::Symbolic,
        max_abs: 0.0,
    };
    for s in entries {
        let t = equals_zero(s, tol, domain, seed)?;
        out.is_zero &= t.is_zero;
        if t.method == ZeroMethod::Sampled {
            out.method = ZeroMethod::Sampled;
        }
        if t.max_abs.is_nan() || out.max_abs.is_nan() {
            out.max_abs = f64::NAN;
        } else {
            out.max_abs = out.max_abs.max(t.max_abs);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symexpr::parse;

    fn check(src: &str) -> ZeroTest {
        let names = vec!["x1".to_string(), "x2".to_string()];
        let s = parse(src, &names).unwrap().to_scalar();
        equals_zero(&s, 1e-10, &DomainBox::around(&[0.0, 0.0]), 7).unwrap()
    }

    #[test]
    fn exact_and_sampled_paths() {
        let t = check("x1 - x1");
        assert!(t.is_zero);
        assert_eq!(t.method, ZeroMethod::Symbolic);

        let t = check("sin(x1)^2 + cos(x1)^2 - 1");
        assert!(t.is_zero);
        assert_eq!(t.method, ZeroMethod::Sampled);

        let t = check("x1^2 - x2");
        assert!(!t.is_zero);
        assert_eq!(t.method, ZeroMethod::Symbolic);

        assert!(!check("sin(x1) - x1").is_zero);
    }

    #[test]
    fn singular_domain_reported() {
        let names = vec!["x1".to_string()];
        let s = parse("log(x1) + sin(x1)", &names).unwrap().to_scalar();
        let domain = DomainBox::new(&[(-2.0, -1.0)]);
        assert!(matches!(
            equals_zero(&s, 1e-9, &domain, 1),
            Err(ExprError::DomainTooSingular { .. })
        ));
        assert!(matches!(
            equals_zero(&s, 0.0, &domain, 1),
            Err(ExprError::BadTolerance(_))
        ));
    }

    #[test]
    fn default_box_contains_base() {
        for base in [[0.0, 1.0], [3.0, -7.5], [-1.0, 0.9]] {
            assert!(DomainBox::around(&base).contains(&base));
        }
        assert_eq!(DomainBox::around(&[0.0]).lo, vec![-1.0]);
    }
}
