use std::f64::consts::PI;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum StatsError {
    #[error("t-test needs at least 2 observations per sample (got {0} and {1})")]
    TooSmall(usize, usize),
    #[error("non-finite observation")]
    NonFinite,
}

/// Result of a two-sample t-test. `NotApplicable` when both samples have zero variance.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum TTest {
    Defined { t: f64, df: f64, p: f64 },
    NotApplicable,
}

impl TTest {
    pub fn p(&self) -> Option<f64> {
        match self {
            TTest::Defined { p, .. } => Some(*p),
            TTest::NotApplicable => None,
        }
    }

    pub fn t(&self) -> Option<f64> {
        match self {
            TTest::Defined { t, .. } => Some(*t),
            TTest::NotApplicable => None,
        }
    }

    pub fn significant(&self, alpha: f64) -> bool {
        self.p().is_some_and(|p| p < alpha)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum TTestKind {
    #[default]
    Welch,
    /// Pooled-variance Student test.
    Student,
}

fn mean_var(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let m = x.iter().sum::<f64>() / n;
    let v = x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (n - 1.0);
    (m, v)
}

fn check(a: &[f64], b: &[f64]) -> Result<(), StatsError> {
    if a.len() < 2 || b.len() < 2 {
        return Err(StatsError::TooSmall(a.len(), b.len()));
    }
    if a.iter().chain(b).any(|v| !v.is_finite()) {
        return Err(StatsError::NonFinite);
    }
    Ok(())
}

/// Welch's unequal-variance two-sample test, two-tailed.
pub fn welch_t_test(a: &[f64], b: &[f64]) -> Result<TTest, StatsError> {
    check(a, b)?;
    let (ma, va) = mean_var(a);
    let (mb, vb) = mean_var(b);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (sa, sb) = (va / na, vb / nb);
    if sa + sb == 0.0 {
        return Ok(TTest::NotApplicable);
    }
    let t = (ma - mb) / (sa + sb).sqrt();
    let df = (sa + sb).powi(2) / (sa * sa / (na - 1.0) + sb * sb / (nb - 1.0));
    Ok(TTest::Defined { t, df, p: two_tailed_p(t, df) })
}

pub fn student_t_test(a: &[f64], b: &[f64]) -> Result<TTest, StatsError> {
    check(a, b)?;
    let (ma, va) = mean_var(a);
    let (mb, vb) = mean_var(b);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let df = na + nb - 2.0;
    let pooled = ((na - 1.0) * va + (nb - 1.0) * vb) / df;
    if pooled == 0.0 {
        return Ok(TTest::NotApplicable);
    }
    let t = (ma - mb) / (pooled * (1.0 / na + 1.0 / nb)).sqrt();
    Ok(TTest::Defined { t, df, p: two_tailed_p(t, df) })
}

pub fn t_test(kind: TTestKind, a: &[f64], b: &[f64]) -> Result<TTest, StatsError> {
    match kind {
        TTestKind::Welch => welch_t_test(a, b),
        TTestKind::Student => student_t_test(a, b),
    }
}

/// P(|T| >= |t|) for Student's t with `df` degrees of freedom.
pub fn two_tailed_p(t: f64, df: f64) -> f64 {
    if t.is_infinite() {
        return 0.0;
    }
    let x = df / (df + t * t);
    regularized_incomplete_beta(x, df / 2.0, 0.5).clamp(0.0, 1.0)
}

/// Lanczos approximation (g = 7, 9 terms) of ln Gamma(x) for x > 0.
pub fn ln_gamma(x: f64) -> f64 {
    const G: f64 = 7.0;
    const C: [f64; 9] = [
        0.999_999_999_999_809_9,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_1,
        -176.615_029_162_140_6,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_572e-6,
        1.505_632_735_149_311_6e-7,
    ];
    if x < 0.5 {
        return (PI / (PI * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut a = C[0];
    let t = x + G + 0.5;
    for (i, c) in C.iter().enumerate().skip(1) {
        a += c / (x + i as f64);
    }
    0.5 * (2.0 * PI).ln() + (x + 0.5) * t.ln() - t + a.ln()
}

/// Continued fraction for I_x(a, b), modified Lentz.
fn beta_cf(x: f64, a: f64, b: f64) -> f64 {
    const TINY: f64 = 1e-300;
    const EPS: f64 = 1e-16;
    let (qab, qap, qam) = (a + b, a + 1.0, a - 1.0);
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < TINY {
        d = TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..10_000 {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < EPS {
            break;
        }
    }
    h
}

/// Regularized incomplete beta function I_x(a, b).
pub fn regularized_incomplete_beta(x: f64, a: f64, b: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    let ln_front = ln_gamma(a + b) - ln_gamma(a) - ln_gamma(b) + a * x.ln() + b * (1.0 - x).ln();
    let front = ln_front.exp();
    if x < (a + 1.0) / (a + b + 2.0) {
        front * beta_cf(x, a, b) / a
    } else {
        1.0 - front * beta_cf(1.0 - x, b, a) / b
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn identical_samples() {
        let t = welch_t_test(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]).unwrap();
        assert_eq!(t.t(), Some(0.0));
        assert!((t.p().unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn zero_variance_is_na() {
        assert_eq!(welch_t_test(&[1.0, 1.0, 1.0], &[1.0, 1.0]).unwrap(), TTest::NotApplicable);
        assert_eq!(welch_t_test(&[1.0, 1.0], &[2.0, 2.0]).unwrap(), TTest::NotApplicable);
        assert_eq!(student_t_test(&[3.0, 3.0], &[3.0, 3.0]).unwrap(), TTest::NotApplicable);
    }

    #[test]
    fn too_small() {
        assert_eq!(welch_t_test(&[1.0], &[1.0, 2.0]), Err(StatsError::TooSmall(1, 2)));
    }

    #[test]
    fn ln_gamma_values() {
        assert!((ln_gamma(1.0)).abs() < 1e-14);
        assert!((ln_gamma(0.5) - PI.sqrt().ln()).abs() < 1e-14);
        assert!((ln_gamma(10.0) - 362_880f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn cauchy_special_case() {
        // With df = 1 the t distribution is Cauchy: P(|T| >= t) = 1 - 2 atan(t) / pi.
        for t in [0.1, 1.0, 3.0, 20.0] {
            let exact = 1.0 - 2.0 * f64::atan(t) / PI;
            assert!((two_tailed_p(t, 1.0) - exact).abs() < 1e-12, "t = {t}");
        }
        // df = 2: P(|T| >= t) = 1 - t / sqrt(2 + t^2).
        for t in [0.5, 2.0, 7.0] {
            let exact = 1.0 - t / f64::sqrt(2.0 + t * t);
            assert!((two_tailed_p(t, 2.0) - exact).abs() < 1e-12, "t = {t}");
        }
    }

    proptest! {
        #[test]
        fn swap_negates_t(a in prop::collection::vec(-50.0f64..50.0, 2..20), b in prop::collection::vec(-50.0f64..50.0, 2..20)) {
            let (x, y) = (welch_t_test(&a, &b).unwrap(), welch_t_test(&b, &a).unwrap());
            if let (TTest::Defined { t: t1, p: p1, .. }, TTest::Defined { t: t2, p: p2, .. }) = (x, y) {
                prop_assert!((t1 + t2).abs() < 1e-9 * (1.0 + t1.abs()));
                prop_assert!((p1 - p2).abs() < 1e-12);
            }
        }

        #[test]
        fn shift_and_scale_invariant(a in prop::collection::vec(-50.0f64..50.0, 2..20), b in prop::collection::vec(-50.0f64..50.0, 2..20), c in 0.5f64..4.0, d in -20.0f64..20.0) {
            let base = welch_t_test(&a, &b).unwrap();
            let f = |v: &Vec<f64>| v.iter().map(|x| c * x + d).collect::<Vec<_>>();
            let moved = welch_t_test(&f(&a), &f(&b)).unwrap();
            if let (TTest::Defined { t: t1, p: p1, .. }, TTest::Defined { t: t2, p: p2, .. }) = (base, moved) {
                prop_assert!((t1 - t2).abs() < 1e-7 * (1.0 + t1.abs()));
                prop_assert!((p1 - p2).abs() < 1e-7);
            }
        }
    }
}
