use super::OpticsError;

pub const MAX_HERMITE_ORDER: usize = 64;

/// Physicists' Hermite polynomial H_m(x) by three-term recurrence.
pub fn hermite_poly(m: usize, x: f64) -> Result<f64, OpticsError> {
    if m > MAX_HERMITE_ORDER {
        return Err(OpticsError::UnsupportedOrder { order: m, max: MAX_HERMITE_ORDER });
    }
    Ok(hermite_unchecked(m, x))
}

pub(crate) fn hermite_unchecked(m: usize, x: f64) -> f64 {
    let (mut prev, mut cur) = (0.0, 1.0);
    for k in 0..m {
        let next = 2.0 * x * cur - 2.0 * k as f64 * prev;
        prev = cur;
        cur = next;
    }
    cur
}

/// H_0..=H_max at one abscissa.
pub(crate) fn hermite_table(max: usize, x: f64, out: &mut Vec<f64>) {
    out.clear();
    out.push(1.0);
    if max >= 1 {
        out.push(2.0 * x);
    }
    for k in 1..max {
        let v = 2.0 * x * out[k] - 2.0 * k as f64 * out[k - 1];
        out.push(v);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn factorial(n: usize) -> f64 {
        (1..=n).map(|k| k as f64).product()
    }

    // closed-form series m! Σ (−1)^j (2x)^{m−2j} / (j! (m−2j)!)
    fn series(m: usize, x: f64) -> f64 {
        (0..=m / 2)
            .map(|j| {
                let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
                sign * (2.0 * x).powi((m - 2 * j) as i32) / (factorial(j) * factorial(m - 2 * j))
            })
            .sum::<f64>()
            * factorial(m)
    }

    #[test]
    fn low_orders() {
        assert_eq!(hermite_poly(0, 3.7).unwrap(), 1.0);
        assert_eq!(hermite_poly(2, 1.0).unwrap(), 2.0);
        assert_eq!(hermite_poly(1, -0.25).unwrap(), -0.5);
    }

    #[test]
    fn order_five_matches_series() {
        let oracle = series(5, 0.5);
        // 32x⁵ − 160x³ + 120x at 0.5 = 1 − 20 + 60
        assert!((oracle - 41.0).abs() < 1e-12);
        assert!((hermite_poly(5, 0.5).unwrap() - oracle).abs() < 1e-12);
    }

    #[test]
    fn recurrence_matches_series_up_to_twenty() {
        for m in 0..=20 {
            for &x in &[-2.3, -0.7, 0.0, 0.4, 1.9] {
                let a = hermite_poly(m, x).unwrap();
                let b = series(m, x);
                assert!((a - b).abs() <= 1e-9 * b.abs().max(1.0), "m={m} x={x}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn order_cap() {
        assert!(hermite_poly(64, 0.1).is_ok());
        assert_eq!(
            hermite_poly(65, 0.1),
            Err(OpticsError::UnsupportedOrder { order: 65, max: 64 })
        );
    }

    #[test]
    fn table_matches_scalar() {
        let mut t = Vec::new();
        hermite_table(9, 0.83, &mut t);
        assert_eq!(t.len(), 10);
        for (m, v) in t.iter().enumerate() {
            assert_eq!(*v, hermite_unchecked(m, 0.83));
        }
    }
}
