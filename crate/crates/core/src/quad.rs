//! Composite trapezoid rules on uniform grids.

/// Trapezoid weights for `n` uniform nodes with spacing `h`.
pub fn trapz_weights(n: usize, h: f64) -> Vec<f64> {
    let mut w = vec![h; n];
    if n > 0 {
        w[0] = 0.5 * h;
        w[n - 1] = 0.5 * h;
    }
    if n == 1 {
        w[0] = 0.0;
    }
    w
}

pub fn trapz(y: &[f64], h: f64) -> f64 {
    if y.len() < 2 {
        return 0.0;
    }
    let inner: f64 = y[1..y.len() - 1].iter().sum();
    h * (inner + 0.5 * (y[0] + y[y.len() - 1]))
}

/// Running trapezoid integral, starting at zero.
pub fn cumtrapz(y: &[f64], h: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(y.len());
    let mut acc = 0.0;
    if !y.is_empty() {
        out.push(0.0);
    }
    for w in y.windows(2) {
        acc += 0.5 * h * (w[0] + w[1]);
        out.push(acc);
    }
    out
}

/// Trapezoid rule on arbitrary increasing abscissae.
pub fn trapz_xy(x: &[f64], y: &[f64]) -> f64 {
    x.windows(2)
        .zip(y.windows(2))
        .map(|(xs, ys)| 0.5 * (xs[1] - xs[0]) * (ys[0] + ys[1]))
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trapz_exact_for_linear() {
        let h = 0.25;
        let y: Vec<f64> = (0..5).map(|i| 2.0 * i as f64 * h + 1.0).collect();
        assert!((trapz(&y, h) - 2.0).abs() < 1e-14);
        let c = cumtrapz(&y, h);
        assert_eq!(c.len(), 5);
        assert!((c[4] - 2.0).abs() < 1e-14);
        let w = trapz_weights(5, h);
        let s: f64 = w.iter().zip(&y).map(|(a, b)| a * b).sum();
        assert!((s - 2.0).abs() < 1e-14);
    }

    #[test]
    fn degenerate_lengths() {
        assert_eq!(trapz(&[], 1.0), 0.0);
        assert_eq!(trapz(&[3.0], 1.0), 0.0);
        assert!(cumtrapz(&[], 1.0).is_empty());
        assert_eq!(trapz_weights(1, 1.0), vec![0.0]);
    }
}
