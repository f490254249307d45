/// Fritsch-Carlson monotone cubic Hermite interpolation. `xs` strictly
/// increasing, `x` within `[xs[0], xs[n-1]]`.
pub(crate) fn pchip(xs: &[f64], ys: &[f64], x: f64) -> f64 {
    let n = xs.len();
    if n == 1 {
        return ys[0];
    }
    let h: Vec<f64> = xs.windows(2).map(|w| w[1] - w[0]).collect();
    let delta: Vec<f64> = (0..n - 1).map(|i| (ys[i + 1] - ys[i]) / h[i]).collect();
    let slope = |i: usize| -> f64 {
        if n == 2 {
            return delta[0];
        }
        if i == 0 {
            return end_slope(h[0], h[1], delta[0], delta[1]);
        }
        if i == n - 1 {
            return end_slope(h[n - 2], h[n - 3], delta[n - 2], delta[n - 3]);
        }
        let (d0, d1) = (delta[i - 1], delta[i]);
        if d0 * d1 <= 0.0 {
            0.0
        } else {
            let w1 = 2.0 * h[i] + h[i - 1];
            let w2 = h[i] + 2.0 * h[i - 1];
            (w1 + w2) / (w1 / d0 + w2 / d1)
        }
    };
    let i = xs.partition_point(|&v| v <= x).saturating_sub(1).min(n - 2);
    let t = (x - xs[i]) / h[i];
    let (m0, m1) = (slope(i), slope(i + 1));
    let t2 = t * t;
    let t3 = t2 * t;
    let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
    let h10 = t3 - 2.0 * t2 + t;
    let h01 = -2.0 * t3 + 3.0 * t2;
    let h11 = t3 - t2;
    h00 * ys[i] + h10 * h[i] * m0 + h01 * ys[i + 1] + h11 * h[i] * m1
}

/// Three-point end slope with the usual shape-preserving clamps.
fn end_slope(h0: f64, h1: f64, d0: f64, d1: f64) -> f64 {
    let d = ((2.0 * h0 + h1) * d0 - h0 * d1) / (h0 + h1);
    if d.signum() != d0.signum() {
        0.0
    } else if d0.signum() != d1.signum() && d.abs() > 3.0 * d0.abs() {
        3.0 * d0
    } else {
        d
    }
}
