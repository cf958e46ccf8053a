//! Centered sliding-window filters with truncated edges: near the ends of a
//! series the window shrinks instead of padding with invented samples.

pub const WINDOW: usize = 5;

fn window_bounds(i: usize, len: usize, window: usize) -> (usize, usize) {
    let half = window / 2;
    (i.saturating_sub(half), (i + half + 1).min(len))
}

pub fn moving_average(series: &[f64], window: usize) -> Vec<f64> {
    let len = series.len();
    (0..len)
        .map(|i| {
            let (lo, hi) = window_bounds(i, len, window);
            series[lo..hi].iter().sum::<f64>() / (hi - lo) as f64
        })
        .collect()
}

/// Sliding median; even-sized edge windows average the two middle values.
pub fn median_filter(series: &[f64], window: usize) -> Vec<f64> {
    let len = series.len();
    let mut buf = Vec::with_capacity(window);
    (0..len)
        .map(|i| {
            let (lo, hi) = window_bounds(i, len, window);
            buf.clear();
            buf.extend_from_slice(&series[lo..hi]);
            buf.sort_by(f64::total_cmp);
            let n = buf.len();
            if n % 2 == 1 {
                buf[n / 2]
            } else {
                0.5 * (buf[n / 2 - 1] + buf[n / 2])
            }
        })
        .collect()
}

pub fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Central differences inside, one-sided at both ends, divided by `dt`.
pub fn finite_difference(series: &[f64], dt: f64) -> Vec<f64> {
    let n = series.len();
    match n {
        0 => Vec::new(),
        1 => vec![0.0],
        _ => (0..n)
            .map(|i| {
                if i == 0 {
                    (series[1] - series[0]) / dt
                } else if i == n - 1 {
                    (series[n - 1] - series[n - 2]) / dt
                } else {
                    (series[i + 1] - series[i - 1]) / (2.0 * dt)
                }
            })
            .collect(),
    }
}

/// Linear interpolation of `series` onto `out_len` points spanning the same
/// window, first and last samples mapped exactly.
pub fn resample_linear(series: &[f64], out_len: usize) -> Vec<f64> {
    let n = series.len();
    if n == 0 || out_len == 0 {
        return Vec::new();
    }
    if n == 1 || out_len == 1 {
        return vec![series[0]; out_len];
    }
    let step = (n - 1) as f64 / (out_len - 1) as f64;
    (0..out_len)
        .map(|i| {
            if i == out_len - 1 {
                return series[n - 1];
            }
            let pos = i as f64 * step;
            let left = (pos.floor() as usize).min(n - 2);
            let frac = pos - left as f64;
            series[left] * (1.0 - frac) + series[left + 1] * frac
        })
        .collect()
}
