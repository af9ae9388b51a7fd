//! Small quadrature helpers shared by the drive integrals and the phase table.

use std::f64::consts::PI;
use std::sync::OnceLock;

const GL_ORDER: usize = 10;

/// Gauss-Legendre nodes and weights on [-1, 1], found by Newton iteration on
/// the Legendre recurrence.
fn gauss_legendre() -> &'static [(f64, f64)] {
    static RULE: OnceLock<Vec<(f64, f64)>> = OnceLock::new();
    RULE.get_or_init(|| {
        let n = GL_ORDER;
        (0..n)
            .map(|i| {
                let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
                let mut dp = 1.0;
                for _ in 0..100 {
                    let (mut p0, mut p1) = (1.0, x);
                    for k in 2..=n {
                        let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                        p0 = p1;
                        p1 = p2;
                    }
                    dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
                    let dx = p1 / dp;
                    x -= dx;
                    if dx.abs() < 1e-16 {
                        break;
                    }
                }
                (x, 2.0 / ((1.0 - x * x) * dp * dp))
            })
            .collect()
    })
}

/// Composite Gauss-Legendre integral of `f` over `[a, b]`.
///
/// Panels never straddle a breakpoint and are at most `max_panel` wide. If
/// `f` fails anywhere the first error is returned.
pub fn integrate<E>(
    mut f: impl FnMut(f64) -> Result<f64, E>,
    a: f64,
    b: f64,
    breakpoints: &[f64],
    max_panel: f64,
) -> Result<f64, E> {
    if a == b {
        return Ok(0.0);
    }
    let (lo, hi, sign) = if a < b { (a, b, 1.0) } else { (b, a, -1.0) };
    let mut cuts = vec![lo];
    cuts.extend(breakpoints.iter().copied().filter(|&x| x > lo && x < hi));
    cuts.push(hi);
    let rule = gauss_legendre();
    let mut total = 0.0;
    for w in cuts.windows(2) {
        let (s, e) = (w[0], w[1]);
        let panels = ((e - s) / max_panel).ceil().max(1.0) as usize;
        let h = (e - s) / panels as f64;
        for k in 0..panels {
            let mid = s + (k as f64 + 0.5) * h;
            for &(x, wt) in rule {
                total += wt * 0.5 * h * f(mid + 0.5 * h * x)?;
            }
        }
    }
    Ok(sign * total)
}

/// Cumulative Simpson integral over consecutive intervals, each using its
/// endpoint and midpoint values: `out[k] = ∫_{t_0}^{t_k}`.
pub fn cumulative_simpson(times: &[f64], nodes: &[f64], mids: &[f64]) -> Vec<f64> {
    assert_eq!(times.len(), nodes.len());
    assert_eq!(mids.len() + 1, times.len().max(1));
    let mut out = Vec::with_capacity(times.len());
    let mut acc = 0.0;
    out.push(0.0);
    for k in 0..mids.len() {
        let h = times[k + 1] - times[k];
        acc += h / 6.0 * (nodes[k] + 4.0 * mids[k] + nodes[k + 1]);
        out.push(acc);
    }
    out
}
