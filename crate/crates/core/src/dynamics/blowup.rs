use serde::{Deserialize, Serialize};

use super::{DynamicsError, Result};
use crate::functionals::TraceRow;

/// Blow-up time estimate from the tail of a trace.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlowUpEstimate {
    pub t_estimate: f64,
    /// Time at which `sup u` crosses the threshold (log-linear interpolation).
    pub t_cross: f64,
    /// Fitted exponent `rho` of `sup u ~ (t* - t)^(-1/rho)`, if the fit was used.
    pub rho: Option<f64>,
    pub extrapolated: bool,
    pub rows_used: usize,
}

/// Fits `sup u = C (t* - t)^(-1/rho)` to increasing samples.
///
/// The exponent comes from the linear decay of `1 / (d ln S / d t)`, refined
/// by maximising the linearity of `S^-rho` in `t`; the pole is the zero of
/// that line. Returns `None` when the samples do not look like a pole.
pub fn extrapolate_pole(times: &[f64], sups: &[f64]) -> Option<(f64, f64)> {
    let pts: Vec<(f64, f64)> = times
        .iter()
        .zip(sups)
        .filter(|(t, s)| t.is_finite() && s.is_finite() && **s > 0.0)
        .map(|(t, s)| (*t, *s))
        .collect();
    if pts.len() < 4 {
        return None;
    }
    let mut mid = Vec::new();
    let mut inv_rate = Vec::new();
    for w in pts.windows(2) {
        let dt = w[1].0 - w[0].0;
        let dl = w[1].1.ln() - w[0].1.ln();
        if dt > 0.0 && dl > 0.0 {
            mid.push(0.5 * (w[0].0 + w[1].0));
            inv_rate.push(dt / dl);
        }
    }
    if mid.len() < 3 {
        return None;
    }
    let (slope, _) = linear_fit(&mid, &inv_rate)?;
    let guess = -slope;
    if !(guess > 1e-3 && guess < 1e3) {
        return None;
    }
    let badness = |rho: f64| -> f64 {
        let ys: Vec<f64> = pts.iter().map(|(_, s)| s.powf(-rho)).collect();
        let ts: Vec<f64> = pts.iter().map(|(t, _)| *t).collect();
        nonlinearity(&ts, &ys).unwrap_or(f64::INFINITY)
    };
    // golden-section search on ln(rho)
    let (mut a, mut b) = ((guess / 2.0).ln(), (guess * 2.0).ln());
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (badness(c.exp()), badness(d.exp()));
    for _ in 0..80 {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = badness(c.exp());
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = badness(d.exp());
        }
        if b - a < 1e-12 {
            break;
        }
    }
    let rho = (0.5 * (a + b)).exp();
    let ts: Vec<f64> = pts.iter().map(|(t, _)| *t).collect();
    let ys: Vec<f64> = pts.iter().map(|(_, s)| s.powf(-rho)).collect();
    let (slope, intercept) = linear_fit(&ts, &ys)?;
    if !(slope < 0.0) {
        return None;
    }
    let t_star = -intercept / slope;
    if !t_star.is_finite() || t_star < ts[ts.len() - 1] {
        return None;
    }
    Some((t_star, rho))
}

fn linear_fit(x: &[f64], y: &[f64]) -> Option<(f64, f64)> {
    let n = x.len() as f64;
    let xm = x.iter().sum::<f64>() / n;
    let ym = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - xm).powi(2)).sum();
    if !(sxx > 0.0) {
        return None;
    }
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - xm) * (b - ym)).sum();
    let slope = sxy / sxx;
    Some((slope, ym - slope * xm))
}

/// `1 - R^2` of the least-squares line through `(x, y)`.
fn nonlinearity(x: &[f64], y: &[f64]) -> Option<f64> {
    let (slope, intercept) = linear_fit(x, y)?;
    let ym = y.iter().sum::<f64>() / y.len() as f64;
    let syy: f64 = y.iter().map(|v| (v - ym).powi(2)).sum();
    if !(syy > 0.0) {
        return None;
    }
    let sse: f64 = x.iter().zip(y).map(|(a, b)| (b - slope * a - intercept).powi(2)).sum();
    Some(sse / syy)
}

/// Blow-up time from trace rows whose last entry has crossed `u_max`.
///
/// Falls back to the crossing time when the pole fit is ill-conditioned.
pub fn detect_blowup(tail: &[TraceRow], u_max: f64) -> Result<BlowUpEstimate> {
    let last = tail.last().ok_or(DynamicsError::NoCrossing { sup: 0.0, u_max })?;
    if !(last.sup_u >= u_max) {
        return Err(DynamicsError::NoCrossing { sup: last.sup_u, u_max });
    }
    Ok(estimate_from_tail(tail, crossing_time(tail, u_max)))
}

/// Pole fit over the increasing suffix of `tail`, falling back to `fallback`.
pub(crate) fn estimate_from_tail(tail: &[TraceRow], fallback: f64) -> BlowUpEstimate {
    let mut start = tail.len().saturating_sub(1);
    while start > 0 && tail[start - 1].sup_u < tail[start].sup_u && tail[start - 1].t < tail[start].t {
        start -= 1;
    }
    let rows = &tail[start..];
    let times: Vec<f64> = rows.iter().map(|r| r.t).collect();
    let sups: Vec<f64> = rows.iter().map(|r| r.sup_u).collect();
    match extrapolate_pole(&times, &sups) {
        Some((t_star, rho)) => BlowUpEstimate {
            t_estimate: t_star,
            t_cross: fallback,
            rho: Some(rho),
            extrapolated: true,
            rows_used: rows.len(),
        },
        None => BlowUpEstimate {
            t_estimate: fallback,
            t_cross: fallback,
            rho: None,
            extrapolated: false,
            rows_used: rows.len(),
        },
    }
}

fn crossing_time(rows: &[TraceRow], u_max: f64) -> f64 {
    let n = rows.len();
    if n >= 2 {
        let (a, b) = (&rows[n - 2], &rows[n - 1]);
        if a.sup_u < u_max && a.sup_u > 0.0 && b.sup_u > a.sup_u {
            let frac = (u_max.ln() - a.sup_u.ln()) / (b.sup_u.ln() - a.sup_u.ln());
            return a.t + frac * (b.t - a.t);
        }
    }
    rows[n - 1].t
}

#[cfg(test)]
mod tests {
    use super::*;

    fn synthetic(t_star: f64, order: f64, u_max: f64) -> Vec<TraceRow> {
        // rows every 5% of growth, as the runner records them
        let mut rows = Vec::new();
        let mut s: f64 = 1.0;
        loop {
            let t = t_star - s.powf(-1.0 / order);
            rows.push(TraceRow::bare(t, s));
            if s >= u_max {
                break;
            }
            s *= 1.05;
        }
        rows
    }

    #[test]
    fn recovers_simple_and_double_poles() {
        // the steep pole stops earlier: (t* - t) = S^-2 underflows the clock at 1e8
        for &(t_star, order, u_max) in &[(1.0, 1.0, 1e8), (0.5, 2.0, 1e8), (0.3, 0.5, 1e5)] {
            let rows = synthetic(t_star, order, u_max);
            let tail = &rows[rows.len() - 20..];
            let est = detect_blowup(tail, u_max).unwrap();
            assert!((est.t_estimate - t_star).abs() < 1e-3, "{est:?}");
            assert!(est.extrapolated);
            assert!((est.rho.unwrap() - 1.0 / order).abs() < 1e-3 / order, "{est:?}");
        }
    }

    #[test]
    fn extrapolation_beats_crossing_far_from_the_pole() {
        let rows = synthetic(1.0, 1.0, 1e3);
        let est = detect_blowup(&rows[rows.len() - 20..], 1e3).unwrap();
        assert!((est.t_estimate - 1.0).abs() < 1e-8);
        assert!((est.t_cross - 1.0).abs() > 1e-4);
    }

    #[test]
    fn no_crossing_is_an_error() {
        let rows = synthetic(1.0, 1.0, 1e3);
        assert!(matches!(detect_blowup(&rows, 1e6), Err(DynamicsError::NoCrossing { .. })));
        assert!(detect_blowup(&[], 1.0).is_err());
    }

    #[test]
    fn ill_conditioned_fit_falls_back_to_crossing() {
        let rows = vec![TraceRow::bare(0.0, 1.0), TraceRow::bare(1.0, 5.0)];
        let est = detect_blowup(&rows, 2.0).unwrap();
        assert!(!est.extrapolated);
        let expected = 2f64.ln() / 5f64.ln();
        assert!((est.t_estimate - expected).abs() < 1e-12);
    }
}
