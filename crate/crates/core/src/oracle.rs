//! Numerical reference for single-neuron spike times.
//!
//! Integrates `du/dt = (1/tau_s) sum_j W_j H(t - t_j) exp(-(t - t_j)/tau_s)`
//! with forward Euler on a uniform grid. Once the integrated potential comes
//! within a tolerance band of the threshold, the potential is evaluated
//! directly from the kernel sum at each grid point, and the first crossing is
//! refined by bisection. No causal-set reasoning is involved.

use crate::error::{dim_err, Error, Result};
use crate::model::NetworkParams;
use crate::nlif::membrane_potential;

const NEAR_BAND: f64 = 0.05;

/// Spike time by direct integration, or `params.t_inf` if the threshold is
/// never reached before `10 * max(t_j) + 20 * tau_s`.
pub fn integrate_oracle(
    params: &NetworkParams,
    input_times: &[f64],
    weight_row: &[f64],
    dt: f64,
) -> Result<f64> {
    if input_times.len() != weight_row.len() {
        return dim_err(format!(
            "{} input times but {} weights",
            input_times.len(),
            weight_row.len()
        ));
    }
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::Input(format!("step size must be positive, got {dt}")));
    }

    let mut events: Vec<(f64, f64)> = input_times
        .iter()
        .zip(weight_row)
        .filter(|(&t, _)| !params.is_silent(t))
        .map(|(&t, &w)| (t, w))
        .collect();
    if events.is_empty() {
        return Ok(params.t_inf);
    }
    events.sort_by(|a, b| a.0.total_cmp(&b.0));

    let tau = params.tau_s;
    let theta = params.theta;
    let t_start = events[0].0;
    let t_max_input = events.last().unwrap().0;
    let horizon = 10.0 * t_max_input + 20.0 * tau;
    let decay = (-dt / tau).exp();
    let closed = |t: f64| membrane_potential(params, input_times, weight_row, t).unwrap();

    let mut t = t_start;
    let mut u = 0.0;
    let mut current = 0.0;
    let mut next_event = 0;
    // events at exactly t_start
    while next_event < events.len() && events[next_event].0 <= t {
        current += events[next_event].1;
        next_event += 1;
    }
    let mut closed_prev: Option<f64> = Some(0.0);

    while t < horizon {
        let t_new = t + dt;
        u += dt * current / tau;
        current *= decay;
        while next_event < events.len() && events[next_event].0 <= t_new {
            let (te, w) = events[next_event];
            current += w * (-(t_new - te) / tau).exp();
            next_event += 1;
        }

        if u >= theta - NEAR_BAND * theta {
            let u_lo = match closed_prev {
                Some(v) => v,
                None => closed(t),
            };
            let u_hi = closed(t_new);
            if u_hi >= theta {
                let (mut lo, mut hi) = (t, t_new);
                if u_lo >= theta {
                    // crossed before this step; walk back on the exact potential
                    while lo > t_start && closed(lo) >= theta {
                        hi = lo;
                        lo = (lo - dt).max(t_start);
                    }
                }
                return Ok(bisect(&closed, theta, lo, hi));
            }
            closed_prev = Some(u_hi);
        } else {
            closed_prev = None;
        }
        t = t_new;
    }
    Ok(params.t_inf)
}

fn bisect(f: &impl Fn(f64) -> f64, level: f64, mut lo: f64, mut hi: f64) -> f64 {
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if f(mid) >= level {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_input_crossing() {
        let p = NetworkParams::default();
        let t = integrate_oracle(&p, &[0.0], &[2.0], 1e-6).unwrap();
        assert!((t - 0.5 * 2f64.ln()).abs() < 1e-6, "{t}");
    }

    #[test]
    fn subthreshold_returns_sentinel() {
        let p = NetworkParams::default();
        assert_eq!(integrate_oracle(&p, &[0.0], &[0.5], 1e-4).unwrap(), p.t_inf);
        assert_eq!(integrate_oracle(&p, &[p.t_inf], &[5.0], 1e-4).unwrap(), p.t_inf);
    }

    #[test]
    fn two_inputs_crossing() {
        let p = NetworkParams::default();
        let t = integrate_oracle(&p, &[0.0, 0.1], &[0.8, 0.8], 1e-5).unwrap();
        let expected = 0.5 * ((0.8 + 0.8 * 0.2f64.exp()) / 0.6).ln();
        assert!((t - expected).abs() < 1e-9);
    }

    #[test]
    fn bad_step() {
        let p = NetworkParams::default();
        assert!(integrate_oracle(&p, &[0.0], &[2.0], 0.0).is_err());
    }
}
