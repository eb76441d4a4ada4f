//! Geodesics of the connection `∇^LC + A`:
//! `γ''^a = −(Γ^a_{bc}(γ) + A^a_{bc}(γ)) γ'^b γ'^c`.
//!
//! Skew-adjointness of `A` keeps `h(γ', γ')` constant along exact solutions;
//! [`speed_drift`] measures how far a discrete trajectory departs from that.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Chart, TorsionField};
use crate::tensor::inner;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeodesicState {
    pub gamma: Vec<f64>,
    pub gamma_prime: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    #[default]
    Rk4,
    Euler,
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub samples: Vec<(f64, GeodesicState)>,
    pub step: f64,
    pub method: Method,
    /// Set when integration stopped early because a stage left the chart.
    pub truncated: bool,
}

/// Acceleration `γ''` at the given state.
pub fn geodesic_rhs(
    chart: &Chart,
    field: &TorsionField,
    state: &GeodesicState,
) -> Result<Vec<f64>> {
    let y = &state.gamma;
    let v = &state.gamma_prime;
    let gamma = chart.christoffel(y)?;
    let mut acc = gamma.contract(v, v);
    if !field.is_zero() {
        let a = field.eval(chart, y)?;
        let av = a.apply(v, v);
        for (o, t) in acc.iter_mut().zip(av) {
            *o += t;
        }
    }
    for o in &mut acc {
        *o = -*o;
    }
    Ok(acc)
}

fn shifted(state: &GeodesicState, dpos: &[f64], dvel: &[f64], s: f64) -> GeodesicState {
    GeodesicState {
        gamma: state
            .gamma
            .iter()
            .zip(dpos)
            .map(|(p, d)| p + s * d)
            .collect(),
        gamma_prime: state
            .gamma_prime
            .iter()
            .zip(dvel)
            .map(|(p, d)| p + s * d)
            .collect(),
    }
}

fn step_once(
    chart: &Chart,
    field: &TorsionField,
    state: &GeodesicState,
    h: f64,
    method: Method,
) -> Result<GeodesicState> {
    match method {
        Method::Euler => {
            let a = geodesic_rhs(chart, field, state)?;
            Ok(shifted(state, &state.gamma_prime.clone(), &a, h))
        }
        Method::Rk4 => {
            let k1v = state.gamma_prime.clone();
            let k1a = geodesic_rhs(chart, field, state)?;
            let s2 = shifted(state, &k1v, &k1a, 0.5 * h);
            let k2v = s2.gamma_prime.clone();
            let k2a = geodesic_rhs(chart, field, &s2)?;
            let s3 = shifted(state, &k2v, &k2a, 0.5 * h);
            let k3v = s3.gamma_prime.clone();
            let k3a = geodesic_rhs(chart, field, &s3)?;
            let s4 = shifted(state, &k3v, &k3a, h);
            let k4v = s4.gamma_prime.clone();
            let k4a = geodesic_rhs(chart, field, &s4)?;
            let n = state.gamma.len();
            let comb = |a: &[f64], b: &[f64], c: &[f64], d: &[f64]| -> Vec<f64> {
                (0..n)
                    .map(|i| (a[i] + 2.0 * b[i] + 2.0 * c[i] + d[i]) / 6.0)
                    .collect()
            };
            Ok(shifted(
                state,
                &comb(&k1v, &k2v, &k3v, &k4v),
                &comb(&k1a, &k2a, &k3a, &k4a),
                h,
            ))
        }
    }
}

/// Fixed-step integration over `n_steps` steps of size `step`.
///
/// A step whose stages leave the chart ends the trajectory with `truncated` set;
/// a non-finite state is a [`Error::Divergence`].
pub fn integrate(
    chart: &Chart,
    field: &TorsionField,
    initial: &GeodesicState,
    step: f64,
    n_steps: usize,
    method: Method,
) -> Result<Trajectory> {
    if !(step > 0.0 && step.is_finite()) {
        return Err(Error::Validation(format!(
            "step must be positive, got {step}"
        )));
    }
    if initial.gamma.len() != chart.dim() || initial.gamma_prime.len() != chart.dim() {
        return Err(Error::Validation(
            "state dimension does not match chart".into(),
        ));
    }
    chart.check_inside(&initial.gamma, 0.0)?;

    let mut samples = Vec::with_capacity(n_steps + 1);
    samples.push((0.0, initial.clone()));
    let mut state = initial.clone();
    let mut truncated = false;
    for k in 1..=n_steps {
        let next = match step_once(chart, field, &state, step, method) {
            Ok(next) => next,
            Err(Error::Domain { .. }) => {
                truncated = true;
                break;
            }
            Err(e) => return Err(e),
        };
        if next
            .gamma
            .iter()
            .chain(&next.gamma_prime)
            .any(|v| !v.is_finite())
        {
            return Err(Error::Divergence { step: k });
        }
        if chart.check_inside(&next.gamma, 0.0).is_err() {
            truncated = true;
            break;
        }
        samples.push((k as f64 * step, next.clone()));
        state = next;
    }
    Ok(Trajectory {
        samples,
        step,
        method,
        truncated,
    })
}

/// `max_s |h(γ)(γ', γ') − h(γ₀)(γ'₀, γ'₀)|`.
pub fn speed_drift(traj: &Trajectory, chart: &Chart) -> f64 {
    let speed = |s: &GeodesicState| {
        inner(
            &chart.metric_unchecked(&s.gamma),
            &s.gamma_prime,
            &s.gamma_prime,
        )
    };
    let Some((_, first)) = traj.samples.first() else {
        return 0.0;
    };
    let s0 = speed(first);
    traj.samples
        .iter()
        .map(|(_, s)| (speed(s) - s0).abs())
        .fold(0.0, f64::max)
}

/// CSV with header `s,gamma_1..gamma_n,gammaprime_1..gammaprime_n,speed_sq`.
pub fn trajectory_csv(traj: &Trajectory, chart: &Chart) -> String {
    let n = chart.dim();
    let mut out = String::from("s");
    for i in 1..=n {
        out.push_str(&format!(",gamma_{i}"));
    }
    for i in 1..=n {
        out.push_str(&format!(",gammaprime_{i}"));
    }
    out.push_str(",speed_sq\n");
    for (s, st) in &traj.samples {
        let speed = inner(
            &chart.metric_unchecked(&st.gamma),
            &st.gamma_prime,
            &st.gamma_prime,
        );
        let row: Vec<String> = std::iter::once(*s)
            .chain(st.gamma.iter().copied())
            .chain(st.gamma_prime.iter().copied())
            .chain(std::iter::once(speed))
            .map(crate::io::fmt_f64)
            .collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}
