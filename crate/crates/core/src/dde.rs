//! Method-of-steps integration of the delayed system.
//!
//! Fixed-step classical RK4. Delayed values `y_i(t - T_i)` come from the
//! constant history for `t - T_i <= 0` and from cubic Hermite interpolation
//! of the stored nodes and derivatives otherwise, so the step does not need
//! to divide the delays.

use crate::error::DdeError;
use crate::model::{Feedback, InitialData, NetworkModel};

/// Undershoot below zero larger than this is reported as a diagnostic.
pub const CLAMP_WARN: f64 = 1e-9;

/// `min(T_min / 20, 1e-2)` when some delay is positive, else `1e-2`.
pub fn default_step<F: Feedback>(model: &NetworkModel<F>) -> f64 {
    match model.min_positive_delay() {
        Some(t) => (t / 20.0).min(1e-2),
        None => 1e-2,
    }
}

/// Dense solution on a uniform grid from 0 to the horizon.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    n: usize,
    step: f64,
    times: Vec<f64>,
    // node-major, 2n values per node
    states: Vec<f64>,
    derivatives: Vec<f64>,
    initial: InitialData,
    max_clamp: f64,
    clamp_events: usize,
}

impl Trajectory {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn horizon(&self) -> f64 {
        *self.times.last().unwrap_or(&0.0)
    }

    pub fn initial(&self) -> &InitialData {
        &self.initial
    }

    /// State `(x, y)` at node `k`.
    pub fn state(&self, k: usize) -> &[f64] {
        &self.states[2 * self.n * k..2 * self.n * (k + 1)]
    }

    pub fn derivative(&self, k: usize) -> &[f64] {
        &self.derivatives[2 * self.n * k..2 * self.n * (k + 1)]
    }

    pub fn x(&self, k: usize, i: usize) -> f64 {
        self.states[2 * self.n * k + i]
    }

    pub fn y(&self, k: usize, i: usize) -> f64 {
        self.states[2 * self.n * k + self.n + i]
    }

    /// Largest negative undershoot that was clamped to zero.
    pub fn max_clamp(&self) -> f64 {
        self.max_clamp
    }

    /// Number of stored nodes where the clamp exceeded [`CLAMP_WARN`].
    pub fn clamp_events(&self) -> usize {
        self.clamp_events
    }

    /// `y_i(t)`, using the history for `t <= 0`.
    pub fn history_lookup(&self, i: usize, t: f64) -> Result<f64, DdeError> {
        lookup(
            &self.states,
            &self.derivatives,
            self.n,
            self.step,
            self.len() - 1,
            &self.initial.history,
            self.n + i,
            t,
        )
    }

    /// Dense-output state at `t ∈ [0, horizon]`.
    pub fn sample(&self, t: f64) -> Result<Vec<f64>, DdeError> {
        let horizon = self.horizon();
        if !(0.0..=horizon).contains(&t) {
            return Err(DdeError::OutOfRange { t, horizon });
        }
        let front = self.len() - 1;
        (0..2 * self.n)
            .map(|c| {
                lookup(
                    &self.states,
                    &self.derivatives,
                    self.n,
                    self.step,
                    front,
                    &self.initial.history,
                    c,
                    t,
                )
            })
            .collect()
    }
}

/// Value of state component `c` at `t`, given nodes `0..=front`.
#[allow(clippy::too_many_arguments)]
fn lookup(
    states: &[f64],
    derivatives: &[f64],
    n: usize,
    step: f64,
    front: usize,
    history: &[f64],
    c: usize,
    t: f64,
) -> Result<f64, DdeError> {
    let width = 2 * n;
    if t <= 0.0 {
        if c >= n {
            return Ok(history[c - n]);
        }
        if t == 0.0 {
            return Ok(states[c]);
        }
        return Err(DdeError::OutOfRange {
            t,
            horizon: front as f64 * step,
        });
    }
    let pos = t / step;
    let nearest = pos.round();
    if (pos - nearest).abs() < 1e-9 {
        let k = nearest as usize;
        if k > front {
            return Err(DdeError::Causality {
                t,
                front: front as f64 * step,
            });
        }
        return Ok(states[width * k + c]);
    }
    let k = pos.floor() as usize;
    if k >= front {
        return Err(DdeError::Causality {
            t,
            front: front as f64 * step,
        });
    }
    let s = pos - k as f64;
    let (a, b) = (states[width * k + c], states[width * (k + 1) + c]);
    let (da, db) = (derivatives[width * k + c], derivatives[width * (k + 1) + c]);
    let s2 = s * s;
    let s3 = s2 * s;
    let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
    let h10 = s3 - 2.0 * s2 + s;
    let h01 = -2.0 * s3 + 3.0 * s2;
    let h11 = s3 - s2;
    Ok(h00 * a + h10 * step * da + h01 * b + h11 * step * db)
}

struct Integrator<'a, F: Feedback> {
    model: &'a NetworkModel<F>,
    n: usize,
    step: f64,
    history: &'a [f64],
    states: Vec<f64>,
    derivatives: Vec<f64>,
}

impl<F: Feedback> Integrator<'_, F> {
    fn front(&self) -> usize {
        // nodes whose derivative is known
        (self.derivatives.len() / (2 * self.n)).saturating_sub(1)
    }

    /// Delayed `y` at time `t`; `stage` supplies `y_i(t)` for zero delays.
    fn delayed(&self, t: f64, stage: &[f64], out: &mut [f64]) -> Result<(), DdeError> {
        let front = self.front();
        for (i, p) in self.model.neurons().iter().enumerate() {
            out[i] = if p.delay == 0.0 {
                stage[self.n + i]
            } else {
                lookup(
                    &self.states,
                    &self.derivatives,
                    self.n,
                    self.step,
                    front,
                    self.history,
                    self.n + i,
                    t - p.delay,
                )?
                .max(0.0)
            };
        }
        Ok(())
    }
}

/// Integrates from `t = 0` to `horizon`.
///
/// `step` defaults to [`default_step`] and must not exceed the smallest
/// positive delay. It is shrunk to `horizon / ceil(horizon / step)` so the
/// last node lands on the horizon.
pub fn integrate<F: Feedback>(
    model: &NetworkModel<F>,
    initial: &InitialData,
    horizon: f64,
    step: Option<f64>,
) -> Result<Trajectory, DdeError> {
    let n = model.n();
    initial.check(n)?;
    if !(horizon.is_finite() && horizon > 0.0) {
        return Err(DdeError::InvalidHorizon(horizon));
    }
    let requested = step.unwrap_or_else(|| default_step(model));
    let max = model.min_positive_delay().unwrap_or(f64::INFINITY);
    if !(requested.is_finite() && requested > 0.0 && requested <= max) {
        return Err(DdeError::InvalidStep {
            step: requested,
            max,
        });
    }
    let nodes = (horizon / requested - 1e-9).ceil().max(1.0) as usize;
    let h = horizon / nodes as f64;
    let width = 2 * n;

    let mut run = Integrator {
        model,
        n,
        step: h,
        history: &initial.history,
        states: Vec::with_capacity(width * (nodes + 1)),
        derivatives: Vec::with_capacity(width * (nodes + 1)),
    };
    let start = initial.state();
    let mut delayed = vec![0.0; n];
    let mut deriv = vec![0.0; width];
    run.states.extend_from_slice(&start);
    run.delayed(0.0, &start, &mut delayed)?;
    model.rhs(&start, &delayed, &mut deriv);
    run.derivatives.extend_from_slice(&deriv);

    let mut stage = vec![0.0; width];
    let mut k2 = vec![0.0; width];
    let mut k3 = vec![0.0; width];
    let mut k4 = vec![0.0; width];
    let mut next = vec![0.0; width];
    let mut max_clamp: f64 = 0.0;
    let mut clamp_events = 0;

    for k in 0..nodes {
        let t = k as f64 * h;
        let base = width * k;
        let current = run.states[base..base + width].to_vec();
        let k1 = run.derivatives[base..base + width].to_vec();

        for (c, s) in stage.iter_mut().enumerate() {
            *s = (current[c] + 0.5 * h * k1[c]).max(0.0);
        }
        run.delayed(t + 0.5 * h, &stage, &mut delayed)?;
        model.rhs(&stage, &delayed, &mut k2);

        for (c, s) in stage.iter_mut().enumerate() {
            *s = (current[c] + 0.5 * h * k2[c]).max(0.0);
        }
        run.delayed(t + 0.5 * h, &stage, &mut delayed)?;
        model.rhs(&stage, &delayed, &mut k3);

        for (c, s) in stage.iter_mut().enumerate() {
            *s = (current[c] + h * k3[c]).max(0.0);
        }
        run.delayed(t + h, &stage, &mut delayed)?;
        model.rhs(&stage, &delayed, &mut k4);

        let mut clamp: f64 = 0.0;
        for c in 0..width {
            let v = current[c] + h / 6.0 * (k1[c] + 2.0 * k2[c] + 2.0 * k3[c] + k4[c]);
            if !v.is_finite() {
                return Err(DdeError::NonFinite { t: t + h });
            }
            if v < 0.0 {
                clamp = clamp.max(-v);
                next[c] = 0.0;
            } else {
                next[c] = v;
            }
        }
        if clamp > CLAMP_WARN {
            if clamp_events == 0 {
                log::warn!("clamped negative undershoot {clamp:e} at t = {}", t + h);
            }
            clamp_events += 1;
        }
        max_clamp = max_clamp.max(clamp);

        run.states.extend_from_slice(&next);
        let t_next = if k + 1 == nodes {
            horizon
        } else {
            (k + 1) as f64 * h
        };
        run.delayed(t_next, &next, &mut delayed)?;
        model.rhs(&next, &delayed, &mut deriv);
        run.derivatives.extend_from_slice(&deriv);
    }

    let mut times: Vec<f64> = (0..=nodes).map(|k| k as f64 * h).collect();
    times[nodes] = horizon;
    Ok(Trajectory {
        n,
        step: h,
        times,
        states: run.states,
        derivatives: run.derivatives,
        initial: initial.clone(),
        max_clamp,
        clamp_events,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Edge, HillResponse, NeuronParams};

    fn full3(mu: f64) -> NetworkModel {
        let neurons = vec![NeuronParams::new(1500.0, mu, 0.17, 0.0); 3];
        let mut edges = Vec::new();
        for i in 0..3 {
            for j in 0..3 {
                if i != j {
                    edges.push(Edge::new(i, j, 0.9, 0.1));
                }
            }
        }
        NetworkModel::new(neurons, edges, 0.015, HillResponse::new(5.0, 60.0)).unwrap()
    }

    #[test]
    fn default_step_rule() {
        assert!((default_step(&full3(18.0)) - 0.0085).abs() < 1e-15);
        let m = NetworkModel::new(
            vec![NeuronParams::new(1.0, 1.0, 0.0, 1.0)],
            vec![],
            1.0,
            HillResponse::new(5.0, 60.0),
        )
        .unwrap();
        assert_eq!(default_step(&m), 1e-2);
    }

    #[test]
    fn dfe_is_stationary() {
        let m = full3(18.0);
        let dfe = m.dfe();
        let initial = InitialData {
            x0: dfe[..3].to_vec(),
            history: vec![0.0; 3],
        };
        let traj = integrate(&m, &initial, 5.0, None).unwrap();
        for k in 0..traj.len() {
            for (c, v) in traj.state(k).iter().enumerate() {
                assert!((v - dfe[c]).abs() < 1e-10);
            }
        }
        let mid = traj.sample(1.234_567).unwrap();
        for (c, v) in mid.iter().enumerate() {
            assert!((v - dfe[c]).abs() < 1e-10);
        }
    }

    #[test]
    fn lookup_history_and_nodes() {
        let m = full3(18.0);
        let traj = integrate(&m, &InitialData::default_for(&m), 1.0, None).unwrap();
        assert_eq!(traj.history_lookup(1, -0.085).unwrap(), 1.0);
        assert_eq!(traj.times()[0], 0.0);
        assert_eq!(traj.horizon(), 1.0);
        for k in [0, 7, traj.len() - 1] {
            let t = traj.times()[k];
            assert_eq!(traj.history_lookup(2, t).unwrap(), traj.y(k, 2));
            assert_eq!(traj.sample(t).unwrap(), traj.state(k).to_vec());
        }
        assert!(matches!(
            traj.history_lookup(0, 1.5),
            Err(DdeError::Causality { .. })
        ));
        assert!(matches!(traj.sample(1.5), Err(DdeError::OutOfRange { .. })));
        assert!(matches!(
            traj.sample(-0.1),
            Err(DdeError::OutOfRange { .. })
        ));
    }

    #[test]
    fn hermite_reproduces_cubics() {
        // synthetic nodes sampled from a cubic and its derivative
        let cubic = |t: f64| 2.0 - 0.5 * t + 0.3 * t * t - 0.07 * t * t * t;
        let slope = |t: f64| -0.5 + 0.6 * t - 0.21 * t * t;
        let h = 0.25;
        let nodes = 9;
        let mut states = Vec::new();
        let mut derivs = Vec::new();
        for k in 0..nodes {
            let t = k as f64 * h;
            states.extend_from_slice(&[0.0, cubic(t)]);
            derivs.extend_from_slice(&[0.0, slope(t)]);
        }
        for &t in &[0.1, 0.37, 1.0 / 3.0, 1.61, 1.99] {
            let v = lookup(&states, &derivs, 1, h, nodes - 1, &[cubic(0.0)], 1, t).unwrap();
            assert!((v - cubic(t)).abs() < 1e-12, "t={t}");
        }
    }

    #[test]
    fn invalid_inputs() {
        let m = full3(18.0);
        let init = InitialData::default_for(&m);
        assert!(matches!(
            integrate(&m, &init, 0.0, None),
            Err(DdeError::InvalidHorizon(_))
        ));
        assert!(matches!(
            integrate(&m, &init, 1.0, Some(0.2)),
            Err(DdeError::InvalidStep { .. })
        ));
        assert!(matches!(
            integrate(&m, &init, 1.0, Some(-0.01)),
            Err(DdeError::InvalidStep { .. })
        ));
        let bad = InitialData {
            x0: vec![1.0; 3],
            history: vec![-1.0, 0.0, 0.0],
        };
        assert!(integrate(&m, &bad, 1.0, None).is_err());
    }

    #[test]
    fn blow_up_is_reported() {
        // negative degradation makes x grow without bound
        let m = NetworkModel::new(
            vec![NeuronParams::new(1.0, -400.0, 0.0, 1.0)],
            vec![],
            1.0,
            HillResponse::new(5.0, 60.0),
        )
        .unwrap();
        let init = InitialData {
            x0: vec![1.0],
            history: vec![0.0],
        };
        assert!(matches!(
            integrate(&m, &init, 100.0, Some(0.01)),
            Err(DdeError::NonFinite { .. })
        ));
    }

    #[test]
    fn deterministic() {
        let m = full3(13.0);
        let init = InitialData::default_for(&m);
        let a = integrate(&m, &init, 20.0, None).unwrap();
        let b = integrate(&m, &init, 20.0, None).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn zero_delay_uses_current_state() {
        // without delay the system is an ODE; a tiny positive delay should
        // give nearly the same answer
        let build = |delay: f64| {
            NetworkModel::new(
                vec![NeuronParams::new(1500.0, 13.0, delay, 1.8)],
                vec![],
                0.015,
                HillResponse::new(5.0, 60.0),
            )
            .unwrap()
        };
        let init = InitialData {
            x0: vec![100.0],
            history: vec![1.0],
        };
        let a = integrate(&build(0.0), &init, 2.0, Some(1e-3)).unwrap();
        let b = integrate(&build(1e-3), &init, 2.0, Some(1e-3)).unwrap();
        let last = a.len() - 1;
        assert!((a.y(last, 0) - b.y(last, 0)).abs() < 0.05 * a.y(last, 0));
    }
}
