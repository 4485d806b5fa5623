//! The delayed n-neuron prion model.
//!
//! Each neuron `i` carries a healthy protein concentration `x_i` and a
//! misfolded concentration `y_i`:
//!
//! ```text
//! x_i' = K_i β(y_i(t - T_i)) - μ_i x_i - d x_i (y_i + Σ_j κ_ji α_{j→i} y_j)
//! y_i' =                       d x_i (y_i + Σ_j κ_ji α_{j→i} y_j) - α_i y_i
//! ```
//!
//! where the sum runs over incoming edges and `α_i` is the total outflow of
//! neuron `i` (outgoing edge flows plus a sink term). States are laid out as
//! `(x_1, …, x_n, y_1, …, y_n)`.

use std::fmt;

use crate::error::ModelError;

/// Production feedback. Implementations must satisfy `response(0) = 1`,
/// have zero slope at the origin and decrease on `[0, ∞)`.
pub trait Feedback: fmt::Debug + Clone + Send + Sync {
    fn response(&self, y: f64) -> f64;

    /// Parameter violations, reported by [`NetworkModel::validate`].
    fn violations(&self) -> Vec<Violation> {
        Vec::new()
    }
}

/// Decreasing Hill function `1 / (1 + (y / y_c)^p)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HillResponse {
    /// Sensitivity exponent `p`.
    pub exponent: f64,
    /// Stress threshold `y_c`, where the response is one half.
    pub threshold: f64,
}

impl HillResponse {
    pub fn new(exponent: f64, threshold: f64) -> Self {
        Self {
            exponent,
            threshold,
        }
    }

    pub fn beta(&self, y: f64) -> f64 {
        1.0 / (1.0 + (y / self.threshold).powf(self.exponent))
    }
}

impl Feedback for HillResponse {
    fn response(&self, y: f64) -> f64 {
        self.beta(y)
    }

    fn violations(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        if !(self.exponent.is_finite() && self.exponent > 0.0) {
            out.push(Violation::new("p", "p must be finite and > 0"));
        }
        if !(self.threshold.is_finite() && self.threshold > 0.0) {
            out.push(Violation::new("y_c", "y_c must be finite and > 0"));
        }
        out
    }
}

/// Per-neuron parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NeuronParams {
    /// Production rate `K`.
    pub production: f64,
    /// Degradation rate `μ`.
    pub degradation: f64,
    /// Synthesis delay `T`.
    pub delay: f64,
    /// Outflow that reaches no other neuron.
    pub alpha_sink: f64,
}

impl NeuronParams {
    pub fn new(production: f64, degradation: f64, delay: f64, alpha_sink: f64) -> Self {
        Self {
            production,
            degradation,
            delay,
            alpha_sink,
        }
    }
}

/// Directed prion flow `from → to` (0-based indices).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge {
    pub from: usize,
    pub to: usize,
    /// Flow rate `α_{from→to}`.
    pub alpha: f64,
    /// Cross-species interaction factor `κ_{from,to}`.
    pub kappa: f64,
}

impl Edge {
    pub fn new(from: usize, to: usize, alpha: f64, kappa: f64) -> Self {
        Self {
            from,
            to,
            alpha,
            kappa,
        }
    }
}

/// A failed model constraint.
#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub field: String,
    pub message: String,
}

impl Violation {
    pub fn new(field: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            field: field.into(),
            message: message.into(),
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.message)
    }
}

/// Immutable network description.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkModel<F: Feedback = HillResponse> {
    neurons: Vec<NeuronParams>,
    edges: Vec<Edge>,
    interaction: f64,
    feedback: F,
    // (source, κ_ji α_{j→i}) per target neuron
    incoming: Vec<Vec<(usize, f64)>>,
    alpha_total: Vec<f64>,
}

impl<F: Feedback> NetworkModel<F> {
    /// Builds a model, rejecting empty networks, out-of-range indices,
    /// self-edges and duplicate ordered pairs. Numeric ranges are checked
    /// separately by [`validate`](Self::validate).
    pub fn new(
        neurons: Vec<NeuronParams>,
        edges: Vec<Edge>,
        interaction: f64,
        feedback: F,
    ) -> Result<Self, ModelError> {
        let n = neurons.len();
        if n == 0 {
            return Err(ModelError::Empty);
        }
        let mut seen = std::collections::HashSet::new();
        for (k, e) in edges.iter().enumerate() {
            for index in [e.from, e.to] {
                if index >= n {
                    return Err(ModelError::IndexOutOfRange { edge: k, index, n });
                }
            }
            if e.from == e.to {
                return Err(ModelError::SelfEdge { neuron: e.from });
            }
            if !seen.insert((e.from, e.to)) {
                return Err(ModelError::DuplicateEdge {
                    from: e.from,
                    to: e.to,
                });
            }
        }
        let mut incoming = vec![Vec::new(); n];
        let mut alpha_total: Vec<f64> = neurons.iter().map(|p| p.alpha_sink).collect();
        for e in &edges {
            incoming[e.to].push((e.from, e.kappa * e.alpha));
            alpha_total[e.from] += e.alpha;
        }
        Ok(Self {
            neurons,
            edges,
            interaction,
            feedback,
            incoming,
            alpha_total,
        })
    }

    pub fn n(&self) -> usize {
        self.neurons.len()
    }

    pub fn neurons(&self) -> &[NeuronParams] {
        &self.neurons
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    /// Interaction force `d`.
    pub fn interaction(&self) -> f64 {
        self.interaction
    }

    pub fn feedback(&self) -> &F {
        &self.feedback
    }

    /// Incoming couplings of neuron `i` as `(source, κ_ji α_{j→i})`.
    pub fn incoming(&self, i: usize) -> &[(usize, f64)] {
        &self.incoming[i]
    }

    /// `α_i`: sink plus all outgoing edge flows.
    pub fn alpha_total(&self, i: usize) -> f64 {
        self.alpha_total[i]
    }

    pub fn alpha_totals(&self) -> &[f64] {
        &self.alpha_total
    }

    pub fn max_delay(&self) -> f64 {
        self.neurons.iter().map(|p| p.delay).fold(0.0, f64::max)
    }

    /// Smallest strictly positive delay, if any.
    pub fn min_positive_delay(&self) -> Option<f64> {
        self.neurons
            .iter()
            .map(|p| p.delay)
            .filter(|&t| t > 0.0)
            .reduce(f64::min)
    }

    /// Force of infection seen by neuron `i`: `y_i + Σ κ_ji α_{j→i} y_j`.
    pub fn exposure(&self, i: usize, y: &[f64]) -> f64 {
        self.incoming[i]
            .iter()
            .fold(y[i], |acc, &(j, c)| acc + c * y[j])
    }

    /// Time derivative of `state = (x, y)` given delayed values `y_i(t - T_i)`.
    pub fn rhs(&self, state: &[f64], delayed_y: &[f64], out: &mut [f64]) {
        let n = self.n();
        let (x, y) = state.split_at(n);
        let (dx, dy) = out.split_at_mut(n);
        for i in 0..n {
            let p = &self.neurons[i];
            let infection = self.interaction * x[i] * self.exposure(i, y);
            dx[i] = p.production * self.feedback.response(delayed_y[i])
                - p.degradation * x[i]
                - infection;
            dy[i] = infection - self.alpha_total[i] * y[i];
        }
    }

    /// Disease-free equilibrium `(K_1/μ_1, …, K_n/μ_n, 0, …, 0)`.
    pub fn dfe(&self) -> Vec<f64> {
        let n = self.n();
        let mut state = vec![0.0; 2 * n];
        for (i, p) in self.neurons.iter().enumerate() {
            state[i] = p.production / p.degradation;
        }
        state
    }

    /// Asymptotic bound on `x_i + y_i`: `K_i / min(μ_i, α_i)`.
    pub fn boundedness_bound(&self, i: usize) -> Result<f64, ModelError> {
        let alpha = self.alpha_total[i];
        if alpha <= 0.0 {
            return Err(ModelError::ZeroOutflow { neuron: i + 1 });
        }
        let p = &self.neurons[i];
        Ok(p.production * self.feedback.response(0.0) / p.degradation.min(alpha))
    }

    /// Lists every violated constraint. Strict mode also requires the
    /// incoming κ of each neuron to sum to at most 1 and every `α_i > 0`.
    /// Neuron numbers in messages are 1-based.
    pub fn validate(&self, strict: bool) -> Vec<Violation> {
        let mut out = Vec::new();
        if !(self.interaction.is_finite() && self.interaction > 0.0) {
            out.push(Violation::new("d", "d must be finite and > 0"));
        }
        out.extend(self.feedback.violations());
        for (i, p) in self.neurons.iter().enumerate() {
            let id = i + 1;
            if !(p.production.is_finite() && p.production > 0.0) {
                out.push(Violation::new(
                    format!("neuron {id}.K"),
                    "K must be finite and > 0",
                ));
            }
            if !(p.degradation.is_finite() && p.degradation > 0.0) {
                out.push(Violation::new(
                    format!("neuron {id}.mu"),
                    "mu must be finite and > 0",
                ));
            }
            if !(p.delay.is_finite() && p.delay >= 0.0) {
                out.push(Violation::new(
                    format!("neuron {id}.T"),
                    "T must be finite and >= 0",
                ));
            }
            if !(p.alpha_sink.is_finite() && p.alpha_sink >= 0.0) {
                out.push(Violation::new(
                    format!("neuron {id}.alpha_sink"),
                    "alpha_sink must be finite and >= 0",
                ));
            }
        }
        for e in &self.edges {
            let name = format!("edge {} -> {}", e.from + 1, e.to + 1);
            if !(e.alpha.is_finite() && e.alpha >= 0.0) {
                out.push(Violation::new(
                    format!("{name}.alpha"),
                    "alpha must be finite and >= 0",
                ));
            }
            if !(e.kappa.is_finite() && (0.0..=1.0).contains(&e.kappa)) {
                out.push(Violation::new(
                    format!("{name}.kappa"),
                    format!("kappa out of [0,1] (got {})", e.kappa),
                ));
            }
        }
        if strict {
            for i in 0..self.n() {
                let id = i + 1;
                let kappa_in: f64 = self
                    .edges
                    .iter()
                    .filter(|e| e.to == i)
                    .map(|e| e.kappa)
                    .sum();
                if kappa_in > 1.0 {
                    out.push(Violation::new(
                        format!("neuron {id}"),
                        format!("incoming kappa sum {kappa_in} exceeds 1"),
                    ));
                }
                if self.alpha_total[i].is_nan() || self.alpha_total[i] <= 0.0 {
                    out.push(Violation::new(
                        format!("neuron {id}"),
                        format!("alpha_total({id}) = 0"),
                    ));
                }
            }
        }
        out
    }

    /// Copy of the model with κ replaced on the selected edges.
    pub fn with_kappa(&self, kappa: f64, edges: &EdgeSelection) -> Self {
        let new_edges = self
            .edges
            .iter()
            .enumerate()
            .map(|(k, e)| {
                if edges.contains(k) {
                    Edge { kappa, ..*e }
                } else {
                    *e
                }
            })
            .collect();
        Self::new(
            self.neurons.clone(),
            new_edges,
            self.interaction,
            self.feedback.clone(),
        )
        .expect("edge structure unchanged")
    }
}

/// Which edges a κ override applies to.
#[derive(Debug, Clone, PartialEq, Default)]
pub enum EdgeSelection {
    #[default]
    All,
    /// Edge positions in [`NetworkModel::edges`].
    Only(Vec<usize>),
}

impl EdgeSelection {
    pub fn contains(&self, edge: usize) -> bool {
        match self {
            EdgeSelection::All => true,
            EdgeSelection::Only(list) => list.contains(&edge),
        }
    }
}

/// Initial state: `x_i(0)` and a constant history `y_i(θ) = φ_i` on `[-T, 0]`.
#[derive(Debug, Clone, PartialEq)]
pub struct InitialData {
    pub x0: Vec<f64>,
    pub history: Vec<f64>,
}

impl InitialData {
    pub const DEFAULT_SEED_LEVEL: f64 = 1.0;

    /// `x_i(0) = K_i/μ_i` and `φ_i ≡ 1`.
    pub fn default_for<F: Feedback>(model: &NetworkModel<F>) -> Self {
        let n = model.n();
        let dfe = model.dfe();
        Self {
            x0: dfe[..n].to_vec(),
            history: vec![Self::DEFAULT_SEED_LEVEL; n],
        }
    }

    pub fn check(&self, n: usize) -> Result<(), ModelError> {
        if self.x0.len() != n || self.history.len() != n {
            return Err(ModelError::InitialData(format!(
                "expected {n} values for x0 and history, got {} and {}",
                self.x0.len(),
                self.history.len()
            )));
        }
        if self
            .x0
            .iter()
            .chain(&self.history)
            .any(|v| !(v.is_finite() && *v >= 0.0))
        {
            return Err(ModelError::InitialData(
                "values must be finite and nonnegative".into(),
            ));
        }
        Ok(())
    }

    /// State at `t = 0`.
    pub fn state(&self) -> Vec<f64> {
        self.x0.iter().chain(&self.history).copied().collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

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
    fn hill_values() {
        let h = HillResponse::new(5.0, 60.0);
        assert_eq!(h.beta(0.0), 1.0);
        assert_eq!(h.beta(60.0), 0.5);
        assert!((h.beta(120.0) - 1.0 / 33.0).abs() < 1e-15);
    }

    #[test]
    fn alpha_total_sums_edges_and_sink() {
        let m = full3(18.0);
        assert!((m.alpha_total(0) - 1.8).abs() < 1e-15);

        let neurons = vec![
            NeuronParams::new(1800.0, 50.0, 0.15, 2.7),
            NeuronParams::new(1800.0, 50.0, 0.15, 2.5),
        ];
        let m = NetworkModel::new(
            neurons,
            vec![Edge::new(0, 1, 0.9, 0.071)],
            0.15,
            HillResponse::new(10.0, 60.0),
        )
        .unwrap();
        assert!((m.alpha_total(0) - 3.6).abs() < 1e-15);
        assert_eq!(m.alpha_total(1), 2.5);
    }

    #[test]
    fn structural_errors() {
        let n = vec![NeuronParams::new(1.0, 1.0, 0.0, 1.0); 2];
        let h = HillResponse::new(5.0, 60.0);
        assert_eq!(
            NetworkModel::new(n.clone(), vec![Edge::new(1, 1, 1.0, 0.1)], 1.0, h).unwrap_err(),
            ModelError::SelfEdge { neuron: 1 }
        );
        assert!(matches!(
            NetworkModel::new(n.clone(), vec![Edge::new(0, 2, 1.0, 0.1)], 1.0, h),
            Err(ModelError::IndexOutOfRange { .. })
        ));
        assert!(matches!(
            NetworkModel::new(
                n.clone(),
                vec![Edge::new(0, 1, 1.0, 0.1), Edge::new(0, 1, 2.0, 0.1)],
                1.0,
                h
            ),
            Err(ModelError::DuplicateEdge { .. })
        ));
        assert_eq!(
            NetworkModel::new(vec![], vec![], 1.0, h).unwrap_err(),
            ModelError::Empty
        );
    }

    #[test]
    fn dfe_values_and_fixed_point() {
        let m = full3(18.0);
        let dfe = m.dfe();
        for i in 0..3 {
            assert!((dfe[i] - 1500.0 / 18.0).abs() < 1e-12);
            assert_eq!(dfe[3 + i], 0.0);
        }
        let mut out = vec![1.0; 6];
        m.rhs(&dfe, &[0.0; 3], &mut out);
        assert!(out.iter().all(|v| v.abs() < 1e-12), "{out:?}");

        let dfe13 = full3(13.0).dfe();
        assert!((dfe13[0] - 115.384_615_384_615_38).abs() < 1e-10);
    }

    #[test]
    fn zero_infection_rhs() {
        let m = full3(18.0);
        let state = [3.0, 40.0, 100.0, 0.0, 0.0, 0.0];
        let mut out = [0.0; 6];
        m.rhs(&state, &[0.0; 3], &mut out);
        for i in 0..3 {
            assert!((out[i] - (1500.0 - 18.0 * state[i])).abs() < 1e-12);
            assert_eq!(out[3 + i], 0.0);
        }
    }

    #[test]
    fn validation() {
        assert!(full3(18.0).validate(true).is_empty());

        let mut m = full3(18.0);
        let mut edges = m.edges().to_vec();
        edges[0].kappa = 1.2;
        m = NetworkModel::new(m.neurons().to_vec(), edges, 0.015, *m.feedback()).unwrap();
        let v = m.validate(false);
        assert_eq!(v.len(), 1);
        assert!(v[0].message.contains("kappa out of [0,1]"));

        // two neurons, neuron 1 has no outflow at all
        let neurons = vec![NeuronParams::new(1.0, 1.0, 0.1, 0.0); 2];
        let m = NetworkModel::new(
            neurons,
            vec![Edge::new(1, 0, 1.0, 0.5)],
            1.0,
            HillResponse::new(5.0, 60.0),
        )
        .unwrap();
        assert!(m.validate(false).is_empty());
        let v = m.validate(true);
        assert!(
            v.iter().any(|v| v.message.contains("alpha_total(1) = 0")),
            "{v:?}"
        );
    }

    #[test]
    fn strict_kappa_sum() {
        let neurons = vec![NeuronParams::new(1.0, 1.0, 0.1, 1.0); 3];
        let edges = vec![Edge::new(0, 2, 1.0, 0.6), Edge::new(1, 2, 1.0, 0.6)];
        let m = NetworkModel::new(neurons, edges, 1.0, HillResponse::new(5.0, 60.0)).unwrap();
        assert!(m.validate(false).is_empty());
        let v = m.validate(true);
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].field, "neuron 3");
    }

    #[test]
    fn bounds() {
        let m = full3(18.0);
        assert!((m.boundedness_bound(0).unwrap() - 1500.0 / 1.8).abs() < 1e-9);

        let m = NetworkModel::new(
            vec![NeuronParams::new(1500.0, 20.0, 0.15, 2.5)],
            vec![],
            0.15,
            HillResponse::new(10.0, 50.0),
        )
        .unwrap();
        assert!((m.boundedness_bound(0).unwrap() - 600.0).abs() < 1e-12);

        let m = NetworkModel::new(
            vec![NeuronParams::new(30.0, 3.0, 0.15, 3.0)],
            vec![],
            0.15,
            HillResponse::new(10.0, 50.0),
        )
        .unwrap();
        assert_eq!(m.boundedness_bound(0).unwrap(), 10.0);

        let m = NetworkModel::new(
            vec![NeuronParams::new(30.0, 3.0, 0.15, 0.0)],
            vec![],
            0.15,
            HillResponse::new(10.0, 50.0),
        )
        .unwrap();
        assert_eq!(
            m.boundedness_bound(0).unwrap_err(),
            ModelError::ZeroOutflow { neuron: 1 }
        );
    }

    #[test]
    fn with_kappa_rebuilds_couplings() {
        let m = full3(18.0).with_kappa(0.5, &EdgeSelection::Only(vec![0]));
        assert_eq!(m.edges()[0].kappa, 0.5);
        assert_eq!(m.edges()[1].kappa, 0.1);
        // edge 0 is 1 -> 2
        assert!(m.incoming(1).contains(&(0, 0.45)));
    }

    fn random_model() -> impl Strategy<Value = (NetworkModel, Vec<f64>, Vec<f64>)> {
        (2usize..6).prop_flat_map(|n| {
            (
                prop::collection::vec((1.0..2000.0f64, 0.1..60.0f64, 0.0..3.0f64), n),
                prop::collection::vec((0.0..3.0f64, 0.0..1.0f64), n * n),
                0.001..0.5f64,
                1.0..12.0f64,
                1.0..100.0f64,
                prop::collection::vec(0.0..500.0f64, 2 * n),
                prop::collection::vec(0.0..500.0f64, n),
            )
                .prop_map(move |(np, ep, d, p, yc, state, delayed)| {
                    let neurons = np
                        .into_iter()
                        .map(|(k, mu, s)| NeuronParams::new(k, mu, 0.1, s))
                        .collect();
                    let mut edges = Vec::new();
                    for i in 0..n {
                        for j in 0..n {
                            let (a, k) = ep[i * n + j];
                            if i != j && a > 1.0 {
                                edges.push(Edge::new(i, j, a, k));
                            }
                        }
                    }
                    let m = NetworkModel::new(neurons, edges, d, HillResponse::new(p, yc)).unwrap();
                    (m, state, delayed)
                })
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]

        #[test]
        fn conservation_identity((m, state, delayed) in random_model()) {
            let n = m.n();
            let mut out = vec![0.0; 2 * n];
            m.rhs(&state, &delayed, &mut out);
            for i in 0..n {
                let p = &m.neurons()[i];
                // independent evaluation of the summed equation
                let beta = 1.0 / (1.0 + (delayed[i] / m.feedback().threshold).powf(m.feedback().exponent));
                let expected = p.production * beta - p.degradation * state[i] - m.alpha_total(i) * state[n + i];
                let lhs = out[i] + out[n + i];
                let scale = p.production + p.degradation * state[i] + m.alpha_total(i) * state[n + i]
                    + m.interaction() * state[i] * m.exposure(i, &state[n..]);
                prop_assert!((lhs - expected).abs() <= 1e-12 * scale.max(1.0));
            }
        }

        #[test]
        fn quasi_positivity((m, mut state, delayed) in random_model(), which in 0usize..6) {
            let n = m.n();
            let i = which % n;
            let mut out = vec![0.0; 2 * n];
            state[n + i] = 0.0;
            m.rhs(&state, &delayed, &mut out);
            prop_assert!(out[n + i] >= 0.0);
            state[i] = 0.0;
            m.rhs(&state, &delayed, &mut out);
            let expected = m.neurons()[i].production * m.feedback().beta(delayed[i]);
            prop_assert_eq!(out[i], expected);
            prop_assert!(out[i] > 0.0);
        }

        #[test]
        fn beta_monotone(a in 0.0..1e3f64, b in 0.0..1e3f64, p in 0.5..12.0f64, yc in 1.0..100.0f64) {
            prop_assume!((a - b).abs() > 1e-6 * (a + b).max(1.0));
            let h = HillResponse::new(p, yc);
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            // strict until both saturate to 0 in floating point
            prop_assert!(h.beta(lo) >= h.beta(hi));
            if h.beta(hi) > 1e-12 && h.beta(lo) < 1.0 - 1e-12 {
                prop_assert!(h.beta(lo) > h.beta(hi));
            }
        }
    }
}
