//! Disease-free and endemic equilibria.
//!
//! At an equilibrium the `x` equations give
//! `x_i = K_i β(y_i) / (μ_i + d e_i)` with `e_i = y_i + Σ κ_ji α_{j→i} y_j`,
//! which leaves an n-dimensional system in `y`:
//!
//! ```text
//! G_i(y) = d K_i β(y_i) e_i / (μ_i + d e_i) - α_i y_i = 0
//! ```
//!
//! Endemic roots are searched with damped Newton from a lattice of starts.
//! Newton runs on `G_i(y) / y_i` in `u = ln y`, which has the same positive
//! roots but cannot collapse onto the trivial root `y = 0`.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{AnalysisError, ModelError};
use crate::model::{Feedback, NetworkModel};
use crate::ngm;

/// Residual below which a root counts as converged.
pub const RESIDUAL_TOL: f64 = 1e-10;

const MAX_HALVINGS: usize = 30;
const FD_STEP: f64 = 1e-6;
const LATTICE_CAP_DIM: usize = 6;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EquilibriumKind {
    DiseaseFree,
    Endemic,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EquilibriumResult {
    pub kind: EquilibriumKind,
    /// `(x, y)`; empty when nothing converged.
    pub point: Vec<f64>,
    /// Max-norm of the right-hand side at `point` with `delayed_y = y`.
    pub residual: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Number of distinct converged endemic roots across all starts.
    pub distinct_roots: usize,
    pub starts: usize,
}

/// Search box `[epsilon, upper]^n` for endemic roots.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EeBox {
    pub epsilon: f64,
    pub upper: f64,
    /// True when `epsilon` is a fallback rather than a verified lower face.
    pub heuristic: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EquilibriumOptions {
    pub seed: u64,
    pub max_iterations: usize,
}

impl Default for EquilibriumOptions {
    fn default() -> Self {
        Self {
            seed: ngm::DEFAULT_SEED,
            max_iterations: 100,
        }
    }
}

/// Max-norm of the vector field at a constant state.
pub fn equilibrium_residual<F: Feedback>(model: &NetworkModel<F>, point: &[f64]) -> f64 {
    let n = model.n();
    let mut out = vec![0.0; 2 * n];
    model.rhs(point, &point[n..], &mut out);
    out.iter().fold(0.0, |acc, v| acc.max(v.abs()))
}

pub fn disease_free_equilibrium<F: Feedback>(model: &NetworkModel<F>) -> EquilibriumResult {
    let point = model.dfe();
    let residual = equilibrium_residual(model, &point);
    EquilibriumResult {
        kind: EquilibriumKind::DiseaseFree,
        point,
        residual,
        iterations: 0,
        converged: residual < RESIDUAL_TOL,
        distinct_roots: 0,
        starts: 0,
    }
}

/// Reduced residual `G(y)`.
pub fn reduced_residual<F: Feedback>(model: &NetworkModel<F>, y: &[f64]) -> Vec<f64> {
    let d = model.interaction();
    (0..model.n())
        .map(|i| {
            let p = &model.neurons()[i];
            let e = model.exposure(i, y);
            d * p.production * model.feedback().response(y[i]) * e / (p.degradation + d * e)
                - model.alpha_total(i) * y[i]
        })
        .collect()
}

/// `x` belonging to an equilibrium with infected levels `y`.
pub fn recover_x<F: Feedback>(model: &NetworkModel<F>, y: &[f64]) -> Vec<f64> {
    let d = model.interaction();
    (0..model.n())
        .map(|i| {
            let p = &model.neurons()[i];
            p.production * model.feedback().response(y[i])
                / (p.degradation + d * model.exposure(i, y))
        })
        .collect()
}

/// Box for the endemic search. The upper face is twice the largest
/// a-priori bound; the lower face is found by scanning down from `1e-3`
/// until every `G_i(ε·1) > 0`, which the row-sum certificate guarantees
/// for small enough ε.
pub fn ee_box<F: Feedback>(model: &NetworkModel<F>) -> Result<EeBox, AnalysisError> {
    let report = ngm::r0(model)?;
    let upper = 2.0
        * (0..model.n())
            .map(|i| model.boundedness_bound(i))
            .collect::<Result<Vec<_>, ModelError>>()?
            .into_iter()
            .fold(0.0, f64::max);
    if report.ee_certificate {
        let mut eps = 1e-3;
        while eps > 1e-15 {
            let g = reduced_residual(model, &vec![eps; model.n()]);
            if g.iter().all(|&v| v > 0.0) {
                return Ok(EeBox {
                    epsilon: eps,
                    upper,
                    heuristic: false,
                });
            }
            eps /= 10.0;
        }
    }
    Ok(EeBox {
        epsilon: 1e-8,
        upper,
        heuristic: true,
    })
}

/// Endemic equilibrium by multi-start damped Newton.
///
/// Starts are tried in order: the symmetric start `s·1`, the caller's
/// guess (if any), then a log-spaced lattice with three levels per
/// coordinate (at most `3^6` points). The converged root with the smallest
/// residual is returned. Not converging is a valid answer when `ℛ0 < 1`.
pub fn endemic_equilibrium<F: Feedback>(
    model: &NetworkModel<F>,
    start: Option<&[f64]>,
    options: &EquilibriumOptions,
) -> Result<EquilibriumResult, AnalysisError> {
    let n = model.n();
    let bx = ee_box(model)?;
    let mut starts = vec![vec![symmetric_level(model, &bx); n]];
    if let Some(guess) = start {
        if guess.len() == n && guess.iter().all(|&v| v > 0.0 && v.is_finite()) {
            starts.push(guess.to_vec());
        }
    }
    starts.extend(lattice(n, &bx, options.seed));

    let mut roots: Vec<(Vec<f64>, f64, usize)> = Vec::new();
    let mut total_iterations = 0;
    for s in &starts {
        let (y, iterations) = newton(model, s, options.max_iterations);
        total_iterations += iterations;
        let Some(y) = y else { continue };
        let mut point = recover_x(model, &y);
        point.extend_from_slice(&y);
        let residual = equilibrium_residual(model, &point);
        if residual < RESIDUAL_TOL && y.iter().all(|&v| v > 0.0) {
            roots.push((point, residual, iterations));
        }
    }

    let mut distinct: Vec<&Vec<f64>> = Vec::new();
    for (p, _, _) in &roots {
        let scale = 1.0 + p.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
        if !distinct
            .iter()
            .any(|q| q.iter().zip(p).all(|(a, b)| (a - b).abs() <= 1e-6 * scale))
        {
            distinct.push(p);
        }
    }

    let best = roots
        .iter()
        .enumerate()
        .min_by(|a, b| a.1 .1.total_cmp(&b.1 .1).then(a.0.cmp(&b.0)))
        .map(|(_, r)| r.clone());
    Ok(match best {
        Some((point, residual, iterations)) => EquilibriumResult {
            kind: EquilibriumKind::Endemic,
            point,
            residual,
            iterations,
            converged: true,
            distinct_roots: distinct.len(),
            starts: starts.len(),
        },
        None => EquilibriumResult {
            kind: EquilibriumKind::Endemic,
            point: Vec::new(),
            residual: f64::INFINITY,
            iterations: total_iterations,
            converged: false,
            distinct_roots: 0,
            starts: starts.len(),
        },
    })
}

/// Level `s` where the summed residual `Σ G_i(s·1)` changes sign, or the
/// geometric middle of the box.
fn symmetric_level<F: Feedback>(model: &NetworkModel<F>, bx: &EeBox) -> f64 {
    let total = |s: f64| {
        reduced_residual(model, &vec![s; model.n()])
            .iter()
            .sum::<f64>()
    };
    let (mut lo, mut hi) = (bx.epsilon, bx.upper);
    if total(lo) > 0.0 && total(hi) < 0.0 {
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if total(mid) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    } else {
        (bx.epsilon * bx.upper).sqrt()
    }
}

fn lattice(n: usize, bx: &EeBox, seed: u64) -> Vec<Vec<f64>> {
    let (a, b) = (bx.epsilon.ln(), bx.upper.ln());
    let levels: Vec<f64> = [1.0 / 6.0, 0.5, 5.0 / 6.0]
        .iter()
        .map(|f| (a + f * (b - a)).exp())
        .collect();
    if n <= LATTICE_CAP_DIM {
        let count = 3usize.pow(n as u32);
        (0..count)
            .map(|mut code| {
                (0..n)
                    .map(|_| {
                        let v = levels[code % 3];
                        code /= 3;
                        v
                    })
                    .collect()
            })
            .collect()
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..3usize.pow(LATTICE_CAP_DIM as u32))
            .map(|_| (0..n).map(|_| levels[rng.gen_range(0..3)]).collect())
            .collect()
    }
}

/// Scaled residual `G_i(e^u) / e^{u_i}`.
fn scaled<F: Feedback>(model: &NetworkModel<F>, u: &DVector<f64>) -> DVector<f64> {
    let y: Vec<f64> = u.iter().map(|v| v.exp()).collect();
    let g = reduced_residual(model, &y);
    DVector::from_fn(u.len(), |i, _| g[i] / y[i])
}

fn max_norm(v: &DVector<f64>) -> f64 {
    v.iter().fold(0.0, |a, x| a.max(x.abs()))
}

fn newton<F: Feedback>(
    model: &NetworkModel<F>,
    start: &[f64],
    max_iterations: usize,
) -> (Option<Vec<f64>>, usize) {
    let n = start.len();
    let mut u = DVector::from_iterator(n, start.iter().map(|v| v.ln()));
    let mut h = scaled(model, &u);
    let mut norm = max_norm(&h);
    let scale = 1.0 + model.alpha_totals().iter().fold(0.0_f64, |a, &b| a.max(b));
    for it in 0..max_iterations {
        if norm <= 1e-14 * scale {
            return (Some(u.iter().map(|v| v.exp()).collect()), it);
        }
        // central differences; a step in u is a relative step in y
        let mut jac = DMatrix::zeros(n, n);
        for j in 0..n {
            let mut up = u.clone();
            let mut down = u.clone();
            up[j] += FD_STEP;
            down[j] -= FD_STEP;
            let col = (scaled(model, &up) - scaled(model, &down)) / (2.0 * FD_STEP);
            jac.set_column(j, &col);
        }
        let Some(delta) = jac.lu().solve(&(-&h)) else {
            return (None, it);
        };
        let mut lambda = 1.0;
        let mut accepted = false;
        for _ in 0..=MAX_HALVINGS {
            let trial = &u + &delta * lambda;
            if trial.iter().all(|v| v.is_finite() && v.abs() < 700.0) {
                let th = scaled(model, &trial);
                let tn = max_norm(&th);
                if tn.is_finite() && tn < norm {
                    u = trial;
                    h = th;
                    norm = tn;
                    accepted = true;
                    break;
                }
            }
            lambda *= 0.5;
        }
        if !accepted {
            // stalled: accept only if already at rounding level
            let ok = norm <= 1e-10 * scale;
            return (ok.then(|| u.iter().map(|v| v.exp()).collect()), it + 1);
        }
    }
    (Some(u.iter().map(|v| v.exp()).collect()), max_iterations)
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

    /// Bisection on `K β(y) - α y - μ α / (d (1 + κα)) = 0`.
    fn scalar_oracle(
        k: f64,
        mu: f64,
        alpha: f64,
        kappa_alpha: f64,
        d: f64,
        hill: HillResponse,
    ) -> f64 {
        let g = |y: f64| k * hill.beta(y) - alpha * y - mu * alpha / (d * (1.0 + kappa_alpha));
        let (mut lo, mut hi) = (0.0, 1e4);
        assert!(g(lo) > 0.0 && g(hi) < 0.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if g(mid) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    #[test]
    fn homogeneous_endemic_point_matches_oracle() {
        let m = full3(13.0);
        let res = endemic_equilibrium(&m, None, &EquilibriumOptions::default()).unwrap();
        assert!(res.converged);
        assert_eq!(res.kind, EquilibriumKind::Endemic);
        assert!(res.residual < RESIDUAL_TOL, "{}", res.residual);
        let y_star = scalar_oracle(1500.0, 13.0, 1.8, 0.18, 0.015, HillResponse::new(5.0, 60.0));
        for i in 0..3 {
            assert!(
                (res.point[3 + i] - y_star).abs() < 1e-8,
                "{} vs {y_star}",
                res.point[3 + i]
            );
        }
        let ys = &res.point[3..];
        let spread = ys.iter().cloned().fold(f64::MIN, f64::max)
            - ys.iter().cloned().fold(f64::MAX, f64::min);
        assert!(spread < 1e-8);
        assert!(equilibrium_residual(&m, &res.point) < RESIDUAL_TOL);

        // Newton alone, from an asymmetric start, lands on the same point
        let (y, iterations) = newton(&m, &[10.0, 40.0, 70.0], 100);
        let y = y.expect("newton converges");
        assert!(iterations > 0);
        assert!(y.iter().all(|v| (v - y_star).abs() < 1e-8));
    }

    #[test]
    fn no_endemic_point_below_threshold() {
        let m = full3(18.0);
        let res = endemic_equilibrium(&m, None, &EquilibriumOptions::default()).unwrap();
        assert!(!res.converged);
        assert!(res.point.is_empty());
        assert_eq!(res.starts, 28);
    }

    #[test]
    fn box_faces() {
        let m = full3(13.0);
        let bx = ee_box(&m).unwrap();
        assert!(!bx.heuristic);
        let g = reduced_residual(&m, &[bx.epsilon; 3]);
        assert!(g.iter().all(|&v| v > 0.0));
        let res = endemic_equilibrium(&m, None, &EquilibriumOptions::default()).unwrap();
        assert!(res.point[3..].iter().all(|&y| y <= bx.upper));

        let bx = ee_box(&full3(18.0)).unwrap();
        assert!(bx.heuristic);
        assert_eq!(bx.epsilon, 1e-8);
    }

    #[test]
    fn dfe_result() {
        let m = full3(18.0);
        let res = disease_free_equilibrium(&m);
        assert!(res.converged);
        assert_eq!(res.kind, EquilibriumKind::DiseaseFree);
        assert!(res.residual < 1e-12);
    }

    #[test]
    fn caller_start_is_used() {
        let m = full3(13.0);
        let res = endemic_equilibrium(
            &m,
            Some(&[30.0, 40.0, 50.0]),
            &EquilibriumOptions::default(),
        )
        .unwrap();
        assert_eq!(res.starts, 29);
        assert!(res.converged);
    }

    #[test]
    fn sampled_lattice_for_large_networks() {
        let bx = EeBox {
            epsilon: 1e-3,
            upper: 1e3,
            heuristic: false,
        };
        let a = lattice(8, &bx, 7);
        assert_eq!(a.len(), 729);
        assert_eq!(a, lattice(8, &bx, 7));
        assert_eq!(lattice(2, &bx, 7).len(), 9);
    }

    #[test]
    fn zero_outflow_rejected() {
        let m = NetworkModel::new(
            vec![NeuronParams::new(1.0, 1.0, 0.1, 0.0); 2],
            vec![Edge::new(1, 0, 1.0, 0.1)],
            1.0,
            HillResponse::new(5.0, 60.0),
        )
        .unwrap();
        assert!(endemic_equilibrium(&m, None, &EquilibriumOptions::default()).is_err());
    }
}
