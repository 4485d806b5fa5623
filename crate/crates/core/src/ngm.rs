//! Next-generation matrix and the basic reproduction number.
//!
//! At the disease-free equilibrium the infected block of the Jacobian
//! splits as `M22 - V22` with `V22 = diag(α_i)`. The next-generation matrix
//! used here is `F = V22⁻¹ M22`:
//!
//! ```text
//! F_ii = R_0i = d K_i / (μ_i α_i)
//! F_ij = κ_ji α_{j→i} R_0i      (j ≠ i, zero without an edge j → i)
//! ```
//!
//! `M22 V22⁻¹` is similar to `F`, so both give the same spectral radius.

use nalgebra::DMatrix;
use petgraph::algo::tarjan_scc;
use petgraph::graph::DiGraph;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{ModelError, NgmError};
use crate::model::{Feedback, NetworkModel};

/// Seed for the power-iteration start vector.
pub const DEFAULT_SEED: u64 = 0x0050_5249_4f4e_4554;

const RAYLEIGH_TOL: f64 = 1e-12;
const MAX_ITERATIONS: usize = 100_000;

/// `F` together with the factors it was built from.
#[derive(Debug, Clone, PartialEq)]
pub struct NextGenerationMatrix {
    pub local_r0: Vec<f64>,
    pub f: DMatrix<f64>,
    pub m22: DMatrix<f64>,
    pub v22: DMatrix<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NgmReport {
    pub local_r0: Vec<f64>,
    pub f: DMatrix<f64>,
    pub m22: DMatrix<f64>,
    pub v22: DMatrix<f64>,
    /// `ℛ0 = ρ(F)`.
    pub r0: f64,
    pub row_sums: Vec<f64>,
    pub min_row_sum: f64,
    pub max_row_sum: f64,
    /// Minimum row sum strictly above 1, which guarantees an endemic
    /// equilibrium exists.
    pub ee_certificate: bool,
}

/// `R_0i = d K_i / (μ_i α_i)`.
pub fn local_r0<F: Feedback>(model: &NetworkModel<F>, i: usize) -> Result<f64, NgmError> {
    let alpha = model.alpha_total(i);
    if alpha == 0.0 {
        return Err(ModelError::ZeroOutflow { neuron: i + 1 }.into());
    }
    let p = &model.neurons()[i];
    Ok(model.interaction() * p.production / (p.degradation * alpha))
}

pub fn ngm_matrix<F: Feedback>(model: &NetworkModel<F>) -> Result<NextGenerationMatrix, NgmError> {
    let n = model.n();
    let local = (0..n)
        .map(|i| local_r0(model, i))
        .collect::<Result<Vec<_>, _>>()?;
    let mut f = DMatrix::zeros(n, n);
    let mut m22 = DMatrix::zeros(n, n);
    let v22 = DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(model.alpha_totals()));
    for i in 0..n {
        let p = &model.neurons()[i];
        let gain = model.interaction() * p.production / p.degradation;
        f[(i, i)] = local[i];
        m22[(i, i)] = gain;
        for &(j, coupling) in model.incoming(i) {
            f[(i, j)] = coupling * local[i];
            m22[(i, j)] = coupling * gain;
        }
    }
    Ok(NextGenerationMatrix {
        local_r0: local,
        f,
        m22,
        v22,
    })
}

pub fn r0<F: Feedback>(model: &NetworkModel<F>) -> Result<NgmReport, NgmError> {
    r0_with_seed(model, DEFAULT_SEED)
}

pub fn r0_with_seed<F: Feedback>(
    model: &NetworkModel<F>,
    seed: u64,
) -> Result<NgmReport, NgmError> {
    let NextGenerationMatrix {
        local_r0,
        f,
        m22,
        v22,
    } = ngm_matrix(model)?;
    let r0 = spectral_radius_with_seed(&f, seed)?;
    let row_sums: Vec<f64> = f.row_iter().map(|r| r.sum()).collect();
    let min_row_sum = row_sums.iter().copied().fold(f64::INFINITY, f64::min);
    let max_row_sum = row_sums.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(NgmReport {
        local_r0,
        f,
        m22,
        v22,
        r0,
        row_sums,
        min_row_sum,
        max_row_sum,
        ee_certificate: min_row_sum > 1.0,
    })
}

pub fn spectral_radius(f: &DMatrix<f64>) -> Result<f64, NgmError> {
    spectral_radius_with_seed(f, DEFAULT_SEED)
}

/// Perron root of a nonnegative square matrix.
///
/// Triangular matrices return their largest diagonal entry. Otherwise the
/// matrix is split into strongly connected components of its nonzero
/// pattern and each irreducible block is handled by power iteration.
pub fn spectral_radius_with_seed(f: &DMatrix<f64>, seed: u64) -> Result<f64, NgmError> {
    let (rows, cols) = f.shape();
    if rows != cols {
        return Err(NgmError::NotSquare { rows, cols });
    }
    for row in 0..rows {
        for col in 0..cols {
            let value = f[(row, col)];
            if !(value.is_finite() && value >= 0.0) {
                return Err(NgmError::InvalidEntry { row, col, value });
            }
        }
    }
    let n = rows;
    if n == 0 {
        return Ok(0.0);
    }
    if is_triangular(f) {
        return Ok(max_diagonal(f));
    }

    let mut graph = DiGraph::<usize, ()>::with_capacity(n, n * n);
    let nodes: Vec<_> = (0..n).map(|i| graph.add_node(i)).collect();
    for i in 0..n {
        for j in 0..n {
            if i != j && f[(i, j)] != 0.0 {
                graph.add_edge(nodes[i], nodes[j], ());
            }
        }
    }
    let components = tarjan_scc(&graph);
    if components.len() == 1 {
        return power_iteration(f, seed);
    }
    let mut rho: f64 = 0.0;
    for component in components {
        let idx: Vec<usize> = component.iter().map(|&v| graph[v]).collect();
        let value = if idx.len() == 1 {
            f[(idx[0], idx[0])]
        } else {
            let sub = DMatrix::from_fn(idx.len(), idx.len(), |r, c| f[(idx[r], idx[c])]);
            power_iteration(&sub, seed)?
        };
        rho = rho.max(value);
    }
    Ok(rho)
}

fn is_triangular(f: &DMatrix<f64>) -> bool {
    let n = f.nrows();
    let lower = (0..n).all(|i| (i + 1..n).all(|j| f[(i, j)] == 0.0));
    let upper = (0..n).all(|i| (0..i).all(|j| f[(i, j)] == 0.0));
    lower || upper
}

fn max_diagonal(f: &DMatrix<f64>) -> f64 {
    f.diagonal().iter().copied().fold(0.0, f64::max)
}

fn power_iteration(f: &DMatrix<f64>, seed: u64) -> Result<f64, NgmError> {
    let n = f.nrows();
    // A zero diagonal entry can make an irreducible matrix periodic; a
    // positive shift makes it primitive without moving the Perron vector.
    let shift = if f.diagonal().iter().any(|&d| d == 0.0) {
        0.5 * f.row_iter().map(|r| r.sum()).fold(0.0, f64::max)
    } else {
        0.0
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x = nalgebra::DVector::from_fn(n, |_, _| rng.gen_range(0.5..1.5));
    x /= x.norm();
    let mut previous = f64::NAN;
    for _ in 0..MAX_ITERATIONS {
        let y = f * &x + &x * shift;
        let rayleigh = x.dot(&y);
        let norm = y.norm();
        if norm == 0.0 {
            return Ok(0.0);
        }
        if (rayleigh - previous).abs() < RAYLEIGH_TOL * rayleigh.abs().max(1.0) {
            return Ok((rayleigh - shift).max(0.0));
        }
        previous = rayleigh;
        x = y / norm;
    }
    Err(NgmError::NotConverged {
        iterations: MAX_ITERATIONS,
    })
}

/// Both eigenvalues `λ±` of the two-neuron `F`, largest first.
pub fn two_neuron_lambda<F: Feedback>(model: &NetworkModel<F>) -> Result<(f64, f64), NgmError> {
    if model.n() != 2 {
        return Err(NgmError::NotTwoNeurons { n: model.n() });
    }
    let r01 = local_r0(model, 0)?;
    let r02 = local_r0(model, 1)?;
    let coupling = |i: usize| model.incoming(i).iter().map(|&(_, c)| c).sum::<f64>();
    // product of the off-diagonal entries of F
    let cross = coupling(0) * coupling(1) * r01 * r02;
    let root = ((r01 - r02).powi(2) + 4.0 * cross).sqrt();
    Ok(((r01 + r02 + root) / 2.0, (r01 + r02 - root) / 2.0))
}

/// ℛ0 of a fully connected, fully homogeneous network with
/// `α_{i→j} = α/(n-1)`: `R0 (κα + 1)`, independent of `n`.
pub fn homogeneous_r0(local_r0: f64, kappa: f64, alpha: f64) -> f64 {
    local_r0 * (kappa * alpha + 1.0)
}
