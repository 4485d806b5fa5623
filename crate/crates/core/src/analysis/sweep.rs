//! κ sweeps: per-neuron late-window amplitudes over a grid, and
//! bisection-refined oscillation onsets.

use rayon::prelude::*;

use super::asymptotics::{classify_until, ClassifyOptions};
use crate::dde::integrate;
use crate::error::AnalysisError;
use crate::model::{EdgeSelection, Feedback, InitialData, NetworkModel};

#[derive(Debug, Clone, PartialEq)]
pub struct SweepOptions {
    pub from: f64,
    pub to: f64,
    pub points: usize,
    pub horizon: f64,
    pub step: Option<f64>,
    pub edges: EdgeSelection,
    pub classify: ClassifyOptions,
    /// Bracket width at which onset bisection stops.
    pub refine_width: f64,
    /// Worker threads; `None` uses the global rayon pool.
    pub threads: Option<usize>,
    /// Defaults to [`InitialData::default_for`].
    pub initial: Option<InitialData>,
}

impl SweepOptions {
    pub fn new(from: f64, to: f64, points: usize) -> Self {
        Self {
            from,
            to,
            points,
            horizon: 200.0,
            step: None,
            edges: EdgeSelection::All,
            classify: ClassifyOptions::default(),
            refine_width: 1e-4,
            threads: None,
            initial: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    pub kappa: f64,
    pub amplitude: Vec<f64>,
    pub mean: Vec<f64>,
    pub min: Vec<f64>,
    pub max: Vec<f64>,
    pub oscillating: Vec<bool>,
    /// Integration failure at this grid value; the other fields are empty.
    pub error: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Onset {
    /// Midpoint of the final bracket.
    pub value: f64,
    pub bracket: (f64, f64),
    /// Already oscillating at the first grid value.
    pub at_lower_bound: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub parameter: &'static str,
    pub values: Vec<f64>,
    pub points: Vec<SweepPoint>,
    /// Per neuron; `None` when the neuron never oscillates on the grid.
    pub onsets: Vec<Option<Onset>>,
}

impl SweepResult {
    /// Amplitude curve of neuron `i` across the grid (NaN for failed points).
    pub fn amplitude_curve(&self, i: usize) -> Vec<f64> {
        self.points
            .iter()
            .map(|p| p.amplitude.get(i).copied().unwrap_or(f64::NAN))
            .collect()
    }
}

/// Integrates the template at each grid κ and records per-neuron
/// amplitudes, then refines each neuron's first onset by bisection.
///
/// During refinement a κ counts as oscillating for a neuron only if both
/// the `[0, 2H]` and `[0, 4H]` runs flag it, which filters out slowly
/// decaying transients near the bifurcation.
pub fn kappa_sweep<F: Feedback>(
    template: &NetworkModel<F>,
    options: &SweepOptions,
) -> Result<SweepResult, AnalysisError> {
    let SweepOptions {
        from, to, points, ..
    } = *options;
    if !(0.0..=1.0).contains(&from) || !(0.0..=1.0).contains(&to) || from >= to {
        return Err(AnalysisError::InvalidSweep(format!(
            "kappa range [{from}, {to}] must be increasing and inside [0, 1]"
        )));
    }
    if points < 2 {
        return Err(AnalysisError::InvalidSweep("need at least 2 points".into()));
    }
    if !(options.horizon > 0.0 && options.refine_width > 0.0) {
        return Err(AnalysisError::InvalidSweep(
            "horizon and refine width must be positive".into(),
        ));
    }
    let initial = options
        .initial
        .clone()
        .unwrap_or_else(|| InitialData::default_for(template));
    initial.check(template.n())?;

    let values: Vec<f64> = (0..points)
        .map(|k| from + (to - from) * k as f64 / (points - 1) as f64)
        .collect();

    let work = || -> SweepResult {
        let grid: Vec<SweepPoint> = values
            .par_iter()
            .map(|&kappa| grid_point(template, &initial, kappa, options))
            .collect();
        let onsets = (0..template.n())
            .into_par_iter()
            .map(|i| onset(template, &initial, &values, &grid, i, options))
            .collect();
        SweepResult {
            parameter: "kappa",
            values: values.clone(),
            points: grid,
            onsets,
        }
    };

    Ok(match options.threads {
        Some(threads) => rayon::ThreadPoolBuilder::new()
            .num_threads(threads.max(1))
            .build()
            .map_err(|e| AnalysisError::InvalidSweep(e.to_string()))?
            .install(work),
        None => work(),
    })
}

fn grid_point<F: Feedback>(
    template: &NetworkModel<F>,
    initial: &InitialData,
    kappa: f64,
    options: &SweepOptions,
) -> SweepPoint {
    let model = template.with_kappa(kappa, &options.edges);
    let report = integrate(&model, initial, options.horizon, options.step)
        .map_err(AnalysisError::from)
        .and_then(|t| classify_until(&t, t.horizon(), &options.classify));
    match report {
        Ok(r) => SweepPoint {
            kappa,
            amplitude: r.amplitude,
            mean: r.mean,
            min: r.persistence_floor,
            max: r.peak,
            oscillating: r.neuron_oscillating,
            error: None,
        },
        Err(e) => SweepPoint {
            kappa,
            amplitude: Vec::new(),
            mean: Vec::new(),
            min: Vec::new(),
            max: Vec::new(),
            oscillating: Vec::new(),
            error: Some(e.to_string()),
        },
    }
}

fn confirmed_oscillating<F: Feedback>(
    template: &NetworkModel<F>,
    initial: &InitialData,
    kappa: f64,
    neuron: usize,
    options: &SweepOptions,
) -> bool {
    let model = template.with_kappa(kappa, &options.edges);
    let long = 4.0 * options.horizon;
    let Ok(traj) = integrate(&model, initial, long, options.step) else {
        return false;
    };
    [2.0 * options.horizon, long].iter().all(|&end| {
        classify_until(&traj, end, &options.classify)
            .map(|r| r.neuron_oscillating[neuron])
            .unwrap_or(false)
    })
}

fn onset<F: Feedback>(
    template: &NetworkModel<F>,
    initial: &InitialData,
    values: &[f64],
    grid: &[SweepPoint],
    neuron: usize,
    options: &SweepOptions,
) -> Option<Onset> {
    let osc = |g: usize| grid[g].oscillating.get(neuron).copied();
    if osc(0) == Some(true) {
        return Some(Onset {
            value: values[0],
            bracket: (values[0], values[0]),
            at_lower_bound: true,
        });
    }
    let g = (1..grid.len()).find(|&g| osc(g) == Some(true) && osc(g - 1) == Some(false))?;
    let (mut lo, mut hi) = (values[g - 1], values[g]);
    while hi - lo > options.refine_width {
        let mid = 0.5 * (lo + hi);
        if confirmed_oscillating(template, initial, mid, neuron, options) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Some(Onset {
        value: 0.5 * (lo + hi),
        bracket: (lo, hi),
        at_lower_bound: false,
    })
}
