use std::fmt;

use crate::dde::Trajectory;
use crate::error::AnalysisError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Classification {
    Extinct,
    EndemicSteady,
    Oscillating,
    Undetermined,
}

impl fmt::Display for Classification {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Classification::Extinct => "extinct",
            Classification::EndemicSteady => "endemic-steady",
            Classification::Oscillating => "oscillating",
            Classification::Undetermined => "undetermined",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassifyOptions {
    /// Trailing fraction of the horizon that is analysed.
    pub window_fraction: f64,
    pub tol_extinct: f64,
    /// Relative amplitude/drift threshold.
    pub tol_osc: f64,
}

impl Default for ClassifyOptions {
    fn default() -> Self {
        Self {
            window_fraction: 0.3,
            tol_extinct: 1e-6,
            tol_osc: 1e-2,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AsymptoticsReport {
    pub classification: Classification,
    pub window: (f64, f64),
    /// `max - min` of each `y_i` over the window.
    pub amplitude: Vec<f64>,
    pub mean: Vec<f64>,
    /// Minimum of each `y_i` over the window.
    pub persistence_floor: Vec<f64>,
    pub peak: Vec<f64>,
    pub neuron_oscillating: Vec<bool>,
    /// Largest relative change of any variable across the window.
    pub max_drift: f64,
}

/// Classifies the trailing window of the whole trajectory.
pub fn classify(
    traj: &Trajectory,
    options: &ClassifyOptions,
) -> Result<AsymptoticsReport, AnalysisError> {
    classify_until(traj, traj.horizon(), options)
}

/// Same as [`classify`] but treats `end` as the horizon, so prefixes of a
/// long run can be judged without integrating again.
pub fn classify_until(
    traj: &Trajectory,
    end: f64,
    options: &ClassifyOptions,
) -> Result<AsymptoticsReport, AnalysisError> {
    let (first, last) = window_nodes(traj, end, options.window_fraction)?;
    let n = traj.n();
    let count = (last - first + 1) as f64;

    let mut lo = vec![f64::INFINITY; 2 * n];
    let mut hi = vec![f64::NEG_INFINITY; 2 * n];
    let mut sum = vec![0.0; 2 * n];
    for k in first..=last {
        for (c, &v) in traj.state(k).iter().enumerate() {
            lo[c] = lo[c].min(v);
            hi[c] = hi[c].max(v);
            sum[c] += v;
        }
    }
    let mean: Vec<f64> = sum.iter().map(|s| s / count).collect();

    let amplitude: Vec<f64> = (0..n).map(|i| hi[n + i] - lo[n + i]).collect();
    let neuron_oscillating: Vec<bool> = (0..n)
        .map(|i| amplitude[i] > options.tol_osc * (1.0 + mean[n + i]))
        .collect();
    let (start, stop) = (traj.state(first), traj.state(last));
    let max_drift = (0..2 * n)
        .map(|c| (stop[c] - start[c]).abs() / (1.0 + mean[c].abs()))
        .fold(0.0, f64::max);

    let late_max = (0..n).map(|i| hi[n + i]).fold(0.0, f64::max);
    let classification = if late_max < options.tol_extinct {
        Classification::Extinct
    } else if neuron_oscillating.iter().any(|&o| o) {
        Classification::Oscillating
    } else if max_drift < options.tol_osc {
        Classification::EndemicSteady
    } else {
        Classification::Undetermined
    };

    Ok(AsymptoticsReport {
        classification,
        window: (traj.times()[first], traj.times()[last]),
        amplitude,
        mean: mean[n..].to_vec(),
        persistence_floor: lo[n..].to_vec(),
        peak: hi[n..].to_vec(),
        neuron_oscillating,
        max_drift,
    })
}

/// Minimum of each `y_i` over `[window.0, window.1]`.
pub fn persistence_floor(traj: &Trajectory, window: (f64, f64)) -> Result<Vec<f64>, AnalysisError> {
    let nodes: Vec<usize> = (0..traj.len())
        .filter(|&k| traj.times()[k] >= window.0 && traj.times()[k] <= window.1)
        .collect();
    if nodes.is_empty() {
        return Err(AnalysisError::EmptyWindow);
    }
    Ok((0..traj.n())
        .map(|i| {
            nodes
                .iter()
                .map(|&k| traj.y(k, i))
                .fold(f64::INFINITY, f64::min)
        })
        .collect())
}

fn window_nodes(
    traj: &Trajectory,
    end: f64,
    fraction: f64,
) -> Result<(usize, usize), AnalysisError> {
    if !(fraction > 0.0 && fraction <= 1.0) || traj.is_empty() {
        return Err(AnalysisError::EmptyWindow);
    }
    let times = traj.times();
    let last = times.partition_point(|&t| t <= end + 1e-9 * traj.step());
    if last == 0 {
        return Err(AnalysisError::EmptyWindow);
    }
    let last = last - 1;
    let start = end * (1.0 - fraction);
    let first = times.partition_point(|&t| t < start - 1e-9 * traj.step());
    if first >= last {
        return Err(AnalysisError::EmptyWindow);
    }
    Ok((first, last))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dde::integrate;
    use crate::model::{Edge, HillResponse, InitialData, NetworkModel, NeuronParams};

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
    fn extinction_and_persistence() {
        let m = full3(18.0);
        let traj = integrate(&m, &InitialData::default_for(&m), 100.0, None).unwrap();
        let report = classify(&traj, &ClassifyOptions::default()).unwrap();
        assert_eq!(report.classification, Classification::Extinct);
        assert!(report.persistence_floor.iter().all(|&f| f < 1e-6));

        let m = full3(13.0);
        let traj = integrate(&m, &InitialData::default_for(&m), 300.0, None).unwrap();
        let report = classify(&traj, &ClassifyOptions::default()).unwrap();
        assert_eq!(report.classification, Classification::EndemicSteady);
        assert!(report.persistence_floor.iter().all(|&f| f > 1e-3));
        let floors = persistence_floor(&traj, report.window).unwrap();
        assert_eq!(floors, report.persistence_floor);
    }

    #[test]
    fn zero_seed_stays_zero() {
        let m = full3(13.0);
        let init = InitialData {
            x0: vec![100.0; 3],
            history: vec![0.0; 3],
        };
        let traj = integrate(&m, &init, 30.0, None).unwrap();
        let floors = persistence_floor(&traj, (0.0, 30.0)).unwrap();
        assert_eq!(floors, vec![0.0; 3]);
    }

    #[test]
    fn empty_window() {
        let m = full3(13.0);
        let traj = integrate(&m, &InitialData::default_for(&m), 1.0, None).unwrap();
        let opts = ClassifyOptions {
            window_fraction: 0.0,
            ..Default::default()
        };
        assert_eq!(classify(&traj, &opts), Err(AnalysisError::EmptyWindow));
        assert_eq!(
            persistence_floor(&traj, (2.0, 3.0)),
            Err(AnalysisError::EmptyWindow)
        );
    }

    #[test]
    fn prefix_classification_matches_short_run() {
        let m = full3(18.0);
        let init = InitialData::default_for(&m);
        // same step in both runs: 0.17/20 divides neither horizon exactly,
        // so pin a step that divides both
        let long = integrate(&m, &init, 40.0, Some(0.008)).unwrap();
        let short = integrate(&m, &init, 20.0, Some(0.008)).unwrap();
        let opts = ClassifyOptions::default();
        let a = classify_until(&long, 20.0, &opts).unwrap();
        let b = classify(&short, &opts).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn display_names() {
        assert_eq!(Classification::EndemicSteady.to_string(), "endemic-steady");
        assert_eq!(Classification::Oscillating.to_string(), "oscillating");
    }
}
