//! Named scenarios from the reference experiments.

use thiserror::Error;

use crate::model::{Edge, HillResponse, InitialData, NetworkModel, NeuronParams};

/// Canonical names, in listing order.
pub const PRESET_NAMES: [&str; 6] = [
    "fig3-full3",
    "fig4-full3",
    "fig5-line5",
    "fig6-ring5",
    "fig7-line5",
    "fig9-line9",
];

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unknown preset '{0}' (known: fig3-full3, fig4-full3, fig5-line5, fig6-ring5, fig7-line5, fig9-line9)")]
pub struct UnknownPreset(pub String);

#[derive(Debug, Clone, PartialEq)]
pub struct Preset {
    pub name: &'static str,
    pub model: NetworkModel,
    pub initial: InitialData,
}

/// Looks up a preset by canonical name or by its short form (`fig3`).
pub fn preset(name: &str) -> Result<Preset, UnknownPreset> {
    let canonical = PRESET_NAMES
        .iter()
        .find(|full| **full == name || full.split('-').next() == Some(name))
        .ok_or_else(|| UnknownPreset(name.to_string()))?;
    let model = match *canonical {
        "fig3-full3" => full3(18.0),
        "fig4-full3" => full3(13.0),
        "fig5-line5" => homogeneous_line(5, false),
        "fig6-ring5" => homogeneous_line(5, true),
        "fig7-line5" => chain(5, 0.9, 0.071),
        "fig9-line9" => chain(9, 0.45, 0.125),
        _ => unreachable!(),
    };
    let initial = InitialData::default_for(&model);
    Ok(Preset {
        name: canonical,
        model,
        initial,
    })
}

fn full3(mu: f64) -> NetworkModel {
    let neurons = vec![NeuronParams::new(1500.0, mu, 0.17, 0.0); 3];
    let mut edges = Vec::new();
    for i in 0..3 {
        for j in (0..3).filter(|&j| j != i) {
            edges.push(Edge::new(i, j, 0.9, 0.1));
        }
    }
    NetworkModel::new(neurons, edges, 0.015, HillResponse::new(5.0, 60.0)).expect("valid preset")
}

// Edge flow 2.5 with every neuron's total outflow 4·2.5 = 10; the sink
// carries whatever the edges do not.
fn homogeneous_line(n: usize, ring: bool) -> NetworkModel {
    let (edge_alpha, total) = (2.5, 10.0);
    let mut edges: Vec<Edge> = (0..n - 1)
        .map(|i| Edge::new(i, i + 1, edge_alpha, 0.17))
        .collect();
    if ring {
        edges.push(Edge::new(n - 1, 0, edge_alpha, 0.17));
    }
    let neurons = (0..n)
        .map(|i| {
            let out = if ring || i + 1 < n { edge_alpha } else { 0.0 };
            NeuronParams::new(1500.0, 20.0, 0.15, total - out)
        })
        .collect();
    NetworkModel::new(neurons, edges, 0.15, HillResponse::new(10.0, 50.0)).expect("valid preset")
}

fn chain(n: usize, edge_alpha: f64, kappa: f64) -> NetworkModel {
    let total = 3.6;
    let neurons = (0..n)
        .map(|i| {
            let sink = if i + 1 < n { total - edge_alpha } else { total };
            NeuronParams::new(1800.0, 50.0, 0.15, sink)
        })
        .collect();
    let edges = (0..n - 1)
        .map(|i| Edge::new(i, i + 1, edge_alpha, kappa))
        .collect();
    NetworkModel::new(neurons, edges, 0.15, HillResponse::new(10.0, 60.0)).expect("valid preset")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ngm;

    #[test]
    fn names_and_aliases() {
        for name in PRESET_NAMES {
            assert_eq!(preset(name).unwrap().name, name);
            let short = name.split('-').next().unwrap();
            assert_eq!(preset(short).unwrap().name, name);
        }
        assert_eq!(preset("fig8"), Err(UnknownPreset("fig8".into())));
        assert!(preset("full3").is_err());
    }

    #[test]
    fn strict_validation_passes() {
        for name in PRESET_NAMES {
            let p = preset(name).unwrap();
            assert!(p.model.validate(true).is_empty(), "{name}");
            assert!(p.initial.check(p.model.n()).is_ok());
        }
    }

    #[test]
    fn reference_scalars() {
        let r0 = |name| ngm::r0(&preset(name).unwrap().model).unwrap().r0;
        assert!((r0("fig3") - 0.8194).abs() < 1e-3);
        assert!((r0("fig4") - 1.1346).abs() < 1e-3);
        let fig9 = preset("fig9").unwrap().model;
        for i in 0..9 {
            assert!((ngm::local_r0(&fig9, i).unwrap() - 1.5).abs() < 1e-12);
            assert!((fig9.alpha_total(i) - 3.6).abs() < 1e-12);
        }
        let fig7 = preset("fig7").unwrap().model;
        assert!((0..5).all(|i| (fig7.alpha_total(i) - 3.6).abs() < 1e-12));
        let fig6 = preset("fig6").unwrap().model;
        assert!((0..5).all(|i| (fig6.alpha_total(i) - 10.0).abs() < 1e-12));
    }

    #[test]
    fn initial_data() {
        let p = preset("fig4").unwrap();
        assert_eq!(p.initial.x0, vec![1500.0 / 13.0; 3]);
        assert_eq!(p.initial.history, vec![1.0; 3]);
    }
}
