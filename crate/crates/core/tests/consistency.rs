use prionet::analysis::{classify, persistence_floor, Classification, ClassifyOptions};
use prionet::config::{emit_model, parse_model, preset, write_csv, PRESET_NAMES};
use prionet::dde::integrate;
use prionet::ngm;

// Below threshold every preset dies out; above it, with nonzero seeding,
// every neuron stays away from zero.
#[test]
fn threshold_decides_long_run_behaviour() {
    for name in PRESET_NAMES {
        let p = preset(name).unwrap();
        let r0 = ngm::r0(&p.model).unwrap().r0;
        let traj = integrate(&p.model, &p.initial, 300.0, None).unwrap();
        let report = classify(&traj, &ClassifyOptions::default()).unwrap();
        if r0 < 1.0 {
            assert_eq!(
                report.classification,
                Classification::Extinct,
                "{name}: R0 = {r0}"
            );
        } else {
            let floors = persistence_floor(&traj, report.window).unwrap();
            assert!(
                floors.iter().all(|&f| f > 1e-3),
                "{name}: R0 = {r0}, floors {floors:?}"
            );
        }
    }
}

#[test]
fn file_pipeline_matches_preset() {
    let p = preset("fig4").unwrap();
    let model = parse_model(&emit_model(&p.model)).unwrap();
    assert_eq!(ngm::r0(&model).unwrap().r0, ngm::r0(&p.model).unwrap().r0);

    let a = integrate(&model, &p.initial, 5.0, None).unwrap();
    let b = integrate(&p.model, &p.initial, 5.0, None).unwrap();
    let (mut csv_a, mut csv_b) = (Vec::new(), Vec::new());
    write_csv(&a, 7, &mut csv_a).unwrap();
    write_csv(&b, 7, &mut csv_b).unwrap();
    assert_eq!(csv_a, csv_b);

    let text = String::from_utf8(csv_a).unwrap();
    let rows: Vec<Vec<f64>> = text
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(|c| c.parse().unwrap()).collect())
        .collect();
    assert!(rows.iter().all(|r| r.len() == 2 * 3 + 1));
    assert_eq!(rows.last().unwrap()[0], 5.0);
    // values survive the text round-trip exactly
    let last = a.len() - 1;
    assert_eq!(rows.last().unwrap()[2], a.y(last, 0));
}
