use std::fs;
use std::path::Path;

use sbcm::sweep::{run_sweep, run_sweep_limited, Axis, Experiment, SweepSpec};
use sbcm_core::analytic::g_function;
use sbcm_core::reduced::{count_stable_family, FamilyKind, FamilySpec};
use sbcm_core::ModelParams;

fn family_spec(out: &Path, workers: usize) -> SweepSpec {
    SweepSpec {
        experiment: Experiment::FamilyCounts,
        topology: "path:12".into(),
        gamma: Axis::log(0.01, 100.0, 9),
        delta: Axis::linear(0.1, 1.9, 7),
        output: out.to_path_buf(),
        seed: 0,
        workers: Some(workers),
        family: Some(FamilyKind::Polarized),
        line: None,
        scan_points: 401,
        starts: 10,
        portrait_resolution: 5,
    }
}

fn rows(path: &Path) -> Vec<Vec<String>> {
    let mut r = csv::Reader::from_path(path).unwrap();
    r.records().map(|x| x.unwrap().iter().map(String::from).collect()).collect()
}

#[test]
fn output_does_not_depend_on_worker_count() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let ra = run_sweep(&family_spec(a.path(), 1)).unwrap();
    let rb = run_sweep(&family_spec(b.path(), 4)).unwrap();
    assert_eq!(ra.cells, 63);
    assert_eq!(fs::read(ra.results).unwrap(), fs::read(rb.results).unwrap());
}

#[test]
fn interrupted_sweep_resumes_to_identical_bytes() {
    let once = tempfile::tempdir().unwrap();
    let twice = tempfile::tempdir().unwrap();
    let full = run_sweep(&family_spec(once.path(), 2)).unwrap();

    let spec = family_spec(twice.path(), 2);
    let partial = run_sweep_limited(&spec, 20).unwrap();
    assert_eq!(partial.cells, 20);
    assert!(!partial.results.exists());
    let resumed = run_sweep(&spec).unwrap();
    assert_eq!(resumed.resumed, 20);
    assert_eq!(fs::read(full.results).unwrap(), fs::read(resumed.results).unwrap());
}

#[test]
fn changed_spec_refuses_an_old_journal() {
    let dir = tempfile::tempdir().unwrap();
    run_sweep_limited(&family_spec(dir.path(), 1), 3).unwrap();
    let mut other = family_spec(dir.path(), 1);
    other.scan_points = 402;
    assert!(run_sweep(&other).is_err());
}

#[test]
fn single_cell_matches_a_direct_call() {
    let dir = tempfile::tempdir().unwrap();
    let mut spec = family_spec(dir.path(), 1);
    spec.gamma = Axis::linear(7.5, 7.5, 1);
    spec.delta = Axis::linear(0.4, 0.4, 1);
    let out = run_sweep(&spec).unwrap();
    let got = rows(&out.results);
    let fam = FamilySpec::new(FamilyKind::Polarized, 12).unwrap();
    let direct = count_stable_family(&fam, &ModelParams::new(7.5, 0.4).unwrap(), 401).unwrap();
    assert_eq!(got.len(), 1);
    assert_eq!(got[0][2], direct.count.to_string());
    assert_eq!(got[0][3], direct.count_reduced.to_string());
}

#[test]
fn axes_hit_their_endpoints() {
    let v = Axis::log(0.01, 100.0, 15).values();
    assert_eq!(v[0], 0.01);
    assert_eq!(v[14], 100.0);
    assert!((v[7] - 1.0).abs() < 1e-12);
    assert_eq!("0:2:3".parse::<Axis>().unwrap().values(), vec![0.0, 1.0, 2.0]);
}

/// On the paired cliques the zero state sits on the anti line and is stable exactly
/// where g < 0, so the line counts must change across the g = 0 curve.
#[test]
fn line_counts_follow_the_harmonic_boundary() {
    let dir = tempfile::tempdir().unwrap();
    let spec = SweepSpec {
        experiment: Experiment::LineCounts,
        topology: "cliques:10:unaligned".into(),
        gamma: Axis::log(0.1, 10.0, 21),
        delta: Axis::linear(0.2, 0.8, 4),
        line: None,
        family: None,
        ..family_spec(dir.path(), 2)
    };
    let out = run_sweep(&spec).unwrap();
    let table = rows(&out.results);
    let gammas = spec.gamma.values();
    for chunk in table.chunks(gammas.len()) {
        let delta: f64 = chunk[0][1].parse().unwrap();
        let counts: Vec<usize> = chunk.iter().map(|r| r[2].parse().unwrap()).collect();
        // first gamma index past the harmonic boundary
        let boundary = gammas.iter().position(|&g| g_function(g, delta) > 0.0).unwrap();
        let change = (1..counts.len()).find(|&k| counts[k] != counts[k - 1]).unwrap();
        assert!(change.abs_diff(boundary) <= 1, "delta {delta}: counts {counts:?}, boundary at {boundary}");
    }
}
