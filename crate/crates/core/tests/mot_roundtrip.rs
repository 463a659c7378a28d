use mottrack::harness::{
    hypothesis, read_detections, read_mot, read_trajectories, run_tracker, write_detections, write_scenario,
    write_tracks, write_trajectories,
};
use mottrack::metrics::evaluate;
use mottrack::simulator::{generate, suite_scenario};
use mottrack::association::TrackerConfig;

#[test]
fn scenario_write_read_write_is_bit_identical() {
    for name in ["crossing2", "clutter4"] {
        let scenario = generate(&suite_scenario(name).unwrap().config.with_seed(3)).unwrap();
        let a = tempfile::tempdir().unwrap();
        write_scenario(a.path(), &scenario).unwrap();

        let gt = read_trajectories(&a.path().join("gt.txt")).unwrap();
        let dets = read_detections(&a.path().join("det.txt")).unwrap();
        assert_eq!(gt, scenario.gt);

        let b = tempfile::tempdir().unwrap();
        write_trajectories(&b.path().join("gt.txt"), &gt).unwrap();
        write_detections(&b.path().join("det.txt"), &dets).unwrap();
        for file in ["gt.txt", "det.txt", "det.aff"] {
            assert_eq!(
                std::fs::read(a.path().join(file)).unwrap(),
                std::fs::read(b.path().join(file)).unwrap(),
                "{name}: {file}"
            );
        }
    }
}

#[test]
fn detections_round_trip_through_tracker_output() {
    let scenario = generate(&suite_scenario("crossing2").unwrap().config.with_seed(0)).unwrap();
    let dir = tempfile::tempdir().unwrap();
    write_scenario(dir.path(), &scenario).unwrap();
    let dets = read_detections(&dir.path().join("det.txt")).unwrap();
    let in_memory: Vec<_> = scenario.frames.iter().filter(|f| !f.candidates.is_empty()).collect();
    assert_eq!(dets.len(), in_memory.len());
    for f in in_memory {
        assert_eq!(dets[&f.frame], f.candidates);
    }

    let frames = run_tracker(&dets, &TrackerConfig::default()).unwrap();
    let out = dir.path().join("tracks.txt");
    write_tracks(&out, &frames, false).unwrap();
    let reread = read_mot(&out).unwrap();
    assert!(reread.detections.is_empty());
    let hyp = hypothesis(&frames, false).unwrap();
    assert_eq!(reread.tracks, hyp);
    let direct = evaluate(&scenario.gt, &hyp, 0.5).unwrap();
    let via_files = evaluate(&read_trajectories(&dir.path().join("gt.txt")).unwrap(), &reread.tracks, 0.5).unwrap();
    assert_eq!(direct, via_files);
}
