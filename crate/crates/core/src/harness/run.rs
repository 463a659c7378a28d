use rayon::prelude::*;

use super::config::RunConfig;
use super::mot::Detections;
use crate::association::{TrackOutput, TrackStatus, TrackerConfig, TrackerState};
use crate::metrics::{evaluate, EvalReport, TrajectorySet};
use crate::simulator::{generate, Scenario, SuiteScenario};
use crate::{Error, Result};

/// Tracker outputs for one frame, sorted by id.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameOutput {
    pub frame: u64,
    pub outputs: Vec<TrackOutput>,
}

/// Steps the tracker over every frame from the first to the last detection
/// frame; frames without detections are stepped with no candidates.
pub fn run_tracker(dets: &Detections, cfg: &TrackerConfig) -> Result<Vec<FrameOutput>> {
    let (Some(&first), Some(&last)) = (dets.keys().next(), dets.keys().next_back()) else {
        return Ok(Vec::new());
    };
    let mut state = TrackerState::new();
    let mut out = Vec::with_capacity((last - first + 1) as usize);
    for frame in first..=last {
        let cands = dets.get(&frame).map_or(&[][..], Vec::as_slice);
        let outputs = state.step(frame, cands, cfg)?;
        out.push(FrameOutput { frame, outputs });
    }
    Ok(out)
}

/// Confirmed tracks (and lost ones when `include_lost`) as a trajectory set.
pub fn hypothesis(frames: &[FrameOutput], include_lost: bool) -> Result<TrajectorySet> {
    let mut set = TrajectorySet::new();
    for f in frames {
        for o in &f.outputs {
            let keep = match o.status {
                TrackStatus::Confirmed => true,
                TrackStatus::Lost => include_lost,
                TrackStatus::Tentative => false,
            };
            if keep {
                set.insert(f.frame, o.id, o.bbox)?;
            }
        }
    }
    Ok(set)
}

pub fn run_scenario(scenario: &Scenario, cfg: &RunConfig) -> Result<Vec<FrameOutput>> {
    let dets: Detections = scenario.frames.iter().map(|f| (f.frame, f.candidates.clone())).collect();
    run_tracker(&dets, &cfg.tracker)
}

pub fn evaluate_run(scenario: &Scenario, cfg: &RunConfig) -> Result<EvalReport> {
    let frames = run_scenario(scenario, cfg)?;
    let hyp = hypothesis(&frames, cfg.eval_include_lost)?;
    evaluate(&scenario.gt, &hyp, cfg.eval_iou)
}

/// One swept key with its candidate values.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GridAxis {
    pub key: String,
    pub values: Vec<String>,
}

/// Parses `key=v1,v2;key2=v3`. An empty string is a single empty cell.
pub fn parse_grid(text: &str) -> Result<Vec<GridAxis>> {
    let mut axes: Vec<GridAxis> = Vec::new();
    for part in text.split(';').map(str::trim).filter(|p| !p.is_empty()) {
        let (key, values) = part
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("grid axis {part:?} is not `key=v1,v2`")))?;
        let key = key.trim().to_string();
        let values: Vec<String> = values.split(',').map(|v| v.trim().to_string()).collect();
        if values.iter().any(String::is_empty) {
            return Err(Error::Config(format!("grid axis {key:?} has an empty value")));
        }
        if axes.iter().any(|a| a.key == key) {
            return Err(Error::Config(format!("grid key {key:?} repeated")));
        }
        // Type-check every value up front.
        for v in &values {
            RunConfig::default().set(&key, v)?;
        }
        axes.push(GridAxis { key, values });
    }
    Ok(axes)
}

fn grid_cells(axes: &[GridAxis]) -> Vec<Vec<(String, String)>> {
    let mut cells = vec![Vec::new()];
    for axis in axes {
        cells = cells
            .into_iter()
            .flat_map(|cell| {
                axis.values.iter().map(move |v| {
                    let mut c = cell.clone();
                    c.push((axis.key.clone(), v.clone()));
                    c
                })
            })
            .collect();
    }
    cells
}

/// Per-scenario means over seeds.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioSummary {
    pub scenario: String,
    pub runs: usize,
    pub ids: f64,
    pub idf1: f64,
    pub mota: f64,
    pub hota: f64,
    pub fp: f64,
    pub fn_: f64,
}

impl ScenarioSummary {
    fn from_reports(scenario: &str, reports: &[EvalReport]) -> Self {
        let n = reports.len().max(1) as f64;
        let mean = |f: fn(&EvalReport) -> f64| reports.iter().map(f).sum::<f64>() / n;
        ScenarioSummary {
            scenario: scenario.to_string(),
            runs: reports.len(),
            ids: mean(|r| r.ids as f64),
            idf1: mean(|r| r.idf1),
            mota: mean(|r| r.mota),
            hota: mean(|r| r.hota),
            fp: mean(|r| r.fp as f64),
            fn_: mean(|r| r.fn_ as f64),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellResult {
    /// `(key, value)` overrides applied on top of the base config.
    pub cell: Vec<(String, String)>,
    pub summaries: Vec<ScenarioSummary>,
}

fn pool(threads: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))
}

/// Evaluates every `(config, scenario, seed)` job, then averages per config and
/// scenario in job order, so results do not depend on the thread count.
fn run_jobs(
    configs: &[RunConfig],
    suite: &[SuiteScenario],
    seeds: Option<u64>,
    threads: usize,
) -> Result<Vec<Vec<ScenarioSummary>>> {
    let seed_range = |s: &SuiteScenario| s.seeds.start..seeds.map_or(s.seeds.end, |n| s.seeds.start + n);
    let mut jobs = Vec::new();
    for ci in 0..configs.len() {
        for (si, s) in suite.iter().enumerate() {
            jobs.extend(seed_range(s).map(|seed| (ci, si, seed)));
        }
    }
    let reports: Vec<EvalReport> = pool(threads)?.install(|| {
        jobs.par_iter()
            .map(|&(ci, si, seed)| {
                let scenario = generate(&suite[si].config.with_seed(seed))?;
                evaluate_run(&scenario, &configs[ci])
            })
            .collect::<Result<Vec<_>>>()
    })?;
    let mut out = Vec::with_capacity(configs.len());
    let mut at = 0;
    for _ in configs {
        let mut per = Vec::with_capacity(suite.len());
        for s in suite {
            let n = seed_range(s).count();
            per.push(ScenarioSummary::from_reports(s.name, &reports[at..at + n]));
            at += n;
        }
        out.push(per);
    }
    Ok(out)
}

fn with_overrides<'a>(base: &RunConfig, overrides: impl IntoIterator<Item = (&'a str, &'a str)>) -> Result<RunConfig> {
    let mut cfg = base.clone();
    for (k, v) in overrides {
        cfg.set(k, v)?;
    }
    Ok(cfg)
}

/// Runs the suite once per grid cell.
pub fn sweep(
    suite: &[SuiteScenario],
    base: &RunConfig,
    grid: &[GridAxis],
    seeds: Option<u64>,
    threads: usize,
) -> Result<Vec<CellResult>> {
    let cells = grid_cells(grid);
    let configs = cells
        .iter()
        .map(|cell| with_overrides(base, cell.iter().map(|(k, v)| (k.as_str(), v.as_str()))))
        .collect::<Result<Vec<_>>>()?;
    let summaries = run_jobs(&configs, suite, seeds, threads)?;
    Ok(cells.into_iter().zip(summaries).map(|(cell, summaries)| CellResult { cell, summaries }).collect())
}

/// Named override sets compared by `ablate`.
pub fn ablation_presets() -> Vec<(&'static str, Vec<(&'static str, &'static str)>)> {
    vec![
        ("full", vec![]),
        ("no-motion-gate", vec![("kf.tau_kf", "inf")]),
        ("appearance-only", vec![("assoc.alpha", "1"), ("kf.tau_kf", "inf")]),
        ("motion-only", vec![("assoc.alpha", "0")]),
    ]
}

#[derive(Debug, Clone, PartialEq)]
pub struct AblationRow {
    pub preset: &'static str,
    pub summaries: Vec<ScenarioSummary>,
}

pub fn ablate(suite: &[SuiteScenario], base: &RunConfig, seeds: Option<u64>, threads: usize) -> Result<Vec<AblationRow>> {
    let presets = ablation_presets();
    let configs = presets
        .iter()
        .map(|(_, overrides)| with_overrides(base, overrides.iter().copied()))
        .collect::<Result<Vec<_>>>()?;
    let summaries = run_jobs(&configs, suite, seeds, threads)?;
    Ok(presets.into_iter().zip(summaries).map(|((preset, _), summaries)| AblationRow { preset, summaries }).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::association::DetectionCandidate;
    use crate::geometry::BoundingBox;
    use crate::simulator::{suite_scenario, ScenarioConfig};

    #[test]
    fn grid_parsing() {
        let axes = parse_grid("assoc.alpha=0,0.5; kf.tau_kf=1,2,inf").unwrap();
        assert_eq!(axes.len(), 2);
        assert_eq!(grid_cells(&axes).len(), 6);
        assert_eq!(grid_cells(&[]).len(), 1);
        assert!(parse_grid("assoc.alpha").is_err());
        assert!(parse_grid("assoc.alpha=2").is_err());
        assert!(parse_grid("nope=1").is_err());
        assert!(parse_grid("assoc.alpha=1;assoc.alpha=0").is_err());
    }

    #[test]
    fn gaps_are_stepped() {
        let b = BoundingBox::new(0.0, 0.0, 10.0, 10.0).unwrap();
        let mut dets = Detections::new();
        dets.insert(3, vec![DetectionCandidate::new(b, 0.9)]);
        dets.insert(6, vec![DetectionCandidate::new(b, 0.9)]);
        let frames = run_tracker(&dets, &TrackerConfig::default()).unwrap();
        let idx: Vec<u64> = frames.iter().map(|f| f.frame).collect();
        assert_eq!(idx, vec![3, 4, 5, 6]);
        assert!(run_tracker(&Detections::new(), &TrackerConfig::default()).unwrap().is_empty());
    }

    #[test]
    fn clean_scenario_tracks_without_errors() {
        let cfg = ScenarioConfig { n_agents: 3, noise_sigma: 0.0, ..ScenarioConfig::default() };
        let s = generate(&cfg).unwrap();
        let run = RunConfig::parse("lifecycle.n_init = 1").unwrap();
        let r = evaluate_run(&s, &run).unwrap();
        assert_eq!(r.ids, 0);
        assert_eq!(r.fp, 0);
        assert_eq!(r.fn_, 0);
    }

    #[test]
    fn sweep_independent_of_threads() {
        let suite = vec![suite_scenario("crossing2").unwrap()];
        let grid = parse_grid("assoc.alpha=0.5,1").unwrap();
        let a = sweep(&suite, &RunConfig::default(), &grid, Some(4), 1).unwrap();
        let b = sweep(&suite, &RunConfig::default(), &grid, Some(4), 3).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 2);
        assert_eq!(a[0].summaries[0].runs, 4);
    }

    #[test]
    fn ablation_has_four_presets() {
        let suite = vec![suite_scenario("crossing2").unwrap()];
        let rows = ablate(&suite, &RunConfig::default(), Some(2), 2).unwrap();
        let names: Vec<&str> = rows.iter().map(|r| r.preset).collect();
        assert_eq!(names, ["full", "no-motion-gate", "appearance-only", "motion-only"]);
    }
}
