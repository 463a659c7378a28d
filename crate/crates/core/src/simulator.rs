//! Seeded synthetic scenarios: ground-truth trajectories plus corrupted
//! detection candidates.
//!
//! Agents move with piecewise-constant velocity inside a reflective arena.
//! Detections are dropped inside occlusion windows, merged into a union box
//! when one agent hides behind another, jittered with clipped Gaussian noise,
//! and mixed with uniform clutter. Appearance is carried by unit embeddings:
//! each agent owns a prototype and, with probability `1 - fidelity`, a
//! detection carries a different agent's prototype instead.

use crate::association::DetectionCandidate;
use crate::geometry::{iou, BoundingBox};
use crate::metrics::TrajectorySet;
use crate::rng::SeededRng;
use crate::{Error, Result};

/// Noise samples are clipped to this many standard deviations.
pub const NOISE_CLIP: f64 = 3.0;
/// Smallest extent a noisy detection may have, in pixels.
pub const MIN_DETECTION_EXTENT: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Layout {
    /// Random starts, random headings, seeded direction changes.
    Random,
    /// Two agents on opposite straight paths meeting mid-sequence.
    Crossing,
}

/// Frames `start..end` (1-based, end exclusive) during which `agent` is hidden.
#[derive(Debug, Clone, PartialEq)]
pub struct OcclusionWindow {
    pub agent: usize,
    pub start: u64,
    pub end: u64,
    /// The occluder; when set and visible, its detection becomes the union box.
    pub merge_into: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub layout: Layout,
    pub n_agents: usize,
    pub n_frames: u64,
    pub arena_w: f64,
    pub arena_h: f64,
    pub speed_min: f64,
    pub speed_max: f64,
    /// Per-frame probability of a new heading and speed.
    pub turn_rate: f64,
    pub box_w: (f64, f64),
    pub box_h: (f64, f64),
    pub windows: Vec<OcclusionWindow>,
    /// Fraction of each agent's frames covered by random drop windows.
    pub occlusion_fraction: f64,
    /// Merge a rear agent into the front one when their IoU reaches this value.
    pub merge_iou: Option<f64>,
    /// Box noise std as a fraction of box size.
    pub noise_sigma: f64,
    /// Per agent and frame, probability of one clutter detection.
    pub fp_rate: f64,
    pub miss_rate: f64,
    /// Probability a detection carries its own agent's appearance.
    pub fidelity: f64,
    pub embedding_dim: usize,
    pub embedding_noise: f64,
    pub seed: u64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            layout: Layout::Random,
            n_agents: 4,
            n_frames: 100,
            arena_w: 960.0,
            arena_h: 540.0,
            speed_min: 2.0,
            speed_max: 6.0,
            turn_rate: 0.02,
            box_w: (40.0, 60.0),
            box_h: (90.0, 130.0),
            windows: Vec::new(),
            occlusion_fraction: 0.0,
            merge_iou: None,
            noise_sigma: 0.03,
            fp_rate: 0.0,
            miss_rate: 0.0,
            fidelity: 0.9,
            embedding_dim: 16,
            embedding_noise: 0.3,
            seed: 0,
        }
    }
}

impl ScenarioConfig {
    pub fn with_seed(&self, seed: u64) -> Self {
        ScenarioConfig { seed, ..self.clone() }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidScenario(m));
        if self.n_agents == 0 {
            return bad("zero agents".into());
        }
        if self.n_frames == 0 {
            return bad("zero frames".into());
        }
        if !(self.arena_w.is_finite() && self.arena_h.is_finite())
            || self.arena_w <= 2.0 * self.box_w.1
            || self.arena_h <= 2.0 * self.box_h.1
        {
            return bad(format!("arena {}x{} too small for boxes", self.arena_w, self.arena_h));
        }
        for (name, (lo, hi)) in [("box_w", self.box_w), ("box_h", self.box_h), ("speed", (self.speed_min, self.speed_max))] {
            if !(lo.is_finite() && hi.is_finite() && lo >= 0.0 && lo <= hi) {
                return bad(format!("{name} range ({lo}, {hi}) is invalid"));
            }
        }
        if self.box_w.0 <= 0.0 || self.box_h.0 <= 0.0 {
            return bad("box extents must be positive".into());
        }
        for (name, r) in [
            ("turn_rate", self.turn_rate),
            ("occlusion_fraction", self.occlusion_fraction),
            ("fp_rate", self.fp_rate),
            ("miss_rate", self.miss_rate),
            ("fidelity", self.fidelity),
            ("merge_iou", self.merge_iou.unwrap_or(0.5)),
        ] {
            if !(0.0..=1.0).contains(&r) {
                return bad(format!("{name} = {r} outside [0, 1]"));
            }
        }
        if !(self.noise_sigma >= 0.0 && self.embedding_noise >= 0.0) {
            return bad("noise must be non-negative".into());
        }
        if self.embedding_dim == 0 {
            return bad("embedding_dim must be positive".into());
        }
        for w in &self.windows {
            if w.agent >= self.n_agents || w.merge_into.is_some_and(|m| m >= self.n_agents || m == w.agent) {
                return bad(format!("occlusion window refers to a bad agent: {w:?}"));
            }
        }
        if self.layout == Layout::Crossing {
            if self.n_agents != 2 {
                return bad("crossing layout needs exactly 2 agents".into());
            }
            let reach = self.speed_max * self.n_frames as f64 / 2.0 + self.box_w.1;
            if reach >= self.arena_w / 2.0 {
                return bad("crossing paths leave the arena".into());
            }
        }
        Ok(())
    }
}

/// Where a candidate came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Source {
    Agent(usize),
    /// Union of a front agent and the one hidden behind it.
    Merged { front: usize, rear: usize },
    Clutter,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimFrame {
    pub frame: u64,
    pub candidates: Vec<DetectionCandidate>,
    pub sources: Vec<Source>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    /// Identities are agent index + 1.
    pub gt: TrajectorySet,
    /// Frames `1..=n_frames`, including empty ones.
    pub frames: Vec<SimFrame>,
}

// Sub-stream tags.
const MOTION: u64 = 1;
const OCCLUSION: u64 = 2;
const DETECTION: u64 = 3;
const APPEARANCE: u64 = 4;

struct Agent {
    x: f64,
    y: f64,
    w: f64,
    h: f64,
    vx: f64,
    vy: f64,
}

fn heading(rng: &mut SeededRng, cfg: &ScenarioConfig) -> (f64, f64) {
    let speed = rng.range(cfg.speed_min, cfg.speed_max);
    let angle = rng.range(0.0, std::f64::consts::TAU);
    (speed * angle.cos(), speed * angle.sin())
}

/// Reflects `pos` (and flips `vel`) so that `[pos, pos + extent]` stays in `[0, limit]`.
fn reflect(pos: &mut f64, vel: &mut f64, extent: f64, limit: f64) {
    let hi = limit - extent;
    if *pos < 0.0 {
        *pos = -*pos;
        *vel = -*vel;
    } else if *pos > hi {
        *pos = 2.0 * hi - *pos;
        *vel = -*vel;
    }
    *pos = pos.clamp(0.0, hi);
}

fn trajectories(cfg: &ScenarioConfig) -> Vec<Vec<BoundingBox>> {
    let mut rng = SeededRng::derived(cfg.seed, MOTION);
    let frames = cfg.n_frames as usize;
    match cfg.layout {
        Layout::Crossing => {
            let mid = (cfg.n_frames as f64 + 1.0) / 2.0;
            (0..2)
                .map(|a| {
                    let w = rng.range(cfg.box_w.0, cfg.box_w.1);
                    let h = rng.range(cfg.box_h.0, cfg.box_h.1);
                    let speed = rng.range(cfg.speed_min, cfg.speed_max);
                    let dir = if a == 0 { 1.0 } else { -1.0 };
                    let y = cfg.arena_h / 2.0 - h / 2.0 + rng.range(-10.0, 10.0);
                    (1..=frames)
                        .map(|t| BoundingBox {
                            x: cfg.arena_w / 2.0 - w / 2.0 + dir * speed * (t as f64 - mid),
                            y,
                            w,
                            h,
                        })
                        .collect()
                })
                .collect()
        }
        Layout::Random => {
            let mut agents: Vec<Agent> = (0..cfg.n_agents)
                .map(|_| {
                    let w = rng.range(cfg.box_w.0, cfg.box_w.1);
                    let h = rng.range(cfg.box_h.0, cfg.box_h.1);
                    let x = rng.range(0.0, cfg.arena_w - w);
                    let y = rng.range(0.0, cfg.arena_h - h);
                    let (vx, vy) = heading(&mut rng, cfg);
                    Agent { x, y, w, h, vx, vy }
                })
                .collect();
            let mut out = vec![Vec::with_capacity(frames); cfg.n_agents];
            for t in 0..frames {
                for (a, ag) in agents.iter_mut().enumerate() {
                    if t > 0 {
                        if rng.bernoulli(cfg.turn_rate) {
                            (ag.vx, ag.vy) = heading(&mut rng, cfg);
                        }
                        ag.x += ag.vx;
                        ag.y += ag.vy;
                        reflect(&mut ag.x, &mut ag.vx, ag.w, cfg.arena_w);
                        reflect(&mut ag.y, &mut ag.vy, ag.h, cfg.arena_h);
                    }
                    out[a].push(BoundingBox { x: ag.x, y: ag.y, w: ag.w, h: ag.h });
                }
            }
            out
        }
    }
}

/// `hidden[agent][t]` for frame `t + 1`, and the occluder when merging.
fn occlusions(cfg: &ScenarioConfig) -> Vec<Vec<Option<Option<usize>>>> {
    let frames = cfg.n_frames as usize;
    let mut hidden = vec![vec![None; frames]; cfg.n_agents];
    for w in &cfg.windows {
        for f in w.start.max(1)..w.end.min(cfg.n_frames + 1) {
            hidden[w.agent][f as usize - 1] = Some(w.merge_into);
        }
    }
    if cfg.occlusion_fraction > 0.0 {
        let mut rng = SeededRng::derived(cfg.seed, OCCLUSION);
        let target = (cfg.occlusion_fraction * frames as f64).round() as usize;
        for row in hidden.iter_mut() {
            let mut tries = 0;
            while row.iter().filter(|h| h.is_some()).count() < target && tries < 1000 {
                tries += 1;
                let len = 4 + rng.below(9) as usize;
                let start = rng.below(frames as u64) as usize;
                let end = (start + len).min(frames);
                let remaining = target - row.iter().filter(|h| h.is_some()).count();
                for slot in row[start..end].iter_mut().filter(|s| s.is_none()).take(remaining) {
                    *slot = Some(None);
                }
            }
        }
    }
    hidden
}

fn unit(v: Vec<f64>) -> Vec<f64> {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if n == 0.0 {
        v
    } else {
        v.into_iter().map(|x| x / n).collect()
    }
}

fn clipped_normal(rng: &mut SeededRng) -> f64 {
    rng.normal().clamp(-NOISE_CLIP, NOISE_CLIP)
}

fn jitter(b: &BoundingBox, sigma: f64, rng: &mut SeededRng) -> BoundingBox {
    let dx = clipped_normal(rng) * sigma * b.w;
    let dy = clipped_normal(rng) * sigma * b.h;
    let dw = clipped_normal(rng) * sigma * b.w;
    let dh = clipped_normal(rng) * sigma * b.h;
    BoundingBox {
        x: b.x + dx,
        y: b.y + dy,
        w: (b.w + dw).max(MIN_DETECTION_EXTENT),
        h: (b.h + dh).max(MIN_DETECTION_EXTENT),
    }
}

pub fn generate(cfg: &ScenarioConfig) -> Result<Scenario> {
    cfg.validate()?;
    let paths = trajectories(cfg);
    let hidden = occlusions(cfg);
    let mut det_rng = SeededRng::derived(cfg.seed, DETECTION);
    let mut app_rng = SeededRng::derived(cfg.seed, APPEARANCE);
    let d = cfg.embedding_dim;
    let prototypes: Vec<Vec<f64>> =
        (0..cfg.n_agents).map(|_| unit((0..d).map(|_| app_rng.normal()).collect())).collect();
    let noise_scale = cfg.embedding_noise / (d as f64).sqrt();

    let mut gt = TrajectorySet::new();
    let mut frames = Vec::with_capacity(cfg.n_frames as usize);
    for t in 0..cfg.n_frames as usize {
        let frame = t as u64 + 1;
        for (a, path) in paths.iter().enumerate() {
            gt.insert(frame, a as u64 + 1, path[t])?;
        }

        // front agent -> rear agents merged into it
        let mut merged_into: Vec<Option<usize>> = vec![None; cfg.n_agents];
        let mut visible: Vec<bool> = (0..cfg.n_agents).map(|a| hidden[a][t].is_none()).collect();
        for a in 0..cfg.n_agents {
            if let Some(Some(front)) = hidden[a][t] {
                if visible[front] && merged_into[front].is_none() {
                    merged_into[front] = Some(a);
                }
            }
        }
        if let Some(thr) = cfg.merge_iou {
            for i in 0..cfg.n_agents {
                for j in i + 1..cfg.n_agents {
                    if !(visible[i] && visible[j]) || merged_into[i].is_some() || merged_into[j].is_some() {
                        continue;
                    }
                    if iou(&paths[i][t], &paths[j][t]) >= thr {
                        // The agent whose box ends lower in the image is in front.
                        let (front, rear) =
                            if paths[i][t].bottom() >= paths[j][t].bottom() { (i, j) } else { (j, i) };
                        merged_into[front] = Some(rear);
                        visible[rear] = false;
                    }
                }
            }
        }

        let mut cands: Vec<(DetectionCandidate, Source)> = Vec::new();
        for a in 0..cfg.n_agents {
            if !visible[a] || det_rng.bernoulli(cfg.miss_rate) {
                continue;
            }
            let (truth, source, mut s_obj, mut proto) = match merged_into[a] {
                Some(rear) => (
                    paths[a][t].union(&paths[rear][t]),
                    Source::Merged { front: a, rear },
                    0.0,
                    prototypes[a].iter().zip(&prototypes[rear]).map(|(p, q)| p + q).collect::<Vec<_>>(),
                ),
                None => (paths[a][t], Source::Agent(a), 0.0, prototypes[a].clone()),
            };
            let bbox = jitter(&truth, cfg.noise_sigma, &mut det_rng);
            s_obj += det_rng.range(0.7, 1.0);
            if merged_into[a].is_some() {
                s_obj *= 0.5;
            } else if cfg.n_agents > 1 && !app_rng.bernoulli(cfg.fidelity) {
                let other = (a + 1 + app_rng.below(cfg.n_agents as u64 - 1) as usize) % cfg.n_agents;
                proto = prototypes[other].clone();
            }
            let embedding = unit(proto.iter().map(|p| p + app_rng.normal() * noise_scale).collect());
            let cand = DetectionCandidate { embedding: Some(embedding), ..DetectionCandidate::new(bbox, s_obj) };
            cands.push((cand, source));
        }
        for _ in 0..cfg.n_agents {
            if !det_rng.bernoulli(cfg.fp_rate) {
                continue;
            }
            let w = det_rng.range(cfg.box_w.0, cfg.box_w.1);
            let h = det_rng.range(cfg.box_h.0, cfg.box_h.1);
            let bbox = BoundingBox {
                x: det_rng.range(0.0, cfg.arena_w - w),
                y: det_rng.range(0.0, cfg.arena_h - h),
                w,
                h,
            };
            let s_obj = det_rng.range(0.1, 0.65);
            let embedding = unit((0..d).map(|_| app_rng.normal()).collect());
            cands.push((DetectionCandidate { embedding: Some(embedding), ..DetectionCandidate::new(bbox, s_obj) }, Source::Clutter));
        }
        // Candidate order must not leak identity.
        det_rng.shuffle(&mut cands);
        let (candidates, sources) = cands.into_iter().unzip();
        frames.push(SimFrame { frame, candidates, sources });
    }
    Ok(Scenario { gt, frames })
}

/// A named scenario family evaluated over `seeds`.
#[derive(Debug, Clone, PartialEq)]
pub struct SuiteScenario {
    pub name: &'static str,
    pub config: ScenarioConfig,
    pub seeds: std::ops::Range<u64>,
}

pub const SUITE_SEEDS: u64 = 100;

pub fn standard_suite() -> Vec<SuiteScenario> {
    let crossing = ScenarioConfig {
        layout: Layout::Crossing,
        n_agents: 2,
        n_frames: 80,
        arena_w: 640.0,
        arena_h: 480.0,
        speed_min: 3.0,
        speed_max: 6.0,
        turn_rate: 0.0,
        windows: vec![OcclusionWindow { agent: 1, start: 36, end: 46, merge_into: Some(0) }],
        miss_rate: 0.02,
        ..ScenarioConfig::default()
    };
    let crowd = ScenarioConfig {
        n_agents: 8,
        n_frames: 150,
        occlusion_fraction: 0.2,
        merge_iou: Some(0.3),
        fp_rate: 0.02,
        miss_rate: 0.02,
        ..ScenarioConfig::default()
    };
    let fast = ScenarioConfig {
        n_agents: 4,
        n_frames: 120,
        speed_min: 15.0,
        speed_max: 22.0,
        turn_rate: 0.03,
        merge_iou: Some(0.3),
        miss_rate: 0.02,
        ..ScenarioConfig::default()
    };
    let clutter = ScenarioConfig {
        n_agents: 4,
        n_frames: 120,
        merge_iou: Some(0.3),
        fp_rate: 0.3,
        miss_rate: 0.02,
        ..ScenarioConfig::default()
    };
    [("crossing2", crossing), ("crowd8_occl20", crowd), ("fastmotion4", fast), ("clutter4", clutter)]
        .into_iter()
        .map(|(name, config)| SuiteScenario { name, config, seeds: 0..SUITE_SEEDS })
        .collect()
}

pub fn suite_scenario(name: &str) -> Option<SuiteScenario> {
    standard_suite().into_iter().find(|s| s.name == name)
}
