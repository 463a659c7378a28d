//! Per-frame identity association.
//!
//! Each live track is scored against every candidate with
//! `alpha * s_mask + (1 - alpha) * s_kf`, where `s_kf` is the IoU between the
//! track's predicted box and the candidate box. Matches drive the gated Kalman
//! correction and the adaptive EMA of the track's appearance memory.

use std::collections::VecDeque;

use crate::assignment;
use crate::geometry::{iou, BoundingBox};
use crate::kinematics::{KalmanTrackState, KinematicsConfig};
use crate::temporal_memory::{
    memory_cache_select_with, FeatureMatrix, MotionQueue, ProjectionPair, SelfBranchReduce,
};
use crate::{Error, Result};

/// Appearance affinity attached to a candidate.
#[derive(Debug, Clone, PartialEq, Default)]
pub enum MaskAffinity {
    /// Fall back to cosine similarity between the candidate embedding and the track memory.
    #[default]
    Absent,
    /// Same affinity towards every track.
    Global(f64),
    /// Affinity per track id; missing ids fall back as for `Absent`.
    PerTrack(Vec<(u64, f64)>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct DetectionCandidate {
    pub bbox: BoundingBox,
    pub s_mask: MaskAffinity,
    pub s_obj: f64,
    pub embedding: Option<Vec<f64>>,
}

impl DetectionCandidate {
    pub fn new(bbox: BoundingBox, s_obj: f64) -> Self {
        DetectionCandidate { bbox, s_mask: MaskAffinity::Absent, s_obj, embedding: None }
    }

    fn validate(&self, dim: Option<usize>) -> Result<()> {
        if !self.bbox.is_valid() {
            let b = self.bbox;
            return Err(Error::InvalidBox { x: b.x, y: b.y, w: b.w, h: b.h });
        }
        check_score("s_obj", self.s_obj)?;
        match &self.s_mask {
            MaskAffinity::Absent => {}
            MaskAffinity::Global(s) => check_score("s_mask", *s)?,
            MaskAffinity::PerTrack(row) => {
                for (_, s) in row {
                    check_score("s_mask", *s)?;
                }
            }
        }
        if let Some(e) = &self.embedding {
            if e.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite("embedding"));
            }
            if let Some(d) = dim {
                if e.len() != d {
                    return Err(Error::DimensionMismatch { expected: d, actual: e.len() });
                }
            }
        }
        Ok(())
    }

    fn mask_affinity(&self, track: &Track) -> f64 {
        match &self.s_mask {
            MaskAffinity::Global(s) => *s,
            MaskAffinity::PerTrack(row) => row
                .iter()
                .find(|(id, _)| *id == track.id)
                .map(|(_, s)| *s)
                .unwrap_or_else(|| self.embedding_affinity(track)),
            MaskAffinity::Absent => self.embedding_affinity(track),
        }
    }

    fn embedding_affinity(&self, track: &Track) -> f64 {
        match (&self.embedding, &track.memory) {
            (Some(e), Some(m)) => cosine(e, &m.embedding).clamp(0.0, 1.0),
            _ => 0.0,
        }
    }
}

fn check_score(what: &'static str, value: f64) -> Result<()> {
    if !value.is_finite() {
        return Err(Error::NonFinite(what));
    }
    if !(0.0..=1.0).contains(&value) {
        return Err(Error::ScoreOutOfRange { what, value });
    }
    Ok(())
}

pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot / (na * nb)
    }
}

/// IoU between the predicted box and a candidate box.
pub fn motion_consistency_score(predicted: &BoundingBox, candidate: &BoundingBox) -> f64 {
    iou(predicted, candidate)
}

pub fn fused_score(s_mask: f64, s_kf: f64, alpha: f64) -> f64 {
    alpha * s_mask + (1.0 - alpha) * s_kf
}

/// Appearance memory: EMA embedding and the decay used for the last update.
#[derive(Debug, Clone, PartialEq)]
pub struct TemporalBuffer {
    pub embedding: Vec<f64>,
    pub gamma: f64,
}

/// `B_t = gamma * B_prev + (1 - gamma) * K_t` with `gamma = 1 - min(s_kf, tau_gamma)`.
pub fn temporal_buffer_update(
    memory: &[f64],
    key: &[f64],
    s_kf_star: f64,
    tau_gamma: f64,
) -> Result<(Vec<f64>, f64)> {
    if memory.len() != key.len() {
        return Err(Error::DimensionMismatch { expected: memory.len(), actual: key.len() });
    }
    let gamma = 1.0 - s_kf_star.min(tau_gamma);
    let next = memory
        .iter()
        .zip(key)
        .map(|(b, k)| gamma * b + (1.0 - gamma) * k)
        .collect();
    Ok((next, gamma))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum TrackStatus {
    Tentative,
    Confirmed,
    Lost,
}

impl TrackStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            TrackStatus::Tentative => "tentative",
            TrackStatus::Confirmed => "confirmed",
            TrackStatus::Lost => "lost",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Track {
    pub id: u64,
    pub kalman: KalmanTrackState,
    /// Box predicted for the current frame.
    pub predicted: BoundingBox,
    pub memory: Option<TemporalBuffer>,
    pub status: TrackStatus,
    pub age: u32,
    pub misses: u32,
    /// Consecutive matched frames, birth included.
    pub hits: u32,
    /// Associated boxes `[x, y, w, h]`, most recent last.
    pub queue: MotionQueue,
    /// Recent key embeddings, most recent last.
    pub keys: VecDeque<Vec<f64>>,
}

impl Track {
    /// Top-`k` past key frames by memory-cache importance, queried with the current memory.
    pub fn select_cached_keys(
        &self,
        proj: &ProjectionPair,
        k: usize,
        reduce: SelfBranchReduce,
    ) -> Result<Vec<(usize, f64)>> {
        let memory = self.memory.as_ref().ok_or(Error::Empty("track memory"))?;
        let current = FeatureMatrix::from_rows(1, memory.embedding.len(), &memory.embedding)?;
        let keys: Vec<Vec<f64>> = self.keys.iter().cloned().collect();
        let history = FeatureMatrix::from_vecs(&keys)?;
        memory_cache_select_with(&current, &history, proj, k.min(keys.len()), reduce)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum AssociationMode {
    /// Maximum total fused score, one-to-one.
    #[default]
    Hungarian,
    /// Per-track argmax; collisions go to the higher score.
    Greedy,
}

impl std::str::FromStr for AssociationMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "hungarian" => Ok(Self::Hungarian),
            "greedy" => Ok(Self::Greedy),
            other => Err(Error::Config(format!("unknown association mode {other:?} (hungarian|greedy)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AssociationConfig {
    pub alpha: f64,
    pub mode: AssociationMode,
    pub tau_match: f64,
}

impl Default for AssociationConfig {
    fn default() -> Self {
        AssociationConfig { alpha: 0.5, mode: AssociationMode::Hungarian, tau_match: 0.1 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LifecycleConfig {
    pub tau_birth: f64,
    pub n_init: u32,
    pub max_age: u32,
}

impl Default for LifecycleConfig {
    fn default() -> Self {
        LifecycleConfig { tau_birth: 0.6, n_init: 3, max_age: 30 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrackerConfig {
    pub kinematics: KinematicsConfig,
    pub association: AssociationConfig,
    pub lifecycle: LifecycleConfig,
    pub tau_gamma: f64,
    /// Motion-queue capacity.
    pub queue_len: usize,
    /// Number of past key embeddings kept per track for cache selection.
    pub key_window: usize,
}

impl Default for TrackerConfig {
    fn default() -> Self {
        TrackerConfig {
            kinematics: KinematicsConfig::default(),
            association: AssociationConfig::default(),
            lifecycle: LifecycleConfig::default(),
            tau_gamma: 0.9,
            queue_len: 8,
            key_window: 16,
        }
    }
}

/// Fused and motion scores, `tracks x candidates`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreMatrix {
    pub fused: Vec<Vec<f64>>,
    pub motion: Vec<Vec<f64>>,
    pub cols: usize,
}

pub fn score_matrix(tracks: &[Track], candidates: &[DetectionCandidate], alpha: f64) -> Result<ScoreMatrix> {
    let mut fused = Vec::with_capacity(tracks.len());
    let mut motion = Vec::with_capacity(tracks.len());
    for t in tracks {
        let mut frow = Vec::with_capacity(candidates.len());
        let mut mrow = Vec::with_capacity(candidates.len());
        for c in candidates {
            let s_kf = motion_consistency_score(&t.predicted, &c.bbox);
            let f = fused_score(c.mask_affinity(t), s_kf, alpha);
            if !f.is_finite() || !s_kf.is_finite() {
                return Err(Error::NonFinite("fused score"));
            }
            frow.push(f);
            mrow.push(s_kf);
        }
        fused.push(frow);
        motion.push(mrow);
    }
    Ok(ScoreMatrix { fused, motion, cols: candidates.len() })
}

/// Pairs `(row, col)` chosen from a fused-score matrix, sorted by row.
pub fn assign(scores: &[Vec<f64>], cols: usize, mode: AssociationMode, tau_match: f64) -> Result<Vec<(usize, usize)>> {
    if scores.iter().flatten().any(|s| !s.is_finite()) {
        return Err(Error::NonFinite("score matrix"));
    }
    let pairs = match mode {
        AssociationMode::Hungarian => {
            assignment::maximize_allowed(scores, cols, |i, j| scores[i][j] >= tau_match)
        }
        AssociationMode::Greedy => {
            // claim[col] = (row, score) of the current winner
            let mut claim: Vec<Option<(usize, f64)>> = vec![None; cols];
            for (i, row) in scores.iter().enumerate() {
                let mut best: Option<(usize, f64)> = None;
                for (j, &s) in row.iter().enumerate() {
                    if s >= tau_match && best.is_none_or(|(_, b)| s > b) {
                        best = Some((j, s));
                    }
                }
                if let Some((j, s)) = best {
                    if claim[j].is_none_or(|(_, held)| s > held) {
                        claim[j] = Some((i, s));
                    }
                }
            }
            let mut pairs: Vec<(usize, usize)> =
                claim.iter().enumerate().filter_map(|(j, c)| c.map(|(i, _)| (i, j))).collect();
            pairs.sort_unstable();
            pairs
        }
    };
    Ok(pairs)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrackMatch {
    pub track_id: u64,
    /// Index into the track slice passed to [`associate_frame`].
    pub track_index: usize,
    pub candidate: usize,
    pub fused: f64,
    pub s_kf: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct AssociationResult {
    pub matches: Vec<TrackMatch>,
    pub unmatched_tracks: Vec<u64>,
    pub unmatched_candidates: Vec<usize>,
}

pub fn associate_frame(
    tracks: &[Track],
    candidates: &[DetectionCandidate],
    config: &AssociationConfig,
) -> Result<AssociationResult> {
    let scores = score_matrix(tracks, candidates, config.alpha)?;
    let pairs = assign(&scores.fused, scores.cols, config.mode, config.tau_match)?;
    let mut track_used = vec![false; tracks.len()];
    let mut cand_used = vec![false; candidates.len()];
    let matches = pairs
        .into_iter()
        .map(|(i, j)| {
            track_used[i] = true;
            cand_used[j] = true;
            TrackMatch {
                track_id: tracks[i].id,
                track_index: i,
                candidate: j,
                fused: scores.fused[i][j],
                s_kf: scores.motion[i][j],
            }
        })
        .collect();
    Ok(AssociationResult {
        matches,
        unmatched_tracks: tracks.iter().zip(&track_used).filter(|(_, u)| !**u).map(|(t, _)| t.id).collect(),
        unmatched_candidates: (0..candidates.len()).filter(|&j| !cand_used[j]).collect(),
    })
}

/// One reported track for a frame.
#[derive(Debug, Clone, PartialEq)]
pub struct TrackOutput {
    pub id: u64,
    pub bbox: BoundingBox,
    pub status: TrackStatus,
    /// Fused association score; objectness for a newborn track; 0 while coasting.
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrackerState {
    pub tracks: Vec<Track>,
    pub next_id: u64,
    pub last_frame: Option<u64>,
    /// Embedding dimension, fixed by the first embedding seen.
    pub dim: Option<usize>,
}

/// Runs one frame: predict, associate, gated update, memory update, lifecycle.
pub fn step_tracker(
    mut state: TrackerState,
    frame: u64,
    candidates: &[DetectionCandidate],
    config: &TrackerConfig,
) -> Result<(TrackerState, Vec<TrackOutput>)> {
    let out = state.step(frame, candidates, config)?;
    Ok((state, out))
}

impl Default for TrackerState {
    /// Identities start at 1, as in MOTChallenge files.
    fn default() -> Self {
        TrackerState { tracks: Vec::new(), next_id: 1, last_frame: None, dim: None }
    }
}

impl TrackerState {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn step(
        &mut self,
        frame: u64,
        candidates: &[DetectionCandidate],
        config: &TrackerConfig,
    ) -> Result<Vec<TrackOutput>> {
        if let Some(last) = self.last_frame {
            if frame <= last {
                return Err(Error::OutOfOrderFrame { last, got: frame });
            }
        }
        let mut dim = self.dim;
        for c in candidates {
            c.validate(dim)?;
            if dim.is_none() {
                dim = c.embedding.as_ref().map(Vec::len);
            }
        }
        self.dim = dim;
        self.last_frame = Some(frame);

        let kin = &config.kinematics;
        for t in &mut self.tracks {
            t.predicted = t.kalman.predict(kin);
            t.age += 1;
        }

        let assoc = associate_frame(&self.tracks, candidates, &config.association)?;
        let mut outputs = Vec::new();
        let mut matched = vec![false; self.tracks.len()];

        for m in &assoc.matches {
            matched[m.track_index] = true;
            let c = &candidates[m.candidate];
            let t = &mut self.tracks[m.track_index];
            t.kalman.gated_update(&c.bbox, kin.is_reliable(c.s_obj), kin);
            if let Some(key) = &c.embedding {
                t.memory = Some(match &t.memory {
                    Some(prev) => {
                        let (embedding, gamma) =
                            temporal_buffer_update(&prev.embedding, key, m.s_kf, config.tau_gamma)?;
                        TemporalBuffer { embedding, gamma }
                    }
                    None => TemporalBuffer { embedding: key.clone(), gamma: 0.0 },
                });
                push_key(&mut t.keys, key, config.key_window);
            }
            t.queue.push(c.bbox.as_array().to_vec())?;
            t.misses = 0;
            t.hits += 1;
            t.status = match t.status {
                TrackStatus::Tentative if t.hits >= config.lifecycle.n_init => TrackStatus::Confirmed,
                TrackStatus::Tentative => TrackStatus::Tentative,
                _ => TrackStatus::Confirmed,
            };
            outputs.push(TrackOutput { id: t.id, bbox: c.bbox, status: t.status, score: m.fused });
        }

        for (t, _) in self.tracks.iter_mut().zip(&matched).filter(|(_, m)| !**m) {
            t.misses += 1;
            t.hits = 0;
            // No association this frame breaks the run of reliable ones.
            t.kalman.counter = 0;
            if t.status == TrackStatus::Confirmed {
                t.status = TrackStatus::Lost;
            }
        }
        let max_age = config.lifecycle.max_age;
        self.tracks.retain(|t| match t.status {
            TrackStatus::Tentative => t.misses == 0,
            _ => t.misses <= max_age,
        });
        for t in self.tracks.iter().filter(|t| t.status == TrackStatus::Lost) {
            outputs.push(TrackOutput { id: t.id, bbox: t.predicted, status: TrackStatus::Lost, score: 0.0 });
        }

        for &j in &assoc.unmatched_candidates {
            let c = &candidates[j];
            if c.s_obj < config.lifecycle.tau_birth {
                continue;
            }
            let t = self.spawn(c, config)?;
            outputs.push(TrackOutput { id: t.id, bbox: c.bbox, status: t.status, score: c.s_obj });
        }

        outputs.sort_by_key(|o| o.id);
        Ok(outputs)
    }

    fn spawn(&mut self, c: &DetectionCandidate, config: &TrackerConfig) -> Result<&Track> {
        let id = self.next_id;
        self.next_id += 1;
        let mut queue = MotionQueue::new(config.queue_len, 4);
        queue.push(c.bbox.as_array().to_vec())?;
        let mut keys = VecDeque::new();
        if let Some(e) = &c.embedding {
            push_key(&mut keys, e, config.key_window);
        }
        let status = if config.lifecycle.n_init <= 1 { TrackStatus::Confirmed } else { TrackStatus::Tentative };
        self.tracks.push(Track {
            id,
            kalman: KalmanTrackState::new(&c.bbox, &config.kinematics),
            predicted: c.bbox,
            memory: c.embedding.clone().map(|embedding| TemporalBuffer { embedding, gamma: 0.0 }),
            status,
            age: 0,
            misses: 0,
            hits: 1,
            queue,
            keys,
        });
        Ok(self.tracks.last().expect("just pushed"))
    }

    pub fn track(&self, id: u64) -> Option<&Track> {
        self.tracks.iter().find(|t| t.id == id)
    }
}

fn push_key(keys: &mut VecDeque<Vec<f64>>, key: &[f64], window: usize) {
    keys.push_back(key.to_vec());
    while keys.len() > window.max(1) {
        keys.pop_front();
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SeededRng;
    use proptest::prelude::*;

    fn bx(x: f64, y: f64, w: f64, h: f64) -> BoundingBox {
        BoundingBox::new(x, y, w, h).unwrap()
    }

    fn track_at(id: u64, b: BoundingBox) -> Track {
        let mut s = TrackerState { next_id: id, ..Default::default() };
        s.spawn(&DetectionCandidate::new(b, 1.0), &TrackerConfig::default()).unwrap();
        s.tracks.pop().unwrap()
    }

    /// Tracks and candidates whose fused scores (alpha = 1) equal `m`.
    fn fixture(m: &[Vec<f64>]) -> (Vec<Track>, Vec<DetectionCandidate>) {
        let tracks: Vec<Track> = (0..m.len()).map(|i| track_at(i as u64, bx(0., 0., 10., 10.))).collect();
        let cols = m.first().map_or(0, Vec::len);
        let cands = (0..cols)
            .map(|j| DetectionCandidate {
                s_mask: MaskAffinity::PerTrack((0..m.len()).map(|i| (i as u64, m[i][j])).collect()),
                ..DetectionCandidate::new(bx(0., 0., 10., 10.), 0.9)
            })
            .collect();
        (tracks, cands)
    }

    fn cfg(alpha: f64, mode: AssociationMode) -> AssociationConfig {
        AssociationConfig { alpha, mode, tau_match: 0.1 }
    }

    #[test]
    fn motion_score_examples() {
        let p = bx(0., 0., 10., 10.);
        assert_eq!(motion_consistency_score(&p, &p), 1.0);
        assert_eq!(motion_consistency_score(&p, &bx(30., 0., 10., 10.)), 0.0);
        assert!((motion_consistency_score(&p, &bx(5., 0., 10., 10.)) - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn fused_examples() {
        assert_eq!(fused_score(0.8, 0.5, 1.0), 0.8);
        assert_eq!(fused_score(0.8, 0.5, 0.0), 0.5);
        assert!((fused_score(0.8, 0.5, 0.6) - 0.68).abs() < 1e-15);
    }

    #[test]
    fn single_pair_matches() {
        let (t, c) = fixture(&[vec![0.5]]);
        let r = associate_frame(&t, &c, &cfg(1.0, AssociationMode::Hungarian)).unwrap();
        assert_eq!(r.matches.len(), 1);
        assert!(r.unmatched_tracks.is_empty() && r.unmatched_candidates.is_empty());
    }

    #[test]
    fn below_threshold_stays_unmatched() {
        let (t, c) = fixture(&[vec![0.05]]);
        for mode in [AssociationMode::Hungarian, AssociationMode::Greedy] {
            let r = associate_frame(&t, &c, &cfg(1.0, mode)).unwrap();
            assert!(r.matches.is_empty());
            assert_eq!(r.unmatched_tracks, vec![0]);
            assert_eq!(r.unmatched_candidates, vec![0]);
        }
    }

    #[test]
    fn hungarian_two_by_two() {
        let (t, c) = fixture(&[vec![0.9, 0.2], vec![0.3, 0.8]]);
        let r = associate_frame(&t, &c, &cfg(1.0, AssociationMode::Hungarian)).unwrap();
        let pairs: Vec<(u64, usize)> = r.matches.iter().map(|m| (m.track_id, m.candidate)).collect();
        assert_eq!(pairs, vec![(0, 0), (1, 1)]);
    }

    #[test]
    fn greedy_collision_goes_to_higher_score() {
        let (t, c) = fixture(&[vec![0.9, 0.2], vec![0.7, 0.3]]);
        let r = associate_frame(&t, &c, &cfg(1.0, AssociationMode::Greedy)).unwrap();
        let pairs: Vec<(u64, usize)> = r.matches.iter().map(|m| (m.track_id, m.candidate)).collect();
        assert_eq!(pairs, vec![(0, 0)]);
        assert_eq!(r.unmatched_tracks, vec![1]);
        assert_eq!(r.unmatched_candidates, vec![1]);
    }

    #[test]
    fn greedy_ties_prefer_lower_indices() {
        let pairs = assign(&[vec![0.5, 0.5], vec![0.5, 0.5]], 2, AssociationMode::Greedy, 0.1).unwrap();
        assert_eq!(pairs, vec![(0, 0)]);
    }

    #[test]
    fn rejects_bad_candidates() {
        let t = vec![track_at(0, bx(0., 0., 10., 10.))];
        let mut state = TrackerState { tracks: t, next_id: 1, ..Default::default() };
        let bad = DetectionCandidate { s_mask: MaskAffinity::Global(f64::NAN), ..DetectionCandidate::new(bx(0., 0., 1., 1.), 0.9) };
        assert!(matches!(state.step(1, &[bad], &TrackerConfig::default()), Err(Error::NonFinite(_))));
        let bad = DetectionCandidate::new(bx(0., 0., 1., 1.), 1.5);
        assert!(matches!(state.step(2, &[bad], &TrackerConfig::default()), Err(Error::ScoreOutOfRange { .. })));
        assert!(assign(&[vec![f64::INFINITY]], 1, AssociationMode::Hungarian, 0.1).is_err());
    }

    #[test]
    fn buffer_examples() {
        let (b, g) = temporal_buffer_update(&[1.0, 2.0], &[5.0, 6.0], 0.0, 0.9).unwrap();
        assert_eq!((b, g), (vec![1.0, 2.0], 1.0));
        let (b, g) = temporal_buffer_update(&[1.0, 2.0], &[5.0, 6.0], 1.0, 1.0).unwrap();
        assert_eq!((b, g), (vec![5.0, 6.0], 0.0));
        let (b, g) = temporal_buffer_update(&[1.0, 0.0], &[0.0, 1.0], 0.5, 0.8).unwrap();
        assert_eq!(g, 0.5);
        assert_eq!(b, vec![0.5, 0.5]);
        assert!(matches!(
            temporal_buffer_update(&[1.0], &[1.0, 2.0], 0.5, 0.8),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn empty_frame_only_advances_clock() {
        let mut s = TrackerState::new();
        let out = s.step(1, &[], &TrackerConfig::default()).unwrap();
        assert!(out.is_empty());
        assert_eq!(s.last_frame, Some(1));
        assert!(s.tracks.is_empty());
        assert!(matches!(s.step(1, &[], &TrackerConfig::default()), Err(Error::OutOfOrderFrame { .. })));
    }

    #[test]
    fn repeated_candidate_confirms_one_track() {
        let cfg = TrackerConfig::default();
        let mut s = TrackerState::new();
        let c = DetectionCandidate::new(bx(10., 10., 20., 40.), 0.9);
        let mut statuses = vec![];
        for f in 1..=cfg.lifecycle.n_init as u64 {
            let out = s.step(f, std::slice::from_ref(&c), &cfg).unwrap();
            assert_eq!(out.len(), 1);
            assert_eq!(out[0].id, 1);
            statuses.push(out[0].status);
        }
        assert_eq!(statuses, vec![TrackStatus::Tentative, TrackStatus::Tentative, TrackStatus::Confirmed]);
        assert_eq!(s.tracks.len(), 1);
    }

    #[test]
    fn coasting_track_resumes_same_id() {
        let cfg = TrackerConfig::default();
        let mut s = TrackerState::new();
        let at = |t: u64| DetectionCandidate::new(bx(10. + 2. * t as f64, 50., 30., 60.), 0.9);
        for f in 0..10 {
            s.step(f, &[at(f)], &cfg).unwrap();
        }
        for f in 10..10 + cfg.lifecycle.max_age as u64 {
            let out = s.step(f, &[], &cfg).unwrap();
            assert_eq!(out.len(), 1);
            assert_eq!(out[0].status, TrackStatus::Lost);
        }
        let f = 10 + cfg.lifecycle.max_age as u64;
        let out = s.step(f, &[at(f)], &cfg).unwrap();
        assert_eq!(out.len(), 1);
        assert_eq!((out[0].id, out[0].status), (1, TrackStatus::Confirmed));
    }

    #[test]
    fn retired_after_max_age() {
        let cfg = TrackerConfig { lifecycle: LifecycleConfig { max_age: 2, ..Default::default() }, ..Default::default() };
        let mut s = TrackerState::new();
        let c = DetectionCandidate::new(bx(0., 0., 10., 10.), 0.9);
        for f in 0..3 {
            s.step(f, std::slice::from_ref(&c), &cfg).unwrap();
        }
        s.step(3, &[], &cfg).unwrap();
        s.step(4, &[], &cfg).unwrap();
        assert_eq!(s.tracks.len(), 1);
        s.step(5, &[], &cfg).unwrap();
        assert!(s.tracks.is_empty());
        // Ids are never reused.
        let out = s.step(6, &[c], &cfg).unwrap();
        assert_eq!(out[0].id, 2);
    }

    #[test]
    fn tentative_dies_on_first_miss_and_low_objectness_never_spawns() {
        let cfg = TrackerConfig::default();
        let mut s = TrackerState::new();
        s.step(0, &[DetectionCandidate::new(bx(0., 0., 10., 10.), 0.9)], &cfg).unwrap();
        s.step(1, &[], &cfg).unwrap();
        assert!(s.tracks.is_empty());
        s.step(2, &[DetectionCandidate::new(bx(0., 0., 10., 10.), 0.3)], &cfg).unwrap();
        assert!(s.tracks.is_empty());
    }

    #[test]
    fn memory_follows_embeddings() {
        let cfg = TrackerConfig::default();
        let mut s = TrackerState::new();
        let mk = |e: Vec<f64>| DetectionCandidate { embedding: Some(e), ..DetectionCandidate::new(bx(0., 0., 10., 10.), 0.9) };
        s.step(0, &[mk(vec![1.0, 0.0])], &cfg).unwrap();
        s.step(1, &[mk(vec![0.0, 1.0])], &cfg).unwrap();
        let t = &s.tracks[0];
        let m = t.memory.as_ref().unwrap();
        // Stationary box: s_kf = 1, gamma = 1 - 0.9.
        assert!((m.gamma - 0.1).abs() < 1e-12);
        assert!((m.embedding[0] - 0.1).abs() < 1e-12 && (m.embedding[1] - 0.9).abs() < 1e-12);
        assert_eq!(t.keys.len(), 2);
        let sel = t.select_cached_keys(&ProjectionPair::identity(2), 1, SelfBranchReduce::ColumnMean).unwrap();
        assert_eq!(sel.len(), 1);
        assert!(matches!(s.step(2, &[mk(vec![1.0, 0.0, 0.0])], &cfg), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn cosine_fallback_prefers_own_appearance() {
        let cfg = TrackerConfig {
            association: AssociationConfig { alpha: 1.0, ..Default::default() },
            lifecycle: LifecycleConfig { n_init: 1, ..Default::default() },
            ..Default::default()
        };
        let mut s = TrackerState::new();
        let mk = |x: f64, e: Vec<f64>| DetectionCandidate { embedding: Some(e), ..DetectionCandidate::new(bx(x, 0., 10., 10.), 0.9) };
        s.step(0, &[mk(0., vec![1.0, 0.0]), mk(100., vec![0.0, 1.0])], &cfg).unwrap();
        // Positions swap, appearances follow: alpha = 1 must follow appearance.
        let out = s.step(1, &[mk(0., vec![0.0, 1.0]), mk(100., vec![1.0, 0.0])], &cfg).unwrap();
        let by_id: Vec<(u64, f64)> = out.iter().map(|o| (o.id, o.bbox.x)).collect();
        assert_eq!(by_id, vec![(1, 100.0), (2, 0.0)]);
    }

    #[test]
    fn alpha_zero_is_motion_only() {
        let cfg = TrackerConfig {
            association: AssociationConfig { alpha: 0.0, ..Default::default() },
            lifecycle: LifecycleConfig { n_init: 1, ..Default::default() },
            ..Default::default()
        };
        let mut s = TrackerState::new();
        let mk = |x: f64, e: Vec<f64>| DetectionCandidate { embedding: Some(e), ..DetectionCandidate::new(bx(x, 0., 10., 10.), 0.9) };
        s.step(0, &[mk(0., vec![1.0, 0.0]), mk(100., vec![0.0, 1.0])], &cfg).unwrap();
        let out = s.step(1, &[mk(1., vec![0.0, 1.0]), mk(101., vec![1.0, 0.0])], &cfg).unwrap();
        let by_id: Vec<(u64, f64)> = out.iter().map(|o| (o.id, o.bbox.x)).collect();
        assert_eq!(by_id, vec![(1, 1.0), (2, 101.0)]);
    }

    fn brute_best(m: &[Vec<f64>], cols: usize, thr: f64) -> f64 {
        fn go(i: usize, m: &[Vec<f64>], used: &mut [bool], thr: f64) -> f64 {
            if i == m.len() {
                return 0.0;
            }
            let mut best = go(i + 1, m, used, thr);
            for j in 0..used.len() {
                if !used[j] && m[i][j] >= thr {
                    used[j] = true;
                    best = best.max(m[i][j] + go(i + 1, m, used, thr));
                    used[j] = false;
                }
            }
            best
        }
        go(0, m, &mut vec![false; cols], thr)
    }

    proptest! {
        #[test]
        fn fused_monotone_and_bounded(a in 0.0..=1.0f64, b in 0.0..=1.0f64, alpha in 0.0..=1.0f64, da in 0.0..0.5f64) {
            let f = fused_score(a, b, alpha);
            prop_assert!(f <= a.max(b) + 1e-15);
            prop_assert!(fused_score((a + da).min(1.0), b, alpha) >= f - 1e-15);
            prop_assert!(fused_score(a, (b + da).min(1.0), alpha) >= f - 1e-15);
        }

        #[test]
        fn hungarian_dominates_greedy(seed in any::<u64>()) {
            let mut rng = SeededRng::new(seed);
            let r = 1 + rng.below(6) as usize;
            let c = 1 + rng.below(6) as usize;
            let m: Vec<Vec<f64>> = (0..r).map(|_| (0..c).map(|_| rng.uniform()).collect()).collect();
            let h = assign(&m, c, AssociationMode::Hungarian, 0.1).unwrap();
            let g = assign(&m, c, AssociationMode::Greedy, 0.1).unwrap();
            for pairs in [&h, &g] {
                let mut rows: Vec<usize> = pairs.iter().map(|p| p.0).collect();
                let mut cols: Vec<usize> = pairs.iter().map(|p| p.1).collect();
                rows.dedup();
                cols.sort();
                cols.dedup();
                prop_assert_eq!(rows.len(), pairs.len());
                prop_assert_eq!(cols.len(), pairs.len());
            }
            let total = |p: &[(usize, usize)]| p.iter().map(|&(i, j)| m[i][j]).sum::<f64>();
            prop_assert!(total(&h) >= total(&g) - 1e-12);
            prop_assert!((total(&h) - brute_best(&m, c, 0.1)).abs() < 1e-12);
        }

        #[test]
        fn buffer_gamma_range(s in 0.0..=1.0f64, tau in 0.0..=1.0f64) {
            let (_, g) = temporal_buffer_update(&[0.0], &[1.0], s, tau).unwrap();
            prop_assert!(g >= 1.0 - tau - 1e-15 && g <= 1.0);
        }
    }
}
