//! MOTChallenge text files plus the affinity sidecar.
//!
//! Lines are `frame,id,left,top,width,height,conf,x,y,z`; trailing columns after
//! `height` are optional. `id = -1` marks a detection. Ground-truth lines whose
//! `conf` is 0 are ignored, as in MOTChallenge.
//!
//! The sidecar `<name>.aff` sits next to a detection file and starts with
//! [`AFFINITY_HEADER`]. Each following line is
//! `<frame> <index> <mask> <embedding>` where `index` is the candidate's
//! position within its frame in the detection file, `<mask>` is `-`,
//! `g:<score>` or `t:<id>=<score>,<id>=<score>...`, and `<embedding>` is `-` or
//! comma-separated reals.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use super::run::FrameOutput;
use super::write_atomic;
use crate::association::{DetectionCandidate, MaskAffinity, TrackStatus};
use crate::geometry::BoundingBox;
use crate::metrics::TrajectorySet;
use crate::simulator::Scenario;
use crate::{Error, Result};

pub const AFFINITY_HEADER: &str = "mottrack-affinity v1";

/// Candidates per frame, in file order.
pub type Detections = BTreeMap<u64, Vec<DetectionCandidate>>;

#[derive(Debug, Clone, PartialEq, Default)]
pub struct MotFile {
    pub tracks: TrajectorySet,
    pub detections: Detections,
}

pub fn affinity_path(det: &Path) -> PathBuf {
    det.with_extension("aff")
}

fn parse_err(path: &Path, line: usize, msg: impl Into<String>) -> Error {
    Error::Parse { path: path.to_path_buf(), line, msg: msg.into() }
}

fn parse_id(tok: &str) -> Option<i64> {
    tok.parse::<i64>().ok().or_else(|| {
        let v: f64 = tok.parse().ok()?;
        (v.fract() == 0.0 && v.abs() < 1e15).then_some(v as i64)
    })
}

/// Parses a MOTChallenge file and, when present, its affinity sidecar.
pub fn read_mot(path: &Path) -> Result<MotFile> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut out = MotFile::default();
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split(',').map(str::trim).collect();
        if cols.len() < 6 {
            return Err(parse_err(path, line_no, format!("expected at least 6 columns, found {}", cols.len())));
        }
        let frame = parse_id(cols[0])
            .filter(|f| *f >= 0)
            .ok_or_else(|| parse_err(path, line_no, format!("bad frame {:?}", cols[0])))? as u64;
        let id = parse_id(cols[1]).ok_or_else(|| parse_err(path, line_no, format!("bad id {:?}", cols[1])))?;
        let mut nums = [0.0f64; 4];
        for (k, slot) in nums.iter_mut().enumerate() {
            *slot = cols[2 + k]
                .parse()
                .map_err(|_| parse_err(path, line_no, format!("bad number {:?}", cols[2 + k])))?;
        }
        let bbox = BoundingBox::new(nums[0], nums[1], nums[2], nums[3])
            .map_err(|e| parse_err(path, line_no, e.to_string()))?;
        let conf: f64 = match cols.get(6) {
            Some(c) => c.parse().map_err(|_| parse_err(path, line_no, format!("bad confidence {c:?}")))?,
            None => 1.0,
        };
        match id {
            -1 => {
                if !(0.0..=1.0).contains(&conf) {
                    return Err(parse_err(path, line_no, format!("detection confidence {conf} outside [0, 1]")));
                }
                out.detections.entry(frame).or_default().push(DetectionCandidate::new(bbox, conf));
            }
            id if id >= 0 => {
                if conf == 0.0 {
                    continue;
                }
                out.tracks
                    .insert(frame, id as u64, bbox)
                    .map_err(|e| parse_err(path, line_no, e.to_string()))?;
            }
            other => return Err(parse_err(path, line_no, format!("negative id {other}"))),
        }
    }
    let aff = affinity_path(path);
    if aff != path && aff.exists() {
        read_affinities(&aff, &mut out.detections)?;
    }
    Ok(out)
}

pub fn read_trajectories(path: &Path) -> Result<TrajectorySet> {
    Ok(read_mot(path)?.tracks)
}

pub fn read_detections(path: &Path) -> Result<Detections> {
    Ok(read_mot(path)?.detections)
}

fn parse_reals(s: &str) -> Option<Vec<f64>> {
    s.split(',').map(|t| t.parse::<f64>().ok().filter(|v| v.is_finite())).collect()
}

fn read_affinities(path: &Path, dets: &mut Detections) -> Result<()> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim() == AFFINITY_HEADER => {}
        _ => return Err(parse_err(path, 1, format!("missing header {AFFINITY_HEADER:?}"))),
    }
    for (i, raw) in lines {
        let line_no = i + 1;
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        let toks: Vec<&str> = line.split_whitespace().collect();
        let [frame, index, mask, emb] = toks[..] else {
            return Err(parse_err(path, line_no, "expected `<frame> <index> <mask> <embedding>`"));
        };
        let frame: u64 = frame.parse().map_err(|_| parse_err(path, line_no, "bad frame"))?;
        let index: usize = index.parse().map_err(|_| parse_err(path, line_no, "bad index"))?;
        let cand = dets
            .get_mut(&frame)
            .and_then(|v| v.get_mut(index))
            .ok_or_else(|| parse_err(path, line_no, format!("no detection {index} in frame {frame}")))?;
        cand.s_mask = if mask == "-" {
            MaskAffinity::Absent
        } else if let Some(g) = mask.strip_prefix("g:") {
            MaskAffinity::Global(g.parse().map_err(|_| parse_err(path, line_no, "bad global affinity"))?)
        } else if let Some(row) = mask.strip_prefix("t:") {
            let entries: Option<Vec<(u64, f64)>> = row
                .split(',')
                .map(|kv| {
                    let (k, v) = kv.split_once('=')?;
                    Some((k.parse().ok()?, v.parse().ok()?))
                })
                .collect();
            MaskAffinity::PerTrack(entries.ok_or_else(|| parse_err(path, line_no, "bad per-track affinity row"))?)
        } else {
            return Err(parse_err(path, line_no, format!("bad mask field {mask:?}")));
        };
        cand.embedding = if emb == "-" {
            None
        } else {
            Some(parse_reals(emb).ok_or_else(|| parse_err(path, line_no, "bad embedding"))?)
        };
    }
    Ok(())
}

fn join(values: &[f64]) -> String {
    values.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(",")
}

/// Ground-truth style file, confidence 1.
pub fn write_trajectories(path: &Path, set: &TrajectorySet) -> Result<()> {
    let mut out = String::new();
    for (frame, boxes) in set.frames() {
        for (id, b) in boxes {
            let _ = writeln!(out, "{frame},{id},{},{},{},{},1,-1,-1,-1", b.x, b.y, b.w, b.h);
        }
    }
    write_atomic(path, out.as_bytes())
}

/// Detection file plus sidecar; the sidecar is only written when some candidate
/// carries affinity data.
pub fn write_detections(path: &Path, dets: &Detections) -> Result<()> {
    let mut out = String::new();
    let mut aff = format!("{AFFINITY_HEADER}\n");
    let mut any_aff = false;
    for (frame, cands) in dets {
        for (index, c) in cands.iter().enumerate() {
            let b = c.bbox;
            let _ = writeln!(out, "{frame},-1,{},{},{},{},{},-1,-1,-1", b.x, b.y, b.w, b.h, c.s_obj);
            let mask = match &c.s_mask {
                MaskAffinity::Absent => "-".to_string(),
                MaskAffinity::Global(g) => format!("g:{g}"),
                MaskAffinity::PerTrack(row) => format!(
                    "t:{}",
                    row.iter().map(|(id, s)| format!("{id}={s}")).collect::<Vec<_>>().join(",")
                ),
            };
            let emb = c.embedding.as_deref().map_or_else(|| "-".to_string(), join);
            if mask != "-" || emb != "-" {
                any_aff = true;
                let _ = writeln!(aff, "{frame} {index} {mask} {emb}");
            }
        }
    }
    write_atomic(path, out.as_bytes())?;
    if any_aff {
        write_atomic(&affinity_path(path), aff.as_bytes())?;
    }
    Ok(())
}

/// Tracker output: confirmed tracks, plus coasting ones when `include_lost`.
pub fn write_tracks(path: &Path, frames: &[FrameOutput], include_lost: bool) -> Result<()> {
    let mut out = String::new();
    for f in frames {
        for o in &f.outputs {
            let emit = match o.status {
                TrackStatus::Confirmed => true,
                TrackStatus::Lost => include_lost,
                TrackStatus::Tentative => false,
            };
            if emit {
                let b = o.bbox;
                let _ = writeln!(out, "{},{},{},{},{},{},{},-1,-1,-1", f.frame, o.id, b.x, b.y, b.w, b.h, o.score);
            }
        }
    }
    write_atomic(path, out.as_bytes())
}

/// Writes `gt.txt`, `det.txt` and `det.aff` into `dir`.
pub fn write_scenario(dir: &Path, scenario: &Scenario) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write_trajectories(&dir.join("gt.txt"), &scenario.gt)?;
    let dets: Detections = scenario.frames.iter().map(|f| (f.frame, f.candidates.clone())).collect();
    write_detections(&dir.join("det.txt"), &dets)
}
