//! CLEAR MOT, identity (IDF1) and HOTA metrics over box trajectories.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use crate::assignment;
use crate::geometry::{iou, BoundingBox};
use crate::{Error, Result};

/// Per-frame boxes keyed by identity.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrajectorySet {
    frames: BTreeMap<u64, BTreeMap<u64, BoundingBox>>,
}

impl TrajectorySet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, frame: u64, id: u64, bbox: BoundingBox) -> Result<()> {
        if !bbox.is_valid() {
            return Err(Error::InvalidBox { x: bbox.x, y: bbox.y, w: bbox.w, h: bbox.h });
        }
        let slot = self.frames.entry(frame).or_default();
        if slot.insert(id, bbox).is_some() {
            return Err(Error::DuplicateIdentity { frame, id });
        }
        Ok(())
    }

    pub fn remove(&mut self, frame: u64, id: u64) -> Option<BoundingBox> {
        let slot = self.frames.get_mut(&frame)?;
        let b = slot.remove(&id);
        if slot.is_empty() {
            self.frames.remove(&frame);
        }
        b
    }

    pub fn frame(&self, frame: u64) -> Option<&BTreeMap<u64, BoundingBox>> {
        self.frames.get(&frame)
    }

    pub fn frames(&self) -> impl Iterator<Item = (u64, &BTreeMap<u64, BoundingBox>)> {
        self.frames.iter().map(|(f, m)| (*f, m))
    }

    pub fn frame_indices(&self) -> impl Iterator<Item = u64> + '_ {
        self.frames.keys().copied()
    }

    pub fn total_boxes(&self) -> usize {
        self.frames.values().map(BTreeMap::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.total_boxes() == 0
    }

    pub fn ids(&self) -> BTreeSet<u64> {
        self.frames.values().flat_map(|m| m.keys().copied()).collect()
    }

    /// Applies `f` to every identity.
    pub fn relabel(&self, f: impl Fn(u64) -> u64) -> Result<TrajectorySet> {
        let mut out = TrajectorySet::new();
        for (frame, boxes) in self.frames() {
            for (&id, b) in boxes {
                out.insert(frame, f(id), *b)?;
            }
        }
        Ok(out)
    }
}

fn union_frames(gt: &TrajectorySet, hyp: &TrajectorySet) -> BTreeSet<u64> {
    gt.frame_indices().chain(hyp.frame_indices()).collect()
}

fn boxes_at(set: &TrajectorySet, frame: u64) -> Vec<(u64, BoundingBox)> {
    set.frame(frame).map(|m| m.iter().map(|(i, b)| (*i, *b)).collect()).unwrap_or_default()
}

fn require_gt(gt: &TrajectorySet) -> Result<()> {
    if gt.is_empty() {
        Err(Error::NoGroundTruth)
    } else {
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClearMetrics {
    pub mota: f64,
    pub fp: usize,
    pub fn_: usize,
    pub ids: usize,
    pub matches: usize,
    pub gt_boxes: usize,
}

/// CLEAR MOT counts. Correspondences persist while their IoU stays at or above
/// `iou_threshold`; the rest are completed by maximum-IoU matching.
pub fn clear_metrics(gt: &TrajectorySet, hyp: &TrajectorySet, iou_threshold: f64) -> Result<ClearMetrics> {
    require_gt(gt)?;
    let mut last: HashMap<u64, u64> = HashMap::new();
    let (mut fp, mut fn_, mut ids, mut matches) = (0usize, 0usize, 0usize, 0usize);

    for frame in union_frames(gt, hyp) {
        let g = boxes_at(gt, frame);
        let h = boxes_at(hyp, frame);
        let mut g_used = vec![false; g.len()];
        let mut h_used = vec![false; h.len()];
        let mut pairs: Vec<(usize, usize)> = Vec::new();

        for (gi, (gid, gb)) in g.iter().enumerate() {
            let Some(&hid) = last.get(gid) else { continue };
            if let Some(hi) = h.iter().position(|(id, _)| *id == hid) {
                if !h_used[hi] && iou(gb, &h[hi].1) >= iou_threshold {
                    g_used[gi] = true;
                    h_used[hi] = true;
                    pairs.push((gi, hi));
                }
            }
        }

        let free_g: Vec<usize> = (0..g.len()).filter(|&i| !g_used[i]).collect();
        let free_h: Vec<usize> = (0..h.len()).filter(|&j| !h_used[j]).collect();
        let sims: Vec<Vec<f64>> = free_g
            .iter()
            .map(|&gi| free_h.iter().map(|&hi| iou(&g[gi].1, &h[hi].1)).collect())
            .collect();
        for (a, b) in assignment::maximize_allowed(&sims, free_h.len(), |a, b| sims[a][b] >= iou_threshold) {
            let (gi, hi) = (free_g[a], free_h[b]);
            let (gid, hid) = (g[gi].0, h[hi].0);
            if last.get(&gid).is_some_and(|&prev| prev != hid) {
                ids += 1;
            }
            last.insert(gid, hid);
            pairs.push((gi, hi));
        }

        matches += pairs.len();
        fp += h.len() - pairs.len();
        fn_ += g.len() - pairs.len();
    }

    let gt_boxes = gt.total_boxes();
    Ok(ClearMetrics {
        mota: 1.0 - (fp + fn_ + ids) as f64 / gt_boxes as f64,
        fp,
        fn_,
        ids,
        matches,
        gt_boxes,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct IdentityMetrics {
    pub idf1: f64,
    pub idp: f64,
    pub idr: f64,
    pub idtp: usize,
}

/// IDF1/IDP/IDR from the identity assignment maximizing true-positive frames.
pub fn identity_metrics(gt: &TrajectorySet, hyp: &TrajectorySet, iou_threshold: f64) -> Result<IdentityMetrics> {
    require_gt(gt)?;
    let gt_ids: Vec<u64> = gt.ids().into_iter().collect();
    let hyp_ids: Vec<u64> = hyp.ids().into_iter().collect();
    let gi: HashMap<u64, usize> = gt_ids.iter().enumerate().map(|(i, id)| (*id, i)).collect();
    let hi: HashMap<u64, usize> = hyp_ids.iter().enumerate().map(|(i, id)| (*id, i)).collect();
    let mut overlap = vec![vec![0.0f64; hyp_ids.len()]; gt_ids.len()];
    for frame in union_frames(gt, hyp) {
        let g = boxes_at(gt, frame);
        let h = boxes_at(hyp, frame);
        for (gid, gb) in &g {
            for (hid, hb) in &h {
                if iou(gb, hb) >= iou_threshold {
                    overlap[gi[gid]][hi[hid]] += 1.0;
                }
            }
        }
    }
    let idtp: f64 = assignment::maximize(&overlap, hyp_ids.len())
        .iter()
        .enumerate()
        .filter_map(|(i, j)| j.map(|j| overlap[i][j]))
        .sum();
    let idtp = idtp.round() as usize;
    let (n_gt, n_hyp) = (gt.total_boxes(), hyp.total_boxes());
    let ratio = |num: usize, den: usize| if den == 0 { 0.0 } else { num as f64 / den as f64 };
    Ok(IdentityMetrics {
        idf1: ratio(2 * idtp, n_gt + n_hyp),
        idp: ratio(idtp, n_hyp),
        idr: ratio(idtp, n_gt),
        idtp,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct HotaMetrics {
    pub hota: f64,
    pub deta: f64,
    pub assa: f64,
}

/// Localization thresholds 0.05, 0.10, ..., 0.95.
pub fn hota_alphas() -> Vec<f64> {
    (1..=19).map(|i| i as f64 * 0.05).collect()
}

/// HOTA averaged over the alpha sweep, with IoU as the localization similarity.
pub fn hota(gt: &TrajectorySet, hyp: &TrajectorySet) -> Result<HotaMetrics> {
    require_gt(gt)?;
    let gt_ids: Vec<u64> = gt.ids().into_iter().collect();
    let hyp_ids: Vec<u64> = hyp.ids().into_iter().collect();
    let gix: HashMap<u64, usize> = gt_ids.iter().enumerate().map(|(i, id)| (*id, i)).collect();
    let hix: HashMap<u64, usize> = hyp_ids.iter().enumerate().map(|(i, id)| (*id, i)).collect();
    let (ng, nh) = (gt_ids.len(), hyp_ids.len());
    let eps = f64::EPSILON;

    struct Frame {
        g: Vec<usize>,
        h: Vec<usize>,
        sim: Vec<Vec<f64>>,
    }
    let frames: Vec<Frame> = union_frames(gt, hyp)
        .into_iter()
        .map(|f| {
            let g = boxes_at(gt, f);
            let h = boxes_at(hyp, f);
            Frame {
                sim: g.iter().map(|(_, gb)| h.iter().map(|(_, hb)| iou(gb, hb)).collect()).collect(),
                g: g.iter().map(|(id, _)| gix[id]).collect(),
                h: h.iter().map(|(id, _)| hix[id]).collect(),
            }
        })
        .collect();

    // Global alignment between identities from soft per-frame Jaccard overlaps.
    let mut potential = vec![vec![0.0f64; nh]; ng];
    let mut gt_count = vec![0.0f64; ng];
    let mut hyp_count = vec![0.0f64; nh];
    for fr in &frames {
        let row_sum: Vec<f64> = fr.sim.iter().map(|r| r.iter().sum()).collect();
        let col_sum: Vec<f64> = (0..fr.h.len()).map(|j| fr.sim.iter().map(|r| r[j]).sum()).collect();
        for (a, &gi) in fr.g.iter().enumerate() {
            for (b, &hj) in fr.h.iter().enumerate() {
                let denom = row_sum[a] + col_sum[b] - fr.sim[a][b];
                if denom > eps {
                    potential[gi][hj] += fr.sim[a][b] / denom;
                }
            }
        }
        for &gi in &fr.g {
            gt_count[gi] += 1.0;
        }
        for &hj in &fr.h {
            hyp_count[hj] += 1.0;
        }
    }
    let alignment: Vec<Vec<f64>> = (0..ng)
        .map(|i| (0..nh).map(|j| potential[i][j] / (gt_count[i] + hyp_count[j] - potential[i][j])).collect())
        .collect();

    let alphas = hota_alphas();
    let mut tp = vec![0.0f64; alphas.len()];
    let mut fn_ = vec![0.0f64; alphas.len()];
    let mut fp = vec![0.0f64; alphas.len()];
    let mut match_counts = vec![vec![vec![0.0f64; nh]; ng]; alphas.len()];

    for fr in &frames {
        if fr.g.is_empty() || fr.h.is_empty() {
            for a in 0..alphas.len() {
                fn_[a] += fr.g.len() as f64;
                fp[a] += fr.h.len() as f64;
            }
            continue;
        }
        let score: Vec<Vec<f64>> = fr
            .g
            .iter()
            .enumerate()
            .map(|(a, &gi)| fr.h.iter().enumerate().map(|(b, &hj)| alignment[gi][hj] * fr.sim[a][b]).collect())
            .collect();
        let pairs: Vec<(usize, usize)> = assignment::maximize(&score, fr.h.len())
            .into_iter()
            .enumerate()
            .filter_map(|(a, b)| b.map(|b| (a, b)))
            .collect();
        for (k, &alpha) in alphas.iter().enumerate() {
            let mut n = 0usize;
            for &(a, b) in &pairs {
                if fr.sim[a][b] >= alpha - eps {
                    n += 1;
                    match_counts[k][fr.g[a]][fr.h[b]] += 1.0;
                }
            }
            tp[k] += n as f64;
            fn_[k] += (fr.g.len() - n) as f64;
            fp[k] += (fr.h.len() - n) as f64;
        }
    }

    let (mut hota_sum, mut deta_sum, mut assa_sum) = (0.0, 0.0, 0.0);
    for k in 0..alphas.len() {
        let mut ass = 0.0;
        for i in 0..ng {
            for j in 0..nh {
                let m = match_counts[k][i][j];
                if m > 0.0 {
                    ass += m * m / (gt_count[i] + hyp_count[j] - m).max(1.0);
                }
            }
        }
        let assa = ass / tp[k].max(1.0);
        let deta = tp[k] / (tp[k] + fn_[k] + fp[k]).max(1.0);
        hota_sum += (deta * assa).sqrt();
        deta_sum += deta;
        assa_sum += assa;
    }
    let n = alphas.len() as f64;
    Ok(HotaMetrics { hota: hota_sum / n, deta: deta_sum / n, assa: assa_sum / n })
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub mota: f64,
    pub idf1: f64,
    pub idp: f64,
    pub idr: f64,
    pub ids: usize,
    pub fp: usize,
    pub fn_: usize,
    pub hota: f64,
    pub deta: f64,
    pub assa: f64,
    pub gt_boxes: usize,
    pub hyp_boxes: usize,
}

pub fn evaluate(gt: &TrajectorySet, hyp: &TrajectorySet, iou_threshold: f64) -> Result<EvalReport> {
    if !(iou_threshold > 0.0 && iou_threshold < 1.0) {
        return Err(Error::Config(format!("eval.iou_threshold must lie in (0, 1), got {iou_threshold}")));
    }
    let clear = clear_metrics(gt, hyp, iou_threshold)?;
    let id = identity_metrics(gt, hyp, iou_threshold)?;
    let h = hota(gt, hyp)?;
    Ok(EvalReport {
        mota: clear.mota,
        idf1: id.idf1,
        idp: id.idp,
        idr: id.idr,
        ids: clear.ids,
        fp: clear.fp,
        fn_: clear.fn_,
        hota: h.hota,
        deta: h.deta,
        assa: h.assa,
        gt_boxes: clear.gt_boxes,
        hyp_boxes: hyp.total_boxes(),
    })
}

impl EvalReport {
    pub fn entries(&self) -> Vec<(&'static str, String)> {
        vec![
            ("MOTA", format!("{:.3}", self.mota)),
            ("IDF1", format!("{:.3}", self.idf1)),
            ("IDP", format!("{:.3}", self.idp)),
            ("IDR", format!("{:.3}", self.idr)),
            ("IDS", self.ids.to_string()),
            ("FP", self.fp.to_string()),
            ("FN", self.fn_.to_string()),
            ("HOTA", format!("{:.3}", self.hota)),
            ("DetA", format!("{:.3}", self.deta)),
            ("AssA", format!("{:.3}", self.assa)),
        ]
    }

    /// One `KEY=value` per line.
    pub fn to_kv(&self) -> String {
        self.entries().into_iter().map(|(k, v)| format!("{k}={v}\n")).collect()
    }
}

impl fmt::Display for EvalReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let entries = self.entries();
        let header: Vec<String> = entries.iter().map(|(k, v)| format!("{k:>w$}", w = v.len().max(k.len()))).collect();
        let values: Vec<String> = entries.iter().map(|(k, v)| format!("{v:>w$}", w = v.len().max(k.len()))).collect();
        writeln!(f, "{}", header.join("  "))?;
        write!(f, "{}", values.join("  "))
    }
}
