use std::path::{Path, PathBuf};

use crate::association::{AssociationMode, TrackerConfig};
use crate::temporal_memory::{GateNetwork, ProjectionPair, SelfBranchReduce};
use crate::{Error, Result};

/// Every recognised key with its default and a short description.
pub const CONFIG_KEYS: &[(&str, &str, &str)] = &[
    ("kf.tau_kf", "1", "consecutive reliable matches before a Kalman correction (`inf` never corrects)"),
    ("kf.tau_obj", "0.5", "objectness at or above which an observation is reliable"),
    ("kf.pos_noise", "0.05", "position noise std, fraction of box size"),
    ("kf.vel_noise", "0.025", "velocity noise std, fraction of box size"),
    ("kf.obs_noise", "0.05", "observation noise std, fraction of box size"),
    ("assoc.alpha", "0.5", "weight of mask affinity in the fused score"),
    ("assoc.mode", "hungarian", "`hungarian` (one-to-one optimum) or `greedy` (per-track argmax)"),
    ("assoc.tau_match", "0.1", "minimum fused score for a match"),
    ("buffer.tau_gamma", "0.9", "cap on the motion score used by the memory decay"),
    ("lifecycle.tau_birth", "0.6", "minimum objectness for an unmatched candidate to start a track"),
    ("lifecycle.n_init", "3", "consecutive matches before a track is confirmed"),
    ("lifecycle.max_age", "30", "frames a lost track may coast before retirement"),
    ("cache.k", "4", "frames kept by memory-cache selection"),
    ("cache.window", "16", "past key embeddings retained per track"),
    ("cache.reduce", "column", "self-branch reduction: `column`, `row` or `full`"),
    ("queue.T", "8", "motion-queue capacity"),
    ("model.dim", "16", "latent dimension of seeded projection and gate weights"),
    ("model.seed", "0", "seed for projection, gate and latent-map weights"),
    ("model.projection", "", "optional tensor file with W_q then W_k"),
    ("model.gate", "", "optional tensor file with gate weights then biases"),
    ("eval.iou_threshold", "0.5", "IoU needed for a CLEAR / identity match"),
    ("eval.include_lost", "false", "report coasting tracks' predicted boxes as output"),
];

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub tracker: TrackerConfig,
    pub cache_k: usize,
    pub cache_reduce: SelfBranchReduce,
    pub model_dim: usize,
    pub model_seed: u64,
    pub model_projection: Option<PathBuf>,
    pub model_gate: Option<PathBuf>,
    pub eval_iou: f64,
    pub eval_include_lost: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        let mut cfg = RunConfig {
            tracker: TrackerConfig::default(),
            cache_k: 0,
            cache_reduce: SelfBranchReduce::default(),
            model_dim: 0,
            model_seed: 0,
            model_projection: None,
            model_gate: None,
            eval_iou: 0.0,
            eval_include_lost: false,
        };
        for (key, default, _) in CONFIG_KEYS {
            cfg.set(key, default).expect("documented defaults parse");
        }
        cfg
    }
}

fn number<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("{key}: cannot parse {value:?}")))
}

fn unit_interval(key: &str, value: &str) -> Result<f64> {
    let v: f64 = number(key, value)?;
    if (0.0..=1.0).contains(&v) {
        Ok(v)
    } else {
        Err(Error::Config(format!("{key} = {v} outside [0, 1]")))
    }
}

fn positive(key: &str, value: &str) -> Result<f64> {
    let v: f64 = number(key, value)?;
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(Error::Config(format!("{key} = {v} must be positive")))
    }
}

fn at_least_one(key: &str, value: &str) -> Result<usize> {
    let v: usize = number(key, value)?;
    if v >= 1 {
        Ok(v)
    } else {
        Err(Error::Config(format!("{key} must be at least 1")))
    }
}

impl RunConfig {
    /// Parses `key = value` lines; `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = RunConfig::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected `key = value`, got {raw:?}", i + 1)))?;
            cfg.set(key.trim(), value.trim())
                .map_err(|e| Error::Config(format!("line {}: {e}", i + 1)))?;
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let t = &mut self.tracker;
        match key {
            "kf.tau_kf" => {
                t.kinematics.tau_kf = match value {
                    "inf" | "never" => None,
                    v => Some(number(key, v)?),
                }
            }
            "kf.tau_obj" => t.kinematics.tau_obj = unit_interval(key, value)?,
            "kf.pos_noise" => t.kinematics.pos_noise = positive(key, value)?,
            "kf.vel_noise" => t.kinematics.vel_noise = positive(key, value)?,
            "kf.obs_noise" => t.kinematics.obs_noise = positive(key, value)?,
            "assoc.alpha" => t.association.alpha = unit_interval(key, value)?,
            "assoc.mode" => t.association.mode = value.parse::<AssociationMode>()?,
            "assoc.tau_match" => t.association.tau_match = unit_interval(key, value)?,
            "buffer.tau_gamma" => t.tau_gamma = unit_interval(key, value)?,
            "lifecycle.tau_birth" => t.lifecycle.tau_birth = unit_interval(key, value)?,
            "lifecycle.n_init" => t.lifecycle.n_init = at_least_one(key, value)? as u32,
            "lifecycle.max_age" => t.lifecycle.max_age = number(key, value)?,
            "cache.k" => self.cache_k = at_least_one(key, value)?,
            "cache.window" => t.key_window = at_least_one(key, value)?,
            "cache.reduce" => self.cache_reduce = value.parse()?,
            "queue.T" => t.queue_len = at_least_one(key, value)?,
            "model.dim" => self.model_dim = at_least_one(key, value)?,
            "model.seed" => self.model_seed = number(key, value)?,
            "model.projection" => self.model_projection = (!value.is_empty()).then(|| PathBuf::from(value)),
            "model.gate" => self.model_gate = (!value.is_empty()).then(|| PathBuf::from(value)),
            "eval.iou_threshold" => {
                let v: f64 = number(key, value)?;
                if !(v > 0.0 && v < 1.0) {
                    return Err(Error::Config(format!("{key} = {v} outside (0, 1)")));
                }
                self.eval_iou = v;
            }
            "eval.include_lost" => self.eval_include_lost = number(key, value)?,
            other => return Err(Error::Config(format!("unknown key {other:?}"))),
        }
        Ok(())
    }

    pub fn projection(&self) -> Result<ProjectionPair> {
        match &self.model_projection {
            Some(p) => ProjectionPair::load(p),
            None => Ok(ProjectionPair::seeded(self.model_dim, self.model_seed)),
        }
    }

    pub fn gate(&self) -> Result<GateNetwork> {
        match &self.model_gate {
            Some(p) => GateNetwork::load(p),
            None => Ok(GateNetwork::seeded(self.model_dim, self.model_seed)),
        }
    }
}
