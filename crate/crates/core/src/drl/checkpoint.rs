//! Binary checkpoint container and agent (de)serialization.
//!
//! Layout, all integers little-endian:
//! `magic[8] | version u32 | count u32 | count × (name_len u16, name, ndim u8,
//! dims u64…) | raw f64 data of every tensor in table order | fnv1a64 u64`.

use std::fs;
use std::path::{Path, PathBuf};

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use super::nn::{Adam, Dense, Mlp, MlpGrads, ScalarAdam};
use super::observation::Observation;
use super::policy::{ActionSpec, Policy, ACTION_DIM};
use super::replay::{ReplayBuffer, Transition};
use super::sac::{SacAgent, SacHyper};
use crate::controller::CostWeights;
use crate::error::DrlError;

pub const MAGIC: &[u8; 8] = b"SFWCKPT\0";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

impl Tensor {
    pub fn new(name: impl Into<String>, shape: Vec<usize>, data: Vec<f64>) -> Self {
        debug_assert_eq!(shape.iter().product::<usize>(), data.len());
        Self {
            name: name.into(),
            shape,
            data,
        }
    }

    pub fn scalar(name: impl Into<String>, v: f64) -> Self {
        Self::new(name, vec![1], vec![v])
    }
}

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    h
}

pub fn encode(tensors: &[Tensor]) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&(tensors.len() as u32).to_le_bytes());
    for t in tensors {
        out.extend_from_slice(&(t.name.len() as u16).to_le_bytes());
        out.extend_from_slice(t.name.as_bytes());
        out.push(t.shape.len() as u8);
        for &d in &t.shape {
            out.extend_from_slice(&(d as u64).to_le_bytes());
        }
    }
    for t in tensors {
        for v in &t.data {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    let h = fnv1a(&out);
    out.extend_from_slice(&h.to_le_bytes());
    out
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], DrlError> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.buf.len());
        let end = end.ok_or_else(|| DrlError::Checkpoint("truncated".into()))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8, DrlError> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16, DrlError> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn u32(&mut self) -> Result<u32, DrlError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64, DrlError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

pub fn decode(bytes: &[u8]) -> Result<Vec<Tensor>, DrlError> {
    let bad = |m: &str| DrlError::Checkpoint(m.to_string());
    if bytes.len() < MAGIC.len() + 16 || &bytes[..8] != MAGIC {
        return Err(bad("bad magic"));
    }
    let (body, tail) = bytes.split_at(bytes.len() - 8);
    if fnv1a(body) != u64::from_le_bytes(tail.try_into().unwrap()) {
        return Err(bad("checksum mismatch"));
    }
    let mut r = Reader { buf: body, pos: 8 };
    let version = r.u32()?;
    if version != FORMAT_VERSION {
        return Err(DrlError::Checkpoint(format!("unsupported version {version}")));
    }
    let count = r.u32()? as usize;
    let mut table = Vec::with_capacity(count.min(4096));
    for _ in 0..count {
        let len = r.u16()? as usize;
        let name = std::str::from_utf8(r.take(len)?)
            .map_err(|_| bad("tensor name is not utf-8"))?
            .to_string();
        let ndim = r.u8()? as usize;
        let shape = (0..ndim).map(|_| r.u64().map(|d| d as usize)).collect::<Result<Vec<_>, _>>()?;
        table.push((name, shape));
    }
    let mut out = Vec::with_capacity(table.len());
    for (name, shape) in table {
        let n = shape
            .iter()
            .try_fold(1usize, |a, &d| a.checked_mul(d))
            .ok_or_else(|| bad("shape overflow"))?;
        let raw = r.take(n.checked_mul(8).ok_or_else(|| bad("shape overflow"))?)?;
        let data = raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        out.push(Tensor { name, shape, data });
    }
    if r.pos != body.len() {
        return Err(bad("trailing bytes"));
    }
    Ok(out)
}

pub fn write_tensors(path: &Path, tensors: &[Tensor]) -> Result<(), DrlError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    fs::write(path, encode(tensors))?;
    Ok(())
}

pub fn read_tensors(path: &Path) -> Result<Vec<Tensor>, DrlError> {
    decode(&fs::read(path)?)
}

fn push_layers(out: &mut Vec<Tensor>, prefix: &str, layers: &[Dense]) {
    for (i, l) in layers.iter().enumerate() {
        out.push(Tensor::new(
            format!("{prefix}.{i}.w"),
            vec![l.w.nrows(), l.w.ncols()],
            l.w.iter().copied().collect(),
        ));
        out.push(Tensor::new(format!("{prefix}.{i}.b"), vec![l.b.len()], l.b.to_vec()));
    }
}

fn push_adam(out: &mut Vec<Tensor>, prefix: &str, opt: &Adam) {
    push_layers(out, &format!("{prefix}.m"), &opt.m.layers);
    push_layers(out, &format!("{prefix}.v"), &opt.v.layers);
    out.push(Tensor::scalar(format!("{prefix}.t"), opt.t as f64));
}

/// Name-indexed view over decoded tensors.
struct Store(Vec<Tensor>);

impl Store {
    fn get(&self, name: &str) -> Result<&Tensor, DrlError> {
        self.0
            .iter()
            .find(|t| t.name == name)
            .ok_or_else(|| DrlError::Checkpoint(format!("missing tensor `{name}`")))
    }

    fn scalar(&self, name: &str) -> Result<f64, DrlError> {
        let t = self.get(name)?;
        if t.data.len() != 1 {
            return Err(DrlError::Checkpoint(format!("`{name}` is not a scalar")));
        }
        Ok(t.data[0])
    }

    fn layers(&self, prefix: &str) -> Result<Vec<Dense>, DrlError> {
        let mut layers = Vec::new();
        while self.0.iter().any(|t| t.name == format!("{prefix}.{}.w", layers.len())) {
            let i = layers.len();
            let w = self.get(&format!("{prefix}.{i}.w"))?;
            let b = self.get(&format!("{prefix}.{i}.b"))?;
            let (&[r, c], &[n]) = (w.shape.as_slice(), b.shape.as_slice()) else {
                return Err(DrlError::Checkpoint(format!("bad shape in `{prefix}.{i}`")));
            };
            if n != c || i > 0 && layers.last().is_some_and(|p: &Dense| p.w.ncols() != r) {
                return Err(DrlError::Checkpoint(format!("inconsistent shapes in `{prefix}`")));
            }
            layers.push(Dense {
                w: Array2::from_shape_vec((r, c), w.data.clone()).expect("checked shape"),
                b: Array1::from(b.data.clone()),
            });
        }
        if layers.is_empty() {
            return Err(DrlError::Checkpoint(format!("missing network `{prefix}`")));
        }
        Ok(layers)
    }

    fn mlp(&self, prefix: &str) -> Result<Mlp, DrlError> {
        Ok(Mlp {
            layers: self.layers(prefix)?,
        })
    }

    fn adam(&self, prefix: &str, like: &Mlp) -> Result<Adam, DrlError> {
        let m = MlpGrads {
            layers: self.layers(&format!("{prefix}.m"))?,
        };
        let v = MlpGrads {
            layers: self.layers(&format!("{prefix}.v"))?,
        };
        let same = |g: &MlpGrads| {
            g.layers.len() == like.layers.len()
                && g.layers.iter().zip(&like.layers).all(|(a, b)| a.w.dim() == b.w.dim())
        };
        if !same(&m) || !same(&v) {
            return Err(DrlError::Checkpoint(format!("optimizer shape mismatch in `{prefix}`")));
        }
        Ok(Adam {
            m,
            v,
            t: self.scalar(&format!("{prefix}.t"))? as u64,
        })
    }

    fn action_spec(&self) -> Result<ActionSpec, DrlError> {
        let t = self.get("action_spec")?;
        if t.shape != [2, ACTION_DIM] {
            return Err(DrlError::Checkpoint("bad action_spec shape".into()));
        }
        Ok(ActionSpec {
            low: std::array::from_fn(|i| t.data[i]),
            high: std::array::from_fn(|i| t.data[ACTION_DIM + i]),
        })
    }
}

/// Where training stood when a checkpoint was written.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct TrainProgress {
    /// Episodes completed.
    pub episode: u64,
    /// Agent steps taken.
    pub total_steps: u64,
}

pub fn agent_tensors(agent: &SacAgent, progress: TrainProgress) -> Vec<Tensor> {
    let mut out = Vec::new();
    let spec = agent.policy.spec;
    out.push(Tensor::new(
        "action_spec",
        vec![2, ACTION_DIM],
        spec.low.iter().chain(&spec.high).copied().collect(),
    ));
    push_layers(&mut out, "actor", &agent.policy.net.layers);
    push_layers(&mut out, "critic1", &agent.critic1.layers);
    push_layers(&mut out, "critic2", &agent.critic2.layers);
    push_layers(&mut out, "target1", &agent.target1.layers);
    push_layers(&mut out, "target2", &agent.target2.layers);
    push_adam(&mut out, "adam.actor", &agent.actor_opt);
    push_adam(&mut out, "adam.critic1", &agent.critic1_opt);
    push_adam(&mut out, "adam.critic2", &agent.critic2_opt);
    out.push(Tensor::scalar("log_alpha", agent.log_alpha));
    out.push(Tensor::new(
        "adam.alpha",
        vec![3],
        vec![agent.alpha_opt.m, agent.alpha_opt.v, agent.alpha_opt.t as f64],
    ));
    out.push(Tensor::new(
        "progress",
        vec![2],
        vec![progress.episode as f64, progress.total_steps as f64],
    ));
    out
}

/// Sidecar manifest path: `<checkpoint>.manifest.toml`.
pub fn manifest_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".manifest.toml");
    PathBuf::from(s)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct Manifest {
    format_version: u32,
    episode: u64,
    total_steps: u64,
    action_low: Vec<f64>,
    action_high: Vec<f64>,
    sac: SacHyper,
}

pub fn save_agent(path: &Path, agent: &SacAgent, progress: TrainProgress) -> Result<(), DrlError> {
    write_tensors(path, &agent_tensors(agent, progress))?;
    let manifest = Manifest {
        format_version: FORMAT_VERSION,
        episode: progress.episode,
        total_steps: progress.total_steps,
        action_low: agent.policy.spec.low.to_vec(),
        action_high: agent.policy.spec.high.to_vec(),
        sac: agent.hyper,
    };
    let text = toml::to_string(&manifest).map_err(|e| DrlError::Checkpoint(e.to_string()))?;
    fs::write(manifest_path(path), text)?;
    Ok(())
}

/// Restores a full agent; hyperparameters come from the manifest when present.
pub fn load_agent(path: &Path) -> Result<(SacAgent, TrainProgress), DrlError> {
    let store = Store(read_tensors(path)?);
    let hyper = match fs::read_to_string(manifest_path(path)) {
        Ok(text) => {
            toml::from_str::<Manifest>(&text)
                .map_err(|e| DrlError::Checkpoint(format!("manifest: {e}")))?
                .sac
        }
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => SacHyper::default(),
        Err(e) => return Err(e.into()),
    };
    let actor = store.mlp("actor")?;
    let critic1 = store.mlp("critic1")?;
    let critic2 = store.mlp("critic2")?;
    let alpha = store.get("adam.alpha")?;
    let progress = store.get("progress")?;
    if alpha.data.len() != 3 || progress.data.len() != 2 {
        return Err(DrlError::Checkpoint("bad scalar block".into()));
    }
    let agent = SacAgent {
        hyper,
        actor_opt: store.adam("adam.actor", &actor)?,
        critic1_opt: store.adam("adam.critic1", &critic1)?,
        critic2_opt: store.adam("adam.critic2", &critic2)?,
        policy: Policy {
            net: actor,
            spec: store.action_spec()?,
        },
        target1: store.mlp("target1")?,
        target2: store.mlp("target2")?,
        critic1,
        critic2,
        log_alpha: store.scalar("log_alpha")?,
        alpha_opt: ScalarAdam {
            m: alpha.data[0],
            v: alpha.data[1],
            t: alpha.data[2] as u64,
        },
    };
    let progress = TrainProgress {
        episode: progress.data[0] as u64,
        total_steps: progress.data[1] as u64,
    };
    Ok((agent, progress))
}

/// Actor and action ranges only.
pub fn load_policy(path: &Path) -> Result<Policy, DrlError> {
    let store = Store(read_tensors(path)?);
    let net = store.mlp("actor")?;
    if net.input_dim() != super::observation::OBS_DIM || net.output_dim() != 2 * ACTION_DIM {
        return Err(DrlError::Checkpoint("actor has the wrong input/output size".into()));
    }
    Ok(Policy {
        net,
        spec: store.action_spec()?,
    })
}

/// Deterministic weights from a stored policy.
pub fn infer_weights(path: &Path, obs: &Observation) -> Result<CostWeights, DrlError> {
    load_policy(path)?.deterministic(obs)
}

pub fn replay_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".replay");
    PathBuf::from(s)
}

pub fn save_replay(path: &Path, replay: &ReplayBuffer) -> Result<(), DrlError> {
    use super::observation::OBS_DIM;
    let n = replay.len();
    let mut obs = Vec::with_capacity(n * OBS_DIM);
    let mut next = Vec::with_capacity(n * OBS_DIM);
    let mut act = Vec::with_capacity(n * ACTION_DIM);
    let mut rew = Vec::with_capacity(n);
    let mut done = Vec::with_capacity(n);
    for t in replay.iter() {
        obs.extend_from_slice(&t.obs.0);
        next.extend_from_slice(&t.next_obs.0);
        act.extend_from_slice(&t.action);
        rew.push(t.reward);
        done.push(if t.done { 1.0 } else { 0.0 });
    }
    write_tensors(
        path,
        &[
            Tensor::scalar("capacity", replay.capacity() as f64),
            Tensor::new("obs", vec![n, OBS_DIM], obs),
            Tensor::new("action", vec![n, ACTION_DIM], act),
            Tensor::new("reward", vec![n], rew),
            Tensor::new("next_obs", vec![n, OBS_DIM], next),
            Tensor::new("done", vec![n], done),
        ],
    )
}

pub fn load_replay(path: &Path) -> Result<ReplayBuffer, DrlError> {
    use super::observation::OBS_DIM;
    let store = Store(read_tensors(path)?);
    let cap = store.scalar("capacity")? as usize;
    let obs = store.get("obs")?;
    let act = store.get("action")?;
    let rew = store.get("reward")?;
    let next = store.get("next_obs")?;
    let done = store.get("done")?;
    let n = rew.data.len();
    if cap == 0
        || obs.data.len() != n * OBS_DIM
        || next.data.len() != n * OBS_DIM
        || act.data.len() != n * ACTION_DIM
        || done.data.len() != n
        || n > cap
    {
        return Err(DrlError::Checkpoint("inconsistent replay tensors".into()));
    }
    let mut replay = ReplayBuffer::new(cap);
    for i in 0..n {
        replay.push(Transition {
            obs: Observation(std::array::from_fn(|j| obs.data[i * OBS_DIM + j])),
            action: std::array::from_fn(|j| act.data[i * ACTION_DIM + j]),
            reward: rew.data[i],
            next_obs: Observation(std::array::from_fn(|j| next.data[i * OBS_DIM + j])),
            done: done.data[i] != 0.0,
        });
    }
    Ok(replay)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::drl::observation::OBS_DIM;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn agent() -> SacAgent {
        let hyper = SacHyper {
            hidden: 6,
            ..Default::default()
        };
        SacAgent::new(hyper, ActionSpec::TABLE, &mut ChaCha8Rng::seed_from_u64(1))
    }

    #[test]
    fn agent_round_trip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.ckpt");
        let mut a = agent();
        a.log_alpha = -1.234_567_890_123;
        a.actor_opt.t = 17;
        let prog = TrainProgress {
            episode: 12,
            total_steps: 345,
        };
        save_agent(&p, &a, prog).unwrap();
        let (b, q) = load_agent(&p).unwrap();
        assert_eq!(a, b);
        assert_eq!(prog, q);
        assert!(manifest_path(&p).exists());
    }

    #[test]
    fn corruption_is_detected() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.ckpt");
        save_agent(&p, &agent(), TrainProgress::default()).unwrap();
        let bytes = fs::read(&p).unwrap();

        let mut flipped = bytes.clone();
        flipped[bytes.len() / 2] ^= 0x40;
        fs::write(&p, &flipped).unwrap();
        assert!(matches!(load_policy(&p), Err(DrlError::Checkpoint(_))));

        fs::write(&p, &bytes[..bytes.len() - 100]).unwrap();
        assert!(matches!(load_agent(&p), Err(DrlError::Checkpoint(_))));

        fs::write(&p, b"not a checkpoint at all").unwrap();
        assert!(matches!(load_policy(&p), Err(DrlError::Checkpoint(_))));

        assert!(matches!(load_policy(&dir.path().join("missing")), Err(DrlError::Io(_))));
    }

    #[test]
    fn zero_policy_checkpoint_infers_midpoints() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("zero.ckpt");
        let mut a = agent();
        a.policy.net = Mlp::zeros(&a.policy.net.sizes());
        save_agent(&p, &a, TrainProgress::default()).unwrap();
        let obs = Observation([0.5; OBS_DIM]);
        let w = infer_weights(&p, &obs).unwrap();
        assert_eq!(w.to_action(), ActionSpec::TABLE.midpoint());
        assert_eq!(infer_weights(&p, &obs).unwrap(), w);
    }

    #[test]
    fn replay_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("r");
        let mut r = ReplayBuffer::new(5);
        for i in 0..7 {
            r.push(Transition {
                obs: Observation([i as f64; OBS_DIM]),
                action: [0.1 * i as f64; ACTION_DIM],
                reward: -(i as f64),
                next_obs: Observation([1.0 + i as f64; OBS_DIM]),
                done: i % 2 == 0,
            });
        }
        save_replay(&p, &r).unwrap();
        assert_eq!(load_replay(&p).unwrap(), r);
    }
}
