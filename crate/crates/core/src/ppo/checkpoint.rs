//! Versioned binary checkpoint.
//!
//! Layout (little-endian): magic, `u32` version, layer table, branch sizes,
//! parameters and both Adam moments as `f32`, the Adam step counter, step and
//! update counters, curriculum, trainer RNG, then length-prefixed sections for
//! the training config (JSON), the environment runtime state and the recent
//! episode returns.

use std::collections::VecDeque;
use std::io::{self, Read, Write};

use byteorder::{LittleEndian as LE, ReadBytesExt, WriteBytesExt};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::config::TrainingConfig;
use super::network::{Network, NetworkConfig};
use crate::reward::CurriculumState;

pub const CHECKPOINT_MAGIC: &[u8; 9] = b"METIS-PPO";
pub const CHECKPOINT_VERSION: u32 = 1;

/// Guards against absurd allocations from corrupt length fields.
const MAX_SECTION: usize = 1 << 31;

#[derive(Debug, thiserror::Error)]
pub enum CheckpointError {
    #[error("not a checkpoint (bad magic)")]
    BadMagic,
    #[error("unsupported checkpoint version {found} (expected {CHECKPOINT_VERSION})")]
    UnsupportedVersion { found: u32 },
    #[error("checkpoint is truncated")]
    Truncated,
    #[error("corrupt checkpoint: {0}")]
    Corrupt(String),
    #[error("checkpoint does not match this environment: {0}")]
    Incompatible(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}

fn read_err(e: io::Error) -> CheckpointError {
    if e.kind() == io::ErrorKind::UnexpectedEof {
        CheckpointError::Truncated
    } else {
        CheckpointError::Io(e)
    }
}

/// Cursor over checkpoint bytes mapping short reads to [`CheckpointError::Truncated`].
pub(crate) struct Reader<'a>(pub &'a [u8]);

impl Reader<'_> {
    pub fn u8(&mut self) -> Result<u8, CheckpointError> {
        self.0.read_u8().map_err(read_err)
    }

    pub fn u32(&mut self) -> Result<u32, CheckpointError> {
        self.0.read_u32::<LE>().map_err(read_err)
    }

    pub fn u64(&mut self) -> Result<u64, CheckpointError> {
        self.0.read_u64::<LE>().map_err(read_err)
    }

    pub fn u128(&mut self) -> Result<u128, CheckpointError> {
        self.0.read_u128::<LE>().map_err(read_err)
    }

    pub fn f64(&mut self) -> Result<f64, CheckpointError> {
        self.0.read_f64::<LE>().map_err(read_err)
    }

    pub fn len(&mut self) -> Result<usize, CheckpointError> {
        let n = self.u64()? as usize;
        if n > MAX_SECTION || n > self.0.len() {
            return Err(CheckpointError::Truncated);
        }
        Ok(n)
    }

    pub fn bytes(&mut self, n: usize) -> Result<&[u8], CheckpointError> {
        if n > self.0.len() {
            return Err(CheckpointError::Truncated);
        }
        let (head, tail) = self.0.split_at(n);
        self.0 = tail;
        Ok(head)
    }

    pub fn f32s(&mut self, n: usize) -> Result<Vec<f32>, CheckpointError> {
        if n.checked_mul(4).is_none_or(|b| b > self.0.len()) {
            return Err(CheckpointError::Truncated);
        }
        let mut out = vec![0f32; n];
        self.0.read_f32_into::<LE>(&mut out).map_err(read_err)?;
        Ok(out)
    }

    pub fn f64s(&mut self) -> Result<Vec<f64>, CheckpointError> {
        let n = self.u64()? as usize;
        if n.checked_mul(8).is_none_or(|b| b > self.0.len()) {
            return Err(CheckpointError::Truncated);
        }
        (0..n).map(|_| self.f64()).collect()
    }

    pub fn rng(&mut self) -> Result<ChaCha8Rng, CheckpointError> {
        let mut seed = [0u8; 32];
        self.0.read_exact(&mut seed).map_err(read_err)?;
        let stream = self.u64()?;
        let word_pos = self.u128()?;
        let mut rng = ChaCha8Rng::from_seed(seed);
        rng.set_stream(stream);
        rng.set_word_pos(word_pos);
        Ok(rng)
    }

    pub fn finish(self) -> Result<(), CheckpointError> {
        if self.0.is_empty() {
            Ok(())
        } else {
            Err(CheckpointError::Corrupt(format!(
                "{} trailing bytes",
                self.0.len()
            )))
        }
    }
}

// Writes into a Vec<u8> cannot fail.
pub(crate) fn put_u8(out: &mut Vec<u8>, v: u8) {
    out.push(v);
}

pub(crate) fn put_u32(out: &mut Vec<u8>, v: u32) {
    out.write_u32::<LE>(v).unwrap();
}

pub(crate) fn put_u64(out: &mut Vec<u8>, v: u64) {
    out.write_u64::<LE>(v).unwrap();
}

pub(crate) fn put_f64(out: &mut Vec<u8>, v: f64) {
    out.write_f64::<LE>(v).unwrap();
}

pub(crate) fn put_f64s(out: &mut Vec<u8>, v: &[f64]) {
    put_u64(out, v.len() as u64);
    v.iter().for_each(|x| put_f64(out, *x));
}

pub(crate) fn put_bytes(out: &mut Vec<u8>, v: &[u8]) {
    put_u64(out, v.len() as u64);
    out.write_all(v).unwrap();
}

pub(crate) fn put_rng(out: &mut Vec<u8>, rng: &ChaCha8Rng) {
    out.extend_from_slice(&rng.get_seed());
    put_u64(out, rng.get_stream());
    out.write_u128::<LE>(rng.get_word_pos()).unwrap();
}

fn put_window(out: &mut Vec<u8>, w: &VecDeque<f64>) {
    put_u64(out, w.len() as u64);
    w.iter().for_each(|x| put_f64(out, *x));
}

fn put_curriculum(out: &mut Vec<u8>, c: Option<&CurriculumState>) {
    let Some(c) = c else {
        put_u8(out, 0);
        return;
    };
    put_u8(out, 1);
    put_u32(out, c.area_count as u32);
    put_u32(out, c.unlocked_count as u32);
    put_u8(out, c.all_unlocked_final as u8);
    put_u8(out, c.reset_on_unlock as u8);
    put_window(out, &c.global_window);
    for w in &c.per_area_window {
        put_window(out, w);
    }
}

fn get_curriculum(r: &mut Reader<'_>) -> Result<Option<CurriculumState>, CheckpointError> {
    if r.u8()? == 0 {
        return Ok(None);
    }
    let area_count = r.u32()? as usize;
    let unlocked_count = r.u32()? as usize;
    if area_count == 0 || unlocked_count == 0 || unlocked_count > area_count || area_count > 1 << 16
    {
        return Err(CheckpointError::Corrupt("curriculum counters".into()));
    }
    let all_unlocked_final = r.u8()? != 0;
    let reset_on_unlock = r.u8()? != 0;
    let global_window = r.f64s()?.into();
    let per_area_window = (0..area_count)
        .map(|_| r.f64s().map(VecDeque::from))
        .collect::<Result<_, _>>()?;
    Ok(Some(CurriculumState {
        area_count,
        unlocked_count,
        global_window,
        per_area_window,
        all_unlocked_final,
        reset_on_unlock,
    }))
}

/// Decoded checkpoint contents.
#[derive(Debug, Clone)]
pub(crate) struct Checkpoint {
    pub network: NetworkConfig,
    pub params: Vec<f32>,
    pub adam_m: Vec<f32>,
    pub adam_v: Vec<f32>,
    pub adam_t: u64,
    pub steps: u64,
    pub updates: u64,
    pub curriculum: Option<CurriculumState>,
    pub rng: ChaCha8Rng,
    pub config: TrainingConfig,
    pub env_state: Vec<u8>,
    pub recent_returns: Vec<f64>,
}

impl Checkpoint {
    pub fn to_bytes(&self) -> Vec<u8> {
        let p = self.params.len();
        let mut out = Vec::with_capacity(64 + p * 12);
        out.extend_from_slice(CHECKPOINT_MAGIC);
        put_u32(&mut out, CHECKPOINT_VERSION);
        let dims = self.network.layer_dims();
        put_u32(&mut out, dims.len() as u32);
        for (fan_in, fan_out) in dims {
            put_u32(&mut out, fan_in as u32);
            put_u32(&mut out, fan_out as u32);
        }
        put_u32(&mut out, self.network.branch_sizes[0] as u32);
        put_u32(&mut out, self.network.branch_sizes[1] as u32);
        for block in [&self.params, &self.adam_m, &self.adam_v] {
            block.iter().for_each(|x| out.write_f32::<LE>(*x).unwrap());
        }
        put_u64(&mut out, self.adam_t);
        put_u64(&mut out, self.steps);
        put_u64(&mut out, self.updates);
        put_curriculum(&mut out, self.curriculum.as_ref());
        put_rng(&mut out, &self.rng);
        let config = serde_json::to_vec(&self.config).expect("config serializes");
        put_bytes(&mut out, &config);
        put_bytes(&mut out, &self.env_state);
        put_f64s(&mut out, &self.recent_returns);
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, CheckpointError> {
        let mut r = Reader(bytes);
        let magic = r
            .bytes(CHECKPOINT_MAGIC.len())
            .map_err(|_| CheckpointError::BadMagic)?;
        if magic != CHECKPOINT_MAGIC {
            return Err(CheckpointError::BadMagic);
        }
        let found = r.u32()?;
        if found != CHECKPOINT_VERSION {
            return Err(CheckpointError::UnsupportedVersion { found });
        }
        let layers = r.u32()? as usize;
        if layers < 3 || layers > 1024 {
            return Err(CheckpointError::Corrupt(format!("{layers} layers")));
        }
        let mut dims = Vec::with_capacity(layers);
        for _ in 0..layers {
            dims.push((r.u32()? as usize, r.u32()? as usize));
        }
        let branch_sizes = [r.u32()? as usize, r.u32()? as usize];
        let network = NetworkConfig::from_layer_dims(&dims, branch_sizes)
            .ok_or_else(|| CheckpointError::Corrupt("inconsistent layer table".into()))?;
        let p = network.param_count();
        let params = r.f32s(p)?;
        let adam_m = r.f32s(p)?;
        let adam_v = r.f32s(p)?;
        let adam_t = r.u64()?;
        let steps = r.u64()?;
        let updates = r.u64()?;
        let curriculum = get_curriculum(&mut r)?;
        let rng = r.rng()?;
        let n = r.len()?;
        let config = serde_json::from_slice(r.bytes(n)?)
            .map_err(|e| CheckpointError::Corrupt(format!("config section: {e}")))?;
        let n = r.len()?;
        let env_state = r.bytes(n)?.to_vec();
        let recent_returns = r.f64s()?;
        r.finish()?;
        Ok(Self {
            network,
            params,
            adam_m,
            adam_v,
            adam_t,
            steps,
            updates,
            curriculum,
            rng,
            config,
            env_state,
            recent_returns,
        })
    }
}

/// The inference view of a checkpoint: network plus the configuration it was
/// trained with (needed to build matching observations).
#[derive(Debug, Clone)]
pub struct Policy {
    pub network: Network<f64>,
    pub config: TrainingConfig,
}

impl Policy {
    pub fn from_bytes(bytes: &[u8]) -> Result<Self, CheckpointError> {
        let ckpt = Checkpoint::from_bytes(bytes)?;
        let params = ckpt.params.iter().map(|x| f64::from(*x)).collect();
        Ok(Self {
            network: Network {
                config: ckpt.network,
                params,
            },
            config: ckpt.config,
        })
    }

    pub fn input_dim(&self) -> usize {
        self.network.config.input_dim
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Checkpoint {
        let network = NetworkConfig {
            input_dim: 5,
            hidden_width: 3,
            hidden_depth: 2,
            branch_sizes: [2, 2],
        };
        let p = network.param_count();
        let mut cur = CurriculumState::new(3);
        cur.record_episode(1, 0.5).unwrap();
        Checkpoint {
            network,
            params: (0..p).map(|i| i as f32 * 0.5).collect(),
            adam_m: vec![0.25; p],
            adam_v: vec![1e-6; p],
            adam_t: 7,
            steps: 1234,
            updates: 3,
            curriculum: Some(cur),
            rng: ChaCha8Rng::seed_from_u64(99),
            config: TrainingConfig::default(),
            env_state: vec![1, 2, 3],
            recent_returns: vec![0.5, -1.0],
        }
    }

    #[test]
    fn round_trip_is_byte_identical() {
        let bytes = sample().to_bytes();
        let again = Checkpoint::from_bytes(&bytes).unwrap().to_bytes();
        assert_eq!(bytes, again);
    }

    #[test]
    fn every_truncation_is_rejected() {
        let bytes = sample().to_bytes();
        for cut in [0, 5, 9, 13, 40, bytes.len() / 2, bytes.len() - 1] {
            assert!(
                Checkpoint::from_bytes(&bytes[..cut]).is_err(),
                "cut at {cut}"
            );
        }
        assert!(matches!(
            Checkpoint::from_bytes(&bytes[..bytes.len() - 1]),
            Err(CheckpointError::Truncated)
        ));
    }

    #[test]
    fn magic_and_version_checked() {
        let mut bytes = sample().to_bytes();
        bytes[0] = b'X';
        assert!(matches!(
            Checkpoint::from_bytes(&bytes),
            Err(CheckpointError::BadMagic)
        ));
        let mut bytes = sample().to_bytes();
        bytes[9] = 2;
        assert!(matches!(
            Checkpoint::from_bytes(&bytes),
            Err(CheckpointError::UnsupportedVersion { found: 2 })
        ));
    }

    #[test]
    fn rng_state_survives() {
        use rand::RngCore;
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        rng.next_u64();
        rng.next_u32();
        let mut out = Vec::new();
        put_rng(&mut out, &rng);
        let mut back = Reader(&out).rng().unwrap();
        assert_eq!(rng.next_u64(), back.next_u64());
    }
}
