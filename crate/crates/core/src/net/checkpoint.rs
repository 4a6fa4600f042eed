use std::path::Path;

use thiserror::Error;

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"MTPCKPT\0";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("not a checkpoint (bad magic bytes)")]
    BadMagic,
    #[error("unsupported checkpoint version {0}")]
    Version(u32),
    #[error("checkpoint truncated")]
    Truncated,
    #[error("checkpoint has {0} trailing bytes")]
    Trailing(usize),
    #[error("inconsistent checkpoint: {0}")]
    Inconsistent(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Complete training state after some number of epochs.
///
/// `params` and the Adam moments are the last-epoch state used to continue
/// training; `best_params` are the weights of the best validation epoch.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub shapes: Vec<(usize, usize)>,
    pub params: Vec<f64>,
    pub best_params: Vec<f64>,
    pub adam_m: Vec<f64>,
    pub adam_v: Vec<f64>,
    pub adam_step: u64,
    /// Epochs completed so far; also the RNG stream of the next epoch.
    pub epoch: u32,
    /// 1-based epoch of `best_val_loss`, 0 before any epoch.
    pub best_epoch: u32,
    pub best_val_loss: f64,
    pub epochs_since_improvement: u32,
    pub stopped: bool,
    pub seed: u64,
}

struct Reader<'a> {
    buf: &'a [u8],
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], CheckpointError> {
        if self.buf.len() < n {
            return Err(CheckpointError::Truncated);
        }
        let (head, tail) = self.buf.split_at(n);
        self.buf = tail;
        Ok(head)
    }

    fn u8(&mut self) -> Result<u8, CheckpointError> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32, CheckpointError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64, CheckpointError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn f64(&mut self) -> Result<f64, CheckpointError> {
        Ok(f64::from_bits(self.u64()?))
    }

    fn f64s(&mut self, n: usize) -> Result<Vec<f64>, CheckpointError> {
        let bytes = self.take(n.checked_mul(8).ok_or(CheckpointError::Truncated)?)?;
        Ok(bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect())
    }
}

impl Checkpoint {
    pub fn n_params(&self) -> usize {
        self.params.len()
    }

    /// Layout: magic, version, counters, RNG cursor (seed, next epoch),
    /// shape table, then params, best params, first and second moments as
    /// little-endian f64.
    pub fn to_bytes(&self) -> Vec<u8> {
        let p = self.params.len();
        let mut out = Vec::with_capacity(64 + 16 * self.shapes.len() + 32 * p);
        out.extend_from_slice(CHECKPOINT_MAGIC);
        out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
        out.extend_from_slice(&self.epoch.to_le_bytes());
        out.extend_from_slice(&self.best_epoch.to_le_bytes());
        out.extend_from_slice(&self.epochs_since_improvement.to_le_bytes());
        out.push(u8::from(self.stopped));
        out.extend_from_slice(&self.best_val_loss.to_le_bytes());
        out.extend_from_slice(&self.adam_step.to_le_bytes());
        out.extend_from_slice(&self.seed.to_le_bytes());
        out.extend_from_slice(&u64::from(self.epoch).to_le_bytes());
        out.extend_from_slice(&(self.shapes.len() as u32).to_le_bytes());
        for (r, c) in &self.shapes {
            out.extend_from_slice(&(*r as u64).to_le_bytes());
            out.extend_from_slice(&(*c as u64).to_le_bytes());
        }
        for v in [&self.params, &self.best_params, &self.adam_m, &self.adam_v] {
            for x in v.iter() {
                out.extend_from_slice(&x.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, CheckpointError> {
        let mut r = Reader { buf: bytes };
        if r.take(8)? != CHECKPOINT_MAGIC {
            return Err(CheckpointError::BadMagic);
        }
        let version = r.u32()?;
        if version != CHECKPOINT_VERSION {
            return Err(CheckpointError::Version(version));
        }
        let epoch = r.u32()?;
        let best_epoch = r.u32()?;
        let epochs_since_improvement = r.u32()?;
        let stopped = match r.u8()? {
            0 => false,
            1 => true,
            b => return Err(CheckpointError::Inconsistent(format!("stopped flag {b}"))),
        };
        let best_val_loss = r.f64()?;
        let adam_step = r.u64()?;
        let seed = r.u64()?;
        let cursor = r.u64()?;
        if cursor != u64::from(epoch) {
            return Err(CheckpointError::Inconsistent(format!(
                "rng cursor {cursor} disagrees with epoch {epoch}"
            )));
        }
        let n_shapes = r.u32()? as usize;
        let mut shapes = Vec::with_capacity(n_shapes.min(1 << 16));
        let mut p = 0usize;
        for _ in 0..n_shapes {
            let rows = r.u64()? as usize;
            let cols = r.u64()? as usize;
            p = rows
                .checked_mul(cols)
                .and_then(|n| p.checked_add(n))
                .ok_or(CheckpointError::Truncated)?;
            shapes.push((rows, cols));
        }
        let params = r.f64s(p)?;
        let best_params = r.f64s(p)?;
        let adam_m = r.f64s(p)?;
        let adam_v = r.f64s(p)?;
        if !r.buf.is_empty() {
            return Err(CheckpointError::Trailing(r.buf.len()));
        }
        Ok(Self {
            shapes,
            params,
            best_params,
            adam_m,
            adam_v,
            adam_step,
            epoch,
            best_epoch,
            best_val_loss,
            epochs_since_improvement,
            stopped,
            seed,
        })
    }

    pub fn save(&self, path: &Path) -> Result<(), CheckpointError> {
        std::fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, CheckpointError> {
        Self::from_bytes(&std::fs::read(path)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Checkpoint {
        Checkpoint {
            shapes: vec![(2, 3), (1, 3)],
            params: (0..9).map(|i| i as f64 * 0.5).collect(),
            best_params: (0..9).map(|i| -(i as f64)).collect(),
            adam_m: vec![1e-3; 9],
            adam_v: vec![f64::MIN_POSITIVE; 9],
            adam_step: 42,
            epoch: 7,
            best_epoch: 5,
            best_val_loss: 0.125,
            epochs_since_improvement: 2,
            stopped: false,
            seed: u64::MAX - 3,
        }
    }

    #[test]
    fn round_trip_is_exact() {
        let c = sample();
        assert_eq!(Checkpoint::from_bytes(&c.to_bytes()).unwrap(), c);
    }

    #[test]
    fn rejects_corruption() {
        let bytes = sample().to_bytes();
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(matches!(Checkpoint::from_bytes(&bad), Err(CheckpointError::BadMagic)));
        assert!(matches!(
            Checkpoint::from_bytes(&bytes[..bytes.len() - 1]),
            Err(CheckpointError::Truncated)
        ));
        let mut long = bytes.clone();
        long.push(0);
        assert!(matches!(
            Checkpoint::from_bytes(&long),
            Err(CheckpointError::Trailing(1))
        ));
        let mut ver = bytes;
        ver[8] = 9;
        assert!(matches!(Checkpoint::from_bytes(&ver), Err(CheckpointError::Version(9))));
    }
}
