//! On-disk cache of truth solutions, keyed by a hash of everything that
//! determines them. Writers use a temporary file and an atomic rename, so
//! concurrent writers race harmlessly (last writer wins).

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use hymac::fom::PicardOptions;
use hymac::{GridSpec, Parameter, Problem};
use sha2::{Digest, Sha256};

/// Environment variable overriding the cache directory.
pub const CACHE_ENV: &str = "HYMAC_CACHE_DIR";

const MAGIC: &[u8; 8] = b"HYMACREF";

/// Identifies one truth solve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReferenceKey {
    pub problem: Problem,
    pub grid: GridSpec,
    pub param: Parameter,
    /// `(τ, K)` for trajectories.
    pub time: Option<(f64, usize)>,
    pub opts: PicardOptions,
}

impl ReferenceKey {
    /// Hex SHA-256 of the canonical key text; floats enter bit-exactly.
    pub fn digest(&self) -> String {
        let bits = |x: f64| format!("{:016x}", x.to_bits());
        let time = match self.time {
            Some((tau, k)) => format!("{}:{k}", bits(tau)),
            None => "steady".into(),
        };
        let text = format!(
            "{}|{}x{}|{}|{}|{}|{}|{}",
            self.problem.as_str(),
            self.grid.nx,
            self.grid.ny,
            bits(self.param.re),
            bits(self.param.nu),
            time,
            bits(self.opts.tol),
            self.opts.max_iter
        );
        format!("{:x}", Sha256::digest(text.as_bytes()))
    }
}

#[derive(Debug, Clone)]
pub struct ReferenceCache {
    dir: PathBuf,
}

impl ReferenceCache {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        ReferenceCache { dir: dir.into() }
    }

    /// `$HYMAC_CACHE_DIR` if set, else `fallback`.
    pub fn from_env(fallback: &Path) -> Self {
        match std::env::var_os(CACHE_ENV) {
            Some(d) if !d.is_empty() => Self::new(d),
            _ => Self::new(fallback),
        }
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    fn path(&self, key: &ReferenceKey) -> PathBuf {
        self.dir.join(format!("{}.bin", key.digest()))
    }

    /// Stored levels, or `None` on a miss. Unreadable or malformed entries
    /// count as misses.
    pub fn load(&self, key: &ReferenceKey) -> Option<Vec<Vec<f64>>> {
        let data = fs::read(self.path(key)).ok()?;
        let levels = decode(&data);
        if levels.is_none() {
            log::warn!("ignoring corrupt cache entry {}", self.path(key).display());
        }
        levels.filter(|l| l.iter().all(|v| v.len() == key.grid.n_dofs()))
    }

    pub fn store(&self, key: &ReferenceKey, levels: &[Vec<f64>]) -> io::Result<()> {
        fs::create_dir_all(&self.dir)?;
        let path = self.path(key);
        let tmp = self
            .dir
            .join(format!(".{}.{}.tmp", key.digest(), std::process::id()));
        fs::write(&tmp, encode(levels))?;
        fs::rename(&tmp, &path)
    }
}

fn encode(levels: &[Vec<f64>]) -> Vec<u8> {
    let len = levels.first().map_or(0, Vec::len);
    let mut out = Vec::with_capacity(24 + levels.len() * len * 8);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(levels.len() as u64).to_le_bytes());
    out.extend_from_slice(&(len as u64).to_le_bytes());
    for l in levels {
        for x in l {
            out.extend_from_slice(&x.to_le_bytes());
        }
    }
    out
}

fn decode(data: &[u8]) -> Option<Vec<Vec<f64>>> {
    let word = |k: usize| -> Option<u64> { Some(u64::from_le_bytes(data.get(k..k + 8)?.try_into().ok()?)) };
    if data.get(..8)? != MAGIC {
        return None;
    }
    let levels = usize::try_from(word(8)?).ok()?;
    let len = usize::try_from(word(16)?).ok()?;
    let body = &data[24..];
    if body.len() != levels.checked_mul(len)?.checked_mul(8)? {
        return None;
    }
    let values: Vec<f64> = body
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
        .collect();
    Some(values.chunks(len.max(1)).take(levels).map(<[f64]>::to_vec).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn key() -> ReferenceKey {
        ReferenceKey {
            problem: Problem::SteadyNs,
            grid: GridSpec::new(4, 4).unwrap(),
            param: Parameter::new(100.0, 1.0).unwrap(),
            time: None,
            opts: PicardOptions::default(),
        }
    }

    #[test]
    fn digest_separates_every_field() {
        let k = key();
        let mut others = vec![];
        let mut a = k;
        a.param.re = f64::from_bits(100f64.to_bits() + 1);
        others.push(a);
        let mut a = k;
        a.grid = GridSpec::new(4, 5).unwrap();
        others.push(a);
        let mut a = k;
        a.problem = Problem::Stokes;
        others.push(a);
        let mut a = k;
        a.time = Some((0.1, 3));
        others.push(a);
        let mut a = k;
        a.opts.tol = 1e-9;
        others.push(a);
        for o in others {
            assert_ne!(o.digest(), k.digest());
        }
        assert_eq!(k.digest(), key().digest());
        assert_eq!(k.digest().len(), 64);
    }

    #[test]
    fn store_and_load_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let cache = ReferenceCache::new(dir.path().join("nested"));
        let k = key();
        assert!(cache.load(&k).is_none());
        let n = k.grid.n_dofs();
        let levels: Vec<Vec<f64>> = (0..3).map(|l| (0..n).map(|i| (i * l) as f64 / 7.0).collect()).collect();
        cache.store(&k, &levels).unwrap();
        assert_eq!(cache.load(&k).unwrap(), levels);
        // overwrite wins
        cache.store(&k, &levels[..1]).unwrap();
        assert_eq!(cache.load(&k).unwrap().len(), 1);
    }

    #[test]
    fn corrupt_entries_are_misses() {
        let dir = tempfile::tempdir().unwrap();
        let cache = ReferenceCache::new(dir.path());
        let k = key();
        fs::write(cache.path(&k), b"HYMACREF\x01").unwrap();
        assert!(cache.load(&k).is_none());
        let mut ok = encode(&[vec![1.0; k.grid.n_dofs()]]);
        ok.pop();
        fs::write(cache.path(&k), ok).unwrap();
        assert!(cache.load(&k).is_none());
        // right framing, wrong grid size
        fs::write(cache.path(&k), encode(&[vec![1.0; 3]])).unwrap();
        assert!(cache.load(&k).is_none());
    }
}
