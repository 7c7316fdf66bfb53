//! On-disk store of spectral decompositions.
//!
//! One file per (model parameters, basis), named by a SHA-256 of those
//! parameters and the format version. Layout, all little-endian:
//!
//! ```text
//! magic        8 bytes  "TODASPEC"
//! version      u32
//! hbar, omega  f64, f64
//! n_max        u64
//! n_sum_max    u64      (u64::MAX for a square basis)
//! m1, m2, E    f64 x 3
//! dim          u64
//! eigenvalues  dim x f64, ascending
//! eigenvectors dim x dim f64, column by column
//! checksum     32 bytes, SHA-256 of everything above
//! ```
//!
//! A file that fails to parse or verify is rebuilt with a warning. A file
//! that parses but whose eigenvectors are no longer orthonormal is a hard
//! error. Builds for one key are serialized through an advisory lock on a
//! sibling `.lock` file; a process that waited on the lock reloads.

use std::fs::{self, File, OpenOptions};
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use faer::Mat;
use log::{info, warn};
use sha2::{Digest, Sha256};
use toda_core::dynamics::ModelParams;
use toda_core::quantum::{
    build_hamiltonian, spectral_decompose, BasisSpec, QuantumError, SpectralDecomposition, ORTHOGONALITY_TOLERANCE,
};
use toda_core::Execution;

use crate::HarnessError;

/// Environment variable overriding the cache directory.
pub const CACHE_DIR_ENV: &str = "TODA_CACHE_DIR";
pub const FORMAT_VERSION: u32 = 1;
const MAGIC: &[u8; 8] = b"TODASPEC";
const HEADER_LEN: usize = 8 + 4 + 8 * 8;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CacheOutcome {
    Hit,
    Built,
    /// An unreadable entry was replaced.
    Rebuilt,
}

#[derive(Clone, Debug, PartialEq)]
struct Header {
    hbar: f64,
    omega: f64,
    n_max: u64,
    n_sum_max: u64,
    m1: f64,
    m2: f64,
    energy: f64,
    dim: u64,
}

impl Header {
    fn new(params: &ModelParams, basis: &BasisSpec) -> Self {
        Self {
            hbar: basis.hbar(),
            omega: basis.omega(),
            n_max: basis.n_max() as u64,
            n_sum_max: basis.n_sum_max().map_or(u64::MAX, |n| n as u64),
            m1: params.m1,
            m2: params.m2,
            energy: params.energy,
            dim: basis.dim() as u64,
        }
    }

    fn to_bytes(&self) -> Vec<u8> {
        let mut b = Vec::with_capacity(HEADER_LEN);
        b.extend_from_slice(MAGIC);
        b.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        b.extend_from_slice(&self.hbar.to_le_bytes());
        b.extend_from_slice(&self.omega.to_le_bytes());
        b.extend_from_slice(&self.n_max.to_le_bytes());
        b.extend_from_slice(&self.n_sum_max.to_le_bytes());
        b.extend_from_slice(&self.m1.to_le_bytes());
        b.extend_from_slice(&self.m2.to_le_bytes());
        b.extend_from_slice(&self.energy.to_le_bytes());
        b.extend_from_slice(&self.dim.to_le_bytes());
        b
    }

    fn from_bytes(b: &[u8; HEADER_LEN]) -> Result<Self, String> {
        if &b[..8] != MAGIC {
            return Err("bad magic".into());
        }
        let version = u32::from_le_bytes(b[8..12].try_into().unwrap());
        if version != FORMAT_VERSION {
            return Err(format!("format version {version}"));
        }
        let word = |i: usize| -> [u8; 8] { b[12 + 8 * i..20 + 8 * i].try_into().unwrap() };
        Ok(Self {
            hbar: f64::from_le_bytes(word(0)),
            omega: f64::from_le_bytes(word(1)),
            n_max: u64::from_le_bytes(word(2)),
            n_sum_max: u64::from_le_bytes(word(3)),
            m1: f64::from_le_bytes(word(4)),
            m2: f64::from_le_bytes(word(5)),
            energy: f64::from_le_bytes(word(6)),
            dim: u64::from_le_bytes(word(7)),
        })
    }
}

/// Summary of one cache file, for `cache list`.
#[derive(Clone, Debug)]
pub struct CacheEntry {
    pub key: String,
    pub path: PathBuf,
    pub bytes: u64,
    /// `None` when the header is unreadable.
    pub description: Option<String>,
}

#[derive(Clone, Debug)]
pub struct SpectralCache {
    dir: PathBuf,
}

impl SpectralCache {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        Self { dir: dir.into() }
    }

    /// `$TODA_CACHE_DIR` if set, else `fallback`.
    pub fn from_env(fallback: impl Into<PathBuf>) -> Self {
        match std::env::var_os(CACHE_DIR_ENV) {
            Some(d) if !d.is_empty() => Self::new(d),
            _ => Self::new(fallback),
        }
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn key(params: &ModelParams, basis: &BasisSpec) -> String {
        crate::sha256_hex(&Header::new(params, basis).to_bytes())
    }

    pub fn path_for(&self, key: &str) -> PathBuf {
        self.dir.join(format!("{key}.spec"))
    }

    /// Loads the decomposition for `(params, basis)`, building and storing
    /// it on a miss.
    pub fn get_or_build(
        &self,
        params: &ModelParams,
        basis: &BasisSpec,
        exec: Execution,
    ) -> Result<(SpectralDecomposition, CacheOutcome), HarnessError> {
        fs::create_dir_all(&self.dir).map_err(|e| HarnessError::io(&self.dir, e))?;
        let key = Self::key(params, basis);
        let path = self.path_for(&key);
        let header = Header::new(params, basis);
        let basis = Arc::new(basis.clone());

        let lock_path = self.dir.join(format!("{key}.lock"));
        let lock = OpenOptions::new()
            .create(true)
            .truncate(false)
            .write(true)
            .open(&lock_path)
            .map_err(|e| HarnessError::io(&lock_path, e))?;
        lock.lock().map_err(|e| HarnessError::io(&lock_path, e))?;

        let mut outcome = CacheOutcome::Built;
        if path.exists() {
            match read_entry(&path, &header) {
                Ok((values, vectors)) => {
                    let spec = SpectralDecomposition::from_parts(basis, *params, values, vectors)?;
                    let err = spec.orthogonality_error();
                    if !(err <= ORTHOGONALITY_TOLERANCE) {
                        return Err(QuantumError::Invariant(format!(
                            "cached eigenvectors in {} have orthogonality error {err:.3e}",
                            path.display()
                        ))
                        .into());
                    }
                    return Ok((spec, CacheOutcome::Hit));
                }
                Err(reason) => {
                    warn!("rebuilding corrupt cache entry {}: {reason}", path.display());
                    outcome = CacheOutcome::Rebuilt;
                }
            }
        }

        info!("diagonalizing dimension {} for cache key {key}", basis.dim());
        let h = build_hamiltonian(params, &basis, exec)?;
        let spec = spectral_decompose(&h, &basis, params)?;
        drop(h);
        write_entry(&path, &header, &spec)?;
        Ok((spec, outcome))
    }

    pub fn entries(&self) -> Result<Vec<CacheEntry>, HarnessError> {
        let mut out = Vec::new();
        let listing = match fs::read_dir(&self.dir) {
            Ok(l) => l,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(out),
            Err(e) => return Err(HarnessError::io(&self.dir, e)),
        };
        for item in listing {
            let item = item.map_err(|e| HarnessError::io(&self.dir, e))?;
            let path = item.path();
            if path.extension().and_then(|s| s.to_str()) != Some("spec") {
                continue;
            }
            let bytes = item.metadata().map_err(|e| HarnessError::io(&path, e))?.len();
            let description = read_header(&path).ok().map(|h| {
                let shape = if h.n_sum_max == u64::MAX {
                    format!("n_max = {}", h.n_max)
                } else {
                    format!("n1 + n2 <= {}", h.n_sum_max)
                };
                format!(
                    "hbar = {} omega = {} {shape} dim = {} m1 = {} m2 = {} E = {}",
                    h.hbar, h.omega, h.dim, h.m1, h.m2, h.energy
                )
            });
            out.push(CacheEntry {
                key: path.file_stem().unwrap_or_default().to_string_lossy().into_owned(),
                path,
                bytes,
                description,
            });
        }
        out.sort_by(|a, b| a.key.cmp(&b.key));
        Ok(out)
    }

    /// Removes every entry and lock file; returns the number of entries.
    pub fn purge(&self) -> Result<usize, HarnessError> {
        let entries = self.entries()?;
        for e in &entries {
            fs::remove_file(&e.path).map_err(|err| HarnessError::io(&e.path, err))?;
            let _ = fs::remove_file(e.path.with_extension("lock"));
        }
        Ok(entries.len())
    }
}

fn read_header(path: &Path) -> Result<Header, String> {
    let mut f = File::open(path).map_err(|e| e.to_string())?;
    let mut b = [0u8; HEADER_LEN];
    f.read_exact(&mut b).map_err(|e| e.to_string())?;
    Header::from_bytes(&b)
}

fn read_entry(path: &Path, expected: &Header) -> Result<(Vec<f64>, Mat<f64>), String> {
    let file = File::open(path).map_err(|e| e.to_string())?;
    let len = file.metadata().map_err(|e| e.to_string())?.len();
    let d = expected.dim as usize;
    let want = (HEADER_LEN + 8 * d * (d + 1) + 32) as u64;
    if len != want {
        return Err(format!("{len} bytes, expected {want}"));
    }
    let mut r = BufReader::with_capacity(1 << 20, file);
    let mut hasher = Sha256::new();
    let mut hb = [0u8; HEADER_LEN];
    r.read_exact(&mut hb).map_err(|e| e.to_string())?;
    hasher.update(hb);
    let header = Header::from_bytes(&hb)?;
    if header.to_bytes() != expected.to_bytes() {
        return Err("header does not match the requested parameters".into());
    }
    let mut buf = vec![0u8; 8 * d];
    let mut column = |r: &mut BufReader<File>, out: &mut [f64]| -> Result<(), String> {
        r.read_exact(&mut buf).map_err(|e| e.to_string())?;
        hasher.update(&buf);
        for (x, chunk) in out.iter_mut().zip(buf.chunks_exact(8)) {
            *x = f64::from_le_bytes(chunk.try_into().unwrap());
        }
        Ok(())
    };
    let mut values = vec![0.0; d];
    column(&mut r, &mut values)?;
    let mut vectors = Mat::<f64>::zeros(d, d);
    for j in 0..d {
        column(&mut r, vectors.col_as_slice_mut(j))?;
    }
    let mut stored = [0u8; 32];
    r.read_exact(&mut stored).map_err(|e| e.to_string())?;
    if hasher.finalize().as_slice() != stored {
        return Err("checksum mismatch".into());
    }
    Ok((values, vectors))
}

fn write_entry(path: &Path, header: &Header, spec: &SpectralDecomposition) -> Result<(), HarnessError> {
    let tmp = path.with_extension(format!("tmp{}", std::process::id()));
    let io = |e| HarnessError::io(&tmp, e);
    let mut w = BufWriter::with_capacity(1 << 20, File::create(&tmp).map_err(io)?);
    let mut hasher = Sha256::new();
    let mut put = |w: &mut BufWriter<File>, bytes: &[u8]| -> std::io::Result<()> {
        hasher.update(bytes);
        w.write_all(bytes)
    };
    put(&mut w, &header.to_bytes()).map_err(io)?;
    let encode = |xs: &[f64]| -> Vec<u8> { xs.iter().flat_map(|x| x.to_le_bytes()).collect() };
    put(&mut w, &encode(spec.eigenvalues())).map_err(io)?;
    let v = spec.eigenvectors();
    for j in 0..v.ncols() {
        put(&mut w, &encode(v.col_as_slice(j))).map_err(io)?;
    }
    w.write_all(hasher.finalize().as_slice()).map_err(io)?;
    let file = w.into_inner().map_err(|e| HarnessError::io(&tmp, e.into_error()))?;
    file.sync_all().map_err(io)?;
    fs::rename(&tmp, path).map_err(|e| HarnessError::io(path, e))
}
