//! On-disk cache of spectral decompositions keyed by operator fingerprint.
//!
//! Container layout, all integers and floats little-endian:
//!
//! ```text
//! magic    8 bytes  "OPSPCACH"
//! version  u32
//! flags    u32      bit 0: complex eigenvectors
//! print    u64      operator fingerprint
//! m        u64      number of eigenpairs
//! values   m × f64  eigenvalues, ascending
//! vectors  column-major eigenvectors; complex entries as (re, im) pairs
//! ```

use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::calculus::{self, Basis, SpectralDecomposition};
use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::operators::SelfAdjointOperator;

pub const CACHE_ENV: &str = "OPSPACE_CACHE_DIR";
pub const FORMAT_VERSION: u32 = 1;
const MAGIC: &[u8; 8] = b"OPSPCACH";
const HEADER_LEN: usize = 8 + 4 + 4 + 8 + 8;
const EXTENSION: &str = "eig";

/// Summary of one cached decomposition.
#[derive(Clone, Debug, PartialEq)]
pub struct CacheEntry {
    pub fingerprint: u64,
    pub size: usize,
    pub complex: bool,
    pub bytes: u64,
    pub path: PathBuf,
}

#[derive(Clone, Debug)]
pub struct EigCache {
    dir: PathBuf,
}

impl EigCache {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        EigCache { dir: dir.into() }
    }

    /// Uses `$OPSPACE_CACHE_DIR` when set, otherwise `fallback`.
    pub fn from_env_or(fallback: impl Into<PathBuf>) -> Self {
        match std::env::var_os(CACHE_ENV) {
            Some(d) if !d.is_empty() => EigCache::new(d),
            _ => EigCache::new(fallback),
        }
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn path_for(&self, fingerprint: u64) -> PathBuf {
        self.dir.join(format!("{fingerprint:016x}.{EXTENSION}"))
    }

    /// Writes to a temporary file in the cache directory, then renames.
    pub fn store(&self, dec: &SpectralDecomposition) -> Result<PathBuf> {
        fs::create_dir_all(&self.dir).map_err(|e| Error::io(&self.dir, e))?;
        let target = self.path_for(dec.operator_fingerprint());
        let tmp = self.dir.join(format!(
            ".{:016x}.{}.tmp",
            dec.operator_fingerprint(),
            std::process::id()
        ));
        let bytes = encode(dec);
        {
            let mut file = fs::File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
            file.write_all(&bytes).map_err(|e| Error::io(&tmp, e))?;
            file.sync_all().map_err(|e| Error::io(&tmp, e))?;
        }
        fs::rename(&tmp, &target).map_err(|e| Error::io(&target, e))?;
        Ok(target)
    }

    /// Loads the decomposition for `fingerprint`, or `None` when absent.
    pub fn load(&self, fingerprint: u64, grid: Arc<Grid>) -> Result<Option<SpectralDecomposition>> {
        let path = self.path_for(fingerprint);
        let bytes = match fs::read(&path) {
            Ok(b) => b,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(None),
            Err(e) => return Err(Error::io(&path, e)),
        };
        let dec = decode(&bytes, grid).map_err(|reason| Error::CacheFormat {
            path: path.clone(),
            reason,
        })?;
        if dec.operator_fingerprint() != fingerprint {
            return Err(Error::CacheFormat {
                path,
                reason: "fingerprint in header does not match file name".into(),
            });
        }
        Ok(Some(dec))
    }

    /// Entries sorted by fingerprint; an absent directory lists as empty.
    pub fn list(&self) -> Result<Vec<CacheEntry>> {
        let rd = match fs::read_dir(&self.dir) {
            Ok(rd) => rd,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Vec::new()),
            Err(e) => return Err(Error::io(&self.dir, e)),
        };
        let mut out = Vec::new();
        for entry in rd {
            let entry = entry.map_err(|e| Error::io(&self.dir, e))?;
            let path = entry.path();
            if path.extension().and_then(|e| e.to_str()) != Some(EXTENSION) {
                continue;
            }
            let mut header = [0u8; HEADER_LEN];
            let mut file = fs::File::open(&path).map_err(|e| Error::io(&path, e))?;
            file.read_exact(&mut header).map_err(|e| Error::io(&path, e))?;
            let h = parse_header(&header).map_err(|reason| Error::CacheFormat {
                path: path.clone(),
                reason,
            })?;
            let bytes = entry.metadata().map_err(|e| Error::io(&path, e))?.len();
            out.push(CacheEntry {
                fingerprint: h.fingerprint,
                size: h.m,
                complex: h.complex,
                bytes,
                path,
            });
        }
        out.sort_by_key(|e| e.fingerprint);
        Ok(out)
    }

    /// Removes every cached decomposition; returns how many were removed.
    pub fn purge(&self) -> Result<usize> {
        let entries = self.list()?;
        for e in &entries {
            fs::remove_file(&e.path).map_err(|err| Error::io(&e.path, err))?;
        }
        Ok(entries.len())
    }

    /// Loads from cache or computes and stores.
    pub fn eig(&self, op: &SelfAdjointOperator) -> Result<SpectralDecomposition> {
        if let Some(dec) = self.load(op.fingerprint(), op.grid().clone())? {
            return Ok(dec);
        }
        let dec = calculus::eig(op)?;
        self.store(&dec)?;
        Ok(dec)
    }
}

struct Header {
    complex: bool,
    fingerprint: u64,
    m: usize,
}

fn parse_header(b: &[u8]) -> std::result::Result<Header, String> {
    if b.len() < HEADER_LEN {
        return Err("truncated header".into());
    }
    if &b[..8] != MAGIC {
        return Err("bad magic".into());
    }
    let version = u32::from_le_bytes(b[8..12].try_into().unwrap());
    if version != FORMAT_VERSION {
        return Err(format!("unsupported version {version}"));
    }
    let flags = u32::from_le_bytes(b[12..16].try_into().unwrap());
    let fingerprint = u64::from_le_bytes(b[16..24].try_into().unwrap());
    let m = u64::from_le_bytes(b[24..32].try_into().unwrap());
    Ok(Header {
        complex: flags & 1 == 1,
        fingerprint,
        m: usize::try_from(m).map_err(|_| "size does not fit in memory".to_string())?,
    })
}

fn encode(dec: &SpectralDecomposition) -> Vec<u8> {
    let m = dec.len();
    let complex = matches!(dec.basis(), Basis::Complex(_));
    let per = if complex { 2 } else { 1 };
    let mut out = Vec::with_capacity(HEADER_LEN + 8 * (m + per * m * m));
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&(complex as u32).to_le_bytes());
    out.extend_from_slice(&dec.operator_fingerprint().to_le_bytes());
    out.extend_from_slice(&(m as u64).to_le_bytes());
    for v in dec.eigenvalues() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    match dec.basis() {
        Basis::Real(e) => {
            for v in e.as_slice() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        Basis::Complex(e) => {
            for v in e.as_slice() {
                out.extend_from_slice(&v.re.to_le_bytes());
                out.extend_from_slice(&v.im.to_le_bytes());
            }
        }
    }
    out
}

fn decode(b: &[u8], grid: Arc<Grid>) -> std::result::Result<SpectralDecomposition, String> {
    let h = parse_header(b)?;
    let m = h.m;
    if m != grid.len() {
        return Err(format!("cached size {m} does not match grid of {} nodes", grid.len()));
    }
    let per = if h.complex { 2 } else { 1 };
    let expected = HEADER_LEN + 8 * (m + per * m * m);
    if b.len() != expected {
        return Err(format!("expected {expected} bytes, found {}", b.len()));
    }
    let mut floats = b[HEADER_LEN..]
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()));
    let values: Vec<f64> = floats.by_ref().take(m).collect();
    let basis = if h.complex {
        let data: Vec<Complex64> = (0..m * m)
            .map(|_| Complex64::new(floats.next().unwrap(), floats.next().unwrap()))
            .collect();
        Basis::Complex(DMatrix::from_vec(m, m, data))
    } else {
        Basis::Real(DMatrix::from_iterator(m, m, floats))
    };
    SpectralDecomposition::from_parts(h.fingerprint, grid, values, basis).map_err(|e| e.to_string())
}
