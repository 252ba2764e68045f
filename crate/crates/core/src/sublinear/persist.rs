//! Binary index file.
//!
//! Layout, little-endian:
//! `DDEI`, `u32` version, then the configuration (`f64` epsilon, gamma,
//! radius_const, c_inf, lsh_failure; `u64` s, seed; `u8` ℓ∞ backend tag with
//! `u32 m, u32 reps`), the dataset as a `DDE1` block, `u32 k`, and per group
//! the `u32`-counted member list and heavy coordinate list. ℓ2 hash tables
//! are rebuilt from the stored seed when the file is loaded.

use std::fs::File;
use std::io::{BufReader, Read, Write};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};

use super::{HeavyLightPartition, PreprocessedIndex, SublinearConfig};
use crate::io::{read_binary, to_u32, write_atomically, write_binary};
use crate::nns::{LinfBackend, LinfIndex};
use crate::rng::derive_seed;
use crate::{Error, Result};

pub const INDEX_MAGIC: &[u8; 4] = b"DDEI";
pub const INDEX_VERSION: u32 = 1;

pub fn save_index(path: &Path, idx: &PreprocessedIndex) -> Result<()> {
    write_atomically(path, |w| write_index(w, idx))
}

pub fn load_index(path: &Path) -> Result<PreprocessedIndex> {
    read_index(&mut BufReader::new(File::open(path)?))
}

fn write_index<W: Write>(w: &mut W, idx: &PreprocessedIndex) -> Result<()> {
    let cfg = &idx.cfg;
    w.write_all(INDEX_MAGIC)?;
    w.write_u32::<LittleEndian>(INDEX_VERSION)?;
    for x in [cfg.epsilon, cfg.gamma, cfg.radius_const, cfg.c_inf, cfg.lsh_failure] {
        w.write_f64::<LittleEndian>(x)?;
    }
    w.write_u64::<LittleEndian>(cfg.s as u64)?;
    w.write_u64::<LittleEndian>(cfg.seed)?;
    let (tag, m, reps) = match cfg.linf_backend {
        LinfBackend::ExactScan => (0u8, 0, 0),
        LinfBackend::CoordinateSample { m, reps } => (1u8, m, reps),
    };
    w.write_u8(tag)?;
    w.write_u32::<LittleEndian>(to_u32(m)?)?;
    w.write_u32::<LittleEndian>(to_u32(reps)?)?;
    write_binary(w, &idx.vs)?;
    w.write_u32::<LittleEndian>(to_u32(idx.groups.len())?)?;
    for g in &idx.groups {
        write_list(w, &g.members)?;
        write_list(w, &g.partition.heavy)?;
    }
    Ok(())
}

fn write_list<W: Write>(w: &mut W, xs: &[usize]) -> Result<()> {
    w.write_u32::<LittleEndian>(to_u32(xs.len())?)?;
    for &x in xs {
        w.write_u32::<LittleEndian>(to_u32(x)?)?;
    }
    Ok(())
}

fn read_list<R: Read>(r: &mut R, bound: usize, what: &str) -> Result<Vec<usize>> {
    let len = r.read_u32::<LittleEndian>()? as usize;
    if len > bound {
        return Err(Error::Format(format!("{what} list of length {len} exceeds {bound}")));
    }
    let mut out = Vec::with_capacity(len);
    for _ in 0..len {
        let x = r.read_u32::<LittleEndian>()? as usize;
        if x >= bound || out.last().is_some_and(|&prev| prev >= x) {
            return Err(Error::Format(format!("{what} list is not sorted within 0..{bound}")));
        }
        out.push(x);
    }
    Ok(out)
}

fn read_index<R: Read>(r: &mut R) -> Result<PreprocessedIndex> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != INDEX_MAGIC {
        return Err(Error::Format(format!("bad magic {magic:?}, expected DDEI")));
    }
    let version = r.read_u32::<LittleEndian>()?;
    if version != INDEX_VERSION {
        return Err(Error::Format(format!("unsupported index version {version}")));
    }
    let mut f = [0.0; 5];
    for x in &mut f {
        *x = r.read_f64::<LittleEndian>()?;
    }
    let s = r.read_u64::<LittleEndian>()? as usize;
    let seed = r.read_u64::<LittleEndian>()?;
    let tag = r.read_u8()?;
    let m = r.read_u32::<LittleEndian>()? as usize;
    let reps = r.read_u32::<LittleEndian>()? as usize;
    let linf_backend = match tag {
        0 => LinfBackend::ExactScan,
        1 => LinfBackend::CoordinateSample { m, reps },
        t => return Err(Error::Format(format!("unknown l-infinity backend tag {t}"))),
    };
    let cfg = SublinearConfig {
        epsilon: f[0],
        gamma: f[1],
        s,
        radius_const: f[2],
        c_inf: f[3],
        linf_backend,
        lsh_failure: f[4],
        seed,
    };
    cfg.validate().map_err(|e| Error::Format(format!("stored configuration: {e}")))?;
    let vs = read_binary(r)?;
    let k = r.read_u32::<LittleEndian>()? as usize;
    if k != vs.len() {
        return Err(Error::Format(format!("{k} groups for {} distributions", vs.len())));
    }
    let n = vs.domain_size();
    let mut raw = Vec::with_capacity(k);
    for _ in 0..k {
        let members = read_list(r, k, "member")?;
        let heavy = read_list(r, n, "heavy")?;
        let mut is_heavy = vec![false; n];
        for &h in &heavy {
            is_heavy[h] = true;
        }
        let light = (0..n).filter(|&i| !is_heavy[i]).collect();
        raw.push((
            members,
            HeavyLightPartition {
                heavy,
                light,
                gamma: cfg.gamma,
            },
        ));
    }
    let linf = LinfIndex::build(&vs, cfg.linf_backend, derive_seed(cfg.seed, &[0]))?;
    PreprocessedIndex::assemble(vs, cfg, linf, raw)
}
