//! File formats for distributions and sample counts.
//!
//! Text distribution file: a header line `n k`, then `k` lines of `n`
//! whitespace-separated probabilities. The binary variant is the 4-byte
//! magic `DDE1`, little-endian `u32 n`, `u32 k`, then `k * n` little-endian
//! `f64` values, row-major. Readers detect the variant from the magic.
//!
//! Sample file: one non-negative integer count per line, `n` lines.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};

use crate::dist::{DiscreteDistribution, DistributionSet};
use crate::{Error, Result};

pub const DISTRIBUTION_MAGIC: &[u8; 4] = b"DDE1";

/// Output encoding for distribution files.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Encoding {
    Text,
    Binary,
}

impl Encoding {
    /// `.bin` selects the binary variant, anything else text.
    pub fn for_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some("bin") => Encoding::Binary,
            _ => Encoding::Text,
        }
    }
}

pub fn read_distribution_set(path: &Path) -> Result<DistributionSet> {
    let mut bytes = Vec::new();
    File::open(path)?.read_to_end(&mut bytes)?;
    if bytes.starts_with(DISTRIBUTION_MAGIC) {
        decode_binary(&bytes)
    } else {
        parse_text(&bytes[..], path)
    }
}

pub fn write_distribution_set(path: &Path, set: &DistributionSet) -> Result<()> {
    let encoding = Encoding::for_path(path);
    write_atomically(path, |w| match encoding {
        Encoding::Text => write_text(w, set),
        Encoding::Binary => write_binary(w, set),
    })
}

pub fn parse_text<R: Read>(reader: R, path: &Path) -> Result<DistributionSet> {
    let parse_err = |line: usize, msg: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        msg,
    };
    let mut lines = BufReader::new(reader)
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l))
        .filter(|(_, l)| l.as_ref().map(|l| !l.trim().is_empty()).unwrap_or(true));

    let (hline, header) = lines
        .next()
        .ok_or_else(|| parse_err(1, "missing `n k` header".into()))?;
    let header = header?;
    let dims: Vec<usize> = header
        .split_whitespace()
        .map(str::parse)
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| parse_err(hline, format!("bad header `{header}`: {e}")))?;
    let [n, k] = dims[..] else {
        return Err(parse_err(hline, format!("expected `n k`, got `{header}`")));
    };
    if n == 0 || k == 0 {
        return Err(parse_err(hline, "n and k must be positive".into()));
    }

    let mut dists = Vec::with_capacity(k);
    for (lineno, line) in lines.by_ref().take(k) {
        let line = line?;
        let probs: Vec<f64> = line
            .split_whitespace()
            .map(str::parse)
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| parse_err(lineno, format!("bad probability: {e}")))?;
        if probs.len() != n {
            return Err(parse_err(
                lineno,
                format!("expected {n} probabilities, got {}", probs.len()),
            ));
        }
        let d = DiscreteDistribution::new(probs).map_err(|e| parse_err(lineno, e.to_string()))?;
        dists.push(d);
    }
    if dists.len() != k {
        return Err(Error::Format(format!(
            "{}: header promises {k} distributions, found {}",
            path.display(),
            dists.len()
        )));
    }
    if let Some((lineno, _)) = lines.next() {
        return Err(parse_err(lineno, "trailing data after the last distribution".into()));
    }
    DistributionSet::new(dists)
}

pub fn write_text<W: Write>(w: &mut W, set: &DistributionSet) -> Result<()> {
    writeln!(w, "{} {}", set.domain_size(), set.len())?;
    for d in set {
        let mut first = true;
        for p in d.probs() {
            if !first {
                w.write_all(b" ")?;
            }
            // `{}` prints the shortest representation that round-trips.
            write!(w, "{p}")?;
            first = false;
        }
        writeln!(w)?;
    }
    Ok(())
}

pub fn write_binary<W: Write>(w: &mut W, set: &DistributionSet) -> Result<()> {
    w.write_all(DISTRIBUTION_MAGIC)?;
    w.write_u32::<LittleEndian>(to_u32(set.domain_size())?)?;
    w.write_u32::<LittleEndian>(to_u32(set.len())?)?;
    for d in set {
        for &p in d.probs() {
            w.write_f64::<LittleEndian>(p)?;
        }
    }
    Ok(())
}

pub fn decode_binary(bytes: &[u8]) -> Result<DistributionSet> {
    let mut r = bytes;
    read_binary(&mut r)
}

/// Reads one `DDE1` block from `r`, leaving the reader after it.
pub fn read_binary<R: Read>(r: &mut R) -> Result<DistributionSet> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != DISTRIBUTION_MAGIC {
        return Err(Error::Format(format!("bad magic {magic:?}, expected DDE1")));
    }
    let n = r.read_u32::<LittleEndian>()? as usize;
    let k = r.read_u32::<LittleEndian>()? as usize;
    if n == 0 || k == 0 {
        return Err(Error::Format("n and k must be positive".into()));
    }
    let mut dists = Vec::with_capacity(k);
    for row in 0..k {
        let mut probs = vec![0.0; n];
        r.read_f64_into::<LittleEndian>(&mut probs)
            .map_err(|e| Error::Format(format!("truncated row {row}: {e}")))?;
        dists.push(
            DiscreteDistribution::new(probs)
                .map_err(|e| Error::Format(format!("row {row}: {e}")))?,
        );
    }
    DistributionSet::new(dists)
}

pub fn read_sample_counts(path: &Path) -> Result<Vec<u64>> {
    let file = File::open(path)?;
    let mut counts = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        let t = line.trim();
        if t.is_empty() {
            continue;
        }
        counts.push(t.parse().map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: i + 1,
            msg: format!("bad count `{t}`: {e}"),
        })?);
    }
    Ok(counts)
}

pub fn write_sample_counts(path: &Path, counts: &[u64]) -> Result<()> {
    write_atomically(path, |w| {
        for c in counts {
            writeln!(w, "{c}")?;
        }
        Ok(())
    })
}

/// Writes through a temporary file in the destination directory and renames
/// it into place, so readers never observe a partial file.
pub fn write_atomically<F>(path: &Path, body: F) -> Result<()>
where
    F: FnOnce(&mut BufWriter<&mut File>) -> Result<()>,
{
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    {
        let mut w = BufWriter::new(tmp.as_file_mut());
        body(&mut w)?;
        w.flush()?;
    }
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

pub(crate) fn to_u32(x: usize) -> Result<u32> {
    u32::try_from(x).map_err(|_| Error::Format(format!("{x} does not fit in u32")))
}
