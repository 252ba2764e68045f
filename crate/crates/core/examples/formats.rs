//! Reading and writing distribution files and persisted indexes.
//!
//! `cargo run --release --example formats`

use densel::io::{read_distribution_set, write_distribution_set};
use densel::sublinear::{load_index, save_index, PreprocessedIndex, SublinearConfig};
use densel::synth::gen_zipfian;

fn main() -> densel::Result<()> {
    let dir = tempfile::tempdir()?;
    let vs = gen_zipfian(64, 32, 5)?;

    // `.bin` selects the binary encoding, anything else the text one.
    for name in ["zipf.txt", "zipf.bin"] {
        let path = dir.path().join(name);
        write_distribution_set(&path, &vs)?;
        let back = read_distribution_set(&path)?;
        let bytes = std::fs::metadata(&path)?.len();
        println!("{name}: {bytes} bytes, {} x {}, identical: {}", back.len(), back.domain_size(), back == vs);
    }

    let idx = PreprocessedIndex::build(vs, SublinearConfig::defaults(64, 32, 0.5)?.with_seed(1))?;
    let path = dir.path().join("zipf.idx");
    save_index(&path, &idx)?;
    let back = load_index(&path)?;
    println!("index: {} groups saved, {} loaded", idx.groups().len(), back.groups().len());
    Ok(())
}
