//! The CTF1 channel file format and antenna-subset selection: write a
//! tensor, read it back bit-exactly, and slice user-by-antenna matrices out
//! of it the way the Monte-Carlo ensembles do.
//!
//! ```bash
//! cargo run --release --example channel_files
//! ```

use mmeval::prelude::*;

fn main() -> Result<()> {
    let dir = std::env::temp_dir().join("mmeval_channel_files");
    std::fs::create_dir_all(&dir)?;
    let path = dir.join("rayleigh.ctf");

    // generate, normalize, persist
    let raw = gen_rayleigh(4, 64, 32, 7)?;
    let tensor = normalize1(&raw)?;
    write_channel_file(&tensor, &path)?;
    let bytes = std::fs::metadata(&path)?.len();
    println!(
        "wrote {} ({bytes} bytes: 8 magic + 4 header-length + JSON header + {}x{}x{} le f64 pairs)",
        path.display(),
        tensor.users(),
        tensor.ports(),
        tensor.subcarriers()
    );

    // round trip is bit exact
    let back = read_channel_file(&path)?;
    assert_eq!(tensor, back);
    println!("read back: {} users, norm state {}, bit-exact round trip", back.users(), back.norm_state());

    // subset selection always happens after full-array normalization
    let subsets = draw_subsets(back.ports(), 8, 3, 42)?;
    for (i, subset) in subsets.iter().enumerate() {
        let h = back.select_subset(subset, 0)?;
        let spread = singular_spread(&h)?;
        println!(
            "subset {i} {:?}: 4x8 matrix, spread {:.2} dB",
            subset.indices(),
            spread.spread_db
        );
    }

    // the same master seed reproduces the same draws
    let again = draw_subsets(back.ports(), 8, 3, 42)?;
    assert_eq!(subsets, again);
    println!("subset draws are reproducible under the master seed");

    // raw tensors refuse selection: normalization must come first
    let err = raw.select_subset(&subsets[0], 0).unwrap_err();
    println!("selecting from a RAW tensor fails as required: {err}");

    std::fs::remove_file(&path).ok();
    Ok(())
}
