//! Spatial fingerprints: sliding-window SAGE estimates reduced to the
//! (array position, azimuth) cells holding 90% of each user's energy.
//! Prints an ASCII sketch per user and the pairwise overlaps.
//!
//! ```bash
//! cargo run --release --example spatial_fingerprints
//! ```

use mmeval::fingerprint::{build_fingerprint, fingerprint_overlap, FingerprintMap, SageConfig};
use mmeval::prelude::*;

fn main() -> Result<()> {
    let seed = 1;
    let geometry = ArrayGeometry::default_ula();
    let sage = SageConfig {
        num_mpcs: 6,
        max_cycles: 3,
        ..SageConfig::default()
    };

    for scenario in [Scenario::LosColocated, Scenario::FarApart] {
        let config = ScenarioConfig::preset(scenario, 2, seed);
        let (raw, truth) = gen_geometric(&geometry, &config, 41, config.seed)?;

        println!("=== {} ===", config.scenario.name());
        for (user, mpcs) in truth.iter().enumerate() {
            println!(
                "user {user}: strongest true path at {:.1} deg, {:.0} ns",
                mpcs[0].azimuth_deg,
                mpcs[0].delay * 1e9
            );
        }

        let maps: Vec<FingerprintMap> = (0..2)
            .map(|user| build_fingerprint(&raw, user, &sage, 0.9))
            .collect::<Result<_>>()?;
        for (user, map) in maps.iter().enumerate() {
            println!("user {user} fingerprint (x: azimuth 0..180, y: array start..end):");
            sketch(map);
        }
        let overlap = fingerprint_overlap(&maps[0], &maps[1])?;
        println!("energy-weighted overlap of the two selections: {overlap:.3}\n");
    }
    println!("co-located LOS users share one patch; far-apart users do not.");
    Ok(())
}

/// Rough terminal rendering: 12 window rows x 60 azimuth columns, `#` for
/// selected cells, `.` for unselected energy.
fn sketch(map: &FingerprintMap) {
    let rows = 12usize.min(map.num_windows);
    let cols = 60usize.min(map.num_bins);
    for r in 0..rows {
        let w0 = r * map.num_windows / rows;
        let w1 = ((r + 1) * map.num_windows / rows).max(w0 + 1);
        let mut line = String::with_capacity(cols);
        for c in 0..cols {
            let b0 = c * map.num_bins / cols;
            let b1 = ((c + 1) * map.num_bins / cols).max(b0 + 1);
            let mut any_energy = false;
            let mut any_selected = false;
            for w in w0..w1 {
                for b in b0..b1 {
                    any_energy |= map.energy_at(w, b) > 0.0;
                    any_selected |= map.is_selected(w, b);
                }
            }
            line.push(if any_selected {
                '#'
            } else if any_energy {
                '.'
            } else {
                ' '
            });
        }
        println!("  |{line}|");
    }
}
