//! The i.i.d. Rayleigh reference: singular value spreads shrink and DPC
//! capacity climbs to the interference-free asymptote as antennas grow.
//!
//! ```bash
//! cargo run --release --example rayleigh_baseline
//! ```

use mmeval::prelude::*;

fn main() -> Result<()> {
    let users = 4;
    let rho_db = 10.0;
    let rho = 10f64.powf(rho_db / 10.0);
    let draws = 2000;

    println!("i.i.d. Rayleigh, K = {users}, rho = {rho_db} dB, {draws} draws per M\n");
    println!("           spread_db                    dpc_capacity [bps/Hz]");
    println!("   M    median    p5     p95         mean    p5      p95");

    for m in [4usize, 8, 16, 32, 64, 128] {
        // a fresh A = M tensor whose subcarriers are independent draws
        let raw = gen_rayleigh(users, m, draws, 2024)?;
        let params = EvalParams {
            rho,
            num_users: users,
            antenna_counts: vec![m],
            num_subsets: 1,
            master_seed: 2024,
            normalization: Normalization::Norm1,
        };

        let spread = run_spread_ensemble(&normalize1(&raw)?, &params)?;
        let s = spread.at(m).unwrap();

        let capacity = run_capacity_ensemble(&normalize2(&raw)?, &params)?;
        let c = capacity.at(m).unwrap();

        println!(
            "{m:4}   {:6.2}  {:6.2}  {:6.2}       {:6.3}  {:6.3}  {:6.3}",
            s.median, s.ci_low, s.ci_high, c.mean, c.ci_low, c.ci_high
        );
    }

    println!(
        "\ninterference-free asymptote K log2(1+rho) = {:.4} bps/Hz",
        if_capacity(users, rho)
    );
    println!("the spread median falls from ~17 dB at M=4 to ~2 dB at M=128,");
    println!("and the mean capacity closes most of the gap to the asymptote.");
    Ok(())
}
