//! Sum-power iterative water-filling on a near-far two-user channel:
//! where the power goes, and how DPC compares against zero-forcing and the
//! interference-free bound.
//!
//! ```bash
//! cargo run --release --example power_allocation
//! ```

use mmeval::prelude::*;
use nalgebra::DMatrix;
use num_complex::Complex64;

fn main() -> Result<()> {
    let rho = 10.0; // 10 dB

    // two users on 4 antennas; user 1 is 6 dB weaker and partly aligned
    // with user 0
    let h = DMatrix::from_row_slice(
        2,
        4,
        &[
            Complex64::new(1.0, 0.3),
            Complex64::new(-0.6, 0.8),
            Complex64::new(0.4, -1.1),
            Complex64::new(0.9, 0.0),
            Complex64::new(0.55, 0.05),
            Complex64::new(-0.25, 0.45),
            Complex64::new(0.2, -0.5),
            Complex64::new(0.4, 0.1),
        ],
    );

    let result = dpc_with_zf(&h, rho)?;
    let alloc = &result.allocation;
    println!("channel: K=2 users, M=4 antennas, rho = 10 dB");
    println!("row energies: {:.3} / {:.3}", row_energy(&h, 0), row_energy(&h, 1));
    println!();
    println!("DPC sum capacity    : {:.4} bps/Hz", result.c_dpc);
    println!(
        "power allocation    : P = [{:.4}, {:.4}], water level {:.4}",
        alloc.p[0], alloc.p[1], alloc.water_level
    );
    println!(
        "converged           : {} after {} cycles",
        alloc.converged, alloc.iterations
    );
    println!(
        "objective at uniform: {:.4} bps/Hz",
        capacity_objective(&h, rho, &[0.5, 0.5])?
    );
    println!("ZF equal power      : {:.4} bps/Hz", result.c_zf.unwrap());
    println!("interference-free   : {:.4} bps/Hz", if_capacity(2, rho));

    // orthogonal rows of squared norm M hit the asymptote exactly
    let mut ortho = DMatrix::<Complex64>::zeros(2, 4);
    ortho[(0, 0)] = Complex64::new(2.0, 0.0);
    ortho[(1, 2)] = Complex64::new(2.0, 0.0);
    let ideal = dpc_capacity_default(&ortho, rho)?;
    println!();
    println!(
        "orthogonal rows of squared norm M: c_dpc = {:.6} = K log2(1+rho) = {:.6}",
        ideal.c_dpc,
        if_capacity(2, rho)
    );
    println!(
        "spread there is {:.1} dB and the allocation is uniform: {:?}",
        singular_spread(&ortho)?.spread_db,
        ideal.allocation.p
    );
    Ok(())
}

fn row_energy(h: &DMatrix<Complex64>, row: usize) -> f64 {
    h.row(row).iter().map(|c| c.norm_sqr()).sum()
}
