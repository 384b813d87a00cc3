//! Seeded draws from spin(9,1): membership, spectral symmetry and the even
//! characteristic polynomial.

use pe_growth::spinchk::{
    bordered_decomposition, charpoly_even_decomp, random_spin91, spin91_residual, symmetry_residual,
};

fn main() -> pe_growth::Result<()> {
    for seed in 0..5 {
        let m = random_spin91(seed);
        let poly = charpoly_even_decomp(&m)?;
        println!(
            "seed {seed}: membership {:.1e}, symmetry {:.1e}, odd coefficients {:.1e}, border defect {:.1e}",
            spin91_residual(&m)?,
            symmetry_residual(&m)?,
            poly.odd_residual,
            bordered_decomposition(&m)?.max_defect()
        );
    }
    Ok(())
}
