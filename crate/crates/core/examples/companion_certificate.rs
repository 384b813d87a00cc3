//! Companion-form certificate for a random single-input pair, plus the
//! coefficient inequalities for a pole-placed gain.

use pe_growth::control::{acc_certificate, coefficient_inequalities, place_poles, TraceShift};
use pe_growth::matcore::{gaussian_matrix, Complex64};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> pe_growth::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let a = gaussian_matrix(&mut rng, 3, 3);
    let b = gaussian_matrix(&mut rng, 3, 1);
    let k = gaussian_matrix(&mut rng, 1, 3);

    let cert = acc_certificate(&a, &b, &k, TraceShift::Full)?;
    println!("verdict {} with r = {:?}", cert.verdict, cert.r);

    let poles = [-1.0, -2.0, -3.0].map(|re| Complex64::new(re, 0.0));
    let placed = place_poles(
        &pe_growth::matcore::shift(3),
        &pe_growth::matcore::basis_column(3, 3),
        &poles,
    )?;
    let ineq = coefficient_inequalities(&placed)?;
    println!("K = {placed}slacks {:?} (c0 = {})", ineq.slacks, ineq.c0);
    Ok(())
}
