//! Time-reversal duality between (A, B, K) and (-A, -B, K), and the
//! spectral duality between K and its mirrored gain for companion systems.

use pe_growth::matcore::{basis_column, shift};
use pe_growth::rates::{
    duality_check, k_minus, kminus_duality_check, FeedbackSystem, SearchBudget, SignalFamily,
};
use pe_growth::signals::SignalClass;
use pe_growth::Matrix;

fn main() -> pe_growth::Result<()> {
    let cls = SignalClass::new(1.0, 0.4)?;
    let family = SignalFamily::bang_bang(
        &cls,
        &SearchBudget {
            samples: 20,
            ..Default::default()
        },
    )?;

    let k = Matrix::from_row_slice(1, 2, &[-2.0, -3.0]);
    let sys = FeedbackSystem::new(&shift(2), &basis_column(2, 2), &k)?;
    let report = duality_check(&sys, &cls, &family)?;
    println!(
        "{} signals, max inversion residual {:.3e}, rc {} vs dual rd {} (bitwise equal: {})",
        report.rows.len(),
        report.max_residual,
        report.rc.value,
        report.rd_dual.value,
        report.aggregate_equal
    );

    let k3 = Matrix::from_row_slice(1, 3, &[-6.0, -11.0, -6.0]);
    println!("K = {k3}K- = {}", k_minus(&k3));
    let km = kminus_duality_check(3, &k3, &family)?;
    println!("max spectral inversion residual {:.3e}", km.max_residual);
    Ok(())
}
