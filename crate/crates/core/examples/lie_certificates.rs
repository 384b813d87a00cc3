//! Rank certificates for a double integrator with state feedback, and the
//! inclusion chain between them.

use pe_growth::lie::{check_larc, check_larc0, check_plarc, inclusion_chain_audit};
use pe_growth::matcore::{basis_column, shift};
use pe_growth::Matrix;

fn main() -> pe_growth::Result<()> {
    let a = shift(2);
    let b = basis_column(2, 2);
    let k = Matrix::from_row_slice(1, 2, &[-2.0, -3.0]);

    for cert in [
        check_larc(&a, &b, &k)?,
        check_larc0(&a, &b, &k)?,
        check_plarc(&a, &b, &k, 256, 0)?,
    ] {
        println!("{}", serde_json::to_string(&cert)?);
    }

    let chain = inclusion_chain_audit(&a, &b, &k, 1.0)?;
    println!("chain violations: {:?}", chain.violations);
    Ok(())
}
