//! Searched worst-case rates of convergence and divergence for a stabilized
//! double integrator under (1, 0.4)-signals.

use pe_growth::matcore::{basis_column, shift};
use pe_growth::rates::{
    delta_quantities, search_estimate, FeedbackSystem, Objective, SearchBudget,
};
use pe_growth::signals::SignalClass;
use pe_growth::Matrix;

fn main() -> pe_growth::Result<()> {
    let k = Matrix::from_row_slice(1, 2, &[-2.0, -3.0]);
    let sys = FeedbackSystem::new(&shift(2), &basis_column(2, 2), &k)?;
    let cls = SignalClass::new(1.0, 0.4)?;
    let budget = SearchBudget::default();

    let (rc, family) = search_estimate(&sys, &cls, &budget, Objective::Convergence)?;
    let (rd, _) = search_estimate(&sys, &cls, &budget, Objective::Divergence)?;
    println!(
        "rc <= {:.6} ({}), rd <= {:.6} ({})",
        rc.value, rc.method, rd.value, rd.method
    );
    if let Some(w) = &rc.witness {
        println!("slowest signal: {}", serde_json::to_string(w)?);
    }

    let delta = delta_quantities(&sys, &cls, &family)?;
    println!(
        "delta >= {:.6}, delta* <= {:.6}",
        delta.delta.value, delta.delta_star.value
    );
    Ok(())
}
