//! Invariant control set of a planar saddle under feedback, with a
//! forward-invariance audit and steering between interior points.

use pe_growth::projective::{
    audit_forward_invariance, invariant_control_set_d2, steering_trials, ControlSetOutcome,
};
use pe_growth::rates::FeedbackSystem;
use pe_growth::Matrix;

fn main() -> pe_growth::Result<()> {
    let a = Matrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]);
    let b = Matrix::from_row_slice(2, 1, &[1.0, 1.0]);
    let k = Matrix::from_row_slice(1, 2, &[0.05, -0.05]);
    let range = (0.4, 1.0);

    let cs = match invariant_control_set_d2(&a, &b, &k, range, 4096)? {
        ControlSetOutcome::Computed(cs) => cs,
        ControlSetOutcome::NotApplicable { reason } => {
            println!("not applicable: {reason}");
            return Ok(());
        }
    };
    println!("arcs {:?}, measure {:.4e}", cs.set.arcs, cs.set.measure());

    let sys = FeedbackSystem::new(&a, &b, &k)?;
    let audit = audit_forward_invariance(&sys, &cs, 100, 50, 4.0, 1)?;
    println!(
        "audit passed {} (max excursion {:.2e})",
        audit.passed, audit.max_excursion
    );
    let st = steering_trials(&sys, &cs, 20, 1.0 / 256.0, 1)?;
    println!(
        "steering reached {}/{} targets, longest {:.3}",
        st.reached, st.targets, st.max_tau
    );
    Ok(())
}
