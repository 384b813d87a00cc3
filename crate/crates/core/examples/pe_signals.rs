//! Persistent-excitation checks, reversal, and gluing a prefix and a steering
//! control into one periodic signal.

use pe_growth::signals::{
    make_hash_admissible, reverse, validate_pe, PESignal, Segment, SignalClass,
};

fn main() -> pe_growth::Result<()> {
    let cls = SignalClass::new(1.0, 0.4)?;
    let square = PESignal::periodic(vec![Segment::new(0.5, 1.0), Segment::new(0.5, 0.0)])?;
    let report = validate_pe(&square, &cls, None)?;
    println!(
        "square wave: valid {}, worst window {} at {}",
        report.valid, report.worst_integral, report.worst_window_start
    );
    println!("reversed: {}", serde_json::to_string(&reverse(&square)?)?);

    let floor = PESignal::constant(cls.floor_value(), cls.t)?;
    println!(
        "floor constant worst window {}",
        validate_pe(&floor, &cls, None)?.worst_integral
    );

    let steering = PESignal::aperiodic(vec![Segment::new(0.3, 0.4), Segment::new(0.2, 1.0)])?;
    let glued = make_hash_admissible(&square, 1.0, &steering, 0.5, &cls)?;
    println!("glued: {}", serde_json::to_string(&glued)?);

    // A tight class where the same gluing loses excitation.
    let tight = SignalClass::new(1.0, 0.9)?;
    let slow = PESignal::constant(0.9, 1.0)?;
    match make_hash_admissible(&square, 1.0, &slow, 1.0, &tight) {
        Ok(s) => println!("unexpectedly admissible: {}", serde_json::to_string(&s)?),
        Err(e) => println!("rejected: {e}"),
    }
    Ok(())
}
