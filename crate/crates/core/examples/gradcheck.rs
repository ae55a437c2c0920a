//! Finite-difference check of every parameter group, then the same check
//! against a deliberately broken adjoint to show that it is caught.

use relnet::gradcheck::{gradcheck, gradcheck_with_fault, Fault, GradcheckConfig};

fn main() -> relnet::Result<()> {
    let cfg = GradcheckConfig::default();
    let report = gradcheck(&cfg)?;
    print!("{}", report.render_text());

    let fault = Fault {
        group: "h1.0.weight".into(),
        scale: 1.01,
    };
    let broken = gradcheck_with_fault(&cfg, Some(&fault))?;
    println!();
    println!("with the h1.0.weight gradient scaled by 1.01:");
    for g in broken.failures() {
        println!("  m={} {} max relative error {:.2e}", g.layers, g.group, g.max_rel_error);
    }
    Ok(())
}
