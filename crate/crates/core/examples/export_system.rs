//! Writes the mass-spring-damper benchmark as a JSON system file, in continuous time
//! (`ct` argument) or after forward-Euler discretization (default).
//!
//! ```text
//! cargo run --example export_system -- dt > msd_dt.json
//! ```

use lpvcert::benchmark::{mass_spring_damper_ct, mass_spring_damper_dt, msd_parameter_box};
use lpvcert::cli::SystemFile;

fn main() -> lpvcert::Result<()> {
    let sys = match std::env::args().nth(1).as_deref() {
        Some("ct") => mass_spring_damper_ct(1.0, 1.0),
        _ => mass_spring_damper_dt(),
    };
    let file = SystemFile::from_model(&sys, &msd_parameter_box(), None);
    println!("{}", serde_json::to_string_pretty(&file)?);
    Ok(())
}
