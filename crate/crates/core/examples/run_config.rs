//! Replay a bundled configuration and print the CSV it produces.
//!
//! ```text
//! cargo run --example run_config -- protocol c14_detector
//! ```

use std::path::Path;

use qnet::cli::{execute, Command, Format};

fn main() -> qnet::Result<()> {
    let mut args = std::env::args().skip(1);
    let cmd = args.next().unwrap_or_else(|| "protocol".into());
    let name = args.next().unwrap_or_else(|| "c14_detector".into());
    let command = match cmd.as_str() {
        "directionality" => Command::Directionality,
        "dynamics" => Command::Dynamics,
        "scatter" => Command::Scatter,
        "protocol" => Command::Protocol,
        "circuit" => Command::Circuit,
        other => return Err(qnet::QnetError::Config(format!("unknown command {other}"))),
    };
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("examples/configs").join(format!("{name}.json"));
    let text = std::fs::read_to_string(&path)?;
    let data = execute(command, &text, 0)?;
    data.write(Format::Csv, &mut std::io::stdout().lock())
}
