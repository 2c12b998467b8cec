use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use serde::Serialize;
use serde_json::Value;

use crate::{CliError, GlobalArgs};

/// Every JSON document carries the command, the resolved configuration and
/// the seed next to its result.
#[derive(Serialize)]
struct Envelope<'a, R: Serialize> {
    schema_version: u32,
    command: &'a str,
    seed: u64,
    config: &'a Value,
    result: &'a R,
}

pub fn open(path: Option<&Path>) -> io::Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

pub fn write_json<R: Serialize>(
    out: &mut dyn Write,
    global: &GlobalArgs,
    command: &str,
    config: &Value,
    result: &R,
) -> Result<(), CliError> {
    let env = Envelope { schema_version: heatsphere::SCHEMA_VERSION, command, seed: global.seed, config, result };
    serde_json::to_writer_pretty(&mut *out, &env)?;
    writeln!(out)?;
    Ok(())
}

/// `#`-prefixed lines heading CSV and table output.
pub fn write_header(out: &mut dyn Write, global: &GlobalArgs, command: &str, config: &Value) -> io::Result<()> {
    writeln!(out, "# heatsphere {command} schema_version={} seed={}", heatsphere::SCHEMA_VERSION, global.seed)?;
    writeln!(out, "# config {config}")
}
