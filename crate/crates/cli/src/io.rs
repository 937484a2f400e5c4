use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use rdsim::trace::{parse_trace, parse_trace_binary, write_trace, write_trace_binary};
use rdsim::AccessEvent;
use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::{CliError, Result};

pub fn is_binary(path: &Path) -> bool {
    path.extension().is_some_and(|e| e == "bin")
}

/// Reads a text trace, or a binary one when the file ends in `.bin`.
pub fn load_trace(path: &Path) -> Result<Vec<AccessEvent>> {
    let file = File::open(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => {
            CliError::usage(format!("trace file not found: {}", path.display()))
        }
        _ => CliError::usage(format!("cannot open trace {}: {e}", path.display())),
    })?;
    let parsed = if is_binary(path) {
        parse_trace_binary(file)
    } else {
        parse_trace(file)
    };
    parsed.map_err(|e| CliError::usage(format!("{}: {e}", path.display())))
}

pub fn save_trace(path: &Path, events: &[AccessEvent], binary: bool) -> Result<()> {
    let file = File::create(path).map_err(|e| CliError::io(path, e))?;
    let out = BufWriter::new(file);
    let r = if binary {
        write_trace_binary(out, events)
    } else {
        write_trace(out, events)
    };
    r.map_err(|e| CliError::io(path, e))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::usage(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::usage(format!("{}: {e}", path.display())))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text =
        serde_json::to_string_pretty(value).map_err(|e| CliError::failure(e.to_string()))?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| CliError::io(path, e))
}
