//! File plumbing shared by the subcommands.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;
use spectrum_core::econometrics::SystemSpec;
use spectrum_core::equilibrium::{ExogenousProfile, StructuralParameters};
use spectrum_core::fixtures;
use spectrum_core::market_data::{Dataset, DomainCheck};
use spectrum_core::montecarlo::MomentTarget;

use crate::error::{CliError, CliResult};

pub fn read_text(path: &Path) -> CliResult<String> {
    fs::read_to_string(path).map_err(|e| CliError::from(e).in_file(path))
}

/// Reads a JSON file with `parse`, tagging failures with the path.
pub fn read_json<T, E>(path: &Path, parse: impl FnOnce(&str) -> Result<T, E>) -> CliResult<T>
where
    CliError: From<E>,
{
    let text = read_text(path)?;
    parse(&text).map_err(|e| CliError::from(e).in_file(path))
}

pub fn params(path: Option<&Path>) -> CliResult<StructuralParameters> {
    match path {
        Some(p) => read_json(p, StructuralParameters::from_json),
        None => Ok(fixtures::table5_params()),
    }
}

pub fn targets(path: Option<&Path>) -> CliResult<MomentTarget> {
    match path {
        Some(p) => read_json(p, MomentTarget::from_json),
        None => Ok(fixtures::moment_targets()),
    }
}

pub fn system(path: Option<&Path>) -> CliResult<SystemSpec> {
    match path {
        Some(p) => read_json(p, SystemSpec::from_json),
        None => Ok(fixtures::paper_model()),
    }
}

/// Exogenous profile from JSON, or the targets' means.
pub fn profile(path: Option<&Path>) -> CliResult<ExogenousProfile> {
    match path {
        Some(p) => {
            let x: ExogenousProfile = read_json(p, |t| serde_json::from_str(t))?;
            x.validate().map_err(|e| CliError::from(e).in_file(p))?;
            Ok(x)
        }
        None => Ok(fixtures::moment_targets().mean_profile()),
    }
}

pub fn dataset(path: &Path, lenient: bool) -> CliResult<Dataset> {
    let file = fs::File::open(path).map_err(|e| CliError::from(e).in_file(path))?;
    let check = if lenient {
        DomainCheck::FiniteOnly
    } else {
        DomainCheck::Strict
    };
    Dataset::load(io::BufReader::new(file), check).map_err(|e| CliError::from(e).in_file(path))
}

/// Destination for an artifact: a file, or stdout when absent.
pub fn writer(out: Option<&Path>) -> CliResult<Box<dyn Write>> {
    match out {
        Some(p) => {
            if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                fs::create_dir_all(dir).map_err(|e| CliError::from(e).in_file(dir))?;
            }
            let f = fs::File::create(p).map_err(|e| CliError::from(e).in_file(p))?;
            Ok(Box::new(io::BufWriter::new(f)))
        }
        None => Ok(Box::new(io::stdout().lock())),
    }
}

pub fn write_json<T: Serialize>(out: Option<&Path>, value: &T) -> CliResult<()> {
    let mut w = writer(out)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

pub fn write_text(out: Option<&Path>, text: &str) -> CliResult<()> {
    let mut w = writer(out)?;
    w.write_all(text.as_bytes())?;
    w.flush()?;
    Ok(())
}

pub fn join(dir: &Path, name: &str) -> PathBuf {
    dir.join(name)
}
