use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::theory::{run_theory, TheoryGrid, TheoryReport};

/// Runs the grid and writes `theory.json` and `theory.txt` into `out`.
/// Rejected inputs are listed in the report; any violated inequality
/// turns into an error after the files are written.
pub fn run_theory_suite(grid: &TheoryGrid, out: &Path) -> Result<(TheoryReport, Vec<PathBuf>)> {
    fs::create_dir_all(out)?;
    let report = run_theory(grid)?;
    let json = out.join("theory.json");
    let text = out.join("theory.txt");
    fs::write(&json, serde_json::to_string_pretty(&report)?)?;
    fs::write(&text, report.to_text())?;
    if !report.passed {
        return Err(Error::InvariantViolation(format!(
            "theory checks failed, see {}",
            text.display()
        )));
    }
    Ok((report, vec![json, text]))
}
