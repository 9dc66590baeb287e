//! Long-format plot-data export from metrics files.

use crate::error::{Error, Result};
use std::io::Write;
use std::path::Path;

/// Merges metrics CSVs (`generation,<metric>` format) into one long-format
/// CSV of `series,generation,value` rows. The series label is the source
/// file stem, and values are copied verbatim so they byte-match the source
/// files.
pub fn emit_plotdata(files: &[std::path::PathBuf], out: &Path) -> Result<()> {
    if files.is_empty() {
        return Err(Error::invalid("plot-data needs at least one metrics file"));
    }
    let mut text = String::from("series,generation,value\n");
    for path in files {
        let content = std::fs::read_to_string(path)
            .map_err(|e| Error::invalid(format!("cannot read `{}`: {e}", path.display())))?;
        let series = path
            .file_stem()
            .and_then(|s| s.to_str())
            .ok_or_else(|| Error::invalid(format!("bad file name `{}`", path.display())))?;
        let mut lines = content.lines();
        let header = lines.next().unwrap_or("");
        if !header.starts_with("generation,") {
            return Err(Error::parse(format!(
                "`{}` is not a metrics CSV (header `{header}`)",
                path.display()
            )));
        }
        for line in lines {
            if line.trim().is_empty() {
                continue;
            }
            let (generation, value) = line
                .split_once(',')
                .ok_or_else(|| Error::parse(format!("bad metrics row `{line}`")))?;
            text.push_str(&format!("{series},{generation},{value}\n"));
        }
    }
    let mut f = std::fs::File::create(out)?;
    f.write_all(text.as_bytes())?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use tempfile::tempdir;

    #[test]
    fn long_format_rows_and_labels() {
        let dir = tempdir().unwrap();
        let agent = dir.path().join("agent_0.csv");
        let baseline = dir.path().join("baseline.csv");
        let mut a = String::from("generation,mbf\n");
        for g in 0..=100 {
            a.push_str(&format!("{g},{}\n", 0.1 * g as f64));
        }
        std::fs::write(&agent, &a).unwrap();
        std::fs::write(&baseline, "generation,mbf\n0,1.5\n1,2.5\n").unwrap();

        let out = dir.path().join("plot.csv");
        emit_plotdata(&[agent.clone(), baseline.clone()], &out).unwrap();
        let text = std::fs::read_to_string(&out).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "series,generation,value");
        let agent_rows = lines.iter().filter(|l| l.starts_with("agent_0,")).count();
        assert_eq!(agent_rows, 101);
        assert!(lines.contains(&"baseline,0,1.5"));
        assert!(lines.contains(&"baseline,1,2.5"));

        // values byte-match the source file
        for line in a.lines().skip(1) {
            let (g, v) = line.split_once(',').unwrap();
            assert!(lines.contains(&format!("agent_0,{g},{v}").as_str()));
        }
    }

    #[test]
    fn missing_file_is_named_in_the_error() {
        let dir = tempdir().unwrap();
        let missing = dir.path().join("nope.csv");
        let out = dir.path().join("plot.csv");
        let err = emit_plotdata(&[missing.clone()], &out).unwrap_err();
        assert!(err.to_string().contains("nope.csv"));
    }
}
