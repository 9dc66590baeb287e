//! Plain-text instance persistence.
//!
//! Format (UTF-8, line-oriented):
//!
//! ```text
//! evorl-instance v1
//! class = knapsack | tsp | continuous
//! seed = <u64>
//! # knapsack:
//! items = <n>
//! weight_limit = <f64>
//! <weight> <value>        (n lines)
//! # tsp:
//! nodes = <n>
//! <w(i,0)> ... <w(i,n-1)> (n rows)
//! # continuous:
//! function = <name>
//! ```
//!
//! Floats are written with Rust's shortest round-trip formatting, so
//! `load(save(x))` reproduces the numeric payload bit-exactly.

use super::{KnapsackInstance, ObjectiveFunction, ProblemInstance, TspInstance};
use crate::error::{Error, Result};
use std::fmt::Write as _;
use std::path::Path;

const HEADER: &str = "evorl-instance v1";

/// Serializes an instance to the text format.
pub fn save_instance(inst: &ProblemInstance) -> String {
    let mut out = String::new();
    out.push_str(HEADER);
    out.push('\n');
    match inst {
        ProblemInstance::Knapsack(k) => {
            writeln!(out, "class = knapsack").unwrap();
            writeln!(out, "seed = {}", k.seed).unwrap();
            writeln!(out, "items = {}", k.items.len()).unwrap();
            writeln!(out, "weight_limit = {}", k.weight_limit).unwrap();
            for &(w, v) in &k.items {
                writeln!(out, "{w} {v}").unwrap();
            }
        }
        ProblemInstance::Tsp(t) => {
            writeln!(out, "class = tsp").unwrap();
            writeln!(out, "seed = {}", t.seed).unwrap();
            writeln!(out, "nodes = {}", t.n).unwrap();
            for i in 0..t.n {
                let row: Vec<String> = (0..t.n).map(|j| t.weight(i, j).to_string()).collect();
                writeln!(out, "{}", row.join(" ")).unwrap();
            }
        }
        ProblemInstance::Continuous(f) => {
            writeln!(out, "class = continuous").unwrap();
            writeln!(out, "seed = 0").unwrap();
            writeln!(out, "function = {}", f.id.as_str()).unwrap();
        }
    }
    out
}

fn header_value<'a>(line: Option<&'a str>, key: &str) -> Result<&'a str> {
    let line = line.ok_or_else(|| Error::parse(format!("missing `{key}` line")))?;
    let (k, v) = line
        .split_once('=')
        .ok_or_else(|| Error::parse(format!("expected `{key} = ...`, got `{line}`")))?;
    if k.trim() != key {
        return Err(Error::parse(format!("expected key `{key}`, got `{}`", k.trim())));
    }
    Ok(v.trim())
}

fn parse_f64(s: &str) -> Result<f64> {
    s.parse::<f64>()
        .map_err(|_| Error::parse(format!("invalid float `{s}`")))
}

/// Parses an instance from the text format.
pub fn parse_instance(text: &str) -> Result<ProblemInstance> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let head = lines.next().unwrap_or("");
    if head.trim() != HEADER {
        return Err(Error::parse(format!("bad header `{head}`")));
    }
    let class = header_value(lines.next(), "class")?.to_string();
    let seed: u64 = header_value(lines.next(), "seed")?
        .parse()
        .map_err(|_| Error::parse("invalid seed"))?;
    match class.as_str() {
        "knapsack" => {
            let n: usize = header_value(lines.next(), "items")?
                .parse()
                .map_err(|_| Error::parse("invalid item count"))?;
            let weight_limit = parse_f64(header_value(lines.next(), "weight_limit")?)?;
            let mut items = Vec::with_capacity(n);
            for _ in 0..n {
                let line = lines.next().ok_or_else(|| Error::parse("missing item line"))?;
                let mut parts = line.split_whitespace();
                let w = parse_f64(parts.next().unwrap_or(""))?;
                let v = parse_f64(parts.next().unwrap_or(""))?;
                items.push((w, v));
            }
            let inst = KnapsackInstance { items, weight_limit, seed };
            inst.validate()?;
            Ok(ProblemInstance::Knapsack(inst))
        }
        "tsp" => {
            let n: usize = header_value(lines.next(), "nodes")?
                .parse()
                .map_err(|_| Error::parse("invalid node count"))?;
            let mut weights = Vec::with_capacity(n * n);
            for _ in 0..n {
                let line = lines.next().ok_or_else(|| Error::parse("missing matrix row"))?;
                let row: Result<Vec<f64>> = line.split_whitespace().map(parse_f64).collect();
                let row = row?;
                if row.len() != n {
                    return Err(Error::parse("matrix row has wrong length"));
                }
                weights.extend(row);
            }
            let inst = TspInstance { n, weights, seed };
            inst.validate()?;
            Ok(ProblemInstance::Tsp(inst))
        }
        "continuous" => {
            let name = header_value(lines.next(), "function")?;
            let id = name.parse()?;
            Ok(ProblemInstance::Continuous(ObjectiveFunction::new(id)))
        }
        other => Err(Error::parse(format!("unknown class `{other}`"))),
    }
}

/// Loads an instance from a file.
pub fn load_instance(path: &Path) -> Result<ProblemInstance> {
    let text = std::fs::read_to_string(path)?;
    parse_instance(&text)
}
