//! Population file: a `sample i j ...` line followed by one antibody per line.

use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};
use immune_resched::{Antibody, AntigenSample, AntigenUniverse, Population};

pub fn render(sample: &AntigenSample, pop: &Population) -> String {
    let mut out = String::from("sample");
    for i in sample.indices() {
        out.push_str(&format!(" {i}"));
    }
    out.push('\n');
    for ab in pop.antibodies() {
        out.push_str(&format!("{ab}\n"));
    }
    out
}

pub fn parse(text: &str, universe: &AntigenUniverse) -> Result<(AntigenSample, Population)> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty() && !l.starts_with('#'));
    let Some((_, header)) = lines.next() else {
        bail!("empty population file");
    };
    let mut fields = header.split_whitespace();
    if fields.next() != Some("sample") {
        bail!("line 1: expected `sample <indices>`");
    }
    let indices = fields
        .map(|f| f.parse::<usize>().with_context(|| format!("line 1: bad index `{f}`")))
        .collect::<Result<Vec<_>>>()?;
    let sample = AntigenSample::new(indices, universe.len())?;

    let mut antibodies = Vec::new();
    for (k, line) in lines {
        let ids = line
            .split_whitespace()
            .map(|f| f.parse::<u8>().with_context(|| format!("line {}: bad job id `{f}`", k + 1)))
            .collect::<Result<Vec<_>>>()?;
        let jobs: [u8; 5] = ids
            .try_into()
            .map_err(|v: Vec<u8>| anyhow::anyhow!("line {}: expected 5 jobs, found {}", k + 1, v.len()))?;
        antibodies.push(Antibody::new(jobs).with_context(|| format!("line {}", k + 1))?);
    }
    let pop = Population::evaluate(antibodies, universe, &sample)?;
    Ok((sample, pop))
}

pub fn load(path: &Path, universe: &AntigenUniverse) -> Result<(AntigenSample, Population)> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    parse(&text, universe).with_context(|| format!("in population file {}", path.display()))
}
