use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::Deserialize;
use toposimp::field::{build_grid_graph, read_csv, CsvOptions, PointCloud};
use toposimp::optim_values::{four_gaussians, GaussianSpec};
use toposimp::ScalarField;

/// Reads a scalar field. `.json` files hold `{vertex_count, edges, values}`;
/// `.csv` files hold a grid of values, one grid row per line, 4-connected.
pub fn load_field(path: &Path) -> Result<ScalarField> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let field: ScalarField = match extension(path).as_str() {
        "csv" => grid_from_csv(&text).with_context(|| format!("parsing grid {}", path.display()))?,
        _ => serde_json::from_str(&text).with_context(|| format!("parsing field {}", path.display()))?,
    };
    if field.is_empty() {
        bail!("{} has no vertices", path.display());
    }
    Ok(field)
}

fn extension(path: &Path) -> String {
    path.extension().and_then(|e| e.to_str()).unwrap_or("").to_ascii_lowercase()
}

fn grid_from_csv(text: &str) -> Result<ScalarField> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (i, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        let row = line
            .split(',')
            .map(|c| c.trim().parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .with_context(|| format!("line {}", i + 1))?;
        rows.push(row);
    }
    let Some(width) = rows.first().map(Vec::len) else {
        bail!("empty grid");
    };
    if rows.iter().any(|r| r.len() != width) {
        bail!("grid rows have different lengths");
    }
    let graph = build_grid_graph(width, rows.len())?;
    Ok(ScalarField::new(graph, rows.concat())?)
}

/// Writes `values` as `height` lines of `width` comma-separated numbers.
pub fn grid_csv(values: &[f64], width: usize) -> String {
    let mut out = String::new();
    for row in values.chunks(width) {
        let cells: Vec<String> = row.iter().map(f64::to_string).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MixtureSpec {
    pub gaussians: Vec<GaussianSpec>,
}

/// A named preset or a JSON/TOML file with a `gaussians` list.
pub fn load_mixture(preset: &str, spec: Option<&Path>) -> Result<Vec<GaussianSpec>> {
    if let Some(path) = spec {
        let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let parsed: MixtureSpec = if extension(path) == "toml" {
            toml::from_str(&text)?
        } else {
            serde_json::from_str(&text)?
        };
        return Ok(parsed.gaussians);
    }
    match preset {
        "four-gaussians" => Ok(four_gaussians()),
        other => bail!("unknown preset {other:?}; available: four-gaussians"),
    }
}

pub struct TableFormat {
    pub label_column: isize,
    pub has_header: bool,
    pub delimiter: u8,
}

pub fn load_table(path: &Path, classification: bool, fmt: &TableFormat) -> Result<PointCloud> {
    let file = fs::File::open(path).with_context(|| format!("opening {}", path.display()))?;
    let opts = CsvOptions {
        has_header: fmt.has_header,
        delimiter: fmt.delimiter,
        label_column: Some(fmt.label_column),
        classification,
    };
    read_csv(file, &opts).with_context(|| format!("reading {}", path.display()))
}
