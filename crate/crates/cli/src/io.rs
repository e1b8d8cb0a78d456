//! CSV tables, variable manifests, group files and edge lists.

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};

use xhoi::apps::{Dag, VariableGroup};
use xhoi::{Dataset, Matrix};

use crate::CliError;

/// A numeric table with named columns.
#[derive(Debug, Clone)]
pub struct Table {
    pub headers: Vec<String>,
    /// Column-major values.
    pub columns: Vec<Vec<f64>>,
}

impl Table {
    pub fn rows(&self) -> usize {
        self.columns.first().map_or(0, Vec::len)
    }

    fn column_index(&self, name: &str) -> Option<usize> {
        self.headers.iter().position(|h| h == name)
    }
}

pub fn read_table(path: &Path) -> Result<Table, CliError> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| CliError::Input(format!("cannot read {}: {e}", path.display())))?;
    let headers: Vec<String> = reader
        .headers()
        .map_err(|e| CliError::Input(format!("{}: bad header: {e}", path.display())))?
        .iter()
        .map(str::to_string)
        .collect();
    if headers.is_empty() {
        return Err(CliError::Input(format!("{}: no columns", path.display())));
    }
    let mut columns = vec![Vec::new(); headers.len()];
    for (r, record) in reader.records().enumerate() {
        // Row numbers count the header as row 1.
        let row = r + 2;
        let record = record.map_err(|e| CliError::Input(format!("{}: row {row}: {e}", path.display())))?;
        if record.len() != headers.len() {
            return Err(CliError::Input(format!(
                "{}: row {row} has {} cells, expected {}",
                path.display(),
                record.len(),
                headers.len()
            )));
        }
        for (c, cell) in record.iter().enumerate() {
            let v: f64 = cell.parse().map_err(|_| {
                CliError::Input(format!(
                    "{}: row {row}, column {} ('{}'): not a number: '{cell}'",
                    path.display(),
                    c + 1,
                    headers[c]
                ))
            })?;
            if !v.is_finite() {
                return Err(CliError::Input(format!(
                    "{}: row {row}, column {} ('{}'): non-finite value",
                    path.display(),
                    c + 1,
                    headers[c]
                )));
            }
            columns[c].push(v);
        }
    }
    Ok(Table { headers, columns })
}

pub fn write_table(path: &Path, headers: &[String], columns: &[Vec<f64>]) -> Result<(), CliError> {
    let mut w = csv::Writer::from_path(path)
        .map_err(|e| CliError::Input(format!("cannot write {}: {e}", path.display())))?;
    let io_err = |e: csv::Error| CliError::Input(format!("cannot write {}: {e}", path.display()));
    w.write_record(headers).map_err(io_err)?;
    let rows = columns.first().map_or(0, Vec::len);
    for i in 0..rows {
        // `{}` on f64 prints the shortest string that parses back exactly.
        w.write_record(columns.iter().map(|c| c[i].to_string())).map_err(io_err)?;
    }
    w.flush()
        .map_err(|e| CliError::Input(format!("cannot write {}: {e}", path.display())))
}

/// Variable name to column names, in file order.
#[derive(Debug, Clone, PartialEq)]
pub struct VariableManifest {
    pub variables: Vec<(String, Vec<String>)>,
}

impl VariableManifest {
    /// Every column is its own variable.
    pub fn one_per_column(table: &Table) -> Self {
        Self {
            variables: table.headers.iter().map(|h| (h.clone(), vec![h.clone()])).collect(),
        }
    }

    /// Group `var.k` headers by their `var` prefix, in order of appearance.
    pub fn from_dotted_headers(headers: &[String]) -> Self {
        let mut variables: Vec<(String, Vec<String>)> = Vec::new();
        for h in headers {
            let name = h.rsplit_once('.').map_or(h.as_str(), |(v, _)| v);
            match variables.iter_mut().find(|(v, _)| v == name) {
                Some((_, cols)) => cols.push(h.clone()),
                None => variables.push((name.to_string(), vec![h.clone()])),
            }
        }
        Self { variables }
    }

    pub fn to_text(&self) -> String {
        self.variables
            .iter()
            .map(|(v, cols)| format!("{v}: {}\n", cols.join(",")))
            .collect()
    }

    pub fn names(&self) -> Vec<String> {
        self.variables.iter().map(|(v, _)| v.clone()).collect()
    }

    /// Assemble a dataset, checking that columns exist and are disjoint.
    pub fn dataset(&self, table: &Table) -> Result<Dataset, CliError> {
        let mut used: HashMap<&str, &str> = HashMap::new();
        let mut vars = Vec::with_capacity(self.variables.len());
        for (name, cols) in &self.variables {
            let mut idx = Vec::with_capacity(cols.len());
            for c in cols {
                if let Some(prev) = used.insert(c, name) {
                    return Err(CliError::Input(format!(
                        "column '{c}' is assigned to both '{prev}' and '{name}'"
                    )));
                }
                idx.push(table.column_index(c).ok_or_else(|| {
                    CliError::Input(format!("manifest column '{c}' (variable '{name}') not in CSV header"))
                })?);
            }
            let rows = table.rows();
            vars.push(Matrix::from_fn(rows, idx.len(), |i, k| table.columns[idx[k]][i]));
        }
        Dataset::new(vars).map_err(CliError::from)
    }
}

/// Parse `name: col1,col2` lines; blank lines and `#` comments are skipped.
pub fn parse_name_lists(text: &str, what: &str) -> Result<Vec<(String, Vec<String>)>, CliError> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (name, cols) = line
            .split_once(':')
            .ok_or_else(|| CliError::Input(format!("{what} line {}: expected 'name: col1,col2'", i + 1)))?;
        let cols: Vec<String> =
            cols.split(',').map(|c| c.trim().to_string()).filter(|c| !c.is_empty()).collect();
        let name = name.trim();
        if name.is_empty() || cols.is_empty() {
            return Err(CliError::Input(format!("{what} line {}: empty name or column list", i + 1)));
        }
        if out.iter().any(|(n, _): &(String, Vec<String>)| n == name) {
            return Err(CliError::Input(format!("{what} line {}: '{name}' declared twice", i + 1)));
        }
        out.push((name.to_string(), cols));
    }
    Ok(out)
}

/// Manifest path next to a data file: `data.csv` -> `data.manifest`.
pub fn sidecar_manifest(data: &Path) -> PathBuf {
    data.with_extension("manifest")
}

/// Load data using an explicit manifest, else a sidecar manifest if present,
/// else one variable per column.
pub fn load_dataset(data: &Path, manifest: Option<&Path>) -> Result<(Dataset, VariableManifest), CliError> {
    let table = read_table(data)?;
    let sidecar = sidecar_manifest(data);
    let manifest = match manifest {
        Some(p) => Some(p.to_path_buf()),
        None if sidecar.exists() => Some(sidecar),
        None => None,
    };
    let manifest = match manifest {
        Some(p) => {
            let text = fs::read_to_string(&p)
                .map_err(|e| CliError::Input(format!("cannot read {}: {e}", p.display())))?;
            VariableManifest {
                variables: parse_name_lists(&text, "manifest")?,
            }
        }
        None => VariableManifest::one_per_column(&table),
    };
    let data = manifest.dataset(&table)?;
    Ok((data, manifest))
}

/// Groups of variables for profiling. Names may be variable names or CSV
/// column names (mapped to the variable that owns the column).
pub fn load_groups(path: &Path, manifest: &VariableManifest) -> Result<Vec<VariableGroup>, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Input(format!("cannot read {}: {e}", path.display())))?;
    parse_name_lists(&text, "groups")?
        .into_iter()
        .map(|(label, names)| {
            let mut members = Vec::with_capacity(names.len());
            for n in &names {
                let idx = manifest
                    .variables
                    .iter()
                    .position(|(v, cols)| v == n || cols.iter().any(|c| c == n))
                    .ok_or_else(|| CliError::Input(format!("group '{label}': unknown variable or column '{n}'")))?;
                if !members.contains(&idx) {
                    members.push(idx);
                }
            }
            Ok(VariableGroup { label, members })
        })
        .collect()
}

/// Parse `1>2, 2>3` (1-based node numbers). `empty` or `-` is the empty graph.
pub fn parse_dag(d: usize, text: &str) -> Result<Dag, CliError> {
    let text = text.trim();
    let mut edges = Vec::new();
    if !(text.is_empty() || text == "empty" || text == "-") {
        for part in text.split(',') {
            let part = part.trim();
            let (a, b) = part
                .split_once('>')
                .ok_or_else(|| CliError::Input(format!("edge '{part}' is not of the form parent>child")))?;
            let parse = |s: &str| {
                s.trim()
                    .parse::<usize>()
                    .map_err(|_| CliError::Input(format!("edge '{part}': '{s}' is not a node number")))
            };
            edges.push((parse(a)?, parse(b)?));
        }
    }
    Dag::new(d, edges).map_err(|e| CliError::Input(format!("invalid DAG '{text}': {e}")))
}

/// One candidate per non-empty, non-comment line.
pub fn parse_candidates(d: usize, text: &str) -> Result<Vec<Dag>, CliError> {
    let dags: Vec<Dag> = text
        .lines()
        .enumerate()
        .filter_map(|(i, raw)| {
            let line = raw.split('#').next().unwrap_or("").trim();
            (!line.is_empty()).then(|| {
                parse_dag(d, line).map_err(|e| CliError::Input(format!("candidate line {}: {e}", i + 1)))
            })
        })
        .collect::<Result<_, _>>()?;
    if dags.is_empty() {
        return Err(CliError::Input("candidate file lists no DAGs".into()));
    }
    Ok(dags)
}

pub fn dag_to_text(dag: &Dag) -> String {
    if dag.edges().is_empty() {
        return "empty".into();
    }
    dag.edges()
        .iter()
        .map(|(a, b)| format!("{a}>{b}"))
        .collect::<Vec<_>>()
        .join(",")
}
