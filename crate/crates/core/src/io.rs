//! Long-format CSV ingestion, design construction, scenario files, and the
//! deterministic JSON and plain-text renderings used by the command line.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use serde_json::Value;

use crate::data::{Dataset, Occasion, SubjectRecord};
use crate::error::{Error, Result};
use crate::logistic::check_full_rank;
use crate::sim::{Estimator, ScenarioConfig, TrueModel};

/// Field values read as a missing outcome.
pub const MISSING_MARKERS: [&str; 3] = ["", "NA", "--"];

/// Version of the JSON layout written by [`envelope`].
pub const SCHEMA_VERSION: u64 = 1;

/// Which CSV columns hold the keys, the outcome and the covariates.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ColumnSpec {
    pub subject: String,
    pub time: String,
    pub outcome: String,
    /// Covariate columns to read; `None` takes every other column.
    pub covariates: Option<Vec<String>>,
    /// Covariates read as categorical levels rather than numbers.
    pub factors: Vec<String>,
}

impl Default for ColumnSpec {
    fn default() -> Self {
        ColumnSpec {
            subject: "subject".into(),
            time: "time".into(),
            outcome: "outcome".into(),
            covariates: None,
            factors: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum CellValue {
    Number(f64),
    Level(String),
}

impl CellValue {
    pub fn render(&self) -> String {
        match self {
            CellValue::Number(v) => v.to_string(),
            CellValue::Level(s) => s.clone(),
        }
    }
}

/// One retained row: a subject's observed outcome at one time.
#[derive(Debug, Clone, PartialEq)]
pub struct LongRow {
    /// Line of the row in the source file (1 is the header).
    pub line: usize,
    pub time: f64,
    pub outcome: u8,
    /// Covariate values in [`LongTable::columns`] order.
    pub values: Vec<CellValue>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LongSubject {
    pub id: String,
    /// Sorted by time.
    pub rows: Vec<LongRow>,
}

/// Long-format data grouped by subject. Rows with a missing outcome are
/// dropped on reading and counted in `dropped_rows`.
#[derive(Debug, Clone, PartialEq)]
pub struct LongTable {
    pub subject_column: String,
    pub time_column: String,
    pub outcome_column: String,
    pub columns: Vec<String>,
    pub factors: Vec<String>,
    pub subjects: Vec<LongSubject>,
    pub dropped_rows: usize,
}

impl LongTable {
    pub fn n_rows(&self) -> usize {
        self.subjects.iter().map(|s| s.rows.len()).sum()
    }

    pub fn subject(&self, id: &str) -> Option<&LongSubject> {
        self.subjects.iter().find(|s| s.id == id)
    }

    fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }
}

/// Integers sort numerically and before anything else; other ids sort as text.
fn id_key(id: &str) -> (u8, i128, String) {
    match id.parse::<i128>() {
        Ok(v) => (0, v, String::new()),
        Err(_) => (1, 0, id.to_string()),
    }
}

fn csv_error(e: csv::Error) -> Error {
    let line = e.position().map(|p| p.line() as usize).unwrap_or(0);
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        kind => Error::data(line, format!("malformed CSV: {kind:?}")),
    }
}

fn parse_number(field: &str, column: &str, line: usize) -> Result<f64> {
    match field.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(Error::data(line, format!("unparseable number '{field}' in column '{column}'"))),
    }
}

fn open(path: &Path) -> Result<File> {
    File::open(path).map_err(|e| Error::Config(format!("cannot open {}: {e}", path.display())))
}

pub fn read_long_csv(path: impl AsRef<Path>, spec: &ColumnSpec) -> Result<LongTable> {
    parse_long_csv(open(path.as_ref())?, spec)
}

/// Reads long-format CSV from any reader. Rows are grouped by subject and
/// sorted by time, so the row order of the input does not matter.
pub fn parse_long_csv<R: Read>(reader: R, spec: &ColumnSpec) -> Result<LongTable> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers().map_err(csv_error)?.clone();
    if headers.is_empty() {
        return Err(Error::data(1, "no rows"));
    }
    let names: Vec<&str> = headers.iter().collect();
    for (i, n) in names.iter().enumerate() {
        if names[..i].contains(n) {
            return Err(Error::data(1, format!("duplicate column '{n}' in header")));
        }
    }
    let find = |name: &str| {
        names
            .iter()
            .position(|&n| n == name)
            .ok_or_else(|| Error::Config(format!("column '{name}' not found; header is [{}]", names.join(", "))))
    };
    let si = find(&spec.subject)?;
    let ti = find(&spec.time)?;
    let oi = find(&spec.outcome)?;
    if si == ti || si == oi || ti == oi {
        return Err(Error::Config("subject, time and outcome must be distinct columns".into()));
    }
    let keys = [&spec.subject, &spec.time, &spec.outcome];
    let columns: Vec<String> = match &spec.covariates {
        Some(c) => {
            for name in c {
                find(name)?;
            }
            c.iter().filter(|n| !keys.contains(n)).cloned().collect()
        }
        None => names
            .iter()
            .filter(|n| !keys.iter().any(|k| k.as_str() == **n))
            .map(|n| n.to_string())
            .collect(),
    };
    for f in &spec.factors {
        if !columns.contains(f) {
            return Err(Error::Config(format!("factor '{f}' is not a covariate column")));
        }
    }
    let col_idx: Vec<usize> = columns.iter().map(|c| find(c)).collect::<Result<_>>()?;
    let is_factor: Vec<bool> = columns.iter().map(|c| spec.factors.contains(c)).collect();

    let mut groups: HashMap<String, Vec<LongRow>> = HashMap::new();
    let mut seen: HashMap<(String, u64), usize> = HashMap::new();
    let mut records = 0usize;
    let mut dropped = 0usize;
    for rec in rdr.records() {
        let rec = rec.map_err(csv_error)?;
        let line = rec.position().map(|p| p.line() as usize).unwrap_or(0);
        records += 1;
        let subject = rec.get(si).unwrap_or("");
        if subject.is_empty() {
            return Err(Error::data(line, "missing subject id"));
        }
        let time_field = rec.get(ti).unwrap_or("");
        if MISSING_MARKERS.contains(&time_field) {
            return Err(Error::data(line, "missing time"));
        }
        let time = parse_number(time_field, &spec.time, line)?;
        let key = (subject.to_string(), (time + 0.0).to_bits());
        if let Some(first) = seen.insert(key, line) {
            return Err(Error::data(
                line,
                format!("duplicate (subject, time) = ({subject}, {time}); first seen on line {first}"),
            ));
        }
        let outcome_field = rec.get(oi).unwrap_or("");
        if MISSING_MARKERS.contains(&outcome_field) {
            dropped += 1;
            continue;
        }
        let outcome = match outcome_field.parse::<f64>() {
            Ok(v) if v == 0.0 => 0,
            Ok(v) if v == 1.0 => 1,
            _ => return Err(Error::data(line, format!("outcome must be 0 or 1, found '{outcome_field}'"))),
        };
        let mut values = Vec::with_capacity(columns.len());
        for ((name, &ci), &factor) in columns.iter().zip(&col_idx).zip(&is_factor) {
            let field = rec.get(ci).unwrap_or("");
            if MISSING_MARKERS.contains(&field) {
                return Err(Error::data(line, format!("missing value in column '{name}'")));
            }
            values.push(if factor {
                CellValue::Level(field.to_string())
            } else {
                CellValue::Number(parse_number(field, name, line)?)
            });
        }
        groups.entry(subject.to_string()).or_default().push(LongRow {
            line,
            time,
            outcome,
            values,
        });
    }
    if records == 0 {
        return Err(Error::data(1, "no rows"));
    }
    if groups.is_empty() {
        return Err(Error::data(1, "every outcome is missing"));
    }
    let mut subjects: Vec<LongSubject> = groups
        .into_iter()
        .map(|(id, mut rows)| {
            rows.sort_by(|a, b| a.time.total_cmp(&b.time));
            LongSubject { id, rows }
        })
        .collect();
    subjects.sort_by_cached_key(|s| id_key(&s.id));
    Ok(LongTable {
        subject_column: spec.subject.clone(),
        time_column: spec.time.clone(),
        outcome_column: spec.outcome.clone(),
        columns,
        factors: spec.factors.clone(),
        subjects,
        dropped_rows: dropped,
    })
}

/// Writes the retained rows back out in long format; numbers use the
/// shortest representation that reads back to the same value.
pub fn write_long_csv<W: Write>(table: &LongTable, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec![
        table.subject_column.clone(),
        table.time_column.clone(),
        table.outcome_column.clone(),
    ];
    header.extend(table.columns.iter().cloned());
    w.write_record(&header).map_err(csv_error)?;
    for s in &table.subjects {
        for r in &s.rows {
            let mut rec = vec![s.id.clone(), r.time.to_string(), r.outcome.to_string()];
            rec.extend(r.values.iter().map(CellValue::render));
            w.write_record(&rec).map_err(csv_error)?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_long_csv_file(table: &LongTable, path: impl AsRef<Path>) -> Result<()> {
    write_long_csv(table, File::create(path)?)
}

/// Model terms for [`build_design`]. A term is a column name, `a:b` for a
/// product, or `a*b` for `a`, `b` and `a:b`. The time column may be used like
/// any covariate.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DesignSpec {
    pub intercept: bool,
    /// Empty means every covariate column as a main effect.
    pub terms: Vec<String>,
    /// Center and scale every non-intercept column.
    pub standardize: bool,
}

impl Default for DesignSpec {
    fn default() -> Self {
        DesignSpec {
            intercept: true,
            terms: Vec::new(),
            standardize: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ColumnScaling {
    pub column: String,
    pub center: f64,
    pub scale: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Design {
    pub dataset: Dataset,
    /// Design columns in coefficient order.
    pub columns: Vec<String>,
    /// Reference level of each factor; its indicator is omitted.
    pub reference_levels: BTreeMap<String, String>,
    /// Empty unless standardization was requested.
    pub scaling: Vec<ColumnScaling>,
}

#[derive(Debug, Clone, PartialEq)]
enum Source {
    Time,
    Number(usize),
    Indicator(usize, String),
}

fn factor_levels(table: &LongTable, idx: usize) -> Vec<String> {
    let mut levels: Vec<String> = table
        .subjects
        .iter()
        .flat_map(|s| s.rows.iter())
        .filter_map(|r| match &r.values[idx] {
            CellValue::Level(l) => Some(l.clone()),
            CellValue::Number(_) => None,
        })
        .collect();
    levels.sort_by_cached_key(|l| id_key(l));
    levels.dedup();
    levels
}

/// Splits `a*b` into its main effects and interaction, leaving other terms.
fn expand_terms(terms: &[String]) -> Vec<String> {
    let mut out: Vec<String> = Vec::new();
    let mut push = |t: String| {
        if !out.contains(&t) {
            out.push(t);
        }
    };
    for term in terms {
        let t: String = term.chars().filter(|c| !c.is_whitespace()).collect();
        if t.contains('*') {
            let parts: Vec<&str> = t.split('*').collect();
            for p in &parts {
                push(p.to_string());
            }
            push(parts.join(":"));
        } else {
            push(t);
        }
    }
    out
}

/// Materialises the design matrix of every retained row.
pub fn build_design(table: &LongTable, spec: &DesignSpec) -> Result<Design> {
    let terms = if spec.terms.is_empty() {
        table.columns.clone()
    } else {
        expand_terms(&spec.terms)
    };
    let mut reference_levels = BTreeMap::new();
    let mut columns: Vec<(String, Vec<Source>)> = Vec::new();
    if spec.intercept {
        columns.push(("intercept".into(), Vec::new()));
    }
    for term in &terms {
        let mut expanded: Vec<(String, Vec<Source>)> = vec![(String::new(), Vec::new())];
        for part in term.split(':') {
            if part.is_empty() {
                return Err(Error::Design(format!("malformed term '{term}'")));
            }
            let choices: Vec<(String, Source)> = if part == table.time_column {
                vec![(part.to_string(), Source::Time)]
            } else {
                let idx = table
                    .column_index(part)
                    .ok_or_else(|| Error::Design(format!("term '{term}' refers to unknown column '{part}'")))?;
                if table.factors.iter().any(|f| f == part) {
                    let levels = factor_levels(table, idx);
                    reference_levels.insert(part.to_string(), levels[0].clone());
                    levels[1..]
                        .iter()
                        .map(|l| (format!("{part}[{l}]"), Source::Indicator(idx, l.clone())))
                        .collect()
                } else {
                    vec![(part.to_string(), Source::Number(idx))]
                }
            };
            expanded = expanded
                .iter()
                .flat_map(|(name, src)| {
                    choices.iter().map(move |(n, s)| {
                        let name = if name.is_empty() { n.clone() } else { format!("{name}:{n}") };
                        let mut src = src.clone();
                        src.push(s.clone());
                        (name, src)
                    })
                })
                .collect();
        }
        for col in expanded {
            if columns.iter().any(|(n, _)| *n == col.0) {
                return Err(Error::Design(format!("column '{}' appears twice in the design", col.0)));
            }
            columns.push(col);
        }
    }
    if columns.is_empty() {
        return Err(Error::Design("the design has no columns".into()));
    }

    let value = |row: &LongRow, sources: &[Source]| -> f64 {
        sources
            .iter()
            .map(|s| match s {
                Source::Time => row.time,
                Source::Number(i) => match row.values[*i] {
                    CellValue::Number(v) => v,
                    CellValue::Level(_) => f64::NAN,
                },
                Source::Indicator(i, level) => match &row.values[*i] {
                    CellValue::Level(l) if l == level => 1.0,
                    _ => 0.0,
                },
            })
            .product()
    };
    let mut rows: Vec<Vec<Vec<f64>>> = table
        .subjects
        .iter()
        .map(|s| s.rows.iter().map(|r| columns.iter().map(|(_, src)| value(r, src)).collect()).collect())
        .collect();
    let names: Vec<String> = columns.iter().map(|(n, _)| n.clone()).collect();

    let mut scaling = Vec::new();
    if spec.standardize {
        let n = table.n_rows() as f64;
        for (j, (name, src)) in columns.iter().enumerate() {
            if src.is_empty() {
                continue;
            }
            let all = || rows.iter().flatten().map(|r| r[j]);
            let center = all().sum::<f64>() / n;
            let sd = (all().map(|v| (v - center).powi(2)).sum::<f64>() / n).sqrt();
            let scale = if sd > 0.0 { sd } else { 1.0 };
            rows.iter_mut().flatten().for_each(|r| r[j] = (r[j] - center) / scale);
            scaling.push(ColumnScaling {
                column: name.clone(),
                center,
                scale,
            });
        }
    }
    let pooled: Vec<Vec<f64>> = rows.iter().flatten().cloned().collect();
    check_full_rank(&pooled, &names)?;

    let subjects = table
        .subjects
        .iter()
        .zip(rows)
        .map(|(s, xs)| {
            let occ = s
                .rows
                .iter()
                .zip(xs)
                .map(|(r, x)| Occasion {
                    time: r.time,
                    index: 0,
                    outcome: r.outcome,
                    covariates: x,
                })
                .collect();
            SubjectRecord::new(s.id.clone(), occ)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Design {
        dataset: Dataset::new(names.clone(), subjects)?,
        columns: names,
        reference_levels,
        scaling,
    })
}

/// Parses a scenario file of `key = value` lines. Blank lines and lines
/// starting with `#` are ignored, lists are comma separated, and keys that
/// are absent take the standard design's values for the chosen true model.
///
/// Keys: `name`, `true_model`, `n_subjects`, `occasions`, `group_fraction`,
/// `beta`, `assoc`, `phi`, `replications`, `seed`, `estimators`, `schedule`,
/// `pilot`, `inflation`.
pub fn parse_scenario(text: &str) -> Result<ScenarioConfig> {
    let mut entries: BTreeMap<String, (usize, String)> = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.trim();
        if content.is_empty() || content.starts_with('#') {
            continue;
        }
        let (k, v) = content
            .split_once('=')
            .ok_or_else(|| Error::data(line, format!("expected key = value, found '{content}'")))?;
        let key = k.trim().to_string();
        if entries.insert(key.clone(), (line, v.trim().to_string())).is_some() {
            return Err(Error::data(line, format!("key '{key}' given twice")));
        }
    }
    let true_model = match entries.remove("true_model") {
        Some((line, v)) => v.parse::<TrueModel>().map_err(|e| Error::data(line, e.to_string()))?,
        None => TrueModel::Bridge,
    };
    let mut c = ScenarioConfig::standard(true_model);
    for (key, (line, v)) in entries {
        let bad = |what: &str| Error::data(line, format!("{key}: expected {what}, found '{v}'"));
        let int = || v.parse::<usize>().map_err(|_| bad("a nonnegative integer"));
        let real = || v.parse::<f64>().map_err(|_| bad("a number"));
        let reals = || {
            v.split(',')
                .map(|p| p.trim().parse::<f64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|_| bad("comma-separated numbers"))
        };
        match key.as_str() {
            "name" => c.name = v.clone(),
            "n_subjects" => c.n_subjects = int()?,
            "occasions" => c.occasions = int()?,
            "group_fraction" => c.group_fraction = real()?,
            "beta" => c.beta = reals()?,
            "assoc" => c.assoc = reals()?,
            "phi" => c.phi = real()?,
            "replications" => c.replications = int()?,
            "seed" => c.seed = v.parse().map_err(|_| bad("an unsigned integer"))?,
            "estimators" => {
                c.estimators = v
                    .split(',')
                    .map(|p| p.trim().parse::<Estimator>())
                    .collect::<Result<Vec<_>>>()
                    .map_err(|e| Error::data(line, e.to_string()))?
            }
            "schedule" => c.schedule = v.parse().map_err(|e: Error| Error::data(line, e.to_string()))?,
            "pilot" => c.importance.pilot = int()?,
            "inflation" => c.importance.inflation = real()?,
            _ => return Err(Error::data(line, format!("unknown key '{key}'"))),
        }
    }
    c.validate()?;
    Ok(c)
}

pub fn read_scenario(path: impl AsRef<Path>) -> Result<ScenarioConfig> {
    let mut text = String::new();
    open(path.as_ref())?.read_to_string(&mut text)?;
    parse_scenario(&text)
}

/// The scenario in the format read by [`parse_scenario`].
pub fn format_scenario(c: &ScenarioConfig) -> String {
    let list = |v: &[f64]| v.iter().map(f64::to_string).collect::<Vec<_>>().join(", ");
    let estimators: Vec<&str> = c.estimators.iter().map(|e| e.label()).collect();
    let mut s = String::new();
    let _ = writeln!(s, "name = {}", c.name);
    let _ = writeln!(s, "true_model = {}", c.true_model);
    let _ = writeln!(s, "n_subjects = {}", c.n_subjects);
    let _ = writeln!(s, "occasions = {}", c.occasions);
    let _ = writeln!(s, "group_fraction = {}", c.group_fraction);
    let _ = writeln!(s, "beta = {}", list(&c.beta));
    let _ = writeln!(s, "assoc = {}", list(&c.assoc));
    let _ = writeln!(s, "phi = {}", c.phi);
    let _ = writeln!(s, "replications = {}", c.replications);
    let _ = writeln!(s, "seed = {}", c.seed);
    let _ = writeln!(s, "estimators = {}", estimators.join(", "));
    let _ = writeln!(s, "schedule = {}", c.schedule);
    let _ = writeln!(s, "pilot = {}", c.importance.pilot);
    let _ = writeln!(s, "inflation = {}", c.importance.inflation);
    s
}

/// A JSON number, or null when `x` is not finite.
pub fn num(x: f64) -> Value {
    serde_json::Number::from_f64(x).map(Value::Number).unwrap_or(Value::Null)
}

pub fn num_opt(x: Option<f64>) -> Value {
    x.map(num).unwrap_or(Value::Null)
}

pub fn nums(xs: &[f64]) -> Value {
    Value::Array(xs.iter().copied().map(num).collect())
}

/// Wraps a command's result with the schema version, tool version, command
/// name and seed.
pub fn envelope(command: &str, seed: Option<u64>, result: Value) -> Value {
    serde_json::json!({
        "schema_version": SCHEMA_VERSION,
        "tool": { "name": env!("CARGO_PKG_NAME"), "version": env!("CARGO_PKG_VERSION") },
        "command": command,
        "seed": seed,
        "result": result,
    })
}

fn write_float(out: &mut String, x: f64) {
    if x == 0.0 {
        out.push_str("0.000000000000000e0");
    } else {
        let _ = write!(out, "{x:.15e}");
    }
}

fn write_value(out: &mut String, v: &Value, indent: usize) {
    let pad = |out: &mut String, n: usize| out.extend(std::iter::repeat(' ').take(n));
    match v {
        Value::Null => out.push_str("null"),
        Value::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
        Value::Number(n) => match (n.as_u64(), n.as_i64()) {
            (Some(u), _) if !n.is_f64() => {
                let _ = write!(out, "{u}");
            }
            (_, Some(i)) if !n.is_f64() => {
                let _ = write!(out, "{i}");
            }
            _ => write_float(out, n.as_f64().unwrap_or(f64::NAN)),
        },
        Value::String(s) => out.push_str(&serde_json::to_string(s).expect("strings serialize")),
        Value::Array(items) => {
            if items.is_empty() {
                out.push_str("[]");
                return;
            }
            if items.iter().all(|i| !i.is_array() && !i.is_object()) {
                out.push('[');
                for (k, item) in items.iter().enumerate() {
                    if k > 0 {
                        out.push_str(", ");
                    }
                    write_value(out, item, indent);
                }
                out.push(']');
                return;
            }
            out.push_str("[\n");
            for (k, item) in items.iter().enumerate() {
                pad(out, indent + 2);
                write_value(out, item, indent + 2);
                out.push_str(if k + 1 < items.len() { ",\n" } else { "\n" });
            }
            pad(out, indent);
            out.push(']');
        }
        Value::Object(map) => {
            if map.is_empty() {
                out.push_str("{}");
                return;
            }
            out.push_str("{\n");
            // serde_json's map is ordered by key unless its `preserve_order`
            // feature is on; sort explicitly so that never matters.
            let mut keys: Vec<&String> = map.keys().collect();
            keys.sort();
            for (k, key) in keys.iter().enumerate() {
                pad(out, indent + 2);
                out.push_str(&serde_json::to_string(key).expect("strings serialize"));
                out.push_str(": ");
                write_value(out, &map[*key], indent + 2);
                out.push_str(if k + 1 < keys.len() { ",\n" } else { "\n" });
            }
            pad(out, indent);
            out.push('}');
        }
    }
}

/// Renders JSON with sorted keys, two-space indentation and every float in
/// scientific notation with 16 significant digits, so that equal values
/// always produce equal bytes.
pub fn canonical_json(v: &Value) -> String {
    let mut out = String::new();
    write_value(&mut out, v, 0);
    out.push('\n');
    out
}

/// Fixed-point rendering for text tables; `-` for missing values.
pub fn fmt_num(x: Option<f64>, decimals: usize) -> String {
    match x {
        Some(v) if v.is_finite() => format!("{v:.decimals$}"),
        _ => "-".into(),
    }
}

/// An aligned plain-text table: first column left aligned, the rest right
/// aligned, with a rule under the header.
pub fn text_table(header: &[&str], rows: &[Vec<String>]) -> String {
    let ncol = header.len();
    let mut width: Vec<usize> = header.iter().map(|h| h.chars().count()).collect();
    for r in rows {
        for (j, cell) in r.iter().enumerate().take(ncol) {
            width[j] = width[j].max(cell.chars().count());
        }
    }
    let render = |cells: Vec<&str>| -> String {
        let mut line = String::new();
        for (j, cell) in cells.iter().enumerate() {
            if j > 0 {
                line.push_str("  ");
            }
            let pad = width[j] - cell.chars().count();
            if j == 0 {
                line.push_str(cell);
                line.extend(std::iter::repeat(' ').take(pad));
            } else {
                line.extend(std::iter::repeat(' ').take(pad));
                line.push_str(cell);
            }
        }
        line.trim_end().to_string()
    };
    let mut out = render(header.to_vec());
    out.push('\n');
    out.push_str(&"-".repeat(width.iter().sum::<usize>() + 2 * (ncol.saturating_sub(1))));
    out.push('\n');
    for r in rows {
        out.push_str(&render(r.iter().map(String::as_str).collect()));
        out.push('\n');
    }
    out
}
