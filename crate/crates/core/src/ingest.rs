// SPDX-License-Identifier: Apache-2.0

//! Dataset bundle loading and validation.
//!
//! A bundle is a directory:
//!
//! ```text
//! provenance.toml          version + one citation per data file
//! nodes.csv                name,epa_base_kwh_cm2,epa_anchor_year,mass_production_year,mpa_kgco2_cm2
//! efficiency.csv           node,year,multiplier
//! defects.csv              node,date,d0_per_cm2
//! gases.csv                node,gas,gwp,kg_per_cm2,rel_error_95,abatement
//! capacity.csv             node,region,share
//! ci/<region>.csv          timestamp,g_per_kwh
//! utilization/<name>.csv   value
//! ```

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use chrono::{NaiveDate, NaiveDateTime};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::params::{GasEmission, RegionCIHistory, TechNode};

pub const PROVENANCE_FILE: &str = "provenance.toml";
const TIMESTAMP_FORMAT: &str = "%Y-%m-%dT%H:%M:%S";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum IngestError {
    #[error("{file}: {message}")]
    Io { file: String, message: String },
    #[error("{file}:{line}: column `{column}`: {message}")]
    SchemaViolation {
        file: String,
        line: u64,
        column: String,
        message: String,
    },
    #[error("{file}:{line}: column `{column}`: value {value} out of range ({message})")]
    UnitOutOfRange {
        file: String,
        line: u64,
        column: String,
        value: f64,
        message: String,
    },
    #[error("{file}: no provenance entry in {PROVENANCE_FILE}")]
    MissingProvenance { file: String },
    #[error("{file}:{line}: duplicate node `{node}`")]
    DuplicateNode {
        file: String,
        line: u64,
        node: String,
    },
    #[error("capacity.csv: shares for node `{node}` sum to {sum}, expected 1")]
    SharesDontSumToOne { node: String, sum: f64 },
    #[error("{file}: node `{node}`: {message}")]
    InvalidSeries {
        file: String,
        node: String,
        message: String,
    },
    #[error("unknown node `{0}`")]
    UnknownNode(String),
    #[error("unknown utilization set `{0}`")]
    UnknownUtilizationSet(String),
    #[error("unknown carbon-intensity region `{0}`")]
    UnknownRegion(String),
}

pub type Result<T, E = IngestError> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetBundle {
    pub version: String,
    pub nodes: BTreeMap<String, TechNode>,
    pub ci_histories: BTreeMap<String, RegionCIHistory>,
    pub utilization_sets: BTreeMap<String, Vec<f64>>,
    /// Relative file path -> citation text.
    pub provenance: BTreeMap<String, String>,
}

impl DatasetBundle {
    pub fn node(&self, name: &str) -> Result<&TechNode> {
        self.nodes
            .get(name)
            .ok_or_else(|| IngestError::UnknownNode(name.to_string()))
    }

    pub fn ci_history(&self, region: &str) -> Result<&RegionCIHistory> {
        self.ci_histories
            .get(region)
            .ok_or_else(|| IngestError::UnknownRegion(region.to_string()))
    }

    pub fn utilization(&self, name: &str) -> Result<&[f64]> {
        self.utilization_sets
            .get(name)
            .map(Vec::as_slice)
            .ok_or_else(|| IngestError::UnknownUtilizationSet(name.to_string()))
    }
}

#[derive(Debug, Deserialize, Serialize)]
struct Manifest {
    version: String,
    files: BTreeMap<String, String>,
}

/// Loads and validates a bundle. Units are stored as given by the layout:
/// cm2, kWh, kg CO2e, g CO2e/kWh.
pub fn load_bundle(root: impl AsRef<Path>) -> Result<DatasetBundle> {
    let root = root.as_ref();
    let manifest_text = read_text(root, PROVENANCE_FILE)?;
    let manifest: Manifest =
        toml::from_str(&manifest_text).map_err(|e| IngestError::SchemaViolation {
            file: PROVENANCE_FILE.into(),
            line: 0,
            column: "-".into(),
            message: e.to_string(),
        })?;

    let mut loaded: Vec<String> = Vec::new();
    let mut nodes = load_nodes(root)?;
    loaded.push("nodes.csv".into());

    let ci_histories = load_dir(root, "ci", load_ci)?;
    loaded.extend(ci_histories.keys().map(|r| format!("ci/{r}.csv")));
    let utilization_sets = load_dir(root, "utilization", load_utilization)?;
    loaded.extend(
        utilization_sets
            .keys()
            .map(|u| format!("utilization/{u}.csv")),
    );

    load_efficiency(root, &mut nodes)?;
    load_defects(root, &mut nodes)?;
    load_gases(root, &mut nodes)?;
    load_capacity(root, &mut nodes, &ci_histories)?;
    loaded.extend(["efficiency.csv", "defects.csv", "gases.csv", "capacity.csv"].map(String::from));

    for file in &loaded {
        if !manifest.files.contains_key(file) {
            return Err(IngestError::MissingProvenance { file: file.clone() });
        }
    }

    Ok(DatasetBundle {
        version: manifest.version,
        nodes,
        ci_histories,
        utilization_sets,
        provenance: manifest.files,
    })
}

/// Writes `bundle` in the directory layout understood by [`load_bundle`].
pub fn write_bundle(bundle: &DatasetBundle, root: impl AsRef<Path>) -> Result<()> {
    let root = root.as_ref();
    let manifest = Manifest {
        version: bundle.version.clone(),
        files: bundle.provenance.clone(),
    };
    write_text(
        root,
        PROVENANCE_FILE,
        &toml::to_string(&manifest).expect("manifest serializes"),
    )?;

    let mut nodes =
        String::from("name,epa_base_kwh_cm2,epa_anchor_year,mass_production_year,mpa_kgco2_cm2\n");
    let mut eff = String::from("node,year,multiplier\n");
    let mut defects = String::from("node,date,d0_per_cm2\n");
    let mut gases = String::from("node,gas,gwp,kg_per_cm2,rel_error_95,abatement\n");
    let mut capacity = String::from("node,region,share\n");
    for n in bundle.nodes.values() {
        nodes.push_str(&format!(
            "{},{},{},{},{}\n",
            n.name, n.epa_base, n.epa_anchor_year, n.mass_production_year, n.mpa
        ));
        for (y, m) in &n.efficiency_series {
            eff.push_str(&format!("{},{y},{m}\n", n.name));
        }
        for (d, v) in &n.defect_series {
            defects.push_str(&format!("{},{},{v}\n", n.name, d.format("%Y-%m-%d")));
        }
        for g in &n.gas_inventory {
            gases.push_str(&format!(
                "{},{},{},{},{},{}\n",
                n.name, g.gas, g.gwp, g.emission_per_area, g.rel_error_95, g.abatement
            ));
        }
        for (r, s) in &n.capacity_shares {
            capacity.push_str(&format!("{},{r},{s}\n", n.name));
        }
    }
    write_text(root, "nodes.csv", &nodes)?;
    write_text(root, "efficiency.csv", &eff)?;
    write_text(root, "defects.csv", &defects)?;
    write_text(root, "gases.csv", &gases)?;
    write_text(root, "capacity.csv", &capacity)?;

    for (region, h) in &bundle.ci_histories {
        let mut out = String::from("timestamp,g_per_kwh\n");
        for (t, v) in &h.records {
            out.push_str(&format!("{},{v}\n", t.format(TIMESTAMP_FORMAT)));
        }
        write_text(root, &format!("ci/{region}.csv"), &out)?;
    }
    for (name, values) in &bundle.utilization_sets {
        let mut out = String::from("value\n");
        for v in values {
            out.push_str(&format!("{v}\n"));
        }
        write_text(root, &format!("utilization/{name}.csv"), &out)?;
    }
    Ok(())
}

struct Table {
    file: String,
    headers: Vec<String>,
    rows: Vec<(u64, csv::StringRecord)>,
}

impl Table {
    fn read(root: &Path, rel: &str, expected: &[&str]) -> Result<Table> {
        let text = read_text(root, rel)?;
        let mut reader = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_reader(text.as_bytes());
        let headers: Vec<String> = reader
            .headers()
            .map_err(|e| schema(rel, 1, "-", e.to_string()))?
            .iter()
            .map(str::to_string)
            .collect();
        if headers != expected {
            return Err(schema(
                rel,
                1,
                "-",
                format!(
                    "expected header `{}`, found `{}`",
                    expected.join(","),
                    headers.join(",")
                ),
            ));
        }
        let mut rows = Vec::new();
        for rec in reader.records() {
            let rec = rec.map_err(|e| {
                let line = e.position().map_or(0, |p| p.line());
                schema(rel, line, "-", e.to_string())
            })?;
            let line = rec.position().map_or(0, |p| p.line());
            rows.push((line, rec));
        }
        Ok(Table {
            file: rel.to_string(),
            headers,
            rows,
        })
    }

    fn str<'r>(&self, row: &'r (u64, csv::StringRecord), col: &str) -> Result<&'r str> {
        let idx = self
            .headers
            .iter()
            .position(|h| h == col)
            .expect("known column");
        match row.1.get(idx) {
            Some(v) if !v.is_empty() => Ok(v),
            _ => Err(schema(&self.file, row.0, col, "missing value".into())),
        }
    }

    fn parse<T: std::str::FromStr>(&self, row: &(u64, csv::StringRecord), col: &str) -> Result<T>
    where
        T::Err: std::fmt::Display,
    {
        let raw = self.str(row, col)?;
        raw.parse::<T>()
            .map_err(|e| schema(&self.file, row.0, col, format!("cannot parse `{raw}`: {e}")))
    }

    /// Parses a finite float and checks `ok`.
    fn real(
        &self,
        row: &(u64, csv::StringRecord),
        col: &str,
        ok: impl Fn(f64) -> bool,
        rule: &str,
    ) -> Result<f64> {
        let v: f64 = self.parse(row, col)?;
        if !v.is_finite() || !ok(v) {
            return Err(IngestError::UnitOutOfRange {
                file: self.file.clone(),
                line: row.0,
                column: col.into(),
                value: v,
                message: rule.into(),
            });
        }
        Ok(v)
    }

    fn node<'n>(
        &self,
        row: &(u64, csv::StringRecord),
        nodes: &'n mut BTreeMap<String, TechNode>,
    ) -> Result<&'n mut TechNode> {
        let name = self.str(row, "node")?;
        nodes
            .get_mut(name)
            .ok_or_else(|| schema(&self.file, row.0, "node", format!("unknown node `{name}`")))
    }
}

fn schema(file: &str, line: u64, column: &str, message: String) -> IngestError {
    IngestError::SchemaViolation {
        file: file.into(),
        line,
        column: column.into(),
        message,
    }
}

fn read_text(root: &Path, rel: &str) -> Result<String> {
    fs::read_to_string(root.join(rel)).map_err(|e| IngestError::Io {
        file: rel.into(),
        message: e.to_string(),
    })
}

fn write_text(root: &Path, rel: &str, text: &str) -> Result<()> {
    let path: PathBuf = root.join(rel);
    let io = |e: std::io::Error| IngestError::Io {
        file: rel.into(),
        message: e.to_string(),
    };
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(io)?;
    }
    fs::write(&path, text).map_err(io)
}

fn load_nodes(root: &Path) -> Result<BTreeMap<String, TechNode>> {
    let t = Table::read(
        root,
        "nodes.csv",
        &[
            "name",
            "epa_base_kwh_cm2",
            "epa_anchor_year",
            "mass_production_year",
            "mpa_kgco2_cm2",
        ],
    )?;
    let mut nodes = BTreeMap::new();
    for row in &t.rows {
        let name = t.str(row, "name")?.to_string();
        let node = TechNode {
            name: name.clone(),
            epa_base: t.real(row, "epa_base_kwh_cm2", |v| v > 0.0, "must be > 0")?,
            epa_anchor_year: t.parse(row, "epa_anchor_year")?,
            efficiency_series: Vec::new(),
            defect_series: Vec::new(),
            gas_inventory: Vec::new(),
            capacity_shares: Vec::new(),
            mpa: t.real(row, "mpa_kgco2_cm2", |v| v >= 0.0, "must be >= 0")?,
            mass_production_year: t.parse(row, "mass_production_year")?,
        };
        if nodes.insert(name.clone(), node).is_some() {
            return Err(IngestError::DuplicateNode {
                file: t.file.clone(),
                line: row.0,
                node: name,
            });
        }
    }
    Ok(nodes)
}

fn load_efficiency(root: &Path, nodes: &mut BTreeMap<String, TechNode>) -> Result<()> {
    let t = Table::read(root, "efficiency.csv", &["node", "year", "multiplier"])?;
    for row in &t.rows {
        let year: i32 = t.parse(row, "year")?;
        let m = t.real(row, "multiplier", |v| v >= 1.0, "multiplier must be >= 1")?;
        t.node(row, nodes)?.efficiency_series.push((year, m));
    }
    for node in nodes.values_mut() {
        node.efficiency_series.sort_by_key(|(y, _)| *y);
        for w in node.efficiency_series.windows(2) {
            if w[0].0 == w[1].0 {
                return Err(series_err(
                    "efficiency.csv",
                    node,
                    format!("year {} repeated", w[0].0),
                ));
            }
            if w[1].1 < w[0].1 {
                return Err(series_err(
                    "efficiency.csv",
                    node,
                    format!(
                        "multiplier decreases from {} to {} in {}",
                        w[0].1, w[1].1, w[1].0
                    ),
                ));
            }
        }
    }
    Ok(())
}

fn load_defects(root: &Path, nodes: &mut BTreeMap<String, TechNode>) -> Result<()> {
    let t = Table::read(root, "defects.csv", &["node", "date", "d0_per_cm2"])?;
    for row in &t.rows {
        let date: NaiveDate = t.parse(row, "date")?;
        let d0 = t.real(row, "d0_per_cm2", |v| v > 0.0, "defect density must be > 0")?;
        t.node(row, nodes)?.defect_series.push((date, d0));
    }
    for node in nodes.values_mut() {
        node.defect_series.sort_by_key(|(d, _)| *d);
    }
    Ok(())
}

fn load_gases(root: &Path, nodes: &mut BTreeMap<String, TechNode>) -> Result<()> {
    let t = Table::read(
        root,
        "gases.csv",
        &[
            "node",
            "gas",
            "gwp",
            "kg_per_cm2",
            "rel_error_95",
            "abatement",
        ],
    )?;
    for row in &t.rows {
        let gas = GasEmission {
            gas: t.str(row, "gas")?.to_string(),
            gwp: t.real(row, "gwp", |v| v > 0.0, "must be > 0")?,
            emission_per_area: t.real(row, "kg_per_cm2", |v| v >= 0.0, "must be >= 0")?,
            rel_error_95: t.real(row, "rel_error_95", |v| v >= 0.0, "must be >= 0")?,
            abatement: t.real(
                row,
                "abatement",
                |v| (0.0..=1.0).contains(&v),
                "must be in [0, 1]",
            )?,
        };
        t.node(row, nodes)?.gas_inventory.push(gas);
    }
    Ok(())
}

fn load_capacity(
    root: &Path,
    nodes: &mut BTreeMap<String, TechNode>,
    ci: &BTreeMap<String, RegionCIHistory>,
) -> Result<()> {
    let t = Table::read(root, "capacity.csv", &["node", "region", "share"])?;
    for row in &t.rows {
        let region = t.str(row, "region")?.to_string();
        if !ci.contains_key(&region) {
            return Err(schema(
                &t.file,
                row.0,
                "region",
                format!("no ci/{region}.csv history for region `{region}`"),
            ));
        }
        let share = t.real(
            row,
            "share",
            |v| (0.0..=1.0).contains(&v),
            "must be in [0, 1]",
        )?;
        t.node(row, nodes)?.capacity_shares.push((region, share));
    }
    for node in nodes.values() {
        if node.capacity_shares.is_empty() {
            continue;
        }
        let sum: f64 = node.capacity_shares.iter().map(|(_, s)| s).sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(IngestError::SharesDontSumToOne {
                node: node.name.clone(),
                sum,
            });
        }
    }
    Ok(())
}

fn series_err(file: &str, node: &TechNode, message: String) -> IngestError {
    IngestError::InvalidSeries {
        file: file.into(),
        node: node.name.clone(),
        message,
    }
}

fn load_dir<T>(
    root: &Path,
    dir: &str,
    load: impl Fn(&Path, &str, &str) -> Result<T>,
) -> Result<BTreeMap<String, T>> {
    let mut out = BTreeMap::new();
    let path = root.join(dir);
    if !path.is_dir() {
        return Ok(out);
    }
    let entries = fs::read_dir(&path).map_err(|e| IngestError::Io {
        file: dir.into(),
        message: e.to_string(),
    })?;
    let mut stems: Vec<String> = entries
        .filter_map(|e| e.ok())
        .map(|e| e.path())
        .filter(|p| p.extension().is_some_and(|x| x == "csv"))
        .filter_map(|p| p.file_stem().map(|s| s.to_string_lossy().into_owned()))
        .collect();
    stems.sort();
    for stem in stems {
        let rel = format!("{dir}/{stem}.csv");
        out.insert(stem.clone(), load(root, &rel, &stem)?);
    }
    Ok(out)
}

fn parse_timestamp(raw: &str) -> Option<NaiveDateTime> {
    NaiveDateTime::parse_from_str(raw, TIMESTAMP_FORMAT)
        .or_else(|_| NaiveDateTime::parse_from_str(raw, "%Y-%m-%d %H:%M:%S"))
        .or_else(|_| NaiveDateTime::parse_from_str(raw.trim_end_matches('Z'), TIMESTAMP_FORMAT))
        .ok()
        .or_else(|| {
            NaiveDate::parse_from_str(raw, "%Y-%m-%d")
                .ok()
                .and_then(|d| d.and_hms_opt(0, 0, 0))
        })
}

fn load_ci(root: &Path, rel: &str, region: &str) -> Result<RegionCIHistory> {
    let t = Table::read(root, rel, &["timestamp", "g_per_kwh"])?;
    let mut records: Vec<(NaiveDateTime, f64)> = Vec::with_capacity(t.rows.len());
    for row in &t.rows {
        let raw = t.str(row, "timestamp")?;
        let ts = parse_timestamp(raw)
            .ok_or_else(|| schema(rel, row.0, "timestamp", format!("cannot parse `{raw}`")))?;
        if let Some((prev, _)) = records.last() {
            if ts <= *prev {
                return Err(schema(
                    rel,
                    row.0,
                    "timestamp",
                    "timestamps must strictly increase".into(),
                ));
            }
        }
        let v = t.real(
            row,
            "g_per_kwh",
            |v| v >= 0.0,
            "carbon intensity must be >= 0",
        )?;
        records.push((ts, v));
    }
    if records.is_empty() {
        return Err(schema(rel, 2, "timestamp", "history has no records".into()));
    }
    Ok(RegionCIHistory {
        region: region.into(),
        records,
    })
}

fn load_utilization(root: &Path, rel: &str, _name: &str) -> Result<Vec<f64>> {
    let t = Table::read(root, rel, &["value"])?;
    let values = t
        .rows
        .iter()
        .map(|row| {
            t.real(
                row,
                "value",
                |v| (0.0..=1.0).contains(&v),
                "utilization must be in [0, 1]",
            )
        })
        .collect::<Result<Vec<_>>>()?;
    if values.is_empty() {
        return Err(schema(
            rel,
            2,
            "value",
            "utilization set has no samples".into(),
        ));
    }
    Ok(values)
}
