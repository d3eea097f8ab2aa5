//! Validation outputs: OD matrices, deltas, per-cell counts and field totals.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;

use serde_json::json;

use crate::error::{Error, Result};
use crate::ingest::{OdRecord, RegisterTotals};
use crate::model::{CellId, DistrictId, Grid, Person, WeightConfig, OTHER_FIELD};
use crate::nace::ConsistencyReport;
use crate::num::Real;

/// Residence-district by work-district shares, row-normalized.
#[derive(Clone, Debug, PartialEq)]
pub struct OdMatrix<T> {
    pub districts: Vec<DistrictId>,
    pub shares: Vec<Vec<T>>,
    /// Rows without any worker (all-zero rows).
    pub empty_rows: Vec<bool>,
}

impl<T: Real> OdMatrix<T> {
    pub fn new(districts: Vec<DistrictId>, shares: Vec<Vec<T>>) -> Self {
        let empty_rows = shares
            .iter()
            .map(|r| r.iter().all(|v| *v == T::zero()))
            .collect();
        OdMatrix {
            districts,
            shares,
            empty_rows,
        }
    }

    /// Row-normalizes a count matrix; empty rows stay zero and are flagged.
    pub fn from_counts(districts: Vec<DistrictId>, counts: &[Vec<u64>]) -> Self {
        let shares = counts
            .iter()
            .map(|row| {
                let total: u64 = row.iter().sum();
                row.iter()
                    .map(|c| {
                        if total == 0 {
                            T::zero()
                        } else {
                            T::of_u64(*c) / T::of_u64(total)
                        }
                    })
                    .collect()
            })
            .collect();
        OdMatrix::new(districts, shares)
    }

    pub fn index(&self, d: &DistrictId) -> Option<usize> {
        self.districts.iter().position(|x| x == d)
    }

    pub fn get(&self, origin: &DistrictId, dest: &DistrictId) -> Option<T> {
        Some(self.shares[self.index(origin)?][self.index(dest)?])
    }
}

/// Matrix from long-format `(origin, destination, share)` records; absent pairs are 0.
pub fn od_matrix_from_records(
    districts: Vec<DistrictId>,
    records: &[(u64, OdRecord)],
    file: &str,
) -> Result<OdMatrix<f64>> {
    let mut shares = vec![vec![0.0; districts.len()]; districts.len()];
    for (line, r) in records {
        let find = |d: &str| {
            districts
                .iter()
                .position(|x| x.as_str() == d)
                .ok_or_else(|| Error::Referential {
                    file: file.to_string(),
                    line: *line,
                    message: format!("unknown district {d:?}"),
                })
        };
        shares[find(&r.origin_district)?][find(&r.dest_district)?] = r.share;
    }
    Ok(OdMatrix::new(districts, shares))
}

/// Counts employed persons by (residence district, work district).
pub fn od_counts(persons: &[Person], districts: &[DistrictId]) -> Vec<Vec<u64>> {
    let index: BTreeMap<&DistrictId, usize> =
        districts.iter().enumerate().map(|(i, d)| (d, i)).collect();
    let mut counts = vec![vec![0u64; districts.len()]; districts.len()];
    for p in persons {
        if let Some(w) = &p.work_district {
            if let (Some(o), Some(d)) = (index.get(&p.residence_district), index.get(w)) {
                counts[*o][*d] += 1;
            }
        }
    }
    counts
}

pub fn build_od_matrix<T: Real>(persons: &[Person], districts: &[DistrictId]) -> OdMatrix<T> {
    OdMatrix::from_counts(districts.to_vec(), &od_counts(persons, districts))
}

/// Elementwise `a - b` over identical district lists.
pub fn delta_matrix<T: Real>(a: &OdMatrix<T>, b: &OdMatrix<T>) -> Result<Vec<Vec<T>>> {
    if a.districts != b.districts {
        return Err(Error::MismatchedDistricts(format!(
            "{:?} vs {:?}",
            a.districts, b.districts
        )));
    }
    Ok(a.shares
        .iter()
        .zip(&b.shares)
        .map(|(ra, rb)| ra.iter().zip(rb).map(|(x, y)| *x - *y).collect())
        .collect())
}

pub fn write_matrix<T: Real, W: Write>(
    districts: &[DistrictId],
    rows: &[Vec<T>],
    corner: &str,
    out: W,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let err = |e| Error::csv("matrix", e);
    let mut header = vec![corner.to_string()];
    header.extend(districts.iter().map(|d| d.0.clone()));
    w.write_record(&header).map_err(err)?;
    for (d, row) in districts.iter().zip(rows) {
        let mut rec = vec![d.0.clone()];
        rec.extend(row.iter().map(|v| format!("{:.6}", v.as_f64())));
        w.write_record(&rec).map_err(err)?;
    }
    w.flush().map_err(|e| Error::io("matrix", e))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CountKind {
    Residents,
    Workers,
}

/// Persons per cell, optionally restricted to one (residence, work) district pair.
pub fn per_cell_counts(
    persons: &[Person],
    kind: CountKind,
    filter: Option<(&DistrictId, &DistrictId)>,
) -> Result<BTreeMap<CellId, u64>> {
    let mut counts = BTreeMap::new();
    for p in persons {
        if let Some((home, work)) = filter {
            if &p.residence_district != home || p.work_district.as_ref() != Some(work) {
                continue;
            }
        }
        let cell = match kind {
            CountKind::Residents => Some(p.residence_cell.as_ref().ok_or_else(|| {
                Error::StageIncomplete(format!("person {} has no residence cell", p.id))
            })?),
            CountKind::Workers => {
                if p.is_employed() && p.work_cell.is_none() {
                    return Err(Error::StageIncomplete(format!(
                        "employed person {} has no work cell",
                        p.id
                    )));
                }
                p.work_cell.as_ref()
            }
        };
        if let Some(c) = cell {
            *counts.entry(c.clone()).or_default() += 1;
        }
    }
    Ok(counts)
}

/// `cell_id,row,col,district_id,count[,expected]` for every grid cell.
pub fn write_cell_counts<W: Write>(
    grid: &Grid<f64>,
    counts: &BTreeMap<CellId, u64>,
    expected: Option<&BTreeMap<CellId, f64>>,
    out: W,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let err = |e| Error::csv("cell_counts", e);
    let mut header = vec!["cell_id", "row", "col", "district_id", "count"];
    if expected.is_some() {
        header.push("expected");
    }
    w.write_record(&header).map_err(err)?;
    for c in grid.cells() {
        let mut rec = vec![
            c.id.0.clone(),
            c.row.to_string(),
            c.col.to_string(),
            c.district_id.0.clone(),
            counts.get(&c.id).copied().unwrap_or(0).to_string(),
        ];
        if let Some(e) = expected {
            rec.push(format!("{:.6}", e.get(&c.id).copied().unwrap_or(0.0)));
        }
        w.write_record(&rec).map_err(err)?;
    }
    w.flush().map_err(|e| Error::io("cell_counts", e))
}

/// Expected workplaces per cell over all districts (zero-weight districts skipped).
pub fn expected_workplaces_all(
    grid: &Grid<f64>,
    weights: &WeightConfig<f64>,
) -> BTreeMap<CellId, f64> {
    let mut out = BTreeMap::new();
    for d in grid.districts() {
        match grid.expected_workplaces(&d.id, weights) {
            Ok(m) => out.extend(m),
            Err(e) => log::warn!("no expected workplaces for {}: {e}", d.id),
        }
    }
    out
}

/// Cell squares with resident and worker counts, as a GeoJSON FeatureCollection.
pub fn cells_geojson(
    grid: &Grid<f64>,
    residents: &BTreeMap<CellId, u64>,
    workers: &BTreeMap<CellId, u64>,
) -> serde_json::Value {
    let size = grid.cell_size();
    let features: Vec<serde_json::Value> = grid
        .cells()
        .iter()
        .map(|c| {
            let x0 = c.col as f64 * size;
            let y0 = c.row as f64 * size;
            json!({
                "type": "Feature",
                "geometry": {
                    "type": "Polygon",
                    "coordinates": [[
                        [x0, y0], [x0 + size, y0], [x0 + size, y0 + size], [x0, y0 + size], [x0, y0]
                    ]]
                },
                "properties": {
                    "cell_id": c.id.0,
                    "district_id": c.district_id.0,
                    "class": c.class.code(),
                    "residents": residents.get(&c.id).copied().unwrap_or(0),
                    "workers": workers.get(&c.id).copied().unwrap_or(0),
                }
            })
        })
        .collect();
    json!({ "type": "FeatureCollection", "features": features })
}

#[derive(Clone, Debug, PartialEq)]
pub struct NaceTotalsRow {
    pub nace_code: String,
    /// Workers carrying the field after pooling.
    pub synthetic_total: u64,
    pub register_total: u64,
    /// Workers drawn into the field from the census tables.
    pub census_total: u64,
    pub verdict: String,
}

/// Per-field synthetic, register and census totals with the gate's verdict.
///
/// Census totals come from the consistency report; for the pooled field it
/// is the number of workers drawn into it directly from the tables.
pub fn nace_totals_report(
    persons: &[Person],
    register: &RegisterTotals,
    consistency: &ConsistencyReport,
) -> Vec<NaceTotalsRow> {
    let mut synthetic: BTreeMap<String, u64> = BTreeMap::new();
    for p in persons {
        if let Some(f) = &p.nace {
            *synthetic.entry(f.clone()).or_default() += 1;
        }
    }
    let coherent = consistency.coherent_fields();
    let mut fields: BTreeSet<String> = synthetic.keys().cloned().collect();
    fields.extend(register.fields());
    fields.extend(consistency.rows.iter().map(|r| r.nace_code.clone()));
    fields
        .into_iter()
        .map(|code| {
            let synthetic_total = synthetic.get(&code).copied().unwrap_or(0);
            let row = consistency.row(&code);
            let (register_total, census_total, verdict) = if code == OTHER_FIELD {
                let pooled_register: u64 = register
                    .fields()
                    .iter()
                    .filter(|f| !coherent.contains(*f))
                    .map(|f| register.field_total(f))
                    .sum();
                let reassigned: u64 = consistency
                    .rows
                    .iter()
                    .filter(|r| !coherent.contains(&r.nace_code))
                    .map(|r| r.census_total)
                    .sum();
                (
                    pooled_register,
                    synthetic_total.saturating_sub(reassigned),
                    "sink".to_string(),
                )
            } else {
                (
                    register.field_total(&code),
                    row.map(|r| r.census_total).unwrap_or(synthetic_total),
                    row.map(|r| r.verdict.as_str().to_string())
                        .unwrap_or_default(),
                )
            };
            NaceTotalsRow {
                nace_code: code,
                synthetic_total,
                register_total,
                census_total,
                verdict,
            }
        })
        .collect()
}

pub fn write_nace_report<W: Write>(rows: &[NaceTotalsRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let err = |e| Error::csv("nace_report.csv", e);
    w.write_record([
        "nace_code",
        "synthetic_total",
        "register_total",
        "census_total",
        "verdict",
    ])
    .map_err(err)?;
    for r in rows {
        w.write_record([
            r.nace_code.clone(),
            r.synthetic_total.to_string(),
            r.register_total.to_string(),
            r.census_total.to_string(),
            r.verdict.clone(),
        ])
        .map_err(err)?;
    }
    w.flush().map_err(|e| Error::io("nace_report.csv", e))
}
