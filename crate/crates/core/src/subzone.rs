//! Work-district assignment.
//!
//! Workers of coherent industry fields draw their district from
//! `P(district | field)` under per-district capacities scaled from the
//! business register, so field totals per district are met exactly. Workers
//! pooled into `Other` (and coherent workers that could not be placed) use a
//! gravity model: district mass is its remaining `Other` capacity, divided by
//! the mean distance from the residence cell to the district's cells.
//!
//! This stage is the pipeline's one sequential section: persons are visited
//! in person-id order because every draw consumes shared capacity.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;

use crate::apportion::largest_remainder;
use crate::distributions::{
    inverse_cdf, sample_capacity_constrained, ConditionalTable, Draws, RandomStream,
};
use crate::error::{Error, Result};
use crate::ingest::RegisterTotals;
use crate::model::{normalize, DistrictId, Grid, Person, OTHER_FIELD};
use crate::num::Real;

pub const SUBZONE_STREAM: &str = "subzone";

/// Remaining and initial worker capacity per district, for one field.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FieldCapacity {
    pub initial: Vec<u64>,
    pub remaining: Vec<u64>,
}

impl FieldCapacity {
    pub fn new(initial: Vec<u64>) -> Self {
        FieldCapacity {
            remaining: initial.clone(),
            initial,
        }
    }

    pub fn assigned(&self) -> u64 {
        self.initial.iter().sum::<u64>() - self.remaining.iter().sum::<u64>()
    }

    pub fn is_exhausted(&self) -> bool {
        self.remaining.iter().all(|r| *r == 0)
    }
}

/// Capacities indexed by field, each a vector over districts in grid order.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct CapacityLedger {
    pub districts: Vec<DistrictId>,
    pub fields: BTreeMap<String, FieldCapacity>,
}

impl CapacityLedger {
    pub fn remaining(&self, district: &DistrictId, field: &str) -> Option<u64> {
        let d = self.districts.iter().position(|x| x == district)?;
        self.fields.get(field).map(|f| f.remaining[d])
    }

    pub fn initial(&self, district: &DistrictId, field: &str) -> Option<u64> {
        let d = self.districts.iter().position(|x| x == district)?;
        self.fields.get(field).map(|f| f.initial[d])
    }

    pub fn assigned(&self) -> u64 {
        self.fields.values().map(FieldCapacity::assigned).sum()
    }
}

fn register_vector(register: &RegisterTotals, districts: &[DistrictId], field: &str) -> Vec<u64> {
    districts.iter().map(|d| register.get(d, field)).collect()
}

/// Scales register employment per coherent field to the synthetic worker
/// count of that field, rounding by largest remainder (ties to the first district).
pub fn scale_capacities(
    register: &RegisterTotals,
    synthetic_counts: &BTreeMap<String, u64>,
    districts: &[DistrictId],
) -> Result<CapacityLedger> {
    let mut fields = BTreeMap::new();
    for (field, count) in synthetic_counts {
        let weights: Vec<f64> = register_vector(register, districts, field)
            .into_iter()
            .map(|v| v as f64)
            .collect();
        let scaled = largest_remainder(&weights, *count).ok_or_else(|| {
            Error::Contradiction(format!(
                "coherent field {field} has {count} workers but no register employees"
            ))
        })?;
        fields.insert(field.clone(), FieldCapacity::new(scaled));
    }
    Ok(CapacityLedger {
        districts: districts.to_vec(),
        fields,
    })
}

/// Register employment not claimed by coherent fields, scaled to `other_count` workers.
///
/// Falls back to total register employment when nothing is left unclaimed.
pub fn scale_other_capacity(
    register: &RegisterTotals,
    coherent: &BTreeSet<String>,
    other_count: u64,
    districts: &[DistrictId],
) -> Result<FieldCapacity> {
    let residual: Vec<f64> = districts
        .iter()
        .map(|d| {
            register
                .by_district
                .get(d)
                .map(|m| {
                    m.iter()
                        .filter(|(f, _)| !coherent.contains(*f))
                        .map(|(_, v)| *v as f64)
                        .sum()
                })
                .unwrap_or(0.0)
        })
        .collect();
    let scaled = largest_remainder(&residual, other_count).or_else(|| {
        log::warn!("no register employment outside coherent fields, using total employment for {OTHER_FIELD}");
        let total: Vec<f64> = districts
            .iter()
            .map(|d| {
                register
                    .by_district
                    .get(d)
                    .map(|m| m.values().map(|v| *v as f64).sum())
                    .unwrap_or(0.0)
            })
            .collect();
        largest_remainder(&total, other_count)
    });
    scaled.map(FieldCapacity::new).ok_or_else(|| {
        Error::Contradiction(format!(
            "{other_count} {OTHER_FIELD} workers but the register is empty"
        ))
    })
}

/// Gravity-model district probabilities: mass over distance, normalized.
pub fn gravity_probabilities<T: Real>(masses: &[T], distances: &[T]) -> Option<Vec<T>> {
    let pull: Vec<T> = masses.iter().zip(distances).map(|(m, d)| *m / *d).collect();
    normalize(&pull)
}

/// Draws a district for a coherent-field worker and takes one unit of capacity.
/// `None` means the field's capacity is used up.
pub fn assign_district_coherent(
    row: &[f64],
    capacity: &mut FieldCapacity,
    draws: &mut Draws,
) -> Option<usize> {
    sample_capacity_constrained(row, &mut capacity.remaining, draws).ok()
}

/// Draws a district by gravity from the residence cell's mean district distances.
///
/// With `masked` the mass is the remaining capacity and the chosen district
/// loses one unit; otherwise the initial capacities act as fixed masses.
pub fn assign_district_gravity(
    distances: &[f64],
    capacity: &mut FieldCapacity,
    masked: bool,
    draws: &mut Draws,
) -> Result<usize> {
    let source = if masked {
        &capacity.remaining
    } else {
        &capacity.initial
    };
    let masses: Vec<f64> = source.iter().map(|c| *c as f64).collect();
    let probs = gravity_probabilities(&masses, distances).ok_or(Error::CapacityExhausted)?;
    let d = inverse_cdf(&probs, draws.next_f64());
    capacity.remaining[d] = capacity.remaining[d].saturating_sub(1);
    Ok(d)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Escalation {
    pub person_id: String,
    pub nace_code: String,
    pub reason: &'static str,
}

pub fn write_escalations<W: Write>(escalations: &[Escalation], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let err = |e| Error::csv("escalations.csv", e);
    w.write_record(["person_id", "nace_code", "reason"])
        .map_err(err)?;
    for e in escalations {
        w.write_record([e.person_id.as_str(), e.nace_code.as_str(), e.reason])
            .map_err(err)?;
    }
    w.flush().map_err(|e| Error::io("escalations.csv", e))
}

pub const ESCALATION_REASONS: [&str; 2] = ["missing_distribution", "ledger_exhausted"];

pub fn read_escalations<R: std::io::Read>(input: R) -> Result<Vec<Escalation>> {
    let mut r = csv::Reader::from_reader(input);
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(|e| Error::csv("escalations.csv", e))?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        let reason = ESCALATION_REASONS
            .into_iter()
            .find(|x| *x == &rec[2])
            .ok_or_else(|| Error::Schema {
                file: "escalations.csv".into(),
                line,
                column: "reason".into(),
                message: format!("unknown reason {:?}", &rec[2]),
            })?;
        out.push(Escalation {
            person_id: rec[0].to_string(),
            nace_code: rec[1].to_string(),
            reason,
        });
    }
    Ok(out)
}

#[derive(Clone, Debug)]
pub struct SubzoneOptions {
    pub gravity_mask: bool,
    pub seed: u64,
}

#[derive(Clone, Debug)]
pub struct SubzoneOutcome {
    pub ledger: CapacityLedger,
    pub other: FieldCapacity,
    pub escalations: Vec<Escalation>,
}

/// `P(district | field)` rows over the grid's districts.
fn district_rows(
    table: Option<&ConditionalTable<f64>>,
    register: &RegisterTotals,
    fields: &BTreeSet<String>,
    districts: &[DistrictId],
) -> Result<BTreeMap<String, Vec<f64>>> {
    let mut rows = BTreeMap::new();
    for field in fields {
        let row = match table {
            Some(t) => match t.lookup(&[field.as_str()]) {
                Ok(r) => {
                    let mut v = vec![0.0; districts.len()];
                    for (p, outcome) in r.iter().zip(&t.outcomes) {
                        let d = districts
                            .iter()
                            .position(|x| x.as_str() == outcome)
                            .ok_or_else(|| {
                                Error::Config(format!(
                                    "table {} names unknown district {outcome}",
                                    t.name
                                ))
                            })?;
                        v[d] = *p;
                    }
                    Some(v)
                }
                Err(Error::MissingDistribution { .. }) => None,
                Err(e) => return Err(e),
            },
            None => {
                let w: Vec<f64> = register_vector(register, districts, field)
                    .into_iter()
                    .map(|v| v as f64)
                    .collect();
                normalize(&w)
            }
        };
        if let Some(r) = row {
            rows.insert(field.clone(), r);
        }
    }
    Ok(rows)
}

/// Assigns `work_district` to every employed person.
pub fn assign_work_districts(
    persons: &mut [Person],
    grid: &Grid<f64>,
    register: &RegisterTotals,
    district_table: Option<&ConditionalTable<f64>>,
    options: &SubzoneOptions,
) -> Result<SubzoneOutcome> {
    let stream = RandomStream::new(options.seed, SUBZONE_STREAM);
    let districts: Vec<DistrictId> = grid.districts().iter().map(|d| d.id.clone()).collect();

    let mut order: Vec<usize> = (0..persons.len())
        .filter(|i| persons[*i].nace.is_some())
        .collect();
    order.sort_by(|a, b| persons[*a].id.cmp(&persons[*b].id));

    let mut coherent_counts: BTreeMap<String, u64> = BTreeMap::new();
    for i in &order {
        let f = persons[*i].nace.as_deref().expect("filtered");
        if f != OTHER_FIELD {
            *coherent_counts.entry(f.to_string()).or_default() += 1;
        }
    }
    let coherent: BTreeSet<String> = coherent_counts.keys().cloned().collect();
    let mut ledger = scale_capacities(register, &coherent_counts, &districts)?;
    let rows = district_rows(district_table, register, &coherent, &districts)?;

    let mut gravity_queue = Vec::new();
    let mut escalations = Vec::new();
    for i in order {
        let p = &mut persons[i];
        let field = p.nace.clone().expect("filtered");
        if field == OTHER_FIELD {
            gravity_queue.push(i);
            continue;
        }
        let capacity = ledger
            .fields
            .get_mut(&field)
            .expect("ledger covers coherent fields");
        let reason = match rows.get(&field) {
            None => Some(ESCALATION_REASONS[0]),
            Some(row) => {
                let mut draws = stream.split(p.id.as_str());
                match assign_district_coherent(row, capacity, &mut draws) {
                    Some(d) => {
                        p.work_district = Some(districts[d].clone());
                        None
                    }
                    None => Some(ESCALATION_REASONS[1]),
                }
            }
        };
        if let Some(reason) = reason {
            escalations.push(Escalation {
                person_id: p.id.0.clone(),
                nace_code: field,
                reason,
            });
            gravity_queue.push(i);
        }
    }
    // escalated workers are placed together with the pooled field, in id order
    gravity_queue.sort_by(|a, b| persons[*a].id.cmp(&persons[*b].id));

    let mut other =
        scale_other_capacity(register, &coherent, gravity_queue.len() as u64, &districts)?;
    let mut distance_cache: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
    for i in gravity_queue {
        let p = &mut persons[i];
        let cell_id = p.residence_cell.as_ref().ok_or_else(|| {
            Error::StageIncomplete(format!("person {} has no residence cell", p.id))
        })?;
        let c = grid
            .cell_index(cell_id)
            .ok_or_else(|| Error::Internal(format!("unknown residence cell {cell_id}")))?;
        let distances = distance_cache.entry(c).or_insert_with(|| {
            (0..districts.len())
                .map(|d| {
                    grid.cell_to_district_distance(c, d)
                        .expect("non-empty district")
                })
                .collect()
        });
        // escalated persons may already have drawn from this stream in the coherent pass
        let mut draws = stream.split(&format!("{}#gravity", p.id));
        let d = assign_district_gravity(distances, &mut other, options.gravity_mask, &mut draws)?;
        p.work_district = Some(districts[d].clone());
    }
    Ok(SubzoneOutcome {
        ledger,
        other,
        escalations,
    })
}
