//! Occupation and industry-field assignment with the census/register consistency gate.

use std::collections::{BTreeMap, BTreeSet};
use std::io::{Read, Write};

use rayon::prelude::*;

use crate::distributions::{sample_categorical, ConditionalTable, RandomStream};
use crate::error::{Error, Result};
use crate::ingest::{age_band, AgeRange, FeasibilityRule, RegisterTotals};
use crate::model::{normalize, Person, PersonId, NOT_EMPLOYED, OTHER_FIELD};

pub const OCCUPATION_STREAM: &str = "occupation";
pub const REPAIR_STREAM: &str = "repair";
pub const NACE_STREAM: &str = "nace";

/// How table key attributes are read off a person.
#[derive(Clone, Copy, Debug)]
pub struct KeyOptions {
    pub age_band_width: u32,
    pub backoff: bool,
}

impl Default for KeyOptions {
    fn default() -> Self {
        KeyOptions {
            age_band_width: 5,
            backoff: true,
        }
    }
}

/// Values of `attributes` for `person`.
pub fn person_key(person: &Person, attributes: &[String], band_width: u32) -> Result<Vec<String>> {
    attributes
        .iter()
        .map(|a| match a.as_str() {
            "age_band" => Ok(age_band(person.age, band_width)),
            "age" => Ok(person.age.to_string()),
            "gender" => Ok(person.gender.code().to_string()),
            "district" | "residence_district" => Ok(person.residence_district.0.clone()),
            "occupation" => person.occupation.clone().ok_or_else(|| {
                Error::StageIncomplete(format!("person {} has no occupation", person.id))
            }),
            "nace" | "nace_code" => person.nace.clone().ok_or_else(|| {
                Error::StageIncomplete(format!("person {} has no field", person.id))
            }),
            other => Err(Error::Config(format!(
                "unsupported key attribute {other:?}"
            ))),
        })
        .collect()
}

/// Runs `f` on every person in parallel and gathers missing-distribution keys.
fn for_each_person<F>(persons: &mut [Person], table: &str, f: F) -> Result<()>
where
    F: Fn(&mut Person) -> Result<()> + Sync + Send,
{
    let results: Vec<Result<()>> = persons.par_iter_mut().map(&f).collect();
    let mut missing: BTreeSet<Vec<String>> = BTreeSet::new();
    for r in results {
        match r {
            Ok(()) => {}
            Err(Error::MissingDistribution { key, .. }) => {
                missing.insert(key);
            }
            Err(e) => return Err(e),
        }
    }
    if missing.is_empty() {
        Ok(())
    } else {
        Err(Error::MissingDistributions {
            table: table.to_string(),
            keys: missing.into_iter().collect(),
        })
    }
}

/// Draws an occupation for every eligible person; everyone else is not employed.
pub fn assign_occupation(
    persons: &mut [Person],
    table: &ConditionalTable<f64>,
    eligible: &AgeRange,
    options: KeyOptions,
    seed: u64,
) -> Result<()> {
    let stream = RandomStream::new(seed, OCCUPATION_STREAM);
    for_each_person(persons, &table.name, |p| {
        if !eligible.contains(p.age) {
            p.occupation = Some(NOT_EMPLOYED.to_string());
            return Ok(());
        }
        let key = person_key(p, &table.key_attributes, options.age_band_width)?;
        let row = table.lookup_with(&key, options.backoff)?;
        let mut draws = stream.split(p.id.as_str());
        let k = sample_categorical(&row, &mut draws)?;
        p.occupation = Some(table.outcomes[k].clone());
        Ok(())
    })
}

fn violates(rules: &[FeasibilityRule], occupation: &str, age: u32) -> bool {
    rules.iter().any(|r| r.violated_by(occupation, age))
}

/// Re-draws occupations that break a feasibility rule from the feasible part of the row.
///
/// Only employed occupations are eligible for the re-draw, so employment
/// counts are unchanged. Returns the ids of the repaired persons.
pub fn repair_unfeasible(
    persons: &mut [Person],
    rules: &[FeasibilityRule],
    table: &ConditionalTable<f64>,
    options: KeyOptions,
    seed: u64,
) -> Result<Vec<PersonId>> {
    let stream = RandomStream::new(seed, REPAIR_STREAM);
    let flags: Vec<bool> = persons
        .iter()
        .map(|p| matches!(&p.occupation, Some(o) if violates(rules, o, p.age)))
        .collect();
    let repaired: Vec<PersonId> = persons
        .iter()
        .zip(&flags)
        .filter(|(_, f)| **f)
        .map(|(p, _)| p.id.clone())
        .collect();
    let mut targets: Vec<&mut Person> = persons
        .iter_mut()
        .zip(&flags)
        .filter(|(_, f)| **f)
        .map(|(p, _)| p)
        .collect();
    let results: Vec<Result<()>> = targets
        .par_iter_mut()
        .map(|p| {
            let key = person_key(p, &table.key_attributes, options.age_band_width)?;
            let row = table.lookup_with(&key, options.backoff)?;
            let feasible: Vec<f64> = row
                .iter()
                .zip(&table.outcomes)
                .map(|(w, o)| {
                    if o == NOT_EMPLOYED || violates(rules, o, p.age) {
                        0.0
                    } else {
                        *w
                    }
                })
                .collect();
            let probs = normalize(&feasible).ok_or_else(|| Error::Infeasible {
                person: p.id.0.clone(),
                age: p.age,
                key: key.clone(),
            })?;
            let mut draws = stream.split(p.id.as_str());
            let k = sample_categorical(&probs, &mut draws)?;
            p.occupation = Some(table.outcomes[k].clone());
            Ok(())
        })
        .collect();
    results.into_iter().collect::<Result<Vec<()>>>()?;
    Ok(repaired)
}

/// Draws an industry field for every employed person.
pub fn assign_nace(
    persons: &mut [Person],
    table: &ConditionalTable<f64>,
    options: KeyOptions,
    seed: u64,
) -> Result<()> {
    let stream = RandomStream::new(seed, NACE_STREAM);
    for_each_person(persons, &table.name, |p| {
        if !p.is_employed() {
            p.nace = None;
            p.census_nace = None;
            return Ok(());
        }
        let key = person_key(p, &table.key_attributes, options.age_band_width)?;
        let row = table.lookup_with(&key, options.backoff)?;
        let mut draws = stream.split(p.id.as_str());
        let k = sample_categorical(&row, &mut draws)?;
        let field = table.outcomes[k].clone();
        p.census_nace = Some(field.clone());
        p.nace = Some(field);
        Ok(())
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Verdict {
    Coherent,
    Incoherent,
}

impl Verdict {
    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::Coherent => "coherent",
            Verdict::Incoherent => "incoherent",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConsistencyRow {
    pub nace_code: String,
    pub census_total: u64,
    pub register_total: u64,
    /// census / register; infinite when the register has no employees in the field.
    pub ratio: f64,
    pub verdict: Verdict,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ConsistencyReport {
    pub rows: Vec<ConsistencyRow>,
    pub reassigned: Vec<PersonId>,
}

impl ConsistencyReport {
    pub fn coherent_fields(&self) -> BTreeSet<String> {
        self.rows
            .iter()
            .filter(|r| r.verdict == Verdict::Coherent)
            .map(|r| r.nace_code.clone())
            .collect()
    }

    pub fn row(&self, code: &str) -> Option<&ConsistencyRow> {
        self.rows.iter().find(|r| r.nace_code == code)
    }

    /// `nace_code,census_total,register_total,ratio,verdict`
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let err = |e| Error::csv("consistency_report.csv", e);
        w.write_record([
            "nace_code",
            "census_total",
            "register_total",
            "ratio",
            "verdict",
        ])
        .map_err(err)?;
        for r in &self.rows {
            w.write_record([
                r.nace_code.clone(),
                r.census_total.to_string(),
                r.register_total.to_string(),
                format_ratio(r.ratio),
                r.verdict.as_str().to_string(),
            ])
            .map_err(err)?;
        }
        w.flush()
            .map_err(|e| Error::io("consistency_report.csv", e))
    }

    /// Reads the rows back; the reassigned-person list is not part of the file.
    pub fn read_csv<R: Read>(input: R) -> Result<Self> {
        let file = "consistency_report.csv";
        let mut reader = csv::Reader::from_reader(input);
        let mut rows = Vec::new();
        for rec in reader.records() {
            let rec = rec.map_err(|e| Error::csv(file, e))?;
            let line = rec.position().map(|p| p.line()).unwrap_or(0);
            let bad = |column: &str| Error::Schema {
                file: file.into(),
                line,
                column: column.into(),
                message: "unparseable value".into(),
            };
            if rec.len() != 5 {
                return Err(bad(""));
            }
            rows.push(ConsistencyRow {
                nace_code: rec[0].to_string(),
                census_total: rec[1].parse().map_err(|_| bad("census_total"))?,
                register_total: rec[2].parse().map_err(|_| bad("register_total"))?,
                ratio: rec[3].parse().map_err(|_| bad("ratio"))?,
                verdict: match &rec[4] {
                    "coherent" => Verdict::Coherent,
                    "incoherent" => Verdict::Incoherent,
                    _ => return Err(bad("verdict")),
                },
            });
        }
        Ok(ConsistencyReport {
            rows,
            reassigned: Vec::new(),
        })
    }
}

fn format_ratio(r: f64) -> String {
    if r.is_infinite() {
        "inf".to_string()
    } else {
        format!("{r:.6}")
    }
}

/// Coherence of a census-vs-register pair at threshold `theta`.
pub fn verdict(census: u64, register: u64, theta: f64) -> (f64, Verdict) {
    let ratio = if register == 0 {
        f64::INFINITY
    } else {
        census as f64 / register as f64
    };
    let spread = if ratio == 0.0 {
        f64::INFINITY
    } else {
        ratio.max(1.0 / ratio)
    };
    let v = if spread <= theta {
        Verdict::Coherent
    } else {
        Verdict::Incoherent
    };
    (ratio, v)
}

/// Compares city-level census and register totals per field and pools the
/// workers of incoherent fields into [`OTHER_FIELD`].
///
/// Totals are taken from `census_nace`, so applying the gate again gives the
/// same report and labels.
pub fn consistency_gate(
    persons: &mut [Person],
    register: &RegisterTotals,
    theta: f64,
) -> ConsistencyReport {
    let mut census: BTreeMap<String, u64> = BTreeMap::new();
    for p in persons.iter() {
        if let Some(f) = &p.census_nace {
            *census.entry(f.clone()).or_default() += 1;
        }
    }
    let fields: BTreeSet<String> = census
        .keys()
        .cloned()
        .chain(register.fields())
        .filter(|f| f != OTHER_FIELD)
        .collect();
    let rows: Vec<ConsistencyRow> = fields
        .into_iter()
        .map(|code| {
            let census_total = census.get(&code).copied().unwrap_or(0);
            let register_total = register.field_total(&code);
            let (ratio, verdict) = verdict(census_total, register_total, theta);
            ConsistencyRow {
                nace_code: code,
                census_total,
                register_total,
                ratio,
                verdict,
            }
        })
        .collect();
    let coherent: BTreeSet<&str> = rows
        .iter()
        .filter(|r| r.verdict == Verdict::Coherent)
        .map(|r| r.nace_code.as_str())
        .collect();
    let mut reassigned = Vec::new();
    for p in persons.iter_mut() {
        if let Some(f) = &p.census_nace {
            if coherent.contains(f.as_str()) {
                p.nace = Some(f.clone());
            } else {
                if f != OTHER_FIELD {
                    reassigned.push(p.id.clone());
                }
                p.nace = Some(OTHER_FIELD.to_string());
            }
        }
    }
    ConsistencyReport { rows, reassigned }
}
