//! Stage orchestration, checkpoints and output files.

use std::collections::BTreeMap;
use std::fmt;
use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::{Scenario, NACE_TABLE, OCCUPATION_TABLE, WORK_DISTRICT_TABLE};
use crate::lastmile::assign_work_cells;
use crate::model::{CellClass, DistrictId, Gender, Person, OTHER_FIELD};
use crate::nace::{
    assign_nace, assign_occupation, consistency_gate, repair_unfeasible, ConsistencyReport,
    KeyOptions,
};
use crate::report::{
    build_od_matrix, cells_geojson, delta_matrix, expected_workplaces_all, nace_totals_report,
    per_cell_counts, write_cell_counts, write_matrix, write_nace_report, CountKind, OdMatrix,
};
use crate::residence::{assign_residence_cells, ResidenceWeights};
use crate::subzone::{
    assign_work_districts, read_escalations, write_escalations, Escalation, SubzoneOptions,
};

pub const POPULATION_FILE: &str = "population_out.csv";
pub const SUMMARY_FILE: &str = "run_summary.json";
pub const CONSISTENCY_FILE: &str = "consistency_report.csv";
pub const ESCALATION_FILE: &str = "escalations.csv";

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Ingest,
    Residence,
    Nace,
    Subzone,
    Lastmile,
    Report,
}

impl Stage {
    pub const ALL: [Stage; 6] = [
        Stage::Ingest,
        Stage::Residence,
        Stage::Nace,
        Stage::Subzone,
        Stage::Lastmile,
        Stage::Report,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Stage::Ingest => "ingest",
            Stage::Residence => "residence",
            Stage::Nace => "nace",
            Stage::Subzone => "subzone",
            Stage::Lastmile => "lastmile",
            Stage::Report => "report",
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Stage {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Stage::ALL
            .into_iter()
            .find(|st| st.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown stage {s:?}")))
    }
}

/// Mutable state carried between stages.
#[derive(Clone, Debug)]
pub struct RunState {
    pub persons: Vec<Person>,
    pub completed: Stage,
    pub consistency: Option<ConsistencyReport>,
    pub repaired: usize,
    pub escalations: Vec<Escalation>,
    pub timings: Vec<(Stage, f64)>,
}

impl RunState {
    pub fn fresh(scenario: &Scenario) -> Self {
        RunState {
            persons: scenario.persons.clone(),
            completed: Stage::Ingest,
            consistency: None,
            repaired: 0,
            escalations: Vec::new(),
            timings: vec![(Stage::Ingest, 0.0)],
        }
    }

    pub fn escalation_count(&self) -> usize {
        self.escalations.len()
    }
}

/// Runs the stages after `state.completed` up to and including `stop`.
pub fn advance(scenario: &Scenario, state: &mut RunState, stop: Stage) -> Result<()> {
    let cfg = &scenario.config;
    let seed = cfg.seed;
    let keys = KeyOptions {
        age_band_width: cfg.age_band_width,
        backoff: cfg.stages.table_backoff,
    };
    for stage in Stage::ALL {
        if stage <= state.completed || stage > stop {
            continue;
        }
        let started = Instant::now();
        log::info!("stage {stage}");
        match stage {
            Stage::Ingest => {}
            Stage::Residence => {
                let weights = match cfg.residence_weighting {
                    crate::ingest::ResidenceWeighting::FloorArea => ResidenceWeights::FloorArea,
                    crate::ingest::ResidenceWeighting::Class => {
                        ResidenceWeights::Class(cfg.residence_weights()?)
                    }
                };
                assign_residence_cells(&mut state.persons, &scenario.grid, &weights, seed)?;
            }
            Stage::Nace => {
                let occupation = scenario.table(OCCUPATION_TABLE)?;
                assign_occupation(
                    &mut state.persons,
                    occupation,
                    &cfg.eligible_age,
                    keys,
                    seed,
                )?;
                if cfg.stages.repair_unfeasible && !cfg.feasibility_rules.is_empty() {
                    state.repaired = repair_unfeasible(
                        &mut state.persons,
                        &cfg.feasibility_rules,
                        occupation,
                        keys,
                        seed,
                    )?
                    .len();
                }
                assign_nace(&mut state.persons, scenario.table(NACE_TABLE)?, keys, seed)?;
                state.consistency = Some(consistency_gate(
                    &mut state.persons,
                    &scenario.register,
                    cfg.coherence_threshold,
                ));
            }
            Stage::Subzone => {
                let outcome = assign_work_districts(
                    &mut state.persons,
                    &scenario.grid,
                    &scenario.register,
                    scenario.tables.get(WORK_DISTRICT_TABLE),
                    &SubzoneOptions {
                        gravity_mask: cfg.stages.gravity_mask,
                        seed,
                    },
                )?;
                state.escalations = outcome.escalations;
            }
            Stage::Lastmile => {
                assign_work_cells(
                    &mut state.persons,
                    &scenario.grid,
                    &cfg.work_weights()?,
                    cfg.distance_exponent,
                    seed,
                )?;
            }
            Stage::Report => {}
        }
        state.completed = stage;
        state.timings.push((stage, started.elapsed().as_secs_f64()));
    }
    Ok(())
}

const POPULATION_HEADER: [&str; 11] = [
    "person_id",
    "household_id",
    "age",
    "gender",
    "residence_district",
    "residence_cell",
    "occupation",
    "nace",
    "work_district",
    "work_cell_class",
    "work_cell",
];

fn opt<T: ToString>(v: &Option<T>) -> String {
    v.as_ref().map(T::to_string).unwrap_or_default()
}

pub fn write_population<W: std::io::Write>(persons: &[Person], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let err = |e| Error::csv(POPULATION_FILE, e);
    w.write_record(POPULATION_HEADER).map_err(err)?;
    for p in persons {
        w.write_record([
            p.id.0.clone(),
            p.household_id.0.clone(),
            p.age.to_string(),
            p.gender.code().to_string(),
            p.residence_district.0.clone(),
            opt(&p.residence_cell),
            opt(&p.occupation),
            opt(&p.nace),
            opt(&p.work_district),
            opt(&p.work_cell_class),
            opt(&p.work_cell),
        ])
        .map_err(err)?;
    }
    w.flush().map_err(|e| Error::io(POPULATION_FILE, e))
}

pub fn read_population<R: std::io::Read>(input: R) -> Result<Vec<Person>> {
    let mut reader = csv::Reader::from_reader(input);
    let headers = reader
        .headers()
        .map_err(|e| Error::csv(POPULATION_FILE, e))?
        .clone();
    if headers.iter().ne(POPULATION_HEADER) {
        return Err(Error::Schema {
            file: POPULATION_FILE.into(),
            line: 1,
            column: String::new(),
            message: format!("unexpected header {:?}", headers),
        });
    }
    let mut persons = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| Error::csv(POPULATION_FILE, e))?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        let bad = |column: &str, message: String| Error::Schema {
            file: POPULATION_FILE.into(),
            line,
            column: column.into(),
            message,
        };
        let field = |i: usize| -> Option<String> {
            let v = &rec[i];
            (!v.is_empty()).then(|| v.to_string())
        };
        let age: u32 = rec[2].parse().map_err(|_| bad("age", rec[2].to_string()))?;
        let gender: Gender = rec[3]
            .parse()
            .map_err(|_| bad("gender", rec[3].to_string()))?;
        let mut p = Person::new(
            rec[0].to_string(),
            age,
            gender,
            rec[1].to_string(),
            rec[4].to_string(),
        );
        p.residence_cell = field(5).map(Into::into);
        p.occupation = field(6);
        p.nace = field(7);
        p.census_nace = p.nace.clone().filter(|f| f != OTHER_FIELD);
        p.work_district = field(8).map(Into::into);
        p.work_cell_class = field(9)
            .map(|c| c.parse::<CellClass>())
            .transpose()
            .map_err(|e| bad("work_cell_class", e.to_string()))?;
        p.work_cell = field(10).map(Into::into);
        persons.push(p);
    }
    Ok(persons)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StageTiming {
    pub stage: Stage,
    pub seconds: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub status: String,
    pub seed: u64,
    pub config_hash: String,
    pub completed_stage: Stage,
    pub persons: usize,
    pub employed: usize,
    pub repaired_occupations: usize,
    pub escalations: usize,
    pub threads: usize,
    pub stage_timings: Vec<StageTiming>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl RunSummary {
    pub fn new(scenario: &Scenario, state: &RunState, threads: usize) -> Self {
        RunSummary {
            status: if state.completed == Stage::Report {
                "complete".into()
            } else {
                "partial".into()
            },
            seed: scenario.config.seed,
            config_hash: scenario.config_hash.clone(),
            completed_stage: state.completed,
            persons: state.persons.len(),
            employed: state.persons.iter().filter(|p| p.is_employed()).count(),
            repaired_occupations: state.repaired,
            escalations: state.escalation_count(),
            threads,
            stage_timings: state
                .timings
                .iter()
                .map(|(stage, seconds)| StageTiming {
                    stage: *stage,
                    seconds: *seconds,
                })
                .collect(),
            error: None,
        }
    }
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>> {
    let path = dir.join(name);
    File::create(&path)
        .map(BufWriter::new)
        .map_err(|e| Error::io(path, e))
}

/// Writes the population checkpoint, stage artifacts and the run summary.
pub fn write_outputs(
    scenario: &Scenario,
    state: &RunState,
    dir: &Path,
    threads: usize,
) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write_population(&state.persons, create(dir, POPULATION_FILE)?)?;
    if state.completed >= Stage::Nace {
        if let Some(c) = &state.consistency {
            c.write_csv(create(dir, CONSISTENCY_FILE)?)?;
        }
    }
    if state.completed >= Stage::Subzone {
        write_escalations(&state.escalations, create(dir, ESCALATION_FILE)?)?;
    }
    if state.completed >= Stage::Report {
        write_reports(scenario, state, dir)?;
    }
    write_summary(&RunSummary::new(scenario, state, threads), dir)
}

pub fn write_summary(summary: &RunSummary, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let f = create(dir, SUMMARY_FILE)?;
    serde_json::to_writer_pretty(f, summary)
        .map_err(|e| Error::Internal(format!("cannot write summary: {e}")))
}

fn write_reports(scenario: &Scenario, state: &RunState, dir: &Path) -> Result<()> {
    let grid = &scenario.grid;
    let districts: Vec<DistrictId> = grid.districts().iter().map(|d| d.id.clone()).collect();
    let od: OdMatrix<f64> = build_od_matrix(&state.persons, &districts);
    write_matrix(
        &districts,
        &od.shares,
        "origin",
        create(dir, "od_matrix.csv")?,
    )?;
    if let Some(reference) = &scenario.od_reference {
        let delta = delta_matrix(&od, reference)?;
        write_matrix(
            &districts,
            &delta,
            "origin",
            create(dir, "delta_matrix.csv")?,
        )?;
    }
    let residents = per_cell_counts(&state.persons, CountKind::Residents, None)?;
    let workers = per_cell_counts(&state.persons, CountKind::Workers, None)?;
    let expected = expected_workplaces_all(grid, &scenario.config.work_weights()?);
    write_cell_counts(
        grid,
        &residents,
        None,
        create(dir, "cell_counts_residents.csv")?,
    )?;
    write_cell_counts(
        grid,
        &workers,
        Some(&expected),
        create(dir, "cell_counts_workers.csv")?,
    )?;
    let geo = cells_geojson(grid, &residents, &workers);
    serde_json::to_writer(create(dir, "cell_counts.geojson")?, &geo)
        .map_err(|e| Error::Internal(format!("cannot write geojson: {e}")))?;
    let consistency = state.consistency.clone().unwrap_or_default();
    let rows = nace_totals_report(&state.persons, &scenario.register, &consistency);
    write_nace_report(&rows, create(dir, "nace_report.csv")?)
}

/// Loads a checkpoint written by [`write_outputs`]. `path` is the output
/// directory or its `run_summary.json`.
pub fn load_checkpoint(scenario: &Scenario, path: &Path) -> Result<RunState> {
    let dir: PathBuf = if path.is_dir() {
        path.to_path_buf()
    } else {
        path.parent().unwrap_or(Path::new(".")).to_path_buf()
    };
    let summary_path = dir.join(SUMMARY_FILE);
    let summary: RunSummary =
        serde_json::from_slice(&fs::read(&summary_path).map_err(|e| Error::io(&summary_path, e))?)
            .map_err(|e| Error::Schema {
                file: SUMMARY_FILE.into(),
                line: e.line() as u64,
                column: e.column().to_string(),
                message: e.to_string(),
            })?;
    if summary.status == "failed" {
        return Err(Error::Config(format!(
            "checkpoint {} is from a failed run",
            dir.display()
        )));
    }
    if summary.config_hash != scenario.config_hash {
        log::warn!("checkpoint was produced with a different configuration");
    }
    let pop_path = dir.join(POPULATION_FILE);
    let persons = read_population(File::open(&pop_path).map_err(|e| Error::io(&pop_path, e))?)?;
    if persons.len() != scenario.persons.len()
        || persons
            .iter()
            .zip(&scenario.persons)
            .any(|(a, b)| a.id != b.id)
    {
        return Err(Error::Contradiction(
            "checkpoint population does not match the scenario".into(),
        ));
    }
    let consistency = if summary.completed_stage >= Stage::Nace {
        let p = dir.join(CONSISTENCY_FILE);
        Some(ConsistencyReport::read_csv(
            File::open(&p).map_err(|e| Error::io(&p, e))?,
        )?)
    } else {
        None
    };
    let escalations = if summary.completed_stage >= Stage::Subzone {
        let p = dir.join(ESCALATION_FILE);
        read_escalations(File::open(&p).map_err(|e| Error::io(&p, e))?)?
    } else {
        Vec::new()
    };
    let timings: BTreeMap<Stage, f64> = summary
        .stage_timings
        .iter()
        .map(|t| (t.stage, t.seconds))
        .collect();
    Ok(RunState {
        persons,
        completed: summary.completed_stage,
        consistency,
        repaired: summary.repaired_occupations,
        escalations,
        timings: timings.into_iter().collect(),
    })
}

/// Runs a fresh scenario up to `stop`, in memory.
pub fn run(scenario: &Scenario, stop: Stage) -> Result<RunState> {
    let mut state = RunState::fresh(scenario);
    advance(scenario, &mut state, stop)?;
    Ok(state)
}
