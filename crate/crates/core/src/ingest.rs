//! Scenario configuration, CSV loaders and cell classification.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::distributions::ConditionalTable;
use crate::error::{Error, Result};
use crate::model::{
    centroid, Cell, CellClass, CellId, District, DistrictId, Gender, Grid, LandUse, Person,
    Purpose, WeightConfig,
};
use crate::num::Real;
use crate::report::OdMatrix;

pub const OCCUPATION_TABLE: &str = "occupation";
pub const NACE_TABLE: &str = "nace";
pub const WORK_DISTRICT_TABLE: &str = "district_given_nace";

fn default_cell_size() -> f64 {
    500.0
}
fn default_threshold() -> f64 {
    2.0
}
fn default_exponent() -> f64 {
    1.0
}
fn default_residential_threshold() -> f64 {
    5000.0
}
fn default_band_width() -> u32 {
    5
}
fn yes() -> bool {
    true
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ResidenceWeighting {
    /// Residential floor area of the cell.
    #[default]
    FloorArea,
    /// Class constants from `class_weights_residence`.
    Class,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StageToggles {
    #[serde(default = "yes")]
    pub gravity_mask: bool,
    #[serde(default = "yes")]
    pub table_backoff: bool,
    #[serde(default = "yes")]
    pub repair_unfeasible: bool,
}

impl Default for StageToggles {
    fn default() -> Self {
        StageToggles {
            gravity_mask: true,
            table_backoff: true,
            repair_unfeasible: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AgeRange {
    pub min: u32,
    pub max: u32,
}

impl AgeRange {
    pub fn contains(&self, age: u32) -> bool {
        (self.min..=self.max).contains(&age)
    }
}

impl Default for AgeRange {
    fn default() -> Self {
        AgeRange { min: 15, max: 74 }
    }
}

/// Occupation allowed only for ages in `[min_age, max_age]`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeasibilityRule {
    pub occupation: String,
    #[serde(default)]
    pub min_age: u32,
    #[serde(default = "max_age")]
    pub max_age: u32,
}

fn max_age() -> u32 {
    u32::MAX
}

impl FeasibilityRule {
    pub fn violated_by(&self, occupation: &str, age: u32) -> bool {
        self.occupation == occupation && !(self.min_age..=self.max_age).contains(&age)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InputPaths {
    pub persons: PathBuf,
    pub cells: PathBuf,
    pub landuse: PathBuf,
    pub nace_totals: PathBuf,
    pub tables_dir: PathBuf,
    #[serde(default)]
    pub od_reference: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(default = "default_cell_size")]
    pub cell_size: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_threshold")]
    pub coherence_threshold: f64,
    #[serde(default)]
    pub class_weights_work: Option<BTreeMap<CellClass, f64>>,
    #[serde(default)]
    pub class_weights_residence: Option<BTreeMap<CellClass, f64>>,
    #[serde(default)]
    pub residence_weighting: ResidenceWeighting,
    /// Residential floor area above which a residential cell is highly residential.
    #[serde(default = "default_residential_threshold")]
    pub residential_threshold_m2: f64,
    #[serde(default = "default_exponent")]
    pub distance_exponent: f64,
    #[serde(default)]
    pub eligible_age: AgeRange,
    #[serde(default = "default_band_width")]
    pub age_band_width: u32,
    #[serde(default)]
    pub feasibility_rules: Vec<FeasibilityRule>,
    #[serde(default)]
    pub district_names: BTreeMap<String, String>,
    #[serde(default)]
    pub stages: StageToggles,
    pub inputs: InputPaths,
}

impl ScenarioConfig {
    /// Config with defaults and the conventional file names inside `dir`.
    pub fn with_inputs_in(dir: &Path) -> Self {
        ScenarioConfig {
            cell_size: default_cell_size(),
            seed: 0,
            coherence_threshold: default_threshold(),
            class_weights_work: None,
            class_weights_residence: None,
            residence_weighting: ResidenceWeighting::default(),
            residential_threshold_m2: default_residential_threshold(),
            distance_exponent: default_exponent(),
            eligible_age: AgeRange::default(),
            age_band_width: default_band_width(),
            feasibility_rules: Vec::new(),
            district_names: BTreeMap::new(),
            stages: StageToggles::default(),
            inputs: InputPaths {
                persons: dir.join("persons.csv"),
                cells: dir.join("cells.csv"),
                landuse: dir.join("landuse.csv"),
                nace_totals: dir.join("nace_totals.csv"),
                tables_dir: dir.join("tables"),
                od_reference: None,
            },
        }
    }

    pub fn work_weights(&self) -> Result<WeightConfig<f64>> {
        match &self.class_weights_work {
            Some(w) => WeightConfig::new(w.clone(), Purpose::Work),
            None => Ok(WeightConfig::prototype_work()),
        }
    }

    pub fn residence_weights(&self) -> Result<WeightConfig<f64>> {
        match &self.class_weights_residence {
            Some(w) => WeightConfig::new(w.clone(), Purpose::Residence),
            None => Ok(WeightConfig::default_residence()),
        }
    }

    pub fn classification_rules(&self) -> ClassificationRules<f64> {
        ClassificationRules {
            high_residential_min_area: self.residential_threshold_m2,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.coherence_threshold > 1.0) {
            return Err(Error::Config(format!(
                "coherence_threshold must exceed 1, got {}",
                self.coherence_threshold
            )));
        }
        if !(self.cell_size > 0.0) || !self.cell_size.is_finite() {
            return Err(Error::Config(format!(
                "cell_size must be positive, got {}",
                self.cell_size
            )));
        }
        if !self.distance_exponent.is_finite() || self.distance_exponent < 0.0 {
            return Err(Error::Config(format!(
                "distance_exponent must be finite and non-negative, got {}",
                self.distance_exponent
            )));
        }
        if self.age_band_width == 0 {
            return Err(Error::Config("age_band_width must be positive".into()));
        }
        if self.eligible_age.min > self.eligible_age.max {
            return Err(Error::Config(
                "eligible_age.min exceeds eligible_age.max".into(),
            ));
        }
        self.work_weights()?;
        if self.residence_weighting == ResidenceWeighting::Class {
            self.residence_weights()?;
        }
        Ok(())
    }

    fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.inputs.persons);
        fix(&mut self.inputs.cells);
        fix(&mut self.inputs.landuse);
        fix(&mut self.inputs.nace_totals);
        fix(&mut self.inputs.tables_dir);
        if let Some(p) = self.inputs.od_reference.as_mut() {
            fix(p);
        }
    }

    fn check_paths(&self) -> Result<()> {
        let i = &self.inputs;
        let mut paths = vec![
            &i.persons,
            &i.cells,
            &i.landuse,
            &i.nace_totals,
            &i.tables_dir,
        ];
        paths.extend(i.od_reference.as_ref());
        for p in paths {
            if !p.exists() {
                return Err(Error::Config(format!(
                    "input {} does not exist",
                    p.display()
                )));
            }
        }
        Ok(())
    }
}

/// 5-year (or configured width) age band label such as `30-34`.
pub fn age_band(age: u32, width: u32) -> String {
    let lo = age / width * width;
    format!("{}-{}", lo, lo + width - 1)
}

#[derive(Clone, Debug, PartialEq)]
pub struct ClassificationRules<T> {
    pub high_residential_min_area: T,
}

/// Land-use categories by tie-break precedence, strongest first.
const PRECEDENCE: [LandUse; 4] = [
    LandUse::Commercial,
    LandUse::Industrial,
    LandUse::Education,
    LandUse::Residential,
];

/// Class of a cell from its floor areas: the prevalent category wins,
/// ties go to the earlier entry of the precedence list, and residential
/// cells split into high/low by the absolute-area threshold.
pub fn classify_cell<T: Real>(
    areas: &BTreeMap<LandUse, T>,
    rules: &ClassificationRules<T>,
) -> CellClass {
    let area = |u: LandUse| areas.get(&u).copied().unwrap_or_else(T::zero);
    let mut best: Option<(LandUse, T)> = None;
    for usage in PRECEDENCE {
        let a = area(usage);
        if a > T::zero() && best.is_none_or(|(_, b)| a > b) {
            best = Some((usage, a));
        }
    }
    match best {
        None => CellClass::OpenLand,
        Some((LandUse::Commercial, _)) => CellClass::Commercial,
        Some((LandUse::Industrial, _)) => CellClass::Industrial,
        Some((LandUse::Education, _)) => CellClass::Education,
        Some((LandUse::Residential, a)) => {
            if a >= rules.high_residential_min_area {
                CellClass::HighResidential
            } else {
                CellClass::LowResidential
            }
        }
    }
}

pub fn classify_cells<T: Real>(
    landuse: &BTreeMap<CellId, BTreeMap<LandUse, T>>,
    rules: &ClassificationRules<T>,
) -> BTreeMap<CellId, CellClass> {
    landuse
        .iter()
        .map(|(id, areas)| (id.clone(), classify_cell(areas, rules)))
        .collect()
}

#[derive(Clone, Debug, PartialEq, Deserialize, Serialize)]
pub struct CellRecord {
    pub cell_id: String,
    pub row: u32,
    pub col: u32,
    pub district_id: String,
}

#[derive(Clone, Debug, PartialEq, Deserialize, Serialize)]
pub struct LanduseRecord {
    pub cell_id: String,
    pub category: String,
    pub area_m2: f64,
}

#[derive(Clone, Debug, PartialEq, Deserialize, Serialize)]
pub struct PersonRecord {
    pub person_id: String,
    pub age: u32,
    pub gender: String,
    pub household_id: String,
    pub residence_district: String,
}

#[derive(Clone, Debug, PartialEq, Deserialize, Serialize)]
pub struct RegisterRecord {
    pub district_id: String,
    pub nace_code: String,
    pub employees: u64,
}

#[derive(Clone, Debug, PartialEq, Deserialize, Serialize)]
pub struct OdRecord {
    pub origin_district: String,
    pub dest_district: String,
    pub share: f64,
}

/// Business-register employees per district and industry field.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct RegisterTotals {
    pub by_district: BTreeMap<DistrictId, BTreeMap<String, u64>>,
}

impl RegisterTotals {
    pub fn from_records<'a>(records: impl IntoIterator<Item = &'a RegisterRecord>) -> Self {
        let mut by_district: BTreeMap<DistrictId, BTreeMap<String, u64>> = BTreeMap::new();
        for r in records {
            *by_district
                .entry(r.district_id.as_str().into())
                .or_default()
                .entry(r.nace_code.clone())
                .or_default() += r.employees;
        }
        RegisterTotals { by_district }
    }

    pub fn fields(&self) -> BTreeSet<String> {
        self.by_district
            .values()
            .flat_map(|m| m.keys().cloned())
            .collect()
    }

    pub fn field_total(&self, code: &str) -> u64 {
        self.by_district.values().filter_map(|m| m.get(code)).sum()
    }

    pub fn get(&self, district: &DistrictId, code: &str) -> u64 {
        self.by_district
            .get(district)
            .and_then(|m| m.get(code))
            .copied()
            .unwrap_or(0)
    }
}

/// Fully cross-validated inputs of one run.
#[derive(Clone, Debug)]
pub struct Scenario {
    pub config: ScenarioConfig,
    /// SHA-256 of the configuration document, hex encoded.
    pub config_hash: String,
    pub grid: Grid<f64>,
    pub persons: Vec<Person>,
    pub tables: BTreeMap<String, ConditionalTable<f64>>,
    pub register: RegisterTotals,
    pub od_reference: Option<OdMatrix<f64>>,
}

/// In-memory inputs. Each record carries its 1-based CSV line for error messages.
#[derive(Clone, Debug, Default)]
pub struct ScenarioParts {
    pub cells: Vec<(u64, CellRecord)>,
    pub landuse: Vec<(u64, LanduseRecord)>,
    pub persons: Vec<(u64, PersonRecord)>,
    pub register: Vec<(u64, RegisterRecord)>,
    pub tables: BTreeMap<String, ConditionalTable<f64>>,
    pub od_reference: Vec<(u64, OdRecord)>,
}

impl ScenarioParts {
    /// Numbers records from line 2 (line 1 is the header).
    pub fn numbered<R>(records: Vec<R>) -> Vec<(u64, R)> {
        records
            .into_iter()
            .enumerate()
            .map(|(i, r)| (i as u64 + 2, r))
            .collect()
    }
}

fn file_label(p: &Path) -> String {
    p.file_name()
        .map(|f| f.to_string_lossy().into_owned())
        .unwrap_or_else(|| p.display().to_string())
}

pub fn read_records<R: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<(u64, R)>> {
    let label = file_label(path);
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::io(path, io),
            other => Error::Config(format!("{label}: {other:?}")),
        })?;
    let headers = reader.headers().map_err(|e| Error::csv(&label, e))?.clone();
    let mut out = Vec::new();
    for row in reader.records() {
        let row = row.map_err(|e| Error::csv(&label, e))?;
        let line = row.position().map(|p| p.line()).unwrap_or(0);
        let rec: R = row.deserialize(Some(&headers)).map_err(|e| {
            let column = match e.kind() {
                csv::ErrorKind::Deserialize { err, .. } => err
                    .field()
                    .and_then(|f| headers.get(f as usize))
                    .unwrap_or("")
                    .to_string(),
                _ => String::new(),
            };
            Error::Schema {
                file: label.clone(),
                line,
                column,
                message: e.to_string(),
            }
        })?;
        out.push((line, rec));
    }
    Ok(out)
}

/// Reads a long-format table `key1,...,keyN,outcome,probability`; its name is the file stem.
pub fn read_table(path: &Path) -> Result<ConditionalTable<f64>> {
    let label = file_label(path);
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| Error::csv(&label, e))?;
    let headers = reader.headers().map_err(|e| Error::csv(&label, e))?.clone();
    let n = headers.len();
    if n < 3 || &headers[n - 2] != "outcome" || &headers[n - 1] != "probability" {
        return Err(Error::Schema {
            file: label,
            line: 1,
            column: String::new(),
            message: "expected header key1,...,outcome,probability".into(),
        });
    }
    let keys: Vec<String> = headers.iter().take(n - 2).map(str::to_string).collect();
    let mut records = Vec::new();
    for row in reader.records() {
        let row = row.map_err(|e| Error::csv(&label, e))?;
        let line = row.position().map(|p| p.line()).unwrap_or(0);
        let p: f64 = row[n - 1].parse().map_err(|_| Error::Schema {
            file: label.clone(),
            line,
            column: "probability".into(),
            message: format!("not a number: {:?}", &row[n - 1]),
        })?;
        let key = row.iter().take(n - 2).map(str::to_string).collect();
        records.push((key, row[n - 2].to_string(), p));
    }
    ConditionalTable::from_records(&name, keys, records)
}

pub fn read_tables(dir: &Path) -> Result<BTreeMap<String, ConditionalTable<f64>>> {
    let entries = fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut paths: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "csv"))
        .collect();
    paths.sort();
    paths
        .iter()
        .map(|p| read_table(p).map(|t| (t.name.clone(), t)))
        .collect()
}

/// Loads and cross-validates every input referenced by the configuration file.
pub fn load_scenario(config_path: &Path) -> Result<Scenario> {
    let bytes = fs::read(config_path).map_err(|e| Error::io(config_path, e))?;
    let mut config: ScenarioConfig = serde_json::from_slice(&bytes).map_err(|e| Error::Schema {
        file: file_label(config_path),
        line: e.line() as u64,
        column: e.column().to_string(),
        message: e.to_string(),
    })?;
    let base = config_path.parent().unwrap_or(Path::new("."));
    config.resolve_paths(base);
    config.validate()?;
    config.check_paths()?;
    let i = &config.inputs;
    let parts = ScenarioParts {
        cells: read_records(&i.cells)?,
        landuse: read_records(&i.landuse)?,
        persons: read_records(&i.persons)?,
        register: read_records(&i.nace_totals)?,
        tables: read_tables(&i.tables_dir)?,
        od_reference: match &i.od_reference {
            Some(p) => read_records(p)?,
            None => Vec::new(),
        },
    };
    let hash = hex_digest(&bytes);
    Scenario::assemble(config, hash, parts)
}

pub fn hex_digest(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

impl Scenario {
    /// Builds and cross-validates a scenario from in-memory records.
    pub fn assemble(
        config: ScenarioConfig,
        config_hash: String,
        parts: ScenarioParts,
    ) -> Result<Self> {
        config.validate()?;
        let cells_file = file_label(&config.inputs.cells);
        let landuse_file = file_label(&config.inputs.landuse);
        let persons_file = file_label(&config.inputs.persons);
        let register_file = file_label(&config.inputs.nace_totals);

        let mut district_ids: BTreeSet<String> = BTreeSet::new();
        let mut seen_cells: HashSet<&str> = HashSet::new();
        let mut seen_pos: HashSet<(u32, u32)> = HashSet::new();
        for (line, c) in &parts.cells {
            if !seen_cells.insert(c.cell_id.as_str()) {
                return Err(Error::Referential {
                    file: cells_file,
                    line: *line,
                    message: format!("duplicate cell id {:?}", c.cell_id),
                });
            }
            if !seen_pos.insert((c.row, c.col)) {
                return Err(Error::Referential {
                    file: cells_file,
                    line: *line,
                    message: format!("duplicate grid position ({}, {})", c.row, c.col),
                });
            }
            district_ids.insert(c.district_id.clone());
        }

        let mut areas: BTreeMap<CellId, BTreeMap<LandUse, f64>> = parts
            .cells
            .iter()
            .map(|(_, c)| (CellId::from(c.cell_id.as_str()), BTreeMap::new()))
            .collect();
        for (line, r) in &parts.landuse {
            let entry = areas
                .get_mut(&CellId::from(r.cell_id.as_str()))
                .ok_or_else(|| Error::Referential {
                    file: landuse_file.clone(),
                    line: *line,
                    message: format!("unknown cell {:?}", r.cell_id),
                })?;
            let usage: LandUse = r.category.parse().map_err(|_| Error::Schema {
                file: landuse_file.clone(),
                line: *line,
                column: "category".into(),
                message: format!("unknown land-use category {:?}", r.category),
            })?;
            if !(r.area_m2 >= 0.0) || !r.area_m2.is_finite() {
                return Err(Error::Schema {
                    file: landuse_file.clone(),
                    line: *line,
                    column: "area_m2".into(),
                    message: format!("area must be non-negative, got {}", r.area_m2),
                });
            }
            *entry.entry(usage).or_insert(0.0) += r.area_m2;
        }
        let classes = classify_cells(&areas, &config.classification_rules());
        let work = config.work_weights()?;

        let mut cells = Vec::with_capacity(parts.cells.len());
        for (_, c) in &parts.cells {
            let id = CellId::from(c.cell_id.as_str());
            let class = classes[&id];
            cells.push(Cell {
                centroid: centroid(c.row, c.col, config.cell_size),
                row: c.row,
                col: c.col,
                district_id: c.district_id.as_str().into(),
                landuse_areas: areas.remove(&id).unwrap_or_default(),
                weight: work.weight(class)?,
                class,
                id,
            });
        }
        if config.residence_weighting == ResidenceWeighting::Class {
            let res = config.residence_weights()?;
            for c in &cells {
                res.weight(c.class)?;
            }
        }

        let mut seen_register: HashSet<(&str, &str)> = HashSet::new();
        for (line, r) in &parts.register {
            if !district_ids.contains(&r.district_id) {
                return Err(Error::Referential {
                    file: register_file,
                    line: *line,
                    message: format!("unknown district {:?}", r.district_id),
                });
            }
            if !seen_register.insert((r.district_id.as_str(), r.nace_code.as_str())) {
                return Err(Error::Referential {
                    file: register_file,
                    line: *line,
                    message: format!(
                        "duplicate entry for district {:?} field {:?}",
                        r.district_id, r.nace_code
                    ),
                });
            }
        }
        let register = RegisterTotals::from_records(parts.register.iter().map(|(_, r)| r));

        let districts: Vec<District> = district_ids
            .iter()
            .map(|d| {
                let id = DistrictId::from(d.as_str());
                let nace_capacity = register.by_district.get(&id).cloned().unwrap_or_default();
                District {
                    name: config
                        .district_names
                        .get(d)
                        .cloned()
                        .unwrap_or_else(|| d.clone()),
                    worker_total: nace_capacity.values().sum(),
                    nace_capacity,
                    cell_ids: Vec::new(),
                    id,
                }
            })
            .collect();
        let grid = Grid::new(config.cell_size, cells, districts)?;

        let mut persons = Vec::with_capacity(parts.persons.len());
        let mut ids: HashSet<&str> = HashSet::with_capacity(parts.persons.len());
        let mut households: HashMap<&str, &str> = HashMap::new();
        for (line, p) in &parts.persons {
            if !ids.insert(p.person_id.as_str()) {
                return Err(Error::DuplicatePerson(p.person_id.clone()));
            }
            if !district_ids.contains(&p.residence_district) {
                return Err(Error::Referential {
                    file: persons_file,
                    line: *line,
                    message: format!(
                        "person {:?} references unknown district {:?}",
                        p.person_id, p.residence_district
                    ),
                });
            }
            let hh = households
                .entry(p.household_id.as_str())
                .or_insert(p.residence_district.as_str());
            if *hh != p.residence_district {
                return Err(Error::Referential {
                    file: persons_file,
                    line: *line,
                    message: format!(
                        "household {:?} spans districts {:?} and {:?}",
                        p.household_id, hh, p.residence_district
                    ),
                });
            }
            let gender: Gender = p.gender.parse().map_err(|_| Error::Schema {
                file: persons_file.clone(),
                line: *line,
                column: "gender".into(),
                message: format!("unknown gender {:?}", p.gender),
            })?;
            persons.push(Person::new(
                p.person_id.as_str(),
                p.age,
                gender,
                p.household_id.as_str(),
                p.residence_district.as_str(),
            ));
        }

        for required in [OCCUPATION_TABLE, NACE_TABLE] {
            if !parts.tables.contains_key(required) {
                return Err(Error::Config(format!("missing table {required}.csv")));
            }
        }

        let od_reference = if parts.od_reference.is_empty() {
            None
        } else {
            let order: Vec<DistrictId> = grid.districts().iter().map(|d| d.id.clone()).collect();
            let file = config
                .inputs
                .od_reference
                .as_deref()
                .map(file_label)
                .unwrap_or_else(|| "od_reference.csv".into());
            Some(crate::report::od_matrix_from_records(
                order,
                &parts.od_reference,
                &file,
            )?)
        };

        Ok(Scenario {
            config,
            config_hash,
            grid,
            persons,
            tables: parts.tables,
            register,
            od_reference,
        })
    }

    pub fn table(&self, name: &str) -> Result<&ConditionalTable<f64>> {
        self.tables
            .get(name)
            .ok_or_else(|| Error::Config(format!("missing table {name}.csv")))
    }
}
