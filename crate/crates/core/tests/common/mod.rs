//! Scenario fixtures shared by the integration and acceptance tests.
#![allow(dead_code)]

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use anchor_assign::distributions::ConditionalTable;
use anchor_assign::ingest::{
    CellRecord, LanduseRecord, OdRecord, PersonRecord, RegisterRecord, Scenario, ScenarioConfig,
    ScenarioParts,
};
use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub struct Rng(ChaCha8Rng);

impl Rng {
    pub fn new(seed: u64) -> Self {
        Rng(ChaCha8Rng::seed_from_u64(seed))
    }

    pub fn unit(&mut self) -> f64 {
        (self.0.next_u64() >> 11) as f64 / (1u64 << 53) as f64
    }

    pub fn below(&mut self, n: u64) -> u64 {
        self.0.next_u64() % n
    }

    pub fn range(&mut self, lo: u64, hi: u64) -> u64 {
        lo + self.below(hi - lo + 1)
    }

    pub fn chance(&mut self, p: f64) -> bool {
        self.unit() < p
    }
}

/// One long-format table: key attributes and `(key, outcome, probability)` rows.
#[derive(Clone, Debug)]
pub struct TableSpec {
    pub name: String,
    pub keys: Vec<String>,
    pub rows: Vec<(Vec<String>, String, f64)>,
}

impl TableSpec {
    pub fn new(name: &str, keys: &[&str]) -> Self {
        TableSpec {
            name: name.into(),
            keys: keys.iter().map(|k| k.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn row(&mut self, key: &[&str], outcome: &str, p: f64) -> &mut Self {
        self.rows.push((
            key.iter().map(|k| k.to_string()).collect(),
            outcome.into(),
            p,
        ));
        self
    }
}

#[derive(Clone, Debug)]
pub struct Fixture {
    pub config: ScenarioConfig,
    pub cells: Vec<CellRecord>,
    pub landuse: Vec<LanduseRecord>,
    pub persons: Vec<PersonRecord>,
    pub register: Vec<RegisterRecord>,
    pub tables: Vec<TableSpec>,
    pub od_reference: Vec<OdRecord>,
}

impl Fixture {
    pub fn new() -> Self {
        Fixture {
            config: ScenarioConfig::with_inputs_in(Path::new("")),
            cells: Vec::new(),
            landuse: Vec::new(),
            persons: Vec::new(),
            register: Vec::new(),
            tables: Vec::new(),
            od_reference: Vec::new(),
        }
    }

    pub fn cell(&mut self, id: &str, row: u32, col: u32, district: &str) -> &mut Self {
        self.cells.push(CellRecord {
            cell_id: id.into(),
            row,
            col,
            district_id: district.into(),
        });
        self
    }

    pub fn landuse(&mut self, cell: &str, category: &str, area: f64) -> &mut Self {
        self.landuse.push(LanduseRecord {
            cell_id: cell.into(),
            category: category.into(),
            area_m2: area,
        });
        self
    }

    pub fn person(
        &mut self,
        id: &str,
        age: u32,
        gender: &str,
        household: &str,
        district: &str,
    ) -> &mut Self {
        self.persons.push(PersonRecord {
            person_id: id.into(),
            age,
            gender: gender.into(),
            household_id: household.into(),
            residence_district: district.into(),
        });
        self
    }

    pub fn employees(&mut self, district: &str, field: &str, n: u64) -> &mut Self {
        self.register.push(RegisterRecord {
            district_id: district.into(),
            nace_code: field.into(),
            employees: n,
        });
        self
    }

    pub fn parts(&self) -> ScenarioParts {
        ScenarioParts {
            cells: ScenarioParts::numbered(self.cells.clone()),
            landuse: ScenarioParts::numbered(self.landuse.clone()),
            persons: ScenarioParts::numbered(self.persons.clone()),
            register: ScenarioParts::numbered(self.register.clone()),
            tables: self
                .tables
                .iter()
                .map(|t| {
                    let table =
                        ConditionalTable::from_records(&t.name, t.keys.clone(), t.rows.clone())
                            .expect("fixture table");
                    (t.name.clone(), table)
                })
                .collect(),
            od_reference: ScenarioParts::numbered(self.od_reference.clone()),
        }
    }

    pub fn scenario(&self) -> Scenario {
        Scenario::assemble(self.config.clone(), "fixture".into(), self.parts())
            .expect("fixture scenario")
    }

    /// Writes every input plus `config.json` into `dir`; returns the config path.
    pub fn write(&self, dir: &Path) -> PathBuf {
        fs::create_dir_all(dir.join("tables")).unwrap();
        write_csv(&dir.join("cells.csv"), &self.cells);
        write_csv(&dir.join("landuse.csv"), &self.landuse);
        write_csv(&dir.join("persons.csv"), &self.persons);
        write_csv(&dir.join("nace_totals.csv"), &self.register);
        let mut config = self.config.clone();
        if !self.od_reference.is_empty() {
            write_csv(&dir.join("od_reference.csv"), &self.od_reference);
            config.inputs.od_reference = Some("od_reference.csv".into());
        }
        for t in &self.tables {
            let mut w =
                csv::Writer::from_path(dir.join("tables").join(format!("{}.csv", t.name))).unwrap();
            let mut header = t.keys.clone();
            header.extend(["outcome".to_string(), "probability".to_string()]);
            w.write_record(&header).unwrap();
            for (key, outcome, p) in &t.rows {
                let mut rec = key.clone();
                rec.extend([outcome.clone(), format!("{p}")]);
                w.write_record(&rec).unwrap();
            }
            w.flush().unwrap();
        }
        let path = dir.join("config.json");
        fs::write(&path, serde_json::to_vec_pretty(&config).unwrap()).unwrap();
        path
    }
}

/// Minimal occupation and field tables for fixtures that never reach those stages.
pub fn stub_tables() -> Vec<TableSpec> {
    let mut occ = TableSpec::new("occupation", &["gender"]);
    occ.row(&["F"], "worker", 1.0).row(&["M"], "worker", 1.0);
    let mut nace = TableSpec::new("nace", &["occupation"]);
    nace.row(&["worker"], "Z", 1.0);
    vec![occ, nace]
}

pub fn write_csv<R: serde::Serialize>(path: &Path, rows: &[R]) {
    let mut w = csv::Writer::from_path(path).unwrap();
    for r in rows {
        w.serialize(r).unwrap();
    }
    w.flush().unwrap();
}

pub const FIELDS: [&str; 4] = ["A", "B", "C", "D"];
const CATEGORIES: [&str; 4] = ["residential", "commercial", "industrial", "education"];

/// Random small scenario: up to `max_districts` districts, `max_cells`
/// cells and `max_persons` persons.
///
/// With `consistent` the register is derived from the expected synthetic
/// field counts so every field passes the consistency gate; otherwise the
/// register is random and some fields end up pooled.
pub fn random_toy(
    seed: u64,
    max_districts: u64,
    max_cells: u64,
    max_persons: u64,
    consistent: bool,
) -> Fixture {
    let mut rng = Rng::new(seed);
    let mut f = Fixture::new();
    f.config.seed = seed;
    let nd = rng.range(1, max_districts);
    let nc = rng.range(nd, max_cells.max(nd));
    let districts: Vec<String> = (0..nd).map(|d| format!("D{d}")).collect();
    let cols = 8;
    for c in 0..nc {
        let d = if c < nd { c } else { rng.below(nd) };
        let id = format!("c{c:03}");
        f.cell(
            &id,
            (c / cols) as u32,
            (c % cols) as u32,
            &districts[d as usize],
        );
        for cat in CATEGORIES {
            if rng.chance(0.45) {
                let area = (rng.range(1, 40) * 250) as f64;
                f.landuse(&id, cat, area);
            }
        }
    }

    let np = rng.range(1, max_persons);
    let mut pid = 0;
    let mut hh = 0;
    while pid < np {
        let size = rng.range(1, 4).min(np - pid);
        let d = &districts[rng.below(nd) as usize];
        for _ in 0..size {
            let age = rng.range(5, 85) as u32;
            let gender = if rng.chance(0.5) { "F" } else { "M" };
            f.person(&format!("p{pid:05}"), age, gender, &format!("h{hh:05}"), d);
            pid += 1;
        }
        hh += 1;
    }

    let mut occupation = TableSpec::new("occupation", &["gender"]);
    let mut nace = TableSpec::new("nace", &["occupation"]);
    let mut field_probs: BTreeMap<&str, f64> = BTreeMap::new();
    let employed = [0.7, 0.8];
    for (g, e) in ["F", "M"].iter().zip(employed) {
        occupation.row(&[g], "clerk", e * 0.5);
        occupation.row(&[g], "builder", e * 0.5);
        occupation.row(&[g], anchor_assign::NOT_EMPLOYED, 1.0 - e);
    }
    for (occ, probs) in [
        ("clerk", [0.4, 0.3, 0.2, 0.1]),
        ("builder", [0.1, 0.2, 0.3, 0.4]),
    ] {
        for (field, p) in FIELDS.iter().zip(probs) {
            nace.row(&[occ], field, p);
            *field_probs.entry(field).or_default() += 0.5 * p;
        }
    }
    f.tables = vec![occupation, nace];

    let eligible = f
        .persons
        .iter()
        .filter(|p| (15..=74).contains(&p.age))
        .count() as f64
        * 0.75;
    for field in FIELDS {
        let expected = eligible * field_probs[field];
        let mut weights: Vec<f64> = (0..nd).map(|_| rng.unit()).collect();
        if !consistent {
            weights.iter_mut().for_each(|w| *w *= 3.0 * rng.unit());
        }
        let sum: f64 = weights.iter().sum();
        for (d, w) in districts.iter().zip(weights) {
            let n = (expected * w / sum).round() as u64 + if consistent { 1 } else { 0 };
            if n > 0 {
                f.employees(d, field, n);
            }
        }
    }
    if !consistent {
        f.employees(&districts[0], "X", rng.range(1, 50));
    }
    f
}

pub const TALLINN: [&str; 8] = [
    "Mustamae",
    "Lasnamae",
    "Pohja-Tallinna",
    "Kesklinna",
    "Nomme",
    "Haabersti",
    "Kristiine",
    "Pirita",
];

/// Published synthetic-population OD shares (rows: residence, columns: work).
pub const MODEL_OD: [[f64; 8]; 8] = [
    [0.21, 0.08, 0.07, 0.20, 0.10, 0.11, 0.17, 0.05],
    [0.07, 0.27, 0.06, 0.26, 0.08, 0.10, 0.10, 0.06],
    [0.10, 0.10, 0.14, 0.26, 0.08, 0.12, 0.14, 0.06],
    [0.08, 0.11, 0.09, 0.34, 0.08, 0.09, 0.14, 0.06],
    [0.15, 0.10, 0.08, 0.21, 0.15, 0.11, 0.14, 0.06],
    [0.16, 0.09, 0.09, 0.20, 0.10, 0.16, 0.14, 0.05],
    [0.12, 0.09, 0.08, 0.25, 0.08, 0.10, 0.21, 0.05],
    [0.07, 0.22, 0.08, 0.25, 0.08, 0.10, 0.11, 0.08],
];

/// Published mobile-network OD shares for the same districts.
pub const PHONE_OD: [[f64; 8]; 8] = [
    [0.36, 0.06, 0.08, 0.20, 0.04, 0.12, 0.12, 0.02],
    [0.05, 0.40, 0.07, 0.32, 0.03, 0.04, 0.06, 0.03],
    [0.05, 0.08, 0.33, 0.28, 0.03, 0.08, 0.12, 0.02],
    [0.06, 0.09, 0.10, 0.54, 0.03, 0.06, 0.09, 0.02],
    [0.11, 0.07, 0.07, 0.32, 0.26, 0.07, 0.10, 0.01],
    [0.16, 0.07, 0.08, 0.20, 0.04, 0.35, 0.10, 0.01],
    [0.13, 0.06, 0.10, 0.29, 0.05, 0.09, 0.28, 0.01],
    [0.02, 0.22, 0.08, 0.31, 0.04, 0.04, 0.10, 0.20],
];

/// Published difference table, as printed.
pub const PRINTED_DELTA: [[f64; 8]; 8] = [
    [-0.15, 0.02, -0.01, 0.00, 0.06, -0.01, 0.05, 0.03],
    [0.03, -0.13, -0.01, -0.06, 0.05, 0.06, 0.04, 0.03],
    [0.05, 0.02, -0.19, -0.02, 0.05, 0.04, 0.02, 0.04],
    [0.02, 0.02, -0.01, -0.20, 0.05, 0.03, 0.05, 0.04],
    [0.04, 0.03, 0.01, -0.11, -0.11, 0.04, 0.04, 0.05],
    [0.00, 0.02, 0.01, 0.00, 0.06, -0.19, 0.04, 0.04],
    [-0.01, 0.03, -0.02, -0.04, 0.03, 0.01, -0.07, 0.04],
    [0.05, 0.00, 0.00, -0.06, 0.04, 0.06, 0.01, -0.12],
];

/// Workers resident in each district of the city-scale fixture (about 200k).
pub const TALLINN_WORKERS: [u64; 8] = [
    34_000, 52_000, 28_000, 30_000, 19_000, 22_000, 16_000, 9_000,
];

pub fn row_normalized(m: &[[f64; 8]; 8]) -> Vec<Vec<f64>> {
    m.iter()
        .map(|r| {
            let s: f64 = r.iter().sum();
            r.iter().map(|v| v / s).collect()
        })
        .collect()
}

/// City-scale fixture: 628 cells of 500 m in 8 districts.
///
/// Each resident works; the occupation drawn from the residence district
/// names the work district, each occupation maps to one field, and each
/// field is registered in a single district. The resulting OD matrix is
/// therefore the generating matrix up to multinomial noise.
pub fn tallinn_like(od: &[Vec<f64>]) -> Fixture {
    let mut rng = Rng::new(2015);
    let mut f = Fixture::new();
    f.config.seed = 42;
    let cols = 25u32;
    let n_cells = 628u32;
    for c in 0..n_cells {
        let d = (c as usize * 8) / n_cells as usize;
        let id = format!("t{c:03}");
        f.cell(&id, c / cols, c % cols, TALLINN[d]);
        f.landuse(&id, "residential", (rng.range(0, 40) * 500) as f64);
        if rng.chance(0.4) {
            f.landuse(&id, "commercial", (rng.range(1, 30) * 500) as f64);
        }
        if rng.chance(0.15) {
            f.landuse(&id, "industrial", (rng.range(1, 30) * 500) as f64);
        }
    }
    let mut occupation = TableSpec::new("occupation", &["residence_district"]);
    let mut nace = TableSpec::new("nace", &["occupation"]);
    for (r, home) in TALLINN.iter().enumerate() {
        for (j, work) in TALLINN.iter().enumerate() {
            occupation.row(&[home], &format!("works_in_{work}"), od[r][j]);
        }
    }
    for work in TALLINN {
        nace.row(&[&format!("works_in_{work}")], &format!("F_{work}"), 1.0);
    }
    f.tables = vec![occupation, nace];

    let mut pid = 0u64;
    let mut hh = 0u64;
    for (d, n) in TALLINN.iter().zip(TALLINN_WORKERS) {
        let mut placed = 0;
        while placed < n {
            let size = (1 + hh % 3).min(n - placed);
            for _ in 0..size {
                let gender = if pid.is_multiple_of(2) { "F" } else { "M" };
                f.person(
                    &format!("w{pid:06}"),
                    20 + (pid % 45) as u32,
                    gender,
                    &format!("hh{hh:06}"),
                    d,
                );
                pid += 1;
            }
            placed += size;
            hh += 1;
        }
    }
    for (j, work) in TALLINN.iter().enumerate() {
        let expected: f64 = TALLINN_WORKERS
            .iter()
            .zip(od)
            .map(|(n, row)| *n as f64 * row[j])
            .sum();
        f.employees(work, &format!("F_{work}"), expected.round() as u64);
    }
    f
}
