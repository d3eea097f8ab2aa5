//! Grid, districts, persons and the land-use weight math.
//!
//! Cells are squares of side `cell_size` addressed by `(row, col)`; centroids
//! live in a planar metric frame with the grid origin at `(0, 0)`. Every
//! distance in the crate is a centroid-to-centroid Euclidean distance floored
//! at half a cell, so a worker whose workplace is their own residence cell
//! still has a finite inverse-distance weight.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::num::Real;

macro_rules! string_id {
    ($(#[$meta:meta])* $name:ident) => {
        $(#[$meta])*
        #[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
        #[serde(transparent)]
        pub struct $name(pub String);

        impl $name {
            pub fn as_str(&self) -> &str {
                &self.0
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(&self.0)
            }
        }

        impl From<&str> for $name {
            fn from(s: &str) -> Self {
                $name(s.to_string())
            }
        }

        impl From<String> for $name {
            fn from(s: String) -> Self {
                $name(s)
            }
        }
    };
}

string_id!(CellId);
string_id!(DistrictId);
string_id!(PersonId);
string_id!(HouseholdId);

/// Label of the pooled sink field for workers whose industry field is not usable.
pub const OTHER_FIELD: &str = "Other";
/// Occupation given to persons outside the labour force.
pub const NOT_EMPLOYED: &str = "not employed";

/// Land-use class of a cell.
///
/// The six prototype classes also cover the four-class HR/LR/OW/MW scheme:
/// `HR`/`LR` are the residential classes, `OW` (office/services) parses to
/// [`CellClass::Commercial`] and `MW` (manufacturing) to [`CellClass::Industrial`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum CellClass {
    LowResidential,
    HighResidential,
    Commercial,
    Industrial,
    Education,
    OpenLand,
}

impl CellClass {
    pub const ALL: [CellClass; 6] = [
        CellClass::LowResidential,
        CellClass::HighResidential,
        CellClass::Commercial,
        CellClass::Industrial,
        CellClass::Education,
        CellClass::OpenLand,
    ];

    pub fn code(self) -> &'static str {
        match self {
            CellClass::LowResidential => "L",
            CellClass::HighResidential => "H",
            CellClass::Commercial => "C",
            CellClass::Industrial => "I",
            CellClass::Education => "E",
            CellClass::OpenLand => "O",
        }
    }
}

impl fmt::Display for CellClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

impl FromStr for CellClass {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let class = match s.trim().to_ascii_lowercase().as_str() {
            "l" | "lr" | "low_residential" | "lowresidential" => CellClass::LowResidential,
            "h" | "hr" | "high_residential" | "highresidential" => CellClass::HighResidential,
            "c" | "ow" | "commercial" | "office" => CellClass::Commercial,
            "i" | "mw" | "industrial" | "manufacturing" => CellClass::Industrial,
            "e" | "education" => CellClass::Education,
            "o" | "open" | "open_land" | "openland" => CellClass::OpenLand,
            other => return Err(Error::Config(format!("unknown cell class {other:?}"))),
        };
        Ok(class)
    }
}

impl Serialize for CellClass {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(self.code())
    }
}

impl<'de> Deserialize<'de> for CellClass {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Building floor-area category recorded per cell.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LandUse {
    Residential,
    Commercial,
    Industrial,
    Education,
}

impl FromStr for LandUse {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let usage = match s.trim().to_ascii_lowercase().as_str() {
            "residential" | "housing" => LandUse::Residential,
            "commercial" | "office" | "service" | "services" | "retail" => LandUse::Commercial,
            "industrial" | "manufacturing" | "warehouse" => LandUse::Industrial,
            "education" | "school" => LandUse::Education,
            other => {
                return Err(Error::Config(format!(
                    "unknown land-use category {other:?}"
                )))
            }
        };
        Ok(usage)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Purpose {
    Work,
    Residence,
}

/// Dimensionless weight per cell class.
#[derive(Clone, Debug, PartialEq)]
pub struct WeightConfig<T> {
    pub weights: BTreeMap<CellClass, T>,
    pub purpose: Purpose,
}

impl<T: Real> WeightConfig<T> {
    pub fn new(weights: BTreeMap<CellClass, T>, purpose: Purpose) -> Result<Self> {
        let config = WeightConfig { weights, purpose };
        config.validate()?;
        Ok(config)
    }

    /// Prototype-city workplace weights (L, H, C, I, E, O) = (1, 2, 10, 5, 3, 1).
    pub fn prototype_work() -> Self {
        let w = [1.0, 2.0, 10.0, 5.0, 3.0, 1.0];
        WeightConfig {
            weights: CellClass::ALL
                .iter()
                .zip(w)
                .map(|(c, v)| (*c, T::of(v)))
                .collect(),
            purpose: Purpose::Work,
        }
    }

    /// Residence weights used when residence is weighted by class instead of floor area.
    pub fn default_residence() -> Self {
        let mut weights: BTreeMap<CellClass, T> =
            CellClass::ALL.iter().map(|c| (*c, T::zero())).collect();
        weights.insert(CellClass::LowResidential, T::one());
        weights.insert(CellClass::HighResidential, T::of(2.0));
        WeightConfig {
            weights,
            purpose: Purpose::Residence,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if let Some((c, w)) = self
            .weights
            .iter()
            .find(|(_, w)| !w.is_finite() || **w < T::zero())
        {
            return Err(Error::Config(format!(
                "weight for class {c} must be finite and non-negative, got {w}"
            )));
        }
        if !self.weights.values().any(|w| *w > T::zero()) {
            return Err(Error::Config(
                "at least one class weight must be positive".into(),
            ));
        }
        Ok(())
    }

    pub fn weight(&self, class: CellClass) -> Result<T> {
        self.weights
            .get(&class)
            .copied()
            .ok_or_else(|| Error::Config(format!("no weight configured for class {class}")))
    }

    pub fn scaled(&self, factor: T) -> Self {
        WeightConfig {
            weights: self
                .weights
                .iter()
                .map(|(c, w)| (*c, *w * factor))
                .collect(),
            purpose: self.purpose,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Cell<T> {
    pub id: CellId,
    pub row: u32,
    pub col: u32,
    pub centroid: (T, T),
    pub district_id: DistrictId,
    pub landuse_areas: BTreeMap<LandUse, T>,
    pub class: CellClass,
    /// Workplace weight of the cell's class.
    pub weight: T,
}

impl<T: Real> Cell<T> {
    pub fn area(&self, usage: LandUse) -> T {
        self.landuse_areas
            .get(&usage)
            .copied()
            .unwrap_or_else(T::zero)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct District {
    pub id: DistrictId,
    pub name: String,
    /// Sorted cell ids.
    pub cell_ids: Vec<CellId>,
    /// Register employees per industry field.
    pub nace_capacity: BTreeMap<String, u64>,
    pub worker_total: u64,
}

/// Industry-field label and its coherence verdict.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NaceField {
    pub code: String,
    pub coherent: bool,
}

impl NaceField {
    pub fn other() -> Self {
        NaceField {
            code: OTHER_FIELD.to_string(),
            coherent: false,
        }
    }

    pub fn is_other(&self) -> bool {
        self.code == OTHER_FIELD
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Gender {
    #[serde(rename = "M")]
    Male,
    #[serde(rename = "F")]
    Female,
}

impl Gender {
    pub fn code(self) -> &'static str {
        match self {
            Gender::Male => "M",
            Gender::Female => "F",
        }
    }
}

impl FromStr for Gender {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "M" | "MALE" => Ok(Gender::Male),
            "F" | "FEMALE" => Ok(Gender::Female),
            other => Err(Error::Config(format!("unknown gender {other:?}"))),
        }
    }
}

/// One synthetic individual. Optional fields fill in as the pipeline advances.
#[derive(Clone, Debug, PartialEq)]
pub struct Person {
    pub id: PersonId,
    pub age: u32,
    pub gender: Gender,
    pub household_id: HouseholdId,
    pub residence_district: DistrictId,
    pub residence_cell: Option<CellId>,
    pub occupation: Option<String>,
    pub nace: Option<String>,
    /// Field drawn from the census tables, before incoherent fields are pooled.
    pub census_nace: Option<String>,
    pub work_district: Option<DistrictId>,
    pub work_cell_class: Option<CellClass>,
    pub work_cell: Option<CellId>,
}

impl Person {
    pub fn new(
        id: impl Into<PersonId>,
        age: u32,
        gender: Gender,
        household_id: impl Into<HouseholdId>,
        residence_district: impl Into<DistrictId>,
    ) -> Self {
        Person {
            id: id.into(),
            age,
            gender,
            household_id: household_id.into(),
            residence_district: residence_district.into(),
            residence_cell: None,
            occupation: None,
            nace: None,
            census_nace: None,
            work_district: None,
            work_cell_class: None,
            work_cell: None,
        }
    }

    pub fn is_employed(&self) -> bool {
        matches!(&self.occupation, Some(o) if o != NOT_EMPLOYED)
    }

    /// Stage monotonicity: later anchors are only set once earlier ones are.
    pub fn stages_monotone(&self) -> bool {
        (self.work_cell.is_none()
            || (self.work_cell_class.is_some() && self.work_district.is_some()))
            && (self.work_district.is_none() || self.nace.is_some())
            && (self.nace.is_none() || self.occupation.is_some())
    }
}

/// Euclidean centroid distance floored at half a cell side.
pub fn cell_distance<T: Real>(a: &Cell<T>, b: &Cell<T>, cell_size: T) -> T {
    let dx = a.centroid.0 - b.centroid.0;
    let dy = a.centroid.1 - b.centroid.1;
    dx.hypot(dy).max(cell_size / T::of(2.0))
}

/// Normalizes non-negative weights to probabilities; `None` when they sum to zero.
pub fn normalize<T: Real>(weights: &[T]) -> Option<Vec<T>> {
    let total: T = weights.iter().copied().sum();
    if !(total > T::zero()) || !total.is_finite() {
        return None;
    }
    Some(weights.iter().map(|w| *w / total).collect())
}

/// Cells of a square grid grouped into districts.
#[derive(Clone, Debug)]
pub struct Grid<T> {
    cell_size: T,
    cells: Vec<Cell<T>>,
    index: HashMap<CellId, usize>,
    districts: Vec<District>,
    district_cells: Vec<Vec<usize>>,
    district_index: BTreeMap<DistrictId, usize>,
}

impl<T: Real> Grid<T> {
    /// Builds a grid from cells and districts. Districts are sorted by id, cells by id.
    pub fn new(
        cell_size: T,
        mut cells: Vec<Cell<T>>,
        mut districts: Vec<District>,
    ) -> Result<Self> {
        if !(cell_size > T::zero()) {
            return Err(Error::Config(format!(
                "cell_size must be positive, got {cell_size}"
            )));
        }
        cells.sort_by(|a, b| a.id.cmp(&b.id));
        districts.sort_by(|a, b| a.id.cmp(&b.id));
        let mut index = HashMap::with_capacity(cells.len());
        for (i, c) in cells.iter().enumerate() {
            if index.insert(c.id.clone(), i).is_some() {
                return Err(Error::Config(format!("duplicate cell id {}", c.id)));
            }
        }
        let district_index: BTreeMap<DistrictId, usize> = districts
            .iter()
            .enumerate()
            .map(|(i, d)| (d.id.clone(), i))
            .collect();
        if district_index.len() != districts.len() {
            return Err(Error::Config("duplicate district id".into()));
        }
        let mut district_cells = vec![Vec::new(); districts.len()];
        for (i, c) in cells.iter().enumerate() {
            let d = district_index.get(&c.district_id).ok_or_else(|| {
                Error::Config(format!(
                    "cell {} references unknown district {}",
                    c.id, c.district_id
                ))
            })?;
            district_cells[*d].push(i);
        }
        for (d, members) in districts.iter_mut().zip(&district_cells) {
            if members.is_empty() {
                return Err(Error::EmptyDistrict(d.id.0.clone()));
            }
            d.cell_ids = members.iter().map(|i| cells[*i].id.clone()).collect();
        }
        Ok(Grid {
            cell_size,
            cells,
            index,
            districts,
            district_cells,
            district_index,
        })
    }

    pub fn cell_size(&self) -> T {
        self.cell_size
    }

    pub fn min_distance(&self) -> T {
        self.cell_size / T::of(2.0)
    }

    pub fn cells(&self) -> &[Cell<T>] {
        &self.cells
    }

    pub fn districts(&self) -> &[District] {
        &self.districts
    }

    pub fn cell_index(&self, id: &CellId) -> Option<usize> {
        self.index.get(id).copied()
    }

    pub fn cell(&self, id: &CellId) -> Option<&Cell<T>> {
        self.cell_index(id).map(|i| &self.cells[i])
    }

    pub fn district_index(&self, id: &DistrictId) -> Option<usize> {
        self.district_index.get(id).copied()
    }

    pub fn district(&self, id: &DistrictId) -> Option<&District> {
        self.district_index(id).map(|i| &self.districts[i])
    }

    pub fn district_mut(&mut self, id: &DistrictId) -> Option<&mut District> {
        self.district_index(id).map(move |i| &mut self.districts[i])
    }

    /// Indices (into [`Grid::cells`]) of the cells of district number `d`, in id order.
    pub fn district_cell_indices(&self, d: usize) -> &[usize] {
        &self.district_cells[d]
    }

    pub fn distance(&self, a: usize, b: usize) -> T {
        cell_distance(&self.cells[a], &self.cells[b], self.cell_size)
    }

    /// Mean distance from cell `c` to every cell of district `d`.
    pub fn cell_to_district_distance(&self, c: usize, d: usize) -> Result<T> {
        let members = &self.district_cells[d];
        if members.is_empty() {
            return Err(Error::EmptyDistrict(self.districts[d].id.0.clone()));
        }
        let total: T = members.iter().map(|m| self.distance(c, *m)).sum();
        Ok(total / T::of_u64(members.len() as u64))
    }

    /// Cell-by-district matrix of mean distances, row-major by cell index.
    pub fn district_distance_table(&self) -> Vec<Vec<T>> {
        (0..self.cells.len())
            .map(|c| {
                (0..self.districts.len())
                    .map(|d| {
                        self.cell_to_district_distance(c, d)
                            .expect("districts are non-empty by construction")
                    })
                    .collect()
            })
            .collect()
    }

    /// Normalized workplace weights of the cells of district `id`.
    pub fn normalized_cell_weights(
        &self,
        id: &DistrictId,
        weights: &WeightConfig<T>,
    ) -> Result<BTreeMap<CellId, T>> {
        let d = self
            .district_index(id)
            .ok_or_else(|| Error::Config(format!("unknown district {id}")))?;
        let raw = self.class_weights(d, weights)?;
        let probs = normalize(&raw).ok_or_else(|| Error::DegenerateDistrict(id.0.clone()))?;
        Ok(self.district_cells[d]
            .iter()
            .zip(probs)
            .map(|(i, p)| (self.cells[*i].id.clone(), p))
            .collect())
    }

    /// Like [`Grid::normalized_cell_weights`], falling back to uniform probabilities.
    pub fn normalized_cell_weights_or_uniform(
        &self,
        id: &DistrictId,
        weights: &WeightConfig<T>,
    ) -> Result<BTreeMap<CellId, T>> {
        match self.normalized_cell_weights(id, weights) {
            Err(Error::DegenerateDistrict(_)) => {
                log::warn!("district {id} has only zero-weight cells, using uniform cell weights");
                let d = self.district(id).expect("checked above");
                let p = T::one() / T::of_u64(d.cell_ids.len() as u64);
                Ok(d.cell_ids.iter().map(|c| (c.clone(), p)).collect())
            }
            other => other,
        }
    }

    /// Expected workplaces per cell: normalized weight times the district's worker total.
    pub fn expected_workplaces(
        &self,
        id: &DistrictId,
        weights: &WeightConfig<T>,
    ) -> Result<BTreeMap<CellId, T>> {
        let total = T::of_u64(
            self.district(id)
                .ok_or_else(|| Error::Config(format!("unknown district {id}")))?
                .worker_total,
        );
        Ok(self
            .normalized_cell_weights(id, weights)?
            .into_iter()
            .map(|(c, p)| (c, p * total))
            .collect())
    }

    fn class_weights(&self, d: usize, weights: &WeightConfig<T>) -> Result<Vec<T>> {
        self.district_cells[d]
            .iter()
            .map(|i| weights.weight(self.cells[*i].class))
            .collect()
    }
}

/// Centroid of the cell at `(row, col)`.
pub fn centroid<T: Real>(row: u32, col: u32, cell_size: T) -> (T, T) {
    let half = T::of(0.5);
    (
        (T::of(col as f64) + half) * cell_size,
        (T::of(row as f64) + half) * cell_size,
    )
}
