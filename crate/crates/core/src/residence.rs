//! Disaggregation of district residents to grid cells.
//!
//! Households are the allocation unit: a district's expected residents per
//! cell (normalized residential weight times district population) are filled
//! greedily, largest household first, always into the cell with the largest
//! remaining deficit. With single-person households this is exactly
//! largest-remainder rounding with ties broken by cell id.

use std::collections::{BTreeMap, HashMap};

use rayon::prelude::*;

use crate::distributions::RandomStream;
use crate::error::{Error, Result};
use crate::model::{
    normalize, CellId, DistrictId, Grid, HouseholdId, LandUse, Person, WeightConfig,
};

pub const RESIDENCE_STREAM: &str = "residence";

/// How residential attractiveness of a cell is measured.
#[derive(Clone, Debug)]
pub enum ResidenceWeights {
    FloorArea,
    Class(WeightConfig<f64>),
}

impl ResidenceWeights {
    /// Weights of the cells of district number `d`, in the grid's cell order.
    pub fn district_weights(&self, grid: &Grid<f64>, d: usize) -> Result<Vec<f64>> {
        grid.district_cell_indices(d)
            .iter()
            .map(|i| {
                let cell = &grid.cells()[*i];
                match self {
                    ResidenceWeights::FloorArea => Ok(cell.area(LandUse::Residential)),
                    ResidenceWeights::Class(w) => w.weight(cell.class),
                }
            })
            .collect()
    }

    fn district_probabilities(&self, grid: &Grid<f64>, d: usize) -> Result<Vec<f64>> {
        let w = self.district_weights(grid, d)?;
        Ok(normalize(&w).unwrap_or_else(|| {
            log::warn!(
                "district {} has no residential weight, spreading residents uniformly",
                grid.districts()[d].id
            );
            vec![1.0 / w.len() as f64; w.len()]
        }))
    }
}

/// Assigns each household size (taken in the given order) to a cell index.
///
/// `probs` are the normalized cell weights; quotas are `probs * Σ sizes`.
pub fn allocate_households(probs: &[f64], sizes: &[u64]) -> Vec<usize> {
    let total: u64 = sizes.iter().sum();
    let mut deficit: Vec<f64> = probs.iter().map(|p| p * total as f64).collect();
    sizes
        .iter()
        .map(|s| {
            let mut best = 0;
            for (i, d) in deficit.iter().enumerate() {
                if *d > deficit[best] {
                    best = i;
                }
            }
            deficit[best] -= *s as f64;
            best
        })
        .collect()
}

fn sorted_desc(sizes: &[u64]) -> Vec<u64> {
    let mut s = sizes.to_vec();
    s.sort_unstable_by(|a, b| b.cmp(a));
    s
}

/// Integer residents per cell of `district`, summing to the total household size.
pub fn allocate_resident_counts(
    grid: &Grid<f64>,
    district: &DistrictId,
    weights: &ResidenceWeights,
    household_sizes: &[u64],
) -> Result<BTreeMap<CellId, u64>> {
    let d = grid
        .district_index(district)
        .ok_or_else(|| Error::Config(format!("unknown district {district}")))?;
    let probs = weights.district_probabilities(grid, d)?;
    let sizes = sorted_desc(household_sizes);
    let slots = allocate_households(&probs, &sizes);
    let cells = grid.district_cell_indices(d);
    let mut counts: BTreeMap<CellId, u64> = cells
        .iter()
        .map(|i| (grid.cells()[*i].id.clone(), 0))
        .collect();
    for (slot, size) in slots.iter().zip(&sizes) {
        *counts
            .get_mut(&grid.cells()[cells[*slot]].id)
            .expect("district cell") += size;
    }
    Ok(counts)
}

/// Sets `residence_cell` for every person. Returns the per-cell resident counts.
///
/// Within a district, which household lands in which of the allocated slots
/// is decided by a per-household random key, so equal-size households are
/// exchangeable.
pub fn assign_residence_cells(
    persons: &mut [Person],
    grid: &Grid<f64>,
    weights: &ResidenceWeights,
    seed: u64,
) -> Result<BTreeMap<CellId, u64>> {
    let stream = RandomStream::new(seed, RESIDENCE_STREAM);
    let mut by_district: Vec<BTreeMap<&HouseholdId, u64>> =
        vec![BTreeMap::new(); grid.districts().len()];
    for p in persons.iter() {
        let d = grid.district_index(&p.residence_district).ok_or_else(|| {
            Error::Internal(format!(
                "person {} lives in unknown district {}",
                p.id, p.residence_district
            ))
        })?;
        *by_district[d].entry(&p.household_id).or_default() += 1;
    }

    let placements: Vec<Vec<(HouseholdId, usize)>> = by_district
        .par_iter()
        .enumerate()
        .map(|(d, households)| {
            if households.is_empty() {
                return Ok(Vec::new());
            }
            let probs = weights.district_probabilities(grid, d)?;
            let mut order: Vec<(u64, u64, &HouseholdId)> = households
                .iter()
                .map(|(h, n)| (*n, stream.split(h.as_str()).next_u64(), *h))
                .collect();
            order.sort_unstable_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(b.2)));
            let sizes: Vec<u64> = order.iter().map(|o| o.0).collect();
            let slots = allocate_households(&probs, &sizes);
            let cells = grid.district_cell_indices(d);
            Ok(order
                .iter()
                .zip(slots)
                .map(|((_, _, h), s)| ((*h).clone(), cells[s]))
                .collect())
        })
        .collect::<Result<_>>()?;

    let home: HashMap<HouseholdId, usize> = placements.into_iter().flatten().collect();
    let mut counts: BTreeMap<CellId, u64> = BTreeMap::new();
    for p in persons.iter_mut() {
        let cell = &grid.cells()[home[&p.household_id]];
        p.residence_cell = Some(cell.id.clone());
        *counts.entry(cell.id.clone()).or_default() += 1;
    }
    Ok(counts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::apportion::largest_remainder;
    use crate::model::{centroid, Cell, CellClass, District, Gender};
    use proptest::prelude::*;

    fn grid_with_areas(areas: &[f64]) -> Grid<f64> {
        let cells = areas
            .iter()
            .enumerate()
            .map(|(i, a)| Cell {
                id: format!("c{i:02}").into(),
                row: 0,
                col: i as u32,
                centroid: centroid(0, i as u32, 500.0),
                district_id: "D".into(),
                landuse_areas: [(LandUse::Residential, *a)].into_iter().collect(),
                class: CellClass::LowResidential,
                weight: 1.0,
            })
            .collect();
        let d = District {
            id: "D".into(),
            name: "D".into(),
            cell_ids: vec![],
            nace_capacity: BTreeMap::new(),
            worker_total: 0,
        };
        Grid::new(500.0, cells, vec![d]).unwrap()
    }

    fn counts_vec(c: &BTreeMap<CellId, u64>) -> Vec<u64> {
        c.values().copied().collect()
    }

    #[test]
    fn three_to_one_split() {
        let g = grid_with_areas(&[3.0, 1.0]);
        let c = allocate_resident_counts(&g, &"D".into(), &ResidenceWeights::FloorArea, &[1; 100])
            .unwrap();
        assert_eq!(counts_vec(&c), vec![75, 25]);
    }

    #[test]
    fn odd_total_tie_goes_to_first_cell() {
        let g = grid_with_areas(&[1.0, 1.0]);
        let c = allocate_resident_counts(&g, &"D".into(), &ResidenceWeights::FloorArea, &[1; 101])
            .unwrap();
        assert_eq!(counts_vec(&c), vec![51, 50]);
    }

    #[test]
    fn zero_population() {
        let g = grid_with_areas(&[1.0, 2.0]);
        let c =
            allocate_resident_counts(&g, &"D".into(), &ResidenceWeights::FloorArea, &[]).unwrap();
        assert_eq!(counts_vec(&c), vec![0, 0]);
    }

    #[test]
    fn zero_weight_cell_gets_nobody() {
        let g = grid_with_areas(&[3.0, 0.0]);
        let mut persons: Vec<Person> = (0..4)
            .map(|i| Person::new(format!("p{i}"), 30, Gender::Male, format!("h{i}"), "D"))
            .collect();
        let c = assign_residence_cells(&mut persons, &g, &ResidenceWeights::FloorArea, 1).unwrap();
        assert_eq!(c.get(&CellId::from("c01")), None);
        assert!(persons
            .iter()
            .all(|p| p.residence_cell == Some("c00".into())));
    }

    #[test]
    fn exact_counts_and_household_of_three() {
        let g = grid_with_areas(&[3.0, 1.0]);
        let mut persons = vec![
            Person::new("a", 30, Gender::Male, "h1", "D"),
            Person::new("b", 31, Gender::Female, "h1", "D"),
            Person::new("c", 5, Gender::Female, "h1", "D"),
            Person::new("d", 60, Gender::Female, "h2", "D"),
        ];
        let c = assign_residence_cells(&mut persons, &g, &ResidenceWeights::FloorArea, 7).unwrap();
        assert_eq!(counts_vec(&c), vec![3, 1]);
        assert!(persons[..3]
            .iter()
            .all(|p| p.residence_cell == Some("c00".into())));
        assert_eq!(persons[3].residence_cell, Some("c01".into()));
    }

    #[test]
    fn degenerate_district_is_uniform() {
        let g = grid_with_areas(&[0.0, 0.0]);
        let c = allocate_resident_counts(&g, &"D".into(), &ResidenceWeights::FloorArea, &[1; 10])
            .unwrap();
        assert_eq!(counts_vec(&c), vec![5, 5]);
    }

    #[test]
    fn class_weighting_mode() {
        let g = grid_with_areas(&[0.0, 0.0]);
        let w = ResidenceWeights::Class(WeightConfig::default_residence());
        let c = allocate_resident_counts(&g, &"D".into(), &w, &[1; 10]).unwrap();
        assert_eq!(counts_vec(&c), vec![5, 5]);
    }

    proptest! {
        #[test]
        fn unit_households_match_largest_remainder(
            weights in prop::collection::vec(0.0f64..50.0, 1..10),
            total in 0usize..400,
        ) {
            prop_assume!(weights.iter().any(|w| *w > 0.0));
            let probs = normalize(&weights).unwrap();
            let slots = allocate_households(&probs, &vec![1; total]);
            let mut counts = vec![0u64; weights.len()];
            for s in slots { counts[s] += 1; }
            prop_assert_eq!(counts, largest_remainder(&weights, total as u64).unwrap());
        }

        #[test]
        fn households_conserve_and_stay_near_quota(
            weights in prop::collection::vec(0.1f64..50.0, 1..8),
            sizes in prop::collection::vec(1u64..5, 0..60),
        ) {
            let sizes = sorted_desc(&sizes);
            let probs = normalize(&weights).unwrap();
            let total: u64 = sizes.iter().sum();
            let slots = allocate_households(&probs, &sizes);
            let mut counts = vec![0u64; weights.len()];
            for (s, n) in slots.iter().zip(&sizes) { counts[*s] += n; }
            prop_assert_eq!(counts.iter().sum::<u64>(), total);
            let largest = sizes.first().copied().unwrap_or(0) as f64;
            for (c, p) in counts.iter().zip(&probs) {
                prop_assert!((*c as f64) < p * total as f64 + largest + 1e-9);
            }
        }
    }
}
