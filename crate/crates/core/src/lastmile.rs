//! Work-cell assignment inside the already chosen work district.

use std::collections::BTreeMap;

use rayon::prelude::*;

use crate::distributions::{inverse_cdf, RandomStream};
use crate::error::{Error, Result};
use crate::model::{normalize, CellClass, Grid, Person, WeightConfig};
use crate::num::Real;

pub const LASTMILE_STREAM: &str = "lastmile";

/// Class probabilities: summed class weight over the district's total weight.
///
/// A district whose cells all weigh zero gets a uniform distribution over
/// the classes present. Classes are returned in [`CellClass`] order.
pub fn class_probabilities<T: Real>(cells: &[(CellClass, T)]) -> Vec<(CellClass, T)> {
    let mut sums: BTreeMap<CellClass, T> = BTreeMap::new();
    for (c, w) in cells {
        *sums.entry(*c).or_insert_with(T::zero) += *w;
    }
    let classes: Vec<CellClass> = sums.keys().copied().collect();
    let weights: Vec<T> = sums.values().copied().collect();
    let probs = normalize(&weights).unwrap_or_else(|| {
        let n = T::of_u64(weights.len() as u64);
        vec![T::one() / n; weights.len()]
    });
    classes.into_iter().zip(probs).collect()
}

/// Inverse-distance probabilities `d^-exponent`, normalized over the candidates.
pub fn inverse_distance_probabilities<T: Real>(distances: &[T], exponent: T) -> Vec<T> {
    let w: Vec<T> = distances.iter().map(|d| d.powf(-exponent)).collect();
    normalize(&w).expect("distances are floored at a positive minimum")
}

/// Per-district class distribution and candidate cells of each class.
#[derive(Clone, Debug)]
pub struct DistrictLayout {
    pub classes: Vec<(CellClass, f64)>,
    pub cells_by_class: BTreeMap<CellClass, Vec<usize>>,
}

impl DistrictLayout {
    pub fn new(grid: &Grid<f64>, d: usize, weights: &WeightConfig<f64>) -> Result<Self> {
        let mut cells_by_class: BTreeMap<CellClass, Vec<usize>> = BTreeMap::new();
        let mut weighted = Vec::new();
        for i in grid.district_cell_indices(d) {
            let class = grid.cells()[*i].class;
            cells_by_class.entry(class).or_default().push(*i);
            weighted.push((class, weights.weight(class)?));
        }
        Ok(DistrictLayout {
            classes: class_probabilities(&weighted),
            cells_by_class,
        })
    }

    pub fn class_probs(&self) -> Vec<f64> {
        self.classes.iter().map(|(_, p)| *p).collect()
    }
}

/// Probability of each candidate cell of `class` for a worker living in `home`.
pub fn work_cell_probabilities(
    grid: &Grid<f64>,
    layout: &DistrictLayout,
    class: CellClass,
    home: usize,
    exponent: f64,
) -> Option<(Vec<usize>, Vec<f64>)> {
    let candidates = layout.cells_by_class.get(&class)?;
    let distances: Vec<f64> = candidates.iter().map(|c| grid.distance(home, *c)).collect();
    Some((
        candidates.clone(),
        inverse_distance_probabilities(&distances, exponent),
    ))
}

/// Sets `work_cell_class` and `work_cell` for every person with a work district.
pub fn assign_work_cells(
    persons: &mut [Person],
    grid: &Grid<f64>,
    weights: &WeightConfig<f64>,
    exponent: f64,
    seed: u64,
) -> Result<()> {
    let layouts: Vec<DistrictLayout> = (0..grid.districts().len())
        .map(|d| DistrictLayout::new(grid, d, weights))
        .collect::<Result<_>>()?;
    let stream = RandomStream::new(seed, LASTMILE_STREAM);
    persons
        .par_iter_mut()
        .filter(|p| p.work_district.is_some())
        .try_for_each(|p| {
            let district = p.work_district.as_ref().expect("filtered");
            let d = grid
                .district_index(district)
                .ok_or_else(|| Error::Internal(format!("unknown work district {district}")))?;
            let home_id = p.residence_cell.as_ref().ok_or_else(|| {
                Error::StageIncomplete(format!("person {} has no residence cell", p.id))
            })?;
            let home = grid
                .cell_index(home_id)
                .ok_or_else(|| Error::Internal(format!("unknown residence cell {home_id}")))?;
            let layout = &layouts[d];
            let mut draws = stream.split(p.id.as_str());
            let k = inverse_cdf(&layout.class_probs(), draws.next_f64());
            let class = layout.classes[k].0;
            let (cells, probs) = work_cell_probabilities(grid, layout, class, home, exponent)
                .ok_or_else(|| Error::Internal(format!("no {class} cell in {district}")))?;
            let m = cells[inverse_cdf(&probs, draws.next_f64())];
            p.work_cell_class = Some(class);
            p.work_cell = Some(grid.cells()[m].id.clone());
            Ok(())
        })
}
