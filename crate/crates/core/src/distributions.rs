//! Conditional categorical tables, seedable random streams and categorical samplers.

use std::borrow::Cow;
use std::collections::BTreeMap;

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::model::normalize;
use crate::num::{unit_sum_tolerance, Real};

/// Key value matching any attribute value.
pub const WILDCARD: &str = "*";

/// Row sums further than this from one are rejected at load time.
const MAX_ROW_DRIFT: f64 = 1e-3;

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in bytes {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// A labelled family of random streams derived from one seed.
///
/// Every `(seed, label, key)` triple addresses an independent ChaCha8 stream,
/// so draws for one person never depend on how many other persons were
/// processed before, or on which thread.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RandomStream {
    seed: u64,
    label: String,
    label_hash: u64,
}

impl RandomStream {
    pub fn new(seed: u64, label: impl Into<String>) -> Self {
        let label = label.into();
        let label_hash = fnv1a(label.as_bytes());
        RandomStream {
            seed,
            label,
            label_hash,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    /// Stream for one key (typically a person or household id).
    pub fn split(&self, key: &str) -> Draws {
        let mut seed = [0u8; 32];
        seed[..8].copy_from_slice(&self.seed.to_le_bytes());
        seed[8..16].copy_from_slice(&self.label_hash.to_le_bytes());
        seed[16..24].copy_from_slice(&fnv1a(key.as_bytes()).to_le_bytes());
        seed[24..32].copy_from_slice(&(key.len() as u64).to_le_bytes());
        Draws {
            rng: ChaCha8Rng::from_seed(seed),
        }
    }
}

/// Sequence of uniform draws for one key.
#[derive(Clone, Debug)]
pub struct Draws {
    rng: ChaCha8Rng,
}

impl Draws {
    /// Uniform in `[0, 1)` with 53 bits of resolution.
    pub fn next_f64(&mut self) -> f64 {
        (self.rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub fn next_unit<T: Real>(&mut self) -> T {
        T::of(self.next_f64())
    }

    pub fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }
}

/// Index selected by inverse-CDF lookup of `u` in `probs`.
///
/// Never returns a zero-probability index, including when rounding leaves
/// the cumulative sum just below `u`.
pub fn inverse_cdf<T: Real>(probs: &[T], u: T) -> usize {
    let mut acc = T::zero();
    let mut last_positive = 0;
    for (i, p) in probs.iter().enumerate() {
        if *p > T::zero() {
            acc += *p;
            last_positive = i;
            if u < acc {
                return i;
            }
        }
    }
    last_positive
}

fn check_normalized<T: Real>(probs: &[T]) -> Result<()> {
    let sum: T = probs.iter().copied().sum();
    if probs.is_empty()
        || probs.iter().any(|p| *p < T::zero() || !p.is_finite())
        || (sum - T::one()).abs() > unit_sum_tolerance::<T>()
    {
        return Err(Error::NotNormalized { sum: sum.as_f64() });
    }
    Ok(())
}

/// Draws an index from a normalized probability vector.
pub fn sample_categorical<T: Real>(probs: &[T], draws: &mut Draws) -> Result<usize> {
    check_normalized(probs)?;
    Ok(inverse_cdf(probs, draws.next_unit::<T>()))
}

/// Draws an index with probability proportional to non-negative `weights`.
pub fn sample_weighted<T: Real>(weights: &[T], draws: &mut Draws) -> Option<usize> {
    let probs = normalize(weights)?;
    Some(inverse_cdf(&probs, draws.next_unit::<T>()))
}

/// Draws a bin from `probs` restricted to bins with remaining capacity, then
/// takes one unit from that bin.
///
/// When no bin with capacity has positive probability the draw falls back to
/// weights proportional to the remaining capacities, so totals are still met.
pub fn sample_capacity_constrained<T: Real>(
    probs: &[T],
    capacities: &mut [u64],
    draws: &mut Draws,
) -> Result<usize> {
    if probs.len() != capacities.len() {
        return Err(Error::Internal(format!(
            "{} probabilities for {} capacity bins",
            probs.len(),
            capacities.len()
        )));
    }
    if capacities.iter().all(|c| *c == 0) {
        return Err(Error::CapacityExhausted);
    }
    let u = draws.next_unit::<T>();
    let masked: Vec<T> = probs
        .iter()
        .zip(capacities.iter())
        .map(|(p, c)| if *c > 0 { p.max(T::zero()) } else { T::zero() })
        .collect();
    let bin = match normalize(&masked) {
        Some(p) => inverse_cdf(&p, u),
        None => {
            let by_capacity: Vec<T> = capacities.iter().map(|c| T::of_u64(*c)).collect();
            let p = normalize(&by_capacity).expect("some capacity is positive");
            inverse_cdf(&p, u)
        }
    };
    capacities[bin] -= 1;
    Ok(bin)
}

/// Conditional categorical distribution `P(outcome | key attributes)`.
#[derive(Clone, Debug, PartialEq)]
pub struct ConditionalTable<T> {
    pub name: String,
    pub key_attributes: Vec<String>,
    pub outcomes: Vec<String>,
    pub rows: BTreeMap<Vec<String>, Vec<T>>,
}

impl<T: Real> ConditionalTable<T> {
    /// Builds a table from long-format `(key, outcome, probability)` records.
    ///
    /// Rows off by at most 1e-3 are renormalized with a warning; larger
    /// deviations are rejected.
    pub fn from_records<I>(name: &str, key_attributes: Vec<String>, records: I) -> Result<Self>
    where
        I: IntoIterator<Item = (Vec<String>, String, T)>,
    {
        let mut outcomes: Vec<String> = Vec::new();
        let mut outcome_index: BTreeMap<String, usize> = BTreeMap::new();
        let mut cells: BTreeMap<Vec<String>, BTreeMap<usize, T>> = BTreeMap::new();
        for (key, outcome, p) in records {
            if key.len() != key_attributes.len() {
                return Err(Error::ArityMismatch {
                    table: name.to_string(),
                    expected: key_attributes.len(),
                    got: key.len(),
                });
            }
            if !p.is_finite() || p < T::zero() {
                return Err(Error::Config(format!(
                    "table {name}: probability {p} for {key:?} -> {outcome} is not a non-negative number"
                )));
            }
            let idx = *outcome_index.entry(outcome.clone()).or_insert_with(|| {
                outcomes.push(outcome.clone());
                outcomes.len() - 1
            });
            if cells
                .entry(key.clone())
                .or_default()
                .insert(idx, p)
                .is_some()
            {
                return Err(Error::Config(format!(
                    "table {name}: duplicate entry for {key:?} -> {outcome}"
                )));
            }
        }
        let mut rows = BTreeMap::new();
        for (key, entries) in cells {
            let mut row = vec![T::zero(); outcomes.len()];
            for (i, p) in entries {
                row[i] = p;
            }
            let sum: T = row.iter().copied().sum();
            let drift = (sum - T::one()).abs().as_f64();
            if drift > MAX_ROW_DRIFT {
                return Err(Error::Config(format!(
                    "table {name}: row {key:?} sums to {sum}"
                )));
            }
            if drift > 1e-9 {
                log::warn!("table {name}: renormalizing row {key:?} (sum {sum})");
                row.iter_mut().for_each(|p| *p /= sum);
            }
            rows.insert(key, row);
        }
        Ok(ConditionalTable {
            name: name.to_string(),
            key_attributes,
            outcomes,
            rows,
        })
    }

    pub fn outcome_index(&self, outcome: &str) -> Option<usize> {
        self.outcomes.iter().position(|o| o == outcome)
    }

    /// Distribution for `key`.
    ///
    /// Resolution order: the exact row; the most specific row whose `*`
    /// entries cover the key; then the mean of the rows matching the key
    /// after marginalizing attributes one at a time (last attribute first,
    /// then from the first onwards). At least one attribute always stays bound.
    pub fn lookup<S: AsRef<str>>(&self, key: &[S]) -> Result<Cow<'_, [T]>> {
        self.lookup_with(key, true)
    }

    /// [`ConditionalTable::lookup`] with marginal backoff optionally disabled.
    pub fn lookup_with<S: AsRef<str>>(&self, key: &[S], backoff: bool) -> Result<Cow<'_, [T]>> {
        if key.len() != self.key_attributes.len() {
            return Err(Error::ArityMismatch {
                table: self.name.clone(),
                expected: self.key_attributes.len(),
                got: key.len(),
            });
        }
        let key: Vec<&str> = key.iter().map(|k| k.as_ref()).collect();
        let owned: Vec<String> = key.iter().map(|k| k.to_string()).collect();
        if let Some(row) = self.rows.get(&owned) {
            return Ok(Cow::Borrowed(row));
        }
        let free = vec![false; key.len()];
        if let Some(row) = self.best_wildcard_row(&key, &free) {
            return Ok(Cow::Borrowed(row));
        }
        let n = if backoff { key.len() } else { 0 };
        let mut order: Vec<usize> = Vec::with_capacity(n);
        if n > 0 {
            order.push(n - 1);
            order.extend(0..n - 1);
        }
        let mut free = free;
        for pos in order.into_iter().take(n.saturating_sub(1)) {
            free[pos] = true;
            if let Some(row) = self.marginal(&key, &free) {
                return Ok(Cow::Owned(row));
            }
        }
        Err(Error::MissingDistribution {
            table: self.name.clone(),
            key: owned,
        })
    }

    fn matches(row_key: &[String], key: &[&str], free: &[bool]) -> bool {
        row_key
            .iter()
            .zip(key)
            .zip(free)
            .all(|((r, k), f)| *f || r == WILDCARD || r == k)
    }

    fn best_wildcard_row(&self, key: &[&str], free: &[bool]) -> Option<&Vec<T>> {
        self.rows
            .iter()
            .filter(|(k, _)| Self::matches(k, key, free))
            .min_by_key(|(k, _)| k.iter().filter(|v| *v == WILDCARD).count())
            .map(|(_, row)| row)
    }

    fn marginal(&self, key: &[&str], free: &[bool]) -> Option<Vec<T>> {
        let mut acc = vec![T::zero(); self.outcomes.len()];
        let mut n = 0u64;
        for (k, row) in &self.rows {
            if Self::matches(k, key, free) {
                acc.iter_mut().zip(row).for_each(|(a, p)| *a += *p);
                n += 1;
            }
        }
        if n == 0 {
            return None;
        }
        normalize(&acc)
    }
}
