//! Mixed-dataset composition under an object-count balance constraint.
//!
//! Each source is shuffled with a seeded ChaCha stream and its first
//! `quota` images are taken. With a target object count, greedy swap passes
//! then exchange a selected image for an unselected one from the same
//! source, always taking the swap that brings the total closest to the
//! target (ties: lexicographically smallest `(removed id, added id)`). If the
//! swaps stall outside the tolerance, an exact subset-sum search over both
//! sources picks the closest reachable total and rebuilds the selection,
//! preferring images early in the shuffled order.

use std::collections::{BTreeMap, BTreeSet, HashSet};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::annotations::Dataset;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CompositionSpec {
    /// Images to take from each source, keyed by dataset name.
    pub per_source_image_quota: BTreeMap<String, usize>,
    pub target_object_count: Option<usize>,
    /// Allowed `|achieved - target|`, in objects.
    pub balance_tolerance: usize,
}

impl CompositionSpec {
    pub fn new(quotas: impl IntoIterator<Item = (String, usize)>) -> Self {
        CompositionSpec {
            per_source_image_quota: quotas.into_iter().collect(),
            target_object_count: None,
            balance_tolerance: 0,
        }
    }

    /// Sets the target and the default tolerance of 1% of it.
    pub fn with_target(mut self, target: usize) -> Self {
        self.target_object_count = Some(target);
        self.balance_tolerance = default_tolerance(target);
        self
    }

    pub fn with_tolerance(mut self, tolerance: usize) -> Self {
        self.balance_tolerance = tolerance;
        self
    }
}

/// 1% of the target, rounded down.
pub fn default_tolerance(target: usize) -> usize {
    target / 100
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Composition {
    pub dataset: Dataset,
    /// Images taken per source name.
    pub per_source_images: BTreeMap<String, usize>,
    pub object_count: usize,
    pub target_object_count: Option<usize>,
    pub balance_tolerance: usize,
}

impl Composition {
    pub fn within_tolerance(&self) -> bool {
        self.target_object_count
            .is_none_or(|t| self.object_count.abs_diff(t) <= self.balance_tolerance)
    }
}

struct Source<'a> {
    data: &'a Dataset,
    /// Object count per image, by dataset index.
    objects: Vec<usize>,
    /// Dataset indices in shuffled order.
    order: Vec<usize>,
    selected: BTreeSet<usize>,
}

impl Source<'_> {
    fn id(&self, idx: usize) -> &str {
        &self.data.images[idx].image_id
    }

    fn total(&self) -> usize {
        self.selected.iter().map(|&i| self.objects[i]).sum()
    }
}

pub fn compose_mixed(
    a: &Dataset,
    b: &Dataset,
    spec: &CompositionSpec,
    seed: u64,
) -> Result<Composition> {
    if a.name == b.name {
        return Err(Error::Composition(format!(
            "both sources are named `{}`; quotas are keyed by name",
            a.name
        )));
    }
    if a.categories != b.categories {
        return Err(Error::CategoryMismatch(a.name.clone(), b.name.clone()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut sources = Vec::with_capacity(2);
    for d in [a, b] {
        let quota = *spec
            .per_source_image_quota
            .get(&d.name)
            .ok_or_else(|| Error::Composition(format!("no quota given for source `{}`", d.name)))?;
        if quota == 0 {
            return Err(Error::Composition(format!(
                "quota for `{}` must be positive",
                d.name
            )));
        }
        if quota > d.images.len() {
            return Err(Error::Composition(format!(
                "quota {quota} exceeds the {} images of `{}`",
                d.images.len(),
                d.name
            )));
        }
        let mut order: Vec<usize> = (0..d.images.len()).collect();
        order.shuffle(&mut rng);
        sources.push(Source {
            data: d,
            objects: d.images.iter().map(|i| i.ground_truth.len()).collect(),
            selected: order[..quota].iter().copied().collect(),
            order,
        });
    }
    if let Some(extra) = spec
        .per_source_image_quota
        .keys()
        .find(|k| **k != a.name && **k != b.name)
    {
        return Err(Error::Composition(format!(
            "quota given for unknown source `{extra}`"
        )));
    }

    let ids_a: HashSet<&str> = a.images.iter().map(|i| i.image_id.as_str()).collect();
    if let Some(dup) = b
        .images
        .iter()
        .find(|i| ids_a.contains(i.image_id.as_str()))
    {
        return Err(Error::DuplicateImage(dup.image_id.clone()));
    }

    if let Some(target) = spec.target_object_count {
        balance(&mut sources, target, spec.balance_tolerance);
    }

    let object_count = sources.iter().map(Source::total).sum();
    let mut images = Vec::new();
    let mut per_source_images = BTreeMap::new();
    for s in &sources {
        per_source_images.insert(s.data.name.clone(), s.selected.len());
        images.extend(s.selected.iter().map(|&i| s.data.images[i].clone()));
    }
    let quotas = sources
        .iter()
        .map(|s| format!("{}:{}", s.data.name, s.selected.len()))
        .collect::<Vec<_>>()
        .join("+");
    Ok(Composition {
        dataset: Dataset {
            name: format!("mixed({quotas},seed={seed})"),
            categories: a.categories.clone(),
            images,
        },
        per_source_images,
        object_count,
        target_object_count: spec.target_object_count,
        balance_tolerance: spec.balance_tolerance,
    })
}

fn gap(total: usize, target: usize) -> i64 {
    total as i64 - target as i64
}

fn balance(sources: &mut [Source<'_>], target: usize, tolerance: usize) {
    let mut total: usize = sources.iter().map(Source::total).sum();
    while gap(total, target).unsigned_abs() as usize > tolerance {
        match best_swap(sources, total, target) {
            Some((s, out, inn)) => {
                let src = &mut sources[s];
                src.selected.remove(&out);
                src.selected.insert(inn);
                total = total - src.objects[out] + src.objects[inn];
            }
            None => break,
        }
    }
    if gap(total, target).unsigned_abs() as usize > tolerance {
        exact_rebalance(sources, total, target);
    }
}

/// `(source, image out, image in)`.
type Swap = (usize, usize, usize);

/// Strictly improving swap with the smallest resulting gap.
fn best_swap(sources: &[Source<'_>], total: usize, target: usize) -> Option<Swap> {
    let current = gap(total, target).unsigned_abs();
    let mut best: Option<(u64, &str, &str, Swap)> = None;
    for (s, src) in sources.iter().enumerate() {
        // Only one representative per object count matters: the smallest id.
        let mut out_by_count: BTreeMap<usize, usize> = BTreeMap::new();
        let mut in_by_count: BTreeMap<usize, usize> = BTreeMap::new();
        for idx in 0..src.objects.len() {
            let slot = if src.selected.contains(&idx) {
                out_by_count.entry(src.objects[idx])
            } else {
                in_by_count.entry(src.objects[idx])
            };
            slot.and_modify(|e| {
                if src.id(idx) < src.id(*e) {
                    *e = idx;
                }
            })
            .or_insert(idx);
        }
        for (&out_count, &out) in &out_by_count {
            for (&in_count, &inn) in &in_by_count {
                let after = gap(total - out_count + in_count, target).unsigned_abs();
                if after >= current {
                    continue;
                }
                let key = (after, src.id(out), src.id(inn));
                if best.as_ref().is_none_or(|b| key < (b.0, b.1, b.2)) {
                    best = Some((key.0, key.1, key.2, (s, out, inn)));
                }
            }
        }
    }
    best.map(|b| b.3)
}

/// Bitset over reachable sums.
#[derive(Clone)]
struct SumSet(Vec<u64>);

impl SumSet {
    fn with_capacity(max_sum: usize) -> Self {
        SumSet(vec![0; max_sum / 64 + 1])
    }

    fn get(&self, s: usize) -> bool {
        self.0.get(s / 64).is_some_and(|w| w >> (s % 64) & 1 == 1)
    }

    fn set(&mut self, s: usize) {
        self.0[s / 64] |= 1 << (s % 64);
    }

    /// `self |= other << shift`
    fn or_shifted(&mut self, other: &SumSet, shift: usize) {
        let (words, bits) = (shift / 64, shift % 64);
        for i in (words..self.0.len()).rev() {
            let src = i - words;
            let mut v = other.0[src] << bits;
            if bits > 0 && src > 0 {
                v |= other.0[src - 1] >> (64 - bits);
            }
            self.0[i] |= v;
        }
    }
}

/// `reach[i][k]`: sums reachable by picking `k` images from `order[i..]`.
fn suffix_reach(objects: &[usize], order: &[usize], quota: usize) -> Vec<Vec<SumSet>> {
    let max_sum: usize = objects.iter().sum();
    let n = order.len();
    let empty = SumSet::with_capacity(max_sum);
    let mut reach = vec![vec![empty.clone(); quota + 1]; n + 1];
    reach[n][0].set(0);
    for i in (0..n).rev() {
        let c = objects[order[i]];
        let (head, tail) = reach.split_at_mut(i + 1);
        let (cur, next) = (&mut head[i], &tail[0]);
        for k in 0..=quota {
            cur[k] = next[k].clone();
            if k > 0 {
                cur[k].or_shifted(&next[k - 1], c);
            }
        }
    }
    reach
}

fn reachable_totals(reach: &[Vec<SumSet>], quota: usize, max_sum: usize) -> Vec<usize> {
    (0..=max_sum).filter(|&s| reach[0][quota].get(s)).collect()
}

/// Picks `quota` images summing to exactly `sum`, earliest in `order` first.
fn reconstruct(
    reach: &[Vec<SumSet>],
    objects: &[usize],
    order: &[usize],
    quota: usize,
    sum: usize,
) -> BTreeSet<usize> {
    let mut picked = BTreeSet::new();
    let (mut k, mut s) = (quota, sum);
    for (i, &idx) in order.iter().enumerate() {
        if k == 0 {
            break;
        }
        let c = objects[idx];
        if c <= s && reach[i + 1][k - 1].get(s - c) {
            picked.insert(idx);
            k -= 1;
            s -= c;
        }
    }
    picked
}

fn exact_rebalance(sources: &mut [Source<'_>], total: usize, target: usize) {
    let tables: Vec<_> = sources
        .iter()
        .map(|s| {
            let quota = s.selected.len();
            let reach = suffix_reach(&s.objects, &s.order, quota);
            let totals = reachable_totals(&reach, quota, s.objects.iter().sum());
            (reach, totals)
        })
        .collect();
    let mut best: Option<(u64, usize, usize)> = None;
    for &sa in &tables[0].1 {
        for &sb in &tables[1].1 {
            let key = (gap(sa + sb, target).unsigned_abs(), sa, sb);
            if best.is_none_or(|b| key < b) {
                best = Some(key);
            }
        }
    }
    let Some((after, sa, sb)) = best else { return };
    if after >= gap(total, target).unsigned_abs() {
        return;
    }
    for (src, (table, sum)) in sources
        .iter_mut()
        .zip([(&tables[0].0, sa), (&tables[1].0, sb)])
    {
        let quota = src.selected.len();
        src.selected = reconstruct(table, &src.objects, &src.order, quota, sum);
    }
}

/// Image ids present in both datasets, sorted. Empty means disjoint.
pub fn check_disjoint(train: &Dataset, test: &Dataset) -> BTreeSet<String> {
    let train_ids: HashSet<&str> = train.images.iter().map(|i| i.image_id.as_str()).collect();
    test.images
        .iter()
        .filter(|i| train_ids.contains(i.image_id.as_str()))
        .map(|i| i.image_id.clone())
        .collect()
}
