//! Brute-force oracle over the build-phase search space. Each combination
//! is an ordered tree: a leaf per slot, a count per part relation, ordered
//! children and a value per parameter. The space is numbered in mixed radix
//! so it can be split across threads; no relevance is consulted.

use serde::{Deserialize, Serialize};

use crate::domain::{DomainError, DomainSchema};
use crate::par::{self, Parallelism};
use crate::search::{check_relations, ComponentInstance, PartGroup};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Enumeration {
    pub total: u64,
    pub valid: u64,
    pub invalid: u64,
}

/// Number of combinations below each concept and inside each part slot.
struct Space<'a> {
    schema: &'a DomainSchema,
    concept: Vec<u128>,
    /// Per part relation, the number of fillings for each admissible count.
    slot_by_count: Vec<Vec<u128>>,
    slot: Vec<u128>,
}

fn overflow(id: &str) -> DomainError {
    DomainError::InfiniteCardinality(format!("{id} (search space exceeds 128 bits)"))
}

impl<'a> Space<'a> {
    fn new(schema: &'a DomainSchema) -> Result<Self, DomainError> {
        let n = schema.concept_count();
        let mut space = Space {
            schema,
            concept: vec![0; n],
            slot_by_count: vec![Vec::new(); schema.parts().len()],
            slot: vec![0; schema.parts().len()],
        };
        let mut done = vec![false; n];
        for c in 0..n {
            space.size(c, &mut done)?;
        }
        Ok(space)
    }

    // Composition is acyclic, so the recursion terminates.
    fn size(&mut self, c: usize, done: &mut [bool]) -> Result<u128, DomainError> {
        if done[c] {
            return Ok(self.concept[c]);
        }
        let schema = self.schema;
        let id = &schema.concepts()[c].id;
        let children = schema.children_ix(c).to_vec();
        let total = if children.is_empty() {
            let mut prod: u128 = 1;
            for &r in schema.leaf_parts_ix(c) {
                let part = &schema.parts()[r];
                let per = self.size(schema.concept_index(&part.part).expect("validated"), done)?;
                let by_count: Vec<u128> = (part.min..=part.max)
                    .map(|k| per.checked_pow(k).ok_or_else(|| overflow(&part.id)))
                    .collect::<Result<_, _>>()?;
                let slot = by_count.iter().try_fold(0u128, |a, &x| a.checked_add(x)).ok_or_else(|| overflow(&part.id))?;
                self.slot_by_count[r] = by_count;
                self.slot[r] = slot;
                prod = prod.checked_mul(slot).ok_or_else(|| overflow(id))?;
            }
            for &p in schema.leaf_params_ix(c) {
                prod = prod.checked_mul(schema.params()[p].values.len() as u128).ok_or_else(|| overflow(id))?;
            }
            prod
        } else {
            let mut sum: u128 = 0;
            for ch in children {
                sum = sum.checked_add(self.size(ch, done)?).ok_or_else(|| overflow(id))?;
            }
            sum
        };
        self.concept[c] = total;
        done[c] = true;
        Ok(total)
    }

    /// The `index`-th combination below concept `c`.
    fn decode(&self, c: usize, mut index: u128, next_id: &mut u32) -> ComponentInstance {
        let schema = self.schema;
        let mut c = c;
        'descend: loop {
            for &ch in schema.children_ix(c) {
                if index < self.concept[ch] {
                    c = ch;
                    continue 'descend;
                }
                index -= self.concept[ch];
            }
            break;
        }
        let instance_id = *next_id;
        *next_id += 1;
        let mut children = Vec::new();
        for &r in schema.leaf_parts_ix(c) {
            let part = &schema.parts()[r];
            let mut within = index % self.slot[r];
            index /= self.slot[r];
            let mut count = part.min;
            for &fillings in &self.slot_by_count[r] {
                if within < fillings {
                    break;
                }
                within -= fillings;
                count += 1;
            }
            let target = schema.concept_index(&part.part).expect("validated");
            let per = self.concept[target];
            // first child is the most significant digit
            let mut digits = Vec::with_capacity(count as usize);
            for _ in 0..count {
                digits.push(within % per);
                within /= per;
            }
            let components = digits.into_iter().rev().map(|d| self.decode(target, d, next_id)).collect();
            children.push(PartGroup { relation: part.id.clone(), components });
        }
        let mut params = std::collections::BTreeMap::new();
        for &p in schema.leaf_params_ix(c) {
            let def = &schema.params()[p];
            let k = def.values.len() as u128;
            params.insert(def.id.clone(), def.values[(index % k) as usize].clone());
            index /= k;
        }
        ComponentInstance { instance_id, concept: schema.concepts()[c].id.clone(), children, params }
    }
}

/// Size of the search space below `root`, without walking it.
pub fn count_combinations(schema: &DomainSchema, root: &str) -> Result<u128, DomainError> {
    schema.require_root(root)?;
    Ok(Space::new(schema)?.concept[schema.concept_index(root).expect("root exists")])
}

/// The `index`-th combination below `root`, with pre-order instance ids.
pub fn nth_combination(schema: &DomainSchema, root: &str, index: u128) -> Result<Option<ComponentInstance>, DomainError> {
    schema.require_root(root)?;
    let space = Space::new(schema)?;
    let c = schema.concept_index(root).expect("root exists");
    Ok((index < space.concept[c]).then(|| space.decode(c, index, &mut 0)))
}

/// Visits every combination below `root`; with `with_relations` each one is
/// classified by [`check_relations`], otherwise all count as valid.
pub fn enumerate_combinations(
    schema: &DomainSchema,
    root: &str,
    with_relations: bool,
    mode: Parallelism,
) -> Result<Enumeration, DomainError> {
    schema.require_root(root)?;
    let space = Space::new(schema)?;
    let c = schema.concept_index(root).expect("root exists");
    let total = u64::try_from(space.concept[c]).map_err(|_| overflow(root))?;
    let (visited, valid) = par::fold_range(
        mode,
        total,
        (0u64, 0u64),
        |(seen, ok), i| {
            let tree = space.decode(c, i as u128, &mut 0);
            let good = !with_relations || check_relations(schema, &tree).is_empty();
            (seen + 1, ok + u64::from(good))
        },
        |a, b| (a.0 + b.0, a.1 + b.1),
    );
    debug_assert_eq!(visited, total);
    Ok(Enumeration { total: visited, valid, invalid: visited - valid })
}
