//! Norms of interpolation spaces on sequences: the discrete Janson norm over
//! a discretizing sequence, two-scale block norms `ℓp(ℓq^{M_k}(weight))`, and
//! the block-space right-hand side of the weighted-couple equivalence.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::discretize::{BlockPartition, DiscretizingSequence};
use crate::error::{Error, Result};
use crate::exponent::Exponent;
use crate::kfunc::{KFunctional, WeightedSeqCouple};
use crate::qcfn::QuasiConcaveFn;
use crate::vector::SeqVector;

/// Tail estimates above this fraction of the value are flagged.
pub const TAIL_FLAG: f64 = 1e-6;

/// `E = ℓp(ℓq^{M_k}(weight))`: inner `ℓq` over each block, outer `ℓp` over `k`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlockSpace {
    p: Exponent,
    q: Exponent,
    partition: BlockPartition,
    weight: BTreeMap<i64, f64>,
    #[serde(skip)]
    block_of: BTreeMap<i64, i64>,
}

impl BlockSpace {
    pub fn new(p: Exponent, q: Exponent, partition: BlockPartition, weight: BTreeMap<i64, f64>) -> Result<Self> {
        if weight.values().any(|w| !(*w > 0.0 && w.is_finite())) {
            return Err(Error::invalid("block-space weights must be positive and finite"));
        }
        let block_of = partition.index_map();
        if block_of.len() != partition.assigned_count() {
            return Err(Error::invalid("blocks of a block space must be disjoint"));
        }
        Ok(BlockSpace {
            p,
            q,
            partition,
            weight,
            block_of,
        })
    }

    /// Plain weighted `ℓp`: one block, `q = p`.
    pub fn weighted_lp(p: Exponent, weight: BTreeMap<i64, f64>) -> Result<Self> {
        let partition = BlockPartition::single(weight.keys().copied());
        Self::new(p, p, partition, weight)
    }

    /// Blocks `M_k = {i : t_{k-1} < v_i/w_i ≤ t_k}` and weights `v_i/φ(v_i/w_i)`
    /// over the couple window; `q` comes from the couple. Indices whose ratio
    /// leaves the window of `seq` stay unassigned.
    pub fn gilbert(c: &WeightedSeqCouple, phi: &QuasiConcaveFn, seq: &DiscretizingSequence, p: Exponent) -> Result<Self> {
        let ratios: Vec<(i64, f64)> = c.indices().map(|i| (i, c.ratio(i).unwrap())).collect();
        let partition = seq.block_partition(&ratios);
        let weight = c
            .indices()
            .map(|i| {
                let (v, w) = c.weights(i).unwrap();
                Ok((i, v / phi.eval(v / w)?))
            })
            .collect::<Result<_>>()?;
        Self::new(p, c.q(), partition, weight)
    }

    pub fn p(&self) -> Exponent {
        self.p
    }

    pub fn q(&self) -> Exponent {
        self.q
    }

    pub fn partition(&self) -> &BlockPartition {
        &self.partition
    }

    pub fn weight(&self, i: i64) -> Option<f64> {
        self.weight.get(&i).copied()
    }

    pub fn block_of(&self, i: i64) -> Option<i64> {
        self.block_of.get(&i).copied()
    }

    /// Same blocks and weights with other exponents.
    pub fn with_exponents(&self, p: Exponent, q: Exponent) -> Self {
        BlockSpace {
            p,
            q,
            ..self.clone()
        }
    }

    pub fn norm(&self, a: &SeqVector) -> Result<f64> {
        block_norm(self, a)
    }
}

/// `(Σ_k (Σ_{i∈M_k} |a_i w_i|^q)^{p/q})^{1/p}` with sup-limits for infinite exponents.
pub fn block_norm(space: &BlockSpace, a: &SeqVector) -> Result<f64> {
    let mut blocks: BTreeMap<i64, Vec<f64>> = BTreeMap::new();
    for (i, x) in a.iter() {
        let k = space
            .block_of(i)
            .ok_or_else(|| Error::domain(format!("index {i} belongs to no block")))?;
        let w = space
            .weight(i)
            .ok_or_else(|| Error::domain(format!("index {i} carries no weight")))?;
        blocks.entry(k).or_default().push(x.abs() * w);
    }
    Ok(space.p.norm(blocks.into_values().map(|b| space.q.norm(b))))
}

/// Windowed norm with a truncation indicator.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormReport {
    pub value: f64,
    pub window: [i64; 2],
    /// Larger of the first and last summand.
    pub tail_estimate: f64,
}

impl NormReport {
    pub fn tail_flagged(&self) -> bool {
        self.tail_estimate > TAIL_FLAG * self.value
    }
}

/// `(Σ_k (K(t_k, x)/φ(t_k))^p)^{1/p}` over the window of `seq`.
pub fn janson_norm<K: KFunctional>(engine: &K, x: &K::Element, seq: &DiscretizingSequence, p: Exponent) -> Result<NormReport> {
    engine.check(x)?;
    let terms: Vec<f64> = (seq.k_min()..=seq.k_max())
        .into_par_iter()
        .map(|k| {
            let t = seq.point(k).unwrap();
            Ok(engine.k(x, t)? / seq.value(k).unwrap())
        })
        .collect::<Result<_>>()?;
    Ok(NormReport {
        value: p.norm(terms.iter().copied()),
        window: [seq.k_min(), seq.k_max()],
        tail_estimate: terms[0].max(*terms.last().unwrap()),
    })
}

/// Block-space norm with blocks from `seq` and weights `v_i/φ(v_i/w_i)`.
pub fn gilbert_rhs(
    c: &WeightedSeqCouple,
    phi: &QuasiConcaveFn,
    seq: &DiscretizingSequence,
    p: Exponent,
    a: &SeqVector,
) -> Result<f64> {
    c.check_support(a)?;
    let space = BlockSpace::gilbert(c, phi, seq, p)?;
    if let Some(i) = a.support().find(|&i| space.block_of(i).is_none()) {
        return Err(Error::Window(format!(
            "ratio at index {i} lies outside the discretizing window [{:e}, {:e}]; enlarge the window",
            seq.point(seq.k_min()).unwrap(),
            seq.point(seq.k_max()).unwrap()
        )));
    }
    space.norm(a)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Window;
    use crate::kfunc::MinFormula;

    fn two_blocks(p: Exponent, q: Exponent) -> BlockSpace {
        let mut blocks = BTreeMap::new();
        blocks.insert(0, vec![1, 2]);
        blocks.insert(1, vec![3]);
        let partition = BlockPartition {
            blocks,
            unassigned: vec![],
        };
        BlockSpace::new(p, q, partition, (1..=3).map(|i| (i, 1.0)).collect()).unwrap()
    }

    #[test]
    fn block_norm_examples() {
        let a = SeqVector::from_pairs([(1, 3.0), (2, 4.0), (3, 5.0)]);
        assert_eq!(two_blocks(Exponent::ONE, Exponent::INFINITY).norm(&a).unwrap(), 9.0);
        assert_eq!(two_blocks(Exponent::INFINITY, Exponent::ONE).norm(&a).unwrap(), 7.0);
        let l2 = two_blocks(Exponent::TWO, Exponent::TWO).norm(&a).unwrap();
        assert!((l2 - 50f64.sqrt()).abs() < 1e-12);
        assert!(matches!(two_blocks(Exponent::ONE, Exponent::ONE).norm(&SeqVector::unit(9)), Err(Error::Domain(_))));
    }

    #[test]
    fn overlapping_blocks_rejected() {
        let mut blocks = BTreeMap::new();
        blocks.insert(0, vec![1, 2]);
        blocks.insert(1, vec![2]);
        let partition = BlockPartition {
            blocks,
            unassigned: vec![],
        };
        assert!(BlockSpace::new(Exponent::ONE, Exponent::ONE, partition, BTreeMap::new()).is_err());
    }

    fn sqrt_setup(radius: f64) -> (QuasiConcaveFn, DiscretizingSequence, WeightedSeqCouple) {
        let phi = QuasiConcaveFn::power(0.5).unwrap();
        let seq = DiscretizingSequence::build(&phi, &Window::symmetric(4.0, radius).unwrap(), 2.0).unwrap();
        let c = WeightedSeqCouple::sequence_couple(Exponent::ONE, &seq).unwrap();
        (phi, seq, c)
    }

    #[test]
    fn janson_norm_of_unit_vector() {
        let (_, seq, c) = sqrt_setup(40.0);
        let e0 = SeqVector::unit(0);
        let r1 = janson_norm(&MinFormula(&c), &e0, &seq, Exponent::ONE).unwrap();
        assert!((r1.value - 3.0).abs() < 1e-10, "{}", r1.value);
        assert_eq!(r1.window, [-40, 40]);
        assert!(!r1.tail_flagged());
        let rinf = janson_norm(&MinFormula(&c), &e0, &seq, Exponent::INFINITY).unwrap();
        assert!((rinf.value - 1.0).abs() < 1e-12);
        let zero = janson_norm(&MinFormula(&c), &SeqVector::new(), &seq, Exponent::TWO).unwrap();
        assert_eq!(zero.value, 0.0);
    }

    #[test]
    fn short_window_flags_tail() {
        let (_, seq, c) = sqrt_setup(3.0);
        let r = janson_norm(&MinFormula(&c), &SeqVector::unit(0), &seq, Exponent::ONE).unwrap();
        assert!(r.tail_flagged());
        assert!(r.tail_estimate <= r.value);
    }

    #[test]
    fn gilbert_rhs_on_aligned_lattice() {
        let (phi, seq, c) = sqrt_setup(10.0);
        let a = SeqVector::from_pairs([(-2, 1.0), (0, 2.0), (3, -1.5)]);
        let direct: f64 = a.iter().map(|(i, x)| x.abs() * 2f64.powi(-(i as i32))).sum();
        let rhs = gilbert_rhs(&c, &phi, &seq, Exponent::ONE, &a).unwrap();
        assert!((rhs - direct).abs() < 1e-10 * direct, "{rhs} vs {direct}");
        let j = 4;
        let (v, w) = c.weights(j).unwrap();
        let single = gilbert_rhs(&c, &phi, &seq, Exponent::ONE, &SeqVector::unit(j)).unwrap();
        assert!((single - v / phi.eval(v / w).unwrap()).abs() < 1e-15);
    }

    #[test]
    fn gilbert_rhs_window_error() {
        let phi = QuasiConcaveFn::power(0.5).unwrap();
        let seq = DiscretizingSequence::build(&phi, &Window::symmetric(4.0, 3.0).unwrap(), 2.0).unwrap();
        let c = WeightedSeqCouple::from_fn(Exponent::ONE, -10, 10, |i| (1.0, 4f64.powi(-i as i32))).unwrap();
        let err = gilbert_rhs(&c, &phi, &seq, Exponent::ONE, &SeqVector::unit(8));
        assert!(matches!(err, Err(Error::Window(_))));
    }
}
