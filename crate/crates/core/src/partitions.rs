//! Partition constructors and searches maximizing `q_succ`.

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::numerics::{max_eigenvalue, CMatrix};
use crate::povm::Povm;
use crate::rng::Seed;
use crate::scheme::{success_probability, Partition};

/// Minimum gain in `q_succ` for a greedy move to be accepted.
pub const GREEDY_MIN_GAIN: f64 = 1e-12;

fn cap_for(n: usize, m: usize) -> Result<usize> {
    if n == 0 {
        return Err(Error::InvalidArgument("n must be positive".into()));
    }
    if m < 2 {
        return Err(Error::InvalidArgument(format!("m must be at least 2, got {m}")));
    }
    Ok(m - 1)
}

fn chunked(order: &[usize], n: usize, cap: usize) -> Result<Partition> {
    let blocks = order.chunks(cap).map(|c| c.to_vec()).collect();
    Partition::new(n, cap, blocks)
}

/// Consecutive blocks of size `m−1`; the last may be short.
pub fn standard_partition(n: usize, m: usize) -> Result<Partition> {
    let cap = cap_for(n, m)?;
    let order: Vec<usize> = (0..n).collect();
    chunked(&order, n, cap)
}

/// Uniformly shuffled labels cut into consecutive blocks of size `m−1`.
pub fn random_partition(n: usize, m: usize, seed: Seed) -> Result<Partition> {
    random_partition_with(n, m, &mut seed.rng())
}

pub fn random_partition_with<R: Rng + ?Sized>(n: usize, m: usize, rng: &mut R) -> Result<Partition> {
    let cap = cap_for(n, m)?;
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    chunked(&order, n, cap)
}

#[derive(Debug, Clone, Serialize)]
pub struct SearchResult {
    pub partition: Partition,
    pub q_succ: f64,
    /// `q_succ` of each candidate in draw order, or of each accepted step for greedy search.
    pub trace: Vec<f64>,
}

/// Best of `candidates` random partitions. Candidate `i` is drawn from
/// stream `i` of `seed`; ties keep the earliest candidate.
pub fn best_of_random(target: &Povm, m: usize, candidates: usize, seed: Seed) -> Result<SearchResult> {
    if candidates == 0 {
        return Err(Error::InvalidArgument("need at least one candidate".into()));
    }
    let n = target.outcomes();
    let evaluated = (0..candidates as u64)
        .into_par_iter()
        .map(|i| {
            let p = random_partition_with(n, m, &mut seed.stream(i))?;
            let q = success_probability(target, &p)?;
            Ok((p, q))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut best = 0;
    for (i, (_, q)) in evaluated.iter().enumerate() {
        if *q > evaluated[best].1 {
            best = i;
        }
    }
    let trace = evaluated.iter().map(|(_, q)| *q).collect();
    let (partition, q_succ) = evaluated.into_iter().nth(best).expect("nonempty");
    Ok(SearchResult { partition, q_succ, trace })
}

/// Block sums and their norms, updated move by move.
#[derive(Debug, Clone)]
pub struct BlockNormCache<'a> {
    target: &'a Povm,
    cap: usize,
    blocks: Vec<Vec<usize>>,
    owner: Vec<usize>,
    sums: Vec<CMatrix>,
    norms: Vec<f64>,
}

impl<'a> BlockNormCache<'a> {
    pub fn new(target: &'a Povm, partition: &Partition) -> Result<Self> {
        if partition.n() != target.outcomes() {
            return Err(Error::InvalidPartition("partition does not match POVM".into()));
        }
        let blocks = partition.blocks().to_vec();
        let sums: Vec<CMatrix> = blocks.iter().map(|b| target.block_sum(b)).collect();
        let norms = sums.iter().map(norm_of).collect();
        Ok(BlockNormCache { target, cap: partition.cap(), owner: partition.owners(), blocks, sums, norms })
    }

    pub fn norms(&self) -> &[f64] {
        &self.norms
    }

    pub fn total(&self) -> f64 {
        self.norms.iter().sum()
    }

    pub fn q_succ(&self) -> f64 {
        1.0 / self.total()
    }

    pub fn owner(&self, i: usize) -> usize {
        self.owner[i]
    }

    pub fn block_len(&self, g: usize) -> usize {
        self.blocks[g].len()
    }

    pub fn block_count(&self) -> usize {
        self.blocks.len()
    }

    /// Norms of blocks `from` and `to` if `i` moved from one to the other.
    pub fn relocate_norms(&self, i: usize, to: usize) -> (f64, f64) {
        let from = self.owner[i];
        let m = self.target.effect(i);
        (norm_of(&(&self.sums[from] - m)), norm_of(&(&self.sums[to] + m)))
    }

    /// Norms of the owners of `i` and `j` after swapping them.
    pub fn swap_norms(&self, i: usize, j: usize) -> (f64, f64) {
        let (gi, gj) = (self.owner[i], self.owner[j]);
        let diff = self.target.effect(j) - self.target.effect(i);
        (norm_of(&(&self.sums[gi] + &diff)), norm_of(&(&self.sums[gj] - &diff)))
    }

    pub fn relocate(&mut self, i: usize, to: usize, norms: (f64, f64)) {
        let from = self.owner[i];
        let m = self.target.effect(i).clone();
        self.blocks[from].retain(|&k| k != i);
        self.blocks[to].push(i);
        self.owner[i] = to;
        self.sums[from] -= &m;
        self.sums[to] += &m;
        self.norms[from] = norms.0;
        self.norms[to] = norms.1;
    }

    pub fn swap(&mut self, i: usize, j: usize, norms: (f64, f64)) {
        let (gi, gj) = (self.owner[i], self.owner[j]);
        let diff = self.target.effect(j) - self.target.effect(i);
        for k in self.blocks[gi].iter_mut() {
            if *k == i {
                *k = j;
            }
        }
        for k in self.blocks[gj].iter_mut() {
            if *k == j {
                *k = i;
            }
        }
        self.owner[i] = gj;
        self.owner[j] = gi;
        self.sums[gi] += &diff;
        self.sums[gj] -= &diff;
        self.norms[gi] = norms.0;
        self.norms[gj] = norms.1;
    }

    /// Current partition with emptied blocks dropped.
    pub fn partition(&self) -> Result<Partition> {
        let blocks = self.blocks.iter().filter(|b| !b.is_empty()).cloned().collect();
        Partition::new(self.owner.len(), self.cap, blocks)
    }
}

fn norm_of(m: &CMatrix) -> f64 {
    if m.iter().all(|z| z.norm_sqr() == 0.0) {
        0.0
    } else {
        max_eigenvalue(m).max(0.0)
    }
}

/// First-improvement local search over single relocations and pairwise
/// swaps. Outcomes are scanned in an order shuffled by `seed` on each pass;
/// a move is taken when it raises `q_succ` by more than [`GREEDY_MIN_GAIN`].
/// Stops after a pass with no accepted move or after `max_passes` passes.
pub fn greedy_improve(target: &Povm, start: &Partition, max_passes: usize, seed: Seed) -> Result<SearchResult> {
    let mut cache = BlockNormCache::new(target, start)?;
    let n = target.outcomes();
    let mut rng = seed.rng();
    let mut trace = vec![cache.q_succ()];
    let mut order: Vec<usize> = (0..n).collect();
    for _ in 0..max_passes {
        let mut improved = false;
        order.shuffle(&mut rng);
        for &i in &order {
            let from = cache.owner(i);
            for to in 0..cache.block_count() {
                if to == from || cache.block_len(to) == 0 || cache.block_len(to) >= cache.cap {
                    continue;
                }
                let (a, b) = cache.relocate_norms(i, to);
                let total = cache.total() - cache.norms[from] - cache.norms[to] + a + b;
                if 1.0 / total - cache.q_succ() > GREEDY_MIN_GAIN {
                    cache.relocate(i, to, (a, b));
                    trace.push(cache.q_succ());
                    improved = true;
                    break;
                }
            }
            for &j in &order {
                let (gi, gj) = (cache.owner(i), cache.owner(j));
                if gi == gj {
                    continue;
                }
                let (a, b) = cache.swap_norms(i, j);
                let total = cache.total() - cache.norms[gi] - cache.norms[gj] + a + b;
                if 1.0 / total - cache.q_succ() > GREEDY_MIN_GAIN {
                    cache.swap(i, j, (a, b));
                    trace.push(cache.q_succ());
                    improved = true;
                }
            }
        }
        if !improved {
            break;
        }
    }
    let partition = cache.partition()?;
    let q_succ = success_probability(target, &partition)?;
    Ok(SearchResult { partition, q_succ, trace })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generators::haar_random_povm;
    use proptest::prelude::*;

    #[test]
    fn standard_partition_examples() {
        let p = standard_partition(5, 3).unwrap();
        assert_eq!(p.to_one_based(), vec![vec![1, 2], vec![3, 4], vec![5]]);
        let p = standard_partition(256, 16).unwrap();
        assert_eq!(p.len(), 18);
        assert_eq!(p.blocks().iter().filter(|b| b.len() == 15).count(), 17);
        assert!(standard_partition(0, 3).is_err());
        assert!(standard_partition(3, 1).is_err());
    }

    #[test]
    fn random_partition_is_seeded() {
        let a = random_partition(20, 5, Seed(5)).unwrap();
        let b = random_partition(20, 5, Seed(5)).unwrap();
        let c = random_partition(20, 5, Seed(6)).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert_eq!(a.len(), 5);
        let mut sizes: Vec<usize> = a.blocks().iter().map(|b| b.len()).collect();
        sizes.sort();
        let mut std_sizes: Vec<usize> = standard_partition(20, 5).unwrap().blocks().iter().map(|b| b.len()).collect();
        std_sizes.sort();
        assert_eq!(sizes, std_sizes);
        let differ = (0..100u64)
            .filter(|&s| random_partition(16, 5, Seed(2 * s)).unwrap() != random_partition(16, 5, Seed(2 * s + 1)).unwrap())
            .count();
        assert!(differ >= 95);
    }

    #[test]
    fn best_of_one_is_the_first_draw() {
        let target = haar_random_povm(3, 9, Seed(8)).unwrap();
        let r = best_of_random(&target, 3, 1, Seed(4)).unwrap();
        let p = random_partition_with(9, 3, &mut Seed(4).stream(0)).unwrap();
        assert_eq!(r.partition, p);
        assert_eq!(r.q_succ, success_probability(&target, &p).unwrap());
    }

    #[test]
    fn sic_singletons_give_one_half() {
        use crate::generators::{sic_povm, FiducialVector};
        let sic = sic_povm(2, &FiducialVector::qubit_sic()).unwrap();
        for k in [1, 5, 24] {
            let r = best_of_random(&sic, 2, k, Seed(k as u64)).unwrap();
            assert!((r.q_succ - 0.5).abs() < 1e-12);
        }
    }

    #[test]
    fn greedy_keeps_a_local_optimum() {
        let basis = Povm::computational_basis(4);
        let start = standard_partition(4, 3).unwrap();
        let r = greedy_improve(&basis, &start, 10, Seed(0)).unwrap();
        assert_eq!(r.partition, start);
        assert_eq!(r.trace.len(), 1);
    }

    #[test]
    fn best_of_random_keeps_the_maximum() {
        let target = haar_random_povm(4, 16, Seed(2)).unwrap();
        let r = best_of_random(&target, 4, 12, Seed(9)).unwrap();
        assert_eq!(r.trace.len(), 12);
        let max = r.trace.iter().cloned().fold(f64::MIN, f64::max);
        assert_eq!(r.q_succ, max);
        let again = best_of_random(&target, 4, 12, Seed(9)).unwrap();
        assert_eq!(again.partition, r.partition);
    }

    #[test]
    fn greedy_is_monotone_and_not_worse() {
        let target = haar_random_povm(4, 16, Seed(3)).unwrap();
        let start = standard_partition(16, 4).unwrap();
        let q0 = success_probability(&target, &start).unwrap();
        let r = greedy_improve(&target, &start, 20, Seed(1)).unwrap();
        assert!(r.q_succ >= q0);
        assert!(r.trace.windows(2).all(|w| w[1] > w[0]));
        assert!((r.trace.last().unwrap() - r.q_succ).abs() < 1e-12);
        assert!(r.partition.blocks().iter().all(|b| b.len() <= 3));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn cache_matches_full_recomputation(seed in any::<u64>(), moves in proptest::collection::vec((0usize..16, 0usize..16, any::<bool>()), 1..30)) {
            let target = haar_random_povm(4, 16, Seed(seed)).unwrap();
            let start = random_partition(16, 4, Seed(seed)).unwrap();
            let mut cache = BlockNormCache::new(&target, &start).unwrap();
            for (i, j, relocate) in moves {
                if relocate {
                    let to = cache.owner(j);
                    if to != cache.owner(i) && cache.block_len(to) < 3 {
                        let nn = cache.relocate_norms(i, to);
                        cache.relocate(i, to, nn);
                    }
                } else if cache.owner(i) != cache.owner(j) {
                    let nn = cache.swap_norms(i, j);
                    cache.swap(i, j, nn);
                }
            }
            let p = cache.partition().unwrap();
            let fresh = success_probability(&target, &p).unwrap();
            prop_assert!((fresh - cache.q_succ()).abs() < 1e-10);
        }
    }
}
