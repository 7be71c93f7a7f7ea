//! Exhaustive search over a discretized budget simplex.
//!
//! The grid holds every allocation whose genes are nonnegative multiples of
//! `P_T / m` summing to exactly `P_T`, i.e. the compositions of `m` into `d`
//! parts. It serves as ground truth for the genetic optimizer.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::rates::{PowerAllocation, Problem};

/// Default limit on the number of grid points.
pub const DEFAULT_GRID_CAP: u128 = 5_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GridSpec {
    /// Number of quanta `m`; the step is `P_T / m`.
    pub steps: usize,
    /// Number of genes `d`.
    pub dims: usize,
}

impl GridSpec {
    pub fn for_problem(problem: &Problem, steps: usize) -> Self {
        GridSpec {
            steps,
            dims: problem.gene_count(),
        }
    }

    /// `C(m + d - 1, d - 1)`, saturating at `u128::MAX`.
    pub fn point_count(&self) -> u128 {
        if self.dims == 0 {
            return 0;
        }
        binomial(
            (self.steps + self.dims - 1) as u128,
            (self.dims - 1) as u128,
        )
    }
}

fn binomial(n: u128, k: u128) -> u128 {
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        // acc * (n - i) / (i + 1) is exact at every step.
        acc = match acc.checked_mul(n - i) {
            Some(v) => v / (i + 1),
            None => return u128::MAX,
        };
    }
    acc
}

/// Compositions of `total` into `parts` nonnegative parts, in
/// lexicographic order starting at `[0, .., 0, total]`.
#[derive(Debug, Clone)]
pub struct Compositions {
    current: Option<Vec<usize>>,
}

impl Compositions {
    pub fn new(total: usize, parts: usize) -> Self {
        let current = match parts {
            0 => None,
            _ => {
                let mut v = vec![0; parts];
                v[parts - 1] = total;
                Some(v)
            }
        };
        Compositions { current }
    }
}

impl Iterator for Compositions {
    type Item = Vec<usize>;

    fn next(&mut self) -> Option<Vec<usize>> {
        let out = self.current.take()?;
        let d = out.len();
        // Last nonzero among positions 1..d moves one quantum left and the
        // remainder collects at the tail.
        if let Some(t) = (1..d).rev().find(|&t| out[t] > 0) {
            let mut next = out.clone();
            let s = next[t];
            next[t - 1] += 1;
            next[t] = 0;
            next[d - 1] = s - 1;
            self.current = Some(next);
        }
        Some(out)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridOptimum {
    pub alloc: PowerAllocation,
    pub genes: Vec<f64>,
    pub fitness: f64,
    /// Number of grid points evaluated.
    pub evaluated: u128,
}

pub fn grid_search(problem: &Problem, spec: GridSpec) -> Result<GridOptimum> {
    grid_search_capped(problem, spec, DEFAULT_GRID_CAP)
}

/// Best grid point by sum rate. Ties resolve to the lexicographically
/// smallest gene vector, independent of how the work is split across
/// threads.
pub fn grid_search_capped(problem: &Problem, spec: GridSpec, cap: u128) -> Result<GridOptimum> {
    if spec.dims != problem.gene_count() {
        return Err(Error::Dimension {
            expected: problem.gene_count(),
            found: spec.dims,
        });
    }
    if spec.steps == 0 || spec.dims == 0 {
        return Err(Error::Scenario(
            "grid needs at least one step and one dimension".into(),
        ));
    }
    let count = spec.point_count();
    if count > cap {
        return Err(Error::GridTooLarge { count, cap });
    }
    let quantum = problem.total_power / spec.steps as f64;
    let to_genes = |c: &[usize]| c.iter().map(|&q| q as f64 * quantum).collect::<Vec<f64>>();

    // Chunk by the value of the leading coordinate; chunks come back in
    // lexicographic order and are reduced left to right.
    let chunk_best = |first: usize| -> Option<(f64, Vec<usize>, u128)> {
        let mut best: Option<(f64, Vec<usize>)> = None;
        let mut n = 0u128;
        for mut rest in Compositions::new(spec.steps - first, spec.dims - 1) {
            rest.insert(0, first);
            n += 1;
            let f = problem.sum_rate_of(&to_genes(&rest));
            if best.as_ref().is_none_or(|(b, _)| f > *b) {
                best = Some((f, rest));
            }
        }
        if spec.dims == 1 && first == spec.steps {
            n += 1;
            best = Some((problem.sum_rate_of(&to_genes(&[first])), vec![first]));
        }
        best.map(|(f, c)| (f, c, n))
    };

    let chunks: Vec<_> = (0..=spec.steps).into_par_iter().map(chunk_best).collect();
    let evaluated = chunks.iter().flatten().map(|c| c.2).sum();
    let (fitness, comp) = chunks
        .into_iter()
        .flatten()
        .fold(None::<(f64, Vec<usize>)>, |acc, (f, c, _)| match acc {
            Some((b, _)) if b >= f => acc,
            _ => Some((f, c)),
        })
        .ok_or_else(|| Error::Internal("empty grid".into()))?;
    let genes = to_genes(&comp);
    Ok(GridOptimum {
        alloc: problem.decode(&genes)?,
        genes,
        fitness,
        evaluated,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rates::{ChannelGains, EffectiveGains};

    fn problem(users: usize, total_power: f64) -> Problem {
        let common = (0..users).map(|k| 0.5 + 0.3 * k as f64).collect();
        let private = (0..users)
            .map(|k| {
                (0..users)
                    .map(|m| if k == m { 1.0 + k as f64 } else { 0.05 })
                    .collect()
            })
            .collect();
        Problem::new(
            EffectiveGains {
                channels: vec![ChannelGains {
                    users: (0..users).collect(),
                    common,
                    private,
                }],
            },
            1.0,
            total_power,
        )
    }

    #[test]
    fn composition_enumeration() {
        let all: Vec<_> = Compositions::new(2, 2).collect();
        assert_eq!(all, vec![vec![0, 2], vec![1, 1], vec![2, 0]]);
        assert_eq!(Compositions::new(20, 4).count(), 1771);
        assert_eq!(Compositions::new(3, 1).collect::<Vec<_>>(), vec![vec![3]]);
        let v: Vec<_> = Compositions::new(4, 3).collect();
        assert!(v.windows(2).all(|w| w[0] < w[1]));
        assert!(v.iter().all(|c| c.iter().sum::<usize>() == 4));
    }

    #[test]
    fn point_counts() {
        assert_eq!(GridSpec { steps: 2, dims: 2 }.point_count(), 3);
        assert_eq!(GridSpec { steps: 20, dims: 4 }.point_count(), 1771);
        assert_eq!(GridSpec { steps: 1, dims: 4 }.point_count(), 4);
        assert_eq!(GridSpec { steps: 50, dims: 4 }.point_count(), 23426);
    }

    #[test]
    fn counts_and_enumerates_every_point() {
        let p = problem(3, 10.0);
        let r = grid_search(&p, GridSpec::for_problem(&p, 20)).unwrap();
        assert_eq!(r.evaluated, 1771);
        let r = grid_search(&p, GridSpec::for_problem(&p, 1)).unwrap();
        assert_eq!(r.evaluated, 4);
        let single = problem(1, 1.0);
        let r = grid_search(&single, GridSpec { steps: 2, dims: 2 }).unwrap();
        assert_eq!(r.evaluated, 3);
    }

    #[test]
    fn single_user_prefers_private_stream() {
        // Private gain 1.0 beats common gain 0.5, so all power goes private.
        let p = problem(1, 4.0);
        let r = grid_search(&p, GridSpec::for_problem(&p, 10)).unwrap();
        assert_eq!(r.genes, vec![0.0, 4.0]);
        assert!((r.fitness - 5f64.log2()).abs() < 1e-15);
    }

    #[test]
    fn optimum_dominates_rescan() {
        let p = problem(3, 10.0);
        let spec = GridSpec::for_problem(&p, 12);
        let r = grid_search(&p, spec).unwrap();
        let q = 10.0 / 12.0;
        for c in Compositions::new(12, 4) {
            let genes: Vec<f64> = c.iter().map(|&x| x as f64 * q).collect();
            assert!(r.fitness >= p.sum_rate_of(&genes));
        }
    }

    #[test]
    fn refinement_never_hurts() {
        let p = problem(3, 30.0);
        let mut last = f64::NEG_INFINITY;
        for m in [3, 6, 12, 24, 48] {
            let f = grid_search(&p, GridSpec::for_problem(&p, m))
                .unwrap()
                .fitness;
            assert!(f >= last, "m = {m}");
            last = f;
        }
    }

    #[test]
    fn ties_pick_lexicographically_smallest() {
        // Symmetric two-user problem without common gain: (0, a, b) and
        // (0, b, a) tie, the smaller gene vector must win.
        let p = Problem::new(
            EffectiveGains {
                channels: vec![ChannelGains {
                    users: vec![0, 1],
                    common: vec![0.0, 0.0],
                    private: vec![vec![1.0, 0.5], vec![0.5, 1.0]],
                }],
            },
            1.0,
            10.0,
        );
        let r = grid_search(&p, GridSpec::for_problem(&p, 10)).unwrap();
        let mirrored = vec![r.genes[0], r.genes[2], r.genes[1]];
        if p.sum_rate_of(&mirrored) == r.fitness {
            assert!(r.genes <= mirrored);
        }
        assert_eq!(r.genes[0], 0.0);
    }

    #[test]
    fn oversized_grid_is_refused() {
        let p = problem(3, 1.0);
        let err = grid_search_capped(&p, GridSpec::for_problem(&p, 1000), 1_000_000).unwrap_err();
        assert!(matches!(
            err,
            Error::GridTooLarge {
                count: 167_668_501,
                cap: 1_000_000
            }
        ));
    }
}
