//! Backward dependency cones: evaluate a few target cells at a few times
//! without stepping the whole torus.

use crate::lattice::Region;

use super::dynamics::{Direction, Dynamics};

/// The cells whose values are needed at every time `0..=horizon` to produce the
/// requested checkpoints. `layers()[0]` are the initial cells that matter.
#[derive(Debug, Clone)]
pub struct Cone {
    layers: Vec<Vec<usize>>,
    checkpoints: Vec<(usize, Vec<usize>)>,
    start_clock: i64,
    width: usize,
}

/// Reusable buffers for [`Cone::run`].
#[derive(Debug, Clone)]
pub struct Scratch {
    work: [Vec<u8>; 2],
}

impl Scratch {
    pub fn new(cells: usize) -> Self {
        Scratch {
            work: [vec![0; cells], vec![0; cells]],
        }
    }
}

impl Cone {
    /// Cone for a list of `(time, region)` checkpoints, starting at clock `start_clock`.
    pub fn new(dynamics: &Dynamics, checkpoints: &[(u64, &Region)], start_clock: i64) -> Cone {
        let horizon = checkpoints.iter().map(|(t, _)| *t as usize).max().unwrap_or(0);
        let n = dynamics.geometry().cell_count();
        let mut mark = vec![false; n];
        let mut layers = vec![Vec::new(); horizon + 1];
        let mut current: Vec<usize> = Vec::new();
        for k in (0..=horizon).rev() {
            for (t, region) in checkpoints {
                if *t as usize == k {
                    current.extend_from_slice(region.cells());
                }
            }
            current.sort_unstable();
            current.dedup();
            layers[k] = current.clone();
            if k == 0 {
                break;
            }
            let mut prev = Vec::new();
            for &cell in &current {
                dynamics.for_each_dependency(cell, start_clock + k as i64 - 1, |dep| {
                    if !mark[dep] {
                        mark[dep] = true;
                        prev.push(dep);
                    }
                });
            }
            for &c in &prev {
                mark[c] = false;
            }
            current = prev;
        }
        let width = checkpoints.iter().map(|(_, r)| r.len()).sum();
        Cone {
            layers,
            checkpoints: checkpoints
                .iter()
                .map(|(t, r)| (*t as usize, r.cells().to_vec()))
                .collect(),
            start_clock,
            width,
        }
    }

    /// Initial cells the checkpoints depend on, sorted.
    pub fn inputs(&self) -> &[usize] {
        &self.layers[0]
    }

    pub fn inputs_region(&self) -> Region {
        Region::from_sorted_unchecked(self.layers[0].clone())
    }

    pub fn horizon(&self) -> usize {
        self.layers.len() - 1
    }

    /// Total number of output symbols produced by [`Cone::run`].
    pub fn output_width(&self) -> usize {
        self.width
    }

    /// Evaluates the checkpoints. `init` holds the initial state on (at least)
    /// the input cells; outputs are appended to `out` checkpoint by checkpoint,
    /// each in region order.
    pub fn run(&self, dynamics: &Dynamics, init: &[u8], scratch: &mut Scratch, out: &mut Vec<u8>) {
        out.clear();
        out.resize(self.width, 0);
        let emit = |k: usize, src: &[u8], out: &mut Vec<u8>| {
            let mut pos = 0;
            for (t, cells) in &self.checkpoints {
                if *t == k {
                    for (i, &c) in cells.iter().enumerate() {
                        out[pos + i] = src[c];
                    }
                }
                pos += cells.len();
            }
        };
        emit(0, init, out);
        let [a, b] = &mut scratch.work;
        for k in 0..self.horizon() {
            let clock = self.start_clock + k as i64;
            let (src, dst): (&[u8], &mut [u8]) = match k {
                0 => (init, &mut a[..]),
                _ if k % 2 == 1 => (&a[..], &mut b[..]),
                _ => (&b[..], &mut a[..]),
            };
            for &cell in &self.layers[k + 1] {
                dst[cell] = dynamics.update(src, cell, clock, Direction::Forward);
            }
            emit(k + 1, dst, out);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::Rule;
    use crate::lattice::{FullState, Geometry, Region, Restrict};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn check_against_full_evolution(rule: &Rule, geometry: &Geometry, target: &Region, t: u64) {
        let dynamics = Dynamics::new(rule, geometry).unwrap();
        let cone = Cone::new(&dynamics, &[(t, target)], 0);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut scratch = Scratch::new(geometry.cell_count());
        let mut out = Vec::new();
        for _ in 0..50 {
            let cells: Vec<u8> = (0..geometry.cell_count())
                .map(|_| rng.gen_range(0..geometry.alphabet()) as u8)
                .collect();
            let s = FullState::from_symbols(geometry, cells).unwrap();
            let direct = dynamics.evolve(&s, t as i64).unwrap().restrict(target).unwrap();
            cone.run(&dynamics, s.symbols(), &mut scratch, &mut out);
            assert_eq!(out, direct.symbols());
        }
    }

    #[test]
    fn cone_matches_full_evolution() {
        let g1 = Geometry::line(16, 2).unwrap();
        let g4 = Geometry::line(16, 4).unwrap();
        let g2 = Geometry::grid(8, 8, 2).unwrap();
        let r1 = Region::from_positions(&g1, [3, 4]).unwrap();
        let r2 = Region::from_coords(&g2, [[3, 3], [4, 5]]).unwrap();
        for t in 0..5 {
            check_against_full_evolution(&Rule::shift(vec![1]).unwrap(), &g1, &r1, t);
            check_against_full_evolution(&Rule::majority(), &g1, &r1, t);
            check_against_full_evolution(&Rule::second_order_elementary(30), &g4, &r1, t);
            check_against_full_evolution(&Rule::billiard_ball(), &g2, &r2, t);
        }
    }

    #[test]
    fn shift_cone_is_a_single_cell() {
        let g = Geometry::line(16, 2).unwrap();
        let d = Dynamics::new(&Rule::shift(vec![1]).unwrap(), &g).unwrap();
        let r = Region::from_positions(&g, [0]).unwrap();
        let cone = Cone::new(&d, &[(3, &r)], 0);
        assert_eq!(cone.inputs(), &[13]);
    }

    #[test]
    fn identity_cone_stays_put() {
        let g = Geometry::line(16, 2).unwrap();
        let d = Dynamics::new(&Rule::identity(1, 2).unwrap(), &g).unwrap();
        let r = Region::from_positions(&g, [5]).unwrap();
        let cone = Cone::new(&d, &[(4, &r)], 0);
        assert_eq!(cone.inputs(), &[5]);
    }
}
