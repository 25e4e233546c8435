//! A rule compiled against a concrete torus: neighbour tables, block partitions
//! and single-cell update kernels.

use crate::error::{Error, Result};
use crate::lattice::{FullState, Geometry};

use super::rules::{moore_size, Rule};

/// Time direction of a single step.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Forward,
    Backward,
}

#[derive(Debug, Clone)]
enum Kernel {
    Shift {
        // source cell of every cell, per direction
        forward: Vec<usize>,
        backward: Vec<usize>,
    },
    Table {
        m: usize,
        forward: Vec<u8>,
        backward: Vec<u8>,
        forward_deps: Vec<usize>,
    },
    SecondOrder {
        m: usize,
        base: u8,
        local: Vec<u8>,
        deps: Vec<usize>,
    },
    Margolus {
        block: usize,
        forward: Vec<u32>,
        backward: Vec<u32>,
        // members[phase][cell * block + j]: j-th cell of the block containing `cell`
        members: Vec<Vec<usize>>,
        // position of `cell` inside its block, per phase
        slot: Vec<Vec<u8>>,
    },
}

/// Rule + geometry, validated and ready to step.
#[derive(Debug, Clone)]
pub struct Dynamics {
    geometry: Geometry,
    rule: Rule,
    alphabet: u32,
    // moore[cell * m + k]: k-th neighbour in row-major offset order (-1, 0, 1)^d
    moore: Vec<usize>,
    m: usize,
    kernel: Kernel,
}

impl Dynamics {
    pub fn new(rule: &Rule, geometry: &Geometry) -> Result<Dynamics> {
        let d = geometry.dimension();
        if rule.dimension() != d {
            return Err(Error::IncompatibleGeometry(format!(
                "rule is {}-dimensional, lattice is {d}-dimensional",
                rule.dimension()
            )));
        }
        if let Some(a) = rule.alphabet() {
            if a != geometry.alphabet() {
                return Err(Error::IncompatibleGeometry(format!(
                    "rule needs alphabet {a}, lattice has {}",
                    geometry.alphabet()
                )));
            }
        }
        let n = geometry.cell_count();
        let m = moore_size(d);
        let mut moore = Vec::with_capacity(n * m);
        let mut delta = vec![0i64; d];
        for cell in 0..n {
            for k in 0..m {
                let mut rest = k;
                for slot in delta.iter_mut().rev() {
                    *slot = (rest % 3) as i64 - 1;
                    rest /= 3;
                }
                moore.push(geometry.offset(cell, &delta));
            }
        }
        let a = geometry.alphabet();
        let kernel = match rule {
            Rule::Shift { vector } => {
                let neg: Vec<i64> = vector.iter().map(|x| -x).collect();
                Kernel::Shift {
                    forward: (0..n).map(|c| geometry.offset(c, &neg)).collect(),
                    backward: (0..n).map(|c| geometry.offset(c, vector)).collect(),
                }
            }
            Rule::Table(t) => Kernel::Table {
                m,
                forward_deps: relevant_positions(&t.forward, a, m),
                forward: t.forward.clone(),
                backward: t.backward.clone(),
            },
            Rule::SecondOrder(s) => {
                let mut deps = relevant_positions(&s.local, s.base, m);
                if !deps.contains(&(m / 2)) {
                    deps.push(m / 2);
                    deps.sort_unstable();
                }
                Kernel::SecondOrder {
                    m,
                    base: s.base as u8,
                    local: s.local.clone(),
                    deps,
                }
            }
            Rule::Margolus(mr) => {
                if geometry.dims().iter().any(|&n| n % 2 != 0) {
                    return Err(Error::IncompatibleGeometry(
                        "block rules need even side lengths".into(),
                    ));
                }
                let block = mr.block_len();
                let mut members = Vec::new();
                let mut slots = Vec::new();
                for offset in &mr.offsets {
                    let mut mem = Vec::with_capacity(n * block);
                    let mut slot = Vec::with_capacity(n);
                    for cell in 0..n {
                        let coord = geometry.coord_of(cell);
                        let bits: Vec<i64> = coord
                            .iter()
                            .zip(offset)
                            .map(|(&x, &o)| (x - o).rem_euclid(2))
                            .collect();
                        let origin: Vec<i64> = coord.iter().zip(&bits).map(|(&x, &b)| x - b).collect();
                        slot.push(bits.iter().fold(0u8, |acc, &b| acc * 2 + b as u8));
                        for j in 0..block {
                            let delta: Vec<i64> = (0..d).map(|i| ((j >> (d - 1 - i)) & 1) as i64).collect();
                            let corner = geometry.index_of(&origin).expect("dimension matches");
                            mem.push(geometry.offset(corner, &delta));
                        }
                    }
                    members.push(mem);
                    slots.push(slot);
                }
                Kernel::Margolus {
                    block,
                    forward: mr.forward.clone(),
                    backward: mr.backward.clone(),
                    members,
                    slot: slots,
                }
            }
        };
        Ok(Dynamics {
            geometry: geometry.clone(),
            rule: rule.clone(),
            alphabet: a,
            moore,
            m,
            kernel,
        })
    }

    pub fn geometry(&self) -> &Geometry {
        &self.geometry
    }

    pub fn rule(&self) -> &Rule {
        &self.rule
    }

    pub fn period(&self) -> usize {
        self.rule.period()
    }

    fn phase(&self, clock: i64) -> usize {
        clock.rem_euclid(self.period() as i64) as usize
    }

    #[inline]
    fn neighbourhood_index(&self, src: &[u8], cell: usize, base: u32) -> usize {
        let nb = &self.moore[cell * self.m..(cell + 1) * self.m];
        nb.iter().fold(0usize, |acc, &c| acc * base as usize + src[c] as usize)
    }

    /// New symbol of `cell` after one step taken from time `clock`.
    #[inline]
    pub fn update(&self, src: &[u8], cell: usize, clock: i64, dir: Direction) -> u8 {
        match &self.kernel {
            Kernel::Shift { forward, backward } => match dir {
                Direction::Forward => src[forward[cell]],
                Direction::Backward => src[backward[cell]],
            },
            Kernel::Table { forward, backward, .. } => {
                let idx = self.neighbourhood_index(src, cell, self.alphabet);
                match dir {
                    Direction::Forward => forward[idx],
                    Direction::Backward => backward[idx],
                }
            }
            Kernel::SecondOrder { m, base, local, .. } => {
                let b = *base;
                let nb = &self.moore[cell * m..(cell + 1) * m];
                let own = src[cell];
                let (present, previous) = (own % b, own / b);
                match dir {
                    Direction::Forward => {
                        let idx = nb.iter().fold(0usize, |acc, &c| acc * b as usize + (src[c] % b) as usize);
                        let next = (local[idx] + b - previous) % b;
                        next + b * present
                    }
                    Direction::Backward => {
                        let idx = nb.iter().fold(0usize, |acc, &c| acc * b as usize + (src[c] / b) as usize);
                        let earlier = (local[idx] + b - present) % b;
                        previous + b * earlier
                    }
                }
            }
            Kernel::Margolus {
                block,
                forward,
                backward,
                members,
                slot,
            } => {
                let (phase, table) = match dir {
                    Direction::Forward => (self.phase(clock), forward),
                    Direction::Backward => (self.phase(clock - 1), backward),
                };
                let mem = &members[phase][cell * block..(cell + 1) * block];
                let a = self.alphabet;
                let idx = mem.iter().fold(0u32, |acc, &c| acc * a + src[c] as u32);
                let image = table[idx as usize];
                let shift = (block - 1 - slot[phase][cell] as usize) as u32;
                ((image / a.pow(shift)) % a) as u8
            }
        }
    }

    /// Cells whose current value determines `cell` after a forward step from `clock`.
    pub fn for_each_dependency(&self, cell: usize, clock: i64, mut f: impl FnMut(usize)) {
        match &self.kernel {
            Kernel::Shift { forward, .. } => f(forward[cell]),
            Kernel::Table { m, forward_deps, .. } => {
                for &k in forward_deps {
                    f(self.moore[cell * m + k]);
                }
            }
            Kernel::SecondOrder { m, deps, .. } => {
                for &k in deps {
                    f(self.moore[cell * m + k]);
                }
            }
            Kernel::Margolus { block, members, .. } => {
                let phase = self.phase(clock);
                for &c in &members[phase][cell * block..(cell + 1) * block] {
                    f(c);
                }
            }
        }
    }

    /// Radius-1 Moore neighbours of `cell`.
    pub fn moore_neighbours(&self, cell: usize) -> &[usize] {
        &self.moore[cell * self.m..(cell + 1) * self.m]
    }

    pub fn step_into(&self, src: &[u8], dst: &mut [u8], clock: i64, dir: Direction) {
        for (cell, out) in dst.iter_mut().enumerate() {
            *out = self.update(src, cell, clock, dir);
        }
    }

    pub fn check_state(&self, state: &FullState) -> Result<()> {
        if state.geometry() != &self.geometry {
            return Err(Error::IncompatibleGeometry("state lives on a different torus".into()));
        }
        Ok(())
    }

    pub fn step(&self, state: &FullState, dir: Direction) -> Result<FullState> {
        self.check_state(state)?;
        let mut next = state.clone();
        self.step_into(state.symbols(), next.symbols_mut(), state.clock(), dir);
        next.set_clock(match dir {
            Direction::Forward => state.clock() + 1,
            Direction::Backward => state.clock() - 1,
        });
        Ok(next)
    }

    pub fn evolve(&self, state: &FullState, t: i64) -> Result<FullState> {
        self.check_state(state)?;
        let dir = if t >= 0 { Direction::Forward } else { Direction::Backward };
        let mut cur = state.clone();
        let mut buf = state.symbols().to_vec();
        for _ in 0..t.unsigned_abs() {
            self.step_into(cur.symbols(), &mut buf, cur.clock(), dir);
            std::mem::swap(cur.symbols_mut(), &mut buf);
            let clock = cur.clock() + if t >= 0 { 1 } else { -1 };
            cur.set_clock(clock);
        }
        Ok(cur)
    }
}

/// Neighbourhood positions on which a local table actually depends.
fn relevant_positions(table: &[u8], base: u32, m: usize) -> Vec<usize> {
    let base = base as usize;
    (0..m)
        .filter(|&p| {
            let weight = base.pow((m - 1 - p) as u32);
            (0..table.len()).any(|idx| {
                let digit = (idx / weight) % base;
                (1..base).any(|delta| {
                    let other = idx - digit * weight + ((digit + delta) % base) * weight;
                    table[other] != table[idx]
                })
            })
        })
        .collect()
}
