// Independent reference implementations used as oracles. Nothing here calls
// the library's stepping or search code.
#![allow(dead_code)]

/// Plain full-torus state: row-major symbols on `dims`, plus the step count.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Torus {
    pub dims: Vec<usize>,
    pub cells: Vec<u8>,
    pub clock: u64,
}

impl Torus {
    pub fn zeros(dims: &[usize]) -> Torus {
        Torus {
            dims: dims.to_vec(),
            cells: vec![0; dims.iter().product()],
            clock: 0,
        }
    }

    pub fn index(&self, coord: &[i64]) -> usize {
        coord
            .iter()
            .zip(&self.dims)
            .fold(0, |acc, (&x, &n)| acc * n + x.rem_euclid(n as i64) as usize)
    }

    pub fn coord(&self, mut cell: usize) -> Vec<i64> {
        let mut out = vec![0; self.dims.len()];
        for (k, &n) in self.dims.iter().enumerate().rev() {
            out[k] = (cell % n) as i64;
            cell /= n;
        }
        out
    }
}

pub type Stepper = fn(&Torus) -> Torus;

/// `new[x] = old[x - v]` for the unit vector `v = +e_0`.
pub fn shift_forward(s: &Torus) -> Torus {
    move_by(s, 1)
}

/// `new[x] = old[x + e_0]`.
pub fn shift_backward(s: &Torus) -> Torus {
    move_by(s, -1)
}

fn move_by(s: &Torus, v: i64) -> Torus {
    let mut out = s.clone();
    for c in 0..s.cells.len() {
        let mut x = s.coord(c);
        x[0] -= v;
        out.cells[c] = s.cells[s.index(&x)];
    }
    out.clock += 1;
    out
}

pub fn identity(s: &Torus) -> Torus {
    let mut out = s.clone();
    out.clock += 1;
    out
}

/// Billiard-ball block rule: blocks anchored at (0,0) on even steps and (1,1)
/// on odd ones; block value UL*8+UR*4+LL*2+LR; swaps 8<->1, 4<->2, 9<->6.
pub fn billiard_ball(s: &Torus) -> Torus {
    let (rows, cols) = (s.dims[0] as i64, s.dims[1] as i64);
    let off = (s.clock % 2) as i64;
    let mut out = s.clone();
    for r in (0..rows).step_by(2) {
        for c in (0..cols).step_by(2) {
            let (r0, c0) = (r + off, c + off);
            let cells = [
                s.index(&[r0, c0]),
                s.index(&[r0, c0 + 1]),
                s.index(&[r0 + 1, c0]),
                s.index(&[r0 + 1, c0 + 1]),
            ];
            let v = cells.iter().fold(0u8, |acc, &i| acc * 2 + s.cells[i]);
            let w = match v {
                8 => 1,
                1 => 8,
                4 => 2,
                2 => 4,
                9 => 6,
                6 => 9,
                x => x,
            };
            for (k, &i) in cells.iter().enumerate() {
                out.cells[i] = (w >> (3 - k)) & 1;
            }
        }
    }
    out.clock += 1;
    out
}

pub fn run(step: Stepper, s: &Torus, t: u64) -> Torus {
    (0..t).fold(s.clone(), |acc, _| step(&acc))
}

/// Digits of `index` in base `a`, first digit most significant.
pub fn digits(mut index: u64, a: u64, len: usize) -> Vec<u8> {
    let mut out = vec![0; len];
    for d in out.iter_mut().rev() {
        *d = (index % a) as u8;
        index /= a;
    }
    out
}

/// Oracle program choice: `None` leaves a window cell free (quantified).
pub type Choice = Vec<Option<u8>>;

/// All choice vectors over `len` cells in oracle order, each cell
/// `None < 0 < .. < a-1` when `enumerate`, else `0 < .. < a-1`.
pub fn choices(len: usize, a: u8, enumerate: bool) -> Vec<Choice> {
    let base = a as u64 + enumerate as u64;
    (0..base.pow(len as u32))
        .map(|i| {
            digits(i, base, len)
                .into_iter()
                .map(|d| {
                    if enumerate {
                        d.checked_sub(1)
                    } else {
                        Some(d)
                    }
                })
                .collect()
        })
        .collect()
}

/// Brute force: first `(t, choice)` on `window` such that every input on
/// `region` (from `inputs`) and every content of free window cells evolves
/// under `step` to `expected(input)` on `region` at time `t`. Background zero.
pub fn search(
    step: Stepper,
    dims: &[usize],
    a: u8,
    region: &[usize],
    inputs: &[Vec<u8>],
    expected: &dyn Fn(&[u8]) -> Vec<u8>,
    window: &[usize],
    max_time: u64,
    enumerate: bool,
) -> Option<(u64, Choice)> {
    let all = choices(window.len(), a, enumerate);
    for t in 0..=max_time {
        for ch in &all {
            if works(step, dims, a, region, inputs, expected, window, ch, t) {
                return Some((t, ch.clone()));
            }
        }
    }
    None
}

#[allow(clippy::too_many_arguments)]
pub fn works(
    step: Stepper,
    dims: &[usize],
    a: u8,
    region: &[usize],
    inputs: &[Vec<u8>],
    expected: &dyn Fn(&[u8]) -> Vec<u8>,
    window: &[usize],
    ch: &Choice,
    t: u64,
) -> bool {
    let free: Vec<usize> = window.iter().zip(ch).filter(|(_, c)| c.is_none()).map(|(&w, _)| w).collect();
    let free_count = (a as u64).pow(free.len() as u32);
    inputs.iter().all(|input| {
        (0..free_count).all(|f| {
            let mut s = Torus::zeros(dims);
            for (&c, &v) in region.iter().zip(input) {
                s.cells[c] = v;
            }
            for (&c, v) in window.iter().zip(ch) {
                if let Some(v) = v {
                    s.cells[c] = *v;
                }
            }
            for (&c, v) in free.iter().zip(digits(f, a as u64, free.len())) {
                s.cells[c] = v;
            }
            let out = run(step, &s, t);
            region.iter().map(|&c| out.cells[c]).collect::<Vec<_>>() == expected(input)
        })
    })
}

/// Every configuration of `len` cells over `a` symbols, lexicographic.
pub fn all_inputs(len: usize, a: u8) -> Vec<Vec<u8>> {
    (0..(a as u64).pow(len as u32)).map(|i| digits(i, a as u64, len)).collect()
}
