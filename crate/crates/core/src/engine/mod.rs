//! Reversible rule families, exact forward/backward evolution and structural verifiers.

mod cone;
mod dynamics;
mod rules;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use cone::{Cone, Scratch};
pub use dynamics::{Direction, Dynamics};
pub use rules::{moore_size, MargolusRule, Rule, RuleDescription, SecondOrderRule, TableRule};

use crate::error::{ensure_cap, Error, Result};
use crate::lattice::{
    light_cone_valid, moore_neighborhood, Configuration, FullState, Geometry, Region,
};

/// Default bound on `a^cells` for exhaustive verification.
pub const DEFAULT_EXHAUSTIVE_CAP: u64 = 1 << 24;

/// One application of the forward or backward global map.
pub fn step(state: &FullState, rule: &Rule, direction: Direction) -> Result<FullState> {
    Dynamics::new(rule, state.geometry())?.step(state, direction)
}

/// `t`-fold composition of the step; backward when `t < 0`.
pub fn evolve(state: &FullState, rule: &Rule, t: i64) -> Result<FullState> {
    Dynamics::new(rule, state.geometry())?.evolve(state, t)
}

/// Table of `c -> alpha_t(env, c)|_target` over all `c` in `A^region`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct InducedMap {
    region: Region,
    target: Region,
    time: u64,
    env: Configuration,
    alphabet: u32,
    outputs: Vec<Vec<u8>>,
}

impl InducedMap {
    pub fn region(&self) -> &Region {
        &self.region
    }

    pub fn target(&self) -> &Region {
        &self.target
    }

    pub fn time(&self) -> u64 {
        self.time
    }

    pub fn env(&self) -> &Configuration {
        &self.env
    }

    pub fn len(&self) -> usize {
        self.outputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.outputs.is_empty()
    }

    /// Output symbols indexed by the lexicographic rank of the input.
    pub fn outputs(&self) -> &[Vec<u8>] {
        &self.outputs
    }

    pub fn apply(&self, input: &Configuration) -> Result<Configuration> {
        if input.region() != &self.region {
            return Err(Error::NotContained);
        }
        let out = self.outputs[input.index(self.alphabet) as usize].clone();
        Configuration::new(self.target.clone(), out, self.alphabet)
    }

    pub fn is_bijective(&self) -> bool {
        if self.region.len() != self.target.len() {
            return false;
        }
        let mut seen = std::collections::HashSet::new();
        self.outputs.iter().all(|o| seen.insert(o.clone()))
    }
}

/// Induced map of the region onto `target` after `t` steps with the rest of
/// the relevant cells held at `env`.
pub fn induced_map(
    rule: &Rule,
    geometry: &Geometry,
    env: &Configuration,
    region: &Region,
    target: &Region,
    t: u64,
) -> Result<InducedMap> {
    if !light_cone_valid(geometry, target, t) {
        return Err(Error::LightCone { time: t });
    }
    if !env.region().is_disjoint(region) {
        return Err(Error::Overlap("environment and input region share cells".into()));
    }
    let cone = moore_neighborhood(target, t as usize, geometry);
    if !cone.is_subset(&env.region().union(region)) {
        return Err(Error::Coverage(format!(
            "environment and region do not cover the radius-{t} neighbourhood of the target"
        )));
    }
    let count = geometry.configurations(region.len());
    ensure_cap(count, DEFAULT_EXHAUSTIVE_CAP)?;
    let dynamics = Dynamics::new(rule, geometry)?;
    let evaluator = Cone::new(&dynamics, &[(t, target)], 0);
    let mut init = FullState::with_configuration(geometry, env)?.symbols().to_vec();
    let mut scratch = Scratch::new(geometry.cell_count());
    let mut out = Vec::new();
    let a = geometry.alphabet();
    let mut outputs = Vec::with_capacity(count as usize);
    for idx in 0..count {
        let input = Configuration::from_index(region.clone(), a, idx);
        for (c, s) in input.iter() {
            init[c] = s;
        }
        evaluator.run(&dynamics, &init, &mut scratch, &mut out);
        outputs.push(out.clone());
    }
    Ok(InducedMap {
        region: region.clone(),
        target: target.clone(),
        time: t,
        env: env.clone(),
        alphabet: a,
        outputs,
    })
}

/// How a verifier chooses the states it tests.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "mode")]
pub enum VerifyMode {
    Exhaustive,
    Sampled { samples: u64, seed: u64 },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ReversibilityReport {
    pub pass: bool,
    pub tested: u128,
    /// A state with `backward(forward(s)) != s`.
    pub counterexample: Option<FullState>,
    /// Two distinct states with the same forward image, when one exists.
    pub collision: Option<(FullState, FullState)>,
}

pub(crate) const SAMPLE_CHUNK: u64 = 1024;

/// Deterministic sample stream: chunk `j` of any sampled run draws from its
/// own ChaCha stream, so results do not depend on how chunks are scheduled.
pub(crate) fn chunk_rng(seed: u64, chunk: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(chunk);
    rng
}

/// Uniform random state from a seeded stream, clock 0.
pub fn sample_state(geometry: &Geometry, seed: u64) -> FullState {
    random_state(geometry, &mut ChaCha8Rng::seed_from_u64(seed))
}

fn random_state(geometry: &Geometry, rng: &mut ChaCha8Rng) -> FullState {
    let a = geometry.alphabet();
    let cells = (0..geometry.cell_count()).map(|_| rng.gen_range(0..a) as u8).collect();
    FullState::from_symbols(geometry, cells).expect("symbols in range")
}

/// Calls `check` on every tested state; returns the first failing state in
/// enumeration order (deterministic regardless of worker count).
fn find_first_failure<F>(geometry: &Geometry, mode: VerifyMode, cap: u64, check: F) -> Result<(u128, Option<FullState>)>
where
    F: Fn(&FullState) -> bool + Sync,
{
    match mode {
        VerifyMode::Exhaustive => {
            let total = geometry.configurations(geometry.cell_count());
            ensure_cap(total, cap)?;
            let total = total as u64;
            let chunks = total.div_ceil(SAMPLE_CHUNK);
            let failure = (0..chunks).into_par_iter().find_map_first(|j| {
                let end = ((j + 1) * SAMPLE_CHUNK).min(total);
                (j * SAMPLE_CHUNK..end)
                    .map(|i| FullState::from_index(geometry, i as u128))
                    .find(|s| !check(s))
            });
            Ok((total as u128, failure))
        }
        VerifyMode::Sampled { samples, seed } => {
            let chunks = samples.div_ceil(SAMPLE_CHUNK);
            let failure = (0..chunks).into_par_iter().find_map_first(|j| {
                let mut rng = chunk_rng(seed, j);
                let len = (samples - j * SAMPLE_CHUNK).min(SAMPLE_CHUNK);
                (0..len).map(|_| random_state(geometry, &mut rng)).find(|s| !check(s))
            });
            Ok((samples as u128, failure))
        }
    }
}

/// Checks `backward(forward(s)) == s` on the tested states.
pub fn verify_reversibility(rule: &Rule, geometry: &Geometry, mode: VerifyMode, cap: u64) -> Result<ReversibilityReport> {
    let dynamics = Dynamics::new(rule, geometry)?;
    let period = dynamics.period() as i64;
    let round_trip = |s: &FullState| {
        (0..period).all(|clock| {
            let s = s.clone().with_clock(clock);
            let f = dynamics.step(&s, Direction::Forward).expect("geometry checked");
            dynamics.step(&f, Direction::Backward).expect("geometry checked") == s
        })
    };
    let (tested, failure) = find_first_failure(geometry, mode, cap, round_trip)?;
    let Some(bad) = failure else {
        return Ok(ReversibilityReport {
            pass: true,
            tested,
            counterexample: None,
            collision: None,
        });
    };
    let collision = match mode {
        VerifyMode::Exhaustive => {
            let clock = (0..period)
                .find(|&c| {
                    let s = bad.clone().with_clock(c);
                    let f = dynamics.step(&s, Direction::Forward).expect("checked");
                    dynamics.step(&f, Direction::Backward).expect("checked") != s
                })
                .unwrap_or(0);
            let probe = bad.clone().with_clock(clock);
            let image = dynamics.step(&probe, Direction::Forward)?;
            let total = tested as u64;
            (0..total)
                .into_par_iter()
                .map(|i| FullState::from_index(geometry, i as u128).with_clock(clock))
                .find_first(|s| *s != probe && dynamics.step(s, Direction::Forward).expect("checked") == image)
                .map(|other| (probe, other))
        }
        VerifyMode::Sampled { .. } => None,
    };
    Ok(ReversibilityReport {
        pass: false,
        tested,
        counterexample: Some(bad),
        collision,
    })
}

/// Checks that stepping commutes with translation by `shift` at every clock phase.
pub fn verify_translation_covariance(
    rule: &Rule,
    geometry: &Geometry,
    shift: &[i64],
    mode: VerifyMode,
    cap: u64,
) -> Result<bool> {
    if shift.len() != geometry.dimension() {
        return Err(Error::Dimension {
            expected: geometry.dimension(),
            got: shift.len(),
        });
    }
    if !rule.in_covariance_sublattice(shift) {
        return Err(Error::OutsideCovariance {
            vector: shift.to_vec(),
        });
    }
    let dynamics = Dynamics::new(rule, geometry)?;
    let period = dynamics.period() as i64;
    let commutes = |s: &FullState| {
        (0..period).all(|clock| {
            let s = s.clone().with_clock(clock);
            [Direction::Forward, Direction::Backward].iter().all(|&dir| {
                let a = dynamics.step(&s.translate(shift), dir).expect("checked");
                let b = dynamics.step(&s, dir).expect("checked").translate(shift);
                a == b
            })
        })
    };
    let (_, failure) = find_first_failure(geometry, mode, cap, commutes)?;
    Ok(failure.is_none())
}
