//! Certificate searches for state preparation and map implementation, and the
//! instability and persistence probes.
//!
//! A search fixes the region `R`, a window `W` of programmable environment
//! cells and a horizon `T`. Cells outside `W` and `R` form an all-zero
//! background. Candidates are ordered by time first, then lexicographically by
//! the program over `W` (first cell most significant), so the first candidate
//! that passes is the canonical answer whatever the worker count.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::engine::{chunk_rng, Cone, Dynamics, Rule, Scratch, DEFAULT_EXHAUSTIVE_CAP, SAMPLE_CHUNK};
use crate::ensemble::Ensemble;
use crate::error::{checked_pow, ensure_cap, Error, Result};
use crate::lattice::{
    moore_neighborhood, parse_symbols, require_light_cone, symbols_index, symbols_to_text, Configuration, FullState,
    Geometry, Region, Restrict,
};

/// Default bound on `choices^|W| * (T + 1)` for exhaustive searches.
pub const DEFAULT_SEARCH_CAP: u64 = 1 << 24;

/// What happens to window cells that the program leaves unset.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Policy {
    /// Every window cell is programmed; the program is an assignment of `W`.
    #[default]
    Zero,
    /// Each window cell is either programmed or left free, in which case the
    /// candidate must work for every value it takes.
    Enumerate,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "mode")]
pub enum SearchMode {
    #[default]
    Exhaustive,
    /// Random programs per time step. Results are reproducible but not canonical.
    Sampled { samples: u64, seed: u64 },
}

/// Total table of a map `A^R -> A^R`, indexed by the lexicographic rank of the input.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MapTable {
    region: Region,
    alphabet: u32,
    outputs: Vec<Vec<u8>>,
}

impl MapTable {
    pub fn new(region: Region, alphabet: u32, outputs: Vec<Vec<u8>>) -> Result<Self> {
        let n = checked_pow(alphabet, region.len());
        ensure_cap(n, DEFAULT_EXHAUSTIVE_CAP)?;
        if outputs.len() as u128 != n {
            return Err(Error::Length {
                expected: n as usize,
                got: outputs.len(),
            });
        }
        for out in &outputs {
            Configuration::new(region.clone(), out.clone(), alphabet)?;
        }
        Ok(MapTable {
            region,
            alphabet,
            outputs,
        })
    }

    pub fn from_fn(region: Region, alphabet: u32, f: impl Fn(&[u8]) -> Vec<u8>) -> Result<Self> {
        let n = checked_pow(alphabet, region.len());
        ensure_cap(n, DEFAULT_EXHAUSTIVE_CAP)?;
        let outputs = (0..n)
            .map(|i| f(Configuration::from_index(region.clone(), alphabet, i).symbols()))
            .collect();
        MapTable::new(region, alphabet, outputs)
    }

    pub fn identity(region: Region, alphabet: u32) -> Result<Self> {
        MapTable::from_fn(region, alphabet, |c| c.to_vec())
    }

    /// Two columns per line, input then output symbols in region order; an
    /// optional `->` between them is ignored, as are blank lines and `#` comments.
    /// Every input must appear exactly once.
    pub fn parse(region: Region, alphabet: u32, text: &str) -> Result<Self> {
        let n = checked_pow(alphabet, region.len());
        ensure_cap(n, DEFAULT_EXHAUSTIVE_CAP)?;
        let mut outputs: Vec<Option<Vec<u8>>> = vec![None; n as usize];
        for (lineno, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let cols: Vec<&str> = line.split_whitespace().filter(|t| *t != "->").collect();
            let [input, output] = cols[..] else {
                return Err(Error::Parse(format!("line {}: expected two columns", lineno + 1)));
            };
            let input = Configuration::new(region.clone(), parse_symbols(input)?, alphabet)?;
            let output = Configuration::new(region.clone(), parse_symbols(output)?, alphabet)?;
            let slot = &mut outputs[input.index(alphabet) as usize];
            if slot.is_some() {
                return Err(Error::Parse(format!(
                    "line {}: input {} listed twice",
                    lineno + 1,
                    input.symbol_text()
                )));
            }
            *slot = Some(output.symbols().to_vec());
        }
        let covered = outputs.iter().filter(|o| o.is_some()).count();
        if covered as u128 != n {
            return Err(Error::Parse(format!("table covers {covered} of {n} inputs")));
        }
        MapTable::new(region, alphabet, outputs.into_iter().flatten().collect())
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for (i, out) in self.outputs.iter().enumerate() {
            let input = Configuration::from_index(self.region.clone(), self.alphabet, i as u128);
            s.push_str(&format!("{} {}\n", input.symbol_text(), symbols_to_text(out)));
        }
        s
    }

    pub fn region(&self) -> &Region {
        &self.region
    }

    pub fn alphabet(&self) -> u32 {
        self.alphabet
    }

    pub fn outputs(&self) -> &[Vec<u8>] {
        &self.outputs
    }

    pub fn output(&self, input: &[u8]) -> &[u8] {
        &self.outputs[symbols_index(input, self.alphabet) as usize]
    }

    pub fn is_bijective(&self) -> bool {
        let mut seen = std::collections::HashSet::new();
        self.outputs.iter().all(|o| seen.insert(o))
    }
}

/// What a certificate achieves.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Goal {
    /// `R` ends in this configuration.
    Prepare(Configuration),
    /// `R` ends in `table(c)` when it starts in `c`.
    Map(MapTable),
    /// The initial content of `R` reappears on `R + displacement`.
    Transfer { displacement: Vec<i64> },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CertificateKind {
    CondPrep,
    UncondPrep,
    Map,
    Transfer,
}

/// A verified witness `(R_p, c_p, t)`.
///
/// Certificates are only built by the searches, which re-simulate them on the
/// full torus before returning; [`Certificate::verify`] repeats that check.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Certificate {
    pub kind: CertificateKind,
    pub region: Region,
    /// Initial content of `R` for conditional preparation; `None` means every content.
    pub initial: Option<Configuration>,
    pub goal: Goal,
    /// Program region `R_p` with its configuration `c_p`.
    pub program: Configuration,
    pub time: u64,
    pub window: Region,
    pub policy: Policy,
    /// Cells outside `W` and `R` are quantified instead of zero.
    pub background_quantified: bool,
    /// Found by an exhaustive (canonical) search.
    pub canonical: bool,
    /// SHA-256 over the re-simulated outputs of every quantified input.
    pub hash: String,
}

impl Certificate {
    pub fn program_region(&self) -> &Region {
        self.program.region()
    }

    pub fn output_region(&self, geometry: &Geometry) -> Result<Region> {
        match &self.goal {
            Goal::Transfer { displacement } => self.region.translate(geometry, displacement),
            _ => Ok(self.region.clone()),
        }
    }

    /// The program extended by zeros to the whole window.
    pub fn window_assignment(&self) -> Configuration {
        let symbols = self
            .window
            .cells()
            .iter()
            .map(|&c| self.program.get(c).unwrap_or(0))
            .collect();
        Configuration::new(self.window.clone(), symbols, u32::MAX).expect("length matches")
    }

    fn quantified_cells(&self, geometry: &Geometry) -> Result<Region> {
        let out = self.output_region(geometry)?;
        let light = moore_neighborhood(&out, self.time as usize, geometry);
        let mut q = if self.initial.is_none() {
            self.region.clone()
        } else {
            Region::empty()
        };
        if self.policy == Policy::Enumerate {
            q = q.union(&self.window.difference(self.program.region()).intersection(&light));
        }
        if self.background_quantified {
            q = q.union(&light.difference(&self.window.union(&self.region)));
        }
        Ok(q)
    }

    fn expected(&self, geometry: &Geometry, state: &FullState) -> Result<Vec<u8>> {
        let input = state.restrict(&self.region)?;
        Ok(match &self.goal {
            Goal::Prepare(c) => c.symbols().to_vec(),
            Goal::Map(m) => m.output(input.symbols()).to_vec(),
            Goal::Transfer { displacement } => {
                let out = self.output_region(geometry)?;
                out.cells()
                    .iter()
                    .map(|&c| {
                        let back: Vec<i64> = displacement.iter().map(|x| -x).collect();
                        state.get(geometry.offset(c, &back))
                    })
                    .collect()
            }
        })
    }

    /// Full-torus re-simulation over every quantified input, independent of
    /// the cone evaluator. Returns whether all outputs match and their digest.
    pub fn resimulate(&self, rule: &Rule, geometry: &Geometry) -> Result<(bool, String)> {
        if !self.program.region().is_subset(&self.window) || !self.window.is_disjoint(&self.region) {
            return Ok((false, String::new()));
        }
        let dynamics = Dynamics::new(rule, geometry)?;
        let out = self.output_region(geometry)?;
        let q = self.quantified_cells(geometry)?;
        let count = checked_pow(geometry.alphabet(), q.len());
        ensure_cap(count, DEFAULT_EXHAUSTIVE_CAP)?;
        let mut base = FullState::with_configuration(geometry, &self.program)?;
        if let Some(ci) = &self.initial {
            base.set_configuration(ci)?;
        }
        let mut hasher = Sha256::new();
        hasher.update(rule.label().as_bytes());
        hasher.update(self.time.to_le_bytes());
        let mut ok = true;
        for rank in 0..count {
            let mut s = base.clone();
            s.set_configuration(&Configuration::from_index(q.clone(), geometry.alphabet(), rank))?;
            let result = dynamics.evolve(&s, self.time as i64)?.restrict(&out)?;
            ok &= result.symbols() == self.expected(geometry, &s)?.as_slice();
            hasher.update(result.symbols());
        }
        Ok((ok, hex::encode(hasher.finalize())))
    }

    /// Re-simulates and compares against the stored digest.
    pub fn verify(&self, rule: &Rule, geometry: &Geometry) -> Result<bool> {
        let (ok, hash) = self.resimulate(rule, geometry)?;
        Ok(ok && hash == self.hash)
    }

    pub fn to_record(&self, geometry: &Geometry) -> Value {
        let goal = match &self.goal {
            Goal::Prepare(c) => json!({"prepare": c.symbol_text()}),
            Goal::Map(m) => json!({"map": m.to_text().lines().collect::<Vec<_>>()}),
            Goal::Transfer { displacement } => json!({"transfer": displacement}),
        };
        json!({
            "kind": self.kind,
            "region": self.region.to_text(geometry),
            "initial": self.initial.as_ref().map(|c| c.symbol_text()),
            "goal": goal,
            "program_region": self.program.region().to_text(geometry),
            "program": self.program.symbol_text(),
            "time": self.time,
            "window": self.window.to_text(geometry),
            "policy": self.policy,
            "background_quantified": self.background_quantified,
            "canonical": self.canonical,
            "hash": self.hash,
        })
    }

    pub fn from_record(geometry: &Geometry, v: &Value) -> Result<Certificate> {
        let bad = |what: &str| Error::Parse(format!("certificate record: bad or missing {what}"));
        let text = |key: &str| v.get(key).and_then(Value::as_str).ok_or_else(|| bad(key));
        let region = Region::parse(geometry, text("region")?)?;
        let a = geometry.alphabet();
        let initial = match v.get("initial") {
            None | Some(Value::Null) => None,
            Some(s) => Some(Configuration::from_text(
                geometry,
                region.clone(),
                s.as_str().ok_or_else(|| bad("initial"))?,
            )?),
        };
        let g = v.get("goal").ok_or_else(|| bad("goal"))?;
        let goal = if let Some(s) = g.get("prepare").and_then(Value::as_str) {
            Goal::Prepare(Configuration::from_text(geometry, region.clone(), s)?)
        } else if let Some(lines) = g.get("map").and_then(Value::as_array) {
            let text: Vec<&str> = lines.iter().filter_map(Value::as_str).collect();
            Goal::Map(MapTable::parse(region.clone(), a, &text.join("\n"))?)
        } else if let Some(d) = g.get("transfer") {
            let displacement: Vec<i64> = serde_json::from_value(d.clone()).map_err(|_| bad("transfer"))?;
            Goal::Transfer { displacement }
        } else {
            return Err(bad("goal"));
        };
        let program_region = Region::parse(geometry, text("program_region")?)?;
        let from = |key: &str| -> Result<Value> { v.get(key).cloned().ok_or_else(|| bad(key)) };
        Ok(Certificate {
            kind: serde_json::from_value(from("kind")?).map_err(|_| bad("kind"))?,
            initial,
            goal,
            program: Configuration::from_text(geometry, program_region, text("program")?)?,
            time: v.get("time").and_then(Value::as_u64).ok_or_else(|| bad("time"))?,
            window: Region::parse(geometry, text("window")?)?,
            policy: serde_json::from_value(from("policy")?).map_err(|_| bad("policy"))?,
            background_quantified: v
                .get("background_quantified")
                .and_then(Value::as_bool)
                .ok_or_else(|| bad("background_quantified"))?,
            canonical: v.get("canonical").and_then(Value::as_bool).ok_or_else(|| bad("canonical"))?,
            hash: text("hash")?.to_string(),
            region,
        })
    }
}

/// Search space explored without finding a certificate. Not a disproof.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct SearchBounds {
    pub max_time: u64,
    pub window_cells: usize,
    pub policy: Policy,
    /// Candidate programs tested, summed over time steps.
    pub candidates: u128,
    pub canonical: bool,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum SearchOutcome {
    Found(Certificate),
    NotFoundWithinBounds(SearchBounds),
}

impl SearchOutcome {
    pub fn certificate(&self) -> Option<&Certificate> {
        match self {
            SearchOutcome::Found(c) => Some(c),
            SearchOutcome::NotFoundWithinBounds(_) => None,
        }
    }

    pub fn is_found(&self) -> bool {
        self.certificate().is_some()
    }
}

/// What the output of a probe must equal.
#[derive(Clone, Debug)]
pub(crate) enum Expect {
    Constant(Vec<u8>),
    Map(MapTable),
    /// Output position `j` copies input position `src[j]`.
    Copy(Vec<usize>),
}

struct Workspace {
    init: Vec<u8>,
    scratch: Scratch,
    out: Vec<u8>,
    quantified: Vec<usize>,
}

/// Tests candidate programs for one time step: a program assigns some cells of
/// the window (inside the dependency cone of the output); the candidate passes
/// if the output matches for every assignment of the quantified cells.
pub(crate) struct Probe<'a> {
    dynamics: &'a Dynamics,
    cone: Cone,
    base: Vec<u8>,
    pub program: Vec<usize>,
    pub enumerate: bool,
    quantified: Vec<usize>,
    inputs: Vec<usize>,
    expect: Expect,
}

impl<'a> Probe<'a> {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        dynamics: &'a Dynamics,
        time: u64,
        output: &Region,
        base: Vec<u8>,
        window: &Region,
        enumerate: bool,
        is_quantified: impl Fn(usize) -> bool,
        inputs: &Region,
        inputs_quantified: bool,
        expect: Expect,
    ) -> Self {
        let cone = Cone::new(dynamics, &[(time, output)], 0);
        let program: Vec<usize> = cone.inputs().iter().copied().filter(|&c| window.contains(c)).collect();
        let mut quantified: Vec<usize> = cone
            .inputs()
            .iter()
            .copied()
            .filter(|&c| !window.contains(c) && !inputs.contains(c) && is_quantified(c))
            .collect();
        if inputs_quantified {
            quantified.extend_from_slice(inputs.cells());
        }
        quantified.sort_unstable();
        quantified.dedup();
        Probe {
            dynamics,
            cone,
            base,
            program,
            enumerate,
            quantified,
            inputs: inputs.cells().to_vec(),
            expect,
        }
    }

    fn choices(&self) -> u32 {
        self.dynamics.geometry().alphabet() + u32::from(self.enumerate)
    }

    pub fn program_count(&self) -> u128 {
        checked_pow(self.choices(), self.program.len())
    }

    pub fn decode(&self, mut rank: u128) -> Vec<Option<u8>> {
        let base = self.choices() as u128;
        let mut out = vec![None; self.program.len()];
        for slot in out.iter_mut().rev() {
            let d = (rank % base) as u8;
            rank /= base;
            *slot = if self.enumerate { d.checked_sub(1) } else { Some(d) };
        }
        out
    }

    fn workspace(&self) -> Workspace {
        Workspace {
            init: self.base.clone(),
            scratch: Scratch::new(self.dynamics.geometry().cell_count()),
            out: Vec::new(),
            quantified: Vec::new(),
        }
    }

    /// Program cells with a `None` choice are quantified along with the rest.
    fn works(&self, choices: &[Option<u8>], ws: &mut Workspace) -> bool {
        let a = self.dynamics.geometry().alphabet() as u128;
        ws.quantified.clear();
        ws.quantified.extend_from_slice(&self.quantified);
        for (&cell, choice) in self.program.iter().zip(choices) {
            match choice {
                Some(s) => ws.init[cell] = *s,
                None => ws.quantified.push(cell),
            }
        }
        let total = checked_pow(a as u32, ws.quantified.len());
        for rank in 0..total {
            let mut r = rank;
            for &c in ws.quantified.iter().rev() {
                ws.init[c] = (r % a) as u8;
                r /= a;
            }
            self.cone.run(self.dynamics, &ws.init, &mut ws.scratch, &mut ws.out);
            let pass = match &self.expect {
                Expect::Constant(c) => ws.out == *c,
                Expect::Map(m) => {
                    let input: Vec<u8> = self.inputs.iter().map(|&c| ws.init[c]).collect();
                    ws.out == m.output(&input)
                }
                Expect::Copy(src) => src
                    .iter()
                    .zip(&ws.out)
                    .all(|(&j, &o)| ws.init[self.inputs[j]] == o),
            };
            if !pass {
                return false;
            }
        }
        true
    }

    /// Lowest-ranked passing program. Exhaustive results are canonical.
    pub fn first_working(&self, mode: SearchMode) -> (Option<u128>, u128) {
        let count = self.program_count();
        match mode {
            SearchMode::Exhaustive => {
                let found = (0..count as u64)
                    .into_par_iter()
                    .map_init(|| self.workspace(), |ws, r| (r, self.works(&self.decode(r as u128), ws)))
                    .find_first(|(_, ok)| *ok)
                    .map(|(r, _)| r as u128);
                (found, count)
            }
            SearchMode::Sampled { samples, seed } => {
                let chunks = samples.div_ceil(SAMPLE_CHUNK);
                let found = (0..chunks)
                    .into_par_iter()
                    .filter_map(|j| {
                        let mut rng = chunk_rng(seed, j);
                        let mut ws = self.workspace();
                        let len = (samples - j * SAMPLE_CHUNK).min(SAMPLE_CHUNK);
                        let mut best: Option<u128> = None;
                        for _ in 0..len {
                            let r = rng.gen_range(0..count);
                            if best.is_none_or(|b| r < b) && self.works(&self.decode(r), &mut ws) {
                                best = Some(r);
                            }
                        }
                        best
                    })
                    .min();
                (found, samples as u128)
            }
        }
    }

    /// Every passing program rank, ascending.
    pub fn all_working(&self) -> Vec<u128> {
        let mut v: Vec<u128> = (0..self.program_count() as u64)
            .into_par_iter()
            .map_init(|| self.workspace(), |ws, r| (r, self.works(&self.decode(r as u128), ws)))
            .filter(|(_, ok)| *ok)
            .map(|(r, _)| r as u128)
            .collect();
        v.sort_unstable();
        v
    }
}

/// Task for conditional or unconditional state preparation.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PreparationTask {
    pub rule: Rule,
    pub geometry: Geometry,
    pub region: Region,
    /// `Some` for conditional preparation.
    pub initial: Option<Configuration>,
    pub target: Configuration,
    pub max_time: u64,
    pub window: Region,
    pub policy: Policy,
    pub mode: SearchMode,
    pub cap: u64,
}

impl PreparationTask {
    pub fn new(rule: Rule, geometry: Geometry, target: Configuration, max_time: u64, window: Region) -> Self {
        PreparationTask {
            rule,
            geometry,
            region: target.region().clone(),
            initial: None,
            target,
            max_time,
            window,
            policy: Policy::Zero,
            mode: SearchMode::Exhaustive,
            cap: DEFAULT_SEARCH_CAP,
        }
    }

    pub fn with_initial(mut self, initial: Configuration) -> Self {
        self.initial = Some(initial);
        self
    }

    pub fn with_policy(mut self, policy: Policy) -> Self {
        self.policy = policy;
        self
    }

    pub fn with_mode(mut self, mode: SearchMode) -> Self {
        self.mode = mode;
        self
    }

    pub fn with_cap(mut self, cap: u64) -> Self {
        self.cap = cap;
        self
    }
}

/// Task for implementing a map on `R`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BijectionTask {
    pub rule: Rule,
    pub geometry: Geometry,
    pub table: MapTable,
    pub max_time: u64,
    pub window: Region,
    pub policy: Policy,
    pub mode: SearchMode,
    pub cap: u64,
}

impl BijectionTask {
    pub fn new(rule: Rule, geometry: Geometry, table: MapTable, max_time: u64, window: Region) -> Self {
        BijectionTask {
            rule,
            geometry,
            table,
            max_time,
            window,
            policy: Policy::Zero,
            mode: SearchMode::Exhaustive,
            cap: DEFAULT_SEARCH_CAP,
        }
    }

    pub fn with_policy(mut self, policy: Policy) -> Self {
        self.policy = policy;
        self
    }

    pub fn with_mode(mut self, mode: SearchMode) -> Self {
        self.mode = mode;
        self
    }

    pub fn with_cap(mut self, cap: u64) -> Self {
        self.cap = cap;
        self
    }

    pub fn is_bijective(&self) -> bool {
        self.table.is_bijective()
    }
}

/// Task for moving the content of `R` to `R + displacement` with every other
/// cell of the cone unconstrained.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TransferTask {
    pub rule: Rule,
    pub geometry: Geometry,
    pub region: Region,
    pub displacement: Vec<i64>,
    pub max_time: u64,
    pub window: Region,
    pub mode: SearchMode,
    pub cap: u64,
}

struct Search<'a> {
    kind: CertificateKind,
    rule: &'a Rule,
    geometry: &'a Geometry,
    region: &'a Region,
    output: Region,
    initial: Option<&'a Configuration>,
    goal: Goal,
    expect: Expect,
    max_time: u64,
    window: &'a Region,
    policy: Policy,
    background_quantified: bool,
    mode: SearchMode,
    cap: u64,
}

fn run_search(s: Search<'_>) -> Result<SearchOutcome> {
    let g = s.geometry;
    if !s.window.is_disjoint(s.region) {
        return Err(Error::Overlap("search window meets the region".into()));
    }
    if s.window.cells().iter().chain(s.region.cells()).any(|&c| c >= g.cell_count()) {
        return Err(Error::NotContained);
    }
    require_light_cone(g, &s.output, s.max_time)?;
    let choices = g.alphabet() + u32::from(s.policy == Policy::Enumerate);
    if s.mode == SearchMode::Exhaustive {
        let size = checked_pow(choices, s.window.len()).saturating_mul(s.max_time as u128 + 1);
        ensure_cap(size, s.cap)?;
    }
    let dynamics = Dynamics::new(s.rule, g)?;
    let mut base = vec![0u8; g.cell_count()];
    if let Some(ci) = s.initial {
        for (c, v) in ci.iter() {
            base[c] = v;
        }
    }
    let mut candidates = 0u128;
    for t in 0..=s.max_time {
        let probe = Probe::new(
            &dynamics,
            t,
            &s.output,
            base.clone(),
            s.window,
            s.policy == Policy::Enumerate,
            |c| s.background_quantified && !s.window.contains(c),
            s.region,
            s.initial.is_none(),
            s.expect.clone(),
        );
        let (found, tested) = probe.first_working(s.mode);
        candidates += tested;
        if let Some(rank) = found {
            let choices = probe.decode(rank);
            let (cells, symbols): (Vec<usize>, Vec<u8>) = probe
                .program
                .iter()
                .zip(&choices)
                .filter_map(|(&c, ch)| ch.map(|v| (c, v)))
                .unzip();
            let program = Configuration::new(Region::from_cells(g, cells)?, symbols, g.alphabet())?;
            let mut cert = Certificate {
                kind: s.kind,
                region: s.region.clone(),
                initial: s.initial.cloned(),
                goal: s.goal.clone(),
                program,
                time: t,
                window: s.window.clone(),
                policy: s.policy,
                background_quantified: s.background_quantified,
                canonical: s.mode == SearchMode::Exhaustive,
                hash: String::new(),
            };
            let (ok, hash) = cert.resimulate(s.rule, g)?;
            if !ok {
                return Err(Error::Unsound("candidate passed the cone check but failed full re-simulation".into()));
            }
            cert.hash = hash;
            return Ok(SearchOutcome::Found(cert));
        }
    }
    Ok(SearchOutcome::NotFoundWithinBounds(SearchBounds {
        max_time: s.max_time,
        window_cells: s.window.len(),
        policy: s.policy,
        candidates,
        canonical: s.mode == SearchMode::Exhaustive,
    }))
}

fn check_prep(task: &PreparationTask) -> Result<()> {
    if task.target.region() != &task.region {
        return Err(Error::Mismatch("target does not live on the region".into()));
    }
    Configuration::new(task.region.clone(), task.target.symbols().to_vec(), task.geometry.alphabet())?;
    if let Some(ci) = &task.initial {
        if ci.region() != &task.region {
            return Err(Error::Mismatch("initial configuration does not live on the region".into()));
        }
        Configuration::new(task.region.clone(), ci.symbols().to_vec(), task.geometry.alphabet())?;
    }
    Ok(())
}

/// Finds `(e, t)` with `alpha_t(e, c_i)|_R = c_f` for the task's `c_i`.
pub fn search_conditional_prep(task: &PreparationTask) -> Result<SearchOutcome> {
    check_prep(task)?;
    let initial = task
        .initial
        .as_ref()
        .ok_or_else(|| Error::InvalidTask("conditional preparation needs an initial configuration".into()))?;
    run_search(Search {
        kind: CertificateKind::CondPrep,
        rule: &task.rule,
        geometry: &task.geometry,
        region: &task.region,
        output: task.region.clone(),
        initial: Some(initial),
        goal: Goal::Prepare(task.target.clone()),
        expect: Expect::Constant(task.target.symbols().to_vec()),
        max_time: task.max_time,
        window: &task.window,
        policy: task.policy,
        background_quantified: false,
        mode: task.mode,
        cap: task.cap,
    })
}

/// Finds one `(e, t)` that prepares `c_f` from every initial content of `R`.
/// Any initial configuration on the task is ignored.
pub fn search_unconditional_prep(task: &PreparationTask) -> Result<SearchOutcome> {
    check_prep(task)?;
    run_search(Search {
        kind: CertificateKind::UncondPrep,
        rule: &task.rule,
        geometry: &task.geometry,
        region: &task.region,
        output: task.region.clone(),
        initial: None,
        goal: Goal::Prepare(task.target.clone()),
        expect: Expect::Constant(task.target.symbols().to_vec()),
        max_time: task.max_time,
        window: &task.window,
        policy: task.policy,
        background_quantified: false,
        mode: task.mode,
        cap: task.cap,
    })
}

/// Finds `(e, t)` whose induced map on `R` equals the task's table.
pub fn search_map(task: &BijectionTask) -> Result<SearchOutcome> {
    if task.table.alphabet() != task.geometry.alphabet() {
        return Err(Error::Mismatch("table alphabet differs from the lattice".into()));
    }
    run_search(Search {
        kind: CertificateKind::Map,
        rule: &task.rule,
        geometry: &task.geometry,
        region: task.table.region(),
        output: task.table.region().clone(),
        initial: None,
        goal: Goal::Map(task.table.clone()),
        expect: Expect::Map(task.table.clone()),
        max_time: task.max_time,
        window: &task.window,
        policy: task.policy,
        background_quantified: false,
        mode: task.mode,
        cap: task.cap,
    })
}

/// Finds `(R_p, c_p, t)` with `alpha_t(c_p, c)|_{R+x} = c` for every `c` and
/// every content of the remaining cone cells.
pub fn search_transfer(task: &TransferTask) -> Result<SearchOutcome> {
    let g = &task.geometry;
    let output = task.region.translate(g, &task.displacement)?;
    if !output.is_disjoint(&task.region) {
        return Err(Error::Overlap("region and its displaced copy overlap".into()));
    }
    let back: Vec<i64> = task.displacement.iter().map(|x| -x).collect();
    let src = output
        .cells()
        .iter()
        .map(|&c| task.region.position(g.offset(c, &back)).expect("translate of region"))
        .collect();
    run_search(Search {
        kind: CertificateKind::Transfer,
        rule: &task.rule,
        geometry: g,
        region: &task.region,
        output,
        initial: None,
        goal: Goal::Transfer {
            displacement: task.displacement.clone(),
        },
        expect: Expect::Copy(src),
        max_time: task.max_time,
        window: &task.window,
        policy: Policy::Enumerate,
        background_quantified: true,
        mode: task.mode,
        cap: task.cap,
    })
}

/// A configuration `c` of `region` whose one-step update at `cell` differs from
/// `c|_cell` whatever the environment. `region` must contain the radius-1
/// neighbourhood of `cell`.
pub fn instability_witness(
    rule: &Rule,
    geometry: &Geometry,
    region: &Region,
    cell: usize,
) -> Result<Option<Configuration>> {
    let single = Region::from_cells(geometry, [cell])?;
    if !moore_neighborhood(&single, 1, geometry).is_subset(region) {
        return Err(Error::Coverage("region must contain the neighbourhood of the cell".into()));
    }
    let dynamics = Dynamics::new(rule, geometry)?;
    let mut outside = false;
    dynamics.for_each_dependency(cell, 0, |d| outside |= !region.contains(d));
    if outside {
        return Err(Error::Coverage("update of the cell reads outside the region".into()));
    }
    let a = geometry.alphabet();
    let count = checked_pow(a, region.len());
    ensure_cap(count, DEFAULT_EXHAUSTIVE_CAP)?;
    let pos = region.position(cell).expect("cell in region");
    let found = (0..count as u64).into_par_iter().find_first(|&i| {
        let c = Configuration::from_index(region.clone(), a, i as u128);
        let mut buf = vec![0u8; geometry.cell_count()];
        for (x, s) in c.iter() {
            buf[x] = s;
        }
        dynamics.update(&buf, cell, 0, crate::engine::Direction::Forward) != c.symbols()[pos]
    });
    Ok(found.map(|i| Configuration::from_index(region.clone(), a, i as u128)))
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum PersistenceReport {
    /// Earliest time at which some environment breaks the configuration, with
    /// the lexicographically first such environment on the cone's free cells.
    Deviation { time: u64, witness: Configuration },
    /// No deviation found up to the horizon. Inconclusive by design.
    Held { horizon: u64 },
}

/// Starting from `c_f` on `R` and `c_p` on `R_p`, looks for the first time at
/// which some assignment of the remaining cone cells moves `R` off `c_f`.
pub fn persistence_probe(
    rule: &Rule,
    geometry: &Geometry,
    program: &Configuration,
    target: &Configuration,
    horizon: u64,
    cap: u64,
) -> Result<PersistenceReport> {
    let region = target.region();
    if !region.is_disjoint(program.region()) {
        return Err(Error::Overlap("program region meets the region".into()));
    }
    require_light_cone(geometry, region, horizon)?;
    let dynamics = Dynamics::new(rule, geometry)?;
    let mut base = vec![0u8; geometry.cell_count()];
    for (c, s) in target.iter().chain(program.iter()) {
        base[c] = s;
    }
    for t in 1..=horizon {
        let fixed = region.union(program.region());
        let ens = Ensemble::new(&dynamics, &[(t, region)], 0, base.clone(), |c| !fixed.contains(c));
        let first = ens.exact(
            cap,
            || None::<u128>,
            |acc, rank, out| {
                if out != target.symbols() && acc.is_none_or(|r| rank < r) {
                    *acc = Some(rank);
                }
            },
            |x, y| match (x, y) {
                (Some(p), Some(q)) => Some(p.min(q)),
                (p, q) => p.or(q),
            },
        )?;
        if let Some(rank) = first {
            let env = Region::from_cells(geometry, ens.free.iter().copied())?;
            return Ok(PersistenceReport::Deviation {
                time: t,
                witness: Configuration::from_index(env, geometry.alphabet(), rank),
            });
        }
    }
    Ok(PersistenceReport::Held { horizon })
}
