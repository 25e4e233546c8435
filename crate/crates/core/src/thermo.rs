//! Hot/cold initial state, physical prior, physical complexity, Kraft sums,
//! cycle costs, entropy influx and weak-mixing diagnostics.
//!
//! The hot band `L_+` is i.i.d. uniform and the cold band `L_-` starts at zero.
//! Time penalties use the Elias-gamma length of `t + 1` in place of `K(t)`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::engine::{Dynamics, Rule, DEFAULT_EXHAUSTIVE_CAP};
use crate::error::{checked_pow, ensure_cap, Error, Result};
use crate::lattice::{
    light_cone_valid, require_light_cone, Configuration, FullState, Geometry, Region, Restrict,
};
use crate::measure::{
    estimate_event_probability, event_probability_exact, pushforward, CylinderSet, FreeEnergy, MixedState,
    ProbabilityEstimate, Ratio,
};
use crate::universality::{Certificate, CertificateKind, Expect, Goal, MapTable, Policy, Probe};

/// Two contiguous bands along `axis`: hot cells have axis coordinate in
/// `[boundary, boundary + hot_width)` (cyclically), the rest are cold.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SplitSpec {
    geometry: Geometry,
    axis: usize,
    boundary: usize,
    hot_width: usize,
}

impl SplitSpec {
    /// Hot band of half the axis length starting at `boundary`.
    pub fn new(geometry: &Geometry, axis: usize, boundary: i64) -> Result<Self> {
        let n = geometry.dims().get(axis).copied().unwrap_or(0);
        SplitSpec::with_width(geometry, axis, boundary, n / 2)
    }

    pub fn with_width(geometry: &Geometry, axis: usize, boundary: i64, hot_width: usize) -> Result<Self> {
        if axis >= geometry.dimension() {
            return Err(Error::Geometry(format!("split axis {axis} out of range")));
        }
        let n = geometry.dims()[axis];
        if hot_width == 0 || hot_width >= n {
            return Err(Error::Geometry("both bands must be nonempty".into()));
        }
        Ok(SplitSpec {
            geometry: geometry.clone(),
            axis,
            boundary: boundary.rem_euclid(n as i64) as usize,
            hot_width,
        })
    }

    pub fn geometry(&self) -> &Geometry {
        &self.geometry
    }

    pub fn axis(&self) -> usize {
        self.axis
    }

    pub fn boundary(&self) -> usize {
        self.boundary
    }

    pub fn hot_width(&self) -> usize {
        self.hot_width
    }

    pub fn is_hot(&self, cell: usize) -> bool {
        let n = self.geometry.dims()[self.axis];
        let x = self.geometry.axis_coord(cell, self.axis);
        (x + n - self.boundary) % n < self.hot_width
    }

    pub fn hot(&self) -> Region {
        let cells = (0..self.geometry.cell_count()).filter(|&c| self.is_hot(c)).collect();
        Region::from_sorted_unchecked(cells)
    }

    pub fn cold(&self) -> Region {
        let cells = (0..self.geometry.cell_count()).filter(|&c| !self.is_hot(c)).collect();
        Region::from_sorted_unchecked(cells)
    }

    /// The initial mixed state `Q`: cold cells fixed at zero, hot cells uniform.
    pub fn initial_state(&self) -> MixedState {
        MixedState::conditioned(Configuration::zeros(self.cold()))
    }

    /// Number of band boundaries inside the radius-`t` cone of `region` along the split axis.
    pub fn boundaries_crossed(&self, region: &Region, t: u64) -> usize {
        let n = self.geometry.dims()[self.axis];
        let Some((start, len)) = arc(region, &self.geometry, self.axis) else {
            return 0;
        };
        let start = (start as i64 - t as i64).rem_euclid(n as i64) as usize;
        let len = len + 2 * t as usize;
        // boundary at p sits between coordinates p - 1 and p
        [self.boundary, (self.boundary + self.hot_width) % n]
            .iter()
            .filter(|&&p| {
                let off = (p + n - start) % n;
                len >= n || (off >= 1 && off < len)
            })
            .count()
    }

    /// Light cone valid and at most one band boundary inside the cone.
    pub fn query_valid(&self, region: &Region, t: u64) -> bool {
        light_cone_valid(&self.geometry, region, t) && self.boundaries_crossed(region, t) <= 1
    }

    pub fn require_valid(&self, region: &Region, t: u64) -> Result<()> {
        if self.query_valid(region, t) {
            Ok(())
        } else {
            Err(Error::LightCone { time: t })
        }
    }
}

/// Minimal cyclic arc `(start, extent)` covering the region's projection on `axis`.
fn arc(region: &Region, geometry: &Geometry, axis: usize) -> Option<(usize, usize)> {
    let n = geometry.dims()[axis];
    let mut xs: Vec<usize> = region.cells().iter().map(|&c| geometry.axis_coord(c, axis)).collect();
    xs.sort_unstable();
    xs.dedup();
    let first = *xs.first()?;
    let last = *xs.last()?;
    // the arc starts right after the largest gap
    let (mut gap, mut start) = (first + n - last, first);
    for w in xs.windows(2) {
        if w[1] - w[0] > gap {
            gap = w[1] - w[0];
            start = w[1];
        }
    }
    Some((start, n - gap + 1))
}

/// A sample of `Q`: cold cells zero, hot cells drawn in cell order from the seeded stream.
pub fn sample_initial_state(split: &SplitSpec, seed: u64) -> FullState {
    let g = &split.geometry;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cells = (0..g.cell_count())
        .map(|c| {
            if split.is_hot(c) {
                rng.gen_range(0..g.alphabet()) as u8
            } else {
                0
            }
        })
        .collect();
    FullState::from_symbols(g, cells).expect("symbols in range")
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "mode")]
pub enum PriorMode {
    Exact,
    Mc { samples: u64, seed: u64 },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PriorQuery {
    pub rule: Rule,
    pub split: SplitSpec,
    pub target: Configuration,
    pub time: u64,
    pub mode: PriorMode,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(rename_all = "lowercase", tag = "mode")]
pub enum PriorValue {
    Exact(Ratio),
    Mc(ProbabilityEstimate),
}

impl PriorValue {
    pub fn value(&self) -> f64 {
        match self {
            PriorValue::Exact(r) => r.value(),
            PriorValue::Mc(e) => e.estimate,
        }
    }
}

/// `P_t(c)`: probability that `alpha_t(Q)|_{c.region} = c`.
pub fn physical_prior(q: &PriorQuery, cap: u64) -> Result<PriorValue> {
    q.split.require_valid(q.target.region(), q.time)?;
    let g = q.split.geometry();
    let event = CylinderSet::single(&q.target, g.alphabet())?;
    let state = q.split.initial_state();
    Ok(match q.mode {
        PriorMode::Exact => PriorValue::Exact(event_probability_exact(&state, &q.rule, g, q.time, &event, cap)?),
        PriorMode::Mc { samples, seed } => {
            PriorValue::Mc(estimate_event_probability(&state, &q.rule, g, q.time, &event, samples, seed)?)
        }
    })
}

/// Exact counts of every configuration of `region` at time `t` under `Q`,
/// indexed by lexicographic rank; they sum to `total`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct PriorTable {
    pub counts: Vec<u128>,
    pub total: u128,
}

pub fn prior_table(rule: &Rule, split: &SplitSpec, region: &Region, t: u64, cap: u64) -> Result<PriorTable> {
    split.require_valid(region, t)?;
    let g = split.geometry();
    let p = pushforward(&split.initial_state(), rule, g, t, region, cap)?;
    Ok(PriorTable {
        counts: p.counts,
        total: p.states,
    })
}

/// Unnormalized time-independent prior `sum_t P_t(c) 2^-l(t)` over `t in 0..=max_time`.
/// A finite-range approximation.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PriorSketch {
    pub max_time: u64,
    pub terms: Vec<f64>,
    pub weight: f64,
    pub approximate: bool,
}

pub fn prior_sketch(rule: &Rule, split: &SplitSpec, c: &Configuration, max_time: u64, cap: u64) -> Result<PriorSketch> {
    let mut terms = Vec::new();
    for t in 0..=max_time {
        let q = PriorQuery {
            rule: rule.clone(),
            split: split.clone(),
            target: c.clone(),
            time: t,
            mode: PriorMode::Exact,
        };
        terms.push(physical_prior(&q, cap)?.value() * 2f64.powi(-(integer_code_length(t) as i32)));
    }
    Ok(PriorSketch {
        max_time,
        weight: terms.iter().sum(),
        terms,
        approximate: true,
    })
}

/// Length of the Elias-gamma code of `t + 1`: `2 floor(log2(t + 1)) + 1`.
pub fn integer_code_length(t: u64) -> u32 {
    let v = t as u128 + 1;
    2 * (127 - v.leading_zeros()) + 1
}

/// `sum 2^-l(t)` over `t` with `t + 1 < 2^m`, as `(numerator, 2^(2m+1))`.
pub fn kraft_partial_sum(m: u32) -> (u128, u128) {
    let denom = 1u128 << (2 * m + 1);
    let num = (0..(1u64 << m) - 1)
        .map(|t| denom >> integer_code_length(t))
        .sum();
    (num, denom)
}

/// What a complexity certificate achieves on `R`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ComplexityTarget {
    Config(Configuration),
    Map(MapTable),
}

impl ComplexityTarget {
    pub fn region(&self) -> &Region {
        match self {
            ComplexityTarget::Config(c) => c.region(),
            ComplexityTarget::Map(m) => m.region(),
        }
    }
}

/// Search limits for physical complexity.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ComplexityBounds {
    pub max_time: u64,
    /// Candidate program cells; must lie in `L_+` and avoid `R`.
    pub window: Region,
    pub max_program: usize,
    pub cap: u64,
}

/// Program `c_M` on `R_M` that achieves the target at time `t` for every
/// content of the hot cells outside `R_M`, with `L_-` zeroed.
#[derive(Clone, Debug, PartialEq)]
pub struct ComplexityCertificate {
    pub target: ComplexityTarget,
    pub program: Configuration,
    pub time: u64,
    /// `|R_M| log2 a + l(t)` bits.
    pub value: f64,
    pub hash: String,
}

impl ComplexityCertificate {
    /// Cells quantified at verification: hot cells of the dependency cone not
    /// in `R_M`, plus `R` for map targets.
    fn quantified(&self, dynamics: &Dynamics, split: &SplitSpec) -> Region {
        let cone = crate::engine::Cone::new(dynamics, &[(self.time, self.target.region())], 0);
        let mut cells: Vec<usize> = cone
            .inputs()
            .iter()
            .copied()
            .filter(|&c| split.is_hot(c) && !self.program.region().contains(c))
            .collect();
        if let ComplexityTarget::Map(m) = &self.target {
            cells.extend_from_slice(m.region().cells());
        }
        cells.sort_unstable();
        cells.dedup();
        Region::from_sorted_unchecked(cells)
    }

    /// Full-torus re-simulation; returns whether every case matches and the digest.
    pub fn resimulate(&self, rule: &Rule, split: &SplitSpec) -> Result<(bool, String)> {
        let g = split.geometry();
        if self.program.region().cells().iter().any(|&c| !split.is_hot(c)) {
            return Ok((false, String::new()));
        }
        let dynamics = Dynamics::new(rule, g)?;
        let q = self.quantified(&dynamics, split);
        let count = checked_pow(g.alphabet(), q.len());
        ensure_cap(count, DEFAULT_EXHAUSTIVE_CAP)?;
        let base = FullState::with_configuration(g, &self.program)?;
        let region = self.target.region();
        let mut hasher = Sha256::new();
        hasher.update(rule.label().as_bytes());
        hasher.update(self.time.to_le_bytes());
        let mut ok = true;
        for rank in 0..count {
            let mut s = base.clone();
            s.set_configuration(&Configuration::from_index(q.clone(), g.alphabet(), rank))?;
            let out = dynamics.evolve(&s, self.time as i64)?.restrict(region)?;
            let expected = match &self.target {
                ComplexityTarget::Config(c) => c.symbols().to_vec(),
                ComplexityTarget::Map(m) => m.output(s.restrict(region)?.symbols()).to_vec(),
            };
            ok &= out.symbols() == expected.as_slice();
            hasher.update(out.symbols());
        }
        Ok((ok, hex::encode(hasher.finalize())))
    }

    pub fn verify(&self, rule: &Rule, split: &SplitSpec) -> Result<bool> {
        let (ok, hash) = self.resimulate(rule, split)?;
        Ok(ok && hash == self.hash)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum ComplexityOutcome {
    Found(ComplexityCertificate),
    NotFoundWithinBounds { max_time: u64, window_cells: usize, max_program: usize },
}

impl ComplexityOutcome {
    pub fn certificate(&self) -> Option<&ComplexityCertificate> {
        match self {
            ComplexityOutcome::Found(c) => Some(c),
            ComplexityOutcome::NotFoundWithinBounds { .. } => None,
        }
    }
}

fn complexity_bits(program_len: usize, alphabet: u32, t: u64) -> f64 {
    program_len as f64 * (alphabet as f64).log2() + integer_code_length(t) as f64
}

/// Minimizes `|R_M| log2 a + l(t)` over robust programs within the bounds;
/// ties go to the smaller time, then the lexicographically smaller program
/// (unset window cells before 0 before 1 ...).
pub fn physical_complexity(
    rule: &Rule,
    split: &SplitSpec,
    target: &ComplexityTarget,
    bounds: &ComplexityBounds,
) -> Result<ComplexityOutcome> {
    let g = split.geometry();
    let region = target.region();
    if let ComplexityTarget::Map(m) = target {
        if m.alphabet() != g.alphabet() {
            return Err(Error::Mismatch("table alphabet differs from the lattice".into()));
        }
    }
    if bounds.window.cells().iter().any(|&c| !split.is_hot(c) || region.contains(c)) {
        return Err(Error::InvalidTask("program window must lie in the hot band outside the region".into()));
    }
    split.require_valid(region, bounds.max_time)?;
    let size = checked_pow(g.alphabet() + 1, bounds.window.len()).saturating_mul(bounds.max_time as u128 + 1);
    ensure_cap(size, bounds.cap)?;
    let dynamics = Dynamics::new(rule, g)?;
    let (inputs, quantify_inputs, expect) = match target {
        ComplexityTarget::Config(c) => (Region::empty(), false, Expect::Constant(c.symbols().to_vec())),
        ComplexityTarget::Map(m) => (region.clone(), true, Expect::Map(m.clone())),
    };
    let mut best: Option<(f64, u64, u128, Vec<(usize, u8)>)> = None;
    for t in 0..=bounds.max_time {
        let floor = complexity_bits(0, g.alphabet(), t);
        if best.as_ref().is_some_and(|b| floor > b.0) {
            break;
        }
        let probe = Probe::new(
            &dynamics,
            t,
            region,
            vec![0; g.cell_count()],
            &bounds.window,
            true,
            |c| split.is_hot(c),
            &inputs,
            quantify_inputs,
            expect.clone(),
        );
        for rank in probe.all_working() {
            let program: Vec<(usize, u8)> = probe
                .program
                .iter()
                .zip(probe.decode(rank))
                .filter_map(|(&c, ch)| ch.map(|v| (c, v)))
                .collect();
            if program.len() > bounds.max_program {
                continue;
            }
            let cost = complexity_bits(program.len(), g.alphabet(), t);
            // strictly better cost wins; equal cost keeps the earlier (t, rank)
            if best.as_ref().is_none_or(|b| cost < b.0) {
                best = Some((cost, t, rank, program));
            }
        }
    }
    let Some((value, time, _, program)) = best else {
        return Ok(ComplexityOutcome::NotFoundWithinBounds {
            max_time: bounds.max_time,
            window_cells: bounds.window.len(),
            max_program: bounds.max_program,
        });
    };
    let (cells, symbols): (Vec<usize>, Vec<u8>) = program.into_iter().unzip();
    let mut cert = ComplexityCertificate {
        target: target.clone(),
        program: Configuration::new(Region::from_cells(g, cells)?, symbols, g.alphabet())?,
        time,
        value,
        hash: String::new(),
    };
    let (ok, hash) = cert.resimulate(rule, split)?;
    if !ok {
        return Err(Error::Unsound("complexity candidate failed full re-simulation".into()));
    }
    cert.hash = hash;
    Ok(ComplexityOutcome::Found(cert))
}

/// Both sides of `C(c) >= min_t { -log2 P_t(c) + l(t) }`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PriorBoundReport {
    /// `None` when no certificate exists within the bounds (`C` is then `+inf`).
    pub complexity: Option<f64>,
    pub complexity_time: Option<u64>,
    /// `+inf` when `P_t(c) = 0` for every `t` in range.
    pub bound: f64,
    pub bound_time: Option<u64>,
    pub holds: bool,
}

/// Computes `C(c)` and the prior side over `t in 0..=max_time`. `holds` is
/// decided in integer arithmetic.
pub fn check_complexity_prior_bound(
    rule: &Rule,
    split: &SplitSpec,
    c: &Configuration,
    bounds: &ComplexityBounds,
) -> Result<PriorBoundReport> {
    let a = split.geometry().alphabet();
    let cert = physical_complexity(rule, split, &ComplexityTarget::Config(c.clone()), bounds)?;
    let mut priors = Vec::new();
    for t in 0..=bounds.max_time {
        let q = PriorQuery {
            rule: rule.clone(),
            split: split.clone(),
            target: c.clone(),
            time: t,
            mode: PriorMode::Exact,
        };
        let PriorValue::Exact(r) = physical_prior(&q, bounds.cap)? else {
            unreachable!("exact mode")
        };
        priors.push((t, r));
    }
    let mut bound = f64::INFINITY;
    let mut bound_time = None;
    for &(t, r) in &priors {
        if let FreeEnergy::Bits(b) = r.free_energy() {
            let v = b + integer_code_length(t) as f64;
            if v < bound {
                bound = v;
                bound_time = Some(t);
            }
        }
    }
    let holds = match cert.certificate() {
        None => true,
        Some(cc) => {
            // 2^-C <= P_t 2^-l(t) for some t, i.e. total 2^l(t) <= hits a^k 2^l(tc)
            let k = cc.program.len();
            let lc = integer_code_length(cc.time);
            priors.iter().any(|&(t, r)| {
                let lhs = r.total.checked_mul(1u128 << integer_code_length(t));
                let rhs = r
                    .hits
                    .checked_mul(checked_pow(a, k))
                    .and_then(|x| x.checked_mul(1u128 << lc));
                matches!((lhs, rhs), (Some(l), Some(r)) if l <= r)
            })
        }
    };
    Ok(PriorBoundReport {
        complexity: cert.certificate().map(|c| c.value),
        complexity_time: cert.certificate().map(|c| c.time),
        bound,
        bound_time,
        holds,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct KraftReport {
    pub members: usize,
    pub found: usize,
    /// Exact sum as `numerator / denominator`.
    pub numerator: u128,
    pub denominator: u128,
    pub sum: f64,
    pub holds: bool,
}

/// `sum_{c in U} 2^-C(c)`; members without a certificate contribute 0.
/// Rejects families that are not pairwise mutually exclusive.
pub fn kraft_check(rule: &Rule, split: &SplitSpec, family: &[Configuration], bounds: &ComplexityBounds) -> Result<KraftReport> {
    for (i, x) in family.iter().enumerate() {
        for y in &family[i + 1..] {
            if !x.excludes(y) {
                return Err(Error::InvalidTask(
                    "family members are not mutually exclusive".into(),
                ));
            }
        }
    }
    let a = split.geometry().alphabet();
    let mut terms = Vec::new();
    for c in family {
        if let Some(cert) = physical_complexity(rule, split, &ComplexityTarget::Config(c.clone()), bounds)?.certificate() {
            terms.push((cert.program.len(), integer_code_length(cert.time)));
        }
    }
    let kmax = terms.iter().map(|t| t.0).max().unwrap_or(0);
    let lmax = terms.iter().map(|t| t.1).max().unwrap_or(0);
    let denominator = checked_pow(a, kmax)
        .checked_mul(1u128 << lmax)
        .ok_or_else(|| Error::InvalidTask("Kraft denominator overflows".into()))?;
    let numerator: u128 = terms
        .iter()
        .map(|&(k, l)| checked_pow(a, kmax - k) * (1u128 << (lmax - l)))
        .sum();
    Ok(KraftReport {
        members: family.len(),
        found: terms.len(),
        numerator,
        denominator,
        sum: numerator as f64 / denominator as f64,
        holds: numerator <= denominator,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CycleCostReport {
    pub tau: u64,
    pub k: u64,
    /// `F_1 .. F_k` in bits.
    pub series: Vec<FreeEnergy>,
    /// `F_k(tau)`.
    pub value: FreeEnergy,
    /// `-log2 mu(c)`.
    pub single: f64,
    pub exact: bool,
    /// Monte-Carlo only: samples, seed and the 95% lower bound on `F_k`.
    pub samples: Option<u64>,
    pub seed: Option<u64>,
    pub lower_bound: Option<f64>,
}

fn cycle_checks(
    rule: &Rule,
    geometry: &Geometry,
    c: &Configuration,
    tau: u64,
    k: u64,
) -> Result<(Dynamics, Vec<u64>)> {
    if tau == 0 || k == 0 {
        return Err(Error::InvalidTask("period and repeat count must be positive".into()));
    }
    require_light_cone(geometry, c.region(), k * tau)?;
    Ok((Dynamics::new(rule, geometry)?, (0..k).map(|j| j * tau).collect()))
}

/// Length of the prefix of checkpoints on which the outputs equal `c`.
fn matched_prefix(out: &[u8], c: &[u8]) -> usize {
    out.chunks(c.len().max(1)).take_while(|chunk| *chunk == c).count()
}

/// `F_j(tau) = -log2 mu(n_{i<j} alpha_{i tau}^{-1}(c))` for `j = 1..=k`, exactly.
pub fn cycle_cost(rule: &Rule, geometry: &Geometry, c: &Configuration, tau: u64, k: u64, cap: u64) -> Result<CycleCostReport> {
    let (dynamics, times) = cycle_checks(rule, geometry, c, tau, k)?;
    let checkpoints: Vec<(u64, &Region)> = times.iter().map(|&t| (t, c.region())).collect();
    let ens = MixedState::uniform().ensemble(&dynamics, &checkpoints)?;
    let kk = k as usize;
    let hist = ens.exact(
        cap,
        || vec![0u128; kk + 1],
        |acc, _, out| {
            if c.is_empty() {
                acc[kk] += 1;
            } else {
                acc[matched_prefix(out, c.symbols())] += 1;
            }
        },
        |mut x, y| {
            for (p, q) in x.iter_mut().zip(y) {
                *p += q;
            }
            x
        },
    )?;
    let total = ens.size();
    let series: Vec<FreeEnergy> = (1..=kk)
        .map(|j| FreeEnergy::from_counts(hist[j..].iter().sum(), total))
        .collect();
    Ok(CycleCostReport {
        tau,
        k,
        value: *series.last().expect("k >= 1"),
        series,
        single: c.len() as f64 * (geometry.alphabet() as f64).log2(),
        exact: true,
        samples: None,
        seed: None,
        lower_bound: None,
    })
}

/// Monte-Carlo fallback: point estimate of `F_k` and a 95% lower bound `-log2(high)`.
pub fn cycle_cost_estimate(
    rule: &Rule,
    geometry: &Geometry,
    c: &Configuration,
    tau: u64,
    k: u64,
    samples: u64,
    seed: u64,
) -> Result<CycleCostReport> {
    let (dynamics, times) = cycle_checks(rule, geometry, c, tau, k)?;
    let checkpoints: Vec<(u64, &Region)> = times.iter().map(|&t| (t, c.region())).collect();
    let ens = MixedState::uniform().ensemble(&dynamics, &checkpoints)?;
    let kk = k as usize;
    let hits = ens.sample_count(samples, seed, |out| c.is_empty() || matched_prefix(out, c.symbols()) == kk);
    let est = ProbabilityEstimate::wilson(hits, samples, seed);
    let value = FreeEnergy::from_probability(est.estimate);
    Ok(CycleCostReport {
        tau,
        k,
        series: vec![value],
        value,
        single: c.len() as f64 * (geometry.alphabet() as f64).log2(),
        exact: false,
        samples: Some(samples),
        seed: Some(seed),
        lower_bound: Some(-est.high.log2()),
    })
}

/// `F_k(tau)` for every `tau` in `[tau0, tau1]` and their average (the
/// finite-window stand-in for the liminf). `Impossible` counts as `+inf`.
pub fn cycle_cost_average(
    rule: &Rule,
    geometry: &Geometry,
    c: &Configuration,
    k: u64,
    tau0: u64,
    tau1: u64,
    cap: u64,
) -> Result<(Vec<CycleCostReport>, f64)> {
    if tau0 == 0 || tau1 < tau0 {
        return Err(Error::InvalidTask("empty period window".into()));
    }
    let reports = (tau0..=tau1)
        .map(|tau| cycle_cost(rule, geometry, c, tau, k, cap))
        .collect::<Result<Vec<_>>>()?;
    let avg = reports.iter().map(|r| r.value.or_infinity()).sum::<f64>() / reports.len() as f64;
    Ok((reports, avg))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct InfluxReport {
    pub transfer_verified: bool,
    pub transfer_hash: String,
    pub measured: f64,
    pub bound: f64,
    pub holds: bool,
    pub region_cells: usize,
    pub program_cells: usize,
    pub time: u64,
}

/// `|R| / a^|R_p| * log2 a`.
pub fn influx_bound(region_cells: usize, program_cells: usize, alphabet: u32) -> f64 {
    region_cells as f64 / (alphabet as f64).powi(program_cells as i32) * (alphabet as f64).log2()
}

/// Tolerance for comparing a measured entropy with its bound.
pub const INFLUX_TOLERANCE: f64 = 1e-9;

/// Verifies that `c_p` on `R_p` moves every content of `R` to `R + x` at time
/// `t` against every content of the other cone cells, then measures the
/// entropy of `R` at `t` when `R` starts in `initial` (zero by default) and
/// every other cell, `R_p` included, is uniform.
#[allow(clippy::too_many_arguments)]
pub fn entropy_influx_experiment(
    rule: &Rule,
    geometry: &Geometry,
    region: &Region,
    displacement: &[i64],
    program: &Configuration,
    t: u64,
    initial: Option<&Configuration>,
    cap: u64,
) -> Result<InfluxReport> {
    let shifted = region.translate(geometry, displacement)?;
    if !shifted.is_disjoint(region) {
        return Err(Error::Overlap("region and its displaced copy overlap".into()));
    }
    if !program.region().is_disjoint(region) {
        return Err(Error::Overlap("program region meets the region".into()));
    }
    require_light_cone(geometry, &shifted.union(region), t)?;
    let cert = Certificate {
        kind: CertificateKind::Transfer,
        region: region.clone(),
        initial: None,
        goal: Goal::Transfer {
            displacement: displacement.to_vec(),
        },
        program: program.clone(),
        time: t,
        window: program.region().clone(),
        policy: Policy::Zero,
        background_quantified: true,
        canonical: false,
        hash: String::new(),
    };
    let (verified, hash) = cert.resimulate(rule, geometry)?;
    let start = match initial {
        Some(c) if c.region() == region => c.clone(),
        Some(_) => return Err(Error::Mismatch("initial content must live on the region".into())),
        None => Configuration::zeros(region.clone()),
    };
    let measured = pushforward(&MixedState::conditioned(start), rule, geometry, t, region, cap)?
        .distribution
        .entropy();
    let bound = influx_bound(region.len(), program.len(), geometry.alphabet());
    Ok(InfluxReport {
        transfer_verified: verified,
        transfer_hash: hash,
        measured,
        bound,
        holds: !verified || measured + INFLUX_TOLERANCE >= bound,
        region_cells: region.len(),
        program_cells: program.len(),
        time: t,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "mode")]
pub enum MixingMode {
    Exact,
    Mc { samples: u64, seed: u64 },
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MixingReport {
    pub horizon: u64,
    pub order: usize,
    /// `mu(B_0 n phi^-j B_1 n ... n phi^-(k-1)j B_{k-1})` for `j < n`.
    pub terms: Vec<f64>,
    pub average: f64,
    pub product: f64,
    /// `average - product`.
    pub gap: f64,
    pub exact: bool,
}

/// Cesaro average of `mu(B_0 n phi^-j B_1 n phi^-2j B_2 ...)` over `j < horizon`.
/// With two sets this is the weak-mixing average for `(D, B) = (B_0, B_1)`.
pub fn weak_mixing_order(
    rule: &Rule,
    geometry: &Geometry,
    sets: &[CylinderSet],
    horizon: u64,
    mode: MixingMode,
    cap: u64,
) -> Result<MixingReport> {
    if sets.is_empty() || horizon == 0 {
        return Err(Error::InvalidTask("need at least one set and a positive horizon".into()));
    }
    let k = sets.len() as u64;
    let all = sets.iter().fold(Region::empty(), |acc, s| acc.union(s.region()));
    require_light_cone(geometry, &all, (k - 1) * (horizon - 1))?;
    let dynamics = Dynamics::new(rule, geometry)?;
    let widths: Vec<usize> = sets.iter().map(|s| s.region().len()).collect();
    let inside = |out: &[u8]| {
        let mut pos = 0;
        sets.iter().zip(&widths).all(|(s, &w)| {
            let ok = s.contains_symbols(&out[pos..pos + w]);
            pos += w;
            ok
        })
    };
    let mut ratios = Vec::new();
    let mut terms = Vec::new();
    for j in 0..horizon {
        let checkpoints: Vec<(u64, &Region)> = sets.iter().enumerate().map(|(i, s)| (i as u64 * j, s.region())).collect();
        let ens = MixedState::uniform().ensemble(&dynamics, &checkpoints)?;
        match mode {
            MixingMode::Exact => {
                let hits = ens.count(cap, inside)?;
                let total = ens.size();
                ratios.push((hits, total));
                terms.push(hits as f64 / total as f64);
            }
            MixingMode::Mc { samples, seed } => {
                let s = seed.wrapping_add(j.wrapping_mul(0x9E37_79B9_7F4A_7C15));
                terms.push(ens.sample_count(samples, s, inside) as f64 / samples as f64);
            }
        }
    }
    let average = match mode {
        MixingMode::Exact => {
            // all totals are powers of a; sum over the largest as common denominator
            let den = ratios.iter().map(|r| r.1).max().expect("horizon >= 1");
            let num: u128 = ratios.iter().map(|&(h, t)| h * (den / t)).sum();
            num as f64 / (den as f64 * horizon as f64)
        }
        MixingMode::Mc { .. } => terms.iter().sum::<f64>() / horizon as f64,
    };
    let product: f64 = sets.iter().map(crate::measure::cylinder_measure).product();
    Ok(MixingReport {
        horizon,
        order: sets.len(),
        terms,
        average,
        product,
        gap: average - product,
        exact: mode == MixingMode::Exact,
    })
}

/// Two-set weak-mixing diagnostic: average over `j < horizon` of `mu(phi^-j B n D)`.
pub fn weak_mixing_estimate(
    rule: &Rule,
    geometry: &Geometry,
    b: &CylinderSet,
    d: &CylinderSet,
    horizon: u64,
    mode: MixingMode,
    cap: u64,
) -> Result<MixingReport> {
    weak_mixing_order(rule, geometry, &[d.clone(), b.clone()], horizon, mode, cap)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::DEFAULT_ENUMERATION_CAP;

    fn line(n: usize) -> Geometry {
        Geometry::line(n, 2).unwrap()
    }

    fn cfg(g: &Geometry, pos: &[i64], s: &str) -> Configuration {
        Configuration::from_text(g, Region::from_positions(g, pos.iter().copied()).unwrap(), s).unwrap()
    }

    fn pull() -> Rule {
        Rule::shift(vec![-1]).unwrap()
    }

    fn split16() -> SplitSpec {
        // hot band [1, 9), cold band [9, 16) u {0}
        SplitSpec::new(&line(16), 0, 1).unwrap()
    }

    fn bounds(g: &Geometry, window: &[i64], t: u64) -> ComplexityBounds {
        ComplexityBounds {
            max_time: t,
            window: Region::from_positions(g, window.iter().copied()).unwrap(),
            max_program: 4,
            cap: 1 << 20,
        }
    }

    #[test]
    fn split_bands_partition() {
        let s = split16();
        assert_eq!(s.hot().len() + s.cold().len(), 16);
        assert!(s.hot().is_disjoint(&s.cold()));
        assert!(!s.is_hot(0) && s.is_hot(1) && s.is_hot(8) && !s.is_hot(9));
        let r = Region::from_positions(s.geometry(), [0]).unwrap();
        assert_eq!(s.boundaries_crossed(&r, 0), 0);
        assert_eq!(s.boundaries_crossed(&r, 1), 1);
        assert!(s.query_valid(&r, 3));
        assert!(!SplitSpec::with_width(&line(16), 0, 1, 2).unwrap().query_valid(&r, 3));
    }

    #[test]
    fn initial_state_is_cold_and_reproducible() {
        let s = SplitSpec::new(&Geometry::line(20_000, 2).unwrap(), 0, 0).unwrap();
        let a = sample_initial_state(&s, 5);
        assert_eq!(a, sample_initial_state(&s, 5));
        assert!(s.cold().cells().iter().all(|&c| a.get(c) == 0));
        let ones = s.hot().cells().iter().filter(|&&c| a.get(c) == 1).count() as f64;
        let n = s.hot().len() as f64;
        let chi2 = 2.0 * (ones - n / 2.0).powi(2) / (n / 2.0);
        assert!(chi2 < 6.635, "chi2 {chi2}");
    }

    #[test]
    fn prior_examples() {
        let s = split16();
        let g = s.geometry().clone();
        let q = |rule: Rule, c: Configuration, t| PriorQuery {
            rule,
            split: s.clone(),
            target: c,
            time: t,
            mode: PriorMode::Exact,
        };
        let id = Rule::identity(1, 2).unwrap();
        let p = physical_prior(&q(id.clone(), cfg(&g, &[0, -1], "00"), 0), 1 << 20).unwrap();
        assert_eq!(p.value(), 1.0);
        let p = physical_prior(&q(id, cfg(&g, &[0], "1"), 0), 1 << 20).unwrap();
        assert_eq!(p.value(), 0.0);
        let p = physical_prior(&q(pull(), cfg(&g, &[0], "1"), 1), 1 << 20).unwrap();
        assert_eq!(p, PriorValue::Exact(Ratio { hits: 1, total: 2 }));
    }

    #[test]
    fn code_lengths() {
        assert_eq!(integer_code_length(0), 1);
        assert_eq!(integer_code_length(1), 3);
        assert_eq!(integer_code_length(2), 3);
        assert_eq!(integer_code_length(3), 5);
        assert_eq!(integer_code_length(u64::MAX), 129);
        for m in 0..=12 {
            let (num, den) = kraft_partial_sum(m);
            // 1 - 2^-m
            assert_eq!(num * (1 << m), den * ((1 << m) - 1));
        }
    }

    #[test]
    fn complexity_examples() {
        let s = split16();
        let g = s.geometry().clone();
        let b = bounds(&g, &[1, 2, 3], 3);
        let zero = physical_complexity(&pull(), &s, &ComplexityTarget::Config(cfg(&g, &[0], "0")), &b).unwrap();
        let zero = zero.certificate().unwrap();
        assert_eq!((zero.value, zero.time, zero.program.len()), (1.0, 0, 0));
        let one = physical_complexity(&pull(), &s, &ComplexityTarget::Config(cfg(&g, &[0], "1")), &b).unwrap();
        let one = one.certificate().unwrap();
        assert_eq!((one.value, one.time), (4.0, 1));
        assert_eq!(one.program, cfg(&g, &[1], "1"));
        assert!(one.verify(&pull(), &s).unwrap());
        let id = Rule::identity(1, 2).unwrap();
        let none = physical_complexity(&id, &s, &ComplexityTarget::Config(cfg(&g, &[0], "1")), &b).unwrap();
        assert!(none.certificate().is_none());
    }

    #[test]
    fn prior_bound_and_kraft_examples() {
        let s = split16();
        let g = s.geometry().clone();
        let b = bounds(&g, &[1, 2, 3], 3);
        let r = check_complexity_prior_bound(&pull(), &s, &cfg(&g, &[0], "1"), &b).unwrap();
        assert_eq!((r.complexity, r.bound, r.holds), (Some(4.0), 4.0, true));
        let r = check_complexity_prior_bound(&pull(), &s, &cfg(&g, &[0], "0"), &b).unwrap();
        assert_eq!((r.complexity, r.bound, r.holds), (Some(1.0), 1.0, true));
        let fam = [cfg(&g, &[0], "0"), cfg(&g, &[0], "1")];
        let k = kraft_check(&pull(), &s, &fam, &b).unwrap();
        assert_eq!(k.sum, 0.5625);
        assert!(k.holds);
        assert_eq!(kraft_check(&pull(), &s, &[], &b).unwrap().sum, 0.0);
        assert!(kraft_check(&pull(), &s, &[cfg(&g, &[0], "1"), cfg(&g, &[1], "1")], &b).is_err());
    }

    #[test]
    fn cycle_cost_examples() {
        let g = line(32);
        let shift = Rule::shift(vec![1]).unwrap();
        let r = cycle_cost(&shift, &g, &cfg(&g, &[0], "1"), 1, 3, DEFAULT_ENUMERATION_CAP).unwrap();
        assert_eq!(r.value, FreeEnergy::Bits(3.0));
        assert_eq!(r.series, vec![FreeEnergy::Bits(1.0), FreeEnergy::Bits(2.0), FreeEnergy::Bits(3.0)]);
        let id = Rule::identity(1, 2).unwrap();
        let r = cycle_cost(&id, &g, &cfg(&g, &[0], "1"), 2, 5, DEFAULT_ENUMERATION_CAP).unwrap();
        assert_eq!(r.value, FreeEnergy::Bits(1.0));
        let r = cycle_cost(&shift, &g, &cfg(&g, &[0, 1], "11"), 2, 2, DEFAULT_ENUMERATION_CAP).unwrap();
        assert_eq!(r.value, FreeEnergy::Bits(4.0));
        let (_, avg) = cycle_cost_average(&shift, &g, &cfg(&g, &[0], "1"), 4, 1, 3, DEFAULT_ENUMERATION_CAP).unwrap();
        assert_eq!(avg, 4.0);
        let mc = cycle_cost_estimate(&shift, &g, &cfg(&g, &[0], "1"), 1, 3, 20_000, 1).unwrap();
        assert!(mc.lower_bound.unwrap() <= 3.0);
    }

    #[test]
    fn influx_examples() {
        let g = line(16);
        let shift = Rule::shift(vec![1]).unwrap();
        let r = Region::from_positions(&g, [0, 1]).unwrap();
        let rep = entropy_influx_experiment(&shift, &g, &r, &[3], &Configuration::empty(), 3, None, 1 << 20).unwrap();
        assert!(rep.transfer_verified);
        assert!((rep.measured - 2.0).abs() < 1e-9 && (rep.bound - 2.0).abs() < 1e-12);
        assert!(rep.holds);
        assert_eq!(influx_bound(2, 3, 2), 0.25);
        let bad = entropy_influx_experiment(&shift, &g, &r, &[3], &Configuration::empty(), 2, None, 1 << 20).unwrap();
        assert!(!bad.transfer_verified);
    }

    #[test]
    fn mixing_examples() {
        let g = line(130);
        let shift = Rule::shift(vec![1]).unwrap();
        let b = CylinderSet::single(&cfg(&g, &[0], "1"), 2).unwrap();
        let rep = weak_mixing_estimate(&shift, &g, &b, &b, 64, MixingMode::Exact, 1 << 20).unwrap();
        assert!((rep.average - 0.25).abs() <= 0.5 / 64.0);
        assert_eq!(rep.gap, 0.25 / 64.0);
        let id = Rule::identity(1, 2).unwrap();
        let rep = weak_mixing_estimate(&id, &g, &b, &b, 64, MixingMode::Exact, 1 << 20).unwrap();
        assert_eq!((rep.average, rep.gap), (0.5, 0.25));
    }
}
