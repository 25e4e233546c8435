//! Uniform measure, cylinder sets, free energies, entropies, exact pushforwards
//! and seeded Monte-Carlo estimates. All logarithms are base 2.

use serde::{Serialize, Serializer};

use crate::engine::{Dynamics, Rule};
use crate::ensemble::Ensemble;
use crate::error::{checked_pow, ensure_cap, Error, Result};
use crate::lattice::{
    light_cone_valid, moore_neighborhood, require_light_cone, Configuration, Geometry, Region,
};

/// Default bound on the number of window states enumerated exactly.
pub const DEFAULT_ENUMERATION_CAP: u64 = 1 << 20;

/// Two-sided 95% normal quantile.
pub const Z95: f64 = 1.959963984540054;

/// A region together with a set of its configurations.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CylinderSet {
    region: Region,
    alphabet: u32,
    // sorted, distinct
    members: Vec<Vec<u8>>,
}

impl CylinderSet {
    pub fn new(region: Region, alphabet: u32, members: impl IntoIterator<Item = Configuration>) -> Result<Self> {
        let mut syms = Vec::new();
        for m in members {
            if m.region() != &region {
                return Err(Error::Mismatch("cylinder member lives on another region".into()));
            }
            if let Some(&s) = m.symbols().iter().find(|&&s| s as u32 >= alphabet) {
                return Err(Error::Symbol {
                    symbol: s as u32,
                    alphabet,
                });
            }
            syms.push(m.symbols().to_vec());
        }
        syms.sort();
        syms.dedup();
        Ok(CylinderSet {
            region,
            alphabet,
            members: syms,
        })
    }

    pub fn single(config: &Configuration, alphabet: u32) -> Result<Self> {
        CylinderSet::new(config.region().clone(), alphabet, [config.clone()])
    }

    /// All of `A^region`.
    pub fn full(region: &Region, alphabet: u32) -> Result<Self> {
        let count = checked_pow(alphabet, region.len());
        ensure_cap(count, DEFAULT_ENUMERATION_CAP)?;
        let members = (0..count).map(|i| Configuration::from_index(region.clone(), alphabet, i));
        CylinderSet::new(region.clone(), alphabet, members)
    }

    pub fn empty(region: Region, alphabet: u32) -> Self {
        CylinderSet {
            region,
            alphabet,
            members: Vec::new(),
        }
    }

    pub fn region(&self) -> &Region {
        &self.region
    }

    pub fn alphabet(&self) -> u32 {
        self.alphabet
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn contains_symbols(&self, symbols: &[u8]) -> bool {
        self.members.binary_search_by(|m| m.as_slice().cmp(symbols)).is_ok()
    }

    pub fn members(&self) -> impl Iterator<Item = Configuration> + '_ {
        self.members
            .iter()
            .map(|s| Configuration::new(self.region.clone(), s.clone(), self.alphabet).expect("validated"))
    }

    pub fn union(&self, other: &CylinderSet) -> Result<CylinderSet> {
        if other.region != self.region || other.alphabet != self.alphabet {
            return Err(Error::Mismatch("union of cylinders on different regions".into()));
        }
        let mut members = self.members.clone();
        members.extend(other.members.iter().cloned());
        members.sort();
        members.dedup();
        Ok(CylinderSet {
            members,
            ..self.clone()
        })
    }

    pub fn is_subset(&self, other: &CylinderSet) -> bool {
        self.region == other.region && self.members.iter().all(|m| other.contains_symbols(m))
    }
}

/// `|B| * a^-|R|`.
pub fn cylinder_measure(b: &CylinderSet) -> f64 {
    b.len() as f64 * (b.alphabet as f64).powi(-(b.region.len() as i32))
}

/// A free energy in bits, or the distinguished outcome of an empty set.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum FreeEnergy {
    Bits(f64),
    Impossible,
}

impl FreeEnergy {
    /// `-log2(hits / total)`.
    pub fn from_counts(hits: u128, total: u128) -> FreeEnergy {
        if hits == 0 {
            FreeEnergy::Impossible
        } else {
            FreeEnergy::Bits((total as f64).log2() - (hits as f64).log2())
        }
    }

    pub fn from_probability(p: f64) -> FreeEnergy {
        if p <= 0.0 {
            FreeEnergy::Impossible
        } else {
            FreeEnergy::Bits(-p.log2())
        }
    }

    pub fn bits(&self) -> Option<f64> {
        match self {
            FreeEnergy::Bits(b) => Some(*b),
            FreeEnergy::Impossible => None,
        }
    }

    pub fn is_impossible(&self) -> bool {
        matches!(self, FreeEnergy::Impossible)
    }

    /// Bits, with `Impossible` as `+inf`.
    pub fn or_infinity(&self) -> f64 {
        self.bits().unwrap_or(f64::INFINITY)
    }
}

impl Serialize for FreeEnergy {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            FreeEnergy::Bits(b) => s.serialize_f64(*b),
            FreeEnergy::Impossible => s.serialize_str("impossible"),
        }
    }
}

/// `-log2 mu(B)`.
pub fn free_energy(b: &CylinderSet) -> FreeEnergy {
    if b.is_empty() {
        return FreeEnergy::Impossible;
    }
    let bits = b.region.len() as f64 * (b.alphabet as f64).log2() - (b.len() as f64).log2();
    FreeEnergy::Bits(bits)
}

/// An exact probability `hits / total`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct Ratio {
    pub hits: u128,
    pub total: u128,
}

impl Ratio {
    pub fn value(&self) -> f64 {
        self.hits as f64 / self.total as f64
    }

    pub fn free_energy(&self) -> FreeEnergy {
        FreeEnergy::from_counts(self.hits, self.total)
    }
}

/// Initial mixed state: `fixed` is held, cells of `uniform` (default: the
/// whole torus) outside it are i.i.d. uniform, everything else is zero.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MixedState {
    pub fixed: Configuration,
    pub uniform: Option<Region>,
}

impl MixedState {
    /// The uniform measure on the whole torus.
    pub fn uniform() -> Self {
        MixedState {
            fixed: Configuration::empty(),
            uniform: None,
        }
    }

    /// Point mass on `fixed`, uniform everywhere else.
    pub fn conditioned(fixed: Configuration) -> Self {
        MixedState { fixed, uniform: None }
    }

    /// Point mass on `fixed`, uniform on `window` minus the fixed cells, zero elsewhere.
    pub fn windowed(fixed: Configuration, window: Region) -> Self {
        MixedState {
            fixed,
            uniform: Some(window),
        }
    }

    pub fn is_free(&self, cell: usize) -> bool {
        !self.fixed.region().contains(cell) && self.uniform.as_ref().is_none_or(|w| w.contains(cell))
    }

    /// Cells whose initial value is known or drawn: fixed plus uniform.
    pub fn covered(&self, geometry: &Geometry) -> Region {
        match &self.uniform {
            None => geometry.full_region(),
            Some(w) => w.union(self.fixed.region()),
        }
    }

    pub(crate) fn base(&self, geometry: &Geometry) -> Vec<u8> {
        let mut base = vec![0u8; geometry.cell_count()];
        for (c, s) in self.fixed.iter() {
            base[c] = s;
        }
        base
    }

    fn check(&self, geometry: &Geometry) -> Result<()> {
        if let Some(&c) = self.fixed.region().cells().iter().find(|&&c| c >= geometry.cell_count()) {
            return Err(Error::Geometry(format!("fixed cell {c} outside the torus")));
        }
        if let Some(&s) = self.fixed.symbols().iter().find(|&&s| s as u32 >= geometry.alphabet()) {
            return Err(Error::Symbol {
                symbol: s as u32,
                alphabet: geometry.alphabet(),
            });
        }
        Ok(())
    }

    pub(crate) fn ensemble<'a>(&self, dynamics: &'a Dynamics, checkpoints: &[(u64, &Region)]) -> Result<Ensemble<'a>> {
        self.check(dynamics.geometry())?;
        Ok(Ensemble::new(
            dynamics,
            checkpoints,
            0,
            self.base(dynamics.geometry()),
            |c| self.is_free(c),
        ))
    }
}

/// Explicit probability table over `A^region`, indexed by lexicographic rank.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RegionDistribution {
    #[serde(skip)]
    region: Region,
    alphabet: u32,
    probabilities: Vec<f64>,
}

const NORMALIZATION_TOLERANCE: f64 = 1e-12;

impl RegionDistribution {
    pub fn new(region: Region, alphabet: u32, probabilities: Vec<f64>) -> Result<Self> {
        let expected = checked_pow(alphabet, region.len());
        if probabilities.len() as u128 != expected {
            return Err(Error::Length {
                expected: expected.min(usize::MAX as u128) as usize,
                got: probabilities.len(),
            });
        }
        if probabilities.iter().any(|p| !(*p >= 0.0)) {
            return Err(Error::InvalidTask("negative or undefined probability".into()));
        }
        let sum: f64 = probabilities.iter().sum();
        if (sum - 1.0).abs() > NORMALIZATION_TOLERANCE {
            return Err(Error::InvalidTask(format!("probabilities sum to {sum}")));
        }
        Ok(RegionDistribution {
            region,
            alphabet,
            probabilities,
        })
    }

    /// Normalized counts; `counts` must not all be zero.
    pub fn from_counts(region: Region, alphabet: u32, counts: &[u128]) -> Result<Self> {
        let total: u128 = counts.iter().sum();
        if total == 0 {
            return Err(Error::InvalidTask("no mass".into()));
        }
        let probs = counts.iter().map(|&c| c as f64 / total as f64).collect();
        RegionDistribution::new(region, alphabet, probs)
    }

    pub fn uniform(region: Region, alphabet: u32) -> Result<Self> {
        let n = checked_pow(alphabet, region.len());
        ensure_cap(n, DEFAULT_ENUMERATION_CAP)?;
        RegionDistribution::new(region, alphabet, vec![1.0 / n as f64; n as usize])
    }

    pub fn point_mass(config: &Configuration, alphabet: u32) -> Result<Self> {
        let n = checked_pow(alphabet, config.len());
        ensure_cap(n, DEFAULT_ENUMERATION_CAP)?;
        let mut probs = vec![0.0; n as usize];
        probs[config.index(alphabet) as usize] = 1.0;
        RegionDistribution::new(config.region().clone(), alphabet, probs)
    }

    pub fn region(&self) -> &Region {
        &self.region
    }

    pub fn alphabet(&self) -> u32 {
        self.alphabet
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probabilities
    }

    pub fn probability(&self, config: &Configuration) -> Result<f64> {
        if config.region() != &self.region {
            return Err(Error::Mismatch("configuration and distribution regions differ".into()));
        }
        Ok(self.probabilities[config.index(self.alphabet) as usize])
    }

    pub fn marginal(&self, subregion: &Region) -> Result<RegionDistribution> {
        if !subregion.is_subset(&self.region) {
            return Err(Error::NotContained);
        }
        let positions: Vec<usize> = subregion
            .cells()
            .iter()
            .map(|&c| self.region.position(c).expect("subset"))
            .collect();
        let k = self.region.len();
        let a = self.alphabet as usize;
        let mut out = vec![0.0; checked_pow(self.alphabet, subregion.len()) as usize];
        let mut digits = vec![0usize; k];
        for (idx, &p) in self.probabilities.iter().enumerate() {
            let mut rest = idx;
            for d in digits.iter_mut().rev() {
                *d = rest % a;
                rest /= a;
            }
            let j = positions.iter().fold(0usize, |acc, &pos| acc * a + digits[pos]);
            out[j] += p;
        }
        Ok(RegionDistribution {
            region: subregion.clone(),
            alphabet: self.alphabet,
            probabilities: out,
        })
    }

    /// Shannon entropy in bits.
    pub fn entropy(&self) -> f64 {
        self.probabilities
            .iter()
            .filter(|&&p| p > 0.0)
            .map(|&p| -p * p.log2())
            .sum()
    }

    /// Largest absolute deviation from the uniform table.
    pub fn distance_from_uniform(&self) -> f64 {
        let u = 1.0 / self.probabilities.len() as f64;
        self.probabilities.iter().map(|p| (p - u).abs()).fold(0.0, f64::max)
    }
}

/// Entropy of the marginal of `dist` on `subregion`.
pub fn marginal_entropy(dist: &RegionDistribution, subregion: &Region) -> Result<f64> {
    Ok(dist.marginal(subregion)?.entropy())
}

/// Result of an exact pushforward.
#[derive(Clone, Debug, PartialEq)]
pub struct Pushforward {
    pub distribution: RegionDistribution,
    /// Number of initial window states enumerated.
    pub states: u128,
    /// Initial states landing on each target configuration, by lexicographic rank.
    pub counts: Vec<u128>,
    /// Whether the torus reproduces the infinite lattice for this query.
    pub light_cone_valid: bool,
}

/// Exact law of `alpha_t(.)|_target` under `state`.
pub fn pushforward(
    state: &MixedState,
    rule: &Rule,
    geometry: &Geometry,
    t: u64,
    target: &Region,
    cap: u64,
) -> Result<Pushforward> {
    let needed = moore_neighborhood(target, t as usize, geometry);
    if !needed.is_subset(&state.covered(geometry)) {
        return Err(Error::Coverage(format!(
            "window does not cover the radius-{t} neighbourhood of the target"
        )));
    }
    let a = geometry.alphabet();
    let bins = checked_pow(a, target.len());
    ensure_cap(bins, cap)?;
    let dynamics = Dynamics::new(rule, geometry)?;
    let ens = state.ensemble(&dynamics, &[(t, target)])?;
    let counts = ens.exact(
        cap,
        || vec![0u128; bins as usize],
        |acc, _, out| acc[crate::lattice::symbols_index(out, a) as usize] += 1,
        |mut x, y| {
            for (p, q) in x.iter_mut().zip(y) {
                *p += q;
            }
            x
        },
    )?;
    Ok(Pushforward {
        distribution: RegionDistribution::from_counts(target.clone(), a, &counts)?,
        states: ens.size(),
        counts,
        light_cone_valid: light_cone_valid(geometry, target, t),
    })
}

/// Exact probability that `alpha_t(.)|_{event.region}` lies in `event`.
pub fn event_probability_exact(
    state: &MixedState,
    rule: &Rule,
    geometry: &Geometry,
    t: u64,
    event: &CylinderSet,
    cap: u64,
) -> Result<Ratio> {
    require_light_cone(geometry, event.region(), t)?;
    let dynamics = Dynamics::new(rule, geometry)?;
    let ens = state.ensemble(&dynamics, &[(t, event.region())])?;
    let hits = ens.count(cap, |out| event.contains_symbols(out))?;
    Ok(Ratio {
        hits,
        total: ens.size(),
    })
}

/// Monte-Carlo estimate with a Wilson score interval.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ProbabilityEstimate {
    pub estimate: f64,
    pub samples: u64,
    pub seed: u64,
    pub hits: u64,
    pub half_width: f64,
    pub low: f64,
    pub high: f64,
}

impl ProbabilityEstimate {
    pub fn wilson(hits: u64, samples: u64, seed: u64) -> Self {
        let n = samples as f64;
        if samples == 0 {
            return ProbabilityEstimate {
                estimate: 0.0,
                samples,
                seed,
                hits,
                half_width: 0.5,
                low: 0.0,
                high: 1.0,
            };
        }
        let p = hits as f64 / n;
        let z2 = Z95 * Z95;
        let denom = 1.0 + z2 / n;
        let center = (p + z2 / (2.0 * n)) / denom;
        let half = Z95 / denom * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt();
        ProbabilityEstimate {
            estimate: p,
            samples,
            seed,
            hits,
            half_width: half,
            low: (center - half).max(0.0),
            high: (center + half).min(1.0),
        }
    }

    pub fn covers(&self, p: f64) -> bool {
        self.low <= p && p <= self.high
    }
}

/// Seeded estimate of the probability that `alpha_t(.)|_{event.region}` lies in
/// `event`. Identical for identical `(state, rule, t, event, samples, seed)`.
pub fn estimate_event_probability(
    state: &MixedState,
    rule: &Rule,
    geometry: &Geometry,
    t: u64,
    event: &CylinderSet,
    samples: u64,
    seed: u64,
) -> Result<ProbabilityEstimate> {
    require_light_cone(geometry, event.region(), t)?;
    let dynamics = Dynamics::new(rule, geometry)?;
    let ens = state.ensemble(&dynamics, &[(t, event.region())])?;
    let hits = ens.sample_count(samples, seed, |out| event.contains_symbols(out));
    Ok(ProbabilityEstimate::wilson(hits, samples, seed))
}

/// `-log2 mu(c_i  n  alpha_t^{-1}(c_f))`, enumerating the window cells not fixed by `c_i`.
pub fn prep_free_energy(
    rule: &Rule,
    geometry: &Geometry,
    c_i: &Configuration,
    c_f: &Configuration,
    t: u64,
    window: &Region,
    cap: u64,
) -> Result<FreeEnergy> {
    require_light_cone(geometry, c_f.region(), t)?;
    let state = MixedState::windowed(c_i.clone(), window.clone());
    let needed = moore_neighborhood(c_f.region(), t as usize, geometry);
    if !needed.is_subset(&state.covered(geometry)) {
        return Err(Error::Coverage(format!(
            "window does not cover the radius-{t} neighbourhood of the target"
        )));
    }
    let event = CylinderSet::single(c_f, geometry.alphabet())?;
    let ratio = event_probability_exact(&state, rule, geometry, t, &event, cap)?;
    let total = ratio.total.saturating_mul(checked_pow(geometry.alphabet(), c_i.len()));
    Ok(FreeEnergy::from_counts(ratio.hits, total))
}
