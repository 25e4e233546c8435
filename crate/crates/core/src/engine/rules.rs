//! Reversible rule families and their description-file format.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{checked_pow, Error, Result};
use crate::lattice::{parse_symbols, symbols_to_text, MAX_ALPHABET};

/// Largest local lookup table a rule may carry.
pub const MAX_TABLE_LEN: u128 = 1 << 20;

/// A reversible, translation-covariant local rule with forward and backward kernels.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RuleDescription", into = "RuleDescription")]
pub enum Rule {
    /// `alpha_1(s)|_x = s|_{x - v}` with `|v|_inf <= 1`.
    Shift { vector: Vec<i64> },
    Margolus(MargolusRule),
    SecondOrder(SecondOrderRule),
    Table(TableRule),
}

/// Block rule: a permutation of `A^(2^d)` applied to the 2x..x2 blocks of a
/// partition whose offset cycles through `offsets` with the clock.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MargolusRule {
    pub(crate) dimension: usize,
    pub(crate) alphabet: u32,
    pub(crate) forward: Vec<u32>,
    pub(crate) backward: Vec<u32>,
    pub(crate) offsets: Vec<Vec<i64>>,
}

/// `x_{t+1} = f(N(x_t)) - x_{t-1} (mod b)`, run on the product alphabet
/// `b x b` with symbol `present + b * previous`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SecondOrderRule {
    pub(crate) dimension: usize,
    pub(crate) base: u32,
    pub(crate) local: Vec<u8>,
}

/// Explicit radius-1 lookup tables for both directions. Reversibility is not
/// assumed; it is what `verify_reversibility` checks.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TableRule {
    pub(crate) dimension: usize,
    pub(crate) alphabet: u32,
    pub(crate) forward: Vec<u8>,
    pub(crate) backward: Vec<u8>,
}

/// Number of cells in a radius-1 Moore neighbourhood.
pub fn moore_size(dimension: usize) -> usize {
    3usize.pow(dimension as u32)
}

impl MargolusRule {
    pub fn new(dimension: usize, alphabet: u32, forward: Vec<u32>, offsets: Vec<Vec<i64>>) -> Result<Self> {
        if dimension == 0 {
            return Err(Error::InvalidRule("margolus dimension must be positive".into()));
        }
        check_alphabet(alphabet)?;
        let block = 1usize << dimension;
        let len = checked_pow(alphabet, block);
        if len > MAX_TABLE_LEN {
            return Err(Error::InvalidRule(format!("block table of {len} entries is too large")));
        }
        if forward.len() as u128 != len {
            return Err(Error::InvalidRule(format!(
                "block permutation lists {} images, expected {len}",
                forward.len()
            )));
        }
        let mut backward = vec![u32::MAX; forward.len()];
        for (i, &img) in forward.iter().enumerate() {
            let slot = backward
                .get_mut(img as usize)
                .ok_or_else(|| Error::InvalidRule(format!("block image {img} out of range")))?;
            if *slot != u32::MAX {
                return Err(Error::InvalidRule(format!(
                    "block permutation is not bijective: image {img} appears twice"
                )));
            }
            *slot = i as u32;
        }
        if offsets.is_empty() {
            return Err(Error::InvalidRule("margolus rule needs at least one partition offset".into()));
        }
        for o in &offsets {
            if o.len() != dimension {
                return Err(Error::InvalidRule("partition offset has wrong dimension".into()));
            }
        }
        let offsets = offsets
            .into_iter()
            .map(|o| o.into_iter().map(|x| x.rem_euclid(2)).collect())
            .collect();
        Ok(MargolusRule {
            dimension,
            alphabet,
            forward,
            backward,
            offsets,
        })
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn alphabet(&self) -> u32 {
        self.alphabet
    }

    pub fn block_len(&self) -> usize {
        1 << self.dimension
    }

    pub fn offsets(&self) -> &[Vec<i64>] {
        &self.offsets
    }

    pub fn image(&self, block_index: u32) -> u32 {
        self.forward[block_index as usize]
    }
}

impl SecondOrderRule {
    pub fn new(dimension: usize, base: u32, local: Vec<u8>) -> Result<Self> {
        if dimension == 0 {
            return Err(Error::InvalidRule("dimension must be positive".into()));
        }
        if base < 2 || base * base > MAX_ALPHABET {
            return Err(Error::InvalidRule(format!("second-order base {base} unsupported")));
        }
        let len = checked_pow(base, moore_size(dimension));
        if len > MAX_TABLE_LEN || local.len() as u128 != len {
            return Err(Error::InvalidRule(format!(
                "local function has {} entries, expected {len}",
                local.len()
            )));
        }
        if local.iter().any(|&v| v as u32 >= base) {
            return Err(Error::InvalidRule("local function value out of range".into()));
        }
        Ok(SecondOrderRule { dimension, base, local })
    }

    /// One-dimensional binary second-order rule from a Wolfram code.
    pub fn elementary(code: u8) -> Self {
        let local = (0..8).map(|i| (code >> i) & 1).collect();
        SecondOrderRule {
            dimension: 1,
            base: 2,
            local,
        }
    }

    pub fn base(&self) -> u32 {
        self.base
    }
}

impl TableRule {
    pub fn new(dimension: usize, alphabet: u32, forward: Vec<u8>, backward: Vec<u8>) -> Result<Self> {
        if dimension == 0 {
            return Err(Error::InvalidRule("dimension must be positive".into()));
        }
        check_alphabet(alphabet)?;
        let len = checked_pow(alphabet, moore_size(dimension));
        if len > MAX_TABLE_LEN {
            return Err(Error::InvalidRule(format!("table of {len} entries is too large")));
        }
        for (name, t) in [("forward", &forward), ("backward", &backward)] {
            if t.len() as u128 != len {
                return Err(Error::InvalidRule(format!(
                    "{name} table has {} entries, expected {len}",
                    t.len()
                )));
            }
            if t.iter().any(|&v| v as u32 >= alphabet) {
                return Err(Error::InvalidRule(format!("{name} table value out of range")));
            }
        }
        Ok(TableRule {
            dimension,
            alphabet,
            forward,
            backward,
        })
    }

    /// The table rule that never changes any cell.
    pub fn identity(dimension: usize, alphabet: u32) -> Result<Self> {
        let m = moore_size(dimension);
        let len = checked_pow(alphabet, m);
        if len > MAX_TABLE_LEN {
            return Err(Error::InvalidRule("identity table too large".into()));
        }
        let center_weight = checked_pow(alphabet, m / 2) as usize;
        let table: Vec<u8> = (0..len as usize)
            .map(|i| ((i / center_weight) % alphabet as usize) as u8)
            .collect();
        TableRule::new(dimension, alphabet, table.clone(), table)
    }
}

fn check_alphabet(a: u32) -> Result<()> {
    if (2..=MAX_ALPHABET).contains(&a) {
        Ok(())
    } else {
        Err(Error::InvalidRule(format!("alphabet size {a} unsupported")))
    }
}

impl Rule {
    pub fn shift(vector: Vec<i64>) -> Result<Rule> {
        if vector.is_empty() {
            return Err(Error::InvalidRule("shift vector must be non-empty".into()));
        }
        if vector.iter().any(|x| x.abs() > 1) {
            return Err(Error::InvalidRule(
                "only radius-1 rules are supported: shift components must lie in -1..=1".into(),
            ));
        }
        Ok(Rule::Shift { vector })
    }

    pub fn identity(dimension: usize, alphabet: u32) -> Result<Rule> {
        Ok(Rule::Table(TableRule::identity(dimension, alphabet)?))
    }

    /// Billiard-ball block rule on 2x2 blocks (cells ordered UL, UR, LL, LR):
    /// a lone particle crosses the block diagonally, a head-on diagonal pair
    /// turns into the other diagonal pair, everything else stays put.
    pub fn billiard_ball() -> Rule {
        let mut perm: Vec<u32> = (0..16).collect();
        for (a, b) in [(0b1000u32, 0b0001u32), (0b0100, 0b0010), (0b1001, 0b0110)] {
            perm[a as usize] = b;
            perm[b as usize] = a;
        }
        Rule::Margolus(
            MargolusRule::new(2, 2, perm, vec![vec![0, 0], vec![1, 1]]).expect("valid billiard-ball table"),
        )
    }

    pub fn second_order_elementary(code: u8) -> Rule {
        Rule::SecondOrder(SecondOrderRule::elementary(code))
    }

    /// The radius-1 majority vote, which is not injective. Used only as a
    /// negative fixture for the reversibility verifier.
    pub fn majority() -> Rule {
        let table: Vec<u8> = (0..8u8).map(|i| (i.count_ones() >= 2) as u8).collect();
        Rule::Table(TableRule::new(1, 2, table.clone(), table).expect("valid table"))
    }

    /// Built-in rule by name.
    pub fn builtin(name: &str) -> Result<Rule> {
        match name {
            "shift" => Rule::shift(vec![1]),
            "shift-back" => Rule::shift(vec![-1]),
            "identity" => Rule::identity(1, 2),
            "identity2d" => Rule::identity(2, 2),
            "bbm" => Ok(Rule::billiard_ball()),
            "sr30" => Ok(Rule::second_order_elementary(30)),
            "majority" => Ok(Rule::majority()),
            _ => Err(Error::InvalidRule(format!("unknown built-in rule {name:?}"))),
        }
    }

    /// Names accepted by [`Rule::builtin`], with a one-line description.
    pub fn builtin_names() -> &'static [(&'static str, &'static str)] {
        &[
            ("shift", "1D shift by +1 (Bernoulli shift)"),
            ("shift-back", "1D shift by -1"),
            ("identity", "1D binary identity table rule"),
            ("identity2d", "2D binary identity table rule"),
            ("bbm", "2D billiard-ball Margolus block rule"),
            ("sr30", "1D second-order rule from elementary rule 30, alphabet 2x2"),
            ("majority", "1D majority vote (irreversible, test fixture only)"),
        ]
    }

    /// Spatial dimension the rule is defined for.
    pub fn dimension(&self) -> usize {
        match self {
            Rule::Shift { vector } => vector.len(),
            Rule::Margolus(m) => m.dimension,
            Rule::SecondOrder(s) => s.dimension,
            Rule::Table(t) => t.dimension,
        }
    }

    /// Alphabet the rule requires, or `None` if it works for any alphabet.
    pub fn alphabet(&self) -> Option<u32> {
        match self {
            Rule::Shift { .. } => None,
            Rule::Margolus(m) => Some(m.alphabet),
            Rule::SecondOrder(s) => Some(s.base * s.base),
            Rule::Table(t) => Some(t.alphabet),
        }
    }

    /// Number of steps after which the update kernel repeats.
    pub fn period(&self) -> usize {
        match self {
            Rule::Margolus(m) => m.offsets.len(),
            _ => 1,
        }
    }

    /// Whether translation by `v` lies in the covariance sublattice:
    /// all of `Z^d` for cell rules, `2Z^d` for block rules.
    pub fn in_covariance_sublattice(&self, v: &[i64]) -> bool {
        match self {
            Rule::Margolus(_) => v.iter().all(|x| x.rem_euclid(2) == 0),
            _ => true,
        }
    }

    /// Short stable identifier used in records.
    pub fn label(&self) -> String {
        match self {
            Rule::Shift { vector } => {
                let v: Vec<String> = vector.iter().map(|x| x.to_string()).collect();
                format!("shift[{}]", v.join(","))
            }
            _ => {
                let desc = serde_json::to_string(&RuleDescription::from(self.clone())).expect("serializable");
                let digest = Sha256::digest(desc.as_bytes());
                let family = match self {
                    Rule::Margolus(_) => "margolus",
                    Rule::SecondOrder(_) => "second-order",
                    Rule::Table(_) => "table",
                    Rule::Shift { .. } => unreachable!(),
                };
                format!("{family}-{}", &hex::encode(digest)[..12])
            }
        }
    }
}

/// On-disk rule description. Block images and tables are symbol strings.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RuleDescription {
    pub family: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vector: Option<Vec<i64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dimension: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alphabet: Option<u32>,
    /// Margolus: image of every block configuration, in lexicographic input order.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub blocks: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub offsets: Option<Vec<Vec<i64>>>,
    /// Table / second-order: output for every neighbourhood index.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub forward: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub backward: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub local: Option<String>,
    /// Second-order convenience: Wolfram code of a 1D binary local function.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub elementary: Option<u8>,
}

impl RuleDescription {
    pub fn parse_json(text: &str) -> Result<Rule> {
        let d: RuleDescription =
            serde_json::from_str(text).map_err(|e| Error::InvalidRule(format!("rule description: {e}")))?;
        Rule::try_from(d)
    }
}

fn need<T>(v: Option<T>, what: &str, family: &str) -> Result<T> {
    v.ok_or_else(|| Error::InvalidRule(format!("{family} rule needs field {what:?}")))
}

impl TryFrom<RuleDescription> for Rule {
    type Error = Error;

    fn try_from(d: RuleDescription) -> Result<Rule> {
        let family = d.family.as_str();
        match family {
            "shift" => Rule::shift(need(d.vector, "vector", family)?),
            "identity" => Rule::identity(need(d.dimension, "dimension", family)?, d.alphabet.unwrap_or(2)),
            "margolus" => {
                let dimension = need(d.dimension, "dimension", family)?;
                let alphabet = d.alphabet.unwrap_or(2);
                let block = 1usize << dimension;
                let images = need(d.blocks, "blocks", family)?
                    .iter()
                    .map(|img| {
                        let syms = parse_symbols(img)?;
                        if syms.len() != block || syms.iter().any(|&s| s as u32 >= alphabet) {
                            return Err(Error::InvalidRule(format!("malformed block image {img:?}")));
                        }
                        Ok(syms.iter().fold(0u32, |acc, &s| acc * alphabet + s as u32))
                    })
                    .collect::<Result<Vec<u32>>>()?;
                let offsets = d
                    .offsets
                    .unwrap_or_else(|| vec![vec![0; dimension], vec![1; dimension]]);
                Ok(Rule::Margolus(MargolusRule::new(dimension, alphabet, images, offsets)?))
            }
            "second-order" => {
                if let Some(code) = d.elementary {
                    return Ok(Rule::second_order_elementary(code));
                }
                let dimension = need(d.dimension, "dimension", family)?;
                let base = d.alphabet.unwrap_or(2);
                let local = parse_symbols(&need(d.local, "local", family)?)?;
                Ok(Rule::SecondOrder(SecondOrderRule::new(dimension, base, local)?))
            }
            "table" => {
                let dimension = need(d.dimension, "dimension", family)?;
                let alphabet = d.alphabet.unwrap_or(2);
                let forward = parse_symbols(&need(d.forward, "forward", family)?)?;
                let backward = parse_symbols(&need(d.backward, "backward", family)?)?;
                Ok(Rule::Table(TableRule::new(dimension, alphabet, forward, backward)?))
            }
            other => Err(Error::InvalidRule(format!("unknown rule family {other:?}"))),
        }
    }
}

impl From<Rule> for RuleDescription {
    fn from(rule: Rule) -> Self {
        match rule {
            Rule::Shift { vector } => RuleDescription {
                family: "shift".into(),
                vector: Some(vector),
                ..Default::default()
            },
            Rule::Margolus(m) => {
                let block = m.block_len();
                let blocks = m
                    .forward
                    .iter()
                    .map(|&img| {
                        let mut syms = vec![0u8; block];
                        let mut rest = img;
                        for s in syms.iter_mut().rev() {
                            *s = (rest % m.alphabet) as u8;
                            rest /= m.alphabet;
                        }
                        symbols_to_text(&syms)
                    })
                    .collect();
                RuleDescription {
                    family: "margolus".into(),
                    dimension: Some(m.dimension),
                    alphabet: Some(m.alphabet),
                    blocks: Some(blocks),
                    offsets: Some(m.offsets),
                    ..Default::default()
                }
            }
            Rule::SecondOrder(s) => RuleDescription {
                family: "second-order".into(),
                dimension: Some(s.dimension),
                alphabet: Some(s.base),
                local: Some(symbols_to_text(&s.local)),
                ..Default::default()
            },
            Rule::Table(t) => RuleDescription {
                family: "table".into(),
                dimension: Some(t.dimension),
                alphabet: Some(t.alphabet),
                forward: Some(symbols_to_text(&t.forward)),
                backward: Some(symbols_to_text(&t.backward)),
                ..Default::default()
            },
        }
    }
}
