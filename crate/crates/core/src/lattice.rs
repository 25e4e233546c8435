//! Finite periodic lattices, regions, configurations and light-cone bookkeeping.
//!
//! The infinite lattice is approximated by a torus `Z/n_1 x ... x Z/n_d`. Cells are
//! addressed by a row-major linear index (axis 0 most significant), so sorting cells
//! by index is the same as sorting their wrapped coordinates lexicographically.
//! Every region and configuration therefore has a unique canonical form.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{checked_pow, Error, Result};

/// Largest alphabet with a single-character textual symbol (`0-9a-z`).
pub const MAX_ALPHABET: u32 = 36;

/// Shape of the torus and size of the alphabet.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "GeometryWire", into = "GeometryWire")]
pub struct Geometry {
    dims: Vec<usize>,
    alphabet: u32,
    strides: Vec<usize>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GeometryWire {
    dims: Vec<usize>,
    alphabet: u32,
}

impl TryFrom<GeometryWire> for Geometry {
    type Error = Error;

    fn try_from(w: GeometryWire) -> Result<Self> {
        Geometry::new(w.dims, w.alphabet)
    }
}

impl From<Geometry> for GeometryWire {
    fn from(g: Geometry) -> Self {
        GeometryWire {
            dims: g.dims,
            alphabet: g.alphabet,
        }
    }
}

impl Geometry {
    pub fn new(dims: Vec<usize>, alphabet: u32) -> Result<Self> {
        if dims.is_empty() {
            return Err(Error::Geometry("dimension must be positive".into()));
        }
        if dims.iter().any(|&n| n == 0) {
            return Err(Error::Geometry("side lengths must be positive".into()));
        }
        if !(2..=MAX_ALPHABET).contains(&alphabet) {
            return Err(Error::Geometry(format!(
                "alphabet size {alphabet} outside 2..={MAX_ALPHABET}"
            )));
        }
        let mut total: usize = 1;
        for &n in &dims {
            total = total
                .checked_mul(n)
                .ok_or_else(|| Error::Geometry("cell count overflows".into()))?;
        }
        let mut strides = vec![1; dims.len()];
        for i in (0..dims.len().saturating_sub(1)).rev() {
            strides[i] = strides[i + 1] * dims[i + 1];
        }
        Ok(Geometry {
            dims,
            alphabet,
            strides,
        })
    }

    /// One-dimensional ring of `n` cells.
    pub fn line(n: usize, alphabet: u32) -> Result<Self> {
        Geometry::new(vec![n], alphabet)
    }

    pub fn grid(rows: usize, cols: usize, alphabet: u32) -> Result<Self> {
        Geometry::new(vec![rows, cols], alphabet)
    }

    pub fn dimension(&self) -> usize {
        self.dims.len()
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn alphabet(&self) -> u32 {
        self.alphabet
    }

    pub fn cell_count(&self) -> usize {
        self.dims.iter().product()
    }

    /// Same torus with a different alphabet.
    pub fn with_alphabet(&self, alphabet: u32) -> Result<Self> {
        Geometry::new(self.dims.clone(), alphabet)
    }

    /// Linear index of a (possibly negative, possibly out of range) coordinate.
    pub fn index_of(&self, coord: &[i64]) -> Result<usize> {
        if coord.len() != self.dims.len() {
            return Err(Error::Dimension {
                expected: self.dims.len(),
                got: coord.len(),
            });
        }
        Ok(coord
            .iter()
            .zip(&self.dims)
            .zip(&self.strides)
            .map(|((&c, &n), &s)| c.rem_euclid(n as i64) as usize * s)
            .sum())
    }

    /// Wrapped coordinate of a cell, each component in `[0, n_i)`.
    pub fn coord_of(&self, cell: usize) -> Vec<i64> {
        self.dims
            .iter()
            .zip(&self.strides)
            .map(|(&n, &s)| ((cell / s) % n) as i64)
            .collect()
    }

    /// Component `axis` of the wrapped coordinate of `cell`.
    pub fn axis_coord(&self, cell: usize, axis: usize) -> usize {
        (cell / self.strides[axis]) % self.dims[axis]
    }

    /// The cell reached from `cell` by the displacement `delta`, with wrap.
    pub fn offset(&self, cell: usize, delta: &[i64]) -> usize {
        debug_assert_eq!(delta.len(), self.dims.len());
        let mut out = 0;
        for i in 0..self.dims.len() {
            let n = self.dims[i] as i64;
            let c = ((cell / self.strides[i]) % self.dims[i]) as i64;
            out += (c + delta[i]).rem_euclid(n) as usize * self.strides[i];
        }
        out
    }

    /// Number of configurations of a region with `cells` cells.
    pub fn configurations(&self, cells: usize) -> u128 {
        checked_pow(self.alphabet, cells)
    }

    pub fn full_region(&self) -> Region {
        Region {
            cells: (0..self.cell_count()).collect(),
        }
    }
}

impl fmt::Display for Geometry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let dims: Vec<String> = self.dims.iter().map(|n| n.to_string()).collect();
        write!(f, "{}/a{}", dims.join("x"), self.alphabet)
    }
}

/// A finite set of cells, kept sorted and free of duplicates.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Region {
    cells: Vec<usize>,
}

impl Region {
    pub fn empty() -> Self {
        Region::default()
    }

    /// Region from linear cell indices (any order, duplicates removed).
    pub fn from_cells(geometry: &Geometry, cells: impl IntoIterator<Item = usize>) -> Result<Self> {
        let set: BTreeSet<usize> = cells.into_iter().collect();
        if set.iter().any(|&c| c >= geometry.cell_count()) {
            return Err(Error::NotContained);
        }
        Ok(Region {
            cells: set.into_iter().collect(),
        })
    }

    /// Region from coordinates; negative and out-of-range components wrap.
    pub fn from_coords<C: AsRef<[i64]>>(
        geometry: &Geometry,
        coords: impl IntoIterator<Item = C>,
    ) -> Result<Self> {
        let mut set = BTreeSet::new();
        for c in coords {
            set.insert(geometry.index_of(c.as_ref())?);
        }
        Ok(Region {
            cells: set.into_iter().collect(),
        })
    }

    /// Convenience for one-dimensional lattices: cells given as signed positions.
    pub fn from_positions(geometry: &Geometry, positions: impl IntoIterator<Item = i64>) -> Result<Self> {
        Region::from_coords(geometry, positions.into_iter().map(|p| [p]))
    }

    pub(crate) fn from_sorted_unchecked(cells: Vec<usize>) -> Self {
        debug_assert!(cells.windows(2).all(|w| w[0] < w[1]));
        Region { cells }
    }

    pub fn cells(&self) -> &[usize] {
        &self.cells
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn contains(&self, cell: usize) -> bool {
        self.cells.binary_search(&cell).is_ok()
    }

    /// Position of `cell` in region order.
    pub fn position(&self, cell: usize) -> Option<usize> {
        self.cells.binary_search(&cell).ok()
    }

    pub fn is_subset(&self, other: &Region) -> bool {
        self.cells.iter().all(|&c| other.contains(c))
    }

    pub fn is_disjoint(&self, other: &Region) -> bool {
        self.cells.iter().all(|&c| !other.contains(c))
    }

    pub fn union(&self, other: &Region) -> Region {
        let set: BTreeSet<usize> = self.cells.iter().chain(&other.cells).copied().collect();
        Region {
            cells: set.into_iter().collect(),
        }
    }

    pub fn intersection(&self, other: &Region) -> Region {
        Region {
            cells: self.cells.iter().copied().filter(|&c| other.contains(c)).collect(),
        }
    }

    pub fn difference(&self, other: &Region) -> Region {
        Region {
            cells: self.cells.iter().copied().filter(|&c| !other.contains(c)).collect(),
        }
    }

    pub fn translate(&self, geometry: &Geometry, delta: &[i64]) -> Result<Region> {
        if delta.len() != geometry.dimension() {
            return Err(Error::Dimension {
                expected: geometry.dimension(),
                got: delta.len(),
            });
        }
        Region::from_cells(geometry, self.cells.iter().map(|&c| geometry.offset(c, delta)))
    }

    pub fn coords(&self, geometry: &Geometry) -> Vec<Vec<i64>> {
        self.cells.iter().map(|&c| geometry.coord_of(c)).collect()
    }

    /// Canonical text: cells in order separated by `;`, components by `,`.
    pub fn to_text(&self, geometry: &Geometry) -> String {
        self.cells
            .iter()
            .map(|&c| {
                geometry
                    .coord_of(c)
                    .iter()
                    .map(|x| x.to_string())
                    .collect::<Vec<_>>()
                    .join(",")
            })
            .collect::<Vec<_>>()
            .join(";")
    }

    pub fn parse(geometry: &Geometry, text: &str) -> Result<Region> {
        let text = text.trim();
        if text.is_empty() {
            return Ok(Region::empty());
        }
        let mut coords = Vec::new();
        for part in text.split(';') {
            let coord = part
                .split(',')
                .map(|x| {
                    x.trim()
                        .parse::<i64>()
                        .map_err(|e| Error::Parse(format!("bad coordinate {x:?}: {e}")))
                })
                .collect::<Result<Vec<i64>>>()?;
            coords.push(coord);
        }
        Region::from_coords(geometry, coords)
    }

    /// Smallest circular arc length covering the region's projection on `axis`.
    pub fn extent(&self, geometry: &Geometry, axis: usize) -> usize {
        let n = geometry.dims()[axis];
        let mut occupied: Vec<usize> = self.cells.iter().map(|&c| geometry.axis_coord(c, axis)).collect();
        occupied.sort_unstable();
        occupied.dedup();
        if occupied.len() <= 1 {
            return 0;
        }
        let mut max_gap = occupied[0] + n - occupied[occupied.len() - 1];
        for w in occupied.windows(2) {
            max_gap = max_gap.max(w[1] - w[0]);
        }
        n - max_gap
    }
}

/// An assignment of symbols to the cells of a region, in region order.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Configuration {
    region: Region,
    symbols: Vec<u8>,
}

impl Configuration {
    pub fn new(region: Region, symbols: Vec<u8>, alphabet: u32) -> Result<Self> {
        if symbols.len() != region.len() {
            return Err(Error::Length {
                expected: region.len(),
                got: symbols.len(),
            });
        }
        if let Some(&s) = symbols.iter().find(|&&s| s as u32 >= alphabet) {
            return Err(Error::Symbol {
                symbol: s as u32,
                alphabet,
            });
        }
        Ok(Configuration { region, symbols })
    }

    pub fn zeros(region: Region) -> Self {
        let symbols = vec![0; region.len()];
        Configuration { region, symbols }
    }

    pub fn empty() -> Self {
        Configuration::zeros(Region::empty())
    }

    /// Configuration from a symbol string such as `"101"` (region order).
    pub fn from_text(geometry: &Geometry, region: Region, symbols: &str) -> Result<Self> {
        let symbols = parse_symbols(symbols)?;
        Configuration::new(region, symbols, geometry.alphabet())
    }

    /// The `index`-th configuration of `region` in lexicographic order
    /// (first cell most significant).
    pub fn from_index(region: Region, alphabet: u32, mut index: u128) -> Self {
        let mut symbols = vec![0u8; region.len()];
        for s in symbols.iter_mut().rev() {
            *s = (index % alphabet as u128) as u8;
            index /= alphabet as u128;
        }
        Configuration { region, symbols }
    }

    /// Lexicographic rank of this configuration among all configurations of its region.
    pub fn index(&self, alphabet: u32) -> u128 {
        symbols_index(&self.symbols, alphabet)
    }

    pub fn region(&self) -> &Region {
        &self.region
    }

    pub fn symbols(&self) -> &[u8] {
        &self.symbols
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    pub fn get(&self, cell: usize) -> Option<u8> {
        self.region.position(cell).map(|i| self.symbols[i])
    }

    /// Iterator over `(cell, symbol)` pairs.
    pub fn iter(&self) -> impl Iterator<Item = (usize, u8)> + '_ {
        self.region.cells().iter().copied().zip(self.symbols.iter().copied())
    }

    /// Union of two configurations on disjoint regions.
    pub fn join(&self, other: &Configuration) -> Result<Configuration> {
        if !self.region.is_disjoint(&other.region) {
            return Err(Error::Overlap("joined configurations share cells".into()));
        }
        let mut pairs: Vec<(usize, u8)> = self.iter().chain(other.iter()).collect();
        pairs.sort_unstable();
        let (cells, symbols) = pairs.into_iter().unzip();
        Ok(Configuration {
            region: Region::from_sorted_unchecked(cells),
            symbols,
        })
    }

    /// True when the two configurations disagree on some shared cell,
    /// i.e. their cylinder sets are disjoint.
    pub fn excludes(&self, other: &Configuration) -> bool {
        self.iter().any(|(c, s)| matches!(other.get(c), Some(t) if t != s))
    }

    pub fn translate(&self, geometry: &Geometry, delta: &[i64]) -> Result<Configuration> {
        let pairs: Vec<(usize, u8)> = self.iter().map(|(c, s)| (geometry.offset(c, delta), s)).collect();
        let region = Region::from_cells(geometry, pairs.iter().map(|p| p.0))?;
        if region.len() != pairs.len() {
            return Err(Error::Overlap("translation folds the region onto itself".into()));
        }
        let mut symbols = vec![0; pairs.len()];
        for (c, s) in pairs {
            symbols[region.position(c).expect("translated cell")] = s;
        }
        Ok(Configuration { region, symbols })
    }

    pub fn symbol_text(&self) -> String {
        symbols_to_text(&self.symbols)
    }

    /// Canonical text: `<region>=<symbols>`.
    pub fn to_text(&self, geometry: &Geometry) -> String {
        format!("{}={}", self.region.to_text(geometry), self.symbol_text())
    }

    pub fn parse(geometry: &Geometry, text: &str) -> Result<Configuration> {
        let (region, symbols) = text
            .split_once('=')
            .ok_or_else(|| Error::Parse(format!("configuration {text:?} lacks '='")))?;
        let region = Region::parse(geometry, region)?;
        Configuration::from_text(geometry, region, symbols.trim())
    }
}

/// The state of every cell of the torus, plus the clock of the dynamics.
///
/// The clock only matters for block rules whose partition alternates with time;
/// it is 0 for freshly created states and advances by one per forward step.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct FullState {
    geometry: Geometry,
    clock: i64,
    cells: Vec<u8>,
}

impl FullState {
    pub fn zeros(geometry: &Geometry) -> Self {
        FullState {
            geometry: geometry.clone(),
            clock: 0,
            cells: vec![0; geometry.cell_count()],
        }
    }

    pub fn from_symbols(geometry: &Geometry, cells: Vec<u8>) -> Result<Self> {
        if cells.len() != geometry.cell_count() {
            return Err(Error::Length {
                expected: geometry.cell_count(),
                got: cells.len(),
            });
        }
        if let Some(&s) = cells.iter().find(|&&s| s as u32 >= geometry.alphabet()) {
            return Err(Error::Symbol {
                symbol: s as u32,
                alphabet: geometry.alphabet(),
            });
        }
        Ok(FullState {
            geometry: geometry.clone(),
            clock: 0,
            cells,
        })
    }

    /// The `index`-th state in lexicographic order of the cell sequence.
    pub fn from_index(geometry: &Geometry, index: u128) -> Self {
        let cfg = Configuration::from_index(geometry.full_region(), geometry.alphabet(), index);
        FullState {
            geometry: geometry.clone(),
            clock: 0,
            cells: cfg.symbols,
        }
    }

    /// All-zero state overwritten by the given configuration.
    pub fn with_configuration(geometry: &Geometry, config: &Configuration) -> Result<Self> {
        let mut s = FullState::zeros(geometry);
        s.set_configuration(config)?;
        Ok(s)
    }

    pub fn set_configuration(&mut self, config: &Configuration) -> Result<()> {
        if config.region.cells.last().is_some_and(|&c| c >= self.cells.len()) {
            return Err(Error::NotContained);
        }
        if let Some(&s) = config.symbols.iter().find(|&&s| s as u32 >= self.geometry.alphabet()) {
            return Err(Error::Symbol {
                symbol: s as u32,
                alphabet: self.geometry.alphabet(),
            });
        }
        for (c, s) in config.iter() {
            self.cells[c] = s;
        }
        Ok(())
    }

    pub fn geometry(&self) -> &Geometry {
        &self.geometry
    }

    pub fn clock(&self) -> i64 {
        self.clock
    }

    pub fn with_clock(mut self, clock: i64) -> Self {
        self.clock = clock;
        self
    }

    pub(crate) fn set_clock(&mut self, clock: i64) {
        self.clock = clock;
    }

    pub fn symbols(&self) -> &[u8] {
        &self.cells
    }

    pub(crate) fn symbols_mut(&mut self) -> &mut Vec<u8> {
        &mut self.cells
    }

    pub fn get(&self, cell: usize) -> u8 {
        self.cells[cell]
    }

    pub fn set(&mut self, cell: usize, symbol: u8) {
        assert!((symbol as u32) < self.geometry.alphabet(), "symbol out of range");
        self.cells[cell] = symbol;
    }

    /// The state translated by `delta`: the new state at `x` is the old state at `x - delta`.
    pub fn translate(&self, delta: &[i64]) -> FullState {
        let g = &self.geometry;
        let mut cells = vec![0; self.cells.len()];
        for (c, &s) in self.cells.iter().enumerate() {
            cells[g.offset(c, delta)] = s;
        }
        FullState {
            geometry: g.clone(),
            clock: self.clock,
            cells,
        }
    }

    /// Canonical text: `<dims>/a<alphabet>/t<clock>:<symbols>`.
    pub fn to_text(&self) -> String {
        format!("{}/t{}:{}", self.geometry, self.clock, symbols_to_text(&self.cells))
    }

    pub fn parse(text: &str) -> Result<FullState> {
        let bad = || Error::Parse(format!("malformed state {text:?}"));
        let (head, symbols) = text.trim().split_once(':').ok_or_else(bad)?;
        let mut parts = head.split('/');
        let dims = parts.next().ok_or_else(bad)?;
        let alphabet = parts.next().and_then(|p| p.strip_prefix('a')).ok_or_else(bad)?;
        let clock = parts.next().and_then(|p| p.strip_prefix('t')).ok_or_else(bad)?;
        if parts.next().is_some() {
            return Err(bad());
        }
        let dims = dims
            .split('x')
            .map(|n| n.parse::<usize>().map_err(|_| bad()))
            .collect::<Result<Vec<_>>>()?;
        let alphabet = alphabet.parse::<u32>().map_err(|_| bad())?;
        let clock = clock.parse::<i64>().map_err(|_| bad())?;
        let geometry = Geometry::new(dims, alphabet)?;
        Ok(FullState::from_symbols(&geometry, parse_symbols(symbols)?)?.with_clock(clock))
    }
}

/// Restriction of a state or configuration to a sub-region.
pub trait Restrict {
    fn restrict(&self, region: &Region) -> Result<Configuration>;
}

impl Restrict for FullState {
    fn restrict(&self, region: &Region) -> Result<Configuration> {
        if region.cells.last().is_some_and(|&c| c >= self.cells.len()) {
            return Err(Error::NotContained);
        }
        Ok(Configuration {
            region: region.clone(),
            symbols: region.cells.iter().map(|&c| self.cells[c]).collect(),
        })
    }
}

impl Restrict for Configuration {
    fn restrict(&self, region: &Region) -> Result<Configuration> {
        let symbols = region
            .cells
            .iter()
            .map(|&c| self.get(c).ok_or(Error::NotContained))
            .collect::<Result<Vec<u8>>>()?;
        Ok(Configuration {
            region: region.clone(),
            symbols,
        })
    }
}

/// All cells within L-infinity distance `radius` of some cell of `region`, with wrap.
pub fn moore_neighborhood(region: &Region, radius: usize, geometry: &Geometry) -> Region {
    let d = geometry.dimension();
    let r = radius as i64;
    let span = 2 * radius + 1;
    let mut out = BTreeSet::new();
    let mut delta = vec![0i64; d];
    for &cell in region.cells() {
        for k in 0..span.pow(d as u32) {
            let mut rest = k;
            for slot in delta.iter_mut().rev() {
                *slot = (rest % span) as i64 - r;
                rest /= span;
            }
            out.insert(geometry.offset(cell, &delta));
        }
    }
    Region {
        cells: out.into_iter().collect(),
    }
}

/// True iff `2t + extent_i(region) < n_i` on every axis, i.e. the radius-`t`
/// light cone of the region does not meet itself through the torus. Inside this
/// bound the finite torus reproduces the infinite-lattice evolution exactly.
pub fn light_cone_valid(geometry: &Geometry, region: &Region, t: u64) -> bool {
    (0..geometry.dimension()).all(|axis| {
        let n = geometry.dims()[axis] as u128;
        2 * t as u128 + (region.extent(geometry, axis) as u128) < n
    })
}

/// [`light_cone_valid`] as a `Result`, for operations that must flag out-of-cone queries.
pub fn require_light_cone(geometry: &Geometry, region: &Region, t: u64) -> Result<()> {
    if light_cone_valid(geometry, region, t) {
        Ok(())
    } else {
        Err(Error::LightCone { time: t })
    }
}

pub fn symbols_index(symbols: &[u8], alphabet: u32) -> u128 {
    symbols
        .iter()
        .fold(0u128, |acc, &s| acc * alphabet as u128 + s as u128)
}

pub fn symbol_char(s: u8) -> char {
    std::char::from_digit(s as u32, MAX_ALPHABET).expect("symbol below 36")
}

pub fn symbols_to_text(symbols: &[u8]) -> String {
    symbols.iter().map(|&s| symbol_char(s)).collect()
}

pub fn parse_symbols(text: &str) -> Result<Vec<u8>> {
    text.chars()
        .map(|ch| {
            ch.to_digit(MAX_ALPHABET)
                .map(|d| d as u8)
                .ok_or_else(|| Error::Parse(format!("bad symbol {ch:?}")))
        })
        .collect()
}
