//! Instance representation shared by every other module.
//!
//! A system is a set of max-atoms `max(z, y) + r >= x` over variables valued
//! in the rationals extended with minus infinity. Atoms are kept in canonical
//! form (`left1 <= left2`) inside an ordered set, so iteration order is the
//! atom key order everywhere.

use std::collections::BTreeSet;
use std::fmt;
use std::ops::{Add, Neg, Sub};
use std::str::FromStr;

use num_rational::Rational64;
use num_traits::{Signed, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Exact rational used for offsets, arc weights and finite values.
pub type Rational = Rational64;

/// Ordered set of canonical atoms.
pub type AtomSet = BTreeSet<MaxAtom>;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ModelError {
    #[error("variable index {index} outside universe of {nvars} variables")]
    VarOutOfRange { index: usize, nvars: usize },
    #[error("assignment covers {found} variables, system has {expected}")]
    DomainMismatch { expected: usize, found: usize },
    #[error("a system needs at least one variable")]
    EmptyUniverse,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("cannot parse `{input}` as a rational: {reason}")]
pub struct ParseRationalError {
    pub input: String,
    pub reason: &'static str,
}

/// 1-based variable index `x_i`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct VarId(u32);

impl VarId {
    /// Panics on index 0; variables are numbered from 1.
    pub fn new(index: usize) -> Self {
        assert!(index >= 1, "variable indices start at 1");
        VarId(u32::try_from(index).expect("variable index fits in u32"))
    }

    pub fn index(self) -> usize {
        self.0 as usize
    }

    /// 0-based position, for vector storage.
    pub fn slot(self) -> usize {
        self.0 as usize - 1
    }

    pub fn from_slot(slot: usize) -> Self {
        VarId::new(slot + 1)
    }
}

impl fmt::Display for VarId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "x{}", self.0)
    }
}

/// Parses an integer, a `p/q` literal or a plain decimal such as `-1.25`.
pub fn parse_rational(text: &str) -> Result<Rational, ParseRationalError> {
    let err = |reason| ParseRationalError {
        input: text.to_string(),
        reason,
    };
    let s = text.trim();
    if s.is_empty() {
        return Err(err("empty literal"));
    }
    if let Some((num, den)) = s.split_once('/') {
        let num: i64 = num.trim().parse().map_err(|_| err("bad numerator"))?;
        let den: i64 = den.trim().parse().map_err(|_| err("bad denominator"))?;
        if den == 0 {
            return Err(err("zero denominator"));
        }
        return Ok(Rational::new(num, den));
    }
    let (negative, body) = match s.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, s.strip_prefix('+').unwrap_or(s)),
    };
    let (int_part, frac_part) = body.split_once('.').unwrap_or((body, ""));
    if int_part.is_empty() && frac_part.is_empty() {
        return Err(err("no digits"));
    }
    if !int_part.chars().all(|c| c.is_ascii_digit()) || !frac_part.chars().all(|c| c.is_ascii_digit()) {
        return Err(err("not a decimal number"));
    }
    if frac_part.len() > 15 {
        return Err(err("too many fractional digits"));
    }
    let digits = format!("{int_part}{frac_part}");
    let num: i64 = digits.parse().map_err(|_| err("magnitude too large"))?;
    let den = 10i64.pow(frac_part.len() as u32);
    let value = Rational::new(num, den);
    Ok(if negative { -value } else { value })
}

pub(crate) fn fmt_rational(r: &Rational, f: &mut fmt::Formatter<'_>) -> fmt::Result {
    if r.is_integer() {
        write!(f, "{}", r.numer())
    } else {
        write!(f, "{}/{}", r.numer(), r.denom())
    }
}

/// Atom offset `r`. Always a reduced fraction, so equality is value equality.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Offset(Rational);

impl Offset {
    pub fn new(value: Rational) -> Self {
        Offset(value)
    }

    pub fn int(value: i64) -> Self {
        Offset(Rational::from_integer(value))
    }

    pub fn value(self) -> Rational {
        self.0
    }

    pub fn is_negative(self) -> bool {
        self.0.is_negative()
    }

    pub fn is_nonnegative(self) -> bool {
        !self.0.is_negative()
    }
}

impl From<i64> for Offset {
    fn from(value: i64) -> Self {
        Offset::int(value)
    }
}

impl From<Rational> for Offset {
    fn from(value: Rational) -> Self {
        Offset(value)
    }
}

impl Add for Offset {
    type Output = Offset;
    fn add(self, rhs: Offset) -> Offset {
        Offset(self.0 + rhs.0)
    }
}

impl Neg for Offset {
    type Output = Offset;
    fn neg(self) -> Offset {
        Offset(-self.0)
    }
}

impl FromStr for Offset {
    type Err = ParseRationalError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_rational(s).map(Offset)
    }
}

impl fmt::Display for Offset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt_rational(&self.0, f)
    }
}

/// Value in the rationals extended with minus infinity.
///
/// Variant order makes the derived `Ord` put `MinusInf` below every finite value.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ExtValue {
    MinusInf,
    Finite(Rational),
}

impl ExtValue {
    pub fn zero() -> Self {
        ExtValue::Finite(Rational::zero())
    }

    pub fn int(value: i64) -> Self {
        ExtValue::Finite(Rational::from_integer(value))
    }

    pub fn is_finite(self) -> bool {
        matches!(self, ExtValue::Finite(_))
    }

    pub fn finite(self) -> Option<Rational> {
        match self {
            ExtValue::Finite(v) => Some(v),
            ExtValue::MinusInf => None,
        }
    }

    /// `self + r`, absorbing at minus infinity.
    pub fn shift(self, r: Offset) -> ExtValue {
        match self {
            ExtValue::Finite(v) => ExtValue::Finite(v + r.value()),
            ExtValue::MinusInf => ExtValue::MinusInf,
        }
    }
}

impl Add<Offset> for ExtValue {
    type Output = ExtValue;
    fn add(self, rhs: Offset) -> ExtValue {
        self.shift(rhs)
    }
}

impl Sub<Offset> for ExtValue {
    type Output = ExtValue;
    fn sub(self, rhs: Offset) -> ExtValue {
        self.shift(-rhs)
    }
}

impl From<Rational> for ExtValue {
    fn from(value: Rational) -> Self {
        ExtValue::Finite(value)
    }
}

impl FromStr for ExtValue {
    type Err = ParseRationalError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "-inf" | "-∞" => Ok(ExtValue::MinusInf),
            other => parse_rational(other).map(ExtValue::Finite),
        }
    }
}

impl fmt::Display for ExtValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExtValue::MinusInf => f.write_str("-inf"),
            ExtValue::Finite(v) => fmt_rational(v, f),
        }
    }
}

/// The constraint `max(left1, left2) + offset >= right`.
///
/// Field order is the atom key: the derived `Ord` sorts by `(left1, left2, right, offset)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct MaxAtom {
    pub left1: VarId,
    pub left2: VarId,
    pub right: VarId,
    pub offset: Offset,
}

impl MaxAtom {
    /// Builds `max(z, y) + r >= x` in canonical form.
    pub fn new(z: VarId, y: VarId, x: VarId, r: impl Into<Offset>) -> Self {
        MaxAtom {
            left1: z,
            left2: y,
            right: x,
            offset: r.into(),
        }
        .canonical()
    }

    /// Single-variable atom `y + r >= x`.
    pub fn single(y: VarId, x: VarId, r: impl Into<Offset>) -> Self {
        MaxAtom::new(y, y, x, r)
    }

    /// Same atom with `left1 <= left2`.
    pub fn canonical(self) -> Self {
        if self.left1 <= self.left2 {
            self
        } else {
            MaxAtom {
                left1: self.left2,
                left2: self.left1,
                ..self
            }
        }
    }

    pub fn is_single(&self) -> bool {
        self.left1 == self.left2
    }

    pub fn is_two_var(&self) -> bool {
        self.left1 != self.left2
    }

    /// Right-hand variable occurs on the left.
    pub fn is_reflexive(&self) -> bool {
        self.right == self.left1 || self.right == self.left2
    }

    pub fn has_left(&self, v: VarId) -> bool {
        self.left1 == v || self.left2 == v
    }

    /// For a left variable `v`, the other left variable (`v` itself for single atoms).
    pub fn other_left(&self, v: VarId) -> Option<VarId> {
        if self.left1 == v {
            Some(self.left2)
        } else if self.left2 == v {
            Some(self.left1)
        } else {
            None
        }
    }

    pub fn vars(&self) -> [VarId; 3] {
        [self.left1, self.left2, self.right]
    }

    /// Rewrites every variable through `f` and re-canonicalizes.
    pub fn map_vars(&self, mut f: impl FnMut(VarId) -> VarId) -> MaxAtom {
        MaxAtom::new(f(self.left1), f(self.left2), f(self.right), self.offset)
    }
}

impl fmt::Display for MaxAtom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sign = if self.offset.is_negative() { "-" } else { "+" };
        let magnitude = Offset::new(self.offset.value().abs());
        if self.is_single() {
            write!(f, "{} {} {} >= {}", self.left1, sign, magnitude, self.right)
        } else {
            write!(
                f,
                "max({}, {}) {} {} >= {}",
                self.left1, self.left2, sign, magnitude, self.right
            )
        }
    }
}

/// Returns the atom with `left1.index <= left2.index`. Idempotent.
pub fn canonicalize(atom: MaxAtom) -> MaxAtom {
    atom.canonical()
}

/// Total map from the variables `x_1..x_n` to extended values.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Assignment {
    values: Vec<ExtValue>,
}

impl Assignment {
    pub fn from_values(values: Vec<ExtValue>) -> Self {
        Assignment { values }
    }

    pub fn minus_inf(nvars: usize) -> Self {
        Assignment {
            values: vec![ExtValue::MinusInf; nvars],
        }
    }

    pub fn zeros(nvars: usize) -> Self {
        Assignment {
            values: vec![ExtValue::zero(); nvars],
        }
    }

    pub fn nvars(&self) -> usize {
        self.values.len()
    }

    pub fn get(&self, v: VarId) -> ExtValue {
        self.values[v.slot()]
    }

    pub fn set(&mut self, v: VarId, value: ExtValue) {
        self.values[v.slot()] = value;
    }

    pub fn values(&self) -> &[ExtValue] {
        &self.values
    }

    pub fn iter(&self) -> impl Iterator<Item = (VarId, ExtValue)> + '_ {
        self.values
            .iter()
            .enumerate()
            .map(|(slot, &value)| (VarId::from_slot(slot), value))
    }

    /// At least one finite component.
    pub fn is_nontrivial(&self) -> bool {
        self.values.iter().any(|v| v.is_finite())
    }

    /// Componentwise maximum; both sides must have the same length.
    pub fn join(&self, other: &Assignment) -> Assignment {
        assert_eq!(self.nvars(), other.nvars());
        Assignment {
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| (*a).max(*b))
                .collect(),
        }
    }

    /// Adds `c` to every finite component.
    pub fn translate(&self, c: Offset) -> Assignment {
        Assignment {
            values: self.values.iter().map(|v| v.shift(c)).collect(),
        }
    }

    /// Translates so the largest finite component is 0. Trivial assignments are returned unchanged.
    pub fn normalized(&self) -> Assignment {
        match self.values.iter().filter_map(|v| v.finite()).max() {
            Some(top) => self.translate(Offset::new(-top)),
            None => self.clone(),
        }
    }
}

/// `max(a[left1], a[left2]) + offset >= a[right]`.
pub fn evaluate_atom(atom: &MaxAtom, a: &Assignment) -> bool {
    a.get(atom.left1).max(a.get(atom.left2)).shift(atom.offset) >= a.get(atom.right)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct VerifyReport {
    pub satisfied: bool,
    pub violated: Vec<MaxAtom>,
    pub nontrivial: bool,
}

/// Checks every atom of `system` against `a`.
pub fn verify(system: &AtomSystem, a: &Assignment) -> Result<VerifyReport, ModelError> {
    if a.nvars() != system.nvars() {
        return Err(ModelError::DomainMismatch {
            expected: system.nvars(),
            found: a.nvars(),
        });
    }
    let violated: Vec<MaxAtom> = system
        .atoms()
        .iter()
        .filter(|atom| !evaluate_atom(atom, a))
        .copied()
        .collect();
    Ok(VerifyReport {
        satisfied: violated.is_empty(),
        violated,
        nontrivial: a.is_nontrivial(),
    })
}

/// Disjoint sets over variable slots. The smallest index in a class is its root.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    pub fn new(n: usize) -> Self {
        UnionFind {
            parent: (0..n).collect(),
        }
    }

    pub fn find(&self, mut slot: usize) -> usize {
        while self.parent[slot] != slot {
            slot = self.parent[slot];
        }
        slot
    }

    pub fn find_compress(&mut self, slot: usize) -> usize {
        let root = self.find(slot);
        let mut cur = slot;
        while self.parent[cur] != root {
            let next = self.parent[cur];
            self.parent[cur] = root;
            cur = next;
        }
        root
    }

    /// Unites the classes of `a` and `b`; returns the surviving root.
    pub fn union(&mut self, a: usize, b: usize) -> usize {
        let ra = self.find_compress(a);
        let rb = self.find_compress(b);
        let (keep, drop) = if ra <= rb { (ra, rb) } else { (rb, ra) };
        self.parent[drop] = keep;
        keep
    }
}

/// Variable universe, atom set, fixed values and merge history.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AtomSystem {
    nvars: usize,
    atoms: AtomSet,
    values: Vec<Option<ExtValue>>,
    merges: UnionFind,
}

impl AtomSystem {
    pub fn new(nvars: usize) -> Result<Self, ModelError> {
        if nvars == 0 {
            return Err(ModelError::EmptyUniverse);
        }
        Ok(AtomSystem {
            nvars,
            atoms: AtomSet::new(),
            values: vec![None; nvars],
            merges: UnionFind::new(nvars),
        })
    }

    pub fn with_atoms(nvars: usize, atoms: impl IntoIterator<Item = MaxAtom>) -> Result<Self, ModelError> {
        let mut system = AtomSystem::new(nvars)?;
        for atom in atoms {
            system.add_atom(atom)?;
        }
        Ok(system)
    }

    /// Inserts the canonical form of `atom`; returns false when it was already present.
    pub fn add_atom(&mut self, atom: MaxAtom) -> Result<bool, ModelError> {
        for v in atom.vars() {
            self.check_var(v)?;
        }
        Ok(self.atoms.insert(atom.canonical()))
    }

    pub fn check_var(&self, v: VarId) -> Result<(), ModelError> {
        if v.index() > self.nvars {
            Err(ModelError::VarOutOfRange {
                index: v.index(),
                nvars: self.nvars,
            })
        } else {
            Ok(())
        }
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn vars(&self) -> impl Iterator<Item = VarId> {
        (1..=self.nvars).map(VarId::new)
    }

    pub fn atoms(&self) -> &AtomSet {
        &self.atoms
    }

    pub fn atoms_mut(&mut self) -> &mut AtomSet {
        &mut self.atoms
    }

    pub fn two_var_count(&self) -> usize {
        self.atoms.iter().filter(|a| a.is_two_var()).count()
    }

    pub fn min_offset(&self) -> Option<Offset> {
        self.atoms.iter().map(|a| a.offset).min()
    }

    /// Union-find representative of `v`, compressing the path.
    pub fn resolve(&mut self, v: VarId) -> VarId {
        VarId::from_slot(self.merges.find_compress(v.slot()))
    }

    /// Representative of `v` without touching the structure.
    pub fn representative(&self, v: VarId) -> VarId {
        VarId::from_slot(self.merges.find(v.slot()))
    }

    pub fn is_representative(&self, v: VarId) -> bool {
        self.representative(v) == v
    }

    /// Records `keep == drop` in the merge structure; returns the new representative.
    pub(crate) fn unite(&mut self, keep: VarId, drop: VarId) -> VarId {
        VarId::from_slot(self.merges.union(keep.slot(), drop.slot()))
    }

    pub fn fixed_value(&self, v: VarId) -> Option<ExtValue> {
        self.values[self.representative(v).slot()]
    }

    pub fn is_killed(&self, v: VarId) -> bool {
        self.fixed_value(v) == Some(ExtValue::MinusInf)
    }

    /// Fixes the class of `v` to minus infinity; returns false if it already was.
    pub fn kill(&mut self, v: VarId) -> bool {
        let root = self.resolve(v).slot();
        let was = self.values[root] == Some(ExtValue::MinusInf);
        self.values[root] = Some(ExtValue::MinusInf);
        !was
    }

    /// Representatives that are not fixed to minus infinity.
    pub fn live_vars(&self) -> BTreeSet<VarId> {
        self.vars()
            .filter(|&v| self.is_representative(v) && !self.is_killed(v))
            .collect()
    }

    pub fn killed_vars(&self) -> BTreeSet<VarId> {
        self.vars().filter(|&v| self.is_killed(v)).collect()
    }

    /// Extends values given on representatives to every variable: merged
    /// variables copy their representative, killed ones are minus infinity.
    pub fn expand(&self, on_representatives: &Assignment) -> Assignment {
        let values = self
            .vars()
            .map(|v| {
                if self.is_killed(v) {
                    ExtValue::MinusInf
                } else {
                    on_representatives.get(self.representative(v))
                }
            })
            .collect();
        Assignment::from_values(values)
    }

    /// Same universe, no atoms, no merges, nothing fixed.
    pub fn fresh_like(&self) -> AtomSystem {
        AtomSystem::new(self.nvars).expect("nvars >= 1")
    }
}
