use std::fmt;

use serde::{Deserialize, Serialize};

/// Largest ambient dimension supported by the variable table.
pub const MAX_DIM: usize = 2;

/// Number of evaluation slots: five vector blocks of `MAX_DIM` plus `t`.
pub const SLOT_COUNT: usize = 5 * MAX_DIM + 1;

/// A block of vector variables.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Block {
    X,
    Y,
    Z,
    Xi,
    Eta,
}

impl Block {
    pub const ALL: [Block; 5] = [Block::X, Block::Y, Block::Z, Block::Xi, Block::Eta];

    pub fn prefix(self) -> &'static str {
        match self {
            Block::X => "x",
            Block::Y => "y",
            Block::Z => "z",
            Block::Xi => "xi",
            Block::Eta => "eta",
        }
    }

    /// Component `i` (zero based) of this block.
    pub fn var(self, i: usize) -> Var {
        assert!(i < MAX_DIM, "component {i} out of range");
        Var::Component(self, i as u8)
    }

    pub fn vars(self, dim: usize) -> Vec<Var> {
        (0..dim).map(|i| self.var(i)).collect()
    }

    fn slot_base(self) -> usize {
        let k = match self {
            Block::X => 0,
            Block::Y => 1,
            Block::Z => 2,
            Block::Xi => 3,
            Block::Eta => 4,
        };
        k * MAX_DIM
    }
}

/// A named real variable: a component of one of the vector blocks, or time.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Var {
    Component(Block, u8),
    T,
}

impl Var {
    pub fn x(i: usize) -> Var {
        Block::X.var(i)
    }
    pub fn y(i: usize) -> Var {
        Block::Y.var(i)
    }
    pub fn z(i: usize) -> Var {
        Block::Z.var(i)
    }
    pub fn xi(i: usize) -> Var {
        Block::Xi.var(i)
    }
    pub fn eta(i: usize) -> Var {
        Block::Eta.var(i)
    }

    pub fn block(self) -> Option<Block> {
        match self {
            Var::Component(b, _) => Some(b),
            Var::T => None,
        }
    }

    pub fn slot(self) -> usize {
        match self {
            Var::Component(b, i) => b.slot_base() + i as usize,
            Var::T => SLOT_COUNT - 1,
        }
    }

    /// Parse a variable name such as `xi2` or `t`, checking it against `dim`.
    pub fn from_name(name: &str, dim: usize) -> Result<Var, VarNameError> {
        if name == "t" {
            return Ok(Var::T);
        }
        let split = name
            .find(|c: char| c.is_ascii_digit())
            .ok_or(VarNameError::Unknown)?;
        let (prefix, digits) = name.split_at(split);
        let block = Block::ALL
            .into_iter()
            .find(|b| b.prefix() == prefix)
            .ok_or(VarNameError::Unknown)?;
        let index: usize = digits.parse().map_err(|_| VarNameError::Unknown)?;
        if index == 0 || index > dim || index > MAX_DIM {
            return Err(VarNameError::OutOfRange { index, dim });
        }
        Ok(block.var(index - 1))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VarNameError {
    Unknown,
    OutOfRange { index: usize, dim: usize },
}

impl fmt::Display for Var {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Var::Component(b, i) => write!(f, "{}{}", b.prefix(), *i as usize + 1),
            Var::T => f.write_str("t"),
        }
    }
}

impl Serialize for Point {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        use serde::ser::SerializeMap;
        let mut map = s.serialize_map(None)?;
        for (var, value) in self.bindings() {
            map.serialize_entry(&var.to_string(), &value)?;
        }
        map.end()
    }
}

/// An assignment of real values to variables.
#[derive(Clone, Copy, PartialEq)]
pub struct Point {
    values: [f64; SLOT_COUNT],
    bound: u16,
}

impl Default for Point {
    fn default() -> Self {
        Point::new()
    }
}

impl fmt::Debug for Point {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_map()
            .entries(self.bindings().map(|(v, x)| (v.to_string(), x)))
            .finish()
    }
}

impl Point {
    pub fn new() -> Self {
        Point {
            values: [0.0; SLOT_COUNT],
            bound: 0,
        }
    }

    pub fn with(mut self, var: Var, value: f64) -> Self {
        self.set(var, value);
        self
    }

    /// Bind every component of `block` from `values`.
    pub fn with_block(mut self, block: Block, values: &[f64]) -> Self {
        for (i, &v) in values.iter().enumerate() {
            self.set(block.var(i), v);
        }
        self
    }

    pub fn set(&mut self, var: Var, value: f64) {
        let s = var.slot();
        self.values[s] = value;
        self.bound |= 1 << s;
    }

    pub fn get(&self, var: Var) -> Option<f64> {
        let s = var.slot();
        (self.bound & (1 << s) != 0).then(|| self.values[s])
    }

    pub fn is_bound(&self, var: Var) -> bool {
        self.bound & (1 << var.slot()) != 0
    }

    pub(crate) fn slots(&self) -> &[f64; SLOT_COUNT] {
        &self.values
    }

    pub(crate) fn bound_mask(&self) -> u16 {
        self.bound
    }

    pub fn bindings(&self) -> impl Iterator<Item = (Var, f64)> + '_ {
        all_vars().filter_map(move |v| self.get(v).map(|x| (v, x)))
    }

    /// Euclidean norm over all bound values.
    pub fn norm(&self) -> f64 {
        self.bindings().map(|(_, x)| x * x).sum::<f64>().sqrt()
    }
}

pub(crate) fn all_vars() -> impl Iterator<Item = Var> {
    Block::ALL
        .into_iter()
        .flat_map(|b| (0..MAX_DIM).map(move |i| b.var(i)))
        .chain(std::iter::once(Var::T))
}
