//! 9x9 digit grids and a constraint-propagation solver with
//! minimum-remaining-values search.

use std::fmt;
use std::str::FromStr;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

pub const CELLS: usize = 81;
const ALL: u16 = 0b11_1111_1110;

/// Grid of digits 1 to 9; 0 marks an empty cell. Cells are row-major.
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct DigitGrid {
    cells: [u8; CELLS],
}

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum GridError {
    #[error("grid needs 81 cells, got {0}")]
    Length(usize),
    #[error("cell {cell} holds `{found}`")]
    BadCell { cell: usize, found: char },
    #[error("cell {cell} holds digit {digit}")]
    OutOfRange { cell: usize, digit: u8 },
}

impl DigitGrid {
    pub fn empty() -> Self {
        DigitGrid { cells: [0; CELLS] }
    }

    pub fn from_cells(cells: [u8; CELLS]) -> Result<Self, GridError> {
        if let Some(i) = cells.iter().position(|&d| d > 9) {
            return Err(GridError::OutOfRange { cell: i, digit: cells[i] });
        }
        Ok(DigitGrid { cells })
    }

    pub fn cells(&self) -> &[u8; CELLS] {
        &self.cells
    }

    pub fn get(&self, cell: usize) -> u8 {
        self.cells[cell]
    }

    /// Sets one cell. Panics on digits above 9.
    pub fn set(&mut self, cell: usize, digit: u8) {
        assert!(digit <= 9, "digit {digit} out of range");
        self.cells[cell] = digit;
    }

    pub fn filled(&self) -> usize {
        self.cells.iter().filter(|&&d| d != 0).count()
    }

    pub fn empty_cells(&self) -> usize {
        CELLS - self.filled()
    }

    /// Every row, column and box is a permutation of 1..=9.
    pub fn is_solved(&self) -> bool {
        self.filled() == CELLS && units().iter().all(|u| u.iter().fold(0u16, |m, &c| m | 1 << self.cells[c]) == ALL)
    }

    /// No digit repeats within a unit. Empty cells are ignored.
    pub fn is_consistent(&self) -> bool {
        units().iter().all(|u| {
            let mut seen = 0u16;
            u.iter().all(|&c| {
                let d = self.cells[c];
                if d == 0 {
                    return true;
                }
                let fresh = seen & (1 << d) == 0;
                seen |= 1 << d;
                fresh
            })
        })
    }

    /// Every filled cell of `self` agrees with `other`.
    pub fn agrees_with(&self, other: &DigitGrid) -> bool {
        self.cells.iter().zip(&other.cells).all(|(&a, &b)| a == 0 || a == b)
    }
}

impl fmt::Display for DigitGrid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for &d in &self.cells {
            f.write_str(if d == 0 { "." } else { ["", "1", "2", "3", "4", "5", "6", "7", "8", "9"][d as usize] })?;
        }
        Ok(())
    }
}

impl fmt::Debug for DigitGrid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "DigitGrid({self})")
    }
}

impl FromStr for DigitGrid {
    type Err = GridError;

    /// Accepts digits, with `.` or `0` for empty cells. Whitespace is skipped.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let chars: Vec<char> = s.chars().filter(|c| !c.is_whitespace()).collect();
        if chars.len() != CELLS {
            return Err(GridError::Length(chars.len()));
        }
        let mut cells = [0u8; CELLS];
        for (i, &ch) in chars.iter().enumerate() {
            cells[i] = match ch {
                '.' | '0' => 0,
                '1'..='9' => ch as u8 - b'0',
                _ => return Err(GridError::BadCell { cell: i, found: ch }),
            };
        }
        Ok(DigitGrid { cells })
    }
}

impl Serialize for DigitGrid {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for DigitGrid {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

struct Tables {
    units: Vec<[usize; 9]>,
    /// Units containing each cell: row, column, box.
    cell_units: Vec<[usize; 3]>,
    peers: Vec<[usize; 20]>,
}

fn tables() -> &'static Tables {
    static TABLES: OnceLock<Tables> = OnceLock::new();
    TABLES.get_or_init(|| {
        let mut units = Vec::with_capacity(27);
        for r in 0..9 {
            units.push(std::array::from_fn(|c| r * 9 + c));
        }
        for c in 0..9 {
            units.push(std::array::from_fn(|r| r * 9 + c));
        }
        for b in 0..9 {
            let (r0, c0) = (b / 3 * 3, b % 3 * 3);
            units.push(std::array::from_fn(|i| (r0 + i / 3) * 9 + c0 + i % 3));
        }
        let cell_units = (0..CELLS)
            .map(|s| [s / 9, 9 + s % 9, 18 + (s / 27) * 3 + (s % 9) / 3])
            .collect();
        let peers = (0..CELLS)
            .map(|s| {
                let mut p: Vec<usize> = [s / 9, 9 + s % 9, 18 + (s / 27) * 3 + (s % 9) / 3]
                    .iter()
                    .flat_map(|&u| units[u])
                    .filter(|&c| c != s)
                    .collect();
                p.sort_unstable();
                p.dedup();
                p.try_into().expect("every cell has 20 peers")
            })
            .collect();
        Tables {
            units,
            cell_units,
            peers,
        }
    })
}

fn units() -> &'static [[usize; 9]] {
    &tables().units
}

/// The 20 cells sharing a row, column or box with `cell`.
pub fn peers(cell: usize) -> &'static [usize; 20] {
    &tables().peers[cell]
}

type Candidates = [u16; CELLS];

fn assign(values: &mut Candidates, s: usize, d: u8) -> bool {
    let others = values[s] & !(1 << d);
    (1..=9u8).all(|d2| others & (1 << d2) == 0 || eliminate(values, s, d2))
}

fn eliminate(values: &mut Candidates, s: usize, d: u8) -> bool {
    let bit = 1u16 << d;
    if values[s] & bit == 0 {
        return true;
    }
    values[s] &= !bit;
    let left = values[s];
    if left == 0 {
        return false;
    }
    if left.count_ones() == 1 {
        let d2 = left.trailing_zeros() as u8;
        if !peers(s).iter().all(|&p| eliminate(values, p, d2)) {
            return false;
        }
    }
    let t = tables();
    for &u in &t.cell_units[s] {
        let mut places = t.units[u].iter().filter(|&&c| values[c] & bit != 0);
        match (places.next(), places.next()) {
            (None, _) => return false,
            (Some(&only), None) if values[only] != bit && !assign(values, only, d) => return false,
            _ => {}
        }
    }
    true
}

fn propagate(g: &DigitGrid) -> Option<Candidates> {
    let mut values = [ALL; CELLS];
    for (s, &d) in g.cells.iter().enumerate() {
        if d != 0 && !assign(&mut values, s, d) {
            return None;
        }
    }
    Some(values)
}

/// Minimum-remaining-values cell, lowest index on ties. `None` when solved.
fn pick(values: &Candidates) -> Option<usize> {
    (0..CELLS)
        .filter(|&s| values[s].count_ones() > 1)
        .min_by_key(|&s| (values[s].count_ones(), s))
}

fn search(values: Candidates, limit: usize, found: &mut Vec<Candidates>) {
    let Some(s) = pick(&values) else {
        found.push(values);
        return;
    };
    for d in 1..=9u8 {
        if values[s] & (1 << d) == 0 {
            continue;
        }
        let mut next = values;
        if assign(&mut next, s, d) {
            search(next, limit, found);
            if found.len() >= limit {
                return;
            }
        }
    }
}

fn to_grid(values: &Candidates) -> DigitGrid {
    let mut cells = [0u8; CELLS];
    for (c, v) in cells.iter_mut().zip(values) {
        *c = v.trailing_zeros() as u8;
    }
    DigitGrid { cells }
}

/// Solves by unit propagation and depth-first search, trying digits in
/// ascending order. Returns the first solution, or `None` if there is none.
pub fn solve_grid(g: &DigitGrid) -> Option<DigitGrid> {
    let values = propagate(g)?;
    let mut found = Vec::with_capacity(1);
    search(values, 1, &mut found);
    found.first().map(to_grid)
}

/// Number of solutions, counting no further than `limit`.
pub fn count_solutions(g: &DigitGrid, limit: usize) -> usize {
    let Some(values) = propagate(g) else {
        return 0;
    };
    let mut found = Vec::new();
    search(values, limit.max(1), &mut found);
    found.len().min(limit)
}
