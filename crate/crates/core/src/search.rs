//! Exhaustive search over small two-agent outcome grids.
//!
//! A grid is determined by the set of its rows, so candidates are
//! combinations of distinct row codes (base-`alphabet` numbers of length
//! `cols`). Pairwise dominance between row codes and between column codes
//! is tabulated once per length, which makes the per-candidate work a few
//! hundred byte comparisons.

use rayon::prelude::*;

/// Ordinal verdict computed on raw grids; mirrors the local-dictator test.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub(crate) enum FastClass {
    NotSimple,
    Type1,
    Type2,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub(crate) struct Grid {
    pub rows: usize,
    pub cols: usize,
    /// Row-major outcomes.
    pub cells: Vec<u8>,
}

#[cfg(test)]
impl Grid {
    pub fn at(&self, r: usize, c: usize) -> u8 {
        self.cells[r * self.cols + c]
    }
}

/// The search space and the domain used to classify candidates.
pub(crate) struct Space {
    pub alphabet: usize,
    pub max_rows: usize,
    pub max_cols: usize,
    /// `ranks[agent][k][a]`: rank of alternative `a` under agent's `k`-th preference (0 = best).
    pub ranks: [Vec<Vec<u8>>; 2],
    /// Require every strategy to be undominated for some admissible preference.
    pub ever_undominated: bool,
    /// Require each agent to have a strategy yielding this outcome against everything.
    pub opt_out: Option<u8>,
}

pub(crate) struct Run {
    pub matches: Vec<(Grid, FastClass)>,
    pub examined: u64,
    /// First unprocessed chunk when the budget ran out.
    pub resume: Option<u64>,
}

/// `dominated[k][a * n + b]`: line `b` weakly dominates line `a` under preference `k`.
struct DominanceTable {
    n: usize,
    dominated: Vec<Vec<bool>>,
}

impl DominanceTable {
    fn new(alphabet: usize, len: usize, ranks: &[Vec<u8>]) -> Self {
        let n = alphabet.pow(len as u32);
        let digits: Vec<Vec<u8>> = (0..n).map(|code| decode(code, alphabet, len)).collect();
        let dominated = ranks
            .iter()
            .map(|rank| {
                let mut table = vec![false; n * n];
                for a in 0..n {
                    for b in 0..n {
                        let mut strict = false;
                        let weak = digits[a].iter().zip(&digits[b]).all(|(&x, &y)| {
                            let (rx, ry) = (rank[x as usize], rank[y as usize]);
                            strict |= ry < rx;
                            ry <= rx
                        });
                        table[a * n + b] = weak && strict;
                    }
                }
                table
            })
            .collect();
        DominanceTable { n, dominated }
    }

    /// Bitmask of the undominated lines among `codes` for every preference.
    fn ud_masks(&self, codes: &[usize], out: &mut Vec<u16>) {
        out.clear();
        for table in &self.dominated {
            let mut mask = 0u16;
            for (i, &a) in codes.iter().enumerate() {
                if !codes.iter().any(|&b| table[a * self.n + b]) {
                    mask |= 1 << i;
                }
            }
            out.push(mask);
        }
    }
}

fn decode(mut code: usize, alphabet: usize, len: usize) -> Vec<u8> {
    let mut out = vec![0u8; len];
    for slot in out.iter_mut().rev() {
        *slot = (code % alphabet) as u8;
        code /= alphabet;
    }
    out
}

fn binomial(n: usize, k: usize) -> u64 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
    }
    acc as u64
}

/// Local-dictator classification from per-preference UD masks.
fn classify_masks(cells: &[u8], cols: usize, ud0: &[u16], ud1: &[u16]) -> FastClass {
    let mut common = 0b11u8;
    for &rows in ud0 {
        for &cs in ud1 {
            let row_dictates = bits(rows).all(|r| {
                let mut it = bits(cs).map(|c| cells[r * cols + c]);
                let first = it.next();
                it.all(|o| Some(o) == first)
            });
            let col_dictates = bits(cs).all(|c| {
                let mut it = bits(rows).map(|r| cells[r * cols + c]);
                let first = it.next();
                it.all(|o| Some(o) == first)
            });
            if !row_dictates && !col_dictates {
                return FastClass::NotSimple;
            }
            common &= u8::from(row_dictates) | (u8::from(col_dictates) << 1);
        }
    }
    if common == 0 {
        FastClass::Type2
    } else {
        FastClass::Type1
    }
}

fn bits(mask: u16) -> impl Iterator<Item = usize> {
    (0..16).filter(move |i| mask & (1 << i) != 0)
}

/// Classifies one grid directly (used to cross-check the tabulated search).
#[cfg(test)]
pub(crate) fn classify_grid(grid: &Grid, ranks: &[Vec<Vec<u8>>; 2]) -> FastClass {
    let row_codes: Vec<Vec<u8>> =
        (0..grid.rows).map(|r| grid.cells[r * grid.cols..(r + 1) * grid.cols].to_vec()).collect();
    let col_codes: Vec<Vec<u8>> = (0..grid.cols).map(|c| (0..grid.rows).map(|r| grid.at(r, c)).collect()).collect();
    let masks = |lines: &[Vec<u8>], ranks: &[Vec<u8>]| -> Vec<u16> {
        ranks
            .iter()
            .map(|rank| {
                let refs: Vec<Vec<usize>> = lines.iter().map(|l| l.iter().map(|&x| x as usize).collect()).collect();
                let rows: Vec<&[usize]> = refs.iter().map(Vec::as_slice).collect();
                let rank: Vec<usize> = rank.iter().map(|&x| x as usize).collect();
                crate::dominance::ud_of_rows(&rows, &rank).into_iter().fold(0u16, |m, i| m | (1 << i))
            })
            .collect()
    };
    classify_masks(&grid.cells, grid.cols, &masks(&row_codes, &ranks[0]), &masks(&col_codes, &ranks[1]))
}

struct Chunk {
    rows: usize,
    cols: usize,
    first: usize,
    size: u64,
}

impl Space {
    fn chunks(&self) -> Vec<Chunk> {
        let mut out = Vec::new();
        for rows in 1..=self.max_rows {
            for cols in 1..=self.max_cols {
                let n = self.alphabet.pow(cols as u32);
                let firsts = if self.opt_out.is_some() { 1 } else { n };
                for first in 0..firsts {
                    let first = match self.opt_out {
                        // the opt-out row is all one symbol; put it first
                        Some(o) => (0..cols).fold(0, |acc, _| acc * self.alphabet + o as usize),
                        None => first,
                    };
                    let size = if self.opt_out.is_some() {
                        binomial(n - 1, rows - 1)
                    } else {
                        binomial(n - first - 1, rows - 1)
                    };
                    if size > 0 {
                        out.push(Chunk { rows, cols, first, size });
                    }
                }
            }
        }
        out
    }

    /// Runs the search from chunk `resume`, stopping once `budget` candidates were examined.
    pub fn run(&self, keep: &(dyn Fn(FastClass) -> bool + Sync), budget: u64, resume: u64) -> Run {
        let chunks = self.chunks();
        let start = (resume as usize).min(chunks.len());
        let mut end = start;
        let mut planned = 0u64;
        while end < chunks.len() && (end == start || planned + chunks[end].size <= budget) {
            planned += chunks[end].size;
            end += 1;
        }
        let row_tables: Vec<DominanceTable> =
            (0..=self.max_cols).map(|len| DominanceTable::new(self.alphabet, len, &self.ranks[0])).collect();
        let col_tables: Vec<DominanceTable> =
            (0..=self.max_rows).map(|len| DominanceTable::new(self.alphabet, len, &self.ranks[1])).collect();
        let found: Vec<Vec<(Grid, FastClass)>> = chunks[start..end]
            .par_iter()
            .map(|chunk| self.run_chunk(chunk, &row_tables[chunk.cols], &col_tables[chunk.rows], keep))
            .collect();
        Run {
            matches: found.into_iter().flatten().collect(),
            examined: planned,
            resume: (end < chunks.len()).then_some(end as u64),
        }
    }

    fn run_chunk(
        &self,
        chunk: &Chunk,
        rows_t: &DominanceTable,
        cols_t: &DominanceTable,
        keep: &(dyn Fn(FastClass) -> bool + Sync),
    ) -> Vec<(Grid, FastClass)> {
        let (r, c) = (chunk.rows, chunk.cols);
        let n = rows_t.n;
        let digits: Vec<Vec<u8>> = (0..n).map(|code| decode(code, self.alphabet, c)).collect();
        let pool: Vec<usize> = match self.opt_out {
            Some(_) => (0..n).filter(|&x| x != chunk.first).collect(),
            None => (chunk.first + 1..n).collect(),
        };
        let k = r - 1;
        let mut out = Vec::new();
        let mut idx: Vec<usize> = (0..k).collect();
        let mut codes = vec![0usize; r];
        let mut cells = vec![0u8; r * c];
        let mut col_codes = vec![0usize; c];
        let (mut ud0, mut ud1) = (Vec::new(), Vec::new());
        let all_rows = (1u16 << r) - 1;
        let all_cols = (1u16 << c) - 1;
        loop {
            codes[0] = chunk.first;
            for (slot, &i) in codes[1..].iter_mut().zip(&idx) {
                *slot = pool[i];
            }
            for (row, &code) in codes.iter().enumerate() {
                cells[row * c..(row + 1) * c].copy_from_slice(&digits[code]);
            }
            for (col, slot) in col_codes.iter_mut().enumerate() {
                *slot = (0..r).fold(0, |acc, row| acc * self.alphabet + cells[row * c + col] as usize);
            }
            let distinct_cols = (1..c).all(|j| !col_codes[..j].contains(&col_codes[j]));
            let opt_out_col = match self.opt_out {
                Some(o) => (0..c).any(|col| (0..r).all(|row| cells[row * c + col] == o)),
                None => true,
            };
            if distinct_cols && opt_out_col {
                rows_t.ud_masks(&codes, &mut ud0);
                cols_t.ud_masks(&col_codes, &mut ud1);
                let ever = !self.ever_undominated
                    || (ud0.iter().fold(0, |m, x| m | x) == all_rows && ud1.iter().fold(0, |m, x| m | x) == all_cols);
                if ever {
                    let class = classify_masks(&cells, c, &ud0, &ud1);
                    if keep(class) {
                        out.push((Grid { rows: r, cols: c, cells: cells.clone() }, class));
                    }
                }
            }
            // next combination of k indices from pool
            let mut i = k;
            loop {
                if i == 0 {
                    return out;
                }
                i -= 1;
                if idx[i] < pool.len() - k + i {
                    idx[i] += 1;
                    for j in i + 1..k {
                        idx[j] = idx[j - 1] + 1;
                    }
                    break;
                }
            }
        }
    }
}
