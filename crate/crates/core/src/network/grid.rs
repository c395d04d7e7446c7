//! Uniform cell index over points in open space (d <= 3).

use std::collections::HashMap;

type Cell = [i64; 3];

pub(crate) struct CellGrid {
    cell: f64,
    dimension: usize,
    cells: HashMap<Cell, Vec<usize>>,
}

impl CellGrid {
    pub fn new<'a>(positions: impl Iterator<Item = (usize, &'a [f64])>, dimension: usize, cell: f64) -> Self {
        assert!(dimension <= 3 && cell > 0.0);
        let mut cells: HashMap<Cell, Vec<usize>> = HashMap::new();
        for (i, x) in positions {
            cells.entry(Self::key(x, cell)).or_default().push(i);
        }
        CellGrid { cell, dimension, cells }
    }

    fn key(x: &[f64], cell: f64) -> Cell {
        let mut k = [0i64; 3];
        for (slot, v) in k.iter_mut().zip(x) {
            *slot = (v / cell).floor() as i64;
        }
        k
    }

    /// Calls `f` for every indexed point in the 3^d cells around `x`,
    /// cell by cell in a fixed order.
    pub fn for_each_candidate(&self, x: &[f64], mut f: impl FnMut(usize)) {
        let base = Self::key(x, self.cell);
        let span = |axis: usize| if axis < self.dimension { -1..=1 } else { 0..=0 };
        for dx in span(0) {
            for dy in span(1) {
                for dz in span(2) {
                    let key = [base[0] + dx, base[1] + dy, base[2] + dz];
                    if let Some(list) = self.cells.get(&key) {
                        list.iter().copied().for_each(&mut f);
                    }
                }
            }
        }
    }
}
