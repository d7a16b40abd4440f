//! Exact tiling of a region by fixed-orientation polyominoes.

use alloc::vec;
use alloc::vec::Vec;

use crate::grid::Polyshape;
use crate::region::CellCoord;

/// True iff translated copies of `shapes` cover `region` exactly, without
/// overlap. Rotation and mirroring are not allowed.
pub fn fit_polyominoes(region: &[CellCoord], shapes: &[&Polyshape]) -> bool {
    if shapes.is_empty() {
        return region.is_empty();
    }
    let area: usize = shapes.iter().map(|s| s.area()).sum();
    let mut cells: Vec<CellCoord> = region.to_vec();
    cells.sort_by_key(|c| (c.j, c.i));
    cells.dedup();
    if area != cells.len() {
        return false;
    }

    let min_i = cells.iter().map(|c| c.i).min().unwrap_or(0);
    let min_j = cells.iter().map(|c| c.j).min().unwrap_or(0);
    let width = cells.iter().map(|c| c.i - min_i + 1).max().unwrap_or(0);
    let height = cells.iter().map(|c| c.j - min_j + 1).max().unwrap_or(0);
    let mut free = vec![false; width * height];
    for c in &cells {
        free[(c.j - min_j) * width + (c.i - min_i)] = true;
    }

    // Identical shapes are interchangeable; grouping them avoids permuting equal pieces.
    let mut kinds: Vec<(&Polyshape, usize)> = Vec::new();
    for shape in shapes {
        match kinds.iter_mut().find(|(k, _)| *k == *shape) {
            Some((_, n)) => *n += 1,
            None => kinds.push((shape, 1)),
        }
    }
    kinds.sort_by_key(|(k, _)| core::cmp::Reverse(k.area()));

    let mut tiler = Tiler { width, height, free };
    tiler.solve(&mut kinds, 0)
}

struct Tiler {
    width: usize,
    height: usize,
    free: Vec<bool>,
}

impl Tiler {
    fn solve(&mut self, kinds: &mut [(&Polyshape, usize)], from: usize) -> bool {
        // The first free cell in row-major order must be the first cell of
        // whichever piece covers it.
        let Some(target) = (from..self.free.len()).find(|&i| self.free[i]) else {
            return kinds.iter().all(|(_, n)| *n == 0);
        };
        let (tx, ty) = (target % self.width, target / self.width);
        for k in 0..kinds.len() {
            if kinds[k].1 == 0 {
                continue;
            }
            let shape = kinds[k].0;
            let (ax, ay) = shape.cells()[0];
            let Some(ox) = tx.checked_sub(ax) else { continue };
            let Some(oy) = ty.checked_sub(ay) else { continue };
            if ox + shape.width() > self.width || oy + shape.height() > self.height {
                continue;
            }
            let fits = shape
                .cells()
                .iter()
                .all(|&(cx, cy)| self.free[(oy + cy) * self.width + ox + cx]);
            if !fits {
                continue;
            }
            self.set(shape, ox, oy, false);
            kinds[k].1 -= 1;
            if self.solve(kinds, target + 1) {
                return true;
            }
            kinds[k].1 += 1;
            self.set(shape, ox, oy, true);
        }
        false
    }

    fn set(&mut self, shape: &Polyshape, ox: usize, oy: usize, value: bool) {
        for &(cx, cy) in shape.cells() {
            self.free[(oy + cy) * self.width + ox + cx] = value;
        }
    }
}
