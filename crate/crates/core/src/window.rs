//! Max-USFLUX window selection over a summed-area table of `|flux|`.
//!
//! The table carries an implicit zero top row and left column so every window
//! sum is four lookups. Search is exhaustive at stride 1; ties go to the
//! first candidate in raster-scan order.

use crate::exec::Exec;
use crate::raster::FluxRaster;
use crate::{Error, Result};

/// Inclusive prefix sums of absolute flux, accumulated in `f64`.
#[derive(Debug, Clone, PartialEq)]
pub struct SummedAreaTable {
    height: usize,
    width: usize,
    // (height + 1) x (width + 1), first row and column zero.
    table: Vec<f64>,
}

impl SummedAreaTable {
    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    /// Sum of `|flux|` over rows `0..=row` and columns `0..=col`.
    #[inline]
    pub fn cumulative(&self, row: usize, col: usize) -> f64 {
        self.at(row + 1, col + 1)
    }

    #[inline]
    fn at(&self, r: usize, c: usize) -> f64 {
        self.table[r * (self.width + 1) + c]
    }

    pub fn total(&self) -> f64 {
        self.at(self.height, self.width)
    }

    /// Sum over the `side`x`side` window whose top-left corner is (`top`, `left`).
    pub fn window_sum(&self, top: usize, left: usize, side: usize) -> Result<f64> {
        if side == 0 || top + side > self.height || left + side > self.width {
            return Err(Error::OutOfBounds {
                top,
                left,
                side,
                height: self.height,
                width: self.width,
            });
        }
        Ok(self.window_sum_unchecked(top, left, side))
    }

    #[inline]
    fn window_sum_unchecked(&self, top: usize, left: usize, side: usize) -> f64 {
        let (b, r) = (top + side, left + side);
        self.at(b, r) - self.at(top, r) - self.at(b, left) + self.at(top, left)
    }
}

pub fn build_unsigned_sat(raster: &FluxRaster) -> SummedAreaTable {
    let (h, w) = (raster.height(), raster.width());
    let stride = w + 1;
    let mut table = vec![0.0f64; (h + 1) * stride];
    for r in 0..h {
        let mut row_sum = 0.0;
        let src = raster.row(r);
        for c in 0..w {
            row_sum += src[c].abs();
            table[(r + 1) * stride + c + 1] = table[r * stride + c + 1] + row_sum;
        }
    }
    SummedAreaTable {
        height: h,
        width: w,
        table,
    }
}

pub fn window_sum(sat: &SummedAreaTable, top: usize, left: usize, side: usize) -> Result<f64> {
    sat.window_sum(top, left, side)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WindowSelection {
    pub top: usize,
    pub left: usize,
    pub side: usize,
    /// Sum of absolute flux inside the window.
    pub usflux: f64,
}

pub fn select_max_usflux_window(raster: &FluxRaster, side: usize) -> Result<WindowSelection> {
    select_max_usflux_window_with(raster, side, Exec::Sequential)
}

/// Like [`select_max_usflux_window`], with candidate rows scanned under `exec`.
/// The result is identical for every execution policy.
pub fn select_max_usflux_window_with(
    raster: &FluxRaster,
    side: usize,
    exec: Exec,
) -> Result<WindowSelection> {
    if side == 0 || raster.height() < side || raster.width() < side {
        return Err(Error::WindowTooSmall {
            height: raster.height(),
            width: raster.width(),
            side,
        });
    }
    let sat = build_unsigned_sat(raster);
    let rows = raster.height() - side + 1;
    let cols = raster.width() - side + 1;

    let best_per_row = exec.map_range(rows, |top| {
        let mut best = (0usize, sat.window_sum_unchecked(top, 0, side));
        for left in 1..cols {
            let s = sat.window_sum_unchecked(top, left, side);
            if s > best.1 {
                best = (left, s);
            }
        }
        best
    });

    let mut sel = WindowSelection {
        top: 0,
        left: best_per_row[0].0,
        side,
        usflux: best_per_row[0].1,
    };
    for (top, &(left, s)) in best_per_row.iter().enumerate().skip(1) {
        if s > sel.usflux {
            sel = WindowSelection {
                top,
                left,
                side,
                usflux: s,
            };
        }
    }
    // Cancellation in the four-corner difference can leave a tiny negative residue.
    sel.usflux = sel.usflux.max(0.0);
    Ok(sel)
}
