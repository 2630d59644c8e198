use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::subspace::{ChainPropagator, Schedule};

/// Fidelity on a Cartesian grid over two flat schedule entries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LandscapeSlice {
    pub n_sites: usize,
    /// Flat indices (`dB1, dC1, dB2, …`, 0-based) of the varied durations.
    pub vary: (usize, usize),
    pub xs: Vec<f64>,
    pub ys: Vec<f64>,
    /// `values[i][j]` at `(xs[i], ys[j])`.
    pub values: Vec<Vec<f64>>,
}

impl LandscapeSlice {
    pub fn max(&self) -> f64 {
        self.values.iter().flatten().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().flatten().copied().fold(f64::INFINITY, f64::min)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LocalMaximum {
    pub i: usize,
    pub j: usize,
    pub value: f64,
}

pub fn landscape_slice(
    n_sites: usize,
    base: &Schedule,
    vary: (usize, usize),
    xs: &[f64],
    ys: &[f64],
) -> Result<LandscapeSlice> {
    let len = 2 * base.depth();
    let (a, b) = vary;
    if a == b || a >= len || b >= len {
        return Err(Error::InvalidIndex(format!(
            "slice indices ({a}, {b}) must be distinct and below {len}"
        )));
    }
    if xs.iter().chain(ys).any(|v| !(*v >= 0.0) || !v.is_finite()) {
        return Err(Error::InvalidSchedule("slice grid values must be finite and nonnegative".into()));
    }
    let propagator = ChainPropagator::for_sites(n_sites)?;
    let mut flat = base.to_flat();
    let mut values = Vec::with_capacity(xs.len());
    for &x in xs {
        let mut row = Vec::with_capacity(ys.len());
        for &y in ys {
            flat[a] = x;
            flat[b] = y;
            row.push(propagator.fidelity_flat(&flat));
        }
        values.push(row);
    }
    Ok(LandscapeSlice {
        n_sites,
        vary,
        xs: xs.to_vec(),
        ys: ys.to_vec(),
        values,
    })
}

/// Interior grid points strictly above all eight neighbours.
pub fn strict_local_maxima(slice: &LandscapeSlice) -> Vec<LocalMaximum> {
    let v = &slice.values;
    let rows = v.len();
    let cols = v.first().map_or(0, Vec::len);
    let mut out = Vec::new();
    for i in 1..rows.saturating_sub(1) {
        for j in 1..cols.saturating_sub(1) {
            let c = v[i][j];
            let is_max = (i - 1..=i + 1)
                .flat_map(|ii| (j - 1..=j + 1).map(move |jj| (ii, jj)))
                .filter(|&(ii, jj)| (ii, jj) != (i, j))
                .all(|(ii, jj)| v[ii][jj] < c);
            if is_max {
                out.push(LocalMaximum { i, j, value: c });
            }
        }
    }
    out
}
