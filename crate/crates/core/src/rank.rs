//! Numerical rank from the largest significant gap in a spectrum.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct RankParams {
    /// A ratio between consecutive values must exceed this to count as a gap.
    pub gap_ratio: f64,
    /// The value on the large side of a gap must exceed this floor.
    pub value_floor: f64,
}

impl Default for RankParams {
    fn default() -> Self {
        RankParams {
            gap_ratio: 1e2,
            value_floor: 1e-8,
        }
    }
}

impl RankParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.gap_ratio > 1.0) || !(self.value_floor > 0.0) {
            return Err(Error::invalid(format!(
                "rank parameters need gap_ratio > 1 and value_floor > 0, got {:?}",
                self
            )));
        }
        Ok(())
    }
}

fn ratio(big: f64, small: f64) -> f64 {
    if small == 0.0 {
        f64::INFINITY
    } else {
        big / small
    }
}

/// Rank from nonincreasing singular values.
///
/// Among the indices `i` with `sigma_i / sigma_{i+1} > R` and `sigma_i > tau`
/// the one with the largest ratio wins (smallest index on ties); with no such
/// index the full length is returned.
pub fn estimate_rank_svd(sigma: &[f64], params: &RankParams) -> Result<usize> {
    if sigma.is_empty() {
        return Err(Error::invalid("empty singular value list"));
    }
    let mut best: Option<(usize, f64)> = None;
    for i in 0..sigma.len() - 1 {
        let rho = ratio(sigma[i], sigma[i + 1]);
        if rho > params.gap_ratio && sigma[i] > params.value_floor {
            match best {
                Some((_, b)) if rho <= b => {}
                _ => best = Some((i, rho)),
            }
        }
    }
    Ok(best.map_or(sigma.len(), |(i, _)| i + 1))
}

/// Rank from the nondecreasing GSVD cosines `c` of the c-block plus the `d`
/// columns of the identity block, which always count.
///
/// Ratios run the other way, `c_{i+1} / c_i`; the large side of the gap is
/// `c_{i+1}`. Ties resolve to the smaller rank.
pub fn estimate_rank_gsvd(c: &[f64], d: usize, params: &RankParams) -> Result<usize> {
    if c.is_empty() {
        if d == 0 {
            return Err(Error::invalid("empty c list with no identity block"));
        }
        return Ok(d);
    }
    let mut best: Option<(usize, f64)> = None;
    for i in 0..c.len() - 1 {
        let rho = ratio(c[i + 1], c[i]);
        if rho > params.gap_ratio && c[i + 1] > params.value_floor {
            match best {
                Some((_, b)) if rho < b => {}
                _ => best = Some((i, rho)),
            }
        }
    }
    let block_rank = best.map_or(c.len(), |(i, _)| c.len() - (i + 1));
    Ok(block_rank + d)
}
