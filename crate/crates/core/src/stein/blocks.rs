use std::ops::Range;

use serde::Serialize;

use crate::error::{domain, Result};

/// An ordered partition of `{1, …, d}` into contiguous blocks.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct BlockSystem {
    d: usize,
    cardinalities: Vec<usize>,
    offsets: Vec<usize>,
}

impl BlockSystem {
    pub fn new(cardinalities: Vec<usize>) -> Result<Self> {
        if cardinalities.is_empty() || cardinalities.contains(&0) {
            return domain("block cardinalities must be a nonempty list of positive sizes");
        }
        let mut offsets = Vec::with_capacity(cardinalities.len());
        let mut acc = 0;
        for &b in &cardinalities {
            offsets.push(acc);
            acc += b;
        }
        Ok(Self {
            d: acc,
            cardinalities,
            offsets,
        })
    }

    /// The whole of `{1, …, d}` as one block.
    pub fn single(d: usize) -> Result<Self> {
        Self::new(vec![d])
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn len(&self) -> usize {
        self.cardinalities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cardinalities.is_empty()
    }

    pub fn cardinalities(&self) -> &[usize] {
        &self.cardinalities
    }

    pub fn offsets(&self) -> &[usize] {
        &self.offsets
    }

    /// Zero-based coordinate ranges of the blocks, in order.
    pub fn ranges(&self) -> impl Iterator<Item = Range<usize>> + '_ {
        self.offsets
            .iter()
            .zip(&self.cardinalities)
            .map(|(&o, &b)| o..o + b)
    }

    /// `max b_{j+1}/b_j` over consecutive blocks, leaving out the final
    /// remainder block. `None` when fewer than three blocks exist.
    pub fn max_growth_ratio(&self) -> Option<f64> {
        let n = self.cardinalities.len();
        if n < 3 {
            return None;
        }
        self.cardinalities[..n - 1]
            .windows(2)
            .map(|w| w[1] as f64 / w[0] as f64)
            .max_by(f64::total_cmp)
    }
}

/// `⌊1/ε²⌋`, robust to the representation error of decimal `ε` such as 0.05.
pub fn dimension_for(eps: f64) -> usize {
    let x = 1.0 / (eps * eps);
    let r = x.round();
    if (x - r).abs() <= 1e-9 * r.max(1.0) {
        r as usize
    } else {
        x.floor() as usize
    }
}

/// `ρ_ε = 1 / log(1/ε)`.
pub fn wgb_rho(eps: f64) -> Result<f64> {
    if !(eps > 0.0 && eps < 1.0) {
        return domain(format!("weakly geometric blocks need 0 < eps < 1, got {eps}"));
    }
    Ok(1.0 / (1.0 / eps).ln())
}

/// Weakly geometric block system on `{1, …, ⌊1/ε²⌋}`.
pub fn wgb_blocks(eps: f64) -> Result<BlockSystem> {
    wgb_rho(eps)?;
    wgb_blocks_with_dim(eps, dimension_for(eps))
}

/// Weakly geometric blocks with growth rate `ρ_ε` on an explicit dimension `d`.
///
/// `b_1 = ⌈1/ρ⌉`, `b_j = ⌊b_1 (1+ρ)^{j-1}⌋` until the running total reaches
/// `d`; the final block takes the remainder.
pub fn wgb_blocks_with_dim(eps: f64, d: usize) -> Result<BlockSystem> {
    let rho = wgb_rho(eps)?;
    if d == 0 {
        return domain("dimension must be positive");
    }
    let first = (1.0 / rho).ceil() as usize;
    let mut cards = Vec::new();
    let mut total = 0usize;
    let mut j = 0i32;
    loop {
        let b = if j == 0 {
            first
        } else {
            (first as f64 * (1.0 + rho).powi(j)).floor() as usize
        };
        if total + b >= d {
            cards.push(d - total);
            break;
        }
        cards.push(b);
        total += b;
        j += 1;
    }
    BlockSystem::new(cards)
}
