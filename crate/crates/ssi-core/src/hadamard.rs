//! Sylvester-ordered Hadamard matrices and the fast Walsh-Hadamard
//! transform used by the reconstruction path.

use crate::error::{Error, Result};

/// Square +-1 matrix with `H * H^T = order * I`.
#[derive(Debug, Clone)]
pub struct HadamardMatrix {
    order: usize,
    /// Row-major entries, each exactly +1 or -1.
    entries: Vec<i8>,
}

impl HadamardMatrix {
    pub fn order(&self) -> usize {
        self.order
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> i8 {
        self.entries[row * self.order + col]
    }

    pub fn row(&self, row: usize) -> &[i8] {
        &self.entries[row * self.order..(row + 1) * self.order]
    }
}

/// Sylvester (natural order) Hadamard matrix of a power-of-two order.
///
/// H(1) = [1], H(2n) = [[H, H], [H, -H]].
pub fn hadamard_matrix(order: usize) -> Result<HadamardMatrix> {
    if order == 0 || !order.is_power_of_two() {
        return Err(Error::InvalidArgument(format!(
            "Hadamard order must be a positive power of two, got {order}"
        )));
    }
    let mut entries = vec![0i8; order * order];
    entries[0] = 1;
    let mut n = 1;
    while n < order {
        // copy the top-left n x n block into the three other quadrants
        for r in 0..n {
            for c in 0..n {
                let v = entries[r * order + c];
                entries[r * order + (c + n)] = v;
                entries[(r + n) * order + c] = v;
                entries[(r + n) * order + (c + n)] = -v;
            }
        }
        n *= 2;
    }
    Ok(HadamardMatrix { order, entries })
}

/// In-place unnormalized fast Walsh-Hadamard transform: replaces `x` with
/// `H(n) * x` for the Sylvester matrix of order `n = x.len()`.
pub fn fwht(x: &mut [f64]) {
    debug_assert!(x.len().is_power_of_two());
    let n = x.len();
    let mut stride = 1;
    while stride < n {
        let mut base = 0;
        while base < n {
            for i in base..base + stride {
                let a = x[i];
                let b = x[i + stride];
                x[i] = a + b;
                x[i + stride] = a - b;
            }
            base += 2 * stride;
        }
        stride *= 2;
    }
}
