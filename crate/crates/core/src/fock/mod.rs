//! Photon-number statistics of the two-detector state.

mod density;
mod moments;
mod pnd;
mod quadrature;

use serde::{Deserialize, Serialize};

use crate::error::{QgsError, Result};
use crate::specfun::binomial;

pub use density::{
    phase_coefficients, rho_element, DensityMatrix, Element, ESCALATION_DIGITS, MAX_EXACT_ORDER, MIN_DIGITS,
};
pub use moments::{
    coeffs, moment_integral_closed, moment_integral_closed_with_error, CoeffSet, Component, Entry, MomentTable,
};
pub use pnd::{
    classical_g2, classical_g2_isserlis, classical_g2_with, joint_pnd, joint_pnd_for_pairs, joint_pnd_truncated,
    joint_pnd_with, single_mode_pnd, suggested_n_max, wavepacket_g2, wavepacket_g2_certified,
    wavepacket_g2_with_floor, JointPND, PndOptions, DEFAULT_MARGINAL_FLOOR, DEFAULT_TAIL_TOLERANCE, MAX_N_MAX,
};
pub use quadrature::{rho_element_quadrature, rho_elements_quadrature, MAX_QUADRATURE_ORDER};

/// Default bound on `N + M + K + L`.
pub const MAX_ORDER: usize = 64;

/// Index of the element `⟨N, M| ρ |K, L⟩`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FockIndex {
    pub n: usize,
    pub m: usize,
    pub k: usize,
    pub l: usize,
}

impl FockIndex {
    pub fn new(n: usize, m: usize, k: usize, l: usize) -> Result<Self> {
        Self::with_max_order(n, m, k, l, MAX_ORDER)
    }

    pub fn with_max_order(n: usize, m: usize, k: usize, l: usize, max_order: usize) -> Result<Self> {
        let idx = Self { n, m, k, l };
        if idx.order() > max_order {
            return Err(QgsError::Domain(format!(
                "index {idx:?} has order {} above the limit {max_order}",
                idx.order()
            )));
        }
        Ok(idx)
    }

    pub fn diagonal(n: usize, m: usize) -> Result<Self> {
        Self::new(n, m, n, m)
    }

    pub fn order(&self) -> usize {
        self.n + self.m + self.k + self.l
    }

    /// Index of the conjugate element `⟨K, L| ρ |N, M⟩`.
    pub fn adjoint(&self) -> Self {
        Self {
            n: self.k,
            m: self.l,
            k: self.n,
            l: self.m,
        }
    }
}

/// Checks `Σₖ (-1)ᵏ C(n, k) = 0ⁿ` in exact arithmetic for every
/// `n <= n_max`.
pub fn vacuum_identity_check(n_max: usize) -> bool {
    (0..=n_max).all(|n| {
        let mut sum: i128 = 0;
        for k in 0..=n {
            let Ok(c) = binomial(n, k) else {
                return false;
            };
            let Ok(c) = i128::try_from(c) else {
                return false;
            };
            sum += if k % 2 == 0 { c } else { -c };
        }
        sum == i128::from(n == 0)
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fock_index_limits() {
        assert!(FockIndex::new(16, 16, 16, 16).is_ok());
        assert!(FockIndex::new(16, 16, 16, 17).is_err());
        assert!(FockIndex::with_max_order(3, 3, 3, 3, 10).is_err());
        let idx = FockIndex::new(1, 2, 3, 4).unwrap();
        assert_eq!(idx.adjoint(), FockIndex::new(3, 4, 1, 2).unwrap());
    }

    #[test]
    fn vacuum_identity() {
        assert!(vacuum_identity_check(0));
        assert!(vacuum_identity_check(1));
        assert!(vacuum_identity_check(16));
        assert!(vacuum_identity_check(64));
        assert!(!vacuum_identity_check(129));
    }
}
