//! Entry bounds on `A⁻¹` under uniform weights `a ≡ ρ`, `ε ≡ δ ≡ ζ`.
//!
//! Then `A = ρI + ζY` where `Y` counts shared types and schools between cells.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::audit::{audit_assumptions, Assumption};
use crate::error::{Error, Result};
use crate::instance::PenalizedInstance;
use crate::linalg::Matrix;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EntryBounds {
    pub rho: f64,
    pub zeta: f64,
    /// Lower bound on the entries of `A⁻¹`.
    pub c1: f64,
    /// Upper bound on the entries of `A⁻¹`.
    pub c2: f64,
    /// `max{|C₁|, C₂} · max_ij |b_ij|`.
    pub c_tilde: f64,
    /// `NL · C̃`, the bound on every plan entry.
    pub plan_bound: f64,
}

/// Result of comparing a concrete inverse against [`EntryBounds`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundContainment {
    pub min_entry: f64,
    pub max_entry: f64,
    pub lower_holds: bool,
    pub upper_holds: bool,
}

impl EntryBounds {
    pub fn containment(&self, inverse: &Matrix) -> BoundContainment {
        let (min_entry, max_entry) = (inverse.min(), inverse.max());
        BoundContainment {
            min_entry,
            max_entry,
            lower_holds: self.c1 <= min_entry,
            upper_holds: max_entry <= self.c2,
        }
    }
}

/// `C₁(N, L, ζ, ρ)` as a rational expression.
pub fn c1(n: usize, l: usize, zeta: f64, rho: f64) -> f64 {
    let nl = (n * l) as f64;
    let (z, r) = (zeta, rho);
    let num = z
        * (4.0 * z * libm::pow(nl, 3.0) * (2.0 * libm::pow(z, 3.0) - 2.0 * z * r * r - libm::pow(r, 3.0))
            + 8.0 * nl * nl * r * r * (r * r - z * z)
            + z * nl * r * r * (2.0 * z + r)
            - 2.0 * libm::pow(r, 4.0));
    let den = libm::pow(r, 4.0) * (z * z * nl - r * r) * (2.0 * nl - 1.0) * (2.0 * nl + 1.0);
    num / den
}

/// `C₂(N, L, ζ, ρ)` as a rational expression.
pub fn c2(n: usize, l: usize, zeta: f64, rho: f64) -> f64 {
    let nl = (n * l) as f64;
    let (z, r) = (zeta, rho);
    z * z * nl * r * (4.0 * nl - 1.0) / ((r * r - z * z * nl) * (r - 2.0 * nl * z) * (r + 2.0 * nl * z))
}

pub fn entry_bounds(inst: &PenalizedInstance) -> Result<EntryBounds> {
    inst.validate_with_cap(usize::MAX)?;
    let audit = audit_assumptions(inst);
    let (rho, zeta) = match (audit.a8_uniform_weights.holds, audit.rho_zeta) {
        (true, Some(rz)) => rz,
        _ => {
            return Err(Error::Gate {
                assumption: Assumption::UniformWeights,
                detail: audit.a8_uniform_weights.detail,
            })
        }
    };
    let (n, l) = inst.shape();
    let (c1, c2) = (c1(n, l, zeta, rho), c2(n, l, zeta, rho));
    let max_b = inst.rhs().iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let c_tilde = c1.abs().max(c2) * max_b;
    Ok(EntryBounds {
        rho,
        zeta,
        c1,
        c2,
        c_tilde,
        plan_bound: (n * l) as f64 * c_tilde,
    })
}

/// Square matrix of exact integers.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IntMatrix {
    pub size: usize,
    pub data: Vec<u128>,
}

impl IntMatrix {
    pub fn get(&self, r: usize, c: usize) -> u128 {
        self.data[r * self.size + c]
    }

    pub fn matmul(&self, rhs: &IntMatrix) -> IntMatrix {
        let s = self.size;
        let mut data = vec![0u128; s * s];
        for i in 0..s {
            for k in 0..s {
                let a = self.data[i * s + k];
                if a == 0 {
                    continue;
                }
                for j in 0..s {
                    data[i * s + j] += a * rhs.data[k * s + j];
                }
            }
        }
        IntMatrix { size: s, data }
    }

    pub fn to_matrix(&self) -> Matrix {
        Matrix::from_fn(self.size, self.size, |r, c| self.get(r, c) as f64)
    }

    pub fn max(&self) -> u128 {
        self.data.iter().copied().max().unwrap_or(0)
    }

    pub fn min(&self) -> u128 {
        self.data.iter().copied().min().unwrap_or(0)
    }
}

/// `Y` in row-major cell order: 2 on the diagonal, 1 for distinct cells sharing
/// a type (same block of `L`) or a school (same index mod `L`), 0 otherwise.
pub fn build_y(n_types: usize, n_schools: usize) -> IntMatrix {
    let l = n_schools;
    let size = n_types * n_schools;
    let mut data = vec![0u128; size * size];
    for p in 0..size {
        for q in 0..size {
            data[p * size + q] = if p == q {
                2
            } else if p / l == q / l || p % l == q % l {
                1
            } else {
                0
            };
        }
    }
    IntMatrix { size, data }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct YLemmaCheck {
    pub k: u32,
    pub max_entry: u128,
    pub min_entry: u128,
    /// `max (Yᵏ) ≤ (2NL)ᵏ / NL`.
    pub max_holds: bool,
    /// `min (Yᵏ) ≥ (NL)^⌊k/2⌋ / NL`, stated for `k ≥ 2`.
    pub min_holds: Option<bool>,
}

/// Checks both power bounds on `Yᵏ`, `k = 1..=k_max`, in exact integer arithmetic.
pub fn y_lemma_check(n_types: usize, n_schools: usize, k_max: u32) -> Vec<YLemmaCheck> {
    let y = build_y(n_types, n_schools);
    let nl = (n_types * n_schools) as u128;
    let mut pow = y.clone();
    let mut out = Vec::with_capacity(k_max as usize);
    for k in 1..=k_max {
        if k > 1 {
            pow = pow.matmul(&y);
        }
        let (max_entry, min_entry) = (pow.max(), pow.min());
        out.push(YLemmaCheck {
            k,
            max_entry,
            min_entry,
            max_holds: max_entry * nl <= (2 * nl).pow(k),
            min_holds: (k >= 2).then(|| min_entry * nl >= nl.pow(k / 2)),
        });
    }
    out
}

/// Human-readable summary of a failed containment, used by reports.
pub fn describe_containment(b: &EntryBounds, c: &BoundContainment) -> alloc::string::String {
    format!(
        "C1 = {} <= min {}: {}; max {} <= C2 = {}: {}",
        b.c1, c.min_entry, c.lower_holds, c.max_entry, b.c2, c.upper_holds
    )
}
