//! Quantum conditional states and the star product.
//!
//! A channel from region A to region B corresponds to an acausal conditional
//! state through the Choi isomorphism with the normalized maximally entangled
//! vector, and to a causal conditional state through the partial transpose of
//! that on A. Star-multiplying a prior on A with either conditional recovers
//! the joint operators used by the space-like and time-like observers.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frames::{bipartite_state, lifted_operator};
use crate::linalg::{approx_eq, kron, partial_transpose, psd_sqrt, BipartiteDims, ComplexMatrix, Subsystem};
use crate::objects::{validate_state, DensityMatrix, KrausChannel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConditionalKind {
    /// Choi form; describes space-like separated regions.
    Acausal,
    /// Jamiolkowski form; describes causally related regions.
    Causal,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConditionalState {
    dims: BipartiteDims,
    mat: ComplexMatrix,
    kind: ConditionalKind,
}

impl ConditionalState {
    pub fn dims(&self) -> BipartiteDims {
        self.dims
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.mat
    }

    pub fn kind(&self) -> ConditionalKind {
        self.kind
    }
}

/// `(I (x) T)(|Phi+><Phi+|)` with `|Phi+> = sum_i |i>|i> / sqrt(d_A)`.
///
/// Assembled block by block as `(1/d_A) sum_ij |i><j| (x) T(|i><j|)`.
pub fn acausal_conditional(channel: &KrausChannel) -> Result<ConditionalState> {
    let dims = BipartiteDims::new(channel.dim_in(), channel.dim_out())?;
    let (da, db) = (dims.d1(), dims.d2());
    let mut mat = ComplexMatrix::zeros(dims.total(), dims.total());
    for i in 0..da {
        for j in 0..da {
            let unit = ComplexMatrix::unit(da, i, j);
            let mut image = ComplexMatrix::zeros(db, db);
            for k in channel.kraus() {
                image = image.add(&k.matmul(&unit)?.matmul(&k.dagger())?)?;
            }
            for r in 0..db {
                for c in 0..db {
                    mat[(dims.flat(i, r), dims.flat(j, c))] = image[(r, c)] / da as f64;
                }
            }
        }
    }
    Ok(ConditionalState {
        dims,
        mat,
        kind: ConditionalKind::Acausal,
    })
}

/// Partial transpose on A of [`acausal_conditional`].
pub fn causal_conditional(channel: &KrausChannel) -> Result<ConditionalState> {
    let acausal = acausal_conditional(channel)?;
    Ok(ConditionalState {
        dims: acausal.dims,
        mat: partial_transpose(&acausal.mat, acausal.dims, Subsystem::First)?,
        kind: ConditionalKind::Causal,
    })
}

/// `prior * cond = d_A (sqrt(prior) (x) I_B) cond (sqrt(prior) (x) I_B)`.
///
/// The prior must be a full-rank density matrix on A.
pub fn star_product(prior: &ComplexMatrix, cond: &ConditionalState) -> Result<ComplexMatrix> {
    star_product_scaled(prior, cond, cond.dims.d1() as f64)
}

pub(crate) fn star_product_scaled(prior: &ComplexMatrix, cond: &ConditionalState, factor: f64) -> Result<ComplexMatrix> {
    let da = cond.dims.d1();
    if prior.shape() != (da, da) {
        return Err(Error::dim(format!(
            "prior is {}x{} but region A has dimension {da}",
            prior.rows(),
            prior.cols()
        )));
    }
    let prior = validate_state(prior.clone()).map_err(|e| e.at("prior"))?;
    prior.require_full_rank("the star product").map_err(|e| e.at("prior"))?;
    let side = kron(&psd_sqrt(prior.matrix())?, &ComplexMatrix::identity(cond.dims.d2()));
    Ok(side.matmul(&cond.mat)?.matmul(&side)?.scale_real(factor))
}

/// Both star-product identities for one state and channel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StarReport {
    /// `rho^T * rho^s` against `tau_12`.
    pub acausal_deviation: f64,
    /// `rho * rho^t` against `T_rho`.
    pub causal_deviation: f64,
    pub tol: f64,
    pub passed: bool,
}

/// Check `rho^T * rho^s_{A|B} = tau_12` and `rho * rho^t_{A|B} = T_rho`.
pub fn verify_star_equalities(rho: &DensityMatrix, channel: &KrausChannel, tol: f64) -> Result<StarReport> {
    let lifted = lifted_operator(rho, channel)?;
    let tau = bipartite_state(&lifted)?;
    let acausal = approx_eq(
        &star_product(&rho.matrix().transpose(), &acausal_conditional(channel)?)?,
        tau.matrix(),
        tol,
    )?;
    let causal = approx_eq(
        &star_product(rho.matrix(), &causal_conditional(channel)?)?,
        lifted.matrix(),
        tol,
    )?;
    Ok(StarReport {
        acausal_deviation: acausal.max_deviation,
        causal_deviation: causal.max_deviation,
        tol,
        passed: acausal.equal && causal.equal,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::test_support::{c, swap};
    use crate::linalg::{partial_trace, ONE, ZERO};
    use crate::random::{random_channel, random_state};

    fn phi_plus(d: usize) -> ComplexMatrix {
        let mut v = vec![ZERO; d * d];
        for i in 0..d {
            v[i * d + i] = c(1.0 / (d as f64).sqrt(), 0.0);
        }
        ComplexMatrix::outer(&v, &v)
    }

    fn close(a: &ComplexMatrix, b: &ComplexMatrix, tol: f64) -> bool {
        approx_eq(a, b, tol).unwrap().equal
    }

    #[test]
    fn acausal_examples() {
        let id = acausal_conditional(&KrausChannel::identity(2)).unwrap();
        assert_eq!(id.kind(), ConditionalKind::Acausal);
        assert!(close(id.matrix(), &phi_plus(2), 1e-15));
        let dep = acausal_conditional(&KrausChannel::completely_depolarizing(2)).unwrap();
        assert!(close(dep.matrix(), &ComplexMatrix::identity(4).scale_real(0.25), 1e-15));
    }

    #[test]
    fn acausal_is_a_state_with_maximally_mixed_marginal() {
        for seed in 0..300 {
            let (da, db) = (2 + seed as usize % 3, 2 + (seed as usize / 3) % 3);
            let k = 1 + seed as usize % 4;
            if k * db < da {
                continue;
            }
            let ch = random_channel(da, db, k, seed).unwrap();
            let s = acausal_conditional(&ch).unwrap();
            let state = validate_state(s.matrix().clone()).unwrap();
            assert!((state.matrix().trace().unwrap() - ONE).norm() < 1e-12);
            let reduced = partial_trace(s.matrix(), s.dims(), Subsystem::Second).unwrap();
            assert!(close(&reduced, &ComplexMatrix::identity(da).scale_real(1.0 / da as f64), 1e-12));
        }
    }

    #[test]
    fn causal_examples() {
        let id = causal_conditional(&KrausChannel::identity(2)).unwrap();
        assert_eq!(id.kind(), ConditionalKind::Causal);
        assert!(close(id.matrix(), &swap(2).scale_real(0.5), 1e-15));
        let dep = causal_conditional(&KrausChannel::completely_depolarizing(3)).unwrap();
        assert!(close(dep.matrix(), &ComplexMatrix::identity(9).scale_real(1.0 / 9.0), 1e-15));

        let ch = random_channel(3, 2, 2, 8).unwrap();
        let causal = causal_conditional(&ch).unwrap();
        let back = partial_transpose(causal.matrix(), causal.dims(), Subsystem::First).unwrap();
        assert_eq!(back, *acausal_conditional(&ch).unwrap().matrix());
        assert!(causal.matrix().hermiticity_deviation().unwrap() < 1e-15);
        let reduced = partial_trace(causal.matrix(), causal.dims(), Subsystem::Second).unwrap();
        assert!(close(&reduced, &ComplexMatrix::identity(3).scale_real(1.0 / 3.0), 1e-12));
    }

    #[test]
    fn star_with_maximally_mixed_prior_returns_conditional() {
        let cond = acausal_conditional(&KrausChannel::identity(2)).unwrap();
        let prior = ComplexMatrix::identity(2).scale_real(0.5);
        assert!(close(&star_product(&prior, &cond).unwrap(), &phi_plus(2), 1e-15));
    }

    #[test]
    fn star_preserves_unit_trace() {
        for seed in 0..300 {
            let ch = random_channel(3, 2, 2, seed).unwrap();
            let prior = random_state(3, seed + 1, true);
            let joint = star_product(prior.matrix(), &acausal_conditional(&ch).unwrap()).unwrap();
            assert!((joint.trace().unwrap() - ONE).norm() < 1e-12);
        }
    }

    #[test]
    fn star_rejects_bad_priors() {
        let cond = acausal_conditional(&KrausChannel::identity(2)).unwrap();
        assert!(matches!(
            star_product(&ComplexMatrix::identity(3), &cond),
            Err(Error::Dimension(_))
        ));
        let neg = star_product(&ComplexMatrix::diag(&[1.5, -0.5]), &cond).unwrap_err();
        assert!(matches!(neg.root(), Error::Negativity { .. }));
        let pure = star_product(&ComplexMatrix::diag(&[1.0, 0.0]), &cond).unwrap_err();
        assert!(matches!(pure.root(), Error::Rank(_)));
    }

    #[test]
    fn star_equalities_for_identity_channel() {
        let rho = DensityMatrix::maximally_mixed(2);
        let ch = KrausChannel::identity(2);
        let report = verify_star_equalities(&rho, &ch, 1e-14).unwrap();
        assert!(report.passed, "{report:?}");
        let lhs = star_product(&rho.matrix().transpose(), &acausal_conditional(&ch).unwrap()).unwrap();
        assert!(close(&lhs, &phi_plus(2), 1e-15));
        let lhs = star_product(rho.matrix(), &causal_conditional(&ch).unwrap()).unwrap();
        assert!(close(&lhs, &swap(2).scale_real(0.5), 1e-15));
    }

    #[test]
    fn dropping_the_normalization_factor_scales_by_dimension() {
        for seed in 0..20 {
            let rho = random_state(3, seed, true);
            let ch = random_channel(3, 2, 2, seed).unwrap();
            let cond = acausal_conditional(&ch).unwrap();
            let prior = rho.matrix().transpose();
            let with = star_product(&prior, &cond).unwrap();
            let without = star_product_scaled(&prior, &cond, 1.0).unwrap();
            assert!(close(&without.scale_real(3.0), &with, 1e-14));
            let tau = bipartite_state(&lifted_operator(&rho, &ch).unwrap()).unwrap();
            assert!(!approx_eq(&without, tau.matrix(), 1e-6).unwrap().equal);
        }
    }
}
