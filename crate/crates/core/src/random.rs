//! Seeded generators for states, POVMs, channels and whole scenarios.
//!
//! Every generator is a pure function of its arguments: the same seed always
//! yields the same object, bit for bit.

use num_complex::Complex64;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::linalg::{hermitian_eigen, ComplexMatrix};
use crate::objects::{validate_channel, validate_povm, validate_state, DensityMatrix, KrausChannel, Povm, Scenario};

/// Weight of `I/d` mixed into a random state that came out rank deficient.
pub const FULL_RANK_MIX: f64 = 1e-3;
/// Attempts made by generators that can hit a degenerate draw.
pub const MAX_RETRIES: u64 = 8;

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn gaussian(rng: &mut ChaCha8Rng) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re, im)
}

fn ginibre(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> ComplexMatrix {
    ComplexMatrix::from_fn(rows, cols, |_, _| gaussian(rng))
}

/// A `rows x cols` matrix of independent standard complex Gaussians.
pub fn random_matrix(rows: usize, cols: usize, seed: u64) -> ComplexMatrix {
    ginibre(rows, cols, &mut rng(seed))
}

/// Ginibre state `G G^dagger / Tr(G G^dagger)`.
///
/// With `ensure_full_rank`, a draw whose smallest eigenvalue falls below
/// [`RANK_TOL`](crate::objects::RANK_TOL) is mixed with `I/d` at weight [`FULL_RANK_MIX`].
///
/// # Panics
///
/// If `dim < 2`.
pub fn random_state(dim: usize, seed: u64, ensure_full_rank: bool) -> DensityMatrix {
    assert!(dim >= 2, "random_state needs dim >= 2");
    let g = random_matrix(dim, dim, seed);
    let gg = g.matmul(&g.dagger()).expect("square");
    let tr = gg.trace().expect("square").re;
    let mut mat = gg.scale_real(1.0 / tr).hermitian_part().expect("square");
    let state = validate_state(mat.clone()).expect("Ginibre draws are valid states");
    if !ensure_full_rank || state.is_full_rank() {
        return state;
    }
    let mixed = ComplexMatrix::identity(dim).scale_real(FULL_RANK_MIX / dim as f64);
    mat = mat.scale_real(1.0 - FULL_RANK_MIX).add(&mixed).expect("same shape");
    validate_state(mat).expect("mixture of states is a state")
}

/// Random POVM: `M_i = G_i G_i^dagger`, normalized as `S^{-1/2} M_i S^{-1/2}`
/// with `S = sum M_i`, so completeness holds by construction.
pub fn random_povm(dim: usize, n_outcomes: usize, seed: u64) -> Result<Povm> {
    if n_outcomes < 2 {
        return Err(Error::InvalidArgument(format!(
            "a POVM needs at least 2 outcomes, got {n_outcomes}"
        )));
    }
    let mut last = None;
    for attempt in 0..MAX_RETRIES {
        match povm_attempt(dim, n_outcomes, seed.wrapping_add(attempt)) {
            Ok(p) => return Ok(p),
            Err(e @ Error::Singularity(_)) => last = Some(e),
            Err(e) => return Err(e),
        }
    }
    Err(last.expect("at least one attempt"))
}

fn povm_attempt(dim: usize, n_outcomes: usize, seed: u64) -> Result<Povm> {
    let mut rng = rng(seed);
    let raw: Vec<ComplexMatrix> = (0..n_outcomes)
        .map(|_| {
            let g = ginibre(dim, dim, &mut rng);
            g.matmul(&g.dagger()).expect("square")
        })
        .collect();
    let mut sum = ComplexMatrix::zeros(dim, dim);
    for m in &raw {
        sum = sum.add(m)?;
    }
    let eig = hermitian_eigen(&sum)?;
    let (min, max) = (eig.values[0], eig.values[dim - 1]);
    if min <= 1e-12 * max {
        return Err(Error::Singularity(format!(
            "POVM normalizer has condition number {:.3e}",
            max / min
        )));
    }
    let inv_sqrt = eig.reconstruct_with(|v| 1.0 / v.sqrt());
    let effects = raw
        .iter()
        .map(|m| inv_sqrt.matmul(m)?.matmul(&inv_sqrt)?.hermitian_part())
        .collect::<Result<Vec<_>>>()?;
    validate_povm(effects)
}

/// Random channel: orthonormalize the columns of a `(n_kraus * dim_out) x
/// dim_in` Ginibre draw into an isometry and slice it into Kraus blocks.
pub fn random_channel(dim_in: usize, dim_out: usize, n_kraus: usize, seed: u64) -> Result<KrausChannel> {
    if n_kraus == 0 {
        return Err(Error::InvalidArgument("a channel needs at least one Kraus operator".into()));
    }
    if n_kraus * dim_out < dim_in {
        return Err(Error::InvalidArgument(format!(
            "{n_kraus} Kraus operators of shape {dim_out}x{dim_in} cannot be trace preserving"
        )));
    }
    let mut last = None;
    for attempt in 0..MAX_RETRIES {
        match channel_attempt(dim_in, dim_out, n_kraus, seed.wrapping_add(attempt)) {
            Ok(c) => return Ok(c),
            Err(e @ Error::Rank(_)) => last = Some(e),
            Err(e) => return Err(e),
        }
    }
    Err(last.expect("at least one attempt"))
}

fn channel_attempt(dim_in: usize, dim_out: usize, n_kraus: usize, seed: u64) -> Result<KrausChannel> {
    let rows = n_kraus * dim_out;
    let g = random_matrix(rows, dim_in, seed);
    let v = orthonormalize_columns(&g)?;
    let kraus = (0..n_kraus)
        .map(|m| ComplexMatrix::from_fn(dim_out, dim_in, |r, c| v[(m * dim_out + r, c)]))
        .collect();
    validate_channel(kraus, dim_in, dim_out)
}

/// Modified Gram-Schmidt with one reorthogonalization pass.
fn orthonormalize_columns(g: &ComplexMatrix) -> Result<ComplexMatrix> {
    let (rows, cols) = g.shape();
    let mut q: Vec<Vec<Complex64>> = Vec::with_capacity(cols);
    for c in 0..cols {
        let mut v: Vec<Complex64> = (0..rows).map(|r| g[(r, c)]).collect();
        let original = norm(&v);
        for _ in 0..2 {
            for prev in &q {
                let overlap: Complex64 = prev.iter().zip(&v).map(|(p, x)| p.conj() * x).sum();
                for (x, p) in v.iter_mut().zip(prev) {
                    *x -= overlap * p;
                }
            }
        }
        let n = norm(&v);
        if n <= 1e-10 * original.max(f64::MIN_POSITIVE) {
            return Err(Error::Rank(format!("column {c} of the Ginibre draw is dependent")));
        }
        v.iter_mut().for_each(|x| *x /= n);
        q.push(v);
    }
    let mut out = ComplexMatrix::zeros(rows, cols);
    for (c, col) in q.iter().enumerate() {
        for (r, x) in col.iter().enumerate() {
            out[(r, c)] = *x;
        }
    }
    Ok(out)
}

fn norm(v: &[Complex64]) -> f64 {
    v.iter().map(Complex64::norm_sqr).sum::<f64>().sqrt()
}

/// A full-rank random scenario with random POVMs on both sides plus an
/// alternative POVM for device A. Outcome counts are drawn from `2..=d+1`.
pub fn random_scenario(d1: usize, d2: usize, n_kraus: usize, seed: u64) -> Result<Scenario> {
    let mut r = rng(seed ^ 0x5ce0_a710_c0de_f00d);
    let mut next = || r.random::<u64>();
    let rho = random_state(d1, next(), true);
    let channel = random_channel(d1, d2, n_kraus, next())?;
    let n_a = 2 + (next() % d1 as u64) as usize;
    let n_b = 2 + (next() % d2 as u64) as usize;
    let n_alt = 2 + (next() % d1 as u64) as usize;
    let povm_a = random_povm(d1, n_a, next())?;
    let povm_b = random_povm(d2, n_b, next())?.with_prefix("b");
    let povm_a_alt = random_povm(d1, n_alt, next())?.with_prefix("a'");
    Scenario::new(
        format!("random-{d1}x{d2}-k{n_kraus}-s{seed}"),
        rho,
        channel,
        povm_a,
        povm_b,
        Some(povm_a_alt),
        false,
    )
}
