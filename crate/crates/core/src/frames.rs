//! The three observers' descriptions of one experiment.
//!
//! Observer alpha sees a preparation ensemble on S1, evolved by the channel and
//! measured on S2. Observer beta sees the time-reversed process and uses the
//! transpose of every operator alpha uses. Observer gamma sees a bipartite
//! state on S1 S2 obtained by partially transposing alpha's lifted operator on
//! S1. Each frame's probabilities are computed by its own pipeline.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{
    approx_eq, kron, partial_trace, partial_transpose, psd_sqrt, BipartiteDims, Comparison, ComplexMatrix,
    Subsystem, ZERO,
};
use crate::objects::{validate_state, CausalFrame, DensityMatrix, KrausChannel, Povm, Scenario};

/// Probabilities below this are "outcome never happens".
pub const ZERO_PROB: f64 = 1e-12;
/// Floating-point negatives down to this are clamped to zero; anything lower
/// is a bug.
pub const NEGATIVE_PROB_LIMIT: f64 = 1e-10;
/// Tolerance on the sum of a joint distribution and on internal identities.
pub const INTERNAL_TOL: f64 = 1e-10;

/// One member of a preparation ensemble.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleMember {
    pub outcome: usize,
    pub weight: f64,
    pub state: DensityMatrix,
}

/// `rho = sum_i p_i sigma_i` with `p_i = Tr[a_i rho]` and
/// `sigma_i = sqrt(rho) a_i sqrt(rho) / p_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct Ensemble {
    /// One weight per POVM outcome, including degenerate ones.
    pub weights: Vec<f64>,
    /// Members whose weight is at least [`ZERO_PROB`].
    pub members: Vec<EnsembleMember>,
    /// Outcomes dropped because their weight is below [`ZERO_PROB`].
    pub degenerate: Vec<usize>,
    pub source_state: DensityMatrix,
    pub source_povm: Povm,
}

impl Ensemble {
    /// `sum_i p_i sigma_i`.
    pub fn reconstruct(&self) -> ComplexMatrix {
        let d = self.source_state.dim();
        self.members.iter().fold(ComplexMatrix::zeros(d, d), |acc, m| {
            acc.add(&m.state.matrix().scale_real(m.weight)).expect("same dimension")
        })
    }
}

fn invariant(msg: impl Into<String>) -> Error {
    Error::InternalInvariant(msg.into())
}

/// Decompose a full-rank state into the ensemble induced by `povm_a`.
pub fn ensemble_decompose(rho: &DensityMatrix, povm_a: &Povm) -> Result<Ensemble> {
    rho.require_full_rank("ensemble decomposition")?;
    if povm_a.dim() != rho.dim() {
        return Err(Error::dim(format!(
            "POVM acts on dimension {} but the state has dimension {}",
            povm_a.dim(),
            rho.dim()
        )));
    }
    let sqrt_rho = psd_sqrt(rho.matrix())?;
    let mut weights = Vec::with_capacity(povm_a.len());
    let mut members = Vec::new();
    let mut degenerate = Vec::new();
    for (i, a) in povm_a.effects().iter().enumerate() {
        let weight = a.matmul(rho.matrix())?.trace()?.re;
        weights.push(weight);
        if weight < ZERO_PROB {
            degenerate.push(i);
            continue;
        }
        let sandwich = sqrt_rho.matmul(a)?.matmul(&sqrt_rho)?;
        let state = validate_state(sandwich.scale_real(1.0 / weight).hermitian_part()?)
            .map_err(|e| invariant(format!("ensemble member {i} is not a state: {e}")))?;
        members.push(EnsembleMember {
            outcome: i,
            weight,
            state,
        });
    }
    let total: f64 = weights.iter().sum();
    if (total - 1.0).abs() > INTERNAL_TOL {
        return Err(invariant(format!("ensemble weights sum to {total}")));
    }
    Ok(Ensemble {
        weights,
        members,
        degenerate,
        source_state: rho.clone(),
        source_povm: povm_a.clone(),
    })
}

/// `sum_m K^m rho K^m^dagger`.
pub fn apply_channel(channel: &KrausChannel, rho: &DensityMatrix) -> Result<DensityMatrix> {
    apply_channel_raw(channel, rho.matrix()).and_then(|out| {
        validate_state(out.hermitian_part()?).map_err(|e| invariant(format!("channel output is not a state: {e}")))
    })
}

fn apply_channel_raw(channel: &KrausChannel, rho: &ComplexMatrix) -> Result<ComplexMatrix> {
    if rho.shape() != (channel.dim_in(), channel.dim_in()) {
        return Err(Error::dim(format!(
            "channel expects a {0}x{0} input, got {1}x{2}",
            channel.dim_in(),
            rho.rows(),
            rho.cols()
        )));
    }
    let mut out = ComplexMatrix::zeros(channel.dim_out(), channel.dim_out());
    for k in channel.kraus() {
        out = out.add(&k.matmul(rho)?.matmul(&k.dagger())?)?;
    }
    Ok(out)
}

/// `sum_m K^m (x) K^m^dagger` written as an operator on `S1 (x) S2`:
/// `sum K_ab (K^dagger)_cd |c><b|_1 (x) |a><d|_2`.
pub fn kraus_operator_form(channel: &KrausChannel) -> Result<ComplexMatrix> {
    let dims = BipartiteDims::new(channel.dim_in(), channel.dim_out())?;
    let (d1, d2) = (dims.d1(), dims.d2());
    let mut out = ComplexMatrix::zeros(dims.total(), dims.total());
    for k in channel.kraus() {
        for a in 0..d2 {
            for b in 0..d1 {
                let kab = k[(a, b)];
                if kab == ZERO {
                    continue;
                }
                for c in 0..d1 {
                    for d in 0..d2 {
                        // (K^dagger)_cd = conj(K_dc)
                        out[(dims.flat(c, a), dims.flat(b, d))] += kab * k[(d, c)].conj();
                    }
                }
            }
        }
    }
    Ok(out)
}

/// The operator `T_rho` on `S1 (x) S2` encoding a state together with its
/// evolution. Its partial trace over S1 is the evolved state.
#[derive(Debug, Clone, PartialEq)]
pub struct LiftedOperator {
    dims: BipartiteDims,
    mat: ComplexMatrix,
}

impl LiftedOperator {
    pub fn dims(&self) -> BipartiteDims {
        self.dims
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.mat
    }
}

/// `T_rho = (sqrt(rho) (x) I) [sum_m K^m (x) K^m^dagger] (sqrt(rho) (x) I)`.
pub fn lifted_operator(rho: &DensityMatrix, channel: &KrausChannel) -> Result<LiftedOperator> {
    rho.require_full_rank("the lifted operator")?;
    if channel.dim_in() != rho.dim() {
        return Err(Error::dim(format!(
            "channel input dimension {} does not match state dimension {}",
            channel.dim_in(),
            rho.dim()
        )));
    }
    let dims = BipartiteDims::new(channel.dim_in(), channel.dim_out())?;
    let side = kron(&psd_sqrt(rho.matrix())?, &ComplexMatrix::identity(dims.d2()));
    let mat = side.matmul(&kraus_operator_form(channel)?)?.matmul(&side)?;

    let reduced = partial_trace(&mat, dims, Subsystem::First)?;
    let evolved = apply_channel_raw(channel, rho.matrix())?;
    let cmp = approx_eq(&reduced, &evolved, INTERNAL_TOL)?;
    if !cmp.equal {
        return Err(invariant(format!(
            "Tr_1[T_rho] differs from the evolved state by {:.3e}",
            cmp.max_deviation
        )));
    }
    Ok(LiftedOperator { dims, mat })
}

/// `tau_12 = T_rho^{T_1}`, the state observer gamma assigns to `S1 S2`.
pub fn bipartite_state(lifted: &LiftedOperator) -> Result<DensityMatrix> {
    let tau = partial_transpose(&lifted.mat, lifted.dims, Subsystem::First)?;
    validate_state(tau).map_err(|e| invariant(format!("tau_12 is not a state: {e}")))
}

/// `|Phi> = (sqrt(rho)^T (x) I) sum_j |j>|j>` on two copies of S1.
pub fn phi_state(rho: &DensityMatrix) -> Result<Vec<Complex64>> {
    let root_t = psd_sqrt(rho.matrix())?.transpose();
    let d = rho.dim();
    Ok((0..d * d).map(|idx| root_t[(idx / d, idx % d)]).collect())
}

/// `(I (x) T)(|Phi><Phi|)`, built by extending each Kraus operator to
/// `I_1 (x) K^m` and acting on the second copy of S1.
pub fn choi_state(rho: &DensityMatrix, channel: &KrausChannel) -> Result<ComplexMatrix> {
    if channel.dim_in() != rho.dim() {
        return Err(Error::dim(format!(
            "channel input dimension {} does not match state dimension {}",
            channel.dim_in(),
            rho.dim()
        )));
    }
    let phi = phi_state(rho)?;
    let projector = ComplexMatrix::outer(&phi, &phi);
    let id = ComplexMatrix::identity(rho.dim());
    let n = rho.dim() * channel.dim_out();
    let mut out = ComplexMatrix::zeros(n, n);
    for k in channel.kraus() {
        let ext = kron(&id, k);
        out = out.add(&ext.matmul(&projector)?.matmul(&ext.dagger())?)?;
    }
    Ok(out)
}

/// Compare `(I (x) T)(|Phi><Phi|)` with `tau_12` built from `T_rho`.
pub fn choi_identity_check(rho: &DensityMatrix, channel: &KrausChannel, tol: f64) -> Result<Comparison> {
    let lhs = choi_state(rho, channel)?;
    let tau = bipartite_state(&lifted_operator(rho, channel)?)?;
    approx_eq(&lhs, tau.matrix(), tol)
}

/// Joint outcome probabilities `p(a_i, b_j)` as computed in one frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JointDistribution {
    pub frame: CausalFrame,
    /// `probabilities[i][j] = p(a_i, b_j)`.
    pub probabilities: Vec<Vec<f64>>,
    pub labels_a: Vec<String>,
    pub labels_b: Vec<String>,
}

impl JointDistribution {
    /// Clamp floating-point noise and check the normalization.
    pub fn from_raw(
        frame: CausalFrame,
        raw: Vec<Vec<f64>>,
        labels_a: Vec<String>,
        labels_b: Vec<String>,
    ) -> Result<Self> {
        if raw.len() != labels_a.len() || raw.iter().any(|row| row.len() != labels_b.len()) {
            return Err(Error::dim("probability table does not match the outcome labels"));
        }
        let mut total = 0.0;
        let mut probabilities = raw;
        for (i, row) in probabilities.iter_mut().enumerate() {
            for (j, p) in row.iter_mut().enumerate() {
                if !p.is_finite() || *p < -NEGATIVE_PROB_LIMIT || *p > 1.0 + NEGATIVE_PROB_LIMIT {
                    return Err(invariant(format!(
                        "{} frame: p({i}, {j}) = {p:e} is not a probability",
                        frame.symbol()
                    )));
                }
                total += *p;
                *p = p.clamp(0.0, 1.0);
            }
        }
        if (total - 1.0).abs() > INTERNAL_TOL {
            return Err(invariant(format!("{} frame: probabilities sum to {total}", frame.symbol())));
        }
        Ok(Self {
            frame,
            probabilities,
            labels_a,
            labels_b,
        })
    }

    pub fn n_a(&self) -> usize {
        self.probabilities.len()
    }

    pub fn n_b(&self) -> usize {
        self.labels_b.len()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.probabilities[i][j]
    }

    pub fn total(&self) -> f64 {
        self.probabilities.iter().flatten().sum()
    }

    /// `sum_j p(a_i, b_j)` for each `i`.
    pub fn marginal_a(&self) -> Vec<f64> {
        self.probabilities.iter().map(|row| row.iter().sum()).collect()
    }

    /// `sum_i p(a_i, b_j)` for each `j`.
    pub fn marginal_b(&self) -> Vec<f64> {
        (0..self.n_b())
            .map(|j| self.probabilities.iter().map(|row| row[j]).sum())
            .collect()
    }

    /// `max_ij |p_ij - q_ij|`.
    pub fn max_deviation(&self, other: &Self) -> Result<f64> {
        max_table_deviation(&self.probabilities, &other.probabilities)
    }
}

/// `max_ij |p_ij - q_ij|` for two tables of the same shape.
pub fn max_table_deviation(p: &[Vec<f64>], q: &[Vec<f64>]) -> Result<f64> {
    if p.len() != q.len() || p.iter().zip(q).any(|(a, b)| a.len() != b.len()) {
        return Err(Error::dim("probability tables have different shapes"));
    }
    Ok(p.iter()
        .zip(q)
        .flat_map(|(a, b)| a.iter().zip(b).map(|(x, y)| (x - y).abs()))
        .fold(0.0, f64::max))
}

/// Real part of a trace that should be a probability; a sizeable imaginary
/// part means an operator was not Hermitian.
pub(crate) fn real_probability(z: Complex64) -> Result<f64> {
    if z.im.abs() > INTERNAL_TOL {
        return Err(invariant(format!("probability has imaginary part {:e}", z.im)));
    }
    Ok(z.re)
}

fn full_rank_lifted(scenario: &Scenario) -> Result<LiftedOperator> {
    scenario.rho().require_full_rank("joint probabilities")?;
    lifted_operator(scenario.rho(), scenario.channel())
}

fn finish(frame: CausalFrame, scenario: &Scenario, raw: Vec<Vec<f64>>) -> Result<JointDistribution> {
    JointDistribution::from_raw(
        frame,
        raw,
        scenario.povm_a().labels().to_vec(),
        scenario.povm_b().labels().to_vec(),
    )
}

/// Observer alpha: `p(a_i, b_j) = Tr_2[b_j Tr_1[T_rho (a_i (x) I_2)]]`.
pub fn prob_alpha(scenario: &Scenario) -> Result<JointDistribution> {
    prob_alpha_with(scenario, &full_rank_lifted(scenario)?)
}

pub(crate) fn prob_alpha_with(scenario: &Scenario, lifted: &LiftedOperator) -> Result<JointDistribution> {
    let dims = lifted.dims();
    let id2 = ComplexMatrix::identity(dims.d2());
    let mut raw = Vec::with_capacity(scenario.povm_a().len());
    for a in scenario.povm_a().effects() {
        let prepared = partial_trace(&lifted.matrix().matmul(&kron(a, &id2))?, dims, Subsystem::First)?;
        let row = scenario
            .povm_b()
            .effects()
            .iter()
            .map(|b| real_probability(b.matmul(&prepared)?.trace()?))
            .collect::<Result<Vec<_>>>()?;
        raw.push(row);
    }
    finish(CausalFrame::AlphaForward, scenario, raw)
}

/// Observer beta: `p(a_i, b_j) = Tr_1[a_i^T Tr_2[T_rho^T (I_1 (x) b_j^T)]]`,
/// with `T_rho^T` the full transpose.
pub fn prob_beta(scenario: &Scenario) -> Result<JointDistribution> {
    prob_beta_with(scenario, &full_rank_lifted(scenario)?)
}

pub(crate) fn prob_beta_with(scenario: &Scenario, lifted: &LiftedOperator) -> Result<JointDistribution> {
    let dims = lifted.dims();
    let reversed = lifted.matrix().transpose();
    let id1 = ComplexMatrix::identity(dims.d1());
    let a_t: Vec<ComplexMatrix> = scenario.povm_a().effects().iter().map(ComplexMatrix::transpose).collect();
    let mut columns = Vec::with_capacity(scenario.povm_b().len());
    for b in scenario.povm_b().effects() {
        let prepared = partial_trace(&reversed.matmul(&kron(&id1, &b.transpose()))?, dims, Subsystem::Second)?;
        let column = a_t
            .iter()
            .map(|a| real_probability(a.matmul(&prepared)?.trace()?))
            .collect::<Result<Vec<_>>>()?;
        columns.push(column);
    }
    let raw = (0..a_t.len())
        .map(|i| columns.iter().map(|col| col[i]).collect())
        .collect();
    finish(CausalFrame::BetaReverse, scenario, raw)
}

/// Observer gamma: `p(a_i, b_j) = Tr[(a_i^T (x) b_j) tau_12]`.
pub fn prob_gamma(scenario: &Scenario) -> Result<JointDistribution> {
    prob_gamma_with(scenario, &full_rank_lifted(scenario)?)
}

pub(crate) fn prob_gamma_with(scenario: &Scenario, lifted: &LiftedOperator) -> Result<JointDistribution> {
    let tau = bipartite_state(lifted)?;
    gamma_from_state(scenario, tau.matrix())
}

/// Gamma's rule applied to an arbitrary operator in place of `tau_12`.
pub fn gamma_from_state(scenario: &Scenario, tau: &ComplexMatrix) -> Result<JointDistribution> {
    let raw = gamma_table(scenario.povm_a(), scenario.povm_b(), tau, false)?;
    finish(CausalFrame::GammaSpacelike, scenario, raw)
}

pub(crate) fn gamma_table(
    povm_a: &Povm,
    povm_b: &Povm,
    tau: &ComplexMatrix,
    transpose_b: bool,
) -> Result<Vec<Vec<f64>>> {
    povm_a
        .effects()
        .iter()
        .map(|a| {
            let a_t = a.transpose();
            povm_b
                .effects()
                .iter()
                .map(|b| {
                    let b = if transpose_b { b.transpose() } else { b.clone() };
                    real_probability(kron(&a_t, &b).matmul(tau)?.trace()?)
                })
                .collect()
        })
        .collect()
}

/// Dispatch on the frame.
pub fn prob_in_frame(scenario: &Scenario, frame: CausalFrame) -> Result<JointDistribution> {
    match frame {
        CausalFrame::AlphaForward => prob_alpha(scenario),
        CausalFrame::BetaReverse => prob_beta(scenario),
        CausalFrame::GammaSpacelike => prob_gamma(scenario),
    }
}

/// `p(b_j | a) = p(a, b_j) / sum_j p(a, b_j)`.
pub fn conditional_distribution(joint: &JointDistribution, a_index: usize) -> Result<Vec<f64>> {
    let row = joint.probabilities.get(a_index).ok_or_else(|| {
        Error::InvalidArgument(format!(
            "outcome index {a_index} out of range for {} outcomes",
            joint.n_a()
        ))
    })?;
    let marginal: f64 = row.iter().sum();
    if marginal < ZERO_PROB {
        return Err(Error::ZeroMarginal {
            index: a_index,
            marginal,
        });
    }
    Ok(row.iter().map(|p| p / marginal).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::test_support::{c, swap};
    use crate::linalg::ONE;
    use crate::objects::{validate_povm, validate_state};
    use crate::random::{random_channel, random_povm, random_scenario, random_state};

    fn z_basis() -> Povm {
        Povm::computational_basis(2)
    }

    fn sg_scenario() -> Scenario {
        Scenario::new(
            "sg",
            DensityMatrix::maximally_mixed(2),
            KrausChannel::identity(2),
            z_basis(),
            z_basis().with_prefix("b"),
            None,
            false,
        )
        .unwrap()
    }

    fn phi_plus_projector(d: usize) -> ComplexMatrix {
        let mut v = vec![ZERO; d * d];
        for i in 0..d {
            v[i * d + i] = c(1.0 / (d as f64).sqrt(), 0.0);
        }
        ComplexMatrix::outer(&v, &v)
    }

    fn close(a: &ComplexMatrix, b: &ComplexMatrix, tol: f64) -> bool {
        approx_eq(a, b, tol).unwrap().equal
    }

    fn assert_table(joint: &JointDistribution, expected: &[&[f64]], tol: f64) {
        for (i, row) in expected.iter().enumerate() {
            for (j, &p) in row.iter().enumerate() {
                assert!((joint.get(i, j) - p).abs() <= tol, "p({i},{j}) = {} expected {p}", joint.get(i, j));
            }
        }
    }

    #[test]
    fn ensemble_of_maximally_mixed_qubit() {
        let e = ensemble_decompose(&DensityMatrix::maximally_mixed(2), &z_basis()).unwrap();
        assert!((e.weights[0] - 0.5).abs() < 1e-15 && (e.weights[1] - 0.5).abs() < 1e-15);
        assert!(close(e.members[0].state.matrix(), &ComplexMatrix::diag(&[1.0, 0.0]), 1e-15));
        assert!(close(e.members[1].state.matrix(), &ComplexMatrix::diag(&[0.0, 1.0]), 1e-15));
        assert!(e.degenerate.is_empty());
    }

    #[test]
    fn uninformative_povm_leaves_state_unchanged() {
        for d in 2..5 {
            let rho = DensityMatrix::maximally_mixed(d);
            let half = ComplexMatrix::identity(d).scale_real(0.5);
            let povm = validate_povm(vec![half.clone(), half]).unwrap();
            let e = ensemble_decompose(&rho, &povm).unwrap();
            for m in &e.members {
                assert!((m.weight - 0.5).abs() < 1e-15);
                assert!(close(m.state.matrix(), rho.matrix(), 1e-15));
            }
        }
    }

    #[test]
    fn ensemble_reconstruction_on_random_pairs() {
        let mut worst = 0.0_f64;
        for seed in 0..300 {
            let d = 2 + (seed as usize % 3);
            let rho = random_state(d, seed, true);
            let povm = random_povm(d, 2 + seed as usize % 4, seed + 7).unwrap();
            let e = ensemble_decompose(&rho, &povm).unwrap();
            worst = worst.max(e.reconstruct().frobenius_distance(rho.matrix()).unwrap());
        }
        assert!(worst < 1e-12, "{worst:e}");
    }

    #[test]
    fn ensemble_flags_degenerate_outcomes() {
        let zero = ComplexMatrix::zeros(2, 2);
        let povm = validate_povm(vec![ComplexMatrix::diag(&[1.0, 0.0]), ComplexMatrix::diag(&[0.0, 1.0]), zero])
            .unwrap();
        let e = ensemble_decompose(&random_state(2, 3, true), &povm).unwrap();
        assert_eq!(e.degenerate, vec![2]);
        assert_eq!(e.members.len(), 2);
        assert_eq!(e.weights.len(), 3);
    }

    #[test]
    fn ensemble_errors() {
        let pure = validate_state(ComplexMatrix::diag(&[1.0, 0.0])).unwrap();
        assert!(matches!(ensemble_decompose(&pure, &z_basis()), Err(Error::Rank(_))));
        let rho3 = DensityMatrix::maximally_mixed(3);
        assert!(matches!(ensemble_decompose(&rho3, &z_basis()), Err(Error::Dimension(_))));
    }

    #[test]
    fn apply_channel_examples() {
        let rho = random_state(3, 1, true);
        let id = apply_channel(&KrausChannel::identity(3), &rho).unwrap();
        assert!(close(id.matrix(), rho.matrix(), 1e-15));

        let unitary = random_channel(3, 3, 1, 4).unwrap();
        let u = &unitary.kraus()[0];
        let expected = u.matmul(rho.matrix()).unwrap().matmul(&u.dagger()).unwrap();
        assert!(close(apply_channel(&unitary, &rho).unwrap().matrix(), &expected, 1e-15));

        for seed in 0..20 {
            let rho = random_state(3, seed, false);
            let out = apply_channel(&KrausChannel::completely_depolarizing(3), &rho).unwrap();
            assert!(close(out.matrix(), &ComplexMatrix::identity(3).scale_real(1.0 / 3.0), 1e-14));
        }

        assert!(apply_channel(&KrausChannel::identity(2), &rho).is_err());
    }

    #[test]
    fn lifted_operator_of_identity_channel_is_half_swap() {
        let t = lifted_operator(&DensityMatrix::maximally_mixed(2), &KrausChannel::identity(2)).unwrap();
        assert!(close(t.matrix(), &swap(2).scale_real(0.5), 1e-15));
        let dep = lifted_operator(&DensityMatrix::maximally_mixed(2), &KrausChannel::completely_depolarizing(2))
            .unwrap();
        assert!(close(dep.matrix(), &ComplexMatrix::identity(4).scale_real(0.25), 1e-15));
    }

    #[test]
    fn kraus_operator_form_entrywise() {
        // single Kraus K = |1><0| + i|0><1| on a qubit; entry at (c,a),(b,d) is K_ab conj(K_dc)
        let mut k = ComplexMatrix::zeros(2, 2);
        k[(1, 0)] = ONE;
        k[(0, 1)] = c(0.0, 1.0);
        let ch = KrausChannel::from_kraus_unchecked(vec![k.clone()], 2, 2);
        let form = kraus_operator_form(&ch).unwrap();
        for a in 0..2 {
            for b in 0..2 {
                for cc in 0..2 {
                    for d in 0..2 {
                        let expected = k[(a, b)] * k[(d, cc)].conj();
                        assert_eq!(form[(cc * 2 + a, b * 2 + d)], expected);
                    }
                }
            }
        }
    }

    #[test]
    fn partial_trace_of_lifted_is_evolved_state() {
        for seed in 0..200 {
            let (d1, d2) = (2 + seed as usize % 3, 2 + (seed as usize / 3) % 3);
            let k = 1 + seed as usize % 4;
            if k * d2 < d1 {
                continue;
            }
            let rho = random_state(d1, seed, true);
            let ch = random_channel(d1, d2, k, seed).unwrap();
            let t = lifted_operator(&rho, &ch).unwrap();
            let reduced = partial_trace(t.matrix(), t.dims(), Subsystem::First).unwrap();
            let evolved = apply_channel(&ch, &rho).unwrap();
            assert!(close(&reduced, evolved.matrix(), 1e-12));
        }
    }

    #[test]
    fn bipartite_state_examples() {
        let t = lifted_operator(&DensityMatrix::maximally_mixed(2), &KrausChannel::identity(2)).unwrap();
        let tau = bipartite_state(&t).unwrap();
        assert!(close(tau.matrix(), &phi_plus_projector(2), 1e-15));

        for seed in 0..100 {
            let rho = random_state(3, seed, true);
            let ch = random_channel(3, 2, 2, seed).unwrap();
            let tau = bipartite_state(&lifted_operator(&rho, &ch).unwrap()).unwrap();
            assert!((tau.matrix().trace().unwrap() - ONE).norm() < 1e-12);
            let dims = BipartiteDims::new(3, 2).unwrap();
            let reduced = partial_trace(tau.matrix(), dims, Subsystem::Second).unwrap();
            assert!(close(&reduced, &rho.matrix().transpose(), 1e-12));
        }
    }

    #[test]
    fn phi_state_examples() {
        let s = 1.0 / 2f64.sqrt();
        let phi = phi_state(&DensityMatrix::maximally_mixed(2)).unwrap();
        let expected = [c(s, 0.0), ZERO, ZERO, c(s, 0.0)];
        for (x, y) in phi.iter().zip(expected) {
            assert!((x - y).norm() < 1e-15);
        }
        let pure = validate_state(ComplexMatrix::diag(&[1.0, 0.0])).unwrap();
        assert_eq!(phi_state(&pure).unwrap(), vec![ONE, ZERO, ZERO, ZERO]);
        for seed in 0..200 {
            let phi = phi_state(&random_state(4, seed, false)).unwrap();
            let norm: f64 = phi.iter().map(Complex64::norm_sqr).sum();
            assert!((norm - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn choi_identity() {
        for seed in 0..20 {
            let rho = random_state(3, seed, true);
            let cmp = choi_identity_check(&rho, &KrausChannel::identity(3), 1e-12).unwrap();
            assert!(cmp.equal);
            let phi = phi_state(&rho).unwrap();
            let proj = ComplexMatrix::outer(&phi, &phi);
            assert!(close(&choi_state(&rho, &KrausChannel::identity(3)).unwrap(), &proj, 1e-15));
        }
        let mut worst = 0.0_f64;
        for seed in 0..200 {
            let rho = random_state(2 + seed as usize % 3, seed, true);
            let ch = random_channel(rho.dim(), 3, 2, seed).unwrap();
            worst = worst.max(choi_identity_check(&rho, &ch, 1e-11).unwrap().max_deviation);
        }
        assert!(worst < 1e-11, "{worst:e}");
    }

    #[test]
    fn choi_detects_corrupted_kraus_entry() {
        let rho = random_state(2, 5, true);
        let ch = random_channel(2, 2, 2, 5).unwrap();
        let mut kraus = ch.kraus().to_vec();
        kraus[0][(0, 1)] += c(1e-3, 0.0);
        let corrupted = KrausChannel::from_kraus_unchecked(kraus, 2, 2);
        let lhs = choi_state(&rho, &corrupted).unwrap();
        let tau = bipartite_state(&lifted_operator(&rho, &ch).unwrap()).unwrap();
        assert!(!approx_eq(&lhs, tau.matrix(), 1e-11).unwrap().equal);
    }

    #[test]
    fn alpha_is_insensitive_to_operator_ordering() {
        for seed in 0..50 {
            let s = random_scenario(3, 2, 2, seed).unwrap();
            let lifted = lifted_operator(s.rho(), s.channel()).unwrap();
            let dims = lifted.dims();
            let alpha = prob_alpha(&s).unwrap();
            for (i, a) in s.povm_a().effects().iter().enumerate() {
                let left = kron(a, &ComplexMatrix::identity(dims.d2())).matmul(lifted.matrix()).unwrap();
                let reduced = partial_trace(&left, dims, Subsystem::First).unwrap();
                for (j, b) in s.povm_b().effects().iter().enumerate() {
                    let p = reduced.matmul(b).unwrap().trace().unwrap();
                    assert!(p.im.abs() < 1e-12);
                    assert!((p.re - alpha.get(i, j)).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn stern_gerlach_in_every_frame() {
        let s = sg_scenario();
        for frame in CausalFrame::ALL {
            let joint = prob_in_frame(&s, frame).unwrap();
            assert_eq!(joint.frame, frame);
            assert_table(&joint, &[&[0.5, 0.0], &[0.0, 0.5]], 1e-15);
        }
    }

    #[test]
    fn depolarizing_gives_product_distribution() {
        for seed in 0..50 {
            let rho = random_state(3, seed, true);
            let a = random_povm(3, 3, seed).unwrap();
            let b = random_povm(3, 2, seed + 100).unwrap();
            let s = Scenario::new("dep", rho.clone(), KrausChannel::completely_depolarizing(3), a, b, None, false)
                .unwrap();
            let joint = prob_alpha(&s).unwrap();
            for (i, ai) in s.povm_a().effects().iter().enumerate() {
                let pa = ai.matmul(rho.matrix()).unwrap().trace().unwrap().re;
                for (j, bj) in s.povm_b().effects().iter().enumerate() {
                    let pb = bj.trace().unwrap().re / 3.0;
                    assert!((joint.get(i, j) - pa * pb).abs() < 1e-13);
                }
            }
        }
    }

    #[test]
    fn frames_agree_and_marginals_match() {
        for seed in 0..200 {
            let (d1, d2) = (2 + seed as usize % 3, 2 + (seed as usize / 3) % 3);
            let k = [1, 2, 4][seed as usize % 3];
            if k * d2 < d1 {
                continue;
            }
            let s = random_scenario(d1, d2, k, seed).unwrap();
            let pa = prob_alpha(&s).unwrap();
            let pb = prob_beta(&s).unwrap();
            let pg = prob_gamma(&s).unwrap();
            assert!(pa.max_deviation(&pb).unwrap() < 1e-11);
            assert!(pa.max_deviation(&pg).unwrap() < 1e-11);

            let weights = ensemble_decompose(s.rho(), s.povm_a()).unwrap().weights;
            let evolved = apply_channel(s.channel(), s.rho()).unwrap();
            for joint in [&pa, &pb, &pg] {
                assert!((joint.total() - 1.0).abs() < 1e-10);
                for (m, w) in joint.marginal_a().iter().zip(&weights) {
                    assert!((m - w).abs() < 1e-12);
                }
                for (m, b) in joint.marginal_b().iter().zip(s.povm_b().effects()) {
                    let expected = b.matmul(evolved.matrix()).unwrap().trace().unwrap().re;
                    assert!((m - expected).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn pure_states_are_rejected_by_every_frame() {
        let pure = validate_state(ComplexMatrix::diag(&[1.0, 0.0])).unwrap();
        let s = Scenario::new("pure", pure, KrausChannel::identity(2), z_basis(), z_basis(), None, true).unwrap();
        for frame in CausalFrame::ALL {
            assert!(matches!(prob_in_frame(&s, frame), Err(Error::Rank(_))));
        }
    }

    #[test]
    fn conditional_examples() {
        let joint = prob_alpha(&sg_scenario()).unwrap();
        assert_eq!(conditional_distribution(&joint, 0).unwrap(), vec![1.0, 0.0]);

        let p = [0.2, 0.8];
        let q = [0.1, 0.3, 0.6];
        let product: Vec<Vec<f64>> = p.iter().map(|pi| q.iter().map(|qj| pi * qj).collect()).collect();
        let joint = JointDistribution::from_raw(
            CausalFrame::GammaSpacelike,
            product,
            vec!["a0".into(), "a1".into()],
            vec!["b0".into(), "b1".into(), "b2".into()],
        )
        .unwrap();
        for i in 0..2 {
            let cond = conditional_distribution(&joint, i).unwrap();
            for (x, y) in cond.iter().zip(q) {
                assert!((x - y).abs() < 1e-15);
            }
        }

        let uniform = JointDistribution::from_raw(
            CausalFrame::AlphaForward,
            vec![vec![1.0 / 6.0; 3]; 2],
            vec!["a0".into(), "a1".into()],
            vec!["b0".into(), "b1".into(), "b2".into()],
        )
        .unwrap();
        for x in conditional_distribution(&uniform, 1).unwrap() {
            assert!((x - 1.0 / 3.0).abs() < 1e-15);
        }
    }

    #[test]
    fn conditional_rejects_zero_marginal() {
        let joint = JointDistribution::from_raw(
            CausalFrame::AlphaForward,
            vec![vec![0.5, 0.5], vec![0.0, 0.0]],
            vec!["a0".into(), "a1".into()],
            vec!["b0".into(), "b1".into()],
        )
        .unwrap();
        assert!(matches!(conditional_distribution(&joint, 1), Err(Error::ZeroMarginal { index: 1, .. })));
        assert!(conditional_distribution(&joint, 2).is_err());
    }

    #[test]
    fn conditional_reproduces_pure_preparation_for_commuting_state() {
        // rho diagonal in A's basis: conditioning on a_0 is the same as
        // preparing |0><0| and sending it through the channel.
        let rho = validate_state(ComplexMatrix::diag(&[0.3, 0.7])).unwrap();
        let ch = random_channel(2, 3, 2, 11).unwrap();
        let b = random_povm(3, 3, 12).unwrap();
        let s = Scenario::new("diag", rho, ch.clone(), z_basis(), b.clone(), None, false).unwrap();
        let ket0 = validate_state(ComplexMatrix::diag(&[1.0, 0.0])).unwrap();
        let out = apply_channel(&ch, &ket0).unwrap();
        for frame in CausalFrame::ALL {
            let cond = conditional_distribution(&prob_in_frame(&s, frame).unwrap(), 0).unwrap();
            for (p, e) in cond.iter().zip(b.effects()) {
                let expected = e.matmul(out.matrix()).unwrap().trace().unwrap().re;
                assert!((p - expected).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn from_raw_clamps_noise_and_rejects_garbage() {
        let labels = || vec!["x".to_string(), "y".to_string()];
        let j = JointDistribution::from_raw(
            CausalFrame::AlphaForward,
            vec![vec![0.5 + 5e-13, -5e-13], vec![0.0, 0.5]],
            labels(),
            labels(),
        )
        .unwrap();
        assert_eq!(j.get(0, 1), 0.0);
        assert!(matches!(
            JointDistribution::from_raw(CausalFrame::AlphaForward, vec![vec![0.6, -0.1], vec![0.0, 0.5]], labels(), labels()),
            Err(Error::InternalInvariant(_))
        ));
        assert!(matches!(
            JointDistribution::from_raw(CausalFrame::AlphaForward, vec![vec![0.5, 0.1], vec![0.0, 0.5]], labels(), labels()),
            Err(Error::InternalInvariant(_))
        ));
    }
}
