//! Validated quantum objects: states, POVMs, Kraus channels and the
//! two-device scenario that ties them together.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{hermitian_eigen, psd_tolerance, BipartiteDims, ComplexMatrix, HERMITICITY_TOL};

/// Below this smallest eigenvalue a state is treated as rank deficient.
pub const RANK_TOL: f64 = 1e-9;
/// A state is pure when its largest eigenvalue is at least `1 - PURITY_TOL`.
pub const PURITY_TOL: f64 = 1e-10;
/// Tolerance on `|Tr rho - 1|`, POVM completeness and channel trace preservation.
pub const NORMALIZATION_TOL: f64 = 1e-10;

/// A Hermitian, positive semidefinite, unit-trace matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    mat: ComplexMatrix,
    min_eigenvalue: f64,
    max_eigenvalue: f64,
}

impl DensityMatrix {
    pub fn dim(&self) -> usize {
        self.mat.rows()
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.mat
    }

    pub fn into_matrix(self) -> ComplexMatrix {
        self.mat
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.min_eigenvalue
    }

    pub fn max_eigenvalue(&self) -> f64 {
        self.max_eigenvalue
    }

    pub fn is_full_rank(&self) -> bool {
        self.min_eigenvalue >= RANK_TOL
    }

    pub fn is_pure(&self) -> bool {
        self.max_eigenvalue >= 1.0 - PURITY_TOL
    }

    /// `I / d`.
    pub fn maximally_mixed(dim: usize) -> Self {
        validate_state(ComplexMatrix::identity(dim).scale_real(1.0 / dim as f64))
            .expect("I/d is a valid state")
    }

    pub(crate) fn require_full_rank(&self, what: &str) -> Result<()> {
        if self.is_full_rank() {
            Ok(())
        } else {
            Err(Error::Rank(format!(
                "{what} requires a full-rank state, smallest eigenvalue is {:.3e}",
                self.min_eigenvalue
            )))
        }
    }
}

/// Check that `mat` is a density matrix and cache its spectral facts.
pub fn validate_state(mat: ComplexMatrix) -> Result<DensityMatrix> {
    if !mat.is_square() {
        return Err(Error::dim(format!(
            "a state must be square, got {}x{}",
            mat.rows(),
            mat.cols()
        )));
    }
    let deviation = mat.hermiticity_deviation()?;
    if deviation > HERMITICITY_TOL {
        return Err(Error::Hermiticity { deviation });
    }
    let eig = hermitian_eigen(&mat)?;
    let threshold = psd_tolerance(&eig.values);
    let min_eigenvalue = eig.values[0];
    let max_eigenvalue = *eig.values.last().expect("non-empty spectrum");
    if min_eigenvalue < -threshold {
        return Err(Error::Negativity {
            min_eigenvalue,
            threshold,
        });
    }
    let trace = mat.trace()?.re;
    if (trace - 1.0).abs() > NORMALIZATION_TOL {
        return Err(Error::Trace { trace });
    }
    Ok(DensityMatrix {
        mat,
        min_eigenvalue,
        max_eigenvalue,
    })
}

/// A positive operator-valued measure on one system.
#[derive(Debug, Clone, PartialEq)]
pub struct Povm {
    effects: Vec<ComplexMatrix>,
    labels: Vec<String>,
}

impl Povm {
    pub fn dim(&self) -> usize {
        self.effects[0].rows()
    }

    pub fn len(&self) -> usize {
        self.effects.len()
    }

    pub fn is_empty(&self) -> bool {
        self.effects.is_empty()
    }

    pub fn effects(&self) -> &[ComplexMatrix] {
        &self.effects
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    /// Replace the outcome labels. The count must match the number of effects.
    pub fn with_labels(mut self, labels: Vec<String>) -> Result<Self> {
        if labels.len() != self.effects.len() {
            return Err(Error::dim(format!(
                "{} labels for {} effects",
                labels.len(),
                self.effects.len()
            )));
        }
        self.labels = labels;
        Ok(self)
    }

    /// Relabel as `{prefix}0, {prefix}1, ...`.
    pub fn with_prefix(self, prefix: &str) -> Self {
        let labels = default_labels(prefix, self.effects.len());
        Self { labels, ..self }
    }

    /// Projective measurement in the computational basis.
    pub fn computational_basis(dim: usize) -> Self {
        validate_povm((0..dim).map(|k| ComplexMatrix::unit(dim, k, k)).collect())
            .expect("basis projectors form a POVM")
    }
}

pub(crate) fn default_labels(prefix: &str, n: usize) -> Vec<String> {
    (0..n).map(|i| format!("{prefix}{i}")).collect()
}

/// Check that `effects` are PSD and sum to the identity. Labels default to
/// `a0, a1, ...`.
pub fn validate_povm(effects: Vec<ComplexMatrix>) -> Result<Povm> {
    if effects.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "a POVM needs at least 2 effects, got {}",
            effects.len()
        )));
    }
    let d = effects[0].rows();
    for (k, e) in effects.iter().enumerate() {
        if e.shape() != (d, d) {
            return Err(Error::dim(format!(
                "effect {k} is {}x{}, expected {d}x{d}",
                e.rows(),
                e.cols()
            )));
        }
        let eig = hermitian_eigen(e).map_err(|err| err.at(format!("effects[{k}]")))?;
        let threshold = psd_tolerance(&eig.values);
        if eig.values[0] < -threshold {
            return Err(Error::Negativity {
                min_eigenvalue: eig.values[0],
                threshold,
            }
            .at(format!("effects[{k}]")));
        }
    }
    let mut total = ComplexMatrix::zeros(d, d);
    for e in &effects {
        total = total.add(e)?;
    }
    let deviation = total.frobenius_distance(&ComplexMatrix::identity(d))?;
    if deviation > NORMALIZATION_TOL {
        return Err(Error::Completeness { deviation });
    }
    let labels = default_labels("a", effects.len());
    Ok(Povm { effects, labels })
}

/// A completely positive trace-preserving map `S1 -> S2` in Kraus form.
#[derive(Debug, Clone, PartialEq)]
pub struct KrausChannel {
    dim_in: usize,
    dim_out: usize,
    kraus: Vec<ComplexMatrix>,
}

impl KrausChannel {
    pub fn dim_in(&self) -> usize {
        self.dim_in
    }

    pub fn dim_out(&self) -> usize {
        self.dim_out
    }

    pub fn kraus(&self) -> &[ComplexMatrix] {
        &self.kraus
    }

    pub fn identity(dim: usize) -> Self {
        validate_channel(vec![ComplexMatrix::identity(dim)], dim, dim).expect("identity is CPTP")
    }

    /// Kraus operators `|a><b| / sqrt(d_in)`, mapping every state to `I / d_out`
    /// when `d_in == d_out`.
    pub fn completely_depolarizing(dim: usize) -> Self {
        let s = 1.0 / (dim as f64).sqrt();
        let mut kraus = Vec::with_capacity(dim * dim);
        for a in 0..dim {
            for b in 0..dim {
                kraus.push(ComplexMatrix::unit(dim, a, b).scale_real(s));
            }
        }
        validate_channel(kraus, dim, dim).expect("depolarizing channel is CPTP")
    }

    /// Build without validation; used to construct deliberately broken
    /// channels for detector checks.
    #[doc(hidden)]
    pub fn from_kraus_unchecked(kraus: Vec<ComplexMatrix>, dim_in: usize, dim_out: usize) -> Self {
        Self { dim_in, dim_out, kraus }
    }
}

/// Check the shapes of `kraus` and that `sum K^dagger K = I`.
pub fn validate_channel(kraus: Vec<ComplexMatrix>, dim_in: usize, dim_out: usize) -> Result<KrausChannel> {
    if kraus.is_empty() {
        return Err(Error::dim("a channel needs at least one Kraus operator"));
    }
    if dim_in == 0 || dim_out == 0 {
        return Err(Error::dim("channel dimensions must be positive"));
    }
    let mut total = ComplexMatrix::zeros(dim_in, dim_in);
    for (m, k) in kraus.iter().enumerate() {
        if k.shape() != (dim_out, dim_in) {
            return Err(Error::dim(format!(
                "Kraus operator {m} is {}x{}, expected {dim_out}x{dim_in}",
                k.rows(),
                k.cols()
            )));
        }
        total = total.add(&k.dagger().matmul(k)?)?;
    }
    let deviation = total.frobenius_distance(&ComplexMatrix::identity(dim_in))?;
    if deviation > NORMALIZATION_TOL {
        return Err(Error::TracePreservation { deviation });
    }
    Ok(KrausChannel { dim_in, dim_out, kraus })
}

/// The three causal structures an observer can assign to the pair of
/// outcome events.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CausalFrame {
    /// The event at device A causes the event at device B.
    AlphaForward,
    /// The event at device B causes the event at device A.
    BetaReverse,
    /// Neither event causes the other.
    GammaSpacelike,
}

impl CausalFrame {
    pub const ALL: [CausalFrame; 3] = [
        CausalFrame::AlphaForward,
        CausalFrame::BetaReverse,
        CausalFrame::GammaSpacelike,
    ];

    pub fn symbol(self) -> &'static str {
        match self {
            CausalFrame::AlphaForward => "alpha",
            CausalFrame::BetaReverse => "beta",
            CausalFrame::GammaSpacelike => "gamma",
        }
    }
}

/// One two-device experiment: a state on S1, a channel S1 -> S2, a POVM for
/// device A on S1 and one for device B on S2.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    name: String,
    dims: BipartiteDims,
    rho: DensityMatrix,
    channel: KrausChannel,
    povm_a: Povm,
    povm_b: Povm,
    povm_a_alt: Option<Povm>,
    pure_fallback: bool,
}

impl Scenario {
    /// Assemble a scenario, checking that all dimensions agree and that the
    /// state is full rank unless `pure_fallback` is set.
    pub fn new(
        name: impl Into<String>,
        rho: DensityMatrix,
        channel: KrausChannel,
        povm_a: Povm,
        povm_b: Povm,
        povm_a_alt: Option<Povm>,
        pure_fallback: bool,
    ) -> Result<Self> {
        let dims = BipartiteDims::new(rho.dim(), channel.dim_out())?;
        if channel.dim_in() != dims.d1() {
            return Err(Error::dim(format!(
                "channel input dimension {} does not match state dimension {}",
                channel.dim_in(),
                dims.d1()
            ))
            .at("kraus"));
        }
        if povm_a.dim() != dims.d1() {
            return Err(Error::dim(format!("POVM A acts on {}, expected {}", povm_a.dim(), dims.d1())).at("povm_a"));
        }
        if povm_b.dim() != dims.d2() {
            return Err(Error::dim(format!("POVM B acts on {}, expected {}", povm_b.dim(), dims.d2())).at("povm_b"));
        }
        if let Some(alt) = &povm_a_alt {
            if alt.dim() != dims.d1() {
                return Err(Error::dim(format!("POVM A' acts on {}, expected {}", alt.dim(), dims.d1()))
                    .at("povm_a_alt"));
            }
        }
        if !pure_fallback {
            rho.require_full_rank("a scenario not marked pure_fallback")
                .map_err(|e| e.at("rho"))?;
        }
        Ok(Self {
            name: name.into(),
            dims,
            rho,
            channel,
            povm_a,
            povm_b,
            povm_a_alt,
            pure_fallback,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dims(&self) -> BipartiteDims {
        self.dims
    }

    pub fn rho(&self) -> &DensityMatrix {
        &self.rho
    }

    pub fn channel(&self) -> &KrausChannel {
        &self.channel
    }

    pub fn povm_a(&self) -> &Povm {
        &self.povm_a
    }

    pub fn povm_b(&self) -> &Povm {
        &self.povm_b
    }

    pub fn povm_a_alt(&self) -> Option<&Povm> {
        self.povm_a_alt.as_ref()
    }

    pub fn pure_fallback(&self) -> bool {
        self.pure_fallback
    }

    /// Same experiment with device A measuring `povm_a` instead.
    pub fn with_povm_a(&self, povm_a: Povm) -> Result<Self> {
        Self::new(
            self.name.clone(),
            self.rho.clone(),
            self.channel.clone(),
            povm_a,
            self.povm_b.clone(),
            self.povm_a_alt.clone(),
            self.pure_fallback,
        )
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::test_support::c;
    use crate::random::{random_channel, random_povm, random_state};

    #[test]
    fn state_examples() {
        let mixed = validate_state(ComplexMatrix::identity(2).scale_real(0.5)).unwrap();
        assert!(mixed.is_full_rank());
        assert!(!mixed.is_pure());

        let pure = validate_state(ComplexMatrix::diag(&[1.0, 0.0])).unwrap();
        assert!(!pure.is_full_rank());
        assert!(pure.is_pure());

        match validate_state(ComplexMatrix::diag(&[0.6, 0.5])) {
            Err(Error::Trace { trace }) => assert!((trace - 1.1).abs() < 1e-15),
            other => panic!("expected TraceError, got {other:?}"),
        }
    }

    #[test]
    fn state_rejections() {
        let nonherm = ComplexMatrix::from_rows(&[vec![c(0.5, 0.0), c(0.1, 0.0)], vec![c(0.2, 0.0), c(0.5, 0.0)]])
            .unwrap();
        assert!(matches!(validate_state(nonherm), Err(Error::Hermiticity { .. })));
        assert!(matches!(
            validate_state(ComplexMatrix::diag(&[1.2, -0.2])),
            Err(Error::Negativity { .. })
        ));
        assert!(matches!(
            validate_state(ComplexMatrix::zeros(2, 3)),
            Err(Error::Dimension(_))
        ));
    }

    #[test]
    fn validation_is_idempotent() {
        for seed in 0..20 {
            let rho = random_state(3, seed, seed % 2 == 0);
            assert_eq!(validate_state(rho.matrix().clone()).unwrap(), rho);
        }
    }

    #[test]
    fn povm_examples() {
        let z = validate_povm(vec![ComplexMatrix::diag(&[1.0, 0.0]), ComplexMatrix::diag(&[0.0, 1.0])]).unwrap();
        assert_eq!(z.len(), 2);
        assert_eq!(z.labels(), ["a0", "a1"]);

        let half = ComplexMatrix::identity(2).scale_real(0.5);
        assert!(validate_povm(vec![half.clone(), half]).is_ok());

        let p0 = ComplexMatrix::diag(&[1.0, 0.0]);
        assert!(matches!(validate_povm(vec![p0.clone(), p0]), Err(Error::Completeness { .. })));
    }

    #[test]
    fn povm_rejections() {
        let id = ComplexMatrix::identity(2);
        assert!(matches!(validate_povm(vec![id.clone()]), Err(Error::InvalidArgument(_))));
        assert!(matches!(
            validate_povm(vec![id.clone(), ComplexMatrix::zeros(3, 3)]),
            Err(Error::Dimension(_))
        ));
        let neg = validate_povm(vec![ComplexMatrix::diag(&[1.5, 0.0]), ComplexMatrix::diag(&[-0.5, 1.0])]);
        assert!(matches!(neg.unwrap_err().root(), Error::Negativity { .. }));

        let z = Povm::computational_basis(2);
        assert!(z.clone().with_labels(vec!["up".into()]).is_err());
        let z = z.with_labels(vec!["up".into(), "down".into()]).unwrap();
        assert_eq!(z.labels().len(), z.effects().len());
    }

    #[test]
    fn channel_examples() {
        for d in 2..5 {
            let id = KrausChannel::identity(d);
            assert_eq!(id.kraus().len(), 1);
        }
        // amplitude damping with gamma = 1: |0><0|, |0><1|
        let k0 = ComplexMatrix::unit(2, 0, 0);
        let k1 = ComplexMatrix::unit(2, 0, 1);
        assert!(validate_channel(vec![k0, k1], 2, 2).is_ok());

        let half = ComplexMatrix::identity(3).scale_real(0.5);
        assert!(matches!(
            validate_channel(vec![half], 3, 3),
            Err(Error::TracePreservation { .. })
        ));
        assert!(matches!(
            validate_channel(vec![ComplexMatrix::identity(2)], 2, 3),
            Err(Error::Dimension(_))
        ));
        assert!(matches!(validate_channel(vec![], 2, 2), Err(Error::Dimension(_))));
    }

    #[test]
    fn scenario_dimension_checks() {
        let rho = DensityMatrix::maximally_mixed(2);
        let ch = random_channel(2, 3, 2, 1).unwrap();
        let a = random_povm(2, 2, 2).unwrap();
        let b = random_povm(3, 2, 3).unwrap();
        assert!(Scenario::new("ok", rho.clone(), ch.clone(), a.clone(), b.clone(), None, false).is_ok());

        let err = Scenario::new("bad", rho.clone(), ch.clone(), a.clone(), a.clone(), None, false).unwrap_err();
        assert_eq!(err.path().as_deref(), Some("povm_b"));

        let pure = validate_state(ComplexMatrix::diag(&[1.0, 0.0])).unwrap();
        let err = Scenario::new("pure", pure.clone(), ch.clone(), a.clone(), b.clone(), None, false).unwrap_err();
        assert!(matches!(err.root(), Error::Rank(_)));
        assert!(Scenario::new("pure", pure, ch, a, b, None, true).is_ok());
    }

    #[test]
    fn frames_enumerate_three_variants() {
        assert_eq!(CausalFrame::ALL.len(), 3);
        assert_eq!(serde_json::to_string(&CausalFrame::GammaSpacelike).unwrap(), "\"gamma_spacelike\"");
    }
}
