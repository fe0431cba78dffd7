use num_complex::Complex64;
use rand::Rng;

use super::linalg::{hermitian_deviation, hermitian_eig, max_abs, trace_product, CMatrix};
use super::state::{checked_power_dim, DensityMatrix, DEFAULT_DIM_CAP, STATE_TOL};
use crate::error::{Error, Result};

/// Probabilities above this negative magnitude are clamped to zero.
pub const NEGATIVE_PROB_TOL: f64 = 1e-12;
/// Tolerance on the total probability mass.
pub const PROB_SUM_TOL: f64 = 1e-10;

/// A finite labeled measurement `{M_x}` with `Σ M_x = I`.
#[derive(Debug, Clone, PartialEq)]
pub struct Povm {
    labels: Vec<String>,
    elements: Vec<CMatrix>,
}

impl Povm {
    /// Builds and validates a POVM.
    pub fn new(labels: Vec<String>, elements: Vec<CMatrix>) -> Result<Self> {
        let povm = Povm { labels, elements };
        povm.validate()?;
        Ok(povm)
    }

    /// Wraps elements that satisfy the invariants by construction.
    pub(crate) fn from_trusted(labels: Vec<String>, elements: Vec<CMatrix>) -> Self {
        debug_assert_eq!(labels.len(), elements.len());
        Povm { labels, elements }
    }

    fn validate(&self) -> Result<()> {
        if self.elements.len() < 2 {
            return Err(Error::InvalidPovm(format!(
                "needs at least two outcomes, got {}",
                self.elements.len()
            )));
        }
        if self.labels.len() != self.elements.len() {
            return Err(Error::InvalidPovm(format!(
                "{} labels for {} elements",
                self.labels.len(),
                self.elements.len()
            )));
        }
        let d = self.elements[0].nrows();
        let mut sum = CMatrix::zeros(d, d);
        for (label, m) in self.labels.iter().zip(&self.elements) {
            if m.nrows() != d || m.ncols() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    got: m.nrows(),
                });
            }
            let dev = hermitian_deviation(m);
            if dev > STATE_TOL {
                return Err(Error::InvalidPovm(format!(
                    "element `{label}` is not Hermitian ({dev:e})"
                )));
            }
            let min = hermitian_eig(m)?.values.last().copied().unwrap_or(0.0);
            if min < -STATE_TOL {
                return Err(Error::InvalidPovm(format!(
                    "element `{label}` is not PSD (min eigenvalue {min:e})"
                )));
            }
            sum += m;
        }
        let dev = max_abs(&(sum - CMatrix::identity(d, d)));
        if dev > STATE_TOL {
            return Err(Error::InvalidPovm(format!(
                "elements sum to identity only within {dev:e}"
            )));
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.elements[0].nrows()
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn elements(&self) -> &[CMatrix] {
        &self.elements
    }

    pub fn element(&self, outcome: usize) -> &CMatrix {
        &self.elements[outcome]
    }

    pub fn label(&self, outcome: usize) -> &str {
        &self.labels[outcome]
    }
}

/// Outcome probabilities `P(x | rho, M)`.
#[derive(Debug, Clone, PartialEq)]
pub struct OutcomeDistribution {
    pub labels: Vec<String>,
    pub probs: Vec<f64>,
}

impl OutcomeDistribution {
    /// Clamps tiny negatives and checks normalization.
    pub fn new(labels: Vec<String>, raw: Vec<f64>) -> Result<Self> {
        if labels.len() != raw.len() {
            return Err(Error::InvalidDistribution(format!(
                "{} labels for {} probabilities",
                labels.len(),
                raw.len()
            )));
        }
        let probs = clamp_probabilities(&raw)?;
        Ok(OutcomeDistribution { labels, probs })
    }
}

fn clamp_probabilities(raw: &[f64]) -> Result<Vec<f64>> {
    let mut total = 0.0;
    let mut out = Vec::with_capacity(raw.len());
    for &p in raw {
        if !p.is_finite() || p < -NEGATIVE_PROB_TOL {
            return Err(Error::InvalidDistribution(format!("probability {p:e}")));
        }
        total += p;
        out.push(p.clamp(0.0, 1.0));
    }
    if (total - 1.0).abs() > PROB_SUM_TOL {
        return Err(Error::InvalidDistribution(format!(
            "probabilities sum to {total}"
        )));
    }
    Ok(out)
}

/// Raw Born probabilities `Re Tr(rho M_x)`, without clamping.
pub fn born_probabilities(rho: &CMatrix, povm: &Povm) -> Result<Vec<f64>> {
    if rho.nrows() != povm.dim() {
        return Err(Error::DimensionMismatch {
            expected: povm.dim(),
            got: rho.nrows(),
        });
    }
    Ok(povm
        .elements
        .iter()
        .map(|m| trace_product(rho, m).re)
        .collect())
}

/// Born's rule: `probs[x] = Tr(rho M_x)`.
pub fn born_distribution(rho: &DensityMatrix, povm: &Povm) -> Result<OutcomeDistribution> {
    let raw = born_probabilities(rho.matrix(), povm)?;
    Ok(OutcomeDistribution {
        labels: povm.labels.clone(),
        probs: clamp_probabilities(&raw)?,
    })
}

/// Draws an outcome index. One uniform draw per call, so the result is a
/// deterministic function of the stream state.
pub fn sample_outcome<R: Rng + ?Sized>(dist: &OutcomeDistribution, rng: &mut R) -> usize {
    sample_index(&dist.probs, rng)
}

pub(crate) fn sample_index<R: Rng + ?Sized>(probs: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.gen();
    let total: f64 = probs.iter().sum();
    let target = u * total;
    let mut acc = 0.0;
    let mut last_positive = 0;
    for (i, &p) in probs.iter().enumerate() {
        if p > 0.0 {
            last_positive = i;
            acc += p;
            if target < acc {
                return i;
            }
        }
    }
    last_positive
}

/// `n`-bit label of basis index `x`, qubit 1 as the most significant bit.
pub fn bit_label(x: usize, n_qubits: usize) -> String {
    (0..n_qubits)
        .map(|k| {
            if (x >> (n_qubits - 1 - k)) & 1 == 1 {
                '1'
            } else {
                '0'
            }
        })
        .collect()
}

/// `{|x><x|}` over `n_qubits` qubits.
pub fn computational_basis_povm(n_qubits: usize) -> Result<Povm> {
    if n_qubits == 0 {
        return Err(Error::InvalidParameter("need at least one qubit".into()));
    }
    let dim = checked_power_dim(2, n_qubits, DEFAULT_DIM_CAP)?;
    let mut labels = Vec::with_capacity(dim);
    let mut elements = Vec::with_capacity(dim);
    for x in 0..dim {
        let mut m = CMatrix::zeros(dim, dim);
        m[(x, x)] = Complex64::new(1.0, 0.0);
        labels.push(bit_label(x, n_qubits));
        elements.push(m);
    }
    Ok(Povm::from_trusted(labels, elements))
}

/// Bloch vectors of the regular tetrahedron used by [`sic_povm_qubit`].
pub fn tetrahedron_bloch_vectors() -> [[f64; 3]; 4] {
    let s2 = 2f64.sqrt();
    let s23 = (2.0f64 / 3.0).sqrt();
    [
        [0.0, 0.0, 1.0],
        [2.0 * s2 / 3.0, 0.0, -1.0 / 3.0],
        [-s2 / 3.0, s23, -1.0 / 3.0],
        [-s2 / 3.0, -s23, -1.0 / 3.0],
    ]
}

/// Tetrahedral qubit SIC-POVM, elements `(I + r_k·σ)/4`.
pub fn sic_povm_qubit() -> Povm {
    let elements = tetrahedron_bloch_vectors()
        .iter()
        .map(|&[x, y, z]| {
            CMatrix::from_row_slice(
                2,
                2,
                &[
                    Complex64::new(0.25 * (1.0 + z), 0.0),
                    Complex64::new(0.25 * x, -0.25 * y),
                    Complex64::new(0.25 * x, 0.25 * y),
                    Complex64::new(0.25 * (1.0 - z), 0.0),
                ],
            )
        })
        .collect();
    let labels = (0..4).map(|k| format!("s{k}")).collect();
    Povm::from_trusted(labels, elements)
}
