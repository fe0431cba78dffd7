use std::sync::{Arc, OnceLock};

use super::hypothesis::{HypothesisSet, Piece};
use super::{state_from_angle, FamilyConfig};
use crate::error::{Error, Result};
use crate::quantum::linalg::{kron, trace_product};
use crate::quantum::{CMatrix, DensityMatrix, Povm};

/// Probability floor applied before every logarithm.
pub const P_FLOOR: f64 = 1e-300;
pub const DEFAULT_RESOLUTION_DEG: f64 = 0.5;

const ENDPOINT_EPS: f64 = 1e-9;
const MAX_CACHED_COPIES: usize = 12;
const GOLDEN_TOL_DEG: f64 = 1e-9;
const GOLDEN_MAX_ITER: usize = 200;

/// One measured round as seen by the likelihood: the element of the observed
/// outcome and the number of copies it acted on.
#[derive(Debug, Clone)]
pub struct Observation {
    pub copies: usize,
    pub element: Arc<CMatrix>,
}

impl Observation {
    pub fn new(povm: &Povm, outcome: usize, copies: usize) -> Result<Self> {
        let expected = 1usize << copies;
        if povm.dim() != expected {
            return Err(Error::DimensionMismatch {
                expected,
                got: povm.dim(),
            });
        }
        if outcome >= povm.len() {
            return Err(Error::InvalidParameter(format!(
                "outcome {outcome} out of range for a {}-outcome POVM",
                povm.len()
            )));
        }
        Ok(Observation {
            copies,
            element: Arc::new(povm.element(outcome).clone()),
        })
    }

    /// `ln max(Tr(sigma M), floor)` for a state on the right dimension.
    pub fn log_prob(&self, sigma: &CMatrix) -> f64 {
        floored_ln(trace_product(sigma, &self.element).re)
    }
}

pub(crate) fn floored_ln(p: f64) -> f64 {
    p.max(P_FLOOR).ln()
}

/// Tensor powers `rho(omega_j)^{⊗n}` of every grid state, built on demand.
#[derive(Debug)]
struct StateCache {
    family: FamilyConfig,
    powers: [OnceLock<Vec<CMatrix>>; MAX_CACHED_COPIES],
}

/// Result of a grid (optionally refined) maximum-likelihood fit.
#[derive(Debug, Clone)]
pub struct MleEstimate {
    pub omega_deg: f64,
    pub loglik: f64,
    pub rho: DensityMatrix,
    /// Whether continuous refinement moved the estimate off the grid.
    pub refined: bool,
}

/// Running log-likelihoods over a discretized hypothesis set.
#[derive(Debug, Clone)]
pub struct ParamGrid {
    angles: Vec<f64>,
    loglik: Vec<f64>,
    /// Index into `pieces` for interval points, `None` for isolated points.
    piece_of: Vec<Option<usize>>,
    pieces: Vec<Piece>,
    observations: Vec<Observation>,
    cache: Arc<OnceLock<StateCache>>,
}

/// Discretizes `set` at `resolution_deg`: open endpoints are skipped by one
/// step, closed endpoints and isolated points are included exactly.
pub fn build_grid(set: &HypothesisSet, resolution_deg: f64) -> Result<ParamGrid> {
    if !(resolution_deg > 0.0) || !resolution_deg.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "grid resolution must be positive, got {resolution_deg}"
        )));
    }
    let mut points: Vec<(f64, Option<usize>)> = Vec::new();
    for (idx, piece) in set.pieces().iter().enumerate() {
        match *piece {
            Piece::Point(p) => points.push((p, None)),
            Piece::Interval {
                lo,
                hi,
                lo_closed,
                hi_closed,
            } => {
                let start = if lo_closed { 0 } else { 1 };
                let mut k = start;
                loop {
                    let a = lo + k as f64 * resolution_deg;
                    let past_end = if hi_closed {
                        a > hi + ENDPOINT_EPS
                    } else {
                        a >= hi - ENDPOINT_EPS
                    };
                    if past_end {
                        break;
                    }
                    // snap onto a closed upper endpoint hit within rounding
                    let a = if hi_closed && (a - hi).abs() <= ENDPOINT_EPS { hi } else { a };
                    points.push((a, Some(idx)));
                    k += 1;
                }
                if hi_closed && points.last().map_or(true, |&(a, p)| p != Some(idx) || a < hi) {
                    points.push((hi, Some(idx)));
                }
            }
        }
    }
    if points.is_empty() {
        return Err(Error::EmptyGrid { resolution_deg });
    }
    points.sort_by(|a, b| a.0.total_cmp(&b.0));
    let n = points.len();
    Ok(ParamGrid {
        angles: points.iter().map(|p| p.0).collect(),
        loglik: vec![0.0; n],
        piece_of: points.iter().map(|p| p.1).collect(),
        pieces: set.pieces().to_vec(),
        observations: Vec::new(),
        cache: Arc::new(OnceLock::new()),
    })
}

impl ParamGrid {
    pub fn angles(&self) -> &[f64] {
        &self.angles
    }

    pub fn logliks(&self) -> &[f64] {
        &self.loglik
    }

    pub fn len(&self) -> usize {
        self.angles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.angles.is_empty()
    }

    pub fn observations(&self) -> &[Observation] {
        &self.observations
    }

    /// Adds the same constant to every running log-likelihood.
    pub fn shift_logliks(&mut self, delta: f64) {
        self.loglik.iter_mut().for_each(|l| *l += delta);
    }

    fn cached_powers(&self, cfg: &FamilyConfig, copies: usize) -> Option<&[CMatrix]> {
        if copies == 0 || copies > MAX_CACHED_COPIES {
            return None;
        }
        let cache = self.cache.get_or_init(|| StateCache {
            family: *cfg,
            powers: Default::default(),
        });
        if cache.family != *cfg {
            return None;
        }
        Some(cache.powers[copies - 1].get_or_init(|| {
            self.angles
                .iter()
                .map(|&w| power_of(&cfg.matrix_at(w), copies))
                .collect()
        }))
    }

    /// Pure update: returns a new grid with the round folded in.
    pub fn accumulate(
        &self,
        cfg: &FamilyConfig,
        povm: &Povm,
        copies: usize,
        outcome: usize,
    ) -> Result<ParamGrid> {
        let mut next = self.clone();
        next.accumulate_in_place(cfg, povm, copies, outcome)?;
        Ok(next)
    }

    pub fn accumulate_in_place(
        &mut self,
        cfg: &FamilyConfig,
        povm: &Povm,
        copies: usize,
        outcome: usize,
    ) -> Result<()> {
        let obs = Observation::new(povm, outcome, copies)?;
        self.push_observation(cfg, obs);
        Ok(())
    }

    pub(crate) fn push_observation(&mut self, cfg: &FamilyConfig, obs: Observation) {
        match self.cached_powers(cfg, obs.copies) {
            Some(powers) => {
                let incs: Vec<f64> = powers.iter().map(|s| obs.log_prob(s)).collect();
                for (l, inc) in self.loglik.iter_mut().zip(incs) {
                    *l += inc;
                }
            }
            None => {
                for (l, &w) in self.loglik.iter_mut().zip(&self.angles) {
                    *l += obs.log_prob(&power_of(&cfg.matrix_at(w), obs.copies));
                }
            }
        }
        self.observations.push(obs);
    }

    /// Log-likelihood of all observations at an arbitrary angle.
    pub fn log_likelihood_at(&self, cfg: &FamilyConfig, omega_deg: f64) -> f64 {
        log_likelihood(cfg, &self.observations, omega_deg)
    }

    /// Grid arg-max (ties to the smallest angle). With `refine`, an interior
    /// maximizer is polished by golden-section search over its neighboring
    /// cells; the refined value never falls below the grid value.
    pub fn mle(&self, cfg: &FamilyConfig, refine: bool) -> Result<MleEstimate> {
        let mut best = 0;
        for j in 1..self.loglik.len() {
            if self.loglik[j] > self.loglik[best] {
                best = j;
            }
        }
        let mut omega = self.angles[best];
        let mut loglik = self.loglik[best];
        let mut refined = false;
        if refine && !self.observations.is_empty() {
            if let Some((a, b)) = self.bracket(best) {
                let (w, v) = golden_max(|w| self.log_likelihood_at(cfg, w), a, b);
                if v > loglik {
                    omega = w;
                    loglik = v;
                    refined = true;
                }
            }
        }
        Ok(MleEstimate {
            omega_deg: omega,
            loglik,
            rho: state_from_angle(cfg, omega)?,
            refined,
        })
    }

    /// Refinement bracket around grid point `j`: the neighboring grid points
    /// in the same interval, or the interval end where there is none.
    fn bracket(&self, j: usize) -> Option<(f64, f64)> {
        let piece_idx = self.piece_of[j]?;
        let Piece::Interval { lo, hi, .. } = self.pieces[piece_idx] else {
            return None;
        };
        let a = if j > 0 && self.piece_of[j - 1] == Some(piece_idx) {
            self.angles[j - 1]
        } else {
            lo
        };
        let b = if j + 1 < self.angles.len() && self.piece_of[j + 1] == Some(piece_idx) {
            self.angles[j + 1]
        } else {
            hi
        };
        (b > a).then_some((a, b))
    }
}

pub(crate) fn power_of(rho: &CMatrix, copies: usize) -> CMatrix {
    let mut acc = rho.clone();
    for _ in 1..copies {
        acc = kron(&acc, rho);
    }
    acc
}

pub(crate) fn log_likelihood(cfg: &FamilyConfig, observations: &[Observation], omega_deg: f64) -> f64 {
    let rho = cfg.matrix_at(omega_deg);
    let mut powers: Vec<CMatrix> = vec![rho.clone()];
    let mut total = 0.0;
    for obs in observations {
        while powers.len() < obs.copies {
            let next = kron(powers.last().unwrap(), &rho);
            powers.push(next);
        }
        total += obs.log_prob(&powers[obs.copies - 1]);
    }
    total
}

/// Golden-section maximization over the open interval `(a, b)`; endpoints
/// are never evaluated.
fn golden_max<F: Fn(f64) -> f64>(f: F, mut a: f64, mut b: f64) -> (f64, f64) {
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    for _ in 0..GOLDEN_MAX_ITER {
        if b - a < GOLDEN_TOL_DEG {
            break;
        }
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d);
        }
    }
    if fc >= fd {
        (c, fc)
    } else {
        (d, fd)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quantum::computational_basis_povm;
    use proptest::prelude::*;

    fn set(s: &str) -> HypothesisSet {
        s.parse().unwrap()
    }

    /// P(outcome | rho(omega)) for a computational-basis measurement with r_z = 1.
    fn z_prob(omega_deg: f64, outcome: usize) -> f64 {
        let c = omega_deg.to_radians().cos();
        if outcome == 0 {
            0.5 * (1.0 + c)
        } else {
            0.5 * (1.0 - c)
        }
    }

    #[test]
    fn grid_endpoint_rules() {
        let g = build_grid(&set("{45}"), 3.0).unwrap();
        assert_eq!(g.angles(), &[45.0]);
        let g = build_grid(&set("(45,180]"), 0.5).unwrap();
        assert_eq!(g.angles()[0], 45.5);
        assert_eq!(*g.angles().last().unwrap(), 180.0);
        assert_eq!(g.len(), 270);
        assert!(g.logliks().iter().all(|&l| l == 0.0));
        let g = build_grid(&set("{45,135}"), 0.5).unwrap();
        assert_eq!(g.angles(), &[45.0, 135.0]);
        let g = build_grid(&set("[10,11)"), 0.4).unwrap();
        assert_eq!(g.angles(), &[10.0, 10.4, 10.8]);
        let g = build_grid(&set("(10,11]"), 0.4).unwrap();
        assert_eq!(g.angles(), &[10.4, 10.8, 11.0]);
        let s = set("(45,135) U (135,180)");
        let g = build_grid(&s, 0.5).unwrap();
        assert!(g.angles().iter().all(|&w| s.contains(w)));
        assert!(!g.angles().contains(&135.0));
    }

    #[test]
    fn empty_grid_is_an_error() {
        assert!(matches!(
            build_grid(&set("(10,10.3)"), 0.5),
            Err(Error::EmptyGrid { .. })
        ));
        assert!(build_grid(&set("{10}"), 0.0).is_err());
    }

    #[test]
    fn certain_outcome_adds_nothing() {
        let cfg = FamilyConfig::pure();
        let z = computational_basis_povm(1).unwrap();
        let g = build_grid(&set("{0}"), 0.5).unwrap();
        let g = g.accumulate(&cfg, &z, 1, 0).unwrap();
        assert_eq!(g.logliks(), &[0.0]);
    }

    #[test]
    fn single_point_increment_is_log_prob() {
        let cfg = FamilyConfig::pure();
        let z = computational_basis_povm(1).unwrap();
        let g0 = build_grid(&set("{60}"), 0.5).unwrap();
        let g1 = g0.accumulate(&cfg, &z, 1, 1).unwrap();
        assert_eq!(g0.logliks(), &[0.0], "original grid unchanged");
        assert!((g1.logliks()[0] - z_prob(60.0, 1).ln()).abs() < 1e-14);
    }

    #[test]
    fn rounds_accumulate_additively() {
        let cfg = FamilyConfig::new(0.9, 0.7).unwrap();
        let z1 = computational_basis_povm(1).unwrap();
        let z2 = computational_basis_povm(2).unwrap();
        let g = build_grid(&set("[0,90]"), 5.0).unwrap();
        let a = g.accumulate(&cfg, &z1, 1, 1).unwrap();
        let b = g.accumulate(&cfg, &z2, 2, 2).unwrap();
        let ab = a.accumulate(&cfg, &z2, 2, 2).unwrap();
        for j in 0..g.len() {
            assert!((ab.logliks()[j] - (a.logliks()[j] + b.logliks()[j])).abs() < 1e-12);
        }
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let cfg = FamilyConfig::pure();
        let z2 = computational_basis_povm(2).unwrap();
        let g = build_grid(&set("{45}"), 0.5).unwrap();
        assert!(matches!(
            g.accumulate(&cfg, &z2, 1, 0),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn mle_examples() {
        let cfg = FamilyConfig::pure();
        let z = computational_basis_povm(1).unwrap();

        let g = build_grid(&set("(45,180]"), 0.5).unwrap();
        assert_eq!(g.mle(&cfg, false).unwrap().omega_deg, 45.5);

        // Oracle: exhaustive evaluation of ((1+cos w)/2)^4 over the grid.
        let mut g4 = g.clone();
        for _ in 0..4 {
            g4.accumulate_in_place(&cfg, &z, 1, 0).unwrap();
        }
        let oracle = g
            .angles()
            .iter()
            .copied()
            .fold((f64::NAN, f64::NEG_INFINITY), |(bw, bv), w| {
                let v = 4.0 * z_prob(w, 0).ln();
                if v > bv {
                    (w, v)
                } else {
                    (bw, bv)
                }
            });
        assert_eq!(oracle.0, 45.5);
        assert_eq!(g4.mle(&cfg, false).unwrap().omega_deg, 45.5);

        let mut pts = build_grid(&set("{45,135}"), 0.5).unwrap();
        pts.accumulate_in_place(&cfg, &z, 1, 1).unwrap();
        pts.accumulate_in_place(&cfg, &z, 1, 1).unwrap();
        assert!(z_prob(135.0, 1).powi(2) > z_prob(45.0, 1).powi(2));
        assert_eq!(pts.mle(&cfg, false).unwrap().omega_deg, 135.0);
    }

    #[test]
    fn refinement_finds_the_continuous_maximum() {
        // Three 0s and one 1 with r_z = 1: likelihood (1+c)^3 (1-c), maximized at cos w = 1/2.
        let cfg = FamilyConfig::pure();
        let z = computational_basis_povm(1).unwrap();
        let mut g = build_grid(&set("[0,180]"), 7.0).unwrap();
        for o in [0, 0, 0, 1] {
            g.accumulate_in_place(&cfg, &z, 1, o).unwrap();
        }
        let coarse = g.mle(&cfg, false).unwrap();
        let fine = g.mle(&cfg, true).unwrap();
        assert!(fine.refined);
        assert!((fine.omega_deg - 60.0).abs() < 1e-4);
        assert!(fine.loglik >= coarse.loglik);
        let exact = 3.0 * z_prob(60.0, 0).ln() + z_prob(60.0, 1).ln();
        assert!((fine.loglik - exact).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn mle_ignores_constant_shifts(outcomes in proptest::collection::vec(0usize..2, 0..12), shift in -50.0f64..50.0) {
            let cfg = FamilyConfig::new(0.9, 0.8).unwrap();
            let z = computational_basis_povm(1).unwrap();
            let mut g = build_grid(&set("(20,160]"), 2.0).unwrap();
            for &o in &outcomes {
                g.accumulate_in_place(&cfg, &z, 1, o).unwrap();
            }
            let mut shifted = g.clone();
            shifted.shift_logliks(shift);
            prop_assert_eq!(g.mle(&cfg, false).unwrap().omega_deg, shifted.mle(&cfg, false).unwrap().omega_deg);
        }

        #[test]
        fn refined_dominates_grid_dominates_any_point(outcomes in proptest::collection::vec(0usize..4, 1..10)) {
            let cfg = FamilyConfig::new(0.95, 0.85).unwrap();
            let sic = crate::quantum::sic_povm_qubit();
            let mut g = build_grid(&set("[10,170]"), 4.0).unwrap();
            for &o in &outcomes {
                g.accumulate_in_place(&cfg, &sic, 1, o).unwrap();
            }
            let grid = g.mle(&cfg, false).unwrap();
            let refined = g.mle(&cfg, true).unwrap();
            prop_assert!(refined.loglik >= grid.loglik);
            for &l in g.logliks() {
                prop_assert!(grid.loglik >= l);
            }
        }

        #[test]
        fn accumulation_is_order_independent(outcomes in proptest::collection::vec(0usize..2, 1..8), seed in 0u64..1000) {
            use rand::seq::SliceRandom;
            use rand::SeedableRng;
            let cfg = FamilyConfig::new(0.8, 0.9).unwrap();
            let z = computational_basis_povm(1).unwrap();
            let base = build_grid(&set("[0,180]"), 10.0).unwrap();
            let mut forward = base.clone();
            for &o in &outcomes {
                forward.accumulate_in_place(&cfg, &z, 1, o).unwrap();
            }
            let mut perm = outcomes.clone();
            perm.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
            let mut shuffled = base.clone();
            for &o in &perm {
                shuffled.accumulate_in_place(&cfg, &z, 1, o).unwrap();
            }
            for (a, b) in forward.logliks().iter().zip(shuffled.logliks()) {
                prop_assert!((a - b).abs() < 1e-12);
            }
        }
    }
}
