//! Finite POVM families, statistical distinguishability, and the finite-time
//! effective-equilibration check.

use rand::Rng;

use crate::bounds::BoundBreakdown;
use crate::kernels::Transform;
use crate::linalg::{self, CMatrix};
use crate::oracle;
use crate::quad::CompositeGl;
use crate::spectral::SpectralState;
use crate::{Error, Result};

const COMPLETENESS_TOL: f64 = 1e-10;

/// A finite POVM: PSD effects summing to the identity.
#[derive(Debug, Clone)]
pub struct Povm {
    effects: Vec<CMatrix>,
}

impl Povm {
    pub fn new(effects: Vec<CMatrix>) -> Result<Self> {
        if effects.is_empty() {
            return Err(Error::InvalidPovm("a POVM needs at least one effect".into()));
        }
        let n = effects[0].nrows();
        let mut sum = CMatrix::zeros(n, n);
        for (r, e) in effects.iter().enumerate() {
            if e.nrows() != n || e.ncols() != n {
                return Err(Error::InvalidPovm(format!(
                    "effect {r} is {}x{}, expected {n}x{n}",
                    e.nrows(),
                    e.ncols()
                )));
            }
            if linalg::hermiticity_defect(e) > 1e-10 {
                return Err(Error::InvalidPovm(format!("effect {r} is not Hermitian")));
            }
            if linalg::min_eigenvalue(e) < -1e-10 {
                return Err(Error::InvalidPovm(format!("effect {r} is not PSD")));
            }
            sum += e;
        }
        let defect = (&sum - CMatrix::identity(n, n))
            .iter()
            .map(|z| z.norm())
            .fold(0.0f64, f64::max);
        if defect > COMPLETENESS_TOL {
            return Err(Error::InvalidPovm(format!(
                "effects sum to identity only within {defect:.3e}"
            )));
        }
        Ok(Self { effects })
    }

    /// Random POVM with `outcomes` effects: Gaussian PSD seeds symmetrized by
    /// S^{-1/2} E_r S^{-1/2} so they sum to the identity.
    pub fn random<R: Rng>(dim: usize, outcomes: usize, rng: &mut R) -> Result<Self> {
        if outcomes == 0 {
            return Err(Error::InvalidPovm("need at least one outcome".into()));
        }
        let seeds: Vec<CMatrix> = (0..outcomes).map(|_| linalg::random_psd(dim, rng)).collect();
        let mut total = CMatrix::zeros(dim, dim);
        for s in &seeds {
            total += s;
        }
        let whiten = linalg::pd_inv_sqrt(&total);
        let effects = seeds
            .into_iter()
            .map(|s| {
                let e = &whiten * s * &whiten;
                // Re-hermitize rounding residue.
                (&e + e.adjoint()).map(|z| z * 0.5)
            })
            .collect();
        Self::new(effects)
    }

    /// Two-outcome projective measurement {P, 1 - P} from an orthogonal
    /// projector.
    pub fn projective(projector: CMatrix) -> Result<Self> {
        let n = projector.nrows();
        let complement = CMatrix::identity(n, n) - &projector;
        Self::new(vec![projector, complement])
    }

    pub fn effects(&self) -> &[CMatrix] {
        &self.effects
    }

    pub fn outcomes(&self) -> usize {
        self.effects.len()
    }

    pub fn dim(&self) -> usize {
        self.effects[0].nrows()
    }
}

/// A finite family of POVMs with Q = (total outcome count)/2.
#[derive(Debug, Clone)]
pub struct PovmFamily {
    povms: Vec<Povm>,
}

impl PovmFamily {
    pub fn new(povms: Vec<Povm>) -> Result<Self> {
        if povms.is_empty() {
            return Err(Error::InvalidPovm("a family needs at least one POVM".into()));
        }
        let dim = povms[0].dim();
        if povms.iter().any(|p| p.dim() != dim) {
            return Err(Error::InvalidPovm(
                "all POVMs in a family must share one dimension".into(),
            ));
        }
        Ok(Self { povms })
    }

    pub fn povms(&self) -> &[Povm] {
        &self.povms
    }

    pub fn dim(&self) -> usize {
        self.povms[0].dim()
    }

    /// Q: half the total number of outcomes across the family.
    pub fn q_factor(&self) -> f64 {
        self.povms.iter().map(|p| p.outcomes()).sum::<usize>() as f64 / 2.0
    }
}

fn trace_product(effect: &CMatrix, rho: &CMatrix) -> f64 {
    let n = effect.nrows();
    let mut acc = 0.0;
    for i in 0..n {
        for j in 0..n {
            acc += (effect[(i, j)] * rho[(j, i)]).re;
        }
    }
    acc
}

/// Distinguishability D_𝓜(ρ₁, ρ₂) = max over the family of half the total
/// variation between outcome distributions. Lies in [0, 1], is symmetric, and
/// never exceeds the trace distance.
pub fn distinguishability(
    family: &PovmFamily,
    rho1: &CMatrix,
    rho2: &CMatrix,
) -> Result<f64> {
    let dim = family.dim();
    if rho1.nrows() != dim || rho2.nrows() != dim {
        return Err(Error::DimensionMismatch(format!(
            "states are {}x{} and {}x{}, POVMs act on dimension {dim}",
            rho1.nrows(),
            rho1.ncols(),
            rho2.nrows(),
            rho2.ncols()
        )));
    }
    let mut best = 0.0f64;
    for povm in family.povms() {
        let mut half_tv = 0.0;
        for effect in povm.effects() {
            half_tv += 0.5 * (trace_product(effect, rho1) - trace_product(effect, rho2)).abs();
        }
        best = best.max(half_tv);
    }
    Ok(best)
}

/// Both sides of the effective-equilibration estimate.
#[derive(Debug, Clone, Copy)]
pub struct EffectiveEquilibration {
    /// ⟨⟨ D_𝓜(ρ_t, ⟨⟨ρ_t⟩⟩_T) ⟩⟩_T by time quadrature.
    pub lhs: f64,
    /// Q(𝓜)·√(3𝓑) — the stated bound.
    pub rhs: f64,
    /// Q(𝓜)·√𝓑 — the tighter value the chain σ ≤ √(3S), 𝓑 = 3S actually
    /// yields.
    pub rhs_tight: f64,
}

/// Finite-time effective equilibration: the time-averaged distinguishability
/// between the evolving state and its Cesàro average, against Q·√(3𝓑) with
/// 𝓑 the assembled bound for this state and partition. D_𝓜 is evaluated per
/// time sample and then averaged.
pub fn effective_equilibration_check(
    family: &PovmFamily,
    state: &SpectralState,
    transform: &Transform,
    breakdown: &BoundBreakdown,
    n_time_samples: usize,
    t_avg: f64,
) -> Result<EffectiveEquilibration> {
    let w = oracle::bandwidth(state, transform);
    let minimum = oracle::min_time_samples(t_avg, w);
    if n_time_samples < minimum {
        return Err(Error::Undersampled {
            requested: n_time_samples,
            minimum,
        });
    }
    let cesaro = oracle::cesaro_average_state(state, transform, t_avg);
    let rule = CompositeGl::for_time_average(t_avg, w, n_time_samples);
    let mut lhs = 0.0;
    for (&t, &wt) in rule.nodes.iter().zip(&rule.weights) {
        let ct = oracle::evolve(state, transform, t).weighted_amplitudes();
        let rho_t = &ct * ct.adjoint();
        lhs += wt * distinguishability(family, &rho_t, cesaro.matrix())?;
    }
    lhs /= t_avg;
    let q = family.q_factor();
    Ok(EffectiveEquilibration {
        lhs,
        rhs: q * (3.0 * breakdown.total).sqrt(),
        rhs_tight: q * breakdown.total.sqrt(),
    })
}

/// Trace distance (1/2)‖ρ₁ - ρ₂‖₁, the Helstrom ceiling for
/// [`distinguishability`].
pub fn trace_distance(rho1: &CMatrix, rho2: &CMatrix) -> f64 {
    0.5 * linalg::trace_norm(&(rho1 - rho2))
}

/// Intermediate chain step of the effective-equilibration derivation:
/// ⟨⟨D_𝓜⟩⟩_T ≤ (1/2) Σ_l Σ_r σ_{M_lr}(T), with σ_{M_lr}(T) the
/// equilibration error of each effect taken as an observable.
pub fn half_sum_effect_sigmas(
    family: &PovmFamily,
    state: &SpectralState,
    transform: &Transform,
    t_avg: f64,
    n_time_samples: usize,
) -> Result<f64> {
    let cesaro = oracle::cesaro_average_state(state, transform, t_avg);
    let w = oracle::bandwidth(state, transform);
    let rule = CompositeGl::for_time_average(t_avg, w, n_time_samples);
    let mut total = 0.0;
    for povm in family.povms() {
        for effect in povm.effects() {
            let mean = trace_product(effect, cesaro.matrix());
            let mut var = 0.0;
            for (&t, &wt) in rule.nodes.iter().zip(&rule.weights) {
                let ct = oracle::evolve(state, transform, t).weighted_amplitudes();
                let rho_t = &ct * ct.adjoint();
                let dev = trace_product(effect, &rho_t) - mean;
                var += wt * dev * dev;
            }
            total += 0.5 * (var / t_avg).sqrt();
        }
    }
    Ok(total)
}
