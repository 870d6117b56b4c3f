//! Brute-force verification oracle.
//!
//! Everything here evaluates the exact discretized dynamics directly — phase
//! multiplies, dense matrices, composite Gauss-Legendre time quadrature and
//! SVD trace norms — and shares no code with the bound engine beyond `sinc`.
//! Agreement between the two paths is therefore evidence, not tautology.

use num_complex::Complex64;

use crate::bounds::{self, FiniteDimSystem};
use crate::kernels::{cesaro_kernel, sup_f_over_gap_interval, KernelParams, Transform};
use crate::linalg::{self, CMatrix, CVector};
use crate::quad::CompositeGl;
use crate::spectral::{DensityMatrix, Observable, Partition, SpectralState};
use crate::{Error, Result};

pub use crate::linalg::{trace_norm, trace_norm_via_gram};

/// Unitary evolution by time `t`: amplitude at node `x_k` picks up the phase
/// `e^{-i f(x_k) t}`, where `f` is the dynamical frequency map. Norm is
/// preserved exactly.
pub fn evolve(state: &SpectralState, transform: &Transform, t: f64) -> SpectralState {
    let grid = state.grid().clone();
    let amplitudes = state
        .amplitudes()
        .iter()
        .zip(grid.nodes())
        .map(|(a, &x)| a * Complex64::from_polar(1.0, -transform.eval(x) * t))
        .collect();
    SpectralState::raw(grid, amplitudes)
}

/// Dynamical frequencies f(x_k) of every grid node.
fn frequencies(state: &SpectralState, transform: &Transform) -> Vec<f64> {
    state
        .grid()
        .nodes()
        .iter()
        .map(|&x| transform.eval(x))
        .collect()
}

/// Spectral bandwidth: the spread of the dynamical frequencies.
pub fn bandwidth(state: &SpectralState, transform: &Transform) -> f64 {
    let f = frequencies(state, transform);
    let lo = f.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = f.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    hi - lo
}

/// Minimum admissible number of time samples for averages over `[0, T]`:
/// 8·T·bandwidth/(2π), i.e. eight samples per period of the fastest coherence.
pub fn min_time_samples(t_avg: f64, bandwidth: f64) -> usize {
    ((8.0 * t_avg * bandwidth / (2.0 * std::f64::consts::PI)).ceil() as usize).max(16)
}

fn time_rule(
    state: &SpectralState,
    transform: &Transform,
    t_avg: f64,
    n_time_samples: usize,
) -> Result<CompositeGl> {
    let w = bandwidth(state, transform);
    let minimum = min_time_samples(t_avg, w);
    if n_time_samples < minimum {
        return Err(Error::Undersampled {
            requested: n_time_samples,
            minimum,
        });
    }
    Ok(CompositeGl::for_time_average(t_avg, w, n_time_samples))
}

/// Finite-T Cesàro average ⟨⟨ρ_t⟩⟩_T of a pure state, via the closed-form
/// kernel: entry (k, l) is c_k c̄_l · ⟨⟨e^{-it(f_k - f_l)}⟩⟩_T. Trace one and
/// positivity hold by construction (the T-average is completely positive).
pub fn cesaro_average_state(
    state: &SpectralState,
    transform: &Transform,
    t_avg: f64,
) -> DensityMatrix {
    let c = state.weighted_amplitudes();
    let f = frequencies(state, transform);
    let n = c.len();
    let mut m = CMatrix::zeros(n, n);
    for k in 0..n {
        for l in 0..n {
            m[(k, l)] = c[k] * c[l].conj() * cesaro_kernel(f[k] - f[l], t_avg);
        }
    }
    DensityMatrix::raw(state.grid().clone(), m)
}

/// Cesàro average computed by direct time quadrature of U_t ρ₀ U_t†,
/// independent of the closed-form kernel.
pub fn cesaro_average_state_quadrature(
    state: &SpectralState,
    transform: &Transform,
    t_avg: f64,
    min_points: usize,
) -> DensityMatrix {
    let w = bandwidth(state, transform);
    let rule = CompositeGl::for_time_average(t_avg, w, min_points);
    let n = state.grid().len();
    let mut acc = CMatrix::zeros(n, n);
    for (&t, &wt) in rule.nodes.iter().zip(&rule.weights) {
        let ct = evolve(state, transform, t).weighted_amplitudes();
        for k in 0..n {
            for l in 0..n {
                acc[(k, l)] += ct[k] * ct[l].conj() * wt;
            }
        }
    }
    DensityMatrix::raw(state.grid().clone(), acc.map(|z| z / t_avg))
}

/// Tr{A ρ_t} at one instant, for weighted amplitudes evolved to time t.
fn instant_trace(observable: &Observable, ct: &CVector) -> Complex64 {
    observable.expectation(ct)
}

/// Tr{A 𝒫_Δ(ρ_t)}: block-diagonal quadratic form.
fn instant_dephased_trace(
    observable: &Observable,
    ct: &CVector,
    ranges: &[std::ops::Range<usize>],
) -> Complex64 {
    let a = observable.kernel();
    let mut acc = Complex64::new(0.0, 0.0);
    for range in ranges {
        for k in range.clone() {
            for l in range.clone() {
                acc += ct[k].conj() * a[(k, l)] * ct[l];
            }
        }
    }
    acc
}

/// Empirical equilibration-on-average error
/// σ²_A(T) = ⟨⟨ |Tr{A ρ_t} - Tr{A ⟨⟨ρ_t⟩⟩_T}|² ⟩⟩_T
/// by composite Gauss-Legendre time quadrature.
pub fn empirical_sigma_sq(
    state: &SpectralState,
    observable: &Observable,
    transform: &Transform,
    t_avg: f64,
    n_time_samples: usize,
) -> Result<f64> {
    let rule = time_rule(state, transform, t_avg, n_time_samples)?;
    let cesaro = cesaro_average_state(state, transform, t_avg);
    let mean = observable.trace_with(&cesaro);
    let value = rule
        .nodes
        .iter()
        .zip(&rule.weights)
        .map(|(&t, &w)| {
            let ct = evolve(state, transform, t).weighted_amplitudes();
            w * (instant_trace(observable, &ct) - mean).norm_sqr()
        })
        .sum::<f64>()
        / t_avg;
    Ok(value)
}

/// Empirical dephased-sector deviation
/// 𝒟_A(T, Δ) = ⟨⟨ |Tr{A 𝒫_Δ(ρ_t)} - Tr{A 𝒫_Δ(⟨⟨ρ_t⟩⟩_T)}|² ⟩⟩_T.
pub fn empirical_d_term(
    state: &SpectralState,
    observable: &Observable,
    partition: &Partition,
    transform: &Transform,
    t_avg: f64,
    n_time_samples: usize,
) -> Result<f64> {
    let rule = time_rule(state, transform, t_avg, n_time_samples)?;
    let ranges: Vec<_> = (0..partition.count())
        .map(|i| partition.node_range(state.grid(), i))
        .collect::<Result<_>>()?;
    let cesaro = cesaro_average_state(state, transform, t_avg).dephase(partition)?;
    let mean = observable.trace_with(&cesaro);
    let value = rule
        .nodes
        .iter()
        .zip(&rule.weights)
        .map(|(&t, &w)| {
            let ct = evolve(state, transform, t).weighted_amplitudes();
            let z = instant_dephased_trace(observable, &ct, &ranges);
            w * (z - mean).norm_sqr()
        })
        .sum::<f64>()
        / t_avg;
    Ok(value)
}

/// Empirical cross-coherence term
/// ℛ_A(T, Δ) = ⟨⟨ |Tr{A Σ_{i≠j} P_i ρ_t P_j}|² ⟩⟩_T.
pub fn empirical_r_term(
    state: &SpectralState,
    observable: &Observable,
    partition: &Partition,
    transform: &Transform,
    t_avg: f64,
    n_time_samples: usize,
) -> Result<f64> {
    let rule = time_rule(state, transform, t_avg, n_time_samples)?;
    let ranges: Vec<_> = (0..partition.count())
        .map(|i| partition.node_range(state.grid(), i))
        .collect::<Result<_>>()?;
    let value = rule
        .nodes
        .iter()
        .zip(&rule.weights)
        .map(|(&t, &w)| {
            let ct = evolve(state, transform, t).weighted_amplitudes();
            let full = instant_trace(observable, &ct);
            let deph = instant_dephased_trace(observable, &ct, &ranges);
            w * (full - deph).norm_sqr()
        })
        .sum::<f64>()
        / t_avg;
    Ok(value)
}

/// Empirical coherence-norm term
/// 𝒦(T, Δ) = (Σ_{i≠j} ‖P_i ⟨⟨ρ_t⟩⟩_T P_j‖₁)², time-independent once T is fixed.
pub fn empirical_k_term(
    state: &SpectralState,
    partition: &Partition,
    transform: &Transform,
    t_avg: f64,
) -> Result<f64> {
    let cesaro = cesaro_average_state(state, transform, t_avg);
    let mut sum = 0.0;
    for i in 0..partition.count() {
        for j in 0..partition.count() {
            if i == j {
                continue;
            }
            let block = cesaro.cell_block(partition, i, j)?;
            sum += trace_norm(&block);
        }
    }
    Ok(sum * sum)
}

/// Kernel Γ(t, x, y) entering the coherence-subsector estimate: the constant
/// kernel, the instantaneous phase at fixed t, or the Cesàro average at
/// averaging time T.
#[derive(Debug, Clone, Copy)]
pub enum GammaKernel {
    Constant,
    Instantaneous { t: f64 },
    Cesaro { t_avg: f64 },
}

impl GammaKernel {
    pub fn eval(&self, x: f64, y: f64) -> Complex64 {
        match self {
            Self::Constant => Complex64::new(1.0, 0.0),
            Self::Instantaneous { t } => Complex64::from_polar(1.0, -t * (x - y)),
            Self::Cesaro { t_avg } => cesaro_kernel(x - y, *t_avg),
        }
    }

    /// ∂_y Γ(t, x, y).
    pub fn eval_dy(&self, x: f64, y: f64) -> Complex64 {
        match self {
            Self::Constant => Complex64::new(0.0, 0.0),
            Self::Instantaneous { t } => {
                Complex64::i() * *t * Complex64::from_polar(1.0, -t * (x - y))
            }
            Self::Cesaro { t_avg } => {
                // ∂_y c(x - y) = -c'(ω)|_{ω = x - y}; recover the phase of c'
                // from the analytic form c' = e^{-iTω/2}[(-iT/2) sinc + (T/2) sinc'].
                let omega = x - y;
                let u = 0.5 * t_avg * omega;
                let phase = Complex64::from_polar(1.0, -u);
                let cprime = phase
                    * Complex64::new(
                        0.5 * t_avg * crate::kernels::sinc_deriv(u),
                        -0.5 * t_avg * crate::kernels::sinc(u),
                    );
                -cprime
            }
        }
    }
}

/// ρ_Γ := ∫∫ Γ(t, x, y) Ê(dx) ρ₀ Ê(dy) on the grid: entrywise product of the
/// kernel with the pure-state density matrix.
fn gamma_state(state: &SpectralState, kernel: &GammaKernel) -> DensityMatrix {
    let c = state.weighted_amplitudes();
    let nodes = state.grid().nodes();
    let n = c.len();
    let mut m = CMatrix::zeros(n, n);
    for k in 0..n {
        for l in 0..n {
            m[(k, l)] = c[k] * c[l].conj() * kernel.eval(nodes[k], nodes[l]);
        }
    }
    DensityMatrix::raw(state.grid().clone(), m)
}

/// Coherence-subsector estimate, lhs and rhs:
/// ‖P(Δ_i) ρ_Γ P(Δ_j)‖₁ ≤ sup_{(x,y)∈Δ_i×Δ_j} (2|Γ| + |Δ_j||∂_yΓ|),
/// with both sides exactly zero when the state carries no weight in either
/// cell.
pub fn verify_lemma1(
    state: &SpectralState,
    partition: &Partition,
    kernel: &GammaKernel,
    i: usize,
    j: usize,
) -> Result<(f64, f64)> {
    if i == j {
        return Err(Error::EqualCells(i));
    }
    let beta_i = state.beta(partition, i)?;
    let beta_j = state.beta(partition, j)?;
    if beta_i == 0.0 || beta_j == 0.0 {
        return Ok((0.0, 0.0));
    }
    let rho = gamma_state(state, kernel);
    let lhs = trace_norm(&rho.cell_block(partition, i, j)?);
    let rhs = lemma1_rhs(partition, kernel, i, j);
    Ok((lhs, rhs))
}

/// The cell-sampled supremum on the rhs of the coherence-subsector estimate.
pub fn lemma1_rhs(partition: &Partition, kernel: &GammaKernel, i: usize, j: usize) -> f64 {
    let delta = partition.width();
    match kernel {
        GammaKernel::Constant => 2.0,
        GammaKernel::Instantaneous { t } => 2.0 + delta * t.abs(),
        GammaKernel::Cesaro { t_avg } => {
            let (ai, bi) = partition.cell_interval(i);
            let (aj, bj) = partition.cell_interval(j);
            let params = KernelParams::new(*t_avg, delta).expect("positive T and Δ");
            sup_f_over_gap_interval(&params, ai - bj, bi - aj).sup
        }
    }
}

/// Report from the integration-by-parts identity check.
#[derive(Debug, Clone, Copy)]
pub struct IbpReport {
    /// Max entrywise residual between the two sides.
    pub residual: f64,
    /// Number of quadrature panels per smooth segment of the y-integral.
    pub panels_per_segment: usize,
}

/// Verify the operator identity
/// ∫_{Δ_j} Ĵ(y) Ê(dy) = Ĵ(b_j) P((-∞,b_j]) - Ĵ(a_j) P((-∞,a_j]) - ∫_{Δ_j} Ĵ'(y) P((-∞,y]) dy
/// with Ĵ(y) = T̂(y) ρ₀ and T̂(y) = ∫_{Δ_i} Γ(t, x, y) Ê(dx).
///
/// On the grid the left side is exactly P(Δ_i) ρ_Γ P(Δ_j); the right side's
/// y-integral is evaluated by composite trapezoid on each smooth segment
/// between consecutive nodes (the projector P((-∞,y]) jumps there), so the
/// residual shrinks at the trapezoid's second order as `panels_per_segment`
/// grows.
pub fn verify_integration_by_parts_identity(
    state: &SpectralState,
    partition: &Partition,
    i: usize,
    j: usize,
    kernel: &GammaKernel,
    panels_per_segment: usize,
) -> Result<IbpReport> {
    if i == j {
        return Err(Error::EqualCells(i));
    }
    partition.check_cell(i)?;
    partition.check_cell(j)?;
    let grid = state.grid();
    let nodes = grid.nodes();
    let n = grid.len();
    let rho0 = state.density_matrix();
    let range_i = partition.node_range(grid, i)?;
    let range_j = partition.node_range(grid, j)?;
    let (aj, bj) = partition.cell_interval(j);

    // T̂(y) and Ĵ(y) = T̂(y) ρ₀: T̂ is diagonal and supported on cell i.
    let j_of = |y: f64| -> CMatrix {
        let mut m = CMatrix::zeros(n, n);
        for k in range_i.clone() {
            let g = kernel.eval(nodes[k], y);
            for l in 0..n {
                m[(k, l)] = g * rho0.matrix()[(k, l)];
            }
        }
        m
    };
    let jprime_of = |y: f64| -> CMatrix {
        let mut m = CMatrix::zeros(n, n);
        for k in range_i.clone() {
            let g = kernel.eval_dy(nodes[k], y);
            for l in 0..n {
                m[(k, l)] = g * rho0.matrix()[(k, l)];
            }
        }
        m
    };
    // P((-∞, y]): diagonal indicator of nodes ≤ y, applied on the right as
    // column selection.
    let apply_proj = |m: &CMatrix, y: f64| -> CMatrix {
        let cutoff = nodes.partition_point(|&x| x <= y);
        let mut out = m.clone();
        for col in cutoff..n {
            for row in 0..n {
                out[(row, col)] = Complex64::new(0.0, 0.0);
            }
        }
        out
    };

    // Left side: the (i, j) block of ρ_Γ embedded in the full space.
    let rho_g = gamma_state(state, kernel);
    let mut lhs = CMatrix::zeros(n, n);
    for r in range_i.clone() {
        for c in range_j.clone() {
            lhs[(r, c)] = rho_g.matrix()[(r, c)];
        }
    }

    // Right side: boundary terms plus the y-integral split at the nodes
    // inside Δ_j (the projector is constant between consecutive nodes).
    let mut rhs = apply_proj(&j_of(bj), bj) - apply_proj(&j_of(aj), aj);
    let mut breakpoints = vec![aj];
    for l in range_j.clone() {
        breakpoints.push(nodes[l]);
    }
    breakpoints.push(bj);
    let panels = panels_per_segment.max(1);
    for seg in breakpoints.windows(2) {
        let (s0, s1) = (seg[0], seg[1]);
        if s1 <= s0 {
            continue;
        }
        let h = (s1 - s0) / panels as f64;
        let mut integral = CMatrix::zeros(n, n);
        for p in 0..=panels {
            let y = s0 + p as f64 * h;
            let w = if p == 0 || p == panels { 0.5 } else { 1.0 };
            integral += jprime_of(y).map(|z| z * (w * h));
        }
        // The projector is constant on the open segment; evaluate it at the
        // midpoint to pick the correct branch.
        rhs -= apply_proj(&integral, 0.5 * (s0 + s1));
    }

    let residual = (&lhs - &rhs).iter().map(|z| z.norm()).fold(0.0f64, f64::max);
    Ok(IbpReport {
        residual,
        panels_per_segment: panels,
    })
}

/// Check ‖T̂(y)‖ ≤ sup_{x∈Δ_i} |Γ(t, x, y)|: the largest singular value of
/// the dense T̂(y) against a densely sampled sup over the cell.
pub fn verify_t_operator_norm(
    state: &SpectralState,
    partition: &Partition,
    i: usize,
    y: f64,
    kernel: &GammaKernel,
) -> Result<(f64, f64)> {
    let grid = state.grid();
    let range = partition.node_range(grid, i)?;
    let n = grid.len();
    let mut t_mat = CMatrix::zeros(n, n);
    for k in range {
        t_mat[(k, k)] = kernel.eval(grid.nodes()[k], y);
    }
    let lhs = t_mat
        .singular_values()
        .iter()
        .cloned()
        .fold(0.0f64, f64::max);
    let (a, b) = partition.cell_interval(i);
    let samples = 4000;
    let mut rhs = 0.0f64;
    for s in 0..=samples {
        let x = a + (b - a) * s as f64 / samples as f64;
        rhs = rhs.max(kernel.eval(x, y).norm());
    }
    Ok((lhs, rhs))
}

/// Dephased-sector deviation against its closed-form bound:
/// lhs = max over the observable family of the empirical 𝒟, rhs = ℱ(T, Δ).
pub fn verify_lemma2(
    state: &SpectralState,
    partition: &Partition,
    transform: &Transform,
    t_avg: f64,
    observables: &[Observable],
    n_time_samples: usize,
    tau_samples: usize,
) -> Result<(f64, f64)> {
    if observables.is_empty() {
        return Err(Error::Invalid("empty observable family".into()));
    }
    let mut lhs = 0.0f64;
    for obs in observables {
        lhs = lhs.max(empirical_d_term(
            state,
            obs,
            partition,
            transform,
            t_avg,
            n_time_samples,
        )?);
    }
    let params = KernelParams::new(t_avg, partition.width())?;
    let rhs = bounds::f_term(state, partition, &params, tau_samples, transform)?;
    Ok((lhs, rhs))
}

/// Fidelity inequality for PSD matrices:
/// ‖A - B‖₁ ≤ √(Tr²{A + B} - 4 F²(A, B)), with F(A, B) = ‖A^{1/2} B^{1/2}‖₁.
pub fn verify_fidelity_inequality(a: &CMatrix, b: &CMatrix) -> Result<(f64, f64)> {
    for (name, m) in [("first", a), ("second", b)] {
        if linalg::hermiticity_defect(m) > 1e-10 {
            return Err(Error::Invalid(format!("{name} argument is not Hermitian")));
        }
        if linalg::min_eigenvalue(m) < -1e-10 {
            return Err(Error::Invalid(format!("{name} argument is not PSD")));
        }
    }
    let lhs = trace_norm(&(a - b));
    let fid = trace_norm(&(linalg::psd_sqrt(a) * linalg::psd_sqrt(b)));
    let tr: f64 = (0..a.nrows()).map(|k| (a[(k, k)] + b[(k, k)]).re).sum();
    let rhs_sq = tr * tr - 4.0 * fid * fid;
    Ok((lhs, rhs_sq.max(0.0).sqrt()))
}

pub use crate::bounds::cross_index_set;

/// Cross-term estimate: the empirical ℛ against
/// Σ_{(i,j,l,k)} ‖Ĝ(Δ_i, Δ_l) ℰ_T(σ₀) Ĝ(Δ_j, Δ_k)‖₁ + Σ_i β_i²,
/// evaluated on the tensor-squared grid restricted to the state's support
/// (exact for the rank-one σ₀ = ρ₀ ⊗ ρ₀).
pub fn verify_lemma3(
    state: &SpectralState,
    partition: &Partition,
    transform: &Transform,
    t_avg: f64,
    observable: &Observable,
    n_time_samples: usize,
    dim_cap: usize,
) -> Result<(f64, f64)> {
    let lhs = empirical_r_term(state, observable, partition, transform, t_avg, n_time_samples)?;

    // Support restriction.
    let c = state.weighted_amplitudes();
    let f = frequencies(state, transform);
    let support: Vec<usize> = (0..c.len()).filter(|&k| c[k].norm_sqr() > 0.0).collect();
    let s = support.len();
    let doubled = s * s;
    if doubled > dim_cap {
        return Err(Error::DoubledSpaceTooLarge {
            dim: doubled,
            cap: dim_cap,
        });
    }

    // Which support node belongs to which cell.
    let mut cell_of = vec![usize::MAX; support.len()];
    let occupied = state.occupied_cells(partition)?;
    for (idx, &k) in support.iter().enumerate() {
        for &cell in &occupied {
            let range = partition.node_range(state.grid(), cell)?;
            if range.contains(&k) {
                cell_of[idx] = cell;
                break;
            }
        }
    }

    // ℰ_T(σ₀) on the doubled support: entry ((p,q),(r,s)) =
    // d_(p,q) d̄_(r,s) ⟨⟨e^{-it(f_p - f_r + f_q - f_s)}⟩⟩_T with d = c ⊗ c.
    let mut row_of_cell: std::collections::HashMap<(usize, usize), Vec<usize>> =
        std::collections::HashMap::new();
    for (pi, _) in support.iter().enumerate() {
        for (qi, _) in support.iter().enumerate() {
            let key = (cell_of[pi], cell_of[qi]);
            row_of_cell.entry(key).or_default().push(pi * s + qi);
        }
    }
    let amp = |flat: usize| -> Complex64 {
        let p = support[flat / s];
        let q = support[flat % s];
        c[p] * c[q]
    };
    let freq = |flat: usize| -> f64 {
        let p = support[flat / s];
        let q = support[flat % s];
        f[p] + f[q]
    };

    let mut rhs = 0.0;
    for (i, j, l, k) in cross_index_set(&occupied) {
        let rows = match row_of_cell.get(&(i, l)) {
            Some(r) => r,
            None => continue,
        };
        let cols = match row_of_cell.get(&(j, k)) {
            Some(r) => r,
            None => continue,
        };
        let mut block = CMatrix::zeros(rows.len(), cols.len());
        for (a, &ra) in rows.iter().enumerate() {
            for (b, &cb) in cols.iter().enumerate() {
                block[(a, b)] =
                    amp(ra) * amp(cb).conj() * cesaro_kernel(freq(ra) - freq(cb), t_avg);
            }
        }
        rhs += trace_norm(&block);
    }
    let betas = state.betas(partition)?;
    rhs += betas.iter().map(|b| b * b).sum::<f64>();
    Ok((lhs, rhs))
}

/// Hilbert-Schmidt distance between the finite-T Cesàro average of a
/// finite-dimensional system and its fully dephased state; decays as O(1/T).
pub fn finite_dim_dephasing(system: &FiniteDimSystem, t_avg: f64) -> f64 {
    let rho = system.rho0();
    let d = rho.nrows();
    let mut dist_sq = 0.0;
    for a in 0..d {
        for b in 0..d {
            let (na, nb) = (system.block_of(a), system.block_of(b));
            if na == nb {
                continue;
            }
            let omega = system.eigenvalues()[na] - system.eigenvalues()[nb];
            dist_sq += rho[(a, b)].norm_sqr() * cesaro_kernel(omega, t_avg).norm_sqr();
        }
    }
    dist_sq.sqrt()
}

/// Exact infinite-time average of the deviation for a finite-dimensional
/// system with non-degenerate gaps:
/// σ²(∞) = Σ_{n≠m} |Tr{P_n ρ₀ P_m A}|².
pub fn short_sigma_sq_infinity(system: &FiniteDimSystem, observable: &CMatrix) -> f64 {
    let rho = system.rho0();
    let n_blocks = system.eigenvalues().len();
    let mut total = 0.0;
    for n in 0..n_blocks {
        for m in 0..n_blocks {
            if n == m {
                continue;
            }
            // Tr{P_n ρ P_m A} = Σ_{a∈n, b∈m} ρ_ab A_ba
            let mut z = Complex64::new(0.0, 0.0);
            for a in system.block_range(n) {
                for b in system.block_range(m) {
                    z += rho[(a, b)] * observable[(b, a)];
                }
            }
            total += z.norm_sqr();
        }
    }
    total
}

/// Time-quadrature estimate of σ²(T) for a finite-dimensional system, used to
/// watch the finite-T average approach the infinite-time oracle.
pub fn finite_dim_sigma_sq(
    system: &FiniteDimSystem,
    observable: &CMatrix,
    t_avg: f64,
    min_points: usize,
) -> f64 {
    let rho = system.rho0();
    let d = rho.nrows();
    let evs: Vec<f64> = (0..d).map(|a| system.eigenvalues()[system.block_of(a)]).collect();
    let band = evs.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
        - evs.iter().cloned().fold(f64::INFINITY, f64::min);
    let rule = CompositeGl::for_time_average(t_avg, band, min_points);
    // ⟨⟨ρ⟩⟩_T entry (a,b): ρ_ab K(λ_a - λ_b, T); Tr{A ⟨⟨ρ⟩⟩_T}.
    let mut mean = Complex64::new(0.0, 0.0);
    for a in 0..d {
        for b in 0..d {
            mean += observable[(b, a)] * rho[(a, b)] * cesaro_kernel(evs[a] - evs[b], t_avg);
        }
    }
    rule.nodes
        .iter()
        .zip(&rule.weights)
        .map(|(&t, &w)| {
            let mut tr = Complex64::new(0.0, 0.0);
            for a in 0..d {
                for b in 0..d {
                    tr += observable[(b, a)]
                        * rho[(a, b)]
                        * Complex64::from_polar(1.0, -(evs[a] - evs[b]) * t);
                }
            }
            w * (tr - mean).norm_sqr()
        })
        .sum::<f64>()
        / t_avg
}

/// Evolved expectation value Tr{A ρ_t}, exposed for conservation checks.
pub fn expectation_at(
    state: &SpectralState,
    observable: &Observable,
    transform: &Transform,
    t: f64,
) -> Complex64 {
    let ct = evolve(state, transform, t).weighted_amplitudes();
    instant_trace(observable, &ct)
}

/// Convenience: weighted amplitudes of the evolved state as a plain vector.
pub fn evolved_weighted(state: &SpectralState, transform: &Transform, t: f64) -> CVector {
    evolve(state, transform, t).weighted_amplitudes()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::build_uniform_grid;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::sync::Arc;

    fn setup(n: usize, m: usize, seed: u64) -> (Arc<crate::SpectrumGrid>, Partition, SpectralState) {
        let grid = Arc::new(build_uniform_grid(0.0, 1.0, n).unwrap());
        let part = Partition::tile(&grid, m).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let state = SpectralState::random(grid.clone(), &mut rng);
        (grid, part, state)
    }

    #[test]
    fn evolution_is_unitary_and_trivial_at_zero() {
        let (_, _, state) = setup(32, 4, 1);
        let id = Transform::Identity;
        let at_zero = evolve(&state, &id, 0.0);
        for (a, b) in state.amplitudes().iter().zip(at_zero.amplitudes()) {
            assert_eq!(a, b);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..20 {
            let t: f64 = rng.gen_range(0.0..500.0);
            let evolved = evolve(&state, &id, t);
            assert_abs_diff_eq!(evolved.norm_sq(), 1.0, epsilon = 1e-10);
        }
    }

    #[test]
    fn energy_is_conserved() {
        let (grid, _, state) = setup(24, 4, 3);
        // Diagonal observable with entries x_k (rescaled into [-1, 1]).
        let values: Vec<f64> = grid.nodes().to_vec();
        let obs = Observable::diagonal(grid.clone(), &values).unwrap();
        let id = Transform::Identity;
        let e0 = expectation_at(&state, &obs, &id, 0.0);
        for &t in &[0.3, 2.0, 40.0] {
            let et = expectation_at(&state, &obs, &id, t);
            assert!((et - e0).norm() < 1e-12);
        }
    }

    #[test]
    fn cesaro_state_limits() {
        let (_, _, state) = setup(24, 4, 5);
        let id = Transform::Identity;
        // T → 0⁺ reproduces ρ₀ entrywise.
        let tiny = cesaro_average_state(&state, &id, 1e-12);
        let rho0 = state.density_matrix();
        let worst = (tiny.matrix() - rho0.matrix())
            .iter()
            .map(|z| z.norm())
            .fold(0.0f64, f64::max);
        assert!(worst < 1e-10);
        assert_abs_diff_eq!(tiny.trace(), 1.0, epsilon = 1e-12);

        // Large T: well-separated coherences decay like 1/(gap·T).
        let t_avg = 1e4;
        let big = cesaro_average_state(&state, &id, t_avg);
        let grid = state.grid();
        let c = state.weighted_amplitudes();
        for (k, l) in [(0usize, 23usize), (2, 20)] {
            let gap = (grid.nodes()[k] - grid.nodes()[l]).abs();
            let bound = c[k].norm() * c[l].norm() * 2.0 / (gap * t_avg);
            assert!(big.matrix()[(k, l)].norm() <= bound + 1e-15);
        }
    }

    #[test]
    fn cesaro_state_matches_time_quadrature() {
        let (_, _, state) = setup(16, 4, 7);
        let id = Transform::Identity;
        for &t_avg in &[0.5, 3.0, 20.0] {
            let closed = cesaro_average_state(&state, &id, t_avg);
            let quad = cesaro_average_state_quadrature(&state, &id, t_avg, 200);
            let worst = (closed.matrix() - quad.matrix())
                .iter()
                .map(|z| z.norm())
                .fold(0.0f64, f64::max);
            assert!(worst < 1e-8, "T={t_avg}: {worst}");
        }
    }

    #[test]
    fn cesaro_state_is_positive() {
        let (_, _, state) = setup(20, 4, 9);
        let id = Transform::Identity;
        for &t_avg in &[0.1, 1.0, 50.0] {
            let rho = cesaro_average_state(&state, &id, t_avg);
            assert!(rho.min_eigenvalue() >= -1e-10);
            assert_abs_diff_eq!(rho.trace(), 1.0, epsilon = 1e-10);
        }
    }

    #[test]
    fn sigma_sq_vanishes_for_conserved_observables() {
        let (grid, _, state) = setup(24, 4, 11);
        let id = Transform::Identity;
        let t_avg = 5.0;
        let n = min_time_samples(t_avg, bandwidth(&state, &id));

        let identity = Observable::identity(grid.clone());
        let s = empirical_sigma_sq(&state, &identity, &id, t_avg, n).unwrap();
        assert!(s < 1e-20);

        let values: Vec<f64> = grid.nodes().to_vec();
        let diag = Observable::diagonal(grid.clone(), &values).unwrap();
        let s = empirical_sigma_sq(&state, &diag, &id, t_avg, n).unwrap();
        assert!(s < 1e-10);
    }

    #[test]
    fn sigma_sq_rejects_undersampling() {
        let (grid, _, state) = setup(24, 4, 13);
        let id = Transform::Identity;
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        let obs = Observable::random_normalized(grid, &mut rng);
        let err = empirical_sigma_sq(&state, &obs, &id, 100.0, 4).unwrap_err();
        match err {
            Error::Undersampled { requested, minimum } => {
                assert_eq!(requested, 4);
                assert!(minimum >= min_time_samples(100.0, bandwidth(&state, &id)));
            }
            other => panic!("unexpected error {other}"),
        }
    }

    #[test]
    fn lemma1_disjoint_support_is_exactly_zero() {
        let grid = Arc::new(build_uniform_grid(0.0, 1.0, 32).unwrap());
        let part = Partition::tile(&grid, 8).unwrap();
        let state = SpectralState::uniform_cells(grid, &part, &[1, 2]).unwrap();
        let (lhs, rhs) =
            verify_lemma1(&state, &part, &GammaKernel::Cesaro { t_avg: 3.0 }, 0, 5).unwrap();
        assert_eq!(lhs, 0.0);
        assert_eq!(rhs, 0.0);
    }

    #[test]
    fn lemma1_instantaneous_kernel() {
        let (_, part, state) = setup(32, 8, 15);
        let t = 2.5;
        let (lhs, rhs) =
            verify_lemma1(&state, &part, &GammaKernel::Instantaneous { t }, 1, 4).unwrap();
        // |Γ| = 1 so rhs = 2 + Δ_j t; lhs ≤ 1 trivially.
        assert_abs_diff_eq!(rhs, 2.0 + part.width() * t, epsilon = 1e-12);
        assert!(lhs <= 1.0 + 1e-12);
        assert!(lhs <= rhs);
    }

    #[test]
    fn lemma1_cesaro_kernel_decays_with_t() {
        // Well-separated cells in the regime ΔT ≲ 1, with the averaging times
        // aligned to sinc peaks of the center gap so the windowed supremum
        // tracks the 1/(gap·T) envelope instead of the sinc oscillation. Both
        // sides then fall off with log-log slope close to -1.
        let (_, part, state) = setup(512, 128, 17);
        let gap_center = 90.0 * part.width();
        let ts: Vec<f64> = (1..=16)
            .map(|k| (2.0 * k as f64 + 1.0) * std::f64::consts::PI / gap_center)
            .collect();
        let mut lhs_vals = Vec::new();
        let mut rhs_vals = Vec::new();
        for &t_avg in &ts {
            let (lhs, rhs) =
                verify_lemma1(&state, &part, &GammaKernel::Cesaro { t_avg }, 0, 90).unwrap();
            assert!(lhs <= rhs + 1e-8);
            lhs_vals.push(lhs);
            rhs_vals.push(rhs);
        }
        let slope = |ys: &[f64]| -> f64 {
            let xs: Vec<f64> = ts.iter().map(|t| t.ln()).collect();
            let lys: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
            let xm = xs.iter().sum::<f64>() / xs.len() as f64;
            let ym = lys.iter().sum::<f64>() / lys.len() as f64;
            let num: f64 = xs.iter().zip(&lys).map(|(x, y)| (x - xm) * (y - ym)).sum();
            let den: f64 = xs.iter().map(|x| (x - xm) * (x - xm)).sum();
            num / den
        };
        let sl = slope(&lhs_vals);
        let sr = slope(&rhs_vals);
        assert!((sl + 1.0).abs() < 0.35, "lhs slope {sl}");
        assert!((sr + 1.0).abs() < 0.35, "rhs slope {sr}");
    }

    #[test]
    fn ibp_constant_kernel_is_machine_exact() {
        let (_, part, state) = setup(32, 4, 19);
        let report =
            verify_integration_by_parts_identity(&state, &part, 1, 2, &GammaKernel::Constant, 2).unwrap();
        assert!(report.residual < 1e-12, "residual {}", report.residual);
    }

    #[test]
    fn ibp_residual_refines_at_second_order() {
        let (_, part, state) = setup(24, 4, 21);
        let kernel = GammaKernel::Instantaneous { t: 3.0 };
        let r1 = verify_integration_by_parts_identity(&state, &part, 0, 2, &kernel, 2)
            .unwrap()
            .residual;
        let r2 = verify_integration_by_parts_identity(&state, &part, 0, 2, &kernel, 4)
            .unwrap()
            .residual;
        let r3 = verify_integration_by_parts_identity(&state, &part, 0, 2, &kernel, 8)
            .unwrap()
            .residual;
        let order12 = (r1 / r2).log2();
        let order23 = (r2 / r3).log2();
        assert!(order12 > 1.8, "order {order12} (r1={r1}, r2={r2})");
        assert!(order23 > 1.8, "order {order23} (r2={r2}, r3={r3})");
    }

    #[test]
    fn t_operator_norm_bounded_by_sampled_sup() {
        let (_, part, state) = setup(32, 4, 23);
        let kernel = GammaKernel::Cesaro { t_avg: 7.0 };
        for &y in &[0.1, 0.4, 0.9] {
            let (lhs, rhs) = verify_t_operator_norm(&state, &part, 1, y, &kernel).unwrap();
            assert!(lhs <= rhs + 1e-10, "y={y}: {lhs} > {rhs}");
        }
    }

    #[test]
    fn lemma2_small_t_and_stationary_cases() {
        let (grid, part, state) = setup(32, 4, 25);
        let id = Transform::Identity;
        let mut rng = ChaCha8Rng::seed_from_u64(26);
        let obs = vec![Observable::random_normalized(grid.clone(), &mut rng)];
        // T → 0⁺: both sides vanish.
        let (lhs, rhs) = verify_lemma2(&state, &part, &id, 1e-6, &obs, 64, 101).unwrap();
        assert!(lhs < 1e-12);
        assert!(rhs < 1e-9);
        assert!(lhs <= rhs + 1e-12);

        // A state concentrated on a single grid node is stationary.
        let mut amps = vec![Complex64::new(0.0, 0.0); grid.len()];
        amps[5] = Complex64::new(1.0, 0.0);
        let single = SpectralState::normalized(grid.clone(), amps).unwrap();
        let (lhs, rhs) = verify_lemma2(&single, &part, &id, 3.0, &obs, 64, 101).unwrap();
        assert!(lhs < 1e-20);
        assert!(rhs < 1e-12);
    }

    #[test]
    fn cross_index_set_cardinality() {
        // |I| = M²(M-1)² - M(M-1) by brute-force enumeration.
        for m in 2..=5usize {
            let cells: Vec<usize> = (0..m).collect();
            let set = cross_index_set(&cells);
            let expected = m * m * (m - 1) * (m - 1) - m * (m - 1);
            assert_eq!(set.len(), expected, "M = {m}");
            // Brute force: enumerate all tuples and apply the three conditions.
            let mut brute = 0usize;
            for i in 0..m {
                for j in 0..m {
                    for l in 0..m {
                        for k in 0..m {
                            if i != j && l != k && (i != l || j != k) {
                                brute += 1;
                            }
                        }
                    }
                }
            }
            assert_eq!(set.len(), brute);
        }
    }

    #[test]
    fn lemma3_single_cell_support() {
        let grid = Arc::new(build_uniform_grid(0.0, 1.0, 32).unwrap());
        let part = Partition::tile(&grid, 4).unwrap();
        let state = SpectralState::uniform_cells(grid.clone(), &part, &[2]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(27);
        let obs = Observable::random_normalized(grid, &mut rng);
        let id = Transform::Identity;
        let (lhs, rhs) = verify_lemma3(&state, &part, &id, 4.0, &obs, 128, 4096).unwrap();
        // Cross sums are empty; rhs is β² = 1. The state is block-stationary so
        // the lhs vanishes.
        assert!(lhs < 1e-20);
        assert_abs_diff_eq!(rhs, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn lemma3_two_cell_uniform_state() {
        let grid = Arc::new(build_uniform_grid(0.0, 1.0, 16).unwrap());
        let part = Partition::tile(&grid, 4).unwrap();
        let state = SpectralState::uniform_cells(grid.clone(), &part, &[0, 3]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(29);
        let obs = Observable::random_normalized(grid, &mut rng);
        let id = Transform::Identity;
        let t_avg = 6.0;
        let n = min_time_samples(t_avg, bandwidth(&state, &id));
        let (lhs, rhs) = verify_lemma3(&state, &part, &id, t_avg, &obs, n, 4096).unwrap();
        // β_i = 1/2 each, so the β² part of the rhs is exactly 1/2.
        let betas = state.betas(&part).unwrap();
        let beta_sq: f64 = betas.iter().map(|b| b * b).sum();
        assert_abs_diff_eq!(beta_sq, 0.5, epsilon = 1e-12);
        assert!(rhs >= 0.5);
        assert!(lhs <= rhs + 1e-8, "{lhs} vs {rhs}");
    }

    #[test]
    fn lemma3_respects_dimension_cap() {
        let (_, part, state) = setup(64, 4, 31);
        let mut rng = ChaCha8Rng::seed_from_u64(32);
        let obs = Observable::random_normalized(state.grid().clone(), &mut rng);
        let id = Transform::Identity;
        let err = verify_lemma3(&state, &part, &id, 2.0, &obs, 128, 100).unwrap_err();
        match err {
            Error::DoubledSpaceTooLarge { dim, cap } => {
                assert_eq!(dim, 64 * 64);
                assert_eq!(cap, 100);
            }
            other => panic!("unexpected error {other}"),
        }
    }

    #[test]
    fn dephasing_distance_is_zero_for_diagonal_states() {
        // A state that commutes with the Hamiltonian is already dephased.
        let evs = vec![0.3, 1.1, 2.9, 4.0];
        let mut rho = CMatrix::zeros(4, 4);
        for (i, w) in [0.1, 0.2, 0.3, 0.4].iter().enumerate() {
            rho[(i, i)] = Complex64::new(*w, 0.0);
        }
        let sys = FiniteDimSystem::new(evs, vec![1; 4], rho).unwrap();
        for &t in &[0.1, 1.0, 100.0] {
            assert_eq!(finite_dim_dephasing(&sys, t), 0.0);
        }
    }

    #[test]
    fn empirical_k_term_below_its_bound() {
        // The time-averaged coherence norms never exceed the pair-sup sum.
        let (_, part, state) = setup(48, 6, 39);
        let id = Transform::Identity;
        for &t_avg in &[1.0, 10.0, 100.0] {
            let empirical = empirical_k_term(&state, &part, &id, t_avg).unwrap();
            let params = KernelParams::new(t_avg, part.width()).unwrap();
            let bound = crate::bounds::k_term(&part, &params, &id).unwrap();
            assert!(
                empirical <= bound + 1e-9,
                "T={t_avg}: {empirical} > {bound}"
            );
        }
    }

    #[test]
    fn fidelity_inequality_reference_cases() {
        let mut rng = ChaCha8Rng::seed_from_u64(33);
        // a = b: both sides vanish.
        let a = linalg::random_density(4, 2, &mut rng);
        let (lhs, rhs) = verify_fidelity_inequality(&a, &a).unwrap();
        assert!(lhs < 1e-10);
        assert!(rhs < 1e-4);

        // Orthogonal pure states: lhs = 2, rhs = √(4 - 0) = 2.
        let mut p1 = CMatrix::zeros(3, 3);
        p1[(0, 0)] = Complex64::new(1.0, 0.0);
        let mut p2 = CMatrix::zeros(3, 3);
        p2[(1, 1)] = Complex64::new(1.0, 0.0);
        let (lhs, rhs) = verify_fidelity_inequality(&p1, &p2).unwrap();
        assert_abs_diff_eq!(lhs, 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(rhs, 2.0, epsilon = 1e-12);

        // Non-PSD input rejected.
        let mut bad = CMatrix::zeros(2, 2);
        bad[(0, 0)] = Complex64::new(1.5, 0.0);
        bad[(1, 1)] = Complex64::new(-0.5, 0.0);
        assert!(verify_fidelity_inequality(&bad, &p1).is_err());
    }

    #[test]
    fn fidelity_inequality_on_random_pairs() {
        let mut rng = ChaCha8Rng::seed_from_u64(35);
        for _ in 0..100 {
            let n = rng.gen_range(2..=6);
            let a = linalg::random_psd(n, &mut rng);
            let b = linalg::random_psd(n, &mut rng);
            let (lhs, rhs) = verify_fidelity_inequality(&a, &b).unwrap();
            assert!(lhs <= rhs + 1e-9, "{lhs} vs {rhs}");
        }
    }

    #[test]
    fn bound_hierarchy_termwise() {
        // σ² ≤ 3(ℛ + 𝒦 + 𝒟) with every piece evaluated empirically.
        let (grid, part, state) = setup(48, 6, 37);
        let id = Transform::Identity;
        let mut rng = ChaCha8Rng::seed_from_u64(38);
        let obs = Observable::random_normalized(grid, &mut rng);
        let t_avg = 15.0;
        let n = min_time_samples(t_avg, bandwidth(&state, &id));
        let sigma = empirical_sigma_sq(&state, &obs, &id, t_avg, n).unwrap();
        let d = empirical_d_term(&state, &obs, &part, &id, t_avg, n).unwrap();
        let r = empirical_r_term(&state, &obs, &part, &id, t_avg, n).unwrap();
        let k = empirical_k_term(&state, &part, &id, t_avg).unwrap();
        assert!(sigma <= 3.0 * (r + k + d) + 1e-9, "{sigma} vs {}", 3.0 * (r + k + d));
    }
}
