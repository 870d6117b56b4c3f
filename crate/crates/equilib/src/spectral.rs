//! Discretized spectra, spectral measures, states, partitions, and the
//! projector machinery everything else consumes.
//!
//! A `SpectrumGrid` is a midpoint-rule quadrature over the (compact, positive)
//! spectral support; a `SpectralState` carries the amplitude profile `ψ(x_k)`
//! whose squared modulus integrates to one against the grid weights. All
//! dynamics are diagonal in this representation, so time evolution is a phase
//! multiply and cell projectors are exact index-range selections.
//!
//! Convention: density matrices and observables act on *weighted* amplitude
//! vectors `c_k = ψ(x_k)·√w_k`, which makes traces and trace norms weight-free.

use std::sync::Arc;

use nalgebra::DVector;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::linalg::{self, CMatrix, CVector};
use crate::{Error, Result};

const TILING_RTOL: f64 = 1e-12;
const NORM_TOL: f64 = 1e-10;
const HERMITICITY_TOL: f64 = 1e-12;
const OPNORM_TOL: f64 = 1e-9;
const PSD_TOL: f64 = 1e-10;

/// Midpoint-rule discretization of a compact spectral support on ℝ⁺.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumGrid {
    support_lo: f64,
    support_hi: f64,
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl SpectrumGrid {
    /// Validating constructor for general node/weight sets.
    pub fn new(support_lo: f64, support_hi: f64, nodes: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        if !(support_lo >= 0.0) || !(support_hi > support_lo) {
            return Err(Error::InvalidGrid(format!(
                "support must satisfy 0 ≤ lo < hi, got [{support_lo}, {support_hi}]"
            )));
        }
        if nodes.len() != weights.len() || nodes.is_empty() {
            return Err(Error::InvalidGrid(
                "nodes and weights must be non-empty and of equal length".into(),
            ));
        }
        if nodes.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidGrid("nodes must be strictly increasing".into()));
        }
        if nodes[0] < support_lo || *nodes.last().unwrap() > support_hi {
            return Err(Error::InvalidGrid("nodes must lie inside the support".into()));
        }
        if weights.iter().any(|&w| w <= 0.0) {
            return Err(Error::InvalidGrid("weights must be positive".into()));
        }
        let total: f64 = weights.iter().sum();
        let width = support_hi - support_lo;
        if (total - width).abs() > TILING_RTOL * width.max(1.0) {
            return Err(Error::InvalidGrid(format!(
                "weights sum to {total}, expected support width {width}"
            )));
        }
        Ok(Self {
            support_lo,
            support_hi,
            nodes,
            weights,
        })
    }

    pub fn support_lo(&self) -> f64 {
        self.support_lo
    }

    pub fn support_hi(&self) -> f64 {
        self.support_hi
    }

    pub fn width(&self) -> f64 {
        self.support_hi - self.support_lo
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
}

/// Midpoint-rule grid: `n_points` equal cells with nodes at cell centers.
///
/// Weights are exactly `(hi - lo)/n_points`, so any partition whose cell
/// count divides `n_points` selects whole nodes and never straddles one.
pub fn build_uniform_grid(support_lo: f64, support_hi: f64, n_points: usize) -> Result<SpectrumGrid> {
    if n_points < 2 {
        return Err(Error::InvalidGrid(format!(
            "need at least 2 points, got {n_points}"
        )));
    }
    if !(support_hi > support_lo) || !(support_lo >= 0.0) {
        return Err(Error::InvalidGrid(format!(
            "support must satisfy 0 ≤ lo < hi, got [{support_lo}, {support_hi}]"
        )));
    }
    let h = (support_hi - support_lo) / n_points as f64;
    let nodes = (0..n_points)
        .map(|k| support_lo + (k as f64 + 0.5) * h)
        .collect();
    let weights = vec![h; n_points];
    SpectrumGrid::new(support_lo, support_hi, nodes, weights)
}

/// Uniform cells Δ_i of width Δ exactly tiling a support interval.
#[derive(Debug, Clone, PartialEq)]
pub struct Partition {
    support_lo: f64,
    width: f64,
    count: usize,
}

impl Partition {
    pub fn new(support_lo: f64, width: f64, count: usize) -> Result<Self> {
        if !(width > 0.0) || !width.is_finite() {
            return Err(Error::InvalidPartition(format!(
                "cell width must be positive, got {width}"
            )));
        }
        if count == 0 {
            return Err(Error::InvalidPartition("need at least one cell".into()));
        }
        Ok(Self {
            support_lo,
            width,
            count,
        })
    }

    /// Partition of a grid's support into `count` cells. Requires the grid
    /// resolution to be an integer multiple of `count`, so the resolution
    /// limit Δ divides the support width and every node falls strictly
    /// inside a cell.
    pub fn tile(grid: &SpectrumGrid, count: usize) -> Result<Self> {
        if count == 0 || count > grid.len() {
            return Err(Error::InvalidPartition(format!(
                "cell count {count} must be in [1, {}]",
                grid.len()
            )));
        }
        if grid.len() % count != 0 {
            return Err(Error::InvalidPartition(format!(
                "grid resolution {} is not a multiple of cell count {count}",
                grid.len()
            )));
        }
        Self::new(grid.support_lo(), grid.width() / count as f64, count)
    }

    /// Partition of a grid's support into cells of width `width`; the width
    /// must divide the support width exactly (within 1e-12 relative).
    pub fn tile_width(grid: &SpectrumGrid, width: f64) -> Result<Self> {
        if !(width > 0.0) {
            return Err(Error::InvalidPartition(format!(
                "cell width must be positive, got {width}"
            )));
        }
        let ratio = grid.width() / width;
        let count = ratio.round();
        if count < 1.0 || (ratio - count).abs() > TILING_RTOL * ratio.max(1.0) {
            return Err(Error::InvalidPartition(format!(
                "cell width {width} does not divide support width {}",
                grid.width()
            )));
        }
        Self::tile(grid, count as usize)
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn width(&self) -> f64 {
        self.width
    }

    pub fn support_lo(&self) -> f64 {
        self.support_lo
    }

    pub fn support_hi(&self) -> f64 {
        self.support_lo + self.width * self.count as f64
    }

    /// Left endpoints a_i of every cell.
    pub fn cell_los(&self) -> Vec<f64> {
        (0..self.count)
            .map(|i| self.support_lo + i as f64 * self.width)
            .collect()
    }

    /// Closed interval [a_i, a_i + Δ] of cell `i`.
    pub fn cell_interval(&self, i: usize) -> (f64, f64) {
        let lo = self.support_lo + i as f64 * self.width;
        (lo, lo + self.width)
    }

    pub fn check_cell(&self, i: usize) -> Result<()> {
        if i >= self.count {
            Err(Error::CellOutOfRange {
                index: i,
                count: self.count,
            })
        } else {
            Ok(())
        }
    }

    /// Contiguous index range of grid nodes lying in cell `i`. Midpoint nodes
    /// sit half a grid step away from any aligned cell boundary, so the
    /// binary search is robust.
    pub fn node_range(&self, grid: &SpectrumGrid, i: usize) -> Result<std::ops::Range<usize>> {
        self.check_cell(i)?;
        let (lo, hi) = self.cell_interval(i);
        let start = grid.nodes.partition_point(|&x| x < lo);
        let end = grid.nodes.partition_point(|&x| x < hi);
        Ok(start..end)
    }
}

/// Unit-norm amplitude profile ψ(x_k) over a grid; |ψ|²·w is the induced
/// spectral probability measure.
#[derive(Debug, Clone)]
pub struct SpectralState {
    grid: Arc<SpectrumGrid>,
    amplitudes: Vec<Complex64>,
}

impl SpectralState {
    /// Validating constructor: the profile must already be unit-norm.
    pub fn new(grid: Arc<SpectrumGrid>, amplitudes: Vec<Complex64>) -> Result<Self> {
        if amplitudes.len() != grid.len() {
            return Err(Error::InvalidState(format!(
                "amplitude count {} does not match grid size {}",
                amplitudes.len(),
                grid.len()
            )));
        }
        let state = Self { grid, amplitudes };
        let norm = state.norm_sq();
        if (norm - 1.0).abs() > NORM_TOL {
            return Err(Error::InvalidState(format!(
                "state norm² = {norm}, expected 1 within {NORM_TOL}"
            )));
        }
        Ok(state)
    }

    /// Normalize an arbitrary profile; rejects the zero profile.
    pub fn normalized(grid: Arc<SpectrumGrid>, amplitudes: Vec<Complex64>) -> Result<Self> {
        if amplitudes.len() != grid.len() {
            return Err(Error::InvalidState(format!(
                "amplitude count {} does not match grid size {}",
                amplitudes.len(),
                grid.len()
            )));
        }
        let raw = Self { grid, amplitudes };
        raw.normalize()
    }

    /// Unit-norm copy of this state; direction is preserved and the operation
    /// is idempotent on already-normalized states.
    pub fn normalize(&self) -> Result<Self> {
        let norm = self.norm_sq();
        if norm <= 0.0 {
            return Err(Error::InvalidState("cannot normalize the zero state".into()));
        }
        let scale = 1.0 / norm.sqrt();
        Ok(Self {
            grid: self.grid.clone(),
            amplitudes: self.amplitudes.iter().map(|a| a * scale).collect(),
        })
    }

    /// Internal constructor that skips the unit-norm check (cell projections
    /// are deliberately sub-normalized).
    pub(crate) fn raw(grid: Arc<SpectrumGrid>, amplitudes: Vec<Complex64>) -> Self {
        Self { grid, amplitudes }
    }

    /// Equal amplitude on the listed partition cells, zero elsewhere.
    pub fn uniform_cells(
        grid: Arc<SpectrumGrid>,
        partition: &Partition,
        cells: &[usize],
    ) -> Result<Self> {
        if cells.is_empty() {
            return Err(Error::InvalidState("no occupied cells given".into()));
        }
        let mut amplitudes = vec![Complex64::new(0.0, 0.0); grid.len()];
        for &c in cells {
            let range = partition.node_range(&grid, c)?;
            if range.is_empty() {
                return Err(Error::InvalidState(format!("cell {c} holds no grid nodes")));
            }
            for k in range {
                amplitudes[k] = Complex64::new(1.0, 0.0);
            }
        }
        Self::normalized(grid, amplitudes)
    }

    /// Gaussian |ψ|² profile centered at `center` with standard deviation
    /// `sigma`, normalized on the grid.
    pub fn gaussian_profile(grid: Arc<SpectrumGrid>, center: f64, sigma: f64) -> Result<Self> {
        if !(sigma > 0.0) {
            return Err(Error::InvalidState(format!(
                "gaussian width must be positive, got {sigma}"
            )));
        }
        let amplitudes = grid
            .nodes()
            .iter()
            .map(|&x| {
                let z = (x - center) / sigma;
                Complex64::new((-0.25 * z * z).exp(), 0.0)
            })
            .collect();
        Self::normalized(grid, amplitudes)
    }

    /// Fully random complex profile (every node occupied), normalized.
    pub fn random<R: Rng>(grid: Arc<SpectrumGrid>, rng: &mut R) -> Self {
        let amplitudes = (0..grid.len())
            .map(|_| Complex64::new(StandardNormal.sample(rng), StandardNormal.sample(rng)))
            .collect();
        Self::normalized(grid, amplitudes).expect("gaussian profile is almost surely nonzero")
    }

    pub fn grid(&self) -> &Arc<SpectrumGrid> {
        &self.grid
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn norm_sq(&self) -> f64 {
        self.amplitudes
            .iter()
            .zip(self.grid.weights())
            .map(|(a, &w)| a.norm_sqr() * w)
            .sum()
    }

    /// Weighted amplitudes c_k = ψ(x_k)·√w_k; Σ|c_k|² equals the norm².
    pub fn weighted_amplitudes(&self) -> CVector {
        DVector::from_iterator(
            self.amplitudes.len(),
            self.amplitudes
                .iter()
                .zip(self.grid.weights())
                .map(|(a, &w)| a * w.sqrt()),
        )
    }

    /// Occupation probability β_i = Σ_{x_k ∈ Δ_i} |ψ(x_k)|² w_k of cell `i`.
    pub fn beta(&self, partition: &Partition, i: usize) -> Result<f64> {
        let range = partition.node_range(&self.grid, i)?;
        Ok(range
            .map(|k| self.amplitudes[k].norm_sqr() * self.grid.weights()[k])
            .sum())
    }

    /// All cell occupations at once.
    pub fn betas(&self, partition: &Partition) -> Result<Vec<f64>> {
        (0..partition.count()).map(|i| self.beta(partition, i)).collect()
    }

    /// Indices of cells carrying strictly positive weight.
    pub fn occupied_cells(&self, partition: &Partition) -> Result<Vec<usize>> {
        Ok(self
            .betas(partition)?
            .iter()
            .enumerate()
            .filter(|(_, &b)| b > 0.0)
            .map(|(i, _)| i)
            .collect())
    }

    /// Apply the cell projector P(Δ_i): amplitudes outside the cell are
    /// zeroed. The result is sub-normalized with norm² = β_i.
    pub fn project_cell(&self, partition: &Partition, i: usize) -> Result<Self> {
        let range = partition.node_range(&self.grid, i)?;
        let mut amplitudes = vec![Complex64::new(0.0, 0.0); self.amplitudes.len()];
        amplitudes[range.clone()].copy_from_slice(&self.amplitudes[range]);
        Ok(Self::raw(self.grid.clone(), amplitudes))
    }

    /// ∫_{Δ_i} e^{-iτx} μ_ψ(dx) on the grid: Σ_{x_k ∈ Δ_i} e^{-iτ x_k} |ψ_k|² w_k.
    pub fn characteristic_integral(
        &self,
        partition: &Partition,
        i: usize,
        tau: f64,
    ) -> Result<Complex64> {
        self.characteristic_integral_mapped(partition, i, tau, &crate::kernels::Transform::Identity)
    }

    /// Characteristic integral with the dynamical frequency map applied:
    /// Σ_{x_k ∈ Δ_i} e^{-iτ f(x_k)} |ψ_k|² w_k.
    pub fn characteristic_integral_mapped(
        &self,
        partition: &Partition,
        i: usize,
        tau: f64,
        transform: &crate::kernels::Transform,
    ) -> Result<Complex64> {
        let range = partition.node_range(&self.grid, i)?;
        Ok(range
            .map(|k| {
                let phase = Complex64::from_polar(1.0, -tau * transform.eval(self.grid.nodes()[k]));
                phase * (self.amplitudes[k].norm_sqr() * self.grid.weights()[k])
            })
            .sum())
    }

    /// Rank-one density matrix |c⟩⟨c| in the weighted basis.
    pub fn density_matrix(&self) -> DensityMatrix {
        let c = self.weighted_amplitudes();
        DensityMatrix {
            grid: self.grid.clone(),
            matrix: &c * c.adjoint(),
        }
    }
}

/// Bounded Hermitian kernel on the weighted grid basis with ‖A‖ ≤ 1.
#[derive(Debug, Clone)]
pub struct Observable {
    grid: Arc<SpectrumGrid>,
    kernel: CMatrix,
}

impl Observable {
    pub fn new(grid: Arc<SpectrumGrid>, kernel: CMatrix) -> Result<Self> {
        if kernel.nrows() != grid.len() || kernel.ncols() != grid.len() {
            return Err(Error::InvalidObservable(format!(
                "kernel is {}x{}, grid has {} nodes",
                kernel.nrows(),
                kernel.ncols(),
                grid.len()
            )));
        }
        let defect = linalg::hermiticity_defect(&kernel);
        if defect > HERMITICITY_TOL {
            return Err(Error::InvalidObservable(format!(
                "kernel is not Hermitian (defect {defect:.3e})"
            )));
        }
        let opnorm = linalg::hermitian_opnorm(&kernel);
        if opnorm > 1.0 + OPNORM_TOL {
            return Err(Error::InvalidObservable(format!(
                "operator norm {opnorm} exceeds 1"
            )));
        }
        Ok(Self { grid, kernel })
    }

    /// Seeded random Hermitian kernel rescaled to operator norm 1.
    pub fn random_normalized<R: Rng>(grid: Arc<SpectrumGrid>, rng: &mut R) -> Self {
        let raw = linalg::random_hermitian(grid.len(), rng);
        let opnorm = linalg::hermitian_opnorm(&raw);
        let kernel = raw.map(|z| z / (opnorm * (1.0 + 1e-7)));
        Self::new(grid, kernel).expect("rescaled random kernel satisfies the contract")
    }

    /// Diagonal observable (commutes with the dynamics); entries must lie in
    /// [-1, 1].
    pub fn diagonal(grid: Arc<SpectrumGrid>, values: &[f64]) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::InvalidObservable(
                "diagonal length does not match grid".into(),
            ));
        }
        if values.iter().any(|v| v.abs() > 1.0 + OPNORM_TOL) {
            return Err(Error::InvalidObservable(
                "diagonal entries must lie in [-1, 1]".into(),
            ));
        }
        let n = values.len();
        let mut kernel = CMatrix::zeros(n, n);
        for (k, &v) in values.iter().enumerate() {
            kernel[(k, k)] = Complex64::new(v, 0.0);
        }
        Ok(Self { grid, kernel })
    }

    pub fn identity(grid: Arc<SpectrumGrid>) -> Self {
        let n = grid.len();
        Self {
            grid,
            kernel: CMatrix::identity(n, n),
        }
    }

    pub fn grid(&self) -> &Arc<SpectrumGrid> {
        &self.grid
    }

    pub fn kernel(&self) -> &CMatrix {
        &self.kernel
    }

    /// ⟨c|A|c⟩ for a weighted amplitude vector.
    pub fn expectation(&self, weighted: &CVector) -> Complex64 {
        (weighted.adjoint() * (&self.kernel * weighted))[(0, 0)]
    }

    /// Tr{A ρ}.
    pub fn trace_with(&self, rho: &DensityMatrix) -> Complex64 {
        let n = self.kernel.nrows();
        let mut acc = Complex64::new(0.0, 0.0);
        for i in 0..n {
            for j in 0..n {
                acc += self.kernel[(i, j)] * rho.matrix[(j, i)];
            }
        }
        acc
    }
}

/// PSD, trace-one matrix in the weighted grid basis.
#[derive(Debug, Clone)]
pub struct DensityMatrix {
    grid: Arc<SpectrumGrid>,
    matrix: CMatrix,
}

impl DensityMatrix {
    /// Fully validating constructor (Hermitian, PSD, unit trace). The PSD
    /// check diagonalizes, so this is O(n³); prefer the structural
    /// constructors for large grids.
    pub fn new(grid: Arc<SpectrumGrid>, matrix: CMatrix) -> Result<Self> {
        let dm = Self::new_unchecked(grid, matrix)?;
        let min_ev = dm.min_eigenvalue();
        if min_ev < -PSD_TOL {
            return Err(Error::InvalidDensityMatrix(format!(
                "matrix is not PSD (min eigenvalue {min_ev:.3e})"
            )));
        }
        Ok(dm)
    }

    /// Checks hermiticity and trace but trusts positivity (used where PSD
    /// holds by construction, e.g. Cesàro averages of pure states).
    pub(crate) fn new_unchecked(grid: Arc<SpectrumGrid>, matrix: CMatrix) -> Result<Self> {
        if matrix.nrows() != grid.len() || matrix.ncols() != grid.len() {
            return Err(Error::InvalidDensityMatrix(format!(
                "matrix is {}x{}, grid has {} nodes",
                matrix.nrows(),
                matrix.ncols(),
                grid.len()
            )));
        }
        let defect = linalg::hermiticity_defect(&matrix);
        if defect > 100.0 * HERMITICITY_TOL {
            return Err(Error::InvalidDensityMatrix(format!(
                "matrix is not Hermitian (defect {defect:.3e})"
            )));
        }
        let dm = Self { grid, matrix };
        let tr = dm.trace();
        if (tr - 1.0).abs() > NORM_TOL {
            return Err(Error::InvalidDensityMatrix(format!(
                "trace = {tr}, expected 1"
            )));
        }
        Ok(dm)
    }

    pub(crate) fn raw(grid: Arc<SpectrumGrid>, matrix: CMatrix) -> Self {
        Self { grid, matrix }
    }

    pub fn grid(&self) -> &Arc<SpectrumGrid> {
        &self.grid
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn trace(&self) -> f64 {
        (0..self.matrix.nrows()).map(|i| self.matrix[(i, i)].re).sum()
    }

    /// Purity Tr{ρ²} = Σ|ρ_{kl}|² for Hermitian ρ; equals 1 iff rank one.
    pub fn purity(&self) -> f64 {
        self.matrix.iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn min_eigenvalue(&self) -> f64 {
        linalg::min_eigenvalue(&self.matrix)
    }

    /// P(Δ_i) ρ P(Δ_i): rows and columns outside the cell are zeroed. The
    /// result is sub-normalized with trace β_i.
    pub fn project_cell(&self, partition: &Partition, i: usize) -> Result<Self> {
        let range = partition.node_range(&self.grid, i)?;
        let n = self.matrix.nrows();
        let mut out = CMatrix::zeros(n, n);
        for r in range.clone() {
            for c in range.clone() {
                out[(r, c)] = self.matrix[(r, c)];
            }
        }
        Ok(Self::raw(self.grid.clone(), out))
    }

    /// The (i, j) off-diagonal block P(Δ_i) ρ P(Δ_j) as a dense sub-block.
    pub fn cell_block(&self, partition: &Partition, i: usize, j: usize) -> Result<CMatrix> {
        let ri = partition.node_range(&self.grid, i)?;
        let rj = partition.node_range(&self.grid, j)?;
        let mut out = CMatrix::zeros(ri.len(), rj.len());
        for (a, r) in ri.clone().enumerate() {
            for (b, c) in rj.clone().enumerate() {
                out[(a, b)] = self.matrix[(r, c)];
            }
        }
        Ok(out)
    }

    /// Dephasing map 𝒫_Δ: ρ ↦ Σ_i P(Δ_i) ρ P(Δ_i) (block-diagonal part).
    pub fn dephase(&self, partition: &Partition) -> Result<Self> {
        let n = self.matrix.nrows();
        let mut out = CMatrix::zeros(n, n);
        for i in 0..partition.count() {
            let range = partition.node_range(&self.grid, i)?;
            for r in range.clone() {
                for c in range.clone() {
                    out[(r, c)] = self.matrix[(r, c)];
                }
            }
        }
        Ok(Self::raw(self.grid.clone(), out))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn grid(lo: f64, hi: f64, n: usize) -> Arc<SpectrumGrid> {
        Arc::new(build_uniform_grid(lo, hi, n).unwrap())
    }

    #[test]
    fn uniform_grid_midpoint_nodes() {
        let g = build_uniform_grid(0.0, 1.0, 4).unwrap();
        assert_eq!(g.nodes(), &[0.125, 0.375, 0.625, 0.875]);
        assert!(g.weights().iter().all(|&w| w == 0.25));

        let g = build_uniform_grid(0.0, 2.0, 2).unwrap();
        assert_abs_diff_eq!(g.weights().iter().sum::<f64>(), 2.0, epsilon = 1e-15);

        assert!(build_uniform_grid(0.0, 1.0, 1).is_err());
        assert!(build_uniform_grid(1.0, 1.0, 4).is_err());
        assert!(build_uniform_grid(2.0, 1.0, 4).is_err());
        assert!(build_uniform_grid(-1.0, 1.0, 4).is_err());
    }

    #[test]
    fn uniform_grid_first_moment() {
        // ∫ x dμ for the uniform density on [0, 1] is 1/2.
        let g = grid(0.0, 1.0, 1000);
        let state = SpectralState::normalized(
            g.clone(),
            vec![Complex64::new(1.0, 0.0); g.len()],
        )
        .unwrap();
        let mean: f64 = g
            .nodes()
            .iter()
            .zip(g.weights())
            .zip(state.amplitudes())
            .map(|((&x, &w), a)| x * a.norm_sqr() * w)
            .sum();
        assert_abs_diff_eq!(mean, 0.5, epsilon = 1e-6);
    }

    #[test]
    fn normalize_idempotent_and_scale_invariant() {
        let g = grid(0.0, 2.0, 16);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let s = SpectralState::random(g.clone(), &mut rng);
        let renorm = s.normalize().unwrap();
        for (a, b) in s.amplitudes().iter().zip(renorm.amplitudes()) {
            assert!((a - b).norm() < 1e-12);
        }
        let scaled: Vec<Complex64> = s.amplitudes().iter().map(|a| a * 3.0).collect();
        let from_scaled = SpectralState::normalized(g.clone(), scaled).unwrap();
        for (a, b) in s.amplitudes().iter().zip(from_scaled.amplitudes()) {
            assert!((a - b).norm() < 1e-12);
        }
        let zero = vec![Complex64::new(0.0, 0.0); g.len()];
        assert!(SpectralState::normalized(g, zero).is_err());
    }

    #[test]
    fn indicator_profile_fills_one_cell() {
        // ψ = χ_[0,1] on a grid over [0, 2]: after normalization the lower
        // half-cell carries all the weight.
        let g = grid(0.0, 2.0, 64);
        let amplitudes: Vec<Complex64> = g
            .nodes()
            .iter()
            .map(|&x| {
                if x < 1.0 {
                    Complex64::new(1.0, 0.0)
                } else {
                    Complex64::new(0.0, 0.0)
                }
            })
            .collect();
        let s = SpectralState::normalized(g.clone(), amplitudes).unwrap();
        assert_abs_diff_eq!(s.norm_sq(), 1.0, epsilon = 1e-12);
        let part = Partition::tile(&g, 2).unwrap();
        assert_abs_diff_eq!(s.beta(&part, 0).unwrap(), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(s.beta(&part, 1).unwrap(), 0.0, epsilon = 0.0);
    }

    #[test]
    fn beta_of_uniform_state_over_half_the_cells() {
        // Uniform normalized ψ over N cells of a 2N-cell partition: β = 1/N on
        // occupied cells (direct integral of the normalized profile).
        let n_cells = 5usize;
        let g = grid(0.0, 1.0, 2 * n_cells * 8);
        let part = Partition::tile(&g, 2 * n_cells).unwrap();
        let occupied: Vec<usize> = (0..n_cells).map(|i| 2 * i).collect();
        let s = SpectralState::uniform_cells(g, &part, &occupied).unwrap();
        for &c in &occupied {
            assert_abs_diff_eq!(
                s.beta(&part, c).unwrap(),
                1.0 / n_cells as f64,
                epsilon = 1e-12
            );
        }
        assert_abs_diff_eq!(s.beta(&part, 1).unwrap(), 0.0, epsilon = 0.0);
        assert!(s.beta(&part, 2 * n_cells).is_err());
    }

    #[test]
    fn projector_identities() {
        let g = grid(0.0, 3.0, 48);
        let part = Partition::tile(&g, 6).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let s = SpectralState::random(g.clone(), &mut rng);

        // Idempotence and consistency with beta.
        let p2 = s.project_cell(&part, 2).unwrap();
        let p2p2 = p2.project_cell(&part, 2).unwrap();
        for (a, b) in p2.amplitudes().iter().zip(p2p2.amplitudes()) {
            assert_eq!(a, b);
        }
        assert_abs_diff_eq!(p2.norm_sq(), s.beta(&part, 2).unwrap(), epsilon = 1e-14);

        // Orthogonality of distinct cells.
        let p3 = p2.project_cell(&part, 3).unwrap();
        assert!(p3.amplitudes().iter().all(|a| a.norm() <= 1e-14));

        // Summing all diagonal blocks reproduces the dephasing map.
        let rho = s.density_matrix();
        let mut acc = CMatrix::zeros(g.len(), g.len());
        for i in 0..part.count() {
            acc += rho.project_cell(&part, i).unwrap().matrix();
        }
        let deph = rho.dephase(&part).unwrap();
        let worst = (&acc - deph.matrix())
            .iter()
            .map(|z| z.norm())
            .fold(0.0f64, f64::max);
        assert!(worst < 1e-14);
    }

    #[test]
    fn characteristic_integral_reference_cases() {
        let g = grid(0.0, 3.0, 48);
        let part = Partition::tile(&g, 6).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let s = SpectralState::random(g.clone(), &mut rng);
        for i in 0..part.count() {
            let beta = s.beta(&part, i).unwrap();
            let at_zero = s.characteristic_integral(&part, i, 0.0).unwrap();
            assert!((at_zero - Complex64::new(beta, 0.0)).norm() < 1e-14);
        }
        assert!(s.characteristic_integral(&part, 6, 1.0).is_err());
    }

    #[test]
    fn characteristic_integral_uniform_cell_closed_form() {
        // Uniform density on Δ_i = [a, a + Δ]:
        //   ∫ e^{-iτx} dμ/β = e^{-iτ(a + Δ/2)} sinc(τΔ/2).
        // The grid sum is a Dirichlet kernel approaching this as the cell
        // resolution grows; 6000 nodes reach 1e-8 for the τ used here, and the
        // adaptive-quadrature evaluation of the continuum integral agrees.
        let g = grid(0.0, 1.0, 6000);
        let part = Partition::tile(&g, 1).unwrap();
        let s = SpectralState::uniform_cells(g, &part, &[0]).unwrap();
        for &tau in &[0.3, 1.0, 2.0] {
            let got = s.characteristic_integral(&part, 0, tau).unwrap();
            let closed = Complex64::from_polar(1.0, -tau * 0.5) * crate::kernels::sinc(tau * 0.5);
            assert!((got - closed).norm() < 1e-8, "tau={tau}");
            let quad = crate::quad::adaptive_simpson(
                |x| Complex64::from_polar(1.0, -tau * x),
                0.0,
                1.0,
                1e-12,
            );
            assert!((got - quad).norm() < 1e-8, "tau={tau}");
        }
    }

    #[test]
    fn purity_reference_values() {
        let g = grid(0.0, 1.0, 4);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let s = SpectralState::random(g.clone(), &mut rng);
        assert_abs_diff_eq!(s.density_matrix().purity(), 1.0, epsilon = 1e-12);

        // Maximally mixed on 4 levels.
        let mixed = DensityMatrix::new(g.clone(), CMatrix::identity(4, 4).map(|z| z * 0.25)).unwrap();
        assert_abs_diff_eq!(mixed.purity(), 0.25, epsilon = 1e-15);

        // Equal mixture of two orthogonal pure states.
        let mut m = CMatrix::zeros(4, 4);
        m[(0, 0)] = Complex64::new(0.5, 0.0);
        m[(1, 1)] = Complex64::new(0.5, 0.0);
        let two = DensityMatrix::new(g, m).unwrap();
        assert_abs_diff_eq!(two.purity(), 0.5, epsilon = 1e-15);
    }

    #[test]
    fn purity_bounds_on_random_mixtures() {
        let g = grid(0.0, 1.0, 6);
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for _ in 0..100 {
            let rank = rng.gen_range(1..=6);
            let rho = DensityMatrix::new(g.clone(), linalg::random_density(6, rank, &mut rng)).unwrap();
            let p = rho.purity();
            assert!(p <= 1.0 + 1e-9);
            assert!(p >= 1.0 / 6.0 - 1e-9);
        }
    }

    #[test]
    fn density_matrix_validation_rejects_bad_inputs() {
        let g = grid(0.0, 1.0, 3);
        // Not trace one.
        let m = CMatrix::identity(3, 3);
        assert!(DensityMatrix::new(g.clone(), m).is_err());
        // Not PSD.
        let mut m = CMatrix::zeros(3, 3);
        m[(0, 0)] = Complex64::new(1.5, 0.0);
        m[(1, 1)] = Complex64::new(-0.5, 0.0);
        assert!(DensityMatrix::new(g.clone(), m).is_err());
        // Not Hermitian.
        let mut m = CMatrix::identity(3, 3).map(|z| z / 3.0);
        m[(0, 1)] = Complex64::new(0.1, 0.0);
        assert!(DensityMatrix::new(g, m).is_err());
    }

    #[test]
    fn observable_validation() {
        let g = grid(0.0, 1.0, 4);
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let a = Observable::random_normalized(g.clone(), &mut rng);
        assert!(linalg::hermitian_opnorm(a.kernel()) <= 1.0 + 1e-9);

        let too_big = CMatrix::identity(4, 4).map(|z| z * 2.0);
        assert!(Observable::new(g.clone(), too_big).is_err());
        let mut skew = CMatrix::zeros(4, 4);
        skew[(0, 1)] = Complex64::new(0.5, 0.0);
        assert!(Observable::new(g, skew).is_err());
    }

    #[test]
    fn partition_tiling_rules() {
        let g = grid(0.0, 1.5, 30);
        assert!(Partition::tile(&g, 7).is_err());
        let p = Partition::tile(&g, 5).unwrap();
        assert_abs_diff_eq!(p.width(), 0.3, epsilon = 1e-15);
        assert_abs_diff_eq!(p.support_hi(), 1.5, epsilon = 1e-12);
        let pw = Partition::tile_width(&g, 0.3).unwrap();
        assert_eq!(pw.count(), 5);
        assert!(Partition::tile_width(&g, 0.4).is_err());
        for i in 0..5 {
            assert_eq!(p.node_range(&g, i).unwrap().len(), 6);
        }
        assert!(p.node_range(&g, 5).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(256))]

        #[test]
        fn partition_of_unity(seed in 0u64..1000, m in 1usize..8) {
            let g = grid(0.0, 2.0, 8 * m);
            let part = Partition::tile(&g, m).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let s = SpectralState::random(g, &mut rng);
            let total: f64 = s.betas(&part).unwrap().iter().sum();
            prop_assert!((total - 1.0).abs() < 1e-10);
        }

        #[test]
        fn characteristic_integral_bounded_by_beta(seed in 0u64..100_000, tau in -50.0f64..50.0) {
            let g = grid(0.0, 1.0, 24);
            let part = Partition::tile(&g, 4).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let s = SpectralState::random(g, &mut rng);
            for i in 0..4 {
                let beta = s.beta(&part, i).unwrap();
                let ci = s.characteristic_integral(&part, i, tau).unwrap();
                prop_assert!(ci.norm() <= beta + 1e-12);
            }
        }
    }
}
