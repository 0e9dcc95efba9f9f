//! Matrix-free symmetric linear operators.
//!
//! Every operator exposes `apply` and its main diagonal. The diagonal is
//! computed analytically for the stencil operators so that Jacobi
//! preconditioning costs O(n).

use std::fmt;
use std::sync::Arc;

use crate::error::{check_len, Error, Result};
use crate::grid::GridSpec;
use crate::linalg::Vector;

pub trait LinearOperator: Send + Sync + fmt::Debug {
    fn dim(&self) -> usize;

    /// `y = A x`. Both slices must have length [`dim`](Self::dim).
    fn apply_into(&self, x: &[f64], y: &mut [f64]);

    /// Main diagonal, entry `i` equal to `e_i' A e_i`.
    fn diag(&self) -> Vector;

    fn apply(&self, x: &[f64]) -> Result<Vector> {
        check_len(self.dim(), x.len())?;
        let mut y = vec![0.0; x.len()];
        self.apply_into(x, &mut y);
        Ok(y)
    }
}

pub type SharedOperator = Arc<dyn LinearOperator>;

/// Diagonal of any operator.
pub fn operator_diag(op: &dyn LinearOperator) -> Vector {
    op.diag()
}

#[derive(Debug, Clone)]
pub struct ZeroOperator {
    n: usize,
}

impl ZeroOperator {
    pub fn new(n: usize) -> Self {
        Self { n }
    }
}

impl LinearOperator for ZeroOperator {
    fn dim(&self) -> usize {
        self.n
    }
    fn apply_into(&self, _x: &[f64], y: &mut [f64]) {
        y.fill(0.0);
    }
    fn diag(&self) -> Vector {
        vec![0.0; self.n]
    }
}

#[derive(Debug, Clone)]
pub struct DiagonalOperator {
    d: Vector,
}

impl DiagonalOperator {
    pub fn new(d: Vector) -> Self {
        Self { d }
    }

    pub fn identity(n: usize) -> Self {
        Self { d: vec![1.0; n] }
    }
}

impl LinearOperator for DiagonalOperator {
    fn dim(&self) -> usize {
        self.d.len()
    }
    fn apply_into(&self, x: &[f64], y: &mut [f64]) {
        for ((yi, xi), di) in y.iter_mut().zip(x).zip(&self.d) {
            *yi = di * xi;
        }
    }
    fn diag(&self) -> Vector {
        self.d.clone()
    }
}

/// Row-major dense matrix. Intended for small problems and tests.
#[derive(Debug, Clone)]
pub struct DenseOperator {
    n: usize,
    data: Vector,
}

impl DenseOperator {
    pub fn new(n: usize, data: Vector) -> Result<Self> {
        check_len(n * n, data.len())?;
        Ok(Self { n, data })
    }

    pub fn entry(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }
}

impl LinearOperator for DenseOperator {
    fn dim(&self) -> usize {
        self.n
    }
    fn apply_into(&self, x: &[f64], y: &mut [f64]) {
        for (i, yi) in y.iter_mut().enumerate() {
            let row = &self.data[i * self.n..(i + 1) * self.n];
            *yi = row.iter().zip(x).map(|(a, b)| a * b).sum();
        }
    }
    fn diag(&self) -> Vector {
        (0..self.n).map(|i| self.entry(i, i)).collect()
    }
}

/// `factor * base`.
#[derive(Debug, Clone)]
pub struct ScaledOperator {
    factor: f64,
    base: SharedOperator,
}

impl ScaledOperator {
    pub fn new(factor: f64, base: SharedOperator) -> Self {
        Self { factor, base }
    }
}

impl LinearOperator for ScaledOperator {
    fn dim(&self) -> usize {
        self.base.dim()
    }
    fn apply_into(&self, x: &[f64], y: &mut [f64]) {
        self.base.apply_into(x, y);
        y.iter_mut().for_each(|v| *v *= self.factor);
    }
    fn diag(&self) -> Vector {
        let mut d = self.base.diag();
        d.iter_mut().for_each(|v| *v *= self.factor);
        d
    }
}

/// Sum of operators of equal dimension.
#[derive(Debug, Clone)]
pub struct SumOperator {
    terms: Vec<SharedOperator>,
}

impl SumOperator {
    pub fn new(terms: Vec<SharedOperator>) -> Result<Self> {
        let first = terms
            .first()
            .ok_or_else(|| Error::InvalidParameter("empty operator sum".into()))?;
        for t in &terms[1..] {
            check_len(first.dim(), t.dim())?;
        }
        Ok(Self { terms })
    }
}

impl LinearOperator for SumOperator {
    fn dim(&self) -> usize {
        self.terms[0].dim()
    }
    fn apply_into(&self, x: &[f64], y: &mut [f64]) {
        self.terms[0].apply_into(x, y);
        let mut tmp = vec![0.0; x.len()];
        for t in &self.terms[1..] {
            t.apply_into(x, &mut tmp);
            for (a, b) in y.iter_mut().zip(&tmp) {
                *a += b;
            }
        }
    }
    fn diag(&self) -> Vector {
        let mut d = self.terms[0].diag();
        for t in &self.terms[1..] {
            for (a, b) in d.iter_mut().zip(t.diag()) {
                *a += b;
            }
        }
        d
    }
}

/// `tau * I + base`, the initial metric of the regularizer-aware schemes.
#[derive(Debug, Clone)]
pub struct ShiftedOperator {
    tau: f64,
    base: SharedOperator,
}

impl ShiftedOperator {
    pub fn new(tau: f64, base: SharedOperator) -> Self {
        Self { tau, base }
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn base(&self) -> &SharedOperator {
        &self.base
    }
}

impl LinearOperator for ShiftedOperator {
    fn dim(&self) -> usize {
        self.base.dim()
    }
    fn apply_into(&self, x: &[f64], y: &mut [f64]) {
        self.base.apply_into(x, y);
        for (yi, xi) in y.iter_mut().zip(x) {
            *yi += self.tau * xi;
        }
    }
    fn diag(&self) -> Vector {
        let mut d = self.base.diag();
        d.iter_mut().for_each(|v| *v += self.tau);
        d
    }
}

// ---------------------------------------------------------------------------
// Finite-difference stencils (zero Dirichlet boundary)
// ---------------------------------------------------------------------------

/// Walks the cells of `grid` in flattened order, calling `f(idx, coords)`.
fn for_each_cell(grid: &GridSpec, mut f: impl FnMut(usize, &[usize])) {
    let dims = grid.dims();
    let mut c = vec![0usize; dims.len()];
    for idx in 0..grid.cells() {
        f(idx, &c);
        for (ci, &d) in c.iter_mut().zip(dims) {
            *ci += 1;
            if *ci < d {
                break;
            }
            *ci = 0;
        }
    }
}

fn inv_h2(grid: &GridSpec) -> Vec<f64> {
    grid.spacing().iter().map(|h| 1.0 / (h * h)).collect()
}

/// `-Delta_h` on one scalar field.
fn neg_laplacian_block(grid: &GridSpec, x: &[f64], y: &mut [f64]) {
    let dims = grid.dims();
    let strides = grid.strides();
    let w = inv_h2(grid);
    for_each_cell(grid, |i, c| {
        let mut acc = 0.0;
        for a in 0..dims.len() {
            let s = strides[a];
            let left = if c[a] > 0 { x[i - s] } else { 0.0 };
            let right = if c[a] + 1 < dims[a] { x[i + s] } else { 0.0 };
            acc += w[a] * (2.0 * x[i] - left - right);
        }
        y[i] = acc;
    });
}

/// Central difference `(w[i+s] - w[i-s]) / 2h` along one axis, accumulated
/// into `y` with weight `coef`.
fn central_diff_acc(grid: &GridSpec, axis: usize, coef: f64, w: &[f64], y: &mut [f64]) {
    let d = grid.dims()[axis];
    let s = grid.strides()[axis];
    let k = coef / (2.0 * grid.spacing()[axis]);
    for_each_cell(grid, |i, c| {
        let left = if c[axis] > 0 { w[i - s] } else { 0.0 };
        let right = if c[axis] + 1 < d { w[i + s] } else { 0.0 };
        y[i] += k * (right - left);
    });
}

/// Count of in-grid neighbours of every cell along each axis.
fn neighbour_counts(grid: &GridSpec) -> Vec<Vec<u8>> {
    let dims = grid.dims();
    let mut counts = vec![vec![0u8; grid.cells()]; dims.len()];
    for_each_cell(grid, |i, c| {
        for a in 0..dims.len() {
            counts[a][i] = u8::from(c[a] > 0) + u8::from(c[a] + 1 < dims[a]);
        }
    });
    counts
}

fn components_of(grid: &GridSpec, len: usize) -> Result<usize> {
    let cells = grid.cells();
    if len == 0 || len % cells != 0 {
        return Err(Error::DimensionMismatch {
            expected: cells,
            found: len,
        });
    }
    Ok(len / cells)
}

/// Negated discrete Laplacian `-Delta_h`, applied independently to each of
/// `components` stacked scalar fields.
#[derive(Debug, Clone)]
pub struct Laplacian {
    grid: GridSpec,
    components: usize,
}

impl Laplacian {
    pub fn new(grid: GridSpec, components: usize) -> Self {
        assert!(components >= 1);
        Self { grid, components }
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }
}

impl LinearOperator for Laplacian {
    fn dim(&self) -> usize {
        self.grid.cells() * self.components
    }
    fn apply_into(&self, x: &[f64], y: &mut [f64]) {
        let n = self.grid.cells();
        for (xb, yb) in x.chunks_exact(n).zip(y.chunks_exact_mut(n)) {
            neg_laplacian_block(&self.grid, xb, yb);
        }
    }
    fn diag(&self) -> Vector {
        let center: f64 = inv_h2(&self.grid).iter().map(|w| 2.0 * w).sum();
        vec![center; self.dim()]
    }
}

/// Curvature operator `Delta_h' Delta_h = Delta_h^2`, two Laplacian passes.
#[derive(Debug, Clone)]
pub struct Biharmonic {
    grid: GridSpec,
    components: usize,
}

impl Biharmonic {
    pub fn new(grid: GridSpec, components: usize) -> Self {
        assert!(components >= 1);
        Self { grid, components }
    }
}

impl LinearOperator for Biharmonic {
    fn dim(&self) -> usize {
        self.grid.cells() * self.components
    }
    fn apply_into(&self, x: &[f64], y: &mut [f64]) {
        let n = self.grid.cells();
        let mut tmp = vec![0.0; n];
        for (xb, yb) in x.chunks_exact(n).zip(y.chunks_exact_mut(n)) {
            neg_laplacian_block(&self.grid, xb, &mut tmp);
            neg_laplacian_block(&self.grid, &tmp, yb);
        }
    }
    fn diag(&self) -> Vector {
        // (L^2)_ii = L_ii^2 + sum over in-grid neighbours of L_ij^2
        let w = inv_h2(&self.grid);
        let center: f64 = w.iter().map(|v| 2.0 * v).sum();
        let counts = neighbour_counts(&self.grid);
        let block: Vector = (0..self.grid.cells())
            .map(|i| {
                center * center
                    + counts
                        .iter()
                        .zip(&w)
                        .map(|(cnt, wa)| f64::from(cnt[i]) * wa * wa)
                        .sum::<f64>()
            })
            .collect();
        block.repeat(self.components)
    }
}

/// Linear elastic operator `mu*(-Delta) + (mu + lambda)*D'D` on a displacement
/// with one component per grid axis, `D` the central-difference divergence.
#[derive(Debug, Clone)]
pub struct Elastic {
    grid: GridSpec,
    mu: f64,
    lambda: f64,
}

impl Elastic {
    pub fn new(grid: GridSpec, mu: f64, lambda: f64) -> Result<Self> {
        if !(mu > 0.0) || mu + lambda < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "elastic constants need mu > 0 and mu + lambda >= 0 (mu={mu}, lambda={lambda})"
            )));
        }
        Ok(Self { grid, mu, lambda })
    }
}

impl LinearOperator for Elastic {
    fn dim(&self) -> usize {
        self.grid.cells() * self.grid.ndim()
    }
    fn apply_into(&self, x: &[f64], y: &mut [f64]) {
        let n = self.grid.cells();
        for (xb, yb) in x.chunks_exact(n).zip(y.chunks_exact_mut(n)) {
            neg_laplacian_block(&self.grid, xb, yb);
            yb.iter_mut().for_each(|v| *v *= self.mu);
        }
        let k = self.mu + self.lambda;
        if k == 0.0 {
            return;
        }
        let mut div = vec![0.0; n];
        for (a, xb) in x.chunks_exact(n).enumerate() {
            central_diff_acc(&self.grid, a, 1.0, xb, &mut div);
        }
        // the central difference is antisymmetric, so D' = -C per component
        for (a, yb) in y.chunks_exact_mut(n).enumerate() {
            central_diff_acc(&self.grid, a, -k, &div, yb);
        }
    }
    fn diag(&self) -> Vector {
        let w = inv_h2(&self.grid);
        let center: f64 = w.iter().map(|v| 2.0 * v).sum();
        let counts = neighbour_counts(&self.grid);
        let k = self.mu + self.lambda;
        let mut d = Vec::with_capacity(self.dim());
        for (a, cnt) in counts.iter().enumerate() {
            let h = self.grid.spacing()[a];
            d.extend(
                cnt.iter()
                    .map(|&c| self.mu * center + k * f64::from(c) / (4.0 * h * h)),
            );
        }
        d
    }
}

/// `-Delta_h v` for one or more stacked scalar fields on `grid`.
pub fn laplacian_apply(grid: &GridSpec, v: &[f64]) -> Result<Vector> {
    let comps = components_of(grid, v.len())?;
    Laplacian::new(grid.clone(), comps).apply(v)
}

/// `Delta_h^2 v` for one or more stacked scalar fields on `grid`.
pub fn biharmonic_apply(grid: &GridSpec, v: &[f64]) -> Result<Vector> {
    let comps = components_of(grid, v.len())?;
    Biharmonic::new(grid.clone(), comps).apply(v)
}
