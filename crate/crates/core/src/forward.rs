//! Linear forward operators `A` and the measurement model `y = Ax + ε`.
//!
//! Every operator knows the exact structure of `A Aᵀ`: coordinate masks give
//! the identity, block averaging gives a scaled identity, and the general
//! kinds materialize the product densely so the posterior module can factor
//! `σ²I + τ²AAᵀ`.

use alloc::vec;
use alloc::vec::Vec;
use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::linalg::symmetrize;
use crate::math;
use crate::rng::RngHandle;
use crate::vector::Vec64;

/// Largest input dimension for which a dense `m x n` materialization of an
/// operator is permitted.
pub const DENSE_LIMIT: usize = 16_384;

/// Shape of the signal grid an operator acts on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GridShape {
    pub height: usize,
    pub width: usize,
    pub channels: usize,
}

impl GridShape {
    pub fn new(height: usize, width: usize, channels: usize) -> Result<Self> {
        if height == 0 || width == 0 || channels == 0 {
            return Err(Error::invalid("grid shape must be positive"));
        }
        Ok(GridShape {
            height,
            width,
            channels,
        })
    }

    pub fn pixels(&self) -> usize {
        self.height * self.width
    }

    pub fn scalars(&self) -> usize {
        self.height * self.width * self.channels
    }
}

/// Exact structure of `A Aᵀ`.
#[derive(Debug, Clone)]
pub enum AatStructure {
    /// `A Aᵀ = c I_m`.
    ScaledIdentity(f64),
    /// Dense symmetric positive semidefinite `m x m` product.
    DenseSpd(DMatrix<f64>),
}

/// Operator payloads. Masks store the observed scalar index set Ω sorted
/// ascending; block averaging stores the per-axis factor; convolution stores
/// a separable 1-D kernel applied per channel with reflect padding.
#[derive(Debug, Clone)]
pub enum OperatorKind {
    RandomMask { omega: Vec<usize>, keep_fraction: f64 },
    BoxMask { omega: Vec<usize>, box_fraction: f64, box_side: usize },
    BlockAverage { factor: usize },
    Convolution { kernel: Vec<f64>, kernel_size: usize, intensity: f64 },
    Dense { entries: Vec<f64> },
}

/// A linear map `A: R^n -> R^m` with structural metadata.
#[derive(Debug, Clone)]
pub struct LinearOperator {
    kind: OperatorKind,
    shape: Option<GridShape>,
    n: usize,
    m: usize,
}

/// One noisy measurement `y = A x + ε`, `ε ~ N(0, σ² I_m)`.
#[derive(Debug, Clone)]
pub struct Observation {
    pub y: Vec64,
    pub operator: LinearOperator,
    pub noise_sigma: f64,
}

impl Observation {
    pub fn new(y: Vec64, operator: LinearOperator, noise_sigma: f64) -> Result<Self> {
        if y.len() != operator.m() {
            return Err(Error::dims(operator.m(), y.len()));
        }
        if noise_sigma < 0.0 {
            return Err(Error::invalid("noise sigma must be >= 0"));
        }
        Ok(Observation {
            y,
            operator,
            noise_sigma,
        })
    }
}

fn validate_mask(omega: &[usize], n: usize) -> Result<()> {
    if omega.is_empty() {
        return Err(Error::invalid("mask must observe at least one scalar"));
    }
    if !omega.windows(2).all(|w| w[0] < w[1]) {
        return Err(Error::invalid("mask indices must be strictly increasing"));
    }
    if *omega.last().unwrap() >= n {
        return Err(Error::invalid("mask index out of range"));
    }
    Ok(())
}

impl LinearOperator {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn kind(&self) -> &OperatorKind {
        &self.kind
    }

    pub fn shape(&self) -> Option<GridShape> {
        self.shape
    }

    /// Observed scalar index set for the mask kinds.
    pub fn mask_indices(&self) -> Option<&[usize]> {
        match &self.kind {
            OperatorKind::RandomMask { omega, .. } | OperatorKind::BoxMask { omega, .. } => {
                Some(omega)
            }
            _ => None,
        }
    }

    /// Mask keeping a uniformly sampled fraction of pixel positions; all
    /// channels of a kept pixel are observed together.
    pub fn random_mask(shape: GridShape, keep_fraction: f64, rng: &mut RngHandle) -> Result<Self> {
        if !(keep_fraction > 0.0 && keep_fraction <= 1.0) {
            return Err(Error::invalid("keep_fraction must be in (0, 1]"));
        }
        let keep = math::round(keep_fraction * shape.pixels() as f64) as usize;
        if keep == 0 {
            return Err(Error::invalid("keep_fraction keeps zero pixels"));
        }
        let pixels = rng.sample_indices(shape.pixels(), keep)?;
        let omega: Vec<usize> = pixels
            .iter()
            .flat_map(|&p| (0..shape.channels).map(move |ch| p * shape.channels + ch))
            .collect();
        let n = shape.scalars();
        validate_mask(&omega, n)?;
        Ok(LinearOperator {
            m: omega.len(),
            kind: OperatorKind::RandomMask {
                omega,
                keep_fraction,
            },
            shape: Some(shape),
            n,
        })
    }

    /// Mask removing a centered square of side `ceil(fraction * min(h, w))`
    /// pixels across all channels.
    pub fn box_mask(shape: GridShape, box_fraction: f64) -> Result<Self> {
        if !(box_fraction > 0.0 && box_fraction <= 1.0) {
            return Err(Error::invalid("box_fraction must be in (0, 1]"));
        }
        let min_side = shape.height.min(shape.width);
        let side = math::ceil(box_fraction * min_side as f64) as usize;
        let top = (shape.height - side) / 2;
        let left = (shape.width - side) / 2;
        let mut omega = Vec::new();
        for y in 0..shape.height {
            for x in 0..shape.width {
                let removed =
                    y >= top && y < top + side && x >= left && x < left + side;
                if !removed {
                    let p = y * shape.width + x;
                    omega.extend((0..shape.channels).map(|ch| p * shape.channels + ch));
                }
            }
        }
        if omega.is_empty() {
            return Err(Error::invalid("box mask removes every pixel"));
        }
        let n = shape.scalars();
        validate_mask(&omega, n)?;
        Ok(LinearOperator {
            m: omega.len(),
            kind: OperatorKind::BoxMask {
                omega,
                box_fraction,
                box_side: side,
            },
            shape: Some(shape),
            n,
        })
    }

    /// Mask with an explicit observed index set (testing and descriptors).
    pub fn mask_from_indices(shape: GridShape, omega: Vec<usize>) -> Result<Self> {
        let n = shape.scalars();
        validate_mask(&omega, n)?;
        Ok(LinearOperator {
            m: omega.len(),
            kind: OperatorKind::RandomMask {
                omega,
                keep_fraction: f64::NAN,
            },
            shape: Some(shape),
            n,
        })
    }

    /// Non-overlapping `factor x factor` block means per channel.
    pub fn block_average(shape: GridShape, factor: usize) -> Result<Self> {
        if factor == 0 {
            return Err(Error::invalid("block factor must be positive"));
        }
        if shape.height % factor != 0 || shape.width % factor != 0 {
            return Err(Error::invalid(
                "block factor must divide both spatial dims",
            ));
        }
        let m = (shape.height / factor) * (shape.width / factor) * shape.channels;
        Ok(LinearOperator {
            kind: OperatorKind::BlockAverage { factor },
            shape: Some(shape),
            n: shape.scalars(),
            m,
        })
    }

    /// Normalized truncated-Gaussian blur, standard deviation `intensity`,
    /// applied per channel with reflect padding. Separable, so only the 1-D
    /// kernel is stored; the dense matrix is materialized on demand.
    pub fn gaussian_blur(shape: GridShape, kernel_size: usize, intensity: f64) -> Result<Self> {
        if kernel_size % 2 == 0 || kernel_size == 0 {
            return Err(Error::invalid("kernel size must be odd"));
        }
        if !(intensity > 0.0) {
            return Err(Error::invalid("blur intensity must be positive"));
        }
        let r = (kernel_size / 2) as i64;
        let mut kernel: Vec<f64> = (-r..=r)
            .map(|k| math::exp(-(k as f64) * (k as f64) / (2.0 * intensity * intensity)))
            .collect();
        let sum: f64 = kernel.iter().sum();
        for w in &mut kernel {
            *w /= sum;
        }
        let n = shape.scalars();
        Ok(LinearOperator {
            kind: OperatorKind::Convolution {
                kernel,
                kernel_size,
                intensity,
            },
            shape: Some(shape),
            n,
            m: n,
        })
    }

    /// Dense `rows x cols` matrix, row-major entries.
    pub fn dense(rows: usize, cols: usize, entries: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::invalid("dense operator dims must be positive"));
        }
        if entries.len() != rows * cols {
            return Err(Error::dims(rows * cols, entries.len()));
        }
        if entries.iter().any(|e| !e.is_finite()) {
            return Err(Error::invalid("dense operator entries must be finite"));
        }
        Ok(LinearOperator {
            kind: OperatorKind::Dense { entries },
            shape: None,
            n: cols,
            m: rows,
        })
    }

    /// Dense operator that also remembers the grid shape it acts on.
    pub fn dense_on_grid(shape: GridShape, entries: Vec<f64>, rows: usize) -> Result<Self> {
        let mut op = Self::dense(rows, shape.scalars(), entries)?;
        op.shape = Some(shape);
        Ok(op)
    }

    pub fn identity(n: usize) -> Result<Self> {
        let mut entries = vec![0.0; n * n];
        for i in 0..n {
            entries[i * n + i] = 1.0;
        }
        Self::dense(n, n, entries)
    }

    /// `A x`.
    pub fn apply(&self, x: &Vec64) -> Result<Vec64> {
        if x.len() != self.n {
            return Err(Error::dims(self.n, x.len()));
        }
        let out = match &self.kind {
            OperatorKind::RandomMask { omega, .. } | OperatorKind::BoxMask { omega, .. } => {
                omega.iter().map(|&i| x[i]).collect()
            }
            OperatorKind::BlockAverage { factor } => {
                let shape = self.shape.expect("block average always has a shape");
                block_average_apply(x.as_slice(), shape, *factor)
            }
            OperatorKind::Convolution { kernel, .. } => {
                let shape = self.shape.expect("convolution always has a shape");
                convolve_separable(x.as_slice(), shape, kernel, false)
            }
            OperatorKind::Dense { entries } => {
                let mut out = vec![0.0; self.m];
                for (i, row) in entries.chunks_exact(self.n).enumerate() {
                    out[i] = row.iter().zip(x.iter()).map(|(a, b)| a * b).sum();
                }
                out
            }
        };
        Ok(Vec64::from_vec_unchecked(out))
    }

    /// `Aᵀ v`.
    pub fn adjoint(&self, v: &Vec64) -> Result<Vec64> {
        if v.len() != self.m {
            return Err(Error::dims(self.m, v.len()));
        }
        let out = match &self.kind {
            OperatorKind::RandomMask { omega, .. } | OperatorKind::BoxMask { omega, .. } => {
                let mut out = vec![0.0; self.n];
                for (slot, &i) in omega.iter().enumerate() {
                    out[i] = v[slot];
                }
                out
            }
            OperatorKind::BlockAverage { factor } => {
                let shape = self.shape.expect("block average always has a shape");
                block_average_adjoint(v.as_slice(), shape, *factor)
            }
            OperatorKind::Convolution { kernel, .. } => {
                let shape = self.shape.expect("convolution always has a shape");
                convolve_separable(v.as_slice(), shape, kernel, true)
            }
            OperatorKind::Dense { entries } => {
                let mut out = vec![0.0; self.n];
                for (i, row) in entries.chunks_exact(self.n).enumerate() {
                    let vi = v[i];
                    for (o, a) in out.iter_mut().zip(row) {
                        *o += a * vi;
                    }
                }
                out
            }
        };
        Ok(Vec64::from_vec_unchecked(out))
    }

    /// Exact structure of `A Aᵀ`.
    pub fn aat_structure(&self) -> AatStructure {
        match &self.kind {
            OperatorKind::RandomMask { .. } | OperatorKind::BoxMask { .. } => {
                AatStructure::ScaledIdentity(1.0)
            }
            OperatorKind::BlockAverage { factor } => {
                // Each row averages factor^2 scalars with weight 1/factor^2.
                AatStructure::ScaledIdentity(1.0 / ((factor * factor) as f64))
            }
            OperatorKind::Convolution { .. } | OperatorKind::Dense { .. } => {
                let a = self.to_dense().expect("dense limit checked at build");
                let mut aat = &a * a.transpose();
                symmetrize(&mut aat);
                AatStructure::DenseSpd(aat)
            }
        }
    }

    /// Materializes `A` by probing columns with basis vectors.
    pub fn to_dense(&self) -> Result<DMatrix<f64>> {
        if self.n > DENSE_LIMIT {
            return Err(Error::invalid(
                "dense materialization limited to n <= 16384",
            ));
        }
        if let OperatorKind::Dense { entries } = &self.kind {
            return Ok(DMatrix::from_row_slice(self.m, self.n, entries));
        }
        let mut a = DMatrix::zeros(self.m, self.n);
        let mut e = Vec64::zeros(self.n).into_vec();
        for j in 0..self.n {
            e[j] = 1.0;
            let col = self.apply(&Vec64::from_vec_unchecked(e.clone()))?;
            for i in 0..self.m {
                a[(i, j)] = col[i];
            }
            e[j] = 0.0;
        }
        Ok(a)
    }

    /// `y = A x_true + σ ε`. With `σ = 0` the measurement is exact and the
    /// stream is not advanced.
    pub fn observe(&self, x_true: &Vec64, sigma: f64, rng: &mut RngHandle) -> Result<Observation> {
        if sigma < 0.0 {
            return Err(Error::invalid("noise sigma must be >= 0"));
        }
        let mut y = self.apply(x_true)?.into_vec();
        if sigma > 0.0 {
            for v in &mut y {
                *v += sigma * rng.normal();
            }
        }
        Observation::new(Vec64::from_vec_unchecked(y), self.clone(), sigma)
    }
}

fn block_average_apply(x: &[f64], shape: GridShape, factor: usize) -> Vec<f64> {
    let (h, w, c) = (shape.height, shape.width, shape.channels);
    let (bh, bw) = (h / factor, w / factor);
    let inv = 1.0 / ((factor * factor) as f64);
    let mut out = vec![0.0; bh * bw * c];
    for by in 0..bh {
        for bx in 0..bw {
            for ch in 0..c {
                let mut acc = 0.0;
                for dy in 0..factor {
                    for dx in 0..factor {
                        let p = (by * factor + dy) * w + (bx * factor + dx);
                        acc += x[p * c + ch];
                    }
                }
                out[(by * bw + bx) * c + ch] = acc * inv;
            }
        }
    }
    out
}

fn block_average_adjoint(v: &[f64], shape: GridShape, factor: usize) -> Vec<f64> {
    let (h, w, c) = (shape.height, shape.width, shape.channels);
    let (bh, bw) = (h / factor, w / factor);
    let inv = 1.0 / ((factor * factor) as f64);
    let mut out = vec![0.0; h * w * c];
    for by in 0..bh {
        for bx in 0..bw {
            for ch in 0..c {
                let val = v[(by * bw + bx) * c + ch] * inv;
                for dy in 0..factor {
                    for dx in 0..factor {
                        let p = (by * factor + dy) * w + (bx * factor + dx);
                        out[p * c + ch] = val;
                    }
                }
            }
        }
    }
    out
}

/// Mirror index into `[0, len)` without repeating the edge sample's
/// neighbor (symmetric padding: -1 -> 0, len -> len-1).
fn reflect(i: i64, len: usize) -> usize {
    let len = len as i64;
    let mut i = i;
    loop {
        if i < 0 {
            i = -i - 1;
        } else if i >= len {
            i = 2 * len - 1 - i;
        } else {
            return i as usize;
        }
    }
}

/// Separable per-channel convolution over rows then columns. The forward
/// pass gathers through the reflect map; the adjoint scatters through the
/// same map, which is the exact transpose.
fn convolve_separable(x: &[f64], shape: GridShape, kernel: &[f64], adjoint: bool) -> Vec<f64> {
    let (h, w, c) = (shape.height, shape.width, shape.channels);
    let r = (kernel.len() / 2) as i64;
    let idx = |y: usize, xx: usize, ch: usize| (y * w + xx) * c + ch;

    let pass_rows = |src: &[f64], dst: &mut [f64]| {
        for y in 0..h {
            for xx in 0..w {
                for ch in 0..c {
                    if adjoint {
                        let val = src[idx(y, xx, ch)];
                        for (k, &wk) in kernel.iter().enumerate() {
                            let sx = reflect(xx as i64 + k as i64 - r, w);
                            dst[idx(y, sx, ch)] += wk * val;
                        }
                    } else {
                        let mut acc = 0.0;
                        for (k, &wk) in kernel.iter().enumerate() {
                            let sx = reflect(xx as i64 + k as i64 - r, w);
                            acc += wk * src[idx(y, sx, ch)];
                        }
                        dst[idx(y, xx, ch)] = acc;
                    }
                }
            }
        }
    };
    let pass_cols = |src: &[f64], dst: &mut [f64]| {
        for y in 0..h {
            for xx in 0..w {
                for ch in 0..c {
                    if adjoint {
                        let val = src[idx(y, xx, ch)];
                        for (k, &wk) in kernel.iter().enumerate() {
                            let sy = reflect(y as i64 + k as i64 - r, h);
                            dst[idx(sy, xx, ch)] += wk * val;
                        }
                    } else {
                        let mut acc = 0.0;
                        for (k, &wk) in kernel.iter().enumerate() {
                            let sy = reflect(y as i64 + k as i64 - r, h);
                            acc += wk * src[idx(sy, xx, ch)];
                        }
                        dst[idx(y, xx, ch)] = acc;
                    }
                }
            }
        }
    };

    let mut tmp = vec![0.0; x.len()];
    let mut out = vec![0.0; x.len()];
    if adjoint {
        // (Rows ∘ Cols)ᵀ = Colsᵀ ∘ Rowsᵀ, and forward order below is
        // cols-after-rows, so the adjoint scatters cols first.
        pass_cols(x, &mut tmp);
        pass_rows(&tmp, &mut out);
    } else {
        pass_rows(x, &mut tmp);
        pass_cols(&tmp, &mut out);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn shape(h: usize, w: usize, c: usize) -> GridShape {
        GridShape::new(h, w, c).unwrap()
    }

    #[test]
    fn random_mask_projects_coordinates() {
        let op = LinearOperator::mask_from_indices(shape(1, 3, 1), vec![0, 2]).unwrap();
        let x = Vec64::new(vec![3.0, 4.0, 5.0]).unwrap();
        assert_eq!(op.apply(&x).unwrap().as_slice(), &[3.0, 5.0]);

        let v = Vec64::new(vec![1.0, 2.0]).unwrap();
        assert_eq!(op.adjoint(&v).unwrap().as_slice(), &[1.0, 0.0, 2.0]);
    }

    #[test]
    fn block_average_means_and_adjoint() {
        let op = LinearOperator::block_average(shape(2, 2, 1), 2).unwrap();
        let x = Vec64::new(vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(op.apply(&x).unwrap().as_slice(), &[2.5]);
        let v = Vec64::new(vec![8.0]).unwrap();
        assert_eq!(op.adjoint(&v).unwrap().as_slice(), &[2.0, 2.0, 2.0, 2.0]);
    }

    #[test]
    fn dense_identity_is_identity() {
        let op = LinearOperator::identity(3).unwrap();
        let x = Vec64::new(vec![0.1, -0.2, 0.3]).unwrap();
        assert_eq!(op.apply(&x).unwrap(), x);
    }

    #[test]
    fn aat_structure_scaled_identities() {
        let mut rng = RngHandle::new(0);
        let mask = LinearOperator::random_mask(shape(4, 4, 3), 0.5, &mut rng).unwrap();
        match mask.aat_structure() {
            AatStructure::ScaledIdentity(c) => assert_eq!(c, 1.0),
            _ => panic!("mask AAt must be scaled identity"),
        }
        // Per-axis factor 4 averages 16 scalars per row: AAt = (1/16) I.
        let ba = LinearOperator::block_average(shape(16, 16, 1), 4).unwrap();
        match ba.aat_structure() {
            AatStructure::ScaledIdentity(c) => assert_eq!(c, 0.0625),
            _ => panic!("block average AAt must be scaled identity"),
        }
    }

    #[test]
    fn aat_dense_matches_brute_force_probe() {
        let entries = vec![2.0, 0.0, 0.0, 2.0];
        let op = LinearOperator::dense(2, 2, entries).unwrap();
        match op.aat_structure() {
            AatStructure::DenseSpd(aat) => {
                assert_relative_eq!(aat[(0, 0)], 4.0, max_relative = 1e-15);
                assert_relative_eq!(aat[(1, 1)], 4.0, max_relative = 1e-15);
                assert_eq!(aat[(0, 1)], 0.0);
            }
            _ => panic!("dense AAt expected"),
        }

        // Brute force from basis probes for every kind.
        let mut rng = RngHandle::new(3);
        let ops = [
            LinearOperator::random_mask(shape(3, 4, 2), 0.4, &mut rng).unwrap(),
            LinearOperator::block_average(shape(4, 4, 2), 2).unwrap(),
            LinearOperator::gaussian_blur(shape(4, 4, 1), 3, 1.0).unwrap(),
        ];
        for op in ops {
            let a = op.to_dense().unwrap();
            let brute = &a * a.transpose();
            match op.aat_structure() {
                AatStructure::ScaledIdentity(c) => {
                    for i in 0..op.m() {
                        for j in 0..op.m() {
                            let want = if i == j { c } else { 0.0 };
                            assert!(
                                (brute[(i, j)] - want).abs() < 1e-12,
                                "AAt mismatch at ({i},{j})"
                            );
                        }
                    }
                }
                AatStructure::DenseSpd(aat) => {
                    for i in 0..op.m() {
                        for j in 0..op.m() {
                            assert!((brute[(i, j)] - aat[(i, j)]).abs() < 1e-12);
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn mask_projector_is_idempotent_and_symmetric() {
        let mut rng = RngHandle::new(11);
        let op = LinearOperator::random_mask(shape(4, 4, 1), 0.5, &mut rng).unwrap();
        let x = rng.gaussian_vector(16).unwrap();
        let px = op.adjoint(&op.apply(&x).unwrap()).unwrap();
        let ppx = op.adjoint(&op.apply(&px).unwrap()).unwrap();
        assert_relative_eq!(px.squared_distance(&ppx), 0.0, epsilon = 1e-24);
        // Symmetry: <Px, y> = <x, Py>.
        let y = rng.gaussian_vector(16).unwrap();
        let py = op.adjoint(&op.apply(&y).unwrap()).unwrap();
        assert_relative_eq!(px.dot(&y), x.dot(&py), max_relative = 1e-12);
    }

    #[test]
    fn mask_counts_match_formulas() {
        let mut rng = RngHandle::new(0);
        // round(0.3 * 256) = 77 pixels -> 231 scalars.
        let op = LinearOperator::random_mask(shape(16, 16, 3), 0.3, &mut rng).unwrap();
        assert_eq!(op.m(), 231);

        // ceil(0.6 * 16) = 10: a 10x10 box is removed.
        let op = LinearOperator::box_mask(shape(16, 16, 1), 0.6).unwrap();
        match op.kind() {
            OperatorKind::BoxMask { box_side, .. } => assert_eq!(*box_side, 10),
            _ => unreachable!(),
        }
        assert_eq!(op.m(), 256 - 100);

        // Factor 16 on 64x64x3 leaves 4*4*3 measurements.
        let op = LinearOperator::block_average(shape(64, 64, 3), 16).unwrap();
        assert_eq!(op.m(), 48);
    }

    #[test]
    fn blur_kernel_preserves_constants() {
        let op = LinearOperator::gaussian_blur(shape(8, 8, 2), 5, 1.5).unwrap();
        let x = Vec64::new(vec![0.37; 128]).unwrap();
        let y = op.apply(&x).unwrap();
        for &v in y.iter() {
            assert!((v - 0.37).abs() < 1e-12);
        }
        if let OperatorKind::Convolution { kernel, .. } = op.kind() {
            assert_relative_eq!(kernel.iter().sum::<f64>(), 1.0, max_relative = 1e-14);
        } else {
            panic!("expected convolution kind");
        }
    }

    #[test]
    fn observe_noise_scale() {
        let mut rng = RngHandle::new(21);
        let op = LinearOperator::identity(4).unwrap();
        let x = Vec64::new(vec![0.1, 0.2, 0.3, 0.4]).unwrap();
        let obs = op.observe(&x, 0.0, &mut rng).unwrap();
        assert_eq!(obs.y, x);

        // Empirical std of y - Ax over 1e5 scalar draws within 1% of sigma.
        let sigma = 0.25;
        let mut sumsq = 0.0;
        let mut count = 0usize;
        for trial in 0..25_000u64 {
            let mut child = rng.child(trial);
            let obs = op.observe(&x, sigma, &mut child).unwrap();
            for i in 0..4 {
                let d = obs.y[i] - x[i];
                sumsq += d * d;
                count += 1;
            }
        }
        let std = math::sqrt(sumsq / count as f64);
        assert!((std - sigma).abs() < 0.01 * sigma, "std {std}");
    }

    #[test]
    fn invalid_constructions_are_rejected() {
        let mut rng = RngHandle::new(0);
        assert!(LinearOperator::random_mask(shape(4, 4, 1), 0.0, &mut rng).is_err());
        assert!(LinearOperator::random_mask(shape(4, 4, 1), 1.2, &mut rng).is_err());
        assert!(LinearOperator::block_average(shape(6, 4, 1), 4).is_err());
        assert!(LinearOperator::gaussian_blur(shape(4, 4, 1), 4, 1.0).is_err());
        assert!(LinearOperator::gaussian_blur(shape(4, 4, 1), 3, 0.0).is_err());
        assert!(LinearOperator::dense(2, 2, vec![1.0; 3]).is_err());
        let op = LinearOperator::identity(3).unwrap();
        let short = Vec64::new(vec![1.0, 2.0]).unwrap();
        assert!(matches!(
            op.apply(&short),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(matches!(
            op.adjoint(&short),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn adjoint_identity_over_all_kinds(seed in 0u64..5_000) {
            let mut rng = RngHandle::new(seed);
            let s = shape(4, 4, 2);
            let n = s.scalars();
            let which = seed % 4;
            let op = match which {
                0 => LinearOperator::random_mask(s, 0.3 + 0.5 * rng.uniform(), &mut rng).unwrap(),
                1 => LinearOperator::box_mask(s, 0.3 + 0.5 * rng.uniform()).unwrap(),
                2 => LinearOperator::block_average(s, 2).unwrap(),
                _ => LinearOperator::gaussian_blur(s, 3, 0.5 + rng.uniform()).unwrap(),
            };
            let x = rng.gaussian_vector(n).unwrap();
            let v = rng.gaussian_vector(op.m()).unwrap();
            let lhs = op.apply(&x).unwrap().dot(&v);
            let rhs = x.dot(&op.adjoint(&v).unwrap());
            prop_assert!((lhs - rhs).abs() < 1e-10, "<Ax,v>={lhs} vs <x,Atv>={rhs}");
        }

        #[test]
        fn dense_adjoint_identity(seed in 0u64..2_000) {
            let mut rng = RngHandle::new(seed);
            let (m, n) = (3usize, 5usize);
            let entries: Vec<f64> = (0..m * n).map(|_| rng.normal()).collect();
            let op = LinearOperator::dense(m, n, entries).unwrap();
            let x = rng.gaussian_vector(n).unwrap();
            let v = rng.gaussian_vector(m).unwrap();
            let lhs = op.apply(&x).unwrap().dot(&v);
            let rhs = x.dot(&op.adjoint(&v).unwrap());
            prop_assert!((lhs - rhs).abs() < 1e-10);
        }
    }
}
