//! Exact real-valued functions on the ±1 hypercube and their Fourier–Walsh spectra.
//!
//! # Index convention
//!
//! A point of `{±1}^n` is stored as an `n`-bit mask: bit `i` holds coordinate
//! `i + 1`, a set bit means `-1` and a clear bit means `+1`. Mask `0` is the
//! all-`(+1)` point. Subsets `T ⊆ [n]` use the same bit layout, so
//! `χ_T(x) = (-1)^{popcount(T & x)}`.
//!
//! Coordinates in the public API are 1-based (`1..=n`).

use crate::error::{Error, Result};

/// Largest supported input dimension (2^24 doubles = 128 MiB).
pub const MAX_DIM: usize = 24;

pub(crate) fn check_dim(n: usize) -> Result<()> {
    if (1..=MAX_DIM).contains(&n) {
        Ok(())
    } else {
        Err(Error::DimensionOutOfRange { n, max: MAX_DIM })
    }
}

pub(crate) fn check_coord(k: usize, n: usize) -> Result<()> {
    if (1..=n).contains(&k) {
        Ok(())
    } else {
        Err(Error::CoordinateOutOfRange { k, n })
    }
}

/// Value (`±1.0`) of the 0-based coordinate `i` at point `mask`.
#[inline]
pub fn coord(mask: u32, i: usize) -> f64 {
    if (mask >> i) & 1 == 1 {
        -1.0
    } else {
        1.0
    }
}

/// The ±1 coordinates of `mask` as a vector of length `n`.
pub fn point(n: usize, mask: u32) -> Vec<f64> {
    (0..n).map(|i| coord(mask, i)).collect()
}

/// Inverse of [`point`]; entries are read by sign (negative ↦ set bit).
pub fn mask_of(x: &[f64]) -> u32 {
    x.iter()
        .enumerate()
        .fold(0u32, |m, (i, &v)| if v < 0.0 { m | (1 << i) } else { m })
}

/// Walsh character `χ_T(x)`.
#[inline]
pub fn character(subset: u32, point: u32) -> f64 {
    if (subset & point).count_ones() & 1 == 1 {
        -1.0
    } else {
        1.0
    }
}

/// Mask of a 1-based coordinate list, e.g. `&[2, 3]` ↦ `0b110`.
pub fn subset_mask(coords: &[usize]) -> u32 {
    coords.iter().fold(0u32, |m, &c| m | (1 << (c - 1)))
}

/// 1-based coordinates contained in `mask`.
pub fn subset_coords(mask: u32) -> Vec<usize> {
    (0..32).filter(|i| (mask >> i) & 1 == 1).map(|i| i + 1).collect()
}

/// Unnormalized in-place Walsh–Hadamard butterfly: `y[T] = Σ_x χ_T(x) v[x]`.
///
/// The length must be a power of two. Applying it twice multiplies by the length.
pub fn fwht(buf: &mut [f64]) {
    let len = buf.len();
    assert!(len.is_power_of_two(), "fwht length must be a power of two");
    let mut h = 1;
    while h < len {
        for block in buf.chunks_mut(2 * h) {
            let (lo, hi) = block.split_at_mut(h);
            for (a, b) in lo.iter_mut().zip(hi.iter_mut()) {
                let (x, y) = (*a, *b);
                *a = x + y;
                *b = x - y;
            }
        }
        h *= 2;
    }
}

/// A real-valued function on `{±1}^n`, stored as its full truth table.
#[derive(Debug, Clone, PartialEq)]
pub struct BooleanFunction {
    n: usize,
    values: Vec<f64>,
}

impl BooleanFunction {
    /// Tabulates `eval` on all `2^n` points in mask order.
    pub fn from_evaluator<F>(n: usize, mut eval: F) -> Result<Self>
    where
        F: FnMut(&[f64]) -> f64,
    {
        check_dim(n)?;
        let mut x = vec![1.0; n];
        let mut values = Vec::with_capacity(1 << n);
        for mask in 0..(1u32 << n) {
            for (i, xi) in x.iter_mut().enumerate() {
                *xi = coord(mask, i);
            }
            values.push(eval(&x));
        }
        Self::from_values(n, values)
    }

    pub fn from_values(n: usize, values: Vec<f64>) -> Result<Self> {
        check_dim(n)?;
        if values.len() != 1 << n {
            return Err(Error::TableLength {
                expected: 1 << n,
                got: values.len(),
            });
        }
        if let Some(index) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { index });
        }
        Ok(Self { n, values })
    }

    pub fn constant(n: usize, c: f64) -> Result<Self> {
        check_dim(n)?;
        Self::from_values(n, vec![c; 1 << n])
    }

    /// The dictator `x_k`.
    pub fn dictator(n: usize, k: usize) -> Result<Self> {
        check_dim(n)?;
        check_coord(k, n)?;
        Ok(Self::character(n, 1 << (k - 1)))
    }

    /// `χ_T` as a function.
    pub fn character(n: usize, subset: u32) -> Self {
        let values = (0..1u32 << n).map(|m| character(subset, m)).collect();
        Self { n, values }
    }

    /// Majority `sign(x_1 + … + x_n)` with output `0` on ties.
    pub fn majority(n: usize) -> Result<Self> {
        Self::from_evaluator(n, |x| {
            let s: f64 = x.iter().sum();
            if s > 0.0 {
                1.0
            } else if s < 0.0 {
                -1.0
            } else {
                0.0
            }
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn value(&self, mask: u32) -> f64 {
        self.values[mask as usize]
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Every entry is exactly `+1` or `-1`.
    pub fn is_pm_one(&self) -> bool {
        self.values.iter().all(|&v| v == 1.0 || v == -1.0)
    }

    pub fn is_balanced(&self, tol: f64) -> bool {
        self.mean().abs() <= tol
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.len() as f64
    }

    pub fn fourier_transform(&self) -> FourierSpectrum {
        let mut coeffs = self.values.clone();
        fwht(&mut coeffs);
        let scale = 1.0 / coeffs.len() as f64;
        coeffs.iter_mut().for_each(|c| *c *= scale);
        FourierSpectrum { n: self.n, coeffs }
    }

    /// `f_{-k}`: coordinate `k` replaced by `+1`, on the same `n` inputs.
    pub fn freeze(&self, k: usize) -> Result<Self> {
        check_coord(k, self.n)?;
        let clear = !(1u32 << (k - 1));
        let values = (0..self.len() as u32)
            .map(|m| self.values[(m & clear) as usize])
            .collect();
        Ok(Self { n: self.n, values })
    }

    /// The `big_n`-extension, ignoring coordinates `n+1..=big_n`.
    pub fn extend(&self, big_n: usize) -> Result<Self> {
        if big_n <= self.n {
            return Err(Error::InvalidExtension {
                n: self.n,
                target: big_n,
            });
        }
        check_dim(big_n)?;
        let low = (1u32 << self.n) - 1;
        let values = (0..1u32 << big_n)
            .map(|m| self.values[(m & low) as usize])
            .collect();
        Ok(Self { n: big_n, values })
    }

    /// `(f∘π)(x) = f(x_{π(1)}, …, x_{π(n)})` with `perm[i] = π(i+1) - 1`.
    pub fn compose_permutation(&self, perm: &[usize]) -> Result<Self> {
        if perm.len() != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                got: perm.len(),
            });
        }
        let values = (0..self.len() as u32)
            .map(|m| self.values[permute_mask(m, perm) as usize])
            .collect();
        Ok(Self { n: self.n, values })
    }

    /// `E_X[f(X) g(X)]` under the uniform distribution.
    pub fn correlation(&self, other: &Self) -> Result<f64> {
        self.same_dim(other)?;
        let dot: f64 = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a * b)
            .sum();
        Ok(dot / self.len() as f64)
    }

    /// `½ E_X (f(X) - g(X))²` computed on the truth tables.
    pub fn half_mean_square_distance(&self, other: &Self) -> Result<f64> {
        self.same_dim(other)?;
        let s: f64 = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b) * (a - b))
            .sum();
        Ok(0.5 * s / self.len() as f64)
    }

    fn same_dim(&self, other: &Self) -> Result<()> {
        if self.n == other.n {
            Ok(())
        } else {
            Err(Error::DimensionMismatch {
                expected: self.n,
                got: other.n,
            })
        }
    }
}

/// Point `y` with `y_i = x_{π(i)}`.
#[inline]
pub(crate) fn permute_mask(mask: u32, perm: &[usize]) -> u32 {
    perm.iter()
        .enumerate()
        .fold(0u32, |y, (i, &src)| y | (((mask >> src) & 1) << i))
}

/// Fourier–Walsh coefficients `f̂(T)` indexed by subset mask.
#[derive(Debug, Clone, PartialEq)]
pub struct FourierSpectrum {
    n: usize,
    coeffs: Vec<f64>,
}

/// The two quantities of the non-dense / non-extremal spectral conditions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DensityQueries {
    /// `Σ { f̂(T)² : f̂(T)² ≤ n^{-c} }` (boundary counted as small).
    pub small_coeff_weight: f64,
    /// `W^{≥ n-D}`.
    pub high_degree_weight: f64,
}

impl FourierSpectrum {
    pub fn new(n: usize, coeffs: Vec<f64>) -> Result<Self> {
        check_dim(n)?;
        if coeffs.len() != 1 << n {
            return Err(Error::TableLength {
                expected: 1 << n,
                got: coeffs.len(),
            });
        }
        if let Some(index) = coeffs.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { index });
        }
        Ok(Self { n, coeffs })
    }

    /// Sparse constructor; repeated masks accumulate.
    pub fn from_terms(n: usize, terms: &[(u32, f64)]) -> Result<Self> {
        check_dim(n)?;
        let mut coeffs = vec![0.0; 1 << n];
        for &(mask, c) in terms {
            if (mask as usize) >= coeffs.len() {
                return Err(Error::InvalidArgument(format!(
                    "subset mask {mask} out of range for n = {n}"
                )));
            }
            coeffs[mask as usize] += c;
        }
        Self::new(n, coeffs)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn coeff(&self, mask: u32) -> f64 {
        self.coeffs[mask as usize]
    }

    pub fn inverse_transform(&self) -> BooleanFunction {
        let mut values = self.coeffs.clone();
        fwht(&mut values);
        BooleanFunction { n: self.n, values }
    }

    /// `Σ_T f̂(T)²`, equal to `E[f²]` by Parseval.
    pub fn total_weight(&self) -> f64 {
        self.coeffs.iter().map(|c| c * c).sum()
    }

    /// `Inf_k(f) = Σ_{T ∋ k} f̂(T)²`.
    pub fn influence(&self, k: usize) -> Result<f64> {
        check_coord(k, self.n)?;
        let bit = 1usize << (k - 1);
        Ok(self
            .coeffs
            .iter()
            .enumerate()
            .filter(|(m, _)| m & bit != 0)
            .map(|(_, c)| c * c)
            .sum())
    }

    /// Influence of every coordinate, `[Inf_1, …, Inf_n]`.
    pub fn influences(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.n];
        for (m, c) in self.coeffs.iter().enumerate() {
            let w = c * c;
            for (i, o) in out.iter_mut().enumerate() {
                if (m >> i) & 1 == 1 {
                    *o += w;
                }
            }
        }
        out
    }

    /// `[W^0, …, W^n]`.
    pub fn degree_weights(&self) -> Vec<f64> {
        let mut w = vec![0.0; self.n + 1];
        for (m, c) in self.coeffs.iter().enumerate() {
            w[m.count_ones() as usize] += c * c;
        }
        w
    }

    /// `Stab_δ = Σ_k (1-2δ)^k W^k`.
    ///
    /// The sum starts at degree 0, so a biased function picks up `f̂(∅)²`;
    /// this is `E[f(X)f(Y)]` under the independent δ-flip coupling.
    pub fn noise_stability(&self, delta: f64) -> Result<f64> {
        check_delta(delta)?;
        let rho = 1.0 - 2.0 * delta;
        Ok(self
            .degree_weights()
            .iter()
            .enumerate()
            .map(|(k, w)| rho.powi(k as i32) * w)
            .sum())
    }

    /// `NS_δ = ½ - ½ Stab_δ`; meaningful only for ±1-valued functions.
    pub fn noise_sensitivity(&self, delta: f64) -> Result<f64> {
        Ok(0.5 - 0.5 * self.noise_stability(delta)?)
    }

    /// `½ Σ_T (f̂(T) - ĝ(T))²`, the half mean-square distance by Parseval.
    pub fn spectral_distance(&self, other: &Self) -> Result<f64> {
        if self.n != other.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                got: other.n,
            });
        }
        Ok(0.5
            * self
                .coeffs
                .iter()
                .zip(&other.coeffs)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>())
    }

    /// Spectrum of the frozen function: `f̂_{-k}(T) = f̂(T) + f̂(T ∪ {k})` for `k ∉ T`, else 0.
    pub fn frozen(&self, k: usize) -> Result<Self> {
        check_coord(k, self.n)?;
        let bit = 1usize << (k - 1);
        let mut coeffs = vec![0.0; self.coeffs.len()];
        for m in (0..self.coeffs.len()).filter(|m| m & bit == 0) {
            coeffs[m] = self.coeffs[m] + self.coeffs[m | bit];
        }
        Ok(Self { n: self.n, coeffs })
    }

    pub fn density_queries(&self, c: f64, d: usize) -> Result<DensityQueries> {
        if !(c > 0.0) {
            return Err(Error::InvalidArgument(format!("exponent c = {c} must be > 0")));
        }
        if d >= self.n {
            return Err(Error::InvalidArgument(format!(
                "degree margin D = {d} must be < n = {}",
                self.n
            )));
        }
        let threshold = (self.n as f64).powf(-c);
        let small_coeff_weight = self
            .coeffs
            .iter()
            .map(|c| c * c)
            .filter(|&w| w <= threshold)
            .sum();
        let high_degree_weight = self.degree_weights()[self.n - d..].iter().sum();
        Ok(DensityQueries {
            small_coeff_weight,
            high_degree_weight,
        })
    }

    /// Masks with `|f̂(T)| > tol`, in mask order.
    pub fn support(&self, tol: f64) -> Vec<u32> {
        self.coeffs
            .iter()
            .enumerate()
            .filter(|(_, c)| c.abs() > tol)
            .map(|(m, _)| m as u32)
            .collect()
    }

    /// Largest absolute weight sitting on a coordinate outside `keep` (a mask).
    pub(crate) fn max_abs_outside(&self, keep: u32) -> f64 {
        self.coeffs
            .iter()
            .enumerate()
            .filter(|(m, _)| (*m as u32) & !keep != 0)
            .map(|(_, c)| c.abs())
            .fold(0.0, f64::max)
    }
}

pub(crate) fn check_delta(delta: f64) -> Result<()> {
    if (0.0..=0.5).contains(&delta) {
        Ok(())
    } else {
        Err(Error::NoiseRate(delta))
    }
}

/// Minimum-ℓ₂ interpolant of the data seen under holdout of coordinate `k`.
///
/// Each frozen coefficient `f̂(T) + f̂(T ∪ {k})` (for `k ∉ T`) is split evenly
/// between `T` and `T ∪ {k}`. The low-degree completion, with all mass on `T`,
/// is `f.freeze(k)?.fourier_transform()`.
pub fn min_norm_completion(f: &BooleanFunction, k: usize) -> Result<FourierSpectrum> {
    check_coord(k, f.n())?;
    let spectrum = f.fourier_transform();
    let bit = 1usize << (k - 1);
    let mut coeffs = vec![0.0; spectrum.coeffs.len()];
    for m in (0..coeffs.len()).filter(|m| m & bit == 0) {
        let half = 0.5 * (spectrum.coeffs[m] + spectrum.coeffs[m | bit]);
        coeffs[m] = half;
        coeffs[m | bit] = half;
    }
    Ok(FourierSpectrum { n: f.n(), coeffs })
}

/// Brute-force references that bypass the spectral route entirely.
pub mod oracle {
    use super::*;

    /// `2^{-n} Σ_x f(x) χ_T(x)`, one coefficient at a time.
    pub fn coefficient(f: &BooleanFunction, subset: u32) -> f64 {
        let s: f64 = f
            .values()
            .iter()
            .enumerate()
            .map(|(m, v)| v * character(subset, m as u32))
            .sum();
        s / f.len() as f64
    }

    /// `E[((f(X) - f(X ⊕ e_k)) / 2)²]`; the flip probability for ±1-valued `f`.
    pub fn flip_influence(f: &BooleanFunction, k: usize) -> Result<f64> {
        check_coord(k, f.n())?;
        let bit = 1u32 << (k - 1);
        let s: f64 = (0..f.len() as u32)
            .map(|m| {
                let d = 0.5 * (f.value(m) - f.value(m ^ bit));
                d * d
            })
            .sum();
        Ok(s / f.len() as f64)
    }

    /// Fraction of points where flipping `k` changes the value.
    pub fn flip_probability(f: &BooleanFunction, k: usize) -> Result<f64> {
        check_coord(k, f.n())?;
        let bit = 1u32 << (k - 1);
        let changed = (0..f.len() as u32)
            .filter(|&m| f.value(m) != f.value(m ^ bit))
            .count();
        Ok(changed as f64 / f.len() as f64)
    }

    /// `E[f(X) f(Y)]` summed over every `x` and every flip pattern `z`.
    pub fn exhaustive_stability(f: &BooleanFunction, delta: f64) -> Result<f64> {
        check_delta(delta)?;
        let n = f.n();
        let probs: Vec<f64> = (0..=n)
            .map(|k| delta.powi(k as i32) * (1.0 - delta).powi((n - k) as i32))
            .collect();
        let mut total = 0.0;
        for z in 0..f.len() as u32 {
            let pz = probs[z.count_ones() as usize];
            if pz == 0.0 {
                continue;
            }
            let s: f64 = (0..f.len() as u32)
                .map(|x| f.value(x) * f.value(x ^ z))
                .sum();
            total += pz * s;
        }
        Ok(total / f.len() as f64)
    }
}
