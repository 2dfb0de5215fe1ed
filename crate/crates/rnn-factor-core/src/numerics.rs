//! Minimal dense linear algebra and elementwise nonlinearities.
//!
//! Everything in this module is a pure function with a fixed, documented
//! accumulation order (left-to-right per output element), so results are
//! bitwise reproducible run to run and safe to compare against independently
//! coded oracles. Transcendentals go through `libm` so the `std` feature has
//! no effect on numeric output.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{CoreError, Result};

/// Dense row-major matrix of `f64`.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    /// Builds a matrix from row-major data. The length must be `rows * cols`.
    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(CoreError::DimMismatch {
                op: "Matrix::from_vec",
                expected: rows * cols,
                got: data.len(),
            });
        }
        Ok(Matrix { rows, cols, data })
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Matrix { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

/// Dense vector of `f64`; its dimension is the data length.
#[derive(Debug, Clone, PartialEq)]
pub struct Vector {
    data: Vec<f64>,
}

impl Vector {
    pub fn zeros(dim: usize) -> Self {
        Vector {
            data: vec![0.0; dim],
        }
    }

    pub fn from_vec(data: Vec<f64>) -> Self {
        Vector { data }
    }

    pub fn dim(&self) -> usize {
        self.data.len()
    }

    pub fn at(&self, i: usize) -> f64 {
        self.data[i]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// `[a; b]` concatenation.
    pub fn concat(a: &Vector, b: &Vector) -> Vector {
        let mut data = Vec::with_capacity(a.dim() + b.dim());
        data.extend_from_slice(&a.data);
        data.extend_from_slice(&b.data);
        Vector { data }
    }
}

/// `C = A * B` with the inner sum accumulated left-to-right, so the result is
/// bit-identical to a plain triple loop in the same order.
pub fn matmul(a: &Matrix, b: &Matrix) -> Result<Matrix> {
    if a.cols != b.rows {
        return Err(CoreError::ShapeMismatch {
            op: "matmul",
            left: a.shape(),
            right: b.shape(),
        });
    }
    let mut c = Matrix::zeros(a.rows, b.cols);
    for i in 0..a.rows {
        let a_row = a.row(i);
        for j in 0..b.cols {
            let mut acc = 0.0;
            for (t, &av) in a_row.iter().enumerate() {
                acc += av * b.data[t * b.cols + j];
            }
            c.data[i * c.cols + j] = acc;
        }
    }
    debug_assert!(c.is_finite(), "matmul produced a non-finite entry");
    Ok(c)
}

/// `W * x` with the same per-row left-to-right accumulation as [`matmul`].
pub fn matvec(w: &Matrix, x: &Vector) -> Result<Vector> {
    if w.cols != x.dim() {
        return Err(CoreError::ShapeMismatch {
            op: "matvec",
            left: w.shape(),
            right: (x.dim(), 1),
        });
    }
    let mut out = Vector::zeros(w.rows);
    for i in 0..w.rows {
        let mut acc = 0.0;
        for (wv, xv) in w.row(i).iter().zip(x.data.iter()) {
            acc += wv * xv;
        }
        out.data[i] = acc;
    }
    debug_assert!(out.is_finite(), "matvec produced a non-finite entry");
    Ok(out)
}

/// `W * x + bias`; the bias is added after the dot product completes, so the
/// result is bitwise equal to `matmul` followed by an elementwise add.
pub fn affine(w: &Matrix, x: &Vector, bias: &Vector) -> Result<Vector> {
    if w.rows != bias.dim() {
        return Err(CoreError::DimMismatch {
            op: "affine",
            expected: w.rows,
            got: bias.dim(),
        });
    }
    let mut out = matvec(w, x)?;
    for (o, b) in out.data.iter_mut().zip(bias.data.iter()) {
        *o += b;
    }
    Ok(out)
}

/// Logistic sigmoid, branched on the sign of `z` so it never overflows:
/// `exp` is only ever taken of a non-positive argument.
pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + libm::exp(-z))
    } else {
        let e = libm::exp(z);
        e / (1.0 + e)
    }
}

pub fn tanh(z: f64) -> f64 {
    libm::tanh(z)
}

pub fn sigmoid_vec(z: &Vector) -> Vector {
    Vector::from_vec(z.data.iter().map(|&v| sigmoid(v)).collect())
}

pub fn tanh_vec(z: &Vector) -> Vector {
    Vector::from_vec(z.data.iter().map(|&v| tanh(v)).collect())
}

fn check_dims(op: &'static str, a: &Vector, b: &Vector) -> Result<()> {
    if a.dim() != b.dim() {
        return Err(CoreError::DimMismatch {
            op,
            expected: a.dim(),
            got: b.dim(),
        });
    }
    Ok(())
}

/// Hadamard product.
pub fn mul(a: &Vector, b: &Vector) -> Result<Vector> {
    check_dims("mul", a, b)?;
    Ok(Vector::from_vec(
        a.data
            .iter()
            .zip(b.data.iter())
            .map(|(x, y)| x * y)
            .collect(),
    ))
}

pub fn add(a: &Vector, b: &Vector) -> Result<Vector> {
    check_dims("add", a, b)?;
    Ok(Vector::from_vec(
        a.data
            .iter()
            .zip(b.data.iter())
            .map(|(x, y)| x + y)
            .collect(),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::distributions::{Distribution, Uniform};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_matrix(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Matrix {
        let dist = Uniform::new_inclusive(-1.0, 1.0);
        Matrix::from_fn(rows, cols, |_, _| dist.sample(rng))
    }

    /// Independently coded brute-force product, same accumulation order.
    fn matmul_oracle(a: &Matrix, b: &Matrix) -> Matrix {
        let mut c = Matrix::zeros(a.rows(), b.cols());
        for i in 0..a.rows() {
            for j in 0..b.cols() {
                let mut sum = 0.0;
                for t in 0..a.cols() {
                    sum += a.at(i, t) * b.at(t, j);
                }
                c.as_mut_slice()[i * b.cols() + j] = sum;
            }
        }
        c
    }

    #[test]
    fn matmul_identity() {
        let i2 = Matrix::identity(2);
        let v = Matrix::from_vec(2, 1, vec![3.5, -7.25]).unwrap();
        let out = matmul(&i2, &v).unwrap();
        assert_eq!(out.as_slice(), &[3.5, -7.25]);
    }

    #[test]
    fn matmul_one_by_one() {
        let a = Matrix::from_vec(1, 1, vec![2.0]).unwrap();
        let b = Matrix::from_vec(1, 1, vec![3.0]).unwrap();
        assert_eq!(matmul(&a, &b).unwrap().as_slice(), &[6.0]);
    }

    #[test]
    fn matmul_matches_triple_loop_oracle_bitwise() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let a = random_matrix(3, 2, &mut rng);
        let b = random_matrix(2, 4, &mut rng);
        let got = matmul(&a, &b).unwrap();
        let want = matmul_oracle(&a, &b);
        assert_eq!(got.as_slice(), want.as_slice());
    }

    #[test]
    fn matmul_oracle_agreement_small_shapes_many_seeds() {
        // All shapes up to 8x8, two seeds per shape: over 1000 random cases,
        // each compared bitwise against the brute-force loop.
        let mut cases = 0u64;
        for m in 1..=8 {
            for k in 1..=8 {
                for n in 1..=8 {
                    for extra in 0..2 {
                        let seed = cases * 2 + extra;
                        let mut rng = ChaCha8Rng::seed_from_u64(seed);
                        let a = random_matrix(m, k, &mut rng);
                        let b = random_matrix(k, n, &mut rng);
                        let got = matmul(&a, &b).unwrap();
                        let want = matmul_oracle(&a, &b);
                        assert_eq!(got.as_slice(), want.as_slice(), "shape {m}x{k}x{n}");
                        cases += 1;
                    }
                }
            }
        }
        assert!(cases >= 1000, "expected >= 1000 cases, ran {cases}");
    }

    #[test]
    fn matmul_associativity_within_rounding() {
        // Entries of magnitude <= 1: the two parenthesizations agree to 1e-12.
        for seed in 0..50u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let a = random_matrix(4, 5, &mut rng);
            let b = random_matrix(5, 3, &mut rng);
            let c = random_matrix(3, 6, &mut rng);
            let left = matmul(&matmul(&a, &b).unwrap(), &c).unwrap();
            let right = matmul(&a, &matmul(&b, &c).unwrap()).unwrap();
            for (l, r) in left.as_slice().iter().zip(right.as_slice()) {
                let denom = l.abs().max(r.abs()).max(1.0);
                assert!((l - r).abs() / denom < 1e-12, "left {l} right {r}");
            }
        }
    }

    #[test]
    fn matmul_shape_error_names_both_operands() {
        let a = Matrix::zeros(2, 3);
        let b = Matrix::zeros(4, 2);
        let err = matmul(&a, &b).unwrap_err();
        match err {
            CoreError::ShapeMismatch { left, right, .. } => {
                assert_eq!(left, (2, 3));
                assert_eq!(right, (4, 2));
            }
            other => panic!("wrong error: {other:?}"),
        }
        let msg = alloc::format!("{err}");
        assert!(msg.contains("2x3") && msg.contains("4x2"), "{msg}");
    }

    #[test]
    fn affine_zero_weights_returns_bias() {
        let w = Matrix::zeros(3, 2);
        let x = Vector::from_vec(vec![5.0, -1.0]);
        let b = Vector::from_vec(vec![0.25, -0.5, 8.0]);
        assert_eq!(affine(&w, &x, &b).unwrap().as_slice(), b.as_slice());
    }

    #[test]
    fn affine_identity_returns_input() {
        let w = Matrix::identity(3);
        let x = Vector::from_vec(vec![1.5, -2.5, 0.125]);
        let b = Vector::zeros(3);
        assert_eq!(affine(&w, &x, &b).unwrap().as_slice(), x.as_slice());
    }

    #[test]
    fn affine_matches_matmul_plus_add_bitwise() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let w = random_matrix(4, 3, &mut rng);
        let x = random_matrix(3, 1, &mut rng);
        let b = random_matrix(4, 1, &mut rng);
        let xv = Vector::from_vec(x.as_slice().to_vec());
        let bv = Vector::from_vec(b.as_slice().to_vec());
        let got = affine(&w, &xv, &bv).unwrap();
        let prod = matmul(&w, &x).unwrap();
        for i in 0..4 {
            let want = prod.as_slice()[i] + b.as_slice()[i];
            assert_eq!(got.at(i), want);
        }
    }

    #[test]
    fn sigmoid_and_tanh_fixed_points() {
        assert_eq!(sigmoid(0.0), 0.5);
        assert_eq!(tanh(0.0), 0.0);
    }

    #[test]
    fn sigmoid_saturates_without_overflow() {
        assert!((sigmoid(40.0) - 1.0).abs() < 1e-12);
        assert!(sigmoid(-40.0).abs() < 1e-12);
    }

    #[test]
    fn nonlinearities_finite_for_extreme_inputs() {
        for &z in &[700.0, -700.0, 1e300, -1e300, f64::MAX, f64::MIN] {
            assert!(sigmoid(z).is_finite(), "sigmoid({z})");
            assert!(tanh(z).is_finite(), "tanh({z})");
            assert!(sigmoid(z) >= 0.0 && sigmoid(z) <= 1.0);
            assert!(tanh(z) >= -1.0 && tanh(z) <= 1.0);
        }
    }

    #[test]
    fn elementwise_dim_mismatch_rejected() {
        let a = Vector::zeros(3);
        let b = Vector::zeros(4);
        assert!(matches!(mul(&a, &b), Err(CoreError::DimMismatch { .. })));
        assert!(matches!(add(&a, &b), Err(CoreError::DimMismatch { .. })));
    }

    #[test]
    fn elementwise_mul_add() {
        let a = Vector::from_vec(vec![1.0, 2.0, -3.0]);
        let b = Vector::from_vec(vec![4.0, -0.5, 2.0]);
        assert_eq!(mul(&a, &b).unwrap().as_slice(), &[4.0, -1.0, -6.0]);
        assert_eq!(add(&a, &b).unwrap().as_slice(), &[5.0, 1.5, -1.0]);
    }
}
