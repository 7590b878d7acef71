//! Double-precision reference implementations of the four kernels. These
//! are the functional ground truth the trace replays are checked against.

use num_complex::Complex64;

use crate::error::{Result, SimError};

/// log base 4 of `n`, provided `n` is a power of four.
pub fn log4(n: usize) -> Option<u32> {
    if n < 4 || !n.is_power_of_two() || n.trailing_zeros() % 2 != 0 {
        return None;
    }
    Some(n.trailing_zeros() / 2)
}

/// Reverse the `digits` base-4 digits of `i`.
pub fn digit_reverse4(i: usize, digits: u32) -> usize {
    let mut x = i;
    let mut out = 0usize;
    for _ in 0..digits {
        out = (out << 2) | (x & 3);
        x >>= 2;
    }
    out
}

/// One radix-4 decimation-in-frequency butterfly with twiddles `w1..w3`.
pub fn radix4_butterfly(
    a: Complex64,
    b: Complex64,
    c: Complex64,
    d: Complex64,
    w1: Complex64,
    w2: Complex64,
    w3: Complex64,
) -> [Complex64; 4] {
    let i = Complex64::new(0.0, 1.0);
    let u0 = a + b + c + d;
    let u1 = a - i * b - c + i * d;
    let u2 = a - b + c - d;
    let u3 = a + i * b - c - i * d;
    [u0, u1 * w1, u2 * w2, u3 * w3]
}

/// Twiddle `exp(-2 pi i j / sub)` raised to `m`.
pub fn twiddle(j: usize, sub: usize, m: u32) -> Complex64 {
    let angle = -2.0 * std::f64::consts::PI * (j as f64) * (m as f64) / (sub as f64);
    Complex64::from_polar(1.0, angle)
}

/// Forward DFT via the radix-4 decimation-in-frequency schedule.
pub fn fft_reference(input: &[Complex64]) -> Result<Vec<Complex64>> {
    let n = input.len();
    let stages = log4(n).ok_or_else(|| {
        SimError::DimensionError(format!("transform length {n} is not a power of four"))
    })?;
    let mut work = input.to_vec();
    let mut sub = n;
    while sub >= 4 {
        let s = sub / 4;
        for base in (0..n).step_by(sub) {
            for j in 0..s {
                let idx = base + j;
                let out = radix4_butterfly(
                    work[idx],
                    work[idx + s],
                    work[idx + 2 * s],
                    work[idx + 3 * s],
                    twiddle(j, sub, 1),
                    twiddle(j, sub, 2),
                    twiddle(j, sub, 3),
                );
                work[idx] = out[0];
                work[idx + s] = out[1];
                work[idx + 2 * s] = out[2];
                work[idx + 3 * s] = out[3];
            }
        }
        sub = s;
    }
    Ok((0..n).map(|i| work[digit_reverse4(i, stages)]).collect())
}

/// Exact triple-loop matrix product: `a` is m x k, `b` is k x n, row-major.
pub fn matmul_reference(a: &[i64], b: &[i64], m: usize, n: usize, k: usize) -> Result<Vec<i64>> {
    if a.len() != m * k || b.len() != k * n {
        return Err(SimError::DimensionError(format!(
            "matmul operands {}x{} and {}x{} do not conform",
            m,
            a.len() / m.max(1),
            b.len() / n.max(1),
            n
        )));
    }
    let mut c = vec![0i64; m * n];
    for i in 0..m {
        for j in 0..n {
            let mut acc = 0i64;
            for p in 0..k {
                acc += a[i * k + p] * b[p * n + j];
            }
            c[i * n + j] = acc;
        }
    }
    Ok(c)
}

/// Element-wise complex division of equal-shaped pilot matrices.
pub fn che_reference(pilots_rx: &[Complex64], pilots_ref: &[Complex64]) -> Result<Vec<Complex64>> {
    if pilots_rx.len() != pilots_ref.len() {
        return Err(SimError::DimensionError(format!(
            "pilot matrices differ in size: {} vs {}",
            pilots_rx.len(),
            pilots_ref.len()
        )));
    }
    pilots_rx
        .iter()
        .zip(pilots_ref)
        .enumerate()
        .map(|(i, (&rx, &re))| {
            if re.norm_sqr() == 0.0 {
                Err(SimError::NumericalError(format!("zero reference pilot at element {i}")))
            } else {
                Ok(rx / re)
            }
        })
        .collect()
}

/// Cholesky factor of a Hermitian positive-definite matrix (lower
/// triangular, row-major, real positive diagonal).
pub fn cholesky(a: &[Complex64], dim: usize) -> Result<Vec<Complex64>> {
    let mut l = vec![Complex64::new(0.0, 0.0); dim * dim];
    for j in 0..dim {
        let mut diag = a[j * dim + j].re;
        for k in 0..j {
            diag -= l[j * dim + k].norm_sqr();
        }
        if !(diag > 0.0) {
            return Err(SimError::NotPositiveDefinite { col: j, pivot: diag });
        }
        let ljj = diag.sqrt();
        l[j * dim + j] = Complex64::new(ljj, 0.0);
        for i in j + 1..dim {
            let mut v = a[i * dim + j];
            for k in 0..j {
                v -= l[i * dim + k] * l[j * dim + k].conj();
            }
            l[i * dim + j] = v / ljj;
        }
    }
    Ok(l)
}

/// Invert a Hermitian positive-definite matrix via its Cholesky factor and
/// per-column forward/backward substitution.
pub fn sysinv_reference(a: &[Complex64], dim: usize) -> Result<Vec<Complex64>> {
    if a.len() != dim * dim {
        return Err(SimError::DimensionError(format!(
            "matrix of {} elements is not {dim}x{dim}",
            a.len()
        )));
    }
    let l = cholesky(a, dim)?;
    let mut inv = vec![Complex64::new(0.0, 0.0); dim * dim];
    let mut y = vec![Complex64::new(0.0, 0.0); dim];
    for col in 0..dim {
        // L y = e_col
        for i in 0..dim {
            let mut v = if i == col { Complex64::new(1.0, 0.0) } else { Complex64::new(0.0, 0.0) };
            for k in 0..i {
                v -= l[i * dim + k] * y[k];
            }
            y[i] = v / l[i * dim + i].re;
        }
        // L^H x = y
        for i in (0..dim).rev() {
            let mut v = y[i];
            for k in i + 1..dim {
                v -= l[k * dim + i].conj() * inv[k * dim + col];
            }
            inv[i * dim + col] = v / l[i * dim + i].re;
        }
    }
    Ok(inv)
}

/// Infinity norm of `a * b - I`, the inversion residual.
pub fn inversion_residual(a: &[Complex64], b: &[Complex64], dim: usize) -> f64 {
    let mut worst: f64 = 0.0;
    for i in 0..dim {
        let mut row = 0.0;
        for j in 0..dim {
            let mut v = Complex64::new(0.0, 0.0);
            for k in 0..dim {
                v += a[i * dim + k] * b[k * dim + j];
            }
            if i == j {
                v -= Complex64::new(1.0, 0.0);
            }
            row += v.norm();
        }
        worst = worst.max(row);
    }
    worst
}


#[cfg(test)]
mod tests {
    use super::oracles::*;
    use super::*;

    fn max_err(a: &[Complex64], b: &[Complex64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
    }

    #[test]
    fn fft_impulse_gives_flat_spectrum() {
        let mut x = vec![Complex64::new(0.0, 0.0); 4];
        x[0] = Complex64::new(1.0, 0.0);
        let out = fft_reference(&x).unwrap();
        for v in out {
            assert!((v - Complex64::new(1.0, 0.0)).norm() < 1e-12);
        }
    }

    #[test]
    fn fft_constant_gives_impulse() {
        let x = vec![Complex64::new(1.0, 0.0); 16];
        let out = fft_reference(&x).unwrap();
        assert!((out[0] - Complex64::new(16.0, 0.0)).norm() < 1e-12);
        for v in &out[1..] {
            assert!(v.norm() < 1e-9);
        }
    }

    #[test]
    fn fft_matches_naive_dft() {
        for (n, seed) in [(4usize, 1u64), (16, 2), (64, 3), (256, 4)] {
            let x = random_complex(n, seed);
            let got = fft_reference(&x).unwrap();
            let want = naive_dft(&x);
            let scale = (n as f64).sqrt();
            assert!(
                max_err(&got, &want) / scale < 1e-6,
                "n={n} err {}",
                max_err(&got, &want)
            );
        }
    }

    #[test]
    fn fft_rejects_non_power_of_four() {
        for n in [2usize, 8, 32, 100] {
            let x = vec![Complex64::new(0.0, 0.0); n];
            assert!(matches!(fft_reference(&x), Err(SimError::DimensionError(_))));
        }
    }

    #[test]
    fn matmul_identity_and_hand_case() {
        let b = vec![1, 2, 3, 4, 5, 6, 7, 8, 9];
        let id = vec![1, 0, 0, 0, 1, 0, 0, 0, 1];
        assert_eq!(matmul_reference(&id, &b, 3, 3, 3).unwrap(), b);
        let a = vec![1, 2, 3, 4];
        let b = vec![5, 6, 7, 8];
        assert_eq!(matmul_reference(&a, &b, 2, 2, 2).unwrap(), vec![19, 22, 43, 50]);
        assert!(matmul_reference(&a, &b, 2, 2, 3).is_err());
    }

    #[test]
    fn matmul_matches_naive_oracle() {
        // The reference IS the naive triple loop; cross-check against an
        // independently ordered accumulation.
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
        let (m, n, k) = (16, 16, 16);
        let a: Vec<i64> = (0..m * k).map(|_| rng.gen_range(-8..8)).collect();
        let b: Vec<i64> = (0..k * n).map(|_| rng.gen_range(-8..8)).collect();
        let got = matmul_reference(&a, &b, m, n, k).unwrap();
        let mut want = vec![0i64; m * n];
        for p in 0..k {
            for i in 0..m {
                for j in 0..n {
                    want[i * n + j] += a[i * k + p] * b[p * n + j];
                }
            }
        }
        assert_eq!(got, want);
    }

    #[test]
    fn che_basics() {
        let x = random_complex(32 * 4, 5);
        let ones = che_reference(&x, &x).unwrap();
        for v in ones {
            assert!((v - Complex64::new(1.0, 0.0)).norm() < 1e-12);
        }
        let four = [Complex64::new(4.0, 0.0)];
        let two = [Complex64::new(2.0, 0.0)];
        assert_eq!(che_reference(&four, &two).unwrap()[0], Complex64::new(2.0, 0.0));
        let zero = [Complex64::new(0.0, 0.0)];
        assert!(matches!(che_reference(&four, &zero), Err(SimError::NumericalError(_))));
    }

    #[test]
    fn che_matches_scalar_loop() {
        let rx = random_complex(32 * 4, 6);
        let rf: Vec<Complex64> =
            random_complex(32 * 4, 7).iter().map(|v| v + Complex64::new(2.0, 0.0)).collect();
        let got = che_reference(&rx, &rf).unwrap();
        for i in 0..rx.len() {
            assert_eq!(got[i], rx[i] / rf[i]);
        }
    }

    #[test]
    fn sysinv_identity_and_diagonal() {
        let id: Vec<Complex64> = (0..16)
            .map(|i| if i % 5 == 0 { Complex64::new(1.0, 0.0) } else { Complex64::new(0.0, 0.0) })
            .collect();
        let inv = sysinv_reference(&id, 4).unwrap();
        assert!(max_err(&inv, &id) < 1e-12);
        let diag = [
            Complex64::new(4.0, 0.0),
            Complex64::new(0.0, 0.0),
            Complex64::new(0.0, 0.0),
            Complex64::new(9.0, 0.0),
        ];
        let inv = sysinv_reference(&diag, 2).unwrap();
        assert!((inv[0] - Complex64::new(0.25, 0.0)).norm() < 1e-15);
        assert!((inv[3] - Complex64::new(1.0 / 9.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn sysinv_matches_gauss_jordan() {
        for seed in 0..20 {
            let a = random_hpd(4, seed);
            let got = sysinv_reference(&a, 4).unwrap();
            let want = gauss_jordan_inverse(&a, 4).unwrap();
            assert!(max_err(&got, &want) < 1e-9, "seed {seed}");
            assert!(inversion_residual(&a, &got, 4) <= 1e-9);
        }
    }

    #[test]
    fn sysinv_rejects_indefinite() {
        let a = [
            Complex64::new(1.0, 0.0),
            Complex64::new(3.0, 0.0),
            Complex64::new(3.0, 0.0),
            Complex64::new(1.0, 0.0),
        ];
        assert!(matches!(
            sysinv_reference(&a, 2),
            Err(SimError::NotPositiveDefinite { .. })
        ));
    }
}
