//! Eigenvalues of a real square matrix by Householder reduction to Hessenberg
//! form followed by the Francis double-shift QR iteration.
//!
//! Converged 1x1 blocks and 2x2 blocks with a non-negative discriminant give
//! eigenvalues with an imaginary part of exactly zero, so real eigenvalues are
//! classified without any threshold.

use nalgebra::linalg::Hessenberg;
use nalgebra::DMatrix;

/// Iterations allowed per eigenvalue before giving up.
const MAX_ITS: usize = 60;

/// All eigenvalues as (real parts, imaginary parts), or `None` if the iteration stalls.
pub fn eigenvalues(x: &DMatrix<f64>) -> Option<(Vec<f64>, Vec<f64>)> {
    let n = x.nrows();
    assert_eq!(n, x.ncols(), "eigenvalues needs a square matrix");
    if n == 0 {
        return Some((Vec::new(), Vec::new()));
    }
    let h = Hessenberg::new(x.clone()).h();
    // 1-based row-major copy so the iteration reads like its textbook form
    let ld = n + 1;
    let mut a = vec![0.0f64; ld * ld];
    for i in 0..n {
        for j in 0..n {
            if j + 1 >= i {
                a[(i + 1) * ld + j + 1] = h[(i, j)];
            }
        }
    }
    let mut wr = vec![0.0f64; ld];
    let mut wi = vec![0.0f64; ld];
    hqr(&mut a, n, &mut wr, &mut wi)?;
    Some((wr[1..].to_vec(), wi[1..].to_vec()))
}

fn sign(a: f64, b: f64) -> f64 {
    if b >= 0.0 {
        a.abs()
    } else {
        -a.abs()
    }
}

fn hqr(a: &mut [f64], n: usize, wr: &mut [f64], wi: &mut [f64]) -> Option<()> {
    let ld = n + 1;
    let ix = |i: usize, j: usize| i * ld + j;
    let mut anorm = 0.0f64;
    for i in 1..=n {
        for j in i.saturating_sub(1).max(1)..=n {
            anorm += a[ix(i, j)].abs();
        }
    }
    let mut nn = n;
    let mut t = 0.0f64;
    let (mut p, mut q, mut r);
    let (mut x, mut y, mut z, mut w);
    while nn >= 1 {
        let mut its = 0usize;
        loop {
            let mut l = nn;
            while l >= 2 {
                let mut s = a[ix(l - 1, l - 1)].abs() + a[ix(l, l)].abs();
                if s == 0.0 {
                    s = anorm;
                }
                if a[ix(l, l - 1)].abs() + s == s {
                    a[ix(l, l - 1)] = 0.0;
                    break;
                }
                l -= 1;
            }
            x = a[ix(nn, nn)];
            if l == nn {
                wr[nn] = x + t;
                wi[nn] = 0.0;
                nn -= 1;
            } else {
                y = a[ix(nn - 1, nn - 1)];
                w = a[ix(nn, nn - 1)] * a[ix(nn - 1, nn)];
                if l == nn - 1 {
                    p = 0.5 * (y - x);
                    q = p * p + w;
                    z = q.abs().sqrt();
                    x += t;
                    if q >= 0.0 {
                        z = p + sign(z, p);
                        wr[nn - 1] = x + z;
                        wr[nn] = if z != 0.0 { x - w / z } else { x + z };
                        wi[nn - 1] = 0.0;
                        wi[nn] = 0.0;
                    } else {
                        wr[nn - 1] = x + p;
                        wr[nn] = x + p;
                        wi[nn - 1] = -z;
                        wi[nn] = z;
                    }
                    nn -= 2;
                } else {
                    if its == MAX_ITS {
                        return None;
                    }
                    if its > 0 && its % 10 == 0 {
                        // exceptional shift
                        t += x;
                        for i in 1..=nn {
                            a[ix(i, i)] -= x;
                        }
                        let s = a[ix(nn, nn - 1)].abs() + a[ix(nn - 1, nn - 2)].abs();
                        x = 0.75 * s;
                        y = x;
                        w = -0.4375 * s * s;
                    }
                    its += 1;
                    let mut m = nn - 2;
                    loop {
                        z = a[ix(m, m)];
                        let r0 = x - z;
                        let s0 = y - z;
                        p = (r0 * s0 - w) / a[ix(m + 1, m)] + a[ix(m, m + 1)];
                        q = a[ix(m + 1, m + 1)] - z - r0 - s0;
                        r = a[ix(m + 2, m + 1)];
                        let s = p.abs() + q.abs() + r.abs();
                        p /= s;
                        q /= s;
                        r /= s;
                        if m == l {
                            break;
                        }
                        let u = a[ix(m, m - 1)].abs() * (q.abs() + r.abs());
                        let v = p.abs() * (a[ix(m - 1, m - 1)].abs() + z.abs() + a[ix(m + 1, m + 1)].abs());
                        if u + v == v {
                            break;
                        }
                        m -= 1;
                    }
                    for i in (m + 2)..=nn {
                        a[ix(i, i - 2)] = 0.0;
                        if i != m + 2 {
                            a[ix(i, i - 3)] = 0.0;
                        }
                    }
                    for k in m..nn {
                        if k != m {
                            p = a[ix(k, k - 1)];
                            q = a[ix(k + 1, k - 1)];
                            r = if k != nn - 1 { a[ix(k + 2, k - 1)] } else { 0.0 };
                            x = p.abs() + q.abs() + r.abs();
                            if x != 0.0 {
                                p /= x;
                                q /= x;
                                r /= x;
                            }
                        }
                        let s = sign((p * p + q * q + r * r).sqrt(), p);
                        if s != 0.0 {
                            if k == m {
                                if l != m {
                                    a[ix(k, k - 1)] = -a[ix(k, k - 1)];
                                }
                            } else {
                                a[ix(k, k - 1)] = -s * x;
                            }
                            p += s;
                            x = p / s;
                            y = q / s;
                            z = r / s;
                            q /= p;
                            r /= p;
                            for j in k..=nn {
                                let mut pp = a[ix(k, j)] + q * a[ix(k + 1, j)];
                                if k != nn - 1 {
                                    pp += r * a[ix(k + 2, j)];
                                    a[ix(k + 2, j)] -= pp * z;
                                }
                                a[ix(k + 1, j)] -= pp * y;
                                a[ix(k, j)] -= pp * x;
                            }
                            let mmin = nn.min(k + 3);
                            for i in l..=mmin {
                                let mut pp = x * a[ix(i, k)] + y * a[ix(i, k + 1)];
                                if k != nn - 1 {
                                    pp += z * a[ix(i, k + 2)];
                                    a[ix(i, k + 2)] -= pp * r;
                                }
                                a[ix(i, k + 1)] -= pp * q;
                                a[ix(i, k)] -= pp;
                            }
                        }
                    }
                }
            }
            if nn < 2 || l >= nn - 1 {
                break;
            }
        }
    }
    Some(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sorted(mut v: Vec<f64>) -> Vec<f64> {
        v.sort_by(|a, b| a.partial_cmp(b).unwrap());
        v
    }

    #[test]
    fn symmetric_matrix_all_real() {
        let m = DMatrix::from_row_slice(3, 3, &[2.0, 1.0, 0.0, 1.0, 3.0, 1.0, 0.0, 1.0, 4.0]);
        let (re, im) = eigenvalues(&m).unwrap();
        assert!(im.iter().all(|v| *v == 0.0));
        let tr: f64 = re.iter().sum();
        assert!((tr - 9.0).abs() < 1e-12);
    }

    #[test]
    fn companion_matrix() {
        // x^3 - x^2 + x - 1 = (x - 1)(x^2 + 1)
        let m = DMatrix::from_row_slice(3, 3, &[1.0, -1.0, 1.0, 1.0, 0.0, 0.0, 0.0, 1.0, 0.0]);
        let (re, im) = eigenvalues(&m).unwrap();
        let reals: Vec<f64> = re.iter().zip(&im).filter(|(_, i)| **i == 0.0).map(|(r, _)| *r).collect();
        assert_eq!(reals.len(), 1);
        assert!((reals[0] - 1.0).abs() < 1e-12);
        assert!(sorted(im.iter().map(|v| v.abs()).collect()).iter().rev().take(2).all(|v| (v - 1.0).abs() < 1e-12));
    }

    #[test]
    fn rotation_blocks_are_complex() {
        let (c, s) = (0.3f64.cos(), 0.3f64.sin());
        let m = DMatrix::from_row_slice(4, 4, &[c, -s, 0.0, 0.0, s, c, 0.0, 0.0, 0.0, 0.0, 0.0, -2.0, 0.0, 0.0, 2.0, 0.0]);
        let (_, im) = eigenvalues(&m).unwrap();
        assert!(im.iter().all(|v| *v != 0.0));
    }

    #[test]
    fn triangular_input() {
        let m = DMatrix::from_row_slice(3, 3, &[1.0, 5.0, 7.0, 0.0, -2.0, 3.0, 0.0, 0.0, 4.0]);
        let (re, im) = eigenvalues(&m).unwrap();
        assert!(im.iter().all(|v| *v == 0.0));
        let re = sorted(re);
        assert!((re[0] + 2.0).abs() < 1e-12 && (re[1] - 1.0).abs() < 1e-12 && (re[2] - 4.0).abs() < 1e-12);
    }
}
