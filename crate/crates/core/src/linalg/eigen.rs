//! Real nonsymmetric eigenproblem: Householder reduction to Hessenberg form
//! followed by Francis double-shift QR and back-substitution for vectors.
//! Follows the classic EISPACK `orthes`/`hqr2` pair.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Raw output of the QR iteration.
pub struct RawEigen {
    pub values: Vec<Complex64>,
    /// Column j is the eigenvector of `values[j]`, normalised to unit 2-norm.
    pub vectors: DMatrix<Complex64>,
}

/// Eigenvalues only; cheaper than [`eig`] because no vectors are accumulated
/// into the original basis.
pub fn eigenvalues(a: &DMatrix<f64>) -> Result<Vec<Complex64>> {
    Ok(eig(a)?.values)
}

/// Eigen-decomposition of a real square matrix.
pub fn eig(a: &DMatrix<f64>) -> Result<RawEigen> {
    let n = a.nrows();
    assert_eq!(n, a.ncols(), "eig needs a square matrix");
    if n == 0 {
        return Ok(RawEigen {
            values: vec![],
            vectors: DMatrix::zeros(0, 0),
        });
    }
    let mut h = a.clone();
    let mut v = DMatrix::<f64>::identity(n, n);
    orthes(&mut h, &mut v);
    let mut d = vec![0.0; n];
    let mut e = vec![0.0; n];
    hqr2(&mut h, &mut v, &mut d, &mut e, 10 * n * n + 100)?;

    let mut values = Vec::with_capacity(n);
    let mut vectors = DMatrix::<Complex64>::zeros(n, n);
    let mut j = 0;
    while j < n {
        if e[j] == 0.0 {
            values.push(Complex64::new(d[j], 0.0));
            for i in 0..n {
                vectors[(i, j)] = Complex64::new(v[(i, j)], 0.0);
            }
            j += 1;
        } else {
            values.push(Complex64::new(d[j], e[j]));
            values.push(Complex64::new(d[j + 1], e[j + 1]));
            for i in 0..n {
                let z = Complex64::new(v[(i, j)], v[(i, j + 1)]);
                vectors[(i, j)] = z;
                vectors[(i, j + 1)] = z.conj();
            }
            j += 2;
        }
    }
    for mut col in vectors.column_iter_mut() {
        let nrm = col.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if nrm > 0.0 {
            col.iter_mut().for_each(|z| *z /= nrm);
        }
    }
    Ok(RawEigen { values, vectors })
}

fn orthes(h: &mut DMatrix<f64>, v: &mut DMatrix<f64>) {
    let n = h.nrows();
    let low = 0usize;
    let high = n - 1;
    let mut ort = vec![0.0; n];

    for m in (low + 1)..high {
        let mut scale = 0.0;
        for i in m..=high {
            scale += h[(i, m - 1)].abs();
        }
        if scale == 0.0 {
            continue;
        }
        let mut hh = 0.0;
        for i in (m..=high).rev() {
            ort[i] = h[(i, m - 1)] / scale;
            hh += ort[i] * ort[i];
        }
        let mut g = hh.sqrt();
        if ort[m] > 0.0 {
            g = -g;
        }
        hh -= ort[m] * g;
        ort[m] -= g;

        for j in m..n {
            let mut f = 0.0;
            for i in (m..=high).rev() {
                f += ort[i] * h[(i, j)];
            }
            f /= hh;
            for i in m..=high {
                h[(i, j)] -= f * ort[i];
            }
        }
        for i in 0..=high {
            let mut f = 0.0;
            for j in (m..=high).rev() {
                f += ort[j] * h[(i, j)];
            }
            f /= hh;
            for j in m..=high {
                h[(i, j)] -= f * ort[j];
            }
        }
        ort[m] *= scale;
        h[(m, m - 1)] = scale * g;
    }

    for m in ((low + 1)..high).rev() {
        if h[(m, m - 1)] == 0.0 {
            continue;
        }
        for i in (m + 1)..=high {
            ort[i] = h[(i, m - 1)];
        }
        for j in m..=high {
            let mut g = 0.0;
            for i in m..=high {
                g += ort[i] * v[(i, j)];
            }
            // two divisions to avoid underflow
            g = (g / ort[m]) / h[(m, m - 1)];
            for i in m..=high {
                v[(i, j)] += g * ort[i];
            }
        }
    }
}

fn cdiv(xr: f64, xi: f64, yr: f64, yi: f64) -> (f64, f64) {
    if yr.abs() > yi.abs() {
        let r = yi / yr;
        let d = yr + r * yi;
        ((xr + r * xi) / d, (xi - r * xr) / d)
    } else {
        let r = yr / yi;
        let d = yi + r * yr;
        ((r * xr + xi) / d, (r * xi - xr) / d)
    }
}

#[allow(clippy::many_single_char_names)]
fn hqr2(
    h: &mut DMatrix<f64>,
    v: &mut DMatrix<f64>,
    d: &mut [f64],
    e: &mut [f64],
    max_sweeps: usize,
) -> Result<()> {
    let nn = h.nrows();
    let low: isize = 0;
    let high: isize = nn as isize - 1;
    let eps = f64::EPSILON;
    let mut exshift = 0.0;
    let (mut p, mut q, mut r, mut s, mut z) = (0.0f64, 0.0f64, 0.0f64, 0.0f64, 0.0f64);
    let (mut t, mut w, mut x, mut y);

    let mut norm = 0.0;
    for i in 0..nn {
        for j in i.saturating_sub(1)..nn {
            norm += h[(i, j)].abs();
        }
    }

    let mut n: isize = nn as isize - 1;
    let mut iter = 0usize;
    let mut sweeps = 0usize;
    macro_rules! hh {
        ($i:expr, $j:expr) => {
            h[(($i) as usize, ($j) as usize)]
        };
    }

    while n >= low {
        let mut l = n;
        while l > low {
            s = hh!(l - 1, l - 1).abs() + hh!(l, l).abs();
            if s == 0.0 {
                s = norm;
            }
            if hh!(l, l - 1).abs() < eps * s {
                break;
            }
            l -= 1;
        }

        if l == n {
            hh!(n, n) += exshift;
            d[n as usize] = hh!(n, n);
            e[n as usize] = 0.0;
            n -= 1;
            iter = 0;
        } else if l == n - 1 {
            w = hh!(n, n - 1) * hh!(n - 1, n);
            p = (hh!(n - 1, n - 1) - hh!(n, n)) / 2.0;
            q = p * p + w;
            z = q.abs().sqrt();
            hh!(n, n) += exshift;
            hh!(n - 1, n - 1) += exshift;
            x = hh!(n, n);

            if q >= 0.0 {
                z = if p >= 0.0 { p + z } else { p - z };
                d[(n - 1) as usize] = x + z;
                d[n as usize] = d[(n - 1) as usize];
                if z != 0.0 {
                    d[n as usize] = x - w / z;
                }
                e[(n - 1) as usize] = 0.0;
                e[n as usize] = 0.0;
                x = hh!(n, n - 1);
                s = x.abs() + z.abs();
                p = x / s;
                q = z / s;
                r = (p * p + q * q).sqrt();
                p /= r;
                q /= r;
                for j in (n - 1)..(nn as isize) {
                    z = hh!(n - 1, j);
                    hh!(n - 1, j) = q * z + p * hh!(n, j);
                    hh!(n, j) = q * hh!(n, j) - p * z;
                }
                for i in 0..=n {
                    z = hh!(i, n - 1);
                    hh!(i, n - 1) = q * z + p * hh!(i, n);
                    hh!(i, n) = q * hh!(i, n) - p * z;
                }
                for i in low..=high {
                    let (iu, a, b) = (i as usize, (n - 1) as usize, n as usize);
                    z = v[(iu, a)];
                    v[(iu, a)] = q * z + p * v[(iu, b)];
                    v[(iu, b)] = q * v[(iu, b)] - p * z;
                }
            } else {
                d[(n - 1) as usize] = x + p;
                d[n as usize] = x + p;
                e[(n - 1) as usize] = z;
                e[n as usize] = -z;
            }
            n -= 2;
            iter = 0;
        } else {
            sweeps += 1;
            if sweeps > max_sweeps {
                let residual = hh!(n, n - 1).abs();
                return Err(Error::NoConvergence {
                    iterations: sweeps,
                    residual,
                });
            }
            x = hh!(n, n);
            y = 0.0;
            w = 0.0;
            if l < n {
                y = hh!(n - 1, n - 1);
                w = hh!(n, n - 1) * hh!(n - 1, n);
            }
            if iter == 10 {
                exshift += x;
                for i in low..=n {
                    hh!(i, i) -= x;
                }
                s = hh!(n, n - 1).abs() + hh!(n - 1, n - 2).abs();
                x = 0.75 * s;
                y = x;
                w = -0.4375 * s * s;
            }
            if iter == 30 {
                s = (y - x) / 2.0;
                s = s * s + w;
                if s > 0.0 {
                    s = s.sqrt();
                    if y < x {
                        s = -s;
                    }
                    s = x - w / ((y - x) / 2.0 + s);
                    for i in low..=n {
                        hh!(i, i) -= s;
                    }
                    exshift += s;
                    x = 0.964;
                    y = x;
                    w = x;
                }
            }
            iter += 1;

            let mut m = n - 2;
            while m >= l {
                z = hh!(m, m);
                r = x - z;
                s = y - z;
                p = (r * s - w) / hh!(m + 1, m) + hh!(m, m + 1);
                q = hh!(m + 1, m + 1) - z - r - s;
                r = hh!(m + 2, m + 1);
                s = p.abs() + q.abs() + r.abs();
                p /= s;
                q /= s;
                r /= s;
                if m == l {
                    break;
                }
                if hh!(m, m - 1).abs() * (q.abs() + r.abs())
                    < eps * (p.abs() * (hh!(m - 1, m - 1).abs() + z.abs() + hh!(m + 1, m + 1).abs()))
                {
                    break;
                }
                m -= 1;
            }

            for i in (m + 2)..=n {
                hh!(i, i - 2) = 0.0;
                if i > m + 2 {
                    hh!(i, i - 3) = 0.0;
                }
            }

            let mut k = m;
            while k < n {
                let notlast = k != n - 1;
                if k != m {
                    p = hh!(k, k - 1);
                    q = hh!(k + 1, k - 1);
                    r = if notlast { hh!(k + 2, k - 1) } else { 0.0 };
                    x = p.abs() + q.abs() + r.abs();
                    if x == 0.0 {
                        k += 1;
                        continue;
                    }
                    p /= x;
                    q /= x;
                    r /= x;
                }
                s = (p * p + q * q + r * r).sqrt();
                if p < 0.0 {
                    s = -s;
                }
                if s != 0.0 {
                    if k != m {
                        hh!(k, k - 1) = -s * x;
                    } else if l != m {
                        hh!(k, k - 1) = -hh!(k, k - 1);
                    }
                    p += s;
                    x = p / s;
                    y = q / s;
                    z = r / s;
                    q /= p;
                    r /= p;

                    for j in k..(nn as isize) {
                        p = hh!(k, j) + q * hh!(k + 1, j);
                        if notlast {
                            p += r * hh!(k + 2, j);
                            hh!(k + 2, j) -= p * z;
                        }
                        hh!(k, j) -= p * x;
                        hh!(k + 1, j) -= p * y;
                    }
                    for i in 0..=n.min(k + 3) {
                        p = x * hh!(i, k) + y * hh!(i, k + 1);
                        if notlast {
                            p += z * hh!(i, k + 2);
                            hh!(i, k + 2) -= p * r;
                        }
                        hh!(i, k) -= p;
                        hh!(i, k + 1) -= p * q;
                    }
                    for i in low..=high {
                        let (iu, ku) = (i as usize, k as usize);
                        p = x * v[(iu, ku)] + y * v[(iu, ku + 1)];
                        if notlast {
                            p += z * v[(iu, ku + 2)];
                            v[(iu, ku + 2)] -= p * r;
                        }
                        v[(iu, ku)] -= p;
                        v[(iu, ku + 1)] -= p * q;
                    }
                }
                k += 1;
            }
        }
    }

    if norm == 0.0 {
        return Ok(());
    }

    for n in (0..nn as isize).rev() {
        p = d[n as usize];
        q = e[n as usize];
        if q == 0.0 {
            let mut l = n;
            hh!(n, n) = 1.0;
            for i in (0..n).rev() {
                w = hh!(i, i) - p;
                r = 0.0;
                for j in l..=n {
                    r += hh!(i, j) * hh!(j, n);
                }
                if e[i as usize] < 0.0 {
                    z = w;
                    s = r;
                } else {
                    l = i;
                    if e[i as usize] == 0.0 {
                        hh!(i, n) = if w != 0.0 { -r / w } else { -r / (eps * norm) };
                    } else {
                        x = hh!(i, i + 1);
                        y = hh!(i + 1, i);
                        q = (d[i as usize] - p) * (d[i as usize] - p) + e[i as usize] * e[i as usize];
                        t = (x * s - z * r) / q;
                        hh!(i, n) = t;
                        hh!(i + 1, n) = if x.abs() > z.abs() {
                            (-r - w * t) / x
                        } else {
                            (-s - y * t) / z
                        };
                    }
                    t = hh!(i, n).abs();
                    if (eps * t) * t > 1.0 {
                        for j in i..=n {
                            hh!(j, n) /= t;
                        }
                    }
                }
            }
        } else if q < 0.0 {
            let mut l = n - 1;
            if hh!(n, n - 1).abs() > hh!(n - 1, n).abs() {
                hh!(n - 1, n - 1) = q / hh!(n, n - 1);
                hh!(n - 1, n) = -(hh!(n, n) - p) / hh!(n, n - 1);
            } else {
                let (cr, ci) = cdiv(0.0, -hh!(n - 1, n), hh!(n - 1, n - 1) - p, q);
                hh!(n - 1, n - 1) = cr;
                hh!(n - 1, n) = ci;
            }
            hh!(n, n - 1) = 0.0;
            hh!(n, n) = 1.0;
            for i in (0..=(n - 2)).rev() {
                let mut ra = 0.0;
                let mut sa = 0.0;
                for j in l..=n {
                    ra += hh!(i, j) * hh!(j, n - 1);
                    sa += hh!(i, j) * hh!(j, n);
                }
                w = hh!(i, i) - p;
                if e[i as usize] < 0.0 {
                    z = w;
                    r = ra;
                    s = sa;
                } else {
                    l = i;
                    if e[i as usize] == 0.0 {
                        let (cr, ci) = cdiv(-ra, -sa, w, q);
                        hh!(i, n - 1) = cr;
                        hh!(i, n) = ci;
                    } else {
                        x = hh!(i, i + 1);
                        y = hh!(i + 1, i);
                        let di = d[i as usize] - p;
                        let mut vr = di * di + e[i as usize] * e[i as usize] - q * q;
                        let vi = di * 2.0 * q;
                        if vr == 0.0 && vi == 0.0 {
                            vr = eps * norm * (w.abs() + q.abs() + x.abs() + y.abs() + z.abs());
                        }
                        let (cr, ci) = cdiv(
                            x * r - z * ra + q * sa,
                            x * s - z * sa - q * ra,
                            vr,
                            vi,
                        );
                        hh!(i, n - 1) = cr;
                        hh!(i, n) = ci;
                        if x.abs() > z.abs() + q.abs() {
                            hh!(i + 1, n - 1) = (-ra - w * hh!(i, n - 1) + q * hh!(i, n)) / x;
                            hh!(i + 1, n) = (-sa - w * hh!(i, n) - q * hh!(i, n - 1)) / x;
                        } else {
                            let (cr, ci) =
                                cdiv(-r - y * hh!(i, n - 1), -s - y * hh!(i, n), z, q);
                            hh!(i + 1, n - 1) = cr;
                            hh!(i + 1, n) = ci;
                        }
                    }
                    t = hh!(i, n - 1).abs().max(hh!(i, n).abs());
                    if (eps * t) * t > 1.0 {
                        for j in i..=n {
                            hh!(j, n - 1) /= t;
                            hh!(j, n) /= t;
                        }
                    }
                }
            }
        }
    }

    for j in (0..nn).rev() {
        for i in 0..nn {
            let mut acc = 0.0;
            for k in 0..=j {
                acc += v[(i, k)] * h[(k, j)];
            }
            v[(i, j)] = acc;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn residual(a: &DMatrix<f64>, r: &RawEigen) -> f64 {
        let ac = a.map(|x| Complex64::new(x, 0.0));
        let mut worst: f64 = 0.0;
        for (j, lam) in r.values.iter().enumerate() {
            let col = r.vectors.column(j);
            let diff = &ac * col - col * *lam;
            worst = worst.max(diff.norm());
        }
        worst
    }

    #[test]
    fn diagonal_matrix() {
        let a = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![3.0, 1.0, 1.0]));
        let r = eig(&a).unwrap();
        let mut re: Vec<f64> = r.values.iter().map(|z| z.re).collect();
        re.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert_eq!(re, vec![1.0, 1.0, 3.0]);
        assert!(residual(&a, &r) < 1e-14);
    }

    #[test]
    fn rotation_has_conjugate_pair() {
        let a = DMatrix::from_row_slice(2, 2, &[0.0, -1.0, 1.0, 0.0]);
        let r = eig(&a).unwrap();
        assert!((r.values[0] - r.values[1].conj()).norm() < 1e-15);
        assert!((r.values[0].im.abs() - 1.0).abs() < 1e-14);
        assert!(residual(&a, &r) < 1e-14);
    }

    #[test]
    fn random_nonsymmetric_residual() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for n in [1usize, 2, 3, 5, 17, 40] {
            let a = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
            let r = eig(&a).unwrap();
            assert!(residual(&a, &r) < 1e-10 * (n as f64), "n={n}");
            let tr: f64 = r.values.iter().map(|z| z.re).sum();
            assert!((tr - a.trace()).abs() < 1e-10 * n as f64);
        }
    }

    #[test]
    fn triangular_values_are_diagonal() {
        let n = 12;
        let a = DMatrix::from_fn(n, n, |i, j| if i >= j { (i + 1) as f64 + 0.1 * j as f64 } else { 0.0 });
        let mut vals: Vec<f64> = eigenvalues(&a).unwrap().iter().map(|z| z.re).collect();
        vals.sort_by(|a, b| a.partial_cmp(b).unwrap());
        for (i, v) in vals.iter().enumerate() {
            let expect = (i + 1) as f64 + 0.1 * i as f64;
            assert!((v - expect).abs() < 1e-9, "{v} vs {expect}");
        }
    }
}
