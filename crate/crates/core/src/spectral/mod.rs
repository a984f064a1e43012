//! Diagonalization, truncation of unit-eigenvalue modes, conjugate-pair
//! compression and discretization.

mod discretize;

pub use discretize::{discretize, discretize_reduced, DiscreteSystem, Method, Transition};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg;
use crate::safari::ContinuousSSM;

/// Default tolerance for calling an eigenvalue "one".
pub const DEFAULT_TOL_ONE: f64 = 1e-6;

/// Relative input weight below which a mode counts as unreachable from the input.
pub const CONTROL_TOL: f64 = 1e-9;

/// Whether a stored mode is real or stands for a conjugate pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ModeKind {
    Real,
    /// Complex mode whose conjugate partner is stored next to it (uncompressed) or
    /// implied (compressed).
    Complex,
}

/// Eigen-decomposition `A = V diag(lambda) V^-1`.
#[derive(Debug, Clone)]
pub struct Spectrum {
    /// Sorted by descending `|lambda - 1|`; conjugate pairs adjacent, positive imaginary part first.
    pub eigenvalues: Vec<Complex64>,
    pub eigenvectors: DMatrix<Complex64>,
    pub inverse_rows: DMatrix<Complex64>,
    /// `||V||_F ||V^-1||_F`.
    pub condition_estimate: f64,
    /// `||A V - V diag(lambda)||_F / ||A||_F`.
    pub residual: f64,
    /// `V^-1 B` once the spectrum has been aligned to an input vector.
    pub input_weights: Option<DVector<Complex64>>,
}

impl Spectrum {
    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    /// Number of eigenvalues with `|lambda - 1| <= tol`, regardless of input weight.
    pub fn count_near_one(&self, tol: f64) -> usize {
        self.eigenvalues.iter().filter(|l| (*l - 1.0).norm() <= tol).count()
    }

    pub fn is_real(&self, i: usize) -> bool {
        self.eigenvalues[i].im == 0.0
    }

    /// `V diag(lambda) V^-1`.
    pub fn reconstruct(&self) -> DMatrix<Complex64> {
        let mut vl = self.eigenvectors.clone();
        for (j, l) in self.eigenvalues.iter().enumerate() {
            for z in vl.column_mut(j).iter_mut() {
                *z *= *l;
            }
        }
        vl * &self.inverse_rows
    }
}

/// Entries of the decomposition that belong together under conjugation.
#[derive(Debug, Clone, Copy)]
enum Unit {
    Real(usize),
    Pair(usize, usize),
}

fn cluster_indices(values: &[Complex64], tol: f64) -> Vec<Vec<usize>> {
    let n = values.len();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(p: &mut [usize], i: usize) -> usize {
        let mut r = i;
        while p[r] != r {
            r = p[r];
        }
        let mut i = i;
        while p[i] != r {
            let next = p[i];
            p[i] = r;
            i = next;
        }
        r
    }
    for i in 0..n {
        for j in (i + 1)..n {
            if (values[i] - values[j]).norm() <= tol {
                let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                parent[a] = b;
            }
        }
    }
    let mut groups: std::collections::BTreeMap<usize, Vec<usize>> = Default::default();
    for i in 0..n {
        let r = find(&mut parent, i);
        groups.entry(r).or_default().push(i);
    }
    groups.into_values().collect()
}

fn smallest_singular_ratio(block: &DMatrix<Complex64>) -> f64 {
    let sv = block.clone().svd(false, false).singular_values;
    let max = sv.iter().cloned().fold(0.0, f64::max);
    let min = sv.iter().cloned().fold(f64::INFINITY, f64::min);
    if max == 0.0 {
        0.0
    } else {
        min / max
    }
}

/// Full complex eigendecomposition of a real matrix.
///
/// Clusters of (numerically) repeated eigenvalues whose computed eigenvectors are
/// nearly dependent get an orthonormal null-space basis instead, so semisimple
/// repeated eigenvalues (such as the unit eigenvalues of a redundant frame) come out
/// with a well-conditioned basis.
pub fn eigendecompose(a: &DMatrix<f64>) -> Result<Spectrum> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(Error::Dimension(format!("matrix is {}x{}", n, a.ncols())));
    }
    if a.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("matrix has non-finite entries".into()));
    }
    let raw = linalg::eig(a)?;
    let mut values = raw.values;
    let mut vectors = raw.vectors;
    let anorm = a.norm().max(f64::MIN_POSITIVE);

    // Conjugate structure as produced by the QR iteration.
    let mut partner: Vec<Option<usize>> = vec![None; n];
    let mut j = 0;
    while j < n {
        if values[j].im != 0.0 && j + 1 < n && values[j + 1] == values[j].conj() {
            partner[j] = Some(j + 1);
            partner[j + 1] = Some(j);
            j += 2;
        } else {
            j += 1;
        }
    }

    let ac = linalg::to_complex(a);
    let ctol = 1e-7 * anorm.max(1.0);
    for cluster in cluster_indices(&values, ctol) {
        if cluster.len() < 2 {
            continue;
        }
        let mean = cluster.iter().map(|&i| values[i]).sum::<Complex64>() / cluster.len() as f64;
        let real_cluster = mean.im.abs() <= ctol;
        if !real_cluster && mean.im < 0.0 {
            continue; // handled through the positive partner cluster
        }
        let block = DMatrix::from_fn(n, cluster.len(), |r, c| vectors[(r, cluster[c])]);
        if smallest_singular_ratio(&block) > 1e-6 {
            continue;
        }
        let shift = if real_cluster { Complex64::new(mean.re, 0.0) } else { mean };
        let shifted = &ac - DMatrix::<Complex64>::identity(n, n) * shift;
        let (basis, worst) = linalg::null_space_complex(&shifted, cluster.len());
        if worst > 1e-6 * anorm {
            log::debug!("eigenvalue cluster near {mean} is defective (sigma {worst:e}); keeping raw vectors");
            continue;
        }
        if real_cluster {
            // Real null space: take real parts of the complex basis and re-orthonormalize.
            let re = DMatrix::from_fn(n, 2 * cluster.len(), |r, c| {
                if c < cluster.len() {
                    basis[(r, c)].re
                } else {
                    basis[(r, c - cluster.len())].im
                }
            });
            let s = linalg::svd_sorted(&re);
            for (c, &idx) in cluster.iter().enumerate() {
                for r in 0..n {
                    vectors[(r, idx)] = Complex64::new(s.u[(r, c)], 0.0);
                }
                values[idx] = Complex64::new(values[idx].re, 0.0);
                if let Some(p) = partner[idx] {
                    partner[p] = None;
                }
                partner[idx] = None;
            }
        } else {
            for (c, &idx) in cluster.iter().enumerate() {
                for r in 0..n {
                    vectors[(r, idx)] = basis[(r, c)];
                    if let Some(p) = partner[idx] {
                        vectors[(r, p)] = basis[(r, c)].conj();
                    }
                }
            }
        }
    }

    let mut units: Vec<Unit> = Vec::with_capacity(n);
    let mut seen = vec![false; n];
    for i in 0..n {
        if seen[i] {
            continue;
        }
        match partner[i] {
            Some(p) => {
                seen[i] = true;
                seen[p] = true;
                let (pos, neg) = if values[i].im > 0.0 { (i, p) } else { (p, i) };
                units.push(Unit::Pair(pos, neg));
            }
            None => {
                seen[i] = true;
                if values[i].im != 0.0 {
                    return Err(Error::UnpairedComplexEigenvalue(i));
                }
                units.push(Unit::Real(i));
            }
        }
    }
    let key = |u: &Unit| -> f64 {
        match u {
            Unit::Real(i) | Unit::Pair(i, _) => (values[*i] - 1.0).norm(),
        }
    };
    units.sort_by(|x, y| key(y).total_cmp(&key(x)));
    let order: Vec<usize> = units
        .iter()
        .flat_map(|u| match *u {
            Unit::Real(i) => vec![i],
            Unit::Pair(p, q) => vec![p, q],
        })
        .collect();
    let values: Vec<Complex64> = order.iter().map(|&i| values[i]).collect();
    let vectors = DMatrix::from_fn(n, n, |r, c| vectors[(r, order[c])]);
    finish(a, values, vectors, None)
}

fn finish(
    a: &DMatrix<f64>,
    values: Vec<Complex64>,
    vectors: DMatrix<Complex64>,
    b: Option<&DVector<f64>>,
) -> Result<Spectrum> {
    let n = values.len();
    let mut inv = linalg::inverse_complex(&vectors)
        .ok_or_else(|| Error::NotDiagonalizable(f64::INFINITY))?;
    // Exact conjugate symmetry of the inverse rows.
    let mut i = 0;
    while i < n {
        if values[i].im != 0.0 && i + 1 < n {
            for c in 0..n {
                let z = inv[(i, c)];
                inv[(i + 1, c)] = z.conj();
            }
            i += 2;
        } else {
            i += 1;
        }
    }
    let condition_estimate = linalg::frobenius_c(&vectors) * linalg::frobenius_c(&inv);
    if !condition_estimate.is_finite() || condition_estimate > 1e14 {
        return Err(Error::NotDiagonalizable(condition_estimate));
    }
    let ac = linalg::to_complex(a);
    let mut vl = vectors.clone();
    for (j, l) in values.iter().enumerate() {
        for z in vl.column_mut(j).iter_mut() {
            *z *= *l;
        }
    }
    let residual = linalg::frobenius_c(&(&ac * &vectors - vl)) / a.norm().max(f64::MIN_POSITIVE);
    let input_weights = b.map(|b| &inv * linalg::to_complex_vec(b));
    Ok(Spectrum {
        eigenvalues: values,
        eigenvectors: vectors,
        inverse_rows: inv,
        condition_estimate,
        residual,
        input_weights,
    })
}

/// Re-basis the eigenspace of the unit cluster so that the input `b` excites at most
/// one of its directions, and record the input weights `V^-1 b`.
///
/// The first vector of the cluster becomes the spectral projection of `b` onto it;
/// the rest span the complement within the cluster and are unreachable from `b`.
pub fn align_to_input(spec: &Spectrum, a: &DMatrix<f64>, b: &DVector<f64>, tol_one: f64) -> Result<Spectrum> {
    let n = spec.len();
    if b.len() != n || a.nrows() != n {
        return Err(Error::Dimension(format!("input has {} entries, spectrum {}", b.len(), n)));
    }
    let unit: Vec<usize> = (0..n)
        .filter(|&i| (spec.eigenvalues[i] - 1.0).norm() <= tol_one)
        .collect();
    if unit.len() < 2 {
        return finish(a, spec.eigenvalues.clone(), spec.eigenvectors.clone(), Some(b));
    }
    let m = unit.len();
    // The cluster is closed under conjugation, so its eigenspace has a real basis.
    let spanning = DMatrix::from_fn(n, 2 * m, |r, c| {
        let z = spec.eigenvectors[(r, unit[c % m])];
        if c < m {
            z.re
        } else {
            z.im
        }
    });
    let basis = linalg::svd_sorted(&spanning).u.columns(0, m).into_owned();

    let weights = &spec.inverse_rows * linalg::to_complex_vec(b);
    let mut proj = DVector::<f64>::zeros(n);
    for &i in &unit {
        for r in 0..n {
            proj[r] += (spec.eigenvectors[(r, i)] * weights[i]).re;
        }
    }
    let rho = proj.norm();
    let mut values = spec.eigenvalues.clone();
    for &i in &unit {
        values[i] = Complex64::new(values[i].re, 0.0);
    }
    let mut vectors = spec.eigenvectors.clone();
    let (first, rest) = if rho > CONTROL_TOL * b.norm().max(f64::MIN_POSITIVE) {
        let first = &proj / rho;
        let mut rest = basis.clone();
        for mut col in rest.column_iter_mut() {
            let d = first.dot(&col);
            col -= &first * d;
        }
        (Some(first), linalg::svd_sorted(&rest).u)
    } else {
        (None, basis)
    };
    let mut slots = unit.iter();
    if let Some(first) = first {
        let slot = *slots.next().unwrap();
        for r in 0..n {
            vectors[(r, slot)] = Complex64::new(first[r], 0.0);
        }
    }
    for (c, &slot) in slots.enumerate() {
        for r in 0..n {
            vectors[(r, slot)] = Complex64::new(rest[(r, c)], 0.0);
        }
    }
    finish(a, values, vectors, Some(b))
}

/// Eigendecompose `ssm.a` and align its unit cluster to `ssm.b`.
pub fn eigendecompose_ssm(ssm: &ContinuousSSM, tol_one: f64) -> Result<Spectrum> {
    let s = eigendecompose(&ssm.a)?;
    align_to_input(&s, &ssm.a, &ssm.b, tol_one)
}

/// Output of the full reduction pipeline.
#[derive(Debug, Clone)]
pub struct Reduction {
    pub spectrum: Spectrum,
    pub partition: Partition,
    pub reduced: ReducedSystem,
}

/// Eigendecompose, split off the unit modes the input cannot reach and truncate.
pub fn reduce_ssm(ssm: &ContinuousSSM, tol_one: f64) -> Result<Reduction> {
    let spectrum = eigendecompose_ssm(ssm, tol_one)?;
    let partition = effective_rank_split(&spectrum, tol_one);
    let reduced = truncate_system(ssm, &spectrum, &partition)?;
    Ok(Reduction {
        spectrum,
        partition,
        reduced,
    })
}

/// Split between modes kept in the reduced system and unit modes dropped from it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Partition {
    pub retained: Vec<usize>,
    pub unit: Vec<usize>,
    pub n_eff: usize,
}

/// Unit indices are those with `|lambda - 1| <= tol_one` that the input cannot reach
/// (when the spectrum carries input weights); everything else is retained.
pub fn effective_rank_split(spec: &Spectrum, tol_one: f64) -> Partition {
    let wmax = spec
        .input_weights
        .as_ref()
        .map(|w| w.iter().map(|z| z.norm()).fold(0.0, f64::max))
        .unwrap_or(0.0);
    let mut retained = Vec::new();
    let mut unit = Vec::new();
    for (i, l) in spec.eigenvalues.iter().enumerate() {
        let near_one = (l - 1.0).norm() <= tol_one;
        let driven = spec
            .input_weights
            .as_ref()
            .is_some_and(|w| w[i].norm() > CONTROL_TOL * wmax);
        if near_one && !driven {
            unit.push(i);
        } else {
            retained.push(i);
        }
    }
    Partition {
        n_eff: retained.len(),
        retained,
        unit,
    }
}

/// Diagonal system restricted to the retained modes.
#[derive(Debug, Clone)]
pub struct ReducedSystem {
    pub n_eff: usize,
    pub lambda: Vec<Complex64>,
    pub b_tilde: Vec<Complex64>,
    /// `n_eff x N`: rows are the retained eigenvectors, so `C v_rows^T` is the readout
    /// over reduced coordinates.
    pub v_rows: DMatrix<Complex64>,
    pub kinds: Vec<ModeKind>,
    pub half_storage: bool,
    pub source: String,
}

impl ReducedSystem {
    /// Number of stored entries (half of the complex modes when compressed).
    pub fn stored(&self) -> usize {
        self.lambda.len()
    }

    /// Readout over original coordinates mapped to reduced coordinates.
    pub fn reduce_readout(&self, c: &DVector<f64>) -> Result<Vec<Complex64>> {
        if c.len() != self.v_rows.ncols() {
            return Err(Error::Dimension(format!(
                "readout has {} entries, system has {} original states",
                c.len(),
                self.v_rows.ncols()
            )));
        }
        let cc = linalg::to_complex_vec(c);
        Ok((&self.v_rows * cc).iter().cloned().collect())
    }
}

/// Keep the retained modes; fails if the dropped modes carry input mass.
pub fn truncate_system(ssm: &ContinuousSSM, spec: &Spectrum, partition: &Partition) -> Result<ReducedSystem> {
    let n = spec.len();
    if ssm.order() != n {
        return Err(Error::Dimension(format!("system order {} vs spectrum {}", ssm.order(), n)));
    }
    if partition.retained.len() + partition.unit.len() != n {
        return Err(Error::Dimension("partition does not cover the spectrum".into()));
    }
    let bt = &spec.inverse_rows * linalg::to_complex_vec(&ssm.b);
    let mut dropped = DVector::<Complex64>::zeros(n);
    for &i in &partition.unit {
        dropped += spec.eigenvectors.column(i) * bt[i];
    }
    let limit = 1e-6 * ssm.b.norm().max(1.0);
    let mass = dropped.norm();
    if mass > limit {
        return Err(Error::InconsistentPartition { mass, limit });
    }
    let keep = &partition.retained;
    let is_kept = |i: usize| keep.contains(&i);
    let mut kinds = Vec::with_capacity(keep.len());
    let mut k = 0;
    while k < keep.len() {
        let i = keep[k];
        if spec.is_real(i) {
            kinds.push(ModeKind::Real);
            k += 1;
            continue;
        }
        let partner_ok = k + 1 < keep.len()
            && keep[k + 1] == i + 1
            && spec.eigenvalues[i + 1] == spec.eigenvalues[i].conj();
        if !partner_ok || !is_kept(i + 1) {
            return Err(Error::UnpairedComplexEigenvalue(i));
        }
        kinds.push(ModeKind::Complex);
        kinds.push(ModeKind::Complex);
        k += 2;
    }
    Ok(ReducedSystem {
        n_eff: keep.len(),
        lambda: keep.iter().map(|&i| spec.eigenvalues[i]).collect(),
        b_tilde: keep.iter().map(|&i| bt[i]).collect(),
        v_rows: DMatrix::from_fn(keep.len(), n, |r, c| spec.eigenvectors[(c, keep[r])]),
        kinds,
        half_storage: false,
        source: ssm.frame_ref.clone(),
    })
}

/// Store one member per conjugate pair; downstream real outputs use `2 Re(.)` for them.
pub fn compress_conjugates(rs: &ReducedSystem) -> Result<ReducedSystem> {
    if rs.half_storage {
        return Ok(rs.clone());
    }
    let n = rs.lambda.len();
    let mut keep = Vec::new();
    let mut kinds = Vec::new();
    let mut i = 0;
    let close = |a: Complex64, b: Complex64| (a - b).norm() <= 1e-12 * a.norm().max(1.0);
    while i < n {
        if rs.lambda[i].im == 0.0 {
            keep.push(i);
            kinds.push(ModeKind::Real);
            i += 1;
            continue;
        }
        let paired = i + 1 < n
            && close(rs.lambda[i + 1], rs.lambda[i].conj())
            && close(rs.b_tilde[i + 1], rs.b_tilde[i].conj())
            && (0..rs.v_rows.ncols()).all(|c| close(rs.v_rows[(i + 1, c)], rs.v_rows[(i, c)].conj()));
        if !paired {
            return Err(Error::UnpairedComplexEigenvalue(i));
        }
        keep.push(i);
        kinds.push(ModeKind::Complex);
        i += 2;
    }
    Ok(ReducedSystem {
        n_eff: rs.n_eff,
        lambda: keep.iter().map(|&i| rs.lambda[i]).collect(),
        b_tilde: keep.iter().map(|&i| rs.b_tilde[i]).collect(),
        v_rows: DMatrix::from_fn(keep.len(), rs.v_rows.ncols(), |r, c| rs.v_rows[(keep[r], c)]),
        kinds,
        half_storage: true,
        source: rs.source.clone(),
    })
}
