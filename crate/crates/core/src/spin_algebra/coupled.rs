//! Coupled total-spin bases and block decomposition of spin-rotation
//! invariant operators.
//!
//! Highest-weight vectors (`m = s`) are found by diagonalising `S²` in the
//! `S_z = s` sector and refining degenerate eigenspaces with a chain of
//! commuting intermediate `S²` operators. Within a remaining degenerate
//! space the largest-magnitude component of each vector is made real
//! positive. States with `m < s` are generated by the lowering operator, so
//! every `(s, m)` block of an invariant operator is the same matrix.

use std::ops::Range;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use super::{HalfInteger, SpinOperatorSet};
use crate::error::{Error, Result};
use crate::linalg::{max_abs, CMatrix};

/// Quantum numbers of one coupled-basis vector.
///
/// `intermediate` holds the spins of the chain subsets in order; with the
/// default chain the first entry is `s_f1`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CoupledBasisLabel {
    pub s: HalfInteger,
    pub m: HalfInteger,
    pub intermediate: Vec<HalfInteger>,
}

impl CoupledBasisLabel {
    pub fn s_f1(&self) -> Option<HalfInteger> {
        self.intermediate.first().copied()
    }
}

#[derive(Clone, Debug)]
pub struct CoupledBasis {
    chain: Vec<Vec<usize>>,
    labels: Vec<CoupledBasisLabel>,
    /// Columns are basis vectors in the computational basis.
    vectors: DMatrix<f64>,
}

/// Real sparse action of spin operators on computational basis states.
struct SparseSpin<'a> {
    ops: &'a SpinOperatorSet,
    twice_m: Vec<Vec<i32>>,
}

impl<'a> SparseSpin<'a> {
    fn new(ops: &'a SpinOperatorSet) -> Self {
        let twice_m = ops
            .spins()
            .iter()
            .map(|s| (0..=s.twice()).map(|a| s.twice() - 2 * a).collect())
            .collect();
        Self { ops, twice_m }
    }

    fn m_local(&self, p: usize, digit: usize) -> f64 {
        f64::from(self.twice_m[p][digit]) / 2.0
    }

    fn total_twice_m(&self, idx: usize) -> i32 {
        (0..self.ops.n_particles()).map(|p| self.twice_m[p][self.ops.digit(idx, p)]).sum()
    }

    /// `⟨digit−1|J+|digit⟩` style ladder factors for a local spin.
    fn raise_factor(&self, p: usize, digit: usize) -> Option<f64> {
        if digit == 0 {
            return None;
        }
        let j = self.ops.spins()[p].value();
        let m = self.m_local(p, digit);
        Some((j * (j + 1.0) - m * (m + 1.0)).sqrt())
    }

    fn lower_factor(&self, p: usize, digit: usize) -> Option<f64> {
        if digit + 1 >= self.ops.dims()[p] {
            return None;
        }
        let j = self.ops.spins()[p].value();
        let m = self.m_local(p, digit);
        Some((j * (j + 1.0) - m * (m - 1.0)).sqrt())
    }

    /// `S²_subset |idx⟩` as a list of `(index, amplitude)`.
    fn spin_squared_column(&self, subset: &[usize], idx: usize, out: &mut Vec<(usize, f64)>) {
        out.clear();
        let strides = self.ops.strides();
        let mut diag: f64 = subset.iter().map(|&p| self.ops.spins()[p].q()).sum();
        for (a, &p) in subset.iter().enumerate() {
            let dp = self.ops.digit(idx, p);
            for &r in &subset[a + 1..] {
                let dr = self.ops.digit(idx, r);
                diag += 2.0 * self.m_local(p, dp) * self.m_local(r, dr);
                // J+_p J-_r + J-_p J+_r
                if let (Some(up), Some(down)) = (self.raise_factor(p, dp), self.lower_factor(r, dr)) {
                    out.push((idx - strides[p] + strides[r], up * down));
                }
                if let (Some(down), Some(up)) = (self.lower_factor(p, dp), self.raise_factor(r, dr)) {
                    out.push((idx + strides[p] - strides[r], up * down));
                }
            }
        }
        out.push((idx, diag));
    }

    fn restricted_spin_squared(&self, subset: &[usize], sector: &[usize], position: &[usize]) -> DMatrix<f64> {
        let n = sector.len();
        let mut mat = DMatrix::<f64>::zeros(n, n);
        let mut col = Vec::new();
        for (c, &idx) in sector.iter().enumerate() {
            self.spin_squared_column(subset, idx, &mut col);
            for &(row_idx, amp) in &col {
                let r = position[row_idx];
                debug_assert!(r != usize::MAX, "operator left the S_z sector");
                mat[(r, c)] += amp;
            }
        }
        mat
    }

    fn lower(&self, v: &DVector<f64>) -> DVector<f64> {
        let strides = self.ops.strides();
        let mut out = DVector::<f64>::zeros(v.len());
        for (idx, &amp) in v.iter().enumerate() {
            if amp == 0.0 {
                continue;
            }
            for p in 0..self.ops.n_particles() {
                let d = self.ops.digit(idx, p);
                if let Some(f) = self.lower_factor(p, d) {
                    out[idx + strides[p]] += f * amp;
                }
            }
        }
        out
    }
}

/// Splits the columns of `basis` into joint eigenspaces of the chain
/// operators (restricted to the span of `basis`), in ascending label order.
fn refine(
    basis: DMatrix<f64>,
    chain: &[DMatrix<f64>],
    labels: Vec<HalfInteger>,
    out: &mut Vec<(Vec<HalfInteger>, DVector<f64>)>,
) -> Result<()> {
    let Some((op, rest)) = chain.split_first() else {
        for c in 0..basis.ncols() {
            out.push((labels.clone(), basis.column(c).into_owned()));
        }
        return Ok(());
    };
    let reduced = basis.transpose() * op * &basis;
    let reduced = (&reduced + reduced.transpose()) * 0.5;
    let eig = reduced.symmetric_eigen();
    let mut groups: Vec<(HalfInteger, Vec<usize>)> = Vec::new();
    for (c, &lambda) in eig.eigenvalues.iter().enumerate() {
        let j = HalfInteger::from_casimir(lambda)?;
        match groups.iter_mut().find(|(g, _)| *g == j) {
            Some((_, cols)) => cols.push(c),
            None => groups.push((j, vec![c])),
        }
    }
    groups.sort_by_key(|(j, _)| *j);
    for (j, cols) in groups {
        let sub = DMatrix::from_columns(&cols.iter().map(|&c| eig.eigenvectors.column(c)).collect::<Vec<_>>());
        let next = &basis * sub;
        let mut l = labels.clone();
        l.push(j);
        refine(next, rest, l, out)?;
    }
    Ok(())
}

fn fix_phase(v: &mut DVector<f64>) {
    let max = v.iter().fold(0.0f64, |acc, x| acc.max(x.abs()));
    if let Some(lead) = v.iter().find(|x| x.abs() >= max * (1.0 - 1e-10)) {
        if *lead < 0.0 {
            v.neg_mut();
        }
    }
}

impl CoupledBasis {
    /// Default chain: `S²` of the prefixes `{0,1}, {0,1,2}, …` (stopping
    /// before the full set), so the first intermediate label is `s_f1`.
    pub fn standard(ops: &SpinOperatorSet) -> Result<Self> {
        let n = ops.n_particles();
        let chain: Vec<Vec<usize>> = if n < 2 {
            Vec::new()
        } else {
            (2..=(n - 1).max(2)).map(|len| (0..len).collect()).collect()
        };
        Self::new(ops, &chain)
    }

    /// Basis adapted to `S²`, `S_z` and the `S²` of each chain subset. The
    /// chain subsets must be mutually commuting (nested or disjoint).
    pub fn new(ops: &SpinOperatorSet, chain: &[Vec<usize>]) -> Result<Self> {
        let n = ops.n_particles();
        for subset in chain {
            if subset.is_empty() || subset.iter().any(|&p| p >= n) {
                return Err(Error::Index(format!("invalid chain subset {subset:?}")));
            }
        }
        let sparse = SparseSpin::new(ops);
        let dim = ops.dimension();
        let all: Vec<usize> = (0..n).collect();
        let twice_m: Vec<i32> = (0..dim).map(|idx| sparse.total_twice_m(idx)).collect();
        let max_twice_m = *twice_m.iter().max().unwrap();

        let mut highest: Vec<(HalfInteger, Vec<HalfInteger>, DVector<f64>)> = Vec::new();
        let mut position = vec![usize::MAX; dim];
        let mut twice_s = max_twice_m;
        while twice_s >= 0 {
            let sector: Vec<usize> = (0..dim).filter(|&i| twice_m[i] == twice_s).collect();
            for (p, &idx) in sector.iter().enumerate() {
                position[idx] = p;
            }
            let s = HalfInteger::from_twice(twice_s);
            let total = sparse.restricted_spin_squared(&all, &sector, &position);
            let eig = total.symmetric_eigen();
            let cols: Vec<_> = (0..sector.len())
                .filter(|&c| (eig.eigenvalues[c] - s.q()).abs() < 1e-8 * (1.0 + s.q()))
                .map(|c| eig.eigenvectors.column(c))
                .collect();
            if !cols.is_empty() {
                let hw = DMatrix::from_columns(&cols);
                let chain_ops: Vec<DMatrix<f64>> = chain
                    .iter()
                    .map(|subset| sparse.restricted_spin_squared(subset, &sector, &position))
                    .collect();
                let mut refined = Vec::new();
                refine(hw, &chain_ops, Vec::new(), &mut refined)?;
                for (labels, local) in refined {
                    let mut v = DVector::<f64>::zeros(dim);
                    for (p, &idx) in sector.iter().enumerate() {
                        v[idx] = local[p];
                    }
                    fix_phase(&mut v);
                    highest.push((s, labels, v));
                }
            }
            for &idx in &sector {
                position[idx] = usize::MAX;
            }
            twice_s -= 2;
        }

        let mut entries: Vec<(CoupledBasisLabel, DVector<f64>)> = Vec::with_capacity(dim);
        for (s, labels, v) in highest {
            let mut v = v;
            let mut m = s.twice();
            loop {
                entries.push((
                    CoupledBasisLabel { s, m: HalfInteger::from_twice(m), intermediate: labels.clone() },
                    v.clone(),
                ));
                if m == -s.twice() {
                    break;
                }
                v = sparse.lower(&v);
                let norm = v.norm();
                v /= norm;
                m -= 2;
            }
        }
        if entries.len() != dim {
            return Err(Error::Structure { residual: (dim as f64 - entries.len() as f64).abs() });
        }
        entries.sort_by(|(a, _), (b, _)| {
            a.s.cmp(&b.s).then(b.m.cmp(&a.m)).then_with(|| a.intermediate.cmp(&b.intermediate))
        });
        let vectors = DMatrix::from_columns(&entries.iter().map(|(_, v)| v.clone()).collect::<Vec<_>>());
        let labels = entries.into_iter().map(|(l, _)| l).collect();
        Ok(Self { chain: chain.to_vec(), labels, vectors })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn chain(&self) -> &[Vec<usize>] {
        &self.chain
    }

    pub fn labels(&self) -> &[CoupledBasisLabel] {
        &self.labels
    }

    /// Real orthogonal matrix whose columns are the basis vectors.
    pub fn vectors(&self) -> &DMatrix<f64> {
        &self.vectors
    }

    pub fn unitary(&self) -> CMatrix {
        self.vectors.map(|x| Complex64::new(x, 0.0))
    }

    /// `V† A V`.
    pub fn transform(&self, a: &CMatrix) -> CMatrix {
        let v = self.unitary();
        v.adjoint() * a * v
    }

    /// Contiguous `(s, m)` ranges in basis order.
    pub fn block_ranges(&self) -> Vec<(HalfInteger, HalfInteger, Range<usize>)> {
        let mut out: Vec<(HalfInteger, HalfInteger, Range<usize>)> = Vec::new();
        for (i, l) in self.labels.iter().enumerate() {
            match out.last_mut() {
                Some((s, m, r)) if *s == l.s && *m == l.m => r.end = i + 1,
                _ => out.push((l.s, l.m, i..i + 1)),
            }
        }
        out
    }
}

/// One `(s, m)` block of an operator in a coupled basis.
#[derive(Clone, Debug)]
pub struct SpinBlock {
    pub s: HalfInteger,
    pub m: HalfInteger,
    pub labels: Vec<CoupledBasisLabel>,
    pub matrix: CMatrix,
}

/// Block decomposition in the standard coupled basis.
pub fn block_decompose(ops: &SpinOperatorSet, matrix: &CMatrix) -> Result<Vec<SpinBlock>> {
    let basis = CoupledBasis::standard(ops)?;
    block_decompose_in(&basis, matrix)
}

/// Block decomposition in a given coupled basis. Fails if `matrix` has
/// weight between different `(s, m)` sectors, i.e. does not commute with
/// `S²` and `S_z`.
pub fn block_decompose_in(basis: &CoupledBasis, matrix: &CMatrix) -> Result<Vec<SpinBlock>> {
    if matrix.nrows() != basis.len() || matrix.ncols() != basis.len() {
        return Err(Error::Size(format!(
            "matrix is {}x{}, basis has {} vectors",
            matrix.nrows(),
            matrix.ncols(),
            basis.len()
        )));
    }
    let transformed = basis.transform(matrix);
    let ranges = basis.block_ranges();
    let mut sector = vec![0usize; basis.len()];
    for (b, (_, _, r)) in ranges.iter().enumerate() {
        for i in r.clone() {
            sector[i] = b;
        }
    }
    let mut residual = 0.0f64;
    for c in 0..basis.len() {
        for r in 0..basis.len() {
            if sector[r] != sector[c] {
                residual = residual.max(transformed[(r, c)].norm());
            }
        }
    }
    if residual > 1e-8 * (1.0 + max_abs(matrix)) {
        return Err(Error::Structure { residual });
    }
    Ok(ranges
        .into_iter()
        .map(|(s, m, r)| SpinBlock {
            s,
            m,
            labels: basis.labels()[r.clone()].to_vec(),
            matrix: transformed.view((r.start, r.start), (r.len(), r.len())).into_owned(),
        })
        .collect())
}

/// Inverse of [`block_decompose_in`].
pub fn reassemble(basis: &CoupledBasis, blocks: &[SpinBlock]) -> CMatrix {
    let n = basis.len();
    let mut inner = CMatrix::zeros(n, n);
    let mut offset = 0;
    for b in blocks {
        let k = b.matrix.nrows();
        inner.view_mut((offset, offset), (k, k)).copy_from(&b.matrix);
        offset += k;
    }
    let v = basis.unitary();
    &v * inner * v.adjoint()
}
