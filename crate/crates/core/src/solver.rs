//! Stationary multichannel scattering of a particle with momentum `k` on a
//! line carrying matrix-valued delta barriers, optionally terminated by a
//! hard wall at `x = 0`.
//!
//! Units: ħ = 1, mass = 1, `H = p²/2 + Σ M_i δ(x − x_i)`. The wavefunction is
//! continuous at each site and its derivative jumps by `2 M_i ψ(x_i)`.
//! In region `j` the d-vector wavefunction is `e^{ikx} A_j + e^{−ikx} B_j`.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{hermiticity_defect, hermitian_eigenvalues, identity, max_abs, trace, CMatrix, I, ONE};

/// Sites closer than this are merged by summing their couplings.
pub const MERGE_TOLERANCE: f64 = 1e-9;
/// LU pivot ratio above which a configuration is reported as degenerate.
pub const CONDITION_LIMIT: f64 = 1e12;
/// Largest number of unknowns handled by one dense matching system.
pub const DENSE_UNKNOWN_LIMIT: usize = 1536;

#[derive(Clone, Debug)]
pub struct Site {
    pub position: f64,
    /// `M_i` in `M_i δ(x − x_i)`, Hermitian.
    pub coupling: CMatrix,
}

impl Site {
    pub fn new(position: f64, coupling: CMatrix) -> Self {
        Self { position, coupling }
    }
}

#[derive(Clone, Debug)]
pub struct ScatteringProblem {
    pub dimension: usize,
    /// Ordered by increasing position.
    pub sites: Vec<Site>,
    pub mirror: bool,
    pub k: f64,
    /// Point at which incident and reflected waves are compared. Defaults to
    /// the leftmost site, or the origin when there are none.
    pub reference: Option<f64>,
}

#[derive(Clone, Debug)]
pub struct ChannelOperators {
    pub r: CMatrix,
    /// Ratio of transmitted to incident plane-wave amplitudes; `None` with a mirror.
    pub t: Option<CMatrix>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Method {
    /// One linear system for all regions at once.
    Dense,
    /// Site-by-site elimination from the right end, `B_j = Q_j A_j`.
    Layered,
    /// Products of 2d×2d transfer matrices.
    Transfer,
}

impl ScatteringProblem {
    pub fn new(dimension: usize, sites: Vec<Site>, mirror: bool, k: f64) -> Result<Self> {
        let problem = Self { dimension, sites, mirror, k, reference: None };
        problem.validate()?;
        Ok(problem)
    }

    pub fn with_reference(mut self, reference: f64) -> Self {
        self.reference = Some(reference);
        self
    }

    pub fn validate(&self) -> Result<()> {
        let invalid = |msg: String| Err(Error::InvalidProblem(msg));
        if self.dimension == 0 {
            return invalid("spin-space dimension must be positive".into());
        }
        if !(self.k.is_finite() && self.k > 0.0) {
            return invalid(format!("momentum must be positive and finite, got {}", self.k));
        }
        if let Some(x) = self.reference {
            if !x.is_finite() {
                return invalid("reference point must be finite".into());
            }
        }
        for (i, site) in self.sites.iter().enumerate() {
            if !site.position.is_finite() {
                return invalid(format!("site {i} has a non-finite position"));
            }
            if self.mirror && site.position >= 0.0 {
                return invalid(format!("site {i} at x = {} is not in front of the mirror", site.position));
            }
            let m = &site.coupling;
            if m.nrows() != self.dimension || m.ncols() != self.dimension {
                return invalid(format!("site {i} coupling is {}x{}, expected {d}x{d}", m.nrows(), m.ncols(), d = self.dimension));
            }
            if !m.iter().all(|z| z.is_finite()) {
                return invalid(format!("site {i} coupling has non-finite entries"));
            }
            let defect = hermiticity_defect(m);
            if defect > 1e-12 * (1.0 + max_abs(m)) {
                return invalid(format!("site {i} coupling is not Hermitian (defect {defect:.3e})"));
            }
            if i > 0 && site.position < self.sites[i - 1].position - MERGE_TOLERANCE {
                return invalid(format!("site {i} is out of order"));
            }
        }
        Ok(())
    }

    fn reference_point(&self) -> f64 {
        self.reference.or_else(|| self.sites.first().map(|s| s.position)).unwrap_or(0.0)
    }

    fn merged_sites(&self) -> Vec<Site> {
        let mut out: Vec<Site> = Vec::with_capacity(self.sites.len());
        for site in &self.sites {
            match out.last_mut() {
                Some(last) if site.position - last.position < MERGE_TOLERANCE => {
                    last.coupling += &site.coupling;
                }
                _ => out.push(site.clone()),
            }
        }
        out
    }
}

fn lu_condition(lu: &nalgebra::LU<Complex64, nalgebra::Dyn, nalgebra::Dyn>) -> f64 {
    let u = lu.u();
    let diag: Vec<f64> = u.diagonal().iter().map(|z| z.norm()).collect();
    let max = diag.iter().copied().fold(0.0, f64::max);
    let min = diag.iter().copied().fold(f64::INFINITY, f64::min);
    if min == 0.0 || !min.is_finite() {
        f64::INFINITY
    } else {
        max / min
    }
}

fn checked_solve(m: CMatrix, rhs: &CMatrix) -> Result<CMatrix> {
    let lu = m.lu();
    let condition = lu_condition(&lu);
    if condition > CONDITION_LIMIT {
        return Err(Error::Degenerate { condition });
    }
    let x = lu.solve(rhs).ok_or(Error::Degenerate { condition: f64::INFINITY })?;
    if !x.iter().all(|z| z.is_finite()) {
        return Err(Error::Degenerate { condition: f64::INFINITY });
    }
    Ok(x)
}

/// Solves with the dense matching system, switching to the layered
/// elimination when the dense system would be too large.
pub fn solve(problem: &ScatteringProblem) -> Result<ChannelOperators> {
    let unknowns = problem.dimension * (2 * problem.sites.len() + 1);
    let method = if unknowns <= DENSE_UNKNOWN_LIMIT { Method::Dense } else { Method::Layered };
    solve_with(problem, method)
}

pub fn solve_with(problem: &ScatteringProblem, method: Method) -> Result<ChannelOperators> {
    problem.validate()?;
    let sites = problem.merged_sites();
    let (r_global, t) = match method {
        Method::Dense => dense(problem, &sites)?,
        Method::Layered => layered(problem, &sites)?,
        Method::Transfer => transfer(problem, &sites)?,
    };
    let x_ref = problem.reference_point();
    let r = r_global * Complex64::from_polar(1.0, -2.0 * problem.k * x_ref);
    Ok(ChannelOperators { r, t })
}

fn dense(problem: &ScatteringProblem, sites: &[Site]) -> Result<(CMatrix, Option<CMatrix>)> {
    let d = problem.dimension;
    let n = sites.len();
    let size = d * (2 * n + 1);
    let scale = 2.0 / problem.k;
    // unknown blocks: 0 → B_0, 2j−1 → A_j, 2j → B_j
    let col = |block: usize| block * d;
    let mut m = CMatrix::zeros(size, size);
    let mut rhs = CMatrix::zeros(size, d);

    for (idx, site) in sites.iter().enumerate() {
        let j = idx + 1;
        let e = Complex64::from_polar(1.0, problem.k * site.position);
        let eb = e.conj();
        let row_c = 2 * idx * d;
        let row_j = row_c + d;
        let (a_prev, b_prev) = if j == 1 { (None, 0) } else { (Some(2 * j - 3), 2 * j - 2) };
        let (a_cur, b_cur) = (2 * j - 1, 2 * j);
        for r in 0..d {
            // continuity: e A_{j−1} + ē B_{j−1} − e A_j − ē B_j = 0
            match a_prev {
                Some(a) => m[(row_c + r, col(a) + r)] += e,
                None => rhs[(row_c + r, r)] -= e,
            }
            m[(row_c + r, col(b_prev) + r)] += eb;
            m[(row_c + r, col(a_cur) + r)] -= e;
            m[(row_c + r, col(b_cur) + r)] -= eb;
            // jump: i(e A_j − ē B_j) − i(e A_{j−1} − ē B_{j−1}) − (2/k) M (e A_j + ē B_j) = 0
            m[(row_j + r, col(a_cur) + r)] += I * e;
            m[(row_j + r, col(b_cur) + r)] -= I * eb;
            match a_prev {
                Some(a) => m[(row_j + r, col(a) + r)] -= I * e,
                None => rhs[(row_j + r, r)] += I * e,
            }
            m[(row_j + r, col(b_prev) + r)] += I * eb;
            for c in 0..d {
                let mv = site.coupling[(r, c)] * scale;
                m[(row_j + r, col(a_cur) + c)] -= mv * e;
                m[(row_j + r, col(b_cur) + c)] -= mv * eb;
            }
        }
    }
    let row_end = 2 * n * d;
    let (a_last, b_last) = if n == 0 { (None, 0) } else { (Some(2 * n - 1), 2 * n) };
    for r in 0..d {
        if problem.mirror {
            // ψ(0) = A_n + B_n = 0
            match a_last {
                Some(a) => m[(row_end + r, col(a) + r)] += ONE,
                None => rhs[(row_end + r, r)] -= ONE,
            }
            m[(row_end + r, col(b_last) + r)] += ONE;
        } else {
            m[(row_end + r, col(b_last) + r)] += ONE;
        }
    }

    let x = checked_solve(m, &rhs)?;
    let r = x.rows(0, d).into_owned();
    let t = if problem.mirror {
        None
    } else {
        Some(match a_last {
            Some(a) => x.rows(col(a), d).into_owned(),
            None => identity(d),
        })
    };
    Ok((r, t))
}

fn layered(problem: &ScatteringProblem, sites: &[Site]) -> Result<(CMatrix, Option<CMatrix>)> {
    let d = problem.dimension;
    let id = identity(d);
    let mut q = if problem.mirror { -id.clone() } else { CMatrix::zeros(d, d) };
    // A_j = G_j A_{j−1}; kept only for the transmission
    let mut steps: Vec<CMatrix> = Vec::with_capacity(sites.len());
    for site in sites.iter().rev() {
        let e = Complex64::from_polar(1.0, problem.k * site.position);
        let eb = e.conj();
        let p = &id * e + &q * eb;
        let dmat = (&id * e - &q * eb) + &site.coupling * &p * (I * 2.0 / problem.k);
        let sum = &p + &dmat;
        let inv = checked_solve(sum, &id)?;
        if !problem.mirror {
            steps.push(&inv * (e * 2.0));
        }
        q = (&p - &dmat) * &inv * (e * e);
    }
    let t = if problem.mirror {
        None
    } else {
        let mut t = id.clone();
        for g in steps.iter().rev() {
            t = g * t;
        }
        Some(t)
    };
    Ok((q, t))
}

fn transfer(problem: &ScatteringProblem, sites: &[Site]) -> Result<(CMatrix, Option<CMatrix>)> {
    let d = problem.dimension;
    let id = identity(d);
    let mut total = identity(2 * d);
    for site in sites {
        let e = Complex64::from_polar(1.0, problem.k * site.position);
        let eb = e.conj();
        let mk = &site.coupling * (I * 2.0 / problem.k);
        // ψ = e A + ē B;  φ_r = (e A − ē B) − (2i/k) M ψ
        let psi_a = &id * e;
        let psi_b = &id * eb;
        let phi_a = &psi_a - &mk * &psi_a;
        let phi_b = -&psi_b - &mk * &psi_b;
        let mut step = CMatrix::zeros(2 * d, 2 * d);
        step.view_mut((0, 0), (d, d)).copy_from(&((&psi_a + &phi_a) * (eb * 0.5)));
        step.view_mut((0, d), (d, d)).copy_from(&((&psi_b + &phi_b) * (eb * 0.5)));
        step.view_mut((d, 0), (d, d)).copy_from(&((&psi_a - &phi_a) * (e * 0.5)));
        step.view_mut((d, d), (d, d)).copy_from(&((&psi_b - &phi_b) * (e * 0.5)));
        total = step * total;
    }
    let t11 = total.view((0, 0), (d, d)).into_owned();
    let t12 = total.view((0, d), (d, d)).into_owned();
    let t21 = total.view((d, 0), (d, d)).into_owned();
    let t22 = total.view((d, d), (d, d)).into_owned();
    if problem.mirror {
        let r = -checked_solve(&t12 + &t22, &(&t11 + &t21))?;
        Ok((r, None))
    } else {
        let r = -checked_solve(t22, &t21)?;
        let t = &t11 + &t12 * &r;
        Ok((r, Some(t)))
    }
}

/// Validates a density matrix of dimension `d`.
pub fn check_density(rho: &CMatrix, d: usize) -> Result<()> {
    if rho.nrows() != d || rho.ncols() != d {
        return Err(Error::InvalidDensity(format!("expected {d}x{d}, got {}x{}", rho.nrows(), rho.ncols())));
    }
    if !rho.iter().all(|z| z.is_finite()) {
        return Err(Error::InvalidDensity("non-finite entries".into()));
    }
    let defect = hermiticity_defect(rho);
    if defect > 1e-10 {
        return Err(Error::InvalidDensity(format!("not Hermitian (defect {defect:.3e})")));
    }
    let tr = trace(rho);
    if (tr - 1.0).norm() > 1e-10 {
        return Err(Error::InvalidDensity(format!("trace is {tr}")));
    }
    let min = hermitian_eigenvalues(rho).first().copied().unwrap_or(0.0);
    if min < -1e-10 {
        return Err(Error::InvalidDensity(format!("negative eigenvalue {min:.3e}")));
    }
    Ok(())
}

/// `ρ → RρR† (+ TρT†)`: the spin state after the flying qubit has left.
pub fn apply_kraus(channel: &ChannelOperators, rho: &CMatrix) -> Result<CMatrix> {
    check_density(rho, channel.r.nrows())?;
    let mut out = &channel.r * rho * channel.r.adjoint();
    if let Some(t) = &channel.t {
        out += t * rho * t.adjoint();
    }
    Ok(out)
}

/// Purity `Tr ρ²`.
pub fn purity(rho: &CMatrix) -> f64 {
    (rho * rho).trace().re
}
