//! Register designs for selective SWAP between the flying qubit and one
//! static qubit, and their verification against the scattering solver.
//!
//! Qubit 0 is the flying qubit. Static qubits are numbered `1..=N` from the
//! mirror outwards: `kd[0]` is the mirror–qubit-1 distance and `kd[i]` the
//! distance between qubits `i` and `i + 1`. A config is dimensionless; the
//! physical register is realised at `k = 1`, where `G = g` and `x = kd`.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::amplitudes::{design_points_for_coupling, g_tilde, h_with_winding, G_THRESHOLD};
use crate::error::{Error, Result};
use crate::linalg::{identity, reduce_to, trace, unitarity_defect, CMatrix, ONE, ZERO};
use crate::solver::{solve, ChannelOperators, ScatteringProblem, Site};
use crate::spin_algebra::{build_spin_operators, heisenberg_coupling, swap_operator, HalfInteger, SpinOperatorSet};

pub const SCHEMA_VERSION: &str = "v1";
/// Largest register the dense verification handles (`2^(N+1)` spin states).
pub const MAX_STATIC_QUBITS: usize = 11;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegisterConfig {
    pub schema_version: String,
    /// Number of static qubits.
    pub n: usize,
    /// Optical distances, mirror outwards.
    pub kd: Vec<f64>,
    /// Uniform dimensionless coupling `G/k`.
    pub g: f64,
    /// Index `ν` of the static qubit to swap with, `1..=n`.
    pub target: usize,
    /// Multiple-of-π counts per slot; 0 marks the free slot `kd_ν`.
    pub windings: Vec<u32>,
    /// Optional per-qubit couplings overriding `g`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub couplings: Option<Vec<f64>>,
    /// Hash of the run that wrote this file, when written by the CLI.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub manifest_hash: Option<String>,
}

impl RegisterConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.schema_version != SCHEMA_VERSION {
            return bad(format!("unsupported schema version {:?}", self.schema_version));
        }
        if self.n == 0 || self.n > MAX_STATIC_QUBITS {
            return bad(format!("n = {} outside 1..={MAX_STATIC_QUBITS}", self.n));
        }
        if self.kd.len() != self.n {
            return bad(format!("expected {} distances, got {}", self.n, self.kd.len()));
        }
        if let Some((i, kd)) = self.kd.iter().enumerate().find(|(_, kd)| !(kd.is_finite() && **kd > 0.0)) {
            return bad(format!("kd[{i}] = {kd} must be positive"));
        }
        if !self.g.is_finite() {
            return bad("g must be finite".into());
        }
        if !(1..=self.n).contains(&self.target) {
            return bad(format!("target {} outside 1..={}", self.target, self.n));
        }
        if self.windings.len() != self.n {
            return bad(format!("expected {} windings, got {}", self.n, self.windings.len()));
        }
        if let Some(c) = &self.couplings {
            if c.len() != self.n || !c.iter().all(|x| x.is_finite()) {
                return bad("couplings must hold one finite value per static qubit".into());
            }
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let config: Self = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// Coupling of static qubit `i` (1-based).
    pub fn coupling(&self, i: usize) -> f64 {
        self.couplings.as_ref().map_or(self.g, |c| c[i - 1])
    }

    /// Positions `x_i = −Σ_{l≤i} kd_l` at `k = 1`, indexed by qubit.
    pub fn positions(&self) -> Vec<f64> {
        self.kd
            .iter()
            .scan(0.0, |x, kd| {
                *x -= kd;
                Some(*x)
            })
            .collect()
    }
}

fn default_windings(n: usize, windings: &[u32]) -> Result<Vec<u32>> {
    if windings.is_empty() {
        return Ok(vec![1; n]);
    }
    if windings.len() != n {
        return Err(Error::Design(format!("expected {n} windings, got {}", windings.len())));
    }
    Ok(windings.to_vec())
}

/// Design for a SWAP with qubit `target`, with `kd_target = kd_a` and
/// `g = g̃(kd_a)`. `windings` has one entry per slot (the entry for the free
/// slot is ignored); an empty slice means all ones.
pub fn design_register(n: usize, target: usize, kd_a: f64, windings: &[u32]) -> Result<RegisterConfig> {
    if n == 0 || n > MAX_STATIC_QUBITS {
        return Err(Error::Design(format!("n = {n} outside 1..={MAX_STATIC_QUBITS}")));
    }
    if !(1..=n).contains(&target) {
        return Err(Error::Design(format!("target {target} outside 1..={n}")));
    }
    let g = g_tilde(kd_a).map_err(|e| Error::Design(e.to_string()))?;
    let mut w = default_windings(n, windings)?;
    w[target - 1] = 0;
    if let Some(i) = w.iter().enumerate().position(|(i, &x)| i != target - 1 && x == 0) {
        return Err(Error::Design(format!("winding for slot {} must be at least 1", i + 1)));
    }
    let kd = (1..=n)
        .map(|i| {
            if i == target {
                Ok(kd_a)
            } else if i == target + 1 {
                h_with_winding(kd_a, w[i - 1])
            } else {
                Ok(f64::from(w[i - 1]) * PI)
            }
        })
        .collect::<Result<Vec<f64>>>()?;
    let config = RegisterConfig {
        schema_version: SCHEMA_VERSION.into(),
        n,
        kd,
        g,
        target,
        windings: w,
        couplings: None,
        manifest_hash: None,
    };
    config.validate()?;
    Ok(config)
}

/// Design entered through a fixed coupling `g0 ≥ 1`; `root` picks the lower
/// (0) or upper (1) of the two solutions of `g̃(kd_a) = g0`.
pub fn design_from_coupling(n: usize, target: usize, g0: f64, root: usize, windings: &[u32]) -> Result<RegisterConfig> {
    let points = design_points_for_coupling(g0)?;
    let point = points
        .get(root)
        .ok_or_else(|| Error::Design(format!("root {root} does not exist; {} available", points.len())))?;
    let mut config = design_register(n, target, point.kd_a, windings)?;
    // the root is accurate to bisection precision; keep the requested value
    config.g = g0.max(G_THRESHOLD);
    Ok(config)
}

/// A config realised on its spin space, with the Heisenberg operators cached.
#[derive(Clone, Debug)]
pub struct Register {
    config: RegisterConfig,
    ops: SpinOperatorSet,
    exchange: Vec<CMatrix>,
    target: CMatrix,
}

impl Register {
    pub fn new(config: &RegisterConfig) -> Result<Self> {
        config.validate()?;
        let ops = build_spin_operators(config.n + 1)?;
        let exchange = (1..=config.n).map(|i| heisenberg_coupling(&ops, 0, i)).collect::<Result<Vec<_>>>()?;
        let target = swap_operator(&ops, 0, config.target)?;
        Ok(Self { config: config.clone(), ops, exchange, target })
    }

    pub fn config(&self) -> &RegisterConfig {
        &self.config
    }

    pub fn operators(&self) -> &SpinOperatorSet {
        &self.ops
    }

    pub fn dimension(&self) -> usize {
        self.ops.dimension()
    }

    /// `I_others ⊗ W_{f,ν}`.
    pub fn target_unitary(&self) -> &CMatrix {
        &self.target
    }

    /// Problem with qubit `i` at `positions[i − 1]` and coupling `M_i`, at momentum `k`.
    pub fn problem_with(&self, positions: &[f64], couplings: &[CMatrix], k: f64) -> Result<ScatteringProblem> {
        if positions.len() != self.config.n || couplings.len() != self.config.n {
            return Err(Error::Size("one position and coupling per static qubit".into()));
        }
        // outermost qubit first
        let sites = positions.iter().zip(couplings).rev().map(|(&x, m)| Site::new(x, m.clone())).collect();
        ScatteringProblem::new(self.dimension(), sites, true, k)
    }

    /// Physical couplings `M_i = G_i σ_f·σ_i` at the design momentum `k = 1`.
    pub fn couplings(&self) -> Vec<CMatrix> {
        self.exchange
            .iter()
            .enumerate()
            .map(|(i, h)| h * Complex64::new(self.config.coupling(i + 1), 0.0))
            .collect()
    }

    pub fn problem_at(&self, positions: &[f64], k: f64) -> Result<ScatteringProblem> {
        self.problem_with(positions, &self.couplings(), k)
    }

    pub fn solve_design(&self) -> Result<ChannelOperators> {
        solve(&self.problem_at(&self.config.positions(), 1.0)?)
    }

    /// `(|Tr(U†R)|/d, arg Tr(U†R))` against the target.
    pub fn overlap(&self, r: &CMatrix) -> (f64, f64) {
        overlap(&self.target, r)
    }

    /// Report for an already solved reflection operator.
    pub fn report(&self, r: &CMatrix) -> FidelityReport {
        let (fidelity, optimal_phase) = self.overlap(r);
        let bystander_disturbance = (1..=self.config.n)
            .filter(|&q| q != self.config.target)
            .map(|qubit| BystanderDisturbance { qubit, choi_distance: self.bystander_distance(r, qubit) })
            .collect();
        FidelityReport {
            fidelity,
            process_fidelity: fidelity * fidelity,
            optimal_phase,
            target: format!("SWAP(flying, static {}) on {} static qubits", self.config.target, self.config.n),
            bystander_disturbance,
        }
    }

    /// Frobenius distance between the normalised Choi matrix of the map
    /// induced on `qubit` (other qubits maximally mixed) and that of the identity.
    pub fn bystander_distance(&self, r: &CMatrix, qubit: usize) -> f64 {
        let dims = self.ops.dims();
        let others = (self.dimension() / dims[qubit]) as f64;
        let mut choi = CMatrix::zeros(4, 4);
        let mut ideal = CMatrix::zeros(4, 4);
        for a in 0..2 {
            for b in 0..2 {
                let mut e = CMatrix::zeros(2, 2);
                e[(a, b)] = ONE;
                let input = self.ops.embed(&[(qubit, &e)]) * Complex64::new(1.0 / others, 0.0);
                let out = reduce_to(&(r * input * r.adjoint()), dims, qubit);
                for c in 0..2 {
                    for d in 0..2 {
                        choi[(2 * a + c, 2 * b + d)] = out[(c, d)] * 0.5;
                    }
                }
                ideal[(2 * a + a, 2 * b + b)] = Complex64::new(0.5, 0.0);
            }
        }
        crate::linalg::norm(&(choi - ideal))
    }
}

fn overlap(u: &CMatrix, v: &CMatrix) -> (f64, f64) {
    let tr = trace(&(u.adjoint() * v));
    (tr.norm() / u.nrows() as f64, if tr == ZERO { 0.0 } else { tr.arg() })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BystanderDisturbance {
    pub qubit: usize,
    pub choi_distance: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FidelityReport {
    /// `|Tr(U†R)|/d`.
    pub fidelity: f64,
    /// `fidelity²`.
    pub process_fidelity: f64,
    pub optimal_phase: f64,
    pub target: String,
    pub bystander_disturbance: Vec<BystanderDisturbance>,
}

/// Phase-insensitive overlap `(|Tr(U†V)|/d, arg Tr(U†V))` of two unitaries.
pub fn gate_fidelity(u: &CMatrix, v: &CMatrix) -> Result<(f64, f64)> {
    if u.shape() != v.shape() || u.nrows() != u.ncols() {
        return Err(Error::Size("gate_fidelity needs two square matrices of equal size".into()));
    }
    for m in [u, v] {
        let defect = unitarity_defect(m);
        if defect > 1e-10 {
            return Err(Error::NonUnitary { defect });
        }
    }
    Ok(overlap(u, v))
}

/// Solves the register at its design momentum and compares with the target SWAP.
pub fn verify_swap(config: &RegisterConfig) -> Result<FidelityReport> {
    let register = Register::new(config)?;
    let channel = register.solve_design()?;
    Ok(register.report(&channel.r))
}

/// What to put at the replaced site in [`independence_check`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Replacement {
    /// `Γ σ_f·σ_i` with the given dimensionless strength.
    HeisenbergStrength(f64),
    /// A spin-independent barrier `Γ I`.
    Scalar(f64),
}

/// Re-verifies `config` after replacing the coupling of static qubit `site`
/// (any qubit other than the target).
pub fn independence_check(config: &RegisterConfig, site: usize, replacement: Replacement) -> Result<FidelityReport> {
    let register = Register::new(config)?;
    if site == 0 || site > config.n {
        return Err(Error::Index(format!("site {site} outside 1..={}", config.n)));
    }
    if site == config.target {
        return Err(Error::Index(format!("site {site} is the target qubit")));
    }
    let mut couplings = register.couplings();
    couplings[site - 1] = match replacement {
        Replacement::HeisenbergStrength(gamma) => &register.exchange[site - 1] * Complex64::new(gamma, 0.0),
        Replacement::Scalar(gamma) => identity(register.dimension()) * Complex64::new(gamma, 0.0),
    };
    if !couplings[site - 1].iter().all(|z| z.is_finite()) {
        return Err(Error::Domain("replacement strength must be finite".into()));
    }
    let problem = register.problem_with(&config.positions(), &couplings, 1.0)?;
    Ok(register.report(&solve(&problem)?.r))
}

/// Total spins `s_eff` of `n − target` spin-1/2 qubits with multiplicities,
/// ascending in `s_eff`.
pub fn effective_spin_spectrum(n: usize, target: usize) -> Result<Vec<(HalfInteger, usize)>> {
    if target > n {
        return Err(Error::Domain(format!("target {target} exceeds n = {n}")));
    }
    let count = n - target;
    if count == 0 {
        return Ok(Vec::new());
    }
    let binomial = |n: usize, k: i64| -> usize {
        if k < 0 || k as usize > n {
            return 0;
        }
        let k = k as usize;
        (0..k).fold(1usize, |acc, i| acc * (n - i) / (i + 1))
    };
    Ok(((count % 2) as i32..=count as i32)
        .step_by(2)
        .map(|twice_s| {
            let j = (count as i64 - i64::from(twice_s)) / 2;
            (HalfInteger::from_twice(twice_s), binomial(count, j) - binomial(count, j - 1))
        })
        .collect())
}
