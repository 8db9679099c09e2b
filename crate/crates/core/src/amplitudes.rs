//! Closed-form amplitudes for delta barriers in front of a perfect mirror,
//! the SWAP design curves, and operator-valued composition of scatterers.
//!
//! Everything is dimensionless: `gamma = Γ/k` for a spinless barrier
//! `Γ δ(x)`, `g = G/k` for a Heisenberg contact coupling, `kd` for an
//! optical distance. Reflection amplitudes from a scatterer are referenced
//! at the scatterer's own position.

use std::f64::consts::PI;

use nalgebra::Matrix2;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{identity, norm, CMatrix, I, ONE};
use crate::spin_algebra::{build_spin_operators, singlet_triplet_projectors};

/// Inputs closer than this to a multiple of π are rejected by the design
/// curves, where the required coupling diverges.
pub const SINGULARITY_TOLERANCE: f64 = 1e-8;

/// Optical distance at which `g̃` reaches its minimum, `arccot(1/2)`.
pub fn threshold_kd() -> f64 {
    2.0f64.atan()
}

/// Smallest coupling for which a SWAP design exists.
pub const G_THRESHOLD: f64 = 1.0;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BarrierAmplitudes {
    pub r: Complex64,
    pub t: Complex64,
    pub gamma: f64,
}

/// Reflection and transmission of a spinless barrier `Γ δ(x)`.
pub fn r0(gamma: f64) -> BarrierAmplitudes {
    let r = -I * gamma / (ONE + I * gamma);
    BarrierAmplitudes { r, t: r + 1.0, gamma }
}

/// Effective spinless strengths `(γ_singlet, γ_triplet) = (−3g/4, g/4)` of a
/// Heisenberg coupling `g σ_f·σ_i`.
pub fn channel_gammas(g: f64) -> (f64, f64) {
    (-0.75 * g, 0.25 * g)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MirrorAmplitude {
    pub r_m: Complex64,
    pub gamma: f64,
    pub kd: f64,
}

/// Reflection of a barrier `Γ δ(x − x₁)` placed at optical distance `kd`
/// in front of a perfect mirror.
pub fn r_mirror(gamma: f64, kd: f64) -> Result<MirrorAmplitude> {
    let e = Complex64::from_polar(1.0, 2.0 * kd);
    let den = ONE + I * gamma * (ONE - e);
    if !(den.norm() > 1e-300) || !den.is_finite() {
        return Err(Error::Singular(format!("mirror amplitude denominator vanishes at gamma = {gamma}, kd = {kd}")));
    }
    let r_m = -(I * gamma + (ONE - I * gamma) * e) / den;
    Ok(MirrorAmplitude { r_m, gamma, kd })
}

fn distance_to_pi_multiple(kd: f64) -> f64 {
    let r = kd.rem_euclid(PI);
    r.min(PI - r)
}

fn check_regular(kd: f64) -> Result<()> {
    if !kd.is_finite() || distance_to_pi_multiple(kd) < SINGULARITY_TOLERANCE {
        return Err(Error::Divergence { kd, tolerance: SINGULARITY_TOLERANCE });
    }
    Ok(())
}

/// Coupling `g̃(kd)` at which the singlet and triplet mirror amplitudes are
/// opposite, so that the reflection operator is a SWAP up to a phase.
pub fn g_tilde(kd: f64) -> Result<f64> {
    check_regular(kd)?;
    let cot = 1.0 / kd.tan();
    Ok(2.0 / 3.0 * ((3.0 + 4.0 * cot * cot).sqrt() - cot))
}

/// Optical distance to the next static qubit that removes the singlet/triplet
/// mixing of the two-qubit block. The value lies in `(0, π]`.
pub fn h_func(kd1: f64) -> Result<f64> {
    h_with_winding(kd1, 1)
}

/// `h(kd1) + (winding − 1)π`: the physically equivalent larger separations.
pub fn h_with_winding(kd1: f64, winding: u32) -> Result<f64> {
    if winding == 0 {
        return Err(Error::Domain("winding must be at least 1".into()));
    }
    let g = g_tilde(kd1)?;
    let (gamma_s, _) = channel_gammas(g);
    let r_s = r_mirror(gamma_s, kd1)?.r_m;
    let raw = PI - r_s.arg() / 2.0;
    // smallest positive member of {nπ − arg/2}
    let mut base = raw.rem_euclid(PI);
    if base <= 0.0 {
        base += PI;
    }
    Ok(base + f64::from(winding - 1) * PI)
}

/// A point on the design curves: `g = g̃(kd_a)`, `kd_b = h(kd_a)`.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct DesignPoint {
    pub kd_a: f64,
    pub g: f64,
    pub kd_b: f64,
}

impl DesignPoint {
    pub fn from_kd(kd_a: f64) -> Result<Self> {
        Ok(Self { kd_a, g: g_tilde(kd_a)?, kd_b: h_func(kd_a)? })
    }
}

/// All `kd_a ∈ (0, π)` with `g̃(kd_a) = g0`: two roots above threshold, one
/// at threshold (within 1e−12).
pub fn design_points_for_coupling(g0: f64) -> Result<Vec<DesignPoint>> {
    if !g0.is_finite() {
        return Err(Error::Domain(format!("coupling {g0} is not finite")));
    }
    if g0 < G_THRESHOLD - 1e-12 {
        return Err(Error::BelowThreshold(g0));
    }
    let kd_star = threshold_kd();
    if (g0 - G_THRESHOLD).abs() <= 1e-12 {
        return Ok(vec![DesignPoint::from_kd(kd_star)?]);
    }
    let lo_edge = 2.0 * SINGULARITY_TOLERANCE;
    let hi_edge = PI - 2.0 * SINGULARITY_TOLERANCE;
    let reach = g_tilde(lo_edge)?.min(g_tilde(hi_edge)?);
    if g0 > reach {
        return Err(Error::Design(format!("g0 = {g0} needs kd closer than {lo_edge:e} to a multiple of pi")));
    }
    // g̃ decreases on (0, kd*) and increases on (kd*, π)
    let lower = bisect(|kd| g_tilde(kd).map(|g| g - g0), lo_edge, kd_star)?;
    let upper = bisect(|kd| g_tilde(kd).map(|g| g - g0), kd_star, hi_edge)?;
    Ok(vec![DesignPoint::from_kd(lower)?, DesignPoint::from_kd(upper)?])
}

fn bisect(f: impl Fn(f64) -> Result<f64>, mut a: f64, mut b: f64) -> Result<f64> {
    let mut fa = f(a)?;
    let fb = f(b)?;
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    if fa.signum() == fb.signum() {
        return Err(Error::Design("root is not bracketed".into()));
    }
    while b - a > 1e-13 {
        let mid = 0.5 * (a + b);
        let fm = f(mid)?;
        if fm == 0.0 {
            return Ok(mid);
        }
        if fm.signum() == fa.signum() {
            a = mid;
            fa = fm;
        } else {
            b = mid;
        }
    }
    Ok(0.5 * (a + b))
}

/// Reflection amplitudes of the degenerate two-dimensional block
/// `{|s_f1 = 0⟩, |s_f1 = 1⟩}` when the target qubit already satisfies the
/// SWAP condition (`r_t = −r_s` at the mirror side).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Block2 {
    pub r00: Complex64,
    pub r11: Complex64,
    pub r01: Complex64,
    pub delta: Complex64,
}

impl Block2 {
    pub fn matrix(&self) -> Matrix2<Complex64> {
        Matrix2::new(self.r00, self.r01, self.r01, self.r11)
    }
}

/// `g_tilde_val` is the coupling of both sites (on the design curve),
/// `kd2` the separation to the outer site, `r_s_m` the singlet mirror
/// amplitude of the inner site and `q_s2 = s₂(s₂+1)` for the outer spin.
pub fn block2_amplitudes(g_tilde_val: f64, kd2: f64, r_s_m: Complex64, q_s2: f64) -> Result<Block2> {
    let g = g_tilde_val;
    let e = r_s_m * Complex64::from_polar(1.0, 2.0 * kd2);
    let e2 = e * e;
    let delta = -4.0 + I * g * (ONE - e) * (2.0 + I * q_s2 * g * (ONE + e));
    if !(delta.norm() > 1e-14) {
        return Err(Error::Singular(format!("block determinant vanishes at g = {g}, kd2 = {kd2}")));
    }
    let r00 = (g * g * q_s2 - 2.0 * (2.0 - I * g) * e - I * g * (2.0 - I * q_s2 * g) * e2) / delta;
    let r11 = -(I * g * (2.0 + I * q_s2 * g) - 2.0 * (2.0 + I * g) * e + q_s2 * g * g * e2) / delta;
    let r01 = 2.0 * I * q_s2.sqrt() * g * (ONE - e2) / delta;
    Ok(Block2 { r00, r11, r01, delta })
}

/// Reflection of the outer site alone, `(G/2)(S²_f2 − 3/4 − q) δ(x)`, in the
/// basis `{|s_f1 = 0⟩, |s_f1 = 1⟩}` of the `s = s₂` sector.
pub fn rbar_f2(g: f64, q_s2: f64) -> Result<Matrix2<Complex64>> {
    let delta = -4.0 + 2.0 * I * g - q_s2 * g * g;
    if !(delta.norm() > 1e-14) {
        return Err(Error::Singular(format!("determinant vanishes at g = {g}")));
    }
    let r00 = q_s2 * g * g / delta;
    let r11 = -I * g * (2.0 + I * q_s2 * g) / delta;
    let r01 = 2.0 * I * q_s2.sqrt() * g / delta;
    Ok(Matrix2::new(r00, r01, r01, r11))
}

/// `T̄ = R̄ + I` for the same barrier.
pub fn tbar_f2(g: f64, q_s2: f64) -> Result<Matrix2<Complex64>> {
    Ok(rbar_f2(g, q_s2)? + Matrix2::identity())
}

/// `(R, T)` of a matrix-valued barrier `Γ δ(x)` with `gamma = Γ/k`:
/// `R = −iγ(1 + iγ)⁻¹`, `T = 1 + R`.
pub fn barrier_operators(gamma: &CMatrix) -> Result<(CMatrix, CMatrix)> {
    let d = gamma.nrows();
    let den = identity(d) + gamma * I;
    let inv = den.try_inverse().ok_or_else(|| Error::Singular("barrier resolvent is singular".into()))?;
    let r = gamma * (-I) * inv;
    let t = &r + identity(d);
    Ok((r, t))
}

/// A two-sided scatterer: reflections from each side and transmissions in
/// each direction, all referenced at the scatterer's own ports.
#[derive(Clone, Debug)]
pub struct TwoPort {
    pub r_left: CMatrix,
    pub t_forward: CMatrix,
    pub r_right: CMatrix,
    pub t_backward: CMatrix,
}

fn resolvent(x: &CMatrix) -> Result<CMatrix> {
    let d = x.nrows();
    let m = identity(d) - x;
    let lu = m.lu();
    let inv = lu.try_inverse().ok_or(Error::Composition)?;
    if !inv.iter().all(|z| z.is_finite()) || norm(&inv) > 1e12 {
        return Err(Error::Composition);
    }
    Ok(inv)
}

impl TwoPort {
    /// Left-right symmetric scatterer such as a delta barrier.
    pub fn symmetric(r: CMatrix, t: CMatrix) -> Self {
        Self { r_left: r.clone(), t_forward: t.clone(), r_right: r, t_backward: t }
    }

    pub fn delta_barrier(gamma: &CMatrix) -> Result<Self> {
        let (r, t) = barrier_operators(gamma)?;
        Ok(Self::symmetric(r, t))
    }

    /// Combined scatterer: `self` on the left, free propagation over optical
    /// distance `kd`, then `right` (Redheffer star product).
    pub fn then(&self, kd: f64, right: &TwoPort) -> Result<TwoPort> {
        let p = Complex64::from_polar(1.0, kd);
        let p2 = p * p;
        let left_loop = resolvent(&(&right.r_left * &self.r_right * p2))?;
        let right_loop = resolvent(&(&self.r_right * &right.r_left * p2))?;
        Ok(TwoPort {
            r_left: &self.r_left + &self.t_backward * &left_loop * &right.r_left * &self.t_forward * p2,
            t_forward: &right.t_forward * &right_loop * &self.t_forward * p,
            r_right: &right.r_right + &right.t_forward * &right_loop * &self.r_right * &right.t_backward * p2,
            t_backward: &self.t_backward * &left_loop * &right.t_backward * p,
        })
    }

    /// Reflection of `self` followed, at optical distance `kd`, by a
    /// reflecting-only scatterer `r_inner` (e.g. anything backed by the mirror).
    pub fn terminate(&self, kd: f64, r_inner: &CMatrix) -> Result<CMatrix> {
        let p2 = Complex64::from_polar(1.0, 2.0 * kd);
        let loop_ = resolvent(&(r_inner * &self.r_right * p2))?;
        Ok(&self.r_left + &self.t_backward * loop_ * r_inner * &self.t_forward * p2)
    }
}

/// Sum over all multiple-reflection paths between an outer two-sided
/// scatterer `(R_outer, T_outer)` and an inner reflector `R_inner` separated
/// by optical distance `kd`:
/// `R = R_o + T_o (I − R_i R_o e^{2ikd})⁻¹ R_i T_o e^{2ikd}`.
pub fn compose_geometric(r_outer: &CMatrix, t_outer: &CMatrix, r_inner: &CMatrix, kd: f64) -> Result<CMatrix> {
    let d = r_outer.nrows();
    for m in [r_outer, t_outer, r_inner] {
        if m.nrows() != d || m.ncols() != d {
            return Err(Error::Size("composition operands must be square and of equal size".into()));
        }
    }
    TwoPort::symmetric(r_outer.clone(), t_outer.clone()).terminate(kd, r_inner)
}

/// Kraus pair `(R̂, T̂)` of a single Heisenberg barrier with no mirror, on
/// the two-qubit spin space.
pub fn open_kraus_operators(g: f64) -> Result<(CMatrix, CMatrix)> {
    let ops = build_spin_operators(2)?;
    let (ps, pt) = singlet_triplet_projectors(&ops, 0, 1)?;
    let (gs, gt) = channel_gammas(g);
    let (s, t) = (r0(gs), r0(gt));
    let r = &ps * s.r + &pt * t.r;
    let tr = &ps * s.t + &pt * t.t;
    Ok((r, tr))
}

/// `min_ξ ‖R − ξT‖_F`; zero iff the two Kraus operators are proportional.
pub fn proportionality_defect(r: &CMatrix, t: &CMatrix) -> f64 {
    let tt: Complex64 = t.iter().map(|z| z.norm_sqr()).sum::<f64>().into();
    if tt.norm() == 0.0 {
        return norm(r);
    }
    let tr: Complex64 = t.iter().zip(r.iter()).map(|(a, b)| a.conj() * b).sum();
    let xi = tr / tt;
    norm(&(r - t * xi))
}
