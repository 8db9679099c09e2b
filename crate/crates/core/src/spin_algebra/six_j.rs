use std::sync::OnceLock;

use super::HalfInteger;
use crate::error::{Error, Result};

const MAX_FACTORIAL: usize = 170;

fn factorial(n: i32) -> f64 {
    static TABLE: OnceLock<Vec<f64>> = OnceLock::new();
    let table = TABLE.get_or_init(|| {
        let mut t = vec![1.0f64; MAX_FACTORIAL + 1];
        for k in 1..=MAX_FACTORIAL {
            t[k] = t[k - 1] * k as f64;
        }
        t
    });
    assert!(n >= 0 && (n as usize) <= MAX_FACTORIAL, "factorial argument {n} out of range");
    table[n as usize]
}

/// Triangle condition on twice-valued spins, including integer perimeter.
fn triangle(a: i32, b: i32, c: i32) -> bool {
    a >= 0 && b >= 0 && c >= 0 && c <= a + b && c >= (a - b).abs() && (a + b + c) % 2 == 0
}

/// `Δ(abc)` for twice-valued arguments that satisfy the triangle condition.
fn delta(a: i32, b: i32, c: i32) -> f64 {
    (factorial((a + b - c) / 2) * factorial((a - b + c) / 2) * factorial((-a + b + c) / 2)
        / factorial((a + b + c) / 2 + 1))
        .sqrt()
}

/// Wigner 6j symbol `{j1 j2 j3; j4 j5 j6}` by the Racah sum.
///
/// Returns 0 when any of the four triads violates the triangle rule.
pub fn six_j_half(j: [HalfInteger; 6]) -> f64 {
    let [a, b, c, d, e, f] = j.map(HalfInteger::twice);
    if !(triangle(a, b, c) && triangle(a, e, f) && triangle(d, b, f) && triangle(d, e, c)) {
        return 0.0;
    }
    let alpha = [(a + b + c) / 2, (a + e + f) / 2, (d + b + f) / 2, (d + e + c) / 2];
    let beta = [(a + b + d + e) / 2, (b + c + e + f) / 2, (c + a + f + d) / 2];
    let t_min = *alpha.iter().max().unwrap();
    let t_max = *beta.iter().min().unwrap();
    let mut sum = 0.0;
    for t in t_min..=t_max {
        let mut den = 1.0;
        for &x in &alpha {
            den *= factorial(t - x);
        }
        for &y in &beta {
            den *= factorial(y - t);
        }
        let sign = if t % 2 == 0 { 1.0 } else { -1.0 };
        sum += sign * factorial(t + 1) / den;
    }
    delta(a, b, c) * delta(a, e, f) * delta(d, b, f) * delta(d, e, c) * sum
}

/// Wigner 6j symbol from floating-point arguments; every argument must be a
/// non-negative half-integer.
pub fn six_j(j1: f64, j2: f64, j3: f64, j4: f64, j5: f64, j6: f64) -> Result<f64> {
    let args = [j1, j2, j3, j4, j5, j6];
    let mut h = [HalfInteger::ZERO; 6];
    for (slot, &v) in h.iter_mut().zip(&args) {
        *slot = HalfInteger::new(v)?;
        if slot.twice() < 0 {
            return Err(Error::Domain(format!("6j argument {v} is negative")));
        }
    }
    Ok(six_j_half(h))
}

/// Overlap `⟨s_f2|s_f1⟩` between the two ways of coupling the flying qubit,
/// a static qubit and a static spin `s2` to total spin `s = s2`.
///
/// `s_f1` is the flying qubit coupled to the spin-1/2 static qubit, `s_f2`
/// the flying qubit coupled to the spin-`s2` particle. The common sign
/// prefactor is `(−1)^(⌊s2⌋+1)`; any common sign leaves the recoupled
/// operators unchanged.
pub fn basis_overlap(s_f2: f64, s_f1: f64, s2: f64) -> Result<f64> {
    let s2h = HalfInteger::new(s2)?;
    let sf1 = HalfInteger::new(s_f1)?;
    let sf2 = HalfInteger::new(s_f2)?;
    if s2h.twice() < 1 {
        return Err(Error::Domain(format!("s2 = {s2} must be at least 1/2")));
    }
    if sf1.twice() != 0 && sf1.twice() != 2 {
        return Err(Error::Domain(format!("s_f1 = {s_f1} must be 0 or 1")));
    }
    if (sf2.twice() - s2h.twice()).abs() != 1 {
        return Err(Error::Domain(format!("s_f2 = {s_f2} must be s2 ± 1/2")));
    }
    let floor = s2h.twice().div_euclid(2);
    let sign = if (floor + 1) % 2 == 0 { 1.0 } else { -1.0 };
    let norm = ((2.0 * s_f1 + 1.0) * (2.0 * s_f2 + 1.0)).sqrt();
    Ok(sign * norm * six_j_half([s2h, HalfInteger::HALF, sf2, HalfInteger::HALF, s2h, sf1]))
}

#[cfg(test)]
mod tests {
    use std::collections::HashMap;

    use nalgebra::{DMatrix, DVector};

    use super::*;

    fn h(twice: i32) -> HalfInteger {
        HalfInteger::from_twice(twice)
    }

    /// Clebsch-Gordan coefficients built from highest-weight vectors and the
    /// lowering operator, Condon-Shortley phases. Returns, for each `(2J, 2M)`,
    /// the coupled vector in the `(2a+1)(2b+1)` product space (a-index major,
    /// local states ordered by decreasing m).
    fn coupled_states(a: i32, b: i32) -> HashMap<(i32, i32), DVector<f64>> {
        let (da, db) = ((a + 1) as usize, (b + 1) as usize);
        let m_of = |twice_j: i32, idx: usize| twice_j - 2 * idx as i32;
        let lower_local = |twice_j: i32| {
            let d = (twice_j + 1) as usize;
            let j = f64::from(twice_j) / 2.0;
            let mut l = DMatrix::<f64>::zeros(d, d);
            for idx in 0..d - 1 {
                let m = f64::from(m_of(twice_j, idx)) / 2.0;
                l[(idx + 1, idx)] = (j * (j + 1.0) - m * (m - 1.0)).sqrt();
            }
            l
        };
        let lower = lower_local(a).kronecker(&DMatrix::identity(db, db))
            + DMatrix::identity(da, da).kronecker(&lower_local(b));
        let total_m = |idx: usize| m_of(a, idx / db) + m_of(b, idx % db);
        let mut out: HashMap<(i32, i32), DVector<f64>> = HashMap::new();
        let mut big_j = a + b;
        while big_j >= (a - b).abs() {
            // highest weight: in the M = J sector, orthogonal to all larger J
            let mut best: Option<DVector<f64>> = None;
            for idx in (0..da * db).filter(|&i| total_m(i) == big_j) {
                let mut v = DVector::<f64>::zeros(da * db);
                v[idx] = 1.0;
                for ((_, twice_m), w) in out.iter() {
                    if *twice_m == big_j {
                        let c = w.dot(&v);
                        v -= w * c;
                    }
                }
                if best.as_ref().is_none_or(|b| v.norm() > b.norm()) {
                    best = Some(v);
                }
            }
            let mut v = best.unwrap();
            v /= v.norm();
            // Condon-Shortley: ⟨a, m_a = a; b, J − a | J J⟩ > 0
            let ref_idx = (0..da * db).find(|&i| i / db == 0 && total_m(i) == big_j).unwrap();
            if v[ref_idx] < 0.0 {
                v = -v;
            }
            let mut m = big_j;
            out.insert((big_j, m), v.clone());
            while m > -big_j {
                v = &lower * &v;
                v /= v.norm();
                m -= 2;
                out.insert((big_j, m), v.clone());
            }
            big_j -= 2;
        }
        out
    }

    /// Expands a coupled state of an abstract multiplet (given as a vector in
    /// its own `2J+1` basis, via `inner`) with a third spin.
    fn couple_with(
        inner: &HashMap<(i32, i32), DVector<f64>>,
        inner_j: i32,
        outer: i32,
        cg: &HashMap<(i32, i32), DVector<f64>>,
        total: (i32, i32),
        inner_first: bool,
    ) -> DVector<f64> {
        let d_outer = (outer + 1) as usize;
        let d_inner_space = inner.values().next().unwrap().len();
        let mut out = DVector::<f64>::zeros(d_inner_space * d_outer);
        let coeffs = &cg[&total];
        let d_in = (inner_j + 1) as usize;
        for p in 0..d_in {
            for q in 0..d_outer {
                let c = if inner_first { coeffs[p * d_outer + q] } else { coeffs[q * d_in + p] };
                if c == 0.0 {
                    continue;
                }
                let mi = inner_j - 2 * p as i32;
                let v = &inner[&(inner_j, mi)];
                let mut e = DVector::<f64>::zeros(d_outer);
                e[q] = 1.0;
                let piece = if inner_first { v.kronecker(&e) } else { e.kronecker(v) };
                out += piece * c;
            }
        }
        out
    }

    /// Recoupling overlap by explicit construction, used as the 6j oracle.
    fn recoupling_oracle(j1: i32, j2: i32, j3: i32, j12: i32, j23: i32, big_j: i32) -> f64 {
        let s12 = coupled_states(j1, j2);
        let s23 = coupled_states(j2, j3);
        let c12_3 = coupled_states(j12, j3);
        let c1_23 = coupled_states(j1, j23);
        let d1 = (j1 + 1) as usize;
        // embed the j2⊗j3 vectors behind j1 when building |j1,(j2 j3)⟩
        let left = couple_with(&filter(&s12, j12), j12, j3, &c12_3, (big_j, big_j), true);
        let mut right = DVector::<f64>::zeros(left.len());
        let coeffs = &c1_23[&(big_j, big_j)];
        let d23 = (j23 + 1) as usize;
        for p in 0..d1 {
            for q in 0..d23 {
                let c = coeffs[p * d23 + q];
                if c == 0.0 {
                    continue;
                }
                let m23 = j23 - 2 * q as i32;
                let mut e = DVector::<f64>::zeros(d1);
                e[p] = 1.0;
                right += e.kronecker(&s23[&(j23, m23)]) * c;
            }
        }
        left.dot(&right)
    }

    fn filter(states: &HashMap<(i32, i32), DVector<f64>>, j: i32) -> HashMap<(i32, i32), DVector<f64>> {
        states.iter().filter(|((jj, _), _)| *jj == j).map(|(k, v)| (*k, v.clone())).collect()
    }

    #[test]
    fn triangle_violations_vanish() {
        assert_eq!(six_j(1.0, 1.0, 3.0, 1.0, 1.0, 1.0).unwrap(), 0.0);
        assert_eq!(six_j(0.5, 0.5, 0.5, 0.5, 0.5, 0.5).unwrap(), 0.0);
        assert!(six_j(0.3, 1.0, 1.0, 1.0, 1.0, 1.0).is_err());
        assert!(six_j(-1.0, 1.0, 1.0, 1.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn known_values() {
        // {1/2 1/2 1; 1/2 1/2 0} = 1/2 and {1 1 1; 1 1 1} = 1/6
        assert!((six_j(0.5, 0.5, 1.0, 0.5, 0.5, 0.0).unwrap() - 0.5).abs() < 1e-15);
        assert!((six_j(1.0, 1.0, 1.0, 1.0, 1.0, 1.0).unwrap() - 1.0 / 6.0).abs() < 1e-15);
    }

    #[test]
    fn agrees_with_recoupling_oracle_up_to_three() {
        let mut checked = 0;
        for j1 in 0..=6 {
            for j2 in 0..=6 {
                for j3 in 0..=6 {
                    for j12 in 0..=6 {
                        for j23 in 0..=6 {
                            for big_j in 0..=6 {
                                let args = [h(j1), h(j2), h(j12), h(j3), h(big_j), h(j23)];
                                let value = six_j_half(args);
                                let allowed = triangle(j1, j2, j12)
                                    && triangle(j2, j3, j23)
                                    && triangle(j12, j3, big_j)
                                    && triangle(j1, j23, big_j);
                                if !allowed {
                                    assert_eq!(value, 0.0);
                                    continue;
                                }
                                let overlap = recoupling_oracle(j1, j2, j3, j12, j23, big_j);
                                let phase = if ((j1 + j2 + j3 + big_j) / 2) % 2 == 0 { 1.0 } else { -1.0 };
                                let norm = f64::from((j12 + 1) * (j23 + 1)).sqrt();
                                let expected = overlap / (phase * norm);
                                assert!(
                                    (value - expected).abs() < 1e-10,
                                    "6j({j1} {j2} {j12}; {j3} {big_j} {j23})/2: racah {value} oracle {expected}"
                                );
                                checked += 1;
                            }
                        }
                    }
                }
            }
        }
        assert!(checked > 1000);
    }

    #[test]
    fn orthogonality_sums() {
        // Σ_x (2x+1){a b x; c d p}{a b x; c d q} = δ_pq/(2p+1)
        for a in 0..=5 {
            for b in 0..=5 {
                for c in 0..=5 {
                    for d in 0..=5 {
                        for p in 0..=8 {
                            for q in 0..=8 {
                                if !(triangle(a, d, p) && triangle(c, b, p) && triangle(a, d, q) && triangle(c, b, q)) {
                                    continue;
                                }
                                let sum: f64 = (0..=12)
                                    .map(|x| {
                                        f64::from(x + 1)
                                            * six_j_half([h(a), h(b), h(x), h(c), h(d), h(p)])
                                            * six_j_half([h(a), h(b), h(x), h(c), h(d), h(q)])
                                    })
                                    .sum();
                                let expected = if p == q { 1.0 / f64::from(p + 1) } else { 0.0 };
                                assert!((sum - expected).abs() < 1e-12, "a={a} b={b} c={c} d={d} p={p} q={q}: {sum}");
                            }
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn symmetric_under_column_permutation() {
        let v = six_j(1.5, 1.0, 0.5, 1.0, 1.5, 2.0).unwrap();
        assert!((six_j(1.0, 1.5, 0.5, 1.5, 1.0, 2.0).unwrap() - v).abs() < 1e-15);
        assert!((six_j(0.5, 1.0, 1.5, 2.0, 1.5, 1.0).unwrap() - v).abs() < 1e-15);
        // swap upper and lower in two columns
        assert!((six_j(1.0, 1.5, 0.5, 1.5, 1.0, 2.0).unwrap() - six_j(1.5, 1.0, 0.5, 1.0, 1.5, 2.0).unwrap()).abs() < 1e-15);
    }

    #[test]
    fn overlap_matrix_is_orthogonal() {
        for twice in 1..=8 {
            let s2 = f64::from(twice) / 2.0;
            let o = |sf2: f64, sf1: f64| basis_overlap(sf2, sf1, s2).unwrap();
            let (lo, hi) = (s2 - 0.5, s2 + 0.5);
            if lo < 0.0 {
                continue;
            }
            for sf1 in [0.0, 1.0] {
                assert!((o(lo, sf1).powi(2) + o(hi, sf1).powi(2) - 1.0).abs() < 1e-13);
            }
            assert!((o(lo, 0.0) * o(lo, 1.0) + o(hi, 0.0) * o(hi, 1.0)).abs() < 1e-13);
            assert!((o(lo, 0.0) * o(hi, 0.0) + o(lo, 1.0) * o(hi, 1.0)).abs() < 1e-13);
        }
    }

    #[test]
    fn overlap_for_spin_half_static() {
        let squares: Vec<f64> = [0.0, 1.0].iter().map(|&sf2| basis_overlap(sf2, 0.0, 0.5).unwrap().powi(2)).collect();
        assert!((squares[0] - 0.25).abs() < 1e-14);
        assert!((squares[1] - 0.75).abs() < 1e-14);
    }

    #[test]
    fn overlap_rejects_invalid_numbers() {
        assert!(basis_overlap(1.0, 0.5, 0.5).is_err());
        assert!(basis_overlap(2.0, 0.0, 0.5).is_err());
        assert!(basis_overlap(0.5, 0.0, 0.0).is_err());
    }
}
