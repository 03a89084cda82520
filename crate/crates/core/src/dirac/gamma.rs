//! Exact gamma-matrix calculus over Gaussian rationals.
//!
//! The chiral representation is used throughout: block off-diagonal
//! matrices with Pauli blocks, entries in `{0, ±1, ±i}`, metric signature
//! `(+,-,-,-)`. All pointwise algebra here is exact; floating point enters
//! only where grid derivatives do.

use num_bigint::BigInt;
use num_complex::Complex;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

use crate::fiber::{FiberMatrix, C64};
use crate::rng::Xoshiro256;

/// Gaussian rational scalar.
pub type Gq = Complex<BigRational>;

pub fn gq_int(re: i64, im: i64) -> Gq {
    Complex::new(
        BigRational::from_integer(BigInt::from(re)),
        BigRational::from_integer(BigInt::from(im)),
    )
}

pub fn gq_zero() -> Gq {
    Complex::new(BigRational::zero(), BigRational::zero())
}

pub fn gq_one() -> Gq {
    Complex::new(BigRational::one(), BigRational::zero())
}

/// Exact 4x4 matrix, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct ExactMat {
    pub a: Vec<Gq>,
}

impl ExactMat {
    pub fn zeros() -> Self {
        ExactMat {
            a: vec![gq_zero(); 16],
        }
    }

    pub fn identity() -> Self {
        let mut m = Self::zeros();
        for i in 0..4 {
            m.a[i * 4 + i] = gq_one();
        }
        m
    }

    pub fn from_int_rows(rows: [[(i64, i64); 4]; 4]) -> Self {
        let mut m = Self::zeros();
        for (i, row) in rows.iter().enumerate() {
            for (j, &(re, im)) in row.iter().enumerate() {
                m.a[i * 4 + j] = gq_int(re, im);
            }
        }
        m
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> &Gq {
        &self.a[i * 4 + j]
    }

    pub fn add(&self, other: &Self) -> Self {
        ExactMat {
            a: self
                .a
                .iter()
                .zip(&other.a)
                .map(|(x, y)| x.clone() + y.clone())
                .collect(),
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        ExactMat {
            a: self
                .a
                .iter()
                .zip(&other.a)
                .map(|(x, y)| x.clone() - y.clone())
                .collect(),
        }
    }

    pub fn neg(&self) -> Self {
        ExactMat {
            a: self.a.iter().map(|x| -x.clone()).collect(),
        }
    }

    pub fn scale(&self, s: &Gq) -> Self {
        ExactMat {
            a: self.a.iter().map(|x| x.clone() * s.clone()).collect(),
        }
    }

    pub fn matmul(&self, other: &Self) -> Self {
        let mut out = Self::zeros();
        for i in 0..4 {
            for k in 0..4 {
                let v = self.at(i, k).clone();
                if v.is_zero() {
                    continue;
                }
                for j in 0..4 {
                    out.a[i * 4 + j] =
                        out.a[i * 4 + j].clone() + v.clone() * other.at(k, j).clone();
                }
            }
        }
        out
    }

    pub fn conj_entries(&self) -> Self {
        ExactMat {
            a: self.a.iter().map(|x| x.conj()).collect(),
        }
    }

    pub fn dagger(&self) -> Self {
        let mut out = Self::zeros();
        for i in 0..4 {
            for j in 0..4 {
                out.a[j * 4 + i] = self.at(i, j).conj();
            }
        }
        out
    }

    pub fn is_zero(&self) -> bool {
        self.a.iter().all(|v| v.is_zero())
    }

    pub fn apply(&self, v: &[Gq; 4]) -> [Gq; 4] {
        let mut out = [gq_zero(), gq_zero(), gq_zero(), gq_zero()];
        for i in 0..4 {
            let mut acc = gq_zero();
            for j in 0..4 {
                acc += self.at(i, j).clone() * v[j].clone();
            }
            out[i] = acc;
        }
        out
    }

    /// Row-vector action.
    pub fn apply_left(&self, v: &[Gq; 4]) -> [Gq; 4] {
        let mut out = [gq_zero(), gq_zero(), gq_zero(), gq_zero()];
        for j in 0..4 {
            let mut acc = gq_zero();
            for i in 0..4 {
                acc += v[i].clone() * self.at(i, j).clone();
            }
            out[j] = acc;
        }
        out
    }

    pub fn to_f64(&self) -> FiberMatrix {
        let mut m = FiberMatrix::zeros(4);
        for i in 0..4 {
            for j in 0..4 {
                let v = self.at(i, j);
                m.a[i * 4 + j] = C64::new(rat_to_f64(&v.re), rat_to_f64(&v.im));
            }
        }
        m
    }

    /// Leading principal minors, exact (for definiteness tests).
    pub fn leading_minors(&self) -> [Gq; 4] {
        let det = |n: usize| -> Gq {
            // Cofactor expansion is fine at 4x4.
            fn det_rec(m: &[Vec<Gq>]) -> Gq {
                let n = m.len();
                if n == 1 {
                    return m[0][0].clone();
                }
                let mut acc = gq_zero();
                for j in 0..n {
                    if m[0][j].is_zero() {
                        continue;
                    }
                    let minor: Vec<Vec<Gq>> = (1..n)
                        .map(|i| {
                            (0..n)
                                .filter(|&k| k != j)
                                .map(|k| m[i][k].clone())
                                .collect()
                        })
                        .collect();
                    let sign = if j % 2 == 0 { gq_one() } else { -gq_one() };
                    acc += sign * m[0][j].clone() * det_rec(&minor);
                }
                acc
            }
            let sub: Vec<Vec<Gq>> = (0..n)
                .map(|i| (0..n).map(|j| self.at(i, j).clone()).collect())
                .collect();
            det_rec(&sub)
        };
        [det(1), det(2), det(3), det(4)]
    }
}

fn rat_to_f64(r: &BigRational) -> f64 {
    // Entries of the gamma algebra are tiny integers; a direct ratio is
    // exact for them.
    let num = r.numer();
    let den = r.denom();
    let nf = num.to_string().parse::<f64>().unwrap_or(f64::NAN);
    let df = den.to_string().parse::<f64>().unwrap_or(f64::NAN);
    nf / df
}

/// Chiral gamma matrices with signature `(+,-,-,-)`.
#[derive(Clone, Debug)]
pub struct GammaRep {
    pub gammas: [ExactMat; 4],
    pub eta: [i64; 4],
}

impl GammaRep {
    pub fn chiral() -> Self {
        let z = (0, 0);
        let o = (1, 0);
        // Pauli blocks: sigma_1 = [[0,1],[1,0]], sigma_2 = [[0,-i],[i,0]],
        // sigma_3 = [[1,0],[0,-1]].
        let gamma0 = ExactMat::from_int_rows([
            [z, z, o, z],
            [z, z, z, o],
            [o, z, z, z],
            [z, o, z, z],
        ]);
        let gamma1 = ExactMat::from_int_rows([
            [z, z, z, o],
            [z, z, o, z],
            [z, (-1, 0), z, z],
            [(-1, 0), z, z, z],
        ]);
        let gamma2 = ExactMat::from_int_rows([
            [z, z, z, (0, -1)],
            [z, z, (0, 1), z],
            [z, (0, 1), z, z],
            [(0, -1), z, z, z],
        ]);
        let gamma3 = ExactMat::from_int_rows([
            [z, z, o, z],
            [z, z, z, (-1, 0)],
            [(-1, 0), z, z, z],
            [z, o, z, z],
        ]);
        GammaRep {
            gammas: [gamma0, gamma1, gamma2, gamma3],
            eta: [1, -1, -1, -1],
        }
    }

    pub fn gamma(&self, mu: usize) -> &ExactMat {
        &self.gammas[mu]
    }

    /// Index-raised matrix `gamma^mu = eta^{mu mu} gamma_mu`.
    pub fn gamma_upper(&self, mu: usize) -> ExactMat {
        if self.eta[mu] > 0 {
            self.gammas[mu].clone()
        } else {
            self.gammas[mu].neg()
        }
    }

    /// `rho(n) = n^mu gamma_mu` for an exact vector.
    pub fn rho(&self, n: &[Gq; 4]) -> ExactMat {
        let mut out = ExactMat::zeros();
        for mu in 0..4 {
            out = out.add(&self.gammas[mu].scale(&n[mu]));
        }
        out
    }
}

/// Adjunction `sigma -> sigma^dagger gamma_0` (a cospinor row).
pub fn adjunction(rep: &GammaRep, s: &[Gq; 4]) -> [Gq; 4] {
    let conj = [s[0].conj(), s[1].conj(), s[2].conj(), s[3].conj()];
    rep.gamma(0).apply_left(&conj)
}

/// Inverse adjunction: `omega -> (omega gamma_0)^dagger` as a spinor.
pub fn adjunction_inv(rep: &GammaRep, w: &[Gq; 4]) -> [Gq; 4] {
    let wg = rep.gamma(0).apply_left(w);
    [wg[0].conj(), wg[1].conj(), wg[2].conj(), wg[3].conj()]
}

/// Spinor charge conjugation `sigma -> conj(gamma_2 sigma)`.
pub fn charge_conj_spinor(rep: &GammaRep, s: &[Gq; 4]) -> [Gq; 4] {
    let g2s = rep.gamma(2).apply(s);
    [g2s[0].conj(), g2s[1].conj(), g2s[2].conj(), g2s[3].conj()]
}

/// Cospinor charge conjugation `omega -> conj(omega) gamma_2`.
pub fn charge_conj_cospinor(rep: &GammaRep, w: &[Gq; 4]) -> [Gq; 4] {
    let cw = [w[0].conj(), w[1].conj(), w[2].conj(), w[3].conj()];
    rep.gamma(2).apply_left(&cw)
}

/// One line of the exact structure report.
#[derive(Clone, Debug)]
pub struct CliffordLine {
    pub name: String,
    pub pass: bool,
}

#[derive(Clone, Debug, Default)]
pub struct CliffordReport {
    pub lines: Vec<CliffordLine>,
}

impl CliffordReport {
    pub fn all_pass(&self) -> bool {
        self.lines.iter().all(|l| l.pass)
    }

    fn push(&mut self, name: String, pass: bool) {
        self.lines.push(CliffordLine { name, pass });
    }
}

/// Exact verification of the representation: all 16 anticommutators, the
/// 4 adjoint relations, the 4 conjugation relations, the intertwining of
/// adjunction with charge conjugation, and positivity of
/// `gamma_0 rho(n)` on sampled future timelike vectors.
pub fn clifford_check(rep: &GammaRep, rng: &mut Xoshiro256, n_timelike: usize) -> CliffordReport {
    let mut report = CliffordReport::default();
    // Anticommutators.
    for mu in 0..4 {
        for nu in 0..4 {
            let anti = rep
                .gamma(mu)
                .matmul(rep.gamma(nu))
                .add(&rep.gamma(nu).matmul(rep.gamma(mu)));
            let expected = if mu == nu {
                ExactMat::identity().scale(&gq_int(2 * rep.eta[mu], 0))
            } else {
                ExactMat::zeros()
            };
            report.push(
                format!("anticommutator({mu},{nu})"),
                anti.sub(&expected).is_zero(),
            );
        }
    }
    // Adjoint relations.
    report.push(
        "adjoint(0)".into(),
        rep.gamma(0).dagger().sub(rep.gamma(0)).is_zero(),
    );
    for i in 1..4 {
        report.push(
            format!("adjoint({i})"),
            rep.gamma(i).dagger().add(rep.gamma(i)).is_zero(),
        );
    }
    // Conjugation relations: conj(gamma_mu) = -gamma_2 gamma_mu gamma_2^{-1};
    // gamma_2^{-1} = -gamma_2 exactly.
    for mu in 0..4 {
        let lhs = rep.gamma(mu).conj_entries();
        let rhs = rep
            .gamma(2)
            .matmul(rep.gamma(mu))
            .matmul(&rep.gamma(2).neg())
            .neg();
        report.push(format!("conjugation({mu})"), lhs.sub(&rhs).is_zero());
    }
    // Adjunction intertwines the charge conjugations up to a sign:
    // checked on random exact spinors.
    let mut intertwine_ok = true;
    for _ in 0..20 {
        let mut s = [gq_zero(), gq_zero(), gq_zero(), gq_zero()];
        for v in s.iter_mut() {
            *v = gq_int(
                rng.below(19) as i64 - 9,
                rng.below(19) as i64 - 9,
            );
        }
        let lhs = adjunction(rep, &charge_conj_spinor(rep, &s));
        let rhs = charge_conj_cospinor(rep, &adjunction(rep, &s));
        let ok = lhs
            .iter()
            .zip(rhs.iter())
            .all(|(l, r)| (l.clone() + r.clone()).is_zero());
        intertwine_ok &= ok;
    }
    report.push("adjunction intertwines conjugations".into(), intertwine_ok);
    // Positivity of gamma_0 rho(n) on future timelike vectors (Sylvester:
    // all leading minors positive, exactly).
    for k in 0..n_timelike {
        let mut n = [gq_zero(), gq_zero(), gq_zero(), gq_zero()];
        let mut norm_sq = BigRational::zero();
        for v in n.iter_mut().skip(1) {
            let c = BigRational::new(
                BigInt::from(rng.below(41) as i64 - 20),
                BigInt::from(7),
            );
            norm_sq += c.clone() * c.clone();
            *v = Complex::new(c, BigRational::zero());
        }
        // Ensure strict future-timelike: n0 > |n_spatial|.
        let bound = norm_sq + BigRational::one();
        n[0] = Complex::new(bound, BigRational::zero());
        let m = rep.gamma(0).matmul(&rep.rho(&n));
        let hermitian = m.dagger().sub(&m).is_zero();
        let minors = m.leading_minors();
        let positive = minors
            .iter()
            .all(|d| d.im.is_zero() && d.re.is_positive());
        report.push(format!("positivity(sample {k})"), hermitian && positive);
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chiral_rep_is_exactly_clifford() {
        let rep = GammaRep::chiral();
        let mut rng = Xoshiro256::seed_from_u64(11);
        let report = clifford_check(&rep, &mut rng, 10);
        for line in &report.lines {
            assert!(line.pass, "failed: {}", line.name);
        }
    }

    #[test]
    fn gamma0_squares_to_identity() {
        let rep = GammaRep::chiral();
        let sq = rep.gamma(0).matmul(rep.gamma(0));
        assert!(sq.sub(&ExactMat::identity()).is_zero());
    }

    #[test]
    fn adjunction_is_antilinear_bijection() {
        let rep = GammaRep::chiral();
        let s = [gq_int(1, 2), gq_int(-3, 0), gq_int(0, 5), gq_int(2, -1)];
        // A(A^{ -1}(w)) = w exactly.
        let w = adjunction(&rep, &s);
        let back = adjunction_inv(&rep, &w);
        for (a, b) in back.iter().zip(s.iter()) {
            assert_eq!(a, b);
        }
        // A(i sigma) = -i A(sigma).
        let i_s = [
            s[0].clone() * gq_int(0, 1),
            s[1].clone() * gq_int(0, 1),
            s[2].clone() * gq_int(0, 1),
            s[3].clone() * gq_int(0, 1),
        ];
        let lhs = adjunction(&rep, &i_s);
        let rhs = adjunction(&rep, &s);
        for (l, r) in lhs.iter().zip(rhs.iter()) {
            assert_eq!(l.clone(), r.clone() * gq_int(0, -1));
        }
    }
}
