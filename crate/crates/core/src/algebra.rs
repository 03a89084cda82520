//! Exact *-algebra engine for canonical (anti)commutation relations.
//!
//! Elements are finite linear combinations of normally ordered generator
//! monomials with Gaussian-rational coefficients. The relations are imposed
//! by rewriting: an out-of-order adjacent pair is swapped, producing the
//! (anti)commutator correction with the pair deleted; equal adjacent Fermi
//! generators annihilate the monomial. Gram data enters the registry once,
//! rounded to fixed-precision rationals, so every identity downstream is
//! exact.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use num_bigint::BigInt;
use num_complex::Complex;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use thiserror::Error;

use crate::rng::Xoshiro256;

pub type Coeff = Complex<BigRational>;

pub fn coeff_zero() -> Coeff {
    Complex::new(BigRational::zero(), BigRational::zero())
}

pub fn coeff_one() -> Coeff {
    Complex::new(BigRational::one(), BigRational::zero())
}

pub fn coeff_i() -> Coeff {
    Complex::new(BigRational::zero(), BigRational::one())
}

pub fn coeff_int(re: i64, im: i64) -> Coeff {
    Complex::new(
        BigRational::from_integer(BigInt::from(re)),
        BigRational::from_integer(BigInt::from(im)),
    )
}

/// Fixed-precision rationalization: round to the nearest multiple of
/// `10^-15`. This is the single audited numeric-to-exact boundary.
pub fn rationalize(v: f64) -> BigRational {
    const SCALE: i128 = 1_000_000_000_000_000;
    let scaled = (v * SCALE as f64).round();
    BigRational::new(
        BigInt::from(scaled as i128),
        BigInt::from(SCALE),
    )
}

pub fn rationalize_complex(re: f64, im: f64) -> Coeff {
    Complex::new(rationalize(re), rationalize(im))
}

#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub enum GeneratorKind {
    PhiBose,
    PhiFermi,
    PsiFermi,
}

/// Handle into the observable registry. The total order (kind, then index)
/// fixes the canonical basis of ordered monomials.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub struct GeneratorHandle {
    pub kind: GeneratorKind,
    pub index: u32,
}

impl GeneratorHandle {
    pub fn phi_bose(index: u32) -> Self {
        GeneratorHandle {
            kind: GeneratorKind::PhiBose,
            index,
        }
    }
    pub fn phi_fermi(index: u32) -> Self {
        GeneratorHandle {
            kind: GeneratorKind::PhiFermi,
            index,
        }
    }
    pub fn psi_fermi(index: u32) -> Self {
        GeneratorHandle {
            kind: GeneratorKind::PsiFermi,
            index,
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum Statistics {
    Bose,
    Fermi,
}

#[derive(Debug, Error)]
pub enum AlgebraError {
    #[error("unknown handle {0:?}")]
    UnknownHandle(GeneratorHandle),
    #[error("elements belong to different registries or statistics")]
    RegistryMismatch,
    #[error("parse error at byte {at}: {msg}")]
    Parse { at: usize, msg: String },
}

/// Observable registry: generator count and exact Gram data.
///
/// Bose registries carry the antisymmetric commutator Gram
/// `[Phi(i), Phi(j)] = i tau(i, j) 1`. Fermi registries carry the mixed
/// anticommutator Gram `{Psi(j), Phi(i)} = h(i, j) 1` together with the
/// index bijection realizing the adjunction between the two species.
#[derive(Clone, Debug)]
pub struct Registry {
    pub statistics: Statistics,
    pub n: usize,
    /// Antisymmetric rational Gram (Bose).
    pub bose_tau: Vec<BigRational>,
    /// Mixed complex Gram (Fermi), row = Phi index, column = Psi index.
    pub fermi_mixed: Vec<Coeff>,
    /// Entries snapped to exact zero during injection: (row, col, value).
    pub snap_log: Vec<(usize, usize, f64)>,
}

impl Registry {
    /// Bose registry from a numeric commutator Gram. Entries below
    /// `snap_tol` in magnitude are snapped to exact zero (recorded in the
    /// log); antisymmetry is enforced exactly by injecting the upper
    /// triangle only.
    pub fn bose_from_f64(tau: &[Vec<f64>], snap_tol: f64) -> Self {
        let n = tau.len();
        let mut g = vec![BigRational::zero(); n * n];
        let mut snap_log = Vec::new();
        for i in 0..n {
            for j in (i + 1)..n {
                let v = tau[i][j];
                if v.abs() < snap_tol {
                    if v != 0.0 {
                        snap_log.push((i, j, v));
                    }
                    continue;
                }
                let r = rationalize(v);
                g[i * n + j] = r.clone();
                g[j * n + i] = -r;
            }
        }
        Registry {
            statistics: Statistics::Bose,
            n,
            bose_tau: g,
            fermi_mixed: Vec::new(),
            snap_log,
        }
    }

    /// Fermi registry from the numeric mixed Gram `h(i, j)`.
    pub fn fermi_from_f64(mixed: &[Vec<(f64, f64)>], snap_tol: f64) -> Self {
        let n = mixed.len();
        let mut g = vec![coeff_zero(); n * n];
        let mut snap_log = Vec::new();
        for i in 0..n {
            for j in 0..n {
                let (re, im) = mixed[i][j];
                if (re * re + im * im).sqrt() < snap_tol {
                    if re != 0.0 || im != 0.0 {
                        snap_log.push((i, j, (re * re + im * im).sqrt()));
                    }
                    continue;
                }
                g[i * n + j] = rationalize_complex(re, im);
            }
        }
        Registry {
            statistics: Statistics::Fermi,
            n,
            bose_tau: Vec::new(),
            fermi_mixed: g,
            snap_log,
        }
    }

    pub fn valid_handle(&self, h: GeneratorHandle) -> bool {
        let kind_ok = match self.statistics {
            Statistics::Bose => h.kind == GeneratorKind::PhiBose,
            Statistics::Fermi => {
                h.kind == GeneratorKind::PhiFermi || h.kind == GeneratorKind::PsiFermi
            }
        };
        kind_ok && (h.index as usize) < self.n
    }

    fn tau(&self, a: GeneratorHandle, b: GeneratorHandle) -> BigRational {
        self.bose_tau[a.index as usize * self.n + b.index as usize].clone()
    }

    fn mixed(&self, phi: u32, psi: u32) -> Coeff {
        self.fermi_mixed[phi as usize * self.n + psi as usize].clone()
    }
}

/// A finite linear combination of normally ordered monomials.
#[derive(Clone, Debug, PartialEq)]
pub struct AlgebraElement {
    pub statistics: Statistics,
    pub terms: BTreeMap<Vec<GeneratorHandle>, Coeff>,
}

impl AlgebraElement {
    pub fn zero(statistics: Statistics) -> Self {
        AlgebraElement {
            statistics,
            terms: BTreeMap::new(),
        }
    }

    pub fn unit(statistics: Statistics) -> Self {
        let mut terms = BTreeMap::new();
        terms.insert(Vec::new(), coeff_one());
        AlgebraElement { statistics, terms }
    }

    pub fn scalar(statistics: Statistics, c: Coeff) -> Self {
        let mut e = Self::zero(statistics);
        if !c.is_zero() {
            e.terms.insert(Vec::new(), c);
        }
        e
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn degree(&self) -> usize {
        self.terms.keys().map(|m| m.len()).max().unwrap_or(0)
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!(self.statistics, other.statistics);
        let mut out = self.clone();
        for (m, c) in &other.terms {
            add_term(&mut out.terms, m.clone(), c.clone());
        }
        out
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.scale(&-coeff_one()))
    }

    pub fn scale(&self, c: &Coeff) -> Self {
        if c.is_zero() {
            return Self::zero(self.statistics);
        }
        AlgebraElement {
            statistics: self.statistics,
            terms: self
                .terms
                .iter()
                .map(|(m, v)| (m.clone(), v.clone() * c.clone()))
                .collect(),
        }
    }
}

fn add_term(map: &mut BTreeMap<Vec<GeneratorHandle>, Coeff>, mono: Vec<GeneratorHandle>, c: Coeff) {
    if c.is_zero() {
        return;
    }
    let entry = map.entry(mono.clone()).or_insert_with(coeff_zero);
    *entry += c;
    if entry.is_zero() {
        map.remove(&mono);
    }
}

pub fn unit(reg: &Registry) -> AlgebraElement {
    AlgebraElement::unit(reg.statistics)
}

pub fn inject(reg: &Registry, h: GeneratorHandle) -> Result<AlgebraElement, AlgebraError> {
    if !reg.valid_handle(h) {
        return Err(AlgebraError::UnknownHandle(h));
    }
    let mut e = AlgebraElement::zero(reg.statistics);
    e.terms.insert(vec![h], coeff_one());
    Ok(e)
}

/// Positions in a monomial where a rewrite applies: an out-of-order
/// adjacent pair, or (Fermi) an equal adjacent pair.
fn reducible_positions(stat: Statistics, m: &[GeneratorHandle]) -> Vec<usize> {
    let mut out = Vec::new();
    for i in 0..m.len().saturating_sub(1) {
        if m[i] > m[i + 1] || (stat == Statistics::Fermi && m[i] == m[i + 1]) {
            out.push(i);
        }
    }
    out
}

/// Rewrite one monomial into the normal-form accumulator. `pick` selects
/// which admissible position to reduce (deterministic leftmost in
/// production; randomized in the confluence checks).
fn reduce_monomial<F>(
    reg: &Registry,
    acc: &mut BTreeMap<Vec<GeneratorHandle>, Coeff>,
    mono: Vec<GeneratorHandle>,
    coeff: Coeff,
    pick: &mut F,
) where
    F: FnMut(usize) -> usize,
{
    let mut stack = vec![(mono, coeff)];
    while let Some((m, c)) = stack.pop() {
        if c.is_zero() {
            continue;
        }
        let pos = reducible_positions(reg.statistics, &m);
        if pos.is_empty() {
            add_term(acc, m, c);
            continue;
        }
        let i = pos[pick(pos.len()) % pos.len()];
        let a = m[i];
        let b = m[i + 1];
        if reg.statistics == Statistics::Fermi && a == b {
            // Equal Fermi generators square to zero.
            continue;
        }
        let mut swapped = m.clone();
        swapped.swap(i, i + 1);
        let mut removed = m.clone();
        removed.drain(i..i + 2);
        match reg.statistics {
            Statistics::Bose => {
                let tau = reg.tau(a, b);
                stack.push((swapped, c.clone()));
                if !tau.is_zero() {
                    let corr = c * coeff_i() * Complex::new(tau, BigRational::zero());
                    stack.push((removed, corr));
                }
            }
            Statistics::Fermi => {
                stack.push((swapped, -c.clone()));
                // Only a Psi passing a Phi picks up the mixed Gram term.
                if a.kind == GeneratorKind::PsiFermi && b.kind == GeneratorKind::PhiFermi {
                    let h = reg.mixed(b.index, a.index);
                    if !h.is_zero() {
                        stack.push((removed, c * h));
                    }
                }
            }
        }
    }
}

/// Bring an element to normal order (idempotent on normal elements).
pub fn normal_form(reg: &Registry, e: &AlgebraElement) -> AlgebraElement {
    let mut acc = BTreeMap::new();
    let mut leftmost = |_n: usize| 0usize;
    for (m, c) in &e.terms {
        reduce_monomial(reg, &mut acc, m.clone(), c.clone(), &mut leftmost);
    }
    AlgebraElement {
        statistics: reg.statistics,
        terms: acc,
    }
}

/// Normal form with a randomized reduction order (for confluence checks).
pub fn normal_form_randomized(
    reg: &Registry,
    e: &AlgebraElement,
    rng: &mut Xoshiro256,
) -> AlgebraElement {
    let mut acc = BTreeMap::new();
    let mut random = |n: usize| rng.below(n.max(1));
    for (m, c) in &e.terms {
        reduce_monomial(reg, &mut acc, m.clone(), c.clone(), &mut random);
    }
    AlgebraElement {
        statistics: reg.statistics,
        terms: acc,
    }
}

pub fn multiply(
    reg: &Registry,
    x: &AlgebraElement,
    y: &AlgebraElement,
) -> Result<AlgebraElement, AlgebraError> {
    if x.statistics != reg.statistics || y.statistics != reg.statistics {
        return Err(AlgebraError::RegistryMismatch);
    }
    let mut acc = BTreeMap::new();
    let mut leftmost = |_n: usize| 0usize;
    for (ma, ca) in &x.terms {
        for (mb, cb) in &y.terms {
            let mut mono = ma.clone();
            mono.extend_from_slice(mb);
            reduce_monomial(reg, &mut acc, mono, ca.clone() * cb.clone(), &mut leftmost);
        }
    }
    Ok(AlgebraElement {
        statistics: reg.statistics,
        terms: acc,
    })
}

/// Involution: reverse monomials, conjugate coefficients, map Fermi
/// handles through the adjunction bijection, then normal-form.
pub fn involution(reg: &Registry, x: &AlgebraElement) -> AlgebraElement {
    let mut pre = AlgebraElement::zero(reg.statistics);
    for (m, c) in &x.terms {
        let mut rev: Vec<GeneratorHandle> = m.iter().rev().copied().collect();
        for h in rev.iter_mut() {
            *h = match h.kind {
                GeneratorKind::PhiBose => *h,
                GeneratorKind::PhiFermi => GeneratorHandle::psi_fermi(h.index),
                GeneratorKind::PsiFermi => GeneratorHandle::phi_fermi(h.index),
            };
        }
        add_term(&mut pre.terms, rev, c.conj());
    }
    normal_form(reg, &pre)
}

pub fn equal(x: &AlgebraElement, y: &AlgebraElement) -> bool {
    x.statistics == y.statistics && x.terms == y.terms
}

pub fn commutator(
    reg: &Registry,
    x: &AlgebraElement,
    y: &AlgebraElement,
) -> Result<AlgebraElement, AlgebraError> {
    Ok(multiply(reg, x, y)?.sub(&multiply(reg, y, x)?))
}

pub fn anticommutator(
    reg: &Registry,
    x: &AlgebraElement,
    y: &AlgebraElement,
) -> Result<AlgebraElement, AlgebraError> {
    Ok(multiply(reg, x, y)?.add(&multiply(reg, y, x)?))
}

// ---------------------------------------------------------------------------
// Mechanical verification reports
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, Default)]
pub struct CheckReport {
    pub lines: Vec<(String, bool)>,
}

impl CheckReport {
    pub fn all_pass(&self) -> bool {
        self.lines.iter().all(|(_, p)| *p)
    }
    pub fn push(&mut self, name: impl Into<String>, pass: bool) {
        self.lines.push((name.into(), pass));
    }
}

/// Quantum causality: for handle pairs whose Gram entries are exact zeros
/// (causally disjoint after snapping), Bose commutators and Fermi mixed
/// anticommutators normal-form to exactly zero, and even products built
/// from two generators commute with a disjoint third.
pub fn verify_quantum_causality(
    reg: &Registry,
    disjoint_pairs: &[(GeneratorHandle, GeneratorHandle)],
    even_triples: &[(GeneratorHandle, GeneratorHandle, GeneratorHandle)],
) -> Result<CheckReport, AlgebraError> {
    let mut report = CheckReport::default();
    for (k, &(a, b)) in disjoint_pairs.iter().enumerate() {
        let ea = inject(reg, a)?;
        let eb = inject(reg, b)?;
        let ok = match reg.statistics {
            Statistics::Bose => commutator(reg, &ea, &eb)?.is_zero(),
            Statistics::Fermi => anticommutator(reg, &ea, &eb)?.is_zero(),
        };
        report.push(format!("disjoint pair {k}"), ok);
    }
    for (k, &(g1, g2, g3)) in even_triples.iter().enumerate() {
        let e1 = inject(reg, g1)?;
        let e2 = inject(reg, g2)?;
        let e3 = inject(reg, g3)?;
        let even = multiply(reg, &e1, &e2)?;
        let ok = commutator(reg, &even, &e3)?.is_zero();
        report.push(format!("even element vs disjoint generator {k}"), ok);
    }
    Ok(report)
}

/// Gram preservation between two registries over the same handle set:
/// the max relative deviation of corresponding entries.
pub fn gram_distance(a: &Registry, b: &Registry) -> f64 {
    assert_eq!(a.statistics, b.statistics);
    assert_eq!(a.n, b.n);
    let to_f64 = |r: &BigRational| -> f64 {
        let num = r.numer().to_string().parse::<f64>().unwrap_or(0.0);
        let den = r.denom().to_string().parse::<f64>().unwrap_or(1.0);
        num / den
    };
    let mut worst = 0.0f64;
    let mut scale = 0.0f64;
    match a.statistics {
        Statistics::Bose => {
            for (x, y) in a.bose_tau.iter().zip(&b.bose_tau) {
                let xv = to_f64(x);
                let yv = to_f64(y);
                worst = worst.max((xv - yv).abs());
                scale = scale.max(xv.abs()).max(yv.abs());
            }
        }
        Statistics::Fermi => {
            for (x, y) in a.fermi_mixed.iter().zip(&b.fermi_mixed) {
                let dv = ((to_f64(&x.re) - to_f64(&y.re)).powi(2)
                    + (to_f64(&x.im) - to_f64(&y.im)).powi(2))
                .sqrt();
                worst = worst.max(dv);
                scale = scale
                    .max((to_f64(&x.re).powi(2) + to_f64(&x.im).powi(2)).sqrt())
                    .max((to_f64(&y.re).powi(2) + to_f64(&y.im).powi(2)).sqrt());
            }
        }
    }
    if scale == 0.0 {
        worst
    } else {
        worst / scale
    }
}

// ---------------------------------------------------------------------------
// Printing and parsing
// ---------------------------------------------------------------------------

fn rational_to_string(r: &BigRational) -> String {
    if r.denom().is_one() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

pub fn coeff_to_string(c: &Coeff) -> String {
    let re_zero = c.re.is_zero();
    let im_zero = c.im.is_zero();
    if re_zero && im_zero {
        return "0".into();
    }
    let mut s = String::new();
    if !re_zero {
        s.push_str(&rational_to_string(&c.re));
    }
    if !im_zero {
        if !re_zero && !c.im.is_negative() {
            s.push('+');
        }
        if c.im.is_negative() {
            s.push('-');
        }
        let mag = c.im.abs();
        if !mag.is_one() {
            s.push_str(&rational_to_string(&mag));
        }
        s.push('i');
    }
    s
}

fn handle_to_string(h: &GeneratorHandle) -> String {
    match h.kind {
        GeneratorKind::PhiBose | GeneratorKind::PhiFermi => format!("Phi({})", h.index),
        GeneratorKind::PsiFermi => format!("Psi({})", h.index),
    }
}

/// Canonical printing: sorted monomials, exact coefficients.
pub fn element_to_string(e: &AlgebraElement) -> String {
    if e.terms.is_empty() {
        return "0".into();
    }
    let mut out = String::new();
    for (k, (m, c)) in e.terms.iter().enumerate() {
        if k > 0 {
            out.push_str(" + ");
        }
        let _ = write!(out, "({})", coeff_to_string(c));
        for h in m {
            let _ = write!(out, "*{}", handle_to_string(h));
        }
    }
    out
}

struct Parser<'a> {
    reg: &'a Registry,
    src: &'a [u8],
    pos: usize,
}

impl<'a> Parser<'a> {
    fn err<T>(&self, msg: impl Into<String>) -> Result<T, AlgebraError> {
        Err(AlgebraError::Parse {
            at: self.pos,
            msg: msg.into(),
        })
    }

    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && (self.src[self.pos] as char).is_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<char> {
        self.skip_ws();
        if self.pos < self.src.len() {
            // The dagger is the only multi-byte token in the grammar.
            let rest = &self.src[self.pos..];
            let s = std::str::from_utf8(rest).ok()?;
            s.chars().next()
        } else {
            None
        }
    }

    fn bump(&mut self, c: char) {
        self.pos += c.len_utf8();
    }

    fn expect(&mut self, c: char) -> Result<(), AlgebraError> {
        if self.peek() == Some(c) {
            self.bump(c);
            Ok(())
        } else {
            self.err(format!("expected '{c}'"))
        }
    }

    fn parse_uint(&mut self) -> Result<u64, AlgebraError> {
        self.skip_ws();
        let start = self.pos;
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if self.pos == start {
            return self.err("expected an unsigned integer");
        }
        std::str::from_utf8(&self.src[start..self.pos])
            .unwrap()
            .parse::<u64>()
            .map_err(|e| AlgebraError::Parse {
                at: start,
                msg: e.to_string(),
            })
    }

    /// Decimal rational literal, optionally suffixed with `i`.
    fn parse_number(&mut self) -> Result<Coeff, AlgebraError> {
        self.skip_ws();
        let start = self.pos;
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        let int_end = self.pos;
        let mut denom = BigInt::from(1);
        let mut digits = String::from_utf8(self.src[start..int_end].to_vec()).unwrap();
        if self.pos < self.src.len() && self.src[self.pos] == b'.' {
            self.pos += 1;
            let frac_start = self.pos;
            while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
                self.pos += 1;
            }
            if self.pos == frac_start {
                return self.err("expected digits after the decimal point");
            }
            for _ in frac_start..self.pos {
                denom *= 10;
            }
            digits.push_str(std::str::from_utf8(&self.src[frac_start..self.pos]).unwrap());
        }
        if digits.is_empty() {
            return self.err("expected a number");
        }
        let numer: BigInt = digits.parse().map_err(|_| AlgebraError::Parse {
            at: start,
            msg: "bad number".into(),
        })?;
        let r = BigRational::new(numer, denom);
        if self.pos < self.src.len() && self.src[self.pos] == b'i' {
            self.pos += 1;
            Ok(Complex::new(BigRational::zero(), r))
        } else {
            Ok(Complex::new(r, BigRational::zero()))
        }
    }

    fn parse_factor(&mut self) -> Result<AlgebraElement, AlgebraError> {
        let mut base = match self.peek() {
            Some('(') => {
                self.bump('(');
                let e = self.parse_expr()?;
                self.expect(')')?;
                e
            }
            Some('i') => {
                self.bump('i');
                AlgebraElement::scalar(self.reg.statistics, coeff_i())
            }
            Some(c) if c.is_ascii_digit() => {
                let v = self.parse_number()?;
                AlgebraElement::scalar(self.reg.statistics, v)
            }
            Some('P') => {
                let rest = &self.src[self.pos..];
                let (kind, klen) = if rest.starts_with(b"Phi") {
                    let k = match self.reg.statistics {
                        Statistics::Bose => GeneratorKind::PhiBose,
                        Statistics::Fermi => GeneratorKind::PhiFermi,
                    };
                    (k, 3)
                } else if rest.starts_with(b"Psi") {
                    (GeneratorKind::PsiFermi, 3)
                } else {
                    return self.err("expected Phi or Psi");
                };
                self.pos += klen;
                self.expect('(')?;
                let idx = self.parse_uint()?;
                self.expect(')')?;
                let h = GeneratorHandle {
                    kind,
                    index: idx as u32,
                };
                inject(self.reg, h)?
            }
            _ => return self.err("expected a factor"),
        };
        loop {
            match self.peek() {
                Some('^') => {
                    self.bump('^');
                    let p = self.parse_uint()?;
                    let mut acc = AlgebraElement::unit(self.reg.statistics);
                    for _ in 0..p {
                        acc = multiply(self.reg, &acc, &base)?;
                    }
                    base = acc;
                }
                Some('\u{2020}') => {
                    self.bump('\u{2020}');
                    base = involution(self.reg, &base);
                }
                _ => break,
            }
        }
        Ok(base)
    }

    fn parse_term(&mut self) -> Result<AlgebraElement, AlgebraError> {
        let mut acc = self.parse_factor()?;
        while self.peek() == Some('*') {
            self.bump('*');
            let f = self.parse_factor()?;
            acc = multiply(self.reg, &acc, &f)?;
        }
        Ok(acc)
    }

    fn parse_expr(&mut self) -> Result<AlgebraElement, AlgebraError> {
        let mut neg_first = false;
        if self.peek() == Some('-') {
            self.bump('-');
            neg_first = true;
        } else if self.peek() == Some('+') {
            self.bump('+');
        }
        let mut acc = self.parse_term()?;
        if neg_first {
            acc = acc.scale(&-coeff_one());
        }
        loop {
            match self.peek() {
                Some('+') => {
                    self.bump('+');
                    let t = self.parse_term()?;
                    acc = acc.add(&t);
                }
                Some('-') => {
                    self.bump('-');
                    let t = self.parse_term()?;
                    acc = acc.sub(&t);
                }
                _ => break,
            }
        }
        Ok(acc)
    }
}

/// Parse an expression in the grammar
/// `expr := term (('+'|'-') term)*; term := factor ('*' factor)*;
/// factor := coeff | gen | '(' expr ')' | factor '^' uint | factor '†';
/// gen := ('Phi'|'Psi') '(' uint ')'` into a normal-formed element.
pub fn parse_expression(reg: &Registry, input: &str) -> Result<AlgebraElement, AlgebraError> {
    let mut p = Parser {
        reg,
        src: input.as_bytes(),
        pos: 0,
    };
    let e = p.parse_expr()?;
    p.skip_ws();
    if p.pos != p.src.len() {
        return p.err("trailing input");
    }
    Ok(normal_form(reg, &e))
}

/// Random element of bounded degree (for exactness property checks).
pub fn random_element(
    reg: &Registry,
    rng: &mut Xoshiro256,
    max_degree: usize,
    n_terms: usize,
) -> AlgebraElement {
    let mut e = AlgebraElement::zero(reg.statistics);
    for _ in 0..n_terms {
        let deg = rng.below(max_degree + 1);
        let mut mono = Vec::with_capacity(deg);
        for _ in 0..deg {
            let idx = rng.below(reg.n) as u32;
            let h = match reg.statistics {
                Statistics::Bose => GeneratorHandle::phi_bose(idx),
                Statistics::Fermi => {
                    if rng.below(2) == 0 {
                        GeneratorHandle::phi_fermi(idx)
                    } else {
                        GeneratorHandle::psi_fermi(idx)
                    }
                }
            };
            mono.push(h);
        }
        let c = coeff_int(rng.below(9) as i64 - 4, rng.below(9) as i64 - 4);
        add_term(&mut e.terms, mono, c);
    }
    normal_form(reg, &e)
}
