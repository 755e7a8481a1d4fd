//! Exact fixed-point arithmetic on the circle `[0, 1)`.
//!
//! A [`CirclePoint`] stores `floor(x * 2^bits)` for some `x` in `[0, 1)` as a
//! little-endian vector of 64-bit limbs, together with the number of leading
//! bits that are still known to agree with the ideal real number. Arithmetic
//! wraps modulo `2^bits`, which is exactly reduction modulo 1. Every operation
//! truncates; nothing rounds to nearest.

use std::fmt;
use std::path::Path;
use std::str::FromStr;
use std::sync::Arc;

use num_bigint::BigUint;

use crate::error::{Error, Result};

/// Largest depth a single cell index can carry.
pub const MAX_CELL_DEPTH: u32 = 64;

#[derive(Clone, PartialEq, Eq, Hash)]
pub struct CirclePoint {
    limbs: Vec<u64>,
    bits: u64,
    valid_bits: u64,
}

fn limb_count(bits: u64) -> usize {
    bits.div_ceil(64) as usize
}

impl CirclePoint {
    /// The point 0 with every bit valid.
    pub fn zero(bits: u64) -> Self {
        assert!(bits >= 1, "a circle point needs at least one bit");
        CirclePoint {
            limbs: vec![0; limb_count(bits)],
            bits,
            valid_bits: bits,
        }
    }

    /// Builds a point from an arbitrary mantissa, reducing it modulo `2^bits`.
    pub fn from_mantissa(mantissa: &BigUint, bits: u64) -> Self {
        let mut limbs = mantissa.to_u64_digits();
        limbs.resize(limb_count(bits).max(limbs.len()), 0);
        limbs.truncate(limb_count(bits));
        let mut p = CirclePoint {
            limbs,
            bits,
            valid_bits: bits,
        };
        p.mask_top();
        p
    }

    /// Builds a point from the top `bits` bits of a dyadic fraction `num / 2^bits`.
    pub fn from_u64(num: u64, bits: u64) -> Self {
        Self::from_mantissa(&BigUint::from(num), bits)
    }

    pub fn bits(&self) -> u64 {
        self.bits
    }

    pub fn valid_bits(&self) -> u64 {
        self.valid_bits
    }

    pub fn limbs(&self) -> &[u64] {
        &self.limbs
    }

    pub fn mantissa(&self) -> BigUint {
        BigUint::from_slice(
            &self
                .limbs
                .iter()
                .flat_map(|&l| [l as u32, (l >> 32) as u32])
                .collect::<Vec<_>>(),
        )
    }

    pub fn is_zero(&self) -> bool {
        self.limbs.iter().all(|&l| l == 0)
    }

    /// Lowers the valid-bit count to `valid` if it is currently higher.
    pub fn with_valid_bits(mut self, valid: u64) -> Self {
        self.valid_bits = self.valid_bits.min(valid);
        self
    }

    fn mask_top(&mut self) {
        let rem = self.bits % 64;
        if rem != 0 {
            if let Some(top) = self.limbs.last_mut() {
                *top &= (1u64 << rem) - 1;
            }
        }
    }

    fn check_width(&self, other: &CirclePoint) -> Result<()> {
        if self.bits != other.bits {
            return Err(Error::usage(format!(
                "mismatched bit widths: {} vs {}",
                self.bits, other.bits
            )));
        }
        Ok(())
    }

    /// Mantissa addition modulo `2^bits` without touching `valid_bits`.
    ///
    /// Generators that track their own error bound use this; everything else
    /// should go through [`CirclePoint::add_mod1`].
    pub(crate) fn wrapping_add_assign(&mut self, other: &CirclePoint) {
        debug_assert_eq!(self.bits, other.bits);
        let mut carry = false;
        for (a, &b) in self.limbs.iter_mut().zip(&other.limbs) {
            let (s1, c1) = a.overflowing_add(b);
            let (s2, c2) = s1.overflowing_add(carry as u64);
            *a = s2;
            carry = c1 || c2;
        }
        self.mask_top();
    }

    /// `(a + b) mod 1`. One valid bit is charged for the possible carry out of
    /// the truncated tails.
    pub fn add_mod1(&self, other: &CirclePoint) -> Result<CirclePoint> {
        self.check_width(other)?;
        let mut out = self.clone();
        out.wrapping_add_assign(other);
        out.valid_bits = self
            .valid_bits
            .min(other.valid_bits)
            .saturating_sub(1);
        Ok(out)
    }

    /// `(-a) mod 1`, computed exactly on the mantissa.
    pub fn neg_mod1(&self) -> CirclePoint {
        let mut out = self.clone();
        let mut borrow = false;
        for l in out.limbs.iter_mut() {
            let (d1, b1) = 0u64.overflowing_sub(*l);
            let (d2, b2) = d1.overflowing_sub(borrow as u64);
            *l = d2;
            borrow = b1 || b2;
        }
        out.mask_top();
        out
    }

    pub(crate) fn double_in_place(&mut self) {
        let mut carry = 0u64;
        for l in self.limbs.iter_mut() {
            let next = *l >> 63;
            *l = (*l << 1) | carry;
            carry = next;
        }
        self.mask_top();
        self.valid_bits = self.valid_bits.saturating_sub(1);
    }

    /// The doubling map `x -> 2x mod 1`. Exactly one valid bit is consumed.
    pub fn double_mod1(&self) -> CirclePoint {
        let mut out = self.clone();
        out.double_in_place();
        out
    }

    /// `2^shift * x mod 1`, consuming `shift` valid bits.
    pub fn shl_mod1(&self, shift: u64) -> CirclePoint {
        if shift >= self.bits {
            let mut z = CirclePoint::zero(self.bits);
            z.valid_bits = self.valid_bits.saturating_sub(shift);
            return z;
        }
        let limb_shift = (shift / 64) as usize;
        let bit_shift = shift % 64;
        let n = self.limbs.len();
        let mut limbs = vec![0u64; n];
        for i in (limb_shift..n).rev() {
            let src = i - limb_shift;
            let mut v = self.limbs[src] << bit_shift;
            if bit_shift > 0 && src > 0 {
                v |= self.limbs[src - 1] >> (64 - bit_shift);
            }
            limbs[i] = v;
        }
        let mut out = CirclePoint {
            limbs,
            bits: self.bits,
            valid_bits: self.valid_bits.saturating_sub(shift),
        };
        out.mask_top();
        out
    }

    /// Index of the depth-`k` dyadic cell containing the point, i.e. the top
    /// `k` mantissa bits.
    pub fn top_bits(&self, k: u32) -> Result<u64> {
        if k == 0 || k > MAX_CELL_DEPTH {
            return Err(Error::usage(format!(
                "cell depth must be in 1..={MAX_CELL_DEPTH}, got {k}"
            )));
        }
        if u64::from(k) > self.valid_bits {
            return Err(Error::PrecisionExhausted {
                requested: k,
                valid: self.valid_bits,
            });
        }
        Ok(self.top_bits_unchecked(k))
    }

    fn top_bits_unchecked(&self, k: u32) -> u64 {
        let k = u64::from(k).min(self.bits);
        let shift = self.bits - k;
        let idx = (shift / 64) as usize;
        let off = shift % 64;
        let mut v = self.limbs[idx] >> off;
        if off > 0 && idx + 1 < self.limbs.len() {
            v |= self.limbs[idx + 1] << (64 - off);
        }
        if k < 64 {
            v &= (1u64 << k) - 1;
        }
        v
    }

    /// Nearest-below `f64` of the top 53 mantissa bits. Ignores `valid_bits`.
    pub fn to_f64(&self) -> f64 {
        let k = self.bits.min(53) as u32;
        self.top_bits_unchecked(k) as f64 / (1u64 << k) as f64
    }

    /// Truncated decimal expansion `0.ddd…` built from at most the top 50
    /// valid bits.
    pub fn to_decimal(&self, digits: usize) -> String {
        let k = self.valid_bits.min(self.bits).min(50) as u32;
        if k == 0 {
            return format!("0.{}", "0".repeat(digits));
        }
        let top = BigUint::from(self.top_bits_unchecked(k));
        let scaled = (top * BigUint::from(10u32).pow(digits as u32)) >> k;
        if digits == 0 {
            return "0".to_string();
        }
        format!("0.{:0>width$}", scaled.to_str_radix(10), width = digits)
    }

    /// Raw mantissa in lowercase hex, zero-padded to the full width.
    pub fn to_hex(&self) -> String {
        let width = self.bits.div_ceil(4) as usize;
        format!("{:0>width$}", self.mantissa().to_str_radix(16), width = width)
    }
}

impl fmt::Debug for CirclePoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "CirclePoint({} bits, {} valid, ~{})",
            self.bits,
            self.valid_bits,
            self.to_f64()
        )
    }
}

/// Free-function form of [`CirclePoint::add_mod1`].
pub fn add_mod1(a: &CirclePoint, b: &CirclePoint) -> Result<CirclePoint> {
    a.add_mod1(b)
}

/// Free-function form of [`CirclePoint::double_mod1`].
pub fn double_mod1(a: &CirclePoint) -> CirclePoint {
    a.double_mod1()
}

/// Free-function form of [`CirclePoint::top_bits`].
pub fn top_bits(a: &CirclePoint, k: u32) -> Result<u64> {
    a.top_bits(k)
}

/// A named source of binary digits, most significant first.
#[derive(Clone, PartialEq, Eq)]
pub struct DigitSource {
    label: String,
    digits: Arc<Vec<u8>>,
}

impl DigitSource {
    pub fn new(label: impl Into<String>, digits: Vec<u8>) -> Result<Self> {
        if let Some(bad) = digits.iter().find(|&&d| d > 1) {
            return Err(Error::usage(format!("binary digit out of range: {bad}")));
        }
        Ok(DigitSource {
            label: label.into(),
            digits: Arc::new(digits),
        })
    }

    /// Reads ASCII `0`/`1` characters; whitespace is skipped.
    pub fn from_text(label: impl Into<String>, text: &str) -> Result<Self> {
        let label = label.into();
        let mut digits = Vec::with_capacity(text.len());
        for ch in text.chars() {
            match ch {
                '0' => digits.push(0),
                '1' => digits.push(1),
                c if c.is_whitespace() => {}
                c => {
                    return Err(Error::parse(
                        "digit file",
                        &label,
                        format!("unexpected character {c:?}"),
                    ))
                }
            }
        }
        DigitSource::new(label, digits)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
            path: path.display().to_string(),
            reason: e.to_string(),
        })?;
        DigitSource::from_text(path.display().to_string(), &text)
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn digits(&self) -> &[u8] {
        &self.digits
    }
}

impl fmt::Debug for DigitSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "DigitSource({}, {} digits)", self.label, self.digits.len())
    }
}

/// Declarative description of a real constant taken modulo 1.
///
/// Textual forms: `p/q` (or a bare integer), `sqrtK`, `champernowne`,
/// `bits:PATH`, and any of those prefixed with `-` for the negation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ConstantSpec {
    Rational { p: i64, q: u64 },
    SqrtInt(u64),
    DigitStream(DigitSource),
    Champernowne,
    Negated(Box<ConstantSpec>),
}

fn is_square(k: u64) -> bool {
    let r = (k as f64).sqrt() as u64;
    (r.saturating_sub(1)..=r + 1).any(|s| s.checked_mul(s) == Some(k))
}

/// First `n` binary digits of the binary Champernowne constant
/// `0.1 10 11 100 101 …`.
pub fn champernowne_digits(n: usize) -> Vec<u8> {
    let mut out = Vec::with_capacity(n);
    let mut k: u64 = 1;
    while out.len() < n {
        let width = 64 - k.leading_zeros();
        for i in (0..width).rev() {
            if out.len() == n {
                break;
            }
            out.push(((k >> i) & 1) as u8);
        }
        k += 1;
    }
    out
}

fn mantissa_from_digits(digits: &[u8], bits: u64) -> BigUint {
    let mut limbs = vec![0u64; limb_count(bits)];
    for (i, &d) in digits.iter().take(bits as usize).enumerate() {
        if d == 1 {
            let pos = bits - 1 - i as u64;
            limbs[(pos / 64) as usize] |= 1u64 << (pos % 64);
        }
    }
    BigUint::from_slice(
        &limbs
            .iter()
            .flat_map(|&l| [l as u32, (l >> 32) as u32])
            .collect::<Vec<_>>(),
    )
}

impl ConstantSpec {
    pub fn rational(p: i64, q: u64) -> Self {
        ConstantSpec::Rational { p, q }
    }

    pub fn sqrt(k: u64) -> Self {
        ConstantSpec::SqrtInt(k)
    }

    pub fn negated(self) -> Self {
        match self {
            ConstantSpec::Negated(inner) => *inner,
            other => ConstantSpec::Negated(Box::new(other)),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            ConstantSpec::Rational { q, .. } if *q == 0 => {
                Err(Error::usage("rational constant with zero denominator"))
            }
            ConstantSpec::SqrtInt(k) if *k == 0 || is_square(*k) => Err(Error::usage(format!(
                "sqrt{k}: radicand must be a positive non-square"
            ))),
            ConstantSpec::Negated(inner) => inner.validate(),
            _ => Ok(()),
        }
    }

    /// True if the value is known to be a rational number.
    pub fn is_rational(&self) -> bool {
        match self {
            ConstantSpec::Rational { .. } => true,
            ConstantSpec::Negated(inner) => inner.is_rational(),
            _ => false,
        }
    }

    /// Mantissa and whether it represents the value with zero error.
    pub(crate) fn materialize_exact(&self, bits: u64) -> Result<(CirclePoint, bool)> {
        if bits == 0 {
            return Err(Error::usage("bit budget must be positive"));
        }
        self.validate()?;
        match self {
            ConstantSpec::Rational { p, q } => {
                let r = i128::from(*p).rem_euclid(i128::from(*q)) as u64;
                let num = BigUint::from(r) << bits;
                let q = BigUint::from(*q);
                let exact = (&num % &q) == BigUint::ZERO;
                Ok((CirclePoint::from_mantissa(&(num / q), bits), exact))
            }
            ConstantSpec::SqrtInt(k) => {
                let s = (BigUint::from(*k) << (2 * bits)).sqrt();
                Ok((CirclePoint::from_mantissa(&s, bits), false))
            }
            ConstantSpec::DigitStream(src) => {
                let available = src.digits().len() as u64;
                if available < bits {
                    return Err(Error::PrecisionSource {
                        needed: bits,
                        available,
                    });
                }
                let m = mantissa_from_digits(src.digits(), bits);
                Ok((CirclePoint::from_mantissa(&m, bits), false))
            }
            ConstantSpec::Champernowne => {
                let d = champernowne_digits(bits as usize);
                let m = mantissa_from_digits(&d, bits);
                Ok((CirclePoint::from_mantissa(&m, bits), false))
            }
            ConstantSpec::Negated(inner) => {
                // floor(-v) = -ceil(v)
                let (ceil, exact) = inner.materialize_ceil(bits)?;
                Ok((ceil.neg_mod1(), exact))
            }
        }
    }

    /// `ceil((value mod 1) * 2^bits) mod 2^bits`, plus the exactness flag.
    ///
    /// Additive orbits are built from ceiling-rounded coefficients so that the
    /// accumulated error is one-sided (the computed value never lies below the
    /// ideal one). Values that sit exactly on a cell boundary then stay in the
    /// right cell.
    pub(crate) fn materialize_ceil(&self, bits: u64) -> Result<(CirclePoint, bool)> {
        let (mut p, exact) = self.materialize_exact(bits)?;
        if !exact {
            let mut ulp = CirclePoint::zero(bits);
            ulp.limbs[0] = 1;
            p.wrapping_add_assign(&ulp);
        }
        Ok((p, exact))
    }

    /// `floor((value mod 1) * 2^bits)` as a point with every bit valid.
    pub fn materialize(&self, bits: u64) -> Result<CirclePoint> {
        self.materialize_exact(bits).map(|(p, _)| p)
    }
}

/// Free-function form of [`ConstantSpec::materialize`].
pub fn materialize(spec: &ConstantSpec, bits: u64) -> Result<CirclePoint> {
    spec.materialize(bits)
}

impl FromStr for ConstantSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let text = s.trim();
        if let Some(rest) = text.strip_prefix('-') {
            if !rest.starts_with(|c: char| c.is_ascii_digit()) {
                return Ok(rest.parse::<ConstantSpec>()?.negated());
            }
        }
        if text == "champernowne" {
            return Ok(ConstantSpec::Champernowne);
        }
        if let Some(k) = text.strip_prefix("sqrt") {
            let k: u64 = k
                .parse()
                .map_err(|_| Error::parse("constant", s, "expected sqrtK with integer K"))?;
            let spec = ConstantSpec::SqrtInt(k);
            spec.validate()
                .map_err(|e| Error::parse("constant", s, e.to_string()))?;
            return Ok(spec);
        }
        if let Some(path) = text.strip_prefix("bits:") {
            return Ok(ConstantSpec::DigitStream(DigitSource::from_file(Path::new(
                path,
            ))?));
        }
        let (p, q) = match text.split_once('/') {
            Some((p, q)) => (p.trim(), q.trim()),
            None => (text, "1"),
        };
        let p: i64 = p
            .parse()
            .map_err(|_| Error::parse("constant", s, "bad numerator"))?;
        let q: u64 = q
            .parse()
            .map_err(|_| Error::parse("constant", s, "bad denominator"))?;
        if q == 0 {
            return Err(Error::parse("constant", s, "zero denominator"));
        }
        Ok(ConstantSpec::Rational { p, q })
    }
}

impl fmt::Display for ConstantSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConstantSpec::Rational { p, q: 1 } => write!(f, "{p}"),
            ConstantSpec::Rational { p, q } => write!(f, "{p}/{q}"),
            ConstantSpec::SqrtInt(k) => write!(f, "sqrt{k}"),
            ConstantSpec::DigitStream(src) => write!(f, "bits:{}", src.label()),
            ConstantSpec::Champernowne => write!(f, "champernowne"),
            ConstantSpec::Negated(inner) => write!(f, "-{inner}"),
        }
    }
}
