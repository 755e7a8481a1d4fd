//! Generators for the sequence families: circle rotations, polynomial
//! orbits, doubling-map orbits, their pointwise sums, and αβ-sequences.
//!
//! Polynomial orbits never evaluate `p(n)` term by term. A
//! [`DifferenceTable`] holds the forward differences `Δ^i p(n) mod 1`; one
//! step of the generator is one application of the skew product
//! `(x_0, x_1, …, x_g) -> (x_0 + x_1, x_1 + x_2, …, x_g)`, which costs `g`
//! additions.
//!
//! Additive families are built from ceiling-rounded coefficients, so the
//! emitted value is always `>=` the ideal one and the overshoot after `n`
//! steps is bounded by `sum over inexact a_i of n^i` ulps. Each emitted
//! point's `valid_bits` is derived from that bound.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use num_bigint::BigUint;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::circle::{CirclePoint, ConstantSpec, MAX_CELL_DEPTH};
use crate::error::{Error, Result};

/// Guard bits kept above every requested cell depth.
pub const GUARD_BITS: u64 = 64;

/// Default depth used by the greedy αβ strategy.
pub const DEFAULT_GREEDY_DEPTH: u32 = 8;

/// Largest greedy depth; the visit table has `2^depth` entries.
pub const MAX_GREEDY_DEPTH: u32 = 24;

/// `ceil(log2(e))` for an error bound `e` in ulps; 0 for `e <= 1`.
pub(crate) fn ceil_log2(e: u128) -> u64 {
    if e <= 1 {
        0
    } else {
        u64::from(128 - (e - 1).leading_zeros())
    }
}

fn valid_from_error(bits: u64, err: Option<u128>) -> u64 {
    match err {
        Some(e) => bits.saturating_sub(ceil_log2(e)),
        None => 0,
    }
}

/// `p(n) = a_0 + a_1 n + … + a_g n^g`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PolySpec {
    coeffs: Vec<ConstantSpec>,
}

impl PolySpec {
    pub fn new(coeffs: Vec<ConstantSpec>) -> Result<Self> {
        if coeffs.is_empty() {
            return Err(Error::usage("polynomial needs at least one coefficient"));
        }
        for c in &coeffs {
            c.validate()?;
        }
        Ok(PolySpec { coeffs })
    }

    /// `n * alpha`.
    pub fn linear(alpha: ConstantSpec) -> Self {
        PolySpec {
            coeffs: vec![ConstantSpec::rational(0, 1), alpha],
        }
    }

    pub fn zero() -> Self {
        PolySpec {
            coeffs: vec![ConstantSpec::rational(0, 1)],
        }
    }

    pub fn coeffs(&self) -> &[ConstantSpec] {
        &self.coeffs
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    /// True when some non-constant coefficient is irrational.
    pub fn is_irrational(&self) -> bool {
        self.coeffs.iter().skip(1).any(|c| !c.is_rational())
    }

    fn error_bound_log2(&self, n: u64) -> u64 {
        // Evaluated in floating point for budgeting only.
        let mut total = 0f64;
        for (i, c) in self.coeffs.iter().enumerate() {
            let exact_rational = match c {
                ConstantSpec::Rational { q, .. } => q.is_power_of_two(),
                _ => false,
            };
            if !exact_rational {
                total += (n as f64).powi(i as i32);
            }
        }
        if total <= 1.0 {
            0
        } else {
            total.log2().ceil() as u64 + 1
        }
    }
}

impl FromStr for PolySpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let coeffs = s
            .split(',')
            .map(|c| c.parse::<ConstantSpec>())
            .collect::<Result<Vec<_>>>()?;
        PolySpec::new(coeffs).map_err(|e| Error::parse("polynomial", s, e.to_string()))
    }
}

impl fmt::Display for PolySpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, c) in self.coeffs.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{c}")?;
        }
        Ok(())
    }
}

/// Forward-difference registers `D_i = Δ^i p(n) mod 1`.
#[derive(Debug, Clone)]
pub struct DifferenceTable {
    registers: Vec<CirclePoint>,
    n: u64,
    bits: u64,
    inexact: Vec<bool>,
}

fn binomial(n: u64, k: u64) -> BigUint {
    let mut acc = BigUint::from(1u32);
    for j in 0..k {
        acc = acc * BigUint::from(n - j) / BigUint::from(j + 1);
    }
    acc
}

impl DifferenceTable {
    /// Table positioned at `n = start`.
    pub fn at(poly: &PolySpec, bits: u64, start: u64) -> Result<Self> {
        if bits == 0 {
            return Err(Error::usage("bit budget must be positive"));
        }
        let modulus = BigUint::from(1u32) << bits;
        let mut coeffs = Vec::with_capacity(poly.coeffs().len());
        let mut inexact = Vec::with_capacity(poly.coeffs().len());
        for c in poly.coeffs() {
            let (p, exact) = c.materialize_ceil(bits)?;
            coeffs.push(p.mantissa());
            inexact.push(!exact);
        }
        let g = poly.degree() as u64;

        // p(start + j) for j = 0..=g, exact over the rounded coefficients.
        let values: Vec<BigUint> = (0..=g)
            .map(|j| {
                let x = BigUint::from(start) + BigUint::from(j);
                let mut acc = BigUint::ZERO;
                for c in coeffs.iter().rev() {
                    acc = (acc * &x + c) % &modulus;
                }
                acc
            })
            .collect();

        let registers = (0..=g)
            .map(|i| {
                let mut acc = BigUint::ZERO;
                for j in 0..=i {
                    let term = (binomial(i, j) * &values[j as usize]) % &modulus;
                    if (i - j) % 2 == 0 {
                        acc += term;
                    } else {
                        acc += &modulus - term;
                    }
                }
                CirclePoint::from_mantissa(&(acc % &modulus), bits)
            })
            .collect();

        Ok(DifferenceTable {
            registers,
            n: start,
            bits,
            inexact,
        })
    }

    pub fn registers(&self) -> &[CirclePoint] {
        &self.registers
    }

    pub fn step(&self) -> u64 {
        self.n
    }

    /// Upper bound, in ulps, on how far `D_0` overshoots the ideal `p(n)`:
    /// the sum of `n^i` over the coefficients that were rounded. `None` on
    /// overflow.
    pub fn error_bound(&self) -> Option<u128> {
        let n = u128::from(self.n);
        self.inexact
            .iter()
            .enumerate()
            .filter(|(_, &inexact)| inexact)
            .try_fold(0u128, |acc, (i, _)| acc.checked_add(n.checked_pow(i as u32)?))
    }

    /// `p(n) mod 1` at the current step, with valid bits from the error bound.
    pub fn current(&self) -> Result<CirclePoint> {
        Ok(self.registers[0]
            .clone()
            .with_valid_bits(valid_from_error(self.bits, self.error_bound())))
    }

    /// One skew-product step: `D_i += D_{i+1}` in ascending order, so each
    /// update reads the previous value of the next register.
    pub fn advance(&mut self) {
        for i in 0..self.registers.len() - 1 {
            let (lo, hi) = self.registers.split_at_mut(i + 1);
            lo[i].wrapping_add_assign(&hi[0]);
        }
        self.n += 1;
    }

    /// Advances one step and returns the new `p(n) mod 1`.
    pub fn next_poly_point(&mut self) -> Result<CirclePoint> {
        self.advance();
        self.current()
    }
}

/// Difference table of `poly` at `n = 0`.
pub fn finite_differences(poly: &PolySpec, bits: u64) -> Result<DifferenceTable> {
    DifferenceTable::at(poly, bits, 0)
}

/// One step choice of an αβ-sequence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Choice {
    A,
    B,
}

impl Choice {
    fn from_char(c: char) -> Option<Choice> {
        match c {
            'A' | 'a' | '0' => Some(Choice::A),
            'B' | 'b' | '1' => Some(Choice::B),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Strategy {
    /// Repeats the word forever.
    Periodic(Vec<Choice>),
    /// Chooses `A` with probability `p`. A missing seed falls back to the
    /// orbit's seed.
    Random { p: f64, seed: Option<u64> },
    /// Reads choices from a file of `A`/`B` (or `0`/`1`) characters.
    File { label: String, choices: Vec<Choice> },
    /// Steps into the less visited depth-`depth` cell.
    Greedy { depth: u32 },
}

impl Strategy {
    pub fn validate(&self) -> Result<()> {
        match self {
            Strategy::Periodic(w) if w.is_empty() => {
                Err(Error::usage("periodic strategy needs a non-empty word"))
            }
            Strategy::Random { p, .. } if !(0.0..=1.0).contains(p) => Err(Error::usage(
                format!("random strategy probability {p} outside [0, 1]"),
            )),
            Strategy::Greedy { depth } if *depth == 0 || *depth > MAX_GREEDY_DEPTH => {
                Err(Error::usage(format!(
                    "greedy depth must be in 1..={MAX_GREEDY_DEPTH}"
                )))
            }
            _ => Ok(()),
        }
    }

    fn parse_choices(what: &'static str, input: &str, text: &str) -> Result<Vec<Choice>> {
        text.chars()
            .filter(|c| !c.is_whitespace())
            .map(|c| {
                Choice::from_char(c)
                    .ok_or_else(|| Error::parse(what, input, format!("bad choice {c:?}")))
            })
            .collect()
    }
}

impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (kind, arg) = match s.split_once(':') {
            Some((k, a)) => (k, Some(a)),
            None => (s, None),
        };
        let strategy = match (kind, arg) {
            ("periodic", Some(word)) => {
                Strategy::Periodic(Strategy::parse_choices("strategy", s, word)?)
            }
            ("random", Some(arg)) => {
                let (p, seed) = match arg.split_once(':') {
                    Some((p, seed)) => (p, Some(seed)),
                    None => (arg, None),
                };
                let p: f64 = p
                    .parse()
                    .map_err(|_| Error::parse("strategy", s, "bad probability"))?;
                let seed = seed
                    .map(|v| v.parse::<u64>())
                    .transpose()
                    .map_err(|_| Error::parse("strategy", s, "bad seed"))?;
                Strategy::Random { p, seed }
            }
            ("file", Some(path)) => {
                let text = std::fs::read_to_string(Path::new(path)).map_err(|e| Error::Io {
                    path: path.to_string(),
                    reason: e.to_string(),
                })?;
                Strategy::File {
                    label: path.to_string(),
                    choices: Strategy::parse_choices("strategy file", path, &text)?,
                }
            }
            ("greedy", None) => Strategy::Greedy {
                depth: DEFAULT_GREEDY_DEPTH,
            },
            ("greedy", Some(d)) => Strategy::Greedy {
                depth: d
                    .parse()
                    .map_err(|_| Error::parse("strategy", s, "bad greedy depth"))?,
            },
            _ => return Err(Error::parse("strategy", s, "unknown strategy")),
        };
        strategy
            .validate()
            .map_err(|e| Error::parse("strategy", s, e.to_string()))?;
        Ok(strategy)
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let word = |w: &[Choice]| -> String {
            w.iter()
                .map(|c| if *c == Choice::A { 'A' } else { 'B' })
                .collect()
        };
        match self {
            Strategy::Periodic(w) => write!(f, "periodic:{}", word(w)),
            Strategy::Random { p, seed: Some(s) } => write!(f, "random:{p}:{s}"),
            Strategy::Random { p, seed: None } => write!(f, "random:{p}"),
            Strategy::File { label, .. } => write!(f, "file:{label}"),
            Strategy::Greedy { depth } => write!(f, "greedy:{depth}"),
        }
    }
}

/// Picks the step whose landing cell at `depth` has the strictly smaller
/// visit count; ties go to `A`.
pub fn greedy_choice(
    x: &CirclePoint,
    alpha: &CirclePoint,
    beta: &CirclePoint,
    counts: &[u32],
    depth: u32,
) -> Result<Choice> {
    if depth == 0 || depth > MAX_GREEDY_DEPTH || counts.len() != 1usize << depth {
        return Err(Error::usage(format!(
            "visit table has {} cells, depth {depth} needs {}",
            counts.len(),
            1u64 << depth.min(63)
        )));
    }
    let a = x.add_mod1(alpha)?.top_bits(depth)?;
    let b = x.add_mod1(beta)?.top_bits(depth)?;
    Ok(if counts[b as usize] < counts[a as usize] {
        Choice::B
    } else {
        Choice::A
    })
}

/// The sequence family of an orbit.
#[derive(Debug, Clone, PartialEq)]
pub enum OrbitFamily {
    /// `n α mod 1`
    Rotation(ConstantSpec),
    /// `p(n) mod 1`
    Polynomial(PolySpec),
    /// `2^n d mod 1`
    Doubling(ConstantSpec),
    /// `p(n) + 2^n d mod 1`
    Combined { poly: PolySpec, d: ConstantSpec },
    /// `x_1 = 0`, `x_{i+1} = x_i + (α or β) mod 1`
    AlphaBeta {
        alpha: ConstantSpec,
        beta: ConstantSpec,
        strategy: Strategy,
    },
}

impl OrbitFamily {
    /// Index of the first emitted term when none is given explicitly.
    pub fn default_start(&self) -> u64 {
        match self {
            OrbitFamily::Doubling(_) => 0,
            _ => 1,
        }
    }

    fn validate(&self) -> Result<()> {
        match self {
            OrbitFamily::Rotation(c) | OrbitFamily::Doubling(c) => c.validate(),
            OrbitFamily::Polynomial(_) => Ok(()),
            OrbitFamily::Combined { d, .. } => d.validate(),
            OrbitFamily::AlphaBeta {
                alpha,
                beta,
                strategy,
            } => {
                alpha.validate()?;
                beta.validate()?;
                strategy.validate()
            }
        }
    }
}

fn keyed_fields<'a>(s: &'a str, input: &str) -> Result<Vec<(&'a str, &'a str)>> {
    s.split(';')
        .map(|part| {
            part.split_once('=')
                .map(|(k, v)| (k.trim(), v.trim()))
                .ok_or_else(|| Error::parse("orbit", input, format!("expected key=value in `{part}`")))
        })
        .collect()
}

fn field<'a>(fields: &[(&str, &'a str)], key: &str, input: &str) -> Result<&'a str> {
    fields
        .iter()
        .find(|(k, _)| *k == key)
        .map(|(_, v)| *v)
        .ok_or_else(|| Error::parse("orbit", input, format!("missing `{key}=`")))
}

impl FromStr for OrbitFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (kind, body) = s
            .trim()
            .split_once(':')
            .ok_or_else(|| Error::parse("orbit", s, "expected FAMILY:ARGS"))?;
        let family = match kind {
            "rotation" => OrbitFamily::Rotation(body.parse()?),
            "poly" | "polynomial" => OrbitFamily::Polynomial(body.parse()?),
            "doubling" => OrbitFamily::Doubling(body.parse()?),
            "combined" => {
                let f = keyed_fields(body, s)?;
                OrbitFamily::Combined {
                    poly: field(&f, "poly", s)?.parse()?,
                    d: field(&f, "d", s)?.parse()?,
                }
            }
            "alphabeta" => {
                let f = keyed_fields(body, s)?;
                OrbitFamily::AlphaBeta {
                    alpha: field(&f, "a", s)?.parse()?,
                    beta: field(&f, "b", s)?.parse()?,
                    strategy: field(&f, "strategy", s)?.parse()?,
                }
            }
            _ => return Err(Error::parse("orbit", s, format!("unknown family `{kind}`"))),
        };
        family.validate()?;
        Ok(family)
    }
}

impl fmt::Display for OrbitFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            OrbitFamily::Rotation(a) => write!(f, "rotation:{a}"),
            OrbitFamily::Polynomial(p) => write!(f, "poly:{p}"),
            OrbitFamily::Doubling(d) => write!(f, "doubling:{d}"),
            OrbitFamily::Combined { poly, d } => write!(f, "combined:poly={poly};d={d}"),
            OrbitFamily::AlphaBeta {
                alpha,
                beta,
                strategy,
            } => write!(f, "alphabeta:a={alpha};b={beta};strategy={strategy}"),
        }
    }
}

/// A fully resolved orbit request: family, number of points, bit budget,
/// start index and seed.
#[derive(Debug, Clone, PartialEq)]
pub struct OrbitSpec {
    pub family: OrbitFamily,
    pub len: u64,
    pub bits: u64,
    pub start: u64,
    pub seed: u64,
}

impl OrbitSpec {
    /// Uses the family's default start index, seed 0, and the smallest budget
    /// that allows reading cells at every depth up to 64.
    pub fn new(family: OrbitFamily, len: u64) -> Self {
        let start = family.default_start();
        let mut spec = OrbitSpec {
            family,
            len,
            bits: 1,
            start,
            seed: 0,
        };
        spec.bits = spec.required_bits(MAX_CELL_DEPTH);
        spec
    }

    pub fn parse(text: &str, len: u64) -> Result<Self> {
        Ok(OrbitSpec::new(text.parse()?, len))
    }

    pub fn with_bits(mut self, bits: u64) -> Self {
        self.bits = bits;
        self
    }

    /// Changes the start index and re-derives the automatic bit budget.
    pub fn with_start(mut self, start: u64) -> Self {
        self.start = start;
        self.bits = self.required_bits(MAX_CELL_DEPTH);
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    fn last_index(&self) -> u64 {
        self.start + self.len.saturating_sub(1)
    }

    /// Smallest bit budget for which every point can be read at `depth`.
    ///
    /// Doubling consumes one bit per step, so `start + len + depth + 64` bits
    /// are needed. Additive families only lose the logarithm of their
    /// accumulated error bound.
    pub fn required_bits(&self, depth: u32) -> u64 {
        let depth = u64::from(depth);
        let last = self.last_index();
        match &self.family {
            OrbitFamily::Doubling(_) => self.start + self.len + depth + GUARD_BITS,
            OrbitFamily::Rotation(a) => {
                depth + GUARD_BITS + PolySpec::linear(a.clone()).error_bound_log2(last)
            }
            OrbitFamily::Polynomial(p) => depth + GUARD_BITS + p.error_bound_log2(last),
            OrbitFamily::Combined { poly, .. } => {
                self.start + self.len + depth + GUARD_BITS + poly.error_bound_log2(last) + 1
            }
            OrbitFamily::AlphaBeta { strategy, .. } => {
                let depth = match strategy {
                    Strategy::Greedy { depth: g } => depth.max(u64::from(*g)),
                    _ => depth,
                };
                depth + GUARD_BITS + ceil_log2(u128::from(self.len) + 1) + 1
            }
        }
    }

    /// Refuses budgets that cannot support reading cells at `depth`.
    pub fn check_budget(&self, depth: u32) -> Result<()> {
        let required = self.required_bits(depth);
        if self.bits < required {
            return Err(Error::PrecisionBudget {
                bits: self.bits,
                required,
            });
        }
        Ok(())
    }

    pub fn generate(&self) -> Result<OrbitGenerator> {
        OrbitGenerator::new(self)
    }

    /// All points, materialized. Prefer streaming for long orbits with
    /// large budgets.
    pub fn points(&self) -> Result<Vec<CirclePoint>> {
        self.generate()?.map(|r| r.map(|p| p.point)).collect()
    }
}

impl fmt::Display for OrbitSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.family)
    }
}

/// A generated term `x_n`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OrbitPoint {
    pub n: u64,
    pub point: CirclePoint,
}

enum Chooser {
    Periodic { word: Vec<Choice>, idx: usize },
    Random { rng: ChaCha8Rng, p: f64 },
    File { choices: Vec<Choice>, idx: usize },
    Greedy { depth: u32, counts: Vec<u32> },
}

enum State {
    Poly(DifferenceTable),
    Doubling(CirclePoint),
    Combined {
        table: DifferenceTable,
        doubling: CirclePoint,
    },
    AlphaBeta {
        x: CirclePoint,
        steps: u64,
        inexact: bool,
        alpha: CirclePoint,
        beta: CirclePoint,
        chooser: Chooser,
    },
}

/// Streams the points of an [`OrbitSpec`]; a sequential state machine.
pub struct OrbitGenerator {
    state: State,
    n: u64,
    remaining: u64,
    bits: u64,
    started: bool,
}

impl OrbitGenerator {
    fn new(spec: &OrbitSpec) -> Result<Self> {
        if spec.bits == 0 {
            return Err(Error::usage("bit budget must be positive"));
        }
        let bits = spec.bits;
        let state = match &spec.family {
            OrbitFamily::Rotation(a) => {
                State::Poly(DifferenceTable::at(&PolySpec::linear(a.clone()), bits, spec.start)?)
            }
            OrbitFamily::Polynomial(p) => State::Poly(DifferenceTable::at(p, bits, spec.start)?),
            OrbitFamily::Doubling(d) => State::Doubling(d.materialize(bits)?.shl_mod1(spec.start)),
            OrbitFamily::Combined { poly, d } => State::Combined {
                table: DifferenceTable::at(poly, bits, spec.start)?,
                doubling: d.materialize(bits)?.shl_mod1(spec.start),
            },
            OrbitFamily::AlphaBeta {
                alpha,
                beta,
                strategy,
            } => {
                let (alpha, ea) = alpha.materialize_ceil(bits)?;
                let (beta, eb) = beta.materialize_ceil(bits)?;
                let chooser = match strategy {
                    Strategy::Periodic(word) => Chooser::Periodic {
                        word: word.clone(),
                        idx: 0,
                    },
                    Strategy::Random { p, seed } => Chooser::Random {
                        rng: ChaCha8Rng::seed_from_u64(seed.unwrap_or(spec.seed)),
                        p: *p,
                    },
                    Strategy::File { choices, .. } => Chooser::File {
                        choices: choices.clone(),
                        idx: 0,
                    },
                    Strategy::Greedy { depth } => Chooser::Greedy {
                        depth: *depth,
                        counts: vec![0; 1usize << depth],
                    },
                };
                State::AlphaBeta {
                    x: CirclePoint::zero(bits),
                    steps: 0,
                    inexact: !(ea && eb),
                    alpha,
                    beta,
                    chooser,
                }
            }
        };
        Ok(OrbitGenerator {
            state,
            n: spec.start,
            remaining: spec.len,
            bits,
            started: false,
        })
    }

    fn advance(&mut self) -> Result<()> {
        match &mut self.state {
            State::Poly(table) => table.advance(),
            State::Doubling(x) => x.double_in_place(),
            State::Combined { table, doubling } => {
                table.advance();
                doubling.double_in_place();
            }
            State::AlphaBeta {
                x,
                steps,
                alpha,
                beta,
                chooser,
                ..
            } => {
                let choice = match chooser {
                    Chooser::Periodic { word, idx } => {
                        let c = word[*idx % word.len()];
                        *idx += 1;
                        c
                    }
                    Chooser::Random { rng, p } => {
                        if rng.random_bool(*p) {
                            Choice::A
                        } else {
                            Choice::B
                        }
                    }
                    Chooser::File { choices, idx } => {
                        let c = *choices
                            .get(*idx)
                            .ok_or(Error::StrategyExhausted { used: *idx as u64 })?;
                        *idx += 1;
                        c
                    }
                    Chooser::Greedy { depth, counts } => greedy_choice(x, alpha, beta, counts, *depth)?,
                };
                x.wrapping_add_assign(if choice == Choice::A { alpha } else { beta });
                *steps += 1;
            }
        }
        self.n += 1;
        Ok(())
    }

    fn emit(&mut self) -> Result<CirclePoint> {
        let bits = self.bits;
        match &mut self.state {
            State::Poly(table) => table.current(),
            State::Doubling(x) => Ok(x.clone()),
            State::Combined { table, doubling } => table.current()?.add_mod1(doubling),
            State::AlphaBeta {
                x,
                steps,
                inexact,
                chooser,
                ..
            } => {
                let err = if *inexact { u128::from(*steps) } else { 0 };
                let p = x.clone().with_valid_bits(valid_from_error(bits, Some(err)));
                if let Chooser::Greedy { depth, counts } = chooser {
                    counts[p.top_bits(*depth)? as usize] += 1;
                }
                Ok(p)
            }
        }
    }

    fn step(&mut self) -> Result<OrbitPoint> {
        if self.started {
            self.advance()?;
        }
        self.started = true;
        let point = self.emit()?;
        Ok(OrbitPoint { n: self.n, point })
    }
}

impl Iterator for OrbitGenerator {
    type Item = Result<OrbitPoint>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.remaining == 0 {
            return None;
        }
        self.remaining -= 1;
        let out = self.step();
        if out.is_err() {
            self.remaining = 0;
        }
        Some(out)
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        let r = usize::try_from(self.remaining).unwrap_or(usize::MAX);
        (0, Some(r))
    }
}
