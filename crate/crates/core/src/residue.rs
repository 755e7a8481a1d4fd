//! Residue covering for `v(n) = 2^n + c n mod m` with `m` odd and
//! `gcd(c, m) = 1`: every residue class is visited.
//!
//! The constructive solver follows the reduction `m -> Δ = gcd(ord(2, m), m)`.
//! Writing `l = ord(2, m)`, the values `v(r + k l)` for `k >= 0` run through
//! the coset `v(r) + Δ Z/mZ`, because `2^(r + k l) = 2^r` and
//! `gcd(c l, m) = Δ`. So a witness `r` for the target modulo `Δ` lifts to a
//! witness modulo `m` by solving the linear congruence `c l k ≡ t - v(r)`.
//! The chain `m > Δ > Δ' > …` is strictly decreasing and ends at `Δ = 1`,
//! where `r = 0` works trivially.

use std::fmt::Display;

use serde::{Serialize, Serializer};

use crate::error::{Error, Result};
use crate::exec::{self, Exec};

fn dec<T: Display, S: Serializer>(v: &T, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.collect_str(v)
}

fn dec_vec<T: Display, S: Serializer>(v: &[T], s: S) -> std::result::Result<S::Ok, S::Error> {
    s.collect_seq(v.iter().map(|x| x.to_string()))
}

pub fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

pub fn lcm(a: u64, b: u64) -> u128 {
    if a == 0 || b == 0 {
        return 0;
    }
    u128::from(a / gcd(a, b)) * u128::from(b)
}

fn mul_mod(a: u64, b: u64, m: u64) -> u64 {
    (u128::from(a) * u128::from(b) % u128::from(m)) as u64
}

/// `2^e mod m`.
pub fn pow2_mod(mut e: u128, m: u64) -> u64 {
    if m == 1 {
        return 0;
    }
    let mut base = 2 % m;
    let mut acc = 1 % m;
    while e > 0 {
        if e & 1 == 1 {
            acc = mul_mod(acc, base, m);
        }
        base = mul_mod(base, base, m);
        e >>= 1;
    }
    acc
}

/// `(2^n + c n) mod m`, evaluated by modular exponentiation.
pub fn evaluate(m: u64, c: u64, n: u128) -> u64 {
    let lin = mul_mod(c % m, (n % u128::from(m)) as u64, m);
    ((u128::from(pow2_mod(n, m)) + u128::from(lin)) % u128::from(m)) as u64
}

/// Prime factorization by trial division.
pub fn factorize(mut n: u64) -> Vec<(u64, u32)> {
    let mut out = Vec::new();
    let mut p = 2u64;
    while p.saturating_mul(p) <= n {
        if n % p == 0 {
            let mut e = 0;
            while n % p == 0 {
                n /= p;
                e += 1;
            }
            out.push((p, e));
        }
        p += if p == 2 { 1 } else { 2 };
    }
    if n > 1 {
        out.push((n, 1));
    }
    out
}

/// Carmichael exponent `λ(m)` of an odd `m`.
fn carmichael_odd(m: u64) -> u64 {
    factorize(m).into_iter().fold(1u64, |acc, (p, e)| {
        let phi = p.pow(e - 1) * (p - 1);
        (lcm(acc, phi)) as u64
    })
}

fn require_odd(m: u64) -> Result<()> {
    if m % 2 == 0 {
        return Err(Error::usage(format!("modulus must be odd, got {m}")));
    }
    Ok(())
}

/// Multiplicative order of 2 modulo an odd `m`.
///
/// Starts from `λ(m)` and strips prime factors while `2^(l/q) ≡ 1` still
/// holds.
pub fn mult_order(m: u64) -> Result<u64> {
    require_odd(m)?;
    if m == 1 {
        return Ok(1);
    }
    let mut l = carmichael_odd(m);
    for (q, _) in factorize(l) {
        while l % q == 0 && pow2_mod(u128::from(l / q), m) == 1 {
            l /= q;
        }
    }
    Ok(l)
}

/// Order by direct iteration `2, 4, 8, …` with a hard cap at `m`.
pub fn mult_order_by_iteration(m: u64) -> Result<u64> {
    require_odd(m)?;
    if m == 1 {
        return Ok(1);
    }
    let mut x = 2 % m;
    for l in 1..=m {
        if x == 1 {
            return Ok(l);
        }
        x = mul_mod(x, 2, m);
    }
    Err(Error::Consistency(format!("no order of 2 found below {m}")))
}

/// Extended gcd: returns `g = gcd(a, m)` and the inverse of `a/g` modulo
/// `m/g` (0 when `m/g = 1`).
pub fn egcd_modinv(a: u64, m: u64) -> Result<(u64, u64)> {
    if m == 0 {
        return Err(Error::usage("modulus must be at least 1"));
    }
    let a = a % m;
    let (mut r0, mut r1) = (i128::from(m), i128::from(a));
    let (mut t0, mut t1) = (0i128, 1i128);
    while r1 != 0 {
        let q = r0 / r1;
        (r0, r1) = (r1, r0 - q * r1);
        (t0, t1) = (t1, t0 - q * t1);
    }
    let g = r0 as u64;
    let reduced = m / g;
    let inv = t0.rem_euclid(i128::from(reduced)) as u64;
    debug_assert_eq!(mul_mod(a / g, inv, reduced), 1 % reduced);
    Ok((g, inv))
}

/// Largest supported modulus; keeps `2x` and `x + c` inside a `u64`.
pub const MAX_MODULUS: u64 = 1 << 63;

/// Validated `(m, c)`: `m` odd and at least 3, `gcd(c, m) = 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct ResidueParams {
    #[serde(serialize_with = "dec")]
    m: u64,
    #[serde(serialize_with = "dec")]
    c: u64,
}

impl ResidueParams {
    pub fn new(m: u64, c: i64) -> Result<Self> {
        require_odd(m)?;
        if m < 3 {
            return Err(Error::usage(format!("modulus must be at least 3, got {m}")));
        }
        if m > MAX_MODULUS {
            return Err(Error::usage(format!("modulus must be at most 2^63, got {m}")));
        }
        let c = i128::from(c).rem_euclid(i128::from(m)) as u64;
        if gcd(c, m) != 1 {
            return Err(Error::usage(format!("gcd(c, m) = {} != 1", gcd(c, m))));
        }
        Ok(ResidueParams { m, c })
    }

    pub fn m(&self) -> u64 {
        self.m
    }

    /// `c` reduced into `[0, m)`.
    pub fn c(&self) -> u64 {
        self.c
    }

    fn check_target(&self, t: u64) -> Result<()> {
        if t >= self.m {
            return Err(Error::usage(format!("target {t} outside [0, {})", self.m)));
        }
        Ok(())
    }

    /// Period of `v(n)`: `lcm(ord(2, m), m)`.
    pub fn period(&self) -> Result<u128> {
        Ok(lcm(mult_order(self.m)?, self.m))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct ChainLevel {
    #[serde(serialize_with = "dec")]
    pub m: u64,
    #[serde(serialize_with = "dec")]
    pub order: u64,
    #[serde(serialize_with = "dec")]
    pub delta: u64,
}

/// The tower `m_0 = m`, `m_{i+1} = gcd(ord(2, m_i), m_i)`, ending at `Δ = 1`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ReductionChain {
    pub levels: Vec<ChainLevel>,
}

impl ReductionChain {
    /// Checks oddness, strict decrease, `ord(2, m_i) < m_i` and the final `Δ = 1`.
    pub fn verify(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Consistency(msg));
        let Some(last) = self.levels.last() else {
            return fail("empty reduction chain".into());
        };
        if last.delta != 1 {
            return fail(format!("chain ends at Δ = {}", last.delta));
        }
        for (i, lvl) in self.levels.iter().enumerate() {
            if lvl.m % 2 == 0 || lvl.order >= lvl.m || gcd(lvl.order, lvl.m) != lvl.delta {
                return fail(format!("bad level {i}: {lvl:?}"));
            }
            if let Some(next) = self.levels.get(i + 1) {
                if next.m != lvl.delta || next.m >= lvl.m {
                    return fail(format!("level {} does not descend from {i}", i + 1));
                }
            }
        }
        Ok(())
    }
}

pub fn reduction_chain(m: u64) -> Result<ReductionChain> {
    require_odd(m)?;
    if m < 3 {
        return Err(Error::usage(format!("modulus must be at least 3, got {m}")));
    }
    let mut levels = Vec::new();
    let mut cur = m;
    loop {
        let order = mult_order(cur)?;
        let delta = gcd(order, cur);
        levels.push(ChainLevel {
            m: cur,
            order,
            delta,
        });
        if delta == 1 {
            break;
        }
        if delta >= cur {
            return Err(Error::Consistency(format!(
                "reduction stalled at m = {cur} (Δ = {delta})"
            )));
        }
        cur = delta;
    }
    Ok(ReductionChain { levels })
}

/// Result of enumerating `v(n)` over one period.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Coverage {
    #[serde(flatten)]
    pub params: ResidueParams,
    /// Number of distinct residues visited, `D(m)`.
    #[serde(serialize_with = "dec")]
    pub visited: u64,
    #[serde(serialize_with = "dec")]
    pub period: u128,
    /// How many terms were enumerated before every class was seen.
    #[serde(serialize_with = "dec")]
    pub steps: u128,
    #[serde(serialize_with = "dec_vec")]
    pub missing: Vec<u64>,
}

impl Coverage {
    pub fn is_complete(&self) -> bool {
        self.visited == self.params.m
    }
}

/// Enumerates `v(n)` for `n` in `[0, lcm(ord(2, m), m))`, stopping early
/// once all `m` classes are seen. Never fails on incomplete coverage.
pub fn enumerate_coverage(params: &ResidueParams) -> Result<Coverage> {
    let (m, c) = (params.m, params.c);
    let period = params.period()?;
    let mut seen = vec![0u64; (m as usize).div_ceil(64)];
    let mut visited = 0u64;
    let (mut pow, mut lin) = (1 % m, 0u64);
    let mut n: u128 = 0;
    while n < period && visited < m {
        let mut v = pow + lin;
        if v >= m {
            v -= m;
        }
        let (w, b) = ((v / 64) as usize, v % 64);
        if seen[w] >> b & 1 == 0 {
            seen[w] |= 1 << b;
            visited += 1;
        }
        pow <<= 1;
        if pow >= m {
            pow -= m;
        }
        lin += c;
        if lin >= m {
            lin -= m;
        }
        n += 1;
    }
    let missing = (0..m)
        .filter(|&v| seen[(v / 64) as usize] >> (v % 64) & 1 == 0)
        .collect();
    Ok(Coverage {
        params: *params,
        visited,
        period,
        steps: n,
        missing,
    })
}

/// `D(m)` by brute force. Anything short of `m` is reported as an internal
/// consistency failure, since every class is provably reachable.
pub fn cover_count(params: &ResidueParams) -> Result<Coverage> {
    let cov = enumerate_coverage(params)?;
    if !cov.is_complete() {
        return Err(Error::Consistency(format!(
            "D({}) = {} for c = {}; missing {:?}",
            params.m, cov.visited, params.c, cov.missing
        )));
    }
    Ok(cov)
}

/// Smallest `n` in one period with `v(n) = t`.
pub fn brute_solve(params: &ResidueParams, t: u64) -> Result<u64> {
    params.check_target(t)?;
    let (m, c) = (params.m, params.c);
    let period = params.period()?;
    let (mut pow, mut lin) = (1 % m, 0u64);
    let mut n: u128 = 0;
    while n < period {
        let mut v = pow + lin;
        if v >= m {
            v -= m;
        }
        if v == t {
            return u64::try_from(n).map_err(|_| Error::Consistency("witness overflow".into()));
        }
        pow <<= 1;
        if pow >= m {
            pow -= m;
        }
        lin += c;
        if lin >= m {
            lin -= m;
        }
        n += 1;
    }
    Err(Error::Consistency(format!(
        "no n in one period with 2^n + {c}n ≡ {t} (mod {m})"
    )))
}

/// Smallest witness for every target at once; `None` marks unreachable
/// classes (which would be a bug).
pub fn first_hits(params: &ResidueParams) -> Result<Vec<Option<u64>>> {
    let (m, c) = (params.m, params.c);
    let period = params.period()?;
    let mut hits = vec![None; m as usize];
    let mut found = 0u64;
    let (mut pow, mut lin) = (1 % m, 0u64);
    let mut n: u64 = 0;
    while u128::from(n) < period && found < m {
        let mut v = pow + lin;
        if v >= m {
            v -= m;
        }
        if hits[v as usize].is_none() {
            hits[v as usize] = Some(n);
            found += 1;
        }
        pow <<= 1;
        if pow >= m {
            pow -= m;
        }
        lin += c;
        if lin >= m {
            lin -= m;
        }
        n += 1;
    }
    Ok(hits)
}

/// One lift in the constructive solution.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TraceLevel {
    #[serde(serialize_with = "dec")]
    pub m: u64,
    #[serde(serialize_with = "dec")]
    pub order: u64,
    #[serde(serialize_with = "dec")]
    pub delta: u64,
    /// `t mod m` at this level.
    #[serde(serialize_with = "dec")]
    pub target: u64,
    /// Witness modulo `delta` handed up from the level below.
    #[serde(serialize_with = "dec")]
    pub sub_witness: u128,
    /// `k` in `n = sub_witness + k * order`.
    #[serde(serialize_with = "dec")]
    pub multiplier: u64,
    #[serde(serialize_with = "dec")]
    pub witness: u128,
}

/// Levels listed from the top modulus down to the base of the chain.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SolveTrace {
    pub levels: Vec<TraceLevel>,
    #[serde(serialize_with = "dec")]
    pub witness: u128,
}

impl SolveTrace {
    /// Recomputes the witness from the multipliers alone, bottom up.
    pub fn replay(&self) -> Option<u128> {
        let mut r: u128 = 0;
        for lvl in self.levels.iter().rev() {
            r = r.checked_add(u128::from(lvl.multiplier).checked_mul(u128::from(lvl.order))?)?;
        }
        Some(r)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Solution {
    #[serde(flatten)]
    pub params: ResidueParams,
    #[serde(serialize_with = "dec")]
    pub target: u64,
    #[serde(serialize_with = "dec")]
    pub witness: u128,
    pub trace: SolveTrace,
}

/// Constructive solver for fixed `(m, c)`; the reduction chain is computed
/// once and reused across targets.
#[derive(Debug, Clone)]
pub struct ResidueSolver {
    params: ResidueParams,
    chain: ReductionChain,
}

impl ResidueSolver {
    pub fn new(params: ResidueParams) -> Result<Self> {
        let chain = reduction_chain(params.m)?;
        Ok(ResidueSolver { params, chain })
    }

    pub fn chain(&self) -> &ReductionChain {
        &self.chain
    }

    /// Some `n` with `2^n + c n ≡ t (mod m)`, not necessarily the smallest.
    pub fn solve(&self, t: u64) -> Result<Solution> {
        self.params.check_target(t)?;
        let c = self.params.c;
        let mut levels = Vec::with_capacity(self.chain.levels.len());
        // At the base Δ = 1, so any r solves the problem modulo Δ.
        let mut r: u128 = 0;
        for lvl in self.chain.levels.iter().rev() {
            let m = lvl.m;
            let target = t % m;
            let v = evaluate(m, c, r);
            let a = mul_mod(c % m, lvl.order % m, m);
            let (g, inv) = egcd_modinv(a, m)?;
            if g != lvl.delta {
                return Err(Error::Consistency(format!(
                    "gcd(c·l, m) = {g} but Δ = {} at m = {m}",
                    lvl.delta
                )));
            }
            let diff = (target + m - v) % m;
            if diff % g != 0 {
                return Err(Error::Consistency(format!(
                    "Δ = {g} does not divide t - v = {diff} at m = {m}"
                )));
            }
            let k = mul_mod(diff / g, inv, m / g);
            let n = u128::from(k)
                .checked_mul(u128::from(lvl.order))
                .and_then(|x| x.checked_add(r))
                .ok_or_else(|| Error::Consistency("witness overflowed 128 bits".into()))?;
            if evaluate(m, c, n) != target {
                return Err(Error::Consistency(format!(
                    "lift at m = {m} produced non-witness {n}"
                )));
            }
            levels.push(TraceLevel {
                m,
                order: lvl.order,
                delta: lvl.delta,
                target,
                sub_witness: r,
                multiplier: k,
                witness: n,
            });
            r = n;
        }
        levels.reverse();
        if evaluate(self.params.m, c, r) != t {
            return Err(Error::Consistency(format!(
                "witness {r} fails substitution for t = {t}"
            )));
        }
        Ok(Solution {
            params: self.params,
            target: t,
            witness: r,
            trace: SolveTrace {
                levels,
                witness: r,
            },
        })
    }
}

pub fn solve_residue(params: &ResidueParams, t: u64) -> Result<Solution> {
    ResidueSolver::new(*params)?.solve(t)
}

/// How `c` is chosen per modulus in a sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CoeffRule {
    Fixed(i64),
    /// `c = m - k`
    FromModulus(u64),
}

impl CoeffRule {
    pub fn resolve(self, m: u64) -> i64 {
        match self {
            CoeffRule::Fixed(c) => c,
            CoeffRule::FromModulus(k) => m as i64 - k as i64,
        }
    }
}

impl std::str::FromStr for CoeffRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if let Some(k) = s.strip_prefix("m-") {
            return k
                .parse()
                .map(CoeffRule::FromModulus)
                .map_err(|_| Error::parse("coefficient", s, "expected m-K"));
        }
        s.parse()
            .map(CoeffRule::Fixed)
            .map_err(|_| Error::parse("coefficient", s, "expected an integer or m-K"))
    }
}

impl std::fmt::Display for CoeffRule {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CoeffRule::Fixed(c) => write!(f, "{c}"),
            CoeffRule::FromModulus(k) => write!(f, "m-{k}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SweepRow {
    #[serde(flatten)]
    pub coverage: Coverage,
    pub ok: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SweepReport {
    pub rows: Vec<SweepRow>,
    pub failures: usize,
}

/// Coverage for every odd `m` in `ms` and every rule in `cs`, skipping pairs
/// with `gcd(c, m) != 1`. Rows come back in input order whatever `exec` is.
pub fn sweep(ms: &[u64], cs: &[CoeffRule], exec: Exec) -> Result<SweepReport> {
    let mut pairs = Vec::new();
    for &m in ms {
        for &rule in cs {
            if let Ok(p) = ResidueParams::new(m, rule.resolve(m)) {
                if !pairs.contains(&p) {
                    pairs.push(p);
                }
            } else {
                require_odd(m)?;
            }
        }
    }
    let rows = exec::map_collect(exec, &pairs, |p| {
        enumerate_coverage(p).map(|coverage| {
            let ok = coverage.is_complete();
            SweepRow { coverage, ok }
        })
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let failures = rows.iter().filter(|r| !r.ok).count();
    Ok(SweepReport { rows, failures })
}

/// Odd integers in `[lo, hi]` that are at least 3.
pub fn odd_moduli(lo: u64, hi: u64) -> Vec<u64> {
    (lo.max(3)..=hi).filter(|m| m % 2 == 1).collect()
}
