//! Acceptance suite: one line per criterion, non-zero exit if any fails.
//!
//! Every check uses an oracle written here (modular exponentiation, integer
//! rational orbits, string scanning) rather than the library's own helpers.

use std::collections::HashSet;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use seqlab_core::residue::{
    first_hits, odd_moduli, reduction_chain, sweep, CoeffRule, ResidueParams, ResidueSolver,
};
use seqlab_core::stats::{
    estimate_dimension, orbit_box_counts, star_discrepancy, BoxCountProfile, CellSample,
    DepthRange,
};
use seqlab_core::{empirical_entropy, CirclePoint, Exec, OrbitSpec};

type Check = Result<String, String>;

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

fn pow_mod(mut base: u128, mut e: u128, m: u128) -> u128 {
    let mut acc = 1 % m;
    base %= m;
    while e > 0 {
        if e & 1 == 1 {
            acc = acc * base % m;
        }
        base = base * base % m;
        e >>= 1;
    }
    acc
}

/// `(2^n + c n) mod m`
fn value(m: u64, c: u64, n: u128) -> u64 {
    let m128 = u128::from(m);
    ((pow_mod(2, n, m128) + u128::from(c) * (n % m128)) % m128) as u64
}

fn prime_factors(mut n: u64) -> Vec<u64> {
    let mut out = Vec::new();
    let mut p = 2;
    while p * p <= n {
        if n % p == 0 {
            out.push(p);
            while n % p == 0 {
                n /= p;
            }
        }
        p += 1;
    }
    if n > 1 {
        out.push(n);
    }
    out
}

fn within(elapsed: Duration, limit_secs: u64) -> Result<(), String> {
    if elapsed > Duration::from_secs(limit_secs) {
        return Err(format!("took {elapsed:.2?}, limit {limit_secs}s"));
    }
    Ok(())
}

fn residue_coverage() -> Check {
    let start = Instant::now();
    let ms = odd_moduli(3, 4999);
    let rules = [CoeffRule::Fixed(1), CoeffRule::Fixed(2), CoeffRule::FromModulus(2)];
    let report = sweep(&ms, &rules, Exec::default()).map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    let expected_rows: usize = ms
        .iter()
        .map(|&m| {
            let mut cs: Vec<u64> = [1, 2 % m, m - 2].into_iter().filter(|&c| gcd(c, m) == 1).collect();
            cs.sort_unstable();
            cs.dedup();
            cs.len()
        })
        .sum();
    if report.rows.len() != expected_rows {
        return Err(format!("{} rows, expected {expected_rows}", report.rows.len()));
    }
    if let Some(bad) = report
        .rows
        .iter()
        .find(|r| r.coverage.visited != r.coverage.params.m() || !r.coverage.missing.is_empty())
    {
        return Err(format!("D(m) < m for {:?}", bad.coverage));
    }
    // Independent recount for the small moduli.
    for row in report.rows.iter().filter(|r| r.coverage.params.m() < 400) {
        let (m, c) = (row.coverage.params.m(), row.coverage.params.c());
        let seen: HashSet<u64> = (0..2 * m * m).map(|n| value(m, c, u128::from(n))).collect();
        if seen.len() as u64 != m {
            return Err(format!("oracle recount disagrees at m={m} c={c}"));
        }
    }
    within(elapsed, 120)?;
    Ok(format!(
        "{} (m, c) pairs over odd m in [3, 4999], {} failures, {elapsed:.2?}",
        report.rows.len(),
        report.failures
    ))
}

fn constructive_solver() -> Check {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    for i in 0..1000 {
        let m = 2 * rng.random_range(1..500_000u64) + 1;
        let c = loop {
            let c = rng.random_range(0..m);
            if gcd(c, m) == 1 {
                break c;
            }
        };
        let t = rng.random_range(0..m);
        let params = ResidueParams::new(m, c as i64).map_err(|e| e.to_string())?;
        let sol = ResidueSolver::new(params)
            .and_then(|s| s.solve(t))
            .map_err(|e| format!("triple {i} ({m}, {c}, {t}): {e}"))?;
        if value(m, c, sol.witness) != t {
            return Err(format!("triple {i}: n = {} fails (m={m}, c={c}, t={t})", sol.witness));
        }
    }
    let mut brute_pairs = 0u64;
    for m in odd_moduli(3, 2000) {
        let mut cs: Vec<u64> = [1, 2, m - 2].into_iter().filter(|&c| gcd(c, m) == 1).collect();
        cs.sort_unstable();
        cs.dedup();
        for c in cs {
            let params = ResidueParams::new(m, c as i64).map_err(|e| e.to_string())?;
            let hits = first_hits(&params).map_err(|e| e.to_string())?;
            let solver = ResidueSolver::new(params).map_err(|e| e.to_string())?;
            for (t, hit) in hits.iter().enumerate() {
                let t = t as u64;
                let solved = solver.solve(t).ok().filter(|s| value(m, c, s.witness) == t);
                let brute = hit.filter(|&n| value(m, c, u128::from(n)) == t);
                if solved.is_some() != brute.is_some() {
                    return Err(format!("validity differs at m={m} c={c} t={t}"));
                }
                if let (Some(s), Some(b)) = (solved, brute) {
                    if u128::from(b) > s.witness {
                        return Err(format!("brute witness {b} not minimal at m={m} c={c} t={t}"));
                    }
                }
                brute_pairs += 1;
            }
        }
    }
    let elapsed = start.elapsed();
    within(elapsed, 60)?;
    Ok(format!(
        "1000 random triples verified, {brute_pairs} (m, c, t) agree with brute force, {elapsed:.2?}"
    ))
}

fn arithmetic_oracle() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let n = 10_000u64;
    for _ in 0..50 {
        let q = 2 * rng.random_range(1..500u64) + 1;
        let p = rng.random_range(1..q);
        let spec = OrbitSpec::parse(&format!("doubling:{p}/{q}"), n)
            .map_err(|e| e.to_string())?
            .with_bits(n + 96);
        let mut r = p % q;
        for pt in spec.generate().map_err(|e| e.to_string())? {
            let pt = pt.map_err(|e| e.to_string())?;
            let expect = (u128::from(r) << 32) / u128::from(q);
            let got = pt.point.top_bits(32).map_err(|e| format!("{p}/{q} n={}: {e}", pt.n))?;
            if u128::from(got) != expect {
                return Err(format!("{p}/{q} step {}: {got} != {expect}", pt.n));
            }
            r = 2 * r % q;
        }
    }
    Ok(format!("50 fractions p/q, {n} steps each at {} bits, all top-32 cells exact", n + 96))
}

fn dimension_calibration() -> Check {
    let depths: Vec<u32> = (4..=12).collect();
    let window = DepthRange::new(4, 12).unwrap();
    let rot = OrbitSpec::parse("rotation:sqrt2", 1 << 18).map_err(|e| e.to_string())?;
    let rot = estimate_dimension(
        &orbit_box_counts(&rot, &depths, Exec::default()).map_err(|e| e.to_string())?,
        window,
    )
    .map_err(|e| e.to_string())?;
    if !(0.98..=1.0).contains(&rot.slope) {
        return Err(format!("rotation slope {}", rot.slope));
    }
    let dbl = OrbitSpec::parse("doubling:1/7", 10_000).map_err(|e| e.to_string())?;
    let dbl = estimate_dimension(
        &orbit_box_counts(&dbl, &depths, Exec::default()).map_err(|e| e.to_string())?,
        window,
    )
    .map_err(|e| e.to_string())?;
    if !(0.0..=0.01).contains(&dbl.slope) {
        return Err(format!("doubling(1/7) slope {}", dbl.slope));
    }
    let synthetic: Vec<(u32, u64)> = depths.iter().map(|&k| (k, 1u64 << k)).collect();
    let syn = estimate_dimension(&BoxCountProfile::from_counts(&synthetic, 1 << 30), window)
        .map_err(|e| e.to_string())?;
    if syn.slope != 1.0 {
        return Err(format!("synthetic slope {}", syn.slope));
    }
    Ok(format!(
        "rotation {:.6}, doubling(1/7) {:.6}, synthetic {}",
        rot.slope, dbl.slope, syn.slope
    ))
}

fn combined_trend() -> Check {
    let spec = OrbitSpec::parse("combined:poly=0,sqrt2;d=champernowne", 1 << 16)
        .map_err(|e| e.to_string())?;
    let depths: Vec<u32> = (4..=12).collect();
    let profile = orbit_box_counts(&spec, &depths, Exec::default()).map_err(|e| e.to_string())?;
    let window = profile.default_window().map_err(|e| e.to_string())?;
    let est = estimate_dimension(&profile, window).map_err(|e| e.to_string())?;
    if est.saturated || est.slope < 0.95 {
        return Err(format!("slope {} over {window}, saturated {}", est.slope, est.saturated));
    }
    Ok(format!("slope {:.6} over guarded window {window}", est.slope))
}

fn entropy() -> Check {
    let grid: Vec<CirclePoint> = (0..1024).map(|i| CirclePoint::from_u64(i, 10)).collect();
    let h = empirical_entropy(&grid, 10).map_err(|e| e.to_string())?;
    if h != 10.0 {
        return Err(format!("uniform grid entropy {h}"));
    }
    let specs = [
        "rotation:sqrt2",
        "rotation:1/3",
        "rotation:355/113",
        "doubling:1/7",
        "doubling:5/127",
        "doubling:champernowne",
        "poly:0,0,sqrt3",
        "poly:1/5,1/3,1/7",
        "combined:poly=0,sqrt2;d=champernowne",
        "combined:poly=0,1/2;d=1/3",
        "alphabeta:a=sqrt2;b=sqrt3;strategy=greedy",
        "alphabeta:a=1/4;b=1/2;strategy=periodic:AB",
        "alphabeta:a=sqrt2;b=sqrt5;strategy=random:0.5:1",
    ];
    let depths: Vec<u32> = (1..=16).collect();
    let mut checked = 0;
    for text in specs {
        for n in [1u64, 10, 1000, 20_000] {
            let spec = OrbitSpec::parse(text, n).map_err(|e| e.to_string())?;
            let sample = CellSample::from_orbit(&spec, 16).map_err(|e| e.to_string())?;
            let counts = sample.box_counts(&depths, Exec::default()).map_err(|e| e.to_string())?;
            let ent = sample.entropy_profile(&depths, Exec::default()).map_err(|e| e.to_string())?;
            for (c, e) in counts.entries.iter().zip(&ent.entries) {
                if e.entropy > (c.occupied as f64).log2() + 1e-9 {
                    return Err(format!("{text} N={n} k={}: H {} > log2 {}", c.depth, e.entropy, c.occupied));
                }
                checked += 1;
            }
        }
    }
    Ok(format!("uniform grid H_10 = {h}, H_k <= log2 N_k on {checked} (profile, depth) pairs"))
}

fn discrepancy() -> Check {
    for n in [10usize, 1000] {
        let grid: Vec<f64> = (0..n).map(|i| i as f64 / n as f64).collect();
        let d = star_discrepancy(&grid).map_err(|e| e.to_string())?;
        if d != 1.0 / n as f64 {
            return Err(format!("grid N={n}: {d}"));
        }
    }
    let pts = OrbitSpec::parse("rotation:sqrt2", 100_000)
        .and_then(|s| s.points())
        .map_err(|e| e.to_string())?;
    let xs: Vec<f64> = pts.iter().map(CirclePoint::to_f64).collect();
    let d = star_discrepancy(&xs).map_err(|e| e.to_string())?;
    if d >= 1e-2 {
        return Err(format!("rotation D* = {d}"));
    }
    Ok(format!("grids exact at 1/N for N = 10, 1000; rotation N = 1e5 gives {d:.3e}"))
}

fn doubling_windows() -> Check {
    let n = 10_000usize;
    let mut digits = String::new();
    let mut i = 1u64;
    while digits.len() < n + 12 {
        digits.push_str(&format!("{i:b}"));
        i += 1;
    }
    let spec = OrbitSpec::parse("doubling:champernowne", n as u64).map_err(|e| e.to_string())?;
    let depths: Vec<u32> = (1..=12).collect();
    let profile = orbit_box_counts(&spec, &depths, Exec::default()).map_err(|e| e.to_string())?;
    for e in &profile.entries {
        let k = e.depth as usize;
        let windows: HashSet<&str> = (0..n).map(|j| &digits[j..j + k]).collect();
        if windows.len() as u64 != e.occupied {
            return Err(format!("k={k}: N_k {} vs {} windows", e.occupied, windows.len()));
        }
    }
    Ok(format!(
        "N_k equals distinct-window count for k = 1..12 (N_12 = {})",
        profile.occupied(12).unwrap_or(0)
    ))
}

fn chain_termination() -> Check {
    let start = Instant::now();
    let mut longest = 0;
    for m in odd_moduli(3, 100_000) {
        let chain = reduction_chain(m).map_err(|e| format!("m={m}: {e}"))?;
        let mut prev = u64::MAX;
        for (i, lvl) in chain.levels.iter().enumerate() {
            if lvl.m >= prev {
                return Err(format!("m={m}: level {i} does not decrease"));
            }
            prev = lvl.m;
            let l = lvl.order;
            if pow_mod(2, u128::from(l), u128::from(lvl.m)) != 1
                || prime_factors(l)
                    .iter()
                    .any(|p| pow_mod(2, u128::from(l / p), u128::from(lvl.m)) == 1)
            {
                return Err(format!("m={m}: {l} is not the order of 2 mod {}", lvl.m));
            }
            if lvl.delta != gcd(l, lvl.m) {
                return Err(format!("m={m}: wrong Δ at level {i}"));
            }
            if let Some(next) = chain.levels.get(i + 1) {
                if next.m != lvl.delta {
                    return Err(format!("m={m}: level {} is not Δ of level {i}", i + 1));
                }
            }
        }
        if chain.levels.last().map(|l| l.delta) != Some(1) {
            return Err(format!("m={m}: chain does not end at Δ = 1"));
        }
        longest = longest.max(chain.levels.len());
    }
    let elapsed = start.elapsed();
    within(elapsed, 60)?;
    Ok(format!("all odd m <= 1e5 terminate at Δ = 1, longest chain {longest} levels, {elapsed:.2?}"))
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Check); 9] = [
        ("residue coverage sweep", residue_coverage),
        ("constructive solver", constructive_solver),
        ("exact arithmetic oracle", arithmetic_oracle),
        ("dimension calibration", dimension_calibration),
        ("combined orbit dimension trend", combined_trend),
        ("entropy", entropy),
        ("star discrepancy", discrepancy),
        ("doubling window identity", doubling_windows),
        ("reduction chain termination", chain_termination),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        match check() {
            Ok(detail) => println!("PASS  {}. {name}: {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("FAIL  {}. {name}: {detail}", i + 1);
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
