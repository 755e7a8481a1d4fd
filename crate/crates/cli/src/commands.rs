use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::Serialize;
use serde_json::{json, Value};

use seqlab_core::residue::{
    self, brute_solve, enumerate_coverage, evaluate, odd_moduli, reduction_chain, CoeffRule,
    ResidueParams, ResidueSolver,
};
use seqlab_core::stats::{
    self, orbit_box_counts, CellSample, DepthRange, ProfileMeta, DEFAULT_INDEPENDENCE_EPSILON,
};
use seqlab_core::{Error, Exec, OrbitSpec};

use crate::config::{CliResult, Settings};
use crate::Format;

pub const BITS_ENV: &str = "SEQLAB_BITS";

/// Largest period for which `residue solve` also reports the minimal witness.
const BRUTE_PERIOD_LIMIT: u128 = 100_000_000;

const DIMENSION_NOTE: &str = "box-dimension estimate from a finite window; \
lower and upper box dimension are not distinguished, and Hausdorff dimension \
(at most the lower box dimension) is not computed";

/// Bits needed to print 15 decimal digits and to convert to `f64`.
const READOUT_DEPTH: u32 = 53;

pub struct Outcome {
    json: Value,
    csv: String,
    pub warnings: Vec<String>,
    /// Reported after the output is written.
    pub failure: Option<Error>,
}

#[derive(Serialize)]
struct Document<'a> {
    tool: &'static str,
    version: &'static str,
    command: &'a str,
    config: &'a BTreeMap<String, String>,
    result: &'a Value,
    #[serde(skip_serializing_if = "<[_]>::is_empty")]
    warnings: &'a [String],
}

impl Outcome {
    fn new(result: impl Serialize, csv: String) -> CliResult<Self> {
        let json = serde_json::to_value(result)
            .map_err(|e| Error::Consistency(format!("serializing result: {e}")))?;
        Ok(Outcome {
            json,
            csv,
            warnings: Vec::new(),
            failure: None,
        })
    }

    pub fn render(
        &self,
        command: &str,
        config: &BTreeMap<String, String>,
        format: Format,
    ) -> CliResult<String> {
        match format {
            Format::Json => {
                let doc = Document {
                    tool: "seqlab",
                    version: env!("CARGO_PKG_VERSION"),
                    command,
                    config,
                    result: &self.json,
                    warnings: &self.warnings,
                };
                let mut s = serde_json::to_string_pretty(&doc)
                    .map_err(|e| Error::Consistency(format!("serializing output: {e}")))?;
                s.push('\n');
                Ok(s)
            }
            Format::Csv => {
                let mut s = format!("# seqlab {}\n# command={command}\n", env!("CARGO_PKG_VERSION"));
                for (k, v) in config {
                    let _ = writeln!(s, "# {k}={v}");
                }
                for w in &self.warnings {
                    let _ = writeln!(s, "# warning: {w}");
                }
                s.push_str(&self.csv);
                Ok(s)
            }
        }
    }
}

/// Parses one orbit spec and settles its bit budget: `--bits` or the config
/// file, else `SEQLAB_BITS`, else the smallest budget for `depth`.
fn orbit_spec(s: &mut Settings, text: &str, n: u64, depth: u32) -> CliResult<OrbitSpec> {
    let spec = parse_spec(s, text, n, true)?;
    let bits = resolve_bits(s, &[&spec], depth)?;
    let spec = spec.with_bits(bits);
    spec.check_budget(depth)?;
    Ok(spec)
}

/// Applies `--seed` and `--start`. A family-default start is recorded only
/// when `record_default` is set, since two specs may default differently.
fn parse_spec(s: &mut Settings, text: &str, n: u64, record_default: bool) -> CliResult<OrbitSpec> {
    let seed: u64 = s.parsed_or("seed", "0")?;
    let mut spec = OrbitSpec::parse(text, n)?.with_seed(seed);
    if let Some(start) = s.parsed::<u64>("start", None)? {
        spec = spec.with_start(start);
    } else if record_default {
        s.record("start", spec.start);
    }
    Ok(spec)
}

fn resolve_bits(s: &mut Settings, specs: &[&OrbitSpec], depth: u32) -> CliResult<u64> {
    if let Some(bits) = s.parsed::<u64>("bits", None)? {
        return Ok(bits);
    }
    let bits = match std::env::var(BITS_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map_err(|_| Error::Usage(format!("invalid {BITS_ENV} `{v}`")))?,
        Err(_) => specs.iter().map(|sp| sp.required_bits(depth)).max().unwrap_or(1),
    };
    s.record("bits", bits);
    Ok(bits)
}

fn depths(s: &mut Settings, default: &str) -> CliResult<Vec<u32>> {
    Ok(s.parsed_or::<DepthRange>("depths", default)?.depths())
}

#[derive(Serialize)]
struct OrbitRow {
    n: u64,
    value: String,
    cell: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    hex: Option<String>,
}

pub fn orbit(s: &mut Settings) -> CliResult<Outcome> {
    let text = s.require("spec")?;
    let n: u64 = s.parsed_or("n", "16")?;
    let depth: u32 = s.parsed_or("depth", "16")?;
    let digits: usize = s.parsed_or("digits", "15")?;
    let hex = s.flag("hex")?;
    DepthRange::new(depth, depth)?;
    let spec = orbit_spec(s, &text, n, depth.max(READOUT_DEPTH))?;
    let mut rows = Vec::new();
    let mut csv = String::from(if hex { "n,value,cell,hex\n" } else { "n,value,cell\n" });
    for p in spec.generate()? {
        let p = p?;
        let row = OrbitRow {
            n: p.n,
            value: p.point.to_decimal(digits),
            cell: p.point.top_bits(depth)?,
            hex: hex.then(|| p.point.to_hex()),
        };
        let _ = write!(csv, "{},{},{}", row.n, row.value, row.cell);
        if let Some(h) = &row.hex {
            let _ = write!(csv, ",{h}");
        }
        csv.push('\n');
        rows.push(row);
    }
    Outcome::new(
        json!({ "spec": ProfileMeta::of(&spec), "depth": depth, "rows": rows }),
        csv,
    )
}

pub fn boxdim(s: &mut Settings) -> CliResult<Outcome> {
    let text = s.require("spec")?;
    let n: u64 = s.parsed_or("n", "10000")?;
    let depths = depths(s, "1..16")?;
    let window: Option<DepthRange> = s.parsed("window", None)?;
    let max = depths.iter().copied().max().unwrap_or(1);
    let spec = orbit_spec(s, &text, n, max)?;
    let profile = orbit_box_counts(&spec, &depths, Exec::default())?;
    let window = match window {
        Some(w) => w,
        None => profile.default_window()?,
    };
    s.record("window", window);
    let estimate = stats::estimate_dimension(&profile, window)?;
    let mut csv = format!(
        "# slope={} intercept={} residual={} window={} saturated={}\n",
        estimate.slope, estimate.intercept, estimate.residual, estimate.window, estimate.saturated
    );
    csv.push_str(&profile.to_csv());
    let mut out = Outcome::new(json!({
            "profile": profile,
            "estimate": estimate,
            "cell_density": profile.cell_density(),
            "note": DIMENSION_NOTE,
        }), csv)?;
    out.warnings.extend(estimate.warning.clone());
    Ok(out)
}

pub fn discrepancy(s: &mut Settings) -> CliResult<Outcome> {
    let text = s.require("spec")?;
    let n: u64 = s.parsed_or("n", "1000")?;
    let spec = orbit_spec(s, &text, n, READOUT_DEPTH)?;
    let values = spec
        .generate()?
        .map(|p| p.map(|p| p.point.to_f64()))
        .collect::<Result<Vec<f64>, Error>>()?;
    let d = stats::star_discrepancy(&values)?;
    Outcome::new(
        json!({ "spec": ProfileMeta::of(&spec), "points": n, "star_discrepancy": d }),
        format!("points,star_discrepancy\n{n},{d}\n"),
    )
}

pub fn entropy(s: &mut Settings) -> CliResult<Outcome> {
    let text = s.require("spec")?;
    let n: u64 = s.parsed_or("n", "10000")?;
    let depths = depths(s, "1..12")?;
    let max = depths.iter().copied().max().unwrap_or(1);
    let spec = orbit_spec(s, &text, n, max)?;
    let profile = CellSample::from_orbit(&spec, max)?
        .entropy_profile(&depths, Exec::default())?
        .with_metadata(ProfileMeta::of(&spec));
    let csv = profile.to_csv();
    Outcome::new(profile, csv)
}

fn params(s: &mut Settings) -> CliResult<ResidueParams> {
    let m: u64 = s
        .parsed("m", None)?
        .ok_or_else(|| Error::Usage("missing required --m".into()))?;
    let c: i64 = s.parsed_or("c", "1")?;
    ResidueParams::new(m, c)
}

pub fn residue_cover(s: &mut Settings) -> CliResult<Outcome> {
    let p = params(s)?;
    let cov = enumerate_coverage(&p)?;
    let csv = format!(
        "m,c,visited,period,steps,missing\n{},{},{},{},{},{}\n",
        p.m(),
        p.c(),
        cov.visited,
        cov.period,
        cov.steps,
        cov.missing.iter().map(u64::to_string).collect::<Vec<_>>().join(" ")
    );
    let complete = cov.is_complete();
    let mut out = Outcome::new(json!({ "coverage": cov, "complete": complete }), csv)?;
    if !complete {
        out.failure = Some(Error::Consistency(format!(
            "D({}) = {} < m with c = {}",
            p.m(),
            cov.visited,
            p.c()
        )));
    }
    Ok(out)
}

pub fn residue_solve(s: &mut Settings) -> CliResult<Outcome> {
    let p = params(s)?;
    let t: u64 = s
        .parsed("t", None)?
        .ok_or_else(|| Error::Usage("missing required --t".into()))?;
    let sol = ResidueSolver::new(p)?.solve(t)?;
    let value = evaluate(p.m(), p.c(), sol.witness);
    let verification = format!(
        "2^{n} + {c}*{n} mod {m} = {value}",
        n = sol.witness,
        c = p.c(),
        m = p.m()
    );
    let verified = value == t;
    let minimal = if p.period()? <= BRUTE_PERIOD_LIMIT {
        Some(brute_solve(&p, t)?.to_string())
    } else {
        None
    };
    let mut csv = format!(
        "# witness={} minimal_witness={} verified={verified}\n# {verification}\n",
        sol.witness,
        minimal.as_deref().unwrap_or("skipped")
    );
    csv.push_str("m,order,delta,target,sub_witness,multiplier,witness\n");
    for l in &sol.trace.levels {
        let _ = writeln!(
            csv,
            "{},{},{},{},{},{},{}",
            l.m, l.order, l.delta, l.target, l.sub_witness, l.multiplier, l.witness
        );
    }
    let mut out = Outcome::new(
        json!({
            "constructive": sol,
            "verification": verification,
            "verified": verified,
            "minimal_witness": minimal,
        }),
        csv,
    )?;
    if !verified {
        out.failure = Some(Error::Consistency(format!("witness fails: {verification}")));
    }
    Ok(out)
}

pub fn residue_chain(s: &mut Settings) -> CliResult<Outcome> {
    let m: u64 = s
        .parsed("m", None)?
        .ok_or_else(|| Error::Usage("missing required --m".into()))?;
    let chain = reduction_chain(m)?;
    let mut csv = String::from("m,order,delta\n");
    for l in &chain.levels {
        let _ = writeln!(csv, "{},{},{}", l.m, l.order, l.delta);
    }
    let check = chain.verify();
    let mut out = Outcome::new(json!({ "chain": chain, "verified": check.is_ok() }), csv)?;
    out.failure = check.err();
    Ok(out)
}

pub fn independence(s: &mut Settings) -> CliResult<Outcome> {
    let texts = s.list("spec");
    let [x_text, y_text] = texts.as_slice() else {
        return Err(Error::Usage(format!(
            "independence needs exactly two --spec values, got {}",
            texts.len()
        )));
    };
    let n: u64 = s.parsed_or("n", "10000")?;
    let depths = depths(s, "1..16")?;
    let window: Option<DepthRange> = s.parsed("window", None)?;
    let epsilon: f64 = s.parsed_or("epsilon", &DEFAULT_INDEPENDENCE_EPSILON.to_string())?;
    let max = depths.iter().copied().max().unwrap_or(1);
    let x = parse_spec(s, x_text, n, false)?;
    let y = parse_spec(s, y_text, n, false)?;
    let bits = resolve_bits(s, &[&x, &y], max)?;
    let (x, y) = (x.with_bits(bits), y.with_bits(bits));
    let report = stats::independence_report(&x, &y, &depths, window, epsilon, Exec::default())?;
    let verdict = report.verdict();
    let mut csv = format!(
        "# dim_x={} dim_y={} dim_sum={} target={} margin={} epsilon={}\n# {verdict}\ndepth,x,y,sum,points\n",
        report.x.estimate.slope,
        report.y.estimate.slope,
        report.sum.estimate.slope,
        report.target,
        report.margin,
        report.epsilon
    );
    for ((ex, ey), es) in report
        .x
        .profile
        .entries
        .iter()
        .zip(&report.y.profile.entries)
        .zip(&report.sum.profile.entries)
    {
        let _ = writeln!(
            csv,
            "{},{},{},{},{}",
            ex.depth, ex.occupied, ey.occupied, es.occupied, ex.points
        );
    }
    let warnings: Vec<String> = [
        ("x", &report.x.estimate),
        ("y", &report.y.estimate),
        ("sum", &report.sum.estimate),
    ]
    .iter()
    .filter_map(|(name, e)| e.warning.as_ref().map(|w| format!("{name}: {w}")))
    .collect();
    let mut out = Outcome::new(json!({ "report": report, "verdict": verdict, "note": DIMENSION_NOTE }), csv)?;
    out.warnings = warnings;
    Ok(out)
}

/// `A..B` inclusive, or a single value. `A > B` is an empty range.
fn modulus_range(text: &str) -> CliResult<(u64, u64)> {
    let num = |v: &str| {
        v.trim()
            .parse::<u64>()
            .map_err(|_| Error::Usage(format!("invalid modulus range `{text}`")))
    };
    match text.split_once("..") {
        Some((a, b)) => Ok((num(a)?, num(b.trim_start_matches('='))?)),
        None => {
            let m = num(text)?;
            Ok((m, m))
        }
    }
}

pub fn sweep(s: &mut Settings) -> CliResult<Outcome> {
    let range = s.require("m")?;
    let (lo, hi) = modulus_range(&range)?;
    let rules = s
        .string("c", Some("1"))
        .unwrap_or_default()
        .split(',')
        .map(str::parse::<CoeffRule>)
        .collect::<Result<Vec<_>, _>>()?;
    let ms = odd_moduli(lo, hi);
    let report = residue::sweep(&ms, &rules, Exec::default())?;
    let mut csv = String::from("m,c,visited,period,steps,ok\n");
    for r in &report.rows {
        let c = &r.coverage;
        let _ = writeln!(
            csv,
            "{},{},{},{},{},{}",
            c.params.m(),
            c.params.c(),
            c.visited,
            c.period,
            c.steps,
            r.ok
        );
    }
    let _ = writeln!(csv, "# rows={} failures={}", report.rows.len(), report.failures);
    let failures = report.failures;
    let mut out = Outcome::new(&report, csv)?;
    if failures > 0 {
        out.failure = Some(Error::Consistency(format!("{failures} moduli not covered")));
    }
    Ok(out)
}
