//! End-to-end acceptance checks on the shipped scenarios. Prints one
//! PASS/FAIL line per criterion and exits nonzero if any fails.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::process::ExitCode;
use std::time::Instant;

use eit_sim::config::{parse_value, ScenarioConfig};
use eit_sim::output::write_sweep;
use eit_sim::runner::{run_scenario, run_sweep, RunRecord};
use eit_sim::scenarios;

type Outcome = Result<String, String>;

fn scenario(name: &str) -> ScenarioConfig {
    let mut c = scenarios::load(name).expect("shipped").expect("parses");
    c.sweep = None;
    c
}

fn run(c: &ScenarioConfig) -> Result<RunRecord, String> {
    run_scenario(c).map_err(|e| format!("{}: {e}", c.name))
}

fn sweep(c: &ScenarioConfig, path: &str, values: &[&str]) -> Result<Vec<RunRecord>, String> {
    let values: Vec<_> = values.iter().map(|v| parse_value(v)).collect();
    run_sweep(c, path, &values, 4)
        .map_err(|e| e.to_string())?
        .into_iter()
        .map(|(v, r)| r.map_err(|e| format!("{path} = {v}: {e}")))
        .collect()
}

fn scalar(r: &RunRecord, kind: &str, key: &str) -> f64 {
    r.measurement(kind).and_then(|m| m.scalar(key)).unwrap_or_else(|| panic!("{}: missing {kind}.{key}", r.name))
}

fn check(ok: bool, detail: String) -> Outcome {
    if ok { Ok(detail) } else { Err(detail) }
}

fn beer_lambert() -> Outcome {
    let base = scenario("beer_lambert");
    let mut ok = true;
    let mut parts = Vec::new();
    for r in sweep(&base, "medium.optical_depth", &["0.5", "2.0", "5.0"])?.iter().zip([0.5f64, 2.0, 5.0]) {
        let (rec, d) = r;
        let t = scalar(rec, "transmission", "transmission_full");
        let err = t / (-d).exp() - 1.0;
        ok &= err.abs() < 0.02 && rec.wall_time_s < 30.0;
        parts.push(format!("d={d}: T/exp(-d)-1={err:+.4} ({:.1}s)", rec.wall_time_s));
    }
    check(ok, parts.join(", "))
}

fn dark_state() -> Outcome {
    let r = run(&scenario("dark_state_cw"))?;
    let t = scalar(&r, "transmission", "transmission_full");
    let m = scalar(&r, "margins", "min_margin");
    check(t >= 0.99 && m > 10.0 && r.wall_time_s < 60.0, format!("T={t:.5}, min margin {m:.1}"))
}

struct CombRuns {
    cw: RunRecord,
    matched: RunRecord,
    matched_cw: RunRecord,
}

fn comb_runs() -> Result<CombRuns, String> {
    let cw = run(&scenario("fig1c_transmitted_spectrum"))?;
    let m = scenario("fig1d_matched_probe");
    let mut pair = sweep(&m, "control.components.0.modulation.duty", &["0.2", "1.0"])?;
    let matched_cw = pair.pop().expect("two members");
    let matched = pair.pop().expect("two members");
    Ok(CombRuns { cw, matched, matched_cw })
}

fn procrustean(runs: &CombRuns) -> Outcome {
    let ratio = scalar(&runs.cw, "zero_span", "transmission") / scalar(&runs.matched, "zero_span", "transmission");
    let wall = runs.cw.wall_time_s + runs.matched.wall_time_s;
    check((ratio - 0.20).abs() <= 0.03 && wall < 300.0, format!("zero-span ratio {ratio:.4}"))
}

fn matched_lossless(runs: &CombRuns) -> Outcome {
    let t = scalar(&runs.matched, "transmission", "transmission_full");
    let t_cw = scalar(&runs.matched_cw, "transmission", "transmission_full");
    let diff = t / t_cw - 1.0;
    check(diff.abs() < 0.02, format!("T={t:.5} vs cw pair {t_cw:.5} ({diff:+.4})"))
}

fn comb_spectrum(runs: &CombRuns) -> Outcome {
    let s = |k| scalar(&runs.cw, "spectrum", k);
    let (ratio, lines, peak) = (s("secondary_ratio"), s("line_count"), s("peak_freq_Hz"));
    check(
        ratio < 0.01 && lines >= 3.0 && (peak / 1e6 - (peak / 1e6).round()).abs() * 1e6 <= s("bin_width_Hz"),
        format!("{lines} lines, secondary/line {ratio:.4}, strongest at {peak} Hz"),
    )
}

fn average_power_law() -> Outcome {
    let base = scenario("fig3_groupvel");
    let delay = |r: &RunRecord| scalar(r, "delay", "delay_s_full");
    let mut delays = Vec::new();
    let mods = sweep(&base, "control.components.0.modulation.frequency", &["0.5 MHz", "1 MHz", "2 MHz"])?;
    delays.extend(mods.iter().zip(["0.5 MHz", "1 MHz", "2 MHz"]).map(|(r, l)| (l.to_string(), delay(r))));
    let duties = sweep(&base, "control.components.0.modulation.duty", &["0.1", "0.5", "0.8", "1.0"])?;
    delays.extend(duties.iter().zip(["duty 0.1", "duty 0.5", "duty 0.8", "cw"]).map(|(r, l)| (l.to_string(), delay(r))));
    let max = delays.iter().map(|d| d.1).fold(f64::MIN, f64::max);
    let min = delays.iter().map(|d| d.1).fold(f64::MAX, f64::min);
    let spread = max / min - 1.0;

    let powers = ["2.185096861 MHz", "3.885712757 MHz", "6.909882989 MHz"];
    let decade = sweep(&base, "control.components.0.rms_rabi", &powers)?;
    let products: Vec<f64> = decade.iter().map(|r| delay(r) * scalar(r, "delay", "average_control_power")).collect();
    let pmax = products.iter().cloned().fold(f64::MIN, f64::max);
    let pmin = products.iter().cloned().fold(f64::MAX, f64::min);
    let product_spread = pmax / pmin - 1.0;
    check(
        spread < 0.05 && product_spread < 0.05,
        format!("equal-power delay spread {spread:.4} over {} waveforms, delay*power spread {product_spread:.4} over a decade", delays.len()),
    )
}

fn cross_solver() -> Outcome {
    let r = run(&scenario("fig2a_broadband_delay"))?;
    let l2 = scalar(&r, "cross_solver", "envelope_relative_l2");
    let m = scalar(&r, "margins", "min_margin");
    check(l2 < 0.05 && m > 10.0, format!("envelope L2 {l2:.4} (raw {:.4}), min margin {m:.1}", scalar(&r, "cross_solver", "relative_l2")))
}

fn storage() -> Outcome {
    let base = scenario("fig2b_broadband_storage");
    let runs = sweep(&base, "medium.ground_decoherence", &["0 per_s", "2e4 per_s"])?;
    let s = |i: usize, k| scalar(&runs[i], "storage", k);
    let contained = s(0, "span_start_m") > 0.0 && s(0, "span_end_m") < 0.05;
    let ratio = s(1, "efficiency") / s(1, "expected_efficiency") - 1.0;
    check(
        s(0, "efficiency") > 0.95 && s(0, "added_delay_error_steps").abs() <= 2.0 && contained && ratio.abs() < 0.05,
        format!(
            "eff {:.4}, added delay off by {:.2} steps; with decoherence eff {:.4} vs {:.4}",
            s(0, "efficiency"),
            s(0, "added_delay_error_steps"),
            s(1, "efficiency"),
            s(1, "expected_efficiency")
        ),
    )
}

fn conversion() -> Outcome {
    let r = run(&scenario("fig4a_conversion"))?;
    let c = |k| scalar(&r, "conversion", k);
    let m = scalar(&r, "margins", "min_margin");
    check(
        c("peak_shift_Hz") == c("expected_shift_Hz") && c("efficiency") >= 0.9 && m > 10.0,
        format!(
            "shift {} Hz, efficiency {:.4} (measured in the lab: 0.87), min margin {m:.1}",
            c("peak_shift_Hz"),
            c("efficiency")
        ),
    )
}

fn two_color() -> Outcome {
    let base = scenario("fig4b_two_color");
    let values = ["1.2e9 rad_s", "4e8 rad_s", "1.3333333333333334e8 rad_s"];
    let mut ok = true;
    let mut parts = Vec::new();
    for r in sweep(&base, "control.components.1.rabi", &values)? {
        let c = |k| scalar(&r, "conversion", k);
        let ratio = c("color_ratio") / c("control_power_ratio") - 1.0;
        let gap = c("centroid_gap_steps");
        let delay = c("delay_s") / c("delay_s_average_power") - 1.0;
        ok &= ratio.abs() < 0.05 && gap.abs() <= 2.0 && delay.abs() < 0.05;
        parts.push(format!("P2/P1={:.3}: ratio {ratio:+.4}, gap {gap:+.2} steps, delay {delay:+.4}", c("control_power_ratio")));
    }
    check(ok, parts.join("; "))
}

fn linewidth() -> Outcome {
    let r = run(&scenario("eit_linewidth"))?;
    let e = scalar(&r, "linewidth", "enhancement");
    check((e / 50.0 - 1.0).abs() <= 0.05, format!("linewidth {:.0} Hz, enhancement {e:.2}", scalar(&r, "linewidth", "gamma_eit_Hz")))
}

fn monotonicity() -> Outcome {
    let c = scenarios::load("adiabaticity_breakdown").expect("shipped").expect("parses");
    let s = c.sweep.clone().expect("sweep");
    let values: Vec<String> = s.values.iter().map(|v| v.as_str().expect("quantity").to_string()).collect();
    let refs: Vec<&str> = values.iter().map(String::as_str).collect();
    let runs = sweep(&scenario("adiabaticity_breakdown"), &s.parameter, &refs)?;
    let t: Vec<f64> = runs.iter().map(|r| scalar(r, "transmission", "transmission_full")).collect();
    let m: Vec<f64> = runs.iter().map(|r| scalar(r, "margins", "min_margin")).collect();
    let decreasing = t.windows(2).all(|w| w[1] < w[0]);
    let spans = m[0] > 1.0 && m[m.len() - 1] < 1.0;
    check(
        decreasing && spans,
        format!("T {:.4} -> {:.4} over margins {:.2} -> {:.2}", t[0], t[t.len() - 1], m[0], m[m.len() - 1]),
    )
}

fn read_tree(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    for entry in walk(dir) {
        let rel = entry.strip_prefix(dir).unwrap().to_string_lossy().into_owned();
        if !rel.ends_with("timing.json") {
            out.insert(rel, fs::read(&entry).unwrap());
        }
    }
    out
}

fn walk(dir: &Path) -> Vec<std::path::PathBuf> {
    let mut files = Vec::new();
    for e in fs::read_dir(dir).unwrap() {
        let p = e.unwrap().path();
        if p.is_dir() { files.extend(walk(&p)) } else { files.push(p) }
    }
    files
}

fn determinism_and_convergence() -> Outcome {
    let c = scenarios::load("beer_lambert").expect("shipped").expect("parses");
    let s = c.sweep.clone().expect("sweep");
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut trees = Vec::new();
    for workers in [1, 3] {
        let members = run_sweep(&c, &s.parameter, &s.values, workers).map_err(|e| e.to_string())?;
        let dir = tmp.path().join(format!("w{workers}"));
        write_sweep(&s.parameter, &members, &dir).map_err(|e| e.to_string())?;
        trees.push(read_tree(&dir));
    }
    let identical = trees[0] == trees[1];

    let mut worst = (0.0f64, String::new());
    for name in ["beer_lambert", "dark_state_cw", "fig2a_broadband_delay"] {
        let base = scenario(name);
        let coarse = run(&base)?.flat_scalars();
        let fine = run(&base.with_resolution(2.0).map_err(|e| e.to_string())?)?.flat_scalars();
        for (k, a) in &coarse {
            let b = fine[k];
            let change = if a == &b { 0.0 } else { (b - a).abs() / a.abs().max(b.abs()) };
            if change > worst.0 || change.is_nan() {
                worst = (change, format!("{name}: {k}"));
            }
        }
    }
    check(
        identical && worst.0 < 0.005,
        format!(
            "{} files identical across worker counts: {identical}; largest change on halving steps {:.5} ({})",
            trees[0].len(),
            worst.0,
            worst.1
        ),
    )
}

fn main() -> ExitCode {
    let started = Instant::now();
    let comb = comb_runs();
    let with_comb = |f: fn(&CombRuns) -> Outcome| comb.as_ref().map_err(Clone::clone).and_then(f);
    let results: Vec<(&str, Outcome)> = vec![
        ("absorption with the control off", beer_lambert()),
        ("dark-state transparency", dark_state()),
        ("mode filtering of a cw probe", with_comb(procrustean)),
        ("matched probe is lossless", with_comb(matched_lossless)),
        ("comb spectrum", with_comb(comb_spectrum)),
        ("delay set by average power", average_power_law()),
        ("solvers agree", cross_solver()),
        ("storage and retrieval", storage()),
        ("frequency conversion", conversion()),
        ("two-color splitting", two_color()),
        ("delay-bandwidth enhancement", linewidth()),
        ("adiabaticity breakdown is monotone", monotonicity()),
        ("determinism and convergence", determinism_and_convergence()),
    ];
    let mut failed = 0;
    for (i, (name, outcome)) in results.iter().enumerate() {
        match outcome {
            Ok(detail) => println!("criterion {:2} {name}: PASS  {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("criterion {:2} {name}: FAIL  {detail}", i + 1);
            }
        }
    }
    println!("{} of {} criteria passed in {:.0} s", results.len() - failed, results.len(), started.elapsed().as_secs_f64());
    if failed == 0 { ExitCode::SUCCESS } else { ExitCode::FAILURE }
}
