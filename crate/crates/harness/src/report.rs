//! Results tables (text and CSV), a cross-seed summary and PNG plots.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use image::{Rgb, RgbImage};

use crate::artifacts::{read_json, MetricsRecord, METRICS};
use crate::config::{Arm, ExperimentConfig};
use crate::error::{HarnessError, Result};
use crate::experiment::{
    arm_dir, arm_game, eval_path, init_dir, iter_dir, probes_path, required_arms, EvalTable, Probes,
};

/// `successes/tries` as a percentage with one decimal.
pub fn percent(successes: usize, tries: usize) -> String {
    format!("{:.1}%", 100.0 * successes as f64 / tries.max(1) as f64)
}

fn header(label: &str) -> String {
    match label.split_once('-') {
        Some(("shake", i)) => format!("Shake It-{i}"),
        Some(("snatch", i)) => format!("Snatch It-{i}"),
        _ => "Baseline".to_string(),
    }
}

fn object_name(table: &EvalTable, k: usize) -> String {
    let o = &table.objects[k];
    format!("{}-{}", o.difficulty, o.seed)
}

/// Column totals: successes out of `objects × tries`.
pub fn overall(table: &EvalTable) -> Vec<(usize, usize)> {
    table
        .columns
        .iter()
        .map(|c| (c.successes.iter().sum(), table.tries * c.successes.len()))
        .collect()
}

pub fn text_table(table: &EvalTable, seed: u64) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "Grasping success (out of {} tries), {} regime, seed {seed}",
        table.tries, table.regime
    );
    let heads: Vec<String> = table.columns.iter().map(|c| header(&c.label)).collect();
    let width = heads.iter().map(String::len).max().unwrap_or(8).max(12);
    let _ = write!(s, "{:<16}", "Object");
    for h in &heads {
        let _ = write!(s, " | {h:>width$}");
    }
    s.push('\n');
    s.push_str(&"-".repeat(16 + heads.len() * (width + 3)));
    s.push('\n');
    for k in 0..table.objects.len() {
        let _ = write!(s, "{:<16}", object_name(table, k));
        for c in &table.columns {
            let _ = write!(s, " | {:>width$}", c.successes[k]);
        }
        s.push('\n');
    }
    s.push_str(&"-".repeat(16 + heads.len() * (width + 3)));
    s.push('\n');
    let _ = write!(s, "{:<16}", "Overall");
    for (succ, tries) in overall(table) {
        let cell = format!("{succ}/{tries} {}", percent(succ, tries));
        let _ = write!(s, " | {cell:>width$}");
    }
    s.push('\n');
    s
}

pub fn csv_rows(table: &EvalTable, seed: u64, with_header: bool) -> String {
    let mut s = String::new();
    if with_header {
        s.push_str("seed,object,difficulty");
        for c in &table.columns {
            let _ = write!(s, ",{}", c.label);
        }
        s.push('\n');
    }
    for (k, o) in table.objects.iter().enumerate() {
        let _ = write!(s, "{seed},{},{}", o.seed, o.difficulty);
        for c in &table.columns {
            let _ = write!(s, ",{}", c.successes[k]);
        }
        s.push('\n');
    }
    let _ = write!(s, "{seed},overall,");
    for (succ, _) in overall(table) {
        let _ = write!(s, ",{succ}");
    }
    s.push('\n');
    let _ = write!(s, "{seed},overall_pct,");
    for (succ, tries) in overall(table) {
        let _ = write!(s, ",{:.1}", 100.0 * succ as f64 / tries.max(1) as f64);
    }
    s.push('\n');
    s
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| HarnessError::io(path, e))
}

/// Collection metrics of every iteration of an arm, initial phase first.
pub fn arm_metrics(
    out: &Path,
    seed: u64,
    arm: Arm,
    iterations: usize,
) -> Result<Vec<MetricsRecord>> {
    let mut m = vec![read_json(&init_dir(out, seed).join(METRICS))?];
    let dir = arm_dir(out, seed, arm);
    for i in 0..iterations {
        m.push(read_json(&iter_dir(&dir, i).join(METRICS))?);
    }
    Ok(m)
}

/// Writes every report file for the run in `out`.
pub fn write_report(out: &Path) -> Result<()> {
    let cfg = ExperimentConfig::load(&out.join("config.toml"))?;
    let mut summary = String::new();
    let _ = writeln!(summary, "Experiment {}: seeds {:?}", cfg.name, cfg.seeds);
    for &regime in &cfg.regimes {
        let mut text = String::new();
        let mut csv = String::new();
        let mut means: Vec<(String, f64)> = Vec::new();
        let mut series: Vec<Vec<f64>> = Vec::new();
        for (n, &seed) in cfg.seeds.iter().enumerate() {
            let table: EvalTable = read_json(&eval_path(out, seed, regime))?;
            text.push_str(&text_table(&table, seed));
            text.push('\n');
            csv.push_str(&csv_rows(&table, seed, n == 0));
            let totals = overall(&table);
            for (c, &(succ, tries)) in table.columns.iter().zip(&totals) {
                let rate = succ as f64 / tries.max(1) as f64;
                match means.iter_mut().find(|(l, _)| *l == c.label) {
                    Some(m) => m.1 += rate / cfg.seeds.len() as f64,
                    None => means.push((c.label.clone(), rate / cfg.seeds.len() as f64)),
                }
            }
            let rates: Vec<f64> = totals
                .iter()
                .map(|&(s, t)| s as f64 / t.max(1) as f64)
                .collect();
            series.push(rates);
        }
        let _ = writeln!(summary, "\n{} regime, mean overall success:", regime.name());
        for (label, m) in &means {
            let _ = writeln!(summary, "  {:<12} {:5.1}%", header(label), 100.0 * m);
        }
        write_text(&out.join(format!("results-{}.txt", regime.name())), &text)?;
        write_text(&out.join(format!("results-{}.csv", regime.name())), &csv)?;
        let lines: Vec<Line> = series
            .into_iter()
            .map(|values| Line {
                color: PALETTE[1],
                values,
            })
            .collect();
        plot(
            &out.join(format!("plots/eval-{}.png", regime.name())),
            &lines,
        )?;
    }

    let mut success_lines = Vec::new();
    let mut dislodge_lines = Vec::new();
    let _ = writeln!(
        summary,
        "\nCollection metrics (success rate / dislodge rate):"
    );
    for &seed in &cfg.seeds {
        for arm in required_arms(&cfg.arms) {
            let iterations = arm_game(&cfg, arm).iterations;
            let mut metrics = arm_metrics(out, seed, arm, iterations)?;
            if arm == Arm::ShakeSnatch {
                metrics.remove(0);
            }
            let succ: Vec<f64> = metrics
                .iter()
                .map(|m| m.successes as f64 / m.attempts.max(1) as f64)
                .collect();
            let _ = write!(summary, "  seed {seed} {:<13}", arm.name());
            for m in &metrics {
                let _ = write!(
                    summary,
                    " {}/{}",
                    percent(m.successes, m.attempts),
                    percent(m.dislodged, m.adversary_attempts)
                );
            }
            let attempts: usize = metrics.iter().map(|m| m.attempts).sum();
            let _ = writeln!(summary, "  ({attempts} attempts)");
            let color = PALETTE[arm as usize];
            success_lines.push(Line {
                color,
                values: succ,
            });
            if arm != Arm::Baseline {
                let dis = metrics
                    .iter()
                    .filter(|m| m.adversary_attempts > 0)
                    .map(|m| m.dislodged as f64 / m.adversary_attempts as f64)
                    .collect();
                dislodge_lines.push(Line { color, values: dis });
            }
        }
    }
    plot(&out.join("plots/success.png"), &success_lines)?;
    plot(&out.join("plots/dislodge.png"), &dislodge_lines)?;

    let mut probe_lines = Vec::new();
    for &seed in &cfg.seeds {
        let path = probes_path(out, seed);
        if !path.exists() {
            continue;
        }
        let p: Probes = read_json(&path)?;
        let _ = writeln!(
            summary,
            "\nShake probes, seed {seed} (trained / random / best response):"
        );
        for (i, r) in p.adversary.iter().enumerate() {
            let _ = writeln!(
                summary,
                "  adversary after iteration {i} on {} fixed grasps: {:.3} / {:.3} / {:.3}",
                r.grasps, r.trained, r.random, r.best_response
            );
        }
        for (i, r) in p.protagonist.iter().enumerate() {
            let _ = writeln!(
                summary,
                "  protagonist iteration {i} on {} fresh grasps: {:.3} / {:.3} / {:.3}",
                r.grasps, r.trained, r.random, r.best_response
            );
        }
        probe_lines.push(Line {
            color: PALETTE[1],
            values: p.protagonist.iter().map(|r| r.best_response).collect(),
        });
    }
    if !probe_lines.is_empty() {
        plot(&out.join("plots/vulnerability.png"), &probe_lines)?;
    }
    write_text(&out.join("summary.txt"), &summary)
}

const PALETTE: [Rgb<u8>; 3] = [Rgb([110, 110, 110]), Rgb([30, 90, 200]), Rgb([210, 50, 40])];

struct Line {
    color: Rgb<u8>,
    values: Vec<f64>,
}

const W: u32 = 480;
const H: u32 = 320;
const PAD: i64 = 30;

/// Rates in [0, 1] against their index, gridlines every 10%.
fn plot(path: &Path, lines: &[Line]) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))?;
    }
    let mut img = RgbImage::from_pixel(W, H, Rgb([255, 255, 255]));
    let (x0, y0, x1, y1) = (PAD, H as i64 - PAD, W as i64 - PAD, PAD);
    for k in 0..=10 {
        let y = y0 + (y1 - y0) * k / 10;
        segment(&mut img, (x0, y), (x1, y), Rgb([225, 225, 225]));
    }
    segment(&mut img, (x0, y0), (x1, y0), Rgb([0, 0, 0]));
    segment(&mut img, (x0, y0), (x0, y1), Rgb([0, 0, 0]));
    let n = lines
        .iter()
        .map(|l| l.values.len())
        .max()
        .unwrap_or(1)
        .max(2);
    let at = |i: usize, v: f64| -> (i64, i64) {
        let x = x0 + (x1 - x0) * i as i64 / (n as i64 - 1);
        let y = y0 + ((y1 - y0) as f64 * v.clamp(0.0, 1.0)).round() as i64;
        (x, y)
    };
    for line in lines {
        let pts: Vec<(i64, i64)> = line
            .values
            .iter()
            .enumerate()
            .map(|(i, &v)| at(i, v))
            .collect();
        for w in pts.windows(2) {
            segment(&mut img, w[0], w[1], line.color);
        }
        for &p in &pts {
            for dx in -2..=2 {
                for dy in -2..=2 {
                    put(&mut img, p.0 + dx, p.1 + dy, line.color);
                }
            }
        }
    }
    img.save(path)
        .map_err(|e| HarnessError::artifact(path, e.to_string()))
}

fn put(img: &mut RgbImage, x: i64, y: i64, c: Rgb<u8>) {
    if (0..W as i64).contains(&x) && (0..H as i64).contains(&y) {
        img.put_pixel(x as u32, y as u32, c);
    }
}

/// Bresenham segment.
fn segment(img: &mut RgbImage, a: (i64, i64), b: (i64, i64), c: Rgb<u8>) {
    let (mut x, mut y) = a;
    let (dx, dy) = ((b.0 - x).abs(), -(b.1 - y).abs());
    let (sx, sy) = ((b.0 - x).signum(), (b.1 - y).signum());
    let mut err = dx + dy;
    loop {
        put(img, x, y, c);
        if (x, y) == b {
            break;
        }
        let e2 = 2 * err;
        if e2 >= dy {
            err += dy;
            x += sx;
        }
        if e2 <= dx {
            err += dx;
            y += sy;
        }
    }
}
