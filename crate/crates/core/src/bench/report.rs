use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::disturbance::{Direction, TrialResult};
use super::metrics::{EnergyResult, RotationRow, VelocityResult};
use crate::error::{invalid, Error, Result};

pub const REPORT_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ReportMetadata {
    pub generator: String,
    #[serde(default)]
    pub policy_hash: Option<String>,
    #[serde(default)]
    pub config_hash: Option<String>,
    #[serde(default)]
    pub model_hash: Option<String>,
    #[serde(default)]
    pub seed: Option<u64>,
    /// Where the scored episodes came from: "sim" or log file names.
    #[serde(default)]
    pub sources: Vec<String>,
}

/// Success grid for one push direction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DirectionGrid {
    pub direction: Direction,
    pub forces: Vec<f64>,
    pub durations: Vec<f64>,
    /// Force-major order.
    pub cells: Vec<TrialResult>,
}

impl DirectionGrid {
    /// Group cell results by direction, keeping first-seen direction order.
    pub fn group(results: &[TrialResult]) -> Vec<DirectionGrid> {
        let mut out: Vec<DirectionGrid> = Vec::new();
        for r in results {
            let idx = match out.iter().position(|g| g.direction == r.direction) {
                Some(i) => i,
                None => {
                    out.push(DirectionGrid {
                        direction: r.direction,
                        forces: vec![],
                        durations: vec![],
                        cells: vec![],
                    });
                    out.len() - 1
                }
            };
            let g = &mut out[idx];
            if !g.forces.contains(&r.force) {
                g.forces.push(r.force);
            }
            if !g.durations.contains(&r.duration) {
                g.durations.push(r.duration);
            }
            g.cells.push(r.clone());
        }
        for g in &mut out {
            g.forces.sort_by(f64::total_cmp);
            g.durations.sort_by(f64::total_cmp);
            g.cells.sort_by(|a, b| {
                a.force
                    .total_cmp(&b.force)
                    .then(a.duration.total_cmp(&b.duration))
            });
        }
        out
    }

    pub fn cell(&self, force: f64, duration: f64) -> Option<&TrialResult> {
        self.cells
            .iter()
            .find(|c| c.force == force && c.duration == duration)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledVelocity {
    pub label: String,
    #[serde(flatten)]
    pub result: VelocityResult,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledEnergy {
    pub label: String,
    #[serde(flatten)]
    pub result: EnergyResult,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub schema_version: u32,
    pub metadata: ReportMetadata,
    #[serde(default)]
    pub disturbance: Vec<DirectionGrid>,
    #[serde(default)]
    pub rotation: Vec<RotationRow>,
    #[serde(default)]
    pub velocity: Vec<LabeledVelocity>,
    #[serde(default)]
    pub energy: Vec<LabeledEnergy>,
}

impl BenchReport {
    pub fn new(metadata: ReportMetadata) -> Self {
        Self {
            schema_version: REPORT_SCHEMA_VERSION,
            metadata,
            disturbance: Vec::new(),
            rotation: Vec::new(),
            velocity: Vec::new(),
            energy: Vec::new(),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Parse a report, rejecting other schema versions before looking at the body.
    pub fn from_json(s: &str) -> Result<Self> {
        let v: serde_json::Value = serde_json::from_str(s)
            .map_err(|e| Error::Schema(format!("report is not JSON: {e}")))?;
        match v.get("schema_version").and_then(|x| x.as_u64()) {
            Some(n) if n == REPORT_SCHEMA_VERSION as u64 => {}
            Some(n) => {
                return Err(Error::Schema(format!(
                    "report schema version {n} is not supported (expected {REPORT_SCHEMA_VERSION})"
                )))
            }
            None => return Err(Error::Schema("report has no schema_version".into())),
        }
        serde_json::from_value(v).map_err(|e| Error::Schema(format!("malformed report: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&fs::read_to_string(path)?)
    }

    /// One row per disturbance cell followed by its trials.
    pub fn to_csv(&self) -> String {
        let mut s = String::from(
            "kind,direction,force_n,duration_s,impulse_ns,trial,seed,recovered,blowup,successes,attempts,success_pct\n",
        );
        let opt = |x: Option<u64>| x.map_or(String::new(), |v| v.to_string());
        for g in &self.disturbance {
            for c in &g.cells {
                let _ = writeln!(
                    s,
                    "cell,{},{},{},{},,{},,,{},{},{:.1}",
                    c.direction,
                    c.force,
                    c.duration,
                    c.impulse,
                    opt(c.seed),
                    c.successes,
                    c.attempts,
                    c.success_pct
                );
                for t in &c.trials {
                    let _ = writeln!(
                        s,
                        "trial,{},{},{},{},{},{},{},{},,,",
                        c.direction,
                        c.force,
                        c.duration,
                        c.impulse,
                        t.trial,
                        opt(t.seed),
                        t.recovered,
                        t.blowup
                    );
                }
            }
        }
        s
    }

    pub fn to_svg(&self) -> String {
        svg::render(self)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Json,
    Csv,
    Svg,
}

impl ReportFormat {
    pub fn extension(self) -> &'static str {
        match self {
            ReportFormat::Json => "json",
            ReportFormat::Csv => "csv",
            ReportFormat::Svg => "svg",
        }
    }
}

impl FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "json" => Ok(ReportFormat::Json),
            "csv" => Ok(ReportFormat::Csv),
            "svg" => Ok(ReportFormat::Svg),
            other => Err(invalid(format!("unknown report format {other:?}"))),
        }
    }
}

/// Write `report.<ext>` into `dir` for each format.
pub fn emit_report(
    report: &BenchReport,
    dir: &Path,
    formats: &[ReportFormat],
) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    for &f in formats {
        let body = match f {
            ReportFormat::Json => report.to_json()?,
            ReportFormat::Csv => report.to_csv(),
            ReportFormat::Svg => report.to_svg(),
        };
        let path = dir.join(format!("report.{}", f.extension()));
        fs::write(&path, body)?;
        written.push(path);
    }
    Ok(written)
}

mod svg {
    use super::*;

    const WIDTH: f64 = 720.0;
    const CELL_W: f64 = 96.0;
    const CELL_H: f64 = 40.0;
    const LEFT: f64 = 90.0;
    const CHART_H: f64 = 160.0;

    fn esc(s: &str) -> String {
        s.replace('&', "&amp;")
            .replace('<', "&lt;")
            .replace('>', "&gt;")
            .replace('"', "&quot;")
    }

    fn fmt_num(x: f64) -> String {
        if x == x.round() && x.abs() < 1e6 {
            format!("{}", x as i64)
        } else {
            format!("{:.3}", x)
                .trim_end_matches('0')
                .trim_end_matches('.')
                .to_string()
        }
    }

    /// Red at 0 %, green at 100 %.
    fn success_color(pct: f64) -> String {
        let t = (pct / 100.0).clamp(0.0, 1.0);
        let r = (215.0 * (1.0 - t) + 40.0 * t).round() as u8;
        let g = (48.0 * (1.0 - t) + 160.0 * t).round() as u8;
        let b = (39.0 * (1.0 - t) + 70.0 * t).round() as u8;
        format!("#{r:02x}{g:02x}{b:02x}")
    }

    fn heatmap(out: &mut String, g: &DirectionGrid, y0: f64) -> f64 {
        let title_h = 30.0;
        let top = y0 + title_h;
        let rows = g.forces.len() as f64;
        let _ = writeln!(
            out,
            r#"<g class="heatmap" data-direction="{}">"#,
            g.direction
        );
        let _ = writeln!(
            out,
            r#"<text x="{LEFT}" y="{}" font-size="15" font-weight="bold">Disturbance success rate, push {}</text>"#,
            y0 + 20.0,
            g.direction
        );
        // forces increase upward
        for (fi, &force) in g.forces.iter().enumerate() {
            let y = top + (rows - 1.0 - fi as f64) * CELL_H;
            let _ = writeln!(
                out,
                r#"<text x="{}" y="{}" font-size="12" text-anchor="end">{} N</text>"#,
                LEFT - 6.0,
                y + CELL_H / 2.0 + 4.0,
                fmt_num(force)
            );
            for (di, &duration) in g.durations.iter().enumerate() {
                let x = LEFT + di as f64 * CELL_W;
                match g.cell(force, duration) {
                    Some(c) => {
                        let _ = writeln!(
                            out,
                            r##"<rect class="cell" x="{x}" y="{y}" width="{CELL_W}" height="{CELL_H}" fill="{}" stroke="#ffffff"/>"##,
                            success_color(c.success_pct)
                        );
                        let _ = writeln!(
                            out,
                            r##"<text x="{}" y="{}" font-size="12" text-anchor="middle" fill="#ffffff">{:.0}% ({}/{})</text>"##,
                            x + CELL_W / 2.0,
                            y + CELL_H / 2.0 + 4.0,
                            c.success_pct,
                            c.successes,
                            c.attempts
                        );
                    }
                    None => {
                        let _ = writeln!(
                            out,
                            r##"<rect class="cell empty" x="{x}" y="{y}" width="{CELL_W}" height="{CELL_H}" fill="#dddddd" stroke="#ffffff"/>"##
                        );
                    }
                }
            }
        }
        let bottom = top + rows * CELL_H;
        for (di, &duration) in g.durations.iter().enumerate() {
            let _ = writeln!(
                out,
                r#"<text x="{}" y="{}" font-size="12" text-anchor="middle">{} ms</text>"#,
                LEFT + (di as f64 + 0.5) * CELL_W,
                bottom + 16.0,
                fmt_num(duration * 1000.0)
            );
        }
        let _ = writeln!(
            out,
            r#"<text x="{}" y="{}" font-size="12" text-anchor="middle">push duration</text>"#,
            LEFT + g.durations.len() as f64 * CELL_W / 2.0,
            bottom + 34.0
        );
        out.push_str("</g>\n");
        bottom + 50.0 - y0
    }

    struct Bar {
        label: String,
        value: Option<f64>,
        whisker: Option<f64>,
    }

    fn bar_chart(
        out: &mut String,
        class: &str,
        title: &str,
        unit: &str,
        bars: &[Bar],
        y0: f64,
    ) -> f64 {
        let top = y0 + 30.0;
        let max = bars
            .iter()
            .filter_map(|b| b.value.map(|v| v + b.whisker.unwrap_or(0.0)))
            .fold(0.0f64, f64::max);
        let max = if max > 0.0 { max * 1.1 } else { 1.0 };
        let slot = ((WIDTH - LEFT - 20.0) / bars.len().max(1) as f64).min(120.0);
        let _ = writeln!(out, r#"<g class="{class}">"#);
        let _ = writeln!(
            out,
            r#"<text x="{LEFT}" y="{}" font-size="15" font-weight="bold">{} ({})</text>"#,
            y0 + 20.0,
            esc(title),
            esc(unit)
        );
        let base = top + CHART_H;
        let _ = writeln!(
            out,
            r##"<line x1="{LEFT}" y1="{base}" x2="{}" y2="{base}" stroke="#000000"/>"##,
            LEFT + slot * bars.len() as f64
        );
        let _ = writeln!(
            out,
            r##"<line x1="{LEFT}" y1="{top}" x2="{LEFT}" y2="{base}" stroke="#000000"/>"##
        );
        let _ = writeln!(
            out,
            r#"<text x="{}" y="{}" font-size="11" text-anchor="end">{}</text>"#,
            LEFT - 4.0,
            top + 4.0,
            fmt_num(max)
        );
        for (i, b) in bars.iter().enumerate() {
            let cx = LEFT + (i as f64 + 0.5) * slot;
            match b.value {
                Some(v) => {
                    let h = CHART_H * v.max(0.0) / max;
                    let _ = writeln!(
                        out,
                        r##"<rect class="bar" x="{}" y="{}" width="{}" height="{h}" fill="#4a78b5"/>"##,
                        cx - slot * 0.3,
                        base - h,
                        slot * 0.6
                    );
                    if let Some(w) = b.whisker {
                        let lo = base - CHART_H * (v - w).max(0.0) / max;
                        let hi = base - CHART_H * (v + w) / max;
                        let _ = writeln!(
                            out,
                            r##"<path class="whisker" d="M{cx} {lo}V{hi}M{} {lo}h12M{} {hi}h12" stroke="#000000"/>"##,
                            cx - 6.0,
                            cx - 6.0
                        );
                    }
                    let _ = writeln!(
                        out,
                        r#"<text x="{cx}" y="{}" font-size="11" text-anchor="middle">{}</text>"#,
                        base - h - 4.0 - if b.whisker.is_some() { 12.0 } else { 0.0 },
                        fmt_num(v)
                    );
                }
                None => {
                    let _ = writeln!(
                        out,
                        r#"<text x="{cx}" y="{}" font-size="11" text-anchor="middle">n/a</text>"#,
                        base - 4.0
                    );
                }
            }
            let _ = writeln!(
                out,
                r#"<text x="{cx}" y="{}" font-size="12" text-anchor="middle">{}</text>"#,
                base + 16.0,
                esc(&b.label)
            );
        }
        out.push_str("</g>\n");
        CHART_H + 60.0
    }

    pub(super) fn render(r: &BenchReport) -> String {
        let mut body = String::new();
        let mut y = 10.0;
        for g in &r.disturbance {
            y += heatmap(&mut body, g, y);
        }
        if !r.rotation.is_empty() {
            let label = |row: &RotationRow| format!("{} s", fmt_num(row.duration));
            let err: Vec<Bar> = r
                .rotation
                .iter()
                .map(|row| Bar {
                    label: label(row),
                    value: row.angular_error.map(|s| s.mean),
                    whisker: row.angular_error.map(|s| s.std),
                })
                .collect();
            y += bar_chart(
                &mut body,
                "rotation",
                "Rotation angular error",
                "rad",
                &err,
                y,
            );
            let drift: Vec<Bar> = r
                .rotation
                .iter()
                .map(|row| Bar {
                    label: label(row),
                    value: row.lateral_drift.map(|s| s.mean),
                    whisker: row.lateral_drift.map(|s| s.std),
                })
                .collect();
            y += bar_chart(
                &mut body,
                "rotation",
                "Rotation lateral drift",
                "m",
                &drift,
                y,
            );
        }
        if !r.velocity.is_empty() {
            let bars: Vec<Bar> = r
                .velocity
                .iter()
                .flat_map(|v| {
                    [
                        Bar {
                            label: format!("{} cmd", v.label),
                            value: Some(v.result.d_c),
                            whisker: None,
                        },
                        Bar {
                            label: format!("{} actual", v.label),
                            value: Some(v.result.d_r),
                            whisker: None,
                        },
                    ]
                })
                .collect();
            y += bar_chart(&mut body, "velocity", "Distance travelled", "m", &bars, y);
        }
        if !r.energy.is_empty() {
            let bars: Vec<Bar> = r
                .energy
                .iter()
                .map(|e| Bar {
                    label: e.label.clone(),
                    value: e.result.energy_per_meter,
                    whisker: None,
                })
                .collect();
            y += bar_chart(
                &mut body,
                "energy",
                "Positive work per meter",
                "J/m",
                &bars,
                y,
            );
        }
        let height = y.max(40.0);
        format!(
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{height}\" viewBox=\"0 0 {WIDTH} {height}\" font-family=\"sans-serif\">\n<rect width=\"100%\" height=\"100%\" fill=\"#ffffff\"/>\n{body}</svg>\n"
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bench::disturbance::TrialRecord;
    use crate::bench::metrics::{RotationTrial, Stat};

    fn cell(direction: Direction, force: f64, duration: f64, outcomes: &[bool]) -> TrialResult {
        let successes = outcomes.iter().filter(|&&o| o).count() as u32;
        TrialResult {
            direction,
            force,
            duration,
            impulse: force * duration,
            seed: Some(7),
            attempts: outcomes.len() as u32,
            successes,
            success_pct: 100.0 * successes as f64 / outcomes.len() as f64,
            trials: outcomes
                .iter()
                .enumerate()
                .map(|(i, &o)| TrialRecord {
                    trial: i as u32 + 1,
                    seed: Some(i as u64),
                    recovered: o,
                    blowup: false,
                    log: None,
                })
                .collect(),
        }
    }

    fn sample() -> BenchReport {
        let mut r = BenchReport::new(ReportMetadata {
            generator: "test".into(),
            seed: Some(3),
            ..Default::default()
        });
        r.disturbance = DirectionGrid::group(&[
            cell(Direction::PosX, 60.0, 0.2, &[true, true, false, true, true]),
            cell(Direction::PosX, 60.0, 0.5, &[true, true, true, false]),
            cell(Direction::NegX, 60.0, 0.2, &[false]),
        ]);
        let t = RotationTrial {
            omega: 0.5,
            duration: 1.0,
            theta_c: 0.5,
            rotation: 0.4,
            angular_error: 0.1,
            lateral_drift: 0.0,
        };
        r.rotation = vec![RotationRow::new(0.5, 1.0, vec![t.clone(), t])];
        r.energy = vec![LabeledEnergy {
            label: "walk".into(),
            result: EnergyResult {
                positive_work: 100.0,
                distance: 10.0,
                duration: 10.0,
                energy_per_meter: Some(10.0),
            },
        }];
        r
    }

    #[test]
    fn json_round_trip_is_lossless() {
        let mut r = sample();
        r.velocity.push(LabeledVelocity {
            label: "1 m/s".into(),
            result: VelocityResult {
                v: 1.0,
                duration: 10.0,
                d_c: 10.0,
                d_r: 0.1 + 0.2,
                mean_velocity: 0.030000000000000006,
                start_time: 0.0,
                stop_time: 10.0,
            },
        });
        let back = BenchReport::from_json(&r.to_json().unwrap()).unwrap();
        assert_eq!(back, r);
    }

    #[test]
    fn schema_mismatch_is_explicit() {
        let mut v: serde_json::Value = serde_json::from_str(&sample().to_json().unwrap()).unwrap();
        v["schema_version"] = 99.into();
        let e = BenchReport::from_json(&v.to_string()).unwrap_err();
        assert!(e.to_string().contains("schema version 99"));
    }

    #[test]
    fn csv_cell_row_ends_with_counts_and_percentage() {
        let csv = sample().to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        // header + 3 cells + 10 trials
        assert_eq!(lines.len(), 1 + 3 + 10);
        let cells: Vec<&&str> = lines.iter().filter(|l| l.starts_with("cell,")).collect();
        assert!(cells[1].ends_with(",3,4,75.0"), "{}", cells[1]);
        let cols = lines[0].split(',').count();
        assert!(lines.iter().all(|l| l.split(',').count() == cols));
    }

    #[test]
    fn svg_has_one_heatmap_per_direction() {
        let svg = sample().to_svg();
        assert_eq!(svg.matches("class=\"heatmap\"").count(), 2);
        assert!(svg.contains("80% (4/5)"));
        assert!(svg.contains("class=\"whisker\""));
        assert!(svg.contains("class=\"energy\""));
        assert!(!svg.contains("class=\"velocity\""));
    }

    #[test]
    fn empty_sections_are_omitted() {
        let mut r = sample();
        r.rotation.clear();
        let svg = r.to_svg();
        assert!(!svg.contains("class=\"rotation\""));
        let empty = BenchReport::new(ReportMetadata::default()).to_svg();
        assert!(empty.starts_with("<svg"));
        assert!(!empty.contains("<g"));
    }

    #[test]
    fn stats_without_trials_render_as_not_available() {
        let mut r = sample();
        r.rotation = vec![RotationRow::new(0.5, 30.0, vec![])];
        assert!(r.to_svg().contains("n/a"));
        assert_eq!(Stat::of(&[]), None);
    }

    #[test]
    fn emit_writes_requested_formats() {
        let dir = tempfile::tempdir().unwrap();
        let files = emit_report(
            &sample(),
            dir.path(),
            &[ReportFormat::Json, ReportFormat::Svg],
        )
        .unwrap();
        assert_eq!(files.len(), 2);
        assert!(dir.path().join("report.svg").exists());
        assert_eq!(
            BenchReport::load(&dir.path().join("report.json")).unwrap(),
            sample()
        );
    }
}
