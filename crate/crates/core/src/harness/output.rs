use std::fmt::Write as _;
use std::path::Path;

use super::run::{RegretTrace, TracePoint};
use super::{HarnessError, Result};

pub const TRACE_HEADER: &str = "agent,seed,conf_scale,step,cum_reward,cum_pseudo_regret";
pub const SUMMARY_HEADER: &str =
    "agent,conf_scale,runs,step,mean_cum_reward,std_cum_reward,mean_cum_pseudo_regret,std_cum_pseudo_regret,best";

/// Final-step statistics of one (agent, conf_scale) group. Standard
/// deviations are population (divide by the number of runs).
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub agent: String,
    pub conf_scale: f64,
    pub runs: usize,
    pub step: u64,
    pub mean_cum_reward: f64,
    pub std_cum_reward: f64,
    pub mean_cum_pseudo_regret: f64,
    pub std_cum_pseudo_regret: f64,
}

fn mean_std(xs: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let n = xs.clone().count() as f64;
    let mean = xs.clone().sum::<f64>() / n;
    let var = xs.map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Groups traces by (agent, conf_scale) in order of first appearance.
fn groups(traces: &[RegretTrace]) -> Vec<(&str, f64, Vec<&RegretTrace>)> {
    let mut out: Vec<(&str, f64, Vec<&RegretTrace>)> = Vec::new();
    for trace in traces {
        match out.iter_mut().find(|(a, c, _)| *a == trace.agent && c.to_bits() == trace.conf_scale.to_bits()) {
            Some((_, _, members)) => members.push(trace),
            None => out.push((&trace.agent, trace.conf_scale, vec![trace])),
        }
    }
    out
}

/// Mean and population standard deviation of the final points, per
/// (agent, conf_scale). Traces without points are skipped.
pub fn aggregate(traces: &[RegretTrace]) -> Vec<SummaryRow> {
    groups(traces)
        .into_iter()
        .filter_map(|(agent, conf_scale, members)| {
            let finals: Vec<&TracePoint> = members.iter().filter_map(|t| t.last()).collect();
            if finals.is_empty() {
                return None;
            }
            let (mean_cum_reward, std_cum_reward) = mean_std(finals.iter().map(|p| p.cum_reward));
            let (mean_cum_pseudo_regret, std_cum_pseudo_regret) = mean_std(finals.iter().map(|p| p.cum_pseudo_regret));
            Some(SummaryRow {
                agent: agent.to_string(),
                conf_scale,
                runs: finals.len(),
                step: finals.iter().map(|p| p.step).max().unwrap_or(0),
                mean_cum_reward,
                std_cum_reward,
                mean_cum_pseudo_regret,
                std_cum_pseudo_regret,
            })
        })
        .collect()
}

/// The row with the highest mean cumulative reward for each agent (first
/// row wins ties), in order of first appearance.
pub fn best_conf_scales(summary: &[SummaryRow]) -> Vec<&SummaryRow> {
    let mut best: Vec<&SummaryRow> = Vec::new();
    for row in summary {
        match best.iter_mut().find(|b| b.agent == row.agent) {
            Some(b) if row.mean_cum_reward > b.mean_cum_reward => *b = row,
            Some(_) => {}
            None => best.push(row),
        }
    }
    best
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))?;
    }
    std::fs::write(path, text).map_err(|e| HarnessError::io(path, e))
}

/// Writes all traces as CSV with header [`TRACE_HEADER`]. Floats use the
/// shortest representation that round-trips.
pub fn write_csv(traces: &[RegretTrace], path: &Path) -> Result<()> {
    let mut text = String::with_capacity(64 * traces.iter().map(|t| t.points.len()).sum::<usize>() + 64);
    text.push_str(TRACE_HEADER);
    text.push('\n');
    for t in traces {
        for p in &t.points {
            let _ = writeln!(
                text,
                "{},{},{},{},{},{}",
                t.agent, t.seed, t.conf_scale, p.step, p.cum_reward, p.cum_pseudo_regret
            );
        }
    }
    write_file(path, &text)
}

pub fn write_summary(summary: &[SummaryRow], path: &Path) -> Result<()> {
    let best = best_conf_scales(summary);
    let mut text = String::from(SUMMARY_HEADER);
    text.push('\n');
    for r in summary {
        let is_best = best.iter().any(|b| std::ptr::eq(*b, r));
        let _ = writeln!(
            text,
            "{},{},{},{},{},{},{},{},{}",
            r.agent,
            r.conf_scale,
            r.runs,
            r.step,
            r.mean_cum_reward,
            r.std_cum_reward,
            r.mean_cum_pseudo_regret,
            r.std_cum_pseudo_regret,
            is_best
        );
    }
    write_file(path, &text)
}

/// Reads a trace CSV written by [`write_csv`]. Consecutive rows with the
/// same (agent, seed, conf_scale) form one trace.
pub fn read_traces(path: &Path) -> Result<Vec<RegretTrace>> {
    let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
    let csv_err = |line: usize, message: String| HarnessError::Csv { path: path.to_path_buf(), line, message };
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, header)) if header == TRACE_HEADER => {}
        _ => return Err(csv_err(1, format!("expected header `{TRACE_HEADER}`"))),
    }
    let mut traces: Vec<RegretTrace> = Vec::new();
    for (i, line) in lines {
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 6 {
            return Err(csv_err(i + 1, format!("expected 6 fields, got {}", fields.len())));
        }
        let num = |k: usize| fields[k].parse::<f64>().map_err(|e| csv_err(i + 1, format!("field {}: {e}", k + 1)));
        let int = |k: usize| fields[k].parse::<u64>().map_err(|e| csv_err(i + 1, format!("field {}: {e}", k + 1)));
        let (seed, conf_scale) = (int(1)?, num(2)?);
        let point = TracePoint { step: int(3)?, cum_reward: num(4)?, cum_pseudo_regret: num(5)? };
        match traces.last_mut() {
            Some(t) if t.agent == fields[0] && t.seed == seed && t.conf_scale.to_bits() == conf_scale.to_bits() => {
                t.points.push(point)
            }
            _ => traces.push(RegretTrace { agent: fields[0].to_string(), seed, conf_scale, points: vec![point] }),
        }
    }
    Ok(traces)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlotMetric {
    CumReward,
    CumPseudoRegret,
}

struct Series {
    label: String,
    steps: Vec<f64>,
    mean: Vec<f64>,
    std: Vec<f64>,
}

fn band(label: String, members: &[&RegretTrace], metric: PlotMetric) -> Result<Series> {
    let first = members[0];
    if members.iter().any(|t| t.points.len() != first.points.len()) {
        return Err(HarnessError::Config(format!("traces of `{label}` are recorded at different steps")));
    }
    let value = |p: &TracePoint| match metric {
        PlotMetric::CumReward => p.cum_reward,
        PlotMetric::CumPseudoRegret => p.cum_pseudo_regret,
    };
    let n = first.points.len();
    // Keep at most about 1000 points per series.
    let stride = n.div_ceil(1000).max(1);
    let idx: Vec<usize> = (0..n).filter(|i| i % stride == 0 || i + 1 == n).collect();
    let mut series = Series { label, steps: Vec::new(), mean: Vec::new(), std: Vec::new() };
    for i in idx {
        let (m, s) = mean_std(members.iter().map(|t| value(&t.points[i])));
        series.steps.push(first.points[i].step as f64);
        series.mean.push(m);
        series.std.push(s);
    }
    Ok(series)
}

const PALETTE: [&str; 8] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf"];

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

fn tick_label(x: f64) -> String {
    if x != 0.0 && (x.abs() >= 1e5 || x.abs() < 1e-2) {
        format!("{x:.1e}")
    } else {
        let s = format!("{x:.2}");
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    }
}

/// Renders the mean of `metric` over seeds with a shaded band of one
/// standard deviation. With `all_scales` every (agent, conf_scale) group is
/// drawn; otherwise only each agent's best `conf_scale`.
pub fn plot_svg(traces: &[RegretTrace], metric: PlotMetric, all_scales: bool, path: &Path) -> Result<()> {
    let summary = aggregate(traces);
    let best = best_conf_scales(&summary);
    let multi_scale = groups(traces).len() > best.len();
    let mut series = Vec::new();
    for (agent, c, members) in groups(traces) {
        if members.iter().any(|t| t.points.is_empty()) {
            continue;
        }
        let keep = all_scales || best.iter().any(|b| b.agent == agent && b.conf_scale.to_bits() == c.to_bits());
        if keep {
            let label = if multi_scale { format!("{agent} (c = {c})") } else { agent.to_string() };
            series.push(band(label, &members, metric)?);
        }
    }
    if series.is_empty() {
        return Err(HarnessError::Config("no traces to plot".into()));
    }

    let (w, h) = (900.0, 540.0);
    let (left, right, top, bottom) = (80.0, 220.0, 30.0, 60.0);
    let x_max = series.iter().flat_map(|s| s.steps.iter().copied()).fold(1.0, f64::max);
    let lows = series.iter().flat_map(|s| s.mean.iter().zip(&s.std).map(|(m, d)| m - d));
    let highs = series.iter().flat_map(|s| s.mean.iter().zip(&s.std).map(|(m, d)| m + d));
    let (mut y_min, mut y_max) = (lows.fold(0.0, f64::min), highs.fold(0.0, f64::max));
    if y_max - y_min < 1e-12 {
        y_min -= 1.0;
        y_max += 1.0;
    }
    let px = |x: f64| left + (w - left - right) * x / x_max;
    let py = |y: f64| top + (h - top - bottom) * (1.0 - (y - y_min) / (y_max - y_min));

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(svg, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
    let (x0, x1, y0, y1) = (px(0.0), px(x_max), py(y_min), py(y_max));
    let _ = writeln!(svg, r#"<path d="M{x0:.2},{y1:.2} V{y0:.2} H{x1:.2}" stroke="black" fill="none"/>"#);
    for k in 0..=5 {
        let xv = x_max * k as f64 / 5.0;
        let yv = y_min + (y_max - y_min) * k as f64 / 5.0;
        let (tx, ty) = (px(xv), py(yv));
        let _ = writeln!(svg, r#"<line x1="{tx:.2}" y1="{y0:.2}" x2="{tx:.2}" y2="{:.2}" stroke="black"/>"#, y0 + 5.0);
        let _ = writeln!(
            svg,
            r#"<text x="{tx:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
            y0 + 20.0,
            tick_label(xv)
        );
        let _ = writeln!(svg, r#"<line x1="{:.2}" y1="{ty:.2}" x2="{x0:.2}" y2="{ty:.2}" stroke="black"/>"#, x0 - 5.0);
        let _ = writeln!(
            svg,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"#,
            x0 - 8.0,
            ty + 4.0,
            tick_label(yv)
        );
    }
    let y_title = match metric {
        PlotMetric::CumReward => "mean cumulative reward",
        PlotMetric::CumPseudoRegret => "mean cumulative pseudo-regret",
    };
    let _ = writeln!(svg, r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">step</text>"#, (x0 + x1) / 2.0, h - 15.0);
    let _ = writeln!(
        svg,
        r#"<text transform="translate(18,{:.2}) rotate(-90)" text-anchor="middle">{y_title}</text>"#,
        (y0 + y1) / 2.0
    );
    for (k, s) in series.iter().enumerate() {
        let color = PALETTE[k % PALETTE.len()];
        let mut area = String::new();
        for (i, x) in s.steps.iter().enumerate() {
            let _ = write!(area, "{}{:.2},{:.2} ", if i == 0 { "M" } else { "L" }, px(*x), py(s.mean[i] + s.std[i]));
        }
        for (i, x) in s.steps.iter().enumerate().rev() {
            let _ = write!(area, "L{:.2},{:.2} ", px(*x), py(s.mean[i] - s.std[i]));
        }
        let _ = writeln!(svg, r#"<path d="{}Z" fill="{color}" fill-opacity="0.2" stroke="none"/>"#, area);
        let line: Vec<String> =
            s.steps.iter().zip(&s.mean).map(|(x, y)| format!("{:.2},{:.2}", px(*x), py(*y))).collect();
        let _ = writeln!(
            svg,
            r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="1.5"/>"#,
            line.join(" ")
        );
        let ly = top + 20.0 * k as f64 + 10.0;
        let lx = w - right + 15.0;
        let _ = writeln!(
            svg,
            r#"<line x1="{lx:.2}" y1="{ly:.2}" x2="{:.2}" y2="{ly:.2}" stroke="{color}" stroke-width="3"/>"#,
            lx + 20.0
        );
        let _ = writeln!(svg, r#"<text x="{:.2}" y="{:.2}">{}</text>"#, lx + 26.0, ly + 4.0, escape(&s.label));
    }
    svg.push_str("</svg>\n");
    write_file(path, &svg)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn trace(agent: &str, seed: u64, finals: &[(u64, f64)]) -> RegretTrace {
        RegretTrace {
            agent: agent.into(),
            seed,
            conf_scale: 0.5,
            points: finals.iter().map(|&(step, r)| TracePoint { step, cum_reward: r, cum_pseudo_regret: -r }).collect(),
        }
    }

    #[test]
    fn aggregate_uses_population_std() {
        let rows = aggregate(&[trace("a", 0, &[(5, 1.0)]), trace("a", 1, &[(5, 3.0)])]);
        assert_eq!(rows.len(), 1);
        assert_eq!((rows[0].mean_cum_reward, rows[0].std_cum_reward), (2.0, 1.0));
        assert_eq!((rows[0].mean_cum_pseudo_regret, rows[0].std_cum_pseudo_regret), (-2.0, 1.0));
        assert_eq!(rows[0].runs, 2);
    }

    #[test]
    fn one_point_csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.csv");
        let traces = vec![trace("heavy_ucrl2", 7, &[(10, 0.1 + 0.2)])];
        write_csv(&traces, &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text.lines().count(), 2);
        assert_eq!(text.lines().next().unwrap(), TRACE_HEADER);
        assert_eq!(read_traces(&path).unwrap(), traces);
    }

    #[test]
    fn identical_traces_have_zero_band() {
        let t = trace("a", 0, &[(1, 1.0), (2, 4.0)]);
        let s = band("a".into(), &[&t, &t], PlotMetric::CumReward).unwrap();
        assert_eq!(s.std, vec![0.0, 0.0]);
        assert_eq!(s.mean, vec![1.0, 4.0]);
    }

    #[test]
    fn best_scale_per_agent() {
        let mut hi = trace("a", 0, &[(1, 5.0)]);
        hi.conf_scale = 0.1;
        let rows = aggregate(&[trace("a", 0, &[(1, 1.0)]), hi, trace("b", 0, &[(1, 0.0)])]);
        let best = best_conf_scales(&rows);
        assert_eq!(best.len(), 2);
        assert_eq!((best[0].agent.as_str(), best[0].conf_scale), ("a", 0.1));
    }

    #[test]
    fn svg_is_written() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("p.svg");
        let traces = vec![trace("a<b", 0, &[(1, 1.0), (2, 2.0)]), trace("a<b", 1, &[(1, 2.0), (2, 3.0)])];
        plot_svg(&traces, PlotMetric::CumReward, false, &path).unwrap();
        let svg = std::fs::read_to_string(&path).unwrap();
        assert!(svg.starts_with("<svg") && svg.contains("a&lt;b") && svg.contains("fill-opacity"));
    }

    #[test]
    fn rejects_bad_header() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.csv");
        std::fs::write(&path, "agent,seed\n").unwrap();
        assert!(matches!(read_traces(&path), Err(HarnessError::Csv { line: 1, .. })));
    }
}
