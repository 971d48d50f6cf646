//! CSV and plain-text renderings of operating characteristics.

use crate::oc::{MethodResult, OperatingCharacteristics, Tally};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Layout {
    /// One row per (scenario, odds ratio, method, metric) with exact counts.
    Long,
    /// Rows (scenario, design); per odds ratio: power, interim, final, E[N].
    Sequential,
    /// Rows (scenario, method); per odds ratio: subgroup 1 rejection and the
    /// share of trials rejecting some hypothesis in subgroups 2..K.
    PerGroup,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub csv: String,
    pub text: String,
}

pub fn fmt_prop(p: f64) -> String {
    format!("{p:.4}")
}

pub fn fmt_n(n: f64) -> String {
    format!("{n:.1}")
}

fn or_label(r: Option<f64>) -> String {
    r.map_or_else(|| "na".into(), |r| format!("{r}"))
}

fn write_csv(header: &[String], rows: &[Vec<String>]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).expect("in-memory write");
    for r in rows {
        w.write_record(r).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8")
}

// Distinct values in first-appearance order.
fn distinct<T: PartialEq + Clone>(it: impl Iterator<Item = T>) -> Vec<T> {
    let mut v: Vec<T> = Vec::new();
    for x in it {
        if !v.contains(&x) {
            v.push(x);
        }
    }
    v
}

pub fn emit_table(oc: &OperatingCharacteristics, layout: Layout) -> Table {
    match layout {
        Layout::Long => long(oc),
        Layout::Sequential | Layout::PerGroup => pivot(oc, layout),
    }
}

fn long(oc: &OperatingCharacteristics) -> Table {
    let header: Vec<String> = ["scenario", "odds_ratio", "method", "metric", "count", "replicates", "failed", "value", "se"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    let mut rows = Vec::new();
    for r in &oc.results {
        for (name, count, value, se) in r.metrics() {
            let (v, s) = if name == "expected_n" {
                (fmt_n(value), format!("{se:.2}"))
            } else {
                (fmt_prop(value), fmt_prop(se))
            };
            rows.push(vec![
                r.scenario.clone(),
                or_label(r.odds_ratio),
                r.method.clone(),
                name,
                count.map_or(String::new(), |c| c.to_string()),
                r.replicates.to_string(),
                r.failed.to_string(),
                v,
                s,
            ]);
        }
    }
    let text = align(&header, &rows);
    Table {
        csv: write_csv(&header, &rows),
        text,
    }
}

fn cells(r: &MethodResult, layout: Layout) -> Vec<String> {
    match (layout, &r.tally) {
        (Layout::Sequential, Tally::Sequential { .. }) => vec![
            fmt_prop(r.power()),
            fmt_prop(r.interim()),
            fmt_prop(r.final_look()),
            fmt_n(r.expected_n().0),
        ],
        (Layout::PerGroup, Tally::Multitest { rejections, .. }) => {
            let rest = if rejections.len() > 1 { fmt_prop(r.any_rest()) } else { String::new() };
            vec![fmt_prop(r.reject(0)), rest]
        }
        _ => panic!("result kind does not match the table layout"),
    }
}

fn pivot(oc: &OperatingCharacteristics, layout: Layout) -> Table {
    let (key, cols): (&str, &[&str]) = match layout {
        Layout::Sequential => ("design", &["power", "interim", "final", "expected_n"]),
        _ => ("method", &["subgroup1", "subgroups2plus"]),
    };
    let ors = distinct(oc.results.iter().map(|r| or_label(r.odds_ratio)));
    let keys = distinct(oc.results.iter().map(|r| (r.scenario.clone(), r.method.clone())));
    let mut header = vec!["scenario".to_string(), key.to_string()];
    for o in &ors {
        header.extend(cols.iter().map(|c| format!("{c}_r{o}")));
    }
    let mut rows = Vec::new();
    for (scen, method) in &keys {
        let mut row = vec![scen.clone(), method.clone()];
        for o in &ors {
            match oc
                .results
                .iter()
                .find(|r| &r.scenario == scen && &r.method == method && &or_label(r.odds_ratio) == o)
            {
                Some(r) => row.extend(cells(r, layout)),
                None => row.extend(cols.iter().map(|_| String::new())),
            }
        }
        rows.push(row);
    }
    let csv = write_csv(&header, &rows);

    // Text: one block per scenario, odds ratios side by side.
    let mut text = String::new();
    for scen in distinct(keys.iter().map(|k| k.0.clone())) {
        text.push_str(&format!("Scenario {scen}\n"));
        let mut th = vec![String::new()];
        for o in &ors {
            th.push(format!("R = {o}"));
            th.push(String::new());
        }
        let mut h2 = vec![if layout == Layout::Sequential { "Design".to_string() } else { "Method".to_string() }];
        let mut body = Vec::new();
        for _ in &ors {
            if layout == Layout::Sequential {
                h2.extend(["Power (interim; final)".to_string(), "E[N]".to_string()]);
            } else {
                h2.extend(["subgroup 1".to_string(), "subgroups 2+".to_string()]);
            }
        }
        for (s, method) in keys.iter().filter(|k| k.0 == scen) {
            let mut line = vec![method.clone()];
            for o in &ors {
                let r = oc
                    .results
                    .iter()
                    .find(|r| &r.scenario == s && &r.method == method && &or_label(r.odds_ratio) == o);
                match (r, layout) {
                    (Some(r), Layout::Sequential) => {
                        let c = cells(r, layout);
                        line.push(format!("{} ({}; {})", c[0], c[1], c[2]));
                        line.push(c[3].clone());
                    }
                    (Some(r), _) => line.extend(cells(r, layout)),
                    (None, _) => line.extend([String::new(), String::new()]),
                }
            }
            body.push(line);
        }
        let mut all = vec![h2];
        all.extend(body);
        text.push_str(&align(&th, &all));
        text.push('\n');
    }
    Table { csv, text }
}

// Left-aligned columns separated by two spaces.
fn align(header: &[String], rows: &[Vec<String>]) -> String {
    let ncol = header.len().max(rows.iter().map(Vec::len).max().unwrap_or(0));
    let mut w = vec![0usize; ncol];
    for r in std::iter::once(header).chain(rows.iter().map(Vec::as_slice)) {
        for (j, c) in r.iter().enumerate() {
            w[j] = w[j].max(c.chars().count());
        }
    }
    let line = |r: &[String]| {
        let s: Vec<String> = (0..ncol)
            .map(|j| {
                let c = r.get(j).map_or("", String::as_str);
                format!("{c:<width$}", width = w[j])
            })
            .collect();
        s.join("  ").trim_end().to_string() + "\n"
    };
    let mut out = line(header);
    for r in rows {
        out.push_str(&line(r));
    }
    out
}
