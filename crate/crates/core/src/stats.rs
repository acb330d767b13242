//! Monthly indicators and their export.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::SimError;
use crate::state::{FirmKind, Person, World};

/// Gini coefficient as mean absolute difference over twice the mean.
/// Negative values count as zero. `None` for an empty input.
pub fn gini(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v: Vec<f64> = values.iter().map(|x| x.max(0.0)).collect();
    v.sort_by(f64::total_cmp);
    let n = v.len() as f64;
    let total: f64 = v.iter().sum();
    if total <= 0.0 {
        return Some(0.0);
    }
    // sum_i sum_j |x_i - x_j| = 2 * sum_i (2i - n + 1) x_i over sorted x.
    let weighted: f64 = v
        .iter()
        .enumerate()
        .map(|(i, x)| (2.0 * i as f64 - n + 1.0) * x)
        .sum();
    Some((weighted / (n * total)).clamp(0.0, 1.0))
}

/// Jobless share of persons aged 16 to 70.
pub fn unemployment<'a>(persons: impl IntoIterator<Item = &'a Person>) -> Option<f64> {
    let (mut force, mut jobless) = (0usize, 0usize);
    for p in persons {
        if p.in_labor_force() {
            force += 1;
            if p.employer.is_none() {
                jobless += 1;
            }
        }
    }
    (force > 0).then(|| jobless as f64 / force as f64)
}

/// Revenue of the closed month per municipality.
pub fn gdp_by_municipality(w: &World) -> Vec<f64> {
    let mut out = vec![0.0; w.municipalities.len()];
    for f in w.firms.values() {
        out[w.region_municipality(f.region).index()] += f.last_revenue.to_units();
    }
    out
}

/// Sales-weighted mean goods price, unweighted when nothing sold.
pub fn mean_price(prices_and_sales: &[(f64, f64)]) -> Option<f64> {
    if prices_and_sales.is_empty() {
        return None;
    }
    let sold: f64 = prices_and_sales.iter().map(|x| x.1).sum();
    if sold > 0.0 {
        Some(prices_and_sales.iter().map(|(p, s)| p * s).sum::<f64>() / sold)
    } else {
        Some(prices_and_sales.iter().map(|x| x.0).sum::<f64>() / prices_and_sales.len() as f64)
    }
}

fn quartiles(mut v: Vec<f64>) -> Option<(f64, f64, f64)> {
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    let at = |q: f64| {
        let pos = q * (v.len() - 1) as f64;
        let (lo, hi) = (pos.floor() as usize, pos.ceil() as usize);
        v[lo] + (v[hi] - v[lo]) * (pos - lo as f64)
    };
    Some((at(0.25), at(0.5), at(0.75)))
}

fn mean(v: impl Iterator<Item = f64>) -> Option<f64> {
    let (mut s, mut n) = (0.0, 0usize);
    for x in v {
        s += x;
        n += 1;
    }
    (n > 0).then(|| s / n as f64)
}

/// Indicators of one month. `None` marks an undefined value.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct IndicatorFrame {
    pub month: u32,
    pub gdp: f64,
    pub gini: Option<f64>,
    pub unemployment: Option<f64>,
    pub price_index: Option<f64>,
    /// Cumulative inflation since month 0.
    pub inflation: Option<f64>,
    pub house_price_stock: Option<f64>,
    pub house_price_sales: Option<f64>,
    pub rent_default: Option<f64>,
    pub null_consumption: Option<f64>,
    pub firm_profit_mean: Option<f64>,
    pub firm_profit_q1: Option<f64>,
    pub firm_profit_median: Option<f64>,
    pub firm_profit_q3: Option<f64>,
    pub population: f64,
    pub households: f64,
    pub firms: f64,
    pub houses_built: f64,
    pub sales: f64,
    pub rentals: f64,
    pub mortgages: f64,
    pub loan_book: f64,
    pub deposits: f64,
    pub qli: Vec<f64>,
    pub gini_municipal: Vec<Option<f64>>,
}

impl IndicatorFrame {
    /// Flat (name, value) pairs in a fixed order.
    pub fn columns(&self) -> Vec<(String, Option<f64>)> {
        let mut out: Vec<(String, Option<f64>)> = vec![
            ("gdp".into(), Some(self.gdp)),
            ("gini".into(), self.gini),
            ("unemployment".into(), self.unemployment),
            ("price_index".into(), self.price_index),
            ("inflation".into(), self.inflation),
            ("house_price_stock".into(), self.house_price_stock),
            ("house_price_sales".into(), self.house_price_sales),
            ("rent_default".into(), self.rent_default),
            ("null_consumption".into(), self.null_consumption),
            ("firm_profit_mean".into(), self.firm_profit_mean),
            ("firm_profit_q1".into(), self.firm_profit_q1),
            ("firm_profit_median".into(), self.firm_profit_median),
            ("firm_profit_q3".into(), self.firm_profit_q3),
            ("population".into(), Some(self.population)),
            ("households".into(), Some(self.households)),
            ("firms".into(), Some(self.firms)),
            ("houses_built".into(), Some(self.houses_built)),
            ("sales".into(), Some(self.sales)),
            ("rentals".into(), Some(self.rentals)),
            ("mortgages".into(), Some(self.mortgages)),
            ("loan_book".into(), Some(self.loan_book)),
            ("deposits".into(), Some(self.deposits)),
        ];
        for (i, q) in self.qli.iter().enumerate() {
            out.push((format!("qli_m{i}"), Some(*q)));
        }
        for (i, g) in self.gini_municipal.iter().enumerate() {
            out.push((format!("gini_m{i}"), *g));
        }
        out
    }
}

/// Computes the month's indicators and fixes the price base on the first call.
pub fn compute_frame(w: &mut World) -> IndicatorFrame {
    let pis: Vec<f64> = w.households.values().map(|h| h.pi).collect();
    let nm = w.municipalities.len();
    let mut by_muni: Vec<Vec<f64>> = vec![Vec::new(); nm];
    for h in w.households.values() {
        if let Some(m) = w.household_municipality(h.id) {
            by_muni[m.index()].push(h.pi);
        }
    }
    let consumer: Vec<(f64, f64)> = w
        .firms
        .values()
        .filter(|f| f.kind == FirmKind::Consumer)
        .map(|f| (f.price, f.sold))
        .collect();
    let price = mean_price(&consumer);
    if w.price_base.is_none() {
        w.price_base = price;
    }
    let price_index = match (price, w.price_base) {
        (Some(p), Some(b)) if b > 0.0 => Some(p / b),
        _ => None,
    };
    let nh = w.households.len();
    let share = |k: usize| (nh > 0).then(|| k as f64 / nh as f64);
    let tenants = w.households.values().filter(|h| h.rental.is_some()).count();
    let defaults = w
        .households
        .values()
        .filter(|h| h.rental.is_some() && h.defaulted_rent)
        .count();
    let profits: Vec<f64> = w.firms.values().map(|f| f.profit.to_units()).collect();
    let q = quartiles(profits.clone());
    let a = &w.activity;
    IndicatorFrame {
        month: w.month,
        gdp: gdp_by_municipality(w).iter().sum(),
        gini: gini(&pis),
        unemployment: unemployment(w.persons.values()),
        price_index,
        inflation: price_index.map(|p| p - 1.0),
        house_price_stock: mean(w.dwellings.values().map(|d| d.value)),
        house_price_sales: (a.sales > 0).then(|| a.sale_value / a.sales as f64),
        rent_default: (tenants > 0).then(|| defaults as f64 / tenants as f64),
        null_consumption: share(w.households.values().filter(|h| h.null_consumption).count()),
        firm_profit_mean: mean(profits.iter().copied()),
        firm_profit_q1: q.map(|x| x.0),
        firm_profit_median: q.map(|x| x.1),
        firm_profit_q3: q.map(|x| x.2),
        population: w.persons.len() as f64,
        households: nh as f64,
        firms: w.firms.len() as f64,
        houses_built: a.houses_built as f64,
        sales: a.sales as f64,
        rentals: a.rentals as f64,
        mortgages: a.mortgages as f64,
        loan_book: w.loan_book().to_units(),
        deposits: w.deposits().to_units(),
        qli: w
            .municipalities
            .iter()
            .map(|m| mean(m.regions.iter().map(|r| w.regions[r.index()].qli)).unwrap_or(0.0))
            .collect(),
        gini_municipal: by_muni.iter().map(|v| gini(v)).collect(),
    }
}

/// One finished (or failed) run, ready for export.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunRecord {
    pub run_id: String,
    /// Label used to group runs in comparisons (scenario or sweep point).
    pub group: String,
    pub scenario: String,
    pub seed: u64,
    pub frames: Vec<IndicatorFrame>,
    pub error: Option<String>,
    /// The run failed while being set up rather than while running.
    pub config_error: bool,
}

fn fmt_value(v: Option<f64>) -> String {
    match v {
        Some(x) if x.is_finite() => format!("{x}"),
        _ => String::new(),
    }
}

fn write_file(path: &Path, body: &str) -> Result<(), SimError> {
    std::fs::write(path, body).map_err(|e| SimError::io(path, e))
}

/// Writes one CSV per indicator with columns `month,value,run_id,scenario,seed`.
pub fn export_csv(dir: &Path, runs: &[RunRecord]) -> Result<Vec<PathBuf>, SimError> {
    std::fs::create_dir_all(dir).map_err(|e| SimError::io(dir, e))?;
    let mut names: Vec<String> = Vec::new();
    for r in runs {
        for f in &r.frames {
            for (n, _) in f.columns() {
                if !names.contains(&n) {
                    names.push(n);
                }
            }
        }
    }
    let mut written = Vec::new();
    for name in names {
        let mut body = String::from("month,value,run_id,scenario,seed\n");
        for r in runs {
            for f in &r.frames {
                let v = f
                    .columns()
                    .into_iter()
                    .find(|(n, _)| *n == name)
                    .and_then(|x| x.1);
                writeln!(
                    body,
                    "{},{},{},{},{}",
                    f.month,
                    fmt_value(v),
                    r.run_id,
                    r.group,
                    r.seed
                )
                .expect("string write");
            }
        }
        let path = dir.join(format!("{name}.csv"));
        write_file(&path, &body)?;
        written.push(path);
    }
    Ok(written)
}

/// Mean of an indicator per month across the runs of each group.
pub fn group_means(runs: &[RunRecord], indicator: &str) -> Vec<(String, Vec<(u32, f64)>)> {
    let mut groups: Vec<String> = Vec::new();
    for r in runs {
        if !groups.contains(&r.group) {
            groups.push(r.group.clone());
        }
    }
    groups
        .into_iter()
        .map(|g| {
            let mut acc: std::collections::BTreeMap<u32, (f64, usize)> = Default::default();
            for r in runs.iter().filter(|r| r.group == g) {
                for f in &r.frames {
                    if let Some(v) = f
                        .columns()
                        .into_iter()
                        .find(|(n, _)| n == indicator)
                        .and_then(|x| x.1)
                    {
                        let e = acc.entry(f.month).or_default();
                        e.0 += v;
                        e.1 += 1;
                    }
                }
            }
            (
                g,
                acc.into_iter()
                    .map(|(m, (s, n))| (m, s / n as f64))
                    .collect(),
            )
        })
        .collect()
}

const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf",
];

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

/// Line plot of group means for one indicator.
pub fn svg_plot(indicator: &str, series: &[(String, Vec<(u32, f64)>)]) -> String {
    let (w, h, pad) = (720.0, 400.0, 50.0);
    let pts: Vec<(u32, f64)> = series.iter().flat_map(|s| s.1.iter().copied()).collect();
    let (mut x0, mut x1) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY);
    for (m, v) in &pts {
        x0 = x0.min(*m as f64);
        x1 = x1.max(*m as f64);
        y0 = y0.min(*v);
        y1 = y1.max(*v);
    }
    if pts.is_empty() {
        (x0, x1, y0, y1) = (0.0, 1.0, 0.0, 1.0);
    }
    if x1 <= x0 {
        x1 = x0 + 1.0;
    }
    if y1 <= y0 {
        y1 = y0 + 1.0;
    }
    let sx = |x: f64| pad + (x - x0) / (x1 - x0) * (w - 2.0 * pad);
    let sy = |y: f64| h - pad - (y - y0) / (y1 - y0) * (h - 2.0 * pad);
    let mut out = String::new();
    writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#
    )
    .unwrap();
    writeln!(out, r#"<rect width="{w}" height="{h}" fill="white"/>"#).unwrap();
    writeln!(
        out,
        r#"<text x="{pad}" y="25" font-family="sans-serif" font-size="16">{}</text>"#,
        xml_escape(indicator)
    )
    .unwrap();
    writeln!(
        out,
        r#"<path d="M{pad} {pad} V{} H{}" fill="none" stroke="black"/>"#,
        h - pad,
        w - pad
    )
    .unwrap();
    writeln!(
        out,
        r#"<text x="5" y="{}" font-family="sans-serif" font-size="10">{y0:.4}</text>"#,
        h - pad
    )
    .unwrap();
    writeln!(
        out,
        r#"<text x="5" y="{}" font-family="sans-serif" font-size="10">{y1:.4}</text>"#,
        pad + 4.0
    )
    .unwrap();
    for (i, (name, s)) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let path: Vec<String> = s
            .iter()
            .map(|(m, v)| format!("{:.2},{:.2}", sx(*m as f64), sy(*v)))
            .collect();
        writeln!(
            out,
            r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#,
            path.join(" ")
        )
        .unwrap();
        let ly = pad + 14.0 * i as f64;
        writeln!(
            out,
            r#"<text x="{}" y="{ly}" font-family="sans-serif" font-size="11" fill="{color}">{}</text>"#,
            w - pad - 140.0,
            xml_escape(name)
        )
        .unwrap();
    }
    out.push_str("</svg>\n");
    out
}

/// Writes one SVG per indicator comparing the groups of runs.
pub fn export_svg(
    dir: &Path,
    runs: &[RunRecord],
    indicators: &[String],
) -> Result<Vec<PathBuf>, SimError> {
    std::fs::create_dir_all(dir).map_err(|e| SimError::io(dir, e))?;
    let mut written = Vec::new();
    for name in indicators {
        let path = dir.join(format!("{name}.svg"));
        write_file(&path, &svg_plot(name, &group_means(runs, name)))?;
        written.push(path);
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gini_examples() {
        assert_eq!(gini(&[3.0, 3.0, 3.0]), Some(0.0));
        assert!((gini(&[0.0, 0.0, 0.0, 1.0]).unwrap() - 0.75).abs() < 1e-12);
        assert_eq!(gini(&[]), None);
        assert_eq!(gini(&[0.0, 0.0]), Some(0.0));
    }

    #[test]
    fn price_weighting() {
        assert_eq!(mean_price(&[(1.0, 1.0), (2.0, 3.0)]), Some(1.75));
        assert_eq!(mean_price(&[(1.0, 0.0), (2.0, 0.0)]), Some(1.5));
        assert_eq!(mean_price(&[]), None);
    }

    #[test]
    fn quartile_interpolation() {
        assert_eq!(
            quartiles(vec![4.0, 1.0, 3.0, 2.0, 5.0]),
            Some((2.0, 3.0, 4.0))
        );
    }
}
