//! Text tables and plot CSVs, rendered from the JSON form of the reports so
//! stored reports re-render identically.

use std::fmt::Write as _;

use serde_json::Value;

use super::suite::LimitReport;

fn num(v: &Value) -> String {
    v.as_f64().map_or("-".into(), |x| format!("{x:.4}"))
}

fn ext(v: &Value) -> String {
    match v.get("status").and_then(Value::as_str) {
        Some("finite") => num(&v["value"]),
        Some("plus_infinity") => "+inf".into(),
        Some("minus_infinity") => "-inf".into(),
        Some(other) => other.into(),
        None => "-".into(),
    }
}

fn integral(v: &Value) -> String {
    match v.get("status").and_then(Value::as_str) {
        Some("converged") => num(&v["value"]),
        Some(s) => s.into(),
        None => "-".into(),
    }
}

fn text(v: &Value) -> &str {
    v.as_str().unwrap_or("-")
}

fn items(v: &Value) -> &[Value] {
    v.as_array().map_or(&[], Vec::as_slice)
}

fn tolerance_line(s: &mut String, label: &str, id: &Value) {
    let pass = if id["pass"].as_bool() == Some(true) { "pass" } else { "fail" };
    let _ = writeln!(
        s,
        "  {label} {:<44} {:>10} (tol {}) {pass}",
        text(&id["name"]),
        num(&id["value"]),
        num(&id["tolerance"])
    );
}

/// Plain-text table of a JSON array of reports.
pub fn render_value(reports: &Value) -> String {
    let mut s = String::new();
    for rep in items(reports) {
        let _ = writeln!(s, "system {}: {}", text(&rep["system_id"]), text(&rep["verdict"]));
        let _ = writeln!(
            s,
            "  {:<18} {:>10} {:>16} {:>16} {:>10}  verdict",
            "integral", "bound", "quadrature", "empirical", "mi_diff"
        );
        for rec in items(&rep["records"]) {
            let _ = writeln!(
                s,
                "  {:<18} {:>10} {:>16} {:>16} {:>10}  {}",
                text(&rec["kind"]),
                ext(&rec["analytic_bound"]),
                integral(&rec["quadrature_value"]),
                integral(&rec["empirical_integral"]),
                num(&rec["mi_rate_difference"]),
                text(&rec["verdict"])
            );
            for c in items(&rec["checks"]) {
                let _ = writeln!(
                    s,
                    "      {:<52} {:>10} >= {:>10}  {}",
                    text(&c["relation"]),
                    num(&c["lhs"]),
                    ext(&c["rhs"]),
                    text(&c["verdict"])
                );
            }
        }
        for id in items(&rep["identities"]) {
            tolerance_line(&mut s, "identity", id);
        }
        for id in items(&rep["appendix"]["identities"]) {
            tolerance_line(&mut s, "spectral", id);
        }
        for c in items(&rep["lemma1"]["records"]) {
            let _ = writeln!(
                s,
                "  curve {:<18} median rel err {:>10}  integral {:>16} vs {:>16}  {}",
                text(&c["kind"]),
                num(&c["median_rel_error"]),
                integral(&c["empirical"]),
                integral(&c["quadrature"]),
                if c["pass"].as_bool() == Some(true) { "pass" } else { "fail" }
            );
        }
        for n in items(&rep["notes"]) {
            let _ = writeln!(s, "  note: {}", text(n));
        }
    }
    s
}

pub fn render_text(reports: &[LimitReport]) -> String {
    render_value(&serde_json::to_value(reports).expect("reports serialize"))
}

fn csv_num(v: &Value) -> String {
    v.as_f64().map_or("NaN".into(), |x| x.to_string())
}

/// One CSV per estimated curve: `omega,reference,estimate,integrand`.
///
/// Returns `(file name, contents)` pairs.
pub fn curve_csvs(reports: &Value) -> Vec<(String, String)> {
    let mut out = Vec::new();
    for rep in items(reports) {
        let id = text(&rep["system_id"]);
        for c in items(&rep["lemma1"]["records"]) {
            let smp = &c["samples"];
            let cols = ["omega", "reference", "estimate", "integrand"].map(|k| items(&smp[k]));
            let mut body = String::from("omega,reference,estimate,integrand\n");
            for k in 0..cols[0].len() {
                let row: Vec<String> = cols.iter().map(|c| c.get(k).map_or("NaN".into(), csv_num)).collect();
                body.push_str(&row.join(","));
                body.push('\n');
            }
            out.push((format!("{id}_{}_curve.csv", text(&c["kind"])), body));
        }
    }
    out
}
