//! Plain-text renderings of trajectories, curves, and grids.
//!
//! Everything here is a pure function from finished results to a `String`,
//! with floats in shortest round-trip form, so identical results render to
//! identical bytes no matter where or how parallel the run was.

use std::fmt::Write as _;

use crate::dtmetric::{DtCurve, EstimatorComparison, GridReport};
use crate::editor::EditTrajectory;
use crate::world::AttributeAccuracy;

/// Quote a CSV field when it contains a delimiter, quote, or newline.
fn csv_field(raw: &str) -> String {
    if raw.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", raw.replace('"', "\"\""))
    } else {
        raw.to_string()
    }
}

/// One row per visited point: both classifier scores and the oracle label
/// for every attribute, in world attribute order.
pub fn trajectory_csv(attribute_names: &[String], t: &EditTrajectory) -> String {
    let mut out = String::from("step");
    for name in attribute_names {
        write!(out, ",edit_{}", csv_field(name)).unwrap();
    }
    for name in attribute_names {
        write!(out, ",eval_{}", csv_field(name)).unwrap();
    }
    for name in attribute_names {
        write!(out, ",oracle_{}", csv_field(name)).unwrap();
    }
    out.push('\n');
    for point in &t.points {
        write!(out, "{}", point.step).unwrap();
        for s in &point.edit_scores {
            write!(out, ",{s}").unwrap();
        }
        for s in &point.eval_scores {
            write!(out, ",{s}").unwrap();
        }
        for label in &point.oracle_labels {
            write!(out, ",{}", u8::from(*label)).unwrap();
        }
        out.push('\n');
    }
    out
}

/// Held-out accuracy of both classifier sets, one row per attribute.
pub fn accuracy_csv(accuracies: &[AttributeAccuracy]) -> String {
    let mut out = String::from("attribute,edit_holdout,eval_holdout\n");
    for acc in accuracies {
        writeln!(
            out,
            "{},{},{}",
            csv_field(&acc.attribute),
            acc.edit_holdout,
            acc.eval_holdout
        )
        .unwrap();
    }
    out
}

pub fn curve_csv(curve: &DtCurve) -> String {
    let mut out = String::from("step,p,q\n");
    for pt in &curve.points {
        writeln!(out, "{},{},{}", pt.step, pt.p, pt.q).unwrap();
    }
    out
}

/// Mean area per factor cell as a matrix: one row per lambda1, one column
/// per lambda2.
pub fn grid_matrix_csv(report: &GridReport) -> String {
    let mut out = String::from("lambda1");
    for l2 in &report.lambdas {
        write!(out, ",lambda2={l2}").unwrap();
    }
    out.push('\n');
    let columns = report.lambdas.len();
    for (row, l1) in report.lambdas.iter().enumerate() {
        write!(out, "{l1}").unwrap();
        for cell in &report.cells[row * columns..(row + 1) * columns] {
            write!(out, ",{}", cell.mean_auc).unwrap();
        }
        out.push('\n');
    }
    out
}

/// One row per (factor cell, ordered attribute pair), in evaluation order.
pub fn grid_pairs_csv(report: &GridReport) -> String {
    let mut out = String::from("lambda1,lambda2,primal,condition,auc,aborted\n");
    for cell in &report.cells {
        for pair in &cell.pairs {
            writeln!(
                out,
                "{},{},{},{},{},{}",
                cell.lambda1,
                cell.lambda2,
                csv_field(&pair.primal),
                csv_field(&pair.condition),
                pair.auc,
                pair.aborted
            )
            .unwrap();
        }
    }
    out
}

/// Step-aligned comparison of two curves measured on the same draws.
pub fn paired_curve_csv(labels: (&str, &str), a: &DtCurve, b: &DtCurve) -> String {
    let mut out = format!(
        "step,p_{0},q_{0},p_{1},q_{1}\n",
        csv_field(labels.0),
        csv_field(labels.1)
    );
    for (pa, pb) in a.points.iter().zip(&b.points) {
        writeln!(out, "{},{},{},{},{}", pa.step, pa.p, pa.q, pb.p, pb.q).unwrap();
    }
    out
}

pub fn comparison_csv(cmp: &EstimatorComparison) -> String {
    let mut out = String::from("attribute,cosine,auc_averaging,auc_boundary\n");
    for row in &cmp.per_attribute {
        writeln!(
            out,
            "{},{},{},{}",
            csv_field(&row.attribute),
            row.cosine,
            row.auc_averaging,
            row.auc_boundary
        )
        .unwrap();
    }
    out
}

const SVG_WIDTH: f64 = 640.0;
const SVG_HEIGHT: f64 = 480.0;
const MARGIN_LEFT: f64 = 56.0;
const MARGIN_RIGHT: f64 = 16.0;
const MARGIN_TOP: f64 = 16.0;
const MARGIN_BOTTOM: f64 = 44.0;
const PALETTE: [&str; 6] = [
    "#1965b0", "#dc050c", "#4eb265", "#f1932d", "#882e72", "#555555",
];

fn x_of(p: f64) -> f64 {
    MARGIN_LEFT + p * (SVG_WIDTH - MARGIN_LEFT - MARGIN_RIGHT)
}

fn y_of(q: f64) -> f64 {
    SVG_HEIGHT - MARGIN_BOTTOM - q * (SVG_HEIGHT - MARGIN_TOP - MARGIN_BOTTOM)
}

/// Render labeled curves as q over p on a fixed [0,1] x [0,1] frame.
pub fn curve_svg(curves: &[(String, &DtCurve)]) -> String {
    let mut out = String::new();
    write!(
        out,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{SVG_WIDTH}\" height=\"{SVG_HEIGHT}\" \
         viewBox=\"0 0 {SVG_WIDTH} {SVG_HEIGHT}\" font-family=\"sans-serif\" font-size=\"12\">\n"
    )
    .unwrap();
    writeln!(
        out,
        "  <rect width=\"{SVG_WIDTH}\" height=\"{SVG_HEIGHT}\" fill=\"white\"/>"
    )
    .unwrap();
    // Frame and gridlines every 0.2.
    for i in 0..=5 {
        let v = i as f64 / 5.0;
        let (x, y) = (x_of(v), y_of(v));
        writeln!(
            out,
            "  <line x1=\"{x:.1}\" y1=\"{:.1}\" x2=\"{x:.1}\" y2=\"{:.1}\" stroke=\"#dddddd\"/>",
            y_of(0.0),
            y_of(1.0)
        )
        .unwrap();
        writeln!(
            out,
            "  <line x1=\"{:.1}\" y1=\"{y:.1}\" x2=\"{:.1}\" y2=\"{y:.1}\" stroke=\"#dddddd\"/>",
            x_of(0.0),
            x_of(1.0)
        )
        .unwrap();
        writeln!(
            out,
            "  <text x=\"{x:.1}\" y=\"{:.1}\" text-anchor=\"middle\">{v:.1}</text>",
            y_of(0.0) + 18.0
        )
        .unwrap();
        writeln!(
            out,
            "  <text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"end\">{v:.1}</text>",
            x_of(0.0) - 8.0,
            y + 4.0
        )
        .unwrap();
    }
    writeln!(
        out,
        "  <text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"middle\">transformation accuracy p</text>",
        x_of(0.5),
        SVG_HEIGHT - 8.0
    )
    .unwrap();
    writeln!(
        out,
        "  <text x=\"14\" y=\"{:.1}\" text-anchor=\"middle\" transform=\"rotate(-90 14 {:.1})\">\
         disentanglement accuracy q</text>",
        y_of(0.5),
        y_of(0.5)
    )
    .unwrap();
    for (k, (label, curve)) in curves.iter().enumerate() {
        let color = PALETTE[k % PALETTE.len()];
        let mut path = String::new();
        for pt in &curve.points {
            write!(path, "{}{:.2},{:.2}", if path.is_empty() { "" } else { " " }, x_of(pt.p), y_of(pt.q))
                .unwrap();
        }
        writeln!(
            out,
            "  <polyline points=\"{path}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\"/>"
        )
        .unwrap();
        writeln!(
            out,
            "  <text x=\"{:.1}\" y=\"{:.1}\" fill=\"{color}\">{}</text>",
            x_of(0.02),
            y_of(0.0) - 10.0 - 16.0 * k as f64,
            xml_escape(label)
        )
        .unwrap();
    }
    out.push_str("</svg>\n");
    out
}

fn xml_escape(raw: &str) -> String {
    raw.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
