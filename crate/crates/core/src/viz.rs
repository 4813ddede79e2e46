//! Static renderings: the dependence graph as DOT and the straight-line
//! schedule as an SVG Gantt chart.

use std::fmt::Write as _;

use crate::ir::{DepGraph, MachineDesc};
use crate::joint::JointSolution;

const PALETTE: [&str; 8] = ["#8dd3c7", "#fdb462", "#bebada", "#fb8072", "#80b1d3", "#b3de69", "#fccde5", "#d9d9d9"];
const DEFAULT_FILL: &str = "#ffffff";

fn quote(s: &str) -> String {
    format!("\"{}\"", s.replace('\\', "\\\\").replace('"', "\\\""))
}

fn xml(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

/// Fill color for a node: keyed by the first slot of its warp range.
fn fill(sol: Option<&JointSolution>, v: usize) -> &'static str {
    match sol.and_then(|s| s.ranges.get(v)) {
        Some(r) => PALETTE[r.first() as usize % PALETTE.len()],
        None => DEFAULT_FILL,
    }
}

/// DOT digraph of `g`. With a solution, nodes are filled by warp range.
/// Variable-latency nodes are drawn as ellipses, loop-carried edges dashed.
pub fn emit_dot(g: &DepGraph, sol: Option<&JointSolution>) -> String {
    let mut out = String::from("digraph G {\n  node [shape=box, style=filled];\n");
    for (v, node) in g.nodes.iter().enumerate() {
        let shape = if node.variable_latency { "ellipse" } else { "box" };
        let mut label = format!("{}\\n{}", node.id, node.opcode());
        if let Some(r) = sol.and_then(|s| s.ranges.get(v)) {
            let _ = write!(label, "\\nwarp[{r}]");
        }
        let _ = writeln!(
            out,
            "  {} [label=\"{}\", shape={shape}, fillcolor=\"{}\"];",
            quote(&node.id),
            label.replace('"', "\\\""),
            fill(sol, v)
        );
    }
    for e in &g.edges {
        let (src, dst) = (quote(&g.nodes[e.src].id), quote(&g.nodes[e.dst].id));
        let mut attrs = Vec::new();
        if e.delta > 0 {
            attrs.push("style=dashed".to_string());
            attrs.push(format!("label=\"d={}, δ={}\"", e.d, e.delta));
        } else {
            attrs.push(format!("label=\"d={}\"", e.d));
        }
        if e.blocking {
            attrs.push("arrowhead=tee".to_string());
        }
        let _ = writeln!(out, "  {src} -> {dst} [{}];", attrs.join(", "));
    }
    out.push_str("}\n");
    out
}

const CELL: u32 = 40;
const ROW: u32 = 28;
const MARGIN: u32 = 80;
const TOP: u32 = 24;

/// SVG chart of the straight-line program: one row per functional unit and
/// per warp slot, a box per `(node, copy)` across its cycles, and shaded
/// prologue, steady-state and epilogue bands.
pub fn emit_gantt(sol: &JointSolution, g: &DepGraph, m: &MachineDesc) -> String {
    let horizon = if g.nodes.is_empty() { 0 } else { sol.horizon() };
    let warps = m.total_warps();
    let rows = m.units.len() as u32 + warps;
    let width = MARGIN + horizon * CELL + 10;
    let height = TOP + rows * ROW + 10;
    let mut out = String::new();
    let _ = writeln!(
        out,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width}\" height=\"{height}\" font-family=\"monospace\" font-size=\"11\">"
    );
    let _ = writeln!(out, "<title>I={} L={} T={}</title>", sol.ii(), sol.length(), horizon);
    if g.nodes.is_empty() {
        out.push_str("</svg>\n");
        return out;
    }
    let x = |t: u32| MARGIN + t * CELL;
    let body_h = rows * ROW;

    let pro = sol.shape.prologue_end();
    let steady = sol.shape.steady_end();
    let bands = [(0, pro, "#eeeeee", "prologue"), (steady, horizon, "#f6f0e0", "epilogue")];
    for (a, b, color, name) in bands {
        if b > a {
            let _ = writeln!(
                out,
                "<rect class=\"{name}\" x=\"{}\" y=\"{TOP}\" width=\"{}\" height=\"{body_h}\" fill=\"{color}\"/>",
                x(a),
                (b - a) * CELL
            );
        }
    }
    let _ = writeln!(
        out,
        "<rect class=\"steady_state\" x=\"{}\" y=\"{TOP}\" width=\"{}\" height=\"{body_h}\" fill=\"none\" stroke=\"#333333\" stroke-dasharray=\"4 3\"/>",
        x(pro),
        (steady - pro) * CELL
    );
    for t in 0..horizon {
        let _ = writeln!(out, "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">{t}</text>", x(t) + CELL / 2, TOP - 8);
    }

    let labels: Vec<String> = m
        .units
        .iter()
        .map(|u| u.name.clone())
        .chain((0..warps).map(|w| if w == m.vl_warp { format!("w{w} (vl)") } else { format!("w{w}") }))
        .collect();
    for (r, label) in labels.iter().enumerate() {
        let y = TOP + r as u32 * ROW;
        let _ = writeln!(out, "<text x=\"4\" y=\"{}\">{}</text>", y + ROW / 2 + 4, xml(label));
        let _ = writeln!(
            out,
            "<line x1=\"{MARGIN}\" y1=\"{y}\" x2=\"{}\" y2=\"{y}\" stroke=\"#cccccc\"/>",
            x(horizon)
        );
    }

    let boxes = |out: &mut String, row: u32, t: u32, span: u32, color: &str, text: &str| {
        let y = TOP + row * ROW + 3;
        let _ = writeln!(
            out,
            "<rect x=\"{}\" y=\"{y}\" width=\"{}\" height=\"{}\" fill=\"{color}\" stroke=\"#000000\"/>",
            x(t) + 1,
            span * CELL - 2,
            ROW - 6
        );
        let _ = writeln!(out, "<text x=\"{}\" y=\"{}\">{}</text>", x(t) + 4, y + ROW / 2 + 1, xml(text));
    };
    for (v, node) in g.nodes.iter().enumerate() {
        let color = fill(Some(sol), v);
        for i in 0..sol.copies() {
            let t = sol.placement(v, i);
            let text = format!("{}#{i}", node.id);
            for f in 0..m.units.len() {
                if node.rrt.row(f).iter().any(|&k| k > 0) {
                    boxes(&mut out, f as u32, t, node.span(), color, &text);
                }
            }
            for &w in &sol.ranges[v].slots {
                boxes(&mut out, m.units.len() as u32 + w, t, node.span(), color, &text);
            }
        }
    }
    out.push_str("</svg>\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ir::{parse_problem, WarpRange};
    use crate::straightline::Shape;

    fn gemm_exp_gemm(ranges: Vec<WarpRange>) -> (JointSolution, DepGraph, MachineDesc) {
        let (g, m) = parse_problem(include_str!("../fixtures/gemm_exp_gemm.json")).unwrap();
        let sol = JointSolution::from_assignment(&g, &m, Shape::new(2, 4), vec![0, 2, 3], ranges, Default::default());
        (sol, g, m)
    }

    #[test]
    fn dot_uncolored() {
        let (_, g, _) = gemm_exp_gemm(vec![WarpRange::single(0); 3]);
        let dot = emit_dot(&g, None);
        assert_eq!(dot.matches(" -> ").count(), 3);
        assert_eq!(dot.matches("style=dashed").count(), 1);
        assert!(dot.contains("\"O\" -> \"O\" [style=dashed, label=\"d=1, δ=1\"]"));
        assert_eq!(dot.matches(DEFAULT_FILL).count(), 3);
    }

    #[test]
    fn dot_two_colors() {
        let (sol, g, _) = gemm_exp_gemm(vec![WarpRange::single(0), WarpRange::single(1), WarpRange::single(0)]);
        let dot = emit_dot(&g, Some(&sol));
        assert!(dot.contains(PALETTE[0]) && dot.contains(PALETTE[1]));
        assert!(!dot.contains(DEFAULT_FILL));
    }

    #[test]
    fn gantt_bands() {
        let (sol, g, m) = gemm_exp_gemm(vec![WarpRange::single(0); 3]);
        let svg = emit_gantt(&sol, &g, &m);
        assert!(svg.contains("<title>I=2 L=4 T=6</title>"));
        let steady = format!("class=\"steady_state\" x=\"{}\" y=\"{TOP}\" width=\"{}\"", MARGIN + 2 * CELL, 2 * CELL);
        assert!(svg.contains(&steady));
        assert!(svg.contains("stroke-dasharray"));
        assert_eq!(svg, emit_gantt(&sol, &g, &m));
    }

    #[test]
    fn gantt_empty_graph() {
        let (sol, _, m) = gemm_exp_gemm(vec![WarpRange::single(0); 3]);
        let svg = emit_gantt(&sol, &DepGraph::default(), &m);
        assert!(!svg.contains("<rect"));
        assert!(svg.ends_with("</svg>\n"));
    }
}
