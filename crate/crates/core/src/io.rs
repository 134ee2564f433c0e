//! Text formats for instances and solutions.
//!
//! Instance file, one block per instance:
//!
//! ```text
//! VRPT 1 <kind> <n> <capacity> <alpha>
//! <index> <x> <y> <demand> <e> <l> <s>      (n + 1 lines)
//! ```
//!
//! Window and service columns are zero for kinds without time windows.
//! Floats carry nine significant digits. Solution files hold one line per
//! instance with space-separated node indices.

use std::fmt::Write as _;

use crate::error::{Result, VrpError};
use crate::problem::{Instance, Node, ProblemKind, Solution};

pub const FORMAT_VERSION: u32 = 1;

fn format_err(line: usize, msg: impl Into<String>) -> VrpError {
    VrpError::Format { line, msg: msg.into() }
}

/// Rounds to nine significant decimal digits.
pub fn round_sig9(x: f64) -> f64 {
    if x == 0.0 || !x.is_finite() {
        return x;
    }
    format!("{x:.8e}").parse().expect("scientific notation parses")
}

/// Nine significant digits in plain decimal notation, trailing zeros
/// trimmed. `parse(format_sig9(x)) == round_sig9(x)`.
pub fn format_sig9(x: f64) -> String {
    if x == 0.0 {
        return "0".to_string();
    }
    let sci = format!("{x:.8e}");
    let (mantissa, exp) = sci.split_once('e').expect("scientific notation");
    let exp: i32 = exp.parse().expect("integer exponent");
    let negative = mantissa.starts_with('-');
    let digits: String = mantissa.chars().filter(char::is_ascii_digit).collect();
    let mut out = String::new();
    if negative {
        out.push('-');
    }
    if exp < 0 {
        out.push_str("0.");
        for _ in 0..(-exp - 1) {
            out.push('0');
        }
        out.push_str(&digits);
    } else {
        let int_len = exp as usize + 1;
        if int_len >= digits.len() {
            out.push_str(&digits);
            for _ in digits.len()..int_len {
                out.push('0');
            }
        } else {
            out.push_str(&digits[..int_len]);
            out.push('.');
            out.push_str(&digits[int_len..]);
        }
    }
    if out.contains('.') {
        while out.ends_with('0') {
            out.pop();
        }
        if out.ends_with('.') {
            out.pop();
        }
    }
    out
}

pub fn write_instance(inst: &Instance, out: &mut String) {
    let _ = writeln!(
        out,
        "VRPT {FORMAT_VERSION} {} {} {} {}",
        inst.kind,
        inst.n_customers(),
        inst.capacity,
        format_sig9(inst.alpha)
    );
    let tw = inst.kind.has_time_windows();
    for node in &inst.nodes {
        let (e, l, s) = if tw { (node.early, node.late, node.service) } else { (0.0, 0.0, 0.0) };
        let _ = writeln!(
            out,
            "{} {} {} {} {} {} {}",
            node.index,
            format_sig9(node.x),
            format_sig9(node.y),
            node.demand,
            format_sig9(e),
            format_sig9(l),
            format_sig9(s)
        );
    }
}

pub fn dataset_to_string(insts: &[Instance]) -> String {
    let mut out = String::new();
    for inst in insts {
        write_instance(inst, &mut out);
    }
    out
}

fn field<T: std::str::FromStr>(tok: Option<&str>, line: usize, what: &str) -> Result<T> {
    let tok = tok.ok_or_else(|| format_err(line, format!("missing {what}")))?;
    tok.parse().map_err(|_| format_err(line, format!("bad {what} `{tok}`")))
}

/// Parses every instance block of a dataset file.
pub fn parse_dataset(text: &str) -> Result<Vec<Instance>> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
        .peekable();
    let mut out = Vec::new();
    while let Some((ln, header)) = lines.next() {
        let mut toks = header.split_whitespace();
        if toks.next() != Some("VRPT") {
            return Err(format_err(ln, "expected `VRPT` header"));
        }
        let version: u32 = field(toks.next(), ln, "version")?;
        if version != FORMAT_VERSION {
            return Err(format_err(ln, format!("unsupported format version {version}")));
        }
        let kind: ProblemKind = toks
            .next()
            .ok_or_else(|| format_err(ln, "missing kind"))?
            .parse()
            .map_err(|e: VrpError| format_err(ln, e.to_string()))?;
        let n: usize = field(toks.next(), ln, "customer count")?;
        let capacity: u32 = field(toks.next(), ln, "capacity")?;
        let alpha: f64 = field(toks.next(), ln, "alpha")?;
        if toks.next().is_some() {
            return Err(format_err(ln, "trailing tokens in header"));
        }
        let mut nodes = Vec::with_capacity(n + 1);
        for expect in 0..=n {
            let (nl, line) = lines
                .next()
                .ok_or_else(|| format_err(ln, format!("instance truncated after {expect} nodes")))?;
            let mut t = line.split_whitespace();
            let index: usize = field(t.next(), nl, "index")?;
            if index != expect {
                return Err(format_err(nl, format!("expected node {expect}, found {index}")));
            }
            let x = field(t.next(), nl, "x")?;
            let y = field(t.next(), nl, "y")?;
            let demand = field(t.next(), nl, "demand")?;
            let e: f64 = field(t.next(), nl, "early")?;
            let l: f64 = field(t.next(), nl, "late")?;
            let s: f64 = field(t.next(), nl, "service")?;
            if t.next().is_some() {
                return Err(format_err(nl, "trailing tokens in node line"));
            }
            let node = if kind.has_time_windows() {
                Node { index, x, y, demand, early: e, late: l, service: s }
            } else {
                Node::plain(index, x, y, demand)
            };
            nodes.push(node);
        }
        let inst = Instance { kind, nodes, capacity, alpha };
        inst.check().map_err(|e| format_err(ln, e.to_string()))?;
        out.push(inst);
    }
    Ok(out)
}

pub fn solutions_to_string(sols: &[Solution]) -> String {
    let mut out = String::new();
    for s in sols {
        let _ = writeln!(out, "{s}");
    }
    out
}

pub fn parse_solutions(text: &str) -> Result<Vec<Solution>> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            l.split_whitespace()
                .map(|t| t.parse::<usize>().map_err(|_| format_err(i + 1, format!("bad node index `{t}`"))))
                .collect::<Result<Vec<_>>>()
                .map(Solution::new)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generator::{gen_dataset, AlphaMode, CapacityMode, GenSpec};

    #[test]
    fn sig9_formatting() {
        assert_eq!(format_sig9(0.5), "0.5");
        assert_eq!(format_sig9(3.0), "3");
        assert_eq!(format_sig9(0.123456789012), "0.123456789");
        assert_eq!(format_sig9(1.0e-5), "0.00001");
        assert_eq!(format_sig9(-2.25), "-2.25");
        assert_eq!(format_sig9(123456789012.0), "123456789000");
        for x in [0.1, 1.0 / 3.0, 2.0f64.sqrt(), 7.0e-7, 0.999999999] {
            assert_eq!(format_sig9(x).parse::<f64>().unwrap(), round_sig9(x));
        }
    }

    #[test]
    fn dataset_round_trip() {
        for kind in ProblemKind::ALL {
            let mut spec = GenSpec::new(kind, 12, CapacityMode::Range(10, 60), 3, 5);
            spec.alpha = AlphaMode::Range(0.2, 3.0);
            let insts = gen_dataset(&spec).unwrap();
            let text = dataset_to_string(&insts);
            assert_eq!(parse_dataset(&text).unwrap(), insts, "{kind}");
        }
    }

    #[test]
    fn bad_headers_are_format_errors() {
        assert!(matches!(parse_dataset("VRPX 1 CVRP 0 10 1\n0 0 0 0 0 0 0\n"), Err(VrpError::Format { .. })));
        assert!(matches!(parse_dataset("VRPT 2 CVRP 0 10 1\n0 0 0 0 0 0 0\n"), Err(VrpError::Format { .. })));
        assert!(matches!(parse_dataset("VRPT 1 CVRP 1 10 1\n0 0 0 0 0 0 0\n"), Err(VrpError::Format { .. })));
        assert!(parse_dataset("VRPT 1 CVRP 1 10 1\n0 0 0 0 0 0 0\n1 0.5 0.5 3 0 0 0\n").is_ok());
    }

    #[test]
    fn solution_lines() {
        let sols = vec![Solution::new(vec![0, 1, 2, 0, 3, 0]), Solution::new(vec![0, 2, 1])];
        let text = solutions_to_string(&sols);
        assert_eq!(text, "0 1 2 0 3 0\n0 2 1\n");
        assert_eq!(parse_solutions(&text).unwrap(), sols);
        assert!(parse_solutions("0 x 0\n").is_err());
    }
}
