//! Multicommodity-flow MILP export in MPS format, plus a reader for
//! verifying written files.
//!
//! Directed arcs exclude supply-supply pairs. Binary variables `x_s_i_j`
//! assign arcs to supply-rooted paths and `y_s_i` allocate demands to
//! supplies; continuous `f_h_i_j` route one unit of commodity `h` from a
//! supply to demand `h`. The per-path constraint is linear in `f`: arc
//! weights enter with negative sign against the negative budget limit, which
//! is the log-linearized reliability constraint in reliability mode and the
//! plain delay bound in delay mode. Supply self-allocations are constants,
//! not variables, so no columns or rows are emitted for them.
//!
//! All vertex ids in names are 1-based.

use crate::instance::Instance;
use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use thiserror::Error;

/// Row sense in the MPS ROWS section.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Sense {
    Free,
    Equal,
    LessEq,
    GreaterEq,
}

impl Sense {
    fn letter(&self) -> char {
        match self {
            Sense::Free => 'N',
            Sense::Equal => 'E',
            Sense::LessEq => 'L',
            Sense::GreaterEq => 'G',
        }
    }

    fn from_letter(c: &str) -> Option<Self> {
        match c {
            "N" => Some(Sense::Free),
            "E" => Some(Sense::Equal),
            "L" => Some(Sense::LessEq),
            "G" => Some(Sense::GreaterEq),
            _ => None,
        }
    }
}

#[derive(Clone, Debug)]
pub struct Column {
    pub name: String,
    pub integer: bool,
    /// `(row index, coefficient)`; zero coefficients are never stored.
    pub entries: Vec<(usize, f64)>,
}

/// In-memory MILP in row/column form.
#[derive(Clone, Debug)]
pub struct MilpModel {
    pub name: String,
    /// Row 0 is the objective (sense N).
    pub rows: Vec<(String, Sense)>,
    pub columns: Vec<Column>,
    /// `(row index, value)`; zero right-hand sides are omitted.
    pub rhs: Vec<(usize, f64)>,
    /// Upper bounds `(column index, value)` for the binary variables.
    pub upper_bounds: Vec<(usize, f64)>,
}

/// Directed arcs: all ordered pairs minus self-loops and supply-supply arcs.
pub fn arc_count(n: usize, m: usize) -> usize {
    n * (n - 1) - m * (m - 1)
}

/// Total columns: `|A| m` x's, `(n - m) m` y's and `|A| (n - m)` f's.
pub fn column_count(n: usize, m: usize) -> usize {
    let a = arc_count(n, m);
    let k = n - m;
    a * m + k * m + a * k
}

/// Total constraint rows, objective excluded.
pub fn row_count(n: usize, m: usize) -> usize {
    let a = arc_count(n, m);
    let k = n - m;
    let edges = a / 2;
    1                     // arc cardinality
        + edges           // one direction and one supply per edge
        + k               // each demand allocated once
        + 2 * m * k * (n - 1) // x-y linking, tail and head side
        + m * k           // source flow equals allocation
        + k               // unit arrival at each commodity's demand
        + k * (k - 1)     // flow conservation at other demands
        + k * a           // flow only on chosen arcs
        + k               // per-path budget
}

struct RowBook {
    rows: Vec<(String, Sense)>,
    index: HashMap<String, usize>,
}

impl RowBook {
    fn new() -> Self {
        Self {
            rows: Vec::new(),
            index: HashMap::new(),
        }
    }

    fn add(&mut self, name: String, sense: Sense) -> usize {
        let idx = self.rows.len();
        self.index.insert(name.clone(), idx);
        self.rows.push((name, sense));
        idx
    }

    fn get(&self, name: &str) -> usize {
        self.index[name]
    }
}

fn arcs(inst: &Instance) -> Vec<(usize, usize)> {
    let n = inst.n();
    let mut out = Vec::with_capacity(arc_count(n, inst.m()));
    for i in 0..n {
        for j in 0..n {
            if i != j && !(inst.is_supply(i) && inst.is_supply(j)) {
                out.push((i, j));
            }
        }
    }
    out
}

/// Builds the full model for an instance.
pub fn build_milp(inst: &Instance) -> MilpModel {
    let (n, m) = (inst.n(), inst.m());
    let k = n - m;
    let arcs = arcs(inst);
    let mut book = RowBook::new();

    book.add("COST".into(), Sense::Free);
    book.add("ARCCOUNT".into(), Sense::Equal);
    for i in 0..n {
        for j in (i + 1)..n {
            if !(inst.is_supply(i) && inst.is_supply(j)) {
                book.add(format!("EDGE_{}_{}", i + 1, j + 1), Sense::LessEq);
            }
        }
    }
    for i in inst.demands() {
        book.add(format!("ASSIGN_{}", i + 1), Sense::Equal);
    }
    for s in inst.supplies() {
        for &(i, j) in &arcs {
            if !inst.is_supply(i) {
                book.add(format!("LINKI_{}_{}_{}", s + 1, i + 1, j + 1), Sense::LessEq);
            }
        }
    }
    for s in inst.supplies() {
        for &(i, j) in &arcs {
            if !inst.is_supply(j) {
                book.add(format!("LINKJ_{}_{}_{}", s + 1, i + 1, j + 1), Sense::LessEq);
            }
        }
    }
    for s in inst.supplies() {
        for h in inst.demands() {
            book.add(format!("SRCFLOW_{}_{}", s + 1, h + 1), Sense::Equal);
        }
    }
    for h in inst.demands() {
        book.add(format!("DEMFLOW_{}", h + 1), Sense::Equal);
    }
    for h in inst.demands() {
        for j in inst.demands() {
            if j != h {
                book.add(format!("CONSERV_{}_{}", h + 1, j + 1), Sense::Equal);
            }
        }
    }
    for h in inst.demands() {
        for &(i, j) in &arcs {
            book.add(format!("CAP_{}_{}_{}", h + 1, i + 1, j + 1), Sense::LessEq);
        }
    }
    for h in inst.demands() {
        book.add(format!("REL_{}", h + 1), Sense::GreaterEq);
    }

    let mut columns = Vec::with_capacity(column_count(n, m));
    let mut upper_bounds = Vec::new();
    let push_entry = |entries: &mut Vec<(usize, f64)>, row: usize, v: f64| {
        if v != 0.0 {
            entries.push((row, v));
        }
    };

    // x_s_i_j: binary arc-to-supply assignments.
    for s in inst.supplies() {
        for &(i, j) in &arcs {
            let mut entries = Vec::new();
            push_entry(&mut entries, book.get("COST"), inst.cost(i, j));
            push_entry(&mut entries, book.get("ARCCOUNT"), 1.0);
            let (lo, hi) = (i.min(j), i.max(j));
            push_entry(&mut entries, book.get(&format!("EDGE_{}_{}", lo + 1, hi + 1)), 1.0);
            if !inst.is_supply(i) {
                push_entry(
                    &mut entries,
                    book.get(&format!("LINKI_{}_{}_{}", s + 1, i + 1, j + 1)),
                    1.0,
                );
            }
            if !inst.is_supply(j) {
                push_entry(
                    &mut entries,
                    book.get(&format!("LINKJ_{}_{}_{}", s + 1, i + 1, j + 1)),
                    1.0,
                );
            }
            for h in inst.demands() {
                push_entry(
                    &mut entries,
                    book.get(&format!("CAP_{}_{}_{}", h + 1, i + 1, j + 1)),
                    -1.0,
                );
            }
            let idx = columns.len();
            upper_bounds.push((idx, 1.0));
            columns.push(Column {
                name: format!("x_{}_{}_{}", s + 1, i + 1, j + 1),
                integer: true,
                entries,
            });
        }
    }

    // y_s_i: binary demand allocations.
    for s in inst.supplies() {
        for i in inst.demands() {
            let mut entries = Vec::new();
            push_entry(&mut entries, book.get(&format!("ASSIGN_{}", i + 1)), 1.0);
            for &(a, b) in &arcs {
                if a == i {
                    push_entry(
                        &mut entries,
                        book.get(&format!("LINKI_{}_{}_{}", s + 1, a + 1, b + 1)),
                        -1.0,
                    );
                }
                if b == i {
                    push_entry(
                        &mut entries,
                        book.get(&format!("LINKJ_{}_{}_{}", s + 1, a + 1, b + 1)),
                        -1.0,
                    );
                }
            }
            push_entry(
                &mut entries,
                book.get(&format!("SRCFLOW_{}_{}", s + 1, i + 1)),
                -1.0,
            );
            let idx = columns.len();
            upper_bounds.push((idx, 1.0));
            columns.push(Column {
                name: format!("y_{}_{}", s + 1, i + 1),
                integer: true,
                entries,
            });
        }
    }

    // f_h_i_j: continuous commodity flows.
    for h in inst.demands() {
        for &(i, j) in &arcs {
            let mut entries = Vec::new();
            if inst.is_supply(i) && !inst.is_supply(j) {
                push_entry(
                    &mut entries,
                    book.get(&format!("SRCFLOW_{}_{}", i + 1, h + 1)),
                    1.0,
                );
            }
            if j == h {
                push_entry(&mut entries, book.get(&format!("DEMFLOW_{}", h + 1)), 1.0);
            } else if !inst.is_supply(j) {
                push_entry(
                    &mut entries,
                    book.get(&format!("CONSERV_{}_{}", h + 1, j + 1)),
                    1.0,
                );
            }
            if i == h && !inst.is_supply(j) {
                push_entry(&mut entries, book.get(&format!("DEMFLOW_{}", h + 1)), -1.0);
            } else if !inst.is_supply(i) && !inst.is_supply(j) && i != h {
                push_entry(
                    &mut entries,
                    book.get(&format!("CONSERV_{}_{}", h + 1, i + 1)),
                    -1.0,
                );
            }
            push_entry(
                &mut entries,
                book.get(&format!("CAP_{}_{}_{}", h + 1, i + 1, j + 1)),
                1.0,
            );
            push_entry(&mut entries, book.get(&format!("REL_{}", h + 1)), -inst.weight(i, j));
            columns.push(Column {
                name: format!("f_{}_{}_{}", h + 1, i + 1, j + 1),
                integer: false,
                entries,
            });
        }
    }

    let mut rhs = vec![(book.get("ARCCOUNT"), k as f64)];
    for i in 0..n {
        for j in (i + 1)..n {
            if !(inst.is_supply(i) && inst.is_supply(j)) {
                rhs.push((book.get(&format!("EDGE_{}_{}", i + 1, j + 1)), 1.0));
            }
        }
    }
    for i in inst.demands() {
        rhs.push((book.get(&format!("ASSIGN_{}", i + 1)), 1.0));
    }
    for h in inst.demands() {
        rhs.push((book.get(&format!("DEMFLOW_{}", h + 1)), 1.0));
    }
    let limit = inst.budget().limit();
    for h in inst.demands() {
        rhs.push((book.get(&format!("REL_{}", h + 1)), -limit));
    }

    MilpModel {
        name: format!("RCKRMSF_N{}_M{}", n, m),
        rows: book.rows,
        columns,
        rhs,
        upper_bounds,
    }
}

/// Renders the model as an MPS file.
pub fn write_mps(model: &MilpModel) -> String {
    let mut out = String::new();
    writeln!(out, "* {} multicommodity-flow model", model.name).unwrap();
    writeln!(out, "* columns: x_s_i_j  arc (i,j) on a path rooted at supply s (binary)").unwrap();
    writeln!(out, "*          y_s_i    demand i allocated to supply s (binary)").unwrap();
    writeln!(out, "*          f_h_i_j  flow of commodity h on arc (i,j) (continuous)").unwrap();
    writeln!(out, "* rows:    ARCCOUNT, EDGE_i_j, ASSIGN_i, LINKI_s_i_j, LINKJ_s_i_j,").unwrap();
    writeln!(out, "*          SRCFLOW_s_h, DEMFLOW_h, CONSERV_h_j, CAP_h_i_j, REL_h").unwrap();
    writeln!(out, "* vertex ids are 1-based; supplies are 1..=m").unwrap();
    writeln!(out, "NAME          {}", model.name).unwrap();
    writeln!(out, "ROWS").unwrap();
    for (name, sense) in &model.rows {
        writeln!(out, " {}  {}", sense.letter(), name).unwrap();
    }
    writeln!(out, "COLUMNS").unwrap();
    let mut integer_open = false;
    for col in &model.columns {
        if col.integer != integer_open {
            let marker = if col.integer { "'INTORG'" } else { "'INTEND'" };
            writeln!(out, "    MARKER                 'MARKER'                 {marker}").unwrap();
            integer_open = col.integer;
        }
        for &(row, value) in &col.entries {
            writeln!(out, "    {:<12}  {:<14}  {}", col.name, model.rows[row].0, value).unwrap();
        }
    }
    if integer_open {
        writeln!(out, "    MARKER                 'MARKER'                 'INTEND'").unwrap();
    }
    writeln!(out, "RHS").unwrap();
    for &(row, value) in &model.rhs {
        writeln!(out, "    RHS           {:<14}  {}", model.rows[row].0, value).unwrap();
    }
    writeln!(out, "BOUNDS").unwrap();
    for &(col, value) in &model.upper_bounds {
        writeln!(out, " UP BND           {:<12}  {}", model.columns[col].name, value).unwrap();
    }
    writeln!(out, "ENDATA").unwrap();
    out
}

/// Builds and writes the model for an instance.
pub fn export_milp(inst: &Instance, path: &Path) -> std::io::Result<()> {
    fs::write(path, write_mps(&build_milp(inst)))
}

/// A parsed MPS file, kept in name space for comparisons.
#[derive(Clone, Debug, Default)]
pub struct ParsedMps {
    pub name: String,
    pub rows: Vec<(String, Sense)>,
    /// `(column, row, coefficient)` in file order.
    pub entries: Vec<(String, String, f64)>,
    pub integer_columns: Vec<String>,
    pub rhs: Vec<(String, f64)>,
    pub upper_bounds: Vec<(String, f64)>,
}

#[derive(Debug, Error)]
pub enum MpsParseError {
    #[error("line {line}: {msg}")]
    Malformed { line: usize, msg: String },
    #[error("missing ENDATA")]
    Truncated,
}

/// Parses the subset of MPS this crate writes.
pub fn parse_mps(text: &str) -> Result<ParsedMps, MpsParseError> {
    let mut parsed = ParsedMps::default();
    let mut section = String::new();
    let mut integer_open = false;
    let mut seen_end = false;
    let mut integer_names: Vec<String> = Vec::new();
    for (ln, raw) in text.lines().enumerate() {
        let line = ln + 1;
        if raw.starts_with('*') || raw.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = raw.split_whitespace().collect();
        if !raw.starts_with(' ') {
            section = fields[0].to_string();
            if section == "NAME" && fields.len() > 1 {
                parsed.name = fields[1].to_string();
            }
            if section == "ENDATA" {
                seen_end = true;
                break;
            }
            continue;
        }
        match section.as_str() {
            "ROWS" => {
                if fields.len() != 2 {
                    return Err(MpsParseError::Malformed {
                        line,
                        msg: "expected sense and row name".into(),
                    });
                }
                let sense = Sense::from_letter(fields[0]).ok_or_else(|| MpsParseError::Malformed {
                    line,
                    msg: format!("unknown row sense {:?}", fields[0]),
                })?;
                parsed.rows.push((fields[1].to_string(), sense));
            }
            "COLUMNS" => {
                if fields.len() >= 3 && fields[1] == "'MARKER'" {
                    integer_open = fields[2] == "'INTORG'";
                    continue;
                }
                if fields.len() != 3 {
                    return Err(MpsParseError::Malformed {
                        line,
                        msg: "expected column, row, value".into(),
                    });
                }
                let value: f64 = fields[2].parse().map_err(|_| MpsParseError::Malformed {
                    line,
                    msg: format!("bad coefficient {:?}", fields[2]),
                })?;
                if integer_open && integer_names.last().map(String::as_str) != Some(fields[0]) {
                    integer_names.push(fields[0].to_string());
                }
                parsed
                    .entries
                    .push((fields[0].to_string(), fields[1].to_string(), value));
            }
            "RHS" => {
                if fields.len() != 3 {
                    return Err(MpsParseError::Malformed {
                        line,
                        msg: "expected set, row, value".into(),
                    });
                }
                let value: f64 = fields[2].parse().map_err(|_| MpsParseError::Malformed {
                    line,
                    msg: format!("bad rhs {:?}", fields[2]),
                })?;
                parsed.rhs.push((fields[1].to_string(), value));
            }
            "BOUNDS" => {
                if fields.len() != 4 || fields[0] != "UP" {
                    return Err(MpsParseError::Malformed {
                        line,
                        msg: "expected UP bound".into(),
                    });
                }
                let value: f64 = fields[3].parse().map_err(|_| MpsParseError::Malformed {
                    line,
                    msg: format!("bad bound {:?}", fields[3]),
                })?;
                parsed.upper_bounds.push((fields[2].to_string(), value));
            }
            other => {
                return Err(MpsParseError::Malformed {
                    line,
                    msg: format!("data line outside a known section ({other})"),
                });
            }
        }
    }
    if !seen_end {
        return Err(MpsParseError::Truncated);
    }
    parsed.integer_columns = integer_names;
    Ok(parsed)
}
