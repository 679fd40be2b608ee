//! The closed, line-oriented statement grammar understood by the engine.
//!
//! Every source line becomes exactly one [`Statement`]. Lines that do not
//! match a production (comments, arbitrary code, malformed calls) are kept
//! as [`Statement::Opaque`] with their bytes untouched, so parsing never
//! fails. Recognized statements render back in a canonical spelling and
//! `parse(render(ast)) == ast` holds for every AST the parser can produce.
//!
//! Productions (whitespace between tokens is free):
//!
//! ```text
//! df = load_dataset("wine")
//! df2 = df
//! df3 = pd.DataFrame({"a": [1.0, 2.0], "b": ["x", "y"]})[.astype({"a": "float64"})]
//! low = df[df['hue'] <= 3.0]
//! part = df[['a', 'b']]
//! plt.scatter(df['a'], df['b'][, c=labels])
//! ax.scatter(df['a'], df['b'], df['c'][, c=[0, 1, 1]])
//! labels = kmeans(df, k=k_means)
//! knn_graph(df, ['a', 'b', 'c'], k=3[, c=labels])
//! knn_graph(df, ['a', 'b', 'c'], edges=[(0, 1), (1, 0)][, c=[0, 1]])
//! k_means = 3[  # range: 2..6]
//! ```

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::value::{Comparator, DType, Scalar};

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct CellAst {
    pub statements: Vec<Statement>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "stmt", rename_all = "snake_case")]
pub enum Statement {
    LoadDataset {
        target: String,
        dataset: String,
    },
    Assign {
        target: String,
        value: TableExpr,
    },
    Filter {
        target: String,
        source: String,
        column: String,
        cmp: Comparator,
        threshold: Scalar,
    },
    SelectCols {
        target: String,
        source: String,
        columns: Vec<String>,
    },
    PlotScatter {
        source: String,
        axes: Vec<String>,
        color: ColorSource,
    },
    KMeans {
        target: String,
        source: String,
        k: IntArg,
    },
    KnnGraph {
        source: String,
        axes: Vec<String>,
        neighbors: Neighbors,
        color: ColorSource,
    },
    ParamDecl {
        name: String,
        value: i64,
        range: Option<(i64, i64)>,
    },
    Opaque {
        text: String,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TableExpr {
    Var(String),
    Literal(TableLiteral),
}

/// A column-major table constructor. `dtypes` is only needed when a column
/// has no values to infer its type from.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TableLiteral {
    pub columns: Vec<(String, Vec<Scalar>)>,
    pub dtypes: Option<Vec<(String, DType)>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IntArg {
    Literal(i64),
    Var(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ColorSource {
    None,
    Var(String),
    Labels(Vec<u32>),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Neighbors {
    K(IntArg),
    Edges(Vec<(usize, usize)>),
}

impl Statement {
    /// Variable bound by this statement, if any.
    pub fn target(&self) -> Option<&str> {
        match self {
            Statement::LoadDataset { target, .. }
            | Statement::Assign { target, .. }
            | Statement::Filter { target, .. }
            | Statement::SelectCols { target, .. }
            | Statement::KMeans { target, .. } => Some(target),
            Statement::ParamDecl { name, .. } => Some(name),
            _ => None,
        }
    }

    /// True for statements that produce a table value.
    pub fn is_table_statement(&self) -> bool {
        matches!(
            self,
            Statement::LoadDataset { .. }
                | Statement::Assign { .. }
                | Statement::Filter { .. }
                | Statement::SelectCols { .. }
        )
    }

    pub fn is_display(&self) -> bool {
        matches!(self, Statement::PlotScatter { .. } | Statement::KnnGraph { .. })
    }

    /// Every identifier the statement binds or reads.
    pub fn names(&self) -> Vec<&str> {
        let mut out = Vec::new();
        if let Some(t) = self.target() {
            out.push(t);
        }
        match self {
            Statement::Assign {
                value: TableExpr::Var(v),
                ..
            } => out.push(v),
            Statement::Filter { source, .. } | Statement::SelectCols { source, .. } => {
                out.push(source)
            }
            Statement::KMeans { source, k, .. } => {
                out.push(source);
                if let IntArg::Var(v) = k {
                    out.push(v);
                }
            }
            Statement::PlotScatter { source, color, .. } => {
                out.push(source);
                if let ColorSource::Var(v) = color {
                    out.push(v);
                }
            }
            Statement::KnnGraph {
                source,
                neighbors,
                color,
                ..
            } => {
                out.push(source);
                if let Neighbors::K(IntArg::Var(v)) = neighbors {
                    out.push(v);
                }
                if let ColorSource::Var(v) = color {
                    out.push(v);
                }
            }
            _ => {}
        }
        out
    }
}

impl CellAst {
    /// Distinct variables bound by the cell, in first-binding order.
    pub fn defined_vars(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        for s in &self.statements {
            if let Some(t) = s.target() {
                if !out.iter().any(|o| o == t) {
                    out.push(t.to_string());
                }
            }
        }
        out
    }
}

// ---------------------------------------------------------------------------
// Tokenizer
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Str(String),
    /// Raw numeric text, without sign.
    Num(String),
    Punct(char),
    Cmp(Comparator),
    Comment(String),
}

fn tokenize(line: &str) -> Option<Vec<Tok>> {
    let chars: Vec<char> = line.chars().collect();
    let mut toks = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if c == ' ' || c == '\t' || c == '\r' {
            i += 1;
        } else if c == '#' {
            toks.push(Tok::Comment(chars[i + 1..].iter().collect()));
            break;
        } else if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            toks.push(Tok::Ident(chars[start..i].iter().collect()));
        } else if c.is_ascii_digit() {
            let start = i;
            while i < chars.len() && chars[i].is_ascii_digit() {
                i += 1;
            }
            if i < chars.len() && chars[i] == '.' {
                i += 1;
                while i < chars.len() && chars[i].is_ascii_digit() {
                    i += 1;
                }
            }
            if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                let mut j = i + 1;
                if j < chars.len() && (chars[j] == '+' || chars[j] == '-') {
                    j += 1;
                }
                if j < chars.len() && chars[j].is_ascii_digit() {
                    i = j;
                    while i < chars.len() && chars[i].is_ascii_digit() {
                        i += 1;
                    }
                }
            }
            toks.push(Tok::Num(chars[start..i].iter().collect()));
        } else if c == '"' || c == '\'' {
            let (s, next) = read_string(&chars, i)?;
            toks.push(Tok::Str(s));
            i = next;
        } else {
            let two: String = chars[i..(i + 2).min(chars.len())].iter().collect();
            if let Some(cmp) = Comparator::from_symbol(&two).filter(|_| two.len() == 2) {
                toks.push(Tok::Cmp(cmp));
                i += 2;
            } else if c == '<' {
                toks.push(Tok::Cmp(Comparator::Lt));
                i += 1;
            } else if c == '>' {
                toks.push(Tok::Cmp(Comparator::Gt));
                i += 1;
            } else {
                toks.push(Tok::Punct(c));
                i += 1;
            }
        }
    }
    Some(toks)
}

fn read_string(chars: &[char], start: usize) -> Option<(String, usize)> {
    let quote = chars[start];
    let mut out = String::new();
    let mut i = start + 1;
    while i < chars.len() {
        let c = chars[i];
        if c == quote {
            return Some((out, i + 1));
        }
        if c == '\\' {
            let e = *chars.get(i + 1)?;
            match e {
                '\\' => out.push('\\'),
                '\'' => out.push('\''),
                '"' => out.push('"'),
                'n' => out.push('\n'),
                't' => out.push('\t'),
                'r' => out.push('\r'),
                'u' => {
                    let hex: String = chars.get(i + 2..i + 6)?.iter().collect();
                    let code = u32::from_str_radix(&hex, 16).ok()?;
                    out.push(char::from_u32(code)?);
                    i += 6;
                    continue;
                }
                _ => return None,
            }
            i += 2;
        } else {
            out.push(c);
            i += 1;
        }
    }
    None
}

// ---------------------------------------------------------------------------
// Parser
// ---------------------------------------------------------------------------

struct Cursor<'a> {
    toks: &'a [Tok],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn new(toks: &'a [Tok]) -> Self {
        Cursor { toks, pos: 0 }
    }

    fn peek(&self) -> Option<&'a Tok> {
        self.toks.get(self.pos)
    }

    fn next(&mut self) -> Option<&'a Tok> {
        let t = self.toks.get(self.pos);
        self.pos += 1;
        t
    }

    fn done(&self) -> bool {
        self.pos >= self.toks.len()
    }

    fn ident(&mut self) -> Option<String> {
        match self.next()? {
            Tok::Ident(s) => Some(s.clone()),
            _ => None,
        }
    }

    fn keyword(&mut self, kw: &str) -> Option<()> {
        (self.ident()? == kw).then_some(())
    }

    fn punct(&mut self, c: char) -> Option<()> {
        match self.next()? {
            Tok::Punct(p) if *p == c => Some(()),
            _ => None,
        }
    }

    fn eat_punct(&mut self, c: char) -> bool {
        if self.peek() == Some(&Tok::Punct(c)) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn string(&mut self) -> Option<String> {
        match self.next()? {
            Tok::Str(s) => Some(s.clone()),
            _ => None,
        }
    }

    fn number(&mut self) -> Option<f64> {
        let neg = self.eat_punct('-');
        let raw = match self.next()? {
            Tok::Num(n) => n,
            _ => return None,
        };
        let v: f64 = raw.parse().ok()?;
        let v = if neg { -v } else { v };
        v.is_finite().then_some(v)
    }

    fn int(&mut self) -> Option<i64> {
        let neg = self.eat_punct('-');
        let raw = match self.next()? {
            Tok::Num(n) if n.bytes().all(|b| b.is_ascii_digit()) => n,
            _ => return None,
        };
        let v: i64 = raw.parse().ok()?;
        Some(if neg { -v } else { v })
    }

    fn uint(&mut self) -> Option<u64> {
        match self.next()? {
            Tok::Num(n) if n.bytes().all(|b| b.is_ascii_digit()) => n.parse().ok(),
            _ => None,
        }
    }

    fn scalar(&mut self) -> Option<Scalar> {
        match self.peek()? {
            Tok::Str(_) => self.string().map(Scalar::Text),
            _ => self.number().map(Scalar::Number),
        }
    }

    /// `var['col']`; the variable must equal `source` when given.
    fn subscript(&mut self, source: Option<&str>) -> Option<(String, String)> {
        let var = self.ident()?;
        if source.is_some_and(|s| s != var) {
            return None;
        }
        self.punct('[')?;
        let col = self.string()?;
        self.punct(']')?;
        Some((var, col))
    }

    /// Comma-separated items up to `close`, allowing a trailing comma.
    fn list<T>(&mut self, close: char, mut item: impl FnMut(&mut Self) -> Option<T>) -> Option<Vec<T>> {
        let mut out = Vec::new();
        if self.eat_punct(close) {
            return Some(out);
        }
        loop {
            out.push(item(self)?);
            if self.eat_punct(close) {
                return Some(out);
            }
            self.punct(',')?;
            if self.eat_punct(close) {
                return Some(out);
            }
        }
    }

    fn int_arg(&mut self) -> Option<IntArg> {
        match self.peek()? {
            Tok::Ident(_) => self.ident().map(IntArg::Var),
            _ => self.int().map(IntArg::Literal),
        }
    }

    /// Optional `, c=<color>` followed by `)`.
    fn color_tail(&mut self) -> Option<ColorSource> {
        if self.eat_punct(')') {
            return Some(ColorSource::None);
        }
        self.punct(',')?;
        self.keyword("c")?;
        self.punct('=')?;
        let color = match self.peek()? {
            Tok::Ident(_) => ColorSource::Var(self.ident()?),
            Tok::Punct('[') => {
                self.next();
                let labels = self.list(']', |c| c.uint().and_then(|v| u32::try_from(v).ok()))?;
                ColorSource::Labels(labels)
            }
            _ => return None,
        };
        self.punct(')')?;
        Some(color)
    }
}

/// Parses cell source. Total: never fails.
pub fn parse_source(source: &str) -> CellAst {
    if source.is_empty() {
        return CellAst::default();
    }
    CellAst {
        statements: source.split('\n').map(parse_line).collect(),
    }
}

/// Parses one line (without its terminating newline).
pub fn parse_line(line: &str) -> Statement {
    tokenize(line)
        .and_then(|toks| parse_tokens(&toks))
        .unwrap_or_else(|| Statement::Opaque {
            text: line.to_string(),
        })
}

fn parse_tokens(toks: &[Tok]) -> Option<Statement> {
    let first = match toks.first()? {
        Tok::Ident(s) => s.as_str(),
        _ => return None,
    };
    match (first, toks.get(1)) {
        ("plt" | "ax", Some(Tok::Punct('.'))) => parse_scatter(toks),
        ("knn_graph", Some(Tok::Punct('('))) => parse_knn(toks),
        (_, Some(Tok::Punct('='))) => parse_assignment(toks),
        _ => None,
    }
}

fn parse_scatter(toks: &[Tok]) -> Option<Statement> {
    let mut c = Cursor::new(toks);
    c.ident()?;
    c.punct('.')?;
    c.keyword("scatter")?;
    c.punct('(')?;
    let (source, x) = c.subscript(None)?;
    c.punct(',')?;
    let (_, y) = c.subscript(Some(&source))?;
    let mut axes = vec![x, y];
    // optional third axis: `, var['z']`
    if matches!(c.peek(), Some(Tok::Punct(',')))
        && matches!(toks.get(c.pos + 1), Some(Tok::Ident(id)) if id == &source)
        && matches!(toks.get(c.pos + 2), Some(Tok::Punct('[')))
    {
        c.punct(',')?;
        axes.push(c.subscript(Some(&source))?.1);
    }
    let color = c.color_tail()?;
    c.done().then_some(Statement::PlotScatter { source, axes, color })
}

fn parse_knn(toks: &[Tok]) -> Option<Statement> {
    let mut c = Cursor::new(toks);
    c.keyword("knn_graph")?;
    c.punct('(')?;
    let source = c.ident()?;
    c.punct(',')?;
    c.punct('[')?;
    let axes = c.list(']', |c| c.string())?;
    if axes.len() != 3 {
        return None;
    }
    c.punct(',')?;
    let neighbors = match c.ident()?.as_str() {
        "k" => {
            c.punct('=')?;
            Neighbors::K(c.int_arg()?)
        }
        "edges" => {
            c.punct('=')?;
            c.punct('[')?;
            let edges = c.list(']', |c| {
                c.punct('(')?;
                let a = c.uint()? as usize;
                c.punct(',')?;
                let b = c.uint()? as usize;
                c.punct(')')?;
                Some((a, b))
            })?;
            Neighbors::Edges(edges)
        }
        _ => return None,
    };
    let color = c.color_tail()?;
    c.done().then_some(Statement::KnnGraph {
        source,
        axes,
        neighbors,
        color,
    })
}

fn parse_assignment(toks: &[Tok]) -> Option<Statement> {
    let mut c = Cursor::new(toks);
    let target = c.ident()?;
    c.punct('=')?;
    let stmt = match c.peek()? {
        Tok::Num(_) | Tok::Punct('-') => {
            let value = c.int()?;
            let range = match c.next() {
                None => None,
                Some(Tok::Comment(text)) => Some(parse_range_comment(text)?),
                Some(_) => return None,
            };
            return c.done().then_some(Statement::ParamDecl {
                name: target,
                value,
                range,
            });
        }
        Tok::Ident(head) => match (head.as_str(), toks.get(c.pos + 1)) {
            ("load_dataset", Some(Tok::Punct('('))) => {
                c.next();
                c.punct('(')?;
                let dataset = c.string()?;
                c.punct(')')?;
                Statement::LoadDataset { target, dataset }
            }
            ("kmeans", Some(Tok::Punct('('))) => {
                c.next();
                c.punct('(')?;
                let source = c.ident()?;
                c.punct(',')?;
                c.keyword("k")?;
                c.punct('=')?;
                let k = c.int_arg()?;
                c.punct(')')?;
                Statement::KMeans { target, source, k }
            }
            ("pd", Some(Tok::Punct('.'))) => Statement::Assign {
                target,
                value: TableExpr::Literal(parse_table_literal(&mut c)?),
            },
            (_, None) => Statement::Assign {
                target,
                value: TableExpr::Var(c.ident()?),
            },
            (_, Some(Tok::Punct('['))) => parse_subscript_expr(&mut c, target)?,
            _ => return None,
        },
        _ => return None,
    };
    c.done().then_some(stmt)
}

fn parse_range_comment(text: &str) -> Option<(i64, i64)> {
    let rest = text.trim().strip_prefix("range:")?.trim();
    let (lo, hi) = rest.split_once("..")?;
    let lo: i64 = lo.trim().parse().ok()?;
    let hi: i64 = hi.trim().parse().ok()?;
    (lo <= hi).then_some((lo, hi))
}

fn parse_table_literal(c: &mut Cursor<'_>) -> Option<TableLiteral> {
    c.keyword("pd")?;
    c.punct('.')?;
    c.keyword("DataFrame")?;
    c.punct('(')?;
    c.punct('{')?;
    let columns = c.list('}', |c| {
        let name = c.string()?;
        c.punct(':')?;
        c.punct('[')?;
        let values = c.list(']', |c| c.scalar())?;
        Some((name, values))
    })?;
    c.punct(')')?;
    let dtypes = if c.eat_punct('.') {
        c.keyword("astype")?;
        c.punct('(')?;
        c.punct('{')?;
        let d = c.list('}', |c| {
            let name = c.string()?;
            c.punct(':')?;
            let dtype = DType::from_pandas_name(&c.string()?)?;
            Some((name, dtype))
        })?;
        c.punct(')')?;
        Some(d)
    } else {
        None
    };
    Some(TableLiteral { columns, dtypes })
}

/// `src[src['col'] <op> v]` or `src[['a', 'b']]`.
fn parse_subscript_expr(c: &mut Cursor<'_>, target: String) -> Option<Statement> {
    let source = c.ident()?;
    c.punct('[')?;
    if c.eat_punct('[') {
        let columns = c.list(']', |c| c.string())?;
        c.punct(']')?;
        if columns.is_empty() {
            return None;
        }
        return Some(Statement::SelectCols {
            target,
            source,
            columns,
        });
    }
    let (_, column) = c.subscript(Some(&source))?;
    let cmp = match c.next()? {
        Tok::Cmp(cmp) => *cmp,
        _ => return None,
    };
    let threshold = c.scalar()?;
    c.punct(']')?;
    Some(Statement::Filter {
        target,
        source,
        column,
        cmp,
        threshold,
    })
}

// ---------------------------------------------------------------------------
// Renderer
// ---------------------------------------------------------------------------

fn quote(s: &str, q: char) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    out.push(q);
    for ch in s.chars() {
        match ch {
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\t' => out.push_str("\\t"),
            '\r' => out.push_str("\\r"),
            c if c == q => {
                out.push('\\');
                out.push(c);
            }
            c if (c as u32) < 0x20 || c == '\u{7f}' => {
                let _ = write!(out, "\\u{:04x}", c as u32);
            }
            c => out.push(c),
        }
    }
    out.push(q);
    out
}

/// Double-quoted string literal.
pub fn dq(s: &str) -> String {
    quote(s, '"')
}

/// Single-quoted string literal.
pub fn sq(s: &str) -> String {
    quote(s, '\'')
}

/// Shortest decimal text that parses back to the same `f64`.
pub fn render_number(v: f64) -> String {
    format!("{v:?}")
}

pub fn render_scalar(v: &Scalar) -> String {
    match v {
        Scalar::Number(n) => render_number(*n),
        Scalar::Text(s) => dq(s),
    }
}

fn render_int_arg(arg: &IntArg) -> String {
    match arg {
        IntArg::Literal(v) => v.to_string(),
        IntArg::Var(v) => v.clone(),
    }
}

fn render_color(color: &ColorSource) -> String {
    match color {
        ColorSource::None => String::new(),
        ColorSource::Var(v) => format!(", c={v}"),
        ColorSource::Labels(l) => format!(", c=[{}]", join(l.iter().map(|x| x.to_string()))),
    }
}

fn join(items: impl Iterator<Item = String>) -> String {
    items.collect::<Vec<_>>().join(", ")
}

pub fn render_table_literal(lit: &TableLiteral) -> String {
    let cols = join(lit.columns.iter().map(|(name, values)| {
        format!("{}: [{}]", dq(name), join(values.iter().map(render_scalar)))
    }));
    let mut out = format!("pd.DataFrame({{{cols}}})");
    if let Some(dtypes) = &lit.dtypes {
        let d = join(
            dtypes
                .iter()
                .map(|(name, dt)| format!("{}: {}", dq(name), dq(dt.pandas_name()))),
        );
        let _ = write!(out, ".astype({{{d}}})");
    }
    out
}

pub fn render_statement(stmt: &Statement) -> String {
    match stmt {
        Statement::LoadDataset { target, dataset } => {
            format!("{target} = load_dataset({})", dq(dataset))
        }
        Statement::Assign { target, value } => match value {
            TableExpr::Var(v) => format!("{target} = {v}"),
            TableExpr::Literal(lit) => format!("{target} = {}", render_table_literal(lit)),
        },
        Statement::Filter {
            target,
            source,
            column,
            cmp,
            threshold,
        } => format!(
            "{target} = {source}[{source}[{}] {} {}]",
            sq(column),
            cmp.symbol(),
            render_scalar(threshold)
        ),
        Statement::SelectCols {
            target,
            source,
            columns,
        } => format!(
            "{target} = {source}[[{}]]",
            join(columns.iter().map(|c| sq(c)))
        ),
        Statement::PlotScatter {
            source,
            axes,
            color,
        } => {
            let prefix = if axes.len() == 3 { "ax" } else { "plt" };
            format!(
                "{prefix}.scatter({}{})",
                join(axes.iter().map(|a| format!("{source}[{}]", sq(a)))),
                render_color(color)
            )
        }
        Statement::KMeans { target, source, k } => {
            format!("{target} = kmeans({source}, k={})", render_int_arg(k))
        }
        Statement::KnnGraph {
            source,
            axes,
            neighbors,
            color,
        } => {
            let n = match neighbors {
                Neighbors::K(k) => format!("k={}", render_int_arg(k)),
                Neighbors::Edges(e) => format!(
                    "edges=[{}]",
                    join(e.iter().map(|(a, b)| format!("({a}, {b})")))
                ),
            };
            format!(
                "knn_graph({source}, [{}], {n}{})",
                join(axes.iter().map(|a| sq(a))),
                render_color(color)
            )
        }
        Statement::ParamDecl { name, value, range } => match range {
            Some((lo, hi)) => format!("{name} = {value}  # range: {lo}..{hi}"),
            None => format!("{name} = {value}"),
        },
        Statement::Opaque { text } => text.clone(),
    }
}

pub fn render(ast: &CellAst) -> String {
    ast.statements
        .iter()
        .map(render_statement)
        .collect::<Vec<_>>()
        .join("\n")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn opaque(s: &str) -> Statement {
        Statement::Opaque { text: s.into() }
    }

    #[test]
    fn load_dataset_line() {
        let ast = parse_source(r#"df = load_dataset("wine")"#);
        assert_eq!(
            ast.statements,
            vec![Statement::LoadDataset {
                target: "df".into(),
                dataset: "wine".into()
            }]
        );
    }

    #[test]
    fn empty_source_has_no_statements() {
        assert!(parse_source("").statements.is_empty());
    }

    #[test]
    fn comment_lines_stay_opaque() {
        let ast = parse_source("plt.scatter(df['a'], df['b'])\n# note");
        assert_eq!(
            ast.statements,
            vec![
                Statement::PlotScatter {
                    source: "df".into(),
                    axes: vec!["a".into(), "b".into()],
                    color: ColorSource::None
                },
                opaque("# note")
            ]
        );
    }

    #[test]
    fn filter_and_select() {
        let ast = parse_source("df2 = df[df['hue'] <= 3.0]\nsub = df[['a', \"b\"]]");
        assert_eq!(
            ast.statements[0],
            Statement::Filter {
                target: "df2".into(),
                source: "df".into(),
                column: "hue".into(),
                cmp: Comparator::Le,
                threshold: Scalar::Number(3.0)
            }
        );
        assert_eq!(
            ast.statements[1],
            Statement::SelectCols {
                target: "sub".into(),
                source: "df".into(),
                columns: vec!["a".into(), "b".into()]
            }
        );
    }

    #[test]
    fn filter_with_mismatched_source_is_opaque() {
        let line = "df2 = df[other['hue'] <= 3.0]";
        assert_eq!(parse_line(line), opaque(line));
    }

    #[test]
    fn malformed_heads_degrade_to_opaque() {
        for line in [
            "df = load_dataset(wine)",
            "df = load_dataset(\"wine\"",
            "df = load_dataset(\"wine\")  # trailing",
            "k = 3.5",
            "k = 3  # range: 9..2",
            "plt.scatter(df['a'])",
            "plt.scatter(df['a'], other['b'])",
            "knn_graph(df, ['a', 'b'], k=2)",
            "x = \"unterminated",
            "print(wine.shape)",
            "labels = kmeans(df, 3)",
        ] {
            assert_eq!(parse_line(line), opaque(line), "{line}");
        }
    }

    #[test]
    fn param_decl_with_and_without_range() {
        assert_eq!(
            parse_line("k_means = 3  # range: 2..6"),
            Statement::ParamDecl {
                name: "k_means".into(),
                value: 3,
                range: Some((2, 6))
            }
        );
        assert_eq!(
            parse_line("k=-1"),
            Statement::ParamDecl {
                name: "k".into(),
                value: -1,
                range: None
            }
        );
    }

    #[test]
    fn scatter_3d_with_label_literal() {
        let s = parse_line("ax.scatter(d['a'], d['b'], d['c'], c=[0, 1, 1])");
        assert_eq!(
            s,
            Statement::PlotScatter {
                source: "d".into(),
                axes: vec!["a".into(), "b".into(), "c".into()],
                color: ColorSource::Labels(vec![0, 1, 1])
            }
        );
        assert_eq!(
            render_statement(&s),
            "ax.scatter(d['a'], d['b'], d['c'], c=[0, 1, 1])"
        );
    }

    #[test]
    fn knn_graph_forms() {
        let s = parse_line("knn_graph(data, ['a', 'b', 'c'], k=k_nn, c=labels)");
        assert_eq!(
            s,
            Statement::KnnGraph {
                source: "data".into(),
                axes: vec!["a".into(), "b".into(), "c".into()],
                neighbors: Neighbors::K(IntArg::Var("k_nn".into())),
                color: ColorSource::Var("labels".into())
            }
        );
        let e = parse_line("knn_graph(d, ['a', 'b', 'c'], edges=[(0, 1), (1, 0)])");
        assert_eq!(render_statement(&e), "knn_graph(d, ['a', 'b', 'c'], edges=[(0, 1), (1, 0)])");
    }

    #[test]
    fn table_literal_round_trip() {
        let src = r#"df1 = pd.DataFrame({"x": [1.5, -2.0, 1e-7], "s": ["a\"b", "\n"]})"#;
        let s = parse_line(src);
        assert_eq!(render_statement(&s), src);
        let empty = r#"df1 = pd.DataFrame({"x": []}).astype({"x": "float64"})"#;
        assert_eq!(render_statement(&parse_line(empty)), empty);
    }

    #[test]
    fn non_finite_literals_are_rejected() {
        let line = "df = pd.DataFrame({\"x\": [1e999]})";
        assert_eq!(parse_line(line), opaque(line));
    }

    #[test]
    fn whitespace_is_canonicalized() {
        let s = parse_line("  df2=df [ df['a']>=1 ]");
        assert_eq!(render_statement(&s), "df2 = df[df['a'] >= 1.0]");
    }

    #[test]
    fn defined_vars_in_order() {
        let ast = parse_source("a = load_dataset(\"iris\")\nb = a\na = b");
        assert_eq!(ast.defined_vars(), vec!["a".to_string(), "b".to_string()]);
    }

    #[test]
    fn multi_line_round_trip_preserves_opaque_bytes() {
        let src = "# header\t\r\n\ndf = load_dataset(\"wine\")\n   ";
        let ast = parse_source(src);
        assert_eq!(ast.statements.len(), 4);
        assert_eq!(render(&ast), src);
    }
}
