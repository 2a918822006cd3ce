//! DIMACS CNF ingestion and the light-weight preprocessing applied before
//! static features are computed and search starts.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::io::Read;

use thiserror::Error;

/// A literal, stored as `2 * (var - 1) + negated` so it can index watch
/// lists directly.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Lit(u32);

impl Lit {
    /// `var` is 1-based, as in DIMACS.
    #[inline]
    pub fn new(var: u32, positive: bool) -> Lit {
        debug_assert!(var >= 1);
        Lit(((var - 1) << 1) | (!positive) as u32)
    }

    pub fn from_dimacs(value: i64) -> Lit {
        debug_assert!(value != 0);
        Lit::new(value.unsigned_abs() as u32, value > 0)
    }

    #[inline]
    pub fn from_code(code: u32) -> Lit {
        Lit(code)
    }

    #[inline]
    pub fn code(self) -> usize {
        self.0 as usize
    }

    /// 1-based variable index.
    #[inline]
    pub fn var(self) -> u32 {
        (self.0 >> 1) + 1
    }

    /// 0-based variable index.
    #[inline]
    pub fn var_index(self) -> usize {
        (self.0 >> 1) as usize
    }

    #[inline]
    pub fn is_positive(self) -> bool {
        self.0 & 1 == 0
    }

    pub fn to_dimacs(self) -> i64 {
        if self.is_positive() {
            self.var() as i64
        } else {
            -(self.var() as i64)
        }
    }
}

impl std::ops::Not for Lit {
    type Output = Lit;
    #[inline]
    fn not(self) -> Lit {
        Lit(self.0 ^ 1)
    }
}

impl fmt::Debug for Lit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_dimacs())
    }
}

impl fmt::Display for Lit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_dimacs())
    }
}

pub type Clause = Vec<Lit>;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Formula {
    pub num_vars: u32,
    pub clauses: Vec<Clause>,
    pub source_name: String,
}

impl Formula {
    pub fn new(num_vars: u32, clauses: Vec<Clause>) -> Formula {
        Formula {
            num_vars,
            clauses,
            source_name: String::new(),
        }
    }

    /// Builds a formula from DIMACS-style integer clauses.
    pub fn from_ints(num_vars: u32, clauses: &[&[i64]]) -> Formula {
        let clauses = clauses
            .iter()
            .map(|c| c.iter().map(|&l| Lit::from_dimacs(l)).collect())
            .collect();
        Formula::new(num_vars, clauses)
    }

    pub fn num_clauses(&self) -> usize {
        self.clauses.len()
    }

    pub fn to_dimacs(&self) -> String {
        self.to_string()
    }
}

impl fmt::Display for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if !self.source_name.is_empty() {
            writeln!(f, "c {}", self.source_name)?;
        }
        writeln!(f, "p cnf {} {}", self.num_vars, self.clauses.len())?;
        for clause in &self.clauses {
            for lit in clause {
                write!(f, "{} ", lit)?;
            }
            writeln!(f, "0")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseErrorKind {
    #[error("missing `p cnf` header")]
    MissingHeader,
    #[error("malformed header: {0}")]
    MalformedHeader(String),
    #[error("duplicate header")]
    DuplicateHeader,
    #[error("invalid literal token `{0}`")]
    InvalidToken(String),
    #[error("literal {literal} exceeds declared variable count {num_vars}")]
    LiteralOutOfRange { literal: i64, num_vars: u32 },
    #[error("header declares {declared} clauses but {found} were found")]
    ClauseCountMismatch { declared: usize, found: usize },
    #[error("i/o error: {0}")]
    Io(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("line {line}: {kind}")]
pub struct ParseError {
    pub line: usize,
    pub kind: ParseErrorKind,
}

/// Parses a DIMACS CNF document. Comment lines, trailing whitespace, clauses
/// spanning several lines and SATLIB-style `%` terminators are accepted.
pub fn parse_dimacs(text: &str) -> Result<Formula, ParseError> {
    let mut header: Option<(u32, usize)> = None;
    let mut clauses: Vec<Clause> = Vec::new();
    let mut current: Clause = Vec::new();
    let mut last_line = 0;

    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        last_line = line_no;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('c') {
            continue;
        }
        if line.starts_with('%') {
            break;
        }
        if line.starts_with('p') {
            if header.is_some() {
                return Err(ParseError {
                    line: line_no,
                    kind: ParseErrorKind::DuplicateHeader,
                });
            }
            header = Some(parse_header(line).map_err(|kind| ParseError {
                line: line_no,
                kind,
            })?);
            continue;
        }
        let Some((num_vars, _)) = header else {
            return Err(ParseError {
                line: line_no,
                kind: ParseErrorKind::MissingHeader,
            });
        };
        for token in line.split_whitespace() {
            let value: i64 = token.parse().map_err(|_| ParseError {
                line: line_no,
                kind: ParseErrorKind::InvalidToken(token.to_string()),
            })?;
            if value == 0 {
                clauses.push(std::mem::take(&mut current));
                continue;
            }
            if value.unsigned_abs() > num_vars as u64 {
                return Err(ParseError {
                    line: line_no,
                    kind: ParseErrorKind::LiteralOutOfRange {
                        literal: value,
                        num_vars,
                    },
                });
            }
            current.push(Lit::from_dimacs(value));
        }
    }

    let Some((num_vars, declared)) = header else {
        return Err(ParseError {
            line: last_line.max(1),
            kind: ParseErrorKind::MissingHeader,
        });
    };
    // A final clause without its terminating zero is still a clause.
    if !current.is_empty() {
        clauses.push(current);
    }
    if clauses.len() != declared {
        return Err(ParseError {
            line: last_line.max(1),
            kind: ParseErrorKind::ClauseCountMismatch {
                declared,
                found: clauses.len(),
            },
        });
    }
    Ok(Formula {
        num_vars,
        clauses,
        source_name: String::new(),
    })
}

fn parse_header(line: &str) -> Result<(u32, usize), ParseErrorKind> {
    let fields: Vec<&str> = line.split_whitespace().collect();
    let bad = || ParseErrorKind::MalformedHeader(line.to_string());
    if fields.len() != 4 || fields[0] != "p" || fields[1] != "cnf" {
        return Err(bad());
    }
    let vars = fields[2].parse::<u32>().map_err(|_| bad())?;
    let clauses = fields[3].parse::<usize>().map_err(|_| bad())?;
    Ok((vars, clauses))
}

pub fn read_dimacs<R: Read>(mut reader: R) -> Result<Formula, ParseError> {
    let mut text = String::new();
    reader.read_to_string(&mut text).map_err(|e| ParseError {
        line: 0,
        kind: ParseErrorKind::Io(e.to_string()),
    })?;
    parse_dimacs(&text)
}

pub fn read_dimacs_file(path: &std::path::Path) -> Result<Formula, ParseError> {
    let file = std::fs::File::open(path).map_err(|e| ParseError {
        line: 0,
        kind: ParseErrorKind::Io(e.to_string()),
    })?;
    let mut formula = read_dimacs(std::io::BufReader::new(file))?;
    formula.source_name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    Ok(formula)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PreprocessStatus {
    Reduced,
    ProvenUnsat,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PreprocessResult {
    /// The reduced formula; `num_vars` is kept from the input so variable
    /// indices stay stable.
    pub formula: Formula,
    pub fixed: BTreeMap<u32, bool>,
    pub status: PreprocessStatus,
}

impl PreprocessResult {
    pub fn is_unsat(&self) -> bool {
        self.status == PreprocessStatus::ProvenUnsat
    }
}

/// Normalizes a clause: sorts literals by variable, removes duplicates and
/// returns `None` for tautologies.
fn normalize_clause(clause: &[Lit]) -> Option<Clause> {
    let mut lits = clause.to_vec();
    lits.sort_unstable();
    lits.dedup();
    if lits.windows(2).any(|w| w[0].var() == w[1].var()) {
        return None;
    }
    Some(lits)
}

/// Removes tautologies and duplicate literals, propagates unit clauses to a
/// fixpoint, then drops satisfied clauses, strips falsified literals and
/// removes exact duplicate clauses.
pub fn preprocess(formula: &Formula) -> PreprocessResult {
    let n = formula.num_vars as usize;
    let mut clauses: Vec<Clause> = formula
        .clauses
        .iter()
        .filter_map(|c| normalize_clause(c))
        .collect();
    let mut value: Vec<Option<bool>> = vec![None; n];

    let unsat = |formula: &Formula, fixed: BTreeMap<u32, bool>| PreprocessResult {
        formula: Formula {
            num_vars: formula.num_vars,
            clauses: vec![Vec::new()],
            source_name: formula.source_name.clone(),
        },
        fixed,
        status: PreprocessStatus::ProvenUnsat,
    };

    // Unit propagation to fixpoint. Each sweep drops clauses that became
    // satisfied and shortens the rest.
    loop {
        let mut changed = false;
        let mut kept = Vec::with_capacity(clauses.len());
        for clause in clauses.drain(..) {
            let mut satisfied = false;
            let mut rest: Clause = Vec::with_capacity(clause.len());
            for &lit in &clause {
                match value[lit.var_index()] {
                    Some(v) if v == lit.is_positive() => {
                        satisfied = true;
                        break;
                    }
                    Some(_) => {}
                    None => rest.push(lit),
                }
            }
            if satisfied {
                continue;
            }
            match rest.len() {
                0 => {
                    let fixed = collect_fixed(&value);
                    return unsat(formula, fixed);
                }
                1 => {
                    let lit = rest[0];
                    value[lit.var_index()] = Some(lit.is_positive());
                    changed = true;
                }
                _ => kept.push(rest),
            }
        }
        clauses = kept;
        if !changed {
            break;
        }
    }

    let mut seen: HashSet<Clause> = HashSet::with_capacity(clauses.len());
    clauses.retain(|c| seen.insert(c.clone()));

    PreprocessResult {
        formula: Formula {
            num_vars: formula.num_vars,
            clauses,
            source_name: formula.source_name.clone(),
        },
        fixed: collect_fixed(&value),
        status: PreprocessStatus::Reduced,
    }
}

fn collect_fixed(value: &[Option<bool>]) -> BTreeMap<u32, bool> {
    value
        .iter()
        .enumerate()
        .filter_map(|(i, v)| v.map(|b| (i as u32 + 1, b)))
        .collect()
}
