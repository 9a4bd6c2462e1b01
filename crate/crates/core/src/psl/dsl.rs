//! Text format for weighted soft-logic rules.
//!
//! One rule per line, `weight : expr`. Operators in increasing binding
//! strength: `->` (right-associative), `|`, `&`, prefix `!`. Operands are
//! identifiers, numeric literals in `[0, 1]` and parenthesized expressions.
//! `#` starts a comment; blank lines are ignored.

use std::collections::BTreeMap;

use super::expr::SoftExpr;
use super::rules::{Rule, RuleSet};
use super::PslError;

/// A parsed rule with the 1-based line and column where it starts.
#[derive(Debug, Clone, PartialEq)]
pub struct ParsedRule {
    pub rule: Rule,
    pub line: usize,
    pub column: usize,
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Colon,
    Amp,
    Pipe,
    Bang,
    Arrow,
    LParen,
    RParen,
    End,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Num(v) => format!("number `{v}`"),
            Tok::Ident(s) => format!("identifier `{s}`"),
            Tok::Colon => "`:`".into(),
            Tok::Amp => "`&`".into(),
            Tok::Pipe => "`|`".into(),
            Tok::Bang => "`!`".into(),
            Tok::Arrow => "`->`".into(),
            Tok::LParen => "`(`".into(),
            Tok::RParen => "`)`".into(),
            Tok::End => "end of line".into(),
        }
    }

    fn is_operator(&self) -> bool {
        matches!(self, Tok::Amp | Tok::Pipe | Tok::Bang | Tok::Arrow)
    }
}

fn syntax(line: usize, column: usize, message: impl Into<String>) -> PslError {
    PslError::Syntax {
        line,
        column,
        message: message.into(),
    }
}

fn lex_line(src: &str, line: usize) -> Result<Vec<(Tok, usize)>, PslError> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        let col = i + 1;
        match c {
            '#' => break,
            c if c.is_whitespace() => i += 1,
            ':' => {
                out.push((Tok::Colon, col));
                i += 1;
            }
            '&' => {
                out.push((Tok::Amp, col));
                i += 1;
            }
            '|' => {
                out.push((Tok::Pipe, col));
                i += 1;
            }
            '!' => {
                out.push((Tok::Bang, col));
                i += 1;
            }
            '(' => {
                out.push((Tok::LParen, col));
                i += 1;
            }
            ')' => {
                out.push((Tok::RParen, col));
                i += 1;
            }
            '-' if chars.get(i + 1) == Some(&'>') => {
                out.push((Tok::Arrow, col));
                i += 2;
            }
            c if c.is_ascii_digit() || c == '.' || c == '-' => {
                let start = i;
                i += 1;
                while i < chars.len() {
                    let d = chars[i];
                    let exp_sign = (d == '-' || d == '+') && matches!(chars[i - 1], 'e' | 'E');
                    if d.is_ascii_digit() || d == '.' || d == 'e' || d == 'E' || exp_sign {
                        i += 1;
                    } else {
                        break;
                    }
                }
                let text: String = chars[start..i].iter().collect();
                let value: f64 = text
                    .parse()
                    .map_err(|_| syntax(line, col, format!("malformed number `{text}`")))?;
                out.push((Tok::Num(value), col));
            }
            c if c.is_alphabetic() || c == '_' => {
                let start = i;
                while i < chars.len() && (chars[i].is_alphanumeric() || chars[i] == '_') {
                    i += 1;
                }
                out.push((Tok::Ident(chars[start..i].iter().collect()), col));
            }
            other => return Err(syntax(line, col, format!("unexpected character `{other}`"))),
        }
    }
    out.push((Tok::End, chars.len() + 1));
    Ok(out)
}

struct Parser {
    toks: Vec<(Tok, usize)>,
    pos: usize,
    line: usize,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].0
    }

    fn col(&self) -> usize {
        self.toks[self.pos].1
    }

    fn bump(&mut self) -> (Tok, usize) {
        let t = self.toks[self.pos].clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn unexpected(&self, expected: &str) -> PslError {
        if *self.peek() == Tok::End && self.pos > 0 {
            let (prev, prev_col) = &self.toks[self.pos - 1];
            if prev.is_operator() {
                return syntax(
                    self.line,
                    *prev_col,
                    format!("dangling operator {}", prev.describe()),
                );
            }
        }
        syntax(
            self.line,
            self.col(),
            format!("expected {expected}, found {}", self.peek().describe()),
        )
    }

    fn implication(&mut self) -> Result<SoftExpr, PslError> {
        let lhs = self.disjunction()?;
        if *self.peek() == Tok::Arrow {
            self.bump();
            let rhs = self.implication()?;
            return Ok(SoftExpr::implies(lhs, rhs));
        }
        Ok(lhs)
    }

    fn disjunction(&mut self) -> Result<SoftExpr, PslError> {
        let mut lhs = self.conjunction()?;
        while *self.peek() == Tok::Pipe {
            self.bump();
            let rhs = self.conjunction()?;
            lhs = SoftExpr::or(lhs, rhs);
        }
        Ok(lhs)
    }

    fn conjunction(&mut self) -> Result<SoftExpr, PslError> {
        let mut lhs = self.unary()?;
        while *self.peek() == Tok::Amp {
            self.bump();
            let rhs = self.unary()?;
            lhs = SoftExpr::and(lhs, rhs);
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<SoftExpr, PslError> {
        if *self.peek() == Tok::Bang {
            self.bump();
            return Ok(SoftExpr::not(self.unary()?));
        }
        self.primary()
    }

    fn primary(&mut self) -> Result<SoftExpr, PslError> {
        match self.peek().clone() {
            Tok::Num(v) => {
                let col = self.col();
                self.bump();
                SoftExpr::constant(v).map_err(|_| {
                    syntax(self.line, col, format!("constant {v} outside [0, 1]"))
                })
            }
            Tok::Ident(name) => {
                self.bump();
                Ok(SoftExpr::Var(name))
            }
            Tok::LParen => {
                self.bump();
                let inner = self.implication()?;
                if *self.peek() != Tok::RParen {
                    return Err(self.unexpected("`)`"));
                }
                self.bump();
                Ok(inner)
            }
            _ => Err(self.unexpected("an operand")),
        }
    }
}

fn parse_line(src: &str, line: usize) -> Result<Option<ParsedRule>, PslError> {
    let toks = lex_line(src, line)?;
    if toks.len() == 1 {
        return Ok(None);
    }
    let mut p = Parser { toks, pos: 0, line };
    let column = p.col();
    let weight = match p.bump() {
        (Tok::Num(w), col) => {
            if w < 0.0 {
                return Err(PslError::NegativeRuleWeight {
                    line,
                    column: col,
                    weight: w,
                });
            }
            w
        }
        (tok, col) => {
            return Err(syntax(
                line,
                col,
                format!("expected rule weight, found {}", tok.describe()),
            ))
        }
    };
    if *p.peek() != Tok::Colon {
        return Err(p.unexpected("`:` after the weight"));
    }
    p.bump();
    let expr = p.implication()?;
    if *p.peek() != Tok::End {
        return Err(p.unexpected("end of rule"));
    }
    Ok(Some(ParsedRule {
        rule: Rule { expr, weight },
        line,
        column,
    }))
}

/// Parses rule-DSL source into rules with their positions.
pub fn parse_rules(text: &str) -> Result<Vec<ParsedRule>, PslError> {
    let mut out = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        if let Some(rule) = parse_line(line, idx + 1)? {
            out.push(rule);
        }
    }
    Ok(out)
}

/// Renders rules back into the DSL, one per line.
pub fn print_rules<'a>(rules: impl IntoIterator<Item = &'a Rule>) -> String {
    let mut out = String::new();
    for r in rules {
        out.push_str(&r.to_string());
        out.push('\n');
    }
    out
}

impl RuleSet {
    /// Parses `text` and attaches the caller's free/bound variable split.
    pub fn from_source(
        text: &str,
        free_vars: Vec<String>,
        bindings: BTreeMap<String, f64>,
    ) -> Result<Self, PslError> {
        let rules = parse_rules(text)?.into_iter().map(|p| p.rule).collect();
        RuleSet::new(rules, free_vars, bindings)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::psl::rules::{build_glrd_rules, ConstraintVector, RuleWeights, GLRD_RULES_SOURCE, Y_KEEP, Y_RECLS};

    #[test]
    fn smallest_rule() {
        let rules = parse_rules("1.0 : a & b -> !c").unwrap();
        assert_eq!(rules.len(), 1);
        let r = &rules[0];
        assert_eq!((r.line, r.column), (1, 1));
        assert_eq!(r.rule.weight, 1.0);
        let expected = SoftExpr::implies(
            SoftExpr::and(SoftExpr::var("a"), SoftExpr::var("b")),
            SoftExpr::not(SoftExpr::var("c")),
        );
        assert_eq!(r.rule.expr, expected);
    }

    #[test]
    fn dangling_operator() {
        let err = parse_rules("1.0 : a &").unwrap_err();
        match err {
            PslError::Syntax { line, column, ref message } => {
                assert_eq!((line, column), (1, 9));
                assert!(message.contains("dangling"), "{message}");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn negative_weight_rejected() {
        let err = parse_rules("\n-2 : a").unwrap_err();
        assert!(matches!(err, PslError::NegativeRuleWeight { line: 2, column: 1, .. }), "{err:?}");
    }

    #[test]
    fn other_errors_have_positions() {
        assert!(matches!(
            parse_rules("1 a").unwrap_err(),
            PslError::Syntax { line: 1, column: 3, .. }
        ));
        assert!(matches!(
            parse_rules("1 : (a & b").unwrap_err(),
            PslError::Syntax { line: 1, column: 11, .. }
        ));
        assert!(matches!(
            parse_rules("1 : a $ b").unwrap_err(),
            PslError::Syntax { line: 1, column: 7, .. }
        ));
        assert!(matches!(
            parse_rules("1 : a & 1.5").unwrap_err(),
            PslError::Syntax { line: 1, column: 9, .. }
        ));
        assert!(matches!(
            parse_rules("x : a").unwrap_err(),
            PslError::Syntax { line: 1, column: 1, .. }
        ));
    }

    #[test]
    fn comments_and_blank_lines() {
        let src = "# header\n\n0.5 : a | b   # trailing\n";
        let rules = parse_rules(src).unwrap();
        assert_eq!(rules.len(), 1);
        assert_eq!(rules[0].line, 3);
    }

    #[test]
    fn implication_is_right_associative() {
        let r = parse_rules("1 : a -> b -> c").unwrap();
        let v = SoftExpr::var;
        assert_eq!(
            r[0].rule.expr,
            SoftExpr::implies(v("a"), SoftExpr::implies(v("b"), v("c")))
        );
    }

    #[test]
    fn glrd_source_matches_builder() {
        let x = ConstraintVector::new(0.9, 0.5419, 1.0).unwrap();
        let parsed = RuleSet::from_source(
            GLRD_RULES_SOURCE,
            vec![Y_KEEP.into(), Y_RECLS.into()],
            x.bindings(),
        )
        .unwrap();
        assert_eq!(parsed, build_glrd_rules(&x, RuleWeights::default()));
    }

    #[test]
    fn printer_round_trip() {
        let rules: Vec<Rule> = parse_rules(GLRD_RULES_SOURCE)
            .unwrap()
            .into_iter()
            .map(|p| p.rule)
            .collect();
        let printed = print_rules(&rules);
        let again: Vec<Rule> = parse_rules(&printed)
            .unwrap()
            .into_iter()
            .map(|p| p.rule)
            .collect();
        assert_eq!(rules, again);
    }
}
