use crate::monitors::{ConstraintKind, EventBinding, PeriodBand, WhConstraint};
use crate::query::{Expectation, Extremum, NamedQuery, PathFormula, Query, QueryFile, Relation};

use super::{ParseError, Parser, Tok};

/// Parses a query file: optional `Name:` prefixes, constraint lines and
/// an optional `=> valid | invalid | [lo, hi]` expectation per query.
pub fn parse_query_file(src: &str) -> Result<QueryFile, ParseError> {
    let mut p = Parser::new(src)?;
    let mut file = QueryFile::default();
    while !p.at_eof() {
        if p.eat(&Tok::Semi) {
            continue;
        }
        if p.is_keyword("constraint") && matches!(p.peek_at(1), Tok::Ident(_)) {
            let at = p.span();
            let c = constraint(&mut p)?;
            if file.constraints.iter().any(|o| o.name == c.name) {
                return Err(ParseError::new(at, format!("constraint {} declared twice", c.name)));
            }
            file.constraints.push(c);
            continue;
        }
        let span = p.span();
        let name = if matches!(p.peek(), Tok::Ident(_)) && p.peek_at(1) == &Tok::Colon {
            let (n, _) = p.ident()?;
            p.next();
            n
        } else {
            format!("Q{}", file.queries.len() + 1)
        };
        if file.queries.iter().any(|q| q.name == name) {
            return Err(ParseError::new(span, format!("query name {name} used twice")));
        }
        let query = query(&mut p)?;
        let expected = if p.eat(&Tok::FatArrow) {
            Some(expectation(&mut p)?)
        } else {
            None
        };
        if !p.at_eof() && !p.eat(&Tok::Semi) && !starts_entry(&p) {
            return Err(p.error(&["`;`", "next query"]));
        }
        file.queries.push(NamedQuery {
            name,
            query,
            expected,
            span,
        });
    }
    Ok(file)
}

fn starts_entry(p: &Parser) -> bool {
    match p.peek() {
        Tok::Ident(s) => {
            matches!(s.as_str(), "Pr" | "E" | "simulate" | "constraint")
                || p.peek_at(1) == &Tok::Colon
        }
        _ => false,
    }
}

pub fn parse_queries(src: &str) -> Result<Vec<NamedQuery>, ParseError> {
    Ok(parse_query_file(src)?.queries)
}

/// Parses exactly one query with no name or expectation.
pub fn parse_query(src: &str) -> Result<Query, ParseError> {
    let mut p = Parser::new(src)?;
    let q = query(&mut p)?;
    p.eat(&Tok::Semi);
    if !p.at_eof() {
        return Err(p.error(&["end of query"]));
    }
    Ok(q)
}

fn positive_bound(p: &mut Parser) -> Result<f64, ParseError> {
    let at = p.span();
    let b = p.number()?;
    if !(b > 0.0 && b.is_finite()) {
        return Err(ParseError::new(at, format!("time bound must be positive, got {b}")));
    }
    Ok(b)
}

/// `[<=B]`; `[>=B]` is accepted as the same horizon.
fn bound(p: &mut Parser) -> Result<f64, ParseError> {
    p.expect(&Tok::LBracket)?;
    if !p.eat(&Tok::Le) && !p.eat(&Tok::Ge) {
        return Err(p.error(&["`<=`"]));
    }
    let b = positive_bound(p)?;
    p.expect(&Tok::RBracket)?;
    Ok(b)
}

fn path_formula(p: &mut Parser) -> Result<PathFormula, ParseError> {
    p.expect(&Tok::LParen)?;
    let f = if p.eat(&Tok::Always) {
        PathFormula::Globally(p.expr()?)
    } else if p.eat(&Tok::Eventually) {
        PathFormula::Eventually(p.expr()?)
    } else {
        return Err(p.error(&["`[]`", "`<>`"]));
    };
    p.expect(&Tok::RParen)?;
    Ok(f)
}

fn runs(p: &mut Parser) -> Result<u64, ParseError> {
    let at = p.span();
    let n = p.integer()?;
    if n < 1 {
        return Err(ParseError::new(at, format!("run count must be at least 1, got {n}")));
    }
    Ok(n as u64)
}

fn query(p: &mut Parser) -> Result<Query, ParseError> {
    if p.eat_keyword("Pr") {
        let b1 = bound(p)?;
        let f1 = path_formula(p)?;
        let relation = if p.eat(&Tok::Ge) {
            Relation::Ge
        } else if p.eat(&Tok::Le) {
            Relation::Le
        } else {
            return Ok(Query::Estimate {
                formula: f1,
                bound: b1,
            });
        };
        if p.is_keyword("Pr") {
            if relation != Relation::Ge {
                return Err(p.error(&["probability"]));
            }
            p.next();
            let b2 = bound(p)?;
            let f2 = path_formula(p)?;
            return Ok(Query::Compare {
                formula1: f1,
                bound1: b1,
                formula2: f2,
                bound2: b2,
            });
        }
        let at = p.span();
        let p0 = p.number()?;
        if !(0.0..=1.0).contains(&p0) {
            return Err(ParseError::new(at, format!("probability must be in [0, 1], got {p0}")));
        }
        return Ok(Query::Hypothesis {
            formula: f1,
            bound: b1,
            p0,
            relation,
        });
    }
    if p.eat_keyword("E") {
        p.expect(&Tok::LBracket)?;
        if !p.eat(&Tok::Le) && !p.eat(&Tok::Ge) {
            return Err(p.error(&["`<=`"]));
        }
        let b = positive_bound(p)?;
        p.expect(&Tok::Semi)?;
        let n = runs(p)?;
        p.expect(&Tok::RBracket)?;
        p.expect(&Tok::LParen)?;
        let mode = if p.eat_keyword("max") {
            Extremum::Max
        } else if p.eat_keyword("min") {
            Extremum::Min
        } else {
            return Err(p.error(&["`max`", "`min`"]));
        };
        p.expect(&Tok::Colon)?;
        let expr = p.expr()?;
        p.expect(&Tok::RParen)?;
        return Ok(Query::Expected {
            bound: b,
            runs: n,
            mode,
            expr,
        });
    }
    if p.eat_keyword("simulate") {
        let n = runs(p)?;
        let b = bound(p)?;
        p.expect(&Tok::LBrace)?;
        let mut exprs = vec![p.expr()?];
        while p.eat(&Tok::Comma) {
            exprs.push(p.expr()?);
        }
        p.expect(&Tok::RBrace)?;
        return Ok(Query::Simulate {
            runs: n,
            bound: b,
            exprs,
            sample_step: None,
        });
    }
    Err(p.error(&["`Pr`", "`E`", "`simulate`"]))
}

fn expectation(p: &mut Parser) -> Result<Expectation, ParseError> {
    if p.eat_keyword("valid") {
        return Ok(Expectation::Valid);
    }
    if p.eat_keyword("invalid") {
        return Ok(Expectation::Invalid);
    }
    if p.eat(&Tok::LBracket) {
        let at = p.span();
        let lo = p.number()?;
        p.expect(&Tok::Comma)?;
        let hi = p.number()?;
        p.expect(&Tok::RBracket)?;
        if lo > hi {
            return Err(ParseError::new(at, format!("empty interval [{lo}, {hi}]")));
        }
        return Ok(Expectation::Within(lo, hi));
    }
    Err(p.error(&["`valid`", "`invalid`", "`[lo, hi]`"]))
}

fn constraint(p: &mut Parser) -> Result<WhConstraint, ParseError> {
    let start = p.expect_keyword("constraint")?;
    let (name, _) = p.ident()?;
    let (kind_name, kind_span) = p.ident()?;
    p.expect(&Tok::LParen)?;
    let mut params: Vec<(String, f64)> = Vec::new();
    if !p.eat(&Tok::RParen) {
        loop {
            let (key, at) = p.ident()?;
            p.expect(&Tok::Eq)?;
            let v = p.number()?;
            if params.iter().any(|(k, _)| *k == key) {
                return Err(ParseError::new(at, format!("parameter {key} given twice")));
            }
            params.push((key, v));
            if p.eat(&Tok::RParen) {
                break;
            }
            p.expect(&Tok::Comma)?;
        }
    }
    let get = |k: &str| params.iter().find(|(n, _)| n == k).map(|(_, v)| *v);
    let need = |k: &str| {
        get(k).ok_or_else(|| ParseError::new(kind_span, format!("missing parameter `{k}`")))
    };
    let allowed: &[&str] = match kind_name.as_str() {
        "execution" | "end_to_end" | "endtoend" => &["lower", "upper", "m", "k"],
        "synchronization" => &["tolerance", "m", "k"],
        "periodic" => &["lower", "upper", "period", "jitter", "per_occurrence", "m", "k"],
        _ => {
            return Err(ParseError {
                span: kind_span,
                len: kind_name.chars().count() as u32,
                message: format!("unknown constraint kind `{kind_name}`"),
                expected: ["execution", "synchronization", "periodic", "end_to_end"]
                    .iter()
                    .map(|s| s.to_string())
                    .collect(),
            })
        }
    };
    if let Some((k, _)) = params.iter().find(|(k, _)| !allowed.contains(&k.as_str())) {
        return Err(ParseError::new(kind_span, format!("unknown parameter `{k}` for {kind_name}")));
    }
    let kind = match kind_name.as_str() {
        "execution" => ConstraintKind::Execution {
            lower: need("lower")?,
            upper: need("upper")?,
        },
        "synchronization" => ConstraintKind::Synchronization {
            tolerance: need("tolerance")?,
        },
        "periodic" => {
            let (lower, upper) = match get("period") {
                Some(t) => (t, t),
                None => (need("lower")?, need("upper")?),
            };
            ConstraintKind::Periodic {
                lower,
                upper,
                jitter: get("jitter").unwrap_or(0.0),
                band: if get("per_occurrence").unwrap_or(0.0) != 0.0 {
                    PeriodBand::PerOccurrence
                } else {
                    PeriodBand::Fixed
                },
            }
        }
        _ => ConstraintKind::EndToEnd {
            lower: need("lower")?,
            upper: need("upper")?,
        },
    };
    let as_u32 = |k: &str, default: u32| -> Result<u32, ParseError> {
        match get(k) {
            None => Ok(default),
            Some(v) if v.fract() == 0.0 && (0.0..=u32::MAX as f64).contains(&v) => Ok(v as u32),
            Some(v) => Err(ParseError::new(kind_span, format!("`{k}` must be a non-negative integer, got {v}"))),
        }
    };
    let k = as_u32("k", 1)?;
    let m = as_u32("m", k)?;
    p.expect_keyword("on")?;
    let mut bindings = Vec::new();
    loop {
        let (role, _) = p.ident()?;
        p.expect(&Tok::Eq)?;
        let b = if p.is_keyword("when") && p.peek_at(1) == &Tok::LParen {
            p.next();
            p.next();
            let e = p.expr()?;
            p.expect(&Tok::RParen)?;
            EventBinding::Predicate(e)
        } else {
            EventBinding::Channel(p.ident()?.0)
        };
        bindings.push((role, b));
        if !p.eat(&Tok::Comma) {
            break;
        }
    }
    p.expect(&Tok::Semi)?;
    let c = WhConstraint {
        name,
        kind,
        m,
        k,
        bindings,
    };
    c.check().map_err(|e| ParseError::new(start, e.to_string()))?;
    Ok(c)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::Expr;

    #[test]
    fn hypothesis_form() {
        let q = parse_query("Pr[<=3000]([] !SignRegExec.fail) >= 0.95").unwrap();
        assert_eq!(
            q,
            Query::Hypothesis {
                formula: PathFormula::Globally(Expr::not(Expr::name("SignRegExec.fail"))),
                bound: 3000.0,
                p0: 0.95,
                relation: Relation::Ge,
            }
        );
    }

    #[test]
    fn simulate_form() {
        let q = parse_query("simulate 100 [<=3000] {cameraexec}").unwrap();
        assert_eq!(
            q,
            Query::Simulate {
                runs: 100,
                bound: 3000.0,
                exprs: vec![Expr::name("cameraexec")],
                sample_step: None,
            }
        );
    }

    #[test]
    fn expected_form_and_ge_spelling() {
        let want = Query::Expected {
            bound: 3000.0,
            runs: 100,
            mode: Extremum::Max,
            expr: Expr::name("energy.braking_en"),
        };
        assert_eq!(parse_query("E[<=3000; 100](max: energy.braking_en)").unwrap(), want);
        assert_eq!(parse_query("E[>=3000;100](max: energy.braking_en)").unwrap(), want);
    }

    #[test]
    fn compare_and_estimate() {
        let q = parse_query("Pr[<=10](<> x > 1) >= Pr[<=10]([] y)").unwrap();
        assert!(matches!(q, Query::Compare { .. }));
        let q = parse_query("Pr[<=10](<> x > 1)").unwrap();
        assert!(matches!(q, Query::Estimate { .. }));
    }

    #[test]
    fn bad_bounds() {
        assert!(parse_query("Pr[<=0](<> x)").is_err());
        assert!(parse_query("Pr[<=5](<> x) >= 1.5").is_err());
        assert!(parse_query("simulate 0 [<=5] {x}").is_err());
    }

    #[test]
    fn file_with_names_constraints_and_expectations() {
        let src = "// timing
            constraint R46 execution(lower=10, upper=20, m=19, k=20) on start=sig_start, stop=sig_done;
            R46: Pr[<=3000]([] !R46.fail) >= 0.95 => valid
            Pr[<=3000](<> x) => [0.9, 1]
            R2: simulate 1 [<=10] {x, y};";
        let f = parse_query_file(src).unwrap();
        assert_eq!(f.constraints.len(), 1);
        assert_eq!(f.constraints[0].m, 19);
        assert_eq!(f.queries.len(), 3);
        assert_eq!(f.queries[0].name, "R46");
        assert_eq!(f.queries[0].expected, Some(Expectation::Valid));
        assert_eq!(f.queries[1].name, "Q2");
        assert_eq!(f.queries[1].expected, Some(Expectation::Within(0.9, 1.0)));
        assert_eq!(f.queries[2].name, "R2");
    }

    #[test]
    fn constraint_errors() {
        assert!(parse_query_file("constraint A execution(lower=3, upper=1) on start=a, stop=b;").is_err());
        assert!(parse_query_file("constraint A execution(lower=1, upper=3) on start=a;").is_err());
        assert!(parse_query_file("constraint A synchronization(tolerance=1) on e1=a;").is_err());
        assert!(parse_query_file("constraint A periodic(period=5, m=3, k=2) on occurrence=a;").is_err());
        assert!(parse_query_file("constraint A foo(x=1) on a=b;").is_err());
    }
}
