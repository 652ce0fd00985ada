use crate::expr::Type;
use crate::model::{
    Assign, ChannelDecl, ChannelKind, Define, Edge, Instantiation, Location, LocationKind, Model,
    Param, RateDecl, SyncDir, SyncLabel, Template, VarDecl,
};

use super::{ParseError, Parser, Tok};

pub fn parse_model(src: &str) -> Result<Model, ParseError> {
    let mut p = Parser::new(src)?;
    let mut model = Model::default();
    let mut seen_system = false;
    while !p.at_eof() {
        if seen_system {
            return Err(p.error(&["end of input"]));
        }
        if p.is_keyword("template") {
            model.templates.push(template(&mut p)?);
        } else if p.is_keyword("system") {
            if model.templates.is_empty() {
                return Err(p.error(&["`template`"]));
            }
            system(&mut p, &mut model.system)?;
            seen_system = true;
        } else if p.is_keyword("chan") || p.is_keyword("broadcast") {
            channels(&mut p, &mut model.channels)?;
        } else if p.is_keyword("define") {
            p.next();
            let (name, span) = p.ident()?;
            p.expect(&Tok::Eq)?;
            let expr = p.expr()?;
            p.expect(&Tok::Semi)?;
            model.defines.push(Define { name, expr, span });
        } else if var_type(&p).is_some() {
            var_decls(&mut p, &mut model.globals)?;
        } else {
            return Err(p.error(&["declaration", "`template`", "`system`"]));
        }
    }
    if !seen_system {
        return Err(p.error(&["`system`"]));
    }
    Ok(model)
}

fn var_type(p: &Parser) -> Option<Type> {
    match p.peek() {
        Tok::Ident(s) => match s.as_str() {
            "int" => Some(Type::Int),
            "real" => Some(Type::Real),
            "bool" => Some(Type::Bool),
            "clock" => Some(Type::Clock),
            _ => None,
        },
        _ => None,
    }
}

fn var_decls(p: &mut Parser, out: &mut Vec<VarDecl>) -> Result<(), ParseError> {
    let ty = var_type(p).ok_or_else(|| p.error(&["type"]))?;
    p.next();
    loop {
        let (name, span) = p.ident()?;
        let init = if p.eat(&Tok::Eq) { Some(p.expr()?) } else { None };
        out.push(VarDecl { name, ty, init, span });
        if p.eat(&Tok::Semi) {
            return Ok(());
        }
        if !p.eat(&Tok::Comma) {
            return Err(p.error(&["`,`", "`;`"]));
        }
    }
}

fn channels(p: &mut Parser, out: &mut Vec<ChannelDecl>) -> Result<(), ParseError> {
    let kind = if p.eat_keyword("broadcast") {
        ChannelKind::Broadcast
    } else {
        ChannelKind::Binary
    };
    p.expect_keyword("chan")?;
    loop {
        let (name, span) = p.ident()?;
        out.push(ChannelDecl { name, kind, span });
        if p.eat(&Tok::Semi) {
            return Ok(());
        }
        if !p.eat(&Tok::Comma) {
            return Err(p.error(&["`,`", "`;`"]));
        }
    }
}

fn template(p: &mut Parser) -> Result<Template, ParseError> {
    p.expect_keyword("template")?;
    let (name, span) = p.ident()?;
    p.expect(&Tok::LParen)?;
    let mut params = Vec::new();
    if !p.eat(&Tok::RParen) {
        loop {
            let ty = var_type(p).ok_or_else(|| p.error(&["parameter type"]))?;
            p.next();
            let (pname, _) = p.ident()?;
            params.push(Param { name: pname, ty });
            if p.eat(&Tok::RParen) {
                break;
            }
            p.expect(&Tok::Comma)?;
        }
    }
    p.expect(&Tok::LBrace)?;
    let mut t = Template {
        name,
        params,
        locals: Vec::new(),
        locations: Vec::new(),
        edges: Vec::new(),
        span,
    };
    while !p.eat(&Tok::RBrace) {
        if var_type(p).is_some() {
            if !t.locations.is_empty() || !t.edges.is_empty() {
                return Err(p.error(&["location", "edge", "`}`"]));
            }
            var_decls(p, &mut t.locals)?;
        } else if p.is_keyword("init") || p.is_keyword("committed") || p.is_keyword("loc") {
            if !t.edges.is_empty() {
                return Err(p.error(&["edge", "`}`"]));
            }
            t.locations.push(location(p)?);
        } else if matches!(p.peek(), Tok::Ident(_)) && p.peek_at(1) == &Tok::Arrow {
            t.edges.push(edge(p)?);
        } else {
            return Err(p.error(&["declaration", "location", "edge", "`}`"]));
        }
    }
    if t.locations.is_empty() {
        return Err(ParseError::new(t.span, format!("template {} has no locations", t.name)));
    }
    Ok(t)
}

fn location(p: &mut Parser) -> Result<Location, ParseError> {
    let mut initial = false;
    let mut kind = LocationKind::Normal;
    loop {
        if !initial && p.eat_keyword("init") {
            initial = true;
        } else if kind == LocationKind::Normal && p.eat_keyword("committed") {
            kind = LocationKind::Committed;
        } else {
            break;
        }
    }
    p.expect_keyword("loc")?;
    let (name, span) = p.ident()?;
    let mut loc = Location::new(&name);
    loc.initial = initial;
    loc.kind = kind;
    loc.span = span;
    if p.eat(&Tok::LBrace) {
        while !p.eat(&Tok::RBrace) {
            let at = p.span();
            if p.eat_keyword("inv") {
                if loc.invariant.is_some() {
                    return Err(ParseError::new(at, "location has more than one invariant"));
                }
                loc.invariant = Some(p.expr()?);
            } else if p.eat_keyword("rate") {
                let (clock, _) = p.ident()?;
                p.expect(&Tok::Eq)?;
                let expr = p.expr()?;
                loc.rates.push(RateDecl { clock, expr });
            } else if p.eat_keyword("exitrate") {
                if loc.exit_rate.is_some() {
                    return Err(ParseError::new(at, "location has more than one exit rate"));
                }
                loc.exit_rate = Some(p.number()?);
            } else {
                return Err(p.error(&["`inv`", "`rate`", "`exitrate`", "`}`"]));
            }
            p.expect(&Tok::Semi)?;
        }
    }
    Ok(loc)
}

fn edge(p: &mut Parser) -> Result<Edge, ParseError> {
    let (source, span) = p.ident()?;
    p.expect(&Tok::Arrow)?;
    let (target, _) = p.ident()?;
    let mut e = Edge::new(&source, &target);
    e.span = span;
    let mut seen_weight = false;
    let mut seen_update = false;
    p.expect(&Tok::LBrace)?;
    while !p.eat(&Tok::RBrace) {
        let at = p.span();
        if p.eat_keyword("guard") {
            if e.guard.is_some() {
                return Err(ParseError::new(at, "edge has more than one guard"));
            }
            e.guard = Some(p.expr()?);
        } else if p.eat_keyword("sync") {
            if e.sync.is_some() {
                return Err(ParseError::new(at, "edge has more than one sync label"));
            }
            let (channel, _) = p.ident()?;
            let dir = if p.eat(&Tok::Bang) {
                SyncDir::Emit
            } else if p.eat(&Tok::Question) {
                SyncDir::Receive
            } else {
                return Err(p.error(&["`!`", "`?`"]));
            };
            e.sync = Some(SyncLabel { channel, dir });
        } else if p.eat_keyword("weight") {
            if seen_weight {
                return Err(ParseError::new(at, "edge has more than one weight"));
            }
            seen_weight = true;
            e.weight = p.number()?;
        } else if p.eat_keyword("update") {
            if seen_update {
                return Err(ParseError::new(at, "edge has more than one update list"));
            }
            seen_update = true;
            loop {
                let (target, _) = p.ident()?;
                if !p.eat(&Tok::Assign) && !p.eat(&Tok::Eq) {
                    return Err(p.error(&["`:=`"]));
                }
                let expr = p.expr()?;
                e.updates.push(Assign { target, expr });
                if !p.eat(&Tok::Comma) {
                    break;
                }
            }
        } else {
            return Err(p.error(&["`guard`", "`sync`", "`weight`", "`update`", "`}`"]));
        }
        p.expect(&Tok::Semi)?;
    }
    Ok(e)
}

fn system(p: &mut Parser, out: &mut Vec<Instantiation>) -> Result<(), ParseError> {
    p.expect_keyword("system")?;
    loop {
        let (first, span) = p.ident()?;
        let (alias, template) = if p.eat(&Tok::Eq) {
            (Some(first), p.ident()?.0)
        } else {
            (None, first)
        };
        let mut args = Vec::new();
        if p.eat(&Tok::LParen) && !p.eat(&Tok::RParen) {
            loop {
                args.push(p.expr()?);
                if p.eat(&Tok::RParen) {
                    break;
                }
                p.expect(&Tok::Comma)?;
            }
        }
        out.push(Instantiation {
            alias,
            template,
            args,
            span,
        });
        if p.eat(&Tok::Semi) {
            return Ok(());
        }
        if !p.eat(&Tok::Comma) {
            return Err(p.error(&["`,`", "`;`"]));
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::Expr;

    #[test]
    fn minimal_template() {
        let m = parse_model("template A() { init loc s {} } system A();").unwrap();
        assert_eq!(m.templates.len(), 1);
        assert_eq!(m.templates[0].initial(), Some(0));
        assert_eq!(m.system.len(), 1);
    }

    #[test]
    fn edge_with_all_fields() {
        let src = "int n = 0; broadcast chan go; clock x;
            template A() { init loc s1 {} loc s2 {}
              s1 -> s2 { guard x >= 5; sync go!; weight 30; update n := n + 1; } }
            system A;";
        let m = parse_model(src).unwrap();
        let e = &m.templates[0].edges[0];
        assert_eq!(e.guard.as_ref().unwrap().to_string(), "x >= 5");
        assert_eq!(e.sync.as_ref().unwrap().channel, "go");
        assert_eq!(e.sync.as_ref().unwrap().dir, SyncDir::Emit);
        assert_eq!(e.weight, 30.0);
        assert_eq!(e.updates[0].target, "n");
        assert_eq!(e.updates[0].expr.to_string(), "n + 1");
    }

    #[test]
    fn locations_rates_and_aliases() {
        let src = "clock e; define v = 2 * 3;
            template P(int k) { clock c = 1;
              init committed loc a { inv c <= 4; rate e = v; rate c = 0; exitrate 2.5; } }
            system p1 = P(1), p2 = P(2);";
        let m = parse_model(src).unwrap();
        let l = &m.templates[0].locations[0];
        assert!(l.initial);
        assert_eq!(l.kind, LocationKind::Committed);
        assert_eq!(l.rates.len(), 2);
        assert_eq!(l.exit_rate, Some(2.5));
        assert_eq!(m.templates[0].locals[0].init, Some(Expr::Int(1)));
        assert_eq!(m.component_names(), vec!["p1", "p2"]);
        assert_eq!(m.defines[0].name, "v");
    }

    #[test]
    fn errors_point_into_source() {
        let err = parse_model("template A() { init loc s {} s -> { } } system A;").unwrap_err();
        assert_eq!(err.span.line, 1);
        assert!(err.expected.contains(&"identifier".to_string()));
        assert!(parse_model("template A() { init loc s {} }").is_err());
        assert!(parse_model("system A;").is_err());
    }
}
