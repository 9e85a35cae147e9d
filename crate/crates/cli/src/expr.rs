//! Descriptor expressions: the one-line textual forms a scenario uses to
//! declare agents and environments by construction, like `constant(b)` or
//! `mix((1/3,2/3), (Db,Da))`.

/// A parsed `head(arg, ...)` call. Arguments are kept as raw text; the
/// construction that owns the head decides whether each position is a name,
/// a rational, a history, or a parenthesized list.
#[derive(Clone, Debug, PartialEq)]
pub struct Call {
    pub head: String,
    pub args: Vec<String>,
}

fn is_word(s: &str) -> bool {
    !s.is_empty()
        && s.chars()
            .all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-')
}

/// Splits on commas at parenthesis depth zero, trimming each piece. Empty
/// input yields no pieces; an empty piece between commas is an error.
pub fn split_top_level(text: &str) -> Result<Vec<String>, String> {
    let mut pieces = Vec::new();
    let mut depth = 0usize;
    let mut start = 0usize;
    let mut cuts = Vec::new();
    for (i, c) in text.char_indices() {
        match c {
            '(' => depth += 1,
            ')' => {
                depth = depth
                    .checked_sub(1)
                    .ok_or_else(|| format!("unbalanced parentheses in {text:?}"))?;
            }
            ',' if depth == 0 => cuts.push(i),
            _ => {}
        }
    }
    if depth != 0 {
        return Err(format!("unbalanced parentheses in {text:?}"));
    }
    for cut in cuts {
        pieces.push(text[start..cut].trim().to_string());
        start = cut + 1;
    }
    let last = text[start..].trim().to_string();
    if pieces.is_empty() && last.is_empty() {
        return Ok(Vec::new());
    }
    pieces.push(last);
    if pieces.iter().any(|p| p.is_empty()) {
        return Err(format!("empty item in {text:?}"));
    }
    Ok(pieces)
}

/// Parses `head` or `head(args)`.
pub fn parse_call(expr: &str) -> Result<Call, String> {
    let expr = expr.trim();
    match expr.find('(') {
        None => {
            if !is_word(expr) {
                return Err(format!("malformed expression {expr:?}"));
            }
            Ok(Call {
                head: expr.to_string(),
                args: Vec::new(),
            })
        }
        Some(open) => {
            let head = expr[..open].trim();
            if !is_word(head) {
                return Err(format!("malformed expression head in {expr:?}"));
            }
            if !expr.ends_with(')') {
                return Err(format!("expected {expr:?} to end with a closing parenthesis"));
            }
            let inner = &expr[open + 1..expr.len() - 1];
            Ok(Call {
                head: head.to_string(),
                args: split_top_level(inner)?,
            })
        }
    }
}

/// Interprets one argument as a parenthesized list: `(a, b, c)`.
pub fn parse_list(arg: &str) -> Result<Vec<String>, String> {
    let arg = arg.trim();
    if !(arg.starts_with('(') && arg.ends_with(')')) {
        return Err(format!("expected a parenthesized list, got {arg:?}"));
    }
    let items = split_top_level(&arg[1..arg.len() - 1])?;
    if items.is_empty() {
        return Err(format!("empty list {arg:?}"));
    }
    Ok(items)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bare_heads_and_calls_parse() {
        assert_eq!(
            parse_call("uniform").unwrap(),
            Call {
                head: "uniform".into(),
                args: vec![]
            }
        );
        let call = parse_call("mix((1/3,2/3), (Db,Da))").unwrap();
        assert_eq!(call.head, "mix");
        assert_eq!(call.args, vec!["(1/3,2/3)", "(Db,Da)"]);
        assert_eq!(parse_list(&call.args[0]).unwrap(), vec!["1/3", "2/3"]);
    }

    #[test]
    fn history_arguments_survive_their_inner_commas() {
        let call = parse_call("patch(U, (x0,0) b (x0,1), (1/4,3/4))").unwrap();
        assert_eq!(call.args[1], "(x0,0) b (x0,1)");
        assert_eq!(parse_list(&call.args[2]).unwrap(), vec!["1/4", "3/4"]);
    }

    #[test]
    fn malformed_expressions_are_rejected() {
        assert!(parse_call("mix((1/2,").is_err());
        assert!(parse_call("du al(x)").is_err());
        assert!(parse_call("f(a,,b)").is_err());
        assert!(parse_call("").is_err());
    }
}
