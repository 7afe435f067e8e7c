use super::ParseError;

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum Tok {
    LBrace,
    RBrace,
    LParen,
    RParen,
    LBracket,
    RBracket,
    Semi,
    Word(String),
    Number(String),
    Str(String),
    Verbatim(String),
    Eof,
}

impl Tok {
    pub(crate) fn describe(&self) -> String {
        match self {
            Tok::LBrace => "'{'".into(),
            Tok::RBrace => "'}'".into(),
            Tok::LParen => "'('".into(),
            Tok::RParen => "')'".into(),
            Tok::LBracket => "'['".into(),
            Tok::RBracket => "']'".into(),
            Tok::Semi => "';'".into(),
            Tok::Word(w) => format!("word '{w}'"),
            Tok::Number(n) => format!("number '{n}'"),
            Tok::Str(s) => format!("string \"{s}\""),
            Tok::Verbatim(_) => "verbatim block".into(),
            Tok::Eof => "end of input".into(),
        }
    }
}

#[derive(Debug, Clone)]
pub(crate) struct Spanned {
    pub tok: Tok,
    pub line: usize,
    pub column: usize,
}

pub(crate) struct Lexer<'a> {
    src: &'a str,
    pos: usize,
    line: usize,
    col: usize,
    peeked: Option<Spanned>,
}

fn is_number(text: &str) -> bool {
    text.starts_with(|c: char| c.is_ascii_digit() || c == '-' || c == '+' || c == '.')
        && text.parse::<f64>().is_ok()
}

impl<'a> Lexer<'a> {
    pub fn new(src: &'a str) -> Self {
        Lexer { src, pos: 0, line: 1, col: 1, peeked: None }
    }

    fn rest(&self) -> &'a str {
        &self.src[self.pos..]
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.rest().chars().next()?;
        self.pos += c.len_utf8();
        if c == '\n' {
            self.line += 1;
            self.col = 1;
        } else {
            self.col += 1;
        }
        Some(c)
    }

    fn skip_trivia(&mut self) -> Result<(), ParseError> {
        loop {
            let rest = self.rest();
            if rest.starts_with("//") {
                while let Some(c) = self.bump() {
                    if c == '\n' {
                        break;
                    }
                }
            } else if rest.starts_with("/*") {
                let (line, column) = (self.line, self.col);
                self.bump();
                self.bump();
                loop {
                    if self.rest().starts_with("*/") {
                        self.bump();
                        self.bump();
                        break;
                    }
                    if self.bump().is_none() {
                        return Err(ParseError::new(line, column, "'*/' closing the comment", "end of input"));
                    }
                }
            } else if rest.starts_with(char::is_whitespace) {
                self.bump();
            } else {
                return Ok(());
            }
        }
    }

    pub fn peek(&mut self) -> Result<&Spanned, ParseError> {
        if self.peeked.is_none() {
            let t = self.lex()?;
            self.peeked = Some(t);
        }
        Ok(self.peeked.as_ref().expect("just filled"))
    }

    pub fn next(&mut self) -> Result<Spanned, ParseError> {
        match self.peeked.take() {
            Some(t) => Ok(t),
            None => self.lex(),
        }
    }

    /// Raw remainder of the current line, used for `#include`-style directives.
    /// Must be called with no token peeked.
    pub fn take_line(&mut self) -> String {
        debug_assert!(self.peeked.is_none());
        let rest = self.rest();
        let end = rest.find('\n').unwrap_or(rest.len());
        let mut line = &rest[..end];
        if let Some(i) = line.find("//") {
            line = &line[..i];
        }
        let text = line.trim().to_string();
        for _ in 0..rest[..end].chars().count() {
            self.bump();
        }
        text
    }

    fn lex(&mut self) -> Result<Spanned, ParseError> {
        self.skip_trivia()?;
        let (line, column) = (self.line, self.col);
        let at = |tok| Ok(Spanned { tok, line, column });
        let Some(c) = self.rest().chars().next() else {
            return at(Tok::Eof);
        };
        let single = match c {
            '{' => Some(Tok::LBrace),
            '}' => Some(Tok::RBrace),
            '(' => Some(Tok::LParen),
            ')' => Some(Tok::RParen),
            '[' => Some(Tok::LBracket),
            ']' => Some(Tok::RBracket),
            ';' => Some(Tok::Semi),
            _ => None,
        };
        if let Some(t) = single {
            self.bump();
            return at(t);
        }
        if c == '"' {
            self.bump();
            let start = self.pos;
            loop {
                match self.bump() {
                    None => return Err(ParseError::new(line, column, "closing '\"'", "end of input")),
                    Some('\\') => {
                        self.bump();
                    }
                    Some('"') => break,
                    Some(_) => {}
                }
            }
            let inner = self.src[start..self.pos - 1].to_string();
            return at(Tok::Str(inner));
        }
        if self.rest().starts_with("#{") {
            let start = self.pos;
            loop {
                if self.rest().starts_with("#}") {
                    self.bump();
                    self.bump();
                    break;
                }
                if self.bump().is_none() {
                    return Err(ParseError::new(line, column, "'#}' closing the verbatim block", "end of input"));
                }
            }
            return at(Tok::Verbatim(self.src[start..self.pos].to_string()));
        }

        // Word or number. Parentheses belong to the word (`div(phi,U)`) when it
        // started with a letter-like character and they stay balanced.
        let start = self.pos;
        let allows_parens = !(c.is_ascii_digit() || c == '-' || c == '+' || c == '.');
        let mut depth = 0usize;
        while let Some(ch) = self.rest().chars().next() {
            if ch.is_whitespace() || matches!(ch, '{' | '}' | ';' | '"' | '[' | ']') {
                break;
            }
            if self.rest().starts_with("//") || self.rest().starts_with("/*") {
                break;
            }
            if ch == '(' {
                if !allows_parens || self.pos == start {
                    break;
                }
                depth += 1;
            } else if ch == ')' {
                if depth == 0 {
                    break;
                }
                depth -= 1;
            }
            self.bump();
        }
        let text = self.src[start..self.pos].to_string();
        if is_number(&text) {
            at(Tok::Number(text))
        } else {
            at(Tok::Word(text))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(src: &str) -> Vec<Tok> {
        let mut lx = Lexer::new(src);
        let mut out = Vec::new();
        loop {
            let t = lx.next().unwrap().tok;
            if t == Tok::Eof {
                return out;
            }
            out.push(t);
        }
    }

    #[test]
    fn function_style_keywords_stay_one_word() {
        assert_eq!(
            toks("div(phi,U) Gauss linear;"),
            vec![
                Tok::Word("div(phi,U)".into()),
                Tok::Word("Gauss".into()),
                Tok::Word("linear".into()),
                Tok::Semi
            ]
        );
    }

    #[test]
    fn counted_lists_split_number_and_paren() {
        assert_eq!(
            toks("3(1 2e-3 -4)"),
            vec![
                Tok::Number("3".into()),
                Tok::LParen,
                Tok::Number("1".into()),
                Tok::Number("2e-3".into()),
                Tok::Number("-4".into()),
                Tok::RParen
            ]
        );
    }

    #[test]
    fn comments_are_skipped() {
        assert_eq!(
            toks("a /* x\n y */ b // c\n d"),
            vec![Tok::Word("a".into()), Tok::Word("b".into()), Tok::Word("d".into())]
        );
    }

    #[test]
    fn strings_and_verbatim() {
        assert_eq!(toks(r#""a \"q\"""#), vec![Tok::Str(r#"a \"q\""#.into())]);
        assert_eq!(toks("#{ x; #}"), vec![Tok::Verbatim("#{ x; #}".into())]);
    }

    #[test]
    fn positions_track_lines() {
        let mut lx = Lexer::new("a\n  b");
        lx.next().unwrap();
        let b = lx.next().unwrap();
        assert_eq!((b.line, b.column), (2, 3));
    }
}
