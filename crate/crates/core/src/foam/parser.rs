use super::lexer::{Lexer, Spanned, Tok};
use super::{Dictionary, DictionaryTree, Entry, FoamHeader, Item, ParseError};

/// Parses OpenFOAM dictionary source. When `expected_name` is given the
/// header's `object` must equal it.
pub fn parse(text: &str, expected_name: Option<&str>) -> Result<DictionaryTree, ParseError> {
    let mut p = Parser { lx: Lexer::new(text) };
    let mut body = p.dict_body(None)?;

    let mut header = None;
    if let Some(pos) = body.entries.iter().position(|e| matches!(e, Entry::Dict { key, .. } if key == "FoamFile")) {
        let Entry::Dict { dict, .. } = body.entries.remove(pos) else { unreachable!() };
        header = Some(header_from(dict)?);
    }
    if let (Some(name), Some(h)) = (expected_name, header.as_ref()) {
        if h.object != name {
            return Err(ParseError::new(1, 1, format!("header object '{name}'"), format!("'{}'", h.object)));
        }
    }
    Ok(DictionaryTree { header, body })
}

fn header_from(dict: Dictionary) -> Result<FoamHeader, ParseError> {
    let mut version = None;
    let mut format = None;
    let mut class = None;
    let mut location = None;
    let mut object = None;
    let mut extra = Vec::new();
    for e in dict.entries {
        let text = match &e {
            Entry::Value { items, .. } if items.len() == 1 => items[0].as_text().map(str::to_string),
            _ => None,
        };
        match (e.key(), text) {
            (Some("version"), Some(t)) => version = Some(t),
            (Some("format"), Some(t)) => format = Some(t),
            (Some("class"), Some(t)) => class = Some(t),
            (Some("location"), Some(t)) => location = Some(t),
            (Some("object"), Some(t)) => object = Some(t),
            _ => extra.push(e),
        }
    }
    let missing = |k: &str| ParseError::new(1, 1, format!("'{k}' in FoamFile header"), "nothing");
    Ok(FoamHeader {
        version,
        format: format.ok_or_else(|| missing("format"))?,
        class: class.ok_or_else(|| missing("class"))?,
        location,
        object: object.ok_or_else(|| missing("object"))?,
        extra,
    })
}

struct Parser<'a> {
    lx: Lexer<'a>,
}

impl Parser<'_> {
    fn unexpected(t: &Spanned, expected: &str) -> ParseError {
        ParseError::new(t.line, t.column, expected, t.tok.describe())
    }

    /// Entries up to the matching `}` (when `open` is the brace position) or end of input.
    fn dict_body(&mut self, open: Option<(usize, usize)>) -> Result<Dictionary, ParseError> {
        let mut dict = Dictionary::default();
        loop {
            let t = self.lx.peek()?.clone();
            match t.tok {
                Tok::Eof => {
                    return match open {
                        Some((line, column)) => Err(ParseError::new(line, column, "'}' closing this '{'", "end of input")),
                        None => Ok(dict),
                    };
                }
                Tok::RBrace => {
                    return match open {
                        Some(_) => {
                            self.lx.next()?;
                            Ok(dict)
                        }
                        None => Err(Self::unexpected(&t, "an entry")),
                    };
                }
                Tok::Semi => {
                    self.lx.next()?;
                }
                Tok::Word(ref w) if w.starts_with('#') && w.len() > 1 => {
                    self.lx.next()?;
                    let args = self.lx.take_line();
                    dict.entries.push(Entry::Directive { name: w.clone(), args });
                }
                Tok::Word(_) | Tok::Str(_) => {
                    self.lx.next()?;
                    let key = match t.tok {
                        Tok::Word(w) => w,
                        Tok::Str(s) => format!("\"{s}\""),
                        _ => unreachable!(),
                    };
                    if self.lx.peek()?.tok == Tok::LBrace {
                        let open = self.lx.next()?;
                        let inner = self.dict_body(Some((open.line, open.column)))?;
                        dict.entries.push(Entry::Dict { key, dict: inner });
                    } else {
                        let items = self.items_until_semi()?;
                        dict.entries.push(Entry::Value { key, items });
                    }
                }
                _ => {
                    let items = self.bare_items()?;
                    dict.entries.push(Entry::Bare(items));
                }
            }
        }
    }

    fn items_until_semi(&mut self) -> Result<Vec<Item>, ParseError> {
        let mut items = Vec::new();
        loop {
            let t = self.lx.peek()?.clone();
            match t.tok {
                Tok::Semi => {
                    self.lx.next()?;
                    return Ok(items);
                }
                Tok::Eof | Tok::RBrace | Tok::RParen | Tok::RBracket => return Err(Self::unexpected(&t, "';'")),
                _ => items.push(self.item()?),
            }
        }
    }

    /// Anonymous content ends at `;`, a closing brace, or end of input.
    fn bare_items(&mut self) -> Result<Vec<Item>, ParseError> {
        let mut items = Vec::new();
        loop {
            let t = self.lx.peek()?.clone();
            match t.tok {
                Tok::Semi => {
                    self.lx.next()?;
                    return Ok(items);
                }
                Tok::Eof | Tok::RBrace => return Ok(items),
                Tok::RParen | Tok::RBracket => return Err(Self::unexpected(&t, "a value")),
                _ => items.push(self.item()?),
            }
        }
    }

    fn item(&mut self) -> Result<Item, ParseError> {
        let t = self.lx.next()?;
        Ok(match t.tok {
            Tok::Word(w) => Item::Word(w),
            Tok::Number(n) => Item::Number(n),
            Tok::Str(s) => Item::Str(s),
            Tok::Verbatim(v) => Item::Verbatim(v),
            Tok::LBrace => Item::Dict(self.dict_body(Some((t.line, t.column)))?),
            Tok::LParen => Item::List(self.seq(Tok::RParen, (t.line, t.column), "')' closing this '('")?),
            Tok::LBracket => Item::Dimensions(self.seq(Tok::RBracket, (t.line, t.column), "']' closing this '['")?),
            _ => return Err(Self::unexpected(&t, "a value")),
        })
    }

    fn seq(&mut self, close: Tok, open: (usize, usize), what: &str) -> Result<Vec<Item>, ParseError> {
        let mut items = Vec::new();
        loop {
            let t = self.lx.peek()?.clone();
            if t.tok == close {
                self.lx.next()?;
                return Ok(items);
            }
            match t.tok {
                Tok::Eof => return Err(ParseError::new(open.0, open.1, what, "end of input")),
                Tok::Semi | Tok::RBrace | Tok::RParen | Tok::RBracket => return Err(Self::unexpected(&t, what)),
                _ => items.push(self.item()?),
            }
        }
    }
}
