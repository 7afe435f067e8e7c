use super::{Dictionary, DictionaryTree, Entry, FoamHeader, Item};

const KEY_WIDTH: usize = 16;
const INDENT: &str = "    ";

/// Renders a tree as OpenFOAM ASCII text. `parse(serialize(t))` equals `t`.
pub fn serialize(tree: &DictionaryTree) -> String {
    let mut out = String::new();
    if let Some(h) = &tree.header {
        write_header(&mut out, h);
    }
    if !tree.body.entries.is_empty() {
        if tree.header.is_some() {
            out.push('\n');
        }
        write_body(&mut out, &tree.body, 0, true);
    }
    out
}

fn write_header(out: &mut String, h: &FoamHeader) {
    out.push_str("FoamFile\n{\n");
    if let Some(v) = &h.version {
        push_kv(out, 1, "version", v);
    }
    push_kv(out, 1, "format", &h.format);
    push_kv(out, 1, "class", &h.class);
    if let Some(loc) = &h.location {
        push_kv(out, 1, "location", &format!("\"{loc}\""));
    }
    push_kv(out, 1, "object", &word_or_quoted(&h.object));
    for e in &h.extra {
        write_entry(out, e, 1, false);
    }
    out.push_str("}\n");
}

fn word_or_quoted(s: &str) -> String {
    if s.is_empty() || s.contains(|c: char| c.is_whitespace() || "{}();[]\"".contains(c)) {
        format!("\"{s}\"")
    } else {
        s.to_string()
    }
}

fn pad(depth: usize) -> String {
    INDENT.repeat(depth)
}

fn push_kv(out: &mut String, depth: usize, key: &str, value: &str) {
    out.push_str(&pad(depth));
    out.push_str(&format!("{key:<KEY_WIDTH$}"));
    if key.len() >= KEY_WIDTH {
        out.push(' ');
    }
    out.push_str(value);
    out.push_str(";\n");
}

fn write_body(out: &mut String, dict: &Dictionary, depth: usize, top_level: bool) {
    let n = dict.entries.len();
    for (i, e) in dict.entries.iter().enumerate() {
        let last = top_level && i + 1 == n;
        write_entry(out, e, depth, last);
    }
}

fn write_entry(out: &mut String, e: &Entry, depth: usize, last_top_level: bool) {
    match e {
        Entry::Directive { name, args } => {
            out.push_str(&pad(depth));
            out.push_str(name);
            if !args.is_empty() {
                out.push(' ');
                out.push_str(args);
            }
            out.push('\n');
        }
        Entry::Dict { key, dict } => {
            out.push_str(&pad(depth));
            out.push_str(key);
            out.push('\n');
            write_braced(out, dict, depth);
            out.push('\n');
        }
        Entry::Value { key, items } => {
            if items.iter().any(is_multiline) {
                out.push_str(&pad(depth));
                out.push_str(key);
                out.push('\n');
                write_items_block(out, items, depth);
                out.push_str(";\n");
            } else if items.is_empty() {
                out.push_str(&pad(depth));
                out.push_str(key);
                out.push_str(";\n");
            } else {
                push_kv(out, depth, key, &inline_items(items));
            }
        }
        Entry::Bare(items) => {
            write_items_block(out, items, depth);
            // The terminator can only be dropped where end of input closes the content.
            out.push_str(if last_top_level { "\n" } else { ";\n" });
        }
    }
}

fn write_braced(out: &mut String, dict: &Dictionary, depth: usize) {
    out.push_str(&pad(depth));
    out.push_str("{\n");
    write_body(out, dict, depth + 1, false);
    out.push_str(&pad(depth));
    out.push('}');
}

fn is_multiline(item: &Item) -> bool {
    match item {
        Item::Dict(_) => true,
        Item::List(items) => items.iter().any(|i| matches!(i, Item::Dict(_) | Item::List(_))) || items.len() > 12,
        Item::Verbatim(v) => v.contains('\n'),
        _ => false,
    }
}

/// Items laid out one multi-line item per line block; inline items share a line.
fn write_items_block(out: &mut String, items: &[Item], depth: usize) {
    let mut line: Vec<String> = Vec::new();
    let flush = |out: &mut String, line: &mut Vec<String>| {
        if !line.is_empty() {
            out.push_str(&pad(depth));
            out.push_str(&line.join(" "));
            out.push('\n');
            line.clear();
        }
    };
    for (i, item) in items.iter().enumerate() {
        if is_multiline(item) {
            flush(out, &mut line);
            write_multiline_item(out, item, depth);
            if i + 1 < items.len() {
                out.push('\n');
            }
        } else {
            line.push(inline_item(item));
        }
    }
    if !line.is_empty() {
        out.push_str(&pad(depth));
        out.push_str(&line.join(" "));
    }
}

fn write_multiline_item(out: &mut String, item: &Item, depth: usize) {
    match item {
        Item::Dict(d) => write_braced(out, d, depth),
        Item::List(items) => {
            out.push_str(&pad(depth));
            out.push_str("(\n");
            // Scalars share a line until the next list or dictionary, which
            // each get their own line(s). Order is preserved throughout.
            let mut pending: Vec<String> = Vec::new();
            let flush = |out: &mut String, pending: &mut Vec<String>| {
                if !pending.is_empty() {
                    out.push_str(&pad(depth + 1));
                    out.push_str(&pending.join(" "));
                    out.push('\n');
                    pending.clear();
                }
            };
            for it in items {
                if is_multiline(it) {
                    flush(out, &mut pending);
                    write_multiline_item(out, it, depth + 1);
                    out.push('\n');
                } else if matches!(it, Item::List(_)) {
                    pending.push(inline_item(it));
                    flush(out, &mut pending);
                } else {
                    pending.push(inline_item(it));
                }
            }
            flush(out, &mut pending);
            out.push_str(&pad(depth));
            out.push(')');
        }
        Item::Verbatim(v) => {
            out.push_str(&pad(depth));
            out.push_str(v);
        }
        other => {
            out.push_str(&pad(depth));
            out.push_str(&inline_item(other));
        }
    }
}

fn inline_items(items: &[Item]) -> String {
    items.iter().map(inline_item).collect::<Vec<_>>().join(" ")
}

fn inline_item(item: &Item) -> String {
    match item {
        Item::Word(w) | Item::Number(w) => w.clone(),
        Item::Str(s) => format!("\"{s}\""),
        Item::Verbatim(v) => v.clone(),
        Item::Dimensions(ds) => format!("[{}]", inline_items(ds)),
        Item::List(items) => format!("({})", inline_items(items)),
        Item::Dict(d) => {
            // Only reached for nested lists that are rendered inline; keep it valid.
            let mut s = String::from("{ ");
            for e in &d.entries {
                let mut tmp = String::new();
                write_entry(&mut tmp, e, 0, false);
                s.push_str(tmp.trim_end());
                s.push(' ');
            }
            s.push('}');
            s
        }
    }
}
