use crate::error::{Error, Result};

/// Elements whose entire content is dropped.
const SKIPPED: &[&str] = &["script", "style", "head"];

/// Elements that start or end a line of text.
const BLOCK: &[&str] = &[
    "address", "article", "aside", "blockquote", "body", "br", "dd", "div", "dl", "dt",
    "fieldset", "figcaption", "figure", "footer", "form", "h1", "h2", "h3", "h4", "h5", "h6",
    "header", "hr", "html", "li", "main", "nav", "ol", "p", "pre", "section", "table", "tbody",
    "td", "tfoot", "th", "thead", "title", "tr", "ul",
];

struct Tag {
    name: String,
    closing: bool,
    self_closing: bool,
    /// Byte offset just past the closing `>`.
    end: usize,
}

/// Strips markup from (possibly malformed) HTML and returns plain text.
///
/// Block-level boundaries become newlines, entity references are decoded and
/// whitespace runs inside a line collapse to a single space.
pub fn extract_text(html: &str) -> Result<String> {
    let mut raw = String::with_capacity(html.len());
    let mut pos = 0;

    while pos < html.len() {
        let Some(offset) = html[pos..].find('<') else {
            push_text(&mut raw, &html[pos..]);
            break;
        };
        let lt = pos + offset;
        push_text(&mut raw, &html[pos..lt]);

        if html[lt..].starts_with("<!--") {
            pos = match html[lt + 4..].find("-->") {
                Some(end) => lt + 4 + end + 3,
                None => html.len(),
            };
            continue;
        }
        if html[lt..].starts_with("<!") || html[lt..].starts_with("<?") {
            pos = match html[lt..].find('>') {
                Some(end) => lt + end + 1,
                None => html.len(),
            };
            continue;
        }

        match parse_tag(html, lt) {
            Some(tag) => {
                if !tag.closing && !tag.self_closing && SKIPPED.contains(&tag.name.as_str()) {
                    pos = skip_element(html, tag.end, &tag.name);
                    raw.push('\n');
                    continue;
                }
                if BLOCK.contains(&tag.name.as_str()) {
                    raw.push('\n');
                }
                pos = tag.end;
            }
            None => {
                // a stray '<' is text
                raw.push('<');
                pos = lt + 1;
            }
        }
    }

    let text = raw
        .split('\n')
        .map(|line| line.split_whitespace().collect::<Vec<_>>().join(" "))
        .filter(|line| !line.is_empty())
        .collect::<Vec<_>>()
        .join("\n");
    if text.is_empty() {
        return Err(Error::EmptyDocument);
    }
    Ok(text)
}

fn push_text(out: &mut String, chunk: &str) {
    if chunk.is_empty() {
        return;
    }
    // Newlines inside text nodes are kept as line breaks.
    let decoded = html_escape::decode_html_entities(chunk);
    out.extend(decoded.chars().map(|c| if c == '\r' { '\n' } else { c }));
}

fn parse_tag(html: &str, lt: usize) -> Option<Tag> {
    let rest = &html[lt + 1..];
    let (closing, name_start) = match rest.strip_prefix('/') {
        Some(r) => (true, r),
        None => (false, rest),
    };
    let first = name_start.chars().next()?;
    if !first.is_ascii_alphabetic() {
        return None;
    }
    let name_len = name_start
        .find(|c: char| !(c.is_ascii_alphanumeric() || c == '-' || c == ':'))
        .unwrap_or(name_start.len());
    let name = name_start[..name_len].to_ascii_lowercase();

    // Find the closing '>' while respecting quoted attribute values.
    let body_start = lt + 1 + usize::from(closing) + name_len;
    let mut quote: Option<char> = None;
    for (i, c) in html[body_start..].char_indices() {
        match (quote, c) {
            (Some(q), c) if c == q => quote = None,
            (Some(_), _) => {}
            (None, '"') | (None, '\'') => quote = Some(c),
            (None, '>') => {
                let end = body_start + i + 1;
                let self_closing = html[..end - 1].ends_with('/');
                return Some(Tag {
                    name,
                    closing,
                    self_closing,
                    end,
                });
            }
            _ => {}
        }
    }
    None
}

/// Returns the offset just past `</name ...>`, or the end of input.
fn skip_element(html: &str, from: usize, name: &str) -> usize {
    let lower = html[from..].to_ascii_lowercase();
    let needle = format!("</{name}");
    let mut search = 0;
    while let Some(i) = lower[search..].find(&needle) {
        let at = search + i;
        let after = lower[at + needle.len()..].chars().next();
        if matches!(after, None | Some('>') | Some(' ') | Some('\t') | Some('\n') | Some('/')) {
            return match html[from + at..].find('>') {
                Some(gt) => from + at + gt + 1,
                None => html.len(),
            };
        }
        search = at + needle.len();
    }
    html.len()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn strips_single_tag() {
        assert_eq!(extract_text("<p>Hello</p>").unwrap(), "Hello");
    }

    #[test]
    fn drops_script_contents() {
        assert_eq!(
            extract_text("<script>var x=1;</script><p>A</p>").unwrap(),
            "A"
        );
        assert_eq!(
            extract_text("<SCRIPT type='a'>if (a < b) {}</SCRIPT >B").unwrap(),
            "B"
        );
    }

    #[test]
    fn list_items_become_lines_and_entities_decode() {
        assert_eq!(
            extract_text("<ul><li>Side effects</li><li>Risks &amp; benefits</li></ul>").unwrap(),
            "Side effects\nRisks & benefits"
        );
    }

    #[test]
    fn head_and_style_vanish() {
        let html = "<html><head><title>T</title><style>p{}</style></head>\
                    <body><h1>Title</h1>Text <b>bold</b><br>next</body></html>";
        assert_eq!(extract_text(html).unwrap(), "Title\nText bold\nnext");
    }

    #[test]
    fn collapses_whitespace_and_tolerates_tag_soup() {
        let html = "<div>  a \t b <span>c</div><td>d&nbsp;&nbsp;e<!-- hidden --> 1 < 2 <p";
        assert_eq!(extract_text(html).unwrap(), "a b c\nd e 1 < 2 <p");
        assert_eq!(extract_text("<p>one\r\n  two</p>").unwrap(), "one\ntwo");
    }

    #[test]
    fn attribute_with_angle_bracket() {
        assert_eq!(extract_text("<a title='x>y' href=\"u\">link</a>").unwrap(), "link");
    }

    #[test]
    fn empty_output_is_an_error() {
        assert!(matches!(extract_text("<p> </p><script>x</script>"), Err(Error::EmptyDocument)));
        assert!(matches!(extract_text(""), Err(Error::EmptyDocument)));
    }

    fn html_fragment() -> impl Strategy<Value = String> {
        let text = "[A-Za-z0-9 ,.:!?()-]{0,12}";
        let tag = prop::sample::select(vec![
            "<p>", "</p>", "<div>", "</div>", "<li>", "<br/>", "<b>", "</b>", "<span class='x'>",
            "</span>", "<td>", "<h2>", "</h2>", "&amp; ", "&lt; ", "&nbsp;", "\n", "\t",
        ]);
        prop::collection::vec(
            prop_oneof![text.prop_map(String::from), tag.prop_map(String::from)],
            1..30,
        )
        .prop_map(|parts| parts.concat())
    }

    proptest! {
        #[test]
        fn idempotent_on_own_output(html in html_fragment()) {
            if let Ok(once) = extract_text(&html) {
                let twice = extract_text(&once).unwrap();
                prop_assert_eq!(once, twice);
            }
        }
    }
}
