//! PDF indirect-object extraction and assembly.
//!
//! [`extract_objects`] scans raw bytes linearly for `n g obj ... endobj`
//! without consulting the cross-reference table, so damaged files still
//! yield whatever objects are recoverable. [`assemble_pdf`] goes the other
//! way: it numbers object bodies densely, writes a classic cross-reference
//! table with exact byte offsets, and finishes with a trailer.

use std::fmt::Write as _;

use thiserror::Error;

pub const HEADER: &[u8] = b"%PDF-1.4\n";

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PdfError {
    #[error("cannot assemble a document without objects")]
    NoObjects,
    #[error("root index {index} out of range for {len} objects")]
    RootIndex { index: usize, len: usize },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PdfObject {
    pub obj_number: u32,
    pub generation: u32,
    /// Bytes between the object header and `endobj`, minus one separating
    /// end-of-line (or space) on each side.
    pub body: Vec<u8>,
    /// Byte offset of the object header.
    pub offset: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Extraction {
    pub objects: Vec<PdfObject>,
    /// Objects dropped because no terminator was found.
    pub unterminated: usize,
}

pub fn is_whitespace(b: u8) -> bool {
    matches!(b, b'\0' | b'\t' | b'\n' | b'\x0c' | b'\r' | b' ')
}

pub fn is_delimiter(b: u8) -> bool {
    matches!(b, b'(' | b')' | b'<' | b'>' | b'[' | b']' | b'{' | b'}' | b'/' | b'%')
}

fn is_regular(b: u8) -> bool {
    !is_whitespace(b) && !is_delimiter(b)
}

/// End of a literal string starting at `start` (which holds `(`), exclusive.
fn literal_string_end(bytes: &[u8], start: usize) -> usize {
    let mut depth = 0usize;
    let mut i = start;
    while i < bytes.len() {
        match bytes[i] {
            b'\\' => i += 1,
            b'(' => depth += 1,
            b')' => {
                depth -= 1;
                if depth == 0 {
                    return i + 1;
                }
            }
            _ => {}
        }
        i += 1;
    }
    bytes.len()
}

/// Splits PDF content into lexical tokens: delimiters (`<<`, `>>`, `[`,
/// `]`, `{`, `}`), names, literal and hex strings, and runs of regular
/// characters (numbers and keywords). Whitespace and comments are dropped.
pub fn lex(bytes: &[u8]) -> Vec<&[u8]> {
    let mut tokens = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let b = bytes[i];
        let end = match b {
            _ if is_whitespace(b) => {
                i += 1;
                continue;
            }
            b'%' => {
                while i < bytes.len() && bytes[i] != b'\n' && bytes[i] != b'\r' {
                    i += 1;
                }
                continue;
            }
            b'<' | b'>' if bytes.get(i + 1) == Some(&b) => i + 2,
            b'<' => bytes[i..].iter().position(|&c| c == b'>').map_or(bytes.len(), |p| i + p + 1),
            b'(' => literal_string_end(bytes, i),
            b'/' => i + 1 + bytes[i + 1..].iter().take_while(|&&c| is_regular(c)).count(),
            _ if is_delimiter(b) => i + 1,
            _ => i + bytes[i..].iter().take_while(|&&c| is_regular(c)).count(),
        };
        tokens.push(&bytes[i..end]);
        i = end;
    }
    tokens
}

/// Whether `word` occurs at `at` with token boundaries on both sides.
fn keyword_at(bytes: &[u8], at: usize, word: &[u8]) -> bool {
    bytes[at..].starts_with(word)
        && (at == 0 || !is_regular(bytes[at - 1]))
        && bytes.get(at + word.len()).is_none_or(|&b| !is_regular(b))
}

fn parse_uint(digits: &[u8]) -> Option<u32> {
    if digits.is_empty() || digits.len() > 10 || !digits.iter().all(u8::is_ascii_digit) {
        return None;
    }
    std::str::from_utf8(digits).ok()?.parse().ok()
}

/// If `obj_at` is the `obj` keyword of a `n g obj` header, returns
/// (header start, object number, generation).
fn header_before(bytes: &[u8], obj_at: usize) -> Option<(usize, u32, u32)> {
    let mut i = obj_at;
    let skip_ws = |i: &mut usize| {
        let start = *i;
        while *i > 0 && is_whitespace(bytes[*i - 1]) {
            *i -= 1;
        }
        *i < start
    };
    let digits = |i: &mut usize| {
        let end = *i;
        while *i > 0 && bytes[*i - 1].is_ascii_digit() && end - *i < 11 {
            *i -= 1;
        }
        (*i < end).then(|| &bytes[*i..end])
    };
    if !skip_ws(&mut i) {
        return None;
    }
    let generation = parse_uint(digits(&mut i)?)?;
    if !skip_ws(&mut i) {
        return None;
    }
    let number = parse_uint(digits(&mut i)?)?;
    if number == 0 || (i > 0 && is_regular(bytes[i - 1])) {
        return None;
    }
    Some((i, number, generation))
}

fn skip_eol(bytes: &[u8], at: usize) -> usize {
    if bytes[at..].starts_with(b"\r\n") {
        at + 2
    } else if matches!(bytes.get(at), Some(b'\n' | b'\r')) {
        at + 1
    } else {
        at
    }
}

/// `/Length <int>` (direct value only) in a stream dictionary.
fn direct_length(dict: &[u8]) -> Option<usize> {
    let tokens = lex(dict);
    let at = tokens.iter().position(|t| *t == b"/Length")?;
    let value = tokens.get(at + 1)?;
    let indirect = tokens.get(at + 3) == Some(&&b"R"[..]);
    if indirect {
        return None;
    }
    parse_uint(value).map(|v| v as usize)
}

enum BodyEnd {
    /// Offset of `endobj`.
    Terminated(usize),
    /// Another object header starts at this offset first.
    Interrupted(usize),
    Eof,
}

/// Scans an object body for its terminator, skipping strings, comments, and
/// stream payloads.
fn scan_body(bytes: &[u8], start: usize) -> BodyEnd {
    let mut i = start;
    while i < bytes.len() {
        match bytes[i] {
            b'(' => i = literal_string_end(bytes, i),
            b'%' => {
                while i < bytes.len() && bytes[i] != b'\n' && bytes[i] != b'\r' {
                    i += 1;
                }
            }
            b'e' if keyword_at(bytes, i, b"endobj") => return BodyEnd::Terminated(i),
            b'o' if keyword_at(bytes, i, b"obj") => match header_before(bytes, i) {
                Some((h, _, _)) if h >= start => return BodyEnd::Interrupted(h),
                _ => i += 3,
            },
            b's' if keyword_at(bytes, i, b"stream") => {
                let data = skip_eol(bytes, i + 6);
                if data == i + 6 {
                    // Not followed by an end-of-line, so not a stream keyword.
                    i += 6;
                    continue;
                }
                let by_length = direct_length(&bytes[start..i]).and_then(|len| {
                    let after = data.checked_add(len).filter(|&a| a <= bytes.len())?;
                    let mut k = after;
                    while k < bytes.len() && is_whitespace(bytes[k]) {
                        k += 1;
                    }
                    bytes[k..].starts_with(b"endstream").then_some(k + 9)
                });
                i = match by_length {
                    Some(end) => end,
                    None => match find_keyword(bytes, data, b"endstream") {
                        Some(at) => at + 9,
                        None => return BodyEnd::Eof,
                    },
                };
            }
            _ => i += 1,
        }
    }
    BodyEnd::Eof
}

fn find_keyword(bytes: &[u8], from: usize, word: &[u8]) -> Option<usize> {
    (from..bytes.len()).find(|&i| bytes[i] == word[0] && keyword_at(bytes, i, word))
}

fn find_header(bytes: &[u8], from: usize) -> Option<(usize, u32, u32, usize)> {
    let mut at = from;
    while let Some(obj) = find_keyword(bytes, at, b"obj") {
        if let Some((h, n, g)) = header_before(bytes, obj) {
            if h >= from {
                return Some((h, n, g, obj + 3));
            }
        }
        at = obj + 3;
    }
    None
}

fn trim_separator(body: &[u8]) -> &[u8] {
    let body = if body.starts_with(b"\r\n") {
        &body[2..]
    } else if matches!(body.first(), Some(b'\n' | b'\r' | b' ')) {
        &body[1..]
    } else {
        body
    };
    if body.ends_with(b"\r\n") {
        &body[..body.len() - 2]
    } else if matches!(body.last(), Some(b'\n' | b'\r' | b' ')) {
        &body[..body.len() - 1]
    } else {
        body
    }
}

/// Recovers indirect objects in file order. Never fails.
pub fn extract_objects(bytes: &[u8]) -> Extraction {
    let mut out = Extraction::default();
    let mut pos = 0;
    while let Some((header, number, generation, body_start)) = find_header(bytes, pos) {
        match scan_body(bytes, body_start) {
            BodyEnd::Terminated(end) => {
                out.objects.push(PdfObject {
                    obj_number: number,
                    generation,
                    body: trim_separator(&bytes[body_start..end]).to_vec(),
                    offset: header,
                });
                pos = end + 6;
            }
            BodyEnd::Interrupted(next) => {
                out.unterminated += 1;
                pos = next;
            }
            BodyEnd::Eof => {
                out.unterminated += 1;
                break;
            }
        }
    }
    out
}

/// Index of the first body that declares `/Type /Catalog`, else 0.
pub fn select_root<B: AsRef<[u8]>>(bodies: &[B]) -> usize {
    bodies
        .iter()
        .position(|b| lex(b.as_ref()).windows(2).any(|w| w[0] == b"/Type" && w[1] == b"/Catalog"))
        .unwrap_or(0)
}

/// Writes a complete PDF 1.4 file: header, objects numbered `1..=n` in
/// order, cross-reference table, trailer, and `startxref`.
pub fn assemble_pdf<B: AsRef<[u8]>>(bodies: &[B], root_index: usize) -> Result<Vec<u8>, PdfError> {
    if bodies.is_empty() {
        return Err(PdfError::NoObjects);
    }
    if root_index >= bodies.len() {
        return Err(PdfError::RootIndex { index: root_index, len: bodies.len() });
    }
    let mut out = HEADER.to_vec();
    let mut offsets = Vec::with_capacity(bodies.len());
    for (i, body) in bodies.iter().enumerate() {
        offsets.push(out.len());
        out.extend_from_slice(format!("{} 0 obj\n", i + 1).as_bytes());
        out.extend_from_slice(body.as_ref());
        out.extend_from_slice(b"\nendobj\n");
    }
    let xref_at = out.len();
    let mut tail = format!("xref\n0 {}\n0000000000 65535 f \n", bodies.len() + 1);
    for off in offsets {
        let _ = write!(tail, "{off:010} 00000 n \n");
    }
    let _ = write!(
        tail,
        "trailer\n<< /Size {} /Root {} 0 R >>\nstartxref\n{xref_at}\n%%EOF\n",
        bodies.len() + 1,
        root_index + 1
    );
    out.extend_from_slice(tail.as_bytes());
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct WellFormed {
    pub ok: bool,
    /// `WF:<check>:<pass|fail>:<detail>` lines.
    pub diagnostics: Vec<String>,
}

struct XrefEntry {
    number: u32,
    offset: usize,
    generation: u32,
}

/// Parses the table at `at`; returns its in-use entries and `at`.
fn parse_xref(bytes: &[u8], at: usize) -> Result<(Vec<XrefEntry>, usize), String> {
    if !keyword_at(bytes, at, b"xref") {
        return Err(format!("startxref offset {at} does not point at `xref`"));
    }
    let text = &bytes[at + 4..];
    let mut lines = text.split(|&b| b == b'\n').map(|l| l.strip_suffix(b"\r").unwrap_or(l));
    let mut entries = Vec::new();
    // Rest of the `xref` line.
    lines.next();
    loop {
        let Some(line) = lines.next() else { break };
        let fields: Vec<&[u8]> = line.split(|&b| b == b' ').filter(|f| !f.is_empty()).collect();
        if fields.first() == Some(&&b"trailer"[..]) || fields.is_empty() {
            break;
        }
        let [first, count] = fields[..] else {
            return Err("malformed subsection header".into());
        };
        let (Some(first), Some(count)) = (parse_uint(first), parse_uint(count)) else {
            return Err("malformed subsection header".into());
        };
        for k in 0..count {
            let entry = lines.next().ok_or("xref table truncated")?;
            let fields: Vec<&[u8]> = entry.split(|&b| b == b' ').filter(|f| !f.is_empty()).collect();
            let [offset, generation, kind] = fields[..] else {
                return Err(format!("malformed entry for object {}", first + k));
            };
            let offset = parse_uint(offset).ok_or("bad offset")? as usize;
            let generation = parse_uint(generation).ok_or("bad generation")?;
            if kind == b"n" {
                entries.push(XrefEntry { number: first + k, offset, generation });
            }
        }
    }
    Ok((entries, at))
}

/// Root object number named by the trailer after `from`.
fn trailer_root(bytes: &[u8], from: usize) -> Option<u32> {
    let at = find_keyword(bytes, from, b"trailer")?;
    let tokens = lex(&bytes[at + 7..]);
    let pos = tokens.iter().position(|t| *t == b"/Root")?;
    match tokens.get(pos + 1..pos + 4)? {
        [n, _, r] if *r == b"R" => parse_uint(n),
        _ => None,
    }
}

/// Validates the structure of a generated file: header, at least one
/// object, exact cross-reference offsets, and a resolvable trailer `/Root`.
pub fn is_well_formed(bytes: &[u8]) -> WellFormed {
    let mut diagnostics = Vec::new();
    let mut ok = true;
    let mut record = |check: &str, pass: bool, detail: String| {
        ok &= pass;
        diagnostics.push(format!("WF:{check}:{}:{detail}", if pass { "pass" } else { "fail" }));
    };

    let header = bytes.starts_with(b"%PDF-");
    record("header", header, if header { "%PDF- present".into() } else { "missing %PDF-".into() });

    let extraction = extract_objects(bytes);
    let count = extraction.objects.len();
    record("objects", count > 0, format!("{count} extracted"));

    let startxref = (0..bytes.len().saturating_sub(8))
        .rev()
        .find(|&i| keyword_at(bytes, i, b"startxref"));
    let xref = startxref
        .ok_or_else(|| "no startxref".to_string())
        .and_then(|at| {
            let tokens = lex(&bytes[at + 9..]);
            let offset = tokens.first().and_then(|t| parse_uint(t)).ok_or("bad startxref value")?;
            parse_xref(bytes, offset as usize)
        });
    let mut xref_at = 0;
    match xref {
        Err(detail) => record("xref", false, detail),
        Ok((entries, at)) => {
            xref_at = at;
            let bad: Vec<String> = entries
                .iter()
                .filter(|e| {
                    let expected = format!("{} {} obj", e.number, e.generation);
                    !bytes.get(e.offset..).is_some_and(|b| b.starts_with(expected.as_bytes()))
                })
                .map(|e| format!("object {} offset {}", e.number, e.offset))
                .collect();
            if entries.is_empty() {
                record("xref", false, "no in-use entries".into());
            } else if bad.is_empty() {
                record("xref", true, format!("{} offsets exact", entries.len()));
            } else {
                record("xref", false, format!("wrong offsets: {}", bad.join(", ")));
            }
        }
    }

    match trailer_root(bytes, xref_at) {
        Some(root) if extraction.objects.iter().any(|o| o.obj_number == root) => {
            record("root", true, format!("object {root}"))
        }
        Some(root) => record("root", false, format!("object {root} not found")),
        None => record("root", false, "trailer has no /Root reference".into()),
    }
    WellFormed { ok, diagnostics }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &[u8] = b"%PDF-1.4\n\
1 0 obj\n<< /Type /Catalog /Pages 2 0 R >>\nendobj\n\
2 0 obj\n<< /Type /Pages /Kids [3 0 R] /Count 1 >>\nendobj\n\
3 0 obj\n<< /Type /Page /Parent 2 0 R /MediaBox [0 0 612 792] /Contents 4 0 R >>\nendobj\n\
4 0 obj\n<< /Length 44 >>\nstream\nBT /F1 24 Tf 100 700 Td (endobj) Tj ET endobj\nendstream\nendobj\n\
trailer\n<< /Root 1 0 R >>\n%%EOF\n";

    #[test]
    fn extracts_hand_written_file() {
        let ex = extract_objects(MINIMAL);
        assert_eq!(ex.unterminated, 0);
        let numbers: Vec<u32> = ex.objects.iter().map(|o| o.obj_number).collect();
        assert_eq!(numbers, [1, 2, 3, 4]);
        assert_eq!(ex.objects[0].body, b"<< /Type /Catalog /Pages 2 0 R >>");
        assert!(ex.objects[3].body.ends_with(b"endobj\nendstream"));
        assert_eq!(ex.objects[1].offset, 58);
    }

    #[test]
    fn stream_without_length_uses_endstream() {
        let bytes = b"1 0 obj\n<< >>\nstream\nxx endobj yy\nendstream\nendobj\n";
        let ex = extract_objects(bytes);
        assert_eq!(ex.objects.len(), 1);
        assert_eq!(ex.objects[0].body, b"<< >>\nstream\nxx endobj yy\nendstream");
    }

    #[test]
    fn empty_and_unterminated() {
        assert_eq!(extract_objects(b""), Extraction::default());
        let ex = extract_objects(b"%PDF-1.4\n1 0 obj\n<< /A 1 >>\n");
        assert!(ex.objects.is_empty());
        assert_eq!(ex.unterminated, 1);
    }

    #[test]
    fn recovers_after_unterminated_object() {
        let ex = extract_objects(b"1 0 obj\n<< /A 1 >>\n2 0 obj\n42\nendobj\n");
        assert_eq!(ex.unterminated, 1);
        assert_eq!(ex.objects.len(), 1);
        assert_eq!(ex.objects[0].obj_number, 2);
        assert_eq!(ex.objects[0].body, b"42");
    }

    #[test]
    fn strings_hide_keywords() {
        let ex = extract_objects(b"1 0 obj\n(a \\) endobj 2 0 obj)\nendobj\n");
        assert_eq!(ex.objects.len(), 1);
        assert_eq!(ex.objects[0].body, b"(a \\) endobj 2 0 obj)");
    }

    #[test]
    fn xref_offset_of_single_catalog() {
        let pdf = assemble_pdf(&[b"<< /Type /Catalog >>"], 0).unwrap();
        // "%PDF-1.4\n" is 9 bytes, so object 1 starts at offset 9.
        let text = String::from_utf8(pdf.clone()).unwrap();
        assert!(text.contains("0000000000 65535 f \n0000000009 00000 n \n"));
        assert_eq!(&pdf[9..16], b"1 0 obj");
        assert!(text.contains("trailer\n<< /Size 2 /Root 1 0 R >>"));
        // Object spans 9 + "1 0 obj\n" (8) + 20 + "\nendobj\n" (8) = 45.
        assert!(text.ends_with("startxref\n45\n%%EOF\n"));
    }

    #[test]
    fn root_reference_uses_index() {
        let pdf = assemble_pdf(&[&b"1"[..], b"<< /Type /Catalog >>"], 1).unwrap();
        assert!(String::from_utf8(pdf).unwrap().contains("/Root 2 0 R"));
        assert_eq!(assemble_pdf::<&[u8]>(&[], 0), Err(PdfError::NoObjects));
        assert_eq!(assemble_pdf(&[b"1"], 1), Err(PdfError::RootIndex { index: 1, len: 1 }));
    }

    #[test]
    fn root_selection() {
        assert_eq!(select_root(&[&b"42"[..], b"<</Type/Catalog>>"]), 1);
        assert_eq!(select_root(&[&b"42"[..], b"<< /Type /Page >>"]), 0);
    }

    #[test]
    fn assembled_output_is_well_formed() {
        let bodies = [&b"<< /Type /Catalog /Pages 2 0 R >>"[..], b"<< /Type /Pages /Count 0 >>"];
        let pdf = assemble_pdf(&bodies, 0).unwrap();
        let wf = is_well_formed(&pdf);
        assert!(wf.ok, "{:?}", wf.diagnostics);
        assert_eq!(wf.diagnostics.len(), 4);
        assert!(wf.diagnostics.iter().all(|d| d.starts_with("WF:") && d.contains(":pass:")));
        let ex = extract_objects(&pdf);
        let back: Vec<&[u8]> = ex.objects.iter().map(|o| &o.body[..]).collect();
        assert_eq!(back, bodies);
    }

    #[test]
    fn perturbed_offset_is_caught() {
        let pdf = assemble_pdf(&[&b"<< /Type /Catalog >>"[..], b"42"], 0).unwrap();
        let text = String::from_utf8(pdf).unwrap();
        let broken = text.replacen("0000000009 00000 n", "0000000010 00000 n", 1);
        let wf = is_well_formed(broken.as_bytes());
        assert!(!wf.ok);
        assert!(wf.diagnostics.iter().any(|d| d.starts_with("WF:xref:fail:") && d.contains("object 1 ")));
    }

    #[test]
    fn empty_file_is_not_well_formed() {
        let wf = is_well_formed(b"");
        assert!(!wf.ok);
        assert!(wf.diagnostics.iter().any(|d| d == "WF:header:fail:missing %PDF-"));
    }

    #[test]
    fn lexer_splits_on_delimiters() {
        let tokens = lex(b"<</Type/Catalog/Kids[1 0 R]/T(a (b) c)/H<0aff>>> % note\nnull");
        let expected: [&[u8]; 14] = [
            b"<<", b"/Type", b"/Catalog", b"/Kids", b"[", b"1", b"0", b"R", b"]", b"/T",
            b"(a (b) c)", b"/H", b"<0aff>", b">>",
        ];
        assert_eq!(&tokens[..14], &expected);
        assert_eq!(tokens[14], b"null");
    }
}
