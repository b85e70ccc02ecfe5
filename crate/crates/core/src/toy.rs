//! A deterministically instrumented toy target.
//!
//! [`ToyTarget`] is a small recursive-descent parser for a PDF-like grammar:
//! a `%PDF-` header, up to [`MAX_OBJECTS`] indirect objects, and a trailer.
//! Every labeled program point is a basic block with a fixed fake address, so
//! running an input yields the execution path a binary tracer would record.
//! Each parser function starts with an entry block and leaves through an exit
//! block, which gives the trace its function-boundary flags.
//!
//! Because the object loop is capped, the set of feasible paths is finite and
//! [`feasible_inputs`] enumerates one input per path.

use std::collections::BTreeMap;

use crate::trace::{BlockId, ExecutionPath};

/// Objects inspected before the body scanner gives up.
pub const MAX_OBJECTS: usize = 3;

const BASE_ADDRESS: u32 = 0x0040_1000;

macro_rules! sites {
    ($($name:ident => $flag:literal),* $(,)?) => {
        /// Labeled program points of the toy parser.
        #[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
        pub enum Site { $($name),* }

        impl Site {
            pub const ALL: &'static [Site] = &[$(Site::$name),*];

            pub fn label(self) -> &'static str {
                match self { $(Site::$name => stringify!($name)),* }
            }

            fn flag(self) -> char {
                match self { $(Site::$name => $flag),* }
            }
        }
    };
}

sites! {
    MainEntry => 'E', MainReject => 'X', MainExit => 'X',
    HeaderEntry => 'E', HeaderMissing => 'X', HeaderV1 => 'X', HeaderOther => 'X',
    BodyEntry => 'E', BodyObject => '-', BodyEmpty => 'X', BodyDone => 'X',
    BodyUnterminated => 'X', BodyTruncated => 'X',
    ObjEntry => 'E', ObjDict => '-', ObjArray => '-', ObjNumber => '-', ObjString => '-',
    ObjOther => '-', ObjEnd => 'X', ObjUnterminated => 'X',
    DictEntry => 'E', DictCatalog => '-', DictPages => '-', DictPage => '-', DictFont => '-',
    DictPlain => '-', DictStream => '-', DictExit => 'X',
    StreamEntry => 'E', StreamLength => 'X', StreamNoLength => 'X',
    ArrayEntry => 'E', ArrayEmpty => 'X', ArrayRefs => 'X', ArrayItems => 'X',
    TrailerEntry => 'E', TrailerMissing => 'X', TrailerRoot => '-', TrailerNoRoot => 'X',
    TrailerXref => 'X', TrailerNoXref => 'X',
}

impl Site {
    pub fn block(self) -> BlockId {
        let id = BASE_ADDRESS + 0x10 * self as u32;
        BlockId::from_flag_char(id, self.flag()).expect("site flags are valid")
    }
}

/// The instrumented toy parser.
#[derive(Clone, Debug)]
pub struct ToyTarget {
    pub name: String,
    pub block_table: BTreeMap<&'static str, BlockId>,
}

impl Default for ToyTarget {
    fn default() -> Self {
        Self::new()
    }
}

struct Recorder {
    blocks: Vec<BlockId>,
}

impl Recorder {
    fn hit(&mut self, site: Site) {
        self.blocks.push(site.block());
    }
}

impl ToyTarget {
    pub fn new() -> Self {
        let block_table = Site::ALL.iter().map(|&s| (s.label(), s.block())).collect();
        ToyTarget { name: "minipdf".into(), block_table }
    }

    pub fn blocks(&self) -> impl Iterator<Item = BlockId> + '_ {
        self.block_table.values().copied()
    }

    /// Runs the parser on `input` and returns the recorded path.
    pub fn run(&self, input: &[u8]) -> ExecutionPath {
        let mut rec = Recorder { blocks: Vec::with_capacity(64) };
        rec.hit(Site::MainEntry);
        if !parse_header(&mut rec, input) {
            rec.hit(Site::MainReject);
        } else {
            let body_end = parse_body(&mut rec, input);
            parse_trailer(&mut rec, &input[body_end..]);
            rec.hit(Site::MainExit);
        }
        ExecutionPath::new(rec.blocks).expect("toy paths start at the main entry block")
    }
}

/// Convenience wrapper around [`ToyTarget::run`].
pub fn run_toy_target(input: &[u8]) -> ExecutionPath {
    ToyTarget::new().run(input)
}

fn parse_header(rec: &mut Recorder, input: &[u8]) -> bool {
    rec.hit(Site::HeaderEntry);
    match input.strip_prefix(b"%PDF-") {
        None => {
            rec.hit(Site::HeaderMissing);
            false
        }
        Some(rest) if rest.starts_with(b"1.") => {
            rec.hit(Site::HeaderV1);
            true
        }
        Some(_) => {
            rec.hit(Site::HeaderOther);
            true
        }
    }
}

/// Returns the offset where trailer scanning should start.
fn parse_body(rec: &mut Recorder, input: &[u8]) -> usize {
    rec.hit(Site::BodyEntry);
    let mut pos = 0;
    let mut seen = 0;
    loop {
        let Some((_, body_start)) = find_object_header(input, pos) else {
            rec.hit(if seen == 0 { Site::BodyEmpty } else { Site::BodyDone });
            return pos;
        };
        if seen == MAX_OBJECTS {
            rec.hit(Site::BodyTruncated);
            return pos;
        }
        seen += 1;
        rec.hit(Site::BodyObject);
        let next_header = find_object_header(input, body_start).map_or(input.len(), |(s, _)| s);
        match parse_object(rec, &input[body_start..next_header]) {
            Some(consumed) => pos = body_start + consumed,
            None => {
                rec.hit(Site::BodyUnterminated);
                return next_header;
            }
        }
    }
}

/// Returns bytes consumed through `endobj`, or None when the object is unterminated.
fn parse_object(rec: &mut Recorder, region: &[u8]) -> Option<usize> {
    rec.hit(Site::ObjEntry);
    let end = find_token(region, b"endobj", 0);
    let body = &region[..end.unwrap_or(region.len())];
    let trimmed = trim_start(body);
    match trimmed.first() {
        Some(b'<') if trimmed.starts_with(b"<<") => {
            rec.hit(Site::ObjDict);
            parse_dict(rec, trimmed);
        }
        Some(b'[') => {
            rec.hit(Site::ObjArray);
            parse_array(rec, trimmed);
        }
        Some(b'0'..=b'9' | b'+' | b'-' | b'.') => rec.hit(Site::ObjNumber),
        Some(b'(') => rec.hit(Site::ObjString),
        _ => rec.hit(Site::ObjOther),
    }
    match end {
        Some(e) => {
            rec.hit(Site::ObjEnd);
            Some(e + b"endobj".len())
        }
        None => {
            rec.hit(Site::ObjUnterminated);
            None
        }
    }
}

fn parse_dict(rec: &mut Recorder, body: &[u8]) {
    rec.hit(Site::DictEntry);
    let type_name = find_token(body, b"/Type", 0).and_then(|at| next_word(body, at + 5));
    rec.hit(match type_name {
        Some(b"/Catalog") => Site::DictCatalog,
        Some(b"/Pages") => Site::DictPages,
        Some(b"/Page") => Site::DictPage,
        Some(b"/Font") => Site::DictFont,
        _ => Site::DictPlain,
    });
    if let Some(at) = find_token(body, b"stream", 0) {
        rec.hit(Site::DictStream);
        parse_stream(rec, &body[..at]);
    }
    rec.hit(Site::DictExit);
}

fn parse_stream(rec: &mut Recorder, dict: &[u8]) {
    rec.hit(Site::StreamEntry);
    if find_token(dict, b"/Length", 0).is_some() {
        rec.hit(Site::StreamLength);
    } else {
        rec.hit(Site::StreamNoLength);
    }
}

fn parse_array(rec: &mut Recorder, body: &[u8]) {
    rec.hit(Site::ArrayEntry);
    let close = body.iter().position(|&b| b == b']').unwrap_or(body.len());
    let inner = &body[1..close];
    if inner.iter().all(u8::is_ascii_whitespace) {
        rec.hit(Site::ArrayEmpty);
    } else if find_token(inner, b"R", 0).is_some() {
        rec.hit(Site::ArrayRefs);
    } else {
        rec.hit(Site::ArrayItems);
    }
}

fn parse_trailer(rec: &mut Recorder, tail: &[u8]) {
    rec.hit(Site::TrailerEntry);
    let Some(at) = find_token(tail, b"trailer", 0) else {
        rec.hit(Site::TrailerMissing);
        return;
    };
    if find_token(tail, b"/Root", at).is_none() {
        rec.hit(Site::TrailerNoRoot);
        return;
    }
    rec.hit(Site::TrailerRoot);
    if find_token(tail, b"startxref", at).is_some() {
        rec.hit(Site::TrailerXref);
    } else {
        rec.hit(Site::TrailerNoXref);
    }
}

fn is_delimiter(b: u8) -> bool {
    b.is_ascii_whitespace() || b"()<>[]{}/%".contains(&b)
}

fn trim_start(bytes: &[u8]) -> &[u8] {
    let skip = bytes.iter().take_while(|b| b.is_ascii_whitespace()).count();
    &bytes[skip..]
}

/// Finds `word` at a token boundary. Words starting with `/` only need a
/// boundary after them.
fn find_token(hay: &[u8], word: &[u8], from: usize) -> Option<usize> {
    if hay.len() < word.len() {
        return None;
    }
    (from..=hay.len() - word.len()).find(|&i| {
        hay[i..].starts_with(word)
            && (word[0] == b'/' || i == 0 || is_delimiter(hay[i - 1]))
            && hay.get(i + word.len()).is_none_or(|&b| is_delimiter(b))
    })
}

/// The name or word starting at the first non-space byte at or after `from`.
fn next_word(hay: &[u8], from: usize) -> Option<&[u8]> {
    let start = from + hay.get(from..)?.iter().take_while(|b| b.is_ascii_whitespace()).count();
    let first = *hay.get(start)?;
    let len = 1 + hay[start + 1..].iter().take_while(|&&b| !is_delimiter(b)).count();
    (first == b'/' || !is_delimiter(first)).then(|| &hay[start..start + len])
}

/// Finds `<digits> <digits> obj`; returns (header start, body start).
fn find_object_header(input: &[u8], from: usize) -> Option<(usize, usize)> {
    let mut at = from;
    while let Some(rel) = find_token(&input[at..], b"obj", 0) {
        let obj = at + rel;
        if let Some(start) = header_start(input, obj) {
            if start >= from {
                return Some((start, obj + 3));
            }
        }
        at = obj + 3;
    }
    None
}

fn header_start(input: &[u8], obj: usize) -> Option<usize> {
    let digits_before = |end: usize| {
        let n = input[..end].iter().rev().take_while(|b| b.is_ascii_digit()).count();
        (n > 0).then(|| end - n)
    };
    let gen_end = obj.checked_sub(1).filter(|&i| input[i] == b' ')?;
    let gen_start = digits_before(gen_end)?;
    let num_end = gen_start.checked_sub(1).filter(|&i| input[i] == b' ')?;
    digits_before(num_end)
}

/// Object shapes the toy parser distinguishes, used to build enumeration inputs.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ObjectShape {
    Dict { type_name: Option<&'static str>, stream: Option<bool> },
    EmptyArray,
    RefArray,
    ItemArray,
    Number,
    Str,
    Other,
}

impl ObjectShape {
    pub fn all() -> Vec<ObjectShape> {
        let mut shapes = Vec::new();
        for type_name in [Some("/Catalog"), Some("/Pages"), Some("/Page"), Some("/Font"), None] {
            for stream in [None, Some(true), Some(false)] {
                shapes.push(ObjectShape::Dict { type_name, stream });
            }
        }
        shapes.extend([
            ObjectShape::EmptyArray,
            ObjectShape::RefArray,
            ObjectShape::ItemArray,
            ObjectShape::Number,
            ObjectShape::Str,
            ObjectShape::Other,
        ]);
        shapes
    }

    /// A representative object body of this shape.
    pub fn body(&self) -> String {
        match self {
            ObjectShape::Dict { type_name, stream } => {
                let ty = type_name.map(|t| format!(" /Type {t}")).unwrap_or_default();
                match stream {
                    None => format!("<<{ty} /Count 1 >>"),
                    Some(true) => format!("<<{ty} /Length 5 >>\nstream\nhello\nendstream"),
                    Some(false) => format!("<<{ty} >>\nstream\nhello\nendstream"),
                }
            }
            ObjectShape::EmptyArray => "[ ]".into(),
            ObjectShape::RefArray => "[ 1 0 R ]".into(),
            ObjectShape::ItemArray => "[ 0 0 612 792 ]".into(),
            ObjectShape::Number => "42".into(),
            ObjectShape::Str => "(hello)".into(),
            ObjectShape::Other => "null".into(),
        }
    }
}

/// One input per feasible path of the toy target.
///
/// Covers every header variant, every object-shape sequence up to
/// [`MAX_OBJECTS`] (with an optional unterminated last object or an extra
/// object past the cap), and every trailer variant.
pub fn feasible_inputs() -> Vec<Vec<u8>> {
    let shapes = ObjectShape::all();
    let mut sequences: Vec<(Vec<ObjectShape>, bool, bool)> = Vec::new();
    let mut prefixes: Vec<Vec<ObjectShape>> = vec![Vec::new()];
    for depth in 0..=MAX_OBJECTS {
        let mut next = Vec::new();
        for prefix in &prefixes {
            sequences.push((prefix.clone(), false, false));
            if depth == MAX_OBJECTS {
                sequences.push((prefix.clone(), false, true));
                continue;
            }
            for &shape in &shapes {
                let mut seq = prefix.clone();
                seq.push(shape);
                sequences.push((seq.clone(), true, false));
                next.push(seq);
            }
        }
        prefixes = next;
    }

    let trailers: [&str; 4] = [
        "",
        "trailer\n<< /Size 4 >>\n",
        "trailer\n<< /Root 1 0 R >>\n",
        "trailer\n<< /Root 1 0 R >>\nstartxref\n9\n%%EOF\n",
    ];
    let mut inputs = vec![b"not a pdf".to_vec()];
    for header in ["%PDF-1.4\n", "%PDF-2.0\n"] {
        for (seq, unterminated_last, extra) in &sequences {
            let mut body = String::new();
            for (i, shape) in seq.iter().enumerate() {
                body.push_str(&format!("{} 0 obj\n{}\n", i + 1, shape.body()));
                if !(*unterminated_last && i + 1 == seq.len()) {
                    body.push_str("endobj\n");
                }
            }
            if *extra {
                body.push_str(&format!("{} 0 obj\nnull\nendobj\n", seq.len() + 1));
            }
            for trailer in trailers {
                inputs.push(format!("{header}{body}{trailer}").into_bytes());
            }
        }
    }
    inputs
}
