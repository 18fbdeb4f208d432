//! CoNLL-2012 column files.
//!
//! Each token line has the document name, part number, word index and word
//! in columns 1-4, the speaker in column 10 when the line has at least 11
//! columns, and coreference markers in the last column. Documents are
//! delimited by `#begin document` / `#end document` lines and sentences by
//! blank lines.

use std::collections::HashMap;
use std::io::{BufRead, BufReader, Read, Write};

use super::CorpusError;
use crate::model::{CorefAnnotation, Document, Span};

struct Builder {
    key: String,
    sentences: Vec<Vec<String>>,
    current: Vec<String>,
    speakers: Vec<String>,
    open: HashMap<usize, Vec<(usize, usize)>>,
    ids: HashMap<usize, usize>,
    spans: Vec<Span>,
    begin_line: usize,
}

impl Builder {
    fn new(key: String, line: usize) -> Self {
        Builder {
            key,
            sentences: Vec::new(),
            current: Vec::new(),
            speakers: Vec::new(),
            open: HashMap::new(),
            ids: HashMap::new(),
            spans: Vec::new(),
            begin_line: line,
        }
    }

    fn position(&self) -> usize {
        self.sentences.iter().map(Vec::len).sum::<usize>() + self.current.len()
    }

    fn cluster(&mut self, raw: usize) -> usize {
        let next = self.ids.len() + 1;
        *self.ids.entry(raw).or_insert(next)
    }

    fn token(&mut self, cols: &[&str], line: usize) -> Result<(), CorpusError> {
        if cols.len() < 4 {
            return Err(CorpusError::Conll { line, message: format!("expected at least 4 columns, found {}", cols.len()) });
        }
        self.current.push(cols[3].to_string());
        self.speakers.push(if cols.len() >= 11 { cols[9].to_string() } else { "-".to_string() });
        let pos = self.position();
        let field = cols[cols.len() - 1];
        if cols.len() < 5 || field == "-" || field == "_" {
            return Ok(());
        }
        for part in field.split('|') {
            let bad = || CorpusError::Conll { line, message: format!("malformed coreference field `{field}`") };
            let opens = part.starts_with('(');
            let closes = part.ends_with(')');
            let digits = part.trim_start_matches('(').trim_end_matches(')');
            let raw: usize = digits.parse().map_err(|_| bad())?;
            if !opens && !closes {
                return Err(bad());
            }
            if opens && closes {
                let c = self.cluster(raw);
                self.spans.push(Span::new(pos, pos, c));
            } else if opens {
                self.open.entry(raw).or_default().push((pos, line));
            } else {
                let (start, _) = self.open.get_mut(&raw).and_then(Vec::pop).ok_or_else(|| CorpusError::Conll {
                    line,
                    message: format!("cluster {raw} closes without an open mention"),
                })?;
                let c = self.cluster(raw);
                self.spans.push(Span::new(start, pos, c));
            }
        }
        Ok(())
    }

    fn end_sentence(&mut self) {
        if !self.current.is_empty() {
            self.sentences.push(std::mem::take(&mut self.current));
        }
    }

    fn finish(mut self) -> Result<(Document, CorefAnnotation), CorpusError> {
        self.end_sentence();
        if let Some((raw, (_, line))) = self.open.iter().find_map(|(r, v)| v.first().map(|x| (r, *x))) {
            return Err(CorpusError::Conll { line, message: format!("mention of cluster {raw} is never closed") });
        }
        if self.sentences.is_empty() {
            return Err(CorpusError::Conll { line: self.begin_line, message: format!("document `{}` has no tokens", self.key) });
        }
        let mut doc = Document::from_sentences(self.key, self.sentences);
        let mut distinct: Vec<&String> = self.speakers.iter().filter(|s| s.as_str() != "-").collect();
        distinct.dedup();
        if !distinct.is_empty() {
            doc = doc.with_speakers(self.speakers);
        }
        let mut spans = self.spans;
        spans.sort_unstable();
        spans.dedup();
        // keep first-appearance labels, ordered by position for readability
        spans.sort_by_key(|s| (s.start, std::cmp::Reverse(s.end), s.cluster));
        Ok((doc, CorefAnnotation::new(spans)))
    }
}

fn doc_key(header: &str) -> String {
    // `#begin document (name); part 007`
    let rest = header.trim_start_matches("#begin document").trim();
    let (name, part) = match rest.split_once(';') {
        Some((n, p)) => (n.trim(), p.trim().trim_start_matches("part").trim()),
        None => (rest, ""),
    };
    let name = name.trim_start_matches('(').trim_end_matches(')');
    match part.parse::<usize>() {
        Ok(p) => format!("{name}_{p}"),
        Err(_) => name.to_string(),
    }
}

/// Parses every document in a CoNLL-2012 stream.
pub fn read_conll(input: impl Read) -> Result<Vec<(Document, CorefAnnotation)>, CorpusError> {
    let mut out = Vec::new();
    let mut cur: Option<Builder> = None;
    for (i, line) in BufReader::new(input).lines().enumerate() {
        let line = line?;
        let n = i + 1;
        let trimmed = line.trim();
        if trimmed.starts_with("#begin document") {
            if let Some(b) = cur.take() {
                out.push(b.finish()?);
            }
            cur = Some(Builder::new(doc_key(trimmed), n));
        } else if trimmed.starts_with("#end document") {
            match cur.take() {
                Some(b) => out.push(b.finish()?),
                None => return Err(CorpusError::Conll { line: n, message: "#end document without #begin".into() }),
            }
        } else if trimmed.is_empty() {
            if let Some(b) = cur.as_mut() {
                b.end_sentence();
            }
        } else if trimmed.starts_with('#') {
            continue;
        } else {
            let cols: Vec<&str> = trimmed.split_whitespace().collect();
            let b = cur.get_or_insert_with(|| Builder::new(format!("{}_{}", cols[0], cols.get(1).unwrap_or(&"0")), n));
            b.token(&cols, n)?;
        }
    }
    if let Some(b) = cur {
        out.push(b.finish()?);
    }
    Ok(out)
}

pub fn read_conll_str(text: &str) -> Result<Vec<(Document, CorefAnnotation)>, CorpusError> {
    read_conll(text.as_bytes())
}

fn split_key(key: &str) -> (&str, usize) {
    match key.rsplit_once('_') {
        Some((name, part)) if !name.is_empty() => match part.parse() {
            Ok(p) => (name, p),
            Err(_) => (key, 0),
        },
        _ => (key, 0),
    }
}

/// Coreference field for every token: opens (longest first), one-token
/// mentions, then closes (innermost first), joined by `|`.
fn coref_fields(len: usize, ann: &CorefAnnotation) -> Vec<String> {
    let mut opens: Vec<Vec<&Span>> = vec![Vec::new(); len + 1];
    let mut singles: Vec<Vec<&Span>> = vec![Vec::new(); len + 1];
    let mut closes: Vec<Vec<&Span>> = vec![Vec::new(); len + 1];
    for s in &ann.spans {
        if s.start == s.end {
            singles[s.start].push(s);
        } else {
            opens[s.start].push(s);
            closes[s.end].push(s);
        }
    }
    (1..=len)
        .map(|i| {
            opens[i].sort_by_key(|s| (std::cmp::Reverse(s.end), s.cluster));
            singles[i].sort_by_key(|s| s.cluster);
            closes[i].sort_by_key(|s| (std::cmp::Reverse(s.start), s.cluster));
            let parts: Vec<String> = opens[i]
                .iter()
                .map(|s| format!("({}", s.cluster - 1))
                .chain(singles[i].iter().map(|s| format!("({})", s.cluster - 1)))
                .chain(closes[i].iter().map(|s| format!("{})", s.cluster - 1)))
                .collect();
            if parts.is_empty() {
                "-".to_string()
            } else {
                parts.join("|")
            }
        })
        .collect()
}

/// Writes 12-column lines with placeholder linguistic columns.
pub fn write_conll(out: &mut impl Write, docs: &[(Document, CorefAnnotation)]) -> Result<(), CorpusError> {
    for (doc, ann) in docs {
        let (name, part) = split_key(&doc.doc_key);
        writeln!(out, "#begin document ({name}); part {part:03}")?;
        let fields = coref_fields(doc.len(), ann);
        for (si, range) in doc.sentence_bounds.iter().enumerate() {
            for (wi, i) in range.clone().enumerate() {
                let speaker = doc.speakers.as_ref().map_or("-", |s| s[i - 1].as_str());
                writeln!(
                    out,
                    "{name}\t{part}\t{wi}\t{}\t-\t-\t-\t-\t-\t{speaker}\t*\t{}",
                    doc.token(i),
                    fields[i - 1]
                )?;
            }
            if si + 1 <= doc.sentence_bounds.len() {
                writeln!(out)?;
            }
        }
        writeln!(out, "#end document")?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = "#begin document (test/doc); part 000
test/doc 0 0 John NNP - - - - Speaker_A * (0)
test/doc 0 1 saw VBD - - - - Speaker_A * -
test/doc 0 2 his PRP$ - - - - Speaker_A * (1|(0)
test/doc 0 3 dog NN - - - - Speaker_A * 1)

test/doc 0 0 It PRP - - - - Speaker_B * (1)
test/doc 0 1 ran VBD - - - - Speaker_B * -
#end document
";

    #[test]
    fn parses_stacked_markers_and_speakers() {
        let docs = read_conll_str(SAMPLE).unwrap();
        assert_eq!(docs.len(), 1);
        let (doc, ann) = &docs[0];
        assert_eq!(doc.doc_key, "test/doc_0");
        assert_eq!(doc.len(), 6);
        assert_eq!(doc.num_sentences(), 2);
        assert_eq!(doc.speakers.as_ref().unwrap()[4], "Speaker_B");
        let expected = CorefAnnotation::from_clusters(&[vec![(1, 1), (3, 3)], vec![(3, 4), (5, 5)]]);
        assert!(ann.same_clustering(&expected));
        assert_eq!(ann.spans.iter().find(|s| s.bounds() == (1, 1)).unwrap().cluster, 1);
    }

    #[test]
    fn multi_line_mention() {
        let text = "a 0 0 x - - - - - - * (0\na 0 1 y - - - - - - * -\na 0 2 z - - - - - - * 0)\n";
        let docs = read_conll_str(text).unwrap();
        assert_eq!(docs[0].1.spans, vec![Span::new(1, 3, 1)]);
    }

    #[test]
    fn malformed_nesting_reports_line() {
        let text = "#begin document (d); part 000\nd 0 0 x - - - - - - * 3)\n#end document\n";
        match read_conll_str(text) {
            Err(CorpusError::Conll { line, .. }) => assert_eq!(line, 2),
            other => panic!("{other:?}"),
        }
        let text = "#begin document (d); part 000\nd 0 0 x - - - - - - * (3\n#end document\n";
        assert!(matches!(read_conll_str(text), Err(CorpusError::Conll { line: 2, .. })));
    }

    #[test]
    fn write_then_read_is_a_fixpoint() {
        let docs = read_conll_str(SAMPLE).unwrap();
        let mut buf = Vec::new();
        write_conll(&mut buf, &docs).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.contains("(1|(0)"), "{text}");
        let again = read_conll_str(&text).unwrap();
        assert_eq!(again[0].0, docs[0].0);
        assert!(again[0].1.same_clustering(&docs[0].1));
    }

    #[test]
    fn empty_annotation_writes_dashes() {
        let doc = Document::new("d_0", ["a", "b"]);
        let mut buf = Vec::new();
        write_conll(&mut buf, &[(doc, CorefAnnotation::empty())]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let fields: Vec<&str> = text.lines().filter(|l| !l.starts_with('#') && !l.is_empty()).map(|l| l.rsplit('\t').next().unwrap()).collect();
        assert_eq!(fields, vec!["-", "-"]);
    }
}
