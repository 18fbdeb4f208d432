use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;
use seqcoref::corpus::{self, format_of_path, Format};
use seqcoref::{CorefAnnotation, Document};

use crate::config::Settings;
use crate::CliError;

pub fn data(e: impl std::fmt::Display) -> CliError {
    CliError::Data(e.to_string())
}

fn open(settings: &Settings, path: &Path) -> Result<(File, Format), CliError> {
    let full = settings.input(path);
    let file = File::open(&full).map_err(|e| CliError::Data(format!("{}: {e}", full.display())))?;
    Ok((file, settings.format.unwrap_or_else(|| format_of_path(&full))))
}

pub fn read_corpus(settings: &Settings, path: &Path) -> Result<Vec<(Document, CorefAnnotation)>, CliError> {
    let (file, format) = open(settings, path)?;
    let reader = BufReader::new(file);
    let docs = match format {
        Format::Conll => corpus::read_conll(reader),
        Format::Jsonl => corpus::read_jsonl(reader),
    };
    docs.map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

/// Document text only; any clusters in the file are dropped here.
pub fn read_documents(settings: &Settings, path: &Path) -> Result<Vec<Document>, CliError> {
    Ok(read_corpus(settings, path)?.into_iter().map(|(doc, _)| doc).collect())
}

pub fn read_records<T: DeserializeOwned>(settings: &Settings, path: &Path) -> Result<Vec<T>, CliError> {
    let full = settings.input(path);
    let file = File::open(&full).map_err(|e| CliError::Data(format!("{}: {e}", full.display())))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(data)?;
        if line.trim().is_empty() {
            continue;
        }
        let rec = serde_json::from_str(&line).map_err(|e| CliError::Data(format!("{} line {}: {e}", path.display(), i + 1)))?;
        out.push(rec);
    }
    Ok(out)
}

pub struct Output {
    inner: BufWriter<Box<dyn Write + Send>>,
}

impl Output {
    pub fn open(path: Option<&Path>) -> Result<Self, CliError> {
        let sink: Box<dyn Write + Send> = match path {
            Some(p) => Box::new(File::create(p).map_err(|e| CliError::Data(format!("{}: {e}", p.display())))?),
            None => Box::new(io::stdout()),
        };
        Ok(Output { inner: BufWriter::new(sink) })
    }

    pub fn record(&mut self, rec: &impl Serialize) -> Result<(), CliError> {
        serde_json::to_writer(&mut self.inner, rec).map_err(data)?;
        writeln!(self.inner).map_err(data)
    }

    pub fn annotations(&mut self, docs: &[(Document, CorefAnnotation)], format: Format) -> Result<(), CliError> {
        corpus::write_predictions(&mut self.inner, docs, format).map_err(data)
    }

    pub fn finish(mut self) -> Result<(), CliError> {
        self.inner.flush().map_err(data)
    }
}
