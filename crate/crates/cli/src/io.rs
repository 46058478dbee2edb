//! File formats and atomic output.

use std::collections::BTreeSet;
use std::fs::File;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::{Path, PathBuf};

use acoso_core::checkpoint::{self, CheckpointError};
use acoso_core::corpus::{parse_stopwords, CorpusError, KeywordSet, Label, LabeledText, Polarity};
use acoso_core::embeddings::{EmbeddingError, WordVectorParser, WordVectorStore};
use acoso_core::eval::{Checkpoint, CrossValReport};
use acoso_core::vocab::{VocabError, Vocabulary};
use acoso_core::zipf::PlotRow;
use thiserror::Error;

pub const CORPUS_HEADER: [&str; 3] = ["id", "label", "text"];
pub const TABLE3_HEADER: [&str; 4] = ["iteration", "selected_epoch", "accuracy", "loss"];
pub const TABLE4_HEADER: [&str; 3] = ["iteration", "success_pct", "fail_pct"];
pub const ZIPF_HEADER: [&str; 4] = ["rank", "token", "observed_count", "zipf_expected_count"];
pub const CHECKPOINT_INDEX_HEADER: [&str; 5] = ["iteration", "epoch", "accuracy", "loss", "file"];

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
    #[error("{path}: row {row}: {reason}")]
    Row { path: PathBuf, row: u64, reason: String },
    #[error("{path}")]
    Corpus {
        path: PathBuf,
        #[source]
        source: CorpusError,
    },
    #[error("{path}")]
    Vocab {
        path: PathBuf,
        #[source]
        source: VocabError,
    },
    #[error("{path}")]
    Embedding {
        path: PathBuf,
        #[source]
        source: EmbeddingError,
    },
    #[error("{path}")]
    Checkpoint {
        path: PathBuf,
        #[source]
        source: CheckpointError,
    },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn csv_err(path: &Path) -> impl FnOnce(csv::Error) -> Error + '_ {
    move |source| Error::Csv {
        path: path.to_path_buf(),
        source,
    }
}

pub fn read_to_string(path: &Path) -> Result<String, Error> {
    std::fs::read_to_string(path).map_err(io_err(path))
}

/// Writes `bytes` to a temporary file next to `path` and renames it into
/// place, so readers never observe a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), Error> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io_err(path))?;
    tmp.write_all(bytes).map_err(io_err(path))?;
    tmp.as_file().sync_all().map_err(io_err(path))?;
    tmp.persist(path).map_err(|e| io_err(path)(e.error))?;
    Ok(())
}

pub fn create_dir_all(path: &Path) -> Result<(), Error> {
    std::fs::create_dir_all(path).map_err(io_err(path))
}

fn csv_bytes(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<Vec<u8>, Error> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).map_err(csv_err(path))?;
    for row in rows {
        w.write_record(row).map_err(csv_err(path))?;
    }
    w.into_inner().map_err(|e| io_err(path)(e.into_error()))
}

/// Parses a `id,label,text` corpus. The header row is required; labels are
/// 0 or 1; ids must be unique.
pub fn parse_corpus<R: Read>(path: &Path, reader: R) -> Result<Vec<LabeledText>, Error> {
    let mut rdr = csv::ReaderBuilder::new().flexible(true).from_reader(reader);
    let header = rdr.headers().map_err(csv_err(path))?.clone();
    if header.iter().map(str::trim).ne(CORPUS_HEADER) {
        return Err(Error::Row {
            path: path.to_path_buf(),
            row: 1,
            reason: format!("expected header `id,label,text`, found `{}`", header.iter().collect::<Vec<_>>().join(",")),
        });
    }
    let mut out = Vec::new();
    let mut seen = std::collections::HashMap::new();
    for rec in rdr.records() {
        let rec = rec.map_err(csv_err(path))?;
        let row = rec.position().map_or(0, |p| p.line());
        let bad = |reason: String| Error::Row {
            path: path.to_path_buf(),
            row,
            reason,
        };
        if rec.len() != 3 {
            return Err(bad(format!("expected 3 columns, found {}", rec.len())));
        }
        let id = rec[0].trim();
        if id.is_empty() {
            return Err(bad("empty id".into()));
        }
        let label = rec[1]
            .trim()
            .parse::<i64>()
            .map_err(|_| CorpusError::InvalidLabel(-1))
            .and_then(Label::try_from)
            .map_err(|_| bad(format!("label must be 0 or 1, found `{}`", &rec[1])))?;
        if let Some(first) = seen.insert(id.to_string(), row) {
            return Err(bad(format!("duplicate id `{id}` (first seen on row {first})")));
        }
        out.push(LabeledText::new(id, &rec[2], label));
    }
    Ok(out)
}

pub fn read_corpus(path: &Path) -> Result<Vec<LabeledText>, Error> {
    let file = File::open(path).map_err(io_err(path))?;
    parse_corpus(path, BufReader::new(file))
}

pub fn corpus_csv(corpus: &[LabeledText]) -> Result<Vec<u8>, Error> {
    let rows: Vec<Vec<String>> = corpus
        .iter()
        .map(|r| vec![r.id.clone(), r.label.as_u8().to_string(), r.text.clone()])
        .collect();
    csv_bytes(Path::new("<corpus>"), &CORPUS_HEADER, &rows)
}

/// Like [`corpus_csv`] with the third column named `tokens`; each text is
/// expected to hold space-separated tokens.
pub fn tokens_csv(corpus: &[LabeledText]) -> Result<Vec<u8>, Error> {
    let rows: Vec<Vec<String>> = corpus
        .iter()
        .map(|r| vec![r.id.clone(), r.label.as_u8().to_string(), r.text.clone()])
        .collect();
    csv_bytes(Path::new("<tokens>"), &["id", "label", "tokens"], &rows)
}

pub fn write_corpus(path: &Path, corpus: &[LabeledText]) -> Result<(), Error> {
    write_atomic(path, &corpus_csv(corpus)?)
}

pub fn read_keywords(path: &Path, polarity: Polarity) -> Result<KeywordSet, Error> {
    KeywordSet::parse(&read_to_string(path)?, polarity).map_err(|source| Error::Corpus {
        path: path.to_path_buf(),
        source,
    })
}

pub fn read_stopwords(path: &Path) -> Result<BTreeSet<String>, Error> {
    parse_stopwords(&read_to_string(path)?).map_err(|source| Error::Corpus {
        path: path.to_path_buf(),
        source,
    })
}

pub fn read_vocabulary(path: &Path) -> Result<Vocabulary, Error> {
    Vocabulary::from_tsv(&read_to_string(path)?).map_err(|source| Error::Vocab {
        path: path.to_path_buf(),
        source,
    })
}

pub fn write_vocabulary(path: &Path, vocab: &Vocabulary) -> Result<(), Error> {
    write_atomic(path, vocab.to_tsv().as_bytes())
}

/// Dimension of a word2vec text file: the header's second field if line 1
/// is a header, otherwise the number of components on the first line.
pub fn detect_dim(path: &Path) -> Result<usize, Error> {
    let file = File::open(path).map_err(io_err(path))?;
    let mut first = String::new();
    BufReader::new(file).read_line(&mut first).map_err(io_err(path))?;
    let fields: Vec<&str> = first.split_ascii_whitespace().collect();
    let empty = || Error::Embedding {
        path: path.to_path_buf(),
        source: EmbeddingError::Empty,
    };
    match fields.as_slice() {
        [] | [_] => Err(empty()),
        [count, dim] if count.parse::<u64>().is_ok() => dim.parse::<usize>().map_err(|_| empty()),
        [_, rest @ ..] => Ok(rest.len()),
    }
}

/// Streams a word2vec text file line by line. With `keep`, only vectors
/// for those tokens are retained (every line is still validated).
pub fn load_word_vectors(path: &Path, dim: usize, keep: Option<BTreeSet<String>>) -> Result<WordVectorStore, Error> {
    let emb_err = |source| Error::Embedding {
        path: path.to_path_buf(),
        source,
    };
    let mut parser = WordVectorParser::new(dim).map_err(emb_err)?;
    if let Some(keep) = keep {
        parser = parser.with_filter(keep);
    }
    let file = File::open(path).map_err(io_err(path))?;
    for line in BufReader::new(file).lines() {
        parser.push_line(&line.map_err(io_err(path))?).map_err(emb_err)?;
    }
    parser.finish().map_err(emb_err)
}

pub fn write_word_vectors(path: &Path, store: &WordVectorStore) -> Result<(), Error> {
    write_atomic(path, store.to_word2vec_text().as_bytes())
}

pub fn zipf_csv(rows: &[PlotRow]) -> Result<Vec<u8>, Error> {
    let rows: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                r.rank.to_string(),
                r.token.clone(),
                r.observed_count.to_string(),
                format!("{:.4}", r.zipf_expected_count),
            ]
        })
        .collect();
    csv_bytes(Path::new("<zipf>"), &ZIPF_HEADER, &rows)
}

pub fn save_checkpoint(path: &Path, cp: &Checkpoint) -> Result<(), Error> {
    write_atomic(path, &checkpoint::encode(cp))
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint, Error> {
    let bytes = std::fs::read(path).map_err(io_err(path))?;
    checkpoint::decode(&bytes).map_err(|source| Error::Checkpoint {
        path: path.to_path_buf(),
        source,
    })
}

/// Per-iteration selected checkpoint: accuracy as a percentage, loss as the
/// mean training cross-entropy.
pub fn table3_csv(report: &CrossValReport) -> Result<Vec<u8>, Error> {
    let rows: Vec<Vec<String>> = report
        .per_iteration
        .iter()
        .map(|r| {
            vec![
                r.iteration.to_string(),
                r.selected_epoch.to_string(),
                format!("{:.2}", r.selected_accuracy * 100.0),
                r.selected_loss.to_string(),
            ]
        })
        .collect();
    csv_bytes(Path::new("<table3>"), &TABLE3_HEADER, &rows)
}

/// Per-iteration test success/failure plus an `average` row.
pub fn table4_csv(report: &CrossValReport) -> Result<Vec<u8>, Error> {
    let mut rows: Vec<Vec<String>> = report
        .per_iteration
        .iter()
        .map(|r| {
            vec![
                r.iteration.to_string(),
                format!("{:.2}", r.test.success_pct),
                format!("{:.2}", r.test.fail_pct),
            ]
        })
        .collect();
    rows.push(vec![
        "average".into(),
        format!("{:.2}", report.average_success_pct),
        format!("{:.2}", report.average_fail_pct()),
    ]);
    csv_bytes(Path::new("<table4>"), &TABLE4_HEADER, &rows)
}

pub fn checkpoint_file_name(iteration: usize, epoch: usize) -> String {
    format!("iteration-{iteration}-epoch-{epoch}.ckpt")
}

pub fn checkpoint_index_csv(checkpoints: &[Checkpoint]) -> Result<Vec<u8>, Error> {
    let rows: Vec<Vec<String>> = checkpoints
        .iter()
        .map(|c| {
            vec![
                c.iteration.to_string(),
                c.epoch.to_string(),
                format!("{:.4}", c.train_accuracy * 100.0),
                c.train_loss.to_string(),
                checkpoint_file_name(c.iteration, c.epoch),
            ]
        })
        .collect();
    csv_bytes(Path::new("<checkpoints>"), &CHECKPOINT_INDEX_HEADER, &rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<Vec<LabeledText>, Error> {
        parse_corpus(Path::new("c.csv"), text.as_bytes())
    }

    fn row_of(e: Error) -> u64 {
        match e {
            Error::Row { row, .. } => row,
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn corpus_round_trip_with_quotes_and_commas() {
        let corpus = vec![
            LabeledText::new("a", "hola, \"amigo\"\nque tal", Label::NoBullying),
            LabeledText::new("b", "eres feo", Label::Bullying),
        ];
        let bytes = corpus_csv(&corpus).unwrap();
        assert!(bytes.starts_with(b"id,label,text\n"));
        assert_eq!(parse(std::str::from_utf8(&bytes).unwrap()).unwrap(), corpus);
    }

    #[test]
    fn corpus_errors_carry_row_numbers() {
        assert_eq!(row_of(parse("id,label,text\na,0,x\nb,2,y\n").unwrap_err()), 3);
        assert_eq!(row_of(parse("id,label,text\na,0,x\nb,1\n").unwrap_err()), 3);
        assert_eq!(row_of(parse("id,label,text\na,0,x\nb,1,y\na,1,z\n").unwrap_err()), 4);
        assert_eq!(row_of(parse("id,label,text\n,0,x\n").unwrap_err()), 2);
        assert_eq!(row_of(parse("id,text,label\na,x,0\n").unwrap_err()), 1);
        assert_eq!(row_of(parse("id,label,text\na,yes,x\n").unwrap_err()), 2);
    }

    #[test]
    fn table4_has_average_row() {
        use acoso_core::eval::{Evaluation, IterationReport};
        let rep = |i, s: f64| IterationReport {
            iteration: i,
            selected_epoch: 8,
            selected_accuracy: 0.998,
            selected_loss: 0.006,
            test: Evaluation {
                correct: 0,
                total: 0,
                success_pct: s,
                fail_pct: 100.0 - s,
            },
        };
        let report = acoso_core::eval::aggregate(vec![rep(2, 98.79), rep(1, 98.91)]);
        let t4 = String::from_utf8(table4_csv(&report).unwrap()).unwrap();
        assert_eq!(t4, "iteration,success_pct,fail_pct\n1,98.91,1.09\n2,98.79,1.21\naverage,98.85,1.15\n");
        let t3 = String::from_utf8(table3_csv(&report).unwrap()).unwrap();
        assert_eq!(t3, "iteration,selected_epoch,accuracy,loss\n1,8,99.80,0.006\n2,8,99.80,0.006\n");
    }
}
