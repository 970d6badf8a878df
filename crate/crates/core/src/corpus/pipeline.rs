use std::collections::BTreeMap;
use std::io::{BufRead, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{
    anonymize, filter_record, normalize_text, tokenize, AnonymizationReport, ConversationPair,
    CorpusError, DropReason, FilterDecision, PiiClass, PipelineConfig, RawRecord, Redaction,
};

/// Lines processed per parallel batch; output order is preserved.
const CHUNK_LINES: usize = 1024;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RecordOutcome {
    Kept(ConversationPair),
    Dropped(DropReason),
}

/// Counters for one pipeline run. Serialized as the stats document.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PipelineStats {
    pub read: u64,
    pub kept: u64,
    pub dropped: BTreeMap<DropReason, u64>,
    pub redactions: BTreeMap<PiiClass, u64>,
    pub records_touched: u64,
}

impl Default for PipelineStats {
    fn default() -> Self {
        PipelineStats {
            read: 0,
            kept: 0,
            dropped: DropReason::ALL.into_iter().map(|r| (r, 0)).collect(),
            redactions: PiiClass::ALL.into_iter().map(|c| (c, 0)).collect(),
            records_touched: 0,
        }
    }
}

impl PipelineStats {
    pub fn total_dropped(&self) -> u64 {
        self.dropped.values().sum()
    }

    fn add_anonymization(&mut self, report: &AnonymizationReport) {
        self.records_touched += report.records_touched;
        for (class, n) in &report.redactions {
            *self.redactions.entry(*class).or_insert(0) += n;
        }
    }

    /// Combines two partial counts; order of merging does not matter.
    pub fn merge(&mut self, other: &PipelineStats) {
        self.read += other.read;
        self.kept += other.kept;
        for (r, n) in &other.dropped {
            *self.dropped.entry(*r).or_insert(0) += n;
        }
        for (c, n) in &other.redactions {
            *self.redactions.entry(*c).or_insert(0) += n;
        }
        self.records_touched += other.records_touched;
    }
}

fn clean_side(text: &str, cfg: &PipelineConfig, redactions: &mut Vec<Redaction>) -> Vec<String> {
    // Redact on the raw text first: normalization strips the '@', '.' and
    // '/' characters the patterns key on.
    let (masked, mut found) = anonymize(text, &cfg.pii_rules);
    redactions.append(&mut found);
    let normalized = normalize_text(&masked, cfg);
    // second scan catches anything normalization glued together
    let (rescanned, mut found) = anonymize(&normalized, &cfg.pii_rules);
    redactions.append(&mut found);
    tokenize(&rescanned)
}

/// Runs one record through anonymize, normalize, tokenize and filter.
pub fn process_record(raw: &RawRecord, cfg: &PipelineConfig) -> (RecordOutcome, Vec<Redaction>) {
    let mut redactions = Vec::new();
    let prompt_tokens = clean_side(&raw.prompt, cfg, &mut redactions);
    let response_tokens = clean_side(&raw.response, cfg, &mut redactions);
    let pair = ConversationPair {
        id: raw.id.clone(),
        source: raw.source,
        prompt_text: prompt_tokens.join(" "),
        response_text: response_tokens.join(" "),
        prompt_tokens,
        response_tokens,
    };
    let outcome = match filter_record(pair, cfg) {
        FilterDecision::Keep(p) => RecordOutcome::Kept(p),
        FilterDecision::Drop(r) => RecordOutcome::Dropped(r),
    };
    (outcome, redactions)
}

fn process_line(line: &[u8], cfg: &PipelineConfig) -> (RecordOutcome, Vec<Redaction>) {
    let parsed = std::str::from_utf8(line)
        .ok()
        .and_then(|s| serde_json::from_str::<RawRecord>(s).ok())
        .filter(|r| !r.id.is_empty());
    match parsed {
        Some(raw) => process_record(&raw, cfg),
        None => (RecordOutcome::Dropped(DropReason::ParseError), Vec::new()),
    }
}

/// Streams JSONL records from `input` to `output`, one cleaned pair per line.
///
/// Malformed lines are counted as `PARSE_ERROR` drops; blank lines are
/// ignored. Read or write failures abort with the byte offset reached.
pub fn run_pipeline<R: BufRead, W: Write>(
    mut input: R,
    mut output: W,
    cfg: &PipelineConfig,
) -> Result<PipelineStats, CorpusError> {
    let mut stats = PipelineStats::default();
    let mut offset: u64 = 0;
    let mut eof = false;

    while !eof {
        let mut chunk: Vec<Vec<u8>> = Vec::with_capacity(CHUNK_LINES);
        while chunk.len() < CHUNK_LINES {
            let mut buf = Vec::new();
            let n = input
                .read_until(b'\n', &mut buf)
                .map_err(|source| CorpusError::Io { offset, source })?;
            if n == 0 {
                eof = true;
                break;
            }
            offset += n as u64;
            if buf.iter().all(u8::is_ascii_whitespace) {
                continue;
            }
            chunk.push(buf);
        }

        let results: Vec<_> = chunk
            .par_iter()
            .map(|line| process_line(line, cfg))
            .collect();

        for (outcome, redactions) in results {
            stats.read += 1;
            let mut report = AnonymizationReport::default();
            report.record(&redactions);
            stats.add_anonymization(&report);
            match outcome {
                RecordOutcome::Kept(pair) => {
                    stats.kept += 1;
                    let line = serde_json::to_string(&pair).expect("pair serializes");
                    writeln!(output, "{line}")
                        .map_err(|source| CorpusError::Io { offset, source })?;
                }
                RecordOutcome::Dropped(reason) => {
                    *stats.dropped.entry(reason).or_insert(0) += 1;
                }
            }
        }
    }
    output
        .flush()
        .map_err(|source| CorpusError::Io { offset, source })?;
    Ok(stats)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run(input: &str) -> (String, PipelineStats) {
        let mut out = Vec::new();
        let stats = run_pipeline(input.as_bytes(), &mut out, &PipelineConfig::default()).unwrap();
        (String::from_utf8(out).unwrap(), stats)
    }

    #[test]
    fn empty_input() {
        let (out, stats) = run("");
        assert!(out.is_empty());
        assert_eq!(stats, PipelineStats::default());
        assert_eq!(stats.total_dropped(), 0);
    }

    #[test]
    fn malformed_line_is_counted() {
        let input = "not json\n{\"id\":\"a\",\"source\":\"hf\",\"prompt\":\"hi\",\"response\":\"one two three four five six seven eight nine ten\"}\n";
        let (out, stats) = run(input);
        assert_eq!(stats.read, 2);
        assert_eq!(stats.kept, 1);
        assert_eq!(stats.dropped[&DropReason::ParseError], 1);
        assert_eq!(out.lines().count(), 1);
    }

    #[test]
    fn output_line_shape() {
        let input = r#"{"id":"a","source":"reddit","prompt":"Hi @sam!","response":"Try box breathing, it helps: in for four, hold for four, out for four."}"#;
        let (out, stats) = run(input);
        assert_eq!(stats.redactions[&PiiClass::Handle], 1);
        let v: serde_json::Value = serde_json::from_str(out.trim()).unwrap();
        assert_eq!(v["prompt"], "hi [REDACTED:HANDLE]");
        assert_eq!(v["prompt_tokens"][1], "[REDACTED:HANDLE]");
        assert_eq!(v["source"], "reddit");
        assert_eq!(v["response_tokens"].as_array().unwrap().len(), 14);
    }

    #[test]
    fn io_error_reports_offset() {
        struct Failing(usize);
        impl std::io::Read for Failing {
            fn read(&mut self, buf: &mut [u8]) -> std::io::Result<usize> {
                if self.0 == 0 {
                    return Err(std::io::Error::other("disk gone"));
                }
                let line = b"garbage\n";
                let n = line.len().min(buf.len());
                buf[..n].copy_from_slice(&line[..n]);
                self.0 -= 1;
                Ok(n)
            }
        }
        let reader = std::io::BufReader::new(Failing(2));
        let err = run_pipeline(reader, Vec::new(), &PipelineConfig::default()).unwrap_err();
        assert!(matches!(err, CorpusError::Io { offset: 16, .. }), "{err:?}");
    }
}
