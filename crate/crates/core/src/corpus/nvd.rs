use std::io::Read;

use chrono::{DateTime, NaiveDateTime, Utc};
use serde_json::Value;

use super::types::VulnRecord;
use super::CorpusError;

/// Outcome of parsing one NVD feed. Totality: `records.len() + skipped`
/// equals the number of entries in the feed.
#[derive(Debug, Default)]
pub struct NvdIngest {
    pub records: Vec<VulnRecord>,
    pub skipped: usize,
    pub diagnostics: Vec<String>,
}

/// Parses an NVD 2.0 JSON feed into vulnerability records.
///
/// Entries missing a required field (id, published timestamp, English
/// description) are skipped with a diagnostic rather than failing the whole
/// feed. An entry without a weaknesses block yields an empty `cwe_ids`.
pub fn parse_nvd_feed<R: Read>(mut raw: R) -> Result<NvdIngest, CorpusError> {
    let mut buf = String::new();
    raw.read_to_string(&mut buf)?;

    let feed: Value = serde_json::from_str(&buf).map_err(|e| CorpusError::MalformedFeed {
        offset: byte_offset(&buf, e.line(), e.column()),
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;

    let entries = feed
        .get("vulnerabilities")
        .and_then(Value::as_array)
        .ok_or(CorpusError::MissingVulnerabilities)?;

    let mut out = NvdIngest::default();
    for (i, entry) in entries.iter().enumerate() {
        match parse_entry(entry) {
            Ok(record) => out.records.push(record),
            Err(reason) => {
                let diag = format!("skipping NVD entry {i}: {reason}");
                log::warn!("{diag}");
                out.diagnostics.push(diag);
                out.skipped += 1;
            }
        }
    }
    Ok(out)
}

fn parse_entry(entry: &Value) -> Result<VulnRecord, String> {
    let cve = entry.get("cve").ok_or("no `cve` object")?;

    let id = cve
        .get("id")
        .and_then(Value::as_str)
        .ok_or("missing id")?
        .to_string();

    let published_raw = cve
        .get("published")
        .and_then(Value::as_str)
        .ok_or_else(|| format!("{id}: missing published"))?;
    let published_at =
        parse_nvd_timestamp(published_raw).ok_or_else(|| format!("{id}: bad published timestamp {published_raw:?}"))?;

    let description = cve
        .get("descriptions")
        .and_then(Value::as_array)
        .and_then(|ds| {
            ds.iter().find_map(|d| {
                (d.get("lang").and_then(Value::as_str) == Some("en"))
                    .then(|| d.get("value").and_then(Value::as_str))
                    .flatten()
            })
        })
        .ok_or_else(|| format!("{id}: no English description"))?
        .to_string();

    let mut cwe_ids = Vec::new();
    if let Some(weaknesses) = cve.get("weaknesses").and_then(Value::as_array) {
        for weakness in weaknesses {
            let Some(descs) = weakness.get("description").and_then(Value::as_array) else {
                continue;
            };
            for d in descs {
                if let Some(value) = d.get("value").and_then(Value::as_str) {
                    // NVD also emits placeholders like "NVD-CWE-noinfo"; keep real ids only.
                    if value.starts_with("CWE-")
                        && value[4..].chars().all(|c| c.is_ascii_digit())
                        && !cwe_ids.iter().any(|c| c == value)
                    {
                        cwe_ids.push(value.to_string());
                    }
                }
            }
        }
    }

    let reference_urls = cve
        .get("references")
        .and_then(Value::as_array)
        .map(|refs| {
            refs.iter()
                .filter_map(|r| r.get("url").and_then(Value::as_str))
                .map(str::to_string)
                .collect()
        })
        .unwrap_or_default();

    let record = VulnRecord {
        cve_id: id,
        description,
        published_at,
        cwe_ids,
        reference_urls,
    };
    record.validate().map_err(|e| e.to_string())?;
    Ok(record)
}

/// NVD 2.0 publishes either RFC 3339 or a zone-less `2023-03-10T21:15:00.000`
/// (UTC implied).
pub(crate) fn parse_nvd_timestamp(raw: &str) -> Option<DateTime<Utc>> {
    if let Ok(dt) = DateTime::parse_from_rfc3339(raw) {
        return Some(dt.with_timezone(&Utc));
    }
    NaiveDateTime::parse_from_str(raw, "%Y-%m-%dT%H:%M:%S%.f")
        .ok()
        .map(|naive| naive.and_utc())
}

fn byte_offset(text: &str, line: usize, column: usize) -> usize {
    if line == 0 {
        return 0;
    }
    let mut offset = 0;
    for (n, l) in text.split_inclusive('\n').enumerate() {
        if n + 1 == line {
            return offset + column.saturating_sub(1);
        }
        offset += l.len();
    }
    offset
}
