//! Metrics exposition text format: parsing and canonical rendering.
//!
//! Lines are `name{label="value",...} value [timestamp_ms]`. `# HELP` and
//! `# TYPE` comments are ignored. Label values support the `\\`, `\"` and
//! `\n` escapes; anything else is an error. Samples without a per-line
//! timestamp take the scrape time.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use super::{IngestError, MetricSample};

/// Parse one exposition document captured at `scrape_time_ms`.
pub fn parse_exposition(text: &str, scrape_time_ms: i64) -> Result<Vec<MetricSample>, IngestError> {
    let mut out = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        out.push(parse_sample_line(line, line_no, scrape_time_ms)?);
    }
    Ok(out)
}

fn parse_sample_line(
    line: &str,
    line_no: usize,
    scrape_time_ms: i64,
) -> Result<MetricSample, IngestError> {
    let bad = |reason: &str| IngestError::MalformedLine {
        line: line_no,
        reason: reason.to_string(),
    };

    let bytes = line.as_bytes();
    let mut pos = 0;
    while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() && bytes[pos] != b'{' {
        pos += 1;
    }
    let name = &line[..pos];
    if name.is_empty() || !is_valid_metric_name(name) {
        return Err(bad("invalid metric name"));
    }

    let mut labels = BTreeMap::new();
    let rest = if pos < bytes.len() && bytes[pos] == b'{' {
        let (parsed, consumed) = parse_labels(&line[pos..], line_no)?;
        labels = parsed;
        &line[pos + consumed..]
    } else {
        &line[pos..]
    };

    let mut parts = rest.split_whitespace();
    let value_str = parts.next().ok_or_else(|| bad("missing value"))?;
    let value: f64 = value_str
        .parse()
        .map_err(|_| bad(&format!("unparsable value {value_str:?}")))?;
    if !value.is_finite() {
        return Err(bad("non-finite value"));
    }

    let timestamp_ms = match parts.next() {
        Some(ts) => ts
            .parse::<i64>()
            .map_err(|_| bad(&format!("unparsable timestamp {ts:?}")))?,
        None => scrape_time_ms,
    };
    if parts.next().is_some() {
        return Err(bad("trailing content after timestamp"));
    }
    if timestamp_ms <= 0 {
        return Err(bad("timestamp must be positive"));
    }

    Ok(MetricSample {
        name: name.to_string(),
        labels,
        timestamp_ms,
        value,
    })
}

/// Parse a `{k="v",...}` block, returning the labels and bytes consumed
/// including both braces.
fn parse_labels(
    text: &str,
    line_no: usize,
) -> Result<(BTreeMap<String, String>, usize), IngestError> {
    let bad = |reason: String| IngestError::MalformedLine {
        line: line_no,
        reason,
    };
    let chars: Vec<char> = text.chars().collect();
    debug_assert_eq!(chars[0], '{');
    let mut labels = BTreeMap::new();
    let mut i = 1;
    loop {
        while i < chars.len() && chars[i] == ' ' {
            i += 1;
        }
        if i >= chars.len() {
            return Err(bad("unterminated label block".into()));
        }
        if chars[i] == '}' {
            return Ok((labels, text[..].char_indices().nth(i).map(|(b, _)| b).unwrap() + 1));
        }
        let key_start = i;
        while i < chars.len() && chars[i] != '=' {
            i += 1;
        }
        if i >= chars.len() {
            return Err(bad("label without '='".into()));
        }
        let key: String = chars[key_start..i].iter().collect();
        if key.is_empty() || !is_valid_label_key(&key) {
            return Err(bad(format!("invalid label name {key:?}")));
        }
        i += 1; // '='
        if i >= chars.len() || chars[i] != '"' {
            return Err(bad("label value must be quoted".into()));
        }
        i += 1;
        let mut value = String::new();
        loop {
            if i >= chars.len() {
                return Err(bad("unterminated label value".into()));
            }
            match chars[i] {
                '"' => {
                    i += 1;
                    break;
                }
                '\\' => {
                    i += 1;
                    let esc = chars.get(i).copied().ok_or_else(|| bad("dangling escape".into()))?;
                    match esc {
                        '\\' => value.push('\\'),
                        '"' => value.push('"'),
                        'n' => value.push('\n'),
                        other => {
                            return Err(IngestError::UnknownEscape {
                                line: line_no,
                                escape: other,
                            })
                        }
                    }
                    i += 1;
                }
                c => {
                    value.push(c);
                    i += 1;
                }
            }
        }
        labels.insert(key, value);
        match chars.get(i) {
            Some(',') => i += 1,
            Some('}') => {}
            _ => return Err(bad("expected ',' or '}' after label".into())),
        }
    }
}

fn is_valid_metric_name(name: &str) -> bool {
    let mut chars = name.chars();
    match chars.next() {
        Some(c) if c.is_ascii_alphabetic() || c == '_' || c == ':' => {}
        _ => return false,
    }
    chars.all(|c| c.is_ascii_alphanumeric() || c == '_' || c == ':')
}

fn is_valid_label_key(key: &str) -> bool {
    let mut chars = key.chars();
    match chars.next() {
        Some(c) if c.is_ascii_alphabetic() || c == '_' => {}
        _ => return false,
    }
    chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

fn escape_label_value(value: &str) -> String {
    let mut out = String::with_capacity(value.len());
    for c in value.chars() {
        match c {
            '\\' => out.push_str("\\\\"),
            '"' => out.push_str("\\\""),
            '\n' => out.push_str("\\n"),
            c => out.push(c),
        }
    }
    out
}

/// Render samples in the canonical form produced by the stream emitter:
/// sorted labels, shortest round-trip value formatting, explicit timestamp.
/// `parse_exposition(render_exposition(s)) == s` for normalized sample lists.
pub fn render_exposition(samples: &[MetricSample]) -> String {
    let mut out = String::new();
    for s in samples {
        out.push_str(&s.name);
        if !s.labels.is_empty() {
            out.push('{');
            for (i, (k, v)) in s.labels.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                let _ = write!(out, "{k}=\"{}\"", escape_label_value(v));
            }
            out.push('}');
        }
        let _ = writeln!(out, " {} {}", s.value, s.timestamp_ms);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_sample_with_scrape_time() {
        let samples = parse_exposition("m{container=\"es\"} 42", 1000).unwrap();
        assert_eq!(samples.len(), 1);
        let s = &samples[0];
        assert_eq!(s.name, "m");
        assert_eq!(s.labels["container"], "es");
        assert_eq!(s.timestamp_ms, 1000);
        assert_eq!(s.value, 42.0);
    }

    #[test]
    fn empty_input_empty_list() {
        assert!(parse_exposition("", 1).unwrap().is_empty());
        assert!(parse_exposition("\n\n", 1).unwrap().is_empty());
    }

    #[test]
    fn comments_ignored() {
        let text = "# HELP m a counter\n# TYPE m counter\nm{c=\"a\"} 1 5\nm{c=\"b\"} 2 5\n";
        let samples = parse_exposition(text, 9).unwrap();
        assert_eq!(samples.len(), 2);
        assert_eq!(samples[0].labels["c"], "a");
        assert_eq!(samples[1].value, 2.0);
    }

    #[test]
    fn explicit_timestamp_and_scientific_values() {
        let samples = parse_exposition("m 1.501088e+06 1634523080000", 1).unwrap();
        assert_eq!(samples[0].value, 1.501088e6);
        assert_eq!(samples[0].timestamp_ms, 1634523080000);
    }

    #[test]
    fn malformed_line_reports_line_number() {
        let err = parse_exposition("ok 1 2\n3bad 1\n", 1).unwrap_err();
        match err {
            IngestError::MalformedLine { line, .. } => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn unknown_escape_rejected() {
        let err = parse_exposition("m{k=\"a\\t\"} 1", 1).unwrap_err();
        assert!(matches!(err, IngestError::UnknownEscape { escape: 't', .. }));
    }

    #[test]
    fn known_escapes_round_trip() {
        let text = "m{k=\"a\\\\b\\\"c\\nd\"} 1 7";
        let samples = parse_exposition(text, 1).unwrap();
        assert_eq!(samples[0].labels["k"], "a\\b\"c\nd");
        let rendered = render_exposition(&samples);
        let reparsed = parse_exposition(&rendered, 1).unwrap();
        assert_eq!(reparsed, samples);
    }

    #[test]
    fn non_finite_values_rejected() {
        assert!(parse_exposition("m NaN", 1).is_err());
        assert!(parse_exposition("m +Inf", 1).is_err());
    }

    #[test]
    fn missing_value_rejected() {
        assert!(parse_exposition("metric_name", 1).is_err());
        assert!(parse_exposition("m{a=\"b\"}", 1).is_err());
    }
}
