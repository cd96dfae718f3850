use super::{ChatError, HeaderLine, RawChatFile, TierCode, TierLine};

enum Last {
    None,
    Header,
    Tier,
}

/// Split a CHAT file into header records and tier lines.
///
/// Continuation lines (leading tab) are joined onto the preceding record with
/// a single space. Blank lines are ignored. Headers before `@Begin` (such as
/// `@UTF8` or `@PID`) are accepted; any tier line before it is not.
pub fn parse_chat(bytes: &[u8]) -> Result<RawChatFile, ChatError> {
    let text = std::str::from_utf8(bytes).map_err(|e| ChatError::InvalidUtf8(e.valid_up_to()))?;
    let text = text.strip_prefix('\u{feff}').unwrap_or(text);

    let mut headers: Vec<HeaderLine> = Vec::new();
    let mut tiers: Vec<TierLine> = Vec::new();
    let mut last = Last::None;
    let mut begun = false;
    let mut ended = false;

    for (idx, raw_line) in text.split('\n').enumerate() {
        let line_no = idx + 1;
        let line = raw_line.strip_suffix('\r').unwrap_or(raw_line);
        if line.trim().is_empty() {
            continue;
        }
        if ended {
            return Err(ChatError::MalformedTier {
                line: line_no,
                reason: "content after @End".into(),
            });
        }

        if line.starts_with('\t') {
            let extra = line.trim();
            let target = match last {
                Last::Header => headers.last_mut().map(|h| &mut h.value),
                Last::Tier => tiers.last_mut().map(|t| &mut t.content),
                Last::None => None,
            };
            match target {
                Some(value) => {
                    if !value.is_empty() {
                        value.push(' ');
                    }
                    value.push_str(extra);
                }
                None => {
                    return Err(ChatError::MalformedTier {
                        line: line_no,
                        reason: "continuation line without a preceding record".into(),
                    })
                }
            }
            continue;
        }

        if let Some(rest) = line.strip_prefix('@') {
            let (name, value) = match rest.split_once(':') {
                Some((n, v)) => (n.trim(), v.trim()),
                None => (rest.trim(), ""),
            };
            if name.is_empty() {
                return Err(ChatError::MalformedTier {
                    line: line_no,
                    reason: "empty header name".into(),
                });
            }
            match name {
                "Begin" => {
                    if begun {
                        return Err(ChatError::MalformedTier {
                            line: line_no,
                            reason: "duplicate @Begin".into(),
                        });
                    }
                    begun = true;
                }
                "End" => {
                    if !begun {
                        return Err(ChatError::MissingBegin);
                    }
                    ended = true;
                }
                _ => {}
            }
            headers.push(HeaderLine {
                name: name.to_string(),
                value: value.to_string(),
                line: line_no,
            });
            last = Last::Header;
            continue;
        }

        let (sigil, rest) = match line.chars().next() {
            Some(c @ ('*' | '%')) => (c, &line[1..]),
            _ => {
                return Err(ChatError::MalformedTier {
                    line: line_no,
                    reason: "expected a header, tier or continuation line".into(),
                })
            }
        };
        if !begun {
            return Err(ChatError::MissingBegin);
        }
        let Some((code, content)) = rest.split_once(':') else {
            return Err(ChatError::MalformedTier {
                line: line_no,
                reason: "tier line without `:`".into(),
            });
        };
        if code.is_empty()
            || !code
                .chars()
                .all(|c| c.is_alphanumeric() || c == '_' || c == '-')
        {
            return Err(ChatError::MalformedTier {
                line: line_no,
                reason: format!("invalid tier code `{code}`"),
            });
        }
        let code = if sigil == '*' {
            TierCode::Main(code.to_string())
        } else {
            if !tiers.iter().any(|t| matches!(t.code, TierCode::Main(_))) {
                return Err(ChatError::MalformedTier {
                    line: line_no,
                    reason: "dependent tier before any main tier".into(),
                });
            }
            TierCode::Dependent(code.to_string())
        };
        tiers.push(TierLine {
            code,
            content: content.trim().to_string(),
            line: line_no,
        });
        last = Last::Tier;
    }

    if !begun {
        return Err(ChatError::MissingBegin);
    }
    if !ended {
        return Err(ChatError::MissingEnd);
    }
    Ok(RawChatFile {
        path: String::new(),
        headers,
        tiers,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "@UTF8\n@Begin\n@Languages:\teng\n@Participants:\tPAR Participant\n*PAR:\tthe boy is on the stool .\n@End\n";

    #[test]
    fn minimal_file() {
        let raw = parse_chat(MINIMAL.as_bytes()).unwrap();
        assert_eq!(raw.tiers.len(), 1);
        assert_eq!(raw.tiers[0].code, TierCode::Main("PAR".into()));
        assert_eq!(raw.tiers[0].content, "the boy is on the stool .");
        assert_eq!(
            raw.header("Participants").next().unwrap().value,
            "PAR Participant"
        );
    }

    #[test]
    fn both_speakers_captured() {
        let src = "@Begin\n*INV:\twhat do you see ?\n*PAR:\ta boy .\n@End\n";
        let raw = parse_chat(src.as_bytes()).unwrap();
        let codes: Vec<_> = raw.tiers.iter().map(|t| t.code.clone()).collect();
        assert_eq!(
            codes,
            vec![TierCode::Main("INV".into()), TierCode::Main("PAR".into())]
        );
    }

    #[test]
    fn missing_end() {
        let src = "@Begin\n*PAR:\thello .\n";
        assert_eq!(parse_chat(src.as_bytes()), Err(ChatError::MissingEnd));
    }

    #[test]
    fn missing_begin() {
        assert_eq!(
            parse_chat(b"*PAR:\thello .\n@End\n"),
            Err(ChatError::MissingBegin)
        );
        assert_eq!(parse_chat(b""), Err(ChatError::MissingBegin));
    }

    #[test]
    fn continuation_lines_are_merged() {
        let src = "@Begin\n*PAR:\tthe boy is\n\ton the stool .\n%mor:\tdet:art|the n|boy\n\taux|be&3S prep|on det:art|the n|stool .\n@End\n";
        let raw = parse_chat(src.as_bytes()).unwrap();
        assert_eq!(raw.tiers.len(), 2);
        assert_eq!(raw.tiers[0].content, "the boy is on the stool .");
        assert_eq!(
            raw.tiers[1].content,
            "det:art|the n|boy aux|be&3S prep|on det:art|the n|stool ."
        );
    }

    #[test]
    fn crlf_and_bom() {
        let src = "\u{feff}@Begin\r\n*PAR:\thi .\r\n@End\r\n";
        let raw = parse_chat(src.as_bytes()).unwrap();
        assert_eq!(raw.tiers[0].content, "hi .");
    }

    #[test]
    fn malformed_lines() {
        let err = parse_chat(b"@Begin\nhello there\n@End\n").unwrap_err();
        assert!(matches!(err, ChatError::MalformedTier { line: 2, .. }));
        let err = parse_chat(b"@Begin\n%mor:\tn|boy\n@End\n").unwrap_err();
        assert!(matches!(err, ChatError::MalformedTier { line: 2, .. }));
        let err = parse_chat(b"@Begin\n*PAR hello\n@End\n").unwrap_err();
        assert!(matches!(err, ChatError::MalformedTier { .. }));
        let err = parse_chat(b"@Begin\n@End\n*PAR:\tlate .\n").unwrap_err();
        assert!(matches!(err, ChatError::MalformedTier { line: 3, .. }));
    }

    #[test]
    fn invalid_utf8() {
        assert!(matches!(
            parse_chat(b"@Begin\n*PAR:\t\xff\n@End\n"),
            Err(ChatError::InvalidUtf8(_))
        ));
    }
}
