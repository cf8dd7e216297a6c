/// Maximal runs of 1s as `(start, end)` spans, end exclusive.
pub fn decode_spans(tags: &[u8]) -> Vec<(usize, usize)> {
    let mut spans = Vec::new();
    let mut start = None;
    for (i, &t) in tags.iter().enumerate() {
        match (t != 0, start) {
            (true, None) => start = Some(i),
            (false, Some(s)) => {
                spans.push((s, i));
                start = None;
            }
            _ => {}
        }
    }
    if let Some(s) = start {
        spans.push((s, tags.len()));
    }
    spans
}

/// Inverse of [`decode_spans`] for sorted, non-overlapping, non-adjacent spans.
pub fn spans_to_tags(spans: &[(usize, usize)], len: usize) -> Vec<u8> {
    let mut tags = vec![0u8; len];
    for &(s, e) in spans {
        for t in tags.iter_mut().take(e.min(len)).skip(s) {
            *t = 1;
        }
    }
    tags
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn runs_become_spans() {
        assert_eq!(decode_spans(&[0, 1, 1, 0]), vec![(1, 3)]);
        assert_eq!(decode_spans(&[1, 0, 1]), vec![(0, 1), (2, 3)]);
        assert!(decode_spans(&[0, 0, 0]).is_empty());
        assert!(decode_spans(&[]).is_empty());
    }

    #[test]
    fn round_trip() {
        let spans = vec![(0, 2), (3, 4), (6, 9)];
        assert_eq!(decode_spans(&spans_to_tags(&spans, 9)), spans);
    }
}
