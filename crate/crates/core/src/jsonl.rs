//! Line-delimited JSON records.

use std::io::{BufRead, BufReader, Read, Write};

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::{Result, TadError};

/// Parses one record per non-blank line; errors carry the 1-based line number.
pub fn read_jsonl<T: DeserializeOwned, R: Read>(input: R) -> Result<Vec<T>> {
    let mut out = Vec::new();
    for (i, line) in BufReader::new(input).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| TadError::parse(i + 1, e.to_string()))?);
    }
    Ok(out)
}

pub fn write_jsonl<T: Serialize, W: Write>(records: &[T], mut out: W) -> Result<()> {
    for r in records {
        serde_json::to_writer(&mut out, r)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tad::TaskSpec;

    #[test]
    fn round_trip_and_line_numbers() {
        let tasks = vec![
            TaskSpec::new("t0", vec!["a".into(), "b".into()], "p").unwrap(),
            TaskSpec::new("t1", vec!["c".into()], "p").unwrap(),
        ];
        let mut buf = Vec::new();
        write_jsonl(&tasks, &mut buf).unwrap();
        let back: Vec<TaskSpec> = read_jsonl(&buf[..]).unwrap();
        assert_eq!(back, tasks);

        let bad = "{\"id\":\"t\",\"categories\":[\"a\"],\"pool\":\"p\"}\n\n{oops}\n";
        match read_jsonl::<TaskSpec, _>(bad.as_bytes()) {
            Err(TadError::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
    }
}
