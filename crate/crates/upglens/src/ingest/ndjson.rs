//! Line-at-a-time NDJSON reader. Memory use is bounded by the longest
//! single line, never by file size.

use std::fs::File;
use std::io::{BufRead, BufReader};
use std::marker::PhantomData;
use std::path::Path;

use serde::de::DeserializeOwned;

use super::IngestError;

pub struct NdjsonReader<T> {
    reader: BufReader<File>,
    buf: String,
    line_no: usize,
    _marker: PhantomData<fn() -> T>,
}

impl<T: DeserializeOwned> NdjsonReader<T> {
    pub fn open(path: &Path) -> Result<Self, IngestError> {
        let file = File::open(path).map_err(|e| IngestError::io(path, e))?;
        Ok(Self {
            reader: BufReader::new(file),
            buf: String::new(),
            line_no: 0,
            _marker: PhantomData,
        })
    }
}

impl<T: DeserializeOwned> Iterator for NdjsonReader<T> {
    type Item = Result<T, IngestError>;

    fn next(&mut self) -> Option<Self::Item> {
        loop {
            self.buf.clear();
            match self.reader.read_line(&mut self.buf) {
                Ok(0) => return None,
                Ok(_) => {}
                Err(e) => {
                    self.line_no += 1;
                    return Some(Err(IngestError::MalformedLine {
                        line: self.line_no,
                        reason: e.to_string(),
                    }));
                }
            }
            self.line_no += 1;
            let line = self.buf.trim();
            if line.is_empty() {
                continue;
            }
            return Some(serde_json::from_str(line).map_err(|e| IngestError::MalformedLine {
                line: self.line_no,
                reason: e.to_string(),
            }));
        }
    }
}
