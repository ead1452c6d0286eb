//! Maps JSON key paths to the line where they appear in the source text.
//!
//! The scanner is lenient: it never fails, and on malformed input it reports
//! whatever paths it could attribute before the damage.

use std::collections::BTreeMap;

#[derive(Debug, Clone)]
enum Frame {
    Object { key: Option<String> },
    Array { index: usize },
}

/// Line index of every key path (`a.b[2].c`) in a JSON document. Lines are
/// 1-based. Values inside arrays are addressed by index.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct LineIndex {
    lines: BTreeMap<String, usize>,
}

impl LineIndex {
    pub fn build(text: &str) -> Self {
        let mut lines = BTreeMap::new();
        let mut stack: Vec<Frame> = Vec::new();
        let mut line = 1usize;
        let mut chars = text.chars().peekable();
        // Key string seen in the current object, waiting for its colon.
        let mut pending: Option<String> = None;

        let path_of = |stack: &[Frame]| -> String {
            let mut out = String::new();
            for frame in stack {
                match frame {
                    Frame::Object { key: Some(k) } => {
                        if !out.is_empty() {
                            out.push('.');
                        }
                        out.push_str(k);
                    }
                    Frame::Object { key: None } => {}
                    Frame::Array { index } => {
                        out.push_str(&format!("[{index}]"));
                    }
                }
            }
            out
        };

        while let Some(c) = chars.next() {
            match c {
                '\n' => line += 1,
                '"' => {
                    let mut s = String::new();
                    while let Some(d) = chars.next() {
                        match d {
                            '\\' => {
                                if let Some(e) = chars.next() {
                                    if e == '\n' {
                                        line += 1;
                                    }
                                    s.push(e);
                                }
                            }
                            '"' => break,
                            '\n' => {
                                line += 1;
                                s.push(d);
                            }
                            _ => s.push(d),
                        }
                    }
                    if matches!(stack.last(), Some(Frame::Object { key: None })) {
                        pending = Some(s);
                    }
                }
                ':' => {
                    if let (Some(k), Some(Frame::Object { key })) = (pending.take(), stack.last_mut()) {
                        *key = Some(k);
                        let path = path_of(&stack);
                        lines.entry(path).or_insert(line);
                    }
                }
                ',' => match stack.last_mut() {
                    Some(Frame::Object { key }) => *key = None,
                    Some(Frame::Array { index }) => {
                        *index += 1;
                        let path = path_of(&stack);
                        lines.entry(path).or_insert(line);
                    }
                    None => {}
                },
                '{' => stack.push(Frame::Object { key: None }),
                '[' => {
                    stack.push(Frame::Array { index: 0 });
                    let path = path_of(&stack);
                    lines.entry(path).or_insert(line);
                }
                '}' | ']' => {
                    stack.pop();
                    pending = None;
                }
                _ => {}
            }
        }
        LineIndex { lines }
    }

    /// Line of `path`, falling back to the nearest recorded ancestor.
    pub fn line_of(&self, path: &str) -> Option<usize> {
        let mut p = path.to_string();
        loop {
            if let Some(&l) = self.lines.get(&p) {
                return Some(l);
            }
            let cut = p.rfind(['.', '['])?;
            p.truncate(cut);
        }
    }

    pub fn len(&self) -> usize {
        self.lines.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lines.is_empty()
    }
}
