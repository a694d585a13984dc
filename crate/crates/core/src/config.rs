//! Plain-text configuration: `[kind name]` section headers followed by
//! `key = value` lines. `#` starts a comment anywhere on a line, `;` only at
//! its start. Every error names the offending line.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Entry {
    pub key: String,
    pub value: String,
    pub line: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Section {
    pub kind: String,
    pub name: String,
    pub line: usize,
    entries: Vec<Entry>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Config {
    sections: Vec<Section>,
}

impl Config {
    pub fn parse(text: &str) -> Result<Config> {
        let mut sections: Vec<Section> = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let s = raw.split('#').next().unwrap_or("").trim();
            if s.is_empty() || s.starts_with('#') || s.starts_with(';') {
                continue;
            }
            if let Some(rest) = s.strip_prefix('[') {
                let inner = rest
                    .strip_suffix(']')
                    .ok_or_else(|| Error::Config {
                        line,
                        msg: "unterminated section header".into(),
                    })?
                    .trim();
                let mut words = inner.split_whitespace();
                let kind = words
                    .next()
                    .ok_or_else(|| Error::Config {
                        line,
                        msg: "empty section header".into(),
                    })?
                    .to_ascii_lowercase();
                let name = words.next().unwrap_or(&kind).to_string();
                if words.next().is_some() {
                    return Err(Error::Config {
                        line,
                        msg: format!("section header `[{inner}]` has more than two words"),
                    });
                }
                if sections.iter().any(|x| x.kind == kind && x.name == name) {
                    return Err(Error::Config {
                        line,
                        msg: format!("duplicate section `[{kind} {name}]`"),
                    });
                }
                sections.push(Section {
                    kind,
                    name,
                    line,
                    entries: Vec::new(),
                });
                continue;
            }
            let (key, value) = s.split_once('=').ok_or_else(|| Error::Config {
                line,
                msg: format!("expected `key = value`, found `{s}`"),
            })?;
            let key = key.trim().to_ascii_lowercase();
            if key.is_empty() {
                return Err(Error::Config {
                    line,
                    msg: "empty key".into(),
                });
            }
            let section = sections.last_mut().ok_or_else(|| Error::Config {
                line,
                msg: format!("key `{key}` appears before any section header"),
            })?;
            if section.entries.iter().any(|e| e.key == key) {
                return Err(Error::Config {
                    line,
                    msg: format!("duplicate key `{key}`"),
                });
            }
            section.entries.push(Entry {
                key,
                value: value.trim().to_string(),
                line,
            });
        }
        Ok(Config { sections })
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Config> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Config::parse(&text)
    }

    pub fn sections(&self) -> &[Section] {
        &self.sections
    }

    pub fn sections_of<'a>(&'a self, kind: &'a str) -> impl Iterator<Item = &'a Section> + 'a {
        self.sections.iter().filter(move |s| s.kind == kind)
    }

    pub fn is_empty(&self) -> bool {
        self.sections.is_empty()
    }

    /// Rejects sections whose kind is not in `kinds`.
    pub fn check_kinds(&self, kinds: &[&str]) -> Result<()> {
        match self.sections.iter().find(|s| !kinds.contains(&s.kind.as_str())) {
            Some(s) => Err(Error::Config {
                line: s.line,
                msg: format!("unknown section kind `{}`, expected one of {}", s.kind, kinds.join(", ")),
            }),
            None => Ok(()),
        }
    }
}

impl Section {
    pub fn entries(&self) -> &[Entry] {
        &self.entries
    }

    pub fn get(&self, key: &str) -> Option<&Entry> {
        self.entries.iter().find(|e| e.key == key)
    }

    pub fn check_keys(&self, allowed: &[&str]) -> Result<()> {
        match self.entries.iter().find(|e| !allowed.contains(&e.key.as_str())) {
            Some(e) => Err(Error::Config {
                line: e.line,
                msg: format!("unknown key `{}` in [{} {}]", e.key, self.kind, self.name),
            }),
            None => Ok(()),
        }
    }

    pub fn parse<T>(&self, key: &str) -> Result<Option<T>>
    where
        T: FromStr,
        T::Err: fmt::Display,
    {
        self.get(key).map(|e| parse_value(e, e.value.as_str())).transpose()
    }

    pub fn parse_or<T>(&self, key: &str, default: T) -> Result<T>
    where
        T: FromStr,
        T::Err: fmt::Display,
    {
        Ok(self.parse(key)?.unwrap_or(default))
    }

    pub fn required<T>(&self, key: &str) -> Result<T>
    where
        T: FromStr,
        T::Err: fmt::Display,
    {
        self.parse(key)?.ok_or_else(|| Error::Config {
            line: self.line,
            msg: format!("[{} {}] is missing `{key}`", self.kind, self.name),
        })
    }

    /// Comma-separated list; an empty value gives an empty list.
    pub fn list<T>(&self, key: &str) -> Result<Option<Vec<T>>>
    where
        T: FromStr,
        T::Err: fmt::Display,
    {
        self.get(key)
            .map(|e| {
                e.value
                    .split(',')
                    .map(str::trim)
                    .filter(|s| !s.is_empty())
                    .map(|s| parse_value(e, s))
                    .collect()
            })
            .transpose()
    }

    /// Error located at `key`'s line, or at the header when the key is absent.
    pub fn error(&self, key: &str, msg: impl Into<String>) -> Error {
        Error::Config {
            line: self.get(key).map_or(self.line, |e| e.line),
            msg: msg.into(),
        }
    }
}

fn parse_value<T>(e: &Entry, s: &str) -> Result<T>
where
    T: FromStr,
    T::Err: fmt::Display,
{
    s.parse::<T>().map_err(|err| Error::Config {
        line: e.line,
        msg: format!("bad value `{s}` for `{}`: {err}", e.key),
    })
}

impl fmt::Display for Config {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, s) in self.sections.iter().enumerate() {
            if i > 0 {
                writeln!(f)?;
            }
            if s.name == s.kind {
                writeln!(f, "[{}]", s.kind)?;
            } else {
                writeln!(f, "[{} {}]", s.kind, s.name)?;
            }
            for e in &s.entries {
                writeln!(f, "{} = {}", e.key, e.value)?;
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = "
# comment
[process ou]
kind = ou
sigma = 0.2

; another
[check quick]
alphas = 0.25, 0.5   # trailing comment
nodes=101
";

    #[test]
    fn parses_sections_and_values() {
        let c = Config::parse(SAMPLE).unwrap();
        assert_eq!(c.sections().len(), 2);
        let p = &c.sections()[0];
        assert_eq!((p.kind.as_str(), p.name.as_str(), p.line), ("process", "ou", 3));
        assert_eq!(p.required::<f64>("sigma").unwrap(), 0.2);
        let q = c.sections_of("check").next().unwrap();
        assert_eq!(q.list::<f64>("alphas").unwrap().unwrap(), vec![0.25, 0.5]);
        assert_eq!(q.parse_or("nodes", 0usize).unwrap(), 101);
        assert_eq!(q.parse_or("beta", 0.5).unwrap(), 0.5);
    }

    #[test]
    fn errors_carry_line_numbers() {
        let line_of = |text: &str| match Config::parse(text) {
            Err(Error::Config { line, .. }) => line,
            other => panic!("expected config error, got {other:?}"),
        };
        assert_eq!(line_of("key = 1"), 1);
        assert_eq!(line_of("[a]\nx = 1\n\nnot a pair"), 4);
        assert_eq!(line_of("[a]\nx = 1\nx = 2"), 3);
        assert_eq!(line_of("[a\n"), 1);
        assert_eq!(line_of("[a b]\n[a b]"), 2);

        let c = Config::parse("[check c]\nnodes = many\n").unwrap();
        let s = &c.sections()[0];
        match s.parse::<usize>("nodes") {
            Err(Error::Config { line: 2, msg }) => assert!(msg.contains("many")),
            other => panic!("{other:?}"),
        }
        match s.check_keys(&["alphas"]) {
            Err(Error::Config { line: 2, .. }) => {}
            other => panic!("{other:?}"),
        }
        match s.required::<f64>("beta") {
            Err(Error::Config { line: 1, .. }) => {}
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn empty_and_display_round_trip() {
        assert!(Config::parse("").unwrap().is_empty());
        assert!(Config::parse("# only comments\n\n").unwrap().is_empty());
        let c = Config::parse(SAMPLE).unwrap();
        let again = Config::parse(&c.to_string()).unwrap();
        assert_eq!(again.to_string(), c.to_string());
        assert_eq!(again.sections().len(), 2);
    }
}
