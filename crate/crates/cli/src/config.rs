use std::path::Path;

use serde::de::DeserializeOwned;
use toml::{Table, Value};

use crate::Failure;

/// Sections a config file may contain, one per subcommand.
pub const SECTIONS: [&str; 6] = ["dotprod_error", "accuracy", "noise_sweep", "rrns_perr", "energy", "infer"];

/// The config file, split into per-subcommand sections.
#[derive(Debug, Default)]
pub struct ConfigFile {
    table: Table,
}

impl ConfigFile {
    pub fn load(path: Option<&Path>) -> Result<Self, Failure> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path).map_err(|e| Failure::Io(format!("{}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| match e {
            Failure::Config(m) => Failure::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn parse(text: &str) -> Result<Self, Failure> {
        let table: Table = toml::from_str(text).map_err(|e| Failure::Config(e.to_string()))?;
        for (k, v) in &table {
            if !SECTIONS.contains(&k.as_str()) {
                return Err(Failure::Config(format!("unknown config section `{k}` (expected one of {})", SECTIONS.join(", "))));
            }
            if !v.is_table() {
                return Err(Failure::Config(format!("config section `{k}` must be a table")));
            }
        }
        Ok(Self { table })
    }

    /// Section `name` with `--set` overrides applied, ready for flag overrides.
    pub fn section(&self, name: &str, overrides: &[String]) -> Result<Layered, Failure> {
        let mut table = self.table.get(name).and_then(Value::as_table).cloned().unwrap_or_default();
        for o in overrides {
            let (key, raw) = o
                .split_once('=')
                .ok_or_else(|| Failure::Config(format!("override `{o}` is not of the form key=value")))?;
            set_path(&mut table, key.trim(), parse_value(raw.trim()))?;
        }
        Ok(Layered { table })
    }
}

/// A TOML value from override text; bare words become strings.
pub fn parse_value(raw: &str) -> Value {
    toml::from_str::<Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| Value::String(raw.to_string()))
}

fn set_path(table: &mut Table, key: &str, value: Value) -> Result<(), Failure> {
    let mut parts = key.split('.').peekable();
    let mut cur = table;
    while let Some(part) = parts.next() {
        if part.is_empty() {
            return Err(Failure::Config(format!("bad override key `{key}`")));
        }
        if parts.peek().is_none() {
            cur.insert(part.to_string(), value);
            return Ok(());
        }
        let next = cur.entry(part.to_string()).or_insert_with(|| Value::Table(Table::new()));
        cur = next.as_table_mut().ok_or_else(|| Failure::Config(format!("`{part}` in `{key}` is not a table")))?;
    }
    Ok(())
}

/// Config values in precedence order file < `--set` < typed flag.
#[derive(Debug)]
pub struct Layered {
    table: Table,
}

impl Layered {
    pub fn set(&mut self, key: &str, value: Option<impl Into<Value>>) {
        if let Some(v) = value {
            self.table.insert(key.to_string(), v.into());
        }
    }

    pub fn set_list<T: Clone + Into<Value>>(&mut self, key: &str, value: Option<&Vec<T>>) {
        if let Some(v) = value {
            self.table.insert(key.to_string(), Value::Array(v.iter().cloned().map(Into::into).collect()));
        }
    }

    pub fn build<T: DeserializeOwned>(self, section: &str) -> Result<T, Failure> {
        T::deserialize(Value::Table(self.table)).map_err(|e| Failure::Config(format!("[{section}]: {e}")))
    }
}

/// `4..8` (inclusive), `4,6,8` or `5`.
pub fn parse_u32_list(s: &str) -> Result<Vec<u32>, String> {
    if let Some((a, b)) = s.split_once("..") {
        let b = b.strip_prefix('=').unwrap_or(b);
        let (a, b): (u32, u32) = (a.trim().parse().map_err(|_| format!("bad range `{s}`"))?, b.trim().parse().map_err(|_| format!("bad range `{s}`"))?);
        if a > b {
            return Err(format!("empty range `{s}`"));
        }
        return Ok((a..=b).collect());
    }
    parse_list(s)
}

pub fn parse_list<T: std::str::FromStr>(s: &str) -> Result<Vec<T>, String> {
    s.split(',')
        .filter(|p| !p.trim().is_empty())
        .map(|p| p.trim().parse().map_err(|_| format!("bad list element `{p}`")))
        .collect()
}
