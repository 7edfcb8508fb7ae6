//! Append-only results database and campaign checkpoints.
//!
//! A store is a directory with two line-delimited, tab-separated files:
//!
//! * `results.tsv`: one record per classified machine,
//!   `key  machine  status  steps  decider  proof`;
//! * `campaigns.tsv`: one checkpoint per finished chunk,
//!   `key  cursor  best  champion  halted  nonhalt  unknown  unresolved  state`.
//!
//! Records of a query appear in stream order, so the number of records for a
//! key equals the cursor of its last checkpoint once the store is
//! consistent. A write interrupted mid-line leaves a final line without its
//! newline; opening the store drops it. Records written after the last
//! checkpoint are rolled back when the campaign resumes.

use std::fmt;
use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use thiserror::Error;

use crate::tape::BitString;

const RESULTS: &str = "results.tsv";
const CAMPAIGNS: &str = "campaigns.tsv";

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}:{line}: {message}")]
    Corrupt {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("{key}: checkpoint at {cursor} but only {found} records")]
    MissingRecords {
        key: QueryKey,
        cursor: u128,
        found: u128,
    },
}

/// The triple (s, m, n): input, order and state count. Written `(ε,0,2)`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct QueryKey {
    pub input: BitString,
    pub order: u32,
    pub states: usize,
}

impl QueryKey {
    pub fn new(input: BitString, order: u32, states: usize) -> Self {
        QueryKey {
            input,
            order,
            states,
        }
    }
}

impl fmt::Display for QueryKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "({},{},{})",
            self.input.display_or_epsilon(),
            self.order,
            self.states
        )
    }
}

impl FromStr for QueryKey {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let inner = s
            .strip_prefix('(')
            .and_then(|s| s.strip_suffix(')'))
            .ok_or_else(|| format!("query key {s:?} is not parenthesised"))?;
        let parts: Vec<&str> = inner.split(',').collect();
        let [input, order, states] = parts[..] else {
            return Err(format!("query key {s:?} needs three fields"));
        };
        Ok(QueryKey {
            input: BitString::parse_or_epsilon(input).map_err(|e| e.to_string())?,
            order: order.parse().map_err(|_| format!("bad order {order:?}"))?,
            states: states
                .parse()
                .ok()
                .filter(|&n| n >= 1)
                .ok_or_else(|| format!("bad state count {states:?}"))?,
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Status {
    Halt,
    NonHalt,
    Unknown,
    Unresolved,
}

impl Status {
    pub fn as_str(self) -> &'static str {
        match self {
            Status::Halt => "HALT",
            Status::NonHalt => "NONHALT",
            Status::Unknown => "UNKNOWN",
            Status::Unresolved => "UNRESOLVED",
        }
    }
}

impl FromStr for Status {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "HALT" => Ok(Status::Halt),
            "NONHALT" => Ok(Status::NonHalt),
            "UNKNOWN" => Ok(Status::Unknown),
            "UNRESOLVED" => Ok(Status::Unresolved),
            _ => Err(format!("unknown status {s:?}")),
        }
    }
}

/// One classified machine.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Record {
    pub key: QueryKey,
    pub machine: String,
    pub status: Status,
    /// Halting step count, 0 unless `status` is `Halt`.
    pub steps: u64,
    pub decider: String,
    /// Proof text, or the failed oracle query for unresolved runs.
    pub proof: Option<String>,
}

impl fmt::Display for Record {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}\t{}\t{}\t{}\t{}\t{}",
            self.key,
            self.machine,
            self.status.as_str(),
            self.steps,
            self.decider,
            self.proof.as_deref().unwrap_or("-")
        )
    }
}

impl FromStr for Record {
    type Err = String;

    fn from_str(line: &str) -> Result<Self, String> {
        let fields: Vec<&str> = line.split('\t').collect();
        let [key, machine, status, steps, decider, proof] = fields[..] else {
            return Err(format!("expected 6 fields, found {}", fields.len()));
        };
        Ok(Record {
            key: key.parse()?,
            machine: machine.to_string(),
            status: status.parse()?,
            steps: steps
                .parse()
                .map_err(|_| format!("bad step count {steps:?}"))?,
            decider: decider.to_string(),
            proof: (proof != "-").then(|| proof.to_string()),
        })
    }
}

/// Running totals over a prefix of a campaign.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Tally {
    pub machines: u128,
    pub halted: u128,
    pub nonhalting: u128,
    pub unknown: u128,
    pub unresolved: u128,
    pub best: u64,
    pub champion: Option<String>,
}

impl Tally {
    pub fn add(&mut self, record: &Record) {
        self.machines += 1;
        match record.status {
            Status::Halt => {
                self.halted += 1;
                self.offer(record.steps, &record.machine);
            }
            Status::NonHalt => self.nonhalting += 1,
            Status::Unknown => self.unknown += 1,
            Status::Unresolved => self.unresolved += 1,
        }
    }

    /// Keeps the larger step count; equal counts go to the smaller text.
    pub fn offer(&mut self, steps: u64, machine: &str) {
        let better = match &self.champion {
            None => true,
            Some(c) => steps > self.best || (steps == self.best && machine < c.as_str()),
        };
        if better {
            self.best = steps;
            self.champion = Some(machine.to_string());
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CampaignState {
    Running,
    /// The whole stream was classified.
    Complete,
    /// A length limit cut the stream short.
    Prefix,
}

impl CampaignState {
    pub fn as_str(self) -> &'static str {
        match self {
            CampaignState::Running => "running",
            CampaignState::Complete => "complete",
            CampaignState::Prefix => "prefix",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Checkpoint {
    pub key: QueryKey,
    pub cursor: u128,
    pub tally: Tally,
    pub state: CampaignState,
}

impl Checkpoint {
    pub fn start(key: QueryKey) -> Self {
        Checkpoint {
            key,
            cursor: 0,
            tally: Tally::default(),
            state: CampaignState::Running,
        }
    }
}

impl fmt::Display for Checkpoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let t = &self.tally;
        write!(
            f,
            "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
            self.key,
            self.cursor,
            t.best,
            t.champion.as_deref().unwrap_or("-"),
            t.halted,
            t.nonhalting,
            t.unknown,
            t.unresolved,
            self.state.as_str()
        )
    }
}

impl FromStr for Checkpoint {
    type Err = String;

    fn from_str(line: &str) -> Result<Self, String> {
        let fields: Vec<&str> = line.split('\t').collect();
        let [key, cursor, best, champion, halted, nonhalting, unknown, unresolved, state] =
            fields[..]
        else {
            return Err(format!("expected 9 fields, found {}", fields.len()));
        };
        let num = |s: &str| s.parse::<u128>().map_err(|_| format!("bad count {s:?}"));
        let cursor = num(cursor)?;
        let tally = Tally {
            machines: cursor,
            halted: num(halted)?,
            nonhalting: num(nonhalting)?,
            unknown: num(unknown)?,
            unresolved: num(unresolved)?,
            best: best
                .parse()
                .map_err(|_| format!("bad step count {best:?}"))?,
            champion: (champion != "-").then(|| champion.to_string()),
        };
        if tally.halted + tally.nonhalting + tally.unknown + tally.unresolved != cursor {
            return Err("counts do not add up to the cursor".into());
        }
        let state = match state {
            "running" => CampaignState::Running,
            "complete" => CampaignState::Complete,
            "prefix" => CampaignState::Prefix,
            _ => return Err(format!("unknown campaign state {state:?}")),
        };
        Ok(Checkpoint {
            key: key.parse()?,
            cursor,
            tally,
            state,
        })
    }
}

/// Directory-backed store. All writes are appends except the rewrite that
/// rolls back unconfirmed records.
#[derive(Debug)]
pub struct ResultsStore {
    dir: PathBuf,
}

impl ResultsStore {
    /// Opens or creates the store, dropping a torn final line in either
    /// file.
    pub fn open(dir: impl AsRef<Path>) -> Result<Self, StoreError> {
        let dir = dir.as_ref().to_path_buf();
        fs::create_dir_all(&dir).map_err(|source| StoreError::Io {
            path: dir.clone(),
            source,
        })?;
        let store = ResultsStore { dir };
        store.repair::<Record>(RESULTS)?;
        store.repair::<Checkpoint>(CAMPAIGNS)?;
        Ok(store)
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn results_path(&self) -> PathBuf {
        self.dir.join(RESULTS)
    }

    pub fn campaigns_path(&self) -> PathBuf {
        self.dir.join(CAMPAIGNS)
    }

    fn io(path: &Path) -> impl FnOnce(std::io::Error) -> StoreError + '_ {
        move |source| StoreError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    /// Reads every complete line; the final line is reported as torn when
    /// it lacks a newline or does not parse.
    fn read_lines<T: FromStr<Err = String>>(
        &self,
        name: &str,
    ) -> Result<(Vec<(String, T)>, bool), StoreError> {
        let path = self.dir.join(name);
        let file = match File::open(&path) {
            Ok(f) => f,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok((Vec::new(), false)),
            Err(e) => return Err(Self::io(&path)(e)),
        };
        let mut reader = BufReader::new(file);
        let mut lines = Vec::new();
        let mut buf = String::new();
        let mut failure = None;
        loop {
            buf.clear();
            let read = reader.read_line(&mut buf).map_err(Self::io(&path))?;
            if read == 0 {
                break;
            }
            if let Some((line, message)) = failure.take() {
                return Err(StoreError::Corrupt {
                    path,
                    line,
                    message,
                });
            }
            let Some(text) = buf.strip_suffix('\n') else {
                return Ok((lines, true));
            };
            match text.parse::<T>() {
                Ok(v) => lines.push((text.to_string(), v)),
                Err(message) => failure = Some((lines.len() + 1, message)),
            }
        }
        Ok((lines, failure.is_some()))
    }

    fn rewrite(&self, name: &str, lines: impl Iterator<Item = String>) -> Result<(), StoreError> {
        let path = self.dir.join(name);
        let tmp = self.dir.join(format!("{name}.tmp"));
        let mut out = File::create(&tmp).map_err(Self::io(&tmp))?;
        let mut text = String::new();
        for line in lines {
            text.push_str(&line);
            text.push('\n');
        }
        out.write_all(text.as_bytes()).map_err(Self::io(&tmp))?;
        out.sync_all().map_err(Self::io(&tmp))?;
        fs::rename(&tmp, &path).map_err(Self::io(&path))
    }

    fn repair<T: FromStr<Err = String>>(&self, name: &str) -> Result<(), StoreError> {
        let (lines, torn) = self.read_lines::<T>(name)?;
        if torn {
            self.rewrite(name, lines.into_iter().map(|(text, _)| text))?;
        }
        Ok(())
    }

    fn append(&self, name: &str, text: &str) -> Result<(), StoreError> {
        let path = self.dir.join(name);
        let mut file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&path)
            .map_err(Self::io(&path))?;
        file.write_all(text.as_bytes()).map_err(Self::io(&path))?;
        file.flush().map_err(Self::io(&path))
    }

    pub fn persist(&self, records: &[Record]) -> Result<(), StoreError> {
        let mut text = String::new();
        for r in records {
            text.push_str(&r.to_string());
            text.push('\n');
        }
        self.append(RESULTS, &text)
    }

    pub fn write_checkpoint(&self, checkpoint: &Checkpoint) -> Result<(), StoreError> {
        self.append(CAMPAIGNS, &format!("{checkpoint}\n"))
    }

    pub fn records(&self, key: &QueryKey) -> Result<Vec<Record>, StoreError> {
        let (lines, _) = self.read_lines::<Record>(RESULTS)?;
        Ok(lines
            .into_iter()
            .map(|(_, r)| r)
            .filter(|r| &r.key == key)
            .collect())
    }

    /// Latest checkpoint of every query, in order of first appearance.
    pub fn checkpoints(&self) -> Result<Vec<Checkpoint>, StoreError> {
        let (lines, _) = self.read_lines::<Checkpoint>(CAMPAIGNS)?;
        let mut latest: Vec<Checkpoint> = Vec::new();
        for (_, cp) in lines {
            match latest.iter_mut().find(|c| c.key == cp.key) {
                Some(slot) => *slot = cp,
                None => latest.push(cp),
            }
        }
        Ok(latest)
    }

    pub fn checkpoint(&self, key: &QueryKey) -> Result<Option<Checkpoint>, StoreError> {
        Ok(self.checkpoints()?.into_iter().find(|c| &c.key == key))
    }

    /// Where the campaign for `key` continues: its latest checkpoint, or
    /// cursor 0. Records beyond the checkpoint are removed.
    pub fn resume(&self, key: &QueryKey) -> Result<Checkpoint, StoreError> {
        let checkpoint = self
            .checkpoint(key)?
            .unwrap_or_else(|| Checkpoint::start(key.clone()));
        let (lines, _) = self.read_lines::<Record>(RESULTS)?;
        let found = lines.iter().filter(|(_, r)| &r.key == key).count() as u128;
        if found < checkpoint.cursor {
            return Err(StoreError::MissingRecords {
                key: key.clone(),
                cursor: checkpoint.cursor,
                found,
            });
        }
        if found > checkpoint.cursor {
            let mut seen = 0u128;
            let kept = lines.into_iter().filter_map(|(text, r)| {
                if &r.key == key {
                    seen += 1;
                    if seen > checkpoint.cursor {
                        return None;
                    }
                }
                Some(text)
            });
            self.rewrite(RESULTS, kept)?;
        }
        Ok(checkpoint)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn key() -> QueryKey {
        QueryKey::new(BitString::empty(), 0, 2)
    }

    fn record(machine: &str, status: Status, steps: u64) -> Record {
        Record {
            key: key(),
            machine: machine.into(),
            status,
            steps,
            decider: "sim".into(),
            proof: None,
        }
    }

    #[test]
    fn key_round_trip() {
        for text in ["(ε,0,2)", "(1,0,1)", "(0110,3,4)"] {
            let k: QueryKey = text.parse().unwrap();
            assert_eq!(k.to_string(), text);
        }
        assert!("(ε,0,0)".parse::<QueryKey>().is_err());
        assert!("ε,0,1".parse::<QueryKey>().is_err());
    }

    #[test]
    fn record_round_trip() {
        let r = Record {
            proof: Some("cycler:start=0,period=2".into()),
            ..record("0RB---_0LA---", Status::NonHalt, 0)
        };
        assert_eq!(r.to_string().parse::<Record>().unwrap(), r);
        assert_eq!(
            r.to_string(),
            "(ε,0,2)\t0RB---_0LA---\tNONHALT\t0\tsim\tcycler:start=0,period=2"
        );
    }

    #[test]
    fn champion_ties_go_to_least_text() {
        let mut t = Tally::default();
        t.add(&record("1RB1LB_1LA---", Status::Halt, 6));
        t.add(&record("1RB0LB_1LA---", Status::Halt, 6));
        t.add(&record("1RB---_1LA---", Status::Halt, 3));
        assert_eq!(t.champion.as_deref(), Some("1RB0LB_1LA---"));
        assert_eq!((t.machines, t.halted, t.best), (3, 3, 6));
    }

    #[test]
    fn torn_line_is_dropped_and_unconfirmed_records_roll_back() {
        let dir = tempfile::tempdir().unwrap();
        let store = ResultsStore::open(dir.path()).unwrap();
        assert_eq!(store.resume(&key()).unwrap().cursor, 0);
        store
            .persist(&[
                record("------_------", Status::Halt, 1),
                record("0RB---_------", Status::Halt, 2),
            ])
            .unwrap();
        let mut cp = Checkpoint::start(key());
        cp.cursor = 1;
        cp.tally.add(&record("------_------", Status::Halt, 1));
        store.write_checkpoint(&cp).unwrap();
        store.append(RESULTS, "(ε,0,2)\t1RB").unwrap();
        let store = ResultsStore::open(dir.path()).unwrap();
        assert_eq!(store.records(&key()).unwrap().len(), 2);
        let resumed = store.resume(&key()).unwrap();
        assert_eq!(resumed, cp);
        assert_eq!(store.records(&key()).unwrap().len(), 1);
        let text = fs::read_to_string(store.results_path()).unwrap();
        assert_eq!(text, "(ε,0,2)\t------_------\tHALT\t1\tsim\t-\n");
    }

    #[test]
    fn corrupt_middle_line_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(
            dir.path().join(RESULTS),
            "garbage\n(ε,0,2)\t------_------\tHALT\t1\tsim\t-\n",
        )
        .unwrap();
        let err = ResultsStore::open(dir.path()).unwrap_err();
        assert!(matches!(err, StoreError::Corrupt { line: 1, .. }), "{err}");
    }
}
