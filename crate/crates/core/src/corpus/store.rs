//! On-disk corpus layout: one directory holding vocabularies as JSON maps,
//! count matrices and network edges as CSV, and timelines as JSONL.

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{
    Corpus, CorpusConfig, InteractionEvent, SparseCountMatrix, UserTimeline, VocabRole, Vocabulary,
};
use crate::{Error, Result};

const FORMAT_VERSION: u32 = 1;
const MATRICES: [&str; 5] = ["M", "P", "W", "C", "R"];

#[derive(Serialize, Deserialize)]
struct Header {
    format_version: u32,
    config: CorpusConfig,
    shapes: BTreeMap<String, (usize, usize)>,
}

#[derive(Serialize, Deserialize)]
struct Triplet {
    row: usize,
    col: usize,
    count: u32,
}

#[derive(Serialize, Deserialize)]
struct EdgeRow {
    src: String,
    dst: String,
    count: u32,
    ts_last: i64,
}

#[derive(Serialize, Deserialize)]
struct EventRow {
    ts: i64,
    src: String,
    dst: String,
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Schema {
        file: path.display().to_string(),
        line: e.line(),
        message: e.to_string(),
    })
}

fn schema(path: &Path, message: impl Into<String>) -> Error {
    Error::Schema {
        file: path.display().to_string(),
        line: 0,
        message: message.into(),
    }
}

impl Corpus {
    fn matrix(&self, name: &str) -> &SparseCountMatrix {
        match name {
            "M" => &self.statuses,
            "P" => &self.interactions,
            "W" => &self.authors,
            "C" => &self.candidates,
            _ => &self.profiles,
        }
    }

    /// Writes the corpus into `dir`, creating it if needed. Output bytes are a
    /// pure function of the corpus.
    pub fn save(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let shapes = MATRICES
            .iter()
            .map(|&n| (n.to_string(), (self.matrix(n).rows(), self.matrix(n).cols())))
            .collect();
        write_json(
            &dir.join("corpus.json"),
            &Header {
                format_version: FORMAT_VERSION,
                config: self.config.clone(),
                shapes,
            },
        )?;
        for role in [VocabRole::Status, VocabRole::Interaction, VocabRole::Interactor] {
            write_json(
                &dir.join(format!("vocab_{}.json", role.file_stem())),
                &self.vocab(role).to_map(),
            )?;
        }
        for name in MATRICES {
            let mut w = csv::Writer::from_path(dir.join(format!("matrix_{name}.csv")))?;
            for (row, col, count) in self.matrix(name).entries() {
                w.serialize(Triplet { row, col, count })?;
            }
            w.flush().map_err(|e| Error::io(dir, e))?;
        }
        write_json(&dir.join("users.json"), &self.users)?;

        let mut edges: BTreeMap<(usize, usize), (u32, i64)> = BTreeMap::new();
        let mut events = csv::Writer::from_path(dir.join("network_events.csv"))?;
        for e in &self.events {
            let slot = edges.entry((e.src, e.dst)).or_insert((0, i64::MIN));
            slot.0 += 1;
            slot.1 = slot.1.max(e.ts);
            events.serialize(EventRow {
                ts: e.ts,
                src: self.users[e.src].clone(),
                dst: self.users[e.dst].clone(),
            })?;
        }
        events.flush().map_err(|e| Error::io(dir, e))?;
        let mut net = csv::Writer::from_path(dir.join("network.csv"))?;
        for ((src, dst), (count, ts_last)) in edges {
            net.serialize(EdgeRow {
                src: self.users[src].clone(),
                dst: self.users[dst].clone(),
                count,
                ts_last,
            })?;
        }
        net.flush().map_err(|e| Error::io(dir, e))?;

        let path = dir.join("timelines.jsonl");
        let file = fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
        let mut w = BufWriter::new(file);
        for tl in &self.timelines {
            serde_json::to_writer(&mut w, tl)?;
            w.write_all(b"\n").map_err(|e| Error::io(&path, e))?;
        }
        w.flush().map_err(|e| Error::io(&path, e))
    }

    /// Reads a corpus previously written by [`Corpus::save`].
    pub fn load(dir: &Path) -> Result<Self> {
        let header_path = dir.join("corpus.json");
        let header: Header = read_json(&header_path)?;
        if header.format_version != FORMAT_VERSION {
            return Err(schema(
                &header_path,
                format!("unsupported format_version {}", header.format_version),
            ));
        }
        let mut vocabs = Vec::new();
        for role in [VocabRole::Status, VocabRole::Interaction, VocabRole::Interactor] {
            let path = dir.join(format!("vocab_{}.json", role.file_stem()));
            let map: BTreeMap<String, usize> = read_json(&path)?;
            vocabs.push(
                Vocabulary::from_map(role, map)
                    .ok_or_else(|| schema(&path, "columns are not a dense 0..n range"))?,
            );
        }
        let mut matrices = BTreeMap::new();
        for name in MATRICES {
            let path = dir.join(format!("matrix_{name}.csv"));
            let &(rows, cols) = header
                .shapes
                .get(name)
                .ok_or_else(|| schema(&header_path, format!("missing shape for {name}")))?;
            let mut entries = Vec::new();
            for rec in csv::Reader::from_path(&path)?.deserialize() {
                let t: Triplet = rec?;
                entries.push((t.row, t.col, t.count));
            }
            matrices.insert(name, SparseCountMatrix::from_triplets(rows, cols, entries)?);
        }
        let users: Vec<String> = read_json(&dir.join("users.json"))?;
        let index: std::collections::HashMap<&str, usize> =
            users.iter().enumerate().map(|(i, u)| (u.as_str(), i)).collect();
        let events_path = dir.join("network_events.csv");
        let mut events = Vec::new();
        for rec in csv::Reader::from_path(&events_path)?.deserialize() {
            let r: EventRow = rec?;
            let lookup = |u: &str| {
                index
                    .get(u)
                    .copied()
                    .ok_or_else(|| schema(&events_path, format!("unknown user `{u}`")))
            };
            events.push(InteractionEvent {
                ts: r.ts,
                src: lookup(&r.src)?,
                dst: lookup(&r.dst)?,
            });
        }
        let path = dir.join("timelines.jsonl");
        let file = fs::File::open(&path).map_err(|e| Error::io(&path, e))?;
        let mut timelines = Vec::new();
        for (i, line) in BufReader::new(file).lines().enumerate() {
            let line = line.map_err(|e| Error::io(&path, e))?;
            if line.trim().is_empty() {
                continue;
            }
            let tl: UserTimeline = serde_json::from_str(&line).map_err(|e| Error::Schema {
                file: path.display().to_string(),
                line: i + 1,
                message: e.to_string(),
            })?;
            timelines.push(tl);
        }
        let mut vocabs = vocabs.into_iter();
        let mut take = |n: &str| matrices.remove(n).expect("all matrices loaded");
        Ok(Corpus {
            config: header.config,
            status_vocab: vocabs.next().expect("three vocabularies"),
            interaction_vocab: vocabs.next().expect("three vocabularies"),
            interactor_vocab: vocabs.next().expect("three vocabularies"),
            statuses: take("M"),
            interactions: take("P"),
            authors: take("W"),
            candidates: take("C"),
            profiles: take("R"),
            users,
            events,
            timelines,
        })
    }
}
