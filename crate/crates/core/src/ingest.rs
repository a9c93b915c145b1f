//! Readers and writers for the on-disk event formats.
//!
//! * posts: NDJSON, `post_id`, `author_id`, `timestamp_ms`, optional
//!   `name`, `screen_name`, `profile`
//! * reposts: NDJSON, `repost_id`, `user_id`, `source_post_id`, `timestamp_ms`
//! * users (optional): NDJSON, `user_id`, optional `name`, `screen_name`,
//!   `profile`, `followers_count`, `topic`
//! * follower graph: CSV `follower_id,followee_id`, header optional
//!
//! Every reader sniffs the gzip magic bytes and decompresses transparently.
//! Ids may be JSON integers or strings. Decimal strings keep their numeric
//! value; any other string is interned into the upper half of the `u64`
//! range so it can never collide with a numeric id.

use std::fs::File;
use std::io::{self, BufRead, BufReader, Read, Write};
use std::path::{Path, PathBuf};

use flate2::read::MultiGzDecoder;
use rustc_hash::{FxHashMap, FxHashSet};
use serde::{Deserialize, Serialize};

use crate::model::{
    validate_event_stream, FollowerGraph, Millis, PostEvent, PostId, RepostEvent, RepostId, UserId, ValidationReport,
};

const INTERNED_BIT: u64 = 1 << 63;

#[derive(Debug, thiserror::Error)]
pub enum IngestError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("{path}:{line}: {message}")]
    Malformed { path: PathBuf, line: usize, message: String },
    #[error("{path}: duplicate id {id} on lines {first_line} and {second_line}")]
    DuplicateId { path: PathBuf, id: String, first_line: usize, second_line: usize },
}

impl IngestError {
    pub fn line(&self) -> Option<usize> {
        match self {
            IngestError::Io { .. } => None,
            IngestError::Malformed { line, .. } => Some(*line),
            IngestError::DuplicateId { second_line, .. } => Some(*second_line),
        }
    }
}

/// What to do with a line that does not parse.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MalformedPolicy {
    #[default]
    SkipAndLog,
    FailFast,
}

/// Case-insensitive keyword match over an account's name, screen name and
/// profile text.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OfficialAccountFilter {
    keywords: Vec<String>,
}

impl Default for OfficialAccountFilter {
    fn default() -> Self {
        Self::new(["official", "公式"])
    }
}

impl OfficialAccountFilter {
    pub fn new<I, S>(keywords: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let keywords =
            keywords.into_iter().map(|k| k.as_ref().trim().to_lowercase()).filter(|k| !k.is_empty()).collect();
        OfficialAccountFilter { keywords }
    }

    pub fn none() -> Self {
        OfficialAccountFilter { keywords: Vec::new() }
    }

    pub fn keywords(&self) -> &[String] {
        &self.keywords
    }

    pub fn matches(&self, meta: &UserMeta) -> bool {
        if self.keywords.is_empty() {
            return false;
        }
        [&meta.name, &meta.screen_name, &meta.profile]
            .into_iter()
            .flatten()
            .map(|text| text.to_lowercase())
            .any(|text| self.keywords.iter().any(|k| text.contains(k.as_str())))
    }
}

/// Maps external string ids to `u64`.
#[derive(Debug, Clone, Default)]
pub struct IdInterner {
    lookup: FxHashMap<String, u64>,
    names: Vec<String>,
}

impl IdInterner {
    pub fn intern(&mut self, raw: &RawId) -> u64 {
        match raw {
            RawId::Num(n) => *n,
            RawId::Str(s) => {
                if let Some(n) = parse_decimal(s) {
                    return n;
                }
                if let Some(&n) = self.lookup.get(s) {
                    return n;
                }
                let n = INTERNED_BIT | self.names.len() as u64;
                self.names.push(s.clone());
                self.lookup.insert(s.clone(), n);
                n
            }
        }
    }

    /// The external form of an id, as it should be written back out.
    pub fn external(&self, id: u64) -> RawId {
        if id & INTERNED_BIT != 0 {
            if let Some(name) = self.names.get((id & !INTERNED_BIT) as usize) {
                return RawId::Str(name.clone());
            }
        }
        RawId::Num(id)
    }
}

fn parse_decimal(s: &str) -> Option<u64> {
    let n: u64 = s.parse().ok()?;
    // keep ids with leading zeros or signs as opaque strings
    (n.to_string() == s && n & INTERNED_BIT == 0).then_some(n)
}

/// An id as it appears on disk.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum RawId {
    Num(u64),
    Str(String),
}

impl std::fmt::Display for RawId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            RawId::Num(n) => n.fmt(f),
            RawId::Str(s) => f.write_str(s),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct UserMeta {
    pub name: Option<String>,
    pub screen_name: Option<String>,
    pub profile: Option<String>,
    pub followers_count: Option<u64>,
    pub topic: Option<String>,
}

impl UserMeta {
    fn absorb(&mut self, other: UserMeta) {
        macro_rules! take {
            ($f:ident) => {
                if other.$f.is_some() {
                    self.$f = other.$f;
                }
            };
        }
        take!(name);
        take!(screen_name);
        take!(profile);
        take!(followers_count);
        take!(topic);
    }
}

/// Per-user metadata plus the external id mapping for users.
#[derive(Debug, Clone, Default)]
pub struct UserDirectory {
    ids: IdInterner,
    meta: FxHashMap<UserId, UserMeta>,
    known: FxHashSet<UserId>,
}

impl UserDirectory {
    pub fn intern(&mut self, raw: &RawId) -> UserId {
        let id = UserId(self.ids.intern(raw));
        self.known.insert(id);
        id
    }

    pub fn register(&mut self, user: UserId) {
        self.known.insert(user);
    }

    pub fn update(&mut self, user: UserId, meta: UserMeta) {
        self.known.insert(user);
        self.meta.entry(user).or_default().absorb(meta);
    }

    pub fn meta(&self, user: UserId) -> Option<&UserMeta> {
        self.meta.get(&user)
    }

    pub fn external_id(&self, user: UserId) -> RawId {
        self.ids.external(user.0)
    }

    pub fn contains(&self, user: UserId) -> bool {
        self.known.contains(&user)
    }

    /// All known users, ascending.
    pub fn users(&self) -> Vec<UserId> {
        let mut v: Vec<UserId> = self.known.iter().copied().collect();
        v.sort_unstable();
        v
    }

    pub fn len(&self) -> usize {
        self.known.len()
    }

    pub fn is_empty(&self) -> bool {
        self.known.is_empty()
    }

    /// Declared follower count, falling back to the graph's in-degree.
    pub fn follower_count(&self, user: UserId, graph: &FollowerGraph) -> Option<u64> {
        if let Some(n) = self.meta.get(&user).and_then(|m| m.followers_count) {
            return Some(n);
        }
        self.known.contains(&user).then(|| graph.followers_of(user).len() as u64)
    }

    pub fn topic(&self, user: UserId) -> Option<&str> {
        self.meta.get(&user).and_then(|m| m.topic.as_deref())
    }

    /// Users whose text fields match the filter.
    pub fn official_users(&self, filter: &OfficialAccountFilter) -> FxHashSet<UserId> {
        self.meta.iter().filter(|(_, m)| filter.matches(m)).map(|(&u, _)| u).collect()
    }

    /// Cross-checks declared follower counts against a complete graph.
    pub fn follower_count_mismatches(&self, graph: &FollowerGraph) -> Vec<(UserId, u64, usize)> {
        let mut out: Vec<_> = self
            .meta
            .iter()
            .filter_map(|(&u, m)| {
                let declared = m.followers_count?;
                let actual = graph.followers_of(u).len();
                (declared != actual as u64).then_some((u, declared, actual))
            })
            .collect();
        out.sort_unstable();
        out
    }
}

#[derive(Debug, Deserialize, Serialize)]
struct PostRecord {
    post_id: RawId,
    author_id: RawId,
    timestamp_ms: Millis,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    name: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    screen_name: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    profile: Option<String>,
}

#[derive(Debug, Deserialize, Serialize)]
struct RepostRecord {
    repost_id: RawId,
    user_id: RawId,
    source_post_id: RawId,
    timestamp_ms: Millis,
}

#[derive(Debug, Deserialize, Serialize)]
struct UserRecord {
    user_id: RawId,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    name: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    screen_name: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    profile: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    followers_count: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    topic: Option<String>,
}

/// A line the reader gave up on under [`MalformedPolicy::SkipAndLog`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SkippedLine {
    pub path: PathBuf,
    pub line: usize,
    pub reason: String,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct GraphLoadStats {
    pub lines: usize,
    pub self_edges_dropped: usize,
}

/// Opens a file, decompressing it if it starts with the gzip magic.
pub fn open_input(path: &Path) -> Result<Box<dyn BufRead>, IngestError> {
    let io_err = |source| IngestError::Io { path: path.to_path_buf(), source };
    let file = File::open(path).map_err(io_err)?;
    let mut reader = BufReader::new(file);
    let is_gzip = reader.fill_buf().map_err(io_err)?.starts_with(&[0x1f, 0x8b]);
    Ok(if is_gzip { Box::new(BufReader::new(MultiGzDecoder::new(reader))) } else { Box::new(reader) })
}

/// Stateful reader: interns ids and collects user metadata across files.
#[derive(Debug, Clone, Default)]
pub struct Ingestor {
    pub directory: UserDirectory,
    pub filter: OfficialAccountFilter,
    pub policy: MalformedPolicy,
    post_ids: IdInterner,
    repost_ids: IdInterner,
    skipped: Vec<SkippedLine>,
}

impl Ingestor {
    pub fn new(filter: OfficialAccountFilter, policy: MalformedPolicy) -> Self {
        Ingestor { filter, policy, ..Default::default() }
    }

    pub fn skipped(&self) -> &[SkippedLine] {
        &self.skipped
    }

    pub fn external_post_id(&self, id: PostId) -> RawId {
        self.post_ids.external(id.0)
    }

    pub fn external_repost_id(&self, id: RepostId) -> RawId {
        self.repost_ids.external(id.0)
    }

    fn reject(&mut self, err: IngestError) -> Result<(), IngestError> {
        match self.policy {
            MalformedPolicy::FailFast => Err(err),
            MalformedPolicy::SkipAndLog => {
                log::warn!("skipping: {err}");
                let (path, line) = match &err {
                    IngestError::Malformed { path, line, .. } => (path.clone(), *line),
                    IngestError::DuplicateId { path, second_line, .. } => (path.clone(), *second_line),
                    IngestError::Io { .. } => return Err(err),
                };
                self.skipped.push(SkippedLine { path, line, reason: err.to_string() });
                Ok(())
            }
        }
    }

    fn for_each_record<T, F>(&mut self, path: &Path, reader: impl BufRead, mut f: F) -> Result<(), IngestError>
    where
        T: for<'de> Deserialize<'de>,
        F: FnMut(&mut Self, usize, T) -> Result<(), IngestError>,
    {
        for (i, line) in reader.lines().enumerate() {
            let lineno = i + 1;
            let line = line.map_err(|source| IngestError::Io { path: path.to_path_buf(), source })?;
            if line.trim().is_empty() {
                continue;
            }
            match serde_json::from_str::<T>(&line) {
                Ok(rec) => f(self, lineno, rec)?,
                Err(e) => self.reject(IngestError::Malformed {
                    path: path.to_path_buf(),
                    line: lineno,
                    message: e.to_string(),
                })?,
            }
        }
        Ok(())
    }

    pub fn load_users(&mut self, path: &Path) -> Result<usize, IngestError> {
        let reader = open_input(path)?;
        self.read_users(path, reader)
    }

    pub fn read_users(&mut self, path: &Path, reader: impl BufRead) -> Result<usize, IngestError> {
        let mut n = 0;
        self.for_each_record(path, reader, |this, _, rec: UserRecord| {
            let user = this.directory.intern(&rec.user_id);
            this.directory.update(
                user,
                UserMeta {
                    name: rec.name,
                    screen_name: rec.screen_name,
                    profile: rec.profile,
                    followers_count: rec.followers_count,
                    topic: rec.topic,
                },
            );
            n += 1;
            Ok(())
        })?;
        Ok(n)
    }

    /// Posts in file order with `is_official` resolved from the directory.
    pub fn load_posts(&mut self, path: &Path) -> Result<Vec<PostEvent>, IngestError> {
        let reader = open_input(path)?;
        self.read_posts(path, reader)
    }

    pub fn read_posts(&mut self, path: &Path, reader: impl BufRead) -> Result<Vec<PostEvent>, IngestError> {
        let mut posts = Vec::new();
        let mut first_seen: FxHashMap<PostId, usize> = FxHashMap::default();
        self.for_each_record(path, reader, |this, lineno, rec: PostRecord| {
            let post_id = PostId(this.post_ids.intern(&rec.post_id));
            if let Some(&first_line) = first_seen.get(&post_id) {
                return this.reject(IngestError::DuplicateId {
                    path: path.to_path_buf(),
                    id: rec.post_id.to_string(),
                    first_line,
                    second_line: lineno,
                });
            }
            if rec.timestamp_ms < 0 {
                return this.reject(IngestError::Malformed {
                    path: path.to_path_buf(),
                    line: lineno,
                    message: format!("negative timestamp {}", rec.timestamp_ms),
                });
            }
            first_seen.insert(post_id, lineno);
            let author = this.directory.intern(&rec.author_id);
            if rec.name.is_some() || rec.screen_name.is_some() || rec.profile.is_some() {
                this.directory.update(
                    author,
                    UserMeta {
                        name: rec.name,
                        screen_name: rec.screen_name,
                        profile: rec.profile,
                        ..Default::default()
                    },
                );
            }
            posts.push(PostEvent { post_id, author, timestamp: rec.timestamp_ms, is_official: false });
            Ok(())
        })?;
        self.mark_official(&mut posts);
        Ok(posts)
    }

    /// Recomputes `is_official` from directory text only.
    pub fn mark_official(&self, posts: &mut [PostEvent]) {
        for p in posts.iter_mut() {
            p.is_official = self.directory.meta(p.author).is_some_and(|m| self.filter.matches(m));
        }
    }

    /// Reposts in file order.
    pub fn load_reposts(&mut self, path: &Path) -> Result<Vec<RepostEvent>, IngestError> {
        let reader = open_input(path)?;
        self.read_reposts(path, reader)
    }

    pub fn read_reposts(&mut self, path: &Path, reader: impl BufRead) -> Result<Vec<RepostEvent>, IngestError> {
        let mut reposts = Vec::new();
        let mut first_seen: FxHashMap<RepostId, usize> = FxHashMap::default();
        self.for_each_record(path, reader, |this, lineno, rec: RepostRecord| {
            let repost_id = RepostId(this.repost_ids.intern(&rec.repost_id));
            if let Some(&first_line) = first_seen.get(&repost_id) {
                return this.reject(IngestError::DuplicateId {
                    path: path.to_path_buf(),
                    id: rec.repost_id.to_string(),
                    first_line,
                    second_line: lineno,
                });
            }
            first_seen.insert(repost_id, lineno);
            let reposter = this.directory.intern(&rec.user_id);
            reposts.push(RepostEvent {
                repost_id,
                reposter,
                source_post_id: PostId(this.post_ids.intern(&rec.source_post_id)),
                timestamp: rec.timestamp_ms,
            });
            Ok(())
        })?;
        Ok(reposts)
    }

    pub fn load_follower_graph(&mut self, path: &Path) -> Result<(FollowerGraph, GraphLoadStats), IngestError> {
        let reader = open_input(path)?;
        self.read_follower_graph(path, reader)
    }

    pub fn read_follower_graph(
        &mut self,
        path: &Path,
        reader: impl Read,
    ) -> Result<(FollowerGraph, GraphLoadStats), IngestError> {
        let mut csv =
            csv::ReaderBuilder::new().has_headers(false).flexible(true).trim(csv::Trim::All).from_reader(reader);
        let mut edges = Vec::new();
        let mut lines = 0;
        for (i, record) in csv.records().enumerate() {
            let lineno = i + 1;
            let record = match record {
                Ok(r) => r,
                Err(e) => {
                    self.reject(IngestError::Malformed {
                        path: path.to_path_buf(),
                        line: lineno,
                        message: e.to_string(),
                    })?;
                    continue;
                }
            };
            lines += 1;
            if lineno == 1 && is_graph_header(&record) {
                continue;
            }
            if record.len() != 2 || record.iter().any(str::is_empty) {
                self.reject(IngestError::Malformed {
                    path: path.to_path_buf(),
                    line: lineno,
                    message: format!("expected `follower_id,followee_id`, got {} fields", record.len()),
                })?;
                continue;
            }
            let a = self.directory.intern(&RawId::Str(record[0].to_string()));
            let b = self.directory.intern(&RawId::Str(record[1].to_string()));
            edges.push((a, b));
        }
        let (graph, self_edges_dropped) = FollowerGraph::from_edges(edges);
        if self_edges_dropped > 0 {
            log::warn!("{}: dropped {self_edges_dropped} self-edges", path.display());
        }
        Ok((graph, GraphLoadStats { lines, self_edges_dropped }))
    }

    pub fn write_posts(&self, posts: &[PostEvent], mut out: impl Write) -> io::Result<()> {
        for p in posts {
            let meta = self.directory.meta(p.author);
            let rec = PostRecord {
                post_id: self.post_ids.external(p.post_id.0),
                author_id: self.directory.external_id(p.author),
                timestamp_ms: p.timestamp,
                name: meta.and_then(|m| m.name.clone()),
                screen_name: meta.and_then(|m| m.screen_name.clone()),
                profile: meta.and_then(|m| m.profile.clone()),
            };
            serde_json::to_writer(&mut out, &rec)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn write_reposts(&self, reposts: &[RepostEvent], mut out: impl Write) -> io::Result<()> {
        for r in reposts {
            let rec = RepostRecord {
                repost_id: self.repost_ids.external(r.repost_id.0),
                user_id: self.directory.external_id(r.reposter),
                source_post_id: self.post_ids.external(r.source_post_id.0),
                timestamp_ms: r.timestamp,
            };
            serde_json::to_writer(&mut out, &rec)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn write_users(&self, mut out: impl Write) -> io::Result<()> {
        for u in self.directory.users() {
            let Some(m) = self.directory.meta(u) else { continue };
            let rec = UserRecord {
                user_id: self.directory.external_id(u),
                name: m.name.clone(),
                screen_name: m.screen_name.clone(),
                profile: m.profile.clone(),
                followers_count: m.followers_count,
                topic: m.topic.clone(),
            };
            serde_json::to_writer(&mut out, &rec)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn write_follower_graph(&self, graph: &FollowerGraph, mut out: impl Write) -> io::Result<()> {
        writeln!(out, "follower_id,followee_id")?;
        for (a, b) in graph.edges() {
            writeln!(out, "{},{}", self.directory.external_id(a), self.directory.external_id(b))?;
        }
        Ok(())
    }
}

fn is_graph_header(record: &csv::StringRecord) -> bool {
    record.len() == 2 && record[0].eq_ignore_ascii_case("follower_id") && record[1].eq_ignore_ascii_case("followee_id")
}

/// Posts, reposts and graph in canonical order, plus what ingest learned.
#[derive(Debug, Clone, Default)]
pub struct Dataset {
    pub posts: Vec<PostEvent>,
    pub reposts: Vec<RepostEvent>,
    pub graph: FollowerGraph,
    pub directory: UserDirectory,
    pub filter: OfficialAccountFilter,
}

impl Dataset {
    /// Sorts events by `(timestamp, id)` and registers every user seen.
    pub fn new(
        mut posts: Vec<PostEvent>,
        mut reposts: Vec<RepostEvent>,
        graph: FollowerGraph,
        mut directory: UserDirectory,
        filter: OfficialAccountFilter,
    ) -> Self {
        // stable sorts: crawl order is nearly sorted already
        posts.sort_by_key(|p| (p.timestamp, p.post_id));
        reposts.sort_by_key(|r| (r.timestamp, r.repost_id));
        for p in &posts {
            directory.register(p.author);
        }
        for r in &reposts {
            directory.register(r.reposter);
        }
        for &u in graph.users() {
            directory.register(u);
        }
        Dataset { posts, reposts, graph, directory, filter }
    }

    pub fn validate(&self) -> ValidationReport {
        validate_event_stream(&self.posts, &self.reposts)
    }

    pub fn official_users(&self) -> FxHashSet<UserId> {
        self.directory.official_users(&self.filter)
    }

    /// Every user in the directory, ascending.
    pub fn all_users(&self) -> Vec<UserId> {
        self.directory.users()
    }
}

/// Input locations for [`load_dataset`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InputPaths {
    pub posts: PathBuf,
    pub reposts: PathBuf,
    pub follower_graph: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub users: Option<PathBuf>,
}

pub fn load_dataset(
    paths: &InputPaths,
    filter: OfficialAccountFilter,
    policy: MalformedPolicy,
) -> Result<(Dataset, Ingestor), IngestError> {
    let mut ingest = Ingestor::new(filter.clone(), policy);
    if let Some(users) = &paths.users {
        ingest.load_users(users)?;
    }
    let posts = ingest.load_posts(&paths.posts)?;
    let reposts = ingest.load_reposts(&paths.reposts)?;
    let (graph, _) = ingest.load_follower_graph(&paths.follower_graph)?;
    let dataset = Dataset::new(posts, reposts, graph, ingest.directory.clone(), filter);
    Ok((dataset, ingest))
}
