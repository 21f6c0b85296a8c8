//! In-memory triple store backing the knowledge-base tools.
//!
//! The store is built once and never mutated. Queries follow outgoing edges
//! only; inverse relations must be present in the data as their own triples.
//! Every list-returning query is sorted so prompts stay byte-reproducible.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::io::BufRead;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Relation holding class memberships (`entity type class`).
pub const TYPE_RELATION: &str = "type";

/// Marker prefix for numeric literals in the object column.
pub const NUMBER_MARKER: &str = "#num#";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TokenError {
    #[error("empty token")]
    Empty,
    #[error("token {0:?} contains the forbidden character {1:?}")]
    Forbidden(String, char),
    #[error("token {0:?} starts with '#', which is reserved for variables and comments")]
    LeadingHash(String),
}

/// Checks that a token can be embedded in the action grammar unquoted.
pub fn validate_token(token: &str) -> Result<(), TokenError> {
    if token.is_empty() {
        return Err(TokenError::Empty);
    }
    if token.starts_with('#') {
        return Err(TokenError::LeadingHash(token.to_string()));
    }
    if let Some(c) = token
        .chars()
        .find(|c| c.is_whitespace() || matches!(c, ',' | '(' | ')' | '"' | '\\'))
    {
        return Err(TokenError::Forbidden(token.to_string(), c));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct EntityId(String);

impl EntityId {
    pub fn new(id: impl Into<String>) -> Result<Self, TokenError> {
        let id = id.into();
        validate_token(&id)?;
        Ok(Self(id))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl TryFrom<String> for EntityId {
    type Error = TokenError;

    fn try_from(value: String) -> Result<Self, Self::Error> {
        Self::new(value)
    }
}

impl From<EntityId> for String {
    fn from(id: EntityId) -> Self {
        id.0
    }
}

impl fmt::Display for EntityId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum TypedObject {
    Entity(EntityId),
    Text(String),
    Number(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Triple {
    pub subject: EntityId,
    pub relation: String,
    pub object: TypedObject,
}

impl Triple {
    pub fn new(subject: EntityId, relation: impl Into<String>, object: TypedObject) -> Self {
        Self {
            subject,
            relation: relation.into(),
            object,
        }
    }
}

/// Objects reachable from one (subject, relation) pair, split by kind.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Objects {
    pub entities: BTreeSet<EntityId>,
    pub texts: BTreeSet<String>,
    /// Sorted and deduplicated.
    pub numbers: Vec<f64>,
}

impl Objects {
    fn insert(&mut self, object: TypedObject) -> bool {
        match object {
            TypedObject::Entity(e) => self.entities.insert(e),
            TypedObject::Text(t) => self.texts.insert(t),
            TypedObject::Number(n) => {
                let n = if n == 0.0 { 0.0 } else { n };
                match self.numbers.binary_search_by(|probe| probe.total_cmp(&n)) {
                    Ok(_) => false,
                    Err(pos) => {
                        self.numbers.insert(pos, n);
                        true
                    }
                }
            }
        }
    }

    fn len(&self) -> usize {
        self.entities.len() + self.texts.len() + self.numbers.len()
    }
}

#[derive(Debug, Error)]
pub enum LoadError {
    #[error("line {line}: {reason}")]
    Malformed { line: usize, reason: String },
    #[error("failed to read triples: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Default)]
pub struct TripleStore {
    edges: BTreeMap<EntityId, BTreeMap<String, Objects>>,
    entities: BTreeSet<EntityId>,
    len: usize,
}

impl TripleStore {
    pub fn from_triples<I: IntoIterator<Item = Triple>>(triples: I) -> Self {
        let mut store = Self::default();
        for triple in triples {
            store.insert(triple);
        }
        store
    }

    fn insert(&mut self, triple: Triple) {
        self.entities.insert(triple.subject.clone());
        if let TypedObject::Entity(e) = &triple.object {
            self.entities.insert(e.clone());
        }
        let inserted = self
            .edges
            .entry(triple.subject)
            .or_default()
            .entry(triple.relation)
            .or_default()
            .insert(triple.object);
        if inserted {
            self.len += 1;
        }
    }

    /// Number of distinct triples.
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Whether the id occurs as a subject or as an entity object.
    pub fn contains_entity(&self, id: &EntityId) -> bool {
        self.entities.contains(id)
    }

    pub fn entities(&self) -> impl Iterator<Item = &EntityId> {
        self.entities.iter()
    }

    pub fn objects(&self, subject: &EntityId, relation: &str) -> Option<&Objects> {
        self.edges.get(subject)?.get(relation)
    }

    /// All distinct triples in (subject, relation, kind, value) order.
    pub fn triples(&self) -> impl Iterator<Item = Triple> + '_ {
        self.edges.iter().flat_map(|(subject, by_relation)| {
            by_relation.iter().flat_map(move |(relation, objects)| {
                let entities = objects
                    .entities
                    .iter()
                    .map(|e| TypedObject::Entity(e.clone()));
                let texts = objects.texts.iter().map(|t| TypedObject::Text(t.clone()));
                let numbers = objects.numbers.iter().map(|&n| TypedObject::Number(n));
                entities
                    .chain(texts)
                    .chain(numbers)
                    .map(move |object| Triple::new(subject.clone(), relation.clone(), object))
            })
        })
    }

    pub fn relations_of(&self, entities: &BTreeSet<EntityId>) -> Vec<String> {
        let mut out = BTreeSet::new();
        for e in entities {
            if let Some(by_relation) = self.edges.get(e) {
                out.extend(
                    by_relation
                        .iter()
                        .filter(|(_, objects)| objects.len() > 0)
                        .map(|(r, _)| r.clone()),
                );
            }
        }
        out.into_iter().collect()
    }

    pub fn neighbors_of(&self, entities: &BTreeSet<EntityId>, relation: &str) -> BTreeSet<EntityId> {
        entities
            .iter()
            .filter_map(|e| self.objects(e, relation))
            .flat_map(|objects| objects.entities.iter().cloned())
            .collect()
    }

    /// Relations under which at least one of the entities has a numeric object.
    pub fn numeric_attributes_of(&self, entities: &BTreeSet<EntityId>) -> Vec<String> {
        let mut out = BTreeSet::new();
        for e in entities {
            if let Some(by_relation) = self.edges.get(e) {
                out.extend(
                    by_relation
                        .iter()
                        .filter(|(_, objects)| !objects.numbers.is_empty())
                        .map(|(r, _)| r.clone()),
                );
            }
        }
        out.into_iter().collect()
    }

    /// Every (entity, value) pair of a numeric attribute, ordered by entity then value.
    pub fn attribute_values(&self, entities: &BTreeSet<EntityId>, attribute: &str) -> Vec<(EntityId, f64)> {
        entities
            .iter()
            .filter_map(|e| self.objects(e, attribute).map(|objects| (e, objects)))
            .flat_map(|(e, objects)| objects.numbers.iter().map(move |&n| (e.clone(), n)))
            .collect()
    }

    /// Class names asserted for an entity through the `type` relation.
    pub fn classes_of(&self, entity: &EntityId) -> BTreeSet<String> {
        self.objects(entity, TYPE_RELATION)
            .map(|objects| objects.entities.iter().map(|c| c.as_str().to_string()).collect())
            .unwrap_or_default()
    }
}

/// Reads the tab-separated triple format.
///
/// Each non-blank, non-comment line holds `subject<TAB>relation<TAB>object`.
/// The object is a string literal when wrapped in double quotes, a number when
/// prefixed with `#num#`, and an entity id otherwise. Lines starting with `#`
/// are comments.
pub fn load_triples<R: BufRead>(source: R) -> Result<TripleStore, LoadError> {
    let mut store = TripleStore::default();
    for (index, line) in source.lines().enumerate() {
        let line = line?;
        let line_no = index + 1;
        let line = line.strip_suffix('\r').unwrap_or(&line);
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let triple = parse_line(line).map_err(|reason| LoadError::Malformed {
            line: line_no,
            reason,
        })?;
        store.insert(triple);
    }
    Ok(store)
}

fn parse_line(line: &str) -> Result<Triple, String> {
    let fields: Vec<&str> = line.split('\t').collect();
    if fields.len() != 3 {
        return Err(format!("expected 3 tab-separated fields, found {}", fields.len()));
    }
    let subject = EntityId::new(fields[0]).map_err(|e| format!("bad subject: {e}"))?;
    validate_token(fields[1]).map_err(|e| format!("bad relation: {e}"))?;
    let object = parse_object(fields[2])?;
    Ok(Triple::new(subject, fields[1], object))
}

fn parse_object(field: &str) -> Result<TypedObject, String> {
    if let Some(literal) = field.strip_prefix(NUMBER_MARKER) {
        let value: f64 = literal
            .parse()
            .map_err(|_| format!("unparseable numeric literal {literal:?}"))?;
        if !value.is_finite() {
            return Err(format!("numeric literal {literal:?} is not finite"));
        }
        return Ok(TypedObject::Number(value));
    }
    if field.starts_with('"') {
        let inner = field
            .strip_prefix('"')
            .and_then(|s| s.strip_suffix('"'))
            .filter(|_| field.len() >= 2)
            .ok_or_else(|| format!("unterminated string literal {field}"))?;
        return Ok(TypedObject::Text(inner.replace("\\\"", "\"")));
    }
    EntityId::new(field)
        .map(TypedObject::Entity)
        .map_err(|e| format!("bad object: {e}"))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn id(s: &str) -> EntityId {
        EntityId::new(s).unwrap()
    }

    fn set(ids: &[&str]) -> BTreeSet<EntityId> {
        ids.iter().map(|s| id(s)).collect()
    }

    fn load(text: &str) -> TripleStore {
        load_triples(text.as_bytes()).unwrap()
    }

    const SONGS: &str = "\
songA\tduration\t#num#210.0
songB\tduration\t#num#185.5
songA\tperformer\tband1
songB\tperformer\tband2
songA\ttitle\t\"Song \\\"A\\\"\"
band1\tgenre\trock
";

    #[test]
    fn empty_stream() {
        let store = load("");
        assert!(store.is_empty());
        assert!(store.relations_of(&set(&["a"])).is_empty());
        assert!(store.neighbors_of(&set(&["a"]), "r").is_empty());
        assert!(store.numeric_attributes_of(&set(&["a"])).is_empty());
    }

    #[test]
    fn duplicate_lines_collapse() {
        let store = load("a\tr\tb\na\tr\tb\n");
        assert_eq!(store.len(), 1);
        assert_eq!(store.neighbors_of(&set(&["a"]), "r"), set(&["b"]));
    }

    #[test]
    fn comments_blank_lines_and_crlf() {
        let store = load("# header\n\n   \na\tr\tb\r\n#another\tcomment\tline\n");
        assert_eq!(store.len(), 1);
        assert!(store.contains_entity(&id("b")));
    }

    #[test]
    fn object_kinds() {
        let store = load(SONGS);
        let title = store.objects(&id("songA"), "title").unwrap();
        assert!(title.texts.contains("Song \"A\""));
        let duration = store.objects(&id("songB"), "duration").unwrap();
        assert_eq!(duration.numbers, vec![185.5]);
        assert!(store.contains_entity(&id("band2")));
    }

    #[test]
    fn numeric_queries() {
        let store = load(SONGS);
        let songs = set(&["songA", "songB"]);
        assert_eq!(store.numeric_attributes_of(&songs), vec!["duration"]);
        assert_eq!(
            store.attribute_values(&songs, "duration"),
            vec![(id("songA"), 210.0), (id("songB"), 185.5)]
        );
        assert!(store.numeric_attributes_of(&set(&["band1"])).is_empty());
        assert!(store.numeric_attributes_of(&BTreeSet::new()).is_empty());
        assert!(store.attribute_values(&BTreeSet::new(), "duration").is_empty());
    }

    #[test]
    fn relations_are_sorted_union() {
        let store = load("x\tb\t1e\nx\ta\ty\nx\tc\t\"lit\"\nz\ta\tw\nz\td\t#num#3\n");
        assert_eq!(store.relations_of(&set(&["x", "z"])), vec!["a", "b", "c", "d"]);
        assert!(store.relations_of(&BTreeSet::new()).is_empty());
    }

    #[test]
    fn scientific_and_signed_numbers() {
        let store = load("a\tv\t#num#-1.5e3\na\tv\t#num#+2\n");
        assert_eq!(store.objects(&id("a"), "v").unwrap().numbers, vec![-1500.0, 2.0]);
    }

    #[test]
    fn malformed_lines_name_their_line() {
        let cases = [
            ("a\tr\n", 1),
            ("a\tr\tb\n\na\t\tb\n", 3),
            ("a\tr\t#num#abc\n", 1),
            ("a\tr\t#num#inf\n", 1),
            ("a\tr\tb\tc\n", 1),
            ("a b\tr\tc\n", 1),
            ("a\tr\t\"open\n", 1),
        ];
        for (text, expected) in cases {
            match load_triples(text.as_bytes()) {
                Err(LoadError::Malformed { line, .. }) => assert_eq!(line, expected, "{text:?}"),
                other => panic!("{text:?} loaded: {other:?}"),
            }
        }
    }

    #[test]
    fn classes_come_from_type_triples() {
        let store = load("Inception\ttype\tfilm.film\nInception\ttype\tmedia.work\n");
        let classes: Vec<_> = store.classes_of(&id("Inception")).into_iter().collect();
        assert_eq!(classes, vec!["film.film", "media.work"]);
        assert!(store.classes_of(&id("film.film")).is_empty());
        assert!(store.contains_entity(&id("film.film")));
    }

    #[test]
    fn token_rules() {
        assert!(EntityId::new("Barack_Obama").is_ok());
        assert_eq!(EntityId::new(""), Err(TokenError::Empty));
        assert!(matches!(EntityId::new("Barack Obama"), Err(TokenError::Forbidden(_, ' '))));
        assert!(matches!(EntityId::new("a,b"), Err(TokenError::Forbidden(_, ','))));
        assert!(matches!(EntityId::new("#0"), Err(TokenError::LeadingHash(_))));
    }
}
